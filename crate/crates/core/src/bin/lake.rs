use lakehouse::cli::{run, Env};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let env = Env::from_process();
    let code = run(std::env::args(), &env, &mut std::io::stdout(), &mut std::io::stderr()).await;
    std::process::exit(code);
}
