use reqwest::{Method, RequestBuilder};
use serde_json::Value;
use url::Url;

use super::CliError;
use crate::gateway::open_envelope;

/// Thin gateway client: one call per route, envelopes unwrapped.
#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: Url,
    token: Option<String>,
}

impl Client {
    pub fn new(base: Url, token: Option<String>) -> Self {
        Self {
            http: reqwest::Client::new(),
            base: crate::storage::normalize_base(base),
            token,
        }
    }

    pub fn base(&self) -> &Url {
        &self.base
    }

    fn url(&self, path: &str) -> Result<Url, CliError> {
        self.base
            .join(path.trim_start_matches('/'))
            .map_err(|e| CliError::Usage(format!("bad url for {path}: {e}")))
    }

    fn request(&self, method: Method, path: &str) -> Result<RequestBuilder, CliError> {
        let mut req = self.http.request(method, self.url(path)?);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        Ok(req)
    }

    async fn send(req: RequestBuilder) -> Result<Value, CliError> {
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        let body = resp.bytes().await.map_err(transport)?;
        let value: Value = serde_json::from_slice(&body).map_err(|_| {
            CliError::Transport(format!("unexpected {status} response without an envelope"))
        })?;
        open_envelope(value).map_err(CliError::Api)
    }

    pub async fn call(&self, method: Method, path: &str, body: Option<&Value>) -> Result<Value, CliError> {
        let mut req = self.request(method, path)?;
        if let Some(b) = body {
            req = req.json(b);
        }
        Self::send(req).await
    }

    pub async fn get_query(&self, path: &str, query: &[(&str, String)]) -> Result<Value, CliError> {
        Self::send(self.request(Method::GET, path)?.query(query)).await
    }

    /// PUTs raw bytes to a capability URL.
    pub async fn put_bytes(&self, url: &str, bytes: Vec<u8>) -> Result<Value, CliError> {
        let url = Url::parse(url).map_err(|e| CliError::Transport(format!("bad upload url: {e}")))?;
        Self::send(self.http.put(url).body(bytes)).await
    }

    /// GETs raw bytes from a capability URL.
    pub async fn get_bytes(&self, url: &str) -> Result<Vec<u8>, CliError> {
        let url = Url::parse(url).map_err(|e| CliError::Transport(format!("bad download url: {e}")))?;
        let resp = self.http.get(url).send().await.map_err(transport)?;
        let status = resp.status();
        let body = resp.bytes().await.map_err(transport)?;
        if status.is_success() {
            return Ok(body.to_vec());
        }
        match serde_json::from_slice::<Value>(&body).ok().map(open_envelope) {
            Some(Err(e)) => Err(CliError::Api(e)),
            _ => Err(CliError::Transport(format!("download failed with {status}"))),
        }
    }
}

fn transport(e: reqwest::Error) -> CliError {
    CliError::Transport(e.to_string())
}
