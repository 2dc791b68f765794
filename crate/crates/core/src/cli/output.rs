use serde_json::Value;

/// How a command's result is shown in table mode.
#[derive(Debug, Clone, Copy)]
pub enum View {
    /// Rows of `items` (or of a bare array) under the given columns.
    Table(&'static [&'static str]),
    /// One `key: value` line per listed field.
    Record(&'static [&'static str]),
    /// A single line.
    Line(fn(&Value) -> String),
}

pub fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => "-".to_owned(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

fn rows(data: &Value) -> &[Value] {
    match data {
        Value::Array(items) => items,
        Value::Object(m) => match m.get("items") {
            Some(Value::Array(items)) => items,
            _ => std::slice::from_ref(data),
        },
        _ => std::slice::from_ref(data),
    }
}

pub fn table(data: &Value, columns: &[&str]) -> String {
    let body: Vec<Vec<String>> = rows(data)
        .iter()
        .map(|r| columns.iter().map(|c| cell(r.get(c))).collect())
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            body.iter()
                .map(|r| r[i].chars().count())
                .chain([c.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_owned()
    };
    let mut out = vec![line(columns.iter().map(|c| c.to_uppercase()).collect())];
    out.extend(body.into_iter().map(line));
    out.join("\n")
}

pub fn record(data: &Value, fields: &[&str]) -> String {
    let width = fields.iter().map(|f| f.len()).max().unwrap_or(0);
    fields
        .iter()
        .map(|f| format!("{f:<width$}  {}", cell(data.get(f))))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render(data: &Value, view: View) -> String {
    match view {
        View::Table(cols) => table(data, cols),
        View::Record(fields) => record(data, fields),
        View::Line(f) => f(data),
    }
}

/// Pretty JSON with object keys in sorted order.
pub fn json(data: &Value) -> String {
    serde_json::to_string_pretty(data).expect("json values always serialize")
}
