//! Minimal CSV writing with field escaping.

/// Quotes a field when it contains separators, quotes or newlines.
pub fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One CSV line from already-stringified fields.
pub fn line(fields: &[String]) -> String {
    let escaped: Vec<String> = fields.iter().map(|f| escape(f)).collect();
    escaped.join(",") + "\n"
}
