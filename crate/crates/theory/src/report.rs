// SPDX-License-Identifier: Apache-2.0

//! Plain-text and `key=value` rendering of check reports.

use std::fmt::Write;

pub trait Report {
    /// Ordered `(key, value)` pairs.
    fn fields(&self) -> Vec<(String, String)>;

    /// One `prefix.key=value` line per field.
    fn key_values(&self, prefix: &str) -> String {
        let mut out = String::new();
        for (k, v) in self.fields() {
            if prefix.is_empty() {
                writeln!(out, "{k}={v}").unwrap();
            } else {
                writeln!(out, "{prefix}.{k}={v}").unwrap();
            }
        }
        out
    }

    /// Aligned `key : value` lines under a title.
    fn text(&self, title: &str) -> String {
        let fields = self.fields();
        let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = format!("{title}\n");
        for (k, v) in fields {
            writeln!(out, "  {k:<width$} : {v}").unwrap();
        }
        out
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:.6e}")
}

pub(crate) fn flag(b: bool) -> String {
    if b { "pass" } else { "fail" }.to_string()
}

pub(crate) fn verdict(v: Option<bool>) -> String {
    match v {
        Some(true) => "holds".into(),
        Some(false) => "violated".into(),
        None => "not-applicable".into(),
    }
}
