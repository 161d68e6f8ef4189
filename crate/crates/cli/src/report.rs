//! Run reports rendered twice from the same data: once as human-readable
//! key/value text, once as a JSON document.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

#[derive(Debug, Clone)]
pub enum Entry {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    List(Vec<f64>),
    Rows(Vec<Vec<f64>>),
    Complexes(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    sections: Vec<(String, Vec<(String, Entry)>)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a new section; subsequent entries land in it.
    pub fn open(&mut self, name: impl Into<String>) {
        self.sections.push((name.into(), Vec::new()));
    }

    pub fn put(&mut self, key: impl Into<String>, entry: Entry) {
        self.sections
            .last_mut()
            .expect("open a section before adding entries")
            .1
            .push((key.into(), entry));
    }

    pub fn num(&mut self, key: impl Into<String>, v: f64) {
        self.put(key, Entry::Num(v));
    }

    pub fn int(&mut self, key: impl Into<String>, v: usize) {
        self.put(key, Entry::Int(v as u64));
    }

    pub fn flag(&mut self, key: impl Into<String>, v: bool) {
        self.put(key, Entry::Bool(v));
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) {
        self.put(key, Entry::Text(v.into()));
    }

    pub fn list(&mut self, key: impl Into<String>, v: Vec<f64>) {
        self.put(key, Entry::List(v));
    }

    pub fn rows(&mut self, key: impl Into<String>, v: Vec<Vec<f64>>) {
        self.put(key, Entry::Rows(v));
    }

    pub fn complexes(&mut self, key: impl Into<String>, v: Vec<(f64, f64)>) {
        self.put(key, Entry::Complexes(v));
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, (name, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (key, entry) in entries {
                match entry {
                    Entry::Num(v) => {
                        let _ = writeln!(out, "{key} = {v}");
                    }
                    Entry::Int(v) => {
                        let _ = writeln!(out, "{key} = {v}");
                    }
                    Entry::Bool(v) => {
                        let _ = writeln!(out, "{key} = {v}");
                    }
                    Entry::Text(v) => {
                        let _ = writeln!(out, "{key} = {v}");
                    }
                    Entry::List(values) => {
                        let _ = writeln!(out, "{key} = {}", join_nums(values));
                    }
                    Entry::Rows(rows) => {
                        for (r, row) in rows.iter().enumerate() {
                            let _ = writeln!(out, "{key}.{r} = {}", join_nums(row));
                        }
                    }
                    Entry::Complexes(values) => {
                        let rendered: Vec<String> = values
                            .iter()
                            .map(|(re, im)| format!("{re}{im:+}j"))
                            .collect();
                        let _ = writeln!(out, "{key} = {}", rendered.join(", "));
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for (name, entries) in &self.sections {
            let mut section = Map::new();
            for (key, entry) in entries {
                let value = match entry {
                    Entry::Num(v) => Value::from(*v),
                    Entry::Int(v) => Value::from(*v),
                    Entry::Bool(v) => Value::from(*v),
                    Entry::Text(v) => Value::from(v.clone()),
                    Entry::List(values) => Value::from(values.clone()),
                    Entry::Rows(rows) => {
                        Value::from(rows.iter().cloned().map(Value::from).collect::<Vec<_>>())
                    }
                    Entry::Complexes(values) => Value::from(
                        values
                            .iter()
                            .map(|(re, im)| {
                                let mut c = Map::new();
                                c.insert("re".into(), Value::from(*re));
                                c.insert("im".into(), Value::from(*im));
                                Value::Object(c)
                            })
                            .collect::<Vec<_>>(),
                    ),
                };
                section.insert(key.clone(), value);
            }
            root.insert(name.clone(), Value::Object(section));
        }
        Value::Object(root)
    }

    /// Writes `<stem>.txt` and `<stem>.json` under `dir` and returns the text
    /// rendering.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<String, String> {
        let text = self.to_text();
        let txt_path = dir.join(format!("{stem}.txt"));
        fs::write(&txt_path, &text)
            .map_err(|e| format!("cannot write {}: {e}", txt_path.display()))?;
        let json = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&json_path, json + "\n")
            .map_err(|e| format!("cannot write {}: {e}", json_path.display()))?;
        Ok(text)
    }
}

fn join_nums(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
