//! Tabular output shared by the CSV and JSON writers.

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    pub fn opt_int(v: Option<usize>) -> Cell {
        v.map_or(Cell::Empty, |x| Cell::Int(x as i64))
    }

    /// 17 significant digits.
    pub fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) => if *v > 0.0 { "inf".into() } else { "-inf".into() },
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Output kind, e.g. `trajectory`.
    pub kind: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `key = value` facts about the table that are not configuration.
    pub meta: Vec<(String, String)>,
}

pub const GENERATOR: &str = concat!("eos-lab ", env!("CARGO_PKG_VERSION"));

impl Table {
    pub fn new(kind: &'static str, columns: Vec<&'static str>) -> Self {
        Self { kind, columns, rows: vec![], meta: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Numeric values of a column; non-numeric cells are skipped.
    pub fn numeric(&self, name: &str) -> Vec<(usize, f64)> {
        let Some(c) = self.column(name) else { return vec![] };
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r[c] {
                Cell::Num(v) if v.is_finite() => Some((i, v)),
                Cell::Int(v) => Some((i, v as f64)),
                _ => None,
            })
            .collect()
    }

    pub fn to_csv(&self, config: &[(&'static str, String)]) -> String {
        let mut s = format!("# {GENERATOR}\n# kind: {}\n", self.kind);
        for (k, v) in config {
            s.push_str(&format!("# config: {k} = {v}\n"));
        }
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self, config: &[(&'static str, String)]) -> String {
        let mut cfg = Map::new();
        for (k, v) in config {
            cfg.insert((*k).into(), json!(v));
        }
        let mut meta = Map::new();
        for (k, v) in &self.meta {
            meta.insert(k.clone(), json!(v));
        }
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
        let doc = json!({
            "generator": GENERATOR,
            "kind": self.kind,
            "config": cfg,
            "meta": meta,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json values are serializable");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_precision_round_trips() {
        let v = 0.1 + 0.2;
        let text = Cell::Num(v).csv();
        assert_eq!(text.parse::<f64>().unwrap(), v);
        assert_eq!(Cell::Empty.csv(), "");
    }

    #[test]
    fn csv_and_json_carry_the_same_rows() {
        let mut t = Table::new("demo", vec!["a", "b"]);
        t.push(vec![Cell::Int(1), Cell::Num(0.5)]);
        t.push(vec![Cell::Int(2), Cell::Empty]);
        let cfg = vec![("mode", "run".to_string())];
        let csv = t.to_csv(&cfg);
        assert!(csv.contains("# config: mode = run\na,b\n1,5.0000000000000000e-1\n2,\n"));
        let doc: Value = serde_json::from_str(&t.to_json(&cfg)).unwrap();
        assert_eq!(doc["rows"][0][1], json!(0.5));
        assert_eq!(doc["rows"][1][1], Value::Null);
        assert_eq!(doc["config"]["mode"], json!("run"));
    }
}
