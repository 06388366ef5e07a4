use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::Format;

/// Header written at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, Value>,
}

impl Header {
    pub fn new(command: &'static str, seed: Option<u64>, config: Value) -> Self {
        let mut flat = BTreeMap::new();
        flatten(config, &mut flat);
        Header {
            tool: "tlcp",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config: flat,
        }
    }

    fn csv_lines(&self) -> String {
        let mut s = format!(
            "# tool={} version={}\n# command={}\n",
            self.tool, self.version, self.command
        );
        match self.seed {
            Some(seed) => s.push_str(&format!("# seed={seed}\n")),
            None => s.push_str("# seed=none\n"),
        }
        for (k, v) in &self.config {
            let v = match v {
                Value::String(x) => x.clone(),
                other => other.to_string(),
            };
            s.push_str(&format!("# {k}={v}\n"));
        }
        s
    }
}

fn flatten(v: Value, out: &mut BTreeMap<String, Value>) {
    if let Value::Object(map) = v {
        for (k, v) in map {
            if v.is_object() {
                flatten(v, out);
            } else {
                out.insert(k, v);
            }
        }
    }
}

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// A finished result: CSV table and JSON document share one header.
pub struct Report {
    pub header: Header,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

impl Report {
    pub fn write(&self, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => {
                out.write_all(self.header.csv_lines().as_bytes())?;
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(&self.columns)?;
                for r in &self.rows {
                    w.write_record(r)?;
                }
                w.flush()?;
            }
            Format::Json => {
                let doc = serde_json::json!({ "header": self.header, "data": self.json });
                serde_json::to_writer_pretty(&mut *out, &doc)?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()
    }
}
