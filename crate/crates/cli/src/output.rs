use std::fs;
use std::path::{Path, PathBuf};

use lightlike::Result;
use serde_json::{json, Value};

use crate::settings::Settings;

pub struct Output {
    dir: PathBuf,
    provenance: String,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, settings: &Settings) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let provenance = format!(
            "lightlike {} subcommand={} config_sha256={} git=unknown",
            env!("CARGO_PKG_VERSION"),
            settings.subcommand,
            settings.digest()
        );
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        })
    }

    /// `body` must start with its header row.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, &format!("# {}\n{body}", self.provenance))
    }

    pub fn json(&mut self, name: &str, result: Value) -> Result<()> {
        let doc = json!({ "provenance": self.provenance, "result": result });
        self.write(name, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    pub fn gnuplot(&mut self, name: &str, body: &str) -> Result<()> {
        let head = "set datafile separator ','\nset key autotitle columnhead\n";
        self.write(name, &format!("# {}\n{head}{body}", self.provenance))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, body)
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
