//! Append-safe CSV and JSON emission with the effective config echoed.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

/// Where rows go; buffered so sweep output order never depends on worker
/// completion order.
pub struct Sink {
    target: Target,
}

enum Target {
    Stdout,
    File { path: std::path::PathBuf },
}

impl Sink {
    pub fn new(out: Option<&Path>) -> Self {
        Sink {
            target: match out {
                None => Target::Stdout,
                Some(p) => Target::File {
                    path: p.to_path_buf(),
                },
            },
        }
    }

    /// Writes a CSV block: `# config: ...` comment and header first, unless
    /// appending to an existing nonempty file.
    pub fn write_csv(
        &self,
        config_echo: &str,
        header: &str,
        rows: &[String],
    ) -> std::io::Result<()> {
        let mut body = String::new();
        if self.needs_header()? {
            body.push_str(&format!("# config: {config_echo}\n{header}\n"));
        }
        for row in rows {
            body.push_str(row);
            body.push('\n');
        }
        self.write_all(&body)
    }

    /// Writes one pretty-printed JSON document.
    pub fn write_json(&self, value: &serde_json::Value) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write_all(&text)
    }

    fn needs_header(&self) -> std::io::Result<bool> {
        match &self.target {
            Target::Stdout => Ok(true),
            Target::File { path } => match std::fs::metadata(path) {
                Ok(meta) => Ok(meta.len() == 0),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
                Err(e) => Err(e),
            },
        }
    }

    fn write_all(&self, text: &str) -> std::io::Result<()> {
        match &self.target {
            Target::Stdout => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                lock.write_all(text.as_bytes())?;
                lock.flush()
            }
            Target::File { path } => {
                let mut file = OpenOptions::new().create(true).append(true).open(path)?;
                file.write_all(text.as_bytes())
            }
        }
    }
}

/// Formats a float for CSV: shortest round-trip representation, so reruns
/// are byte-identical and parsers recover the exact value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}
