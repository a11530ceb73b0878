use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// The only place commands write to. File names are bare names, so nothing
/// lands outside the directory.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(CliError::Usage(format!("bad output file name {name:?}")));
        }
        std::fs::create_dir_all(&self.root)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", self.root.display())))?;
        let p = self.root.join(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Comma-separated rows with a header, LF endings.
pub fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
