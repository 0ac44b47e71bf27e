use std::fs;
use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes `text` to `path` through a temporary file in the same directory, or to stdout.
pub fn emit(path: Option<&Path>, text: &str) -> io::Result<()> {
    let Some(path) = path else {
        let mut out = io::stdout().lock();
        out.write_all(text.as_bytes())?;
        return out.flush();
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(String, String), String> {
    let bytes =
        fs::read(path).map_err(|e| format!("cannot read model `{}`: {e}", path.display()))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| format!("cannot read model `{}`: not UTF-8", path.display()))?;
    let d = digest(text.as_bytes());
    Ok((text, d))
}
