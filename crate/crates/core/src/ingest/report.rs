use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::QualityReport;

/// Pretty-printed JSON with a trailing newline. Key order is fixed by the
/// struct layout and `BTreeMap`s, so equal reports serialize identically.
pub fn report_to_json(report: &QualityReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Serde(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_report(report: &QualityReport, path: &Path) -> Result<()> {
    write_atomic(path, report_to_json(report)?.as_bytes())
}

pub fn read_report(path: &Path) -> Result<QualityReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidData(format!("{}: not a quality report: {e}", path.display())))
}

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
