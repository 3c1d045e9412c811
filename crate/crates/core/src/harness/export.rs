use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| Error::invalid("path", format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// One line of an evaluation or sweep summary.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub config_id: String,
    pub seed: Option<u64>,
    /// Absent on aggregate rows.
    pub episode: Option<usize>,
    pub grid_value: Option<f64>,
    pub mean_cost: f64,
    pub mean_comm: f64,
    pub stable: bool,
    pub stable_fraction: f64,
    /// `ok`, or the failure that produced the row.
    pub status: String,
    pub wall_time: f64,
}

pub const RESULT_HEADER: [&str; 10] = [
    "config_id",
    "seed",
    "episode",
    "grid_value",
    "mean_cost",
    "mean_comm",
    "stable",
    "stable_fraction",
    "status",
    "wall_time",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        let status: String = r.status.chars().map(|c| if c.is_ascii() && !c.is_ascii_control() { c } else { '?' }).collect();
        w.write_record([
            r.config_id.clone(),
            opt(r.seed),
            opt(r.episode),
            opt(r.grid_value),
            r.mean_cost.to_string(),
            r.mean_comm.to_string(),
            u8::from(r.stable).to_string(),
            r.stable_fraction.to_string(),
            status,
            format!("{:.3}", r.wall_time),
        ])?;
    }
    w.into_inner().map_err(|e| Error::io("<summary>", e.into_error()))
}

/// Writes `rows` as CSV, replacing any existing file.
pub fn export_summary(rows: &[ResultRow], path: &Path) -> Result<()> {
    let bytes = summary_bytes(rows)?;
    debug_assert!(bytes.is_ascii());
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(comm: f64) -> ResultRow {
        ResultRow {
            config_id: "abc".into(),
            seed: Some(1),
            episode: None,
            grid_value: Some(0.5),
            mean_cost: 1.25,
            mean_comm: comm,
            stable: true,
            stable_fraction: 1.0,
            status: "ok".into(),
            wall_time: 0.0,
        }
    }

    #[test]
    fn header_only_when_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        export_summary(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), RESULT_HEADER.join(",") + "\n");
    }

    #[test]
    fn reexport_is_identical_ascii() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let mut rows = vec![row(0.25), row(1.0 / 3.0)];
        rows[1].status = "failed: θ blew up".into();
        export_summary(&rows, &p).unwrap();
        let first = std::fs::read(&p).unwrap();
        export_summary(&rows, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
        assert!(first.is_ascii());
        let text = String::from_utf8(first).unwrap();
        assert!(text.contains("abc,1,,0.5,1.25,0.25,1,1,ok,0.000"));
    }
}
