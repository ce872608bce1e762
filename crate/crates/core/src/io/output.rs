//! Run directories, CSV tables and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::snapshot::{write_snapshot, FieldSnapshot, SnapshotError};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| std::io::Error::other("path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

/// Hex SHA-256 of `text`, truncated to 16 characters.
pub fn short_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
}

/// Output directory of one run, named `<kind>-<hash of the manifest>`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub const MANIFEST: &'static str = "manifest.toml";

    /// Creates the directory under `config.output.dir` and writes the manifest.
    pub fn create(config: &RunConfig) -> std::io::Result<Self> {
        let manifest = config.to_manifest();
        let name = format!("{}-{}", config.experiment.kind.name(), short_hash(&manifest));
        let path = Path::new(&config.output.dir).join(name);
        fs::create_dir_all(&path)?;
        write_atomic(&path.join(Self::MANIFEST), manifest.as_bytes())?;
        Ok(Self { path })
    }

    pub fn write_csv(&self, name: &str, table: &CsvTable) -> std::io::Result<PathBuf> {
        let p = self.path.join(name);
        write_atomic(&p, &table.to_bytes())?;
        Ok(p)
    }

    pub fn write_snapshot(&self, name: &str, snap: &FieldSnapshot) -> Result<PathBuf, SnapshotError> {
        let p = self.path.join(name);
        write_snapshot(snap, &p)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count(), 17);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = CsvTable::new(["k", "err"]);
        t.push_numbers(&[0.5, 0.25]);
        t.push(vec!["order".into(), "2".into()]);
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert_eq!(text, "k,err\n5.0000000000000000e-1,2.5000000000000000e-1\norder,2\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
