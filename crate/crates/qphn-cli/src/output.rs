//! CSV output with a reproducibility header and atomic file replacement.
//!
//! Every file starts with `# qphn <version>` followed by the fully-resolved
//! configuration (one `# key = value` line each, defaults and seed included),
//! so a result file is a complete record of the run that produced it.
//! Files are composed in memory and written via a temporary file renamed into
//! place, so readers never observe a partially-written file.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::ExperimentConfig;

/// Accumulates one output file: metadata comments, a header row, data rows.
pub struct CsvBuilder {
    buf: String,
}

impl CsvBuilder {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# qphn {}", env!("CARGO_PKG_VERSION"));
        for line in cfg.canonical_text().lines() {
            let _ = writeln!(buf, "# {line}");
        }
        Self { buf }
    }

    /// Extra metadata line (`# key = value`) for scalar results such as
    /// detected crossings or drop temperatures.
    pub fn meta(&mut self, key: &str, value: impl AsRef<str>) {
        let _ = writeln!(self.buf, "# {key} = {}", value.as_ref());
    }

    pub fn header(&mut self, columns: &[String]) {
        let _ = writeln!(self.buf, "{}", columns.join(","));
    }

    /// One data row; floats are rendered with full precision so re-runs can
    /// be compared byte-for-byte.
    pub fn row(&mut self, cells: &[Cell]) {
        let mut first = true;
        for c in cells {
            if !first {
                self.buf.push(',');
            }
            first = false;
            match c {
                Cell::F(x) => {
                    let _ = write!(self.buf, "{x:.16e}");
                }
                Cell::S(s) => self.buf.push_str(s),
            }
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// A single CSV cell: a float (fixed scientific format) or verbatim text.
pub enum Cell {
    F(f64),
    S(String),
}

pub fn float_cells(values: impl IntoIterator<Item = f64>) -> Vec<Cell> {
    values.into_iter().map(Cell::F).collect()
}

/// Writes `content` to `path` atomically: the bytes go to a sibling
/// temporary file which is then renamed over the target.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, content)?;
    fs::rename(tmp, path)
}

/// Column labels `base_1 .. base_p`.
pub fn indexed(base: &str, p: usize) -> Vec<String> {
    (1..=p).map(|mu| format!("{base}_{mu}")).collect()
}

/// Header for a collective trajectory: time plus all five field families.
pub fn trajectory_header(p: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for base in ["m", "x", "xbar", "y", "ybar"] {
        cols.extend(indexed(base, p));
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load;

    #[test]
    fn header_contains_version_and_full_config() {
        let cfg = load("mode = hopf\nlambda = 2.5\n", None, &[]).unwrap();
        let mut b = CsvBuilder::new(&cfg);
        b.header(&["T".into(), "re".into()]);
        b.row(&[Cell::F(1.0), Cell::F(0.5)]);
        let text = b.finish();
        assert!(text.starts_with(&format!("# qphn {}\n", env!("CARGO_PKG_VERSION"))));
        assert!(text.contains("# mode = hopf\n"));
        assert!(text.contains("# seed = 1\n"), "defaults are echoed");
        assert!(text.contains("# hopf.n = 101\n"));
        assert!(text.contains("\nT,re\n"));
        assert!(text.contains("1.0000000000000000e0,5.0000000000000000e-1\n"));
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = std::env::temp_dir().join(format!("qphn-out-{}", std::process::id()));
        let path = dir.join("result.csv");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second\n");
        assert!(!dir.join("result.csv.tmp").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
