//! Artifact files: CSV grids, basis matrices and the text report.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use shiftmor::reference::GridFunction;

/// `_tX.XXX` suffix for an output time.
pub fn time_tag(t: f64) -> String {
    format!("_t{t:.3}")
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_owned() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn writer(&self, name: &str) -> io::Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    pub fn grid(&self, name: &str, u: &GridFunction) -> io::Result<()> {
        let mut w = self.writer(name)?;
        u.write_csv(&mut w)?;
        w.flush()
    }

    /// Columns sharing one grid, `x` first.
    pub fn columns(&self, name: &str, grid: &GridFunction, cols: &[(&str, &GridFunction)]) -> io::Result<()> {
        let mut w = self.writer(name)?;
        write!(w, "x")?;
        for (h, _) in cols {
            write!(w, ",{h}")?;
        }
        writeln!(w)?;
        for i in 0..grid.len() {
            write!(w, "{:.16e}", grid.x(i))?;
            for (_, c) in cols {
                write!(w, ",{:.16e}", c.values()[i])?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// Rows of numbers under a header line.
    pub fn table(&self, name: &str, header: &str, rows: &[Vec<f64>]) -> io::Result<()> {
        let mut w = self.writer(name)?;
        writeln!(w, "{header}")?;
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    }

    pub fn with_writer<F>(&self, name: &str, f: F) -> io::Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let mut w = self.writer(name)?;
        f(&mut w)?;
        w.flush()
    }

    pub fn text(&self, name: &str, body: &str) -> io::Result<()> {
        fs::write(self.path(name), body)
    }
}

/// Text matrix: a `rows cols` header, then one whitespace-separated row per line.
pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> io::Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix(path: &Path) -> io::Result<DMatrix<f64>> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {msg}", path.display()));
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| bad(format!("bad header `{header}`"))))
        .collect::<io::Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(bad(format!("bad header `{header}`")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate().take(rows) {
        let line = line?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad(format!("line {}: bad number `{s}`", i + 2))))
            .collect::<io::Result<_>>()?;
        if row.len() != cols {
            return Err(bad(format!("line {}: expected {cols} entries, found {}", i + 2, row.len())));
        }
        data.extend(row);
    }
    if data.len() != rows * cols {
        return Err(bad(format!("expected {rows} rows")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Key/value report with the resolved config appended.
#[derive(Debug, Default)]
pub struct Report {
    title: String,
    entries: Vec<(String, String)>,
    timings: Vec<(String, f64)>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Default::default() }
    }

    pub fn add(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.add(key, format!("{value:.6e}"));
    }

    pub fn time(&mut self, phase: impl Into<String>, secs: f64) {
        self.timings.push((phase.into(), secs));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The entries alone, one `key: value` per line.
    pub fn render_entries(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }

    pub fn render(&self, config_echo: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.title);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}: {v}");
        }
        if !self.timings.is_empty() {
            let _ = writeln!(s, "\n# wall clock [s]");
            for (k, v) in &self.timings {
                let _ = writeln!(s, "{k}: {v:.3}");
            }
        }
        let _ = writeln!(s, "\n# resolved configuration\n{config_echo}");
        s
    }
}
