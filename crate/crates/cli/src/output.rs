use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// A file or standard output.
pub enum Sink {
    File { path: PathBuf, inner: BufWriter<File> },
    Stdout(io::StdoutLock<'static>),
}

impl Sink {
    pub fn open(path: Option<PathBuf>) -> Result<Self> {
        match path {
            Some(path) => create(&path).map(|f| Sink::File { inner: BufWriter::new(f), path }),
            None => Ok(Sink::Stdout(io::stdout().lock())),
        }
    }

    pub fn finish(mut self) -> Result<()> {
        let path = match &self {
            Sink::File { path, .. } => path.clone(),
            Sink::Stdout(_) => PathBuf::from("<stdout>"),
        };
        self.flush().map_err(|source| CliError::Write { path, source })
    }
}

impl Write for Sink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Sink::File { inner, .. } => inner.write(buf),
            Sink::Stdout(s) => s.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Sink::File { inner, .. } => inner.flush(),
            Sink::Stdout(s) => s.flush(),
        }
    }
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
    }
    File::create(path).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

/// Shortest round-tripping decimal form; empty for `None`.
pub fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
