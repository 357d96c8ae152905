//! CSV files with a provenance comment line.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Git revision the binary was built from.
pub const GIT_DESCRIBE: &str = env!("AOI_GIT_DESCRIBE");

/// What goes in the `#` line at the top of every CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seeds: Vec<u64>,
    pub omega: Vec<f64>,
}

impl Provenance {
    pub fn line(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "# seed={} git={} omega=[{}]",
            join(self.seeds.iter().map(u64::to_string).collect()),
            GIT_DESCRIBE,
            join(self.omega.iter().map(f64::to_string).collect()),
        )
    }
}

pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(
        dir: &Path,
        name: &str,
        prov: &Provenance,
        header: &[&str],
    ) -> Result<Self, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(name);
        let mut file = File::create(&path).map_err(io(&path))?;
        writeln!(file, "{}", prov.line()).map_err(io(&path))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { path, writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer.flush().map_err(|source| CliError::Io {
            path: self.path.clone(),
            source,
        })?;
        Ok(self.path)
    }
}

/// Formats an optional number, leaving the cell empty when absent.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
