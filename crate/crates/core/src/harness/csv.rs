use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const GIT_DESCRIBE: &str = env!("ROBINSIM_GIT_DESCRIBE");

/// Comment lines written above every CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub experiment: String,
    pub seed: u64,
    pub dt: Vec<f64>,
    pub n: Option<u64>,
}

impl Provenance {
    fn lines(&self) -> String {
        let dt: Vec<String> = self.dt.iter().map(|d| d.to_string()).collect();
        let n = self.n.map_or_else(|| "-".to_string(), |n| n.to_string());
        format!(
            "# experiment: {}\n# seed: {}\n# dt: {}\n# n: {}\n# git-describe: {}\n",
            self.experiment,
            self.seed,
            if dt.is_empty() {
                "-".to_string()
            } else {
                dt.join(" ")
            },
            n,
            GIT_DESCRIBE
        )
    }
}

pub fn write_csv<I, R>(path: &Path, prov: &Provenance, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut buf = prov.lines();
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|v| v.to_string()).collect();
        buf.push_str(&cells.join(","));
        buf.push('\n');
    }
    fs::File::create(path)?.write_all(buf.as_bytes())?;
    Ok(())
}

/// Like [`write_csv`] with a leading text column.
pub fn write_labelled_csv<I, R>(path: &Path, prov: &Provenance, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (String, R)>,
    R: AsRef<[f64]>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut buf = prov.lines();
    buf.push_str(header);
    buf.push('\n');
    for (label, row) in rows {
        buf.push_str(&label);
        for v in row.as_ref() {
            buf.push(',');
            buf.push_str(&v.to_string());
        }
        buf.push('\n');
    }
    fs::File::create(path)?.write_all(buf.as_bytes())?;
    Ok(())
}

/// Numeric rows of a CSV written by this module, skipping comments and the
/// header. Text cells are dropped.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').filter_map(|c| c.parse().ok()).collect())
        .collect())
}
