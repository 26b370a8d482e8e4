//! Merging of CSV run artifacts into one table per method.

use std::path::Path;

use crate::error::{Error, Result};
use crate::run::{read_record, sidecar_path, DRIFT_HEADER, FK_HEADER, PATH_HEADER, PREFACTOR_HEADER, SLAB_HEADER, SWEEP_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub method: String,
    /// Column names, `source` first.
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub sections: Vec<Section>,
}

fn method_for_header(header: &str) -> Option<&'static str> {
    [
        (FK_HEADER, "fk"),
        (SLAB_HEADER, "pide"),
        (PATH_HEADER, "variational"),
        (PREFACTOR_HEADER, "asymptotics.prefactor"),
        (DRIFT_HEADER, "asymptotics.drift"),
        (SWEEP_HEADER, "asymptotics.sweep"),
    ]
    .into_iter()
    .find(|(h, _)| *h == header)
    .map(|(_, m)| m)
}

/// Reads CSV artifacts. The method comes from the `.run.json` record when
/// present and from the header otherwise; within a method all headers must
/// agree. Sections keep the order in which methods first appear.
pub fn merge(paths: &[impl AsRef<Path>]) -> Result<Report> {
    if paths.is_empty() {
        return Err(Error::Config("report needs at least one artifact".into()));
    }
    let mut report = Report::default();
    for path in paths {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .from_path(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let bad = |e: csv::Error| Error::Config(format!("{}: not a CSV artifact ({e})", path.display()));
        let header: Vec<String> = reader.headers().map_err(bad)?.iter().map(String::from).collect();
        let joined = header.join(",");
        let method = if sidecar_path(path).exists() {
            read_record(path)?.method
        } else {
            method_for_header(&joined)
                .ok_or_else(|| Error::Config(format!("{}: unrecognized schema '{joined}'", path.display())))?
                .to_string()
        };
        let mut full_header = vec!["source".to_string()];
        full_header.extend(header);
        let source = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let rows = reader
            .records()
            .map(|r| {
                let r = r.map_err(bad)?;
                let mut row = vec![source.clone()];
                row.extend(r.iter().map(String::from));
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        match report.sections.iter_mut().find(|s| s.method == method) {
            Some(s) if s.header != full_header => {
                return Err(Error::Config(format!(
                    "mixed schema for method '{method}': {} has columns '{joined}', expected '{}'",
                    path.display(),
                    s.header[1..].join(",")
                )));
            }
            Some(s) => s.rows.extend(rows),
            None => report.sections.push(Section { method, header: full_header, rows }),
        }
    }
    if report.sections.iter().all(|s| s.rows.is_empty()) {
        return Err(Error::Config("report inputs contain no rows".into()));
    }
    Ok(report)
}

impl Report {
    /// `# method` line, header and rows per section, sections separated by a
    /// blank line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("# {}\n{}\n", s.method, s.header.join(",")));
            for r in &s.rows {
                out.push_str(&r.join(","));
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn merges_by_method() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "a.csv", &format!("{FK_HEADER}\nh,1,0,1,0.5,0.01,10,0.1,1\n"));
        let b = write(d.path(), "b.csv", &format!("{FK_HEADER}\nh,1,1,1,0.4,0.01,10,0.1,2\n"));
        let c = write(d.path(), "c.csv", &format!("{SWEEP_HEADER}\nh,0.4,0.5,0.1,-1,0,0.1,0.6,0.1,0.1,0.67,true\n"));
        let r = merge(&[&a, &b, &c]).unwrap();
        assert_eq!(r.sections.len(), 2);
        assert_eq!(r.sections[0].rows.len(), 2);
        assert_eq!(r.sections[0].rows[1][0], "b.csv");
        let text = r.render();
        assert!(text.starts_with("# fk\nsource,model_hash"));
        assert!(text.contains("\n\n# asymptotics.sweep\n"));
    }

    #[test]
    fn rejects_empty_and_mixed() {
        let none: [&Path; 0] = [];
        assert!(matches!(merge(&none), Err(Error::Config(_))));
        let d = tempfile::tempdir().unwrap();
        let e = write(d.path(), "e.csv", &format!("{FK_HEADER}\n"));
        assert!(matches!(merge(&[&e]), Err(Error::Config(_))));
        let odd = write(d.path(), "odd.csv", "x,y\n1,2\n");
        assert!(matches!(merge(&[&odd]), Err(Error::Config(_))));
    }
}
