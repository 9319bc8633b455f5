//! CSV and JSON writers for experiment artifacts. All numbers are printed
//! with the shortest round-trip form, so a fixed seed reproduces files
//! byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::grid::Field;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

/// Collects every file written under one experiment directory.
pub struct Exporter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Exporter {
    pub fn new(dir: PathBuf) -> Result<Exporter> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Exporter {
            dir,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Relative names of everything written so far.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content.as_bytes()).map_err(|e| io_err(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("serializing {name}: {e}"),
            ))
        })?;
        self.write_text(name, &text)
    }

    /// Nodal snapshot: one row per lattice node, pinned nodes carry 0.
    pub fn write_field_csv(&mut self, name: &str, u: &Field, t: Option<f64>) -> Result<()> {
        let g = u.grid();
        let stamp = match t {
            Some(t) => format!("{t}"),
            None => "stationary".into(),
        };
        let mut s = format!("# domain={} h={} t={stamp}\nx1,x2,value\n", g.domain, g.h);
        for idx in 0..g.node_count() {
            let (x, y) = g.coords(idx);
            let v = u.values()[idx];
            s.push_str(&format!("{x},{y},{v}\n"));
        }
        self.write_text(name, &s)
    }

    /// Time series over the accepted steps.
    pub fn write_trajectory_csv(&mut self, name: &str, tr: &Trajectory) -> Result<()> {
        let mut s = String::from("t,energy,ut_l2,min_u,max_u\n");
        for r in &tr.records {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t, r.energy, r.ut_l2, r.min_value, r.max_value
            ));
        }
        self.write_text(name, &s)
    }

    /// Small numeric table; one header line, rows of equal length.
    pub fn write_table_csv(&mut self, name: &str, header: &str, rows: &[Vec<f64>]) -> Result<()> {
        let mut s = format!("{header}\n");
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.write_text(name, &s)
    }
}

/// Short stable time tag for snapshot file names: 6 decimals, trailing
/// zeros trimmed.
pub fn time_tag(t: f64) -> String {
    let mut s = format!("{t:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};

    #[test]
    fn time_tags_are_short_and_stable() {
        assert_eq!(time_tag(0.1), "0.1");
        assert_eq!(time_tag(0.0), "0");
        assert_eq!(time_tag(0.48000000000000004), "0.48");
        assert_eq!(time_tag(2.0), "2");
    }

    #[test]
    fn field_csv_has_header_and_one_row_per_node() {
        let dir = tempfile::tempdir().unwrap();
        let mut ex = Exporter::new(dir.path().to_path_buf()).unwrap();
        let g = build_grid(Domain::Interval { x_lo: 0.0, x_hi: 1.0 }, 4).unwrap();
        let u = Field::from_fn(&g, |x, _| x);
        ex.write_field_csv("u.csv", &u, Some(0.5)).unwrap();
        let text = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# domain=interval"));
        assert!(lines[0].contains("t=0.5"));
        assert_eq!(lines[1], "x1,x2,value");
        assert_eq!(lines.len(), 2 + g.node_count());
        assert_eq!(ex.files(), &["u.csv".to_string()]);
    }
}
