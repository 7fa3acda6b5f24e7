//! Comma-delimited text tables with a one-line header.
//!
//! Floats are written with `{:e}`, the shortest scientific form that parses
//! back to the same bits. Absent values are empty cells.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use corridor_core::runner::{LevelAxis, LevelMatrix, SweepRow, TimeSeries};
use corridor_core::observables::ProfileHistogram;

#[derive(Debug, thiserror::Error)]
#[error("{}:{line}: {message}", path.display())]
pub struct ParseError {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

pub fn float(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

pub const SWEEP_HEADER: &str = "model,eta,v0,Lx,Ly,N,rho,phi_stat,var_phi,susceptibility,runs,seed,spec_hash";

pub fn sweep_line(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{:016x}",
        r.model,
        float(r.eta),
        float(r.v0),
        float(r.lx),
        float(r.ly),
        r.n,
        float(r.rho),
        float(r.phi_stat),
        float(r.var_phi),
        float(r.susceptibility),
        r.runs,
        r.seed,
        r.spec_hash
    )
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&sweep_line(r));
        out.push('\n');
    }
    out
}

/// A parsed data file: header names and numbered rows.
pub struct Table {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn read(path: &Path) -> anyhow::Result<Table> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(Self::parse(path, &text)?)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Table, ParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let Some((_, header)) = lines.next() else {
            return Err(ParseError {
                path: path.into(),
                line: 1,
                message: "empty file, expected a header".into(),
            });
        };
        let header: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (line, content) in lines {
            if content.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = content.split(',').map(|s| s.trim().to_string()).collect();
            if cells.len() != header.len() {
                return Err(ParseError {
                    path: path.into(),
                    line,
                    message: format!("expected {} fields, found {}", header.len(), cells.len()),
                });
            }
            rows.push((line, cells));
        }
        Ok(Table {
            path: path.into(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    pub fn get<T: std::str::FromStr>(&self, line: usize, cells: &[String], col: usize) -> Result<T, ParseError> {
        cells[col]
            .parse()
            .map_err(|_| self.error(line, format!("cannot parse {} value '{}'", self.header[col], cells[col])))
    }

    pub fn parse_sweep(&self) -> Result<Vec<SweepRow>, ParseError> {
        let expected: Vec<&str> = SWEEP_HEADER.split(',').collect();
        if self.header != expected {
            return Err(self.error(1, format!("expected header '{SWEEP_HEADER}'")));
        }
        self.rows
            .iter()
            .map(|(line, c)| {
                let line = *line;
                Ok(SweepRow {
                    model: c[0].clone(),
                    eta: self.get(line, c, 1)?,
                    v0: self.get(line, c, 2)?,
                    lx: self.get(line, c, 3)?,
                    ly: self.get(line, c, 4)?,
                    n: self.get(line, c, 5)?,
                    rho: self.get(line, c, 6)?,
                    phi_stat: self.get(line, c, 7)?,
                    var_phi: self.get(line, c, 8)?,
                    susceptibility: self.get(line, c, 9)?,
                    runs: self.get(line, c, 10)?,
                    seed: self.get(line, c, 11)?,
                    spec_hash: u64::from_str_radix(&c[12], 16)
                        .map_err(|_| self.error(line, format!("cannot parse spec_hash '{}'", c[12])))?,
                })
            })
            .collect()
    }
}

/// `t,phi[,w]` for one run.
pub fn series_table(series: &TimeSeries) -> String {
    let with_width = series.records.iter().any(|r| r.width.is_some());
    let mut out = String::from(if with_width { "t,phi,w\n" } else { "t,phi\n" });
    for r in &series.records {
        if with_width {
            let _ = writeln!(out, "{},{},{}", r.t, float(r.phi), opt(r.width));
        } else {
            let _ = writeln!(out, "{},{}", r.t, float(r.phi));
        }
    }
    out
}

pub const PROFILE_HEADER: &str = "t,x,P";

/// Long-format profiles: one line per (time, bin), `x` at the bin's left edge.
pub fn profile_table(profiles: &[(u64, ProfileHistogram)]) -> String {
    let mut out = format!("{PROFILE_HEADER}\n");
    for (t, h) in profiles {
        for (k, p) in h.values().into_iter().enumerate() {
            let _ = writeln!(out, "{t},{},{}", float(k as f64 * h.dx), float(p));
        }
    }
    out
}

pub fn snapshot_table(series: &TimeSeries) -> String {
    let mut out = String::from("t,id,x,y,vx,vy,heading\n");
    for snap in &series.snapshots {
        for p in &snap.particles {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                snap.t,
                p.id,
                float(p.x),
                float(p.y),
                float(p.vx),
                float(p.vy),
                float(p.heading)
            );
        }
    }
    out
}

/// File name and contents of a level-plot matrix. The corner cell of the
/// header names both axes; missing grid points are empty cells.
pub fn level_table(m: &LevelMatrix) -> (String, String) {
    let (row_name, fixed_name, tag) = match m.axis {
        LevelAxis::Ly => ("Ly", "v0", "eta-Ly"),
        LevelAxis::V0 => ("v0", "Ly", "eta-v0"),
    };
    let name = format!("level_{}_{tag}_{fixed_name}={}.csv", m.model, float(m.fixed));
    let mut out = format!("{row_name}\\eta");
    for &eta in &m.etas {
        let _ = write!(out, ",{}", float(eta));
    }
    out.push('\n');
    for (value, cells) in m.rows.iter().zip(&m.values) {
        out.push_str(&float(*value));
        for c in cells {
            out.push(',');
            out.push_str(&opt(*c));
        }
        out.push('\n');
    }
    (name, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eta: f64) -> SweepRow {
        SweepRow {
            model: "vm-pbc".into(),
            eta,
            v0: 0.5,
            lx: 600.0,
            ly: 4.5,
            n: 300,
            rho: 1.0 / 9.0,
            phi_stat: 0.1 + 0.2,
            var_phi: 1e-300,
            susceptibility: 12.5,
            runs: 50,
            seed: u64::MAX,
            spec_hash: 0xdead_beef,
        }
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 0.5, 1.0 / 3.0, 6e23, -2.5e-310, f64::MAX] {
            assert_eq!(float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(float(0.5), "5e-1");
    }

    #[test]
    fn sweep_rows_round_trip() {
        let rows = vec![row(0.05), row(1.0)];
        let text = sweep_table(&rows);
        let back = Table::parse(Path::new("sweep.csv"), &text).unwrap().parse_sweep().unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn errors_name_file_and_line() {
        let err = Table::parse(Path::new("s.csv"), "t,phi\n0,1e0\n1\n").err().unwrap();
        assert_eq!(err.to_string(), "s.csv:3: expected 2 fields, found 1");
        let bad = format!("{SWEEP_HEADER}\nvm,x,1,1,1,1,1,1,1,1,1,1,0\n");
        let err = Table::parse(Path::new("w.csv"), &bad).unwrap().parse_sweep().err().unwrap();
        assert!(err.to_string().starts_with("w.csv:2: cannot parse eta"));
    }
}
