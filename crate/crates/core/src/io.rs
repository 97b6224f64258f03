//! Plain-text artifacts: trajectory CSV and JSON run summaries.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round-trips
//! every `f64` exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::trajectory::{SampledPath, Trajectory};

/// `n,tau,x,y` in the planar case, `n,tau,x1..x{d1},y1..y{d2}` otherwise.
pub fn csv_header(d1: usize, d2: usize) -> String {
    let mut cols = vec!["n".to_string(), "tau".to_string()];
    if d1 == 1 && d2 == 1 {
        cols.push("x".into());
        cols.push("y".into());
    } else {
        cols.extend((1..=d1).map(|i| format!("x{i}")));
        cols.extend((1..=d2).map(|i| format!("y{i}")));
    }
    cols.join(",")
}

fn write_rows<'a>(
    out: &mut impl Write,
    rows: impl Iterator<Item = (u64, f64, &'a Point)>,
    d1: usize,
    d2: usize,
) -> Result<()> {
    writeln!(out, "{}", csv_header(d1, d2))?;
    for (n, t, z) in rows {
        write!(out, "{n},{t:.16e}")?;
        for c in z.coords().iter() {
            write!(out, ",{c:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn blocks(states: &[Point]) -> (usize, usize) {
    states.first().map_or((1, 1), |z| (z.d1(), z.d2()))
}

pub fn write_trajectory_csv(out: &mut impl Write, traj: &Trajectory) -> Result<()> {
    let (d1, d2) = blocks(traj.iterates());
    let rows = traj
        .indices()
        .iter()
        .zip(traj.effective_times())
        .zip(traj.iterates())
        .map(|((&n, &t), z)| (n, t, z));
    write_rows(out, rows, d1, d2)
}

/// Any sampled path (flows included); the `n` column holds the sample index.
pub fn write_path_csv<P: SampledPath + ?Sized>(out: &mut impl Write, path: &P) -> Result<()> {
    let (d1, d2) = blocks(path.states());
    let rows = path
        .times()
        .iter()
        .zip(path.states())
        .enumerate()
        .map(|(i, (&t, z))| (i as u64, t, z));
    write_rows(out, rows, d1, d2)
}

/// Rows of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub indices: Vec<u64>,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
}

impl SampledPath for CsvTrajectory {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn states(&self) -> &[Point] {
        &self.points
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let cols: Vec<&str> = line.trim().split(',').collect();
    let bad = |reason: &str| Error::Parse {
        line: 1,
        reason: reason.to_string(),
    };
    if cols.len() < 4 || cols[0] != "n" || cols[1] != "tau" {
        return Err(bad("header must start with `n,tau` and list coordinates"));
    }
    let coords = &cols[2..];
    if coords == ["x", "y"] {
        return Ok((1, 1));
    }
    let d1 = coords.iter().take_while(|c| c.starts_with('x')).count();
    let d2 = coords.len() - d1;
    if d1 == 0 || d2 == 0 || csv_header(d1, d2) != cols.join(",") {
        return Err(bad("coordinate columns must be x1..xd1 followed by y1..yd2"));
    }
    Ok((d1, d2))
}

pub fn parse_trajectory_csv(text: &str) -> Result<CsvTrajectory> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let (d1, d2) = parse_header(header)?;
    let mut table = CsvTrajectory {
        indices: Vec::new(),
        times: Vec::new(),
        points: Vec::new(),
    };
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: lineno, reason };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + d1 + d2 {
            return Err(err(format!("expected {} fields, found {}", 2 + d1 + d2, fields.len())));
        }
        let n = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("column n: {e}")))?;
        let mut nums = Vec::with_capacity(1 + d1 + d2);
        for f in &fields[1..] {
            nums.push(f.trim().parse::<f64>().map_err(|e| err(format!("`{f}`: {e}")))?);
        }
        table.indices.push(n);
        table.times.push(nums[0]);
        table.points.push(Point::new(nums[1..].to_vec(), d1)?);
    }
    Ok(table)
}

/// JSON summary of a single simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub problem: String,
    pub scheme: String,
    pub iterations: u64,
    pub initial_point: Vec<f64>,
    pub final_point: Vec<f64>,
    pub final_radius: f64,
    pub final_time: f64,
    pub max_norm: f64,
    pub diverged: bool,
    /// Iteration at which the run was aborted, when it diverged.
    pub diverged_at: Option<u64>,
    pub queries_total: u64,
    pub seed: u64,
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summaries serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_flow_strided;
    use crate::problems::make_forsaken;

    #[test]
    fn headers() {
        assert_eq!(csv_header(1, 1), "n,tau,x,y");
        assert_eq!(csv_header(2, 1), "n,tau,x1,x2,y1");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut t = Trajectory::new();
        t.push(0, 0.0, 0.0, Point::xy(0.1, -1.0 / 3.0));
        t.push(1, 0.5, 0.5, Point::xy(f64::MIN_POSITIVE, 1e300));
        t.push(7, 0.5 + 1e-17 + 0.1, 0.1, Point::xy(-0.0, std::f64::consts::PI));
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t).unwrap();
        let back = parse_trajectory_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.indices, t.indices());
        assert_eq!(back.times, t.effective_times());
        for (a, b) in back.points.iter().zip(t.iterates()) {
            for (x, y) in a.coords().iter().zip(b.coords().iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn higher_dimensional_round_trip() {
        let mut t = Trajectory::new();
        t.push(0, 0.0, 0.0, Point::new(vec![1.0, 2.0, 3.0], 2).unwrap());
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,tau,x1,x2,y1\n"));
        let back = parse_trajectory_csv(&text).unwrap();
        assert_eq!(back.points[0].d1(), 2);
    }

    #[test]
    fn flow_export_uses_sample_index() {
        let p = integrate_flow_strided(&make_forsaken(), &Point::xy(1.3, 0.0), 1.0, 1e-3, 100).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &p).unwrap();
        let back = parse_trajectory_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.indices, (0..p.len() as u64).collect::<Vec<_>>());
        assert_eq!(back.times, p.times());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_trajectory_csv("n,tau,x,y\n0,0,1,2\n1,0.1,abc,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_trajectory_csv("a,b\n").is_err());
        assert!(parse_trajectory_csv("n,tau,x,y\n0,0,1\n").is_err());
    }
}
