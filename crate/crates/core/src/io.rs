//! Curve CSV files and trajectory directories (one CSV per frame plus an
//! index JSON).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvegeo::DiscreteCurve;
use crate::error::{Error, Result};
use crate::flowcore::{FlowTrajectory, Frame, Picture, SingularData};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn curve_to_csv(curve: &DiscreteCurve) -> String {
    let mut out = String::from("x,y\n");
    for p in curve.points() {
        out.push_str(&fmt_float(p[0]));
        out.push(',');
        out.push_str(&fmt_float(p[1]));
        out.push('\n');
    }
    out
}

pub fn curve_from_csv(text: &str) -> Result<DiscreteCurve> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == "x,y" => {}
        Some((n, _)) => {
            return Err(Error::Parse {
                line: n + 1,
                message: "expected header `x,y`".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut points = Vec::new();
    for (n, line) in lines {
        let parse = |s: Option<&str>| -> Result<f64> {
            s.map(str::trim)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    line: n + 1,
                    message: format!("expected two numbers, got `{line}`"),
                })
        };
        let mut cols = line.split(',');
        let x = parse(cols.next())?;
        let y = parse(cols.next())?;
        if cols.next().is_some() {
            return Err(Error::Parse {
                line: n + 1,
                message: "too many columns".into(),
            });
        }
        points.push([x, y]);
    }
    DiscreteCurve::new(points)
}

pub fn read_curve(path: &Path) -> Result<DiscreteCurve> {
    curve_from_csv(&fs::read_to_string(path)?)
}

pub fn write_curve(path: &Path, curve: &DiscreteCurve) -> Result<()> {
    fs::write(path, curve_to_csv(curve))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryIndex {
    pub picture: Picture,
    pub times: Vec<f64>,
    pub m: usize,
    pub singular_data: Option<SingularData>,
    /// Frame file names relative to the index, in time order.
    pub files: Vec<String>,
}

/// Writes every frame of `traj` into `dir` as `<stem>_NNNNN.csv` plus the
/// index `<stem>.json`, and returns the written paths (index last).
pub fn write_trajectory(
    dir: &Path,
    stem: &str,
    traj: &FlowTrajectory,
    stride: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stride = stride.max(1);
    let mut written = Vec::new();
    let mut files = Vec::new();
    let mut times = Vec::new();
    let n = traj.len();
    for (j, frame) in traj.frames().iter().enumerate() {
        if j % stride != 0 && j + 1 != n {
            continue;
        }
        let name = format!("{stem}_{j:05}.csv");
        let path = dir.join(&name);
        write_curve(&path, &frame.curve)?;
        written.push(path);
        files.push(name);
        times.push(frame.time);
    }
    let index = TrajectoryIndex {
        picture: traj.picture(),
        times,
        m: traj.node_count(),
        singular_data: traj.singular(),
        files,
    };
    let path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&index).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&path, json)?;
    written.push(path);
    Ok(written)
}

/// Reads a trajectory from its index file; frame paths are relative to the
/// index.
pub fn read_trajectory(index_path: &Path) -> Result<FlowTrajectory> {
    let text = fs::read_to_string(index_path)?;
    let index: TrajectoryIndex = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if index.files.len() != index.times.len() {
        return Err(Error::InvalidTrajectory(
            "index lists a different number of files and times".into(),
        ));
    }
    let dir = index_path.parent().unwrap_or(Path::new("."));
    let frames = index
        .files
        .iter()
        .zip(&index.times)
        .map(|(f, &time)| {
            let curve = read_curve(&dir.join(f))?;
            if curve.len() != index.m {
                return Err(Error::InvalidTrajectory(format!(
                    "{f} has {} nodes, index says {}",
                    curve.len(),
                    index.m
                )));
            }
            Ok(Frame { time, curve })
        })
        .collect::<Result<Vec<_>>>()?;
    FlowTrajectory::new(index.picture, frames, index.singular_data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, std::f64::consts::PI] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn curve_round_trip_is_exact() {
        let c = DiscreteCurve::ellipse(1.3, 0.7, 0.2, [0.1, -0.3], 64).unwrap();
        assert_eq!(curve_from_csv(&curve_to_csv(&c)).unwrap(), c);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            curve_from_csv("a,b\n1,2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            curve_from_csv("x,y\n1,2\n3\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            curve_from_csv("x,y\n1,2,3\n"),
            Err(Error::Parse { .. })
        ));
        assert!(curve_from_csv("x,y\n0,0\n1,0\n").is_err());
        assert!(curve_from_csv("").is_err());
    }
}
