//! Runs a scenario and writes `frames/*.csv`, `trace.csv`, `summary.json`
//! and `manifest.json` into the output directory.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use shrinkerlab_core::curvegeo::{self, DiscreteCurve};
use shrinkerlab_core::flowcore::{
    estimate_singularity, run_mcf, run_rmcf, FlowTrajectory, Picture, RunOptions,
};
use shrinkerlab_core::io::{fmt_float, write_trajectory};
use shrinkerlab_core::spectral::{assemble, eigenpairs};
use shrinkerlab_core::Exec;

use crate::config::{hex, Scenario, ScenarioConfig};
use crate::error::{io_err, Context, Result};
use crate::experiments::{
    experiment_rate, experiment_residual, experiment_separation, FlowSeries, Verdict,
};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";
pub const TRACE: &str = "trace.csv";
pub const FRAMES: &str = "frames";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Value,
    /// A flagged verdict (superexponential collapse).
    pub flagged: bool,
    pub out: PathBuf,
    /// Paths relative to `out`, sorted, manifest excluded.
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

struct Writer {
    out: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, content).map_err(|e| io_err(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("summary values serialize");
        self.text(name, &(text + "\n"))
    }

    fn trajectory(&mut self, stem: &str, traj: &FlowTrajectory, stride: usize) -> Result<()> {
        let dir = self.out.join(FRAMES);
        let written = write_trajectory(&dir, stem, traj, stride).context("writing frames")?;
        self.files.extend(written);
        Ok(())
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_float).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn flow_trace(traj: &FlowTrajectory) -> Result<String> {
    let rows = Exec::Parallel
        .map(traj.frames(), |f| -> shrinkerlab_core::Result<Vec<f64>> {
            let geom = curvegeo::geometry(&f.curve)?;
            Ok(vec![
                f.time,
                f.curve.area(),
                f.curve.length(),
                curvegeo::f_functional(&f.curve),
                geom.max_abs_curvature(),
                curvegeo::dirichlet_energy_phi(&f.curve)?.sqrt(),
            ])
        })
        .into_iter()
        .collect::<shrinkerlab_core::Result<Vec<_>>>()
        .context("flow trace")?;
    Ok(csv("time,area,length,F,maxCurvature,phiL2", rows))
}

fn simulate(cfg: &ScenarioConfig, w: &mut Writer) -> Result<Value> {
    let curve = cfg.curves().context("sampling curve1")?.remove(0);
    let ctl = cfg.step_control();
    let traj = match cfg.picture {
        Picture::Mcf => {
            let opts = RunOptions {
                cadence: cfg.frame_every,
                stop_area_fraction: if cfg.t_end.is_none() {
                    Some(0.05)
                } else {
                    None
                },
                ..RunOptions::default()
            };
            let t_end = cfg.t_end.unwrap_or(10.0 * curve.area() / (2.0 * PI));
            run_mcf(&curve, 0.0, t_end, &ctl, &opts).context("MCF run")?
        }
        Picture::Rmcf => {
            let opts = RunOptions {
                cadence: cfg.frame_every,
                ..RunOptions::default()
            };
            let tau_end = cfg.tau_end.expect("validated");
            run_rmcf(&curve, 0.0, tau_end, &ctl, &opts)
                .context("RMCF run")?
                .trajectory
        }
    };
    w.trajectory("curve1", &traj, cfg.frame_stride)?;
    w.text(TRACE, &flow_trace(&traj)?)?;
    let last = &traj.frames().last().expect("non-empty").curve;
    let mut summary = json!({
        "scenario": cfg.scenario,
        "picture": traj.picture(),
        "frames": traj.len(),
        "finalTime": traj.frames().last().expect("non-empty").time,
        "finalArea": last.area(),
    });
    match traj.picture() {
        Picture::Mcf => {
            let est = estimate_singularity(&traj, 0.4).context("singular time")?;
            summary["T"] = json!(est.t);
            summary["x0"] = json!(est.x0);
            summary["singular"] = json!(est);
        }
        Picture::Rmcf => {
            let (center, radius) = curvegeo::fit_circle(last);
            summary["finalCircle"] = json!({"center": center, "radius": radius});
            summary["finalCircleDistance"] =
                json!(curvegeo::distance_to_circle(last, center, radius, 4));
        }
    }
    Ok(summary)
}

fn spectrum(cfg: &ScenarioConfig, w: &mut Writer) -> Result<Value> {
    let curve: DiscreteCurve = cfg.curves().context("sampling curve1")?.remove(0);
    let op = assemble(&curve).context("assembling L")?;
    let spec = eigenpairs(&op, cfg.modes).context("eigenpairs")?;
    let rows = spec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, v)| vec![k as f64, *v]);
    w.text(TRACE, &csv("index,eigenvalue", rows))?;
    Ok(json!({
        "scenario": cfg.scenario,
        "m": spec.m,
        "eigenvalues": spec.eigenvalues,
        "Lambda": spec.lambda,
    }))
}

fn gauge_residual(cfg: &ScenarioConfig, w: &mut Writer) -> Result<Value> {
    let run = experiment_residual(cfg)?;
    w.trajectory("curve1", &run.base, cfg.frame_stride)?;
    w.trajectory("curve2", &run.target, cfg.frame_stride)?;
    let rows = run.reports.iter().map(|r| {
        vec![
            r.tau,
            r.max_residual,
            r.fitted_c,
            r.norms_u[0],
            r.norms_u[1],
            r.norms_u[2],
            r.quad_ratio,
        ]
    });
    w.text(
        TRACE,
        &csv("tau,maxResidual,fittedC,C0,C1,C2,quadRatio", rows),
    )?;
    w.json("residuals.json", &run.reports)?;
    Ok(json!({"scenario": cfg.scenario, "residual": run.summary}))
}

fn distances_csv(times: &[f64], d: &[f64]) -> String {
    csv("tau,dH", times.iter().zip(d).map(|(t, v)| vec![*t, *v]))
}

fn separation(cfg: &ScenarioConfig, w: &mut Writer) -> Result<(Value, bool)> {
    let run = experiment_separation(cfg)?;
    w.trajectory("curve1", &run.base, cfg.frame_stride)?;
    w.trajectory("curve2", &run.target, cfg.frame_stride)?;
    w.text(TRACE, &run.trace.to_csv())?;
    w.text(
        "distances.csv",
        &distances_csv(&run.base.times(), &run.distances),
    )?;
    let flagged = run.report.verdict == Verdict::SuperexponentialFlagged;
    Ok((
        json!({
            "scenario": cfg.scenario,
            "separation": run.report,
            "frequency": run.trace.summary,
            "checks": run.trace.checks,
        }),
        flagged,
    ))
}

fn rate(cfg: &ScenarioConfig, w: &mut Writer) -> Result<Value> {
    let run = experiment_rate(cfg)?;
    w.trajectory("curve1", &run.flow, cfg.frame_stride)?;
    w.text(TRACE, &run.trace.to_csv())?;
    w.text(
        "distances.csv",
        &distances_csv(&run.flow.times(), &run.distances),
    )?;
    w.text("flow.csv", &flow_csv(&run.series))?;
    Ok(json!({
        "scenario": cfg.scenario,
        "rate": run.report,
        "frequency": run.trace.summary,
        "checks": run.trace.checks,
    }))
}

fn flow_csv(s: &FlowSeries) -> String {
    let g = &s.gradient;
    csv(
        "tau,F,dFdtau,phiL2,D",
        (0..g.times.len()).map(|j| vec![g.times[j], g.f[j], g.dfdtau[j], s.phi_l2[j], s.d[j]]),
    )
}

fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok((hex(&Sha256::digest(&bytes)), bytes.len() as u64))
}

fn relative(out: &Path, path: &Path) -> String {
    path.strip_prefix(out)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let out = cfg.out.clone();
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut w = Writer {
        out: out.clone(),
        files: Vec::new(),
    };
    let (summary, flagged) = match cfg.scenario {
        Scenario::Simulate => (simulate(cfg, &mut w)?, false),
        Scenario::Spectrum => (spectrum(cfg, &mut w)?, false),
        Scenario::GaugeResidual => (gauge_residual(cfg, &mut w)?, false),
        Scenario::Separation => separation(cfg, &mut w)?,
        Scenario::Rate => (rate(cfg, &mut w)?, false),
    };
    w.json(SUMMARY, &summary)?;

    let mut entries = w
        .files
        .iter()
        .map(|p| {
            let (sha256, bytes) = sha256_file(p)?;
            Ok(FileEntry {
                path: relative(&out, p),
                sha256,
                bytes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let files: Vec<String> = entries.iter().map(|e| e.path.clone()).collect();
    let manifest = json!({
        "tool": "shrinkerlab",
        "versions": {
            "shrinkerlab": env!("CARGO_PKG_VERSION"),
            "shrinkerlab-core": shrinkerlab_core::VERSION,
        },
        "scenario": cfg.scenario,
        "configHash": cfg.hash(),
        "config": cfg.raw,
        "parallel": Exec::Parallel.is_parallel(),
        "results": summary,
        "files": entries,
    });
    w.json(MANIFEST, &manifest)?;
    Ok(RunOutcome {
        summary,
        flagged,
        out,
        files,
    })
}
