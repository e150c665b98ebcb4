//! Time integration of curve shortening flow (MCF) and rescaled mean
//! curvature flow (RMCF), singular-time estimation, and the exact change of
//! variables `N_τ = e^{τ/2}(M_{T-e^{-τ}} - x₀)` between the two pictures.

mod singular;
mod stepper;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curvegeo::{self, DiscreteCurve, Point};
use crate::error::{Error, Result};

pub use singular::{estimate_singularity, SingularEstimate};
pub(crate) use stepper::Stepper;

/// Time stamps closer than this are treated as equal.
pub const TIME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Picture {
    Mcf,
    Rmcf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularData {
    #[serde(rename = "T")]
    pub t: f64,
    pub x0: Point,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub time: f64,
    pub curve: DiscreteCurve,
}

/// Time-ordered frames of one flow. Frames are immutable once built.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    picture: Picture,
    frames: Vec<Frame>,
    singular: Option<SingularData>,
}

impl FlowTrajectory {
    pub fn new(
        picture: Picture,
        frames: Vec<Frame>,
        singular: Option<SingularData>,
    ) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidTrajectory("no frames".into()));
        };
        let m = first.curve.len();
        for w in frames.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::InvalidTrajectory(format!(
                    "time stamps not increasing at {}",
                    w[1].time
                )));
            }
            if w[1].curve.len() != m {
                return Err(Error::InvalidTrajectory(
                    "frames differ in node count".into(),
                ));
            }
            if picture == Picture::Mcf && !(w[1].curve.area() < w[0].curve.area()) {
                return Err(Error::InvalidTrajectory(format!(
                    "enclosed area not decreasing at t = {}",
                    w[1].time
                )));
            }
        }
        Ok(Self {
            picture,
            frames,
            singular,
        })
    }

    /// Skips the invariant checks, e.g. for externally supplied frames that
    /// are validated by the consumer.
    pub fn new_unchecked(
        picture: Picture,
        frames: Vec<Frame>,
        singular: Option<SingularData>,
    ) -> Self {
        Self {
            picture,
            frames,
            singular,
        }
    }

    /// The same curve repeated at each of `times` (e.g. a static shrinker).
    pub fn stationary(picture: Picture, curve: &DiscreteCurve, times: &[f64]) -> Result<Self> {
        if picture == Picture::Mcf && times.len() > 1 {
            return Err(Error::InvalidTrajectory(
                "an MCF trajectory cannot be stationary".into(),
            ));
        }
        let frames = times
            .iter()
            .map(|&time| Frame {
                time,
                curve: curve.clone(),
            })
            .collect();
        Self::new(picture, frames, None)
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn singular(&self) -> Option<SingularData> {
        self.singular
    }

    pub fn with_singular(mut self, s: SingularData) -> Self {
        self.singular = Some(s);
        self
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.frames[0].curve.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn index_of(&self, time: f64) -> Option<usize> {
        let i = self
            .frames
            .partition_point(|f| f.time < time - TIME_TOLERANCE);
        (i < self.frames.len() && (self.frames[i].time - time).abs() <= TIME_TOLERANCE).then_some(i)
    }

    pub fn frame_at(&self, time: f64) -> Result<&Frame> {
        self.index_of(time)
            .map(|i| &self.frames[i])
            .ok_or(Error::FrameMissing { time })
    }
}

/// Time integrator. Both are explicit and second order; the stiffest
/// Fourier mode has rate `π²/h²`, so Heun is stable for `dt ≤ 2h²/π²` and
/// an `s`-stage Chebyshev step for `dt ≤ β(s) h²/π²` with `β(s) ≈ 0.65 s²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Heun,
    /// Runge–Kutta–Chebyshev with the given number of stages (at least 2).
    Chebyshev(usize),
}

impl Scheme {
    /// Length of the real stability interval.
    pub fn stability_interval(self) -> f64 {
        match self {
            Scheme::Heun => 2.0,
            Scheme::Chebyshev(s) => stepper::Chebyshev::new(s).beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Fixed step; `None` selects the stable step `cfl · β · h²/π²`.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub scheme: Scheme,
    /// Curvature cap; exceeding it stops integration with `BlowupDetected`.
    pub max_curvature: f64,
    /// Rescale about the centroid after each step so the enclosed area obeys
    /// its exact law.
    pub area_projection: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt: None,
            cfl: 0.5,
            scheme: Scheme::Chebyshev(8),
            max_curvature: 1e6,
            area_projection: true,
        }
    }
}

impl StepControl {
    /// Largest step allowed for a minimum node spacing `h`.
    pub fn stability_limit(&self, h: f64) -> f64 {
        self.cfl * self.scheme.stability_interval() * h * h / (PI * PI)
    }

    fn step_for(&self, h: f64) -> Result<f64> {
        let limit = self.stability_limit(h);
        match self.dt {
            None => Ok(limit),
            Some(dt) if dt < 0.0 || !dt.is_finite() => {
                Err(Error::StepRejected(format!("invalid step {dt}")))
            }
            Some(dt) if dt > limit => Err(Error::StepRejected(format!(
                "step {dt:e} exceeds stability limit {limit:e}"
            ))),
            Some(dt) => Ok(dt),
        }
    }
}

fn single_step(
    curve: &DiscreteCurve,
    ctl: &StepControl,
    picture: Picture,
) -> Result<DiscreteCurve> {
    let dt = ctl.step_for(curve.min_spacing())?;
    let mut stepper = Stepper::new(curve, picture);
    stepper.step(dt, ctl)?;
    let next = stepper.curve();
    next.validate()
        .map_err(|e| Error::StepRejected(format!("invariants broken: {e}")))?;
    Ok(next)
}

/// One step of curve shortening flow, velocity `Hν` plus tangential
/// redistribution.
pub fn mcf_step(curve: &DiscreteCurve, ctl: &StepControl) -> Result<DiscreteCurve> {
    single_step(curve, ctl, Picture::Mcf)
}

/// One step of the rescaled flow, velocity `φν` with `φ = H + ½⟨x,ν⟩`, plus
/// tangential redistribution. Self-shrinkers are fixed points.
pub fn rmcf_step(curve: &DiscreteCurve, ctl: &StepControl) -> Result<DiscreteCurve> {
    single_step(curve, ctl, Picture::Rmcf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Frames are emitted at integer multiples of `cadence` (plus the
    /// initial time).
    pub cadence: f64,
    /// Redistribute nodes when the spacing ratio drifts above this.
    pub resample_threshold: f64,
    /// Stop an MCF run once the area falls below this fraction of the
    /// initial area.
    pub stop_area_fraction: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cadence: 0.01,
            resample_threshold: 1.01,
            stop_area_fraction: None,
        }
    }
}

fn is_convex(curve: &DiscreteCurve) -> Result<bool> {
    Ok(curvegeo::geometry(curve)?
        .curvature
        .iter()
        .all(|&h| h > 0.0))
}

fn integrate(
    picture: Picture,
    curve: &DiscreteCurve,
    t0: f64,
    t_end: f64,
    ctl: &StepControl,
    opts: &RunOptions,
) -> Result<Vec<Frame>> {
    if !(opts.cadence > 0.0) {
        return Err(Error::InvalidTrajectory("cadence must be positive".into()));
    }
    let start = curvegeo::resample(curve, curve.len())?;
    let convex = is_convex(&start)?;
    let mut stepper = Stepper::new(&start, picture);
    let initial_area = stepper.area();
    let mut frames = vec![Frame {
        time: t0,
        curve: start,
    }];
    let mut k = (t0 / opts.cadence).floor() as i64 + 1;
    while (k as f64) * opts.cadence <= t0 + TIME_TOLERANCE {
        k += 1;
    }
    let mut t = t0;
    while t < t_end - TIME_TOLERANCE {
        let target = ((k as f64) * opts.cadence).min(t_end);
        let mut dt = ctl.step_for(stepper.min_spacing())?;
        let lands = target - t <= dt;
        if lands {
            dt = target - t;
        }
        let mut attempt = 0;
        loop {
            match stepper.step(dt, ctl) {
                Ok(()) => break,
                Err(Error::StepRejected(_)) if attempt < 20 => {
                    attempt += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let landed = lands && attempt == 0;
        t = if landed { target } else { t + dt };
        if stepper.spacing_ratio() > opts.resample_threshold {
            stepper.resample()?;
        }
        let stop = opts
            .stop_area_fraction
            .is_some_and(|f| stepper.area() <= f * initial_area);
        if landed || stop {
            let frame = stepper.curve();
            frame.validate()?;
            if convex && !is_convex(&frame)? {
                return Err(Error::ConvexityLost { time: t });
            }
            frames.push(Frame {
                time: t,
                curve: frame,
            });
            if landed && (target - (k as f64) * opts.cadence).abs() < TIME_TOLERANCE {
                k += 1;
            }
        }
        if stop {
            break;
        }
    }
    Ok(frames)
}

/// Curve shortening flow from `t0` to `t_end` (or until the optional area
/// stop triggers).
pub fn run_mcf(
    curve: &DiscreteCurve,
    t0: f64,
    t_end: f64,
    ctl: &StepControl,
    opts: &RunOptions,
) -> Result<FlowTrajectory> {
    let frames = integrate(Picture::Mcf, curve, t0, t_end, ctl, opts)?;
    FlowTrajectory::new(Picture::Mcf, frames, None)
}

/// Result of an RMCF run together with the distance of the last frame to
/// its best-fit circle.
#[derive(Debug, Clone)]
pub struct RmcfRun {
    pub trajectory: FlowTrajectory,
    pub final_circle: (Point, f64),
    pub final_circle_distance: f64,
}

pub fn run_rmcf(
    curve: &DiscreteCurve,
    tau0: f64,
    tau_end: f64,
    ctl: &StepControl,
    opts: &RunOptions,
) -> Result<RmcfRun> {
    let frames = integrate(Picture::Rmcf, curve, tau0, tau_end, ctl, opts)?;
    let trajectory = FlowTrajectory::new(Picture::Rmcf, frames, None)?;
    let last = &trajectory.frames().last().expect("non-empty").curve;
    let (center, radius) = curvegeo::fit_circle(last);
    let final_circle_distance = curvegeo::distance_to_circle(last, center, radius, 4);
    Ok(RmcfRun {
        trajectory,
        final_circle: (center, radius),
        final_circle_distance,
    })
}

/// Rescale one MCF frame: `τ = -log(T - t)`, `N = (M - x₀)/√(T - t)`.
pub fn rescale_curve(
    curve: &DiscreteCurve,
    t: f64,
    singular: SingularData,
) -> Result<(f64, DiscreteCurve)> {
    let remaining = singular.t - t;
    if !(remaining > 0.0) {
        return Err(Error::TimeOutOfRange {
            time: t,
            singular_time: singular.t,
        });
    }
    let tau = -remaining.ln();
    let s = 1.0 / remaining.sqrt();
    let x0 = singular.x0;
    let pts = curve
        .points()
        .iter()
        .map(|p| [(p[0] - x0[0]) * s, (p[1] - x0[1]) * s])
        .collect();
    Ok((tau, DiscreteCurve::from_points_unchecked(pts)))
}

pub fn rescale_to_rmcf(traj: &FlowTrajectory, t_sing: f64, x0: Point) -> Result<FlowTrajectory> {
    if traj.picture() != Picture::Mcf {
        return Err(Error::InvalidTrajectory(
            "expected an MCF trajectory".into(),
        ));
    }
    let singular = SingularData { t: t_sing, x0 };
    let frames = traj
        .frames()
        .iter()
        .map(|f| {
            rescale_curve(&f.curve, f.time, singular).map(|(time, curve)| Frame { time, curve })
        })
        .collect::<Result<Vec<_>>>()?;
    FlowTrajectory::new(Picture::Rmcf, frames, Some(singular))
}

/// Inverse of [`rescale_to_rmcf`]: `t = T - e^{-τ}`, `M = x₀ + e^{-τ/2} N`.
pub fn rescale_to_mcf(traj: &FlowTrajectory, t_sing: f64, x0: Point) -> Result<FlowTrajectory> {
    if traj.picture() != Picture::Rmcf {
        return Err(Error::InvalidTrajectory(
            "expected an RMCF trajectory".into(),
        ));
    }
    let frames = traj
        .frames()
        .iter()
        .map(|f| {
            let s = (-f.time / 2.0).exp();
            let pts = f
                .curve
                .points()
                .iter()
                .map(|p| [x0[0] + s * p[0], x0[1] + s * p[1]])
                .collect();
            Frame {
                time: t_sing - (-f.time).exp(),
                curve: DiscreteCurve::from_points_unchecked(pts),
            }
        })
        .collect();
    FlowTrajectory::new(Picture::Mcf, frames, Some(SingularData { t: t_sing, x0 }))
}
