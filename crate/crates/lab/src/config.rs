//! Flat `key = value` scenario configs.
//!
//! Blank lines and text after `#` are ignored. Keys are case sensitive and
//! may appear once. Curve specs are `circle(r)`, `circle(r, cx, cy)`,
//! `ellipse(a, b)`, `ellipse(a, b, angle_deg)`, `ellipse(a, b, angle_deg, cx,
//! cy)` and `fourier(r0, k:a:b, ...)` for `r(θ) = r0 + Σ a cos kθ + b sin kθ`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use shrinkerlab_core::curvegeo::DiscreteCurve;
use shrinkerlab_core::flowcore::{Picture, Scheme, StepControl};

use crate::error::{FieldIssue, LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Simulate,
    Spectrum,
    GaugeResidual,
    Separation,
    Rate,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Simulate,
        Scenario::Spectrum,
        Scenario::GaugeResidual,
        Scenario::Separation,
        Scenario::Rate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Spectrum => "spectrum",
            Scenario::GaugeResidual => "gauge-residual",
            Scenario::Separation => "separation",
            Scenario::Rate => "rate",
        }
    }

    fn is_experiment(self) -> bool {
        matches!(
            self,
            Scenario::GaugeResidual | Scenario::Separation | Scenario::Rate
        )
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Scenario::Simulate | Scenario::Spectrum => &["curve1"],
            Scenario::GaugeResidual | Scenario::Separation => &["curve1", "curve2", "tau_end"],
            Scenario::Rate => &["curve1", "tau_end"],
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        const COMMON: [&str; 4] = ["scenario", "m", "out", "seed"];
        const FLOW: [&str; 6] = [
            "cfl",
            "scheme",
            "max_curvature",
            "frame_every",
            "frame_stride",
            "perturb",
        ];
        let own: &[&str] = match self {
            Scenario::Simulate => &["curve1", "picture", "t_end", "tau_end"],
            Scenario::Spectrum => &["curve1", "modes"],
            Scenario::GaugeResidual => &["curve1", "curve2", "tau_end"],
            Scenario::Separation => &["curve1", "curve2", "tau_end", "fit_window", "lambda_stride"],
            Scenario::Rate => &["curve1", "tau_end", "fit_window", "lambda_stride"],
        };
        let mut all: Vec<&'static str> = COMMON.to_vec();
        if self != Scenario::Spectrum {
            all.extend(FLOW);
        }
        all.extend(own);
        Box::leak(all.into_boxed_slice())
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!(
                    "unknown scenario `{s}`, expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurveSpec {
    Circle {
        r: f64,
        center: [f64; 2],
    },
    Ellipse {
        a: f64,
        b: f64,
        angle_deg: f64,
        center: [f64; 2],
    },
    Fourier {
        r0: f64,
        modes: Vec<(u32, f64, f64)>,
    },
}

impl CurveSpec {
    pub fn sample(&self, m: usize) -> shrinkerlab_core::Result<DiscreteCurve> {
        match self {
            CurveSpec::Circle { r, center } => DiscreteCurve::circle(*r, *center, m),
            CurveSpec::Ellipse {
                a,
                b,
                angle_deg,
                center,
            } => DiscreteCurve::ellipse(*a, *b, angle_deg.to_radians(), *center, m),
            CurveSpec::Fourier { r0, modes } => DiscreteCurve::polar(*r0, modes, [0.0, 0.0], m),
        }
    }

    /// Adds seeded random even modes `k ∈ {2, 4, 6}` with coefficients
    /// uniform in `±amplitude/k²`, relative to the mean radius.
    pub fn perturbed(&self, amplitude: f64, seed: u64) -> CurveSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes: Vec<(u32, f64, f64)> = Vec::new();
        let (r0, base_modes) = match self {
            CurveSpec::Fourier { r0, modes } => (*r0, modes.clone()),
            CurveSpec::Circle { r, .. } => (*r, Vec::new()),
            CurveSpec::Ellipse { a, b, .. } => {
                // r(θ) ≈ mean + ((a - b)/2) cos 2θ to first order
                let mean = 0.5 * (a + b);
                (mean, vec![(2, 0.5 * (a - b), 0.0)])
            }
        };
        modes.extend(base_modes);
        for k in [2u32, 4, 6] {
            let s = amplitude * r0 / (k * k) as f64;
            let a = rng.random_range(-s..=s);
            let b = rng.random_range(-s..=s);
            modes.push((k, a, b));
        }
        CurveSpec::Fourier { r0, modes }
    }
}

impl fmt::Display for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSpec::Circle { r, center } => {
                write!(f, "circle({r}, {}, {})", center[0], center[1])
            }
            CurveSpec::Ellipse {
                a,
                b,
                angle_deg,
                center,
            } => write!(
                f,
                "ellipse({a}, {b}, {angle_deg}, {}, {})",
                center[0], center[1]
            ),
            CurveSpec::Fourier { r0, modes } => {
                write!(f, "fourier({r0}")?;
                for (k, a, b) in modes {
                    write!(f, ", {k}:{a}:{b}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for CurveSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| format!("expected `name(args)`, got `{s}`"))?;
        let body = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("missing `)` in `{s}`"))?;
        let args: Vec<&str> = body
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .collect();
        let num = |a: &str| -> std::result::Result<f64, String> {
            let v: f64 = a.parse().map_err(|_| format!("`{a}` is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("`{a}` is not finite"))
            }
        };
        let positive = |a: &str| -> std::result::Result<f64, String> {
            let v = num(a)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(format!("`{a}` must be positive"))
            }
        };
        match (name.trim(), args.len()) {
            ("circle", 1) => Ok(CurveSpec::Circle {
                r: positive(args[0])?,
                center: [0.0, 0.0],
            }),
            ("circle", 3) => Ok(CurveSpec::Circle {
                r: positive(args[0])?,
                center: [num(args[1])?, num(args[2])?],
            }),
            ("ellipse", n @ (2 | 3 | 5)) => Ok(CurveSpec::Ellipse {
                a: positive(args[0])?,
                b: positive(args[1])?,
                angle_deg: if n >= 3 { num(args[2])? } else { 0.0 },
                center: if n == 5 {
                    [num(args[3])?, num(args[4])?]
                } else {
                    [0.0, 0.0]
                },
            }),
            ("fourier", n) if n >= 1 => {
                let modes = args[1..]
                    .iter()
                    .map(|m| {
                        let parts: Vec<&str> = m.split(':').map(str::trim).collect();
                        if parts.len() != 3 {
                            return Err(format!("mode `{m}` must be `k:a:b`"));
                        }
                        let k: u32 = parts[0]
                            .parse()
                            .map_err(|_| format!("mode number `{}` is not an integer", parts[0]))?;
                        Ok((k, num(parts[1])?, num(parts[2])?))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()?;
                Ok(CurveSpec::Fourier {
                    r0: positive(args[0])?,
                    modes,
                })
            }
            ("circle" | "ellipse" | "fourier", n) => {
                Err(format!("`{name}` does not take {n} arguments"))
            }
            _ => Err(format!("unknown curve `{name}`")),
        }
    }
}

/// A validated scenario config.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub initial_curves: Vec<CurveSpec>,
    pub m: usize,
    pub cfl: f64,
    pub scheme: Scheme,
    pub max_curvature: f64,
    pub picture: Picture,
    pub t_end: Option<f64>,
    pub tau_end: Option<f64>,
    pub frame_every: f64,
    pub frame_stride: usize,
    pub out: PathBuf,
    pub fit_window: f64,
    pub seed: u64,
    pub perturb: Option<f64>,
    pub modes: usize,
    pub lambda_stride: usize,
    /// The effective key-value pairs, including defaults that were not
    /// written explicitly.
    #[serde(skip)]
    pub raw: BTreeMap<String, String>,
}

impl ScenarioConfig {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            cfl: self.cfl,
            scheme: self.scheme,
            max_curvature: self.max_curvature,
            ..StepControl::default()
        }
    }

    /// Canonical text: sorted `key = value` lines of the explicit keys.
    pub fn canonical(&self) -> String {
        self.raw
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }

    /// Initial curves sampled at `m` nodes, with the optional seeded
    /// perturbation applied to the first curve.
    pub fn curves(&self) -> shrinkerlab_core::Result<Vec<DiscreteCurve>> {
        self.initial_curves
            .iter()
            .enumerate()
            .map(|(i, spec)| match (i, self.perturb) {
                (0, Some(a)) => spec.perturbed(a, self.seed).sample(self.m),
                _ => spec.sample(self.m),
            })
            .collect()
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Splits config text into key-value pairs.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut issues = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            issues.push(FieldIssue {
                field: format!("line {}", n + 1),
                message: format!("expected `key = value`, got `{line}`"),
            });
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if map.contains_key(&k) {
            issues.push(FieldIssue {
                field: k,
                message: format!("duplicate key on line {}", n + 1),
            });
            continue;
        }
        map.insert(k, v);
    }
    if issues.is_empty() {
        Ok(map)
    } else {
        Err(LabError::ConfigInvalid(issues))
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    from_pairs(parse_pairs(text)?)
}

struct Reader<'a> {
    raw: &'a BTreeMap<String, String>,
    issues: Vec<FieldIssue>,
}

impl Reader<'_> {
    fn issue(&mut self, field: &str, message: impl Into<String>) {
        self.issues.push(FieldIssue {
            field: field.into(),
            message: message.into(),
        });
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw.get(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                self.issue(key, format!("cannot parse `{v}`: {e}"));
                None
            }
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        match self.get::<f64>(key) {
            Some(v) if v > 0.0 && v.is_finite() => v,
            Some(v) => {
                self.issue(key, format!("must be positive and finite, got {v}"));
                default
            }
            None => default,
        }
    }
}

pub fn from_pairs(raw: BTreeMap<String, String>) -> Result<ScenarioConfig> {
    let scenario = match raw.get("scenario") {
        None => return Err(LabError::config("scenario", "missing required field")),
        Some(s) => s
            .parse::<Scenario>()
            .map_err(|e| LabError::config("scenario", e))?,
    };
    let mut r = Reader {
        raw: &raw,
        issues: Vec::new(),
    };
    let allowed = scenario.allowed();
    for key in raw.keys() {
        if !allowed.contains(&key.as_str()) {
            r.issue(key, format!("not a field of scenario `{scenario}`"));
        }
    }
    for key in scenario.required() {
        if !raw.contains_key(*key) {
            r.issue(key, "missing required field");
        }
    }

    let mut initial_curves = Vec::new();
    for key in ["curve1", "curve2"] {
        if allowed.contains(&key) {
            if let Some(c) = r.get::<CurveSpec>(key) {
                initial_curves.push(c);
            }
        }
    }

    let m = r.get::<usize>("m").unwrap_or(256);
    let min_m = if scenario.is_experiment() { 64 } else { 16 };
    let m_valid = m.is_multiple_of(2) && m >= min_m;
    if !m_valid {
        r.issue("m", format!("must be even and at least {min_m}, got {m}"));
    }
    let picture = match r.raw.get("picture").map(String::as_str) {
        None | Some("mcf") => Picture::Mcf,
        Some("rmcf") => Picture::Rmcf,
        Some(other) => {
            r.issue(
                "picture",
                format!("expected `mcf` or `rmcf`, got `{other}`"),
            );
            Picture::Mcf
        }
    };
    if scenario == Scenario::Simulate {
        match picture {
            Picture::Mcf if raw.contains_key("tau_end") => {
                r.issue("tau_end", "only valid with picture = rmcf")
            }
            Picture::Rmcf if raw.contains_key("t_end") => {
                r.issue("t_end", "only valid with picture = mcf")
            }
            Picture::Rmcf if !raw.contains_key("tau_end") => {
                r.issue("tau_end", "missing required field for picture = rmcf")
            }
            _ => {}
        }
    }
    let t_end = raw.contains_key("t_end").then(|| r.positive("t_end", 1.0));
    let tau_end = r.get::<f64>("tau_end");
    if let Some(t) = tau_end {
        if !t.is_finite() {
            r.issue("tau_end", "must be finite");
        }
    }
    let default_cadence = if picture == Picture::Mcf && scenario == Scenario::Simulate {
        0.01
    } else {
        0.05
    };
    let frame_every = r.positive("frame_every", default_cadence);
    let frame_stride = r.get::<usize>("frame_stride").unwrap_or(1);
    if frame_stride == 0 {
        r.issue("frame_stride", "must be at least 1");
    }
    let fit_window = r.get::<f64>("fit_window").unwrap_or(0.4);
    if !(fit_window > 0.0 && fit_window <= 1.0) {
        r.issue("fit_window", format!("must be in (0, 1], got {fit_window}"));
    }
    let perturb = r.get::<f64>("perturb");
    if let Some(p) = perturb {
        if !(p.is_finite() && p >= 0.0) {
            r.issue("perturb", "must be a nonnegative number");
        }
    }
    let modes = r.get::<usize>("modes").unwrap_or(16);
    if modes == 0 || (m_valid && modes > m) {
        r.issue("modes", format!("must be in 1..={m}"));
    }
    let lambda_stride = r.get::<usize>("lambda_stride").unwrap_or(20);
    if lambda_stride == 0 {
        r.issue("lambda_stride", "must be at least 1");
    }
    let cfl = r.positive("cfl", 0.5);
    if cfl > 1.0 {
        r.issue("cfl", format!("must not exceed 1, got {cfl}"));
    }
    let scheme = match raw.get("scheme").map(|v| parse_scheme(v)) {
        None => StepControl::default().scheme,
        Some(Ok(s)) => s,
        Some(Err(e)) => {
            r.issue("scheme", e);
            StepControl::default().scheme
        }
    };
    let max_curvature = r.positive("max_curvature", 1e6);
    let seed = r.get::<u64>("seed").unwrap_or(0);
    let out = PathBuf::from(
        raw.get("out")
            .cloned()
            .unwrap_or_else(|| "shrinkerlab-out".into()),
    );

    if r.issues.is_empty() {
        Ok(ScenarioConfig {
            scenario,
            initial_curves,
            m,
            cfl,
            scheme,
            max_curvature,
            picture,
            t_end,
            tau_end,
            frame_every,
            frame_stride,
            out,
            fit_window,
            seed,
            perturb,
            modes,
            lambda_stride,
            raw,
        })
    } else {
        Err(LabError::ConfigInvalid(r.issues))
    }
}

/// `heun` or `chebyshev(s)` with `2 ≤ s ≤ 64`.
fn parse_scheme(text: &str) -> std::result::Result<Scheme, String> {
    let t = text.trim();
    if t == "heun" {
        return Ok(Scheme::Heun);
    }
    let stages = t
        .strip_prefix("chebyshev(")
        .and_then(|r| r.strip_suffix(')'))
        .and_then(|n| n.trim().parse::<usize>().ok())
        .ok_or_else(|| format!("expected `heun` or `chebyshev(s)`, got `{t}`"))?;
    if !(2..=64).contains(&stages) {
        return Err(format!("stage count must be in 2..=64, got {stages}"));
    }
    Ok(Scheme::Chebyshev(stages))
}
