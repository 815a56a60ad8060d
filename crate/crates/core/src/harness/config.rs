//! Experiment configuration files.
//!
//! Configs are TOML with four sections; unknown keys are rejected.
//!
//! ```toml
//! [problem]
//! potential = "box4"        # box4 | fracpow076 | fracpow151w | fracpow251w | harmonic | zero
//! initial = "gaussian"      # gaussian | odd-gaussian
//! beta = -1.0
//! sigmas = [1.0]
//! final_time = 1.0
//!
//! [sweep]
//! schemes = ["ltfs"]        # ltfs | stfs | ewi1
//! norms = "l2"              # l2 | h1 | both
//! mode = "diagonal"         # diagonal: tau = tau0 * (h / 2^-2)^2
//!                           # fixed: explicit `taus`, or `steps` (tau = final_time / n)
//! h_exponents = [3, 4, 5]   # h = 2^-k
//!
//! [reference]
//! tau = 1e-5
//! h_exponent = 7
//!
//! [output]
//! csv = "ltfs_box4.csv"
//! svg = "ltfs_box4.svg"
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{step_count, Scheme};
use crate::physics::{InitialData, Nonlinearity, Potential};
use crate::spectral::Grid;

/// Default diagonal anchor: `tau0 = 1/56` at `h0 = 2^-2`, i.e. `tau ~ 0.898 h^2 / pi`
/// with an integer number of steps up to `T = 1` at every level.
pub const DEFAULT_TAU0: f64 = 1.0 / 56.0;

/// Mesh size at which the diagonal anchor `tau0` applies.
pub const DIAGONAL_H0: f64 = 0.25;

pub const DEFAULT_INTERVAL: (f64, f64) = (-16.0, 16.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    H1,
}

impl Norm {
    /// Sobolev index.
    pub fn order(&self) -> u32 {
        match self {
            Norm::L2 => 0,
            Norm::H1 => 1,
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::H1 => "h1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormSelector {
    L2,
    H1,
    Both,
}

impl NormSelector {
    pub fn norms(&self) -> Vec<Norm> {
        match self {
            NormSelector::L2 => vec![Norm::L2],
            NormSelector::H1 => vec![Norm::H1],
            NormSelector::Both => vec![Norm::L2, Norm::H1],
        }
    }
}

/// How time steps are attached to mesh sizes.
#[derive(Debug, Clone, PartialEq)]
pub enum TauRule {
    /// `tau = tau0 * (h / h0)^2`, one step size per mesh.
    Diagonal { tau0: f64 },
    /// The same explicit step sizes on every mesh.
    Fixed(Vec<f64>),
}

/// Resolution of the reference ("exact") solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub tau_e: f64,
    pub h_e: f64,
}

impl ReferenceSpec {
    /// Cheap default: `h_e = 2^-7`, `tau_e = 1e-5`.
    pub const DESK: ReferenceSpec = ReferenceSpec { tau_e: 1e-5, h_e: 1.0 / 128.0 };
    /// Full resolution: `h_e = 2^-9`, `tau_e = 1e-6`.
    pub const PAPER: ReferenceSpec = ReferenceSpec { tau_e: 1e-6, h_e: 1.0 / 512.0 };
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Write `wall_seconds = 0` so repeated runs produce identical bytes.
    pub zero_wall_time: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub potential: Potential,
    pub initial: InitialData,
    pub beta: f64,
    pub sigmas: Vec<f64>,
    /// Mesh sizes of the sweep.
    pub meshes: Vec<f64>,
    pub tau_rule: TauRule,
    pub norms: NormSelector,
    pub final_time: f64,
    pub interval: (f64, f64),
    pub reference: ReferenceSpec,
    pub oversample_q: usize,
    pub drop_coarsest: bool,
    pub output: OutputSpec,
    pub seed: u64,
}

/// One `(h, tau)` pair of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub h: f64,
    pub tau: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    sweep: RawSweep,
    #[serde(default)]
    reference: RawReference,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    potential: String,
    #[serde(default = "default_initial")]
    initial: String,
    beta: f64,
    sigmas: Vec<f64>,
    #[serde(default = "default_final_time")]
    final_time: f64,
    interval: Option<[f64; 2]>,
    oversample_q: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    schemes: Vec<String>,
    #[serde(default = "default_norms")]
    norms: NormSelector,
    mode: String,
    h_exponents: Option<Vec<i32>>,
    n_modes: Option<Vec<usize>>,
    tau0: Option<f64>,
    taus: Option<Vec<f64>>,
    steps: Option<Vec<u64>>,
    #[serde(default)]
    drop_coarsest: bool,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    tau: Option<f64>,
    h_exponent: Option<i32>,
    #[serde(default)]
    paper_scale: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
    #[serde(default)]
    zero_wall_time: bool,
}

fn default_initial() -> String {
    "gaussian".into()
}

fn default_final_time() -> f64 {
    1.0
}

fn default_norms() -> NormSelector {
    NormSelector::L2
}

fn pow2_mesh(k: i32) -> f64 {
    2f64.powi(-k)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("malformed config: {e}")))?;
        let cfg = Self::from_raw(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let p = raw.problem;
        let s = raw.sweep;
        let potential = Potential::from_key(&p.potential).map_err(to_config)?;
        let initial = InitialData::from_key(&p.initial).map_err(to_config)?;
        let schemes = s
            .schemes
            .iter()
            .map(|k| k.parse::<Scheme>().map_err(to_config))
            .collect::<Result<Vec<_>>>()?;
        let interval = p.interval.map_or(DEFAULT_INTERVAL, |[a, b]| (a, b));
        let meshes = match (s.h_exponents, s.n_modes) {
            (Some(ks), None) => ks.into_iter().map(pow2_mesh).collect(),
            (None, Some(ns)) => {
                ns.into_iter().map(|n| (interval.1 - interval.0) / n as f64).collect()
            }
            _ => {
                return Err(Error::config(
                    "sweep needs exactly one of `h_exponents` or `n_modes`",
                ))
            }
        };
        let tau_rule = match s.mode.as_str() {
            "diagonal" => {
                if s.taus.is_some() || s.steps.is_some() {
                    return Err(Error::config("diagonal sweeps take `tau0`, not `taus` or `steps`"));
                }
                TauRule::Diagonal { tau0: s.tau0.unwrap_or(DEFAULT_TAU0) }
            }
            "fixed" => {
                if s.tau0.is_some() {
                    return Err(Error::config("fixed sweeps take `taus`, not `tau0`"));
                }
                let taus = match (s.taus, s.steps) {
                    (Some(taus), None) => taus,
                    (None, Some(steps)) => {
                        if steps.contains(&0) {
                            return Err(Error::config("step counts must be positive"));
                        }
                        steps.iter().map(|&n| p.final_time / n as f64).collect()
                    }
                    _ => {
                        return Err(Error::config(
                            "fixed sweeps need exactly one of `taus` or `steps`",
                        ))
                    }
                };
                TauRule::Fixed(taus)
            }
            other => {
                return Err(Error::config(format!(
                    "unknown sweep mode '{other}' (expected diagonal or fixed)"
                )))
            }
        };
        let r = raw.reference;
        let mut reference = if r.paper_scale { ReferenceSpec::PAPER } else { ReferenceSpec::DESK };
        if let Some(tau) = r.tau {
            reference.tau_e = tau;
        }
        if let Some(k) = r.h_exponent {
            reference.h_e = pow2_mesh(k);
        }
        let oversample_q = p.oversample_q.unwrap_or_else(|| potential.default_oversample());
        Ok(ExperimentConfig {
            schemes,
            potential,
            initial,
            beta: p.beta,
            sigmas: p.sigmas,
            meshes,
            tau_rule,
            norms: s.norms,
            final_time: p.final_time,
            interval,
            reference,
            oversample_q,
            drop_coarsest: s.drop_coarsest,
            output: OutputSpec {
                csv: raw.output.csv,
                svg: raw.output.svg,
                zero_wall_time: raw.output.zero_wall_time,
            },
            seed: s.seed,
        })
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.tau_rule, TauRule::Diagonal { .. })
    }

    pub fn grid_for(&self, h: f64) -> Result<Grid> {
        Grid::with_mesh(self.interval.0, self.interval.1, h).map_err(to_config)
    }

    pub fn reference_grid(&self) -> Result<Grid> {
        self.grid_for(self.reference.h_e)
    }

    pub fn nonlinearity(&self, sigma: f64) -> Result<Nonlinearity> {
        Nonlinearity::new(self.beta, sigma).map_err(to_config)
    }

    /// Every `(h, tau)` pair, meshes in configured order.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &h in &self.meshes {
            match &self.tau_rule {
                TauRule::Diagonal { tau0 } => {
                    let r = h / DIAGONAL_H0;
                    out.push(SweepPoint { h, tau: tau0 * r * r });
                }
                TauRule::Fixed(taus) => {
                    out.extend(taus.iter().map(|&tau| SweepPoint { h, tau }));
                }
            }
        }
        out
    }

    /// Checks everything that can be checked before any stepping.
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::config("no schemes given"));
        }
        if self.sigmas.is_empty() {
            return Err(Error::config("no sigma values given"));
        }
        for &sigma in &self.sigmas {
            self.nonlinearity(sigma)?;
        }
        if self.meshes.is_empty() {
            return Err(Error::config("no mesh sizes given"));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::config("final_time must be positive"));
        }
        if self.oversample_q == 0 {
            return Err(Error::config("oversample_q must be >= 1"));
        }
        for &h in &self.meshes {
            self.grid_for(h)?;
        }
        let points = self.sweep_points();
        if points.is_empty() {
            return Err(Error::config("sweep has no time steps"));
        }
        for p in &points {
            if !(p.tau > 0.0 && p.tau.is_finite()) {
                return Err(Error::config(format!("time step {} is not positive", p.tau)));
            }
            step_count(self.final_time, p.tau).map_err(to_config)?;
            if self.is_diagonal() && p.tau >= p.h * p.h / PI {
                return Err(Error::config(format!(
                    "diagonal sweep point (h = {}, tau = {}) violates tau < h^2/pi = {}",
                    p.h,
                    p.tau,
                    p.h * p.h / PI
                )));
            }
        }
        let ReferenceSpec { tau_e, h_e } = self.reference;
        self.reference_grid()?;
        step_count(self.final_time, tau_e).map_err(to_config)?;
        let min_h = self.meshes.iter().copied().fold(f64::INFINITY, f64::min);
        let min_tau = points.iter().map(|p| p.tau).fold(f64::INFINITY, f64::min);
        // fixed-h sweeps may measure at the reference mesh itself (pure temporal error)
        let h_limit = if self.is_diagonal() { min_h / 2.0 } else { min_h };
        if h_e > h_limit * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "reference mesh {h_e} does not dominate the sweep (needs <= {h_limit})"
            )));
        }
        if tau_e > min_tau / 10.0 * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "reference step {tau_e} does not dominate the sweep (needs <= {})",
                min_tau / 10.0
            )));
        }
        Ok(())
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => Error::Config(msg),
        other => other,
    }
}
