//! Potentials, the power nonlinearity `f(rho) = beta * rho^sigma` and initial data.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{
    forward_transform, project, synthesize, Grid, SampledField, SpectralField,
};

/// Oversampling factor used when projecting closed-form initial data.
const INITIAL_OVERSAMPLE: usize = 8;

/// Power nonlinearity `f(rho) = beta * rho^sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    beta: f64,
    sigma: f64,
}

impl Nonlinearity {
    pub fn new(beta: f64, sigma: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be finite, got {beta}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Nonlinearity { beta, sigma })
    }

    /// Cubic nonlinearity `beta * rho`.
    pub fn cubic(beta: f64) -> Self {
        Nonlinearity { beta, sigma: 1.0 }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        if rho.is_nan() || rho < 0.0 {
            return Err(Error::invalid(format!("density must be nonnegative, got {rho}")));
        }
        Ok(self.eval_unchecked(rho))
    }

    /// `f(rho)` for a density known to be a squared modulus.
    #[inline]
    pub(crate) fn eval_unchecked(&self, rho: f64) -> f64 {
        if rho == 0.0 || self.beta == 0.0 {
            return 0.0;
        }
        let p = if self.sigma == 1.0 {
            rho
        } else if self.sigma == 0.5 {
            rho.sqrt()
        } else {
            rho.powf(self.sigma)
        };
        self.beta * p
    }
}

/// Window factor `(1 - x^2 / 16^2)`.
fn window(x: f64) -> f64 {
    1.0 - x * x / 256.0
}

/// Half-width of the box potential.
const BOX_HALF_WIDTH: f64 = 2.0;
const BOX_DEPTH: f64 = -4.0;

/// Real potential given on its own grid and extended by trigonometric
/// interpolation, so it is band-limited by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomPotential {
    grid: Grid,
    values: Vec<f64>,
}

impl CustomPotential {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::invalid("custom potential sample count does not match its grid"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("custom potential has non-finite samples"));
        }
        Ok(CustomPotential { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn resample(&self, target: &Grid) -> Result<Vec<f64>> {
        if !self.grid.same_interval(target) {
            return Err(Error::invalid("custom potential lives on a different interval"));
        }
        if *target == self.grid {
            return Ok(self.values.clone());
        }
        let samples = SampledField::new(
            self.grid,
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )?;
        let coeffs = SpectralField::new(self.grid, forward_transform(&samples)?)?;
        let n = self.grid.size().min(target.size());
        if target.size() % n != 0 {
            return Err(Error::invalid(
                "target grid is not commensurate with the custom potential grid",
            ));
        }
        let band = project(&coeffs, n)?;
        Ok(synthesize(&band, target)?.values().iter().map(|c| c.re).collect())
    }
}

/// The potentials of the low-regularity experiments plus a few utilities.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `-4` on `(-2, 2)`, `0` elsewhere (bounded, discontinuous).
    Box4,
    /// `|x|^0.76`.
    FracPow076,
    /// `|x|^1.51 (1 - x^2/16^2)^2`.
    FracPow151Window,
    /// `|x|^2.51 (1 - x^2/16^2)^3`.
    FracPow251Window,
    /// `|x|^2 / 2`.
    Harmonic,
    Zero,
    CustomSamples(CustomPotential),
}

impl Potential {
    pub const KEYS: [&'static str; 6] =
        ["box4", "fracpow076", "fracpow151w", "fracpow251w", "harmonic", "zero"];

    pub fn from_key(key: &str) -> Result<Self> {
        Ok(match key {
            "box4" => Potential::Box4,
            "fracpow076" => Potential::FracPow076,
            "fracpow151w" => Potential::FracPow151Window,
            "fracpow251w" => Potential::FracPow251Window,
            "harmonic" => Potential::Harmonic,
            "zero" => Potential::Zero,
            other => {
                return Err(Error::invalid(format!(
                    "unknown potential '{other}' (expected one of {})",
                    Potential::KEYS.join(", ")
                )))
            }
        })
    }

    pub fn key(&self) -> &'static str {
        match self {
            Potential::Box4 => "box4",
            Potential::FracPow076 => "fracpow076",
            Potential::FracPow151Window => "fracpow151w",
            Potential::FracPow251Window => "fracpow251w",
            Potential::Harmonic => "harmonic",
            Potential::Zero => "zero",
            Potential::CustomSamples(_) => "custom",
        }
    }

    /// Numeric id stored in reference cache headers.
    pub fn id(&self) -> u32 {
        match self {
            Potential::Zero => 0,
            Potential::Box4 => 1,
            Potential::FracPow076 => 2,
            Potential::FracPow151Window => 3,
            Potential::FracPow251Window => 4,
            Potential::Harmonic => 5,
            Potential::CustomSamples(_) => 255,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        Some(match id {
            0 => Potential::Zero,
            1 => Potential::Box4,
            2 => Potential::FracPow076,
            3 => Potential::FracPow151Window,
            4 => Potential::FracPow251Window,
            5 => Potential::Harmonic,
            _ => return None,
        })
    }

    pub fn is_discontinuous(&self) -> bool {
        matches!(self, Potential::Box4)
    }

    /// Default quadrature oversampling for the nonlinear step.
    pub fn default_oversample(&self) -> usize {
        if self.is_discontinuous() {
            16
        } else {
            8
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(match self {
            Potential::Box4 => {
                if x > -BOX_HALF_WIDTH && x < BOX_HALF_WIDTH {
                    BOX_DEPTH
                } else {
                    0.0
                }
            }
            Potential::FracPow076 => x.abs().powf(0.76),
            Potential::FracPow151Window => x.abs().powf(1.51) * window(x).powi(2),
            Potential::FracPow251Window => x.abs().powf(2.51) * window(x).powi(3),
            Potential::Harmonic => 0.5 * x * x,
            Potential::Zero => 0.0,
            Potential::CustomSamples(c) => {
                let g = c.grid;
                let t = (x - g.a()) / g.h();
                let j = t.round();
                if (t - j).abs() > 1e-9 || j < 0.0 || j as usize >= g.size() {
                    return Err(Error::invalid(format!(
                        "x = {x} is not a node of the custom potential grid"
                    )));
                }
                c.values[j as usize]
            }
        })
    }

    /// Potential values at the nodes of `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Potential::CustomSamples(c) => c.resample(grid),
            _ => grid.nodes().into_iter().map(|x| self.eval(x)).collect(),
        }
    }

    /// Quadrature table for integrals of `g(V(x)) * smooth(x)` on `grid`.
    ///
    /// Nodes whose cell `[x_j - h/2, x_j + h/2]` straddles a jump of the
    /// potential carry both one-sided values weighted by the cell fraction on
    /// each side; all other nodes carry the point value.
    pub fn quadrature_table(&self, grid: &Grid) -> Result<PotentialTable> {
        let values = self.sample(grid)?;
        let mut splits = Vec::new();
        if let Potential::Box4 = self {
            let h = grid.h();
            for (j, x) in grid.nodes().into_iter().enumerate() {
                let lo = x - 0.5 * h;
                let hi = x + 0.5 * h;
                let inside =
                    ((hi.min(BOX_HALF_WIDTH) - lo.max(-BOX_HALF_WIDTH)) / h).clamp(0.0, 1.0);
                if inside > 0.0 && inside < 1.0 {
                    splits.push(SplitCell { node: j, inside, v_inside: BOX_DEPTH, v_outside: 0.0 });
                }
            }
        }
        Ok(PotentialTable { values, splits })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCell {
    pub node: usize,
    /// Fraction of the cell on the `v_inside` side.
    pub inside: f64,
    pub v_inside: f64,
    pub v_outside: f64,
}

/// Potential samples prepared for the oversampled nonlinear step.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    values: Vec<f64>,
    splits: Vec<SplitCell>,
}

impl PotentialTable {
    /// Point values (closed form at every node).
    pub fn point_values(&self) -> &[f64] {
        &self.values
    }

    pub fn splits(&self) -> &[SplitCell] {
        &self.splits
    }

    /// Cell-weighted values of `V` for quadrature.
    pub fn weighted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        for s in &self.splits {
            v[s.node] = s.inside * s.v_inside + (1.0 - s.inside) * s.v_outside;
        }
        v
    }

    /// Cell-weighted values of `exp(-i t V)`.
    pub fn phases(&self, t: f64) -> Vec<Complex64> {
        let mut p: Vec<Complex64> =
            self.values.iter().map(|&v| Complex64::from_polar(1.0, -t * v)).collect();
        for s in &self.splits {
            p[s.node] = Complex64::from_polar(s.inside, -t * s.v_inside)
                + Complex64::from_polar(1.0 - s.inside, -t * s.v_outside);
        }
        p
    }
}

/// Initial data `psi_0`.
#[derive(Clone)]
pub enum InitialData {
    /// `exp(-x^2/2)`.
    Gaussian,
    /// `x exp(-x^2/2)`.
    OddGaussian,
    /// `exp(i mu_l (x - a))`.
    SingleMode(i64),
    CustomClosure(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Gaussian => write!(f, "Gaussian"),
            InitialData::OddGaussian => write!(f, "OddGaussian"),
            InitialData::SingleMode(l) => write!(f, "SingleMode({l})"),
            InitialData::CustomClosure(_) => write!(f, "CustomClosure(..)"),
        }
    }
}

impl InitialData {
    pub fn from_key(key: &str) -> Result<Self> {
        match key {
            "gaussian" => Ok(InitialData::Gaussian),
            "odd-gaussian" => Ok(InitialData::OddGaussian),
            other => Err(Error::invalid(format!(
                "unknown initial data '{other}' (expected gaussian or odd-gaussian)"
            ))),
        }
    }

    pub fn key(&self) -> String {
        match self {
            InitialData::Gaussian => "gaussian".into(),
            InitialData::OddGaussian => "odd-gaussian".into(),
            InitialData::SingleMode(l) => format!("mode{l}"),
            InitialData::CustomClosure(_) => "custom".into(),
        }
    }

    pub fn eval(&self, x: f64, grid: &Grid) -> Complex64 {
        match self {
            InitialData::Gaussian => Complex64::new((-0.5 * x * x).exp(), 0.0),
            InitialData::OddGaussian => Complex64::new(x * (-0.5 * x * x).exp(), 0.0),
            InitialData::SingleMode(l) => Complex64::from_polar(1.0, grid.mu(*l) * (x - grid.a())),
            InitialData::CustomClosure(f) => f(x),
        }
    }
}

/// `P_N psi_0`: sample on an oversampled grid, transform, keep `T_N`.
pub fn sample_initial(data: &InitialData, grid: &Grid) -> SpectralField {
    if let InitialData::SingleMode(l) = data {
        return SpectralField::mode(*grid, *l);
    }
    let fine = grid.refined(INITIAL_OVERSAMPLE).expect("refining a valid grid");
    let samples = SampledField::from_fn(fine, |x| data.eval(x, grid));
    project(&samples, grid.size()).expect("projection onto a coarser grid")
}
