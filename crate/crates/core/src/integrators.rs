//! Exact sub-flows and the Lie-Trotter, Strang and exponential-Euler steppers.
//!
//! The kinetic flow `exp(i t Laplacian)` is diagonal in mode space. The
//! potential+nonlinearity flow is a pointwise phase; it is evaluated on a
//! `q`-times oversampled grid and projected back onto `X_N`, which is how the
//! exact `L2` projection of the phase-multiplied field is approximated.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::physics::{sample_initial, InitialData, Nonlinearity, Potential};
use crate::spectral::{gather_native, scatter_native, FftPair, Grid, SampledField, SpectralField};

/// Steps between non-finite coefficient checks in [`evolve`].
pub const DIVERGENCE_CHECK_INTERVAL: usize = 1024;

/// Relative tolerance for `T / tau` to count as an integer.
pub const STEP_COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Lie-Trotter splitting, first order.
    Ltfs,
    /// Strang splitting, second order.
    Stfs,
    /// Exponential Euler, first order.
    Ewi1,
}

impl Scheme {
    pub fn key(&self) -> &'static str {
        match self {
            Scheme::Ltfs => "ltfs",
            Scheme::Stfs => "stfs",
            Scheme::Ewi1 => "ewi1",
        }
    }

    pub fn id(&self) -> u32 {
        match self {
            Scheme::Ltfs => 1,
            Scheme::Stfs => 2,
            Scheme::Ewi1 => 3,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(Scheme::Ltfs),
            2 => Some(Scheme::Stfs),
            3 => Some(Scheme::Ewi1),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ltfs" | "lie" => Ok(Scheme::Ltfs),
            "stfs" | "strang" => Ok(Scheme::Stfs),
            "ewi1" | "ewi" => Ok(Scheme::Ewi1),
            other => Err(Error::invalid(format!(
                "unknown scheme '{other}' (expected ltfs, stfs or ewi1)"
            ))),
        }
    }
}

/// A fully specified simulation.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub tau: f64,
    pub final_time: f64,
    pub grid: Grid,
    pub potential: Potential,
    pub nonlinearity: Nonlinearity,
    pub initial: InitialData,
    /// Oversampling factor of the quadrature grid used by the nonlinear step.
    pub oversample_q: usize,
}

impl SchemeRun {
    /// Run with the potential's default oversampling factor.
    pub fn new(
        scheme: Scheme,
        tau: f64,
        final_time: f64,
        grid: Grid,
        potential: Potential,
        nonlinearity: Nonlinearity,
        initial: InitialData,
    ) -> Self {
        let oversample_q = potential.default_oversample();
        SchemeRun { scheme, tau, final_time, grid, potential, nonlinearity, initial, oversample_q }
    }

    pub fn with_oversample(mut self, q: usize) -> Self {
        self.oversample_q = q;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// `round(T / tau)`, rejecting non-integer ratios.
    pub fn n_steps(&self) -> Result<usize> {
        step_count(self.final_time, self.tau)
    }
}

/// `round(t / tau)` if `t` is an integer multiple of `tau` within
/// [`STEP_COUNT_TOLERANCE`].
pub fn step_count(t: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {tau}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    let ratio = t / tau;
    let n = ratio.round();
    if (ratio - n).abs() > STEP_COUNT_TOLERANCE * ratio.max(1.0) {
        return Err(Error::invalid(format!(
            "time {t} is not an integer multiple of the step {tau}"
        )));
    }
    Ok(n as usize)
}

/// Snapshots of one simulation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub run: SchemeRun,
    pub snapshots: Vec<(f64, SpectralField)>,
    pub wall_time: f64,
}

impl Trajectory {
    /// The field at the final time.
    pub fn final_field(&self) -> &SpectralField {
        &self.snapshots.last().expect("trajectory always holds psi^0").1
    }
}

/// `exp(-i t mu_l^2)` in canonical order.
fn kinetic_multipliers(grid: &Grid, t: f64) -> Vec<Complex64> {
    grid.mus().into_iter().map(|mu| Complex64::from_polar(1.0, -t * mu * mu)).collect()
}

/// `phi_1(-i tau mu^2)` with `phi_1(z) = (e^z - 1) / z` and `phi_1(0) = 1`.
pub fn phi1_multiplier(tau: f64, mu: f64) -> Complex64 {
    let theta = tau * mu * mu;
    if theta == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    // e^{-i theta} - 1 = -2 sin^2(theta/2) - i sin(theta), free of cancellation
    let half = 0.5 * theta;
    let num = Complex64::new(-2.0 * half.sin().powi(2), -theta.sin());
    num / Complex64::new(0.0, -theta)
}

/// Reusable stepping workspace for one `(grid, q, tau, potential, nonlinearity)`.
///
/// Not shared between threads; each worker builds its own.
pub struct Propagator {
    scheme: Scheme,
    n: usize,
    fine_len: usize,
    nonlinearity: Nonlinearity,
    tau: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    potential_phase: Vec<Complex64>,
    potential_values: Vec<f64>,
    kick_full: Vec<Complex64>,
    kick_half: Vec<Complex64>,
    ewi_weights: Vec<Complex64>,
}

impl Propagator {
    pub fn new(run: &SchemeRun) -> Result<Self> {
        Self::build(
            run.scheme,
            &run.grid,
            run.tau,
            &run.potential,
            run.nonlinearity,
            run.oversample_q,
        )
    }

    pub fn build(
        scheme: Scheme,
        grid: &Grid,
        tau: f64,
        potential: &Potential,
        nonlinearity: Nonlinearity,
        q: usize,
    ) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::invalid(format!("time step must be finite, got {tau}")));
        }
        let fine = grid.refined(q)?;
        let table = potential.quadrature_table(&fine)?;
        let plans = FftPair::new(fine.size());
        let scratch = vec![Complex64::new(0.0, 0.0); plans.scratch_len()];
        let mus = grid.mus();
        let (potential_phase, potential_values, ewi_weights) = match scheme {
            Scheme::Ewi1 => (
                Vec::new(),
                table.weighted_values(),
                // -i tau phi_1(-i tau mu^2)
                mus.iter()
                    .map(|&mu| Complex64::new(0.0, -tau) * phi1_multiplier(tau, mu))
                    .collect(),
            ),
            _ => (table.phases(tau), Vec::new(), Vec::new()),
        };
        Ok(Propagator {
            scheme,
            n: grid.size(),
            fine_len: fine.size(),
            nonlinearity,
            tau,
            forward: plans.forward,
            inverse: plans.inverse,
            buf: vec![Complex64::new(0.0, 0.0); fine.size()],
            scratch,
            potential_phase,
            potential_values,
            kick_full: kinetic_multipliers(grid, tau),
            kick_half: kinetic_multipliers(grid, 0.5 * tau),
            ewi_weights,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Advance canonical coefficients by one step in place.
    pub fn step(&mut self, coeffs: &mut [Complex64]) {
        debug_assert_eq!(coeffs.len(), self.n);
        match self.scheme {
            Scheme::Ltfs => {
                self.phase_kick(coeffs);
                apply_multipliers(coeffs, &self.kick_full);
            }
            Scheme::Stfs => {
                apply_multipliers(coeffs, &self.kick_half);
                self.phase_kick(coeffs);
                apply_multipliers(coeffs, &self.kick_half);
            }
            Scheme::Ewi1 => self.exponential_euler(coeffs),
        }
    }

    fn to_fine_values(&mut self, coeffs: &[Complex64]) {
        scatter_native(coeffs, &mut self.buf);
        self.inverse.process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    fn from_fine_values(&mut self, coeffs: &mut [Complex64]) {
        self.forward.process_with_scratch(&mut self.buf, &mut self.scratch);
        gather_native(&self.buf, coeffs, 1.0 / self.fine_len as f64);
    }

    /// Pointwise `exp(-i tau (V + f(|u|^2)))` on the fine grid, in place on `buf`.
    fn apply_phase_to_buf(&mut self) {
        let nl = self.nonlinearity;
        let tau = self.tau;
        if nl.beta() == 0.0 {
            for (u, p) in self.buf.iter_mut().zip(&self.potential_phase) {
                *u *= p;
            }
        } else {
            for (u, p) in self.buf.iter_mut().zip(&self.potential_phase) {
                let f = nl.eval_unchecked(u.norm_sqr());
                let (s, c) = (-tau * f).sin_cos();
                *u *= p * Complex64::new(c, s);
            }
        }
    }

    /// `P_N Phi_B^tau` applied to canonical coefficients.
    fn phase_kick(&mut self, coeffs: &mut [Complex64]) {
        self.to_fine_values(coeffs);
        self.apply_phase_to_buf();
        self.from_fine_values(coeffs);
    }

    fn exponential_euler(&mut self, coeffs: &mut [Complex64]) {
        let nl = self.nonlinearity;
        self.to_fine_values(coeffs);
        for (u, v) in self.buf.iter_mut().zip(&self.potential_values) {
            *u *= v + nl.eval_unchecked(u.norm_sqr());
        }
        let mut source = vec![Complex64::new(0.0, 0.0); self.n];
        self.from_fine_values(&mut source);
        for ((c, e), (w, g)) in
            coeffs.iter_mut().zip(&self.kick_full).zip(self.ewi_weights.iter().zip(&source))
        {
            *c = *c * e + w * g;
        }
    }
}

fn apply_multipliers(coeffs: &mut [Complex64], mult: &[Complex64]) {
    for (c, m) in coeffs.iter_mut().zip(mult) {
        *c *= m;
    }
}

/// `exp(i t Laplacian)`: multiply mode `l` by `exp(-i t mu_l^2)`.
pub fn free_flow(field: &SpectralField, t: f64) -> SpectralField {
    let mut out = field.clone();
    apply_multipliers(out.coeffs_mut(), &kinetic_multipliers(field.grid(), t));
    out
}

/// `Phi_B^tau(u)` evaluated on the `q`-times oversampled grid, before projection.
pub fn nonlinear_phase_samples(
    field: &SpectralField,
    tau: f64,
    potential: &Potential,
    nonlinearity: Nonlinearity,
    q: usize,
) -> Result<SampledField> {
    let mut prop = Propagator::build(Scheme::Ltfs, field.grid(), tau, potential, nonlinearity, q)?;
    prop.to_fine_values(field.coeffs());
    prop.apply_phase_to_buf();
    let fine = field.grid().refined(q)?;
    SampledField::new(fine, prop.buf)
}

/// `P_N Phi_B^tau(u)`.
pub fn nonlinear_flow(
    field: &SpectralField,
    tau: f64,
    potential: &Potential,
    nonlinearity: Nonlinearity,
    q: usize,
) -> Result<SpectralField> {
    let mut prop = Propagator::build(Scheme::Ltfs, field.grid(), tau, potential, nonlinearity, q)?;
    let mut out = field.clone();
    prop.phase_kick(out.coeffs_mut());
    Ok(out)
}

fn single_step(field: &SpectralField, run: &SchemeRun, scheme: Scheme) -> Result<SpectralField> {
    if field.grid() != &run.grid {
        return Err(Error::invalid("field does not live on the run's grid"));
    }
    let mut prop = Propagator::build(
        scheme,
        &run.grid,
        run.tau,
        &run.potential,
        run.nonlinearity,
        run.oversample_q,
    )?;
    let mut out = field.clone();
    prop.step(out.coeffs_mut());
    Ok(out)
}

/// One Lie-Trotter step `exp(i tau Laplacian) P_N Phi_B^tau`.
pub fn lie_step(field: &SpectralField, run: &SchemeRun) -> Result<SpectralField> {
    single_step(field, run, Scheme::Ltfs)
}

/// One Strang step: half kinetic, `P_N Phi_B^tau`, half kinetic.
pub fn strang_step(field: &SpectralField, run: &SchemeRun) -> Result<SpectralField> {
    single_step(field, run, Scheme::Stfs)
}

/// One exponential Euler step.
pub fn ewi_step(field: &SpectralField, run: &SchemeRun) -> Result<SpectralField> {
    single_step(field, run, Scheme::Ewi1)
}

/// Iterate the selected scheme from `P_N psi_0` to `T`.
///
/// The returned trajectory holds `psi^0`, every requested snapshot and the
/// final field, in time order without duplicates.
pub fn evolve(run: &SchemeRun, snapshot_times: &[f64]) -> Result<Trajectory> {
    let start = Instant::now();
    let n_steps = run.n_steps()?;
    let mut wanted = Vec::with_capacity(snapshot_times.len() + 2);
    wanted.push(0);
    for &t in snapshot_times {
        let k = step_count(t, run.tau)?;
        if k > n_steps {
            return Err(Error::invalid(format!("snapshot time {t} is beyond T = {}", run.final_time)));
        }
        wanted.push(k);
    }
    wanted.push(n_steps);
    wanted.sort_unstable();
    wanted.dedup();

    let mut field = sample_initial(&run.initial, &run.grid);
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    if next.peek() == Some(&&0) {
        snapshots.push((0.0, field.clone()));
        next.next();
    }
    if n_steps > 0 {
        let mut prop = Propagator::new(run)?;
        for step in 1..=n_steps {
            prop.step(field.coeffs_mut());
            if (step % DIVERGENCE_CHECK_INTERVAL == 0 || step == n_steps) && !field.is_finite() {
                return Err(Error::Divergence { step });
            }
            if next.peek() == Some(&&step) {
                if !field.is_finite() {
                    return Err(Error::Divergence { step });
                }
                snapshots.push((step as f64 * run.tau, field.clone()));
                next.next();
            }
        }
    }
    Ok(Trajectory { run: run.clone(), snapshots, wall_time: start.elapsed().as_secs_f64() })
}
