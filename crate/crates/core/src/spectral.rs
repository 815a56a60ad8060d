//! Periodic grids, Fourier analysis/synthesis and Sobolev norms.
//!
//! Coefficients follow the convention
//!
//! ```text
//! u_hat[l] = 1/(b-a) * integral_a^b u(x) exp(-i mu_l (x-a)) dx,   mu_l = 2 pi l / (b-a)
//! ```
//!
//! so `u_hat[0]` is the mean value and Parseval reads
//! `||u||^2 = (b-a) * sum |u_hat[l]|^2`.
//!
//! # Storage order
//!
//! Every coefficient slice exposed by this crate is in *canonical* order:
//! index `k` holds mode `l = k - N/2`, i.e. `l = -N/2, ..., N/2-1`. The FFT
//! engine works in its native order (`l mod M`); the permutation happens only
//! in [`scatter_native`] and [`gather_native`].

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[a, b)` with `n` nodes and the mode set
/// `{-n/2, ..., n/2-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::invalid(format!("interval ({a}, {b}) is not a proper interval")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::invalid(format!("mode count must be even and >= 4, got {n}")));
        }
        Ok(Grid { a, b, n })
    }

    /// Grid with mesh size `h`; `(b - a) / h` must be an even integer.
    pub fn with_mesh(a: f64, b: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("mesh size must be positive, got {h}")));
        }
        let ratio = (b - a) / h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "mesh size {h} does not divide the interval length {}",
                b - a
            )));
        }
        Grid::new(a, b, n as usize)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of nodes, equal to the number of modes.
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Mode number stored at canonical index `k`.
    pub fn mode_at(&self, k: usize) -> i64 {
        k as i64 - (self.n / 2) as i64
    }

    /// Canonical index of mode `l`, if `l` belongs to the mode set.
    pub fn index_of(&self, l: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        (-half..half).contains(&l).then(|| (l + half) as usize)
    }

    pub fn mu(&self, l: i64) -> f64 {
        2.0 * PI * l as f64 / self.length()
    }

    /// Frequencies in canonical order.
    pub fn mus(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.mu(self.mode_at(k))).collect()
    }

    /// Same interval, `q` times as many nodes.
    pub fn refined(&self, q: usize) -> Result<Grid> {
        if q == 0 {
            return Err(Error::invalid("refinement factor must be >= 1"));
        }
        Grid::new(self.a, self.b, self.n * q)
    }

    pub fn same_interval(&self, other: &Grid) -> bool {
        self.a == other.a && self.b == other.b
    }
}

/// A trigonometric polynomial in `X_N`, stored as canonical-order coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.size() {
            return Err(Error::invalid(format!(
                "{} coefficients for a grid with {} modes",
                coeffs.len(),
                grid.size()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        SpectralField { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.size()] }
    }

    /// The single mode `exp(i mu_l (x - a))`; zero if `l` is outside the mode set.
    pub fn mode(grid: Grid, l: i64) -> Self {
        let mut field = SpectralField::zeros(grid);
        if let Some(k) = grid.index_of(l) {
            field.coeffs[k] = Complex64::new(1.0, 0.0);
        }
        field
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of mode `l` (zero outside the mode set).
    pub fn coeff(&self, l: i64) -> Complex64 {
        self.grid.index_of(l).map_or(Complex64::new(0.0, 0.0), |k| self.coeffs[k])
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Point values on the nodes of a (possibly oversampled) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::invalid(format!(
                "{} samples for a grid with {} nodes",
                values.len(),
                grid.size()
            )));
        }
        Ok(SampledField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.size()).map(|j| f(grid.node(j))).collect();
        SampledField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward and inverse plans of one length, taken from the per-thread planner.
#[derive(Clone)]
pub(crate) struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            FftPair { forward: p.plan_fft_forward(len), inverse: p.plan_fft_inverse(len) }
        })
    }

    pub fn scratch_len(&self) -> usize {
        self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len())
    }
}

/// Place canonical coefficients (length `N`) into a native-order buffer of
/// length `M >= N`, zeroing the remaining modes.
pub(crate) fn scatter_native(coeffs: &[Complex64], buf: &mut [Complex64]) {
    let n = coeffs.len();
    let m = buf.len();
    debug_assert!(m >= n);
    buf.fill(Complex64::new(0.0, 0.0));
    let half = n / 2;
    // l >= 0 lives at k = half.., native index l
    buf[..half].copy_from_slice(&coeffs[half..]);
    // l < 0 lives at k = 0..half, native index m + l
    buf[m - half..].copy_from_slice(&coeffs[..half]);
}

/// Inverse of [`scatter_native`] restricted to the `N` retained modes,
/// scaling by `scale`.
pub(crate) fn gather_native(buf: &[Complex64], coeffs: &mut [Complex64], scale: f64) {
    let n = coeffs.len();
    let m = buf.len();
    let half = n / 2;
    for (c, b) in coeffs[half..].iter_mut().zip(&buf[..half]) {
        *c = b * scale;
    }
    for (c, b) in coeffs[..half].iter_mut().zip(&buf[m - half..]) {
        *c = b * scale;
    }
}

/// Coefficients `u_hat[l]`, `l` in `T_M`, of the trapezoidal quadrature of the
/// samples (`M` = number of samples).
pub fn forward_transform(samples: &SampledField) -> Result<Vec<Complex64>> {
    let m = samples.grid.size();
    if samples.values.len() != m {
        return Err(Error::invalid("sample count does not match grid"));
    }
    let plans = FftPair::new(m);
    let mut buf = samples.values.clone();
    plans.forward.process(&mut buf);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
    gather_native(&buf, &mut coeffs, 1.0 / m as f64);
    Ok(coeffs)
}

/// Evaluate `sum_l coeffs[l] exp(i mu_l (x_j - a))` at the grid nodes.
pub fn inverse_transform(coeffs: &[Complex64], grid: &Grid) -> Result<SampledField> {
    if coeffs.len() != grid.size() {
        return Err(Error::invalid(format!(
            "{} coefficients for a grid with {} modes",
            coeffs.len(),
            grid.size()
        )));
    }
    let plans = FftPair::new(grid.size());
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.size()];
    scatter_native(coeffs, &mut buf);
    plans.inverse.process(&mut buf);
    SampledField::new(*grid, buf)
}

/// Either representation can be projected.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Spectral(&'a SpectralField),
    Sampled(&'a SampledField),
}

impl<'a> From<&'a SpectralField> for FieldRef<'a> {
    fn from(f: &'a SpectralField) -> Self {
        FieldRef::Spectral(f)
    }
}

impl<'a> From<&'a SampledField> for FieldRef<'a> {
    fn from(f: &'a SampledField) -> Self {
        FieldRef::Sampled(f)
    }
}

/// L2 projection onto `X_target_n`: keep modes in `T_target_n`, drop the rest.
pub fn project<'a>(source: impl Into<FieldRef<'a>>, target_n: usize) -> Result<SpectralField> {
    let (grid, coeffs) = match source.into() {
        FieldRef::Spectral(f) => (f.grid, f.coeffs.clone()),
        FieldRef::Sampled(s) => (s.grid, forward_transform(s)?),
    };
    if target_n > grid.size() {
        return Err(Error::invalid(format!(
            "cannot project {} available modes onto {target_n} modes",
            grid.size()
        )));
    }
    let target = Grid::new(grid.a, grid.b, target_n)?;
    let offset = (grid.size() - target_n) / 2;
    SpectralField::new(target, coeffs[offset..offset + target_n].to_vec())
}

/// Evaluate the trigonometric polynomial exactly on a finer grid with the same
/// interval (zero-padding in mode space).
pub fn synthesize(field: &SpectralField, eval_grid: &Grid) -> Result<SampledField> {
    if !field.grid.same_interval(eval_grid) {
        return Err(Error::invalid("evaluation grid has a different interval"));
    }
    let n = field.grid.size();
    let m = eval_grid.size();
    if m < n || m % n != 0 {
        return Err(Error::invalid(format!(
            "evaluation grid with {m} nodes is not an integer refinement of {n} modes"
        )));
    }
    let plans = FftPair::new(m);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    scatter_native(&field.coeffs, &mut buf);
    plans.inverse.process(&mut buf);
    SampledField::new(*eval_grid, buf)
}

/// `sqrt((b-a) * sum_l (1 + mu_l^2)^m |u_hat[l]|^2)`.
pub fn sobolev_norm(field: &SpectralField, m: u32) -> f64 {
    let grid = &field.grid;
    let sum: f64 = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let mu = grid.mu(grid.mode_at(k));
            (1.0 + mu * mu).powi(m as i32) * c.norm_sqr()
        })
        .sum();
    (grid.length() * sum).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn omega(n: usize) -> Grid {
        Grid::new(-16.0, 16.0, n).unwrap()
    }

    /// Direct O(M^2) evaluation of the coefficient integral by the trapezoidal rule.
    fn brute_force_dft(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
        let m = grid.size();
        (0..m)
            .map(|k| {
                let mu = grid.mu(grid.mode_at(k));
                values
                    .iter()
                    .enumerate()
                    .map(|(j, u)| u * Complex64::from_polar(1.0, -mu * (grid.node(j) - grid.a())))
                    .sum::<Complex64>()
                    / m as f64
            })
            .collect()
    }

    fn lcg_samples(m: usize, seed: u64) -> Vec<Complex64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..m).map(|_| Complex64::new(next(), next())).collect()
    }

    #[test]
    fn grid_invariants() {
        let g = omega(512);
        assert_eq!(g.h() * 512.0, 32.0);
        assert_eq!(g.mu(0), 0.0);
        assert_eq!(g.mu(-7), -g.mu(7));
        let max = g.mus().iter().fold(0.0f64, |acc, m| acc.max(m.abs()));
        assert!((max - PI / g.h()).abs() < 1e-12);
        assert!(Grid::new(-16.0, 16.0, 6).is_ok());
        assert!(Grid::new(-16.0, 16.0, 7).is_err());
        assert!(Grid::new(-16.0, 16.0, 2).is_err());
        assert!(Grid::new(1.0, 1.0, 8).is_err());
        assert_eq!(Grid::with_mesh(-16.0, 16.0, 0.125).unwrap().size(), 256);
        assert!(Grid::with_mesh(-16.0, 16.0, 0.3).is_err());
    }

    #[test]
    fn forward_single_mode_and_constant() {
        let g = omega(16);
        let mu3 = g.mu(3);
        let s = SampledField::from_fn(g, |x| Complex64::from_polar(1.0, mu3 * (x + 16.0)));
        let c = forward_transform(&s).unwrap();
        for k in 0..16 {
            let expect = if g.mode_at(k) == 3 { 1.0 } else { 0.0 };
            assert!((c[k] - expect).norm() < 1e-14, "k={k}");
        }
        let s = SampledField::from_fn(g, |_| Complex64::new(2.0, 0.0));
        let c = forward_transform(&s).unwrap();
        assert!((c[g.index_of(0).unwrap()] - 2.0).norm() < 1e-15);
        assert!(c.iter().enumerate().all(|(k, v)| g.mode_at(k) == 0 || v.norm() < 1e-15));
    }

    #[test]
    fn forward_matches_brute_force() {
        for m in [4usize, 6, 8, 12, 16] {
            let g = omega(m);
            let vals = lcg_samples(m, m as u64);
            let fast = forward_transform(&SampledField::new(g, vals.clone()).unwrap()).unwrap();
            let slow = brute_force_dft(&g, &vals);
            for (x, y) in fast.iter().zip(&slow) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let g = omega(8);
        assert!(SampledField::new(g, vec![Complex64::new(0.0, 0.0); 7]).is_err());
        assert!(inverse_transform(&[Complex64::new(0.0, 0.0); 6], &g).is_err());
        assert!(SpectralField::new(g, vec![]).is_err());
    }

    #[test]
    fn inverse_examples() {
        let g = omega(32);
        let s = inverse_transform(SpectralField::mode(g, 0).coeffs(), &g).unwrap();
        assert!(s.values().iter().all(|v| (v - 1.0).norm() < 1e-15));
        let s = inverse_transform(SpectralField::mode(g, 1).coeffs(), &g).unwrap();
        for (j, v) in s.values().iter().enumerate() {
            let x = g.node(j);
            let expect = Complex64::from_polar(1.0, PI / 16.0 * (x + 16.0));
            assert!((v - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn round_trip_m64() {
        let g = omega(64);
        let vals = lcg_samples(64, 99);
        let s = SampledField::new(g, vals.clone()).unwrap();
        let back = inverse_transform(&forward_transform(&s).unwrap(), &g).unwrap();
        let err: f64 = back.values().iter().zip(&vals).map(|(a, b)| (a - b).norm_sqr()).sum();
        let nrm: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
        assert!((err / nrm).sqrt() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let g = omega(16);
        let mut coeffs = lcg_samples(16, 5);
        coeffs[0] = Complex64::new(0.0, 0.0);
        let u = SpectralField::new(g, coeffs).unwrap();
        assert_eq!(project(&u, 16).unwrap(), u);

        // l = N/2 is not in T_N
        let fine = Grid::new(-16.0, 16.0, 32).unwrap();
        let nyq = SpectralField::mode(fine, 8);
        let p = project(&nyq, 16).unwrap();
        assert!(p.coeffs().iter().all(|c| c.norm() == 0.0));
        // l = -N/2 is
        let p = project(&SpectralField::mode(fine, -8), 16).unwrap();
        assert_eq!(p.coeff(-8), Complex64::new(1.0, 0.0));

        assert!(project(&u, 32).is_err());
    }

    #[test]
    fn projection_tail_of_gaussian() {
        let fine = omega(4096);
        let s = SampledField::from_fn(fine, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
        let all = SpectralField::new(fine, forward_transform(&s).unwrap()).unwrap();
        let kept = project(&s, 512).unwrap();
        let tail2 = sobolev_norm(&all, 0).powi(2) - sobolev_norm(&kept, 0).powi(2);
        // direct tail sum, not the difference of squares
        let direct: f64 = (0..4096)
            .filter(|&k| kept.grid().index_of(fine.mode_at(k)).is_none())
            .map(|k| all.coeffs()[k].norm_sqr())
            .sum::<f64>()
            * 32.0;
        assert!(direct.sqrt() < 1e-10);
        assert!(tail2.abs() < 1e-12);
    }

    #[test]
    fn synthesize_examples() {
        let g = omega(16);
        let fine = g.refined(4).unwrap();
        let mut c = SpectralField::zeros(g);
        c.coeffs_mut()[g.index_of(0).unwrap()] = Complex64::new(0.5, -1.0);
        let s = synthesize(&c, &fine).unwrap();
        assert_eq!(s.values().len(), 64);
        assert!(s.values().iter().all(|v| (v - Complex64::new(0.5, -1.0)).norm() < 1e-15));

        let fine2 = g.refined(2).unwrap();
        let s = synthesize(&SpectralField::mode(g, 1), &fine2).unwrap();
        for (j, v) in s.values().iter().enumerate() {
            let expect = Complex64::from_polar(1.0, g.mu(1) * (fine2.node(j) + 16.0));
            assert!((v - expect).norm() < 1e-14);
        }

        let u = SpectralField::new(g, lcg_samples(16, 3)).unwrap();
        assert_eq!(synthesize(&u, &g).unwrap(), inverse_transform(u.coeffs(), &g).unwrap());

        let other = Grid::new(-8.0, 8.0, 32).unwrap();
        assert!(synthesize(&u, &other).is_err());
        assert!(synthesize(&u, &Grid::new(-16.0, 16.0, 24).unwrap()).is_err());
    }

    #[test]
    fn synthesize_gaussian_on_fine_grid() {
        let n = 512;
        let g = omega(n);
        let s = SampledField::from_fn(g.refined(8).unwrap(), |x| {
            Complex64::new((-x * x / 2.0).exp(), 0.0)
        });
        let u = project(&s, n).unwrap();
        let fine = g.refined(8).unwrap();
        let vals = synthesize(&u, &fine).unwrap();
        let dev = vals
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| (v - (-fine.node(j).powi(2) / 2.0).exp()).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10, "dev = {dev:e}");
    }

    #[test]
    fn sobolev_examples() {
        let g = omega(16);
        let mut c = SpectralField::zeros(g);
        c.coeffs_mut()[g.index_of(0).unwrap()] = Complex64::new(3.0, 4.0);
        assert!((sobolev_norm(&c, 0) - 5.0 * 32f64.sqrt()).abs() < 1e-12);
        let l = 3;
        let mu = g.mu(l);
        let want = (32.0 * (1.0 + mu * mu)).sqrt();
        assert!((sobolev_norm(&SpectralField::mode(g, l), 1) - want).abs() < 1e-12);
    }

    #[test]
    fn gaussian_l2_norm_matches_closed_form() {
        // integral of exp(-x^2) over R is sqrt(pi); truncation at |x| = 16 is ~1e-113
        let g = omega(512);
        let s = SampledField::from_fn(g.refined(8).unwrap(), |x| {
            Complex64::new((-x * x / 2.0).exp(), 0.0)
        });
        let u = project(&s, 512).unwrap();
        assert!((sobolev_norm(&u, 0).powi(2) - PI.sqrt()).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(seed in any::<u64>(), which in 0usize..3) {
            let m = [8usize, 64, 512][which];
            let g = omega(m);
            let vals = lcg_samples(m, seed);
            let s = SampledField::new(g, vals.clone()).unwrap();
            let back = inverse_transform(&forward_transform(&s).unwrap(), &g).unwrap();
            let err: f64 = back.values().iter().zip(&vals).map(|(a, b)| (a - b).norm_sqr()).sum();
            let nrm: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((err / nrm).sqrt() < 1e-12);
        }

        #[test]
        fn parseval_matches_trapezoid(seed in any::<u64>(), which in 0usize..3) {
            let n = [8usize, 64, 512][which];
            let g = omega(n);
            let u = SpectralField::new(g, lcg_samples(n, seed)).unwrap();
            let vals = inverse_transform(u.coeffs(), &g).unwrap();
            let quad: f64 = vals.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * g.h();
            let parseval = sobolev_norm(&u, 0).powi(2);
            prop_assert!((quad - parseval).abs() <= 1e-12 * parseval);
        }

        #[test]
        fn projection_contracts(seed in any::<u64>(), m in 0u32..2) {
            let g = omega(64);
            let u = SpectralField::new(g, lcg_samples(64, seed)).unwrap();
            let p = project(&u, 16).unwrap();
            prop_assert!(sobolev_norm(&p, m) <= sobolev_norm(&u, m));
            prop_assert_eq!(project(&p, 16).unwrap(), p);
        }

        #[test]
        fn brute_force_equivalence(seed in any::<u64>(), half in 2usize..=8) {
            let m = 2 * half;
            let g = omega(m);
            let vals = lcg_samples(m, seed);
            let fast = forward_transform(&SampledField::new(g, vals.clone()).unwrap()).unwrap();
            let slow = brute_force_dft(&g, &vals);
            for (x, y) in fast.iter().zip(&slow) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
