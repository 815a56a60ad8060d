//! Error norms against reference solutions, order estimation, and the
//! per-mode quantities behind the phase-cancellation (RCO) argument.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{sobolev_norm, Grid, SpectralField};

/// `L2` and `H1` errors at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    pub e_l2: f64,
    pub e_h1: f64,
}

/// Zero-pad `field` into the mode set of `fine` (same interval, at least as many modes).
pub fn embed(field: &SpectralField, fine: &Grid) -> Result<SpectralField> {
    let coarse = field.grid();
    if !coarse.same_interval(fine) {
        return Err(Error::invalid("cannot embed into a grid on a different interval"));
    }
    if fine.size() < coarse.size() {
        return Err(Error::invalid(format!(
            "cannot embed {} modes into {} modes",
            coarse.size(),
            fine.size()
        )));
    }
    let offset = (fine.size() - coarse.size()) / 2;
    let mut out = SpectralField::zeros(*fine);
    out.coeffs_mut()[offset..offset + coarse.size()].copy_from_slice(field.coeffs());
    Ok(out)
}

/// `||numeric - reference||_{H^m}` after embedding both into the finer mode set.
pub fn error_norms(numeric: &SpectralField, reference: &SpectralField, m: u32) -> Result<f64> {
    if !numeric.grid().same_interval(reference.grid()) {
        return Err(Error::invalid("fields live on different intervals"));
    }
    let (coarse, fine) = if numeric.grid().size() <= reference.grid().size() {
        (numeric, reference)
    } else {
        (reference, numeric)
    };
    let mut diff = embed(coarse, fine.grid())?;
    for (d, f) in diff.coeffs_mut().iter_mut().zip(fine.coeffs()) {
        *d -= f;
    }
    Ok(sobolev_norm(&diff, m))
}

pub fn error_sample(t: f64, numeric: &SpectralField, reference: &SpectralField) -> Result<ErrorSample> {
    Ok(ErrorSample {
        t,
        e_l2: error_norms(numeric, reference, 0)?,
        e_h1: error_norms(numeric, reference, 1)?,
    })
}

/// Least-squares slope of `log(error)` against `log(tau)`.
pub fn estimate_order(points: &[(f64, f64)]) -> Result<f64> {
    estimate_order_with(points, false)
}

/// As [`estimate_order`]; `drop_coarsest` discards the point with the largest
/// `tau` first (pre-asymptotic bending).
pub fn estimate_order_with(points: &[(f64, f64)], drop_coarsest: bool) -> Result<f64> {
    if let Some(&(tau, err)) = points.iter().find(|(t, e)| !(*t > 0.0 && *e > 0.0)) {
        return Err(Error::invalid(format!(
            "order estimation needs positive data, got (tau = {tau}, error = {err})"
        )));
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    if drop_coarsest && !pts.is_empty() {
        let imax = pts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
            .unwrap();
        pts.remove(imax);
    }
    if pts.len() < 2 {
        return Err(Error::invalid("order estimation needs at least two points"));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("order estimation needs at least two distinct step sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// `delta_l = int_0^tau (1 - exp(i s mu^2)) ds`.
pub fn rco_delta(tau: f64, mu: f64) -> Complex64 {
    let theta = tau * mu * mu;
    if theta == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // delta = tau * (1 - (e^{i theta} - 1) / (i theta))
    if theta.abs() < 1e-3 {
        // 1 - (e^{iz}-1)/(iz) = -sum_{k>=1} (iz)^k / (k+1)!
        let iz = Complex64::new(0.0, theta);
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 1..8 {
            term = term * iz / (k + 1) as f64;
            sum -= term;
        }
        return sum * tau;
    }
    let half = 0.5 * theta;
    let e_minus_1 = Complex64::new(-2.0 * half.sin().powi(2), theta.sin());
    (Complex64::new(1.0, 0.0) - e_minus_1 / Complex64::new(0.0, theta)) * tau
}

/// `S_{n,l} = sum_{k=0}^n exp(i k tau mu^2)`.
pub fn rco_geometric_sum(tau: f64, mu: f64, n: u64) -> Complex64 {
    let theta = tau * mu * mu;
    let half = 0.5 * theta;
    let denom = half.sin();
    if denom == 0.0 {
        // exp(i theta) == 1: every term is 1
        return Complex64::new((n + 1) as f64, 0.0);
    }
    let np1 = (n + 1) as f64;
    // e^{i n theta/2} sin((n+1) theta/2) / sin(theta/2)
    Complex64::from_polar((np1 * half).sin() / denom, n as f64 * half)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcoRow {
    pub l: i64,
    pub mu: f64,
    pub abs_delta: f64,
    pub abs_s: f64,
    pub abs_product: f64,
}

/// `|delta_l|`, `|S_{n,l}|` and their product for every mode of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RcoTable {
    pub tau: f64,
    pub n: u64,
    pub rows: Vec<RcoRow>,
    pub max_product: f64,
}

pub const RCO_CSV_HEADER: &str = "l,mu,abs_delta,abs_S,abs_product";

impl RcoTable {
    /// `pi * tau / 2`, the bound on `max_product` when `tau < h^2 / pi`.
    pub fn product_bound(&self) -> f64 {
        std::f64::consts::PI * self.tau / 2.0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RCO_CSV_HEADER.split(','))
            .map_err(|e| Error::invalid(format!("csv: {e}")))?;
        for r in &self.rows {
            w.write_record([
                r.l.to_string(),
                r.mu.to_string(),
                r.abs_delta.to_string(),
                r.abs_s.to_string(),
                r.abs_product.to_string(),
            ])
            .map_err(|e| Error::invalid(format!("csv: {e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn rco_diagnostics(grid: &Grid, tau: f64, n: u64) -> RcoTable {
    let rows: Vec<RcoRow> = (0..grid.size())
        .map(|k| {
            let l = grid.mode_at(k);
            let mu = grid.mu(l);
            let abs_delta = rco_delta(tau, mu).norm();
            let abs_s = rco_geometric_sum(tau, mu, n).norm();
            RcoRow { l, mu, abs_delta, abs_s, abs_product: abs_delta * abs_s }
        })
        .collect();
    let max_product = rows.iter().map(|r| r.abs_product).fold(0.0, f64::max);
    RcoTable { tau, n, rows, max_product }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn omega(n: usize) -> Grid {
        Grid::new(-16.0, 16.0, n).unwrap()
    }

    fn field(n: usize, seed: u64) -> SpectralField {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        SpectralField::new(omega(n), (0..n).map(|_| Complex64::new(next(), next())).collect())
            .unwrap()
    }

    /// Midpoint-rule value of the defining integral of `delta`.
    fn delta_by_quadrature(tau: f64, mu: f64) -> Complex64 {
        let m = 20000;
        let ds = tau / m as f64;
        (0..m)
            .map(|i| {
                let s = (i as f64 + 0.5) * ds;
                Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, s * mu * mu)
            })
            .sum::<Complex64>()
            * ds
    }

    #[test]
    fn embedding_is_exact() {
        let u = field(16, 1);
        let fine = omega(64);
        assert_eq!(error_norms(&u, &embed(&u, &fine).unwrap(), 0).unwrap(), 0.0);
        assert!(embed(&u, &omega(8)).is_err());
        assert!(error_norms(&u, &SpectralField::zeros(Grid::new(0.0, 1.0, 16).unwrap()), 0).is_err());
    }

    #[test]
    fn single_mode_difference() {
        let g = omega(32);
        let u = field(32, 2);
        let mut v = u.clone();
        let l = 5;
        let eps = 1e-3;
        v.coeffs_mut()[g.index_of(l).unwrap()] += eps;
        let mu = g.mu(l);
        let want = eps * (32.0 * (1.0 + mu * mu)).sqrt();
        assert!((error_norms(&u, &v, 1).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn order_of_power_laws() {
        let c = 3.7;
        assert!((estimate_order(&[(0.1, 0.1 * c), (0.01, 0.01 * c)]).unwrap() - 1.0).abs() < 1e-12);
        assert!((estimate_order(&[(0.1, c * 1e-2), (0.01, c * 1e-4)]).unwrap() - 2.0).abs() < 1e-12);
        let pts = [(1.0, 5.0), (0.1, 0.1), (0.01, 0.01), (0.001, 0.001)];
        assert!((estimate_order_with(&pts, true).unwrap() - 1.0).abs() < 1e-12);
        assert!(estimate_order(&[(0.1, 0.0), (0.01, 1.0)]).is_err());
        assert!(estimate_order(&[(-0.1, 1.0), (0.01, 1.0)]).is_err());
        assert!(estimate_order(&[(0.1, 1.0)]).is_err());
        assert!(estimate_order(&[(0.1, 1.0), (0.1, 2.0)]).is_err());
    }

    #[test]
    fn delta_matches_quadrature() {
        for (tau, mu) in [(1e-3, 2.0), (0.01, 30.0), (0.1, 5.0), (1e-4, 1.0)] {
            let d = rco_delta(tau, mu);
            let q = delta_by_quadrature(tau, mu);
            assert!((d - q).norm() <= 1e-8 * tau, "tau={tau} mu={mu}: {d} vs {q}");
        }
    }

    #[test]
    fn geometric_sum_matches_direct() {
        for (tau, mu, n) in [(0.01, 3.0, 50u64), (0.3, 1.7, 17), (1e-4, 100.0, 200)] {
            let direct: Complex64 =
                (0..=n).map(|k| Complex64::from_polar(1.0, k as f64 * tau * mu * mu)).sum();
            assert!((rco_geometric_sum(tau, mu, n) - direct).norm() < 1e-9 * (n as f64));
        }
        assert_eq!(rco_geometric_sum(0.1, 0.0, 9), Complex64::new(10.0, 0.0));
    }

    #[test]
    fn zero_mode_row() {
        let t = rco_diagnostics(&omega(64), 1e-3, 1000);
        let row = t.rows.iter().find(|r| r.l == 0).unwrap();
        assert_eq!(row.abs_delta, 0.0);
        assert_eq!(t.rows.len(), 64);
    }

    #[test]
    fn delta_bound_every_row() {
        let g = omega(512);
        for tau in [1e-5, 1e-3, 0.1] {
            for r in rco_diagnostics(&g, tau, 10).rows {
                assert!(r.abs_delta <= tau * tau * r.mu * r.mu / 2.0 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn product_bound_under_cfl() {
        let g = omega(512);
        let tau = 0.9 * g.h() * g.h() / PI;
        let t = rco_diagnostics(&g, tau, 1000);
        assert!(t.max_product <= t.product_bound());
    }

    #[test]
    fn product_bound_fails_without_cfl() {
        // tau = 4 h^2: theta_l = 16 pi^2 l^2 / N^2 crosses 2 pi near l = N / sqrt(8 pi)
        let g = omega(512);
        let tau = 4.0 * g.h() * g.h();
        let witness = (1..=1000u64)
            .flat_map(|n| [101i64, 102].map(move |l| (l, n)))
            .find(|&(l, n)| {
                let mu = g.mu(l);
                (rco_delta(tau, mu) * rco_geometric_sum(tau, mu, n)).norm() > PI * tau / 2.0
            });
        let (l, n) = witness.expect("a violating (l, n) exists");
        let mu = g.mu(l);
        assert!(tau * mu * mu > PI);
        assert!(n >= 1);
    }

    #[test]
    fn csv_layout() {
        let t = rco_diagnostics(&omega(4), 0.01, 3);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RCO_CSV_HEADER));
        assert_eq!(lines.count(), 4);
    }

    proptest! {
        #[test]
        fn self_distance_is_zero(seed in any::<u64>(), m in 0u32..2) {
            let u = field(16, seed);
            prop_assert_eq!(error_norms(&u, &embed(&u, &omega(32)).unwrap(), m).unwrap(), 0.0);
        }

        #[test]
        fn triangle_inequality(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
            let (u, v, w) = (field(16, s1), field(32, s2), field(64, s3));
            for m in 0..2 {
                let uw = error_norms(&u, &w, m).unwrap();
                let uv = error_norms(&u, &v, m).unwrap();
                let vw = error_norms(&v, &w, m).unwrap();
                prop_assert!(uw <= uv + vw + 1e-12 * (uv + vw));
            }
        }

        #[test]
        fn rco_bound_random_grids(k in 3u32..12, frac in 0.01f64..0.999, which in 0usize..3) {
            let g = omega(1usize << k);
            let tau = frac * g.h() * g.h() / PI;
            let n = [1u64, 10, 1000][which];
            let t = rco_diagnostics(&g, tau, n);
            prop_assert!(t.max_product <= t.product_bound() * (1.0 + 1e-12));
        }
    }
}
