//! Convergence sweeps and their CSV tables.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{compute_reference, ReferenceCache, ReferenceRequest};
use super::config::{ExperimentConfig, Norm, SweepPoint};
use crate::analysis::{error_norms, estimate_order_with};
use crate::error::{Error, Result};
use crate::integrators::{evolve, step_count, Scheme, SchemeRun};

pub const CSV_HEADER: &str = "scheme,potential,sigma,beta,h,tau,norm,error,n_steps,wall_seconds";

/// One measured error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    #[serde(with = "scheme_key")]
    pub scheme: Scheme,
    pub potential: String,
    pub sigma: f64,
    pub beta: f64,
    pub h: f64,
    pub tau: f64,
    pub norm: Norm,
    pub error: f64,
    pub n_steps: usize,
    pub wall_seconds: f64,
}

mod scheme_key {
    use super::Scheme;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &Scheme, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(s.key())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Scheme, D::Error> {
        let key = String::deserialize(de)?;
        key.parse().map_err(serde::de::Error::custom)
    }
}

fn record_order(x: &ConvergenceRecord, y: &ConvergenceRecord) -> Ordering {
    x.scheme
        .id()
        .cmp(&y.scheme.id())
        .then(x.sigma.total_cmp(&y.sigma))
        .then(x.h.total_cmp(&y.h))
        .then(x.tau.total_cmp(&y.tau))
        .then(x.norm.cmp(&y.norm))
}

pub fn reference_request(cfg: &ExperimentConfig, sigma: f64) -> Result<ReferenceRequest> {
    Ok(ReferenceRequest {
        grid: cfg.reference_grid()?,
        tau_e: cfg.reference.tau_e,
        final_time: cfg.final_time,
        potential: cfg.potential.clone(),
        nonlinearity: cfg.nonlinearity(sigma)?,
        initial: cfg.initial.clone(),
        oversample_q: cfg.oversample_q,
    })
}

/// References for every sigma of the config, in config order.
pub fn compute_references(cfg: &ExperimentConfig, cache_dir: &Path) -> Result<Vec<ReferenceCache>> {
    cfg.validate()?;
    cfg.sigmas
        .par_iter()
        .map(|&sigma| compute_reference(&reference_request(cfg, sigma)?, cache_dir))
        .collect()
}

/// Run every `(scheme, sigma, h, tau)` cell and measure each requested norm.
///
/// Records come back sorted by scheme, sigma, h, tau and norm.
pub fn run_convergence_study(cfg: &ExperimentConfig, cache_dir: &Path) -> Result<Vec<ConvergenceRecord>> {
    let references = compute_references(cfg, cache_dir)?;
    let points = cfg.sweep_points();
    let mut cells = Vec::new();
    for &scheme in &cfg.schemes {
        for (i, &sigma) in cfg.sigmas.iter().enumerate() {
            for &point in &points {
                cells.push((scheme, sigma, i, point));
            }
        }
    }
    let norms = cfg.norms.norms();
    let nested: Vec<Vec<ConvergenceRecord>> = cells
        .par_iter()
        .map(|&(scheme, sigma, i, point)| run_cell(cfg, scheme, sigma, point, &references[i], &norms))
        .collect::<Result<_>>()?;
    let mut records: Vec<_> = nested.into_iter().flatten().collect();
    records.sort_by(record_order);
    if cfg.output.zero_wall_time {
        for r in &mut records {
            r.wall_seconds = 0.0;
        }
    }
    Ok(records)
}

fn run_cell(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    sigma: f64,
    point: SweepPoint,
    reference: &ReferenceCache,
    norms: &[Norm],
) -> Result<Vec<ConvergenceRecord>> {
    let run = SchemeRun {
        scheme,
        tau: point.tau,
        final_time: cfg.final_time,
        grid: cfg.grid_for(point.h)?,
        potential: cfg.potential.clone(),
        nonlinearity: cfg.nonlinearity(sigma)?,
        initial: cfg.initial.clone(),
        oversample_q: cfg.oversample_q,
    };
    let n_steps = step_count(cfg.final_time, point.tau)?;
    let traj = evolve(&run, &[])?;
    norms
        .iter()
        .map(|&norm| {
            Ok(ConvergenceRecord {
                scheme,
                potential: cfg.potential.key().to_string(),
                sigma,
                beta: cfg.beta,
                h: point.h,
                tau: point.tau,
                norm,
                error: error_norms(traj.final_field(), &reference.field, norm.order())?,
                n_steps,
                wall_seconds: traj.wall_time,
            })
        })
        .collect()
}

pub fn write_records<W: Write>(records: &[ConvergenceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_file(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_records(records, std::fs::File::create(path)?)
}

/// Parse a table written by [`write_records`]; the header must match exactly.
pub fn read_records<R: Read>(input: R) -> Result<Vec<ConvergenceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    let joined = header.iter().collect::<Vec<_>>().join(",");
    if joined != CSV_HEADER {
        return Err(Error::invalid(format!("unexpected csv header '{joined}'")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::invalid(format!("csv: {e}"))))
        .collect()
}

/// Records sharing scheme, sigma, norm and, for fixed-h sweeps, the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub scheme: Scheme,
    pub sigma: f64,
    pub norm: Norm,
    /// `None` for a diagonal series (one point per mesh).
    pub h: Option<f64>,
    /// `(tau, error)`, ascending in tau.
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn label(&self) -> String {
        let mut label = format!("{} {} sigma={}", self.scheme.key(), self.norm.key(), self.sigma);
        if let Some(h) = self.h {
            let k = -h.log2();
            if (k - k.round()).abs() < 1e-12 {
                label.push_str(&format!(" h=2^-{}", k.round()));
            } else {
                label.push_str(&format!(" h={h}"));
            }
        }
        label
    }

    pub fn slope(&self, drop_coarsest: bool) -> Result<f64> {
        estimate_order_with(&self.points, drop_coarsest)
    }
}

/// Group records into series; a mesh with more than one step size makes the
/// grouping per mesh.
pub fn group_series(records: &[ConvergenceRecord]) -> Vec<Series> {
    let mut sorted = records.to_vec();
    sorted.sort_by(record_order);
    let per_mesh = sorted.iter().enumerate().any(|(i, x)| {
        sorted[i + 1..].iter().any(|y| {
            x.scheme == y.scheme
                && x.sigma == y.sigma
                && x.h == y.h
                && x.norm == y.norm
                && x.tau != y.tau
        })
    });
    let mut keyed: Vec<(Scheme, f64, Norm, Option<f64>, f64, f64)> = sorted
        .iter()
        .map(|r| (r.scheme, r.sigma, r.norm, per_mesh.then_some(r.h), r.tau, r.error))
        .collect();
    keyed.sort_by(|x, y| {
        x.0.id()
            .cmp(&y.0.id())
            .then(x.1.total_cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.unwrap_or(0.0).total_cmp(&y.3.unwrap_or(0.0)))
            .then(x.4.total_cmp(&y.4))
    });
    let mut out: Vec<Series> = Vec::new();
    for (scheme, sigma, norm, h, tau, error) in keyed {
        match out.last_mut() {
            Some(s) if s.scheme == scheme && s.sigma == sigma && s.norm == norm && s.h == h => {
                s.points.push((tau, error));
            }
            _ => out.push(Series { scheme, sigma, norm, h, points: vec![(tau, error)] }),
        }
    }
    out
}
