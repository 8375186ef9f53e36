//! Post-processing of traces: exponential scaling fits, `k` versus `N_eff`,
//! fidelity against captured probability mass.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sqd::{fmt_f64, SubspaceTrace};

/// Fits with `r^2` below this are flagged as not clearly exponential.
pub const EXPONENTIAL_R2: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Growth exponent per qubit.
    pub alpha: f64,
    pub log_prefactor: f64,
    /// Coefficient of determination of the fit to `ln m`.
    pub r_squared: f64,
    pub points: Vec<(usize, f64)>,
}

impl ScalingFit {
    pub fn predict(&self, l: usize) -> f64 {
        (self.log_prefactor + self.alpha * l as f64).exp()
    }

    pub fn is_exponential(&self) -> bool {
        self.r_squared >= EXPONENTIAL_R2
    }
}

/// Ordinary least squares of `ln m` on `L`. Points are sorted first, so the
/// result does not depend on input order.
pub fn fit_exponential(points: &[(usize, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(l, m)) = points.iter().find(|(_, m)| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Fit(format!("m must be positive and finite, got m({l}) = {m}")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all points share the same L".into()));
    }
    let alpha = sxy / sxx;
    let log_prefactor = my - alpha * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - log_prefactor - alpha * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(ScalingFit { alpha, log_prefactor, r_squared, points: pts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KNeffRow {
    pub l: usize,
    pub k: f64,
    pub neff: f64,
    pub ratio: f64,
    pub covers: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KNeffReport {
    pub rows: Vec<KNeffRow>,
    pub min_ratio: f64,
}

impl KNeffReport {
    pub fn all_covered(&self) -> bool {
        self.rows.iter().all(|r| r.covers)
    }
}

/// Per-size `k / N_eff` and the `k >= N_eff` flag. Both series must share the
/// same `L` grid.
pub fn compare_k_to_neff(k_series: &[(usize, f64)], neff_series: &[(usize, f64)]) -> Result<KNeffReport> {
    let mut ks = k_series.to_vec();
    let mut ns = neff_series.to_vec();
    ks.sort_by_key(|p| p.0);
    ns.sort_by_key(|p| p.0);
    let grid_k: Vec<usize> = ks.iter().map(|p| p.0).collect();
    let grid_n: Vec<usize> = ns.iter().map(|p| p.0).collect();
    if grid_k != grid_n {
        return Err(Error::Alignment(format!("k grid {grid_k:?} vs N_eff grid {grid_n:?}")));
    }
    let rows: Vec<KNeffRow> = ks
        .iter()
        .zip(&ns)
        .map(|(&(l, k), &(_, neff))| KNeffRow { l, k, neff, ratio: k / neff, covers: k >= neff })
        .collect();
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(KNeffReport { rows, min_ratio })
}

/// `(cumulative mass, F_E)` per step, sorted by mass.
pub fn mass_fidelity_curve(trace: &SubspaceTrace) -> Vec<(f64, f64)> {
    let mut curve: Vec<(f64, f64)> = trace.steps.iter().map(|s| (s.mass, s.fidelity)).collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    curve
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub model: String,
    pub dim: usize,
    pub threshold: f64,
    pub strategy: String,
    pub fit: ScalingFit,
}

pub const SCALING_CSV_HEADER: &str = "model,dim,threshold,strategy,alpha,log_prefactor,r2";
pub const KNEFF_CSV_HEADER: &str = "model,L,k,neff,ratio";

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SCALING_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{}d,{},{},{},{},{}",
            r.model,
            r.dim,
            r.threshold,
            r.strategy,
            fmt_f64(r.fit.alpha),
            fmt_f64(r.fit.log_prefactor),
            fmt_f64(r.fit.r_squared)
        )?;
    }
    Ok(())
}

/// `model` is written verbatim, so callers pass e.g. `heisenberg-1d`.
pub fn write_kneff_csv<W: Write>(rows: &[(String, KNeffRow)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{KNEFF_CSV_HEADER}")?;
    for (model, r) in rows {
        writeln!(w, "{},{},{},{},{}", model, r.l, r.k, fmt_f64(r.neff), fmt_f64(r.ratio))?;
    }
    Ok(())
}
