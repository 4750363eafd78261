//! Sweeping onto lattice balls inside U approximates sweeping onto U.
//!
//! A_m is the union of the balls B(z, a/m), z ∈ (x₀ + Z^d)/m, contained in
//! U ∩ B(0, m) at distance >= 1/m from R^d \ U. Every level reuses the seed
//! of the reference sweep, so level-to-level changes are not masked by
//! independent noise.

use serde::{Deserialize, Serialize};

use super::{distance, integrals, open_set_stop, spearman, ExperimentReport};
use crate::engine::{McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{grid_balls, DomainSpec, GridSpec, OpenSet};
use crate::kernels::KernelSpec;
use crate::measure::WeightedMeasure;
use crate::point::Point;
use crate::potential::Dictionary;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridApproxOptions {
    /// Lattice offset x₀.
    pub offset: Option<Point>,
    /// Ball scale a ∈ (0, 1).
    pub scale: f64,
    pub ladder: Vec<u32>,
    /// Gate on |difference| / |reference| at the finest level.
    #[serde(default)]
    pub relative_tolerance: Option<f64>,
}

pub struct GridApproxInput<'a> {
    pub nu: &'a WeightedMeasure,
    pub u: &'a OpenSet,
    pub w: &'a OpenSet,
    pub domain: &'a DomainSpec,
    pub kernel: &'a KernelSpec,
    pub dict: &'a Dictionary,
    pub options: &'a GridApproxOptions,
    pub mc: &'a McParams,
}

pub fn approximate_open_balayage(input: &GridApproxInput<'_>) -> Result<ExperimentReport> {
    let GridApproxInput { nu, u, w, domain, kernel: k, dict, options, mc } = *input;
    let d = k.dim();
    let ladder = &options.ladder;
    if ladder.is_empty() || ladder.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::parameter("grid ladder must be strictly increasing and non-empty"));
    }
    for (i, a) in nu.atoms().iter().enumerate() {
        if !w.contains(&a.point) {
            return Err(Error::precondition(format!("atom {i} of ν lies outside W")));
        }
    }
    let offset = options.offset.unwrap_or_else(|| Point::zero(d));
    let mut rep = ExperimentReport::new("grid-approx");
    rep.param("kernel", k);
    rep.param("scale", options.scale);
    rep.param("offset", offset);
    rep.param("ladder", ladder);
    rep.param("samples", mc.samples);
    rep.param("seed", mc.seed);

    let source = integrals(nu, dict, k)?;
    rep.record("source", None, nu, dict, k, 0)?;
    let reference_stop = open_set_stop(u, w, domain)?;
    let (reference, _) = rep.sweep("reference", None, nu, &source, &reference_stop, k, mc, dict)?;

    let n_q = dict.len();
    let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); n_q];
    let mut last = None;
    for (level, &m) in ladder.iter().enumerate() {
        let g = GridSpec { offset, scale: options.scale, resolution: m };
        let balls = grid_balls(&g, u)?;
        rep.param(&format!("balls_m{m}"), balls.len());
        if balls.is_empty() {
            rep.warn(format!("A_m is empty at m = {m}{}", if level == 0 { " (coarsest level)" } else { "" }));
        }
        let stop = StopSet::new(balls, Some(w.clone()), *domain)?;
        let (swept, _) = rep.sweep("grid", Some(m), nu, &source, &stop, k, mc, dict)?;
        let wd = distance(&swept, &reference, dict, k)?;
        for (j, r) in wd.rows.iter().enumerate() {
            diffs[j].push(r.difference.abs());
        }
        rep.record_distance("grid-vs-reference", Some(m), &wd, mc.samples);
        last = Some(wd);
    }

    let levels: Vec<f64> = ladder.iter().map(|&m| m as f64).collect();
    for (j, q) in dict.members.iter().enumerate() {
        let rho = spearman(&levels, &diffs[j]);
        rep.param(&format!("spearman_{}", q.name), rho);
        let strict = diffs[j].windows(2).all(|p| p[1] < p[0]);
        rep.check(format!("decreasing:{}", q.name), strict, rho, 0.0, 0.0);
    }
    if let (Some(tol), Some(wd)) = (options.relative_tolerance, last) {
        for r in &wd.rows {
            let scale = r.second.value.abs().max(f64::MIN_POSITIVE);
            let rel = r.difference.abs() / scale;
            rep.check(format!("relative-final:{}", r.function), rel < tol, rel, tol, r.stderr / scale);
        }
    }
    Ok(rep)
}
