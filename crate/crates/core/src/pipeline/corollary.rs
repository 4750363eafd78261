//! Convex combinations of exit distributions from sets U_n with a common
//! starting measure ν inside U_1 ∩ … ∩ U_k, realised by sweeping onto balls
//! near W \ (U_1 ∩ … ∩ U_k), W = U_1 ∪ … ∪ U_k.
//!
//! For each m the theorem pipeline runs with U′_n = W ∩ {dist(·, U_n^c) < 1/m},
//! i.e. W minus the closed ball B(c_n, R_n - 1/m), and lattice balls are
//! kept only when they provably lie within 1/m of W \ ∩U_n.

use super::theorem::{run_theorem_pipeline, PipelineOverrides, TheoremInput};
use super::{distance, integrals, ExperimentReport};
use crate::engine::{McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{Ball, BallUnion, DomainSpec, OpenSet};
use crate::kernels::KernelSpec;
use crate::measure::WeightedMeasure;
use crate::rng::derive_seed;

pub struct CorollaryInput<'a> {
    pub nu: &'a WeightedMeasure,
    /// Each U_n is a single open ball.
    pub sets: &'a [Ball],
    pub lambda: &'a [f64],
    pub eta: f64,
    pub ladder: &'a [u32],
    pub domain: &'a DomainSpec,
    pub kernel: &'a KernelSpec,
    pub mc: &'a McParams,
    pub overrides: &'a PipelineOverrides,
}

/// Whether `b` lies in W and within 1/m of W \ (U_1 ∩ … ∩ U_k).
///
/// A point y of U_n has distance R_n - |y - c_n| to the sphere of U_n; the
/// nearest sphere point p counts only if it lies in W, where it belongs to
/// W \ U_n.
pub fn near_difference(b: &Ball, sets: &[Ball], w: &OpenSet, m: u32) -> bool {
    let h = 1.0 / m as f64;
    if w.dist_to_complement(&b.center) < b.radius {
        return false;
    }
    sets.iter().any(|u| {
        let t = b.center.dist(&u.center);
        if t >= u.radius {
            return b.radius < h;
        }
        if t == 0.0 {
            return false;
        }
        let p = u.center + (b.center - u.center) * (u.radius / t);
        w.contains(&p) && (u.radius - t) + b.radius < h
    })
}

pub fn run_corollary_1_4(input: &CorollaryInput<'_>) -> Result<ExperimentReport> {
    let CorollaryInput {
        nu,
        sets,
        lambda,
        eta,
        ladder,
        domain,
        kernel: k,
        mc,
        overrides,
    } = *input;
    if ladder.is_empty() || ladder.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::parameter("ladder must be strictly increasing and non-empty"));
    }
    for (i, a) in nu.atoms().iter().enumerate() {
        if !sets.iter().all(|u| u.contains_open(&a.point)) {
            return Err(Error::precondition(format!(
                "atom {i} of ν is not in U_1 ∩ … ∩ U_k; reduced measures would be needed"
            )));
        }
    }
    let w = OpenSet::balls(sets.to_vec());
    let mut rep = ExperimentReport::new("corollary");
    rep.param("kernel", k);
    rep.param("lambda", lambda);
    rep.param("eta", eta);
    rep.param("ladder", ladder);
    rep.param("samples", mc.samples);
    rep.param("seed", mc.seed);

    // Σ λ_n ν^{U_n^c}: exits from each U_n
    let mut target = WeightedMeasure::zero();
    let mut exits = Vec::new();
    for (i, u) in sets.iter().enumerate() {
        let stop = StopSet::new(BallUnion::empty(), Some(OpenSet::ball(u.center, u.radius)), *domain)?;
        let emc = mc.with_seed(derive_seed(mc.seed, 0xe0 + i as u64));
        exits.push(crate::engine::balayage_measure(nu, &stop, k, &emc)?);
        target = target.plus(&exits[i].scaled(lambda[i]));
    }
    let all_equal = sets.iter().all(|u| u.center.dist(&sets[0].center) == 0.0 && u.radius == sets[0].radius);

    let mut last: Option<f64> = None;
    let mut decreasing = true;
    for &m in ladder {
        let (final_measure, dict) = if all_equal {
            // W \ ∩U_n is empty, so C_m is empty and the sweep is onto W^c
            let stop = StopSet::new(BallUnion::empty(), Some(w.clone()), *domain)?;
            let fm = crate::engine::balayage_measure(nu, &stop, k, &mc.with_seed(derive_seed(mc.seed, 0xc0)))?;
            let dict = crate::potential::standard_dictionary(
                k,
                domain,
                &sets[0].center,
                &sets.iter().map(|b| b.center).collect::<Vec<_>>(),
                &[],
                0.25 * sets[0].radius,
            )?;
            rep.param(&format!("c_balls_m{m}"), 0);
            (fm, dict)
        } else {
            let shifted: Vec<OpenSet> = sets
                .iter()
                .map(|u| OpenSet::Minus {
                    outer: Box::new(w.clone()),
                    removed: if u.radius > 1.0 / m as f64 {
                        vec![Ball { center: u.center, radius: u.radius - 1.0 / m as f64 }]
                    } else {
                        Vec::new()
                    },
                })
                .collect();
            let filter = |b: &Ball| near_difference(b, sets, &w, m);
            let out = run_theorem_pipeline(&TheoremInput {
                nu,
                w: &w,
                sets: &shifted,
                lambda,
                eta,
                domain,
                kernel: k,
                mc,
                overrides,
                ball_filter: Some(&filter),
            })?;
            let contained = out.c.balls().iter().all(|b| near_difference(b, sets, &w, m));
            rep.check(format!("containment:m{m}"), contained, out.c.len() as f64, 0.0, 0.0);
            rep.param(&format!("c_balls_m{m}"), out.c.len());
            for c in out.report.checks {
                rep.checks.push(super::Check {
                    name: format!("m{m}/{}", c.name),
                    ..c
                });
            }
            for wmsg in out.report.warnings {
                rep.warn(format!("m{m}: {wmsg}"));
            }
            (out.final_measure, out.dictionary)
        };
        let source = integrals(nu, &dict, k)?;
        let ints = rep.record("final", Some(m), &final_measure, &dict, k, mc.samples)?;
        rep.monotone_gate(&format!("final-m{m}"), &source, &ints, &dict);
        rep.record("target", Some(m), &target, &dict, k, mc.samples)?;
        let wd = distance(&final_measure, &target, &dict, k)?;
        rep.record_distance("final-vs-target", Some(m), &wd, mc.samples);
        if all_equal {
            rep.check(format!("empty-neighbourhood-agreement:m{m}"), wd.within(3.0, 0.0), wd.distance, 0.0, wd.stderr);
        }
        if let Some(prev) = last {
            decreasing &= wd.distance < prev;
        }
        last = Some(wd.distance);
    }
    rep.param("distances_decrease", decreasing);
    // with U₁ = … = U_k every level is the same sweep up to noise
    if ladder.len() > 1 && !all_equal {
        rep.check("distances-decrease", decreasing, last.unwrap_or(f64::NAN), 0.0, 0.0);
    }
    Ok(rep)
}
