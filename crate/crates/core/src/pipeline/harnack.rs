//! Audit of the Harnack ratio bound for ball exit densities and of its
//! consequence for swept measures.
//!
//! For each δ the starts y, ỹ are uniform in B(c, ηr) with η = δ/(3d) and the
//! exit points z are drawn from the exit law of one of them or placed close
//! to the sphere, where the ratio is most sensitive.

use rand::Rng;
use rayon::prelude::*;

use super::{distance, integrals, ExperimentReport};
use crate::engine::{balayage_measure, McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{Ball, BallUnion, DomainSpec, OpenSet};
use crate::kernels::{
    classical_poisson_density, harnack_bound, riesz_poisson_density, sample_exit_classical, uniform_direction,
    KernelSpec, RieszSampler,
};
use crate::measure::WeightedMeasure;
use crate::point::Point;
use crate::potential::{standard_dictionary, Dictionary};
use crate::rng::{derive_seed, walk_rng, WalkRng};

pub struct HarnackInput<'a> {
    pub kernel: &'a KernelSpec,
    pub deltas: &'a [f64],
    /// Sampled (y, ỹ, z) triples per δ.
    pub triples: usize,
    /// Domain for the swept-level checks; `None` skips them.
    pub domain: Option<&'a DomainSpec>,
    pub mc: &'a McParams,
}

#[derive(Debug, Clone, Copy)]
pub struct RatioScan {
    pub max_ratio: f64,
    pub violations: usize,
}

fn uniform_in_ball(b: &Ball, rng: &mut WalkRng) -> Point {
    let d = b.dim();
    let r = b.radius * rng.random::<f64>().powf(1.0 / d as f64);
    b.center + uniform_direction(d, rng) * r
}

/// Largest density ratio ρ_y(z)/ρ_ỹ(z) over `n` triples for the unit ball,
/// with y, ỹ uniform in B(0, η).
pub fn ratio_scan(k: &KernelSpec, eta: f64, n: usize, seed: u64) -> Result<RatioScan> {
    let d = k.dim();
    let unit = Ball { center: Point::zero(d), radius: 1.0 };
    let inner = Ball { center: unit.center, radius: eta };
    let bound = harnack_bound(eta, k);
    let sampler = if k.is_classical() { None } else { Some(RieszSampler::new(k)?) };
    let ratios: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = walk_rng(seed, i as u64);
            let y = uniform_in_ball(&inner, &mut rng);
            let yt = uniform_in_ball(&inner, &mut rng);
            let from = if rng.random::<bool>() { y } else { yt };
            match &sampler {
                None => {
                    let z = if i % 2 == 0 {
                        sample_exit_classical(&unit, &from, &mut rng)
                    } else {
                        uniform_direction(d, &mut rng)
                    };
                    Ok(classical_poisson_density(&unit, &y, &z)? / classical_poisson_density(&unit, &yt, &z)?)
                }
                Some(s) => {
                    let z = if i % 2 == 0 {
                        s.sample(&unit, &from, &mut rng)
                    } else {
                        // |z| = 1 + t with t log-uniform in [1e-9, 1]
                        let t = 10f64.powf(-9.0 * rng.random::<f64>());
                        uniform_direction(d, &mut rng) * (1.0 + t)
                    };
                    Ok(riesz_poisson_density(&unit, &y, &z, k)? / riesz_poisson_density(&unit, &yt, &z, k)?)
                }
            }
        })
        .collect();
    let mut out = RatioScan { max_ratio: 0.0, violations: 0 };
    for r in ratios {
        let r = r?;
        out.max_ratio = out.max_ratio.max(r);
        if !(r <= bound) {
            out.violations += 1;
        }
    }
    Ok(out)
}

/// Dictionary concentrated around the remote ball A.
fn remote_dictionary(k: &KernelSpec, domain: &DomainSpec, a: &Ball) -> Result<Dictionary> {
    let d = k.dim();
    let mut poles = vec![a.center];
    for axis in 0..d.min(3) {
        let mut z = a.center;
        z[axis] += 1.5 * a.radius;
        poles.push(z);
        let mut z = a.center;
        z[axis] -= 1.5 * a.radius;
        poles.push(z);
    }
    let mut near = a.center;
    near[0] -= a.radius;
    standard_dictionary(k, domain, &a.center, &poles, &[(near, 0.6 * a.radius)], 0.25 * a.radius)
}

pub fn harnack_audit(input: &HarnackInput<'_>) -> Result<ExperimentReport> {
    let HarnackInput { kernel: k, deltas, triples, domain, mc } = *input;
    if deltas.is_empty() || triples == 0 {
        return Err(Error::parameter("need at least one δ and one triple"));
    }
    let d = k.dim() as f64;
    let mut rep = ExperimentReport::new("harnack");
    rep.param("kernel", k);
    rep.param("deltas", deltas);
    rep.param("triples", triples);
    rep.param("seed", mc.seed);
    for (i, &delta) in deltas.iter().enumerate() {
        let eta = delta / (3.0 * d);
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::parameter(format!("δ = {delta} gives η = {eta} outside (0, 1)")));
        }
        let bound = harnack_bound(eta, k);
        let s = ratio_scan(k, eta, triples, derive_seed(mc.seed, 0x4a0 + i as u64))?;
        rep.param(&format!("violations:delta={delta}"), s.violations);
        rep.param(&format!("eta:delta={delta}"), eta);
        rep.check(format!("ratio-bound:delta={delta}"), s.violations == 0, s.max_ratio, bound, 0.0);
        rep.check(format!("ratio-one-plus-delta:delta={delta}"), s.max_ratio <= 1.0 + delta, s.max_ratio, 1.0 + delta, 0.0);
    }
    if let Some(domain) = domain {
        swept_checks(&mut rep, k, deltas, domain, mc)?;
    }
    Ok(rep)
}

/// ε_ỹ^A <= (1+δ) ε_y^A on dictionary potentials, with U the unit ball, A a
/// ball outside it, y = -ηe₁ and ỹ = ηe₁ (the start closer to A); plus the
/// two-stage identity ε_y^A = (ε_y^{U^c})^A.
fn swept_checks(rep: &mut ExperimentReport, k: &KernelSpec, deltas: &[f64], domain: &DomainSpec, mc: &McParams) -> Result<()> {
    let dim = k.dim();
    let mut ac = Point::zero(dim);
    ac[0] = 4.0;
    let a = Ball { center: ac, radius: 1.0 };
    let u = Ball { center: Point::zero(dim), radius: 1.0 };
    if !domain.contains(&a.center) || domain.dist_to_boundary(&a.center) <= a.radius || domain.dist_to_boundary(&u.center) <= u.radius {
        return Err(Error::precondition("the domain must contain B(0,1) and B(4e₁,1)"));
    }
    let dict = remote_dictionary(k, domain, &a)?;
    let stop_a = StopSet::balls_only(BallUnion::new(vec![a])?, *domain)?;
    for &delta in deltas {
        let eta = delta / (3.0 * dim as f64);
        let mut y = Point::zero(dim);
        y[0] = -eta;
        let mut yt = Point::zero(dim);
        yt[0] = eta;
        let near = balayage_measure(&WeightedMeasure::dirac(yt), &stop_a, k, mc)?;
        let far = balayage_measure(&WeightedMeasure::dirac(y), &stop_a, k, mc)?;
        let tag = format!("delta={delta}");
        let ni = rep.record(&format!("near:{tag}"), None, &near, &dict, k, mc.samples)?;
        let fi = rep.record(&format!("far:{tag}"), None, &far, &dict, k, mc.samples)?;
        for ((q, n), f) in dict.members.iter().zip(&ni).zip(&fi) {
            let se = n.stderr.hypot((1.0 + delta) * f.stderr);
            rep.check_le(format!("swept-harnack:{tag}:{}", q.name), n.value, (1.0 + delta) * f.value, se);
        }
    }

    let start = Point::zero(dim);
    let direct = balayage_measure(&WeightedMeasure::dirac(start), &stop_a, k, mc)?;
    let exit_u = StopSet::new(BallUnion::empty(), Some(OpenSet::ball(u.center, u.radius)), *domain)?;
    let first = balayage_measure(&WeightedMeasure::dirac(start), &exit_u, k, &mc.with_seed(derive_seed(mc.seed, 0x4b0)))?;
    let two = balayage_measure(&first, &stop_a, k, &mc.with_seed(derive_seed(mc.seed, 0x4b1)))?;
    rep.record("direct", None, &direct, &dict, k, mc.samples)?;
    rep.record("two-stage", None, &two, &dict, k, mc.samples)?;
    let source = integrals(&WeightedMeasure::dirac(start), &dict, k)?;
    let ti = integrals(&two, &dict, k)?;
    rep.monotone_gate("two-stage", &source, &ti, &dict);
    let wd = distance(&direct, &two, &dict, k)?;
    rep.record_distance("direct-vs-two-stage", None, &wd, mc.samples);
    rep.check("two-stage-identity", wd.within(3.0, 0.0), wd.distance, 0.0, wd.stderr);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_near_one_for_tiny_eta() {
        for k in [KernelSpec::classical(3).unwrap(), KernelSpec::new(3, 1.0).unwrap()] {
            let s = ratio_scan(&k, 1e-4, 2000, 7).unwrap();
            assert_eq!(s.violations, 0);
            assert!(s.max_ratio < 1.0 + 1e-2, "{}", s.max_ratio);
        }
    }

    #[test]
    fn scan_stays_below_bound() {
        let k = KernelSpec::new(2, 1.0).unwrap();
        let s = ratio_scan(&k, 0.05, 5000, 3).unwrap();
        assert_eq!(s.violations, 0);
        assert!(s.max_ratio > 1.0);
    }
}
