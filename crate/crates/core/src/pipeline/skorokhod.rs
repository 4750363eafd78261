//! Hitting distributions from simulated paths versus the exit-chain
//! balayage ν^C.
//!
//! Classical paths: walk-on-spheres while the distance to C exceeds
//! `band`·√Δt, Euler steps of variance Δt per coordinate inside that band,
//! with the Brownian-bridge crossing probability exp(-2 d₁d₂/Δt) against
//! the nearest ball between steps. Riesz paths: exact exit jumps from balls
//! of `policy` times the admissible radius far from C, subordinated stable
//! increments of scale √Δt inside the band. Jump paths enter C by landing in
//! it, so the hit point is the landing point.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance, integrals, ExperimentReport};
use crate::engine::{balayage_measure, McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{Ball, BallUnion, DomainSpec};
use crate::index::BallIndex;
use crate::kernels::{sample_exit_classical, single_ball_hit_probability, uniform_direction, KernelSpec, RieszSampler};
use crate::measure::{Atom, Site, WalkStats, WeightedMeasure};
use crate::point::Point;
use crate::potential::Dictionary;
use crate::rng::{derive_seed, walk_rng, WalkRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathParams {
    /// √Δt as a fraction of the smallest radius of C.
    pub dt_scale: f64,
    /// Width of the Euler band in units of √Δt.
    pub band: f64,
    /// Riesz step balls use this fraction of the admissible radius.
    pub policy: f64,
    /// Path length limit (steps).
    pub max_steps: u32,
}

impl Default for PathParams {
    fn default() -> Self {
        PathParams {
            dt_scale: 0.02,
            band: 4.0,
            policy: 0.5,
            max_steps: 2_000_000,
        }
    }
}

pub struct SkorokhodInput<'a> {
    pub nu: &'a WeightedMeasure,
    pub c: &'a BallUnion,
    pub domain: &'a DomainSpec,
    pub kernel: &'a KernelSpec,
    pub dict: &'a Dictionary,
    pub mc: &'a McParams,
    pub path: &'a PathParams,
}

enum PathEnd {
    Hit(Point, u32),
    Lost(LossKind),
}

enum LossKind {
    Killed,
    Escaped,
    StepLimit,
}

struct Paths<'a> {
    balls: &'a [Ball],
    radii: Vec<f64>,
    index: BallIndex,
    domain: &'a DomainSpec,
    kernel: KernelSpec,
    riesz: Option<RieszSampler>,
    dt: f64,
    band: f64,
    policy: f64,
    eps: f64,
    max_steps: u32,
    transient: bool,
    center: Point,
    enclosing: f64,
    escape: f64,
}

impl Paths<'_> {
    fn run(&self, start: Point, rng: &mut WalkRng) -> (PathEnd, u32) {
        if let Some(i) = self.index.containing(&start, &self.radii) {
            return (PathEnd::Hit(start, i as u32), 0);
        }
        match &self.riesz {
            None => self.brownian(start, rng),
            Some(s) => self.stable(start, s, rng),
        }
    }

    /// Exact return to the enclosing sphere from far away, as in the engine.
    fn far_field(&self, x: &Point, rng: &mut WalkRng) -> Option<Option<Point>> {
        if !self.transient {
            return None;
        }
        let t = x.dist(&self.center);
        if t <= self.escape {
            return None;
        }
        if self.riesz.is_some() {
            return Some(None);
        }
        let p = (self.enclosing / t).powi(self.kernel.dim() as i32 - 2);
        if rng.random::<f64>() >= p {
            return Some(None);
        }
        let sphere = Ball { center: self.center, radius: self.enclosing };
        let image = self.center + (*x - self.center) * (self.enclosing * self.enclosing / (t * t));
        Some(Some(sample_exit_classical(&sphere, &image, rng)))
    }

    fn brownian(&self, start: Point, rng: &mut WalkRng) -> (PathEnd, u32) {
        let d = self.kernel.dim();
        let sd = self.dt.sqrt();
        let mut x = start;
        let mut steps = 0u32;
        loop {
            if steps >= self.max_steps {
                return (PathEnd::Lost(LossKind::StepLimit), steps);
            }
            if !self.domain.contains(&x) || self.domain.dist_to_boundary(&x) < self.eps {
                return (PathEnd::Lost(LossKind::Killed), steps);
            }
            match self.far_field(&x, rng) {
                Some(Some(y)) => {
                    x = y;
                    steps += 1;
                    continue;
                }
                Some(None) => return (PathEnd::Lost(LossKind::Escaped), steps),
                None => {}
            }
            let nb = self.index.nearest(&x, &self.radii);
            let (i, di) = nb.nearest.unwrap_or((usize::MAX, f64::INFINITY));
            let dc = di.min(nb.lower_bound);
            if dc > self.band * sd {
                let r = dc.min(self.domain.dist_to_boundary(&x));
                x = x + uniform_direction(d, rng) * r;
                steps += 1;
                continue;
            }
            let mut y = x;
            for a in 0..d {
                let g: f64 = rng.sample(StandardNormal);
                y[a] += sd * g;
            }
            steps += 1;
            if let Some(j) = self.index.containing(&y, &self.radii) {
                return (PathEnd::Hit(self.balls[j].project_to_sphere(&y), j as u32), steps);
            }
            if i != usize::MAX {
                let d2 = self.balls[i].dist_to(&y);
                if rng.random::<f64>() < (-2.0 * di * d2 / self.dt).exp() {
                    let mid = (x + y) * 0.5;
                    return (PathEnd::Hit(self.balls[i].project_to_sphere(&mid), i as u32), steps);
                }
            }
            x = y;
        }
    }

    fn stable(&self, start: Point, sampler: &RieszSampler, rng: &mut WalkRng) -> (PathEnd, u32) {
        let d = self.kernel.dim();
        let beta = self.kernel.alpha() / 2.0;
        // Δt^{1/α}: the spatial scale of one increment
        let scale = self.dt.sqrt();
        let mut x = start;
        let mut steps = 0u32;
        loop {
            if steps >= self.max_steps {
                return (PathEnd::Lost(LossKind::StepLimit), steps);
            }
            if !self.domain.contains(&x) {
                return (PathEnd::Lost(LossKind::Killed), steps);
            }
            if let Some(j) = self.index.containing(&x, &self.radii) {
                return (PathEnd::Hit(x, j as u32), steps);
            }
            if self.far_field(&x, rng).is_some() {
                return (PathEnd::Lost(LossKind::Escaped), steps);
            }
            let nb = self.index.nearest(&x, &self.radii);
            let dc = nb.nearest.map_or(f64::INFINITY, |n| n.1).min(nb.lower_bound);
            steps += 1;
            if dc > self.band * scale {
                let r = self.policy * dc.min(self.domain.dist_to_boundary(&x));
                if !(r.is_finite() && r > 0.0) {
                    return (PathEnd::Lost(LossKind::Escaped), steps);
                }
                x = sampler.sample_centered(&Ball { center: x, radius: r }, rng);
                continue;
            }
            // isotropic α-stable increment √(2S)·G with S a positive
            // (α/2)-stable variable, E e^{-λS} = e^{-λ^{α/2}}
            let s = positive_stable(beta, rng);
            let f = scale * (2.0 * s).sqrt();
            for a in 0..d {
                let g: f64 = rng.sample(StandardNormal);
                x[a] += f * g;
            }
        }
    }
}

/// Kanter's representation of the one-sided stable law of index β ∈ (0, 1):
/// S = sin(βU) sin(U)^{-1/β} (sin((1-β)U)/E)^{(1-β)/β}, U uniform on (0, π),
/// E standard exponential, so that E e^{-λS} = e^{-λ^β}.
fn positive_stable(beta: f64, rng: &mut WalkRng) -> f64 {
    use std::f64::consts::PI;
    loop {
        let u = PI * rng.random::<f64>();
        let e = -(1.0 - rng.random::<f64>()).ln();
        let su = u.sin();
        if su <= 0.0 || e <= 0.0 {
            continue;
        }
        let a = (beta * u).sin() / su.powf(1.0 / beta) * (((1.0 - beta) * u).sin() / e).powf((1.0 - beta) / beta);
        if a.is_finite() && a > 0.0 {
            return a;
        }
    }
}

/// Path-simulation estimate of ν^C.
pub fn path_hitting_measure(
    nu: &WeightedMeasure,
    c: &BallUnion,
    domain: &DomainSpec,
    k: &KernelSpec,
    mc: &McParams,
    path: &PathParams,
) -> Result<WeightedMeasure> {
    if c.is_empty() {
        return Err(Error::parameter("C must contain a ball"));
    }
    if !(path.dt_scale > 0.0 && path.band > 0.0 && path.policy > 0.0 && path.policy <= 1.0) {
        return Err(Error::parameter("path parameters must be positive, policy in (0, 1]"));
    }
    let radii = c.radii();
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    if !(r_min > 0.0) {
        return Err(Error::parameter("C must consist of non-degenerate balls"));
    }
    let enc = c.enclosing_ball().expect("non-empty");
    let transient = !domain.is_bounded();
    let mut escape = mc.escape_radius.max(10.0 * enc.radius);
    if transient && !k.is_classical() {
        for _ in 0..3 {
            if single_ball_hit_probability(k, enc.radius, escape) < 1e-3 {
                break;
            }
            escape *= 2.0;
        }
    }
    let paths = Paths {
        balls: c.balls(),
        index: BallIndex::new(c.centers(), &radii),
        radii,
        domain,
        kernel: *k,
        riesz: if k.is_classical() { None } else { Some(RieszSampler::new(k)?) },
        dt: (path.dt_scale * r_min).powi(2),
        band: path.band,
        policy: path.policy,
        eps: mc.eps_shell,
        max_steps: path.max_steps,
        transient,
        center: enc.center,
        enclosing: enc.radius,
        escape,
    };
    let total = nu.total_mass();
    let mut tasks = Vec::new();
    let mut blocks = Vec::new();
    for a in nu.atoms() {
        if a.weight == 0.0 {
            continue;
        }
        let n = ((mc.samples as f64 * a.weight / total).ceil() as u64).max(1);
        let block = blocks.len() as u32;
        blocks.push(n);
        tasks.extend((0..n).map(|j| (a.point, a.weight / n as f64, block, j as u32)));
    }
    let seed = mc.seed;
    let ends: Vec<(PathEnd, u32)> = tasks
        .par_iter()
        .enumerate()
        .map(|(s, t)| paths.run(t.0, &mut walk_rng(seed, s as u64)))
        .collect();
    let mut atoms = Vec::new();
    let mut lost = 0.0;
    let mut stats = WalkStats { walks: tasks.len() as u64, ..WalkStats::default() };
    for (t, (end, steps)) in tasks.iter().zip(ends) {
        stats.total_steps += steps as u64;
        match end {
            PathEnd::Hit(point, i) => {
                stats.absorbed += 1;
                atoms.push(Atom { point, weight: t.1, site: Site::Ball(i), steps, block: t.2, walk: t.3 });
            }
            PathEnd::Lost(kind) => {
                lost += t.1;
                match kind {
                    LossKind::Killed => stats.killed += 1,
                    LossKind::Escaped => stats.escaped += 1,
                    LossKind::StepLimit => stats.step_limited += 1,
                }
            }
        }
    }
    let mut m = WeightedMeasure::from_parts(atoms, blocks, lost, total);
    m.stats = stats;
    Ok(m)
}

pub fn skorokhod_demo(input: &SkorokhodInput<'_>) -> Result<ExperimentReport> {
    let SkorokhodInput { nu, c, domain, kernel: k, dict, mc, path } = *input;
    if !nu.is_deterministic() || (nu.total_mass() - 1.0).abs() > 1e-9 {
        return Err(Error::parameter("ν must be a deterministic probability measure"));
    }
    for (i, b) in c.balls().iter().enumerate() {
        if !domain.contains(&b.center) || domain.dist_to_boundary(&b.center) <= b.radius {
            return Err(Error::precondition(format!("ball {i} of C is not inside X")));
        }
    }
    let mut rep = ExperimentReport::new("skorokhod");
    rep.param("kernel", k);
    rep.param("balls", c.balls());
    rep.param("path", path);
    rep.param("samples", mc.samples);
    rep.param("seed", mc.seed);

    let source = integrals(nu, dict, k)?;
    rep.record("initial", None, nu, dict, k, 0)?;
    let stop = StopSet::balls_only(c.clone(), *domain)?;
    let chain = balayage_measure(nu, &stop, k, mc)?;
    let chain_ints = rep.record("chain", None, &chain, dict, k, mc.samples)?;
    rep.monotone_gate("chain", &source, &chain_ints, dict);
    let pmc = mc.with_seed(derive_seed(mc.seed, 0x9a7));
    let paths = path_hitting_measure(nu, c, domain, k, &pmc, path)?;
    let path_ints = rep.record("paths", None, &paths, dict, k, mc.samples)?;
    rep.monotone_gate("paths", &source, &path_ints, dict);

    let hit_rate = paths.stats.absorbed as f64 / paths.stats.walks.max(1) as f64;
    rep.param("path_hit_rate", hit_rate);
    rep.param("path_stats", &paths.stats);
    rep.param("chain_stats", &chain.stats);
    if hit_rate < 0.5 {
        rep.warn(format!(
            "path hit rate {hit_rate:.3}: {} killed, {} escaped, {} over the step limit; lost mass {:.4}",
            paths.stats.killed, paths.stats.escaped, paths.stats.step_limited, paths.lost_mass
        ));
    }
    let (pm, cm) = (paths.mass(), chain.mass());
    let dm = pm.minus(&cm);
    rep.check("mass-agreement", dm.value.abs() <= 3.0 * dm.stderr, dm.value.abs(), 0.0, dm.stderr);
    let wd = distance(&paths, &chain, dict, k)?;
    rep.record_distance("paths-vs-chain", None, &wd, mc.samples);
    for r in &wd.rows {
        rep.check(format!("consistency:{}", r.function), r.difference.abs() <= 3.0 * r.stderr, r.difference.abs(), 0.0, r.stderr);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Estimate;

    #[test]
    fn positive_stable_laplace_transform() {
        // E e^{-S} = e^{-1} for every index
        let n = 200_000;
        for (i, beta) in [0.25, 0.5, 0.75].into_iter().enumerate() {
            let mut rng = walk_rng(11, i as u64);
            let xs: Vec<f64> = (0..n).map(|_| (-positive_stable(beta, &mut rng)).exp()).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - (-1.0f64).exp()).abs() < 4.0 * se, "β = {beta}: {mean} ± {se}");
        }
    }

    fn hit_mass(k: &KernelSpec, dist: f64, samples: usize) -> Estimate {
        let d = k.dim();
        let c = BallUnion::new(vec![Ball { center: Point::zero(d), radius: 1.0 }]).unwrap();
        let mut x = Point::zero(d);
        x[0] = dist;
        let mc = McParams::default().with_samples(samples).with_seed(5);
        let m = path_hitting_measure(&WeightedMeasure::dirac(x), &c, &DomainSpec::full_space(d), k, &mc, &PathParams::default())
            .unwrap();
        assert!(m.atoms().iter().all(|a| a.point.norm() <= 1.0 + 1e-9));
        m.mass()
    }

    #[test]
    fn brownian_paths_hit_with_probability_r_over_distance() {
        let k = KernelSpec::classical(3).unwrap();
        let m = hit_mass(&k, 2.0, 20_000);
        assert!((m.value - 0.5).abs() < 3.0 * m.stderr + 2e-3, "{m:?}");
    }

    #[test]
    fn stable_paths_match_the_exterior_hit_probability() {
        let k = KernelSpec::new(3, 1.0).unwrap();
        let m = hit_mass(&k, 1.5, 20_000);
        let exact = single_ball_hit_probability(&k, 1.0, 1.5);
        assert!((m.value - exact).abs() < 3.0 * m.stderr + 2e-3, "{m:?} vs {exact}");
    }
}
