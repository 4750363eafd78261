//! Balayage by exit-chain Monte Carlo.
//!
//! Classical case: walk-on-spheres. Each step jumps to a uniform point of the
//! largest sphere around the current point that avoids the stop set and the
//! complement of X; the walk is absorbed once it is within the shell width
//! of a stop ball or of W^c, and killed near ∂X. In the whole space a walk
//! far from the stop balls re-enters their enclosing sphere with the exact
//! probability (ρ/|x-c|)^{d-2}, at a point drawn from the interior exit law
//! of the Kelvin image, and is lost otherwise.
//!
//! Riesz case: each step samples the exact exit law of the largest ball
//! centred at the current point avoiding the stop set; landing in a stop
//! ball or outside W is an exact absorption, landing outside X kills.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ball, BallUnion, DomainSpec, OpenSet};
use crate::index::BallIndex;
use crate::kernels::{sample_exit_classical, single_ball_hit_probability, uniform_direction, KernelSpec, RieszSampler};
use crate::measure::{Atom, Estimate, Site, WalkStats, WeightedMeasure};
use crate::point::Point;
use crate::rng::{walk_rng, WalkRng};
use rand::Rng;

/// Truncation level for the Riesz escape bound.
const ESCAPE_TOLERANCE: f64 = 1e-3;
const ESCAPE_DOUBLINGS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McParams {
    pub samples: usize,
    pub eps_shell: f64,
    /// Lower bound for the escape radius; raised to 10× the circumradius of
    /// the stop balls.
    pub escape_radius: f64,
    pub max_steps: u32,
    pub seed: u64,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            samples: 100_000,
            eps_shell: 1e-4,
            escape_radius: 0.0,
            max_steps: 100_000,
            seed: 1,
        }
    }
}

impl McParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::parameter("samples must be positive"));
        }
        if !(self.eps_shell > 0.0) {
            return Err(Error::parameter("epsShell must be positive"));
        }
        if !(self.escape_radius >= 0.0) || self.max_steps == 0 {
            return Err(Error::parameter("escape radius must be >= 0 and maxSteps positive"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

/// A ∪ W^c inside the domain X. Ball radii can be changed without
/// rebuilding the spatial index as long as they stay below the outer radii.
#[derive(Debug, Clone)]
pub struct StopSet {
    outer_balls: BallUnion,
    radii: Vec<f64>,
    index: Arc<BallIndex>,
    outer: Option<OpenSet>,
    domain: DomainSpec,
}

impl StopSet {
    pub fn new(balls: BallUnion, outer: Option<OpenSet>, domain: DomainSpec) -> Result<Self> {
        if let Some(d) = balls.dim() {
            if d != domain.dim {
                return Err(Error::parameter("stop balls and domain differ in dimension"));
            }
        }
        let index = Arc::new(balls.index());
        Ok(StopSet {
            radii: balls.radii(),
            outer_balls: balls,
            index,
            outer,
            domain,
        })
    }

    pub fn balls_only(balls: BallUnion, domain: DomainSpec) -> Result<Self> {
        StopSet::new(balls, None, domain)
    }

    /// The same stop set with ball i shrunk by `factors[i]` relative to the
    /// outer radii.
    pub fn with_factors(&self, factors: &[f64]) -> Result<StopSet> {
        if factors.len() != self.radii.len() {
            return Err(Error::parameter("one factor per ball required"));
        }
        if factors.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::parameter("shrink factors must lie in [0, 1]"));
        }
        let mut s = self.clone();
        s.radii = self.outer_balls.balls().iter().zip(factors).map(|(b, f)| b.radius * f).collect();
        Ok(s)
    }

    /// Stop set made of the listed balls (outer radii) with the same W and X.
    pub fn subset(&self, indices: &[usize]) -> Result<StopSet> {
        let balls = indices
            .iter()
            .map(|&i| {
                self.outer_balls
                    .balls()
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::parameter(format!("ball index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        StopSet::new(BallUnion::new_unchecked(balls), self.outer.clone(), self.domain)
    }

    /// The balls at their outer (unshrunk) radii.
    pub fn outer_balls(&self) -> &BallUnion {
        &self.outer_balls
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn outer(&self) -> Option<&OpenSet> {
        self.outer.as_ref()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn ball(&self, i: usize) -> Ball {
        Ball {
            center: self.outer_balls.balls()[i].center,
            radius: self.radii[i],
        }
    }

    /// The balls at their current radii.
    pub fn current_balls(&self) -> BallUnion {
        BallUnion::new_unchecked((0..self.len()).map(|i| self.ball(i)).collect())
    }

    /// Site of `x` if it already lies in the stop set.
    pub fn locate(&self, x: &Point) -> Option<Site> {
        if let Some(i) = self.index.containing(x, &self.radii) {
            return Some(Site::Ball(i as u32));
        }
        match &self.outer {
            Some(w) if !w.contains(x) => Some(Site::Complement),
            _ => None,
        }
    }

    fn unbounded(&self) -> bool {
        !self.domain.is_bounded()
            && self
                .outer
                .as_ref()
                .is_none_or(|w| w.bounding_box().is_none())
    }
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Hit(Point, Site),
    Killed,
    Escaped,
    StepLimit,
}

struct Walker<'a> {
    stop: &'a StopSet,
    kernel: KernelSpec,
    riesz: Option<RieszSampler>,
    eps: f64,
    ball_eps: Vec<f64>,
    transient: bool,
    center: Point,
    enclosing: f64,
    escape: f64,
    max_steps: u32,
}

impl<'a> Walker<'a> {
    fn new(stop: &'a StopSet, k: &KernelSpec, mc: &McParams) -> Result<(Self, Vec<String>)> {
        mc.validate()?;
        stop.domain.validate(k)?;
        let riesz = if k.is_classical() { None } else { Some(RieszSampler::new(k)?) };
        let current = stop.current_balls();
        let (center, enclosing) = match current.enclosing_ball() {
            Some(b) => (b.center, b.radius),
            None => (Point::zero(k.dim()), 0.0),
        };
        let mut escape = mc.escape_radius.max(10.0 * enclosing).max(f64::MIN_POSITIVE);
        let mut warnings = Vec::new();
        let transient = stop.unbounded();
        if transient && !k.is_classical() && enclosing > 0.0 {
            let mut bound = single_ball_hit_probability(k, enclosing, escape);
            let mut doublings = 0;
            while bound >= ESCAPE_TOLERANCE && doublings < ESCAPE_DOUBLINGS {
                escape *= 2.0;
                doublings += 1;
                bound = single_ball_hit_probability(k, enclosing, escape);
            }
            if bound >= ESCAPE_TOLERANCE {
                warnings.push(format!(
                    "escape truncation: return probability from radius {escape:.3} is {bound:.2e}"
                ));
            }
        }
        let ball_eps = stop.radii.iter().map(|r| mc.eps_shell.min(r / 50.0)).collect();
        Ok((
            Walker {
                stop,
                kernel: *k,
                riesz,
                eps: mc.eps_shell,
                ball_eps,
                transient,
                center,
                enclosing,
                escape,
                max_steps: mc.max_steps,
            },
            warnings,
        ))
    }

    fn walk(&self, start: Point, rng: &mut WalkRng) -> (Outcome, u32) {
        match &self.riesz {
            None => self.walk_classical(start, rng),
            Some(s) => self.walk_riesz(start, s, rng),
        }
    }

    fn walk_classical(&self, start: Point, rng: &mut WalkRng) -> (Outcome, u32) {
        let stop = self.stop;
        let d = self.kernel.dim();
        let mut x = start;
        let mut steps = 0u32;
        loop {
            if steps >= self.max_steps {
                return (Outcome::StepLimit, steps);
            }
            if !stop.domain.contains(&x) {
                return (Outcome::Killed, steps);
            }
            let dx = stop.domain.dist_to_boundary(&x);
            if dx < self.eps {
                return (Outcome::Killed, steps);
            }
            let dw = match &stop.outer {
                Some(w) => {
                    if !w.contains(&x) {
                        return (Outcome::Hit(x, Site::Complement), steps);
                    }
                    let dw = w.dist_to_complement(&x);
                    if dw < self.eps {
                        return (Outcome::Hit(w.project_to_complement(&x), Site::Complement), steps);
                    }
                    dw
                }
                None => f64::INFINITY,
            };
            let nb = stop.index.nearest(&x, &stop.radii);
            let mut da = nb.lower_bound;
            if let Some((i, di)) = nb.nearest {
                let site = Site::Ball(i as u32);
                if di <= 0.0 {
                    return (Outcome::Hit(x, site), steps);
                }
                if di < self.ball_eps[i] {
                    return (Outcome::Hit(stop.ball(i).project_to_sphere(&x), site), steps);
                }
                da = da.min(di);
            }
            if self.transient {
                let t = x.dist(&self.center);
                if t > self.escape {
                    let p = if self.enclosing > 0.0 {
                        (self.enclosing / t).powi(d as i32 - 2)
                    } else {
                        0.0
                    };
                    if rng.random::<f64>() >= p {
                        return (Outcome::Escaped, steps);
                    }
                    let sphere = Ball {
                        center: self.center,
                        radius: self.enclosing,
                    };
                    let image = self.center + (x - self.center) * (self.enclosing * self.enclosing / (t * t));
                    x = sample_exit_classical(&sphere, &image, rng);
                    steps += 1;
                    continue;
                }
            }
            let r = dx.min(dw).min(da);
            if !r.is_finite() {
                return (Outcome::Escaped, steps);
            }
            x = x + uniform_direction(d, rng) * r;
            steps += 1;
        }
    }

    fn walk_riesz(&self, start: Point, sampler: &RieszSampler, rng: &mut WalkRng) -> (Outcome, u32) {
        let stop = self.stop;
        let mut x = start;
        let mut steps = 0u32;
        loop {
            if steps >= self.max_steps {
                return (Outcome::StepLimit, steps);
            }
            if !stop.domain.contains(&x) {
                return (Outcome::Killed, steps);
            }
            let dw = match &stop.outer {
                Some(w) => {
                    if !w.contains(&x) {
                        return (Outcome::Hit(x, Site::Complement), steps);
                    }
                    w.dist_to_complement(&x)
                }
                None => f64::INFINITY,
            };
            let nb = stop.index.nearest(&x, &stop.radii);
            let mut da = nb.lower_bound;
            if let Some((i, di)) = nb.nearest {
                if di <= 0.0 {
                    return (Outcome::Hit(x, Site::Ball(i as u32)), steps);
                }
                da = da.min(di);
            }
            if self.transient && x.dist(&self.center) > self.escape {
                return (Outcome::Escaped, steps);
            }
            let r = stop.domain.dist_to_boundary(&x).min(dw).min(da);
            if !(r.is_finite() && r > 0.0) {
                return (Outcome::Escaped, steps);
            }
            x = sampler.sample_centered(&Ball { center: x, radius: r }, rng);
            steps += 1;
        }
    }
}

struct Task {
    start: Point,
    weight: f64,
    block: u32,
    walk: u32,
}

/// ν^S as an atomic measure. Atoms already in S are kept; deterministic
/// atoms get walk budgets proportional to their weight (at least one walk),
/// each in a fresh block; atoms produced by earlier walks are continued with
/// one walk each and keep their block and walk numbers, so composite walks
/// stay i.i.d.
pub fn balayage_measure(
    nu: &WeightedMeasure,
    stop: &StopSet,
    k: &KernelSpec,
    mc: &McParams,
) -> Result<WeightedMeasure> {
    let (walker, mut warnings) = Walker::new(stop, k, mc)?;
    let mut blocks = nu.blocks().to_vec();
    let mut atoms = Vec::new();
    let mut tasks = Vec::new();
    let free_mass: f64 = nu
        .atoms()
        .iter()
        .filter(|a| nu.blocks()[a.block as usize] == 0 && stop.locate(&a.point).is_none())
        .map(|a| a.weight)
        .sum();
    for (i, a) in nu.atoms().iter().enumerate() {
        if !stop.domain.contains(&a.point) {
            return Err(Error::precondition(format!(
                "atom {i} at {:?} lies outside the domain X",
                a.point
            )));
        }
        if a.weight == 0.0 {
            continue;
        }
        if let Some(site) = stop.locate(&a.point) {
            atoms.push(Atom { site, ..*a });
            continue;
        }
        if blocks[a.block as usize] == 0 {
            let n = ((mc.samples as f64 * a.weight / free_mass).ceil() as u64).clamp(1, u32::MAX as u64);
            let block = blocks.len() as u32;
            blocks.push(n);
            let w = a.weight / n as f64;
            tasks.extend((0..n).map(|j| Task {
                start: a.point,
                weight: w,
                block,
                walk: j as u32,
            }));
        } else {
            tasks.push(Task {
                start: a.point,
                weight: a.weight,
                block: a.block,
                walk: a.walk,
            });
        }
    }
    let seed = mc.seed;
    let outcomes: Vec<(Outcome, u32)> = tasks
        .par_iter()
        .enumerate()
        .map(|(s, t)| walker.walk(t.start, &mut walk_rng(seed, s as u64)))
        .collect();
    let mut lost = nu.lost_mass;
    let mut stats = WalkStats {
        walks: tasks.len() as u64,
        ..WalkStats::default()
    };
    for (t, (o, steps)) in tasks.iter().zip(outcomes) {
        stats.total_steps += steps as u64;
        match o {
            Outcome::Hit(point, site) => {
                stats.absorbed += 1;
                atoms.push(Atom {
                    point,
                    weight: t.weight,
                    site,
                    steps,
                    block: t.block,
                    walk: t.walk,
                });
            }
            Outcome::Killed => {
                stats.killed += 1;
                lost += t.weight;
            }
            Outcome::Escaped => {
                stats.escaped += 1;
                lost += t.weight;
            }
            Outcome::StepLimit => {
                stats.step_limited += 1;
                lost += t.weight;
            }
        }
    }
    if stats.walks > 0 && stats.step_limited as f64 > 1e-3 * stats.walks as f64 {
        warnings.push(format!(
            "{} of {} walks hit the step limit {}",
            stats.step_limited, stats.walks, mc.max_steps
        ));
    }
    let mut out = WeightedMeasure::from_parts(atoms, blocks, lost, nu.total_input);
    out.stats = nu.stats.clone();
    out.stats.merge(&stats);
    out.warnings = nu.warnings.clone();
    out.warnings.extend(warnings);
    Ok(out)
}

/// ε_x^S.
pub fn balayage_point(x: &Point, stop: &StopSet, k: &KernelSpec, mc: &McParams) -> Result<WeightedMeasure> {
    balayage_measure(&WeightedMeasure::dirac(*x), stop, k, mc)
}

/// Per-ball masses of an already swept measure.
pub fn ball_masses(swept: &WeightedMeasure, balls: usize) -> Vec<Estimate> {
    swept.grouped_mass(balls, |a| match a.site {
        Site::Ball(b) => Some(b as usize),
        _ => None,
    })
}

/// ν^S(B_i) for every ball of S, with standard errors.
pub fn mass_vector(
    nu: &WeightedMeasure,
    stop: &StopSet,
    k: &KernelSpec,
    mc: &McParams,
) -> Result<Vec<Estimate>> {
    let swept = balayage_measure(nu, stop, k, mc)?;
    Ok(ball_masses(&swept, stop.len()))
}

/// R̂₁^A(x) = ε_x^A(1).
pub fn hit_probability(
    x: &Point,
    balls: &BallUnion,
    domain: &DomainSpec,
    k: &KernelSpec,
    mc: &McParams,
) -> Result<Estimate> {
    let stop = StopSet::balls_only(balls.clone(), *domain)?;
    Ok(balayage_point(x, &stop, k, mc)?.mass())
}

/// ∘ν^A = ν|_A + (ν|_{A^c})^A for a closed ball union A. Atoms in A are
/// kept verbatim by the sweep, so this is the sweep onto A.
pub fn reduced_measure_closed(
    nu: &WeightedMeasure,
    balls: &BallUnion,
    domain: &DomainSpec,
    k: &KernelSpec,
    mc: &McParams,
) -> Result<WeightedMeasure> {
    let stop = StopSet::balls_only(balls.clone(), *domain)?;
    balayage_measure(nu, &stop, k, mc)
}
