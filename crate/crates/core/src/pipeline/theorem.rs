//! Approximating Σ λ_n ν^{U_n ∪ W^c} by a single sweep ν^{C ∪ W^c}.
//!
//! Schedule:
//! 1. test potentials q <= p with p >= 1 on the closure of ∪U_n, and a
//!    modulus δ′ with |q(y) - q(z)| < δ for |y - z| < δ′ there;
//! 2. δ = η / (6ν(p) + 3k), N > k + ν(p)/δ, a = min(δ/(4dN), δ′/2),
//!    offsets x_j = (j/N) e₁;
//! 3. lattice resolution M doubled until every selected lattice union
//!    A_M(n, j_n) ∪ W^c sweeps ν within δ of ν^{U_n ∪ W^c};
//! 4. distinct offsets j_n with ν(1_{Z_M(x_j, a)} p) < δ;
//! 5. K_n = A_M(n, j_n), A = ∪K_n, ν̃ = ν off A; A is a δ-family in W;
//! 6. joint shrink of A relative to W gives C with
//!    ν̃^{C ∪ W^c}(B_i) = (1-δ) Σ λ_n ν̃^{K_n ∪ W^c}(B_i);
//! 7. ν^{C ∪ W^c} is compared with the target on the dictionary.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{distance, integrals, open_set_stop, ExperimentReport};
use crate::engine::{McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{grid_balls, validate_delta_family, Ball, BallUnion, DomainSpec, GridSpec, OpenSet};
use crate::kernels::{uniform_direction, KernelSpec};
use crate::measure::{Estimate, Site, WeightedMeasure};
use crate::point::Point;
use crate::potential::{kernel_kind, Dictionary, PotentialSpec};
use crate::rng::{derive_seed, walk_rng};
use crate::shrink::{self, shrink_solver, ShrinkMode, ShrinkOptions, ShrinkProblem};

/// Optional replacements for values the schedule would choose itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOverrides {
    /// Number of lattice offsets; must be >= k. Values at or below
    /// k + ν(p)/δ are accepted with a warning.
    pub n: Option<u32>,
    pub delta_prime: Option<f64>,
    pub m_start: Option<u32>,
    pub m_max: Option<u32>,
    /// Edge of the cubes pooling balls into shrink coordinates; 0 disables
    /// pooling.
    pub cell_size: Option<f64>,
    pub solver: Option<String>,
    /// Poles of the dictionary potentials (default: centres of the U balls).
    pub poles: Option<Vec<Point>>,
    /// Distance from the pole at which dictionary kernels are capped.
    pub cap_radius: Option<f64>,
    /// Point pairs used to estimate δ′.
    pub oscillation_pairs: Option<usize>,
    pub shrink: Option<ShrinkOptions>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineParams {
    pub eta: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub n: u32,
    /// Whether N > k + ν(p)/δ.
    pub n_bound_met: bool,
    pub a: f64,
    pub offsets: Vec<Point>,
    pub m: u32,
    /// 1-based offset index j_n per set.
    pub selected: Vec<u32>,
    pub nu_p: f64,
    pub k: usize,
    pub seed: u64,
}

pub struct TheoremInput<'a> {
    pub nu: &'a WeightedMeasure,
    pub w: &'a OpenSet,
    pub sets: &'a [OpenSet],
    pub lambda: &'a [f64],
    pub eta: f64,
    pub domain: &'a DomainSpec,
    pub kernel: &'a KernelSpec,
    pub mc: &'a McParams,
    pub overrides: &'a PipelineOverrides,
    /// Keep only lattice balls satisfying this predicate (used to confine
    /// C to a prescribed region).
    pub ball_filter: Option<&'a (dyn Fn(&Ball) -> bool + Sync)>,
}

pub struct TheoremOutput {
    pub report: ExperimentReport,
    pub c: BallUnion,
    pub params: PipelineParams,
    pub final_measure: WeightedMeasure,
    pub target: WeightedMeasure,
    pub dictionary: Dictionary,
}

const M_START: u32 = 4;
const M_MAX: u32 = 32;
const PAIRS: usize = 20_000;
/// Coordinates are pooled when A has more balls than this.
const POOL_ABOVE: usize = 64;

/// Balls whose closure covers the closure of U.
fn covering_balls(u: &OpenSet, w: &OpenSet) -> Result<Vec<Ball>> {
    match u {
        OpenSet::Balls { balls } => Ok(balls.clone()),
        OpenSet::Minus { outer, .. } => covering_balls(outer, w),
        OpenSet::Domain { .. } => match w {
            OpenSet::Balls { balls } => Ok(balls.clone()),
            _ => Err(Error::parameter("U must be bounded")),
        },
    }
}

fn uniform_in_ball(b: &Ball, rng: &mut impl Rng) -> Point {
    let d = b.center.dim();
    let r = b.radius * rng.random::<f64>().powf(1.0 / d as f64);
    b.center + uniform_direction(d, rng) * r
}

/// Dictionary of capped kernels bounded by p, where p = min(1, G(·, c)/g)
/// is >= 1 on the enclosing ball of Ū.
fn build_dictionary(
    k: &KernelSpec,
    domain: &DomainSpec,
    enclosing: &Ball,
    poles: &[Point],
    cap_radius: f64,
    seed: u64,
) -> Result<Dictionary> {
    let d = k.dim();
    let mut rng = walk_rng(seed, 0);
    let base = PotentialSpec::new("p", kernel_kind(k, domain, enclosing.center));
    // the minimum over the closed ball sits on the sphere
    let mut g_min = f64::INFINITY;
    for _ in 0..4096 {
        let x = enclosing.center + uniform_direction(d, &mut rng) * enclosing.radius;
        g_min = g_min.min(base.eval(&x, k)?);
    }
    if !(g_min > 0.0) {
        return Err(Error::parameter("reference potential vanishes on the closure of the sets"));
    }
    let reference = base.with_scale(1.0 / (0.999 * g_min)).with_cap(1.0);

    let mut members = Vec::with_capacity(poles.len());
    for (i, &z) in poles.iter().enumerate() {
        let q = PotentialSpec::new(format!("q{i}"), kernel_kind(k, domain, z)).capped_at_distance(cap_radius, k)?;
        let cap = q.cap.expect("capped");
        members.push(q.with_scale(1.0 / cap).with_cap(1.0));
    }
    let mut dict = Dictionary::new(members, reference, k)?;
    // q <= 1 <= p on the enclosing ball; elsewhere rescale by the sampled ratio
    let mut pts = Vec::with_capacity(20_000);
    let outer = Ball::new(enclosing.center, 4.0 * enclosing.radius)?;
    for _ in 0..16_000 {
        let x = uniform_in_ball(&outer, &mut rng);
        if domain.contains(&x) {
            pts.push(x);
        }
    }
    for f in [1.0, 1.01, 1.1, 1.5, 2.0, 8.0, 32.0, 128.0] {
        for _ in 0..500 {
            let x = enclosing.center + uniform_direction(d, &mut rng) * (f * enclosing.radius);
            if domain.contains(&x) {
                pts.push(x);
            }
        }
    }
    for q in dict.members.iter_mut() {
        let single = Dictionary::new(vec![q.clone()], dict.reference.clone(), k)?.calibrate(&pts, k)?;
        if single > 1.0 {
            q.scale /= single;
            q.cap = q.cap.map(|c| c / single);
        }
    }
    dict.calibrate(&pts, k)?;
    Ok(dict)
}

/// Largest δ′ (halving from δ) whose sampled oscillation stays below δ/1.2.
fn estimate_delta_prime(
    dict: &Dictionary,
    k: &KernelSpec,
    sets: &[OpenSet],
    enclosing: &Ball,
    delta: f64,
    pairs: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let in_closure = |x: &Point| sets.iter().any(|u| u.contains(x));
    let mut rng = walk_rng(seed, 1);
    let mut base = Vec::with_capacity(pairs);
    let mut tries = 0usize;
    while base.len() < pairs && tries < 200 * pairs {
        tries += 1;
        let y = uniform_in_ball(enclosing, &mut rng);
        if in_closure(&y) {
            base.push((y, uniform_in_ball(&Ball { center: Point::zero(y.dim()), radius: 1.0 }, &mut rng)));
        }
    }
    if base.is_empty() {
        return Err(Error::parameter("the sets have empty interior"));
    }
    let mut dp = delta;
    for _ in 0..40 {
        let mut osc: f64 = 0.0;
        for (y, v) in &base {
            let z = *y + *v * dp;
            if !in_closure(&z) {
                continue;
            }
            for q in &dict.members {
                osc = osc.max((q.eval(y, k)? - q.eval(&z, k)?).abs());
            }
        }
        if osc < delta / 1.2 {
            return Ok((dp, osc));
        }
        dp *= 0.5;
    }
    Err(Error::Numerical {
        message: "no modulus of continuity found for the dictionary".into(),
        diagnostics: vec![format!("δ′ reached {dp:e}")],
    })
}

/// ν(1_{Z_M(x_j, a)} p) for a deterministic ν.
fn lattice_mass(nu: &WeightedMeasure, g: &GridSpec, p: &PotentialSpec, k: &KernelSpec) -> Result<f64> {
    let mut s = 0.0;
    for a in nu.atoms() {
        if g.lattice_contains(&a.point) {
            s += a.weight * p.eval(&a.point, k)?;
        }
    }
    Ok(s)
}

/// Pools balls of the same group into cubes of edge `h`.
fn pool_cells(balls: &[Ball], partition: &[usize], h: f64) -> Vec<usize> {
    let mut ids: BTreeMap<(usize, [i64; 4]), usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(balls.len());
    for (b, &g) in balls.iter().zip(partition) {
        let mut key = [0i64; 4];
        for (a, slot) in key.iter_mut().enumerate().take(b.center.dim()) {
            *slot = (b.center[a] / h).floor() as i64;
        }
        let next = ids.len();
        out.push(*ids.entry((g, key)).or_insert(next));
    }
    out
}

pub fn run_theorem_pipeline(input: &TheoremInput<'_>) -> Result<TheoremOutput> {
    let TheoremInput {
        nu,
        w,
        sets,
        lambda,
        eta,
        domain,
        kernel: k,
        mc,
        overrides: ov,
        ball_filter,
    } = *input;
    let d = k.dim();
    let kk = sets.len();
    mc.validate()?;
    domain.validate(k)?;
    if kk < 2 {
        return Err(Error::parameter("at least two sets are required"));
    }
    if lambda.len() != kk || lambda.iter().any(|l| !(0.0..=1.0).contains(l)) || (lambda.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::parameter("λ must lie in the simplex with one entry per set"));
    }
    if !(eta > 0.0) {
        return Err(Error::parameter("η must be positive"));
    }
    if !nu.is_deterministic() {
        return Err(Error::parameter("ν must be a deterministic atomic measure"));
    }
    for (i, a) in nu.atoms().iter().enumerate() {
        if !w.contains(&a.point) || !domain.contains(&a.point) {
            return Err(Error::precondition(format!("atom {i} of ν lies outside W")));
        }
    }
    for (n, u) in sets.iter().enumerate() {
        if let OpenSet::Balls { balls } = u {
            for b in balls {
                if w.dist_to_complement(&b.center) <= b.radius {
                    return Err(Error::precondition(format!("the closure of U_{} is not a compact subset of W", n + 1)));
                }
            }
        }
    }
    let mut rep = ExperimentReport::new("theorem");
    rep.param("kernel", k);
    rep.param("lambda", lambda);
    rep.param("eta", eta);
    rep.param("samples", mc.samples);
    rep.param("seed", mc.seed);

    // 1. dictionary and p
    let mut cover = Vec::new();
    for u in sets {
        cover.extend(covering_balls(u, w)?);
    }
    let enclosing = BallUnion::new_unchecked(cover).enclosing_ball().ok_or_else(|| Error::parameter("empty sets"))?;
    let cap_radius = ov.cap_radius.unwrap_or(0.25 * enclosing.radius);
    let poles: Vec<Point> = match &ov.poles {
        Some(p) => p.clone(),
        None => {
            let mut p: Vec<Point> = Vec::new();
            for u in sets {
                for b in covering_balls(u, w)? {
                    if !p.iter().any(|x| x.dist(&b.center) < 1e-12) {
                        p.push(b.center);
                    }
                }
            }
            p.push(enclosing.center);
            p
        }
    };
    let dict = build_dictionary(k, domain, &enclosing, &poles, cap_radius, derive_seed(mc.seed, 0xd1c7))?;
    rep.param("dictionary", &dict);
    let p = dict.reference.clone();
    let nu_p: f64 = nu.atoms().iter().map(|a| a.weight * p.eval(&a.point, k).unwrap_or(1.0)).sum();
    let delta = eta / (6.0 * nu_p + 3.0 * kk as f64);
    let (delta_prime, osc) = match ov.delta_prime {
        Some(dp) => (dp, f64::NAN),
        None => estimate_delta_prime(
            &dict,
            k,
            sets,
            &enclosing,
            delta,
            ov.oscillation_pairs.unwrap_or(PAIRS),
            derive_seed(mc.seed, 0x05c),
        )?,
    };
    rep.param("oscillation_at_delta_prime", osc);

    // 2. schedule
    let n_bound = kk as f64 + nu_p / delta;
    let n = match ov.n {
        Some(n) => {
            if (n as usize) < kk {
                return Err(Error::parameter(format!("N = {n} leaves fewer than k = {kk} offsets")));
            }
            n
        }
        None => n_bound.floor() as u32 + 1,
    };
    let n_bound_met = n as f64 > n_bound;
    if !n_bound_met {
        rep.warn(format!("N = {n} does not exceed k + ν(p)/δ = {n_bound:.3}"));
    }
    let a = (delta / (4.0 * d as f64 * n as f64)).min(delta_prime / 2.0);
    log::info!("theorem: ν(p) = {nu_p:.4}, δ = {delta:.4}, δ′ = {delta_prime:.4}, N = {n}, a = {a:.3e}");
    let offsets: Vec<Point> = (1..=n)
        .map(|j| {
            let mut x = Point::zero(d);
            x[0] = j as f64 / n as f64;
            x
        })
        .collect();

    let source = integrals(nu, &dict, k)?;
    rep.record("nu", None, nu, &dict, k, 0)?;
    let mut references = Vec::with_capacity(kk);
    for (i, u) in sets.iter().enumerate() {
        let stop = open_set_stop(u, w, domain)?;
        let rmc = mc.with_seed(derive_seed(mc.seed, 0x100 + i as u64));
        let (m, ints) = rep.sweep(&format!("reference{}", i + 1), None, nu, &source, &stop, k, &rmc, &dict)?;
        references.push((m, ints));
    }

    // 3–4. resolution and offsets
    let m_max = ov.m_max.unwrap_or(M_MAX);
    let mut m = ov.m_start.unwrap_or(M_START).min(m_max).max(1);
    let (selected, kn) = loop {
        let mut scores = Vec::with_capacity(n as usize);
        for (j, x) in offsets.iter().enumerate() {
            let g = GridSpec { offset: *x, scale: a, resolution: m };
            scores.push((lattice_mass(nu, &g, &p, k)?, j));
        }
        scores.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let admissible: Vec<usize> = scores.iter().filter(|s| s.0 < delta).map(|s| s.1).collect();
        if admissible.len() < kk {
            return Err(Error::precondition(format!(
                "no admissible offset selection at M = {m}: {} of {n} offsets satisfy ν(1_Z p) < δ",
                admissible.len()
            )));
        }
        let selected: Vec<usize> = admissible[..kk].to_vec();
        let mut kn = Vec::with_capacity(kk);
        let mut ok = true;
        for (i, u) in sets.iter().enumerate() {
            let g = GridSpec { offset: offsets[selected[i]], scale: a, resolution: m };
            let mut balls = grid_balls(&g, u)?;
            if let Some(f) = ball_filter {
                balls = BallUnion::new_unchecked(balls.balls().iter().copied().filter(|b| f(b)).collect());
            }
            let stop = StopSet::new(balls.clone(), Some(w.clone()), *domain)?;
            let rmc = mc.with_seed(derive_seed(mc.seed, 0x100 + i as u64));
            let (swept, _) = rep.sweep(&format!("grid{}", i + 1), Some(m), nu, &source, &stop, k, &rmc, &dict)?;
            let wd = distance(&swept, &references[i].0, &dict, k)?;
            for r in &wd.rows {
                if !(r.difference.abs() < delta / 2.0 + 3.0 * r.stderr && r.stderr < delta / 4.0) {
                    ok = false;
                }
            }
            rep.record_distance(&format!("grid{}-vs-reference", i + 1), Some(m), &wd, mc.samples);
            rep.param(&format!("balls{}_m{m}", i + 1), balls.len());
            log::info!("theorem: M = {m}, set {}: {} lattice balls, grid distance {:.4}", i + 1, balls.len(), wd.distance);
            kn.push(balls);
        }
        if ok {
            break (selected, kn);
        }
        if m.saturating_mul(2) > m_max {
            rep.warn(format!(
                "grid error not below δ/2 + 3σ at the largest resolution M = {m}; continuing with it"
            ));
            break (selected, kn);
        }
        m *= 2;
    };
    rep.check("grid-error-within-budget", rep.warnings.iter().all(|w| !w.starts_with("grid error")), m as f64, m_max as f64, 0.0);

    // 5. A, ν̃ and the δ-family
    let mut all = Vec::new();
    let mut partition = Vec::new();
    for (i, b) in kn.iter().enumerate() {
        all.extend_from_slice(b.balls());
        partition.extend(std::iter::repeat_n(i, b.len()));
    }
    let a_union = BallUnion::new_unchecked(all);
    let nu_tilde = nu.filtered(|at| !a_union.contains(&at.point));
    let discarded: f64 = nu
        .atoms()
        .iter()
        .filter(|at| a_union.contains(&at.point))
        .map(|at| at.weight * p.eval(&at.point, k).unwrap_or(1.0))
        .sum();
    rep.check("discarded-mass", discarded < kk as f64 * delta, discarded, kk as f64 * delta, 0.0);
    let report = validate_delta_family(&a_union, delta, w, k)?;
    rep.param("delta_family_min_slack", report.min_slack);
    rep.param("balls", a_union.len());
    if !report.valid {
        return Err(Error::structural(format!(
            "lattice balls do not form a δ-family (δ = {delta}, min slack {:e})",
            report.min_slack
        )));
    }

    let params = PipelineParams {
        eta,
        delta,
        delta_prime,
        n,
        n_bound_met,
        a,
        offsets: offsets.clone(),
        m,
        selected: selected.iter().map(|&j| j as u32 + 1).collect(),
        nu_p,
        k: kk,
        seed: mc.seed,
    };
    rep.param("pipeline", &params);

    // 6. joint shrink relative to W
    let stop = StopSet::new(a_union.clone(), Some(w.clone()), *domain)?;
    let cells = match ov.cell_size {
        Some(h) if h > 0.0 => Some(pool_cells(a_union.balls(), &partition, h)),
        Some(_) => None,
        None if a_union.len() > POOL_ABOVE => {
            let rmin = covering_balls(&sets[0], w)?.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
            Some(pool_cells(a_union.balls(), &partition, 0.5 * rmin))
        }
        None => None,
    };
    if let Some(c) = &cells {
        rep.param("coordinates", c.iter().max().map_or(0, |m| m + 1));
    }
    let problem = ShrinkProblem {
        stop: stop.clone(),
        source: nu_tilde.clone(),
        partition: partition.clone(),
        mode: ShrinkMode::Joint {
            lambda: lambda.to_vec(),
            delta,
        },
        cells,
    };
    let solver = shrink_solver(ov.solver.as_deref().unwrap_or("parallel-bisection"))?;
    let opts = ov.shrink.unwrap_or_default();
    log::info!("theorem: joint shrink of {} balls ({} coordinates)", a_union.len(), problem.coordinates());
    let sol = shrink::solve(&problem, k, mc, &opts, solver.as_ref())?;
    log::info!("theorem: shrink done after {} evaluations", sol.evaluations);
    let worst = sol
        .residuals
        .iter()
        .zip(&sol.tolerances)
        .map(|(r, t)| r.abs() / t)
        .fold(0.0, f64::max);
    rep.check("interior-masses", sol.converged, worst, 1.0, 0.0);
    rep.check("shrink-revalidated", sol.revalidated, 0.0, 0.0, 0.0);
    rep.param("shrink_evaluations", sol.evaluations);
    rep.param("shrink_sweeps", sol.sweeps);
    for wmsg in &sol.warnings {
        rep.warn(wmsg.clone());
    }
    let factors = problem.ball_factors(&sol.s);
    let shrunk = stop.with_factors(&factors)?;
    let c = BallUnion::new_unchecked(
        (0..shrunk.len())
            .map(|i| shrunk.ball(i))
            .filter(|b| !b.is_degenerate())
            .collect(),
    );
    rep.param("c_balls", c.len());

    // 7. final measures
    let tilde_source = integrals(&nu_tilde, &dict, k)?;
    let mut mu_tilde = WeightedMeasure::zero();
    for i in 0..kk {
        let idx: Vec<usize> = (0..partition.len()).filter(|&b| partition[b] == i).collect();
        let sub = stop.subset(&idx)?;
        let (swept, _) = rep.sweep(&format!("tilde-k{}", i + 1), Some(m), &nu_tilde, &tilde_source, &sub, k, mc, &dict)?;
        mu_tilde = mu_tilde.plus(&swept.scaled(lambda[i]));
    }
    let fmc = mc.with_seed(derive_seed(mc.seed, 0xc0));
    let final_stop = StopSet::new(c.clone(), Some(w.clone()), *domain)?;
    let (tilde_c, _) = rep.sweep("tilde-c", Some(m), &nu_tilde, &tilde_source, &final_stop, k, &fmc, &dict)?;
    let final_measure = if nu_tilde.len() == nu.len() {
        tilde_c.clone()
    } else {
        rep.sweep("final", Some(m), nu, &source, &final_stop, k, &fmc, &dict)?.0
    };
    let mut target = WeightedMeasure::zero();
    for (i, (r, _)) in references.iter().enumerate() {
        target = target.plus(&r.scaled(lambda[i]));
    }
    rep.record("target", None, &target, &dict, k, mc.samples)?;
    rep.record("final", Some(m), &final_measure, &dict, k, mc.samples)?;
    let wd = distance(&final_measure, &target, &dict, k)?;
    rep.record_distance("final-vs-target", Some(m), &wd, mc.samples);
    for r in &wd.rows {
        rep.check(format!("final-distance:{}", r.function), r.difference.abs() < eta + 3.0 * r.stderr, r.difference.abs(), eta, r.stderr);
    }

    // boundary part: ρ = ν̃^{C∪W^c}|_{W^c} - μ̃|_{W^c} >= 0 with ρ(p) <= 2ν(p)δ
    let on_wc = |m: &WeightedMeasure| m.filtered(|at| at.site == Site::Complement);
    let (bc, bm) = (on_wc(&tilde_c), on_wc(&mu_tilde));
    let budget = 2.0 * nu_p * delta;
    let mut funcs: Vec<&PotentialSpec> = dict.members.iter().collect();
    funcs.push(&p);
    for q in funcs {
        let gap: Estimate = bc.integrate(q, k)?.minus(&bm.integrate(q, k)?);
        rep.check(format!("boundary-gap:{}", q.name), gap.value.abs() <= budget + 3.0 * gap.stderr, gap.value.abs(), budget, gap.stderr);
        rep.check(format!("boundary-sign:{}", q.name), gap.value >= -3.0 * gap.stderr, gap.value, 0.0, gap.stderr);
    }
    Ok(TheoremOutput {
        report: rep,
        c,
        params,
        final_measure,
        target,
        dictionary: dict,
    })
}
