//! Shrink-factor solvers.
//!
//! For a source ν with ν(A) = 0 and balls B_1..B_m, the map
//! s ↦ m_i(s) = ν^{A_s ∪ W^c}(B_i^{s_i}) is increasing in s_i and decreasing
//! in every s_j, j ≠ i. Starting from s = 1 and moving each coordinate to the
//! largest value with m_i <= γ_i therefore decreases s monotonically towards
//! the maximal solution. Mass evaluations inside one solve reuse a single
//! seed, so the noisy map is a fixed deterministic function.

use serde::{Deserialize, Serialize};

use crate::engine::{ball_masses, balayage_measure, McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{validate_delta_family, DeltaFamilyReport, OpenSet};
use crate::kernels::KernelSpec;
use crate::measure::{Estimate, Site, WeightedMeasure};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ShrinkMode {
    Caps { gamma: Vec<f64> },
    Fractions { beta: Vec<f64> },
    Joint { lambda: Vec<f64>, delta: f64 },
    JointScaled { beta: Vec<f64>, lambda: Vec<f64>, delta: f64 },
}

#[derive(Debug, Clone)]
pub struct ShrinkProblem {
    /// A (outer radii), optional W and the domain X.
    pub stop: StopSet,
    pub source: WeightedMeasure,
    /// Group (0-based) of every ball.
    pub partition: Vec<usize>,
    pub mode: ShrinkMode,
    /// Optional pooling of balls into solver coordinates: all balls of a
    /// cell share one factor and the mass equations hold for cell sums.
    /// Every cell must lie inside a single group.
    pub cells: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShrinkOptions {
    pub depth: u32,
    pub max_sweeps: u32,
    pub tau_s: f64,
    /// Relative mass tolerance; the absolute tolerance is
    /// max(rel_mass_tol · ν total, 3σ).
    pub rel_mass_tol: f64,
}

impl Default for ShrinkOptions {
    fn default() -> Self {
        ShrinkOptions {
            depth: 20,
            max_sweeps: 12,
            tau_s: 1e-3,
            rel_mass_tol: 2e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub sweep: u32,
    pub coordinate: Option<usize>,
    pub s: Vec<f64>,
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkSolution {
    pub solver: String,
    pub s: Vec<f64>,
    pub achieved: Vec<Estimate>,
    pub targets: Vec<Estimate>,
    pub residuals: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub converged: bool,
    pub sweeps: u32,
    pub evaluations: u32,
    /// Joint modes: s_i = 1 only where the target is within tolerance of 0.
    /// Other modes: s_i = 1 only where the full-radius mass is within the cap.
    pub boundary_clause: bool,
    pub revalidation: Vec<Estimate>,
    pub revalidated: bool,
    /// max |Δm| / |Δs| observed between consecutive evaluations.
    pub lipschitz: f64,
    pub trace: Vec<TraceEntry>,
    pub delta_family: Option<DeltaFamilyReport>,
    pub warnings: Vec<String>,
}

impl ShrinkSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// Evaluates per-ball masses for shrink vectors with a fixed seed.
pub struct MassMap<'a> {
    pub stop: &'a StopSet,
    pub source: &'a WeightedMeasure,
    pub kernel: KernelSpec,
    pub mc: McParams,
    pub cells: Option<&'a [usize]>,
    pub evaluations: u32,
}

impl<'a> MassMap<'a> {
    pub fn new(stop: &'a StopSet, source: &'a WeightedMeasure, kernel: KernelSpec, mc: McParams) -> Self {
        MassMap {
            stop,
            source,
            kernel,
            mc,
            cells: None,
            evaluations: 0,
        }
    }

    pub fn pooled(mut self, cells: Option<&'a [usize]>) -> Self {
        self.cells = cells;
        self
    }

    /// Masses per coordinate (ball, or cell when pooled).
    pub fn eval(&mut self, s: &[f64]) -> Result<Vec<Estimate>> {
        self.evaluations += 1;
        let factors = match self.cells {
            Some(c) => c.iter().map(|&j| s[j]).collect(),
            None => s.to_vec(),
        };
        let stop = self.stop.with_factors(&factors)?;
        let swept = balayage_measure(self.source, &stop, &self.kernel, &self.mc)?;
        match self.cells {
            Some(c) => Ok(cell_masses(&swept, c, s.len())),
            None => Ok(ball_masses(&swept, stop.len())),
        }
    }
}

/// Per-cell masses with block-level standard errors.
pub fn cell_masses(swept: &WeightedMeasure, cells: &[usize], n: usize) -> Vec<Estimate> {
    swept.grouped_mass(n, |a| match a.site {
        Site::Ball(b) => Some(cells[b as usize]),
        _ => None,
    })
}

/// A strategy for finding the maximal s with m_i(s) <= γ_i.
pub trait ShrinkSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(
        &self,
        map: &mut MassMap<'_>,
        targets: &[Estimate],
        tol: &[f64],
        opts: &ShrinkOptions,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<(Vec<f64>, Vec<Estimate>, u32)>;
}

fn values(e: &[Estimate]) -> Vec<f64> {
    e.iter().map(|x| x.value).collect()
}

/// One-dimensional search for the largest feasible s_i (m_i(s) <= γ_i) near
/// the current value. Any mass above γ_i moves the coordinate down, so a
/// settled coordinate has m_i in [γ_i - tol, γ_i]; upward moves need a
/// deficit larger than tol. Steps grow geometrically from τ_s until the
/// crossing is bracketed, then bisect to width τ_s/4.
#[derive(Debug, Clone, Copy)]
enum Search {
    Down { hi: f64, w: f64 },
    Up { lo: f64, w: f64 },
    Bisect { lo: f64, hi: f64 },
    Done { s: f64 },
}

impl Search {
    fn start(s: f64, mass: f64, target: f64, tol: f64, tau: f64) -> Search {
        if target <= 0.0 {
            Search::Done { s: 0.0 }
        } else if mass > target && s > 0.0 {
            Search::Down { hi: s, w: tau }
        } else if mass < target - tol && s < 1.0 {
            Search::Up { lo: s, w: tau }
        } else {
            Search::Done { s }
        }
    }

    fn candidate(&self) -> Option<f64> {
        match *self {
            Search::Down { hi, w } => Some((hi - w).max(0.0)),
            Search::Up { lo, w } => Some((lo + w).min(1.0)),
            Search::Bisect { lo, hi } => Some(0.5 * (lo + hi)),
            Search::Done { .. } => None,
        }
    }

    /// The last point known to be feasible, or the current one when settled.
    fn feasible(&self) -> Option<f64> {
        match *self {
            Search::Up { lo, .. } | Search::Bisect { lo, .. } => Some(lo),
            Search::Done { s } => Some(s),
            Search::Down { .. } => None,
        }
    }

    fn update(self, cand: f64, feasible: bool, tau: f64) -> Search {
        let next = match self {
            Search::Down { hi, w } => {
                if feasible {
                    Search::Bisect { lo: cand, hi }
                } else {
                    Search::Down { hi: cand, w: 4.0 * w }
                }
            }
            Search::Up { lo, w } => {
                if !feasible {
                    Search::Bisect { lo, hi: cand }
                } else if cand >= 1.0 {
                    Search::Done { s: 1.0 }
                } else {
                    Search::Up { lo: cand, w: 4.0 * w }
                }
            }
            Search::Bisect { lo, hi } => {
                if feasible {
                    Search::Bisect { lo: cand, hi }
                } else {
                    Search::Bisect { lo, hi: cand }
                }
            }
            done => done,
        };
        match next {
            Search::Bisect { lo, hi } if hi - lo < 0.25 * tau => Search::Done { s: lo },
            other => other,
        }
    }
}

/// Gauss–Seidel sweeps of the per-coordinate search.
pub struct CoordinateBisection;

impl ShrinkSolver for CoordinateBisection {
    fn name(&self) -> &'static str {
        "coordinate-bisection"
    }

    fn solve(
        &self,
        map: &mut MassMap<'_>,
        targets: &[Estimate],
        tol: &[f64],
        opts: &ShrinkOptions,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<(Vec<f64>, Vec<Estimate>, u32)> {
        let m = targets.len();
        let mut s: Vec<f64> = targets.iter().map(|t| if t.value <= 0.0 { 0.0 } else { 1.0 }).collect();
        let mut f = map.eval(&s)?;
        trace.push(TraceEntry { sweep: 0, coordinate: None, s: s.clone(), masses: values(&f) });
        for sweep in 1..=opts.max_sweeps {
            let mut change: f64 = 0.0;
            for i in 0..m {
                let mut search = Search::start(s[i], f[i].value, targets[i].value, tol[i], opts.tau_s);
                if matches!(search, Search::Done { .. }) {
                    continue;
                }
                let old = s[i];
                // masses at the last feasible point
                let mut at = search.feasible().map(|x| (x, f.clone()));
                for _ in 0..opts.depth {
                    let Some(c) = search.candidate() else { break };
                    let mut t = s.clone();
                    t[i] = c;
                    let g = map.eval(&t)?;
                    let ok = g[i].value <= targets[i].value;
                    search = search.update(c, ok, opts.tau_s);
                    if ok {
                        at = Some((c, g));
                    }
                }
                // a search cut short by the depth limit falls back to s_i = 0
                s[i] = search.feasible().unwrap_or(0.0);
                f = match at {
                    Some((x, g)) if x == s[i] => g,
                    _ => map.eval(&s)?,
                };
                change = change.max((s[i] - old).abs());
                trace.push(TraceEntry { sweep, coordinate: Some(i), s: s.clone(), masses: values(&f) });
            }
            log::debug!("coordinate-bisection sweep {sweep}: max change {change:.3e}, {} evaluations", map.evaluations);
            if change < opts.tau_s {
                return Ok((s, f, sweep));
            }
        }
        Ok((s, f, opts.max_sweeps))
    }
}

/// Jacobi variant: all unsettled coordinates search simultaneously, one mass
/// evaluation per step for the whole vector. Cheaper for many balls.
pub struct ParallelBisection;

impl ShrinkSolver for ParallelBisection {
    fn name(&self) -> &'static str {
        "parallel-bisection"
    }

    fn solve(
        &self,
        map: &mut MassMap<'_>,
        targets: &[Estimate],
        tol: &[f64],
        opts: &ShrinkOptions,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<(Vec<f64>, Vec<Estimate>, u32)> {
        let m = targets.len();
        let mut s: Vec<f64> = targets.iter().map(|t| if t.value <= 0.0 { 0.0 } else { 1.0 }).collect();
        let mut f = map.eval(&s)?;
        trace.push(TraceEntry { sweep: 0, coordinate: None, s: s.clone(), masses: values(&f) });
        for sweep in 1..=opts.max_sweeps {
            let mut searches: Vec<Search> = (0..m)
                .map(|i| Search::start(s[i], f[i].value, targets[i].value, tol[i], opts.tau_s))
                .collect();
            if searches.iter().all(|x| matches!(x, Search::Done { .. })) {
                return Ok((s, f, sweep - 1));
            }
            let old = s.clone();
            for _ in 0..opts.depth {
                let cands: Vec<Option<f64>> = searches.iter().map(Search::candidate).collect();
                if cands.iter().all(Option::is_none) {
                    break;
                }
                let t: Vec<f64> = (0..m)
                    .map(|i| cands[i].or(searches[i].feasible()).unwrap_or(s[i]))
                    .collect();
                let g = map.eval(&t)?;
                for i in 0..m {
                    if let Some(c) = cands[i] {
                        searches[i] = searches[i].update(c, g[i].value <= targets[i].value, opts.tau_s);
                    }
                }
            }
            for i in 0..m {
                s[i] = searches[i].feasible().unwrap_or(0.0);
            }
            f = map.eval(&s)?;
            trace.push(TraceEntry { sweep, coordinate: None, s: s.clone(), masses: values(&f) });
            let change = s.iter().zip(&old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            log::debug!("parallel-bisection sweep {sweep}: max change {change:.3e}, {} evaluations", map.evaluations);
            if change < opts.tau_s {
                return Ok((s, f, sweep));
            }
        }
        Ok((s, f, opts.max_sweeps))
    }
}

pub const SOLVERS: &[&str] = &["coordinate-bisection", "parallel-bisection"];

pub fn shrink_solver(name: &str) -> Result<Box<dyn ShrinkSolver>> {
    match name {
        "coordinate-bisection" => Ok(Box::new(CoordinateBisection)),
        "parallel-bisection" => Ok(Box::new(ParallelBisection)),
        other => Err(Error::Unknown {
            kind: "shrink solver",
            name: other.to_string(),
        }),
    }
}

fn check_simplex(lambda: &[f64], groups: usize) -> Result<()> {
    if lambda.len() != groups {
        return Err(Error::parameter(format!(
            "λ has {} entries for {groups} groups",
            lambda.len()
        )));
    }
    let sum: f64 = lambda.iter().sum();
    if lambda.iter().any(|&l| !(0.0..=1.0).contains(&l)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::parameter(format!("λ must lie in the simplex (sum {sum})")));
    }
    Ok(())
}

fn check_unit(v: &[f64], m: usize, what: &str) -> Result<()> {
    if v.len() != m || v.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
        return Err(Error::parameter(format!("{what} must have {m} entries in [0, 1]")));
    }
    Ok(())
}

impl ShrinkProblem {
    pub fn groups(&self) -> usize {
        self.partition.iter().map(|g| g + 1).max().unwrap_or(0)
    }

    /// Number of solver coordinates.
    pub fn coordinates(&self) -> usize {
        match &self.cells {
            Some(c) => c.iter().map(|j| j + 1).max().unwrap_or(0),
            None => self.stop.len(),
        }
    }

    /// Sums per-ball estimates into per-coordinate ones. Errors add in
    /// quadrature; a walk lands in at most one ball, so ball masses of one
    /// sweep are negatively correlated and this overstates the error.
    fn pool(&self, per_ball: &[Estimate]) -> Vec<Estimate> {
        let Some(c) = &self.cells else { return per_ball.to_vec() };
        let mut out = vec![Estimate::default(); self.coordinates()];
        let mut var = vec![0.0; out.len()];
        for (e, &j) in per_ball.iter().zip(c) {
            out[j].value += e.value;
            var[j] += e.stderr * e.stderr;
        }
        for (o, v) in out.iter_mut().zip(var) {
            o.stderr = v.sqrt();
        }
        out
    }

    /// Per-ball radius factors from per-coordinate ones.
    pub fn ball_factors(&self, s: &[f64]) -> Vec<f64> {
        match &self.cells {
            Some(c) => c.iter().map(|&j| s[j]).collect(),
            None => s.to_vec(),
        }
    }

    pub fn validate(&self, k: &KernelSpec) -> Result<()> {
        let m = self.stop.len();
        if self.partition.len() != m {
            return Err(Error::parameter("partition must assign every ball to a group"));
        }
        if let Some(c) = &self.cells {
            if c.len() != m {
                return Err(Error::parameter("cells must assign every ball to a coordinate"));
            }
            let mut group = vec![usize::MAX; self.coordinates()];
            for (i, &j) in c.iter().enumerate() {
                if group[j] == usize::MAX {
                    group[j] = self.partition[i];
                } else if group[j] != self.partition[i] {
                    return Err(Error::parameter(format!("cell {j} mixes groups")));
                }
            }
            if group.contains(&usize::MAX) {
                return Err(Error::parameter("cell numbering must be contiguous"));
            }
        }
        for (j, a) in self.source.atoms().iter().enumerate() {
            if self.stop.outer_balls().contains(&a.point) {
                return Err(Error::precondition(format!("source atom {j} lies in A; ν(A) must be 0")));
            }
        }
        let groups = self.groups();
        match &self.mode {
            ShrinkMode::Caps { gamma } => {
                if gamma.len() != m || gamma.iter().any(|g| !(*g >= 0.0)) {
                    return Err(Error::parameter("γ must have one non-negative entry per ball"));
                }
            }
            ShrinkMode::Fractions { beta } => check_unit(beta, m, "β")?,
            ShrinkMode::Joint { lambda, delta } => {
                check_simplex(lambda, groups)?;
                self.delta_report(*delta, k)?;
            }
            ShrinkMode::JointScaled { beta, lambda, delta } => {
                check_unit(beta, m, "β")?;
                check_simplex(lambda, groups)?;
                self.delta_report(*delta, k)?;
            }
        }
        Ok(())
    }

    /// δ-family report relative to W (or X when W is absent).
    pub fn delta_report(&self, delta: f64, k: &KernelSpec) -> Result<DeltaFamilyReport> {
        let region = match self.stop.outer() {
            Some(w) => w.clone(),
            None => OpenSet::Domain { domain: *self.stop.domain() },
        };
        let rep = validate_delta_family(self.stop.outer_balls(), delta, &region, k)?;
        if !rep.valid {
            return Err(Error::structural(format!(
                "not a δ-family for δ = {delta} (δ₀ = {}, min slack {:e})",
                rep.delta0, rep.min_slack
            )));
        }
        Ok(rep)
    }

    /// ν^{K_n ∪ W^c}(B_i) for i ∈ I_n, each group swept on its own.
    pub fn group_masses(&self, k: &KernelSpec, mc: &McParams) -> Result<Vec<Estimate>> {
        let m = self.stop.len();
        let mut out = vec![Estimate::default(); m];
        for n in 0..self.groups() {
            let idx: Vec<usize> = (0..m).filter(|&i| self.partition[i] == n).collect();
            if idx.is_empty() {
                continue;
            }
            let sub = self.stop.subset(&idx)?;
            let swept = balayage_measure(&self.source, &sub, k, mc)?;
            for (j, e) in ball_masses(&swept, idx.len()).into_iter().enumerate() {
                out[idx[j]] = e;
            }
        }
        Ok(out)
    }

    /// Target masses per solver coordinate.
    pub fn coordinate_targets(&self, k: &KernelSpec, mc: &McParams) -> Result<Vec<Estimate>> {
        Ok(self.pool(&self.targets(k, mc)?))
    }

    /// Target masses γ_i for the mode, per ball.
    pub fn targets(&self, k: &KernelSpec, mc: &McParams) -> Result<Vec<Estimate>> {
        let m = self.stop.len();
        let scale = |e: Estimate, c: f64| Estimate {
            value: e.value * c,
            stderr: e.stderr * c,
        };
        match &self.mode {
            ShrinkMode::Caps { gamma } => Ok(gamma.iter().map(|&g| Estimate::exact(g)).collect()),
            ShrinkMode::Fractions { beta } => {
                let full = MassMap::new(&self.stop, &self.source, *k, *mc).eval(&vec![1.0; m])?;
                Ok(full.into_iter().zip(beta).map(|(e, &b)| scale(e, b)).collect())
            }
            ShrinkMode::Joint { lambda, delta } => {
                let g = self.group_masses(k, mc)?;
                Ok((0..m).map(|i| scale(g[i], (1.0 - delta) * lambda[self.partition[i]])).collect())
            }
            ShrinkMode::JointScaled { beta, lambda, delta } => {
                let g = self.group_masses(k, mc)?;
                Ok((0..m)
                    .map(|i| scale(g[i], (1.0 - delta) * beta[i] * lambda[self.partition[i]]))
                    .collect())
            }
        }
    }
}

/// Solves the problem with the named strategy.
pub fn solve(
    problem: &ShrinkProblem,
    k: &KernelSpec,
    mc: &McParams,
    opts: &ShrinkOptions,
    solver: &dyn ShrinkSolver,
) -> Result<ShrinkSolution> {
    problem.validate(k)?;
    let delta_family = match &problem.mode {
        ShrinkMode::Joint { delta, .. } | ShrinkMode::JointScaled { delta, .. } => {
            Some(problem.delta_report(*delta, k)?)
        }
        _ => None,
    };
    let targets = problem.coordinate_targets(k, mc)?;
    let total = problem.source.total_mass();
    let cells = problem.cells.as_deref();
    let mut map = MassMap::new(&problem.stop, &problem.source, *k, *mc).pooled(cells);
    // tolerance from the full-family estimator noise
    let full = map.eval(&vec![1.0; problem.coordinates()])?;
    let tol: Vec<f64> = full
        .iter()
        .zip(&targets)
        .map(|(f, t)| (opts.rel_mass_tol * total).max(3.0 * f.stderr.hypot(t.stderr)))
        .collect();
    let mut trace = Vec::new();
    let (s, achieved, sweeps) = solver.solve(&mut map, &targets, &tol, opts, &mut trace)?;
    let residuals: Vec<f64> = achieved.iter().zip(&targets).map(|(a, t)| a.value - t.value).collect();
    let converged = (0..s.len()).all(|i| {
        if s[i] < 1.0 && targets[i].value > 0.0 {
            residuals[i].abs() <= tol[i]
        } else {
            residuals[i] <= tol[i]
        }
    });
    let joint = matches!(problem.mode, ShrinkMode::Joint { .. } | ShrinkMode::JointScaled { .. });
    // joint targets force every ball with a positive target to shrink
    let boundary_clause = (0..s.len()).all(|i| {
        s[i] < 1.0 || if joint { targets[i].value <= tol[i] } else { residuals[i] <= tol[i] }
    });
    let mut warnings = Vec::new();
    if !boundary_clause {
        warnings.push("boundary clause violated: a ball with positive target kept its full radius".into());
    }
    let lipschitz = trace
        .windows(2)
        .filter_map(|w| {
            let ds = w[0].s.iter().zip(&w[1].s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let dm = w[0].masses.iter().zip(&w[1].masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (ds > 0.0).then(|| dm / ds)
        })
        .fold(0.0, f64::max);
    let check_mc = mc.with_seed(derive_seed(mc.seed, 0x5eed));
    let mut check = MassMap::new(&problem.stop, &problem.source, *k, check_mc).pooled(cells);
    let revalidation = check.eval(&s)?;
    let revalidated = (0..s.len()).all(|i| {
        let diff = (revalidation[i].value - achieved[i].value).abs();
        diff <= 3.0 * revalidation[i].stderr.hypot(achieved[i].stderr) + 1e-12
    });
    let sol = ShrinkSolution {
        solver: solver.name().to_string(),
        s,
        achieved,
        targets,
        residuals,
        tolerances: tol,
        converged,
        sweeps,
        evaluations: map.evaluations,
        boundary_clause,
        revalidation,
        revalidated,
        lipschitz,
        trace,
        delta_family,
        warnings,
    };
    if !sol.converged {
        return Err(Error::Solver {
            message: format!(
                "shrink solver {} did not meet the mass tolerance after {} sweeps (max residual {:.3e})",
                sol.solver,
                sol.sweeps,
                sol.max_residual()
            ),
            trace: sol
                .trace
                .iter()
                .map(|t| format!("sweep {} coord {:?}: s = {:?}, masses = {:?}", t.sweep, t.coordinate, t.s, t.masses))
                .collect(),
        });
    }
    Ok(sol)
}

/// Largest radius factors whose swept masses stay within the caps γ.
pub fn solve_max_shrink(p: &ShrinkProblem, k: &KernelSpec, mc: &McParams, o: &ShrinkOptions) -> Result<ShrinkSolution> {
    debug_assert!(matches!(p.mode, ShrinkMode::Caps { .. }));
    solve(p, k, mc, o, &CoordinateBisection)
}

/// Shrinks so that each ball keeps the fraction β_i of its mass.
pub fn fraction_shrink(p: &ShrinkProblem, k: &KernelSpec, mc: &McParams, o: &ShrinkOptions) -> Result<ShrinkSolution> {
    debug_assert!(matches!(p.mode, ShrinkMode::Fractions { .. }));
    solve(p, k, mc, o, &CoordinateBisection)
}

/// ν^C(B_i) = (1-δ) λ_n ν^{K_n}(B_i) for i ∈ I_n.
pub fn joint_shrink(p: &ShrinkProblem, k: &KernelSpec, mc: &McParams, o: &ShrinkOptions) -> Result<ShrinkSolution> {
    debug_assert!(matches!(p.mode, ShrinkMode::Joint { .. }));
    solve(p, k, mc, o, &CoordinateBisection)
}

/// ν^C(B_i) = (1-δ) β_i λ_n ν^{K_n}(B_i) for i ∈ I_n.
pub fn joint_shrink_scaled(
    p: &ShrinkProblem,
    k: &KernelSpec,
    mc: &McParams,
    o: &ShrinkOptions,
) -> Result<ShrinkSolution> {
    debug_assert!(matches!(p.mode, ShrinkMode::JointScaled { .. }));
    solve(p, k, mc, o, &CoordinateBisection)
}
