//! Experiments registered by name and selected from the configuration.

use std::collections::BTreeMap;

use balayage::engine::{ball_masses, balayage_measure, StopSet};
use balayage::geometry::{Ball, BallUnion, OpenSet};
use balayage::pipeline::{
    approximate_open_balayage, harnack_audit, integrals, jensen_demo, run_corollary_1_4, run_theorem_pipeline,
    skorokhod_demo, CorollaryInput, ExperimentReport, GridApproxInput, HarnackInput, JensenInput, PathParams,
    PipelineOverrides, SkorokhodInput, TheoremInput,
};
use balayage::pipeline::grid_approx::GridApproxOptions;
use balayage::potential::{standard_dictionary, Dictionary};
use balayage::shrink::{shrink_solver, solve, ShrinkMode, ShrinkOptions, ShrinkProblem};
use balayage::{Error, Point, Result};
use serde::Deserialize;

use crate::config::RunConfig;

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    /// Full validation without running; returns diagnostic lines.
    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>>;
    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport>;
}

pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.entries
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::Unknown { kind: "experiment", name: name.to_string() })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(Balayage));
        r.register(Box::new(Shrink));
        r.register(Box::new(Theorem));
        r.register(Box::new(Corollary));
        r.register(Box::new(GridApprox));
        r.register(Box::new(Jensen));
        r.register(Box::new(Skorokhod));
        r.register(Box::new(Harnack));
        r
    }
}

fn simplex(lambda: &[f64], k: usize) -> Result<()> {
    let sum: f64 = lambda.iter().sum();
    if lambda.len() != k || lambda.iter().any(|l| !(0.0..=1.0).contains(l)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::parameter(format!(
            "simplex violation: λ = {lambda:?} must have {k} entries in [0, 1] summing to 1 (sum {sum})"
        )));
    }
    Ok(())
}

fn echo(cfg: &RunConfig) -> Vec<String> {
    vec![
        format!("kernel: d = {}, α = {}", cfg.kernel.dim(), cfg.kernel.alpha()),
        format!("domain: {}", serde_json::to_string(&cfg.domain).unwrap_or_default()),
        format!("ν: {} atoms", cfg.nu.len()),
        format!("samples: {}, seed: {}", cfg.mc.samples, cfg.mc.seed),
    ]
}

/// Capped kernels at the ball centres, p anchored at their enclosing centre.
fn ball_dictionary(cfg: &RunConfig, balls: &[Ball]) -> Result<Dictionary> {
    cfg.dictionary_or(|| {
        let u = BallUnion::new(balls.to_vec())?;
        let enc = u.enclosing_ball().ok_or_else(|| Error::parameter("no balls"))?;
        let r = balls.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
        standard_dictionary(&cfg.kernel, &cfg.domain, &enc.center, &u.centers(), &[], 0.25 * r)
    })
}

fn required_dictionary(cfg: &RunConfig, what: &str) -> Result<Dictionary> {
    cfg.dictionary_or(|| Err(Error::Config(format!("{what} needs a `dictionary`"))))
}

struct Balayage;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BalayageParams {
    balls: Vec<Ball>,
    #[serde(default)]
    outer: Option<OpenSet>,
}

impl Balayage {
    fn prepare(cfg: &RunConfig) -> Result<(BalayageParams, StopSet)> {
        cfg.check_common()?;
        let p: BalayageParams = cfg.params()?;
        let stop = StopSet::new(BallUnion::new(p.balls.clone())?, p.outer.clone(), cfg.domain)?;
        Ok((p, stop))
    }
}

impl Experiment for Balayage {
    fn name(&self) -> &'static str {
        "balayage"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        let (p, _) = Self::prepare(cfg)?;
        cfg.measure()?;
        let mut d = echo(cfg);
        d.push(format!("stop balls: {}", p.balls.len()));
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        let (p, stop) = Self::prepare(cfg)?;
        let nu = cfg.measure()?;
        let dict = ball_dictionary(cfg, &p.balls)?;
        let mut rep = ExperimentReport::new("balayage");
        rep.param("kernel", cfg.kernel);
        rep.param("balls", &p.balls);
        rep.param("outer", &p.outer);
        rep.param("samples", cfg.mc.samples);
        rep.param("seed", cfg.mc.seed);
        let source = integrals(&nu, &dict, &cfg.kernel)?;
        rep.record("initial", None, &nu, &dict, &cfg.kernel, 0)?;
        let swept = balayage_measure(&nu, &stop, &cfg.kernel, &cfg.mc)?;
        let ints = rep.record("swept", None, &swept, &dict, &cfg.kernel, cfg.mc.samples)?;
        rep.monotone_gate("swept", &source, &ints, &dict);
        rep.param("ball_masses", ball_masses(&swept, stop.len()));
        rep.param("walk_stats", &swept.stats);
        let defect = swept.conservation_defect();
        rep.check("conservation", defect <= 1e-12, defect, 1e-12, 0.0);
        Ok(rep)
    }
}

struct Shrink;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShrinkParams {
    balls: Vec<Ball>,
    #[serde(default)]
    outer: Option<OpenSet>,
    partition: Vec<usize>,
    mode: ShrinkMode,
    #[serde(default)]
    cells: Option<Vec<usize>>,
    #[serde(default = "default_solver")]
    solver: String,
    #[serde(default)]
    options: ShrinkOptions,
}

fn default_solver() -> String {
    "coordinate-bisection".into()
}

impl Shrink {
    fn prepare(cfg: &RunConfig) -> Result<(ShrinkParams, ShrinkProblem)> {
        cfg.check_common()?;
        let p: ShrinkParams = cfg.params()?;
        shrink_solver(&p.solver)?;
        let stop = StopSet::new(BallUnion::new(p.balls.clone())?, p.outer.clone(), cfg.domain)?;
        let problem = ShrinkProblem {
            stop,
            source: cfg.measure()?,
            partition: p.partition.clone(),
            mode: p.mode.clone(),
            cells: p.cells.clone(),
        };
        problem.validate(&cfg.kernel)?;
        Ok((p, problem))
    }
}

impl Experiment for Shrink {
    fn name(&self) -> &'static str {
        "shrink"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        let (p, problem) = Self::prepare(cfg)?;
        let mut d = echo(cfg);
        d.push(format!("solver: {}, balls: {}, groups: {}", p.solver, p.balls.len(), problem.groups()));
        if let ShrinkMode::Joint { delta, .. } | ShrinkMode::JointScaled { delta, .. } = p.mode {
            let r = problem.delta_report(delta, &cfg.kernel)?;
            d.push(format!("δ-family: δ = {delta}, δ₀ = {}, min slack {:.3e}", r.delta0, r.min_slack));
            for b in &r.balls {
                d.push(format!(
                    "  ball {}: radius {:.6}, allowed {:.6}, slack {:.3e}",
                    b.index, b.radius, b.allowed_radius, b.slack
                ));
            }
        }
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        let (p, problem) = Self::prepare(cfg)?;
        let solver = shrink_solver(&p.solver)?;
        let sol = solve(&problem, &cfg.kernel, &cfg.mc, &p.options, solver.as_ref())?;
        let mut rep = ExperimentReport::new("shrink");
        rep.param("kernel", cfg.kernel);
        rep.param("balls", &p.balls);
        rep.param("mode", &p.mode);
        rep.param("samples", cfg.mc.samples);
        rep.param("seed", cfg.mc.seed);
        rep.param("solution", &sol);
        for (i, ((a, t), tol)) in sol.achieved.iter().zip(&sol.targets).zip(&sol.tolerances).enumerate() {
            let r = (a.value - t.value).abs();
            rep.check(format!("residual:{i}"), r <= *tol, r, *tol, a.stderr.hypot(t.stderr));
        }
        rep.check("converged", sol.converged, sol.sweeps as f64, p.options.max_sweeps as f64, 0.0);
        rep.check("revalidated", sol.revalidated, sol.max_residual(), 0.0, 0.0);
        for w in &sol.warnings {
            rep.warn(w.clone());
        }
        Ok(rep)
    }
}

struct Theorem;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TheoremParams {
    w: OpenSet,
    sets: Vec<OpenSet>,
    lambda: Vec<f64>,
    eta: f64,
    #[serde(default)]
    overrides: PipelineOverrides,
}

impl Theorem {
    fn prepare(cfg: &RunConfig) -> Result<TheoremParams> {
        cfg.check_common()?;
        cfg.measure()?;
        let p: TheoremParams = cfg.params()?;
        simplex(&p.lambda, p.sets.len())?;
        if !(p.eta > 0.0) {
            return Err(Error::parameter("η must be positive"));
        }
        for (i, a) in cfg.nu.iter().enumerate() {
            if !p.w.contains(&a.point) {
                return Err(Error::precondition(format!("atom {i} of ν lies outside W")));
            }
        }
        Ok(p)
    }
}

impl Experiment for Theorem {
    fn name(&self) -> &'static str {
        "theorem"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        let p = Self::prepare(cfg)?;
        let mut d = echo(cfg);
        d.push(format!("sets: {}, λ = {:?}, η = {}", p.sets.len(), p.lambda, p.eta));
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        let p = Self::prepare(cfg)?;
        let nu = cfg.measure()?;
        let out = run_theorem_pipeline(&TheoremInput {
            nu: &nu,
            w: &p.w,
            sets: &p.sets,
            lambda: &p.lambda,
            eta: p.eta,
            domain: &cfg.domain,
            kernel: &cfg.kernel,
            mc: &cfg.mc,
            overrides: &p.overrides,
            ball_filter: None,
        })?;
        let mut rep = out.report;
        rep.param("c_balls", out.c.balls());
        Ok(rep)
    }
}

struct Corollary;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorollaryParams {
    sets: Vec<Ball>,
    lambda: Vec<f64>,
    eta: f64,
    ladder: Vec<u32>,
    #[serde(default)]
    overrides: PipelineOverrides,
}

impl Corollary {
    fn prepare(cfg: &RunConfig) -> Result<CorollaryParams> {
        cfg.check_common()?;
        cfg.measure()?;
        let p: CorollaryParams = cfg.params()?;
        simplex(&p.lambda, p.sets.len())?;
        Ok(p)
    }
}

impl Experiment for Corollary {
    fn name(&self) -> &'static str {
        "corollary"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        let p = Self::prepare(cfg)?;
        let mut d = echo(cfg);
        d.push(format!("sets: {}, ladder {:?}", p.sets.len(), p.ladder));
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        let p = Self::prepare(cfg)?;
        let nu = cfg.measure()?;
        run_corollary_1_4(&CorollaryInput {
            nu: &nu,
            sets: &p.sets,
            lambda: &p.lambda,
            eta: p.eta,
            ladder: &p.ladder,
            domain: &cfg.domain,
            kernel: &cfg.kernel,
            mc: &cfg.mc,
            overrides: &p.overrides,
        })
    }
}

struct GridApprox;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridParams {
    u: OpenSet,
    w: OpenSet,
    options: GridApproxOptions,
}

impl GridApprox {
    fn prepare(cfg: &RunConfig) -> Result<(GridParams, Dictionary)> {
        cfg.check_common()?;
        cfg.measure()?;
        let p: GridParams = cfg.params()?;
        let dict = required_dictionary(cfg, "grid-approx")?;
        if p.options.ladder.is_empty() {
            return Err(Error::parameter("ladder must not be empty"));
        }
        Ok((p, dict))
    }
}

impl Experiment for GridApprox {
    fn name(&self) -> &'static str {
        "grid-approx"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        let (p, dict) = Self::prepare(cfg)?;
        let mut d = echo(cfg);
        d.push(format!("ladder {:?}, scale {}, {} test functions", p.options.ladder, p.options.scale, dict.len()));
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        let (p, dict) = Self::prepare(cfg)?;
        let nu = cfg.measure()?;
        approximate_open_balayage(&GridApproxInput {
            nu: &nu,
            u: &p.u,
            w: &p.w,
            domain: &cfg.domain,
            kernel: &cfg.kernel,
            dict: &dict,
            options: &p.options,
            mc: &cfg.mc,
        })
    }
}

struct Jensen;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JensenParams {
    x: Point,
    omega: OpenSet,
    a: Vec<Ball>,
}

impl Jensen {
    fn prepare(cfg: &RunConfig) -> Result<(JensenParams, Dictionary)> {
        cfg.check_common()?;
        let p: JensenParams = cfg.params()?;
        let dict = required_dictionary(cfg, "jensen")?;
        if !p.a.iter().any(|b| b.contains_open(&p.x)) {
            return Err(Error::precondition("x must lie in the interior of A"));
        }
        Ok((p, dict))
    }
}

impl Experiment for Jensen {
    fn name(&self) -> &'static str {
        "jensen"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        let (p, dict) = Self::prepare(cfg)?;
        let mut d = echo(cfg);
        d.push(format!("A: {} balls, {} test functions", p.a.len(), dict.len()));
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        let (p, dict) = Self::prepare(cfg)?;
        jensen_demo(&JensenInput {
            x: p.x,
            omega: &p.omega,
            a: &p.a,
            domain: &cfg.domain,
            kernel: &cfg.kernel,
            dict: &dict,
            mc: &cfg.mc,
        })
    }
}

struct Skorokhod;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SkorokhodParams {
    c: Vec<Ball>,
    #[serde(default)]
    path: PathParams,
}

impl Skorokhod {
    fn prepare(cfg: &RunConfig) -> Result<(SkorokhodParams, BallUnion)> {
        cfg.check_common()?;
        cfg.measure()?;
        let p: SkorokhodParams = cfg.params()?;
        let c = BallUnion::new(p.c.clone())?;
        Ok((p, c))
    }
}

impl Experiment for Skorokhod {
    fn name(&self) -> &'static str {
        "skorokhod"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        let (p, _) = Self::prepare(cfg)?;
        let mut d = echo(cfg);
        d.push(format!("C: {} balls, path {:?}", p.c.len(), p.path));
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        let (p, c) = Self::prepare(cfg)?;
        let nu = cfg.measure()?;
        let dict = ball_dictionary(cfg, &p.c)?;
        skorokhod_demo(&SkorokhodInput {
            nu: &nu,
            c: &c,
            domain: &cfg.domain,
            kernel: &cfg.kernel,
            dict: &dict,
            mc: &cfg.mc,
            path: &p.path,
        })
    }
}

struct Harnack;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HarnackParams {
    deltas: Vec<f64>,
    #[serde(default = "default_triples")]
    triples: usize,
    /// Run the swept-measure checks in the configured domain.
    #[serde(default = "yes")]
    swept: bool,
}

fn default_triples() -> usize {
    100_000
}

fn yes() -> bool {
    true
}

impl Experiment for Harnack {
    fn name(&self) -> &'static str {
        "harnack"
    }

    fn validate(&self, cfg: &RunConfig) -> Result<Vec<String>> {
        cfg.check_common()?;
        let p: HarnackParams = cfg.params()?;
        let mut d = echo(cfg);
        d.push(format!("δ grid {:?}, {} triples", p.deltas, p.triples));
        Ok(d)
    }

    fn run(&self, cfg: &RunConfig) -> Result<ExperimentReport> {
        cfg.check_common()?;
        let p: HarnackParams = cfg.params()?;
        harnack_audit(&HarnackInput {
            kernel: &cfg.kernel,
            deltas: &p.deltas,
            triples: p.triples,
            domain: p.swept.then_some(&cfg.domain),
            mc: &cfg.mc,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_every_experiment() {
        let r = Registry::default();
        let names: Vec<_> = r.names().collect();
        assert_eq!(
            names,
            ["balayage", "corollary", "grid-approx", "harnack", "jensen", "shrink", "skorokhod", "theorem"]
        );
        assert!(matches!(r.get("nope"), Err(Error::Unknown { .. })));
    }

    #[test]
    fn simplex_diagnostic() {
        assert!(simplex(&[0.5, 0.5], 2).is_ok());
        let e = simplex(&[0.6, 0.6], 2).unwrap_err().to_string();
        assert!(e.contains("simplex violation"), "{e}");
    }
}
