//! Experiments built on the engine and the shrink solvers.
//!
//! Every experiment returns an [`ExperimentReport`]: dictionary integrals of
//! each intermediate measure, the weak distances it was asked to achieve,
//! named pass/fail checks, a parameter log and warnings. Numbers always
//! travel with their standard error and walk budget.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::engine::{balayage_measure, McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{BallUnion, DomainSpec, OpenSet};
use crate::kernels::KernelSpec;
use crate::measure::{weak_distance, Estimate, WeakDistance, WeightedMeasure};
use crate::potential::Dictionary;

pub mod corollary;
pub mod grid_approx;
pub mod harnack;
pub mod jensen;
pub mod skorokhod;
pub mod theorem;

pub use corollary::{run_corollary_1_4, CorollaryInput};
pub use grid_approx::{approximate_open_balayage, GridApproxInput};
pub use harnack::{harnack_audit, HarnackInput};
pub use jensen::{jensen_demo, JensenInput};
pub use skorokhod::{skorokhod_demo, PathParams, SkorokhodInput};
pub use theorem::{run_theorem_pipeline, PipelineOverrides, PipelineParams, TheoremInput, TheoremOutput};

/// Dictionary integrals of one measure.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub level: Option<u32>,
    pub mass: Estimate,
    pub lost_mass: f64,
    pub walks: u64,
    pub samples: usize,
    pub integrals: Vec<(String, Estimate)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedDistance {
    pub name: String,
    pub level: Option<u32>,
    pub distance: f64,
    pub stderr: f64,
    pub samples: usize,
    pub rows: Vec<crate::measure::DistanceRow>,
}

/// A pass/fail gate: `value <= bound` unless stated otherwise in the name.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: BTreeMap<String, Value>,
    pub stages: Vec<StageRecord>,
    pub distances: Vec<NamedDistance>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds. Kept out of the JSON so that reports are
    /// byte-identical across runs.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            parameters: BTreeMap::new(),
            stages: Vec::new(),
            distances: Vec::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
            runtime_seconds: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_string(), v);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, value: f64, bound: f64, stderr: f64) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            value,
            bound,
            stderr,
        });
    }

    /// `value <= bound + 3σ`.
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, bound: f64, stderr: f64) -> bool {
        let passed = value <= bound + 3.0 * stderr;
        self.check(name, passed, value, bound, stderr);
        passed
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Checks produced by the balayage monotonicity gate.
    pub fn monotonicity_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.name.starts_with(MONOTONE_PREFIX))
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn distance(&self, name: &str) -> Option<&NamedDistance> {
        self.distances.iter().find(|d| d.name == name)
    }

    pub fn record(
        &mut self,
        stage: &str,
        level: Option<u32>,
        m: &WeightedMeasure,
        dict: &Dictionary,
        k: &KernelSpec,
        samples: usize,
    ) -> Result<Vec<Estimate>> {
        let integrals = integrals(m, dict, k)?;
        self.stages.push(StageRecord {
            stage: stage.to_string(),
            level,
            mass: m.mass(),
            lost_mass: m.lost_mass,
            walks: m.stats.walks,
            samples,
            integrals: dict.members.iter().map(|q| q.name.clone()).zip(integrals.iter().copied()).collect(),
        });
        for w in &m.warnings {
            self.warn(format!("{stage}: {w}"));
        }
        Ok(integrals)
    }

    pub fn record_distance(&mut self, name: &str, level: Option<u32>, w: &WeakDistance, samples: usize) {
        self.distances.push(NamedDistance {
            name: name.to_string(),
            level,
            distance: w.distance,
            stderr: w.stderr,
            samples,
            rows: w.rows.clone(),
        });
    }

    /// Balayage does not increase potentials: ∫q dν^S <= ∫q dν for every
    /// superharmonic dictionary member, at 3σ.
    pub fn monotone_gate(
        &mut self,
        stage: &str,
        source: &[Estimate],
        swept: &[Estimate],
        dict: &Dictionary,
    ) {
        for ((q, s), t) in dict.members.iter().zip(source).zip(swept) {
            if !q.is_superharmonic() {
                continue;
            }
            let se = s.stderr.hypot(t.stderr);
            self.check_le(format!("{MONOTONE_PREFIX}{stage}:{}", q.name), t.value, s.value, se);
        }
    }

    /// Sweeps `source` onto `stop`, records the stage and applies the
    /// monotonicity gate against the recorded source integrals.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn sweep(
        &mut self,
        stage: &str,
        level: Option<u32>,
        source: &WeightedMeasure,
        source_integrals: &[Estimate],
        stop: &StopSet,
        k: &KernelSpec,
        mc: &McParams,
        dict: &Dictionary,
    ) -> Result<(WeightedMeasure, Vec<Estimate>)> {
        let swept = balayage_measure(source, stop, k, mc)?;
        let ints = self.record(stage, level, &swept, dict, k, mc.samples)?;
        self.monotone_gate(stage, source_integrals, &ints, dict);
        Ok((swept, ints))
    }
}

pub const MONOTONE_PREFIX: &str = "balayage-monotone:";

pub fn integrals(m: &WeightedMeasure, dict: &Dictionary, k: &KernelSpec) -> Result<Vec<Estimate>> {
    dict.members.iter().map(|q| m.integrate(q, k)).collect()
}

/// The stop set U ∪ W^c for an open set U ⊂ W.
///
/// A ball union U stops on its closed balls, which have the same first-hit
/// law as the open ones. U = W \ E with E a closed ball union is the complement
/// of E, i.e. exit from the interior of E.
pub fn open_set_stop(u: &OpenSet, w: &OpenSet, domain: &DomainSpec) -> Result<StopSet> {
    match u {
        OpenSet::Balls { balls } => StopSet::new(BallUnion::new_unchecked(balls.clone()), Some(w.clone()), *domain),
        OpenSet::Minus { outer, removed } if outer.as_ref() == w => {
            StopSet::new(BallUnion::empty(), Some(OpenSet::balls(removed.clone())), *domain)
        }
        OpenSet::Domain { .. } => StopSet::new(BallUnion::empty(), None, *domain),
        _ => Err(Error::parameter("U must be a ball union or W minus closed balls")),
    }
}

pub(crate) fn distance(a: &WeightedMeasure, b: &WeightedMeasure, dict: &Dictionary, k: &KernelSpec) -> Result<WeakDistance> {
    weak_distance(a, b, dict, k)
}

/// Spearman rank correlation of (x_i, y_i); ties get average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &t in &idx[i..=j] {
                r[t] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::spearman;

    #[test]
    fn spearman_extremes() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[0.3, 0.2, 0.1]) + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]) - 1.0).abs() < 1e-15);
        // classic example with a tie
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 2.0]);
        assert!((r - 0.316227766016838).abs() < 1e-12, "{r}");
    }
}
