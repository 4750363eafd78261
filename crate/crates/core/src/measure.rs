//! Finite atomic measures with Monte Carlo bookkeeping.
//!
//! Atoms produced by walks remember the estimation block they came from and
//! their walk number inside it. A block of N walks is an i.i.d. sample; the
//! standard error of Σ w·q is computed per block from per-walk sums, lost
//! walks counting as zeros.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::point::Point;
use crate::potential::{Dictionary, PotentialSpec};

/// Where an atom sits relative to the stop set that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Site {
    Free,
    Ball(u32),
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
    pub site: Site,
    pub steps: u32,
    pub block: u32,
    pub walk: u32,
}

/// A value with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// Difference of independent estimates.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate {
            value: self.value - other.value,
            stderr: self.stderr.hypot(other.stderr),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WalkStats {
    pub walks: u64,
    pub absorbed: u64,
    pub killed: u64,
    pub escaped: u64,
    pub step_limited: u64,
    pub total_steps: u64,
}

impl WalkStats {
    pub fn merge(&mut self, o: &WalkStats) {
        self.walks += o.walks;
        self.absorbed += o.absorbed;
        self.killed += o.killed;
        self.escaped += o.escaped;
        self.step_limited += o.step_limited;
        self.total_steps += o.total_steps;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    atoms: Vec<Atom>,
    /// Walk count per block; 0 marks a deterministic block.
    blocks: Vec<u64>,
    pub lost_mass: f64,
    pub total_input: f64,
    pub stats: WalkStats,
    pub warnings: Vec<String>,
}

impl WeightedMeasure {
    pub fn zero() -> Self {
        WeightedMeasure {
            atoms: Vec::new(),
            blocks: Vec::new(),
            lost_mass: 0.0,
            total_input: 0.0,
            stats: WalkStats::default(),
            warnings: Vec::new(),
        }
    }

    /// Deterministic measure from (point, weight) pairs.
    pub fn from_atoms(atoms: &[(Point, f64)]) -> Result<Self> {
        let mut m = WeightedMeasure::zero();
        if atoms.is_empty() {
            return Ok(m);
        }
        m.blocks.push(0);
        for (i, &(x, w)) in atoms.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) || !x.is_finite() {
                return Err(Error::parameter(format!("atom {i}: weights must be finite and >= 0")));
            }
            m.atoms.push(Atom {
                point: x,
                weight: w,
                site: Site::Free,
                steps: 0,
                block: 0,
                walk: i as u32,
            });
            m.total_input += w;
        }
        Ok(m)
    }

    pub fn dirac(x: Point) -> Self {
        WeightedMeasure::from_atoms(&[(x, 1.0)]).expect("unit atom")
    }

    pub(crate) fn from_parts(atoms: Vec<Atom>, blocks: Vec<u64>, lost_mass: f64, total_input: f64) -> Self {
        WeightedMeasure {
            atoms,
            blocks,
            lost_mass,
            total_input,
            stats: WalkStats::default(),
            warnings: Vec::new(),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn blocks(&self) -> &[u64] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_deterministic(&self) -> bool {
        self.blocks.iter().all(|&n| n == 0)
    }

    pub fn dim(&self) -> Option<usize> {
        self.atoms.first().map(|a| a.point.dim())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// |Σ weights + lost − input| relative to the input.
    pub fn conservation_defect(&self) -> f64 {
        let t = self.total_input.max(f64::MIN_POSITIVE);
        (self.total_mass() + self.lost_mass - self.total_input).abs() / t
    }

    /// Sum of two measures (blocks kept apart).
    pub fn plus(&self, other: &WeightedMeasure) -> WeightedMeasure {
        let offset = self.blocks.len() as u32;
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().map(|a| Atom {
            block: a.block + offset,
            ..*a
        }));
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        let mut stats = self.stats.clone();
        stats.merge(&other.stats);
        let mut warnings = self.warnings.clone();
        warnings.extend(other.warnings.iter().cloned());
        WeightedMeasure {
            atoms,
            blocks,
            lost_mass: self.lost_mass + other.lost_mass,
            total_input: self.total_input + other.total_input,
            stats,
            warnings,
        }
    }

    /// Multiplies every weight (and the bookkeeping) by `c >= 0`.
    pub fn scaled(&self, c: f64) -> WeightedMeasure {
        let mut m = self.clone();
        for a in &mut m.atoms {
            a.weight *= c;
        }
        m.lost_mass *= c;
        m.total_input *= c;
        m
    }

    /// Keeps the atoms satisfying `keep`; removed mass leaves the input.
    pub fn filtered<F: Fn(&Atom) -> bool>(&self, keep: F) -> WeightedMeasure {
        let mut m = self.clone();
        let before = m.total_mass();
        m.atoms.retain(|a| keep(a));
        m.total_input -= before - m.total_mass();
        m
    }

    /// Estimate of Σ f(atom)·weight with the block-level standard error.
    pub fn sum_by<F: FnMut(&Atom) -> Result<f64>>(&self, mut f: F) -> Result<Estimate> {
        let mut value = 0.0;
        let mut per_walk: Vec<(u32, u32, f64)> = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let v = a.weight * f(a)?;
            value += v;
            if self.blocks[a.block as usize] > 0 {
                per_walk.push((a.block, a.walk, v));
            }
        }
        per_walk.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut var = 0.0;
        let mut i = 0;
        while i < per_walk.len() {
            let block = per_walk[i].0;
            let n = self.blocks[block as usize] as f64;
            let (mut s1, mut s2) = (0.0, 0.0);
            while i < per_walk.len() && per_walk[i].0 == block {
                let walk = per_walk[i].1;
                let mut y = 0.0;
                while i < per_walk.len() && per_walk[i].0 == block && per_walk[i].1 == walk {
                    y += per_walk[i].2;
                    i += 1;
                }
                s1 += y;
                s2 += y * y;
            }
            if n > 1.0 {
                var += ((n * s2 - s1 * s1) / (n - 1.0)).max(0.0);
            }
        }
        Ok(Estimate {
            value,
            stderr: var.sqrt(),
        })
    }

    /// Σ weight over atoms with `key(atom) == Some(j)`, for every j < n, in
    /// one pass. Same block-level errors as `sum_by`.
    pub fn grouped_mass<F: Fn(&Atom) -> Option<usize>>(&self, n: usize, key: F) -> Vec<Estimate> {
        let mut out = vec![Estimate::default(); n];
        let mut rows: Vec<(usize, u32, u32, f64)> = Vec::new();
        for a in &self.atoms {
            let Some(j) = key(a) else { continue };
            if j >= n {
                continue;
            }
            out[j].value += a.weight;
            if self.blocks[a.block as usize] > 0 {
                rows.push((j, a.block, a.walk, a.weight));
            }
        }
        rows.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));
        let mut var = vec![0.0; n];
        let mut i = 0;
        while i < rows.len() {
            let (j, block) = (rows[i].0, rows[i].1);
            let nb = self.blocks[block as usize] as f64;
            let (mut s1, mut s2) = (0.0, 0.0);
            while i < rows.len() && rows[i].0 == j && rows[i].1 == block {
                let walk = rows[i].2;
                let mut y = 0.0;
                while i < rows.len() && rows[i].0 == j && rows[i].1 == block && rows[i].2 == walk {
                    y += rows[i].3;
                    i += 1;
                }
                s1 += y;
                s2 += y * y;
            }
            if nb > 1.0 {
                var[j] += ((nb * s2 - s1 * s1) / (nb - 1.0)).max(0.0);
            }
        }
        for (o, v) in out.iter_mut().zip(var) {
            o.stderr = v.sqrt();
        }
        out
    }

    /// ∫ q dμ with standard error.
    pub fn integrate(&self, q: &PotentialSpec, k: &KernelSpec) -> Result<Estimate> {
        self.sum_by(|a| q.eval(&a.point, k))
    }

    pub fn mass(&self) -> Estimate {
        self.sum_by(|_| Ok(1.0)).expect("infallible")
    }

    /// Mass carried by atoms with the given site label.
    pub fn site_mass(&self, site: Site) -> Estimate {
        self.sum_by(|a| Ok(if a.site == site { 1.0 } else { 0.0 }))
            .expect("infallible")
    }
}

/// Per-function comparison of two measures on a dictionary.
#[derive(Debug, Clone, Serialize)]
pub struct WeakDistance {
    pub distance: f64,
    /// stderr of the difference attaining the maximum
    pub stderr: f64,
    /// largest combined stderr over the dictionary
    pub max_stderr: f64,
    pub rows: Vec<DistanceRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceRow {
    pub function: String,
    pub first: Estimate,
    pub second: Estimate,
    pub difference: f64,
    pub stderr: f64,
}

impl WeakDistance {
    /// Whether every row agrees within `z` combined standard errors plus `slack`.
    pub fn within(&self, z: f64, slack: f64) -> bool {
        self.rows.iter().all(|r| r.difference.abs() <= z * r.stderr + slack)
    }
}

/// max_q |∫q dμ₁ − ∫q dμ₂| with per-function values and combined errors
/// (treated as independent).
pub fn weak_distance(
    m1: &WeightedMeasure,
    m2: &WeightedMeasure,
    dict: &Dictionary,
    k: &KernelSpec,
) -> Result<WeakDistance> {
    let mut rows = Vec::with_capacity(dict.members.len());
    for q in &dict.members {
        let a = m1.integrate(q, k)?;
        let b = if std::ptr::eq(m1, m2) { a } else { m2.integrate(q, k)? };
        let diff = if std::ptr::eq(m1, m2) {
            Estimate::exact(0.0)
        } else {
            a.minus(&b)
        };
        rows.push(DistanceRow {
            function: q.name.clone(),
            first: a,
            second: b,
            difference: diff.value,
            stderr: diff.stderr,
        });
    }
    let (distance, stderr) = rows
        .iter()
        .map(|r| (r.difference.abs(), r.stderr))
        .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
    let max_stderr = rows.iter().map(|r| r.stderr).fold(0.0, f64::max);
    Ok(WeakDistance {
        distance,
        stderr,
        max_stderr,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{standard_dictionary, PotentialKind};

    #[test]
    fn single_atom_integral() {
        let k = KernelSpec::classical(3).unwrap();
        let x = Point::new(&[1.0, 2.0, 2.0]);
        let q = PotentialSpec::new("q", PotentialKind::NewtonKernel { pole: Point::zero(3) });
        let e = WeightedMeasure::dirac(x).integrate(&q, &k).unwrap();
        assert!((e.value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(WeightedMeasure::zero().integrate(&q, &k).unwrap().value, 0.0);
    }

    #[test]
    fn weak_distance_examples() {
        let k = KernelSpec::classical(3).unwrap();
        let x = Point::new(&[0.5, 0.0, 0.0]);
        let dict = standard_dictionary(
            &k,
            &crate::geometry::DomainSpec::full_space(3),
            &Point::zero(3),
            &[Point::zero(3), Point::new(&[2.0, 0.0, 0.0])],
            &[(x, 1.0)],
            0.1,
        )
        .unwrap();
        let a = WeightedMeasure::dirac(x);
        assert_eq!(weak_distance(&a, &a, &dict, &k).unwrap().distance, 0.0);
        let b = WeightedMeasure::from_atoms(&[(x, 0.5)]).unwrap();
        let w = weak_distance(&a, &b, &dict, &k).unwrap();
        let max_q = dict
            .members
            .iter()
            .map(|q| q.eval(&x, &k).unwrap())
            .fold(0.0, f64::max);
        assert!((w.distance - 0.5 * max_q).abs() < 1e-15);
    }

    #[test]
    fn block_variance_matches_sample_formula() {
        // 4 walks of weight 1/4; two hit values 1 and 3, one lost, one 2
        let x = Point::new(&[0.0, 0.0]);
        let atoms: Vec<Atom> = [(0u32, 1.0), (1, 3.0), (3, 2.0)]
            .iter()
            .map(|&(w, v)| Atom {
                point: Point::new(&[v, 0.0]),
                weight: 0.25,
                site: Site::Free,
                steps: 1,
                block: 0,
                walk: w,
            })
            .collect();
        let m = WeightedMeasure::from_parts(atoms, vec![4], 0.25, 1.0);
        let e = m.sum_by(|a| Ok(a.point.dist(&x))).unwrap();
        // per-walk values y = v/4: 0.25, 0.75, 0, 0.5
        let ys = [0.25, 0.75, 0.0, 0.5];
        let mean: f64 = ys.iter().sum::<f64>() / 4.0;
        let s2: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((e.value - 1.5).abs() < 1e-15);
        assert!((e.stderr - (4.0 * s2).sqrt()).abs() < 1e-15);
        assert!(m.conservation_defect() < 1e-15);
    }
}
