//! Seeded random geometries and the iterated-balayage inequalities, shared
//! by the integration tests and the acceptance harness.
#![allow(dead_code)]

use balayage::engine::{ball_masses, balayage_measure, McParams, StopSet};
use balayage::geometry::{Ball, BallUnion, DomainSpec};
use balayage::kernels::KernelSpec;
use balayage::measure::{Site, WeightedMeasure};
use balayage::rng::{walk_rng, WalkRng};
use balayage::Point;
use rand::Rng;

/// One inequality instance: `lhs >= rhs - 3 se` is the claim.
#[derive(Debug, Clone, Copy)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub se: f64,
}

impl Inequality {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - 3.0 * self.se
    }
}

fn uniform_box(rng: &mut WalkRng, d: usize, half: f64) -> Point {
    let mut p = Point::zero(d);
    for a in 0..d {
        p[a] = rng.random_range(-half..half);
    }
    p
}

/// `n` pairwise disjoint balls with radii in [0.3, 0.8] and centres in
/// [-2.5, 2.5]^d, separated by at least 0.1.
pub fn random_union(rng: &mut WalkRng, d: usize, n: usize) -> BallUnion {
    let mut balls: Vec<Ball> = Vec::with_capacity(n);
    while balls.len() < n {
        let b = Ball { center: uniform_box(rng, d, 2.5), radius: rng.random_range(0.3..0.8) };
        if balls.iter().all(|o| o.center.dist(&b.center) > o.radius + b.radius + 0.1) {
            balls.push(b);
        }
    }
    BallUnion::new(balls).expect("disjoint by construction")
}

/// A start point at distance >= 0.2 from every ball of every union, within
/// distance 4.5 of the origin.
pub fn outside_point(rng: &mut WalkRng, unions: &[&BallUnion]) -> Point {
    let d = unions[0].dim().expect("non-empty union");
    loop {
        let x = uniform_box(rng, d, 3.5);
        if unions.iter().all(|u| u.dist_to(&x) >= 0.2) && x.norm() < 4.5 {
            return x;
        }
    }
}

/// Sub-union comparison: with Ã the union of B_i^{t_i} (t_i = 1 for about half of the
/// balls) and ν = ε_x, ν^Ã(B_i^{t_i}) >= ν^A(B_i^{t_i}) for every i.
pub fn iterated_sub_union(k: &KernelSpec, balls: usize, geometry: u64, samples: usize) -> Vec<Inequality> {
    let d = k.dim();
    let mut rng = walk_rng(geometry, 0x31);
    let a = random_union(&mut rng, d, balls);
    let x = outside_point(&mut rng, &[&a]);
    let t: Vec<f64> = (0..balls).map(|_| if rng.random::<bool>() { 1.0 } else { rng.random_range(0.3..0.9) }).collect();
    let domain = DomainSpec::full_space(d);
    let mc = McParams::default().with_samples(samples).with_seed(geometry);
    let nu = WeightedMeasure::dirac(x);

    let full = StopSet::balls_only(a.clone(), domain).unwrap();
    let sub = full.with_factors(&t).unwrap();
    let on_sub = ball_masses(&balayage_measure(&nu, &sub, k, &mc).unwrap(), balls);
    let swept = balayage_measure(&nu, &full, k, &mc).unwrap();
    let in_sub = swept.grouped_mass(balls, |atom| match atom.site {
        Site::Ball(i) => {
            let i = i as usize;
            let b = a.balls()[i];
            (t[i] == 1.0 || atom.point.dist(&b.center) <= t[i] * b.radius).then_some(i)
        }
        _ => None,
    });
    on_sub
        .iter()
        .zip(&in_sub)
        .map(|(l, r)| Inequality { lhs: l.value, rhs: r.value, se: l.stderr.hypot(r.stderr) })
        .collect()
}

/// Two-stage mass: (ν^A)^B(B) <= ν^B(B) for two random 2-ball unions A, B (which
/// may intersect each other), with common seeds.
pub fn two_stage_mass(k: &KernelSpec, geometry: u64, samples: usize) -> Inequality {
    let d = k.dim();
    let mut rng = walk_rng(geometry, 0x32);
    let a = random_union(&mut rng, d, 2);
    let b = random_union(&mut rng, d, 2);
    let x = outside_point(&mut rng, &[&a, &b]);
    let domain = DomainSpec::full_space(d);
    let mc = McParams::default().with_samples(samples).with_seed(geometry);
    let nu = WeightedMeasure::dirac(x);
    let stop_a = StopSet::balls_only(a, domain).unwrap();
    let stop_b = StopSet::balls_only(b, domain).unwrap();
    let direct = balayage_measure(&nu, &stop_b, k, &mc).unwrap().mass();
    let first = balayage_measure(&nu, &stop_a, k, &mc).unwrap();
    let two = balayage_measure(&first, &stop_b, k, &mc).unwrap().mass();
    Inequality { lhs: direct.value, rhs: two.value, se: direct.stderr.hypot(two.stderr) }
}
