//! Exit distributions ε_x^{A^c} from the interior of a ball union A are
//! Jensen measures: ∫v dμ <= v(x) for superharmonic v, with equality when
//! v is harmonic near Ā.

use super::{integrals, ExperimentReport};
use crate::engine::{balayage_measure, McParams, StopSet};
use crate::error::{Error, Result};
use crate::geometry::{Ball, BallUnion, DomainSpec, OpenSet};
use crate::kernels::KernelSpec;
use crate::measure::WeightedMeasure;
use crate::point::Point;
use crate::potential::{Dictionary, PotentialKind, PotentialSpec};

pub struct JensenInput<'a> {
    pub x: Point,
    pub omega: &'a OpenSet,
    /// Closed balls whose union is A (they may overlap).
    pub a: &'a [Ball],
    pub domain: &'a DomainSpec,
    pub kernel: &'a KernelSpec,
    pub dict: &'a Dictionary,
    pub mc: &'a McParams,
}

/// Distance t from the pole with scale·t^{α-d} = cap, for radial kernels.
fn cap_distance(q: &PotentialSpec, k: &KernelSpec) -> Option<f64> {
    let power = match q.kind {
        PotentialKind::NewtonKernel { .. } => 2.0 - k.dim() as f64,
        PotentialKind::RieszKernel { .. } => k.alpha() - k.dim() as f64,
        _ => return None,
    };
    Some(match q.cap {
        Some(c) => (c / q.scale).powf(1.0 / power),
        None => 0.0,
    })
}

/// Whether q is harmonic on a neighbourhood of Ā.
fn harmonic_near(q: &PotentialSpec, k: &KernelSpec, a: &[Ball]) -> bool {
    let (Some(pole), Some(t)) = (q.pole(), cap_distance(q, k)) else {
        return false;
    };
    a.iter().all(|b| b.dist_to(&pole) > t)
}

/// ∫ q dε_x^{B^c} for a radial kernel with pole inside B = B(c, R) and the
/// cap inactive on ∂B: by the Kelvin transform the boundary values agree
/// with (R/t)^{d-2} |· - z*|^{2-d}, harmonic in B.
pub fn newton_sphere_average(q: &PotentialSpec, b: &Ball, x: &Point, k: &KernelSpec) -> Option<f64> {
    let PotentialKind::NewtonKernel { pole } = q.kind else {
        return None;
    };
    let d = k.dim() as i32;
    let t = pole.dist(&b.center);
    if t >= b.radius || cap_distance(q, k)? >= b.radius - t {
        return None;
    }
    let v = if t == 0.0 {
        b.radius.powi(2 - d)
    } else {
        let image = b.center + (pole - b.center) * (b.radius * b.radius / (t * t));
        (b.radius / t).powi(d - 2) * x.dist(&image).powi(2 - d)
    };
    Some(q.scale * v)
}

pub fn jensen_demo(input: &JensenInput<'_>) -> Result<ExperimentReport> {
    let JensenInput { x, omega, a, domain, kernel: k, dict, mc } = *input;
    if !k.is_classical() {
        return Err(Error::parameter("Jensen measures are a classical notion (α = 2)"));
    }
    if a.is_empty() {
        return Err(Error::parameter("A must contain a ball"));
    }
    let interior = OpenSet::balls(a.to_vec());
    if !interior.contains(&x) {
        return Err(Error::precondition("x must lie in the interior of A"));
    }
    for (i, b) in a.iter().enumerate() {
        if omega.dist_to_complement(&b.center) <= b.radius {
            return Err(Error::precondition(format!("ball {i} of A is not compactly inside Ω")));
        }
    }
    let mut rep = ExperimentReport::new("jensen");
    rep.param("kernel", k);
    rep.param("x", x);
    rep.param("balls", a);
    rep.param("samples", mc.samples);
    rep.param("seed", mc.seed);

    let nu = WeightedMeasure::dirac(x);
    let source = integrals(&nu, dict, k)?;
    rep.record("point", None, &nu, dict, k, 0)?;
    let stop = StopSet::new(BallUnion::empty(), Some(interior), *domain)?;
    let mu = balayage_measure(&nu, &stop, k, mc)?;
    let ints = rep.record("exit", None, &mu, dict, k, mc.samples)?;
    rep.monotone_gate("exit", &source, &ints, dict);

    for (j, q) in dict.members.iter().enumerate() {
        if !q.is_superharmonic() {
            continue;
        }
        let (vx, e) = (source[j].value, ints[j]);
        if harmonic_near(q, k, a) {
            let gap = (e.value - vx).abs();
            rep.check(format!("mean-value:{}", q.name), gap <= 3.0 * e.stderr, gap, 0.0, e.stderr);
        }
        if a.len() == 1 {
            if let Some(exact) = newton_sphere_average(q, &a[0], &x, k) {
                rep.param(&format!("exact_average_{}", q.name), exact);
                let dev = (e.value - exact).abs();
                rep.check(format!("exact-average:{}", q.name), dev <= 3.0 * e.stderr, dev, 0.0, e.stderr);
                rep.check(format!("strict-gap:{}", q.name), vx - exact > 0.0, vx - exact, 0.0, 0.0);
            }
        }
    }
    let outside = mu
        .atoms()
        .iter()
        .map(|at| a.iter().map(|b| b.dist_to(&at.point)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    rep.check("support-in-closure", outside <= 1e-9, outside, 1e-9, 0.0);
    // summation rounding over the walk weights
    rep.check_le("total-mass", (mu.total_mass() - 1.0).abs(), 1e-9, 0.0);
    Ok(rep)
}
