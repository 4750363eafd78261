//! Exit laws from balls: the classical Poisson kernel on the sphere and the
//! Riesz exterior density, their samplers, and the Harnack-type ratio bound.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::Ball;
use crate::point::Point;
use crate::quadrature::{gauss_legendre, integrate_adaptive};

/// The pair (d, α). α = 2 is the classical (Brownian) case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel")]
pub struct KernelSpec {
    dim: usize,
    alpha: f64,
}

#[derive(Deserialize)]
struct RawKernel {
    dim: usize,
    alpha: f64,
}

impl TryFrom<RawKernel> for KernelSpec {
    type Error = Error;
    fn try_from(r: RawKernel) -> Result<Self> {
        KernelSpec::new(r.dim, r.alpha)
    }
}

impl KernelSpec {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 || dim > crate::point::MAX_DIM {
            return Err(Error::parameter(format!(
                "dimension must lie in 1..={}, got {dim}",
                crate::point::MAX_DIM
            )));
        }
        if alpha == 2.0 {
            if dim < 2 {
                return Err(Error::parameter("classical kernel needs d >= 2"));
            }
        } else if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::parameter(format!("α must be 2 or lie in (0, 2), got {alpha}")));
        } else if !(dim as f64 > alpha) {
            return Err(Error::parameter(format!("Riesz kernel needs d > α (d = {dim}, α = {alpha})")));
        }
        Ok(KernelSpec { dim, alpha })
    }

    pub fn classical(dim: usize) -> Result<Self> {
        KernelSpec::new(dim, 2.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_classical(&self) -> bool {
        self.alpha == 2.0
    }
}

/// Surface area of the unit sphere S^{d-1}.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

fn check_inside(b: &Ball, y: &Point) -> Result<f64> {
    if y.dim() != b.dim() {
        return Err(Error::parameter("point dimension differs from ball dimension"));
    }
    let t = y.dist(&b.center);
    if !(t < b.radius) {
        return Err(Error::parameter(format!(
            "source point must lie in the open ball (|y - y0| = {t}, r = {})",
            b.radius
        )));
    }
    Ok(t)
}

/// Poisson density at `z` on the sphere of `b` for a start at `y`, relative
/// to normalized surface measure.
pub fn classical_poisson_density(b: &Ball, y: &Point, z: &Point) -> Result<f64> {
    let t = check_inside(b, y)?;
    let r = b.radius;
    if (z.dist(&b.center) - r).abs() > 1e-9 * r {
        return Err(Error::parameter("z must lie on the sphere"));
    }
    let d = b.dim() as i32;
    Ok(r.powi(d - 2) * (r * r - t * t) / y.dist(z).powi(d))
}

/// Riesz exit density at `z` (outside the closed ball) for a start at `y`,
/// relative to Lebesgue measure.
pub fn riesz_poisson_density(b: &Ball, y: &Point, z: &Point, k: &KernelSpec) -> Result<f64> {
    if k.is_classical() {
        return Err(Error::parameter("Riesz density requested for α = 2"));
    }
    let t = check_inside(b, y)?;
    let r = b.radius;
    let s = z.dist(&b.center);
    if !(s > r) {
        return Err(Error::parameter("z must lie outside the closed ball"));
    }
    let a = riesz_constant(k)?;
    let h = k.alpha / 2.0;
    Ok(a * (r * r - t * t).powf(h) * (s * s - r * r).powf(-h) * y.dist(z).powi(-(k.dim as i32)))
}

/// ∫_1^∞ s^{-1} (s²-1)^{-α/2} ds, computed by quadrature.
///
/// With u = s^{-2} the integral is ½∫_0^1 u^{α/2-1}(1-u)^{-α/2} du; the two
/// endpoint singularities are removed by u = v^{2/α} on [0, ½] and
/// 1-u = w^{1/(1-α/2)} on [½, 1].
fn riesz_radial_integral(alpha: f64) -> Result<f64> {
    let h = alpha / 2.0;
    let left = integrate_adaptive(
        |v: f64| {
            let u = v.powf(1.0 / h);
            (1.0 - u).powf(-h) / h
        },
        0.0,
        0.5f64.powf(h),
        1e-13,
        1e-13,
        2000,
    )?;
    let right = integrate_adaptive(
        |w: f64| {
            let u = 1.0 - w.powf(1.0 / (1.0 - h));
            u.powf(h - 1.0) / (1.0 - h)
        },
        0.0,
        0.5f64.powf(1.0 - h),
        1e-13,
        1e-13,
        2000,
    )?;
    Ok(0.5 * (left.value + right.value))
}

/// The normalizing constant a_α of the Riesz exit density.
pub fn riesz_constant(k: &KernelSpec) -> Result<f64> {
    if k.is_classical() {
        return Err(Error::parameter("a_α is defined for α < 2 only"));
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let key = (k.dim, k.alpha.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&a) = cache.lock().expect("cache poisoned").get(&key) {
        return Ok(a);
    }
    let a = 1.0 / (sphere_area(k.dim) * riesz_radial_integral(k.alpha)?);
    cache.lock().expect("cache poisoned").insert(key, a);
    Ok(a)
}

/// (1+η)^{d-α/2} / (1-η)^{d+α/2}.
pub fn harnack_bound(eta: f64, k: &KernelSpec) -> f64 {
    let d = k.dim as f64;
    let h = k.alpha / 2.0;
    (1.0 + eta).powf(d - h) / (1.0 - eta).powf(d + h)
}

/// Largest δ <= ½ with harnack_bound(δ/(3d)) <= 1 + δ, to 1e-12.
pub fn delta0(k: &KernelSpec) -> f64 {
    let d = k.dim as f64;
    let ok = |delta: f64| harnack_bound(delta / (3.0 * d), k) <= 1.0 + delta;
    if ok(0.5) {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Probability that the process started at distance `dist` from the centre
/// of a ball of radius `r` ever hits it (whole space, transient cases).
pub fn single_ball_hit_probability(k: &KernelSpec, r: f64, dist: f64) -> f64 {
    if dist <= r {
        return 1.0;
    }
    if r <= 0.0 {
        return 0.0;
    }
    let x = (r / dist).powi(2);
    if k.is_classical() {
        if k.dim == 2 {
            return 1.0;
        }
        return (r / dist).powi(k.dim as i32 - 2);
    }
    beta_reg((k.dim as f64 - k.alpha) / 2.0, k.alpha / 2.0, x)
}

/// A uniformly distributed unit vector in R^d.
pub fn uniform_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Point {
    if d == 1 {
        return Point::new(&[if rng.random::<bool>() { 1.0 } else { -1.0 }]);
    }
    loop {
        let mut v = Point::zero(d);
        for a in 0..d {
            v[a] = rng.sample(StandardNormal);
        }
        let n = v.norm();
        if n > 1e-300 {
            return v * (1.0 / n);
        }
    }
}

/// A uniform unit vector orthogonal to the unit vector `e` (d >= 2).
fn orthogonal_direction<R: Rng + ?Sized>(e: &Point, rng: &mut R) -> Point {
    loop {
        let g = uniform_direction(e.dim(), rng);
        let w = g - *e * g.dot(e);
        let n = w.norm();
        if n > 1e-8 {
            return w * (1.0 / n);
        }
    }
}

const PANELS: usize = 16;
const PANEL_POINTS: usize = 8;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_POINTS))
}

/// Polar-angle law of the classical exit point, in the variable ψ with
/// tan(θ/2) = κ tan(ψ/2), κ = (1-ρ)/(1+ρ). In ψ the planar law is exactly
/// uniform and the higher-dimensional laws are smooth.
struct PolarLaw {
    d: i32,
    rho: f64,
    kappa: f64,
}

impl PolarLaw {
    fn theta(&self, psi: f64) -> f64 {
        let h = 0.5 * psi;
        2.0 * (self.kappa * h.sin()).atan2(h.cos())
    }

    /// Unnormalized density of ψ.
    fn density(&self, psi: f64) -> f64 {
        let h = 0.5 * psi;
        let (s, c) = h.sin_cos();
        let jac = self.kappa / (c * c + self.kappa * self.kappa * s * s);
        let th = self.theta(psi);
        let rho = self.rho;
        let f = (1.0 - rho * rho) / (1.0 + rho * rho - 2.0 * rho * th.cos()).powf(self.d as f64 / 2.0);
        f * th.sin().powi(self.d - 2) * jac
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        let (x, w) = panel_rule();
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter().zip(w).map(|(&t, &wt)| wt * self.density(m + h * t)).sum::<f64>() * h
    }

    /// Inverse CDF at `u` ∈ (0, 1).
    fn invert(&self, u: f64) -> f64 {
        let width = PI / PANELS as f64;
        let mut cum = [0.0; PANELS + 1];
        for p in 0..PANELS {
            cum[p + 1] = cum[p] + self.integrate(p as f64 * width, (p + 1) as f64 * width);
        }
        let target = u * cum[PANELS];
        let p = cum[1..].iter().position(|&c| c >= target).unwrap_or(PANELS - 1);
        let (mut lo, mut hi) = (p as f64 * width, (p + 1) as f64 * width);
        let base = cum[p];
        let need = target - base;
        let mut psi = lo + width * (need / (cum[p + 1] - base)).clamp(0.0, 1.0);
        for _ in 0..50 {
            let g = self.integrate(p as f64 * width, psi) - need;
            if g > 0.0 {
                hi = psi;
            } else {
                lo = psi;
            }
            if hi - lo < 1e-13 {
                break;
            }
            let dens = self.density(psi);
            let step = psi - g / dens;
            psi = if dens > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if (g / dens.max(1e-300)).abs() < 1e-14 {
                break;
            }
        }
        psi
    }
}

/// Exit point on the sphere of `b` for Brownian motion started at `y`.
pub fn sample_exit_classical<R: Rng + ?Sized>(b: &Ball, y: &Point, rng: &mut R) -> Point {
    let d = b.dim();
    let off = *y - b.center;
    let t = off.norm();
    let rho = t / b.radius;
    debug_assert!(rho < 1.0);
    if rho < 1e-14 {
        return b.center + uniform_direction(d, rng) * b.radius;
    }
    let e = off * (1.0 / t);
    let law = PolarLaw {
        d: d as i32,
        rho,
        kappa: (1.0 - rho) / (1.0 + rho),
    };
    let u: f64 = rng.random();
    let theta = law.theta(law.invert(u));
    let w = if d == 2 {
        let perp = Point::new(&[-e[1], e[0]]);
        if rng.random::<bool>() {
            perp
        } else {
            -perp
        }
    } else {
        orthogonal_direction(&e, rng)
    };
    let dir = e * theta.cos() + w * theta.sin();
    b.center + dir * (b.radius / dir.norm())
}

/// Sampler for the Riesz exit law with cached radial distribution.
#[derive(Debug, Clone)]
pub struct RieszSampler {
    dim: usize,
    alpha: f64,
    radial: Beta<f64>,
}

impl RieszSampler {
    pub fn new(k: &KernelSpec) -> Result<Self> {
        if k.is_classical() {
            return Err(Error::parameter("Riesz sampler requested for α = 2"));
        }
        let h = k.alpha / 2.0;
        let radial = Beta::new(h, 1.0 - h).map_err(|e| Error::parameter(e.to_string()))?;
        Ok(RieszSampler {
            dim: k.dim,
            alpha: k.alpha,
            radial,
        })
    }

    /// Exit point from `b` for a start at its centre: s = r·u^{-1/2} with
    /// u ~ Beta(α/2, 1-α/2) and a uniform direction.
    pub fn sample_centered<R: Rng + ?Sized>(&self, b: &Ball, rng: &mut R) -> Point {
        loop {
            let u = self.radial.sample(rng);
            if u > 0.0 && u < 1.0 {
                let s = b.radius / u.sqrt();
                let z = b.center + uniform_direction(self.dim, rng) * s;
                // rounding may put z back on the sphere; compare distances,
                // since |z-c|² > r² does not imply |z-c| > r in floating point
                if z.dist(&b.center) > b.radius {
                    return z;
                }
            }
        }
    }

    /// Exit point from `b` for a start at `y` in the open ball, by rejection
    /// from the centred law. The density ratio is
    /// (1-ρ²)^{α/2}(|z-c|/|z-y|)^d <= (1-ρ²)^{α/2}(1-ρ)^{-d}.
    pub fn sample<R: Rng + ?Sized>(&self, b: &Ball, y: &Point, rng: &mut R) -> Point {
        let rho = y.dist(&b.center) / b.radius;
        debug_assert!(rho < 1.0);
        if rho < 1e-14 {
            return self.sample_centered(b, rng);
        }
        let scale = (1.0 - rho).powi(self.dim as i32);
        loop {
            let z = self.sample_centered(b, rng);
            let ratio = (z.dist(&b.center) / z.dist(y)).powi(self.dim as i32);
            if rng.random::<f64>() < scale * ratio {
                return z;
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Exit point from `b` for a start at `y` (fresh sampler).
pub fn sample_exit_riesz<R: Rng + ?Sized>(b: &Ball, y: &Point, k: &KernelSpec, rng: &mut R) -> Result<Point> {
    check_inside(b, y)?;
    Ok(RieszSampler::new(k)?.sample(b, y, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussRule;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ball(c: &[f64], r: f64) -> Ball {
        Ball::new(Point::new(c), r).unwrap()
    }

    /// Γ(d/2) π^{-d/2-1} sin(πα/2), the closed form of a_α.
    fn closed_form(d: usize, alpha: f64) -> f64 {
        let h = d as f64 / 2.0;
        (ln_gamma(h) - (h + 1.0) * PI.ln()).exp() * (PI * alpha / 2.0).sin()
    }

    #[test]
    fn riesz_constant_matches_closed_form() {
        for &(d, a) in &[(1, 0.5), (2, 1.0), (3, 1.5), (3, 0.3), (4, 1.9)] {
            let k = KernelSpec::new(d, a).unwrap();
            let got = riesz_constant(&k).unwrap();
            let want = closed_form(d, a);
            assert!((got / want - 1.0).abs() < 1e-9, "d={d} α={a}: {got} vs {want}");
        }
        // frozen quadrature values
        let k1 = KernelSpec::new(1, 0.5).unwrap();
        assert!((riesz_constant(&k1).unwrap() - 0.225079079039277).abs() < 1e-10);
        let k2 = KernelSpec::new(2, 1.0).unwrap();
        assert!((riesz_constant(&k2).unwrap() - 1.0 / (PI * PI)).abs() < 1e-12);
    }

    #[test]
    fn kernel_spec_validation() {
        assert!(KernelSpec::new(1, 2.0).is_err());
        assert!(KernelSpec::new(1, 1.0).is_err());
        assert!(KernelSpec::new(1, 0.9).is_ok());
        assert!(KernelSpec::new(3, 0.0).is_err());
        assert!(KernelSpec::new(3, 2.5).is_err());
        let k: std::result::Result<KernelSpec, _> = serde_json::from_str(r#"{"dim":2,"alpha":2.5}"#);
        assert!(k.is_err());
    }

    #[test]
    fn classical_density_examples() {
        let b = ball(&[0.0, 0.0, 0.0], 1.0);
        let y = Point::new(&[0.5, 0.0, 0.0]);
        let z = Point::new(&[1.0, 0.0, 0.0]);
        assert!((classical_poisson_density(&b, &y, &z).unwrap() - 6.0).abs() < 1e-12);
        let c = Point::new(&[0.0, 0.0, 0.0]);
        let z2 = Point::new(&[0.0, 0.6, 0.8]);
        assert!((classical_poisson_density(&b, &c, &z2).unwrap() - 1.0).abs() < 1e-12);
        assert!(classical_poisson_density(&b, &Point::new(&[1.0, 0.0, 0.0]), &z2).is_err());
        assert!(classical_poisson_density(&b, &c, &Point::new(&[0.5, 0.0, 0.0])).is_err());
    }

    /// ∫ over the unit sphere in d = 3 by product Gauss rules in (cos θ, φ).
    fn sphere3_average<F: Fn(&Point) -> f64>(f: F) -> f64 {
        let g = GaussRule::new(64);
        g.integrate(-1.0, 1.0, |c| {
            let s = (1.0 - c * c).sqrt();
            g.integrate(0.0, 2.0 * PI, |phi| f(&Point::new(&[c, s * phi.cos(), s * phi.sin()])))
        }) / (4.0 * PI)
    }

    #[test]
    fn classical_density_normalized() {
        let b = ball(&[0.0, 0.0, 0.0], 1.0);
        for &t in &[0.0, 0.3, 0.7] {
            let y = Point::new(&[0.0, t * 0.6, t * 0.8]);
            let total = sphere3_average(|z| classical_poisson_density(&b, &y, z).unwrap());
            assert!((total - 1.0).abs() < 1e-6, "t={t}: {total}");
        }
    }

    #[test]
    fn harnack_examples() {
        let k = KernelSpec::classical(3).unwrap();
        assert!((harnack_bound(0.1, &k) - 1.21 / 0.6561).abs() < 1e-12);
        assert!((harnack_bound(1e-12, &k) - 1.0).abs() < 1e-10);
        // log bound = 2dη + (α/2)η² + O(η³), so the quadratic coefficient is
        // 2d² + α/2 + O(η); within 5d only for d <= 2
        for &(d, a) in &[(2, 2.0), (2, 1.0), (1, 0.5), (3, 1.5), (3, 2.0), (4, 0.5)] {
            let k = KernelSpec::new(d, a).unwrap();
            let d = d as f64;
            let c = if d <= 2.0 { 5.0 * d } else { 2.0 * d * d + a / 2.0 + 1.0 };
            for &eta in &[1e-4, 1e-3, 5e-3, 1e-2] {
                assert!((harnack_bound(eta, &k) - (1.0 + 2.0 * d * eta)).abs() <= c * eta * eta);
            }
        }
        assert_eq!(delta0(&k), 0.5);
    }

    #[test]
    fn hit_probability_reduces_to_classical() {
        let k = KernelSpec::classical(3).unwrap();
        assert!((single_ball_hit_probability(&k, 1.0, 4.0) - 0.25).abs() < 1e-15);
        // I_x((d-2)/2, 1) = x^{(d-2)/2}
        for d in 3..=4 {
            let x: f64 = 0.3;
            assert!((beta_reg((d as f64 - 2.0) / 2.0, 1.0, x) - x.powf((d as f64 - 2.0) / 2.0)).abs() < 1e-12);
        }
        let r = KernelSpec::new(2, 1.0).unwrap();
        let p = single_ball_hit_probability(&r, 1.0, 2.0);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn centered_classical_sampler_is_uniform() {
        let b = ball(&[1.0, -1.0, 0.5], 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        // 32 equal-measure caps: 8 bands in cos θ times 4 azimuth quadrants
        let mut counts = [0usize; 32];
        for _ in 0..n {
            let z = sample_exit_classical(&b, &b.center, &mut rng);
            let v = (z - b.center) * 0.5;
            assert!((v.norm() - 1.0).abs() <= 1e-12);
            let band = (((v[2] + 1.0) / 2.0 * 8.0) as usize).min(7);
            let q = ((v[1].atan2(v[0]) + PI) / (PI / 2.0)) as usize % 4;
            counts[band * 4 + q] += 1;
        }
        let e = n as f64 / 32.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 31 dof, p = 0.001 quantile ≈ 61.1
        assert!(chi2 < 61.1, "chi2 = {chi2}");
    }

    #[test]
    fn off_center_classical_sampler_matches_density() {
        let b = ball(&[0.0, 0.0, 0.0], 1.0);
        let y = Point::new(&[0.6, 0.0, 0.0]);
        let pole = Point::new(&[2.0, 0.5, 0.0]);
        let q = |z: &Point| 1.0 / z.dist(&pole) + z[0] * z[0];
        let exact = sphere3_average(|z| q(z) * classical_poisson_density(&b, &y, z).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = sample_exit_classical(&b, &y, &mut rng);
            assert!((z.norm() - 1.0).abs() <= 1e-12);
            let v = q(&z);
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let sd = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * sd, "{mean} vs {exact} ± {sd}");
    }

    #[test]
    fn planar_polar_law_is_uniform_in_psi() {
        let law = PolarLaw { d: 2, rho: 0.8, kappa: 0.2 / 1.8 };
        let d0 = law.density(0.3);
        for &psi in &[0.1, 1.0, 2.0, 3.0] {
            assert!((law.density(psi) / d0 - 1.0).abs() < 1e-12);
        }
        // total mass equals π times the normalized-measure density integral
        let total = law.integrate(0.0, PI);
        assert!((total - PI).abs() < 1e-12);
    }

    #[test]
    fn riesz_sampler_radial_shells() {
        let k = KernelSpec::new(3, 1.5).unwrap();
        let b = ball(&[0.0, 0.0, 0.0], 1.0);
        let sampler = RieszSampler::new(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let edges: Vec<f64> = (0..=20).map(|i| 1.0 + 0.1 * i as f64).collect();
        let mut counts = vec![0usize; 20];
        for _ in 0..n {
            let z = sampler.sample_centered(&b, &mut rng);
            assert!(z.norm_sq() > 1.0);
            let s = z.norm();
            if let Some(i) = edges.windows(2).position(|w| s >= w[0] && s < w[1]) {
                counts[i] += 1;
            }
        }
        let a = riesz_constant(&k).unwrap() * sphere_area(3);
        for (i, w) in edges.windows(2).enumerate() {
            let p = integrate_adaptive(
                |s: f64| a * (s * s - 1.0).powf(-0.75) * s * s / s.powi(3),
                w[0],
                w[1],
                1e-12,
                1e-10,
                500,
            );
            // the first shell has an integrable endpoint singularity
            let p = match p {
                Ok(q) => q.value,
                Err(_) => continue,
            };
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            let f = counts[i] as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * sd, "shell {i}: {f} vs {p}");
        }
    }

    #[test]
    fn riesz_off_center_sampler_hits_distant_ball() {
        // probability of landing in a distant ball, by quadrature of the density
        let k = KernelSpec::new(2, 1.0).unwrap();
        let b = ball(&[0.0, 0.0], 1.0);
        let y = Point::new(&[0.4, 0.2]);
        let target = ball(&[3.0, 1.0], 0.8);
        let g = GaussRule::new(48);
        let exact = g.integrate(0.0, 0.8, |rr| {
            g.integrate(0.0, 2.0 * PI, |phi| {
                let z = Point::new(&[3.0 + rr * phi.cos(), 1.0 + rr * phi.sin()]);
                rr * riesz_poisson_density(&b, &y, &z, &k).unwrap()
            })
        });
        let sampler = RieszSampler::new(&k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let z = sampler.sample(&b, &y, &mut rng);
            assert!(z.norm_sq() > 1.0);
            if target.contains(&z) {
                hits += 1;
            }
        }
        let f = hits as f64 / n as f64;
        let sd = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((f - exact).abs() < 3.0 * sd, "{f} vs {exact} ± {sd}");
    }

    proptest! {
        #[test]
        fn classical_harnack_ratio(eta in 0.01f64..0.3, a in prop::array::uniform3(-1.0f64..1.0),
                                   b in prop::array::uniform3(-1.0f64..1.0), z in prop::array::uniform3(-1.0f64..1.0)) {
            let k = KernelSpec::classical(3).unwrap();
            let ball = Ball::new(Point::zero(3), 1.0).unwrap();
            let clamp = |v: [f64; 3]| { let p = Point::new(&v); let n = p.norm(); if n > 1.0 { p * (eta / n) } else { p * eta } };
            let (y, yt) = (clamp(a), clamp(b));
            let zp = Point::new(&z);
            prop_assume!(zp.norm() > 1e-3);
            let zs = zp * (1.0 / zp.norm());
            let r = classical_poisson_density(&ball, &y, &zs).unwrap() / classical_poisson_density(&ball, &yt, &zs).unwrap();
            prop_assert!(r <= harnack_bound(eta, &k) * (1.0 + 1e-12));
        }

        #[test]
        fn riesz_harnack_ratio(eta in 0.01f64..0.3, a in prop::array::uniform2(-1.0f64..1.0),
                               b in prop::array::uniform2(-1.0f64..1.0), dir in 0.0f64..6.3, s in 1.0001f64..50.0) {
            let k = KernelSpec::new(2, 1.0).unwrap();
            let ball = Ball::new(Point::zero(2), 1.0).unwrap();
            let clamp = |v: [f64; 2]| { let p = Point::new(&v); let n = p.norm(); if n > 1.0 { p * (eta / n) } else { p * eta } };
            let (y, yt) = (clamp(a), clamp(b));
            let z = Point::new(&[s * dir.cos(), s * dir.sin()]);
            let r = riesz_poisson_density(&ball, &y, &z, &k).unwrap() / riesz_poisson_density(&ball, &yt, &z, &k).unwrap();
            prop_assert!(r <= harnack_bound(eta, &k) * (1.0 + 1e-12));
        }

        #[test]
        fn riesz_constant_scale_invariant(r in 0.1f64..10.0, t in 0.0f64..0.9, s in 1.01f64..5.0) {
            // density of the scaled configuration scales by r^{-d}
            let k = KernelSpec::new(3, 0.7).unwrap();
            let b1 = Ball::new(Point::zero(3), 1.0).unwrap();
            let br = Ball::new(Point::zero(3), r).unwrap();
            let y = Point::new(&[t, 0.0, 0.0]);
            let z = Point::new(&[0.0, s, 0.0]);
            let d1 = riesz_poisson_density(&b1, &y, &z, &k).unwrap();
            let dr = riesz_poisson_density(&br, &(y * r), &(z * r), &k).unwrap();
            prop_assert!((dr * r.powi(3) / d1 - 1.0).abs() < 1e-12);
        }
    }
}
