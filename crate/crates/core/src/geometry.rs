//! Balls, disjoint ball unions, open sets built from balls, domains, the
//! δ-family condition and the lattice grid construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::BallIndex;
use crate::kernels::{delta0, KernelSpec};
use crate::point::Point;

/// A closed Euclidean ball. Radius 0 is a degenerate (polar) point ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::parameter(format!("ball radius must be >= 0, got {radius}")));
        }
        if !center.is_finite() {
            return Err(Error::parameter("ball centre must be finite"));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// The concentric ball with radius scaled by `gamma` in [0, 1].
    pub fn shrink(&self, gamma: f64) -> Result<Ball> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::parameter(format!(
                "shrink factor must lie in [0, 1], got {gamma}"
            )));
        }
        Ok(Ball {
            center: self.center,
            radius: self.radius * gamma,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.radius == 0.0
    }

    /// Closed-ball membership.
    pub fn contains(&self, x: &Point) -> bool {
        x.dist_sq(&self.center) <= self.radius * self.radius
    }

    /// Open-ball membership.
    pub fn contains_open(&self, x: &Point) -> bool {
        x.dist_sq(&self.center) < self.radius * self.radius
    }

    /// Distance from `x` to the closed ball (0 inside).
    pub fn dist_to(&self, x: &Point) -> f64 {
        (x.dist(&self.center) - self.radius).max(0.0)
    }

    /// Nearest point of the bounding sphere.
    pub fn project_to_sphere(&self, x: &Point) -> Point {
        let v = *x - self.center;
        let n = v.norm();
        if n == 0.0 {
            return self.center + Point::unit(self.dim(), 0) * self.radius;
        }
        self.center + v * (self.radius / n)
    }
}

/// An ordered family of pairwise disjoint closed balls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallUnion {
    balls: Vec<Ball>,
}

impl<'de> Deserialize<'de> for BallUnion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let balls = Vec::<Ball>::deserialize(d)?;
        BallUnion::new(balls).map_err(serde::de::Error::custom)
    }
}

impl BallUnion {
    /// Builds a union, checking that the balls are pairwise disjoint.
    pub fn new(balls: Vec<Ball>) -> Result<Self> {
        if let Some(first) = balls.first() {
            let d = first.dim();
            if balls.iter().any(|b| b.dim() != d) {
                return Err(Error::structural("balls of mixed dimension"));
            }
        }
        for b in &balls {
            Ball::new(b.center, b.radius)?;
        }
        let u = BallUnion { balls };
        if let Some((i, j)) = u.find_overlap() {
            return Err(Error::structural(format!(
                "balls {i} and {j} are not disjoint (centres {:?} and {:?}, radii {} and {})",
                u.balls[i].center, u.balls[j].center, u.balls[i].radius, u.balls[j].radius
            )));
        }
        Ok(u)
    }

    /// Builds a union whose disjointness is guaranteed by construction.
    pub(crate) fn new_unchecked(balls: Vec<Ball>) -> Self {
        BallUnion { balls }
    }

    pub fn empty() -> Self {
        BallUnion { balls: Vec::new() }
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.balls.first().map(|b| b.dim())
    }

    pub fn radii(&self) -> Vec<f64> {
        self.balls.iter().map(|b| b.radius).collect()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.balls.iter().map(|b| b.center).collect()
    }

    /// Concatenation of two unions, re-checking disjointness.
    pub fn merged(&self, other: &BallUnion) -> Result<BallUnion> {
        let mut balls = self.balls.clone();
        balls.extend_from_slice(&other.balls);
        BallUnion::new(balls)
    }

    /// Shrinks ball i by `factors[i]`.
    pub fn shrunk(&self, factors: &[f64]) -> Result<BallUnion> {
        if factors.len() != self.balls.len() {
            return Err(Error::parameter("one shrink factor per ball required"));
        }
        let balls = self
            .balls
            .iter()
            .zip(factors)
            .map(|(b, &g)| b.shrink(g))
            .collect::<Result<Vec<_>>>()?;
        Ok(BallUnion { balls })
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.balls.iter().any(|b| b.radius > 0.0 && b.contains(x))
    }

    pub fn contains_open(&self, x: &Point) -> bool {
        self.balls.iter().any(|b| b.contains_open(x))
    }

    /// Index of the closed ball containing `x`, if any.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        self.balls.iter().position(|b| b.radius > 0.0 && b.contains(x))
    }

    /// Distance from `x` to the closed union (0 inside).
    pub fn dist_to(&self, x: &Point) -> f64 {
        self.balls
            .iter()
            .map(|b| b.dist_to(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// A ball containing every member (centre = bounding-box centre).
    pub fn enclosing_ball(&self) -> Option<Ball> {
        let d = self.dim()?;
        let mut lo = Point::zero(d);
        let mut hi = Point::zero(d);
        for a in 0..d {
            lo[a] = f64::INFINITY;
            hi[a] = f64::NEG_INFINITY;
        }
        for b in &self.balls {
            for a in 0..d {
                lo[a] = lo[a].min(b.center[a] - b.radius);
                hi[a] = hi[a].max(b.center[a] + b.radius);
            }
        }
        let c = (lo + hi) * 0.5;
        let r = self
            .balls
            .iter()
            .map(|b| b.center.dist(&c) + b.radius)
            .fold(0.0, f64::max);
        Some(Ball {
            center: c,
            radius: r,
        })
    }

    pub fn index(&self) -> BallIndex {
        BallIndex::new(self.centers(), &self.radii())
    }

    fn conflict(a: &Ball, b: &Ball) -> bool {
        let d = a.center.dist(&b.center);
        let s = a.radius + b.radius;
        if a.radius == 0.0 && b.radius == 0.0 {
            return d == 0.0;
        }
        if a.radius == 0.0 || b.radius == 0.0 {
            // a point ball may touch another ball's surface but not sit inside it
            return d < s;
        }
        d <= s
    }

    /// First overlapping pair, found with a sweep along the first axis.
    fn find_overlap(&self) -> Option<(usize, usize)> {
        let n = self.balls.len();
        if n < 2 {
            return None;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            let a = self.balls[i].center[0] - self.balls[i].radius;
            let b = self.balls[j].center[0] - self.balls[j].radius;
            a.total_cmp(&b).then(i.cmp(&j))
        });
        let mut active: Vec<usize> = Vec::new();
        for &i in &order {
            let bi = &self.balls[i];
            let left = bi.center[0] - bi.radius;
            active.retain(|&j| {
                let bj = &self.balls[j];
                bj.center[0] + bj.radius >= left
            });
            for &j in &active {
                if Self::conflict(bi, &self.balls[j]) {
                    return Some((j.min(i), j.max(i)));
                }
            }
            active.push(i);
        }
        None
    }
}

/// The Greenian reference set X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    FullSpace,
    OpenBall { center: Point, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub kind: DomainKind,
    pub dim: usize,
}

impl DomainSpec {
    pub fn full_space(dim: usize) -> Self {
        DomainSpec {
            kind: DomainKind::FullSpace,
            dim,
        }
    }

    pub fn open_ball(center: Point, radius: f64) -> Self {
        DomainSpec {
            dim: center.dim(),
            kind: DomainKind::OpenBall { center, radius },
        }
    }

    /// Checks the admissibility of the pair (kernel, domain).
    pub fn validate(&self, kernel: &KernelSpec) -> Result<()> {
        if self.dim != kernel.dim() {
            return Err(Error::parameter(format!(
                "domain dimension {} differs from kernel dimension {}",
                self.dim,
                kernel.dim()
            )));
        }
        if let DomainKind::OpenBall { center, radius } = self.kind {
            if center.dim() != self.dim || !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::parameter("domain ball needs matching dimension and radius > 0"));
            }
        }
        if kernel.is_classical() && self.dim == 2 && self.kind == DomainKind::FullSpace {
            return Err(Error::parameter(
                "classical planar case needs a domain with non-polar complement (use an open ball)",
            ));
        }
        Ok(())
    }

    /// Membership in the open set X.
    pub fn contains(&self, x: &Point) -> bool {
        match self.kind {
            DomainKind::FullSpace => true,
            DomainKind::OpenBall { center, radius } => x.dist_sq(&center) < radius * radius,
        }
    }

    /// Distance from `x` to R^d \ X (infinite for the full space).
    pub fn dist_to_boundary(&self, x: &Point) -> f64 {
        match self.kind {
            DomainKind::FullSpace => f64::INFINITY,
            DomainKind::OpenBall { center, radius } => (radius - x.dist(&center)).max(0.0),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, DomainKind::OpenBall { .. })
    }
}

/// Open sets representable exactly: the whole domain, interiors of ball
/// unions (balls may overlap), and differences with closed ball unions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpenSet {
    Domain { domain: DomainSpec },
    Balls { balls: Vec<Ball> },
    Minus { outer: Box<OpenSet>, removed: Vec<Ball> },
}

impl OpenSet {
    pub fn ball(center: Point, radius: f64) -> Self {
        OpenSet::Balls {
            balls: vec![Ball { center, radius }],
        }
    }

    pub fn balls(balls: Vec<Ball>) -> Self {
        OpenSet::Balls { balls }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            OpenSet::Domain { domain } => domain.contains(x),
            OpenSet::Balls { balls } => balls.iter().any(|b| b.contains_open(x)),
            OpenSet::Minus { outer, removed } => {
                outer.contains(x) && !removed.iter().any(|b| b.contains(x))
            }
        }
    }

    /// Distance from `x` to R^d \ U (0 when `x` is outside U).
    ///
    /// Exact for a single ball and for two balls; for three or more
    /// overlapping balls the largest single-ball clearance is returned,
    /// which is a lower bound.
    pub fn dist_to_complement(&self, x: &Point) -> f64 {
        match self {
            OpenSet::Domain { domain } => {
                if domain.contains(x) {
                    domain.dist_to_boundary(x)
                } else {
                    0.0
                }
            }
            OpenSet::Balls { balls } => union_clearance(balls, x).0,
            OpenSet::Minus { outer, removed } => {
                let d_removed = removed
                    .iter()
                    .map(|b| b.dist_to(x))
                    .fold(f64::INFINITY, f64::min);
                outer.dist_to_complement(x).min(d_removed)
            }
        }
    }

    /// A point of R^d \ U near `x` (nearest point when exact).
    pub fn project_to_complement(&self, x: &Point) -> Point {
        match self {
            OpenSet::Domain { domain } => match domain.kind {
                DomainKind::FullSpace => *x,
                DomainKind::OpenBall { center, radius } => {
                    Ball { center, radius }.project_to_sphere(x)
                }
            },
            OpenSet::Balls { balls } => union_clearance(balls, x).1.unwrap_or(*x),
            OpenSet::Minus { outer, removed } => {
                let nearest = removed
                    .iter()
                    .map(|b| (b.dist_to(x), b))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                match nearest {
                    Some((d, b)) if d <= outer.dist_to_complement(x) => b.project_to_sphere(x),
                    _ => outer.project_to_complement(x),
                }
            }
        }
    }

    /// Axis-aligned bounding box, if bounded.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        match self {
            OpenSet::Domain { domain } => match domain.kind {
                DomainKind::FullSpace => None,
                DomainKind::OpenBall { center, radius } => Some(ball_box(&center, radius)),
            },
            OpenSet::Balls { balls } => {
                let mut it = balls.iter().map(|b| ball_box(&b.center, b.radius));
                let first = it.next()?;
                Some(it.fold(first, |(lo, hi), (l, h)| {
                    let mut lo2 = lo;
                    let mut hi2 = hi;
                    for a in 0..lo.dim() {
                        lo2[a] = lo[a].min(l[a]);
                        hi2[a] = hi[a].max(h[a]);
                    }
                    (lo2, hi2)
                }))
            }
            OpenSet::Minus { outer, .. } => outer.bounding_box(),
        }
    }
}

fn ball_box(c: &Point, r: f64) -> (Point, Point) {
    let mut lo = *c;
    let mut hi = *c;
    for a in 0..c.dim() {
        lo[a] -= r;
        hi[a] += r;
    }
    (lo, hi)
}

/// Clearance of `x` inside a union of open balls, with a nearest
/// complement point when it is known exactly.
fn union_clearance(balls: &[Ball], x: &Point) -> (f64, Option<Point>) {
    if !balls.iter().any(|b| b.contains_open(x)) {
        return (0.0, Some(*x));
    }
    let lower = balls
        .iter()
        .map(|b| b.radius - x.dist(&b.center))
        .fold(f64::NEG_INFINITY, f64::max);
    if balls.len() > 2 {
        let arg = balls
            .iter()
            .max_by(|a, b| (a.radius - x.dist(&a.center)).total_cmp(&(b.radius - x.dist(&b.center))))
            .expect("non-empty");
        return (lower, Some(arg.project_to_sphere(x)));
    }
    // a candidate on sphere j is exposed unless another open ball covers it;
    // the margin keeps coincident spheres from covering each other by rounding
    let exposed = |p: &Point, own: &[usize]| {
        !balls
            .iter()
            .enumerate()
            .any(|(j, b)| !own.contains(&j) && b.radius - p.dist(&b.center) > 1e-12 * b.radius)
    };
    let mut best: Option<(f64, Point)> = None;
    let mut offer = |p: Point| {
        let d = x.dist(&p);
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, p));
        }
    };
    for (j, b) in balls.iter().enumerate() {
        let p = if x.dist(&b.center) > 0.0 {
            b.project_to_sphere(x)
        } else {
            // every sphere point is equally near; pick one away from the others
            let away = balls
                .iter()
                .find(|o| o.center != b.center)
                .map(|o| b.center - o.center)
                .unwrap_or_else(|| Point::unit(x.dim(), 0));
            b.center + away * (b.radius / away.norm())
        };
        if exposed(&p, &[j]) {
            offer(p);
        }
    }
    if balls.len() == 2 {
        if let Some(p) = nearest_on_intersection(&balls[0], &balls[1], x) {
            offer(p);
        }
    }
    match best {
        Some((d, p)) => (d.max(lower), Some(p)),
        None => (lower, None),
    }
}

/// Nearest point to `x` on the intersection of two spheres, if they meet.
fn nearest_on_intersection(a: &Ball, b: &Ball, x: &Point) -> Option<Point> {
    let axis = b.center - a.center;
    let l = axis.norm();
    if l == 0.0 || l >= a.radius + b.radius || l <= (a.radius - b.radius).abs() {
        return None;
    }
    let n = axis * (1.0 / l);
    let t = (l * l + a.radius * a.radius - b.radius * b.radius) / (2.0 * l);
    let rho = (a.radius * a.radius - t * t).max(0.0).sqrt();
    let o = a.center + n * t;
    let rel = *x - o;
    let mut v = rel - n * rel.dot(&n);
    let vn = v.norm();
    if vn == 0.0 {
        // any circle point; build one orthogonal to the axis
        let dim = x.dim();
        let mut e = Point::unit(dim, 0);
        if n[0].abs() > 0.9 {
            e = Point::unit(dim, 1.min(dim - 1));
        }
        v = e - n * e.dot(&n);
        let m = v.norm();
        if m == 0.0 {
            return None;
        }
        return Some(o + v * (rho / m));
    }
    Some(o + v * (rho / vn))
}

/// dist(x_{B_i}, (R^d \ X) ∪ (A \ B_i)).
pub fn mutual_distance(u: &BallUnion, i: usize, region: &OpenSet) -> Result<f64> {
    let b = u
        .balls()
        .get(i)
        .ok_or_else(|| Error::parameter(format!("ball index {i} out of range")))?;
    let to_boundary = region.dist_to_complement(&b.center);
    let to_others = u
        .balls()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, o)| o.dist_to(&b.center))
        .fold(f64::INFINITY, f64::min);
    Ok(to_boundary.min(to_others))
}

#[derive(Debug, Clone, Serialize)]
pub struct BallSlack {
    pub index: usize,
    pub radius: f64,
    pub distance: f64,
    /// (δ/3d)·distance
    pub allowed_radius: f64,
    /// allowed_radius − radius; non-negative for a valid ball.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaFamilyReport {
    pub valid: bool,
    pub delta: f64,
    pub delta0: f64,
    pub min_slack: f64,
    pub balls: Vec<BallSlack>,
}

/// Checks the δ-family separation condition
/// `r_B <= δ/(3d) · dist(x_B, (R^d \ X) ∪ (A \ B))` for every ball, together
/// with `δ <= δ₀(d, α)`.
pub fn validate_delta_family(
    u: &BallUnion,
    delta: f64,
    region: &OpenSet,
    kernel: &KernelSpec,
) -> Result<DeltaFamilyReport> {
    if !(delta > 0.0) {
        return Err(Error::parameter(format!("δ must be positive, got {delta}")));
    }
    // BallUnion construction already rejects overlaps; re-check anyway for
    // unions assembled without validation.
    if let Some((i, j)) = u.find_overlap() {
        return Err(Error::structural(format!("balls {i} and {j} overlap")));
    }
    let d = kernel.dim() as f64;
    let d0 = delta0(kernel);
    let index = u.index();
    let radii = u.radii();
    let balls: Vec<BallSlack> = u
        .balls()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let to_others = if u.len() > 1 {
                index.nearest_other(i, &radii).max(0.0)
            } else {
                f64::INFINITY
            };
            let distance = region.dist_to_complement(&b.center).min(to_others);
            let allowed = delta / (3.0 * d) * distance;
            BallSlack {
                index: i,
                radius: b.radius,
                distance,
                allowed_radius: allowed,
                slack: allowed - b.radius,
            }
        })
        .collect();
    let min_slack = balls.iter().map(|b| b.slack).fold(f64::INFINITY, f64::min);
    let contained = u.balls().iter().all(|b| region.dist_to_complement(&b.center) > b.radius);
    Ok(DeltaFamilyReport {
        valid: delta <= d0 && contained && balls.iter().all(|b| b.slack >= 0.0),
        delta,
        delta0: d0,
        min_slack,
        balls,
    })
}

/// The lattice of balls B(z, a/m), z ∈ (x₀ + Z^d)/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub offset: Point,
    pub scale: f64,
    pub resolution: u32,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale < 1.0) {
            return Err(Error::parameter(format!("grid scale a must lie in (0,1), got {}", self.scale)));
        }
        if self.resolution == 0 {
            return Err(Error::parameter("grid resolution must be positive"));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.scale / self.resolution as f64
    }

    /// Whether `x` lies in some ball of the full (unrestricted) lattice.
    pub fn lattice_contains(&self, x: &Point) -> bool {
        let m = self.resolution as f64;
        let mut s = 0.0;
        for a in 0..x.dim() {
            let k = (m * x[a] - self.offset[a]).round();
            let z = (self.offset[a] + k) / m;
            s += (x[a] - z) * (x[a] - z);
        }
        s <= self.radius() * self.radius()
    }
}

/// All lattice balls B with B ⊂ U ∩ B(0, m) and dist(B, R^d \ U) >= 1/m.
pub fn grid_balls(g: &GridSpec, u: &OpenSet) -> Result<BallUnion> {
    g.validate()?;
    let dim = g.offset.dim();
    let m = g.resolution as f64;
    let r = g.radius();
    let (mut lo, mut hi) = u.bounding_box().unwrap_or_else(|| {
        let mut lo = Point::zero(dim);
        let mut hi = Point::zero(dim);
        for a in 0..dim {
            lo[a] = -m;
            hi[a] = m;
        }
        (lo, hi)
    });
    for a in 0..dim {
        lo[a] = lo[a].max(-m);
        hi[a] = hi[a].min(m);
    }
    let mut k_lo = [0i64; crate::point::MAX_DIM];
    let mut k_hi = [0i64; crate::point::MAX_DIM];
    for a in 0..dim {
        k_lo[a] = (m * lo[a] - g.offset[a]).floor() as i64;
        k_hi[a] = (m * hi[a] - g.offset[a]).ceil() as i64;
        if k_hi[a] < k_lo[a] {
            return Ok(BallUnion::empty());
        }
    }
    let mut balls = Vec::new();
    let mut k = k_lo;
    loop {
        let mut z = Point::zero(dim);
        for a in 0..dim {
            z[a] = (g.offset[a] + k[a] as f64) / m;
        }
        if z.norm() + r <= m && u.dist_to_complement(&z) - r >= 1.0 / m {
            balls.push(Ball { center: z, radius: r });
        }
        let mut a = 0;
        loop {
            if a == dim {
                return Ok(BallUnion::new_unchecked(balls));
            }
            k[a] += 1;
            if k[a] <= k_hi[a] {
                break;
            }
            k[a] = k_lo[a];
            a += 1;
        }
    }
}
