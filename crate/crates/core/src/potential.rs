//! Test potentials and compactly supported test functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::kernels::KernelSpec;
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// |x - z₀|^{α-d}
    RieszKernel { pole: Point },
    /// |x - z₀|^{2-d}, d >= 3
    NewtonKernel { pole: Point },
    /// Classical Green function of B(center, radius) with pole z₀, 0 outside.
    GreenBall { pole: Point, center: Point, radius: f64 },
    /// (1 - |x - c|²/ρ²)²₊
    Bump { center: Point, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Multiplier applied before capping.
    #[serde(default = "one")]
    pub scale: f64,
    /// Truncation level; the truncated kernel is min(scale·kernel, cap).
    #[serde(default)]
    pub cap: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn new(name: impl Into<String>, kind: PotentialKind) -> Self {
        PotentialSpec {
            name: name.into(),
            kind,
            scale: 1.0,
            cap: None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = Some(cap);
        self
    }

    /// Caps the kernel at its value at distance `radius` from the pole.
    pub fn capped_at_distance(self, radius: f64, k: &KernelSpec) -> Result<Self> {
        let pole = match self.kind {
            PotentialKind::RieszKernel { pole } | PotentialKind::NewtonKernel { pole } => pole,
            PotentialKind::GreenBall { pole, .. } => pole,
            PotentialKind::Bump { .. } => return Ok(self),
        };
        let mut probe = pole;
        probe[0] += radius;
        let uncapped = PotentialSpec { cap: None, ..self.clone() };
        let c = uncapped.eval(&probe, k)?;
        Ok(self.with_cap(c))
    }

    /// Whether the function is superharmonic for the kernel (everything
    /// except bumps, given a kind that passed `validate`).
    pub fn is_superharmonic(&self) -> bool {
        !matches!(self.kind, PotentialKind::Bump { .. })
    }

    pub fn pole(&self) -> Option<Point> {
        match self.kind {
            PotentialKind::RieszKernel { pole }
            | PotentialKind::NewtonKernel { pole }
            | PotentialKind::GreenBall { pole, .. } => Some(pole),
            PotentialKind::Bump { .. } => None,
        }
    }

    /// Checks the kind against the kernel.
    pub fn validate(&self, k: &KernelSpec) -> Result<()> {
        let d = k.dim();
        let dims_ok = match self.kind {
            PotentialKind::RieszKernel { pole } | PotentialKind::NewtonKernel { pole } => pole.dim() == d,
            PotentialKind::GreenBall { pole, center, .. } => pole.dim() == d && center.dim() == d,
            PotentialKind::Bump { center, .. } => center.dim() == d,
        };
        if !dims_ok {
            return Err(Error::parameter(format!("potential {}: dimension mismatch", self.name)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::parameter(format!("potential {}: scale must be positive", self.name)));
        }
        match self.kind {
            PotentialKind::RieszKernel { .. } if k.is_classical() && d < 3 => Err(Error::parameter(
                "Riesz kernel with α = 2 needs d >= 3 (use a Green function in the plane)",
            )),
            PotentialKind::NewtonKernel { .. } if d < 3 => {
                Err(Error::parameter("Newton kernel needs d >= 3"))
            }
            PotentialKind::GreenBall { radius, pole, center } => {
                if !k.is_classical() {
                    Err(Error::parameter("ball Green functions are implemented for α = 2 only"))
                } else if !(radius > 0.0) || pole.dist(&center) >= radius {
                    Err(Error::parameter("Green function pole must lie inside its ball"))
                } else {
                    Ok(())
                }
            }
            PotentialKind::Bump { radius, .. } if !(radius > 0.0) => {
                Err(Error::parameter("bump radius must be positive"))
            }
            _ => Ok(()),
        }
    }

    fn raw(&self, x: &Point, k: &KernelSpec) -> f64 {
        let d = k.dim() as i32;
        match self.kind {
            PotentialKind::RieszKernel { pole } => x.dist(&pole).powf(k.alpha() - d as f64),
            PotentialKind::NewtonKernel { pole } => x.dist(&pole).powi(2 - d),
            PotentialKind::GreenBall { pole, center, radius } => {
                if x.dist_sq(&center) >= radius * radius {
                    return 0.0;
                }
                let r = x.dist(&pole);
                let t = pole.dist(&center);
                let g = if d == 2 {
                    if t == 0.0 {
                        (radius / r).ln()
                    } else {
                        let image = center + (pole - center) * (radius * radius / (t * t));
                        (t * x.dist(&image) / (radius * r)).ln()
                    }
                } else if t == 0.0 {
                    r.powi(2 - d) - radius.powi(2 - d)
                } else {
                    let image = center + (pole - center) * (radius * radius / (t * t));
                    r.powi(2 - d) - (radius / t).powi(d - 2) * x.dist(&image).powi(2 - d)
                };
                g.max(0.0)
            }
            PotentialKind::Bump { center, radius } => {
                let u = 1.0 - x.dist_sq(&center) / (radius * radius);
                if u > 0.0 {
                    u * u
                } else {
                    0.0
                }
            }
        }
    }

    pub fn eval(&self, x: &Point, k: &KernelSpec) -> Result<f64> {
        if let Some(p) = self.pole() {
            if x.dist_sq(&p) == 0.0 && self.cap.is_none() {
                return Err(Error::parameter(format!(
                    "uncapped potential {} evaluated at its pole",
                    self.name
                )));
            }
        }
        let v = self.scale * self.raw(x, k);
        Ok(match self.cap {
            Some(c) => v.min(c),
            None => v,
        })
    }
}

/// A finite family of test functions with a reference potential p.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dictionary {
    pub members: Vec<PotentialSpec>,
    pub reference: PotentialSpec,
    /// max over members and sample points of |q| / p.
    #[serde(default)]
    pub bound_multiple: f64,
}

impl Dictionary {
    pub fn new(members: Vec<PotentialSpec>, reference: PotentialSpec, k: &KernelSpec) -> Result<Self> {
        for q in members.iter().chain(std::iter::once(&reference)) {
            q.validate(k)?;
        }
        if !reference.is_superharmonic() {
            return Err(Error::parameter("reference p must be a potential"));
        }
        Ok(Dictionary {
            members,
            reference,
            bound_multiple: f64::NAN,
        })
    }

    /// Estimates the multiple c with |q| <= c·p on the given points.
    pub fn calibrate(&mut self, points: &[Point], k: &KernelSpec) -> Result<f64> {
        let mut c: f64 = 0.0;
        for x in points {
            let p = self.reference.eval(x, k)?;
            if !(p > 0.0) {
                return Err(Error::parameter("reference potential vanishes on the working region"));
            }
            for q in &self.members {
                c = c.max(q.eval(x, k)?.abs() / p);
            }
        }
        self.bound_multiple = c;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// The potential kernel of X with the given pole: the ball Green function
/// in the classical case on a ball domain, the Newton kernel in the
/// classical whole space (d >= 3), the Riesz kernel otherwise.
pub fn kernel_kind(k: &KernelSpec, domain: &DomainSpec, pole: Point) -> PotentialKind {
    match domain.kind {
        crate::geometry::DomainKind::OpenBall { center, radius } if k.is_classical() => {
            PotentialKind::GreenBall { pole, center, radius }
        }
        _ if k.is_classical() => PotentialKind::NewtonKernel { pole },
        _ => PotentialKind::RieszKernel { pole },
    }
}

/// Standard dictionary around a set of anchor points: one capped kernel
/// potential per anchor, one bump per anchor, and a normalized reference
/// p = min(1, scaled kernel at `center`).
///
/// For the classical planar case (or when the domain is a ball) the kernels
/// are Green functions of the domain ball.
pub fn standard_dictionary(
    k: &KernelSpec,
    domain: &DomainSpec,
    center: &Point,
    poles: &[Point],
    bumps: &[(Point, f64)],
    cap_radius: f64,
) -> Result<Dictionary> {
    let kernel_at = |pole: Point| kernel_kind(k, domain, pole);
    let mut members = Vec::new();
    for (i, &z) in poles.iter().enumerate() {
        members.push(PotentialSpec::new(format!("kernel{i}"), kernel_at(z)).capped_at_distance(cap_radius, k)?);
    }
    for (i, &(c, r)) in bumps.iter().enumerate() {
        members.push(PotentialSpec::new(format!("bump{i}"), PotentialKind::Bump { center: c, radius: r }));
    }
    // p = min(1, G(·, center)/G(center + cap_radius e₁, center))
    let base = PotentialSpec::new("p", kernel_at(*center));
    let mut probe = *center;
    probe[0] += cap_radius;
    let level = base.eval(&probe, k)?;
    let reference = base.with_scale(1.0 / level).with_cap(1.0);
    Dictionary::new(members, reference, k)
}
