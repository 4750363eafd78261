//! Fixed-capacity points in R^d.
//!
//! Walks evaluate distances millions of times, so points are small `Copy`
//! values rather than heap vectors. The dimension is carried at runtime.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 4;

#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    /// Origin of R^d. Panics if `dim` is 0 or exceeds [`MAX_DIM`].
    pub fn zero(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "dimension {dim} outside 1..={MAX_DIM}"
        );
        Point {
            coords: [0.0; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn new(coords: &[f64]) -> Self {
        let mut p = Point::zero(coords.len());
        p.coords[..coords.len()].copy_from_slice(coords);
        p
    }

    /// The unit vector `e_axis` in R^d.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut p = Point::zero(dim);
        p.coords[axis] = 1.0;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim() {
            s += self.coords[i] * other.coords[i];
        }
        s
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist_sq(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim() {
            let t = self.coords[i] - other.coords[i];
            s += t * t;
        }
        s
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }
}

impl Index<usize> for Point {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim());
        &self.coords[i]
    }
}

impl IndexMut<usize> for Point {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.dim());
        &mut self.coords[i]
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(mut self, rhs: Point) -> Point {
        for i in 0..self.dim() {
            self.coords[i] += rhs.coords[i];
        }
        self
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(mut self, rhs: Point) -> Point {
        for i in 0..self.dim() {
            self.coords[i] -= rhs.coords[i];
        }
        self
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(mut self, s: f64) -> Point {
        for i in 0..self.dim() {
            self.coords[i] *= s;
        }
        self
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        self * -1.0
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point must have between 1 and {MAX_DIM} coordinates, got {}",
                v.len()
            )));
        }
        Ok(Point::new(&v))
    }
}
