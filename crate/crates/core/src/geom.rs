//! Small fixed-size point/vector type for d ∈ {1, 2}.
//!
//! Points always carry two components; in one dimension the second is zero
//! and all norms/dots take the active dimension explicitly where it matters.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; 2]);

impl Point {
    pub const ZERO: Point = Point([0.0, 0.0]);

    pub fn new(x: f64, y: f64) -> Self {
        Point([x, y])
    }

    /// One-dimensional point (second component zero).
    pub fn x(v: f64) -> Self {
        Point([v, 0.0])
    }

    pub fn dot(self, other: Point) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn scale(self, c: f64) -> Point {
        Point([self.0[0] * c, self.0[1] * c])
    }

    pub fn is_finite(self) -> bool {
        self.0[0].is_finite() && self.0[1].is_finite()
    }

    /// Component along `axis`.
    pub fn get(self, axis: usize) -> f64 {
        self.0[axis]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, rhs: Point) {
        self.0[0] += rhs.0[0];
        self.0[1] += rhs.0[1];
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point([-self.0[0], -self.0[1]])
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, c: f64) -> Point {
        self.scale(c)
    }
}

/// Symmetric 2x2 matrix stored as [a11, a22, a12]; used for drift gradients
/// and Hessian actions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymMat(pub [f64; 3]);

impl SymMat {
    pub fn apply(self, v: Point) -> Point {
        Point([
            self.0[0] * v.0[0] + self.0[2] * v.0[1],
            self.0[2] * v.0[0] + self.0[1] * v.0[1],
        ])
    }

    pub fn trace(self, dim: usize) -> f64 {
        if dim == 1 {
            self.0[0]
        } else {
            self.0[0] + self.0[1]
        }
    }

    pub fn quadratic_form(self, v: Point) -> f64 {
        v.dot(self.apply(v))
    }
}

/// General (not necessarily symmetric) 2x2 matrix, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2(pub [f64; 4]);

impl Mat2 {
    pub fn apply(self, v: Point) -> Point {
        Point([
            self.0[0] * v.0[0] + self.0[1] * v.0[1],
            self.0[2] * v.0[0] + self.0[3] * v.0[1],
        ])
    }
}
