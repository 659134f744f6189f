//! Fixed-size joint-space vector shared by every per-joint quantity.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Number of actuated axes: seven arm joints plus the gripper.
pub const JOINTS: usize = 8;

/// Gripper axis (joint 8) as a zero-based index.
pub const GRIPPER: usize = 7;

/// An 8-component joint-space vector. The unit depends on use (rad, rad/s,
/// rad/s², N·m or kg·m²).
#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVec(pub [f64; JOINTS]);

impl JointVec {
    pub const ZERO: JointVec = JointVec([0.0; JOINTS]);

    pub const fn new(values: [f64; JOINTS]) -> Self {
        JointVec(values)
    }

    pub const fn splat(v: f64) -> Self {
        JointVec([v; JOINTS])
    }

    /// Vector with `v` on one zero-based axis and zero elsewhere.
    pub fn unit(axis: usize, v: f64) -> Self {
        let mut out = Self::ZERO;
        out.0[axis] = v;
        out
    }

    pub fn from_slice(values: &[f64]) -> Option<Self> {
        let arr: [f64; JOINTS] = values.try_into().ok()?;
        Some(JointVec(arr))
    }

    pub fn as_array(&self) -> &[f64; JOINTS] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        JointVec(self.0.map(f))
    }

    pub fn zip_map(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = [0.0; JOINTS];
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(self.0[i], other.0[i]);
        }
        JointVec(out)
    }

    /// Component-wise product.
    pub fn hadamard(self, other: Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Index of the first non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Clamp every component into `[-limit, limit]`.
    pub fn clamp_abs(self, limit: f64) -> Self {
        self.map(|v| v.clamp(-limit, limit))
    }

    /// Bitwise equality, used for determinism checks.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl fmt::Debug for JointVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<[f64; JOINTS]> for JointVec {
    fn from(values: [f64; JOINTS]) -> Self {
        JointVec(values)
    }
}

impl Index<usize> for JointVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for JointVec {
    type Output = JointVec;
    fn add(self, rhs: JointVec) -> JointVec {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl AddAssign for JointVec {
    fn add_assign(&mut self, rhs: JointVec) {
        *self = *self + rhs;
    }
}

impl Sub for JointVec {
    type Output = JointVec;
    fn sub(self, rhs: JointVec) -> JointVec {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl SubAssign for JointVec {
    fn sub_assign(&mut self, rhs: JointVec) {
        *self = *self - rhs;
    }
}

impl Neg for JointVec {
    type Output = JointVec;
    fn neg(self) -> JointVec {
        self.map(|v| -v)
    }
}

impl Mul<f64> for JointVec {
    type Output = JointVec;
    fn mul(self, k: f64) -> JointVec {
        self.map(|v| v * k)
    }
}

impl Mul<JointVec> for f64 {
    type Output = JointVec;
    fn mul(self, v: JointVec) -> JointVec {
        v.map(|x| self * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_componentwise() {
        let a = JointVec::new([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let b = JointVec::splat(0.5);
        assert_eq!((a + b)[3], 4.5);
        assert_eq!((a - b)[0], 0.5);
        assert_eq!((2.0 * a)[7], 16.0);
        assert_eq!(a.hadamard(b)[1], 1.0);
        assert_eq!((-a)[2], -3.0);
        assert_eq!(a.max_abs(), 8.0);
    }

    #[test]
    fn from_slice_requires_eight() {
        assert!(JointVec::from_slice(&[0.0; 7]).is_none());
        assert!(JointVec::from_slice(&[0.0; 8]).is_some());
    }

    #[test]
    fn non_finite_detection() {
        let mut v = JointVec::ZERO;
        assert!(v.is_finite());
        v[5] = f64::NAN;
        assert_eq!(v.first_non_finite(), Some(5));
    }

    #[test]
    fn serializes_as_plain_array() {
        let v = JointVec::unit(3, 1.5);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, "[0.0,0.0,0.0,1.5,0.0,0.0,0.0,0.0]");
        let back: JointVec = serde_json::from_str(&s).unwrap();
        assert!(back.bit_eq(&v));
    }
}
