//! N-RoSy fields: power representation, canonical roots and angular error.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Where the representatives of a field live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Vertices,
    Faces,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Vertices => "vertices",
            Domain::Faces => "faces",
        }
    }
}

/// Per-element representatives of an N-RoSy field, expressed in the tangent
/// frames identified by `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct RosyField {
    pub values: Vec<Complex64>,
    pub order: u32,
    pub domain: Domain,
    /// Fingerprint of the frame the coefficients refer to.
    pub frame: u64,
}

impl RosyField {
    pub fn new(values: Vec<Complex64>, order: u32, domain: Domain, frame: u64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("rosy order must be at least 1".into()));
        }
        Ok(RosyField { values, order, domain, frame })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_power(&self) -> Vec<Complex64> {
        to_power(&self.values, self.order)
    }
}

pub fn to_power(values: &[Complex64], order: u32) -> Vec<Complex64> {
    values.iter().map(|z| z.powu(order)).collect()
}

/// Canonical N-th root: magnitude `|p|^{1/N}`, argument in `[0, 2π/N)`.
pub fn canonical_root(p: Complex64, order: u32) -> Complex64 {
    let r = p.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut arg = p.im.atan2(p.re);
    if arg < 0.0 {
        arg += 2.0 * PI;
    }
    let n = order as f64;
    let mut theta = arg / n;
    if theta >= 2.0 * PI / n {
        theta = 0.0;
    }
    Complex64::from_polar(r.powf(1.0 / n), theta)
}

pub fn from_power(power: &[Complex64], order: u32, domain: Domain, frame: u64) -> Result<RosyField> {
    let values = power.iter().map(|&p| canonical_root(p, order)).collect();
    RosyField::new(values, order, domain, frame)
}

/// Smallest rotation between the N-RoSy classes of `a` and `b`, in `[0, π/N]`.
pub fn rosy_angle(a: Complex64, b: Complex64, order: u32) -> f64 {
    let d = a * b.conj();
    if d.norm() == 0.0 {
        return 0.0;
    }
    let n = order as f64;
    let period = 2.0 * PI / n;
    let raw = d.im.atan2(d.re) % period;
    let t = if raw < 0.0 { raw + period } else { raw };
    t.min(period - t).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularError {
    pub per_element: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl AngularError {
    pub fn from_angles(per_element: Vec<f64>) -> Self {
        let n = per_element.len();
        if n == 0 {
            return AngularError { per_element, mean: 0.0, median: 0.0, max: 0.0 };
        }
        let mean = per_element.iter().sum::<f64>() / n as f64;
        let max = per_element.iter().copied().fold(0.0, f64::max);
        let mut sorted = per_element.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
        AngularError { per_element, mean, median, max }
    }
}

pub fn angular_error(a: &RosyField, b: &RosyField) -> Result<AngularError> {
    if a.domain != b.domain {
        return Err(Error::InvalidConfig("angular error between fields on different domains".into()));
    }
    if a.order != b.order {
        return Err(Error::InvalidConfig("angular error between fields of different order".into()));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let angles = a.values.iter().zip(&b.values).map(|(&x, &y)| rosy_angle(x, y, a.order)).collect();
    Ok(AngularError::from_angles(angles))
}
