//! Angle arithmetic and two-component (Jones) field algebra.
//!
//! Polarization is a direction, not a vector, so every [`Angle`] lives in
//! `[0, π)`. Jones vectors are stored in the fixed lab basis `(x, y)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Tolerance for comparing angles (radians, mod π).
pub const ANGLE_TOL: f64 = 1e-9;

/// Relative tolerance of the linear-polarization predicate.
pub const LINEAR_TOL: f64 = 1e-9;

pub type ComplexAmp = Complex64;

/// A polarization direction or cube setting, canonical in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn new(radians: f64) -> Result<Self> {
        normalize_angle(radians)
    }

    /// Degrees in, canonical radians out.
    pub fn from_degrees(degrees: f64) -> Result<Self> {
        normalize_angle(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// The orthogonal direction, `self + π/2 (mod π)`.
    pub fn perpendicular(self) -> Angle {
        self.offset(FRAC_PI_2)
    }

    /// `self + rho (mod π)`. `rho` must be finite.
    pub fn offset(self, rho: f64) -> Angle {
        Angle(wrap_pi(self.0 + rho))
    }

    /// Signed difference `self - other`, reduced to `[-π/2, π/2)`.
    pub fn diff(self, other: Angle) -> f64 {
        angle_diff(self, other)
    }

    /// Equality mod π within [`ANGLE_TOL`].
    pub fn approx_eq(self, other: Angle) -> bool {
        self.diff(other).abs() <= ANGLE_TOL
    }

    /// True when `self` equals `other` or `other + π/2` (mod π).
    pub fn aligned_with(self, other: Angle) -> bool {
        self.approx_eq(other) || self.approx_eq(other.perpendicular())
    }

    pub fn unit(self) -> (f64, f64) {
        (self.0.cos(), self.0.sin())
    }

    /// `(cos, sin)` of `self + π/2` without reducing mod π, so the
    /// orthogonal axis keeps a fixed orientation relative to `unit()`.
    pub fn perp_unit(self) -> (f64, f64) {
        (-self.0.sin(), self.0.cos())
    }
}

impl TryFrom<f64> for Angle {
    type Error = LabError;

    fn try_from(value: f64) -> Result<Self> {
        normalize_angle(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn wrap_pi(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    // rem_euclid can round up to exactly π for tiny negative inputs.
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Reduces a finite angle in radians to its canonical representative in `[0, π)`.
pub fn normalize_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(LabError::InvalidInput(format!(
            "angle must be finite, got {x}"
        )));
    }
    Ok(Angle(wrap_pi(x)))
}

/// `a - b` reduced to `[-π/2, π/2)`.
pub fn angle_diff(a: Angle, b: Angle) -> f64 {
    let d = wrap_pi(a.0 - b.0 + FRAC_PI_2) - FRAC_PI_2;
    if d >= FRAC_PI_2 {
        d - PI
    } else {
        d
    }
}

/// Malus' law: the transmitted fraction `cos²(delta)`.
pub fn malus(delta: f64) -> f64 {
    let c = delta.cos();
    c * c
}

/// A complex two-component field in the lab basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub ex: ComplexAmp,
    pub ey: ComplexAmp,
}

impl JonesVector {
    pub const ZERO: JonesVector = JonesVector {
        ex: Complex64::new(0.0, 0.0),
        ey: Complex64::new(0.0, 0.0),
    };

    pub fn new(ex: ComplexAmp, ey: ComplexAmp) -> Result<Self> {
        if !(ex.re.is_finite() && ex.im.is_finite() && ey.re.is_finite() && ey.im.is_finite()) {
            return Err(LabError::InvalidInput(
                "Jones components must be finite".into(),
            ));
        }
        Ok(JonesVector { ex, ey })
    }

    pub fn real(ex: f64, ey: f64) -> Result<Self> {
        Self::new(Complex64::new(ex, 0.0), Complex64::new(ey, 0.0))
    }

    /// `amp * (cos a, sin a)`.
    pub fn along(axis: Angle, amp: ComplexAmp) -> Self {
        Self::along_unit(axis.unit(), amp)
    }

    /// `amp * (ux, uy)` for a real unit vector.
    pub fn along_unit((ux, uy): (f64, f64), amp: ComplexAmp) -> Self {
        JonesVector {
            ex: amp * ux,
            ey: amp * uy,
        }
    }

    pub fn intensity(&self) -> f64 {
        self.ex.norm_sqr() + self.ey.norm_sqr()
    }

    /// Amplitude of the projection onto the real unit vector at `axis`.
    pub fn project(&self, axis: Angle) -> ComplexAmp {
        self.project_unit(axis.unit())
    }

    pub fn project_unit(&self, (ux, uy): (f64, f64)) -> ComplexAmp {
        self.ex * ux + self.ey * uy
    }

    pub fn scale(&self, k: ComplexAmp) -> Self {
        JonesVector {
            ex: self.ex * k,
            ey: self.ey * k,
        }
    }

    pub fn add(&self, other: &JonesVector) -> Self {
        JonesVector {
            ex: self.ex + other.ex,
            ey: self.ey + other.ey,
        }
    }

    /// Signed circular share `2 Im(ex conj(ey)) / I`; zero for linear light.
    pub fn circular_fraction(&self) -> f64 {
        let i = self.intensity();
        if i == 0.0 {
            return 0.0;
        }
        2.0 * (self.ex * self.ey.conj()).im / i
    }

    pub fn is_linear(&self) -> bool {
        (self.ex * self.ey.conj()).im.abs() <= LINEAR_TOL * self.intensity()
    }

    /// Componentwise comparison within an absolute tolerance.
    pub fn approx_eq(&self, other: &JonesVector, tol: f64) -> bool {
        (self.ex - other.ex).norm() <= tol && (self.ey - other.ey).norm() <= tol
    }
}

/// `e^{i phase} √intensity (cos τ, sin τ)`.
pub fn jones_from_angle(tau: Angle, intensity: f64, phase: f64) -> Result<JonesVector> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(LabError::InvalidInput(format!(
            "intensity must be finite and non-negative, got {intensity}"
        )));
    }
    if !phase.is_finite() {
        return Err(LabError::InvalidInput(format!(
            "phase must be finite, got {phase}"
        )));
    }
    Ok(JonesVector::along(
        tau,
        Complex64::from_polar(intensity.sqrt(), phase),
    ))
}

/// Polarization direction of a linearly polarized beam, ignoring global phase.
pub fn pol_angle(v: &JonesVector) -> Result<Angle> {
    let i = v.intensity();
    if i == 0.0 {
        return Err(LabError::Degenerate(
            "zero field has no polarization".into(),
        ));
    }
    if !v.is_linear() {
        return Err(LabError::NotLinear {
            circular_fraction: v.circular_fraction(),
        });
    }
    // Rotate the dominant component onto the positive real axis.
    let pivot = if v.ex.norm_sqr() >= v.ey.norm_sqr() {
        v.ex
    } else {
        v.ey
    };
    let unphase = pivot.conj() / pivot.norm();
    let x = (v.ex * unphase).re;
    let y = (v.ey * unphase).re;
    normalize_angle(y.atan2(x))
}
