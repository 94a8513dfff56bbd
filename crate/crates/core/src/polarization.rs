//! Pure-state polarization algebra.
//!
//! States are stored as a normalized Jones pair `(c_H, c_V)`. The Stokes map
//! uses `s1 = |c_H|² − |c_V|²`, `s2 = 2 Re(c_H* c_V)`, `s3 = 2 Im(c_H* c_V)`,
//! so `H` sits at `+s1`, the diagonal state at `+s2` and the state
//! `(H + iV)/√2` at `+s3`.
//!
//! Rotations on the Poincaré sphere are represented either geometrically
//! ([`PolRotation`]: axis and retardance) or as the equivalent SU(2) matrix
//! ([`Jones`]). A retardance `δ` about axis `n` acts on states as
//! `exp(−i δ/2 n·σ)` and rotates Stokes vectors right-handedly by `δ`.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that caller-supplied Stokes vectors are unit length.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarizationError {
    #[error("Stokes vector is not unit length (|s| = {norm})")]
    NotUnit { norm: f64 },
    #[error("amplitude pair has zero norm")]
    ZeroAmplitude,
    #[error("rotation axis has zero length")]
    ZeroAxis,
    #[error("non-finite value in polarization input")]
    NonFinite,
}

/// A pure polarization state `cos θ |H⟩ + e^{iφ} sin θ |V⟩`, up to global phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    h: Complex64,
    v: Complex64,
}

impl PolarizationState {
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            h: Complex64::new(theta.cos(), 0.0),
            v: Complex64::from_polar(theta.sin(), phi),
        }
    }

    /// Builds a state from an arbitrary nonzero amplitude pair, normalizing it.
    pub fn from_amplitudes(h: Complex64, v: Complex64) -> Result<Self, PolarizationError> {
        if !(h.re.is_finite() && h.im.is_finite() && v.re.is_finite() && v.im.is_finite()) {
            return Err(PolarizationError::NonFinite);
        }
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(PolarizationError::ZeroAmplitude);
        }
        Ok(Self { h: h / norm, v: v / norm })
    }

    /// The pure state whose Stokes vector points along `s` (normalized first).
    pub fn from_stokes(s: &StokesVector) -> Result<Self, PolarizationError> {
        let n = s.norm();
        if !n.is_finite() {
            return Err(PolarizationError::NonFinite);
        }
        if n == 0.0 {
            return Err(PolarizationError::ZeroAmplitude);
        }
        let (s1, s2, s3) = (s.s1 / n, s.s2 / n, s.s3 / n);
        let theta = 0.5 * s1.clamp(-1.0, 1.0).acos();
        let phi = s3.atan2(s2);
        Ok(Self::from_angles(theta, phi))
    }

    pub fn horizontal() -> Self {
        Self::from_angles(0.0, 0.0)
    }

    pub fn vertical() -> Self {
        Self::from_angles(PI / 2.0, 0.0)
    }

    pub fn diagonal() -> Self {
        Self::from_angles(PI / 4.0, 0.0)
    }

    /// The state with the given expectation value `⟨Ô⟩ = cos 2θ` and relative phase.
    pub fn with_expectation(expectation: f64, phi: f64) -> Self {
        Self::from_angles(0.5 * expectation.clamp(-1.0, 1.0).acos(), phi)
    }

    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        (self.h, self.v)
    }

    /// Canonical angles: `θ ∈ [0, π/2]`, `φ ∈ (−π, π]`. `φ` is reported as 0
    /// when either amplitude vanishes.
    pub fn angles(&self) -> (f64, f64) {
        let (ah, av) = (self.h.norm(), self.v.norm());
        let theta = av.atan2(ah);
        let phi = if ah == 0.0 || av == 0.0 {
            0.0
        } else {
            wrap_phase(self.v.arg() - self.h.arg())
        };
        (theta, phi)
    }

    pub fn theta(&self) -> f64 {
        self.angles().0
    }

    pub fn phi(&self) -> f64 {
        self.angles().1
    }

    /// `⟨Ô⟩` for `Ô = |H⟩⟨H| − |V⟩⟨V|`.
    pub fn expectation(&self) -> f64 {
        self.h.norm_sqr() - self.v.norm_sqr()
    }

    pub fn to_stokes(&self) -> StokesVector {
        to_stokes(self)
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        let u = Complex64::from_polar(1.0, phase);
        Self { h: self.h * u, v: self.v * u }
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub const fn new(s1: f64, s2: f64, s3: f64) -> Self {
        Self { s1, s2, s3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.s1 * other.s1 + self.s2 * other.s2 + self.s3 * other.s3
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.s2 * other.s3 - self.s3 * other.s2,
            self.s3 * other.s1 - self.s1 * other.s3,
            self.s1 * other.s2 - self.s2 * other.s1,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.s1 * k, self.s2 * k, self.s3 * k)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.s1 + other.s1, self.s2 + other.s2, self.s3 + other.s3)
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale(1.0 / n))
    }

    /// Angle between the two vectors on the sphere, in radians.
    pub fn angle_to(&self, other: &Self) -> f64 {
        self.cross(other).norm().atan2(self.dot(other))
    }

    /// Rodrigues rotation of this vector by `r`.
    pub fn rotated(&self, r: &PolRotation) -> Self {
        let k = StokesVector::from_array(r.axis);
        let (s, c) = r.retardance.sin_cos();
        let kxv = k.cross(self);
        let kdv = k.dot(self);
        self.scale(c).add(&kxv.scale(s)).add(&k.scale(kdv * (1.0 - c)))
    }

    fn check_unit(&self) -> Result<(), PolarizationError> {
        let n = self.norm();
        if !n.is_finite() {
            return Err(PolarizationError::NonFinite);
        }
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(PolarizationError::NotUnit { norm: n });
        }
        Ok(())
    }
}

/// A retarder: rotation of the Poincaré sphere by `retardance` about `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolRotation {
    axis: [f64; 3],
    retardance: f64,
}

impl PolRotation {
    pub fn new(axis: [f64; 3], retardance: f64) -> Result<Self, PolarizationError> {
        if !(axis.iter().all(|x| x.is_finite()) && retardance.is_finite()) {
            return Err(PolarizationError::NonFinite);
        }
        let n = StokesVector::from_array(axis).norm();
        if n == 0.0 {
            return Err(PolarizationError::ZeroAxis);
        }
        Ok(Self {
            axis: [axis[0] / n, axis[1] / n, axis[2] / n],
            retardance,
        })
    }

    pub fn about_s1(retardance: f64) -> Self {
        Self { axis: [1.0, 0.0, 0.0], retardance }
    }

    pub fn about_s2(retardance: f64) -> Self {
        Self { axis: [0.0, 1.0, 0.0], retardance }
    }

    pub fn about_s3(retardance: f64) -> Self {
        Self { axis: [0.0, 0.0, 1.0], retardance }
    }

    pub fn identity() -> Self {
        Self::about_s1(0.0)
    }

    /// The shortest rotation carrying `from` onto `to` (both taken as directions).
    pub fn between(from: &StokesVector, to: &StokesVector) -> Result<Self, PolarizationError> {
        let a = from.normalized().ok_or(PolarizationError::ZeroAxis)?;
        let b = to.normalized().ok_or(PolarizationError::ZeroAxis)?;
        let axis = a.cross(&b);
        let angle = a.angle_to(&b);
        if axis.norm() > 1e-12 {
            return Self::new(axis.to_array(), angle);
        }
        if a.dot(&b) > 0.0 {
            return Ok(Self::identity());
        }
        // antiparallel: any axis perpendicular to `a`
        let helper = if a.s1.abs() < 0.9 {
            StokesVector::new(1.0, 0.0, 0.0)
        } else {
            StokesVector::new(0.0, 1.0, 0.0)
        };
        Self::new(a.cross(&helper).to_array(), PI)
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn retardance(&self) -> f64 {
        self.retardance
    }

    pub fn inverse(&self) -> Self {
        Self { axis: self.axis, retardance: -self.retardance }
    }

    pub fn jones(&self) -> Jones {
        Jones::from_rotation(self)
    }
}

/// A 2×2 unitary acting on Jones pairs `(c_H, c_V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones {
    m: [[Complex64; 2]; 2],
}

impl Jones {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { m: [[one, zero], [zero, one]] }
    }

    /// `exp(−i δ/2 n·σ)` with `σ = (σ_1, σ_2, σ_3)` the Pauli matrices matched
    /// to the Stokes convention of this module.
    pub fn from_rotation(r: &PolRotation) -> Self {
        let (s, c) = (0.5 * r.retardance).sin_cos();
        let [n1, n2, n3] = r.axis;
        // n·σ = [[n1, n2 − i n3], [n2 + i n3, −n1]]
        let i = Complex64::i();
        let m00 = Complex64::new(c, 0.0) - i * s * n1;
        let m11 = Complex64::new(c, 0.0) + i * s * n1;
        let m01 = -i * s * Complex64::new(n2, -n3);
        let m10 = -i * s * Complex64::new(n2, n3);
        Self { m: [[m00, m01], [m10, m11]] }
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        let m = self.m;
        Self {
            m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    pub fn apply(&self, p: &PolarizationState) -> PolarizationState {
        let (h, v) = p.amplitudes();
        let nh = self.m[0][0] * h + self.m[0][1] * v;
        let nv = self.m[1][0] * h + self.m[1][1] * v;
        // unitary, so the pair stays normalized up to rounding
        PolarizationState::from_amplitudes(nh, nv).unwrap_or(*p)
    }

    /// The SO(3) rotation this unitary induces on Stokes vectors (row-major).
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let images = [
            self.apply(&PolarizationState::horizontal()).to_stokes(),
            self.apply(&PolarizationState::diagonal()).to_stokes(),
            self.apply(&PolarizationState::from_angles(PI / 4.0, PI / 2.0)).to_stokes(),
        ];
        let mut r = [[0.0; 3]; 3];
        for (col, img) in images.iter().enumerate() {
            let a = img.to_array();
            for row in 0..3 {
                r[row][col] = a[row];
            }
        }
        r
    }
}

impl Mul for Jones {
    type Output = Jones;

    fn mul(self, rhs: Jones) -> Jones {
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * rhs.m[0][j] + self.m[i][1] * rhs.m[1][j];
            }
        }
        Jones { m: out }
    }
}

pub fn to_stokes(p: &PolarizationState) -> StokesVector {
    let (h, v) = p.amplitudes();
    let cross = h.conj() * v;
    StokesVector::new(h.norm_sqr() - v.norm_sqr(), 2.0 * cross.re, 2.0 * cross.im)
}

/// `F = (1 + s_a·s_b) / 2`. Both inputs must be unit vectors.
pub fn fidelity(a: &StokesVector, b: &StokesVector) -> Result<f64, PolarizationError> {
    a.check_unit()?;
    b.check_unit()?;
    Ok((0.5 * (1.0 + a.dot(b))).clamp(0.0, 1.0))
}

pub fn apply_rotation(r: &PolRotation, p: &PolarizationState) -> PolarizationState {
    r.jones().apply(p)
}

/// `⟨a|b⟩`.
pub fn projector_overlap(a: &PolarizationState, b: &PolarizationState) -> Complex64 {
    let (ah, av) = a.amplitudes();
    let (bh, bv) = b.amplitudes();
    ah.conj() * bh + av.conj() * bv
}
