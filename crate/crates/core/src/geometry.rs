//! Array responses of the DFBS/UE uniform linear arrays and the RIS planar array.
//!
//! RIS elements are ordered row-major: the horizontal (`x`) axis is the outer
//! Kronecker factor, so element `a * n_axis + b` sits at horizontal position
//! `a` and vertical position `b`.

use ndarray::Array1;
use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::linalg::kron_vec;
use crate::scalar::Real;

/// An angle in degrees, as it appears on every external surface.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub fn new(degrees: f64) -> Result<Self> {
        if degrees.is_finite() {
            Ok(Self(degrees))
        } else {
            Err(invalid(format!("angle must be finite, got {degrees}")))
        }
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    /// True when strictly inside (-90°, 90°), the valid range for ULA angles.
    pub fn is_ula_angle(self) -> bool {
        self.0 > -90.0 && self.0 < 90.0
    }
}

/// Direction cosines `(v_x, v_y)` seen from the RIS.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DirectionCosine<T> {
    pub vx: T,
    pub vy: T,
}

impl<T: Real> DirectionCosine<T> {
    pub fn new(vx: T, vy: T) -> Result<Self> {
        let one = T::one();
        if !(vx.is_finite() && vy.is_finite()) || vx.abs() > one || vy.abs() > one {
            return Err(invalid(format!("direction cosines must lie in [-1, 1], got ({vx}, {vy})")));
        }
        Ok(Self { vx, vy })
    }

    /// Whether the pair corresponds to a physical direction (inside the unit disk).
    pub fn is_physical(&self) -> bool {
        self.vx * self.vx + self.vy * self.vy <= T::one() + T::epsilon() * T::lit(8.0)
    }

    pub fn cast<U: Real>(self) -> DirectionCosine<U> {
        DirectionCosine {
            vx: U::lit(self.vx.to_f64_lossy()),
            vy: U::lit(self.vy.to_f64_lossy()),
        }
    }
}

/// `v_x = sin ψ sin φ`, `v_y = sin ψ cos φ` for azimuth φ and elevation ψ.
pub fn direction_cosines<T: Real>(azimuth: AngleDeg, elevation: AngleDeg) -> DirectionCosine<T> {
    let (phi, psi) = (azimuth.radians(), elevation.radians());
    DirectionCosine {
        vx: T::lit(psi.sin() * phi.sin()),
        vy: T::lit(psi.sin() * phi.cos()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    /// DFBS transmit/receive ULA.
    UlaDfbs,
    /// UE ULA.
    UlaUe,
    /// One axis of the RIS.
    RisAxis,
    /// The whole RIS (Kronecker of both axes).
    RisFull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T> {
    pub entries: Array1<Complex<T>>,
    pub kind: ArrayKind,
}

impl<T: Real> SteeringVector<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_inner(self) -> Array1<Complex<T>> {
        self.entries
    }
}

/// Linear phase progression `exp(j * step * n)`, `n = 0..len`.
pub(crate) fn phase_ramp<T: Real>(step: T, len: usize) -> Array1<Complex<T>> {
    Array1::from_shape_fn(len, |n| Complex::from_polar(T::one(), step * T::from_usize_lossy(n)))
}

/// Half-wavelength ULA response: entry `n` is `exp(j (n-1) π sin θ)`.
pub fn ula_steering<T: Real>(theta: AngleDeg, n_elems: usize, kind: ArrayKind) -> Result<SteeringVector<T>> {
    if n_elems == 0 {
        return Err(invalid("ULA needs at least one element"));
    }
    let step = T::lit(std::f64::consts::PI * theta.radians().sin());
    Ok(SteeringVector {
        entries: phase_ramp(step, n_elems),
        kind,
    })
}

fn check_spacing<T: Real>(spacing: T) -> Result<()> {
    if !(spacing > T::zero() && spacing <= T::lit(0.5)) {
        return Err(invalid(format!("RIS element spacing must be in (0, 0.5] wavelengths, got {spacing}")));
    }
    Ok(())
}

/// One RIS axis: entry `n` is `exp(j 2π spacing (n-1) v)`.
pub fn ris_axis_steering<T: Real>(v: T, n_axis: usize, spacing: T) -> Result<SteeringVector<T>> {
    check_spacing(spacing)?;
    if n_axis == 0 {
        return Err(invalid("RIS axis needs at least one element"));
    }
    if !v.is_finite() || v.abs() > T::one() {
        return Err(invalid(format!("direction cosine must lie in [-1, 1], got {v}")));
    }
    Ok(SteeringVector {
        entries: axis_response(v, n_axis, spacing),
        kind: ArrayKind::RisAxis,
    })
}

/// Unchecked axis response, for hot loops whose inputs are already validated.
pub(crate) fn axis_response<T: Real>(v: T, n_axis: usize, spacing: T) -> Array1<Complex<T>> {
    phase_ramp(T::TAU() * spacing * v, n_axis)
}

/// Integer square root of a perfect square.
pub fn axis_len(n_ris: usize) -> Result<usize> {
    let r = (n_ris as f64).sqrt().round() as usize;
    if r == 0 || r * r != n_ris {
        return Err(invalid(format!("RIS size {n_ris} is not a positive perfect square")));
    }
    Ok(r)
}

/// Full RIS response `r_x(v_x) ⊗ r_y(v_y)`.
pub fn ris_full_steering<T: Real>(v: DirectionCosine<T>, n_ris: usize, spacing: T) -> Result<SteeringVector<T>> {
    let n_axis = axis_len(n_ris)?;
    let rx = ris_axis_steering(v.vx, n_axis, spacing)?;
    let ry = ris_axis_steering(v.vy, n_axis, spacing)?;
    Ok(SteeringVector {
        entries: kron_vec(rx.entries.view(), ry.entries.view()),
        kind: ArrayKind::RisFull,
    })
}
