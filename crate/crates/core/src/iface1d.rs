//! Two-sided one-dimensional quantum-interface model.
//!
//! A single collective dipole `P` couples at rate `Γ` to a target mode built
//! from the right- and left-propagating fields with coefficients `c±`, and
//! decays at rate `γ_loss` into everything else. Rates are in units of the
//! single-atom decay rate γ.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Propagation side of an input or output field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Right-propagating (`+z`).
    Plus,
    /// Left-propagating (`-z`).
    Minus,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }

    pub fn sign<T: Real>(self) -> T {
        match self {
            Side::Plus => T::one(),
            Side::Minus => -T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// Effective parameters `(Γ_q, γ_loss, Δ_q)` of the 1D model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceParams<T> {
    pub coupling_rate: T,
    pub loss_rate: T,
    pub collective_shift: T,
}

impl<T: Real> InterfaceParams<T> {
    pub fn new(coupling_rate: T, loss_rate: T, collective_shift: T) -> Result<Self> {
        let p = InterfaceParams {
            coupling_rate,
            loss_rate,
            collective_shift,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling_rate >= T::zero()) || !self.coupling_rate.is_finite() {
            return Err(Error::invalid(
                "coupling_rate",
                format!("must be finite and >= 0, got {}", self.coupling_rate),
            ));
        }
        if !(self.loss_rate >= T::zero()) || !self.loss_rate.is_finite() {
            return Err(Error::invalid(
                "loss_rate",
                format!("must be finite and >= 0, got {}", self.loss_rate),
            ));
        }
        if !self.collective_shift.is_finite() {
            return Err(Error::invalid("collective_shift", "must be finite"));
        }
        Ok(())
    }

    pub fn total_rate(&self) -> T {
        self.coupling_rate + self.loss_rate
    }

    /// Complex amplitude decay constant `(Γ+γ_loss)/2 − i(δ−Δ)`.
    fn denominator(&self, detuning: T) -> Complex<T> {
        Complex::new(
            self.total_rate() / T::lit(2.0),
            -(detuning - self.collective_shift),
        )
    }

    /// Response `s = 1 − Γ/D` of the target mode: `ℰ_q,out = s ℰ_q,in`.
    pub fn mode_response(&self, detuning: T) -> Result<Complex<T>> {
        let d = self.denominator(detuning);
        if d.norm() <= T::min_positive_value() {
            return Err(Error::SingularSteadyState);
        }
        Ok(Complex::new(T::one(), T::zero()) - Complex::new(self.coupling_rate, T::zero()) / d)
    }
}

/// Overlap coefficients `c±` of the target mode with the two propagation
/// directions. Normalized: `|c+|² + |c−|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients<T> {
    pub c_plus: Complex<T>,
    pub c_minus: Complex<T>,
}

pub(crate) fn norm_tolerance<T: Real>() -> T {
    T::epsilon() * T::lit(1.0e4)
}

impl<T: Real> ModeCoefficients<T> {
    pub fn new(c_plus: Complex<T>, c_minus: Complex<T>) -> Result<Self> {
        let n = c_plus.norm_sqr() + c_minus.norm_sqr();
        if (n - T::one()).abs() > norm_tolerance::<T>() {
            return Err(Error::invalid(
                "mode_coefficients",
                format!("|c+|^2 + |c-|^2 = {n}, expected 1"),
            ));
        }
        Ok(ModeCoefficients { c_plus, c_minus })
    }

    /// Rescales an arbitrary nonzero pair onto the unit sphere.
    pub fn normalized(c_plus: Complex<T>, c_minus: Complex<T>) -> Result<Self> {
        let n = (c_plus.norm_sqr() + c_minus.norm_sqr()).sqrt();
        if !(n > T::zero()) {
            return Err(Error::invalid("mode_coefficients", "both coefficients are zero"));
        }
        Ok(ModeCoefficients {
            c_plus: c_plus / n,
            c_minus: c_minus / n,
        })
    }

    /// Symmetric coupling `c+ = c− = 1/√2`.
    pub fn symmetric() -> Self {
        let h = T::FRAC_1_SQRT_2();
        ModeCoefficients {
            c_plus: Complex::new(h, T::zero()),
            c_minus: Complex::new(h, T::zero()),
        }
    }

    pub fn on(&self, side: Side) -> Complex<T> {
        match side {
            Side::Plus => self.c_plus,
            Side::Minus => self.c_minus,
        }
    }
}

/// Reflection and transmission amplitudes. Output fields obey
/// `ℰ± = t± ℰ±,in + r∓ ℰ∓,in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult<T> {
    pub r_plus: Complex<T>,
    pub r_minus: Complex<T>,
    pub t_plus: Complex<T>,
    pub t_minus: Complex<T>,
}

impl<T: Real> ScatteringResult<T> {
    pub fn transmission(&self, side: Side) -> Complex<T> {
        match side {
            Side::Plus => self.t_plus,
            Side::Minus => self.t_minus,
        }
    }

    pub fn reflection(&self, side: Side) -> Complex<T> {
        match side {
            Side::Plus => self.r_plus,
            Side::Minus => self.r_minus,
        }
    }

    /// `|r±|² + |t±|²` for light incident on `side`.
    pub fn power(&self, side: Side) -> T {
        self.reflection(side).norm_sqr() + self.transmission(side).norm_sqr()
    }
}

/// A classical input field on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Input<T> {
    pub side: Side,
    pub amplitude: Complex<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState<T> {
    pub dipole_amplitude: Complex<T>,
    pub out_plus: Complex<T>,
    pub out_minus: Complex<T>,
}

/// Classical steady state of the 1D model under a monochromatic input.
///
/// `P = i√Γ ℰ_q,in / [(Γ+γ_loss)/2 − i(δ−Δ)]`; the outputs are the inputs plus
/// `i√Γ P` redistributed on the two directions with weights `c±*`. The mode
/// orthogonal to the target mode passes unscattered.
pub fn steady_state_response<T: Real>(
    params: &InterfaceParams<T>,
    detuning: T,
    coeffs: &ModeCoefficients<T>,
    input: Input<T>,
) -> Result<SteadyState<T>> {
    params.validate()?;
    let d = params.denominator(detuning);
    if d.norm() <= T::min_positive_value() {
        return Err(Error::SingularSteadyState);
    }
    let (a_plus, a_minus) = match input.side {
        Side::Plus => (input.amplitude, Complex::new(T::zero(), T::zero())),
        Side::Minus => (Complex::new(T::zero(), T::zero()), input.amplitude),
    };
    let i = Complex::new(T::zero(), T::one());
    let sqrt_g = params.coupling_rate.sqrt();
    let mode_in = coeffs.c_plus * a_plus + coeffs.c_minus * a_minus;
    let dipole = i * sqrt_g * mode_in / d;
    let emitted = i * sqrt_g * dipole;
    Ok(SteadyState {
        dipole_amplitude: dipole,
        out_plus: a_plus + emitted * coeffs.c_plus.conj(),
        out_minus: a_minus + emitted * coeffs.c_minus.conj(),
    })
}

/// Full scattering matrix of the 1D model at detuning `δ`.
pub fn scattering_from_params<T: Real>(
    params: &InterfaceParams<T>,
    detuning: T,
    coeffs: &ModeCoefficients<T>,
) -> Result<ScatteringResult<T>> {
    let one = Complex::new(T::one(), T::zero());
    let from_left = steady_state_response(
        params,
        detuning,
        coeffs,
        Input {
            side: Side::Plus,
            amplitude: one,
        },
    )?;
    let from_right = steady_state_response(
        params,
        detuning,
        coeffs,
        Input {
            side: Side::Minus,
            amplitude: one,
        },
    )?;
    Ok(ScatteringResult {
        t_plus: from_left.out_plus,
        r_plus: from_left.out_minus,
        t_minus: from_right.out_minus,
        r_minus: from_right.out_plus,
    })
}

/// `r_q = Γ/(Γ + γ_loss)`.
pub fn efficiency_from_params<T: Real>(params: &InterfaceParams<T>) -> Result<T> {
    params.validate()?;
    let total = params.total_rate();
    if !(total > T::zero()) {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(params.coupling_rate / total)
}

/// Efficiency from scattering observables measured from one side:
/// `r_q = ½[1 − t± − r± (c∓/c±)]`.
///
/// The result is complex; at resonance its imaginary part vanishes and the
/// real part is the physical efficiency.
pub fn efficiency_from_scattering<T: Real>(
    s: &ScatteringResult<T>,
    coeffs: &ModeCoefficients<T>,
    side: Side,
) -> Result<Complex<T>> {
    let c_here = coeffs.on(side);
    if c_here.norm() <= T::epsilon() {
        return Err(Error::ZeroModeCoefficient { side: side.name() });
    }
    let ratio = coeffs.on(side.opposite()) / c_here;
    let one = Complex::new(T::one(), T::zero());
    Ok((one - s.transmission(side) - s.reflection(side) * ratio) * T::lit(0.5))
}
