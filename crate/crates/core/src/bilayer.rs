//! Two identical layers separated by `a_z`: interlayer kernel, collective
//! modes `q ∈ {0, π}`, their effective 1D parameters, and plane-wave
//! scattering of the infinite bilayer.
//!
//! The single-layer evanescent self-energy diverges in the reciprocal-space
//! sum and is dropped: every shift is measured from the isolated-layer
//! resonance. The kernel diagonal therefore carries only radiative decay.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iface1d::{InterfaceParams, ModeCoefficients, ScatteringResult};
use crate::lattice::{DiffractionOrder, LayerGeometry};
use crate::scalar::{cis, mode_sign, Real};

/// Collective mode of the bilayer, `P_q = (P₁ + e^{iq} P₂)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// `q = 0`.
    InPhase,
    /// `q = π`.
    OutOfPhase,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::InPhase, Mode::OutOfPhase];

    pub fn is_pi(self) -> bool {
        matches!(self, Mode::OutOfPhase)
    }

    /// `e^{iq}` = ±1.
    pub fn sign<T: Real>(self) -> T {
        mode_sign(self.is_pi())
    }

    /// Binary index: 0 for `q = 0`, 1 for `q = π`.
    pub fn index(self) -> u8 {
        self.is_pi() as u8
    }

    pub fn from_index(i: u8) -> Result<Mode> {
        match i {
            0 => Ok(Mode::InPhase),
            1 => Ok(Mode::OutOfPhase),
            _ => Err(Error::invalid("q", format!("mode index must be 0 or 1, got {i}"))),
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::InPhase => Mode::OutOfPhase,
            Mode::OutOfPhase => Mode::InPhase,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" => Ok(Mode::InPhase),
            "pi" | "1" | "π" => Ok(Mode::OutOfPhase),
            other => Err(Error::invalid("q", format!("expected 0 or pi, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.is_pi() { "pi" } else { "0" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilayerConfig<T> {
    pub layer: LayerGeometry<T>,
    /// `a_z`, units of λ.
    pub interlayer_spacing: T,
    /// In-plane displacement of layer 2 relative to layer 1, Cartesian, in
    /// units of the lattice spacing `a`.
    pub lateral_shift: [T; 2],
    /// Midpoint `z_c` of the two layers, units of λ.
    pub gauge_origin: T,
    /// Individual-atom loss `γ_s`, units of γ.
    pub individual_loss: T,
}

impl<T: Real> BilayerConfig<T> {
    pub fn new(layer: LayerGeometry<T>, interlayer_spacing: T) -> Result<Self> {
        let cfg = BilayerConfig {
            layer,
            interlayer_spacing,
            lateral_shift: [T::zero(); 2],
            gauge_origin: T::zero(),
            individual_loss: T::zero(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_shift(mut self, shift: [T; 2]) -> Self {
        self.lateral_shift = shift;
        self
    }

    pub fn with_loss(mut self, loss: T) -> Self {
        self.individual_loss = loss;
        self
    }

    pub fn with_gauge(mut self, z_c: T) -> Self {
        self.gauge_origin = z_c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layer.validate()?;
        if !(self.interlayer_spacing > T::zero()) || !self.interlayer_spacing.is_finite() {
            return Err(Error::invalid(
                "interlayer_spacing",
                format!("a_z must be > 0, got {}", self.interlayer_spacing),
            ));
        }
        if !(self.individual_loss >= T::zero()) || !self.individual_loss.is_finite() {
            return Err(Error::invalid(
                "individual_loss",
                format!("gamma_s must be >= 0, got {}", self.individual_loss),
            ));
        }
        if !self.lateral_shift.iter().all(|x| x.is_finite()) || !self.gauge_origin.is_finite() {
            return Err(Error::invalid("lateral_shift", "must be finite"));
        }
        Ok(())
    }

    /// Layer positions `z₁ = z_c − a_z/2`, `z₂ = z_c + a_z/2`.
    pub fn layer_z(&self) -> [T; 2] {
        let h = self.interlayer_spacing / T::lit(2.0);
        [self.gauge_origin - h, self.gauge_origin + h]
    }

    pub fn is_shifted(&self) -> bool {
        self.lateral_shift.iter().any(|x| *x != T::zero())
    }

    /// `Q_m · d⊥` for one order.
    pub fn shift_phase(&self, order: &DiffractionOrder<T>) -> T {
        let d = self.lateral_shift;
        T::wavenumber() * self.layer.spacing * (order.q[0] * d[0] + order.q[1] * d[1])
    }
}

/// Amplitude-level interlayer kernel `D_{ll'}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel<T> {
    pub entries: [[Complex<T>; 2]; 2],
    /// Number of reciprocal-lattice rings summed before truncation.
    pub rings: i32,
}

/// Evanescent terms below this magnitude (units of γ) are dropped.
pub const EVANESCENT_CUTOFF: f64 = 1e-14;
const MAX_RINGS: i32 = 5000;

/// Interlayer kernel including the lateral-shift phases `e^{iQ_m·d⊥(l−l')}`.
///
/// The diagonal holds the radiative single-layer decay `Σ_{m∈R} Γ_m/2`; the
/// off-diagonal sums radiative and evanescent orders until the evanescent
/// ring maximum drops below [`EVANESCENT_CUTOFF`].
pub fn interlayer_kernel<T: Real>(cfg: &BilayerConfig<T>) -> Result<Kernel<T>> {
    cfg.validate()?;
    let k = T::wavenumber();
    let az = cfg.interlayer_spacing;
    let half = T::lit(0.5);
    let cutoff = T::lit(EVANESCENT_CUTOFF);
    let zero = Complex::new(T::zero(), T::zero());

    let mut diag = zero;
    let mut d12 = zero;
    let mut d21 = zero;
    let radiative_bound = cfg.layer.radiative_search_bound();
    let mut ring = 0;
    loop {
        let mut ring_max = T::zero();
        for order in cfg.layer.ring_orders(ring) {
            if (order.q_norm() - T::one()).abs() < crate::lattice::grazing_tolerance::<T>() {
                return Err(Error::GrazingOrder {
                    m1: order.index.0,
                    m2: order.index.1,
                });
            }
            let g_half = order.coupling * half;
            let prop = cis(k * order.kz.re * az).scale((-k * order.kz.im * az).exp());
            let phase = cfg.shift_phase(&order);
            if order.radiative {
                diag = diag + g_half;
            } else {
                ring_max = ring_max.max(order.coupling.norm() * (-k * order.kz.im * az).exp());
            }
            let t = g_half * prop;
            d12 = d12 + t * cis(-phase);
            d21 = d21 + t * cis(phase);
        }
        if ring > radiative_bound && ring_max < cutoff {
            break;
        }
        ring += 1;
        if ring > MAX_RINGS {
            return Err(Error::NonConvergence(format!(
                "evanescent interlayer sum not converged after {MAX_RINGS} rings (a_z/a too small)"
            )));
        }
    }
    Ok(Kernel {
        entries: [[diag, d12], [d21, diag]],
        rings: ring,
    })
}

/// Eigenpairs of a general complex 2×2 matrix, eigenvectors unit-normalized.
pub fn eigen_2x2<T: Real>(m: &[[Complex<T>; 2]; 2]) -> [(Complex<T>, [Complex<T>; 2]); 2] {
    let [[a, b], [c, d]] = *m;
    let two = T::lit(2.0);
    let half_trace = (a + d) / two;
    let half_diff = (a - d) / two;
    let disc = (half_diff * half_diff + b * c).sqrt();
    let lambdas = [half_trace + disc, half_trace - disc];
    let scale = a.norm() + b.norm() + c.norm() + d.norm();
    let tiny = T::epsilon() * (scale + T::min_positive_value());
    lambdas.map(|l| {
        // Pick the better-conditioned row of (M − λ) to build the null vector.
        let v = if b.norm() >= c.norm() && b.norm() > tiny {
            [b, l - a]
        } else if c.norm() > tiny {
            [l - d, c]
        } else if (a - l).norm() <= (d - l).norm() {
            [Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero())]
        } else {
            [Complex::new(T::zero(), T::zero()), Complex::new(T::one(), T::zero())]
        };
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        (l, [v[0] / n, v[1] / n])
    })
}

/// Eigenvalue `λ_q = (Γ_q + γ_diff)/2 + iΔ_q` of the kernel for mode `q`,
/// selected by overlap with `(1, e^{iq})/√2`.
pub fn mode_eigenvalue<T: Real>(kernel: &Kernel<T>, mode: Mode) -> Complex<T> {
    let s = mode.sign::<T>();
    let target = [Complex::new(T::one(), T::zero()), Complex::new(s, T::zero())];
    let pairs = eigen_2x2(&kernel.entries);
    let overlap = |v: &[Complex<T>; 2]| (target[0] * v[0].conj() + target[1] * v[1].conj()).norm();
    let (o0, o1) = (overlap(&pairs[0].1), overlap(&pairs[1].1));
    let d = &kernel.entries;
    if (pairs[0].0 - pairs[1].0).norm() <= T::epsilon().sqrt() * (d[0][0].norm() + d[0][1].norm()) {
        // Degenerate: every vector is an eigenvector; project directly.
        let half = T::lit(0.5);
        return (d[0][0] + d[1][1] + (d[0][1] + d[1][0]) * s) * half;
    }
    if o0 >= o1 {
        pairs[0].0
    } else {
        pairs[1].0
    }
}

/// Radiative decay split `(Γ_q, γ_q,diff)` including lateral-shift phases:
/// `γ_diff = Σ_{m∈R, m≠0} Γ_m [1 + e^{iq} cos(Q_m·d⊥) cos(k_z^m a_z)]`.
pub fn radiative_rates<T: Real>(cfg: &BilayerConfig<T>, mode: Mode) -> Result<(T, T)> {
    cfg.validate()?;
    let orders = cfg.layer.radiative_orders(true)?;
    Ok(radiative_rates_from_orders(cfg, mode, &orders))
}

pub(crate) fn radiative_rates_from_orders<T: Real>(
    cfg: &BilayerConfig<T>,
    mode: Mode,
    orders: &[DiffractionOrder<T>],
) -> (T, T) {
    let k = T::wavenumber();
    let s = mode.sign::<T>();
    let az = cfg.interlayer_spacing;
    let g1d = cfg.layer.gamma_1d();
    let coupling = g1d * (T::one() + s * (k * az).cos());
    let loss = orders
        .iter()
        .map(|o| {
            let bracket = T::one() + s * cfg.shift_phase(o).cos() * (k * o.kz.re * az).cos();
            o.coupling.re * bracket
        })
        .fold(T::zero(), |acc, x| acc + x);
    (coupling, loss)
}

/// `γ_q,diff / Γ₁D`.
pub fn diffraction_residual<T: Real>(cfg: &BilayerConfig<T>, mode: Mode) -> Result<T> {
    let (_, loss) = radiative_rates(cfg, mode)?;
    Ok(loss / cfg.layer.gamma_1d())
}

/// Bilayer collective mode with its 1D-model description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveMode<T> {
    pub mode: Mode,
    pub coefficients: ModeCoefficients<T>,
    pub params: InterfaceParams<T>,
    /// Diffraction part of the loss, `γ_loss − γ_s`.
    pub diffraction_loss: T,
}

impl<T: Real> CollectiveMode<T> {
    pub fn efficiency(&self) -> Result<T> {
        crate::iface1d::efficiency_from_params(&self.params)
    }
}

/// Target-mode overlap coefficients of mode `q` for gauge origin `z_c`:
/// `c_{0,±} = e^{±ikz_c}/√2`, `c_{π,±} = ∓i e^{±ikz_c}/√2`.
pub fn mode_coefficients<T: Real>(cfg: &BilayerConfig<T>, mode: Mode) -> ModeCoefficients<T> {
    let kz = T::wavenumber() * cfg.gauge_origin;
    let h = T::FRAC_1_SQRT_2();
    let (p, m) = (cis(kz).scale(h), cis(-kz).scale(h));
    match mode {
        Mode::InPhase => ModeCoefficients {
            c_plus: p,
            c_minus: m,
        },
        Mode::OutOfPhase => {
            let i = Complex::new(T::zero(), T::one());
            ModeCoefficients {
                c_plus: -i * p,
                c_minus: i * m,
            }
        }
    }
}

/// Effective parameters of mode `q`: `Γ_q`, `γ_loss = γ_diff + γ_s`, and
/// `Δ_q` from the eigenvalue of the interlayer kernel.
pub fn effective_params<T: Real>(cfg: &BilayerConfig<T>, mode: Mode) -> Result<CollectiveMode<T>> {
    let kernel = interlayer_kernel(cfg)?;
    let (coupling, diffraction) = radiative_rates(cfg, mode)?;
    let lambda = mode_eigenvalue(&kernel, mode);
    let params = InterfaceParams {
        coupling_rate: coupling.max(T::zero()),
        loss_rate: diffraction.max(T::zero()) + cfg.individual_loss,
        collective_shift: lambda.im,
    };
    Ok(CollectiveMode {
        mode,
        coefficients: mode_coefficients(cfg, mode),
        params,
        diffraction_loss: diffraction.max(T::zero()),
    })
}

/// Closed-form `(Γ_q, γ_q,diff, Δ_q)` for laterally aligned layers (`d⊥ = 0`),
/// summed order by order without building the kernel.
///
/// Evanescent orders enter the shift with their signed weight
/// `Im(Γ_m)/2 · e^{−|k_z| a_z}` taken from the same coupling formula as the
/// radiative orders.
pub fn closed_form_params<T: Real>(cfg: &BilayerConfig<T>, mode: Mode) -> Result<(T, T, T)> {
    if cfg.is_shifted() {
        return Err(Error::invalid(
            "lateral_shift",
            "closed-form parameters assume aligned layers",
        ));
    }
    let (coupling, diffraction) = radiative_rates(cfg, mode)?;
    let k = T::wavenumber();
    let s = mode.sign::<T>();
    let az = cfg.interlayer_spacing;
    let half = T::lit(0.5);
    let mut shift = T::zero();
    for o in cfg.layer.radiative_orders(false)? {
        shift = shift + s * o.coupling.re * half * (k * o.kz.re * az).sin();
    }
    let cutoff = T::lit(EVANESCENT_CUTOFF);
    let mut ring = 0;
    loop {
        let mut ring_max = T::zero();
        for o in cfg.layer.ring_orders(ring).filter(|o| !o.radiative) {
            let decay = (-k * o.kz.im * az).exp();
            ring_max = ring_max.max(o.coupling.norm() * decay);
            shift = shift + s * o.coupling.im * half * decay;
        }
        if ring > cfg.layer.radiative_search_bound() && ring_max < cutoff {
            break;
        }
        ring += 1;
        if ring > MAX_RINGS {
            return Err(Error::NonConvergence("evanescent shift sum".into()));
        }
    }
    Ok((coupling, diffraction, shift))
}

/// Plane-wave scattering of the infinite bilayer at detuning `δ` (measured
/// from the isolated-layer resonance), with both collective modes driven.
pub fn analytic_scattering<T: Real>(cfg: &BilayerConfig<T>, detuning: T) -> Result<ScatteringResult<T>> {
    let kernel = interlayer_kernel(cfg)?;
    analytic_scattering_with_kernel(cfg, &kernel, detuning)
}

/// As [`analytic_scattering`] with a precomputed kernel, for detuning scans.
pub fn analytic_scattering_with_kernel<T: Real>(
    cfg: &BilayerConfig<T>,
    kernel: &Kernel<T>,
    detuning: T,
) -> Result<ScatteringResult<T>> {
    let k = T::wavenumber();
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let z = cfg.layer_z();
    let half = T::lit(0.5);
    let diag_shift = Complex::new(cfg.individual_loss * half, -detuning);
    let d = &kernel.entries;
    let m = [[d[0][0] + diag_shift, d[0][1]], [d[1][0], d[1][1] + diag_shift]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() <= T::min_positive_value() {
        return Err(Error::SingularSteadyState);
    }
    let g = i * (cfg.layer.gamma_1d() * half).sqrt();
    let solve = |rhs: [Complex<T>; 2]| {
        [
            (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
        ]
    };
    let respond = |a_plus: Complex<T>, a_minus: Complex<T>| {
        let rhs = [0, 1].map(|l| g * (a_plus * cis(k * z[l]) + a_minus * cis(-k * z[l])));
        let p = solve(rhs);
        let b_plus = a_plus + g * (cis(-k * z[0]) * p[0] + cis(-k * z[1]) * p[1]);
        let b_minus = a_minus + g * (cis(k * z[0]) * p[0] + cis(k * z[1]) * p[1]);
        (b_plus, b_minus)
    };
    let (t_plus, r_plus) = respond(one, zero);
    let (r_minus, t_minus) = respond(zero, one);
    Ok(ScatteringResult {
        r_plus,
        r_minus,
        t_plus,
        t_minus,
    })
}

/// Interface efficiency of one grid point; NaN where undefined (grazing order
/// or zero total rate).
pub fn efficiency_at<T: Real>(cfg: &BilayerConfig<T>, mode: Mode) -> T {
    match radiative_rates(cfg, mode) {
        Ok((coupling, loss)) => {
            let coupling = coupling.max(T::zero());
            let total = coupling + loss.max(T::zero()) + cfg.individual_loss;
            if total > T::zero() {
                coupling / total
            } else {
                T::nan()
            }
        }
        Err(_) => T::nan(),
    }
}

/// Efficiency `r_q` sampled on an `(a_z, a)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMap<T> {
    pub mode: Mode,
    pub interlayer: Vec<T>,
    pub spacing: Vec<T>,
    /// Row-major: `values[i * spacing.len() + j]` is at
    /// `(interlayer[i], spacing[j])`. NaN marks masked points.
    pub values: Vec<T>,
}

impl<T: Real> EfficiencyMap<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.spacing.len() + j]
    }

    /// Rows `(a_z, a, r_q)` in row-major order.
    pub fn rows(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.interlayer.iter().enumerate().flat_map(move |(i, &az)| {
            self.spacing
                .iter()
                .enumerate()
                .map(move |(j, &a)| (az, a, self.get(i, j)))
        })
    }
}

/// Efficiency map over `(a_z, a)`, parallel over `a_z` rows. The template
/// supplies angle, shift and loss; its spacings are overwritten per point.
pub fn efficiency_map<T: Real>(
    template: &BilayerConfig<T>,
    mode: Mode,
    interlayer: &[T],
    spacing: &[T],
) -> Result<EfficiencyMap<T>> {
    template.validate()?;
    if interlayer.is_empty() || spacing.is_empty() {
        return Err(Error::invalid("grid", "map axes must be non-empty"));
    }
    if interlayer.iter().chain(spacing).any(|x| !(*x > T::zero())) {
        return Err(Error::invalid("grid", "map axes must be positive"));
    }
    let values: Vec<T> = interlayer
        .par_iter()
        .flat_map_iter(|&az| {
            spacing.iter().map(move |&a| {
                let mut cfg = *template;
                cfg.interlayer_spacing = az;
                cfg.layer.spacing = a;
                efficiency_at(&cfg, mode)
            })
        })
        .collect();
    Ok(EfficiencyMap {
        mode,
        interlayer: interlayer.to_vec(),
        spacing: spacing.to_vec(),
        values,
    })
}
