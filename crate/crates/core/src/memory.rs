//! Storage of a single excitation in the dark collective mode by tuning the
//! interlayer spacing in time, plus the light-shift variant.
//!
//! Times are in units of `1/γ`, rates in units of γ. The 1D model with a
//! time-dependent coupling reads
//! `Ṗ = −[(Γ_q(t) + γ_s)/2 − i(δ − Δ_q(t))] P + i√Γ_q(t) h₀(t)`.

use std::sync::Arc;

use num_complex::Complex;
use ode_solvers::{Dopri5, OutputType, SVector, System};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilayer::Mode;
use crate::designs::ResonantCurve;
use crate::error::{Error, Result};
use crate::lattice::LayerGeometry;

type C = Complex<f64>;
const TAU: f64 = std::f64::consts::TAU;

/// Instantaneous rates of a time-dependent 1D model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Coupling into the target mode, `Γ(t)`.
    pub coupling: f64,
    /// Total decay `Γ(t) + γ_loss(t)`.
    pub total: f64,
    /// Detuning from the instantaneous resonance, `δ − Δ(t)`.
    pub detuning: f64,
}

/// A time-dependent 1D model on `[0, T]`.
pub trait Dynamics: Sync {
    fn rates(&self, t: f64) -> Rates;
    fn duration(&self) -> f64;
    /// Times where the rates may jump.
    fn breakpoints(&self) -> Vec<f64>;
    /// Shortest time scale on which the rates change.
    fn time_scale(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `a_z(t) = a_z(0) + η e^{−(T−t)/τ}`.
    Exponential,
    /// `a_z(t) = a_z(0) + η clamp((t − T + τ)/τ, 0, 1)`; `τ = T` is a ramp
    /// over the whole storage window.
    Linear,
    /// `a_z(0)` until `T − τ`, then `a_z(0) + η`.
    Abrupt,
    /// Piecewise-linear interpolation of `(t, a_z)` samples.
    Sampled,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(ScheduleKind::Exponential),
            "linear" | "lin" => Ok(ScheduleKind::Linear),
            "abrupt" | "step" => Ok(ScheduleKind::Abrupt),
            "sampled" | "custom" => Ok(ScheduleKind::Sampled),
            other => Err(Error::invalid("schedule", format!("unknown schedule `{other}`"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleKind::Exponential => "exp",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Abrupt => "abrupt",
            ScheduleKind::Sampled => "sampled",
        })
    }
}

/// Reference frame of the detuning `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// `δ` is measured from the instantaneous collective resonance.
    Tracking,
    /// `δ` is fixed in the lab frame; the interlayer shift of the zeroth
    /// order, `e^{iq}(Γ₁D/2) sin(k a_z)`, moves the resonance.
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySchedule {
    pub kind: ScheduleKind,
    /// Switch time τ.
    pub tau: f64,
    /// Storage window `T`.
    pub duration: f64,
    /// `a_z(0)`, units of λ.
    pub base_spacing: f64,
    /// Signed excursion `η` of `a_z`, units of λ.
    pub excursion: f64,
    pub mode: Mode,
    pub gamma_1d: f64,
    /// `γ_s`, independent of `a_z`.
    pub loss: f64,
    pub detuning: f64,
    pub frame: Frame,
    /// `(t, a_z)` samples for [`ScheduleKind::Sampled`], sorted in `t`.
    pub samples: Vec<(f64, f64)>,
}

impl MemorySchedule {
    /// Bright at `a_z = λ` with `q = 0`, dark at the end of the window.
    /// Exponential and abrupt kinds move down by `λ/2`, the linear kind up.
    pub fn new(kind: ScheduleKind, tau: f64, duration: f64, gamma_1d: f64, loss: f64) -> Result<Self> {
        let excursion = match kind {
            ScheduleKind::Linear => 0.5,
            _ => -0.5,
        };
        let s = MemorySchedule {
            kind,
            tau,
            duration,
            base_spacing: 1.0,
            excursion,
            mode: Mode::InPhase,
            gamma_1d,
            loss,
            detuning: 0.0,
            frame: Frame::Tracking,
            samples: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sampled(samples: Vec<(f64, f64)>, gamma_1d: f64, loss: f64) -> Result<Self> {
        let duration = samples.last().map(|s| s.0).unwrap_or(0.0);
        let min_step = samples
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(f64::INFINITY, f64::min);
        let s = MemorySchedule {
            kind: ScheduleKind::Sampled,
            tau: min_step,
            duration,
            base_spacing: samples.first().map(|s| s.1).unwrap_or(1.0),
            excursion: 0.0,
            mode: Mode::InPhase,
            gamma_1d,
            loss,
            detuning: 0.0,
            frame: Frame::Tracking,
            samples,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.tau) {
            return Err(Error::invalid("tau", format!("must be > 0, got {}", self.tau)));
        }
        if !pos(self.duration) || self.duration < self.tau {
            return Err(Error::invalid(
                "T",
                format!("need T >= tau > 0, got T = {}, tau = {}", self.duration, self.tau),
            ));
        }
        if !pos(self.gamma_1d) {
            return Err(Error::invalid("gamma_1d", "must be > 0"));
        }
        if !(self.loss >= 0.0) || !self.loss.is_finite() {
            return Err(Error::invalid("gamma_s", "must be >= 0"));
        }
        if !self.detuning.is_finite() || !self.base_spacing.is_finite() || !self.excursion.is_finite() {
            return Err(Error::invalid("schedule", "non-finite parameter"));
        }
        if self.kind == ScheduleKind::Sampled {
            if self.samples.len() < 2 || self.samples[0].0 != 0.0 {
                return Err(Error::invalid("samples", "need >= 2 samples starting at t = 0"));
            }
            if self.samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::invalid("samples", "times must increase strictly"));
            }
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_detuning(mut self, detuning: f64, frame: Frame) -> Self {
        self.detuning = detuning;
        self.frame = frame;
        self
    }

    pub fn spacing_at(&self, t: f64) -> f64 {
        let (tt, tau) = (self.duration, self.tau);
        match self.kind {
            ScheduleKind::Exponential => self.base_spacing + self.excursion * (-(tt - t) / tau).exp(),
            ScheduleKind::Linear => {
                self.base_spacing + self.excursion * ((t - tt + tau) / tau).clamp(0.0, 1.0)
            }
            ScheduleKind::Abrupt => {
                if t < tt - tau {
                    self.base_spacing
                } else {
                    self.base_spacing + self.excursion
                }
            }
            ScheduleKind::Sampled => {
                let s = &self.samples;
                let i = s.partition_point(|p| p.0 <= t).clamp(1, s.len() - 1);
                let (a, b) = (s[i - 1], s[i]);
                a.1 + (b.1 - a.1) * ((t - a.0) / (b.0 - a.0)).clamp(0.0, 1.0)
            }
        }
    }

    /// `|ȧ_z|` at `t`; infinite at an abrupt switch.
    pub fn spacing_rate(&self, t: f64) -> f64 {
        let (tt, tau) = (self.duration, self.tau);
        match self.kind {
            ScheduleKind::Exponential => (self.excursion / tau * (-(tt - t) / tau).exp()).abs(),
            ScheduleKind::Linear => {
                if t >= tt - tau {
                    (self.excursion / tau).abs()
                } else {
                    0.0
                }
            }
            ScheduleKind::Abrupt => f64::INFINITY,
            ScheduleKind::Sampled => {
                let s = &self.samples;
                let i = s.partition_point(|p| p.0 <= t).clamp(1, s.len() - 1);
                ((s[i].1 - s[i - 1].1) / (s[i].0 - s[i - 1].0)).abs()
            }
        }
    }

    /// `Γ_q(t) = Γ₁D[1 + e^{iq} cos(k a_z(t))]` and the zeroth-order
    /// interlayer shift `Δ(t) = e^{iq}(Γ₁D/2) sin(k a_z(t))`.
    pub fn coupling_at(&self, t: f64) -> (f64, f64) {
        let s = self.mode.sign::<f64>();
        let phase = TAU * self.spacing_at(t);
        let rate = self.gamma_1d * (1.0 + s * phase.cos());
        (rate.max(0.0), s * 0.5 * self.gamma_1d * phase.sin())
    }
}

impl Dynamics for MemorySchedule {
    fn rates(&self, t: f64) -> Rates {
        let (g, shift) = self.coupling_at(t);
        let detuning = match self.frame {
            Frame::Tracking => self.detuning,
            Frame::Lab => self.detuning - shift,
        };
        Rates {
            coupling: g,
            total: g + self.loss,
            detuning,
        }
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            ScheduleKind::Exponential => Vec::new(),
            ScheduleKind::Linear | ScheduleKind::Abrupt => vec![self.duration - self.tau],
            ScheduleKind::Sampled => self.samples.iter().map(|s| s.0).collect(),
        }
    }

    fn time_scale(&self) -> f64 {
        let rate = 2.0 * self.gamma_1d + self.loss + self.detuning.abs() + self.gamma_1d;
        self.tau.min(1.0 / rate)
    }
}

// Eight-point Gauss–Legendre rule on [−1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn gauss<T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default>(
    a: f64,
    b: f64,
    f: impl Fn(f64) -> T,
) -> T {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = T::default();
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc = acc + f(m + h * x) * (w * h);
    }
    acc
}

/// Cells per shortest time scale in the default grid.
pub const DEFAULT_REFINEMENT: usize = 4;

/// Antiderivatives `Λ(t) = ∫₀ᵗ total` and `Φ(t) = ∫₀ᵗ detuning` on a
/// breakpoint-aligned grid, exact to quadrature accuracy between nodes.
/// The tail integrals `∫ₜᵀ` are accumulated from the end so that they stay
/// accurate where they are small.
pub struct Profile<'a, D: Dynamics + ?Sized> {
    dynamics: &'a D,
    edges: Vec<f64>,
    lambda: Vec<f64>,
    phi: Vec<f64>,
    tail: Vec<(f64, f64)>,
}

fn remaining_in<D: Dynamics + ?Sized>(d: &D, edges: &[f64], tail: &[(f64, f64)], t: f64) -> (f64, f64) {
    let i = edges.partition_point(|&e| e <= t).clamp(1, edges.len() - 1) - 1;
    let Pair(dl, dp) = gauss(t, edges[i + 1], |s| {
        let r = d.rates(s);
        Pair(r.total, r.detuning)
    });
    (tail[i + 1].0 + dl, tail[i + 1].1 + dp)
}

impl<'a, D: Dynamics + ?Sized> Profile<'a, D> {
    pub fn new(dynamics: &'a D, refinement: usize) -> Self {
        let t_end = dynamics.duration();
        let h = dynamics.time_scale() / refinement.max(1) as f64;
        let mut cuts: Vec<f64> = dynamics
            .breakpoints()
            .into_iter()
            .filter(|&b| b > 0.0 && b < t_end)
            .collect();
        cuts.insert(0, 0.0);
        cuts.push(t_end);
        cuts.dedup();
        let mut edges = vec![0.0];
        for w in cuts.windows(2) {
            let n = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
            for k in 1..=n {
                edges.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
            }
        }
        let cells: Vec<(f64, f64)> = edges
            .par_windows(2)
            .map(|w| {
                gauss(w[0], w[1], |t| {
                    let r = dynamics.rates(t);
                    Pair(r.total, r.detuning)
                })
                .into()
            })
            .collect();
        let mut lambda = Vec::with_capacity(edges.len());
        let mut phi = Vec::with_capacity(edges.len());
        let (mut l, mut p) = (0.0, 0.0);
        lambda.push(l);
        phi.push(p);
        for &(dl, dp) in &cells {
            l += dl;
            p += dp;
            lambda.push(l);
            phi.push(p);
        }
        let mut tail = vec![(0.0, 0.0); edges.len()];
        for (i, &(dl, dp)) in cells.iter().enumerate().rev() {
            tail[i] = (tail[i + 1].0 + dl, tail[i + 1].1 + dp);
        }
        Profile {
            dynamics,
            edges,
            lambda,
            phi,
            tail,
        }
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    fn cell_of(&self, t: f64) -> usize {
        self.edges.partition_point(|&e| e <= t).clamp(1, self.edges.len() - 1) - 1
    }

    /// `(Λ(t), Φ(t))`.
    pub fn integrals(&self, t: f64) -> (f64, f64) {
        let i = self.cell_of(t);
        let e = self.edges[i];
        let Pair(dl, dp) = gauss(e, t, |s| {
            let r = self.dynamics.rates(s);
            Pair(r.total, r.detuning)
        });
        (self.lambda[i] + dl, self.phi[i] + dp)
    }

    pub fn end(&self) -> (f64, f64) {
        (*self.lambda.last().unwrap(), *self.phi.last().unwrap())
    }

    /// `(∫ₜᵀ total, ∫ₜᵀ detuning)`.
    pub fn remaining(&self, t: f64) -> (f64, f64) {
        remaining_in(self.dynamics, &self.edges, &self.tail, t)
    }

    /// `∫₀ᵀ e^{−∫ₜᵀ total} coupling dt`.
    pub fn storage_integral(&self) -> f64 {
        self.edges
            .par_windows(2)
            .map(|w| {
                gauss(w[0], w[1], |t| {
                    (-self.remaining(t).0).exp() * self.dynamics.rates(t).coupling
                })
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    /// `∫₀ᵀ g(t) dt` cell by cell.
    pub fn integrate<T>(&self, g: impl Fn(f64) -> T + Sync) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default + Send + std::iter::Sum,
    {
        // Fixed summation order so results do not depend on the thread count.
        let cells: Vec<T> = self.edges.par_windows(2).map(|w| gauss(w[0], w[1], &g)).collect();
        cells.into_iter().sum()
    }
}

#[derive(Clone, Copy, Default)]
struct Pair(f64, f64);

impl std::ops::Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl std::ops::Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, w: f64) -> Pair {
        Pair(self.0 * w, self.1 * w)
    }
}

impl From<Pair> for (f64, f64) {
    fn from(p: Pair) -> (f64, f64) {
        (p.0, p.1)
    }
}

/// Relative tolerance of the adaptive integrator.
pub const ODE_RTOL: f64 = 1e-10;
const ODE_ATOL: f64 = 1e-13;

struct Rhs<F>(F);

impl<const N: usize, F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>> System<f64, SVector<f64, N>> for Rhs<F> {
    fn system(&self, t: f64, y: &SVector<f64, N>, dy: &mut SVector<f64, N>) {
        *dy = (self.0)(t, y);
    }
}

/// Adaptive DOPRI5 over `[0, T]`, restarted at every breakpoint, with the step
/// capped at `h_max`.
fn integrate_ode<const N: usize>(
    f: impl Fn(f64, &SVector<f64, N>) -> SVector<f64, N> + Copy,
    y0: SVector<f64, N>,
    t_end: f64,
    breakpoints: &[f64],
    h_max: f64,
) -> Result<SVector<f64, N>> {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > 0.0 && b < t_end).collect();
    cuts.insert(0, 0.0);
    cuts.push(t_end);
    cuts.dedup();
    let mut y = y0;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        let mut stepper = Dopri5::from_param(
            Rhs(f),
            w[0],
            w[1],
            len,
            y,
            ODE_RTOL,
            ODE_ATOL,
            0.9,
            0.04,
            0.2,
            10.0,
            h_max.min(len),
            0.0,
            50_000_000,
            1000,
            OutputType::Sparse,
        );
        stepper
            .integrate()
            .map_err(|e| Error::NonConvergence(format!("ODE integration: {e}")))?;
        y = *stepper.y_out().last().expect("stepper output");
    }
    Ok(y)
}

/// Eq.-A1-type storage efficiency `r_f = ∫₀ᵀ e^{−∫ₜᵀ(Γ+γ)} Γ dt` by cell
/// quadrature on the default grid.
pub fn storage_efficiency_rf<D: Dynamics + ?Sized>(d: &D) -> f64 {
    rf_with_refinement(d, DEFAULT_REFINEMENT)
}

pub fn rf_with_refinement<D: Dynamics + ?Sized>(d: &D, refinement: usize) -> f64 {
    Profile::new(d, refinement).storage_integral().clamp(0.0, 1.0)
}

/// `r_f` from `Ṙ = Γ(1 − R) − γ_loss R` with adaptive stepping.
pub fn rf_by_ode<D: Dynamics + ?Sized>(d: &D) -> Result<f64> {
    let f = |t: f64, y: &SVector<f64, 1>| {
        let r = d.rates(t);
        SVector::<f64, 1>::new(r.coupling - r.total * y[0])
    };
    let y = integrate_ode(f, SVector::<f64, 1>::zeros(), d.duration(), &d.breakpoints(), d.time_scale())?;
    Ok(y[0])
}

/// Closed form for the abrupt switch:
/// `e^{−γ_s τ} · 2Γ₁D/(2Γ₁D + γ_s) · (1 − e^{−(2Γ₁D+γ_s)(T−τ)})`.
pub fn abrupt_rf(gamma_1d: f64, loss: f64, tau: f64, duration: f64) -> f64 {
    let bright = 2.0 * gamma_1d + loss;
    (-loss * tau).exp() * (2.0 * gamma_1d / bright) * (1.0 - (-bright * (duration - tau)).exp())
}

/// Leading-order estimate `r_f ≈ 1 − γ_s/(2Γ₁D) − B γ_s τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxRf {
    pub rf: f64,
    pub b: f64,
    /// Dark-time gain `G = 2Bτ Γ₁D`.
    pub gain: f64,
}

pub fn approx_rf(tau: f64, gamma_1d: f64, loss: f64, kind: ScheduleKind) -> Result<ApproxRf> {
    if !(tau > 0.0 && gamma_1d > 0.0 && loss >= 0.0) {
        return Err(Error::invalid("approx_rf", "need tau > 0, gamma_1d > 0, gamma_s >= 0"));
    }
    let b = match kind {
        ScheduleKind::Abrupt => 1.0,
        ScheduleKind::Exponential | ScheduleKind::Linear => 0.75 * (tau * gamma_1d).powf(-1.0 / 3.0),
        ScheduleKind::Sampled => {
            return Err(Error::invalid("schedule", "no closed-form B for sampled schedules"))
        }
    };
    Ok(ApproxRf {
        rf: 1.0 - loss / (2.0 * gamma_1d) - b * loss * tau,
        b,
        gain: 2.0 * b * tau * gamma_1d,
    })
}

/// Optimal retrieval/storage mode
/// `f(t) = e^{−∫ₜᵀ[(Γ+γ) − 2i(δ−Δ)]/2} √(Γ(t)/r_f)`.
pub struct ModeFunction<'a, D: Dynamics + ?Sized> {
    pub profile: Profile<'a, D>,
    pub rf: f64,
}

impl<'a, D: Dynamics + ?Sized> ModeFunction<'a, D> {
    pub fn eval(&self, t: f64) -> C {
        let (l, p) = self.profile.remaining(t);
        let g = self.profile.dynamics.rates(t).coupling.max(0.0);
        C::from_polar((-l / 2.0).exp() * (g / self.rf).sqrt(), p)
    }

    /// `n` uniform samples `(t, f(t))` on `[0, T]`.
    pub fn sample(&self, n: usize) -> Vec<(f64, C)> {
        let t_end = self.profile.dynamics.duration();
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = t_end * i as f64 / (n - 1) as f64;
                (t, self.eval(t))
            })
            .collect()
    }

    /// `∫₀ᵀ |f|² dt`.
    pub fn norm(&self) -> f64 {
        self.profile.integrate(|t| self.eval(t).norm_sqr())
    }
}

pub fn mode_function<D: Dynamics + ?Sized>(d: &D) -> Result<ModeFunction<'_, D>> {
    let profile = Profile::new(d, DEFAULT_REFINEMENT);
    let rf = profile.storage_integral();
    if !(rf > 0.0) {
        return Err(Error::Domain("r_f = 0: the schedule never couples to the target mode".into()));
    }
    Ok(ModeFunction { profile, rf })
}

/// Shared, thread-safe input pulse `h₀(t)`.
pub type Pulse = Arc<dyn Fn(f64) -> C + Send + Sync>;

/// Storage efficiency from the two evaluation paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageEfficiency {
    /// `r_f |∫ f h₀ dt|²`.
    pub overlap: f64,
    /// `|P(T)|²` from direct integration of the 1D model.
    pub direct: f64,
    pub rf: f64,
}

/// Tolerance on `∫|h₀|² = 1`.
pub const PULSE_NORM_TOLERANCE: f64 = 1e-6;

pub fn pulse_norm<D: Dynamics + ?Sized>(d: &D, h0: &Pulse) -> f64 {
    Profile::new(d, DEFAULT_REFINEMENT).integrate(|t| h0(t).norm_sqr())
}

/// Scales `h₀` to unit norm on the schedule's grid.
pub fn normalized_pulse<D: Dynamics + ?Sized>(d: &D, h0: Pulse) -> Result<Pulse> {
    let n = pulse_norm(d, &h0);
    if !(n > 0.0) {
        return Err(Error::invalid("pulse", "zero pulse"));
    }
    let s = n.sqrt().recip();
    Ok(Arc::new(move |t| h0(t) * s))
}

pub fn storage_efficiency<D: Dynamics + ?Sized>(d: &D, h0: &Pulse) -> Result<StorageEfficiency> {
    let mf = mode_function(d)?;
    let norm = mf.profile.integrate(|t| h0(t).norm_sqr());
    if (norm - 1.0).abs() > PULSE_NORM_TOLERANCE {
        return Err(Error::invalid("pulse", format!("need ∫|h0|² = 1, got {norm}")));
    }
    let ov: C = mf.profile.integrate(|t| mf.eval(t) * h0(t));
    let overlap = mf.rf * ov.norm_sqr();

    let f = |t: f64, y: &SVector<f64, 2>| {
        let r = d.rates(t);
        let p = C::new(y[0], y[1]);
        let drive = C::new(0.0, r.coupling.max(0.0).sqrt()) * h0(t);
        let dp = -C::new(r.total / 2.0, -r.detuning) * p + drive;
        SVector::<f64, 2>::new(dp.re, dp.im)
    };
    let y = integrate_ode(f, SVector::<f64, 2>::zeros(), d.duration(), &d.breakpoints(), d.time_scale())?;
    Ok(StorageEfficiency {
        overlap,
        direct: y[0] * y[0] + y[1] * y[1],
        rf: mf.rf,
    })
}

/// The optimal input `h₀ = f*`.
pub fn optimal_pulse<D: Dynamics + ?Sized + Send>(d: &D) -> Result<Pulse>
where
    D: Clone + 'static,
{
    let owned = d.clone();
    let rf = mode_function(&owned)?.rf;
    let owned = Arc::new(owned);
    // The profile borrows the dynamics, so rebuild it inside the closure's
    // shared state.
    let state = Arc::new(OwnedMode::new(owned, rf));
    Ok(Arc::new(move |t| state.eval(t).conj()))
}

struct OwnedMode<D: Dynamics> {
    dynamics: Arc<D>,
    edges: Vec<f64>,
    tail: Vec<(f64, f64)>,
    rf: f64,
}

impl<D: Dynamics> OwnedMode<D> {
    fn new(dynamics: Arc<D>, rf: f64) -> Self {
        let p = Profile::new(dynamics.as_ref(), DEFAULT_REFINEMENT);
        let (edges, tail) = (p.edges, p.tail);
        OwnedMode {
            dynamics,
            edges,
            tail,
            rf,
        }
    }

    fn eval(&self, t: f64) -> C {
        let (l, p) = remaining_in(self.dynamics.as_ref(), &self.edges, &self.tail, t);
        let g = self.dynamics.rates(t).coupling.max(0.0);
        C::from_polar((-l / 2.0).exp() * (g / self.rf).sqrt(), p)
    }
}

/// One row of a storage-efficiency sweep over τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub tau_gamma_1d: f64,
    pub one_minus_rf_numeric: f64,
    pub one_minus_rf_estimate: f64,
}

/// `1 − r_f` against `τΓ₁D` with `Γ₁D = 1`, `T = duration`,
/// `γ_s = 2 · gs_ratio`, compared with the leading-order estimate.
pub fn rf_sweep(kind: ScheduleKind, duration: f64, gs_ratio: f64, taus: &[f64]) -> Result<Vec<MemoryRow>> {
    let loss = 2.0 * gs_ratio;
    taus.par_iter()
        .map(|&tau| {
            let s = MemorySchedule::new(kind, tau, duration, 1.0, loss)?;
            let rf = storage_efficiency_rf(&s);
            let est = approx_rf(tau, 1.0, loss, kind)?;
            Ok(MemoryRow {
                tau_gamma_1d: tau,
                one_minus_rf_numeric: 1.0 - rf,
                one_minus_rf_estimate: 1.0 - est.rf,
            })
        })
        .collect()
}

/// Largest `γ_q,diff/Γ₁D` along a schedule when the lattice spacing tracks a
/// resonant curve, `a(t) = a_curve(a_z(t))`, sampled at `n` times.
pub fn tandem_residual(sched: &MemorySchedule, curve: &ResonantCurve, n: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..n.max(2) {
        let t = sched.duration * i as f64 / (n.max(2) - 1) as f64;
        let az = sched.spacing_at(t);
        let a = curve.spacing_at(az)?;
        let cfg = crate::bilayer::BilayerConfig::new(LayerGeometry::of_kind(curve.kind, a)?, az)?;
        worst = worst.max(crate::bilayer::diffraction_residual(&cfg, curve.mode)?);
    }
    Ok(worst)
}

/// Bright/dark pair coupled by a light shift `Δ_LS(t)`:
/// `Ṗ = [−(2Γ₁D+γ_s)/2 + i(δ−Δ_b)] P + iΔ_LS S + i√(2Γ₁D) h₀`,
/// `Ṡ = [−γ_s/2 + i(δ−Δ_d)] S + iΔ_LS P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightShiftSystem {
    pub gamma_1d: f64,
    pub loss: f64,
    pub detuning: f64,
    pub bright_shift: f64,
    pub dark_shift: f64,
}

impl LightShiftSystem {
    pub fn new(gamma_1d: f64, loss: f64) -> Result<Self> {
        if !(gamma_1d > 0.0) || !(loss >= 0.0) {
            return Err(Error::invalid("lightshift", "need gamma_1d > 0 and gamma_s >= 0"));
        }
        Ok(LightShiftSystem {
            gamma_1d,
            loss,
            detuning: 0.0,
            bright_shift: 0.0,
            dark_shift: 0.0,
        })
    }

    fn bright_rate(&self) -> f64 {
        2.0 * self.gamma_1d + self.loss
    }

    /// `Γ_eff = 4Δ_LS²/(2Γ₁D + γ_s)`.
    pub fn effective_coupling(&self, light_shift: f64) -> f64 {
        4.0 * light_shift * light_shift / self.bright_rate()
    }

    /// Inverse of [`Self::effective_coupling`], `Δ_LS ≥ 0`.
    pub fn light_shift_for(&self, effective: f64) -> f64 {
        (effective.max(0.0) * self.bright_rate() / 4.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightShiftResult {
    /// `|S(T)|²`.
    pub efficiency: f64,
    pub bright_population: f64,
}

pub type Control = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Direct integration of the bright/dark equations from `P = S = 0`.
pub fn simulate_lightshift(
    sys: &LightShiftSystem,
    control: &Control,
    h0: &Pulse,
    duration: f64,
    max_step: f64,
) -> Result<LightShiftResult> {
    if !(duration > 0.0 && max_step > 0.0) {
        return Err(Error::invalid("lightshift", "need duration > 0 and step > 0"));
    }
    let i = C::new(0.0, 1.0);
    let kb = C::new(-sys.bright_rate() / 2.0, sys.detuning - sys.bright_shift);
    let kd = C::new(-sys.loss / 2.0, sys.detuning - sys.dark_shift);
    let sqrt_in = (2.0 * sys.gamma_1d).sqrt();
    let f = |t: f64, y: &SVector<f64, 4>| {
        let p = C::new(y[0], y[1]);
        let s = C::new(y[2], y[3]);
        let w = control(t);
        let dp = kb * p + i * w * s + i * sqrt_in * h0(t);
        let ds = kd * s + i * w * p;
        SVector::<f64, 4>::new(dp.re, dp.im, ds.re, ds.im)
    };
    let y = integrate_ode(f, SVector::<f64, 4>::zeros(), duration, &[], max_step)?;
    Ok(LightShiftResult {
        efficiency: y[2] * y[2] + y[3] * y[3],
        bright_population: y[0] * y[0] + y[1] * y[1],
    })
}

/// Dark-mode dynamics after adiabatic elimination of the bright mode, with
/// the target `Γ_eff(t)` taken from a spacing schedule.
#[derive(Debug, Clone)]
pub struct EffectiveLightShift {
    pub system: LightShiftSystem,
    pub schedule: MemorySchedule,
}

impl Dynamics for EffectiveLightShift {
    fn rates(&self, t: f64) -> Rates {
        let eff = self.schedule.coupling_at(t).0;
        let branch = 2.0 * self.system.gamma_1d / self.system.bright_rate();
        Rates {
            coupling: eff * branch,
            total: eff + self.system.loss,
            detuning: self.system.detuning - self.system.dark_shift,
        }
    }

    fn duration(&self) -> f64 {
        self.schedule.duration
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.schedule.breakpoints()
    }

    fn time_scale(&self) -> f64 {
        self.schedule.time_scale()
    }
}

/// Impedance-matched light-shift protocol: `Δ_LS(t)` realizes the schedule's
/// `Γ_q(t)` as `Γ_eff(t)`, and the input is the optimal pulse of the
/// effective model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightShiftRun {
    pub simulated: LightShiftResult,
    /// `r_f` of the effective model.
    pub effective_rf: f64,
    /// `1 − γ_s/Γ₁D − Bγ_sτ`.
    pub estimate: f64,
}

pub fn lightshift_protocol(sys: &LightShiftSystem, schedule: &MemorySchedule) -> Result<LightShiftRun> {
    let eff = EffectiveLightShift {
        system: *sys,
        schedule: schedule.clone(),
    };
    let h0 = optimal_pulse(&eff)?;
    let effective_rf = storage_efficiency_rf(&eff);
    let sys_c = *sys;
    let sched = schedule.clone();
    let control: Control = Arc::new(move |t| sys_c.light_shift_for(sched.coupling_at(t).0));
    let simulated = simulate_lightshift(sys, &control, &h0, schedule.duration, eff.time_scale())?;
    let b = approx_rf(schedule.tau, sys.gamma_1d, sys.loss, schedule.kind)?.b;
    Ok(LightShiftRun {
        simulated,
        effective_rf,
        estimate: 1.0 - sys.loss / sys.gamma_1d - b * sys.loss * schedule.tau,
    })
}

/// Ratios above this count as violating a `≪` condition.
pub const ADIABATIC_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    /// `max_t |ȧ_z/a_z|`.
    pub max_relative_rate: f64,
    pub inverse_tau: f64,
    /// `max(max_relative_rate, 1/τ) / trap_rate`.
    pub trap_ratio: f64,
    /// `max(max_relative_rate, 1/τ) / Γ₁D`.
    pub coupling_ratio: f64,
    pub trap_warning: bool,
    pub coupling_warning: bool,
}

pub fn adiabaticity_check(sched: &MemorySchedule, trap_rate: f64, gamma_1d: f64) -> AdiabaticityReport {
    let n = 2000;
    let mut max_rate = 0.0f64;
    for i in 0..=n {
        let t = sched.duration * i as f64 / n as f64;
        let r = sched.spacing_rate(t) / sched.spacing_at(t).abs();
        max_rate = max_rate.max(r);
    }
    let inverse_tau = 1.0 / sched.tau;
    let rate = max_rate.max(inverse_tau);
    let trap_ratio = rate / trap_rate;
    let coupling_ratio = rate / gamma_1d;
    AdiabaticityReport {
        max_relative_rate: max_rate,
        inverse_tau,
        trap_ratio,
        coupling_ratio,
        trap_warning: !(trap_ratio <= ADIABATIC_THRESHOLD),
        coupling_warning: !(coupling_ratio <= ADIABATIC_THRESHOLD),
    }
}
