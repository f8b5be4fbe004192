//! Diffraction-cancelling geometries: one-shell resonant curves, two-shell
//! resonant sets, and the geometric-optics escape estimate for finite arrays.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilayer::{diffraction_residual, BilayerConfig, Mode};
use crate::error::{Error, Result};
use crate::lattice::{radiative_shells, LatticeKind, LayerGeometry, OrderIndex};
use crate::scalar::Real;

/// `|Q a/2π|²` of the first two non-zero shells, in units of `1/a²`
/// (so `|Q/k|² = c/a²`).
fn shell_constants<T: Real>(kind: LatticeKind) -> [T; 2] {
    match kind {
        LatticeKind::Square => [T::one(), T::lit(2.0)],
        LatticeKind::Triangular => [T::lit(4.0) / T::lit(3.0), T::lit(4.0)],
    }
}

/// Locus of one-shell cancellation,
/// `a = p·[1 − (h/a_z)²]^{−1/2}` with `h = n_c + (1 − q/π)/2` and `p` the
/// first-shell edge (1 square, 2/√3 triangular). On the curve the first
/// shell has `k_z a_z = h`, so `cos(k k_z a_z) = −e^{iq}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantCurve {
    pub kind: LatticeKind,
    pub mode: Mode,
    pub branch: u32,
}

impl ResonantCurve {
    pub fn new(kind: LatticeKind, mode: Mode, branch: u32) -> Result<Self> {
        if mode.is_pi() && branch == 0 {
            return Err(Error::Domain(
                "q = pi with n_c = 0 collapses onto the shell edge a = a_min".into(),
            ));
        }
        Ok(ResonantCurve {
            kind,
            mode,
            branch,
        })
    }

    /// `h = n_c + (1 − q/π)/2`.
    pub fn phase_order<T: Real>(&self) -> T {
        let qb = T::lit(f64::from(self.mode.index()));
        T::lit(f64::from(self.branch)) + (T::one() - qb) / T::lit(2.0)
    }

    /// Smallest `a_z` for which the curve stays below the second shell edge
    /// (exclusive).
    pub fn min_interlayer<T: Real>(&self) -> T {
        let p = self.kind.first_shell_edge::<T>() / self.kind.second_shell_edge::<T>();
        self.phase_order::<T>() / (T::one() - p * p).sqrt()
    }

    pub fn contains<T: Real>(&self, az: T) -> bool {
        az.is_finite() && az > self.min_interlayer::<T>()
    }

    /// `a(a_z)`; domain error outside the one-shell window.
    pub fn spacing_at<T: Real>(&self, az: T) -> Result<T> {
        if !self.contains(az) {
            return Err(Error::Domain(format!(
                "a_z = {az} outside curve domain a_z > {}",
                self.min_interlayer::<T>()
            )));
        }
        let x = self.phase_order::<T>() / az;
        Ok(self.kind.first_shell_edge::<T>() / (T::one() - x * x).sqrt())
    }

    pub fn config_at<T: Real>(&self, az: T) -> Result<BilayerConfig<T>> {
        let layer = LayerGeometry::of_kind(self.kind, self.spacing_at(az)?)?;
        BilayerConfig::new(layer, az)
    }

    /// `n` points `(a_z, a)` evenly spaced in `a_z` over `[lo, hi]`.
    pub fn sample<T: Real>(&self, lo: T, hi: T, n: usize) -> Result<Vec<(T, T)>> {
        if n < 2 || !(hi > lo) {
            return Err(Error::invalid("samples", "need n >= 2 and hi > lo"));
        }
        let step = (hi - lo) / T::lit((n - 1) as f64);
        (0..n)
            .map(|i| {
                let az = lo + step * T::lit(i as f64);
                self.spacing_at(az).map(|a| (az, a))
            })
            .collect()
    }
}

/// Rectangular search window in `(a, a_z)`, units of λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow<T> {
    pub spacing: [T; 2],
    pub interlayer: [T; 2],
}

/// Exact two-shell cancellation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantSet<T> {
    pub spacing: T,
    pub interlayer: T,
    pub kind: LatticeKind,
    pub lateral_shift: [T; 2],
    pub mode: Mode,
    /// `γ_q,diff / Γ₁D` at the refined point.
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure<T> {
    pub seed: (T, T),
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSearch<T> {
    pub sets: Vec<ResonantSet<T>>,
    /// Grid minima that did not refine to a set.
    pub failures: Vec<SeedFailure<T>>,
}

/// Grid resolution per axis of the coarse scan.
pub const SCAN_RESOLUTION: usize = 400;
/// Coarse-grid minima above this residual are not refined.
pub const SEED_THRESHOLD: f64 = 1e-2;
pub const SET_TOLERANCE: f64 = 1e-9;
const MERGE_DISTANCE: f64 = 1e-6;

/// Per-shell shift factor `cos(Q_m·d⊥)`; `None` if it differs within the
/// shell, which makes exact cancellation impossible.
fn shell_shift_signs<T: Real>(kind: LatticeKind, shift: [T; 2], a: T) -> Result<[Option<T>; 2]> {
    let layer = LayerGeometry::of_kind(kind, a)?;
    let cfg = BilayerConfig::new(layer, T::one())?.with_shift(shift);
    let shells = radiative_shells(&layer)?;
    if shells.len() != 2 {
        return Err(Error::Domain(format!(
            "expected two radiative shells at a = {a}, found {}",
            shells.len()
        )));
    }
    let tol = T::lit(1e-9);
    let mut out = [None, None];
    for (slot, shell) in out.iter_mut().zip(&shells) {
        let c: Vec<T> = shell.iter().map(|o| cfg.shift_phase(o).cos()).collect();
        let c0 = c[0];
        if c.iter().all(|x| (*x - c0).abs() < tol) && (c0.abs() - T::one()).abs() < tol {
            *slot = Some(c0.signum());
        }
    }
    Ok(out)
}

fn wrap_angle<T: Real>(x: T) -> T {
    let tau = T::wavenumber();
    let mut y = x % tau;
    if y > T::PI() {
        y = y - tau;
    } else if y <= -T::PI() {
        y = y + tau;
    }
    y
}

/// Newton iteration on the two wrapped phase conditions
/// `2π a_z √(1 − c_i/a²) ≡ φ_i (mod 2π)`.
fn refine<T: Real>(
    seed: (T, T),
    consts: [T; 2],
    targets: [T; 2],
    window: &SearchWindow<T>,
) -> std::result::Result<(T, T), String> {
    let tau = T::wavenumber();
    let (mut a, mut az) = seed;
    for _ in 0..60 {
        let mut f = [T::zero(); 2];
        let mut jac = [[T::zero(); 2]; 2];
        for i in 0..2 {
            let s = T::one() - consts[i] / (a * a);
            if !(s > T::zero()) {
                return Err(format!("left the two-shell regime at a = {a}"));
            }
            let root = s.sqrt();
            f[i] = wrap_angle(tau * az * root - targets[i]);
            jac[i] = [tau * az * consts[i] / (a * a * a * root), tau * root];
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < T::lit(1e-14) {
            return Err("singular phase Jacobian".into());
        }
        let da = (jac[1][1] * f[0] - jac[0][1] * f[1]) / det;
        let daz = (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
        a = a - da;
        az = az - daz;
        if da.abs() < T::lit(1e-14) && daz.abs() < T::lit(1e-14) {
            break;
        }
    }
    let slack = T::lit(1e-12);
    if a < window.spacing[0] - slack
        || a > window.spacing[1] + slack
        || az < window.interlayer[0] - slack
        || az > window.interlayer[1] + slack
    {
        return Err(format!("converged outside the window at (a, a_z) = ({a}, {az})"));
    }
    Ok((a, az))
}

fn validate_window<T: Real>(kind: LatticeKind, w: &SearchWindow<T>) -> Result<()> {
    let lo = kind.second_shell_edge::<T>();
    let hi = kind.third_shell_edge::<T>();
    let ok = |r: [T; 2]| r[0].is_finite() && r[1].is_finite() && r[1] > r[0];
    if !ok(w.spacing) || !ok(w.interlayer) || !(w.interlayer[0] > T::zero()) {
        return Err(Error::invalid("window", "empty or non-finite search window"));
    }
    if w.spacing[0] <= lo || w.spacing[1] >= hi {
        return Err(Error::Domain(format!(
            "spacing window [{}, {}] not inside the two-shell regime ({lo}, {hi})",
            w.spacing[0], w.spacing[1]
        )));
    }
    Ok(())
}

/// Two-shell resonant sets in a window: coarse residual scan, then Newton on
/// the per-shell phase conditions, verified against `bilayer`.
pub fn find_resonant_sets<T: Real>(
    kind: LatticeKind,
    shift: [T; 2],
    mode: Mode,
    window: &SearchWindow<T>,
) -> Result<SetSearch<T>> {
    find_resonant_sets_with(kind, shift, mode, window, SCAN_RESOLUTION)
}

pub fn find_resonant_sets_with<T: Real>(
    kind: LatticeKind,
    shift: [T; 2],
    mode: Mode,
    window: &SearchWindow<T>,
    resolution: usize,
) -> Result<SetSearch<T>> {
    validate_window(kind, window)?;
    if resolution < 3 {
        return Err(Error::invalid("resolution", "need at least 3 points per axis"));
    }
    let mid = (window.spacing[0] + window.spacing[1]) / T::lit(2.0);
    let signs = shell_shift_signs(kind, shift, mid)?;
    let consts = shell_constants::<T>(kind);
    let s = mode.sign::<T>();
    let mut targets = [T::zero(); 2];
    for i in 0..2 {
        match signs[i] {
            // Bracket 1 + s·c·cos θ vanishes at cos θ = −s·c.
            Some(c) => targets[i] = if s * c > T::zero() { T::PI() } else { T::zero() },
            None => {
                return Ok(SetSearch {
                    sets: Vec::new(),
                    failures: vec![SeedFailure {
                        seed: (mid, window.interlayer[0]),
                        reason: format!("shell {} has mixed shift phases", i + 1),
                    }],
                })
            }
        }
    }

    let n = resolution;
    let axis = |r: [T; 2], i: usize| r[0] + (r[1] - r[0]) * T::lit(i as f64 / (n - 1) as f64);
    let grid: Vec<T> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let layer = LayerGeometry::of_kind(kind, axis(window.spacing, i));
            layer
                .and_then(|l| BilayerConfig::new(l, axis(window.interlayer, j)))
                .map(|c| c.with_shift(shift))
                .and_then(|c| diffraction_residual(&c, mode))
                .unwrap_or(T::infinity())
        })
        .collect();

    let mut seeds = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = grid[i * n + j];
            if !(v < T::lit(SEED_THRESHOLD)) {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                        continue;
                    }
                    let w = grid[ii as usize * n + jj as usize];
                    // Strict on one half of the neighbourhood so plateaus seed once.
                    if w < v || (w == v && (di, dj) < (0, 0)) {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push((axis(window.spacing, i), axis(window.interlayer, j)));
            }
        }
    }

    let mut sets: Vec<ResonantSet<T>> = Vec::new();
    let mut failures = Vec::new();
    for seed in seeds {
        match refine(seed, consts, targets, window) {
            Ok((a, az)) => {
                let residual = LayerGeometry::of_kind(kind, a)
                    .and_then(|l| BilayerConfig::new(l, az))
                    .and_then(|c| diffraction_residual(&c.with_shift(shift), mode));
                match residual {
                    Ok(r) if r < T::lit(SET_TOLERANCE) => {
                        let merge = T::lit(MERGE_DISTANCE);
                        let dup = sets.iter().any(|s| {
                            (s.spacing - a).abs() < merge && (s.interlayer - az).abs() < merge
                        });
                        if !dup {
                            sets.push(ResonantSet {
                                spacing: a,
                                interlayer: az,
                                kind,
                                lateral_shift: shift,
                                mode,
                                residual: r,
                            });
                        }
                    }
                    Ok(r) => failures.push(SeedFailure {
                        seed,
                        reason: format!("refined residual {r} above tolerance"),
                    }),
                    Err(e) => failures.push(SeedFailure {
                        seed,
                        reason: e.to_string(),
                    }),
                }
            }
            Err(reason) => failures.push(SeedFailure { seed, reason }),
        }
    }
    sets.sort_by(|x, y| {
        x.spacing
            .partial_cmp(&y.spacing)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.interlayer.partial_cmp(&y.interlayer).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(SetSearch { sets, failures })
}

/// Geometric-optics estimate of escape loss through the finite layer edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate<T> {
    /// Propagation angle of the diffracted order, radians.
    pub angle: T,
    /// Bounce count `M = (√N a/(a_z tan θ))²`.
    pub bounces: T,
    /// `1/M`.
    pub inefficiency_scale: T,
}

pub fn escape_estimate<T: Real>(
    layer: &LayerGeometry<T>,
    interlayer: T,
    atoms_per_layer: usize,
    order: OrderIndex,
) -> Result<EscapeEstimate<T>> {
    layer.validate()?;
    if !(interlayer > T::zero()) {
        return Err(Error::invalid("interlayer_spacing", "a_z must be > 0"));
    }
    if atoms_per_layer == 0 {
        return Err(Error::invalid("atoms_per_layer", "N must be > 0"));
    }
    let o = layer.order_coupling(order)?;
    if !o.radiative || o.is_zeroth() {
        return Err(Error::Domain(format!(
            "order ({}, {}) is not a radiative diffraction order",
            order.0, order.1
        )));
    }
    let angle = o.q_norm().asin();
    let side = T::lit(atoms_per_layer as f64).sqrt() * layer.spacing;
    let ratio = side / (interlayer * angle.tan());
    let bounces = ratio * ratio;
    Ok(EscapeEstimate {
        angle,
        bounces,
        inefficiency_scale: T::one() / bounces,
    })
}
