//! Finite bilayer arrays in the coupled-dipole model.
//!
//! Dipoles are frozen along the circular polarization `e = (x̂ + iŷ)/√2`,
//! which turns the vector problem into a `2N × 2N` complex-symmetric scalar
//! system `[(δ + i/2) I + G] b = −u_in`. Rates are in units of γ, lengths in
//! units of λ.

use std::io::Write;

use faer::prelude::*;
use faer::{c64, Mat, MatRef};
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilayer::{effective_params, mode_coefficients, BilayerConfig, Mode};
use crate::error::{Error, Result};
use crate::iface1d::{efficiency_from_scattering, ScatteringResult, Side};

type C = Complex<f64>;
const K: f64 = std::f64::consts::TAU;
const I: C = C::new(0.0, 1.0);

/// Two centered `√N × √N` parallelogram patches at `z = ∓a_z/2`.
///
/// The lateral shift is split symmetrically: layer 1 moves by `−a d⊥/2` and
/// layer 2 by `+a d⊥/2`, so each atom of layer 2 sits at its layer-1
/// counterpart plus `(a d⊥, a_z)` and the joint centroid stays on the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteArray {
    pub config: BilayerConfig<f64>,
    pub atoms_per_layer: usize,
    pub positions: Vec<[f64; 3]>,
    /// 0 or 1 per atom.
    pub layer: Vec<u8>,
}

impl FiniteArray {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Patch side `L = √N a`.
    pub fn side_length(&self) -> f64 {
        (self.atoms_per_layer as f64).sqrt() * self.config.layer.spacing
    }

    /// Largest `|z|` over the atoms.
    pub fn max_abs_z(&self) -> f64 {
        self.positions.iter().map(|p| p[2].abs()).fold(0.0, f64::max)
    }

    /// Smallest pair distance, `O(n²)`.
    pub fn min_pair_distance(&self) -> f64 {
        let p = &self.positions;
        (0..p.len())
            .into_par_iter()
            .map(|i| {
                (i + 1..p.len())
                    .map(|j| dist(p[i], p[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Whitespace-separated `layer x y z` lines.
    pub fn write_xyz<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.len())?;
        writeln!(w, "layer x y z")?;
        for (p, l) in self.positions.iter().zip(&self.layer) {
            writeln!(w, "{} {:.17e} {:.17e} {:.17e}", l, p[0], p[1], p[2])?;
        }
        Ok(())
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn build_positions(cfg: &BilayerConfig<f64>, atoms_per_layer: usize) -> Result<FiniteArray> {
    cfg.validate()?;
    let side = (atoms_per_layer as f64).sqrt().round() as usize;
    if atoms_per_layer == 0 || side * side != atoms_per_layer {
        return Err(Error::invalid(
            "atoms_per_layer",
            format!("N must be a positive perfect square, got {atoms_per_layer}"),
        ));
    }
    let [a1, a2] = cfg.layer.primitive_vectors();
    let c = (side as f64 - 1.0) / 2.0;
    let mut patch = Vec::with_capacity(atoms_per_layer);
    for n2 in 0..side {
        for n1 in 0..side {
            let (u, v) = (n1 as f64 - c, n2 as f64 - c);
            patch.push([u * a1[0] + v * a2[0], u * a1[1] + v * a2[1]]);
        }
    }
    let a = cfg.layer.spacing;
    let half = [0.5 * a * cfg.lateral_shift[0], 0.5 * a * cfg.lateral_shift[1]];
    let z = cfg.layer_z();
    let mut positions = Vec::with_capacity(2 * atoms_per_layer);
    let mut layer = Vec::with_capacity(2 * atoms_per_layer);
    for (l, (sign, zl)) in [(-1.0, z[0]), (1.0, z[1])].into_iter().enumerate() {
        for p in &patch {
            positions.push([p[0] + sign * half[0], p[1] + sign * half[1], zl]);
            layer.push(l as u8);
        }
    }
    Ok(FiniteArray {
        config: *cfg,
        atoms_per_layer,
        positions,
        layer,
    })
}

/// Scalar coupling `g(r) = (3/4) ē·G̃(kr)·e` between two dipoles, with
/// `G̃(x) = e^{ix}/x [(1 + i/x − 1/x²) I + (−1 − 3i/x + 3/x²) r̂r̂]` and
/// `ē·r̂r̂·e = ρ²/(2r²)`. The self term `lim Im g = 1/2` is the `i/2` on the
/// diagonal.
pub fn green_coupling(r: [f64; 3]) -> C {
    let rho2 = r[0] * r[0] + r[1] * r[1];
    let r2 = rho2 + r[2] * r[2];
    let d = r2.sqrt();
    let x = K * d;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let transverse = C::new(1.0 - inv2, inv);
    let longitudinal = C::new(-1.0 + 3.0 * inv2, -3.0 * inv);
    let angular = 0.5 * rho2 / r2;
    C::from_polar(0.75 * inv, x) * (transverse + longitudinal * angular)
}

/// Paraxial Gaussian beam focused at `z = 0`, unit amplitude at the focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    /// Waist `w₀`, units of λ.
    pub waist: f64,
}

impl GaussianBeam {
    pub fn new(waist: f64) -> Result<Self> {
        if !(waist > 1.0 / std::f64::consts::PI) || !waist.is_finite() {
            return Err(Error::invalid(
                "waist",
                format!("paraxial beam needs w > λ/π, got {waist}"),
            ));
        }
        Ok(GaussianBeam { waist })
    }

    /// Waist as a fraction of the patch side `L = √N a`.
    pub fn for_array(arr: &FiniteArray, waist_over_side: f64) -> Result<Self> {
        if !(waist_over_side > 0.0) {
            return Err(Error::invalid("w/L", "must be > 0"));
        }
        Self::new(waist_over_side * arr.side_length())
    }

    pub fn rayleigh_range(&self) -> f64 {
        std::f64::consts::PI * self.waist * self.waist
    }

    /// Beam radius at distance `z` from the focus.
    pub fn radius_at(&self, z: f64) -> f64 {
        self.waist * (1.0 + (z / self.rayleigh_range()).powi(2)).sqrt()
    }

    /// Mode profile `u_±(ρ, z)`; `u_−(ρ, z) = u_+(ρ, −z)`.
    pub fn field(&self, side: Side, r: [f64; 3]) -> C {
        let z = side.sign::<f64>() * r[2];
        let q = C::new(1.0, z / self.rayleigh_range());
        let rho2 = r[0] * r[0] + r[1] * r[1];
        (-(rho2 / (self.waist * self.waist)) / q).exp() / q * C::from_polar(1.0, K * z)
    }

    /// `∫ |u|² d²ρ = π w₀²/2`, the same on every plane.
    pub fn mode_norm(&self) -> f64 {
        0.5 * std::f64::consts::PI * self.waist * self.waist
    }
}

/// Dipole amplitudes for one drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleSolution {
    pub detuning: f64,
    pub side: Side,
    pub amplitudes: Vec<C>,
    /// `‖M b + u‖ / ‖u‖`.
    pub residual: f64,
}

/// Relative residual bound on every dense solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Finite array with its assembled interaction matrix. The detuning only
/// shifts the diagonal, so one assembly serves a whole detuning scan.
pub struct Simulation {
    pub array: FiniteArray,
    pub beam: GaussianBeam,
    coupling: Mat<c64>,
    drives: [Vec<C>; 2],
}

impl Simulation {
    pub fn new(array: FiniteArray, beam: GaussianBeam) -> Result<Self> {
        let n = array.len();
        if n == 0 {
            return Err(Error::invalid("array", "no atoms"));
        }
        let p = &array.positions;
        let floor = 1e-9;
        let columns: Vec<Vec<c64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                (0..n)
                    .map(|i| {
                        if i == j {
                            return c64::new(0.0, 0.0);
                        }
                        let r = [p[i][0] - p[j][0], p[i][1] - p[j][1], p[i][2] - p[j][2]];
                        if dist(p[i], p[j]) < floor {
                            return c64::new(f64::NAN, f64::NAN);
                        }
                        green_coupling(r)
                    })
                    .collect()
            })
            .collect();
        let flat: Vec<c64> = columns.into_iter().flatten().collect();
        if flat.iter().any(|z| z.re.is_nan()) {
            return Err(Error::invalid("positions", "coincident atoms"));
        }
        let coupling = MatRef::from_column_major_slice(&flat, n, n).to_owned();
        let drives = [Side::Plus, Side::Minus].map(|s| p.iter().map(|&r| beam.field(s, r)).collect());
        Ok(Simulation {
            array,
            beam,
            coupling,
            drives,
        })
    }

    pub fn coupling_matrix(&self) -> MatRef<'_, c64> {
        self.coupling.as_ref()
    }

    pub fn drive(&self, side: Side) -> &[C] {
        &self.drives[side_index(side)]
    }

    /// Solves for both incidence directions with one factorization.
    pub fn solve(&self, detuning: f64) -> Result<[DipoleSolution; 2]> {
        let n = self.array.len();
        let diag = c64::new(detuning, 0.5);
        let mut m = self.coupling.clone();
        for i in 0..n {
            m[(i, i)] = diag;
        }
        let lu = m.partial_piv_lu();
        let mut rhs = Mat::<c64>::from_fn(n, 2, |i, j| -self.drives[j][i]);
        lu.solve_in_place(rhs.as_mut());
        let x: [Vec<C>; 2] = [0, 1].map(|j| (0..n).map(|i| rhs[(i, j)]).collect());
        if x.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SingularSystem { pivot: 0.0 });
        }
        let residuals = [0, 1].map(|j| self.residual(detuning, &x[j], &self.drives[j]));
        let worst = residuals[0].max(residuals[1]);
        if !(worst < RESIDUAL_TOLERANCE) {
            return Err(Error::NonConvergence(format!(
                "dense solve residual {worst:e} above {RESIDUAL_TOLERANCE:e}"
            )));
        }
        let [x0, x1] = x;
        Ok([
            DipoleSolution {
                detuning,
                side: Side::Plus,
                amplitudes: x0,
                residual: residuals[0],
            },
            DipoleSolution {
                detuning,
                side: Side::Minus,
                amplitudes: x1,
                residual: residuals[1],
            },
        ])
    }

    fn residual(&self, detuning: f64, b: &[C], u: &[C]) -> f64 {
        let diag = C::new(detuning, 0.5);
        let g = &self.coupling;
        let n = b.len();
        let (num, den) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = diag * b[i] + u[i];
                for (j, bj) in b.iter().enumerate() {
                    acc += g[(i, j)] * bj;
                }
                (acc.norm_sqr(), u[i].norm_sqr())
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }

    /// Amplitude scattered into the paraxial mode `u_side`, from the far-field
    /// identity `∫ ū_side E_scat d²ρ = (3i/8π) Σ b_n ū_side(r_n)`, divided by
    /// the mode norm.
    pub fn mode_amplitude(&self, sol: &DipoleSolution, side: Side) -> C {
        let u = &self.drives[side_index(side)];
        let s: C = sol
            .amplitudes
            .iter()
            .zip(u)
            .map(|(b, u)| b * u.conj())
            .sum();
        I * (3.0 / (8.0 * std::f64::consts::PI)) * s / self.beam.mode_norm()
    }

    /// `(t, r)` for both sides from a solution pair.
    pub fn scattering_from(&self, sols: &[DipoleSolution; 2]) -> ScatteringResult<f64> {
        let one = C::new(1.0, 0.0);
        ScatteringResult {
            t_plus: one + self.mode_amplitude(&sols[0], Side::Plus),
            r_plus: self.mode_amplitude(&sols[0], Side::Minus),
            t_minus: one + self.mode_amplitude(&sols[1], Side::Minus),
            r_minus: self.mode_amplitude(&sols[1], Side::Plus),
        }
    }

    pub fn scattering(&self, detuning: f64) -> Result<ScatteringResult<f64>> {
        Ok(self.scattering_from(&self.solve(detuning)?))
    }

    /// Scattered field `ē·E_scat(r) = Σ g(r − r_n) b_n`.
    pub fn scattered_field(&self, sol: &DipoleSolution, r: [f64; 3]) -> C {
        self.array
            .positions
            .iter()
            .zip(&sol.amplitudes)
            .map(|(p, b)| green_coupling([r[0] - p[0], r[1] - p[1], r[2] - p[2]]) * b)
            .sum()
    }

    /// `(t, r)` for one incidence side by overlap quadrature on the planes
    /// `z = ±z_eval`.
    pub fn project_quadrature(&self, sol: &DipoleSolution, plane: &QuadraturePlane) -> Result<(C, C)> {
        let zmax = self.array.max_abs_z();
        if plane.z_eval < zmax + 2.0 - 1e-12 {
            return Err(Error::invalid(
                "z_eval",
                format!("plane at {} must be ≥ 2λ beyond the outermost layer at {zmax}", plane.z_eval),
            ));
        }
        if !(plane.spacing > 0.0 && plane.spacing <= 0.25 + 1e-12) {
            return Err(Error::invalid("spacing", "quadrature spacing must be in (0, λ/4]"));
        }
        let radius_needed = 3.0 * self.beam.radius_at(plane.z_eval);
        let radius = plane.radius.unwrap_or(radius_needed);
        if radius < radius_needed - 1e-12 {
            return Err(Error::NonConvergence(format!(
                "quadrature radius {radius} below 3 w(z) = {radius_needed}"
            )));
        }
        let forward = sol.side;
        let backward = forward.opposite();
        let z_fwd = forward.sign::<f64>() * plane.z_eval;
        let h = plane.spacing;
        let m = (radius / h).ceil() as i64;
        let points: Vec<(f64, f64)> = (-m..=m)
            .flat_map(|i| (-m..=m).map(move |j| (i as f64 * h, j as f64 * h)))
            .filter(|(x, y)| x * x + y * y <= radius * radius)
            .collect();
        let (norm, o_t, o_r) = points
            .par_iter()
            .map(|&(x, y)| {
                let rf = [x, y, z_fwd];
                let rb = [x, y, -z_fwd];
                let uf = self.beam.field(forward, rf);
                let ub = self.beam.field(backward, rb);
                let ef = self.scattered_field(sol, rf);
                let eb = self.scattered_field(sol, rb);
                (uf.norm_sqr(), uf.conj() * (uf + ef), ub.conj() * eb)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, C::new(0.0, 0.0), C::new(0.0, 0.0)), |a, b| {
                (a.0 + b.0, a.1 + b.1, a.2 + b.2)
            });
        Ok((o_t / norm, o_r / norm))
    }

    /// Radiated and extinguished power for one solution,
    /// `b†(I + 2 Im G) b` and `2 Im Σ b_n ū_in(r_n)`, which agree for
    /// lossless atoms.
    pub fn power_balance(&self, sol: &DipoleSolution) -> (f64, f64) {
        let b = &sol.amplitudes;
        let g = &self.coupling;
        let radiated: f64 = (0..b.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = b[i];
                for (j, bj) in b.iter().enumerate() {
                    acc += 2.0 * g[(i, j)].im * bj;
                }
                (b[i].conj() * acc).re
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let u = &self.drives[side_index(sol.side)];
        let extinguished: f64 = 2.0 * b.iter().zip(u).map(|(b, u)| b * u.conj()).sum::<C>().im;
        (radiated, extinguished)
    }

    /// `r_q(δ) = ½[1 − t₊ − r₊ c₋/c₊]` with the mode coefficients of gauge
    /// `z_c = 0`.
    pub fn efficiency(&self, detuning: f64, mode: Mode) -> Result<(C, ScatteringResult<f64>)> {
        let s = self.scattering(detuning)?;
        let coeffs = mode_coefficients(&self.array.config.with_gauge(0.0), mode);
        Ok((efficiency_from_scattering(&s, &coeffs, Side::Plus)?, s))
    }

    /// Rayleigh-quotient estimate of the finite-array resonance of mode `q`:
    /// `δ ≈ −Re(vᵀ G v / vᵀ v)` with `v` the beam profile on layer 1 and
    /// `e^{iq}` times it on layer 2.
    pub fn resonance_estimate(&self, mode: Mode) -> f64 {
        let s = mode.sign::<f64>();
        let v: Vec<C> = self
            .array
            .positions
            .iter()
            .zip(&self.array.layer)
            .map(|(&p, &l)| {
                let w = if l == 0 { 1.0 } else { s };
                self.beam.field(Side::Plus, [p[0], p[1], 0.0]) * w
            })
            .collect();
        let g = &self.coupling;
        let num: C = (0..v.len())
            .into_par_iter()
            .map(|i| {
                let row: C = v.iter().enumerate().map(|(j, vj)| g[(i, j)] * vj).sum();
                v[i] * row
            })
            .collect::<Vec<C>>()
            .iter()
            .sum();
        let den: C = v.iter().map(|x| x * x).sum();
        -(num / den).re
    }

    /// Maximizes `Re r_q(δ)` over `δ̂ ± 3Γ₁D` around [`Self::resonance_estimate`].
    pub fn find_resonance(&self, mode: Mode) -> Result<Resonance> {
        let center = self.resonance_estimate(mode);
        let half = RESONANCE_BRACKET * self.array.config.layer.gamma_1d();
        self.find_resonance_in(mode, center - half, center + half)
    }

    pub fn find_resonance_in(&self, mode: Mode, lo: f64, hi: f64) -> Result<Resonance> {
        let mut evaluations = 0usize;
        let mut err = None;
        let mut objective = |d: f64| -> f64 {
            evaluations += 1;
            match self.efficiency(d, mode) {
                Ok((r, _)) => -r.re,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::INFINITY
                }
            }
        };
        let (d_star, _) = brent_minimize(&mut objective, lo, hi, RESONANCE_TOLERANCE);
        if let Some(e) = err {
            return Err(e);
        }
        let edge = 10.0 * RESONANCE_TOLERANCE;
        if d_star - lo < edge || hi - d_star < edge {
            return Err(Error::NonConvergence(format!(
                "no interior maximum of Re r_q in [{lo}, {hi}] (hit {d_star})"
            )));
        }
        let (efficiency, scattering) = self.efficiency(d_star, mode)?;
        Ok(Resonance {
            detuning: d_star,
            efficiency,
            scattering,
            evaluations: evaluations + 1,
        })
    }
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Plus => 0,
        Side::Minus => 1,
    }
}

/// Half-width of the resonance bracket, units of `Γ₁D`.
pub const RESONANCE_BRACKET: f64 = 3.0;
/// Detuning tolerance of the resonance search, units of γ.
pub const RESONANCE_TOLERANCE: f64 = 1e-4;

/// Brent's parabolic/golden minimization on `[a, b]`.
fn brent_minimize(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (a, b);
    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol / 3.0 + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x < m { b - x } else { a - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Transverse overlap planes at `z = ±z_eval`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePlane {
    pub z_eval: f64,
    /// Grid spacing, at most λ/4.
    pub spacing: f64,
    /// Disk radius; defaults to `3 w(z_eval)`.
    pub radius: Option<f64>,
}

impl QuadraturePlane {
    /// Planes 2λ beyond the outermost layer at λ/4 spacing.
    pub fn default_for(arr: &FiniteArray) -> Self {
        QuadraturePlane {
            z_eval: arr.max_abs_z() + 2.0,
            spacing: 0.25,
            radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub detuning: f64,
    /// Complex `r_q(δ*)`; the imaginary part is a diagnostic.
    pub efficiency: C,
    pub scattering: ScatteringResult<f64>,
    pub evaluations: usize,
}

/// Finite-array efficiency at resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub atoms_per_layer: usize,
    pub detuning: f64,
    pub efficiency: f64,
    pub imaginary_residual: f64,
    pub scattering: ScatteringResult<f64>,
}

pub fn scattering_efficiency(arr: &FiniteArray, beam: GaussianBeam, mode: Mode) -> Result<EfficiencyResult> {
    let sim = Simulation::new(arr.clone(), beam)?;
    let res = sim.find_resonance(mode)?;
    Ok(EfficiencyResult {
        atoms_per_layer: arr.atoms_per_layer,
        detuning: res.detuning,
        efficiency: res.efficiency.re,
        imaginary_residual: res.efficiency.im,
        scattering: res.scattering,
    })
}

/// Default beam waist as a fraction of the patch side.
pub const DEFAULT_WAIST_RATIO: f64 = 0.26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSweep {
    pub mode: Mode,
    pub waist_ratio: f64,
    pub rows: Vec<EfficiencyResult>,
    /// Least-squares slope of `ln(1 − r_q)` against `ln N`.
    pub exponent: f64,
    pub intercept: f64,
    /// Infinite-array collective shift of the same mode, for reference.
    pub analytic_shift: f64,
}

/// `1 − r_q` against `N` at fixed `w/L`, with a power-law fit.
pub fn scaling_sweep(
    cfg: &BilayerConfig<f64>,
    mode: Mode,
    sizes: &[usize],
    waist_ratio: f64,
) -> Result<ScalingSweep> {
    if sizes.len() < 4 {
        return Err(Error::invalid("N", "scaling sweep needs at least 4 sizes"));
    }
    let analytic_shift = effective_params(cfg, mode)?.params.collective_shift;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let arr = build_positions(cfg, n)?;
        let beam = GaussianBeam::for_array(&arr, waist_ratio)?;
        rows.push(scattering_efficiency(&arr, beam, mode)?);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.atoms_per_layer as f64).ln(), (1.0 - r.efficiency).ln()))
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::NonConvergence("1 − r_q not positive; power law undefined".into()));
    }
    let (exponent, intercept) = linear_fit(&pts);
    Ok(ScalingSweep {
        mode,
        waist_ratio,
        rows,
        exponent,
        intercept,
        analytic_shift,
    })
}

/// Ordinary least squares `y = s x + c`; returns `(s, c)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}
