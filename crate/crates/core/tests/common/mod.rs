//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's lattice or bilayer code.
#![allow(dead_code)]

use std::f64::consts::PI;

pub const K: f64 = 2.0 * PI;

/// `3λ²/(4π A)` with `A = a² sin ψ`.
pub fn gamma_1d(a: f64, psi: f64) -> f64 {
    3.0 / (4.0 * PI * a * a * psi.sin())
}

/// Radiative diffraction orders as `(Q/k, k_z/k)`, zeroth order first,
/// from an explicit inverse of the primitive-vector matrix.
pub fn radiative_orders(a: f64, psi: f64) -> Vec<([f64; 2], f64)> {
    let (a1, a2) = ([a, 0.0], [a * psi.cos(), a * psi.sin()]);
    let det = a1[0] * a2[1] - a1[1] * a2[0];
    // Rows of 2π (A⁻¹)ᵀ.
    let b1 = [2.0 * PI * a2[1] / det, -2.0 * PI * a2[0] / det];
    let b2 = [-2.0 * PI * a1[1] / det, 2.0 * PI * a1[0] / det];
    let bound = (2.0 * a).ceil() as i32 + 2;
    let mut out = vec![([0.0, 0.0], 1.0)];
    for m1 in -bound..=bound {
        for m2 in -bound..=bound {
            if m1 == 0 && m2 == 0 {
                continue;
            }
            let q = [
                (m1 as f64 * b1[0] + m2 as f64 * b2[0]) / K,
                (m1 as f64 * b1[1] + m2 as f64 * b2[1]) / K,
            ];
            let q2 = q[0] * q[0] + q[1] * q[1];
            if q2 < 1.0 {
                out.push((q, (1.0 - q2).sqrt()));
            }
        }
    }
    out
}

/// Distance of the nearest order to the light cone, `min | |Q|/k − 1 |`.
pub fn grazing_distance(a: f64, psi: f64) -> f64 {
    let (a1, a2) = ([a, 0.0], [a * psi.cos(), a * psi.sin()]);
    let det = a1[0] * a2[1] - a1[1] * a2[0];
    let b1 = [2.0 * PI * a2[1] / det, -2.0 * PI * a2[0] / det];
    let b2 = [-2.0 * PI * a1[1] / det, 2.0 * PI * a1[0] / det];
    let bound = (2.0 * a).ceil() as i32 + 2;
    let mut best = f64::INFINITY;
    for m1 in -bound..=bound {
        for m2 in -bound..=bound {
            let q = [
                (m1 as f64 * b1[0] + m2 as f64 * b2[0]) / K,
                (m1 as f64 * b1[1] + m2 as f64 * b2[1]) / K,
            ];
            best = best.min(((q[0] * q[0] + q[1] * q[1]).sqrt() - 1.0).abs());
        }
    }
    best
}

/// `(Γ_q, γ_q,diff)` from the far-field amplitudes of each radiative order.
///
/// A mode with layer amplitudes `(1, s)/√2` at `z = ∓a_z/2`, layer 2 shifted
/// by `d` (Cartesian, units of λ), emits into order `m` and direction `±z`
/// with relative amplitude `(e^{∓ik k_z z₁} + s e^{∓ik k_z z₂} e^{−iQ·d})/√2`.
/// The per-order single-layer rate `Γ_m = Γ₁D (1 − q²/2)/k_z` splits equally
/// between the two directions.
pub fn rates_by_amplitudes(a: f64, psi: f64, az: f64, d: [f64; 2], s: f64) -> (f64, f64) {
    let g1d = gamma_1d(a, psi);
    let (z1, z2) = (-az / 2.0, az / 2.0);
    let mut coupling = 0.0;
    let mut loss = 0.0;
    for (i, (q, kz)) in radiative_orders(a, psi).into_iter().enumerate() {
        let q2 = q[0] * q[0] + q[1] * q[1];
        let gm = g1d * (1.0 - q2 / 2.0) / kz;
        let qd = K * (q[0] * d[0] + q[1] * d[1]);
        let mut total = 0.0;
        for dir in [1.0, -1.0] {
            let amp = num_complex::Complex64::from_polar(1.0, -dir * K * kz * z1)
                + s * num_complex::Complex64::from_polar(1.0, -dir * K * kz * z2 - qd);
            total += 0.5 * amp.norm_sqr() / 2.0;
        }
        if i == 0 {
            coupling += gm * total;
        } else {
            loss += gm * total;
        }
    }
    (coupling, loss)
}

/// Brute-force `r_f` of a time-dependent 1D model by trapezoidal integration
/// of `∫₀ᵀ Γ(t) exp(−∫ₜᵀ (Γ+γ)) dt` on a uniform grid; only for smooth
/// schedules.
pub fn rf_trapezoid(coupling: impl Fn(f64) -> f64, loss: f64, duration: f64, steps: usize) -> f64 {
    let h = duration / steps as f64;
    // Integrate backwards so the tail integral stays accurate near T.
    let mut tail = 0.0;
    let mut acc = 0.0;
    let mut prev_rate = coupling(duration) + loss;
    let mut prev_val = coupling(duration);
    for i in (0..steps).rev() {
        let t = i as f64 * h;
        let rate = coupling(t) + loss;
        tail += 0.5 * h * (rate + prev_rate);
        let val = coupling(t) * (-tail).exp();
        acc += 0.5 * h * (val + prev_val);
        prev_rate = rate;
        prev_val = val;
    }
    acc
}
