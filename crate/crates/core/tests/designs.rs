mod common;

use bilayer_core::bilayer::{effective_params, radiative_rates};
use bilayer_core::designs::{escape_estimate, find_resonant_sets_with, ResonantCurve, SearchWindow};
use bilayer_core::lattice::{LatticeKind, LayerGeometry};
use bilayer_core::{Error, Mode};
use proptest::prelude::*;

const KINDS: [LatticeKind; 2] = [LatticeKind::Square, LatticeKind::Triangular];

fn curves() -> Vec<ResonantCurve> {
    let mut out = Vec::new();
    for kind in KINDS {
        for nc in [0, 1, 2] {
            out.push(ResonantCurve::new(kind, Mode::InPhase, nc).unwrap());
        }
        for nc in [1, 2] {
            out.push(ResonantCurve::new(kind, Mode::OutOfPhase, nc).unwrap());
        }
    }
    out
}

#[test]
fn curve_points_cancel_diffraction() {
    // 200 points per curve, checked against the amplitude oracle as well.
    for curve in curves() {
        let lo = curve.min_interlayer::<f64>() * 1.0005;
        let psi = curve.kind.angle::<f64>();
        for (az, a) in curve.sample(lo, lo + 4.0, 200).unwrap() {
            let cfg = curve.config_at::<f64>(az).unwrap();
            let m = effective_params(&cfg, curve.mode).unwrap();
            let g1d = cfg.layer.gamma_1d();
            assert!(m.diffraction_loss < 1e-12 * g1d, "{curve:?} at a_z = {az}");
            let (_, oracle) = common::rates_by_amplitudes(a, psi, az, [0.0, 0.0], curve.mode.sign());
            assert!(oracle < 1e-12 * g1d, "{curve:?} oracle at a_z = {az}: {oracle}");
        }
    }
}

proptest! {
    #[test]
    fn off_curve_points_leak(t in 0.0f64..1.0, da in 0.01f64..0.05, pick in 0usize..10) {
        let curve = curves()[pick];
        let lo = curve.min_interlayer::<f64>() * 1.01;
        let az = lo + 2.0 * t;
        let a = curve.spacing_at::<f64>(az).unwrap() - da;
        let first = curve.kind.first_shell_edge::<f64>();
        prop_assume!(a > first + 1e-3);
        let (_, loss) = common::rates_by_amplitudes(a, curve.kind.angle(), az, [0.0, 0.0], curve.mode.sign());
        prop_assert!(loss > 0.0);
    }
}

#[test]
fn curve_examples() {
    let sq = ResonantCurve::new(LatticeKind::Square, Mode::InPhase, 0).unwrap();
    assert!((sq.spacing_at::<f64>(0.80).unwrap() - 1.281).abs() < 5e-4);
    // 1/√(1 − (1/1.6)²), hand-evaluated.
    assert!((sq.spacing_at::<f64>(0.80).unwrap() - 1.281025230440697).abs() < 1e-12);
    let tri = ResonantCurve::new(LatticeKind::Triangular, Mode::InPhase, 0).unwrap();
    assert!((tri.spacing_at::<f64>(0.68).unwrap() - 1.704).abs() < 5e-4);
}

#[test]
fn pi_branch_approaches_first_edge_from_above() {
    for kind in KINDS {
        let c = ResonantCurve::new(kind, Mode::OutOfPhase, 1).unwrap();
        let edge = kind.first_shell_edge::<f64>();
        let mut prev = f64::INFINITY;
        for az in [3.0, 10.0, 100.0, 1000.0] {
            let a = c.spacing_at::<f64>(az).unwrap();
            assert!(a > edge && a < prev);
            prev = a;
        }
        assert!(prev - edge < 1e-6 * edge);
    }
}

#[test]
fn pi_branch_zero_rejected() {
    for kind in KINDS {
        assert!(matches!(ResonantCurve::new(kind, Mode::OutOfPhase, 0), Err(Error::Domain(_))));
    }
}

#[test]
fn curve_domain_enforced() {
    let c = ResonantCurve::new(LatticeKind::Square, Mode::InPhase, 1).unwrap();
    let lo = c.min_interlayer::<f64>();
    // The curve meets the second shell edge √2 at its lower end.
    assert!((lo - 1.5 * 2f64.sqrt()).abs() < 1e-12);
    assert!(c.spacing_at::<f64>(lo).is_err());
    assert!(c.spacing_at::<f64>(lo * 1.001).unwrap() < 2f64.sqrt());
    assert!(c.sample(1.0, 0.5, 10).is_err());
}

#[test]
fn bragg_points_on_curve_are_isolated() {
    // On the q = 0 curve the zeroth-order rate Γ₁D (1 + cos k a_z) takes its
    // maximum 2Γ₁D only where a_z is an integer: single points, not intervals.
    let c = ResonantCurve::new(LatticeKind::Square, Mode::InPhase, 0).unwrap();
    for az in [1.0, 2.0, 3.0] {
        let at = |z: f64| {
            let cfg = c.config_at::<f64>(z).unwrap();
            let (g, _) = radiative_rates(&cfg, Mode::InPhase).unwrap();
            g / cfg.layer.gamma_1d()
        };
        assert!((at(az) - 2.0).abs() < 1e-12);
        for dz in [1e-3, -1e-3, 1e-2, -1e-2] {
            assert!(at(az + dz) < 2.0 - 1e-6, "a_z = {}", az + dz);
        }
    }
    // Half-integer spacings darken q = 0 and brighten q = π instead.
    let cfg = c.config_at::<f64>(1.5).unwrap();
    let (g, _) = radiative_rates(&cfg, Mode::OutOfPhase).unwrap();
    assert!((g / cfg.layer.gamma_1d() - 2.0).abs() < 1e-12);
}

fn oracle_residual(kind: LatticeKind, a: f64, az: f64, shift: [f64; 2], mode: Mode) -> f64 {
    let (_, loss) = common::rates_by_amplitudes(a, kind.angle(), az, [shift[0] * a, shift[1] * a], mode.sign());
    loss / common::gamma_1d(a, kind.angle())
}

#[test]
fn shifted_square_sets() {
    let w = SearchWindow {
        spacing: [1.42, 1.99],
        interlayer: [0.5, 3.0],
    };
    let shift = [0.5, 0.5];
    let found = find_resonant_sets_with::<f64>(LatticeKind::Square, shift, Mode::InPhase, &w, 400).unwrap();
    assert!(!found.sets.is_empty());
    for s in &found.sets {
        assert!(oracle_residual(LatticeKind::Square, s.spacing, s.interlayer, shift, Mode::InPhase) < 1e-9);
    }
    assert!(found
        .sets
        .iter()
        .any(|s| (s.spacing - 1.53).abs() < 0.02 && (s.interlayer - 1.32).abs() < 0.02));
}

#[test]
fn triangular_pi_set() {
    let w = SearchWindow {
        spacing: [2.01, 2.30],
        interlayer: [0.5, 3.0],
    };
    let found = find_resonant_sets_with::<f64>(LatticeKind::Triangular, [0.0, 0.0], Mode::OutOfPhase, &w, 400).unwrap();
    let hit = found
        .sets
        .iter()
        .find(|s| (s.interlayer - 2.35).abs() < 0.02 && (s.spacing - 2.21).abs() < 0.02)
        .expect("set near (a_z, a) = (2.35, 2.21)");
    assert!(oracle_residual(LatticeKind::Triangular, hit.spacing, hit.interlayer, [0.0, 0.0], Mode::OutOfPhase) < 1e-9);
}

#[test]
fn every_coarse_minimum_refines() {
    // Independent coarse scan with the oracle; every sub-1e-3 local minimum
    // must sit next to a reported set.
    let (kind, shift, mode) = (LatticeKind::Square, [0.5, 0.5], Mode::InPhase);
    let w = SearchWindow {
        spacing: [1.42, 1.99],
        interlayer: [0.5, 3.0],
    };
    let found = find_resonant_sets_with::<f64>(kind, shift, mode, &w, 400).unwrap();
    let n = 240;
    let ax = |r: [f64; 2], i: usize| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64;
    let grid: Vec<f64> = (0..n * n)
        .map(|k| oracle_residual(kind, ax(w.spacing, k / n), ax(w.interlayer, k % n), shift, mode))
        .collect();
    let (da, dz) = ((w.spacing[1] - w.spacing[0]) / (n - 1) as f64, (w.interlayer[1] - w.interlayer[0]) / (n - 1) as f64);
    let mut minima = 0;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let v = grid[i * n + j];
            let neighbours = [(0, 1), (2, 1), (1, 0), (1, 2), (0, 0), (2, 2), (0, 2), (2, 0)];
            if v >= 1e-3 || neighbours.iter().any(|&(di, dj)| grid[(i + di - 1) * n + j + dj - 1] < v) {
                continue;
            }
            minima += 1;
            let (a, az) = (ax(w.spacing, i), ax(w.interlayer, j));
            assert!(
                found.sets.iter().any(|s| (s.spacing - a).abs() <= 2.0 * da && (s.interlayer - az).abs() <= 2.0 * dz),
                "minimum at ({a}, {az}) not reported"
            );
        }
    }
    assert!(minima > 0);
}

#[test]
fn one_shell_window_rejected() {
    let w = SearchWindow {
        spacing: [1.1, 1.3],
        interlayer: [0.5, 3.0],
    };
    let r = find_resonant_sets_with::<f64>(LatticeKind::Square, [0.0, 0.0], Mode::InPhase, &w, 50);
    assert!(matches!(r, Err(Error::Domain(_))));
    let bad = SearchWindow {
        spacing: [1.8, 1.5],
        interlayer: [0.5, 3.0],
    };
    assert!(find_resonant_sets_with::<f64>(LatticeKind::Square, [0.0, 0.0], Mode::InPhase, &bad, 50).is_err());
}

#[test]
fn escape_estimate_example() {
    let layer = LayerGeometry::<f64>::square(1.28).unwrap();
    let e = escape_estimate::<f64>(&layer, 0.8, 900, (1, 0)).unwrap();
    let x: f64 = 1.0 / 1.28;
    assert!((e.angle - x.asin()).abs() < 1e-14);
    assert!((e.angle - 0.8967).abs() < 1e-4);
    // (30 a / (a_z tan θ))² with tan θ = x/√(1 − x²).
    let m = (30.0 * 1.28 * (1.0 - x * x).sqrt() / (0.8 * x)).powi(2);
    assert!((e.bounces - m).abs() < 1e-9 * m);
    assert!((e.bounces - 1471.0).abs() < 1.0);
    assert!((e.inefficiency_scale * e.bounces - 1.0).abs() < 1e-15);
    assert!(escape_estimate::<f64>(&layer, 0.8, 900, (0, 0)).is_err());
    assert!(escape_estimate::<f64>(&layer, 0.8, 900, (1, 1)).is_err());
}
