//! Invariant suite behind `bilayer check`. Draws are seeded, so the table is
//! reproducible.

use bilayer_core::bilayer::{analytic_scattering, effective_params, mode_coefficients, radiative_rates};
use bilayer_core::dipole_sim::{build_positions, GaussianBeam, Simulation};
use bilayer_core::iface1d::{efficiency_from_params, efficiency_from_scattering};
use bilayer_core::memory::{abrupt_rf, optimal_pulse, storage_efficiency, storage_efficiency_rf, MemorySchedule, ScheduleKind};
use bilayer_core::{designs::ResonantCurve, BilayerConfig, LatticeKind, LayerGeometry, Mode, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

const KINDS: [LatticeKind; 2] = [LatticeKind::Square, LatticeKind::Triangular];

fn random_config(rng: &mut ChaCha8Rng, max_spacing: f64) -> Result<BilayerConfig, CliError> {
    let kind = KINDS[rng.gen_range(0..2)];
    let a = rng.gen_range(0.2..max_spacing) * kind.first_shell_edge::<f64>();
    let az = rng.gen_range(0.05..3.0);
    let shift = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
    Ok(BilayerConfig::new(LayerGeometry::of_kind(kind, a)?, az)?.with_shift(shift))
}

fn sum_rule(rng: &mut ChaCha8Rng, n: usize) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let cfg = random_config(rng, 0.99)?;
        let g1d = cfg.layer.gamma_1d();
        let (g0, _) = radiative_rates(&cfg, Mode::InPhase)?;
        let (gp, _) = radiative_rates(&cfg, Mode::OutOfPhase)?;
        worst = worst.max((g0 + gp - 2.0 * g1d).abs() / g1d);
    }
    Ok(worst)
}

fn self_consistency(rng: &mut ChaCha8Rng, n: usize) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let cfg = random_config(rng, 0.99)?
            .with_loss(rng.gen_range(0.0..0.5))
            .with_gauge(rng.gen_range(-1.0..1.0));
        for mode in Mode::BOTH {
            let m = effective_params(&cfg, mode)?;
            let expected = efficiency_from_params(&m.params)?;
            let s = analytic_scattering(&cfg, m.params.collective_shift)?;
            let got = efficiency_from_scattering(&s, &mode_coefficients(&cfg, mode), Side::Plus)?;
            worst = worst.max((got.re - expected).abs()).max(got.im.abs());
        }
    }
    Ok(worst)
}

fn unitarity(rng: &mut ChaCha8Rng, configs: usize) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let cfg = random_config(rng, 0.99)?;
        let g1d = cfg.layer.gamma_1d();
        for i in 0..100 {
            let delta = g1d * (-5.0 + 10.0 * i as f64 / 99.0);
            let s = analytic_scattering(&cfg, delta)?;
            for side in [Side::Plus, Side::Minus] {
                worst = worst.max((s.power(side) - 1.0).abs());
            }
        }
    }
    Ok(worst)
}

fn resonant_curves() -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for kind in KINDS {
        for mode in Mode::BOTH {
            let branches = if mode.is_pi() { [1, 2] } else { [0, 1] };
            for nc in branches {
                let curve = ResonantCurve::new(kind, mode, nc)?;
                let lo = curve.min_interlayer::<f64>() * 1.001;
                for (az, _) in curve.sample(lo, lo + 3.0, 200)? {
                    let cfg = curve.config_at(az)?;
                    let (_, loss) = radiative_rates(&cfg, mode)?;
                    worst = worst.max(loss / cfg.layer.gamma_1d());
                }
            }
        }
    }
    Ok(worst)
}

fn abrupt_memory() -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for g1d in [0.5, 1.0, 2.0] {
        for loss in [0.0, 0.003, 0.03] {
            for tau in [0.5, 5.0, 50.0] {
                for duration in [100.0, 400.0] {
                    let s = MemorySchedule::new(ScheduleKind::Abrupt, tau, duration, g1d, loss)?;
                    let d = storage_efficiency_rf(&s) - abrupt_rf(g1d, loss, tau, duration);
                    worst = worst.max(d.abs());
                }
            }
        }
    }
    Ok(worst)
}

fn optimal_pulse_identity() -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for tau in [3.0, 30.0] {
        let s = MemorySchedule::new(ScheduleKind::Exponential, tau, 300.0, 1.0, 0.006)?;
        let h = optimal_pulse(&s)?;
        let e = storage_efficiency(&s, &h)?;
        worst = worst.max((e.overlap - e.rf).abs()).max((e.direct - e.rf).abs());
    }
    Ok(worst)
}

fn power_balance() -> Result<f64, CliError> {
    let cfg = BilayerConfig::new(LayerGeometry::square(0.8)?, 1.0)?;
    let arr = build_positions(&cfg, 16)?;
    let beam = GaussianBeam::for_array(&arr, 0.5)?;
    let sim = Simulation::new(arr, beam)?;
    let mut worst = 0.0f64;
    for delta in [-0.5, 0.0, 0.5] {
        for sol in sim.solve(delta)?.iter() {
            let (rad, ext) = sim.power_balance(sol);
            worst = worst.max((rad - ext).abs() / ext.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

/// Runs every check; `samples` sets the random draws of the sampled ones.
pub fn run_suite(seed: u64, samples: usize) -> Result<Vec<CheckRow>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row = |name, worst, tolerance| CheckRow {
        name,
        worst,
        tolerance,
    };
    Ok(vec![
        row("sum_rule", sum_rule(&mut rng, samples)?, 1e-12),
        row("self_consistency", self_consistency(&mut rng, samples)?, 1e-10),
        row("unitarity", unitarity(&mut rng, (samples / 100).max(1))?, 1e-10),
        row("resonant_curves", resonant_curves()?, 1e-12),
        row("abrupt_memory", abrupt_memory()?, 1e-10),
        row("optimal_pulse", optimal_pulse_identity()?, 1e-8),
        row("power_balance", power_balance()?, 1e-10),
    ])
}
