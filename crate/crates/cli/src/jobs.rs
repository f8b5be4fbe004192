use std::path::PathBuf;
use std::sync::Arc;

use bilayer_core::bilayer::{efficiency_at, efficiency_map, effective_params, diffraction_residual};
use bilayer_core::designs::{find_resonant_sets_with, SearchWindow};
use bilayer_core::dipole_sim::{build_positions, scaling_sweep, scattering_efficiency, GaussianBeam, Simulation};
use bilayer_core::memory::{
    lightshift_protocol, mode_function, optimal_pulse, rf_sweep, simulate_lightshift, Control,
    EffectiveLightShift, LightShiftSystem, MemorySchedule, ScheduleKind,
};
use bilayer_core::{BilayerConfig, LatticeKind, LayerGeometry, Mode, ResonantCurve};
use serde_json::{json, Value};

use crate::output::{num, Sidecar, Table};
use crate::{checks, CliError, Command, Settings};

pub(crate) fn defaults(cmd: &str) -> Vec<(&'static str, &'static str)> {
    let mut d = vec![
        ("geometry.kind", "square"),
        ("bilayer.shift", "0,0"),
        ("bilayer.gamma_s", "0"),
        ("bilayer.q", "0"),
        ("bilayer.zc", "0"),
        ("beam.wl", "0.26"),
        ("memory.schedule", "exp"),
        ("memory.T", "1000"),
        ("memory.gs_ratio", "0.003"),
        ("memory.mode_samples", "2001"),
    ];
    d.extend(match cmd {
        "map" => vec![("geometry.a", "1.0:1.414:0.002"), ("bilayer.az", "0.5:1.6:0.005")],
        "curves" => vec![("bilayer.az", "0.5:1.6:0.005")],
        "sets" => vec![("sweep.resolution", "400"), ("sweep.az_window", "0.5,3.0")],
        "scatter" => vec![
            ("geometry.a", "1.28"),
            ("bilayer.az", "0.8"),
            ("sweep.N", "400"),
            ("sweep.delta", "auto"),
        ],
        "scaling" => vec![
            ("geometry.a", "1.28"),
            ("bilayer.az", "0.8"),
            ("sweep.N", "400,625,900,1296,1600"),
        ],
        "memory" => vec![("memory.tau", "0.1:300:log40")],
        "lightshift" => vec![("memory.tau", "100")],
        "check" => vec![("check.seed", "20240717"), ("check.samples", "1000")],
        _ => vec![],
    });
    d
}

struct Job {
    table: Table,
    results: Value,
    /// Set when the job wrote its outputs but should still exit non-zero.
    failure: Option<CliError>,
}

pub(crate) fn dispatch(cmd: &Command, s: &Settings, threads: usize) -> Result<String, CliError> {
    // Mode-dependent default branches: n_c = 0 is degenerate for q = π.
    let mut owned;
    let s = match cmd {
        Command::Curves(_) => {
            owned = s.clone();
            let pi = s.mode()?.is_pi();
            owned.default_to("sweep.nc", if pi { "1,2" } else { "0,1" }.into());
            &owned
        }
        Command::Sets(_) => {
            owned = s.clone();
            let w = match s.kind()? {
                LatticeKind::Square => "1.42,1.99",
                LatticeKind::Triangular => "2.01,2.30",
            };
            owned.default_to("sweep.a_window", w.into());
            &owned
        }
        _ => s,
    };
    let out = PathBuf::from(s.text("output.out")?);
    let job = match cmd {
        Command::Map(_) => map(s)?,
        Command::Curves(_) => curves(s)?,
        Command::Sets(_) => sets(s)?,
        Command::Scatter(_) => scatter(s)?,
        Command::Scaling(_) => scaling(s)?,
        Command::Memory(_) => memory(s)?,
        Command::Lightshift(_) => lightshift(s)?,
        Command::Check(_) => check(s)?,
    };
    job.table.write(&out)?;
    let sidecar = Sidecar {
        subcommand: cmd.name(),
        threads,
        config: s.resolved(),
        table: &job.table,
        results: job.results,
    }
    .write(&out)?;
    if let Some(e) = job.failure {
        return Err(e);
    }
    Ok(format!(
        "{}: wrote {} rows to {} ({})",
        cmd.name(),
        job.table.rows.len(),
        out.display(),
        sidecar.display()
    ))
}

fn bilayer_config(s: &Settings, a: f64, az: f64) -> Result<BilayerConfig, CliError> {
    let layer = LayerGeometry::of_kind(s.kind()?, a)?;
    let cfg = BilayerConfig::new(layer, az)?.with_shift(s.pair("bilayer.shift")?);
    cfg.validate()?;
    Ok(cfg)
}

fn single(s: &Settings, path: &str) -> Result<f64, CliError> {
    let g = s.grid(path)?;
    match g.as_slice() {
        [x] => Ok(*x),
        _ => Err(CliError::Validation(format!("{path}: expected a single value"))),
    }
}

fn map(s: &Settings) -> Result<Job, CliError> {
    let a = s.grid("geometry.a")?;
    let az = s.grid("bilayer.az")?;
    let mode = s.mode()?;
    let cfg = bilayer_config(s, a[0], az[0])?.with_loss(s.f64("bilayer.gamma_s")?);
    let m = efficiency_map(&cfg, mode, &az, &a)?;
    let mut table = Table::new(&["a_z", "a", "r_q"]);
    let mut masked = 0usize;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for (z, x, r) in m.rows() {
        if r.is_nan() {
            masked += 1;
        } else if r > best.0 {
            best = (r, z, x);
        }
        table.push(vec![num(z), num(x), num(r)]);
    }
    Ok(Job {
        table,
        results: json!({
            "shape": [az.len(), a.len()],
            "row_major": "a varies fastest",
            "masked_points": masked,
            "max_r_q": best.0,
            "argmax": {"a_z": best.1, "a": best.2},
        }),
        failure: None,
    })
}

fn curves(s: &Settings) -> Result<Job, CliError> {
    let kind = s.kind()?;
    let mode = s.mode()?;
    let az = s.grid("bilayer.az")?;
    let branches: Vec<u32> = s.parse::<String>("sweep.nc")?
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| CliError::Validation(format!("sweep.nc: `{x}` is not a branch index")))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&["a_z", "a"]);
    let mut info = Vec::new();
    for &nc in &branches {
        let curve = ResonantCurve::new(kind, mode, nc)
            .map_err(|e| CliError::Validation(format!("sweep.nc: {e}")))?;
        let first = table.rows.len();
        let mut worst = 0.0f64;
        for &z in az.iter().filter(|&&z| curve.contains(z)) {
            let a = curve.spacing_at(z)?;
            let cfg = curve.config_at(z)?;
            worst = worst.max(diffraction_residual(&cfg, mode)?);
            table.push(vec![num(z), num(a)]);
        }
        info.push(json!({
            "n_c": nc,
            "first_row": first,
            "rows": table.rows.len() - first,
            "min_a_z": curve.min_interlayer::<f64>(),
            "max_residual": worst,
        }));
    }
    Ok(Job {
        table,
        results: json!({"branches": info}),
        failure: None,
    })
}

fn sets(s: &Settings) -> Result<Job, CliError> {
    let kind = s.kind()?;
    let mode = s.mode()?;
    let shift = s.pair("bilayer.shift")?;
    let window = SearchWindow {
        spacing: s.pair("sweep.a_window")?,
        interlayer: s.pair("sweep.az_window")?,
    };
    let res = s.usize("sweep.resolution")?;
    let found = find_resonant_sets_with(kind, shift, mode, &window, res)?;
    let mut table = Table::new(&["a", "a_z", "residual", "q", "d1", "d2"]);
    for set in &found.sets {
        table.push(vec![
            num(set.spacing),
            num(set.interlayer),
            num(set.residual),
            set.mode.to_string(),
            num(set.lateral_shift[0]),
            num(set.lateral_shift[1]),
        ]);
    }
    let failures: Vec<Value> = found
        .failures
        .iter()
        .map(|f| json!({"seed": [f.seed.0, f.seed.1], "reason": f.reason}))
        .collect();
    Ok(Job {
        table,
        results: json!({"sets": found.sets.len(), "failed_seeds": failures}),
        failure: None,
    })
}

const SCATTER_HEADER: &[&str] = &["N", "delta_star", "re_t", "im_t", "re_r", "im_r", "r_q", "one_minus_r_q"];

fn scatter_row(n: usize, delta: f64, t: bilayer_core::Complex64, r: bilayer_core::Complex64, rq: f64) -> Vec<String> {
    vec![
        n.to_string(),
        num(delta),
        num(t.re),
        num(t.im),
        num(r.re),
        num(r.im),
        num(rq),
        num(1.0 - rq),
    ]
}

fn finite_config(s: &Settings) -> Result<(BilayerConfig, Mode, f64), CliError> {
    let cfg = bilayer_config(s, single(s, "geometry.a")?, single(s, "bilayer.az")?)?;
    Ok((cfg, s.mode()?, s.f64("beam.wl")?))
}

fn scatter(s: &Settings) -> Result<Job, CliError> {
    let (cfg, mode, wl) = finite_config(s)?;
    let sizes = s.sizes("sweep.N")?;
    let delta = s.text("sweep.delta")?;
    let fixed = match delta.trim() {
        "auto" => None,
        _ => Some(s.f64("sweep.delta")?),
    };
    let mut table = Table::new(SCATTER_HEADER);
    let mut diag = Vec::new();
    for &n in &sizes {
        let arr = build_positions(&cfg, n)?;
        let side = arr.side_length();
        let beam = GaussianBeam::for_array(&arr, wl)?;
        let (d, sc, rq) = match fixed {
            None => {
                let r = scattering_efficiency(&arr, beam, mode)?;
                (r.detuning, r.scattering, bilayer_core::Complex64::new(r.efficiency, r.imaginary_residual))
            }
            Some(d) => {
                let sim = Simulation::new(arr, beam)?;
                let (rq, sc) = sim.efficiency(d, mode)?;
                (d, sc, rq)
            }
        };
        table.push(scatter_row(n, d, sc.t_plus, sc.r_plus, rq.re));
        diag.push(json!({"N": n, "side_length": side, "waist": wl * side, "im_r_q": rq.im}));
    }
    let analytic = effective_params(&cfg, mode)?;
    Ok(Job {
        table,
        results: json!({
            "runs": diag,
            "infinite_array": {
                "r_q": efficiency_at(&cfg, mode),
                "collective_shift": analytic.params.collective_shift,
                "coupling_rate": analytic.params.coupling_rate,
            },
        }),
        failure: None,
    })
}

fn scaling(s: &Settings) -> Result<Job, CliError> {
    let (cfg, mode, wl) = finite_config(s)?;
    let sizes = s.sizes("sweep.N")?;
    let sweep = scaling_sweep(&cfg, mode, &sizes, wl)?;
    let mut table = Table::new(SCATTER_HEADER);
    for r in &sweep.rows {
        table.push(scatter_row(
            r.atoms_per_layer,
            r.detuning,
            r.scattering.t_plus,
            r.scattering.r_plus,
            r.efficiency,
        ));
    }
    let im: Vec<f64> = sweep.rows.iter().map(|r| r.imaginary_residual).collect();
    Ok(Job {
        table,
        results: json!({
            "exponent": sweep.exponent,
            "intercept": sweep.intercept,
            "fit": "ln(1 - r_q) = exponent * ln(N) + intercept",
            "analytic_shift": sweep.analytic_shift,
            "im_r_q": im,
        }),
        failure: None,
    })
}

fn schedule_kind(s: &Settings) -> Result<ScheduleKind, CliError> {
    let k: ScheduleKind = s.parse("memory.schedule")?;
    if k == ScheduleKind::Sampled {
        return Err(CliError::Validation(
            "memory.schedule: sampled schedules have no closed-form estimate; use exp, linear or abrupt".into(),
        ));
    }
    Ok(k)
}

fn memory(s: &Settings) -> Result<Job, CliError> {
    let kind = schedule_kind(s)?;
    let duration = s.f64("memory.T")?;
    let ratio = s.f64("memory.gs_ratio")?;
    let taus = s.grid("memory.tau")?;
    let rows = rf_sweep(kind, duration, ratio, &taus)?;
    let mut table = Table::new(&["tau_Gamma1D", "one_minus_rf_numeric", "one_minus_rf_eq18"]);
    for r in &rows {
        table.push(vec![num(r.tau_gamma_1d), num(r.one_minus_rf_numeric), num(r.one_minus_rf_estimate)]);
    }
    let mut results = json!({
        "gamma_1d": 1.0,
        "gamma_s": 2.0 * ratio,
        "plateau": ratio,
    });
    if let Some(tau) = s.opt("memory.mode_tau") {
        let tau: f64 = tau
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("memory.mode_tau: `{tau}` is not a number")))?;
        let n = s.usize("memory.mode_samples")?;
        let path = PathBuf::from(
            s.opt("memory.mode_out")
                .unwrap_or_else(|| "mode_function.csv".into()),
        );
        let sched = MemorySchedule::new(kind, tau, duration, 1.0, 2.0 * ratio)?;
        let mf = mode_function(&sched)?;
        let mut ft = Table::new(&["t", "re_f", "im_f"]);
        for (t, f) in mf.sample(n) {
            ft.push(vec![num(t), num(f.re), num(f.im)]);
        }
        ft.write(&path)?;
        results["mode_function"] = json!({
            "path": path.display().to_string(),
            "tau": tau,
            "rf": mf.rf,
            "norm": mf.norm(),
        });
    }
    Ok(Job {
        table,
        results,
        failure: None,
    })
}

fn lightshift(s: &Settings) -> Result<Job, CliError> {
    let kind = schedule_kind(s)?;
    let duration = s.f64("memory.T")?;
    let loss = 2.0 * s.f64("memory.gs_ratio")?;
    let taus = s.grid("memory.tau")?;
    let sys = LightShiftSystem::new(1.0, loss)?;
    let mut table = Table::new(&[
        "tau_Gamma1D",
        "efficiency",
        "effective_rf",
        "estimate",
        "bright_population",
        "zero_control_efficiency",
    ]);
    for &tau in &taus {
        let sched = MemorySchedule::new(kind, tau, duration, 1.0, loss)?;
        let run = lightshift_protocol(&sys, &sched)?;
        let eff = EffectiveLightShift {
            system: sys,
            schedule: sched.clone(),
        };
        let h0 = optimal_pulse(&eff)?;
        let off: Control = Arc::new(|_| 0.0);
        let zero = simulate_lightshift(&sys, &off, &h0, duration, tau.min(1.0))?;
        table.push(vec![
            num(tau),
            num(run.simulated.efficiency),
            num(run.effective_rf),
            num(run.estimate),
            num(run.simulated.bright_population),
            num(zero.efficiency),
        ]);
    }
    Ok(Job {
        table,
        results: json!({"gamma_1d": 1.0, "gamma_s": loss, "estimate": "1 - gamma_s/Gamma_1D - B gamma_s tau"}),
        failure: None,
    })
}

fn check(s: &Settings) -> Result<Job, CliError> {
    let seed = s.u64("check.seed")?;
    let samples = s.usize("check.samples")?;
    if samples == 0 {
        return Err(CliError::Validation("check.samples: must be >= 1".into()));
    }
    let rows = checks::run_suite(seed, samples)?;
    let mut table = Table::new(&["check", "passed", "worst", "tolerance"]);
    for r in &rows {
        table.push(vec![r.name.to_string(), r.passed().to_string(), num(r.worst), num(r.tolerance)]);
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    let failure = (!failed.is_empty())
        .then(|| CliError::Numerical(format!("invariant checks failed: {}", failed.join(", "))));
    Ok(Job {
        table,
        results: json!({"checks": rows.len(), "failed": failed}),
        failure,
    })
}
