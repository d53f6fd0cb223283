use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use qest::commute::{build_kernels, calibrate_backaction, theorem_report, CausalityCheck};
use qest::feedback::{closed_loop, equivalence_report, inloop_error_commutator, transduction_plant, LoopModel};
use qest::mc::{simulate_closed_loop, simulate_open_loop, Moments};
use qest::models::{near_resonance_model, Bath, Measurement, Observable, SpectralModel};
use qest::wiener::{synthesize, uncertainty_product};
use qest::{Complex64, Error};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

const SWEEP_HEADER: &str = "gamma_meas_over_gamma0,n_th,gamma_W,sigma_dx2_over_xzpf2,sigma_dp2_over_pzpf2,product_over_hbar2_4";

fn create(dir: &str, path: &Path) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {dir}: {e}")))?;
    let f = File::create(path).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_json(cfg: &RunConfig, file: &str, value: &impl Serialize) -> Result<(), CliError> {
    let path = cfg.output.path(file);
    let mut w = create(&cfg.output.dir, &path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    writeln!(w, "{text}")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

struct SweepRow {
    ratio: f64,
    n_th: f64,
    gamma_w: f64,
    x: f64,
    p: f64,
    product: f64,
}

fn sweep_row(cfg: &RunConfig, gamma0: f64, ratio: f64, n_th: f64) -> Result<SweepRow, CliError> {
    let mut params = cfg.model.params();
    params.measurement = Measurement::Rate { gamma_meas: ratio * gamma0 };
    params.bath = Bath::Occupancy { n_th };
    let m = near_resonance_model(&params)?;
    let r = uncertainty_product(&m)?;
    Ok(SweepRow {
        ratio,
        n_th,
        gamma_w: m.rates.gamma_w / gamma0,
        x: r.sigma_dx2 / m.rates.x_zpf.powi(2),
        p: r.sigma_dp2 / m.rates.p_zpf.powi(2),
        product: r.product_over_floor(),
    })
}

/// One row per grid point, `n_th`-major; rates are in units of `gamma0`.
pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_sweep()?;
    let gamma0 = cfg
        .model
        .params()
        .rates()
        .map_err(|e| CliError::validation(format!("model: {e}")))?
        .gamma0;
    let grid: Vec<(f64, f64)> = cfg
        .sweep
        .n_th
        .iter()
        .flat_map(|&n| cfg.sweep.gamma_meas_over_gamma0.iter().map(move |&g| (g, n)))
        .collect();
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&(g, n)| sweep_row(cfg, gamma0, g, n))
        .collect::<Result<_, _>>()?;
    let path = cfg.output.path(&cfg.output.sweep_csv);
    let mut w = create(&cfg.output.dir, &path)?;
    let io = |e: std::io::Error| CliError::runtime(format!("cannot write {}: {e}", path.display()));
    writeln!(w, "{SWEEP_HEADER}").map_err(io)?;
    for r in &rows {
        writeln!(w, "{},{},{},{},{},{}", r.ratio, r.n_th, r.gamma_w, r.x, r.p, r.product).map_err(io)?;
    }
    w.flush().map_err(io)?;
    println!("sweep: {} rows -> {}", rows.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    violated_hypothesis: Option<String>,
}

impl Check {
    fn new(name: &'static str, value: f64, threshold: f64) -> Self {
        Check { name, value, threshold, pass: value <= threshold, violated_hypothesis: None }
    }
}

fn loop_model(cfg: &RunConfig, m: &SpectralModel) -> Result<LoopModel, CliError> {
    match &cfg.feedback {
        Some(l) => l.build(m),
        None => Ok(LoopModel::open(transduction_plant(m))?),
    }
}

fn complex(c: Complex64) -> Value {
    json!([c.re, c.im])
}

/// Kernel, commutator and in-loop checks; the report is written even when
/// a check fails.
pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let m = cfg.spectral_model()?;
    let lp = loop_model(cfg, &m)?;
    closed_loop(&lp).map_err(|e| CliError::validation(format!("loop: {e}")))?;

    let mut w_x = synthesize(&m, Observable::X)?.filter;
    if cfg.verify.anticausal_filter {
        w_x = w_x.conj_reflect();
    }
    let w_p = synthesize(&m, Observable::P)?.filter;
    let (theorem, violation) = match theorem_report(&m, &w_x, &w_p, CausalityCheck::Strict) {
        Ok(r) => (r, None),
        Err(Error::Usage(msg)) => (theorem_report(&m, &w_x, &w_p, CausalityCheck::Bypass)?, Some(msg)),
        Err(e) => return Err(e.into()),
    };

    let mut equivalence = 0.0f64;
    let mut realizable = true;
    for obs in [Observable::X, Observable::P] {
        let r = equivalence_report(&m, &lp, obs)?;
        equivalence = equivalence.max(r.max_deviation);
        realizable &= r.inloop_filter_realizable;
    }
    let kernels = build_kernels(&m, Some(&calibrate_backaction(&m)?))?;
    let c_loop = inloop_error_commutator(&m, &lp, &kernels)?;
    let hbar = m.params.hbar;

    let mut commutator = Check::new("error_commutator_deviation", theorem.deviation, 1e-8);
    if let Some(msg) = violation {
        commutator.pass = false;
        commutator.violated_hypothesis = Some(format!("causality of the estimator filters: {msg}"));
    }
    let mut checks = vec![
        Check::new("max_kyy_over_hbar", theorem.max_kyy, 1e-10),
        Check::new("max_kxy_causal_over_hbar", theorem.max_kxy_causal, 1e-10),
        commutator,
        Check::new("inloop_equivalence_max_deviation", equivalence, 1e-10),
        Check::new("inloop_error_commutator_deviation", (c_loop - Complex64::new(0.0, hbar)).norm() / hbar, 1e-8),
    ];
    if !realizable {
        let mut c = Check::new("inloop_filter_realizable", 1.0, 0.0);
        c.violated_hypothesis = Some("in-loop estimator is not causal and stable".into());
        checks.push(c);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    let report = json!({
        "config": cfg,
        "pass": failed.is_empty(),
        "checks": checks,
        "error_commutator_over_hbar": complex(theorem.commutator / hbar),
        "inloop_error_commutator_over_hbar": complex(c_loop / hbar),
    });
    write_json(cfg, &cfg.output.verify_json, &report)?;
    for c in &checks {
        println!("{} {:e} (threshold {:e}) {}", c.name, c.value, c.threshold, if c.pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        println!("verify: PASS");
        Ok(())
    } else {
        println!("verify: FAIL");
        Err(CliError::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct StatsFile<'a> {
    config: &'a RunConfig,
    empirical: Moments,
    analytic: Moments,
    se: Moments,
    n_batches: usize,
}

/// Open-loop run, or an in-loop run when `loop` is configured.
pub fn simulate(mut cfg: RunConfig) -> Result<(), CliError> {
    let sim = cfg.resolve_sim()?;
    let lp = match &cfg.feedback {
        Some(l) => {
            let m = cfg.spectral_model()?;
            let lp = l.build(&m)?;
            closed_loop(&lp).map_err(|e| CliError::validation(format!("loop: {e}")))?;
            Some(lp)
        }
        None => None,
    };
    let (traces, stats, extra) = match &lp {
        None => {
            let run = simulate_open_loop(&sim)?;
            (run.traces, run.stats, None)
        }
        Some(lp) => {
            let run = simulate_closed_loop(&sim, lp)?;
            let extra = json!({
                "config": &cfg,
                "open_loop": { "empirical": run.open.empirical, "se": run.open.se },
                "difference": run.difference,
                "difference_se": run.difference_se,
            });
            (run.traces, run.inloop, Some(extra))
        }
    };

    let path = cfg.output.path(&cfg.output.traces_csv);
    let mut w = create(&cfg.output.dir, &path)?;
    traces
        .write_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    let file = StatsFile {
        config: &cfg,
        empirical: stats.empirical,
        analytic: stats.analytic,
        se: stats.se,
        n_batches: stats.n_batches,
    };
    write_json(&cfg, &cfg.output.stats_json, &file)?;
    if let Some(extra) = extra {
        write_json(&cfg, &cfg.output.loop_json, &extra)?;
    }
    let e = stats.empirical.sigma_dx2;
    let a = stats.analytic.sigma_dx2;
    println!("empirical={e}, analytic={a}, z={}", stats.z_score());
    Ok(())
}
