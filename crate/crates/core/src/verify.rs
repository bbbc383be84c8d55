//! Built-in verification suite: every headline claim of the laboratory,
//! checked end to end at pinned tolerances. The CLI `verify` subcommand and
//! the acceptance test target both run these.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{default_config, ModelKind, ModelParams};
use crate::equilibrium::{fit_ccdf_rate, AgentPopulation};
use crate::finance::{
    integrate_to_steady_state, tree_cascade, wealth_distribution, FinanceMode, FinanceParams,
    TreeSpec,
};
use crate::goy::{total_energy, GoyIntegrator, GoyParams};
use crate::grid::ShellGrid;
use crate::pao::{consistency_residual, pao_flux, PaoParams};
use crate::runner::run_model;
use crate::statfit::{loglog_fit, semilog_fit};

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {}: {:<28} {}  ({})",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

fn outcome(id: u32, name: &'static str, passed: bool, details: String) -> CriterionOutcome {
    CriterionOutcome { id, name, passed, details }
}

/// Inertial range of the default forced-dissipative run: spectrum slope
/// -5/3 +- 0.1 over the flux-selected window, flux spread < 10% there.
pub fn criterion_1_goy_inertial_range(out_dir: &Path) -> CriterionOutcome {
    const NAME: &str = "goy inertial range";
    let started = Instant::now();
    let mut cfg = default_config(ModelKind::Goy);
    cfg.output.dir = out_dir.join("goy_default");
    let summary = match run_model(&cfg) {
        Ok(s) => s,
        Err(e) => return outcome(1, NAME, false, format!("run failed: {e}")),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let slope = match summary.fits.get("goy.spectrum.slope") {
        Some(f) => f.slope,
        None => {
            return outcome(
                1,
                NAME,
                false,
                format!(
                    "no flux window: {}",
                    summary
                        .diagnostics
                        .get("flux_window_note")
                        .map(|v| v.to_string())
                        .unwrap_or_default()
                ),
            )
        }
    };
    let spread = summary
        .diagnostics
        .get("flux_spread")
        .and_then(|v| v.as_f64())
        .unwrap_or(f64::INFINITY);
    let window = summary
        .diagnostics
        .get("flux_window")
        .map(|v| v.to_string())
        .unwrap_or_default();
    let slope_ok = (slope + 5.0 / 3.0).abs() <= 0.1;
    let spread_ok = spread < 0.10;
    outcome(
        1,
        NAME,
        slope_ok && spread_ok,
        format!(
            "slope {slope:.4} (target -5/3 +- 0.1), flux spread {:.2}% (< 10%), window {window}, {elapsed:.1}s",
            spread * 100.0
        ),
    )
}

/// Inviscid unforced conservative preset conserves total energy to < 1e-6
/// relative drift over 1e5 RK4 steps at dt = 1e-4.
pub fn criterion_2_goy_conservation() -> CriterionOutcome {
    const NAME: &str = "goy energy conservation";
    let grid = ShellGrid::new(1.0, 2.0, 22).expect("valid grid");
    let params = GoyParams::conservative_preset(grid);
    // random init concentrated at the large scales so the inviscid cascade
    // front stays resolved over the horizon
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut state = crate::goy::ShellState::zero(22);
    for n in 0..6 {
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let k = params.grid.wavenumber(n);
        state.u[n] = Complex64::from_polar(0.01 * k.powf(-1.0 / 3.0), theta);
    }
    let e0 = total_energy(&state);
    let mut integrator = match GoyIntegrator::new(params, 1e-4) {
        Ok(i) => i,
        Err(e) => return outcome(2, NAME, false, e.to_string()),
    };
    for step in 0..100_000u64 {
        if let Err(e) = integrator.step(&mut state) {
            return outcome(2, NAME, false, format!("step {step}: {e}"));
        }
    }
    if !state.is_finite() {
        return outcome(2, NAME, false, "state diverged".into());
    }
    let drift = ((total_energy(&state) - e0) / e0).abs();
    outcome(
        2,
        NAME,
        drift < 1e-6,
        format!("relative drift {drift:.3e} over 1e5 steps (< 1e-6)"),
    )
}

/// Closed-form flux/spectrum consistency at 50 log-spaced wavenumbers, plus
/// the two exact flux values.
pub fn criterion_3_pao_consistency() -> CriterionOutcome {
    const NAME: &str = "pao closure consistency";
    let p = PaoParams::new(1.6, 1.0, 1e-4).expect("valid params");
    let k_d = p.k_d();
    let mut max_residual = 0.0f64;
    for i in 0..50 {
        let k = 0.01 * k_d * (10.0f64 / 0.01).powf(i as f64 / 49.0);
        max_residual = max_residual.max(consistency_residual(k, &p).abs());
    }
    let flux_zero_exact = pao_flux(0.0, &p) == p.eps_u;
    let at_kd = pao_flux(k_d, &p) / p.eps_u;
    let expected = (-1.5 * p.k_ko).exp();
    let kd_err = (at_kd - expected).abs();
    let passed = max_residual < 1e-10 && flux_zero_exact && kd_err <= 1e-12;
    outcome(
        3,
        NAME,
        passed,
        format!(
            "max residual {max_residual:.2e} (< 1e-10), flux(0) exact: {flux_zero_exact}, |flux(k_d)/eps - exp(-1.5 K)| = {kd_err:.2e} (<= 1e-12)"
        ),
    )
}

fn finance_case(alpha: f64, n_shells: usize) -> (FinanceParams, f64, f64) {
    let grid = ShellGrid::new(1.0, 2.0, n_shells).expect("valid grid");
    let params = FinanceParams::new(
        1.0,
        alpha,
        0.0,
        2.0,
        1.0,
        FinanceMode::FluxForm,
        None,
        TreeSpec { levels: 3, branching: 3, pilferage: 0.0 },
        grid,
    );
    // step size limited by the fastest shell rate, horizon by the slowest
    // boundary-damped mode
    let (dt, t_end) = match alpha {
        a if a <= -0.75 => (0.2, 400_000.0),
        a if a <= -0.25 => (0.2, 40_000.0),
        a if a <= 0.5 => (0.1, 8_000.0),
        _ => (5e-4, 4_000.0),
    };
    (params, dt, t_end)
}

/// Steady-state scaling chain for alpha in {-1, -0.5, 0, 1}: constant
/// interior flux, W_k ~ k^(-alpha/2), n(W) ~ W^(-2/(alpha+2)).
pub fn criterion_4_finance_scaling_chain() -> CriterionOutcome {
    const NAME: &str = "finance scaling chain";
    let started = Instant::now();
    let mut details = Vec::new();
    let mut all_ok = true;
    for alpha in [-1.0, -0.5, 0.0, 1.0] {
        let (params, dt, t_end) = finance_case(alpha, 20);
        let report = match integrate_to_steady_state(&params, dt, t_end, 42, 512) {
            Ok(r) => r,
            Err(e) => {
                all_ok = false;
                details.push(format!("alpha={alpha}: {e}"));
                continue;
            }
        };
        if !report.converged {
            all_ok = false;
            details.push(format!(
                "alpha={alpha}: not converged (residual {:.2e})",
                report.residual_norm
            ));
            continue;
        }
        let interior = &report.flux[1..19];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        let max = interior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = interior.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = (max - min) / mean;

        let k = params.grid.wavenumbers();
        let w_fit = loglog_fit(&k, &report.state.w, None);
        let dist = wealth_distribution(&report.state, &params.grid);
        let n_fit = loglog_fit(&dist.wealth, &dist.count, None);
        let (w_slope, n_slope) = match (w_fit, n_fit) {
            (Ok(w), Ok(n)) => (w.slope, n.slope),
            _ => {
                all_ok = false;
                details.push(format!("alpha={alpha}: fit failed"));
                continue;
            }
        };
        let w_target = -alpha / 2.0;
        let n_target = -2.0 / (alpha + 2.0);
        let ok = spread < 0.01
            && (w_slope - w_target).abs() <= 0.05
            && (n_slope - n_target).abs() <= 0.1;
        if !ok {
            all_ok = false;
        }
        details.push(format!(
            "alpha={alpha}: flux spread {:.3}%, W_k slope {w_slope:.4} (target {w_target}), n(W) slope {n_slope:.4} (target {n_target:.3}){}",
            spread * 100.0,
            if ok { "" } else { " <- FAIL" }
        ));
    }
    details.push(format!("{:.1}s total", started.elapsed().as_secs_f64()));
    outcome(4, NAME, all_ok, details.join("; "))
}

/// Algebraic fixed-point identity at alpha = -1: interior products
/// W_n W_{n+1} = Q k_n within 1%.
pub fn criterion_5_fixed_point_identity() -> CriterionOutcome {
    const NAME: &str = "finance fixed-point identity";
    let (params, dt, t_end) = finance_case(-1.0, 20);
    let report = match integrate_to_steady_state(&params, dt, t_end, 7, 512) {
        Ok(r) => r,
        Err(e) => return outcome(5, NAME, false, e.to_string()),
    };
    if !report.converged {
        return outcome(
            5,
            NAME,
            false,
            format!("not converged (residual {:.2e})", report.residual_norm),
        );
    }
    let k = params.grid.wavenumbers();
    let w = &report.state.w;
    let mut worst = 0.0f64;
    for n in 0..19 {
        let deviation = (w[n] * w[n + 1] / (params.q * k[n]) - 1.0).abs();
        worst = worst.max(deviation);
    }
    outcome(
        5,
        NAME,
        worst < 0.01,
        format!("max |W_n W_n+1 / (Q k_n) - 1| = {:.4}% (< 1%)", worst * 100.0),
    )
}

/// Kinetic exchange baseline: CCDF rate -1/<W> within 5% and exact wealth
/// conservation.
pub fn criterion_6_equilibrium_baseline() -> CriterionOutcome {
    const NAME: &str = "equilibrium baseline";
    let started = Instant::now();
    let mean_wealth = 1.0;
    let mut pop = match AgentPopulation::uniform(10_000, mean_wealth, 42) {
        Ok(p) => p,
        Err(e) => return outcome(6, NAME, false, e.to_string()),
    };
    pop.run(10_000_000);
    let drift = ((pop.total() - pop.initial_total()) / pop.initial_total()).abs();
    let fit = match fit_ccdf_rate(pop.wealth()) {
        Ok(f) => f,
        Err(e) => return outcome(6, NAME, false, e.to_string()),
    };
    let rate_err = (fit.slope * mean_wealth + 1.0).abs();
    let passed = rate_err <= 0.05 && drift <= 1e-12;
    outcome(
        6,
        NAME,
        passed,
        format!(
            "ccdf rate {:.4} (target -1 +- 5%), conservation drift {drift:.2e} (<= 1e-12), {:.1}s",
            fit.slope,
            started.elapsed().as_secs_f64()
        ),
    )
}

/// Fiscal tree without pilferage: every level's budget is exactly Q and the
/// count-vs-wealth slope is -1.
pub fn criterion_7_tree_corollary() -> CriterionOutcome {
    const NAME: &str = "tree corollary";
    let q = 1.0;
    let rows = match tree_cascade(3, 3, q, 0.0) {
        Ok(r) => r,
        Err(e) => return outcome(7, NAME, false, e.to_string()),
    };
    let budgets_exact = rows.iter().all(|r| r.level_budget == q);
    let wealth: Vec<f64> = rows.iter().map(|r| r.per_node_wealth).collect();
    let counts: Vec<f64> = rows.iter().map(|r| r.nodes as f64).collect();
    let fit = match loglog_fit(&wealth, &counts, None) {
        Ok(f) => f,
        Err(e) => return outcome(7, NAME, false, e.to_string()),
    };
    let slope_err = (fit.slope + 1.0).abs();
    outcome(
        7,
        NAME,
        budgets_exact && slope_err < 1e-9,
        format!("budgets exactly Q: {budgets_exact}, slope error {slope_err:.2e}"),
    )
}

/// Fitter calibration: exact synthetic laws to 1e-12, and the noisy
/// power-law Monte-Carlo within 0.05 in at least 95% of 1000 trials.
pub fn criterion_8_statfit_calibration() -> CriterionOutcome {
    const NAME: &str = "statfit calibration";
    let x: Vec<f64> = (1..=20).map(|i| 1.5f64.powi(i)).collect();
    let y: Vec<f64> = x.iter().map(|&v| v.powf(-5.0 / 3.0)).collect();
    let exact_power = match loglog_fit(&x, &y, None) {
        Ok(f) => (f.slope + 5.0 / 3.0).abs() <= 1e-12 && (f.r_squared - 1.0).abs() <= 1e-12,
        Err(_) => false,
    };
    let xe: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
    let ye: Vec<f64> = xe.iter().map(|&v| (-2.0 * v).exp()).collect();
    let exact_exp = match semilog_fit(&xe, &ye, None) {
        Ok(f) => (f.slope + 2.0).abs() <= 1e-12,
        Err(_) => false,
    };

    let xs: Vec<f64> = (0..20).map(|i| 10f64.powf(2.0 * i as f64 / 19.0)).collect();
    let trials = 1000;
    let mut hits = 0;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&v| {
                let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.random();
                let gauss = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                3.0 * v.powf(-2.0) * (1.0 + 0.1 * gauss)
            })
            .collect();
        if ys.iter().any(|&v| !(v > 0.0)) {
            continue;
        }
        if let Ok(fit) = loglog_fit(&xs, &ys, None) {
            if (fit.slope + 2.0).abs() <= 0.05 {
                hits += 1;
            }
        }
    }
    let mc_ok = hits >= 950;
    outcome(
        8,
        NAME,
        exact_power && exact_exp && mc_ok,
        format!("exact power: {exact_power}, exact exponential: {exact_exp}, monte-carlo {hits}/{trials} within 0.05 (>= 950)"),
    )
}

fn comparable_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n != "manifest.json")
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

/// Identical config + seed produce byte-identical artifacts (wall-clock
/// manifest aside) across goy, finance, and equilibrium runners.
pub fn criterion_9_reproducibility(out_dir: &Path) -> CriterionOutcome {
    const NAME: &str = "reproducibility";
    let mut configs = Vec::new();

    let mut goy = default_config(ModelKind::Goy);
    goy.grid = ShellGrid::new(1.0, 2.0, 10).expect("valid grid");
    goy.integrator.t_end = 0.5;
    goy.integrator.dt = 1e-3;
    goy.integrator.sample_every = 10;
    if let ModelParams::Goy(p) = &mut goy.params {
        p.grid = goy.grid.clone();
    }
    configs.push(("goy", goy));

    let mut fin = default_config(ModelKind::Finance);
    fin.grid = ShellGrid::new(1.0, 2.0, 8).expect("valid grid");
    fin.integrator.dt = 0.1;
    fin.integrator.t_end = 2_000.0;
    if let ModelParams::Finance(p) = &mut fin.params {
        p.grid = fin.grid.clone();
        p.sink = crate::finance::matched_sink(p.a, p.q, p.alpha, &fin.grid);
    }
    configs.push(("finance", fin));

    let mut eq = default_config(ModelKind::Equilibrium);
    if let ModelParams::Equilibrium(p) = &mut eq.params {
        p.n_agents = 2_000;
        p.n_exchanges = 200_000;
    }
    configs.push(("equilibrium", eq));

    let mut checked = 0usize;
    for (tag, base) in configs {
        let mut first = base.clone();
        first.output.dir = out_dir.join(format!("repro_{tag}_a"));
        let mut second = base.clone();
        second.output.dir = out_dir.join(format!("repro_{tag}_b"));
        if let Err(e) = run_model(&first).and(run_model(&second)) {
            return outcome(9, NAME, false, format!("{tag}: run failed: {e}"));
        }
        let names_a = comparable_files(&first.output.dir);
        let names_b = comparable_files(&second.output.dir);
        if names_a != names_b || names_a.is_empty() {
            return outcome(9, NAME, false, format!("{tag}: file sets differ"));
        }
        for name in &names_a {
            let a = std::fs::read(first.output.dir.join(name)).unwrap_or_default();
            let b = std::fs::read(second.output.dir.join(name)).unwrap_or_default();
            if a != b || a.is_empty() {
                return outcome(9, NAME, false, format!("{tag}: {name} differs between invocations"));
            }
            checked += 1;
        }
    }
    outcome(9, NAME, true, format!("{checked} files byte-identical across repeated runs"))
}

/// Run every criterion, writing run artifacts under `out_dir`.
pub fn run_all(out_dir: &Path) -> Vec<CriterionOutcome> {
    vec![
        criterion_1_goy_inertial_range(out_dir),
        criterion_2_goy_conservation(),
        criterion_3_pao_consistency(),
        criterion_4_finance_scaling_chain(),
        criterion_5_fixed_point_identity(),
        criterion_6_equilibrium_baseline(),
        criterion_7_tree_corollary(),
        criterion_8_statfit_calibration(),
        criterion_9_reproducibility(out_dir),
    ]
}
