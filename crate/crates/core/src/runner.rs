//! Glue between validated configs and on-disk artifacts: runs a model, writes
//! its CSVs, fits, plot script, and manifest into the output directory.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::json;

use crate::config::{to_toml_string, ModelKind, ModelParams, SimConfig};
use crate::equilibrium::run_exchange;
use crate::error::{Error, Result};
use crate::finance::{
    predicted_exponent, run_to_steady_state, tree_cascade, wealth_distribution,
};
use crate::goy::run_goy;
use crate::manifest::RunManifest;
use crate::output;
use crate::pao::{dissipation_wavenumber, fit_pao_to_run, pao_curves, pao_flux};
use crate::statfit::{inertial_range_select, loglog_fit, semilog_fit, FitResult, DEFAULT_PLATEAU_TOL};

/// What a completed run reports back to the caller.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub fits: BTreeMap<String, FitResult>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

/// Run the configured model and write all artifacts. Returns the summary.
pub fn run_model(cfg: &SimConfig) -> Result<RunSummary> {
    match cfg.model {
        ModelKind::Goy => run_goy_artifacts(cfg),
        ModelKind::Finance => run_finance_artifacts(cfg),
        ModelKind::Equilibrium => run_equilibrium_artifacts(cfg),
        ModelKind::Pao => run_pao_artifacts(cfg),
    }
}

fn finalize(
    cfg: &SimConfig,
    mut manifest: RunManifest,
    files: Vec<PathBuf>,
    fits: BTreeMap<String, FitResult>,
    diagnostics: BTreeMap<String, serde_json::Value>,
    plot_model: &str,
) -> Result<RunSummary> {
    let dir = &cfg.output.dir;
    let mut all_files = files;
    all_files.push(output::write_fits_json(dir, &fits)?);
    if cfg.output.emit_plots {
        all_files.push(output::emit_plot_script(dir, plot_model, &fits)?);
    }
    for f in &all_files {
        manifest.add_file(f);
    }
    for (k, v) in &diagnostics {
        manifest.diagnostics.insert(k.clone(), v.clone());
    }
    manifest.finish(dir)?;
    Ok(RunSummary {
        out_dir: dir.clone(),
        files: all_files
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        fits,
        diagnostics,
    })
}

pub fn run_goy_artifacts(cfg: &SimConfig) -> Result<RunSummary> {
    let manifest = RunManifest::start(cfg.model.as_str(), cfg.seed, to_toml_string(cfg));
    let out = run_goy(cfg)?;
    let files = output::write_goy_csvs(&cfg.output.dir, &out)?;

    let mut fits = BTreeMap::new();
    let mut diag = BTreeMap::new();
    diag.insert("n_steps".into(), json!(out.n_steps));
    diag.insert("n_samples".into(), json!(out.n_samples));
    diag.insert("injection_rate".into(), json!(out.injection_rate));
    diag.insert("dissipation_rate".into(), json!(out.dissipation_rate));

    match inertial_range_select(&out.flux, &out.forced_shells, DEFAULT_PLATEAU_TOL) {
        Ok((lo, hi)) => {
            diag.insert("flux_window".into(), json!([lo, hi]));
            let window = &out.flux.value[lo..=hi];
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            let max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
            diag.insert("flux_spread".into(), json!((max - min) / mean));
            let fit = loglog_fit(
                &out.spectrum.k,
                &out.spectrum.value,
                Some((out.spectrum.k[lo], out.spectrum.k[hi])),
            )?;
            fits.insert("goy.spectrum.slope".into(), fit);
        }
        Err(e) => {
            diag.insert("flux_window".into(), json!(null));
            diag.insert("flux_window_note".into(), json!(e.to_string()));
        }
    }

    if out.injection_rate > 0.0 {
        match fit_pao_to_run(
            &out.spectrum,
            &out.flux,
            out.injection_rate,
            goy_nu(cfg)?,
            &out.forced_shells,
        ) {
            Ok((k_ko, rms)) => {
                diag.insert("pao_k_ko_estimate".into(), json!(k_ko));
                diag.insert("pao_fit_rms".into(), json!(rms));
            }
            Err(e) => {
                diag.insert("pao_fit_note".into(), json!(e.to_string()));
            }
        }
    }

    finalize(cfg, manifest, files, fits, diag, "goy")
}

fn goy_nu(cfg: &SimConfig) -> Result<f64> {
    match &cfg.params {
        ModelParams::Goy(p) => Ok(p.nu),
        _ => Err(Error::Validation("params/model mismatch".into())),
    }
}

pub fn run_finance_artifacts(cfg: &SimConfig) -> Result<RunSummary> {
    let manifest = RunManifest::start(cfg.model.as_str(), cfg.seed, to_toml_string(cfg));
    let p = match &cfg.params {
        ModelParams::Finance(p) => p.clone(),
        _ => return Err(Error::Validation("params/model mismatch".into())),
    };
    let report = run_to_steady_state(cfg)?;
    let dist = wealth_distribution(&report.state, &p.grid);
    let files = output::write_finance_csvs(&cfg.output.dir, &report, &p.grid, &dist)?;

    let mut fits = BTreeMap::new();
    let mut diag = BTreeMap::new();
    diag.insert("converged".into(), json!(report.converged));
    diag.insert("residual_norm".into(), json!(report.residual_norm));
    diag.insert("steps".into(), json!(report.steps));
    diag.insert("clamped_steps".into(), json!(report.clamped_steps));
    diag.insert("sink".into(), json!(p.sink));

    // interior pair-flux constancy (boundaries strictly inside the ladder)
    let interior = &report.flux[1..p.grid.n_shells() - 1];
    if !interior.is_empty() {
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        if mean != 0.0 {
            let max = interior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = interior.iter().cloned().fold(f64::INFINITY, f64::min);
            diag.insert("interior_flux_spread".into(), json!((max - min) / mean));
        }
    }

    let k = p.grid.wavenumbers();
    if let Ok(fit) = loglog_fit(&k, &report.state.w, None) {
        fits.insert("finance.Wk.slope".into(), fit);
    }
    if let Ok(fit) = loglog_fit(&dist.wealth, &dist.count, None) {
        fits.insert("finance.nW.slope".into(), fit);
    }
    if let Ok((n_w, pi_exp)) = predicted_exponent(p.alpha) {
        diag.insert("predicted_nW_exponent".into(), json!(n_w));
        diag.insert("predicted_flux_exponent".into(), json!(pi_exp));
    }

    finalize(cfg, manifest, files, fits, diag, "finance")
}

pub fn run_equilibrium_artifacts(cfg: &SimConfig) -> Result<RunSummary> {
    let manifest = RunManifest::start(cfg.model.as_str(), cfg.seed, to_toml_string(cfg));
    let out = run_exchange(cfg)?;
    let files = vec![output::write_equilibrium_csv(&cfg.output.dir, &out)?];

    let mut fits = BTreeMap::new();
    let mut diag = BTreeMap::new();
    diag.insert("conservation_drift".into(), json!(out.conservation_drift));
    diag.insert("n_exchanges".into(), json!(out.n_exchanges));
    diag.insert("expected_rate".into(), json!(-1.0 / out.mean_wealth));
    fits.insert("equilibrium.ccdf.rate".into(), out.ccdf_fit.clone());

    finalize(cfg, manifest, files, fits, diag, "equilibrium")
}

pub fn run_pao_artifacts(cfg: &SimConfig) -> Result<RunSummary> {
    let manifest = RunManifest::start(cfg.model.as_str(), cfg.seed, to_toml_string(cfg));
    let p = match &cfg.params {
        ModelParams::Pao(p) => p.clone(),
        _ => return Err(Error::Validation("params/model mismatch".into())),
    };
    let k_d = dissipation_wavenumber(p.eps_u, p.nu)?;
    let curves = pao_curves(&p, 1e-3 * k_d, 5.0 * k_d, 200)?;
    let files = vec![output::write_pao_csv(&cfg.output.dir, &curves)?];

    let mut fits = BTreeMap::new();
    let mut diag = BTreeMap::new();
    diag.insert("k_d".into(), json!(k_d));
    let max_residual = curves.residual.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    diag.insert("max_consistency_residual".into(), json!(max_residual));

    // exponential roll-off rate measured against x = k^(4/3); the slope must
    // be -(3/2) K_Ko k_d^(-4/3)
    let xs: Vec<f64> = (0..40)
        .map(|i| (k_d * (1.0 + 2.0 * i as f64 / 39.0)).powf(4.0 / 3.0))
        .collect();
    let ys: Vec<f64> = (0..40)
        .map(|i| pao_flux(k_d * (1.0 + 2.0 * i as f64 / 39.0), &p))
        .collect();
    if let Ok(fit) = semilog_fit(&xs, &ys, None) {
        diag.insert(
            "flux_rate_expected".into(),
            json!(-1.5 * p.k_ko * k_d.powf(-4.0 / 3.0)),
        );
        fits.insert("pao.flux.rate".into(), fit);
    }

    finalize(cfg, manifest, files, fits, diag, "pao")
}

/// The fiscal-tree corollary as its own artifact set.
pub fn run_tree_artifacts(cfg: &SimConfig) -> Result<RunSummary> {
    let manifest = RunManifest::start("tree", cfg.seed, to_toml_string(cfg));
    let p = match &cfg.params {
        ModelParams::Finance(p) => p.clone(),
        _ => {
            return Err(Error::Validation(
                "params/model mismatch: the tree corollary reads its parameters from [finance]".into(),
            ))
        }
    };
    let rows = tree_cascade(p.tree.levels, p.tree.branching, p.q, p.tree.pilferage)?;
    let files = vec![output::write_tree_csv(&cfg.output.dir, &rows)?];

    let mut fits = BTreeMap::new();
    let mut diag = BTreeMap::new();
    diag.insert("levels".into(), json!(p.tree.levels));
    diag.insert("branching".into(), json!(p.tree.branching));
    diag.insert("pilferage".into(), json!(p.tree.pilferage));
    let wealth: Vec<f64> = rows.iter().map(|r| r.per_node_wealth).collect();
    let counts: Vec<f64> = rows.iter().map(|r| r.nodes as f64).collect();
    if let Ok(fit) = loglog_fit(&wealth, &counts, None) {
        fits.insert("tree.count_vs_wealth.slope".into(), fit);
    }

    finalize(cfg, manifest, files, fits, diag, "tree")
}
