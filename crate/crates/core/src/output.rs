//! CSV/JSON artifact writers and gnuplot script emission.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a given
//! config + seed produces byte-identical files on every invocation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::equilibrium::ExchangeRunOutput;
use crate::error::{Error, Result};
use crate::finance::{SteadyStateReport, TreeLevel, WealthDistribution};
use crate::goy::GoyRunOutput;
use crate::grid::ShellGrid;
use crate::pao::PaoCurves;
use crate::statfit::FitResult;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn write_goy_csvs(dir: &Path, out: &GoyRunOutput) -> Result<Vec<PathBuf>> {
    let mut spectrum = String::from("n,k,E_avg,Pi_avg,n_samples\n");
    for i in 0..out.spectrum.len() {
        writeln!(
            spectrum,
            "{},{},{},{},{}",
            i, out.spectrum.k[i], out.spectrum.value[i], out.flux.value[i], out.n_samples
        )
        .unwrap();
    }
    let mut energy = String::from("t,E_total\n");
    for (t, e) in &out.energy_series {
        writeln!(energy, "{t},{e}").unwrap();
    }
    Ok(vec![
        write_file(dir, "goy_spectrum.csv", &spectrum)?,
        write_file(dir, "goy_energy.csv", &energy)?,
    ])
}

pub fn write_pao_csv(dir: &Path, curves: &PaoCurves) -> Result<PathBuf> {
    let mut text = String::from("k,E_kolmogorov,E_pao,Pi_pao,residual\n");
    for i in 0..curves.k.len() {
        writeln!(
            text,
            "{},{},{},{},{}",
            curves.k[i], curves.e_kolmogorov[i], curves.e_pao[i], curves.pi_pao[i], curves.residual[i]
        )
        .unwrap();
    }
    write_file(dir, "pao_curves.csv", &text)
}

pub fn write_finance_csvs(
    dir: &Path,
    report: &SteadyStateReport,
    grid: &ShellGrid,
    dist: &WealthDistribution,
) -> Result<Vec<PathBuf>> {
    let k = grid.wavenumbers();
    let mut steady = String::from("n,k,W_shell,W_entity,n_k,flux_left,flux_right\n");
    for i in 0..k.len() {
        let n_k = std::f64::consts::TAU * k[i];
        writeln!(
            steady,
            "{},{},{},{},{},{},{}",
            i,
            k[i],
            report.state.w[i],
            report.state.w[i] / n_k,
            n_k,
            report.flux[i],
            report.flux[i + 1]
        )
        .unwrap();
    }
    let mut distribution = String::from("W,n_of_W\n");
    for (w, n) in dist.wealth.iter().zip(&dist.count) {
        writeln!(distribution, "{w},{n}").unwrap();
    }
    Ok(vec![
        write_file(dir, "finance_steady.csv", &steady)?,
        write_file(dir, "finance_distribution.csv", &distribution)?,
    ])
}

pub fn write_tree_csv(dir: &Path, rows: &[TreeLevel]) -> Result<PathBuf> {
    let mut text = String::from("level,nodes,level_budget,per_node_wealth\n");
    for r in rows {
        writeln!(text, "{},{},{},{}", r.level, r.nodes, r.level_budget, r.per_node_wealth).unwrap();
    }
    write_file(dir, "tree_cascade.csv", &text)
}

pub fn write_equilibrium_csv(dir: &Path, out: &ExchangeRunOutput) -> Result<PathBuf> {
    let mut text = String::from("bin_left,bin_right,count,pdf_estimate,gibbs_reference\n");
    for i in 0..out.histogram.n_bins() {
        writeln!(
            text,
            "{},{},{},{},{}",
            out.histogram.edges[i],
            out.histogram.edges[i + 1],
            out.histogram.counts[i],
            out.pdf_estimate[i],
            out.gibbs_reference[i]
        )
        .unwrap();
    }
    write_file(dir, "equilibrium_hist.csv", &text)
}

/// Every fit a run produced, keyed by quantity name
/// (e.g. "goy.spectrum.slope", "finance.nW.slope").
pub fn write_fits_json(dir: &Path, fits: &BTreeMap<String, FitResult>) -> Result<PathBuf> {
    let json = serde_json::to_string_pretty(fits).expect("fits serialize");
    write_file(dir, "fits.json", &(json + "\n"))
}

fn require_csv(dir: &Path, name: &str) -> Result<()> {
    if dir.join(name).exists() {
        Ok(())
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing CSV {name} in {}", dir.display()),
        )))
    }
}

fn power_guide(fit: &FitResult) -> String {
    format!("exp({}) * x**({})", fit.intercept, fit.slope)
}

/// Emit a self-contained gnuplot script rendering (a) flux against scale and
/// (b) the spectrum or distribution on log axes, with fitted slopes drawn as
/// guides. References only files the run wrote.
pub fn emit_plot_script(
    dir: &Path,
    model: &str,
    fits: &BTreeMap<String, FitResult>,
) -> Result<PathBuf> {
    let mut s = String::new();
    writeln!(s, "# gnuplot script; run as: gnuplot {}", plot_name(model)).unwrap();
    writeln!(s, "set datafile separator \",\"").unwrap();
    writeln!(s, "set terminal pngcairo size 1200,480").unwrap();
    writeln!(s, "set output '{model}.png'").unwrap();
    match model {
        "goy" => {
            require_csv(dir, "goy_spectrum.csv")?;
            writeln!(s, "set multiplot layout 1,2").unwrap();
            writeln!(s, "set logscale x").unwrap();
            writeln!(s, "set xlabel 'k'").unwrap();
            writeln!(s, "set ylabel 'energy flux'").unwrap();
            writeln!(s, "plot 'goy_spectrum.csv' using 2:4 skip 1 with linespoints title 'flux'").unwrap();
            writeln!(s, "set logscale xy").unwrap();
            writeln!(s, "set ylabel 'E(k)'").unwrap();
            if let Some(fit) = fits.get("goy.spectrum.slope") {
                writeln!(
                    s,
                    "plot 'goy_spectrum.csv' using 2:3 skip 1 with linespoints title 'spectrum', \\"
                )
                .unwrap();
                writeln!(s, "     {} title 'slope {:.3}'", power_guide(fit), fit.slope).unwrap();
            } else {
                writeln!(s, "plot 'goy_spectrum.csv' using 2:3 skip 1 with linespoints title 'spectrum'").unwrap();
            }
            writeln!(s, "unset multiplot").unwrap();
        }
        "finance" => {
            require_csv(dir, "finance_steady.csv")?;
            require_csv(dir, "finance_distribution.csv")?;
            writeln!(s, "set multiplot layout 1,2").unwrap();
            writeln!(s, "set logscale x").unwrap();
            writeln!(s, "set xlabel 'k'").unwrap();
            writeln!(s, "set ylabel 'money flux'").unwrap();
            writeln!(s, "plot 'finance_steady.csv' using 2:7 skip 1 with linespoints title 'flux'").unwrap();
            writeln!(s, "set logscale xy").unwrap();
            writeln!(s, "set xlabel 'W'").unwrap();
            writeln!(s, "set ylabel 'n(W)'").unwrap();
            if let Some(fit) = fits.get("finance.nW.slope") {
                writeln!(
                    s,
                    "plot 'finance_distribution.csv' using 1:2 skip 1 with points title 'n(W)', \\"
                )
                .unwrap();
                writeln!(s, "     {} title 'slope {:.3}'", power_guide(fit), fit.slope).unwrap();
            } else {
                writeln!(s, "plot 'finance_distribution.csv' using 1:2 skip 1 with points title 'n(W)'").unwrap();
            }
            writeln!(s, "unset multiplot").unwrap();
        }
        "pao" => {
            require_csv(dir, "pao_curves.csv")?;
            writeln!(s, "set multiplot layout 1,2").unwrap();
            writeln!(s, "set logscale x").unwrap();
            writeln!(s, "set xlabel 'k'").unwrap();
            writeln!(s, "set ylabel 'flux'").unwrap();
            writeln!(s, "plot 'pao_curves.csv' using 1:4 skip 1 with lines title 'flux'").unwrap();
            writeln!(s, "set logscale xy").unwrap();
            writeln!(s, "set ylabel 'E(k)'").unwrap();
            writeln!(s, "plot 'pao_curves.csv' using 1:2 skip 1 with lines title 'inertial form', \\").unwrap();
            writeln!(s, "     'pao_curves.csv' using 1:3 skip 1 with lines title 'with roll-off'").unwrap();
            writeln!(s, "unset multiplot").unwrap();
        }
        "equilibrium" => {
            require_csv(dir, "equilibrium_hist.csv")?;
            writeln!(s, "set logscale y").unwrap();
            writeln!(s, "set xlabel 'W'").unwrap();
            writeln!(s, "set ylabel 'P(W)'").unwrap();
            writeln!(s, "plot 'equilibrium_hist.csv' using 1:4 skip 1 with steps title 'measured', \\").unwrap();
            writeln!(s, "     'equilibrium_hist.csv' using 1:5 skip 1 with lines title 'exponential reference'").unwrap();
        }
        "tree" => {
            require_csv(dir, "tree_cascade.csv")?;
            writeln!(s, "set logscale xy").unwrap();
            writeln!(s, "set xlabel 'per node wealth'").unwrap();
            writeln!(s, "set ylabel 'nodes'").unwrap();
            writeln!(s, "plot 'tree_cascade.csv' using 4:2 skip 1 with linespoints title 'levels'").unwrap();
        }
        other => {
            return Err(Error::Validation(format!("no plot layout for model '{other}'")));
        }
    }
    write_file(dir, &plot_name(model), &s)
}

fn plot_name(model: &str) -> String {
    format!("plot_{model}.gp")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_script_requires_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let fits = BTreeMap::new();
        assert!(emit_plot_script(dir.path(), "goy", &fits).is_err());
        std::fs::write(dir.path().join("goy_spectrum.csv"), "n,k,E_avg,Pi_avg,n_samples\n").unwrap();
        let path = emit_plot_script(dir.path(), "goy", &fits).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("goy_spectrum.csv"));
    }
}
