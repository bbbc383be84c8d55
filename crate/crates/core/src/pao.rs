//! Closed-form Kolmogorov and Pao spectra and fluxes, plus the internal
//! consistency check that pins the dissipation wavenumber.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SpectrumSeries;

/// Parameters of the closed-form spectrum/flux. The dissipation wavenumber is
/// always derived from (eps_u, nu), never stored, so flux and spectrum stay
/// mutually consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaoParams {
    pub k_ko: f64,
    pub eps_u: f64,
    pub nu: f64,
}

impl PaoParams {
    pub fn new(k_ko: f64, eps_u: f64, nu: f64) -> Result<Self> {
        if !(k_ko > 0.0) {
            return Err(Error::Domain("Kolmogorov constant must be positive".into()));
        }
        if !(eps_u > 0.0) {
            return Err(Error::Domain("dissipation rate must be positive".into()));
        }
        if !(nu > 0.0) {
            return Err(Error::Domain("viscosity must be positive".into()));
        }
        Ok(Self { k_ko, eps_u, nu })
    }

    /// Dissipation wavenumber (eps/nu^3)^(1/4), the single source of truth.
    pub fn k_d(&self) -> f64 {
        dissipation_wavenumber(self.eps_u, self.nu).expect("validated at construction")
    }
}

pub fn dissipation_wavenumber(eps_u: f64, nu: f64) -> Result<f64> {
    if !(eps_u > 0.0) || !(nu > 0.0) {
        return Err(Error::Domain("dissipation wavenumber needs eps_u > 0 and nu > 0".into()));
    }
    Ok((eps_u / (nu * nu * nu)).powf(0.25))
}

/// Inertial-range spectral density K_Ko * eps^(2/3) * k^(-5/3).
pub fn kolmogorov_spectrum(k: f64, p: &PaoParams) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    Ok(p.k_ko * p.eps_u.powf(2.0 / 3.0) * k.powf(-5.0 / 3.0))
}

fn roll_off(k: f64, p: &PaoParams) -> f64 {
    (-1.5 * p.k_ko * (k / p.k_d()).powf(4.0 / 3.0)).exp()
}

/// Flux eps * exp(-(3/2) K_Ko (k/k_d)^(4/3)); equals eps exactly at k = 0 and
/// decreases strictly with k.
pub fn pao_flux(k: f64, p: &PaoParams) -> f64 {
    debug_assert!(k >= 0.0, "flux defined for k >= 0");
    if k == 0.0 {
        return p.eps_u;
    }
    p.eps_u * roll_off(k, p)
}

/// Spectrum of the dissipation-range closure: the inertial form times the
/// same exponential roll-off as the flux.
pub fn pao_spectrum(k: f64, p: &PaoParams) -> Result<f64> {
    Ok(kolmogorov_spectrum(k, p)? * roll_off(k, p))
}

/// Relative residual of d(flux)/dk + 2 nu k^2 E(k), with the derivative taken
/// analytically. Zero (to rounding) exactly when k_d = (eps/nu^3)^(1/4).
pub fn consistency_residual(k: f64, p: &PaoParams) -> f64 {
    consistency_residual_at(k, p.k_ko, p.eps_u, p.nu, p.k_d())
}

/// Residual with an explicit, possibly inconsistent k_d:
///   dPi/dk     = -2 K_Ko eps k^(1/3) k_d^(-4/3) * X
///   2 nu k^2 E =  2 K_Ko nu eps^(2/3) k^(1/3)  * X
/// where X is the shared exponential roll-off, evaluated once.
pub(crate) fn consistency_residual_at(k: f64, k_ko: f64, eps_u: f64, nu: f64, k_d: f64) -> f64 {
    debug_assert!(k > 0.0);
    let x = (-1.5 * k_ko * (k / k_d).powf(4.0 / 3.0)).exp();
    let k_cbrt = k.powf(1.0 / 3.0);
    let dpi_dk = -2.0 * k_ko * eps_u * k_cbrt * k_d.powf(-4.0 / 3.0) * x;
    let dissipation = 2.0 * nu * k_ko * eps_u.powf(2.0 / 3.0) * k_cbrt * x;
    (dpi_dk + dissipation) / dissipation
}

/// One-parameter fit of the Kolmogorov constant to a measured spectrum, given
/// the injection rate and viscosity of the run.
///
/// Minimizes the log-space mismatch of the compensated spectrum
/// E(k) eps^(-2/3) k^(5/3) exp(+(3/2) K (k/k_d)^(4/3)) against the constant K
/// over the resolved shells; returns the estimate and the RMS log residual.
pub fn fit_pao_to_run(
    e_avg: &SpectrumSeries,
    pi_avg: &SpectrumSeries,
    eps_u: f64,
    nu: f64,
    exclude: &[usize],
) -> Result<(f64, f64)> {
    let k_d = dissipation_wavenumber(eps_u, nu)?;
    let mut ks = Vec::new();
    let mut es = Vec::new();
    for i in 0..e_avg.len() {
        let resolved = e_avg.value[i] > 0.0
            && pi_avg.value.get(i).map_or(true, |&p| p > 0.0)
            && e_avg.k[i] <= 2.0 * k_d
            && !exclude.contains(&i);
        if resolved {
            ks.push(e_avg.k[i]);
            es.push(e_avg.value[i]);
        }
    }
    if ks.len() < 4 {
        return Err(Error::FitFailed(format!("{} usable shells, need 4", ks.len())));
    }

    // ln C_i(K) = ln E_i - (2/3) ln eps + (5/3) ln k_i + 1.5 K x_i, x = (k/k_d)^(4/3)
    let base: Vec<f64> = ks
        .iter()
        .zip(&es)
        .map(|(&k, &e)| e.ln() - (2.0 / 3.0) * eps_u.ln() + (5.0 / 3.0) * k.ln())
        .collect();
    let x: Vec<f64> = ks.iter().map(|&k| (k / k_d).powf(4.0 / 3.0)).collect();
    let objective = |kk: f64| -> f64 {
        base.iter()
            .zip(&x)
            .map(|(&b, &xi)| {
                let r = b + 1.5 * kk * xi - kk.ln();
                r * r
            })
            .sum()
    };

    // coarse log-spaced scan, then golden-section refinement
    let (lo, hi) = (0.05f64, 50.0f64);
    let scan = 400;
    let mut best_k = lo;
    let mut best_v = f64::INFINITY;
    for i in 0..=scan {
        let kk = lo * (hi / lo).powf(i as f64 / scan as f64);
        let v = objective(kk);
        if v < best_v {
            best_v = v;
            best_k = kk;
        }
    }
    let mut a = best_k / (hi / lo).powf(1.0 / scan as f64);
    let mut b = best_k * (hi / lo).powf(1.0 / scan as f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    let estimate = 0.5 * (a + b);
    let rms = (objective(estimate) / ks.len() as f64).sqrt();
    Ok((estimate, rms))
}

/// Dense log-spaced curve table for plotting: k, Kolmogorov and Pao spectra,
/// Pao flux, and the consistency residual.
pub struct PaoCurves {
    pub k: Vec<f64>,
    pub e_kolmogorov: Vec<f64>,
    pub e_pao: Vec<f64>,
    pub pi_pao: Vec<f64>,
    pub residual: Vec<f64>,
}

pub fn pao_curves(p: &PaoParams, k_lo: f64, k_hi: f64, n: usize) -> Result<PaoCurves> {
    if !(k_lo > 0.0) || !(k_hi > k_lo) || n < 2 {
        return Err(Error::Domain("need 0 < k_lo < k_hi and n >= 2".into()));
    }
    let mut out = PaoCurves {
        k: Vec::with_capacity(n),
        e_kolmogorov: Vec::with_capacity(n),
        e_pao: Vec::with_capacity(n),
        pi_pao: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
    };
    for i in 0..n {
        let k = k_lo * (k_hi / k_lo).powf(i as f64 / (n - 1) as f64);
        out.k.push(k);
        out.e_kolmogorov.push(kolmogorov_spectrum(k, p)?);
        out.e_pao.push(pao_spectrum(k, p)?);
        out.pi_pao.push(pao_flux(k, p));
        out.residual.push(consistency_residual(k, p));
    }
    Ok(out)
}
