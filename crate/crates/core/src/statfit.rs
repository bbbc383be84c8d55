//! Histogram construction and exponent extraction.
//!
//! Every scaling claim in this crate is measured here: power-law slopes by
//! ordinary least squares on (ln x, ln y), exponential rates on (x, ln y),
//! and the inertial-range window by the flux-plateau rule.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::SpectrumSeries;

/// Default relative tolerance for the flux-plateau window. With the default
/// 22-shell grid a 0.1 gate admits the first dissipative shell, whose
/// spectrum has already rolled off; 0.05 selects the stable plateau.
pub const DEFAULT_PLATEAU_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinScheme {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub scheme: BinScheme,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin centers: arithmetic for linear bins, geometric for log bins.
    pub fn centers(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| match self.scheme {
                BinScheme::Linear => 0.5 * (w[0] + w[1]),
                BinScheme::Log => (w[0] * w[1]).sqrt(),
            })
            .collect()
    }
}

/// Slope/intercept/uncertainty of a transformed least-squares fit; carries
/// every exponent this crate extracts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub range_used: (f64, f64),
    pub n_points: usize,
}

fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let n_bins = edges.len() - 1;
    if x < edges[0] || x > edges[n_bins] {
        return None;
    }
    // half-open bins, last bin closed
    if x == edges[n_bins] {
        return Some(n_bins - 1);
    }
    let mut lo = 0usize;
    let mut hi = n_bins;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if x >= edges[mid] {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Histogram with geometric bin edges spanning [min, max] of the samples.
pub fn log_binned_histogram(samples: &[f64], n_bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::Histogram("empty input".into()));
    }
    if n_bins < 2 {
        return Err(Error::Histogram("n_bins must be at least 2".into()));
    }
    if samples.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Histogram("log binning requires strictly positive samples".into()));
    }
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(Error::Histogram("degenerate range: all samples equal".into()));
    }
    // bin in log space so samples sitting exactly on a geometric edge land in
    // the upper (half-open) bin, untouched by exp/ln round-trip error
    let log_min = min.ln();
    let log_max = max.ln();
    let step = (log_max - log_min) / n_bins as f64;
    let mut log_edges: Vec<f64> = (0..=n_bins).map(|i| log_min + step * i as f64).collect();
    log_edges[0] = log_min;
    log_edges[n_bins] = log_max;
    let mut counts = vec![0u64; n_bins];
    for &s in samples {
        let idx = bin_index(&log_edges, s.ln()).expect("sample inside [min, max]");
        counts[idx] += 1;
    }
    let mut edges: Vec<f64> = log_edges.iter().map(|&e| e.exp()).collect();
    edges[0] = min;
    edges[n_bins] = max;
    Ok(Histogram { edges, counts, scheme: BinScheme::Log })
}

/// Histogram with uniform bin edges spanning [lo, hi].
pub fn linear_histogram(samples: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::Histogram("empty input".into()));
    }
    if n_bins < 2 {
        return Err(Error::Histogram("n_bins must be at least 2".into()));
    }
    if !(hi > lo) {
        return Err(Error::Histogram("degenerate range".into()));
    }
    let step = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + step * i as f64).collect();
    let mut counts = vec![0u64; n_bins];
    for &s in samples {
        if let Some(idx) = bin_index(&edges, s) {
            counts[idx] += 1;
        }
    }
    Ok(Histogram { edges, counts, scheme: BinScheme::Linear })
}

/// Ordinary least squares on already-transformed coordinates.
fn ols(xs: &[f64], ys: &[f64], range_used: (f64, f64)) -> Result<FitResult> {
    let n = xs.len();
    if n < 3 {
        return Err(Error::FitFailed(format!("{n} points in range; at least 3 required")));
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mean_x;
        let dy = ys[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::FitFailed("zero abscissa variance in fitted range".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = (0..n).map(|i| {
        let r = ys[i] - (intercept + slope * xs[i]);
        r * r
    }).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        // constant ordinate: the flat line is an exact fit
        1.0
    };
    let slope_stderr = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(FitResult { slope, intercept, slope_stderr, r_squared, range_used, n_points: n })
}

fn select_range(x: &[f64], y: &[f64], range: Option<(f64, f64)>) -> (Vec<f64>, Vec<f64>, (f64, f64)) {
    match range {
        None => {
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (x.to_vec(), y.to_vec(), (lo, hi))
        }
        Some((lo, hi)) => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (&xi, &yi) in x.iter().zip(y) {
                if xi >= lo && xi <= hi {
                    xs.push(xi);
                    ys.push(yi);
                }
            }
            (xs, ys, (lo, hi))
        }
    }
}

/// Least squares on (ln x, ln y); the slope is the power-law exponent.
pub fn loglog_fit(x: &[f64], y: &[f64], range: Option<(f64, f64)>) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} abscissae vs {} ordinates", x.len(), y.len())));
    }
    let (xs, ys, used) = select_range(x, y, range);
    if xs.iter().any(|&v| !(v > 0.0)) || ys.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::FitFailed("log-log fit requires positive data in range".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    ols(&lx, &ly, used)
}

/// Least squares on (x, ln y); the slope is the exponential rate.
pub fn semilog_fit(x: &[f64], y: &[f64], range: Option<(f64, f64)>) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} abscissae vs {} ordinates", x.len(), y.len())));
    }
    let (xs, ys, used) = select_range(x, y, range);
    if ys.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::FitFailed("semi-log fit requires positive ordinates in range".into()));
    }
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    ols(&xs, &ly, used)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Maximal contiguous shell-index window where the flux stays within `tol`
/// of the reference flux, skipping the `exclude` indices (forced shells).
///
/// The reference is the median over the shells carrying at least half the
/// peak flux; a median over all shells would sit in the dissipation range
/// whenever the resolved ladder extends well past the cutoff.
///
/// Returns the inclusive (lo, hi) bounds. Fails with `NoWindow` when fewer
/// than 4 shells qualify; the caller must widen the tolerance explicitly.
pub fn inertial_range_select(
    flux: &SpectrumSeries,
    exclude: &[usize],
    tol: f64,
) -> Result<(usize, usize)> {
    let n = flux.len();
    let candidate = |i: usize| !exclude.contains(&i);
    let peak = (0..n)
        .filter(|&i| candidate(i))
        .map(|i| flux.value[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::NoWindow("no positive candidate flux".into()));
    }
    let mut values: Vec<f64> = (0..n)
        .filter(|&i| candidate(i) && flux.value[i] > 0.5 * peak)
        .map(|i| flux.value[i])
        .collect();
    if values.is_empty() {
        return Err(Error::NoWindow("no candidate shells".into()));
    }
    let pi_ref = median(&mut values);
    if pi_ref == 0.0 {
        return Err(Error::NoWindow("median flux is zero".into()));
    }
    let qualifies = |i: usize| candidate(i) && (flux.value[i] / pi_ref - 1.0).abs() < tol;

    let mut best: Option<(usize, usize)> = None;
    let mut start: Option<usize> = None;
    for i in 0..=n {
        if i < n && qualifies(i) {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            let len = i - s;
            if best.map_or(true, |(bl, bh)| len > bh - bl + 1) {
                best = Some((s, i - 1));
            }
        }
    }
    match best {
        Some((lo, hi)) if hi - lo + 1 >= 4 => Ok((lo, hi)),
        Some((lo, hi)) => Err(Error::NoWindow(format!(
            "largest window [{lo}, {hi}] has {} shells, need 4",
            hi - lo + 1
        ))),
        None => Err(Error::NoWindow("no shell within tolerance of the median flux".into())),
    }
}
