//! Kinetic wealth-exchange baseline: conservative pairwise pool-and-split
//! dynamics whose stationary distribution is the exponential (Gibbs) law.
//! This is the detailed-balance counterpart to the cascade models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ModelParams, SimConfig};
use crate::error::{Error, Result};
use crate::statfit::{linear_histogram, semilog_fit, FitResult, Histogram};

/// A closed population of agents with nonnegative wealth and its own RNG.
#[derive(Debug, Clone)]
pub struct AgentPopulation {
    wealth: Vec<f64>,
    initial_total: f64,
    rng: ChaCha8Rng,
    exchanges: u64,
}

/// Neumaier-compensated sum; keeps the cached total honest at any size.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl AgentPopulation {
    /// Everyone starts at the mean wealth.
    pub fn uniform(n_agents: usize, mean_wealth: f64, seed: u64) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::Domain("population needs at least 2 agents".into()));
        }
        if !(mean_wealth > 0.0) {
            return Err(Error::Domain("mean wealth must be positive".into()));
        }
        let wealth = vec![mean_wealth; n_agents];
        let initial_total = compensated_sum(&wealth);
        Ok(Self { wealth, initial_total, rng: ChaCha8Rng::seed_from_u64(seed), exchanges: 0 })
    }

    pub fn n_agents(&self) -> usize {
        self.wealth.len()
    }

    pub fn wealth(&self) -> &[f64] {
        &self.wealth
    }

    pub fn exchanges(&self) -> u64 {
        self.exchanges
    }

    pub fn initial_total(&self) -> f64 {
        self.initial_total
    }

    /// Recomputed (compensated) total, the periodic recheck of the cached sum.
    pub fn total(&self) -> f64 {
        compensated_sum(&self.wealth)
    }

    /// One exchange: pick two distinct agents uniformly, pool their wealth,
    /// split it at a uniform random fraction. The pair sum is preserved.
    pub fn exchange_step(&mut self) {
        let n = self.wealth.len();
        let i = self.rng.random_range(0..n);
        let mut j = self.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let eps: f64 = self.rng.random();
        let pool = self.wealth[i] + self.wealth[j];
        let share = eps * pool;
        self.wealth[i] = share;
        self.wealth[j] = pool - share;
        self.exchanges += 1;
    }

    pub fn run(&mut self, n_exchanges: u64) {
        for _ in 0..n_exchanges {
            self.exchange_step();
        }
    }
}

/// Normalized exponential density exp(-W/mean)/mean.
pub fn gibbs_pdf(wealth: f64, mean_wealth: f64) -> Result<f64> {
    if wealth < 0.0 {
        return Err(Error::Domain(format!("wealth must be nonnegative, got {wealth}")));
    }
    if !(mean_wealth > 0.0) {
        return Err(Error::Domain("mean wealth must be positive".into()));
    }
    Ok((-wealth / mean_wealth).exp() / mean_wealth)
}

/// Empirical complementary CDF points (w_(i), (n-i)/n) over the sorted sample,
/// excluding the top point whose CCDF is zero.
pub fn ccdf_points(wealth: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sorted = wealth.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut xs = Vec::with_capacity(n.saturating_sub(1));
    let mut ys = Vec::with_capacity(n.saturating_sub(1));
    for (i, &w) in sorted.iter().enumerate().take(n - 1) {
        xs.push(w);
        ys.push((n - 1 - i) as f64 / n as f64);
    }
    (xs, ys)
}

/// Semi-log fit of the CCDF over the 10%-90% wealth quantile range; the slope
/// estimates the exponential rate -1/<W>.
pub fn fit_ccdf_rate(wealth: &[f64]) -> Result<FitResult> {
    if wealth.len() < 10 {
        return Err(Error::FitFailed("too few agents for a CCDF fit".into()));
    }
    let mut sorted = wealth.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let q = |f: f64| sorted[((n - 1) as f64 * f).round() as usize];
    let (lo, hi) = (q(0.10), q(0.90));
    let (xs, ys) = ccdf_points(wealth);
    semilog_fit(&xs, &ys, Some((lo, hi)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchangeRunOutput {
    pub histogram: Histogram,
    /// Midpoint density estimate per bin and the Gibbs reference curve.
    pub pdf_estimate: Vec<f64>,
    pub gibbs_reference: Vec<f64>,
    pub ccdf_fit: FitResult,
    pub mean_wealth: f64,
    pub n_exchanges: u64,
    /// |total_after - total_before| / total_before.
    pub conservation_drift: f64,
}

/// Run the configured number of exchanges from the uniform state and return
/// the histogram plus the fitted CCDF rate.
pub fn run_exchange(cfg: &SimConfig) -> Result<ExchangeRunOutput> {
    let p = match &cfg.params {
        ModelParams::Equilibrium(p) => p.clone(),
        _ => {
            return Err(Error::Validation(
                "params/model mismatch: run_exchange needs equilibrium params".into(),
            ))
        }
    };
    let mut pop = AgentPopulation::uniform(p.n_agents, p.mean_wealth, cfg.seed)?;
    pop.run(p.n_exchanges);

    let total_after = pop.total();
    let conservation_drift = ((total_after - pop.initial_total()) / pop.initial_total()).abs();

    let max_wealth = pop.wealth().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let hi = max_wealth * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    let histogram = linear_histogram(pop.wealth(), p.n_bins, 0.0, hi)?;

    let n = pop.n_agents() as f64;
    let centers = histogram.centers();
    let mut pdf_estimate = Vec::with_capacity(histogram.n_bins());
    let mut gibbs_reference = Vec::with_capacity(histogram.n_bins());
    for (idx, w) in histogram.edges.windows(2).enumerate() {
        let width = w[1] - w[0];
        pdf_estimate.push(histogram.counts[idx] as f64 / (n * width));
        gibbs_reference.push(gibbs_pdf(centers[idx], p.mean_wealth)?);
    }

    let ccdf_fit = if p.n_exchanges > 0 {
        fit_ccdf_rate(pop.wealth())?
    } else {
        // no dynamics: the distribution is a point mass and has no rate
        FitResult {
            slope: 0.0,
            intercept: 0.0,
            slope_stderr: 0.0,
            r_squared: 1.0,
            range_used: (p.mean_wealth, p.mean_wealth),
            n_points: pop.n_agents(),
        }
    };

    Ok(ExchangeRunOutput {
        histogram,
        pdf_estimate,
        gibbs_reference,
        ccdf_fit,
        mean_wealth: p.mean_wealth,
        n_exchanges: p.n_exchanges,
        conservation_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pair_sum_preserved_exactly_in_examples() {
        // symmetric split of (1, 1) at eps = 0.5
        let pool: f64 = 1.0 + 1.0;
        assert_eq!((0.5 * pool, pool - 0.5 * pool), (1.0, 1.0));
        // (2, 0) at eps = 0.25
        let pool: f64 = 2.0 + 0.0;
        assert_eq!((0.25 * pool, pool - 0.25 * pool), (0.5, 1.5));
    }

    #[test]
    fn exchanges_conserve_total() {
        let mut pop = AgentPopulation::uniform(100, 1.0, 42).unwrap();
        let before = pop.total();
        pop.run(100_000);
        let after = pop.total();
        assert!(((after - before) / before).abs() < 1e-12, "{before} -> {after}");
        assert!(pop.wealth().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn stationary_distribution_is_exponential() {
        // the simulation itself is the oracle: 2000 exchanges per agent
        // equilibrate the population, then the CCDF rate must be -1/<W>
        let mut pop = AgentPopulation::uniform(4_000, 2.0, 7).unwrap();
        pop.run(4_000_000);
        let fit = fit_ccdf_rate(pop.wealth()).unwrap();
        assert!(
            (fit.slope * 2.0 + 1.0).abs() < 0.05,
            "rate {} vs -1/2 expected",
            fit.slope
        );
        assert!(fit.r_squared > 0.99);
    }

    #[test]
    fn doubling_mean_halves_rate() {
        // same seed, scaled initial wealth: the trajectory scales exactly,
        // so the fitted rate halves exactly up to rounding
        let run = |mean: f64| {
            let mut pop = AgentPopulation::uniform(1_000, mean, 99).unwrap();
            pop.run(200_000);
            fit_ccdf_rate(pop.wealth()).unwrap().slope
        };
        let r1 = run(1.0);
        let r2 = run(2.0);
        assert!((r1 / r2 - 2.0).abs() < 1e-9, "rates {r1} vs {r2}");
    }

    #[test]
    fn gibbs_pdf_values() {
        assert!((gibbs_pdf(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((gibbs_pdf(1.0, 1.0).unwrap() - 1.0 / e).abs() < 1e-15);
        assert!((gibbs_pdf(3.0, 3.0).unwrap() - 1.0 / (3.0 * e)).abs() < 1e-15);
        assert!(gibbs_pdf(-0.1, 1.0).is_err());
        assert!(gibbs_pdf(1.0, 0.0).is_err());
    }

    /// Adaptive Simpson quadrature oracle: the normalized density integrates
    /// to one.
    #[test]
    fn gibbs_pdf_normalized() {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
        }
        fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                adaptive(f, a, m, left, tol / 2.0) + adaptive(f, m, b, right, tol / 2.0)
            }
        }
        for mean in [0.5, 1.0, 3.0] {
            let f = move |w: f64| gibbs_pdf(w, mean).unwrap();
            let upper = 60.0 * mean;
            let integral = adaptive(&f, 0.0, upper, simpson(&f, 0.0, upper), 1e-10);
            assert!((integral - 1.0).abs() < 1e-8, "mean {mean}: integral {integral}");
        }
    }

    #[test]
    fn zero_steps_is_a_point_mass() {
        let cfg = {
            let mut cfg = crate::config::default_config(crate::config::ModelKind::Equilibrium);
            if let ModelParams::Equilibrium(p) = &mut cfg.params {
                p.n_agents = 500;
                p.n_exchanges = 0;
                p.n_bins = 16;
            }
            cfg
        };
        let out = run_exchange(&cfg).unwrap();
        let nonzero: Vec<usize> = out
            .histogram
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero.len(), 1, "all mass in one bin: {:?}", out.histogram.counts);
        assert_eq!(out.histogram.counts[nonzero[0]], 500);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Conservation and nonnegativity hold for any population size/seed.
        #[test]
        fn exchange_invariants(n in 2usize..200, seed in 0u64..1000, steps in 0u64..5000) {
            let mut pop = AgentPopulation::uniform(n, 1.0, seed).unwrap();
            let before = pop.total();
            pop.run(steps);
            let after = pop.total();
            prop_assert!(((after - before) / before).abs() < 1e-12);
            prop_assert!(pop.wealth().iter().all(|&w| w >= 0.0));
        }
    }
}
