//! Hierarchical finance shell model: wealth injected at the largest scale
//! cascades through a geometric ladder of financial entities and is consumed
//! at the smallest scale.
//!
//! Two right-hand sides are provided. `Literal` integrates the three-term
//! shell equation as written (its nonlinear term is a pure production term,
//! so it only admits steady states with losses switched on). `FluxForm`
//! rewrites the interaction as a nearest-neighbour pair flux
//! F_{k+1/2} = a k^alpha W_k W_{k+1}, which makes the constant money cascade
//! a telescoping identity and reproduces the W_k ~ k^(-alpha/2) steady state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ModelParams, SimConfig};
use crate::error::{Error, Result};
use crate::grid::ShellGrid;

/// Residual threshold below which a state counts as steady.
pub const STEADY_STATE_TOL: f64 = 1e-8;

/// Strength of the pseudo-transient friction used while relaxing to steady
/// state, in units of the injection rate over the held wealth. The interior
/// pair flux conserves every product W_n W_{n+1} under opposite rescaling of
/// adjacent shells, so the chain carries undamped waves and a neutral parity
/// mode that plain time-stepping cannot settle below the residual tolerance;
/// a drag -gamma (W - Wbar) against a running average Wbar vanishes at any
/// true fixed point and only removes those zero-mean motions.
const FRICTION_STRENGTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinanceMode {
    Literal,
    FluxForm,
}

/// Fiscal-tree corollary parameters (levels, branching, per-level pilferage).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub levels: u32,
    pub branching: u32,
    pub pilferage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinanceParams {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
    /// Injection rate at the largest scale (first shell), constant in time.
    pub q: f64,
    pub mode: FinanceMode,
    /// Linear absorption coefficient at the last shell.
    pub sink: f64,
    pub tree: TreeSpec,
    pub grid: ShellGrid,
}

/// Absorption coefficient that consumes exactly the injected flux when the
/// interior sits on the steady power law W_k = sqrt(Q/a) lambda^(alpha/4)
/// k^(-alpha/2). Any other value forces the last shell off that family and,
/// because the steady state satisfies the product constraints exactly, the
/// mismatch propagates through every shell as a two-cycle; matching the sink
/// makes the balanced power law the unique fixed point.
pub fn matched_sink(a: f64, q: f64, alpha: f64, grid: &ShellGrid) -> f64 {
    let k_last = grid.wavenumber(grid.n_shells() - 1);
    (a * q).sqrt() * grid.lambda().powf(-alpha / 4.0) * k_last.powf(alpha / 2.0)
}

impl FinanceParams {
    /// `sink = None` selects the matched absorption coefficient.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        alpha: f64,
        b: f64,
        beta: f64,
        q: f64,
        mode: FinanceMode,
        sink: Option<f64>,
        tree: TreeSpec,
        grid: ShellGrid,
    ) -> Self {
        let sink = sink.unwrap_or_else(|| matched_sink(a, q, alpha, &grid));
        Self { a, alpha, b, beta, q, mode, sink, tree, grid }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = self.grid.violations();
        if !(self.a > 0.0) {
            v.push("finance.a must be positive".to_string());
        }
        if !self.alpha.is_finite() {
            v.push("finance.alpha must be finite".to_string());
        }
        if self.b < 0.0 {
            v.push("finance.b must be nonnegative".to_string());
        }
        if !(self.q > 0.0) {
            v.push("finance.q must be positive".to_string());
        }
        if self.sink < 0.0 || !self.sink.is_finite() {
            v.push("finance.sink must be nonnegative".to_string());
        }
        if self.tree.levels < 1 {
            v.push("finance.tree_levels must be at least 1".to_string());
        }
        if self.tree.branching < 2 {
            v.push("finance.tree_branching must be at least 2".to_string());
        }
        if !(0.0..1.0).contains(&self.tree.pilferage) {
            v.push("finance.tree_pilferage must lie in [0, 1)".to_string());
        }
        v
    }
}

/// Nonnegative shell wealths at a time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthState {
    pub w: Vec<f64>,
    pub t: f64,
}

impl WealthState {
    pub fn zero(n_shells: usize) -> Self {
        Self { w: vec![0.0; n_shells], t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }
}

fn check_dims(state: &WealthState, p: &FinanceParams) -> Result<()> {
    if state.w.len() != p.grid.n_shells() {
        return Err(Error::Dimension(format!(
            "state has {} shells, grid has {}",
            state.w.len(),
            p.grid.n_shells()
        )));
    }
    Ok(())
}

/// The shell equation as written, with phantom shells W_{-1} = W_N = 0:
/// dW_i/dt = a k_i^alpha W_{i-1} W_{i+1} - b k_i^beta W_i
///           + Q [i = 0] - sink W_i [i = last].
pub fn finance_rhs_literal(state: &WealthState, p: &FinanceParams) -> Result<Vec<f64>> {
    check_dims(state, p)?;
    let k = p.grid.wavenumbers();
    let n = state.w.len();
    let w = &state.w;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { w[i - 1] };
        let right = if i + 1 == n { 0.0 } else { w[i + 1] };
        out[i] = p.a * k[i].powf(p.alpha) * left * right - p.b * k[i].powf(p.beta) * w[i];
    }
    out[0] += p.q;
    out[n - 1] -= p.sink * w[n - 1];
    Ok(out)
}

/// Pair fluxes through interior shell boundaries: F_{i+1/2} = a k_i^alpha W_i W_{i+1}
/// for i = 0..N-2. The outermost boundaries carry no pair flux.
fn pair_fluxes(w: &[f64], p: &FinanceParams, k: &[f64]) -> Vec<f64> {
    (0..w.len() - 1)
        .map(|i| p.a * k[i].powf(p.alpha) * w[i] * w[i + 1])
        .collect()
}

/// Conservative flux-divergence variant:
/// dW_i/dt = F_{i-1/2} - F_{i+1/2} - b k_i^beta W_i + Q [i = 0] - sink W_i [i = last].
pub fn finance_rhs_fluxform(state: &WealthState, p: &FinanceParams) -> Result<Vec<f64>> {
    check_dims(state, p)?;
    let k = p.grid.wavenumbers();
    let n = state.w.len();
    let f = pair_fluxes(&state.w, p, &k);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let inflow = if i == 0 { 0.0 } else { f[i - 1] };
        let outflow = if i + 1 == n { 0.0 } else { f[i] };
        out[i] = inflow - outflow - p.b * k[i].powf(p.beta) * state.w[i];
    }
    out[0] += p.q;
    out[n - 1] -= p.sink * state.w[n - 1];
    Ok(out)
}

/// Derivative for the configured mode.
pub fn finance_rhs(state: &WealthState, p: &FinanceParams) -> Result<Vec<f64>> {
    match p.mode {
        FinanceMode::Literal => finance_rhs_literal(state, p),
        FinanceMode::FluxForm => finance_rhs_fluxform(state, p),
    }
}

/// Money flux through each boundary, N+1 entries: entry j is the flux through
/// the left boundary of shell j, entry N is the outflow through the far end.
///
/// In flux-form mode these are the pair fluxes (plus the sink absorption at
/// the far end). In literal mode the flux is reconstructed from the budget
/// Pi_{j-1/2} = Q - sum_{m<j} (b k_m^beta W_m + dW_m/dt), so both modes agree
/// on a steady state of the flux form.
pub fn money_flux(state: &WealthState, p: &FinanceParams) -> Result<Vec<f64>> {
    check_dims(state, p)?;
    let n = state.w.len();
    let k = p.grid.wavenumbers();
    match p.mode {
        FinanceMode::FluxForm => {
            let f = pair_fluxes(&state.w, p, &k);
            let mut out = Vec::with_capacity(n + 1);
            out.push(0.0);
            out.extend_from_slice(&f);
            out.push(p.sink * state.w[n - 1]);
            Ok(out)
        }
        FinanceMode::Literal => {
            let rhs = finance_rhs_literal(state, p)?;
            let mut out = Vec::with_capacity(n + 1);
            let mut acc = p.q;
            out.push(acc);
            for i in 0..n {
                acc -= p.b * k[i].powf(p.beta) * state.w[i] + rhs[i];
                out.push(acc);
            }
            Ok(out)
        }
    }
}

/// Steady-state run outcome; `converged` is honest, not assumed.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateReport {
    #[serde(skip)]
    pub state: WealthState,
    /// money_flux at the final state, N+1 boundary entries.
    pub flux: Vec<f64>,
    pub converged: bool,
    pub residual_norm: f64,
    pub steps: u64,
    /// Steps on which at least one shell had to be clamped back to zero.
    pub clamped_steps: u64,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// RK4 time-stepping with a nonnegativity clamp until the relative residual
/// ||dW/dt|| / ||W|| drops below `STEADY_STATE_TOL` or t_end is reached.
pub fn integrate_to_steady_state(
    p: &FinanceParams,
    dt: f64,
    t_end: f64,
    seed: u64,
    check_every: u64,
) -> Result<SteadyStateReport> {
    let n = p.grid.n_shells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Seed at a tenth of the balanced power-law profile with multiplicative
    // jitter. The pair flux cannot invade an exactly empty shell, and a flat
    // tiny seed lets injection pile up at the first shell until a steep pulse
    // overshoots the fast high-k shells, so the seed follows the expected
    // shape while leaving a tenfold amplitude transient to relax through.
    let amplitude = 0.1 * (p.q / p.a).sqrt() * p.grid.lambda().powf(p.alpha / 4.0);
    let profile_ok = amplitude > 0.0 && amplitude.is_finite();
    let mut state = WealthState {
        w: p
            .grid
            .wavenumbers()
            .iter()
            .map(|&k| {
                let jitter = 0.9 + 0.2 * rng.random::<f64>();
                if profile_ok {
                    amplitude * k.powf(-p.alpha / 2.0) * jitter
                } else {
                    1e-3 * jitter
                }
            })
            .collect(),
        t: 0.0,
    };

    let n_steps = (t_end / dt).round() as u64;
    let check_every = check_every.max(1);
    let mut clamped_steps = 0u64;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut steps_taken = 0u64;

    // running average the friction acts against; starts at the seed
    let mut tracked = state.w.clone();
    let mut stage_w = vec![0.0; n];
    let mut stage_t = vec![0.0; n];

    for step in 1..=n_steps {
        // drag strength scales with how fast injection turns over the held
        // wealth; zero injection leaves the dynamics untouched
        let held: f64 = state.w.iter().sum();
        let gamma = if p.q > 0.0 && held > 0.0 { FRICTION_STRENGTH * p.q / held } else { 0.0 };

        // the average must track an order slower than the drag acts, so a
        // collapsing shell is held against its remembered level instead of
        // dragging the reference down with it
        let mu = 0.1 * gamma;
        let eval = |w: &[f64], bar: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut dw = finance_rhs(&WealthState { w: w.to_vec(), t: state.t }, p)?;
            let mut dbar = vec![0.0; w.len()];
            for i in 0..w.len() {
                let gap = w[i] - bar[i];
                dw[i] -= gamma * gap;
                dbar[i] = mu * gap;
            }
            Ok((dw, dbar))
        };

        let (k1, m1) = eval(&state.w, &tracked)?;
        for i in 0..n {
            stage_w[i] = state.w[i] + 0.5 * dt * k1[i];
            stage_t[i] = tracked[i] + 0.5 * dt * m1[i];
        }
        let (k2, m2) = eval(&stage_w, &stage_t)?;
        for i in 0..n {
            stage_w[i] = state.w[i] + 0.5 * dt * k2[i];
            stage_t[i] = tracked[i] + 0.5 * dt * m2[i];
        }
        let (k3, m3) = eval(&stage_w, &stage_t)?;
        for i in 0..n {
            stage_w[i] = state.w[i] + dt * k3[i];
            stage_t[i] = tracked[i] + dt * m3[i];
        }
        let (k4, m4) = eval(&stage_w, &stage_t)?;
        let mut clamped = false;
        for i in 0..n {
            let next = state.w[i] + dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            if next < 0.0 {
                state.w[i] = 0.0;
                clamped = true;
            } else {
                state.w[i] = next;
            }
            tracked[i] += dt / 6.0 * (m1[i] + 2.0 * (m2[i] + m3[i]) + m4[i]);
        }
        state.t += dt;
        steps_taken = step;
        if clamped {
            clamped_steps += 1;
        }
        if !state.is_finite() || state.w.iter().any(|&w| w > 1e30) {
            return Err(Error::Diverged { step, t: state.t });
        }
        if step % check_every == 0 || step == n_steps {
            // convergence is judged on the undamped equation
            let rhs = finance_rhs(&state, p)?;
            residual = l2(&rhs) / l2(&state.w).max(f64::MIN_POSITIVE);
            if residual < STEADY_STATE_TOL {
                converged = true;
                break;
            }
        }
    }

    let flux = money_flux(&state, p)?;
    Ok(SteadyStateReport {
        state,
        flux,
        converged,
        residual_norm: residual,
        steps: steps_taken,
        clamped_steps,
    })
}

/// SimConfig front end for `integrate_to_steady_state`.
pub fn run_to_steady_state(cfg: &SimConfig) -> Result<SteadyStateReport> {
    let p = match &cfg.params {
        ModelParams::Finance(p) => p,
        _ => {
            return Err(Error::Validation(
                "params/model mismatch: run_to_steady_state needs finance params".into(),
            ))
        }
    };
    integrate_to_steady_state(
        p,
        cfg.integrator.dt,
        cfg.integrator.t_end,
        cfg.seed,
        cfg.integrator.sample_every,
    )
}

/// Per-entity wealth W(k) = W_k / (2 pi k) and entity count n(k) = 2 pi k,
/// from the two-dimensional mesh-point count at radius k.
pub fn entity_wealth(state: &WealthState, grid: &ShellGrid) -> (Vec<f64>, Vec<f64>) {
    let k = grid.wavenumbers();
    let counts: Vec<f64> = k.iter().map(|&kk| std::f64::consts::TAU * kk).collect();
    let per_entity: Vec<f64> = state.w.iter().zip(&counts).map(|(&w, &n)| w / n).collect();
    (per_entity, counts)
}

/// Discrete wealth distribution: (W, n(W)) pairs over shells with positive
/// wealth, sorted by W ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WealthDistribution {
    pub wealth: Vec<f64>,
    pub count: Vec<f64>,
}

pub fn wealth_distribution(state: &WealthState, grid: &ShellGrid) -> WealthDistribution {
    let (per_entity, counts) = entity_wealth(state, grid);
    let mut pairs: Vec<(f64, f64)> = per_entity
        .into_iter()
        .zip(counts)
        .filter(|&(w, _)| w > 0.0)
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    WealthDistribution {
        wealth: pairs.iter().map(|&(w, _)| w).collect(),
        count: pairs.iter().map(|&(_, n)| n).collect(),
    }
}

/// Predicted n(W) exponent -2/(alpha+2) and its companion flux exponent
/// 1/(alpha+2).
pub fn predicted_exponent(alpha: f64) -> Result<(f64, f64)> {
    let denom = alpha + 2.0;
    if denom == 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(
            "degenerate exponent: alpha = -2 makes n(W) scale-free".into(),
        ));
    }
    Ok((-2.0 / denom, 1.0 / denom))
}

/// One level of the fiscal tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeLevel {
    pub level: u32,
    pub nodes: u64,
    pub level_budget: f64,
    pub per_node_wealth: f64,
}

/// Top budget Q split equally among B^l nodes at level l, with a fraction p
/// pilfered per level: level l receives Q (1-p)^l in total.
pub fn tree_cascade(levels: u32, branching: u32, q: f64, pilferage: f64) -> Result<Vec<TreeLevel>> {
    if levels < 1 {
        return Err(Error::Domain("tree needs at least 1 level".into()));
    }
    if branching < 2 {
        return Err(Error::Domain("tree branching must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&pilferage) {
        return Err(Error::Domain("pilferage must lie in [0, 1)".into()));
    }
    let mut out = Vec::with_capacity(levels as usize + 1);
    for level in 0..=levels {
        let nodes = (branching as u64).checked_pow(level).ok_or_else(|| {
            Error::Domain(format!("node count overflows at level {level}"))
        })?;
        let level_budget = q * (1.0 - pilferage).powi(level as i32);
        out.push(TreeLevel {
            level,
            nodes,
            level_budget,
            per_node_wealth: level_budget / nodes as f64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statfit::loglog_fit;
    use proptest::prelude::*;

    fn grid(n: usize) -> ShellGrid {
        ShellGrid::new(1.0, 2.0, n).unwrap()
    }

    fn params(alpha: f64, mode: FinanceMode, n: usize) -> FinanceParams {
        FinanceParams::new(
            1.0,
            alpha,
            0.0,
            2.0,
            1.0,
            mode,
            None,
            TreeSpec { levels: 3, branching: 3, pilferage: 0.0 },
            grid(n),
        )
    }

    #[test]
    fn literal_zero_state_without_injection() {
        let mut p = params(-1.0, FinanceMode::Literal, 8);
        p.q = 1.0;
        let state = WealthState::zero(8);
        let rhs = finance_rhs_literal(&state, &p).unwrap();
        assert_eq!(rhs[0], 1.0, "only injection survives on the first shell");
        assert!(rhs[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn literal_decoupled_decay() {
        // a = 0 leaves independent linear decay at rate b k^beta
        // (positivity of a is a config constraint, not an operation precondition)
        let mut p = params(-1.0, FinanceMode::Literal, 6);
        p.a = 0.0;
        p.b = 0.3;
        p.beta = 1.0;
        p.q = 0.0;
        p.sink = 0.0;
        let w0 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let state = WealthState { w: w0.clone(), t: 0.0 };
        let rhs = finance_rhs_literal(&state, &p).unwrap();
        let k = p.grid.wavenumbers();
        for i in 0..6 {
            let expected = -p.b * k[i] * w0[i];
            assert!((rhs[i] - expected).abs() < 1e-12, "shell {i}");
        }
    }

    #[test]
    fn fluxform_telescopes() {
        let mut p = params(-1.0, FinanceMode::FluxForm, 10);
        p.q = 0.0;
        p.sink = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = WealthState { w: (0..10).map(|_| rng.random::<f64>()).collect(), t: 0.0 };
        let rhs = finance_rhs_fluxform(&state, &p).unwrap();
        let total: f64 = rhs.iter().sum();
        let magnitude: f64 = rhs.iter().map(|v| v.abs()).sum();
        assert!(total.abs() <= 1e-13 * magnitude.max(1e-300), "sum {total}");
    }

    #[test]
    fn fluxform_injection_on_first_shell() {
        let p = params(-1.0, FinanceMode::FluxForm, 8);
        let state = WealthState::zero(8);
        let rhs = finance_rhs_fluxform(&state, &p).unwrap();
        assert_eq!(rhs[0], p.q);
        assert!(rhs[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn money_flux_zero_state_conventions() {
        let p = params(-1.0, FinanceMode::FluxForm, 8);
        let state = WealthState::zero(8);
        let flux = money_flux(&state, &p).unwrap();
        assert!(flux.iter().all(|&v| v == 0.0));

        let p = params(-1.0, FinanceMode::Literal, 8);
        let flux = money_flux(&state, &p).unwrap();
        assert_eq!(flux[0], p.q, "budget contribution of Q enters the chain");
        assert!(flux[1..].iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn money_flux_bilinear_in_wealth() {
        let p = params(-1.0, FinanceMode::FluxForm, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let state = WealthState { w: w.clone(), t: 0.0 };
        let scaled = WealthState { w: w.iter().map(|v| v * 2f64.sqrt()).collect(), t: 0.0 };
        let f1 = money_flux(&state, &p).unwrap();
        let f2 = money_flux(&scaled, &p).unwrap();
        for i in 1..8 {
            assert!((f2[i] - 2.0 * f1[i]).abs() <= 1e-12 * f1[i].abs().max(1e-300));
        }
    }

    /// Fixed point with b = 0: every interior pair product satisfies
    /// a k_n^alpha W_n W_{n+1} = Q, hence W_n = sqrt(Q) lambda^(n/2 - 1/4)
    /// for alpha = -1, lambda = 2, k0 = 1 (oracle computed algebraically).
    #[test]
    fn steady_state_hits_algebraic_fixed_point() {
        let p = params(-1.0, FinanceMode::FluxForm, 12);
        let report = integrate_to_steady_state(&p, 0.2, 30_000.0, 1, 64).unwrap();
        assert!(report.converged, "residual {}", report.residual_norm);
        let k = p.grid.wavenumbers();
        let w = &report.state.w;
        for n in 0..11 {
            let product = w[n] * w[n + 1];
            let expected = p.q * k[n];
            assert!(
                (product / expected - 1.0).abs() < 0.01,
                "boundary {n}: product {product} vs Q k_n {expected}"
            );
        }
        let oracle: Vec<f64> =
            (0..12).map(|n| p.q.sqrt() * 2f64.powf(n as f64 / 2.0) * 2f64.powf(-0.25)).collect();
        for n in 1..11 {
            assert!(
                (w[n] / oracle[n] - 1.0).abs() < 0.01,
                "shell {n}: {} vs oracle {}",
                w[n],
                oracle[n]
            );
        }
        // fitted W_k slope is -alpha/2 = +1/2
        let fit = loglog_fit(&k, w, None).unwrap();
        assert!((fit.slope - 0.5).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn no_injection_decays_to_zero() {
        let mut p = params(-1.0, FinanceMode::FluxForm, 8);
        p.q = 0.0;
        p.b = 0.5;
        p.beta = 0.0;
        let report = integrate_to_steady_state(&p, 0.05, 2_000.0, 3, 32).unwrap();
        assert!(report.converged);
        assert!(report.state.w.iter().all(|&w| w < 1e-12), "w = {:?}", report.state.w);
    }

    /// Conservation: with no injection, losses, or sink the flux form keeps
    /// the total wealth constant over any horizon.
    #[test]
    fn fluxform_conserves_total_wealth() {
        let mut p = params(-1.0, FinanceMode::FluxForm, 10);
        p.q = 1e-300;
        p.sink = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state =
            WealthState { w: (0..10).map(|_| 0.5 + rng.random::<f64>()).collect(), t: 0.0 };
        let total0: f64 = state.w.iter().sum();
        // hand-rolled RK4 steps via the public integrator path would inject
        // fresh ICs, so step explicitly here
        let dt = 1e-3;
        for _ in 0..5_000 {
            let k1 = finance_rhs(&state, &p).unwrap();
            let w1: Vec<f64> =
                state.w.iter().zip(&k1).map(|(w, d)| w + 0.5 * dt * d).collect();
            let k2 = finance_rhs(&WealthState { w: w1, t: 0.0 }, &p).unwrap();
            let w2: Vec<f64> =
                state.w.iter().zip(&k2).map(|(w, d)| w + 0.5 * dt * d).collect();
            let k3 = finance_rhs(&WealthState { w: w2, t: 0.0 }, &p).unwrap();
            let w3: Vec<f64> = state.w.iter().zip(&k3).map(|(w, d)| w + dt * d).collect();
            let k4 = finance_rhs(&WealthState { w: w3, t: 0.0 }, &p).unwrap();
            for i in 0..10 {
                state.w[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
        }
        let total1: f64 = state.w.iter().sum();
        assert!(
            ((total1 - total0) / total0).abs() < 1e-9,
            "total drifted {total0} -> {total1}"
        );
    }

    /// Budget identity in flux form: Q = d/dt(sum W) + sum b k^beta W + sink W_last.
    #[test]
    fn budget_identity_fluxform() {
        let mut p = params(-0.5, FinanceMode::FluxForm, 9);
        p.b = 0.2;
        p.beta = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let state = WealthState { w: (0..9).map(|_| rng.random::<f64>()).collect(), t: 0.0 };
        let rhs = finance_rhs(&state, &p).unwrap();
        let k = p.grid.wavenumbers();
        let d_total: f64 = rhs.iter().sum();
        let losses: f64 =
            state.w.iter().zip(&k).map(|(&w, &kk)| p.b * kk.powf(p.beta) * w).sum();
        let sink_term = p.sink * state.w[8];
        let residual = p.q - d_total - losses - sink_term;
        assert!(residual.abs() < 1e-12 * p.q.max(losses), "budget residual {residual}");
    }

    /// Rescaling Q by c rescales the converged wealth by sqrt(c) (bilinear
    /// fixed point), checked at c = 4.
    #[test]
    fn scale_covariance_in_q() {
        let p1 = params(-1.0, FinanceMode::FluxForm, 10);
        let mut p4 = params(-1.0, FinanceMode::FluxForm, 10);
        p4.q = 4.0;
        p4.sink = matched_sink(p4.a, p4.q, p4.alpha, &p4.grid);
        let r1 = integrate_to_steady_state(&p1, 0.2, 20_000.0, 1, 64).unwrap();
        let r4 = integrate_to_steady_state(&p4, 0.2, 20_000.0, 1, 64).unwrap();
        assert!(r1.converged && r4.converged);
        for i in 0..10 {
            let ratio = r4.state.w[i] / r1.state.w[i];
            assert!((ratio - 2.0).abs() < 0.02, "shell {i}: ratio {ratio}");
        }
    }

    #[test]
    fn entity_wealth_inverts_count() {
        let g = grid(6);
        let k = g.wavenumbers();
        let state = WealthState {
            w: k.iter().map(|&kk| std::f64::consts::TAU * kk).collect(),
            t: 0.0,
        };
        let (per_entity, counts) = entity_wealth(&state, &g);
        assert!(per_entity.iter().all(|&w| (w - 1.0).abs() < 1e-14));
        assert!((counts[0] - std::f64::consts::TAU).abs() < 1e-14, "n(k=1) = 2 pi");
    }

    #[test]
    fn predicted_exponents() {
        assert_eq!(predicted_exponent(-1.0).unwrap().0, -2.0);
        assert_eq!(predicted_exponent(0.0).unwrap().0, -1.0);
        assert!(predicted_exponent(-2.0).is_err());
    }

    #[test]
    fn distribution_slope_matches_prediction() {
        let p = params(-1.0, FinanceMode::FluxForm, 12);
        let report = integrate_to_steady_state(&p, 0.2, 30_000.0, 2, 64).unwrap();
        assert!(report.converged);
        let dist = wealth_distribution(&report.state, &p.grid);
        let fit = loglog_fit(&dist.wealth, &dist.count, None).unwrap();
        assert!((fit.slope + 2.0).abs() < 0.1, "n(W) slope {}", fit.slope);
    }

    #[test]
    fn tree_enumeration_matches_oracle() {
        let rows = tree_cascade(3, 3, 1.0, 0.0).unwrap();
        let budgets: Vec<f64> = rows.iter().map(|r| r.level_budget).collect();
        assert_eq!(budgets, vec![1.0; 4], "no pilferage keeps every level at Q");
        let nodes: Vec<u64> = rows.iter().map(|r| r.nodes).collect();
        assert_eq!(nodes, vec![1, 3, 9, 27]);
        let wealth: Vec<f64> = rows.iter().map(|r| r.per_node_wealth).collect();
        assert_eq!(wealth, vec![1.0, 1.0 / 3.0, 1.0 / 9.0, 1.0 / 27.0]);
        let counts: Vec<f64> = rows.iter().map(|r| r.nodes as f64).collect();
        let fit = loglog_fit(&wealth, &counts, None).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12, "slope {}", fit.slope);
    }

    #[test]
    fn tree_with_pilferage() {
        // slope = -ln B / (ln B - ln(1-p)); B = 2, p = 0.5 gives -1/2
        let rows = tree_cascade(5, 2, 1.0, 0.5).unwrap();
        for (l, row) in rows.iter().enumerate() {
            let expected = 0.25f64.powi(l as i32);
            assert!((row.per_node_wealth - expected).abs() < 1e-12);
            assert_eq!(row.nodes, 1u64 << l);
        }
        let wealth: Vec<f64> = rows.iter().map(|r| r.per_node_wealth).collect();
        let counts: Vec<f64> = rows.iter().map(|r| r.nodes as f64).collect();
        let fit = loglog_fit(&wealth, &counts, None).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12, "slope {}", fit.slope);
    }

    #[test]
    fn tree_rejects_bad_arguments() {
        assert!(tree_cascade(0, 2, 1.0, 0.0).is_err());
        assert!(tree_cascade(3, 1, 1.0, 0.0).is_err());
        assert!(tree_cascade(3, 2, 1.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Wealth never goes negative across accepted steps.
        /// (alpha and dt stay inside the explicit-RK4 stability region)
        #[test]
        fn nonnegativity_preserved(seed in 0u64..500, alpha in -1.5f64..1.2) {
            let p = params(alpha, FinanceMode::FluxForm, 8);
            let report = integrate_to_steady_state(&p, 0.01, 50.0, seed, 16).unwrap();
            prop_assert!(report.state.w.iter().all(|&w| w >= 0.0));
        }
    }
}
