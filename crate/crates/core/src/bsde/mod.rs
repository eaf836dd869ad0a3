//! Numerical solvers for the reduced XVA equation: terminal value zero (or a
//! payoff, for validation problems), driver integrated backward in time over
//! simulated stock/regime paths.
//!
//! Two backends: [`solve_regression`] runs an explicit backward Euler scheme
//! with conditional expectations estimated by least-squares regression on a
//! polynomial basis in log-moneyness (separate coefficients per regime), and
//! [`solve_shooting`] parameterizes the initial value and the Brownian
//! loading by a small feed-forward approximator trained to shoot the forward
//! Euler trajectory into the terminal condition.

mod net;
mod regression;
mod shooting;

pub use regression::solve_regression;
pub use shooting::solve_shooting;

use crate::error::CoreError;
use crate::generators::{eval_g_breve, g_breve_with_grad, DriverSlope, Sign};
use crate::market::{bs_price_delta, theta_tilde, ClaimSpec, MarketParams, PathBundle};
use crate::regime::Regime;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Regression,
    Shooting,
}

/// Hyperparameters of the shooting backend. The defaults are desk-scale;
/// full-scale training settings (tiny step sizes, millions of iterations)
/// remain expressible through the same fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub step_size: f64,
    pub iterations: usize,
    pub batch_size: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            hidden_layers: 2,
            width: 16,
            step_size: 1e-3,
            iterations: 5_000,
            batch_size: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub backend: Backend,
    /// Polynomial degree of the regression basis in log-moneyness.
    pub basis_degree: usize,
    pub shooting: ShootingConfig,
    pub seed: u64,
    /// Two-sided winsorization quantile for regression targets.
    pub clamp_quantile: f64,
    /// Retain per-path value/loading trajectories (needed by
    /// [`expand_full`]).
    pub store_paths: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_steps: 50,
            n_paths: 100_000,
            backend: Backend::Regression,
            basis_degree: 3,
            shooting: ShootingConfig::default(),
            seed: 1,
            clamp_quantile: 1e-4,
            store_paths: false,
        }
    }
}

impl SolverConfig {
    pub fn shooting_default() -> Self {
        SolverConfig {
            backend: Backend::Shooting,
            n_paths: 4_096,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(CoreError::InvalidParams("n_steps must be >= 1".into()));
        }
        if self.backend == Backend::Regression {
            let dim = self.basis_degree + 1;
            if self.n_paths < dim * 10 {
                return Err(CoreError::InvalidParams(format!(
                    "regression needs n_paths >= {} for basis dimension {dim}",
                    dim * 10
                )));
            }
        } else if self.n_paths == 0 {
            return Err(CoreError::InvalidParams("n_paths must be >= 1".into()));
        }
        if !(0.0..0.4).contains(&self.clamp_quantile) {
            return Err(CoreError::InvalidParams(format!(
                "clamp_quantile must lie in [0, 0.4), got {}",
                self.clamp_quantile
            )));
        }
        Ok(())
    }
}

/// Driver of a reduced problem. The market parameters live on the problem;
/// the variants select how they are used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "driver", rename_all = "kebab-case")]
pub enum DriverSpec {
    /// Identically zero.
    Zero,
    /// Pure discounting at the given rate.
    Discount { rate: f64 },
    /// The reduced XVA driver with the given side.
    ReducedXva { sign: Sign },
}

impl DriverSpec {
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn eval(
        &self,
        market: &MarketParams,
        t: f64,
        u: f64,
        z: f64,
        beta: Regime,
        v_hat: f64,
        z_hat: f64,
    ) -> f64 {
        match *self {
            DriverSpec::Zero => 0.0,
            DriverSpec::Discount { rate } => -rate * u,
            DriverSpec::ReducedXva { sign } => {
                eval_g_breve(market, t, u, z, beta, v_hat, z_hat, sign)
            }
        }
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn eval_with_grad(
        &self,
        market: &MarketParams,
        t: f64,
        u: f64,
        z: f64,
        beta: Regime,
        v_hat: f64,
        z_hat: f64,
    ) -> DriverSlope {
        match *self {
            DriverSpec::Zero => DriverSlope {
                value: 0.0,
                du: 0.0,
                dz: 0.0,
            },
            DriverSpec::Discount { rate } => DriverSlope {
                value: -rate * u,
                du: -rate,
                dz: 0.0,
            },
            DriverSpec::ReducedXva { sign } => {
                g_breve_with_grad(market, t, u, z, beta, v_hat, z_hat, sign)
            }
        }
    }

    /// Whether the reference valuation grid must be evaluated.
    pub(crate) fn needs_reference(&self) -> bool {
        matches!(self, DriverSpec::ReducedXva { .. })
    }
}

/// Terminal condition of a reduced problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "terminal", rename_all = "kebab-case")]
pub enum TerminalSpec {
    /// Identically zero (the reduced XVA case).
    Zero,
    /// `scale` times the claim payoff at the terminal stock value (the
    /// validation case).
    Payoff { scale: f64 },
}

impl TerminalSpec {
    pub(crate) fn eval(&self, claim: &ClaimSpec, terminal_stock: f64) -> f64 {
        match *self {
            TerminalSpec::Zero => 0.0,
            TerminalSpec::Payoff { scale } => scale * claim.payoff(terminal_stock),
        }
    }
}

/// Reference valuation `v_hat` and its Brownian integrand `z_hat` on the
/// full grid, row-major `[path][grid point]`.
#[derive(Debug, Clone)]
pub struct ReferenceGrid {
    pub v_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
}

/// Evaluates the closed-form reference valuation at every `(path, grid
/// point)` of a bundle. Reusable across solves over the same bundle.
pub fn compute_reference_grid(
    market: &MarketParams,
    claim: &ClaimSpec,
    paths: &PathBundle,
) -> Result<ReferenceGrid> {
    let n_points = paths.grid.len();
    let total = paths.n_paths * n_points;
    let mut v_hat = vec![0.0f64; total];
    let mut z_hat = vec![0.0f64; total];
    use rayon::prelude::*;
    let grid = &paths.grid;
    v_hat
        .par_chunks_mut(n_points)
        .zip(z_hat.par_chunks_mut(n_points))
        .enumerate()
        .try_for_each(|(p, (v_row, z_row))| -> Result<()> {
            for (k, &t) in grid.iter().enumerate() {
                let point = bs_price_delta(market, claim, t, paths.stock_at(p, k))?;
                v_row[k] = point.value;
                z_row[k] = point.z_hat;
            }
            Ok(())
        })?;
    Ok(ReferenceGrid { v_hat, z_hat })
}

/// A reduced backward problem over a simulated path bundle. `reference` may
/// carry a precomputed reference grid to share across solves; otherwise the
/// solver computes it on demand (or skips it for drivers that never read
/// it).
pub struct ReducedProblem<'a> {
    pub driver: DriverSpec,
    pub terminal: TerminalSpec,
    pub market: &'a MarketParams,
    pub claim: &'a ClaimSpec,
    pub paths: &'a PathBundle,
    pub reference: Option<&'a ReferenceGrid>,
}

impl<'a> ReducedProblem<'a> {
    pub(crate) fn reference_grid(&self) -> Result<std::borrow::Cow<'a, ReferenceGrid>> {
        use std::borrow::Cow;
        if let Some(r) = self.reference {
            return Ok(Cow::Borrowed(r));
        }
        if !self.driver.needs_reference() {
            let total = self.paths.n_paths * self.paths.grid.len();
            return Ok(Cow::Owned(ReferenceGrid {
                v_hat: vec![0.0; total],
                z_hat: vec![0.0; total],
            }));
        }
        Ok(Cow::Owned(compute_reference_grid(
            self.market,
            self.claim,
            self.paths,
        )?))
    }

    pub(crate) fn terminal_values(&self) -> Vec<f64> {
        let n = self.paths.n_steps();
        (0..self.paths.n_paths)
            .map(|p| self.terminal.eval(self.claim, self.paths.stock_at(p, n)))
            .collect()
    }
}

/// Estimated initial value for one initial regime.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeValue {
    pub initial_regime: Regime,
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub u_mean: f64,
    pub z_mean: f64,
    /// R^2 of the value regression at this step (regression backend only).
    pub r2_value: Option<f64>,
    pub clamped_targets: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverDiagnostics {
    pub backend: Backend,
    /// Mean and variance of the terminal residual over the full pool
    /// (shooting backend).
    pub terminal_residual_mean: Option<f64>,
    pub terminal_residual_variance: Option<f64>,
    pub final_loss: Option<f64>,
    pub total_clamped: usize,
}

/// Solver result: initial value(s), per-step estimates, diagnostics, and
/// optionally the per-path trajectories.
#[derive(Debug, Clone, Serialize)]
pub struct SolverOutput {
    pub u0: Vec<RegimeValue>,
    pub per_step: Vec<StepDiagnostics>,
    pub diagnostics: SolverDiagnostics,
    #[serde(skip)]
    pub grid: Vec<f64>,
    #[serde(skip)]
    pub n_paths: usize,
    /// Per-path values at grid points, row-major, when retained.
    #[serde(skip)]
    pub u_paths: Option<Vec<f64>>,
    /// Per-path Brownian loadings per step, row-major, when retained.
    #[serde(skip)]
    pub z_paths: Option<Vec<f64>>,
}

impl SolverOutput {
    /// The estimate for the given initial regime.
    pub fn u0_for(&self, regime: Regime) -> Option<&RegimeValue> {
        self.u0.iter().find(|v| v.initial_regime == regime)
    }

    /// The single initial-regime estimate of a homogeneous bundle.
    pub fn primary_u0(&self) -> &RegimeValue {
        &self.u0[0]
    }

    /// Writes per-step estimates as CSV rows
    /// `step,t,u_mean,z_mean,r2_value,clamped`.
    pub fn write_steps_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,t,u_mean,z_mean,r2_value,clamped")?;
        for (i, s) in self.per_step.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i,
                s.t,
                s.u_mean,
                s.z_mean,
                s.r2_value.map(|v| v.to_string()).unwrap_or_default(),
                s.clamped_targets
            )?;
        }
        Ok(())
    }
}

/// Dispatches on the configured backend.
pub fn solve(problem: &ReducedProblem, config: &SolverConfig) -> Result<SolverOutput> {
    match config.backend {
        Backend::Regression => solve_regression(problem, config),
        Backend::Shooting => solve_shooting(problem, config),
    }
}

/// Per-path trajectories of the full defaultable solution.
#[derive(Debug, Clone)]
pub struct FullSolution {
    pub grid: Vec<f64>,
    pub n_paths: usize,
    /// Adjustment value at grid points, row-major.
    pub xva: Vec<f64>,
    /// Brownian loading per step, row-major.
    pub z_tilde: Vec<f64>,
    /// Investor default-martingale loading at grid points, row-major.
    pub z_investor: Vec<f64>,
    /// Counterparty default-martingale loading at grid points, row-major.
    pub z_counterparty: Vec<f64>,
}

/// Expands the reduced solution to the full defaultable one: the value
/// follows the reduced trajectory before the first default and freezes at
/// the closeout adjustment afterwards; the default loadings are the gap
/// between the closeout adjustment and the running value up to (and
/// including) the default time.
pub fn expand_full(
    output: &SolverOutput,
    params: &MarketParams,
    v_hat_grid: &[f64],
    default_times: &[(f64, f64)],
) -> Result<FullSolution> {
    let u_paths = output.u_paths.as_ref().ok_or(CoreError::MissingPaths)?;
    let z_paths = output.z_paths.as_ref().ok_or(CoreError::MissingPaths)?;
    let n_points = output.grid.len();
    let n_steps = n_points - 1;
    let n_paths = output.n_paths;
    if v_hat_grid.len() != n_paths * n_points {
        return Err(CoreError::GridMismatch(format!(
            "reference grid has {} entries, expected {}",
            v_hat_grid.len(),
            n_paths * n_points
        )));
    }
    if default_times.len() != n_paths {
        return Err(CoreError::GridMismatch(format!(
            "{} default-time pairs for {} paths",
            default_times.len(),
            n_paths
        )));
    }

    let horizon = *output.grid.last().unwrap();
    let mut xva = vec![0.0f64; n_paths * n_points];
    let mut z_tilde = vec![0.0f64; n_paths * n_steps];
    let mut z_investor = vec![0.0f64; n_paths * n_points];
    let mut z_counterparty = vec![0.0f64; n_paths * n_points];

    for p in 0..n_paths {
        let (tau_i, tau_c) = default_times[p];
        let tau = tau_i.min(tau_c).min(horizon);
        let investor_first = tau_i < tau_c.min(horizon);
        let counterparty_first = tau_c < tau_i.min(horizon);
        // closeout adjustment frozen at the first grid point at or past tau
        let frozen = if investor_first || counterparty_first {
            let snap = output.grid.partition_point(|&t| t < tau).min(n_points - 1);
            let v_hat_tau = v_hat_grid[p * n_points + snap];
            let (theta_i, theta_c) = theta_tilde(params, v_hat_tau);
            if investor_first {
                theta_i
            } else {
                theta_c
            }
        } else {
            0.0
        };

        for k in 0..n_points {
            let t = output.grid[k];
            let u = u_paths[p * n_points + k];
            xva[p * n_points + k] = if t < tau { u } else { frozen };
            if t <= tau {
                let (theta_i, theta_c) = theta_tilde(params, v_hat_grid[p * n_points + k]);
                z_investor[p * n_points + k] = theta_i - u;
                z_counterparty[p * n_points + k] = theta_c - u;
            }
            if k < n_steps && t < tau {
                z_tilde[p * n_steps + k] = z_paths[p * n_steps + k];
            }
        }
    }

    Ok(FullSolution {
        grid: output.grid.clone(),
        n_paths,
        xva,
        z_tilde,
        z_investor,
        z_counterparty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_paths_q, RegimeMode};

    fn tiny_output(grid: Vec<f64>, n_paths: usize, u: Vec<f64>, z: Vec<f64>) -> SolverOutput {
        SolverOutput {
            u0: vec![RegimeValue {
                initial_regime: Regime::Normal,
                value: u[0],
                std_error: 0.0,
                n_paths,
            }],
            per_step: vec![],
            diagnostics: SolverDiagnostics {
                backend: Backend::Regression,
                terminal_residual_mean: None,
                terminal_residual_variance: None,
                final_loss: None,
                total_clamped: 0,
            },
            grid,
            n_paths,
            u_paths: Some(u),
            z_paths: Some(z),
        }
    }

    #[test]
    fn expand_no_default_keeps_reduced_path() {
        let params = MarketParams::benchmark();
        let grid = vec![0.0, 0.125, 0.25];
        let u = vec![0.01, 0.008, 0.0];
        let z = vec![0.002, 0.001];
        let out = tiny_output(grid, 1, u.clone(), z.clone());
        let v_hat = vec![0.06, 0.05, 0.04];
        let full = expand_full(&out, &params, &v_hat, &[(10.0, 20.0)]).unwrap();
        assert_eq!(full.xva, u);
        assert_eq!(full.z_tilde, z);
    }

    #[test]
    fn expand_freezes_at_counterparty_default() {
        let params = MarketParams::benchmark();
        let grid = vec![0.0, 0.125, 0.25];
        let u = vec![0.01, 0.008, 0.0];
        let z = vec![0.002, 0.001];
        let out = tiny_output(grid, 1, u, z);
        // negative reference so the counterparty closeout adjustment is
        // nonzero: theta_c = L_C * (v_hat)^- at alpha = 0
        let v_hat = vec![-0.06, -0.05, -0.04];
        let full = expand_full(&out, &params, &v_hat, &[(10.0, 0.1)]).unwrap();
        // tau = 0.1 snaps to grid point 1 (t = 0.125)
        let frozen = 0.5 * 0.05;
        assert_eq!(full.xva[0], 0.01);
        assert_eq!(full.xva[1], frozen);
        assert_eq!(full.xva[2], frozen);
        // Brownian loading cut at tau
        assert_eq!(full.z_tilde, vec![0.002, 0.0]);
    }

    #[test]
    fn expand_full_collateral_kills_closeout() {
        let mut params = MarketParams::benchmark();
        params.collateralization = 1.0;
        let grid = vec![0.0, 0.5, 1.0];
        let u = vec![0.02, 0.01, 0.0];
        let z = vec![0.0, 0.0];
        let out = tiny_output(grid, 1, u.clone(), z);
        let v_hat = vec![0.5, 0.4, 0.3];
        let full = expand_full(&out, &params, &v_hat, &[(2.0, 3.0)]).unwrap();
        for (k, uk) in u.iter().enumerate() {
            assert_eq!(full.z_investor[k], -uk);
            assert_eq!(full.z_counterparty[k], -uk);
        }
    }

    #[test]
    fn expand_rejects_mismatched_grids() {
        let params = MarketParams::benchmark();
        let out = tiny_output(vec![0.0, 1.0], 1, vec![0.0, 0.0], vec![0.0]);
        assert!(matches!(
            expand_full(&out, &params, &[0.0; 3], &[(1.0, 1.0)]),
            Err(CoreError::GridMismatch(_))
        ));
        let mut no_paths = tiny_output(vec![0.0, 1.0], 1, vec![0.0, 0.0], vec![0.0]);
        no_paths.u_paths = None;
        assert!(matches!(
            expand_full(&no_paths, &params, &[0.0; 2], &[(1.0, 1.0)]),
            Err(CoreError::MissingPaths)
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n_paths = 10;
        assert!(cfg.validate().is_err());
        cfg = SolverConfig {
            n_steps: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reference_grid_skipped_for_plain_drivers() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let bundle = simulate_paths_q(&market, &claim, &RegimeMode::FrozenNormal, 2, 5, 1).unwrap();
        let problem = ReducedProblem {
            driver: DriverSpec::Zero,
            terminal: TerminalSpec::Zero,
            market: &market,
            claim: &claim,
            paths: &bundle,
            reference: None,
        };
        let reference = problem.reference_grid().unwrap();
        assert!(reference.v_hat.iter().all(|&x| x == 0.0));
        assert!(reference.z_hat.iter().all(|&x| x == 0.0));
    }
}
