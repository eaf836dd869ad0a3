//! Market model under the valuation measure: stock dynamics, risky-bond
//! default intensities, the Black-Scholes reference valuation, closeout
//! values, collateral, and portfolio-audit helpers.

use crate::error::CoreError;
use crate::numerics::norm_cdf;
use crate::regime::{self, Regime, RegimeParams};
use crate::rng::{sample_exponential, stream, StreamKind};
use crate::Result;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Physical-measure context carried for completeness; pricing runs entirely
/// under the valuation measure and never reads these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub drift: f64,
    pub intensity_investor: f64,
    pub intensity_counterparty: f64,
}

/// All market rates and contract-level risk parameters, per year.
///
/// Asymmetric rates come in lend/borrow pairs: `repo_rate_lend` is received
/// by repo cash lenders, `repo_rate_borrow` paid by borrowers, and likewise
/// for the funding and collateral accounts. `discount_rate` is the rate
/// defining the valuation measure. `bond_return_*` are the risky-bond
/// return rates whose excess over the discount rate gives the
/// valuation-measure default intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub repo_rate_lend: f64,
    pub repo_rate_borrow: f64,
    pub funding_rate_lend: f64,
    pub funding_rate_borrow: f64,
    pub collateral_rate_receive: f64,
    pub collateral_rate_pay: f64,
    pub discount_rate: f64,
    pub bond_return_investor: f64,
    pub bond_return_counterparty: f64,
    pub volatility: f64,
    pub loss_investor: f64,
    pub loss_counterparty: f64,
    pub collateralization: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalParams>,
}

impl MarketParams {
    /// Desk benchmark coefficients for a three-month at-the-money call.
    pub fn benchmark() -> Self {
        MarketParams {
            repo_rate_lend: 0.05,
            repo_rate_borrow: 0.05,
            funding_rate_lend: 0.05,
            funding_rate_borrow: 0.05,
            collateral_rate_receive: 0.01,
            collateral_rate_pay: 0.01,
            discount_rate: 0.01,
            bond_return_investor: 0.21,
            bond_return_counterparty: 0.16,
            volatility: 0.3,
            loss_investor: 0.5,
            loss_counterparty: 0.5,
            collateralization: 0.0,
            physical: None,
        }
    }

    /// A fully degenerate market: every rate equal, zero default
    /// intensities, zero losses. The XVA of any claim is exactly zero here.
    pub fn all_equal_rates(rate: f64) -> Self {
        MarketParams {
            repo_rate_lend: rate,
            repo_rate_borrow: rate,
            funding_rate_lend: rate,
            funding_rate_borrow: rate,
            collateral_rate_receive: rate,
            collateral_rate_pay: rate,
            discount_rate: rate,
            bond_return_investor: rate,
            bond_return_counterparty: rate,
            volatility: 0.3,
            loss_investor: 0.0,
            loss_counterparty: 0.0,
            collateralization: 0.0,
            physical: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volatility > 0.0 && self.volatility.is_finite()) {
            return Err(CoreError::InvalidParams(format!(
                "volatility must be positive, got {}",
                self.volatility
            )));
        }
        for (name, v) in [
            ("loss_investor", self.loss_investor),
            ("loss_counterparty", self.loss_counterparty),
            ("collateralization", self.collateralization),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CoreError::InvalidParams(format!(
                    "{name} must lie in [0,1], got {v}"
                )));
            }
        }
        for (name, v) in [
            ("repo_rate_lend", self.repo_rate_lend),
            ("repo_rate_borrow", self.repo_rate_borrow),
            ("funding_rate_lend", self.funding_rate_lend),
            ("funding_rate_borrow", self.funding_rate_borrow),
            ("collateral_rate_receive", self.collateral_rate_receive),
            ("collateral_rate_pay", self.collateral_rate_pay),
            ("discount_rate", self.discount_rate),
            ("bond_return_investor", self.bond_return_investor),
            ("bond_return_counterparty", self.bond_return_counterparty),
        ] {
            if !v.is_finite() {
                return Err(CoreError::InvalidParams(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if self.bond_return_investor < self.discount_rate
            || self.bond_return_counterparty < self.discount_rate
        {
            return Err(CoreError::NegativeIntensity {
                mu: self.bond_return_investor.min(self.bond_return_counterparty),
                r_d: self.discount_rate,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptionKind {
    Call,
    Put,
}

/// European option contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity: f64,
    pub spot: f64,
}

impl ClaimSpec {
    /// Benchmark claim: at-the-money call, three months, unit spot.
    pub fn benchmark() -> Self {
        ClaimSpec {
            kind: OptionKind::Call,
            strike: 1.0,
            maturity: 0.25,
            spot: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.maturity > 0.0 && self.spot > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "claim requires strike, maturity, spot > 0, got K={} T={} S0={}",
                self.strike, self.maturity, self.spot
            )));
        }
        Ok(())
    }

    pub fn payoff(&self, terminal_stock: f64) -> f64 {
        match self.kind {
            OptionKind::Call => (terminal_stock - self.strike).max(0.0),
            OptionKind::Put => (self.strike - terminal_stock).max(0.0),
        }
    }
}

/// How the regime coordinate of a path bundle is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RegimeMode {
    FrozenNormal,
    FrozenCrisis,
    Dynamic {
        #[serde(flatten)]
        params: RegimeParams,
    },
}

impl RegimeMode {
    pub fn initial_state(&self) -> Regime {
        match self {
            RegimeMode::FrozenNormal => Regime::Normal,
            RegimeMode::FrozenCrisis => Regime::Crisis,
            RegimeMode::Dynamic { params } => params.initial_state,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RegimeMode::FrozenNormal => "frozen-normal",
            RegimeMode::FrozenCrisis => "frozen-crisis",
            RegimeMode::Dynamic { .. } => "dynamic",
        }
    }
}

/// Simulated paths on a uniform grid: stock values at grid times, Brownian
/// increments per step, the regime at grid times, and the pair of default
/// times per path (possibly beyond the horizon).
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub grid: Vec<f64>,
    pub n_paths: usize,
    /// Stock values, row-major `[path][grid point]`, length n_paths * (n_steps + 1).
    pub stock: Vec<f64>,
    /// Brownian increments, row-major `[path][step]`, length n_paths * n_steps.
    pub brownian_increments: Vec<f64>,
    /// Regime at grid times, row-major `[path][grid point]`.
    pub regime: Vec<Regime>,
    /// Default times `(tau_investor, tau_counterparty)` per path.
    pub default_times: Vec<(f64, f64)>,
}

impl PathBundle {
    pub fn n_steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    #[inline]
    pub fn stock_at(&self, path: usize, point: usize) -> f64 {
        self.stock[path * self.grid.len() + point]
    }

    #[inline]
    pub fn increment_at(&self, path: usize, step: usize) -> f64 {
        self.brownian_increments[path * self.n_steps() + step]
    }

    #[inline]
    pub fn regime_at(&self, path: usize, point: usize) -> Regime {
        self.regime[path * self.grid.len() + point]
    }

    /// Debug export: rows `path_id,step,t,S,beta,dW` (the terminal grid
    /// point carries an empty increment field).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path_id,step,t,S,beta,dW")?;
        for p in 0..self.n_paths {
            for (k, &t) in self.grid.iter().enumerate() {
                let dw = if k < self.n_steps() {
                    format!("{}", self.increment_at(p, k))
                } else {
                    String::new()
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    p,
                    k,
                    t,
                    self.stock_at(p, k),
                    self.regime_at(p, k).index(),
                    dw
                )?;
            }
        }
        Ok(())
    }
}

/// Simulates the bundle under the valuation measure: the stock moves by the
/// exact lognormal transition with drift `discount_rate`, the regime is
/// frozen or sampled from the renewal process and read at grid times
/// (right-continuously), and default times are exponential with the
/// valuation-measure intensities. Deterministic in the seed, independent of
/// thread count.
pub fn simulate_paths_q(
    params: &MarketParams,
    claim: &ClaimSpec,
    regime_mode: &RegimeMode,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathBundle> {
    params.validate()?;
    claim.validate()?;
    if n_steps == 0 || n_paths == 0 {
        return Err(CoreError::InvalidParams(format!(
            "need n_steps >= 1 and n_paths >= 1, got ({n_steps}, {n_paths})"
        )));
    }
    if let RegimeMode::Dynamic { params } = regime_mode {
        params.validate()?;
    }

    let horizon = claim.maturity;
    let dt = horizon / n_steps as f64;
    let grid: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    let n_points = n_steps + 1;
    let (h_i, h_c) = default_intensities_q(params)?;

    let drift = (params.discount_rate - 0.5 * params.volatility * params.volatility) * dt;
    let vol = params.volatility;

    let mut stock = vec![0.0f64; n_paths * n_points];
    let mut increments = vec![0.0f64; n_paths * n_steps];
    let mut regimes = vec![Regime::Normal; n_paths * n_points];
    let mut defaults = vec![(0.0f64, 0.0f64); n_paths];

    stock
        .par_chunks_mut(n_points)
        .zip(increments.par_chunks_mut(n_steps))
        .zip(regimes.par_chunks_mut(n_points))
        .zip(defaults.par_iter_mut())
        .enumerate()
        .for_each(|(p, (((s_row, dw_row), beta_row), default_slot))| {
            let p = p as u64;
            let mut brownian = stream(seed, StreamKind::Brownian, p);
            s_row[0] = claim.spot;
            for k in 0..n_steps {
                let dw: f64 = {
                    let z: f64 = StandardNormal.sample(&mut brownian);
                    z * dt.sqrt()
                };
                dw_row[k] = dw;
                s_row[k + 1] = s_row[k] * (drift + vol * dw).exp();
            }

            match regime_mode {
                RegimeMode::FrozenNormal => beta_row.fill(Regime::Normal),
                RegimeMode::FrozenCrisis => beta_row.fill(Regime::Crisis),
                RegimeMode::Dynamic { params: rp } => {
                    let mut jumps = stream(seed, StreamKind::RegimeJumps, p);
                    let path = regime::sample_path(rp, horizon, &mut jumps);
                    let mut state = path.initial_state;
                    let mut next_jump = 0usize;
                    for (k, beta) in beta_row.iter_mut().enumerate() {
                        let t = k as f64 * dt;
                        while next_jump < path.jump_times.len() && path.jump_times[next_jump] <= t {
                            state = state.flip();
                            next_jump += 1;
                        }
                        *beta = state;
                    }
                }
            }

            let mut rng_i = stream(seed, StreamKind::DefaultInvestor, p);
            let mut rng_c = stream(seed, StreamKind::DefaultCounterparty, p);
            *default_slot = (
                sample_exponential(&mut rng_i, h_i),
                sample_exponential(&mut rng_c, h_c),
            );
        });

    Ok(PathBundle {
        grid,
        n_paths,
        stock,
        brownian_increments: increments,
        regime: regimes,
        default_times: defaults,
    })
}

/// Black-Scholes value, delta, and the Brownian integrand `sigma * S * delta`
/// of the reference valuation at `(t, stock)`, priced with the discount rate
/// and the market volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPoint {
    pub value: f64,
    pub delta: f64,
    pub z_hat: f64,
}

pub fn bs_price_delta(
    params: &MarketParams,
    claim: &ClaimSpec,
    t: f64,
    stock: f64,
) -> Result<BsPoint> {
    claim.validate()?;
    if t > claim.maturity || t < 0.0 {
        return Err(CoreError::TimeOutOfRange {
            t,
            horizon: claim.maturity,
        });
    }
    if stock <= 0.0 || stock.is_nan() {
        return Err(CoreError::InvalidParams(format!(
            "stock must be positive, got {stock}"
        )));
    }
    let tau = claim.maturity - t;
    let sigma = params.volatility;
    let r = params.discount_rate;
    let k = claim.strike;

    let (value, delta) = if tau == 0.0 {
        match claim.kind {
            OptionKind::Call => {
                let delta = if stock > k {
                    1.0
                } else if stock < k {
                    0.0
                } else {
                    0.5
                };
                ((stock - k).max(0.0), delta)
            }
            OptionKind::Put => {
                let delta = if stock < k {
                    -1.0
                } else if stock > k {
                    0.0
                } else {
                    -0.5
                };
                ((k - stock).max(0.0), delta)
            }
        }
    } else {
        let sqrt_tau = tau.sqrt();
        let d1 = ((stock / k).ln() + (r + 0.5 * sigma * sigma) * tau) / (sigma * sqrt_tau);
        let d2 = d1 - sigma * sqrt_tau;
        let df = (-r * tau).exp();
        match claim.kind {
            OptionKind::Call => (stock * norm_cdf(d1) - k * df * norm_cdf(d2), norm_cdf(d1)),
            OptionKind::Put => (
                k * df * norm_cdf(-d2) - stock * norm_cdf(-d1),
                norm_cdf(d1) - 1.0,
            ),
        }
    };
    Ok(BsPoint {
        value,
        delta,
        z_hat: sigma * stock * delta,
    })
}

/// Valuation-measure default intensities `(bond return - discount rate)` of
/// the investor and counterparty bonds.
pub fn default_intensities_q(params: &MarketParams) -> Result<(f64, f64)> {
    let h_i = params.bond_return_investor - params.discount_rate;
    let h_c = params.bond_return_counterparty - params.discount_rate;
    if h_i < 0.0 {
        return Err(CoreError::NegativeIntensity {
            mu: params.bond_return_investor,
            r_d: params.discount_rate,
        });
    }
    if h_c < 0.0 {
        return Err(CoreError::NegativeIntensity {
            mu: params.bond_return_counterparty,
            r_d: params.discount_rate,
        });
    }
    Ok((h_i, h_c))
}

/// Independent exponential default-time pairs under the valuation measure.
/// Zero intensity yields `+inf` (never defaults).
pub fn sample_default_times(
    params: &MarketParams,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let (h_i, h_c) = default_intensities_q(params)?;
    Ok((0..n_paths)
        .map(|p| {
            let mut rng_i = stream(seed, StreamKind::DefaultInvestor, p as u64);
            let mut rng_c = stream(seed, StreamKind::DefaultCounterparty, p as u64);
            (
                sample_exponential(&mut rng_i, h_i),
                sample_exponential(&mut rng_c, h_c),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefaultEvent {
    InvestorDefault,
    CounterpartyDefault,
}

/// Closeout value of the claim at a default, after collateral mitigation:
/// the reference value less the investor's loss on the uncollateralized
/// positive part, or plus the counterparty's loss on the negative part.
pub fn closeout_value(params: &MarketParams, v_hat: f64, event: DefaultEvent) -> f64 {
    let uncollateralized = (1.0 - params.collateralization) * v_hat;
    match event {
        DefaultEvent::InvestorDefault => v_hat - params.loss_investor * uncollateralized.max(0.0),
        DefaultEvent::CounterpartyDefault => {
            v_hat + params.loss_counterparty * (-uncollateralized).max(0.0)
        }
    }
}

/// Closeout adjustments relative to the reference value: `theta_i(v) = v +
/// theta_tilde_i(v)`.
pub fn theta_tilde(params: &MarketParams, v_hat: f64) -> (f64, f64) {
    let uncollateralized = (1.0 - params.collateralization) * v_hat;
    (
        -params.loss_investor * uncollateralized.max(0.0),
        params.loss_counterparty * (-uncollateralized).max(0.0),
    )
}

/// Share counts of a replicating portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PortfolioShares {
    pub stock: f64,
    pub bond_investor: f64,
    pub bond_counterparty: f64,
    pub funding: f64,
    pub repo: f64,
    pub collateral: f64,
}

/// Account prices of a replicating portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioPrices {
    pub stock: f64,
    pub bond_investor: f64,
    pub bond_counterparty: f64,
    pub funding: f64,
    pub repo: f64,
    pub collateral: f64,
}

/// Marks the portfolio: in crisis the short stock leg is frozen (contributes
/// zero) and the repo account is worthless.
pub fn portfolio_value(shares: &PortfolioShares, prices: &PortfolioPrices, beta: Regime) -> f64 {
    let beta_f = beta.as_f64();
    let short_frozen = if shares.stock < 0.0 { beta_f } else { 0.0 };
    (1.0 - short_frozen) * shares.stock * prices.stock
        + shares.bond_investor * prices.bond_investor
        + shares.bond_counterparty * prices.bond_counterparty
        + shares.funding * prices.funding
        + (1.0 - beta_f) * shares.repo * prices.repo
        - shares.collateral * prices.collateral
}
