//! Orchestration: assembles market, regime, generators, and solver into
//! XVA prices, hedge-ratio extraction, and parameter sweeps.

use crate::bsde::{
    self, DriverSpec, ReducedProblem, SolverConfig, SolverDiagnostics, TerminalSpec,
};
use crate::error::CoreError;
use crate::generators::{check_assumptions, CheckReport, Sign};
use crate::market::{bs_price_delta, simulate_paths_q, ClaimSpec, MarketParams, RegimeMode};
use crate::regime::Regime;
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One priced adjustment with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct XvaLeg {
    pub value: f64,
    pub std_error: f64,
}

/// Full pricing report: both adjustment sides, the reference value, an echo
/// of every input, the assumption check, and solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct XvaReport {
    pub xva_plus: XvaLeg,
    pub xva_minus: XvaLeg,
    pub bs_reference: f64,
    pub regime_mode: String,
    pub seed: u64,
    pub market: MarketParams,
    pub claim: ClaimSpec,
    pub regime: RegimeMode,
    pub solver: SolverConfig,
    pub check: CheckReport,
    pub warnings: Vec<String>,
    pub diagnostics_plus: SolverDiagnostics,
    pub diagnostics_minus: SolverDiagnostics,
}

/// Prices both XVA sides for the claim under the given regime mode.
///
/// The necessary no-arbitrage conditions gate execution; failures of the
/// sufficient band or the well-posedness bounds only produce warnings in the
/// report. The buyer's side is solved as its own problem rather than by
/// reflecting the seller's solution, since the reflection acts on driver
/// inputs, not outputs.
pub fn price_xva(
    market: &MarketParams,
    claim: &ClaimSpec,
    regime_mode: &RegimeMode,
    solver: &SolverConfig,
) -> Result<XvaReport> {
    claim.validate()?;
    solver.validate()?;
    let bundle = simulate_paths_q(
        market,
        claim,
        regime_mode,
        solver.n_steps,
        solver.n_paths,
        solver.seed,
    )?;
    let reference = bsde::compute_reference_grid(market, claim, &bundle)?;
    price_xva_on_bundle(market, claim, regime_mode, solver, &bundle, &reference)
}

/// Pricing over an already simulated bundle with its reference grid. The
/// sweep uses this to share paths across grid points (common random
/// numbers).
pub fn price_xva_on_bundle(
    market: &MarketParams,
    claim: &ClaimSpec,
    regime_mode: &RegimeMode,
    solver: &SolverConfig,
    bundle: &crate::market::PathBundle,
    reference: &bsde::ReferenceGrid,
) -> Result<XvaReport> {
    market.validate()?;
    claim.validate()?;
    solver.validate()?;

    let check = check_assumptions(market, claim.maturity);
    if !check.necessary_passed {
        let failed: Vec<&str> = check
            .items
            .iter()
            .filter(|i| !i.passed && i.severity == crate::generators::CheckSeverity::Necessary)
            .map(|i| i.id)
            .collect();
        return Err(CoreError::AssumptionViolation(failed.join(", ")));
    }
    let warnings: Vec<String> = check
        .items
        .iter()
        .filter(|i| !i.passed)
        .map(|i| format!("{} violated: lhs {} rhs {}", i.id, i.lhs, i.rhs))
        .collect();

    let initial = regime_mode.initial_state();
    let mut legs = Vec::with_capacity(2);
    let mut diags = Vec::with_capacity(2);
    for sign in [Sign::Plus, Sign::Minus] {
        let problem = ReducedProblem {
            driver: DriverSpec::ReducedXva { sign },
            terminal: TerminalSpec::Zero,
            market,
            claim,
            paths: bundle,
            reference: Some(reference),
        };
        let out = bsde::solve(&problem, solver)?;
        let v = out.u0_for(initial).ok_or_else(|| {
            CoreError::GridMismatch("no initial-regime estimate in solver output".into())
        })?;
        legs.push(XvaLeg {
            value: v.value,
            std_error: v.std_error,
        });
        diags.push(out.diagnostics);
    }

    let bs0 = bs_price_delta(market, claim, 0.0, claim.spot)?;
    Ok(XvaReport {
        xva_plus: legs[0],
        xva_minus: legs[1],
        bs_reference: bs0.value,
        regime_mode: regime_mode.label().to_string(),
        seed: solver.seed,
        market: *market,
        claim: *claim,
        regime: regime_mode.clone(),
        solver: *solver,
        check,
        warnings,
        diagnostics_plus: diags[0].clone(),
        diagnostics_minus: diags[1].clone(),
    })
}

/// Sweep axis: which single input varies across the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Collateralization level.
    Alpha,
    /// Funding borrow rate.
    FundingBorrow,
    /// Expected normal-regime length in years (dynamic regime only); the
    /// normal holding rate becomes `1 / value`.
    MeanNormalRegime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub regime_mode: RegimeMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(CoreError::InvalidParams(
                "sweep grid must be non-empty".into(),
            ));
        }
        for &v in &self.grid {
            match self.axis {
                SweepAxis::Alpha => {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(CoreError::InvalidParams(format!(
                            "alpha grid value {v} outside [0,1]"
                        )));
                    }
                }
                SweepAxis::FundingBorrow | SweepAxis::MeanNormalRegime => {
                    if v <= 0.0 || v.is_nan() {
                        return Err(CoreError::InvalidParams(format!(
                            "grid value {v} must be positive"
                        )));
                    }
                }
            }
        }
        if self.axis == SweepAxis::MeanNormalRegime
            && !matches!(self.regime_mode, RegimeMode::Dynamic { .. })
        {
            return Err(CoreError::InvalidParams(
                "mean-normal-regime sweeps require the dynamic regime mode".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub regime_mode: String,
    pub xva_plus: f64,
    pub se_plus: f64,
    pub xva_minus: f64,
    pub se_minus: f64,
    pub v_hat0: f64,
    /// `ok`, or the error text of a failed point.
    pub status: String,
}

/// One `price_xva` per grid point with common random numbers: every point
/// reuses the same seed, so curves differ only through the swept input.
/// Failed points are marked in their row instead of aborting the sweep.
/// Rows come back in grid order regardless of the execution schedule.
pub fn sweep(
    spec: &SweepSpec,
    market: &MarketParams,
    claim: &ClaimSpec,
    solver: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;

    // neither the collateralization nor the funding borrow rate enters the
    // simulation, so those axes share one bundle and reference grid across
    // all points; the regime-length axis re-simulates per point
    let shared = match spec.axis {
        SweepAxis::Alpha | SweepAxis::FundingBorrow => {
            let bundle = crate::market::simulate_paths_q(
                market,
                claim,
                &spec.regime_mode,
                solver.n_steps,
                solver.n_paths,
                solver.seed,
            )?;
            let reference = bsde::compute_reference_grid(market, claim, &bundle)?;
            Some((bundle, reference))
        }
        SweepAxis::MeanNormalRegime => None,
    };

    let rows: Vec<SweepRow> = spec
        .grid
        .par_iter()
        .map(|&axis_value| {
            let mut point_market = *market;
            let mut point_mode = spec.regime_mode.clone();
            match spec.axis {
                SweepAxis::Alpha => point_market.collateralization = axis_value,
                SweepAxis::FundingBorrow => point_market.funding_rate_borrow = axis_value,
                SweepAxis::MeanNormalRegime => {
                    if let RegimeMode::Dynamic { params } = &mut point_mode {
                        params.rate_normal = 1.0 / axis_value;
                    }
                }
            }
            let priced = match &shared {
                Some((bundle, reference)) => price_xva_on_bundle(
                    &point_market,
                    claim,
                    &point_mode,
                    solver,
                    bundle,
                    reference,
                ),
                None => price_xva(&point_market, claim, &point_mode, solver),
            };
            match priced {
                Ok(report) => SweepRow {
                    axis_value,
                    regime_mode: report.regime_mode.clone(),
                    xva_plus: report.xva_plus.value,
                    se_plus: report.xva_plus.std_error,
                    xva_minus: report.xva_minus.value,
                    se_minus: report.xva_minus.std_error,
                    v_hat0: report.bs_reference,
                    status: "ok".into(),
                },
                Err(e) => SweepRow {
                    axis_value,
                    regime_mode: point_mode.label().to_string(),
                    xva_plus: f64::NAN,
                    se_plus: f64::NAN,
                    xva_minus: f64::NAN,
                    se_minus: f64::NAN,
                    v_hat0: f64::NAN,
                    status: format!("failed: {e}").replace(',', ";"),
                },
            }
        })
        .collect();
    Ok(rows)
}

/// Writes sweep rows as CSV.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(
        w,
        "axis_value,regime_mode,xva_plus,se_plus,xva_minus,se_minus,v_hat0,status"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.axis_value,
            r.regime_mode,
            r.xva_plus,
            r.se_plus,
            r.xva_minus,
            r.se_minus,
            r.v_hat0,
            r.status
        )?;
    }
    Ok(())
}

/// Emits a gnuplot script plotting the seller adjustment of a sweep CSV.
pub fn write_sweep_plot_script<W: std::io::Write>(csv_name: &str, mut w: W) -> Result<()> {
    writeln!(w, "set datafile separator ','")?;
    writeln!(w, "set key left top")?;
    writeln!(w, "set xlabel 'axis value'")?;
    writeln!(w, "set ylabel 'seller adjustment'")?;
    writeln!(w, "set grid")?;
    writeln!(
        w,
        "plot '{csv_name}' using 1:3 skip 1 with linespoints title 'xva_plus', \\"
    )?;
    writeln!(
        w,
        "     '{csv_name}' using 1:5 skip 1 with linespoints title 'xva_minus'"
    )?;
    Ok(())
}

/// Stock hedge implied by a Brownian loading, or the frozen marker when the
/// crisis short-sale ban leaves no admissible position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StockHedge {
    Shares {
        shares: f64,
    },
    /// A negative loading in crisis is unattainable: the short leg is
    /// frozen and maps to a zero loading.
    Frozen,
}

/// Inverts the stock-account loading `z = (1 - beta 1{shares<0}) sigma
/// shares S`. Requires `stock > 0`.
pub fn stock_hedge_from_z(z: f64, stock: f64, sigma: f64, beta: Regime) -> StockHedge {
    debug_assert!(stock > 0.0 && sigma > 0.0);
    if z == 0.0 {
        return StockHedge::Shares { shares: 0.0 };
    }
    if beta.is_crisis() && z < 0.0 {
        return StockHedge::Frozen;
    }
    StockHedge::Shares {
        shares: z / (sigma * stock),
    }
}

/// Inverts the bond loadings `z_i = -shares_i * price_i`. Requires positive
/// bond prices.
pub fn bond_hedges_from_z(z_i: f64, z_c: f64, price_i: f64, price_c: f64) -> (f64, f64) {
    debug_assert!(price_i > 0.0 && price_c > 0.0);
    (-z_i / price_i, -z_c / price_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regime::RegimeParams;

    fn small_solver(seed: u64) -> SolverConfig {
        SolverConfig {
            n_paths: 20_000,
            n_steps: 25,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_market_prices_to_zero() {
        let market = MarketParams::all_equal_rates(0.01);
        let claim = ClaimSpec::benchmark();
        for mode in [
            RegimeMode::FrozenNormal,
            RegimeMode::FrozenCrisis,
            RegimeMode::Dynamic {
                params: RegimeParams::new(1.0 / 1.39, 1.0 / 0.99, Regime::Normal).unwrap(),
            },
        ] {
            let report = price_xva(&market, &claim, &mode, &small_solver(2)).unwrap();
            let tol_plus = 3.0 * report.xva_plus.std_error;
            let tol_minus = 3.0 * report.xva_minus.std_error;
            assert!(
                report.xva_plus.value.abs() <= tol_plus.max(1e-12),
                "{} plus {}",
                mode.label(),
                report.xva_plus.value
            );
            assert!(
                report.xva_minus.value.abs() <= tol_minus.max(1e-12),
                "{} minus {}",
                mode.label(),
                report.xva_minus.value
            );
        }
    }

    #[test]
    fn full_collateral_makes_losses_irrelevant() {
        let mut market = MarketParams::benchmark();
        market.collateralization = 1.0;
        let claim = ClaimSpec::benchmark();
        let a = price_xva(&market, &claim, &RegimeMode::FrozenNormal, &small_solver(3)).unwrap();
        market.loss_investor = 0.0;
        market.loss_counterparty = 0.1;
        let b = price_xva(&market, &claim, &RegimeMode::FrozenNormal, &small_solver(3)).unwrap();
        assert_eq!(a.xva_plus.value.to_bits(), b.xva_plus.value.to_bits());
        assert_eq!(a.xva_minus.value.to_bits(), b.xva_minus.value.to_bits());
    }

    #[test]
    fn necessary_violation_refuses_to_price() {
        let mut market = MarketParams::benchmark();
        market.funding_rate_lend = 0.08; // above the borrow rate
        let claim = ClaimSpec::benchmark();
        let err = price_xva(&market, &claim, &RegimeMode::FrozenNormal, &small_solver(1));
        assert!(matches!(err, Err(CoreError::AssumptionViolation(_))));
    }

    #[test]
    fn report_echoes_inputs_and_is_serializable() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let report =
            price_xva(&market, &claim, &RegimeMode::FrozenNormal, &small_solver(4)).unwrap();
        assert_eq!(report.market, market);
        assert_eq!(report.claim, claim);
        assert_eq!(report.seed, 4);
        assert!(report.xva_plus.std_error >= 0.0);
        assert!(report.xva_minus.std_error >= 0.0);
        let json = serde_json::to_string_pretty(&report).unwrap();
        assert!(json.contains("\"bs_reference\""));
        assert!(json.contains("\"regime_mode\": \"frozen-normal\""));
    }

    #[test]
    fn alpha_sweep_on_degenerate_market_is_flat_zero() {
        let market = MarketParams::all_equal_rates(0.01);
        let claim = ClaimSpec::benchmark();
        let spec = SweepSpec {
            axis: SweepAxis::Alpha,
            grid: vec![0.0, 1.0],
            regime_mode: RegimeMode::FrozenNormal,
        };
        let rows = sweep(&spec, &market, &claim, &small_solver(5)).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert_eq!(row.status, "ok");
            assert!(row.xva_plus.abs() <= (3.0 * row.se_plus).max(1e-12));
        }
    }

    #[test]
    fn sweep_marks_failed_points() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        // funding borrow below funding lend makes the necessary check fail
        let spec = SweepSpec {
            axis: SweepAxis::FundingBorrow,
            grid: vec![0.05, 0.01],
            regime_mode: RegimeMode::FrozenNormal,
        };
        let rows = sweep(&spec, &market, &claim, &small_solver(6)).unwrap();
        assert_eq!(rows[0].status, "ok");
        assert!(rows[1].status.starts_with("failed:"), "{}", rows[1].status);
        assert!(rows[1].xva_plus.is_nan());
    }

    #[test]
    fn sweep_csv_reproducible_byte_for_byte() {
        let market = MarketParams::all_equal_rates(0.01);
        let claim = ClaimSpec::benchmark();
        let spec = SweepSpec {
            axis: SweepAxis::Alpha,
            grid: vec![0.0, 0.5],
            regime_mode: RegimeMode::FrozenNormal,
        };
        let solver = SolverConfig {
            n_paths: 5_000,
            n_steps: 10,
            seed: 8,
            ..Default::default()
        };
        let render = || {
            let rows = sweep(&spec, &market, &claim, &solver).unwrap();
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn hedge_extraction() {
        assert_eq!(
            stock_hedge_from_z(0.0, 1.0, 0.3, Regime::Crisis),
            StockHedge::Shares { shares: 0.0 }
        );
        match stock_hedge_from_z(0.03, 1.0, 0.3, Regime::Normal) {
            StockHedge::Shares { shares } => assert!((shares - 0.1).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            stock_hedge_from_z(-0.03, 1.0, 0.3, Regime::Crisis),
            StockHedge::Frozen
        );
        match stock_hedge_from_z(0.03, 1.0, 0.3, Regime::Crisis) {
            StockHedge::Shares { shares } => assert!((shares - 0.1).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }

        let (xi_i, xi_c) = bond_hedges_from_z(0.0, -0.5, 1.0, 1.0);
        assert_eq!(xi_i, 0.0);
        assert_eq!(xi_c, 0.5);
        // positive loading means a short bond position
        let (xi_i, _) = bond_hedges_from_z(0.25, 0.0, 0.5, 1.0);
        assert!(xi_i < 0.0);
    }
}
