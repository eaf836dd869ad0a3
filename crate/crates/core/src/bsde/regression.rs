//! Explicit backward Euler with conditional expectations estimated by
//! least-squares regression.
//!
//! At each backward step the Brownian loading is estimated from the
//! increment formula `E[u_{i+1} dW_i | S_i, beta_i] / dt` and the value from
//! `E[u_{i+1} + g(t_i, u_{i+1}, z_i) dt | S_i, beta_i]`, both regressed on a
//! polynomial basis in log-moneyness with separate coefficient vectors per
//! regime. At the initial step the regression collapses to the plain sample
//! mean per initial regime. All reductions run in a fixed path order, so the
//! result is a pure function of `(problem, config)`.

use super::{
    Backend, ReducedProblem, RegimeValue, SolverConfig, SolverDiagnostics, SolverOutput,
    StepDiagnostics,
};
use crate::error::CoreError;
use crate::numerics::{mean_se, solve_spd, winsorize};
use crate::regime::Regime;
use crate::Result;
use rayon::prelude::*;

pub fn solve_regression(problem: &ReducedProblem, config: &SolverConfig) -> Result<SolverOutput> {
    config.validate()?;
    problem.market.validate()?;
    let paths = problem.paths;
    if paths.n_paths != config.n_paths {
        return Err(CoreError::GridMismatch(format!(
            "bundle has {} paths, config expects {}",
            paths.n_paths, config.n_paths
        )));
    }
    let n_steps = paths.n_steps();
    let n_points = n_steps + 1;
    let n_paths = paths.n_paths;
    let dt = paths.dt();
    let dim = config.basis_degree + 1;

    let reference = problem.reference_grid()?;
    let (v_hat, z_hat) = (&reference.v_hat, &reference.z_hat);
    let mut u: Vec<f64> = problem.terminal_values();

    let mut u_mat = if config.store_paths {
        let mut m = vec![0.0f64; n_paths * n_points];
        for p in 0..n_paths {
            m[p * n_points + n_steps] = u[p];
        }
        Some(m)
    } else {
        None
    };
    let mut z_mat = if config.store_paths {
        Some(vec![0.0f64; n_paths * n_steps])
    } else {
        None
    };

    let mut per_step: Vec<StepDiagnostics> = vec![
        StepDiagnostics {
            t: 0.0,
            u_mean: 0.0,
            z_mean: 0.0,
            r2_value: None,
            clamped_targets: 0
        };
        n_steps
    ];
    let mut total_clamped = 0usize;
    let mut u0: Vec<RegimeValue> = Vec::new();

    let mut y_z = vec![0.0f64; n_paths];
    let mut y_u = vec![0.0f64; n_paths];
    let mut z_fit = vec![0.0f64; n_paths];
    let mut x_log = vec![0.0f64; n_paths];

    for i in (0..n_steps).rev() {
        let t_i = paths.grid[i];

        for (p, x) in x_log.iter_mut().enumerate() {
            *x = (paths.stock_at(p, i) / problem.claim.strike).ln();
        }

        // loading target: u_{i+1} dW_i / dt
        y_z.par_iter_mut().enumerate().for_each(|(p, y)| {
            *y = u[p] * paths.increment_at(p, i) / dt;
        });
        let clamped_z = winsorize(&mut y_z, config.clamp_quantile);

        let groups = group_by_regime(paths, i);
        fit_groups(&groups, &x_log, &y_z, &mut z_fit, dim, i)?;

        // value target: u_{i+1} + g(t_i, u_{i+1}, z_i) dt
        let market = problem.market;
        let driver = problem.driver;
        let u_ref = &u;
        let z_ref = &z_fit;
        let v_row: &[f64] = v_hat;
        let zh_row: &[f64] = z_hat;
        y_u.par_iter_mut()
            .enumerate()
            .try_for_each(|(p, y)| -> Result<()> {
                let beta = paths.regime_at(p, i);
                let g = driver.eval(
                    market,
                    t_i,
                    u_ref[p],
                    z_ref[p],
                    beta,
                    v_row[p * n_points + i],
                    zh_row[p * n_points + i],
                );
                if !g.is_finite() {
                    return Err(CoreError::NonFiniteDriver {
                        step: i,
                        path: p,
                        u: u_ref[p],
                        z: z_ref[p],
                    });
                }
                *y = u_ref[p] + g * dt;
                Ok(())
            })?;
        let clamped_u = winsorize(&mut y_u, config.clamp_quantile);
        total_clamped += clamped_z + clamped_u;

        let r2 = if i == 0 {
            // the state is degenerate at the initial time: plain means per
            // initial regime, which are also the reported initial values
            for (regime, members) in &groups {
                let ys: Vec<f64> = members.iter().map(|&p| y_u[p]).collect();
                let (mean, se) = mean_se(&ys);
                for &p in members {
                    // the y_z buffer doubles as fitted-value storage here
                    y_z[p] = mean;
                }
                u0.push(RegimeValue {
                    initial_regime: *regime,
                    value: mean,
                    std_error: se,
                    n_paths: members.len(),
                });
            }
            u.copy_from_slice(&y_z);
            None
        } else {
            let mut u_fit = vec![0.0f64; n_paths];
            fit_groups(&groups, &x_log, &y_u, &mut u_fit, dim, i)?;
            let r2 = pooled_r2(&y_u, &u_fit);
            u.copy_from_slice(&u_fit);
            Some(r2)
        };

        let (u_mean, _) = mean_se(&u);
        let (z_mean, _) = mean_se(&z_fit);
        per_step[i] = StepDiagnostics {
            t: t_i,
            u_mean,
            z_mean,
            r2_value: r2,
            clamped_targets: clamped_z + clamped_u,
        };

        if let Some(m) = u_mat.as_mut() {
            for p in 0..n_paths {
                m[p * n_points + i] = u[p];
            }
        }
        if let Some(m) = z_mat.as_mut() {
            for p in 0..n_paths {
                m[p * n_steps + i] = z_fit[p];
            }
        }
    }

    u0.sort_by_key(|v| v.initial_regime.index());
    Ok(SolverOutput {
        u0,
        per_step,
        diagnostics: SolverDiagnostics {
            backend: Backend::Regression,
            terminal_residual_mean: None,
            terminal_residual_variance: None,
            final_loss: None,
            total_clamped,
        },
        grid: paths.grid.clone(),
        n_paths,
        u_paths: u_mat,
        z_paths: z_mat,
    })
}

/// Paths grouped by their regime at grid point `i`, in fixed regime order.
fn group_by_regime(paths: &crate::market::PathBundle, i: usize) -> Vec<(Regime, Vec<usize>)> {
    let mut normal = Vec::new();
    let mut crisis = Vec::new();
    for p in 0..paths.n_paths {
        match paths.regime_at(p, i) {
            Regime::Normal => normal.push(p),
            Regime::Crisis => crisis.push(p),
        }
    }
    let mut groups = Vec::new();
    if !normal.is_empty() {
        groups.push((Regime::Normal, normal));
    }
    if !crisis.is_empty() {
        groups.push((Regime::Crisis, crisis));
    }
    groups
}

/// Polynomial fit per group, written into `fitted`. Groups too small to
/// support the basis fall back to their mean.
fn fit_groups(
    groups: &[(Regime, Vec<usize>)],
    x: &[f64],
    y: &[f64],
    fitted: &mut [f64],
    dim: usize,
    step: usize,
) -> Result<()> {
    for (regime, members) in groups {
        if members.len() < dim * 2 {
            let mean = members.iter().map(|&p| y[p]).sum::<f64>() / members.len() as f64;
            for &p in members {
                fitted[p] = mean;
            }
            continue;
        }
        // standardize the abscissa per group; same fitted values, far
        // better conditioning for the normal equations
        let n = members.len() as f64;
        let mx = members.iter().map(|&p| x[p]).sum::<f64>() / n;
        let var = members
            .iter()
            .map(|&p| (x[p] - mx) * (x[p] - mx))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        if sd == 0.0 {
            let mean = members.iter().map(|&p| y[p]).sum::<f64>() / n;
            for &p in members {
                fitted[p] = mean;
            }
            continue;
        }

        let mut xtx = vec![0.0f64; dim * dim];
        let mut xty = vec![0.0f64; dim];
        let mut basis = vec![0.0f64; dim];
        for &p in members {
            let s = (x[p] - mx) / sd;
            basis[0] = 1.0;
            for d in 1..dim {
                basis[d] = basis[d - 1] * s;
            }
            for a in 0..dim {
                for b in 0..=a {
                    xtx[a * dim + b] += basis[a] * basis[b];
                }
                xty[a] += basis[a] * y[p];
            }
        }
        for a in 0..dim {
            for b in (a + 1)..dim {
                xtx[a * dim + b] = xtx[b * dim + a];
            }
        }
        let coeffs = solve_spd(&xtx, &xty, dim).ok_or(CoreError::RankDeficient {
            step,
            regime: regime.index(),
        })?;
        for &p in members {
            let s = (x[p] - mx) / sd;
            let mut acc = coeffs[dim - 1];
            for d in (0..dim - 1).rev() {
                acc = acc * s + coeffs[d];
            }
            fitted[p] = acc;
        }
    }
    Ok(())
}

fn pooled_r2(y: &[f64], fitted: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(fitted).map(|(v, f)| (v - f) * (v - f)).sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::{DriverSpec, TerminalSpec};
    use crate::market::{simulate_paths_q, ClaimSpec, MarketParams, RegimeMode};

    fn bundle(
        market: &MarketParams,
        claim: &ClaimSpec,
        n_steps: usize,
        n_paths: usize,
        seed: u64,
    ) -> crate::market::PathBundle {
        simulate_paths_q(
            market,
            claim,
            &RegimeMode::FrozenNormal,
            n_steps,
            n_paths,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn zero_problem_is_exactly_zero() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let paths = bundle(&market, &claim, 10, 200, 3);
        let problem = ReducedProblem {
            driver: DriverSpec::Zero,
            terminal: TerminalSpec::Zero,
            market: &market,
            claim: &claim,
            paths: &paths,
            reference: None,
        };
        let config = SolverConfig {
            n_paths: 200,
            n_steps: 10,
            store_paths: true,
            ..Default::default()
        };
        let out = solve_regression(&problem, &config).unwrap();
        assert_eq!(out.primary_u0().value, 0.0);
        assert_eq!(out.primary_u0().std_error, 0.0);
        assert!(out.u_paths.unwrap().iter().all(|&v| v == 0.0));
        assert!(out.z_paths.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn validation_problem_recovers_reference_price() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let paths = bundle(&market, &claim, 50, 100_000, 7);
        let problem = ReducedProblem {
            driver: DriverSpec::Discount {
                rate: market.discount_rate,
            },
            terminal: TerminalSpec::Payoff { scale: 1.0 },
            market: &market,
            claim: &claim,
            paths: &paths,
            reference: None,
        };
        let config = SolverConfig {
            seed: 7,
            ..Default::default()
        };
        let out = solve_regression(&problem, &config).unwrap();
        let want = 0.060967366044;
        let got = out.primary_u0().value;
        assert!(
            (got - want).abs() / want < 0.01,
            "relative error {} (got {got})",
            (got - want).abs() / want
        );
    }

    #[test]
    fn validation_error_shrinks_with_paths() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let want = 0.060967366044;
        let mut errs = Vec::new();
        for n_paths in [10_000usize, 100_000] {
            let paths = bundle(&market, &claim, 50, n_paths, 11);
            let problem = ReducedProblem {
                driver: DriverSpec::Discount {
                    rate: market.discount_rate,
                },
                terminal: TerminalSpec::Payoff { scale: 1.0 },
                market: &market,
                claim: &claim,
                paths: &paths,
                reference: None,
            };
            let config = SolverConfig {
                n_paths,
                ..Default::default()
            };
            let out = solve_regression(&problem, &config).unwrap();
            errs.push((out.primary_u0().value - want).abs());
        }
        // within-noise monotonicity: allow the larger run one standard
        // error of slack
        let slack = 0.03 * want / (100_000f64).sqrt();
        assert!(errs[1] <= errs[0] + slack, "errors {errs:?}");
    }

    #[test]
    fn payoff_scaling_is_linear() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let paths = bundle(&market, &claim, 25, 20_000, 13);
        let solve_with = |scale: f64| {
            let problem = ReducedProblem {
                driver: DriverSpec::Discount {
                    rate: market.discount_rate,
                },
                terminal: TerminalSpec::Payoff { scale },
                market: &market,
                claim: &claim,
                paths: &paths,
                reference: None,
            };
            let config = SolverConfig {
                n_paths: 20_000,
                n_steps: 25,
                ..Default::default()
            };
            solve_regression(&problem, &config)
                .unwrap()
                .primary_u0()
                .value
        };
        let one = solve_with(1.0);
        let two = solve_with(2.0);
        assert!(
            (two - 2.0 * one).abs() / (2.0 * one) < 0.01,
            "one {one} two {two}"
        );
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let paths = bundle(&market, &claim, 20, 5_000, 19);
                let problem = ReducedProblem {
                    driver: DriverSpec::ReducedXva {
                        sign: crate::generators::Sign::Plus,
                    },
                    terminal: TerminalSpec::Zero,
                    market: &market,
                    claim: &claim,
                    paths: &paths,
                    reference: None,
                };
                let config = SolverConfig {
                    n_paths: 5_000,
                    n_steps: 20,
                    ..Default::default()
                };
                solve_regression(&problem, &config)
                    .unwrap()
                    .primary_u0()
                    .value
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn rejects_mismatched_bundle() {
        let market = MarketParams::benchmark();
        let claim = ClaimSpec::benchmark();
        let paths = bundle(&market, &claim, 5, 100, 1);
        let problem = ReducedProblem {
            driver: DriverSpec::Zero,
            terminal: TerminalSpec::Zero,
            market: &market,
            claim: &claim,
            paths: &paths,
            reference: None,
        };
        let config = SolverConfig {
            n_paths: 200,
            ..Default::default()
        };
        assert!(solve_regression(&problem, &config).is_err());
    }
}
