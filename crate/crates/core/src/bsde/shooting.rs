//! Shooting backend: the initial value (one scalar per initial regime) and
//! the Brownian loading surface `z(t, log-moneyness, regime)` are trainable;
//! the value is rolled forward by Euler with the reduced driver and the
//! squared terminal mismatch is minimized by Adam over seed-derived
//! mini-batches.

use super::net::{Adam, NetShape};
use super::{
    Backend, ReducedProblem, RegimeValue, SolverConfig, SolverDiagnostics, SolverOutput,
    StepDiagnostics,
};
use crate::error::CoreError;
use crate::numerics::mean_se;
use crate::regime::Regime;
use crate::rng::{stream, StreamKind};
use crate::Result;
use rand::Rng;
use rayon::prelude::*;

const GRAD_CHUNK: usize = 64;
// learning rate decays linearly to this fraction of the initial step size,
// which damps the stochastic wander of the trained scalars late in training
const FINAL_LR_FRACTION: f64 = 0.01;

struct Workspace {
    activations: Vec<f64>,
    z: Vec<f64>,
    du_slope: Vec<f64>,
    dz_slope: Vec<f64>,
}

impl Workspace {
    fn new(shape: &NetShape, n_steps: usize) -> Self {
        Workspace {
            activations: vec![0.0; shape.activation_len() * n_steps],
            z: vec![0.0; n_steps],
            du_slope: vec![0.0; n_steps],
            dz_slope: vec![0.0; n_steps],
        }
    }
}

pub fn solve_shooting(problem: &ReducedProblem, config: &SolverConfig) -> Result<SolverOutput> {
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
    let horizon = paths.horizon();

    let reference = problem.reference_grid()?;
    let (v_hat, z_hat) = (&reference.v_hat, &reference.z_hat);
    let terminal = problem.terminal_values();

    // initial regimes present in the pool, in fixed order
    let mut init_regimes: Vec<Regime> = Vec::new();
    for r in [Regime::Normal, Regime::Crisis] {
        if (0..n_paths).any(|p| paths.regime_at(p, 0) == r) {
            init_regimes.push(r);
        }
    }
    let regime_slot = |r: Regime| init_regimes.iter().position(|&x| x == r).unwrap();

    let shape = NetShape::new(3, config.shooting.width, config.shooting.hidden_layers);
    let n_u0 = init_regimes.len();
    let n_params = n_u0 + shape.n_params();
    let mut params = vec![0.0f64; n_params];
    {
        let mut rng = stream(config.seed, StreamKind::NetInit, 0);
        shape.init_params(&mut rng, &mut params[n_u0..]);
    }

    let mut adam = Adam::new(n_params);
    let mut batch_rng = stream(config.seed, StreamKind::BatchSelection, 0);
    let batch_size = config.shooting.batch_size.min(n_paths).max(1);
    let iterations = config.shooting.iterations;
    let mut final_loss = 0.0f64;

    let forward_backward =
        |params: &[f64], p: usize, ws: &mut Workspace, grad: Option<(&mut [f64], f64)>| -> f64 {
            let act_len = shape.activation_len();
            let beta0 = paths.regime_at(p, 0);
            let mut u = params[regime_slot(beta0)];
            for i in 0..n_steps {
                let t = paths.grid[i];
                let beta = paths.regime_at(p, i);
                let input = [
                    t / horizon,
                    (paths.stock_at(p, i) / problem.claim.strike).ln(),
                    beta.as_f64(),
                ];
                let z = shape.forward(
                    &params[n_u0..],
                    &input,
                    &mut ws.activations[i * act_len..(i + 1) * act_len],
                );
                ws.z[i] = z;
                let slope = problem.driver.eval_with_grad(
                    problem.market,
                    t,
                    u,
                    z,
                    beta,
                    v_hat[p * n_points + i],
                    z_hat[p * n_points + i],
                );
                ws.du_slope[i] = slope.du;
                ws.dz_slope[i] = slope.dz;
                u = u - slope.value * dt + z * paths.increment_at(p, i);
            }
            let residual = u - terminal[p];

            if let Some((grad, weight)) = grad {
                let mut d_u = 2.0 * residual * weight;
                for i in (0..n_steps).rev() {
                    let d_z = d_u * (-ws.dz_slope[i] * dt + paths.increment_at(p, i));
                    shape.backward(
                        &params[n_u0..],
                        &ws.activations[i * act_len..(i + 1) * act_len],
                        d_z,
                        &mut grad[n_u0..],
                    );
                    d_u *= 1.0 - ws.du_slope[i] * dt;
                }
                grad[regime_slot(paths.regime_at(p, 0))] += d_u;
            }
            residual
        };

    for iter in 0..iterations {
        let batch: Vec<usize> = (0..batch_size)
            .map(|_| batch_rng.random_range(0..n_paths))
            .collect();
        let weight = 1.0 / batch_size as f64;

        // fixed chunking keeps the gradient reduction order independent of
        // the worker count
        let partials: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut ws = Workspace::new(&shape, n_steps);
                let mut grad = vec![0.0f64; n_params];
                let mut loss = 0.0f64;
                for &p in chunk {
                    let residual = forward_backward(&params, p, &mut ws, Some((&mut grad, weight)));
                    loss += residual * residual * weight;
                }
                (loss, grad)
            })
            .collect();

        let mut grad = vec![0.0f64; n_params];
        let mut loss = 0.0f64;
        for (l, g) in &partials {
            loss += l;
            for (gi, pi) in grad.iter_mut().zip(g) {
                *gi += pi;
            }
        }
        if !loss.is_finite() {
            return Err(CoreError::SolverDiverged {
                iteration: iter,
                loss,
            });
        }
        final_loss = loss;

        let progress = iter as f64 / iterations.max(1) as f64;
        let lr = config.shooting.step_size
            * (FINAL_LR_FRACTION + (1.0 - FINAL_LR_FRACTION) * (1.0 - progress));
        adam.step(&mut params, &grad, lr);
    }

    // full-pool evaluation with the trained parameters
    let act_len = shape.activation_len();
    let store = config.store_paths;
    let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut ws = Workspace::new(&shape, n_steps);
            let residual = forward_backward(&params, p, &mut ws, None);
            let _ = act_len;
            let mut u_row = Vec::new();
            if store {
                // rebuild the value trajectory from the stored loadings
                u_row = vec![0.0; n_points];
                let mut u = params[regime_slot(paths.regime_at(p, 0))];
                u_row[0] = u;
                for i in 0..n_steps {
                    let t = paths.grid[i];
                    let slope = problem.driver.eval_with_grad(
                        problem.market,
                        t,
                        u,
                        ws.z[i],
                        paths.regime_at(p, i),
                        v_hat[p * n_points + i],
                        z_hat[p * n_points + i],
                    );
                    u = u - slope.value * dt + ws.z[i] * paths.increment_at(p, i);
                    u_row[i + 1] = u;
                }
            }
            (u_row, ws.z.clone(), residual)
        })
        .collect();

    let residuals: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (res_mean, _) = mean_se(&residuals);
    let res_var = if n_paths > 1 {
        residuals
            .iter()
            .map(|r| (r - res_mean) * (r - res_mean))
            .sum::<f64>()
            / (n_paths as f64 - 1.0)
    } else {
        0.0
    };

    // the reported error combines the pool-mean Monte-Carlo error with the
    // residual-mean magnitude, a proxy for remaining optimization bias
    let mc_se = (res_var / n_paths as f64).sqrt();
    let u0: Vec<RegimeValue> = init_regimes
        .iter()
        .map(|&r| {
            let count = (0..n_paths).filter(|&p| paths.regime_at(p, 0) == r).count();
            RegimeValue {
                initial_regime: r,
                value: params[regime_slot(r)],
                std_error: mc_se + res_mean.abs(),
                n_paths: count,
            }
        })
        .collect();

    let mut per_step = Vec::with_capacity(n_steps);
    for i in 0..n_steps {
        let z_mean = rows.iter().map(|r| r.1[i]).sum::<f64>() / n_paths as f64;
        let u_mean = if store {
            rows.iter().map(|r| r.0[i]).sum::<f64>() / n_paths as f64
        } else {
            f64::NAN
        };
        per_step.push(StepDiagnostics {
            t: paths.grid[i],
            u_mean,
            z_mean,
            r2_value: None,
            clamped_targets: 0,
        });
    }

    let (u_paths, z_paths) = if store {
        let mut u_mat = vec![0.0f64; n_paths * n_points];
        let mut z_mat = vec![0.0f64; n_paths * n_steps];
        for (p, row) in rows.iter().enumerate() {
            u_mat[p * n_points..(p + 1) * n_points].copy_from_slice(&row.0);
            z_mat[p * n_steps..(p + 1) * n_steps].copy_from_slice(&row.1);
        }
        (Some(u_mat), Some(z_mat))
    } else {
        (None, None)
    };

    Ok(SolverOutput {
        u0,
        per_step,
        diagnostics: SolverDiagnostics {
            backend: Backend::Shooting,
            terminal_residual_mean: Some(res_mean),
            terminal_residual_variance: Some(res_var),
            final_loss: Some(final_loss),
            total_clamped: 0,
        },
        grid: paths.grid.clone(),
        n_paths,
        u_paths,
        z_paths,
    })
}
