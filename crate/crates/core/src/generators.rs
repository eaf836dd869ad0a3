//! BSDE drivers.
//!
//! `eval_f` is the wealth-equation driver, `eval_f_tilde` the XVA driver,
//! and `eval_g_breve` the reduced driver with default risk absorbed through
//! the valuation-measure intensities and closeout adjustments. The minus
//! variants are defined by the reflection `f^-(p) = -f^+(-p)` acting on the
//! point (including the reference value), never on the output.
//!
//! Also here: the driver Lipschitz constant and the parameter checks
//! (no-arbitrage necessary conditions, the normal-regime rate band, and the
//! horizon-dependent well-posedness bounds).

use crate::market::{default_intensities_q, theta_tilde, MarketParams};
use crate::regime::Regime;
use serde::{Deserialize, Serialize};

/// Which side of a quantity is being priced: the seller's (`Plus`) or the
/// buyer's (`Minus`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Evaluation point of a driver. `level` is the value argument (wealth `v`
/// for `eval_f`, the adjustment for `eval_f_tilde`), `z` the Brownian
/// loading, `z_i`/`z_c` the default-martingale loadings, `v_hat`/`z_hat`
/// the reference valuation and its Brownian integrand (`z_hat` is only read
/// by the XVA and reduced drivers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorPoint {
    pub t: f64,
    pub level: f64,
    pub z: f64,
    pub z_i: f64,
    pub z_c: f64,
    pub beta: Regime,
    pub v_hat: f64,
    pub z_hat: f64,
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

/// Wealth-equation driver.
pub fn eval_f(params: &MarketParams, point: &GeneratorPoint, sign: Sign) -> f64 {
    match sign {
        Sign::Plus => eval_f_plus(params, point),
        Sign::Minus => -eval_f_plus(params, &reflect(point)),
    }
}

fn reflect(p: &GeneratorPoint) -> GeneratorPoint {
    GeneratorPoint {
        t: p.t,
        level: -p.level,
        z: -p.z,
        z_i: -p.z_i,
        z_c: -p.z_c,
        beta: p.beta,
        v_hat: -p.v_hat,
        z_hat: -p.z_hat,
    }
}

fn eval_f_plus(params: &MarketParams, p: &GeneratorPoint) -> f64 {
    let sigma = params.volatility;
    let r_d = params.discount_rate;
    let alpha = params.collateralization;
    // short stock leg frozen: indicator of a positive Brownian loading in
    // crisis, strict in z
    let ind = if p.z > 0.0 && p.beta.is_crisis() {
        1.0
    } else {
        0.0
    };
    let funding = p.level - ind / sigma * p.z + p.z_i + p.z_c - alpha * p.v_hat;
    let collateral = alpha * p.v_hat;
    -(params.funding_rate_lend * pos(funding) - params.funding_rate_borrow * neg(funding)
        + (r_d - params.repo_rate_borrow * (1.0 - ind)) / sigma * pos(p.z)
        - (r_d - params.repo_rate_lend * (1.0 - ind)) / sigma * neg(p.z)
        + params.collateral_rate_receive * pos(collateral)
        - params.collateral_rate_pay * neg(collateral)
        - r_d * p.z_i
        - r_d * p.z_c)
}

/// XVA driver. `point.level` is the adjustment, `point.z` its Brownian
/// loading; the combined loading `z + z_hat` drives the repo terms and the
/// frozen-short indicator.
pub fn eval_f_tilde(params: &MarketParams, point: &GeneratorPoint, sign: Sign) -> f64 {
    match sign {
        Sign::Plus => eval_f_tilde_plus(params, point),
        Sign::Minus => -eval_f_tilde_plus(params, &reflect(point)),
    }
}

fn eval_f_tilde_plus(params: &MarketParams, p: &GeneratorPoint) -> f64 {
    let sigma = params.volatility;
    let r_d = params.discount_rate;
    let alpha = params.collateralization;
    let x = p.z + p.z_hat;
    let ind = if x > 0.0 && p.beta.is_crisis() {
        1.0
    } else {
        0.0
    };
    let funding = p.level - ind / sigma * x + p.z_i + p.z_c + (1.0 - alpha) * p.v_hat;
    let collateral = alpha * p.v_hat;
    -(params.funding_rate_lend * pos(funding) - params.funding_rate_borrow * neg(funding)
        + (r_d - params.repo_rate_borrow * (1.0 - ind)) / sigma * pos(x)
        - (r_d - params.repo_rate_lend * (1.0 - ind)) / sigma * neg(x)
        + params.collateral_rate_receive * pos(collateral)
        - params.collateral_rate_pay * neg(collateral)
        - r_d * p.z_i
        - r_d * p.z_c)
        + r_d * p.v_hat
}

/// Reduced XVA driver: default risk enters through the intensities and the
/// closeout adjustments, leaving a Brownian-only equation.
#[allow(clippy::too_many_arguments)]
pub fn eval_g_breve(
    params: &MarketParams,
    t: f64,
    u: f64,
    z: f64,
    beta: Regime,
    v_hat: f64,
    z_hat: f64,
    sign: Sign,
) -> f64 {
    let h_i = params.bond_return_investor - params.discount_rate;
    let h_c = params.bond_return_counterparty - params.discount_rate;
    match sign {
        Sign::Plus => eval_g_breve_plus(params, h_i, h_c, t, u, z, beta, v_hat, z_hat),
        Sign::Minus => -eval_g_breve_plus(params, h_i, h_c, t, -u, -z, beta, -v_hat, -z_hat),
    }
}

#[allow(clippy::too_many_arguments)]
fn eval_g_breve_plus(
    params: &MarketParams,
    h_i: f64,
    h_c: f64,
    t: f64,
    u: f64,
    z: f64,
    beta: Regime,
    v_hat: f64,
    z_hat: f64,
) -> f64 {
    let (theta_i, theta_c) = theta_tilde(params, v_hat);
    let point = GeneratorPoint {
        t,
        level: u,
        z,
        z_i: theta_i - u,
        z_c: theta_c - u,
        beta,
        v_hat,
        z_hat,
    };
    h_i * (theta_i - u) + h_c * (theta_c - u) + eval_f_tilde_plus(params, &point)
}

/// Reduced driver value together with its almost-everywhere partial
/// derivatives in `u` and `z` (one-sided at the kinks).
#[derive(Debug, Clone, Copy)]
pub struct DriverSlope {
    pub value: f64,
    pub du: f64,
    pub dz: f64,
}

/// Same composition as [`eval_g_breve`] with analytic slopes; the shooting
/// backend needs them for its backward pass.
#[allow(clippy::too_many_arguments)]
pub fn g_breve_with_grad(
    params: &MarketParams,
    t: f64,
    u: f64,
    z: f64,
    beta: Regime,
    v_hat: f64,
    z_hat: f64,
    sign: Sign,
) -> DriverSlope {
    let h_i = params.bond_return_investor - params.discount_rate;
    let h_c = params.bond_return_counterparty - params.discount_rate;
    match sign {
        Sign::Plus => g_breve_plus_grad(params, h_i, h_c, t, u, z, beta, v_hat, z_hat),
        Sign::Minus => {
            let r = g_breve_plus_grad(params, h_i, h_c, t, -u, -z, beta, -v_hat, -z_hat);
            DriverSlope {
                value: -r.value,
                du: r.du,
                dz: r.dz,
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn g_breve_plus_grad(
    params: &MarketParams,
    h_i: f64,
    h_c: f64,
    t: f64,
    u: f64,
    z: f64,
    beta: Regime,
    v_hat: f64,
    z_hat: f64,
) -> DriverSlope {
    let sigma = params.volatility;
    let r_d = params.discount_rate;
    let value = eval_g_breve_plus(params, h_i, h_c, t, u, z, beta, v_hat, z_hat);

    let (theta_i, theta_c) = theta_tilde(params, v_hat);
    let x = z + z_hat;
    let ind = if x > 0.0 && beta.is_crisis() {
        1.0
    } else {
        0.0
    };
    let alpha = params.collateralization;
    let funding = u - ind / sigma * x + (theta_i - u) + (theta_c - u) + (1.0 - alpha) * v_hat;
    let s_b = if funding > 0.0 {
        params.funding_rate_lend
    } else {
        params.funding_rate_borrow
    };
    let repo_slope = if x > 0.0 {
        (r_d - params.repo_rate_borrow * (1.0 - ind)) / sigma
    } else {
        (r_d - params.repo_rate_lend * (1.0 - ind)) / sigma
    };
    // d f_tilde / du with the two default loadings substituted as
    // theta - u: the funding bracket contributes -s_b * (-1) and the r_d
    // z-terms contribute -2 r_d.
    let du = -h_i - h_c + s_b - 2.0 * r_d;
    let dz = s_b * ind / sigma - repo_slope;
    DriverSlope { value, du, dz }
}

/// Driver Lipschitz bound in `(v, z, z_i, z_c)` and the three per-case
/// constants behind the maximum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LipschitzBound {
    pub k: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

pub fn lipschitz_constant(params: &MarketParams) -> LipschitzBound {
    let s = params.volatility.min(1.0);
    let rf = params.funding_rate_borrow;
    let rd = params.discount_rate;
    let a1 = (rf + rd) / s;
    let a2 = (rf + rd).max((rd - params.repo_rate_lend).abs() / s);
    let a3 = ((rf + rd.max((rd - params.repo_rate_borrow).abs())) / s).max(rf + rd);
    let k = (rf + rd.max((rd - params.repo_rate_borrow).abs()))
        .max((rd - params.repo_rate_lend).abs())
        / s;
    LipschitzBound { k, a1, a2, a3 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckSeverity {
    /// Violations admit arbitrage; pricing refuses to run.
    Necessary,
    /// Sufficient no-arbitrage band for the normal regime; reported only.
    Sufficient,
    /// Horizon-dependent solvability bounds; reported only.
    WellPosedness,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub id: &'static str,
    pub description: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
    pub severity: CheckSeverity,
}

/// Outcome of the parameter checks. `passed` is the conjunction of all
/// items; `necessary_passed` restricts to the items whose violation admits
/// arbitrage.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub necessary_passed: bool,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    /// Aligned plain-text rendering, one line per item.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            let status = if item.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status}  [{:<14}] {:<26} lhs = {:>12.6}  rhs = {:>12.6}\n",
                match item.severity {
                    CheckSeverity::Necessary => "necessary",
                    CheckSeverity::Sufficient => "sufficient",
                    CheckSeverity::WellPosedness => "well-posedness",
                },
                item.id,
                item.lhs,
                item.rhs
            ));
        }
        out.push_str(&format!(
            "overall: {}  (necessary: {})\n",
            if self.passed { "PASS" } else { "FAIL" },
            if self.necessary_passed {
                "PASS"
            } else {
                "FAIL"
            }
        ));
        out
    }
}

/// Evaluates the no-arbitrage and well-posedness conditions at horizon `t`.
/// Failures are report items, never errors.
pub fn check_assumptions(params: &MarketParams, t: f64) -> CheckReport {
    let mut items = Vec::new();
    let mut push = |id: &'static str,
                    description: String,
                    lhs: f64,
                    rhs: f64,
                    passed: bool,
                    severity: CheckSeverity| {
        items.push(CheckItem {
            id,
            description,
            lhs,
            rhs,
            passed,
            severity,
        });
    };

    push(
        "funding_band",
        "funding lend rate <= funding borrow rate".into(),
        params.funding_rate_lend,
        params.funding_rate_borrow,
        params.funding_rate_lend <= params.funding_rate_borrow,
        CheckSeverity::Necessary,
    );
    // equality is the harmless boundary: shorting the bond then earns
    // exactly zero, and the valuation-measure intensities are zero rather
    // than negative
    let lhs = params.funding_rate_lend.max(params.discount_rate);
    let rhs = params
        .bond_return_investor
        .min(params.bond_return_counterparty);
    push(
        "bond_dominance",
        "max(funding lend, discount) <= min bond return".into(),
        lhs,
        rhs,
        lhs <= rhs,
        CheckSeverity::Necessary,
    );
    push(
        "repo_vs_funding",
        "repo lend rate <= funding borrow rate".into(),
        params.repo_rate_lend,
        params.funding_rate_borrow,
        params.repo_rate_lend <= params.funding_rate_borrow,
        CheckSeverity::Necessary,
    );

    push(
        "repo_band_lower",
        "repo lend <= funding lend (normal regime)".into(),
        params.repo_rate_lend,
        params.funding_rate_lend,
        params.repo_rate_lend <= params.funding_rate_lend,
        CheckSeverity::Sufficient,
    );
    push(
        "repo_band_upper",
        "funding lend <= repo borrow (normal regime)".into(),
        params.funding_rate_lend,
        params.repo_rate_borrow,
        params.funding_rate_lend <= params.repo_rate_borrow,
        CheckSeverity::Sufficient,
    );

    let bound_i = 1.0 / (5.0 * t.powf(1.5));
    push(
        "horizon_funding",
        "funding borrow rate < 1 / (5 sqrt(T^3))".into(),
        params.funding_rate_borrow,
        bound_i,
        params.funding_rate_borrow < bound_i,
        CheckSeverity::WellPosedness,
    );
    let k = lipschitz_constant(params).k;
    let bound_ii = 1.0 / (5.0 * t);
    push(
        "horizon_lipschitz",
        "driver Lipschitz constant < 1 / (5 T)".into(),
        k,
        bound_ii,
        k < bound_ii,
        CheckSeverity::WellPosedness,
    );
    // identify the default-arrival rates with the valuation-measure
    // intensities; falls back to a failing item when those are negative
    let (h_i, h_c) = default_intensities_q(params).unwrap_or((f64::NAN, f64::NAN));
    let spread = params.funding_rate_borrow - params.discount_rate;
    let bound_iii = h_i.sqrt().min(h_c.sqrt()) / (5.0 * t);
    push(
        "horizon_spread",
        "funding spread < min sqrt intensity / (5 T)".into(),
        spread,
        bound_iii,
        spread < bound_iii,
        CheckSeverity::WellPosedness,
    );

    let passed = items.iter().all(|i| i.passed);
    let necessary_passed = items
        .iter()
        .filter(|i| i.severity == CheckSeverity::Necessary)
        .all(|i| i.passed);
    CheckReport {
        passed,
        necessary_passed,
        items,
    }
}
