//! The two-state market regime process: an alternating renewal process
//! switching between a normal state (0) and a crisis state (1), with
//! independent exponential holding times in each state.

use crate::error::CoreError;
use crate::numerics::ln_factorial;
use crate::rng::{sample_exponential, stream, StreamKind};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Market state. `Normal` is the calm regime, `Crisis` the stressed one in
/// which the repo market is frozen and short sales are banned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[repr(u8)]
pub enum Regime {
    Normal = 0,
    Crisis = 1,
}

impl Regime {
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Regime::Normal),
            1 => Ok(Regime::Crisis),
            other => Err(CoreError::InvalidParams(format!(
                "regime state must be 0 or 1, got {other}"
            ))),
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Regime::Normal => Regime::Crisis,
            Regime::Crisis => Regime::Normal,
        }
    }

    pub fn is_crisis(self) -> bool {
        self == Regime::Crisis
    }

    /// Indicator value used in the account and generator formulas.
    pub fn as_f64(self) -> f64 {
        self.index() as f64
    }
}

/// Exponential holding-time rates of the regime process, per year.
///
/// These are rate parameters: the expected sojourn in the normal state is
/// `1 / rate_normal` years. Estimates published as mean lengths convert via
/// `rate = 1 / mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub rate_normal: f64,
    pub rate_crisis: f64,
    pub initial_state: Regime,
}

impl RegimeParams {
    pub fn new(rate_normal: f64, rate_crisis: f64, initial_state: Regime) -> Result<Self> {
        let p = Self {
            rate_normal,
            rate_crisis,
            initial_state,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_normal > 0.0 && self.rate_normal.is_finite()) {
            return Err(CoreError::InvalidParams(format!(
                "rate_normal must be positive and finite, got {}",
                self.rate_normal
            )));
        }
        if !(self.rate_crisis > 0.0 && self.rate_crisis.is_finite()) {
            return Err(CoreError::InvalidParams(format!(
                "rate_crisis must be positive and finite, got {}",
                self.rate_crisis
            )));
        }
        Ok(())
    }

    /// Holding-time rate of the given state.
    pub fn rate_of(&self, state: Regime) -> f64 {
        match state {
            Regime::Normal => self.rate_normal,
            Regime::Crisis => self.rate_crisis,
        }
    }
}

/// One realized trajectory of the regime process on `[0, horizon]`,
/// represented by its strictly increasing switch times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePath {
    pub initial_state: Regime,
    /// Switch times in years, strictly increasing, all `<= horizon`.
    pub jump_times: Vec<f64>,
    pub horizon: f64,
}

impl RegimePath {
    fn check_time(&self, t: f64) -> Result<()> {
        if t < 0.0 || t > self.horizon || !t.is_finite() {
            return Err(CoreError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

/// Simulates one regime path. Holding times are drawn by inversion from the
/// stream keyed by `(seed, RegimeJumps, 0)`; identical inputs give an
/// identical path.
pub fn simulate_regime_path(params: &RegimeParams, horizon: f64, seed: u64) -> Result<RegimePath> {
    params.validate()?;
    if horizon < 0.0 || !horizon.is_finite() {
        return Err(CoreError::InvalidParams(format!(
            "horizon must be >= 0, got {horizon}"
        )));
    }
    let mut rng = stream(seed, StreamKind::RegimeJumps, 0);
    Ok(sample_path(params, horizon, &mut rng))
}

/// Simulates `n_paths` independent regime paths. Path `p` draws from its own
/// stream `(seed, RegimeJumps, p)`, so the result is independent of how the
/// work is scheduled across threads.
pub fn simulate_regime_paths(
    params: &RegimeParams,
    horizon: f64,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<RegimePath>> {
    params.validate()?;
    if horizon < 0.0 || !horizon.is_finite() {
        return Err(CoreError::InvalidParams(format!(
            "horizon must be >= 0, got {horizon}"
        )));
    }
    Ok((0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, StreamKind::RegimeJumps, p as u64);
            sample_path(params, horizon, &mut rng)
        })
        .collect())
}

pub(crate) fn sample_path(
    params: &RegimeParams,
    horizon: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> RegimePath {
    let mut jump_times = Vec::new();
    let mut state = params.initial_state;
    let mut t = 0.0;
    loop {
        t += sample_exponential(rng, params.rate_of(state));
        if t > horizon {
            break;
        }
        jump_times.push(t);
        state = state.flip();
    }
    RegimePath {
        initial_state: params.initial_state,
        jump_times,
        horizon,
    }
}

/// Right-continuous state evaluation: the state changes at each jump time.
pub fn state_at(path: &RegimePath, t: f64) -> Result<Regime> {
    path.check_time(t)?;
    let jumps = jump_count(path, t);
    Ok(if jumps.is_multiple_of(2) {
        path.initial_state
    } else {
        path.initial_state.flip()
    })
}

/// Number of switches up to and including `t`; nondecreasing in `t`.
pub fn jump_count_at(path: &RegimePath, t: f64) -> Result<usize> {
    path.check_time(t)?;
    Ok(jump_count(path, t))
}

fn jump_count(path: &RegimePath, t: f64) -> usize {
    // jump_times is sorted; partition_point counts entries <= t.
    path.jump_times.partition_point(|&tau| tau <= t)
}

/// Rate of the merged down-jump stream, `r_n * r_c / (r_n + r_c)`.
/// Symmetric in the two rates and no larger than either.
pub fn merged_rate(params: &RegimeParams) -> f64 {
    params.rate_normal * params.rate_crisis / (params.rate_normal + params.rate_crisis)
}

/// Value of the up-jump pmf together with a flag showing whether the raw
/// formula output had to be clamped into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmfValue {
    pub value: f64,
    pub clamped: bool,
}

/// Probability that the up-jump counter equals `n` at time `t`, for a path
/// started in the normal state.
///
/// Implements the closed-form expressions in which the down-jump stream is
/// treated as Poisson with the merged rate. The `n = 0` case is exact for
/// the true process; for `n >= 1` the closed form is a model approximation
/// and should be cross-checked against Monte-Carlo frequencies (see
/// [`pmf_validation_report`]). Outputs are clamped to [0, 1]; the flag
/// records when clamping (or a non-finite intermediate) occurred.
pub fn upward_jump_pmf(params: &RegimeParams, t: f64, n: u64) -> Result<PmfValue> {
    params.validate()?;
    if params.initial_state != Regime::Normal {
        return Err(CoreError::RequiresNormalStart);
    }
    if t < 0.0 || !t.is_finite() {
        return Err(CoreError::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    let lam_u = params.rate_normal;
    let lam = merged_rate(params);
    let d = lam - lam_u; // always negative for positive rates
    if d.abs() <= 1e-12 * lam_u {
        return Err(CoreError::SingularPmf);
    }

    let (raw, noise_scale) = if n == 0 {
        ((-lam_u * t).exp(), 0.0)
    } else if n == 1 {
        (lam_u / d * ((-lam_u * t).exp() - (-lam * t).exp()), 0.0)
    } else {
        pmf_tail(lam_u, lam, d, t, n)
    };
    if raw.abs() <= noise_scale * 1e-12 && raw != 0.0 {
        // cancellation ate all significant digits; numerically zero
        return Ok(PmfValue {
            value: 0.0,
            clamped: true,
        });
    }
    Ok(clamp_unit(raw))
}

// General case n = m >= 2 of the pmf, written with log-magnitude/sign
// arithmetic so the factorial and power terms cannot overflow on the way in.
// The three terms cancel heavily for large n (their magnitudes grow like
// (rate_crisis / rate_normal)^n while the result shrinks), so the returned
// value also carries the largest intermediate magnitude; anything below that
// magnitude times 1e-12 is indistinguishable from cancellation noise.
fn pmf_tail(lam_u: f64, lam: f64, d: f64, t: f64, m: u64) -> (f64, f64) {
    let n = m - 1; // tail formula is stated for count n + 1
    let ln_lam_u = lam_u.ln();
    let ln_lam = lam.ln();
    let ln_abs_d = d.abs().ln();
    let sign_d = -1.0_f64; // d < 0
    let sign_pow = |p: u64| if p.is_multiple_of(2) { 1.0 } else { sign_d };

    // term1 = lam_u * lam^n * exp(-lam_u t) / d^(n+1)
    let ln_t1 = ln_lam_u + n as f64 * ln_lam - lam_u * t - (n as f64 + 1.0) * ln_abs_d;
    let term1 = sign_pow(n + 1) * ln_t1.exp();
    let mut max_summand = term1.abs();

    // term2 = sum_{k=0}^{n-1} lam_u^2 lam^n exp(-lam t) / d^(n-k+1)
    //         * sum_{j=0}^{k} t^j / (j! lam^(k-j+1))
    let ln_t = if t > 0.0 { t.ln() } else { f64::NEG_INFINITY };
    let mut term2 = 0.0_f64;
    for k in 0..n {
        // inner sum in log space (all summands positive)
        let mut ln_terms = Vec::with_capacity(k as usize + 1);
        for j in 0..=k {
            let ln_term = if t == 0.0 && j > 0 {
                f64::NEG_INFINITY
            } else {
                j as f64 * ln_t - ln_factorial(j) - (k - j + 1) as f64 * ln_lam
            };
            ln_terms.push(ln_term);
        }
        let ln_inner = log_sum_exp(&ln_terms);
        let ln_coeff = 2.0 * ln_lam_u + n as f64 * ln_lam - lam * t - (n - k + 1) as f64 * ln_abs_d;
        let summand = sign_pow(n - k + 1) * (ln_coeff + ln_inner).exp();
        max_summand = max_summand.max(summand.abs());
        term2 += summand;
    }

    // term3 = lam_u exp(-lam t) / d * sum_{k=0}^{n} (t lam)^k / k!
    let mut poisson_partial = 0.0_f64;
    let mut term = 1.0_f64;
    for k in 0..=n {
        if k > 0 {
            term *= t * lam / k as f64;
        }
        poisson_partial += term;
    }
    let term3 = lam_u * (-lam * t).exp() / d * poisson_partial;
    max_summand = max_summand.max(term3.abs());

    (term1 - term2 - term3, max_summand)
}

fn log_sum_exp(ln_terms: &[f64]) -> f64 {
    let max = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + ln_terms.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

fn clamp_unit(raw: f64) -> PmfValue {
    if !raw.is_finite() {
        return PmfValue {
            value: 0.0,
            clamped: true,
        };
    }
    if raw < 0.0 {
        PmfValue {
            value: 0.0,
            clamped: true,
        }
    } else if raw > 1.0 {
        PmfValue {
            value: 1.0,
            clamped: true,
        }
    } else {
        PmfValue {
            value: raw,
            clamped: false,
        }
    }
}

/// Compensator of the regime process in the closed form implied by the
/// merged-rate intensity: rate `rate_normal + merged` before the first
/// switch and `2 * merged` afterwards, integrated piecewise.
///
/// Note this closed form inherits the merged-rate approximation; the exact
/// compensator that makes `beta_t - Lambda_t` a martingale is
/// [`markov_compensator_at`]. Defined for paths started in the normal state.
pub fn compensator_at(params: &RegimeParams, path: &RegimePath, t: f64) -> Result<f64> {
    params.validate()?;
    if path.initial_state != Regime::Normal {
        return Err(CoreError::RequiresNormalStart);
    }
    path.check_time(t)?;
    let lam = merged_rate(params);
    let t1 = path.jump_times.first().copied().unwrap_or(f64::INFINITY);
    let before = t.min(t1);
    let after = (t - t1).max(0.0);
    Ok((params.rate_normal + lam) * before + 2.0 * lam * after)
}

/// Exact compensator of the two-state chain: the integral of
/// `rate_normal` over time spent in the normal state minus `rate_crisis`
/// over time spent in crisis. `beta_t - markov_compensator_at(t)` has mean
/// zero, which is what the martingale Monte-Carlo checks exercise.
pub fn markov_compensator_at(params: &RegimeParams, path: &RegimePath, t: f64) -> Result<f64> {
    params.validate()?;
    path.check_time(t)?;
    let mut acc = 0.0;
    let mut state = path.initial_state;
    let mut prev = 0.0;
    for &tau in &path.jump_times {
        if tau >= t {
            break;
        }
        acc += segment_rate(params, state) * (tau - prev);
        prev = tau;
        state = state.flip();
    }
    acc += segment_rate(params, state) * (t - prev);
    Ok(acc)
}

fn segment_rate(params: &RegimeParams, state: Regime) -> f64 {
    match state {
        Regime::Normal => params.rate_normal,
        Regime::Crisis => -params.rate_crisis,
    }
}

/// One row of the pmf validation table: closed form vs. Monte-Carlo
/// frequency of the up-jump count.
#[derive(Debug, Clone, Serialize)]
pub struct PmfValidationRow {
    pub n: u64,
    pub formula: f64,
    pub clamped: bool,
    pub mc_frequency: f64,
    pub mc_se: f64,
    /// |formula - frequency| in units of the binomial standard error.
    pub z_score: f64,
}

/// Compares the closed-form up-jump pmf with Monte-Carlo frequencies over
/// `n_paths` simulated paths. The `n = 0` row is exact and expected to agree
/// within noise; rows `n >= 1` document the discrepancy of the merged-rate
/// approximation.
pub fn pmf_validation_report(
    params: &RegimeParams,
    t: f64,
    n_max: u64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PmfValidationRow>> {
    if params.initial_state != Regime::Normal {
        return Err(CoreError::RequiresNormalStart);
    }
    let paths = simulate_regime_paths(params, t, seed, n_paths)?;
    let mut counts = vec![0u64; n_max as usize + 1];
    for path in &paths {
        // with a normal start, up-jumps are the switches at even indices
        let up = path.jump_times.len().div_ceil(2);
        if up <= n_max as usize {
            counts[up] += 1;
        }
    }
    let n = n_paths as f64;
    let mut rows = Vec::new();
    for k in 0..=n_max {
        let freq = counts[k as usize] as f64 / n;
        let se = (freq * (1.0 - freq) / n).sqrt().max(1.0 / n);
        let pmf = upward_jump_pmf(params, t, k)?;
        rows.push(PmfValidationRow {
            n: k,
            formula: pmf.value,
            clamped: pmf.clamped,
            mc_frequency: freq,
            mc_se: se,
            z_score: (pmf.value - freq).abs() / se,
        });
    }
    Ok(rows)
}

/// Writes regime paths as CSV rows `path_id,jump_index,jump_time`.
pub fn write_paths_csv<W: std::io::Write>(paths: &[RegimePath], mut w: W) -> Result<()> {
    writeln!(w, "path_id,jump_index,jump_time")?;
    for (pid, path) in paths.iter().enumerate() {
        for (ji, tau) in path.jump_times.iter().enumerate() {
            writeln!(w, "{pid},{ji},{tau}")?;
        }
    }
    Ok(())
}
