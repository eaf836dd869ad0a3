//! Shared numeric kernels: error function, normal distribution, factorials
//! in log space, small SPD solves, and winsorization.

/// Complementary error function after W. J. Cody's rational Chebyshev
/// approximations (SPECFUN `calerf`), accurate to about 1e-16 relative over
/// the ranges used here.
#[allow(clippy::excessive_precision)] // published coefficient set, kept verbatim
pub fn erfc(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e0,
        6.61191906371416295e1,
        2.98635138197400131e2,
        8.81952221241769090e2,
        1.71204761263407058e3,
        2.05107837782607147e3,
        1.23033935479799725e3,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e1,
        1.17693950891312499e2,
        5.37181101862009858e2,
        1.62138957456669019e3,
        3.29079923573345963e3,
        4.36261909014324716e3,
        3.43936767414372164e3,
        1.23033935480374942e3,
    ];
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e0,
        1.87295284992346047e0,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];
    const SQRPI: f64 = 5.6418958354775628695e-1; // 1/sqrt(pi)

    let ax = x.abs();
    let result = if ax <= 0.46875 {
        // erfc(x) = 1 - erf(x) on the central interval
        let z = ax * ax;
        let mut num = A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + A[i]) * z;
            den = (den + B[i]) * z;
        }
        let erf = x * (num + A[3]) / (den + B[3]);
        return 1.0 - erf;
    } else if ax <= 4.0 {
        let mut num = C[8] * ax;
        let mut den = ax;
        for i in 0..7 {
            num = (num + C[i]) * ax;
            den = (den + D[i]) * ax;
        }
        let r = (num + C[7]) / (den + D[7]);
        exp_nx2(ax) * r
    } else {
        let z = 1.0 / (ax * ax);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let mut r = z * (num + P[4]) / (den + Q[4]);
        r = (SQRPI - r) / ax;
        exp_nx2(ax) * r
    };

    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

// exp(-x^2) with the argument split to reduce rounding in the tails.
fn exp_nx2(x: f64) -> f64 {
    let xsq = (x * 16.0).trunc() / 16.0;
    let del = (x - xsq) * (x + xsq);
    (-xsq * xsq).exp() * (-del).exp()
}

/// Standard normal cumulative distribution function.
///
/// Branches on the sign so that `norm_cdf(x) + norm_cdf(-x) = 1` holds to a
/// couple of ulps, which keeps put-call parity tight.
pub fn norm_cdf(x: f64) -> f64 {
    const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
    if x >= 0.0 {
        1.0 - 0.5 * erfc(x * FRAC_1_SQRT_2)
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// ln(n!) by direct log summation; exact enough for the pmf combinatorics
/// and immune to the overflow a literal factorial would hit near n = 171.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Solves `A x = b` for a small symmetric positive-definite `A` (row major,
/// n x n) by Cholesky factorization. Returns `None` when a pivot collapses,
/// i.e. the matrix is numerically rank-deficient.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut l = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // forward substitution L y = b
    let mut y = vec![0.0_f64; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    // back substitution L^T x = y
    let mut x = vec![0.0_f64; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Two-sided winsorization at the given tail quantile. Values below the
/// lower quantile (resp. above the upper) are clamped to it. Returns the
/// number of clamped entries.
pub fn winsorize(values: &mut [f64], tail_quantile: f64) -> usize {
    let n = values.len();
    if n < 3 || tail_quantile <= 0.0 {
        return 0;
    }
    let k = ((n as f64) * tail_quantile).floor() as usize;
    if k == 0 {
        return 0;
    }
    let mut scratch: Vec<f64> = values.to_vec();
    let (_, lo, _) = scratch.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let lo = *lo;
    let hi_idx = n - 1 - k;
    let (_, hi, _) = scratch.select_nth_unstable_by(hi_idx, |a, b| a.total_cmp(b));
    let hi = *hi;
    let mut clamped = 0;
    for v in values.iter_mut() {
        if *v < lo {
            *v = lo;
            clamped += 1;
        } else if *v > hi {
            *v = hi;
            clamped += 1;
        }
    }
    clamped
}

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least squares of y on (1, x); returns (intercept, slope, r2).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0, 1.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (intercept, slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_reference_values() {
        // Reference values from the standard tables.
        let cases = [
            (0.0, 1.0),
            (0.5, 0.4795001221869535),
            (1.0, 0.15729920705028513),
            (2.0, 0.004677734981063127),
            (3.0, 2.209049699858544e-5),
            (-1.0, 1.842700792949715),
        ];
        for (x, want) in cases {
            let got = erfc(x);
            assert!(
                (got - want).abs() <= 1e-10 * want.abs().max(1e-30),
                "erfc({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn norm_cdf_symmetry_is_tight() {
        for i in 0..2000 {
            let x = -6.0 + 0.006 * i as f64;
            let s = norm_cdf(x) + norm_cdf(-x);
            assert!((s - 1.0).abs() < 1e-15, "x={x} sum={s}");
        }
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
    }

    #[test]
    fn ln_factorial_matches_direct() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120.0_f64.ln()).abs() < 1e-12);
        assert!((ln_factorial(20) - 2.43290200817664e18_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn solve_spd_recovers_solution() {
        // A = M^T M + I is SPD.
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x_true = [1.0, -2.0, 0.5];
        let mut b = [0.0; 3];
        for i in 0..3 {
            b[i] = (0..3).map(|j| a[i * 3 + j] * x_true[j]).sum();
        }
        let x = solve_spd(&a, &b, 3).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_spd_rejects_singular() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(solve_spd(&a, &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn winsorize_clamps_tails() {
        let mut v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let clamped = winsorize(&mut v, 0.01);
        assert_eq!(clamped, 20);
        assert_eq!(v[0], 10.0);
        assert_eq!(v[999], 989.0);
    }
}
