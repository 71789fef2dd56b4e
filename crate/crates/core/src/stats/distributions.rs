//! Upper-tail probabilities for F, chi-square and the studentized range.

use std::sync::OnceLock;

use statrs::function::beta::checked_beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// P(F > f) for F(df1, df2).
pub fn f_p_value(f: f64, df1: f64, df2: f64) -> f64 {
    if f.is_nan() || df1 <= 0.0 || df2 <= 0.0 {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    // P(F > f) = I_x(df2/2, df1/2) with x = df2 / (df2 + df1 f)
    let x = df2 / (df2 + df1 * f);
    checked_beta_reg(df2 / 2.0, df1 / 2.0, x).map_or(f64::NAN, |p| p.clamp(0.0, 1.0))
}

/// P(X > x) for chi-square with `df` degrees of freedom.
pub fn chi2_p_value(x: f64, df: f64) -> f64 {
    if x.is_nan() || df <= 0.0 {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_ur(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Nodes and weights of 64-point Gauss-Legendre quadrature on [-1, 1].
fn gauss_legendre_64() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        const N: usize = 64;
        let mut nodes = Vec::with_capacity(N);
        for i in 0..N / 2 {
            // Newton iteration from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for n in 2..=N {
                    let n = n as f64;
                    let p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes.push((x, w));
            nodes.push((-x, w));
        }
        nodes
    })
}

/// Composite 64-point Gauss-Legendre over `panels` equal panels.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let nodes = gauss_legendre_64();
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let mid = lo + h / 2.0;
            nodes.iter().map(|(x, w)| w * f(mid + x * h / 2.0)).sum::<f64>() * h / 2.0
        })
        .sum()
}

/// P(range of `r` standard normals < w).
fn range_cdf_known_sigma(w: f64, r: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let r = r as f64;
    let inner = |z: f64| {
        let d = normal_cdf(z) - normal_cdf(z - w);
        if d <= 0.0 {
            0.0
        } else {
            normal_pdf(z) * d.powf(r - 1.0)
        }
    };
    (r * integrate(inner, -8.0, 8.0, 4)).clamp(0.0, 1.0)
}

/// Degrees of freedom above which sigma is treated as known.
const DF_INFINITE: f64 = 25_000.0;

/// Upper-tail probability of the studentized range with `r` means and `df`
/// error degrees of freedom.
///
/// With s = chi_df / sqrt(df), P(Q < q) = E[W(q s)] where W is the range CDF
/// for known sigma. The outer integral runs over s in
/// [max(0, 1 - 12/sqrt(2 df)), 1 + 12/sqrt(2 df)] (about ±12 standard
/// deviations of s) in 8 panels; the inner one over z in [-8, 8] in 4 panels.
/// Each panel uses 64 Gauss-Legendre nodes.
pub fn ptukey_upper(q: f64, r: usize, df: f64) -> f64 {
    if q.is_nan() || r < 2 || df <= 0.0 {
        return f64::NAN;
    }
    if q <= 0.0 {
        return 1.0;
    }
    if q.is_infinite() {
        return 0.0;
    }
    let cdf = if df > DF_INFINITE {
        range_cdf_known_sigma(q, r)
    } else {
        let half = df / 2.0;
        let log_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
        let density = |s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            (log_norm + (df - 1.0) * s.ln() - half * s * s).exp()
        };
        let spread = 12.0 / (2.0 * df).sqrt();
        let lo = (1.0 - spread).max(0.0);
        let hi = 1.0 + spread;
        integrate(|s| density(s) * range_cdf_known_sigma(q * s, r), lo, hi, 8)
    };
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// Critical q with upper-tail probability `alpha`, by bisection.
pub fn qtukey(alpha: f64, r: usize, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while ptukey_upper(hi, r, df) > alpha {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ptukey_upper(mid, r, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    0.5 * (lo + hi)
}
