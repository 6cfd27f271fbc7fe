//! Monte Carlo verification of the probabilistic claims behind adaptive
//! overestimation control: the lower bound on the Q-learning overestimation
//! bias at a bandit bank, and the chi-squared law of the sample variance the
//! adaptive weights consume. Includes the statistical machinery needed to
//! test them: the regularized incomplete gamma function (chi-squared CDF) and
//! a one-sample two-sided Kolmogorov-Smirnov test.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::seeding::{stream, TAG_REPLICATE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("cyclic estimator needs at least 2 draws per arm, got {0}")]
    TooFewDraws(usize),
    #[error("Kolmogorov-Smirnov test needs at least 10 samples, got {0}")]
    TooFewSamples(usize),
    #[error("maximum bounds need at least 2 variables, got {0}")]
    TooFewArms(usize),
    #[error("need at least 500 replicates for a stable check, got {0}")]
    TooFewReplicates(usize),
    #[error("chi-squared CDF domain violation: x = {0}, dof = {1}")]
    BadDomain(f64, usize),
}

/// One run of the cyclic-exploration + frozen-target estimator on a bandit
/// bank of `k` arms: every arm is played `n` times, the empirical return
/// distribution of each arm is the equal-weight list of its draws, the arm
/// with the maximal sample mean is selected, and its discounted sample mean
/// becomes the Q estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicEstimate {
    /// `gamma * max_a (sample mean of arm a)`.
    pub q_hat: f64,
    /// Unbiased (1/(n-1)) sample variance of the chosen arm's raw draws,
    /// pre-discount.
    pub s2_chosen: f64,
    pub chosen_arm: usize,
}

/// Runs the cyclic estimator once. Equal play counts satisfy the exploration
/// premise `1/n_a + 1/n_a' >= 2/n` with equality, asserted below.
pub fn cyclic_target_estimator<R: Rng + ?Sized>(
    k: usize,
    mu: f64,
    sigma: f64,
    gamma: f64,
    n: usize,
    rng: &mut R,
) -> Result<CyclicEstimate, TheoryError> {
    if n < 2 {
        return Err(TheoryError::TooFewDraws(n));
    }
    assert!(k >= 1, "bandit bank needs at least one arm");
    // cyclic exploration plays each arm exactly n times
    assert!(1.0 / n as f64 + 1.0 / n as f64 >= 2.0 / n as f64);
    let normal = Normal::new(mu, sigma).expect("finite sigma");
    let mut best_mean = f64::NEG_INFINITY;
    let mut best_arm = 0;
    let mut best_s2 = 0.0;
    for arm in 0..k {
        let draws: Vec<f64> = if sigma == 0.0 {
            vec![mu; n]
        } else {
            (0..n).map(|_| normal.sample(rng)).collect()
        };
        let mean = draws.iter().sum::<f64>() / n as f64;
        if mean > best_mean {
            best_mean = mean;
            best_arm = arm;
            best_s2 = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        }
    }
    Ok(CyclicEstimate {
        q_hat: gamma * best_mean,
        s2_chosen: best_s2,
        chosen_arm: best_arm,
    })
}

/// Lower bound on the expected overestimation of the cyclic estimator:
/// `gamma * sigma * sqrt(ln k) / (sqrt(pi * ln 2) * sqrt(n))`, natural logs.
pub fn overestimation_lower_bound(gamma: f64, sigma: f64, k: usize, n: usize) -> f64 {
    assert!(k >= 1 && n >= 1);
    gamma * sigma * (k as f64).ln().sqrt()
        / ((std::f64::consts::PI * std::f64::consts::LN_2).sqrt() * (n as f64).sqrt())
}

/// Two-sided envelope of the expected maximum of `k` iid centered Gaussians
/// with standard deviation `sigma`:
/// `sigma * sqrt(ln k / (pi ln 2)) <= E[max] <= sigma * sqrt(2 ln k)`.
pub fn gaussian_max_mean_bounds(k: usize, sigma: f64) -> Result<(f64, f64), TheoryError> {
    if k < 2 {
        return Err(TheoryError::TooFewArms(k));
    }
    let ln_k = (k as f64).ln();
    let lower = sigma * (ln_k / (std::f64::consts::PI * std::f64::consts::LN_2)).sqrt();
    let upper = sigma * (2.0 * ln_k).sqrt();
    Ok((lower, upper))
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_ITMAX: usize = 500;

/// ln Gamma(x) by the Lanczos approximation (Numerical Recipes g = 5, n = 6).
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// continued fraction (modified Lentz) otherwise.
fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series representation
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..GAMMA_ITMAX {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // continued fraction for Q(a, x) = 1 - P(a, x)
        let fpmin = f64::MIN_POSITIVE / GAMMA_EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / fpmin;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_ITMAX {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < fpmin {
                d = fpmin;
            }
            c = b + an / c;
            if c.abs() < fpmin {
                c = fpmin;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// Chi-squared CDF with `dof` degrees of freedom: `P(dof/2, x/2)`.
pub fn chi2_cdf(x: f64, dof: usize) -> Result<f64, TheoryError> {
    if x < 0.0 || dof == 0 {
        return Err(TheoryError::BadDomain(x, dof));
    }
    Ok(gamma_p(dof as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Standard normal CDF via the incomplete gamma identity
/// `Phi(x) = (1 + sign(x) P(1/2, x^2/2)) / 2`.
pub fn standard_normal_cdf(x: f64) -> f64 {
    let p = gamma_p(0.5, x * x / 2.0);
    if x >= 0.0 {
        0.5 * (1.0 + p)
    } else {
        0.5 * (1.0 - p)
    }
}

/// Asymptotic Kolmogorov distribution tail
/// `Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)`, truncated at
/// 100 terms.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample two-sided Kolmogorov-Smirnov test of `samples` against the
/// reference CDF. The p-value uses the asymptotic Kolmogorov law evaluated at
/// `(sqrt(n) + 0.12 + 0.11/sqrt(n)) * D`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64), TheoryError> {
    let n = samples.len();
    if n < 10 {
        return Err(TheoryError::TooFewSamples(n));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / nf).abs());
        d = d.max(((i + 1) as f64 / nf - f).abs());
    }
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// Outcome of the sample-variance law check: the chosen arm's sample variance
/// across replicates is tested against `sigma^2/(n-1) * chi^2_{n-1}`, and its
/// first two moments against `sigma^2` and `2 sigma^4 / (n-1)`.
#[derive(Debug, Clone)]
pub struct VarianceLawReport {
    pub ks_statistic: f64,
    pub p_value: f64,
    pub empirical_mean: f64,
    pub expected_mean: f64,
    pub mean_tolerance: f64,
    pub empirical_variance: f64,
    pub expected_variance: f64,
    pub variance_tolerance: f64,
    pub replicates: usize,
    pub pass: bool,
}

/// Runs `replicates` independent cyclic estimators (sub-stream per replicate)
/// and returns the raw estimates, deterministically in replicate order.
pub fn run_replicates(
    k: usize,
    mu: f64,
    sigma: f64,
    gamma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<CyclicEstimate>, TheoryError> {
    (0..replicates)
        .map(|rep| {
            let mut rng = stream(seed, TAG_REPLICATE, rep as u64);
            cyclic_target_estimator(k, mu, sigma, gamma, n, &mut rng)
        })
        .collect()
}

/// Verifies the chi-squared sample-variance law by KS test plus moment
/// checks at three standard errors.
pub fn verify_variance_law(
    k: usize,
    sigma: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<VarianceLawReport, TheoryError> {
    if replicates < 500 {
        return Err(TheoryError::TooFewReplicates(replicates));
    }
    let estimates = run_replicates(k, 0.0, sigma, 1.0, n, replicates, seed)?;
    let s2: Vec<f64> = estimates.iter().map(|e| e.s2_chosen).collect();
    let dof = n - 1;
    let scale = (n - 1) as f64 / (sigma * sigma);
    let (ks_statistic, p_value) =
        ks_test(&s2, |x| chi2_cdf((scale * x).max(0.0), dof).unwrap_or(0.0))?;

    let reps = replicates as f64;
    let empirical_mean = s2.iter().sum::<f64>() / reps;
    let expected_mean = sigma * sigma;
    // sd of one s2 draw is sigma^2 sqrt(2/(n-1))
    let mean_tolerance = 3.0 * expected_mean * (2.0 / dof as f64).sqrt() / reps.sqrt();

    let empirical_variance =
        s2.iter().map(|x| (x - empirical_mean).powi(2)).sum::<f64>() / (reps - 1.0);
    let expected_variance = 2.0 * sigma.powi(4) / dof as f64;
    // standard error of a sample variance from the empirical fourth moment
    let m4 = s2.iter().map(|x| (x - empirical_mean).powi(4)).sum::<f64>() / reps;
    let variance_tolerance = 3.0 * ((m4 - empirical_variance.powi(2)).max(0.0) / reps).sqrt();

    let pass = p_value > 0.01
        && (empirical_mean - expected_mean).abs() <= mean_tolerance
        && (empirical_variance - expected_variance).abs() <= variance_tolerance;
    Ok(VarianceLawReport {
        ks_statistic,
        p_value,
        empirical_mean,
        expected_mean,
        mean_tolerance,
        empirical_variance,
        expected_variance,
        variance_tolerance,
        replicates,
        pass,
    })
}

/// Outcome of the Gaussian-maximum envelope check.
#[derive(Debug, Clone)]
pub struct MaxBoundsCheck {
    pub lower: f64,
    pub empirical_mean: f64,
    pub upper: f64,
    pub draws: usize,
    pub pass: bool,
}

/// Monte Carlo sandwich check: the empirical mean of `max` over `k` centered
/// Gaussians must land inside the two-sided envelope.
pub fn verify_max_bounds(
    k: usize,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<MaxBoundsCheck, TheoryError> {
    let (lower, upper) = gaussian_max_mean_bounds(k, sigma)?;
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = stream(seed, TAG_REPLICATE, 0);
    let empirical_mean = (0..draws)
        .map(|_| {
            (0..k)
                .map(|_| normal.sample(&mut rng))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / draws as f64;
    let pass = lower <= empirical_mean && empirical_mean <= upper;
    Ok(MaxBoundsCheck {
        lower,
        empirical_mean,
        upper,
        draws,
        pass,
    })
}

/// Outcome of the overestimation lower-bound check.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub empirical_mean_bias: f64,
    pub stderr: f64,
    pub lower_bound: f64,
    pub n_replicates: usize,
    pub pass: bool,
}

/// Checks that the mean bias `q_hat - gamma * mu` across replicates clears
/// the lower bound with two standard errors of slack.
pub fn verify_bias_bound(
    gamma: f64,
    sigma: f64,
    k: usize,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<BoundCheck, TheoryError> {
    if replicates < 500 {
        return Err(TheoryError::TooFewReplicates(replicates));
    }
    let mu = 0.0;
    let estimates = run_replicates(k, mu, sigma, gamma, n, replicates, seed)?;
    let biases: Vec<f64> = estimates.iter().map(|e| e.q_hat - gamma * mu).collect();
    let reps = replicates as f64;
    let mean = biases.iter().sum::<f64>() / reps;
    let var = biases.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (reps - 1.0);
    let stderr = (var / reps).sqrt();
    let lower_bound = overestimation_lower_bound(gamma, sigma, k, n);
    let pass = mean - 2.0 * stderr >= lower_bound;
    Ok(BoundCheck {
        empirical_mean_bias: mean,
        stderr,
        lower_bound,
        n_replicates: replicates,
        pass,
    })
}
