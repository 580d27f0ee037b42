//! Bessel-series limit profiles and sequence-limit diagnostics.
//!
//! The small-argument behaviour of the basis is captured by the entire
//! functions E_{a,j}(x) = sum_m (-1)^m x^{j+m} / (m! Gamma(a+2j+m+1)),
//! which equal x^{-a/2} J_{a+2j}(2 sqrt(x)). Scaled polynomial profiles
//! q_n(x/n) / n^{a/2} converge on real compacts to
//! sqrt(Gamma(a+1)) * sum_j b_j E_{a,j}(x) with b_j the
//! connection-coefficient limits.

use crate::error::{Error, Result};
use crate::gamma::ln_gamma;
use crate::laguerre::{eval_laguerre, laguerre_norm_sq};
use crate::sobolev::SobolevBasisCache;
use crate::util::{linear_fit, KahanSum};

/// E_{alpha,j}(x) for x >= 0, alpha + 2j > -1.
pub fn bessel_entire(alpha: f64, j: usize, x: f64) -> Result<f64> {
    let (value, _) = bessel_entire_with_count(alpha, j, x)?;
    Ok(value)
}

pub(crate) fn bessel_entire_with_count(alpha: f64, j: usize, x: f64) -> Result<(f64, usize)> {
    let nu = alpha + 2.0 * j as f64;
    if !(x >= 0.0) {
        return Err(Error::domain(format!("bessel_entire needs x >= 0, got {x}")));
    }
    if nu <= -1.0 {
        return Err(Error::domain(format!(
            "bessel_entire needs alpha + 2j > -1, got {nu}"
        )));
    }
    // term_0 = x^j / Gamma(nu + 1)
    let mut term = if j == 0 {
        (-ln_gamma(nu + 1.0)).exp()
    } else if x == 0.0 {
        return Ok((0.0, 1));
    } else {
        (j as f64 * x.ln() - ln_gamma(nu + 1.0)).exp()
    };
    let mut acc = KahanSum::new();
    acc.add(term);
    let mut peak = term.abs();
    let mut m = 0usize;
    loop {
        let mf = m as f64;
        term *= -x / ((mf + 1.0) * (nu + mf + 1.0));
        acc.add(term);
        m += 1;
        peak = peak.max(acc.value().abs());
        if term.abs() <= 1e-16 * peak.max(f64::MIN_POSITIVE) || m >= 400 {
            return Ok((acc.value(), m + 1));
        }
    }
}

/// The limit profile sqrt(Gamma(alpha+1)) * sum_j b_j E_{alpha,j}(x).
#[derive(Debug, Clone)]
pub struct BesselLikeProfile {
    alpha: f64,
    b_limits: Vec<f64>,
}

impl BesselLikeProfile {
    pub fn new(alpha: f64, b_limits: Vec<f64>) -> Self {
        Self { alpha, b_limits }
    }

    #[inline]
    pub fn b_limits(&self) -> &[f64] {
        &self.b_limits
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let scale = (0.5 * ln_gamma(self.alpha + 1.0)).exp();
        let mut acc = KahanSum::new();
        for (j, &b) in self.b_limits.iter().enumerate() {
            if b != 0.0 {
                acc.add(b * bessel_entire(self.alpha, j, x)?);
            }
        }
        Ok(scale * acc.value())
    }

    pub fn eval_grid(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Scaled classical profile l_n(x/(n+k_shift)) / n^{alpha/2} on a grid.
pub fn mh_profile_laguerre(alpha: f64, n: usize, k_shift: usize, xs: &[f64]) -> Vec<f64> {
    let inv_norm = 1.0 / laguerre_norm_sq(alpha, n).sqrt();
    let scale = (n as f64).powf(-alpha / 2.0) * inv_norm;
    let denom = (n + k_shift) as f64;
    xs.iter()
        .map(|&x| eval_laguerre(alpha, n, x / denom) * scale)
        .collect()
}

/// Scaled Sobolev profile q_n(x/n) / n^{alpha/2} on a grid.
pub fn mh_profile_sobolev(cache: &SobolevBasisCache, n: usize, xs: &[f64]) -> Vec<f64> {
    let alpha = cache.alpha();
    let scale = (n as f64).powf(-alpha / 2.0);
    let nf = n as f64;
    xs.iter().map(|&x| cache.q(n).eval(x / nf) * scale).collect()
}

/// Limit profile for a cache, with each b_j limit extrapolated from the
/// dense tail of the b_j(n) sequences rather than read off at n_max.
pub fn sobolev_limit_profile(cache: &SobolevBasisCache) -> Result<BesselLikeProfile> {
    let diags = connection_limit_diagnostics(cache)?;
    Ok(BesselLikeProfile::new(
        cache.alpha(),
        diags.into_iter().map(|d| d.estimate).collect(),
    ))
}

/// Extrapolated limit of each connection coefficient b_j(n), fitted over the
/// upper half of the cached degrees.
pub fn connection_limit_diagnostics(cache: &SobolevBasisCache) -> Result<Vec<LimitDiagnosis>> {
    let k_max = cache.product().representation_order();
    let n_max = cache.n_max();
    let lo = (n_max / 2).max(k_max);
    if n_max < lo + 3 {
        return Err(Error::domain(
            "cache too small to extrapolate connection limits",
        ));
    }
    let mut out = Vec::with_capacity(k_max + 1);
    for j in 0..=k_max {
        let seq: Vec<(f64, f64)> = (lo..=n_max)
            .map(|n| (n as f64, cache.connection(n).expect("n >= k_max")[j]))
            .collect();
        out.push(limit_diagnose(&seq)?);
    }
    Ok(out)
}

/// Result of extrapolating a sequence v(n) = L + c/n + o(1/n).
#[derive(Debug, Clone, Copy)]
pub struct LimitDiagnosis {
    /// Extrapolated limit.
    pub estimate: f64,
    /// Whether |v(n) - estimate| is non-increasing over the last three points.
    pub trend_ok: bool,
    /// Extrapolation uncertainty: in-sample misfit combined with the shift
    /// of the limit when refitting on the early half of the points.
    pub residual: f64,
}

impl LimitDiagnosis {
    /// Threshold test for a genuinely nonzero limit: |L| must clear the
    /// residual by the given factor.
    pub fn is_nonzero(&self, factor: f64) -> bool {
        self.estimate.abs() > factor * self.residual
    }
}

/// Fits v = L + c/n by least squares and reports the extrapolated limit.
pub fn limit_diagnose(seq: &[(f64, f64)]) -> Result<LimitDiagnosis> {
    if seq.len() < 4 {
        return Err(Error::domain(format!(
            "limit_diagnose needs at least 4 points, got {}",
            seq.len()
        )));
    }
    if seq.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::domain("limit_diagnose needs strictly increasing n"));
    }
    let (estimate, rms) = fit_limit(seq);
    let half = (seq.len() / 2).max(2);
    let (estimate_early, _) = fit_limit(&seq[..half]);
    let residual = rms.max((estimate - estimate_early).abs());

    let m = seq.len();
    let slack = 1e-12 * estimate.abs().max(1.0);
    let d = |i: usize| (seq[i].1 - estimate).abs();
    let trend_ok = d(m - 2) <= d(m - 3) + slack && d(m - 1) <= d(m - 2) + slack;

    Ok(LimitDiagnosis {
        estimate,
        trend_ok,
        residual,
    })
}

fn fit_limit(seq: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = seq.iter().map(|&(n, _)| 1.0 / n).collect();
    let ys: Vec<f64> = seq.iter().map(|&(_, v)| v).collect();
    let (intercept, _, rms, _) = linear_fit(&xs, &ys);
    (intercept, rms)
}

/// Sup deviation between two profiles sampled on the same grid.
pub fn sup_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Number of sign changes along a sampled profile (zeros are skipped).
pub fn sign_changes(values: &[f64]) -> usize {
    let mut count = 0;
    let mut last = 0.0_f64;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

/// Evenly spaced verification grid on [0, x_max].
pub fn default_grid(x_max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| x_max * i as f64 / (points - 1) as f64)
        .collect()
}
