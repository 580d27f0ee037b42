//! Classical Laguerre primitives: evaluation, derivatives at the origin,
//! norms, kernel derivatives, and expansions in the orthonormal basis.
//!
//! Conventions. `L_n` denotes the degree-n Laguerre polynomial with
//! parameter `alpha`, normalized by L_n(0) = binom(n+alpha, n), orthogonal
//! for the probability measure x^alpha e^{-x} dx / Gamma(alpha+1) on
//! [0, inf). `l_n = L_n / ||L_n||` with ||L_n||^2 = Gamma(n+alpha+1) /
//! (n! Gamma(alpha+1)). Expansions are always stored against `l_n`; the
//! Gram matrix of a discrete Sobolev product is then identity plus a low
//! rank part, and monomial coefficients never need to exist.

use crate::error::{Error, Result};
use crate::gamma::{ln_gamma, ln_gamma_ratio};
use crate::util::KahanSum;

/// Weight parameter alpha of x^alpha e^{-x}; invariant alpha > -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaguerreParam {
    alpha: f64,
}

impl LaguerreParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= -1.0 {
            return Err(Error::domain(format!(
                "Laguerre parameter must satisfy alpha > -1, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    #[inline]
    pub fn alpha(self) -> f64 {
        self.alpha
    }
}

/// L_n(x) by the three-term recurrence.
///
/// This is the plain polynomial value (no e^{-x/2} damping); it overflows
/// for x far beyond the oscillatory region. Use [`weighted_value`] when x
/// can be large, e.g. at quadrature nodes.
pub fn eval_laguerre(alpha: f64, n: usize, x: f64) -> f64 {
    debug_assert!(alpha > -1.0);
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + alpha + 1.0 - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// k-th derivative of L_n at x = 0:
/// (-1)^k Gamma(n+alpha+1) / ((n-k)! Gamma(alpha+k+1)), and 0 for k > n.
pub fn laguerre_deriv_at_zero(alpha: f64, n: usize, k: usize) -> f64 {
    debug_assert!(alpha > -1.0);
    if k > n {
        return 0.0;
    }
    let nf = n as f64;
    let kf = k as f64;
    let ln = ln_gamma(nf + alpha + 1.0) - ln_gamma(nf - kf + 1.0) - ln_gamma(alpha + kf + 1.0);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * ln.exp()
}

/// ||L_n||^2 = Gamma(n+alpha+1) / (n! Gamma(alpha+1)) under the
/// probability-normalized measure.
pub fn laguerre_norm_sq(alpha: f64, n: usize) -> f64 {
    debug_assert!(alpha > -1.0);
    let nf = n as f64;
    (ln_gamma(nf + alpha + 1.0) - ln_gamma(nf + 1.0) - ln_gamma(alpha + 1.0)).exp()
}

/// k-th derivative of the orthonormal l_n at x = 0.
pub fn orthonormal_deriv_at_zero(alpha: f64, n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let nf = n as f64;
    let kf = k as f64;
    let ln = 0.5 * (ln_gamma(nf + alpha + 1.0) + ln_gamma(nf + 1.0) + ln_gamma(alpha + 1.0))
        - ln_gamma(nf - kf + 1.0)
        - ln_gamma(alpha + kf + 1.0);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * ln.exp()
}

/// Mixed kernel derivative K_n^{(k,h)}(0,0) = sum_{i<=n} of
/// L_i^{(k)}(0) L_i^{(h)}(0) / ||L_i||^2, accumulated in compensated form.
pub fn kernel_deriv_at_zero(alpha: f64, n: usize, k: usize, h: usize) -> f64 {
    let mut acc = KahanSum::new();
    for i in 0..=n {
        acc.add(orthonormal_deriv_at_zero(alpha, i, k) * orthonormal_deriv_at_zero(alpha, i, h));
    }
    acc.value()
}

/// K_n^{(0,h)}(., 0) as an expansion in the orthonormal basis:
/// coefficient i equals l_i^{(h)}(0).
pub fn kernel_expansion(param: LaguerreParam, n: usize, h: usize) -> LaguerreExpansion {
    let coeffs = (0..=n)
        .map(|i| orthonormal_deriv_at_zero(param.alpha(), i, h))
        .collect();
    LaguerreExpansion::new(param, coeffs)
}

/// A polynomial stored by its coefficients against the orthonormal basis
/// {l_k} for a fixed alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreExpansion {
    param: LaguerreParam,
    coeffs: Vec<f64>,
}

impl LaguerreExpansion {
    pub fn new(param: LaguerreParam, coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty(), "expansion needs at least one coefficient");
        Self { param, coeffs }
    }

    /// The unit vector e_n, i.e. the orthonormal polynomial l_n itself.
    pub fn unit(param: LaguerreParam, n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        Self { param, coeffs }
    }

    #[inline]
    pub fn param(&self) -> LaguerreParam {
        self.param
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.param.alpha()
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the last structurally nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    /// Clenshaw evaluation of sum c_k l_k(x) on the orthonormal recurrence.
    pub fn eval(&self, x: f64) -> f64 {
        let alpha = self.alpha();
        let mut u1 = 0.0;
        let mut u2 = 0.0;
        for k in (0..self.coeffs.len()).rev() {
            let kf = k as f64;
            let a_k = (2.0 * kf + alpha + 1.0 - x) / ((kf + 1.0) * (kf + alpha + 1.0)).sqrt();
            let b_k1 = -(((kf + 1.0) * (kf + 1.0 + alpha)) / ((kf + 2.0) * (kf + alpha + 2.0)))
                .sqrt();
            let u = self.coeffs[k] + a_k * u1 + b_k1 * u2;
            u2 = u1;
            u1 = u;
        }
        u1
    }

    /// Weighted value sum c_k l_k(x) e^{-x/2}, safe for arbitrarily large x.
    pub fn eval_weighted(&self, x: f64) -> f64 {
        let mut acc = KahanSum::new();
        let coeffs = &self.coeffs;
        for_each_weighted_orthonormal(self.alpha(), coeffs.len() - 1, x, &mut |k, v| {
            let c = coeffs[k];
            if c != 0.0 {
                acc.add(c * v);
            }
        });
        acc.value()
    }

    /// Exact linear functional: k-th derivative at 0.
    pub fn deriv_at_zero(&self, k: usize) -> f64 {
        let mut acc = KahanSum::new();
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                acc.add(c * orthonormal_deriv_at_zero(self.alpha(), i, k));
            }
        }
        acc.value()
    }

    /// In-place axpy over the common prefix: self += s * other.
    pub(crate) fn add_scaled(&mut self, other: &[f64], s: f64) {
        for (c, &o) in self.coeffs.iter_mut().zip(other.iter()) {
            *c += s * o;
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }
}

const RESCALE_LIMIT: f64 = 1e270;
const RESCALE_FACTOR: f64 = 1e-270;
const LN_RESCALE: f64 = 621.7023613071183; // ln(1e270)

#[inline]
fn materialize(v: f64, log_scale: f64, mult: f64) -> f64 {
    if mult > 0.0 {
        v * mult
    } else if v == 0.0 {
        0.0
    } else {
        // deep-tail regime: reconstruct through logs to dodge underflow
        (log_scale + v.abs().ln()).exp().copysign(v)
    }
}

/// Streams the weighted orthonormal values l_k(x) e^{-x/2}, k = 0..=n_max,
/// into `sink`. Runs the recurrence on block-rescaled mantissas so neither
/// the e^{-x/2} seed nor the polynomial growth can under- or overflow.
pub(crate) fn for_each_weighted_orthonormal(
    alpha: f64,
    n_max: usize,
    x: f64,
    sink: &mut impl FnMut(usize, f64),
) {
    let mut log_scale = -0.5 * x;
    let mut mult = if log_scale > -700.0 { log_scale.exp() } else { 0.0 };
    let mut prev = 0.0_f64;
    let mut cur = 1.0_f64; // l_0 = 1
    sink(0, materialize(cur, log_scale, mult));
    for k in 0..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + alpha + 1.0 - x) * cur - (kf * (kf + alpha)).sqrt() * prev)
            / ((kf + 1.0) * (kf + alpha + 1.0)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_LIMIT {
            cur *= RESCALE_FACTOR;
            prev *= RESCALE_FACTOR;
            log_scale += LN_RESCALE;
            mult = if (-700.0..700.0).contains(&log_scale) {
                log_scale.exp()
            } else {
                0.0
            };
        }
        sink(k + 1, materialize(cur, log_scale, mult));
    }
}

/// Single weighted value l_n(x) e^{-x/2}.
pub fn weighted_value(alpha: f64, n: usize, x: f64) -> f64 {
    let mut out = 0.0;
    for_each_weighted_orthonormal(alpha, n, x, &mut |k, v| {
        if k == n {
            out = v;
        }
    });
    out
}

/// Weighted pair (L_{n}(x) e^{-x/2}, L_{n+2}(x) e^{-x/2}) for the
/// binomial-normalized polynomials at the given parameter.
pub(crate) fn weighted_capital_pair(alpha: f64, n: usize, x: f64) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for_each_weighted_orthonormal(alpha, n + 2, x, &mut |k, v| {
        if k == n {
            lo = v;
        } else if k == n + 2 {
            hi = v;
        }
    });
    let norm_lo = (0.5
        * (ln_gamma_ratio(n as f64 + alpha + 1.0, n as f64 + 1.0) - ln_gamma(alpha + 1.0)))
    .exp();
    let norm_hi = (0.5
        * (ln_gamma_ratio(n as f64 + alpha + 3.0, n as f64 + 3.0) - ln_gamma(alpha + 1.0)))
    .exp();
    (lo * norm_lo, hi * norm_hi)
}
