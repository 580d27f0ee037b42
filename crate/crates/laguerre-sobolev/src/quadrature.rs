//! Generalized Gauss-Laguerre quadrature for the weight t^gamma e^{-t}.
//!
//! Nodes and weights come from the symmetric tridiagonal Jacobi matrix of
//! the weight (diagonal 2k+gamma+1, off-diagonal sqrt(k(k+gamma))). The
//! eigensolver is an implicit-shift QL iteration that only accumulates the
//! first row of the eigenvector matrix, so rules with tens of thousands of
//! points stay cheap: O(m^2) time, O(m) memory.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::gamma::ln_gamma;
use crate::util::KahanSum;

/// An m-point rule for integral f(t) t^gamma e^{-t} dt on [0, inf),
/// exact for polynomials of degree <= 2m - 1.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    gamma: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    /// weights[i] * e^{nodes[i]}; stays polynomially sized and is the right
    /// factor when the integrand is evaluated with its e^{-t} damping folded
    /// in (weighted Laguerre values), which is how all norm code calls it.
    exp_weights: Vec<f64>,
    exact_degree: usize,
}

impl QuadratureRule {
    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn ln_weights(&self) -> &[f64] {
        &self.ln_weights
    }

    #[inline]
    pub fn exp_weights(&self) -> &[f64] {
        &self.exp_weights
    }

    #[inline]
    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    /// integral f(t) t^gamma e^{-t} dt for a plain integrand.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(t));
        }
        acc.value()
    }

    /// integral g(t) t^gamma dt for integrands given with their own e^{-t}
    /// factor already applied (g(t) = f(t) e^{-t}).
    pub fn integrate_damped(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for (&t, &w) in self.nodes.iter().zip(&self.exp_weights) {
            acc.add(w * g(t));
        }
        acc.value()
    }
}

/// Builds the m-point rule for weight t^gamma e^{-t}.
pub fn build_quadrature(gamma: f64, m: usize) -> Result<QuadratureRule> {
    if !(gamma > -1.0) || !gamma.is_finite() {
        return Err(Error::domain(format!(
            "quadrature weight exponent must satisfy gamma > -1, got {gamma}"
        )));
    }
    if m == 0 {
        return Err(Error::domain("quadrature rule needs at least one point"));
    }

    let mut diag: Vec<f64> = (0..m).map(|k| 2.0 * k as f64 + gamma + 1.0).collect();
    let mut off: Vec<f64> = (0..m)
        .map(|k| {
            let kf = k as f64;
            (kf * (kf + gamma)).sqrt()
        })
        .collect();
    // off[k] couples rows k-1 and k; off[0] is unused.
    let mut first_row = vec![0.0; m];
    first_row[0] = 1.0;

    tridiagonal_ql(&mut diag, &mut off, &mut first_row)?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| diag[a].partial_cmp(&diag[b]).expect("finite eigenvalues"));

    let ln_mu0 = ln_gamma(gamma + 1.0);
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    let mut ln_weights = Vec::with_capacity(m);
    let mut exp_weights = Vec::with_capacity(m);
    for &i in &order {
        let t = diag[i];
        if !t.is_finite() {
            return Err(Error::numeric("eigen-solver produced a nonfinite node"));
        }
        let v = first_row[i];
        let ln_w = if v == 0.0 {
            f64::NEG_INFINITY
        } else {
            ln_mu0 + 2.0 * v.abs().ln()
        };
        nodes.push(t);
        ln_weights.push(ln_w);
        weights.push(ln_w.exp());
        exp_weights.push((ln_w + t).exp());
    }

    Ok(QuadratureRule {
        gamma,
        nodes,
        weights,
        ln_weights,
        exp_weights,
        exact_degree: 2 * m - 1,
    })
}

/// Implicit-shift QL iteration for a symmetric tridiagonal matrix,
/// accumulating the rotations on a single row vector. On return `diag`
/// holds the eigenvalues (unsorted) and `row` the first components of the
/// corresponding normalized eigenvectors.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], row: &mut [f64]) -> Result<()> {
    let m = diag.len();
    if m == 1 {
        return Ok(());
    }
    // shift the off-diagonal storage to the NR convention e[i] couples i, i+1
    for i in 1..m {
        off[i - 1] = off[i];
    }
    off[m - 1] = 0.0;

    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut seg = l;
            while seg < m - 1 {
                let dd = diag[seg].abs() + diag[seg + 1].abs();
                if off[seg].abs() <= f64::EPSILON * dd {
                    break;
                }
                seg += 1;
            }
            if seg == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::numeric(
                    "tridiagonal QL failed to converge within 60 sweeps",
                ));
            }
            // Wilkinson-type shift from the leading 2x2 of the segment
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[seg] - diag[l] + off[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..seg).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[seg] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                // apply the rotation to the accumulated first row
                f = row[i + 1];
                row[i + 1] = s * row[i] + c * f;
                row[i] = c * row[i] - s * f;
            }
            if r == 0.0 && seg > l + 1 {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[seg] = 0.0;
        }
    }
    Ok(())
}

/// Thread-safe memo of built rules, keyed by (gamma bits, size).
#[derive(Default)]
pub struct RuleCache {
    inner: Mutex<HashMap<(u64, usize), Arc<QuadratureRule>>>,
}

impl RuleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, gamma: f64, m: usize) -> Result<Arc<QuadratureRule>> {
        let key = (gamma.to_bits(), m);
        if let Some(rule) = self.inner.lock().expect("rule cache poisoned").get(&key) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(build_quadrature(gamma, m)?);
        self.inner
            .lock()
            .expect("rule cache poisoned")
            .insert(key, Arc::clone(&rule));
        Ok(rule)
    }
}
