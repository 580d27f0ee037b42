//! Discrete Laguerre-Sobolev orthonormal polynomials.
//!
//! Two independent constructions are provided for the same basis:
//!
//! * [`build_stagewise`] adds one positive mass at a time. Each stage
//!   corrects the previous family by a kernel term,
//!   Q_{n,s} = Q_{n,s-1} - lambda * K_{n-1,s-1}^{(0,j_s)}(., 0) with
//!   lambda = M_{j_s} Q_{n,s-1}^{(j_s)}(0) / (1 + M_{j_s} K_{n-1,s-1}^{(j_s,j_s)}(0,0)),
//!   and updates the Sobolev norm by the matching rank-one formula.
//! * [`build_gram_oracle`] works degree by degree on the Gram matrix
//!   I + sum_j M_j d_j d_j^T in the orthonormal Laguerre basis
//!   (d_j[i] = l_i^{(j)}(0)), solving the bordered system for each new
//!   degree. Only active masses enter the solve, so the system is s x s.
//!
//! The two routes share nothing beyond the Laguerre primitives; their
//! agreement is the main construction cross-check.
//!
//! Conventions: Q_n carries the leading coefficient of L_n (so its
//! coefficient on l_n is ||L_n|| > 0) and q_n = Q_n / <Q_n,Q_n>^{1/2}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laguerre::{
    laguerre_norm_sq, orthonormal_deriv_at_zero, weighted_value, LaguerreExpansion, LaguerreParam,
};
use crate::quadrature::build_quadrature;
use crate::util::KahanSum;

/// Inner product parameters: alpha and the mass vector (M_0, ..., M_N).
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevProduct {
    param: LaguerreParam,
    masses: Vec<f64>,
}

impl SobolevProduct {
    pub fn new(alpha: f64, masses: Vec<f64>) -> Result<Self> {
        let param = LaguerreParam::new(alpha)?;
        for (j, &m) in masses.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::domain(format!(
                    "mass M_{j} must be finite and nonnegative, got {m}"
                )));
            }
        }
        Ok(Self { param, masses })
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
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Number of derivative orders carried by the product (N + 1, zero for
    /// the classical case).
    #[inline]
    pub fn derivative_count(&self) -> usize {
        self.masses.len()
    }

    /// Highest derivative order probed by the representation machinery,
    /// N + 1 (0 for the classical case, where the representation is l_n
    /// itself).
    #[inline]
    pub fn representation_order(&self) -> usize {
        self.masses.len()
    }

    /// Indices j with M_j > 0, in increasing order, with their masses.
    pub fn active(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.masses
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, m)| m > 0.0)
    }

    pub fn is_classical(&self) -> bool {
        self.active().next().is_none()
    }

    /// First index j with M_j = 0; when every mass is positive this is
    /// N + 1 by convention.
    pub fn first_gap(&self) -> usize {
        self.masses
            .iter()
            .position(|&m| m == 0.0)
            .unwrap_or(self.masses.len())
    }
}

/// <f, g>_S: coefficient dot product for the integral part (orthonormality
/// of {l_k}) plus the discrete derivative terms.
pub fn sobolev_inner(
    f: &LaguerreExpansion,
    g: &LaguerreExpansion,
    product: &SobolevProduct,
) -> Result<f64> {
    if f.alpha() != g.alpha() || f.alpha() != product.alpha() {
        return Err(Error::domain(format!(
            "alpha mismatch in sobolev_inner: {} vs {} vs product {}",
            f.alpha(),
            g.alpha(),
            product.alpha()
        )));
    }
    let mut acc = KahanSum::new();
    for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
        acc.add(a * b);
    }
    for (j, m) in product.active() {
        acc.add(m * f.deriv_at_zero(j) * g.deriv_at_zero(j));
    }
    Ok(acc.value())
}

/// Per-degree record of the constructed basis.
#[derive(Debug, Clone)]
pub struct BasisEntry {
    /// Orthonormal q_n as an expansion in {l_k}.
    q: LaguerreExpansion,
    /// <Q_n, Q_n>_S with Q_n sharing L_n's leading coefficient.
    sobolev_norm_sq: f64,
    /// q_n^{(k)}(0) for k = 0..=N+1.
    derivs_at_zero: Vec<f64>,
    /// Coefficients b_j(n) of q_n = sum_j b_j(n) x^j l_{n-j}^{alpha+2j};
    /// present once n >= N+1.
    connection: Option<Vec<f64>>,
    /// Max relative deviation of the representation above on the check grid.
    representation_residual: Option<f64>,
}

/// The constructed basis for one product, degrees 0..=n_max.
#[derive(Debug, Clone)]
pub struct SobolevBasisCache {
    product: SobolevProduct,
    entries: Vec<BasisEntry>,
}

impl SobolevBasisCache {
    #[inline]
    pub fn product(&self) -> &SobolevProduct {
        &self.product
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.product.alpha()
    }

    #[inline]
    pub fn n_max(&self) -> usize {
        self.entries.len() - 1
    }

    #[inline]
    pub fn q(&self, n: usize) -> &LaguerreExpansion {
        &self.entries[n].q
    }

    /// <Q_n, Q_n>_S for the leading-coefficient-matched Q_n.
    #[inline]
    pub fn sobolev_norm_sq(&self, n: usize) -> f64 {
        self.entries[n].sobolev_norm_sq
    }

    /// <Q_n, Q_n>_S / ||L_n||^2, the norm-equivalence ratio.
    pub fn norm_ratio(&self, n: usize) -> f64 {
        self.entries[n].sobolev_norm_sq / laguerre_norm_sq(self.alpha(), n)
    }

    /// q_n^{(k)}(0), cached for k <= N+1.
    pub fn q_deriv_zero(&self, n: usize, k: usize) -> f64 {
        self.entries[n].derivs_at_zero[k]
    }

    /// q_n^{(k)}(0) / l_n^{(k)}(0).
    pub fn deriv_ratio(&self, k: usize, n: usize) -> f64 {
        self.entries[n].derivs_at_zero[k] / orthonormal_deriv_at_zero(self.alpha(), n, k)
    }

    /// Connection coefficients b_0(n), ..., b_{N+1}(n); defined for
    /// n >= N+1.
    pub fn connection(&self, n: usize) -> Result<&[f64]> {
        self.entries[n].connection.as_deref().ok_or_else(|| {
            Error::domain(format!(
                "connection coefficients need n >= {}, got {n}",
                self.product.representation_order()
            ))
        })
    }

    pub fn representation_residual(&self, n: usize) -> Option<f64> {
        self.entries[n].representation_residual
    }

    /// Sobolev inner product of two cached members through the stored
    /// derivative values (no recomputation of gamma ratios).
    pub fn inner_cached(&self, i: usize, j: usize) -> f64 {
        let mut acc = KahanSum::new();
        for (a, b) in self.entries[i]
            .q
            .coeffs()
            .iter()
            .zip(self.entries[j].q.coeffs())
        {
            acc.add(a * b);
        }
        for (k, m) in self.product.active() {
            acc.add(m * self.entries[i].derivs_at_zero[k] * self.entries[j].derivs_at_zero[k]);
        }
        acc.value()
    }
}

/// Builds the basis by the stage recursion over positive masses.
pub fn build_stagewise(product: &SobolevProduct, n_max: usize) -> Result<SobolevBasisCache> {
    let alpha = product.alpha();
    // stage 0: Q_{n,0} = L_n, stored against the orthonormal basis
    let mut polys: Vec<Vec<f64>> = (0..=n_max)
        .map(|n| {
            let mut v = vec![0.0; n + 1];
            v[n] = laguerre_norm_sq(alpha, n).sqrt();
            v
        })
        .collect();
    let mut norms: Vec<f64> = (0..=n_max).map(|n| laguerre_norm_sq(alpha, n)).collect();

    for (j, mass) in product.active() {
        let dvec: Vec<f64> = (0..=n_max)
            .map(|i| orthonormal_deriv_at_zero(alpha, i, j))
            .collect();
        // running stage kernels over the previous family:
        // kernel_jj = K_{n-1}^{(j,j)}(0,0), kernel_vec = K_{n-1}^{(0,j)}(., 0)
        let mut kernel_jj = KahanSum::new();
        let mut kernel_vec = vec![0.0; n_max + 1];
        let mut next_norms = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let prev = std::mem::take(&mut polys[n]);
            let mut dv_acc = KahanSum::new();
            for (c, d) in prev.iter().zip(&dvec) {
                dv_acc.add(c * d);
            }
            let dv = dv_acc.value();
            let denom = 1.0 + mass * kernel_jj.value();
            let lambda = mass * dv / denom;
            let norm_new = norms[n] + mass * dv * dv / denom;
            if !lambda.is_finite() || !norm_new.is_finite() {
                return Err(Error::numeric(format!(
                    "stagewise construction hit a nonfinite value at mass index {j}, degree {n}"
                )));
            }
            let mut updated = prev.clone();
            for i in 0..n {
                updated[i] -= lambda * kernel_vec[i];
            }
            // fold the degree-n member of the previous family into the
            // running kernels only after it has been used
            let weight = dv / norms[n];
            kernel_jj.add(dv * weight);
            for (acc, &c) in kernel_vec.iter_mut().zip(prev.iter()) {
                *acc += weight * c;
            }
            polys[n] = updated;
            next_norms.push(norm_new);
        }
        norms = next_norms;
    }

    finalize(product.clone(), polys, norms)
}

/// Builds the basis degree-by-degree from the Gram structure
/// I + sum_j M_j d_j d_j^T, solving the bordered system for each new degree.
pub fn build_gram_oracle(product: &SobolevProduct, n_max: usize) -> Result<SobolevBasisCache> {
    let alpha = product.alpha();
    let active: Vec<(usize, f64)> = product.active().collect();
    let s = active.len();
    let dvecs: Vec<Vec<f64>> = active
        .iter()
        .map(|&(j, _)| {
            (0..=n_max)
                .map(|i| orthonormal_deriv_at_zero(alpha, i, j))
                .collect()
        })
        .collect();

    // running kernel matrix B_pq = sum_{m<n} d_p[m] d_q[m]
    let mut big_b = vec![vec![KahanSum::new(); s]; s];
    let mut polys: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    let mut norms: Vec<f64> = Vec::with_capacity(n_max + 1);

    for n in 0..=n_max {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        if s > 0 {
            let mut a = vec![vec![0.0; s]; s];
            let mut rhs = vec![0.0; s];
            for p in 0..s {
                for q in 0..s {
                    a[p][q] = big_b[p][q].value();
                }
                a[p][p] += 1.0 / active[p].1;
                rhs[p] = dvecs[p][n];
            }
            let u = solve_spd_scaled(a, &rhs).map_err(|e| {
                Error::numeric(format!(
                    "gram oracle lost positive-definiteness at degree {n}: {e}"
                ))
            })?;
            for p in 0..s {
                let up = u[p];
                for (c, d) in coeffs[..n].iter_mut().zip(&dvecs[p]) {
                    *c -= up * d;
                }
            }
        }
        // the solve produces the monic-in-l_n polynomial; rescale so the
        // leading coefficient matches L_n
        let h = laguerre_norm_sq(alpha, n).sqrt();
        for c in &mut coeffs {
            *c *= h;
        }
        let q_n = LaguerreExpansion::new(product.param(), coeffs);
        let norm = sobolev_inner(&q_n, &q_n, product)?;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::numeric(format!(
                "gram oracle produced a nonpositive Sobolev norm at degree {n}"
            )));
        }
        for p in 0..s {
            for q in 0..s {
                big_b[p][q].add(dvecs[p][n] * dvecs[q][n]);
            }
        }
        polys.push(q_n.coeffs().to_vec());
        norms.push(norm);
    }

    finalize(product.clone(), polys, norms)
}

/// Solves the SPD system A u = rhs after symmetric diagonal scaling; the
/// scaled matrix has bounded condition number even when the kernel entries
/// span many orders of magnitude.
fn solve_spd_scaled(a: Vec<Vec<f64>>, rhs: &[f64]) -> Result<Vec<f64>> {
    let s = rhs.len();
    let scale: Vec<f64> = (0..s)
        .map(|p| {
            let d = a[p][p];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut m = vec![vec![0.0; s]; s];
    for p in 0..s {
        for q in 0..s {
            m[p][q] = a[p][q] * scale[p] * scale[q];
        }
    }
    // Cholesky m = L L^T
    let mut l = vec![vec![0.0; s]; s];
    for p in 0..s {
        for q in 0..=p {
            let mut sum = m[p][q];
            for r in 0..q {
                sum -= l[p][r] * l[q][r];
            }
            if p == q {
                if sum <= 0.0 {
                    return Err(Error::numeric("Cholesky pivot not positive"));
                }
                l[p][p] = sum.sqrt();
            } else {
                l[p][q] = sum / l[q][q];
            }
        }
    }
    let mut y = vec![0.0; s];
    for p in 0..s {
        let mut sum = rhs[p] * scale[p];
        for r in 0..p {
            sum -= l[p][r] * y[r];
        }
        y[p] = sum / l[p][p];
    }
    let mut x = vec![0.0; s];
    for p in (0..s).rev() {
        let mut sum = y[p];
        for r in p + 1..s {
            sum -= l[r][p] * x[r];
        }
        x[p] = sum / l[p][p];
    }
    Ok((0..s).map(|p| x[p] * scale[p]).collect())
}

/// Shared tail of both constructions: normalize, cache derivative values,
/// solve for connection coefficients, and measure representation residuals.
fn finalize(
    product: SobolevProduct,
    polys: Vec<Vec<f64>>,
    norms: Vec<f64>,
) -> Result<SobolevBasisCache> {
    let alpha = product.alpha();
    let n_max = polys.len() - 1;
    let k_max = product.representation_order(); // N + 1
    let dvecs: Vec<Vec<f64>> = (0..=k_max)
        .map(|k| {
            (0..=n_max)
                .map(|i| orthonormal_deriv_at_zero(alpha, i, k))
                .collect()
        })
        .collect();

    let mut entries = Vec::with_capacity(n_max + 1);
    for (n, (coeffs, norm)) in polys.into_iter().zip(norms).enumerate() {
        let scale = norm.sqrt();
        let q_coeffs: Vec<f64> = coeffs.iter().map(|c| c / scale).collect();
        if q_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::numeric(format!(
                "normalization produced a nonfinite coefficient at degree {n}"
            )));
        }
        let mut derivs = Vec::with_capacity(k_max + 1);
        for dvec in &dvecs {
            let mut acc = KahanSum::new();
            for (c, d) in q_coeffs.iter().zip(dvec) {
                acc.add(c * d);
            }
            derivs.push(acc.value());
        }
        let connection = if n >= k_max {
            Some(solve_connection(alpha, n, k_max, &derivs))
        } else {
            None
        };
        entries.push(BasisEntry {
            q: LaguerreExpansion::new(product.param(), q_coeffs),
            sobolev_norm_sq: norm,
            derivs_at_zero: derivs,
            connection,
            representation_residual: None,
        });
    }

    let mut cache = SobolevBasisCache { product, entries };
    measure_representation_residuals(&mut cache)?;
    Ok(cache)
}

/// Solves the lower-triangular system
/// q_n^{(k)}(0) / l_n^{(k)}(0) = sum_{j<=k} b_j(n) C(k,j) j! A_j(k,n),
/// k = 0..=N+1, with A_j(k,n) = l_{n-j,alpha+2j}^{(k-j)}(0) / l_n^{(k)}(0).
fn solve_connection(alpha: f64, n: usize, k_max: usize, derivs: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let lk = orthonormal_deriv_at_zero(alpha, n, k);
        let mut acc = derivs[k] / lk;
        for (j, &bj) in b.iter().enumerate() {
            acc -= bj * falling_factorial(k, j) * coeff_a(alpha, j, k, n);
        }
        b.push(acc / (falling_factorial(k, k) * coeff_a(alpha, k, k, n)));
    }
    b
}

/// C(k,j) * j! = k! / (k-j)!
fn falling_factorial(k: usize, j: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..j {
        v *= (k - i) as f64;
    }
    v
}

fn coeff_a(alpha: f64, j: usize, k: usize, n: usize) -> f64 {
    orthonormal_deriv_at_zero(alpha + 2.0 * j as f64, n - j, k - j)
        / orthonormal_deriv_at_zero(alpha, n, k)
}

/// Evaluates the representation sum_j b_j x^j l_{n-j}^{alpha+2j}(x) against
/// q_n on a quadrature grid. The comparison runs on weighted values
/// (q e^{-x/2}), which stay O(1) across the grid, so "relative to the max"
/// is meaningful everywhere.
fn measure_representation_residuals(cache: &mut SobolevBasisCache) -> Result<()> {
    let alpha = cache.alpha();
    let n_max = cache.n_max();
    let k_max = cache.product.representation_order();
    let rule = build_quadrature(alpha, (n_max + 2).max(32))?;
    let nodes: Vec<f64> = rule.nodes().to_vec();

    for n in k_max..=n_max {
        let b = cache.entries[n].connection.clone().expect("solved above");
        let q = &cache.entries[n].q;
        let mut worst = 0.0_f64;
        let mut scale = 0.0_f64;
        for &x in &nodes {
            let direct = q.eval_weighted(x);
            let mut rep = KahanSum::new();
            for (j, &bj) in b.iter().enumerate() {
                if bj != 0.0 {
                    rep.add(
                        bj * x.powi(j as i32) * weighted_value(alpha + 2.0 * j as f64, n - j, x),
                    );
                }
            }
            worst = worst.max((direct - rep.value()).abs());
            scale = scale.max(direct.abs());
        }
        cache.entries[n].representation_residual =
            Some(if scale > 0.0 { worst / scale } else { worst });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheDoc {
    version: u32,
    alpha: f64,
    masses: Vec<f64>,
    n_max: usize,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    n: usize,
    coeffs: Vec<f64>,
    sobolev_norm_sq: f64,
    derivs_at_zero: Vec<f64>,
    connection: Option<Vec<f64>>,
    representation_residual: Option<f64>,
}

impl SobolevBasisCache {
    pub fn to_json(&self) -> Result<String> {
        let doc = CacheDoc {
            version: CACHE_FORMAT_VERSION,
            alpha: self.alpha(),
            masses: self.product.masses().to_vec(),
            n_max: self.n_max(),
            entries: self
                .entries
                .iter()
                .enumerate()
                .map(|(n, e)| EntryDoc {
                    n,
                    coeffs: e.q.coeffs().to_vec(),
                    sobolev_norm_sq: e.sobolev_norm_sq,
                    derivs_at_zero: e.derivs_at_zero.clone(),
                    connection: e.connection.clone(),
                    representation_residual: e.representation_residual,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CacheDoc = serde_json::from_str(text)?;
        if doc.version != CACHE_FORMAT_VERSION {
            return Err(Error::domain(format!(
                "unsupported cache format version {}",
                doc.version
            )));
        }
        let product = SobolevProduct::new(doc.alpha, doc.masses)?;
        if doc.entries.len() != doc.n_max + 1 {
            return Err(Error::domain("cache document entry count mismatch"));
        }
        let entries = doc
            .entries
            .into_iter()
            .map(|e| BasisEntry {
                q: LaguerreExpansion::new(product.param(), e.coeffs),
                sobolev_norm_sq: e.sobolev_norm_sq,
                derivs_at_zero: e.derivs_at_zero,
                connection: e.connection,
                representation_residual: e.representation_residual,
            })
            .collect();
        Ok(SobolevBasisCache { product, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn classical(alpha: f64) -> SobolevProduct {
        SobolevProduct::new(alpha, vec![]).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let product = SobolevProduct::new(0.0, vec![1.0]).unwrap();
        let one = LaguerreExpansion::unit(product.param(), 0);
        assert_relative_eq!(sobolev_inner(&one, &one, &product).unwrap(), 2.0);

        // all masses zero degenerates to the plain coefficient dot product
        let p0 = classical(0.0);
        let f = LaguerreExpansion::new(p0.param(), vec![1.0, 2.0, 3.0]);
        let g = LaguerreExpansion::new(p0.param(), vec![-1.0, 0.5, 2.0]);
        assert_relative_eq!(
            sobolev_inner(&f, &g, &p0).unwrap(),
            -1.0 + 1.0 + 6.0,
            epsilon = 1e-14
        );

        // mass term only: l_1 and l_2 are orthogonal in L^2
        let l1 = LaguerreExpansion::unit(product.param(), 1);
        let l2 = LaguerreExpansion::unit(product.param(), 2);
        let expect = 1.0 * l1.eval(0.0) * l2.eval(0.0);
        assert_relative_eq!(
            sobolev_inner(&l1, &l2, &product).unwrap(),
            expect,
            epsilon = 1e-13
        );
    }

    #[test]
    fn inner_product_rejects_alpha_mismatch() {
        let product = SobolevProduct::new(0.0, vec![1.0]).unwrap();
        let f = LaguerreExpansion::unit(LaguerreParam::new(0.5).unwrap(), 1);
        let g = LaguerreExpansion::unit(product.param(), 1);
        assert!(sobolev_inner(&f, &g, &product).is_err());
    }

    #[test]
    fn classical_case_is_exact_unit_vectors() {
        for builder in [build_stagewise, build_gram_oracle] {
            let cache = builder(&classical(0.5), 40).unwrap();
            for n in 0..=40 {
                let coeffs = cache.q(n).coeffs();
                for (i, &c) in coeffs.iter().enumerate() {
                    if i == n {
                        assert!((c - 1.0).abs() <= 1e-12, "n={n}: leading {c}");
                    } else {
                        assert!(c.abs() <= 1e-12, "n={n}, i={i}: {c}");
                    }
                }
                assert!((cache.norm_ratio(n) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_mass_degree_one_closed_form() {
        // alpha = 0, M_0 = M: Q_1(x) = 1/(1+M) - x = l_1 - (M/(1+M)) l_0
        let product = SobolevProduct::new(0.0, vec![1.0]).unwrap();
        for builder in [build_stagewise, build_gram_oracle] {
            let cache = builder(&product, 4).unwrap();
            let norm_sq = cache.sobolev_norm_sq(1);
            assert_relative_eq!(norm_sq, 1.5, epsilon = 1e-12);
            let q1 = cache.q(1);
            let scale = norm_sq.sqrt();
            assert_relative_eq!(q1.coeffs()[0] * scale, -0.5, epsilon = 1e-12);
            assert_relative_eq!(q1.coeffs()[1] * scale, 1.0, epsilon = 1e-12);
            // <Q_1, 1>_S = 0
            let one = LaguerreExpansion::unit(product.param(), 0);
            assert_abs_diff_eq!(
                sobolev_inner(q1, &one, &product).unwrap(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn single_mass_closed_form_chain() {
        // alpha = 0, M_0 = 1 admits closed forms:
        //   <Q_n,Q_n>_S / ||L_n||^2 = (n+2)/(n+1)
        //   q_n(0)/l_n(0) = 1/sqrt((n+1)(n+2))
        let product = SobolevProduct::new(0.0, vec![1.0]).unwrap();
        let cache = build_stagewise(&product, 60).unwrap();
        for &n in &[1usize, 5, 23, 60] {
            let nf = n as f64;
            assert_relative_eq!(
                cache.norm_ratio(n),
                (nf + 2.0) / (nf + 1.0),
                max_relative = 1e-10
            );
            assert_relative_eq!(
                cache.deriv_ratio(0, n),
                1.0 / ((nf + 1.0) * (nf + 2.0)).sqrt(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn orthonormality_two_masses() {
        let product = SobolevProduct::new(0.0, vec![1.0, 1.0]).unwrap();
        let cache = build_stagewise(&product, 30).unwrap();
        for i in 0..=30 {
            for j in i..=30 {
                let inner = sobolev_inner(cache.q(i), cache.q(j), &product).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(inner, target, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn builders_agree() {
        for (alpha, masses) in [
            (0.0, vec![1.0]),
            (0.5, vec![1.0, 1.0]),
            (-0.5, vec![1.0, 0.0, 1.0]),
            (1.0, vec![0.5, 0.0, 0.0, 2.0]),
        ] {
            let product = SobolevProduct::new(alpha, masses).unwrap();
            let a = build_stagewise(&product, 50).unwrap();
            let b = build_gram_oracle(&product, 50).unwrap();
            for n in 0..=50 {
                let ca = a.q(n).coeffs();
                let cb = b.q(n).coeffs();
                let scale = ca.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
                for i in 0..=n {
                    assert!(
                        (ca[i] - cb[i]).abs() <= 1e-9 * scale,
                        "alpha={alpha} n={n} i={i}: {} vs {}",
                        ca[i],
                        cb[i]
                    );
                }
            }
        }
    }

    #[test]
    fn connection_identity_for_classical() {
        let cache = build_stagewise(&classical(0.5), 10).unwrap();
        for n in 0..=10 {
            let b = cache.connection(n).unwrap();
            assert_eq!(b.len(), 1);
            assert_relative_eq!(b[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn connection_limit_single_mass() {
        // alpha = 0, masses (1): b_0 -> 0 and b_1 -> -1/sqrt(2)
        let product = SobolevProduct::new(0.0, vec![1.0]).unwrap();
        let cache = build_stagewise(&product, 200).unwrap();
        let b = cache.connection(200).unwrap();
        assert!(b[0].abs() < 0.01, "b_0(200) = {}", b[0]);
        assert_abs_diff_eq!(b[1], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 0.01);

        // alpha = 1 variant: b_1 -> -1/sqrt(6)
        let product = SobolevProduct::new(1.0, vec![1.0]).unwrap();
        let cache = build_stagewise(&product, 200).unwrap();
        let b = cache.connection(200).unwrap();
        assert_abs_diff_eq!(b[1], -1.0 / 6.0_f64.sqrt(), epsilon = 0.01);
    }

    #[test]
    fn representation_residual_small() {
        let product = SobolevProduct::new(0.5, vec![1.0, 0.0, 1.0]).unwrap();
        let cache = build_stagewise(&product, 80).unwrap();
        for n in product.representation_order()..=80 {
            let r = cache.representation_residual(n).unwrap();
            assert!(r <= 1e-8, "n={n}: residual {r}");
        }
    }

    #[test]
    fn json_round_trip() {
        let product = SobolevProduct::new(0.5, vec![1.0, 1.0]).unwrap();
        let cache = build_stagewise(&product, 12).unwrap();
        let text = cache.to_json().unwrap();
        let back = SobolevBasisCache::from_json(&text).unwrap();
        assert_eq!(back.n_max(), cache.n_max());
        for n in 0..=12 {
            assert_eq!(back.q(n).coeffs(), cache.q(n).coeffs());
            assert_eq!(back.sobolev_norm_sq(n), cache.sobolev_norm_sq(n));
        }
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(SobolevProduct::new(0.0, vec![-0.5]).is_err());
    }
}
