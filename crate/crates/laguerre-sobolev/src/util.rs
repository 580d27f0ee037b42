//! Small numeric helpers shared across modules.

/// Neumaier-compensated accumulator. The kernel sums and coefficient dot
/// products mix terms over many orders of magnitude, so plain `+=` is not
/// good enough for the 1e-9 orthogonality targets.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated dot product of two slices (over the common prefix).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for (x, y) in a.iter().zip(b.iter()) {
        acc.add(x * y);
    }
    acc.value()
}

/// Ordinary least squares fit y = intercept + slope * x.
/// Returns (intercept, slope, rms_residual, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - intercept - slope * x;
        ss_res += r * r;
    }
    let rms = (ss_res / n).sqrt();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (intercept, slope, rms, r2)
}

/// Pearson correlation coefficient.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// log(sum(exp(v))) without overflow; `v` entries may be -inf.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut acc = KahanSum::new();
    for &x in v {
        acc.add((x - m).exp());
    }
    m + acc.value().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kahan_recovers_cancelled_tail() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn linear_fit_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (b, a, rms, r2) = linear_fit(&xs, &ys);
        assert_relative_eq!(a, 2.0, epsilon = 1e-12);
        assert_relative_eq!(b, 1.0, epsilon = 1e-12);
        assert!(rms < 1e-12);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let v = [0.0, (2.0f64).ln(), (3.0f64).ln()];
        assert_relative_eq!(log_sum_exp(&v), (6.0f64).ln(), epsilon = 1e-14);
        let big = [700.0, 700.0];
        assert_relative_eq!(log_sum_exp(&big), 700.0 + (2.0f64).ln(), epsilon = 1e-14);
    }
}
