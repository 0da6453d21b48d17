//! Log-domain arithmetic, compensated summation and a golden-section minimizer.
//!
//! Every runtime in this crate can exceed the range of an `f64` (a block of
//! length 1100 already has a plateau of 2^1100 points), so sums are carried as
//! natural logarithms and only exponentiated at the very end.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `ln(Σ exp(tᵢ))`, shifted by the largest term and summed with compensation.
pub fn ln_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let acc: CompensatedSum = terms.iter().map(|t| (t - max).exp()).collect();
    max + acc.total().ln()
}

/// `ln C(n, k)`. Exact integer arithmetic up to n = 120, log-gamma beyond.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= 120 {
        return (binomial_u128(n, k) as f64).ln();
    }
    let (n, k) = (n as f64, k as f64);
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// `ln C(n, j)` for every j in `0..=n`.
pub fn ln_binomial_row(n: u64) -> Vec<f64> {
    (0..=n).map(|j| ln_binomial(n, j)).collect()
}

/// Exact binomial coefficient; panics on overflow (n ≤ 120 is always safe).
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1) because c = C(n, i) here.
        c = c
            .checked_mul((n - i) as u128)
            .expect("binomial coefficient overflows u128")
            / (i + 1) as u128;
    }
    c
}

/// `ln(1 − (1 − 2p)^j)` for p in (0, 1) and j ≥ 1, without cancellation.
pub fn ln_one_minus_pow(p: f64, j: u64) -> f64 {
    debug_assert!(j >= 1);
    let jf = j as f64;
    if p == 0.5 {
        0.0
    } else if p < 0.5 {
        // (1-2p)^j in (0, 1)
        (-(jf * (-2.0 * p).ln_1p()).exp_m1()).ln()
    } else {
        // 1 - 2p in (-1, 0): the power alternates in sign
        let ln_abs = jf * (2.0 * p - 2.0).ln_1p();
        if j % 2 == 0 {
            (-ln_abs.exp_m1()).ln()
        } else {
            ln_abs.exp().ln_1p()
        }
    }
}

/// `ln(eʸ − 1)` for y > 0, valid far beyond the overflow point of `exp`.
pub fn ln_expm1(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    if y > 40.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// `ln(f64::MAX)`.
pub const LN_F64_MAX: f64 = 709.782_712_893_384;

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `tol`.
pub fn golden_section<F>(f: F, lo: f64, hi: f64, tol: f64) -> Minimum
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
        if evaluations > 10_000 {
            break;
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    // the endpoints are never evaluated by the interior iteration
    let mut best = Minimum { x, fx, evaluations };
    for end in [lo, hi] {
        let fe = f(end);
        best.evaluations += 1;
        if fe < best.fx {
            best.x = end;
            best.fx = fe;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..1_000_000 {
            acc.add(1e-16);
        }
        assert!((acc.total() - (1.0 + 1e-10)).abs() < 1e-15);
    }

    #[test]
    fn ln_sum_exp_matches_direct_sum() {
        let xs = [0.5_f64, 2.0, 3.25, 1e-3];
        let direct: f64 = xs.iter().sum();
        let lns: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        assert!((ln_sum_exp(&lns).exp() - direct).abs() < 1e-14 * direct);
        assert_eq!(ln_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_sum_exp_survives_overflowing_terms() {
        let lns = [2000.0, 2000.0];
        assert!((ln_sum_exp(&lns) - (2000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_u128(5, 2), 10);
        assert_eq!(binomial_u128(60, 30), 118_264_581_564_861_424);
        assert_eq!(binomial_u128(4, 7), 0);
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-15);
        // the log-gamma branch agrees with the exact branch where both apply
        let exact = (binomial_u128(120, 37) as f64).ln();
        let lg = libm::lgamma(121.0) - libm::lgamma(38.0) - libm::lgamma(84.0);
        assert!((exact - lg).abs() < 1e-11);
        assert!((ln_binomial(1000, 0)).abs() < 1e-9);
    }

    #[test]
    fn one_minus_pow_all_regimes() {
        for &(p, j) in &[
            (0.1f64, 3u64),
            (0.25, 1),
            (0.5, 7),
            (0.7, 2),
            (0.7, 3),
            (0.95, 5),
        ] {
            let direct = 1.0 - (1.0 - 2.0 * p).powi(j as i32);
            let got = ln_one_minus_pow(p, j).exp();
            assert!(
                (got - direct).abs() <= 1e-12 * direct.abs().max(1e-300),
                "{p} {j}"
            );
        }
        // tiny p: 1 - (1-2p)^4 = 8p - 24p² + O(p³), where the direct form cancels
        let p = 1e-9;
        let got = ln_one_minus_pow(p, 4).exp();
        assert!((got / (8.0 * p - 24.0 * p * p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ln_expm1_is_continuous_at_switch() {
        let a = ln_expm1(40.0 - 1e-12);
        let b = ln_expm1(40.0 + 1e-12);
        assert!((a - b).abs() < 1e-10);
        assert!((ln_expm1(1.0) - (std::f64::consts::E - 1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let m = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((m.x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn golden_section_reports_boundary_minimum() {
        let m = golden_section(|x| 1.0 / x, 1e-9, 0.5, 1e-10);
        assert_eq!(m.x, 0.5);
    }
}
