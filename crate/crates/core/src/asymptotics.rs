//! The sum s(m), the Taylor constants a and b of the block time, asymptotic
//! BlockLeadingOnes runtimes and optimal static and fitness-dependent rates.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_walk::MutationRate;
use crate::numeric::{binomial_u128, golden_section, ln_binomial, ln_sum_exp, CompensatedSum};
use crate::runtime_formulas::{ln_needle_sum_raw, EstimateMethod, RuntimeEstimate};

/// Lower end of the search interval for optimal rates.
pub const RATE_SEARCH_LO: f64 = 1e-9;
/// Upper end of the search interval for optimal rates.
pub const RATE_SEARCH_HI: f64 = 0.5;
/// Golden-section tolerance in p.
pub const RATE_SEARCH_TOL: f64 = 1e-10;

/// `s(m) = Σ_{j=1}^m (2^j - 1) / j`.
pub fn s_sum(m: usize) -> Result<f64> {
    Ok(ln_s_sum(m)?.exp())
}

/// `ln s(m)`, finite for every m.
pub fn ln_s_sum(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("s(m) needs m >= 1"));
    }
    if m <= 1000 {
        let acc: CompensatedSum = (1..=m)
            .map(|j| (2f64.powi(j as i32) - 1.0) / j as f64)
            .collect();
        return Ok(acc.total().ln());
    }
    let terms: Vec<f64> = (1..=m)
        .map(|j| {
            let jf = j as f64;
            jf * LN_2 + (-(-jf * LN_2).exp()).ln_1p() - jf.ln()
        })
        .collect();
    Ok(ln_sum_exp(&terms))
}

/// `s(m) = Σ_{j=1}^m C(m,j) / j`, the binomial form; used as a cross-check.
pub fn s_sum_binomial(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("s(m) needs m >= 1"));
    }
    let terms: Vec<f64> = (1..=m)
        .map(|j| ln_binomial(m as u64, j as u64) - (j as f64).ln())
        .collect();
    Ok(ln_sum_exp(&terms).exp())
}

fn lcm_up_to(m: u64) -> u128 {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=m as u128).fold(1, |l, j| l / gcd(l, j) * j)
}

/// Both forms of s(m) scaled by `lcm(1..m)`, as exact integers. `None` for m > 40.
pub fn s_sum_scaled_exact(m: usize) -> Option<(u128, u128, u128)> {
    if m == 0 || m > 40 {
        return None;
    }
    let l = lcm_up_to(m as u64);
    let binomial: u128 = (1..=m as u64)
        .map(|j| binomial_u128(m as u64, j) * (l / j as u128))
        .sum();
    let alternate: u128 = (1..=m as u64)
        .map(|j| ((1u128 << j) - 1) * (l / j as u128))
        .sum();
    Some((binomial, alternate, l))
}

/// `s(ℓ)` and the constants of the Taylor-simplified block time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockConstants {
    pub ell: usize,
    pub s_ell: f64,
    pub a: f64,
    pub b: f64,
}

/// `b = s(ℓ)/2^{ℓ+1}` and `a = 1/2 - (1 + s(ℓ))/2^{ℓ+1}`.
pub fn block_constants(ell: usize) -> Result<BlockConstants> {
    let ln_s = ln_s_sum(ell)?;
    let ln_scale = (ell as f64 + 1.0) * LN_2;
    let b = (ln_s - ln_scale).exp();
    let a = 0.5 - (-ln_scale).exp() - b;
    Ok(BlockConstants {
        ell,
        s_ell: ln_s.exp(),
        a,
        b,
    })
}

/// `(2^ℓ/(2^ℓ-1)) (2^ℓ/(1-p)^k) (b/p + a)`, the block time with the O(p) term dropped.
pub fn taylor_block_time(k: usize, ell: usize, p: MutationRate) -> Result<f64> {
    let bc = block_constants(ell)?;
    let p = p.get();
    let ell_f = ell as f64;
    let ln = -(-(-ell_f * LN_2).exp()).ln_1p() + ell_f * LN_2 - k as f64 * (-p).ln_1p()
        + (bc.b / p + bc.a).ln();
    Ok(ln.exp())
}

/// An asymptotic runtime, flagged when its parameters are outside the regime
/// where the approximation is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRuntime {
    pub estimate: RuntimeEstimate,
    pub regime_warning: bool,
}

/// `(n 2^ℓ/ℓ)(b n/c² + a/c)(e^c - 1)` for the static rate `c/n`.
///
/// Flags `regime_warning` when `ell > n/10`.
pub fn blo_asymptotic_static(n: usize, ell: usize, c: f64) -> Result<AsymptoticRuntime> {
    if !(c > 0.0) {
        return Err(Error::domain(format!("c must be positive, got {c}")));
    }
    if n == 0 || ell == 0 {
        return Err(Error::domain("n and ell must be positive"));
    }
    let bc = block_constants(ell)?;
    let (nf, lf) = (n as f64, ell as f64);
    let ln =
        nf.ln() + lf * LN_2 - lf.ln() + (bc.b * nf / (c * c) + bc.a / c).ln() + c.exp_m1().ln();
    Ok(AsymptoticRuntime {
        estimate: RuntimeEstimate::from_ln(ln, EstimateMethod::Asymptotic),
        regime_warning: 10 * ell > n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    ClosedFormAsymptotic,
    NumericMinimization,
}

/// A mutation rate together with the runtime it is predicted to achieve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalRateResult {
    pub rate: MutationRate,
    pub predicted_runtime: RuntimeEstimate,
    pub method: RateMethod,
    /// The rate sits on the boundary of the admissible interval.
    pub boundary: bool,
    /// The unimodality check failed and a dense scan was used instead.
    pub scan_fallback: bool,
}

/// The minimizer λ of `g(x) = (e^x - 1)/x²` and the minimum α = g(λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticOptimum {
    pub lambda: f64,
    pub alpha: f64,
    /// `e^λ(λ - 2) + 2`, zero at the exact root.
    pub stationarity_residual: f64,
}

/// `g(x) = (e^x - 1)/x²`.
pub fn static_rate_objective(x: f64) -> f64 {
    x.exp_m1() / (x * x)
}

/// Solves `e^x(x - 2) + 2 = 0` on its positive branch by safeguarded Newton.
pub fn static_optimum() -> StaticOptimum {
    let h = |x: f64| x.exp() * (x - 2.0) + 2.0;
    let dh = |x: f64| x.exp() * (x - 1.0);
    // x = 0 is a double root; the positive root lies in [1, 2]
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    let mut x = 1.6;
    for _ in 0..200 {
        let hx = h(x);
        if hx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - hx / dh(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() < 1e-15 || hi - lo < 1e-15;
        x = next;
        if done {
            break;
        }
    }
    StaticOptimum {
        lambda: x,
        alpha: static_rate_objective(x),
        stationarity_residual: h(x),
    }
}

/// `α b 2^ℓ n² / ℓ`, the runtime at the optimal static rate λ/n.
pub fn optimal_static_runtime(n: usize, ell: usize) -> Result<f64> {
    Ok(ln_optimal_static_runtime(n, ell)?.exp())
}

fn ln_optimal_static_runtime(n: usize, ell: usize) -> Result<f64> {
    let bc = block_constants(ell)?;
    let alpha = static_optimum().alpha;
    Ok(alpha.ln() + bc.b.ln() + ell as f64 * LN_2 + 2.0 * (n as f64).ln() - (ell as f64).ln())
}

/// `α 2^ℓ n² / ℓ²`, the large-ℓ form of [`optimal_static_runtime`] using b ≈ 1/ℓ.
pub fn optimal_static_runtime_large_ell(n: usize, ell: usize) -> f64 {
    let (nf, lf) = (n as f64, ell as f64);
    (static_optimum().alpha.ln() + lf * LN_2 + 2.0 * nf.ln() - 2.0 * lf.ln()).exp()
}

/// The rate λ/n and its asymptotic runtime.
pub fn optimal_static_rate(n: usize, ell: usize) -> Result<OptimalRateResult> {
    let opt = static_optimum();
    let rate = MutationRate::new(opt.lambda / n as f64)?;
    Ok(OptimalRateResult {
        rate,
        predicted_runtime: RuntimeEstimate::from_ln(
            ln_optimal_static_runtime(n, ell)?,
            EstimateMethod::Asymptotic,
        ),
        method: RateMethod::ClosedFormAsymptotic,
        boundary: false,
        scan_fallback: false,
    })
}

/// `ln E[T'_{mℓ}]` at rate p: the level-m summand of the exact total.
pub fn adaptive_objective_ln(m: usize, ell: usize, p: f64) -> f64 {
    let k = (m * ell) as f64;
    -k * (-p).ln_1p() + ln_needle_sum_raw(ell, p)
}

/// Closed-form fitness-dependent rate and its limiting forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRate {
    pub result: OptimalRateResult,
    /// `p̃(k)`, the rate scaled by k = mℓ.
    pub p_tilde: f64,
    /// `(√(1 + 2/m) - 1)/ℓ`.
    pub large_ell_rate: f64,
    /// `1/k`.
    pub large_m_rate: f64,
}

/// `p̃(k)/k` with `p̃(k) = (bk/2a)(√(1 + 4a/(bk)) - 1)` and k = mℓ.
///
/// Rates at or above 1/2 are clamped to 1/2 and flagged as boundary values.
pub fn optimal_adaptive_rate_closed(m: usize, ell: usize) -> Result<ClosedFormRate> {
    if m == 0 {
        return Err(Error::domain("the closed-form rate needs m >= 1"));
    }
    let bc = block_constants(ell)?;
    let k = (m * ell) as f64;
    // rationalized to avoid cancellation when 4a/(bk) is small
    let p_tilde = 2.0 / (1.0 + (1.0 + 4.0 * bc.a / (bc.b * k)).sqrt());
    let raw = p_tilde / k;
    let boundary = raw >= RATE_SEARCH_HI;
    let p = if boundary { RATE_SEARCH_HI } else { raw };
    let mf = m as f64;
    Ok(ClosedFormRate {
        result: OptimalRateResult {
            rate: MutationRate::new(p)?,
            predicted_runtime: RuntimeEstimate::from_ln(
                adaptive_objective_ln(m, ell, p),
                EstimateMethod::ExactFourier,
            ),
            method: RateMethod::ClosedFormAsymptotic,
            boundary,
            scan_fallback: false,
        },
        p_tilde,
        large_ell_rate: 2.0 / (mf * (1.0 + (1.0 + 2.0 / mf).sqrt())) / ell as f64,
        large_m_rate: 1.0 / k,
    })
}

const SCAN_POINTS: usize = 400;

fn log_grid(points: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = (RATE_SEARCH_LO.ln(), RATE_SEARCH_HI.ln());
    (0..points).map(move |i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
}

/// Numerically optimal rate at fitness m: minimizes `E[T'_{mℓ}]` over `[1e-9, 1/2]`.
///
/// The golden-section result is audited against a log-spaced grid; if the grid
/// finds a better point, the search is redone around it and `scan_fallback` is set.
pub fn optimal_adaptive_rate_exact(m: usize, ell: usize) -> Result<OptimalRateResult> {
    if ell == 0 {
        return Err(Error::domain("block length must be at least 1"));
    }
    let objective = |p: f64| adaptive_objective_ln(m, ell, p);
    let (x, fx, scan_fallback) = if m == 0 {
        // no locked bits: the objective decreases all the way to p = 1/2
        (RATE_SEARCH_HI, objective(RATE_SEARCH_HI), false)
    } else {
        let gs = golden_section(objective, RATE_SEARCH_LO, RATE_SEARCH_HI, RATE_SEARCH_TOL);
        let grid: Vec<f64> = log_grid(SCAN_POINTS).collect();
        let (best_i, best_f) = grid.iter().map(|&p| objective(p)).enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, f)| if f < acc.1 { (i, f) } else { acc },
        );
        if best_f < gs.fx - 1e-12 * gs.fx.abs().max(1.0) {
            let lo = grid[best_i.saturating_sub(1)];
            let hi = grid[(best_i + 1).min(SCAN_POINTS - 1)];
            let local = golden_section(objective, lo, hi, RATE_SEARCH_TOL);
            (local.x, local.fx, true)
        } else {
            (gs.x, gs.fx, false)
        }
    };
    Ok(OptimalRateResult {
        rate: MutationRate::new(x)?,
        predicted_runtime: RuntimeEstimate::from_ln(fx, EstimateMethod::ExactFourier),
        method: RateMethod::NumericMinimization,
        boundary: x >= RATE_SEARCH_HI - RATE_SEARCH_TOL,
        scan_fallback,
    })
}

/// `(e/2) b 2^ℓ n²/ℓ`, the runtime under optimal fitness-dependent rates.
pub fn optimal_adaptive_runtime(n: usize, ell: usize) -> Result<f64> {
    let bc = block_constants(ell)?;
    let (nf, lf) = (n as f64, ell as f64);
    Ok(((0.5 * E * bc.b).ln() + lf * LN_2 + 2.0 * nf.ln() - lf.ln()).exp())
}

/// `2^ℓ e (bk + a)`, the minimal expected time of a single block after k locked bits.
pub fn min_block_runtime(k: usize, ell: usize) -> Result<f64> {
    let bc = block_constants(ell)?;
    Ok((ell as f64 * LN_2).exp() * E * (bc.b * k as f64 + bc.a))
}

/// `m* = 2/ln 2`, where `f(m) = α 2^m/m²` attains its minimum.
pub fn growth_branch_start() -> f64 {
    2.0 / LN_2
}

fn ln_growth(m: f64, alpha: f64) -> f64 {
    alpha.ln() + m * LN_2 - 2.0 * m.ln()
}

/// `f(m) = α 2^m / m²`.
pub fn growth_function(m: f64) -> f64 {
    ln_growth(m, static_optimum().alpha).exp()
}

/// Inverts `f(m) = α 2^m/m²` on its increasing branch `m > 2/ln 2`.
pub fn invert_growth(gn: f64) -> Result<f64> {
    let alpha = static_optimum().alpha;
    let start = growth_branch_start();
    let floor = ln_growth(start, alpha).exp();
    if !(gn > floor) || !gn.is_finite() {
        return Err(Error::domain(format!(
            "{gn} is not above the minimum {floor:.6} of the growth function"
        )));
    }
    let target = gn.ln();
    let g = |m: f64| ln_growth(m, alpha) - target;
    let (mut lo, mut hi) = (start, 2.0 * start);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut m = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gm = g(m);
        if gm < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        let slope = LN_2 - 2.0 / m;
        let mut next = m - gm / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - m).abs() <= 1e-14 * m;
        m = next;
        if done {
            break;
        }
    }
    Ok(m)
}

/// One evaluated instance of an inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityInstance {
    pub family: String,
    pub instance: String,
    pub passed: bool,
    /// Slack of the inequality; negative when it fails.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub instances: Vec<InequalityInstance>,
}

impl InequalityReport {
    pub fn all_passed(&self) -> bool {
        self.instances.iter().all(|i| i.passed)
    }

    pub fn family(&self, family: &str) -> impl Iterator<Item = &InequalityInstance> {
        let family = family.to_owned();
        self.instances.iter().filter(move |i| i.family == family)
    }

    pub fn family_passed(&self, family: &str) -> bool {
        let mut any = false;
        for i in self.family(family) {
            any = true;
            if !i.passed {
                return false;
            }
        }
        any
    }
}

pub const FAMILY_SIMPLE_EXP: &str = "simple-exp";
pub const FAMILY_BOUNDING_SUM: &str = "bounding-sum";
pub const FAMILY_CENTRAL_BAND: &str = "central-band";
pub const FAMILY_STIRLING: &str = "stirling";
pub const FAMILY_S_DUAL: &str = "s-dual-identity";
pub const FAMILY_S_LOWER: &str = "s-lower-bound";
pub const FAMILY_S_UPPER: &str = "s-upper-bound";

/// Smallest m from which `s(m) ≤ (2^{m+1}/m)(1 + 1.1/m)` holds.
pub const S_UPPER_FROM: usize = 35;

/// `s(m) / (2^{m+1}/m)`.
pub fn s_ratio(m: usize) -> Result<f64> {
    let ln = ln_s_sum(m)? - (m as f64 + 1.0) * LN_2 + (m as f64).ln();
    Ok(ln.exp())
}

/// Upper-bound instances of `s(m) ≤ (2^{m+1}/m)(1 + c/m)` over `range`.
pub fn s_upper_bound_instances(
    c: f64,
    range: std::ops::RangeInclusive<usize>,
) -> Vec<InequalityInstance> {
    range
        .map(|m| {
            let margin = 1.0 + c / m as f64 - s_ratio(m).expect("m >= 1");
            InequalityInstance {
                family: FAMILY_S_UPPER.into(),
                instance: format!("m={m},c={c}"),
                passed: margin >= 0.0,
                margin,
            }
        })
        .collect()
}

/// Checks the binomial and s(m) inequalities over their configured ranges.
pub fn binomial_inequality_suite() -> InequalityReport {
    let mut out = Vec::new();

    for m in 0u32..=64 {
        let lhs = 1u128 << (m + 2);
        let rhs = m as u128 * (m as u128).saturating_sub(1);
        out.push(InequalityInstance {
            family: FAMILY_SIMPLE_EXP.into(),
            instance: format!("m={m}"),
            passed: lhs >= rhs,
            margin: lhs as f64 - rhs as f64,
        });
    }

    // Σ_{j≤k} C(ℓ,j) (ℓ-2k+1) ≤ C(ℓ,k)(ℓ-k+1), cleared of denominators
    for ell in 1u64..=60 {
        let mut k = 0u64;
        while 2 * k < ell {
            let head: u128 = (0..=k).map(|j| binomial_u128(ell, j)).sum();
            let lhs = head * (ell + 1 - 2 * k) as u128;
            let rhs = binomial_u128(ell, k) * (ell + 1 - k) as u128;
            out.push(InequalityInstance {
                family: FAMILY_BOUNDING_SUM.into(),
                instance: format!("ell={ell},k={k}"),
                passed: lhs <= rhs,
                margin: rhs as f64 - lhs as f64,
            });
            k += 1;
        }
    }

    let alpha = 0.3;
    for ell in [200u64, 2000] {
        let lo = ((1.0 - alpha) * ell as f64 / 2.0).ceil() as u64;
        let hi = ((1.0 + alpha) * ell as f64 / 2.0).floor() as u64;
        let terms: Vec<f64> = (lo..=hi)
            .map(|j| ln_binomial(ell, j) - ell as f64 * LN_2)
            .collect();
        let mass = ln_sum_exp(&terms).exp();
        out.push(InequalityInstance {
            family: FAMILY_CENTRAL_BAND.into(),
            instance: format!("ell={ell},alpha={alpha}"),
            passed: mass >= 0.99,
            margin: mass - 0.99,
        });
    }

    // C(n,k) ≈ √(n/(2πk(n-k))) n^n / (k^k (n-k)^{n-k})
    for n in [10u64, 50, 200, 1000] {
        for k in [1, n / 10, n / 4, n / 2] {
            if k == 0 || k >= n {
                continue;
            }
            let (nf, kf, rf) = (n as f64, k as f64, (n - k) as f64);
            let ln_approx = 0.5 * (nf / (2.0 * std::f64::consts::PI * kf * rf)).ln() + nf * nf.ln()
                - kf * kf.ln()
                - rf * rf.ln();
            let ratio = (ln_binomial(n, k) - ln_approx).exp();
            let bound = 1.0 / kf.min(rf);
            out.push(InequalityInstance {
                family: FAMILY_STIRLING.into(),
                instance: format!("n={n},k={k}"),
                passed: (ratio - 1.0).abs() <= bound,
                margin: bound - (ratio - 1.0).abs(),
            });
        }
    }

    for m in 1..=40 {
        let (bin, alt, _) = s_sum_scaled_exact(m).expect("m <= 40");
        let f_alt = s_sum(m).expect("m >= 1");
        let f_bin = s_sum_binomial(m).expect("m >= 1");
        let rel = ((f_alt - f_bin) / f_alt).abs();
        out.push(InequalityInstance {
            family: FAMILY_S_DUAL.into(),
            instance: format!("m={m}"),
            passed: bin == alt && rel <= 1e-11,
            margin: 1e-11 - rel,
        });
    }

    for m in 7usize..=60 {
        let margin = s_ratio(m).expect("m >= 1") - (1.0 + 1.0 / (m as f64 - 1.0));
        out.push(InequalityInstance {
            family: FAMILY_S_LOWER.into(),
            instance: format!("m={m}"),
            passed: margin >= 0.0,
            margin,
        });
    }

    out.extend(s_upper_bound_instances(1.1, S_UPPER_FROM..=60));

    InequalityReport { instances: out }
}
