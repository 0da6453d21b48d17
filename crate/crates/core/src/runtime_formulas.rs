//! Exact expected runtimes of the (1+1) EA on Needle and BlockLeadingOnes.
//!
//! Everything is evaluated as a natural logarithm first. Binomials are exact
//! integers up to ℓ = 120 and log-gamma beyond, and the summands
//! `C(ℓ,j) / (1 - (1-2p)^j)` are combined with a shifted compensated sum, so
//! block lengths in the thousands stay finite in log space even when the value
//! itself does not fit in an `f64`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::group_walk::MutationRate;
use crate::numeric::{ln_binomial_row, ln_expm1, ln_one_minus_pow, ln_sum_exp, LN_F64_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Needle,
    BlockLeadingOnes,
}

/// A benchmark instance: dimension `n` split into `n / ell` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub ell: usize,
}

impl ProblemSpec {
    /// Needle on `ell` bits; the whole string is a single block.
    pub fn needle(ell: usize) -> Result<Self> {
        Self::new(ProblemKind::Needle, ell, ell)
    }

    pub fn block_leading_ones(n: usize, ell: usize) -> Result<Self> {
        Self::new(ProblemKind::BlockLeadingOnes, n, ell)
    }

    pub fn new(kind: ProblemKind, n: usize, ell: usize) -> Result<Self> {
        if n == 0 || ell == 0 {
            return Err(Error::domain("n and ell must be positive"));
        }
        if n % ell != 0 {
            return Err(Error::domain(format!(
                "block length {ell} does not divide n = {n}"
            )));
        }
        if kind == ProblemKind::Needle && ell != n {
            return Err(Error::domain("a Needle instance has ell = n"));
        }
        Ok(Self { kind, n, ell })
    }

    /// Number of fitness levels below the optimum, `n / ell`.
    pub fn levels(&self) -> usize {
        self.n / self.ell
    }
}

/// How the mutation rate depends on the current fitness `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "rates", rename_all = "kebab-case")]
pub enum MutationSchedule {
    Static(MutationRate),
    Table(Vec<MutationRate>),
    /// The numerically optimal rate for every fitness level.
    AdaptiveOptimal,
}

impl MutationSchedule {
    /// One rate per fitness level `m = 0 .. n/ell`.
    pub fn resolve(&self, spec: &ProblemSpec) -> Result<Vec<MutationRate>> {
        let levels = spec.levels();
        match self {
            MutationSchedule::Static(p) => Ok(vec![*p; levels]),
            MutationSchedule::Table(rates) => {
                if rates.len() != levels {
                    return Err(Error::ScheduleLength {
                        expected: levels,
                        got: rates.len(),
                    });
                }
                Ok(rates.clone())
            }
            MutationSchedule::AdaptiveOptimal => (0..levels)
                .map(|m| asymptotics::optimal_adaptive_rate_exact(m, spec.ell).map(|r| r.rate))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    ExactFourier,
    Asymptotic,
    Oracle,
    MonteCarlo,
}

impl EstimateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateMethod::ExactFourier => "exact-fourier",
            EstimateMethod::Asymptotic => "asymptotic",
            EstimateMethod::Oracle => "oracle",
            EstimateMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// An expected number of iterations together with its base-2 logarithm.
///
/// When the value does not fit in an `f64`, `value` is `+inf`, `overflow` is
/// set and `log2_value` is the only usable number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEstimate {
    pub value: f64,
    pub log2_value: f64,
    pub method: EstimateMethod,
    pub stderr: Option<f64>,
    pub overflow: bool,
}

impl RuntimeEstimate {
    pub fn from_ln(ln_value: f64, method: EstimateMethod) -> Self {
        let overflow = ln_value > LN_F64_MAX;
        Self {
            value: if overflow {
                f64::INFINITY
            } else {
                ln_value.exp()
            },
            log2_value: ln_value / LN_2,
            method,
            stderr: None,
            overflow,
        }
    }

    pub fn from_value(value: f64, method: EstimateMethod) -> Self {
        Self {
            value,
            log2_value: value.log2(),
            method,
            stderr: None,
            overflow: false,
        }
    }

    pub fn monte_carlo(mean: f64, stderr: Option<f64>) -> Self {
        Self {
            stderr,
            ..Self::from_value(mean, EstimateMethod::MonteCarlo)
        }
    }

    /// Natural logarithm of the value, valid whether or not it overflowed.
    pub fn ln(&self) -> f64 {
        self.log2_value * LN_2
    }
}

fn check_ell(ell: usize) -> Result<()> {
    if ell == 0 {
        Err(Error::domain("block length must be at least 1"))
    } else {
        Ok(())
    }
}

/// `ln Σ_{j=1}^ℓ C(ℓ,j) / (1 - (1-2p)^j)`.
pub fn ln_needle_sum(ell: usize, p: MutationRate) -> f64 {
    ln_needle_sum_raw(ell, p.get())
}

pub(crate) fn ln_needle_sum_raw(ell: usize, p: f64) -> f64 {
    let binom = ln_binomial_row(ell as u64);
    let terms: Vec<f64> = (1..=ell)
        .map(|j| binom[j] - ln_one_minus_pow(p, j as u64))
        .collect();
    ln_sum_exp(&terms)
}

/// `ln(2^ℓ / (2^ℓ - 1))`.
fn ln_off_optimum_factor(ell: usize) -> f64 {
    -(-(2f64).powi(-(ell.min(2000) as i32))).ln_1p()
}

/// Expected time for the walk started uniformly at random to hit `1^ℓ`.
pub fn needle_time_uniform_start(ell: usize, p: MutationRate) -> Result<RuntimeEstimate> {
    check_ell(ell)?;
    Ok(RuntimeEstimate::from_ln(
        ln_needle_sum(ell, p),
        EstimateMethod::ExactFourier,
    ))
}

/// As [`needle_time_uniform_start`] but starting uniformly off the optimum.
pub fn needle_time_excluding_optimum(ell: usize, p: MutationRate) -> Result<RuntimeEstimate> {
    check_ell(ell)?;
    Ok(RuntimeEstimate::from_ln(
        ln_needle_sum(ell, p) + ln_off_optimum_factor(ell),
        EstimateMethod::ExactFourier,
    ))
}

/// Limit of `2^{-ℓ} E[T]` at rate `c/ℓ` as ℓ grows: `1 / (1 - e^{-c})`.
pub fn needle_gks_limit(c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::domain(format!("c must be positive, got {c}")));
    }
    Ok(-1.0 / (-c).exp_m1())
}

/// `2^{-ℓ} Σ_j C(ℓ,j) / (1 - (1-2c/ℓ)^j)`, the Needle time at rate `c/ℓ` in units of 2^ℓ.
pub fn normalized_needle(ell: usize, c: f64) -> Result<f64> {
    check_ell(ell)?;
    let p = MutationRate::new(c / ell as f64)?;
    Ok((ln_needle_sum(ell, p) - ell as f64 * LN_2).exp())
}

fn ln_prefix_factor(k: usize, p: MutationRate) -> f64 {
    -(k as f64) * (-p.get()).ln_1p()
}

/// Expected time to optimize the next block when `k` bits are already locked in.
pub fn block_time(k: usize, ell: usize, p: MutationRate) -> Result<RuntimeEstimate> {
    check_ell(ell)?;
    Ok(RuntimeEstimate::from_ln(
        ln_needle_sum(ell, p) + ln_off_optimum_factor(ell) + ln_prefix_factor(k, p),
        EstimateMethod::ExactFourier,
    ))
}

/// As [`block_time`] but with the block drawn uniformly, so it may already be optimal.
pub fn block_time_allowing_zero(k: usize, ell: usize, p: MutationRate) -> Result<RuntimeEstimate> {
    check_ell(ell)?;
    Ok(RuntimeEstimate::from_ln(
        ln_needle_sum(ell, p) + ln_prefix_factor(k, p),
        EstimateMethod::ExactFourier,
    ))
}

/// Expected time spent on each fitness level `m = 0 .. n/ell`.
pub fn blo_level_times(
    spec: &ProblemSpec,
    sched: &MutationSchedule,
) -> Result<Vec<RuntimeEstimate>> {
    let rates = sched.resolve(spec)?;
    rates
        .iter()
        .enumerate()
        .map(|(m, &p)| block_time_allowing_zero(m * spec.ell, spec.ell, p))
        .collect()
}

/// Expected optimization time from a uniform start, summed over fitness levels.
///
/// A Needle instance is the one-level special case.
pub fn blo_total_time(spec: &ProblemSpec, sched: &MutationSchedule) -> Result<RuntimeEstimate> {
    let levels = blo_level_times(spec, sched)?;
    let lns: Vec<f64> = levels.iter().map(RuntimeEstimate::ln).collect();
    Ok(RuntimeEstimate::from_ln(
        ln_sum_exp(&lns),
        EstimateMethod::ExactFourier,
    ))
}

/// Closed form of [`blo_total_time`] for a static rate, summing the geometric series:
/// `((1-p)^{-n+ℓ} - (1-p)^ℓ) / (1 - (1-p)^ℓ)` times the Needle sum.
pub fn blo_total_time_static(n: usize, ell: usize, p: MutationRate) -> Result<RuntimeEstimate> {
    let spec = ProblemSpec::block_leading_ones(n, ell)?;
    let q = (-p.get()).ln_1p();
    let ln_geom = spec.ell as f64 * q + ln_expm1(-(spec.n as f64) * q)
        - (-(spec.ell as f64 * q).exp_m1()).ln();
    Ok(RuntimeEstimate::from_ln(
        ln_geom + ln_needle_sum(spec.ell, p),
        EstimateMethod::ExactFourier,
    ))
}

/// LeadingOnes at a static rate: `(1/(2p²)) ((1-p)^{-n+1} - (1-p))`.
pub fn leading_ones_time(n: usize, p: MutationRate) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    let p = p.get();
    let q = (-p).ln_1p();
    // (1-p)^{-n+1} - (1-p) = (1-p) ((1-p)^{-n} - 1)
    Ok((1.0 - p) * (-(n as f64) * q).exp_m1() / (2.0 * p * p))
}

/// Plateau-size heuristic `2^ℓ / ((1-p)^k (1 - (1-p)^ℓ))`: effective plateau size
/// over the probability of an acceptable step.
pub fn plateau_heuristic_time(k: usize, ell: usize, p: MutationRate) -> f64 {
    let q = (-p.get()).ln_1p();
    let ln = ell as f64 * LN_2 - k as f64 * q - (-(ell as f64 * q).exp_m1()).ln();
    ln.exp()
}
