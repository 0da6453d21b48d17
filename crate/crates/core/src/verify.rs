//! Cross-checks between the formulas, the Markov-chain oracles and the
//! asymptotic results, grouped into suites.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, binomial_inequality_suite};
use crate::error::Result;
use crate::group_walk::MutationRate;
use crate::oracle;
use crate::runtime_formulas::{
    blo_total_time, block_time, leading_ones_time, needle_gks_limit, needle_time_uniform_start,
    normalized_needle, MutationSchedule, ProblemSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    FourierOracle,
    BloOracle,
    Inequalities,
    AsymptoticConvergence,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::FourierOracle => "fourier-oracle",
            Suite::BloOracle => "blo-oracle",
            Suite::Inequalities => "inequalities",
            Suite::AsymptoticConvergence => "asymptotic-convergence",
        }
    }
}

/// One verified instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured error, where the check compares against a tolerance.
    pub error: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    fn within(
        name: impl Into<String>,
        error: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed: error <= tolerance,
            error: Some(error),
            tolerance: Some(tolerance),
            detail: detail.into(),
        }
    }

    /// Passes when `errors` is strictly decreasing.
    fn decreasing(name: impl Into<String>, labels: &[String], errors: &[f64]) -> Self {
        let passed = errors.windows(2).all(|w| w[1] < w[0]);
        let detail = labels
            .iter()
            .zip(errors)
            .map(|(l, e)| format!("{l}: {e:.3e}"))
            .collect::<Vec<_>>()
            .join(", ");
        Self {
            name: name.into(),
            passed,
            error: None,
            tolerance: None,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// The rates `{0.5/ℓ, 1/ℓ, 2/ℓ, 0.3, 0.5}` that lie in (0, 1).
pub fn oracle_rates(ell: usize) -> Vec<f64> {
    let l = ell as f64;
    [0.5 / l, 1.0 / l, 2.0 / l, 0.3, 0.5]
        .into_iter()
        .filter(|&p| p > 0.0 && p < 1.0)
        .collect()
}

pub fn run_suite(suite: Suite) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::FourierOracle => fourier_oracle()?,
        Suite::BloOracle => blo_oracle()?,
        Suite::Inequalities => inequalities(),
        Suite::AsymptoticConvergence => asymptotic_convergence()?,
    };
    Ok(VerifyReport {
        suite,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn fourier_oracle() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for ell in 1..=10 {
        for p in oracle_rates(ell) {
            let rate = MutationRate::new(p)?;
            let full = oracle::full_state_hitting_times(ell, rate)?;
            let exact = needle_time_uniform_start(ell, rate)?.value;
            let avg = oracle::uniform_average(&full);
            out.push(Check::within(
                format!("needle ell={ell} p={p:.6}"),
                rel(exact, avg),
                1e-9,
                format!("fourier {exact:.12e}, full-state {avg:.12e}"),
            ));
            let lumped = oracle::lumped_hitting_times(ell, rate)?;
            let target = (1usize << ell) - 1;
            let worst = full
                .iter()
                .enumerate()
                .map(|(x, &t)| (t - lumped[(x ^ target).count_ones() as usize]).abs() / t.max(1.0))
                .fold(0.0, f64::max);
            out.push(Check::within(
                format!("lumped ell={ell} p={p:.6}"),
                worst,
                1e-9,
                "class-wise agreement with the full-state solve",
            ));
        }
    }
    let rate = MutationRate::new(0.02)?;
    let lumped = oracle::lumped_uniform_average(100, rate)?;
    let exact = needle_time_uniform_start(100, rate)?.value;
    out.push(Check::within(
        "lumped ell=100 p=0.02",
        rel(exact, lumped),
        1e-8,
        format!("fourier {exact:.12e}, lumped {lumped:.12e}"),
    ));
    Ok(out)
}

fn fixed_rate(p: f64) -> MutationRate {
    MutationRate::new(p).expect("suite rates lie in (0, 1)")
}

fn blo_oracle() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut cases: Vec<(usize, usize, MutationSchedule, String)> = [
        (2, 1, 0.5),
        (4, 1, 0.25),
        (6, 3, 1.0 / 6.0),
        (8, 2, 0.1),
        (10, 5, 0.05),
        (12, 3, 1.0 / 12.0),
        (12, 4, 0.3),
    ]
    .into_iter()
    .map(|(n, ell, p)| {
        (
            n,
            ell,
            MutationSchedule::Static(fixed_rate(p)),
            format!("static:{p:.6}"),
        )
    })
    .collect();
    cases.push((
        12,
        2,
        MutationSchedule::Table((0..6).map(|m| fixed_rate(0.04 + 0.05 * m as f64)).collect()),
        "table".into(),
    ));
    cases.push((12, 3, MutationSchedule::AdaptiveOptimal, "adaptive".into()));
    for (n, ell, sched, label) in cases {
        let spec = ProblemSpec::block_leading_ones(n, ell)?;
        let chain = oracle::lo_chain_time(&spec, &sched)?;
        let exact = blo_total_time(&spec, &sched)?.value;
        out.push(Check::within(
            format!("blo n={n} ell={ell} {label}"),
            rel(exact, chain),
            1e-8,
            format!("fourier {exact:.12e}, chain {chain:.12e}"),
        ));
    }
    for (n, p) in [(4, 0.25), (50, 0.02), (500, 1.0 / 500.0)] {
        let spec = ProblemSpec::block_leading_ones(n, 1)?;
        let rate = MutationRate::new(p)?;
        let total = blo_total_time(&spec, &MutationSchedule::Static(rate))?.value;
        let closed = leading_ones_time(n, rate)?;
        out.push(Check::within(
            format!("leading-ones n={n} p={p:.6}"),
            rel(total, closed),
            1e-12,
            format!("level sum {total:.15e}, closed form {closed:.15e}"),
        ));
    }
    Ok(out)
}

fn inequalities() -> Vec<Check> {
    let report = binomial_inequality_suite();
    let families = [
        asymptotics::FAMILY_SIMPLE_EXP,
        asymptotics::FAMILY_BOUNDING_SUM,
        asymptotics::FAMILY_CENTRAL_BAND,
        asymptotics::FAMILY_STIRLING,
        asymptotics::FAMILY_S_DUAL,
        asymptotics::FAMILY_S_LOWER,
        asymptotics::FAMILY_S_UPPER,
    ];
    families
        .iter()
        .map(|&family| {
            let instances: Vec<_> = report.family(family).collect();
            let failed: Vec<&str> = instances
                .iter()
                .filter(|i| !i.passed)
                .map(|i| i.instance.as_str())
                .collect();
            let worst = instances
                .iter()
                .map(|i| i.margin)
                .fold(f64::INFINITY, f64::min);
            Check {
                name: family.to_owned(),
                passed: failed.is_empty() && !instances.is_empty(),
                error: None,
                tolerance: None,
                detail: if failed.is_empty() {
                    format!("{} instances, smallest margin {worst:.3e}", instances.len())
                } else {
                    format!("failed: {}", failed.join(" "))
                },
            }
        })
        .collect()
}

/// `|p·k - 1|` for the numerically optimal rate at fitness m with block length ℓ.
pub fn exact_rate_error(m: usize, ell: usize) -> Result<f64> {
    let p = asymptotics::optimal_adaptive_rate_exact(m, ell)?.rate.get();
    Ok((p * (m * ell) as f64 - 1.0).abs())
}

/// `|p·ℓ - (√3 - 1)|` at m = 1 for the numerically optimal rate.
pub fn exact_m1_error(ell: usize) -> Result<f64> {
    let p = asymptotics::optimal_adaptive_rate_exact(1, ell)?.rate.get();
    Ok((p * ell as f64 - (3f64.sqrt() - 1.0)).abs())
}

/// `|p·ℓ - (√3 - 1)|` at m = 1 for the closed-form rate.
pub fn closed_m1_error(ell: usize) -> Result<f64> {
    let p = asymptotics::optimal_adaptive_rate_closed(1, ell)?
        .result
        .rate
        .get();
    Ok((p * ell as f64 - (3f64.sqrt() - 1.0)).abs())
}

/// Exact total under a static rate c/n over the asymptotic formula.
pub fn static_ratio(n: usize, ell: usize, c: f64) -> Result<f64> {
    let spec = ProblemSpec::block_leading_ones(n, ell)?;
    let exact = blo_total_time(
        &spec,
        &MutationSchedule::Static(MutationRate::new(c / n as f64)?),
    )?;
    let asym = asymptotics::blo_asymptotic_static(n, ell, c)?.estimate;
    Ok((exact.ln() - asym.ln()).exp())
}

/// Exact total under the per-level optimal rates over the asymptotic formula.
pub fn adaptive_ratio(n: usize, ell: usize) -> Result<f64> {
    let spec = ProblemSpec::block_leading_ones(n, ell)?;
    let exact = blo_total_time(&spec, &MutationSchedule::AdaptiveOptimal)?;
    Ok((exact.ln() - asymptotics::optimal_adaptive_runtime(n, ell)?.ln()).exp())
}

fn labels<T: std::fmt::Display>(key: &str, xs: &[T]) -> Vec<String> {
    xs.iter().map(|x| format!("{key}={x}")).collect()
}

fn asymptotic_convergence() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let limit = needle_gks_limit(1.0)?;
    let at_1000 = normalized_needle(1000, 1.0)?;
    out.push(Check::within(
        "needle normalized ell=1000 c=1",
        (at_1000 - limit).abs(),
        0.05,
        format!("{at_1000:.6} vs limit {limit:.6}"),
    ));
    let ells = [100, 400, 1600];
    let errs = ells
        .iter()
        .map(|&l| Ok((normalized_needle(l, 1.0)? - limit).abs()))
        .collect::<Result<Vec<_>>>()?;
    out.push(Check::decreasing(
        "needle normalized error decreasing",
        &labels("ell", &ells),
        &errs,
    ));

    let r4 = static_ratio(10_000, 4, 1.0)?;
    let r5 = static_ratio(100_000, 4, 1.0)?;
    out.push(Check::within(
        "static exact/asymptotic n=1e4 ell=4 c=1",
        (r4 - 1.0).abs(),
        0.05,
        format!("ratio {r4:.6}"),
    ));
    out.push(Check::decreasing(
        "static ratio error decreasing",
        &labels("n", &[10_000, 100_000]),
        &[(r4 - 1.0).abs(), (r5 - 1.0).abs()],
    ));

    let a3 = adaptive_ratio(2_000, 4)?;
    let a4 = adaptive_ratio(20_000, 4)?;
    out.push(Check::within(
        "adaptive exact/asymptotic n=2e3 ell=4",
        (a3 - 1.0).abs(),
        0.08,
        format!("ratio {a3:.6}"),
    ));
    out.push(Check::decreasing(
        "adaptive ratio error decreasing",
        &labels("n", &[2_000, 20_000]),
        &[(a3 - 1.0).abs(), (a4 - 1.0).abs()],
    ));

    let ms = [10, 100, 1000];
    let errs = ms
        .iter()
        .map(|&m| exact_rate_error(m, 8))
        .collect::<Result<Vec<_>>>()?;
    out.push(Check::decreasing(
        "optimal rate |p k - 1| decreasing at ell=8",
        &labels("k", &[80, 800, 8000]),
        &errs,
    ));

    let ells = [16, 64, 256];
    let errs = ells
        .iter()
        .map(|&l| exact_m1_error(l))
        .collect::<Result<Vec<_>>>()?;
    out.push(Check::decreasing(
        "optimal rate |p ell - (sqrt3 - 1)| decreasing at m=1",
        &labels("ell", &ells),
        &errs,
    ));
    let errs = ells
        .iter()
        .map(|&l| closed_m1_error(l))
        .collect::<Result<Vec<_>>>()?;
    out.push(Check::decreasing(
        "closed-form rate |p ell - (sqrt3 - 1)| decreasing at m=1",
        &labels("ell", &ells),
        &errs,
    ));

    let taylor_err = |p: f64| -> Result<f64> {
        let rate = MutationRate::new(p)?;
        Ok(rel(
            asymptotics::taylor_block_time(12, 6, rate)?,
            block_time(12, 6, rate)?.value,
        ))
    };
    out.push(Check::decreasing(
        "taylor block time error decreasing as p -> 0",
        &labels("p", &[0.01, 0.0001]),
        &[taylor_err(0.01)?, taylor_err(1e-4)?],
    ));

    let res = asymptotics::optimal_static_rate(1_000, 5)?;
    let spec = ProblemSpec::block_leading_ones(1_000, 5)?;
    let exact = blo_total_time(&spec, &MutationSchedule::Static(res.rate))?.value;
    out.push(Check::within(
        "optimal static runtime n=1e3 ell=5",
        rel(exact, res.predicted_runtime.value),
        0.05,
        format!(
            "exact {exact:.6e}, asymptotic {:.6e}",
            res.predicted_runtime.value
        ),
    ));

    let lambda = asymptotics::static_optimum();
    out.push(Check::within(
        "lambda stationarity",
        (lambda.lambda - 2.0 * (1.0 - (-lambda.lambda).exp())).abs(),
        1e-12,
        format!("lambda {:.12}", lambda.lambda),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_rates_skip_invalid() {
        assert_eq!(oracle_rates(1), vec![0.5, 0.3, 0.5]);
        assert_eq!(oracle_rates(2).len(), 4);
        assert_eq!(oracle_rates(10).len(), 5);
    }

    #[test]
    fn inequality_suite_passes() {
        let r = run_suite(Suite::Inequalities).unwrap();
        assert!(r.passed, "{:#?}", r.checks);
    }

    #[test]
    fn blo_oracle_suite_passes() {
        let r = run_suite(Suite::BloOracle).unwrap();
        assert!(r.passed, "{:#?}", r.checks);
    }

    #[test]
    fn decreasing_check() {
        let l = labels("x", &[1, 2, 3]);
        assert!(Check::decreasing("d", &l, &[3.0, 2.0, 1.0]).passed);
        assert!(!Check::decreasing("d", &l, &[3.0, 3.0, 1.0]).passed);
    }
}
