//! Seeded Monte Carlo runs of the (1+1) EA on Needle and BlockLeadingOnes.
//!
//! Trial `i` draws from a ChaCha8 stream selected by `(master_seed, i)`, so a
//! report depends only on the configuration and never on thread scheduling.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_walk::{BitString, MutationRate};
use crate::runtime_formulas::{
    blo_total_time, block_time, MutationSchedule, ProblemSpec, RuntimeEstimate,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PLATEAU_RT_THREADS";
/// Cap used when no analytic expectation is available.
pub const FALLBACK_ITERATION_CAP: u64 = 1_000_000_000;
/// Multiple of the analytic expectation used as the default cap.
pub const CAP_MULTIPLE: f64 = 1e4;

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub spec: ProblemSpec,
    pub sched: MutationSchedule,
    pub trials: usize,
    pub master_seed: u64,
    pub iteration_cap: u64,
}

impl SimulationConfig {
    /// A configuration whose cap is [`CAP_MULTIPLE`] times the exact expectation.
    pub fn new(
        spec: ProblemSpec,
        sched: MutationSchedule,
        trials: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let iteration_cap = default_cap(blo_total_time(&spec, &sched).ok());
        let config = Self {
            spec,
            sched,
            trials,
            master_seed,
            iteration_cap,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::domain("trials must be at least 1"));
        }
        if self.iteration_cap == 0 {
            return Err(Error::domain("iteration cap must be at least 1"));
        }
        Ok(())
    }
}

/// `CAP_MULTIPLE × expectation`, or [`FALLBACK_ITERATION_CAP`] if that is unavailable.
pub fn default_cap(expected: Option<RuntimeEstimate>) -> u64 {
    match expected {
        Some(e) if !e.overflow && e.value.is_finite() && e.value * CAP_MULTIPLE < 1.8e19 => {
            ((e.value * CAP_MULTIPLE).ceil() as u64).max(1)
        }
        _ => FALLBACK_ITERATION_CAP,
    }
}

/// Outcome of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub iterations: u64,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub mean: f64,
    /// Sample standard deviation over √trials; absent with fewer than two completed trials.
    pub stderr: Option<f64>,
    pub trials_completed: usize,
    pub capped_trials: usize,
    /// Mean iterations spent at each fitness level, over completed trials.
    pub per_level_means: Option<Vec<f64>>,
    pub master_seed: u64,
    pub iteration_cap: u64,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl SimulationReport {
    pub fn estimate(&self) -> RuntimeEstimate {
        RuntimeEstimate::monte_carlo(self.mean, self.stderr)
    }

    /// `(mean - expected) / stderr`.
    pub fn z_score(&self, expected: f64) -> Option<f64> {
        self.stderr.map(|s| (self.mean - expected) / s)
    }

    /// Writes `trial,iterations` rows, LF-terminated. Capped trials report the cap.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["trial", "iterations"])?;
        for (i, r) in self.records.iter().enumerate() {
            w.write_record([i.to_string(), r.iterations.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The random stream of trial `trial`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Draws the positions flipped by standard bit mutation at rate `p` on `n` bits.
pub struct Mutator {
    n: usize,
    p: f64,
    binomial: Option<Binomial>,
}

impl Mutator {
    /// Uses binomial count sampling when `p·n < 8`, per-bit coin flips otherwise.
    pub fn new(n: usize, p: MutationRate) -> Self {
        let p = p.get();
        let binomial =
            (p * (n as f64) < 8.0).then(|| Binomial::new(n as u64, p).expect("p lies in (0, 1)"));
        Self { n, p, binomial }
    }

    /// Per-bit sampling regardless of `p·n`.
    pub fn per_bit(n: usize, p: MutationRate) -> Self {
        Self {
            n,
            p: p.get(),
            binomial: None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, flips: &mut Vec<usize>) {
        flips.clear();
        match &self.binomial {
            Some(b) => {
                let count = b.sample(rng) as usize;
                if count > 0 {
                    flips.extend(index::sample(rng, self.n, count).iter());
                }
            }
            None => flips.extend((0..self.n).filter(|_| rng.random::<f64>() < self.p)),
        }
    }
}

/// BlockLeadingOnes fitness `⌊LO(x)/ℓ⌋`.
pub fn blo_fitness(x: &BitString, ell: usize) -> usize {
    x.leading_ones() / ell
}

struct TrialOutcome {
    record: TrialRecord,
    per_level: Vec<u64>,
}

struct Engine<'a> {
    spec: &'a ProblemSpec,
    mutators: Vec<Mutator>,
    cap: u64,
}

impl Engine<'_> {
    /// One trial of the (1+1) EA; `trace` receives the fitness at the start of
    /// every iteration and the final fitness.
    fn run_trial(&self, rng: &mut ChaCha8Rng, mut trace: Option<&mut Vec<usize>>) -> TrialOutcome {
        let levels = self.spec.levels();
        let ell = self.spec.ell;
        let mut x = BitString::random(self.spec.n, rng).expect("n >= 1");
        let mut level = blo_fitness(&x, ell);
        let mut per_level = vec![0u64; levels];
        let mut flips = Vec::new();
        let mut t = 0u64;
        let mut capped = false;
        while level < levels {
            if t == self.cap {
                capped = true;
                break;
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(level);
            }
            t += 1;
            per_level[level] += 1;
            self.mutators[level].sample(rng, &mut flips);
            for &i in &flips {
                x.flip(i);
            }
            let next = blo_fitness(&x, ell);
            if next >= level {
                level = next;
            } else {
                for &i in &flips {
                    x.flip(i);
                }
            }
        }
        if let Some(tr) = trace {
            tr.push(level);
        }
        TrialOutcome {
            record: TrialRecord {
                iterations: t,
                capped,
            },
            per_level,
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::domain(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker threads: {e}")))
}

/// Runs `trials` independent trials in fixed chunks and returns them in trial order.
fn run_trials<F>(trials: usize, f: F) -> Result<Vec<TrialOutcome>>
where
    F: Fn(u64) -> TrialOutcome + Sync,
{
    let chunks: Vec<(usize, usize)> = (0..trials)
        .step_by(CHUNK)
        .map(|s| (s, (s + CHUNK).min(trials)))
        .collect();
    let pool = thread_pool()?;
    let parts: Vec<Vec<TrialOutcome>> = pool.install(|| {
        chunks
            .par_iter()
            .map(|&(s, e)| (s..e).map(|i| f(i as u64)).collect())
            .collect()
    });
    Ok(parts.into_iter().flatten().collect())
}

fn summarize(
    outcomes: Vec<TrialOutcome>,
    levels: Option<usize>,
    master_seed: u64,
    cap: u64,
) -> SimulationReport {
    let mut n: u128 = 0;
    let mut sum: u128 = 0;
    let mut sum_sq: u128 = 0;
    let mut level_sums = vec![0u128; levels.unwrap_or(0)];
    let mut capped = 0;
    for o in &outcomes {
        if o.record.capped {
            capped += 1;
            continue;
        }
        let x = o.record.iterations as u128;
        n += 1;
        sum += x;
        sum_sq += x * x;
        for (acc, &t) in level_sums.iter_mut().zip(&o.per_level) {
            *acc += t as u128;
        }
    }
    let mean = if n > 0 {
        sum as f64 / n as f64
    } else {
        f64::NAN
    };
    let stderr = (n >= 2).then(|| {
        // exact integer moments: N Σx² - (Σx)² = N(N-1) s²
        let var = match n.checked_mul(sum_sq).zip(sum.checked_mul(sum)) {
            Some((a, b)) => (a - b) as f64 / (n * (n - 1)) as f64,
            None => {
                let m = sum as f64 / n as f64;
                (sum_sq as f64 - n as f64 * m * m) / (n - 1) as f64
            }
        };
        (var / n as f64).sqrt()
    });
    SimulationReport {
        mean,
        stderr,
        trials_completed: n as usize,
        capped_trials: capped,
        per_level_means: levels.map(|_| {
            level_sums
                .iter()
                .map(|&s| if n > 0 { s as f64 / n as f64 } else { f64::NAN })
                .collect()
        }),
        master_seed,
        iteration_cap: cap,
        records: outcomes.iter().map(|o| o.record).collect(),
    }
}

fn engine<'a>(config: &'a SimulationConfig) -> Result<Engine<'a>> {
    config.validate()?;
    let rates = config.sched.resolve(&config.spec)?;
    Ok(Engine {
        spec: &config.spec,
        mutators: rates
            .iter()
            .map(|&p| Mutator::new(config.spec.n, p))
            .collect(),
        cap: config.iteration_cap,
    })
}

/// Runs the (1+1) EA `config.trials` times from uniform random starts.
pub fn run(config: &SimulationConfig) -> Result<SimulationReport> {
    let engine = engine(config)?;
    let outcomes = run_trials(config.trials, |i| {
        engine.run_trial(&mut trial_rng(config.master_seed, i), None)
    })?;
    Ok(summarize(
        outcomes,
        Some(config.spec.levels()),
        config.master_seed,
        config.iteration_cap,
    ))
}

/// The fitness at the start of every iteration of trial `trial`, then the final fitness.
pub fn trial_trajectory(config: &SimulationConfig, trial: u64) -> Result<Vec<usize>> {
    let engine = engine(config)?;
    let mut trace = Vec::new();
    engine.run_trial(&mut trial_rng(config.master_seed, trial), Some(&mut trace));
    Ok(trace)
}

/// Estimates the time to optimize one ℓ-block behind a locked prefix of `k`
/// ones. The block starts uniformly among its non-optimal values; any step that
/// flips a prefix bit is rejected.
pub fn run_block(
    k: usize,
    ell: usize,
    p: MutationRate,
    trials: usize,
    seed: u64,
    iteration_cap: Option<u64>,
) -> Result<SimulationReport> {
    if ell == 0 {
        return Err(Error::domain("block length must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let cap = iteration_cap.unwrap_or_else(|| default_cap(block_time(k, ell, p).ok()));
    if cap == 0 {
        return Err(Error::domain("iteration cap must be at least 1"));
    }
    let mutator = Mutator::new(k + ell, p);
    let outcomes = run_trials(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let mut block = loop {
            let b = BitString::random(ell, &mut rng).expect("ell >= 1");
            if !b.is_all_ones() {
                break b;
            }
        };
        let mut flips = Vec::new();
        let mut t = 0;
        let mut capped = false;
        while !block.is_all_ones() {
            if t == cap {
                capped = true;
                break;
            }
            t += 1;
            mutator.sample(&mut rng, &mut flips);
            if flips.iter().any(|&f| f < k) {
                continue;
            }
            for &f in &flips {
                block.flip(f - k);
            }
        }
        TrialOutcome {
            record: TrialRecord {
                iterations: t,
                capped,
            },
            per_level: Vec::new(),
        }
    })?;
    Ok(summarize(outcomes, None, seed, cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime_formulas::{needle_time_excluding_optimum, needle_time_uniform_start};
    use proptest::prelude::*;

    fn rate(p: f64) -> MutationRate {
        MutationRate::new(p).unwrap()
    }

    fn needle(ell: usize, p: f64, trials: usize, seed: u64) -> SimulationConfig {
        SimulationConfig::new(
            ProblemSpec::needle(ell).unwrap(),
            MutationSchedule::Static(rate(p)),
            trials,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let spec = ProblemSpec::needle(3).unwrap();
        assert!(SimulationConfig::new(spec, MutationSchedule::Static(rate(0.1)), 0, 1).is_err());
        let mut c = needle(3, 0.1, 5, 1);
        c.iteration_cap = 0;
        assert!(run(&c).is_err());
        assert_eq!(default_cap(None), FALLBACK_ITERATION_CAP);
        assert_eq!(c.sched, MutationSchedule::Static(rate(0.1)));
    }

    #[test]
    fn default_cap_tracks_expectation() {
        let c = needle(8, 0.125, 1, 0);
        let expected = needle_time_uniform_start(8, rate(0.125)).unwrap().value;
        assert_eq!(c.iteration_cap, (expected * CAP_MULTIPLE).ceil() as u64);
    }

    #[test]
    fn degenerate_single_capped_trial() {
        let mut c = needle(6, 0.1, 1, 3);
        c.iteration_cap = 1;
        let r = run(&c).unwrap();
        assert_eq!(r.trials_completed + r.capped_trials, 1);
        assert!(r.stderr.is_none());
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn needle_agrees_with_formula() {
        let r = run(&needle(6, 1.0 / 6.0, 20_000, 11)).unwrap();
        let z = r
            .z_score(needle_time_uniform_start(6, rate(1.0 / 6.0)).unwrap().value)
            .unwrap();
        assert_eq!(r.capped_trials, 0);
        assert!(z.abs() <= 4.0, "{z}");
    }

    #[test]
    fn per_level_means_sum_to_mean() {
        let spec = ProblemSpec::block_leading_ones(9, 3).unwrap();
        let c = SimulationConfig::new(spec, MutationSchedule::Static(rate(0.1)), 500, 5).unwrap();
        let r = run(&c).unwrap();
        let levels = r.per_level_means.as_ref().unwrap();
        assert_eq!(levels.len(), 3);
        assert!((levels.iter().sum::<f64>() - r.mean).abs() < 1e-9 * r.mean);
    }

    #[test]
    fn determinism_and_thread_independence() {
        let c = needle(5, 0.2, 1000, 42);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a, b);
        // trials computed one at a time in reverse order match the batched run
        let engine = engine(&c).unwrap();
        for i in (0..1000u64).rev().step_by(97) {
            let o = engine.run_trial(&mut trial_rng(42, i), None);
            assert_eq!(o.record, a.records[i as usize]);
        }
        let other = run(&needle(5, 0.2, 1000, 43)).unwrap();
        assert_ne!(a.records, other.records);
    }

    #[test]
    fn trajectories_are_elitist() {
        let spec = ProblemSpec::block_leading_ones(12, 2).unwrap();
        let c = SimulationConfig::new(spec, MutationSchedule::Static(rate(0.15)), 20, 9).unwrap();
        let report = run(&c).unwrap();
        for t in 0..20 {
            let tr = trial_trajectory(&c, t).unwrap();
            assert!(tr.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*tr.last().unwrap(), 6);
            assert_eq!(tr.len() as u64 - 1, report.records[t as usize].iterations);
        }
    }

    #[test]
    fn block_runs() {
        let r = run_block(0, 2, rate(0.5), 20_000, 1, None).unwrap();
        assert!((r.mean - 4.0).abs() < 4.0 * r.stderr.unwrap());
        let r = run_block(0, 4, rate(0.2), 20_000, 2, None).unwrap();
        let expected = needle_time_excluding_optimum(4, rate(0.2)).unwrap().value;
        assert!(r.z_score(expected).unwrap().abs() <= 4.0);
        assert!(r.per_level_means.is_none());
        assert!(run_block(1, 0, rate(0.5), 1, 1, None).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = run(&needle(3, 0.3, 3, 0)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("trial,iterations\n0,"));
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn mutation_paths_have_the_same_flip_distribution() {
        // both samplers against the exact Binomial(n, p) mean and variance
        let (n, p) = (40usize, 0.05);
        let mut rng = trial_rng(7, 0);
        let mut flips = Vec::new();
        for m in [Mutator::new(n, rate(p)), Mutator::per_bit(n, rate(p))] {
            let draws = 200_000;
            let mut s = 0.0;
            let mut s2 = 0.0;
            let mut per_pos = vec![0u32; n];
            for _ in 0..draws {
                m.sample(&mut rng, &mut flips);
                let c = flips.len() as f64;
                s += c;
                s2 += c * c;
                for &f in &flips {
                    per_pos[f] += 1;
                }
            }
            let mean = s / draws as f64;
            let var = s2 / draws as f64 - mean * mean;
            let mu = n as f64 * p;
            let sigma2 = mu * (1.0 - p);
            assert!(
                (mean - mu).abs() < 5.0 * (sigma2 / draws as f64).sqrt(),
                "{mean}"
            );
            assert!((var / sigma2 - 1.0).abs() < 0.03, "{var}");
            let expected = draws as f64 * p;
            for c in per_pos {
                assert!((c as f64 - expected).abs() < 5.0 * (expected * (1.0 - p)).sqrt());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fitness_matches_naive_scan(bits in proptest::collection::vec(0u8..2, 1..200), ell in 1usize..8) {
            let x = BitString::from_bits(&bits).unwrap();
            let lo = bits.iter().take_while(|&&b| b == 1).count();
            prop_assert_eq!(blo_fitness(&x, ell), lo / ell);
        }

        #[test]
        fn flips_are_distinct_and_in_range(n in 1usize..300, p in 0.001f64..0.99, seed in any::<u64>()) {
            let m = Mutator::new(n, rate(p));
            let mut rng = trial_rng(seed, 0);
            let mut flips = Vec::new();
            m.sample(&mut rng, &mut flips);
            let mut sorted = flips.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), flips.len());
            prop_assert!(flips.iter().all(|&f| f < n));
        }
    }
}
