//! Ground truth from absorbing Markov chains.
//!
//! Three independent solvers: the walk on all 2^ℓ strings, the walk lumped by
//! Hamming distance to the target, and the full (1+1) EA chain on
//! BlockLeadingOnes with elitist acceptance.
//!
//! Small systems are solved densely by Grassmann–Taksar–Heyman elimination,
//! which only ever adds nonnegative quantities and so keeps full relative
//! accuracy even when transition probabilities span many orders of magnitude.
//! Larger levels use conjugate gradients on the implicit mutation kernel,
//! which is symmetric, so `diag(d) - K_SS` is symmetric positive definite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_walk::{BitString, MutationRate};
use crate::numeric::{ln_binomial, ln_binomial_row, ln_sum_exp, CompensatedSum};
use crate::runtime_formulas::{MutationSchedule, ProblemSpec};

/// Largest ℓ for [`full_state_hitting_times`].
pub const FULL_STATE_CAP: usize = 12;
/// Largest ℓ for [`lumped_hitting_times`].
pub const LUMPED_CAP: usize = 512;
/// Largest n for [`lo_chain_time`].
pub const LO_CHAIN_CAP: usize = 14;
/// Systems up to this many states are factored densely.
pub const DENSE_LIMIT: usize = 1024;
/// Componentwise backward error every solve must reach.
pub const BACKWARD_ERROR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    DenseGth,
    ConjugateGradient,
}

/// Quality of a linear solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub states: usize,
    pub method: SolveMethod,
    /// `max_i |r_i| / (|A||h| + |b|)_i`.
    pub backward_error: f64,
    /// `‖A h - b‖_∞`.
    pub residual_inf: f64,
}

/// Expected hitting times indexed by start state, with solve diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingTimes {
    pub times: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

/// `h_i = b_i + Σ_{j≠i} W_ij h_j + W_ii h_i`, with `exit_i` leaking to absorption.
///
/// Rows are the transient states; the self-loop entries of `w` are ignored,
/// since `1 - W_ii = exit_i + Σ_{j≠i} W_ij`.
struct DenseSystem {
    n: usize,
    w: Vec<f64>,
    exit: Vec<f64>,
}

struct GthFactor {
    n: usize,
    f: Vec<f64>,
    pivots: Vec<f64>,
}

impl GthFactor {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for k in 0..n {
            let yk = y[k] / self.pivots[k];
            if yk != 0.0 {
                for i in k + 1..n {
                    y[i] += self.f[i * n + k] * yk;
                }
            }
        }
        let mut h = vec![0.0; n];
        for k in (0..n).rev() {
            let row = &self.f[k * n..(k + 1) * n];
            let acc: CompensatedSum = std::iter::once(y[k])
                .chain((k + 1..n).map(|j| row[j] * h[j]))
                .collect();
            h[k] = acc.total() / self.pivots[k];
        }
        h
    }
}

impl DenseSystem {
    fn factor(&self) -> Result<GthFactor> {
        let n = self.n;
        let mut f = self.w.clone();
        let mut exit = self.exit.clone();
        let mut pivots = vec![0.0; n];
        for k in 0..n {
            let acc: CompensatedSum = std::iter::once(exit[k])
                .chain(f[k * n + k + 1..(k + 1) * n].iter().copied())
                .collect();
            let d = acc.total();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Solver(format!(
                    "zero pivot at state {k}: the chain cannot reach the target"
                )));
            }
            pivots[k] = d;
            let (head, tail) = f.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..];
            for (offset, row) in tail.chunks_exact_mut(n).enumerate() {
                let r = row[k] / d;
                if r == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    row[j] += r * pivot_row[j];
                }
                exit[k + 1 + offset] += r * exit[k];
            }
        }
        Ok(GthFactor { n, f, pivots })
    }

    /// `A h` with `A = diag(exit + Σ_{j≠i} W_ij) - W_offdiag`, and `|A||h|`.
    fn apply(&self, h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut ah = vec![0.0; n];
        let mut abs = vec![0.0; n];
        for i in 0..n {
            let row = &self.w[i * n..(i + 1) * n];
            // exit_i h_i + Σ W_ij (h_i - h_j) cancels far less than d_i h_i - Σ W_ij h_j
            let mut d = CompensatedSum::new();
            d.add(self.exit[i]);
            let mut acc = CompensatedSum::new();
            acc.add(self.exit[i] * h[i]);
            let mut off_abs = CompensatedSum::new();
            for j in (0..n).filter(|&j| j != i) {
                d.add(row[j]);
                acc.add(row[j] * (h[i] - h[j]));
                off_abs.add(row[j] * h[j].abs());
            }
            ah[i] = acc.total();
            abs[i] = d.total() * h[i].abs() + off_abs.total();
        }
        (ah, abs)
    }

    fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveDiagnostics)> {
        let factor = self.factor()?;
        let mut h = factor.solve(b);
        let (ah, _) = self.apply(&h);
        let r: Vec<f64> = b.iter().zip(&ah).map(|(b, a)| b - a).collect();
        let delta = factor.solve(&r);
        // when the solution dwarfs the right-hand side the residual is mostly
        // rounding noise; only a small correction is trustworthy
        if delta.iter().zip(&h).all(|(d, h)| d.abs() <= 1e-6 * h.abs()) {
            for (h, d) in h.iter_mut().zip(&delta) {
                *h += d;
            }
        }
        let (ah, abs) = self.apply(&h);
        let diagnostics = diagnostics(self.n, SolveMethod::DenseGth, b, &ah, &abs);
        check(diagnostics)?;
        Ok((h, diagnostics))
    }
}

fn diagnostics(
    states: usize,
    method: SolveMethod,
    b: &[f64],
    ah: &[f64],
    abs: &[f64],
) -> SolveDiagnostics {
    let mut backward_error: f64 = 0.0;
    let mut residual_inf: f64 = 0.0;
    for i in 0..b.len() {
        let r = (b[i] - ah[i]).abs();
        residual_inf = residual_inf.max(r);
        let scale = abs[i] + b[i].abs();
        if scale > 0.0 {
            backward_error = backward_error.max(r / scale);
        } else if r > 0.0 {
            backward_error = f64::INFINITY;
        }
    }
    SolveDiagnostics {
        states,
        method,
        backward_error,
        residual_inf,
    }
}

fn check(d: SolveDiagnostics) -> Result<()> {
    if d.backward_error <= BACKWARD_ERROR_TOL {
        Ok(())
    } else {
        Err(Error::Solver(format!(
            "backward error {:.3e} exceeds {:.0e} on {} states",
            d.backward_error, BACKWARD_ERROR_TOL, d.states
        )))
    }
}

/// Applies the bitwise-mutation kernel `K(x,y) = p^{|x⊕y|}(1-p)^{n-|x⊕y|}` in place.
fn apply_kernel(v: &mut [f64], n_bits: usize, p: f64) {
    let q = 1.0 - p;
    for bit in 0..n_bits {
        let stride = 1usize << bit;
        for base in (0..v.len()).step_by(2 * stride) {
            for i in base..base + stride {
                let (a, b) = (v[i], v[i + stride]);
                v[i] = q * a + p * b;
                v[i + stride] = p * a + q * b;
            }
        }
    }
}

/// `A = diag(d) - K_SS` on the subset `states` of {0,1}^n, applied matrix-free.
struct KernelSystem<'a> {
    n_bits: usize,
    p: f64,
    states: &'a [usize],
    d: Vec<f64>,
    k0: f64,
}

impl KernelSystem<'_> {
    fn kernel_on(&self, v: &[f64]) -> Vec<f64> {
        let mut ext = vec![0.0; 1 << self.n_bits];
        for (&s, &x) in self.states.iter().zip(v) {
            ext[s] = x;
        }
        apply_kernel(&mut ext, self.n_bits, self.p);
        self.states.iter().map(|&s| ext[s]).collect()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let kv = self.kernel_on(v);
        self.d
            .iter()
            .zip(v)
            .zip(&kv)
            .map(|((d, x), k)| d * x - k)
            .collect()
    }

    fn apply_abs(&self, v: &[f64]) -> Vec<f64> {
        let a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        let ka = self.kernel_on(&a);
        self.d
            .iter()
            .zip(&a)
            .zip(&ka)
            .map(|((d, x), k)| (d - 2.0 * self.k0) * x + k)
            .collect()
    }

    fn cg(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let precond: Vec<f64> = self.d.iter().map(|d| 1.0 / (d - self.k0)).collect();
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| x * y)
                .collect::<CompensatedSum>()
                .total()
        };
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&precond).map(|(r, m)| r * m).collect();
        let mut dir = z.clone();
        let mut rz = dot(&r, &z);
        let b_norm = dot(b, b).sqrt();
        for _ in 0..50 * n.max(100) {
            let ad = self.apply(&dir);
            let step = rz / dot(&dir, &ad);
            for i in 0..n {
                x[i] += step * dir[i];
                r[i] -= step * ad[i];
            }
            if dot(&r, &r).sqrt() <= 1e-15 * b_norm {
                break;
            }
            z = r.iter().zip(&precond).map(|(r, m)| r * m).collect();
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                dir[i] = z[i] + beta * dir[i];
            }
        }
        x
    }

    fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveDiagnostics)> {
        let mut h = self.cg(b);
        for _ in 0..3 {
            let ah = self.apply(&h);
            let d = diagnostics(
                self.states.len(),
                SolveMethod::ConjugateGradient,
                b,
                &ah,
                &self.apply_abs(&h),
            );
            if d.backward_error <= 0.01 * BACKWARD_ERROR_TOL {
                break;
            }
            let r: Vec<f64> = b.iter().zip(&ah).map(|(b, a)| b - a).collect();
            let delta = self.cg(&r);
            if delta.iter().zip(&h).any(|(d, h)| d.abs() > 1e-6 * h.abs()) {
                break;
            }
            for (h, d) in h.iter_mut().zip(&delta) {
                *h += d;
            }
        }
        let d = diagnostics(
            self.states.len(),
            SolveMethod::ConjugateGradient,
            b,
            &self.apply(&h),
            &self.apply_abs(&h),
        );
        check(d)?;
        Ok((h, d))
    }
}

/// Solves for the hitting times of the transient `states` of a chain driven by
/// the mutation kernel with rate `p`. `exit[i]` is the probability of leaving
/// the transient set from `states[i]` and `rhs[i]` the right-hand side.
fn solve_on_subset(
    n_bits: usize,
    p: f64,
    states: &[usize],
    exit: Vec<f64>,
    rhs: &[f64],
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let q = 1.0 - p;
    let pw: Vec<f64> = (0..=n_bits)
        .map(|d| p.powi(d as i32) * q.powi((n_bits - d) as i32))
        .collect();
    let n = states.len();
    if n <= DENSE_LIMIT {
        let mut w = vec![0.0; n * n];
        for (i, &x) in states.iter().enumerate() {
            for (j, &y) in states.iter().enumerate() {
                if i != j {
                    w[i * n + j] = pw[(x ^ y).count_ones() as usize];
                }
            }
        }
        DenseSystem { n, w, exit }.solve(rhs)
    } else {
        let mut inside = vec![0.0; 1 << n_bits];
        for &s in states {
            inside[s] = 1.0;
        }
        apply_kernel(&mut inside, n_bits, p);
        let d = states
            .iter()
            .zip(&exit)
            .map(|(&s, e)| e + inside[s])
            .collect();
        KernelSystem {
            n_bits,
            p,
            states,
            d,
            k0: pw[0],
        }
        .solve(rhs)
    }
}

/// Expected hitting times of `target` from every start state for the walk
/// without selection, i.e. the (1+1) EA on Needle when the target is `1^ℓ`.
pub fn hitting_times_to(target: &BitString, p: MutationRate) -> Result<HittingTimes> {
    let ell = target.len();
    if ell > FULL_STATE_CAP {
        return Err(Error::Capacity {
            what: "block length",
            value: ell,
            limit: FULL_STATE_CAP,
            hint: "use lumped_hitting_times for longer blocks",
        });
    }
    let g = target.to_index() as usize;
    let p = p.get();
    let states: Vec<usize> = (0..1usize << ell).filter(|&x| x != g).collect();
    let exit = states
        .iter()
        .map(|&x| {
            let d = (x ^ g).count_ones() as i32;
            p.powi(d) * (1.0 - p).powi(ell as i32 - d)
        })
        .collect();
    let rhs = vec![1.0; states.len()];
    let (h, diagnostics) = solve_on_subset(ell, p, &states, exit, &rhs)?;
    let mut times = vec![0.0; 1 << ell];
    for (&s, t) in states.iter().zip(h) {
        times[s] = t;
    }
    Ok(HittingTimes { times, diagnostics })
}

/// Expected hitting time of `1^ℓ` from every start state; index bit i is string bit i.
pub fn full_state_hitting_times(ell: usize, p: MutationRate) -> Result<Vec<f64>> {
    Ok(hitting_times_to(&BitString::ones(ell)?, p)?.times)
}

/// Mean of `values`, summed with compensation.
pub fn uniform_average(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().total() / values.len() as f64
}

/// The walk lumped by Hamming distance to the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumpedChain {
    pub ell: usize,
    pub p: MutationRate,
    /// Row-major `(ℓ+1) × (ℓ+1)` transition matrix over distances.
    pub transition: Vec<Vec<f64>>,
}

impl LumpedChain {
    /// `P(d → d') = Σ_{k₁-k₂=d-d'} C(d,k₁) C(ℓ-d,k₂) p^{k₁+k₂} (1-p)^{ℓ-k₁-k₂}`,
    /// every term assembled in log space.
    pub fn new(ell: usize, p: MutationRate) -> Result<Self> {
        if ell == 0 {
            return Err(Error::domain("block length must be at least 1"));
        }
        if ell > LUMPED_CAP {
            return Err(Error::Capacity {
                what: "block length",
                value: ell,
                limit: LUMPED_CAP,
                hint: "the Fourier formulas have no such limit",
            });
        }
        let (lp, lq) = (p.get().ln(), (-p.get()).ln_1p());
        let transition = (0..=ell)
            .map(|d| {
                let up = ln_binomial_row(d as u64);
                let down = ln_binomial_row((ell - d) as u64);
                let mut row = vec![CompensatedSum::new(); ell + 1];
                for (k1, c1) in up.iter().enumerate() {
                    for (k2, c2) in down.iter().enumerate() {
                        let flips = (k1 + k2) as f64;
                        let ln = c1 + c2 + flips * lp + (ell as f64 - flips) * lq;
                        row[d - k1 + k2].add(ln.exp());
                    }
                }
                row.iter().map(CompensatedSum::total).collect()
            })
            .collect();
        Ok(Self { ell, p, transition })
    }

    /// Largest deviation of a row sum from 1.
    pub fn max_row_error(&self) -> f64 {
        self.transition
            .iter()
            .map(|row| (row.iter().copied().collect::<CompensatedSum>().total() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Expected hitting time of distance 0 from every distance `d ∈ [0, ℓ]`.
    pub fn hitting_times(&self) -> Result<HittingTimes> {
        let n = self.ell;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    w[i * n + j] = self.transition[i + 1][j + 1];
                }
            }
        }
        let exit = (1..=n).map(|d| self.transition[d][0]).collect();
        let (h, diagnostics) = DenseSystem { n, w, exit }.solve(&vec![1.0; n])?;
        Ok(HittingTimes {
            times: std::iter::once(0.0).chain(h).collect(),
            diagnostics,
        })
    }
}

/// Expected hitting time of `1^ℓ` as a function of the distance to it.
pub fn lumped_hitting_times(ell: usize, p: MutationRate) -> Result<Vec<f64>> {
    Ok(LumpedChain::new(ell, p)?.hitting_times()?.times)
}

/// `Σ_d C(ℓ,d) 2^{-ℓ} h(d)`: the lumped chain's expected time from a uniform start.
pub fn lumped_uniform_average(ell: usize, p: MutationRate) -> Result<f64> {
    let h = lumped_hitting_times(ell, p)?;
    let terms: Vec<f64> = h
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, t)| {
            ln_binomial(ell as u64, d as u64) - ell as f64 * std::f64::consts::LN_2 + t.ln()
        })
        .collect();
    Ok(ln_sum_exp(&terms).exp())
}

/// BlockLeadingOnes fitness `⌊LO(x)/ℓ⌋` of the state with index `x` on `n` bits.
fn level_of(x: usize, n: usize, ell: usize) -> usize {
    (x.trailing_ones() as usize).min(n) / ell
}

/// Expected optimization time of the (1+1) EA from every start state, on the
/// exact 2^n-state chain: mutate with the rate of the current fitness level,
/// accept iff fitness does not decrease.
///
/// The chain only moves upward between levels, so levels are solved one at a
/// time from the top, each with the already-known times above it.
pub fn lo_chain_hitting_times(spec: &ProblemSpec, sched: &MutationSchedule) -> Result<Vec<f64>> {
    let n = spec.n;
    if n > LO_CHAIN_CAP {
        return Err(Error::Capacity {
            what: "n",
            value: n,
            limit: LO_CHAIN_CAP,
            hint: "use blo_total_time or the simulator",
        });
    }
    let rates = sched.resolve(spec)?;
    let size = 1usize << n;
    let mut h = vec![0.0; size];
    let mut above = vec![false; size];
    above[size - 1] = true;
    for m in (0..spec.levels()).rev() {
        let p = rates[m].get();
        let states: Vec<usize> = (0..size)
            .filter(|&x| level_of(x, n, spec.ell) == m)
            .collect();
        let mut exit = vec![0.0; size];
        let mut carried = vec![0.0; size];
        for x in 0..size {
            if above[x] {
                exit[x] = 1.0;
                carried[x] = h[x];
            }
        }
        apply_kernel(&mut exit, n, p);
        apply_kernel(&mut carried, n, p);
        let exit_s: Vec<f64> = states.iter().map(|&x| exit[x]).collect();
        let rhs: Vec<f64> = states.iter().map(|&x| 1.0 + carried[x]).collect();
        let (sol, _) = solve_on_subset(n, p, &states, exit_s, &rhs)?;
        for (&x, t) in states.iter().zip(sol) {
            h[x] = t;
            above[x] = true;
        }
    }
    Ok(h)
}

/// Expected optimization time from a uniform start on the exact chain.
pub fn lo_chain_time(spec: &ProblemSpec, sched: &MutationSchedule) -> Result<f64> {
    Ok(uniform_average(&lo_chain_hitting_times(spec, sched)?))
}
