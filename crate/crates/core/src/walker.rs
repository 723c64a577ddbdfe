//! Trajectory simulation, block decomposition and rescaled paths.
//!
//! Under the quenched law the walker at `X_i` steps right with probability
//! `ω_k(X_i)`, where `k = k(i)` is the cooling block in force at time `i`.
//! The environment switches to a fresh draw immediately before the step taken
//! at each resampling time τ(k).

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::cooling::CoolingSchedule;
use crate::env::{Environment, OmegaField, ResamplingRule};
use crate::error::{Error, Result};
use crate::stream::{self, Purpose};

/// One replica's path `X_0, ..., X_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub replica: u64,
    pub positions: Vec<i64>,
}

impl Trajectory {
    pub fn horizon(&self) -> u64 {
        self.positions.len() as u64 - 1
    }

    pub fn end(&self) -> i64 {
        *self.positions.last().expect("X_0 always present")
    }

    /// Linear interpolation of the raw path at real time `t * n`.
    pub fn interpolate(&self, t: f64) -> f64 {
        let knot = Knot::new(t, self.horizon());
        knot.eval(|i| self.positions[i as usize] as f64)
    }
}

/// The walk decomposed at the resampling times:
/// `X_n = Y_1 + ... + Y_{k(n)} + Ȳ_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIncrements {
    /// `Y_j = X_{τ(j)} - X_{τ(j-1)}` for `j = 1..=k(n)`.
    pub blocks: Vec<i64>,
    /// `Ȳ_n = X_n - X_{τ(k(n))}`.
    pub remainder: i64,
    /// `Ȳ_n^c = X_{τ(k(n)+1)} - X_n`, when the trajectory reaches that far.
    pub complement: Option<i64>,
}

impl BlockIncrements {
    pub fn total(&self) -> i64 {
        self.blocks.iter().sum::<i64>() + self.remainder
    }
}

/// Runs the walk for `n` steps and calls `observe(i, X_i)` for every
/// `i = 0..=n`.
///
/// `schedule` must cover `n` (see [`CoolingSchedule::prepare`]).
pub fn run_walk<F, R, O>(
    field: &mut F,
    schedule: &CoolingSchedule,
    n: u64,
    steps: &mut R,
    mut observe: O,
) where
    F: OmegaField,
    R: RngCore,
    O: FnMut(u64, i64),
{
    debug_assert!(schedule.covered_horizon() >= n);
    let taus = schedule.times();
    let mut block = 0usize;
    let next = |b: usize| taus.get(b + 1).copied().unwrap_or(u64::MAX);
    let mut next_refresh = next(0);
    let mut x = 0i64;
    observe(0, x);
    for i in 0..n {
        if i == next_refresh {
            block += 1;
            next_refresh = next(block);
            field.refresh(block as u64, x);
        }
        let w = field.omega(x);
        x += if stream::unit_f64(steps) < w { 1 } else { -1 };
        observe(i + 1, x);
    }
}

fn covering(schedule: &CoolingSchedule, n: u64) -> Result<std::borrow::Cow<'_, CoolingSchedule>> {
    if schedule.covered_horizon() >= n {
        Ok(std::borrow::Cow::Borrowed(schedule))
    } else {
        Ok(std::borrow::Cow::Owned(schedule.clone().prepared(n)?))
    }
}

/// Simulates one replica for `n` steps and returns the full path.
pub fn simulate(
    rule: &ResamplingRule,
    schedule: &CoolingSchedule,
    n: u64,
    seed: u64,
    replica: u64,
) -> Result<Trajectory> {
    let schedule = covering(schedule, n)?;
    let mut env = Environment::new(rule, seed, replica, 0);
    let mut steps = stream::keyed(seed, Purpose::Step, replica, 0, 0);
    let mut positions = Vec::with_capacity(n as usize + 1);
    run_walk(&mut env, &schedule, n, &mut steps, |_, x| positions.push(x));
    Ok(Trajectory { replica, positions })
}

/// Same walk as [`simulate`] but with a caller-supplied field.
pub fn simulate_in<F: OmegaField>(
    field: &mut F,
    schedule: &CoolingSchedule,
    n: u64,
    seed: u64,
    replica: u64,
) -> Result<Trajectory> {
    let schedule = covering(schedule, n)?;
    let mut steps = stream::keyed(seed, Purpose::Step, replica, 0, 0);
    let mut positions = Vec::with_capacity(n as usize + 1);
    run_walk(field, &schedule, n, &mut steps, |_, x| positions.push(x));
    Ok(Trajectory { replica, positions })
}

/// Simulates one replica and records `X_t` only at the sorted `times`.
/// Identical path to [`simulate`] for the same arguments.
pub fn positions_at(
    rule: &ResamplingRule,
    schedule: &CoolingSchedule,
    n: u64,
    seed: u64,
    replica: u64,
    times: &[u64],
) -> Result<Vec<i64>> {
    if times.windows(2).any(|w| w[0] > w[1]) || times.last().is_some_and(|&t| t > n) {
        return Err(Error::domain("observation times must be sorted and <= n"));
    }
    let schedule = covering(schedule, n)?;
    let mut env = Environment::new(rule, seed, replica, 0);
    let mut steps = stream::keyed(seed, Purpose::Step, replica, 0, 0);
    let mut out = Vec::with_capacity(times.len());
    let mut cursor = 0;
    run_walk(&mut env, &schedule, n, &mut steps, |i, x| {
        while cursor < times.len() && times[cursor] == i {
            out.push(x);
            cursor += 1;
        }
    });
    Ok(out)
}

/// Decomposes `traj` at its own horizon.
pub fn decompose(traj: &Trajectory, schedule: &CoolingSchedule) -> Result<BlockIncrements> {
    decompose_at(traj, schedule, traj.horizon())
}

/// Decomposes `X_n` for some `n <= traj.horizon()`.
pub fn decompose_at(
    traj: &Trajectory,
    schedule: &CoolingSchedule,
    n: u64,
) -> Result<BlockIncrements> {
    if n > traj.horizon() {
        return Err(Error::domain(format!(
            "time {n} beyond trajectory horizon {}",
            traj.horizon()
        )));
    }
    let x = |i: u64| traj.positions[i as usize];
    let k = schedule.k_of_n(n)?;
    let mut blocks = Vec::with_capacity(k as usize);
    let mut prev = 0;
    for j in 1..=k {
        let t = schedule.tau(j)?;
        blocks.push(x(t) - x(prev));
        prev = t;
    }
    let next = schedule.tau(k + 1)?;
    let complement = (next <= traj.horizon()).then(|| x(next) - x(n));
    Ok(BlockIncrements {
        blocks,
        remainder: x(n) - x(prev),
        complement,
    })
}

/// Where a grid point `t` falls on the integer time axis of a horizon-`n` walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub lo: u64,
    pub hi: u64,
    pub frac: f64,
}

impl Knot {
    pub fn new(t: f64, n: u64) -> Self {
        let tn = t * n as f64;
        let lo = (tn.floor() as u64).min(n);
        let frac = if lo == n { 0.0 } else { tn - lo as f64 };
        Knot {
            lo,
            hi: (lo + 1).min(n),
            frac,
        }
    }

    /// `f(lo) + frac * (f(hi) - f(lo))`.
    pub fn eval(&self, f: impl Fn(u64) -> f64) -> f64 {
        let a = f(self.lo);
        if self.frac == 0.0 {
            a
        } else {
            a + self.frac * (f(self.hi) - a)
        }
    }
}

/// The integer times needed to evaluate a path on `grid` at horizon `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPlan {
    pub n: u64,
    pub grid: Vec<f64>,
    pub knots: Vec<Knot>,
    /// Sorted, deduplicated times to record.
    pub times: Vec<u64>,
}

impl ObservationPlan {
    pub fn new(n: u64, grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let knots: Vec<Knot> = grid.iter().map(|&t| Knot::new(t, n)).collect();
        let mut times: Vec<u64> = knots.iter().flat_map(|k| [k.lo, k.hi]).collect();
        times.sort_unstable();
        times.dedup();
        Ok(ObservationPlan {
            n,
            grid: grid.to_vec(),
            knots,
            times,
        })
    }

    /// Interpolated raw values on the grid from positions recorded at
    /// `self.times`.
    pub fn evaluate(&self, recorded: &[i64]) -> Vec<f64> {
        let at = |i: u64| {
            let idx = self.times.binary_search(&i).expect("time in plan");
            recorded[idx] as f64
        };
        self.knots.iter().map(|k| k.eval(at)).collect()
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("empty time grid"));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::domain("grid points must lie in [0, 1]"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("grid must be strictly increasing"));
    }
    Ok(())
}

/// Simulates one replica and returns the raw (uncentered, unscaled) path
/// values on the plan's grid.
pub fn observe(
    rule: &ResamplingRule,
    schedule: &CoolingSchedule,
    plan: &ObservationPlan,
    seed: u64,
    replica: u64,
) -> Result<Vec<f64>> {
    let recorded = positions_at(rule, schedule, plan.n, seed, replica, &plan.times)?;
    Ok(plan.evaluate(&recorded))
}

/// Pointwise Monte Carlo estimate of `E[X]` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

impl Centering {
    pub fn zero(len: usize) -> Self {
        Centering {
            mean: vec![0.0; len],
            std_err: vec![0.0; len],
        }
    }
}

/// Sample mean and its standard error at each grid column across replicas.
/// Sums run in replica order with compensated summation.
pub fn center(observations: &[Vec<f64>]) -> Result<Centering> {
    if observations.is_empty() {
        return Err(Error::EmptySample);
    }
    if observations.len() < 2 {
        return Err(Error::TooFewReplicas {
            needed: 2,
            got: observations.len(),
        });
    }
    let cols = observations[0].len();
    if observations.iter().any(|r| r.len() != cols) {
        return Err(Error::domain("ragged observation rows"));
    }
    let r = observations.len() as f64;
    let mut mean = Vec::with_capacity(cols);
    let mut std_err = Vec::with_capacity(cols);
    for c in 0..cols {
        let m = compensated_sum(observations.iter().map(|row| row[c])) / r;
        let ss = compensated_sum(observations.iter().map(|row| (row[c] - m).powi(2)));
        mean.push(m);
        std_err.push((ss / (r - 1.0) / r).sqrt());
    }
    Ok(Centering { mean, std_err })
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A centered, χ-normalized path sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub chi: f64,
}

/// `X^n_t = [X̃_{⌊tn⌋} + (tn - ⌊tn⌋)(X̃_{⌊tn⌋+1} - X̃_{⌊tn⌋})] / √χ`.
///
/// `centering[i]` is the interpolated mean at `grid[i]`.
pub fn scaled_path(
    traj: &Trajectory,
    centering: &[f64],
    chi: f64,
    grid: &[f64],
) -> Result<ScaledPath> {
    check_grid(grid)?;
    if centering.len() != grid.len() {
        return Err(Error::domain("centering length differs from grid"));
    }
    let raw: Vec<f64> = grid.iter().map(|&t| traj.interpolate(t)).collect();
    scale_observation(&raw, centering, chi, grid)
}

/// [`scaled_path`] for values already interpolated on the grid.
pub fn scale_observation(
    raw: &[f64],
    centering: &[f64],
    chi: f64,
    grid: &[f64],
) -> Result<ScaledPath> {
    if !(chi > 0.0) {
        return Err(Error::domain(format!("chi must be positive, got {chi}")));
    }
    let norm = chi.sqrt();
    Ok(ScaledPath {
        grid: grid.to_vec(),
        values: raw
            .iter()
            .zip(centering)
            .map(|(x, m)| (x - m) / norm)
            .collect(),
        chi,
    })
}
