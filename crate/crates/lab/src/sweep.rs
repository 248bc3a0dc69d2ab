//! Convergence-region sweeps.
//!
//! A sweep walks a (P, beta2) grid for a fixed beta1 slice. Each cell runs
//! one trajectory per learning-rate candidate (with the 1/sqrt(t) schedule),
//! measures the mean distance to the optimum over the trailing window, and
//! marks the cell Converge when any candidate pushes that distance below the
//! tolerance. Protocol defaults: 10^4 steps, candidates 1e-5..1.0 in decades,
//! trailing window 1000 steps, tolerance 0.01.
//!
//! Stochastic cells average the tail error over a handful of seeds derived
//! from the master seed and the cell coordinates, so verdicts never depend
//! on the order in which cells are evaluated.

use crate::optim::{run_with, HyperParams, Variant};
use crate::problems::{ProblemKind, ProblemSpec};
use crate::rng::mix_seed;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_LR_CANDIDATES: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_STEPS: u64 = 10_000;
pub const DEFAULT_TAIL: u64 = 1_000;
pub const DEFAULT_TOL: f64 = 0.01;
pub const DEFAULT_P_PROBLEM1: [u32; 5] = [3, 5, 7, 9, 11];
pub const DEFAULT_P_PROBLEM2: [u32; 4] = [5, 7, 9, 11];
pub const DEFAULT_BETA2_POINTS: usize = 20;
pub const DEFAULT_STOCHASTIC_SEEDS: u32 = 5;

/// n log-spaced points covering [lo, hi] inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn default_beta2_grid() -> Vec<f64> {
    log_grid(0.1, 0.999, DEFAULT_BETA2_POINTS)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub problem: ProblemKind,
    pub p_values: Vec<u32>,
    pub beta2_values: Vec<f64>,
    pub beta1: f64,
    pub lr_candidates: Vec<f64>,
    pub steps: u64,
    pub tail: u64,
    pub tol: f64,
    pub optimizers: Vec<Variant>,
    pub seed: u64,
    /// Drift of the stochastic problem.
    pub delta: f64,
    /// Seeds averaged per cell on stochastic problems.
    pub stochastic_seeds: u32,
    /// AdaShift delay step.
    pub delay_n: usize,
    pub eps: f64,
}

impl SweepGrid {
    pub fn new(problem: ProblemKind, beta1: f64, optimizers: Vec<Variant>, seed: u64) -> Self {
        let p_values = match problem {
            ProblemKind::Sparse2 => DEFAULT_P_PROBLEM2.to_vec(),
            _ => DEFAULT_P_PROBLEM1.to_vec(),
        };
        Self {
            problem,
            p_values,
            beta2_values: default_beta2_grid(),
            beta1,
            lr_candidates: DEFAULT_LR_CANDIDATES.to_vec(),
            steps: DEFAULT_STEPS,
            tail: DEFAULT_TAIL,
            tol: DEFAULT_TOL,
            optimizers,
            seed,
            delta: 0.1,
            stochastic_seeds: DEFAULT_STOCHASTIC_SEEDS,
            delay_n: 1,
            eps: 1e-8,
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // !(tol > 0) also rejects NaN
    pub fn validate(&self) -> Result<()> {
        if self.lr_candidates.is_empty() {
            return Err(Error::InvalidParameter("lr_candidates must be non-empty".into()));
        }
        if self.tail >= self.steps {
            return Err(Error::InvalidParameter(format!(
                "tail ({}) must be < steps ({})",
                self.tail, self.steps
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be > 0".into()));
        }
        if !matches!(
            self.problem,
            ProblemKind::Periodic1 | ProblemKind::Stochastic1 | ProblemKind::Sparse2
        ) {
            return Err(Error::InvalidParameter(format!(
                "sweeps are defined for the periodic problems, not {}",
                self.problem.name()
            )));
        }
        Ok(())
    }

    fn problem_spec(&self, p: u32) -> Result<ProblemSpec> {
        ProblemSpec::from_kind(self.problem, p, self.delta, 0.0, 1)
    }

    fn hyper(&self, variant: Variant, beta2: f64, lr: f64) -> HyperParams {
        let mut hp = HyperParams::new(variant, lr).with_betas(self.beta1, beta2);
        hp.eps = self.eps;
        hp.delay_n = self.delay_n;
        hp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converge,
    Diverge,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converge => "converge",
            Verdict::Diverge => "diverge",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellVerdict {
    pub variant: Variant,
    pub p: u32,
    pub beta2: f64,
    pub beta1: f64,
    pub best_lr: Option<f64>,
    /// Best (smallest) tail-mean distance across learning-rate candidates.
    pub tail_error: f64,
    pub verdict: Verdict,
}

/// Mean distance to the optimum over the last `tail` steps of one run.
/// Non-finite trajectories surface as +inf so the candidate loses.
fn tail_error_one_run(
    grid: &SweepGrid,
    problem: &ProblemSpec,
    hp: &HyperParams,
    seed: u64,
) -> f64 {
    let start = grid.steps - grid.tail;
    let mut acc = 0.0f64;
    let x_star = problem.x_star[0];
    let res = run_with(hp, problem, &problem.x0_default, grid.steps, seed, |t, state, _, _| {
        if t > start {
            acc += (state.x[0] - x_star).abs();
        }
    });
    match res {
        Ok(_) if acc.is_finite() => acc / grid.tail as f64,
        _ => f64::INFINITY,
    }
}

/// Judge one (P, beta2, variant) cell: try every learning-rate candidate,
/// keep the best tail error, convert to a verdict.
pub fn judge_cell(grid: &SweepGrid, p: u32, beta2: f64, variant: Variant) -> Result<CellVerdict> {
    grid.validate()?;
    let problem = grid.problem_spec(p)?;
    let trials = if grid.problem == ProblemKind::Stochastic1 {
        grid.stochastic_seeds.max(1)
    } else {
        1
    };
    let mut best_lr = None;
    let mut best_err = f64::INFINITY;
    for (lr_idx, &lr) in grid.lr_candidates.iter().enumerate() {
        let hp = grid.hyper(variant, beta2, lr);
        let mut sum = 0.0;
        for trial in 0..trials {
            let seed = cell_seed(grid.seed, variant, p, beta2, lr_idx, trial);
            sum += tail_error_one_run(grid, &problem, &hp, seed);
        }
        let err = sum / trials as f64;
        if err < best_err {
            best_err = err;
            best_lr = Some(lr);
        }
    }
    let verdict = if best_err < grid.tol {
        Verdict::Converge
    } else {
        Verdict::Diverge
    };
    Ok(CellVerdict {
        variant,
        p,
        beta2,
        beta1: grid.beta1,
        best_lr,
        tail_error: best_err,
        verdict,
    })
}

/// Seed for one trajectory, a pure function of the cell coordinates; cells
/// can run in any order or in parallel without changing a single draw.
fn cell_seed(master: u64, variant: Variant, p: u32, beta2: f64, lr_idx: usize, trial: u32) -> u64 {
    let mut s = mix_seed(master, variant as u64 + 1);
    s = mix_seed(s, p as u64);
    s = mix_seed(s, beta2.to_bits());
    s = mix_seed(s, lr_idx as u64 + 1);
    mix_seed(s, trial as u64 + 1)
}

/// Judge every cell of the grid. Cells run in parallel; the result is
/// sorted by (variant, P, beta2) so output is deterministic.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<CellVerdict>> {
    grid.validate()?;
    let mut cells = Vec::new();
    for &variant in &grid.optimizers {
        for &p in &grid.p_values {
            for &beta2 in &grid.beta2_values {
                cells.push((variant, p, beta2));
            }
        }
    }
    let mut verdicts = cells
        .into_par_iter()
        .map(|(variant, p, beta2)| judge_cell(grid, p, beta2, variant))
        .collect::<Result<Vec<_>>>()?;
    verdicts.sort_by(|a, b| {
        (a.variant.name(), a.p)
            .cmp(&(b.variant.name(), b.p))
            .then(a.beta2.partial_cmp(&b.beta2).unwrap())
    });
    Ok(verdicts)
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaThreshold {
    pub variant: Variant,
    pub p: u32,
    /// Smallest grid beta2 from which every cell upward converges; None when
    /// even the largest beta2 diverges.
    pub beta2_star: Option<f64>,
}

/// Extract, per (variant, P), the smallest grid beta2 at and above which all
/// cells converge.
pub fn boundary_extract(verdicts: &[CellVerdict]) -> Vec<BetaThreshold> {
    let mut keys: Vec<(Variant, u32)> = verdicts.iter().map(|c| (c.variant, c.p)).collect();
    keys.sort_by(|a, b| (a.0.name(), a.1).cmp(&(b.0.name(), b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(variant, p)| {
            let mut row: Vec<&CellVerdict> = verdicts
                .iter()
                .filter(|c| c.variant == variant && c.p == p)
                .collect();
            row.sort_by(|a, b| a.beta2.partial_cmp(&b.beta2).unwrap());
            let mut beta2_star = None;
            for cell in row.iter().rev() {
                if cell.verdict == Verdict::Converge {
                    beta2_star = Some(cell.beta2);
                } else {
                    break;
                }
            }
            BetaThreshold {
                variant,
                p,
                beta2_star,
            }
        })
        .collect()
}

/// Count converged cells for one variant.
pub fn converge_count(verdicts: &[CellVerdict], variant: Variant) -> usize {
    verdicts
        .iter()
        .filter(|c| c.variant == variant && c.verdict == Verdict::Converge)
        .count()
}
