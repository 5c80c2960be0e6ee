//! The solve, estimate, mark and refine loop.

use std::time::Instant;

use crate::assembly::{assemble, energy_error, solve, Discretization, EllipticProblem};
use crate::error::{Error, Result};
use crate::estimator::{compute_indicators, IndicatorSet};
use crate::sparse::{SolveStats, SolverOptions};
use crate::tensor::TensorFunction;

/// Functions with `E_β ≥ θ max E`.
pub fn mark_max(indicators: &IndicatorSet, theta: f64) -> Result<Vec<TensorFunction>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("marking parameter {theta} outside (0, 1]")));
    }
    if indicators.is_empty() {
        return Err(Error::InsufficientData("no indicators to mark".into()));
    }
    let max = indicators.values.iter().fold(0.0f64, |m, v| m.max(*v));
    let threshold = theta * max;
    Ok(indicators
        .functions
        .iter()
        .zip(&indicators.values)
        .filter(|(_, v)| **v >= threshold)
        .map(|(f, _)| *f)
        .collect())
}

/// One row of a run record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Active basis functions, boundary ones included.
    pub dofs: usize,
    pub elements: usize,
    pub levels: usize,
    pub energy_error: Option<f64>,
    pub estimator: f64,
    pub efficiency: Option<f64>,
    pub marked: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<IterationRecord>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.rows.last()
    }
}

/// Stop rules and loop parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    pub theta: f64,
    /// No refinement beyond this many DOFs is solved; the initial space always is.
    pub max_dofs: usize,
    /// Stop once the global indicator falls to this value.
    pub estimator_tol: f64,
    /// Stop once the energy error falls to this value.
    pub error_tol: f64,
    pub max_iterations: usize,
    pub solver: SolverOptions,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_dofs: 20_000,
            estimator_tol: 0.0,
            error_tol: 0.0,
            max_iterations: 200,
            solver: SolverOptions::default(),
        }
    }
}

/// Indicators below this are treated as an exact discrete solution.
pub const CONVERGED_ESTIMATOR: f64 = 1e-12;

/// Result of the solve and estimate stages on one discretization.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub coeffs: Vec<f64>,
    pub indicators: IndicatorSet,
    pub energy_error: Option<f64>,
    pub solver: SolveStats,
}

pub fn solve_and_estimate(disc: &Discretization, problem: &EllipticProblem, solver: &SolverOptions) -> Result<Estimate> {
    let system = assemble(disc, problem)?;
    let (coeffs, stats) = solve(&system, solver)?;
    let indicators = compute_indicators(disc, problem, &coeffs)?;
    let err = match &problem.exact_grad {
        Some(g) => Some(energy_error(disc, &coeffs, g)?),
        None => None,
    };
    Ok(Estimate {
        coeffs,
        indicators,
        energy_error: err,
        solver: stats,
    })
}

/// Enlarges the hierarchy by the supports of the marked functions and rebuilds.
pub fn refine(disc: &Discretization, marked: &[TensorFunction]) -> Result<Discretization> {
    let h = disc.basis.hierarchy().enlarge(&disc.basis, marked)?;
    let basis = disc.basis.refine(h)?;
    Discretization::new(basis, disc.map)
}

/// Everything produced by one pass of the loop.
#[derive(Debug, Clone)]
pub struct Step {
    pub row: IterationRecord,
    pub estimate: Estimate,
    pub marked: Vec<TensorFunction>,
    pub next: Discretization,
}

/// Solve, estimate, mark and refine once.
pub fn adapt_step(disc: &Discretization, problem: &EllipticProblem, config: &AdaptiveConfig, iter: usize) -> Result<Step> {
    let start = Instant::now();
    let estimate = solve_and_estimate(disc, problem, &config.solver)?;
    let marked = mark_max(&estimate.indicators, config.theta)?;
    let next = refine(disc, &marked)?;
    let row = make_row(iter, disc, &estimate, marked.len(), start);
    Ok(Step {
        row,
        estimate,
        marked,
        next,
    })
}

fn make_row(iter: usize, disc: &Discretization, est: &Estimate, marked: usize, start: Instant) -> IterationRecord {
    let global = est.indicators.global();
    let efficiency = est.energy_error.filter(|e| *e > 0.0).map(|e| global / e);
    IterationRecord {
        iter,
        dofs: disc.num_dofs(),
        elements: disc.mesh.len(),
        levels: disc.basis.num_levels(),
        energy_error: est.energy_error,
        estimator: global,
        efficiency,
        marked,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// A run that stopped on an error, with the iterations completed before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunRecord,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.partial.len())
    }
}

impl std::error::Error for RunFailure {}

/// Per-iteration hook receiving the discretization, its estimate and the marked set.
pub type Observer<'a> = dyn FnMut(&Discretization, &Estimate, &[TensorFunction]) + 'a;

/// Runs the adaptive loop from `initial` until a stop rule fires.
pub fn run(
    initial: Discretization,
    problem: &EllipticProblem,
    config: &AdaptiveConfig,
    observer: Option<&mut Observer<'_>>,
) -> std::result::Result<RunRecord, RunFailure> {
    let mut record = RunRecord::default();
    let mut disc = initial;
    let mut observer = observer;
    for iter in 0..config.max_iterations.max(1) {
        let start = Instant::now();
        let estimate = match solve_and_estimate(&disc, problem, &config.solver) {
            Ok(e) => e,
            Err(error) => return Err(RunFailure { error, partial: record }),
        };
        let global = estimate.indicators.global();
        let done = disc.num_dofs() >= config.max_dofs
            || global <= config.estimator_tol.max(CONVERGED_ESTIMATOR)
            || estimate.energy_error.is_some_and(|e| e <= config.error_tol)
            || iter + 1 == config.max_iterations;
        let mut next = None;
        let mut marked = Vec::new();
        if !done {
            let refined = mark_max(&estimate.indicators, config.theta).and_then(|m| {
                let n = refine(&disc, &m)?;
                marked = m;
                Ok(n)
            });
            match refined {
                Ok(n) if n.num_dofs() <= config.max_dofs => next = Some(n),
                Ok(_) => marked.clear(),
                Err(error) => return Err(RunFailure { error, partial: record }),
            }
        }
        if let Some(obs) = observer.as_mut() {
            obs(&disc, &estimate, &marked);
        }
        record.rows.push(make_row(iter, &disc, &estimate, marked.len(), start));
        match next {
            Some(n) => disc = n,
            None => break,
        }
    }
    Ok(record)
}
