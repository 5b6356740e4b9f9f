//! Levenberg–Marquardt with a per-step chi² trace.
//!
//! A *step* is one solve of the damped normal equations; an *iteration* is a
//! relinearization, which only happens after an accepted step. Rejected steps
//! raise λ and re-solve the same linear system.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{linearize, FactorGraph, SparseSystem, Values, VariableIndex};
use crate::sparse::{PivotFailure, SymbolicStructure, SymmetricMatrix};

/// Relative pivot tolerance of the factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda_init: f64,
    pub lambda_up_factor: f64,
    pub lambda_down_factor: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers chi² by less than this fraction.
    pub relative_threshold: f64,
    /// Stop once chi² drops below this value.
    pub absolute_threshold: f64,
    pub max_lambda: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_init: 1e-5,
            lambda_up_factor: 10.0,
            lambda_down_factor: 10.0,
            max_iterations: 100,
            relative_threshold: 1e-6,
            absolute_threshold: 1e-10,
            max_lambda: 1e8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config { field: field.into(), message: message.into() })
            }
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        check(positive(self.lambda_init), "lambda_init", "must be positive")?;
        check(self.lambda_up_factor.is_finite() && self.lambda_up_factor > 1.0, "lambda_up_factor", "must exceed 1")?;
        check(self.lambda_down_factor.is_finite() && self.lambda_down_factor > 1.0, "lambda_down_factor", "must exceed 1")?;
        check(positive(self.relative_threshold), "relative_threshold", "must be positive")?;
        check(positive(self.absolute_threshold), "absolute_threshold", "must be positive")?;
        check(positive(self.max_lambda) && self.max_lambda >= self.lambda_init, "max_lambda", "must be at least lambda_init")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    AbsoluteThreshold,
    RelativeDecrease,
    MaxIterations,
    LambdaExceeded,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::AbsoluteThreshold => "absolute_threshold",
            StopReason::RelativeDecrease => "relative_decrease",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LambdaExceeded => "lambda_exceeded",
        }
    }
}

/// One row of the trace. Row 0 records the initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    /// Linearization the step was solved at (0 = initial values).
    pub iteration: usize,
    pub lambda: f64,
    /// chi² at the linearization point.
    pub chi2_before: f64,
    /// chi² of the candidate, whether or not it was accepted.
    pub chi2_after: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    /// Accepted steps (= relinearizations).
    pub iterations: usize,
    /// Linear solves.
    pub steps: usize,
    pub rejected_steps: usize,
    pub initial_chi2: f64,
    pub final_chi2: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub wall_time: Duration,
}

impl SolveTrace {
    pub fn error_changes(&self) -> Vec<f64> {
        error_changes(&self.records)
    }

    pub fn sign_flips(&self) -> usize {
        sign_flips(&self.error_changes())
    }
}

/// `χ²_{n−1} − χ²_n` over the `chi2_after` column; 0 for the initial row.
pub fn error_changes(records: &[TraceRecord]) -> Vec<f64> {
    let mut prev = None;
    records
        .iter()
        .map(|r| {
            let change = prev.map_or(0.0, |p: f64| p - r.chi2_after);
            prev = Some(r.chi2_after);
            change
        })
        .collect()
}

/// Number of sign changes in the non-zero error-change sequence.
pub fn sign_flips(changes: &[f64]) -> usize {
    let signs: Vec<bool> = changes.iter().filter(|c| **c != 0.0 && !c.is_nan()).map(|c| *c > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

pub const TRACE_HEADER: &str = "step,iteration,lambda,chi2_before,chi2_after,error_change,accepted";

/// Comma-separated trace, header first.
pub fn export_trace(trace: &SolveTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (r, change) in trace.records.iter().zip(trace.error_changes()) {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{}",
            r.step, r.iteration, r.lambda, r.chi2_before, r.chi2_after, change, r.accepted
        );
    }
    out
}

/// Reads an exported trace back; the `error_change` column is recomputed by
/// [`error_changes`] and only checked for well-formedness.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        _ => return Err(Error::Parse { line: 1, message: format!("expected trace header `{TRACE_HEADER}`") }),
    }
    let mut records = Vec::new();
    for (n, line) in lines {
        let err = |message: String| Error::Parse { line: n + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 comma-separated fields, found {}", fields.len())));
        }
        let int = |i: usize| fields[i].parse::<usize>().map_err(|_| err(format!("`{}` is not a count", fields[i])));
        let real = |i: usize| fields[i].parse::<f64>().map_err(|_| err(format!("`{}` is not a number", fields[i])));
        real(5)?;
        records.push(TraceRecord {
            step: int(0)?,
            iteration: int(1)?,
            lambda: real(2)?,
            chi2_before: real(3)?,
            chi2_after: real(4)?,
            accepted: fields[6].parse().map_err(|_| err(format!("`{}` is not true/false", fields[6])))?,
        });
    }
    Ok(records)
}

/// Minimizes the graph's chi² starting from `initial`.
///
/// The undamped system is factored once at the initial linearization; a failed
/// pivot there means the problem has a gauge freedom (or an unconstrained
/// variable) and is reported as [`Error::Indeterminate`].
pub fn solve(graph: &FactorGraph, initial: &Values, config: &SolverConfig) -> Result<(Values, SolveTrace)> {
    config.validate()?;
    graph.check_keys(initial)?;
    let start = Instant::now();

    let index = VariableIndex::new(initial);
    let dims: Vec<usize> = (0..index.len()).map(|n| index.block_dim(n)).collect();
    let natural_offsets: Vec<usize> = (0..index.len()).map(|n| index.offset(n)).collect();
    let factor_blocks: Vec<Vec<usize>> = graph
        .factors()
        .iter()
        .map(|f| f.keys().iter().map(|k| index.position(k).expect("keys checked")).collect())
        .collect();
    let structure = SymbolicStructure::new(&dims, factor_blocks.iter().map(Vec::as_slice));
    let indeterminate = |f: PivotFailure| Error::Indeterminate { key: index.key(f.block), pivot: f.pivot, diagonal: f.diagonal };

    let mut values = initial.clone();
    let mut chi2 = graph.chi2(&values)?;
    let initial_chi2 = chi2;
    let mut lambda = config.lambda_init;
    let mut records = vec![TraceRecord {
        step: 0,
        iteration: 0,
        lambda,
        chi2_before: chi2,
        chi2_after: chi2,
        accepted: true,
    }];
    let (mut iterations, mut steps, mut rejected) = (0, 0, 0);

    // Structural check, made even when the start already meets the thresholds.
    let (hessian, _) = assemble(&structure, &linearize(graph, &values)?);
    structure.factor(&hessian, PIVOT_TOLERANCE).map_err(indeterminate)?;

    let stop_reason = 'outer: loop {
        if chi2 < config.absolute_threshold {
            break StopReason::AbsoluteThreshold;
        }
        if iterations >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        let system = linearize(graph, &values)?;
        let (hessian, gradient) = assemble(&structure, &system);
        loop {
            if lambda > config.max_lambda {
                break 'outer StopReason::LambdaExceeded;
            }
            let mut damped = hessian.clone();
            structure.damp(&mut damped, lambda);
            let factor = structure.factor(&damped, PIVOT_TOLERANCE).map_err(indeterminate)?;
            let mut rhs: Vec<f64> = gradient.iter().map(|g| -g).collect();
            factor.solve_in_place(&mut rhs);
            let delta = structure.unpermute(&rhs, &natural_offsets);
            let candidate = values.retract(&delta)?;
            // A candidate whose residuals cannot be evaluated counts as infinitely bad.
            let candidate_chi2 = graph.chi2(&candidate).unwrap_or(f64::INFINITY);
            steps += 1;
            let accepted = candidate_chi2 < chi2;
            records.push(TraceRecord {
                step: steps,
                iteration: iterations,
                lambda,
                chi2_before: chi2,
                chi2_after: candidate_chi2,
                accepted,
            });
            if accepted {
                let decrease = (chi2 - candidate_chi2) / chi2;
                values = candidate;
                chi2 = candidate_chi2;
                lambda /= config.lambda_down_factor;
                iterations += 1;
                if chi2 < config.absolute_threshold {
                    break 'outer StopReason::AbsoluteThreshold;
                }
                if decrease < config.relative_threshold {
                    break 'outer StopReason::RelativeDecrease;
                }
                break;
            }
            rejected += 1;
            lambda *= config.lambda_up_factor;
        }
    };

    let trace = SolveTrace {
        records,
        iterations,
        steps,
        rejected_steps: rejected,
        initial_chi2,
        final_chi2: chi2,
        converged: matches!(stop_reason, StopReason::AbsoluteThreshold | StopReason::RelativeDecrease),
        stop_reason,
        wall_time: start.elapsed(),
    };
    Ok((values, trace))
}

/// Builds `JᵀJ` and `Jᵀr` in the structure's permuted layout.
fn assemble(structure: &SymbolicStructure, system: &SparseSystem) -> (SymmetricMatrix, Vec<f64>) {
    let mut hessian = structure.zero_matrix();
    let mut gradient = vec![0.0; structure.dim()];
    for f in &system.factors {
        for (a, (&va, ja)) in f.variables.iter().zip(&f.jacobians).enumerate() {
            let g: DVector<f64> = ja.tr_mul(&f.residual);
            structure.add_to_vector(&mut gradient, va, &g);
            for (&vb, jb) in f.variables.iter().zip(&f.jacobians).skip(a) {
                structure.add_block(&mut hessian, va, vb, &ja.tr_mul(jb));
            }
        }
    }
    (hessian, gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::Factor;
    use crate::graph::{NoiseModel, VariableKey};
    use crate::se3::{Point3, Pose};

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { lambda_up_factor: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { absolute_threshold: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trace_export_has_error_change_column() {
        let key = VariableKey::StaticPoint(0);
        let graph: FactorGraph =
            [Factor::prior_point(key, Point3::new(1.0, 2.0, 3.0), NoiseModel::isotropic(3, 0.1).unwrap()).unwrap()]
                .into_iter()
                .collect();
        let mut values = Values::new();
        values.insert_point(key, Point3::origin());
        let (est, trace) = solve(&graph, &values, &SolverConfig::default()).unwrap();
        assert!((est.point(&key).unwrap() - Point3::new(1.0, 2.0, 3.0)).norm() < 1e-9);
        let csv = export_trace(&trace);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.count(), trace.records.len());
        assert_eq!(parse_trace(&csv).unwrap(), trace.records);
        assert!(matches!(parse_trace("step\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn sign_flips_ignore_zero_changes() {
        assert_eq!(sign_flips(&[0.0, 3.0, -1.0, 0.0, 2.0, 1.0]), 2);
        assert_eq!(sign_flips(&[0.0]), 0);
    }

    #[test]
    fn unconstrained_pose_is_indeterminate() {
        let a = VariableKey::CameraPose(0);
        let b = VariableKey::CameraPose(1);
        let graph: FactorGraph =
            [Factor::odometry(a, b, Pose::from_translation(1.0, 0.0, 0.0), NoiseModel::twist(0.1, 0.1).unwrap()).unwrap()]
                .into_iter()
                .collect();
        let mut values = Values::new();
        values.insert_pose(a, Pose::identity());
        values.insert_pose(b, Pose::identity());
        assert!(matches!(solve(&graph, &values, &SolverConfig::default()), Err(Error::Indeterminate { .. })));
    }
}
