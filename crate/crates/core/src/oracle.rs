//! Brute-force ground truth: push every input state through the network.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::analysis::Pipeline;
use crate::distribution::{tv_distance, Distribution};
use crate::domain::StateSpace;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::scalar::Scalar;

/// Output points with their aggregated masses, ascending by point.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput<S> {
    pub points: Vec<(Vec<S>, S)>,
    pub evaluations: usize,
}

impl<S: Scalar> OracleOutput<S> {
    pub fn total(&self) -> S {
        self.points.iter().map(|(_, p)| p.clone()).sum()
    }

    /// Mass of the points satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[S]) -> bool) -> S {
        self.points
            .iter()
            .filter(|(x, _)| pred(x))
            .map(|(_, p)| p.clone())
            .sum()
    }

    /// Snaps every output point onto `space`.
    pub fn onto(&self, space: &StateSpace) -> Result<Distribution<S>> {
        let entries = self
            .points
            .iter()
            .map(|(x, p)| Ok((space.locate(x)?, p.clone())))
            .collect::<Result<Vec<_>>>()?;
        Distribution::unnormalized(space.len(), entries)
    }
}

fn cmp_points<S: Scalar>(a: &[S], b: &[S]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Evaluates `net` on every state in the support of `d`, aggregating masses by
/// exact output value. Refuses when the support exceeds `budget`.
pub fn brute_force_push<S: Scalar>(
    net: &Network<S>,
    d: &Distribution<S>,
    dom_in: &StateSpace,
    budget: usize,
) -> Result<OracleOutput<S>> {
    if d.domain_size() != dom_in.len() {
        return Err(Error::DimensionMismatch {
            context: "oracle input distribution",
            expected: dom_in.len(),
            found: d.domain_size(),
        });
    }
    let required = d.support_len();
    if required > budget {
        return Err(Error::BudgetExceeded {
            required,
            cap: budget,
        });
    }
    let support: Vec<(usize, S)> = d.iter().map(|(i, p)| (i, p.clone())).collect();
    let mut evaluated = support
        .par_iter()
        .map(|(i, p)| Ok((net.eval(&dom_in.point::<S>(*i))?, p.clone())))
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps input order among equal points, so sums are reproducible
    evaluated.sort_by(|a, b| cmp_points(&a.0, &b.0));
    let mut points: Vec<(Vec<S>, S)> = Vec::new();
    for (x, p) in evaluated {
        match points.last_mut() {
            Some(last) if cmp_points(&last.0, &x) == Ordering::Equal => last.1 = last.1.clone() + p,
            _ => points.push((x, p)),
        }
    }
    Ok(OracleOutput {
        points,
        evaluations: required,
    })
}

/// One abstract cell of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDelta<S> {
    pub cell: usize,
    pub label: String,
    pub oracle: S,
    pub composed: S,
}

/// Oracle against composed abstract propagation on the pipeline's output cells.
#[derive(Debug, Clone)]
pub struct Comparison<S> {
    pub oracle_abstracted: Distribution<S>,
    pub composed_abstract: Distribution<S>,
    pub tv: S,
    /// Cells where either side has mass, ascending.
    pub cells: Vec<CellDelta<S>>,
}

/// Runs the oracle over the pipeline's prefix and abstracts its output with the
/// final stage's partition.
pub fn oracle_abstracted<S: Scalar>(
    pipeline: &Pipeline<S>,
    d: &Distribution<S>,
    budget: usize,
) -> Result<Distribution<S>> {
    let out = pipeline.output_stage();
    let pushed = brute_force_push(&pipeline.prefix()?, d, pipeline.input_space(), budget)?;
    let entries = pushed
        .points
        .iter()
        .map(|(x, p)| Ok((out.partition.cell_of(out.space.locate(x)?), p.clone())))
        .collect::<Result<Vec<_>>>()?;
    Distribution::new(out.partition.cell_count(), entries)
}

pub fn compare_abstract<S: Scalar>(
    pipeline: &Pipeline<S>,
    d: &Distribution<S>,
    budget: usize,
) -> Result<Comparison<S>> {
    let oracle = oracle_abstracted(pipeline, d, budget)?;
    let composed = pipeline.run_from(d)?.output().clone();
    let partition = &pipeline.output_stage().partition;
    let mut touched: Vec<usize> = oracle
        .iter()
        .chain(composed.iter())
        .map(|(c, _)| c)
        .collect();
    touched.sort_unstable();
    touched.dedup();
    let cells = touched
        .into_iter()
        .map(|c| CellDelta {
            cell: c,
            label: partition.label(c),
            oracle: oracle.get(c),
            composed: composed.get(c),
        })
        .collect();
    Ok(Comparison {
        tv: tv_distance(&oracle, &composed)?,
        oracle_abstracted: oracle,
        composed_abstract: composed,
        cells,
    })
}
