//! Abstract transformers `f# = A′·f⃗·G` and their composition.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::{build_A, build_G, cell_rng, Partition};
use crate::distribution::Distribution;
use crate::domain::StateSpace;
use crate::error::{Error, Result};
use crate::operator::{LinearOperator, Role};
use crate::scalar::Scalar;

/// Default number of samples per cell for sampled transformers.
pub const DEFAULT_SAMPLES: usize = 256;

/// How a transformer's columns were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Every member of every cell was pushed through the map.
    Exact,
    /// Each column is the empirical distribution of `k` samples per cell.
    Sampled { k: usize, seed: u64 },
}

impl Provenance {
    fn combine(self, other: Provenance) -> Provenance {
        match (self, other) {
            (Provenance::Exact, p) | (p, Provenance::Exact) => p,
            (p, _) => p,
        }
    }

    /// Sidecar JSON accompanying a transformer dump.
    pub fn sidecar_json(&self) -> String {
        serde_json::json!({ "provenance": self }).to_string()
    }
}

/// A transformer operator together with the partitions it maps between.
#[derive(Debug, Clone)]
pub struct AbstractTransformer<S> {
    operator: LinearOperator<S>,
    input: Arc<Partition>,
    output: Arc<Partition>,
    provenance: Provenance,
}

impl<S: Scalar> AbstractTransformer<S> {
    pub fn new(
        operator: LinearOperator<S>,
        input: Arc<Partition>,
        output: Arc<Partition>,
        provenance: Provenance,
    ) -> Result<Self> {
        if operator.cols() != input.cell_count() {
            return Err(Error::DimensionMismatch {
                context: "transformer columns vs input cells",
                expected: input.cell_count(),
                found: operator.cols(),
            });
        }
        if operator.rows() != output.cell_count() {
            return Err(Error::DimensionMismatch {
                context: "transformer rows vs output cells",
                expected: output.cell_count(),
                found: operator.rows(),
            });
        }
        let operator = operator.with_role(Role::Transformer)?;
        Ok(AbstractTransformer {
            operator,
            input,
            output,
            provenance,
        })
    }

    pub fn operator(&self) -> &LinearOperator<S> {
        &self.operator
    }

    pub fn input(&self) -> &Arc<Partition> {
        &self.input
    }

    pub fn output(&self) -> &Arc<Partition> {
        &self.output
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn apply(&self, d: &Distribution<S>) -> Result<Distribution<S>> {
        self.operator.apply(d)
    }
}

/// `A_out · F · G_in`.
pub fn abstract_transformer<S: Scalar>(
    f: &LinearOperator<S>,
    a_out: &LinearOperator<S>,
    g_in: &LinearOperator<S>,
) -> Result<LinearOperator<S>> {
    let fg = f.matmul(g_in, Role::General)?;
    a_out.matmul(&fg, Role::Transformer)
}

/// Exact transformer of a lifted map between two partitioned spaces.
pub fn exact_transformer<S: Scalar>(
    f: &LinearOperator<S>,
    input: Arc<Partition>,
    output: Arc<Partition>,
) -> Result<AbstractTransformer<S>> {
    let op = abstract_transformer(f, &build_A(&output)?, &build_G(&input)?)?;
    AbstractTransformer::new(op, input, output, Provenance::Exact)
}

/// The sign rule for ReLU on a sign partition: every `−` becomes `0`.
pub fn relu_sharp<S: Scalar>(partition: Arc<Partition>) -> Result<AbstractTransformer<S>> {
    relu_sharp_between(partition.clone(), partition)
}

/// Sign rule from the sign cells of one space to those of another with the
/// same dimension.
pub fn relu_sharp_between<S: Scalar>(
    input: Arc<Partition>,
    output: Arc<Partition>,
) -> Result<AbstractTransformer<S>> {
    if input.cell_count() != output.cell_count() || output.sign_digits(0).is_err() {
        return Err(Error::NotSignPartition);
    }
    let targets = (0..input.cell_count())
        .map(|c| {
            Ok(input
                .sign_digits(c)?
                .iter()
                .fold(0usize, |acc, d| acc * 3 + (*d).max(1)))
        })
        .collect::<Result<Vec<usize>>>()?;
    let op = LinearOperator::from_function(output.cell_count(), &targets, Role::Pushforward)?;
    AbstractTransformer::new(op, input, output, Provenance::Exact)
}

/// `t2 ∘ t1`: apply `t1` first.
pub fn compose<S: Scalar>(
    t1: &AbstractTransformer<S>,
    t2: &AbstractTransformer<S>,
) -> Result<AbstractTransformer<S>> {
    if !Arc::ptr_eq(&t1.output, &t2.input) && t1.output != t2.input {
        return Err(Error::PartitionMismatch(
            "output partition of the first transformer is not the input of the second".into(),
        ));
    }
    let op = t2.operator.matmul(&t1.operator, Role::Transformer)?;
    AbstractTransformer::new(
        op,
        t1.input.clone(),
        t2.output.clone(),
        t1.provenance.combine(t2.provenance),
    )
}

/// Monte Carlo transformer: column `a` is the empirical distribution of the
/// output cell of `f(x)` over `k` uniform draws `x` from input cell `a`.
/// Empty input cells give zero columns.
#[allow(clippy::too_many_arguments)]
pub fn sampled_transformer<S, F>(
    f: F,
    in_space: &StateSpace,
    input: Arc<Partition>,
    out_space: &StateSpace,
    output: Arc<Partition>,
    k: usize,
    seed: u64,
) -> Result<AbstractTransformer<S>>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<Vec<S>> + Sync,
{
    if k == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    if in_space.len() != input.domain_size() || out_space.len() != output.domain_size() {
        return Err(Error::PartitionMismatch(
            "partition does not cover its space".into(),
        ));
    }
    let weight = S::one() / S::from_count(k);
    let columns = (0..input.cell_count())
        .into_par_iter()
        .map(|cell| {
            let members = input.members(cell);
            if members.is_empty() {
                return Ok(Vec::new());
            }
            let mut rng = cell_rng(seed, cell);
            let mut hits = Vec::with_capacity(k);
            for _ in 0..k {
                let x = in_space
                    .point::<S>(members[rand::Rng::random_range(&mut rng, 0..members.len())]);
                hits.push(output.cell_of(out_space.locate(&f(&x)?)?));
            }
            Ok(hits
                .into_iter()
                .map(|row| (row, cell, weight.clone()))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let op = LinearOperator::new(
        output.cell_count(),
        input.cell_count(),
        Role::Transformer,
        columns.into_iter().flatten(),
    )?;
    AbstractTransformer::new(op, input, output, Provenance::Sampled { k, seed })
}
