use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{Scalar, FLOAT_TOLERANCE};

/// Sparse probability vector over the joint states of a finite space.
///
/// Zero entries are never stored. Construction checks non-negativity and
/// normalization (exactly for rational scalars, within `1e-9` for floats).
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<S> {
    domain_size: usize,
    entries: BTreeMap<usize, S>,
}

impl<S: Scalar> Distribution<S> {
    pub fn new(domain_size: usize, entries: impl IntoIterator<Item = (usize, S)>) -> Result<Self> {
        let d = Self::unnormalized(domain_size, entries)?;
        let total = d.total();
        if !total.is_one_within(FLOAT_TOLERANCE) {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(d)
    }

    /// Builds a non-negative vector without the normalization check; used for
    /// intermediate products and sub-stochastic masses.
    pub fn unnormalized(
        domain_size: usize,
        entries: impl IntoIterator<Item = (usize, S)>,
    ) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        let mut map: BTreeMap<usize, S> = BTreeMap::new();
        for (i, p) in entries {
            if i >= domain_size {
                return Err(Error::InvalidDistribution(format!(
                    "index {i} outside domain of size {domain_size}"
                )));
            }
            if p < S::zero() {
                return Err(Error::InvalidDistribution(format!(
                    "negative probability {p} at index {i}"
                )));
            }
            if p.is_zero() {
                continue;
            }
            let slot = map.entry(i).or_insert_with(S::zero);
            *slot = slot.clone() + p;
        }
        Ok(Distribution {
            domain_size,
            entries: map,
        })
    }

    pub fn point_mass(domain_size: usize, index: usize) -> Result<Self> {
        Self::new(domain_size, [(index, S::one())])
    }

    pub fn uniform(domain_size: usize) -> Result<Self> {
        let p = S::one() / S::from_count(domain_size.max(1));
        Self::new(domain_size, (0..domain_size).map(|i| (i, p.clone())))
    }

    /// Normalized dense vector.
    pub fn from_dense(values: &[S]) -> Result<Self> {
        Self::new(values.len(), values.iter().cloned().enumerate())
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn get(&self, i: usize) -> S {
        self.entries.get(&i).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &S)> {
        self.entries.iter().map(|(i, p)| (*i, p))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> S {
        self.entries.values().cloned().sum()
    }

    pub fn to_dense(&self) -> Vec<S> {
        let mut out = vec![S::zero(); self.domain_size];
        for (i, p) in &self.entries {
            out[*i] = p.clone();
        }
        out
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Distribution<T> {
        Distribution {
            domain_size: self.domain_size,
            entries: self
                .entries
                .iter()
                .map(|(i, p)| (*i, f(p)))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    pub fn to_f64(&self) -> Distribution<f64> {
        self.map_scalar(Scalar::to_f64)
    }

    /// Marginal over a subset of axes of a product domain with the given shape.
    pub fn marginal(&self, shape: &[usize], keep: &[usize]) -> Result<Distribution<S>> {
        let size: usize = shape.iter().product();
        if size != self.domain_size {
            return Err(Error::DimensionMismatch {
                context: "marginal shape",
                expected: self.domain_size,
                found: size,
            });
        }
        if let Some(&k) = keep.iter().find(|&&k| k >= shape.len()) {
            return Err(Error::DimensionMismatch {
                context: "marginal axis",
                expected: shape.len(),
                found: k,
            });
        }
        let out_size: usize = keep.iter().map(|&k| shape[k]).product();
        let mut entries = Vec::with_capacity(self.entries.len());
        let mut multi = vec![0usize; shape.len()];
        for (&joint, p) in &self.entries {
            let mut rest = joint;
            for k in (0..shape.len()).rev() {
                multi[k] = rest % shape[k];
                rest /= shape[k];
            }
            let idx = keep
                .iter()
                .fold(0usize, |acc, &k| acc * shape[k] + multi[k]);
            entries.push((idx, p.clone()));
        }
        Distribution::unnormalized(out_size, entries)
    }
}

/// Product distribution; entry `(i, j)` lands at `i * |d2| + j`.
pub fn tensor_product<S: Scalar>(d1: &Distribution<S>, d2: &Distribution<S>) -> Distribution<S> {
    let n2 = d2.domain_size;
    let entries = d1
        .entries
        .iter()
        .flat_map(|(i, p)| {
            d2.entries
                .iter()
                .map(move |(j, q)| (i * n2 + j, p.clone() * q.clone()))
        })
        .collect();
    Distribution {
        domain_size: d1.domain_size * n2,
        entries,
    }
}

/// Tensor product of a sequence of per-axis distributions.
pub fn tensor_product_all<S: Scalar>(parts: &[Distribution<S>]) -> Result<Distribution<S>> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::InvalidDistribution("no factors".into()))?;
    Ok(rest
        .iter()
        .fold(first.clone(), |acc, d| tensor_product(&acc, d)))
}

/// Total variation distance, half the L1 distance.
pub fn tv_distance<S: Scalar>(d1: &Distribution<S>, d2: &Distribution<S>) -> Result<S> {
    if d1.domain_size != d2.domain_size {
        return Err(Error::DimensionMismatch {
            context: "tv_distance",
            expected: d1.domain_size,
            found: d2.domain_size,
        });
    }
    let mut l1 = S::zero();
    for (i, p) in &d1.entries {
        l1 = l1 + (p.clone() - d2.get(*i)).abs();
    }
    for (j, q) in &d2.entries {
        if !d1.entries.contains_key(j) {
            l1 = l1 + q.clone();
        }
    }
    Ok(l1 / S::from_count(2))
}
