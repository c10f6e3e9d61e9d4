//! Sparse linear operators acting on probability vectors.

use std::fmt;

use rayon::prelude::*;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::scalar::{Scalar, FLOAT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Lifted concrete map; deterministic, one `1` per column.
    Pushforward,
    /// Classification of concrete states into cells; one `1` per column.
    Abstraction,
    /// Redistribution of cell mass over cell members.
    Concretization,
    /// Abstract-level operator.
    Transformer,
    /// Intermediate product with no structural guarantee.
    General,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Pushforward => "pushforward",
            Role::Abstraction => "abstraction",
            Role::Concretization => "concretization",
            Role::Transformer => "transformer",
            Role::General => "general",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coordinate-list matrix, triples sorted by `(row, col)` with duplicates
/// summed and zeros dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator<S> {
    rows: usize,
    cols: usize,
    role: Role,
    entries: Vec<(usize, usize, S)>,
}

/// Column-compressed view used by products: `(row, entry index)` pairs.
struct Columns {
    offsets: Vec<usize>,
    items: Vec<(usize, usize)>,
}

impl Columns {
    fn col(&self, c: usize) -> &[(usize, usize)] {
        &self.items[self.offsets[c]..self.offsets[c + 1]]
    }
}

impl<S: Scalar> LinearOperator<S> {
    /// Builds and validates an operator against the invariants of its role.
    pub fn new(
        rows: usize,
        cols: usize,
        role: Role,
        triples: impl IntoIterator<Item = (usize, usize, S)>,
    ) -> Result<Self> {
        let op = Self::assemble(rows, cols, role, triples)?;
        op.validate()?;
        Ok(op)
    }

    fn assemble(
        rows: usize,
        cols: usize,
        role: Role,
        triples: impl IntoIterator<Item = (usize, usize, S)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, S)> = triples.into_iter().collect();
        if let Some((r, c, _)) = entries.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(Error::InvalidOperator {
                role: role.name(),
                reason: format!("entry ({r}, {c}) outside {rows}x{cols}"),
            });
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, S)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 = last.2.clone() + v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|(_, _, v)| !v.is_zero());
        Ok(LinearOperator {
            rows,
            cols,
            role,
            entries: merged,
        })
    }

    pub fn identity(n: usize, role: Role) -> Result<Self> {
        Self::new(n, n, role, (0..n).map(|i| (i, i, S::one())))
    }

    /// Deterministic map: column `i` has a single `1` at row `targets[i]`.
    pub fn from_function(rows: usize, targets: &[usize], role: Role) -> Result<Self> {
        Self::new(
            rows,
            targets.len(),
            role,
            targets.iter().enumerate().map(|(c, &r)| (r, c, S::one())),
        )
    }

    /// Dense row-major matrix, mostly for tests and small literals.
    pub fn from_dense(rows: &[Vec<S>], role: Role) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                context: "dense operator row",
                expected: cols,
                found: r.len(),
            });
        }
        Self::new(
            rows.len(),
            cols,
            role,
            rows.iter()
                .enumerate()
                .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, v)| (i, j, v.clone()))),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn entries(&self) -> &[(usize, usize, S)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> S {
        self.entries
            .binary_search_by(|(r, c, _)| (*r, *c).cmp(&(row, col)))
            .map(|k| self.entries[k].2.clone())
            .unwrap_or_else(|_| S::zero())
    }

    pub fn to_dense(&self) -> Vec<Vec<S>> {
        let mut out = vec![vec![S::zero(); self.cols]; self.rows];
        for (r, c, v) in &self.entries {
            out[*r][*c] = v.clone();
        }
        out
    }

    pub fn with_role(mut self, role: Role) -> Result<Self> {
        self.role = role;
        self.validate()?;
        Ok(self)
    }

    pub fn column_sums(&self) -> Vec<S> {
        let mut sums = vec![S::zero(); self.cols];
        for (_, c, v) in &self.entries {
            sums[*c] = sums[*c].clone() + v.clone();
        }
        sums
    }

    pub fn nonzero_columns(&self) -> Vec<bool> {
        let mut seen = vec![false; self.cols];
        for (_, c, _) in &self.entries {
            seen[*c] = true;
        }
        seen
    }

    fn invalid(&self, reason: String) -> Error {
        Error::InvalidOperator {
            role: self.role.name(),
            reason,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.role {
            Role::General => Ok(()),
            Role::Pushforward | Role::Abstraction => {
                if let Some((r, c, v)) = self.entries.iter().find(|(_, _, v)| !v.is_one()) {
                    return Err(self.invalid(format!("entry ({r}, {c}) = {v} is not 0 or 1")));
                }
                let mut count = vec![0usize; self.cols];
                for (_, c, _) in &self.entries {
                    count[*c] += 1;
                }
                match count.iter().position(|&n| n != 1) {
                    Some(c) => Err(self.invalid(format!(
                        "column {c} has {} nonzero entries, expected exactly one",
                        count[c]
                    ))),
                    None => Ok(()),
                }
            }
            Role::Concretization | Role::Transformer => {
                if let Some((r, c, v)) = self.entries.iter().find(|(_, _, v)| *v < S::zero()) {
                    return Err(self.invalid(format!("negative entry {v} at ({r}, {c})")));
                }
                let nonzero = self.nonzero_columns();
                for (c, s) in self.column_sums().iter().enumerate() {
                    // structurally empty cells leave zero columns
                    if nonzero[c] && !s.is_one_within(FLOAT_TOLERANCE) {
                        return Err(self.invalid(format!("column {c} sums to {s}, not 1")));
                    }
                }
                Ok(())
            }
        }
    }

    fn columns(&self) -> Columns {
        let mut offsets = vec![0usize; self.cols + 1];
        for (_, c, _) in &self.entries {
            offsets[c + 1] += 1;
        }
        for c in 0..self.cols {
            offsets[c + 1] += offsets[c];
        }
        let mut fill = offsets.clone();
        let mut items = vec![(0usize, 0usize); self.entries.len()];
        // rows stay ascending within each column since entries are row-sorted
        for (k, (r, c, _)) in self.entries.iter().enumerate() {
            items[fill[*c]] = (*r, k);
            fill[*c] += 1;
        }
        Columns { offsets, items }
    }

    /// Matrix–vector product.
    pub fn apply(&self, d: &Distribution<S>) -> Result<Distribution<S>> {
        if d.domain_size() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "apply_operator",
                expected: self.cols,
                found: d.domain_size(),
            });
        }
        let cols = self.columns();
        let mut out: Vec<(usize, S)> = Vec::new();
        for (c, p) in d.iter() {
            for &(r, k) in cols.col(c) {
                out.push((r, self.entries[k].2.clone() * p.clone()));
            }
        }
        Distribution::unnormalized(self.rows.max(1), out)
    }

    /// `self · rhs`, with result role `role`. Accumulation order is fixed, so
    /// results do not depend on thread scheduling.
    pub fn matmul(&self, rhs: &LinearOperator<S>, role: Role) -> Result<LinearOperator<S>> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: "operator product",
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let left = self.columns();
        let right = rhs.columns();
        let per_column: Vec<Vec<(usize, usize, S)>> = (0..rhs.cols)
            .into_par_iter()
            .map(|j| {
                let mut acc: Vec<(usize, S)> = Vec::new();
                for &(k, ry) in right.col(j) {
                    let y = &rhs.entries[ry].2;
                    for &(i, lx) in left.col(k) {
                        acc.push((i, self.entries[lx].2.clone() * y.clone()));
                    }
                }
                acc.sort_by_key(|(i, _)| *i);
                let mut merged: Vec<(usize, usize, S)> = Vec::with_capacity(acc.len());
                for (i, v) in acc {
                    match merged.last_mut() {
                        Some(last) if last.0 == i => last.2 = last.2.clone() + v,
                        _ => merged.push((i, j, v)),
                    }
                }
                merged
            })
            .collect();
        let product = Self::assemble(self.rows, rhs.cols, role, per_column.into_iter().flatten())?;
        product.validate()?;
        Ok(product)
    }

    pub fn transpose(&self, role: Role) -> Result<LinearOperator<S>> {
        Self::new(
            self.cols,
            self.rows,
            role,
            self.entries.iter().map(|(r, c, v)| (*c, *r, v.clone())),
        )
    }

    /// Entrywise comparison, `1e-9` per entry for floats and exact otherwise.
    pub fn approx_eq(&self, other: &LinearOperator<S>) -> bool {
        if self.rows != other.rows || self.cols != other.cols {
            return false;
        }
        let (a, b) = (&self.entries, &other.entries);
        let zero = S::zero();
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let ka = a.get(i).map(|e| (e.0, e.1));
            let kb = b.get(j).map(|e| (e.0, e.1));
            let (lhs, rhs) = match (ka, kb) {
                (Some(x), Some(y)) if x == y => {
                    i += 1;
                    j += 1;
                    (&a[i - 1].2, &b[j - 1].2)
                }
                (Some(x), Some(y)) if x < y => {
                    i += 1;
                    (&a[i - 1].2, &zero)
                }
                (Some(_), None) => {
                    i += 1;
                    (&a[i - 1].2, &zero)
                }
                _ => {
                    j += 1;
                    (&zero, &b[j - 1].2)
                }
            };
            if !lhs.close_to(rhs, FLOAT_TOLERANCE) {
                return false;
            }
        }
        true
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && self
                .transpose(Role::General)
                .is_ok_and(|t| t.approx_eq(&self.clone_general()))
    }

    fn clone_general(&self) -> LinearOperator<S> {
        LinearOperator {
            rows: self.rows,
            cols: self.cols,
            role: Role::General,
            entries: self.entries.clone(),
        }
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Result<LinearOperator<T>> {
        LinearOperator::new(
            self.rows,
            self.cols,
            self.role,
            self.entries.iter().map(|(r, c, v)| (*r, *c, f(v))),
        )
    }
}

/// Standard matrix–vector product.
pub fn apply_operator<S: Scalar>(
    op: &LinearOperator<S>,
    d: &Distribution<S>,
) -> Result<Distribution<S>> {
    op.apply(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn identity_applies_as_identity() {
        let d = Distribution::from_dense(&[q(1, 3), q(1, 6), q(1, 2)]).unwrap();
        let id = LinearOperator::identity(3, Role::Transformer).unwrap();
        assert_eq!(id.apply(&d).unwrap(), d);
    }

    #[test]
    fn triples_are_sorted_and_deduplicated() {
        let op = LinearOperator::new(
            2,
            2,
            Role::General,
            [(1, 0, 1.0), (0, 1, 2.0), (1, 0, 0.5), (0, 0, 0.0)],
        )
        .unwrap();
        assert_eq!(op.entries(), &[(0, 1, 2.0), (1, 0, 1.5)]);
    }

    #[test]
    fn role_invariants_are_enforced() {
        assert!(LinearOperator::new(
            2,
            2,
            Role::Abstraction,
            [(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)]
        )
        .is_err());
        assert!(LinearOperator::new(2, 1, Role::Pushforward, [(0, 0, 0.5), (1, 0, 0.5)]).is_err());
        assert!(
            LinearOperator::new(2, 1, Role::Concretization, [(0, 0, 0.5), (1, 0, 0.5)]).is_ok()
        );
        assert!(LinearOperator::new(2, 2, Role::Transformer, [(0, 0, 0.5), (1, 0, 0.4)]).is_err());
        assert!(LinearOperator::new(2, 1, Role::General, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let op = LinearOperator::<f64>::identity(3, Role::General).unwrap();
        let d = Distribution::uniform(2).unwrap();
        assert!(matches!(op.apply(&d), Err(Error::DimensionMismatch { .. })));
        let other = LinearOperator::<f64>::identity(2, Role::General).unwrap();
        assert!(op.matmul(&other, Role::General).is_err());
    }

    #[test]
    fn matmul_matches_dense_product() {
        let a = LinearOperator::from_dense(
            &[
                vec![q(1, 1), q(2, 1), q(0, 1)],
                vec![q(0, 1), q(1, 3), q(-1, 1)],
            ],
            Role::General,
        )
        .unwrap();
        let b = LinearOperator::from_dense(
            &[
                vec![q(1, 1), q(0, 1)],
                vec![q(1, 2), q(1, 1)],
                vec![q(0, 1), q(4, 1)],
            ],
            Role::General,
        )
        .unwrap();
        let c = a.matmul(&b, Role::General).unwrap();
        assert_eq!(
            c.to_dense(),
            vec![vec![q(2, 1), q(2, 1)], vec![q(1, 6), q(-11, 3)]]
        );
    }

    #[test]
    fn symmetry_check() {
        let s =
            LinearOperator::from_dense(&[vec![1.0, 2.0], vec![2.0, 3.0]], Role::General).unwrap();
        let n =
            LinearOperator::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]], Role::General).unwrap();
        assert!(s.is_symmetric());
        assert!(!n.is_symmetric());
    }
}
