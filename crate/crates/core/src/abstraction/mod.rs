//! Partitions of state spaces and their abstraction/concretization pairs.
//!
//! `A` sends each state to its cell; `G = Aᵀ·diag(1/|cell|)` spreads each
//! cell's mass uniformly over its members and is the Moore–Penrose
//! pseudo-inverse of `A`. Declared cells with no members keep their row in `A`
//! and get a zero column in `G`.

mod partition;
mod zonotope;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use partition::{
    grid_partition, identity_partition, sign_partition, zonotope_partition, Partition,
    PartitionKind,
};
pub use zonotope::{zonotope_points, Zonotope};

use crate::error::{Error, Result};
use crate::operator::{LinearOperator, Role};
use crate::scalar::Scalar;

#[allow(non_snake_case)]
pub fn build_A<S: Scalar>(p: &Partition) -> Result<LinearOperator<S>> {
    LinearOperator::from_function(p.cell_count(), p.assignment(), Role::Abstraction)
}

#[allow(non_snake_case)]
pub fn build_G<S: Scalar>(p: &Partition) -> Result<LinearOperator<S>> {
    let weights: Vec<S> = (0..p.cell_count())
        .map(|c| match p.count(c) {
            0 => S::zero(),
            n => S::one() / S::from_count(n),
        })
        .collect();
    LinearOperator::new(
        p.domain_size(),
        p.cell_count(),
        Role::Concretization,
        p.assignment()
            .iter()
            .enumerate()
            .map(|(i, &c)| (i, c, weights[c].clone())),
    )
}

/// Deterministic generator for one `(seed, cell)` pair; independent of thread
/// scheduling.
pub fn cell_rng(seed: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    rng
}

/// `k` members of `cell`, drawn uniformly with replacement.
pub fn sample_cell(p: &Partition, cell: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    if cell >= p.cell_count() {
        return Err(Error::PartitionMismatch(format!(
            "cell {cell} of {}",
            p.cell_count()
        )));
    }
    let members = p.members(cell);
    if members.is_empty() {
        return Err(Error::EmptyCell(cell));
    }
    let mut rng = cell_rng(seed, cell);
    Ok((0..k)
        .map(|_| members[rng.random_range(0..members.len())])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;
    use crate::domain::{PointSet, StateSpace};
    use crate::lifting::{discretize, AxisSpec, GridSpec};
    use crate::penrose::check_penrose;
    use crate::scalar::Rational;

    fn r(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    fn four_points() -> StateSpace {
        PointSet::new(
            2,
            vec![
                vec![r(0), r(1)],
                vec![r(1), r(1)],
                vec![r(1), r(3)],
                vec![r(2), r(2)],
            ],
        )
        .unwrap()
        .into()
    }

    fn z1() -> Zonotope {
        Zonotope::from_json(br#"{"center":[1,2],"generators":[[0.5,0.5],[0.5,0],[0,0.5]]}"#)
            .unwrap()
    }

    #[test]
    fn four_point_abstraction_and_concretization() {
        let p = zonotope_partition(&four_points(), &z1(), r(1)).unwrap();
        let a = build_A::<Rational>(&p).unwrap();
        let expected_a = [
            [1, 0, 0, 0],
            [0, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, 0, 0],
            [0, 0, 1, 0],
            [0, 0, 0, 1],
            [0, 0, 0, 0],
        ];
        let expected_a: Vec<Vec<Rational>> = expected_a
            .iter()
            .map(|row| row.iter().map(|v| r(*v)).collect())
            .collect();
        assert_eq!(a.to_dense(), expected_a);
        let d = Distribution::<Rational>::uniform(4).unwrap();
        let ad = a.apply(&d).unwrap();
        let q = Rational::new(1, 4);
        assert_eq!(ad.to_dense(), vec![q, r(0), q, r(0), q, q, r(0)]);
        let g = build_G::<Rational>(&p).unwrap();
        assert_eq!(g.apply(&ad).unwrap().to_dense(), vec![q; 4]);
        let report = check_penrose(&a, &g).unwrap();
        assert!(report.all_conditions());
        assert!(report.ag_identity_on_support);
        assert!(!report.ag_identity);
        assert_eq!(report.empty_cells, 3);
    }

    #[test]
    fn concretization_divides_by_cell_size() {
        let space: StateSpace = discretize(&GridSpec::cube(AxisSpec::integers(-3, 3), 2))
            .unwrap()
            .into();
        let p = sign_partition(&space);
        let g = build_G::<Rational>(&p).unwrap();
        for i in p.members(0) {
            assert_eq!(g.get(*i, 0), Rational::new(1, 9));
        }
        let a = build_A::<Rational>(&p).unwrap();
        let report = check_penrose(&a, &g).unwrap();
        assert!(report.all_conditions() && report.ag_identity);
    }

    #[test]
    fn singleton_cells_give_the_transpose() {
        let p = Partition::identity(5).unwrap();
        let a = build_A::<f64>(&p).unwrap();
        let g = build_G::<f64>(&p).unwrap();
        assert_eq!(g, a.transpose(Role::Concretization).unwrap());
        assert_eq!(a, LinearOperator::identity(5, Role::Abstraction).unwrap());
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = Partition::from_assignment(vec![0; 10_000].into_iter().chain([1]).collect(), 2)
            .unwrap();
        assert_eq!(sample_cell(&p, 1, 5, 9).unwrap(), vec![10_000; 5]);
        let a = sample_cell(&p, 0, 100, 42).unwrap();
        assert_eq!(a, sample_cell(&p, 0, 100, 42).unwrap());
        assert_ne!(a, sample_cell(&p, 0, 100, 43).unwrap());
        assert!(a.iter().all(|i| *i < 10_000));
        let empty = Partition::from_assignment(vec![0], 2).unwrap();
        assert!(matches!(
            sample_cell(&empty, 1, 3, 0),
            Err(Error::EmptyCell(1))
        ));
        assert!(sample_cell(&empty, 0, 0, 0).is_err());
    }

    #[test]
    fn sample_frequencies_are_uniform() {
        // 20 members, 100,000 draws: each count is Binomial(n, 1/20).
        let p = Partition::from_assignment(vec![0; 20], 1).unwrap();
        let n = 100_000usize;
        let draws = sample_cell(&p, 0, n, 7).unwrap();
        let mut counts = [0usize; 20];
        for i in draws {
            counts[i] += 1;
        }
        let mean = n as f64 / 20.0;
        let sigma = (n as f64 * (1.0 / 20.0) * (19.0 / 20.0)).sqrt();
        assert!(
            counts
                .iter()
                .all(|c| (*c as f64 - mean).abs() < 4.0 * sigma),
            "{counts:?}"
        );
        let chi2: f64 = counts
            .iter()
            .map(|c| (*c as f64 - mean).powi(2) / mean)
            .sum();
        // 19 degrees of freedom; the 99.9% quantile is 43.8
        assert!(chi2 < 43.8, "{chi2}");
    }
}
