//! Assignments of concrete states to abstract cells.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::abstraction::zonotope::Zonotope;
use crate::domain::{PointSet, StateSpace};
use crate::error::{Error, Result};
use crate::scalar::{format_decimal, Rational};

/// How the cells of a partition were declared; determines labels and ordering.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionKind {
    /// Per-axis sign classes `(−, 0, +)`, `3^dims` cells.
    Sign {
        dims: usize,
    },
    /// Axis-aligned boxes; cell coordinates `low[a] .. low[a] + shape[a]`.
    Grid {
        cell_size: Vec<Rational>,
        anchor: Vec<Rational>,
        low: Vec<i128>,
        shape: Vec<usize>,
    },
    /// One cell per lattice point of a zonotope.
    Zonotope {
        step: Rational,
        lattice: PointSet,
    },
    /// One cell per state.
    Identity,
    /// One cell per bit pattern of the given width, most significant bit first.
    Bits {
        width: u32,
    },
    Explicit {
        labels: Vec<String>,
    },
}

/// Total map from concrete index to cell id. Cells may be empty when they are
/// part of the declared structure (all nine sign pairs, say) but receive no
/// state from this particular domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    kind: PartitionKind,
    cell_count: usize,
    cell_of: Vec<usize>,
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl Partition {
    fn build(kind: PartitionKind, cell_count: usize, cell_of: Vec<usize>) -> Result<Self> {
        if cell_count == 0 {
            return Err(Error::PartitionMismatch(
                "partition declares no cells".into(),
            ));
        }
        if let Some((i, c)) = cell_of.iter().enumerate().find(|(_, c)| **c >= cell_count) {
            return Err(Error::PartitionMismatch(format!(
                "state {i} assigned to cell {c} of {cell_count}"
            )));
        }
        let mut offsets = vec![0usize; cell_count + 1];
        for &c in &cell_of {
            offsets[c + 1] += 1;
        }
        for c in 0..cell_count {
            offsets[c + 1] += offsets[c];
        }
        let mut cursor = offsets.clone();
        let mut members = vec![0usize; cell_of.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            members[cursor[c]] = i;
            cursor[c] += 1;
        }
        Ok(Partition {
            kind,
            cell_count,
            cell_of,
            offsets,
            members,
        })
    }

    /// Partition from an explicit assignment; `labels` declares the cells.
    pub fn explicit(cell_of: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let count = labels.len();
        Self::build(PartitionKind::Explicit { labels }, count, cell_of)
    }

    /// Partition with `cell_count` cells labelled by their index.
    pub fn from_assignment(cell_of: Vec<usize>, cell_count: usize) -> Result<Self> {
        Self::explicit(cell_of, (0..cell_count).map(|c| c.to_string()).collect())
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::build(PartitionKind::Identity, size, (0..size).collect())
    }

    /// Identity partition over `2^width` states labelled as bit strings.
    pub fn bits(width: u32) -> Result<Self> {
        let size = 1usize
            .checked_shl(width)
            .ok_or_else(|| Error::Config(format!("2^{width} cells do not fit in memory")))?;
        Self::build(PartitionKind::Bits { width }, size, (0..size).collect())
    }

    pub fn kind(&self) -> &PartitionKind {
        &self.kind
    }

    pub fn domain_size(&self) -> usize {
        self.cell_of.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn cell_of(&self, index: usize) -> usize {
        self.cell_of[index]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.cell_of
    }

    /// Members of `cell` in ascending order.
    pub fn members(&self, cell: usize) -> &[usize] {
        &self.members[self.offsets[cell]..self.offsets[cell + 1]]
    }

    pub fn count(&self, cell: usize) -> usize {
        self.offsets[cell + 1] - self.offsets[cell]
    }

    pub fn empty_cells(&self) -> Vec<usize> {
        (0..self.cell_count)
            .filter(|&c| self.count(c) == 0)
            .collect()
    }

    pub fn nonempty_cells(&self) -> usize {
        self.cell_count - self.empty_cells().len()
    }

    /// Human-readable cell name, e.g. `(-,0)`, `(2,-1)` or `0101`.
    pub fn label(&self, cell: usize) -> String {
        match &self.kind {
            PartitionKind::Sign { dims } => {
                let mut digits = vec![0usize; *dims];
                let mut rest = cell;
                for d in digits.iter_mut().rev() {
                    *d = rest % 3;
                    rest /= 3;
                }
                let signs: Vec<&str> = digits.iter().map(|d| ["-", "0", "+"][*d]).collect();
                format!("({})", signs.join(","))
            }
            PartitionKind::Grid { low, shape, .. } => {
                let mut coords = vec![0i128; shape.len()];
                let mut rest = cell;
                for a in (0..shape.len()).rev() {
                    coords[a] = low[a] + (rest % shape[a]) as i128;
                    rest /= shape[a];
                }
                let parts: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
                format!("({})", parts.join(","))
            }
            PartitionKind::Zonotope { lattice, .. } => {
                let parts: Vec<String> =
                    lattice.points()[cell].iter().map(format_decimal).collect();
                format!("({})", parts.join(","))
            }
            PartitionKind::Identity => cell.to_string(),
            PartitionKind::Bits { width } => {
                let mut s = String::with_capacity(*width as usize);
                for b in (0..*width).rev() {
                    s.push(if (cell >> b) & 1 == 1 { '1' } else { '0' });
                }
                s
            }
            PartitionKind::Explicit { labels } => labels[cell].clone(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.cell_count).map(|c| self.label(c)).collect()
    }

    /// Sign tuple of a sign cell as digits `0 = −`, `1 = 0`, `2 = +`.
    pub fn sign_digits(&self, cell: usize) -> Result<Vec<usize>> {
        let PartitionKind::Sign { dims } = self.kind else {
            return Err(Error::NotSignPartition);
        };
        let mut digits = vec![0usize; dims];
        let mut rest = cell;
        for d in digits.iter_mut().rev() {
            *d = rest % 3;
            rest /= 3;
        }
        Ok(digits)
    }

    /// CSV dump `concrete_index,cell_id`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("concrete_index,cell_id\n");
        for (i, c) in self.cell_of.iter().enumerate() {
            let _ = writeln!(out, "{i},{c}");
        }
        out
    }
}

fn sign_digit(x: &Rational) -> usize {
    match x.cmp(&Rational::from_integer(0)) {
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => 1,
        std::cmp::Ordering::Greater => 2,
    }
}

/// Per-axis sign classes by exact comparison with zero.
pub fn sign_partition(space: &StateSpace) -> Partition {
    let dims = space.dim();
    let cell_of = (0..space.len())
        .into_par_iter()
        .map(|i| {
            space
                .exact_point(i)
                .iter()
                .fold(0usize, |acc, x| acc * 3 + sign_digit(x))
        })
        .collect();
    Partition::build(
        PartitionKind::Sign { dims },
        3usize.pow(dims as u32),
        cell_of,
    )
    .expect("sign digits are in range")
}

pub fn identity_partition(space: &StateSpace) -> Partition {
    Partition::identity(space.len()).expect("state spaces are nonempty")
}

/// Boxes of width `cell_size[a]` centred on `anchor[a] + k·cell_size[a]`; a
/// state on a shared face goes to the upper box. The declared cells span the
/// occupied cell coordinates.
pub fn grid_partition(
    space: &StateSpace,
    cell_size: &[Rational],
    anchor: &[Rational],
) -> Result<Partition> {
    let dims = space.dim();
    for (what, v) in [("cell_size", cell_size.len()), ("anchor", anchor.len())] {
        if v != dims {
            return Err(Error::Config(format!(
                "{what} has {v} entries for a {dims}-dimensional space"
            )));
        }
    }
    if let Some(w) = cell_size.iter().find(|w| **w <= Rational::from_integer(0)) {
        return Err(Error::Config(format!("cell size {w} must be positive")));
    }
    let half = Rational::new(1, 2);
    let coords: Vec<Vec<i128>> = (0..space.len())
        .into_par_iter()
        .map(|i| {
            space
                .exact_point(i)
                .iter()
                .enumerate()
                .map(|(a, x)| ((x - anchor[a]) / cell_size[a] + half).floor().to_integer())
                .collect()
        })
        .collect();
    let mut low = vec![i128::MAX; dims];
    let mut high = vec![i128::MIN; dims];
    for c in &coords {
        for a in 0..dims {
            low[a] = low[a].min(c[a]);
            high[a] = high[a].max(c[a]);
        }
    }
    let shape: Vec<usize> = (0..dims).map(|a| (high[a] - low[a] + 1) as usize).collect();
    let cell_count = shape
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(*s))
        .ok_or_else(|| Error::Config("grid partition has too many cells".into()))?;
    let cell_of = coords
        .iter()
        .map(|c| (0..dims).fold(0usize, |acc, a| acc * shape[a] + (c[a] - low[a]) as usize))
        .collect();
    Partition::build(
        PartitionKind::Grid {
            cell_size: cell_size.to_vec(),
            anchor: anchor.to_vec(),
            low,
            shape,
        },
        cell_count,
        cell_of,
    )
}

/// One cell per point of `z ∩ step·ℤ²`; each state joins the cell of its
/// nearest lattice point (ties toward the smaller coordinate), which must lie
/// in the zonotope.
pub fn zonotope_partition(space: &StateSpace, z: &Zonotope, step: Rational) -> Result<Partition> {
    let points = z.lattice_points(step)?;
    if points.is_empty() {
        return Err(Error::NotCovered(
            "zonotope contains no lattice point".into(),
        ));
    }
    let lattice = PointSet::new(z.dim(), points)?;
    let half = Rational::new(1, 2);
    let cell_of = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let x = space.exact_point(i);
            let snapped: Vec<Rational> =
                x.iter().map(|v| step * (v / step - half).ceil()).collect();
            lattice.position(&snapped).ok_or_else(|| {
                let parts: Vec<String> = x.iter().map(format_decimal).collect();
                Error::NotCovered(format!(
                    "state ({}) lies outside the zonotope",
                    parts.join(",")
                ))
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let count = lattice.len();
    Partition::build(PartitionKind::Zonotope { step, lattice }, count, cell_of)
}
