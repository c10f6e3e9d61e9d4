//! Finite state spaces standing in for continuous input boxes.
//!
//! Joint indices are row-major with the last axis varying fastest. Every
//! flattening in the crate goes through [`DiscretizedDomain::joint_index`] or
//! [`DiscretizedDomain::multi_index`].

use crate::error::{Error, Result};
use crate::scalar::{rational_to_f64, Rational, Scalar, FLOAT_TOLERANCE};

/// Strictly increasing coordinate values along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    values: Vec<Rational>,
    approx: Vec<f64>,
}

impl Axis {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("axis has no values".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "axis values must be strictly increasing".into(),
            ));
        }
        let approx = values.iter().map(rational_to_f64).collect();
        Ok(Axis { values, approx })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &Rational {
        &self.values[i]
    }

    pub fn approx(&self, i: usize) -> f64 {
        self.approx[i]
    }

    fn coordinate<S: Scalar>(&self, i: usize) -> S {
        S::from_coordinate(&self.values[i], self.approx[i])
    }

    /// Nearest value to `x`, ties toward the smaller coordinate. `None` when `x`
    /// lies more than half a spacing beyond either end of the axis.
    pub fn snap<S: Scalar>(&self, x: &S) -> Option<usize> {
        let n = self.len();
        // first index whose value is >= x
        let mut lo = 0usize;
        let mut hi = n;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.coordinate::<S>(mid) < *x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let within = |dist: S, radius: S| {
            if S::EXACT {
                dist <= radius
            } else {
                dist.to_f64() <= radius.to_f64() + FLOAT_TOLERANCE
            }
        };
        let half = |a: usize, b: usize| {
            (self.coordinate::<S>(b) - self.coordinate::<S>(a)) / S::from_count(2)
        };
        if lo == 0 {
            let radius = if n > 1 { half(0, 1) } else { S::zero() };
            let dist = self.coordinate::<S>(0) - x.clone();
            return within(dist, radius).then_some(0);
        }
        if lo == n {
            let radius = if n > 1 { half(n - 2, n - 1) } else { S::zero() };
            let dist = x.clone() - self.coordinate::<S>(n - 1);
            return within(dist, radius).then_some(n - 1);
        }
        let below = x.clone() - self.coordinate::<S>(lo - 1);
        let above = self.coordinate::<S>(lo) - x.clone();
        if below <= above {
            Some(lo - 1)
        } else {
            Some(lo)
        }
    }
}

/// Product grid over per-axis value lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedDomain {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    size: usize,
}

impl DiscretizedDomain {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("domain has no axes".into()));
        }
        let mut strides = vec![1usize; axes.len()];
        let mut size = 1usize;
        for (k, axis) in axes.iter().enumerate().rev() {
            strides[k] = size;
            size = size
                .checked_mul(axis.len())
                .ok_or_else(|| Error::InvalidGrid("joint state count overflows".into()))?;
        }
        Ok(DiscretizedDomain {
            axes,
            strides,
            size,
        })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn joint_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.axes.len());
        multi.iter().zip(&self.strides).map(|(m, s)| m * s).sum()
    }

    pub fn multi_index(&self, mut joint: usize) -> Vec<usize> {
        debug_assert!(joint < self.size);
        let mut out = vec![0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = joint % axis.len();
            joint /= axis.len();
        }
        out
    }

    pub fn point<S: Scalar>(&self, joint: usize) -> Vec<S> {
        self.multi_index(joint)
            .into_iter()
            .zip(&self.axes)
            .map(|(m, axis)| axis.coordinate(m))
            .collect()
    }

    pub fn exact_point(&self, joint: usize) -> Vec<Rational> {
        self.multi_index(joint)
            .into_iter()
            .zip(&self.axes)
            .map(|(m, axis)| *axis.value(m))
            .collect()
    }

    pub fn snap<S: Scalar>(&self, x: &[S]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "grid snap",
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut multi = Vec::with_capacity(x.len());
        for (k, (axis, v)) in self.axes.iter().zip(x).enumerate() {
            match axis.snap(v) {
                Some(m) => multi.push(m),
                None => {
                    return Err(Error::OutOfRange {
                        point: format_point(x),
                        axis: k,
                    })
                }
            }
        }
        Ok(self.joint_index(&multi))
    }
}

/// Explicit finite point set, sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<Rational>>,
    approx: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(dim: usize, mut points: Vec<Vec<Rational>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("point set has dimension 0".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "point set",
                expected: dim,
                found: p.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::InvalidGrid("point set is empty".into()));
        }
        points.sort();
        points.dedup();
        let approx = points
            .iter()
            .map(|p| p.iter().map(rational_to_f64).collect())
            .collect();
        Ok(PointSet {
            dim,
            points,
            approx,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<Rational>] {
        &self.points
    }

    pub fn point<S: Scalar>(&self, i: usize) -> Vec<S> {
        self.points[i]
            .iter()
            .zip(&self.approx[i])
            .map(|(e, a)| S::from_coordinate(e, *a))
            .collect()
    }

    pub fn exact_point(&self, i: usize) -> Vec<Rational> {
        self.points[i].clone()
    }

    pub fn position(&self, exact: &[Rational]) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.as_slice().cmp(exact))
            .ok()
    }

    /// Exact membership for exact scalars; within `1e-9` per coordinate otherwise.
    pub fn locate<S: Scalar>(&self, x: &[S]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "point set lookup",
                expected: self.dim,
                found: x.len(),
            });
        }
        let missing = || Error::OutOfRange {
            point: format_point(x),
            axis: 0,
        };
        if S::EXACT {
            let exact: Option<Vec<Rational>> = x.iter().map(Scalar::to_rational).collect();
            return exact.and_then(|e| self.position(&e)).ok_or_else(missing);
        }
        let q: Vec<f64> = x.iter().map(Scalar::to_f64).collect();
        let start = self
            .approx
            .partition_point(|p| p[0] < q[0] - FLOAT_TOLERANCE);
        self.approx[start..]
            .iter()
            .take_while(|p| p[0] <= q[0] + FLOAT_TOLERANCE)
            .position(|p| {
                p.iter()
                    .zip(&q)
                    .all(|(a, b)| (a - b).abs() <= FLOAT_TOLERANCE)
            })
            .map(|off| start + off)
            .ok_or_else(missing)
    }
}

/// A finite concrete state space: a product grid or an explicit point set.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpace {
    Grid(DiscretizedDomain),
    Points(PointSet),
}

impl StateSpace {
    pub fn len(&self) -> usize {
        match self {
            StateSpace::Grid(g) => g.len(),
            StateSpace::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            StateSpace::Grid(g) => g.dim(),
            StateSpace::Points(p) => p.dim(),
        }
    }

    pub fn point<S: Scalar>(&self, i: usize) -> Vec<S> {
        match self {
            StateSpace::Grid(g) => g.point(i),
            StateSpace::Points(p) => p.point(i),
        }
    }

    pub fn exact_point(&self, i: usize) -> Vec<Rational> {
        match self {
            StateSpace::Grid(g) => g.exact_point(i),
            StateSpace::Points(p) => p.exact_point(i),
        }
    }

    /// Index of the state representing `x`: the nearest grid point for grids,
    /// the matching point for point sets.
    pub fn locate<S: Scalar>(&self, x: &[S]) -> Result<usize> {
        match self {
            StateSpace::Grid(g) => g.snap(x),
            StateSpace::Points(p) => p.locate(x),
        }
    }

    pub fn as_grid(&self) -> Option<&DiscretizedDomain> {
        match self {
            StateSpace::Grid(g) => Some(g),
            StateSpace::Points(_) => None,
        }
    }
}

impl From<DiscretizedDomain> for StateSpace {
    fn from(g: DiscretizedDomain) -> Self {
        StateSpace::Grid(g)
    }
}

impl From<PointSet> for StateSpace {
    fn from(p: PointSet) -> Self {
        StateSpace::Points(p)
    }
}

pub(crate) fn format_point<S: Scalar>(x: &[S]) -> String {
    let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(","))
}
