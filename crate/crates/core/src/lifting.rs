//! Grid discretization and lifting of concrete maps to pushforward operators.
//!
//! A deterministic map `f` becomes the column-stochastic 0/1 matrix sending
//! the state of every input point to the state of `f(point)` in the output
//! space. Images are snapped to the nearest output grid point (ties toward the
//! smaller coordinate); an image further than half a spacing outside the
//! output box is an error, never clamped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{format_point, Axis, DiscretizedDomain, PointSet, StateSpace};
use crate::error::{Error, Result};
use crate::network::{Layer, Network};
use crate::operator::{LinearOperator, Role};
use crate::scalar::{Decimal, Rational, Scalar};

/// One axis of a grid: an arithmetic progression or an explicit value list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum AxisSpec {
    Range {
        low: Decimal,
        high: Decimal,
        step: Decimal,
    },
    Values {
        values: Vec<Decimal>,
    },
}

impl AxisSpec {
    pub fn range(low: Rational, high: Rational, step: Rational) -> Self {
        AxisSpec::Range {
            low: Decimal(low),
            high: Decimal(high),
            step: Decimal(step),
        }
    }

    pub fn integers(low: i128, high: i128) -> Self {
        Self::range(
            Rational::from_integer(low),
            Rational::from_integer(high),
            Rational::from_integer(1),
        )
    }

    pub fn values(values: impl IntoIterator<Item = Rational>) -> Self {
        AxisSpec::Values {
            values: values.into_iter().map(Decimal).collect(),
        }
    }

    pub fn to_axis(&self) -> Result<Axis> {
        match self {
            AxisSpec::Range { low, high, step } => {
                let (low, high, step) = (low.0, high.0, step.0);
                if step <= Rational::from_integer(0) {
                    return Err(Error::InvalidGrid(format!("step {step} must be positive")));
                }
                if low > high {
                    return Err(Error::InvalidGrid(format!("low {low} exceeds high {high}")));
                }
                let count = ((high - low) / step).floor().to_integer() + 1;
                let count = usize::try_from(count)
                    .map_err(|_| Error::InvalidGrid("axis too long".into()))?;
                Axis::new(
                    (0..count)
                        .map(|k| low + step * Rational::from_integer(k as i128))
                        .collect(),
                )
            }
            AxisSpec::Values { values } => Axis::new(values.iter().map(|d| d.0).collect()),
        }
    }
}

/// Per-axis grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Self {
        GridSpec { axes }
    }

    /// The same axis repeated `dims` times.
    pub fn cube(axis: AxisSpec, dims: usize) -> Self {
        GridSpec {
            axes: vec![axis; dims],
        }
    }
}

/// Materializes the grid: `floor((high - low) / step) + 1` values per axis,
/// boundary points included.
pub fn discretize(spec: &GridSpec) -> Result<DiscretizedDomain> {
    DiscretizedDomain::new(
        spec.axes
            .iter()
            .map(AxisSpec::to_axis)
            .collect::<Result<_>>()?,
    )
}

/// Lifts `f` to the pushforward operator from `dom_in` to `dom_out`.
pub fn lift_function<S, F>(
    f: F,
    dom_in: &StateSpace,
    dom_out: &StateSpace,
) -> Result<LinearOperator<S>>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<Vec<S>> + Sync,
{
    let targets = (0..dom_in.len())
        .into_par_iter()
        .map(|i| {
            let x = dom_in.point::<S>(i);
            let y = f(&x)?;
            dom_out.locate(&y).map_err(|e| match e {
                Error::OutOfRange { axis, .. } => Error::OutOfRange {
                    point: format!("{} = f{}", format_point(&y), format_point(&x)),
                    axis,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    LinearOperator::from_function(dom_out.len(), &targets, Role::Pushforward)
}

pub fn lift_network<S: Scalar>(
    net: &Network<S>,
    dom_in: &StateSpace,
    dom_out: &StateSpace,
) -> Result<LinearOperator<S>> {
    check_width(net.input_width(), dom_in)?;
    check_width(net.output_width(), dom_out)?;
    lift_function(|x: &[S]| net.eval(x), dom_in, dom_out)
}

pub fn lift_layer<S: Scalar>(
    layer: &Layer<S>,
    dom_in: &StateSpace,
    dom_out: &StateSpace,
) -> Result<LinearOperator<S>> {
    check_width(layer.input_width(), dom_in)?;
    check_width(layer.output_width(), dom_out)?;
    lift_function(|x: &[S]| Ok(layer.eval(x)), dom_in, dom_out)
}

fn check_width(width: usize, space: &StateSpace) -> Result<()> {
    if width != space.dim() {
        return Err(Error::DimensionMismatch {
            context: "space dimension vs layer width",
            expected: width,
            found: space.dim(),
        });
    }
    Ok(())
}

/// The exact image lattice `{ f(x) : x in dom_in }`. Needs exact arithmetic.
pub fn image_space<S, F>(f: F, dom_in: &StateSpace) -> Result<PointSet>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<Vec<S>> + Sync,
{
    if !S::EXACT {
        return Err(Error::Inexact(
            "image spaces need exact arithmetic; supply an output grid instead".into(),
        ));
    }
    let images = (0..dom_in.len())
        .into_par_iter()
        .map(|i| {
            let y = f(&dom_in.point::<S>(i))?;
            y.iter()
                .map(|v| v.to_rational())
                .collect::<Option<Vec<Rational>>>()
                .ok_or_else(|| Error::Inexact(format!("image {} not rational", format_point(&y))))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = images.first().map_or(0, Vec::len);
    PointSet::new(dim, images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;

    fn r(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn discretize_counts() {
        let d = discretize(&GridSpec::new(vec![AxisSpec::integers(-3, 3)])).unwrap();
        assert_eq!(
            d.axes()[0].values(),
            (-3..=3).map(r).collect::<Vec<_>>().as_slice()
        );
        let fine = discretize(&GridSpec::new(vec![AxisSpec::range(
            r(0),
            r(1),
            Rational::new(1, 100),
        )]))
        .unwrap();
        assert_eq!(fine.len(), 101);
        assert_eq!(*fine.axes()[0].value(100), r(1));
        let single = discretize(&GridSpec::new(vec![AxisSpec::values([r(0)])])).unwrap();
        assert_eq!(single.len(), 1);
        let partial = discretize(&GridSpec::new(vec![AxisSpec::range(
            r(0),
            r(1),
            Rational::new(3, 10),
        )]))
        .unwrap();
        assert_eq!(partial.len(), 4);
    }

    #[test]
    fn discretize_rejects_bad_steps() {
        assert!(discretize(&GridSpec::new(vec![AxisSpec::range(r(0), r(1), r(0))])).is_err());
        assert!(discretize(&GridSpec::new(vec![AxisSpec::range(r(0), r(1), r(-1))])).is_err());
        assert!(discretize(&GridSpec::new(vec![AxisSpec::range(r(2), r(1), r(1))])).is_err());
    }

    #[test]
    fn grid_spec_from_json() {
        let spec: GridSpec =
            serde_json::from_str(r#"[{"low": -3, "high": 3, "step": 1}, {"values": [0, 0.5]}]"#)
                .unwrap();
        let d = discretize(&spec).unwrap();
        assert_eq!(d.shape(), vec![7, 2]);
        assert_eq!(*d.axes()[1].value(1), Rational::new(1, 2));
    }

    #[test]
    fn identity_lifts_to_identity() {
        let space: StateSpace = discretize(&GridSpec::cube(AxisSpec::integers(-1, 1), 2))
            .unwrap()
            .into();
        let op = lift_function(|x: &[f64]| Ok(x.to_vec()), &space, &space).unwrap();
        assert_eq!(op, LinearOperator::identity(9, Role::Pushforward).unwrap());
    }

    #[test]
    fn relu_lift_matches_enumeration() {
        let space: StateSpace = discretize(&GridSpec::new(vec![AxisSpec::integers(-2, 2)]))
            .unwrap()
            .into();
        let relu = Layer::<Rational>::Relu { width: 1 };
        let op = lift_layer(&relu, &space, &space).unwrap();
        for i in 0..5 {
            let x = space.exact_point(i)[0];
            let y = if x > r(0) { x } else { r(0) };
            let expected = space.locate(&[y]).unwrap();
            let pushed = op.apply(&Distribution::point_mass(5, i).unwrap()).unwrap();
            assert_eq!(pushed, Distribution::point_mass(5, expected).unwrap());
        }
        assert_eq!(op.get(2, 0), r(1));
        assert_eq!(op.get(2, 1), r(1));
        assert_eq!(op.get(4, 4), r(1));
    }

    #[test]
    fn out_of_range_is_an_error() {
        let space: StateSpace = discretize(&GridSpec::new(vec![AxisSpec::integers(0, 2)]))
            .unwrap()
            .into();
        let err = lift_function(|x: &[f64]| Ok(vec![x[0] + 2.0]), &space, &space).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { .. }), "{err}");
        // half a spacing beyond the box still snaps
        assert!(lift_function(|x: &[f64]| Ok(vec![x[0] * 1.25]), &space, &space).is_ok());
    }

    #[test]
    fn image_space_of_the_sum_map() {
        let space: StateSpace = discretize(&GridSpec::cube(AxisSpec::integers(-3, 3), 2))
            .unwrap()
            .into();
        let image =
            image_space(|x: &[Rational]| Ok(vec![x[0] + x[1], x[0] + x[1]]), &space).unwrap();
        assert_eq!(image.len(), 13);
        assert_eq!(image.points()[0], vec![r(-6), r(-6)]);
        assert!(image_space(|x: &[f64]| Ok(x.to_vec()), &space).is_err());
    }
}
