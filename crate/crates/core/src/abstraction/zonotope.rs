//! Planar zonotopes and their lattice points.

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Matrix;
use crate::scalar::{Decimal, Rational};

/// `{ center + Σ εᵢ·gᵢ : εᵢ ∈ [−1, 1] }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: Vec<Rational>,
    generators: Vec<Vec<Rational>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZonotopeFile {
    center: Vec<Decimal>,
    #[serde(default)]
    generators: Vec<Vec<Decimal>>,
}

impl Zonotope {
    pub fn new(center: Vec<Rational>, generators: Vec<Vec<Rational>>) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Config("zonotope center is empty".into()));
        }
        if let Some(g) = generators.iter().find(|g| g.len() != center.len()) {
            return Err(Error::DimensionMismatch {
                context: "zonotope generator",
                expected: center.len(),
                found: g.len(),
            });
        }
        Ok(Zonotope { center, generators })
    }

    pub fn from_json(text: &[u8]) -> Result<Self> {
        let file: ZonotopeFile = serde_json::from_slice(text).map_err(|e| {
            Error::parse(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        Self::from_decimals(file.center, file.generators)
    }

    pub(crate) fn from_decimals(
        center: Vec<Decimal>,
        generators: Vec<Vec<Decimal>>,
    ) -> Result<Self> {
        Self::new(
            center.into_iter().map(|d| d.0).collect(),
            generators
                .into_iter()
                .map(|g| g.into_iter().map(|d| d.0).collect())
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let file = ZonotopeFile {
            center: self.center.iter().copied().map(Decimal).collect(),
            generators: self
                .generators
                .iter()
                .map(|g| g.iter().copied().map(Decimal).collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("zonotope serializes")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[Rational] {
        &self.center
    }

    pub fn generators(&self) -> &[Vec<Rational>] {
        &self.generators
    }

    /// Image under `x ↦ W·x + b`, which is again a zonotope.
    pub fn affine_image(&self, weights: &Matrix<Rational>, bias: &[Rational]) -> Result<Zonotope> {
        if weights.cols() != self.dim() || bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                context: "zonotope affine image",
                expected: self.dim(),
                found: weights.cols(),
            });
        }
        let apply = |v: &[Rational]| -> Vec<Rational> {
            (0..weights.rows())
                .map(|r| weights.row(r).iter().zip(v).map(|(w, x)| w * x).sum())
                .collect()
        };
        let center = apply(&self.center)
            .into_iter()
            .zip(bias)
            .map(|(c, b)| c + b)
            .collect();
        let generators = self.generators.iter().map(|g| apply(g)).collect();
        Zonotope::new(center, generators)
    }

    /// Componentwise `(min, max)` over the zonotope.
    pub fn bounding_box(&self) -> Vec<(Rational, Rational)> {
        (0..self.dim())
            .map(|a| {
                let radius: Rational = self.generators.iter().map(|g| g[a].abs()).sum();
                (self.center[a] - radius, self.center[a] + radius)
            })
            .collect()
    }

    /// Exact membership, boundary included. Planar zonotopes only.
    pub fn contains(&self, p: &[Rational]) -> Result<bool> {
        Ok(self.membership()?.contains(p))
    }

    fn membership(&self) -> Result<Membership> {
        if self.dim() != 2 {
            return Err(Error::Config(format!(
                "zonotope membership is implemented for 2-D zonotopes, got dimension {}",
                self.dim()
            )));
        }
        let zero = Rational::from_integer(0);
        let gens: Vec<&Vec<Rational>> = self
            .generators
            .iter()
            .filter(|g| g.iter().any(|v| *v != zero))
            .collect();
        // A planar zonotope is the intersection of the slabs |n·(x − c)| ≤ Σ|n·gᵢ|
        // over the normals n of its generators. When every generator is parallel
        // the slab along the common direction bounds the segment.
        let mut normals: Vec<[Rational; 2]> = gens.iter().map(|g| [-g[1], g[0]]).collect();
        let collinear = gens
            .windows(2)
            .all(|w| w[0][0] * w[1][1] - w[0][1] * w[1][0] == zero);
        if let (true, Some(g)) = (collinear, gens.first()) {
            normals.push([g[0], g[1]]);
        }
        let slabs = normals
            .into_iter()
            .map(|n| {
                let bound: Rational = gens.iter().map(|g| (n[0] * g[0] + n[1] * g[1]).abs()).sum();
                (n, bound)
            })
            .collect();
        Ok(Membership {
            center: [self.center[0], self.center[1]],
            slabs,
        })
    }

    /// Every point of the lattice `step·ℤ²` inside or on the boundary,
    /// sorted lexicographically.
    pub fn lattice_points(&self, step: Rational) -> Result<Vec<Vec<Rational>>> {
        if step <= Rational::from_integer(0) {
            return Err(Error::InvalidGrid(format!(
                "lattice step {step} must be positive"
            )));
        }
        let membership = self.membership()?;
        let bbox = self.bounding_box();
        let range = |(lo, hi): (Rational, Rational)| {
            (
                (lo / step).ceil().to_integer(),
                (hi / step).floor().to_integer(),
            )
        };
        let (x0, x1) = range(bbox[0]);
        let (y0, y1) = range(bbox[1]);
        let mut points = Vec::new();
        for i in x0..=x1 {
            let x = step * Rational::from_integer(i);
            for j in y0..=y1 {
                let p = [x, step * Rational::from_integer(j)];
                if membership.contains(&p) {
                    points.push(p.to_vec());
                }
            }
        }
        Ok(points)
    }
}

struct Membership {
    center: [Rational; 2],
    slabs: Vec<([Rational; 2], Rational)>,
}

impl Membership {
    fn contains(&self, p: &[Rational]) -> bool {
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        if self.slabs.is_empty() {
            return d[0] == Rational::from_integer(0) && d[1] == Rational::from_integer(0);
        }
        self.slabs
            .iter()
            .all(|(n, bound)| (n[0] * d[0] + n[1] * d[1]).abs() <= *bound)
    }
}

/// Lattice points of `z` on `step·ℤ²`.
pub fn zonotope_points(z: &Zonotope, step: Rational) -> Result<Vec<Vec<Rational>>> {
    z.lattice_points(step)
}
