use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{LinearOperator, Role};
use crate::scalar::Scalar;

/// Outcome of checking whether `G` is the Moore–Penrose pseudo-inverse of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PenroseReport {
    pub aga_equals_a: bool,
    pub gag_equals_g: bool,
    pub ag_symmetric: bool,
    pub ga_symmetric: bool,
    /// `A·G = I` on the full abstract space.
    pub ag_identity: bool,
    /// `A·G` is the identity on every abstract cell that has members (zero
    /// rows of `A` are empty cells).
    pub ag_identity_on_support: bool,
    pub empty_cells: usize,
}

impl PenroseReport {
    pub fn all_conditions(&self) -> bool {
        self.aga_equals_a && self.gag_equals_g && self.ag_symmetric && self.ga_symmetric
    }
}

/// Evaluates the four Penrose conditions entrywise (within `1e-9` for floats,
/// exactly for rationals).
pub fn check_penrose<S: Scalar>(
    a: &LinearOperator<S>,
    g: &LinearOperator<S>,
) -> Result<PenroseReport> {
    if a.rows() != g.cols() {
        return Err(Error::DimensionMismatch {
            context: "penrose: A.rows vs G.cols",
            expected: a.rows(),
            found: g.cols(),
        });
    }
    if a.cols() != g.rows() {
        return Err(Error::DimensionMismatch {
            context: "penrose: A.cols vs G.rows",
            expected: a.cols(),
            found: g.rows(),
        });
    }
    let ag = a.matmul(g, Role::General)?;
    let aga = ag.matmul(a, Role::General)?;
    let gag = g.matmul(&ag, Role::General)?;
    let ga = g.matmul(a, Role::General)?;

    let mut occupied = vec![false; a.rows()];
    for (r, _, _) in a.entries() {
        occupied[*r] = true;
    }
    let empty_cells = occupied.iter().filter(|o| !**o).count();
    let support_identity = LinearOperator::new(
        a.rows(),
        a.rows(),
        Role::General,
        (0..a.rows())
            .filter(|r| occupied[*r])
            .map(|r| (r, r, S::one())),
    )?;
    let identity = LinearOperator::identity(a.rows(), Role::General)?;

    Ok(PenroseReport {
        aga_equals_a: aga.approx_eq(a),
        gag_equals_g: gag.approx_eq(g),
        ag_symmetric: ag.is_symmetric(),
        ga_symmetric: ga.is_symmetric(),
        ag_identity: ag.approx_eq(&identity),
        ag_identity_on_support: ag.approx_eq(&support_identity),
        empty_cells,
    })
}
