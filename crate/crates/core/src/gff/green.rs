//! Green's function of simple random walk killed on leaving a box.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, LatticePoint};
use crate::linalg::{conjugate_gradient, BoxWalkOperator, DEFAULT_TOLERANCE};

fn max_iterations(n: usize) -> usize {
    10 * n + 1000
}

/// `G_B(x, y)` for the walk killed outside `bx`.
pub fn dirichlet_green(bx: &BoxRegion, x: &LatticePoint, y: &LatticePoint) -> Result<f64> {
    dirichlet_green_tol(bx, x, y, DEFAULT_TOLERANCE)
}

pub fn dirichlet_green_tol(
    bx: &BoxRegion,
    x: &LatticePoint,
    y: &LatticePoint,
    tolerance: f64,
) -> Result<f64> {
    let ix = bx.linear_index(x)?;
    Ok(dirichlet_green_column(bx, y, tolerance)?[ix])
}

/// The whole column `G_B(., y)` in row-major order.
pub fn dirichlet_green_column(
    bx: &BoxRegion,
    y: &LatticePoint,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let iy = bx.linear_index(y)?;
    let op = BoxWalkOperator::new(bx, None);
    let mut rhs = vec![0.0; bx.volume()];
    rhs[iy] = 1.0;
    Ok(conjugate_gradient(&op, &rhs, tolerance, max_iterations(rhs.len()))?.x)
}

#[derive(Clone, Debug, PartialEq)]
pub enum GreenDomain {
    /// Walk killed outside the box and on the listed vertices.
    Box {
        region: BoxRegion,
        absorbing: Vec<LatticePoint>,
    },
    FullSpace {
        dim: usize,
    },
}

/// Green's function values for a set of requested pairs.
#[derive(Clone, Debug)]
pub struct GreenTable {
    pub domain: GreenDomain,
    pub values: BTreeMap<(LatticePoint, LatticePoint), f64>,
}

impl GreenTable {
    /// Fill the table; one linear solve per distinct second argument.
    pub fn compute(domain: GreenDomain, pairs: &[(LatticePoint, LatticePoint)]) -> Result<Self> {
        let mut values = BTreeMap::new();
        match &domain {
            GreenDomain::Box { region, absorbing } => {
                let mut killed = vec![false; region.volume()];
                for a in absorbing {
                    killed[region.linear_index(a)?] = true;
                }
                let op = BoxWalkOperator::new(region, Some(&killed));
                let mut columns: BTreeMap<LatticePoint, Vec<f64>> = BTreeMap::new();
                for (x, y) in pairs {
                    let ix = region.linear_index(x)?;
                    let iy = region.linear_index(y)?;
                    if killed[ix] || killed[iy] {
                        values.insert((x.clone(), y.clone()), 0.0);
                        continue;
                    }
                    if !columns.contains_key(y) {
                        let mut rhs = vec![0.0; region.volume()];
                        rhs[iy] = 1.0;
                        let sol = conjugate_gradient(
                            &op,
                            &rhs,
                            DEFAULT_TOLERANCE,
                            max_iterations(rhs.len()),
                        )?;
                        columns.insert(y.clone(), sol.x);
                    }
                    values.insert((x.clone(), y.clone()), columns[y][ix]);
                }
            }
            GreenDomain::FullSpace { dim } => {
                let mut cache = super::FullspaceGreen::new(*dim)?;
                for (x, y) in pairs {
                    if x.dim() != *dim || y.dim() != *dim {
                        return Err(Error::InvalidParameter("point dimension mismatch".into()));
                    }
                    values.insert((x.clone(), y.clone()), cache.get(&x.sub(y))?);
                }
            }
        }
        Ok(Self { domain, values })
    }

    pub fn get(&self, x: &LatticePoint, y: &LatticePoint) -> Option<f64> {
        self.values.get(&(x.clone(), y.clone())).copied()
    }
}
