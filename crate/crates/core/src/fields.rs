//! Reference fields with known energies and singularities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, Grid, GridField};

/// Fields the harness and the tests know how to build by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldRecipe {
    /// `x / |x - center|` shifted to `center`; needs `N = n`.
    Hedgehog {
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Normalization of `(x_1^2 - s^2, x_2, ..., x_n)`: degree-one point
    /// singularities at `(+-s, 0, ..., 0)`.
    TwoHedgehog { separation: f64 },
    /// Constant value at every node.
    Constant { value: Vec<f64> },
    /// `offset + matrix x`, with `matrix` row-major `N x n`.
    Affine { offset: Vec<f64>, matrix: Vec<f64> },
}

impl FieldRecipe {
    pub fn build(&self, grid: &Grid) -> Result<GridField> {
        let n = grid.dim();
        match self {
            FieldRecipe::Hedgehog { center } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; n]);
                if c.len() != n {
                    return Err(Error::Shape("hedgehog center has the wrong dimension".into()));
                }
                hedgehog(grid, &c)
            }
            FieldRecipe::TwoHedgehog { separation } => two_hedgehog(grid, *separation),
            FieldRecipe::Constant { value } => GridField::constant(grid.clone(), value),
            FieldRecipe::Affine { offset, matrix } => affine(grid, offset, matrix),
        }
    }

    /// Point singularities of the recipe, if any.
    pub fn singular_points(&self, dim: usize) -> Vec<Vec<f64>> {
        match self {
            FieldRecipe::Hedgehog { center } => vec![center.clone().unwrap_or_else(|| vec![0.0; dim])],
            FieldRecipe::TwoHedgehog { separation } => {
                let mut a = vec![0.0; dim];
                let mut b = vec![0.0; dim];
                a[0] = -separation;
                b[0] = *separation;
                vec![a, b]
            }
            _ => Vec::new(),
        }
    }
}

fn normalized(grid: &Grid, comps: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<GridField> {
    let mut bad = None;
    let field = GridField::from_fn(grid.clone(), comps, |x, out| {
        f(x, out);
        let r = norm(out);
        if r > 0.0 {
            out.iter_mut().for_each(|v| *v /= r);
        } else {
            bad = Some(x.to_vec());
        }
    })?;
    if let Some(x) = bad {
        return Err(Error::Singularity(format!("field is undefined at the lattice node {x:?}")));
    }
    field.into_constrained(1e-12)
}

/// `(x - c) / |x - c|`. The center must not be a lattice node.
pub fn hedgehog(grid: &Grid, center: &[f64]) -> Result<GridField> {
    normalized(grid, grid.dim(), |x, out| {
        out.iter_mut().zip(x.iter().zip(center)).for_each(|(o, (xi, ci))| *o = xi - ci);
    })
}

/// Sphere-valued map with hedgehog-like singularities at `(+-s, 0, ..., 0)`.
pub fn two_hedgehog(grid: &Grid, separation: f64) -> Result<GridField> {
    normalized(grid, grid.dim(), |x, out| {
        out.copy_from_slice(x);
        out[0] = x[0] * x[0] - separation * separation;
    })
}

pub fn affine(grid: &Grid, offset: &[f64], matrix: &[f64]) -> Result<GridField> {
    let n = grid.dim();
    let comps = offset.len();
    if matrix.len() != comps * n {
        return Err(Error::Shape(format!("affine matrix needs {} entries", comps * n)));
    }
    GridField::from_fn(grid.clone(), comps, |x, out| {
        for c in 0..comps {
            out[c] = offset[c] + (0..n).map(|k| matrix[c * n + k] * x[k]).sum::<f64>();
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hedgehog_rejects_a_node_center() {
        let g = Grid::cube(2, -1.0, 1.0, 5).unwrap();
        assert!(matches!(hedgehog(&g, &[0.0, 0.0]), Err(Error::Singularity(_))));
        let g = Grid::cube(2, -1.0, 1.0, 6).unwrap();
        assert!(hedgehog(&g, &[0.0, 0.0]).unwrap().max_constraint_violation() < 1e-12);
    }

    #[test]
    fn recipes_round_trip_through_json() {
        let r: FieldRecipe = serde_json::from_str(r#"{"kind": "two_hedgehog", "separation": 0.5}"#).unwrap();
        assert_eq!(r, FieldRecipe::TwoHedgehog { separation: 0.5 });
        assert_eq!(r.singular_points(3), vec![vec![-0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0]]);
        let g = Grid::cube(3, -1.0, 1.0, 8).unwrap();
        assert_eq!(r.build(&g).unwrap().components(), 3);
    }
}
