use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

/// Relative pivot magnitude below which a factorisation is treated as
/// singular.
const PIVOT_RTOL: f64 = 1e-14;

/// LU factorisation that keeps the original matrix for one step of
/// iterative refinement.
#[derive(Debug, Clone)]
pub(crate) struct Factored {
    matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
}

impl Factored {
    pub fn new(matrix: DMatrix<f64>, what: &str) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Conditioning(format!("{what}: non-finite matrix entry")));
        }
        let lu = matrix.clone().lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if !(max > 0.0) || min <= PIVOT_RTOL * max {
            return Err(Error::Conditioning(format!(
                "{what}: singular system (pivot ratio {:.3e}); duplicate sites or zero regularisation",
                if max > 0.0 { min / max } else { 0.0 }
            )));
        }
        Ok(Factored { matrix, lu })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = self
            .lu
            .solve(rhs)
            .ok_or_else(|| Error::Conditioning("LU solve failed".into()))?;
        let r = rhs - &self.matrix * &x;
        if let Some(dx) = self.lu.solve(&r) {
            x += dx;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Conditioning("non-finite solution".into()));
        }
        Ok(x)
    }
}
