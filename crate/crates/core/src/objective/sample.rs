use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Inputs, targets and (for generated data) the noiseless targets.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    x: DMatrix<f64>,
    y: DVector<f64>,
    z: Option<DVector<f64>>,
}

impl SampleSet {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, z: Option<DVector<f64>>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("sample set needs at least one row and one column"));
        }
        if y.len() != x.nrows() {
            return Err(Error::invalid(format!(
                "{} targets for {} inputs",
                y.len(),
                x.nrows()
            )));
        }
        if let Some(z) = &z {
            if z.len() != x.nrows() {
                return Err(Error::invalid(format!(
                    "{} noiseless targets for {} inputs",
                    z.len(),
                    x.nrows()
                )));
            }
        }
        let finite = x.iter().chain(y.iter()).chain(z.iter().flat_map(|z| z.iter()));
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample set contains non-finite values"));
        }
        Ok(Self { x, y, z })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn z(&self) -> Option<&DVector<f64>> {
        self.z.as_ref()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    /// Ambient input dimension.
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows of `x` at `indices`, in order.
    pub fn x_rows(&self, indices: &[usize]) -> DMatrix<f64> {
        self.x.select_rows(indices)
    }

    pub fn select(&self, indices: &[usize]) -> Result<SampleSet> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "row index {bad} out of range for {} rows",
                self.len()
            )));
        }
        let y = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i]));
        let z = self
            .z
            .as_ref()
            .map(|z| DVector::from_iterator(indices.len(), indices.iter().map(|&i| z[i])));
        SampleSet::new(self.x.select_rows(indices), y, z)
    }

    /// Inputs mapped through a linear map `b` (d×D): returns the m×d matrix `X Bᵀ`.
    pub fn mapped(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        map_rows(&self.x, b)
    }

    pub fn max_abs_y(&self) -> f64 {
        self.y.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

pub(crate) fn map_rows(x: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.ncols() != x.ncols() {
        return Err(Error::invalid(format!(
            "map has {} columns but inputs have dimension {}",
            b.ncols(),
            x.ncols()
        )));
    }
    Ok(x * b.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_shapes_and_finiteness() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(SampleSet::new(x.clone(), DVector::from_vec(vec![1.0]), None).is_err());
        assert!(SampleSet::new(x.clone(), DVector::from_vec(vec![1.0, f64::NAN]), None).is_err());
        assert!(SampleSet::new(
            x.clone(),
            DVector::from_vec(vec![1.0, 2.0]),
            Some(DVector::from_vec(vec![0.0]))
        )
        .is_err());
        assert!(SampleSet::new(DMatrix::zeros(0, 1), DVector::zeros(0), None).is_err());
        let s = SampleSet::new(x, DVector::from_vec(vec![1.0, -3.0]), None).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 1));
        assert_eq!(s.max_abs_y(), 3.0);
        assert!(s.select(&[2]).is_err());
        assert_eq!(s.select(&[1]).unwrap().y()[0], -3.0);
    }
}
