//! Dense row-major matrices and the validated wrappers used between stages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability row sums.
pub const ROW_SUM_TOL: f64 = 1e-5;

/// Plain dense row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or(Error::DataLength { expected: usize::MAX, found: data.len() })?;
        if data.len() != expected {
            return Err(Error::DataLength { expected, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from nested rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    expected: (rows.len(), cols),
                    found: (rows.len(), row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Gather the listed rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::NonFinite { row: p / self.cols, col: p % self.cols }),
            None => Ok(()),
        }
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyMatrix { rows: self.rows, cols: self.cols });
        }
        Ok(())
    }
}

/// `N x D` finite feature embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Matrix);

impl FeatureMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        matrix.check_nonempty()?;
        matrix.check_finite()?;
        Ok(Self(matrix))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }

    pub fn d(&self) -> usize {
        self.0.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.0.select_rows(indices))
    }

    /// Multiply every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let data = self.0.data.iter().map(|v| v * factor).collect();
        Self::new(Matrix { data, ..self.0.clone() })
    }
}

/// `N x K` row-stochastic class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Matrix);

impl ProbMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        matrix.check_nonempty()?;
        validate_prob_matrix(&matrix)?;
        Ok(Self(matrix))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }

    pub fn k(&self) -> usize {
        self.0.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Check that every entry lies in `[0, 1]` and every row sums to 1 within
/// [`ROW_SUM_TOL`].
pub fn validate_prob_matrix(p: &Matrix) -> Result<()> {
    for (i, row) in p.iter_rows().enumerate() {
        let mut sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::EntryOutOfRange { row: i, col: j, value: v });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowNotNormalized(i, sum));
        }
    }
    Ok(())
}

/// Scale every row to unit L2 norm.
pub fn row_normalize(features: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut out = features.0.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let norm = l2_norm(row);
        if norm == 0.0 {
            return Err(Error::ZeroRow(i));
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    FeatureMatrix::new(out)
}

#[inline]
pub fn l2_norm(v: &[f64]) -> f64 {
    // hypot-style scaling keeps tiny and huge rows representable
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Mean of `values` that does not depend on their order, and is exact when all
/// values are equal. Reorders `values`.
pub(crate) fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let (first, last) = (values[0], values[values.len() - 1]);
    if first == last {
        return first;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn valid_prob_rows() {
        let p = Matrix::from_rows(&[[0.5, 0.5], [1.0, 0.0]]).unwrap();
        assert!(validate_prob_matrix(&p).is_ok());
    }

    #[test]
    fn row_sum_violation() {
        let p = Matrix::from_rows(&[[0.6, 0.6]]).unwrap();
        match validate_prob_matrix(&p) {
            Err(Error::RowNotNormalized(0, sum)) => assert!((sum - 1.2).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entry_range_violation() {
        let p = Matrix::from_rows(&[[1.1, -0.1]]).unwrap();
        assert!(matches!(validate_prob_matrix(&p), Err(Error::EntryOutOfRange { .. })));
    }

    #[test]
    fn normalize_examples() {
        let f = FeatureMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let n = row_normalize(&f).unwrap();
        assert!((n.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((n.row(0)[1] - 0.8).abs() < 1e-15);

        let f = FeatureMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(row_normalize(&f).unwrap().row(0), &[1.0, 0.0, 0.0]);

        let f = FeatureMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(row_normalize(&f), Err(Error::ZeroRow(0)));
    }

    #[test]
    fn feature_matrix_rejects_non_finite_and_empty() {
        assert!(matches!(
            FeatureMatrix::from_rows(&[vec![1.0, f64::NAN]]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            FeatureMatrix::new(Matrix::zeros(0, 3)),
            Err(Error::EmptyMatrix { .. })
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn order_free_mean_is_exact_on_constants() {
        let x = 0.1 + 0.2;
        assert_eq!(order_free_mean(&mut [x, x, x]), x);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(rows in prop::collection::vec(
            prop::collection::vec(-100.0f64..100.0, 4), 1..20)
        ) {
            prop_assume!(rows.iter().all(|r| l2_norm(r) > 1e-6));
            let f = FeatureMatrix::from_rows(&rows).unwrap();
            let once = row_normalize(&f).unwrap();
            let twice = row_normalize(&once).unwrap();
            for i in 0..once.n() {
                prop_assert!((l2_norm(once.row(i)) - 1.0).abs() < 1e-7);
                for (a, b) in once.row(i).iter().zip(twice.row(i)) {
                    prop_assert!((a - b).abs() < 1e-7);
                }
            }
        }

        #[test]
        fn argmax_invariant_under_positive_scaling(
            row in prop::collection::vec(0.0f64..1.0, 2..8),
            scale in 0.01f64..100.0,
        ) {
            let sum: f64 = row.iter().sum();
            prop_assume!(sum > 1e-9);
            let p: Vec<f64> = row.iter().map(|v| v / sum).collect();
            let scaled: Vec<f64> = p.iter().map(|v| v * scale).collect();
            let s2: f64 = scaled.iter().sum();
            let renorm: Vec<f64> = scaled.iter().map(|v| v / s2).collect();
            // Renormalization may perturb exact ties; compare winning values.
            let (a, b) = (argmax(&p), argmax(&renorm));
            prop_assert!(a == b || (p[a] - p[b]).abs() < 1e-12);
        }
    }
}
