//! Global distribution alignment through entropy-regularized optimal transport.
//!
//! Samples (uniform mass `1/N`) are transported onto classes (mass given by
//! the class prior) under a cosine-distance cost. The coupling is found with
//! Sinkhorn-Knopp iterations carried out on dual potentials in the log domain,
//! which stays finite for small `lambda` where `exp(-M / lambda)` underflows.
//!
//! Classes with no candidates are dropped from the solve and can never be
//! assigned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{ClassPrior, Label, LabelVector};
use crate::matrix::{dot, l2_norm, FeatureMatrix, Matrix};
use crate::prototype::PrototypeSet;

/// Cost assigned to inactive columns.
pub const INACTIVE_COST: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    /// `N x K` cosine distances; inactive columns hold [`INACTIVE_COST`].
    pub m: Matrix,
    pub column_active: Vec<bool>,
}

impl CostMatrix {
    /// Wrap an externally supplied cost matrix. Active entries must lie in
    /// `[0, 2]`; inactive columns are overwritten with the sentinel.
    pub fn new(mut m: Matrix, column_active: Vec<bool>) -> Result<Self> {
        if column_active.len() != m.cols() {
            return Err(Error::DimensionMismatch { expected: m.cols(), found: column_active.len() });
        }
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::EmptyMatrix { rows: m.rows(), cols: m.cols() });
        }
        for i in 0..m.rows() {
            for (j, &active) in column_active.iter().enumerate() {
                let v = m.get(i, j);
                if !active {
                    m.set(i, j, INACTIVE_COST);
                } else if !(0.0..=2.0).contains(&v) {
                    return Err(Error::CostOutOfRange { row: i, col: j, value: v });
                }
            }
        }
        Ok(Self { m, column_active })
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn k(&self) -> usize {
        self.m.cols()
    }

    /// Nearest active prototype per row (ties to the lowest class index).
    pub fn greedy_labels(&self) -> LabelVector {
        let labels = self
            .m
            .iter_rows()
            .map(|row| {
                let mut best: Option<usize> = None;
                for (j, &v) in row.iter().enumerate() {
                    if self.column_active[j] && best.is_none_or(|b| v < row[b]) {
                        best = Some(j);
                    }
                }
                best.map_or(Label::Ignore, Label::from)
            })
            .collect();
        LabelVector::new(labels, self.k()).expect("column index below k")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkhornConfig {
    /// Entropy regularization coefficient.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the L1 marginal error drops to this value.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { lambda: 0.05, max_iters: 1000, tol: 1e-6 }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `N x K_active` coupling.
    pub q: Matrix,
    /// Original class index of each plan column, ascending.
    pub classes: Vec<usize>,
    /// Total class count `K` the plan was solved for.
    pub k: usize,
    /// Uniform row mass `1/N`.
    pub row_mass: f64,
    /// Column marginal over the active classes.
    pub column_mass: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    /// `||Q 1 - r||_1 + ||Q^T 1 - c||_1` of the returned plan.
    pub marginal_error: f64,
}

impl TransportPlan {
    pub fn n(&self) -> usize {
        self.q.rows()
    }

    /// `<Q, M>` over the active columns.
    pub fn transport_cost(&self, cost: &CostMatrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n() {
            for (a, &c) in self.classes.iter().enumerate() {
                total += self.q.get(i, a) * cost.m.get(i, c);
            }
        }
        total
    }

    /// The plan expanded to `N x K` with zero columns for inactive classes.
    pub fn dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n(), self.k);
        for i in 0..self.n() {
            for (a, &c) in self.classes.iter().enumerate() {
                out.set(i, c, self.q.get(i, a));
            }
        }
        out
    }
}

/// `M[i, k] = 1 - cos(f_i, mu_k)` for every active prototype, clamped to `[0, 2]`.
pub fn build_cost_matrix(features: &FeatureMatrix, prototypes: &PrototypeSet) -> Result<CostMatrix> {
    if features.d() != prototypes.d() {
        return Err(Error::DimensionMismatch { expected: prototypes.d(), found: features.d() });
    }
    if !prototypes.active.iter().any(|&a| a) {
        return Err(Error::NoActiveClass);
    }
    let k = prototypes.k();
    let proto_norms: Vec<f64> = (0..k).map(|c| l2_norm(prototypes.mu.row(c))).collect();
    for (c, &norm) in proto_norms.iter().enumerate() {
        if prototypes.active[c] && norm == 0.0 {
            return Err(Error::ZeroMeanVector(c));
        }
    }
    let mut m = Matrix::zeros(features.n(), k);
    for i in 0..features.n() {
        let f = features.row(i);
        let fnorm = l2_norm(f);
        if fnorm == 0.0 {
            return Err(Error::ZeroRow(i));
        }
        for c in 0..k {
            let v = if prototypes.active[c] {
                let cos = dot(f, prototypes.mu.row(c)) / (fnorm * proto_norms[c]);
                (1.0 - cos).clamp(0.0, 2.0)
            } else {
                INACTIVE_COST
            };
            m.set(i, c, v);
        }
    }
    Ok(CostMatrix { m, column_active: prototypes.active.clone() })
}

/// `c_k = |I_k| / sum_j |I_j|`.
pub fn estimate_class_prior(candidate_counts: &[usize]) -> Result<ClassPrior> {
    if candidate_counts.iter().all(|&c| c == 0) {
        return Err(Error::AllCountsZero);
    }
    let weights: Vec<f64> = candidate_counts.iter().map(|&c| c as f64).collect();
    ClassPrior::from_weights(&weights)
}

/// Log-domain Sinkhorn-Knopp with uniform row marginal `1/N` and column
/// marginal `prior`.
///
/// With dual potentials `f` (rows) and `g` (columns) the plan is
/// `Q[i, k] = exp((f_i + g_k - M[i, k]) / lambda)`. Each iteration makes the
/// row sums exact, then the column sums, then measures the L1 marginal error.
pub fn sinkhorn_solve(cost: &CostMatrix, prior: &ClassPrior, cfg: &SinkhornConfig) -> Result<TransportPlan> {
    cfg.validate()?;
    if prior.k() != cost.k() {
        return Err(Error::DimensionMismatch { expected: cost.k(), found: prior.k() });
    }
    let n = cost.n();
    if n == 0 {
        return Err(Error::EmptyMatrix { rows: 0, cols: cost.k() });
    }
    let mut classes = Vec::new();
    for c in 0..cost.k() {
        match (prior.active()[c], cost.column_active[c]) {
            (true, true) => classes.push(c),
            (true, false) => return Err(Error::InactiveColumnHasMass(c)),
            _ => {}
        }
    }
    if classes.is_empty() {
        return Err(Error::NoActiveClass);
    }
    let ka = classes.len();
    let lambda = cfg.lambda;

    // scaled cost M / lambda restricted to the active columns
    let mut scaled = Matrix::zeros(n, ka);
    for i in 0..n {
        for (a, &c) in classes.iter().enumerate() {
            scaled.set(i, a, cost.m.get(i, c) / lambda);
        }
    }
    let row_mass = 1.0 / n as f64;
    let log_r = row_mass.ln();
    let column_mass: Vec<f64> = classes.iter().map(|&c| prior.weights()[c]).collect();
    let log_c: Vec<f64> = column_mass.iter().map(|c| c.ln()).collect();

    // potentials stored divided by lambda
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; ka];
    let mut col_max = vec![0.0; ka];
    let mut col_acc = vec![0.0; ka];

    let mut converged = false;
    let mut iterations_used = 0;
    let mut marginal_error = f64::INFINITY;

    for it in 1..=cfg.max_iters {
        iterations_used = it;

        for i in 0..n {
            let row = scaled.row(i);
            f[i] = log_r - log_sum_exp(row.iter().zip(&g).map(|(m, gk)| gk - m));
        }

        col_max.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        for i in 0..n {
            for (a, m) in scaled.row(i).iter().enumerate() {
                col_max[a] = col_max[a].max(f[i] - m);
            }
        }
        col_acc.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for (a, m) in scaled.row(i).iter().enumerate() {
                col_acc[a] += (f[i] - m - col_max[a]).exp();
            }
        }
        for a in 0..ka {
            g[a] = log_c[a] - (col_max[a] + col_acc[a].ln());
        }

        if f.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::NumericalDivergence { iteration: it });
        }

        marginal_error = marginal_l1(&scaled, &f, &g, row_mass, &column_mass, &mut col_acc);
        if !marginal_error.is_finite() {
            return Err(Error::NumericalDivergence { iteration: it });
        }
        if marginal_error <= cfg.tol {
            converged = true;
            break;
        }
    }

    let mut q = Matrix::zeros(n, ka);
    for i in 0..n {
        for (a, m) in scaled.row(i).iter().enumerate() {
            q.set(i, a, (f[i] + g[a] - m).exp());
        }
    }
    if !converged {
        log::debug!("sinkhorn stopped after {iterations_used} iterations, marginal error {marginal_error:e}");
    }
    Ok(TransportPlan {
        q,
        classes,
        k: cost.k(),
        row_mass,
        column_mass,
        converged,
        iterations_used,
        marginal_error,
    })
}

fn marginal_l1(scaled: &Matrix, f: &[f64], g: &[f64], row_mass: f64, column_mass: &[f64], col_sum: &mut [f64]) -> f64 {
    col_sum.iter_mut().for_each(|v| *v = 0.0);
    let mut err = 0.0;
    for (i, fi) in f.iter().enumerate() {
        let mut row_sum = 0.0;
        for (a, m) in scaled.row(i).iter().enumerate() {
            let q = (fi + g[a] - m).exp();
            row_sum += q;
            col_sum[a] += q;
        }
        err += (row_sum - row_mass).abs();
    }
    err + col_sum.iter().zip(column_mass).map(|(s, c)| (s - c).abs()).sum::<f64>()
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Row-wise argmax of the plan, mapped back to original class indices.
pub fn assign_labels(plan: &TransportPlan) -> LabelVector {
    let labels = plan
        .q
        .iter_rows()
        .map(|row| Label::from(plan.classes[crate::matrix::argmax(row)]))
        .collect();
    LabelVector::new(labels, plan.k).expect("plan classes are below k")
}
