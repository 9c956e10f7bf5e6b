//! Least-squares conditional expectations on polynomial or piecewise-linear
//! bases.
//!
//! Features are standardised per regression (zero mean, unit variance). For
//! polynomials the non-constant columns are centred, so the intercept
//! decouples and equals the target mean exactly. Piecewise-linear bases use
//! hat functions, which already span the constants and keep every row
//! sparse. Normal equations are solved by Cholesky; a ridge term
//! `ε · trace / q` is added only when a pivot shows near-collinearity at
//! relative level `ε`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{cholesky, cholesky_solve, dot};
use crate::math::{powu, sq, sqrt};
use crate::{Error, Result};

/// Minimum ratio of paths to basis functions.
pub const MIN_PATHS_PER_BASIS: usize = 10;

// Cholesky pivot ratio below which the design counts as rank-deficient.
const RANK_FLOOR: f64 = 1e-12;

/// All monomials of total degree `≤ degree` in `dim` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialBasis {
    dim: usize,
    degree: usize,
    /// Exponent vectors, constant term first.
    exponents: Vec<Vec<u32>>,
}

impl PolynomialBasis {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree {
            push_compositions(dim, total as u32, &mut Vec::new(), &mut exponents);
        }
        Self {
            dim,
            degree,
            exponents,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }
}

fn push_compositions(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        let mut e = prefix.clone();
        e.push(total);
        out.push(e);
        return;
    }
    if dim == 0 {
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        push_compositions(dim, total - first, prefix, out);
        prefix.pop();
    }
}

/// Basis used by the solvers, evaluated on standardised log-prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Monomials of total degree `≤ d`.
    Polynomial(usize),
    /// Additive continuous piecewise-linear functions, one per coordinate,
    /// with this many interior knots at empirical quantiles.
    LinearSpline(usize),
}

impl Basis {
    /// Number of functions including the constant.
    pub fn size(&self, dim: usize) -> usize {
        match *self {
            Basis::Polynomial(d) => PolynomialBasis::new(dim, d).size(),
            Basis::LinearSpline(k) => 1 + dim * (k + 1),
        }
    }
}

/// Result of [`regress`]: coefficients on the standardised monomials (see
/// [`PolynomialBasis::exponents`]) and fitted values per path.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
}

/// Projects `targets` on the basis evaluated at `features` (`[path][dim]`).
pub fn regress(
    basis: &PolynomialBasis,
    features: &[f64],
    targets: &[f64],
    ridge: f64,
) -> Result<RegressionFit> {
    let projector = Projector::new(
        &Basis::Polynomial(basis.degree()),
        basis.dim(),
        features,
        targets.len(),
        ridge,
    )?;
    let (mean, beta) = projector.solve(targets);
    let fitted = projector.apply(mean, &beta);
    let mut coefficients = vec![0.0; basis.size()];
    coefficients[0] = mean
        - beta
            .iter()
            .zip(&projector.col_means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    for (slot, b) in projector.columns.iter().zip(&beta) {
        coefficients[*slot] = *b;
    }
    Ok(RegressionFit {
        coefficients,
        fitted,
    })
}

/// A factored design matrix reusable across several targets.
///
/// Rows are stored with `width` entries each; `index` gives their column
/// numbers when the design is sparse. With `intercept` the columns are
/// centred and the constant is handled separately.
#[derive(Debug)]
pub(crate) struct Projector {
    n: usize,
    q: usize,
    width: usize,
    intercept: bool,
    /// Polynomial basis index of each retained column (dense designs only).
    columns: Vec<usize>,
    col_means: Vec<f64>,
    values: Vec<f64>,
    index: Option<Vec<u32>>,
    factor: Vec<f64>,
}

impl Projector {
    pub(crate) fn new(
        basis: &Basis,
        dim: usize,
        features: &[f64],
        n: usize,
        ridge: f64,
    ) -> Result<Self> {
        if features.len() != n * dim {
            return Err(Error::Mismatch(
                "feature array does not match the path count".into(),
            ));
        }
        let size = basis.size(dim);
        if n < MIN_PATHS_PER_BASIS * size {
            return Err(Error::TooFewPaths {
                paths: n,
                basis: size,
            });
        }
        // Standardised features, `[path][dim]`. A feature that is constant
        // across paths carries no information and would make its columns
        // collinear with the constant, so it is dropped.
        let mut active = vec![false; dim];
        let mut z = vec![0.0; n * dim];
        for j in 0..dim {
            let column = || (0..n).map(|i| features[i * dim + j]);
            let m = column().sum::<f64>() / n as f64;
            let sd = sqrt(column().map(|x| sq(x - m)).sum::<f64>() / n as f64);
            let (lo, hi) = column().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
            active[j] = hi - lo > 1e-12 * (1.0 + hi.abs().max(lo.abs()));
            if active[j] {
                for i in 0..n {
                    z[i * dim + j] = (features[i * dim + j] - m) / sd;
                }
            }
        }

        let mut projector = match *basis {
            Basis::LinearSpline(knots) if active.iter().any(|a| *a) => {
                hat_design(knots, &z, &active, n, dim)
            }
            Basis::LinearSpline(_) => {
                polynomial_design(&PolynomialBasis::new(dim, 0), &z, &active, n)
            }
            Basis::Polynomial(degree) => {
                polynomial_design(&PolynomialBasis::new(dim, degree), &z, &active, n)
            }
        };
        projector.factor = if projector.q == 0 {
            Vec::new()
        } else {
            let mut gram = vec![0.0; projector.q * projector.q];
            projector.accumulate(&mut gram, None, |_| 1.0);
            factor_with_rescue(gram, projector.q, ridge)?
        };
        Ok(projector)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    fn col(&self, i: usize, slot: usize) -> usize {
        match &self.index {
            Some(idx) => idx[i * self.width + slot] as usize,
            None => slot,
        }
    }

    /// Adds `Σ_i w_i x_i x_iᵀ` (lower triangle, then mirrored) to `gram`,
    /// where `x_i` is row `i`, optionally preceded by a constant 1 at column
    /// `offset`-shifted position 0.
    fn accumulate(&self, gram: &mut [f64], lead: Option<()>, weight: impl Fn(usize) -> f64) {
        let off = lead.is_some() as usize;
        let q = self.q + off;
        for i in 0..self.n {
            let w = weight(i);
            let row = self.row(i);
            for a in 0..self.width {
                let ca = self.col(i, a) + off;
                let va = row[a] * w;
                for b in 0..self.width {
                    let cb = self.col(i, b) + off;
                    if cb <= ca {
                        gram[ca * q + cb] += va * row[b];
                    }
                }
                if off == 1 {
                    gram[ca * q] += va;
                }
            }
            if off == 1 {
                gram[0] += w;
            }
        }
        for a in 0..q {
            for b in 0..a {
                gram[b * q + a] = gram[a * q + b];
            }
        }
    }

    fn row_dot(&self, i: usize, coef: &[f64]) -> f64 {
        let row = self.row(i);
        match &self.index {
            Some(idx) => {
                let idx = &idx[i * self.width..(i + 1) * self.width];
                row.iter()
                    .zip(idx)
                    .map(|(v, c)| v * coef[*c as usize])
                    .sum()
            }
            None => dot(row, coef),
        }
    }

    /// Constant term and coefficients of the design columns.
    pub(crate) fn solve(&self, targets: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(targets.len(), self.n);
        let mean = if self.intercept {
            targets.iter().sum::<f64>() / self.n as f64
        } else {
            0.0
        };
        let mut beta = vec![0.0; self.q];
        if self.q > 0 {
            for (i, y) in targets.iter().enumerate() {
                let dy = y - mean;
                for (slot, x) in self.row(i).iter().enumerate() {
                    beta[self.col(i, slot)] += x * dy;
                }
            }
            cholesky_solve(&self.factor, self.q, &mut beta);
        }
        (mean, beta)
    }

    pub(crate) fn apply(&self, mean: f64, beta: &[f64]) -> Vec<f64> {
        if self.q == 0 {
            return vec![mean; self.n];
        }
        (0..self.n).map(|i| mean + self.row_dot(i, beta)).collect()
    }

    pub(crate) fn fit(&self, targets: &[f64]) -> Vec<f64> {
        let (mean, beta) = self.solve(targets);
        self.apply(mean, &beta)
    }

    /// Finds `g` in the span of the basis minimising `Σ (y_i − g(x_i) w_i)²`
    /// and returns `g(x_i)` per path.
    pub(crate) fn fit_slope(
        &self,
        targets: &[f64],
        weights: &[f64],
        ridge: f64,
    ) -> Result<Vec<f64>> {
        let off = self.intercept as usize;
        let q = self.q + off;
        let mut gram = vec![0.0; q * q];
        self.accumulate(&mut gram, self.intercept.then_some(()), |i| {
            weights[i] * weights[i]
        });
        let mut rhs = vec![0.0; q];
        for i in 0..self.n {
            let wy = weights[i] * targets[i];
            if self.intercept {
                rhs[0] += wy;
            }
            for (slot, x) in self.row(i).iter().enumerate() {
                rhs[self.col(i, slot) + off] += x * wy;
            }
        }
        let factor = factor_with_rescue(gram, q, ridge)?;
        cholesky_solve(&factor, q, &mut rhs);
        let lead = if self.intercept { rhs[0] } else { 0.0 };
        Ok((0..self.n)
            .map(|i| lead + self.row_dot(i, &rhs[off..]))
            .collect())
    }
}

/// Cholesky factor of a Gram matrix, adding `ε · trace / q` to the diagonal
/// when a pivot ratio falls to `ε` or below.
fn factor_with_rescue(mut gram: Vec<f64>, q: usize, ridge: f64) -> Result<Vec<f64>> {
    match cholesky(&gram, q) {
        Some((l, ratio)) if ratio > ridge.max(RANK_FLOOR) => Ok(l),
        _ if ridge > 0.0 => {
            let shift = ridge * (0..q).map(|a| gram[a * q + a]).sum::<f64>() / q as f64;
            for a in 0..q {
                gram[a * q + a] += shift;
            }
            Ok(cholesky(&gram, q)
                .ok_or(Error::SingularRegression { basis: q + 1 })?
                .0)
        }
        _ => Err(Error::SingularRegression { basis: q + 1 }),
    }
}

fn polynomial_design(basis: &PolynomialBasis, z: &[f64], active: &[bool], n: usize) -> Projector {
    let dim = basis.dim();
    let columns: Vec<usize> = basis
        .exponents()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, e)| e.iter().zip(active).all(|(p, a)| *p == 0 || *a))
        .map(|(i, _)| i)
        .collect();
    let q = columns.len();
    let mut values = vec![0.0; n * q];
    for i in 0..n {
        let x = &z[i * dim..(i + 1) * dim];
        for (c, &b) in columns.iter().enumerate() {
            values[i * q + c] = basis.exponents()[b]
                .iter()
                .zip(x)
                .map(|(&p, &v)| powu(v, p))
                .product();
        }
    }
    let mut col_means = vec![0.0; q];
    for (c, mean) in col_means.iter_mut().enumerate() {
        *mean = (0..n).map(|i| values[i * q + c]).sum::<f64>() / n as f64;
    }
    if q > 0 {
        for row in values.chunks_exact_mut(q) {
            for (v, m) in row.iter_mut().zip(&col_means) {
                *v -= m;
            }
        }
    }
    Projector {
        n,
        q,
        width: q,
        intercept: true,
        columns,
        col_means,
        values,
        index: None,
        factor: Vec::new(),
    }
}

/// Hat functions on `min, quantiles…, max` of each active coordinate. The
/// first coordinate keeps all its hats (they sum to one); later coordinates
/// drop their first hat so the constant is spanned once.
fn hat_design(knots: usize, z: &[f64], active: &[bool], n: usize, dim: usize) -> Projector {
    let coords: Vec<usize> = (0..dim).filter(|&j| active[j]).collect();
    let width = 2 * coords.len();
    let mut values = vec![0.0; n * width];
    let mut index = vec![0u32; n * width];
    let mut sorted = Vec::with_capacity(n);
    let mut q = 0usize;
    for (c, &j) in coords.iter().enumerate() {
        sorted.clear();
        sorted.extend((0..n).map(|i| z[i * dim + j]));
        sorted.sort_unstable_by(f64::total_cmp);
        let mut grid = vec![sorted[0]];
        for k in 1..=knots {
            let kappa = sorted[(k * n / (knots + 1)).min(n - 1)];
            if kappa > *grid.last().expect("nonempty") {
                grid.push(kappa);
            }
        }
        if sorted[n - 1] > *grid.last().expect("nonempty") {
            grid.push(sorted[n - 1]);
        }
        // Column of hat `h` for this coordinate; `None` for the dropped one.
        let base = q;
        let skip_first = c > 0;
        let column = |h: usize| -> Option<u32> {
            if skip_first {
                (h > 0).then(|| (base + h - 1) as u32)
            } else {
                Some((base + h) as u32)
            }
        };
        q += grid.len() - skip_first as usize;
        for i in 0..n {
            let x = z[i * dim + j];
            let cell = grid.partition_point(|g| *g <= x).clamp(1, grid.len() - 1) - 1;
            let w = ((x - grid[cell]) / (grid[cell + 1] - grid[cell])).clamp(0.0, 1.0);
            let slot = i * width + 2 * c;
            // A dropped hat contributes nothing; point both slots at the
            // other hat with the dropped weight zeroed.
            match (column(cell), column(cell + 1)) {
                (Some(a), Some(b)) => {
                    values[slot] = 1.0 - w;
                    values[slot + 1] = w;
                    index[slot] = a;
                    index[slot + 1] = b;
                }
                (None, Some(b)) => {
                    values[slot] = 0.0;
                    values[slot + 1] = w;
                    index[slot] = b;
                    index[slot + 1] = b;
                }
                _ => unreachable!("only the first hat is dropped"),
            }
        }
    }
    Projector {
        n,
        q,
        width,
        intercept: false,
        columns: Vec::new(),
        col_means: Vec::new(),
        values,
        index: Some(index),
        factor: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_features(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (i as f64 * 0.37).sin() * 2.0 + 1.0)
            .collect()
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(PolynomialBasis::new(1, 3).size(), 4);
        assert_eq!(PolynomialBasis::new(2, 2).size(), 6);
        assert_eq!(PolynomialBasis::new(3, 0).size(), 1);
        assert_eq!(PolynomialBasis::new(2, 1).exponents()[0], vec![0, 0]);
    }

    #[test]
    fn constant_target_is_reproduced() {
        let x = line_features(200);
        let fit = regress(&PolynomialBasis::new(1, 3), &x, &vec![2.5; 200], 1e-8).unwrap();
        assert!(fit.fitted.iter().all(|f| (f - 2.5).abs() < 1e-12));
    }

    #[test]
    fn linear_target_is_fit_exactly() {
        let x = line_features(300);
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let fit = regress(&PolynomialBasis::new(1, 2), &x, &y, 1e-8).unwrap();
        for (f, t) in fit.fitted.iter().zip(&y) {
            assert!((f - t).abs() < 1e-10);
        }
    }

    #[test]
    fn degree_zero_gives_sample_mean() {
        let x = line_features(50);
        let y: Vec<f64> = (0..50).map(|i| (i * i % 7) as f64).collect();
        let mean = y.iter().sum::<f64>() / 50.0;
        let fit = regress(&PolynomialBasis::new(1, 0), &x, &y, 1e-8).unwrap();
        assert!(fit.fitted.iter().all(|f| (f - mean).abs() < 1e-14));
        assert_eq!(fit.coefficients.len(), 1);
    }

    #[test]
    fn constant_feature_falls_back_to_mean() {
        let y: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let fit = regress(&PolynomialBasis::new(1, 4), &vec![0.7; 100], &y, 1e-8).unwrap();
        assert!(fit.fitted.iter().all(|f| (f - 49.5).abs() < 1e-12));
    }

    #[test]
    fn too_few_paths() {
        let err = regress(
            &PolynomialBasis::new(1, 4),
            &line_features(40),
            &[0.0; 40],
            1e-8,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::TooFewPaths {
                paths: 40,
                basis: 5
            }
        );
    }

    #[test]
    fn collinear_features_need_ridge() {
        // Two identical features: rank-deficient without regularisation.
        let x: Vec<f64> = line_features(100)
            .into_iter()
            .flat_map(|v| [v, v])
            .collect();
        let y: Vec<f64> = (0..100).map(|i| x[2 * i]).collect();
        let basis = PolynomialBasis::new(2, 1);
        assert_eq!(
            regress(&basis, &x, &y, 0.0).unwrap_err(),
            Error::SingularRegression { basis: 3 }
        );
        let fit = regress(&basis, &x, &y, 1e-8).unwrap();
        for (f, t) in fit.fitted.iter().zip(&y) {
            assert!((f - t).abs() < 1e-6);
        }
    }

    #[test]
    fn coefficients_reproduce_fitted_values() {
        let x = line_features(120);
        let y: Vec<f64> = x.iter().map(|v| v * v - v).collect();
        let fit = regress(&PolynomialBasis::new(1, 2), &x, &y, 1e-8).unwrap();
        let mean = x.iter().sum::<f64>() / 120.0;
        let sd = sqrt(x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 120.0);
        for (xi, fi) in x.iter().zip(&fit.fitted) {
            let z = (xi - mean) / sd;
            let eval = fit.coefficients[0] + fit.coefficients[1] * z + fit.coefficients[2] * z * z;
            assert!((eval - fi).abs() < 1e-9);
        }
    }
}
