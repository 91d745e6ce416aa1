//! Laplacian eigenbasis and the graph Fourier transform pair.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{GraphKind, GridGraph};

/// Largest accepted `‖L u_k − λ_k u_k‖∞`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Components below this magnitude are skipped when fixing eigenvector signs.
pub const SIGN_EPS: f64 = 1e-10;

const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Radians,
    PerUnit,
    Unitless,
}

/// Vertex-indexed measurement vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    values: Vec<f64>,
    units: Units,
    kind: GraphKind,
}

impl GraphSignal {
    pub fn new(graph: &GridGraph, values: Vec<f64>, units: Units) -> Result<Self> {
        if values.len() != graph.n() {
            return Err(Error::mismatch(graph.n(), values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("signal value {i} is not finite")));
        }
        Ok(GraphSignal {
            values,
            units,
            kind: graph.kind(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Sorted eigenpairs of a graph Laplacian. Column `k` of `eigenvectors` is `u_k`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    normalized: Vec<f64>,
    kind: GraphKind,
}

/// Full symmetric eigendecomposition with deterministic ordering and signs.
///
/// Eigenvalues ascend. Each eigenvector's first component above [`SIGN_EPS`]
/// in magnitude is positive. Runs of numerically equal eigenvalues are
/// ordered lexicographically by their (sign-fixed) eigenvectors.
pub fn eigendecompose(graph: &GridGraph) -> Result<SpectralBasis> {
    let lap = graph.laplacian();
    let n = lap.nrows();
    if n == 0 {
        return Err(Error::Structure("empty graph".into()));
    }
    let eig = SymmetricEigen::try_new(lap.clone(), f64::EPSILON, MAX_SWEEPS).ok_or_else(|| {
        Error::Numerical {
            message: "symmetric eigensolver did not converge".into(),
            residual: f64::NAN,
        }
    })?;

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            fix_sign(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Group near-equal eigenvalues and order each group by eigenvector.
    let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    let tie = 1e-10 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end].0 - pairs[end - 1].0 <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        }
        start = end;
    }

    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| pairs[c].1[r]);

    let residual = max_residual(lap, &eigenvalues, &eigenvectors);
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::Numerical {
            message: "eigenpair residual above tolerance".into(),
            residual,
        });
    }

    let lo = eigenvalues[0];
    let hi = eigenvalues[n - 1];
    let normalized = eigenvalues
        .iter()
        .map(|&l| if hi > lo { ((l - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
        .collect();

    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
        normalized,
        kind: graph.kind(),
    })
}

fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_EPS) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn max_residual(lap: &DMatrix<f64>, values: &[f64], vectors: &DMatrix<f64>) -> f64 {
    let product = lap * vectors;
    let mut worst = 0.0_f64;
    for (k, &lambda) in values.iter().enumerate() {
        for r in 0..lap.nrows() {
            worst = worst.max((product[(r, k)] - lambda * vectors[(r, k)]).abs());
        }
    }
    worst
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `λ̂_k = (λ_k − min λ) / (max λ − min λ)`.
    pub fn normalized_frequencies(&self) -> &[f64] {
        &self.normalized
    }

    /// `u_k(n)` for every vertex.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    /// Largest `‖L u_k − λ_k u_k‖∞` against `graph`'s Laplacian.
    pub fn residual(&self, graph: &GridGraph) -> f64 {
        max_residual(graph.laplacian(), &self.eigenvalues, &self.eigenvectors)
    }

    /// `X̂(λ_k) = Σ_n x(n) u_k(n)`, i.e. `Uᵀx`.
    pub fn gft(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::mismatch(self.n(), x.len()));
        }
        let x = DVector::from_column_slice(x);
        Ok(self.eigenvectors.tr_mul(&x).iter().copied().collect())
    }

    /// `x(n) = Σ_k X̂(λ_k) u_k(n)`, i.e. `U X̂`.
    pub fn igft(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        if spectrum.len() != self.n() {
            return Err(Error::mismatch(self.n(), spectrum.len()));
        }
        let s = DVector::from_column_slice(spectrum);
        Ok((&self.eigenvectors * s).iter().copied().collect())
    }

    pub fn gft_signal(&self, x: &GraphSignal) -> Result<Vec<f64>> {
        if x.kind != self.kind {
            return Err(Error::Validation("signal lives on a different graph domain".into()));
        }
        self.gft(x.values())
    }

    /// `k,lambda,lambda_hat,coefficient` rows, `k` counted from 1.
    pub fn spectrum_csv(&self, spectrum: &[f64]) -> Result<String> {
        if spectrum.len() != self.n() {
            return Err(Error::mismatch(self.n(), spectrum.len()));
        }
        let mut out = String::from("k,lambda,lambda_hat,coefficient\n");
        for k in 0..self.n() {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?}",
                k + 1,
                self.eigenvalues[k],
                self.normalized[k],
                spectrum[k]
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::GridGraph;

    fn path(n: usize) -> GridGraph {
        GridGraph::from_weighted_edges(
            GraphKind::BusVertex,
            n,
            (0..n - 1).map(|i| (i, i + 1, 1.0)),
            (1..=n as u32).collect(),
        )
        .unwrap()
    }

    #[test]
    fn path3_spectrum() {
        // Characteristic polynomial of [[1,-1,0],[-1,2,-1],[0,-1,1]] is -λ(λ-1)(λ-3).
        let basis = eigendecompose(&path(3)).unwrap();
        let expected = [0.0, 1.0, 3.0];
        for (l, e) in basis.eigenvalues().iter().zip(expected) {
            assert!((l - e).abs() < 1e-10, "{l} vs {e}");
        }
        assert_eq!(basis.normalized_frequencies()[0], 0.0);
        assert_eq!(basis.normalized_frequencies()[2], 1.0);
        assert!((basis.normalized_frequencies()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_first_vector_is_positive() {
        let basis = eigendecompose(&path(6)).unwrap();
        let c = 1.0 / 6f64.sqrt();
        for v in basis.eigenvector(0) {
            assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_double_kernel() {
        let g = GridGraph::from_weighted_edges(
            GraphKind::BusVertex,
            4,
            [(0, 1, 1.0), (2, 3, 2.0)],
            vec![1, 2, 3, 4],
        )
        .unwrap();
        let basis = eigendecompose(&g).unwrap();
        let zeros = basis.eigenvalues().iter().filter(|l| l.abs() < 1e-8).count();
        assert_eq!(zeros, 2);
    }

    #[test]
    fn gft_of_constant_and_eigenvector() {
        let basis = eigendecompose(&path(5)).unwrap();
        let c = 2.0;
        let coeffs = basis.gft(&[c; 5]).unwrap();
        assert!((coeffs[0] - c * 5f64.sqrt()).abs() < 1e-12);
        assert!(coeffs[1..].iter().all(|s| s.abs() < 1e-12));

        let coeffs = basis.gft(&basis.eigenvector(3)).unwrap();
        for (k, s) in coeffs.iter().enumerate() {
            let e = if k == 3 { 1.0 } else { 0.0 };
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn igft_basics() {
        let basis = eigendecompose(&path(4)).unwrap();
        let x = basis.igft(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(x.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(basis.igft(&[0.0; 4]).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(basis.gft(&[1.0; 3]), Err(Error::DimensionMismatch { expected: 4, found: 3 })));
        assert!(basis.igft(&[1.0; 5]).is_err());
    }

    #[test]
    fn signal_validation() {
        let g = path(3);
        assert!(GraphSignal::new(&g, vec![0.0; 2], Units::Radians).is_err());
        assert!(GraphSignal::new(&g, vec![0.0, f64::NAN, 0.0], Units::Radians).is_err());
        let s = GraphSignal::new(&g, vec![1.0, 2.0, 3.0], Units::Radians).unwrap();
        let basis = eigendecompose(&g).unwrap();
        assert_eq!(basis.gft_signal(&s).unwrap().len(), 3);
    }

    #[test]
    fn spectrum_csv_layout() {
        let basis = eigendecompose(&path(3)).unwrap();
        let csv = basis.spectrum_csv(&[1.0, 0.0, 0.0]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,lambda,lambda_hat,coefficient"));
        assert!(lines.next().unwrap().starts_with("1,"));
        assert_eq!(csv.lines().count(), 4);
    }
}
