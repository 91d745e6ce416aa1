//! Smoothness measures and the vertex-frequency energy distribution.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;
use crate::topology::GridGraph;

/// Relative guard: `|x(n)| <= MASK_RATIO * max|x|` leaves `s(n)` undefined.
pub const MASK_RATIO: f64 = 1e-9;

/// Rayleigh quotient `xᵀLx / xᵀx`.
pub fn global_smoothness(g: &GridGraph, x: &[f64]) -> Result<f64> {
    let lx = g.apply_laplacian(x)?;
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(Error::Undefined("global smoothness of the zero signal".into()));
    }
    let quad: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
    Ok(quad / energy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSmoothness {
    /// `s(n)`; `NaN` where undefined.
    pub s: Vec<f64>,
    pub defined: Vec<bool>,
}

impl LocalSmoothness {
    pub fn get(&self, n: usize) -> Option<f64> {
        self.defined[n].then_some(self.s[n])
    }
}

/// `s(n) = (Lx)(n) / x(n)` wherever `x(n)` clears the guard.
pub fn local_smoothness(g: &GridGraph, x: &[f64]) -> Result<LocalSmoothness> {
    let lx = g.apply_laplacian(x)?;
    Ok(local_smoothness_from(&lx, x))
}

pub(crate) fn local_smoothness_from(lx: &[f64], x: &[f64]) -> LocalSmoothness {
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let guard = MASK_RATIO * peak;
    let mut s = Vec::with_capacity(x.len());
    let mut defined = Vec::with_capacity(x.len());
    for (&l, &v) in lx.iter().zip(x) {
        let ok = v.abs() > guard;
        defined.push(ok);
        s.push(if ok { l / v } else { f64::NAN });
    }
    LocalSmoothness { s, defined }
}

/// `E(n, k)`: row `n` is a vertex, column `k` a spectral index.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDistribution {
    energy: DMatrix<f64>,
}

impl EnergyDistribution {
    pub fn n(&self) -> usize {
        self.energy.nrows()
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.energy[(n, k)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.energy
    }

    /// `Σ_k E(n, k)`, which recovers `x(n)²`.
    pub fn vertex_marginal(&self) -> Vec<f64> {
        self.energy.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.energy.iter().sum()
    }

    /// `n,k,energy` rows with both indices counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,k,energy\n");
        for n in 0..self.n() {
            for k in 0..self.n() {
                let _ = writeln!(out, "{},{},{:?}", n + 1, k + 1, self.energy[(n, k)]);
            }
        }
        out
    }
}

/// `E(n,k) = x(n) u_k(n) X̂(λ_k)`, the factorised form of
/// `Σ_m x(n) x(m) u_k(m) u_k(n)`.
pub fn vfed(basis: &SpectralBasis, x: &[f64]) -> Result<EnergyDistribution> {
    let spectrum = basis.gft(x)?;
    let u = basis.eigenvectors();
    let n = basis.n();
    let energy = DMatrix::from_fn(n, n, |row, k| x[row] * u[(row, k)] * spectrum[k]);
    Ok(EnergyDistribution { energy })
}

/// `Σ_k E(n,k)` without materialising the full distribution.
pub fn vfed_marginal(basis: &SpectralBasis, x: &[f64]) -> Result<Vec<f64>> {
    let spectrum = basis.gft(x)?;
    let back = basis.igft(&spectrum)?;
    Ok(x.iter().zip(back).map(|(a, b)| a * b).collect())
}

/// `m(n) = Σ_k |E_after(n,k) − E_before(n,k)|`.
pub fn vfed_difference_marginal(after: &EnergyDistribution, before: &EnergyDistribution) -> Result<Vec<f64>> {
    if after.n() != before.n() {
        return Err(Error::mismatch(before.n(), after.n()));
    }
    let diff = &after.energy - &before.energy;
    Ok(diff.row_iter().map(|r| r.iter().map(|v| v.abs()).sum()).collect())
}
