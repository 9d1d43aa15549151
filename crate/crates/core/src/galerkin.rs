//! Dirichlet sine-basis truncation of `L²(0, L)`.
//!
//! Fields are stored as coefficient vectors in the orthonormal basis
//! `e_k(x) = sqrt(2/L) sin(kπx/L)`, on which the Laplacian acts diagonally
//! with eigenvalues `-(kπ/L)²`.

use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};

/// Spatial dimension of the physical domain. Only 1 is rendered.
pub const SPATIAL_DIM: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinBasis {
    box_length: f64,
    eigenvalues: Vec<f64>,
    free_transport: bool,
}

impl GalerkinBasis {
    pub fn new(box_length: f64, mode_count: usize) -> Result<Self> {
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::invalid("box_length", "must be positive and finite"));
        }
        if mode_count == 0 {
            return Err(Error::invalid("mode_count", "must be at least 1"));
        }
        let eigenvalues = (1..=mode_count)
            .map(|k| {
                let w = k as f64 * PI / box_length;
                w * w
            })
            .collect();
        Ok(Self {
            box_length,
            eigenvalues,
            free_transport: false,
        })
    }

    /// Testing switch: replaces every eigenvalue by zero so that the linear
    /// block is pure free transport.
    pub fn with_free_transport(mut self, on: bool) -> Self {
        self.free_transport = on;
        self
    }

    pub fn free_transport(&self) -> bool {
        self.free_transport
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `λ_k = (kπ/L)²`, independent of the free-transport switch.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalue entering the dynamics (zero under free transport).
    #[inline]
    pub fn effective_eigenvalue(&self, k: usize) -> f64 {
        if self.free_transport {
            0.0
        } else {
            self.eigenvalues[k]
        }
    }

    pub fn laplacian_apply(&self, u: &FieldCoeffs) -> Result<FieldCoeffs> {
        check_dim(self.mode_count(), u.len())?;
        Ok(FieldCoeffs(
            u.0.iter()
                .enumerate()
                .map(|(k, &c)| -self.effective_eigenvalue(k) * c)
                .collect(),
        ))
    }

    /// Physical-space value `Σ u_k sqrt(2/L) sin(kπx/L)`.
    pub fn eval_physical(&self, u: &FieldCoeffs, x: f64) -> Result<f64> {
        if !(0.0..=self.box_length).contains(&x) {
            return Err(Error::OutOfRange {
                what: "x",
                detail: format!("{x} not in [0, {}]", self.box_length),
            });
        }
        let norm = (2.0 / self.box_length).sqrt();
        Ok(u.0
            .iter()
            .enumerate()
            .map(|(k, &c)| c * norm * ((k + 1) as f64 * PI * x / self.box_length).sin())
            .sum())
    }
}

/// Coefficients of a field in the truncated basis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldCoeffs(pub Vec<f64>);

impl FieldCoeffs {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// H-norm, equal to the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }
}

impl From<Vec<f64>> for FieldCoeffs {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Orthogonal projection onto the first `n` modes.
pub fn project(u: &FieldCoeffs, n: usize) -> Result<FieldCoeffs> {
    if n == 0 || n > u.len() {
        return Err(Error::OutOfRange {
            what: "projection rank",
            detail: format!("{n} not in [1, {}]", u.len()),
        });
    }
    Ok(FieldCoeffs(u.0[..n].to_vec()))
}

/// A particle state `z = (u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub u: FieldCoeffs,
    pub v: FieldCoeffs,
}

impl PhasePoint {
    pub fn new(u: FieldCoeffs, v: FieldCoeffs) -> Result<Self> {
        check_dim(u.len(), v.len())?;
        Ok(Self { u, v })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            u: FieldCoeffs::zeros(m),
            v: FieldCoeffs::zeros(m),
        }
    }

    pub fn modes(&self) -> usize {
        self.u.len()
    }

    /// `|z|² = |u|² + |v|²`.
    pub fn norm_sq(&self) -> f64 {
        self.u.norm_sq() + self.v.norm_sq()
    }

    /// Flat layout `[u_1..u_m, v_1..v_m]` used by ensembles.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.u.0.clone();
        out.extend_from_slice(&self.v.0);
        out
    }

    pub fn from_flat(z: &[f64]) -> Result<Self> {
        if !z.len().is_multiple_of(2) {
            return Err(Error::invalid("phase point", "flat length must be even"));
        }
        let m = z.len() / 2;
        Ok(Self {
            u: FieldCoeffs(z[..m].to_vec()),
            v: FieldCoeffs(z[m..].to_vec()),
        })
    }
}
