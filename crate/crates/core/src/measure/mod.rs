//! Empirical measures, the 1-Wasserstein distance, and moment monitors.

mod lyapunov;
mod w1;

pub use lyapunov::{
    equicontinuity_check, lyapunov_track, EquicontinuityReport, LyapunovFlag, LyapunovMonitor,
};
pub use w1::{
    coupling_cost, w1_exact, w1_exact_capped, w1_marginal_1d, w1_sliced, w1_sliced_with,
    w1_weighted_1d, Marginal1d, ProjectedSample, SlicedOptions, SlicedProjector, W1Method,
    W1Report, DEFAULT_EXACT_CAP, DEFAULT_PROJECTIONS,
};

use crate::error::{Error, Result};
use crate::galerkin::PhasePoint;
use crate::reduce::tree_sum_by;

const WEIGHT_TOL: f64 = 1e-12;

/// A finite atomic probability measure on `R^dim`.
///
/// Atoms are stored row-major. Uniform weights are implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if !atoms.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: atoms.len() % dim,
            });
        }
        Ok(Self {
            dim,
            atoms,
            weights: None,
        })
    }

    pub fn weighted(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut mu = Self::uniform(dim, atoms)?;
        if weights.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                found: weights.len(),
            });
        }
        let total = tree_sum_by(weights.len(), &|i| weights[i]);
        if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Unnormalized { total });
        }
        mu.weights = Some(weights);
        Ok(mu)
    }

    pub fn from_points(points: &[PhasePoint]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyMeasure)?;
        let dim = 2 * first.modes();
        let mut atoms = Vec::with_capacity(dim * points.len());
        for p in points {
            crate::error::check_dim(dim, 2 * p.modes())?;
            atoms.extend(p.to_flat());
        }
        Self::uniform(dim, atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    #[inline]
    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Componentwise mean, reduced in a fixed order.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.len();
        (0..self.dim)
            .map(|k| match &self.weights {
                None => tree_sum_by(n, &|i| self.atoms[i * self.dim + k]) / n as f64,
                Some(w) => tree_sum_by(n, &|i| w[i] * self.atoms[i * self.dim + k]),
            })
            .collect()
    }

    /// `M_1(μ) = Σ w_j |z_j|`.
    pub fn first_moment(&self) -> f64 {
        self.integrate(|z| z.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// `∫ f dμ`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        tree_sum_by(self.len(), &|i| self.weight(i) * f(self.atom(i)))
    }

    /// Shift every atom by `c`.
    pub fn translated(&self, c: &[f64]) -> Result<Self> {
        crate::error::check_dim(self.dim, c.len())?;
        let mut atoms = self.atoms.clone();
        for row in atoms.chunks_mut(self.dim) {
            for (x, s) in row.iter_mut().zip(c) {
                *x += s;
            }
        }
        Ok(Self {
            dim: self.dim,
            atoms,
            weights: self.weights.clone(),
        })
    }

    /// Keep the listed coordinates of every atom.
    pub fn select_coords(&self, coords: &[usize]) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|&c| c >= self.dim) {
            return Err(Error::invalid("coords", "empty or out of range"));
        }
        let mut atoms = Vec::with_capacity(self.len() * coords.len());
        for i in 0..self.len() {
            let a = self.atom(i);
            atoms.extend(coords.iter().map(|&c| a[c]));
        }
        Ok(Self {
            dim: coords.len(),
            atoms,
            weights: self.weights.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(matches!(
            EmpiricalMeasure::uniform(2, vec![]),
            Err(Error::EmptyMeasure)
        ));
        assert!(EmpiricalMeasure::uniform(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(matches!(
            EmpiricalMeasure::weighted(1, vec![0.0, 1.0], vec![0.5, 0.6]),
            Err(Error::Unnormalized { .. })
        ));
        assert!(EmpiricalMeasure::weighted(1, vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        let mu = EmpiricalMeasure::weighted(1, vec![0.0, 2.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(mu.mean(), vec![1.5]);
    }

    #[test]
    fn moments_and_translation() {
        let mu = EmpiricalMeasure::uniform(2, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(mu.first_moment(), 2.5);
        assert_eq!(mu.mean(), vec![1.5, 2.0]);
        let t = mu.translated(&[1.0, -1.0]).unwrap();
        assert_eq!(t.atom(1), &[1.0, -1.0]);
        let s = mu.select_coords(&[1]).unwrap();
        assert_eq!(s.atoms(), &[4.0, 0.0]);
        let total: f64 = mu.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
