use super::ModelSpec;
use crate::error::{Error, Result};
use crate::galerkin::FieldCoeffs;
use crate::measure::EmpiricalMeasure;
use crate::reduce::tree_sum_by;

/// Precomputed `u ↦ (K⋆ρ)(u)` for one measure over `u`-coefficients.
///
/// The linear part only needs the mean of `ρ`. The tanh part keeps the atoms
/// mode-major, with their tanh values, so per-particle sums are contiguous.
#[derive(Debug, Clone)]
pub struct MeanField {
    modes: usize,
    lin: f64,
    sat: f64,
    mean: Vec<f64>,
    count: usize,
    atoms: Vec<f64>,
    tanh_atoms: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl MeanField {
    /// `atoms` holds `count` rows of `modes` values; `None` weights mean uniform.
    pub fn new(
        model: &ModelSpec,
        modes: usize,
        atoms: &[f64],
        weights: Option<&[f64]>,
    ) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("modes", "must be positive"));
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if !atoms.len().is_multiple_of(modes) {
            return Err(Error::DimensionMismatch {
                expected: modes,
                found: atoms.len() % modes,
            });
        }
        let count = atoms.len() / modes;
        if let Some(w) = weights {
            crate::error::check_dim(count, w.len())?;
        }
        let lin = model.kernel.linear_strength();
        let sat = model.kernel.saturated_strength();
        let mean = (0..modes)
            .map(|k| match weights {
                None => tree_sum_by(count, &|j| atoms[j * modes + k]) / count as f64,
                Some(w) => tree_sum_by(count, &|j| w[j] * atoms[j * modes + k]),
            })
            .collect();
        let (t_atoms, t_tanh) = if sat != 0.0 {
            let mut a = vec![0.0; atoms.len()];
            for j in 0..count {
                for k in 0..modes {
                    a[k * count + j] = atoms[j * modes + k];
                }
            }
            let t = a.iter().map(|x| x.tanh()).collect();
            (a, t)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            modes,
            lin,
            sat,
            mean,
            count,
            atoms: t_atoms,
            tanh_atoms: t_tanh,
            weights: weights.map(|w| w.to_vec()),
        })
    }

    pub fn from_measure(model: &ModelSpec, rho: &EmpiricalMeasure) -> Result<Self> {
        if rho.is_uniform() {
            Self::new(model, rho.dim(), rho.atoms(), None)
        } else {
            Self::new(model, rho.dim(), rho.atoms(), Some(&rho.weights()))
        }
    }

    /// Ensemble layout: per particle `[u_1..u_m, v_1..v_m]`; only `u` is read.
    pub fn from_phase_states(model: &ModelSpec, modes: usize, states: &[f64]) -> Result<Self> {
        let n = states.len() / (2 * modes).max(1);
        let mut u = Vec::with_capacity(n * modes);
        for row in states.chunks_exact(2 * modes) {
            u.extend_from_slice(&row[..modes]);
        }
        Self::new(model, modes, &u, None)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn atom_count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Write `(K⋆ρ)(u)` into `out`.
    pub fn force(&self, u: &[f64], out: &mut [f64]) {
        for k in 0..self.modes {
            let mut f = -self.lin * (u[k] - self.mean[k]);
            if self.sat != 0.0 {
                f -= self.sat * self.tanh_sum(k, u[k]);
            }
            out[k] = f;
        }
    }

    /// `Σ_j w_j tanh(x − u_{j,k})` summed in atom order.
    fn tanh_sum(&self, k: usize, x: f64) -> f64 {
        let a = &self.atoms[k * self.count..(k + 1) * self.count];
        let t = &self.tanh_atoms[k * self.count..(k + 1) * self.count];
        let tx = x.tanh();
        // tanh(x − y) = (tx − ty)/(1 − tx·ty); the denominator is well conditioned when tx·ty ≤ 1/2.
        let term = |j: usize| {
            let p = tx * t[j];
            if p <= 0.5 {
                (tx - t[j]) / (1.0 - p)
            } else {
                (x - a[j]).tanh()
            }
        };
        match &self.weights {
            None => {
                let mut s = 0.0;
                for j in 0..self.count {
                    s += term(j);
                }
                s / self.count as f64
            }
            Some(w) => {
                let mut s = 0.0;
                for j in 0..self.count {
                    s += w[j] * term(j);
                }
                s
            }
        }
    }
}

/// `(K⋆ρ)(u) = Σ_j w_j K(u − u_j)`.
pub fn kernel_convolve(
    u: &FieldCoeffs,
    rho: &EmpiricalMeasure,
    model: &ModelSpec,
) -> Result<FieldCoeffs> {
    crate::error::check_dim(rho.dim(), u.len())?;
    let mf = MeanField::from_measure(model, rho)?;
    let mut out = vec![0.0; u.len()];
    mf.force(u.as_slice(), &mut out);
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::ModelFault { term: "kernel" });
    }
    Ok(out.into())
}
