//! Backward (adjoint) equation with a frozen mean field, solved by Feynman–Kac
//! simulation, plus the gradient bound and the duality check along a solution.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::PhasePoint;
use crate::model::{MeanField, ModelAssumptions, TestFunction};
use crate::noise::{derive_seed, NoiseDriver};
use crate::particles::{Ensemble, Integrator, Snapshot, StepScratch};
use crate::reduce::MeanEstimate;

const FK_LABEL: u64 = 0xFEED;

/// Mean fields of a recorded forward run, one per time step.
///
/// Field `k` drives the interval `[k·dt, (k+1)·dt]`.
#[derive(Clone)]
pub struct FrozenFlow {
    integrator: Integrator,
    fields: Vec<Arc<MeanField>>,
}

impl FrozenFlow {
    pub fn from_fields(integrator: Integrator, fields: Vec<MeanField>) -> Result<Self> {
        let m = integrator.basis().mode_count();
        for f in &fields {
            crate::error::check_dim(m, f.modes())?;
        }
        Ok(Self {
            integrator,
            fields: fields.into_iter().map(Arc::new).collect(),
        })
    }

    /// The same field on every one of `steps` steps.
    pub fn constant(integrator: Integrator, field: MeanField, steps: usize) -> Result<Self> {
        crate::error::check_dim(integrator.basis().mode_count(), field.modes())?;
        let f = Arc::new(field);
        Ok(Self {
            integrator,
            fields: vec![f; steps],
        })
    }

    /// Run `ens` forward to `t`, storing each step's field (built from every
    /// `thin`-th particle) and a snapshot every `snapshot_every` steps.
    pub fn record(
        integrator: &Integrator,
        ens: &mut Ensemble,
        t: f64,
        thin: usize,
        snapshot_every: u64,
    ) -> Result<(Self, Vec<Snapshot>)> {
        if thin == 0 || snapshot_every == 0 {
            return Err(Error::invalid("thin", "thinning and cadence must be positive"));
        }
        if ens.step_index() != 0 {
            return Err(Error::InconsistentTrajectory(
                "recording must start at step 0".into(),
            ));
        }
        let n = integrator.steps_for(t)?;
        let m = ens.modes();
        let model = integrator.model();
        let mut fields = Vec::with_capacity(n as usize);
        let mut snaps = vec![ens.snapshot()];
        for k in 0..n {
            let full = MeanField::from_phase_states(model, m, ens.states())?;
            let field = if thin == 1 || model.kernel_is_linear() {
                full.clone()
            } else {
                let u: Vec<f64> = ens
                    .states()
                    .chunks_exact(2 * m)
                    .step_by(thin)
                    .flat_map(|r| r[..m].to_vec())
                    .collect();
                MeanField::new(model, m, &u, None)?
            };
            integrator.step_with_field(ens, &full)?;
            fields.push(Arc::new(field));
            if (k + 1) % snapshot_every == 0 {
                snaps.push(ens.snapshot());
            }
        }
        Ok((
            Self {
                integrator: integrator.clone(),
                fields,
            },
            snaps,
        ))
    }

    pub fn dt(&self) -> f64 {
        self.integrator.dt()
    }

    pub fn steps(&self) -> usize {
        self.fields.len()
    }

    pub fn horizon(&self) -> f64 {
        self.fields.len() as f64 * self.dt()
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integrator
    }

    /// Step index of time `s`, which must sit on the step grid inside the flow.
    fn index_of(&self, s: f64) -> Result<usize> {
        let k = (s / self.dt()).round();
        if !(s >= 0.0) || (k * self.dt() - s).abs() > 1e-9 * s.max(1.0) || k as usize > self.steps()
        {
            return Err(Error::FlowGap {
                from: s,
                to: self.horizon(),
            });
        }
        Ok(k as usize)
    }
}

/// Terminal data `ψ` at time `t` with the frozen flow driving the backward equation.
#[derive(Clone)]
pub struct AdjointProblem {
    pub psi: Arc<dyn TestFunction>,
    pub terminal_time: f64,
    pub flow: FrozenFlow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeynmanKacEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl AdjointProblem {
    pub fn new(psi: Arc<dyn TestFunction>, terminal_time: f64, flow: FrozenFlow) -> Result<Self> {
        let m = flow.integrator.basis().mode_count();
        if psi.based_modes() > m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: psi.based_modes(),
            });
        }
        flow.index_of(terminal_time)?;
        Ok(Self {
            psi,
            terminal_time,
            flow,
        })
    }

    /// `ψ(Z_t)` for each path started at `z` at time `s`; path `p` uses noise stream `p`.
    pub fn terminal_values(
        &self,
        s: f64,
        z: &[f64],
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let m = self.flow.integrator.basis().mode_count();
        crate::error::check_dim(2 * m, z.len())?;
        if n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be at least 1"));
        }
        if n_samples > u32::MAX as usize {
            return Err(Error::invalid("n_samples", "too many paths"));
        }
        let ks = self.flow.index_of(s)?;
        let kt = self.flow.index_of(self.terminal_time)?;
        if ks > kt {
            return Err(Error::invalid("s", "must not exceed the terminal time"));
        }
        let noise = NoiseDriver::new(derive_seed(seed, FK_LABEL));
        let integ = &self.flow.integrator;
        let fields = &self.flow.fields[ks..kt];
        let psi = &self.psi;
        let values: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .map_init(
                || (StepScratch::new(m), vec![0.0; 2 * m]),
                |(scratch, row), p| {
                    row.copy_from_slice(z);
                    for (j, f) in fields.iter().enumerate() {
                        integ.advance_one(row, f, &noise, p as u32, (ks + j) as u64, scratch);
                    }
                    psi.value(&row[..m], &row[m..])
                },
            )
            .collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp {
                step: kt as u64,
                particle: values.iter().position(|x| !x.is_finite()).unwrap_or(0),
            });
        }
        Ok(values)
    }
}

/// Monte Carlo estimate of `f(s, z) = E[ψ(Z_t) | Z_s = z]`.
pub fn solve_fk(
    prob: &AdjointProblem,
    s: f64,
    z: &PhasePoint,
    n_samples: usize,
    seed: u64,
) -> Result<FeynmanKacEstimate> {
    let vals = prob.terminal_values(s, &z.to_flat(), n_samples, seed)?;
    let est = MeanEstimate::of(&vals);
    Ok(FeynmanKacEstimate {
        mean: est.mean,
        stderr: est.stderr,
        n_samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    /// `∂f/∂z_i` in the layout `(u_1..u_m, v_1..v_m)`.
    pub grad: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.grad.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Error bar of the norm, propagated to first order.
    pub fn norm_stderr(&self) -> f64 {
        let n = self.norm();
        if n == 0.0 {
            return self.stderr.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        self.grad
            .iter()
            .zip(&self.stderr)
            .map(|(g, s)| (g / n * s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub const FD_STEP: f64 = 1e-3;

/// Central differences of the Feynman–Kac estimate with common random numbers.
pub fn grad_fk(
    prob: &AdjointProblem,
    s: f64,
    z: &PhasePoint,
    n_samples: usize,
    seed: u64,
) -> Result<GradientEstimate> {
    let base = z.to_flat();
    let mut grad = Vec::with_capacity(base.len());
    let mut stderr = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += FD_STEP;
        let mut minus = base.clone();
        minus[i] -= FD_STEP;
        let a = prob.terminal_values(s, &plus, n_samples, seed)?;
        let b = prob.terminal_values(s, &minus, n_samples, seed)?;
        let d: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) / (2.0 * FD_STEP))
            .collect();
        let est = MeanEstimate::of(&d);
        grad.push(est.mean);
        stderr.push(est.stderr);
    }
    Ok(GradientEstimate {
        grad,
        stderr,
        n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientBoundCert {
    pub kappa: f64,
    pub c_tilde: f64,
}

/// `κ = (ϖ/c + 2α)/(2θ)` with `c = 2θ`, and `C̃ = sqrt(max(|∇ψ|² + κψ²))`.
pub fn gradient_bound_cert(
    assumptions: &ModelAssumptions,
    psi: &dyn TestFunction,
) -> Result<GradientBoundCert> {
    let theta = assumptions.theta;
    if !(theta > 0.0) {
        return Err(Error::DegenerateEllipticity);
    }
    let c = 2.0 * theta;
    let kappa = (assumptions.varpi / c + 2.0 * assumptions.alpha) / (2.0 * theta);
    let energy = psi
        .gradient_energy_max(kappa)
        .unwrap_or_else(|| psi.sup_grad().powi(2) + kappa.max(0.0) * psi.sup_value().powi(2));
    Ok(GradientBoundCert {
        kappa,
        c_tilde: energy.max(0.0).sqrt(),
    })
}

/// Error budget constant multiplying `dt` in the duality check.
pub const DUALITY_DT_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub s: Vec<f64>,
    /// `I(s) = ∫ f(s, ·) dμ_s`.
    pub integral: Vec<f64>,
    /// Standard error of `I(s) − I(t)` from the per-atom differences.
    pub stderr: Vec<f64>,
    /// `I(t) = ∫ ψ dμ_t`.
    pub terminal: f64,
    pub max_deviation: f64,
    /// Allowed deviation at each `s`: `3·stderr + C·dt`.
    pub budget: Vec<f64>,
    pub dt: f64,
}

impl DualityReport {
    pub fn within_budget(&self) -> bool {
        self.integral
            .iter()
            .zip(&self.budget)
            .all(|(i, b)| (i - self.terminal).abs() <= *b)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "s,I,stderr,budget")?;
        for k in 0..self.s.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.s[k], self.integral[k], self.stderr[k], self.budget[k]
            )?;
        }
        Ok(())
    }
}

/// Evaluate `I(s)` at each snapshot of a solution recorded on the flow's step grid.
///
/// The last snapshot must sit at the terminal time and every snapshot must
/// hold the same particles.
pub fn duality_check(
    prob: &AdjointProblem,
    trajectory: &[Snapshot],
    n_samples: usize,
    seed: u64,
) -> Result<DualityReport> {
    let last = trajectory
        .last()
        .ok_or_else(|| Error::InconsistentTrajectory("empty trajectory".into()))?;
    if (last.time - prob.terminal_time).abs() > 1e-9 * prob.terminal_time.max(1.0) {
        return Err(Error::InconsistentTrajectory(
            "last snapshot is not at the terminal time".into(),
        ));
    }
    let m = last.modes;
    let n = last.len();
    if trajectory.iter().any(|s| s.modes != m || s.len() != n) {
        return Err(Error::InconsistentTrajectory(
            "snapshots differ in shape".into(),
        ));
    }
    let terminal_vals = last.evaluate(prob.psi.as_ref());
    let terminal = MeanEstimate::of(&terminal_vals).mean;
    let dt = prob.flow.dt();
    let mut report = DualityReport {
        s: Vec::new(),
        integral: Vec::new(),
        stderr: Vec::new(),
        terminal,
        max_deviation: 0.0,
        budget: Vec::new(),
        dt,
    };
    for (k, snap) in trajectory.iter().enumerate() {
        let atom_seed = derive_seed(seed, k as u64);
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let vals =
                    prob.terminal_values(snap.time, snap.particle(i), n_samples, derive_seed(atom_seed, i as u64))?;
                Ok(MeanEstimate::of(&vals).mean)
            })
            .collect::<Result<_>>()?;
        let d: Vec<f64> = terminal_vals.iter().zip(&f).map(|(a, b)| a - b).collect();
        let diff = MeanEstimate::of(&d);
        let integral = MeanEstimate::of(&f).mean;
        report.s.push(snap.time);
        report.integral.push(integral);
        report.stderr.push(diff.stderr);
        report.budget.push(3.0 * diff.stderr + DUALITY_DT_CONSTANT * dt);
        report.max_deviation = report.max_deviation.max((integral - terminal).abs());
    }
    Ok(report)
}
