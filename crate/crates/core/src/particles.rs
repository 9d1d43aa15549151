//! The N-particle system: ensembles, the splitting integrator, and synchronous coupling.

mod io;

pub use io::{read_frame, write_csv, write_csv_header, write_csv_rows, write_frame};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::{GalerkinBasis, PhasePoint};
use crate::measure::EmpiricalMeasure;
use crate::model::{MeanField, ModelSpec, TestFunction};
use crate::noise::{derive_seed, NoiseDriver};

const INIT_LABEL: u64 = 0x1A17;
const NOISE_LABEL: u64 = 0x2015E;

/// Law of the initial particle states over `z = (u_1..u_m, v_1..v_m)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    PointMass { z: Vec<f64> },
    /// Independent coordinates.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    /// With probability `weight` around `a`, otherwise around `b`; isotropic spread.
    TwoCluster {
        a: Vec<f64>,
        b: Vec<f64>,
        spread: f64,
        weight: f64,
    },
}

impl InitialDistribution {
    pub fn dim(&self) -> usize {
        match self {
            InitialDistribution::PointMass { z } => z.len(),
            InitialDistribution::Gaussian { mean, .. } => mean.len(),
            InitialDistribution::TwoCluster { a, .. } => a.len(),
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        crate::error::check_dim(2 * m, self.dim())?;
        match self {
            InitialDistribution::PointMass { z } => {
                if z.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("z", "must be finite"));
                }
            }
            InitialDistribution::Gaussian { mean, var } => {
                crate::error::check_dim(mean.len(), var.len())?;
                if var.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
                    return Err(Error::invalid("var", "must be finite and nonnegative"));
                }
            }
            InitialDistribution::TwoCluster {
                a,
                b,
                spread,
                weight,
            } => {
                crate::error::check_dim(a.len(), b.len())?;
                if !(*spread >= 0.0) {
                    return Err(Error::invalid("spread", "must be nonnegative"));
                }
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::invalid("weight", "must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            InitialDistribution::PointMass { z } => out.copy_from_slice(z),
            InitialDistribution::Gaussian { mean, var } => {
                for (o, (mu, s2)) in out.iter_mut().zip(mean.iter().zip(var)) {
                    let g: f64 = rng.sample(StandardNormal);
                    *o = mu + s2.sqrt() * g;
                }
            }
            InitialDistribution::TwoCluster {
                a,
                b,
                spread,
                weight,
            } => {
                let pick: f64 = rng.random();
                let c = if pick < *weight { a } else { b };
                for (o, mu) in out.iter_mut().zip(c) {
                    let g: f64 = rng.sample(StandardNormal);
                    *o = mu + spread * g;
                }
            }
        }
    }
}

/// `N` particles, the clock, and the noise streams they consume.
///
/// Particle `i` occupies `states[i*2m..(i+1)*2m]` as `[u_1..u_m, v_1..v_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    modes: usize,
    states: Vec<f64>,
    time: f64,
    step_index: u64,
    noise: NoiseDriver,
    streams: Vec<u32>,
    pub model_ref: String,
}

pub fn init_ensemble(
    dist: &InitialDistribution,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::invalid("N", "must be at least 1"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    if n > u32::MAX as usize {
        return Err(Error::invalid("N", "too many particles for the noise streams"));
    }
    dist.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_LABEL));
    let mut states = vec![0.0; n * 2 * m];
    for row in states.chunks_exact_mut(2 * m) {
        dist.sample(&mut rng, row);
    }
    Ok(Ensemble {
        modes: m,
        states,
        time: 0.0,
        step_index: 0,
        noise: NoiseDriver::new(derive_seed(seed, NOISE_LABEL)),
        streams: (0..n as u32).collect(),
        model_ref: String::new(),
    })
}

impl Ensemble {
    /// Build from explicit states with the given noise seed.
    pub fn from_states(m: usize, states: Vec<f64>, seed: u64) -> Result<Self> {
        if m == 0 || states.is_empty() || !states.len().is_multiple_of(2 * m) {
            return Err(Error::invalid("states", "need a positive multiple of 2m values"));
        }
        let n = states.len() / (2 * m);
        Ok(Self {
            modes: m,
            states,
            time: 0.0,
            step_index: 0,
            noise: NoiseDriver::new(derive_seed(seed, NOISE_LABEL)),
            streams: (0..n as u32).collect(),
            model_ref: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len() / (2 * self.modes)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn noise(&self) -> &NoiseDriver {
        &self.noise
    }

    pub fn streams(&self) -> &[u32] {
        &self.streams
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [f64] {
        &mut self.states
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * 2 * self.modes..(i + 1) * 2 * self.modes]
    }

    pub fn point(&self, i: usize) -> PhasePoint {
        PhasePoint::from_flat(self.particle(i)).expect("row has even length")
    }

    /// Shift every particle by `c` (length `2m`).
    pub fn translate(&mut self, c: &[f64]) -> Result<()> {
        crate::error::check_dim(2 * self.modes, c.len())?;
        for row in self.states.chunks_exact_mut(c.len()) {
            for (x, s) in row.iter_mut().zip(c) {
                *x += s;
            }
        }
        Ok(())
    }

    /// Reorder particles so that new particle `k` is old particle `perm[k]`,
    /// carrying each particle's noise stream along.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        crate::error::check_dim(self.len(), perm.len())?;
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("perm", "not a permutation"));
            }
        }
        let mut out = self.clone();
        for (k, &p) in perm.iter().enumerate() {
            out.states[k * 2 * self.modes..(k + 1) * 2 * self.modes]
                .copy_from_slice(self.particle(p));
            out.streams[k] = self.streams[p];
        }
        Ok(out)
    }

    pub fn to_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(2 * self.modes, self.states.clone())
            .expect("ensemble is nonempty")
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            time: self.time,
            step_index: self.step_index,
            modes: self.modes,
            states: self.states.clone(),
        }
    }
}

/// A recorded ensemble state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub step_index: u64,
    pub modes: usize,
    pub states: Vec<f64>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.states.len() / (2 * self.modes)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * 2 * self.modes..(i + 1) * 2 * self.modes]
    }

    /// `V(Z_i) = 1 + |Z_i|²` per particle.
    pub fn lyapunov_values(&self) -> Vec<f64> {
        self.states
            .chunks_exact(2 * self.modes)
            .map(|r| 1.0 + r.iter().map(|x| x * x).sum::<f64>())
            .collect()
    }

    /// `φ(Z_i)` per particle.
    pub fn evaluate(&self, phi: &dyn TestFunction) -> Vec<f64> {
        let m = self.modes;
        self.states
            .par_chunks_exact(2 * m)
            .map(|r| phi.value(&r[..m], &r[m..]))
            .collect()
    }

    pub fn to_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(2 * self.modes, self.states.clone())
            .expect("snapshot is nonempty")
    }

    /// Values of coordinate `c` of every particle (`c < m` is `u_{c+1}`).
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.states
            .chunks_exact(2 * self.modes)
            .map(|r| r[c])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Exact linear block, then an explicit force and noise kick.
    #[default]
    SplittingExactLinear,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
}

impl IntegratorConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::default(),
        }
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", "must be finite and positive"));
        }
        if self.dt * model.gamma / model.epsilon >= 10.0 {
            return Err(Error::invalid("dt", "dt * gamma / epsilon must stay below 10"));
        }
        Ok(())
    }
}

/// `exp(t [[0, 1], [−p, −q]])` as `[e00, e01, e10, e11]`.
pub fn linear_block_exp(p: f64, q: f64, t: f64) -> [f64; 4] {
    let tau = -0.5 * q;
    let s2 = 0.25 * q * q - p;
    let x = s2 * t * t;
    // c = cosh(st), sh = sinh(st)/s, continued analytically through s² < 0.
    let (c, sh) = if x.abs() < 1e-4 {
        (
            1.0 + x / 2.0 + x * x / 24.0 + x * x * x / 720.0,
            t * (1.0 + x / 6.0 + x * x / 120.0 + x * x * x / 5040.0),
        )
    } else if s2 > 0.0 {
        let s = s2.sqrt();
        ((s * t).cosh(), (s * t).sinh() / s)
    } else {
        let w = (-s2).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    };
    let e = (tau * t).exp();
    [
        e * (c + 0.5 * q * sh),
        e * sh,
        -e * p * sh,
        e * (c - 0.5 * q * sh),
    ]
}

/// Steps ensembles of one model with one time step.
#[derive(Debug, Clone)]
pub struct Integrator {
    model: ModelSpec,
    basis: GalerkinBasis,
    cfg: IntegratorConfig,
    blocks: Vec<[f64; 4]>,
    eigen: Vec<f64>,
}

impl Integrator {
    pub fn new(model: &ModelSpec, basis: &GalerkinBasis, cfg: IntegratorConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate(model)?;
        let eps = model.epsilon;
        let eigen: Vec<f64> = (0..basis.mode_count())
            .map(|k| basis.effective_eigenvalue(k))
            .collect();
        let blocks = eigen
            .iter()
            .map(|&lam| linear_block_exp(lam / eps, model.gamma / eps, cfg.dt))
            .collect();
        Ok(Self {
            model: model.clone(),
            basis: basis.clone(),
            cfg,
            blocks,
            eigen,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn basis(&self) -> &GalerkinBasis {
        &self.basis
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    /// Number of steps covering `t`, which must be an integer multiple of `dt`.
    pub fn steps_for(&self, t: f64) -> Result<u64> {
        let n = (t / self.cfg.dt).round();
        if !(t >= 0.0) || (n * self.cfg.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::invalid("T", "must be a nonnegative multiple of dt"));
        }
        Ok(n as u64)
    }

    /// Advance one step.
    pub fn step(&self, ens: &mut Ensemble) -> Result<()> {
        let m = ens.modes;
        crate::error::check_dim(self.basis.mode_count(), m)?;
        let mf = MeanField::from_phase_states(&self.model, m, &ens.states)?;
        self.step_with_field(ens, &mf)
    }

    /// Advance one step with a given mean field instead of the ensemble's own.
    pub fn step_with_field(&self, ens: &mut Ensemble, mf: &MeanField) -> Result<()> {
        let m = ens.modes;
        crate::error::check_dim(self.basis.mode_count(), m)?;
        crate::error::check_dim(mf.modes(), m)?;
        let step = ens.step_index;
        let noise = ens.noise;
        let streams = &ens.streams;
        ens.states
            .par_chunks_exact_mut(2 * m)
            .enumerate()
            .for_each_init(
                || StepScratch::new(m),
                |scratch, (i, row)| {
                    self.advance_one(row, mf, &noise, streams[i], step, scratch);
                },
            );
        if let Some(bad) = ens.states.iter().position(|x| !x.is_finite()) {
            return Err(Error::BlowUp {
                step,
                particle: bad / (2 * m),
            });
        }
        ens.step_index += 1;
        ens.time += self.cfg.dt;
        Ok(())
    }

    /// Advance one particle state `[u, v]` by one step under the field `mf`.
    pub(crate) fn advance_one(
        &self,
        row: &mut [f64],
        mf: &MeanField,
        noise: &NoiseDriver,
        stream: u32,
        step: u64,
        scratch: &mut StepScratch,
    ) {
        let m = row.len() / 2;
        let dt = self.cfg.dt;
        let eps = self.model.epsilon;
        let sqdt = dt.sqrt();
        let model = &self.model;
        let (u, v) = row.split_at_mut(m);
        let StepScratch { force, kpart, xi } = scratch;
        model.psi_grad.apply(u, force);
        mf.force(u, kpart);
        noise.fill(stream, step, xi);
        for k in 0..m {
            let f = force[k] + kpart[k];
            let s = model.sigma.entry(u[k]);
            let kick = (dt * f + s * sqdt * xi[k]) / eps;
            let (u0, v0) = (u[k], v[k]);
            match self.cfg.scheme {
                Scheme::SplittingExactLinear => {
                    let e = self.blocks[k];
                    u[k] = e[0] * u0 + e[1] * v0;
                    v[k] = e[2] * u0 + e[3] * v0 + kick;
                }
                Scheme::EulerMaruyama => {
                    u[k] = u0 + dt * v0;
                    v[k] = v0 + dt * (-self.eigen[k] * u0 - model.gamma * v0) / eps + kick;
                }
            }
        }
    }

    /// Step `n_steps` times, calling `observer` on the initial state and after every step.
    pub fn run_observed<F>(&self, ens: &mut Ensemble, n_steps: u64, mut observer: F) -> Result<()>
    where
        F: FnMut(&Ensemble) -> Result<()>,
    {
        observer(ens)?;
        for _ in 0..n_steps {
            self.step(ens)?;
            observer(ens)?;
        }
        Ok(())
    }

    /// Run to `t` (relative to the current clock), recording every `snapshot_every` steps.
    pub fn run(&self, ens: &mut Ensemble, t: f64, snapshot_every: u64) -> Result<Vec<Snapshot>> {
        if snapshot_every == 0 {
            return Err(Error::invalid("snapshot_every", "must be at least 1"));
        }
        let n = self.steps_for(t)?;
        let mut snaps = Vec::with_capacity((n / snapshot_every + 1) as usize);
        let mut k = 0u64;
        self.run_observed(ens, n, |e| {
            if k.is_multiple_of(snapshot_every) {
                snaps.push(e.snapshot());
            }
            k += 1;
            Ok(())
        })?;
        Ok(snaps)
    }
}

pub(crate) struct StepScratch {
    force: Vec<f64>,
    kpart: Vec<f64>,
    xi: Vec<f64>,
}

impl StepScratch {
    pub(crate) fn new(m: usize) -> Self {
        Self {
            force: vec![0.0; m],
            kpart: vec![0.0; m],
            xi: vec![0.0; m],
        }
    }
}

/// Two ensembles driven by identical noise increments.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub a: Ensemble,
    pub b: Ensemble,
}

/// Make `b` consume exactly the noise of `a`: same seed, streams, and clock.
pub fn couple(a: Ensemble, mut b: Ensemble) -> Result<CoupledPair> {
    crate::error::check_dim(a.modes, b.modes)?;
    crate::error::check_dim(a.len(), b.len())?;
    b.noise = a.noise;
    b.streams = a.streams.clone();
    b.time = a.time;
    b.step_index = a.step_index;
    Ok(CoupledPair { a, b })
}

impl CoupledPair {
    pub fn step(&mut self, integ: &Integrator) -> Result<()> {
        integ.step(&mut self.a)?;
        integ.step(&mut self.b)
    }
}
