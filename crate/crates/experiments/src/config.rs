//! Run configuration: a TOML file with one table per component, dotted-key
//! overrides, and a content digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kinetic_mf::fpe::{FpeConfig, PhaseGrid};
use kinetic_mf::galerkin::GalerkinBasis;
use kinetic_mf::model::ModelSpec;
use kinetic_mf::particles::{InitialDistribution, IntegratorConfig, Scheme};

use crate::error::{ExpError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker count; 0 uses the machine default.
    pub threads: usize,
    pub galerkin: GalerkinSection,
    pub model: ModelSection,
    pub integrator: IntegratorSection,
    pub fpe: FpeSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            out: PathBuf::from("runs"),
            threads: 0,
            galerkin: GalerkinSection::default(),
            model: ModelSection::default(),
            integrator: IntegratorSection::default(),
            fpe: FpeSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GalerkinSection {
    pub box_length: f64,
    pub modes: usize,
    pub free_transport: bool,
}

impl Default for GalerkinSection {
    fn default() -> Self {
        Self {
            box_length: 4.0,
            modes: 1,
            free_transport: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Saturated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub gamma: f64,
    pub epsilon: f64,
    /// Linear model: `K(w) = −κw`, `∇Ψ(u) = −a·u`, constant `σ`.
    pub kappa: f64,
    pub a: f64,
    pub sigma: f64,
    /// Saturated model: `K(w) = −κ_b tanh w`, `∇Ψ(u) = −b tanh u`, `σ = s0 + s1 tanh u`.
    pub kappa_b: f64,
    pub psi_b: f64,
    pub s0: f64,
    pub s1: f64,
    pub moment_budget: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Linear,
            gamma: 1.0,
            epsilon: 1.0,
            kappa: 0.4,
            a: 0.2,
            sigma: 0.5,
            kappa_b: 0.5,
            psi_b: 0.3,
            s0: 0.5,
            s1: 0.1,
            moment_budget: kinetic_mf::model::DEFAULT_MOMENT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Splitting,
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub dt: f64,
    pub scheme: SchemeName,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            dt: 0.01,
            scheme: SchemeName::Splitting,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpeSection {
    pub r_u: f64,
    pub r_v: f64,
    pub n_u: usize,
    pub n_v: usize,
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl Default for FpeSection {
    fn default() -> Self {
        Self {
            r_u: 2.0,
            r_v: 2.0,
            n_u: 128,
            n_v: 128,
            dt: 0.005,
            picard_tol: 1e-9,
            picard_max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Point,
    Gaussian,
    TwoCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Analytic,
    LargeN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub n: usize,
    pub t: f64,
    pub snapshot_every: u64,
    pub init: InitKind,
    /// Per-coordinate mean in the layout `[u_1..u_m, v_1..v_m]`; empty means zero.
    pub init_mean: Vec<f64>,
    /// Per-coordinate variance; empty means `0.25` everywhere.
    pub init_var: Vec<f64>,
    /// Second cluster center for `two-cluster`; empty means `−init_mean`.
    pub init_mean_b: Vec<f64>,
    /// Isotropic standard deviation of each `two-cluster` component.
    pub init_spread: f64,
    pub init_weight: f64,
    pub convergence: ConvergenceSection,
    pub stability: StabilitySection,
    pub weak_residual: WeakResidualSection,
    pub bridge: BridgeSection,
    pub adjoint: AdjointSection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n: 1024,
            t: 1.0,
            snapshot_every: 10,
            init: InitKind::Gaussian,
            init_mean: Vec::new(),
            init_var: Vec::new(),
            init_mean_b: Vec::new(),
            init_spread: 0.3,
            init_weight: 0.5,
            convergence: ConvergenceSection::default(),
            stability: StabilitySection::default(),
            weak_residual: WeakResidualSection::default(),
            bridge: BridgeSection::default(),
            adjoint: AdjointSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub sweep_n: Vec<usize>,
    pub repetitions: usize,
    pub reference: ReferenceKind,
    /// Reference sample size as a multiple of the largest swept `N`.
    pub reference_factor: usize,
    pub projections: usize,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            sweep_n: vec![64, 256, 1024, 4096],
            repetitions: 8,
            reference: ReferenceKind::Analytic,
            reference_factor: 4,
            projections: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    /// Translation between the two initial ensembles; empty means `0.25·e_1`.
    pub shift: Vec<f64>,
    /// Slack factor on the exponential bound.
    pub slack: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            shift: Vec::new(),
            slack: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakResidualSection {
    /// Number of refinement levels; level `l` uses `4^l·N` particles and `dt/2^l`.
    pub levels: usize,
    pub repetitions: usize,
    /// Allowed deviation of each refinement ratio from `1/2`, as a factor.
    pub ratio_tolerance: f64,
}

impl Default for WeakResidualSection {
    fn default() -> Self {
        Self {
            levels: 3,
            repetitions: 8,
            ratio_tolerance: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeSection {
    /// Checkpoint spacing in time.
    pub checkpoint_dt: f64,
    pub bootstrap: usize,
    /// Also solve on a grid with half the resolution and report the gap.
    pub coarse_comparison: bool,
    /// Horizon of the stationary self-consistency run (linear model only).
    pub stationary_t: f64,
}

impl Default for BridgeSection {
    fn default() -> Self {
        Self {
            checkpoint_dt: 0.5,
            bootstrap: 16,
            coarse_comparison: true,
            stationary_t: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdjointSection {
    pub probes: usize,
    pub fk_samples: usize,
    pub duality_samples: usize,
    /// Number of `s` values in the duality trace (including both ends).
    pub duality_points: usize,
    pub psi_center: Vec<f64>,
    pub psi_radius: f64,
    /// Mean field built from every `thin`-th particle.
    pub thin: usize,
}

impl Default for AdjointSection {
    fn default() -> Self {
        Self {
            probes: 20,
            fk_samples: 2000,
            duality_samples: 256,
            duality_points: 6,
            psi_center: Vec::new(),
            psi_radius: 1.5,
            thin: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    /// Load `path` (or defaults when `None`) and apply `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ExpError::config(format!("{}: {e}", p.display())))?;
                parse_table(&text)?
            }
            None => toml::Table::new(),
        };
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ExpError::config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical config with the output directory and worker
    /// count cleared, since neither affects results.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.threads = 0;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn check(&self) -> Result<()> {
        let m = self.galerkin.modes;
        if m == 0 {
            return Err(ExpError::config("galerkin.modes must be at least 1"));
        }
        let e = &self.experiment;
        for (name, v) in [
            ("experiment.init_mean", &e.init_mean),
            ("experiment.init_var", &e.init_var),
            ("experiment.init_mean_b", &e.init_mean_b),
            ("experiment.stability.shift", &e.stability.shift),
            ("experiment.adjoint.psi_center", &e.adjoint.psi_center),
        ] {
            if !v.is_empty() && v.len() != 2 * m {
                return Err(ExpError::config(format!(
                    "{name} has {} entries, expected {}",
                    v.len(),
                    2 * m
                )));
            }
        }
        if e.n == 0 || e.snapshot_every == 0 {
            return Err(ExpError::config("experiment.n and snapshot_every must be positive"));
        }
        if !(e.t >= 0.0 && e.t.is_finite()) {
            return Err(ExpError::config("experiment.t must be finite and nonnegative"));
        }
        let c = &e.convergence;
        if c.sweep_n.is_empty() || c.sweep_n.contains(&0) || c.repetitions == 0 {
            return Err(ExpError::config("convergence sweep and repetitions must be nonempty"));
        }
        if c.reference_factor == 0 || c.projections == 0 {
            return Err(ExpError::config("convergence reference_factor and projections must be positive"));
        }
        let w = &e.weak_residual;
        if w.levels == 0 || w.repetitions == 0 || !(w.ratio_tolerance >= 1.0) {
            return Err(ExpError::config("weak_residual needs levels, repetitions and a tolerance ≥ 1"));
        }
        let a = &e.adjoint;
        if a.probes == 0 || a.fk_samples < 2 || a.duality_samples == 0 || a.duality_points < 2 || a.thin == 0 {
            return Err(ExpError::config("adjoint sample counts must be positive"));
        }
        if !(a.psi_radius > 0.0) {
            return Err(ExpError::config("adjoint.psi_radius must be positive"));
        }
        if !(e.bridge.checkpoint_dt > 0.0) || e.bridge.bootstrap == 0 {
            return Err(ExpError::config("bridge.checkpoint_dt and bootstrap must be positive"));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<GalerkinBasis> {
        Ok(GalerkinBasis::new(self.galerkin.box_length, self.galerkin.modes)?
            .with_free_transport(self.galerkin.free_transport))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let s = &self.model;
        let mut spec = match s.kind {
            ModelKind::Linear => ModelSpec::linear(s.kappa, s.a, s.gamma, s.sigma),
            ModelKind::Saturated => ModelSpec::saturated(s.kappa_b, s.psi_b, s.gamma, s.s0, s.s1),
        }
        .with_epsilon(s.epsilon);
        spec.moment_budget = s.moment_budget;
        spec.validate()?;
        Ok(spec)
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let mut c = IntegratorConfig::new(self.integrator.dt);
        c.scheme = match self.integrator.scheme {
            SchemeName::Splitting => Scheme::SplittingExactLinear,
            SchemeName::EulerMaruyama => Scheme::EulerMaruyama,
        };
        c
    }

    pub fn init_mean(&self) -> Vec<f64> {
        or_fill(&self.experiment.init_mean, 2 * self.galerkin.modes, 0.0)
    }

    pub fn init_var(&self) -> Vec<f64> {
        or_fill(&self.experiment.init_var, 2 * self.galerkin.modes, 0.25)
    }

    pub fn initial_distribution(&self) -> InitialDistribution {
        let e = &self.experiment;
        let mean = self.init_mean();
        match e.init {
            InitKind::Point => InitialDistribution::PointMass { z: mean },
            InitKind::Gaussian => InitialDistribution::Gaussian {
                mean,
                var: self.init_var(),
            },
            InitKind::TwoCluster => {
                let b = if e.init_mean_b.is_empty() {
                    mean.iter().map(|x| -x).collect()
                } else {
                    e.init_mean_b.clone()
                };
                InitialDistribution::TwoCluster {
                    a: mean,
                    b,
                    spread: e.init_spread,
                    weight: e.init_weight,
                }
            }
        }
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        let f = &self.fpe;
        Ok(PhaseGrid::new(f.r_u, f.r_v, f.n_u, f.n_v)?)
    }

    pub fn fpe_config(&self) -> FpeConfig {
        let mut c = FpeConfig::new(self.fpe.dt);
        c.picard_tol = self.fpe.picard_tol;
        c.picard_max_iter = self.fpe.picard_max_iter;
        c
    }
}

fn or_fill(v: &[f64], len: usize, fill: f64) -> Vec<f64> {
    if v.is_empty() {
        vec![fill; len]
    } else {
        v.to_vec()
    }
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| ExpError::config(e.to_string()))
}

/// Set a dotted key. The value is read as a TOML literal, falling back to a
/// bare string (so `model.kind=saturated` works without quotes).
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ExpError::config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(ExpError::config("override with empty key"));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("nonempty key");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ExpError::config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("[model]\nkapa = 1.0\n").unwrap_err();
        assert!(matches!(err, ExpError::Config(_)));
        assert!(RunConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn overrides_set_nested_keys() {
        let ov = vec![
            "model.kind=saturated".to_string(),
            "experiment.convergence.sweep_n=[8, 16]".to_string(),
            "seed=7".to_string(),
        ];
        let cfg = RunConfig::load(None, &ov).unwrap();
        assert_eq!(cfg.model.kind, ModelKind::Saturated);
        assert_eq!(cfg.experiment.convergence.sweep_n, vec![8, 16]);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn malformed_overrides_are_config_errors() {
        for bad in ["seed", "=3", "seed.x=1", "model.gamma=fast"] {
            let r = RunConfig::load(None, &[bad.to_string()]);
            assert!(matches!(r, Err(ExpError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn digest_ignores_output_location_and_workers() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("/elsewhere");
        b.threads = 8;
        assert_eq!(a.digest(), b.digest());
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn serialized_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.experiment.stability.shift = vec![0.1, 0.2];
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn vector_lengths_are_checked_against_modes() {
        let r = RunConfig::load(None, &["experiment.init_mean=[1.0]".to_string()]);
        assert!(matches!(r, Err(ExpError::Config(_))));
    }
}
