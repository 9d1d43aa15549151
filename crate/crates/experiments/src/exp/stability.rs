//! Growth of the distance between two synchronously coupled ensembles.
//!
//! The second ensemble is the first translated by a fixed shift, so the
//! initial distance is exactly `|shift|`. Later distances use the coupling
//! cost `(1/N) Σ |Z_i^A − Z_i^B|`, an upper bound on W1.

use kinetic_mf::measure::{coupling_cost, W1Method};
use kinetic_mf::particles::{couple, init_ensemble, CoupledPair, Ensemble, Snapshot};

use super::{monitor_run, Context};
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{Chart, Report, Series, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTrace {
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    pub delta0: f64,
    /// Distance between two copies of the same ensemble.
    pub identical: Vec<f64>,
}

impl StabilityTrace {
    pub fn ratios(&self) -> Vec<f64> {
        self.distance.iter().map(|d| d / self.delta0).collect()
    }
}

pub fn shift_vector(ctx: &Context) -> Vec<f64> {
    let s = &ctx.cfg.experiment.stability.shift;
    if s.is_empty() {
        let mut v = vec![0.0; 2 * ctx.modes()];
        v[0] = 0.25;
        v
    } else {
        s.clone()
    }
}

fn distance(p: &CoupledPair) -> Result<f64> {
    let r = coupling_cost(&p.a.to_measure(), &p.b.to_measure())?;
    debug_assert_eq!(r.method, W1Method::Coupling);
    Ok(r.value)
}

/// Run the coupled pair and an identical pair, recording every `snapshot_every` steps.
pub fn trace(ctx: &Context, base: Ensemble, shift: &[f64]) -> Result<(StabilityTrace, Vec<Snapshot>)> {
    let e = &ctx.cfg.experiment;
    let mut shifted = base.clone();
    shifted.translate(shift)?;
    let mut pair = couple(base.clone(), shifted)?;
    let mut twin = couple(base.clone(), base)?;
    let delta0 = distance(&pair)?;
    let mut out = StabilityTrace {
        times: vec![0.0],
        distance: vec![delta0],
        delta0,
        identical: vec![distance(&twin)?],
    };
    let mut snaps = vec![pair.a.snapshot()];
    let n = ctx.integrator.steps_for(e.t)?;
    for k in 1..=n {
        pair.step(&ctx.integrator)?;
        twin.step(&ctx.integrator)?;
        if k % e.snapshot_every == 0 || k == n {
            out.times.push(pair.a.time());
            out.distance.push(distance(&pair)?);
            out.identical.push(distance(&twin)?);
            snaps.push(pair.a.snapshot());
        }
    }
    Ok((out, snaps))
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    let mut report = Report::default();
    report.add_assumptions(&ctx.assumptions);
    let rate = ctx.assumptions.stability_rate;
    let slack = cfg.experiment.stability.slack;
    let shift = shift_vector(&ctx);
    let base = init_ensemble(&cfg.initial_distribution(), cfg.experiment.n, ctx.modes(), cfg.seed)?;
    let (tr, snaps) = trace(&ctx, base, &shift)?;
    report.constant("delta0", tr.delta0);

    let mut table = Table::new("stability", &["t", "w1_coupling", "ratio", "bound", "identical_w1"]);
    let mut worst: f64 = 0.0;
    let mut ratio_pts = Vec::new();
    let mut bound_pts = Vec::new();
    if tr.delta0 == 0.0 {
        report
            .notes
            .push("identical initial ensembles: ratios undefined, distances reported only".into());
    }
    for (k, &t) in tr.times.iter().enumerate() {
        let bound = (rate * t).exp();
        let ratio = tr.distance[k] / tr.delta0;
        table.push([t, tr.distance[k], ratio, bound, tr.identical[k]]);
        if tr.delta0 > 0.0 {
            worst = worst.max(ratio / (slack * bound));
            ratio_pts.push((t, ratio));
            bound_pts.push((t, bound));
        }
    }
    if tr.delta0 > 0.0 {
        report.check(
            "stability_bound",
            worst <= 1.0,
            format!("max ratio / ({slack} e^(Ct)) = {worst:.4}, C = {rate:.4}"),
        );
    }
    let all_zero = tr.identical.iter().all(|&d| d.to_bits() == 0);
    report.check(
        "identical_inputs_stay_identical",
        all_zero,
        format!("max identical-pair distance {:e}", tr.identical.iter().fold(0.0f64, |a, &b| a.max(b))),
    );
    monitor_run(&ctx, &snaps, "stability", false, &mut report)?;
    report.charts.push(
        Chart::new("stability", "Coupled distance ratio", "t", "ratio")
            .with(Series::new("W1(t)/W1(0)", ratio_pts))
            .with(Series::new("exp(Ct)", bound_pts)),
    );
    report.tables.push(table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kinetic_mf::particles::InitialDistribution;

    fn deterministic_ctx(t: f64) -> Context {
        let mut cfg = RunConfig::default();
        cfg.model.sigma = 0.0;
        cfg.integrator.dt = 1e-3;
        cfg.experiment.t = t;
        cfg.experiment.snapshot_every = 100;
        Context::new(&cfg).unwrap()
    }

    /// `|exp(At) c| / |c|` for `A = [[0, 1], [−(λ + a), −γ]]`.
    fn flow_ratio(lambda_a: f64, gamma: f64, c: [f64; 2], t: f64) -> f64 {
        let mut z = c;
        let h = 1e-5;
        let n = (t / h).round() as usize;
        let f = |z: [f64; 2]| [z[1], -lambda_a * z[0] - gamma * z[1]];
        for _ in 0..n {
            let k1 = f(z);
            let k2 = f([z[0] + 0.5 * h * k1[0], z[1] + 0.5 * h * k1[1]]);
            let k3 = f([z[0] + 0.5 * h * k2[0], z[1] + 0.5 * h * k2[1]]);
            let k4 = f([z[0] + h * k3[0], z[1] + h * k3[1]]);
            for i in 0..2 {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (z[0].hypot(z[1])) / c[0].hypot(c[1])
    }

    #[test]
    fn noiseless_linear_ratio_follows_the_linear_flow() {
        // A uniform shift moves the ensemble mean too, so the interaction
        // cancels and the difference follows the confinement-only flow.
        let ctx = deterministic_ctx(1.0);
        let dist = InitialDistribution::Gaussian {
            mean: vec![0.0, 0.0],
            var: vec![0.3, 0.3],
        };
        let base = init_ensemble(&dist, 64, 1, 3).unwrap();
        let shift = [0.2, -0.1];
        let (tr, _) = trace(&ctx, base, &shift).unwrap();
        let lam = ctx.basis.effective_eigenvalue(0) + ctx.cfg.model.a;
        for (t, r) in tr.times.iter().zip(tr.ratios()) {
            let exact = flow_ratio(lam, ctx.cfg.model.gamma, shift, *t);
            assert!((r / exact - 1.0).abs() < 0.05, "t={t}: {r} vs {exact}");
        }
    }

    #[test]
    fn identical_inputs_give_zero_distance() {
        let mut cfg = RunConfig::default();
        cfg.model.kind = crate::config::ModelKind::Saturated;
        cfg.experiment.t = 0.2;
        let ctx = Context::new(&cfg).unwrap();
        let base = init_ensemble(&cfg.initial_distribution(), 32, 1, 1).unwrap();
        let (tr, _) = trace(&ctx, base, &[0.0, 0.0]).unwrap();
        assert!(tr.distance.iter().chain(&tr.identical).all(|&d| d == 0.0));
    }
}
