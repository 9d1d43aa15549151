use crate::error::{Error, Result};
use crate::model::{ModelAssumptions, TestFunction};
use crate::particles::Snapshot;
use crate::reduce::MeanEstimate;

/// A step where the empirical growth of `E V` exceeds `Λ₁ + Λ₂ E V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovFlag {
    /// Index of the left endpoint in `times`.
    pub index: usize,
    /// Discrete derivative minus the allowed rate and three standard errors.
    pub excess: f64,
}

/// Running record of `(1/N) Σ V(Z_i)` with `V = 1 + |Z|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovMonitor {
    pub times: Vec<f64>,
    pub v_mean: Vec<f64>,
    pub v_stderr: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub flags: Vec<LyapunovFlag>,
    /// Largest discrete derivative minus allowed rate, before the error bar.
    pub max_excess: f64,
    prev: Vec<f64>,
}

impl LyapunovMonitor {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        Self {
            times: Vec::new(),
            v_mean: Vec::new(),
            v_stderr: Vec::new(),
            lambda1,
            lambda2,
            flags: Vec::new(),
            max_excess: f64::NEG_INFINITY,
            prev: Vec::new(),
        }
    }

    /// Record one snapshot given per-particle `V` values.
    ///
    /// When the particle count matches the previous record the increment's error
    /// bar is computed pathwise, otherwise from the two marginal errors.
    pub fn push(&mut self, time: f64, v: &[f64]) -> Result<()> {
        if v.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let est = MeanEstimate::of(v);
        if let (Some(&t0), Some(&m0), Some(&s0)) =
            (self.times.last(), self.v_mean.last(), self.v_stderr.last())
        {
            let dt = time - t0;
            if !(dt > 0.0) {
                return Err(Error::invalid("time", "must increase between records"));
            }
            let se = if self.prev.len() == v.len() {
                let diffs: Vec<f64> = v.iter().zip(&self.prev).map(|(a, b)| a - b).collect();
                MeanEstimate::of(&diffs).stderr
            } else {
                (s0 * s0 + est.stderr * est.stderr).sqrt()
            };
            let rate = (est.mean - m0) / dt;
            let allowed = self.lambda1 + self.lambda2 * m0;
            self.max_excess = self.max_excess.max(rate - allowed);
            let excess = rate - allowed - 3.0 * se / dt;
            if excess > 0.0 {
                self.flags.push(LyapunovFlag {
                    index: self.times.len() - 1,
                    excess,
                });
            }
        }
        self.times.push(time);
        self.v_mean.push(est.mean);
        self.v_stderr.push(est.stderr);
        self.prev = v.to_vec();
        Ok(())
    }

    /// Record an exactly known mean, such as a grid quadrature.
    pub fn push_moment(&mut self, time: f64, v_mean: f64) -> Result<()> {
        self.prev.clear();
        if let (Some(&t0), Some(&m0), Some(&s0)) =
            (self.times.last(), self.v_mean.last(), self.v_stderr.last())
        {
            let dt = time - t0;
            if !(dt > 0.0) {
                return Err(Error::invalid("time", "must increase between records"));
            }
            let rate = (v_mean - m0) / dt;
            let allowed = self.lambda1 + self.lambda2 * m0;
            self.max_excess = self.max_excess.max(rate - allowed);
            let excess = rate - allowed - 3.0 * s0 / dt;
            if excess > 0.0 {
                self.flags.push(LyapunovFlag {
                    index: self.times.len() - 1,
                    excess,
                });
            }
        }
        self.times.push(time);
        self.v_mean.push(v_mean);
        self.v_stderr.push(0.0);
        Ok(())
    }

    pub fn push_snapshot(&mut self, snap: &Snapshot) -> Result<()> {
        self.push(snap.time, &snap.lyapunov_values())
    }
}

/// Feed every snapshot to a fresh monitor using the derived `Λ₁, Λ₂`.
pub fn lyapunov_track(
    trajectory: &[Snapshot],
    assumptions: &ModelAssumptions,
) -> Result<LyapunovMonitor> {
    if trajectory.is_empty() {
        return Err(Error::invalid("trajectory", "must be nonempty"));
    }
    let mut mon = LyapunovMonitor::new(assumptions.lambda1, assumptions.lambda2);
    for s in trajectory {
        mon.push_snapshot(s)?;
    }
    Ok(mon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquicontinuityReport {
    /// `∫ φ dΓ_t` per snapshot.
    pub means: Vec<f64>,
    /// Largest `|Δ mean| − C|t − s| − 6 se` over snapshot pairs; nonpositive passes.
    pub max_excess: f64,
    /// Largest `|Δ mean| / |t − s|` observed.
    pub max_slope: f64,
    pub violations: usize,
    pub pairs: usize,
}

/// Check `|∫φ dΓ_t − ∫φ dΓ_s| ≤ C|t − s| + 6 se` over all snapshot pairs.
///
/// The standard error is pathwise, from the per-particle differences.
pub fn equicontinuity_check(
    trajectory: &[Snapshot],
    phi: &dyn TestFunction,
    constant: f64,
) -> Result<EquicontinuityReport> {
    if trajectory.is_empty() {
        return Err(Error::invalid("trajectory", "must be nonempty"));
    }
    let values: Vec<Vec<f64>> = trajectory.iter().map(|s| s.evaluate(phi)).collect();
    let means: Vec<f64> = values.iter().map(|v| MeanEstimate::of(v).mean).collect();
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_slope: f64 = 0.0;
    let mut violations = 0;
    let mut pairs = 0;
    for a in 0..trajectory.len() {
        for b in a + 1..trajectory.len() {
            let gap = (trajectory[b].time - trajectory[a].time).abs();
            let diffs: Vec<f64> = if values[a].len() == values[b].len() {
                values[b].iter().zip(&values[a]).map(|(x, y)| x - y).collect()
            } else {
                return Err(Error::InconsistentTrajectory(
                    "particle count changed between snapshots".into(),
                ));
            };
            let est = MeanEstimate::of(&diffs);
            let excess = est.mean.abs() - constant * gap - 6.0 * est.stderr;
            if gap > 0.0 {
                max_slope = max_slope.max(est.mean.abs() / gap);
            }
            max_excess = max_excess.max(excess);
            if excess > 0.0 {
                violations += 1;
            }
            pairs += 1;
        }
    }
    Ok(EquicontinuityReport {
        means,
        max_excess: if pairs == 0 { 0.0 } else { max_excess },
        max_slope,
        violations,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_values_raise_no_flags() {
        let mut mon = LyapunovMonitor::new(0.0, 0.0);
        let v = vec![1.5, 2.0, 3.0];
        for k in 0..10 {
            mon.push(k as f64 * 0.1, &v).unwrap();
        }
        assert!(mon.flags.is_empty());
        assert!(mon.v_mean.windows(2).all(|w| w[0] == w[1]));
        assert!(mon.v_mean.iter().all(|&x| x >= 1.0));
    }

    #[test]
    fn excess_growth_is_flagged() {
        let mut mon = LyapunovMonitor::new(0.1, 0.0);
        mon.push(0.0, &[1.0, 1.0]).unwrap();
        mon.push(0.1, &[2.0, 2.0]).unwrap();
        assert_eq!(mon.flags.len(), 1);
        assert!((mon.flags[0].excess - 9.9).abs() < 1e-12);
        assert!(mon.push(0.1, &[2.0, 2.0]).is_err());
    }
}
