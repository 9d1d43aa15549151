//! Assumption checks only: probed Lipschitz ratios and derived constants.

use super::Context;
use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{Report, Table};

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let ctx = Context::new(cfg)?;
    let a = &ctx.assumptions;
    let mut report = Report::default();
    report.add_assumptions(a);
    let mut t = Table::new("probes", &["quantity", "declared", "estimated"]);
    t.push(["sigma_lipschitz".to_string(), a.l_sigma.to_string(), a.estimated.sigma.to_string()]);
    t.push(["kernel_lipschitz".to_string(), a.l_kernel.to_string(), a.estimated.kernel.to_string()]);
    t.push(["psi_lipschitz".to_string(), a.l_psi.to_string(), a.estimated.psi.to_string()]);
    report.tables.push(t);
    report.check(
        "ellipticity",
        a.theta > 0.0,
        format!("theta = {}", a.theta),
    );
    if a.theta == 0.0 {
        report
            .notes
            .push("diffusion is degenerate; gradient certificate unavailable".into());
    }
    Ok(report)
}
