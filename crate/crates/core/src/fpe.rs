//! Finite-volume solver for the one-mode kinetic Fokker–Planck equation on a
//! `(u, v)` box.
//!
//! Each step is Strang split as `U(dt/2) V(dt/2) D(dt) V(dt/2) U(dt/2)`: transport in
//! `u` at speed `v`, drift in `v`, and implicit diffusion in `v`. The mean-field force
//! is found by fixed-point iteration on the `u`-marginal.

use std::io::Write;

use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::galerkin::GalerkinBasis;
use crate::measure::{EmpiricalMeasure, Marginal1d};
use crate::model::{MeanField, ModelSpec};

const CFL: f64 = 0.4;
const CLIP_FLOOR: f64 = -1e-14;

/// Uniform cells on `[−r_u, r_u] × [−r_v, r_v]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    pub r_u: f64,
    pub r_v: f64,
    pub n_u: usize,
    pub n_v: usize,
}

impl PhaseGrid {
    pub fn new(r_u: f64, r_v: f64, n_u: usize, n_v: usize) -> Result<Self> {
        if !(r_u > 0.0) || !(r_v > 0.0) || !r_u.is_finite() || !r_v.is_finite() {
            return Err(Error::invalid("grid", "half-widths must be finite and positive"));
        }
        if n_u < 3 || n_v < 3 {
            return Err(Error::invalid("grid", "need at least 3 cells per direction"));
        }
        Ok(Self { r_u, r_v, n_u, n_v })
    }

    pub fn hu(&self) -> f64 {
        2.0 * self.r_u / self.n_u as f64
    }

    pub fn hv(&self) -> f64 {
        2.0 * self.r_v / self.n_v as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hu() * self.hv()
    }

    pub fn u_center(&self, i: usize) -> f64 {
        -self.r_u + (i as f64 + 0.5) * self.hu()
    }

    pub fn v_center(&self, j: usize) -> f64 {
        -self.r_v + (j as f64 + 0.5) * self.hv()
    }

    pub fn u_edges(&self) -> Vec<f64> {
        (0..=self.n_u)
            .map(|i| -self.r_u + i as f64 * self.hu())
            .collect()
    }

    pub fn v_edges(&self) -> Vec<f64> {
        (0..=self.n_v)
            .map(|j| -self.r_v + j as f64 * self.hv())
            .collect()
    }

    pub fn cells(&self) -> usize {
        self.n_u * self.n_v
    }

    #[inline]
    pub fn index(&self, iu: usize, iv: usize) -> usize {
        iu * self.n_v + iv
    }
}

/// Cell masses, stored `mass[iu * n_v + iv]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: PhaseGrid,
    mass: Vec<f64>,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Masses of `N(mean, var)` in consecutive cells; a point mass if `var = 0`.
fn gaussian_cells(edges: &[f64], mean: f64, var: f64) -> Vec<f64> {
    if var == 0.0 {
        let mut out = vec![0.0; edges.len() - 1];
        let k = edges.partition_point(|&e| e <= mean).clamp(1, edges.len() - 1) - 1;
        out[k] = 1.0;
        return out;
    }
    let sd = var.sqrt();
    edges
        .windows(2)
        .map(|w| normal_cdf((w[1] - mean) / sd) - normal_cdf((w[0] - mean) / sd))
        .collect()
}

impl DensityField {
    pub fn new(grid: PhaseGrid, mass: Vec<f64>) -> Result<Self> {
        crate::error::check_dim(grid.cells(), mass.len())?;
        if mass.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::invalid("mass", "must be nonnegative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized { total });
        }
        Ok(Self { grid, mass })
    }

    /// Independent Gaussians in `u` and `v`, integrated exactly over cells and
    /// renormalized to the box.
    pub fn gaussian(grid: PhaseGrid, mean: [f64; 2], var: [f64; 2]) -> Result<Self> {
        Self::correlated_gaussian(grid, mean, [[var[0], 0.0], [0.0, var[1]]])
    }

    /// Gaussian with a full covariance. The `v`-conditional given the `u` cell center
    /// is integrated exactly over `v` cells; the `u` factor uses exact cell masses.
    pub fn correlated_gaussian(grid: PhaseGrid, mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let (cuu, cuv, cvv) = (cov[0][0], cov[0][1], cov[1][1]);
        if !(cuu >= 0.0) || !(cvv >= 0.0) || cuv * cuv > cuu * cvv * (1.0 + 1e-12) {
            return Err(Error::invalid("cov", "must be positive semidefinite"));
        }
        let pu = gaussian_cells(&grid.u_edges(), mean[0], cuu);
        let v_edges = grid.v_edges();
        let mut mass = vec![0.0; grid.cells()];
        for (iu, &mu) in pu.iter().enumerate() {
            let (m, var) = if cuu > 0.0 {
                let beta = cuv / cuu;
                (
                    mean[1] + beta * (grid.u_center(iu) - mean[0]),
                    (cvv - beta * cuv).max(0.0),
                )
            } else {
                (mean[1], cvv)
            };
            let pv = gaussian_cells(&v_edges, m, var);
            for (iv, &p) in pv.iter().enumerate() {
                mass[grid.index(iu, iv)] = mu * p;
            }
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("mean", "Gaussian has no mass inside the box"));
        }
        for x in &mut mass {
            *x /= total;
        }
        Ok(Self { grid, mass })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass in the outermost ring of cells.
    pub fn boundary_mass(&self) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for iu in 0..g.n_u {
            for iv in 0..g.n_v {
                if iu == 0 || iv == 0 || iu + 1 == g.n_u || iv + 1 == g.n_v {
                    total += self.mass[g.index(iu, iv)];
                }
            }
        }
        total
    }

    /// `∫ (1 + u² + v²)` with cell-center quadrature.
    pub fn v_moment(&self) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for iu in 0..g.n_u {
            let u = g.u_center(iu);
            for iv in 0..g.n_v {
                let v = g.v_center(iv);
                total += self.mass[g.index(iu, iv)] * (1.0 + u * u + v * v);
            }
        }
        total
    }

    pub fn marginal_u_masses(&self) -> Vec<f64> {
        self.mass
            .chunks_exact(self.grid.n_v)
            .map(|col| col.iter().sum())
            .collect()
    }

    pub fn marginal_v_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_v];
        for col in self.mass.chunks_exact(self.grid.n_v) {
            for (o, x) in out.iter_mut().zip(col) {
                *o += x;
            }
        }
        out
    }

    pub fn marginal_v(&self) -> Marginal1d {
        Marginal1d::Histogram {
            edges: self.grid.v_edges(),
            mass: normalized(self.marginal_v_masses()),
        }
    }

    /// `(Σ|a − b|)`; both fields must share a grid.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "fields live on different grids"));
        }
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    /// Weighted atoms at cell centers, layout `(u, v)`.
    pub fn to_measure(&self) -> Result<EmpiricalMeasure> {
        let g = &self.grid;
        let mut atoms = Vec::with_capacity(2 * g.cells());
        for iu in 0..g.n_u {
            for iv in 0..g.n_v {
                atoms.push(g.u_center(iu));
                atoms.push(g.v_center(iv));
            }
        }
        let total = self.total_mass();
        EmpiricalMeasure::weighted(2, atoms, self.mass.iter().map(|x| x / total).collect())
    }

    /// Mean of `(u, v)`.
    pub fn mean(&self) -> [f64; 2] {
        let g = &self.grid;
        let (mut mu, mut mv) = (0.0, 0.0);
        for iu in 0..g.n_u {
            for iv in 0..g.n_v {
                let p = self.mass[g.index(iu, iv)];
                mu += p * g.u_center(iu);
                mv += p * g.v_center(iv);
            }
        }
        [mu, mv]
    }

    /// `t, u_index, v_index, mass` rows.
    pub fn write_csv<W: Write>(&self, w: &mut W, t: f64) -> Result<()> {
        for iu in 0..self.grid.n_u {
            for iv in 0..self.grid.n_v {
                writeln!(w, "{},{},{},{}", t, iu, iv, self.mass[self.grid.index(iu, iv)])?;
            }
        }
        Ok(())
    }

    /// Density values as a whitespace matrix, one `u` row per line.
    pub fn write_matrix<W: Write>(&self, w: &mut W) -> Result<()> {
        let area = self.grid.cell_area();
        for col in self.mass.chunks_exact(self.grid.n_v) {
            let line: Vec<String> = col.iter().map(|m| format!("{}", m / area)).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

fn normalized(mut xs: Vec<f64>) -> Vec<f64> {
    let total: f64 = xs.iter().sum();
    for x in &mut xs {
        *x /= total;
    }
    xs
}

/// `u`-marginal as a normalized histogram.
pub fn marginal_u(rho: &DensityField) -> Marginal1d {
    Marginal1d::Histogram {
        edges: rho.grid.u_edges(),
        mass: normalized(rho.marginal_u_masses()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpeConfig {
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl FpeConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            picard_tol: 1e-9,
            picard_max_iter: 50,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", "must be finite and positive"));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::invalid("picard_tol", "must be positive"));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::invalid("picard_max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: u64,
    pub time: f64,
    pub mass: f64,
    /// `|mass after − mass before|`.
    pub mass_change: f64,
    pub boundary_mass: f64,
    pub v_moment: f64,
    pub picard_iterations: usize,
    /// Cells with round-off negatives that were set to zero.
    pub clipped: usize,
}

impl StepDiagnostics {
    pub const CSV_HEADER: &'static str =
        "step,t,mass,mass_change,boundary_mass,v_moment,picard_iterations,clipped";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.time,
            self.mass,
            self.mass_change,
            self.boundary_mass,
            self.v_moment,
            self.picard_iterations,
            self.clipped
        )
    }
}

#[derive(Debug, Clone)]
pub struct FpeTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<DensityField>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Stepper for one model, grid and step size.
#[derive(Debug, Clone)]
pub struct FpeSolver {
    model: ModelSpec,
    lambda: f64,
    grid: PhaseGrid,
    cfg: FpeConfig,
}

impl FpeSolver {
    pub fn new(
        model: &ModelSpec,
        basis: &GalerkinBasis,
        grid: PhaseGrid,
        cfg: FpeConfig,
    ) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        if basis.mode_count() != 1 {
            return Err(Error::invalid("m", "the grid solver handles one mode"));
        }
        Ok(Self {
            model: model.clone(),
            lambda: basis.effective_eigenvalue(0),
            grid,
            cfg,
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn config(&self) -> &FpeConfig {
        &self.cfg
    }

    /// `F(u_i, ρ)` at every `u` cell center for the given `u`-marginal masses.
    pub fn force_field(&self, marginal: &[f64]) -> Result<Vec<f64>> {
        let g = &self.grid;
        let centers: Vec<f64> = (0..g.n_u).map(|i| g.u_center(i)).collect();
        let w = normalized(marginal.to_vec());
        let mf = MeanField::new(&self.model, 1, &centers, Some(&w))?;
        let mut out = vec![0.0; g.n_u];
        let (mut a, mut b) = ([0.0], [0.0]);
        for (i, &u) in centers.iter().enumerate() {
            self.model.psi_grad.apply(&[u], &mut a);
            mf.force(&[u], &mut b);
            out[i] = a[0] + b[0];
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelFault { term: "force" });
        }
        Ok(out)
    }

    /// One Strang step from `rho`; `step` labels diagnostics and errors.
    pub fn step(&self, rho: &DensityField, step: u64, time: f64) -> Result<(DensityField, StepDiagnostics)> {
        if rho.grid != self.grid {
            return Err(Error::invalid("grid", "density lives on a different grid"));
        }
        let dt = self.cfg.dt;
        let before = rho.total_mass();
        let start_marginal = rho.marginal_u_masses();
        let mut half = rho.mass.clone();
        self.transport_u(&mut half, 0.5 * dt);

        // Trapezoidal force: average of start and end marginals, iterated to a fixed point.
        let mut end = rho.mass.clone();
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        while iterations < self.cfg.picard_max_iter {
            iterations += 1;
            let end_marginal: Vec<f64> = end
                .chunks_exact(self.grid.n_v)
                .map(|c| c.iter().sum())
                .collect();
            let avg: Vec<f64> = start_marginal
                .iter()
                .zip(&end_marginal)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let force = self.force_field(&avg)?;
            let next = self.finish_step(&half, &force);
            residual = next.iter().zip(&end).map(|(a, b)| (a - b).abs()).sum();
            end = next;
            if residual < self.cfg.picard_tol {
                break;
            }
        }
        if !(residual < self.cfg.picard_tol) {
            return Err(Error::PicardDiverged {
                step,
                iterations,
                residual,
            });
        }
        let mut clipped = 0;
        for (cell, x) in end.iter_mut().enumerate() {
            if *x < 0.0 {
                if *x >= CLIP_FLOOR {
                    *x = 0.0;
                    clipped += 1;
                } else {
                    return Err(Error::NegativeMass {
                        step,
                        cell,
                        value: *x,
                    });
                }
            }
        }
        let out = DensityField {
            grid: self.grid,
            mass: end,
        };
        let mass = out.total_mass();
        let diag = StepDiagnostics {
            step,
            time: time + dt,
            mass,
            mass_change: (mass - before).abs(),
            boundary_mass: out.boundary_mass(),
            v_moment: out.v_moment(),
            picard_iterations: iterations,
            clipped,
        };
        Ok((out, diag))
    }

    /// The step with a prescribed force field on the `u` cell centers, no iteration.
    pub fn step_frozen(&self, rho: &DensityField, force: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.grid.n_u, force.len())?;
        let mut half = rho.mass.clone();
        self.transport_u(&mut half, 0.5 * self.cfg.dt);
        Ok(self.finish_step(&half, force))
    }

    fn finish_step(&self, half: &[f64], force: &[f64]) -> Vec<f64> {
        let dt = self.cfg.dt;
        let mut next = half.to_vec();
        self.drift_v(&mut next, force, 0.5 * dt);
        self.diffuse_v(&mut next, dt);
        self.drift_v(&mut next, force, 0.5 * dt);
        self.transport_u(&mut next, 0.5 * dt);
        next
    }

    /// Number of steps covering `t`.
    pub fn steps_for(&self, t: f64) -> Result<u64> {
        let n = (t / self.cfg.dt).round();
        if !(t >= 0.0) || (n * self.cfg.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::invalid("T", "must be a nonnegative multiple of dt"));
        }
        Ok(n as u64)
    }

    /// Run to `t`, keeping a field every `snapshot_every` steps and diagnostics every step.
    pub fn run(&self, rho0: &DensityField, t: f64, snapshot_every: u64) -> Result<FpeTrajectory> {
        if snapshot_every == 0 {
            return Err(Error::invalid("snapshot_every", "must be at least 1"));
        }
        let n = self.steps_for(t)?;
        let mut traj = FpeTrajectory {
            times: vec![0.0],
            fields: vec![rho0.clone()],
            diagnostics: Vec::with_capacity(n as usize),
        };
        let mut rho = rho0.clone();
        let mut time = 0.0;
        for k in 0..n {
            let (next, diag) = self.step(&rho, k, time)?;
            time += self.cfg.dt;
            rho = next;
            traj.diagnostics.push(diag);
            if (k + 1) % snapshot_every == 0 {
                traj.times.push(time);
                traj.fields.push(rho.clone());
            }
        }
        if n % snapshot_every != 0 {
            traj.times.push(time);
            traj.fields.push(rho);
        }
        Ok(traj)
    }

    /// Transport in `u` at speed `v_j` on each `v` row.
    fn transport_u(&self, mass: &mut [f64], tau: f64) {
        let g = self.grid;
        let (nu, nv) = (g.n_u, g.n_v);
        let mut rows = vec![0.0; mass.len()];
        for iu in 0..nu {
            for iv in 0..nv {
                rows[iv * nu + iu] = mass[iu * nv + iv];
            }
        }
        let hu = g.hu();
        rows.par_chunks_exact_mut(nu)
            .enumerate()
            .for_each_init(
                || (vec![0.0; nu + 1], Scratch::new(nu)),
                |(faces, scratch), (iv, row)| {
                    let v = g.v_center(iv);
                    faces[0] = 0.0;
                    faces[nu] = 0.0;
                    for f in faces[1..nu].iter_mut() {
                        *f = v;
                    }
                    advect(row, faces, hu, tau, scratch);
                },
            );
        for iu in 0..nu {
            for iv in 0..nv {
                mass[iu * nv + iv] = rows[iv * nu + iu];
            }
        }
    }

    /// Drift in `v` with velocity `(−λu − γv + F(u))/ε` evaluated on `v` faces.
    fn drift_v(&self, mass: &mut [f64], force: &[f64], tau: f64) {
        let g = self.grid;
        let nv = g.n_v;
        let hv = g.hv();
        let (lambda, gamma, eps) = (self.lambda, self.model.gamma, self.model.epsilon);
        mass.par_chunks_exact_mut(nv)
            .enumerate()
            .for_each_init(
                || (vec![0.0; nv + 1], Scratch::new(nv)),
                |(faces, scratch), (iu, col)| {
                    let u = g.u_center(iu);
                    let base = -lambda * u + force[iu];
                    faces[0] = 0.0;
                    faces[nv] = 0.0;
                    for (j, f) in faces.iter_mut().enumerate().take(nv).skip(1) {
                        let v = -g.r_v + j as f64 * hv;
                        *f = (base - gamma * v) / eps;
                    }
                    advect(col, faces, hv, tau, scratch);
                },
            );
    }

    /// `∂_t ρ = (q(u)/ε²) ∂²_v ρ` with zero-flux walls: Crank–Nicolson when it
    /// preserves positivity, backward Euler otherwise.
    fn diffuse_v(&self, mass: &mut [f64], tau: f64) {
        let g = self.grid;
        let nv = g.n_v;
        let hv = g.hv();
        let eps2 = self.model.epsilon * self.model.epsilon;
        let sigma = self.model.sigma;
        mass.par_chunks_exact_mut(nv)
            .enumerate()
            .for_each_init(
                || (vec![0.0; nv], vec![0.0; nv]),
                |(rhs, cprime), (iu, col)| {
                    let s = sigma.entry(g.u_center(iu));
                    let d = 0.5 * s * s / eps2;
                    let r = d * tau / (hv * hv);
                    if r == 0.0 {
                        return;
                    }
                    let theta = if r <= 1.0 { 0.5 } else { 1.0 };
                    let (ri, re) = (theta * r, (1.0 - theta) * r);
                    // Explicit part.
                    for j in 0..nv {
                        let left = if j > 0 { col[j - 1] - col[j] } else { 0.0 };
                        let right = if j + 1 < nv { col[j + 1] - col[j] } else { 0.0 };
                        rhs[j] = col[j] + re * (left + right);
                    }
                    // Implicit tridiagonal solve (Thomas), zero-flux ends.
                    let diag = |j: usize| {
                        let nb = (j > 0) as u8 + (j + 1 < nv) as u8;
                        1.0 + ri * nb as f64
                    };
                    let off = -ri;
                    let mut denom = diag(0);
                    cprime[0] = off / denom;
                    col[0] = rhs[0] / denom;
                    for j in 1..nv {
                        denom = diag(j) - off * cprime[j - 1];
                        cprime[j] = off / denom;
                        col[j] = (rhs[j] - off * col[j - 1]) / denom;
                    }
                    for j in (0..nv - 1).rev() {
                        col[j] -= cprime[j] * col[j + 1];
                    }
                },
            );
    }
}

struct Scratch {
    stage: Vec<f64>,
    flux: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            stage: vec![0.0; n],
            flux: vec![0.0; n + 1],
        }
    }
}

#[inline]
fn van_leer(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Upwind face fluxes of the limited linear reconstruction, in mass per unit time·h.
fn fluxes(c: &[f64], faces: &[f64], flux: &mut [f64]) {
    let n = c.len();
    let slope = |i: usize| {
        if i == 0 || i + 1 == n {
            0.0
        } else {
            van_leer(c[i] - c[i - 1], c[i + 1] - c[i])
        }
    };
    flux[0] = 0.0;
    flux[n] = 0.0;
    for f in 1..n {
        let a = faces[f];
        flux[f] = if a > 0.0 {
            a * (c[f - 1] + 0.5 * slope(f - 1))
        } else if a < 0.0 {
            a * (c[f] - 0.5 * slope(f))
        } else {
            0.0
        };
    }
}

/// Conservative transport of cell masses over `tau` with SSP-RK2 substeps.
/// Wall faces carry zero flux, so mass never leaves the box.
fn advect(c: &mut [f64], faces: &[f64], h: f64, tau: f64, s: &mut Scratch) {
    let amax = faces.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if amax == 0.0 {
        return;
    }
    let n_sub = ((amax * tau / (CFL * h)).ceil() as usize).max(1);
    let k = tau / n_sub as f64 / h;
    let n = c.len();
    for _ in 0..n_sub {
        fluxes(c, faces, &mut s.flux);
        for i in 0..n {
            s.stage[i] = c[i] - k * (s.flux[i + 1] - s.flux[i]);
        }
        fluxes(&s.stage, faces, &mut s.flux);
        for i in 0..n {
            c[i] = 0.5 * c[i] + 0.5 * (s.stage[i] - k * (s.flux[i + 1] - s.flux[i]));
        }
    }
}

/// One step of the solver for `rho` at step 0.
pub fn fpe_step(
    rho: &DensityField,
    model: &ModelSpec,
    basis: &GalerkinBasis,
    grid: PhaseGrid,
    cfg: FpeConfig,
) -> Result<(DensityField, StepDiagnostics)> {
    FpeSolver::new(model, basis, grid, cfg)?.step(rho, 0, 0.0)
}

pub fn fpe_run(
    rho0: &DensityField,
    model: &ModelSpec,
    basis: &GalerkinBasis,
    cfg: FpeConfig,
    t: f64,
    snapshot_every: u64,
) -> Result<FpeTrajectory> {
    FpeSolver::new(model, basis, *rho0.grid(), cfg)?.run(rho0, t, snapshot_every)
}

#[cfg(test)]
mod tests;
