use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::EmpiricalMeasure;
use crate::error::{Error, Result};

pub const DEFAULT_EXACT_CAP: usize = 512;
pub const DEFAULT_PROJECTIONS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W1Method {
    /// Minimum-cost perfect matching.
    ExactMatching,
    /// Maximum over random 1D projections; a lower bound.
    Sliced,
    /// Cost of a given (synchronous) coupling; an upper bound.
    Coupling,
}

impl W1Method {
    pub fn label(self) -> &'static str {
        match self {
            W1Method::ExactMatching => "exact-matching",
            W1Method::Sliced => "sliced",
            W1Method::Coupling => "coupling",
        }
    }
}

impl std::fmt::Display for W1Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1Report {
    pub value: f64,
    pub method: W1Method,
    /// Zero unless sliced.
    pub n_projections: usize,
    /// Zero unless sliced or coupling.
    pub stat_error: f64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn w1_exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<W1Report> {
    w1_exact_capped(mu, nu, DEFAULT_EXACT_CAP)
}

pub fn w1_exact_capped(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    cap: usize,
) -> Result<W1Report> {
    crate::error::check_dim(mu.dim(), nu.dim())?;
    if !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::ExactUnavailable("weighted measures".into()));
    }
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::ExactUnavailable(format!(
            "unequal sizes {} and {}",
            n,
            nu.len()
        )));
    }
    if n > cap {
        return Err(Error::ExactUnavailable(format!("{n} atoms exceed cap {cap}")));
    }
    let cost: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| euclid(mu.atom(k / n), nu.atom(k % n)))
        .collect();
    let assignment = min_cost_assignment(&cost, n);
    // Re-sum the matched costs directly so the value does not carry dual round-off.
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok(W1Report {
        value: total / n as f64,
        method: W1Method::ExactMatching,
        n_projections: 0,
        stat_error: 0.0,
    })
}

/// Shortest augmenting path assignment on a dense `n x n` cost matrix.
/// Returns the column assigned to each row.
pub(crate) fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    // 1-indexed potentials and matching; index 0 is a sentinel column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

/// Mean Euclidean distance between paired atoms, `(1/N) Σ |a_i − b_i|`.
///
/// For two ensembles driven by a synchronous coupling this bounds W₁ from above.
pub fn coupling_cost(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<W1Report> {
    crate::error::check_dim(a.dim(), b.dim())?;
    crate::error::check_dim(a.len(), b.len())?;
    let n = a.len();
    let d: Vec<f64> = (0..n).map(|i| euclid(a.atom(i), b.atom(i))).collect();
    let est = crate::reduce::MeanEstimate::of(&d);
    Ok(W1Report {
        value: est.mean,
        method: W1Method::Coupling,
        n_projections: 0,
        stat_error: est.stderr,
    })
}

/// Exact 1D W₁ between two weighted atomic samples, via `∫|F − G|`.
pub fn w1_weighted_1d(xs: &[f64], wx: &[f64], ys: &[f64], wy: &[f64]) -> f64 {
    let mut a: Vec<(f64, f64)> = xs.iter().copied().zip(wx.iter().copied()).collect();
    let mut b: Vec<(f64, f64)> = ys.iter().copied().zip(wy.iter().copied()).collect();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    w1_sorted_weighted(&a, &b)
}

fn w1_sorted_weighted(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        if let Some(x0) = prev {
            total += (fa - fb).abs() * (x - x0);
        }
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        prev = Some(x);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicedOptions {
    pub n_projections: usize,
    pub seed: u64,
    /// Bootstrap replicates for `stat_error`; zero disables it.
    pub bootstrap: usize,
}

impl Default for SlicedOptions {
    fn default() -> Self {
        Self {
            n_projections: DEFAULT_PROJECTIONS,
            seed: 0,
            bootstrap: 16,
        }
    }
}

/// A fixed set of unit directions, reusable across many distance evaluations.
#[derive(Debug, Clone)]
pub struct SlicedProjector {
    dim: usize,
    directions: Vec<Vec<f64>>,
}

/// Per-direction projections of one measure.
#[derive(Debug, Clone)]
pub struct ProjectedSample {
    raw: Vec<Vec<f64>>,
    sorted: Vec<Vec<(f64, f64)>>,
    weights: Vec<f64>,
    uniform: bool,
}

impl SlicedProjector {
    pub fn random(dim: usize, n_projections: usize, seed: u64) -> Result<Self> {
        if n_projections < 1 {
            return Err(Error::invalid("n_projections", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let directions = (0..n_projections)
            .map(|_| loop {
                let d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    break d.into_iter().map(|x| x / norm).collect();
                }
            })
            .collect();
        Ok(Self { dim, directions })
    }

    /// Uses the given directions after normalizing them.
    pub fn from_directions(dim: usize, directions: Vec<Vec<f64>>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("n_projections", "must be at least 1"));
        }
        let mut out = Vec::with_capacity(directions.len());
        for d in directions {
            crate::error::check_dim(dim, d.len())?;
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(Error::invalid("direction", "zero vector"));
            }
            out.push(d.into_iter().map(|x| x / norm).collect());
        }
        Ok(Self {
            dim,
            directions: out,
        })
    }

    pub fn n_projections(&self) -> usize {
        self.directions.len()
    }

    pub fn project(&self, mu: &EmpiricalMeasure) -> Result<ProjectedSample> {
        crate::error::check_dim(self.dim, mu.dim())?;
        let weights = mu.weights();
        let raw: Vec<Vec<f64>> = self
            .directions
            .par_iter()
            .map(|d| {
                (0..mu.len())
                    .map(|i| mu.atom(i).iter().zip(d).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        let sorted = raw
            .par_iter()
            .map(|r: &Vec<f64>| {
                let mut s: Vec<(f64, f64)> =
                    r.iter().copied().zip(weights.iter().copied()).collect();
                s.sort_by(|p, q| p.0.total_cmp(&q.0));
                s
            })
            .collect();
        Ok(ProjectedSample {
            raw,
            sorted,
            weights,
            uniform: mu.is_uniform(),
        })
    }

    /// Max over directions of the 1D distance, without a bootstrap.
    pub fn distance_projected(&self, a: &ProjectedSample, b: &ProjectedSample) -> f64 {
        (0..self.directions.len())
            .into_par_iter()
            .map(|p| pair_distance(&a.sorted[p], a.uniform, &b.sorted[p], b.uniform))
            .reduce(|| 0.0, f64::max)
    }

    pub fn distance(
        &self,
        mu: &EmpiricalMeasure,
        nu: &EmpiricalMeasure,
        bootstrap: usize,
        seed: u64,
    ) -> Result<W1Report> {
        let a = self.project(mu)?;
        let b = self.project(nu)?;
        self.distance_with_bootstrap(&a, &b, bootstrap, seed)
    }

    /// Distance plus a bootstrap standard error from resampling both measures.
    pub fn distance_with_bootstrap(
        &self,
        a: &ProjectedSample,
        b: &ProjectedSample,
        bootstrap: usize,
        seed: u64,
    ) -> Result<W1Report> {
        let value = self.distance_projected(a, b);
        let stat_error = if bootstrap >= 2 {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::noise::derive_seed(seed, 0xB007));
            let reps: Vec<f64> = (0..bootstrap)
                .map(|_| {
                    let ra = a.resample(&mut rng);
                    let rb = b.resample(&mut rng);
                    self.distance_projected(&ra, &rb)
                })
                .collect();
            crate::reduce::MeanEstimate::of(&reps).std_dev()
        } else {
            0.0
        };
        Ok(W1Report {
            value,
            method: W1Method::Sliced,
            n_projections: self.directions.len(),
            stat_error,
        })
    }
}

fn pair_distance(a: &[(f64, f64)], ua: bool, b: &[(f64, f64)], ub: bool) -> f64 {
    if ua && ub && a.len() == b.len() {
        a.iter().zip(b).map(|(x, y)| (x.0 - y.0).abs()).sum::<f64>() / a.len() as f64
    } else {
        w1_sorted_weighted(a, b)
    }
}

impl ProjectedSample {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sorted projections along direction `p`.
    pub fn sorted_values(&self, p: usize) -> Vec<f64> {
        self.sorted[p].iter().map(|x| x.0).collect()
    }

    fn resample(&self, rng: &mut ChaCha8Rng) -> ProjectedSample {
        let n = self.len();
        // Weighted draws by inverse CDF on the cumulative weights.
        let idx: Vec<usize> = if self.uniform {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            let mut cum = Vec::with_capacity(n);
            let mut acc = 0.0;
            for w in &self.weights {
                acc += w;
                cum.push(acc);
            }
            (0..n)
                .map(|_| {
                    let r: f64 = rng.random::<f64>() * acc;
                    cum.partition_point(|&c| c < r).min(n - 1)
                })
                .collect()
        };
        let w = 1.0 / n as f64;
        let sorted = self
            .raw
            .iter()
            .map(|r| {
                let mut s: Vec<(f64, f64)> = idx.iter().map(|&i| (r[i], w)).collect();
                s.sort_by(|p, q| p.0.total_cmp(&q.0));
                s
            })
            .collect();
        ProjectedSample {
            raw: Vec::new(),
            sorted,
            weights: vec![w; n],
            uniform: true,
        }
    }
}

pub fn w1_sliced(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    n_projections: usize,
    seed: u64,
) -> Result<W1Report> {
    w1_sliced_with(
        mu,
        nu,
        &SlicedOptions {
            n_projections,
            seed,
            ..SlicedOptions::default()
        },
    )
}

pub fn w1_sliced_with(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    opts: &SlicedOptions,
) -> Result<W1Report> {
    crate::error::check_dim(mu.dim(), nu.dim())?;
    let proj = SlicedProjector::random(mu.dim(), opts.n_projections, opts.seed)?;
    proj.distance(mu, nu, opts.bootstrap, opts.seed)
}

/// A one-dimensional probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal1d {
    /// Point masses `w[i]` at `x[i]`.
    Atoms { x: Vec<f64>, w: Vec<f64> },
    /// Mass `mass[i]` spread uniformly over `[edges[i], edges[i+1]]`.
    Histogram { edges: Vec<f64>, mass: Vec<f64> },
}

impl Marginal1d {
    pub fn uniform_atoms(x: Vec<f64>) -> Self {
        let w = vec![1.0 / x.len().max(1) as f64; x.len()];
        Marginal1d::Atoms { x, w }
    }

    fn validate(&self) -> Result<()> {
        let (w, n_expected) = match self {
            Marginal1d::Atoms { x, w } => (w, x.len()),
            Marginal1d::Histogram { edges, mass } => {
                if edges.windows(2).any(|e| !(e[1] > e[0])) {
                    return Err(Error::invalid("edges", "must be strictly increasing"));
                }
                (mass, edges.len().saturating_sub(1))
            }
        };
        if w.len() != n_expected {
            return Err(Error::DimensionMismatch {
                expected: n_expected,
                found: w.len(),
            });
        }
        if w.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let total: f64 = w.iter().sum();
        if w.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized { total });
        }
        Ok(())
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Marginal1d::Atoms { x, .. } => x.clone(),
            Marginal1d::Histogram { edges, .. } => edges.clone(),
        }
    }
}

/// Right and left limits of a CDF at arbitrary points.
enum Cdf {
    Atoms { x: Vec<f64>, cum: Vec<f64> },
    Histogram { edges: Vec<f64>, cum: Vec<f64> },
}

impl Cdf {
    fn new(m: &Marginal1d) -> Self {
        match m {
            Marginal1d::Atoms { x, w } => {
                let mut p: Vec<(f64, f64)> = x.iter().copied().zip(w.iter().copied()).collect();
                p.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut cum = vec![0.0];
                let mut acc = 0.0;
                for &(_, wi) in &p {
                    acc += wi;
                    cum.push(acc);
                }
                Cdf::Atoms {
                    x: p.into_iter().map(|a| a.0).collect(),
                    cum,
                }
            }
            Marginal1d::Histogram { edges, mass } => {
                let mut cum = vec![0.0];
                let mut acc = 0.0;
                for &m in mass {
                    acc += m;
                    cum.push(acc);
                }
                Cdf::Histogram {
                    edges: edges.clone(),
                    cum,
                }
            }
        }
    }

    /// `F(t+)`.
    fn right(&self, t: f64) -> f64 {
        match self {
            Cdf::Atoms { x, cum } => cum[x.partition_point(|&a| a <= t)],
            Cdf::Histogram { edges, cum } => hist_cdf(edges, cum, t),
        }
    }

    /// `F(t−)`.
    fn left(&self, t: f64) -> f64 {
        match self {
            Cdf::Atoms { x, cum } => cum[x.partition_point(|&a| a < t)],
            Cdf::Histogram { edges, cum } => hist_cdf(edges, cum, t),
        }
    }
}

fn hist_cdf(edges: &[f64], cum: &[f64], t: f64) -> f64 {
    if t <= edges[0] {
        return 0.0;
    }
    let last = edges.len() - 1;
    if t >= edges[last] {
        return cum[last];
    }
    let k = edges.partition_point(|&e| e <= t) - 1;
    let frac = (t - edges[k]) / (edges[k + 1] - edges[k]);
    cum[k] + frac * (cum[k + 1] - cum[k])
}

/// Exact `∫ |F − G| dx` for two 1D distributions.
///
/// Between consecutive breakpoints both CDFs are affine, so each piece is
/// integrated in closed form.
pub fn w1_marginal_1d(f: &Marginal1d, g: &Marginal1d) -> Result<f64> {
    f.validate()?;
    g.validate()?;
    let mut pts = f.breakpoints();
    pts.extend(g.breakpoints());
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let cf = Cdf::new(f);
    let cg = Cdf::new(g);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dl = cf.right(a) - cg.right(a);
        let dr = cf.left(b) - cg.left(b);
        let h = b - a;
        total += if dl * dr >= 0.0 {
            0.5 * (dl.abs() + dr.abs()) * h
        } else {
            0.5 * (dl * dl + dr * dr) / (dl.abs() + dr.abs()) * h
        };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_measure(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmpiricalMeasure {
        let atoms = (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        EmpiricalMeasure::uniform(dim, atoms).unwrap()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn exact_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_measure(&mut rng, 20, 3);
        assert_eq!(w1_exact(&mu, &mu).unwrap().value, 0.0);
        let a = EmpiricalMeasure::uniform(2, vec![0.0, 0.0]).unwrap();
        let b = EmpiricalMeasure::uniform(2, vec![3.0, 4.0]).unwrap();
        let r = w1_exact(&a, &b).unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!(r.method, W1Method::ExactMatching);
    }

    #[test]
    fn exact_matches_permutation_enumeration() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mu = random_measure(&mut rng, 5, 4);
            let nu = random_measure(&mut rng, 5, 4);
            let best = permutations(5)
                .into_iter()
                .map(|p| {
                    (0..5)
                        .map(|i| euclid(mu.atom(i), nu.atom(p[i])))
                        .sum::<f64>()
                        / 5.0
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(permutations(5).len(), 120);
            let v = w1_exact(&mu, &nu).unwrap().value;
            assert!((v - best).abs() <= 1e-9 * best.max(1.0), "{v} vs {best}");
        }
    }

    #[test]
    fn exact_rejects_unequal_and_oversized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_measure(&mut rng, 4, 2);
        let b = random_measure(&mut rng, 5, 2);
        assert!(matches!(w1_exact(&a, &b), Err(Error::ExactUnavailable(_))));
        let c = random_measure(&mut rng, 5, 2);
        assert!(matches!(
            w1_exact_capped(&b, &c, 4),
            Err(Error::ExactUnavailable(_))
        ));
    }

    #[test]
    fn exact_metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = random_measure(&mut rng, 30, 3);
            let b = random_measure(&mut rng, 30, 3);
            let c = random_measure(&mut rng, 30, 3);
            let ab = w1_exact(&a, &b).unwrap().value;
            let ba = w1_exact(&b, &a).unwrap().value;
            let bc = w1_exact(&b, &c).unwrap().value;
            let ac = w1_exact(&a, &c).unwrap().value;
            assert!((ab - ba).abs() < 1e-12);
            assert!(ac <= ab + bc + 1e-12);
            // Permuted copy.
            let mut rows: Vec<Vec<f64>> = (0..30).map(|i| a.atom(i).to_vec()).collect();
            rows.reverse();
            rows.swap(3, 17);
            let p = EmpiricalMeasure::uniform(3, rows.concat()).unwrap();
            assert!(w1_exact(&a, &p).unwrap().value.abs() < 1e-15);
        }
    }

    #[test]
    fn sliced_trivial_and_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = random_measure(&mut rng, 40, 4);
        assert_eq!(w1_sliced(&mu, &mu, 16, 0).unwrap().value, 0.0);

        let mut shifted = mu.atoms().to_vec();
        for (i, x) in shifted.iter_mut().enumerate() {
            if i % 4 == 0 {
                *x = 1.7 * *x + 0.3;
            }
        }
        let nu = EmpiricalMeasure::uniform(4, shifted).unwrap();
        let proj =
            SlicedProjector::from_directions(4, vec![vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        let r = proj.distance(&mu, &nu, 0, 0).unwrap();
        let mut xa: Vec<f64> = (0..40).map(|i| mu.atom(i)[0]).collect();
        let mut xb: Vec<f64> = (0..40).map(|i| nu.atom(i)[0]).collect();
        xa.sort_by(f64::total_cmp);
        xb.sort_by(f64::total_cmp);
        let direct: f64 = xa.iter().zip(&xb).map(|(a, b)| (a - b).abs()).sum::<f64>() / 40.0;
        assert!((r.value - direct).abs() < 1e-12);
        assert_eq!(r.n_projections, 1);
    }

    #[test]
    fn sliced_is_a_lower_bound() {
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let mu = random_measure(&mut rng, 32, 4);
            let nu = random_measure(&mut rng, 32, 4);
            let s = w1_sliced(&mu, &nu, 256, seed).unwrap();
            let e = w1_exact(&mu, &nu).unwrap();
            assert!(s.value <= e.value + 1e-9);
            assert!(s.stat_error >= 0.0);
            assert_eq!(s.method, W1Method::Sliced);
        }
    }

    #[test]
    fn sliced_rejects_zero_projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = random_measure(&mut rng, 4, 2);
        assert!(w1_sliced(&mu, &mu, 0, 0).is_err());
    }

    #[test]
    fn sliced_handles_unequal_sizes() {
        // Two samples of one point each, at 0 and 1, one with a duplicate.
        let a = EmpiricalMeasure::uniform(1, vec![0.0, 0.0]).unwrap();
        let b = EmpiricalMeasure::uniform(1, vec![1.0, 1.0, 1.0]).unwrap();
        let r = w1_sliced(&a, &b, 4, 0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_trivial_cases() {
        let f = Marginal1d::uniform_atoms(vec![0.3, -1.0, 2.0]);
        assert_eq!(w1_marginal_1d(&f, &f).unwrap(), 0.0);
        let a = Marginal1d::uniform_atoms(vec![0.0]);
        let b = Marginal1d::uniform_atoms(vec![-2.5]);
        assert!((w1_marginal_1d(&a, &b).unwrap() - 2.5).abs() < 1e-15);
        let bad = Marginal1d::Atoms {
            x: vec![0.0],
            w: vec![0.5],
        };
        assert!(matches!(
            w1_marginal_1d(&bad, &a),
            Err(Error::Unnormalized { .. })
        ));
    }

    #[test]
    fn marginal_histogram_against_point_mass() {
        // Uniform on [0,1] vs a point mass at 0: ∫ (1 − x) dx = 1/2; at 0.5: 1/4.
        let h = Marginal1d::Histogram {
            edges: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            mass: vec![0.25; 4],
        };
        let p0 = Marginal1d::uniform_atoms(vec![0.0]);
        let ph = Marginal1d::uniform_atoms(vec![0.5]);
        assert!((w1_marginal_1d(&h, &p0).unwrap() - 0.5).abs() < 1e-14);
        assert!((w1_marginal_1d(&h, &ph).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn marginal_matches_atom_walk() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = (0..70).map(|_| rng.random_range(-0.5..1.5)).collect();
        let wx = vec![1.0 / 50.0; 50];
        let wy = vec![1.0 / 70.0; 70];
        let a = w1_weighted_1d(&xs, &wx, &ys, &wy);
        let b = w1_marginal_1d(
            &Marginal1d::Atoms { x: xs, w: wx },
            &Marginal1d::Atoms { x: ys, w: wy },
        )
        .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn marginal_histogram_vs_its_own_sample() {
        // Piecewise-uniform density on [-1, 1] with unequal masses.
        let edges: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
        let raw = [1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0];
        let total: f64 = raw.iter().sum();
        let mass: Vec<f64> = raw.iter().map(|m| m / total).collect();
        let h = Marginal1d::Histogram {
            edges: edges.clone(),
            mass: mass.clone(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let r: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut k = 0;
                    while k < 7 && acc + mass[k] < r {
                        acc += mass[k];
                        k += 1;
                    }
                    edges[k] + 0.25 * rng.random::<f64>()
                })
                .collect()
        };
        let n = 100_000;
        let sample = draw(&mut rng, n);
        let value = w1_marginal_1d(&h, &Marginal1d::uniform_atoms(sample.clone())).unwrap();
        // Bootstrap: distance of resamples from the sample itself.
        let reps: Vec<f64> = (0..20)
            .map(|_| {
                let re: Vec<f64> = (0..n).map(|_| sample[rng.random_range(0..n)]).collect();
                w1_marginal_1d(
                    &Marginal1d::uniform_atoms(sample.clone()),
                    &Marginal1d::uniform_atoms(re),
                )
                .unwrap()
            })
            .collect();
        let fluct = reps.iter().sum::<f64>() / reps.len() as f64;
        assert!(value <= 2.0 * fluct, "{value} vs {fluct}");
    }

    #[test]
    fn coupling_cost_bounds_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_measure(&mut rng, 40, 2);
        let b = random_measure(&mut rng, 40, 2);
        let c = coupling_cost(&a, &b).unwrap();
        assert!(c.value + 1e-12 >= w1_exact(&a, &b).unwrap().value);
        assert_eq!(c.method, W1Method::Coupling);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn translation_covariance(seed in 0u64..1000, shift in prop::collection::vec(-5.0f64..5.0, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_measure(&mut rng, 12, 3);
            let b = random_measure(&mut rng, 12, 3);
            let base = w1_exact(&a, &b).unwrap().value;
            let moved = w1_exact(&a.translated(&shift).unwrap(), &b.translated(&shift).unwrap()).unwrap().value;
            prop_assert!((base - moved).abs() <= 1e-12);
        }

        #[test]
        fn sliced_below_exact(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_measure(&mut rng, 10, 4);
            let b = random_measure(&mut rng, 10, 4);
            let s = w1_sliced(&a, &b, 32, seed).unwrap().value;
            let e = w1_exact(&a, &b).unwrap().value;
            prop_assert!(s <= e + 1e-9);
        }
    }
}
