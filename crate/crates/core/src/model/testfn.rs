use std::sync::OnceLock;

/// First derivatives and the diagonal second derivatives of a test function.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
    pub hess_uu: Vec<f64>,
    pub hess_vv: Vec<f64>,
}

impl Derivatives {
    pub fn zeros(m: usize) -> Self {
        Self {
            grad_u: vec![0.0; m],
            grad_v: vec![0.0; m],
            hess_uu: vec![0.0; m],
            hess_vv: vec![0.0; m],
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_u
            .iter()
            .chain(&self.grad_v)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    fn clear(&mut self) {
        for x in self
            .grad_u
            .iter_mut()
            .chain(self.grad_v.iter_mut())
            .chain(self.hess_uu.iter_mut())
            .chain(self.hess_vv.iter_mut())
        {
            *x = 0.0;
        }
    }
}

/// A smooth function of the first `based_modes()` pairs `(u_k, v_k)`.
///
/// `u` and `v` passed in have at least `based_modes()` entries; later ones are ignored.
pub trait TestFunction: Send + Sync {
    fn based_modes(&self) -> usize;

    fn value(&self, u: &[f64], v: &[f64]) -> f64;

    /// Fill `d` and return true, or return false when derivatives are unavailable.
    fn derivatives(&self, _u: &[f64], _v: &[f64], _d: &mut Derivatives) -> bool {
        false
    }

    /// `sup |φ|`.
    fn sup_value(&self) -> f64;

    /// `sup |∇φ|`.
    fn sup_grad(&self) -> f64;

    /// `sup Σ_k |∂²φ/∂v_k²|`.
    fn sup_hess_vv(&self) -> f64;

    /// A ball `(center, radius)` in `z = (u, v)` outside which `φ` is constant.
    fn support(&self) -> Option<(Vec<f64>, f64)> {
        None
    }

    /// `max_z (|∇φ|² + κφ²)` when it can be computed sharply.
    fn gradient_energy_max(&self, _kappa: f64) -> Option<f64> {
        None
    }
}

/// Radial profile `b(s) = exp(1 − 1/(1 − s²))` for `s < 1`, zero beyond; `b(0) = 1`.
pub fn bump(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

/// `(b, b', b'/s, b'')` at `s ≥ 0`.
fn bump_jet(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    if s2 >= 1.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let b = bump(s);
    if b == 0.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let w = 1.0 - s2;
    let g = -2.0 * s / (w * w);
    let gp = -2.0 / (w * w) - 8.0 * s2 / (w * w * w);
    let h = b * (-2.0 / (w * w));
    (b, b * g, h, b * (g * g + gp))
}

/// Scanned maxima of `|b'|`, `|b'/s|`, `|b''|`, inflated by a small margin.
fn bump_bounds() -> (f64, f64, f64) {
    static BOUNDS: OnceLock<(f64, f64, f64)> = OnceLock::new();
    *BOUNDS.get_or_init(|| {
        let n = 200_000;
        let (mut d1, mut h, mut d2): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let s = i as f64 / n as f64;
            let (_, bp, hh, bpp) = bump_jet(s);
            d1 = d1.max(bp.abs());
            h = h.max(hh.abs());
            d2 = d2.max(bpp.abs());
        }
        let margin = 1.0 + 1e-3;
        (d1 * margin, h * margin, d2 * margin)
    })
}

/// `φ(z) = A · b(|z − c|/r) · (p₀ + Σ_i p_i z_i)` with `z = (u_1..u_m, v_1..v_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpPoly {
    modes: usize,
    center: Vec<f64>,
    radius: f64,
    amplitude: f64,
    constant: f64,
    linear: Vec<f64>,
}

impl BumpPoly {
    /// Radially symmetric bump with peak `amplitude` at `center`.
    pub fn radial(center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        assert!(center.len().is_multiple_of(2) && !center.is_empty() && radius > 0.0);
        let dim = center.len();
        Self {
            modes: dim / 2,
            center,
            radius,
            amplitude,
            constant: 1.0,
            linear: vec![0.0; dim],
        }
    }

    /// Multiply the bump by the affine factor `p₀ + ⟨p, z⟩`.
    pub fn with_affine(mut self, constant: f64, linear: Vec<f64>) -> Self {
        assert_eq!(linear.len(), self.center.len());
        self.constant = constant;
        self.linear = linear;
        self
    }

    /// Radial bump scaled so that `sup |∇φ| = grad_max`.
    pub fn with_unit_gradient(center: Vec<f64>, radius: f64, grad_max: f64) -> Self {
        let d1 = bump_bounds().0 / (1.0 + 1e-3);
        Self::radial(center, radius, grad_max * radius / d1)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn is_radial(&self) -> bool {
        self.linear.iter().all(|&x| x == 0.0)
    }

    /// For radial bumps, `(|φ|, |∇φ|)` at normalized radius `s`.
    pub fn radial_profile(&self, s: f64) -> (f64, f64) {
        let (b, bp, _, _) = bump_jet(s);
        (
            (self.amplitude * self.constant * b).abs(),
            (self.amplitude * self.constant * bp / self.radius).abs(),
        )
    }

    fn offset(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.modes;
        (0..2 * m)
            .map(|i| {
                let zi = if i < m { u[i] } else { v[i - m] };
                zi - self.center[i]
            })
            .collect()
    }

    fn affine(&self, u: &[f64], v: &[f64]) -> f64 {
        let m = self.modes;
        let mut p = self.constant;
        for k in 0..m {
            p += self.linear[k] * u[k] + self.linear[m + k] * v[k];
        }
        p
    }

    /// `sup |p|` over the support ball.
    fn affine_sup(&self) -> f64 {
        let c: f64 = self
            .center
            .iter()
            .zip(&self.linear)
            .map(|(a, b)| a * b)
            .sum();
        let norm = self.linear.iter().map(|x| x * x).sum::<f64>().sqrt();
        (self.constant + c).abs() + norm * self.radius
    }
}

impl TestFunction for BumpPoly {
    fn based_modes(&self) -> usize {
        self.modes
    }

    fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        let y = self.offset(u, v);
        let s = y.iter().map(|x| x * x).sum::<f64>().sqrt() / self.radius;
        let b = bump(s);
        if b == 0.0 {
            0.0
        } else {
            self.amplitude * b * self.affine(u, v)
        }
    }

    fn derivatives(&self, u: &[f64], v: &[f64], d: &mut Derivatives) -> bool {
        let m = self.modes;
        d.clear();
        let y = self.offset(u, v);
        let r = self.radius;
        let ny = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = ny / r;
        let (b, _bp, h, bpp) = bump_jet(s);
        if b == 0.0 {
            return true;
        }
        let p = self.affine(u, v);
        let a = self.amplitude;
        let r2 = r * r;
        for i in 0..2 * m {
            let ai = self.linear[i];
            // ∂_i b(|y|/r) = h·y_i/r², since b'(s)/(r|y|) = h/r².
            let g = a * (h * y[i] / r2 * p + b * ai);
            let cos2 = if ny > 0.0 { y[i] * y[i] / (ny * ny) } else { 0.0 };
            let bii = bpp * cos2 / r2 + h * (1.0 - cos2) / r2;
            let hii = a * (bii * p + 2.0 * h * y[i] / r2 * ai);
            if i < m {
                d.grad_u[i] = g;
                d.hess_uu[i] = hii;
            } else {
                d.grad_v[i - m] = g;
                d.hess_vv[i - m] = hii;
            }
        }
        true
    }

    fn sup_value(&self) -> f64 {
        self.amplitude.abs() * self.affine_sup()
    }

    fn sup_grad(&self) -> f64 {
        let (d1, _, _) = bump_bounds();
        let lin = self.linear.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.amplitude.abs() * (d1 / self.radius * self.affine_sup() + lin)
    }

    fn sup_hess_vv(&self) -> f64 {
        let (_, h, d2) = bump_bounds();
        let m = self.modes;
        let r = self.radius;
        let lin_v: f64 = self.linear[m..].iter().map(|x| x.abs()).sum();
        self.amplitude.abs()
            * (m as f64 * (d2 + h) / (r * r) * self.affine_sup() + 2.0 * h / r * lin_v)
    }

    fn support(&self) -> Option<(Vec<f64>, f64)> {
        Some((self.center.clone(), self.radius))
    }

    /// Radial bumps reduce to a scan over the normalized radius.
    fn gradient_energy_max(&self, kappa: f64) -> Option<f64> {
        if !self.is_radial() {
            return None;
        }
        let n = 100_000;
        let best = (0..=n)
            .map(|i| {
                let (val, grad) = self.radial_profile(i as f64 / n as f64);
                grad * grad + kappa * val * val
            })
            .fold(0.0, f64::max);
        Some(best)
    }
}

/// The constant function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub modes: usize,
}

impl TestFunction for Constant {
    fn based_modes(&self) -> usize {
        self.modes
    }

    fn value(&self, _u: &[f64], _v: &[f64]) -> f64 {
        self.value
    }

    fn derivatives(&self, _u: &[f64], _v: &[f64], d: &mut Derivatives) -> bool {
        d.clear();
        true
    }

    fn sup_value(&self) -> f64 {
        self.value.abs()
    }

    fn sup_grad(&self) -> f64 {
        0.0
    }

    fn sup_hess_vv(&self) -> f64 {
        0.0
    }
}

/// Sum of test functions sharing the same mode count.
pub struct SumOf {
    parts: Vec<Box<dyn TestFunction>>,
    modes: usize,
}

impl SumOf {
    pub fn new(parts: Vec<Box<dyn TestFunction>>) -> Self {
        let modes = parts.iter().map(|p| p.based_modes()).max().unwrap_or(0);
        Self { parts, modes }
    }
}

impl TestFunction for SumOf {
    fn based_modes(&self) -> usize {
        self.modes
    }

    fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.value(u, v)).sum()
    }

    fn derivatives(&self, u: &[f64], v: &[f64], d: &mut Derivatives) -> bool {
        d.clear();
        for p in &self.parts {
            let mut part = Derivatives::zeros(p.based_modes());
            if !p.derivatives(u, v, &mut part) {
                return false;
            }
            for k in 0..p.based_modes() {
                d.grad_u[k] += part.grad_u[k];
                d.grad_v[k] += part.grad_v[k];
                d.hess_uu[k] += part.hess_uu[k];
                d.hess_vv[k] += part.hess_vv[k];
            }
        }
        true
    }

    fn sup_value(&self) -> f64 {
        self.parts.iter().map(|p| p.sup_value()).sum()
    }

    fn sup_grad(&self) -> f64 {
        self.parts.iter().map(|p| p.sup_grad()).sum()
    }

    fn sup_hess_vv(&self) -> f64 {
        self.parts.iter().map(|p| p.sup_hess_vv()).sum()
    }

    fn support(&self) -> Option<(Vec<f64>, f64)> {
        // Smallest ball around the first center containing all parts.
        let balls: Option<Vec<(Vec<f64>, f64)>> = self.parts.iter().map(|p| p.support()).collect();
        let balls = balls?;
        let (c0, _) = balls.first()?.clone();
        if balls.iter().any(|(c, _)| c.len() != c0.len()) {
            return None;
        }
        let r = balls
            .iter()
            .map(|(c, r)| {
                c.iter()
                    .zip(&c0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    + r
            })
            .fold(0.0, f64::max);
        Some((c0, r))
    }
}
