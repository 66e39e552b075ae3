//! Mollifier family `rho_eps(x) = rho(x / eps) / eps`, convolution of sampled
//! paths against it, and the renormalization constants.
//!
//! Sampled paths are treated as their piecewise-linear interpolants, so the
//! convolution integrals reduce to the antiderivatives
//! `P(x) = int_{-1}^x rho` and `M(x) = int_{-1}^x u rho(u) du`, which are
//! evaluated by composite Gauss-Legendre quadrature on `quad_points` panels of
//! the kernel support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::Grid;
use crate::quad::gauss8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `exp(-1 / (1 - x^2))` on `(-1, 1)`, normalized numerically.
    Bump,
    /// `3/4 (1 - x^2)` on `(-1, 1)`.
    Epanechnikov,
}

/// How the kernel mass is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassConvention {
    /// `int_R rho = 1`.
    UnitMass,
    /// `int_0^1 rho = 1`, i.e. total mass 2.
    HalfLine,
}

impl MassConvention {
    fn total(self) -> f64 {
        match self {
            MassConvention::UnitMass => 1.0,
            MassConvention::HalfLine => 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub kernel: KernelKind,
    pub epsilon: f64,
    pub quad_points: usize,
    pub mass: MassConvention,
}

impl MollifierSpec {
    pub fn new(kernel: KernelKind, epsilon: f64) -> Self {
        Self { kernel, epsilon, quad_points: 512, mass: MassConvention::UnitMass }
    }

    pub fn bump(epsilon: f64) -> Self {
        Self::new(KernelKind::Bump, epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }
}

/// The unscaled kernel `rho` on `[-1, 1]` with tabulated antiderivatives at the
/// panel edges.
#[derive(Clone, Debug)]
pub struct Kernel {
    kind: KernelKind,
    scale: f64,
    panels: usize,
    width: f64,
    cdf_edges: Vec<f64>,
    moment_edges: Vec<f64>,
    l2_sq: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, mass: MassConvention, quad_points: usize) -> Result<Self> {
        if quad_points < 2 {
            return Err(crate::error::invalid("quad_points", "need at least 2 panels"));
        }
        let mut k = Kernel {
            kind,
            scale: 1.0,
            panels: quad_points,
            width: 2.0 / quad_points as f64,
            cdf_edges: Vec::new(),
            moment_edges: Vec::new(),
            l2_sq: 0.0,
        };
        let raw: f64 = (0..quad_points)
            .map(|p| {
                let (a, b) = k.panel(p);
                gauss8(|x| k.shape(x), a, b)
            })
            .sum();
        k.scale = mass.total() / raw;

        let mut cdf = Vec::with_capacity(quad_points + 1);
        let mut mom = Vec::with_capacity(quad_points + 1);
        let (mut c, mut m, mut l2) = (0.0, 0.0, 0.0);
        cdf.push(0.0);
        mom.push(0.0);
        for p in 0..quad_points {
            let (a, b) = k.panel(p);
            c += gauss8(|x| k.density(x), a, b);
            m += gauss8(|x| x * k.density(x), a, b);
            l2 += gauss8(|x| k.density(x).powi(2), a, b);
            cdf.push(c);
            mom.push(m);
        }
        k.cdf_edges = cdf;
        k.moment_edges = mom;
        k.l2_sq = l2;
        Ok(k)
    }

    fn panel(&self, p: usize) -> (f64, f64) {
        let a = -1.0 + p as f64 * self.width;
        let b = if p + 1 == self.panels { 1.0 } else { -1.0 + (p + 1) as f64 * self.width };
        (a, b)
    }

    fn shape(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        match self.kind {
            KernelKind::Bump => (-1.0 / (1.0 - x * x)).exp(),
            KernelKind::Epanechnikov => 0.75 * (1.0 - x * x),
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn density(&self, x: f64) -> f64 {
        self.scale * self.shape(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        match self.kind {
            KernelKind::Bump => {
                let s = 1.0 - x * x;
                self.density(x) * (-2.0 * x / (s * s))
            }
            KernelKind::Epanechnikov => self.scale * (-1.5 * x),
        }
    }

    fn locate(&self, x: f64) -> usize {
        (((x + 1.0) / self.width).floor() as usize).min(self.panels - 1)
    }

    /// `int_{-1}^x rho`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.cdf_edges[self.panels];
        }
        let p = self.locate(x);
        let (a, _) = self.panel(p);
        self.cdf_edges[p] + gauss8(|u| self.density(u), a, x)
    }

    /// `int_{-1}^x u rho(u) du`.
    pub fn first_moment(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.moment_edges[self.panels];
        }
        let p = self.locate(x);
        let (a, _) = self.panel(p);
        self.moment_edges[p] + gauss8(|u| u * self.density(u), a, x)
    }

    pub fn total_mass(&self) -> f64 {
        self.cdf_edges[self.panels]
    }

    /// `||rho||^2_{L^2}`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_sq
    }

    /// `int rho(x) cos(xi x) dx`; for even `rho` this is its Fourier transform.
    pub fn cosine_transform(&self, xi: f64) -> f64 {
        (0..self.panels)
            .map(|p| {
                let (a, b) = self.panel(p);
                gauss8(|x| self.density(x) * (xi * x).cos(), a, b)
            })
            .sum()
    }

    /// Applies `f` to every quadrature node of the support, with its weight.
    fn for_each_node(&self, mut f: impl FnMut(f64, f64)) {
        for p in 0..self.panels {
            let (a, b) = self.panel(p);
            crate::quad::gauss8_nodes(a, b, &mut f);
        }
    }
}

/// A kernel bound to a width `epsilon`.
#[derive(Clone, Debug)]
pub struct Mollifier {
    spec: MollifierSpec,
    kernel: Kernel,
}

impl Mollifier {
    pub fn new(spec: MollifierSpec) -> Result<Self> {
        if !(spec.epsilon > 0.0 && spec.epsilon.is_finite()) {
            return Err(crate::error::invalid("epsilon", format!("must be positive, got {}", spec.epsilon)));
        }
        let kernel = Kernel::new(spec.kernel, spec.mass, spec.quad_points)?;
        Ok(Self { spec, kernel })
    }

    /// Rebinds the same kernel tables to another width.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(crate::error::invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(Self { spec: self.spec.with_epsilon(epsilon), kernel: self.kernel.clone() })
    }

    pub fn spec(&self) -> &MollifierSpec {
        &self.spec
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    /// `rho_eps(x)`.
    pub fn density(&self, x: f64) -> f64 {
        let e = self.spec.epsilon;
        self.kernel.density(x / e) / e
    }

    /// `rho_eps'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let e = self.spec.epsilon;
        self.kernel.derivative(x / e) / (e * e)
    }

    /// Width must fit strictly inside `(0, 1)` around `theta`.
    pub fn check_theta(&self, theta: f64) -> Result<()> {
        let e = self.spec.epsilon;
        if !(e < theta.min(1.0 - theta)) {
            return Err(Error::WidthExceedsBoundary { epsilon: e, theta });
        }
        Ok(())
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let step = grid.step();
        if step > self.spec.epsilon / 10.0 * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse { step, epsilon: self.spec.epsilon });
        }
        Ok(())
    }

    fn cells(&self, grid: &Grid, theta: f64) -> (usize, usize) {
        let e = self.spec.epsilon;
        let n = grid.n() as f64;
        let lo = (((theta - e) * n).floor().max(0.0)) as usize;
        let hi = ((((theta + e) * n).ceil()) as usize).min(grid.n());
        (lo, hi)
    }

    /// `(rho_eps * path)_theta`, path taken as its piecewise-linear interpolant.
    pub fn mollify(&self, values: &[f64], grid: &Grid, theta: f64) -> Result<f64> {
        self.validate(values, grid, theta)?;
        let e = self.spec.epsilon;
        let h = grid.step();
        let (lo, hi) = self.cells(grid, theta);
        let mut acc = 0.0;
        for i in lo..hi {
            let s0 = grid.node(i);
            let u0 = ((s0 - theta) / e).max(-1.0);
            let u1 = ((grid.node(i + 1) - theta) / e).min(1.0);
            if u1 <= u0 {
                continue;
            }
            let dp = self.kernel.cdf(u1) - self.kernel.cdf(u0);
            let dm = self.kernel.first_moment(u1) - self.kernel.first_moment(u0);
            let slope = (values[i + 1] - values[i]) / h;
            acc += values[i] * dp + slope * ((theta - s0) * dp + e * dm);
        }
        Ok(acc)
    }

    /// `(-rho_eps' * path)_theta`, the derivative of [`Self::mollify`].
    pub fn mollified_derivative(&self, values: &[f64], grid: &Grid, theta: f64) -> Result<f64> {
        self.validate(values, grid, theta)?;
        let e = self.spec.epsilon;
        let h = grid.step();
        let (lo, hi) = self.cells(grid, theta);
        let mut acc = 0.0;
        for i in lo..hi {
            let u0 = ((grid.node(i) - theta) / e).max(-1.0);
            let u1 = ((grid.node(i + 1) - theta) / e).min(1.0);
            if u1 <= u0 {
                continue;
            }
            let dp = self.kernel.cdf(u1) - self.kernel.cdf(u0);
            acc += (values[i + 1] - values[i]) / h * dp;
        }
        Ok(acc)
    }

    fn validate(&self, values: &[f64], grid: &Grid, theta: f64) -> Result<()> {
        if values.len() != grid.n() + 1 {
            return Err(Error::LengthMismatch { expected: grid.n() + 1, got: values.len() });
        }
        self.check_theta(theta)?;
        self.check_grid(grid)
    }

    /// `c_{eps,theta} = <Q rho_eps'(. - theta), rho_eps'(. - theta)>` by double
    /// quadrature, `Q` having kernel `theta ^ sigma`.
    pub fn c_eps(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        let e = self.spec.epsilon;
        let k = &self.kernel;
        let f = |s: f64| self.derivative(s - theta);
        // Cumulative integrals of f and sigma f over whole panels in sigma.
        let panels = k.panels;
        let mut c0 = vec![0.0; panels + 1];
        let mut c1 = vec![0.0; panels + 1];
        let edge = |p: usize| {
            let (a, b) = k.panel(p.min(panels - 1));
            if p == panels { theta + e * b } else { theta + e * a }
        };
        for p in 0..panels {
            let (a, b) = (edge(p), edge(p + 1));
            c0[p + 1] = c0[p] + gauss8(f, a, b);
            c1[p + 1] = c1[p] + gauss8(|s| s * f(s), a, b);
        }
        let total0 = c0[panels];
        let mut acc = 0.0;
        for p in 0..panels {
            let (a, b) = (edge(p), edge(p + 1));
            crate::quad::gauss8_nodes(a, b, |s, w| {
                let below1 = c1[p] + gauss8(|r| r * f(r), a, s);
                let below0 = c0[p] + gauss8(f, a, s);
                let inner = below1 + s * (total0 - below0);
                acc += w * inner * f(s);
            });
        }
        Ok(acc)
    }

    /// `||rho||^2 / eps`, the interior value of [`Self::c_eps`].
    pub fn c_eps_closed(&self) -> f64 {
        self.kernel.l2_norm_sq() / self.spec.epsilon
    }

    /// `int rho_eps(sigma - theta)^2 d sigma` by direct quadrature.
    pub fn l2_sq_scaled(&self) -> f64 {
        let e = self.spec.epsilon;
        let mut acc = 0.0;
        self.kernel.for_each_node(|x, w| acc += w * (self.kernel.density(x) / e).powi(2) * e);
        acc
    }

    /// Fourier factor `rho_hat(omega eps)`, so that
    /// `(rho_eps * cos(omega .))_theta = rho_hat(omega eps) cos(omega theta)`
    /// for `theta` at distance `>= eps` from the boundary.
    pub fn fourier_factor(&self, omega: f64) -> f64 {
        self.kernel.cosine_transform(omega * self.spec.epsilon)
    }

    /// Weights for the mollified derivative at grid nodes.
    pub fn stencil(&self, grid: &Grid) -> Result<DerivativeStencil> {
        self.check_grid(grid)?;
        DerivativeStencil::new(self, grid)
    }
}

/// Mollified-derivative weights at a grid node `theta_m`:
/// `B'_{eps}(theta_m) = sum_i w_i (B_{m-K+i+1} - B_{m-K+i})`.
///
/// `w_i` is the mass of `rho_eps(. - theta_m)` on cell `i` divided by the step,
/// so `step * sum w_i^2` is the exact variance of the mollified derivative of a
/// piecewise-linear Brownian interpolant.
#[derive(Clone, Debug)]
pub struct DerivativeStencil {
    half_width: usize,
    weights: Vec<f64>,
    step: f64,
}

impl DerivativeStencil {
    fn new(m: &Mollifier, grid: &Grid) -> Result<Self> {
        let h = grid.step();
        let e = m.epsilon();
        let k = (e / h).ceil() as usize;
        let mut right = Vec::with_capacity(k);
        for r in 0..k {
            let u0 = (r as f64 * h / e).min(1.0);
            let u1 = ((r + 1) as f64 * h / e).min(1.0);
            right.push((m.kernel.cdf(u1) - m.kernel.cdf(u0)) / h);
        }
        let mut weights: Vec<f64> = right.iter().rev().copied().collect();
        weights.extend_from_slice(&right);
        Ok(Self { half_width: k, weights, step: h })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Exact variance of the discrete mollified Brownian derivative.
    pub fn discrete_c(&self) -> f64 {
        self.step * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Node range `[lo, hi]` on which the stencil fits inside the grid.
    pub fn admissible_nodes(&self, grid: &Grid) -> (usize, usize) {
        (self.half_width, grid.n().saturating_sub(self.half_width))
    }

    /// Mollified derivative at node `m` from path values; `m` must be admissible.
    #[inline]
    pub fn apply(&self, values: &[f64], m: usize) -> f64 {
        let start = m - self.half_width;
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w * (values[start + i + 1] - values[start + i]);
        }
        acc
    }

    /// Same as [`Self::apply`] but from precomputed increments.
    #[inline]
    pub fn apply_increments(&self, increments: &[f64], m: usize) -> f64 {
        let start = m - self.half_width;
        self.weights.iter().zip(&increments[start..start + self.weights.len()]).map(|(w, d)| w * d).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(eps: f64) -> Mollifier {
        Mollifier::new(MollifierSpec::bump(eps)).unwrap()
    }

    #[test]
    fn kernel_is_even_nonnegative_unit_mass() {
        for kind in [KernelKind::Bump, KernelKind::Epanechnikov] {
            let k = Kernel::new(kind, MassConvention::UnitMass, 512).unwrap();
            assert!((k.total_mass() - 1.0).abs() < 1e-13, "{kind:?}");
            for i in 0..200 {
                let x = -1.2 + 2.4 * i as f64 / 199.0;
                assert!(k.density(x) >= 0.0);
                assert_eq!(k.density(x), k.density(-x));
                if x.abs() >= 1.0 {
                    assert_eq!(k.density(x), 0.0);
                }
            }
            assert!((k.cdf(0.0) - 0.5).abs() < 1e-14);
            assert!(k.first_moment(1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn half_line_convention_doubles_mass() {
        let k = Kernel::new(KernelKind::Bump, MassConvention::HalfLine, 512).unwrap();
        assert!((k.cdf(1.0) - k.cdf(0.0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let k = Kernel::new(KernelKind::Bump, MassConvention::UnitMass, 512).unwrap();
        for &x in &[-0.9, -0.5, 0.0, 0.3, 0.77] {
            let d = 1e-6;
            let fd = (k.density(x + d) - k.density(x - d)) / (2.0 * d);
            assert!((fd - k.derivative(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn c_eps_equals_scaled_l2_norm() {
        let m = bump(0.05);
        let c = m.c_eps(0.4).unwrap();
        assert!((c - m.c_eps_closed()).abs() / c < 1e-10, "{c} vs {}", m.c_eps_closed());
        assert!((m.l2_sq_scaled() - m.c_eps_closed()).abs() / c < 1e-12);
    }

    #[test]
    fn c_eps_rejects_boundary() {
        let m = bump(0.1);
        assert!(matches!(m.c_eps(0.05), Err(Error::WidthExceedsBoundary { .. })));
        assert!(matches!(m.c_eps(0.95), Err(Error::WidthExceedsBoundary { .. })));
    }

    #[test]
    fn mollify_rejects_coarse_grid() {
        let m = bump(0.05);
        let g = Grid::new(64).unwrap();
        let v = vec![0.0; 65];
        assert!(matches!(m.mollify(&v, &g, 0.5), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn stencil_is_symmetric_with_unit_mass() {
        let m = bump(0.02);
        let g = Grid::new(4096).unwrap();
        let s = m.stencil(&g).unwrap();
        let w = s.weights();
        for i in 0..w.len() {
            assert_eq!(w[i], w[w.len() - 1 - i]);
        }
        let mass: f64 = w.iter().sum::<f64>() * g.step();
        assert!((mass - 1.0).abs() < 1e-13);
    }

    #[test]
    fn fourier_factor_limits() {
        let m = bump(0.01);
        assert!((m.fourier_factor(0.0) - 1.0).abs() < 1e-13);
        assert!(m.fourier_factor(1e4).abs() < 1e-3);
    }
}
