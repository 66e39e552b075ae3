//! Path functionals: `G_{eps,a} = int h (Bdot_eps^2 - c) dL^a`, the
//! local-time-free quadratic functional, exponential functionals `Psi_k`,
//! and the pathwise pieces of the sign-case integration by parts.

use std::f64::consts::{E, PI, SQRT_2};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{DerivativeStencil, Mollifier};
use crate::localtime::{self, sign, LocalTimeCurve, LocalTimeMethod};
use crate::paths::Grid;
use crate::quad::{composite_gauss, gauss8, gaussian_density, trapezoid, trapezoid_product};

/// Test functions `h` in `C^2_c(0, 1)` with analytic derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `amp * e * exp(-1 / (1 - x^2))`, `x` the affine image of `[lo, hi]` onto `[-1, 1]`; peak value `amp`.
    Bump { lo: f64, hi: f64, amp: f64 },
    /// `amp * (1 - x^2)^4` on the same affine image.
    Poly { lo: f64, hi: f64, amp: f64 },
    Zero,
}

impl TestFunction {
    pub fn bump(lo: f64, hi: f64) -> Self {
        TestFunction::Bump { lo, hi, amp: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TestFunction::Bump { lo, hi, .. } | TestFunction::Poly { lo, hi, .. } => {
                if !(0.0 < lo && lo < hi && hi < 1.0) {
                    return Err(invalid("h", format!("support [{lo}, {hi}] must lie inside (0, 1)")));
                }
                Ok(())
            }
            TestFunction::Zero => Ok(()),
        }
    }

    /// Support bounds, `None` for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TestFunction::Bump { lo, hi, .. } | TestFunction::Poly { lo, hi, .. } => Some((lo, hi)),
            TestFunction::Zero => None,
        }
    }

    /// Distance from the support to the boundary of `[0, 1]`.
    pub fn margin(&self) -> f64 {
        self.support().map_or(0.5, |(lo, hi)| lo.min(1.0 - hi))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            TestFunction::Bump { lo, hi, amp } => TestFunction::Bump { lo, hi, amp: amp * factor },
            TestFunction::Poly { lo, hi, amp } => TestFunction::Poly { lo, hi, amp: amp * factor },
            TestFunction::Zero => TestFunction::Zero,
        }
    }

    /// `(x, dx/dtheta, amp)` or `None` outside the open support.
    fn local(&self, theta: f64) -> Option<(f64, f64, f64)> {
        match *self {
            TestFunction::Bump { lo, hi, amp } | TestFunction::Poly { lo, hi, amp } => {
                if theta <= lo || theta >= hi {
                    return None;
                }
                let j = 2.0 / (hi - lo);
                Some(((theta - lo) * j - 1.0, j, amp))
            }
            TestFunction::Zero => None,
        }
    }

    fn derivs(&self, theta: f64) -> [f64; 3] {
        let Some((x, j, amp)) = self.local(theta) else {
            return [0.0; 3];
        };
        let s = 1.0 - x * x;
        match self {
            TestFunction::Bump { .. } => {
                let f = amp * E * (-1.0 / s).exp();
                let s2 = s * s;
                // f = amp e exp(g), g = -1/s: f' = f g', f'' = f (g'^2 + g'').
                let g1 = -2.0 * x / s2;
                let g2 = -2.0 / s2 - 8.0 * x * x / (s2 * s);
                [f, f * g1 * j, f * (g1 * g1 + g2) * j * j]
            }
            TestFunction::Poly { .. } => {
                let s3 = s * s * s;
                [amp * s3 * s, amp * -8.0 * x * s3 * j, amp * (-8.0 * s3 + 48.0 * x * x * s * s) * j * j]
            }
            TestFunction::Zero => [0.0; 3],
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.derivs(theta)[0]
    }

    pub fn d1(&self, theta: f64) -> f64 {
        self.derivs(theta)[1]
    }

    pub fn d2(&self, theta: f64) -> f64 {
        self.derivs(theta)[2]
    }

    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().map(|t| self.value(t)).collect()
    }
}

/// Profiles `k` for exponential functionals `Psi_k = exp <., k>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KProfile {
    Zero,
    Constant { value: f64 },
    /// `scale * e_index`, `index >= 1`.
    Eigen { index: usize, scale: f64 },
    Linear { intercept: f64, slope: f64 },
    /// `amp * cos(freq * pi * theta)`.
    Cosine { freq: f64, amp: f64 },
}

impl KProfile {
    pub fn k(&self, theta: f64) -> f64 {
        match *self {
            KProfile::Zero => 0.0,
            KProfile::Constant { value } => value,
            KProfile::Eigen { index, scale } => scale * SQRT_2 * (PI * (2 * index - 1) as f64 / 2.0 * theta).sin(),
            KProfile::Linear { intercept, slope } => intercept + slope * theta,
            KProfile::Cosine { freq, amp } => amp * (freq * PI * theta).cos(),
        }
    }

    pub fn scaled(&self, f: f64) -> Self {
        match *self {
            KProfile::Zero => KProfile::Zero,
            KProfile::Constant { value } => KProfile::Constant { value: value * f },
            KProfile::Eigen { index, scale } => KProfile::Eigen { index, scale: scale * f },
            KProfile::Linear { intercept, slope } => KProfile::Linear { intercept: intercept * f, slope: slope * f },
            KProfile::Cosine { freq, amp } => KProfile::Cosine { freq, amp: amp * f },
        }
    }
}

const Q_CELLS: usize = 2048;

/// `Psi_k` together with its `Q`-transform `K = Qk`, `K' = int_theta^1 k`.
#[derive(Clone, Debug)]
pub struct ExpFunctional {
    profile: KProfile,
    cum_k: Vec<f64>,
    cum_sk: Vec<f64>,
    qk_norm: f64,
}

impl ExpFunctional {
    pub fn new(profile: KProfile) -> Result<Self> {
        if let KProfile::Eigen { index: 0, .. } = profile {
            return Err(invalid("k", "eigen index starts at 1"));
        }
        let w = 1.0 / Q_CELLS as f64;
        let mut cum_k = vec![0.0; Q_CELLS + 1];
        let mut cum_sk = vec![0.0; Q_CELLS + 1];
        for c in 0..Q_CELLS {
            let (a, b) = (c as f64 * w, (c + 1) as f64 * w);
            cum_k[c + 1] = cum_k[c] + gauss8(|s| profile.k(s), a, b);
            cum_sk[c + 1] = cum_sk[c] + gauss8(|s| s * profile.k(s), a, b);
        }
        let mut out = Self { profile, cum_k, cum_sk, qk_norm: 0.0 };
        out.qk_norm = composite_gauss(|t| out.q_transform(t).1.powi(2), 0.0, 1.0, 256);
        Ok(out)
    }

    pub fn profile(&self) -> &KProfile {
        &self.profile
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.profile, KProfile::Zero)
    }

    pub fn k(&self, theta: f64) -> f64 {
        self.profile.k(theta)
    }

    /// `(K_theta, K'_theta)` by cumulative Gauss-Legendre quadrature.
    pub fn q_transform(&self, theta: f64) -> (f64, f64) {
        let theta = theta.clamp(0.0, 1.0);
        let c = ((theta * Q_CELLS as f64).floor() as usize).min(Q_CELLS - 1);
        let a = c as f64 / Q_CELLS as f64;
        let below_k = self.cum_k[c] + gauss8(|s| self.profile.k(s), a, theta);
        let below_sk = self.cum_sk[c] + gauss8(|s| s * self.profile.k(s), a, theta);
        let kp = self.cum_k[Q_CELLS] - below_k;
        (below_sk + theta * kp, kp)
    }

    /// `<Qk, k> = int (K')^2`.
    pub fn qk_norm(&self) -> f64 {
        self.qk_norm
    }

    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().map(|t| self.k(t)).collect()
    }

    /// `Psi_k` of a sampled path.
    pub fn psi(&self, values: &[f64], grid: &Grid) -> PsiValue {
        psi_k(values, &self.on_grid(grid), grid)
    }
}

/// `Psi_k` with its logarithm carried alongside so overflow is detectable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiValue {
    pub log_value: f64,
    pub value: f64,
}

/// `exp(<path, k>)` with the trapezoid inner product.
pub fn psi_k(values: &[f64], k_nodes: &[f64], grid: &Grid) -> PsiValue {
    let log_value = trapezoid_product(values, k_nodes, grid.step());
    PsiValue { log_value, value: log_value.exp() }
}

/// Which constant is subtracted from `Bdot_eps^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Renormalization {
    /// `step * sum w_i^2`, the exact variance of the discrete mollified derivative.
    Discrete,
    /// `c_{eps,theta}` from the continuum quadratic form.
    Continuum,
}

/// Precomputed evaluator of `G_{eps,a}` on a fixed grid.
#[derive(Clone, Debug)]
pub struct GEvaluator {
    grid: Grid,
    stencil: DerivativeStencil,
    h_nodes: Vec<f64>,
    c: f64,
    h: TestFunction,
    epsilon: f64,
}

impl GEvaluator {
    pub fn new(grid: Grid, h: TestFunction, mollifier: &Mollifier, renorm: Renormalization) -> Result<Self> {
        h.validate()?;
        let eps = mollifier.epsilon();
        if h.support().is_some() && !(eps < h.margin()) {
            return Err(Error::WidthExceedsBoundary { epsilon: eps, theta: h.margin() });
        }
        let stencil = mollifier.stencil(&grid)?;
        let h_nodes = h.on_grid(&grid);
        let (lo, hi) = stencil.admissible_nodes(&grid);
        if h_nodes.iter().enumerate().any(|(j, v)| *v != 0.0 && (j < lo || j > hi)) {
            return Err(Error::WidthExceedsBoundary { epsilon: eps, theta: h.margin() });
        }
        let c = match renorm {
            Renormalization::Discrete => stencil.discrete_c(),
            Renormalization::Continuum => mollifier.c_eps(0.5)?,
        };
        Ok(Self { grid, stencil, h_nodes, c, h, epsilon: eps })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h(&self) -> &TestFunction {
        &self.h
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stencil(&self) -> &DerivativeStencil {
        &self.stencil
    }

    /// `int h (Bdot_eps^2 - c) dL` for a precomputed local time curve.
    pub fn evaluate_with(&self, values: &[f64], curve: &LocalTimeCurve) -> Result<f64> {
        if values.len() != self.grid.n() + 1 {
            return Err(Error::LengthMismatch { expected: self.grid.n() + 1, got: values.len() });
        }
        let mut acc = 0.0;
        for (j, dl) in curve.active_increments() {
            let hj = self.h_nodes[j];
            if hj == 0.0 {
                continue;
            }
            let b = self.stencil.apply(values, j);
            acc += hj * (b * b - self.c) * dl;
        }
        Ok(acc)
    }

    /// Pathwise integrand `h_j (Bdot_j^2 - c)` at every node (zero off the support).
    pub fn integrand(&self, values: &[f64]) -> Vec<f64> {
        self.h_nodes
            .iter()
            .enumerate()
            .map(|(j, &hj)| if hj == 0.0 { 0.0 } else { let b = self.stencil.apply(values, j); hj * (b * b - self.c) })
            .collect()
    }
}

/// `G_{eps,a}(path)` with the local time estimated by `method`.
pub fn g_eps_a(values: &[f64], grid: &Grid, h: &TestFunction, a: f64, mollifier: &Mollifier, method: LocalTimeMethod, delta: f64) -> Result<f64> {
    let ev = GEvaluator::new(*grid, *h, mollifier, Renormalization::Discrete)?;
    let curve = localtime::localtime(values, grid, a, method, delta)?;
    ev.evaluate_with(values, &curve)
}

/// Exact expectation, under Wiener measure on the grid, of `G_{eps,a}` built
/// with the occupation estimator and discrete renormalization. It does not
/// depend on `eps`: given `B_theta = x`, `Bdot` has mean `x / (2 theta)` and
/// variance `c - 1/(4 theta)`.
pub fn g_expectation_occupation(h: &TestFunction, grid: &Grid, a: f64, delta: f64) -> f64 {
    let w = grid.step() / (2.0 * delta);
    let (u, v) = (a - delta, a + delta);
    (1..grid.n())
        .map(|j| {
            let th = grid.node(j);
            let hj = h.value(th);
            if hj == 0.0 {
                return 0.0;
            }
            hj * w * (-1.0 / (4.0 * th)) * (v * gaussian_density(v, th) - u * gaussian_density(u, th))
        })
        .sum()
}

/// `int_{eps}^{1-eps} (Bdot_eps^2 - c) dtheta` for several widths at once, by
/// FFT convolution of the path increments with each stencil.
pub struct QuadraticSweep {
    grid: Grid,
    stencils: Vec<DerivativeStencil>,
    spectra: Vec<Vec<Complex<f64>>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    len: usize,
}

impl std::fmt::Debug for QuadraticSweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuadraticSweep").field("grid", &self.grid).field("len", &self.len).finish()
    }
}

impl QuadraticSweep {
    pub fn new(grid: Grid, mollifiers: &[Mollifier]) -> Result<Self> {
        let stencils = mollifiers.iter().map(|m| m.stencil(&grid)).collect::<Result<Vec<_>>>()?;
        let kmax = stencils.iter().map(|s| s.half_width()).max().unwrap_or(1);
        if 2 * kmax >= grid.n() {
            return Err(invalid("epsilon", "mollifier wider than the interval"));
        }
        let len = (grid.n() + 2 * kmax).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let spectra = stencils
            .iter()
            .map(|s| {
                let mut buf = vec![Complex::new(0.0, 0.0); len];
                for (i, w) in s.weights().iter().enumerate() {
                    buf[i] = Complex::new(*w / len as f64, 0.0);
                }
                fwd.process(&mut buf);
                buf
            })
            .collect();
        Ok(Self { grid, stencils, spectra, fwd, inv, len })
    }

    pub fn stencils(&self) -> &[DerivativeStencil] {
        &self.stencils
    }

    /// Mollified derivative on the admissible nodes `[K, n - K]` for stencil `idx`.
    pub fn derivative_on_grid(&self, increments: &[f64], idx: usize) -> Vec<f64> {
        let spec = self.increment_spectrum(increments);
        self.derivative_from_spectrum(&spec, idx)
    }

    fn increment_spectrum(&self, increments: &[f64]) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for (b, d) in buf.iter_mut().zip(increments) {
            b.re = *d;
        }
        self.fwd.process(&mut buf);
        buf
    }

    fn derivative_from_spectrum(&self, spec: &[Complex<f64>], idx: usize) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = spec.iter().zip(&self.spectra[idx]).map(|(a, b)| a * b).collect();
        self.inv.process(&mut buf);
        let k = self.stencils[idx].half_width();
        // Symmetric weights turn the correlation into a convolution:
        // Bdot_m = (w * d)[m + K - 1].
        (k..=self.grid.n() - k).map(|m| buf[m + k - 1].re).collect()
    }

    /// One value of the quadratic functional per stencil.
    pub fn evaluate(&self, increments: &[f64]) -> Result<Vec<f64>> {
        if increments.len() != self.grid.n() {
            return Err(Error::LengthMismatch { expected: self.grid.n(), got: increments.len() });
        }
        let spec = self.increment_spectrum(increments);
        Ok((0..self.stencils.len())
            .map(|i| {
                let c = self.stencils[i].discrete_c();
                let d: Vec<f64> = self.derivative_from_spectrum(&spec, i).into_iter().map(|b| b * b - c).collect();
                trapezoid(&d, self.grid.step())
            })
            .collect())
    }
}

/// `int_{eps}^{1-eps} (Bdot_eps^2 - c) dtheta` for a single width.
pub fn g_eps_quadratic(values: &[f64], grid: &Grid, mollifier: &Mollifier) -> Result<f64> {
    let sweep = QuadraticSweep::new(*grid, std::slice::from_ref(mollifier))?;
    let inc: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(sweep.evaluate(&inc)?[0])
}

/// `int k h sign(B - a) dtheta`, the directional derivative of `<., k>` along `h sign(B - a)`.
pub fn sign_direction(values: &[f64], grid: &Grid, k_nodes: &[f64], h_nodes: &[f64], a: f64) -> f64 {
    let f: Vec<f64> = values.iter().zip(k_nodes).zip(h_nodes).map(|((b, k), h)| k * h * sign(b - a)).collect();
    trapezoid(&f, grid.step())
}

/// `int h'' |x - a| dtheta` for a path `x` (for the reflected form pass `X = |B - a|` and `a = 0`).
pub fn second_derivative_term(values: &[f64], grid: &Grid, h2_nodes: &[f64], a: f64) -> f64 {
    let f: Vec<f64> = values.iter().zip(h2_nodes).map(|(b, h)| h * (b - a).abs()).collect();
    trapezoid(&f, grid.step())
}

/// MC estimate of `E[Psi_k(B) int k h sign(B - a) dtheta]` from a path set.
pub fn ibp_lhs_sign_mc(paths: &[Vec<f64>], grid: &Grid, ef: &ExpFunctional, h: &TestFunction, a: f64) -> (f64, f64) {
    let k_nodes = ef.on_grid(grid);
    let h_nodes = h.on_grid(grid);
    let mut acc = crate::harness::stats::Welford::new();
    for p in paths {
        let psi = psi_k(p, &k_nodes, grid).value;
        acc.push(psi * sign_direction(p, grid, &k_nodes, &h_nodes, a));
    }
    (acc.mean(), acc.stderr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::SpectralBasis;
    use crate::kernels::MollifierSpec;
    use crate::paths::{sample_bm, stream_rng};

    #[test]
    fn test_function_derivatives() {
        for h in [TestFunction::Bump { lo: 0.2, hi: 0.8, amp: 1.5 }, TestFunction::Poly { lo: 0.1, hi: 0.6, amp: 2.0 }] {
            for &t in &[0.25, 0.4, 0.55] {
                let d = 1e-5;
                let fd1 = (h.value(t + d) - h.value(t - d)) / (2.0 * d);
                let fd2 = (h.d1(t + d) - h.d1(t - d)) / (2.0 * d);
                assert!((fd1 - h.d1(t)).abs() < 1e-6 * (1.0 + h.d1(t).abs()), "{h:?} {t}");
                assert!((fd2 - h.d2(t)).abs() < 1e-5 * (1.0 + h.d2(t).abs()), "{h:?} {t}");
            }
            assert_eq!(h.value(0.05), 0.0);
            assert_eq!(h.d2(0.95), 0.0);
        }
        let b = TestFunction::bump(0.3, 0.7);
        assert!((b.value(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_transform_constant_and_zero() {
        let one = ExpFunctional::new(KProfile::Constant { value: 1.0 }).unwrap();
        for &t in &[0.0, 0.2, 0.5, 1.0] {
            let (k, kp) = one.q_transform(t);
            assert!((k - (t - t * t / 2.0)).abs() < 1e-14);
            assert!((kp - (1.0 - t)).abs() < 1e-14);
        }
        assert!((one.qk_norm() - 1.0 / 3.0).abs() < 1e-14);
        let zero = ExpFunctional::new(KProfile::Zero).unwrap();
        assert_eq!(zero.q_transform(0.3), (0.0, 0.0));
        let b = SpectralBasis::new(3).unwrap();
        let e2 = ExpFunctional::new(KProfile::Eigen { index: 2, scale: 1.0 }).unwrap();
        assert!((e2.k(0.3) - b.e(1, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn qk_inner_products_agree() {
        let ef = ExpFunctional::new(KProfile::Cosine { freq: 1.3, amp: 0.8 }).unwrap();
        let via_k = composite_gauss(|t| ef.q_transform(t).0 * ef.k(t), 0.0, 1.0, 256);
        assert!((via_k - ef.qk_norm()).abs() < 1e-12);
        let (k0, _) = ef.q_transform(0.0);
        let (_, kp1) = ef.q_transform(1.0);
        assert!(k0.abs() < 1e-15 && kp1.abs() < 1e-15);
    }

    #[test]
    fn psi_trivial_cases() {
        let g = Grid::new(64).unwrap();
        let zero = ExpFunctional::new(KProfile::Zero).unwrap();
        let p = sample_bm(&g, &mut stream_rng(0, 0));
        assert_eq!(zero.psi(p.values(), &g).value, 1.0);
        let one = ExpFunctional::new(KProfile::Constant { value: 3.0 }).unwrap();
        assert_eq!(one.psi(&vec![0.0; 65], &g).value, 1.0);
    }

    #[test]
    fn g_vanishes_far_from_level() {
        let g = Grid::new(4096).unwrap();
        let m = Mollifier::new(MollifierSpec::bump(0.05)).unwrap();
        let p = sample_bm(&g, &mut stream_rng(5, 0));
        let h = TestFunction::bump(0.3, 0.7);
        let v = g_eps_a(p.values(), &g, &h, 25.0, &m, LocalTimeMethod::Occupation, 0.06).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn g_rejects_wide_mollifier() {
        let g = Grid::new(4096).unwrap();
        let m = Mollifier::new(MollifierSpec::bump(0.35)).unwrap();
        assert!(GEvaluator::new(g, TestFunction::bump(0.3, 0.7), &m, Renormalization::Discrete).is_err());
    }

    #[test]
    fn g_linear_in_h() {
        let g = Grid::new(4096).unwrap();
        let m = Mollifier::new(MollifierSpec::bump(0.02)).unwrap();
        let p = sample_bm(&g, &mut stream_rng(9, 1));
        let h1 = TestFunction::bump(0.2, 0.6);
        let h2 = TestFunction::Poly { lo: 0.3, hi: 0.9, amp: 1.0 };
        let curve = localtime::occupation_localtime(p.values(), &g, 0.0, 0.06).unwrap();
        let e1 = GEvaluator::new(g, h1, &m, Renormalization::Discrete).unwrap();
        let e2 = GEvaluator::new(g, h2, &m, Renormalization::Discrete).unwrap();
        let e3 = GEvaluator::new(g, h1.scaled(2.0), &m, Renormalization::Discrete).unwrap();
        let (a, b, c) = (e1.evaluate_with(p.values(), &curve).unwrap(), e2.evaluate_with(p.values(), &curve).unwrap(), e3.evaluate_with(p.values(), &curve).unwrap());
        assert!((c - 2.0 * a).abs() < 1e-12 * (1.0 + c.abs()));
        let sum: Vec<f64> = e1.integrand(p.values()).iter().zip(e2.integrand(p.values())).map(|(x, y)| x + y).collect();
        let s = localtime::stieltjes_dl(&sum, &curve).unwrap();
        assert!((s - (a + b)).abs() < 1e-10 * (1.0 + s.abs()));
    }

    #[test]
    fn quadratic_sweep_matches_direct_stencil() {
        let g = Grid::new(2048).unwrap();
        let m = Mollifier::new(MollifierSpec::bump(0.03)).unwrap();
        let p = sample_bm(&g, &mut stream_rng(11, 0));
        let sweep = QuadraticSweep::new(g, std::slice::from_ref(&m)).unwrap();
        let fft = sweep.derivative_on_grid(&p.increments(), 0);
        let st = m.stencil(&g).unwrap();
        let (lo, hi) = st.admissible_nodes(&g);
        for (i, mm) in (lo..=hi).enumerate().step_by(97) {
            assert!((fft[i] - st.apply(p.values(), mm)).abs() < 1e-10);
        }
        let k0 = g_eps_quadratic(&vec![0.0; 2049], &g, &m).unwrap();
        assert!(k0 < 0.0);
    }
}
