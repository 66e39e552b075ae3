//! Ornstein-Uhlenbeck semigroup acting on `G_eps`: the explicit Gaussian
//! formula for `P_t G_eps(z)`, a Monte-Carlo Mehler oracle for it, the
//! `L^2(mu)` decay study, and exponential convergence for `Psi_k`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::closedform::SpectralBasis;
use crate::error::{invalid, Error, Result};
use crate::functionals::{ExpFunctional, TestFunction};
use crate::harness::stats::{linear_fit, Welford};
use crate::kernels::Mollifier;
use crate::localtime::occupation_localtime;
use crate::paths::{sample_v_field, Grid, ModeField, Path, SpectralGridOps, SpectralSample};
use crate::quad::{composite_gauss, gaussian_density};

/// Smallest admissible `q_t(theta)`.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// `rho_hat(sqrt(lambda_i) eps)` for every mode: `rho_eps * e_i = rho_hat e_i`
/// at distance `>= eps` from the boundary.
pub fn fourier_factors(mollifier: &Mollifier, basis: &SpectralBasis) -> Vec<f64> {
    basis.omegas().iter().map(|w| mollifier.fourier_factor(*w)).collect()
}

/// How the covariance sums over modes are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesMode {
    /// Every quantity restricted to the first `N` modes, so the formula is
    /// exact for the `N`-mode Gaussian model (`q^N_t`, `nu^N`, `c^t` over `i <= N`).
    Truncated,
    /// `q_t = theta - q^t`, `nu = 1/2 - sum e^{-lambda t} ...`: the continuum
    /// quantities, with exponentially convergent sums.
    Resummed,
}

/// The four bracketed terms of the explicit formula, each integrated in `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PtGComponents {
    /// `int h w (d_theta z_eps)^2`.
    pub gradient: f64,
    /// `-int h w c^t`.
    pub renormalization: f64,
    /// `int h w 2 y l' d_theta z_eps`, `y = a - z(t, theta)`.
    pub cross: f64,
    /// `int h w (y^2 - q_t) l'^2`.
    pub drift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PtGEvaluation {
    pub t: f64,
    pub epsilon: f64,
    pub level: f64,
    pub value: f64,
    pub components: PtGComponents,
}

/// Per-`(t, eps)` tables for repeated evaluation of `P_t G_eps` at many `z`.
#[derive(Clone, Debug)]
pub struct PtgPlan {
    t: f64,
    epsilon: f64,
    mode: SeriesMode,
    /// Trapezoid weight times `h` at each active node.
    weights: Vec<f64>,
    thetas: Vec<f64>,
    q: Vec<f64>,
    nu: Vec<f64>,
    ct: Vec<f64>,
    n_eff: usize,
    /// `e^{-lambda_i t/2} e_i(theta)` and `e^{-lambda_i t/2} rho_hat_i e_i'(theta)`, node-major.
    e_tab: Vec<f64>,
    de_tab: Vec<f64>,
}

impl PtgPlan {
    pub fn new(t: f64, h: &TestFunction, mollifier: &Mollifier, rho_hat: &[f64], basis: &SpectralBasis, theta_grid: &Grid, mode: SeriesMode) -> Result<Self> {
        if !(t > 0.0) {
            return Err(invalid("t", format!("must be positive, got {t}")));
        }
        let floor = 10.0 * theta_grid.step().powi(2);
        if t < floor {
            return Err(invalid("t", format!("{t} below the resolution floor {floor}")));
        }
        h.validate()?;
        let eps = mollifier.epsilon();
        if h.support().is_some() && !(eps < h.margin()) {
            return Err(Error::WidthExceedsBoundary { epsilon: eps, theta: h.margin() });
        }
        if rho_hat.len() != basis.n_modes() {
            return Err(Error::LengthMismatch { expected: basis.n_modes(), got: rho_hat.len() });
        }
        let n = basis.n_modes();
        let lam = basis.lambdas();
        let decay: Vec<f64> = lam.iter().map(|l| (-l * t).exp()).collect();
        let half: Vec<f64> = lam.iter().map(|l| (-0.5 * l * t).exp()).collect();
        let n_eff = half.iter().position(|d| *d < 1e-18).unwrap_or(n).max(1);

        let mut out = PtgPlan {
            t,
            epsilon: eps,
            mode,
            weights: Vec::new(),
            thetas: Vec::new(),
            q: Vec::new(),
            nu: Vec::new(),
            ct: Vec::new(),
            n_eff,
            e_tab: Vec::new(),
            de_tab: Vec::new(),
        };
        for j in 0..=theta_grid.n() {
            let th = theta_grid.node(j);
            let hv = h.value(th);
            if hv == 0.0 {
                continue;
            }
            let (mut q, mut nu, mut ct) = match mode {
                SeriesMode::Truncated => (0.0, 0.0, 0.0),
                SeriesMode::Resummed => (th, 0.5, 0.0),
            };
            for i in 0..n {
                let e = basis.e(i, th);
                let de = rho_hat[i] * basis.de(i, th);
                let inv = 1.0 / lam[i];
                match mode {
                    SeriesMode::Truncated => {
                        let g = -(-lam[i] * t).exp_m1() * inv;
                        q += g * e * e;
                        nu += g * de * e;
                    }
                    SeriesMode::Resummed => {
                        q -= decay[i] * inv * e * e;
                        nu -= decay[i] * inv * de * e;
                    }
                }
                ct += decay[i] * inv * de * de;
            }
            if !(q > VARIANCE_FLOOR) {
                return Err(Error::VarianceUnderflow { theta: th, value: q });
            }
            out.weights.push(theta_grid.trapezoid_weight(j) * hv);
            out.thetas.push(th);
            out.q.push(q);
            out.nu.push(nu);
            out.ct.push(ct);
            for i in 0..n_eff {
                out.e_tab.push(half[i] * basis.e(i, th));
                out.de_tab.push(half[i] * rho_hat[i] * basis.de(i, th));
            }
        }
        Ok(out)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> SeriesMode {
        self.mode
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// `q_t(theta)` at the active nodes.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `nu_{eps,theta}` at the active nodes.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// `c^t_{eps,theta}` at the active nodes.
    pub fn ct(&self) -> &[f64] {
        &self.ct
    }

    /// `P_t G_eps(z)` at level `a` for `z = sum z_i e_i`.
    pub fn evaluate(&self, z: &ModeField, a: f64) -> PtGEvaluation {
        let m = self.n_eff.min(z.n_modes());
        let zc = &z.coeffs[..m];
        let mut c = PtGComponents { gradient: 0.0, renormalization: 0.0, cross: 0.0, drift: 0.0 };
        for (j, w) in self.weights.iter().enumerate() {
            let row = j * self.n_eff;
            let zbar: f64 = zc.iter().zip(&self.e_tab[row..row + m]).map(|(a, b)| a * b).sum();
            let dz: f64 = zc.iter().zip(&self.de_tab[row..row + m]).map(|(a, b)| a * b).sum();
            let q = self.q[j];
            let lp = self.nu[j] / q;
            let y = a - zbar;
            let ww = w * gaussian_density(y, q);
            c.gradient += ww * dz * dz;
            c.renormalization -= ww * self.ct[j];
            c.cross += ww * 2.0 * y * lp * dz;
            c.drift += ww * (y * y - q) * lp * lp;
        }
        PtGEvaluation {
            t: self.t,
            epsilon: self.epsilon,
            level: a,
            value: c.gradient + c.renormalization + c.cross + c.drift,
            components: c,
        }
    }

    /// `(1 / 2 delta) int_{a - delta}^{a + delta} P_t G_eps(z) at level a' da'`,
    /// the expectation targeted by an occupation estimator with bandwidth `delta`.
    pub fn evaluate_window(&self, z: &ModeField, a: f64, delta: f64) -> f64 {
        composite_gauss(|x| self.evaluate(z, x).value, a - delta, a + delta, 8) / (2.0 * delta)
    }
}

/// Default `theta` grid for [`pt_g_eps`].
pub const DEFAULT_THETA_INTERVALS: usize = 1024;

/// The explicit formula for `P_t G_eps(z)` at level 0, continuum series.
pub fn pt_g_eps(z: &ModeField, t: f64, h: &TestFunction, mollifier: &Mollifier, basis: &SpectralBasis) -> Result<PtGEvaluation> {
    let grid = Grid::new(DEFAULT_THETA_INTERVALS)?;
    let rho_hat = fourier_factors(mollifier, basis);
    let plan = PtgPlan::new(t, h, mollifier, &rho_hat, basis, &grid, SeriesMode::Resummed)?;
    Ok(plan.evaluate(z, 0.0))
}

/// As [`pt_g_eps`] for a sampled path, projected on the modes by the trapezoid rule.
pub fn pt_g_eps_path(path: &Path, t: f64, h: &TestFunction, mollifier: &Mollifier, basis: &SpectralBasis) -> Result<PtGEvaluation> {
    let ops = SpectralGridOps::new(*path.grid());
    let z = ops.project(path.values(), basis.n_modes().min(2 * path.grid().n()))?;
    pt_g_eps(&z, t, h, mollifier, basis)
}

/// `nu_{eps,theta} = (rho_eps * q_t(., theta))'_theta` by direct quadrature
/// over the kernel support, with `q_t = theta ^ theta' - q^t`.
pub fn nu_direct(mollifier: &Mollifier, basis: &SpectralBasis, t: f64, theta: f64) -> Result<f64> {
    mollifier.check_theta(theta)?;
    let eps = mollifier.epsilon();
    let k = mollifier.kernel();
    let half = k.cdf(0.0);
    let sum: f64 = (0..basis.n_modes())
        .map(|i| {
            let coef = (-basis.lambda(i) * t).exp() / basis.lambda(i) * basis.e(i, theta);
            if coef == 0.0 {
                return 0.0;
            }
            coef * composite_gauss(|x| k.density(x) * basis.de(i, theta + eps * x), -1.0, 1.0, 64)
        })
        .sum();
    Ok(half - sum)
}

/// `c_N(theta) = sum_{i<=N} rho_hat_i^2 e_i'(theta)^2 / lambda_i`, the variance
/// of the mollified derivative of an `N`-mode Brownian field.
pub fn c_truncated(theta: f64, rho_hat: &[f64], basis: &SpectralBasis) -> f64 {
    (0..basis.n_modes()).map(|i| (rho_hat[i] * basis.de(i, theta)).powi(2) / basis.lambda(i)).sum()
}

/// One Monte-Carlo Mehler sample: `G_eps(u)` for `u = e^{tA} z + v(t, .)`,
/// with occupation local time at level `a` on `ops.grid()`, the exact
/// spectral mollified derivative, and centering `c_N`.
pub struct MehlerSampler<'a> {
    basis: &'a SpectralBasis,
    ops: &'a SpectralGridOps,
    rho_hat: &'a [f64],
    h_nodes: Vec<f64>,
    c_nodes: Vec<f64>,
    t: f64,
    delta: f64,
}

impl<'a> MehlerSampler<'a> {
    pub fn new(basis: &'a SpectralBasis, ops: &'a SpectralGridOps, rho_hat: &'a [f64], h: &TestFunction, t: f64, delta: f64) -> Self {
        let grid = ops.grid();
        let h_nodes = h.on_grid(grid);
        let c_nodes = grid.nodes().zip(&h_nodes).map(|(th, hv)| if *hv == 0.0 { 0.0 } else { c_truncated(th, rho_hat, basis) }).collect();
        Self { basis, ops, rho_hat, h_nodes, c_nodes, t, delta }
    }

    pub fn sample<R: Rng + ?Sized>(&self, z: &ModeField, a: f64, rng: &mut R) -> Result<f64> {
        let v = sample_v_field(self.t, self.basis, rng)?;
        let u = z.evolve(self.basis, self.t).add(&v);
        self.functional(&u, a)
    }

    /// `int h ((d_theta u_eps)^2 - c_N) dL^a(u)`.
    pub fn functional(&self, u: &ModeField, a: f64) -> Result<f64> {
        let vals = self.ops.synthesize(u)?;
        let smoothed = ModeField { coeffs: u.coeffs.iter().zip(self.rho_hat).map(|(c, r)| c * r).collect() };
        let du = self.ops.synthesize_derivative(&smoothed, self.basis)?;
        let curve = occupation_localtime(&vals, self.ops.grid(), a, self.delta)?;
        let mut acc = 0.0;
        for (j, dl) in curve.active_increments() {
            let hj = self.h_nodes[j];
            if hj != 0.0 {
                acc += hj * (du[j] * du[j] - self.c_nodes[j]) * dl;
            }
        }
        Ok(acc)
    }
}

/// A draw `z ~ mu` restricted to `N` modes.
pub fn sample_z<R: Rng + ?Sized>(basis: &SpectralBasis, rng: &mut R) -> ModeField {
    SpectralSample::draw(basis.n_modes(), rng).expect("basis has >= 1 mode").brownian(basis)
}

/// Monte-Carlo `||P_t G_eps||^2_{L^2(mu)}` with its standard error.
pub fn pt_g_norm<R: Rng + ?Sized>(plan: &PtgPlan, basis: &SpectralBasis, samples: usize, rng: &mut R) -> (f64, f64) {
    let w: Welford = (0..samples).map(|_| plan.evaluate(&sample_z(basis, rng), 0.0).value.powi(2)).collect();
    (w.mean(), w.stderr())
}

/// Log-log slope of `y` against `t`.
pub fn loglog_slope(t: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).1
}

/// Log-log slope of `y / (1 + |ln t|^6)` against `t`: the power of `t` left
/// once the logarithmic factor of the decay bound is divided out.
pub fn log_corrected_slope(t: &[f64], y: &[f64]) -> f64 {
    let yc: Vec<f64> = t.iter().zip(y).map(|(t, y)| y / (1.0 + t.ln().abs().powi(6))).collect();
    loglog_slope(t, &yc)
}

/// `(1 + |ln t|^6) / t^{3/4}`.
pub fn decay_bound_shape(t: f64) -> f64 {
    (1.0 + t.ln().abs().powi(6)) / t.powf(0.75)
}

/// Result of the exponential-convergence study for `Psi_k`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpcResult {
    pub t: Vec<f64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub exact: Vec<f64>,
    pub fitted_rate: f64,
    pub exact_rate: f64,
}

/// `||P_t Psi_k - mu(Psi_k)||^2` by Monte Carlo over `z ~ mu`, using
/// `P_t Psi_k(z) = exp(<z, e^{tA} k> + <Q_t k, k> / 2)` in the `N`-mode space,
/// with a fitted exponential rate `-d/dt ln`.
pub fn expc_decay<R: Rng + ?Sized>(k: &ExpFunctional, basis: &SpectralBasis, t_grid: &[f64], samples: usize, rng: &mut R) -> Result<ExpcResult> {
    if t_grid.iter().any(|t| !(*t >= 1.0)) || t_grid.len() < 2 {
        return Err(invalid("t_grid", "need at least two times, all >= 1"));
    }
    let n = basis.n_modes();
    let kc: Vec<f64> = (0..n).map(|i| composite_gauss(|s| k.k(s) * basis.e(i, s), 0.0, 1.0, 64 + 2 * i)).collect();
    let lam = basis.lambdas();
    let qk: f64 = (0..n).map(|i| kc[i] * kc[i] / lam[i]).sum();
    let mu = (0.5 * qk).exp();
    let xs: Vec<Vec<f64>> = (0..samples).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let mut est = Vec::new();
    let mut se = Vec::new();
    let mut exact = Vec::new();
    for &t in t_grid {
        let qt: f64 = (0..n).map(|i| -(-lam[i] * t).exp_m1() / lam[i] * kc[i] * kc[i]).sum();
        let coef: Vec<f64> = (0..n).map(|i| (-0.5 * lam[i] * t).exp() * kc[i] / lam[i].sqrt()).collect();
        let w: Welford = xs
            .iter()
            .map(|x| {
                let lin: f64 = x.iter().zip(&coef).map(|(a, b)| a * b).sum();
                ((lin + 0.5 * qt).exp() - mu).powi(2)
            })
            .collect();
        est.push(w.mean());
        se.push(w.stderr());
        // Var of exp(N(m, s^2)) with s^2 = sum coef^2.
        let s2: f64 = coef.iter().map(|c| c * c).sum();
        exact.push(mu * mu * s2.exp_m1());
    }
    let ly: Vec<f64> = est.iter().map(|v| v.ln()).collect();
    let fitted_rate = -linear_fit(t_grid, &ly).1;
    let le: Vec<f64> = exact.iter().map(|v| v.ln()).collect();
    let exact_rate = -linear_fit(t_grid, &le).1;
    Ok(ExpcResult { t: t_grid.to_vec(), estimate: est, stderr: se, exact, fitted_rate, exact_rate })
}
