//! Deterministic formulas: `lambda`, the eigen-system of `Q`, the covariances
//! `q_t`, `q^t`, `g_t`, and the closed-form targets for the Monte-Carlo
//! experiments.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::functionals::{ExpFunctional, TestFunction};
use crate::quad::{composite_gauss, folded_normal_mean, gaussian_density, normal_cdf};

/// Panels used for integrals over `supp(h)`.
pub const SUPPORT_PANELS: usize = 400;

/// `lambda(theta, x, y) = x^2 + x y / theta + (y^2 - theta) / (4 theta^2)`.
pub fn lambda_fn(theta: f64, x: f64, y: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(invalid("theta", format!("must be positive, got {theta}")));
    }
    Ok(lambda_unchecked(theta, x, y))
}

#[inline]
fn lambda_unchecked(theta: f64, x: f64, y: f64) -> f64 {
    x * x + x * y / theta + (y * y - theta) / (4.0 * theta * theta)
}

/// Eigenpairs `lambda_i = pi^2 (2i - 1)^2 / 4`, `e_i = sqrt(2) sin(sqrt(lambda_i) theta)`
/// of `Q^{-1}`, stored 0-based (index 0 is `lambda_1`).
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    lambdas: Vec<f64>,
    omegas: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("N", "truncation level must be >= 1"));
        }
        let omegas: Vec<f64> = (1..=n_modes).map(|i| PI * (2 * i - 1) as f64 / 2.0).collect();
        let lambdas = omegas.iter().map(|w| w * w).collect();
        Ok(Self { lambdas, omegas })
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn e(&self, i: usize, theta: f64) -> f64 {
        std::f64::consts::SQRT_2 * (self.omegas[i] * theta).sin()
    }

    /// `e_i'(theta) = sqrt(2 lambda_i) cos(sqrt(lambda_i) theta)`.
    pub fn de(&self, i: usize, theta: f64) -> f64 {
        std::f64::consts::SQRT_2 * self.omegas[i] * (self.omegas[i] * theta).cos()
    }

    /// Upper bound on `sum_{i > N} 1 / lambda_i`, from
    /// `sum_{i>N} (2i-1)^{-2} <= 1 / (2 (2N - 1))`.
    pub fn inverse_tail(&self) -> f64 {
        let n = self.n_modes() as f64;
        4.0 / (PI * PI) / (2.0 * (2.0 * n - 1.0))
    }

    /// Upper bound on `sum_{i > N} e^{-lambda_i t} / lambda_i`.
    pub fn weighted_tail(&self, t: f64) -> f64 {
        let n = self.n_modes();
        let next = PI * PI * ((2 * n + 1) as f64).powi(2) / 4.0;
        (-next * t).exp() * self.inverse_tail()
    }
}

/// Covariance kernels of the stochastic convolution at time `t`.
#[derive(Clone, Debug)]
pub struct CovarianceBundle<'a> {
    t: f64,
    basis: &'a SpectralBasis,
    decay: Vec<f64>,
}

/// `covariances(t, N)` over an existing basis.
pub fn covariances(t: f64, basis: &SpectralBasis) -> Result<CovarianceBundle<'_>> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    let decay = basis.lambdas().iter().map(|l| (-l * t).exp()).collect();
    Ok(CovarianceBundle { t, basis, decay })
}

impl<'a> CovarianceBundle<'a> {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn basis(&self) -> &SpectralBasis {
        self.basis
    }

    /// `e^{-lambda_i t}` per mode.
    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    /// `q_t(theta, theta')` by its truncated cosine-type series.
    pub fn q_t_series(&self, a: f64, b: f64) -> f64 {
        let bs = self.basis;
        (0..bs.n_modes()).map(|i| (1.0 - self.decay[i]) / bs.lambda(i) * bs.e(i, a) * bs.e(i, b)).sum()
    }

    /// `q^t(theta, theta') = sum e^{-lambda_i t} / lambda_i e_i(theta) e_i(theta')`.
    pub fn q_upper(&self, a: f64, b: f64) -> f64 {
        let bs = self.basis;
        (0..bs.n_modes()).map(|i| self.decay[i] / bs.lambda(i) * bs.e(i, a) * bs.e(i, b)).sum()
    }

    /// `q_t = theta ^ theta' - q^t`; converges exponentially fast in `N` for `t > 0`.
    pub fn q_t(&self, a: f64, b: f64) -> f64 {
        a.min(b) - self.q_upper(a, b)
    }

    /// `q_t(theta) = q_t(theta, theta)`.
    pub fn q_t_var(&self, theta: f64) -> f64 {
        self.q_t(theta, theta)
    }

    /// `q_infinity(theta, theta') = theta ^ theta'`.
    pub fn q_infinity(a: f64, b: f64) -> f64 {
        a.min(b)
    }

    /// Green function `g_t(theta, theta') = sum e^{-lambda_i t / 2} e_i(theta) e_i(theta')`.
    pub fn g_t(&self, a: f64, b: f64) -> Result<f64> {
        if !(self.t > 0.0) {
            return Err(invalid("t", "g_t needs t > 0"));
        }
        let bs = self.basis;
        Ok((0..bs.n_modes()).map(|i| self.decay[i].sqrt() * bs.e(i, a) * bs.e(i, b)).sum())
    }

    /// `d/dtheta g_t(theta, theta')`.
    pub fn dg_t(&self, a: f64, b: f64) -> Result<f64> {
        if !(self.t > 0.0) {
            return Err(invalid("t", "g_t needs t > 0"));
        }
        let bs = self.basis;
        Ok((0..bs.n_modes()).map(|i| self.decay[i].sqrt() * bs.de(i, a) * bs.e(i, b)).sum())
    }

    /// Bound on `|q_t_series + q_upper - theta ^ theta'|` from truncation.
    pub fn identity_tail_bound(&self) -> f64 {
        2.0 * self.basis.inverse_tail()
    }

    /// Bound on the truncation error of `q_upper` (hence of `q_t`).
    pub fn upper_tail_bound(&self) -> f64 {
        2.0 * self.basis.weighted_tail(self.t)
    }
}

/// `c^t_{0,theta} = sum e^{-lambda_i t} e_i'(theta)^2 / lambda_i`.
pub fn c_t0(theta: f64, t: f64, basis: &SpectralBasis) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "c^t_0 diverges at t = 0"));
    }
    Ok((0..basis.n_modes()).map(|i| (-basis.lambda(i) * t).exp() * basis.de(i, theta).powi(2) / basis.lambda(i)).sum())
}

/// `nu_{0,theta} = 1/2 - sum e^{-lambda_i t} e_i'(theta) e_i(theta) / lambda_i`.
pub fn nu0(theta: f64, t: f64, basis: &SpectralBasis) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "nu_0 needs t > 0"));
    }
    Ok(0.5 - (0..basis.n_modes()).map(|i| (-basis.lambda(i) * t).exp() * basis.de(i, theta) * basis.e(i, theta) / basis.lambda(i)).sum::<f64>())
}

/// The `theta`-integrand of `RG_0` at `(t, theta)` given `z(t, theta)` and
/// `d/dtheta z(t, theta)`.
pub fn rg0_integrand(z: f64, dz: f64, t: f64, theta: f64, h: &TestFunction, basis: &SpectralBasis) -> Result<f64> {
    let cov = covariances(t, basis)?;
    let q = cov.q_t_var(theta);
    if !(q > 0.0) {
        return Err(crate::error::Error::VarianceUnderflow { theta, value: q });
    }
    let c = c_t0(theta, t, basis)?;
    let nu = nu0(theta, t, basis)?;
    let r = z / q;
    let bracket = dz * dz - c - 2.0 * nu * r * dz + nu * nu * (r * r - 1.0 / q);
    Ok(h.value(theta) * gaussian_density(z, q) * bracket)
}

/// [`rg0_integrand`] minus its `t -> infinity` limit, the `mean_G(h, 0)` integrand.
/// This is the quantity whose `t`-integral converges.
pub fn rg0_integrand_centered(z: f64, dz: f64, t: f64, theta: f64, h: &TestFunction, basis: &SpectralBasis) -> Result<f64> {
    Ok(rg0_integrand(z, dz, t, theta, h, basis)? - laplace_integrand(h, theta, 0.0, 0.0, 0.0))
}

#[inline]
fn laplace_integrand(h: &TestFunction, theta: f64, k_big: f64, k_prime: f64, a: f64) -> f64 {
    let y = a - k_big;
    h.value(theta) * gaussian_density(y, theta) * lambda_unchecked(theta, k_prime, y)
}

fn integrate_support(h: &TestFunction, f: impl Fn(f64) -> f64) -> f64 {
    match h.support() {
        Some((lo, hi)) => composite_gauss(f, lo, hi, SUPPORT_PANELS),
        None => 0.0,
    }
}

/// `e^{<Qk,k>/2} int h_theta N(0, theta)(a - K_theta) lambda(theta, K'_theta, a - K_theta) d theta`.
pub fn laplace_rhs(h: &TestFunction, k: &ExpFunctional, a: f64) -> f64 {
    let scale = (0.5 * k.qk_norm()).exp();
    scale
        * integrate_support(h, |th| {
            let (kb, kp) = k.q_transform(th);
            laplace_integrand(h, th, kb, kp, a)
        })
}

/// `int h_theta (a^2 - theta) / (4 theta^2) N(0, theta)(a) d theta`, the
/// `epsilon`-independent mean of `G_{eps,a}`.
pub fn mean_g(h: &TestFunction, a: f64) -> f64 {
    integrate_support(h, |th| laplace_integrand(h, th, 0.0, 0.0, a))
}

/// Closed-form left side of the sign-case integration by parts:
/// `e^{<Qk,k>/2} int h k (1 - 2 Phi((a - K) / sqrt(theta))) d theta`.
pub fn ibp_lhs_sign(h: &TestFunction, k: &ExpFunctional, a: f64) -> f64 {
    let scale = (0.5 * k.qk_norm()).exp();
    scale
        * integrate_support(h, |th| {
            let (kb, _) = k.q_transform(th);
            h.value(th) * k.k(th) * (1.0 - 2.0 * normal_cdf((a - kb) / th.sqrt()))
        })
}

/// `e^{<Qk,k>/2} int h''_theta E|N(K_theta, theta) - a| d theta`.
pub fn ibp_second_derivative_term(h: &TestFunction, k: &ExpFunctional, a: f64) -> f64 {
    let scale = (0.5 * k.qk_norm()).exp();
    scale
        * integrate_support(h, |th| {
            let (kb, _) = k.q_transform(th);
            h.d2(th) * folded_normal_mean(kb - a, th)
        })
}

/// Right side: `-(h'' term) + 2 laplace_rhs`.
pub fn ibp_rhs_sign(h: &TestFunction, k: &ExpFunctional, a: f64) -> f64 {
    -ibp_second_derivative_term(h, k, a) + 2.0 * laplace_rhs(h, k, a)
}

/// `e^{<Qk,k>/2} int (K'_theta)^2 d theta`.
pub fn quadratic_rhs(k: &ExpFunctional) -> f64 {
    let q = k.qk_norm();
    (0.5 * q).exp() * q
}

/// `E[Psi_k(B)] = e^{<Qk,k>/2}`.
pub fn psi_mean(k: &ExpFunctional) -> f64 {
    (0.5 * k.qk_norm()).exp()
}

/// `int h_theta N(0, theta)(a) d theta`, the mean of `int h dL^a`.
pub fn occupation_mean(h: &TestFunction, a: f64) -> f64 {
    integrate_support(h, |th| h.value(th) * gaussian_density(a, th))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::KProfile;

    fn bump() -> TestFunction {
        TestFunction::bump(0.3, 0.7)
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_fn(0.5, 1.0, 1.0).unwrap(), 3.5);
        assert_eq!(lambda_fn(0.25, 0.0, 0.0).unwrap(), -1.0);
        assert_eq!(lambda_fn(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(lambda_fn(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn first_eigenfunction_at_half() {
        let b = SpectralBasis::new(4).unwrap();
        assert!((b.e(0, 0.5) - 1.0).abs() < 1e-15);
        assert!((b.lambda(0) - PI * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_relations_by_quadrature() {
        let b = SpectralBasis::new(6).unwrap();
        for i in 0..6 {
            let k = ExpFunctional::new(KProfile::Eigen { index: i + 1, scale: 1.0 }).unwrap();
            for &th in &[0.1, 0.4, 0.9] {
                let (kb, kp) = k.q_transform(th);
                assert!((kb - b.e(i, th) / b.lambda(i)).abs() < 1e-12);
                assert!((kp - b.de(i, th) / b.lambda(i)).abs() < 1e-12);
            }
            // A e_i = e_i'' / 2 = -lambda_i e_i / 2 by second difference.
            let th = 0.37;
            let d = 1e-4;
            let second = (b.e(i, th + d) - 2.0 * b.e(i, th) + b.e(i, th - d)) / (d * d);
            assert!((0.5 * second + 0.5 * b.lambda(i) * b.e(i, th)).abs() < 1e-4 * b.lambda(i).powi(2));
        }
        let inner = composite_gauss(|x| b.e(1, x) * b.e(2, x), 0.0, 1.0, 64);
        assert!(inner.abs() < 1e-13);
    }

    #[test]
    fn covariance_identity_within_tail() {
        let b = SpectralBasis::new(512).unwrap();
        for &t in &[0.01, 0.3, 2.0] {
            let c = covariances(t, &b).unwrap();
            for &(x, y) in &[(0.3, 0.7), (0.5, 0.5), (0.9, 0.2)] {
                let gap = (c.q_t_series(x, y) + c.q_upper(x, y) - x.min(y)).abs();
                assert!(gap <= c.identity_tail_bound(), "{gap}");
                assert!((c.q_t(x, y) - c.q_t(y, x)).abs() < 1e-15);
            }
        }
        let inf = covariances(f64::INFINITY, &b).unwrap();
        assert_eq!(inf.q_t(0.3, 0.7), 0.3);
    }

    #[test]
    fn green_boundary_conditions() {
        let b = SpectralBasis::new(256).unwrap();
        let c = covariances(0.05, &b).unwrap();
        assert!(c.g_t(0.0, 0.4).unwrap().abs() < 1e-14);
        assert!(c.dg_t(1.0, 0.4).unwrap().abs() < 1e-12);
        assert!(covariances(0.0, &b).unwrap().g_t(0.2, 0.3).is_err());
    }

    #[test]
    fn laplace_k0_equals_mean_g_bitwise() {
        let k = ExpFunctional::new(KProfile::Zero).unwrap();
        for &a in &[0.0, 0.3, -0.5] {
            assert_eq!(laplace_rhs(&bump(), &k, a), mean_g(&bump(), a));
        }
        assert!(mean_g(&bump(), 0.0) < 0.0);
    }

    #[test]
    fn mean_g_against_direct_formula() {
        let h = bump();
        let direct = composite_gauss(
            |th| h.value(th) * (-1.0 / (4.0 * th)) / (2.0 * PI * th).sqrt(),
            0.3,
            0.7,
            1000,
        );
        assert!((mean_g(&h, 0.0) - direct).abs() < 1e-12);
    }

    #[test]
    fn ibp_sides_agree() {
        for k in [KProfile::Zero, KProfile::Constant { value: 1.0 }, KProfile::Eigen { index: 1, scale: 1.0 }] {
            let k = ExpFunctional::new(k).unwrap();
            for &a in &[-0.3, 0.0, 0.4] {
                let l = ibp_lhs_sign(&bump(), &k, a);
                let r = ibp_rhs_sign(&bump(), &k, a);
                assert!((l - r).abs() < 1e-9, "{l} {r}");
            }
        }
    }

    #[test]
    fn quadratic_targets() {
        let e1 = ExpFunctional::new(KProfile::Eigen { index: 1, scale: 1.0 }).unwrap();
        let l1 = PI * PI / 4.0;
        assert!((quadratic_rhs(&e1) - (0.5 / l1).exp() / l1).abs() < 1e-12);
        let one = ExpFunctional::new(KProfile::Constant { value: 1.0 }).unwrap();
        assert!((quadratic_rhs(&one) - (1.0f64 / 6.0).exp() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rg0_at_zero_field() {
        let b = SpectralBasis::new(512).unwrap();
        let h = bump();
        let (t, th) = (0.2, 0.5);
        let c = covariances(t, &b).unwrap();
        let q = c.q_t_var(th);
        let ct = c_t0(th, t, &b).unwrap();
        let nu = nu0(th, t, &b).unwrap();
        let expect = -h.value(th) * gaussian_density(0.0, q) * (ct + nu * nu / q);
        assert!((rg0_integrand(0.0, 0.0, t, th, &h, &b).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn c_t0_and_nu0_limits() {
        let b = SpectralBasis::new(64).unwrap();
        assert!(c_t0(0.4, 50.0, &b).unwrap() < 1e-40);
        assert!((nu0(0.4, 50.0, &b).unwrap() - 0.5).abs() < 1e-40);
        assert!(c_t0(0.4, 0.0, &b).is_err());
    }
}
