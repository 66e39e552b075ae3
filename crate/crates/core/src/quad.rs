//! Fixed-node quadrature rules and Gaussian helpers.

const GL8_X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
const GL8_W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// 8-point Gauss-Legendre on `[a, b]`.
#[inline]
pub fn gauss8(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut acc = 0.0;
    for k in 0..4 {
        let d = r * GL8_X[k];
        acc += GL8_W[k] * (f(c - d) + f(c + d));
    }
    acc * r
}

/// Visits the 8 Gauss-Legendre nodes of `[a, b]` with their weights, in increasing order.
#[inline]
pub fn gauss8_nodes(a: f64, b: f64, mut f: impl FnMut(f64, f64)) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    for k in (0..4).rev() {
        f(c - r * GL8_X[k], r * GL8_W[k]);
    }
    for k in 0..4 {
        f(c + r * GL8_X[k], r * GL8_W[k]);
    }
}

/// Composite 8-point Gauss-Legendre with `panels` equal panels.
pub fn composite_gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    (0..panels).map(|p| gauss8(&f, a + p as f64 * w, a + (p + 1) as f64 * w)).sum()
}

/// Trapezoid rule for samples on a uniform grid of step `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Trapezoid rule for the product of two sampled functions.
pub fn trapezoid_product(f: &[f64], g: &[f64], h: f64) -> f64 {
    let n = f.len().min(g.len());
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = (1..n - 1).map(|j| f[j] * g[j]).sum();
    h * (0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]) + inner)
}

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Density of `N(0, var)` at `x`.
pub fn gaussian_density(x: f64, var: f64) -> f64 {
    (-(x * x) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `E|X|` for `X ~ N(mu, var)`.
pub fn folded_normal_mean(mu: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return mu.abs();
    }
    let s = var.sqrt();
    s * std::f64::consts::FRAC_2_PI.sqrt() * (-mu * mu / (2.0 * var)).exp() + mu * (1.0 - 2.0 * normal_cdf(-mu / s))
}
