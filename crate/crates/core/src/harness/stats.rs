//! Streaming moments, extrapolation fits and slope fits.

use serde::Serialize;

/// Running count, mean and centered second moment; mergeable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 { 0.0 } else { self.m2 / (self.count - 1) as f64 }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 { f64::INFINITY } else { (self.variance() / self.count as f64).sqrt() }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        iter.into_iter().for_each(|x| w.push(x));
        w
    }
}

/// Richardson extrapolation to `eps -> 0` assuming error `c eps^p`:
/// returns the weights `(w_fine, w_coarse)` with `L = w_fine f(e_f) + w_coarse f(e_c)`.
pub fn richardson_weights(eps_fine: f64, eps_coarse: f64, order: f64) -> (f64, f64) {
    let r = (eps_coarse / eps_fine).powf(order);
    (r / (r - 1.0), -1.0 / (r - 1.0))
}

/// Fit of `f(eps) = L + c eps^p` through three points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub limit: f64,
    pub coefficient: f64,
    pub order: f64,
}

/// Exact three-point fit; `None` when the differences do not share a sign
/// (no monotone power law through the points). Widths must form a geometric
/// sequence `e0 > e1 > e2`.
pub fn three_point_fit(eps: [f64; 3], f: [f64; 3]) -> Option<PowerFit> {
    let ratio = eps[0] / eps[1];
    let d1 = f[0] - f[1];
    let d2 = f[1] - f[2];
    if d1 == 0.0 || d2 == 0.0 || (d1 > 0.0) != (d2 > 0.0) {
        return None;
    }
    let order = (d1 / d2).ln() / ratio.ln();
    if !order.is_finite() || order <= 0.0 {
        return None;
    }
    let coefficient = d2 / (eps[1].powf(order) - eps[2].powf(order));
    Some(PowerFit { limit: f[2] - coefficient * eps[2].powf(order), coefficient, order })
}

/// Ordinary least-squares line `y = intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}
