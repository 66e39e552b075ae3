//! Local time estimators and Stieltjes integration against `dL^a`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paths::Grid;
use crate::quad::normal_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalTimeMethod {
    /// `(1 / 2 delta) |{s <= theta : |B_s - a| < delta}|`, left-point sums.
    Occupation,
    /// Discrete Tanaka formula.
    Tanaka,
}

/// Default bandwidth `n^{-1/3}`.
pub fn default_bandwidth(grid: &Grid) -> f64 {
    (grid.n() as f64).powf(-1.0 / 3.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LocalTimeDiagnostics {
    /// Bandwidth below the one-step fluctuation scale `sqrt(h)`.
    pub undersmoothed: bool,
    /// Largest amount added by the running-maximum monotonization.
    pub monotone_correction: f64,
}

/// `theta -> L^a_theta` on the grid; nondecreasing, starting at 0.
#[derive(Clone, Debug)]
pub struct LocalTimeCurve {
    grid: Grid,
    level: f64,
    values: Vec<f64>,
    method: LocalTimeMethod,
    bandwidth: Option<f64>,
    diagnostics: LocalTimeDiagnostics,
}

impl LocalTimeCurve {
    /// Wraps a precomputed curve; rejects non-monotone input.
    pub fn from_values(grid: Grid, level: f64, values: Vec<f64>, method: LocalTimeMethod, bandwidth: Option<f64>) -> Result<Self> {
        if values.len() != grid.n() + 1 {
            return Err(Error::LengthMismatch { expected: grid.n() + 1, got: values.len() });
        }
        check_monotone(&values)?;
        Ok(Self { grid, level, values, method, bandwidth, diagnostics: LocalTimeDiagnostics::default() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn method(&self) -> LocalTimeMethod {
        self.method
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn diagnostics(&self) -> LocalTimeDiagnostics {
        self.diagnostics
    }

    /// `L_1`.
    pub fn total(&self) -> f64 {
        self.values[self.grid.n()] - self.values[0]
    }

    /// Nonzero increments `(j, L_{j+1} - L_j)`.
    pub fn active_increments(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.windows(2).enumerate().map(|(j, w)| (j, w[1] - w[0])).filter(|(_, d)| *d != 0.0)
    }

    /// Multiplies the curve by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

fn check_monotone(values: &[f64]) -> Result<()> {
    if values.first().copied().unwrap_or(0.0) != 0.0 {
        return Err(invalid("L", "local time must start at 0"));
    }
    for (j, w) in values.windows(2).enumerate() {
        if !(w[1] >= w[0]) {
            return Err(Error::NonMonotoneLocalTime { index: j });
        }
    }
    Ok(())
}

fn check_len(values: &[f64], grid: &Grid) -> Result<()> {
    if values.len() != grid.n() + 1 {
        return Err(Error::LengthMismatch { expected: grid.n() + 1, got: values.len() });
    }
    Ok(())
}

fn occupation_weighted(values: &[f64], grid: &Grid, a: f64, delta: f64, weight: f64, one_sided: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for &b in &values[..values.len() - 1] {
        let x = if one_sided { b } else { (b - a).abs() };
        if x < delta {
            acc += weight;
        }
        out.push(acc);
    }
    debug_assert_eq!(out.len(), grid.n() + 1);
    out
}

/// Occupation-density estimator of `L^a` with bandwidth `delta`.
pub fn occupation_localtime(values: &[f64], grid: &Grid, a: f64, delta: f64) -> Result<LocalTimeCurve> {
    check_len(values, grid)?;
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    let weight = grid.step() / (2.0 * delta);
    let curve = occupation_weighted(values, grid, a, delta, weight, false);
    Ok(LocalTimeCurve {
        grid: *grid,
        level: a,
        values: curve,
        method: LocalTimeMethod::Occupation,
        bandwidth: Some(delta),
        diagnostics: LocalTimeDiagnostics { undersmoothed: delta < grid.step().sqrt(), monotone_correction: 0.0 },
    })
}

/// Discrete Tanaka estimator
/// `L^a_theta = |x_theta| - |x_0| - sum_{s < theta} sign(x_s) (x_{s+} - x_s)`,
/// `x = B - a`, `sign(0) = -1`, followed by running-maximum monotonization.
pub fn tanaka_localtime(values: &[f64], grid: &Grid, a: f64) -> Result<LocalTimeCurve> {
    check_len(values, grid)?;
    let x0 = (values[0] - a).abs();
    let mut stoch = 0.0;
    let mut running = 0.0f64;
    let mut correction = 0.0f64;
    let mut out = Vec::with_capacity(values.len());
    out.push(0.0);
    for w in values.windows(2) {
        let (x, y) = (w[0] - a, w[1] - a);
        stoch += sign(x) * (y - x);
        let raw = y.abs() - x0 - stoch;
        running = running.max(raw);
        correction = correction.max(running - raw);
        out.push(running);
    }
    Ok(LocalTimeCurve {
        grid: *grid,
        level: a,
        values: out,
        method: LocalTimeMethod::Tanaka,
        bandwidth: None,
        diagnostics: LocalTimeDiagnostics { undersmoothed: false, monotone_correction: correction },
    })
}

/// `sign(x) = 1_{(0, inf)}(x) - 1_{(-inf, 0]}(x)`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 { 1.0 } else { -1.0 }
}

/// Dispatches on `method`; `delta` is used by the occupation estimator only.
pub fn localtime(values: &[f64], grid: &Grid, a: f64, method: LocalTimeMethod, delta: f64) -> Result<LocalTimeCurve> {
    match method {
        LocalTimeMethod::Occupation => occupation_localtime(values, grid, a, delta),
        LocalTimeMethod::Tanaka => tanaka_localtime(values, grid, a),
    }
}

/// Local time at 0 of the reflected path `X = |B - a|`, normalized so that
/// `l^0 = 2 L^a`. The occupation form counts `{X < delta}` with weight
/// `h / delta`; the Tanaka form doubles the Tanaka estimate of `L^a`.
pub fn reflected_localtime(b_values: &[f64], grid: &Grid, a: f64, method: LocalTimeMethod, delta: f64) -> Result<LocalTimeCurve> {
    check_len(b_values, grid)?;
    match method {
        LocalTimeMethod::Occupation => {
            if !(delta > 0.0) {
                return Err(invalid("delta", format!("must be positive, got {delta}")));
            }
            let x: Vec<f64> = b_values.iter().map(|b| (b - a).abs()).collect();
            let curve = occupation_weighted(&x, grid, 0.0, delta, grid.step() / delta, true);
            Ok(LocalTimeCurve {
                grid: *grid,
                level: 0.0,
                values: curve,
                method,
                bandwidth: Some(delta),
                diagnostics: LocalTimeDiagnostics { undersmoothed: delta < grid.step().sqrt(), monotone_correction: 0.0 },
            })
        }
        LocalTimeMethod::Tanaka => {
            let mut c = tanaka_localtime(b_values, grid, a)?.scaled(2.0);
            c.level = 0.0;
            Ok(c)
        }
    }
}

/// `sum_j f(theta_j) (L_{j+1} - L_j)`.
pub fn stieltjes_dl(integrand: &[f64], curve: &LocalTimeCurve) -> Result<f64> {
    check_len(integrand, curve.grid())?;
    check_monotone(curve.values())?;
    Ok(curve.values().windows(2).zip(integrand).map(|(w, f)| f * (w[1] - w[0])).sum())
}

/// `P(|B_theta - a| < delta)` for standard Brownian motion.
pub fn window_probability(theta: f64, a: f64, delta: f64) -> f64 {
    if theta <= 0.0 {
        return if a.abs() < delta { 1.0 } else { 0.0 };
    }
    let s = theta.sqrt();
    normal_cdf((a + delta) / s) - normal_cdf((a - delta) / s)
}

/// Exact expectation of the occupation estimator of `int f dL^a` for
/// Brownian motion on this grid: `sum_j f_j h / (2 delta) P(|B_{theta_j} - a| < delta)`.
pub fn occupation_expected(integrand: impl Fn(f64) -> f64, grid: &Grid, a: f64, delta: f64) -> f64 {
    let w = grid.step() / (2.0 * delta);
    (0..grid.n()).map(|j| {
        let th = grid.node(j);
        integrand(th) * w * window_probability(th, a, delta)
    }).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{sample_bm, stream_rng};

    #[test]
    fn far_level_gives_zero() {
        let g = Grid::new(1024).unwrap();
        let p = sample_bm(&g, &mut stream_rng(1, 0));
        let occ = occupation_localtime(p.values(), &g, 10.0, 0.05).unwrap();
        let tan = tanaka_localtime(p.values(), &g, 10.0).unwrap();
        assert_eq!(occ.total(), 0.0);
        assert!(tan.total().abs() < 1e-12);
    }

    #[test]
    fn single_crossing_burst() {
        let g = Grid::new(100).unwrap();
        let v: Vec<f64> = g.nodes().map(|t| t - 0.5).collect();
        let occ = occupation_localtime(&v, &g, 0.0, 0.031).unwrap();
        let active: Vec<usize> = occ.active_increments().map(|(j, _)| j).collect();
        assert_eq!(active, (47..=53).collect::<Vec<_>>());
        let tan = tanaka_localtime(&v, &g, 0.0).unwrap();
        let active: Vec<usize> = tan.active_increments().filter(|(_, d)| *d > 1e-12).map(|(j, _)| j).collect();
        assert_eq!(active, vec![50]);
        assert!((tan.total() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn level_shift_is_exact() {
        let g = Grid::new(2048).unwrap();
        let p = sample_bm(&g, &mut stream_rng(2, 0));
        let a = 0.37;
        let shifted: Vec<f64> = p.values().iter().map(|b| b - a).collect();
        for m in [LocalTimeMethod::Occupation, LocalTimeMethod::Tanaka] {
            let x = localtime(p.values(), &g, a, m, 0.05).unwrap();
            let y = localtime(&shifted, &g, 0.0, m, 0.05).unwrap();
            assert_eq!(x.values(), y.values());
        }
    }

    #[test]
    fn reflected_is_twice() {
        let g = Grid::new(2048).unwrap();
        let p = sample_bm(&g, &mut stream_rng(3, 0));
        for m in [LocalTimeMethod::Occupation, LocalTimeMethod::Tanaka] {
            let l = localtime(p.values(), &g, 0.1, m, 0.05).unwrap();
            let r = reflected_localtime(p.values(), &g, 0.1, m, 0.05).unwrap();
            for (x, y) in l.values().iter().zip(r.values()) {
                assert_eq!(2.0 * x, *y);
            }
        }
    }

    #[test]
    fn stieltjes_rejects_decreasing() {
        let g = Grid::new(4).unwrap();
        let c = LocalTimeCurve::from_values(g, 0.0, vec![0.0, 0.1, 0.2, 0.2, 0.3], LocalTimeMethod::Tanaka, None).unwrap();
        assert!((stieltjes_dl(&[1.0; 5], &c).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(stieltjes_dl(&[0.0; 5], &c).unwrap(), 0.0);
        assert!(LocalTimeCurve::from_values(g, 0.0, vec![0.0, 0.1, 0.05, 0.2, 0.3], LocalTimeMethod::Tanaka, None).is_err());
    }

    #[test]
    fn sign_at_zero_is_negative() {
        assert_eq!(sign(0.0), -1.0);
        assert_eq!(sign(-0.0), -1.0);
        assert_eq!(sign(1e-300), 1.0);
    }

    #[test]
    fn undersmoothing_flag() {
        let g = Grid::new(1024).unwrap();
        let v = vec![0.0; 1025];
        assert!(occupation_localtime(&v, &g, 0.0, 0.01).unwrap().diagnostics().undersmoothed);
        assert!(!occupation_localtime(&v, &g, 0.0, 0.1).unwrap().diagnostics().undersmoothed);
    }
}
