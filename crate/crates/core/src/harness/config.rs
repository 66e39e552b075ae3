//! Flat key-value experiment configuration, loaded from TOML with
//! `key=value` overrides.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{ExpFunctional, KProfile, Renormalization, TestFunction};
use crate::kernels::{KernelKind, MassConvention, Mollifier, MollifierSpec};
use crate::localtime::{default_bandwidth, LocalTimeMethod};
use crate::paths::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Free-form label copied into the report.
    pub experiment_id: String,
    /// Grid intervals.
    pub n: usize,
    pub kernel: KernelKind,
    pub mass: MassConvention,
    pub quad_points: usize,
    /// Explicit widths, strictly decreasing; empty means the dyadic schedule.
    pub epsilons: Vec<f64>,
    /// Dyadic schedule `2^{-first}, ..., 2^{-last}` times the support margin of `h`.
    pub eps_first: i32,
    pub eps_last: i32,
    /// Replicates.
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,

    pub h_kind: String,
    pub h_lo: f64,
    pub h_hi: f64,
    pub h_amp: f64,

    pub k_kind: String,
    pub k_scale: f64,
    pub k_index: usize,
    pub k_freq: f64,
    pub k_intercept: f64,

    /// Level of the local time.
    pub a: f64,
    pub lt_method: LocalTimeMethod,
    /// Occupation bandwidth; 0 means `n^{-1/3}`.
    pub delta: f64,
    pub renorm: Renormalization,

    /// Spectral truncation.
    #[serde(rename = "N")]
    pub n_modes: usize,
    pub t_grid: Vec<f64>,
    /// Widths for the decay study.
    pub decay_eps: Vec<f64>,
    /// `theta` intervals for the explicit semigroup formula.
    pub theta_n: usize,
    /// `(t, eps)` pairs checked against the Mehler oracle, flattened.
    pub mehler_pairs: Vec<f64>,
    #[serde(rename = "mehler_M")]
    pub mehler_m: usize,
    /// Spectral truncation and grid for the Mehler oracle.
    pub mehler_n_modes: usize,
    pub mehler_n: usize,
    pub expc_t: Vec<f64>,

    /// Acceptance multiple of the standard error.
    pub tol_sigma: f64,
    /// Deterministic slack added to every MC tolerance.
    pub quad_slack: f64,
    /// Tolerance of the deterministic closed-form identity.
    pub closed_form_tol: f64,
    /// Extrapolation order; 0 picks the default of the experiment.
    pub extrap_order: f64,
    /// Minimum log-log slope accepted in the decay study.
    pub min_slope: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment_id: String::new(),
            n: 4096,
            kernel: KernelKind::Bump,
            mass: MassConvention::UnitMass,
            quad_points: 512,
            epsilons: Vec::new(),
            eps_first: 3,
            eps_last: 8,
            m: 100_000,
            seed: 20240601,
            h_kind: "bump".into(),
            h_lo: 0.3,
            h_hi: 0.7,
            h_amp: 1.0,
            k_kind: "zero".into(),
            k_scale: 1.0,
            k_index: 1,
            k_freq: 1.0,
            k_intercept: 0.0,
            a: 0.0,
            lt_method: LocalTimeMethod::Occupation,
            delta: 0.0,
            renorm: Renormalization::Discrete,
            n_modes: 512,
            t_grid: (1..=7).map(|k| 0.5f64.powi(k)).collect(),
            decay_eps: vec![0.04, 0.02, 0.01],
            theta_n: 1024,
            mehler_pairs: vec![0.05, 0.04, 0.05, 0.02, 0.2, 0.04, 0.2, 0.02, 0.8, 0.04, 0.8, 0.02],
            mehler_m: 40_000,
            mehler_n_modes: 128,
            mehler_n: 1024,
            expc_t: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            tol_sigma: 4.0,
            quad_slack: 1e-6,
            closed_form_tol: 1e-6,
            extrap_order: 0.0,
            min_slope: -0.85,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (if any) and applies `key=value` overrides, each value
    /// parsed as a TOML value with a bare-string fallback.
    pub fn load(path: Option<&FsPath>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for ov in overrides {
            let (key, raw) = ov.split_once('=').ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
            let key = key.trim();
            let raw = raw.trim();
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        let cfg: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 100 {
            return Err(Error::Config(format!("M = {} below the minimum of 100", self.m)));
        }
        if self.epsilons.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Config("epsilons must be strictly decreasing".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if self.eps_first > self.eps_last {
            return Err(Error::Config("eps_first must not exceed eps_last".into()));
        }
        if !self.mehler_pairs.len().is_multiple_of(2) {
            return Err(Error::Config("mehler_pairs must hold (t, eps) pairs".into()));
        }
        Grid::new(self.n)?;
        self.h()?;
        self.k()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n)
    }

    pub fn h(&self) -> Result<TestFunction> {
        let h = match self.h_kind.as_str() {
            "bump" => TestFunction::Bump { lo: self.h_lo, hi: self.h_hi, amp: self.h_amp },
            "poly" => TestFunction::Poly { lo: self.h_lo, hi: self.h_hi, amp: self.h_amp },
            "zero" => TestFunction::Zero,
            other => return Err(Error::Config(format!("unknown h_kind `{other}` (bump, poly, zero)"))),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn k_profile(&self) -> Result<KProfile> {
        Ok(match self.k_kind.as_str() {
            "zero" => KProfile::Zero,
            "constant" => KProfile::Constant { value: self.k_scale },
            "eigen" => KProfile::Eigen { index: self.k_index, scale: self.k_scale },
            "linear" => KProfile::Linear { intercept: self.k_intercept, slope: self.k_scale },
            "cosine" => KProfile::Cosine { freq: self.k_freq, amp: self.k_scale },
            other => return Err(Error::Config(format!("unknown k_kind `{other}` (zero, constant, eigen, linear, cosine)"))),
        })
    }

    pub fn k(&self) -> Result<ExpFunctional> {
        ExpFunctional::new(self.k_profile()?)
    }

    pub fn mollifier_spec(&self, epsilon: f64) -> MollifierSpec {
        MollifierSpec { kernel: self.kernel, epsilon, quad_points: self.quad_points, mass: self.mass }
    }

    pub fn mollifiers(&self, epsilons: &[f64]) -> Result<Vec<Mollifier>> {
        let Some(first) = epsilons.first() else {
            return Ok(Vec::new());
        };
        let base = Mollifier::new(self.mollifier_spec(*first))?;
        epsilons.iter().map(|e| base.with_epsilon(*e)).collect()
    }

    /// Occupation bandwidth in effect.
    pub fn bandwidth(&self) -> f64 {
        if self.delta > 0.0 { self.delta } else { default_bandwidth(&Grid::new(self.n.max(2)).expect("n >= 2")) }
    }

    /// Width schedule: explicit list, or `2^{-j} * base` for `j` in
    /// `eps_first..=eps_last`, keeping only widths resolved by the grid
    /// (`eps >= 10 / n`).
    pub fn epsilon_schedule(&self, base: f64) -> Vec<f64> {
        let floor = 10.0 / self.n as f64;
        if !self.epsilons.is_empty() {
            return self.epsilons.clone();
        }
        (self.eps_first..=self.eps_last).map(|j| base * 0.5f64.powi(j)).filter(|e| *e >= floor * (1.0 - 1e-12)).collect()
    }

    /// Mehler `(t, eps)` pairs.
    pub fn mehler(&self) -> Vec<(f64, f64)> {
        self.mehler_pairs.chunks(2).map(|c| (c[0], c[1])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = ExperimentConfig::load(None, &["M=200".into(), "a=0".into(), "k_kind=eigen".into()]).unwrap();
        assert_eq!(cfg.m, 200);
        assert_eq!(cfg.a, 0.0);
        assert_eq!(cfg.k_kind, "eigen");
        assert!(ExperimentConfig::load(None, &["bogus=1".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["M=10".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["epsilons=[0.01, 0.02]".into()]).is_err());
    }

    #[test]
    fn schedule_respects_grid_floor() {
        let cfg = ExperimentConfig::default();
        let s = cfg.epsilon_schedule(0.3);
        assert_eq!(s.len(), 4);
        assert!((s[0] - 0.0375).abs() < 1e-15);
        assert!(s.iter().all(|e| *e >= 10.0 / 4096.0));
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig::from_toml_str("n = 2048\nM = 500\nh_kind = \"poly\"\nlt_method = \"tanaka\"\n").unwrap();
        assert_eq!(cfg.n, 2048);
        assert_eq!(cfg.lt_method, LocalTimeMethod::Tanaka);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
