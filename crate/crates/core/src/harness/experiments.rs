//! Experiment drivers. Every Monte-Carlo experiment draws replicate `r` from
//! its own generator stream and folds the per-replicate results in index
//! order, so reports do not depend on the thread count.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::closedform::{self, covariances, SpectralBasis};
use crate::error::{Error, Result};
use crate::functionals::{
    g_expectation_occupation, psi_k, second_derivative_term, sign_direction, ExpFunctional, GEvaluator, KProfile, QuadraticSweep,
    Renormalization, TestFunction,
};
use crate::harness::config::ExperimentConfig;
use crate::harness::report::{Check, ExperimentReport, Extrapolation, Table};
use crate::harness::stats::{richardson_weights, three_point_fit, Welford};
use crate::kernels::{Mollifier, MollifierSpec};
use crate::localtime::{self, occupation_expected, LocalTimeMethod};
use crate::paths::{cumulate, sample_increments, stream_rng, Grid, SpectralGridOps};
use crate::quad::{composite_gauss, folded_normal_mean, normal_cdf};
use crate::semigroup::{self, fourier_factors, MehlerSampler, PtgPlan, SeriesMode};

/// Runs `f` for replicates `0..m` in parallel and returns results in index order.
pub fn replicate_map<T, F>(m: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync,
{
    (0..m)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            f(&mut rng, r)
        })
        .collect()
}

fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn finite_or_err(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() { Ok(v) } else { Err(Error::NonFinite(name.to_string())) }
}

/// Per-path quantities shared by the mean, Laplace, IBP and reflected experiments.
#[derive(Clone, Debug)]
struct PathRecord {
    log_psi: f64,
    /// `G_{eps,a}` per width.
    g: Vec<f64>,
    /// `int k h sign(B - a)`.
    direction: f64,
    /// `int h'' |B - a|`.
    second: f64,
    /// `int h'' |X - 0|` with `X = |B - a|`.
    second_reflected: f64,
    /// `int h :Bdot^2: dl^0(X)` per width.
    g_reflected: Vec<f64>,
}

struct GFamily {
    epsilons: Vec<f64>,
    records: Vec<PathRecord>,
    expected_g: Option<f64>,
}

fn g_family(cfg: &ExperimentConfig, h: &TestFunction, k: &ExpFunctional, with_ibp: bool) -> Result<GFamily> {
    let grid = cfg.grid()?;
    let epsilons = cfg.epsilon_schedule(h.margin());
    if epsilons.is_empty() {
        return Err(Error::Config("no admissible widths: grid too coarse for the schedule".into()));
    }
    let mollifiers = cfg.mollifiers(&epsilons)?;
    let evals = mollifiers.iter().map(|m| GEvaluator::new(grid, *h, m, cfg.renorm)).collect::<Result<Vec<_>>>()?;
    let k_nodes = k.on_grid(&grid);
    let h_nodes = h.on_grid(&grid);
    let h2_nodes: Vec<f64> = grid.nodes().map(|t| h.d2(t)).collect();
    let delta = cfg.bandwidth();
    let a = cfg.a;
    let method = cfg.lt_method;
    let records = replicate_map(cfg.m, cfg.seed, |rng, _| {
        let mut inc = Vec::with_capacity(grid.n());
        let mut b = Vec::with_capacity(grid.n() + 1);
        sample_increments(&grid, rng, &mut inc);
        cumulate(&inc, &mut b);
        let curve = localtime::localtime(&b, &grid, a, method, delta)?;
        let g = evals.iter().map(|e| e.evaluate_with(&b, &curve)).collect::<Result<Vec<_>>>()?;
        let log_psi = psi_k(&b, &k_nodes, &grid).log_value;
        let (direction, second, second_reflected, g_reflected) = if with_ibp {
            let x: Vec<f64> = b.iter().map(|v| (v - a).abs()).collect();
            let l0 = localtime::reflected_localtime(&b, &grid, a, method, delta)?;
            let gr = evals.iter().map(|e| e.evaluate_with(&b, &l0)).collect::<Result<Vec<_>>>()?;
            (
                sign_direction(&b, &grid, &k_nodes, &h_nodes, a),
                second_derivative_term(&b, &grid, &h2_nodes, a),
                second_derivative_term(&x, &grid, &h2_nodes, 0.0),
                gr,
            )
        } else {
            (0.0, 0.0, 0.0, Vec::new())
        };
        Ok(PathRecord { log_psi, g, direction, second, second_reflected, g_reflected })
    })?;
    let expected_g = (method == LocalTimeMethod::Occupation && cfg.renorm == Renormalization::Discrete)
        .then(|| g_expectation_occupation(h, &grid, a, delta));
    Ok(GFamily { epsilons, records, expected_g })
}

/// Richardson extrapolation of per-path values `y[path][eps]` on the two
/// finest widths, with a three-point power fit on the means as a diagnostic.
fn extrapolate(epsilons: &[f64], per_path: &[Vec<f64>], order: f64) -> (Extrapolation, Vec<Welford>) {
    let levels = epsilons.len();
    let stats: Vec<Welford> = (0..levels).map(|i| per_path.iter().map(|y| y[i]).collect()).collect();
    if levels < 2 {
        let w = stats[0];
        return (Extrapolation { method: "finest".into(), limit: w.mean(), stderr: w.stderr(), order, three_point: None }, stats);
    }
    let (f, c) = (levels - 1, levels - 2);
    let (wf, wc) = richardson_weights(epsilons[f], epsilons[c], order);
    let combined: Welford = per_path.iter().map(|y| wf * y[f] + wc * y[c]).collect();
    let three_point = (levels >= 3).then(|| {
        let e = [epsilons[levels - 3], epsilons[levels - 2], epsilons[levels - 1]];
        let m = [stats[levels - 3].mean(), stats[levels - 2].mean(), stats[levels - 1].mean()];
        three_point_fit(e, m)
    }).flatten();
    (
        Extrapolation { method: format!("richardson order {order} on the two finest widths"), limit: combined.mean(), stderr: combined.stderr(), order, three_point },
        stats,
    )
}

/// `(1 / 2 delta) int_{a-delta}^{a+delta} f(x) dx - f(a)`: the smoothing bias of
/// an occupation estimator with bandwidth `delta` for a level-dependent target.
pub fn bandwidth_bias(f: impl Fn(f64) -> f64, a: f64, delta: f64) -> f64 {
    composite_gauss(&f, a - delta, a + delta, 4) / (2.0 * delta) - f(a)
}

fn eps_table(name: &str, epsilons: &[f64], stats: &[Welford], target: f64) -> Table {
    let mut t = Table::new(name, &["epsilon", "estimate", "stderr", "target"]);
    for (e, w) in epsilons.iter().zip(stats) {
        t.push(vec![*e, w.mean(), w.stderr(), target]);
    }
    t
}

/// MC mean of `G_{eps,a}` per width against `mean_G(h, a)`, plus pairwise
/// consistency across widths under common random numbers.
pub fn run_mean_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let h = cfg.h()?;
    let zero = ExpFunctional::new(KProfile::Zero)?;
    let fam = g_family(cfg, &h, &zero, false)?;
    let target = closedform::mean_g(&h, cfg.a);
    let mut rep = ExperimentReport::new("mean", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    rep.target = Some(target);
    rep.target_label = "mean_G(h, a) by quadrature".into();
    let slack = match fam.expected_g {
        Some(e) => {
            rep.notes.push(format!("exact discrete expectation of the occupation estimator: {e:.10e}"));
            (e - target).abs() + cfg.quad_slack
        }
        None => cfg.quad_slack,
    };
    let per: Vec<Vec<f64>> = fam.records.iter().map(|r| r.g.clone()).collect();
    let stats: Vec<Welford> = (0..fam.epsilons.len()).map(|i| per.iter().map(|y| y[i]).collect()).collect();
    for (e, w) in fam.epsilons.iter().zip(&stats) {
        finite_or_err("mean", w.mean())?;
        rep.check(Check::close(format!("mean eps={e:.5}"), w.mean(), target, cfg.tol_sigma * w.stderr() + slack));
    }
    let mut worst = 0.0f64;
    for i in 0..fam.epsilons.len() {
        for j in i + 1..fam.epsilons.len() {
            let d: Welford = per.iter().map(|y| y[i] - y[j]).collect();
            worst = worst.max(d.mean().abs() / d.stderr());
        }
    }
    rep.check(Check::at_most("max pairwise gap / paired stderr", worst, cfg.tol_sigma));
    rep.tables.push(eps_table("eps_sweep", &fam.epsilons, &stats, target));
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

/// Extrapolated MC `E[Psi_k G_{eps,a}]` against the closed-form Laplace transform.
pub fn run_laplace_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let h = cfg.h()?;
    let k = cfg.k()?;
    let fam = g_family(cfg, &h, &k, false)?;
    let scale = closedform::psi_mean(&k);
    let target = closedform::laplace_rhs(&h, &k, cfg.a);
    let mut rep = ExperimentReport::new("laplace", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    rep.target = Some(target);
    rep.target_label = "e^{<Qk,k>/2} int h N(0,theta)(a-K) lambda(theta, K', a-K) dtheta".into();
    let per: Vec<Vec<f64>> = fam
        .records
        .iter()
        .map(|r| {
            let psi = r.log_psi.exp();
            r.g.iter()
                .map(|g| match fam.expected_g {
                    Some(eg) => psi * g - scale * (g - eg),
                    None => psi * g,
                })
                .collect()
        })
        .collect();
    let order = if cfg.extrap_order > 0.0 { cfg.extrap_order } else { 2.0 };
    let (ext, stats) = extrapolate(&fam.epsilons, &per, order);
    finite_or_err("laplace", ext.limit)?;
    let bias = if cfg.lt_method == LocalTimeMethod::Occupation {
        bandwidth_bias(|x| closedform::laplace_rhs(&h, &k, x), cfg.a, cfg.bandwidth()).abs()
    } else {
        0.0
    };
    rep.notes.push(format!("bandwidth smoothing bias of the target: {bias:.3e}"));
    rep.check(Check::close("extrapolated vs laplace_rhs", ext.limit, target, cfg.tol_sigma * ext.stderr + bias + cfg.quad_slack));
    rep.tables.push(eps_table("eps_sweep", &fam.epsilons, &stats, target));
    rep.extrapolation = Some(ext);
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

struct IbpParts {
    fam: GFamily,
    scale: f64,
    lhs: Vec<f64>,
    rhs_sign: Vec<Vec<f64>>,
    rhs_reflected: Vec<Vec<f64>>,
    max_gap: f64,
}

fn ibp_parts(cfg: &ExperimentConfig, h: &TestFunction, k: &ExpFunctional) -> Result<IbpParts> {
    let fam = g_family(cfg, h, k, true)?;
    let grid = cfg.grid()?;
    let scale = closedform::psi_mean(k);
    let a = cfg.a;
    // Exact expectations of the pathwise pieces on the grid, used as control variates.
    let trap = |f: &dyn Fn(f64) -> f64| -> f64 {
        let v: Vec<f64> = grid.nodes().map(f).collect();
        crate::quad::trapezoid(&v, grid.step())
    };
    let e_dir = trap(&|t| if t == 0.0 { 0.0 } else { k.k(t) * h.value(t) * (1.0 - 2.0 * normal_cdf(a / t.sqrt())) });
    let e_second = trap(&|t| h.d2(t) * folded_normal_mean(-a, t));
    let eg = fam.expected_g;
    let mut lhs = Vec::with_capacity(fam.records.len());
    let mut rhs_sign = Vec::with_capacity(fam.records.len());
    let mut rhs_reflected = Vec::with_capacity(fam.records.len());
    let mut max_gap = 0.0f64;
    for r in &fam.records {
        let psi = r.log_psi.exp();
        lhs.push(psi * r.direction - scale * (r.direction - e_dir));
        let mut rs = Vec::with_capacity(r.g.len());
        let mut rr = Vec::with_capacity(r.g.len());
        for (g, gr) in r.g.iter().zip(&r.g_reflected) {
            let sign_form = psi * (-r.second + 2.0 * g);
            let reflected_form = psi * (-r.second_reflected + gr);
            max_gap = max_gap.max((sign_form - reflected_form).abs());
            if sign_form.to_bits() != reflected_form.to_bits() {
                max_gap = max_gap.max(f64::MIN_POSITIVE);
            }
            let cv = match eg {
                Some(eg) => scale * (-(r.second - e_second) + 2.0 * (g - eg)),
                None => scale * (-(r.second - e_second)),
            };
            rs.push(sign_form - cv);
            rr.push(reflected_form - cv);
        }
        rhs_sign.push(rs);
        rhs_reflected.push(rr);
    }
    Ok(IbpParts { fam, scale, lhs, rhs_sign, rhs_reflected, max_gap })
}

/// Closed-form sign-case identity plus MC estimates of both sides, and the
/// reflected form on the same paths.
pub fn run_ibp_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let h = cfg.h()?;
    let k = cfg.k()?;
    let a = cfg.a;
    let lhs_cf = closedform::ibp_lhs_sign(&h, &k, a);
    let rhs_cf = closedform::ibp_rhs_sign(&h, &k, a);
    let mut rep = ExperimentReport::new("ibp", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    rep.target = Some(lhs_cf);
    rep.target_label = "e^{<Qk,k>/2} int h k (1 - 2 Phi((a - K)/sqrt(theta))) dtheta".into();
    rep.check(Check::close("closed-form lhs vs rhs", rhs_cf, lhs_cf, cfg.closed_form_tol));

    let parts = ibp_parts(cfg, &h, &k)?;
    let _ = parts.scale;
    let lw: Welford = parts.lhs.iter().copied().collect();
    rep.check(Check::close("MC lhs vs closed-form lhs", lw.mean(), lhs_cf, cfg.tol_sigma * lw.stderr() + cfg.quad_slack));
    let order = if cfg.extrap_order > 0.0 { cfg.extrap_order } else { 2.0 };
    let (ext, stats) = extrapolate(&parts.fam.epsilons, &parts.rhs_sign, order);
    finite_or_err("ibp", ext.limit)?;
    let bias = if cfg.lt_method == LocalTimeMethod::Occupation {
        2.0 * bandwidth_bias(|x| closedform::laplace_rhs(&h, &k, x), a, cfg.bandwidth()).abs()
    } else {
        0.0
    };
    rep.check(Check::close("MC rhs (extrapolated) vs closed-form rhs", ext.limit, rhs_cf, cfg.tol_sigma * ext.stderr + bias + cfg.quad_slack));
    rep.check(Check::exact("reflected vs sign-case assembly, max pathwise gap", parts.max_gap));
    rep.tables.push(eps_table("rhs_eps_sweep", &parts.fam.epsilons, &stats, rhs_cf));
    rep.extrapolation = Some(ext);
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

/// The reflected-path form: `X = |B - a|`, `l^0 = 2 L^a`, compared with the
/// closed form and, pathwise, with the sign-case assembly.
pub fn run_rbm_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let h = cfg.h()?;
    let k = cfg.k()?;
    let a = cfg.a;
    let rhs_cf = closedform::ibp_rhs_sign(&h, &k, a);
    let mut rep = ExperimentReport::new("rbm", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    rep.target = Some(rhs_cf);
    rep.target_label = "closed-form right side (reflected form equals sign form)".into();
    let parts = ibp_parts(cfg, &h, &k)?;
    rep.check(Check::exact("reflected vs sign-case assembly, max pathwise gap", parts.max_gap));
    let order = if cfg.extrap_order > 0.0 { cfg.extrap_order } else { 2.0 };
    let (ext_r, stats_r) = extrapolate(&parts.fam.epsilons, &parts.rhs_reflected, order);
    let (ext_s, _) = extrapolate(&parts.fam.epsilons, &parts.rhs_sign, order);
    rep.check(Check::exact("reflected vs sign-case report, extrapolated gap", (ext_r.limit - ext_s.limit).abs()));
    let bias = if cfg.lt_method == LocalTimeMethod::Occupation {
        2.0 * bandwidth_bias(|x| closedform::laplace_rhs(&h, &k, x), a, cfg.bandwidth()).abs()
    } else {
        0.0
    };
    rep.check(Check::close("reflected MC (extrapolated) vs closed-form rhs", ext_r.limit, rhs_cf, cfg.tol_sigma * ext_r.stderr + bias + cfg.quad_slack));
    rep.tables.push(eps_table("eps_sweep", &parts.fam.epsilons, &stats_r, rhs_cf));
    rep.extrapolation = Some(ext_r);
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

/// Extrapolated MC `E[Psi_k Gq_eps]` for the local-time-free quadratic
/// functional against `e^{<Qk,k>/2} int (K')^2`.
pub fn run_quadratic_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let k = cfg.k()?;
    let grid = cfg.grid()?;
    let epsilons = cfg.epsilon_schedule(0.5);
    if epsilons.is_empty() {
        return Err(Error::Config("no admissible widths".into()));
    }
    let mollifiers = cfg.mollifiers(&epsilons)?;
    let sweep = QuadraticSweep::new(grid, &mollifiers)?;
    let k_nodes = k.on_grid(&grid);
    let scale = closedform::psi_mean(&k);
    let per = replicate_map(cfg.m, cfg.seed, |rng, _| {
        let mut inc = Vec::with_capacity(grid.n());
        let mut b = Vec::with_capacity(grid.n() + 1);
        sample_increments(&grid, rng, &mut inc);
        cumulate(&inc, &mut b);
        let psi = psi_k(&b, &k_nodes, &grid);
        let qs = sweep.evaluate(&inc)?;
        // Psi Gq minus e^{q/2} (1 + <B,k>) Gq: the subtracted term has mean zero exactly.
        Ok(qs.into_iter().map(|g| (psi.value - scale * (1.0 + psi.log_value)) * g).collect::<Vec<f64>>())
    })?;
    let target = closedform::quadratic_rhs(&k);
    let mut rep = ExperimentReport::new("quadratic", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    rep.target = Some(target);
    rep.target_label = "e^{<Qk,k>/2} int (K')^2 dtheta".into();
    let order = if cfg.extrap_order > 0.0 { cfg.extrap_order } else { 1.0 };
    let (ext, stats) = extrapolate(&epsilons, &per, order);
    finite_or_err("quadratic", ext.limit)?;
    rep.check(Check::close("extrapolated vs quadratic_rhs", ext.limit, target, cfg.tol_sigma * ext.stderr + cfg.quad_slack));
    rep.tables.push(eps_table("eps_sweep", &epsilons, &stats, target));
    rep.extrapolation = Some(ext);
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

/// `||P_t G_eps||^2` over `t` and `eps` with common `z` samples, log-log
/// slopes, the Mehler oracle at the configured `(t, eps)` pairs, and the
/// exponential convergence of `P_t Psi_{e_1}`.
pub fn run_decay_study(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let h = cfg.h()?;
    let basis = SpectralBasis::new(cfg.n_modes)?;
    let theta_grid = Grid::new(cfg.theta_n)?;
    let mut rep = ExperimentReport::new("decay", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    rep.target_label = "slope of log(||P_t G_eps||^2 / (1 + |ln t|^6)) against log t, bound t^{-3/4}".into();
    rep.target = Some(-0.75);

    let base = Mollifier::new(cfg.mollifier_spec(cfg.decay_eps.first().copied().unwrap_or(0.02)))?;
    let mut plans = Vec::new();
    for &eps in &cfg.decay_eps {
        let m = base.with_epsilon(eps)?;
        let rho = fourier_factors(&m, &basis);
        for &t in &cfg.t_grid {
            plans.push(PtgPlan::new(t, &h, &m, &rho, &basis, &theta_grid, SeriesMode::Resummed)?);
        }
    }
    let values = replicate_map(cfg.m, cfg.seed, |rng, _| {
        let z = semigroup::sample_z(&basis, rng);
        Ok(plans.iter().map(|p| p.evaluate(&z, 0.0).value.powi(2)).collect::<Vec<f64>>())
    })?;
    let nt = cfg.t_grid.len();
    let mut table = Table::new("norms", &["t", "epsilon", "estimate", "stderr", "bound_shape"]);
    let shape: Vec<f64> = cfg.t_grid.iter().map(|t| semigroup::decay_bound_shape(*t)).collect();
    let bound_slope = semigroup::loglog_slope(&cfg.t_grid, &shape);
    for (ie, &eps) in cfg.decay_eps.iter().enumerate() {
        let mut est = Vec::new();
        for (it, &t) in cfg.t_grid.iter().enumerate() {
            let w: Welford = values.iter().map(|v| v[ie * nt + it]).collect();
            finite_or_err("decay", w.mean())?;
            table.push(vec![t, eps, w.mean(), w.stderr(), semigroup::decay_bound_shape(t)]);
            est.push(w.mean());
        }
        let slope = semigroup::log_corrected_slope(&cfg.t_grid, &est);
        let raw = semigroup::loglog_slope(&cfg.t_grid, &est);
        rep.check(Check::at_least(format!("log-corrected log-log slope eps={eps}"), slope, cfg.min_slope));
        rep.check(Check::at_least(format!("raw slope vs raw slope of the bound shape eps={eps}"), raw, bound_slope));
        let kappa = cfg.t_grid.iter().zip(&est).map(|(t, e)| e / semigroup::decay_bound_shape(*t)).fold(0.0, f64::max);
        rep.notes.push(format!("eps={eps}: log-corrected slope {slope:.4}, raw slope {raw:.4}, smallest kappa dominating the sweep {kappa:.4e}"));
    }
    rep.tables.push(table);

    let mut mehler = Table::new("mehler", &["t", "epsilon", "mc", "stderr", "formula_window", "formula_pointwise"]);
    let mbasis = SpectralBasis::new(cfg.mehler_n_modes)?;
    let mgrid = Grid::new(cfg.mehler_n)?;
    let ops = SpectralGridOps::new(mgrid);
    let mdelta = (cfg.mehler_n as f64).powf(-1.0 / 3.0);
    for (p, (t, eps)) in cfg.mehler().into_iter().enumerate() {
        let m = base.with_epsilon(eps)?;
        let rho = fourier_factors(&m, &mbasis);
        let plan = PtgPlan::new(t, &h, &m, &rho, &mbasis, &mgrid, SeriesMode::Truncated)?;
        let z = semigroup::sample_z(&mbasis, &mut stream_rng(cfg.seed ^ 0x9e37_79b9, p as u64));
        let window = plan.evaluate_window(&z, 0.0, mdelta);
        let pointwise = plan.evaluate(&z, 0.0).value;
        let sampler = MehlerSampler::new(&mbasis, &ops, &rho, &h, t, mdelta);
        let draws = replicate_map(cfg.mehler_m, cfg.seed.wrapping_add(1 + p as u64), |rng, _| sampler.sample(&z, 0.0, rng))?;
        let w: Welford = draws.into_iter().collect();
        mehler.push(vec![t, eps, w.mean(), w.stderr(), window, pointwise]);
        rep.check(Check::close(format!("Mehler oracle t={t} eps={eps}"), w.mean(), window, cfg.tol_sigma * w.stderr() + cfg.quad_slack));
    }
    rep.tables.push(mehler);

    let e1 = ExpFunctional::new(KProfile::Eigen { index: 1, scale: 1.0 })?;
    let ex = semigroup::expc_decay(&e1, &SpectralBasis::new(32)?, &cfg.expc_t, cfg.m, &mut stream_rng(cfg.seed, u64::MAX))?;
    let l1 = basis.lambda(0);
    rep.check(Check::at_least("exponential rate of ||P_t Psi - mu(Psi)||^2 vs 2/lambda_1", ex.fitted_rate, 2.0 / l1));
    rep.notes.push(format!("exponential rate fitted {:.4}, spectral {:.4}, lambda_1 {:.4}", ex.fitted_rate, ex.exact_rate, l1));
    let mut expc = Table::new("expc", &["t", "estimate", "stderr", "exact"]);
    for i in 0..ex.t.len() {
        expc.push(vec![ex.t[i], ex.estimate[i], ex.stderr[i], ex.exact[i]]);
    }
    rep.tables.push(expc);
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

/// Exponential convergence of `P_t Psi_k` on its own.
pub fn run_expc_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut k = cfg.k()?;
    if k.is_zero() {
        k = ExpFunctional::new(KProfile::Eigen { index: 1, scale: 1.0 })?;
    }
    let basis = SpectralBasis::new(cfg.n_modes.min(64))?;
    let ex = semigroup::expc_decay(&k, &basis, &cfg.expc_t, cfg.m, &mut stream_rng(cfg.seed, 0))?;
    let mut rep = ExperimentReport::new("expc", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    rep.target = Some(ex.exact_rate);
    rep.target_label = "spectral rate of ||P_t Psi_k - mu(Psi_k)||^2".into();
    let l1 = basis.lambda(0);
    rep.check(Check::at_least("fitted rate vs 2/lambda_1", ex.fitted_rate, 2.0 / l1));
    let mut table = Table::new("expc", &["t", "estimate", "stderr", "exact"]);
    for i in 0..ex.t.len() {
        rep.check(Check::close(format!("norm at t={}", ex.t[i]), ex.estimate[i], ex.exact[i], cfg.tol_sigma * ex.stderr[i]));
        table.push(vec![ex.t[i], ex.estimate[i], ex.stderr[i], ex.exact[i]]);
    }
    rep.notes.push(format!("fitted rate {:.4}, exact {:.4}, lambda_1 {:.4}, 2/lambda_1 {:.4}", ex.fitted_rate, ex.exact_rate, l1, 2.0 / l1));
    rep.tables.push(table);
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

/// Local time estimators: `E[L^0_1]`, occupation/Tanaka agreement over a
/// bandwidth sweep, `E[int h dL^a]`, and per-path cost.
pub fn run_localtime_bench(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let h = cfg.h()?;
    let a = cfg.a;
    let delta = cfg.bandwidth();
    let deltas = [4.0 * delta, 2.0 * delta, delta];
    let h_nodes = h.on_grid(&grid);
    let rows = replicate_map(cfg.m, cfg.seed, |rng, _| {
        let mut inc = Vec::new();
        let mut b = Vec::new();
        sample_increments(&grid, rng, &mut inc);
        cumulate(&inc, &mut b);
        let tan = localtime::tanaka_localtime(&b, &grid, 0.0)?;
        let mut row = vec![tan.total(), tan.diagnostics().monotone_correction];
        for d in deltas {
            row.push(localtime::occupation_localtime(&b, &grid, 0.0, d)?.total());
        }
        let occ_a = localtime::occupation_localtime(&b, &grid, a, delta)?;
        row.push(localtime::stieltjes_dl(&h_nodes, &occ_a)?);
        Ok(row)
    })?;
    let mut rep = ExperimentReport::new("localtime-bench", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));
    let truth = (2.0 / std::f64::consts::PI).sqrt();
    rep.target = Some(truth);
    rep.target_label = "E[L^0_1] = E|B_1| = sqrt(2/pi)".into();
    let col = |i: usize| -> Welford { rows.iter().map(|r| r[i]).collect() };
    let tan = col(0);
    rep.check(Check::close("Tanaka E[L^0_1]", tan.mean(), truth, cfg.tol_sigma * tan.stderr()));
    let occ = col(4);
    let bias = (occupation_expected(|_| 1.0, &grid, 0.0, delta) - truth).abs();
    rep.check(Check::close("occupation E[L^0_1]", occ.mean(), truth, cfg.tol_sigma * occ.stderr() + bias));
    let mut table = Table::new("cross", &["delta", "mean_abs_gap", "stderr"]);
    let mut gaps = Vec::new();
    for (j, d) in deltas.iter().enumerate() {
        let w: Welford = rows.iter().map(|r| (r[2 + j] - r[0]).abs()).collect();
        table.push(vec![*d, w.mean(), w.stderr()]);
        gaps.push(w.mean());
    }
    rep.check(Check::at_most("occupation/Tanaka gap shrinks with delta (last - first)", gaps[2] - gaps[0], 0.0));
    let hl = col(5);
    let hl_target = closedform::occupation_mean(&h, a);
    let hl_bias = (occupation_expected(|t| h.value(t), &grid, a, delta) - hl_target).abs();
    rep.check(Check::close("E[int h dL^a]", hl.mean(), hl_target, cfg.tol_sigma * hl.stderr() + hl_bias + cfg.quad_slack));
    let corr = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    rep.notes.push(format!("largest Tanaka monotonization correction {corr:.3e}"));
    rep.tables.push(table);
    rep.finish(start.elapsed().as_secs_f64());
    rep.notes.push(format!("{:.1} microseconds per path", 1e6 * rep.wall_clock_seconds / cfg.m as f64));
    Ok(rep)
}

/// Closed-form sign-case identity over a matrix of `(h, k, a)`.
pub fn run_ibp_closed_form_matrix(tol: f64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let hs = [
        TestFunction::bump(0.3, 0.7),
        TestFunction::Poly { lo: 0.2, hi: 0.9, amp: 1.0 },
        TestFunction::Bump { lo: 0.1, hi: 0.5, amp: 2.0 },
    ];
    let ks = [
        KProfile::Constant { value: 1.0 },
        KProfile::Eigen { index: 1, scale: 1.0 },
        KProfile::Cosine { freq: 1.5, amp: 0.7 },
    ];
    let avals = [-0.4, 0.0, 0.5];
    let mut rep = ExperimentReport::new("ibp-closed-form", "", 0, 0, serde_json::Value::Null);
    let mut table = Table::new("matrix", &["h_index", "k_index", "a", "lhs", "rhs"]);
    for (ih, h) in hs.iter().enumerate() {
        for (ik, k) in ks.iter().enumerate() {
            let ef = ExpFunctional::new(*k)?;
            for &a in &avals {
                let l = closedform::ibp_lhs_sign(h, &ef, a);
                let r = closedform::ibp_rhs_sign(h, &ef, a);
                table.push(vec![ih as f64, ik as f64, a, l, r]);
                rep.check(Check::close(format!("h{ih} k{ik} a={a}"), r, l, tol));
            }
        }
    }
    rep.tables.push(table);
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

/// Deterministic and pathwise property checks: kernel scaling, covariance
/// identities, shift covariance of `G_{eps,a}`.
pub fn run_property_suite(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut rep = ExperimentReport::new("properties", &cfg.experiment_id, cfg.seed, cfg.m, config_json(cfg));

    // c_eps * eps over a dyadic sweep and across theta.
    let m = Mollifier::new(cfg.mollifier_spec(0.08))?;
    let mut prods = Vec::new();
    for j in 0..6 {
        let e = 0.08 * 0.5f64.powi(j);
        prods.push(m.with_epsilon(e)?.c_eps(0.5)? * e);
    }
    let mean = prods.iter().sum::<f64>() / prods.len() as f64;
    let spread = prods.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max) / mean;
    rep.check(Check::at_most("c_eps * eps relative variation", spread, 1e-6));
    let me = m.with_epsilon(0.05)?;
    let cs: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|t| me.c_eps(*t)).collect::<Result<_>>()?;
    let cmean = cs.iter().sum::<f64>() / cs.len() as f64;
    rep.check(Check::at_most("c_eps theta spread", cs.iter().map(|c| (c - cmean).abs()).fold(0.0, f64::max) / cmean, 1e-8));

    // q_t + q^t = theta ^ theta' within the truncation tail, and Chapman-Kolmogorov.
    let basis = SpectralBasis::new(cfg.n_modes)?;
    let mut worst = 0.0f64;
    let mut bound = f64::INFINITY;
    for &t in &[0.01, 0.1, 1.0] {
        let cov = covariances(t, &basis)?;
        bound = bound.min(cov.identity_tail_bound());
        for &x in &[0.1, 0.3, 0.5, 0.7, 1.0] {
            for &y in &[0.2, 0.5, 0.7, 0.95] {
                worst = worst.max((cov.q_t_series(x, y) + cov.q_upper(x, y) - x.min(y)).abs());
            }
        }
    }
    rep.check(Check::at_most("q_t + q^t - theta^theta' vs tail bound", worst, bound));
    let grid = Grid::new(cfg.n)?;
    let (t, s) = (0.02, 0.05);
    let (gt, gs, gts) = (covariances(t, &basis)?, covariances(s, &basis)?, covariances(t + s, &basis)?);
    let ops = SpectralGridOps::new(grid);
    let mut ck = 0.0f64;
    for &(x, y) in &[(0.3, 0.7), (0.5, 0.5), (0.9, 0.2)] {
        let f: Vec<f64> = grid.nodes().map(|sig| gt.g_t(x, sig).unwrap_or(f64::NAN) * gs.g_t(sig, y).unwrap_or(f64::NAN)).collect();
        let lhs = crate::quad::trapezoid(&f, grid.step());
        ck = ck.max((lhs - gts.g_t(x, y)?).abs());
    }
    let _ = ops;
    rep.check(Check::at_most("Chapman-Kolmogorov gap", ck, 1e-6));

    // Shift covariance of G_{eps,a}: path + a l with l = 1 near supp(h), l_0 = 0.
    let h = cfg.h()?;
    let eps = 0.02;
    let mol = Mollifier::new(MollifierSpec { epsilon: eps, ..cfg.mollifier_spec(eps) })?;
    let ev = GEvaluator::new(grid, h, &mol, cfg.renorm)?;
    let (lo, _) = h.support().unwrap_or((0.25, 0.75));
    let ramp_end = (lo - eps) * 0.5;
    let ell = |t: f64| if t >= ramp_end { 1.0 } else { let x = t / ramp_end; x * x * (3.0 - 2.0 * x) };
    let shift = 0.37;
    let mut gap = 0.0f64;
    let mut curve_gap = 0.0f64;
    let delta = cfg.bandwidth();
    for r in 0..20u64 {
        let mut rng = stream_rng(cfg.seed, r);
        let mut inc = Vec::new();
        let mut b = Vec::new();
        sample_increments(&grid, &mut rng, &mut inc);
        cumulate(&inc, &mut b);
        let shifted: Vec<f64> = b.iter().enumerate().map(|(j, v)| v + shift * ell(grid.node(j))).collect();
        let c0 = localtime::localtime(&b, &grid, 0.0, cfg.lt_method, delta)?;
        let c1 = localtime::localtime(&shifted, &grid, shift, cfg.lt_method, delta)?;
        let j0 = (ramp_end * grid.n() as f64).ceil() as usize + 1;
        for j in j0..=grid.n() {
            let d0 = c0.values()[j] - c0.values()[j0];
            let d1 = c1.values()[j] - c1.values()[j0];
            curve_gap = curve_gap.max((d0 - d1).abs());
        }
        let g0 = ev.evaluate_with(&b, &c0)?;
        let g1 = ev.evaluate_with(&shifted, &c1)?;
        gap = gap.max((g0 - g1).abs() / (1.0 + g0.abs()));
    }
    rep.check(Check::at_most("shift covariance: local time increments on supp(l')^c", curve_gap, 1e-12));
    rep.check(Check::at_most("shift covariance: G_{eps,a}(B + a l) vs G_{eps,0}(B), relative", gap, 1e-9));
    rep.finish(start.elapsed().as_secs_f64());
    Ok(rep)
}

fn with(base: &ExperimentConfig, id: &str, edit: impl FnOnce(&mut ExperimentConfig)) -> ExperimentConfig {
    let mut c = base.clone();
    c.experiment_id = id.into();
    edit(&mut c);
    c
}

/// The acceptance suite, each report tagged with its criterion number (1..=7).
/// `base` supplies the grid, budgets and tolerances; the suite sets `h`, `k`
/// and `a` per configuration.
pub fn run_suite(base: &ExperimentConfig) -> Result<Vec<(u32, ExperimentReport)>> {
    let mut out = vec![(1, run_ibp_closed_form_matrix(base.closed_form_tol)?)];
    let zero_k = |c: &mut ExperimentConfig| c.k_kind = "zero".into();
    for a in [0.0, 0.25] {
        let cfg = with(base, &format!("a={a}"), |c| {
            zero_k(c);
            c.a = a;
        });
        out.push((2, run_mean_experiment(&cfg)?));
    }
    let laplace = [("constant", 1usize, 1.0, 1.0, 0.0), ("eigen", 1, 1.0, 1.0, 0.2), ("cosine", 1, 0.7, 1.5, -0.3)];
    for (kind, index, scale, freq, a) in laplace {
        let cfg = with(base, &format!("k={kind} a={a}"), |c| {
            c.k_kind = kind.into();
            c.k_index = index;
            c.k_scale = scale;
            c.k_freq = freq;
            c.a = a;
        });
        out.push((3, run_laplace_experiment(&cfg)?));
    }
    for kind in ["eigen", "constant"] {
        let cfg = with(base, &format!("k={kind}"), |c| {
            c.k_kind = kind.into();
            c.k_index = 1;
            c.k_scale = 1.0;
        });
        out.push((4, run_quadratic_experiment(&cfg)?));
    }
    let cfg = with(base, "k=constant a=0.1", |c| {
        c.k_kind = "constant".into();
        c.k_scale = 1.0;
        c.a = 0.1;
    });
    out.push((5, run_rbm_experiment(&cfg)?));
    out.push((6, run_decay_study(&with(base, "", |_| ()))?));
    out.push((7, run_property_suite(&with(base, "", zero_k))?));
    out.push((7, run_localtime_bench(&with(base, "", |c| c.a = 0.2))?));
    Ok(out)
}
