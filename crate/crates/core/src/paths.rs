//! Uniform grids, Brownian path samplers (increment and spectral), and
//! fields expanded in the eigenbasis `e_i`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::closedform::SpectralBasis;
use crate::error::{invalid, Error, Result};

/// Reproducible generator for replicate `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", format!("grid needs at least 2 intervals, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |j| self.node(j))
    }

    /// Trapezoid weights for the nodes.
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n { 0.5 * self.step() } else { self.step() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathSeed {
    pub seed: u64,
    pub stream: u64,
}

/// A sampled trajectory in `C = {k : k_0 = 0}`.
#[derive(Clone, Debug)]
pub struct Path {
    grid: Grid,
    values: Vec<f64>,
    seed: Option<PathSeed>,
}

impl Path {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() + 1 {
            return Err(Error::LengthMismatch { expected: grid.n() + 1, got: values.len() });
        }
        if values[0] != 0.0 {
            return Err(invalid("values", "path must start at 0"));
        }
        Ok(Self { grid, values, seed: None })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn with_seed(mut self, seed: PathSeed) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn seed(&self) -> Option<PathSeed> {
        self.seed
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Debug dump as `node,value` rows.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "node,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e}", self.grid.node(j), v)?;
        }
        Ok(())
    }
}

/// Fills `out` with independent `N(0, h)` increments.
pub fn sample_increments<R: Rng + ?Sized>(grid: &Grid, rng: &mut R, out: &mut Vec<f64>) {
    let s = grid.step().sqrt();
    out.clear();
    out.extend((0..grid.n()).map(|_| s * rng.sample::<f64, _>(StandardNormal)));
}

/// Cumulative sums of `increments`, starting at 0.
pub fn cumulate(increments: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.reserve(increments.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for d in increments {
        acc += d;
        out.push(acc);
    }
}

/// Brownian path from independent `N(0, 1/n)` increments.
pub fn sample_bm<R: Rng + ?Sized>(grid: &Grid, rng: &mut R) -> Path {
    let mut inc = Vec::new();
    let mut values = Vec::new();
    sample_increments(grid, rng, &mut inc);
    cumulate(&inc, &mut values);
    Path { grid: *grid, values, seed: None }
}

/// Independent standard normal coefficients `xi_1, ..., xi_N`.
#[derive(Clone, Debug)]
pub struct SpectralSample {
    coeffs: Vec<f64>,
}

impl SpectralSample {
    pub fn draw<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("N", "truncation level must be >= 1"));
        }
        Ok(Self { coeffs: (0..n_modes).map(|_| rng.sample(StandardNormal)).collect() })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `B = sum xi_i lambda_i^{-1/2} e_i` as a mode field.
    pub fn brownian(&self, basis: &SpectralBasis) -> ModeField {
        let coeffs = self.coeffs.iter().zip(basis.lambdas()).map(|(x, l)| x / l.sqrt()).collect();
        ModeField { coeffs }
    }
}

/// A function `sum_i c_i e_i(theta)` with finitely many modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeField {
    pub coeffs: Vec<f64>,
}

impl ModeField {
    pub fn zero(n_modes: usize) -> Self {
        Self { coeffs: vec![0.0; n_modes] }
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn value(&self, basis: &SpectralBasis, theta: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(i, c)| c * basis.e(i, theta)).sum()
    }

    pub fn derivative(&self, basis: &SpectralBasis, theta: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(i, c)| c * basis.de(i, theta)).sum()
    }

    /// `e^{tA}` applied mode-wise.
    pub fn evolve(&self, basis: &SpectralBasis, t: f64) -> ModeField {
        let coeffs = self.coeffs.iter().zip(basis.lambdas()).map(|(c, l)| c * (-0.5 * l * t).exp()).collect();
        ModeField { coeffs }
    }

    pub fn add(&self, other: &ModeField) -> ModeField {
        let n = self.n_modes().max(other.n_modes());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        ModeField { coeffs: (0..n).map(|i| get(&self.coeffs, i) + get(&other.coeffs, i)).collect() }
    }
}

/// Synthesizes sine/cosine series on a grid and projects grid data onto the
/// modes, using one complex FFT of length `4n`.
#[derive(Clone)]
pub struct SpectralGridOps {
    grid: Grid,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGridOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGridOps").field("grid", &self.grid).finish()
    }
}

impl SpectralGridOps {
    pub fn new(grid: Grid) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(4 * grid.n());
        Self { grid, fft }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn max_modes(&self) -> usize {
        2 * self.grid.n()
    }

    fn transform(&self, coeffs: impl Iterator<Item = (usize, f64)>) -> Vec<Complex<f64>> {
        let m = 4 * self.grid.n();
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (i, c) in coeffs {
            buf[2 * i + 1] = Complex::new(c, 0.0);
        }
        self.fft.process(&mut buf);
        buf.truncate(self.grid.n() + 1);
        buf
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.max_modes() {
            return Err(invalid("N", format!("{n} modes alias on a grid of {} intervals", self.grid.n())));
        }
        Ok(())
    }

    /// Values of `sum c_i e_i` at the grid nodes.
    pub fn synthesize(&self, field: &ModeField) -> Result<Vec<f64>> {
        self.check(field.n_modes())?;
        let s = std::f64::consts::SQRT_2;
        let buf = self.transform(field.coeffs.iter().enumerate().map(|(i, c)| (i, s * c)));
        Ok(buf.iter().map(|z| z.im).collect())
    }

    /// Values of `sum c_i e_i'` at the grid nodes.
    pub fn synthesize_derivative(&self, field: &ModeField, basis: &SpectralBasis) -> Result<Vec<f64>> {
        self.check(field.n_modes())?;
        let s = std::f64::consts::SQRT_2;
        let buf = self.transform(field.coeffs.iter().enumerate().map(|(i, c)| (i, s * c * basis.omegas()[i])));
        Ok(buf.iter().map(|z| z.re).collect())
    }

    /// `<z, e_i>` for `i < n_modes` by the trapezoid rule on the grid.
    pub fn project(&self, values: &[f64], n_modes: usize) -> Result<ModeField> {
        if values.len() != self.grid.n() + 1 {
            return Err(Error::LengthMismatch { expected: self.grid.n() + 1, got: values.len() });
        }
        self.check(n_modes)?;
        let m = 4 * self.grid.n();
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (j, v) in values.iter().enumerate() {
            buf[j] = Complex::new(v * self.grid.trapezoid_weight(j), 0.0);
        }
        self.fft.process(&mut buf);
        let s = std::f64::consts::SQRT_2;
        Ok(ModeField { coeffs: (0..n_modes).map(|i| s * buf[2 * i + 1].im).collect() })
    }
}

/// Spectral (Karhunen-Loeve) Brownian path `sum_{i<=N} xi_i lambda_i^{-1/2} e_i`.
pub fn sample_bm_spectral<R: Rng + ?Sized>(n_modes: usize, rng: &mut R, ops: &SpectralGridOps, basis: &SpectralBasis) -> Result<Path> {
    let xi = SpectralSample::draw(n_modes, rng)?;
    let field = xi.brownian(basis);
    let mut values = ops.synthesize(&field)?;
    values[0] = 0.0;
    Ok(Path { grid: *ops.grid(), values, seed: None })
}

/// `z(t, .) = sum e^{-lambda_i t / 2} <z, e_i> e_i` with trapezoid coefficients.
pub fn heat_evolve(path: &Path, t: f64, basis: &SpectralBasis, ops: &SpectralGridOps) -> Result<ModeField> {
    if !(t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    let z = ops.project(path.values(), basis.n_modes())?;
    Ok(z.evolve(basis, t))
}

/// Gaussian field `v(t, .) = sum sqrt((1 - e^{-lambda_i t}) / lambda_i) xi_i e_i`.
pub fn sample_v_field<R: Rng + ?Sized>(t: f64, basis: &SpectralBasis, rng: &mut R) -> Result<ModeField> {
    if !(t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    let xi = SpectralSample::draw(basis.n_modes(), rng)?;
    let coeffs = xi
        .coeffs()
        .iter()
        .zip(basis.lambdas())
        .map(|(x, l)| x * ((-(-l * t).exp_m1()) / l).sqrt())
        .collect();
    Ok(ModeField { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_path() {
        let g = Grid::new(256).unwrap();
        let a = sample_bm(&g, &mut stream_rng(7, 3));
        let b = sample_bm(&g, &mut stream_rng(7, 3));
        let c = sample_bm(&g, &mut stream_rng(7, 4));
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert_eq!(a.values()[0], 0.0);
    }

    #[test]
    fn synthesis_matches_direct_sum() {
        let g = Grid::new(64).unwrap();
        let basis = SpectralBasis::new(40).unwrap();
        let ops = SpectralGridOps::new(g);
        let f = ModeField { coeffs: (0..40).map(|i| 1.0 / (1.0 + i as f64)).collect() };
        let v = ops.synthesize(&f).unwrap();
        let d = ops.synthesize_derivative(&f, &basis).unwrap();
        for j in [0, 5, 31, 64] {
            let th = g.node(j);
            assert!((v[j] - f.value(&basis, th)).abs() < 1e-12);
            assert!((d[j] - f.derivative(&basis, th)).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_inverts_synthesis() {
        let g = Grid::new(128).unwrap();
        let ops = SpectralGridOps::new(g);
        let f = ModeField { coeffs: (0..100).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect() };
        let back = ops.project(&ops.synthesize(&f).unwrap(), 100).unwrap();
        for (a, b) in f.coeffs.iter().zip(&back.coeffs) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn too_many_modes_rejected() {
        let g = Grid::new(8).unwrap();
        let ops = SpectralGridOps::new(g);
        assert!(ops.synthesize(&ModeField::zero(17)).is_err());
    }

    #[test]
    fn heat_evolve_eigenfunction_and_boundary() {
        let g = Grid::new(512).unwrap();
        let basis = SpectralBasis::new(64).unwrap();
        let ops = SpectralGridOps::new(g);
        let p = Path::from_fn(g, |th| basis.e(0, th)).unwrap();
        let z = heat_evolve(&p, 0.3, &basis, &ops).unwrap();
        let expect = (-basis.lambda(0) * 0.15).exp();
        assert!((z.coeffs[0] - expect).abs() < 1e-12);
        assert!(z.coeffs[1..].iter().all(|c| c.abs() < 1e-12));
        assert_eq!(z.value(&basis, 0.0), 0.0);
        assert!(z.derivative(&basis, 1.0).abs() < 1e-12);
        assert!(heat_evolve(&p, 0.0, &basis, &ops).is_err());
    }

    #[test]
    fn v_field_variance_vanishes_at_zero_time() {
        let basis = SpectralBasis::new(16).unwrap();
        let v = sample_v_field(1e-300, &basis, &mut stream_rng(1, 0)).unwrap();
        assert!(v.coeffs.iter().all(|c| c.abs() < 1e-140));
    }
}
