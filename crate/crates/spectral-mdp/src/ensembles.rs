//! Seeded samplers for the tridiagonal ensemble models.
//!
//! All randomness flows through [`RngState`], a (seed, stream) pair mapped to
//! a counter-based ChaCha generator: identical state reproduces identical
//! draws bit for bit, and disjoint streams give independent Monte Carlo lanes
//! so campaigns can fan out over threads without the worker count changing
//! any result. Draw order is part of the determinism contract and is fixed by
//! [`sample_tridiagonal`]: Gaussian draws b_1..b_n then a_1..a_{n-1};
//! Laguerre draws the recursion variables z_1..z_{2n-1} in index order;
//! Jacobi draws the canonical moments p_1..p_{2n-1} in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measures::{CompensatedSum, ReferenceMeasure, SpectralMeasure};
use crate::orthopoly::{
    coeffs_from_z, eigen_first_row, xfer, z_from_canonical, CanonicalMoments, EigenWorkspace,
    MomentVector, RecursionCoefficients, RecursionVariables,
};
use crate::{Ensemble, Error, Result};

/// Which ensemble to sample, at which size, with which parameters.
///
/// `gamma` is the extra Laguerre/Jacobi exponent and `delta` the second
/// Jacobi exponent; both must exceed -1 where they apply and are absent
/// otherwise. Construct through [`EnsembleSpec::gaussian`],
/// [`EnsembleSpec::laguerre`] or [`EnsembleSpec::jacobi`]; anything arriving
/// through deserialization is re-validated by the samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    kind: Ensemble,
    n: usize,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    delta: Option<f64>,
}

impl EnsembleSpec {
    pub fn gaussian(n: usize, beta: f64) -> Result<Self> {
        let spec = EnsembleSpec {
            kind: Ensemble::Gaussian,
            n,
            beta,
            gamma: None,
            delta: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn laguerre(n: usize, beta: f64, gamma: f64) -> Result<Self> {
        let spec = EnsembleSpec {
            kind: Ensemble::Laguerre,
            n,
            beta,
            gamma: Some(gamma),
            delta: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn jacobi(n: usize, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let spec = EnsembleSpec {
            kind: Ensemble::Jacobi,
            n,
            beta,
            gamma: Some(gamma),
            delta: Some(delta),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Check every invariant; samplers call this so that values coming from
    /// a config file get the same scrutiny as constructor arguments.
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Domain("ensemble dimension n must be >= 1".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Domain(format!(
                "beta must be positive and finite, got {}",
                self.beta
            )));
        }
        let need_gamma = matches!(self.kind, Ensemble::Laguerre | Ensemble::Jacobi);
        let need_delta = matches!(self.kind, Ensemble::Jacobi);
        match (need_gamma, self.gamma) {
            (true, Some(g)) if g.is_finite() && g > -1.0 => {}
            (true, Some(g)) => {
                return Err(Error::Domain(format!(
                    "gamma must be finite and > -1, got {g}"
                )))
            }
            (true, None) => {
                return Err(Error::Domain(format!(
                    "{} ensemble requires gamma",
                    self.kind
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Domain("gaussian ensemble takes no gamma".into()))
            }
            (false, None) => {}
        }
        match (need_delta, self.delta) {
            (true, Some(d)) if d.is_finite() && d > -1.0 => {}
            (true, Some(d)) => {
                return Err(Error::Domain(format!(
                    "delta must be finite and > -1, got {d}"
                )))
            }
            (true, None) => return Err(Error::Domain("jacobi ensemble requires delta".into())),
            (false, Some(_)) => {
                return Err(Error::Domain(format!(
                    "{} ensemble takes no delta",
                    self.kind
                )))
            }
            (false, None) => {}
        }
        Ok(())
    }

    pub fn kind(&self) -> Ensemble {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    /// The limit measure this ensemble's spectral measures concentrate on.
    pub fn reference(&self) -> ReferenceMeasure {
        ReferenceMeasure::for_ensemble(self.kind)
    }
}

/// Symmetric tridiagonal matrix stored as diagonal b_1..b_n and strictly
/// positive off-diagonal sqrt(a_1)..sqrt(a_{n-1}).
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Domain("tridiagonal matrix needs dimension >= 1".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::LengthMismatch {
                left: diag.len(),
                right: offdiag.len() + 1,
            });
        }
        if let Some(bad) = diag.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "diagonal entry {} is not finite",
                bad + 1
            )));
        }
        if let Some(bad) = offdiag.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Domain(format!(
                "off-diagonal entry {} must be positive and finite, got {}",
                bad + 1,
                offdiag[bad]
            )));
        }
        Ok(TridiagonalMatrix { diag, offdiag })
    }

    /// Build from recursion coefficients: the off-diagonal entries are the
    /// square roots of the (already validated, strictly positive) a_k.
    pub fn from_recursion(c: &RecursionCoefficients) -> Self {
        TridiagonalMatrix {
            diag: c.b().to_vec(),
            offdiag: c.a().iter().map(|a| a.sqrt()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Recover (b, a) with a_k the squared off-diagonal entries.
    pub fn recursion_coefficients(&self) -> RecursionCoefficients {
        let a = self.offdiag.iter().map(|x| x * x).collect();
        RecursionCoefficients::new(self.diag.clone(), a)
            .expect("entries validated at construction")
    }
}

/// Seed and stream index of a counter-based generator.
///
/// Identical (seed, stream) reproduces identical draws bit for bit on one
/// build of the library. Streams are cheap: `lane(r)` offsets the stream by
/// the replicate index so each Monte Carlo replicate owns an independent
/// generator regardless of which thread runs it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngState { seed, stream }
    }

    /// The state for replicate `r`: same seed, stream shifted by `r`.
    pub fn lane(self, r: u64) -> Self {
        RngState {
            seed: self.seed,
            stream: self.stream.wrapping_add(r),
        }
    }

    /// Instantiate the generator this state describes.
    pub fn build(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn gamma_draw(
    rng: &mut ChaCha8Rng,
    shape: f64,
    scale: f64,
    what: &str,
    index: usize,
) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::Domain(format!(
            "gamma shape for {what}[{index}] is {shape}; must be positive"
        )));
    }
    let dist = Gamma::new(shape, scale).map_err(|e| {
        Error::Numeric(format!("gamma({shape}, {scale}) for {what}[{index}]: {e}"))
    })?;
    Ok(dist.sample(rng))
}

fn beta_draw(rng: &mut ChaCha8Rng, alpha: f64, beta: f64, index: usize) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) || !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!(
            "beta shapes for p[{index}] are ({alpha}, {beta}); both must be positive"
        )));
    }
    let dist = Beta::new(alpha, beta)
        .map_err(|e| Error::Numeric(format!("beta({alpha}, {beta}) for p[{index}]: {e}")))?;
    Ok(dist.sample(rng))
}

/// Draw one tridiagonal matrix with the ensemble's spectral-measure law.
///
/// Gaussian: b_k ~ N(0, 2/(beta n)) for k = 1..n, then independently
/// a_k ~ Gamma(beta (n-k)/2, 2/(beta n)) for k = 1..n-1 (shape/scale
/// convention throughout). Laguerre: the 2n-1 recursion variables
/// z_{2k-1} ~ Gamma(beta (n-k)/2 + gamma + 1, 2/(beta n)) and
/// z_{2k} ~ Gamma(beta (n-k)/2, 2/(beta n)) are drawn in index order and
/// folded into (b, a); the shape of a hypothetical z_{2n} would vanish, but
/// the chain stops at z_{2n-1} so it is never drawn. Jacobi: the 2n-1
/// canonical moments are Beta-distributed with shapes
/// (beta (2n-k)/4, beta (2n-k-2)/4 + gamma + delta + 2) for even k and
/// (beta (2n-k-1)/4 + gamma + 1, beta (2n-k-1)/4 + delta + 1) for odd k,
/// drawn in index order and converted through z to (b, a).
pub fn sample_tridiagonal(spec: EnsembleSpec, state: RngState) -> Result<TridiagonalMatrix> {
    spec.validate()?;
    let n = spec.n();
    let beta = spec.beta();
    let scale = 2.0 / (beta * n as f64);
    let mut rng = state.build();

    match spec.kind() {
        Ensemble::Gaussian => {
            let normal = Normal::new(0.0, scale.sqrt())
                .map_err(|e| Error::Numeric(format!("normal(0, {}): {e}", scale.sqrt())))?;
            let b: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let mut offdiag = Vec::with_capacity(n - 1);
            for k in 1..n {
                let shape = 0.5 * beta * (n - k) as f64;
                offdiag.push(gamma_draw(&mut rng, shape, scale, "a", k)?.sqrt());
            }
            TridiagonalMatrix::new(b, offdiag)
        }
        Ensemble::Laguerre => {
            let gamma = spec.gamma().expect("validated");
            let mut z = Vec::with_capacity(2 * n - 1);
            for m in 1..=(2 * n - 1) {
                let shape = if m % 2 == 1 {
                    let k = (m + 1) / 2;
                    0.5 * beta * (n - k) as f64 + gamma + 1.0
                } else {
                    let k = m / 2;
                    0.5 * beta * (n - k) as f64
                };
                z.push(gamma_draw(&mut rng, shape, scale, "z", m)?);
            }
            let c = coeffs_from_z(&RecursionVariables::new(z)?);
            Ok(TridiagonalMatrix::from_recursion(&c))
        }
        Ensemble::Jacobi => {
            let gamma = spec.gamma().expect("validated");
            let delta = spec.delta().expect("validated");
            let mut p = Vec::with_capacity(2 * n - 1);
            for k in 1..=(2 * n - 1) {
                let (s1, s2) = if k % 2 == 0 {
                    (
                        0.25 * beta * (2 * n - k) as f64,
                        0.25 * beta * (2 * n - k - 2) as f64 + gamma + delta + 2.0,
                    )
                } else {
                    (
                        0.25 * beta * (2 * n - k - 1) as f64 + gamma + 1.0,
                        0.25 * beta * (2 * n - k - 1) as f64 + delta + 1.0,
                    )
                };
                p.push(beta_draw(&mut rng, s1, s2, k)?);
            }
            let z = z_from_canonical(&CanonicalMoments::new(p)?);
            let c = coeffs_from_z(&z);
            Ok(TridiagonalMatrix::from_recursion(&c))
        }
    }
}

/// Spectral measure of (T, e_1): eigenvalues ascending, weight i the squared
/// first component of the i-th orthonormal eigenvector.
pub fn spectral_measure(t: &TridiagonalMatrix) -> Result<SpectralMeasure> {
    let mut ws = EigenWorkspace::new();
    spectral_measure_with(t, &mut ws)
}

/// Same as [`spectral_measure`] with a caller-owned workspace, for loops that
/// decompose many matrices of the same size.
pub fn spectral_measure_with(
    t: &TridiagonalMatrix,
    ws: &mut EigenWorkspace,
) -> Result<SpectralMeasure> {
    let (atoms, first) = eigen_first_row(t.diag(), t.offdiag(), ws)?;
    let weights = first.iter().map(|q| q * q).collect();
    SpectralMeasure::new(atoms, weights)
}

/// First k moments m_j = (T^j)_{1,1} by repeated tridiagonal matrix-vector
/// products on the first basis vector — no eigendecomposition. The banded
/// structure caps the work at O(k * min(k, n)).
pub fn moment_vector(t: &TridiagonalMatrix, k: usize) -> Result<MomentVector> {
    let a: Vec<f64> = t.offdiag().iter().map(|x| x * x).collect();
    MomentVector::new(xfer::moments_from_jacobi(t.diag(), &a, k))
}

/// Symmetric Dirichlet(beta/2) weight vector: n independent Gamma(beta/2, 1)
/// draws, normalized by their sum.
pub fn sample_dirichlet_weights(n: usize, beta: f64, state: RngState) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::Domain("weight vector length must be >= 1".into()));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let mut rng = state.build();
    let dist = Gamma::new(0.5 * beta, 1.0)
        .map_err(|e| Error::Numeric(format!("gamma({}, 1): {e}", 0.5 * beta)))?;
    let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let mut sum = CompensatedSum::new();
    for g in &draws {
        sum.add(*g);
    }
    let total = sum.total();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numeric(format!(
            "dirichlet normalization sum is {total}"
        )));
    }
    Ok(draws.into_iter().map(|g| g / total).collect())
}

/// Pair externally supplied atoms with an independent weight vector. With
/// atoms the eigenvalues of a sampled tridiagonal matrix and weights from
/// [`sample_dirichlet_weights`], the law of the result coincides with the law
/// of [`spectral_measure`] of the same ensemble; the two constructions feed
/// the distributional-equality tests.
pub fn assemble_spectral(atoms: &[f64], weights: &[f64]) -> Result<SpectralMeasure> {
    SpectralMeasure::new(atoms.to_vec(), weights.to_vec())
}

/// Monte Carlo estimate of the covariance of the centered, scaled moment
/// vector, with jackknife standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCovariance {
    covariance: Vec<Vec<f64>>,
    standard_errors: Vec<Vec<f64>>,
    reps: usize,
}

impl MomentCovariance {
    pub fn k(&self) -> usize {
        self.covariance.len()
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    pub fn standard_errors(&self) -> &[Vec<f64>] {
        &self.standard_errors
    }

    pub fn reps(&self) -> usize {
        self.reps
    }
}

/// Sample covariance of x_r = sqrt(beta n / 2) (m^{(k)}(mu_n) - m^{(k)}(sigma))
/// over `reps` replicates, centering on the reference moments of the matching
/// limit law, plus entrywise delete-one jackknife standard errors.
///
/// Replicate r uses `state.lane(r)`, so the fan-out over a thread pool is
/// deterministic: per-replicate results depend only on their own lane books,
/// and the reduction runs sequentially in replicate order with compensated
/// sums. Worker count never changes the output bits.
///
/// Needs `reps >= 3`: the delete-one covariance of `reps - 1` replicates
/// divides by `reps - 2`.
pub fn estimate_moment_covariance(
    spec: EnsembleSpec,
    k: usize,
    reps: usize,
    state: RngState,
) -> Result<MomentCovariance> {
    spec.validate()?;
    if k < 1 {
        return Err(Error::Domain("moment order k must be >= 1".into()));
    }
    if reps < 3 {
        return Err(Error::Domain(format!(
            "jackknife standard errors need at least 3 replicates, got {reps}"
        )));
    }

    let reference = spec.reference();
    let center: Vec<f64> = (1..=k).map(|j| reference.moment(j)).collect();
    let scale = (0.5 * spec.beta() * spec.n() as f64).sqrt();

    // Fan out over replicates; collect preserves replicate order, so the
    // sequential reduction below sees the same sequence for any worker count.
    let xs: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let t = sample_tridiagonal(spec, state.lane(r))?;
            let m = moment_vector(&t, k)?;
            Ok(m.m()
                .iter()
                .zip(&center)
                .map(|(mj, cj)| scale * (mj - cj))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let r_f = reps as f64;
    let mut mean_acc: Vec<CompensatedSum> = (0..k).map(|_| CompensatedSum::new()).collect();
    let mut s2_acc: Vec<Vec<CompensatedSum>> = (0..k)
        .map(|_| (0..k).map(|_| CompensatedSum::new()).collect())
        .collect();
    for x in &xs {
        for i in 0..k {
            mean_acc[i].add(x[i]);
            for j in 0..k {
                s2_acc[i][j].add(x[i] * x[j]);
            }
        }
    }
    let mean: Vec<f64> = mean_acc.iter().map(|s| s.total() / r_f).collect();
    let s2: Vec<Vec<f64>> = s2_acc
        .iter()
        .map(|row| row.iter().map(|s| s.total()).collect())
        .collect();

    let mut covariance = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            covariance[i][j] = (s2[i][j] - r_f * mean[i] * mean[j]) / (r_f - 1.0);
        }
    }

    // Delete-one covariances in closed form from the full-sample sums:
    // with mu_(r) = (R mu - x_r)/(R-1),
    //   C_(r) = (S2 - x_r x_r^T - (R-1) mu_(r) mu_(r)^T) / (R-2),
    // streamed through Welford accumulators per entry.
    let mut jack_mean = vec![vec![0.0; k]; k];
    let mut jack_m2 = vec![vec![0.0; k]; k];
    for (r, x) in xs.iter().enumerate() {
        let mu_r: Vec<f64> = (0..k)
            .map(|i| (r_f * mean[i] - x[i]) / (r_f - 1.0))
            .collect();
        let count = (r + 1) as f64;
        for i in 0..k {
            for j in 0..k {
                let c_r = (s2[i][j] - x[i] * x[j] - (r_f - 1.0) * mu_r[i] * mu_r[j])
                    / (r_f - 2.0);
                let delta = c_r - jack_mean[i][j];
                jack_mean[i][j] += delta / count;
                jack_m2[i][j] += delta * (c_r - jack_mean[i][j]);
            }
        }
    }
    let mut standard_errors = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            standard_errors[i][j] = ((r_f - 1.0) / r_f * jack_m2[i][j]).sqrt();
        }
    }

    Ok(MomentCovariance {
        covariance,
        standard_errors,
        reps,
    })
}
