//! Rate functions of the moderate deviation principles and the exact-tail
//! tables that verify the scalar limits numerically.
//!
//! Three levels share the same quadratic structure: scalar laws
//! (Normal/Gamma/Beta families whose rates are `x^2/(2 alpha)`,
//! `alpha x^2 / 2` and `4 alpha x^2`), moment vectors (a weighted norm
//! through the inverse covariance factor `D_k`), and signed measures (a
//! Parseval sum over an orthonormal basis of the reference measure). The
//! table driver evaluates the scalar tail probabilities exactly in log space
//! — at the sizes where the asymptotics bite, the probabilities are far
//! below anything Monte Carlo could resolve.

use serde::{Deserialize, Serialize};

use crate::combinatorics::dk_matrix;
use crate::measures::{CompensatedSum, SignedMeasureRep};
use crate::orthopoly::{eval_orthonormal, gauss_quadrature, MomentVector, RecursionCoefficients};
use crate::special::{
    ln_beta_lower_reg, ln_beta_upper_reg, ln_gamma_lower_reg, ln_gamma_upper_reg, ln_normal_upper,
    logaddexp,
};
use crate::{Ensemble, Error, Result};

/// The three scalar deviation families.
///
/// `NormalVar` is a centered normal with variance `alpha/n`; `GammaMean` is
/// Gamma with mean 1 and shape growing like `alpha n`; `BetaHalf` is a Beta
/// law symmetric around 1/2 with both shapes growing like `alpha n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarRateKind {
    NormalVar,
    GammaMean,
    BetaHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarRateSpec {
    kind: ScalarRateKind,
    alpha: f64,
}

impl ScalarRateSpec {
    pub fn new(kind: ScalarRateKind, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        Ok(ScalarRateSpec { kind, alpha })
    }

    pub fn kind(&self) -> ScalarRateKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The point the family concentrates on: 0, 1 and 1/2 respectively.
    pub fn center(&self) -> f64 {
        match self.kind {
            ScalarRateKind::NormalVar => 0.0,
            ScalarRateKind::GammaMean => 1.0,
            ScalarRateKind::BetaHalf => 0.5,
        }
    }
}

/// The quadratic rate of the scalar family at deviation x.
pub fn scalar_rate(spec: ScalarRateSpec, x: f64) -> f64 {
    match spec.kind() {
        ScalarRateKind::NormalVar => x * x / (2.0 * spec.alpha()),
        ScalarRateKind::GammaMean => 0.5 * spec.alpha() * x * x,
        ScalarRateKind::BetaHalf => 4.0 * spec.alpha() * x * x,
    }
}

/// Deviation speed a_n: grows without bound, but slower than n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SpeedSchedule {
    /// a_n = n^theta with theta strictly between 0 and 1.
    Power { theta: f64 },
    /// a_n = log n (needs n >= 2 to be positive).
    LogN,
}

impl SpeedSchedule {
    pub fn power(theta: f64) -> Result<Self> {
        let s = SpeedSchedule::Power { theta };
        s.validate()?;
        Ok(s)
    }

    pub fn log_n() -> Self {
        SpeedSchedule::LogN
    }

    pub fn validate(&self) -> Result<()> {
        if let SpeedSchedule::Power { theta } = self {
            if !(theta.is_finite() && *theta > 0.0 && *theta < 1.0) {
                return Err(Error::Domain(format!(
                    "speed exponent theta must lie strictly between 0 and 1, got {theta}"
                )));
            }
        }
        Ok(())
    }

    pub fn a(&self, n: u64) -> f64 {
        match self {
            SpeedSchedule::Power { theta } => (n as f64).powf(*theta),
            SpeedSchedule::LogN => (n as f64).ln(),
        }
    }
}

/// One row of the verification table: the exact tail of the finite-n law at
/// the deviation point, normalized by the speed, next to the limit rate.
///
/// Rows that cannot be evaluated (non-positive speed, or a tail the special
/// functions fail to converge on) carry NaN in `log_tail` and
/// `normalized_rate`; a tail that is exactly zero gives `log_tail = -inf`
/// and `normalized_rate = +inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MdpTableRow {
    pub n: u64,
    pub a_n: f64,
    pub x_n: f64,
    pub log_tail: f64,
    pub normalized_rate: f64,
    pub target_rate: f64,
}

/// Secondary parameters of the finite-n laws in the table driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpTableOptions {
    /// Additive shape offset: Gamma(alpha n + shape_offset, 1/(alpha n)),
    /// and the first shape of the Beta family.
    pub shape_offset: f64,
    /// Second Beta shape offset.
    pub second_offset: f64,
    /// Evaluate P(|T - center| >= dev) instead of P(T >= center + dev).
    pub two_sided: bool,
}

impl Default for MdpTableOptions {
    fn default() -> Self {
        MdpTableOptions {
            shape_offset: 1.0,
            second_offset: 1.0,
            two_sided: false,
        }
    }
}

fn log_tail_upper(spec: ScalarRateSpec, opts: MdpTableOptions, n: u64, point: f64) -> Result<f64> {
    let alpha = spec.alpha();
    let nf = n as f64;
    match spec.kind() {
        ScalarRateKind::NormalVar => Ok(ln_normal_upper(point * (nf / alpha).sqrt())),
        ScalarRateKind::GammaMean => {
            if point <= 0.0 {
                return Ok(0.0);
            }
            ln_gamma_upper_reg(alpha * nf + opts.shape_offset, point * alpha * nf)
        }
        ScalarRateKind::BetaHalf => {
            if point <= 0.0 {
                return Ok(0.0);
            }
            if point >= 1.0 {
                return Ok(f64::NEG_INFINITY);
            }
            ln_beta_upper_reg(
                alpha * nf + opts.shape_offset,
                alpha * nf + opts.second_offset,
                point,
            )
        }
    }
}

fn log_tail_lower(spec: ScalarRateSpec, opts: MdpTableOptions, n: u64, point: f64) -> Result<f64> {
    let alpha = spec.alpha();
    let nf = n as f64;
    match spec.kind() {
        ScalarRateKind::NormalVar => Ok(ln_normal_upper(-point * (nf / alpha).sqrt())),
        ScalarRateKind::GammaMean => {
            if point <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            ln_gamma_lower_reg(alpha * nf + opts.shape_offset, point * alpha * nf)
        }
        ScalarRateKind::BetaHalf => {
            if point <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            if point >= 1.0 {
                return Ok(0.0);
            }
            ln_beta_lower_reg(
                alpha * nf + opts.shape_offset,
                alpha * nf + opts.second_offset,
                point,
            )
        }
    }
}

/// Exact-tail verification table for a scalar family.
///
/// For each n, evaluates the tail of the finite-n law beyond the moving
/// point x_n = center + x sqrt(a_n / n) in log space and reports
/// -(1/a_n) log P next to the limit rate; the `normalized_rate` column must
/// drift toward `target_rate` as n grows, at every admissible speed.
pub fn scalar_mdp_table(
    spec: ScalarRateSpec,
    x: f64,
    schedule: SpeedSchedule,
    n_list: &[u64],
    opts: MdpTableOptions,
) -> Result<Vec<MdpTableRow>> {
    schedule.validate()?;
    if !x.is_finite() {
        return Err(Error::Domain(format!("deviation x must be finite, got {x}")));
    }
    if opts.two_sided && x < 0.0 {
        return Err(Error::Domain(
            "two-sided tails need a nonnegative deviation x".into(),
        ));
    }
    let target = scalar_rate(spec, x);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n < 1 {
            return Err(Error::Domain("table sizes n must be >= 1".into()));
        }
        let a_n = schedule.a(n);
        if !(a_n.is_finite() && a_n > 0.0) {
            rows.push(MdpTableRow {
                n,
                a_n,
                x_n: f64::NAN,
                log_tail: f64::NAN,
                normalized_rate: f64::NAN,
                target_rate: target,
            });
            continue;
        }
        let dev = x * (a_n / n as f64).sqrt();
        let x_n = spec.center() + dev;
        let log_tail = if opts.two_sided {
            let hi = log_tail_upper(spec, opts, n, spec.center() + dev);
            let lo = log_tail_lower(spec, opts, n, spec.center() - dev);
            match (hi, lo) {
                (Ok(h), Ok(l)) => Ok(logaddexp(h, l)),
                (Err(e), _) | (_, Err(e)) => Err(e),
            }
        } else {
            log_tail_upper(spec, opts, n, x_n)
        };
        let (log_tail, normalized_rate) = match log_tail {
            Ok(lt) => (lt, -lt / a_n),
            Err(_) => (f64::NAN, f64::NAN),
        };
        rows.push(MdpTableRow {
            n,
            a_n,
            x_n,
            log_tail,
            normalized_rate,
            target_rate: target,
        });
    }
    Ok(rows)
}

/// Moment-level rate: (beta/4) ||D_k^{-1} m||^2, by forward substitution
/// against the exact lower-triangular covariance factor of the ensemble.
pub fn moment_rate(ensemble: Ensemble, beta: f64, m: &MomentVector) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let k = m.len();
    if k == 0 {
        return Err(Error::Domain("moment rate needs at least one moment".into()));
    }
    let d = dk_matrix(ensemble, k)?.to_f64();
    let mut y = vec![0.0f64; k];
    for i in 0..k {
        let mut s = m.m()[i];
        for j in 0..i {
            s -= d[i][j] * y[j];
        }
        if d[i][i] == 0.0 {
            return Err(Error::Numeric(format!(
                "covariance factor has zero diagonal at {}",
                i + 1
            )));
        }
        y[i] = s / d[i][i];
    }
    Ok(0.25 * beta * y.iter().map(|v| v * v).sum::<f64>())
}

/// Measure-level rate.
///
/// A polynomial density h = sum c_d p-hat_d against its reference measure
/// has rate (beta/4) ||c||^2 by orthonormality; a discrete signed measure
/// with any mass on an atom is singular to the (atomless) reference
/// measures, so its rate is +infinity. The all-zero discrete measure is the
/// zero measure and rates 0.
pub fn measure_rate(beta: f64, mu: &SignedMeasureRep) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    mu.validate()?;
    match mu {
        SignedMeasureRep::PolynomialDensity { coeffs, .. } => {
            Ok(0.25 * beta * coeffs.iter().map(|c| c * c).sum::<f64>())
        }
        SignedMeasureRep::DiscreteSigned { weights, .. } => {
            if weights.iter().all(|w| *w == 0.0) {
                Ok(0.0)
            } else {
                Ok(f64::INFINITY)
            }
        }
    }
}

/// Running partial sums (beta/4) sum_{j<=k} (integral of p-hat_j d mu)^2 for
/// k = 1..=K, where p-hat_j are the orthonormal polynomials of the measure
/// described by `sigma` (which must carry at least K diagonal and
/// off-diagonal coefficients).
///
/// Projections of a polynomial density are integrated with a Gauss rule of
/// the density's own reference measure, sized to make every integrand
/// exact; projections of a discrete measure are plain sums over its atoms.
/// The sums are nondecreasing in k by construction and converge to the
/// measure-level rate as K grows (they diverge when the rate is infinite).
pub fn projection_partial_sums(
    beta: f64,
    mu: &SignedMeasureRep,
    sigma: &RecursionCoefficients,
    max_k: usize,
) -> Result<Vec<f64>> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    if max_k == 0 {
        return Err(Error::Domain("projection order K must be >= 1".into()));
    }
    mu.validate()?;

    let projections: Vec<f64> = match mu {
        SignedMeasureRep::PolynomialDensity { reference, coeffs } => {
            let deg = coeffs.len();
            // p-hat_j * h has degree at most max_k + deg; a rule with
            // (max_k + deg)/2 + 1 nodes integrates it exactly against the
            // reference.
            let nodes = (max_k + deg) / 2 + 1;
            let own = reference.recursion(nodes.max(deg + 1))?;
            let (xq, wq) = gauss_quadrature(&own, nodes)?;
            let mut h = vec![0.0f64; xq.len()];
            for (hi, &x) in h.iter_mut().zip(&xq) {
                let mut acc = 0.0;
                for (d, c) in coeffs.iter().enumerate() {
                    acc += c * eval_orthonormal(&own, d + 1, x)?;
                }
                *hi = acc;
            }
            (1..=max_k)
                .map(|j| -> Result<f64> {
                    let mut acc = CompensatedSum::new();
                    for ((&x, &w), &hv) in xq.iter().zip(&wq).zip(&h) {
                        acc.add(w * hv * eval_orthonormal(sigma, j, x)?);
                    }
                    Ok(acc.total())
                })
                .collect::<Result<_>>()?
        }
        SignedMeasureRep::DiscreteSigned { atoms, weights } => (1..=max_k)
            .map(|j| -> Result<f64> {
                let mut acc = CompensatedSum::new();
                for (&x, &w) in atoms.iter().zip(weights) {
                    acc.add(w * eval_orthonormal(sigma, j, x)?);
                }
                Ok(acc.total())
            })
            .collect::<Result<_>>()?,
    };

    let mut running = CompensatedSum::new();
    Ok(projections
        .iter()
        .map(|p| {
            running.add(0.25 * beta * p * p);
            running.total()
        })
        .collect())
}

/// The K-th projection partial sum — the finite-dimensional approximation
/// of the measure-level rate from below.
pub fn rate_via_projections(
    beta: f64,
    mu: &SignedMeasureRep,
    sigma: &RecursionCoefficients,
    max_k: usize,
) -> Result<f64> {
    Ok(*projection_partial_sums(beta, mu, sigma, max_k)?
        .last()
        .expect("max_k >= 1 produces at least one partial sum"))
}

/// Constrained quadratic infimum inf { weight ||x||^2 : J x = z }.
///
/// A square jacobian must be lower-triangular with nonzero diagonal (only
/// the lower triangle is read) and the infimum is attained at the unique
/// solution; a wide jacobian (fewer rows than columns) takes the
/// minimum-norm branch x = J^T (J J^T)^{-1} z, which requires full row
/// rank. More rows than columns is rejected: the constraint is
/// overdetermined.
pub fn delta_method_rate(weight: f64, jacobian: &[Vec<f64>], z: &[f64]) -> Result<f64> {
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::Domain(format!(
            "weight must be positive and finite, got {weight}"
        )));
    }
    let rows = jacobian.len();
    if rows == 0 {
        return Err(Error::Domain("jacobian needs at least one row".into()));
    }
    let cols = jacobian[0].len();
    if jacobian.iter().any(|r| r.len() != cols) {
        return Err(Error::Domain("jacobian rows have unequal lengths".into()));
    }
    if jacobian
        .iter()
        .any(|r| r.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Domain("jacobian entries must be finite".into()));
    }
    if z.len() != rows {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: rows,
        });
    }

    if rows == cols {
        let mut y = vec![0.0f64; rows];
        for i in 0..rows {
            let mut s = z[i];
            for j in 0..i {
                s -= jacobian[i][j] * y[j];
            }
            if jacobian[i][i] == 0.0 {
                return Err(Error::Domain(format!(
                    "singular jacobian: zero diagonal entry at row {}",
                    i + 1
                )));
            }
            y[i] = s / jacobian[i][i];
        }
        return Ok(weight * y.iter().map(|v| v * v).sum::<f64>());
    }
    if rows > cols {
        return Err(Error::Domain(format!(
            "jacobian has {rows} rows but only {cols} columns; the constraint system is overdetermined"
        )));
    }

    // Minimum-norm branch: solve (J J^T) u = z by Cholesky, x = J^T u.
    let mut g = vec![vec![0.0f64; rows]; rows];
    for i in 0..rows {
        for j in 0..rows {
            g[i][j] = (0..cols).map(|t| jacobian[i][t] * jacobian[j][t]).sum();
        }
    }
    let mut l = vec![vec![0.0f64; rows]; rows];
    for i in 0..rows {
        for j in 0..=i {
            let mut s = g[i][j];
            for t in 0..j {
                s -= l[i][t] * l[j][t];
            }
            if i == j {
                // Rank check relative to the untouched diagonal: exact
                // dependence leaves a pivot of pure roundoff, never exactly
                // zero.
                if !(s > 1e-12 * g[i][i].abs().max(f64::MIN_POSITIVE)) {
                    return Err(Error::Domain(
                        "jacobian rows are linearly dependent; minimum-norm solution undefined"
                            .into(),
                    ));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut u = vec![0.0f64; rows];
    for i in 0..rows {
        let mut s = z[i];
        for j in 0..i {
            s -= l[i][j] * u[j];
        }
        u[i] = s / l[i][i];
    }
    for i in (0..rows).rev() {
        let mut s = u[i];
        for j in i + 1..rows {
            s -= l[j][i] * u[j];
        }
        u[i] = s / l[i][i];
    }
    let mut norm2 = 0.0;
    for t in 0..cols {
        let xt: f64 = (0..rows).map(|i| jacobian[i][t] * u[i]).sum();
        norm2 += xt * xt;
    }
    Ok(weight * norm2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ReferenceMeasure;

    fn spec(kind: ScalarRateKind, alpha: f64) -> ScalarRateSpec {
        ScalarRateSpec::new(kind, alpha).unwrap()
    }

    #[test]
    fn scalar_rate_closed_forms() {
        assert_eq!(scalar_rate(spec(ScalarRateKind::NormalVar, 1.0), 0.0), 0.0);
        assert_eq!(scalar_rate(spec(ScalarRateKind::BetaHalf, 1.0), 0.5), 1.0);
        assert_eq!(scalar_rate(spec(ScalarRateKind::GammaMean, 2.0), 1.0), 1.0);
        // Quadratic and even in x.
        let s = spec(ScalarRateKind::NormalVar, 0.7);
        assert_eq!(scalar_rate(s, -1.3), scalar_rate(s, 1.3));
        assert!((scalar_rate(s, 2.6) - 4.0 * scalar_rate(s, 1.3)).abs() < 1e-14);
        assert!(ScalarRateSpec::new(ScalarRateKind::NormalVar, 0.0).is_err());
    }

    #[test]
    fn speed_schedule_basics() {
        let sqrt_n = SpeedSchedule::power(0.5).unwrap();
        assert!((sqrt_n.a(10_000) - 100.0).abs() < 1e-9);
        assert!(SpeedSchedule::power(0.0).is_err());
        assert!(SpeedSchedule::power(1.0).is_err());
        assert!((SpeedSchedule::log_n().a(1000) - 1000.0f64.ln()).abs() < 1e-12);
        assert_eq!(
            serde_json::to_string(&sqrt_n).unwrap(),
            r#"{"rule":"power","theta":0.5}"#
        );
        assert_eq!(
            serde_json::to_string(&SpeedSchedule::log_n()).unwrap(),
            r#"{"rule":"log_n"}"#
        );
    }

    /// The three scalar families with a_n = sqrt(n): the normalized rate at
    /// n = 10^6 sits within 10% of the limit, and the deviation from the
    /// limit shrinks monotonically across the last three decades.
    ///
    /// The Gamma family's deviation has two competing corrections — the
    /// log-prefactor of the tail, decaying like log(n)/sqrt(n) from above,
    /// and the third-cumulant skewness term, decaying like x^3 n^{-1/8}
    /// from below. At x = 1 they cross right around n = 10^4, producing a
    /// (correct) non-monotone deviation sequence; x = 1.5 puts the skewness
    /// term firmly in charge, so that is where monotonicity is asserted,
    /// while x = 1 keeps the 10% accuracy check.
    #[test]
    fn table_converges_to_rate() {
        let ns = [10_000u64, 100_000, 1_000_000];
        let sqrt_n = SpeedSchedule::power(0.5).unwrap();
        let cases = [
            (spec(ScalarRateKind::NormalVar, 1.0), 1.0),
            (spec(ScalarRateKind::GammaMean, 1.0), 1.5),
            (spec(ScalarRateKind::BetaHalf, 1.0), 0.25),
        ];
        for (s, x) in cases {
            let rows = scalar_mdp_table(s, x, sqrt_n, &ns, MdpTableOptions::default()).unwrap();
            let target = scalar_rate(s, x);
            let devs: Vec<f64> = rows
                .iter()
                .map(|r| (r.normalized_rate - target).abs())
                .collect();
            assert!(
                devs[0] > devs[1] && devs[1] > devs[2],
                "{:?}: deviations {devs:?}",
                s.kind()
            );
            assert!(
                devs[2] < 0.1 * target,
                "{:?}: final {} vs {target}",
                s.kind(),
                rows[2].normalized_rate
            );
        }

        let s = spec(ScalarRateKind::GammaMean, 1.0);
        let rows =
            scalar_mdp_table(s, 1.0, sqrt_n, &[1_000_000], MdpTableOptions::default()).unwrap();
        assert!((rows[0].normalized_rate - 0.5).abs() < 0.05);
    }

    /// The limit does not depend on the speed: a_n = n^0.6 lands on the same
    /// rate as a_n = sqrt(n).
    #[test]
    fn table_limit_is_speed_independent() {
        let s = spec(ScalarRateKind::GammaMean, 1.0);
        let rows = scalar_mdp_table(
            s,
            1.0,
            SpeedSchedule::power(0.6).unwrap(),
            &[1_000_000],
            MdpTableOptions::default(),
        )
        .unwrap();
        assert!((rows[0].normalized_rate - 0.5).abs() < 0.05);
    }

    #[test]
    fn table_two_sided_doubles_symmetric_tails() {
        let s = spec(ScalarRateKind::NormalVar, 1.0);
        let one = scalar_mdp_table(
            s,
            1.0,
            SpeedSchedule::power(0.5).unwrap(),
            &[10_000],
            MdpTableOptions::default(),
        )
        .unwrap();
        let two = scalar_mdp_table(
            s,
            1.0,
            SpeedSchedule::power(0.5).unwrap(),
            &[10_000],
            MdpTableOptions {
                two_sided: true,
                ..MdpTableOptions::default()
            },
        )
        .unwrap();
        let diff = two[0].log_tail - one[0].log_tail;
        assert!((diff - std::f64::consts::LN_2).abs() < 1e-12, "diff {diff}");

        assert!(scalar_mdp_table(
            s,
            -1.0,
            SpeedSchedule::power(0.5).unwrap(),
            &[100],
            MdpTableOptions {
                two_sided: true,
                ..MdpTableOptions::default()
            },
        )
        .is_err());
    }

    #[test]
    fn table_flags_and_sentinels() {
        // log(1) = 0 is not a positive speed: the n = 1 row is flagged.
        let s = spec(ScalarRateKind::GammaMean, 1.0);
        let rows =
            scalar_mdp_table(s, 1.0, SpeedSchedule::log_n(), &[1, 100], MdpTableOptions::default())
                .unwrap();
        assert!(rows[0].log_tail.is_nan() && rows[0].normalized_rate.is_nan());
        assert!(rows[1].log_tail.is_finite());

        // A Beta deviation beyond the support has tail exactly zero.
        let s = spec(ScalarRateKind::BetaHalf, 1.0);
        let rows = scalar_mdp_table(
            s,
            10.0,
            SpeedSchedule::power(0.5).unwrap(),
            &[4],
            MdpTableOptions::default(),
        )
        .unwrap();
        assert_eq!(rows[0].log_tail, f64::NEG_INFINITY);
        assert_eq!(rows[0].normalized_rate, f64::INFINITY);
    }

    #[test]
    fn moment_rate_frozen_examples() {
        let zero = MomentVector::new(vec![0.0; 5]).unwrap();
        assert_eq!(moment_rate(Ensemble::Gaussian, 2.0, &zero).unwrap(), 0.0);

        // m equal to the first column of D_k pulls back to y = e_1.
        for ensemble in Ensemble::ALL {
            let dk = dk_matrix(ensemble, 6).unwrap();
            let m: Vec<f64> = (1..=6).map(|i| dk.entry_f64(i, 1)).collect();
            let rate = moment_rate(ensemble, 2.0, &MomentVector::new(m).unwrap()).unwrap();
            assert!((rate - 0.5).abs() < 1e-12, "{ensemble}: {rate}");
        }
    }

    #[test]
    fn moment_rate_agrees_with_delta_method() {
        let m = MomentVector::new(vec![0.4, -0.3, 0.25, 0.6]).unwrap();
        for ensemble in Ensemble::ALL {
            let direct = moment_rate(ensemble, 1.7, &m).unwrap();
            let d = dk_matrix(ensemble, 4).unwrap().to_f64();
            let via_delta = delta_method_rate(1.7 / 4.0, &d, m.m()).unwrap();
            assert!(
                (direct - via_delta).abs() < 1e-12 * direct.max(1.0),
                "{ensemble}: {direct} vs {via_delta}"
            );
        }
    }

    #[test]
    fn measure_rate_parseval_and_atoms() {
        let beta = 2.0;
        let h = SignedMeasureRep::polynomial_density(
            ReferenceMeasure::Semicircle,
            vec![0.0, 1.0],
        )
        .unwrap();
        assert_eq!(measure_rate(beta, &h).unwrap(), 0.25 * beta);

        let atoms =
            SignedMeasureRep::discrete_signed(vec![1.0, -1.0], vec![0.5, -0.5]).unwrap();
        assert_eq!(measure_rate(beta, &atoms).unwrap(), f64::INFINITY);

        // Cancelling weights on one atom leave the zero measure behind.
        let zero = SignedMeasureRep::discrete_signed(vec![2.0, 2.0], vec![0.5, -0.5]).unwrap();
        assert_eq!(measure_rate(beta, &zero).unwrap(), 0.0);

        // Quadratic scaling in the density.
        let c = vec![0.3, -0.2, 0.5];
        let one =
            SignedMeasureRep::polynomial_density(ReferenceMeasure::Arcsine, c.clone()).unwrap();
        let three = SignedMeasureRep::polynomial_density(
            ReferenceMeasure::Arcsine,
            c.iter().map(|v| 3.0 * v).collect(),
        )
        .unwrap();
        let r1 = measure_rate(beta, &one).unwrap();
        let r3 = measure_rate(beta, &three).unwrap();
        assert!((r3 - 9.0 * r1).abs() < 1e-12 * r3);
    }

    /// (beta/4) integral h^2 d sigma by adaptive quadrature must match the
    /// Parseval value — an independent path through the density evaluation
    /// and the reference integrators.
    #[test]
    fn measure_rate_matches_direct_integration() {
        let beta = 1.3;
        let coeffs = vec![0.3, -0.2, 0.5, 0.1, -0.45, 0.2, 0.15, -0.05];
        for reference in [
            ReferenceMeasure::Semicircle,
            ReferenceMeasure::MarchenkoPastur,
            ReferenceMeasure::Arcsine,
        ] {
            let mu =
                SignedMeasureRep::polynomial_density(reference, coeffs.clone()).unwrap();
            let rate = measure_rate(beta, &mu).unwrap();
            let own = reference.recursion(coeffs.len() + 1).unwrap();
            let c = coeffs.clone();
            let integral = crate::measures::integrate_reference(reference, |x| {
                let h: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(d, cd)| cd * eval_orthonormal(&own, d + 1, x).unwrap())
                    .sum();
                h * h
            })
            .unwrap();
            let direct = 0.25 * beta * integral;
            assert!(
                (rate - direct).abs() < 1e-8,
                "{reference}: {rate} vs {direct}"
            );
        }
    }

    #[test]
    fn projections_recover_coefficients() {
        let beta = 2.0;
        let reference = ReferenceMeasure::MarchenkoPastur;
        let coeffs = vec![0.5, -0.25];
        let mu = SignedMeasureRep::polynomial_density(reference, coeffs.clone()).unwrap();
        let sigma = reference.recursion(8).unwrap();
        let partials = projection_partial_sums(beta, &mu, &sigma, 6).unwrap();
        // Nondecreasing, and saturated at (beta/4) ||c||^2 once K covers the
        // degree.
        for w in partials.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
        let expect = 0.25 * beta * (0.25 + 0.0625);
        assert!((partials[5] - expect).abs() < 1e-10);
        assert!((rate_via_projections(beta, &mu, &sigma, 6).unwrap() - expect).abs() < 1e-10);

        // A density starting at degree 2 projects to zero on p-hat_1.
        let high = SignedMeasureRep::polynomial_density(reference, vec![0.0, 1.0]).unwrap();
        let first = projection_partial_sums(beta, &high, &sigma, 1).unwrap();
        assert!(first[0].abs() < 1e-12);
    }

    #[test]
    fn projections_of_atoms_keep_growing() {
        // The two-atom signed measure is singular to the semicircle law, so
        // the projection sums diverge. Their exact staircase is periodic:
        // the orthonormal semicircle polynomials at the atoms +-1 are
        // sin((k+1) pi/3)/sin(pi/3), so even degrees and odd degrees
        // congruent to 5 mod 6 contribute nothing, and every other odd
        // degree adds (beta/4) * 1. Through K = 40 that is 14 contributions
        // of 1/2 at beta = 2.
        let beta = 2.0;
        let mu = SignedMeasureRep::discrete_signed(vec![1.0, -1.0], vec![0.5, -0.5]).unwrap();
        let sigma = ReferenceMeasure::Semicircle.recursion(41).unwrap();
        let partials = projection_partial_sums(beta, &mu, &sigma, 40).unwrap();
        for w in partials.windows(2) {
            assert!(w[1] >= w[0]);
        }
        // No plateau longer than the period: strict growth across every
        // window of six degrees.
        for i in 6..40 {
            assert!(
                partials[i] > partials[i - 6] + 0.4,
                "stalled at {i}: {} vs {}",
                partials[i],
                partials[i - 6]
            );
        }
        assert!((partials[39] - 7.0).abs() < 1e-9, "final {}", partials[39]);
    }

    #[test]
    fn consistency_triangle_on_a_polynomial_density() {
        // measure rate, moment rate of the signed moments, and the
        // projection sum all describe the same quadratic.
        let beta = 2.0;
        let coeffs = vec![0.4, -0.1, 0.3, 0.2];
        for (ensemble, reference) in [
            (Ensemble::Gaussian, ReferenceMeasure::Semicircle),
            (Ensemble::Laguerre, ReferenceMeasure::MarchenkoPastur),
            (Ensemble::Jacobi, ReferenceMeasure::Arcsine),
        ] {
            let mu = SignedMeasureRep::polynomial_density(reference, coeffs.clone()).unwrap();
            let via_measure = measure_rate(beta, &mu).unwrap();
            for k in [coeffs.len(), coeffs.len() + 2] {
                let m = mu.moments(k).unwrap();
                let via_moments = moment_rate(ensemble, beta, &m).unwrap();
                assert!(
                    (via_measure - via_moments).abs() < 1e-8,
                    "{ensemble} k={k}: {via_measure} vs {via_moments}"
                );
            }
            let sigma = reference.recursion(10).unwrap();
            let via_proj = rate_via_projections(beta, &mu, &sigma, 8).unwrap();
            assert!(
                (via_measure - via_proj).abs() < 1e-8,
                "{ensemble}: {via_measure} vs {via_proj}"
            );
        }
    }

    #[test]
    fn delta_method_branches() {
        // Identity constraint: the infimum is the squared norm itself.
        let eye = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let z = [0.3, -0.4, 1.2];
        let expect: f64 = z.iter().map(|v| v * v).sum();
        assert!((delta_method_rate(1.0, &eye, &z).unwrap() - expect).abs() < 1e-14);

        // The wide 1x2 reduction: weight alpha/2, row (1/4, -1/4) gives
        // 4 alpha z^2.
        let alpha = 1.5;
        let row = vec![vec![0.25, -0.25]];
        let z = [0.3];
        let got = delta_method_rate(0.5 * alpha, &row, &z).unwrap();
        assert!((got - 4.0 * alpha * 0.09).abs() < 1e-12, "{got}");

        // Quadratic in z.
        let doubled = delta_method_rate(0.5 * alpha, &row, &[0.6]).unwrap();
        assert!((doubled - 4.0 * got).abs() < 1e-12);

        // Degenerate shapes: zero diagonal, more rows than columns, and
        // linearly dependent rows in the wide branch.
        assert!(delta_method_rate(1.0, &[vec![1.0, 0.0], vec![0.0, 0.0]], &[1.0, 1.0]).is_err());
        assert!(delta_method_rate(1.0, &[vec![1.0], vec![2.0]], &[1.0, 2.0]).is_err());
        assert!(
            delta_method_rate(
                1.0,
                &[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]],
                &[1.0, 1.0]
            )
            .is_err(),
            "dependent rows must be rejected by the pseudoinverse branch"
        );
    }
}
