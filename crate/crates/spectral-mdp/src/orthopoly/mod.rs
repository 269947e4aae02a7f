//! Transformations between the equivalent parametrizations of a measure:
//! raw moments, three-term recursion coefficients, half-line decomposition
//! variables z, and canonical moments p — plus orthonormal polynomial
//! evaluation and Gauss quadrature from recursion coefficients.
//!
//! Conventions (monic recursion): p_{k+1}(x) = (x - b_{k+1}) p_k(x) - a_k p_{k-1}(x),
//! p_0 = 1, p_1 = x - b_1, with a_k > 0. The orthonormal polynomial of degree d
//! is p_d / sqrt(a_1 ... a_d). Half-line decomposition: b_k = z_{2k-2} + z_{2k-1},
//! a_k = z_{2k-1} z_{2k} with z_0 = 0; unit-interval decomposition
//! z_k = (1 - p_{k-1}) p_k with p_0 = 0.

mod eigen;

pub use eigen::{eigen_first_row, EigenWorkspace};

use num_rational::BigRational;

use crate::{Error, Result};

/// Depth guard for raw-moment inversion in floating point; deeper inversions
/// are ill-conditioned enough to lose most significant digits and must go
/// through [`coeffs_from_moments_unguarded`].
pub const MOMENT_INVERSION_GUARD: usize = 15;

/// Mandatory roundtrip residual tolerance for floating-point moment inversion.
const MOMENT_ROUNDTRIP_TOL: f64 = 1e-6;

/// Three-term recursion coefficients (b_1..b_m, a_1..a_l), a_k > 0.
///
/// `a` may be one entry shorter than `b` (the usual shape for a depth-m
/// parametrization) or equal/longer; emptiness of `b` is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionCoefficients {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl RecursionCoefficients {
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Domain(
                "recursion coefficients need at least b_1".into(),
            ));
        }
        if let Some(bad) = b.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("b[{}] is not finite", bad + 1)));
        }
        if let Some(bad) = a.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Domain(format!(
                "off-diagonal coefficient a[{}] = {} must be positive and finite",
                bad + 1,
                a[bad]
            )));
        }
        Ok(Self { b, a })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.b, self.a)
    }
}

/// Strictly positive decomposition variables z_1..z_m of a measure supported
/// on the half line.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionVariables {
    z: Vec<f64>,
}

impl RecursionVariables {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::Domain("empty z sequence".into()));
        }
        for (idx, &v) in z.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NotHalfLineSupported {
                    index: idx + 1,
                    value: v,
                });
            }
        }
        Ok(Self { z })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.z
    }
}

/// Canonical moments p_1..p_m in the open unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalMoments {
    p: Vec<f64>,
}

impl CanonicalMoments {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Domain("empty canonical moment sequence".into()));
        }
        for (idx, &v) in p.iter().enumerate() {
            if !(v.is_finite() && v > 0.0 && v < 1.0) {
                return Err(Error::NotUnitIntervalSupported {
                    index: idx + 1,
                    value: v,
                });
            }
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }
}

/// Raw moments m_1..m_k (the mass m_0 = 1 is implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    m: Vec<f64>,
}

impl MomentVector {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if let Some(bad) = m.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("m[{}] is not finite", bad + 1)));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.m
    }
}

/// b_k = z_{2k-2} + z_{2k-1}, a_k = z_{2k-1} z_{2k}: from m variables we get
/// ceil(m/2) diagonal and floor(m/2) off-diagonal coefficients.
pub fn coeffs_from_z(z: &RecursionVariables) -> RecursionCoefficients {
    let z = z.z();
    let m = z.len();
    let num_b = m.div_ceil(2);
    let num_a = m / 2;
    let mut b = Vec::with_capacity(num_b);
    let mut a = Vec::with_capacity(num_a);
    for k in 1..=num_b {
        let prev = if k == 1 { 0.0 } else { z[2 * k - 3] };
        b.push(prev + z[2 * k - 2]);
    }
    for k in 1..=num_a {
        a.push(z[2 * k - 2] * z[2 * k - 1]);
    }
    RecursionCoefficients { b, a }
}

/// Inverse of [`coeffs_from_z`]: z_1 = b_1, z_{2k} = a_k / z_{2k-1},
/// z_{2k+1} = b_{k+1} - z_{2k}. Succeeds exactly when every z_k is strictly
/// positive, i.e. when the coefficients belong to a measure supported on
/// [0, inf); the error names the first failing index.
pub fn z_from_coeffs(c: &RecursionCoefficients) -> Result<RecursionVariables> {
    let (b, a) = (c.b(), c.a());
    let mut z: Vec<f64> = Vec::with_capacity(2 * a.len().min(b.len() - 1) + 1);
    let check = |index: usize, value: f64| -> Result<f64> {
        if value.is_finite() && value > 0.0 {
            Ok(value)
        } else {
            Err(Error::NotHalfLineSupported { index, value })
        }
    };
    z.push(check(1, b[0])?);
    for k in 1..=a.len() {
        let even = check(2 * k, a[k - 1] / z[2 * k - 2])?;
        z.push(even);
        if k + 1 <= b.len() {
            let odd = check(2 * k + 1, b[k] - even)?;
            z.push(odd);
        }
    }
    RecursionVariables::new(z)
}

/// z_k = (1 - p_{k-1}) p_k with p_0 = 0.
pub fn z_from_canonical(p: &CanonicalMoments) -> RecursionVariables {
    let p = p.p();
    let mut z = Vec::with_capacity(p.len());
    let mut prev = 0.0;
    for &pk in p {
        z.push((1.0 - prev) * pk);
        prev = pk;
    }
    // Each factor lies in (0,1), so every z is in (0,1): the constructor
    // cannot fail on this path.
    RecursionVariables { z }
}

/// Inverse of [`z_from_canonical`]: p_k = z_k / (1 - p_{k-1}). Succeeds
/// exactly when every p_k stays inside (0,1), i.e. when the variables belong
/// to a measure supported on [0,1].
pub fn canonical_from_z(z: &RecursionVariables) -> Result<CanonicalMoments> {
    let mut p = Vec::with_capacity(z.z().len());
    let mut prev = 0.0f64;
    for (idx, &zk) in z.z().iter().enumerate() {
        let pk = zk / (1.0 - prev);
        if !(pk.is_finite() && pk > 0.0 && pk < 1.0) {
            return Err(Error::NotUnitIntervalSupported {
                index: idx + 1,
                value: pk,
            });
        }
        p.push(pk);
        prev = pk;
    }
    CanonicalMoments::new(p)
}

/// Generic transform kernels shared by the f64 and exact-rational paths.
pub(crate) mod xfer {
    use num_traits::Num;

    /// Moments m_1..m_k of the Jacobi operator with diagonal `b` and
    /// (monic-normalized) off-diagonal products `a`: m_j = (T^j)_{11}.
    ///
    /// Runs on the non-symmetric similarity of the operator (sub-diagonal a_i,
    /// super-diagonal 1), which leaves (T^j)_{11} unchanged and keeps the
    /// arithmetic in the coefficient field — no square roots. The active
    /// window never exceeds floor(k/2)+1 entries: a path of length j from the
    /// first basis vector back to itself cannot climb higher, so m_j depends
    /// only on b_1..b_ceil(j/2) and a_1..a_floor(j/2); later coefficients are
    /// never touched.
    pub fn moments_from_jacobi<T>(b: &[T], a: &[T], k: usize) -> Vec<T>
    where
        T: Clone + Num,
    {
        let window = (k / 2 + 1).min(a.len() + 1);
        let mut v = vec![T::zero(); window];
        let mut w = vec![T::zero(); window];
        v[0] = T::one();
        let mut out = Vec::with_capacity(k);
        let bval = |i: usize| -> T {
            if i < b.len() {
                b[i].clone()
            } else {
                T::zero()
            }
        };
        for _ in 1..=k {
            for i in 0..window {
                let mut acc = bval(i) * v[i].clone();
                if i > 0 {
                    acc = acc + a[i - 1].clone() * v[i - 1].clone();
                }
                if i + 1 < window {
                    acc = acc + v[i + 1].clone();
                }
                w[i] = acc;
            }
            std::mem::swap(&mut v, &mut w);
            out.push(v[0].clone());
        }
        out
    }

    /// Recursion coefficients from raw moments `mu` = (m_0, m_1, ..., m_L)
    /// via the bordered-Hankel (Chebyshev) recursion on the mixed inner
    /// products sigma_{j,l} = integral p_j(x) x^l. Returns ceil(L/2) diagonal
    /// and floor(L/2) off-diagonal coefficients, or the first order at which
    /// the Hankel form fails to be positive definite.
    pub fn jacobi_from_moments<T>(mu: &[T]) -> Result<(Vec<T>, Vec<T>), usize>
    where
        T: Clone + Num + PartialOrd,
    {
        let l_max = mu.len() - 1;
        let num_b = l_max.div_ceil(2);
        let num_a = l_max / 2;
        let mut b: Vec<T> = Vec::with_capacity(num_b);
        let mut a: Vec<T> = Vec::with_capacity(num_a);

        // Row 0 is the moment sequence itself.
        let mut prev: Vec<T> = Vec::new();
        let mut cur: Vec<T> = mu.to_vec();
        if !(cur[0] > T::zero()) {
            return Err(0);
        }
        b.push(cur[1].clone() / cur[0].clone());

        for j in 1..=num_a {
            // sigma_{j,l} = sigma_{j-1,l+1} - alpha_{j-1} sigma_{j-1,l}
            //               - beta_{j-1} sigma_{j-2,l},  valid for l = j..L-j.
            let alpha_prev = b[j - 1].clone();
            let lo = j;
            let hi = l_max - j;
            let mut next = vec![T::zero(); hi + 1];
            for l in lo..=hi {
                let mut val = cur[l + 1].clone() - alpha_prev.clone() * cur[l].clone();
                if j >= 2 {
                    let beta_prev = a[j - 2].clone();
                    val = val - beta_prev * prev[l].clone();
                }
                next[l] = val;
            }

            let denom = if j == 1 {
                cur[0].clone()
            } else {
                cur[j - 1].clone()
            };
            let beta_j = next[j].clone() / denom.clone();
            if !(beta_j > T::zero()) {
                return Err(j);
            }
            a.push(beta_j);

            if j + 1 <= hi {
                // alpha_j = sigma_{j,j+1}/sigma_{j,j} - sigma_{j-1,j}/sigma_{j-1,j-1}
                let alpha = next[j + 1].clone() / next[j].clone()
                    - cur[j].clone() / denom;
                b.push(alpha);
            }

            prev = std::mem::take(&mut cur);
            cur = next;
        }
        Ok((b, a))
    }
}

/// Moments m_1..m_k of the measure with the given recursion coefficients.
///
/// Requires ceil(k/2) diagonal and floor(k/2) off-diagonal coefficients
/// (exact bandwidth of (T^k)_{11}); extra coefficients never change the
/// result, bit for bit.
pub fn moments_from_coeffs(c: &RecursionCoefficients, k: usize) -> Result<MomentVector> {
    if k == 0 {
        return Ok(MomentVector { m: Vec::new() });
    }
    if c.b().len() < k.div_ceil(2) || c.a().len() < k / 2 {
        return Err(Error::Domain(format!(
            "moments up to order {k} need at least {} diagonal and {} off-diagonal coefficients, got {} and {}",
            k.div_ceil(2),
            k / 2,
            c.b().len(),
            c.a().len()
        )));
    }
    MomentVector::new(xfer::moments_from_jacobi(c.b(), c.a(), k))
}

/// Exact-rational counterpart of [`moments_from_coeffs`].
pub fn moments_from_coeffs_exact(
    b: &[BigRational],
    a: &[BigRational],
    k: usize,
) -> Result<Vec<BigRational>> {
    if b.len() < k.div_ceil(2) || a.len() < k / 2 {
        return Err(Error::Domain(format!(
            "moments up to order {k} need at least {} diagonal and {} off-diagonal coefficients, got {} and {}",
            k.div_ceil(2),
            k / 2,
            b.len(),
            a.len()
        )));
    }
    Ok(xfer::moments_from_jacobi(b, a, k))
}

/// Recursion coefficients ceil(k/2) deep from the moments m_1..m_k,
/// refusing depths beyond [`MOMENT_INVERSION_GUARD`].
///
/// The inversion runs the bordered-Hankel recursion in double precision and
/// always verifies itself by mapping the coefficients back to moments; a
/// roundtrip residual above 1e-6 (relative) is reported as a numeric error
/// rather than returned silently.
pub fn coeffs_from_moments(m: &MomentVector) -> Result<RecursionCoefficients> {
    if m.len() > MOMENT_INVERSION_GUARD {
        return Err(Error::ConditioningGuard {
            k: m.len(),
            limit: MOMENT_INVERSION_GUARD,
        });
    }
    coeffs_from_moments_unguarded(m)
}

/// [`coeffs_from_moments`] without the depth guard. The roundtrip residual
/// check still applies.
pub fn coeffs_from_moments_unguarded(m: &MomentVector) -> Result<RecursionCoefficients> {
    if m.is_empty() {
        return Err(Error::Domain("moment vector is empty".into()));
    }
    let mut mu = Vec::with_capacity(m.len() + 1);
    mu.push(1.0);
    mu.extend_from_slice(m.m());
    let (b, a) =
        xfer::jacobi_from_moments(&mu).map_err(|order| Error::NotMomentSequence { order })?;
    let coeffs = RecursionCoefficients::new(b, a)?;

    // Mandatory self-check: the recovered coefficients must reproduce the
    // input moments well inside the conditioning budget.
    let back = moments_from_coeffs(&coeffs, m.len())?;
    let mut scale = 1.0f64;
    for v in m.m() {
        scale = scale.max(v.abs());
    }
    for (orig, rec) in m.m().iter().zip(back.m()) {
        if (orig - rec).abs() > MOMENT_ROUNDTRIP_TOL * scale {
            return Err(Error::Numeric(format!(
                "moment inversion roundtrip residual {} exceeds {MOMENT_ROUNDTRIP_TOL} (relative)",
                (orig - rec).abs() / scale
            )));
        }
    }
    Ok(coeffs)
}

/// Exact-rational counterpart of [`coeffs_from_moments`]: no depth guard and
/// no residual check (the recursion is exact), only the positive-definiteness
/// errors remain. Input is m_1..m_k with m_0 = 1 implicit.
pub fn coeffs_from_moments_exact(
    m: &[BigRational],
) -> Result<(Vec<BigRational>, Vec<BigRational>)> {
    if m.is_empty() {
        return Err(Error::Domain("moment vector is empty".into()));
    }
    let mut mu = Vec::with_capacity(m.len() + 1);
    mu.push(BigRational::from_integer(1.into()));
    mu.extend_from_slice(m);
    xfer::jacobi_from_moments(&mu).map_err(|order| Error::NotMomentSequence { order })
}

/// Orthonormal polynomial of the given degree evaluated at x, using the
/// orthonormal three-term recursion (equivalent to the monic recursion
/// followed by division by sqrt(a_1...a_d), but stable at high degree).
pub fn eval_orthonormal(c: &RecursionCoefficients, degree: usize, x: f64) -> Result<f64> {
    if degree == 0 {
        return Ok(1.0);
    }
    if c.b().len() < degree || c.a().len() < degree {
        return Err(Error::Domain(format!(
            "orthonormal evaluation at degree {degree} needs {degree} diagonal and off-diagonal coefficients, got {} and {}",
            c.b().len(),
            c.a().len()
        )));
    }
    let b = c.b();
    let sqrt_a: Vec<f64> = c.a()[..degree].iter().map(|v| v.sqrt()).collect();
    let mut pm1 = 0.0f64; // degree -1
    let mut p = 1.0f64; // degree 0
    for d in 0..degree {
        let next = ((x - b[d]) * p - if d > 0 { sqrt_a[d - 1] * pm1 } else { 0.0 }) / sqrt_a[d];
        pm1 = p;
        p = next;
    }
    Ok(p)
}

/// Norm sqrt(a_1...a_d) of the monic polynomial of degree d, robust against
/// under/overflow of the raw product.
fn monic_norm(a: &[f64], d: usize) -> f64 {
    let mut prod = 1.0f64;
    let mut in_range = true;
    for v in &a[..d] {
        prod *= v;
        if !(1e-280..=1e280).contains(&prod) {
            in_range = false;
            break;
        }
    }
    if in_range {
        prod.sqrt()
    } else {
        // Log-space fallback for extreme depths.
        let log_sum: f64 = a[..d].iter().map(|v| v.ln()).sum();
        (0.5 * log_sum).exp()
    }
}

/// Monomial coefficients of the orthonormal polynomials up to degree k.
///
/// Row i (1-based, i = 1..k) holds the coefficients of the orthonormal
/// polynomial of degree i in the monomial basis: column 0 is the constant
/// term, column j the coefficient of x^j, padded with zeros to width k+1.
pub fn orthonormal_monomial_coeffs(
    c: &RecursionCoefficients,
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Domain("coefficient table needs k >= 1".into()));
    }
    if c.b().len() < k || c.a().len() < k {
        return Err(Error::Domain(format!(
            "coefficient table of depth {k} needs {k} diagonal and off-diagonal coefficients, got {} and {}",
            c.b().len(),
            c.a().len()
        )));
    }
    let b = c.b();
    let a = c.a();
    // Monic coefficient recursion: P_{d+1} = shift(P_d) - b_{d+1} P_d - a_d P_{d-1}.
    let mut rows = Vec::with_capacity(k);
    let mut prev = vec![0.0f64; k + 1]; // degree -1: zero polynomial
    let mut cur = vec![0.0f64; k + 1]; // degree 0: constant 1
    cur[0] = 1.0;
    for d in 0..k {
        let mut next = vec![0.0f64; k + 1];
        for j in 0..=d {
            next[j + 1] += cur[j];
            next[j] -= b[d] * cur[j];
            if d > 0 {
                next[j] -= a[d - 1] * prev[j];
            }
        }
        // prev has degree d-1 < d, so the loop above covers all its entries
        // except when d = 0 (no prev term at all).
        prev = std::mem::replace(&mut cur, next);
        rows.push(cur.clone());
    }
    // Normalize monic rows to orthonormal ones.
    for (d, row) in rows.iter_mut().enumerate() {
        let norm = monic_norm(a, d + 1);
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
    Ok(rows)
}

/// Gauss quadrature rule with `nodes` points for the probability measure with
/// the given recursion coefficients: nodes ascending, weights positive and
/// summing to 1 (squared first eigenvector components).
pub fn gauss_quadrature(c: &RecursionCoefficients, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ws = EigenWorkspace::new();
    gauss_quadrature_with(c, nodes, &mut ws)
}

/// [`gauss_quadrature`] reusing a caller-owned eigensolver workspace.
pub fn gauss_quadrature_with(
    c: &RecursionCoefficients,
    nodes: usize,
    ws: &mut EigenWorkspace,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if nodes == 0 {
        return Err(Error::Domain("quadrature needs at least one node".into()));
    }
    if c.b().len() < nodes || c.a().len() + 1 < nodes {
        return Err(Error::Domain(format!(
            "a {nodes}-point rule needs {nodes} diagonal and {} off-diagonal coefficients, got {} and {}",
            nodes - 1,
            c.b().len(),
            c.a().len()
        )));
    }
    let diag = &c.b()[..nodes];
    let offdiag: Vec<f64> = c.a()[..nodes - 1].iter().map(|v| v.sqrt()).collect();
    let (values, first) = eigen_first_row(diag, &offdiag, ws)?;
    let weights: Vec<f64> = first.iter().map(|q| q * q).collect();
    Ok((values, weights))
}
