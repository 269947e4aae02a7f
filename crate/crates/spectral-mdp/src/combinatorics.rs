//! Exact lattice-path combinatorics and the covariance factors `D_k`.
//!
//! Everything in this module is integer or rational arithmetic. The counts
//! d(i,j) enumerate monotone paths from (i,j) to (0,0) inside the triangular
//! lattice {(i,j) : j >= i}; closed form d(i,j) = C(i+j,i) - C(i+j,i-1).
//! The lower-triangular matrices `D_k` factor the limiting covariance of
//! scaled moment fluctuations: `D_k D_k^T` reproduces the exact moment
//! covariance `m_{i+j} - m_i m_j` of the matching reference measure, which
//! `covariance_identity_error` checks entry by entry in rationals.
//!
//! Floating point appears only behind the explicit `entry_f64` / `to_f64`
//! conversions (the Jacobi factor carries an irrational 2^(-1/2) which is
//! kept symbolic until then).

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::measures::ReferenceMeasure;
use crate::{Ensemble, Error, Result};

/// Binomial coefficient with the convention C(n,k) = 0 for k < 0 or k > n.
pub(crate) fn binomial(n: u64, k: i64) -> BigInt {
    if k < 0 || k as u64 > n {
        return BigInt::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigInt::one();
    for t in 1..=k {
        // Exact at every step: the running product is C(n, t).
        acc = acc * BigInt::from(n - k + t) / BigInt::from(t);
    }
    acc
}

/// Generalized Catalan number d(i,j) = C(i+j,i) - C(i+j,i-1) for i <= j.
///
/// d(k,k) is the ordinary Catalan number; d(0,j) = 1.
pub fn gen_catalan(i: u64, j: u64) -> Result<BigUint> {
    if i > j {
        return Err(Error::Domain(format!(
            "gen_catalan requires i <= j, got i = {i}, j = {j}"
        )));
    }
    let d = binomial(i + j, i as i64) - binomial(i + j, i as i64 - 1);
    d.to_biguint()
        .ok_or_else(|| Error::Numeric("negative path count".into()))
}

/// Independent oracle for `gen_catalan`: dynamic program over the lattice
/// {(a,b) : b >= a}, counting up/left paths to the origin directly.
///
/// Scale-guarded (i + j <= 40); meant for cross-checks, not production use.
pub fn count_paths_dp(i: u64, j: u64) -> Result<BigUint> {
    if i > j {
        return Err(Error::Domain(format!(
            "count_paths_dp requires i <= j, got i = {i}, j = {j}"
        )));
    }
    if i + j > 40 {
        return Err(Error::Domain(format!(
            "count_paths_dp is an oracle capped at i + j <= 40, got {}",
            i + j
        )));
    }
    let (i, j) = (i as usize, j as usize);
    let mut table = vec![vec![BigUint::zero(); j + 1]; i + 1];
    table[0][0] = BigUint::one();
    for a in 0..=i {
        for b in a.max(1)..=j {
            // A step from (a,b) goes up to (a-1,b) or left to (a,b-1); the
            // left step is admissible only while b-1 >= a.
            let mut paths = BigUint::zero();
            if a >= 1 {
                paths += &table[a - 1][b];
            }
            if b >= 1 && b - 1 >= a {
                paths += &table[a][b - 1];
            }
            table[a][b] = paths;
        }
    }
    Ok(table[i][j].clone())
}

/// Residual of the path-crossing identity
/// sum_{r=0}^{min(i,j)} d(i-r, i+r) d(j-r, j+r) - d(i+j, i+j), which vanishes
/// identically (even-parity form). Returned exactly; 0 means the identity holds.
pub fn crossing_identity_error(i: u64, j: u64) -> Result<BigInt> {
    if i > j {
        return Err(Error::Domain(format!(
            "crossing_identity_error requires i <= j, got i = {i}, j = {j}"
        )));
    }
    if i + j > 20 {
        return Err(Error::Domain(format!(
            "crossing_identity_error is capped at i + j <= 20, got {}",
            i + j
        )));
    }
    let mut sum = BigInt::zero();
    for r in 0..=i {
        let left = BigInt::from(gen_catalan(i - r, i + r)?);
        let right = BigInt::from(gen_catalan(j - r, j + r)?);
        sum += left * right;
    }
    Ok(sum - BigInt::from(gen_catalan(i + j, i + j)?))
}

/// Residual of the odd-parity crossing identity
/// sum_{r=0}^{min(i*,j*)} d(i*-r, i*+1+r) d(j*-r, j*+1+r) - d(i*+j*+1, i*+j*+1)
/// where i* = (i-1)/2 indexes the odd moment 2i*+1. Vanishes identically.
pub fn crossing_identity_error_odd(i_star: u64, j_star: u64) -> Result<BigInt> {
    if i_star > j_star {
        return Err(Error::Domain(format!(
            "crossing_identity_error_odd requires i* <= j*, got i* = {i_star}, j* = {j_star}"
        )));
    }
    if i_star + j_star > 20 {
        return Err(Error::Domain(format!(
            "crossing_identity_error_odd is capped at i* + j* <= 20, got {}",
            i_star + j_star
        )));
    }
    let mut sum = BigInt::zero();
    for r in 0..=i_star {
        let left = BigInt::from(gen_catalan(i_star - r, i_star + 1 + r)?);
        let right = BigInt::from(gen_catalan(j_star - r, j_star + 1 + r)?);
        sum += left * right;
    }
    Ok(sum - BigInt::from(gen_catalan(i_star + j_star + 1, i_star + j_star + 1)?))
}

/// Lower-triangular covariance factor of order k, stored exactly.
///
/// Entries are rational; for the Jacobi ensemble every entry additionally
/// carries the common irrational factor 2^(-1/2), recorded in `sqrt_half`
/// and applied only by the explicit float conversions.
#[derive(Debug, Clone, PartialEq)]
pub struct DkMatrix {
    ensemble: Ensemble,
    order: usize,
    /// rows[i-1] holds the entries (i,1), ..., (i,i).
    rows: Vec<Vec<BigRational>>,
    sqrt_half: bool,
}

impl DkMatrix {
    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// True when every entry carries an extra factor 2^(-1/2) (Jacobi).
    pub fn sqrt_half(&self) -> bool {
        self.sqrt_half
    }

    /// Rational part of the entry (i,j), 1-based; zero above the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> BigRational {
        assert!(
            (1..=self.order).contains(&i) && (1..=self.order).contains(&j),
            "DkMatrix index ({i},{j}) out of range 1..={}",
            self.order
        );
        if j > i {
            BigRational::zero()
        } else {
            self.rows[i - 1][j - 1].clone()
        }
    }

    /// Entry (i,j) as a float, with the 2^(-1/2) factor applied when present.
    pub fn entry_f64(&self, i: usize, j: usize) -> f64 {
        let r = self.entry(i, j).to_f64().unwrap_or(f64::NAN);
        if self.sqrt_half {
            r * std::f64::consts::FRAC_1_SQRT_2
        } else {
            r
        }
    }

    /// Dense k x k float matrix (the only lossy conversion).
    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (1..=self.order)
            .map(|i| (1..=self.order).map(|j| self.entry_f64(i, j)).collect())
            .collect()
    }

    /// Exact Gram matrix D_k D_k^T. The squared Jacobi factor is the rational
    /// 1/2, so the product is rational for every ensemble.
    pub fn gram(&self) -> Vec<Vec<BigRational>> {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        (1..=self.order)
            .map(|i| {
                (1..=self.order)
                    .map(|j| {
                        let mut acc = BigRational::zero();
                        for r in 1..=i.min(j) {
                            acc += self.entry(i, r) * self.entry(j, r);
                        }
                        if self.sqrt_half {
                            acc * &half
                        } else {
                            acc
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// The order-k covariance factor for the given ensemble.
///
/// Gaussian: (i,j) = C(i,(i-j)/2) - C(i,(i-j)/2-1) when i+j is even, else 0.
/// Laguerre: (i,j) = C(2i,i-j) - C(2i,i-j-1) = d(i-j, i+j).
/// Jacobi:   (i,j) = 2^(-2i+1) * 2^(-1/2) * C(2i,i-j).
pub fn dk_matrix(ensemble: Ensemble, k: usize) -> Result<DkMatrix> {
    if k == 0 {
        return Err(Error::Domain("dk_matrix requires order k >= 1".into()));
    }
    let mut rows = Vec::with_capacity(k);
    for i in 1..=k {
        let mut row = Vec::with_capacity(i);
        for j in 1..=i {
            let entry = match ensemble {
                Ensemble::Gaussian => {
                    if (i + j) % 2 != 0 {
                        BigRational::zero()
                    } else {
                        let h = ((i - j) / 2) as i64;
                        BigRational::from_integer(
                            binomial(i as u64, h) - binomial(i as u64, h - 1),
                        )
                    }
                }
                Ensemble::Laguerre => BigRational::from_integer(
                    binomial(2 * i as u64, (i - j) as i64)
                        - binomial(2 * i as u64, (i - j) as i64 - 1),
                ),
                Ensemble::Jacobi => {
                    // Rational part only; the common 2^(-1/2) stays symbolic.
                    let scale = BigRational::new(BigInt::one(), BigInt::from(2).pow(2 * i as u32 - 1));
                    scale * BigRational::from_integer(binomial(2 * i as u64, (i - j) as i64))
                }
            };
            row.push(entry);
        }
        rows.push(row);
    }
    Ok(DkMatrix {
        ensemble,
        order: k,
        rows,
        sqrt_half: matches!(ensemble, Ensemble::Jacobi),
    })
}

/// Maximum absolute residual of the covariance identity
/// (D_k D_k^T)_{i,j} = m_{i+j}(sigma) - m_i(sigma) m_j(sigma)
/// over 1 <= i,j <= k, computed exactly against the reference moments of the
/// ensemble's limit measure. Mathematically zero.
pub fn covariance_identity_error(ensemble: Ensemble, k: usize) -> Result<BigRational> {
    let dk = dk_matrix(ensemble, k)?;
    let gram = dk.gram();
    let reference = ReferenceMeasure::for_ensemble(ensemble);
    let moments: Vec<BigRational> = (0..=2 * k)
        .map(|j| reference.moment_exact(j as u64))
        .collect();
    let mut worst = BigRational::zero();
    for i in 1..=k {
        for j in 1..=k {
            let expected = &moments[i + j] - &moments[i] * &moments[j];
            let residual = (&gram[i - 1][j - 1] - expected).abs();
            if residual > worst {
                worst = residual;
            }
        }
    }
    Ok(worst)
}
