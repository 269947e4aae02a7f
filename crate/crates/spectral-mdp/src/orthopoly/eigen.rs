//! Symmetric tridiagonal eigensolver specialized for spectral measures.
//!
//! Implicit-shift QL (derived from the Algol/EISPACK tql2 lineage) that
//! accumulates only the first row of the eigenvector matrix: the spectral
//! weights are the squared first components, so the full O(n^3) accumulation
//! is replaced by an O(n^2) sweep. All mutable state lives in a caller-owned
//! workspace, so concurrent decompositions never share buffers.

use crate::{Error, Result};

const MAX_QL_ITERATIONS: usize = 50;

/// Reusable scratch buffers for [`eigen_first_row`].
#[derive(Debug, Default, Clone)]
pub struct EigenWorkspace {
    d: Vec<f64>,
    e: Vec<f64>,
    q: Vec<f64>,
}

impl EigenWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, diag: &[f64], offdiag: &[f64]) {
        let n = diag.len();
        self.d.clear();
        self.d.extend_from_slice(diag);
        self.e.clear();
        self.e.extend_from_slice(offdiag);
        self.e.push(0.0);
        self.q.clear();
        self.q.resize(n, 0.0);
        self.q[0] = 1.0;
    }
}

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal, paired with the first components of the
/// corresponding orthonormal eigenvectors.
///
/// The squared first components sum to 1; they are exactly the weights of the
/// spectral measure attached to the matrix and the first coordinate vector.
pub fn eigen_first_row(
    diag: &[f64],
    offdiag: &[f64],
    ws: &mut EigenWorkspace,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::Domain("empty tridiagonal matrix".into()));
    }
    if offdiag.len() + 1 != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: offdiag.len() + 1,
        });
    }
    if n == 1 {
        return Ok((vec![diag[0]], vec![1.0]));
    }

    ws.reset(diag, offdiag);
    let EigenWorkspace { d, e, q } = ws;
    let eps = f64::EPSILON;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        // Find a negligible subdiagonal element; the threshold is machine
        // epsilon times the running matrix scale.
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NonConvergence {
                        what: "symmetric tridiagonal QL",
                        iterations: MAX_QL_ITERATIONS,
                    });
                }

                // Implicit shift.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // Implicit QL sweep from m-1 down to l.
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g2 = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g2;
                    d[i + 1] = h + s * (c * g2 + s * d[i]);

                    // Accumulate only row 0 of the eigenvector matrix.
                    h = q[i + 1];
                    q[i + 1] = s * q[i] + c * h;
                    q[i] = c * q[i] - s * h;
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Sort ascending, carrying the first components along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let first: Vec<f64> = order.iter().map(|&i| q[i]).collect();
    Ok((values, first))
}
