//! Log-space tail probabilities for the normal, gamma, and beta families.
//!
//! Deviation probabilities along a moderate-deviation schedule decay like
//! exp(-a_n I(x)) and underflow f64 almost immediately, so every tail here is
//! computed and returned as a natural logarithm. Linear-space results (and
//! the statrs implementations used as test oracles) only cover the regime
//! where the probability itself is representable.
//!
//! Internally the incomplete gamma/beta prefactors are evaluated through a
//! Stirling split so that ln(x^a e^-x / GAMMA(a)) and its beta analogue are
//! formed from small, well-scaled pieces instead of differences of huge ones.

use crate::{Error, Result};

const LENTZ_FPMIN: f64 = 1e-300;
const LENTZ_EPS: f64 = 1e-15;
const LENTZ_MAX_ITER: usize = 200_000;

/// ln(e^x + e^y) without overflow; -inf acts as the identity.
pub fn logaddexp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// d - ln(1 + d), the nonnegative remainder of the logarithm's linearization.
/// Direct evaluation cancels for small d, so a series takes over there.
pub fn ln1p_minus(d: f64) -> f64 {
    if d <= -1.0 {
        return f64::INFINITY;
    }
    if d.abs() > 0.1 {
        return d - d.ln_1p();
    }
    // d - ln(1+d) = d^2/2 - d^3/3 + d^4/4 - ... ; |d| <= 0.1 needs few terms.
    let mut term = d * d;
    let mut sum = 0.0;
    for k in 2..=24 {
        let contrib = term / k as f64;
        sum += if k % 2 == 0 { contrib } else { -contrib };
        term *= d;
        if term.abs() < f64::EPSILON * sum.abs() {
            break;
        }
    }
    sum
}

/// Stirling-series remainder J(a) = ln GAMMA(a) - [(a-1/2) ln a - a + ln(2 pi)/2].
pub fn stirling_correction(a: f64) -> f64 {
    const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;
    if a < 10.0 {
        return statrs::function::gamma::ln_gamma(a) - (a - 0.5) * a.ln() + a - LN_SQRT_2PI;
    }
    // Asymptotic series in 1/a^2; the smallest neglected term at a = 10 is
    // below 1e-14 of the leading one.
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        + inv2 * (-1.0 / 360.0
            + inv2 * (1.0 / 1260.0 + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0)))))
}

/// ln P(Z > z) for standard normal Z. Uses erfc up to the point where it
/// still carries full precision, then the divergent-but-alternating tail
/// series phi(z)/z * (1 - 1/z^2 + 3/z^4 - ...).
pub fn ln_normal_upper(z: f64) -> f64 {
    use std::f64::consts::{PI, SQRT_2};
    if z <= 30.0 {
        return (0.5 * statrs::function::erf::erfc(z / SQRT_2)).ln();
    }
    let z2 = z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=12u32 {
        term *= -((2 * k - 1) as f64) / z2;
        sum += term;
    }
    -0.5 * z2 - (z * (2.0 * PI).sqrt()).ln() + sum.ln()
}

/// ln(1 - e^l) for l <= 0; loses the complement (returns -inf) once e^l
/// rounds to 1, which only happens when the other tail is the tiny one.
fn ln_1m_exp(l: f64) -> f64 {
    if l >= 0.0 {
        return f64::NEG_INFINITY;
    }
    if l > -std::f64::consts::LN_2 {
        (-l.exp_m1()).ln()
    } else {
        (-l.exp()).ln_1p()
    }
}

/// ln(x^a e^-x / GAMMA(a)) via the Stirling split: -a*(d - ln(1+d)) with
/// d = (x-a)/a, plus ln(a/2pi)/2 - J(a).
fn ln_gamma_prefactor(a: f64, x: f64) -> f64 {
    use std::f64::consts::PI;
    let delta = (x - a) / a;
    -a * ln1p_minus(delta) + 0.5 * (a / (2.0 * PI)).ln() - stirling_correction(a)
}

/// ln of the lower series sum: P(a,x) = prefactor * sum_{n>=0} x^n / (a...(a+n)).
fn ln_gamma_series(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..LENTZ_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * LENTZ_EPS {
            return Ok(sum.ln());
        }
    }
    Err(Error::NonConvergence {
        what: "regularized incomplete gamma series",
        iterations: LENTZ_MAX_ITER,
    })
}

/// ln of the upper continued fraction: Q(a,x) = prefactor * cf.
fn ln_gamma_cf(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / LENTZ_FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=LENTZ_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < LENTZ_FPMIN {
            d = LENTZ_FPMIN;
        }
        c = b + an / c;
        if c.abs() < LENTZ_FPMIN {
            c = LENTZ_FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < LENTZ_EPS {
            return Ok(h.ln());
        }
    }
    Err(Error::NonConvergence {
        what: "regularized incomplete gamma continued fraction",
        iterations: LENTZ_MAX_ITER,
    })
}

fn ln_gamma_reg_pair(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("gamma shape {a} must be positive")));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain(format!("gamma argument {x} must be nonnegative")));
    }
    if x == 0.0 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    if x < a + 1.0 {
        let lp = ln_gamma_prefactor(a, x) + ln_gamma_series(a, x)?;
        Ok((lp, ln_1m_exp(lp)))
    } else {
        let lq = ln_gamma_prefactor(a, x) + ln_gamma_cf(a, x)?;
        Ok((ln_1m_exp(lq), lq))
    }
}

/// ln P(a, x): log of the regularized lower incomplete gamma function,
/// i.e. ln P(Y <= x) for Y ~ Gamma(shape a, scale 1).
pub fn ln_gamma_lower_reg(a: f64, x: f64) -> Result<f64> {
    Ok(ln_gamma_reg_pair(a, x)?.0)
}

/// ln Q(a, x) = ln(1 - P(a, x)), the upper tail.
pub fn ln_gamma_upper_reg(a: f64, x: f64) -> Result<f64> {
    Ok(ln_gamma_reg_pair(a, x)?.1)
}

/// ln(x^a (1-x)^b / B(a,b)) with every large term paired against its
/// Stirling mate: the linear parts of a*ln(x/(a/s)) + b*ln((1-x)/(b/s))
/// cancel algebraically and are dropped rather than subtracted numerically.
fn ln_beta_prefactor(a: f64, b: f64, x: f64) -> f64 {
    use std::f64::consts::PI;
    let s = a + b;
    let t = x - a / s;
    let u = t * s / a;
    let v = -t * s / b;
    0.5 * (a * b / (2.0 * PI * s)).ln() - stirling_correction(a) - stirling_correction(b)
        + stirling_correction(s)
        - a * ln1p_minus(u)
        - b * ln1p_minus(v)
}

/// ln of the Lentz continued fraction for the regularized incomplete beta;
/// valid (and used) only below the split point x < (a+1)/(a+b+2).
fn ln_beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < LENTZ_FPMIN {
        d = LENTZ_FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=LENTZ_MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < LENTZ_FPMIN {
            d = LENTZ_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < LENTZ_FPMIN {
            c = LENTZ_FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < LENTZ_FPMIN {
            d = LENTZ_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < LENTZ_FPMIN {
            c = LENTZ_FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < LENTZ_EPS {
            return Ok(h.ln());
        }
    }
    Err(Error::NonConvergence {
        what: "regularized incomplete beta continued fraction",
        iterations: LENTZ_MAX_ITER,
    })
}

fn ln_beta_reg_pair(a: f64, b: f64, x: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
        return Err(Error::Domain(format!(
            "beta shapes ({a}, {b}) must be positive"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("beta argument {x} must lie in [0, 1]")));
    }
    if x == 0.0 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    if x == 1.0 {
        return Ok((0.0, f64::NEG_INFINITY));
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        let lp = ln_beta_prefactor(a, b, x) + ln_beta_cf(a, b, x)? - a.ln();
        Ok((lp, ln_1m_exp(lp)))
    } else {
        let lq = ln_beta_prefactor(b, a, 1.0 - x) + ln_beta_cf(b, a, 1.0 - x)? - b.ln();
        Ok((ln_1m_exp(lq), lq))
    }
}

/// ln I_x(a, b): log of the regularized incomplete beta function, i.e.
/// ln P(X <= x) for X ~ Beta(a, b). Precision is tuned for x away from the
/// support endpoints (the tails that matter are reached through a and b).
pub fn ln_beta_lower_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    Ok(ln_beta_reg_pair(a, b, x)?.0)
}

/// ln(1 - I_x(a, b)), the upper tail of Beta(a, b).
pub fn ln_beta_upper_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    Ok(ln_beta_reg_pair(a, b, x)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta_reg;
    use statrs::function::gamma::{gamma_lr, gamma_ur};

    /// ln(e^p - e^q) for p > q, used by the recurrence-identity oracles.
    fn logsubexp(p: f64, q: f64) -> f64 {
        assert!(p > q);
        p + ln_1m_exp(q - p)
    }

    #[test]
    fn logaddexp_basics() {
        assert!((logaddexp(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(logaddexp(f64::NEG_INFINITY, -3.0), -3.0);
        assert_eq!(logaddexp(-3.0, f64::NEG_INFINITY), -3.0);
        // 1e-400-scale inputs: exact in log space.
        let l = logaddexp(-1000.0, -1000.0);
        assert!((l - (-1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        // Strongly dominated sum.
        assert!((logaddexp(0.0, -50.0) - (-50.0f64).exp().ln_1p()).abs() < 1e-18);
    }

    #[test]
    fn ln1p_minus_accuracy() {
        // Large argument: direct formula territory.
        let d = 0.75;
        assert!((ln1p_minus(d) - (d - d.ln_1p())).abs() < 1e-16);
        // Small argument: compare with the leading series terms (the
        // truncated reference itself is only accurate to O(d^3) relatively).
        let d = 1e-8;
        let expect = d * d / 2.0 - d * d * d / 3.0;
        assert!((ln1p_minus(d) - expect).abs() < 1e-12 * expect);
        // Negative small argument.
        let d = -1e-4;
        let expect = d * d / 2.0 - d * d * d / 3.0 + d * d * d * d / 4.0;
        assert!((ln1p_minus(d) - expect).abs() < 1e-12 * expect);
        // Boundary behavior.
        assert_eq!(ln1p_minus(-1.0), f64::INFINITY);
        assert_eq!(ln1p_minus(0.0), 0.0);
    }

    #[test]
    fn stirling_correction_branches_agree() {
        // The series (a >= 10) and the ln_gamma fallback (a < 10) must agree
        // where they meet. The fallback subtracts terms of size a*ln(a), so
        // its own error grows with a; the tolerance tracks that.
        const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;
        for a in [10.0, 12.5, 20.0, 100.0, 1e4] {
            let direct =
                statrs::function::gamma::ln_gamma(a) - (a - 0.5) * a.ln() + a - LN_SQRT_2PI;
            let series = stirling_correction(a);
            assert!(
                (direct - series).abs() < 4e-15 * a * a.ln() + 1e-14,
                "a = {a}: {direct} vs {series}"
            );
        }
        // J decreases roughly like 1/(12a).
        assert!((stirling_correction(1e6) - 1.0 / 12e6).abs() < 1e-18);
    }

    #[test]
    fn normal_tail_values() {
        assert!((ln_normal_upper(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // Moderate z against the erfc oracle (same route, sanity only).
        let direct = (0.5 * statrs::function::erf::erfc(1.0 / std::f64::consts::SQRT_2)).ln();
        assert_eq!(ln_normal_upper(1.0), direct);
        // Left side: probability near 1.
        assert!(ln_normal_upper(-8.0).abs() < 1e-14);
        // Crossover consistency: erfc and the asymptotic series must agree
        // where both are accurate.
        for z in [25.0, 28.0, 30.0] {
            let erfc_route = (0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)).ln();
            let z2 = z * z;
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..=12u32 {
                term *= -((2 * k - 1) as f64) / z2;
                sum += term;
            }
            let series_route = -0.5 * z2 - (z * (2.0 * std::f64::consts::PI).sqrt()).ln() + sum.ln();
            assert!(
                ((erfc_route - series_route) / series_route).abs() < 1e-13,
                "z = {z}: {erfc_route} vs {series_route}"
            );
        }
        // Monotone decreasing through the crossover.
        let mut prev = ln_normal_upper(20.0);
        for i in 21..=60 {
            let cur = ln_normal_upper(i as f64);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn gamma_tails_match_linear_oracle() {
        for a in [0.5, 3.0, 10.0, 100.0, 2500.0] {
            for frac in [0.2, 0.8, 1.0, 1.3, 3.0] {
                let x = a * frac;
                let p = gamma_lr(a, x);
                let q = gamma_ur(a, x);
                if p > 1e-280 {
                    let lp = ln_gamma_lower_reg(a, x).unwrap();
                    assert!(
                        (lp - p.ln()).abs() < 1e-10 * p.ln().abs().max(1.0),
                        "P(a={a}, x={x}): {lp} vs {}",
                        p.ln()
                    );
                }
                if q > 1e-280 {
                    let lq = ln_gamma_upper_reg(a, x).unwrap();
                    assert!(
                        (lq - q.ln()).abs() < 1e-10 * q.ln().abs().max(1.0),
                        "Q(a={a}, x={x}): {lq} vs {}",
                        q.ln()
                    );
                }
            }
        }
    }

    #[test]
    fn gamma_recurrence_identity_deep_tail() {
        // Q(a+1, x) = Q(a, x) + x^a e^-x / GAMMA(a+1), stated in logs:
        // an oracle that exercises prefactor and continued fraction far
        // beyond linear-space underflow (the tails here are ~ e^-900).
        for (a, lambda) in [(2.0e5, 1.1), (5.0e5, 1.05), (1.0e6, 1.03)] {
            let x = a * lambda;
            let lq_a = ln_gamma_upper_reg(a, x).unwrap();
            let lq_a1 = ln_gamma_upper_reg(a + 1.0, x).unwrap();
            let l_term = ln_gamma_prefactor(a, x) - a.ln();
            let rhs = logaddexp(lq_a, l_term);
            assert!(
                ((lq_a1 - rhs) / rhs).abs() < 1e-11,
                "a={a}, x={x}: {lq_a1} vs {rhs}"
            );
            // And the tail really is deep (e^-440 .. e^-940 across the cases).
            assert!(lq_a < -400.0);
        }
    }

    #[test]
    fn gamma_lower_deep_tail_identity() {
        // P(a, x) for x well below a, same recurrence read the other way:
        // P(a, x) = P(a+1, x) + x^a e^-x / GAMMA(a+1).
        for (a, lambda) in [(2.0e5, 0.9), (1.0e6, 0.95)] {
            let x = a * lambda;
            let lp_a = ln_gamma_lower_reg(a, x).unwrap();
            let lp_a1 = ln_gamma_lower_reg(a + 1.0, x).unwrap();
            let l_term = ln_gamma_prefactor(a, x) - a.ln();
            let rhs = logaddexp(lp_a1, l_term);
            assert!(
                ((lp_a - rhs) / rhs).abs() < 1e-11,
                "a={a}, x={x}: {lp_a} vs {rhs}"
            );
            assert!(lp_a < -700.0);
        }
    }

    #[test]
    fn gamma_edge_cases() {
        assert_eq!(ln_gamma_lower_reg(3.0, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(ln_gamma_upper_reg(3.0, 0.0).unwrap(), 0.0);
        assert!(ln_gamma_lower_reg(-1.0, 2.0).is_err());
        assert!(ln_gamma_lower_reg(1.0, -2.0).is_err());
        assert!(ln_gamma_lower_reg(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn beta_tails_match_linear_oracle() {
        for (a, b) in [(0.5, 1.5), (2.0, 3.0), (40.0, 60.0), (500.0, 500.0)] {
            for x in [0.05, 0.3, 0.5, 0.7, 0.95] {
                let p = beta_reg(a, b, x);
                // Upper-tail oracle through the reflection I_{1-x}(b,a), which
                // the linear-space routine computes directly — forming 1 - p
                // would wipe out a tiny complement.
                let q = beta_reg(b, a, 1.0 - x);
                if p > 1e-280 {
                    let lp = ln_beta_lower_reg(a, b, x).unwrap();
                    assert!(
                        (lp - p.ln()).abs() < 1e-9 * p.ln().abs().max(1.0),
                        "I(a={a}, b={b}, x={x}): {lp} vs {}",
                        p.ln()
                    );
                }
                if q > 1e-280 {
                    let lq = ln_beta_upper_reg(a, b, x).unwrap();
                    assert!(
                        (lq - q.ln()).abs() < 1e-9 * q.ln().abs().max(1.0) + 1e-13,
                        "1-I(a={a}, b={b}, x={x}): {lq} vs {}",
                        q.ln()
                    );
                }
            }
        }
    }

    #[test]
    fn beta_symmetry() {
        // I_x(a,b) = 1 - I_{1-x}(b,a): the two public tails must agree with
        // each other across the reflection.
        for (a, b, x) in [(3.0, 7.0, 0.2), (1e5, 1.2e5, 0.48), (2e5, 2e5, 0.53)] {
            let lower = ln_beta_lower_reg(a, b, x).unwrap();
            let upper_reflected = ln_beta_upper_reg(b, a, 1.0 - x).unwrap();
            assert!(
                ((lower - upper_reflected) / lower).abs() < 1e-12,
                "(a={a}, b={b}, x={x}): {lower} vs {upper_reflected}"
            );
        }
    }

    #[test]
    fn beta_recurrence_identity_deep_tail() {
        // I_x(a+1, b) = I_x(a, b) - x^a (1-x)^b / (a B(a,b)); in logs with
        // tails around e^-1000, far beyond linear-space reach.
        for (a, b, x) in [(5.0e5, 5.0e5, 0.47), (2.0e5, 3.0e5, 0.37)] {
            let lp_a = ln_beta_lower_reg(a, b, x).unwrap();
            let lp_a1 = ln_beta_lower_reg(a + 1.0, b, x).unwrap();
            let l_term = ln_beta_prefactor(a, b, x) - a.ln();
            let lhs = lp_a;
            let rhs = logaddexp(lp_a1, l_term);
            assert!(
                ((lhs - rhs) / rhs).abs() < 1e-11,
                "a={a}, b={b}, x={x}: {lhs} vs {rhs}"
            );
            assert!(lp_a < -700.0, "tail not deep: {lp_a}");
            // The subtraction form agrees too.
            let diff = logsubexp(lp_a, l_term);
            assert!(((lp_a1 - diff) / diff).abs() < 1e-9);
        }
    }

    #[test]
    fn beta_edge_cases() {
        assert_eq!(ln_beta_lower_reg(2.0, 3.0, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(ln_beta_lower_reg(2.0, 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(ln_beta_upper_reg(2.0, 3.0, 1.0).unwrap(), f64::NEG_INFINITY);
        assert!(ln_beta_lower_reg(0.0, 3.0, 0.5).is_err());
        assert!(ln_beta_lower_reg(2.0, 3.0, 1.5).is_err());
    }
}
