//! Exercises the C entry points from Rust: status codes, out-pointer
//! discipline, buffer capacity checks, and agreement with the core library.

use std::ffi::c_char;
use std::ptr;

use spectral_mdp::combinatorics::dk_matrix;
use spectral_mdp::ensembles::{
    moment_vector, sample_tridiagonal, spectral_measure, EnsembleSpec, RngState,
};
use spectral_mdp_ffi::*;

/// Fetches the thread's last error message as a String.
fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let len = smdp_last_error(buf.as_mut_ptr(), buf.len());
    assert!(len < buf.len(), "error message unexpectedly long");
    let bytes: Vec<u8> = buf[..len].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).expect("error messages are UTF-8")
}

fn gaussian_spec(n: usize, beta: f64) -> *mut SmdpSpec {
    let mut spec = ptr::null_mut();
    assert_eq!(smdp_spec_gaussian(n, beta, &mut spec), SmdpStatus::Ok);
    assert!(!spec.is_null());
    spec
}

#[test]
fn spec_creation_validates_parameters() {
    let spec = gaussian_spec(10, 2.0);
    smdp_spec_free(spec);

    // Shape out of domain: status + retrievable message.
    let mut spec = ptr::null_mut();
    assert_eq!(
        smdp_spec_laguerre(10, 2.0, -2.0, &mut spec),
        SmdpStatus::Domain
    );
    assert!(spec.is_null(), "out pointer must stay untouched on error");
    let msg = last_error();
    assert!(msg.contains("gamma"), "message should name the parameter: {msg}");

    // Null out pointer.
    assert_eq!(
        smdp_spec_gaussian(10, 2.0, ptr::null_mut()),
        SmdpStatus::NullArgument
    );

    // Frees tolerate null.
    smdp_spec_free(ptr::null_mut());
    smdp_measure_free(ptr::null_mut());
}

#[test]
fn sampling_is_deterministic_and_matches_the_library() {
    let mut spec = ptr::null_mut();
    assert_eq!(
        smdp_spec_jacobi(12, 2.0, 0.5, 0.25, &mut spec),
        SmdpStatus::Ok
    );

    let draw = |seed, stream| {
        let mut measure = ptr::null_mut();
        assert_eq!(smdp_sample(spec, seed, stream, &mut measure), SmdpStatus::Ok);
        let mut len = 0usize;
        assert_eq!(smdp_measure_len(measure, &mut len), SmdpStatus::Ok);
        assert_eq!(len, 12);
        let mut atoms = vec![0.0; len];
        let mut weights = vec![0.0; len];
        assert_eq!(
            smdp_measure_atoms(measure, atoms.as_mut_ptr(), len),
            SmdpStatus::Ok
        );
        assert_eq!(
            smdp_measure_weights(measure, weights.as_mut_ptr(), len),
            SmdpStatus::Ok
        );
        smdp_measure_free(measure);
        (atoms, weights)
    };

    let (atoms_a, weights_a) = draw(41, 7);
    let (atoms_b, weights_b) = draw(41, 7);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&atoms_a), bits(&atoms_b));
    assert_eq!(bits(&weights_a), bits(&weights_b));

    // Same bytes as driving the library directly.
    let core_spec = EnsembleSpec::jacobi(12, 2.0, 0.5, 0.25).unwrap();
    let tri = sample_tridiagonal(core_spec, RngState { seed: 41, stream: 7 }).unwrap();
    let mu = spectral_measure(&tri).unwrap();
    assert_eq!(bits(&atoms_a), bits(mu.atoms()));
    assert_eq!(bits(&weights_a), bits(mu.weights()));

    smdp_spec_free(spec);
}

#[test]
fn sample_moments_matches_the_counting_recursion() {
    let mut spec = ptr::null_mut();
    assert_eq!(
        smdp_spec_laguerre(10, 1.0, 0.0, &mut spec),
        SmdpStatus::Ok
    );
    let mut m = vec![0.0; 6];
    assert_eq!(
        smdp_sample_moments(spec, 6, 123, 0, m.as_mut_ptr(), m.len()),
        SmdpStatus::Ok
    );

    let core_spec = EnsembleSpec::laguerre(10, 1.0, 0.0).unwrap();
    let tri = sample_tridiagonal(core_spec, RngState { seed: 123, stream: 0 }).unwrap();
    let want = moment_vector(&tri, 6).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&m), bits(want.m()));

    smdp_spec_free(spec);
}

#[test]
fn undersized_buffers_are_refused_without_partial_writes() {
    let spec = gaussian_spec(8, 2.0);
    let mut measure = ptr::null_mut();
    assert_eq!(smdp_sample(spec, 3, 0, &mut measure), SmdpStatus::Ok);

    let sentinel = -999.0;
    let mut atoms = vec![sentinel; 7]; // needs 8
    assert_eq!(
        smdp_measure_atoms(measure, atoms.as_mut_ptr(), atoms.len()),
        SmdpStatus::BufferTooSmall
    );
    assert!(atoms.iter().all(|&x| x == sentinel), "no partial write");
    assert!(last_error().contains("atoms"));

    // Moments through the handle agree with a fresh full-capacity read.
    let mut m = vec![0.0; 4];
    assert_eq!(
        smdp_measure_moments(measure, 4, m.as_mut_ptr(), m.len()),
        SmdpStatus::Ok
    );
    let mut full = vec![0.0; 8];
    assert_eq!(
        smdp_measure_atoms(measure, full.as_mut_ptr(), full.len()),
        SmdpStatus::Ok
    );
    let mut weights = vec![0.0; 8];
    assert_eq!(
        smdp_measure_weights(measure, weights.as_mut_ptr(), weights.len()),
        SmdpStatus::Ok
    );
    let direct: f64 = full
        .iter()
        .zip(&weights)
        .map(|(x, w)| w * x.powi(2))
        .sum();
    assert!((m[1] - direct).abs() <= 1e-15 * direct.abs().max(1.0));

    smdp_measure_free(measure);
    smdp_spec_free(spec);
}

#[test]
fn covariance_buffers_are_filled_row_major() {
    let spec = gaussian_spec(6, 2.0);
    let k = 3;
    let mut cov = vec![0.0; k * k];
    let mut se = vec![0.0; k * k];
    assert_eq!(
        smdp_estimate_covariance(spec, k, 200, 9, 0, cov.as_mut_ptr(), se.as_mut_ptr(), k * k),
        SmdpStatus::Ok
    );
    // Symmetric estimate, strictly positive uncertainty.
    for i in 0..k {
        for j in 0..k {
            assert_eq!(cov[i * k + j].to_bits(), cov[j * k + i].to_bits());
            assert!(se[i * k + j] > 0.0);
        }
    }
    // Too-small capacity refuses before touching either buffer.
    let mut short_cov = vec![-1.0; k * k - 1];
    let mut short_se = vec![-1.0; k * k - 1];
    assert_eq!(
        smdp_estimate_covariance(
            spec,
            k,
            200,
            9,
            0,
            short_cov.as_mut_ptr(),
            short_se.as_mut_ptr(),
            k * k - 1
        ),
        SmdpStatus::BufferTooSmall
    );
    assert!(short_cov.iter().chain(&short_se).all(|&x| x == -1.0));
    smdp_spec_free(spec);
}

#[test]
fn catalan_matches_the_exact_table_and_flags_overflow() {
    let mut out = 0u64;
    assert_eq!(smdp_catalan(5, 7, &mut out), SmdpStatus::Ok);
    assert_eq!(out, 297);

    // i > j is out of domain.
    assert_eq!(smdp_catalan(7, 5, &mut out), SmdpStatus::Domain);

    // d(40, 40) ~ 1e23 does not fit in 64 bits; exact backend reports it.
    assert_eq!(smdp_catalan(40, 40, &mut out), SmdpStatus::Numeric);
    assert!(last_error().contains("64 bits"));
}

#[test]
fn dk_matrix_agrees_with_the_exact_construction() {
    for ensemble in [
        SmdpEnsemble::Gaussian,
        SmdpEnsemble::Laguerre,
        SmdpEnsemble::Jacobi,
    ] {
        let k = 4;
        let mut buf = vec![f64::NAN; k * k];
        assert_eq!(
            smdp_dk_matrix(ensemble, k, buf.as_mut_ptr(), buf.len()),
            SmdpStatus::Ok
        );
        let want: Vec<f64> = dk_matrix(ensemble.into(), k)
            .unwrap()
            .to_f64()
            .iter()
            .flatten()
            .copied()
            .collect();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&buf), bits(&want));
        // Lower triangular with unit-free zeros above the diagonal.
        for i in 0..k {
            for j in (i + 1)..k {
                assert_eq!(buf[i * k + j], 0.0);
            }
        }
    }
}

#[test]
fn rate_entry_points_match_frozen_values() {
    let mut out = f64::NAN;

    // alpha x^2 / 2 at alpha = 1, x = 1.5.
    assert_eq!(
        smdp_scalar_rate(SmdpRateKind::GammaMean, 1.0, 1.5, &mut out),
        SmdpStatus::Ok
    );
    assert_eq!(out, 1.125);

    // First-moment deviation of 1 for Gaussian at beta = 2: D_1 = [1],
    // so the quadratic form is (beta/4) * 1 = 0.5.
    assert_eq!(
        smdp_moment_rate(SmdpEnsemble::Gaussian, 2.0, [1.0].as_ptr(), 1, &mut out),
        SmdpStatus::Ok
    );
    assert_eq!(out, 0.5);

    // Polynomial density: (beta/4) sum c_d^2, exact in binary here.
    let coeffs = [0.5, 0.25];
    assert_eq!(
        smdp_polynomial_rate(
            SmdpReference::Semicircle,
            2.0,
            coeffs.as_ptr(),
            coeffs.len(),
            &mut out
        ),
        SmdpStatus::Ok
    );
    assert_eq!(out, 0.5 * (0.25 + 0.0625));

    // A nonzero discrete signed measure is outside every ball of finite rate.
    let atoms = [-1.0, 1.0];
    let weights = [-0.5, 0.5];
    assert_eq!(
        smdp_discrete_rate(2.0, atoms.as_ptr(), weights.as_ptr(), 2, &mut out),
        SmdpStatus::Ok
    );
    assert_eq!(out, f64::INFINITY);

    // Its degree-40 projection partial sum against the semicircle basis.
    assert_eq!(
        smdp_discrete_projection_rate(
            SmdpReference::Semicircle,
            2.0,
            atoms.as_ptr(),
            weights.as_ptr(),
            2,
            40,
            &mut out
        ),
        SmdpStatus::Ok
    );
    assert!((out - 7.0).abs() <= 1e-8, "partial sum {out}");

    // Weights that do not cancel are rejected at construction.
    let bad = [0.5, 0.25];
    assert_eq!(
        smdp_discrete_rate(2.0, atoms.as_ptr(), bad.as_ptr(), 2, &mut out),
        SmdpStatus::Domain
    );
}

#[test]
fn last_error_copies_are_nul_terminated_and_truncating() {
    let mut spec = ptr::null_mut();
    assert_eq!(
        smdp_spec_laguerre(10, 2.0, -2.0, &mut spec),
        SmdpStatus::Domain
    );
    let full = last_error();
    assert!(!full.is_empty());

    // Length query without copying.
    assert_eq!(smdp_last_error(ptr::null_mut(), 0), full.len());

    // Truncating copy: cap - 1 bytes plus terminator.
    let mut small = vec![0x7f as c_char; 8];
    let reported = smdp_last_error(small.as_mut_ptr(), small.len());
    assert_eq!(reported, full.len());
    assert_eq!(small[7], 0);
    let prefix: Vec<u8> = small[..7].iter().map(|&c| c as u8).collect();
    assert_eq!(prefix, &full.as_bytes()[..7]);
}

#[test]
fn generated_header_declares_the_public_surface() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/include/spectral_mdp.h");
    let header = std::fs::read_to_string(path).expect("build script writes the header");
    for needle in [
        "SMDP_STATUS_OK",
        "SMDP_STATUS_BUFFER_TOO_SMALL",
        "SMDP_ENSEMBLE_JACOBI",
        "struct SmdpSpec",
        "struct SmdpMeasure",
        "smdp_last_error",
        "smdp_sample(",
        "smdp_estimate_covariance(",
        "smdp_discrete_projection_rate(",
    ] {
        assert!(header.contains(needle), "header is missing {needle}");
    }
    // Opaque: the header must not leak the handles' layout.
    assert!(!header.contains("struct SmdpSpec {"));
    assert!(!header.contains("struct SmdpMeasure {"));
}
