use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use conetail_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(conetail_last_error()) }.to_string_lossy().into_owned()
}

const INDEP: &str = r#"{"d": 2, "entries": [
    {"rv": {"alpha": 2.0, "b": {"coeff": 1.0, "exp": 0.5}, "mu": {"family": "independence", "d": 2, "alpha": 2.0, "level": 1}}},
    {"rv": {"alpha": 4.0, "b": {"coeff": 1.0, "exp": 0.25}, "mu": {"family": "independence", "d": 2, "alpha": 2.0, "level": 2}}}
]}"#;

#[test]
fn measure_round_trip() {
    unsafe {
        let mut mu = ptr::null_mut();
        let mut a = ptr::null_mut();
        let json = c(r#"{"family":"mo_equal","d":2,"alpha":1.0,"level":2}"#);
        assert_eq!(conetail_measure_from_json(json.as_ptr(), &mut mu), ConetailStatus::Ok);
        let set = c(r#"{"d":2,"S":[1,2],"x":{"1":2.0,"2":8.0}}"#);
        assert_eq!(conetail_rectset_from_json(set.as_ptr(), &mut a), ConetailStatus::Ok);
        let mut v = 0.0;
        assert_eq!(conetail_measure_eval(mu, a, &mut v), ConetailStatus::Ok);
        assert!((v - 0.0883883476483).abs() < 1e-12);
        conetail_rectset_free(a);
        conetail_measure_free(mu);
    }
}

#[test]
fn spectrum_operations() {
    unsafe {
        let mut s = ptr::null_mut();
        let json = c(INDEP);
        assert_eq!(conetail_spectrum_from_json(json.as_ptr(), &mut s), ConetailStatus::Ok);
        let mut sum = ptr::null_mut();
        assert_eq!(conetail_convolve(s, s, &mut sum), ConetailStatus::Ok);
        let mut triple = ptr::null_mut();
        assert_eq!(conetail_self_convolve(s, 3, &mut triple), ConetailStatus::Ok);

        let mut a = ptr::null_mut();
        let idx = [0usize, 1];
        let x = [1.0, 1.0];
        assert_eq!(conetail_rectset_new(2, idx.as_ptr(), x.as_ptr(), 2, &mut a), ConetailStatus::Ok);
        let (mut v, mut ub) = (0.0, -1);
        assert_eq!(conetail_tail_prob_approx(sum, a, 10.0, &mut v, &mut ub), ConetailStatus::Ok);
        assert!((v - 4e-4).abs() < 1e-16);
        assert_eq!(ub, 0);
        assert_eq!(conetail_tail_prob_approx(triple, a, 10.0, &mut v, ptr::null_mut()), ConetailStatus::Ok);
        assert!((v - 9e-4).abs() < 1e-16);

        let mut text = ptr::null_mut();
        assert_eq!(conetail_spectrum_to_json(sum, &mut text), ConetailStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(conetail_spectrum_from_json(text, &mut back), ConetailStatus::Ok);
        let (mut d, mut delta) = (0, 0);
        assert_eq!(conetail_spectrum_shape(back, &mut d, &mut delta), ConetailStatus::Ok);
        assert_eq!((d, delta), (2, 2));
        conetail_string_free(text);

        for p in [s, sum, triple, back] {
            conetail_spectrum_free(p);
        }
        conetail_rectset_free(a);
    }
}

#[test]
fn null_cone_and_bad_input() {
    unsafe {
        let mut m = ptr::null_mut();
        let json = c(r#"{"family":"discrete_mixture","d":2,"alpha":2.0,"p":[0.5,0.5],"noise":"none"}"#);
        assert_eq!(conetail_model_from_json(json.as_ptr(), &mut m), ConetailStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(conetail_model_spectrum(m, &mut s), ConetailStatus::Ok);
        let mut a = ptr::null_mut();
        let (idx, x) = ([0usize, 1], [1.0, 1.0]);
        assert_eq!(conetail_rectset_new(2, idx.as_ptr(), x.as_ptr(), 2, &mut a), ConetailStatus::Ok);
        let (mut v, mut ub) = (0.0, 0);
        assert_eq!(conetail_tail_prob_approx(s, a, 10.0, &mut v, &mut ub), ConetailStatus::Ok);
        assert_eq!(ub, 1);

        let mut e = ConetailEstimate::default();
        let kind = c("sum:2");
        assert_eq!(conetail_estimate_tail_prob(kind.as_ptr(), m, a, 10.0, 100_000, 3, &mut e), ConetailStatus::Ok);
        assert_eq!(e.n_samples, 100_000);
        assert!(e.ci_lo <= e.p_hat && e.p_hat <= e.ci_hi);

        let bad_kind = c("sum:two");
        assert_eq!(conetail_estimate_tail_prob(bad_kind.as_ptr(), m, a, 10.0, 10, 3, &mut e), ConetailStatus::InvalidInput);
        assert!(last_error().starts_with("bad_param"));

        let bad = c(r#"{"family":"mardia","d":2,"alpha":-1.0}"#);
        let mut m2 = ptr::null_mut();
        assert_eq!(conetail_model_from_json(bad.as_ptr(), &mut m2), ConetailStatus::InvalidInput);
        assert!(m2.is_null());
        assert_eq!(conetail_model_from_json(ptr::null(), &mut m2), ConetailStatus::NullPointer);
        assert_eq!(conetail_measure_eval(ptr::null(), a, &mut v), ConetailStatus::NullPointer);

        conetail_rectset_free(a);
        conetail_spectrum_free(s);
        conetail_model_free(m);
    }
}

#[test]
fn regime_errors_are_hypothesis_status() {
    // MO with unequal rates has no spectrum in the calculus
    unsafe {
        let mut m = ptr::null_mut();
        let json = c(r#"{"family":"marshall_olkin","d":2,"alpha":1.0,"rates":{"[1]":1.0,"[2]":2.0,"[1,2]":1.0}}"#);
        assert_eq!(conetail_model_from_json(json.as_ptr(), &mut m), ConetailStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(conetail_model_spectrum(m, &mut s), ConetailStatus::Numeric);
        assert!(last_error().starts_with("unsupported_model"));
        conetail_model_free(m);
    }
}

#[test]
fn sampling_is_deterministic() {
    unsafe {
        let mut m = ptr::null_mut();
        let json = c(r#"{"family":"mardia","d":3,"alpha":1.5}"#);
        assert_eq!(conetail_model_from_json(json.as_ptr(), &mut m), ConetailStatus::Ok);
        let mut dim = 0;
        assert_eq!(conetail_model_dim(m, &mut dim), ConetailStatus::Ok);
        assert_eq!(dim, 3);
        let draw = |seed| {
            let mut r = ptr::null_mut();
            assert_eq!(conetail_rng_new(seed, 2, &mut r), ConetailStatus::Ok);
            let mut out = [0.0; 3];
            for _ in 0..5 {
                assert_eq!(conetail_sample_vector(m, r, out.as_mut_ptr(), 3), ConetailStatus::Ok);
            }
            conetail_rng_free(r);
            out
        };
        assert_eq!(draw(1), draw(1));
        assert_ne!(draw(1), draw(2));
        let mut r = ptr::null_mut();
        conetail_rng_new(1, 0, &mut r);
        let mut out = [0.0; 2];
        assert_eq!(conetail_sample_vector(m, r, out.as_mut_ptr(), 2), ConetailStatus::InvalidInput);
        conetail_rng_free(r);
        conetail_model_free(m);
    }
}

#[test]
fn version_and_free_null() {
    let v = unsafe { CStr::from_ptr(conetail_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    unsafe {
        conetail_spectrum_free(ptr::null_mut());
        conetail_string_free(ptr::null_mut());
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(manifest_dir().join("include/conetail.h")).unwrap();
    for name in [
        "conetail_last_error",
        "conetail_measure_free",
        "conetail_rng_free",
        "conetail_measure_from_json",
        "conetail_measure_eval",
        "conetail_rectset_new",
        "conetail_spectrum_to_json",
        "conetail_convolve",
        "conetail_self_convolve",
        "conetail_tail_prob_approx",
        "conetail_sample_vector",
        "conetail_estimate_tail_prob",
        "typedef struct ConetailSpectrum ConetailSpectrum",
        "CONETAIL_STATUS_NULL_CONVERGENCE",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/<test binary>
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libconetail_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let out = std::env::temp_dir().join(format!("conetail_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(manifest_dir().join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(&lib)
        .args(["-Wall", "-Werror", "-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "smoke program exited with {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0.0883883");
}
