//! C ABI over the core toolkit: opaque recording handles, the
//! preprocessing chain, text metrics, and a config-driven pipeline runner.
//! See `include/neurotext.h` for the matching declarations.
//!
//! Conventions: every function returns an `int` status code (except the
//! trivial accessors), `NT_OK` (0) on success. On failure the thread-local
//! message behind `nt_last_error()` explains what went wrong. Output
//! pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};

use libc::{c_char, c_double, c_int, size_t};
use ndarray::Array2;

use neurotext::commands::{
    cmd_evaluate, cmd_preprocess, cmd_split, cmd_toy_gen, cmd_train, CommandReport,
};
use neurotext::config::ExperimentConfig;
use neurotext::generate::DecodeMode;
use neurotext::metrics::{bleu_n, rouge1, wer};
use neurotext::signal::{preprocess, read_recording, write_recording, PreprocessConfig, Recording};

pub const NT_OK: c_int = 0;
pub const NT_ERR_NULL_ARGUMENT: c_int = 1;
pub const NT_ERR_INVALID_UTF8: c_int = 2;
pub const NT_ERR_RUNTIME: c_int = 3;
/// The pipeline ran but some items failed; details in `nt_last_error`.
pub const NT_ERR_PARTIAL: c_int = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn runtime_error(e: impl std::fmt::Display) -> c_int {
    set_error(e.to_string());
    NT_ERR_RUNTIME
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static version string of the library.
#[no_mangle]
pub extern "C" fn nt_version() -> *const c_char {
    static VERSION: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    VERSION.as_ptr() as *const c_char
}

/// Opaque multichannel recording handle.
pub struct NtRecording(Recording);

unsafe fn cstr_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error(format!("{name} is null"));
        return Err(NT_ERR_NULL_ARGUMENT);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{name} is not valid UTF-8"));
        NT_ERR_INVALID_UTF8
    })
}

fn null_check<T>(ptr: *const T, name: &str) -> Result<(), c_int> {
    if ptr.is_null() {
        set_error(format!("{name} is null"));
        return Err(NT_ERR_NULL_ARGUMENT);
    }
    Ok(())
}

/// Builds a recording from row-major `channels x time_samples` data.
///
/// # Safety
/// `samples` must point to `channels * time_samples` doubles and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_new(
    samples: *const c_double,
    channels: size_t,
    time_samples: size_t,
    rate_hz: c_double,
    out: *mut *mut NtRecording,
) -> c_int {
    if let Err(code) = null_check(samples, "samples").and_then(|_| null_check(out, "out")) {
        return code;
    }
    let data = std::slice::from_raw_parts(samples, channels * time_samples).to_vec();
    let arr = match Array2::from_shape_vec((channels, time_samples), data) {
        Ok(a) => a,
        Err(e) => return runtime_error(e),
    };
    match Recording::new(arr, rate_hz) {
        Ok(rec) => {
            *out = Box::into_raw(Box::new(NtRecording(rec)));
            NT_OK
        }
        Err(e) => runtime_error(e),
    }
}

/// Frees a recording handle; a null pointer is a no-op.
///
/// # Safety
/// `rec` must be null or a pointer produced by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_free(rec: *mut NtRecording) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_channels(rec: *const NtRecording) -> size_t {
    if rec.is_null() {
        return 0;
    }
    (*rec).0.channels()
}

/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_time_samples(rec: *const NtRecording) -> size_t {
    if rec.is_null() {
        return 0;
    }
    (*rec).0.time_samples()
}

/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_rate_hz(rec: *const NtRecording) -> c_double {
    if rec.is_null() {
        return 0.0;
    }
    (*rec).0.sample_rate_hz
}

/// Copies the samples out, row-major `channels x time_samples`.
///
/// # Safety
/// `out` must have room for `channels * time_samples` doubles.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_copy_data(
    rec: *const NtRecording,
    out: *mut c_double,
) -> c_int {
    if let Err(code) = null_check(rec, "rec").and_then(|_| null_check(out, "out")) {
        return code;
    }
    let samples = &(*rec).0.samples;
    let dst = std::slice::from_raw_parts_mut(out, samples.len());
    for (d, s) in dst.iter_mut().zip(samples.iter()) {
        *d = *s;
    }
    NT_OK
}

/// Reads a `.ntr` recording file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_read(
    path: *const c_char,
    out: *mut *mut NtRecording,
) -> c_int {
    let path = match cstr_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    if let Err(code) = null_check(out, "out") {
        return code;
    }
    match read_recording(Path::new(path)) {
        Ok(rec) => {
            *out = Box::into_raw(Box::new(NtRecording(rec)));
            NT_OK
        }
        Err(e) => runtime_error(e),
    }
}

/// Writes a recording as a `.ntr` file.
///
/// # Safety
/// `rec` must be a live handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nt_recording_write(
    rec: *const NtRecording,
    path: *const c_char,
) -> c_int {
    if let Err(code) = null_check(rec, "rec") {
        return code;
    }
    let path = match cstr_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    match write_recording(Path::new(path), &(*rec).0) {
        Ok(()) => NT_OK,
        Err(e) => runtime_error(e),
    }
}

/// Runs the preprocessing chain (notch, band-pass, resample, robust scale,
/// clip) with parameters given as a JSON object; `"{}"` selects defaults.
///
/// # Safety
/// `rec` must be a live handle, `json_config` a NUL-terminated string,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nt_preprocess(
    rec: *const NtRecording,
    json_config: *const c_char,
    out: *mut *mut NtRecording,
) -> c_int {
    if let Err(code) = null_check(rec, "rec").and_then(|_| null_check(out, "out")) {
        return code;
    }
    let json = match cstr_arg(json_config, "json_config") {
        Ok(j) => j,
        Err(code) => return code,
    };
    let cfg: PreprocessConfig = match serde_json::from_str(json) {
        Ok(c) => c,
        Err(e) => return runtime_error(format!("json_config: {e}")),
    };
    match preprocess(&(*rec).0, &cfg) {
        Ok(clean) => {
            *out = Box::into_raw(Box::new(NtRecording(clean)));
            NT_OK
        }
        Err(e) => runtime_error(e),
    }
}

unsafe fn string_array(
    ptr: *const *const c_char,
    len: size_t,
    name: &str,
) -> Result<Vec<String>, c_int> {
    null_check(ptr, name)?;
    let slice = std::slice::from_raw_parts(ptr, len);
    let mut out = Vec::with_capacity(len);
    for (i, &s) in slice.iter().enumerate() {
        out.push(cstr_arg(s, &format!("{name}[{i}]"))?.to_string());
    }
    Ok(out)
}

/// Corpus BLEU-n (percent) over paired reference/hypothesis sentences.
///
/// # Safety
/// `references` and `hypotheses` must each point to `count` NUL-terminated
/// strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nt_bleu_n(
    references: *const *const c_char,
    hypotheses: *const *const c_char,
    count: size_t,
    order: size_t,
    out: *mut c_double,
) -> c_int {
    if let Err(code) = null_check(out, "out") {
        return code;
    }
    let refs = match string_array(references, count, "references") {
        Ok(v) => v,
        Err(code) => return code,
    };
    let hyps = match string_array(hypotheses, count, "hypotheses") {
        Ok(v) => v,
        Err(code) => return code,
    };
    match bleu_n(&refs, &hyps, order) {
        Ok(score) => {
            *out = score;
            NT_OK
        }
        Err(e) => runtime_error(e),
    }
}

/// Word error rate over paired sentences.
///
/// # Safety
/// Same contract as `nt_bleu_n`.
#[no_mangle]
pub unsafe extern "C" fn nt_wer(
    references: *const *const c_char,
    hypotheses: *const *const c_char,
    count: size_t,
    out: *mut c_double,
) -> c_int {
    if let Err(code) = null_check(out, "out") {
        return code;
    }
    let refs = match string_array(references, count, "references") {
        Ok(v) => v,
        Err(code) => return code,
    };
    let hyps = match string_array(hypotheses, count, "hypotheses") {
        Ok(v) => v,
        Err(code) => return code,
    };
    match wer(&refs, &hyps) {
        Ok(score) => {
            *out = score;
            NT_OK
        }
        Err(e) => runtime_error(e),
    }
}

/// ROUGE-1 F / precision / recall over paired sentences. Any of the output
/// pointers may be null to skip that value.
///
/// # Safety
/// Same contract as `nt_bleu_n`.
#[no_mangle]
pub unsafe extern "C" fn nt_rouge1(
    references: *const *const c_char,
    hypotheses: *const *const c_char,
    count: size_t,
    out_f: *mut c_double,
    out_p: *mut c_double,
    out_r: *mut c_double,
) -> c_int {
    let refs = match string_array(references, count, "references") {
        Ok(v) => v,
        Err(code) => return code,
    };
    let hyps = match string_array(hypotheses, count, "hypotheses") {
        Ok(v) => v,
        Err(code) => return code,
    };
    match rouge1(&refs, &hyps) {
        Ok(score) => {
            if !out_f.is_null() {
                *out_f = score.f;
            }
            if !out_p.is_null() {
                *out_p = score.p;
            }
            if !out_r.is_null() {
                *out_r = score.r;
            }
            NT_OK
        }
        Err(e) => runtime_error(e),
    }
}

fn partial(report: &CommandReport) -> c_int {
    if report.is_clean() {
        NT_OK
    } else {
        let lines: Vec<String> =
            report.failures.iter().map(|(item, err)| format!("{item}: {err}")).collect();
        set_error(lines.join("\n"));
        NT_ERR_PARTIAL
    }
}

/// Runs one pipeline command against a TOML experiment config. Commands:
/// `toy_gen`, `preprocess`, `split`, `train`, `evaluate` (both decode modes
/// plus the noise baseline). Returns `NT_ERR_PARTIAL` when the command
/// finished but some items failed.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn nt_run_command(
    config_path: *const c_char,
    command: *const c_char,
) -> c_int {
    let config_path = match cstr_arg(config_path, "config_path") {
        Ok(p) => PathBuf::from(p),
        Err(code) => return code,
    };
    let command = match cstr_arg(command, "command") {
        Ok(c) => c,
        Err(code) => return code,
    };
    let cfg = match ExperimentConfig::load(&config_path) {
        Ok(c) => c,
        Err(e) => return runtime_error(e),
    };
    let result = match command {
        "toy_gen" => cmd_toy_gen(&cfg).map(|_| NT_OK),
        "preprocess" => cmd_preprocess(&cfg).map(|(_, r)| partial(&r)),
        "split" => cmd_split(&cfg).map(|_| NT_OK),
        "train" => cmd_train(&cfg).map(|o| partial(&o.report)),
        "evaluate" => cmd_evaluate(
            &cfg,
            None,
            &[DecodeMode::FreeRun, DecodeMode::TeacherForcing],
            true,
        )
        .map(|o| partial(&o.report)),
        other => {
            set_error(format!(
                "unknown command '{other}' (known: toy_gen, preprocess, split, train, evaluate)"
            ));
            return NT_ERR_RUNTIME;
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => runtime_error(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;
    use tempfile::tempdir;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(nt_last_error()).to_string_lossy().into_owned() }
    }

    #[test]
    fn version_is_non_empty() {
        let v = unsafe { CStr::from_ptr(nt_version()) };
        assert!(!v.to_bytes().is_empty());
    }

    #[test]
    fn recording_round_trip_through_the_handle() {
        let data: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let mut rec: *mut NtRecording = ptr::null_mut();
        let code = unsafe { nt_recording_new(data.as_ptr(), 4, 5, 100.0, &mut rec) };
        assert_eq!(code, NT_OK);
        unsafe {
            assert_eq!(nt_recording_channels(rec), 4);
            assert_eq!(nt_recording_time_samples(rec), 5);
            assert_eq!(nt_recording_rate_hz(rec), 100.0);
            let mut back = vec![0.0f64; 20];
            assert_eq!(nt_recording_copy_data(rec, back.as_mut_ptr()), NT_OK);
            assert_eq!(back, data);
            nt_recording_free(rec);
        }
    }

    #[test]
    fn file_round_trip_and_null_errors() {
        let dir = tempdir().unwrap();
        let path = CString::new(dir.path().join("r.ntr").to_str().unwrap()).unwrap();
        let data: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let mut rec: *mut NtRecording = ptr::null_mut();
        unsafe {
            assert_eq!(nt_recording_new(data.as_ptr(), 3, 4, 50.0, &mut rec), NT_OK);
            assert_eq!(nt_recording_write(rec, path.as_ptr()), NT_OK);
            let mut loaded: *mut NtRecording = ptr::null_mut();
            assert_eq!(nt_recording_read(path.as_ptr(), &mut loaded), NT_OK);
            let mut back = vec![0.0f64; 12];
            assert_eq!(nt_recording_copy_data(loaded, back.as_mut_ptr()), NT_OK);
            assert_eq!(back, data);
            nt_recording_free(rec);
            nt_recording_free(loaded);

            let code = nt_recording_read(ptr::null(), &mut rec);
            assert_eq!(code, NT_ERR_NULL_ARGUMENT);
            assert!(last_error().contains("path is null"));
            let missing = CString::new("/no/such/file.ntr").unwrap();
            assert_eq!(nt_recording_read(missing.as_ptr(), &mut rec), NT_ERR_RUNTIME);
        }
    }

    #[test]
    fn preprocess_via_json_config() {
        // 2 channels, 2 seconds at 400 Hz
        let n = 800usize;
        let data: Vec<f64> = (0..2 * n)
            .map(|i| ((i % n) as f64 * 0.05).sin() * 3.0 + 0.5)
            .collect();
        let mut rec: *mut NtRecording = ptr::null_mut();
        unsafe {
            assert_eq!(nt_recording_new(data.as_ptr(), 2, n, 400.0, &mut rec), NT_OK);
            let cfg = CString::new("{\"target_rate_hz\": 100.0, \"band_high_hz\": 45.0}").unwrap();
            let mut clean: *mut NtRecording = ptr::null_mut();
            assert_eq!(nt_preprocess(rec, cfg.as_ptr(), &mut clean), NT_OK);
            assert_eq!(nt_recording_rate_hz(clean), 100.0);
            assert_eq!(nt_recording_time_samples(clean), 200);
            let mut out = vec![0.0f64; 2 * 200];
            assert_eq!(nt_recording_copy_data(clean, out.as_mut_ptr()), NT_OK);
            assert!(out.iter().all(|v| v.abs() <= 1.0));
            // bad json reports a runtime error
            let bad = CString::new("{\"no_such_knob\": 1}").unwrap();
            let mut dummy: *mut NtRecording = ptr::null_mut();
            assert_eq!(nt_preprocess(rec, bad.as_ptr(), &mut dummy), NT_ERR_RUNTIME);
            assert!(last_error().contains("json_config"));
            nt_recording_free(rec);
            nt_recording_free(clean);
        }
    }

    #[test]
    fn metrics_match_the_core_library() {
        let refs = ["the cat sat", "a dog ran fast"];
        let hyps = ["the cat sat", "a dog walked"];
        let c_refs: Vec<CString> = refs.iter().map(|s| CString::new(*s).unwrap()).collect();
        let c_hyps: Vec<CString> = hyps.iter().map(|s| CString::new(*s).unwrap()).collect();
        let p_refs: Vec<*const c_char> = c_refs.iter().map(|s| s.as_ptr()).collect();
        let p_hyps: Vec<*const c_char> = c_hyps.iter().map(|s| s.as_ptr()).collect();
        let refs_s: Vec<String> = refs.iter().map(|s| s.to_string()).collect();
        let hyps_s: Vec<String> = hyps.iter().map(|s| s.to_string()).collect();
        unsafe {
            let mut bleu = 0.0f64;
            assert_eq!(nt_bleu_n(p_refs.as_ptr(), p_hyps.as_ptr(), 2, 1, &mut bleu), NT_OK);
            assert_eq!(bleu, bleu_n(&refs_s, &hyps_s, 1).unwrap());
            let mut w = 0.0f64;
            assert_eq!(nt_wer(p_refs.as_ptr(), p_hyps.as_ptr(), 2, &mut w), NT_OK);
            assert_eq!(w, wer(&refs_s, &hyps_s).unwrap());
            let (mut f, mut p, mut r) = (0.0f64, 0.0f64, 0.0f64);
            assert_eq!(
                nt_rouge1(p_refs.as_ptr(), p_hyps.as_ptr(), 2, &mut f, &mut p, &mut r),
                NT_OK
            );
            let oracle = rouge1(&refs_s, &hyps_s).unwrap();
            assert_eq!((f, p, r), (oracle.f, oracle.p, oracle.r));
            // null argument is reported, not dereferenced
            let code = nt_bleu_n(ptr::null(), p_hyps.as_ptr(), 2, 1, &mut bleu);
            assert_eq!(code, NT_ERR_NULL_ARGUMENT);
            assert!(last_error().contains("references is null"));
        }
    }

    #[test]
    fn run_command_drives_the_pipeline() {
        let dir = tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.output_dir = dir.path().join("out");
        cfg.dataset.language = "english".to_string();
        cfg.dataset.toy = Some(neurotext::config::ToyConfig {
            sentences: 3,
            repeats: 3,
            channels: 4,
            rate_hz: 200.0,
            seed: 2,
        });
        cfg.train.batch_size = 4;
        cfg.train.max_epochs = 1;
        cfg.train.warmup_steps = 0;
        cfg.eval.max_new_tokens = 8;
        let cfg_path = dir.path().join("exp.toml");
        cfg.save(&cfg_path).unwrap();
        let c_path = CString::new(cfg_path.to_str().unwrap()).unwrap();
        unsafe {
            for cmd in ["toy_gen", "preprocess", "split", "train", "evaluate"] {
                let c_cmd = CString::new(cmd).unwrap();
                let code = nt_run_command(c_path.as_ptr(), c_cmd.as_ptr());
                assert_eq!(code, NT_OK, "{cmd} failed: {}", last_error());
            }
            let bogus = CString::new("explode").unwrap();
            assert_eq!(nt_run_command(c_path.as_ptr(), bogus.as_ptr()), NT_ERR_RUNTIME);
            assert!(last_error().contains("unknown command"));
        }
        assert!(cfg.output_dir.join("eval/report_free_run.json").exists());
        assert!(cfg.output_dir.join("eval/report_noise.json").exists());
    }
}
