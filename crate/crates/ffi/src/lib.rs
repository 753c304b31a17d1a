//! C ABI over the handmorph core.
//!
//! Every fallible call returns an [`HmStatus`]; on failure the message is
//! kept per thread and read with [`hm_last_error`]. Objects cross the
//! boundary as opaque handles that the caller frees with the matching
//! `*_free` function. Strings returned through `char **` out-parameters are
//! owned by the caller and released with [`hm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use handmorph::cad::{emit_scad, ScadTemplate};
use handmorph::config::Config;
use handmorph::grammar::{expand, parse_grammar};
use handmorph::llm::StubProvider;
use handmorph::metrics::gfl;
use handmorph::model::{from_canonical_json, to_canonical_json, GraspType, HandGrammar, HandGraph, NodeKind, OphParams};
use handmorph::params::refilter;
use handmorph::pipeline::{run_task, RunError, RunOptions};
use handmorph::validator::check_grammar_document;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Input text is not valid JSON or TOML for the expected type.
    Parse = 3,
    /// Input parsed but breaks a structural rule.
    Invalid = 4,
    Io = 5,
    /// The model provider (stub fixtures included) failed.
    Provider = 6,
    Config = 7,
    /// The pipeline ran but produced no surviving design.
    RunFailed = 8,
    Panic = 9,
}

/// Node kinds counted by [`hm_graph_count_kind`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmNodeKind {
    Palm = 0,
    FingerRoot = 1,
    Joint = 2,
    Link = 3,
    Mount = 4,
    Tendon = 5,
    Connector = 6,
}

impl From<HmNodeKind> for NodeKind {
    fn from(k: HmNodeKind) -> NodeKind {
        match k {
            HmNodeKind::Palm => NodeKind::Palm,
            HmNodeKind::FingerRoot => NodeKind::FingerRoot,
            HmNodeKind::Joint => NodeKind::Joint,
            HmNodeKind::Link => NodeKind::Link,
            HmNodeKind::Mount => NodeKind::Mount,
            HmNodeKind::Tendon => NodeKind::Tendon,
            HmNodeKind::Connector => NodeKind::Connector,
        }
    }
}

pub struct HmConfig(Config);
pub struct HmGrammar(HandGrammar);
pub struct HmGraph(HandGraph);
pub struct HmParams(OphParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(HmStatus, String);

type Outcome<T> = Result<T, Failure>;

fn fail<T>(status: HmStatus, message: impl std::fmt::Display) -> Outcome<T> {
    Err(Failure(status, message.to_string()))
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, turning errors and panics into a status plus a thread-local message.
fn guard(f: impl FnOnce() -> Outcome<()>) -> HmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            HmStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return fail(HmStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(HmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref()
        .map_or_else(|| fail(HmStatus::NullArgument, format!("{what} is null")), Ok)
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Outcome<&'a mut T> {
    p.as_mut()
        .map_or_else(|| fail(HmStatus::NullArgument, format!("{what} is null")), Ok)
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn config_or_default(config: *const HmConfig) -> Config {
    unsafe { config.as_ref() }.map_or_else(Config::default, |c| c.0.clone())
}

unsafe fn grasp(p: *const c_char) -> Outcome<Option<GraspType>> {
    if p.is_null() {
        return Ok(None);
    }
    let s = text(p, "grasp_type")?;
    s.parse().map(Some).or_else(|e| fail(HmStatus::Invalid, e))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn hm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration.
#[no_mangle]
pub extern "C" fn hm_config_default() -> *mut HmConfig {
    Box::into_raw(Box::new(HmConfig(Config::default())))
}

/// Loads and checks a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_config` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_config_load(path: *const c_char, out_config: *mut *mut HmConfig) -> HmStatus {
    guard(|| {
        let slot = out(out_config, "out_config")?;
        *slot = ptr::null_mut();
        let path = text(path, "path")?;
        let config = Config::load(Path::new(path)).or_else(|e| fail(HmStatus::Config, e.0))?;
        config.check().or_else(|e| fail(HmStatus::Config, e.0))?;
        *slot = Box::into_raw(Box::new(HmConfig(config)));
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_config_free(config: *mut HmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Parses a grammar document.
///
/// # Safety
/// `json` must be NUL-terminated; `out_grammar` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_grammar_parse(json: *const c_char, out_grammar: *mut *mut HmGrammar) -> HmStatus {
    guard(|| {
        let slot = out(out_grammar, "out_grammar")?;
        *slot = ptr::null_mut();
        let g = parse_grammar(text(json, "json")?).or_else(|e| fail(HmStatus::Parse, e))?;
        *slot = Box::into_raw(Box::new(HmGrammar(g)));
        Ok(())
    })
}

/// # Safety
/// `grammar` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_grammar_free(grammar: *mut HmGrammar) {
    if !grammar.is_null() {
        drop(Box::from_raw(grammar));
    }
}

/// Expands a grammar into its component graph.
///
/// # Safety
/// `grammar` must be a live handle; `out_graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_grammar_expand(grammar: *const HmGrammar, out_graph: *mut *mut HmGraph) -> HmStatus {
    guard(|| {
        let slot = out(out_graph, "out_graph")?;
        *slot = ptr::null_mut();
        let g = handle(grammar, "grammar")?;
        let graph = expand(&g.0).or_else(|e| fail(HmStatus::Invalid, e))?;
        *slot = Box::into_raw(Box::new(HmGraph(graph)));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_graph_free(graph: *mut HmGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes of `kind`; 0 for a NULL graph.
///
/// # Safety
/// `graph` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_graph_count_kind(graph: *const HmGraph, kind: HmNodeKind) -> usize {
    graph.as_ref().map_or(0, |g| g.0.count_kind(kind.into()))
}

/// Canonical JSON of the graph.
///
/// # Safety
/// `graph` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_graph_to_json(graph: *const HmGraph, out_json: *mut *mut c_char) -> HmStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = owned_string(to_canonical_json(&handle(graph, "graph")?.0));
        Ok(())
    })
}

/// Runs the rule checks on a grammar document. `out_report_json` (optional)
/// receives the findings as JSON. A grammar that fails to parse still yields
/// a report with its R0 finding and `HM_STATUS_OK`.
///
/// # Safety
/// `json` must be NUL-terminated; out-pointers must be writable or NULL
/// where marked optional.
#[no_mangle]
pub unsafe extern "C" fn hm_validate_grammar(
    json: *const c_char,
    out_rule_score: *mut f64,
    out_has_critical: *mut c_int,
    out_report_json: *mut *mut c_char,
) -> HmStatus {
    guard(|| {
        let score = out(out_rule_score, "out_rule_score")?;
        let critical = out(out_has_critical, "out_has_critical")?;
        let doc: serde_json::Value =
            serde_json::from_str(text(json, "json")?).or_else(|e| fail(HmStatus::Parse, e))?;
        let (_, _, outcome) = check_grammar_document(&doc);
        *score = outcome.rule_score;
        *critical = outcome
            .findings
            .iter()
            .any(|f| f.severity == handmorph::model::Severity::Critical) as c_int;
        if let Some(slot) = out_report_json.as_mut() {
            *slot = owned_string(to_canonical_json(&outcome.findings));
        }
        Ok(())
    })
}

/// Parses and checks a canonical parameter file.
///
/// # Safety
/// `json` must be NUL-terminated; `out_params` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_params_parse(json: *const c_char, out_params: *mut *mut HmParams) -> HmStatus {
    guard(|| {
        let slot = out(out_params, "out_params")?;
        *slot = ptr::null_mut();
        let p: OphParams = from_canonical_json(text(json, "json")?).or_else(|e| fail(HmStatus::Parse, e))?;
        *slot = Box::into_raw(Box::new(HmParams(p)));
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_params_free(params: *mut HmParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Runs the constraint filter. `grasp_type` and `config` may be NULL (no
/// prior multipliers, default config). `out_violations_json` (optional)
/// receives the violated check ids as a JSON array.
///
/// # Safety
/// Pointers must be live handles, NUL-terminated strings or NULL as noted.
#[no_mangle]
pub unsafe extern "C" fn hm_params_check(
    params: *const HmParams,
    grasp_type: *const c_char,
    config: *const HmConfig,
    out_passed: *mut c_int,
    out_violations_json: *mut *mut c_char,
) -> HmStatus {
    guard(|| {
        let passed = out(out_passed, "out_passed")?;
        let p = handle(params, "params")?;
        let c = config_or_default(config);
        let f = refilter(&p.0, grasp(grasp_type)?, &c.priors, &c.ratios, &c.constraints);
        *passed = f.result.passed as c_int;
        if let Some(slot) = out_violations_json.as_mut() {
            *slot = owned_string(to_canonical_json(&f.result.violations));
        }
        Ok(())
    })
}

/// Grasp force level in [0, 1] for the parameters' derived geometry.
///
/// # Safety
/// As for [`hm_params_check`].
#[no_mangle]
pub unsafe extern "C" fn hm_params_gfl(
    params: *const HmParams,
    grasp_type: *const c_char,
    config: *const HmConfig,
    out_gfl: *mut f64,
) -> HmStatus {
    guard(|| {
        let slot = out(out_gfl, "out_gfl")?;
        let p = handle(params, "params")?;
        let c = config_or_default(config);
        let f = refilter(&p.0, grasp(grasp_type)?, &c.priors, &c.ratios, &c.constraints);
        *slot = gfl(&f.geometry, &f.params, &c.metrics.gfl_norms, &c.metrics.gfl_weights);
        Ok(())
    })
}

/// OpenSCAD source for the parameters using the built-in template. Does not
/// run the constraint filter.
///
/// # Safety
/// As for [`hm_params_check`]; `out_scad` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_params_emit_scad(
    params: *const HmParams,
    grasp_type: *const c_char,
    config: *const HmConfig,
    out_scad: *mut *mut c_char,
) -> HmStatus {
    guard(|| {
        let slot = out(out_scad, "out_scad")?;
        *slot = ptr::null_mut();
        let p = handle(params, "params")?;
        let c = config_or_default(config);
        let f = refilter(&p.0, grasp(grasp_type)?, &c.priors, &c.ratios, &c.constraints);
        let scad = emit_scad(&f.params, &f.geometry, &ScadTemplate::builtin()).or_else(|e| fail(HmStatus::Invalid, e))?;
        *slot = owned_string(scad);
        Ok(())
    })
}

/// Runs the whole pipeline offline against a stub fixture directory and
/// writes artifacts to `out_dir`. `out_summary_json` (optional) receives the
/// run summary. Returns `HM_STATUS_RUN_FAILED` when no design survives.
///
/// # Safety
/// Strings must be NUL-terminated; `config` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_run_stub(
    task: *const c_char,
    fixtures_dir: *const c_char,
    out_dir: *const c_char,
    config: *const HmConfig,
    out_summary_json: *mut *mut c_char,
) -> HmStatus {
    guard(|| {
        let task = text(task, "task")?;
        let fixtures = text(fixtures_dir, "fixtures_dir")?;
        let dir = text(out_dir, "out_dir")?;
        let c = config_or_default(config);
        let stub = StubProvider::from_dir(Path::new(fixtures)).or_else(|e| fail(HmStatus::Io, e))?;
        let summary = run_task(&c, &RunOptions::new(task, Path::new(dir)), &stub).or_else(|e| {
            let status = match &e {
                RunError::Config(_) => HmStatus::Config,
                RunError::Provider(handmorph::llm::LlmError::Config(_)) => HmStatus::Config,
                RunError::Provider(_) => HmStatus::Provider,
                RunError::Io(_) => HmStatus::Io,
            };
            fail(status, e)
        })?;
        if let Some(slot) = out_summary_json.as_mut() {
            *slot = owned_string(serde_json::to_string(&summary).expect("summary serializes"));
        }
        if summary.exit_code() != 0 {
            return fail(HmStatus::RunFailed, format!("run {} produced no surviving design", summary.run_id));
        }
        Ok(())
    })
}
