//! C ABI over `proxcausal`.
//!
//! Conventions:
//!
//! * Every fallible call returns a [`PcStatus`]; results go through out
//!   pointers. On failure `pc_last_error()` describes the error on the
//!   calling thread.
//! * Objects are opaque handles created by `pc_*_new`/`pc_*` constructors
//!   and released with the matching `pc_*_free`. Passing NULL to a free
//!   function is a no-op.
//! * Strings returned through `char **` are owned by the caller and must be
//!   released with `pc_string_free`.
//! * Panics never cross the boundary; they surface as `PC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use proxcausal::benchmark::run_benchmark;
use proxcausal::config::{RunConfig, Target};
use proxcausal::discovery::{discover_graph, select_proxies_by_name};
use proxcausal::discretize::BinningStrategy;
use proxcausal::estimator::{default_grid, fit_and_estimate, EstimateOptions, FittedEstimate};
use proxcausal::proxytest::{test_edge, Bins};
use proxcausal::scenarios::builtin_scenario;
use proxcausal::stats::chi_square_sf;
use proxcausal::{BipartiteGraph, Dataset, Error, ProxyAssignment, ProxyRule, ScmSpec};

/// Status codes. `PC_STATUS_OK` is zero; every other value is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    UnknownScenario = 3,
    InvalidModel = 4,
    UnknownVariable = 5,
    InvalidDataset = 6,
    NonFinite = 7,
    TooFewDistinctValues = 8,
    EmptyBin = 9,
    BinUnderflow = 10,
    Precondition = 11,
    AssumptionViolation = 12,
    DimensionMismatch = 13,
    SingularSystem = 14,
    Degenerate = 15,
    Config = 16,
    Parse = 17,
    Io = 18,
    Json = 19,
    OutOfRange = 20,
    Panic = 99,
}

/// Edge-test outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PcTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub reject: bool,
    pub design_rank: usize,
}

/// Proxy rule used when discovering a graph.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcProxyRule {
    SmallestOther = 0,
    MajorityVote = 1,
}

/// A structural causal model.
pub struct PcScm(ScmSpec);
/// A dataset of tagged columns.
pub struct PcDataset(Dataset);
/// A discovered or known treatment → outcome graph.
pub struct PcGraph(BipartiteGraph);
/// A fitted dose-response curve together with its bridges.
pub struct PcCurve(FittedEstimate);

struct Failure {
    status: PcStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownScenario(_) => PcStatus::UnknownScenario,
            Error::InvalidModel(_) => PcStatus::InvalidModel,
            Error::UnknownVariable(_) => PcStatus::UnknownVariable,
            Error::InvalidDataset(_) => PcStatus::InvalidDataset,
            Error::NonFinite { .. } => PcStatus::NonFinite,
            Error::TooFewDistinctValues { .. } => PcStatus::TooFewDistinctValues,
            Error::EmptyBin { .. } => PcStatus::EmptyBin,
            Error::BinUnderflow { .. } => PcStatus::BinUnderflow,
            Error::Precondition(_) => PcStatus::Precondition,
            Error::AssumptionViolation => PcStatus::AssumptionViolation,
            Error::DimensionMismatch(_) => PcStatus::DimensionMismatch,
            Error::Singular(_) => PcStatus::SingularSystem,
            Error::Degenerate(_) => PcStatus::Degenerate,
            Error::Config(_) => PcStatus::Config,
            Error::Parse(_) => PcStatus::Parse,
            Error::Io(_) => PcStatus::Io,
            Error::Json(_) => PcStatus::Json,
        };
        Failure {
            status,
            message: format!("{}: {e}", e.category()),
        }
    }
}

fn fail(status: PcStatus, message: &str) -> Failure {
    Failure {
        status,
        message: message.to_string(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PcStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            PcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(PcStatus::NullPointer, &format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PcStatus::InvalidUtf8, &format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(PcStatus::NullPointer, &format!("{what} is NULL")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(PcStatus::NullPointer, &format!("{what} is NULL")));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| fail(PcStatus::InvalidUtf8, "string contains NUL"))?;
    put(out, c.into_raw(), "output string pointer")
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Upper tail of the chi-square law with `k` degrees of freedom. Returns NaN
/// for `k = 0`, negative or non-finite `x`.
#[no_mangle]
pub extern "C" fn pc_chi_square_sf(x: f64, k: usize) -> f64 {
    if k == 0 || !(x >= 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    catch_unwind(|| chi_square_sf(x, k)).unwrap_or(f64::NAN)
}

/// Built-in scenario by id, e.g. `synthetic-main` or
/// `proxy-strength:10:linear:causal`.
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_scenario_new(id: *const c_char, out: *mut *mut PcScm) -> PcStatus {
    guard(|| {
        let spec = builtin_scenario(str_arg(id, "id")?)?;
        put(out, Box::into_raw(Box::new(PcScm(spec))), "out")
    })
}

/// Model from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_scm_from_json(json: *const c_char, out: *mut *mut PcScm) -> PcStatus {
    guard(|| {
        let spec: ScmSpec = serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        put(out, Box::into_raw(Box::new(PcScm(spec))), "out")
    })
}

/// # Safety
/// `scm` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_scm_free(scm: *mut PcScm) {
    if !scm.is_null() {
        drop(Box::from_raw(scm));
    }
}

/// Draws `n` samples of the observed variables.
///
/// # Safety
/// `scm` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_scm_sample(
    scm: *const PcScm,
    n: usize,
    seed: u64,
    out: *mut *mut PcDataset,
) -> PcStatus {
    guard(|| {
        let ds = handle(scm, "scm")?.0.sample(n, seed)?;
        put(out, Box::into_raw(Box::new(PcDataset(ds))), "out")
    })
}

/// Monte Carlo `E[outcome | do(treated = dose)]` for one dose vector of
/// length `dim`; `treated` is a comma-separated list.
///
/// # Safety
/// `scm` must be a live handle; strings NUL-terminated; `dose` must hold
/// `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_scm_ground_truth(
    scm: *const PcScm,
    outcome: *const c_char,
    treated: *const c_char,
    dose: *const f64,
    dim: usize,
    replicates: usize,
    seed: u64,
    out: *mut f64,
) -> PcStatus {
    guard(|| {
        let spec = &handle(scm, "scm")?.0;
        let treated: Vec<String> = str_arg(treated, "treated")?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        if dose.is_null() {
            return Err(fail(PcStatus::NullPointer, "dose is NULL"));
        }
        let dose = std::slice::from_raw_parts(dose, dim).to_vec();
        let curve = spec.ground_truth_curve(str_arg(outcome, "outcome")?, &treated, &[dose], replicates, seed)?;
        put(out, curve.estimates[0], "out")
    })
}

/// Parses CSV text with `name:a|y|x` headers.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_from_csv(text: *const c_char, out: *mut *mut PcDataset) -> PcStatus {
    guard(|| {
        let ds = Dataset::from_csv_str(str_arg(text, "text")?)?;
        put(out, Box::into_raw(Box::new(PcDataset(ds))), "out")
    })
}

/// Reads a CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_read_csv(path: *const c_char, out: *mut *mut PcDataset) -> PcStatus {
    guard(|| {
        let ds = Dataset::read_csv(str_arg(path, "path")?)?;
        put(out, Box::into_raw(Box::new(PcDataset(ds))), "out")
    })
}

/// Serializes the dataset as CSV.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_to_csv(ds: *const PcDataset, out: *mut *mut c_char) -> PcStatus {
    guard(|| put_string(out, handle(ds, "dataset")?.0.to_csv_string()))
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_rows(ds: *const PcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// Number of columns, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_columns(ds: *const PcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.columns().len())
}

/// Borrows the values of a named column. The pointer is valid while the
/// dataset lives.
///
/// # Safety
/// `ds` must be a live handle; `name` NUL-terminated; `values` and `len`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_column(
    ds: *const PcDataset,
    name: *const c_char,
    values: *mut *const f64,
    len: *mut usize,
) -> PcStatus {
    guard(|| {
        let col = handle(ds, "dataset")?.0.column(str_arg(name, "name")?)?;
        put(values, col.values.as_ptr(), "values")?;
        put(len, col.values.len(), "len")
    })
}

/// # Safety
/// `ds` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_free(ds: *mut PcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Tests `A_i ⊥ Y_j | U` with `proxy` standing in for the confounder, using
/// quantile bins `(m, n, l)`.
///
/// # Safety
/// `ds` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_test_edge(
    ds: *const PcDataset,
    treatment: *const c_char,
    outcome: *const c_char,
    proxy: *const c_char,
    m: usize,
    n: usize,
    l: usize,
    alpha: f64,
    out: *mut PcTestResult,
) -> PcStatus {
    guard(|| {
        let r = test_edge(
            &handle(ds, "dataset")?.0,
            str_arg(treatment, "treatment")?,
            str_arg(outcome, "outcome")?,
            str_arg(proxy, "proxy")?,
            Bins { m, n, l },
            BinningStrategy::Quantile,
            alpha,
        )?;
        put(
            out,
            PcTestResult {
                statistic: r.statistic,
                p_value: r.p_value,
                dof: r.dof,
                reject: r.reject,
                design_rank: r.diagnostics.design_rank,
            },
            "out",
        )
    })
}

/// Tests every treatment/outcome pair and assembles the graph.
///
/// # Safety
/// `ds` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_discover(
    ds: *const PcDataset,
    m: usize,
    n: usize,
    l: usize,
    alpha: f64,
    rule: PcProxyRule,
    out: *mut *mut PcGraph,
) -> PcStatus {
    guard(|| {
        let rule = match rule {
            PcProxyRule::SmallestOther => ProxyRule::SmallestOther,
            PcProxyRule::MajorityVote => ProxyRule::MajorityVote,
        };
        let g = discover_graph(&handle(ds, "dataset")?.0, Bins { m, n, l }, BinningStrategy::Quantile, alpha, rule)?;
        put(out, Box::into_raw(Box::new(PcGraph(g))), "out")
    })
}

/// The graph implied by a model's equations.
///
/// # Safety
/// `scm` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_graph_truth(scm: *const PcScm, out: *mut *mut PcGraph) -> PcStatus {
    guard(|| {
        let g = BipartiteGraph::truth(&handle(scm, "scm")?.0);
        put(out, Box::into_raw(Box::new(PcGraph(g))), "out")
    })
}

/// Treatment and outcome counts.
///
/// # Safety
/// `g` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pc_graph_shape(g: *const PcGraph, treatments: *mut usize, outcomes: *mut usize) -> PcStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        put(treatments, g.i_count, "treatments")?;
        put(outcomes, g.j_count, "outcomes")
    })
}

/// Whether the edge `A_i → Y_j` is present (zero-based indices).
///
/// # Safety
/// `g` must be a live handle; `present` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_graph_edge(g: *const PcGraph, i: usize, j: usize, present: *mut bool) -> PcStatus {
    guard(|| {
        let g = &handle(g, "graph")?.0;
        let e = g
            .adjacency
            .get(i)
            .and_then(|row| row.get(j))
            .ok_or_else(|| fail(PcStatus::OutOfRange, &format!("edge ({i}, {j}) out of range")))?;
        put(present, *e, "present")
    })
}

/// The graph as JSON (adjacency and p-values).
///
/// # Safety
/// `g` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_graph_to_json(g: *const PcGraph, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let s = serde_json::to_string(&handle(g, "graph")?.0).map_err(Error::from)?;
        put_string(out, s)
    })
}

/// Admissible proxies `(z, w)` for a target such as `A1,A3->Y1`.
///
/// # Safety
/// `g` must be a live handle; `target` NUL-terminated; `z`, `w` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_select_proxies(
    g: *const PcGraph,
    target: *const c_char,
    z: *mut *mut c_char,
    w: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let t: Target = str_arg(target, "target")?.parse()?;
        let a = select_proxies_by_name(&handle(g, "graph")?.0, &t.treated, &t.outcome)?;
        if z.is_null() || w.is_null() {
            return Err(fail(PcStatus::NullPointer, "z or w is NULL"));
        }
        put_string(z, a.z)?;
        put_string(w, a.w)
    })
}

/// # Safety
/// `g` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_graph_free(g: *mut PcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Fits both bridges for `target` with proxies `z`, `w` and evaluates the
/// curve on `grid_points` doses evenly spaced in `[lo, hi]` (the diagonal
/// for joint treatments). `use_q = false` gives the outcome-bridge-only
/// curve.
///
/// # Safety
/// `ds` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_estimate(
    ds: *const PcDataset,
    target: *const c_char,
    z: *const c_char,
    w: *const c_char,
    grid_points: usize,
    lo: f64,
    hi: f64,
    use_q: bool,
    out: *mut *mut PcCurve,
) -> PcStatus {
    guard(|| {
        let t: Target = str_arg(target, "target")?.parse()?;
        if grid_points == 0 || !(lo <= hi) {
            return Err(Error::Precondition("grid needs at least one point and lo <= hi".into()).into());
        }
        let assignment = ProxyAssignment {
            treated: t.treated.clone(),
            outcome: t.outcome.clone(),
            z: str_arg(z, "z")?.to_string(),
            w: str_arg(w, "w")?.to_string(),
            case: None,
        };
        let mut options = EstimateOptions::with_grid(default_grid(grid_points, lo, hi, t.treated.len()));
        options.use_q = use_q;
        let fit = fit_and_estimate(&handle(ds, "dataset")?.0, &assignment, &options)?;
        put(out, Box::into_raw(Box::new(PcCurve(fit))), "out")
    })
}

/// Number of grid points, or 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_curve_len(c: *const PcCurve) -> usize {
    c.as_ref().map_or(0, |c| c.0.curve.estimates.len())
}

/// Dose dimension, or 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_curve_dim(c: *const PcCurve) -> usize {
    c.as_ref().map_or(0, |c| c.0.curve.dose_dim())
}

/// Grid point `k`: writes `dim` dose values into `dose` and the estimate.
///
/// # Safety
/// `c` must be a live handle; `dose` must hold `pc_curve_dim(c)` values;
/// `estimate` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_curve_point(c: *const PcCurve, k: usize, dose: *mut f64, estimate: *mut f64) -> PcStatus {
    guard(|| {
        let curve = &handle(c, "curve")?.0.curve;
        let a = curve
            .grid
            .get(k)
            .ok_or_else(|| fail(PcStatus::OutOfRange, &format!("grid point {k} out of range")))?;
        if dose.is_null() {
            return Err(fail(PcStatus::NullPointer, "dose is NULL"));
        }
        std::slice::from_raw_parts_mut(dose, a.len()).copy_from_slice(a);
        put(estimate, curve.estimates[k], "estimate")
    })
}

/// Curve, assignment and bridge models as JSON.
///
/// # Safety
/// `c` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_curve_to_json(c: *const PcCurve, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let s = serde_json::to_string(&handle(c, "curve")?.0).map_err(Error::from)?;
        put_string(out, s)
    })
}

/// # Safety
/// `c` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_curve_free(c: *mut PcCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Runs a benchmark from a flat JSON config (or a previous report) and
/// returns the report JSON.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_benchmark(config_json: *const c_char, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        let config = RunConfig::from_json_str(str_arg(config_json, "config_json")?)?;
        put_string(out, run_benchmark(&config)?.to_json_string())
    })
}
