//! C ABI over the `ragplan` library.
//!
//! Every fallible function returns a [`RagplanStatus`]. On failure a message
//! is stored per thread and can be read with [`ragplan_last_error`]. Strings
//! handed out by this library must be released with [`ragplan_string_free`];
//! handles with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ragplan::mmkp::{fptas_knapsack, select_context, solve_exact, solve_pareto_dp, MmkpInstance, MmkpParams};
use ragplan::retrieval::{retrieve, RetrievalParams, SparseIndex};
use ragplan::{
    compute_reward, hash_embed, load_corpus, load_queries, run_eval, ChunkStore, Error, MockNli, PipelineConfig,
    QueryRecord, RewardWeights,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RagplanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Validation = 5,
    SizeGuard = 6,
    Oracle = 7,
    Io = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RagplanSolver {
    ParetoDp = 0,
    Exact = 1,
}

/// Weights applied to (entail, neutral, contradict) probabilities.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RagplanRewardWeights {
    pub w_ent: f64,
    pub w_neu: f64,
    pub w_con: f64,
}

/// A loaded corpus with its sparse index.
pub struct RagplanCorpus {
    store: ChunkStore,
    index: SparseIndex,
}

/// A validated MMKP instance.
pub struct RagplanInstance {
    inner: MmkpInstance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: RagplanStatus,
    message: String,
}

impl Failure {
    fn new(status: RagplanStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::RawIo(_) => RagplanStatus::Io,
            Error::Parse { .. } | Error::Json(_) => RagplanStatus::Parse,
            Error::Validation(_) => RagplanStatus::Validation,
            Error::SizeGuard { .. } => RagplanStatus::SizeGuard,
            Error::Oracle(_) => RagplanStatus::Oracle,
            Error::DimensionMismatch { .. } | Error::RankingMismatch(_) | Error::InvalidArgument(_) => {
                RagplanStatus::InvalidArgument
            }
            Error::Search(_) => RagplanStatus::Internal,
        };
        Self::new(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::new(RagplanStatus::Parse, format!("json: {e}"))
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RagplanStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure::new(RagplanStatus::Internal, format!("internal error: {msg}")))
    });
    match outcome {
        Ok(()) => RagplanStatus::Ok,
        Err(f) => {
            set_last_error(&f.message);
            f.status
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(RagplanStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(RagplanStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(RagplanStatus::Internal, "output contains a NUL byte"))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn ragplan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into this library on the
/// same thread. Do not free it.
#[no_mangle]
pub extern "C" fn ragplan_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ragplan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default reward weights (1, -0.2, -2).
#[no_mangle]
pub extern "C" fn ragplan_reward_weights_default() -> RagplanRewardWeights {
    let w = RewardWeights::default();
    RagplanRewardWeights { w_ent: w.w_ent, w_neu: w.w_neu, w_con: w.w_con }
}

fn new_corpus(store: ChunkStore, max_features: usize) -> *mut RagplanCorpus {
    let max_features = if max_features == 0 { RetrievalParams::default().max_features } else { max_features };
    let index = SparseIndex::build(&store, max_features);
    Box::into_raw(Box::new(RagplanCorpus { store, index }))
}

/// Loads a JSONL corpus file. Chunks without an embedding get a hashed one
/// of dimension `dim`. `max_features` of 0 selects the default vocabulary cap.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ragplan_corpus_load(
    path: *const c_char,
    dim: usize,
    max_features: usize,
    out: *mut *mut RagplanCorpus,
) -> RagplanStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let store = load_corpus(Path::new(path), dim)?;
        *out = new_corpus(store, max_features);
        Ok(())
    })
}

/// Same as [`ragplan_corpus_load`] but reads JSONL from memory.
///
/// # Safety
/// `jsonl` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ragplan_corpus_parse(
    jsonl: *const c_char,
    dim: usize,
    max_features: usize,
    out: *mut *mut RagplanCorpus,
) -> RagplanStatus {
    guard(|| {
        let text = str_arg(jsonl, "jsonl")?;
        let out = out_arg(out, "out")?;
        let store = ragplan::corpus::parse_corpus(text, dim)?;
        *out = new_corpus(store, max_features);
        Ok(())
    })
}

/// Number of chunks, or 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ragplan_corpus_len(corpus: *const RagplanCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.store.len())
}

/// # Safety
/// `corpus` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ragplan_corpus_free(corpus: *mut RagplanCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

fn query_record(text: &str) -> QueryRecord {
    QueryRecord { id: "ffi".into(), text: text.into(), gold_answers: vec![], gold_passage_ids: vec![] }
}

/// Hybrid retrieval of the top `n` chunks for `query`, written as a JSON
/// array of `{chunk_id, dense_rank, sparse_rank, fusion_score, dense_sim}`.
///
/// # Safety
/// `corpus` must be a live handle, `query` a NUL-terminated string and
/// `out_json` a valid pointer. Free the result with [`ragplan_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ragplan_retrieve(
    corpus: *const RagplanCorpus,
    query: *const c_char,
    n: usize,
    out_json: *mut *mut c_char,
) -> RagplanStatus {
    guard(|| {
        let corpus = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let query = str_arg(query, "query")?;
        let out = out_arg(out_json, "out_json")?;
        let params = RetrievalParams { n, ..RetrievalParams::default() };
        let hits = retrieve(&query_record(query), &corpus.store, &corpus.index, &params)?;
        *out = into_c_string(serde_json::to_string(&hits)?)?;
        Ok(())
    })
}

/// Retrieves `n` candidates and picks a budgeted, non-redundant context.
///
/// `params_json` may be NULL for defaults, or a JSON object with any of
/// `c_token`, `c_red`, `alpha`, `beta`, `tau`, `lambda_red`. The result is
/// `{"context": [...], "total_value": v, "total_cost": {...}}`.
///
/// # Safety
/// Pointers as in [`ragplan_retrieve`]; `params_json` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ragplan_select_context(
    corpus: *const RagplanCorpus,
    query: *const c_char,
    n: usize,
    params_json: *const c_char,
    out_json: *mut *mut c_char,
) -> RagplanStatus {
    guard(|| {
        let corpus = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let query = str_arg(query, "query")?;
        let out = out_arg(out_json, "out_json")?;
        let params: MmkpParams = if params_json.is_null() {
            MmkpParams::default()
        } else {
            serde_json::from_str(str_arg(params_json, "params_json")?)?
        };
        let rp = RetrievalParams { n, ..RetrievalParams::default() };
        let hits = retrieve(&query_record(query), &corpus.store, &corpus.index, &rp)?;
        let sel = select_context(&hits, &corpus.store, &params)?;
        let body = serde_json::json!({
            "context": sel.context,
            "total_value": sel.solution.total_value,
            "total_cost": sel.solution.total_cost,
        });
        *out = into_c_string(body.to_string())?;
        Ok(())
    })
}

/// Parses and validates an MMKP instance from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ragplan_instance_parse(json: *const c_char, out: *mut *mut RagplanInstance) -> RagplanStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let inner = MmkpInstance::from_json(text)?;
        *out = Box::into_raw(Box::new(RagplanInstance { inner }));
        Ok(())
    })
}

/// # Safety
/// `instance` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ragplan_instance_free(instance: *mut RagplanInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Solves an instance and writes the solution as JSON with `selected`,
/// `total_value`, `total_cost` and `picks`.
///
/// # Safety
/// `instance` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ragplan_solve(
    instance: *const RagplanInstance,
    solver: RagplanSolver,
    out_json: *mut *mut c_char,
) -> RagplanStatus {
    guard(|| {
        let inst = &instance.as_ref().ok_or_else(|| null("instance"))?.inner;
        let out = out_arg(out_json, "out_json")?;
        let sol = match solver {
            RagplanSolver::ParetoDp => solve_pareto_dp(inst)?,
            RagplanSolver::Exact => solve_exact(inst)?,
        };
        *out = into_c_string(serde_json::to_string(&sol)?)?;
        Ok(())
    })
}

/// Approximate 0/1 knapsack with value at least `(1 - eps)` of optimal.
///
/// Selected indices are written ascending into `out_selected`, which must
/// hold `n` entries; their count goes to `out_count` and the total value to
/// `out_value`.
///
/// # Safety
/// `values` and `weights` must point to `n` readable doubles, `out_selected`
/// to `n` writable entries, and the scalar outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn ragplan_fptas(
    values: *const f64,
    weights: *const f64,
    n: usize,
    capacity: f64,
    eps: f64,
    out_selected: *mut usize,
    out_count: *mut usize,
    out_value: *mut f64,
) -> RagplanStatus {
    guard(|| {
        let values = slice_arg(values, n, "values")?;
        let weights = slice_arg(weights, n, "weights")?;
        let count = out_arg(out_count, "out_count")?;
        let value = out_arg(out_value, "out_value")?;
        if n > 0 && out_selected.is_null() {
            return Err(null("out_selected"));
        }
        let sol = fptas_knapsack(values, weights, capacity, eps)?;
        for (i, idx) in sol.selected.iter().enumerate() {
            *out_selected.add(i) = *idx;
        }
        *count = sol.selected.len();
        *value = sol.value;
        Ok(())
    })
}

/// Writes the unit-norm hashed bag-of-words embedding of `text` into
/// `out`, which must hold `dim` doubles.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` must point to `dim`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ragplan_hash_embed(text: *const c_char, dim: usize, out: *mut f64) -> RagplanStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        if dim == 0 {
            return Err(Failure::new(RagplanStatus::InvalidArgument, "dim must be positive"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let v = hash_embed(text, dim);
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&v);
        Ok(())
    })
}

/// Faithfulness reward of `answer` against `n_evidence` evidence strings,
/// judged by the built-in lexical verifier. `weights` may be NULL for the
/// defaults.
///
/// # Safety
/// `answer` must be a NUL-terminated string, `evidence` must point to
/// `n_evidence` NUL-terminated strings, `weights` must be NULL or valid and
/// `out_reward` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ragplan_reward(
    answer: *const c_char,
    evidence: *const *const c_char,
    n_evidence: usize,
    weights: *const RagplanRewardWeights,
    out_reward: *mut f64,
) -> RagplanStatus {
    guard(|| {
        let answer = str_arg(answer, "answer")?;
        let out = out_arg(out_reward, "out_reward")?;
        let ptrs = slice_arg(evidence, n_evidence, "evidence")?;
        let evidence = ptrs
            .iter()
            .map(|&p| str_arg(p, "evidence entry").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let w = match weights.as_ref() {
            Some(w) => RewardWeights { w_ent: w.w_ent, w_neu: w.w_neu, w_con: w.w_con },
            None => RewardWeights::default(),
        };
        w.validate()?;
        *out = compute_reward(answer, &evidence, &w, &MockNli::default())?;
        Ok(())
    })
}

/// Runs the full evaluation with mock oracles or the remote endpoints named
/// in the config, and writes the JSONL report.
///
/// `config_toml` may be NULL for the default configuration.
///
/// # Safety
/// String arguments must be NUL-terminated (`config_toml` may be NULL) and
/// `out_jsonl` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ragplan_eval(
    config_toml: *const c_char,
    corpus_path: *const c_char,
    queries_path: *const c_char,
    out_jsonl: *mut *mut c_char,
) -> RagplanStatus {
    guard(|| {
        let config = if config_toml.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::parse(str_arg(config_toml, "config_toml")?)?
        };
        let corpus_path = str_arg(corpus_path, "corpus_path")?;
        let queries_path = str_arg(queries_path, "queries_path")?;
        let out = out_arg(out_jsonl, "out_jsonl")?;
        let store = load_corpus(Path::new(corpus_path), config.dim)?;
        let queries = load_queries(Path::new(queries_path))?;
        let report = run_eval(&config, &store, &queries)?;
        *out = into_c_string(report.to_jsonl()?)?;
        Ok(())
    })
}
