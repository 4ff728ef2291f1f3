//! C interface to trained catrank models.
//!
//! Every function returns a [`CatrankStatus`]. On failure the message of the
//! most recent error on the calling thread is available through
//! [`catrank_last_error_message`]. Models are opaque handles created by
//! [`catrank_model_load`] and released with [`catrank_model_free`].
//!
//! Strings are NUL-terminated UTF-8. Output pointers are written only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use catrank::corpus::{tokenize, Document, Side};
use catrank::eval::{dcg, Gain};
use catrank::ranker::{load_model, Mode, RankModel};
use catrank::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatrankStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Config = 4,
    Parse = 5,
    Data = 6,
    Shape = 7,
    Numerical = 8,
    Version = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatrankMode {
    TextOnly = 0,
    MetaOnly = 1,
    Joint = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatrankGain {
    /// `2^r - 1`
    Exponential = 0,
    /// `r`
    Linear = 1,
}

/// A document as seen by the scorer: raw text, tokenized on the Rust side,
/// plus its meta labels. `labels` may be null when `label_count` is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CatrankDocument {
    pub text: *const c_char,
    pub labels: *const *const c_char,
    pub label_count: usize,
}

/// Opaque model handle.
pub struct CatrankModel {
    inner: RankModel,
}

struct Failure {
    status: CatrankStatus,
    message: String,
}

impl Failure {
    fn new(status: CatrankStatus, message: impl Into<String>) -> Self {
        Failure { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => CatrankStatus::Io,
            Error::Config(_) => CatrankStatus::Config,
            Error::Parse { .. } => CatrankStatus::Parse,
            Error::Data(_) => CatrankStatus::Data,
            Error::Shape(_) => CatrankStatus::Shape,
            Error::Numerical(_) => CatrankStatus::Numerical,
            Error::Version { .. } => CatrankStatus::Version,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> CatrankStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (CatrankStatus::Ok, String::new()),
        Ok(Err(e)) => (e.status, e.message),
        Err(p) => {
            let what = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (CatrankStatus::Panic, format!("internal error: {what}"))
        }
    };
    LAST_ERROR.with(|m| *m.borrow_mut() = message);
    status
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(CatrankStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(CatrankStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn document(id: String, side: Side, d: &CatrankDocument) -> Result<Document, Failure> {
    let text = str_arg(d.text, "document text")?;
    let labels = slice_arg(d.labels, d.label_count, "document labels")?
        .iter()
        .map(|&l| str_arg(l, "document label").map(str::to_string))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Document::from_text(id, side, text, labels)?)
}

/// Copies `s` plus a NUL into `buf`, reporting the required size in `needed`.
unsafe fn write_string(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), Failure> {
    let size = s.len() + 1;
    if !needed.is_null() {
        *needed = size;
    }
    if len < size {
        return Err(Failure::new(CatrankStatus::BufferTooSmall, format!("buffer of {len} bytes, {size} needed")));
    }
    non_null(buf, "buffer")?;
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Size in bytes, including the NUL, of the last error message on this
/// thread; 1 when the last call succeeded.
#[no_mangle]
pub extern "C" fn catrank_last_error_length() -> usize {
    LAST_ERROR.with(|m| m.borrow().len() + 1)
}

/// Copies the last error message on this thread into `buf`. Does not reset
/// the stored message.
///
/// # Safety
/// `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn catrank_last_error_message(buf: *mut c_char, len: usize) -> CatrankStatus {
    let message = LAST_ERROR.with(|m| m.borrow().clone());
    let size = message.len() + 1;
    if buf.is_null() || len < size {
        return CatrankStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(message.as_ptr(), buf.cast::<u8>(), message.len());
    *buf.add(message.len()) = 0;
    CatrankStatus::Ok
}

/// Loads a model file written by `catrank train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn catrank_model_load(path: *const c_char, out: *mut *mut CatrankModel) -> CatrankStatus {
    run(|| {
        let path = str_arg(path, "path")?;
        non_null(out, "out")?;
        let (inner, _) = load_model(Path::new(path))?;
        *out = Box::into_raw(Box::new(CatrankModel { inner }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`catrank_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn catrank_model_free(model: *mut CatrankModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn catrank_model_mode(model: *const CatrankModel, out: *mut CatrankMode) -> CatrankStatus {
    run(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = match (*model).inner.mode() {
            Mode::TextOnly => CatrankMode::TextOnly,
            Mode::MetaOnly => CatrankMode::MetaOnly,
            Mode::Joint => CatrankMode::Joint,
        };
        Ok(())
    })
}

/// Relevance score of `doc` for `query`, in (-1, 1).
///
/// # Safety
/// All pointers must be valid; strings inside the documents NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn catrank_model_score(
    model: *const CatrankModel,
    query: *const CatrankDocument,
    doc: *const CatrankDocument,
    out: *mut f64,
) -> CatrankStatus {
    run(|| {
        non_null(model, "model")?;
        non_null(query, "query")?;
        non_null(doc, "doc")?;
        non_null(out, "out")?;
        let q = document("q".into(), Side::Query, &*query)?;
        let d = document("d".into(), Side::Target, &*doc)?;
        *out = (*model).inner.score(&q, &d)?;
        Ok(())
    })
}

/// Ranks `docs` for `query`. `order` receives indices into `docs` by
/// descending score, ties by ascending index; `scores` (optional) receives
/// the matching scores. Both must hold `count` elements.
///
/// # Safety
/// `docs` must point to `count` documents, `order` to `count` writable
/// elements, and `scores` to `count` elements or be null.
#[no_mangle]
pub unsafe extern "C" fn catrank_model_rank(
    model: *const CatrankModel,
    query: *const CatrankDocument,
    docs: *const CatrankDocument,
    count: usize,
    order: *mut usize,
    scores: *mut f64,
) -> CatrankStatus {
    run(|| {
        non_null(model, "model")?;
        non_null(query, "query")?;
        let q = document("q".into(), Side::Query, &*query)?;
        let docs = slice_arg(docs, count, "docs")?
            .iter()
            .enumerate()
            .map(|(i, d)| document(format!("{i:020}"), Side::Target, d))
            .collect::<Result<Vec<_>, _>>()?;
        if count > 0 {
            non_null(order, "order")?;
        }
        let refs: Vec<&Document> = docs.iter().collect();
        let ranking = (*model).inner.rank(&q, &refs)?;
        for (k, (id, score)) in ranking.iter().enumerate() {
            *order.add(k) = id.parse().expect("index id");
            if !scores.is_null() {
                *scores.add(k) = *score;
            }
        }
        Ok(())
    })
}

/// Tokenizes `text` as the ranker does and writes the tokens joined by
/// single spaces. `needed` (optional) receives the buffer size required.
///
/// # Safety
/// `text` must be NUL-terminated; `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn catrank_tokenize(text: *const c_char, buf: *mut c_char, len: usize, needed: *mut usize) -> CatrankStatus {
    run(|| {
        let text = str_arg(text, "text")?;
        write_string(&tokenize(text).join(" "), buf, len, needed)
    })
}

/// NDCG without cutoff. `ranked` holds the grades of a ranking in rank
/// order; `judged` holds the grades of every judged document of the query,
/// which determine the ideal ordering. Fails with `Data` when no judged
/// grade is positive.
///
/// # Safety
/// `ranked` and `judged` must point to `ranked_len` and `judged_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn catrank_ndcg(
    ranked: *const u8,
    ranked_len: usize,
    judged: *const u8,
    judged_len: usize,
    gain: CatrankGain,
    out: *mut f64,
) -> CatrankStatus {
    run(|| {
        let ranked = slice_arg(ranked, ranked_len, "ranked")?;
        let judged = slice_arg(judged, judged_len, "judged")?;
        non_null(out, "out")?;
        if let Some(g) = ranked.iter().chain(judged).find(|&&g| g > 63) {
            return Err(Failure::new(CatrankStatus::Data, format!("grade {g} out of range")));
        }
        let gain = match gain {
            CatrankGain::Exponential => Gain::Exponential,
            CatrankGain::Linear => Gain::Linear,
        };
        let mut ideal: Vec<u8> = judged.iter().copied().filter(|&g| g > 0).collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg = dcg(ideal, gain);
        if idcg == 0.0 {
            return Err(Failure::new(CatrankStatus::Data, "no judged document is relevant"));
        }
        *out = dcg(ranked.iter().copied(), gain) / idcg;
        Ok(())
    })
}
