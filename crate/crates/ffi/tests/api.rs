use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use catrank::corpus::{Document, Side, Vocabulary};
use catrank::ranker::{save_model, Mode, ModelMetadata, ModelSpec, RankModel};
use catrank::skipgram::EmbeddingMatrix;
use catrank_ffi::*;

fn embeddings(tokens: &[&str], dim: usize, salt: f64) -> Arc<EmbeddingMatrix> {
    let vocab = Vocabulary::from_parts(tokens.iter().map(|t| t.to_string()).collect(), vec![1; tokens.len()]).unwrap();
    let values = (0..tokens.len() * dim).map(|i| ((i as f64 + salt) * 0.37).sin()).collect();
    Arc::new(EmbeddingMatrix::new(vocab, dim, values).unwrap())
}

fn model(mode: Mode) -> RankModel {
    let spec = ModelSpec {
        mode,
        text_window: 2,
        text_filters: 5,
        cat_window: 1,
        cat_filters: 3,
        hidden: vec![8],
        ..Default::default()
    };
    let words = embeddings(&["apple", "banana", "cherry", "date", "elder"], 4, 0.0);
    let cats = embeddings(&["c:fruit", "c:tree", "c:red"], 3, 1.5);
    RankModel::new(spec, Some(words), Some(cats), 11).unwrap()
}

fn saved(mode: Mode, dir: &Path) -> CString {
    let path = dir.join(format!("{mode}.model"));
    save_model(&path, &model(mode), &ModelMetadata::default()).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; catrank_last_error_length()];
    assert_eq!(unsafe { catrank_last_error_message(buf.as_mut_ptr(), buf.len()) }, CatrankStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

struct Doc {
    text: CString,
    labels: Vec<CString>,
    ptrs: Vec<*const c_char>,
}

impl Doc {
    fn new(text: &str, labels: &[&str]) -> Self {
        let labels: Vec<CString> = labels.iter().map(|l| CString::new(*l).unwrap()).collect();
        let ptrs = labels.iter().map(|l| l.as_ptr()).collect();
        Doc { text: CString::new(text).unwrap(), labels, ptrs }
    }

    fn raw(&self) -> CatrankDocument {
        CatrankDocument {
            text: self.text.as_ptr(),
            labels: if self.labels.is_empty() { ptr::null() } else { self.ptrs.as_ptr() },
            label_count: self.labels.len(),
        }
    }

    fn rust(&self, id: &str, side: Side) -> Document {
        let labels: Vec<String> = self.labels.iter().map(|l| l.to_str().unwrap().to_string()).collect();
        Document::from_text(id, side, self.text.to_str().unwrap(), labels).unwrap()
    }
}

fn load(path: &CString) -> *mut CatrankModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { catrank_model_load(path.as_ptr(), &mut m) }, CatrankStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn score_and_rank_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = saved(Mode::Joint, dir.path());
    let m = load(&path);
    let mut mode = CatrankMode::TextOnly;
    assert_eq!(unsafe { catrank_model_mode(m, &mut mode) }, CatrankStatus::Ok);
    assert_eq!(mode, CatrankMode::Joint);

    let reference = model(Mode::Joint);
    let query = Doc::new("Apple banana", &["c:fruit"]);
    let docs = [
        Doc::new("cherry date", &["c:tree"]),
        Doc::new("banana apple elder", &["c:fruit", "c:red"]),
        Doc::new("date", &["c:red"]),
        Doc::new("cherry date", &["c:tree"]),
    ];
    let raw: Vec<CatrankDocument> = docs.iter().map(Doc::raw).collect();

    let mut score = 0.0;
    assert_eq!(unsafe { catrank_model_score(m, &query.raw(), &raw[1], &mut score) }, CatrankStatus::Ok);
    let want = reference.score(&query.rust("q", Side::Query), &docs[1].rust("d", Side::Target)).unwrap();
    assert_eq!(score, want);

    let mut order = [usize::MAX; 4];
    let mut scores = [0.0; 4];
    let status = unsafe { catrank_model_rank(m, &query.raw(), raw.as_ptr(), raw.len(), order.as_mut_ptr(), scores.as_mut_ptr()) };
    assert_eq!(status, CatrankStatus::Ok);
    let mut sorted = order;
    sorted.sort();
    assert_eq!(sorted, [0, 1, 2, 3]);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    // Identical documents 0 and 3 tie and keep index order.
    let p0 = order.iter().position(|&i| i == 0).unwrap();
    let p3 = order.iter().position(|&i| i == 3).unwrap();
    assert_eq!(p3, p0 + 1);
    for (k, &i) in order.iter().enumerate() {
        let want = reference.score(&query.rust("q", Side::Query), &docs[i].rust("d", Side::Target)).unwrap();
        assert!((scores[k] - want).abs() < 1e-12);
    }
    unsafe { catrank_model_free(m) };
}

#[test]
fn rank_of_nothing_is_ok() {
    let dir = tempfile::tempdir().unwrap();
    let m = load(&saved(Mode::TextOnly, dir.path()));
    let q = Doc::new("apple", &[]);
    let status = unsafe { catrank_model_rank(m, &q.raw(), ptr::null(), 0, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(status, CatrankStatus::Ok);
    unsafe { catrank_model_free(m) };
}

#[test]
fn meta_model_needs_known_labels() {
    let dir = tempfile::tempdir().unwrap();
    let m = load(&saved(Mode::MetaOnly, dir.path()));
    let q = Doc::new("apple", &["c:unknown"]);
    let d = Doc::new("apple", &["c:fruit"]);
    let mut score = 0.0;
    assert_eq!(unsafe { catrank_model_score(m, &q.raw(), &d.raw(), &mut score) }, CatrankStatus::Data);
    assert!(last_error().contains("no meta label"), "{}", last_error());
    unsafe { catrank_model_free(m) };
}

#[test]
fn load_errors() {
    let mut m = ptr::null_mut();
    let missing = CString::new("/nonexistent/dir/x.model").unwrap();
    assert_eq!(unsafe { catrank_model_load(missing.as_ptr(), &mut m) }, CatrankStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("/nonexistent/dir/x.model"));

    assert_eq!(unsafe { catrank_model_load(ptr::null(), &mut m) }, CatrankStatus::NullPointer);
    assert_eq!(last_error(), "path is null");

    let bad = [0xffu8 as c_char, 0];
    assert_eq!(unsafe { catrank_model_load(bad.as_ptr(), &mut m) }, CatrankStatus::InvalidUtf8);

    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.model");
    std::fs::write(&garbage, b"not a model").unwrap();
    let garbage = CString::new(garbage.to_str().unwrap()).unwrap();
    let status = unsafe { catrank_model_load(garbage.as_ptr(), &mut m) };
    assert!(matches!(status, CatrankStatus::Parse | CatrankStatus::Data), "{status:?}");
}

#[test]
fn success_clears_the_error() {
    let mut m = ptr::null_mut();
    unsafe { catrank_model_load(ptr::null(), &mut m) };
    assert!(catrank_last_error_length() > 1);
    let text = CString::new("a").unwrap();
    let mut buf = [0 as c_char; 4];
    assert_eq!(unsafe { catrank_tokenize(text.as_ptr(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, CatrankStatus::Ok);
    assert_eq!(catrank_last_error_length(), 1);
}

#[test]
fn tokenize_reports_needed_size() {
    let text = CString::new("Hello, World! ümlaut").unwrap();
    let mut needed = 0;
    let mut small = [0 as c_char; 4];
    let status = unsafe { catrank_tokenize(text.as_ptr(), small.as_mut_ptr(), small.len(), &mut needed) };
    assert_eq!(status, CatrankStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { catrank_tokenize(text.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut needed) }, CatrankStatus::Ok);
    let got = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert_eq!(got, catrank::corpus::tokenize("Hello, World! ümlaut").join(" "));
    assert_eq!(needed, got.len() + 1);
}

#[test]
fn ndcg_hand_cases() {
    let mut out = 0.0;
    let ranked = [0u8, 2];
    let judged = [2u8];
    let s = unsafe { catrank_ndcg(ranked.as_ptr(), 2, judged.as_ptr(), 1, CatrankGain::Exponential, &mut out) };
    assert_eq!(s, CatrankStatus::Ok);
    assert!((out - 1.0 / 3f64.log2()).abs() < 1e-15);

    let ranked = [1u8, 2];
    let judged = [2u8, 1];
    unsafe { catrank_ndcg(ranked.as_ptr(), 2, judged.as_ptr(), 2, CatrankGain::Linear, &mut out) };
    let want = (1.0 + 2.0 / 3f64.log2()) / (2.0 + 1.0 / 3f64.log2());
    assert!((out - want).abs() < 1e-15);

    let zeros = [0u8; 3];
    let s = unsafe { catrank_ndcg(zeros.as_ptr(), 3, zeros.as_ptr(), 3, CatrankGain::Exponential, &mut out) };
    assert_eq!(s, CatrankStatus::Data);
    let s = unsafe { catrank_ndcg(ptr::null(), 2, judged.as_ptr(), 2, CatrankGain::Exponential, &mut out) };
    assert_eq!(s, CatrankStatus::NullPointer);
}

#[test]
fn free_null_is_a_no_op() {
    unsafe { catrank_model_free(ptr::null_mut()) };
}

#[test]
fn header_declares_every_export() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/catrank.h")).unwrap();
    let source = std::fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 8);
    for name in exports {
        assert!(header.contains(&format!(" {name}(")), "{name} missing from the header");
    }
}
