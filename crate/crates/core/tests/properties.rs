use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use catrank::config::ExperimentConfig;
use catrank::corpus::{
    build_training_pairs, category_overlap, overlap_histogram, tokenize, Document, Judgments, PairConfig, Side, TranslationMap,
    Vocabulary,
};
use catrank::encoder::{encode, Activation, ConvParams};
use catrank::ensemble::{grid_search_alpha, ComponentScores};
use catrank::eval::{ndcg, randomization_test, sort_run, Gain};
use catrank::graph_embed::{random_walks, train_category_embeddings, CategoryGraph, WalkConfig};
use catrank::pipeline::{self, Inputs};
use catrank::ranker::{hinge, DocFeatures, Mode, RankModel};
use catrank::retrieval::{preselect, weighted_rerank, Candidate, CandidateSet, InvertedIndex, Provenance};
use catrank::skipgram::{pair_gradients, pair_objective, train_sgns, NoiseSampler, SgnsConfig};
use catrank::synth::{generate, SynthConfig};

fn vecs(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), n)
}

fn ids(r: &[(String, f64)]) -> Vec<String> {
    r.iter().map(|(d, _)| d.clone()).collect()
}

fn rows(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(Vec::as_slice).collect()
}

fn labels(v: &[u8]) -> BTreeSet<String> {
    v.iter().map(|i| format!("c{i}")).collect()
}

fn doc(id: &str, side: Side, tokens: &[&str], cats: &[u8]) -> Document {
    Document::new(id, side, tokens.iter().map(|t| t.to_string()).collect(), labels(cats)).unwrap()
}

fn judgments_strategy() -> impl Strategy<Value = Judgments> {
    prop::collection::vec((0u8..4, 0u8..12, 0u8..4), 1..40).prop_map(|v| {
        let mut j = Judgments::new();
        for (q, d, g) in v {
            let _ = j.insert(&format!("q{q}"), &format!("d{d:02}"), g);
        }
        j
    })
}

// ---------------------------------------------------------------- corpus

proptest! {
    #[test]
    fn tokenize_is_idempotent(s in "\\PC{0,60}") {
        let once = tokenize(&s);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn training_pairs_deterministic_and_ordered(j in judgments_strategy(), seed in 0u64..1000) {
        let pool: Vec<String> = (0..12).map(|d| format!("d{d:02}")).collect();
        let pool: Vec<&str> = pool.iter().map(String::as_str).collect();
        let cfg = PairConfig::default();
        let a = build_training_pairs(&j, &pool, &cfg, seed).unwrap();
        let b = build_training_pairs(&j, &pool, &cfg, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for p in &a.pairs {
            prop_assert!(p.pos_grade > p.neg_grade);
            prop_assert_eq!(p.pos_grade, j.grade(&p.query_id, &p.pos_id));
            prop_assert_eq!(p.neg_grade, j.grade(&p.query_id, &p.neg_id));
        }
    }

    #[test]
    fn overlap_is_one_for_covered_documents(d in prop::collection::btree_set(0u8..20, 1..6), extra in prop::collection::vec(0u8..40, 0..6)) {
        let dl: Vec<u8> = d.iter().copied().collect();
        let mut ql = dl.clone();
        ql.extend(extra);
        let q = doc("q", Side::Query, &[], &ql);
        let t = doc("t", Side::Target, &[], &dl);
        prop_assert_eq!(category_overlap(&q, &t, &TranslationMap::new()).unwrap(), 1.0);
    }

    #[test]
    fn overlap_histogram_sums_to_100(pairs in prop::collection::vec((prop::collection::vec(0u8..10, 0..5), prop::collection::vec(0u8..10, 1..5)), 1..30)) {
        let docs: Vec<(Document, Document)> = pairs
            .iter()
            .enumerate()
            .map(|(i, (q, t))| (doc(&format!("q{i}"), Side::Query, &["x"], q), doc(&format!("t{i}"), Side::Target, &[], t)))
            .collect();
        let refs: Vec<(&Document, &Document, u8)> = docs.iter().map(|(q, t)| (q, t, 1)).collect();
        let h = overlap_histogram(&refs, &TranslationMap::new()).unwrap();
        prop_assert_eq!(h.total, pairs.len());
        prop_assert!((h.percentages.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }
}

// ---------------------------------------------------------------- skip-gram

proptest! {
    #[test]
    fn sgns_pair_gradient_matches_finite_differences(v in vecs(1, 6), u in vecs(1, 6), noise in vecs(3, 6)) {
        let h = 1e-6;
        let nref: Vec<&[f64]> = noise.iter().map(Vec::as_slice).collect();
        let (dc, du, dn) = pair_gradients(&v[0], &u[0], &nref);
        let fd = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
        for i in 0..6 {
            let num = fd(&|e| { let mut c = v[0].clone(); c[i] += e; pair_objective(&c, &u[0], &nref) });
            prop_assert!((num - dc[i]).abs() < 1e-5);
            let num = fd(&|e| { let mut c = u[0].clone(); c[i] += e; pair_objective(&v[0], &c, &nref) });
            prop_assert!((num - du[i]).abs() < 1e-5);
            for k in 0..3 {
                let num = fd(&|e| {
                    let mut n = noise.clone();
                    n[k][i] += e;
                    let r: Vec<&[f64]> = n.iter().map(Vec::as_slice).collect();
                    pair_objective(&v[0], &u[0], &r)
                });
                prop_assert!((num - dn[k][i]).abs() < 1e-5);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn noise_sampler_follows_three_quarter_power(counts in prop::collection::vec(1u64..1000, 10), seed in 0u64..1000) {
        let s = NoiseSampler::new(&counts).unwrap();
        let total: f64 = counts.iter().map(|&c| (c as f64).powf(0.75)).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = [0usize; 10];
        let draws = 1_000_000;
        for _ in 0..draws {
            hits[s.sample(&mut rng)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let want = (c as f64).powf(0.75) / total;
            prop_assert!((s.probabilities()[i] - want).abs() < 1e-12);
            prop_assert!((hits[i] as f64 / draws as f64 - want).abs() < 0.01);
        }
    }

    #[test]
    fn sgns_is_seeded_and_norm_bounded(seqs in prop::collection::vec(prop::collection::vec(0usize..8, 2..12), 1..8), seed in 0u64..100) {
        let vocab = Vocabulary::from_parts((0..8).map(|i| format!("t{i}")).collect(), vec![3; 8]).unwrap();
        let cfg = SgnsConfig { dim: 6, epochs: 3, initial_lr: 0.5, max_norm: 0.3, subsample_threshold: 0.0, seed, ..Default::default() };
        let a = train_sgns(&seqs, vocab.clone(), &cfg).unwrap();
        let b = train_sgns(&seqs, vocab, &cfg).unwrap();
        prop_assert_eq!(a.values(), b.values());
        for r in 0..a.rows() {
            let norm = a.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm <= cfg.max_norm + 1e-12);
        }
    }

    #[test]
    fn walks_follow_edges(edges in prop::collection::vec((0u8..15, 0u8..15), 1..40), seed in 0u64..100) {
        let named: Vec<(String, String)> = edges.iter().map(|(a, b)| (format!("n{a}"), format!("n{b}"))).collect();
        let g = CategoryGraph::build(named.iter().map(|(a, b)| (a.as_str(), b.as_str())), []).unwrap();
        let cfg = WalkConfig { walk_length: 10, walks_per_node: 2, seed };
        let walks = random_walks(&g, &cfg).unwrap();
        prop_assert_eq!(&walks, &random_walks(&g, &cfg).unwrap());
        prop_assert_eq!(walks.len(), 2 * g.node_count());
        for w in &walks {
            for s in w.windows(2) {
                prop_assert!(g.neighbors(s[0]).contains(&s[1]));
            }
        }
        let sg = SgnsConfig { dim: 4, epochs: 1, ..Default::default() };
        match train_category_embeddings(&g, &cfg, &sg) {
            Ok(m) => prop_assert_eq!(m.rows(), g.node_count()),
            // too few nodes to draw the negatives from
            Err(e) => prop_assert!(g.node_count() <= sg.negatives && matches!(e, catrank::Error::Data(_))),
        }
    }
}

// ---------------------------------------------------------------- encoder

proptest! {
    #[test]
    fn encoder_output_is_tanh_bounded(x in vecs(5, 3), window in 1usize..5, seed in 0u64..1000, scale in 0.1f64..50.0) {
        let mut p = ConvParams::glorot(window, 3, 4, &mut ChaCha8Rng::seed_from_u64(seed));
        p.weights.iter_mut().for_each(|w| *w *= scale);
        let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        for c in encode(&rows, &p).unwrap().c {
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn identity_encoder_is_linear(x in vecs(6, 3), y in vecs(6, 3), a in -3.0f64..3.0, b in -3.0f64..3.0, window in 1usize..5, seed in 0u64..1000) {
        let mut p = ConvParams::glorot(window, 3, 4, &mut ChaCha8Rng::seed_from_u64(seed));
        p.activation = Activation::Identity;
        let mix: Vec<Vec<f64>> = x.iter().zip(&y).map(|(r, s)| r.iter().zip(s).map(|(u, v)| a * u + b * v).collect()).collect();
        let ex = encode(&rows(&x), &p).unwrap().c;
        let ey = encode(&rows(&y), &p).unwrap().c;
        let em = encode(&rows(&mix), &p).unwrap().c;
        for o in 0..4 {
            prop_assert!((em[o] - (a * ex[o] + b * ey[o])).abs() < 1e-9);
        }
    }
}

// ---------------------------------------------------------------- ranker

proptest! {
    #[test]
    fn hinge_nonnegative_and_zero_past_margin(sp in -1.0f64..1.0, sn in -1.0f64..1.0) {
        let l = hinge(sp, sn);
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, sp - sn >= 1.0);
    }
}

fn tiny_inputs() -> Inputs {
    Inputs::from_synth(&generate(&SynthConfig::small()).unwrap()).unwrap()
}

fn tiny_config() -> ExperimentConfig {
    let mut c = pipeline::desk_config();
    c.words.dim = 8;
    c.words.epochs = 2;
    c.categories.dim = 6;
    c.categories.epochs = 2;
    c.model.text_filters = 6;
    c.model.cat_filters = 4;
    c.model.hidden = vec![8];
    c.train.epochs = 4;
    c.train.patience = 2;
    c.experiment.dev_candidates = 20;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn training_is_deterministic_and_keeps_best_epoch(seed in 0u64..1000) {
        let inputs = tiny_inputs();
        let cfg = tiny_config();
        let vocab = pipeline::word_vocab(&inputs, &cfg).unwrap();
        let words = Arc::new(pipeline::pretrain_words(&inputs, vocab, &cfg).unwrap());
        let cats = Arc::new(pipeline::pretrain_categories(&inputs, &cfg).unwrap());
        let run = || pipeline::train_model(&inputs, Some(words.clone()), Some(cats.clone()), Mode::Joint, &cfg, seed).unwrap();
        let (m1, log1) = run();
        let (m2, log2) = run();
        prop_assert_eq!(&log1, &log2);
        prop_assert_eq!(m1.parameters(), m2.parameters());
        for e in &log1.epochs {
            prop_assert!(log1.best_dev_ndcg >= e.dev_ndcg);
        }
        prop_assert_eq!(log1.epochs[log1.best_epoch - 1].dev_ndcg, log1.best_dev_ndcg);
    }
}

fn small_model(mode: Mode, seed: u64) -> RankModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = |prefix: &str, n: usize, dim: usize| {
        use rand::Rng;
        let vocab = Vocabulary::from_parts((0..n).map(|i| format!("{prefix}{i}")).collect(), vec![1; n]).unwrap();
        Arc::new(catrank::skipgram::EmbeddingMatrix::new(vocab, dim, (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
    };
    let words = matrix("w", 10, 4);
    let cats = matrix("c", 6, 3);
    let spec = catrank::ranker::ModelSpec { mode, text_filters: 5, cat_filters: 3, hidden: vec![6], ..Default::default() };
    RankModel::new(spec, Some(words), Some(cats), seed).unwrap()
}

proptest! {
    #[test]
    fn text_only_ignores_categories(
        seed in 0u64..1000,
        qt in prop::collection::vec(0u8..10, 1..6),
        dt in prop::collection::vec(0u8..10, 1..6),
        qc in prop::collection::vec(0u8..6, 0..4),
        dc in prop::collection::vec(0u8..6, 0..4),
    ) {
        let m = small_model(Mode::TextOnly, seed);
        let words = |v: &[u8]| v.iter().map(|i| format!("w{i}")).collect::<Vec<_>>();
        let mk = |id: &str, side, t: &[u8], c: &[u8]| {
            Document::new(id, side, words(t), c.iter().map(|i| format!("c{i}")).collect()).unwrap()
        };
        let plain = m.score(&mk("q", Side::Query, &qt, &[]), &mk("d", Side::Target, &dt, &[])).unwrap();
        let with = m.score(&mk("q", Side::Query, &qt, &qc), &mk("d", Side::Target, &dt, &dc)).unwrap();
        prop_assert_eq!(plain.to_bits(), with.to_bits());
    }

    #[test]
    fn dropout_only_acts_in_training(seed in 0u64..1000, dseed in 0u64..1000) {
        let m = small_model(Mode::Joint, seed);
        let f = |t: Vec<usize>, c: Vec<usize>| DocFeatures { text: t, cats: c };
        let (q, p, n) = (f(vec![1, 2, 3], vec![0]), f(vec![4, 5], vec![1, 2]), f(vec![6], vec![3]));
        let batch = [(&q, &p, &n)];
        let eval = m.batch_loss(&batch).unwrap();
        prop_assert_eq!(eval, m.batch_loss_and_gradients(&batch, None).unwrap().0);
        prop_assert_eq!(eval, m.batch_loss(&batch).unwrap());
        let eq = m.encode_features(&q).unwrap();
        let ep = m.encode_features(&p).unwrap();
        prop_assert_eq!(m.score_encoded(&eq, &ep), m.score_encoded(&eq, &ep));
        // with dropout the training loss is generally different
        let (dropped, _) = m.batch_loss_and_gradients(&batch, Some((0.5, dseed))).unwrap();
        prop_assert!(dropped.is_finite());
    }
}

// ---------------------------------------------------------------- retrieval

fn token_docs() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..8, 0..10), 2..12)
}

fn target_docs(tokens: &[Vec<u8>]) -> Vec<Document> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("d{i:02}"), Side::Target, t.iter().map(|x| format!("t{x}")).collect(), labels(&[0])).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn tfidf_monotone_in_tf(docs in token_docs(), term in 0u8..8, extra in 1usize..4) {
        let mut docs = target_docs(&docs);
        let mut boosted = docs[0].tokens.clone();
        boosted.extend(std::iter::repeat_n(format!("t{term}"), extra));
        docs.push(Document::new("zz", Side::Target, boosted, labels(&[0])).unwrap());
        let index = InvertedIndex::build(&docs).unwrap();
        let q = vec![format!("t{term}")];
        prop_assert!(index.score(&q, "zz").unwrap() > index.score(&q, "d00").unwrap());
    }

    #[test]
    fn preselect_keeps_every_relevant_document(docs in token_docs(), query in prop::collection::vec(0u8..8, 1..5), grades in prop::collection::vec(0u8..3, 12), n in 1usize..6) {
        let docs = target_docs(&docs);
        let index = InvertedIndex::build(&docs).unwrap();
        let mut j = Judgments::new();
        for (d, g) in docs.iter().zip(&grades) {
            j.insert("q", &d.id, *g).unwrap();
        }
        let q = Document::new("q", Side::Query, query.iter().map(|x| format!("t{x}")).collect(), labels(&[0])).unwrap();
        let set = preselect(&index, &q, n, &j).unwrap();
        let got: BTreeSet<&str> = set.doc_ids().collect();
        for (d, _) in j.relevant("q") {
            prop_assert!(got.contains(d));
        }
        prop_assert!(set.candidates.iter().filter(|c| c.provenance == Provenance::Preselected).count() <= n);
    }

    #[test]
    fn index_round_trips(docs in token_docs(), query in prop::collection::vec(0u8..8, 1..5)) {
        let docs = target_docs(&docs);
        let index = InvertedIndex::build(&docs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.tsv");
        index.save(&path).unwrap();
        let back = InvertedIndex::load(&path).unwrap();
        let q: Vec<String> = query.iter().map(|x| format!("t{x}")).collect();
        prop_assert_eq!(index.doc_ids(), back.doc_ids());
        for (a, b) in index.score_all(&q).iter().zip(back.score_all(&q)) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        back.save(&dir.path().join("again.tsv")).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(dir.path().join("again.tsv")).unwrap());
    }

    #[test]
    fn rerank_endpoints_reproduce_each_ordering(scores in prop::collection::vec((-1.0f64..1.0, 0.0f64..20.0), 1..30)) {
        let set = CandidateSet {
            query_id: "q".into(),
            candidates: scores
                .iter()
                .enumerate()
                .map(|(i, &(_, t))| Candidate { doc_id: format!("d{i:02}"), tfidf: t, provenance: Provenance::Preselected })
                .collect(),
        };
        let model: HashMap<String, f64> = scores.iter().enumerate().map(|(i, &(m, _))| (format!("d{i:02}"), m)).collect();
        let mut model_only: Vec<(String, f64)> = model.clone().into_iter().collect();
        sort_run(&mut model_only);
        prop_assert_eq!(ids(&weighted_rerank(&set, &model, 0.0).unwrap()), ids(&model_only));
        prop_assert_eq!(ids(&weighted_rerank(&set, &model, 1.0).unwrap()), ids(&set.tfidf_ranking()));
    }
}

// ---------------------------------------------------------------- ensemble

fn component_strategy() -> impl Strategy<Value = (Vec<ComponentScores>, Judgments)> {
    prop::collection::vec(prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0u8..3), 2..10), 1..6).prop_map(|queries| {
        let mut j = Judgments::new();
        let dev = queries
            .iter()
            .enumerate()
            .map(|(qi, docs)| {
                let q = format!("q{qi}");
                j.insert(&q, "d00", 1).unwrap();
                ComponentScores {
                    query_id: q.clone(),
                    docs: docs
                        .iter()
                        .enumerate()
                        .map(|(i, &(t, m, g))| {
                            let d = format!("d{i:02}");
                            if i > 0 {
                                j.insert(&q, &d, g).unwrap();
                            }
                            (d, t, m)
                        })
                        .collect(),
                }
            })
            .collect();
        (dev, j)
    })
}

proptest! {
    #[test]
    fn stacking_endpoints_and_grid_optimum((dev, j) in component_strategy()) {
        for q in &dev {
            let mut text: Vec<(String, f64)> = q.docs.iter().map(|(d, t, _)| (d.clone(), *t)).collect();
            let mut meta: Vec<(String, f64)> = q.docs.iter().map(|(d, _, m)| (d.clone(), *m)).collect();
            sort_run(&mut text);
            sort_run(&mut meta);
            prop_assert_eq!(ids(&q.ranking(1.0)), ids(&text));
            prop_assert_eq!(ids(&q.ranking(0.0)), ids(&meta));
        }
        let g = grid_search_alpha(&dev, &j, 0.05, Gain::Exponential).unwrap();
        prop_assert!(g.best_ndcg >= g.sweep[0].1);
        prop_assert!(g.best_ndcg >= g.sweep.last().unwrap().1);
    }
}

// ---------------------------------------------------------------- evaluation

fn graded_ranking() -> impl Strategy<Value = (Vec<u8>, Vec<usize>)> {
    prop::collection::vec(0u8..4, 1..9)
        .prop_filter("needs a relevant document", |g| g.iter().any(|&x| x > 0))
        .prop_flat_map(|g| {
            let n = g.len();
            (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
}

proptest! {
    #[test]
    fn ndcg_bounded_and_one_only_when_ideal((grades, order) in graded_ranking()) {
        let judged: BTreeMap<String, u8> = grades.iter().enumerate().map(|(i, &g)| (format!("d{i}"), g)).collect();
        let ranking: Vec<String> = order.iter().map(|i| format!("d{i}")).collect();
        for gain in [Gain::Exponential, Gain::Linear] {
            let v = ndcg(&ranking, &judged, gain).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let ideal = order.windows(2).all(|w| grades[w[0]] >= grades[w[1]]);
            if ideal {
                prop_assert_eq!(v, 1.0);
            } else {
                prop_assert!(v < 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn idcg_ignores_order_within_a_grade((grades, order) in graded_ranking(), shift in 0usize..9) {
        let name = |i: usize| format!("d{}", (i + shift) % grades.len());
        let judged: BTreeMap<String, u8> = grades.iter().enumerate().map(|(i, &g)| (format!("d{i}"), g)).collect();
        let relabelled: BTreeMap<String, u8> = grades.iter().enumerate().map(|(i, &g)| (name(i), g)).collect();
        // the same grade sequence ranked under two labellings
        let a: Vec<String> = order.iter().map(|i| format!("d{i}")).collect();
        let b: Vec<String> = order.iter().map(|&i| name(i)).collect();
        prop_assert_eq!(ndcg(&a, &judged, Gain::Exponential), ndcg(&b, &relabelled, Gain::Exponential));
        // swapping two equal-grade documents changes nothing
        let mut c = a.clone();
        if let Some((x, y)) = (0..c.len()).flat_map(|x| (x + 1..c.len()).map(move |y| (x, y))).find(|&(x, y)| grades[order[x]] == grades[order[y]]) {
            c.swap(x, y);
        }
        prop_assert_eq!(ndcg(&a, &judged, Gain::Exponential), ndcg(&c, &judged, Gain::Exponential));
    }

    #[test]
    fn p_value_range_and_scaling(d in prop::collection::vec(-1.0f64..1.0, 1..20), seed in 0u64..1000) {
        let zeros = vec![0.0; d.len()];
        let doubled: Vec<f64> = d.iter().map(|x| 2.0 * x).collect();
        let p = randomization_test(&d, &zeros, 2000, seed).unwrap();
        let p2 = randomization_test(&doubled, &zeros, 2000, seed).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        prop_assert!(p2 <= p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn randomization_agrees_with_enumeration(a in prop::collection::vec(0.0f64..1.0, 1..=8), b in prop::collection::vec(0.0f64..1.0, 8), seed in 0u64..1000) {
        let b = &b[..a.len()];
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let n = d.len();
        let observed = (d.iter().sum::<f64>() / n as f64).abs();
        let hits = (0..1u32 << n)
            .filter(|mask| {
                let s: f64 = d.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { -v } else { *v }).sum();
                (s / n as f64).abs() >= observed - 1e-12 * observed
            })
            .count();
        let exact = hits as f64 / (1u32 << n) as f64;
        let iters = 20_000;
        let p = randomization_test(&a, b, iters, seed).unwrap();
        let sigma = (exact * (1.0 - exact) / iters as f64).sqrt().max(1.0 / iters as f64);
        prop_assert!((p - exact).abs() <= 5.0 * sigma + 1.0 / iters as f64, "p {p} exact {exact}");
    }
}

// ---------------------------------------------------------------- config

proptest! {
    #[test]
    fn config_round_trips(
        dim in 1usize..500,
        hidden in prop::collection::vec(1usize..2000, 1..4),
        seeds in prop::collection::vec(0u64..100, 1..4),
        sizes in prop::collection::vec(1usize..2000, 1..5),
        lr in 1e-6f64..1.0,
        step in prop::sample::select(vec![0.05, 0.1, 0.25, 0.5]),
        linear in any::<bool>(),
    ) {
        let mut c = ExperimentConfig::default();
        c.words.dim = dim;
        c.model.hidden = hidden;
        c.experiment.seeds = seeds;
        c.experiment.candidate_sizes = sizes;
        c.train.learning_rate = lr;
        c.experiment.grid_step = step;
        if linear {
            c.experiment.gain = Gain::Linear;
        }
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml().unwrap(), text);
        prop_assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }
}
