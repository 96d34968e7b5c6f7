use std::collections::HashMap;
use std::io::Cursor;

use lyrnet_core::corpus::{
    self, encode_corpus, generate_synthetic, hemispheres_of, quadrant_of, read_corpus, split,
    split_words, tokenize, Arousal, CorpusError, EmotionLabel, Quadrant, Valence, VocabPolicy,
    Vocabulary, ALL_QUADRANTS, MAX_TOKENS, UNKNOWN_ID,
};
use proptest::prelude::*;

// ── label algebra ───────────────────────────────────────────────────

#[test]
fn hemisphere_mapping_follows_the_convention() {
    assert_eq!(hemispheres_of(Quadrant::Q1), (Valence::Positive, Arousal::High));
    assert_eq!(hemispheres_of(Quadrant::Q2), (Valence::Negative, Arousal::High));
    assert_eq!(hemispheres_of(Quadrant::Q3), (Valence::Negative, Arousal::Low));
    assert_eq!(hemispheres_of(Quadrant::Q4), (Valence::Positive, Arousal::Low));
    assert_eq!(quadrant_of(Valence::Positive, Arousal::Low), Quadrant::Q4);
}

#[test]
fn quadrant_hemisphere_bijection() {
    for q in ALL_QUADRANTS {
        let (v, a) = hemispheres_of(q);
        assert_eq!(quadrant_of(v, a), q);
    }
    for v in [Valence::Positive, Valence::Negative] {
        for a in [Arousal::High, Arousal::Low] {
            assert_eq!(hemispheres_of(quadrant_of(v, a)), (v, a));
        }
    }
}

#[test]
fn inconsistent_triples_cannot_be_constructed() {
    let mut rejected = 0;
    for q in ALL_QUADRANTS {
        for v in [Valence::Positive, Valence::Negative] {
            for a in [Arousal::High, Arousal::Low] {
                let consistent = hemispheres_of(q) == (v, a);
                match EmotionLabel::try_new(q, v, a) {
                    Ok(l) => {
                        assert!(consistent);
                        assert_eq!((l.quadrant(), l.valence(), l.arousal()), (q, v, a));
                    }
                    Err(_) => {
                        assert!(!consistent);
                        rejected += 1;
                    }
                }
            }
        }
    }
    assert_eq!(rejected, 12); // all 12 inconsistent triples rejected
}

// ── tokenization ────────────────────────────────────────────────────

fn build_vocab(texts: &[&str]) -> Vocabulary {
    let mut v = Vocabulary::new();
    for t in texts {
        for w in split_words(t) {
            v.insert_or_get(&w).unwrap();
        }
    }
    v.freeze();
    v
}

#[test]
fn tokenize_lowercases_and_drops_punctuation() {
    let vocab = build_vocab(&["hey jude don t"]);
    let ids = tokenize("Hey Jude, don't", &vocab, MAX_TOKENS);
    let words: Vec<&str> = ids.iter().map(|&i| vocab.token_of(i).unwrap()).collect();
    assert_eq!(words, ["hey", "jude", "don", "t"]);
}

#[test]
fn tokenize_truncates_to_1024_words() {
    let text: Vec<String> = (0..1500).map(|i| format!("w{i}")).collect();
    let joined = text.join(" ");
    let vocab = build_vocab(&[joined.as_str()]);
    let ids = tokenize(&joined, &vocab, MAX_TOKENS);
    assert_eq!(ids.len(), 1024);
    assert_eq!(vocab.token_of(ids[0]).unwrap(), "w0");
    assert_eq!(vocab.token_of(ids[1023]).unwrap(), "w1023");
}

#[test]
fn unknown_words_map_to_unk() {
    let vocab = build_vocab(&["hello world"]);
    let ids = tokenize("hello zanzibar", &vocab, MAX_TOKENS);
    assert_eq!(ids[1], UNKNOWN_ID);
}

#[test]
fn frozen_vocab_rejects_insertion() {
    let mut vocab = build_vocab(&["a b"]);
    assert!(matches!(
        vocab.insert_or_get("c"),
        Err(CorpusError::FrozenVocabulary { .. })
    ));
}

#[test]
fn tokenization_is_idempotent_over_detokenized_text() {
    let vocab = build_vocab(&["night falls over the silent city"]);
    let ids = tokenize("Night falls over the silent city", &vocab, MAX_TOKENS);
    let text: Vec<&str> = ids.iter().map(|&i| vocab.token_of(i).unwrap()).collect();
    let re_ids = tokenize(&text.join(" "), &vocab, MAX_TOKENS);
    assert_eq!(ids, re_ids);
}

// ── JSONL loading ───────────────────────────────────────────────────

#[test]
fn quadrant_only_record_derives_hemispheres() {
    let jsonl = r#"{"id":"a","lyrics":"some words","quadrant":"Q1"}"#;
    let (corpus, _) = read_corpus(Cursor::new(jsonl), VocabPolicy::Build, None).unwrap();
    let label = corpus.docs[0].label.unwrap();
    assert_eq!(label.valence(), Valence::Positive);
    assert_eq!(label.arousal(), Arousal::High);
}

#[test]
fn inconsistent_record_is_rejected_citing_id() {
    let jsonl = r#"{"id":"bad-song","lyrics":"x","quadrant":"Q1","valence":"negative"}"#;
    let err = read_corpus(Cursor::new(jsonl), VocabPolicy::Build, None).unwrap_err();
    assert!(err.to_string().contains("bad-song"), "{err}");
}

#[test]
fn malformed_line_reports_line_number() {
    let jsonl = "{\"id\":\"a\",\"lyrics\":\"ok\"}\nnot json at all\n";
    let err = read_corpus(Cursor::new(jsonl), VocabPolicy::Build, None).unwrap_err();
    match err {
        CorpusError::Malformed { line, .. } => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn duplicate_id_is_rejected() {
    let jsonl = "{\"id\":\"a\",\"lyrics\":\"x\"}\n{\"id\":\"a\",\"lyrics\":\"y\"}\n";
    let err = read_corpus(Cursor::new(jsonl), VocabPolicy::Build, None).unwrap_err();
    assert!(matches!(err, CorpusError::DuplicateId { .. }));
}

#[test]
fn loading_twice_is_deterministic() {
    let jsonl = r#"{"id":"a","lyrics":"one two three","quadrant":"Q2"}
{"id":"b","lyrics":"three four","quadrant":"Q3"}"#;
    let (c1, v1) = read_corpus(Cursor::new(jsonl), VocabPolicy::Build, None).unwrap();
    let (c2, v2) = read_corpus(Cursor::new(jsonl), VocabPolicy::Build, None).unwrap();
    assert_eq!(v1.len(), v2.len());
    for (a, b) in c1.docs.iter().zip(&c2.docs) {
        assert_eq!(a.tokens, b.tokens);
    }
    // first-appearance order: "one" is the first non-reserved token
    assert_eq!(v1.token_of(2).unwrap(), "one");
}

#[test]
fn corpus_roundtrip_preserves_documents() {
    let mut corpus = generate_synthetic(2, 64, 5);
    encode_corpus(&mut corpus, VocabPolicy::Build, None).unwrap();
    let mut buf = Vec::new();
    corpus::write_corpus(&mut buf, &corpus).unwrap();
    let (loaded, _) = read_corpus(Cursor::new(buf), VocabPolicy::Build, None).unwrap();
    assert_eq!(loaded.len(), corpus.len());
    for (a, b) in corpus.docs.iter().zip(&loaded.docs) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.lyrics, b.lyrics);
        assert_eq!(a.label, b.label);
    }
}

// ── splits ──────────────────────────────────────────────────────────

#[test]
fn split_exact_divisibility() {
    let corpus = generate_synthetic(25, 64, 1); // 100 docs, 25 per quadrant
    let parts = split(&corpus, &[0.8, 0.2], 7).unwrap();
    assert_eq!(parts[0].len(), 80);
    assert_eq!(parts[1].len(), 20);
    for part in &parts {
        let mut per_q: HashMap<Quadrant, usize> = HashMap::new();
        for d in &part.docs {
            *per_q.entry(d.label.unwrap().quadrant()).or_default() += 1;
        }
        let expect = part.len() / 4;
        for q in ALL_QUADRANTS {
            assert_eq!(per_q[&q], expect);
        }
    }
}

#[test]
fn split_same_seed_identical() {
    let corpus = generate_synthetic(10, 64, 2);
    let a = split(&corpus, &[0.5, 0.3, 0.2], 9).unwrap();
    let b = split(&corpus, &[0.5, 0.3, 0.2], 9).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let ids_x: Vec<&str> = x.docs.iter().map(|d| d.id.as_str()).collect();
        let ids_y: Vec<&str> = y.docs.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids_x, ids_y);
    }
}

#[test]
fn split_rejects_bad_ratios() {
    let corpus = generate_synthetic(4, 64, 3);
    assert!(split(&corpus, &[0.7, 0.2], 1).is_err());
    assert!(split(&corpus, &[1.2, -0.2], 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn splits_partition_the_corpus(n in 3usize..12, seed in 0u64..500) {
        let corpus = generate_synthetic(n, 64, seed);
        let parts = split(&corpus, &[0.6, 0.2, 0.2], seed).unwrap();
        let mut ids: Vec<String> = parts
            .iter()
            .flat_map(|p| p.docs.iter().map(|d| d.id.clone()))
            .collect();
        let total: usize = parts.iter().map(|p| p.len()).sum();
        prop_assert_eq!(total, corpus.len());
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), corpus.len()); // pairwise disjoint
        // stratification bound: each quadrant within ±1 of exact share
        for (pi, ratio) in [0.6, 0.2, 0.2].iter().enumerate() {
            let mut per_q: HashMap<Quadrant, usize> = HashMap::new();
            for d in &parts[pi].docs {
                *per_q.entry(d.label.unwrap().quadrant()).or_default() += 1;
            }
            for q in ALL_QUADRANTS {
                let got = *per_q.get(&q).unwrap_or(&0) as f64;
                let exact = ratio * n as f64;
                prop_assert!((got - exact).abs() <= 1.0, "quadrant {:?}: {} vs {}", q, got, exact);
            }
        }
    }
}

// ── synthetic corpus ────────────────────────────────────────────────

#[test]
fn synthetic_corpus_is_balanced() {
    let corpus = generate_synthetic(8, 64, 11);
    assert_eq!(corpus.len(), 32);
    let mut per_q: HashMap<Quadrant, usize> = HashMap::new();
    for d in &corpus.docs {
        *per_q.entry(d.label.unwrap().quadrant()).or_default() += 1;
    }
    for q in ALL_QUADRANTS {
        assert_eq!(per_q[&q], 8);
    }
}

#[test]
fn synthetic_corpus_same_seed_identical() {
    let a = generate_synthetic(4, 64, 13);
    let b = generate_synthetic(4, 64, 13);
    for (x, y) in a.docs.iter().zip(&b.docs) {
        assert_eq!(x.lyrics, y.lyrics);
        assert_eq!(x.id, y.id);
    }
}

#[test]
fn synthetic_corpus_is_separable_by_nearest_centroid() {
    // Independent separability oracle: bag-of-words nearest centroid must be
    // perfect on the generated corpus before any model training relies on it.
    let mut corpus = generate_synthetic(16, 64, 17);
    let vocab = encode_corpus(&mut corpus, VocabPolicy::Build, None).unwrap();
    let dim = vocab.len();
    let bow = |tokens: &[usize]| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for &t in tokens {
            v[t] += 1.0;
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / norm).collect()
    };
    let mut centroids = vec![vec![0.0; dim]; 4];
    for d in &corpus.docs {
        let q = d.label.unwrap().quadrant().index();
        for (c, x) in centroids[q].iter_mut().zip(bow(d.tokens.as_ref().unwrap())) {
            *c += x;
        }
    }
    let mut correct = 0;
    for d in &corpus.docs {
        let x = bow(d.tokens.as_ref().unwrap());
        let best = (0..4)
            .max_by(|&a, &b| {
                let da: f64 = centroids[a].iter().zip(&x).map(|(c, v)| c * v).sum();
                let db: f64 = centroids[b].iter().zip(&x).map(|(c, v)| c * v).sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        if best == d.label.unwrap().quadrant().index() {
            correct += 1;
        }
    }
    assert_eq!(correct, corpus.len(), "nearest-centroid accuracy below 100%");
}

#[test]
fn encoded_documents_respect_token_cap() {
    let mut corpus = generate_synthetic(4, 64, 19);
    encode_corpus(&mut corpus, VocabPolicy::Build, None).unwrap();
    for d in &corpus.docs {
        assert!(d.tokens.as_ref().unwrap().len() <= MAX_TOKENS);
    }
}
