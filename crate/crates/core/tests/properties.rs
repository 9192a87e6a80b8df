mod support;

use proptest::prelude::*;
use proptest::sample::subsequence;

use support::*;
use ttr_core::corpus::{Corpus, Dataset, Protocol, QueryRecord};
use ttr_core::dense::{dense_search, dot, hash_embed, EmbeddingMatrix, SimilarityMetric};
use ttr_core::eval::{recall_at_k, Runs};
use ttr_core::sparse::{Bm25Index, Bm25Params};
use ttr_core::text::{gestalt_ratio, jaccard, token_set_overlap, tokenize};
use ttr_core::{Error, RetrievalHit};

fn word() -> impl Strategy<Value = String> {
    "q[a-h]{0,4}"
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 128,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x7474_7200),
        ..ProptestConfig::default()
    })]

    #[test]
    fn gestalt_agrees_with_oracle(a in "[abc ]{0,12}", b in "[abc ]{0,12}") {
        prop_assert!((gestalt_ratio(&a, &b) - ro_ratio(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn gestalt_bounded_and_reflexive(a in ".{0,20}", b in ".{0,20}") {
        let r = gestalt_ratio(&a, &b);
        prop_assert!((0.0..=100.0).contains(&r));
        prop_assert_eq!(gestalt_ratio(&a, &a), 100.0);
    }

    #[test]
    fn overlap_ignores_order_and_duplicates(q in sentence(), d in sentence(), rot in 0usize..8) {
        let base = token_set_overlap(&q.join(" "), &d.join(" "));
        let mut shuffled = q.clone();
        let n = shuffled.len();
        shuffled.rotate_left(rot % n);
        shuffled.extend(q.iter().cloned());
        prop_assert_eq!(token_set_overlap(&shuffled.join(" "), &d.join(" ")), base);
        prop_assert!((base - token_set_ratio_oracle(&q.join(" "), &d.join(" "))).abs() < 1e-9);
    }

    #[test]
    fn subset_question_scores_full(d in sentence(), pick in any::<prop::sample::Index>()) {
        let q = d[pick.index(d.len())].clone();
        prop_assert_eq!(token_set_overlap(&q, &d.join(" ")), 100.0);
    }

    #[test]
    fn jaccard_symmetric_and_bounded(a in sentence(), b in sentence()) {
        let (ta, tb) = (tokenize(&a.join(" "), false), tokenize(&b.join(" "), false));
        let j = jaccard(&ta, &tb);
        prop_assert_eq!(j, jaccard(&tb, &ta));
        prop_assert!((0.0..=1.0).contains(&j));
    }

    #[test]
    fn bm25_score_grows_with_tf(filler in prop::collection::vec(word(), 0..6), extra in 1usize..5) {
        // Adding one more occurrence of the query term never lowers the score
        // of a document whose length grows along with it.
        let base: Vec<String> = std::iter::once("zz".to_owned()).chain(filler.iter().cloned()).collect();
        let more: Vec<String> = base.iter().cloned().chain(std::iter::repeat_n("zz".to_owned(), extra)).collect();
        let docs = vec![
            passage("text:a", &base.join(" ")),
            passage("text:b", &more.join(" ")),
            passage("text:c", "unrelated words here"),
        ];
        let idx = Bm25Index::build(&docs, Bm25Params::default()).unwrap();
        let q = tokenize("zz", false);
        prop_assert!(idx.score(&q, 1) >= idx.score(&q, 0));
    }

    #[test]
    fn bm25_round_trip_is_byte_identical(docs in prop::collection::vec(sentence(), 1..12)) {
        let docs: Vec<_> = docs.iter().enumerate().map(|(i, w)| passage(&format!("text:{i}"), &w.join(" "))).collect();
        let idx = Bm25Index::build(&docs, Bm25Params::default()).unwrap();
        let bytes = idx.to_bytes();
        prop_assert_eq!(Bm25Index::from_bytes(&bytes).unwrap().to_bytes(), bytes);
    }

    #[test]
    fn bm25_truncation_rejected(docs in prop::collection::vec(sentence(), 1..6), cut in any::<prop::sample::Index>()) {
        let docs: Vec<_> = docs.iter().enumerate().map(|(i, w)| passage(&format!("text:{i}"), &w.join(" "))).collect();
        let bytes = Bm25Index::build(&docs, Bm25Params::default()).unwrap().to_bytes();
        let n = cut.index(bytes.len());
        prop_assert!(Bm25Index::from_bytes(&bytes[..n]).is_err());
    }

    #[test]
    fn emb_round_trip_is_byte_identical(rows in prop::collection::vec(prop::collection::vec(-1e3f32..1e3, 4), 1..10)) {
        let ids = (0..rows.len()).map(|i| format!("text:{i}")).collect();
        let m = EmbeddingMatrix::from_rows(ids, rows).unwrap();
        let bytes = m.to_bytes().unwrap();
        let back = EmbeddingMatrix::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn dot_ignores_zero_padding(a in prop::collection::vec(-10f32..10.0, 1..16), pad in 1usize..8) {
        let b: Vec<f32> = a.iter().map(|x| x * 0.5 - 1.0).collect();
        let mut ap = a.clone();
        let mut bp = b.clone();
        ap.extend(std::iter::repeat_n(0.0, pad));
        bp.extend(std::iter::repeat_n(0.0, pad));
        prop_assert_eq!(dot(&a, &b), dot(&ap, &bp));
    }

    #[test]
    fn dense_full_k_is_permutation(rows in prop::collection::vec(prop::collection::vec(-1f32..1.0, 3), 1..30)) {
        let n = rows.len();
        let ids: Vec<String> = (0..n).map(|i| format!("text:{i:02}")).collect();
        let m = EmbeddingMatrix::from_rows(ids.clone(), rows).unwrap();
        let hits = dense_search(&m, &[0.3, -0.2, 0.9], n, SimilarityMetric::Dot).unwrap();
        let mut got: Vec<String> = hits.iter().map(|h| h.doc_id.clone()).collect();
        prop_assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        got.sort();
        prop_assert_eq!(got, ids);
    }

    #[test]
    fn hash_embed_is_unit_and_deterministic(text in "[a-z ]{1,40}", seed in any::<u64>()) {
        prop_assume!(text.split_whitespace().next().is_some());
        match hash_embed(&text, 64, seed) {
            Ok(v) => {
                prop_assert_eq!(&v, &hash_embed(&text, 64, seed).unwrap());
                prop_assert!((dot(&v, &v) - 1.0).abs() < 1e-5);
            }
            // Opposite-signed collisions can cancel every slot.
            Err(Error::ZeroVector(_)) => prop_assert!(hash_embed(&text, 64, seed).is_err()),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn recall_monotone_and_weighted(ranks in prop::collection::vec(prop::option::of(1usize..30), 1..40), split in any::<prop::sample::Index>()) {
        let cut = split.index(ranks.len());
        let docs: Vec<_> = (0..30).map(|i| passage(&format!("text:{i}"), &format!("doc number {i}"))).collect();
        let corpus = Corpus::new(docs).unwrap();
        let mut runs = Runs::new();
        let mut queries = Vec::new();
        for (i, r) in ranks.iter().enumerate() {
            let id = format!("q{i}");
            let hits: Vec<RetrievalHit> = (1..=29)
                .map(|rank| RetrievalHit {
                    doc_id: if Some(rank) == *r { "text:0".into() } else { format!("text:{rank}") },
                    score: -(rank as f64),
                    rank,
                })
                .collect();
            runs.insert(id.clone(), hits);
            queries.push(QueryRecord {
                id,
                question: "q".into(),
                dataset: if i < cut { Dataset::WikiSQL } else { Dataset::OTTQA },
                gold_ids: ["text:0".to_owned()].into(),
                answers: vec![],
                protocol: Protocol::GoldId,
                hard_negative_ids: None,
            });
        }
        let ks = [1, 5, 10, 20];
        let t = recall_at_k(&runs, &queries, &corpus, &ks).unwrap();
        for row in t.rows.iter().chain(std::iter::once(&t.overall)) {
            prop_assert!(ks.windows(2).all(|w| row.recall[&w[0]] <= row.recall[&w[1]]));
        }
        for k in ks {
            let weighted: f64 = t.rows.iter().map(|r| r.recall[&k] * r.queries as f64).sum::<f64>() / queries.len() as f64;
            prop_assert!((weighted - t.overall.recall[&k]).abs() < 1e-12);
        }
    }

    #[test]
    fn protocols_separate_on_answer_bearing_non_gold(answer in "[a-z]{3,8}") {
        let docs = vec![
            table("table:gold", "t", &["c"], &[&["x"]]),
            table("table:other", "t", &["c"], &[&[answer.as_str()]]),
        ];
        let corpus = Corpus::new(docs).unwrap();
        let hits = vec![RetrievalHit { doc_id: "table:other".into(), score: 1.0, rank: 1 }];
        let runs: Runs = [("q".to_owned(), hits)].into();
        let mk = |protocol| QueryRecord {
            id: "q".into(),
            question: "which".into(),
            dataset: Dataset::NQTables,
            gold_ids: ["table:gold".to_owned()].into(),
            answers: vec![answer.clone()],
            protocol,
            hard_negative_ids: None,
        };
        let gold = recall_at_k(&runs, &[mk(Protocol::GoldId)], &corpus, &[1]).unwrap();
        let ans = recall_at_k(&runs, &[mk(Protocol::AnswerString)], &corpus, &[1]).unwrap();
        prop_assert_eq!(gold.overall.recall[&1], 0.0);
        prop_assert_eq!(ans.overall.recall[&1], 1.0);
    }

    #[test]
    fn subsequence_question_always_full(words in prop::collection::btree_set(word(), 1..10)
        .prop_flat_map(|s| { let v: Vec<String> = s.into_iter().collect(); let n = v.len(); (Just(v.clone()), subsequence(v, 1..=n)) })) {
        let (doc, q) = words;
        prop_assert_eq!(token_set_overlap(&q.join(" "), &doc.join(" ")), 100.0);
    }
}
