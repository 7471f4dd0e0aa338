use std::collections::BTreeMap;

use longtail_core::langid::{
    evaluate, extract_features, pare_languages, rate, softmax, train, train_with_history,
    BatchMode, ConfusionMatrix, DropReason, FeatureSpec, LangIdModel, ParingThresholds, Predictor,
    RateKind, TrainConfig,
};
use longtail_testkit::synth::{generate, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_spec() -> FeatureSpec {
    FeatureSpec::new([1, 2, 3], 1 << 14, 0).unwrap()
}

fn alphabet_sentences(rng: &mut ChaCha8Rng, letters: &[char], n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let words = rng.gen_range(1..6);
            (0..words)
                .map(|_| {
                    let len = rng.gen_range(1..8);
                    (0..len)
                        .map(|_| letters[rng.gen_range(0..letters.len())])
                        .collect::<String>()
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

#[test]
fn disjoint_alphabets_are_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let am: Vec<char> = ('a'..='m').collect();
    let nz: Vec<char> = ('n'..='z').collect();
    let mut labeled = Vec::new();
    for s in alphabet_sentences(&mut rng, &am, 500) {
        labeled.push((s, "am"));
    }
    for s in alphabet_sentences(&mut rng, &nz, 500) {
        labeled.push((s, "nz"));
    }
    let model = train(&labeled, &small_spec(), &TrainConfig::default()).unwrap();

    let mut held_out = Vec::new();
    for s in alphabet_sentences(&mut rng, &am, 300) {
        held_out.push((s, "am"));
    }
    for s in alphabet_sentences(&mut rng, &nz, 300) {
        held_out.push((s, "nz"));
    }
    // Oracle: membership of the first letter in a-m.
    let correct = held_out
        .iter()
        .filter(|(s, _)| {
            let truth = if s.chars().next().unwrap() <= 'm' {
                "am"
            } else {
                "nz"
            };
            model.predict(s).lang == truth
        })
        .count();
    let accuracy = correct as f64 / held_out.len() as f64;
    assert!(accuracy >= 0.99, "accuracy {accuracy}");
}

fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let f: f64 = (0..cm.len())
        .map(|i| {
            let p = cm.precision_at(i).value;
            let r = cm.recall_at(i).value;
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        })
        .sum();
    f / cm.len() as f64
}

#[test]
fn five_synthetic_languages() {
    let data = generate(&SynthConfig {
        n_docs: 0,
        ..SynthConfig::default()
    });
    let keep = |l: &str| l != "en";
    let tr: Vec<_> = data
        .train
        .iter()
        .filter(|(l, _)| keep(l))
        .map(|(l, t)| (t.clone(), l.clone()))
        .collect();
    let ev: Vec<_> = data
        .eval
        .iter()
        .filter(|(l, _)| keep(l))
        .map(|(l, t)| (t.clone(), l.clone()))
        .collect();
    let model = train(&tr, &FeatureSpec::default(), &TrainConfig::default()).unwrap();
    assert_eq!(model.languages.len(), 5);
    let cm = evaluate(&model, &ev).unwrap();
    let f1 = macro_f1(&cm);
    assert!(f1 >= 0.95, "macro-F1 {f1}");
    for (t, _) in ev.iter().take(20) {
        assert_eq!(model.predict(t), model.predict(t));
    }
}

fn toy_labeled() -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut out = Vec::new();
    for (lang, letters) in [("x", "abcdef"), ("y", "defghi"), ("z", "ghijka")] {
        let letters: Vec<char> = letters.chars().collect();
        for s in alphabet_sentences(&mut rng, &letters, 60) {
            out.push((s, lang.to_string()));
        }
    }
    out
}

#[test]
fn same_seed_is_bit_identical() {
    let data = toy_labeled();
    for batch in [BatchMode::Full, BatchMode::Mini(16)] {
        let cfg = TrainConfig {
            epochs: 10,
            learning_rate: 4.0,
            seed: 9,
            batch,
        };
        let a = train(&data, &small_spec(), &cfg).unwrap();
        let b = train(&data, &small_spec(), &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn full_batch_ignores_example_order() {
    let data = toy_labeled();
    let mut shuffled = data.clone();
    shuffled.reverse();
    shuffled.swap(3, 77);
    let cfg = TrainConfig {
        epochs: 15,
        ..TrainConfig::default()
    };
    assert_eq!(
        train(&data, &small_spec(), &cfg).unwrap(),
        train(&shuffled, &small_spec(), &cfg).unwrap()
    );
}

#[test]
fn full_batch_loss_never_increases() {
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let (_, history) = train_with_history(&toy_labeled(), &small_spec(), &cfg).unwrap();
    assert_eq!(history.len(), 31);
    for w in history.windows(2) {
        assert!(w[1] <= w[0], "{history:?}");
    }
    assert!(history.last().unwrap() < &history[0]);
}

#[test]
fn one_language_is_degenerate() {
    let data = vec![("a", "x"), ("b", "x")];
    assert!(train(&data, &small_spec(), &TrainConfig::default()).is_err());
}

#[test]
fn zero_model_prefers_first_language() {
    let model = LangIdModel::zeros(small_spec(), vec!["b".into(), "a".into(), "c".into()]).unwrap();
    let p = model.predict("whatever");
    assert_eq!(p.lang, "b");
    assert!((p.confidence - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn evaluate_matches_tally() {
    let data = toy_labeled();
    let model = train(
        &data,
        &small_spec(),
        &TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let langs = ["x", "y", "z"];
    let mut ev = Vec::new();
    for _ in 0..60 {
        let letters: Vec<char> = "abcdefghijk".chars().collect();
        let s = alphabet_sentences(&mut rng, &letters, 1).pop().unwrap();
        ev.push((s, langs[rng.gen_range(0..3)]));
    }
    let cm = evaluate(&model, &ev).unwrap();
    let mut tally = BTreeMap::new();
    for (t, l) in &ev {
        *tally
            .entry((l.to_string(), model.predict(t).lang))
            .or_insert(0u64) += 1;
    }
    for (i, t) in cm.languages.iter().enumerate() {
        for (j, p) in cm.languages.iter().enumerate() {
            assert_eq!(
                cm.counts[i][j],
                tally.get(&(t.clone(), p.clone())).copied().unwrap_or(0)
            );
        }
    }
    assert!(evaluate(&model, &[("abc", "nope")]).is_err());
}

#[test]
fn rates_match_direct_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let langs: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let counts: Vec<Vec<u64>> = (0..4)
            .map(|_| (0..4).map(|_| rng.gen_range(0..6)).collect())
            .collect();
        let cm = ConfusionMatrix::from_counts(langs.clone(), counts.clone()).unwrap();
        for (i, l) in langs.iter().enumerate() {
            let row: u64 = counts[i].iter().sum();
            let col: u64 = counts.iter().map(|r| r[i]).sum();
            let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let p = rate(&cm, RateKind::Precision, l, None).unwrap();
            assert_eq!(p.value, div(counts[i][i], col));
            assert_eq!(p.zero_denominator, col == 0);
            let r = rate(&cm, RateKind::Recall, l, None).unwrap().value;
            assert_eq!(r, div(counts[i][i], row));
            let fnr = rate(&cm, RateKind::Fnr, l, None).unwrap().value;
            assert_eq!(r + fnr, if row == 0 { 0.0 + fnr } else { 1.0 });
            for (d, dl) in langs.iter().enumerate() {
                let f = rate(&cm, RateKind::FdrPair, l, Some(dl)).unwrap().value;
                assert_eq!(f, div(counts[d][i], row));
            }
        }
    }
}

#[test]
fn paring_boundaries() {
    let langs: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
    let sizes = |a: usize, b: usize| BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
    let t = ParingThresholds::default();
    let cm = ConfusionMatrix::from_counts(langs.clone(), vec![vec![10, 0], vec![0, 10]]).unwrap();
    let r = pare_languages(&cm, &sizes(2000, 5000), &t);
    assert_eq!(r.dropped().count(), 0);
    let r = pare_languages(&cm, &sizes(1999, 2000), &t);
    assert_eq!(r.languages[0].reasons, [DropReason::TooFewExamples]);
    assert!(!r.languages[1].dropped);
}

proptest! {
    #[test]
    fn recall_plus_fnr_is_one(counts in proptest::collection::vec(0u64..20, 9)) {
        let langs: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<u64>> = counts.chunks(3).map(|c| c.to_vec()).collect();
        let cm = ConfusionMatrix::from_counts(langs, rows.clone()).unwrap();
        for i in 0..3 {
            if rows[i].iter().sum::<u64>() > 0 {
                prop_assert_eq!(cm.recall_at(i).value + cm.fnr_at(i).value, 1.0);
            }
            prop_assert_eq!(cm.row_sum(i), rows[i].iter().sum::<u64>());
        }
    }

    #[test]
    fn softmax_sums_to_one(logits in proptest::collection::vec(-50.0f64..50.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn features_are_l1_normalized(text in "[a-z ]{1,40}") {
        let f = extract_features(&text, &FeatureSpec::default());
        let total: f64 = f.iter().map(|e| e.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}

proptest! {
    // With unigram features, k copies of a text have exactly the same
    // normalized feature vector as one copy.
    #[test]
    fn duplicated_text_predicts_the_same(text in "[a-k ]{1,30}", k in 2usize..6) {
        let spec = FeatureSpec::new([1], 1 << 12, 0).unwrap();
        let model = unigram_model(&spec);
        prop_assert_eq!(extract_features(&text, &spec), extract_features(&text.repeat(k), &spec));
        prop_assert_eq!(model.predict(&text), model.predict(&text.repeat(k)));
    }
}

fn unigram_model(spec: &FeatureSpec) -> LangIdModel {
    use std::sync::OnceLock;
    static MODEL: OnceLock<LangIdModel> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            train(
                &toy_labeled(),
                spec,
                &TrainConfig {
                    epochs: 10,
                    ..TrainConfig::default()
                },
            )
            .unwrap()
        })
        .clone()
}
