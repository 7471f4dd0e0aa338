//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use longtail::pipeline::{self, PipelineInputs, CORPORA_DIR};
use longtail_core::anomaly::{anomaly_report, report_from_scores, AnomalyFlag};
use longtail_core::cluster::{
    agglomerative_cluster, resplit, ClusterId, ClusterMap, Cut, DistanceMatrix, Linkage,
};
use longtail_core::corpus::{Document, MonoCorpus, SentenceRecord};
use longtail_core::filters::{
    build_tfiif_wordlist, filter_doc_consistency, rrr_gate, IifTable, RrrParams,
};
use longtail_core::langid::{
    pare_languages, ConfusionMatrix, DropReason, ParingThresholds, Prediction, Predictor,
};
use longtail_core::metrics::{
    audit_score, corpus_chrf, hit_rate, rtt_langid_chrf, sentence_chrf, AuditLabels, ChrfParams,
    RttMode, RttScore, Translator, TranslatorError,
};
use longtail_testkit::oracle::{self, NaiveCut};
use longtail_testkit::synth::{generate, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Outcome {
    check((a - b).abs() <= tol, || {
        format!("{what}: {a} vs {b} (tolerance {tol})")
    })
}

// ---------------------------------------------------------------------------
// 1. ChrF

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const POOL: &[char] = &[
        'a', 'b', 'c', 'd', 'e', 'n', 'o', ' ', ' ', 'é', 'ж', '中', '7', '.', 'A',
    ];
    let n = rng.gen_range(1..40);
    (0..n).map(|_| POOL[rng.gen_range(0..POOL.len())]).collect()
}

fn mutate(rng: &mut ChaCha8Rng, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    for _ in 0..rng.gen_range(0..5) {
        if chars.is_empty() || rng.gen_bool(0.3) {
            chars.insert(rng.gen_range(0..=chars.len()), 'x');
        } else {
            let i = rng.gen_range(0..chars.len());
            if rng.gen_bool(0.5) {
                chars.remove(i);
            } else {
                chars[i] = 'q';
            }
        }
    }
    chars.into_iter().collect()
}

fn chrf_matches_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = ChrfParams::default();
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..64 {
        let r = random_text(&mut rng);
        let h = if rng.gen_bool(0.85) {
            mutate(&mut rng, &r)
        } else {
            random_text(&mut rng)
        };
        close(
            sentence_chrf(&h, &r, &p),
            oracle::chrf_sentence(&h, &r),
            1e-4,
            &format!("{h:?} / {r:?}"),
        )?;
        hyps.push(h);
        refs.push(r);
    }
    let h: Vec<&str> = hyps.iter().map(String::as_str).collect();
    let r: Vec<&str> = refs.iter().map(String::as_str).collect();
    close(
        corpus_chrf(&h, &r, &p).unwrap(),
        oracle::chrf_corpus(&h, &r),
        1e-4,
        "corpus",
    )?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })
}

// ---------------------------------------------------------------------------
// 2, 3. Document consistency

fn annotated(id: &str, clusters: &[u32]) -> Document {
    Document {
        id: id.into(),
        url: None,
        sentences: clusters
            .iter()
            .enumerate()
            .map(|(i, &c)| SentenceRecord {
                text: format!("{id} s{i}"),
                predicted_lang: Some(format!("l{c}")),
                predicted_cluster: Some(ClusterId(c)),
                confidence: Some(1.0),
            })
            .collect(),
    }
}

fn consistency_plurality() -> Outcome {
    // 20 of cluster 7, 19 of cluster 3, 18 of cluster 5, interleaved.
    let mut clusters = Vec::new();
    for i in 0..20 {
        clusters.push(7);
        if i < 19 {
            clusters.push(3);
        }
        if i < 18 {
            clusters.push(5);
        }
    }
    check(clusters.len() == 57, || "bad fixture".into())?;
    let doc = annotated("d", &clusters);
    let out = filter_doc_consistency([&doc]).map_err(|e| e.to_string())?;
    let want: Vec<String> = clusters
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 7)
        .map(|(i, _)| format!("d s{i}"))
        .collect();
    check(out.corpora.len() == 1, || {
        format!("{} corpora", out.corpora.len())
    })?;
    let kept = &out.corpora[&ClusterId(7)].sentences;
    check(*kept == want, || format!("kept {kept:?}"))?;
    let dropped: usize = out.reports.values().map(|r| r.dropped()).sum();
    check(dropped == 37, || format!("dropped {dropped}"))
}

fn consistency_majority_kept() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let docs: Vec<Document> = (0..1000)
        .map(|i| {
            let n = rng.gen_range(1..30);
            let k = rng.gen_range(1..5);
            let c: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            annotated(&format!("d{i}"), &c)
        })
        .collect();
    let out = filter_doc_consistency(&docs).map_err(|e| e.to_string())?;
    let kept: std::collections::BTreeSet<&str> = out
        .corpora
        .values()
        .flat_map(|c| &c.sentences)
        .map(String::as_str)
        .collect();
    let mut checked = 0;
    for d in &docs {
        let ids: Vec<u32> = d
            .sentences
            .iter()
            .map(|s| s.predicted_cluster.unwrap().0)
            .collect();
        let mask = oracle::consistency_keep(&ids);
        for (i, s) in d.sentences.iter().enumerate() {
            let same = ids.iter().filter(|&&c| c == ids[i]).count();
            if 2 * same > ids.len() {
                checked += 1;
                check(kept.contains(s.text.as_str()), || {
                    format!("{} dropped", s.text)
                })?;
            }
            check(kept.contains(s.text.as_str()) == mask[i], || {
                format!("{} disagrees with oracle", s.text)
            })?;
        }
    }
    check(checked > 1000, || {
        format!("only {checked} majority sentences")
    })
}

// ---------------------------------------------------------------------------
// 4. TF-IIF

fn tfiif_matches_exhaustive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    for round in 0..20 {
        let mut sentences = Vec::new();
        let mut n_tokens = 0;
        while n_tokens < 150 {
            let n = rng.gen_range(1..10);
            let s: Vec<&str> = (0..n)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].as_str())
                .collect();
            n_tokens += n;
            sentences.push(s.join(" "));
        }
        check(n_tokens <= 200, || "toy corpus too large".into())?;
        // Part of the vocabulary is missing from the web table, the rest has
        // counts on both sides of alpha.
        let mut web: Vec<(String, u64)> = Vec::new();
        for t in &vocab {
            if rng.gen_bool(0.7) {
                web.push((t.clone(), rng.gen_range(1..500)));
            }
        }
        let web_ref: Vec<(&str, u64)> = web.iter().map(|(t, c)| (t.as_str(), *c)).collect();
        let kappa = rng.gen_range(1..30);
        let tau = rng.gen_range(1..45);
        let table =
            IifTable::new(web.iter().cloned().collect(), kappa).map_err(|e| e.to_string())?;
        let alpha = oracle::iif_alpha(&web_ref, kappa);
        close(table.alpha, alpha, 0.0, "alpha")?;
        let corpus = MonoCorpus::new("xx", sentences.clone());
        let ours = build_tfiif_wordlist(&corpus, &table, tau).map_err(|e| e.to_string())?;
        let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
        let want = oracle::tfiif_rank(&refs, &web_ref, alpha, tau);
        check(ours.entries.len() == want.len(), || {
            format!("round {round}: length")
        })?;
        for ((t, s), (wt, ws)) in ours.entries.iter().zip(&want) {
            check(t == wt, || format!("round {round}: {t} vs {wt}"))?;
            close(*s, *ws, 1e-12, t)?;
        }
    }

    // Clipping by construction: "rare" and "absent" share the floor alpha = 10.
    let web: BTreeMap<String, u64> = [("common", 1000), ("mid", 10), ("rare", 1)]
        .iter()
        .map(|(t, c)| (t.to_string(), *c))
        .collect();
    let table = IifTable::new(web, 2).map_err(|e| e.to_string())?;
    close(table.alpha, 10.0, 0.0, "alpha")?;
    let corpus = MonoCorpus::new(
        "xx",
        vec!["common rare absent mid".into(), "common rare absent".into()],
    );
    let list = build_tfiif_wordlist(&corpus, &table, 10).map_err(|e| e.to_string())?;
    let score: BTreeMap<&str, f64> = list.entries.iter().map(|(t, s)| (t.as_str(), *s)).collect();
    close(score["rare"], 2.0 / 10.0, 0.0, "rare")?;
    close(score["absent"], 2.0 / 10.0, 0.0, "absent")?;
    close(score["mid"], 1.0 / 10.0, 0.0, "mid")?;
    close(score["common"], 2.0 / 1000.0, 0.0, "common")
}

// ---------------------------------------------------------------------------
// 5. RRR gate

fn rrr_truth_table() -> Outcome {
    let params = RrrParams {
        rho: 2.0,
        rrr_threshold: 1.0,
        ..RrrParams::default()
    };
    let crawl = [0.3, 0.8, 0.9];
    // Rows r_gold, columns r_crawl.
    let table: [(f64, [bool; 3]); 4] = [
        (0.75, [false, false, false]),
        (0.8, [true, false, false]),
        (0.9, [true, true, false]),
        (1.0, [true, true, false]),
    ];
    for (g, row) in table {
        for (c, want) in crawl.iter().zip(row) {
            let r = rrr_gate(g, *c, &params).map_err(|e| e.to_string())?;
            check(r.apply_filter == want, || {
                format!("gold {g}, crawl {c}: {r:?}")
            })?;
            close(r.rrr, g * g / c, 1e-12, "rrr")?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 6. Clustering

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("l{i:02}")).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.gen_range(1..=8) as f64 / 8.0;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

fn flat(map: &ClusterMap, n: usize) -> Vec<usize> {
    let mut seen = Vec::new();
    labels(n)
        .iter()
        .map(|l| {
            let c = map.cluster_of(l).unwrap();
            match seen.iter().position(|&x| x == c) {
                Some(p) => p,
                None => {
                    seen.push(c);
                    seen.len() - 1
                }
            }
        })
        .collect()
}

fn clustering_matches_naive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let d = random_matrix(&mut rng, 6);
        let dm = DistanceMatrix::new(labels(6), d.clone()).map_err(|e| e.to_string())?;
        for k in 1..=6 {
            let ours = agglomerative_cluster(&dm, Linkage::Average, Cut::NClusters(k))
                .map_err(|e| e.to_string())?;
            let want = oracle::naive_average_linkage(&d, NaiveCut::NClusters(k));
            check(flat(&ours, 6) == want, || format!("{d:?} k={k}"))?;
        }
        for t in [0.3, 0.5, 0.8] {
            let ours = agglomerative_cluster(&dm, Linkage::Average, Cut::DistanceThreshold(t))
                .map_err(|e| e.to_string())?;
            let want = oracle::naive_average_linkage(&d, NaiveCut::Below(t));
            check(flat(&ours, 6) == want, || format!("{d:?} t={t}"))?;
        }
    }
    // A 50-language chain collapses into one cluster, which resplit breaks up.
    let n = 50;
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (i as f64 - j as f64).abs() / n as f64)
                .collect()
        })
        .collect();
    let dm = DistanceMatrix::new(labels(n), d).map_err(|e| e.to_string())?;
    let one = agglomerative_cluster(&dm, Linkage::Average, Cut::NClusters(1))
        .map_err(|e| e.to_string())?;
    check(one.max_cluster_size() == n, || {
        "chain did not collapse".into()
    })?;
    let split = resplit(&one, &dm, 20).map_err(|e| e.to_string())?;
    check(split.max_cluster_size() <= 20, || {
        format!("largest {}", split.max_cluster_size())
    })?;
    check(
        labels(n).iter().all(|l| split.cluster_of(l).is_some()),
        || "language lost".into(),
    )
}

// ---------------------------------------------------------------------------
// 7. Anomaly

fn anomaly_scores() -> Outcome {
    let corpus = MonoCorpus::new(
        "xx",
        (0..200)
            .map(|i| format!("tok{} tok{} common", i % 17, i % 5))
            .collect(),
    );
    let r = anomaly_report(&corpus, &corpus, 10).map_err(|e| e.to_string())?;
    close(r.harmonic, 1.0, 1e-9, "self harmonic")?;
    check(r.flags.contains(&AnomalyFlag::TrainingEcho), || {
        format!("{r:?}")
    })?;
    let r = report_from_scores("xx", 0.8, 0.6, 25_000);
    close(r.harmonic, 2.0 * 0.8 * 0.6 / 1.4, 1e-9, "harmonic")?;
    close(r.harmonic, 0.686, 5e-4, "rounded harmonic")?;
    check(r.flags.contains(&AnomalyFlag::SuspiciousLow), || {
        format!("{r:?}")
    })?;
    check(!r.flags.contains(&AnomalyFlag::TrainingEcho), || {
        format!("{r:?}")
    })
}

// ---------------------------------------------------------------------------
// 8. Hit-rate

fn hit_rate_matches_oracle() -> Outcome {
    const VOCAB: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.gen_range(0..8);
        (0..n)
            .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut undefined = 0;
    for i in 0..20 {
        let n = rng.gen_range(1..5);
        let refs: Vec<String> = (0..n).map(|_| sentence(&mut rng)).collect();
        let hyps: Vec<String> = if i % 4 == 0 {
            // Hypotheses repeating reference tokens many times exercise the cap.
            refs.iter().map(|r| format!("{r} {r} {r}")).collect()
        } else {
            (0..n).map(|_| sentence(&mut rng)).collect()
        };
        let bin: Vec<&str> = if i % 5 == 0 {
            vec!["zz"]
        } else {
            VOCAB
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.4))
                .collect()
        };
        let h: Vec<&str> = hyps.iter().map(String::as_str).collect();
        let r: Vec<&str> = refs.iter().map(String::as_str).collect();
        let ours = hit_rate(&h, &r, &bin).map_err(|e| e.to_string())?;
        let want = oracle::hit_rate(&h, &r, &bin);
        let absent = !r
            .iter()
            .any(|s| s.split_whitespace().any(|t| bin.contains(&t)));
        check(ours.is_none() == absent, || {
            format!("{r:?} {bin:?}: {ours:?}")
        })?;
        undefined += absent as usize;
        match (ours, want) {
            (Some(a), Some(b)) => {
                close(a, b, 1e-12, &format!("triple {i}"))?;
                check(a <= 1.0, || format!("rate {a}"))?;
                if i % 4 == 0 {
                    close(a, 1.0, 0.0, "capped")?;
                }
            }
            (None, None) => {}
            _ => return Err(format!("triple {i}: {ours:?} vs {want:?}")),
        }
    }
    check(undefined >= 4, || {
        format!("only {undefined} undefined cases")
    })
}

// ---------------------------------------------------------------------------
// 9. RTT

struct Identity;

impl Translator for Identity {
    fn translate(&mut self, text: &str, _: &str, _: &str) -> Result<String, TranslatorError> {
        Ok(text.to_string())
    }
}

/// Echoes the input; the predictor decides which intermediates are accepted.
struct Fixed {
    langs: Vec<String>,
    accept: fn(&str) -> bool,
}

impl Predictor for Fixed {
    fn languages(&self) -> &[String] {
        &self.langs
    }

    fn predict(&self, text: &str) -> Prediction {
        let lang = if (self.accept)(text) { "xx" } else { "en" };
        Prediction {
            lang: lang.into(),
            confidence: 1.0,
        }
    }
}

fn rtt_modes() -> Outcome {
    let sources: Vec<String> = (0..40)
        .map(|i| format!("sentence number {i} here"))
        .collect();
    let langs = vec!["en".to_string(), "xx".to_string()];
    let always = Fixed {
        langs: langs.clone(),
        accept: |_| true,
    };
    for mode in [RttMode::Loose, RttMode::Strict] {
        let r = rtt_langid_chrf(&sources, "xx", &mut Identity, &always, mode);
        check(r.score == RttScore::Valid(100.0), || {
            format!("{mode:?}: {r:?}")
        })?;
    }
    let never = Fixed {
        langs: langs.clone(),
        accept: |_| false,
    };
    let r = rtt_langid_chrf(&sources, "xx", &mut Identity, &never, RttMode::Loose);
    check(r.score == RttScore::Invalid, || format!("{r:?}"))?;
    let half = Fixed {
        langs,
        accept: |t| {
            t.split_whitespace()
                .nth(2)
                .and_then(|n| n.parse::<u32>().ok())
                .is_some_and(|n| n % 2 == 0)
        },
    };
    let loose = rtt_langid_chrf(&sources, "xx", &mut Identity, &half, RttMode::Loose);
    let strict = rtt_langid_chrf(&sources, "xx", &mut Identity, &half, RttMode::Strict);
    close(loose.valid_fraction, 0.5, 0.0, "valid fraction")?;
    check(loose.score == RttScore::Valid(100.0), || {
        format!("{loose:?}")
    })?;
    match strict.score {
        RttScore::Valid(s) => close(s, 50.0, 1e-9, "strict"),
        RttScore::Invalid => Err(format!("{strict:?}")),
    }
}

// ---------------------------------------------------------------------------
// 10. Audit score

fn audit_matches_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let mut w: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let labels = AuditLabels {
            cc: w[0],
            cb: w[1],
            ca: w[2],
            wd: w[3],
        };
        let want = w[0] + w[1] / 2.0 + w[2] * 3.0 / 10.0 + w[3] / 5.0;
        close(
            audit_score(&labels).map_err(|e| e.to_string())?,
            want,
            1e-12,
            "audit",
        )?;
    }
    check(
        audit_score(&AuditLabels {
            cc: 0.6,
            cb: 0.6,
            ca: 0.0,
            wd: 0.0,
        })
        .is_err(),
        || "sum > 1 accepted".into(),
    )
}

// ---------------------------------------------------------------------------
// 11. End to end

fn read_corpora(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir.join(CORPORA_DIR)).unwrap() {
        let p = e.unwrap().path();
        out.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).unwrap(),
        );
    }
    out
}

fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = generate(&SynthConfig::default());
    let base = common::write_synth(tmp.path(), &data);
    let inputs = PipelineInputs::load(&base).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for workers in [1, 8] {
        let mut config = base.clone();
        config.workers = workers;
        config.output.dir = tmp.path().join(format!("out-{workers}"));
        let run = pipeline::run(&config, &inputs).map_err(|e| e.to_string())?;
        pipeline::write_outputs(&config, &run).map_err(|e| e.to_string())?;
        outputs.push((read_corpora(&config.output.dir), run));
    }
    let (files_1, run_1) = &outputs[0];
    let (files_8, run_8) = &outputs[1];
    check(files_1 == files_8, || {
        "corpora differ between 1 and 8 workers".into()
    })?;
    check(
        run_1.manifest.without_timings() == run_8.manifest.without_timings(),
        || "manifests differ".into(),
    )?;
    for lang in &data.languages {
        let mined = run_1
            .corpora
            .get(lang)
            .map(|c| c.sentences.clone())
            .unwrap_or_default();
        let (p, r) = data.score(lang, &mined);
        check(p >= 0.95 && r >= 0.70, || {
            format!("{lang}: precision {p:.3}, recall {r:.3}")
        })?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(120), || {
        format!("took {elapsed:?}")
    })
}

// ---------------------------------------------------------------------------
// 12. Paring

fn sizes(
    cm: &ConfusionMatrix,
    n: usize,
    special: Option<(&str, usize)>,
) -> BTreeMap<String, usize> {
    cm.languages
        .iter()
        .map(|l| (l.clone(), special.filter(|s| s.0 == l).map_or(n, |s| s.1)))
        .collect()
}

fn reasons_of(
    cm: &ConfusionMatrix,
    train: &BTreeMap<String, usize>,
) -> BTreeMap<String, Vec<DropReason>> {
    pare_languages(cm, train, &ParingThresholds::default())
        .languages
        .into_iter()
        .map(|l| (l.lang, l.reasons))
        .collect()
}

fn precision_matrix(correct: u64) -> ConfusionMatrix {
    // "a" is always right on its own examples but collects false positives
    // from six other languages, none contributing more than half of row "a".
    let langs: Vec<String> = ["a", "b", "c", "d", "e", "f", "g"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let n = langs.len();
    let false_pos = 1000 - correct;
    let mut counts = vec![vec![0u64; n]; n];
    counts[0][0] = correct;
    for d in 1..n {
        let share = false_pos / 6 + u64::from((d as u64) <= false_pos % 6);
        counts[d][0] = share;
        counts[d][d] = 1000 - share;
    }
    ConfusionMatrix::from_counts(langs, counts).unwrap()
}

fn confusion_matrix(confused: u64) -> ConfusionMatrix {
    let langs = vec!["a".to_string(), "b".to_string()];
    ConfusionMatrix::from_counts(langs, vec![vec![1000 - confused, confused], vec![0, 2000]])
        .unwrap()
}

fn paring_boundaries() -> Outcome {
    let none: Vec<DropReason> = Vec::new();
    for (correct, want) in [(329, vec![DropReason::LowPrecision]), (331, none.clone())] {
        let cm = precision_matrix(correct);
        close(
            cm.precision_at(0).value,
            correct as f64 / 1000.0,
            1e-12,
            "precision fixture",
        )?;
        let got = reasons_of(&cm, &sizes(&cm, 5000, None));
        check(got["a"] == want, || format!("precision {correct}: {got:?}"))?;
        check(
            got.iter()
                .filter(|(l, _)| *l != "a")
                .all(|(_, r)| r.is_empty()),
            || format!("{got:?}"),
        )?;
    }
    for (confused, want) in [(499, none.clone()), (501, vec![DropReason::HighConfusion])] {
        let cm = confusion_matrix(confused);
        let got = reasons_of(&cm, &sizes(&cm, 5000, None));
        check(got["a"] == want && got["b"].is_empty(), || {
            format!("confusion {confused}: {got:?}")
        })?;
    }
    for (n, want) in [(1999, vec![DropReason::TooFewExamples]), (2000, none)] {
        let cm = confusion_matrix(0);
        let got = reasons_of(&cm, &sizes(&cm, 5000, Some(("a", n))));
        check(got["a"] == want && got["b"].is_empty(), || {
            format!("size {n}: {got:?}")
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("chrf matches reference scorer", chrf_matches_oracle),
        ("document plurality cluster kept", consistency_plurality),
        (
            "majority sentences never dropped",
            consistency_majority_kept,
        ),
        (
            "tf-iif matches exhaustive scoring",
            tfiif_matches_exhaustive,
        ),
        ("rrr gate truth table", rrr_truth_table),
        ("average linkage and resplit", clustering_matches_naive),
        ("anomaly scores and flags", anomaly_scores),
        ("hit-rate matches reference", hit_rate_matches_oracle),
        ("round-trip modes", rtt_modes),
        ("audit score arithmetic", audit_matches_arithmetic),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("paring boundaries", paring_boundaries),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS {:>2} {name} ({ms} ms)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({ms} ms): {e}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
