//! Deliberately naive reference implementations. They favor the most literal
//! reading of each definition over speed.
//!
//! Token-level oracles split on whitespace and lowercase; callers feed them
//! punctuation-free text so this matches the production tokenizer.

use std::collections::HashMap;

pub fn simple_tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(|t| t.to_lowercase()).collect()
}

// ---------------------------------------------------------------------------
// ChrF: nc 6, nw 0, beta 2, whitespace removed, effective order.

fn ngram_table(s: &str, n: usize) -> HashMap<String, usize> {
    let chars: Vec<char> = s.split_whitespace().flat_map(|w| w.chars()).collect();
    let mut table = HashMap::new();
    let mut start = 0;
    while start + n <= chars.len() {
        let g: String = chars[start..start + n].iter().collect();
        *table.entry(g).or_insert(0) += 1;
        start += 1;
    }
    table
}

/// `(hyp, ref, match)` totals for orders 1..=6 summed over all pairs.
fn chrf_totals(pairs: &[(&str, &str)]) -> [(usize, usize, usize); 6] {
    let mut totals = [(0, 0, 0); 6];
    for (hyp, rf) in pairs {
        for n in 1..=6 {
            let h = ngram_table(hyp, n);
            let r = ngram_table(rf, n);
            let ref_total: usize = r.values().sum();
            let mut hyp_total = 0;
            let mut matched = 0;
            for (g, c) in &h {
                hyp_total += c;
                matched += (*c).min(*r.get(g).unwrap_or(&0));
            }
            if ref_total == 0 {
                hyp_total = 0;
            }
            totals[n - 1].0 += hyp_total;
            totals[n - 1].1 += ref_total;
            totals[n - 1].2 += matched;
        }
    }
    totals
}

fn f_beta(totals: &[(usize, usize, usize); 6]) -> f64 {
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for &(h, r, m) in totals {
        if h > 0 && r > 0 {
            precisions.push(m as f64 / h as f64);
            recalls.push(m as f64 / r as f64);
        }
    }
    if precisions.is_empty() {
        return 0.0;
    }
    let p = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let r = recalls.iter().sum::<f64>() / recalls.len() as f64;
    if p + r == 0.0 {
        return 0.0;
    }
    let b2 = 4.0;
    100.0 * (1.0 + b2) * p * r / (b2 * p + r)
}

pub fn chrf_sentence(hyp: &str, rf: &str) -> f64 {
    f_beta(&chrf_totals(&[(hyp, rf)]))
}

pub fn chrf_corpus(hyps: &[&str], refs: &[&str]) -> f64 {
    assert_eq!(hyps.len(), refs.len());
    let pairs: Vec<(&str, &str)> = hyps.iter().copied().zip(refs.iter().copied()).collect();
    f_beta(&chrf_totals(&pairs))
}

// ---------------------------------------------------------------------------
// Average linkage, recomputing every cluster-pair average from scratch.

#[derive(Debug, Clone, Copy)]
pub enum NaiveCut {
    NClusters(usize),
    Below(f64),
}

/// Flat labels, numbered by first appearance in leaf order. Ties between
/// equal averages go to the pair whose smallest members are lexicographically
/// smallest.
pub fn naive_average_linkage(d: &[Vec<f64>], cut: NaiveCut) -> Vec<usize> {
    let n = d.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        if let NaiveCut::NClusters(k) = cut {
            if clusters.len() <= k {
                break;
            }
        }
        if clusters.len() < 2 {
            break;
        }
        clusters.sort_by_key(|c| *c.iter().min().unwrap());
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut total = 0.0;
                for &x in &clusters[a] {
                    for &y in &clusters[b] {
                        total += d[x][y];
                    }
                }
                let avg = total / (clusters[a].len() * clusters[b].len()) as f64;
                let better = match best {
                    None => true,
                    Some((v, _, _)) => avg < v,
                };
                if better {
                    best = Some((avg, a, b));
                }
            }
        }
        let (avg, a, b) = best.unwrap();
        if let NaiveCut::Below(t) = cut {
            if avg >= t {
                break;
            }
        }
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for leaf in 0..n {
        if labels[leaf] != usize::MAX {
            continue;
        }
        let c = clusters.iter().find(|c| c.contains(&leaf)).unwrap();
        for &m in c {
            labels[m] = next;
        }
        next += 1;
    }
    labels
}

// ---------------------------------------------------------------------------
// Wordlists

/// Sorts by descending score, then ascending token, using a selection sort.
fn rank(mut scored: Vec<(String, f64)>, top: usize) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    while !scored.is_empty() && out.len() < top {
        let mut best = 0;
        for i in 1..scored.len() {
            let (t, s) = &scored[i];
            let (bt, bs) = &scored[best];
            if s > bs || (s == bs && t < bt) {
                best = i;
            }
        }
        out.push(scored.remove(best));
    }
    out
}

fn distinct_tokens(sentences: &[&str]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for s in sentences {
        for t in simple_tokens(s) {
            if !seen.contains(&t) {
                seen.push(t);
            }
        }
    }
    seen
}

fn count_in(sentences: &[&str], token: &str) -> usize {
    sentences
        .iter()
        .map(|s| simple_tokens(s).iter().filter(|t| *t == token).count())
        .sum()
}

pub fn frequency_rank(sentences: &[&str], top: usize) -> Vec<(String, f64)> {
    let scored = distinct_tokens(sentences)
        .into_iter()
        .map(|t| {
            let c = count_in(sentences, &t) as f64;
            (t, c)
        })
        .collect();
    rank(scored, top)
}

/// Frequency of the `kappa`-th most common internet token, or of the least
/// common one if there are fewer.
pub fn iif_alpha(internet: &[(&str, u64)], kappa: usize) -> f64 {
    let mut counts: Vec<u64> = internet.iter().map(|e| e.1).filter(|&c| c > 0).collect();
    counts.sort();
    counts.reverse();
    counts[(kappa - 1).min(counts.len() - 1)] as f64
}

/// Scores every corpus token exhaustively.
pub fn tfiif_rank(
    sentences: &[&str],
    internet: &[(&str, u64)],
    alpha: f64,
    tau: usize,
) -> Vec<(String, f64)> {
    let scored = distinct_tokens(sentences)
        .into_iter()
        .map(|t| {
            let tf = count_in(sentences, &t) as f64;
            let web = internet.iter().find(|e| e.0 == t).map_or(0, |e| e.1) as f64;
            let s = tf / if web > alpha { web } else { alpha };
            (t, s)
        })
        .collect();
    rank(scored, tau)
}

/// Relative frequencies over all tokens, top `n`.
pub fn token_distribution(sentences: &[&str], n: usize) -> Vec<(String, f64)> {
    let total: usize = sentences.iter().map(|s| simple_tokens(s).len()).sum();
    frequency_rank(sentences, n)
        .into_iter()
        .map(|(t, c)| (t, c / total as f64))
        .collect()
}

pub fn euclidean_distance(a: &[(String, f64)], b: &[(String, f64)]) -> f64 {
    let mut sq = 0.0;
    for (t, f) in a {
        let g = b.iter().find(|e| &e.0 == t).map_or(0.0, |e| e.1);
        sq += (f - g) * (f - g);
    }
    sq.sqrt()
}

// ---------------------------------------------------------------------------
// Hit-rate

/// Walks every reference token of the bin and consumes one matching
/// hypothesis token per hit.
pub fn hit_rate(hyps: &[&str], refs: &[&str], bin: &[&str]) -> Option<f64> {
    let mut hits = 0;
    let mut total = 0;
    for (h, r) in hyps.iter().zip(refs) {
        let mut pool = simple_tokens(h);
        for t in simple_tokens(r) {
            if !bin.contains(&t.as_str()) {
                continue;
            }
            total += 1;
            if let Some(pos) = pool.iter().position(|x| *x == t) {
                pool.remove(pos);
                hits += 1;
            }
        }
    }
    if total == 0 {
        None
    } else {
        Some(hits as f64 / total as f64)
    }
}

// ---------------------------------------------------------------------------
// Document consistency

/// Keep mask for one document given its per-sentence cluster ids.
pub fn consistency_keep(clusters: &[u32]) -> Vec<bool> {
    let mut best_id = u32::MAX;
    let mut best_n = 0;
    for &c in clusters {
        let n = clusters.iter().filter(|&&x| x == c).count();
        if n > best_n || (n == best_n && c < best_id) {
            best_id = c;
            best_n = n;
        }
    }
    clusters.iter().map(|&c| c == best_id).collect()
}

/// Consistency-score histogram with `bins` equal bins, tallied in integers.
pub fn consistency_tally(docs: &[Vec<u32>], bins: usize) -> Vec<u64> {
    let mut out = vec![0u64; bins];
    for d in docs {
        for &c in d {
            let same = d.iter().filter(|&&x| x == c).count();
            let bin = (same * bins / d.len()).min(bins - 1);
            out[bin] += 1;
        }
    }
    out
}
