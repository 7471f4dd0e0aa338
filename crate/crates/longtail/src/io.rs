//! On-disk formats: JSONL crawls, `<lang>.txt` corpora, labeled TSV, wordlist
//! and internet-frequency TSVs, negative rules and cluster maps.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use longtail_core::cluster::{ClusterId, ClusterMap};
use longtail_core::corpus::{Document, MonoCorpus, SentenceRecord};
use longtail_core::filters::{IifTable, NegativeFilterRule, WordList, WordListKind};
use longtail_core::text::normalize_sentence;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))
}

/// Writes `text` atomically enough for our purposes: whole file, then flush.
pub fn write_string(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_string(path, &text)
}

// ---------------------------------------------------------------------------
// Crawl documents

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub documents: usize,
    pub sentences: usize,
    /// `(line number, message)` of every skipped line.
    pub skipped: Vec<(usize, String)>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSentence {
    Text(String),
    Record(SentenceRecord),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    id: String,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    sentences: Option<Vec<RawSentence>>,
    #[serde(default)]
    text: Option<String>,
}

fn parse_document(line: &str) -> std::result::Result<Document, String> {
    let raw: RawDocument = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if raw.id.is_empty() {
        return Err("empty document id".into());
    }
    match (raw.sentences, raw.text) {
        (Some(sentences), None) => {
            let sentences = sentences
                .into_iter()
                .map(|s| match s {
                    RawSentence::Text(t) => Ok(SentenceRecord::new(&t)),
                    RawSentence::Record(mut r) => {
                        if r.predicted_lang.is_some() != r.predicted_cluster.is_some() {
                            return Err(
                                "predicted_lang and predicted_cluster must appear together"
                                    .to_string(),
                            );
                        }
                        r.text = normalize_sentence(&r.text);
                        Ok(r)
                    }
                })
                .collect::<std::result::Result<_, _>>()?;
            Ok(Document {
                id: raw.id,
                url: raw.url,
                sentences,
            })
        }
        (None, Some(text)) => Ok(Document::from_text(raw.id, raw.url, &text)),
        (Some(_), Some(_)) => Err("both \"sentences\" and \"text\" given".into()),
        (None, None) => Err("missing \"sentences\" or \"text\"".into()),
    }
}

/// Parses JSON-lines documents. Blank lines are ignored. In strict mode the
/// first malformed line is an error; in lenient mode it is skipped and listed.
pub fn read_documents<R: BufRead>(
    reader: R,
    path: &Path,
    mode: IngestMode,
) -> Result<(Vec<Document>, IngestReport)> {
    let mut docs = Vec::new();
    let mut report = IngestReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        report.lines = line_no;
        if line.trim().is_empty() {
            continue;
        }
        match parse_document(&line) {
            Ok(d) => {
                report.sentences += d.sentences.len();
                docs.push(d);
            }
            Err(msg) => match mode {
                IngestMode::Strict => return Err(Error::parse(path, line_no, msg)),
                IngestMode::Lenient => {
                    log::warn!("{}:{line_no}: skipped: {msg}", path.display());
                    report.skipped.push((line_no, msg));
                }
            },
        }
    }
    report.documents = docs.len();
    Ok((docs, report))
}

pub fn load_documents(path: &Path, mode: IngestMode) -> Result<(Vec<Document>, IngestReport)> {
    read_documents(open(path)?, path, mode)
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut w = create(path)?;
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Corpora

/// One sentence per line, as written by [`write_corpus`].
pub fn read_corpus(path: &Path, lang: &str) -> Result<MonoCorpus> {
    Ok(MonoCorpus::new(lang, lines(path)?))
}

pub fn corpus_path(dir: &Path, lang: &str) -> PathBuf {
    dir.join(format!("{lang}.txt"))
}

pub fn write_corpus_file(path: &Path, corpus: &MonoCorpus) -> Result<()> {
    let mut w = create(path)?;
    for s in &corpus.sentences {
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `<dir>/<lang>.txt`.
pub fn write_corpus(dir: &Path, corpus: &MonoCorpus) -> Result<PathBuf> {
    let path = corpus_path(dir, &corpus.lang);
    write_corpus_file(&path, corpus)?;
    Ok(path)
}

/// Reads every `*.txt` file of `dir`, keyed by file stem.
pub fn read_corpus_dir(dir: &Path) -> Result<BTreeMap<String, MonoCorpus>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), read_corpus(&path, stem)?);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Labeled data

/// `lang<TAB>text` lines; texts are normalized, blank lines ignored.
pub fn read_labeled(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in lines(path)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (lang, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected lang<TAB>text"))?;
        if lang.is_empty() {
            return Err(Error::parse(path, i + 1, "empty language code"));
        }
        out.push((lang.to_string(), normalize_sentence(text)));
    }
    Ok(out)
}

pub fn write_labeled(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut w = create(path)?;
    for (lang, text) in rows {
        writeln!(w, "{lang}\t{text}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Groups labeled rows into per-language corpora.
pub fn labeled_corpora(rows: &[(String, String)]) -> BTreeMap<String, MonoCorpus> {
    let mut out: BTreeMap<String, MonoCorpus> = BTreeMap::new();
    for (lang, text) in rows {
        out.entry(lang.clone())
            .or_insert_with(|| MonoCorpus::new(lang.clone(), Vec::new()))
            .sentences
            .push(text.clone());
    }
    out
}

// ---------------------------------------------------------------------------
// Wordlists and internet frequencies

fn kind_name(kind: WordListKind) -> &'static str {
    match kind {
        WordListKind::Frequency => "frequency",
        WordListKind::Tfiif => "tfiif",
    }
}

/// `token<TAB>score` lines after a `# lang=<l> kind=<k>` header.
pub fn write_wordlist(path: &Path, list: &WordList) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# lang={} kind={}", list.lang, kind_name(list.kind)).map_err(io)?;
    for (t, s) in &list.entries {
        writeln!(w, "{t}\t{s}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a wordlist; `lang` and `kind` default to the given values when the
/// file has no header.
pub fn read_wordlist(path: &Path, lang: &str, kind: WordListKind) -> Result<WordList> {
    let mut list = WordList {
        lang: lang.to_string(),
        kind,
        entries: Vec::new(),
    };
    for (i, line) in lines(path)?.into_iter().enumerate() {
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                match field.split_once('=') {
                    Some(("lang", l)) => list.lang = l.to_string(),
                    Some(("kind", "frequency")) => list.kind = WordListKind::Frequency,
                    Some(("kind", "tfiif")) => list.kind = WordListKind::Tfiif,
                    _ => {
                        return Err(Error::parse(
                            path,
                            i + 1,
                            format!("bad header field {field:?}"),
                        ))
                    }
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (t, s) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected token<TAB>score"))?;
        let s: f64 = s
            .parse()
            .map_err(|_| Error::parse(path, i + 1, "bad score"))?;
        list.entries.push((t.to_string(), s));
    }
    Ok(list)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct IifSidecar {
    kappa: usize,
    alpha: f64,
}

/// Sidecar of an internet-frequency table: `iif.tsv` -> `iif.json`.
pub fn iif_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_iif(path: &Path, table: &IifTable) -> Result<()> {
    let mut w = create(path)?;
    for (t, c) in &table.freqs {
        writeln!(w, "{t}\t{c}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(
        &iif_sidecar_path(path),
        &IifSidecar {
            kappa: table.kappa,
            alpha: table.alpha,
        },
    )
}

pub fn read_iif_counts(path: &Path) -> Result<BTreeMap<String, u64>> {
    let mut freqs = BTreeMap::new();
    for (i, line) in lines(path)?.into_iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (t, c) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected token<TAB>count"))?;
        let c: u64 = c
            .parse()
            .map_err(|_| Error::parse(path, i + 1, "bad count"))?;
        *freqs.entry(t.to_string()).or_insert(0) += c;
    }
    Ok(freqs)
}

/// Reads a table; alpha comes from the sidecar when present, otherwise it is
/// derived from `kappa`.
pub fn read_iif(path: &Path, kappa: usize) -> Result<IifTable> {
    let freqs = read_iif_counts(path)?;
    let sidecar = iif_sidecar_path(path);
    if sidecar.exists() {
        let meta: IifSidecar = read_json(&sidecar)?;
        Ok(IifTable::with_alpha(freqs, meta.kappa, meta.alpha)?)
    } else {
        Ok(IifTable::new(freqs, kappa)?)
    }
}

pub fn read_rules(path: &Path) -> Result<Vec<NegativeFilterRule>> {
    let rules: Vec<NegativeFilterRule> = read_json(path)?;
    for r in &rules {
        r.validate()?;
    }
    Ok(rules)
}

// ---------------------------------------------------------------------------
// Cluster maps

pub fn cluster_map_json(map: &ClusterMap) -> BTreeMap<&str, u32> {
    map.assignment
        .iter()
        .map(|(l, c)| (l.as_str(), c.0))
        .collect()
}

pub fn write_cluster_map(path: &Path, map: &ClusterMap) -> Result<()> {
    write_json(path, &cluster_map_json(map))
}

pub fn write_cluster_tsv(path: &Path, map: &ClusterMap) -> Result<()> {
    let mut text = String::new();
    for (l, c) in &map.assignment {
        text.push_str(&format!("{l}\t{c}\n"));
    }
    write_string(path, &text)
}

pub fn read_cluster_map(path: &Path) -> Result<ClusterMap> {
    let raw: BTreeMap<String, u32> = read_json(path)?;
    Ok(ClusterMap::from_assignment(
        raw.into_iter().map(|(l, c)| (l, ClusterId(c))),
    ))
}
