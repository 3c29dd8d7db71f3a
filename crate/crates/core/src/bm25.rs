//! Document-level inverted index scored with Okapi BM25.
//!
//! Scoring uses the non-negative `+1` idf form
//! `ln(1 + (N - df + 0.5) / (df + 0.5))` together with the usual saturating
//! term-frequency weight `tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl))`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DocId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Bm25Error {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("BM25 precondition violated: {0}")]
    Domain(String),
    #[error("index file line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Lowercasing tokenizer splitting on anything that is not alphanumeric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Analyzer {
    pub lowercase: bool,
    /// Index each utterance's speaker name along with its words.
    pub index_speakers: bool,
}

impl Default for Analyzer {
    fn default() -> Self {
        Self {
            lowercase: true,
            index_speakers: true,
        }
    }
}

impl Analyzer {
    pub fn analyze(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .collect()
    }

    pub fn analyze_all<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        texts.into_iter().flat_map(|t| self.analyze(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// BM25 contribution of one term to one document.
pub fn bm25_term_score(
    tf: u32,
    df: u32,
    n_docs: u32,
    doc_len: u32,
    avg_doc_len: f64,
    params: Bm25Params,
) -> Result<f64, Bm25Error> {
    if tf == 0 {
        return Err(Bm25Error::Domain("tf must be at least 1".into()));
    }
    if df == 0 || df > n_docs {
        return Err(Bm25Error::Domain(format!("need 1 <= df <= N, got df={df} N={n_docs}")));
    }
    if doc_len == 0 {
        return Err(Bm25Error::Domain("doc_len must be at least 1".into()));
    }
    if !(avg_doc_len > 0.0) {
        return Err(Bm25Error::Domain(format!("avgdl must be positive, got {avg_doc_len}")));
    }
    Ok(term_score_unchecked(
        tf as f64,
        df as f64,
        n_docs as f64,
        doc_len as f64,
        avg_doc_len,
        params,
    ))
}

#[inline]
fn term_score_unchecked(tf: f64, df: f64, n: f64, doc_len: f64, avgdl: f64, p: Bm25Params) -> f64 {
    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    let norm = p.k1 * (1.0 - p.b + p.b * doc_len / avgdl);
    let saturation = tf * (p.k1 + 1.0) / (tf + norm);
    idf * saturation
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: DocId,
    pub tf: u32,
}

/// Ranked documents, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedList {
    pub entries: Vec<(DocId, f64)>,
}

impl RankedList {
    pub fn docs(&self) -> Vec<DocId> {
        self.entries.iter().map(|&(d, _)| d).collect()
    }

    pub fn top(&self) -> Option<DocId> {
        self.entries.first().map(|&(d, _)| d)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, doc: DocId) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == doc).map(|e| e.1)
    }
}

/// Sorts by descending score, ascending doc id on ties, and keeps `k`.
pub fn rank_scores(mut scored: Vec<(DocId, f64)>, k: usize) -> RankedList {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    RankedList { entries: scored }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    params: Bm25Params,
    analyzer: Analyzer,
}

impl Bm25Index {
    /// Builds from already-analyzed documents; `docs[i]` becomes `DocId(i)`.
    pub fn from_documents(docs: &[Vec<String>], params: Bm25Params, analyzer: Analyzer) -> Result<Self, Bm25Error> {
        if docs.is_empty() {
            return Err(Bm25Error::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (i, terms) in docs.iter().enumerate() {
            let doc = DocId(i as u32);
            let mut tfs: BTreeMap<&str, u32> = BTreeMap::new();
            for t in terms {
                *tfs.entry(t.as_str()).or_default() += 1;
            }
            for (term, tf) in tfs {
                postings.entry(term.to_string()).or_default().push(Posting { doc, tf });
            }
            doc_lengths.push(terms.len() as u32);
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        Ok(Self {
            postings,
            avg_doc_length: total as f64 / doc_lengths.len() as f64,
            doc_lengths,
            params,
            analyzer,
        })
    }

    /// Indexes every episode of `corpus` as one document.
    pub fn build(corpus: &Corpus, params: Bm25Params, analyzer: Analyzer) -> Result<Self, Bm25Error> {
        let docs: Vec<Vec<String>> = corpus
            .episodes
            .iter()
            .map(|ep| {
                let mut terms = Vec::new();
                for u in ep.utterances() {
                    if analyzer.index_speakers {
                        terms.extend(analyzer.analyze(&u.speaker));
                    }
                    for s in &u.sentences {
                        terms.extend(analyzer.analyze_all(s.tokens().iter().map(|t| t.form.as_str())));
                    }
                }
                terms
            })
            .collect();
        Self::from_documents(&docs, params, analyzer)
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc: DocId) -> Option<u32> {
        self.doc_lengths.get(doc.index()).copied()
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn analyzer(&self) -> Analyzer {
        self.analyzer
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    /// Top `k` documents for the analyzed `query_terms`. Repeated query terms
    /// count once per occurrence; documents scoring 0 are omitted.
    pub fn retrieve(&self, query_terms: &[String], k: usize) -> RankedList {
        let n = self.doc_count() as f64;
        let mut acc = vec![0.0f64; self.doc_count()];
        let mut touched = vec![false; self.doc_count()];
        for term in query_terms {
            let postings = self.postings(term);
            let df = postings.len() as f64;
            for p in postings {
                let i = p.doc.index();
                acc[i] += term_score_unchecked(
                    p.tf as f64,
                    df,
                    n,
                    self.doc_lengths[i] as f64,
                    self.avg_doc_length,
                    self.params,
                );
                touched[i] = true;
            }
        }
        let scored = acc
            .into_iter()
            .enumerate()
            .filter(|&(i, s)| touched[i] && s > 0.0)
            .map(|(i, s)| (DocId(i as u32), s))
            .collect();
        rank_scores(scored, k)
    }

    /// Analyzes `text` with the index's analyzer, then retrieves.
    pub fn search(&self, text: &str, k: usize) -> RankedList {
        self.retrieve(&self.analyzer.analyze(text), k)
    }

    const HEADER: &'static str = "xgenre-bm25 1";

    /// Line-oriented serialization: header, parameters, doc lengths, then one
    /// `term<TAB>doc:tf ...` line per term. Extra `# ...` lines from
    /// `comments` are written after the header.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = String::new();
        out.push_str(Self::HEADER);
        out.push('\n');
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(
            out,
            "params\t{}\t{}\t{}\t{}",
            self.params.k1, self.params.b, self.analyzer.lowercase, self.analyzer.index_speakers
        );
        let lengths: Vec<String> = self.doc_lengths.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "docs\t{}", lengths.join(" "));
        for (term, postings) in &self.postings {
            let list: Vec<String> = postings.iter().map(|p| format!("{}:{}", p.doc.0, p.tf)).collect();
            let _ = writeln!(out, "{term}\t{}", list.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, Bm25Error> {
        let err = |line: usize, message: &str| Bm25Error::Format {
            line,
            message: message.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.starts_with('#'));
        match lines.next() {
            Some((_, Self::HEADER)) => {}
            Some((n, _)) => return Err(err(n, "unknown header or version")),
            None => return Err(err(1, "empty file")),
        }
        let (n, params_line) = lines.next().ok_or_else(|| err(2, "missing params"))?;
        let f: Vec<&str> = params_line.split('\t').collect();
        if f.len() != 5 || f[0] != "params" {
            return Err(err(n, "malformed params line"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(n, "bad number"));
        let flag = |s: &str| s.parse::<bool>().map_err(|_| err(n, "bad flag"));
        let params = Bm25Params {
            k1: num(f[1])?,
            b: num(f[2])?,
        };
        let analyzer = Analyzer {
            lowercase: flag(f[3])?,
            index_speakers: flag(f[4])?,
        };
        let (n, docs_line) = lines.next().ok_or_else(|| err(3, "missing docs"))?;
        let rest = docs_line
            .strip_prefix("docs\t")
            .ok_or_else(|| err(n, "malformed docs line"))?;
        let doc_lengths = rest
            .split(' ')
            .map(|s| s.parse::<u32>().map_err(|_| err(n, "bad doc length")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut postings = BTreeMap::new();
        for (n, line) in lines {
            let (term, list) = line.split_once('\t').ok_or_else(|| err(n, "missing tab"))?;
            let list = list
                .split(' ')
                .map(|p| {
                    let (d, tf) = p.split_once(':').ok_or_else(|| err(n, "bad posting"))?;
                    let doc = d.parse::<u32>().map_err(|_| err(n, "bad doc id"))?;
                    if doc as usize >= doc_lengths.len() {
                        return Err(err(n, "posting for unknown document"));
                    }
                    Ok(Posting {
                        doc: DocId(doc),
                        tf: tf.parse().map_err(|_| err(n, "bad tf"))?,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            postings.insert(term.to_string(), list);
        }
        if doc_lengths.is_empty() {
            return Err(Bm25Error::EmptyCorpus);
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        Ok(Self {
            postings,
            avg_doc_length: total as f64 / doc_lengths.len() as f64,
            doc_lengths,
            params,
            analyzer,
        })
    }
}
