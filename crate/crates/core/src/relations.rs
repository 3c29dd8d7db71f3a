//! Predicate-argument relations and the relation-level inverted index.
//!
//! A relation is a predicate together with the content words found in the
//! dependency subtrees of its semantic-role arguments. Relations taken from
//! dialogue also carry the speaker's name as an extra word.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, Corpus, DocId, Token};

/// Penn tags treated as content words.
const CONTENT_TAG_PREFIXES: [&str; 5] = ["NN", "VB", "JJ", "RB", "CD"];

/// Penn tags that are never kept, even inside a named entity.
const FUNCTION_TAGS: [&str; 28] = [
    "DT", "PDT", "MD", "PRP", "PRP$", "WP", "WP$", "WDT", "WRB", "IN", "CC", "TO", "RP", "UH", "EX", "POS", ".", ",",
    ":", "``", "''", "-LRB-", "-RRB-", "HYPH", "NFP", "$", "#", "-NONE-",
];

/// Lemmas dropped regardless of tag: auxiliaries, negation, discourse fillers.
const STOPWORDS: [&str; 45] = [
    "be", "have", "do", "will", "would", "can", "could", "shall", "should", "may", "might", "must", "not", "n't", "no",
    "yes", "yeah", "oh", "okay", "ok", "well", "um", "uh", "hmm", "so", "just", "really", "very", "too", "also",
    "then", "there", "here", "even", "ever", "gonna", "wanna", "'s", "'re", "'m", "'ll", "'ve", "'d", "hey", "please",
];

pub fn is_function_tag(pos: &str) -> bool {
    FUNCTION_TAGS.contains(&pos) || pos.chars().all(|c| !c.is_alphanumeric())
}

/// Whether `token` survives noise pruning.
pub fn is_content_word(token: &Token) -> bool {
    if is_function_tag(&token.pos) || token.deprel.starts_with("aux") {
        return false;
    }
    if STOPWORDS.contains(&token.lemma.to_lowercase().as_str()) {
        return false;
    }
    token.is_entity() || CONTENT_TAG_PREFIXES.iter().any(|p| token.pos.starts_with(p))
}

/// A surface form with its lemma.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word {
    pub surface: String,
    pub lemma: String,
}

impl Word {
    pub fn new(surface: &str, lemma: &str) -> Self {
        Self {
            surface: surface.to_string(),
            lemma: lemma.to_string(),
        }
    }

    fn of(token: &Token) -> Self {
        Self::new(&token.form, &token.lemma)
    }
}

/// Where a relation was extracted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Dialogue {
        doc: DocId,
        scene: u32,
        utterance: u32,
        sentence: u32,
    },
    Query {
        query_id: String,
    },
}

/// Which form of a word is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchKey {
    /// Lowercased surface form.
    Surface,
    Lemma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RelationParts {
    predicate: Word,
    arguments: BTreeSet<Word>,
    speaker: Option<String>,
    origin: Origin,
    origin_length: usize,
}

/// A predicate with its argument words.
///
/// The word set used for matching is the predicate, the argument words and
/// the speaker (when present), keyed by lowercased surface or lowercased lemma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RelationParts", into = "RelationParts")]
pub struct Relation {
    parts: RelationParts,
    surface_keys: Vec<String>,
    lemma_keys: Vec<String>,
    /// (surface key, lemma key) once per distinct surface key.
    embedding_terms: Vec<(String, String)>,
}

impl From<RelationParts> for Relation {
    fn from(parts: RelationParts) -> Self {
        let mut pairs: Vec<(String, String)> = std::iter::once(&parts.predicate)
            .chain(parts.arguments.iter())
            .map(|w| (w.surface.to_lowercase(), w.lemma.to_lowercase()))
            .chain(parts.speaker.iter().map(|s| (s.to_lowercase(), s.to_lowercase())))
            .collect();
        pairs.sort();
        pairs.dedup();
        let mut surface_keys: Vec<String> = pairs.iter().map(|p| p.0.clone()).collect();
        surface_keys.dedup();
        let mut lemma_keys: Vec<String> = pairs.iter().map(|p| p.1.clone()).collect();
        lemma_keys.sort();
        lemma_keys.dedup();
        let mut embedding_terms = pairs;
        embedding_terms.dedup_by(|a, b| a.0 == b.0);
        Self {
            parts,
            surface_keys,
            lemma_keys,
            embedding_terms,
        }
    }
}

impl From<Relation> for RelationParts {
    fn from(r: Relation) -> Self {
        r.parts
    }
}

impl Relation {
    pub fn new(
        predicate: Word,
        arguments: BTreeSet<Word>,
        speaker: Option<String>,
        origin: Origin,
        origin_length: usize,
    ) -> Self {
        RelationParts {
            predicate,
            arguments,
            speaker,
            origin,
            origin_length,
        }
        .into()
    }

    pub fn predicate(&self) -> &Word {
        &self.parts.predicate
    }

    pub fn arguments(&self) -> &BTreeSet<Word> {
        &self.parts.arguments
    }

    pub fn speaker(&self) -> Option<&str> {
        self.parts.speaker.as_deref()
    }

    pub fn origin(&self) -> &Origin {
        &self.parts.origin
    }

    /// Token count of the whole source sentence.
    pub fn origin_length(&self) -> usize {
        self.parts.origin_length
    }

    pub fn doc(&self) -> Option<DocId> {
        match self.parts.origin {
            Origin::Dialogue { doc, .. } => Some(doc),
            Origin::Query { .. } => None,
        }
    }

    /// Sorted, distinct matching keys.
    pub fn keys(&self, key: MatchKey) -> &[String] {
        match key {
            MatchKey::Surface => &self.surface_keys,
            MatchKey::Lemma => &self.lemma_keys,
        }
    }

    pub fn embedding_terms(&self) -> &[(String, String)] {
        &self.embedding_terms
    }

    /// Number of shared keys.
    pub fn overlap(&self, other: &Relation, key: MatchKey) -> usize {
        sorted_intersection_len(self.keys(key), other.keys(key))
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<&str> = self.parts.arguments.iter().map(|w| w.surface.as_str()).collect();
        write!(
            f,
            "{}({}; {})",
            self.parts.predicate.lemma,
            self.parts.speaker.as_deref().unwrap_or(""),
            args.join(" ")
        )
    }
}

fn sorted_intersection_len(a: &[String], b: &[String]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// One relation per predicate that has at least one argument.
///
/// Each argument's dependency subtree (minus the predicate itself) is walked
/// and only content words are kept; see [`is_content_word`].
pub fn extract_relations(sentence: &AnnotatedSentence, speaker: Option<&str>, origin: Origin) -> Vec<Relation> {
    let children = sentence.children();
    let mut relations = Vec::new();
    for pred in sentence.predicates() {
        let args = sentence.arguments_of(pred);
        if args.is_empty() {
            continue;
        }
        let predicate = sentence.token(pred).expect("predicate index valid");
        if predicate.lemma.is_empty() {
            continue;
        }
        let mut words = BTreeSet::new();
        for (arg, _label) in args {
            let mut stack = vec![arg];
            while let Some(i) = stack.pop() {
                if i == pred {
                    continue;
                }
                let tok = sentence.token(i).expect("subtree index valid");
                if is_content_word(tok) {
                    words.insert(Word::of(tok));
                }
                stack.extend(children[i].iter().copied());
            }
        }
        relations.push(Relation::new(
            Word::of(predicate),
            words,
            speaker.map(str::to_string),
            origin.clone(),
            sentence.len(),
        ));
    }
    relations
}

pub fn query_relations(query: &crate::corpus::Query) -> Vec<Relation> {
    extract_relations(
        &query.sentence,
        None,
        Origin::Query {
            query_id: query.query_id.clone(),
        },
    )
}

/// All relations of one episode, in transcript order.
pub fn episode_relations(corpus: &Corpus, doc: DocId) -> Vec<Relation> {
    let Some(ep) = corpus.episode(doc) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (si, scene) in ep.scenes.iter().enumerate() {
        for (ui, u) in scene.utterances.iter().enumerate() {
            for (ti, s) in u.sentences.iter().enumerate() {
                let origin = Origin::Dialogue {
                    doc,
                    scene: si as u32,
                    utterance: ui as u32,
                    sentence: ti as u32,
                };
                out.extend(extract_relations(s, Some(&u.speaker), origin));
            }
        }
    }
    out
}

/// The candidate set R^d: document relations sharing at least one lemma with
/// `query`, in input order.
pub fn candidate_relations<'a>(doc_relations: &'a [Relation], query: &Relation) -> Vec<&'a Relation> {
    doc_relations
        .iter()
        .filter(|r| r.overlap(query, MatchKey::Lemma) >= 1)
        .collect()
}

/// Access to per-document relations.
pub trait RelationSource {
    fn doc_relations(&self, doc: DocId) -> &[Relation];

    /// Relations of `doc` sharing a lemma with `query`, in stored order.
    fn candidates(&self, doc: DocId, query: &Relation) -> Vec<&Relation> {
        candidate_relations(self.doc_relations(doc), query)
    }
}

/// Per-document relation lists searched by linear scan.
#[derive(Debug, Clone, Default)]
pub struct ScanSource {
    pub docs: Vec<Vec<Relation>>,
}

impl RelationSource for ScanSource {
    fn doc_relations(&self, doc: DocId) -> &[Relation] {
        self.docs.get(doc.index()).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u32);

/// Lemma-keyed inverted index over dialogue relations.
///
/// Relations are stored grouped by document, so relation ids increase with
/// document ids and every posting list is sorted by `(doc, relation)`.
#[derive(Debug, Clone, Default)]
pub struct RelationIndex {
    relations: Vec<Relation>,
    /// `doc_ranges[d]` is the id range of document `d`'s relations.
    doc_ranges: Vec<(u32, u32)>,
    postings: HashMap<String, Vec<(RelationId, DocId)>>,
}

#[derive(Serialize, Deserialize)]
struct StoredRelationIndex {
    format: String,
    version: u32,
    #[serde(default)]
    comments: Vec<String>,
    docs: Vec<Vec<Relation>>,
}

const STORED_FORMAT: &str = "xgenre-relations";

impl RelationIndex {
    /// Builds from per-document relation lists; `docs[i]` belongs to `DocId(i)`.
    pub fn from_doc_relations(docs: Vec<Vec<Relation>>) -> Self {
        let mut relations = Vec::new();
        let mut doc_ranges = Vec::with_capacity(docs.len());
        let mut postings: HashMap<String, Vec<(RelationId, DocId)>> = HashMap::new();
        for (d, rels) in docs.into_iter().enumerate() {
            let doc = DocId(d as u32);
            let start = relations.len() as u32;
            for r in rels {
                let id = RelationId(relations.len() as u32);
                for key in r.keys(MatchKey::Lemma) {
                    postings.entry(key.clone()).or_default().push((id, doc));
                }
                relations.push(r);
            }
            doc_ranges.push((start, relations.len() as u32));
        }
        Self {
            relations,
            doc_ranges,
            postings,
        }
    }

    pub fn build(corpus: &Corpus) -> Self {
        let docs: Vec<Vec<Relation>> = corpus
            .doc_ids()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&d| episode_relations(corpus, d))
            .collect();
        Self::from_doc_relations(docs)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ranges.len()
    }

    pub fn relation(&self, id: RelationId) -> &Relation {
        &self.relations[id.0 as usize]
    }

    /// All `(relation, doc)` pairs whose word set contains `lemma`.
    pub fn lookup(&self, lemma: &str) -> &[(RelationId, DocId)] {
        self.postings
            .get(&lemma.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Posted words, sorted.
    pub fn words(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.postings.keys().map(String::as_str).collect();
        w.sort_unstable();
        w
    }

    pub fn to_json(&self, comments: &[String]) -> String {
        let stored = StoredRelationIndex {
            format: STORED_FORMAT.into(),
            version: 1,
            comments: comments.to_vec(),
            docs: (0..self.doc_count())
                .map(|d| self.doc_relations(DocId(d as u32)).to_vec())
                .collect(),
        };
        serde_json::to_string(&stored).expect("relations serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let stored: StoredRelationIndex = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if stored.format != STORED_FORMAT || stored.version != 1 {
            return Err(format!(
                "unsupported relation index {} v{}",
                stored.format, stored.version
            ));
        }
        Ok(Self::from_doc_relations(stored.docs))
    }
}

impl RelationSource for RelationIndex {
    fn doc_relations(&self, doc: DocId) -> &[Relation] {
        match self.doc_ranges.get(doc.index()) {
            Some(&(a, b)) => &self.relations[a as usize..b as usize],
            None => &[],
        }
    }

    fn candidates(&self, doc: DocId, query: &Relation) -> Vec<&Relation> {
        let mut ids: Vec<RelationId> = Vec::new();
        for key in query.keys(MatchKey::Lemma) {
            let Some(list) = self.postings.get(key) else {
                continue;
            };
            let lo = list.partition_point(|&(_, d)| d < doc);
            let hi = lo + list[lo..].partition_point(|&(_, d)| d == doc);
            ids.extend(list[lo..hi].iter().map(|&(id, _)| id));
        }
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(|id| self.relation(id)).collect()
    }
}
