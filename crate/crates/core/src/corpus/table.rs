//! Column-per-layer token tables.
//!
//! Each non-comment line is one token with tab-separated columns
//!
//! ```text
//! index  form  lemma  pos  ner  head  deprel  predicate  [arg_1 .. arg_p]
//! ```
//!
//! where `predicate` is `_` for non-predicates and the sense label otherwise,
//! and `arg_j` holds the role label the token plays for the j-th predicate of
//! the sentence (`_` for none). Sentences are separated by one blank line.
//! Lines starting with `#` before a sentence are `key = value` comments that
//! attach to that sentence.

use std::collections::BTreeMap;

use thiserror::Error;

use super::sentence::{AnnotatedSentence, SemanticRole, SentenceError, Token};

/// Names of the fixed columns, in order.
pub const LAYERS: [&str; 8] = ["index", "form", "lemma", "pos", "ner", "head", "deprel", "predicate"];

const EMPTY: &str = "_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("missing annotation layer `{layer}` at byte {offset}")]
    MissingLayer { offset: usize, layer: &'static str },
    #[error("bad value {value:?} in layer `{layer}` at byte {offset}")]
    BadValue {
        offset: usize,
        layer: &'static str,
        value: String,
    },
    #[error("expected {expected} role columns (one per predicate), found {found} at byte {offset}")]
    RoleColumns {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid sentence ending at byte {offset}: {source}")]
    Sentence {
        offset: usize,
        #[source]
        source: SentenceError,
    },
}

impl TableError {
    pub fn offset(&self) -> usize {
        match self {
            TableError::MissingLayer { offset, .. }
            | TableError::BadValue { offset, .. }
            | TableError::RoleColumns { offset, .. }
            | TableError::Sentence { offset, .. } => *offset,
        }
    }

    /// Adds `base` to the reported byte offset.
    pub fn shifted(mut self, base: usize) -> Self {
        match &mut self {
            TableError::MissingLayer { offset, .. }
            | TableError::BadValue { offset, .. }
            | TableError::RoleColumns { offset, .. }
            | TableError::Sentence { offset, .. } => *offset += base,
        }
        self
    }
}

/// A parsed sentence with the comments that preceded it.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceBlock {
    pub comments: BTreeMap<String, String>,
    pub sentence: AnnotatedSentence,
    /// Byte offset of the block's first line.
    pub offset: usize,
}

struct RawLine<'a> {
    offset: usize,
    cols: Vec<&'a str>,
}

/// Parses every sentence in `text`.
pub fn parse_table(text: &str) -> Result<Vec<SentenceBlock>, TableError> {
    let mut blocks = Vec::new();
    let mut comments = BTreeMap::new();
    let mut lines: Vec<RawLine> = Vec::new();
    let mut block_start = None;
    let mut offset = 0;

    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            if !lines.is_empty() {
                blocks.push(finish_block(
                    std::mem::take(&mut comments),
                    std::mem::take(&mut lines),
                    block_start.take().unwrap_or(line_offset),
                    line_offset,
                )?);
            }
            continue;
        }
        block_start.get_or_insert(line_offset);
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                comments.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        lines.push(RawLine {
            offset: line_offset,
            cols: line.split('\t').collect(),
        });
    }
    if !lines.is_empty() {
        blocks.push(finish_block(comments, lines, block_start.unwrap_or(offset), offset)?);
    }
    Ok(blocks)
}

fn finish_block(
    comments: BTreeMap<String, String>,
    lines: Vec<RawLine>,
    start: usize,
    end: usize,
) -> Result<SentenceBlock, TableError> {
    let mut tokens = Vec::with_capacity(lines.len());
    for line in &lines {
        if line.cols.len() < LAYERS.len() {
            return Err(TableError::MissingLayer {
                offset: line.offset,
                layer: LAYERS[line.cols.len()],
            });
        }
        let parse_index = |layer_idx: usize| -> Result<usize, TableError> {
            line.cols[layer_idx].parse::<usize>().map_err(|_| TableError::BadValue {
                offset: line.offset,
                layer: LAYERS[layer_idx],
                value: line.cols[layer_idx].to_string(),
            })
        };
        let index = parse_index(0)?;
        let head = parse_index(5)?;
        for (i, layer) in LAYERS.iter().enumerate().skip(1) {
            if line.cols[i].is_empty() {
                return Err(TableError::BadValue {
                    offset: line.offset,
                    layer,
                    value: String::new(),
                });
            }
        }
        let sense = match line.cols[7] {
            EMPTY => None,
            s => Some(s.to_string()),
        };
        tokens.push(Token {
            index,
            form: line.cols[1].to_string(),
            lemma: line.cols[2].to_string(),
            pos: line.cols[3].to_string(),
            ner: line.cols[4].to_string(),
            head,
            deprel: line.cols[6].to_string(),
            sense,
            srl: Vec::new(),
        });
    }

    let predicates: Vec<usize> = tokens.iter().filter(|t| t.sense.is_some()).map(|t| t.index).collect();
    for (line, token) in lines.iter().zip(tokens.iter_mut()) {
        let roles = &line.cols[LAYERS.len()..];
        if roles.len() != predicates.len() {
            return Err(TableError::RoleColumns {
                offset: line.offset,
                expected: predicates.len(),
                found: roles.len(),
            });
        }
        for (&pred, &label) in predicates.iter().zip(roles) {
            if label != EMPTY {
                token.srl.push(SemanticRole {
                    predicate: pred,
                    label: label.to_string(),
                });
            }
        }
    }

    let sentence = AnnotatedSentence::new(tokens).map_err(|source| TableError::Sentence { offset: end, source })?;
    Ok(SentenceBlock {
        comments,
        sentence,
        offset: start,
    })
}

/// Appends `sentence` (without trailing blank line) to `out`.
pub fn write_sentence(out: &mut String, sentence: &AnnotatedSentence) {
    let predicates: Vec<usize> = sentence.predicates().collect();
    for t in sentence.tokens() {
        let mut cols = vec![
            t.index.to_string(),
            t.form.clone(),
            t.lemma.clone(),
            t.pos.clone(),
            t.ner.clone(),
            t.head.to_string(),
            t.deprel.clone(),
            t.sense.clone().unwrap_or_else(|| EMPTY.to_string()),
        ];
        for &p in &predicates {
            let label = t
                .srl
                .iter()
                .find(|r| r.predicate == p)
                .map(|r| r.label.as_str())
                .unwrap_or(EMPTY);
            cols.push(label.to_string());
        }
        out.push_str(&cols.join("\t"));
        out.push('\n');
    }
}

/// Parses the single-line inline form used in query files: tokens separated
/// by `|`, columns by whitespace.
pub fn parse_inline(field: &str) -> Result<AnnotatedSentence, TableError> {
    let table: String = field
        .split('|')
        .map(|tok| tok.split_whitespace().collect::<Vec<_>>().join("\t"))
        .filter(|l| !l.is_empty())
        .map(|l| l + "\n")
        .collect();
    let mut blocks = parse_table(&table)?;
    match blocks.len() {
        1 => Ok(blocks.remove(0).sentence),
        _ => Err(TableError::Sentence {
            offset: 0,
            source: SentenceError::Empty,
        }),
    }
}

/// Inverse of [`parse_inline`].
pub fn write_inline(sentence: &AnnotatedSentence) -> String {
    let mut table = String::new();
    write_sentence(&mut table, sentence);
    table
        .lines()
        .map(|l| l.replace('\t', " "))
        .collect::<Vec<_>>()
        .join(" | ")
}
