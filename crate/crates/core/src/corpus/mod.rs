//! Episodes, queries and the train/dev/eval split.
//!
//! A transcript corpus is a directory tree with one JSON file per episode
//! (`s01/s01e03.json`, say) describing scenes and utterances, plus a sidecar
//! token table with the same stem (`s01/s01e03.tsv`) holding the annotated
//! sentences. Every sentence block in the sidecar carries an
//! `# utterance = <scene_id>:<n>` comment naming the 0-based utterance it
//! belongs to within that scene.

mod sentence;
mod split;
pub mod table;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub use sentence::{AnnotatedSentence, SemanticRole, SentenceBuilder, SentenceError, Token};
pub use split::{parse_split, split_queries, write_split, DataSplit, SplitRatios};
use table::TableError;

/// Dense document identifier: the position of an episode in its corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DocId(pub u32);

impl DocId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub speaker: String,
    /// Raw transcript line, when the input provides one.
    pub transcript: Option<String>,
    pub sentences: Vec<AnnotatedSentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    pub scene_id: String,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub episode_id: String,
    pub scenes: Vec<Scene>,
}

impl Episode {
    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.scenes.iter().flat_map(|s| s.utterances.iter())
    }

    pub fn token_count(&self) -> usize {
        self.utterances()
            .flat_map(|u| u.sentences.iter())
            .map(AnnotatedSentence::len)
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub episodes: Vec<Episode>,
}

impl Corpus {
    pub fn new(episodes: Vec<Episode>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for ep in &episodes {
            if !seen.insert(ep.episode_id.as_str()) {
                return Err(CorpusError::DuplicateEpisode(ep.episode_id.clone()));
            }
        }
        Ok(Self { episodes })
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.episodes.iter().map(Episode::token_count).sum()
    }

    pub fn doc_id(&self, episode_id: &str) -> Option<DocId> {
        self.episodes
            .iter()
            .position(|e| e.episode_id == episode_id)
            .map(|i| DocId(i as u32))
    }

    pub fn episode(&self, doc: DocId) -> Option<&Episode> {
        self.episodes.get(doc.index())
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = DocId> {
        (0..self.episodes.len() as u32).map(DocId)
    }

    pub fn name(&self, doc: DocId) -> &str {
        self.episodes
            .get(doc.index())
            .map(|e| e.episode_id.as_str())
            .unwrap_or("?")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuerySource {
    Summary,
    Plot,
}

impl QuerySource {
    pub fn code(self) -> &'static str {
        match self {
            QuerySource::Summary => "S",
            QuerySource::Plot => "P",
        }
    }
}

impl FromStr for QuerySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s" | "summary" => Ok(QuerySource::Summary),
            "p" | "plot" => Ok(QuerySource::Plot),
            other => Err(format!("unknown query source {other:?}")),
        }
    }
}

impl fmt::Display for QuerySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuerySource::Summary => "Summary",
            QuerySource::Plot => "Plot",
        })
    }
}

/// One summary or plot sentence paired with the episode it describes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    pub sentence: AnnotatedSentence,
    pub source: QuerySource,
    pub gold_episode: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: parse error at byte {offset}: {message}", path.display())]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("{}: schema error at byte {offset}: {source}", path.display())]
    Schema {
        path: PathBuf,
        offset: usize,
        #[source]
        source: TableError,
    },
    #[error("{}: {message}", path.display())]
    Structure { path: PathBuf, message: String },
    #[error("episode {0} appears more than once")]
    DuplicateEpisode(String),
    #[error("queries reference unknown gold episodes: {}", .offenders.iter().map(|(q, e)| format!("{q} -> {e}")).collect::<Vec<_>>().join(", "))]
    UnknownGold { offenders: Vec<(String, String)> },
    #[error("duplicate query id {0}")]
    DuplicateQuery(String),
}

impl CorpusError {
    /// Name of the missing annotation layer, for schema errors of that kind.
    pub fn missing_layer(&self) -> Option<&'static str> {
        match self {
            CorpusError::Schema {
                source: TableError::MissingLayer { layer, .. },
                ..
            } => Some(layer),
            _ => None,
        }
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

#[derive(Serialize, Deserialize)]
struct EpisodeFile {
    episode_id: String,
    scenes: Vec<SceneFile>,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    scene_id: String,
    utterances: Vec<UtteranceFile>,
}

#[derive(Serialize, Deserialize)]
struct UtteranceFile {
    speaker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transcript: Option<String>,
}

const UTTERANCE_KEY: &str = "utterance";

/// Loads one episode from its JSON file and sidecar token table.
pub fn load_episode(json_path: &Path) -> Result<Episode, CorpusError> {
    let text = read(json_path)?;
    let file: EpisodeFile = serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: json_path.to_path_buf(),
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let structure = |message: String| CorpusError::Structure {
        path: json_path.to_path_buf(),
        message,
    };
    if file.episode_id.trim().is_empty() {
        return Err(structure("empty episode_id".into()));
    }
    if file.scenes.is_empty() {
        return Err(structure(format!("episode {} has no scenes", file.episode_id)));
    }

    let sidecar = json_path.with_extension("tsv");
    let table_text = read(&sidecar)?;
    let blocks = table::parse_table(&table_text).map_err(|source| CorpusError::Schema {
        path: sidecar.clone(),
        offset: source.offset(),
        source,
    })?;
    let mut by_utterance: HashMap<(String, usize), Vec<AnnotatedSentence>> = HashMap::new();
    for block in blocks {
        let bad = |message: String| CorpusError::Parse {
            path: sidecar.clone(),
            offset: block.offset,
            message,
        };
        let key = block
            .comments
            .get(UTTERANCE_KEY)
            .ok_or_else(|| bad(format!("sentence lacks `# {UTTERANCE_KEY} = scene:n`")))?;
        let (scene, n) = key
            .rsplit_once(':')
            .and_then(|(s, n)| n.parse::<usize>().ok().map(|n| (s.to_string(), n)))
            .ok_or_else(|| bad(format!("malformed utterance key {key:?}")))?;
        by_utterance.entry((scene, n)).or_default().push(block.sentence);
    }

    let mut scenes = Vec::with_capacity(file.scenes.len());
    let mut seen_scenes = HashSet::new();
    for scene in file.scenes {
        if !seen_scenes.insert(scene.scene_id.clone()) {
            return Err(structure(format!("duplicate scene {}", scene.scene_id)));
        }
        if scene.utterances.is_empty() {
            return Err(structure(format!("scene {} has no utterances", scene.scene_id)));
        }
        let mut utterances = Vec::with_capacity(scene.utterances.len());
        for (i, u) in scene.utterances.into_iter().enumerate() {
            if u.speaker.trim().is_empty() {
                return Err(structure(format!(
                    "utterance {}:{i} has an empty speaker",
                    scene.scene_id
                )));
            }
            let sentences = by_utterance
                .remove(&(scene.scene_id.clone(), i))
                .ok_or_else(|| structure(format!("utterance {}:{i} has no annotated sentences", scene.scene_id)))?;
            utterances.push(Utterance {
                speaker: u.speaker,
                transcript: u.transcript,
                sentences,
            });
        }
        scenes.push(Scene {
            scene_id: scene.scene_id,
            utterances,
        });
    }
    if let Some(((scene, n), _)) = by_utterance.into_iter().min_by(|a, b| a.0.cmp(&b.0)) {
        return Err(CorpusError::Structure {
            path: sidecar,
            message: format!("sentences for unknown utterance {scene}:{n}"),
        });
    }
    Ok(Episode {
        episode_id: file.episode_id,
        scenes,
    })
}

/// Loads every `*.json` episode under `dir`, ordered by path.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    if !dir.is_dir() {
        return Err(CorpusError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf()),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "json") {
            files.push(entry.into_path());
        }
    }
    let episodes = files
        .par_iter()
        .map(|p| load_episode(p))
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::new(episodes)
}

fn season_of(episode_id: &str) -> &str {
    match episode_id.find('e') {
        Some(i) if i > 0 && episode_id.starts_with('s') => &episode_id[..i],
        _ => "episodes",
    }
}

/// Writes `episode` under `dir` in the loader's format; returns the JSON path.
pub fn write_episode(dir: &Path, episode: &Episode) -> Result<PathBuf, CorpusError> {
    let season = dir.join(season_of(&episode.episode_id));
    fs::create_dir_all(&season).map_err(|source| CorpusError::Io {
        path: season.clone(),
        source,
    })?;
    let json_path = season.join(format!("{}.json", episode.episode_id));
    let file = EpisodeFile {
        episode_id: episode.episode_id.clone(),
        scenes: episode
            .scenes
            .iter()
            .map(|s| SceneFile {
                scene_id: s.scene_id.clone(),
                utterances: s
                    .utterances
                    .iter()
                    .map(|u| UtteranceFile {
                        speaker: u.speaker.clone(),
                        transcript: u.transcript.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file).expect("episode serializes");
    let mut table_text = String::new();
    for scene in &episode.scenes {
        for (i, u) in scene.utterances.iter().enumerate() {
            for s in &u.sentences {
                if !table_text.is_empty() {
                    table_text.push('\n');
                }
                table_text.push_str(&format!("# {UTTERANCE_KEY} = {}:{i}\n", scene.scene_id));
                table::write_sentence(&mut table_text, s);
            }
        }
    }
    let write = |path: PathBuf, body: String| fs::write(&path, body).map_err(|source| CorpusError::Io { path, source });
    write(json_path.clone(), json + "\n")?;
    write(json_path.with_extension("tsv"), table_text)?;
    Ok(json_path)
}

/// Loads a query file: tab-separated `query_id, source, gold_episode, text,
/// annotation`, one record per line, `#` comments allowed.
///
/// The annotation field is either inline (see [`table::parse_inline`]) or
/// `@path` / `@path#n`, naming the n-th (0-based) sentence of a token table
/// relative to the query file.
pub fn load_queries(path: &Path, corpus: &Corpus) -> Result<Vec<Query>, CorpusError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut tables: BTreeMap<PathBuf, Vec<AnnotatedSentence>> = BTreeMap::new();
    let mut queries = Vec::new();
    let mut ids = HashSet::new();
    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse {
            path: path.to_path_buf(),
            offset: line_offset,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(format!(
                "expected 5 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let source: QuerySource = fields[1].parse().map_err(parse_err)?;
        let sentence = if let Some(reference) = fields[4].strip_prefix('@') {
            let (file, n) = match reference.rsplit_once('#') {
                Some((f, n)) => (
                    f,
                    n.parse::<usize>()
                        .map_err(|_| parse_err(format!("bad sentence number in {reference:?}")))?,
                ),
                None => (reference, 0),
            };
            let table_path = base.join(file);
            if !tables.contains_key(&table_path) {
                let body = read(&table_path)?;
                let blocks = table::parse_table(&body).map_err(|source| CorpusError::Schema {
                    path: table_path.clone(),
                    offset: source.offset(),
                    source,
                })?;
                tables.insert(table_path.clone(), blocks.into_iter().map(|b| b.sentence).collect());
            }
            tables[&table_path]
                .get(n)
                .cloned()
                .ok_or_else(|| parse_err(format!("{} has no sentence {n}", table_path.display())))?
        } else {
            let field_offset = line_offset + fields[..4].iter().map(|f| f.len() + 1).sum::<usize>();
            table::parse_inline(fields[4]).map_err(|source| CorpusError::Schema {
                path: path.to_path_buf(),
                offset: field_offset,
                source,
            })?
        };
        let query_id = fields[0].to_string();
        if !ids.insert(query_id.clone()) {
            return Err(CorpusError::DuplicateQuery(query_id));
        }
        queries.push(Query {
            query_id,
            source,
            gold_episode: fields[2].to_string(),
            text: fields[3].to_string(),
            sentence,
        });
    }
    let known: HashSet<&str> = corpus.episodes.iter().map(|e| e.episode_id.as_str()).collect();
    let offenders: Vec<(String, String)> = queries
        .iter()
        .filter(|q| !known.contains(q.gold_episode.as_str()))
        .map(|q| (q.query_id.clone(), q.gold_episode.clone()))
        .collect();
    if !offenders.is_empty() {
        return Err(CorpusError::UnknownGold { offenders });
    }
    Ok(queries)
}

/// Serializes queries in the format read by [`load_queries`], annotations inline.
pub fn write_queries(queries: &[Query]) -> String {
    let mut out = String::new();
    for q in queries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            q.query_id,
            q.source.code(),
            q.gold_episode,
            q.text.replace(['\t', '\n'], " "),
            table::write_inline(&q.sentence)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(words: &[&str]) -> AnnotatedSentence {
        let mut b = SentenceBuilder::new();
        for (i, w) in words.iter().enumerate() {
            let head = if i == 0 { 0 } else { 1 };
            b = b.token(w, &w.to_lowercase(), "NN", "O", head, "dep");
        }
        b.build().unwrap()
    }

    fn episode(id: &str) -> Episode {
        Episode {
            episode_id: id.into(),
            scenes: vec![Scene {
                scene_id: format!("{id}_c01"),
                utterances: vec![
                    Utterance {
                        speaker: "Joey".into(),
                        transcript: Some("How you doin'?".into()),
                        sentences: vec![sentence(&["How", "you", "doin", "?"])],
                    },
                    Utterance {
                        speaker: "Ross".into(),
                        transcript: None,
                        sentences: vec![sentence(&["Hi"]), sentence(&["We", "were", "on", "a", "break"])],
                    },
                ],
            }],
        }
    }

    #[test]
    fn empty_directory_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert!(corpus.is_empty());
        assert_eq!(corpus.token_count(), 0);
    }

    #[test]
    fn episode_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ep = episode("s01e02");
        let path = write_episode(dir.path(), &ep).unwrap();
        assert!(path.ends_with("s01/s01e02.json"));
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.episodes, vec![ep]);
        assert_eq!(corpus.token_count(), 10);
    }

    #[test]
    fn json_error_names_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s01e01.json");
        let body = "{\n  \"episode_id\": \"s01e01\",\n  \"scenes\": [oops]\n}";
        fs::write(&p, body).unwrap();
        match load_corpus(dir.path()).unwrap_err() {
            CorpusError::Parse { path, offset, .. } => {
                assert_eq!(path, p);
                assert!(body[offset..].starts_with("oops"), "offset {offset}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_layer_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let ep = episode("s01e01");
        let path = write_episode(dir.path(), &ep).unwrap();
        fs::write(
            path.with_extension("tsv"),
            "# utterance = s01e01_c01:0\n1\tHi\thi\tUH\n",
        )
        .unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert_eq!(err.missing_layer(), Some("ner"));
    }

    #[test]
    fn utterance_without_sentences_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_episode(dir.path(), &episode("s01e01")).unwrap();
        let table = fs::read_to_string(path.with_extension("tsv")).unwrap();
        let first_block = table.split("\n\n").next().unwrap();
        fs::write(path.with_extension("tsv"), first_block).unwrap();
        assert!(matches!(
            load_corpus(dir.path()).unwrap_err(),
            CorpusError::Structure { .. }
        ));
    }

    #[test]
    fn duplicate_episode_rejected() {
        let err = Corpus::new(vec![episode("a"), episode("a")]).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateEpisode(_)));
    }

    #[test]
    fn unknown_gold_lists_offenders() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::new(vec![episode("s01e01")]).unwrap();
        let q = dir.path().join("q.tsv");
        let inline = table::write_inline(&sentence(&["Ross", "sulks"]));
        fs::write(
            &q,
            format!("# comment\nq1\tS\ts01e01\tRoss sulks\t{inline}\nq2\tP\ts99e99\tRoss sulks\t{inline}\n"),
        )
        .unwrap();
        match load_queries(&q, &corpus).unwrap_err() {
            CorpusError::UnknownGold { offenders } => {
                assert_eq!(offenders, vec![("q2".to_string(), "s99e99".to_string())]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn query_file_reference_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::new(vec![episode("s01e01")]).unwrap();
        let mut table_text = String::new();
        table::write_sentence(&mut table_text, &sentence(&["one"]));
        table_text.push('\n');
        table::write_sentence(&mut table_text, &sentence(&["two", "words"]));
        fs::write(dir.path().join("ann.tsv"), table_text).unwrap();
        let q = dir.path().join("q.tsv");
        fs::write(&q, "q1\tplot\ts01e01\ttwo words\t@ann.tsv#1\n").unwrap();
        let queries = load_queries(&q, &corpus).unwrap();
        assert_eq!(queries[0].sentence.len(), 2);
        assert_eq!(queries[0].source, QuerySource::Plot);

        fs::write(&q, write_queries(&queries)).unwrap();
        assert_eq!(load_queries(&q, &corpus).unwrap(), queries);
    }

    #[test]
    fn wrong_field_count_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let q = dir.path().join("q.tsv");
        fs::write(&q, "# header\nq1\tS\ts01e01\n").unwrap();
        match load_queries(&q, &Corpus::default()).unwrap_err() {
            CorpusError::Parse { offset, .. } => assert_eq!(offset, 9),
            e => panic!("unexpected {e}"),
        }
    }
}
