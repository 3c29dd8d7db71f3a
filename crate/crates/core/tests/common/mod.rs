//! Fixture corpora shared by the integration tests.
//!
//! Two fixtures are generated here and also checked in under
//! `tests/fixtures/` so the CLI tests can run on real files:
//!
//! * `mini`: three short episodes built around the dialogue/description
//!   pairs of the original data description, with six queries.
//! * `constructed`: ten episodes and 44 queries with a fixed split. Every
//!   query has its own speaker, verb and noun, and one of three shapes:
//!   - success: the gold episode has the query's exact words and relation,
//!     so the baseline ranks it first;
//!   - fixable: a decoy episode has the query's exact surface forms but no
//!     relation, while the gold episode has only the speaker name in common
//!     on the surface plus a relation sharing the query's lemmas;
//!   - unfixable: same decoy, and the gold episode shares only the speaker.
//!
//!   The evaluation part holds 4 fixable and 6 unfixable queries, so the
//!   baseline is wrong on all 10 and relation evidence can repair 4.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xgenre_core::corpus::{
    write_episode, write_queries, write_split, AnnotatedSentence, DataSplit, Episode, Query, QuerySource, Scene,
    SentenceBuilder, Utterance,
};

pub type Tok<'a> = (&'a str, &'a str, &'a str, &'a str, usize, &'a str);

pub fn sentence(tokens: &[Tok<'_>], roles: &[(usize, usize, &str)]) -> AnnotatedSentence {
    let mut b = SentenceBuilder::new();
    for &(form, lemma, pos, ner, head, deprel) in tokens {
        b = b.token(form, lemma, pos, ner, head, deprel);
    }
    for &(arg, pred, label) in roles {
        b = b.role(arg, pred, label);
    }
    b.build().expect("fixture sentence is well formed")
}

pub fn utterance(speaker: &str, sentences: Vec<AnnotatedSentence>) -> Utterance {
    let transcript = sentences.iter().map(|s| s.text()).collect::<Vec<_>>().join(" ");
    Utterance {
        speaker: speaker.to_string(),
        transcript: Some(transcript),
        sentences,
    }
}

pub fn episode(id: &str, utterances: Vec<Utterance>) -> Episode {
    Episode {
        episode_id: id.to_string(),
        scenes: vec![Scene {
            scene_id: format!("{id}_c01"),
            utterances,
        }],
    }
}

pub fn query(id: &str, source: QuerySource, gold: &str, sentence: AnnotatedSentence) -> Query {
    Query {
        query_id: id.to_string(),
        text: sentence.text(),
        sentence,
        source,
        gold_episode: gold.to_string(),
    }
}

pub struct Fixture {
    pub episodes: Vec<Episode>,
    pub queries: Vec<Query>,
    pub split: Option<DataSplit>,
    pub embeddings: String,
    pub config: String,
}

impl Fixture {
    /// Writes corpus, queries, embeddings, split and config under `dir`;
    /// returns the config path.
    pub fn write(&self, dir: &Path) -> PathBuf {
        let corpus = dir.join("corpus");
        for ep in &self.episodes {
            write_episode(&corpus, ep).unwrap();
        }
        fs::write(dir.join("queries.tsv"), write_queries(&self.queries)).unwrap();
        fs::write(dir.join("embeddings.txt"), &self.embeddings).unwrap();
        if let Some(split) = &self.split {
            fs::write(dir.join("split.tsv"), write_split(split)).unwrap();
        }
        let config = dir.join("config.toml");
        fs::write(&config, &self.config).unwrap();
        config
    }
}

/// Every file under `dir`, relative path → contents, in sorted order.
pub fn read_tree(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, fs::read_to_string(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn mini() -> Fixture {
    let e1 = episode(
        "s01e01",
        vec![
            utterance(
                "Ross",
                vec![sentence(
                    &[
                        ("I", "i", "PRP", "O", 3, "nsubj"),
                        ("am", "be", "VBP", "O", 3, "aux"),
                        ("going", "go", "VBG", "O", 0, "root"),
                        ("to", "to", "TO", "O", 5, "aux"),
                        ("be", "be", "VB", "O", 3, "xcomp"),
                        ("alone", "alone", "JJ", "O", 5, "acomp"),
                        ("forever", "forever", "RB", "O", 5, "advmod"),
                        (".", ".", ".", "O", 3, "punct"),
                    ],
                    &[(1, 3, "A1"), (5, 3, "A2")],
                )],
            ),
            utterance(
                "Joey",
                vec![
                    sentence(
                        &[
                            ("One", "one", "CD", "O", 2, "nummod"),
                            ("woman", "woman", "NN", "O", 0, "root"),
                            ("?", "?", ".", "O", 2, "punct"),
                        ],
                        &[],
                    ),
                    sentence(
                        &[
                            ("That", "that", "DT", "O", 2, "nsubj"),
                            ("'s", "be", "VBZ", "O", 0, "root"),
                            ("like", "like", "IN", "O", 2, "prep"),
                            ("saying", "say", "VBG", "O", 3, "pcomp"),
                            ("there", "there", "EX", "O", 6, "expl"),
                            ("'s", "be", "VBZ", "O", 4, "ccomp"),
                            ("only", "only", "RB", "O", 9, "advmod"),
                            ("one", "one", "CD", "O", 9, "nummod"),
                            ("flavor", "flavor", "NN", "O", 6, "attr"),
                            ("of", "of", "IN", "O", 9, "prep"),
                            ("ice", "ice", "NN", "O", 12, "compound"),
                            ("cream", "cream", "NN", "O", 10, "pobj"),
                            ("for", "for", "IN", "O", 9, "prep"),
                            ("you", "you", "PRP", "O", 13, "pobj"),
                            (".", ".", ".", "O", 2, "punct"),
                        ],
                        &[(6, 4, "A1")],
                    ),
                    sentence(
                        &[
                            ("Lemme", "let", "VB", "O", 0, "root"),
                            ("tell", "tell", "VB", "O", 1, "ccomp"),
                            ("you", "you", "PRP", "O", 2, "dative"),
                            ("something", "something", "NN", "O", 2, "dobj"),
                            (",", ",", ",", "O", 2, "punct"),
                            ("Ross", "ross", "NNP", "U-PERSON", 2, "npadvmod"),
                            (".", ".", ".", "O", 1, "punct"),
                        ],
                        &[(3, 2, "A2"), (4, 2, "A1")],
                    ),
                    sentence(
                        &[
                            ("There", "there", "EX", "O", 2, "expl"),
                            ("'s", "be", "VBZ", "O", 0, "root"),
                            ("lots", "lot", "NNS", "O", 2, "attr"),
                            ("of", "of", "IN", "O", 3, "prep"),
                            ("flavors", "flavor", "NNS", "O", 4, "pobj"),
                            ("out", "out", "RB", "O", 7, "advmod"),
                            ("there", "there", "RB", "O", 2, "advmod"),
                            (".", ".", ".", "O", 2, "punct"),
                        ],
                        &[(3, 2, "A1")],
                    ),
                ],
            ),
        ],
    );
    let e2 = episode(
        "s01e02",
        vec![
            utterance(
                "Monica",
                vec![sentence(
                    &[
                        ("Welcome", "welcome", "UH", "O", 0, "root"),
                        ("to", "to", "IN", "O", 1, "prep"),
                        ("the", "the", "DT", "O", 5, "det"),
                        ("coffee", "coffee", "NN", "O", 5, "compound"),
                        ("house", "house", "NN", "O", 2, "pobj"),
                        (".", ".", ".", "O", 1, "punct"),
                    ],
                    &[],
                )],
            ),
            utterance(
                "Ross",
                vec![sentence(
                    &[
                        ("I", "i", "PRP", "O", 2, "nsubj"),
                        ("had", "have", "VBD", "O", 0, "root"),
                        ("a", "a", "DT", "O", 5, "det"),
                        ("major", "major", "JJ", "O", 5, "amod"),
                        ("crush", "crush", "NN", "O", 2, "dobj"),
                        ("on", "on", "IN", "O", 5, "prep"),
                        ("you", "you", "PRP", "O", 6, "pobj"),
                        ("back", "back", "RB", "O", 2, "advmod"),
                        ("in", "in", "IN", "O", 8, "prep"),
                        ("high", "high", "JJ", "O", 11, "amod"),
                        ("school", "school", "NN", "O", 9, "pobj"),
                        (".", ".", ".", "O", 2, "punct"),
                    ],
                    &[(1, 2, "A0"), (5, 2, "A1"), (8, 2, "AM-TMP")],
                )],
            ),
            utterance(
                "Rachel",
                vec![sentence(
                    &[
                        ("I", "i", "PRP", "O", 2, "nsubj"),
                        ("knew", "know", "VBD", "O", 0, "root"),
                        (".", ".", ".", "O", 2, "punct"),
                    ],
                    &[(1, 2, "A0")],
                )],
            ),
        ],
    );
    let e3 = episode(
        "s01e03",
        vec![
            utterance(
                "Chandler",
                vec![sentence(
                    &[
                        ("Alright", "alright", "UH", "O", 6, "intj"),
                        (",", ",", ",", "O", 6, "punct"),
                        ("one", "one", "CD", "O", 6, "nsubj"),
                        ("of", "of", "IN", "O", 3, "prep"),
                        ("you", "you", "PRP", "O", 4, "pobj"),
                        ("give", "give", "VB", "O", 0, "root"),
                        ("me", "me", "PRP", "O", 6, "dative"),
                        ("your", "your", "PRP$", "O", 9, "poss"),
                        ("underpants", "underpants", "NNS", "O", 6, "dobj"),
                        (".", ".", ".", "O", 6, "punct"),
                    ],
                    &[(3, 6, "A0"), (7, 6, "A2"), (9, 6, "A1")],
                )],
            ),
            utterance(
                "Joey",
                vec![
                    sentence(
                        &[
                            ("Ca", "can", "MD", "O", 3, "aux"),
                            ("n't", "not", "RB", "O", 3, "neg"),
                            ("help", "help", "VB", "O", 0, "root"),
                            ("you", "you", "PRP", "O", 3, "dobj"),
                            (".", ".", ".", "O", 3, "punct"),
                        ],
                        &[(4, 3, "A1")],
                    ),
                    sentence(
                        &[
                            ("I", "i", "PRP", "O", 4, "nsubj"),
                            ("'m", "be", "VBP", "O", 4, "aux"),
                            ("not", "not", "RB", "O", 4, "neg"),
                            ("wearing", "wear", "VBG", "O", 0, "root"),
                            ("any", "any", "DT", "O", 4, "dobj"),
                            (".", ".", ".", "O", 4, "punct"),
                        ],
                        &[(1, 4, "A0"), (5, 4, "A1")],
                    ),
                ],
            ),
        ],
    );

    let queries = vec![
        query(
            "q1",
            QuerySource::Summary,
            "s01e01",
            sentence(
                &[
                    ("Joey", "joey", "NNP", "U-PERSON", 2, "nsubj"),
                    ("compares", "compare", "VBZ", "O", 0, "root"),
                    ("women", "woman", "NNS", "O", 2, "dobj"),
                    ("to", "to", "IN", "O", 2, "prep"),
                    ("ice", "ice", "NN", "O", 6, "compound"),
                    ("cream", "cream", "NN", "O", 4, "pobj"),
                    (".", ".", ".", "O", 2, "punct"),
                ],
                &[(1, 2, "A0"), (3, 2, "A1"), (4, 2, "A2")],
            ),
        ),
        query(
            "q2",
            QuerySource::Summary,
            "s01e02",
            sentence(
                &[
                    ("Ross", "ross", "NNP", "U-PERSON", 2, "nsubj"),
                    ("reveals", "reveal", "VBZ", "O", 0, "root"),
                    ("his", "his", "PRP$", "O", 6, "poss"),
                    ("high", "high", "JJ", "O", 5, "amod"),
                    ("school", "school", "NN", "O", 6, "compound"),
                    ("crush", "crush", "NN", "O", 2, "dobj"),
                    ("on", "on", "IN", "O", 6, "prep"),
                    ("Rachel", "rachel", "NNP", "U-PERSON", 7, "pobj"),
                    (".", ".", ".", "O", 2, "punct"),
                ],
                &[(1, 2, "A0"), (6, 2, "A1")],
            ),
        ),
        query(
            "q3",
            QuerySource::Plot,
            "s01e03",
            sentence(
                &[
                    ("Chandler", "chandler", "NNP", "U-PERSON", 2, "nsubj"),
                    ("asks", "ask", "VBZ", "O", 0, "root"),
                    ("Joey", "joey", "NNP", "U-PERSON", 2, "dobj"),
                    ("for", "for", "IN", "O", 2, "prep"),
                    ("his", "his", "PRP$", "O", 6, "poss"),
                    ("underwear", "underwear", "NN", "O", 4, "pobj"),
                    (".", ".", ".", "O", 2, "punct"),
                ],
                &[(1, 2, "A0"), (3, 2, "A2"), (4, 2, "A1")],
            ),
        ),
        query(
            "q4",
            QuerySource::Plot,
            "s01e03",
            sentence(
                &[
                    ("Joey", "joey", "NNP", "U-PERSON", 4, "nsubj"),
                    ("is", "be", "VBZ", "O", 4, "aux"),
                    ("not", "not", "RB", "O", 4, "neg"),
                    ("wearing", "wear", "VBG", "O", 0, "root"),
                    ("any", "any", "DT", "O", 4, "dobj"),
                    (".", ".", ".", "O", 4, "punct"),
                ],
                &[(1, 4, "A0"), (5, 4, "A1")],
            ),
        ),
        query(
            "q5",
            QuerySource::Plot,
            "s01e01",
            sentence(
                &[
                    ("Joey", "joey", "NNP", "U-PERSON", 2, "nsubj"),
                    ("tells", "tell", "VBZ", "O", 0, "root"),
                    ("Ross", "ross", "NNP", "U-PERSON", 2, "dative"),
                    ("there", "there", "EX", "O", 5, "expl"),
                    ("are", "be", "VBP", "O", 2, "ccomp"),
                    ("lots", "lot", "NNS", "O", 5, "attr"),
                    ("of", "of", "IN", "O", 6, "prep"),
                    ("flavors", "flavor", "NNS", "O", 7, "pobj"),
                    (".", ".", ".", "O", 2, "punct"),
                ],
                &[(1, 2, "A0"), (3, 2, "A2"), (5, 2, "A1")],
            ),
        ),
        query(
            "q6",
            QuerySource::Summary,
            "s01e02",
            sentence(
                &[
                    ("Rachel", "rachel", "NNP", "U-PERSON", 2, "nsubj"),
                    ("knew", "know", "VBD", "O", 0, "root"),
                    ("about", "about", "IN", "O", 2, "prep"),
                    ("the", "the", "DT", "O", 5, "det"),
                    ("crush", "crush", "NN", "O", 3, "pobj"),
                    (".", ".", ".", "O", 2, "punct"),
                ],
                &[(1, 2, "A0"), (3, 2, "A1")],
            ),
        ),
    ];

    let embeddings = "\
10 4
woman 0.9 0.1 0.0 0.2
flavor 0.7 0.3 0.1 0.0
ice 0.8 0.2 0.0 0.1
cream 0.8 0.1 0.1 0.1
crush 0.1 0.9 0.2 0.0
school 0.0 0.7 0.3 0.1
underpants 0.0 0.1 0.9 0.3
underwear 0.0 0.2 0.9 0.2
wear 0.1 0.0 0.7 0.4
know 0.2 0.5 0.1 0.6
"
    .to_string();

    let config = "\
[paths]
corpus = \"corpus\"
queries = \"queries.tsv\"
embeddings = \"embeddings.txt\"

[retrieval]
k = 3
depths = [1, 2, 3]
"
    .to_string();

    Fixture {
        episodes: vec![e1, e2, e3],
        queries,
        split: None,
        embeddings,
        config,
    }
}

const NAMES: [&str; 44] = [
    "Abel", "Bruno", "Carla", "Dario", "Elsa", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Kira", "Lukas", "Mona",
    "Nils", "Olga", "Pablo", "Quinn", "Rosa", "Silas", "Tara", "Ugo", "Vera", "Wanda", "Xavi", "Yara", "Zeno", "Alma",
    "Boris", "Cleo", "Dina", "Emil", "Flora", "Gino", "Hilda", "Ivo", "Juno", "Karl", "Lena", "Milo", "Nora", "Otto",
    "Pia", "Rudi", "Sara",
];

/// Regular verbs: past tense is stem + "ed", progressive stem + "ing".
const VERBS: [&str; 44] = [
    "paint", "clean", "fix", "open", "watch", "visit", "call", "help", "kick", "push", "pull", "wash", "play", "climb",
    "jump", "cook", "lock", "kiss", "fold", "park", "pack", "print", "mend", "test", "count", "guard", "sort", "load",
    "mark", "spray", "polish", "brush", "stack", "check", "hunt", "launch", "borrow", "follow", "deliver", "repair",
    "request", "collect", "install", "order",
];

/// Nouns with a plain "s" plural.
const NOUNS: [&str; 44] = [
    "guitar", "lamp", "sofa", "kettle", "ladder", "blanket", "candle", "mirror", "bucket", "wallet", "helmet",
    "jacket", "basket", "pillow", "carpet", "bottle", "hammer", "drawer", "window", "trumpet", "violin", "teapot",
    "saddle", "rocket", "anchor", "banner", "cushion", "tablet", "pencil", "puppet", "racket", "shovel", "stapler",
    "toaster", "blender", "scooter", "canoe", "magnet", "kite", "parcel", "lantern", "barrel", "ribbon", "statue",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Success,
    Fixable,
    Unfixable,
}

const EVAL_SHAPES: &str = "FUFUFUFUUU";
const DEV_SHAPES: &str = "FSUFSUFSUF";
const TRAIN_SHAPES: &str = "SFSUSFSUFSFUSFSUFSFUSFUS";

pub const CONSTRUCTED_EPISODES: usize = 10;

fn shape(c: char) -> Shape {
    match c {
        'S' => Shape::Success,
        'F' => Shape::Fixable,
        _ => Shape::Unfixable,
    }
}

/// `(shape, part)` of every constructed query, eval first, then dev, then train.
pub fn constructed_plan() -> Vec<(Shape, &'static str)> {
    let mut plan = Vec::new();
    for (shapes, part) in [(EVAL_SHAPES, "eval"), (DEV_SHAPES, "dev"), (TRAIN_SHAPES, "train")] {
        plan.extend(shapes.chars().map(|c| (shape(c), part)));
    }
    plan
}

fn episode_id(i: usize) -> String {
    format!("s01e{:02}", i + 1)
}

fn decoy_sentence(verb: &str, noun: &str) -> AnnotatedSentence {
    let past = format!("{verb}ed");
    sentence(
        &[
            ("Someone", "someone", "NN", "O", 2, "nsubj"),
            (&past, verb, "VBD", "O", 0, "root"),
            ("the", "the", "DT", "O", 4, "det"),
            (noun, noun, "NN", "O", 2, "dobj"),
            (".", ".", ".", "O", 2, "punct"),
        ],
        &[],
    )
}

pub fn constructed() -> Fixture {
    let plan = constructed_plan();
    assert_eq!(plan.len(), NAMES.len());
    let mut utterances: Vec<Vec<Utterance>> = (0..CONSTRUCTED_EPISODES)
        .map(|_| {
            vec![utterance(
                "Gunther",
                vec![sentence(
                    &[
                        ("Coffee", "coffee", "NN", "O", 2, "nsubj"),
                        ("is", "be", "VBZ", "O", 0, "root"),
                        ("ready", "ready", "JJ", "O", 2, "acomp"),
                        (".", ".", ".", "O", 2, "punct"),
                    ],
                    &[],
                )],
            )]
        })
        .collect();
    let mut queries = Vec::new();
    let mut split = DataSplit::default();

    for (q, &(shape, part)) in plan.iter().enumerate() {
        let (name, verb, noun) = (NAMES[q], VERBS[q], NOUNS[q]);
        let gold = q % CONSTRUCTED_EPISODES;
        let decoy = (q + 3) % CONSTRUCTED_EPISODES;
        let past = format!("{verb}ed");
        let lower = name.to_lowercase();

        match shape {
            Shape::Success => utterances[gold].push(utterance(
                name,
                vec![sentence(
                    &[
                        ("I", "i", "PRP", "O", 2, "nsubj"),
                        (&past, verb, "VBD", "O", 0, "root"),
                        ("the", "the", "DT", "O", 4, "det"),
                        (noun, noun, "NN", "O", 2, "dobj"),
                        (".", ".", ".", "O", 2, "punct"),
                    ],
                    &[(1, 2, "A0"), (4, 2, "A1")],
                )],
            )),
            Shape::Fixable => {
                let progressive = format!("{verb}ing");
                let plural = format!("{noun}s");
                utterances[gold].push(utterance(
                    name,
                    vec![sentence(
                        &[
                            ("I", "i", "PRP", "O", 3, "nsubj"),
                            ("am", "be", "VBP", "O", 3, "aux"),
                            (&progressive, verb, "VBG", "O", 0, "root"),
                            (&plural, noun, "NNS", "O", 3, "dobj"),
                            (".", ".", ".", "O", 3, "punct"),
                        ],
                        &[(1, 3, "A0"), (4, 3, "A1")],
                    )],
                ));
                utterances[decoy].push(utterance("Gunther", vec![decoy_sentence(verb, noun)]));
            }
            Shape::Unfixable => {
                utterances[gold].push(utterance(
                    name,
                    vec![sentence(
                        &[
                            ("Hello", "hello", "UH", "O", 0, "root"),
                            ("there", "there", "RB", "O", 1, "advmod"),
                            (".", ".", ".", "O", 1, "punct"),
                        ],
                        &[],
                    )],
                ));
                utterances[decoy].push(utterance("Gunther", vec![decoy_sentence(verb, noun)]));
            }
        }

        let source = if q % 2 == 0 {
            QuerySource::Summary
        } else {
            QuerySource::Plot
        };
        let qs = sentence(
            &[
                (name, &lower, "NNP", "U-PERSON", 2, "nsubj"),
                (&past, verb, "VBD", "O", 0, "root"),
                ("the", "the", "DT", "O", 4, "det"),
                (noun, noun, "NN", "O", 2, "dobj"),
                (".", ".", ".", "O", 2, "punct"),
            ],
            &[(1, 2, "A0"), (4, 2, "A1")],
        );
        let query = query(&format!("c{q:02}"), source, &episode_id(gold), qs);
        match part {
            "eval" => split.eval.push(query.clone()),
            "dev" => split.dev.push(query.clone()),
            _ => split.train.push(query.clone()),
        }
        queries.push(query);
    }

    let episodes = utterances
        .into_iter()
        .enumerate()
        .map(|(i, us)| episode(&episode_id(i), us))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut embeddings = String::new();
    let words = NAMES
        .iter()
        .map(|n| n.to_lowercase())
        .chain(VERBS.iter().map(|v| v.to_string()))
        .chain(NOUNS.iter().map(|n| n.to_string()));
    for w in words {
        let v: Vec<String> = (0..8).map(|_| format!("{:.4}", rng.gen_range(0.0..1.0))).collect();
        embeddings.push_str(&format!("{w} {}\n", v.join(" ")));
    }

    let config = "\
[paths]
corpus = \"corpus\"
queries = \"queries.tsv\"
embeddings = \"embeddings.txt\"
split = \"split.tsv\"

[retrieval]
k = 10
depths = [1, 5, 10]
"
    .to_string();

    Fixture {
        episodes,
        queries,
        split: Some(split),
        embeddings,
        config,
    }
}
