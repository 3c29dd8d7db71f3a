use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A semantic-role edge from an argument token to its predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticRole {
    /// 1-based index of the predicate token.
    pub predicate: usize,
    pub label: String,
}

/// One token with all annotation layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub pos: String,
    /// Named-entity tag, `O` outside entities.
    pub ner: String,
    /// Index of the syntactic head, 0 for the root.
    pub head: usize,
    pub deprel: String,
    /// Predicate sense label; `Some` marks the token as a predicate.
    pub sense: Option<String>,
    /// Roles this token plays for predicates in the same sentence.
    pub srl: Vec<SemanticRole>,
}

impl Token {
    pub fn is_entity(&self) -> bool {
        !self.ner.is_empty() && self.ner != "O"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SentenceError {
    #[error("sentence has no tokens")]
    Empty,
    #[error("token index {found} where {expected} was expected")]
    BadIndex { expected: usize, found: usize },
    #[error("token {token} has head {head} outside [0, {len}]")]
    HeadOutOfRange { token: usize, head: usize, len: usize },
    #[error("token {token} heads itself or lies on a dependency cycle")]
    Cycle { token: usize },
    #[error("token {token} carries a role for {predicate}, which is not a predicate")]
    UnknownPredicate { token: usize, predicate: usize },
}

/// A dependency-parsed, role-labelled sentence.
///
/// Construction validates that token indices run `1..=n`, that every head
/// lies in `[0, n]`, that the head graph is a tree hanging off the virtual
/// root 0, and that every role edge points at a token carrying a sense.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Token>", into = "Vec<Token>")]
pub struct AnnotatedSentence {
    tokens: Vec<Token>,
}

impl TryFrom<Vec<Token>> for AnnotatedSentence {
    type Error = SentenceError;

    fn try_from(tokens: Vec<Token>) -> Result<Self, Self::Error> {
        Self::new(tokens)
    }
}

impl From<AnnotatedSentence> for Vec<Token> {
    fn from(s: AnnotatedSentence) -> Self {
        s.tokens
    }
}

impl AnnotatedSentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self, SentenceError> {
        if tokens.is_empty() {
            return Err(SentenceError::Empty);
        }
        let n = tokens.len();
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(SentenceError::BadIndex {
                    expected: i + 1,
                    found: t.index,
                });
            }
            if t.head > n {
                return Err(SentenceError::HeadOutOfRange {
                    token: t.index,
                    head: t.head,
                    len: n,
                });
            }
        }
        // Walk up from every token; a path longer than n means a cycle.
        for t in &tokens {
            let mut cur = t.head;
            let mut steps = 0;
            if cur == t.index {
                return Err(SentenceError::Cycle { token: t.index });
            }
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(SentenceError::Cycle { token: t.index });
                }
                cur = tokens[cur - 1].head;
            }
        }
        for t in &tokens {
            for role in &t.srl {
                let ok = role.predicate >= 1 && role.predicate <= n && tokens[role.predicate - 1].sense.is_some();
                if !ok {
                    return Err(SentenceError::UnknownPredicate {
                        token: t.index,
                        predicate: role.predicate,
                    });
                }
            }
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Indices of predicate tokens, in sentence order.
    pub fn predicates(&self) -> impl Iterator<Item = usize> + '_ {
        self.tokens.iter().filter(|t| t.sense.is_some()).map(|t| t.index)
    }

    /// Arguments of `predicate` as (argument token index, role label).
    pub fn arguments_of(&self, predicate: usize) -> Vec<(usize, &str)> {
        self.tokens
            .iter()
            .flat_map(|t| {
                t.srl
                    .iter()
                    .filter(move |r| r.predicate == predicate)
                    .map(move |r| (t.index, r.label.as_str()))
            })
            .collect()
    }

    /// Child lists indexed by head (slot 0 is the virtual root).
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.tokens.len() + 1];
        for t in &self.tokens {
            children[t.head].push(t.index);
        }
        children
    }

    /// All token indices dominated by `root`, including `root`, in sentence order.
    pub fn subtree(&self, root: usize) -> Vec<usize> {
        let children = self.children();
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(children[i].iter().copied());
        }
        out.sort_unstable();
        out
    }

    /// Space-joined surface forms.
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.form.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Programmatic sentence construction, mostly for fixtures.
///
/// ```
/// use xgenre_core::corpus::SentenceBuilder;
/// let s = SentenceBuilder::new()
///     .token("Joey", "joey", "NNP", "B-PERSON", 2, "nsubj")
///     .token("laughs", "laugh", "VBZ", "O", 0, "root")
///     .role(1, 2, "A0")
///     .build()
///     .unwrap();
/// assert_eq!(s.predicates().collect::<Vec<_>>(), vec![2]);
/// ```
#[derive(Debug, Default, Clone)]
pub struct SentenceBuilder {
    tokens: Vec<Token>,
}

impl SentenceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn token(mut self, form: &str, lemma: &str, pos: &str, ner: &str, head: usize, deprel: &str) -> Self {
        let index = self.tokens.len() + 1;
        self.tokens.push(Token {
            index,
            form: form.to_string(),
            lemma: lemma.to_string(),
            pos: pos.to_string(),
            ner: ner.to_string(),
            head,
            deprel: deprel.to_string(),
            sense: None,
            srl: Vec::new(),
        });
        self
    }

    /// Marks `argument` as filling `label` for `predicate`; the predicate
    /// receives a default `lemma.01` sense if it has none.
    pub fn role(mut self, argument: usize, predicate: usize, label: &str) -> Self {
        if let Some(p) = self.tokens.get_mut(predicate.wrapping_sub(1)) {
            if p.sense.is_none() {
                p.sense = Some(format!("{}.01", p.lemma));
            }
        }
        if let Some(a) = self.tokens.get_mut(argument.wrapping_sub(1)) {
            a.srl.push(SemanticRole {
                predicate,
                label: label.to_string(),
            });
        }
        self
    }

    pub fn build(self) -> Result<AnnotatedSentence, SentenceError> {
        AnnotatedSentence::new(self.tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple() -> SentenceBuilder {
        SentenceBuilder::new()
            .token("Joey", "joey", "NNP", "U-PERSON", 2, "nsubj")
            .token("eats", "eat", "VBZ", "O", 0, "root")
            .token("pizza", "pizza", "NN", "O", 2, "dobj")
    }

    #[test]
    fn valid_sentence() {
        let s = simple().role(1, 2, "A0").role(3, 2, "A1").build().unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.arguments_of(2), vec![(1, "A0"), (3, "A1")]);
        assert_eq!(s.subtree(2), vec![1, 2, 3]);
        assert_eq!(s.subtree(3), vec![3]);
    }

    #[test]
    fn rejects_empty() {
        assert_eq!(AnnotatedSentence::new(vec![]), Err(SentenceError::Empty));
    }

    #[test]
    fn rejects_cycle() {
        let err = SentenceBuilder::new()
            .token("a", "a", "NN", "O", 2, "dep")
            .token("b", "b", "NN", "O", 1, "dep")
            .build()
            .unwrap_err();
        assert!(matches!(err, SentenceError::Cycle { .. }));
    }

    #[test]
    fn rejects_head_out_of_range() {
        let err = SentenceBuilder::new()
            .token("a", "a", "NN", "O", 5, "dep")
            .build()
            .unwrap_err();
        assert!(matches!(err, SentenceError::HeadOutOfRange { head: 5, .. }));
    }

    #[test]
    fn rejects_role_without_predicate() {
        let mut tokens = simple().build().unwrap().tokens;
        tokens[0].srl.push(SemanticRole {
            predicate: 2,
            label: "A0".into(),
        });
        assert!(matches!(
            AnnotatedSentence::new(tokens),
            Err(SentenceError::UnknownPredicate { token: 1, predicate: 2 })
        ));
    }
}
