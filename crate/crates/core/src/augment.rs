//! Deterministic lexical paraphrasing used for state augmentation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::state::State;

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "how", "in", "is", "it", "of", "on", "or", "that",
    "the", "this", "to", "was", "what", "when", "where", "which", "who", "why", "with",
];

/// Token to ordered synonym list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    map: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    /// Lines of `token<TAB>syn1,syn2,...`; blank lines and `#` comments are
    /// skipped. Tokens and synonyms must be single lowercase tokens.
    pub fn from_tsv(content: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |message: String| Error::Parse { line: i + 1, message };
            let (tok, syns) = line
                .split_once('\t')
                .ok_or_else(|| parse("expected token<TAB>synonyms".into()))?;
            let tok = single_token(tok).ok_or_else(|| parse(format!("bad token {tok:?}")))?;
            let mut list = Vec::new();
            for s in syns.split(',').filter(|s| !s.trim().is_empty()) {
                let s = single_token(s).ok_or_else(|| parse(format!("bad synonym {s:?}")))?;
                if s == tok {
                    return Err(parse(format!("{tok:?} lists itself as a synonym")));
                }
                if !list.contains(&s) {
                    list.push(s);
                }
            }
            if list.is_empty() {
                return Err(parse(format!("{tok:?} has no synonyms")));
            }
            map.insert(tok, list);
        }
        Ok(SynonymLexicon { map })
    }

    pub fn to_tsv(&self) -> String {
        self.map
            .iter()
            .map(|(k, v)| format!("{k}\t{}\n", v.join(",")))
            .collect()
    }

    pub fn get(&self, token: &str) -> Option<&[String]> {
        self.map.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn single_token(s: &str) -> Option<String> {
    let t = tokenize(s);
    (t.len() == 1 && t[0] == s.trim()).then(|| t[0].clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(BTreeSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Stopwords(DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect())
    }
}

impl Stopwords {
    pub fn from_lines(content: &str) -> Self {
        Stopwords(
            content
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn contains(&self, t: &str) -> bool {
        self.0.contains(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paraphrase {
    pub text: String,
    pub changed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Augmenter {
    pub lexicon: SynonymLexicon,
    pub stopwords: Stopwords,
}

impl Augmenter {
    pub fn new(lexicon: SynonymLexicon, stopwords: Stopwords) -> Self {
        Augmenter { lexicon, stopwords }
    }

    pub fn load(lexicon: &Path, stopwords: Option<&Path>) -> Result<Self> {
        let lex = std::fs::read_to_string(lexicon).map_err(|e| Error::io(lexicon, e))?;
        let stop = match stopwords {
            Some(p) => Stopwords::from_lines(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => Stopwords::default(),
        };
        Ok(Augmenter::new(SynonymLexicon::from_tsv(&lex)?, stop))
    }

    /// Variant `v` of `text`. With `k` substitutable token positions, the
    /// position `v mod k` is replaced by its synonym number `(v div k) mod
    /// len`; odd rounds `v div k` also drop the first stopword elsewhere in
    /// the text. Texts without substitutable tokens come back unchanged.
    pub fn paraphrase(&self, text: &str, v: usize) -> Paraphrase {
        let mut toks = tokenize(text);
        let eligible: Vec<usize> = (0..toks.len()).filter(|&i| self.lexicon.get(&toks[i]).is_some()).collect();
        if eligible.is_empty() {
            return Paraphrase {
                text: text.to_string(),
                changed: false,
            };
        }
        let k = eligible.len();
        let pos = eligible[v % k];
        let round = v / k;
        let syns = self.lexicon.get(&toks[pos]).unwrap_or(&[]);
        toks[pos] = syns[round % syns.len()].clone();
        if round % 2 == 1 {
            if let Some(i) = (0..toks.len()).find(|&i| i != pos && self.stopwords.contains(&toks[i])) {
                toks.remove(i);
            }
        }
        Paraphrase {
            text: toks.join(" "),
            changed: true,
        }
    }

    /// Variants `0..n` of a state with paraphrased query text; the query id
    /// and feedback sentences are kept.
    pub fn augment_state(&self, state: &State, n: usize) -> Vec<State> {
        (0..n)
            .map(|v| {
                let mut s = state.clone();
                s.query.text = self.paraphrase(&state.query.text, v).text;
                s
            })
            .collect()
    }
}
