//! Lexicon-driven psycholinguistic features of transcript segments.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Negation,
    PositiveSentiment,
    NegativeSentiment,
    Subordinator,
    Pron1s,
    Pron1p,
    Pron2,
    Pron3,
    Article,
    Preposition,
    Conjunction,
    Auxiliary,
    Filler,
    Absolutist,
    Tentative,
    Certainty,
    Quantifier,
    Interrogative,
}

impl Tag {
    pub const ALL: [Tag; 22] = [
        Tag::Noun,
        Tag::Verb,
        Tag::Adjective,
        Tag::Adverb,
        Tag::Negation,
        Tag::PositiveSentiment,
        Tag::NegativeSentiment,
        Tag::Subordinator,
        Tag::Pron1s,
        Tag::Pron1p,
        Tag::Pron2,
        Tag::Pron3,
        Tag::Article,
        Tag::Preposition,
        Tag::Conjunction,
        Tag::Auxiliary,
        Tag::Filler,
        Tag::Absolutist,
        Tag::Tentative,
        Tag::Certainty,
        Tag::Quantifier,
        Tag::Interrogative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Noun => "noun",
            Tag::Verb => "verb",
            Tag::Adjective => "adjective",
            Tag::Adverb => "adverb",
            Tag::Negation => "negation",
            Tag::PositiveSentiment => "positive_sentiment",
            Tag::NegativeSentiment => "negative_sentiment",
            Tag::Subordinator => "subordinator",
            Tag::Pron1s => "pron1s",
            Tag::Pron1p => "pron1p",
            Tag::Pron2 => "pron2",
            Tag::Pron3 => "pron3",
            Tag::Article => "article",
            Tag::Preposition => "preposition",
            Tag::Conjunction => "conjunction",
            Tag::Auxiliary => "auxiliary",
            Tag::Filler => "filler",
            Tag::Absolutist => "absolutist",
            Tag::Tentative => "tentative",
            Tag::Certainty => "certainty",
            Tag::Quantifier => "quantifier",
            Tag::Interrogative => "interrogative",
        }
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Tag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tag `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "en" => Ok(Language::En),
            "de" => Ok(Language::De),
            other => Err(Error::Validation(format!("unsupported language `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub language: Language,
    entries: HashMap<String, BTreeSet<Tag>>,
}

impl Lexicon {
    pub fn new(language: Language, entries: HashMap<String, BTreeSet<Tag>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Validation("lexicon has no entries".into()));
        }
        let entries = entries.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        Ok(Lexicon { language, entries })
    }

    /// Parses `word<TAB>tag[,tag...]` lines; blank lines and `#` comments
    /// are skipped. `origin` is used in error messages only.
    pub fn parse(text: &str, language: Language, origin: &Path) -> Result<Self> {
        let mut entries: HashMap<String, BTreeSet<Tag>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tags) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, i + 1, "expected `word<TAB>tags`"))?;
            let set = entries.entry(word.trim().to_lowercase()).or_default();
            for t in tags.split(',') {
                let tag = t.trim().parse::<Tag>().map_err(|m| Error::format(origin, i + 1, m))?;
                set.insert(tag);
            }
        }
        Lexicon::new(language, entries)
    }

    pub fn load(path: &Path, language: Language) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse(&text, language, path)
    }

    /// The lexicon shipped with the crate for `language`.
    pub fn builtin(language: Language) -> Self {
        let (text, name) = match language {
            Language::En => (include_str!("../data/lexicon_en.tsv"), "lexicon_en.tsv"),
            Language::De => (include_str!("../data/lexicon_de.tsv"), "lexicon_de.tsv"),
        };
        Lexicon::parse(text, language, Path::new(name)).expect("bundled lexicon is valid")
    }

    pub fn tags(&self, word: &str) -> Option<&BTreeSet<Tag>> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Words carrying `tag`, sorted.
    pub fn words_with(&self, tag: Tag) -> Vec<&str> {
        let mut w: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, t)| t.contains(&tag))
            .map(|(k, _)| k.as_str())
            .collect();
        w.sort_unstable();
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub speaker_id: String,
    pub text: String,
    pub language: Language,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminator {
    Period,
    Question,
    Exclamation,
    /// Text ended without punctuation.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub terminator: Terminator,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Lowercased word tokens with punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    sentences(text).into_iter().flat_map(|s| s.tokens).collect()
}

/// Splits on `.`, `!` and `?`; sentences without tokens are dropped.
pub fn sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        let w = word.trim_matches('\'');
        if !w.is_empty() {
            tokens.push(w.to_lowercase());
        }
        word.clear();
    };
    for c in text.chars() {
        if is_word_char(c) {
            word.push(c);
            continue;
        }
        flush(&mut word, &mut tokens);
        let term = match c {
            '.' => Terminator::Period,
            '?' => Terminator::Question,
            '!' => Terminator::Exclamation,
            _ => continue,
        };
        if !tokens.is_empty() {
            out.push(Sentence { tokens: std::mem::take(&mut tokens), terminator: term });
        }
    }
    flush(&mut word, &mut tokens);
    if !tokens.is_empty() {
        out.push(Sentence { tokens, terminator: Terminator::None });
    }
    out
}

const BASE_NAMES: [&str; 14] = [
    "token_count",
    "sentence_count",
    "char_count",
    "distinct_types",
    "hapax_legomena",
    "type_token_ratio",
    "hapax_ratio",
    "mean_word_length",
    "std_word_length",
    "mean_sentence_length",
    "std_sentence_length",
    "max_sentence_length",
    "prop_long_words",
    "prop_short_words",
];

const DERIVED_NAMES: [&str; 15] = [
    "subordinators_per_sentence",
    "negations_per_sentence",
    "sentiment_polarity",
    "prop_sentiment",
    "noun_verb_ratio",
    "adjectives_per_noun",
    "adverbs_per_verb",
    "first_person_share_of_pronouns",
    "prop_pronouns",
    "prop_first_person",
    "prop_function_words",
    "prop_content_words",
    "prop_untagged",
    "prop_questions",
    "prop_exclamations",
];

/// Words of at least this many characters count as long.
const LONG_WORD: usize = 7;
const SHORT_WORD: usize = 3;

/// The 51 psycholinguistic feature names, in vector order.
pub fn psycholing_names() -> Vec<String> {
    BASE_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(Tag::ALL.iter().map(|t| format!("prop_{}", t.as_str())))
        .chain(DERIVED_NAMES.iter().map(|s| s.to_string()))
        .collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn psycholing_vector(seg: &TranscriptSegment, lex: &Lexicon) -> Result<FeatureVector> {
    if seg.language != lex.language {
        return Err(Error::Validation(format!(
            "transcript of speaker {} is `{}` but the lexicon is `{}`",
            seg.speaker_id, seg.language, lex.language
        )));
    }
    let sents = sentences(&seg.text);
    let tokens: Vec<&str> = sents.iter().flat_map(|s| s.tokens.iter().map(String::as_str)).collect();
    let n_tok = tokens.len() as f64;
    let n_sent = sents.len() as f64;

    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &tokens {
        *freq.entry(t).or_default() += 1;
    }
    let types = freq.len() as f64;
    let hapax = freq.values().filter(|&&c| c == 1).count() as f64;

    let lengths: Vec<f64> = tokens.iter().map(|t| t.chars().count() as f64).collect();
    let chars: f64 = lengths.iter().sum();
    let (wl_mean, wl_std) = mean_std(&lengths);
    let sent_lens: Vec<f64> = sents.iter().map(|s| s.tokens.len() as f64).collect();
    let (sl_mean, sl_std) = mean_std(&sent_lens);
    let sl_max = sent_lens.iter().copied().fold(0.0, f64::max);
    let long = lengths.iter().filter(|&&l| l >= LONG_WORD as f64).count() as f64;
    let short = lengths.iter().filter(|&&l| l <= SHORT_WORD as f64).count() as f64;

    let mut tag_counts: HashMap<Tag, f64> = HashMap::new();
    let mut untagged = 0.0;
    let mut function = 0.0;
    let mut content = 0.0;
    for t in &tokens {
        match lex.tags(t) {
            Some(tags) => {
                for &tag in tags {
                    *tag_counts.entry(tag).or_default() += 1.0;
                }
                let is = |xs: &[Tag]| xs.iter().any(|x| tags.contains(x));
                if is(&[Tag::Noun, Tag::Verb, Tag::Adjective, Tag::Adverb]) {
                    content += 1.0;
                }
                if is(&[
                    Tag::Article,
                    Tag::Preposition,
                    Tag::Conjunction,
                    Tag::Auxiliary,
                    Tag::Pron1s,
                    Tag::Pron1p,
                    Tag::Pron2,
                    Tag::Pron3,
                    Tag::Subordinator,
                ]) {
                    function += 1.0;
                }
            }
            None => untagged += 1.0,
        }
    }
    let c = |t: Tag| tag_counts.get(&t).copied().unwrap_or(0.0);
    let pos = c(Tag::PositiveSentiment);
    let neg = c(Tag::NegativeSentiment);
    let first = c(Tag::Pron1s) + c(Tag::Pron1p);
    let pronouns = first + c(Tag::Pron2) + c(Tag::Pron3);
    let questions = sents.iter().filter(|s| s.terminator == Terminator::Question).count() as f64;
    let exclamations = sents.iter().filter(|s| s.terminator == Terminator::Exclamation).count() as f64;

    let mut values = vec![
        n_tok,
        n_sent,
        chars,
        types,
        hapax,
        ratio(types, n_tok),
        ratio(hapax, n_tok),
        wl_mean,
        wl_std,
        sl_mean,
        sl_std,
        sl_max,
        ratio(long, n_tok),
        ratio(short, n_tok),
    ];
    values.extend(Tag::ALL.iter().map(|&t| ratio(c(t), n_tok)));
    values.extend([
        ratio(c(Tag::Subordinator), n_sent),
        ratio(c(Tag::Negation), n_sent),
        ratio(pos - neg, pos + neg),
        ratio(pos + neg, n_tok),
        ratio(c(Tag::Noun), c(Tag::Verb)),
        ratio(c(Tag::Adjective), c(Tag::Noun)),
        ratio(c(Tag::Adverb), c(Tag::Verb)),
        ratio(first, pronouns),
        ratio(pronouns, n_tok),
        ratio(first, n_tok),
        ratio(function, n_tok),
        ratio(content, n_tok),
        ratio(untagged, n_tok),
        ratio(questions, n_sent),
        ratio(exclamations, n_sent),
    ]);
    FeatureVector::new(FeatureSet::Psycholing, psycholing_names(), values.into_iter().map(Some).collect())
}
