//! Tokenization, TF-IDF keyword scoring and the partial mask.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";
pub const DEFAULT_MASK_RATIO: f64 = 0.3;

/// Built-in English stopwords: articles, pronouns, auxiliaries,
/// prepositions, conjunctions and a few common adverbs/determiners.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Surface form as it appears in the sentence.
    pub text: String,
    /// Lowercased form used for model lookups.
    pub norm: String,
    /// Byte range of `text` within the sentence's raw string.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    raw: String,
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn raw(&self) -> &str {
        &self.raw
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

    /// Builds a sentence from already-split tokens. The raw text is the
    /// tokens joined by single spaces, with offsets into that string.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self> {
        let mut raw = String::new();
        let mut out = Vec::with_capacity(tokens.len());
        for t in tokens {
            let t = t.as_ref();
            if t.is_empty() {
                continue;
            }
            if !raw.is_empty() {
                raw.push(' ');
            }
            let start = raw.len();
            raw.push_str(t);
            out.push(Token {
                text: t.to_string(),
                norm: t.to_lowercase(),
                start,
                end: raw.len(),
            });
        }
        if out.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self { raw, tokens: out })
    }

    /// Pre-tokenized input: tokens separated by spaces, kept verbatim.
    pub fn pretokenized(line: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut offset = 0;
        for piece in line.split(' ') {
            if !piece.is_empty() {
                tokens.push(Token {
                    text: piece.to_string(),
                    norm: piece.to_lowercase(),
                    start: offset,
                    end: offset + piece.len(),
                });
            }
            offset += piece.len() + 1;
        }
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            raw: line.to_string(),
            tokens,
        })
    }

    /// Canonical form: tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The sentence with the token at `position` deleted.
    pub fn without(&self, position: usize) -> Result<Self> {
        if position >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: position,
                len: self.len(),
            });
        }
        let rest: Vec<&str> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != position)
            .map(|(_, t)| t.text.as_str())
            .collect();
        Self::from_tokens(&rest)
    }
}

/// How raw lines are split into tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TokenizerMode {
    #[default]
    Unicode,
    Pretokenized,
}

impl TokenizerMode {
    pub fn sentence(self, text: &str) -> Result<Sentence> {
        match self {
            TokenizerMode::Unicode => tokenize(text),
            TokenizerMode::Pretokenized => Sentence::pretokenized(text),
        }
    }
}

/// True for scripts written without spaces between words.
fn is_unsegmented_script(c: char) -> bool {
    matches!(c as u32,
        0x0E00..=0x0EFF      // Thai, Lao
        | 0x1000..=0x109F    // Myanmar
        | 0x1780..=0x17FF    // Khmer
        | 0x3040..=0x30FF    // Hiragana, Katakana
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified
        | 0xF900..=0xFAFF    // CJK compatibility
        | 0x20000..=0x2FFFF  // CJK extensions B+
    )
}

/// Splits text into runs of letters and digits.
///
/// Punctuation and whitespace separate tokens and are dropped. In scripts
/// without word spacing every grapheme cluster is a token of its own.
pub fn tokenize(text: &str) -> Result<Sentence> {
    let mut tokens = Vec::new();
    let mut run: Option<usize> = None;
    let close = |tokens: &mut Vec<Token>, start: usize, end: usize| {
        let t = &text[start..end];
        tokens.push(Token {
            text: t.to_string(),
            norm: t.to_lowercase(),
            start,
            end,
        });
    };
    for (idx, g) in text.grapheme_indices(true) {
        let first = g.chars().next().expect("graphemes are non-empty");
        if !first.is_alphanumeric() {
            if let Some(s) = run.take() {
                close(&mut tokens, s, idx);
            }
        } else if is_unsegmented_script(first) {
            if let Some(s) = run.take() {
                close(&mut tokens, s, idx);
            }
            close(&mut tokens, idx, idx + g.len());
        } else if run.is_none() {
            run = Some(idx);
        }
    }
    if let Some(s) = run {
        close(&mut tokens, s, text.len());
    }
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Sentence {
        raw: text.to_string(),
        tokens,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Self(DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect())
    }
}

impl Stopwords {
    pub fn none() -> Self {
        Self(HashSet::new())
    }

    /// One token per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, norm: &str) -> bool {
        self.0.contains(norm)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Document frequencies over a reference corpus.
#[derive(Debug, Clone)]
pub struct TfIdfModel {
    doc_count: usize,
    doc_freq: HashMap<String, usize>,
    stopwords: Stopwords,
}

impl TfIdfModel {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Number of sentences containing `token` (compared lowercased).
    pub fn doc_freq(&self, token: &str) -> usize {
        self.doc_freq.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    /// Smoothed inverse document frequency, `ln((N + 1) / (df + 1)) + 1`.
    pub fn idf(&self, token: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.doc_freq(token) as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    }
}

pub fn build_tfidf(corpus: &[Sentence]) -> Result<TfIdfModel> {
    build_tfidf_with(corpus, Stopwords::default())
}

pub fn build_tfidf_with(corpus: &[Sentence], stopwords: Stopwords) -> Result<TfIdfModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut doc_freq: HashMap<String, usize> = HashMap::new();
    for s in corpus {
        let unique: HashSet<&str> = s.tokens.iter().map(|t| t.norm.as_str()).collect();
        for t in unique {
            *doc_freq.entry(t.to_string()).or_default() += 1;
        }
    }
    Ok(TfIdfModel {
        doc_count: corpus.len(),
        doc_freq,
        stopwords,
    })
}

/// TF-IDF score of each distinct (lowercased) token of `s`.
pub fn keyword_scores(s: &Sentence, m: &TfIdfModel) -> HashMap<String, f64> {
    let n = s.len() as f64;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &s.tokens {
        *counts.entry(t.norm.as_str()).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(t, c)| {
            let score = if m.stopwords.contains(t) {
                0.0
            } else {
                c as f64 / n * m.idf(t)
            };
            (t.to_string(), score)
        })
        .collect()
}

/// Keyword positions of `s`: see [`select_by_scores`].
pub fn select_keywords(s: &Sentence, m: &TfIdfModel, ratio: f64) -> Result<BTreeSet<usize>> {
    let scores = keyword_scores(s, m);
    let per_position: Vec<f64> = s.tokens.iter().map(|t| scores[&t.norm]).collect();
    select_by_scores(&per_position, ratio)
}

/// Keyword budget `max(1, ceil(ratio·N))`.
///
/// A 1e-9 slack absorbs products like `0.3 * 10` landing a hair above an
/// integer.
pub fn keyword_budget(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64 - 1e-9).ceil() as usize).max(1)
}

/// Picks the top-`K` positions by score (ties to the earlier position).
/// Zero-score positions are never picked; if every score is zero the
/// earliest position alone is returned.
pub fn select_by_scores(scores: &[f64], ratio: f64) -> Result<BTreeSet<usize>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "mask ratio must be in (0, 1], got {ratio}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = keyword_budget(scores.len(), ratio);
    let mut ranked: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.0).collect();
    if ranked.is_empty() {
        return Ok(BTreeSet::from([0]));
    }
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(ranked.into_iter().take(k).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSentence {
    tokens: Vec<String>,
    masked: BTreeSet<usize>,
}

impl MaskedSentence {
    /// Canonical text: tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn masked_positions(&self) -> &BTreeSet<usize> {
        &self.masked
    }
}

pub fn partial_mask(
    s: &Sentence,
    keywords: &BTreeSet<usize>,
    mask_token: &str,
) -> Result<MaskedSentence> {
    if let Some(&bad) = keywords.iter().find(|&&i| i >= s.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: s.len(),
        });
    }
    let tokens = s
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if keywords.contains(&i) {
                mask_token.to_string()
            } else {
                t.text.clone()
            }
        })
        .collect();
    Ok(MaskedSentence {
        tokens,
        masked: keywords.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn texts(s: &Sentence) -> Vec<&str> {
        s.tokens().iter().map(|t| t.norm.as_str()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(texts(&tokenize("A dog runs.").unwrap()), ["a", "dog", "runs"]);
        assert_eq!(tokenize("A dog runs.").unwrap().tokens()[0].text, "A");
        assert!(matches!(tokenize("  "), Err(Error::EmptyInput)));
        assert!(matches!(tokenize("?!"), Err(Error::EmptyInput)));
        assert_eq!(
            texts(&tokenize("state-of-the-art").unwrap()),
            ["state", "of", "the", "art"]
        );
    }

    #[test]
    fn tokenize_offsets_and_scripts() {
        let s = tokenize("Café au lait, 42x!").unwrap();
        assert_eq!(texts(&s), ["café", "au", "lait", "42x"]);
        for t in s.tokens() {
            assert_eq!(&s.raw()[t.start..t.end], t.text);
        }
        assert_eq!(texts(&tokenize("我爱北京 ok").unwrap()), ["我", "爱", "北", "京", "ok"]);
        // combining accent stays with its base letter
        assert_eq!(texts(&tokenize("cafe\u{301} x").unwrap()), ["cafe\u{301}", "x"]);
    }

    #[test]
    fn pretokenized_input() {
        let s = Sentence::pretokenized("我 爱  北京 [x]").unwrap();
        assert_eq!(texts(&s), ["我", "爱", "北京", "[x]"]);
        for t in s.tokens() {
            assert_eq!(&s.raw()[t.start..t.end], t.text);
        }
        assert!(Sentence::pretokenized("   ").is_err());
    }

    #[test]
    fn deletion_rejoins() {
        let s = tokenize("The cat, sat!").unwrap();
        let d = s.without(1).unwrap();
        assert_eq!(d.raw(), "The sat");
        assert_eq!(d.tokens()[1].start, 4);
        assert!(s.without(3).is_err());
        assert!(tokenize("one").unwrap().without(0).is_err());
    }

    fn corpus(lines: &[&str]) -> Vec<Sentence> {
        lines.iter().map(|l| tokenize(l).unwrap()).collect()
    }

    #[test]
    fn document_frequencies() {
        let m = build_tfidf(&corpus(&["cat sat", "cat ran", "dog ran"])).unwrap();
        assert_eq!(m.doc_count(), 3);
        assert_eq!(m.doc_freq("cat"), 2);
        assert_eq!(m.doc_freq("ran"), 2);
        assert_eq!(m.doc_freq("dog"), 1);
        assert_eq!(m.doc_freq("Dog"), 1);

        let m = build_tfidf(&corpus(&["red fish blue fish"])).unwrap();
        assert_eq!(m.doc_freq("red"), 1);
        assert_eq!(m.doc_freq("fish"), 1);

        assert!(matches!(build_tfidf(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn idf_examples() {
        let m = build_tfidf(&corpus(&["cat", "dog", "emu"])).unwrap();
        assert_relative_eq!(m.idf("cat"), 1.6931471805599454, epsilon = 1e-15);
        assert_relative_eq!(m.idf("unseen"), 2.386294361119891, epsilon = 1e-15);
        let scores = keyword_scores(&tokenize("the cat").unwrap(), &m);
        assert_eq!(scores["the"], 0.0);
        assert_relative_eq!(scores["cat"], 0.5 * 1.6931471805599454, epsilon = 1e-15);
    }

    #[test]
    fn identical_corpus_has_unit_idf() {
        let m = build_tfidf(&corpus(&["alpha beta"; 7])).unwrap();
        assert_eq!(m.idf("alpha"), 1.0);
        assert_eq!(m.idf("beta"), 1.0);
    }

    #[test]
    fn stopword_file_format() {
        let sw = Stopwords::parse("# header\nThe\n\n  of \n#x\n");
        assert_eq!(sw.len(), 2);
        assert!(sw.contains("the"));
        assert!(sw.contains("of"));
        assert!(!sw.contains("#x"));
    }

    #[test]
    fn budget_examples() {
        assert_eq!(keyword_budget(6, 0.3), 2);
        assert_eq!(keyword_budget(10, 0.3), 3);
        assert_eq!(keyword_budget(2, 0.1), 1);
        assert_eq!(keyword_budget(4, 1.0), 4);
        assert_eq!(select_by_scores(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 0.3).unwrap().len(), 2);
    }

    #[test]
    fn tie_break_prefers_earlier_positions() {
        let scores = [0.9, 0.9, 0.1];
        assert_eq!(
            select_by_scores(&scores, 2.0 / 3.0).unwrap(),
            BTreeSet::from([0, 1])
        );
        // ceil(0.67 * 3) = 3, so the low-scoring token is included too.
        assert_eq!(
            select_by_scores(&scores, 0.67).unwrap(),
            BTreeSet::from([0, 1, 2])
        );
        assert_eq!(
            select_by_scores(&[0.1, 0.5, 0.5, 0.2], 0.25).unwrap(),
            BTreeSet::from([1])
        );
    }

    #[test]
    fn zero_scores_are_never_picked() {
        assert_eq!(select_by_scores(&[0.0, 0.0, 0.0], 0.5).unwrap(), BTreeSet::from([0]));
        assert_eq!(
            select_by_scores(&[0.0, 0.4, 0.0, 0.0], 1.0).unwrap(),
            BTreeSet::from([1])
        );
        let m = build_tfidf(&corpus(&["the cat"])).unwrap();
        let s = tokenize("the of and").unwrap();
        assert_eq!(select_keywords(&s, &m, 0.3).unwrap(), BTreeSet::from([0]));
    }

    #[test]
    fn bad_ratio_rejected() {
        assert!(select_by_scores(&[1.0], 0.0).is_err());
        assert!(select_by_scores(&[1.0], 1.5).is_err());
        assert!(select_by_scores(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn mask_examples() {
        let s = tokenize("the cat sat on the mat").unwrap();
        let m = partial_mask(&s, &BTreeSet::from([1, 5]), DEFAULT_MASK_TOKEN).unwrap();
        assert_eq!(m.text(), "the [MASK] sat on the [MASK]");
        assert_eq!(m.tokens().len(), s.len());

        assert_eq!(partial_mask(&s, &BTreeSet::new(), "[MASK]").unwrap().text(), s.raw());

        let all: BTreeSet<usize> = (0..s.len()).collect();
        let m = partial_mask(&s, &all, "<mask>").unwrap();
        assert!(m.tokens().iter().all(|t| t == "<mask>"));

        assert!(matches!(
            partial_mask(&s, &BTreeSet::from([6]), "[MASK]"),
            Err(Error::IndexOutOfRange { index: 6, len: 6 })
        ));
    }

    #[test]
    fn keywords_from_tfidf() {
        let m = build_tfidf(&corpus(&[
            "the cat sat on the mat",
            "the dog sat on the rug",
            "a bird flew",
        ]))
        .unwrap();
        let s = tokenize("the cat sat on the mat").unwrap();
        // cat and mat (df 1) outrank sat (df 2); the and on are stopwords.
        assert_eq!(select_keywords(&s, &m, 0.3).unwrap(), BTreeSet::from([1, 5]));
    }
}
