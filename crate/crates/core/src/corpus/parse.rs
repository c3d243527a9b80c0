//! Lexicon-driven caption parsing: narrator tag, verb slot, longest-match noun spans.

use super::{CaptionRecord, CorpusError, Lexicon};

/// Longest multiword lemma considered when matching spans.
pub const MAX_SPAN_TOKENS: usize = 4;

/// Half-open token range `[start, end)`; token `i` is the `i`-th whitespace word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Slot positions of a parsed caption within its token list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slots {
    pub verb: Span,
    /// Noun spans in text order, each with its lemma.
    pub nouns: Vec<(Span, String)>,
}

/// One lowercase token per whitespace word with surrounding punctuation trimmed
/// (`#` is kept so narration tags survive). Pure punctuation words become "".
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '#')
                .to_lowercase()
        })
        .collect()
}

/// Lemma forms a surface token may stand for, most literal first:
/// the token itself, then with a regular `-ies`, `-es` or `-s` ending undone.
fn lemma_candidates(token: &str) -> Vec<String> {
    let mut out = vec![token.to_string()];
    if let Some(stem) = token.strip_suffix("ies") {
        if !stem.is_empty() {
            out.push(format!("{stem}y"));
        }
    }
    if let Some(stem) = token.strip_suffix("es") {
        if !stem.is_empty() {
            out.push(stem.to_string());
        }
    }
    if let Some(stem) = token.strip_suffix('s') {
        if !stem.is_empty() && !stem.ends_with('s') {
            out.push(stem.to_string());
        }
    }
    out
}

/// Candidate lemmas for a multiword surface span, `_`-joined, most literal first.
pub fn span_lemma_forms(words: &[String]) -> Vec<String> {
    let Some((last, head)) = words.split_last() else {
        return Vec::new();
    };
    let prefix = head.join("_");
    lemma_candidates(last)
        .into_iter()
        .map(|c| if prefix.is_empty() { c } else { format!("{prefix}_{c}") })
        .collect()
}

fn span_lemma(tokens: &[String], span: Span, accept: &impl Fn(&str) -> bool) -> Option<String> {
    let words = &tokens[span.start..span.end];
    if words.is_empty() || words.iter().any(String::is_empty) {
        return None;
    }
    span_lemma_forms(words).into_iter().find(|l| accept(l))
}

fn candidate_spans(
    tokens: &[String],
    from: usize,
    max_len: usize,
    accept: &impl Fn(&str) -> bool,
) -> Vec<(Span, String)> {
    let mut out = Vec::new();
    for start in from..tokens.len() {
        for len in 1..=max_len.min(tokens.len() - start) {
            let span = Span {
                start,
                end: start + len,
            };
            if let Some(lemma) = span_lemma(tokens, span, accept) {
                out.push((span, lemma));
            }
        }
    }
    out
}

/// Longest spans win; equal lengths go to the earliest start. Result is in text order.
fn select_longest(mut spans: Vec<(Span, String)>) -> Vec<(Span, String)> {
    spans.sort_by(|(a, _), (b, _)| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
    let mut chosen: Vec<(Span, String)> = Vec::new();
    for (span, lemma) in spans {
        if chosen.iter().all(|(c, _)| !c.overlaps(&span)) {
            chosen.push((span, lemma));
        }
    }
    chosen.sort_by_key(|(s, _)| s.start);
    chosen
}

fn content_start(tokens: &[String]) -> usize {
    usize::from(tokens.first().is_some_and(|t| t.starts_with('#')))
}

/// Parse a raw narration against verb and noun lexicons.
///
/// The returned record has empty `caption_id`, `scene_id` and `clip_id`.
pub fn parse_caption(
    text: &str,
    verbs: &Lexicon,
    nouns: &Lexicon,
) -> Result<CaptionRecord, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyText);
    }
    let tokens = tokenize(text);
    let in_verbs = |l: &str| verbs.contains(l);
    let (verb_idx, verb) = (content_start(&tokens)..tokens.len())
        .find_map(|i| {
            span_lemma(&tokens, Span { start: i, end: i + 1 }, &in_verbs).map(|l| (i, l))
        })
        .ok_or_else(|| CorpusError::NoVerbFound(text.to_string()))?;
    let in_nouns = |l: &str| nouns.contains(l);
    let max_len = nouns.max_words().min(MAX_SPAN_TOKENS);
    let found = select_longest(candidate_spans(&tokens, verb_idx + 1, max_len, &in_nouns));
    if found.is_empty() {
        return Err(CorpusError::NoNounFound(text.to_string()));
    }
    let nouns = found.into_iter().map(|(_, l)| l).collect();
    Ok(CaptionRecord::new("", text, verb, nouns))
}

/// Find the verb and noun spans of an annotated caption inside `tokens`.
///
/// Returns `None` unless the verb and every listed noun are located.
pub fn locate_slots(tokens: &[String], verb: &str, nouns: &[String]) -> Option<Slots> {
    let is_verb = |l: &str| l == verb;
    let verb_idx = (content_start(tokens)..tokens.len())
        .find(|&i| span_lemma(tokens, Span { start: i, end: i + 1 }, &is_verb).is_some())?;
    let is_noun = |l: &str| nouns.iter().any(|n| n == l);
    let max_len = nouns
        .iter()
        .map(|n| n.split('_').count())
        .max()
        .unwrap_or(1)
        .min(MAX_SPAN_TOKENS);
    let spans = select_longest(candidate_spans(tokens, verb_idx + 1, max_len, &is_noun));
    if !nouns.iter().all(|n| spans.iter().any(|(_, l)| l == n)) {
        return None;
    }
    Some(Slots {
        verb: Span {
            start: verb_idx,
            end: verb_idx + 1,
        },
        nouns: spans,
    })
}

/// Regular `-s` form of a word (third person singular or plural).
pub fn s_form(word: &str) -> String {
    let vowel = |c: char| "aeiou".contains(c);
    if ["s", "x", "z", "ch", "sh", "o"].iter().any(|e| word.ends_with(e)) {
        format!("{word}es")
    } else if word.len() > 1
        && word.ends_with('y')
        && !word[..word.len() - 1].ends_with(vowel)
    {
        format!("{}ies", &word[..word.len() - 1])
    } else {
        format!("{word}s")
    }
}

/// Render `new_lemma` with the same regular inflection `surface` carries relative to `lemma`.
///
/// `surface` is the space-joined token text of the slot.
pub fn inflect_like(surface: &str, lemma: &str, new_lemma: &str) -> String {
    let base = lemma.replace('_', " ");
    let new = new_lemma.replace('_', " ");
    if surface == base {
        return new;
    }
    match new.rsplit_once(' ') {
        Some((head, last)) => format!("{head} {}", s_form(last)),
        None => s_form(&new),
    }
}

/// Replace the words covered by `span` in `text`, keeping the trailing punctuation
/// of the last replaced word.
pub fn replace_span(text: &str, span: Span, replacement: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let last = words[span.end - 1];
    let kept = last.len() - last.trim_end_matches(|c: char| !c.is_alphanumeric()).len();
    let tail = &last[last.len() - kept..];
    let mut out: Vec<String> = words[..span.start].iter().map(|w| w.to_string()).collect();
    out.push(format!("{replacement}{tail}"));
    out.extend(words[span.end..].iter().map(|w| w.to_string()));
    out.join(" ")
}
