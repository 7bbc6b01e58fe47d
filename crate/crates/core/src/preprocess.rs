//! Five-stage text normalization applied identically at train and inference
//! time, followed by whitespace tokenization with lowercasing.
//!
//! Stage order is fixed: clean, normalize, expand_phrase, expand_negation,
//! escape_punct. A pipeline may enable any subset, but the stages it enables
//! always run in that order. The full pipeline is idempotent on its own
//! output: expansions either fire on the first pass or their apostrophes get
//! isolated by punctuation escaping, so a second pass changes nothing.
//!
//! Known simplifications, chosen for determinism over linguistic accuracy:
//! ambiguous "'s" always expands to " is" (so "the dog's bowl" becomes
//! "the dog is bowl"), and date/time detection covers only dd/dd/dddd and
//! d?d:dd shapes.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_CONTRACTIONS: &str = include_str!("../data/contractions.tsv");
const BUILTIN_NEGATIONS: &str = include_str!("../data/negations.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Clean,
    Normalize,
    ExpandPhrase,
    ExpandNegation,
    EscapePunct,
}

pub const ALL_STAGES: [Stage; 5] = [
    Stage::Clean,
    Stage::Normalize,
    Stage::ExpandPhrase,
    Stage::ExpandNegation,
    Stage::EscapePunct,
];

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Clean => "clean",
            Stage::Normalize => "normalize",
            Stage::ExpandPhrase => "expand_phrase",
            Stage::ExpandNegation => "expand_negation",
            Stage::EscapePunct => "escape_punct",
        };
        f.write_str(name)
    }
}

/// Which stages run, plus the expansion tables. Serialized into checkpoints
/// so inference always reapplies the exact training-time pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub stages: Vec<Stage>,
    pub contractions: Vec<[String; 2]>,
    pub negations: Vec<[String; 2]>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: ALL_STAGES.to_vec(),
            contractions: parse_table(BUILTIN_CONTRACTIONS, "<builtin contractions>")
                .expect("builtin contraction table"),
            negations: parse_table(BUILTIN_NEGATIONS, "<builtin negations>")
                .expect("builtin negation table"),
        }
    }
}

/// Parse a "short<TAB>long" table; '#' lines and blank lines are skipped.
pub fn parse_table(text: &str, origin: &str) -> Result<Vec<[String; 2]>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((short, long)) if !short.is_empty() && !long.is_empty() => {
                pairs.push([short.to_lowercase(), long.to_string()]);
            }
            _ => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: i + 1,
                    msg: "expected two tab-separated fields".to_string(),
                });
            }
        }
    }
    Ok(pairs)
}

/// A compiled short→long substitution table, matched case-insensitively on
/// word boundaries with longest-form priority; the first letter's case is
/// carried over to the replacement.
#[derive(Clone, Debug)]
pub struct ExpansionTable {
    map: HashMap<String, String>,
    matcher: Option<Regex>,
}

impl ExpansionTable {
    pub fn from_pairs(pairs: &[[String; 2]]) -> Result<ExpansionTable> {
        let mut map = HashMap::new();
        for [short, long] in pairs {
            map.insert(short.to_lowercase(), long.clone());
        }
        let matcher = if map.is_empty() {
            None
        } else {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
            let alts: Vec<String> = keys.iter().map(|k| regex::escape(k)).collect();
            let pattern = format!(r"(?i)\b(?:{})\b", alts.join("|"));
            Some(Regex::new(&pattern).map_err(|e| {
                Error::Config(format!("expansion table produced invalid matcher: {e}"))
            })?)
        };
        Ok(ExpansionTable { map, matcher })
    }

    pub fn apply(&self, s: &str) -> String {
        let Some(re) = &self.matcher else {
            return s.to_string();
        };
        re.replace_all(s, |caps: &regex::Captures| {
            let found = &caps[0];
            let long = &self.map[&found.to_lowercase()];
            if found.chars().next().is_some_and(char::is_uppercase) {
                let mut cs = long.chars();
                match cs.next() {
                    Some(first) => first.to_uppercase().chain(cs).collect(),
                    None => String::new(),
                }
            } else {
                long.clone()
            }
        })
        .into_owned()
    }
}

fn in_removed_block(c: char) -> bool {
    matches!(c,
        '\u{0400}'..='\u{04FF}'   // Cyrillic
        | '\u{0370}'..='\u{03FF}' // Greek
        | '\u{4E00}'..='\u{9FFF}' // CJK Unified Ideographs
        | '\u{3040}'..='\u{30FF}' // Hiragana + Katakana
    )
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Stage 1: strip characters from the configured non-Latin blocks and
/// collapse the whitespace runs this leaves behind.
pub fn clean_text(s: &str) -> String {
    let kept: String = s.chars().filter(|c| !in_removed_block(*c)).collect();
    collapse_whitespace(&kept)
}

fn date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d{2}/\d{2}/\d{4}\b").unwrap())
}

fn time_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d{1,2}:\d{2}\b").unwrap())
}

/// Stage 2: fold typographic quotes/dashes/ellipses to ASCII and replace
/// dd/dd/dddd and d?d:dd digit patterns with <date>/<time> placeholders.
pub fn normalize_chars(s: &str) -> String {
    let s = s.replace(['\u{2018}', '\u{2019}'], "'");
    let s = s.replace(['\u{201C}', '\u{201D}', '\u{201E}'], "\"");
    let s = s.replace(['\u{2013}', '\u{2014}'], "-");
    let s = s.replace('\u{2026}', "...");
    let s = date_re().replace_all(&s, "<date>");
    let s = time_re().replace_all(&s, "<time>");
    s.into_owned()
}

fn apos_s_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b([a-z]+)'s\b").unwrap())
}

fn nt_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b([a-z]+)n't\b").unwrap())
}

/// Stage 3: expand shortened phrases via the contraction table, then expand
/// any remaining "'s" to " is" (the uniform-policy fallback).
pub fn expand_phrases(s: &str, table: &ExpansionTable) -> String {
    let s = table.apply(s);
    apos_s_re().replace_all(&s, "$1 is").into_owned()
}

/// Stage 4: expand negations via the table, then the generic "n't" → " not"
/// fallback for regular forms the table does not list.
pub fn expand_negations(s: &str, table: &ExpansionTable) -> String {
    let s = table.apply(s);
    nt_re().replace_all(&s, "$1 not").into_owned()
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<(?:date|time)>").unwrap())
}

/// Stage 5: surround every ASCII punctuation character with spaces, leaving
/// the angle brackets of <date>/<time> placeholders intact, then collapse
/// repeated whitespace.
pub fn escape_punct(s: &str) -> String {
    fn escape_segment(out: &mut String, seg: &str) {
        for c in seg.chars() {
            if c.is_ascii_punctuation() {
                out.push(' ');
                out.push(c);
                out.push(' ');
            } else {
                out.push(c);
            }
        }
    }
    let mut out = String::with_capacity(s.len() + 16);
    let mut last = 0;
    for m in placeholder_re().find_iter(s) {
        escape_segment(&mut out, &s[last..m.start()]);
        out.push_str(m.as_str());
        last = m.end();
    }
    escape_segment(&mut out, &s[last..]);
    collapse_whitespace(&out)
}

/// Raw text plus the pipeline's view of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedText {
    pub raw: String,
    pub normalized: String,
    pub tokens: Vec<String>,
}

/// A pipeline with its expansion tables compiled, ready to apply.
#[derive(Clone, Debug)]
pub struct Pipeline {
    config: PipelineConfig,
    contractions: ExpansionTable,
    negations: ExpansionTable,
}

impl Pipeline {
    pub fn new(mut config: PipelineConfig) -> Result<Pipeline> {
        config.stages.sort();
        config.stages.dedup();
        let contractions = ExpansionTable::from_pairs(&config.contractions)?;
        let negations = ExpansionTable::from_pairs(&config.negations)?;
        Ok(Pipeline {
            config,
            contractions,
            negations,
        })
    }

    pub fn with_defaults() -> Pipeline {
        Pipeline::new(PipelineConfig::default()).expect("default pipeline")
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn apply_stage(&self, stage: Stage, s: &str) -> String {
        match stage {
            Stage::Clean => clean_text(s),
            Stage::Normalize => normalize_chars(s),
            Stage::ExpandPhrase => expand_phrases(s, &self.contractions),
            Stage::ExpandNegation => expand_negations(s, &self.negations),
            Stage::EscapePunct => escape_punct(s),
        }
    }

    /// Run the enabled stages in order, reporting which ones changed the
    /// string (the per-stage counts surfaced by the preprocess command).
    pub fn normalize_with_flags(&self, s: &str) -> (String, Vec<(Stage, bool)>) {
        let mut cur = s.to_string();
        let mut flags = Vec::with_capacity(self.config.stages.len());
        for &stage in &self.config.stages {
            let next = self.apply_stage(stage, &cur);
            flags.push((stage, next != cur));
            cur = next;
        }
        (cur, flags)
    }

    pub fn preprocess(&self, s: &str) -> TokenizedText {
        let (normalized, _) = self.normalize_with_flags(s);
        let tokens = normalized
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        TokenizedText {
            raw: s.to_string(),
            normalized,
            tokens,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipeline() -> Pipeline {
        Pipeline::with_defaults()
    }

    #[test]
    fn clean_keeps_latin_and_strips_blocks() {
        assert_eq!(clean_text("hello"), "hello");
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("good привет app"), "good app");
        assert_eq!(clean_text("Ελληνικά mixed 文字 here"), "mixed here");
        assert_eq!(clean_text("カタカナ gone"), "gone");
    }

    #[test]
    fn clean_output_has_no_removed_code_points() {
        let noisy = "abcпри文字вますεξ def";
        let cleaned = clean_text(noisy);
        assert!(cleaned.chars().all(|c| !in_removed_block(c)));
    }

    #[test]
    fn normalize_quotes_dashes_ellipsis() {
        assert_eq!(normalize_chars("it’s"), "it's");
        assert_eq!(normalize_chars("”quoted“"), "\"quoted\"");
        assert_eq!(normalize_chars("em—dash and en–dash"), "em-dash and en-dash");
        assert_eq!(normalize_chars("wait… what"), "wait... what");
    }

    #[test]
    fn normalize_date_and_time_placeholders() {
        assert_eq!(normalize_chars("at 10:30"), "at <time>");
        assert_eq!(normalize_chars("at 9:05"), "at <time>");
        assert_eq!(normalize_chars("due 12/05/2019 ok"), "due <date> ok");
        // shapes outside the two patterns pass through
        assert_eq!(normalize_chars("110:30"), "110:30");
        assert_eq!(normalize_chars("1/2/19"), "1/2/19");
    }

    #[test]
    fn phrase_expansion_examples() {
        let t = ExpansionTable::from_pairs(&PipelineConfig::default().contractions).unwrap();
        assert_eq!(expand_phrases("I'll", &t), "I will");
        assert_eq!(expand_phrases("plain text", &t), "plain text");
        assert_eq!(expand_phrases("You're right", &t), "You are right");
        assert_eq!(expand_phrases("the dog's bowl", &t), "the dog is bowl");
        assert_eq!(expand_phrases("Let's go", &t), "Let us go");
    }

    #[test]
    fn negation_expansion_examples() {
        let t = ExpansionTable::from_pairs(&PipelineConfig::default().negations).unwrap();
        assert_eq!(expand_negations("aren't", &t), "are not");
        assert_eq!(expand_negations("won't", &t), "will not");
        assert_eq!(expand_negations("can't", &t), "cannot");
        assert_eq!(expand_negations("not bad", &t), "not bad");
        // regular form not in the table falls to the generic rule
        assert_eq!(expand_negations("daren't", &t), "dare not");
    }

    #[test]
    fn escape_punct_examples() {
        assert_eq!(escape_punct("great,fast"), "great , fast");
        assert_eq!(escape_punct("done."), "done .");
        assert_eq!(escape_punct("no punct"), "no punct");
        assert_eq!(escape_punct("see <date> at <time>!"), "see <date> at <time> !");
        assert_eq!(escape_punct("<made-up>"), "< made - up >");
    }

    #[test]
    fn preprocess_composes_stages() {
        let out = pipeline().preprocess("I'll recommend it.");
        assert_eq!(out.tokens, vec!["i", "will", "recommend", "it", "."]);
    }

    #[test]
    fn preprocess_empty_is_empty() {
        let out = pipeline().preprocess("");
        assert!(out.tokens.is_empty());
    }

    #[test]
    fn preprocess_idempotent_on_own_output() {
        let p = pipeline();
        for raw in [
            "I'll recommend it, 100%!",
            "They won’t “fix” it by 12/05/2019…",
            "добрый Can't stop at 10:30",
            "o'clock isn't a contraction we expand",
        ] {
            let once = p.preprocess(raw);
            let again = p.preprocess(&once.tokens.join(" "));
            assert_eq!(once.tokens, again.tokens, "raw: {raw}");
        }
    }

    #[test]
    fn stage_subset_keeps_canonical_order() {
        let cfg = PipelineConfig {
            stages: vec![Stage::EscapePunct, Stage::Normalize],
            ..PipelineConfig::default()
        };
        let p = Pipeline::new(cfg).unwrap();
        assert_eq!(
            p.config().stages,
            vec![Stage::Normalize, Stage::EscapePunct]
        );
        // normalize must run before escaping so the placeholder survives
        let out = p.preprocess("at 10:30.");
        assert_eq!(out.tokens, vec!["at", "<time>", "."]);
    }

    #[test]
    fn table_parse_reports_line_numbers() {
        let err = parse_table("ok\tfine\nbroken line\n", "test.tsv").unwrap_err();
        match err {
            Error::Parse { path, line, .. } => {
                assert_eq!(path, "test.tsv");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn change_flags_track_stages() {
        let (out, flags) = pipeline().normalize_with_flags("I'll try");
        assert_eq!(out, "I will try");
        let changed: Vec<Stage> = flags
            .iter()
            .filter(|(_, c)| *c)
            .map(|(s, _)| *s)
            .collect();
        assert_eq!(changed, vec![Stage::ExpandPhrase]);
    }
}
