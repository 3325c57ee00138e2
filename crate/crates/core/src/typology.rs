//! Rule-based market classification: resolution type (event / deadline /
//! unclassifiable) and target category.
//!
//! The rules are data, not code: a versioned config file carries deadline
//! patterns ("by <month> <day>", "before <date>", ...), event patterns, and
//! per-category keyword lists. Evaluation is case-insensitive over
//! whitespace-normalized text, and event patterns override deadline patterns.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{Category, MarketRecord, Outcome, ResolutionType};

const DEFAULT_RULES_TOML: &str = include_str!("../assets/default_rules.toml");
const TEMPLATE_CORPUS_JSON: &str = include_str!("../assets/template_corpus.json");

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule file parse error: {0}")]
    Parse(String),
    #[error("invalid rule set: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize, Serialize)]
struct RawRules {
    version: String,
    deadline_patterns: Vec<String>,
    event_patterns: Vec<String>,
    category_keywords: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
struct Compiled {
    raw: String,
    regex: Regex,
}

/// Compiled classification rules.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: String,
    deadline: Vec<Compiled>,
    event: Vec<Compiled>,
    categories: Vec<(Category, Vec<Compiled>)>,
}

const MONTHS: &str = "january|february|march|april|may|june|july|august|september|october|november|december";
const WEEKDAYS: &str = "monday|tuesday|wednesday|thursday|friday|saturday|sunday";

fn token_class(token: &str) -> Option<String> {
    match token {
        "<month>" => Some(format!("(?:{MONTHS})")),
        "<weekday>" => Some(format!("(?:{WEEKDAYS})")),
        "<day>" => Some(r"\d{1,2}(?:st|nd|rd|th)?".to_string()),
        "<year>" => Some(r"(?:19|20)\d{2}".to_string()),
        "<date>" => Some(format!(
            r"(?:{MONTHS}|(?:19|20)\d{{2}}|(?:the\s+)?end\s+of)"
        )),
        _ => None,
    }
}

fn compile_pattern(pattern: &str) -> Result<Compiled, RuleError> {
    let parts: Vec<String> = pattern
        .to_lowercase()
        .split_whitespace()
        .map(|tok| token_class(tok).unwrap_or_else(|| regex::escape(tok)))
        .collect();
    if parts.is_empty() {
        return Err(RuleError::Invalid(format!("empty pattern {pattern:?}")));
    }
    let body = parts.join(r"\s+");
    let regex = Regex::new(&format!(r"(?i)\b{body}\b"))
        .map_err(|e| RuleError::Invalid(format!("pattern {pattern:?}: {e}")))?;
    Ok(Compiled {
        raw: pattern.to_string(),
        regex,
    })
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl RuleSet {
    /// The packaged v1 rules.
    pub fn default_rules() -> RuleSet {
        RuleSet::from_toml_str(DEFAULT_RULES_TOML).expect("packaged rules are valid")
    }

    pub fn from_toml_str(s: &str) -> Result<RuleSet, RuleError> {
        let raw: RawRules = toml::from_str(s).map_err(|e| RuleError::Parse(e.to_string()))?;
        if raw.deadline_patterns.is_empty() || raw.event_patterns.is_empty() {
            return Err(RuleError::Invalid("pattern lists must be non-empty".into()));
        }
        for p in &raw.deadline_patterns {
            if raw.event_patterns.contains(p) {
                return Err(RuleError::Invalid(format!(
                    "pattern {p:?} appears in both the deadline and event lists"
                )));
            }
        }
        let deadline = raw
            .deadline_patterns
            .iter()
            .map(|p| compile_pattern(p))
            .collect::<Result<_, _>>()?;
        let event = raw
            .event_patterns
            .iter()
            .map(|p| compile_pattern(p))
            .collect::<Result<_, _>>()?;
        let mut categories = Vec::new();
        for cat in [Category::MilitaryGeopolitics, Category::Regulatory, Category::Corporate] {
            let words = raw
                .category_keywords
                .get(cat.as_str())
                .ok_or_else(|| {
                    RuleError::Invalid(format!("missing category_keywords.{}", cat.as_str()))
                })?
                .iter()
                .map(|p| compile_pattern(p))
                .collect::<Result<_, _>>()?;
            categories.push((cat, words));
        }
        Ok(RuleSet {
            version: raw.version,
            deadline,
            event,
            categories,
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<RuleSet, RuleError> {
        let s = std::fs::read_to_string(path).map_err(|e| RuleError::Parse(e.to_string()))?;
        RuleSet::from_toml_str(&s)
    }

    pub fn deadline_pattern_names(&self) -> Vec<&str> {
        self.deadline.iter().map(|c| c.raw.as_str()).collect()
    }
}

/// Classify how a market resolves from its question and resolution criteria.
///
/// Event patterns override deadline patterns; a question matching neither is
/// conservatively unclassifiable.
pub fn classify_resolution(question: &str, resolution_criteria: &str, rules: &RuleSet) -> ResolutionType {
    let text = normalize(&format!("{question} {resolution_criteria}"));
    if rules.event.iter().any(|p| p.regex.is_match(&text)) {
        return ResolutionType::EventResolved;
    }
    if rules.deadline.iter().any(|p| p.regex.is_match(&text)) {
        return ResolutionType::DeadlineResolved;
    }
    ResolutionType::Unclassifiable
}

/// Keyword vote over the target categories, ties broken by fixed priority
/// (military > regulatory > corporate); no keyword puts the market in `other`.
pub fn classify_category(question: &str, rules: &RuleSet) -> Category {
    let text = normalize(question);
    let mut best = Category::Other;
    let mut best_votes = 0usize;
    for (cat, words) in &rules.categories {
        let votes = words.iter().filter(|w| w.regex.is_match(&text)).count();
        // Strict > keeps the earlier (higher-priority) category on ties.
        if votes > best_votes {
            best_votes = votes;
            best = *cat;
        }
    }
    best
}

/// Counts and YES rates per resolution type.
#[derive(Debug, Clone, Serialize)]
pub struct TypeStats {
    pub n: usize,
    pub share: f64,
    pub yes: usize,
    pub yes_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TypologyReport {
    pub total: usize,
    pub per_type: BTreeMap<ResolutionType, TypeStats>,
    /// Deadline-resolved markets with outcome YES: structurally anomalous
    /// under the classifier (the expected YES rate on this bucket is zero),
    /// surfaced for manual review rather than hidden.
    pub deadline_yes_review: Vec<String>,
}

/// Tally resolved markets per resolution type.
///
/// With `rules` supplied the type is re-derived from the question text;
/// otherwise the manifest's stored `resolution_type` is trusted.
pub fn typology_report(markets: &[MarketRecord], rules: Option<&RuleSet>) -> TypologyReport {
    let total = markets.len();
    let mut per_type: BTreeMap<ResolutionType, (usize, usize)> = BTreeMap::new();
    for ty in ResolutionType::ALL {
        per_type.insert(ty, (0, 0));
    }
    let mut review = Vec::new();
    for m in markets {
        let ty = match rules {
            Some(r) => classify_resolution(&m.question, "", r),
            None => m.resolution_type,
        };
        let slot = per_type.get_mut(&ty).unwrap();
        slot.0 += 1;
        if m.outcome == Outcome::Yes {
            slot.1 += 1;
            if ty == ResolutionType::DeadlineResolved {
                review.push(m.market_id.clone());
            }
        }
    }
    let per_type = per_type
        .into_iter()
        .map(|(ty, (n, yes))| {
            (
                ty,
                TypeStats {
                    n,
                    share: if total > 0 { n as f64 / total as f64 } else { 0.0 },
                    yes,
                    yes_rate: if n > 0 { yes as f64 / n as f64 } else { 0.0 },
                },
            )
        })
        .collect();
    TypologyReport {
        total,
        per_type,
        deadline_yes_review: review,
    }
}

/// A canonical question template with its expected classification.
#[derive(Debug, Clone, Deserialize)]
pub struct TemplateCase {
    pub question: String,
    pub resolution_criteria: String,
    pub resolution_type: ResolutionType,
    pub category: Category,
}

/// The packaged template corpus the default rules are calibrated against.
pub fn template_corpus() -> Vec<TemplateCase> {
    serde_json::from_str(TEMPLATE_CORPUS_JSON).expect("packaged corpus is valid")
}
