//! Deterministic PII detection (regex + gazetteer) and leakage percentage.
//!
//! EMAIL/URL/PHONE/ORDER_NUMBER come from regexes; PERSON/ORG are exact
//! matches against the gazetteer built from the corpus PII ledger. Spans are
//! resolved left-to-right, longest match first, never overlapping.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{ParallelUnit, PiiLedger};
use crate::{Error, Result};

/// Closed set of PII categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PiiCategory {
    #[serde(rename = "PERSON")]
    Person,
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "EMAIL")]
    Email,
    #[serde(rename = "URL")]
    Url,
    #[serde(rename = "PHONE")]
    Phone,
    #[serde(rename = "ORDER_NUMBER")]
    OrderNumber,
}

impl std::fmt::Display for PiiCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PiiCategory::Person => "PERSON",
            PiiCategory::Org => "ORG",
            PiiCategory::Email => "EMAIL",
            PiiCategory::Url => "URL",
            PiiCategory::Phone => "PHONE",
            PiiCategory::OrderNumber => "ORDER_NUMBER",
        };
        f.write_str(s)
    }
}

/// One detected PII occurrence inside a target-language text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiSpan {
    pub category: PiiCategory,
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

/// Known PERSON and ORG surface forms, typically from the corpus ledger.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Gazetteer {
    pub persons: Vec<String>,
    pub orgs: Vec<String>,
}

impl Gazetteer {
    pub fn from_ledger(ledger: &PiiLedger) -> Gazetteer {
        let mut persons = Vec::new();
        let mut orgs = Vec::new();
        for entry in &ledger.entries {
            let bucket = match entry.category {
                PiiCategory::Person => &mut persons,
                PiiCategory::Org => &mut orgs,
                _ => continue,
            };
            if !bucket.contains(&entry.value) {
                bucket.push(entry.value.clone());
            }
        }
        Gazetteer { persons, orgs }
    }
}

fn email_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"[A-Za-z0-9][A-Za-z0-9._%+-]*@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").unwrap()
    })
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:https?://|www\.)[A-Za-z0-9._~%+#?&=/-]+").unwrap())
}

fn phone_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\+[0-9]{1,3}[ -][0-9]{1,4}(?:[ -][0-9]{2,9}){1,4}").unwrap())
}

fn order_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // at least three digits, optionally continued by digits and an
    // ellipsis-like dotted tail ("160…..")
    RE.get_or_init(|| Regex::new(r"\b[0-9]{3,}(?:[.…]{2,})?").unwrap())
}

fn find_exact(text: &str, needle: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    if needle.is_empty() {
        return spans;
    }
    let mut from = 0;
    while let Some(pos) = text[from..].find(needle) {
        let start = from + pos;
        spans.push((start, start + needle.len()));
        from = start + needle.len();
    }
    spans
}

/// Detect PII spans in `text`. Deterministic; spans never overlap; at equal
/// start the longer match wins, ties broken by category order.
pub fn detect(text: &str, gazetteer: &Gazetteer) -> Vec<PiiSpan> {
    let mut candidates: Vec<PiiSpan> = Vec::new();

    for (list, category) in [
        (&gazetteer.persons, PiiCategory::Person),
        (&gazetteer.orgs, PiiCategory::Org),
    ] {
        for value in list {
            for (start, end) in find_exact(text, value) {
                candidates.push(PiiSpan {
                    category,
                    surface: text[start..end].to_string(),
                    start,
                    end,
                });
            }
        }
    }

    for (re, category, trim_dot) in [
        (email_re(), PiiCategory::Email, true),
        (url_re(), PiiCategory::Url, true),
        (phone_re(), PiiCategory::Phone, false),
        (order_re(), PiiCategory::OrderNumber, false),
    ] {
        for m in re.find_iter(text) {
            let (start, mut end) = (m.start(), m.end());
            if trim_dot {
                // a single trailing dot is sentence punctuation
                while end > start + 1 && text.as_bytes()[end - 1] == b'.' {
                    end -= 1;
                }
            }
            candidates.push(PiiSpan {
                category,
                surface: text[start..end].to_string(),
                start,
                end,
            });
        }
    }

    candidates.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(b.end.cmp(&a.end))
            .then(a.category.cmp(&b.category))
    });

    let mut spans: Vec<PiiSpan> = Vec::new();
    let mut last_end = 0;
    for cand in candidates {
        if cand.start >= last_end {
            last_end = cand.end;
            spans.push(cand);
        }
    }
    spans
}

/// PII leakage of an attack: detected spans among true positives over all
/// spans in the sampled member set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    /// Spans found in target texts of true-positive units.
    pub detected_pii_count: usize,
    /// Spans found in target texts of all sampled member units.
    pub total_pii_count: usize,
    /// detected/total; `None` when the sampled set holds no PII.
    pub leakage_fraction: Option<f64>,
    /// Unit-level companion counts: units containing at least one span.
    pub detected_unit_count: usize,
    pub total_unit_count: usize,
}

/// Count PII spans on the target side only; numerator over true-positive
/// units, denominator over the whole sampled member set.
pub fn leakage_percentage(
    true_positive_units: &[ParallelUnit],
    sampled_member_units: &[ParallelUnit],
    gazetteer: &Gazetteer,
) -> Result<LeakageReport> {
    let sampled_ids: std::collections::HashSet<&str> = sampled_member_units
        .iter()
        .map(|u| u.unit_id.as_str())
        .collect();
    for unit in true_positive_units {
        if !sampled_ids.contains(unit.unit_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "true positive {} is not in the sampled member set",
                unit.unit_id
            )));
        }
    }

    let mut detected = 0;
    let mut detected_units = 0;
    for unit in true_positive_units {
        let n = detect(&unit.tgt, gazetteer).len();
        detected += n;
        if n > 0 {
            detected_units += 1;
        }
    }
    let mut total = 0;
    let mut total_units = 0;
    for unit in sampled_member_units {
        let n = detect(&unit.tgt, gazetteer).len();
        total += n;
        if n > 0 {
            total_units += 1;
        }
    }

    Ok(LeakageReport {
        detected_pii_count: detected,
        total_pii_count: total,
        leakage_fraction: (total > 0).then(|| detected as f64 / total as f64),
        detected_unit_count: detected_units,
        total_unit_count: total_units,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// Pass iff leakage is strictly below 50%.
pub fn privacy_verdict(report: &LeakageReport) -> Result<Verdict> {
    match report.leakage_fraction {
        None => Err(Error::UndefinedLeakage),
        Some(f) if f < 0.5 => Ok(Verdict::Pass),
        Some(_) => Ok(Verdict::Fail),
    }
}
