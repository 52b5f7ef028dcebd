//! Utility metrics: corpus BLEU and baseline rescaling of similarity scores.

use std::collections::HashMap;

use crate::text::tokenize;
use crate::{Error, Result};

/// Corpus-level BLEU-4 with its components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuReport {
    /// BLEU in [0, 1].
    pub bleu: f64,
    /// Modified n-gram precisions p1..p4.
    pub precisions: [f64; 4],
    /// Brevity penalty in (0, 1].
    pub brevity_penalty: f64,
}

/// Smoothing for the tiny corpora this crate trains on; plain BLEU-4
/// collapses to zero whenever any 4-gram count is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    #[default]
    None,
    /// Add one to every clipped count and total.
    AddOne,
}

const MAX_ORDER: usize = 4;

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4 without smoothing: clipped n-gram counts pooled over the
/// corpus, geometric mean of p1..p4, brevity penalty exp(1 − r/c) when the
/// hypothesis corpus is shorter than the reference corpus.
pub fn corpus_bleu<H, R>(hypotheses: &[H], references: &[R]) -> Result<BleuReport>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    corpus_bleu_with(hypotheses, references, Smoothing::None)
}

pub fn corpus_bleu_with<H, R>(
    hypotheses: &[H],
    references: &[R],
    smoothing: Smoothing,
) -> Result<BleuReport>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.is_empty() {
        return Err(Error::Empty("hypothesis corpus".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidInput(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }

    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    let mut clipped = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];

    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp_tokens = tokenize(hyp.as_ref());
        let ref_tokens = tokenize(reference.as_ref());
        hyp_len += hyp_tokens.len() as u64;
        ref_len += ref_tokens.len() as u64;
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngram_counts(&hyp_tokens, n);
            let ref_counts = ngram_counts(&ref_tokens, n);
            for (gram, count) in &hyp_counts {
                totals[n - 1] += count;
                let allowed = ref_counts.get(gram).copied().unwrap_or(0);
                clipped[n - 1] += (*count).min(allowed);
            }
        }
    }

    let mut precisions = [0.0f64; MAX_ORDER];
    for n in 0..MAX_ORDER {
        precisions[n] = match smoothing {
            Smoothing::None => {
                if totals[n] == 0 {
                    // no n-grams of this order exist in the hypothesis
                    // corpus: nothing to get wrong, neutral in the mean
                    1.0
                } else {
                    clipped[n] as f64 / totals[n] as f64
                }
            }
            Smoothing::AddOne => (clipped[n] + 1) as f64 / (totals[n] + 1) as f64,
        };
    }

    let brevity_penalty = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp() // hyp_len = 0 gives exp(-inf) = 0
    } else {
        1.0
    };

    let bleu = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        brevity_penalty * mean_log.exp()
    };

    Ok(BleuReport {
        bleu,
        precisions,
        brevity_penalty,
    })
}

/// Empirical lower bound used to rescale a similarity score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleBaseline {
    pub b: f64,
}

impl RescaleBaseline {
    pub fn new(b: f64) -> Result<Self> {
        if !(b < 1.0) {
            return Err(Error::Domain(format!("baseline must be < 1, got {b}")));
        }
        Ok(RescaleBaseline { b })
    }
}

/// Linear rescale of a raw score by its empirical floor:
/// max(0, (f − b)/(1 − b)).
pub fn rescale_score(f: f64, baseline: &RescaleBaseline) -> f64 {
    ((f - baseline.b) / (1.0 - baseline.b)).max(0.0)
}

/// Baseline estimate: the mean of scores computed on randomly paired texts.
pub fn estimate_baseline(random_pair_scores: &[f64]) -> Result<RescaleBaseline> {
    if random_pair_scores.is_empty() {
        return Err(Error::Empty("baseline score list".into()));
    }
    let b = random_pair_scores.iter().sum::<f64>() / random_pair_scores.len() as f64;
    RescaleBaseline::new(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_corpus_scores_one() {
        let texts = vec!["the cat sat on the mat", "guten morgen , wie geht es ?"];
        let r = corpus_bleu(&texts, &texts).unwrap();
        assert_eq!(r.bleu, 1.0);
        assert_eq!(r.brevity_penalty, 1.0);
        assert_eq!(r.precisions, [1.0; 4]);
    }

    #[test]
    fn zero_fourgram_overlap_scores_zero_unsmoothed() {
        let hyp = vec!["a b c d e"];
        let reference = vec!["a x b y c z d e q"]; // shares unigrams, no shared 4-gram
        let r = corpus_bleu(&hyp, &reference).unwrap();
        assert_eq!(r.bleu, 0.0);
        assert_eq!(r.precisions[3], 0.0);
    }

    #[test]
    fn hand_computed_single_pair() {
        // hyp "the cat sat" vs ref "the cat sat down":
        // p1 = 3/3, p2 = 2/2, p3 = 1/1, p4 has no hypothesis 4-grams,
        // bp = exp(1 - 4/3); frozen from a hand derivation.
        let r = corpus_bleu(&["the cat sat"], &["the cat sat down"]).unwrap();
        let expected_bp = (1.0f64 - 4.0 / 3.0).exp();
        assert!((r.brevity_penalty - expected_bp).abs() < 1e-15);
        assert_eq!(r.precisions, [1.0, 1.0, 1.0, 1.0]);
        let expected_bleu = 0.7165313105737893;
        assert!((r.bleu - expected_bleu).abs() < 1e-12);
    }

    #[test]
    fn clipping_limits_repeated_ngrams() {
        // "the the the" against "the cat": only one "the" is creditable.
        let r = corpus_bleu(&["the the the"], &["the cat"]).unwrap();
        assert!((r.precisions[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn smoothing_keeps_score_positive() {
        let r = corpus_bleu_with(&["a b c d e"], &["a x b y c z d e q"], Smoothing::AddOne).unwrap();
        assert!(r.bleu > 0.0);
    }

    #[test]
    fn corpus_order_permutation_invariant() {
        let hyps = ["one two three", "four five", "six seven eight nine"];
        let refs = ["one two three x", "four four five", "six seven nine"];
        let a = corpus_bleu(&hyps, &refs).unwrap();
        let hyps_r: Vec<&str> = hyps.iter().rev().copied().collect();
        let refs_r: Vec<&str> = refs.iter().rev().copied().collect();
        let b = corpus_bleu(&hyps_r, &refs_r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus_and_length_mismatch_are_errors() {
        assert!(corpus_bleu::<&str, &str>(&[], &[]).is_err());
        assert!(corpus_bleu(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn rescale_endpoints() {
        for b in [0.0, 0.5, 0.85] {
            let baseline = RescaleBaseline::new(b).unwrap();
            assert_eq!(rescale_score(b, &baseline), 0.0);
            assert_eq!(rescale_score(1.0, &baseline), 1.0);
            assert_eq!(rescale_score(b - 0.1, &baseline), 0.0);
        }
    }

    #[test]
    fn rescale_direct_evaluation() {
        let baseline = RescaleBaseline::new(0.85).unwrap();
        let v = rescale_score(0.9, &baseline);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_is_order_preserving_above_baseline() {
        let baseline = RescaleBaseline::new(0.4).unwrap();
        let mut prev = -1.0;
        for i in 0..50 {
            let f = 0.4 + 0.012 * f64::from(i);
            let v = rescale_score(f, &baseline);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn baseline_is_mean_of_scores() {
        assert!((estimate_baseline(&[0.8, 0.9]).unwrap().b - 0.85).abs() < 1e-15);
        assert_eq!(estimate_baseline(&[0.42]).unwrap().b, 0.42);
        assert!((estimate_baseline(&[0.3, 0.3, 0.3]).unwrap().b - 0.3).abs() < 1e-15);
        assert!(estimate_baseline(&[]).is_err());
        assert!(RescaleBaseline::new(1.0).is_err());
    }
}
