//! Corpus-level BLEU-1..4 with modified n-gram precision and brevity
//! penalty.
//!
//! Counting is corpus-level: clipped match counts and candidate n-gram
//! totals are summed over all sentences before dividing. One reference
//! per hypothesis; no smoothing, so a zero precision zeroes the score.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BleuError {
    #[error("hypothesis/reference length mismatch: {hypotheses} vs {references}")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
}

/// Clipped-match numerator and candidate-count denominator for one
/// n-gram order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionCounts {
    pub matches: u64,
    pub total: u64,
}

impl PrecisionCounts {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matches as f64 / self.total as f64
        }
    }
}

/// Corpus-level BLEU report for orders 1 through `max_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// Per-order clipped precision counts, index 0 holding order 1.
    pub precisions: Vec<PrecisionCounts>,
    pub brevity_penalty: f64,
    /// Cumulative BLEU-n scores, index 0 holding BLEU-1.
    pub bleu: Vec<f64>,
    /// Total candidate tokens.
    pub candidate_length: u64,
    /// Total reference tokens.
    pub reference_length: u64,
}

impl BleuReport {
    pub fn max_n(&self) -> usize {
        self.bleu.len()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for i in 0..=tokens.len() - n {
        *counts.entry(&tokens[i..i + n]).or_insert(0) += 1;
    }
    counts
}

/// Sums clipped n-gram matches and candidate n-gram totals over a
/// parallel corpus. Each candidate n-gram's count is clipped to its
/// count in the corresponding reference.
pub fn modified_precision(
    hypotheses: &[Vec<String>],
    references: &[Vec<String>],
    n: usize,
) -> Result<PrecisionCounts, BleuError> {
    if n == 0 {
        return Err(BleuError::ZeroOrder);
    }
    if hypotheses.len() != references.len() {
        return Err(BleuError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut matches = 0;
    let mut total = 0;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp_counts = ngram_counts(hyp, n);
        let ref_counts = ngram_counts(reference, n);
        for (gram, &count) in &hyp_counts {
            let clip = ref_counts.get(gram).copied().unwrap_or(0);
            matches += count.min(clip);
            total += count;
        }
    }
    Ok(PrecisionCounts { matches, total })
}

/// `1` when the candidate corpus is at least as long as the reference,
/// `exp(1 - r/c)` otherwise; `0` for an empty candidate corpus.
pub fn brevity_penalty(candidate_len: u64, reference_len: u64) -> f64 {
    if candidate_len == 0 {
        return 0.0;
    }
    if candidate_len >= reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

/// Scores a hypothesis corpus against a single-reference corpus for
/// orders 1 through `max_n`.
///
/// `bleu_n = BP * exp((1/n) * sum_{k<=n} ln p_k)`, defined as 0 when
/// any `p_k` for `k <= n` is zero or has an empty denominator.
pub fn bleu(
    hypotheses: &[Vec<String>],
    references: &[Vec<String>],
    max_n: usize,
) -> Result<BleuReport, BleuError> {
    if max_n == 0 {
        return Err(BleuError::ZeroOrder);
    }
    let mut precisions = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        precisions.push(modified_precision(hypotheses, references, n)?);
    }
    let candidate_length: u64 = hypotheses.iter().map(|h| h.len() as u64).sum();
    let reference_length: u64 = references.iter().map(|r| r.len() as u64).sum();
    let bp = brevity_penalty(candidate_length, reference_length);

    let mut bleu_scores = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    let mut degenerate = false;
    for counts in &precisions {
        if counts.total == 0 || counts.matches == 0 {
            degenerate = true;
        } else {
            log_sum += counts.value().ln();
        }
        let n = bleu_scores.len() as f64 + 1.0;
        bleu_scores.push(if degenerate {
            0.0
        } else {
            bp * (log_sum / n).exp()
        });
    }

    Ok(BleuReport {
        precisions,
        brevity_penalty: bp,
        bleu: bleu_scores,
        candidate_length,
        reference_length,
    })
}
