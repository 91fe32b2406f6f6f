//! Greedy decoding and attention-weight export.

use std::fs;
use std::path::Path;

use crate::corpus::{encode_sentence, normalize_text, EOS_ID, SOS_ID};
use crate::numkit::{Matrix, Tape};

use super::{decoder_step, encode_sequence, ModelError, Seq2SeqModel};

/// Target-by-source grid of attention weights collected during one
/// translation. Row `t` is the distribution the decoder placed over the
/// source positions (EOS column included) while emitting target token
/// `t`; every row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    pub target_tokens: Vec<String>,
    pub source_tokens: Vec<String>,
    pub weights: Matrix,
}

/// Attention export encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionFormat {
    Csv,
    Pgm,
}

impl std::str::FromStr for AttentionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "pgm" => Ok(Self::Pgm),
            other => Err(format!("unknown attention format `{other}` (csv|pgm)")),
        }
    }
}

/// Translates a raw sentence with greedy per-step argmax decoding,
/// ties broken toward the lowest index.
///
/// The sentence is normalized and encoded against the source
/// vocabulary (unknown words become UNK). Decoding starts from SOS
/// with the encoder's final hidden state and stops at EOS or after
/// `max_out` emitted tokens, whichever comes first. The returned
/// attention matrix has one row per emitted token and one column per
/// source position including the EOS column.
pub fn translate(
    model: &Seq2SeqModel,
    sentence: &str,
    max_out: usize,
) -> Result<(Vec<String>, AttentionMatrix), ModelError> {
    let normalized = normalize_text(sentence);
    let tokens: Vec<String> = normalized.split_whitespace().map(str::to_string).collect();
    if tokens.len() > model.hyper.max_length {
        return Err(ModelError::OverLength {
            len: tokens.len(),
            max: model.hyper.max_length,
        });
    }
    let source_ids = encode_sentence(&model.src_vocab, &tokens);

    let mut tape = Tape::new(&model.params);
    let (enc_outputs, enc_final) = encode_sequence(&mut tape, model, &source_ids)?;

    let mut hidden = enc_final;
    let mut input_id = SOS_ID;
    let mut emitted = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for _ in 0..max_out {
        let step = decoder_step(&mut tape, model, input_id, hidden, &enc_outputs)?;
        let next = tape.argmax(step.probabilities);
        if next == EOS_ID {
            break;
        }
        emitted.push(
            model
                .tgt_vocab
                .word(next)
                .expect("argmax is within vocabulary")
                .to_string(),
        );
        rows.push(tape.value(step.attention).to_vec());
        hidden = step.hidden;
        input_id = next;
    }

    let source_tokens: Vec<String> = source_ids
        .iter()
        .map(|&id| {
            model
                .src_vocab
                .word(id)
                .expect("encoded ids are in range")
                .to_string()
        })
        .collect();
    let weights = if rows.is_empty() {
        Matrix::zeros(0, source_tokens.len())
    } else {
        Matrix::from_rows(&rows)?
    };
    Ok((
        emitted.clone(),
        AttentionMatrix {
            target_tokens: emitted,
            source_tokens,
            weights,
        },
    ))
}

/// Writes an attention matrix as CSV (header row of source tokens,
/// first column of target tokens, weights at six decimal places) or as
/// a plain P2 PGM where weight 0.0 renders black and 1.0 white.
pub fn export_attention(
    matrix: &AttentionMatrix,
    path: &Path,
    format: AttentionFormat,
) -> Result<(), ModelError> {
    let body = match format {
        AttentionFormat::Csv => render_csv(matrix),
        AttentionFormat::Pgm => render_pgm(matrix),
    };
    fs::write(path, body).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn render_csv(matrix: &AttentionMatrix) -> String {
    let mut out = String::new();
    out.push_str(&format!(",{}\n", matrix.source_tokens.join(",")));
    for (t, target) in matrix.target_tokens.iter().enumerate() {
        out.push_str(target);
        for s in 0..matrix.source_tokens.len() {
            out.push_str(&format!(",{:.6}", matrix.weights.get(t, s)));
        }
        out.push('\n');
    }
    out
}

fn render_pgm(matrix: &AttentionMatrix) -> String {
    let width = matrix.source_tokens.len();
    let height = matrix.target_tokens.len();
    let mut out = format!("P2\n{width} {height}\n255\n");
    for t in 0..height {
        let row: Vec<String> = (0..width)
            .map(|s| format!("{}", (matrix.weights.get(t, s) * 255.0).round() as u8))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
