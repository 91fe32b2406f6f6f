//! On-disk model format: a single JSON document with matrices as
//! row-major nested arrays.
//!
//! Floats round-trip through shortest-representation formatting, so a
//! save/load cycle reproduces the parameters bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::numkit::Matrix;

use super::{DecoderParams, EncoderParams, Hyperparams, ModelError, Seq2SeqModel};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct VocabDoc {
    index_to_word: Vec<String>,
    counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct EncoderDoc {
    embedding: Vec<Vec<f64>>,
    w_hx: Vec<Vec<f64>>,
    w_hh: Vec<Vec<f64>>,
    b_h: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DecoderDoc {
    embedding: Vec<Vec<f64>>,
    w_hx: Vec<Vec<f64>>,
    w_hh: Vec<Vec<f64>>,
    b_h: Vec<Vec<f64>>,
    w_q: Vec<Vec<f64>>,
    w_k: Vec<Vec<f64>>,
    v_a: Vec<Vec<f64>>,
    w_c: Vec<Vec<f64>>,
    w_yt: Vec<Vec<f64>>,
    b_y: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u64,
    hyper: Hyperparams,
    src_vocab: VocabDoc,
    tgt_vocab: VocabDoc,
    encoder: EncoderDoc,
    decoder: DecoderDoc,
}

fn corrupt(reason: impl Into<String>) -> ModelError {
    ModelError::Corrupt {
        reason: reason.into(),
    }
}

/// Serializes the model to `path` as JSON. Identical models produce
/// byte-identical files.
pub fn save_model(model: &Seq2SeqModel, path: &Path) -> Result<(), ModelError> {
    let nested = |id| model.params.value(id).to_nested();
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        hyper: model.hyper.clone(),
        src_vocab: VocabDoc {
            index_to_word: model.src_vocab.index_to_word().to_vec(),
            counts: model.src_vocab.counts().clone(),
        },
        tgt_vocab: VocabDoc {
            index_to_word: model.tgt_vocab.index_to_word().to_vec(),
            counts: model.tgt_vocab.counts().clone(),
        },
        encoder: EncoderDoc {
            embedding: nested(model.encoder.embedding),
            w_hx: nested(model.encoder.w_hx),
            w_hh: nested(model.encoder.w_hh),
            b_h: nested(model.encoder.b_h),
        },
        decoder: DecoderDoc {
            embedding: nested(model.decoder.embedding),
            w_hx: nested(model.decoder.w_hx),
            w_hh: nested(model.decoder.w_hh),
            b_h: nested(model.decoder.b_h),
            w_q: nested(model.decoder.w_q),
            w_k: nested(model.decoder.w_k),
            v_a: nested(model.decoder.v_a),
            w_c: nested(model.decoder.w_c),
            w_yt: nested(model.decoder.w_yt),
            b_y: nested(model.decoder.b_y),
        },
    };
    let json = serde_json::to_string(&doc).map_err(|e| corrupt(e.to_string()))?;
    fs::write(path, json).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn matrix_from(name: &str, nested: Vec<Vec<f64>>, rows: usize, cols: usize) -> Result<Matrix, ModelError> {
    let m = Matrix::from_rows(&nested).map_err(|e| corrupt(format!("{name}: {e}")))?;
    if m.rows() != rows || m.cols() != cols {
        return Err(corrupt(format!(
            "{name}: expected {rows}x{cols}, found {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(corrupt(format!("{name}: non-finite entry")));
    }
    Ok(m)
}

/// Loads a model saved by [`save_model`], validating the format
/// version, every matrix shape and the vocabulary structure.
pub fn load_model(path: &Path) -> Result<Seq2SeqModel, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    // Gate on the version before insisting on the full schema.
    let probe: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    match probe.get("format_version").and_then(|v| v.as_u64()) {
        Some(FORMAT_VERSION) => {}
        Some(found) => return Err(ModelError::VersionMismatch { found }),
        None => return Err(corrupt("missing format_version")),
    }

    let doc: ModelDoc = serde_json::from_value(probe).map_err(|e| corrupt(e.to_string()))?;
    let hyper = doc.hyper;
    if hyper.hidden_size == 0 || hyper.max_length == 0 {
        return Err(corrupt("hidden_size and max_length must be positive"));
    }

    let src_vocab = Vocabulary::from_parts(doc.src_vocab.index_to_word, doc.src_vocab.counts)
        .ok_or_else(|| corrupt("invalid source vocabulary"))?;
    let tgt_vocab = Vocabulary::from_parts(doc.tgt_vocab.index_to_word, doc.tgt_vocab.counts)
        .ok_or_else(|| corrupt("invalid target vocabulary"))?;

    let (h, e) = (hyper.hidden_size, hyper.embedding_size);
    let (sv, tv) = (src_vocab.n_words(), tgt_vocab.n_words());

    let mut params = crate::numkit::ParamSet::new();
    let enc = doc.encoder;
    let encoder = EncoderParams {
        embedding: params.add(
            "encoder.embedding",
            matrix_from("encoder.embedding", enc.embedding, sv, e)?,
        ),
        w_hx: params.add("encoder.w_hx", matrix_from("encoder.w_hx", enc.w_hx, h, e)?),
        w_hh: params.add("encoder.w_hh", matrix_from("encoder.w_hh", enc.w_hh, h, h)?),
        b_h: params.add("encoder.b_h", matrix_from("encoder.b_h", enc.b_h, 1, h)?),
    };
    let dec = doc.decoder;
    let decoder = DecoderParams {
        embedding: params.add(
            "decoder.embedding",
            matrix_from("decoder.embedding", dec.embedding, tv, e)?,
        ),
        w_hx: params.add("decoder.w_hx", matrix_from("decoder.w_hx", dec.w_hx, h, e)?),
        w_hh: params.add("decoder.w_hh", matrix_from("decoder.w_hh", dec.w_hh, h, h)?),
        b_h: params.add("decoder.b_h", matrix_from("decoder.b_h", dec.b_h, 1, h)?),
        w_q: params.add("decoder.w_q", matrix_from("decoder.w_q", dec.w_q, h, h)?),
        w_k: params.add("decoder.w_k", matrix_from("decoder.w_k", dec.w_k, h, h)?),
        v_a: params.add("decoder.v_a", matrix_from("decoder.v_a", dec.v_a, 1, h)?),
        w_c: params.add("decoder.w_c", matrix_from("decoder.w_c", dec.w_c, e, e + h)?),
        w_yt: params.add("decoder.w_yt", matrix_from("decoder.w_yt", dec.w_yt, tv, h)?),
        b_y: params.add("decoder.b_y", matrix_from("decoder.b_y", dec.b_y, 1, tv)?),
    };

    Ok(Seq2SeqModel {
        hyper,
        params,
        encoder,
        decoder,
        src_vocab,
        tgt_vocab,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, SentencePair, Side};
    use crate::seq2seq::init_model;

    fn toy_model(seed: u64) -> Seq2SeqModel {
        let pairs = vec![SentencePair {
            source: vec!["go".into(), ".".into()],
            target: vec!["va".into(), "!".into()],
            line_no: 1,
        }];
        let src = build_vocabulary(&pairs, Side::Source).unwrap();
        let tgt = build_vocabulary(&pairs, Side::Target).unwrap();
        let mut hyper = Hyperparams::with_hidden(6);
        hyper.seed = seed;
        init_model(hyper, src, tgt)
    }

    #[test]
    fn save_load_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = toy_model(99);
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        assert_eq!(loaded.hyper, model.hyper);
        assert_eq!(loaded.src_vocab, model.src_vocab);
        assert_eq!(loaded.tgt_vocab, model.tgt_vocab);
        for (a, b) in model.params.ids().zip(loaded.params.ids()) {
            let (ma, mb) = (model.params.value(a), loaded.params.value(b));
            assert!(ma
                .data()
                .iter()
                .zip(mb.data())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let model = toy_model(5);
        save_model(&model, &p1).unwrap();
        save_model(&model, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn future_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = toy_model(1);
        save_model(&model, &path).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":999");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ModelError::VersionMismatch { found: 999 })
        ));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = toy_model(2);
        save_model(&model, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(ModelError::Corrupt { .. })));
    }

    #[test]
    fn wrong_shape_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = toy_model(3);
        save_model(&model, &path).unwrap();
        let mut doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["encoder"]["w_hh"] = serde_json::json!([[1.0, 2.0]]);
        fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        assert!(matches!(load_model(&path), Err(ModelError::Corrupt { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_model(Path::new("/no/such/model.json")),
            Err(ModelError::Io { .. })
        ));
    }
}
