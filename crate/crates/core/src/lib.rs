//! Attention-based sequence-to-sequence machine translation, built from
//! first principles.
//!
//! The crate is organized around four subsystems:
//!
//! - [`corpus`]: parallel-text ingestion, normalization and vocabulary
//!   indexing,
//! - [`numkit`]: a small dense linear-algebra kernel with reverse-mode
//!   gradient accumulation,
//! - [`seq2seq`]: the encoder–decoder recurrent network with additive
//!   attention, its trainer, greedy decoder and on-disk format,
//! - [`bleu`]: corpus-level BLEU-1..4 with modified n-gram precision and
//!   brevity penalty.

pub mod bleu;
pub mod corpus;
pub mod numkit;
pub mod seq2seq;
