//! Teacher-forced stochastic-gradient training loop.

use std::time::Instant;

use thiserror::Error;

use crate::corpus::{encode_sentence, SentencePair, SOS_ID};
use crate::numkit::{NumError, SplitMix64, Tape};

use super::{decoder_step, encode_sequence, ModelError, Seq2SeqModel};

/// Salt xored into the seed so the training stream never replays the
/// initialization stream.
const TRAIN_STREAM_SALT: u64 = 0x747261696E5F7331;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("cannot train on an empty pair list")]
    EmptyCorpus,
    #[error("pair at line {line_no} has {len} tokens, over the maximum of {max}")]
    OverLength {
        line_no: usize,
        len: usize,
        max: usize,
    },
    #[error("training diverged: loss became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Progress snapshot emitted every checkpoint interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: usize,
    pub total_iterations: usize,
    /// Mean loss over the iterations since the previous checkpoint.
    pub average_loss: f64,
    pub elapsed_secs: f64,
    pub percent_complete: u8,
}

/// Checkpoint history for one training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub checkpoints: Vec<Checkpoint>,
}

impl TrainReport {
    pub fn first_average_loss(&self) -> Option<f64> {
        self.checkpoints.first().map(|c| c.average_loss)
    }

    pub fn final_average_loss(&self) -> Option<f64> {
        self.checkpoints.last().map(|c| c.average_loss)
    }
}

/// Trains the model in place for `model.hyper.iterations` steps,
/// sampling one pair uniformly per step.
///
/// Decoding starts from SOS with the encoder's final hidden state. The
/// loss is the mean NLL over all target positions, EOS included. Per
/// step, a seeded coin decides whether the next decoder input is the
/// gold token (teacher forcing) or the model's own argmax. Identical
/// seeds and corpora give bit-identical final parameters.
pub fn train(model: &mut Seq2SeqModel, pairs: &[SentencePair]) -> Result<TrainReport, TrainError> {
    train_with_observer(model, pairs, |_| {})
}

/// [`train`] with a checkpoint callback, used by the CLI to stream
/// progress lines while keeping the report identical.
pub fn train_with_observer(
    model: &mut Seq2SeqModel,
    pairs: &[SentencePair],
    mut on_checkpoint: impl FnMut(&Checkpoint),
) -> Result<TrainReport, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let max = model.hyper.max_length;
    for pair in pairs {
        let len = pair.source.len().max(pair.target.len());
        if len > max {
            return Err(TrainError::OverLength {
                line_no: pair.line_no,
                len,
                max,
            });
        }
    }

    let iterations = model.hyper.iterations;
    let mut report = TrainReport::default();
    if iterations == 0 {
        return Ok(report);
    }
    let checkpoint_interval = (iterations / 20).max(1);
    let mut rng = SplitMix64::new(model.hyper.seed ^ TRAIN_STREAM_SALT);
    let started = Instant::now();
    let mut window_loss = 0.0;
    let mut window_count = 0usize;

    for iteration in 1..=iterations {
        let pair = &pairs[rng.next_index(pairs.len())];
        let source_ids = encode_sentence(&model.src_vocab, &pair.source);
        let target_ids = encode_sentence(&model.tgt_vocab, &pair.target);

        let (loss_value, ledger) = {
            let mut tape = Tape::new(&model.params);
            let (enc_outputs, enc_final) = encode_sequence(&mut tape, model, &source_ids)?;

            let mut hidden = enc_final;
            let mut input_id = SOS_ID;
            let mut total_loss = None;
            for (t, &gold) in target_ids.iter().enumerate() {
                let step = decoder_step(&mut tape, model, input_id, hidden, &enc_outputs)?;
                let step_loss = tape.nll_loss(step.probabilities, gold)?;
                total_loss = Some(match total_loss {
                    None => step_loss,
                    Some(acc) => tape.add(acc, step_loss)?,
                });
                hidden = step.hidden;
                if t + 1 < target_ids.len() {
                    let force = rng.next_f64() < model.hyper.teacher_forcing_ratio;
                    input_id = if force {
                        gold
                    } else {
                        tape.argmax(step.probabilities)
                    };
                }
            }
            let total = total_loss.expect("target always contains at least EOS");
            let mean = tape.mul_const(total, 1.0 / target_ids.len() as f64)?;
            (tape.scalar(mean), tape.backward(mean)?)
        };

        if !loss_value.is_finite() {
            return Err(TrainError::Divergence { iteration });
        }
        model
            .params
            .sgd_step(&ledger, model.hyper.learning_rate)?;

        window_loss += loss_value;
        window_count += 1;
        if iteration % checkpoint_interval == 0 || iteration == iterations {
            let checkpoint = Checkpoint {
                iteration,
                total_iterations: iterations,
                average_loss: window_loss / window_count as f64,
                elapsed_secs: started.elapsed().as_secs_f64(),
                percent_complete: (iteration * 100 / iterations) as u8,
            };
            on_checkpoint(&checkpoint);
            report.checkpoints.push(checkpoint);
            window_loss = 0.0;
            window_count = 0;
        }
    }
    Ok(report)
}
