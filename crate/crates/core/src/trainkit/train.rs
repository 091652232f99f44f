//! The end-to-end training loop: length-sorted batches, per-utterance
//! gradients on independent tapes (merged in manifest order, so results are
//! identical at any thread count), global-norm clipping, Nesterov updates
//! under the staged warmup/decay schedule, per-epoch greedy-decode dev
//! scoring, and best-checkpoint selection.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::ctc::{error_rate, grad_log_probs_to_logits, greedy_decode, PosteriorGrid};
use crate::error::TrainError;
use crate::featio::FeaturePipeline;
use crate::labels::Tokenizer;
use crate::numkit::{clip_global_norm, Matrix, Rng, Tape};
use crate::san::{save_checkpoint, Checkpoint, ForwardOptions, SanCtcModel};

use super::batching::{make_batches, CorpusItem, FilterStats};
use super::config::TrainConfig;
use super::optimizer::{nesterov_step, zero_velocity};
use super::schedule::{stage_for_epoch, LrSchedule};
use super::smoothing::smoothed_loss;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_cer: f64,
    /// Learning rate in effect at the epoch's final step.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_dev_cer: f64,
    pub filter: FilterStats,
}

/// TSV serialization of the epoch log: `epoch \t mean_loss \t dev_cer \t lr`.
pub fn epoch_log_text(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch\tmean_loss\tdev_cer\tlr\n");
    for e in log {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", e.epoch, e.mean_loss, e.dev_cer, e.lr);
    }
    out
}

/// Runs the full staged schedule, writing `best.ckpt`, `best.txt`, and
/// `log.tsv` under `out_dir`. On return `model` holds the final-epoch
/// weights; the best-scoring weights are the ones on disk.
pub fn train(
    model: &mut SanCtcModel,
    train_items: &[CorpusItem],
    dev_items: &[CorpusItem],
    config: &TrainConfig,
    tokenizer: &Tokenizer,
    pipeline: &FeaturePipeline,
    out_dir: &Path,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| TrainError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let (batches, filter) = make_batches(train_items, config, model.config.k)?;
    let steps_per_epoch = batches.len();
    let schedule = LrSchedule {
        lambda: config.lambda,
        d_h: model.config.d_h,
        n_warmup: config.n_warmup,
        decay: config.stage_decay,
    };
    let total_epochs = config.total_epochs();

    let mut velocity = zero_velocity(&model.parameters());
    let mut log = Vec::with_capacity(total_epochs);
    let mut best: Option<(usize, f64)> = None;
    let mut step = 0usize;

    let best_path = out_dir.join("best.ckpt");
    let snapshot = |m: &SanCtcModel| Checkpoint {
        model: m.clone(),
        alphabet: tokenizer.alphabet().clone(),
        tokenizer_kind: tokenizer.kind(),
        pipeline: *pipeline,
    };
    if total_epochs == 0 {
        save_checkpoint(&best_path, &snapshot(model))?;
        write_log(out_dir, &log)?;
        return Ok(TrainReport {
            log,
            best_epoch: None,
            best_dev_cer: f64::INFINITY,
            filter,
        });
    }

    for epoch in 0..total_epochs {
        let stage = stage_for_epoch(
            epoch,
            config.stage_switch_epoch,
            config.stage_length_epochs,
            config.n_stages,
        );
        // first global step of the current stage, for freeze-mode anchoring
        let stage_start_epoch = if stage == 0 {
            0
        } else {
            config.stage_switch_epoch + (stage - 1) * config.stage_length_epochs
        };
        let stage_start_step = stage_start_epoch * steps_per_epoch + 1;

        let mut order: Vec<usize> = (0..batches.len()).collect();
        let mut epoch_rng = Rng::derive(config.seed ^ shuffle_tag(), epoch as u64, 0);
        epoch_rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut last_lr = 0.0;
        for &batch_idx in &order {
            step += 1;
            let lr = schedule.at(step, stage, stage_start_step)?;
            last_lr = lr;
            let batch = &batches[batch_idx];

            let results: Vec<Result<(f64, Vec<Matrix>), TrainError>> = batch
                .par_iter()
                .map(|&item_idx| {
                    utterance_gradients(model, &train_items[item_idx], config, epoch, item_idx)
                })
                .collect();

            let mut grad_sum: Option<Vec<Matrix>> = None;
            for (result, &item_idx) in results.into_iter().zip(batch.iter()) {
                let (loss, grads) = result?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                        step,
                        utt_id: train_items[item_idx].utt_id.clone(),
                    });
                }
                loss_sum += loss;
                loss_count += 1;
                match grad_sum.as_mut() {
                    None => grad_sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            for (av, gv) in a.data_mut().iter_mut().zip(g.data()) {
                                *av += gv;
                            }
                        }
                    }
                }
            }
            let mut grads = grad_sum.expect("batches are never empty");
            let inv = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g.data_mut() {
                    *v *= inv;
                }
            }
            clip_global_norm(&mut grads, config.clip_norm);
            nesterov_step(
                &mut model.parameters_mut(),
                &grads,
                &mut velocity,
                lr,
                config.momentum,
            );
        }

        let dev_cer = dev_error_rate(model, dev_items)?;
        log.push(EpochLog {
            epoch,
            mean_loss: loss_sum / loss_count.max(1) as f64,
            dev_cer,
            lr: last_lr,
        });
        if best.is_none_or(|(_, cer)| dev_cer < cer) {
            best = Some((epoch, dev_cer));
            save_checkpoint(&best_path, &snapshot(model))?;
            let marker = format!("epoch\t{epoch}\ndev_cer\t{dev_cer}\n");
            crate::featio::write_atomic(&out_dir.join("best.txt"), marker.as_bytes()).map_err(
                |e| TrainError::Io {
                    path: out_dir.join("best.txt").display().to_string(),
                    source: e,
                },
            )?;
        }
    }

    write_log(out_dir, &log)?;
    let (best_epoch, best_dev_cer) = best.expect("at least one epoch ran");
    Ok(TrainReport {
        log,
        best_epoch: Some(best_epoch),
        best_dev_cer,
        filter,
    })
}

// distinct stream tags for the rng derivations
const fn shuffle_tag() -> u64 {
    0x53_48_55_46
}
const fn dropout_tag() -> u64 {
    0x44_52_4f_50
}

fn utterance_gradients(
    model: &SanCtcModel,
    item: &CorpusItem,
    config: &TrainConfig,
    epoch: usize,
    item_idx: usize,
) -> Result<(f64, Vec<Matrix>), TrainError> {
    // dropout stream depends only on (seed, epoch, utterance), not on
    // scheduling, so any thread count reproduces the same masks
    let rng = Rng::derive(
        config.seed ^ dropout_tag(),
        epoch as u64,
        item_idx as u64,
    );
    let mut tape = Tape::new();
    let mut opts = ForwardOptions::train(rng);
    let fwd = model.forward_taped(&mut tape, &item.features, &mut opts)?;
    let logits = tape.value(fwd.logits).clone();
    let grid = PosteriorGrid::from_logits(&logits)?;
    let smoothed = smoothed_loss(&grid, &item.target, config.label_smoothing)?;
    let seed_grad = grad_log_probs_to_logits(&smoothed.grad_log_probs, &grid);
    tape.backward_seeded(fwd.logits, seed_grad)?;
    let grads: Vec<Matrix> = fwd
        .params
        .iter()
        .map(|&p| {
            tape.grad(p).cloned().unwrap_or_else(|| {
                let shape = tape.value(p).shape();
                Matrix::zeros(shape.0, shape.1)
            })
        })
        .collect();
    Ok((smoothed.loss, grads))
}

/// Greedy-decode label error rate over a corpus.
pub fn dev_error_rate(model: &SanCtcModel, items: &[CorpusItem]) -> Result<f64, TrainError> {
    type ScoredPair = (Vec<usize>, Vec<usize>);
    let decoded: Vec<Result<ScoredPair, TrainError>> = items
        .par_iter()
        .map(|item| {
            let logits = model.forward(&item.features)?;
            let grid = PosteriorGrid::from_logits(&logits)?;
            Ok((item.target.clone(), greedy_decode(&grid)))
        })
        .collect();
    let pairs = decoded.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(error_rate(&pairs)?)
}

fn write_log(out_dir: &Path, log: &[EpochLog]) -> Result<(), TrainError> {
    let path = out_dir.join("log.tsv");
    crate::featio::write_atomic(&path, epoch_log_text(log).as_bytes()).map_err(|e| {
        TrainError::Io {
            path: path.display().to_string(),
            source: e,
        }
    })
}
