//! Subcommand implementations. Every output file goes through
//! write-to-temp-then-rename, so failures leave no partial files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sanctc_core::analysis::{positional_spread, profile_table, relative_profile, spread_table};
use sanctc_core::ctc::{
    edit_distance, greedy_decode, load_grid_file, prefix_beam_decode, PosteriorGrid,
};
use sanctc_core::error::{CtcError, NumError, TrainError};
use sanctc_core::featio::{load_feature_file, load_manifest, write_atomic, Manifest};
use sanctc_core::labels::{
    bpe_learn as learn_bpe, char_alphabet_from_corpus, load_bpe_model, load_lexicon,
    save_bpe_model, Alphabet, Tokenizer,
};
use sanctc_core::numkit::Rng;
use sanctc_core::san::{load_checkpoint, param_count, AttentionRecord, SanCtcModel};
use sanctc_core::trainkit::{
    load_experiment_config, prepare_corpus, synth_corpus, train as run_train, write_corpus,
    TokenizerChoice,
};

/// Classified failure; main maps each variant onto its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match &e {
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            TrainError::Num(NumError::NonFinite { .. }) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(
    sanctc_core::error::FeatError,
    sanctc_core::error::LabelError,
    sanctc_core::error::SanError
);

impl From<CtcError> for CliError {
    fn from(e: CtcError) -> Self {
        match &e {
            CtcError::Num(NumError::NonFinite { .. }) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_data(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub fn synth(out: &Path, n: usize, alphabet_size: usize, seed: u64) -> Result<(), CliError> {
    if !(2..=13).contains(&alphabet_size) {
        return Err(CliError::Usage(format!(
            "--alphabet-size must be in 2..=13, got {alphabet_size}"
        )));
    }
    if n == 0 {
        return Err(CliError::Usage("--n must be >= 1".into()));
    }
    let alphabet = Alphabet::lowercase(alphabet_size);
    let corpus = synth_corpus(&alphabet, n, seed)?;
    let manifest_path = write_corpus(out, &corpus)?;
    println!("wrote {} utterances, manifest {}", n, manifest_path.display());
    Ok(())
}

pub fn bpe_learn(manifest: &Path, merges: usize, out: &Path) -> Result<(), CliError> {
    let manifest = load_manifest(manifest)?;
    let transcripts: Vec<String> = manifest
        .entries
        .iter()
        .map(|e| e.transcript.clone())
        .collect();
    let model = learn_bpe(&transcripts, merges)?;
    save_bpe_model(out, &model)?;
    println!(
        "learned {} merges, vocabulary of {} subwords -> {}",
        model.merges.len(),
        model.vocab.size(),
        out.display()
    );
    Ok(())
}

fn build_tokenizer(
    choice: &TokenizerChoice,
    train_manifest: &Manifest,
) -> Result<Tokenizer, CliError> {
    match choice {
        TokenizerChoice::Char => {
            let alphabet = char_alphabet_from_corpus(
                train_manifest.entries.iter().map(|e| e.transcript.as_str()),
            )?;
            Ok(Tokenizer::Char(alphabet))
        }
        TokenizerChoice::Bpe { model_path } => Ok(Tokenizer::Bpe(load_bpe_model(model_path)?)),
        TokenizerChoice::Phoneme { lexicon_path } => {
            Ok(Tokenizer::Phoneme(load_lexicon(lexicon_path)?))
        }
    }
}

pub fn train(config: &Path, manifest: &Path, dev: &Path, out: &Path) -> Result<(), CliError> {
    let experiment = load_experiment_config(config)?;
    let train_manifest = load_manifest(manifest)?;
    let dev_manifest = load_manifest(dev)?;
    if train_manifest.is_empty() {
        return Err(CliError::Data(format!(
            "{}: empty training manifest",
            manifest.display()
        )));
    }
    if dev_manifest.is_empty() {
        return Err(CliError::Data(format!(
            "{}: empty dev manifest",
            dev.display()
        )));
    }

    let tokenizer = build_tokenizer(&experiment.tokenizer, &train_manifest)?;
    let pipeline = experiment.pipeline;
    let train_items = prepare_corpus(&train_manifest, &pipeline, &tokenizer)?;
    let dev_items = prepare_corpus(&dev_manifest, &pipeline, &tokenizer)?;
    let feat_dim = train_items[0].features.cols();

    let model_config = experiment
        .model
        .into_model_config(feat_dim, tokenizer.alphabet().augmented_size());
    model_config.validate().map_err(CliError::from)?;
    let mut model = SanCtcModel::init(model_config, &mut Rng::new(experiment.train.seed))
        .map_err(CliError::from)?;
    println!(
        "model: {} parameters, alphabet {} labels, features {}-dim",
        model.num_parameters(),
        tokenizer.alphabet().size(),
        feat_dim
    );

    let report = run_train(
        &mut model,
        &train_items,
        &dev_items,
        &experiment.train,
        &tokenizer,
        &pipeline,
        out,
    )?;
    if report.filter.too_long + report.filter.unreachable > 0 {
        println!(
            "filtered: {} over-long, {} unreachable",
            report.filter.too_long, report.filter.unreachable
        );
    }
    for e in &report.log {
        println!(
            "epoch {}\tloss {:.4}\tdev_cer {:.4}\tlr {:.6}",
            e.epoch, e.mean_loss, e.dev_cer, e.lr
        );
    }
    match report.best_epoch {
        Some(epoch) => println!(
            "best epoch {epoch} dev_cer {:.4}; checkpoint {}",
            report.best_dev_cer,
            out.join("best.ckpt").display()
        ),
        None => println!("no epochs ran; initial weights at {}", out.join("best.ckpt").display()),
    }
    Ok(())
}

fn decode_grid(grid: &PosteriorGrid, mode: &str, beam_width: usize) -> Result<Vec<usize>, CliError> {
    match mode {
        "greedy" => Ok(greedy_decode(grid)),
        "beam" => {
            let beam = prefix_beam_decode(grid, beam_width)?;
            Ok(beam
                .into_iter()
                .next()
                .map(|h| h.labels)
                .unwrap_or_default())
        }
        other => Err(CliError::Usage(format!(
            "--mode must be greedy or beam, got {other:?}"
        ))),
    }
}

pub fn decode(
    checkpoint: Option<&Path>,
    manifest: Option<&Path>,
    grid_path: Option<&Path>,
    mode: &str,
    beam_width: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if beam_width == 0 {
        return Err(CliError::Usage("--beam-width must be >= 1".into()));
    }
    if mode != "greedy" && mode != "beam" {
        return Err(CliError::Usage(format!(
            "--mode must be greedy or beam, got {mode:?}"
        )));
    }

    if let Some(grid_path) = grid_path {
        let (grid, alphabet) = load_grid_file(grid_path)?;
        let ids = decode_grid(&grid, mode, beam_width)?;
        let text = match &alphabet {
            Some(a) => sanctc_core::labels::TokenizerKind::Char.detokenize(&ids, a)?,
            None => ids
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        };
        match out {
            Some(path) => write_atomic(path, format!("{text}\n").as_bytes())
                .map_err(|e| io_data(path, e))?,
            None => println!("{text}"),
        }
        return Ok(());
    }

    let checkpoint = checkpoint.expect("clap enforces checkpoint without --grid");
    let manifest_path = manifest.expect("clap enforces manifest without --grid");
    let ckpt = load_checkpoint(checkpoint)?;
    let manifest = load_manifest(manifest_path)?;

    let mut lines = String::new();
    for entry in &manifest.entries {
        let raw = load_feature_file(&entry.feature_path)?;
        let features = ckpt.pipeline.apply(&raw);
        let logits = ckpt.model.forward(&features.frames).map_err(|e| {
            CliError::Data(format!("{}: {e}", entry.utt_id))
        })?;
        let grid = PosteriorGrid::from_logits(&logits)?;
        let ids = decode_grid(&grid, mode, beam_width)?;
        let text = ckpt.tokenizer_kind.detokenize(&ids, &ckpt.alphabet)?;
        let _ = writeln!(lines, "{}\t{}", entry.utt_id, text);
    }
    match out {
        Some(path) => write_atomic(path, lines.as_bytes()).map_err(|e| io_data(path, e))?,
        None => print!("{lines}"),
    }
    Ok(())
}

pub fn score(reference: &Path, hyp: &Path) -> Result<(), CliError> {
    let manifest = load_manifest(reference)?;
    let hyp_text = std::fs::read_to_string(hyp).map_err(|e| io_data(hyp, e))?;
    let mut hyps: BTreeMap<String, String> = BTreeMap::new();
    for (idx, line) in hyp_text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (utt_id, text) = line.split_once('\t').ok_or_else(|| {
            CliError::Data(format!(
                "{}:{}: expected `utt_id\\thypothesis`",
                hyp.display(),
                idx + 1
            ))
        })?;
        hyps.insert(utt_id.to_string(), text.to_string());
    }

    let missing: Vec<&str> = manifest
        .entries
        .iter()
        .filter(|e| !hyps.contains_key(&e.utt_id))
        .map(|e| e.utt_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "hypotheses missing for: {}",
            missing.join(", ")
        )));
    }
    if manifest.is_empty() {
        return Err(CliError::Data("empty reference manifest".into()));
    }

    let mut dist_total = 0usize;
    let mut len_total = 0usize;
    println!("utt_id\tedits\tref_len\tcer");
    for entry in &manifest.entries {
        let ref_chars: Vec<char> = entry.transcript.chars().collect();
        let hyp_chars: Vec<char> = hyps[&entry.utt_id].chars().collect();
        let counts = edit_distance(&ref_chars, &hyp_chars);
        dist_total += counts.distance;
        len_total += ref_chars.len();
        let cer = counts.distance as f64 / ref_chars.len().max(1) as f64;
        println!(
            "{}\t{}\t{}\t{:.4}",
            entry.utt_id,
            counts.distance,
            ref_chars.len(),
            cer
        );
    }
    if len_total == 0 {
        return Err(CliError::Data(
            "all reference transcripts are empty; rate undefined".into(),
        ));
    }
    println!("corpus\t{}\t{}\t{:.4}", dist_total, len_total, dist_total as f64 / len_total as f64);
    Ok(())
}

pub fn analyze(checkpoint: &Path, manifest: &Path, out: &Path, window: usize) -> Result<(), CliError> {
    if window == 0 {
        return Err(CliError::Usage("--window must be >= 1".into()));
    }
    let ckpt = load_checkpoint(checkpoint)?;
    let manifest = load_manifest(manifest)?;
    if manifest.is_empty() {
        return Err(CliError::Data("empty manifest".into()));
    }
    let mut records: Vec<AttentionRecord> = Vec::with_capacity(manifest.len());
    for entry in &manifest.entries {
        let raw = load_feature_file(&entry.feature_path)?;
        let features = ckpt.pipeline.apply(&raw);
        let (_, record) = ckpt.model.forward_with_attention(&features.frames)?;
        records.push(record);
    }

    std::fs::create_dir_all(out).map_err(|e| io_data(out, e))?;
    let spread = spread_table(&positional_spread(&records));
    let profile = profile_table(&relative_profile(&records, window));
    let spread_path = out.join("spread.tsv");
    write_atomic(&spread_path, spread.as_bytes()).map_err(|e| io_data(&spread_path, e))?;
    let profile_path = out.join("profile.tsv");
    write_atomic(&profile_path, profile.as_bytes()).map_err(|e| io_data(&profile_path, e))?;
    println!(
        "wrote {} and {}",
        spread_path.display(),
        profile_path.display()
    );
    Ok(())
}

pub fn inspect_checkpoint(checkpoint: &Path) -> Result<(), CliError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let cfg = &ckpt.model.config;
    println!("n_layers\t{}", cfg.n_layers);
    println!("d_h\t{}", cfg.d_h);
    println!("n_hds\t{}", cfg.n_hds);
    println!("d_k\t{}", cfg.d_k);
    println!("d_ff\t{}", cfg.d_ff);
    println!("downsample\t{} (k={})", cfg.downsample.name(), cfg.k);
    println!("position\t{}", cfg.position.name());
    println!("dropout\t{}", cfg.dropout);
    println!("attention_scale\t{}", cfg.attention_scale.name());
    println!("feat_dim\t{}", cfg.feat_dim);
    println!("tokenizer\t{}", ckpt.tokenizer_kind.name());
    println!("cmvn\t{}", ckpt.pipeline.cmvn);
    println!("deltas\t{}", ckpt.pipeline.deltas.name());
    println!("alphabet\t{} labels", ckpt.alphabet.size());
    println!();
    let names = SanCtcModel::parameter_names(cfg);
    for (name, tensor) in names.iter().zip(ckpt.model.parameters()) {
        println!("{name}\t{}x{}", tensor.rows(), tensor.cols());
    }
    println!();
    println!("total parameters\t{}", param_count(cfg));
    Ok(())
}
