use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use hoi_core::bench::{build_trials, eval_bench, read_trials, similarity_histogram, write_trials};
use hoi_core::config::{MineMethod, RunConfig};
use hoi_core::experiment::{retrieval, separability_scores};
use hoi_core::layout::{DataDir, Part};
use hoi_core::model::{checksum, load_checkpoint, save_checkpoint, train, DualEncoder, Objective, TrainData, Vocab};
use hoi_core::negmine::{mine_llm_batch, mine_vocab, read_bundles, write_bundles, HttpLlmClient, RuleIndex};
use hoi_core::synth::{gen_corpus, split_bench};
use hoi_core::{seed, DualEncoderF32, Error};

#[derive(Parser)]
#[command(name = "hoi", version, about = "Hard-negative video-text contrastive training and HOI benchmarking")]
struct Cli {
    /// JSON run config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for evaluation. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus, clip features and the train/bench split.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        /// Data directory to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate verb and noun negatives for one split.
    Mine {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        method: Option<MineMethod>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "train")]
        split: Part,
        #[arg(long)]
        seed: Option<u64>,
        /// Bundle file; defaults to bundles.<split>.jsonl in the data directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build multi-choice trials from the bench split and its bundles.
    Bench {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        bundles: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the dual encoder on the train split.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        objective: Option<Objective>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Start from this checkpoint, folding its adapter into the frozen weight.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        bundles: Option<PathBuf>,
        /// Negatives used per type and caption.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory for the checkpoint, log and config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on the trials and the bench split.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        trials: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the similarity histogram CSV.
        #[arg(long)]
        histogram: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    let threads = cli.threads as usize;
    match cli.cmd {
        Cmd::Synth { seed, out } => {
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            let dir = DataDir::new(out.unwrap_or_else(|| cfg.paths.data_dir.clone()));
            cfg.paths.data_dir = dir.root().to_path_buf();
            cfg.validate()?;
            synth(&cfg, &dir)
        }
        Cmd::Mine { data, method, k, split, seed, out } => {
            set(&mut cfg.paths.data_dir, data);
            set(&mut cfg.mining.method, method);
            set(&mut cfg.mining.k, k);
            set(&mut cfg.mining.seed, seed);
            cfg.llm = cfg.llm.with_env();
            cfg.validate()?;
            let dir = DataDir::new(&cfg.paths.data_dir);
            let out = out.unwrap_or_else(|| dir.bundles(split));
            mine(&cfg, &dir, split, &out)
        }
        Cmd::Bench { data, n, bundles, seed, out } => {
            set(&mut cfg.paths.data_dir, data);
            set(&mut cfg.bench.n, n);
            set(&mut cfg.bench.seed, seed);
            cfg.validate()?;
            let dir = DataDir::new(&cfg.paths.data_dir);
            let bundles = bundles.unwrap_or_else(|| dir.bundles(Part::Bench));
            let out = out.unwrap_or_else(|| dir.trials());
            bench(&cfg, &dir, &bundles, &out)
        }
        Cmd::Train { data, objective, epochs, init, bundles, k, seed, out } => {
            set(&mut cfg.paths.data_dir, data);
            set(&mut cfg.paths.out_dir, out);
            set(&mut cfg.train.objective, objective);
            set(&mut cfg.train.epochs, epochs);
            set(&mut cfg.train.negatives_per_type, k);
            set(&mut cfg.train.seed, seed);
            cfg.validate()?;
            let dir = DataDir::new(&cfg.paths.data_dir);
            let bundles = bundles.unwrap_or_else(|| dir.bundles(Part::Train));
            train_cmd(&cfg, &dir, init.as_deref(), &bundles)
        }
        Cmd::Eval { data, checkpoint, trials, out, histogram } => {
            set(&mut cfg.paths.data_dir, data);
            set(&mut cfg.paths.out_dir, out);
            cfg.validate()?;
            let dir = DataDir::new(&cfg.paths.data_dir);
            let trials = trials.unwrap_or_else(|| dir.trials());
            eval(&cfg, &dir, &checkpoint, &trials, histogram, threads)
        }
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(value).expect("value serialises");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Directory of an output file, for the resolved config.
fn parent(path: &Path) -> &Path {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

fn synth(cfg: &RunConfig, dir: &DataDir) -> Result<(), Error> {
    let corpus = gen_corpus(&cfg.synth)?;
    let split = split_bench(corpus.captions.len(), &cfg.synth)?;
    dir.write_synth(&corpus, &split)?;
    cfg.write_resolved(dir.root(), "synth")?;
    log::info!(
        "wrote {} captions ({} train, {} bench) to {}",
        corpus.captions.len(),
        split.train.len(),
        split.bench.len(),
        dir.root().display()
    );
    Ok(())
}

fn mine(cfg: &RunConfig, dir: &DataDir, part: Part, out: &Path) -> Result<(), Error> {
    let data = dir.load()?;
    let caps = data.part(part);
    let (verbs, nouns) = hoi_core::corpus::build_lexicons(&data.captions)?;
    let k = cfg.mining.k;
    let root = seed::derive(cfg.mining.seed, "mine", part as u64);
    let vocab = |i: usize, c: &hoi_core::corpus::CaptionRecord| {
        mine_vocab(c, &verbs, &nouns, &data.synonyms, k, seed::derive(root, "vocab", i as u64))
    };
    let bundles = match cfg.mining.method {
        MineMethod::Vocab => caps.iter().enumerate().map(|(i, c)| vocab(i, c)).collect::<Result<Vec<_>, _>>()?,
        MineMethod::Rule => {
            // the pool is the training split, the text seen during training
            let mut index = RuleIndex::new(&data.part(Part::Train));
            caps.iter().map(|c| index.mine(c, k)).collect::<Result<Vec<_>, _>>()?
        }
        MineMethod::Llm => {
            let client = HttpLlmClient::new(&cfg.llm);
            let (bundles, fallbacks) = mine_llm_batch(&caps, &client, &cfg.llm, k, vocab)?;
            if fallbacks > 0 {
                log::warn!("{fallbacks} of {} captions fell back to vocabulary negatives", caps.len());
            }
            bundles
        }
    };
    if let Some(p) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(p)?;
    }
    write_bundles(out, &bundles)?;
    cfg.write_resolved(parent(out), &format!("mine.{}", part.name()))?;
    log::info!("wrote {} bundles to {}", bundles.len(), out.display());
    Ok(())
}

fn bench(cfg: &RunConfig, dir: &DataDir, bundles: &Path, out: &Path) -> Result<(), Error> {
    let data = dir.load()?;
    let bundles = read_bundles(bundles)?;
    let (trials, skipped) = build_trials(&data.part(Part::Bench), &bundles, cfg.bench.n, &data.synonyms, cfg.bench.seed);
    if trials.is_empty() {
        return Err(Error::Data(format!("no trials could be built ({skipped} captions skipped)")));
    }
    if let Some(p) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(p)?;
    }
    write_trials(out, &trials)?;
    cfg.write_resolved(parent(out), "bench")?;
    log::info!("wrote {} trials to {} ({skipped} captions skipped)", trials.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    objective: Objective,
    steps: usize,
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
    w0_checksum_before: u64,
    w0_checksum_after: u64,
}

fn train_cmd(cfg: &RunConfig, dir: &DataDir, init: Option<&Path>, bundles: &Path) -> Result<(), Error> {
    let data = dir.load()?;
    let caps = data.part(Part::Train);
    let enc: DualEncoderF32 = match init {
        Some(path) => {
            let mut enc = load_checkpoint(path)?;
            enc.merge_adapter(cfg.train.seed);
            enc
        }
        None => {
            let vocab = Vocab::from_texts(caps.iter().map(|c| c.text.as_str()));
            DualEncoder::init(&cfg.model, data.table.dim(), vocab, cfg.train.seed)?
        }
    };
    if enc.input_dim() != data.table.dim() {
        return Err(Error::Data(format!(
            "checkpoint expects {}-dimensional features, data has {}",
            enc.input_dim(),
            data.table.dim()
        )));
    }
    let bundles = if cfg.train.objective.uses_negatives() { read_bundles(bundles)? } else { Vec::new() };
    let train_data: TrainData<f32> = TrainData::new(caps, &data.table, &bundles, &enc.vocab, data.synonyms.clone())?;

    let out = &cfg.paths.out_dir;
    create_dir(out)?;
    cfg.write_resolved(out, "train")?;
    let log_path = out.join("train_log.jsonl");
    let mut log_file = BufWriter::new(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
    let before = checksum(&enc.w0);
    let (enc, log) = train(enc, &train_data, &cfg.train, |_, m| {
        serde_json::to_writer(&mut log_file, m).expect("metrics serialise");
        log_file.write_all(b"\n")?;
        Ok(())
    })?;
    log_file.flush().map_err(|e| Error::io(&log_path, e))?;
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&enc, &ckpt)?;
    let summary = TrainSummary {
        objective: cfg.train.objective,
        steps: log.len(),
        initial_loss: log.first().map(|m| m.loss),
        final_loss: log.last().map(|m| m.loss),
        w0_checksum_before: before,
        w0_checksum_after: checksum(&enc.w0),
    };
    write_json(&out.join("train_summary.json"), &summary)?;
    log::info!("{} steps of {}; checkpoint {}", log.len(), cfg.train.objective, ckpt.display());
    Ok(())
}

fn eval(cfg: &RunConfig, dir: &DataDir, ckpt: &Path, trials: &Path, histogram: bool, threads: usize) -> Result<(), Error> {
    let data = dir.load()?;
    let enc: DualEncoderF32 = load_checkpoint(ckpt)?;
    let trials = read_trials(trials)?;
    let out = &cfg.paths.out_dir;
    create_dir(out)?;
    cfg.write_resolved(out, "eval")?;
    let report = eval_bench(&enc, &data.table, &trials, threads)?;
    report.write_json(&out.join("report.json"))?;
    let bench_caps = data.part(Part::Bench);
    let sep = separability_scores(&enc, &bench_caps, &data.table, cfg.bench.seed)?;
    write_json(&out.join("separability.json"), &sep)?;
    let ret = retrieval(&enc, &bench_caps, &data.table, &data.synonyms)?;
    write_json(&out.join("retrieval.json"), &ret)?;
    if histogram {
        similarity_histogram(&enc, &data.table, &trials, cfg.bench.histogram_bins)?.write_csv(&out.join("histogram.csv"))?;
    }
    log::info!(
        "verb {:.4} noun {:.4} action {:.4} over {} trials",
        report.verb_acc,
        report.noun_acc,
        report.action_acc,
        report.n_trials
    );
    Ok(())
}
