mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kane_core::checkpoint::Checkpoint;
use kane_core::evaluation::Evaluator;
use kane_core::export::write_embeddings;
use kane_core::kg::{generate_synthetic_kg, Dataset, Source, SynthConfig};
use kane_core::model::{embed, PropagationGraph};
use kane_core::training::train;

use config::RunConfig;

/// Knowledge graph embedding with attentive propagation over relation and
/// attribute triples.
///
/// Settings come from built-in defaults, then `--config`, then `--set`
/// and the dedicated flags, later sources winning.
#[derive(Parser, Debug)]
#[command(name = "kane", version)]
struct Cli {
    /// Directory for outputs; defaults to $KANE_OUTPUT_DIR, else the current directory.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// File of `key = value` settings.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one setting; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Seed for splitting, initialization, shuffling and negative sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse triple files into a dataset bundle and print statistics.
    Prepare {
        /// `head<TAB>relation<TAB>tail` lines.
        #[arg(long)]
        relations: Option<PathBuf>,
        /// `head<TAB>attribute<TAB>"literal"` lines.
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// `entity<TAB>class` lines.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Bundle path [default: <output-dir>/dataset.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a planted-partition graph as relation, attribute and label files.
    GenSynth {
        #[arg(long, default_value_t = 50)]
        entities: usize,
        #[arg(long, default_value_t = 5)]
        relations: usize,
        #[arg(long, default_value_t = 5)]
        clusters: usize,
        #[arg(long, default_value_t = SynthConfig::default().min_degree)]
        min_degree: usize,
        #[arg(long, default_value_t = SynthConfig::default().max_degree)]
        max_degree: usize,
        /// Fraction of relation tails replaced by random entities.
        #[arg(long, default_value_t = SynthConfig::default().noise)]
        noise: f64,
    },
    /// Train a model on a bundle; writes a checkpoint and a per-epoch loss log.
    Train {
        /// [default: <output-dir>/dataset.json]
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// [default: <output-dir>/model.ckpt]
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// CSV of epoch, loss, val_metric, seconds [default: <output-dir>/loss.csv]
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Entity and relation prediction, raw and filtered.
    EvalCompletion {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        /// Tab-separated report [default: <output-dir>/completion.tsv]
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Entity classification accuracy.
    EvalClassify {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        /// Tab-separated report [default: <output-dir>/classification.tsv]
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write entity vectors as `name<TAB>v1 ... vk` lines.
    Export {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Export final-layer vectors propagated over this bundle instead of
        /// the raw embedding table.
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// [default: <output-dir>/embeddings.txt]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    Valid,
    Test,
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_bundle(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read bundle {}", path.display()))?;
    Dataset::from_bundle_bytes(&bytes).with_context(|| format!("invalid bundle {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    Checkpoint::from_bytes(&bytes).with_context(|| format!("invalid checkpoint {}", path.display()))
}

/// Loads both and refuses a bundle the checkpoint was not trained on.
fn load_pair(run: &RunConfig, checkpoint: Option<PathBuf>, bundle: Option<PathBuf>) -> Result<(Checkpoint, Dataset)> {
    let ck_path = checkpoint.unwrap_or_else(|| run.out("model.ckpt"));
    let ds_path = bundle.unwrap_or_else(|| run.out("dataset.json"));
    let ck = load_checkpoint(&ck_path)?;
    let ds = load_bundle(&ds_path)?;
    ck.check_dataset(&ds).with_context(|| {
        format!(
            "{} was not trained on {}; evaluate with the bundle used for training",
            ck_path.display(),
            ds_path.display()
        )
    })?;
    Ok((ck, ds))
}

fn run(cli: Cli) -> Result<()> {
    let mut run = RunConfig::default();
    if let Some(path) = &cli.config {
        run.apply_file(path)?;
    }
    for kv in &cli.set {
        run.apply_override(kv)?;
    }
    if let Some(seed) = cli.seed {
        run.train.seed = seed;
    }
    if let Some(dir) = cli.output_dir {
        run.output_dir = dir;
    }

    match cli.command {
        Command::Prepare {
            relations,
            attributes,
            labels,
            out,
        } => {
            let relations = relations
                .or(run.relations.clone())
                .context("no relation file: pass --relations or set `relations` in the config")?;
            let attributes = attributes.or(run.attributes.clone());
            let labels = labels.or(run.labels.clone());
            let rel_text = read_text(&relations)?;
            let attr_text = attributes.as_deref().map(read_text).transpose()?;
            let label_text = labels.as_deref().map(read_text).transpose()?;
            let name = |p: &Path| p.display().to_string();
            let (rn, an, ln) = (
                name(&relations),
                attributes.as_deref().map(name).unwrap_or_default(),
                labels.as_deref().map(name).unwrap_or_default(),
            );
            let ds = Dataset::from_texts(
                Source { name: &rn, text: &rel_text },
                attr_text.as_deref().map(|text| Source { name: &an, text }),
                label_text.as_deref().map(|text| Source { name: &ln, text }),
                run.train.seed,
            )?;
            let out = out.unwrap_or_else(|| run.out("dataset.json"));
            write_atomic(&out, &ds.to_bundle_bytes()?)?;
            let s = ds.kg.stats();
            println!("#Entities\t#Relations\t#Attributes\t#Total Triples");
            println!(
                "{}\t{}\t{}\t{}",
                s.entities,
                s.relations,
                s.attributes,
                s.total_triples()
            );
            println!(
                "relation triples {} (train {}, valid {}, test {}), attribute triples {}, duplicates dropped {}",
                s.relation_triples,
                ds.split.train.len(),
                ds.split.valid.len(),
                ds.split.test.len(),
                s.attribute_triples,
                s.duplicates_dropped
            );
            if let Some(l) = &ds.split.labels {
                println!(
                    "labels: {} classes, {} train / {} valid / {} test entities",
                    l.class_count(),
                    l.train.len(),
                    l.valid.len(),
                    l.test.len()
                );
            }
            println!("checksum {}", ds.checksum()?);
            println!("wrote {}", out.display());
        }
        Command::GenSynth {
            entities,
            relations,
            clusters,
            min_degree,
            max_degree,
            noise,
        } => {
            let config = SynthConfig {
                seed: run.train.seed,
                entities,
                relations,
                clusters,
                min_degree,
                max_degree,
                noise,
            };
            let (kg, split) = generate_synthetic_kg(&config)?;
            let labels = split.labels.as_ref().expect("generator assigns labels");
            for (name, text) in [
                ("relations.tsv", kg.relations_tsv()),
                ("attributes.tsv", kg.attributes_tsv()),
                ("labels.tsv", labels.to_tsv(&kg)),
            ] {
                let path = run.out(name);
                write_atomic(&path, text.as_bytes())?;
                println!("wrote {}", path.display());
            }
        }
        Command::Train {
            bundle,
            checkpoint,
            log,
        } => {
            let ds = load_bundle(&bundle.unwrap_or_else(|| run.out("dataset.json")))?;
            let trained = train(&ds, &run.train)?;
            let r = &trained.report;
            let csv = r.to_csv();
            if let Some(last) = r.epochs.last() {
                println!("epochs run {} (final loss {:.6})", r.epochs.len(), last.loss);
            }
            if let (Some(e), Some(m)) = (r.best_epoch, r.best_val_metric) {
                println!("best validation metric {m:.4} at epoch {e}");
            }
            if let Some(e) = r.early_stop_epoch {
                println!("stopped early at epoch {e}");
            }
            let ck = Checkpoint::new(&ds, &run.train, trained)?;
            let ck_path = checkpoint.unwrap_or_else(|| run.out("model.ckpt"));
            let log_path = log.unwrap_or_else(|| run.out("loss.csv"));
            write_atomic(&ck_path, &ck.to_bytes()?)?;
            write_atomic(&log_path, csv.as_bytes())?;
            println!("wrote {} and {}", ck_path.display(), log_path.display());
        }
        Command::EvalCompletion {
            checkpoint,
            bundle,
            split,
            report,
        } => {
            let (ck, ds) = load_pair(&run, checkpoint, bundle)?;
            let triples = match split {
                Split::Valid => &ds.split.valid,
                Split::Test => &ds.split.test,
            };
            if triples.is_empty() {
                bail!("the {split:?} split has no relation triples");
            }
            let rep = Evaluator::new(&ck.params, &ds)?.completion_report(triples)?;
            print!("{}", rep.to_text());
            let path = report.unwrap_or_else(|| run.out("completion.tsv"));
            write_atomic(&path, rep.to_tsv().as_bytes())?;
            println!("wrote {}", path.display());
        }
        Command::EvalClassify {
            checkpoint,
            bundle,
            split,
            report,
        } => {
            let (ck, ds) = load_pair(&run, checkpoint, bundle)?;
            if ck.params.classifier.is_none() {
                bail!("checkpoint has no classifier head; train with `--set task=classification`");
            }
            let labels = ds.split.labels.as_ref().context("bundle has no entity labels")?;
            let entities = match split {
                Split::Valid => &labels.valid,
                Split::Test => &labels.test,
            };
            let rep = Evaluator::new(&ck.params, &ds)?.classification_report(entities, labels)?;
            print!("{}", rep.to_text());
            let path = report.unwrap_or_else(|| run.out("classification.tsv"));
            write_atomic(&path, rep.to_tsv().as_bytes())?;
            println!("wrote {}", path.display());
        }
        Command::Export {
            checkpoint,
            bundle,
            out,
        } => {
            let text = match bundle {
                None => {
                    let ck = load_checkpoint(&checkpoint.unwrap_or_else(|| run.out("model.ckpt")))?;
                    write_embeddings(&ck.entity_names, &ck.params.entity)?
                }
                Some(b) => {
                    let (ck, ds) = load_pair(&run, checkpoint, Some(b))?;
                    let graph = PropagationGraph::for_dataset(&ds, ck.params.config.use_attributes);
                    let emb = embed(&ck.params, &graph, ds.kg.values())?;
                    write_embeddings(&ck.entity_names, emb.entities())?
                }
            };
            let path = out.unwrap_or_else(|| run.out("embeddings.txt"));
            write_atomic(&path, text.as_bytes())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
