//! Thin command-line front end over the library. Each subcommand parses
//! arguments, calls one library entry point, and prints or writes the result.

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

use kgr4::corpus::{
    build_pretrain_set, ingest, read_concept_graph, read_dataset, ConceptSet, Corpus, CorpusFormat,
};
use kgr4::eval::{evaluate, rethink_select, EvalInput, ScoredCandidate};
use kgr4::generator::{finetune, generate, pretrain, GeneratorInput, MixWeight};
use kgr4::index::{build_index, retrieve_prototypes, InvertedIndex};
use kgr4::nn::{Checkpoint, Vocab};
use kgr4::pipeline::{
    ablation, ablation_table, cumulative_variants, read_predictions, run, PipelineConfig,
};
use kgr4::refiner::{build_refiner_dataset, refine, train_refiner, write_pairs};
use kgr4::scorer::{build_scorer_dataset, train_scorer, Scorer};
use kgr4::seq2seq::Seq2SeqModel;
use kgr4::text::{Lexicon, Sentence};
use kgr4::Result;

#[derive(Parser)]
#[command(name = "kgr4", about = "retrieve/retrospect/refine/rethink generation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and analyze a corpus file, writing the analyzed form as JSON
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// jsonl | plain | pairs
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build the inverted lemma index over an analyzed corpus
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Retrieve the top-3 prototypes for a comma-separated concept list
    Retrieve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        concepts: String,
        #[arg(long)]
        scorer: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        pool: usize,
    },
    /// Train the relevance scorer from the config's corpora
    TrainScorer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Pretrain the generator on pseudo-concept instances from the corpus
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Finetune a pretrained generator on an instance dataset
    Finetune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the denoising refiner on perturbed corpus sentences
    TrainRefiner {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate a sentence for a concept list with a finetuned generator
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        concepts: String,
        #[arg(long)]
        scorer: Option<PathBuf>,
    },
    /// Correct a sentence with a trained refiner
    Refine {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Write a perturbed (clean, corrupted) pair dataset for the corpus
    Perturb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score candidate sentences and pick the best one
    Rethink {
        #[arg(long)]
        scorer: PathBuf,
        #[arg(long)]
        concepts: String,
        /// JSONL candidates: {"text": ..., "lambda": ...}
        #[arg(long)]
        candidates: PathBuf,
    },
    /// Compute metrics for a predictions file against reference pairs
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// corpus whose words define the known-word set
        #[arg(long)]
        known: PathBuf,
    },
    /// Run the full pipeline end to end
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the cumulative stage-toggle ladder and print the table
    Ablation {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_format(s: &str) -> Result<CorpusFormat> {
    CorpusFormat::parse(s).ok_or_else(|| {
        kgr4::Kgr4Error::InvalidArgument(format!("unknown format {s:?} (jsonl|plain|pairs)"))
    })
}

fn load_corpus_json(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text).map_err(kgr4::Kgr4Error::from)?)
}

fn parse_concepts(spec: &str, lexicon: &Lexicon) -> Result<ConceptSet> {
    let words: Vec<String> = spec
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    ConceptSet::from_raw(&words, lexicon)
}

fn shared_vocab(config: &PipelineConfig, lexicon: &Lexicon) -> Result<(Corpus, Corpus, Vocab)> {
    let ext = ingest(
        &config.paths.ext_corpus,
        parse_format(&config.paths.ext_format)?,
        lexicon,
    )?;
    let train = ingest(&config.paths.train_pairs, CorpusFormat::CommongenPairs, lexicon)?;
    let mut words = ext.word_forms();
    words.extend(train.word_forms());
    let vocab = Vocab::build(words.iter().map(|s| s.as_str()));
    Ok((ext, train, vocab))
}

fn main() {
    env_logger::init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let lexicon = Lexicon::bundled();
    match cli.command {
        Command::Ingest {
            input,
            format,
            output,
        } => {
            let corpus = ingest(&input, parse_format(&format)?, &lexicon)?;
            std::fs::write(&output, serde_json::to_string_pretty(&corpus)?)?;
            println!(
                "ingested {} sentences ({} pairs), hash {}",
                corpus.len(),
                corpus.paired().len(),
                corpus.hash()
            );
        }
        Command::BuildIndex { corpus, output } => {
            let corpus = load_corpus_json(&corpus)?;
            let index = build_index(&corpus);
            index.save(&output)?;
            println!("index over {} sentences, hash {}", corpus.len(), index.structural_hash());
        }
        Command::Retrieve {
            corpus,
            index,
            concepts,
            scorer,
            pool,
        } => {
            let corpus = load_corpus_json(&corpus)?;
            let index = InvertedIndex::load(&index, &corpus)?;
            let concepts = parse_concepts(&concepts, &lexicon)?;
            let scorer = match scorer {
                Some(path) => Some(Scorer::from_checkpoint(&Checkpoint::load(&path)?)?),
                None => None,
            };
            let protos =
                retrieve_prototypes(&index, &corpus, &concepts, scorer.as_ref(), pool, None)?;
            for (p, s) in protos.prototypes.iter().zip(&protos.scores) {
                println!("{s:.4}\t{}", p.text);
            }
        }
        Command::TrainScorer { config, output } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let (ext, train, vocab) = shared_vocab(&config, &lexicon)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let data = build_scorer_dataset(&train.paired(), &ext, config.neg_ratio, &mut rng)?;
            let scorer = train_scorer(&data, config.scorer, &config.scorer_train, vocab, &mut rng)?;
            scorer.checkpoint(&train.hash()).save(&output)?;
            println!("scorer accuracy on its training data: {:.3}", scorer.accuracy(&data)?);
        }
        Command::Pretrain { config, output } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let (ext, _train, vocab) = shared_vocab(&config, &lexicon)?;
            let index = build_index(&ext);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let dataset = build_pretrain_set(&ext, &index, config.k, &mut rng)?;
            let mut model = Seq2SeqModel::new(config.generator.clone(), vocab);
            pretrain(&mut model, &dataset, &config.pretrain_train, &mut rng)?;
            model.checkpoint("generator", &ext.hash()).save(&output)?;
            println!("pretrained on {} instances", dataset.len());
        }
        Command::Finetune {
            config,
            base,
            dataset,
            lambda,
            output,
        } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let mut model = Seq2SeqModel::from_checkpoint(&Checkpoint::load(&base)?)?;
            let instances = read_dataset(&dataset, &lexicon)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            finetune(
                &mut model,
                &instances,
                MixWeight::new(lambda)?,
                &config.finetune_train,
                &mut rng,
            )?;
            model.checkpoint("generator", "cli").save(&output)?;
            println!("finetuned on {} instances at lambda {lambda}", instances.len());
        }
        Command::TrainRefiner { config, output } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let (ext, _train, vocab) = shared_vocab(&config, &lexicon)?;
            let pairs = build_refiner_dataset(&ext, &config.perturbation, &lexicon)?;
            let mut model = Seq2SeqModel::new(config.generator.clone(), vocab);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            train_refiner(&mut model, &pairs, &config.refiner_train, &mut rng)?;
            model.checkpoint("refiner", &ext.hash()).save(&output)?;
            println!("refiner trained on {} pairs", pairs.len());
        }
        Command::Generate {
            config,
            checkpoint,
            concepts,
            scorer,
        } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let (ext, _train, _vocab) = shared_vocab(&config, &lexicon)?;
            let index = build_index(&ext);
            let concepts = parse_concepts(&concepts, &lexicon)?;
            let scorer = match scorer {
                Some(path) => Some(Scorer::from_checkpoint(&Checkpoint::load(&path)?)?),
                None => None,
            };
            let protos =
                retrieve_prototypes(&index, &ext, &concepts, scorer.as_ref(), config.pool, None)?;
            let model = Seq2SeqModel::from_checkpoint(&Checkpoint::load(&checkpoint)?)?;
            let input = GeneratorInput::new(concepts, protos.prototypes)?;
            let sentence = generate(&model, &input, config.decode, &lexicon)?;
            println!("{}", sentence.text);
        }
        Command::Refine {
            config,
            checkpoint,
            text,
        } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let model = Seq2SeqModel::from_checkpoint(&Checkpoint::load(&checkpoint)?)?;
            let sentence = Sentence::analyze("cli", &text, &lexicon);
            let refined = refine(&model, &sentence, config.decode, &lexicon)?;
            println!("{}", refined.text);
        }
        Command::Perturb { config, output } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let ext = ingest(
                &config.paths.ext_corpus,
                parse_format(&config.paths.ext_format)?,
                &lexicon,
            )?;
            let pairs = build_refiner_dataset(&ext, &config.perturbation, &lexicon)?;
            write_pairs(&output, &pairs)?;
            println!("wrote {} pairs", pairs.len());
        }
        Command::Rethink {
            scorer,
            concepts,
            candidates,
        } => {
            let scorer = Scorer::from_checkpoint(&Checkpoint::load(&scorer)?)?;
            let concepts = parse_concepts(&concepts, &lexicon)?;
            #[derive(serde::Deserialize)]
            struct Cand {
                text: String,
                #[serde(default)]
                lambda: f64,
            }
            let text = std::fs::read_to_string(&candidates)?;
            let mut scored = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let c: Cand = serde_json::from_str(line)?;
                let sentence = Sentence::analyze("cand", &c.text, &lexicon);
                let score = scorer.score(&concepts, &sentence)?;
                scored.push(ScoredCandidate {
                    sentence,
                    lambda: c.lambda,
                    score,
                });
            }
            let best = rethink_select(&scored)?;
            for (i, c) in scored.iter().enumerate() {
                let marker = if i == best { "*" } else { " " };
                println!("{marker} {:.4}  {}", c.score, c.sentence.text);
            }
        }
        Command::Evaluate {
            predictions,
            pairs,
            graph,
            known,
        } => {
            let preds = read_predictions(&predictions)?;
            let pairs = ingest(&pairs, CorpusFormat::CommongenPairs, &lexicon)?;
            let dev = pairs.paired();
            if preds.len() != dev.len() {
                return Err(kgr4::Kgr4Error::InvalidArgument(format!(
                    "{} predictions but {} reference pairs",
                    preds.len(),
                    dev.len()
                )));
            }
            let known = ingest(&known, CorpusFormat::Jsonl, &lexicon)?.word_forms();
            let graph = match graph {
                Some(path) => Some(read_concept_graph(&path)?),
                None => None,
            };
            let sentences: Vec<Sentence> = preds
                .iter()
                .enumerate()
                .map(|(i, p)| Sentence::analyze(format!("pred-{i}"), &p.prediction, &lexicon))
                .collect();
            let inputs: Vec<EvalInput<'_>> = dev
                .iter()
                .zip(&sentences)
                .map(|((concepts, target), pred)| EvalInput {
                    concepts,
                    prediction: pred,
                    references: vec![target],
                })
                .collect();
            let report = evaluate(&inputs, &known, graph.as_ref())?;
            print!("{}", report.to_table());
        }
        Command::Run { config } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let outcome = run(&config, &lexicon)?;
            println!("run dir: {}", outcome.run_dir.display());
            print!("{}", outcome.report.to_table());
        }
        Command::Ablation { config } => {
            let config = PipelineConfig::from_toml_file(&config)?;
            let rows = ablation(&config, &cumulative_variants(), &lexicon)?;
            print!("{}", ablation_table(&rows));
        }
    }
    Ok(())
}
