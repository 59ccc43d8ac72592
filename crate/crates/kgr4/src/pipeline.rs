//! End-to-end orchestration: config loading, staged execution with a content
//! hash manifest (so reruns skip finished stages), prediction output and
//! evaluation, plus the stage-toggle ablation driver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::corpus::{
    build_pretrain_set, build_retrospective_augmentation, ingest, read_concept_graph,
    read_dataset, write_dataset, CorpusFormat, TrainingInstance,
};
use crate::error::{Kgr4Error, Result};
use crate::eval::{evaluate, rethink_select, ConceptGraph, EvalInput, EvalReport, ScoredCandidate};
use crate::generator::{finetune, generate, pretrain, GeneratorInput, MixWeight};
use crate::index::{build_index, retrieve_prototypes, InvertedIndex, PrototypeSet};
use crate::nn::{hash_bytes, Checkpoint, TrainConfig, Vocab};
use crate::refiner::{build_refiner_dataset, refine, train_refiner, PerturbationSpec};
use crate::scorer::{build_scorer_dataset, train_scorer, Scorer, ScorerConfig};
use crate::seq2seq::{DecodeConfig, Seq2SeqConfig, Seq2SeqModel};
use crate::text::{Lexicon, Sentence};

/// Which pipeline stages are active. Disabling a stage falls back to the
/// simplest behaviour: no pretraining starts from random init, no retrieval
/// keeps the rough concept-match ranking, no retrospective training uses the
/// pure edit objective, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageToggles {
    pub pretraining: bool,
    pub retrieval: bool,
    pub retrospective_training: bool,
    pub retrospective_augmentation: bool,
    pub refine: bool,
    pub rethink: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            pretraining: true,
            retrieval: true,
            retrospective_training: true,
            retrospective_augmentation: true,
            refine: true,
            rethink: true,
        }
    }
}

impl StageToggles {
    pub fn none() -> StageToggles {
        StageToggles {
            pretraining: false,
            retrieval: false,
            retrospective_training: false,
            retrospective_augmentation: false,
            refine: false,
            rethink: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelinePaths {
    /// external sentence corpus
    pub ext_corpus: PathBuf,
    /// "jsonl" or "plain"
    pub ext_format: String,
    /// concept-set/target training pairs
    pub train_pairs: PathBuf,
    /// held-out pairs used for generation and metrics
    pub dev_pairs: PathBuf,
    /// optional lemma co-occurrence graph for difficulty buckets
    pub concept_graph: Option<PathBuf>,
    /// where run directories are created
    pub out_dir: PathBuf,
}

impl Default for PipelinePaths {
    fn default() -> Self {
        PipelinePaths {
            ext_corpus: PathBuf::from("data/ext_corpus.jsonl"),
            ext_format: "jsonl".into(),
            train_pairs: PathBuf::from("data/train_pairs.jsonl"),
            dev_pairs: PathBuf::from("data/dev_pairs.jsonl"),
            concept_graph: None,
            out_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PipelinePaths,
    /// pseudo-concepts sampled per sentence
    pub k: usize,
    /// negatives per positive in the scorer dataset
    pub neg_ratio: usize,
    /// rough-retrieval candidate pool re-ranked by the scorer
    pub pool: usize,
    /// edit/copy mixture weights; one finetuned model per weight when the
    /// rethink stage is on
    pub lambdas: Vec<f64>,
    /// mixture weight used when rethink is off
    pub default_lambda: f64,
    pub decode: DecodeConfig,
    pub perturbation: PerturbationSpec,
    pub scorer: ScorerConfig,
    pub scorer_train: TrainConfig,
    pub generator: Seq2SeqConfig,
    pub pretrain_train: TrainConfig,
    pub finetune_train: TrainConfig,
    pub refiner_train: TrainConfig,
    pub seed: u64,
    pub stages: StageToggles,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: PipelinePaths::default(),
            k: 5,
            neg_ratio: 3,
            pool: 100,
            lambdas: vec![0.0, 0.1, 0.5, 0.9, 1.0],
            default_lambda: 0.1,
            decode: DecodeConfig::default(),
            perturbation: PerturbationSpec::default(),
            scorer: ScorerConfig::default(),
            scorer_train: TrainConfig::default(),
            generator: Seq2SeqConfig::default(),
            pretrain_train: TrainConfig::default(),
            finetune_train: TrainConfig::default(),
            refiner_train: TrainConfig::default(),
            seed: 0,
            stages: StageToggles::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: PipelineConfig =
            toml::from_str(&text).map_err(|e| Kgr4Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Kgr4Error::Config("lambdas must not be empty".into()));
        }
        for &l in &self.lambdas {
            MixWeight::new(l)?;
        }
        MixWeight::new(self.default_lambda)?;
        if self.k == 0 {
            return Err(Kgr4Error::Config("k must be >= 1".into()));
        }
        self.perturbation.validate()?;
        Ok(())
    }

    /// Content hash of the full configuration; names the run directory.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hash_bytes(json.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub input_hash: String,
    pub output_hash: String,
    pub artifact: String,
}

/// Per-run record of what was computed from what. A stage is skipped when its
/// input hash matches and its artifact is still intact on disk.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    fn load_or_new(path: &Path, config_hash: &str) -> RunManifest {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(m) = serde_json::from_str::<RunManifest>(&text) {
                if m.config_hash == config_hash {
                    return m;
                }
            }
        }
        RunManifest {
            config_hash: config_hash.to_string(),
            ..Default::default()
        }
    }

    fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// One line of the predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub concepts: Vec<String>,
    pub prediction: String,
    pub lambda: f64,
}

pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub predictions: Vec<Prediction>,
    pub report: EvalReport,
}

/// Stage seeds are derived from the run seed and the stage name so that
/// toggling one stage does not shift every other stage's random stream.
fn derive_seed(base: u64, label: &str) -> u64 {
    let digest = hash_bytes(format!("{base}:{label}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

struct Runner {
    run_dir: PathBuf,
    manifest: RunManifest,
    manifest_path: PathBuf,
}

impl Runner {
    fn new(config: &PipelineConfig) -> Result<Runner> {
        config.validate()?;
        let hash = config.hash();
        let run_dir = config.paths.out_dir.join(format!("run-{}", &hash[..12]));
        std::fs::create_dir_all(&run_dir)?;
        let manifest_path = run_dir.join("manifest.json");
        let manifest = RunManifest::load_or_new(&manifest_path, &hash);
        Ok(Runner {
            run_dir,
            manifest,
            manifest_path,
        })
    }

    /// Run `compute` unless the manifest shows the artifact is current.
    fn stage<T>(
        &mut self,
        name: &str,
        input_hash: &str,
        artifact: &str,
        write: impl FnOnce(&T, &Path) -> Result<()>,
        read: impl FnOnce(&Path) -> Result<T>,
        compute: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        let path = self.run_dir.join(artifact);
        if let Some(rec) = self.manifest.stages.get(name) {
            if rec.input_hash == input_hash && path.exists() {
                let bytes = std::fs::read(&path)?;
                if hash_bytes(&bytes) == rec.output_hash {
                    log::info!("stage {name}: up to date, loading {artifact}");
                    return read(&path);
                }
            }
        }
        log::info!("stage {name}: computing");
        let value = compute().map_err(|e| Kgr4Error::Stage {
            stage: name.to_string(),
            msg: e.to_string(),
        })?;
        write(&value, &path)?;
        let bytes = std::fs::read(&path)?;
        self.manifest.stages.insert(
            name.to_string(),
            StageRecord {
                input_hash: input_hash.to_string(),
                output_hash: hash_bytes(&bytes),
                artifact: artifact.to_string(),
            },
        );
        self.manifest.save(&self.manifest_path)?;
        Ok(value)
    }
}

fn lambda_tag(lambda: f64) -> String {
    format!("{:.4}", lambda).replace('.', "_")
}

fn ext_format(config: &PipelineConfig) -> Result<CorpusFormat> {
    CorpusFormat::parse(&config.paths.ext_format).ok_or_else(|| {
        Kgr4Error::Config(format!("unknown corpus format {:?}", config.paths.ext_format))
    })
}

/// Mixture weights actually trained/generated with, given the toggles.
fn active_lambdas(config: &PipelineConfig) -> Vec<f64> {
    if !config.stages.retrospective_training {
        vec![0.0]
    } else if config.stages.rethink {
        config.lambdas.clone()
    } else {
        vec![config.default_lambda]
    }
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let mut out = String::new();
    for p in predictions {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| Kgr4Error::Malformed {
            line: lineno + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.save(path)
}

/// Execute the full pipeline for one config. Finished stages found in the
/// run directory are reused; a rerun over a complete directory is a no-op
/// that leaves every artifact byte-identical.
pub fn run(config: &PipelineConfig, lexicon: &Lexicon) -> Result<RunOutcome> {
    let mut runner = Runner::new(config)?;
    let toggles = config.stages;

    // -- ingest (cheap, always recomputed; hashes feed downstream stages)
    let ext = ingest(&config.paths.ext_corpus, ext_format(config)?, lexicon)?;
    let train = ingest(&config.paths.train_pairs, CorpusFormat::CommongenPairs, lexicon)?;
    let dev = ingest(&config.paths.dev_pairs, CorpusFormat::CommongenPairs, lexicon)?;
    let ext_hash = ext.hash();
    let train_hash = train.hash();
    let dev_hash = dev.hash();
    let train_pairs = train.paired();
    let dev_pairs = dev.paired();
    if dev_pairs.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }

    // shared vocabulary over surface forms of the corpus and training pairs
    let mut words = ext.word_forms();
    words.extend(train.word_forms());
    let vocab = Vocab::build(words.iter().map(|s| s.as_str()));

    // -- index
    let index = {
        let input = format!("index:{ext_hash}");
        runner.stage(
            "index",
            &input,
            "index.json",
            |idx: &InvertedIndex, path| idx.save(path),
            |path| InvertedIndex::load(path, &ext),
            || Ok(build_index(&ext)),
        )?
    };

    // -- scorer (needed by retrieval re-ranking and by rethink selection)
    let need_scorer = toggles.retrieval || toggles.rethink;
    let scorer: Option<Scorer> = if need_scorer {
        let input = format!(
            "scorer:{ext_hash}:{train_hash}:{}:{}",
            config.neg_ratio,
            hash_bytes(
                serde_json::to_string(&(&config.scorer, &config.scorer_train, config.seed))?
                    .as_bytes()
            )
        );
        let vocab_for_scorer = vocab.clone();
        let train_pairs_ref = &train_pairs;
        let ext_ref = &ext;
        let ckpt = runner.stage(
            "scorer",
            &input,
            "scorer.ckpt.json",
            |c: &Checkpoint, path| save_checkpoint(c, path),
            Checkpoint::load,
            || {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "scorer"));
                let data =
                    build_scorer_dataset(train_pairs_ref, ext_ref, config.neg_ratio, &mut rng)?;
                let scorer = train_scorer(
                    &data,
                    config.scorer.clone(),
                    &config.scorer_train,
                    vocab_for_scorer,
                    &mut rng,
                )?;
                Ok(scorer.checkpoint(&train_hash))
            },
        )?;
        Some(Scorer::from_checkpoint(&ckpt)?)
    } else {
        None
    };

    // -- pretraining
    let pretrained: Seq2SeqModel = if toggles.pretraining {
        let input = format!(
            "pretrain:{ext_hash}:{}:{}",
            config.k,
            hash_bytes(
                serde_json::to_string(&(&config.generator, &config.pretrain_train, config.seed))?
                    .as_bytes()
            )
        );
        let vocab_for_gen = vocab.clone();
        let ext_ref = &ext;
        let index_ref = &index;
        let ckpt = runner.stage(
            "pretrain",
            &input,
            "generator_pretrained.ckpt.json",
            |c: &Checkpoint, path| save_checkpoint(c, path),
            Checkpoint::load,
            || {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "pretrain"));
                let dataset = build_pretrain_set(ext_ref, index_ref, config.k, &mut rng)?;
                let mut model = Seq2SeqModel::new(config.generator.clone(), vocab_for_gen);
                pretrain(&mut model, &dataset, &config.pretrain_train, &mut rng)?;
                Ok(model.checkpoint("generator", &ext_hash))
            },
        )?;
        Seq2SeqModel::from_checkpoint(&ckpt)?
    } else {
        Seq2SeqModel::new(config.generator.clone(), vocab.clone())
    };

    // -- finetuning dataset (prototype retrieval + optional augmentation)
    let ft_input = format!(
        "dataset_ft:{ext_hash}:{train_hash}:{}:{}:{}:{}:{}",
        config.pool, config.k, toggles.retrieval, toggles.retrospective_augmentation, config.seed
    );
    let scorer_ref = if toggles.retrieval { scorer.as_ref() } else { None };
    let ft_dataset: Vec<TrainingInstance> = {
        let train_pairs_ref = &train_pairs;
        let ext_ref = &ext;
        let index_ref = &index;
        runner.stage(
            "dataset_ft",
            &ft_input,
            "dataset_ft.jsonl",
            |d: &Vec<TrainingInstance>, path| write_dataset(path, d),
            |path| read_dataset(path, lexicon),
            || {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "dataset_ft"));
                let mut protos: Vec<PrototypeSet> = Vec::with_capacity(train_pairs_ref.len());
                for (concepts, target) in train_pairs_ref {
                    protos.push(retrieve_prototypes(
                        index_ref,
                        ext_ref,
                        concepts,
                        scorer_ref,
                        config.pool,
                        Some(target.id.as_str()),
                    )?);
                }
                let mut dataset =
                    build_retrospective_augmentation(train_pairs_ref, &protos, config.k, &mut rng)?;
                if !toggles.retrospective_augmentation {
                    dataset.retain(|i| i.kind == crate::corpus::InstanceKind::Edit);
                }
                Ok(dataset)
            },
        )?
    };
    let ft_data_hash = {
        let bytes = std::fs::read(runner.run_dir.join("dataset_ft.jsonl"))?;
        hash_bytes(&bytes)
    };

    // -- finetuning, one model per active mixture weight
    let lambdas = active_lambdas(config);
    let mut finetuned: Vec<(f64, Seq2SeqModel)> = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let tag = lambda_tag(lambda);
        let input = format!(
            "finetune:{ft_data_hash}:{tag}:{}:{}",
            toggles.pretraining,
            hash_bytes(
                serde_json::to_string(&(&config.generator, &config.finetune_train, config.seed))?
                    .as_bytes()
            )
        );
        let base = &pretrained;
        let ft_ref = &ft_dataset;
        let ckpt = runner.stage(
            &format!("finetune-{tag}"),
            &input,
            &format!("generator_ft_{tag}.ckpt.json"),
            |c: &Checkpoint, path| save_checkpoint(c, path),
            Checkpoint::load,
            || {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.seed,
                    &format!("finetune-{tag}"),
                ));
                let mut model = base.clone();
                finetune(
                    &mut model,
                    ft_ref,
                    MixWeight::new(lambda)?,
                    &config.finetune_train,
                    &mut rng,
                )?;
                Ok(model.checkpoint("generator", &ft_data_hash))
            },
        )?;
        finetuned.push((lambda, Seq2SeqModel::from_checkpoint(&ckpt)?));
    }

    // -- refiner
    let refiner: Option<Seq2SeqModel> = if toggles.refine {
        let input = format!(
            "refiner:{ext_hash}:{}",
            hash_bytes(
                serde_json::to_string(&(
                    &config.perturbation,
                    &config.generator,
                    &config.refiner_train,
                    config.seed
                ))?
                .as_bytes()
            )
        );
        let vocab_for_ref = vocab.clone();
        let ext_ref = &ext;
        let ckpt = runner.stage(
            "refiner",
            &input,
            "refiner.ckpt.json",
            |c: &Checkpoint, path| save_checkpoint(c, path),
            Checkpoint::load,
            || {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "refiner"));
                let pairs = build_refiner_dataset(ext_ref, &config.perturbation, lexicon)?;
                let mut model = Seq2SeqModel::new(config.generator.clone(), vocab_for_ref);
                train_refiner(&mut model, &pairs, &config.refiner_train, &mut rng)?;
                Ok(model.checkpoint("refiner", &ext_hash))
            },
        )?;
        Some(Seq2SeqModel::from_checkpoint(&ckpt)?)
    } else {
        None
    };

    // -- generation over the dev pairs
    let predict_input = format!(
        "predict:{dev_hash}:{}:{}:{}:{}",
        toggles.refine,
        toggles.rethink,
        serde_json::to_string(&lambdas)?,
        hash_bytes(
            serde_json::to_string(&(
                &config.decode,
                runner
                    .manifest
                    .stages
                    .iter()
                    .filter(|(k, _)| k.as_str() != "predict")
                    .map(|(k, v)| (k.clone(), v.output_hash.clone()))
                    .collect::<Vec<_>>()
            ))?
            .as_bytes()
        )
    );
    let predictions: Vec<Prediction> = {
        let dev_ref = &dev_pairs;
        let finetuned_ref = &finetuned;
        let refiner_ref = refiner.as_ref();
        let scorer_for_rethink = scorer.as_ref();
        let ext_ref = &ext;
        let index_ref = &index;
        runner.stage(
            "predict",
            &predict_input,
            "predictions.jsonl",
            |p: &Vec<Prediction>, path| write_predictions(path, p),
            read_predictions,
            || {
                let mut out = Vec::with_capacity(dev_ref.len());
                for (concepts, _target) in dev_ref {
                    let protos = retrieve_prototypes(
                        index_ref,
                        ext_ref,
                        concepts,
                        scorer_ref,
                        config.pool,
                        None,
                    )?;
                    let input = GeneratorInput::new(concepts.clone(), protos.prototypes.clone())?;
                    let mut candidates: Vec<ScoredCandidate> = Vec::new();
                    for (lambda, model) in finetuned_ref {
                        let mut sentence = generate(model, &input, config.decode, lexicon)?;
                        if let Some(refiner) = refiner_ref {
                            sentence = refine(refiner, &sentence, config.decode, lexicon)?;
                        }
                        let score = match (toggles.rethink, scorer_for_rethink) {
                            (true, Some(s)) => s.score(concepts, &sentence)?,
                            _ => 0.0,
                        };
                        candidates.push(ScoredCandidate {
                            sentence,
                            lambda: *lambda,
                            score,
                        });
                    }
                    let chosen = if toggles.rethink {
                        rethink_select(&candidates)?
                    } else {
                        0
                    };
                    let c = &candidates[chosen];
                    out.push(Prediction {
                        concepts: concepts.iter().map(str::to_string).collect(),
                        prediction: c.sentence.text.clone(),
                        lambda: c.lambda,
                    });
                }
                Ok(out)
            },
        )?
    };

    // -- evaluation
    let graph: Option<ConceptGraph> = match &config.paths.concept_graph {
        Some(path) => Some(read_concept_graph(path)?),
        None => None,
    };
    let pred_sentences: Vec<Sentence> = predictions
        .iter()
        .enumerate()
        .map(|(i, p)| Sentence::analyze(format!("pred-{i}"), &p.prediction, lexicon))
        .collect();
    let inputs: Vec<EvalInput<'_>> = dev_pairs
        .iter()
        .zip(&pred_sentences)
        .map(|((concepts, target), pred)| EvalInput {
            concepts,
            prediction: pred,
            references: vec![target],
        })
        .collect();
    let known = {
        let mut w = ext.word_forms();
        w.extend(train.word_forms());
        w
    };
    let report = evaluate(&inputs, &known, graph.as_ref())?;
    std::fs::write(runner.run_dir.join("report.json"), report.to_json()?)?;
    std::fs::write(runner.run_dir.join("report.txt"), report.to_table())?;
    std::fs::write(runner.run_dir.join("buckets.csv"), report.buckets_csv())?;
    runner.manifest.save(&runner.manifest_path)?;

    Ok(RunOutcome {
        run_dir: runner.run_dir,
        predictions,
        report,
    })
}

/// The cumulative stage-toggle ladder: each row enables one more stage on top
/// of the previous one.
pub fn cumulative_variants() -> Vec<(String, StageToggles)> {
    let mut rows = Vec::new();
    let mut t = StageToggles::none();
    rows.push(("baseline".to_string(), t));
    t.pretraining = true;
    rows.push(("+pretraining".to_string(), t));
    t.retrieval = true;
    rows.push(("+retrieval".to_string(), t));
    t.retrospective_training = true;
    rows.push(("+retrospective training".to_string(), t));
    t.retrospective_augmentation = true;
    rows.push(("+retrospective augmentation".to_string(), t));
    t.refine = true;
    rows.push(("+refine".to_string(), t));
    t.rethink = true;
    rows.push(("+rethink".to_string(), t));
    rows
}

/// Run every variant (one full pipeline each) and collect its report.
pub fn ablation(
    config: &PipelineConfig,
    variants: &[(String, StageToggles)],
    lexicon: &Lexicon,
) -> Result<Vec<(String, EvalReport)>> {
    if variants.is_empty() {
        return Err(Kgr4Error::InvalidArgument("no ablation variants".into()));
    }
    let mut rows = Vec::with_capacity(variants.len());
    for (name, toggles) in variants {
        let mut variant = config.clone();
        variant.stages = *toggles;
        let outcome = run(&variant, lexicon)?;
        rows.push((name.clone(), outcome.report));
    }
    Ok(rows)
}

/// Text table over ablation rows, one variant per line.
pub fn ablation_table(rows: &[(String, EvalReport)]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<32} {:>8} {:>10} {:>10} {:>10}",
        "variant", "bleu4", "coverage", "rep_2gram", "unk_words"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<32} {:>8.2} {:>10.2} {:>10.2} {:>10.2}",
            name, r.bleu4, r.coverage, r.rep_2gram, r.unk_words
        );
    }
    out
}
