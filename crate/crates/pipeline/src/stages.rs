//! The pipeline stages and their dependency bookkeeping.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use patdiag_core::agent::{extract, train_agent, ExtractionRecord, PolicyNetwork};
use patdiag_core::corpus::{
    generate_synthetic, load_corpus_with_limit, save_corpus, Corpus, Label, Vocabulary,
};
use patdiag_core::eval::prf1;
use patdiag_core::nre::{train, NreModel};
use patdiag_core::numerics::SeededRng;
use patdiag_core::pattern::{
    aggregate, build_hierarchy, induce, matches, read_pattern_table, select_top,
    write_pattern_table, Pattern,
};
use patdiag_core::refinement::{
    accepted_patterns, append_journal, create_session, parse_label, read_journal, read_verdicts,
    write_verdicts, AnnotationSession, JournalEntry, VerdictClass,
};
use patdiag_core::wlf::{
    apply_lfs, denoise, estimate, gold_mix, read_label_file, write_label_file,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{FusionMode, PipelineConfig};
use crate::report::{Diagnosis, Report, SeedRow};
use crate::store::{hash_file, hash_json, stage_key, ArtifactStore, Manifest, Stage};
use crate::PipelineError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnnotationSource {
    /// Create the session and stop.
    None,
    Oracle,
    Journal(PathBuf),
    Serve {
        port: u16,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    UpToDate,
    /// The stage is waiting for annotations.
    Pending,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRewards {
    pub eta: f64,
    pub epoch_rewards: Vec<f64>,
    pub filtered: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EvalFile {
    relation: String,
    mode: String,
    per_seed: Vec<SeedRow>,
}

pub struct Pipeline {
    config: PipelineConfig,
    store: ArtifactStore,
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| PipelineError::io(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|e| PipelineError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let store = ArtifactStore::open(&config.workdir)?;
        Ok(Pipeline { config, store })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    /// The configuration slice a stage depends on.
    fn stage_config(&self, stage: Stage, corpus_source: &str) -> Value {
        let c = &self.config;
        match stage {
            Stage::Corpus if corpus_source == "synth" => json!({
                "source": "synth",
                "spec": c.synthetic_spec(),
                "test_fraction": c.synth_test_fraction,
                "max_sentence_len": c.max_sentence_len,
            }),
            Stage::Corpus => json!({
                "source": "ingest",
                "max_sentence_len": c.max_sentence_len,
            }),
            Stage::TrainNre => json!({
                "nre": c.nre_config(),
                "seeds": c.training_seeds(),
                "word_vectors": c.word_vectors.is_some(),
            }),
            Stage::Extract => json!({
                "agents": c.eta_grid.iter().map(|&e| c.agent_config(e)).collect::<Vec<_>>(),
                "seed": c.seed,
            }),
            Stage::Refine => json!({
                "n_r": c.n_r, "n_a": c.n_a, "p_h": c.p_h, "p_l": c.p_l, "seed": c.seed,
            }),
            Stage::Fuse => json!({ "fusion": c.fusion, "delta": c.wlf_delta }),
            Stage::Retrain => json!({
                "nre": c.nre_config(),
                "seeds": c.seeds,
                "word_vectors": c.word_vectors.is_some(),
            }),
            Stage::Eval => json!({ "seeds": c.seeds }),
            Stage::Report => json!({}),
        }
    }

    fn word_vector_hash(&self) -> Result<String, PipelineError> {
        match &self.config.word_vectors {
            Some(p) => hash_file(p),
            None => Ok(String::new()),
        }
    }

    /// Shared bookkeeping: checks upstream manifests, skips the stage when its
    /// key is unchanged and records a manifest once `body` completes.
    fn run_stage<F>(
        &self,
        stage: Stage,
        corpus_source: &str,
        extra: &str,
        force: bool,
        body: F,
    ) -> Result<StageOutcome, PipelineError>
    where
        F: FnOnce(&Self) -> Result<bool, PipelineError>,
    {
        let upstream = self.store.upstream_keys(stage)?;
        for &up in stage.upstream() {
            let m = self.store.manifest(up)?.expect("checked by upstream_keys");
            let expected = hash_json(&self.stage_config(up, &m.note));
            if m.config_hash != expected {
                warn!(
                    "`{up}` outputs were produced with a different configuration; \
                     re-run `{}` to pick up the change",
                    up.command()
                );
            }
        }
        let config_hash = hash_json(&self.stage_config(stage, corpus_source));
        let key = stage_key(stage, &config_hash, &upstream, extra);
        if !force {
            if let Some(m) = self.store.manifest(stage)? {
                if m.key == key {
                    info!("{stage}: up to date");
                    return Ok(StageOutcome::UpToDate);
                }
            }
        }
        self.store.remove_manifest(stage)?;
        info!("{stage}: running");
        if !body(self)? {
            return Ok(StageOutcome::Pending);
        }
        self.store.write_manifest(
            &Manifest {
                stage: stage.name().to_string(),
                key,
                config_hash,
                upstream,
                note: corpus_source.to_string(),
            },
            stage,
        )?;
        info!("{stage}: done");
        Ok(StageOutcome::Ran)
    }

    pub fn load_train(&self) -> Result<Corpus, PipelineError> {
        Ok(load_corpus_with_limit(
            &self.store.train_corpus(),
            self.config.max_sentence_len,
        )?)
    }

    pub fn load_test(&self) -> Result<Corpus, PipelineError> {
        Ok(load_corpus_with_limit(
            &self.store.test_corpus(),
            self.config.max_sentence_len,
        )?)
    }

    fn load_vocab(&self) -> Result<Vocabulary, PipelineError> {
        Ok(Vocabulary::load(&self.store.vocabulary())?)
    }

    fn fresh_model(&self, vocab: Vocabulary, seed: u64) -> Result<NreModel, PipelineError> {
        let mut m = NreModel::new(self.config.nre_config(), vocab, seed)?;
        if let Some(p) = &self.config.word_vectors {
            let n = m.load_word_vectors(p)?;
            info!("loaded {n} pretrained word vectors");
        }
        Ok(m)
    }

    pub fn load_model(&self, path: &Path) -> Result<NreModel, PipelineError> {
        Ok(NreModel::from_checkpoint(
            self.config.nre_config(),
            self.load_vocab()?,
            &read_bytes(path)?,
        )?)
    }

    fn save_corpora(&self, train: &Corpus, test: &Corpus) -> Result<(), PipelineError> {
        save_corpus(train, &self.store.train_corpus())?;
        save_corpus(test, &self.store.test_corpus())?;
        train.vocabulary.save(&self.store.vocabulary())?;
        Ok(())
    }

    /// Generates a synthetic corpus and splits it into train and test parts.
    pub fn synth(&self) -> Result<StageOutcome, PipelineError> {
        self.run_stage(Stage::Corpus, "synth", "", false, |p| {
            let full = generate_synthetic(&p.config.synthetic_spec())?;
            let mut order: Vec<usize> = (0..full.len()).collect();
            SeededRng::new(p.config.seed).shuffle(&mut order);
            let n_test = (full.len() as f64 * p.config.synth_test_fraction).round() as usize;
            let (test_pos, train_pos) = order.split_at(n_test);
            let mut train_pos = train_pos.to_vec();
            let mut test_pos = test_pos.to_vec();
            train_pos.sort_unstable();
            test_pos.sort_unstable();
            p.save_corpora(&full.subset(&train_pos), &full.subset(&test_pos))?;
            Ok(true)
        })
    }

    /// Copies a training and a test corpus into the store after validation.
    pub fn ingest(&self) -> Result<StageOutcome, PipelineError> {
        let (Some(train), Some(test)) = (&self.config.corpus, &self.config.test_corpus) else {
            return Err(PipelineError::Config(
                "ingest needs both `corpus` and `test_corpus`".into(),
            ));
        };
        let extra = format!("{}:{}", hash_file(train)?, hash_file(test)?);
        self.run_stage(Stage::Corpus, "ingest", &extra, false, |p| {
            let max = p.config.max_sentence_len;
            let train = load_corpus_with_limit(train, max)?;
            let test = load_corpus_with_limit(test, max)?;
            if train.relation != test.relation && !test.is_empty() {
                return Err(PipelineError::Config(format!(
                    "train relation {:?} differs from test relation {:?}",
                    train.relation, test.relation
                )));
            }
            p.save_corpora(&train, &test)?;
            Ok(true)
        })
    }

    /// Trains one classifier per seed on the DS labels.
    pub fn train_nre(&self) -> Result<StageOutcome, PipelineError> {
        let extra = self.word_vector_hash()?;
        self.run_stage(Stage::TrainNre, "", &extra, false, |p| {
            let corpus = p.load_train()?;
            let labels = corpus.ds_targets();
            for seed in p.config.training_seeds() {
                let init = p.fresh_model(p.load_vocab()?, seed)?;
                let out = train(&init, &corpus, &labels, seed)?;
                info!("train-nre seed {seed}: best epoch {}", out.best_epoch);
                write_bytes(&p.store.ds_model(seed), &out.model.checkpoint())?;
                write_jsonl(&p.store.ds_log(seed), &out.log)?;
            }
            Ok(true)
        })
    }

    /// Trains one agent per sparsity weight, extracts patterns and aggregates
    /// them over the training corpus.
    pub fn extract(&self) -> Result<StageOutcome, PipelineError> {
        self.run_stage(Stage::Extract, "", "", false, |p| {
            let corpus = p.load_train()?;
            let model = p.load_model(&p.store.ds_model(p.config.seed))?;
            let mut records: Vec<ExtractionRecord> = Vec::new();
            let mut rewards = Vec::new();
            for &eta in &p.config.eta_grid {
                let cfg = p.config.agent_config(eta);
                let out = train_agent(&model, &corpus, &cfg, p.config.seed)?;
                info!(
                    "agent eta={eta}: reward {:.4} -> {:.4}",
                    out.epoch_rewards.first().copied().unwrap_or(0.0),
                    out.epoch_rewards.last().copied().unwrap_or(0.0)
                );
                write_bytes(&p.store.agent(eta), &out.agent.checkpoint())?;
                records.extend(extract(&out.agent, &model, &corpus, &out.filtered)?);
                rewards.push(AgentRewards {
                    eta,
                    epoch_rewards: out.epoch_rewards,
                    filtered: out.filtered.len(),
                });
            }
            write_jsonl(&p.store.extractions(), &records)?;
            write_json(&p.store.agent_rewards(), &rewards)?;
            let pairs = resolve_extractions(&corpus, &records)?;
            check_soundness(&pairs)?;
            let table = aggregate(pairs.iter().map(|(i, r)| (*i, &r.actions)), &corpus)?;
            write_pattern_table(
                &table,
                &corpus,
                &p.store.pattern_text(),
                &p.store.pattern_json(),
            )?;
            info!("{} distinct patterns", table.len());
            Ok(true)
        })
    }

    /// Reloads an agent trained by `extract`.
    pub fn load_agent(&self, eta: f64) -> Result<PolicyNetwork, PipelineError> {
        Ok(PolicyNetwork::from_checkpoint(
            self.config.nre_config().input_dim(),
            self.config.agent_config(eta),
            &read_bytes(&self.store.agent(eta))?,
        )?)
    }

    /// The `n_r` most representative patterns outside the coverage hierarchy.
    pub fn select_patterns(&self, corpus: &Corpus) -> Result<Vec<Pattern>, PipelineError> {
        let table = read_pattern_table(&self.store.pattern_json(), corpus)?;
        let h = build_hierarchy(&table);
        Ok(select_top(&table, &h, self.config.n_r))
    }

    fn fresh_session(&self, corpus: &Corpus) -> Result<AnnotationSession, PipelineError> {
        let selected = self.select_patterns(corpus)?;
        let mut text = String::new();
        for p in &selected {
            text.push_str(p.canonical_text());
            text.push('\n');
        }
        write_bytes(&self.store.selected_patterns(), text.as_bytes())?;
        let c = &self.config;
        let s = create_session(&selected, corpus, c.n_a, c.seed, c.p_h, c.p_l)?;
        s.save(&self.store.session())?;
        write_bytes(&self.store.journal(), b"")?;
        Ok(s)
    }

    /// Labels `id`, appending to the journal before the snapshot is updated.
    fn record(
        &self,
        session: &mut AnnotationSession,
        id: &str,
        label: Label,
    ) -> Result<(), PipelineError> {
        let ts = session.record(id, label)?;
        append_journal(
            &self.store.journal(),
            &JournalEntry {
                ts,
                instance_id: id.to_string(),
                label: label.sign() as i64,
            },
        )?;
        Ok(())
    }

    /// Samples items for the selected patterns and collects their labels.
    pub fn refine(&self, source: &AnnotationSource) -> Result<StageOutcome, PipelineError> {
        let extra = match source {
            AnnotationSource::None => "none".to_string(),
            AnnotationSource::Oracle => "oracle".to_string(),
            AnnotationSource::Journal(p) => format!("journal:{}", hash_file(p)?),
            AnnotationSource::Serve { .. } => "serve".to_string(),
        };
        let force = matches!(
            source,
            AnnotationSource::Serve { .. } | AnnotationSource::None
        );
        self.run_stage(Stage::Refine, "", &extra, force, |p| {
            let corpus = p.load_train()?;
            let mut session = match source {
                AnnotationSource::Serve { .. } | AnnotationSource::None => {
                    p.resume_or_create_session(&corpus)?
                }
                _ => p.fresh_session(&corpus)?,
            };
            match source {
                AnnotationSource::None => {
                    info!(
                        "session with {} items written to {}; annotate with --serve, \
                         --annotations <journal> or --oracle",
                        session.items().len(),
                        p.store.session().display()
                    );
                    return Ok(false);
                }
                AnnotationSource::Oracle => {
                    let items: Vec<String> =
                        session.items().into_iter().map(String::from).collect();
                    for id in items {
                        let gold = corpus.get(&id).and_then(|i| i.gold_label).ok_or_else(|| {
                            patdiag_core::refinement::RefinementError::MissingGold(id.clone())
                        })?;
                        p.record(&mut session, &id, gold)?;
                    }
                }
                AnnotationSource::Journal(path) => {
                    for e in read_journal(path)? {
                        p.record(&mut session, &e.instance_id, parse_label(e.label)?)?;
                    }
                }
                AnnotationSource::Serve { port } => {
                    session = crate::server::run_blocking(
                        session,
                        corpus,
                        crate::server::SessionFiles::from_store(&p.store),
                        *port,
                    )?;
                    return Ok(session.finalized);
                }
            }
            let verdicts = session.finalize()?;
            session.save(&p.store.session())?;
            write_verdicts(&p.store.verdicts(), &verdicts)?;
            Ok(true)
        })
    }

    fn resume_or_create_session(
        &self,
        corpus: &Corpus,
    ) -> Result<AnnotationSession, PipelineError> {
        if self.store.session().exists() {
            let s = AnnotationSession::load(&self.store.session())?;
            let selected = self.select_patterns(corpus)?;
            let same = s.patterns.len() == selected.len()
                && s.patterns
                    .iter()
                    .zip(&selected)
                    .all(|(a, b)| &a.pattern == b)
                && s.p_h == self.config.p_h
                && s.p_l == self.config.p_l;
            if same && !s.finalized {
                info!("resuming session at revision {}", s.revision);
                return Ok(s);
            }
        }
        self.fresh_session(corpus)
    }

    /// Produces the training targets for `retrain`.
    pub fn fuse(&self) -> Result<StageOutcome, PipelineError> {
        self.run_stage(Stage::Fuse, "", "", false, |p| {
            let corpus = p.load_train()?;
            let session = AnnotationSession::load(&p.store.session())?;
            let verdicts = read_verdicts(&p.store.verdicts())?;
            let (pos, neg) = accepted_patterns(&verdicts);
            let annotated = session.annotated();
            let labels = match p.config.fusion {
                FusionMode::DsOnly => corpus.ds_targets(),
                FusionMode::GoldMix => gold_mix(&corpus, &annotated),
                // With no accepted pattern DS is the only labeling function.
                FusionMode::Wlf if pos.is_empty() && neg.is_empty() => corpus.ds_targets(),
                FusionMode::Wlf => {
                    let matrix = apply_lfs(&corpus, &pos, &neg)?;
                    let labeled: Vec<(Vec<i8>, Label)> = annotated
                        .iter()
                        .map(|(id, y)| {
                            let pos = corpus
                                .position(id)
                                .ok_or_else(|| patdiag_core::Error::UnknownInstance(id.clone()))?;
                            Ok((matrix.rows[pos].clone(), *y))
                        })
                        .collect::<Result<_, PipelineError>>()?;
                    let params = estimate(&labeled, &matrix.lf_names, p.config.wlf_delta)?;
                    params.save(&p.store.wlf_params())?;
                    denoise(&matrix, &params)?
                }
            };
            write_label_file(&p.store.soft_labels(), &corpus, &labels)?;
            Ok(true)
        })
    }

    /// Trains fresh classifiers on the fused labels.
    pub fn retrain(&self) -> Result<StageOutcome, PipelineError> {
        let extra = self.word_vector_hash()?;
        self.run_stage(Stage::Retrain, "", &extra, false, |p| {
            let corpus = p.load_train()?;
            let labels = read_label_file(&p.store.soft_labels(), &corpus)?;
            for &seed in &p.config.seeds {
                let init = p.fresh_model(p.load_vocab()?, seed)?;
                let out = train(&init, &corpus, &labels, seed)?;
                info!("retrain seed {seed}: best epoch {}", out.best_epoch);
                write_bytes(&p.store.retrained_model(seed), &out.model.checkpoint())?;
                write_jsonl(&p.store.retrained_log(seed), &out.log)?;
            }
            Ok(true)
        })
    }

    /// Scores DS-trained and retrained classifiers on the test corpus.
    pub fn eval(&self) -> Result<StageOutcome, PipelineError> {
        self.run_stage(Stage::Eval, "", "", false, |p| {
            let test = p.load_test()?;
            let gold: Vec<i8> = test
                .instances
                .iter()
                .map(|i| {
                    i.gold_label.map(Label::sign).ok_or_else(|| {
                        PipelineError::Usage(format!("test instance {:?} has no gold label", i.id))
                    })
                })
                .collect::<Result<_, _>>()?;
            let mut rows = Vec::new();
            for &seed in &p.config.seeds {
                let score = |path: &Path| -> Result<_, PipelineError> {
                    let m = p.load_model(path)?;
                    Ok(prf1(&m.predict_corpus(&test), &gold, 0.5)?)
                };
                rows.push(SeedRow {
                    seed,
                    ds: score(&p.store.ds_model(seed))?,
                    denoised: score(&p.store.retrained_model(seed))?,
                });
            }
            let mode = p
                .store
                .manifest(Stage::Fuse)?
                .map(|_| p.config.fusion.to_string())
                .unwrap_or_default();
            write_json(
                &p.store.eval_report(),
                &EvalFile {
                    relation: test.relation.clone(),
                    mode,
                    per_seed: rows,
                },
            )?;
            Ok(true)
        })
    }

    /// Averages the evaluation over seeds and renders the report.
    pub fn report(&self) -> Result<StageOutcome, PipelineError> {
        self.run_stage(Stage::Report, "", "", false, |p| {
            let text = std::fs::read_to_string(p.store.eval_report())
                .map_err(|e| PipelineError::io(&p.store.eval_report(), e))?;
            let eval: EvalFile = serde_json::from_str(&text)?;
            let report = Report::new(eval.relation, eval.mode, eval.per_seed)?;
            write_json(&p.store.report_json(), &report)?;
            write_bytes(&p.store.report_text(), report.render_text().as_bytes())?;
            Ok(true)
        })
    }

    pub fn read_report(&self) -> Result<Report, PipelineError> {
        let path = self.store.report_json();
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// DS label quality on the annotated instances plus verdict counts.
    pub fn diagnose(&self) -> Result<Diagnosis, PipelineError> {
        if self.store.manifest(Stage::Refine)?.is_none() {
            return Err(PipelineError::Usage(
                "diagnose needs a completed `refine` stage; run `patdiag refine` first".into(),
            ));
        }
        let corpus = self.load_train()?;
        let session = AnnotationSession::load(&self.store.session())?;
        let verdicts = read_verdicts(&self.store.verdicts())?;
        let annotated = session.annotated();
        if annotated.is_empty() {
            return Err(PipelineError::NoAnnotations);
        }
        let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
        for (id, human) in &annotated {
            let ds = corpus
                .get(id)
                .ok_or_else(|| patdiag_core::Error::UnknownInstance(id.clone()))?
                .ds_label;
            correct += (ds == *human) as usize;
            match (ds.is_positive(), human.is_positive()) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let m = patdiag_core::eval::Metrics::from_counts(tp, fp, fn_);
        let count = |c: VerdictClass| verdicts.iter().filter(|v| v.class == c).count();
        let d = Diagnosis {
            relation: corpus.relation.clone(),
            annotated: annotated.len(),
            ds_precision: m.precision,
            ds_recall: m.recall,
            ds_accuracy: correct as f64 / annotated.len() as f64,
            positive_patterns: count(VerdictClass::Positive),
            negative_patterns: count(VerdictClass::Negative),
            discarded_patterns: count(VerdictClass::Discarded),
        };
        write_json(&self.store.diagnosis_json(), &d)?;
        write_bytes(&self.store.diagnosis_text(), d.render_text().as_bytes())?;
        Ok(d)
    }

    /// Runs every stage from `synth` to `report` with oracle annotation.
    pub fn run_synthetic_oracle(&self) -> Result<Report, PipelineError> {
        self.synth()?;
        self.train_nre()?;
        self.extract()?;
        self.refine(&AnnotationSource::Oracle)?;
        self.fuse()?;
        self.retrain()?;
        self.eval()?;
        self.report()?;
        self.read_report()
    }

    pub fn read_extractions(&self) -> Result<Vec<ExtractionRecord>, PipelineError> {
        read_jsonl(&self.store.extractions())
    }

    pub fn read_agent_rewards(&self) -> Result<Vec<AgentRewards>, PipelineError> {
        let path = self.store.agent_rewards();
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn resolve_extractions<'c, 'r>(
    corpus: &'c Corpus,
    records: &'r [ExtractionRecord],
) -> Result<Vec<(&'c patdiag_core::corpus::Instance, &'r ExtractionRecord)>, PipelineError> {
    records
        .iter()
        .map(|r| {
            corpus
                .get(&r.instance_id)
                .map(|i| (i, r))
                .ok_or_else(|| patdiag_core::Error::UnknownInstance(r.instance_id.clone()).into())
        })
        .collect()
}

fn check_soundness(
    pairs: &[(&patdiag_core::corpus::Instance, &ExtractionRecord)],
) -> Result<(), PipelineError> {
    for (inst, rec) in pairs {
        let p = induce(inst, &rec.actions)?;
        if !matches(&p, inst) {
            return Err(PipelineError::Unsound {
                pattern: p.to_string(),
                instance: inst.id.clone(),
            });
        }
    }
    Ok(())
}

/// Writes a config file (used by tests and the README quick start).
pub fn write_config(path: &Path, config: &PipelineConfig) -> Result<(), PipelineError> {
    let mut f = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    f.write_all(config.to_toml_string().as_bytes())
        .map_err(|e| PipelineError::io(path, e))
}
