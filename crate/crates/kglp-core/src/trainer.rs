//! Negative-sampling training loop: Adam with a linear warmup/decay
//! schedule, per-split graph feature preparation, and best-validation
//! checkpoint retention.
//!
//! Only training triples ever reach the loss; graph features for validation
//! and test relations are built from their own split's triples in the
//! truly-inductive setting and from the training triples otherwise.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::evaluator::{self, CandidatePolicy, EvalError, EvalFeatures};
use crate::features::{
    BowFeatures, FeatureError, FeatureMatrix, FeatureSource, RelationFeatureMode, TokenVocabulary,
};
use crate::kg::{
    ClassifyError, EntityId, InductiveSetting, RelationId, Split, SplitDataset, Triple,
};
use crate::model::{
    batch_loss_and_grads, Batch, Corruption, CorruptionSide, FeatureInput, LossKind, ModelConfig,
    ModelError, ModelParams, PositiveExample, TokenTable,
};
use crate::relwalk::{embed_relations, WalkConfig, WalkError};
use crate::rng::{substream_rng, Stream};
use crate::weidner::build_network;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(&'static str),
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("{kind} `{id}` has no feature row")]
    MissingFeature { kind: &'static str, id: String },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("trainable bag-of-words inputs must share one token vocabulary")]
    MismatchedVocabularies,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Learning-rate schedule selection. The warmup/decay rule is the default;
/// constant reproduces setups trained without a schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LrSchedule {
    #[default]
    WarmupLinear,
    Constant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossChoice {
    #[default]
    Margin,
    Nll,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of total steps spent ramping up (0.2 = 20% warmup).
    pub warmup_fraction: f64,
    pub schedule: LrSchedule,
    pub loss: LossChoice,
    pub margin: f64,
    pub l2_coeff: f64,
    pub negatives_per_positive: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Validation ranking every this many epochs; 0 disables validation.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 64,
            learning_rate: 1e-4,
            warmup_fraction: 0.2,
            schedule: LrSchedule::WarmupLinear,
            loss: LossChoice::Margin,
            margin: 1.0,
            l2_coeff: 0.0,
            negatives_per_positive: 64,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(TrainError::Config("warmup_fraction must be in [0, 1)"));
        }
        if self.negatives_per_positive == 0 {
            return Err(TrainError::Config("negatives_per_positive must be at least 1"));
        }
        if self.loss == LossChoice::Margin && !(self.margin > 0.0) {
            return Err(TrainError::Config("margin must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::Config("betas must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn loss_kind(&self) -> LossKind {
        match self.loss {
            LossChoice::Margin => LossKind::Margin { gamma: self.margin },
            LossChoice::Nll => LossKind::Nll,
        }
    }
}

/// Piecewise-linear schedule: 0 → lr over the warmup steps, then lr → 0 at
/// `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, config: &TrainConfig) -> f64 {
    debug_assert!(step < total_steps);
    let warmup = config.warmup_fraction * total_steps as f64;
    let s = step as f64;
    if s < warmup {
        config.learning_rate * s / warmup
    } else {
        config.learning_rate * (total_steps as f64 - s) / (total_steps as f64 - warmup)
    }
}

/// `count` corruptions of `positive`: the replaced side is chosen uniformly
/// per negative and the replacement drawn uniformly from `entity_pool`. A
/// corruption equal to the positive is redrawn once, then kept regardless.
pub fn sample_negatives(
    positive: Triple,
    count: usize,
    entity_pool: &[EntityId],
    rng: &mut impl Rng,
) -> Vec<Triple> {
    debug_assert!(!entity_pool.is_empty());
    let draw = |rng: &mut dyn rand::RngCore| {
        let entity = entity_pool[rand::Rng::gen_range(rng, 0..entity_pool.len())];
        if rand::Rng::gen_bool(rng, 0.5) {
            Triple::new(entity, positive.relation, positive.tail)
        } else {
            Triple::new(positive.head, positive.relation, entity)
        }
    };
    (0..count)
        .map(|_| {
            let candidate = draw(rng);
            if candidate == positive {
                draw(rng)
            } else {
                candidate
            }
        })
        .collect()
}

/// Graph-based relation features per split role.
#[derive(Clone, Debug)]
pub struct SplitRelationFeatures {
    pub setting: InductiveSetting,
    /// How many relation networks were built (3 when truly-inductive).
    pub networks_built: usize,
    matrices: [FeatureMatrix; 3],
    /// Relations that received the zero fallback vector, per split.
    pub isolated: Vec<(Split, String)>,
}

impl SplitRelationFeatures {
    pub fn for_split(&self, split: Split) -> &FeatureMatrix {
        &self.matrices[split as usize]
    }
}

/// Builds graph features independently per split in the truly-inductive
/// setting; otherwise a single network from the training triples serves all
/// splits.
pub fn prepare_split_graph_features(
    splits: &SplitDataset,
    walk_config: &WalkConfig,
) -> Result<SplitRelationFeatures, TrainError> {
    let setting = splits.classify_setting()?;
    let embed_split = |split: Split| -> Result<(FeatureMatrix, Vec<String>), TrainError> {
        let graph = splits.graph(split);
        let network = build_network(graph);
        let embeddings = embed_relations(&network, walk_config)?;
        let isolated = embeddings
            .isolated()
            .iter()
            .map(|&r| network.relations().name(r).to_string())
            .collect();
        Ok((
            FeatureMatrix::from_node_embeddings(&embeddings, &network),
            isolated,
        ))
    };

    if setting == InductiveSetting::TrulyInductive {
        let mut matrices = Vec::with_capacity(3);
        let mut isolated = Vec::new();
        for split in Split::ALL {
            let (matrix, iso) = embed_split(split)?;
            isolated.extend(iso.into_iter().map(|name| (split, name)));
            matrices.push(matrix);
        }
        Ok(SplitRelationFeatures {
            setting,
            networks_built: 3,
            matrices: matrices.try_into().expect("three splits"),
            isolated,
        })
    } else {
        let (matrix, iso) = embed_split(Split::Train)?;
        Ok(SplitRelationFeatures {
            setting,
            networks_built: 1,
            matrices: [matrix.clone(), matrix.clone(), matrix],
            isolated: iso.into_iter().map(|name| (Split::Train, name)).collect(),
        })
    }
}

/// A feature source that is either frozen rows or a trainable bag-of-words
/// composition over the shared token table.
#[derive(Clone, Copy, Debug)]
pub enum FeatureSet<'a> {
    Static(&'a FeatureMatrix),
    TrainableBow {
        vocab: &'a TokenVocabulary,
        bow: &'a BowFeatures,
    },
}

impl<'a> FeatureSet<'a> {
    fn dim(&self) -> usize {
        match self {
            FeatureSet::Static(m) => m.dim(),
            FeatureSet::TrainableBow { vocab, .. } => vocab.dim(),
        }
    }

    fn input_for(&self, name: &str) -> Option<FeatureInput<'a>> {
        match self {
            FeatureSet::Static(m) => m.row_of(name).map(FeatureInput::Row),
            FeatureSet::TrainableBow { bow, .. } => bow
                .matrix
                .row_index(name)
                .map(|i| FeatureInput::Tokens(&bow.compositions[i])),
        }
    }
}

/// Relation features offered to the trainer.
#[derive(Clone, Copy, Debug)]
pub struct RelationBundle<'a> {
    pub mode: RelationFeatureMode,
    pub text: Option<FeatureSet<'a>>,
    pub graph: Option<&'a SplitRelationFeatures>,
}

/// Per-step training event for streaming logs.
#[derive(Clone, Copy, Debug)]
pub struct StepEvent {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationPoint {
    pub epoch: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

/// Loss, learning-rate, and validation traces of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epoch_mean_loss: Vec<f64>,
    pub lr_trace: Vec<f64>,
    pub validation: Vec<ValidationPoint>,
    pub best_epoch: Option<usize>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    fn new(len: usize) -> Self {
        AdamState {
            m: alloc::vec![0.0; len],
            v: alloc::vec![0.0; len],
        }
    }

    fn update_entry(&mut self, w: &mut f64, g: f64, i: usize, t: u64, cfg: &TrainConfig, lr: f64) {
        self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
        self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = self.m[i] / (1.0 - num_traits::Float::powi(cfg.beta1, t as i32));
        let v_hat = self.v[i] / (1.0 - num_traits::Float::powi(cfg.beta2, t as i32));
        *w -= lr * m_hat / (num_traits::Float::sqrt(v_hat) + cfg.epsilon);
    }

    fn step_dense(&mut self, w: &mut [f64], g: &[f64], t: u64, cfg: &TrainConfig, lr: f64) {
        for i in 0..w.len() {
            let grad = g[i];
            self.update_entry(&mut w[i], grad, i, t, cfg, lr);
        }
    }

    /// Sparse step over one row range; untouched rows keep their moments.
    fn step_rows(
        &mut self,
        w: &mut [f64],
        row: usize,
        dim: usize,
        g: &[f64],
        t: u64,
        cfg: &TrainConfig,
        lr: f64,
    ) {
        for j in 0..dim {
            let i = row * dim + j;
            self.update_entry(&mut w[i], g[j], i, t, cfg, lr);
        }
    }
}

/// Recomputes bag-of-words rows from the current token table, e.g. for
/// evaluation after (or during) training with a trainable table.
pub fn recompose_bow_matrix(table: &TokenTable, bow: &BowFeatures) -> FeatureMatrix {
    let dim = table.dim();
    let mut data = Vec::with_capacity(bow.matrix.len() * dim);
    for composition in &bow.compositions {
        let mut row = alloc::vec![0.0; dim];
        if !composition.is_empty() {
            for &tok in composition {
                crate::math::axpy(&mut row, 1.0, table.row(tok));
            }
            let inv = 1.0 / composition.len() as f64;
            row.iter_mut().for_each(|x| *x *= inv);
        }
        data.extend_from_slice(&row);
    }
    let mut out = FeatureMatrix::new(bow.matrix.ids().to_vec(), data, dim, FeatureSource::Bow)
        .expect("finite table rows");
    out.set_trainable(true);
    out
}

/// Trains with no step observer.
pub fn train(
    splits: &SplitDataset,
    entities: &FeatureSet<'_>,
    relations: &RelationBundle<'_>,
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory), TrainError> {
    train_with_observer(splits, entities, relations, model_config, config, &mut |_| {})
}

/// Full training loop; `observer` receives one event per optimizer step.
pub fn train_with_observer(
    splits: &SplitDataset,
    entities: &FeatureSet<'_>,
    relations: &RelationBundle<'_>,
    model_config: ModelConfig,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&StepEvent),
) -> Result<(ModelParams, TrainHistory), TrainError> {
    config.validate()?;
    model_config.validate()?;
    if model_config.relation_mode != relations.mode {
        return Err(TrainError::Config(
            "model relation mode differs from the relation bundle mode",
        ));
    }
    let train_triples = splits.triples(Split::Train);
    if train_triples.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }

    if entities.dim() != model_config.entity_feature_dim {
        return Err(TrainError::Config("entity feature dim mismatch"));
    }
    let need_text = matches!(
        relations.mode,
        RelationFeatureMode::TextOnly | RelationFeatureMode::Concat
    );
    let need_graph = matches!(
        relations.mode,
        RelationFeatureMode::GraphOnly | RelationFeatureMode::Concat
    );
    let rel_text = match (need_text, relations.text) {
        (true, Some(set)) => {
            if set.dim() != model_config.relation_feature_dim {
                return Err(TrainError::Config("relation text feature dim mismatch"));
            }
            Some(set)
        }
        (true, None) => return Err(TrainError::Config("relation mode requires text features")),
        (false, _) => None,
    };
    let rel_graph = match (need_graph, relations.graph) {
        (true, Some(g)) => {
            if g.for_split(Split::Train).dim() != model_config.relation_feature_dim {
                return Err(TrainError::Config("relation graph feature dim mismatch"));
            }
            Some(g)
        }
        (true, None) => return Err(TrainError::Config("relation mode requires graph features")),
        (false, _) => None,
    };

    // One trainable token table, shared by every trainable source.
    let mut table_vocab: Option<&TokenVocabulary> = None;
    for set in [Some(*entities), rel_text].into_iter().flatten() {
        if let FeatureSet::TrainableBow { vocab, .. } = set {
            match table_vocab {
                None => table_vocab = Some(vocab),
                Some(existing) if core::ptr::eq(existing, vocab) => {}
                Some(_) => return Err(TrainError::MismatchedVocabularies),
            }
        }
    }
    let token_table = table_vocab.map(TokenTable::from_vocab);

    // Resolve every train id to its feature input up front.
    let entity_input = |e: EntityId| -> Result<FeatureInput<'_>, TrainError> {
        let name = splits.entities().name(e);
        entities
            .input_for(name)
            .ok_or_else(|| TrainError::MissingFeature {
                kind: "entity",
                id: name.to_string(),
            })
    };
    let rel_text_input = |r: RelationId| -> Result<Option<FeatureInput<'_>>, TrainError> {
        match &rel_text {
            None => Ok(None),
            Some(set) => {
                let name = splits.relations().name(r);
                set.input_for(name)
                    .map(Some)
                    .ok_or_else(|| TrainError::MissingFeature {
                        kind: "relation text",
                        id: name.to_string(),
                    })
            }
        }
    };
    let rel_graph_row = |r: RelationId| -> Result<Option<&[f64]>, TrainError> {
        match &rel_graph {
            None => Ok(None),
            Some(g) => {
                let name = splits.relations().name(r);
                g.for_split(Split::Train)
                    .row_of(name)
                    .map(Some)
                    .ok_or_else(|| TrainError::MissingFeature {
                        kind: "relation graph",
                        id: name.to_string(),
                    })
            }
        }
    };
    for t in train_triples {
        entity_input(t.head)?;
        entity_input(t.tail)?;
        rel_text_input(t.relation)?;
        rel_graph_row(t.relation)?;
    }

    let pool: Vec<EntityId> = splits.entity_ids(Split::Train).into_iter().collect();
    let mut params = ModelParams::init(model_config, config.seed, token_table)?;
    let mut history = TrainHistory::default();

    if config.epochs == 0 {
        return Ok((params, history));
    }

    let n = train_triples.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;
    let loss_kind = config.loss_kind();

    let mut adam_entity = AdamState::new(params.entity_proj().weights().len());
    let mut adam_relation = params
        .separate_relation_proj_mut()
        .map(|p| AdamState::new(p.weights().len()));
    let mut adam_tokens = params
        .token_table()
        .map(|t| AdamState::new(t.vectors().len()));

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut step_index = 0usize;

    for epoch in 0..config.epochs {
        // Seeded shuffle of triple indices.
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = substream_rng(config.seed, Stream::Batches, epoch as u64, 0);
        for i in (1..n).rev() {
            order.swap(i, shuffle_rng.gen_range(0..=i));
        }

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut batch = Batch::default();
            for &i in chunk {
                let t = train_triples[i];
                let mut neg_rng =
                    substream_rng(config.seed, Stream::Negatives, epoch as u64, i as u64);
                let corrupted = sample_negatives(
                    t,
                    config.negatives_per_positive,
                    &pool,
                    &mut neg_rng,
                );
                let mut negatives = Vec::with_capacity(corrupted.len());
                for c in corrupted {
                    let (side, entity) = if c.head != t.head {
                        (CorruptionSide::Head, c.head)
                    } else {
                        (CorruptionSide::Tail, c.tail)
                    };
                    negatives.push(Corruption {
                        side,
                        feature: entity_input(entity)?,
                    });
                }
                batch.examples.push(PositiveExample {
                    head: entity_input(t.head)?,
                    tail: entity_input(t.tail)?,
                    rel_text: rel_text_input(t.relation)?,
                    rel_graph: rel_graph_row(t.relation)?,
                    negatives,
                });
            }

            let (loss, grads) =
                batch_loss_and_grads(&params, &batch, loss_kind, config.l2_coeff)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    step: step_index,
                });
            }

            let lr = match config.schedule {
                LrSchedule::WarmupLinear => lr_at(step_index, total_steps, config),
                LrSchedule::Constant => config.learning_rate,
            };
            let t_adam = (step_index + 1) as u64;
            adam_entity.step_dense(
                params.entity_proj_mut().weights_mut(),
                &grads.entity_proj,
                t_adam,
                config,
                lr,
            );
            if let (Some(state), Some(g)) = (&mut adam_relation, &grads.relation_proj) {
                state.step_dense(
                    params
                        .separate_relation_proj_mut()
                        .expect("separate policy")
                        .weights_mut(),
                    g,
                    t_adam,
                    config,
                    lr,
                );
            }
            if let Some(state) = &mut adam_tokens {
                let table = params.token_table_mut().expect("token table");
                let dim = table.dim();
                for (&row, g) in &grads.token_rows {
                    state.step_rows(table.vectors_mut(), row, dim, g, t_adam, config, lr);
                }
            }

            epoch_loss += loss * chunk.len() as f64;
            history.lr_trace.push(lr);
            observer(&StepEvent {
                epoch,
                step: step_index,
                loss,
                lr,
            });
            step_index += 1;
        }
        history.epoch_mean_loss.push(epoch_loss / n as f64);

        let run_validation = config.eval_every > 0
            && (epoch + 1) % config.eval_every == 0
            && !splits.triples(Split::Valid).is_empty();
        if run_validation {
            let report = validation_report(splits, entities, rel_text, rel_graph, &params)?;
            history.validation.push(ValidationPoint {
                epoch,
                mrr: report.mrr,
                hits1: report.hits1,
                hits3: report.hits3,
                hits10: report.hits10,
            });
            let improved = best.as_ref().map(|(mrr, _, _)| report.mrr > *mrr).unwrap_or(true);
            if improved {
                best = Some((report.mrr, epoch, params.clone()));
            }
        }
    }

    if let Some((_, epoch, best_params)) = best {
        history.best_epoch = Some(epoch);
        Ok((best_params, history))
    } else {
        Ok((params, history))
    }
}

fn validation_report(
    splits: &SplitDataset,
    entities: &FeatureSet<'_>,
    rel_text: Option<FeatureSet<'_>>,
    rel_graph: Option<&SplitRelationFeatures>,
    params: &ModelParams,
) -> Result<evaluator::RankingReport, TrainError> {
    // Trainable sources are recomposed from the current token table so the
    // ranking sees the trained vectors.
    let entity_matrix = match entities {
        FeatureSet::Static(m) => (*m).clone(),
        FeatureSet::TrainableBow { bow, .. } => {
            recompose_bow_matrix(params.token_table().expect("token table"), bow)
        }
    };
    let text_matrix = match rel_text {
        None => None,
        Some(FeatureSet::Static(m)) => Some(m.clone()),
        Some(FeatureSet::TrainableBow { bow, .. }) => Some(recompose_bow_matrix(
            params.token_table().expect("token table"),
            bow,
        )),
    };
    let features = EvalFeatures {
        entities: &entity_matrix,
        rel_text: text_matrix.as_ref(),
        rel_graph: rel_graph.map(|g| g.for_split(Split::Valid)),
    };
    Ok(evaluator::evaluate(
        params,
        splits,
        &features,
        Split::Valid,
        CandidatePolicy::UnionVocab,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use alloc::vec;

    fn lr_config(lr: f64, warmup: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            warmup_fraction: warmup,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lr_schedule_examples() {
        let cfg = lr_config(1e-3, 0.2);
        assert_eq!(lr_at(0, 100, &cfg), 0.0);
        assert!((lr_at(20, 100, &cfg) - 1e-3).abs() < 1e-18);
        assert!((lr_at(60, 100, &cfg) - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn lr_schedule_is_continuous_and_peaks_at_lr() {
        let cfg = lr_config(0.01, 0.3);
        let total = 200;
        let values: Vec<f64> = (0..total).map(|s| lr_at(s, total, &cfg)).collect();
        let max = values.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!((max - 0.01).abs() < 1e-12);
        for w in values.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.01 / 50.0, "jump {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_warmup_starts_at_full_rate() {
        let cfg = lr_config(0.5, 0.0);
        assert_eq!(lr_at(0, 10, &cfg), 0.5);
    }

    #[test]
    fn negatives_have_requested_count_and_side_variety() {
        let pool: Vec<EntityId> = (0..20).map(EntityId).collect();
        let positive = Triple::new(EntityId(0), RelationId(0), EntityId(1));
        let mut rng = stream_rng(4, Stream::Negatives);
        let negs = sample_negatives(positive, 64, &pool, &mut rng);
        assert_eq!(negs.len(), 64);
        let heads = negs.iter().filter(|n| n.head != positive.head).count();
        let tails = negs.iter().filter(|n| n.tail != positive.tail).count();
        assert!(heads > 10 && tails > 10, "heads {heads} tails {tails}");
        for n in &negs {
            assert_eq!(n.relation, positive.relation);
        }
    }

    #[test]
    fn degenerate_pool_reproduces_the_positive() {
        let pool = vec![EntityId(0)];
        let positive = Triple::new(EntityId(0), RelationId(0), EntityId(0));
        let mut rng = stream_rng(4, Stream::Negatives);
        let negs = sample_negatives(positive, 8, &pool, &mut rng);
        assert!(negs.iter().all(|n| *n == positive));
    }

    #[test]
    fn negative_sampling_is_deterministic_under_seed() {
        let pool: Vec<EntityId> = (0..50).map(EntityId).collect();
        let positive = Triple::new(EntityId(3), RelationId(1), EntityId(7));
        let a = sample_negatives(positive, 32, &pool, &mut stream_rng(9, Stream::Negatives));
        let b = sample_negatives(positive, 32, &pool, &mut stream_rng(9, Stream::Negatives));
        assert_eq!(a, b);
    }
}
