//! Trainable encoders and scoring functions.
//!
//! Entities and relations enter as fixed feature vectors (or trainable
//! bag-of-token compositions) and are mapped through bias-free linear
//! projections. Relation features may come from text, from the relation
//! network, or both; with both, each source passes through the same
//! projection and the results are concatenated, which doubles the output
//! dimension, so entity vectors are duplicated to match. Scoring is TransE
//! (L1 or L2) or ComplEx over the assembled vectors.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::features::{RelationFeatureMode, TokenVocabulary};
use crate::math;
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("complex scorer requires an even dimension, got {0}")]
    OddComplexDim(usize),
    #[error("relation mode requires a {0} feature")]
    MissingRelationFeature(&'static str),
    #[error("token features given but the model has no token table")]
    MissingTokenTable,
    #[error("shared projection requires equal feature dims (entity {entity}, relation {relation})")]
    SharingDimMismatch { entity: usize, relation: usize },
    #[error("invalid model config: {0}")]
    Config(&'static str),
    #[error("tensor `{0}` contains a non-finite value")]
    NonFinite(&'static str),
}

/// Norm used by the TransE scorer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

/// Scoring function selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scorer {
    #[cfg_attr(feature = "serde", serde(rename = "transe_l1"))]
    TransEL1,
    #[cfg_attr(feature = "serde", serde(rename = "transe_l2"))]
    TransEL2,
    #[cfg_attr(feature = "serde", serde(rename = "complex"))]
    Complex,
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scorer::TransEL1 => "transe_l1",
            Scorer::TransEL2 => "transe_l2",
            Scorer::Complex => "complex",
        };
        f.write_str(s)
    }
}

impl FromStr for Scorer {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transe_l1" => Ok(Scorer::TransEL1),
            "transe_l2" => Ok(Scorer::TransEL2),
            "complex" => Ok(Scorer::Complex),
            _ => Err(ModelError::Config("unknown scorer")),
        }
    }
}

/// Loss over one (positive score, negative score) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    Margin { gamma: f64 },
    Nll,
}

fn check_dims(h: &[f64], r: &[f64], t: &[f64]) -> Result<(), ModelError> {
    if h.len() != r.len() || h.len() != t.len() {
        return Err(ModelError::DimMismatch {
            expected: h.len(),
            got: if h.len() != r.len() { r.len() } else { t.len() },
        });
    }
    Ok(())
}

/// TransE: -‖h + r - t‖ under the chosen norm. Zero is maximal.
pub fn score_transe(h: &[f64], r: &[f64], t: &[f64], norm: Norm) -> Result<f64, ModelError> {
    check_dims(h, r, t)?;
    let mut acc = 0.0;
    match norm {
        Norm::L1 => {
            for i in 0..h.len() {
                acc += num_traits::Float::abs(h[i] + r[i] - t[i]);
            }
        }
        Norm::L2 => {
            for i in 0..h.len() {
                let d = h[i] + r[i] - t[i];
                acc += d * d;
            }
            acc = num_traits::Float::sqrt(acc);
        }
    }
    Ok(-acc)
}

/// ComplEx: Re(Σ h_i · r_i · conj(t_i)) with halves layout — the first half
/// of each vector holds real parts, the second half imaginary parts.
pub fn score_complex(h: &[f64], r: &[f64], t: &[f64]) -> Result<f64, ModelError> {
    check_dims(h, r, t)?;
    if h.len() % 2 != 0 {
        return Err(ModelError::OddComplexDim(h.len()));
    }
    let m = h.len() / 2;
    let mut acc = 0.0;
    for i in 0..m {
        let (a, b) = (h[i], h[m + i]);
        let (c, d) = (r[i], r[m + i]);
        let (e, f) = (t[i], t[m + i]);
        acc += e * (a * c - b * d) + f * (a * d + b * c);
    }
    Ok(acc)
}

pub fn score(scorer: Scorer, h: &[f64], r: &[f64], t: &[f64]) -> Result<f64, ModelError> {
    match scorer {
        Scorer::TransEL1 => score_transe(h, r, t, Norm::L1),
        Scorer::TransEL2 => score_transe(h, r, t, Norm::L2),
        Scorer::Complex => score_complex(h, r, t),
    }
}

/// max(0, γ - S_p + S_n)
pub fn margin_loss(s_p: f64, s_n: f64, gamma: f64) -> f64 {
    (gamma - s_p + s_n).max(0.0)
}

/// -log σ(S_p) - log σ(-S_n), in stabilized softplus form.
pub fn nll_loss(s_p: f64, s_n: f64) -> f64 {
    math::softplus(-s_p) + math::softplus(s_n)
}

pub fn pair_loss(kind: LossKind, s_p: f64, s_n: f64) -> f64 {
    match kind {
        LossKind::Margin { gamma } => margin_loss(s_p, s_n, gamma),
        LossKind::Nll => nll_loss(s_p, s_n),
    }
}

/// (∂loss/∂S_p, ∂loss/∂S_n) for one pair.
fn pair_loss_grads(kind: LossKind, s_p: f64, s_n: f64) -> (f64, f64) {
    match kind {
        LossKind::Margin { gamma } => {
            if gamma - s_p + s_n > 0.0 {
                (-1.0, 1.0)
            } else {
                (0.0, 0.0)
            }
        }
        LossKind::Nll => (-math::sigmoid(-s_p), math::sigmoid(s_n)),
    }
}

/// Writes ∂score/∂h, ∂score/∂r, ∂score/∂t into the provided buffers.
///
/// The L1 subgradient at zero is zero; the L2 gradient at a zero difference
/// vector is likewise defined as zero.
fn score_grads(
    scorer: Scorer,
    h: &[f64],
    r: &[f64],
    t: &[f64],
    gh: &mut [f64],
    gr: &mut [f64],
    gt: &mut [f64],
) {
    match scorer {
        Scorer::TransEL1 => {
            for i in 0..h.len() {
                let d = h[i] + r[i] - t[i];
                let s = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                gh[i] = -s;
                gr[i] = -s;
                gt[i] = s;
            }
        }
        Scorer::TransEL2 => {
            let mut sq = 0.0;
            for i in 0..h.len() {
                let d = h[i] + r[i] - t[i];
                sq += d * d;
            }
            let norm = num_traits::Float::sqrt(sq);
            for i in 0..h.len() {
                let d = h[i] + r[i] - t[i];
                let g = if norm > 0.0 { d / norm } else { 0.0 };
                gh[i] = -g;
                gr[i] = -g;
                gt[i] = g;
            }
        }
        Scorer::Complex => {
            let m = h.len() / 2;
            for i in 0..m {
                let (a, b) = (h[i], h[m + i]);
                let (c, d) = (r[i], r[m + i]);
                let (e, f) = (t[i], t[m + i]);
                gh[i] = c * e + d * f;
                gh[m + i] = -d * e + c * f;
                gr[i] = a * e + b * f;
                gr[m + i] = -b * e + a * f;
                gt[i] = a * c - b * d;
                gt[m + i] = a * d + b * c;
            }
        }
    }
}

/// Bias-free linear map from feature space (in_dim) to embedding space
/// (out_dim), stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionLayer {
    weight: Vec<f64>,
    out_dim: usize,
    in_dim: usize,
}

impl ProjectionLayer {
    pub fn new(out_dim: usize, in_dim: usize, weight: Vec<f64>) -> Result<Self, ModelError> {
        if out_dim == 0 || in_dim == 0 {
            return Err(ModelError::Config("projection dims must be at least 1"));
        }
        if weight.len() != out_dim * in_dim {
            return Err(ModelError::DimMismatch {
                expected: out_dim * in_dim,
                got: weight.len(),
            });
        }
        if !math::all_finite(&weight) {
            return Err(ModelError::NonFinite("projection"));
        }
        Ok(ProjectionLayer {
            weight,
            out_dim,
            in_dim,
        })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        ProjectionLayer::new(out_dim, in_dim, alloc::vec![0.0; out_dim * in_dim])
            .expect("valid shape")
    }

    pub fn identity(dim: usize) -> Self {
        let mut w = alloc::vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        ProjectionLayer::new(dim, dim, w).expect("valid shape")
    }

    /// Uniform Glorot initialization.
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = num_traits::Float::sqrt(6.0 / (out_dim + in_dim) as f64);
        let weight = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        ProjectionLayer::new(out_dim, in_dim, weight).expect("valid shape")
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weight
    }

    /// out = W x
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.in_dim {
            return Err(ModelError::DimMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let mut out = alloc::vec![0.0; self.out_dim];
        for j in 0..self.out_dim {
            out[j] = math::dot(&self.weight[j * self.in_dim..(j + 1) * self.in_dim], x);
        }
        Ok(out)
    }

    /// out = Wᵀ g (gradient with respect to the input).
    fn input_grad(&self, g: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.in_dim];
        for j in 0..self.out_dim {
            math::axpy(&mut out, g[j], &self.weight[j * self.in_dim..(j + 1) * self.in_dim]);
        }
        out
    }
}

/// Trainable table of token vectors backing bag-of-words features.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenTable {
    names: Vec<String>,
    vectors: Vec<f64>,
    dim: usize,
}

impl TokenTable {
    pub fn new(names: Vec<String>, vectors: Vec<f64>, dim: usize) -> Result<Self, ModelError> {
        if names.len() * dim != vectors.len() {
            return Err(ModelError::DimMismatch {
                expected: names.len() * dim,
                got: vectors.len(),
            });
        }
        if !math::all_finite(&vectors) {
            return Err(ModelError::NonFinite("token_table"));
        }
        Ok(TokenTable {
            names,
            vectors,
            dim,
        })
    }

    pub fn from_vocab(vocab: &TokenVocabulary) -> Self {
        TokenTable {
            names: vocab.tokens().to_vec(),
            vectors: vocab.vectors().to_vec(),
            dim: vocab.dim(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [f64] {
        &mut self.vectors
    }
}

/// Whether the relation projection reuses the entity projection matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SharingPolicy {
    /// One matrix projects entity features and every relation source.
    SharedWithEntity,
    /// Entity and relation projections are independent matrices.
    Separate,
}

/// Static shape and scorer choices for one model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub scorer: Scorer,
    pub relation_mode: RelationFeatureMode,
    pub sharing: SharingPolicy,
    /// Embedding dimension d produced by each projection.
    pub dim: usize,
    pub entity_feature_dim: usize,
    /// Input dimension of every relation feature source.
    pub relation_feature_dim: usize,
}

impl ModelConfig {
    pub fn effective_dim(&self) -> usize {
        if self.relation_mode == RelationFeatureMode::Concat {
            2 * self.dim
        } else {
            self.dim
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 || self.entity_feature_dim == 0 || self.relation_feature_dim == 0 {
            return Err(ModelError::Config("dims must be at least 1"));
        }
        if self.sharing == SharingPolicy::SharedWithEntity
            && self.entity_feature_dim != self.relation_feature_dim
        {
            return Err(ModelError::SharingDimMismatch {
                entity: self.entity_feature_dim,
                relation: self.relation_feature_dim,
            });
        }
        if self.scorer == Scorer::Complex && self.effective_dim() % 2 != 0 {
            return Err(ModelError::OddComplexDim(self.effective_dim()));
        }
        Ok(())
    }
}

/// One feature input: a static row, or token indices composed through the
/// trainable token table (mean of the listed rows; empty list → zeros).
#[derive(Clone, Copy, Debug)]
pub enum FeatureInput<'a> {
    Row(&'a [f64]),
    Tokens(&'a [usize]),
}

struct Composed<'a> {
    values: Vec<f64>,
    tokens: Option<&'a [usize]>,
}

/// All trainable tensors plus the choices that shape them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    entity_proj: ProjectionLayer,
    relation_proj: Option<ProjectionLayer>,
    token_table: Option<TokenTable>,
}

impl ModelParams {
    /// Random projections drawn from the seed's projection-init stream.
    pub fn init(
        config: ModelConfig,
        seed: u64,
        token_table: Option<TokenTable>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = stream_rng(seed, Stream::ProjectionInit);
        let entity_proj = ProjectionLayer::init(config.dim, config.entity_feature_dim, &mut rng);
        let relation_proj = match config.sharing {
            SharingPolicy::SharedWithEntity => None,
            SharingPolicy::Separate => Some(ProjectionLayer::init(
                config.dim,
                config.relation_feature_dim,
                &mut rng,
            )),
        };
        ModelParams::from_parts(config, entity_proj, relation_proj, token_table)
    }

    /// Assembles params from existing tensors, validating shapes.
    pub fn from_parts(
        config: ModelConfig,
        entity_proj: ProjectionLayer,
        relation_proj: Option<ProjectionLayer>,
        token_table: Option<TokenTable>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if entity_proj.out_dim() != config.dim || entity_proj.in_dim() != config.entity_feature_dim
        {
            return Err(ModelError::Config("entity projection shape mismatch"));
        }
        match (config.sharing, &relation_proj) {
            (SharingPolicy::SharedWithEntity, Some(_)) => {
                return Err(ModelError::Config(
                    "shared policy must not carry a relation projection",
                ));
            }
            (SharingPolicy::Separate, None) => {
                return Err(ModelError::Config("separate policy needs a relation projection"));
            }
            (SharingPolicy::Separate, Some(p)) => {
                if p.out_dim() != config.dim || p.in_dim() != config.relation_feature_dim {
                    return Err(ModelError::Config("relation projection shape mismatch"));
                }
            }
            (SharingPolicy::SharedWithEntity, None) => {}
        }
        Ok(ModelParams {
            config,
            entity_proj,
            relation_proj,
            token_table,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scorer(&self) -> Scorer {
        self.config.scorer
    }

    pub fn relation_mode(&self) -> RelationFeatureMode {
        self.config.relation_mode
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Dimension of the vectors handed to the scorer (2d in concat mode).
    pub fn effective_dim(&self) -> usize {
        self.config.effective_dim()
    }

    pub fn entity_proj(&self) -> &ProjectionLayer {
        &self.entity_proj
    }

    pub fn entity_proj_mut(&mut self) -> &mut ProjectionLayer {
        &mut self.entity_proj
    }

    /// The matrix applied to relation features (the entity projection when
    /// sharing is active).
    pub fn relation_proj(&self) -> &ProjectionLayer {
        self.relation_proj.as_ref().unwrap_or(&self.entity_proj)
    }

    /// The separate relation projection, if the sharing policy has one.
    pub fn separate_relation_proj_mut(&mut self) -> Option<&mut ProjectionLayer> {
        self.relation_proj.as_mut()
    }

    pub fn token_table(&self) -> Option<&TokenTable> {
        self.token_table.as_ref()
    }

    pub fn token_table_mut(&mut self) -> Option<&mut TokenTable> {
        self.token_table.as_mut()
    }

    fn compose<'a>(
        &self,
        input: FeatureInput<'a>,
        expected_dim: usize,
    ) -> Result<Composed<'a>, ModelError> {
        match input {
            FeatureInput::Row(row) => {
                if row.len() != expected_dim {
                    return Err(ModelError::DimMismatch {
                        expected: expected_dim,
                        got: row.len(),
                    });
                }
                Ok(Composed {
                    values: row.to_vec(),
                    tokens: None,
                })
            }
            FeatureInput::Tokens(indices) => {
                let table = self.token_table.as_ref().ok_or(ModelError::MissingTokenTable)?;
                if table.dim() != expected_dim {
                    return Err(ModelError::DimMismatch {
                        expected: expected_dim,
                        got: table.dim(),
                    });
                }
                let mut values = alloc::vec![0.0; expected_dim];
                if !indices.is_empty() {
                    for &i in indices {
                        math::axpy(&mut values, 1.0, table.row(i));
                    }
                    let inv = 1.0 / indices.len() as f64;
                    values.iter_mut().for_each(|x| *x *= inv);
                }
                Ok(Composed {
                    values,
                    tokens: Some(indices),
                })
            }
        }
    }

    /// e = W_e·f, duplicated to [e; e] in concat mode.
    pub fn encode_entity(&self, feature: FeatureInput<'_>) -> Result<Vec<f64>, ModelError> {
        let composed = self.compose(feature, self.config.entity_feature_dim)?;
        let e = self.entity_proj.apply(&composed.values)?;
        Ok(self.assemble_entity(e))
    }

    fn assemble_entity(&self, e: Vec<f64>) -> Vec<f64> {
        if self.config.relation_mode == RelationFeatureMode::Concat {
            let mut out = Vec::with_capacity(2 * e.len());
            out.extend_from_slice(&e);
            out.extend_from_slice(&e);
            out
        } else {
            e
        }
    }

    /// Projects the sources required by the relation mode; in concat mode the
    /// shared relation matrix is applied to each source and the projected
    /// vectors are concatenated.
    pub fn encode_relation(
        &self,
        text: Option<FeatureInput<'_>>,
        graph: Option<&[f64]>,
    ) -> Result<Vec<f64>, ModelError> {
        let proj = self.relation_proj();
        let f_dim = self.config.relation_feature_dim;
        let project_text = |text: Option<FeatureInput<'_>>| -> Result<Vec<f64>, ModelError> {
            let input = text.ok_or(ModelError::MissingRelationFeature("text"))?;
            let composed = self.compose(input, f_dim)?;
            proj.apply(&composed.values)
        };
        let project_graph = |graph: Option<&[f64]>| -> Result<Vec<f64>, ModelError> {
            let row = graph.ok_or(ModelError::MissingRelationFeature("graph"))?;
            if row.len() != f_dim {
                return Err(ModelError::DimMismatch {
                    expected: f_dim,
                    got: row.len(),
                });
            }
            proj.apply(row)
        };
        match self.config.relation_mode {
            RelationFeatureMode::TextOnly => project_text(text),
            RelationFeatureMode::GraphOnly => project_graph(graph),
            RelationFeatureMode::Concat => {
                let mut out = project_text(text)?;
                out.extend(project_graph(graph)?);
                Ok(out)
            }
        }
    }
}

/// Side of a triple replaced by a corruption.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorruptionSide {
    Head,
    Tail,
}

/// A negative sample: the replacement entity's feature and which slot it
/// fills. Relation and the other endpoint stay those of the positive.
#[derive(Clone, Copy, Debug)]
pub struct Corruption<'a> {
    pub side: CorruptionSide,
    pub feature: FeatureInput<'a>,
}

/// One positive triple with its negative samples, in feature space.
#[derive(Clone, Debug)]
pub struct PositiveExample<'a> {
    pub head: FeatureInput<'a>,
    pub tail: FeatureInput<'a>,
    pub rel_text: Option<FeatureInput<'a>>,
    pub rel_graph: Option<&'a [f64]>,
    pub negatives: Vec<Corruption<'a>>,
}

/// A training batch. The batch loss is the mean over examples of the mean
/// pairwise loss against each example's negatives, plus the L2 penalty on
/// projection weights.
#[derive(Clone, Debug, Default)]
pub struct Batch<'a> {
    pub examples: Vec<PositiveExample<'a>>,
}

/// Gradients for every trainable tensor; token gradients cover only the rows
/// touched by the batch.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub entity_proj: Vec<f64>,
    pub relation_proj: Option<Vec<f64>>,
    pub token_rows: BTreeMap<usize, Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            entity_proj: alloc::vec![0.0; params.entity_proj.weights().len()],
            relation_proj: params
                .relation_proj
                .as_ref()
                .map(|p| alloc::vec![0.0; p.weights().len()]),
            token_rows: BTreeMap::new(),
        }
    }
}

fn sum_squares(w: &[f64]) -> f64 {
    math::dot(w, w)
}

fn l2_penalty(params: &ModelParams, l2: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let mut penalty = sum_squares(params.entity_proj.weights());
    if let Some(p) = &params.relation_proj {
        penalty += sum_squares(p.weights());
    }
    l2 * penalty
}

/// Forward pass only: mean batch loss plus the L2 penalty.
///
/// This is the reference the finite-difference gradient oracle perturbs; it
/// shares no code with the backward pass.
pub fn batch_loss(
    params: &ModelParams,
    batch: &Batch<'_>,
    loss: LossKind,
    l2: f64,
) -> Result<f64, ModelError> {
    let mut total = 0.0;
    let n_examples = batch.examples.len().max(1);
    for ex in &batch.examples {
        if ex.negatives.is_empty() {
            continue;
        }
        let h_vec = params.encode_entity(ex.head)?;
        let t_vec = params.encode_entity(ex.tail)?;
        let r_vec = params.encode_relation(ex.rel_text, ex.rel_graph)?;
        let s_p = score(params.scorer(), &h_vec, &r_vec, &t_vec)?;
        let mut example_loss = 0.0;
        for neg in &ex.negatives {
            let n_vec = params.encode_entity(neg.feature)?;
            let s_n = match neg.side {
                CorruptionSide::Head => score(params.scorer(), &n_vec, &r_vec, &t_vec)?,
                CorruptionSide::Tail => score(params.scorer(), &h_vec, &r_vec, &n_vec)?,
            };
            example_loss += pair_loss(loss, s_p, s_n);
        }
        total += example_loss / ex.negatives.len() as f64;
    }
    Ok(total / n_examples as f64 + l2_penalty(params, l2))
}

struct BackwardCtx<'p> {
    params: &'p ModelParams,
    grads: Gradients,
}

impl BackwardCtx<'_> {
    /// Folds an assembled-space gradient back to projection space: in concat
    /// mode the two duplicated halves sum.
    fn fold_entity(&self, g: &[f64]) -> Vec<f64> {
        let d = self.params.dim();
        if self.params.relation_mode() == RelationFeatureMode::Concat {
            let mut out = g[..d].to_vec();
            for i in 0..d {
                out[i] += g[d + i];
            }
            out
        } else {
            g.to_vec()
        }
    }

    fn add_projection_grad(target: &mut [f64], g: &[f64], f: &[f64]) {
        let in_dim = f.len();
        for (j, &gj) in g.iter().enumerate() {
            if gj != 0.0 {
                math::axpy(&mut target[j * in_dim..(j + 1) * in_dim], gj, f);
            }
        }
    }

    fn add_token_grads(&mut self, proj: &ProjectionLayer, g: &[f64], tokens: &[usize]) {
        if tokens.is_empty() {
            return;
        }
        let mut input_grad = proj.input_grad(g);
        let inv = 1.0 / tokens.len() as f64;
        input_grad.iter_mut().for_each(|x| *x *= inv);
        let dim = input_grad.len();
        for &tok in tokens {
            let row = self
                .grads
                .token_rows
                .entry(tok)
                .or_insert_with(|| alloc::vec![0.0; dim]);
            math::axpy(row, 1.0, &input_grad);
        }
    }

    /// Entity path: gradient g (projection space) through W_e and, for token
    /// features, into the token table.
    fn backprop_entity(&mut self, composed: &Composed<'_>, g: &[f64]) {
        Self::add_projection_grad(&mut self.grads.entity_proj, g, &composed.values);
        if let Some(tokens) = composed.tokens {
            let proj = self.params.entity_proj();
            self.add_token_grads(proj, g, tokens);
        }
    }

    /// Relation path for one source; lands in the relation matrix or, under
    /// sharing, accumulates into the entity matrix.
    fn backprop_relation_source(&mut self, composed: &Composed<'_>, g: &[f64]) {
        match &mut self.grads.relation_proj {
            Some(rp) => Self::add_projection_grad(rp, g, &composed.values),
            None => Self::add_projection_grad(&mut self.grads.entity_proj, g, &composed.values),
        }
        if let Some(tokens) = composed.tokens {
            let proj = self.params.relation_proj();
            self.add_token_grads(proj, g, tokens);
        }
    }
}

/// Mean batch loss and analytic gradients for all trainable tensors.
pub fn batch_loss_and_grads(
    params: &ModelParams,
    batch: &Batch<'_>,
    loss: LossKind,
    l2: f64,
) -> Result<(f64, Gradients), ModelError> {
    let scorer = params.scorer();
    let mode = params.relation_mode();
    let eff = params.effective_dim();
    let d = params.dim();
    let f_rel = params.config.relation_feature_dim;
    let n_examples = batch.examples.len().max(1);

    let mut ctx = BackwardCtx {
        params,
        grads: Gradients::zeros_like(params),
    };
    let mut total = 0.0;

    let mut gh = alloc::vec![0.0; eff];
    let mut gr = alloc::vec![0.0; eff];
    let mut gt = alloc::vec![0.0; eff];

    for ex in &batch.examples {
        if ex.negatives.is_empty() {
            continue;
        }
        let scale = 1.0 / (n_examples * ex.negatives.len()) as f64;

        let head = params.compose(ex.head, params.config.entity_feature_dim)?;
        let tail = params.compose(ex.tail, params.config.entity_feature_dim)?;
        let h_vec = params.assemble_entity(params.entity_proj.apply(&head.values)?);
        let t_vec = params.assemble_entity(params.entity_proj.apply(&tail.values)?);

        let rel_text = match mode {
            RelationFeatureMode::TextOnly | RelationFeatureMode::Concat => Some(params.compose(
                ex.rel_text.ok_or(ModelError::MissingRelationFeature("text"))?,
                f_rel,
            )?),
            RelationFeatureMode::GraphOnly => None,
        };
        let rel_graph = match mode {
            RelationFeatureMode::GraphOnly | RelationFeatureMode::Concat => {
                let row = ex.rel_graph.ok_or(ModelError::MissingRelationFeature("graph"))?;
                if row.len() != f_rel {
                    return Err(ModelError::DimMismatch {
                        expected: f_rel,
                        got: row.len(),
                    });
                }
                Some(Composed {
                    values: row.to_vec(),
                    tokens: None,
                })
            }
            RelationFeatureMode::TextOnly => None,
        };
        let proj_r = params.relation_proj();
        let r_vec = match mode {
            RelationFeatureMode::TextOnly => proj_r.apply(&rel_text.as_ref().unwrap().values)?,
            RelationFeatureMode::GraphOnly => proj_r.apply(&rel_graph.as_ref().unwrap().values)?,
            RelationFeatureMode::Concat => {
                let mut v = proj_r.apply(&rel_text.as_ref().unwrap().values)?;
                v.extend(proj_r.apply(&rel_graph.as_ref().unwrap().values)?);
                v
            }
        };

        let s_p = score(scorer, &h_vec, &r_vec, &t_vec)?;
        score_grads(scorer, &h_vec, &r_vec, &t_vec, &mut gh, &mut gr, &mut gt);
        let (gh_p, gr_p, gt_p) = (gh.clone(), gr.clone(), gt.clone());

        // Accumulators in assembled space for vectors reused across pairs.
        let mut acc_h = alloc::vec![0.0; eff];
        let mut acc_t = alloc::vec![0.0; eff];
        let mut acc_r = alloc::vec![0.0; eff];
        let mut coef_pos = 0.0;

        for neg in &ex.negatives {
            let corrupted = params.compose(neg.feature, params.config.entity_feature_dim)?;
            let n_vec = params.assemble_entity(params.entity_proj.apply(&corrupted.values)?);
            let s_n = match neg.side {
                CorruptionSide::Head => {
                    score_grads(scorer, &n_vec, &r_vec, &t_vec, &mut gh, &mut gr, &mut gt);
                    score(scorer, &n_vec, &r_vec, &t_vec)?
                }
                CorruptionSide::Tail => {
                    score_grads(scorer, &h_vec, &r_vec, &n_vec, &mut gh, &mut gr, &mut gt);
                    score(scorer, &h_vec, &r_vec, &n_vec)?
                }
            };
            total += scale * pair_loss(loss, s_p, s_n);
            let (d_sp, d_sn) = pair_loss_grads(loss, s_p, s_n);
            coef_pos += scale * d_sp;
            let coef_neg = scale * d_sn;

            math::axpy(&mut acc_r, coef_neg, &gr);
            match neg.side {
                CorruptionSide::Head => {
                    math::axpy(&mut acc_t, coef_neg, &gt);
                    let folded = ctx.fold_entity(&gh);
                    let mut g = folded;
                    g.iter_mut().for_each(|x| *x *= coef_neg);
                    ctx.backprop_entity(&corrupted, &g);
                }
                CorruptionSide::Tail => {
                    math::axpy(&mut acc_h, coef_neg, &gh);
                    let folded = ctx.fold_entity(&gt);
                    let mut g = folded;
                    g.iter_mut().for_each(|x| *x *= coef_neg);
                    ctx.backprop_entity(&corrupted, &g);
                }
            }
        }

        math::axpy(&mut acc_h, coef_pos, &gh_p);
        math::axpy(&mut acc_t, coef_pos, &gt_p);
        math::axpy(&mut acc_r, coef_pos, &gr_p);

        let g_h = ctx.fold_entity(&acc_h);
        ctx.backprop_entity(&head, &g_h);
        let g_t = ctx.fold_entity(&acc_t);
        ctx.backprop_entity(&tail, &g_t);

        match mode {
            RelationFeatureMode::TextOnly => {
                ctx.backprop_relation_source(rel_text.as_ref().unwrap(), &acc_r);
            }
            RelationFeatureMode::GraphOnly => {
                ctx.backprop_relation_source(rel_graph.as_ref().unwrap(), &acc_r);
            }
            RelationFeatureMode::Concat => {
                ctx.backprop_relation_source(rel_text.as_ref().unwrap(), &acc_r[..d]);
                ctx.backprop_relation_source(rel_graph.as_ref().unwrap(), &acc_r[d..]);
            }
        }
    }

    total += l2_penalty(params, l2);
    if l2 != 0.0 {
        math::axpy(
            &mut ctx.grads.entity_proj,
            2.0 * l2,
            params.entity_proj.weights(),
        );
        if let (Some(gp), Some(p)) = (&mut ctx.grads.relation_proj, &params.relation_proj) {
            math::axpy(gp, 2.0 * l2, p.weights());
        }
    }
    Ok((total, ctx.grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn simple_params(mode: RelationFeatureMode, scorer: Scorer) -> ModelParams {
        let config = ModelConfig {
            scorer,
            relation_mode: mode,
            sharing: SharingPolicy::Separate,
            dim: 2,
            entity_feature_dim: 2,
            relation_feature_dim: 2,
        };
        ModelParams::from_parts(
            config,
            ProjectionLayer::identity(2),
            Some(ProjectionLayer::identity(2)),
            None,
        )
        .unwrap()
    }

    #[test]
    fn encode_entity_identity_and_duplication() {
        let p = simple_params(RelationFeatureMode::TextOnly, Scorer::TransEL1);
        let e = p.encode_entity(FeatureInput::Row(&[0.3, -0.7])).unwrap();
        assert_eq!(e, vec![0.3, -0.7]);

        let p = simple_params(RelationFeatureMode::Concat, Scorer::TransEL1);
        let e = p.encode_entity(FeatureInput::Row(&[0.3, -0.7])).unwrap();
        assert_eq!(e, vec![0.3, -0.7, 0.3, -0.7]);
    }

    #[test]
    fn encode_entity_zero_projection_gives_zero_vector() {
        let config = ModelConfig {
            scorer: Scorer::TransEL1,
            relation_mode: RelationFeatureMode::TextOnly,
            sharing: SharingPolicy::Separate,
            dim: 3,
            entity_feature_dim: 2,
            relation_feature_dim: 2,
        };
        let p = ModelParams::from_parts(
            config,
            ProjectionLayer::zeros(3, 2),
            Some(ProjectionLayer::zeros(3, 2)),
            None,
        )
        .unwrap();
        let e = p.encode_entity(FeatureInput::Row(&[5.0, -1.0])).unwrap();
        assert_eq!(e, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn encode_relation_modes() {
        let p = simple_params(RelationFeatureMode::TextOnly, Scorer::TransEL1);
        let r = p
            .encode_relation(Some(FeatureInput::Row(&[1.0, 2.0])), None)
            .unwrap();
        assert_eq!(r, vec![1.0, 2.0]);

        let p = simple_params(RelationFeatureMode::Concat, Scorer::TransEL1);
        let r = p
            .encode_relation(Some(FeatureInput::Row(&[1.0, 2.0])), Some(&[3.0, 4.0]))
            .unwrap();
        assert_eq!(r, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.len(), p.effective_dim());

        let err = p.encode_relation(Some(FeatureInput::Row(&[1.0, 2.0])), None);
        assert_eq!(err, Err(ModelError::MissingRelationFeature("graph")));
    }

    #[test]
    fn transe_examples() {
        assert_eq!(
            score_transe(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], Norm::L1).unwrap(),
            0.0
        );
        assert_eq!(
            score_transe(&[1.0, 2.0], &[3.0, -1.0], &[0.0, 0.0], Norm::L1).unwrap(),
            -5.0
        );
        let l2 = score_transe(&[1.0, 2.0], &[3.0, -1.0], &[0.0, 0.0], Norm::L2).unwrap();
        assert!((l2 - (-17.0f64.sqrt())).abs() < 1e-12);
        assert!(matches!(
            score_transe(&[1.0], &[1.0, 2.0], &[1.0], Norm::L1),
            Err(ModelError::DimMismatch { .. })
        ));
    }

    #[test]
    fn complex_examples() {
        assert_eq!(
            score_complex(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]).unwrap(),
            1.0
        );
        // h = 1+i, r = 2, t = i  →  Re((1+i)·2·(-i)) = 2
        assert_eq!(
            score_complex(&[1.0, 1.0], &[2.0, 0.0], &[0.0, 1.0]).unwrap(),
            2.0
        );
        assert!(matches!(
            score_complex(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(ModelError::OddComplexDim(3))
        ));
    }

    #[test]
    fn loss_examples() {
        assert!((margin_loss(0.5, 0.2, 1.0) - 0.7).abs() < 1e-15);
        assert_eq!(margin_loss(2.0, 0.5, 1.0), 0.0);
        assert!((margin_loss(-5.0, -4.1231, 1.0) - 1.8769).abs() < 1e-12);

        assert!((nll_loss(0.0, 0.0) - 2.0 * core::f64::consts::LN_2).abs() < 1e-12);
        assert!(nll_loss(60.0, -60.0) < 1e-15);
        assert!((nll_loss(1.0, -1.0) - 0.6265233750364456).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn transe_score_is_nonpositive(
            h in proptest::collection::vec(-3.0f64..3.0, 4),
            r in proptest::collection::vec(-3.0f64..3.0, 4),
            t in proptest::collection::vec(-3.0f64..3.0, 4),
        ) {
            for norm in [Norm::L1, Norm::L2] {
                prop_assert!(score_transe(&h, &r, &t, norm).unwrap() <= 0.0);
            }
        }

        #[test]
        fn complex_is_linear_in_head(
            h1 in proptest::collection::vec(-2.0f64..2.0, 4),
            h2 in proptest::collection::vec(-2.0f64..2.0, 4),
            r in proptest::collection::vec(-2.0f64..2.0, 4),
            t in proptest::collection::vec(-2.0f64..2.0, 4),
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
        ) {
            let mix: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = score_complex(&mix, &r, &t).unwrap();
            let rhs = alpha * score_complex(&h1, &r, &t).unwrap()
                + beta * score_complex(&h2, &r, &t).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn purely_imaginary_relation_is_antisymmetric(
            h in proptest::collection::vec(-2.0f64..2.0, 6),
            t in proptest::collection::vec(-2.0f64..2.0, 6),
            im in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let mut r = vec![0.0; 6];
            r[3..].copy_from_slice(&im);
            let fwd = score_complex(&h, &r, &t).unwrap();
            let bwd = score_complex(&t, &r, &h).unwrap();
            prop_assert!((fwd + bwd).abs() < 1e-10);
        }

        #[test]
        fn duplicated_transe_l1_decomposes(
            e_h in proptest::collection::vec(-2.0f64..2.0, 3),
            e_t in proptest::collection::vec(-2.0f64..2.0, 3),
            r1 in proptest::collection::vec(-2.0f64..2.0, 3),
            r2 in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let h_dup: Vec<f64> = e_h.iter().chain(&e_h).copied().collect();
            let t_dup: Vec<f64> = e_t.iter().chain(&e_t).copied().collect();
            let r_cat: Vec<f64> = r1.iter().chain(&r2).copied().collect();
            let whole = score_transe(&h_dup, &r_cat, &t_dup, Norm::L1).unwrap();
            let parts = score_transe(&e_h, &r1, &e_t, Norm::L1).unwrap()
                + score_transe(&e_h, &r2, &e_t, Norm::L1).unwrap();
            prop_assert!((whole - parts).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let config = ModelConfig {
            scorer: Scorer::TransEL1,
            relation_mode: RelationFeatureMode::TextOnly,
            sharing: SharingPolicy::Separate,
            dim: 2,
            entity_feature_dim: 3,
            relation_feature_dim: 2,
        };
        let params = ModelParams::from_parts(
            config,
            ProjectionLayer::zeros(2, 3),
            Some(ProjectionLayer::zeros(2, 2)),
            None,
        )
        .unwrap();
        let head = [1.0, 2.0, 3.0];
        let tail = [0.5, -1.0, 2.0];
        let neg = [2.0, 2.0, -1.0];
        let rel = [1.0, -1.0];
        let batch = Batch {
            examples: vec![PositiveExample {
                head: FeatureInput::Row(&head),
                tail: FeatureInput::Row(&tail),
                rel_text: Some(FeatureInput::Row(&rel)),
                rel_graph: None,
                negatives: vec![Corruption {
                    side: CorruptionSide::Tail,
                    feature: FeatureInput::Row(&neg),
                }],
            }],
        };
        let (_, grads) =
            batch_loss_and_grads(&params, &batch, LossKind::Margin { gamma: 1.0 }, 0.0).unwrap();
        assert!(grads.entity_proj.iter().all(|&g| g == 0.0));
        assert!(grads.relation_proj.unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn inactive_margin_gives_zero_gradient() {
        let params = simple_params(RelationFeatureMode::TextOnly, Scorer::TransEL1);
        let head = [0.0, 0.0];
        let tail = [0.0, 0.0];
        let neg = [50.0, 50.0]; // S_p = 0, S_n = -100: margin satisfied
        let rel = [0.0, 0.0];
        let batch = Batch {
            examples: vec![PositiveExample {
                head: FeatureInput::Row(&head),
                tail: FeatureInput::Row(&tail),
                rel_text: Some(FeatureInput::Row(&rel)),
                rel_graph: None,
                negatives: vec![Corruption {
                    side: CorruptionSide::Tail,
                    feature: FeatureInput::Row(&neg),
                }],
            }],
        };
        let (loss, grads) =
            batch_loss_and_grads(&params, &batch, LossKind::Margin { gamma: 1.0 }, 0.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.entity_proj.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn shared_projection_accumulates_both_relation_paths() {
        // With tied weights, shared-policy gradients must equal the sum of
        // the per-matrix gradients from a separate-policy run.
        let dim = 3;
        let f = 3;
        let mut rng = stream_rng(99, Stream::ProjectionInit);
        let w = ProjectionLayer::init(dim, f, &mut rng);
        let shared_cfg = ModelConfig {
            scorer: Scorer::TransEL2,
            relation_mode: RelationFeatureMode::Concat,
            sharing: SharingPolicy::SharedWithEntity,
            dim,
            entity_feature_dim: f,
            relation_feature_dim: f,
        };
        let sep_cfg = ModelConfig {
            sharing: SharingPolicy::Separate,
            ..shared_cfg
        };
        let shared = ModelParams::from_parts(shared_cfg, w.clone(), None, None).unwrap();
        let separate = ModelParams::from_parts(sep_cfg, w.clone(), Some(w.clone()), None).unwrap();

        let head = [0.2, -0.4, 0.9];
        let tail = [1.0, 0.3, -0.2];
        let neg = [-0.6, 0.8, 0.1];
        let text = [0.5, 0.5, -1.0];
        let graph = [-0.3, 0.2, 0.7];
        let batch = Batch {
            examples: vec![PositiveExample {
                head: FeatureInput::Row(&head),
                tail: FeatureInput::Row(&tail),
                rel_text: Some(FeatureInput::Row(&text)),
                rel_graph: Some(&graph),
                negatives: vec![Corruption {
                    side: CorruptionSide::Head,
                    feature: FeatureInput::Row(&neg),
                }],
            }],
        };
        let (loss_a, g_shared) =
            batch_loss_and_grads(&shared, &batch, LossKind::Nll, 0.0).unwrap();
        let (loss_b, g_sep) = batch_loss_and_grads(&separate, &batch, LossKind::Nll, 0.0).unwrap();
        assert!((loss_a - loss_b).abs() < 1e-12);
        let summed: Vec<f64> = g_sep
            .entity_proj
            .iter()
            .zip(g_sep.relation_proj.as_ref().unwrap())
            .map(|(a, b)| a + b)
            .collect();
        for (s, e) in g_shared.entity_proj.iter().zip(&summed) {
            assert!((s - e).abs() < 1e-12, "shared {s} vs separate-sum {e}");
        }
    }
}
