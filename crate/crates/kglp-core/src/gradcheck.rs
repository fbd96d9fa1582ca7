//! Finite-difference verification of the analytic gradients.
//!
//! The numeric side perturbs each trainable weight by ±step and evaluates
//! the forward-only [`batch_loss`], so it never touches the backward pass it
//! checks. Relative errors use an absolute floor of 1e-4 on the denominator
//! to keep near-zero gradients from amplifying finite-difference noise.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::features::RelationFeatureMode;
use crate::model::{
    batch_loss, batch_loss_and_grads, Batch, Corruption, CorruptionSide, FeatureInput, Gradients,
    LossKind, ModelConfig, ModelError, ModelParams, ProjectionLayer, Scorer, SharingPolicy,
    TokenTable,
};
use crate::rng::{substream_rng, Stream};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

/// Central finite differences of [`batch_loss`] over every trainable weight
/// (and the token rows the batch touches).
pub fn finite_difference_grads(
    params: &ModelParams,
    batch: &Batch<'_>,
    loss: LossKind,
    l2: f64,
    step: f64,
) -> Result<Gradients, ModelError> {
    let mut probe = params.clone();
    let mut grads = Gradients::zeros_like(params);

    let central = |probe: &mut ModelParams,
                       set: &mut dyn FnMut(&mut ModelParams, f64)|
     -> Result<f64, ModelError> {
        set(probe, step);
        let plus = batch_loss(probe, batch, loss, l2)?;
        set(probe, -2.0 * step);
        let minus = batch_loss(probe, batch, loss, l2)?;
        set(probe, step);
        Ok((plus - minus) / (2.0 * step))
    };

    for k in 0..params.entity_proj().weights().len() {
        grads.entity_proj[k] = central(&mut probe, &mut |p, delta| {
            p.entity_proj_mut().weights_mut()[k] += delta;
        })?;
    }

    if let Some(rel_grads) = &mut grads.relation_proj {
        for k in 0..rel_grads.len() {
            rel_grads[k] = central(&mut probe, &mut |p, delta| {
                p.separate_relation_proj_mut().unwrap().weights_mut()[k] += delta;
            })?;
        }
    }

    if let Some(table) = params.token_table() {
        let dim = table.dim();
        for tok in touched_tokens(batch) {
            let mut row = alloc::vec![0.0; dim];
            for j in 0..dim {
                let idx = tok * dim + j;
                row[j] = central(&mut probe, &mut |p, delta| {
                    p.token_table_mut().unwrap().vectors_mut()[idx] += delta;
                })?;
            }
            grads.token_rows.insert(tok, row);
        }
    }

    Ok(grads)
}

fn touched_tokens(batch: &Batch<'_>) -> BTreeSet<usize> {
    let mut touched = BTreeSet::new();
    let mut eat = |f: &FeatureInput<'_>| {
        if let FeatureInput::Tokens(list) = f {
            touched.extend(list.iter().copied());
        }
    };
    for ex in &batch.examples {
        eat(&ex.head);
        eat(&ex.tail);
        if let Some(t) = &ex.rel_text {
            eat(t);
        }
        for n in &ex.negatives {
            eat(&n.feature);
        }
    }
    touched
}

fn relative_error(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(DEFAULT_THRESHOLD);
    (a - b).abs() / denom
}

/// Largest relative error between two gradient sets across all tensors.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.entity_proj.iter().zip(&numeric.entity_proj) {
        worst = worst.max(relative_error(*a, *n));
    }
    if let (Some(a), Some(n)) = (&analytic.relation_proj, &numeric.relation_proj) {
        for (x, y) in a.iter().zip(n) {
            worst = worst.max(relative_error(*x, *y));
        }
    }
    let keys: BTreeSet<usize> = analytic
        .token_rows
        .keys()
        .chain(numeric.token_rows.keys())
        .copied()
        .collect();
    for key in keys {
        let zero: Vec<f64> = Vec::new();
        let a = analytic.token_rows.get(&key).unwrap_or(&zero);
        let n = numeric.token_rows.get(&key).unwrap_or(&zero);
        for i in 0..a.len().max(n.len()) {
            worst = worst.max(relative_error(
                a.get(i).copied().unwrap_or(0.0),
                n.get(i).copied().unwrap_or(0.0),
            ));
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct GradCheckCell {
    pub scorer: Scorer,
    pub loss: &'static str,
    pub configs: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub cells: Vec<GradCheckCell>,
    pub threshold: f64,
    pub step: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.max_rel_err < self.threshold)
    }

    pub fn worst(&self) -> f64 {
        self.cells.iter().fold(0.0f64, |w, c| w.max(c.max_rel_err))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cell in &self.cells {
            writeln!(
                f,
                "{} x {}: max_rel_err {:.3e} over {} configs [{}]",
                cell.scorer,
                cell.loss,
                cell.max_rel_err,
                cell.configs,
                if cell.max_rel_err < self.threshold {
                    "ok"
                } else {
                    "FAIL"
                }
            )?;
        }
        write!(
            f,
            "threshold {:.1e}, step {:.1e}: {}",
            self.threshold,
            self.step,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

enum FeatSpec {
    Row(usize),
    Tokens(usize),
}

struct ExampleSpec {
    head: FeatSpec,
    tail: FeatSpec,
    rel_text: Option<FeatSpec>,
    rel_graph: Option<usize>,
    negatives: Vec<(CorruptionSide, FeatSpec)>,
}

/// One randomly drawn model + batch for a grid cell. Owns the feature
/// storage the batch borrows from.
pub struct GradCheckCase {
    pub params: ModelParams,
    pub loss: LossKind,
    pub l2: f64,
    rows: Vec<Vec<f64>>,
    token_lists: Vec<Vec<usize>>,
    examples: Vec<ExampleSpec>,
}

impl GradCheckCase {
    pub fn batch(&self) -> Batch<'_> {
        let feature = |spec: &FeatSpec| match spec {
            FeatSpec::Row(i) => FeatureInput::Row(&self.rows[*i]),
            FeatSpec::Tokens(i) => FeatureInput::Tokens(&self.token_lists[*i]),
        };
        Batch {
            examples: self
                .examples
                .iter()
                .map(|ex| crate::model::PositiveExample {
                    head: feature(&ex.head),
                    tail: feature(&ex.tail),
                    rel_text: ex.rel_text.as_ref().map(feature),
                    rel_graph: ex.rel_graph.map(|i| self.rows[i].as_slice()),
                    negatives: ex
                        .negatives
                        .iter()
                        .map(|(side, spec)| Corruption {
                            side: *side,
                            feature: feature(spec),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Draws dims, sharing, relation mode, optional token table, and a small
    /// batch. `d ≤ 16`, feature dims `≤ 8`.
    pub fn random<R: Rng>(scorer: Scorer, loss: LossKind, rng: &mut R) -> Self {
        let mode = match rng.gen_range(0..3) {
            0 => RelationFeatureMode::TextOnly,
            1 => RelationFeatureMode::GraphOnly,
            _ => RelationFeatureMode::Concat,
        };
        let mut dim = rng.gen_range(2..=16usize);
        if scorer == Scorer::Complex && mode != RelationFeatureMode::Concat && dim % 2 == 1 {
            dim += 1;
        }
        let shared = rng.gen_bool(0.4);
        let entity_feature_dim = rng.gen_range(2..=8usize);
        let relation_feature_dim = if shared {
            entity_feature_dim
        } else {
            rng.gen_range(2..=8usize)
        };
        // One token table serves both entity and relation-text slots, so it
        // is only usable when their feature dims agree.
        let use_tokens = rng.gen_bool(0.35) && entity_feature_dim == relation_feature_dim;

        let config = ModelConfig {
            scorer,
            relation_mode: mode,
            sharing: if shared {
                SharingPolicy::SharedWithEntity
            } else {
                SharingPolicy::Separate
            },
            dim,
            entity_feature_dim,
            relation_feature_dim,
        };

        let token_table = if use_tokens {
            let n_tokens = rng.gen_range(4..=9usize);
            let vectors = (0..n_tokens * entity_feature_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            Some(
                TokenTable::new(
                    (0..n_tokens).map(|i| alloc::format!("t{i}")).collect(),
                    vectors,
                    entity_feature_dim,
                )
                .unwrap(),
            )
        } else {
            None
        };
        let n_tokens = token_table.as_ref().map(|t| t.len()).unwrap_or(0);

        let entity_proj = ProjectionLayer::init(dim, entity_feature_dim, rng);
        let relation_proj = if shared {
            None
        } else {
            Some(ProjectionLayer::init(dim, relation_feature_dim, rng))
        };
        let params = ModelParams::from_parts(config, entity_proj, relation_proj, token_table)
            .expect("valid random config");

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut token_lists: Vec<Vec<usize>> = Vec::new();

        fn push_row(rows: &mut Vec<Vec<f64>>, rng: &mut impl Rng, width: usize) -> FeatSpec {
            rows.push((0..width).map(|_| rng.gen_range(-1.0..1.0)).collect());
            FeatSpec::Row(rows.len() - 1)
        }
        fn push_tokens(
            lists: &mut Vec<Vec<usize>>,
            rng: &mut impl Rng,
            n_tokens: usize,
        ) -> FeatSpec {
            let count = rng.gen_range(1..=3usize);
            lists.push((0..count).map(|_| rng.gen_range(0..n_tokens)).collect());
            FeatSpec::Tokens(lists.len() - 1)
        }

        let n_examples = rng.gen_range(1..=3usize);
        let mut examples = Vec::with_capacity(n_examples);
        for _ in 0..n_examples {
            let mut entity_spec = |rng: &mut R| {
                if n_tokens > 0 && rng.gen_bool(0.5) {
                    push_tokens(&mut token_lists, rng, n_tokens)
                } else {
                    push_row(&mut rows, rng, entity_feature_dim)
                }
            };
            let head = entity_spec(rng);
            let tail = entity_spec(rng);
            let mut negatives = Vec::new();
            for _ in 0..rng.gen_range(1..=3usize) {
                let side = if rng.gen_bool(0.5) {
                    CorruptionSide::Head
                } else {
                    CorruptionSide::Tail
                };
                negatives.push((side, entity_spec(rng)));
            }
            drop(entity_spec);
            let rel_text = match mode {
                RelationFeatureMode::GraphOnly => None,
                _ => Some(if n_tokens > 0 && rng.gen_bool(0.5) {
                    push_tokens(&mut token_lists, rng, n_tokens)
                } else {
                    push_row(&mut rows, rng, relation_feature_dim)
                }),
            };
            let rel_graph = match mode {
                RelationFeatureMode::TextOnly => None,
                _ => match push_row(&mut rows, rng, relation_feature_dim) {
                    FeatSpec::Row(i) => Some(i),
                    FeatSpec::Tokens(_) => unreachable!(),
                },
            };
            examples.push(ExampleSpec {
                head,
                tail,
                rel_text,
                rel_graph,
                negatives,
            });
        }

        let l2 = if rng.gen_bool(0.5) { 0.0 } else { 1e-2 };
        GradCheckCase {
            params,
            loss,
            l2,
            rows,
            token_lists,
            examples,
        }
    }
}

/// Runs the scorer × loss grid with `configs_per_cell` random cases each.
pub fn run_gradcheck(configs_per_cell: usize, seed: u64) -> GradCheckReport {
    let losses: [(LossKind, &'static str); 2] =
        [(LossKind::Margin { gamma: 1.0 }, "margin"), (LossKind::Nll, "nll")];
    let scorers = [Scorer::TransEL1, Scorer::TransEL2, Scorer::Complex];

    let mut cells = Vec::new();
    for (cell_idx, scorer) in scorers.iter().enumerate() {
        for (loss_idx, (loss, loss_name)) in losses.iter().enumerate() {
            let mut worst: f64 = 0.0;
            for i in 0..configs_per_cell {
                let mut rng = substream_rng(
                    seed,
                    Stream::ProjectionInit,
                    (cell_idx * 2 + loss_idx) as u64,
                    i as u64,
                );
                let case = GradCheckCase::random(*scorer, *loss, &mut rng);
                let batch = case.batch();
                let (_, analytic) =
                    batch_loss_and_grads(&case.params, &batch, case.loss, case.l2)
                        .expect("valid case");
                let numeric = finite_difference_grads(
                    &case.params,
                    &batch,
                    case.loss,
                    case.l2,
                    DEFAULT_STEP,
                )
                .expect("valid case");
                worst = worst.max(max_relative_error(&analytic, &numeric));
            }
            cells.push(GradCheckCell {
                scorer: *scorer,
                loss: loss_name,
                configs: configs_per_cell,
                max_rel_err: worst,
            });
        }
    }

    GradCheckReport {
        cells,
        threshold: DEFAULT_THRESHOLD,
        step: DEFAULT_STEP,
    }
}
