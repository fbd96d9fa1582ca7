//! Filtered ranking evaluation: MRR and Hits@{1,3,10} over head- and
//! tail-prediction queries, with average-rank tie handling and a brute-force
//! oracle recomputing every rank without caching or indexes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::features::{FeatureMatrix, RelationFeatureMode};
use crate::kg::{
    ClassifyError, EntityId, GraphId, InductiveSetting, RelationId, Split, SplitDataset, Triple,
};
use crate::model::{score, FeatureInput, ModelError, ModelParams};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("evaluation split contains no triples")]
    EmptyEvalSplit,
    #[error("target entity is not in the candidate set")]
    TargetMissing,
    #[error("{kind} `{id}` has no feature row")]
    MissingFeature { kind: &'static str, id: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Which triple slot a query ranks candidates for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Head,
    Tail,
}

/// One ranking query: predict the masked slot of `triple`.
#[derive(Clone, Copy, Debug)]
pub struct RankQuery {
    pub triple: Triple,
    pub direction: Direction,
}

/// Candidate pool selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CandidatePolicy {
    /// Every entity in the union of split vocabularies.
    UnionVocab,
    /// Only entities occurring in the evaluated split.
    SplitOnly,
}

impl CandidatePolicy {
    pub fn descriptor(self) -> &'static str {
        match self {
            CandidatePolicy::UnionVocab => "all_entities",
            CandidatePolicy::SplitOnly => "split_entities",
        }
    }
}

/// Known true triples from train ∪ valid ∪ test, for filtered ranking.
#[derive(Clone, Debug, Default)]
pub struct FilterIndex {
    tails: BTreeMap<(RelationId, EntityId), BTreeSet<EntityId>>,
    heads: BTreeMap<(RelationId, EntityId), BTreeSet<EntityId>>,
}

impl FilterIndex {
    pub fn build(splits: &SplitDataset) -> Self {
        let mut index = FilterIndex::default();
        for split in Split::ALL {
            for t in splits.triples(split) {
                index
                    .tails
                    .entry((t.relation, t.head))
                    .or_default()
                    .insert(t.tail);
                index
                    .heads
                    .entry((t.relation, t.tail))
                    .or_default()
                    .insert(t.head);
            }
        }
        index
    }

    pub fn true_tails(&self, relation: RelationId, head: EntityId) -> Option<&BTreeSet<EntityId>> {
        self.tails.get(&(relation, head))
    }

    pub fn true_heads(&self, relation: RelationId, tail: EntityId) -> Option<&BTreeSet<EntityId>> {
        self.heads.get(&(relation, tail))
    }
}

/// Rank of one query with the filtered pool size that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryRank {
    /// 1 + #strictly-greater + #ties/2 (real-valued under ties).
    pub rank: f64,
    /// Candidates surviving the filter, target included.
    pub pool: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationMetrics {
    pub n_queries: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

/// Aggregate ranking outcome over all queries of one evaluation.
#[derive(Clone, Debug)]
pub struct RankingReport {
    pub setting: InductiveSetting,
    pub candidate_policy: &'static str,
    pub n_queries: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub queries: Vec<QueryRank>,
    pub per_relation: Vec<(String, RelationMetrics)>,
}

fn aggregate(ranks: &[f64]) -> (f64, f64, f64, f64) {
    if ranks.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n;
    let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    (mrr, hits(1.0), hits(3.0), hits(10.0))
}

/// Encodings shared by every query of one evaluation run.
#[derive(Clone, Copy, Debug)]
pub struct EvalFeatures<'a> {
    pub entities: &'a FeatureMatrix,
    pub rel_text: Option<&'a FeatureMatrix>,
    pub rel_graph: Option<&'a FeatureMatrix>,
}

impl EvalFeatures<'_> {
    fn encode_relation(
        &self,
        params: &ModelParams,
        name: &str,
    ) -> Result<Vec<f64>, EvalError> {
        let mode = params.relation_mode();
        let text = if matches!(mode, RelationFeatureMode::TextOnly | RelationFeatureMode::Concat) {
            let m = self.rel_text.ok_or(EvalError::MissingFeature {
                kind: "relation text features",
                id: name.to_string(),
            })?;
            Some(m.row_of(name).ok_or_else(|| EvalError::MissingFeature {
                kind: "relation text feature",
                id: name.to_string(),
            })?)
        } else {
            None
        };
        let graph = if matches!(mode, RelationFeatureMode::GraphOnly | RelationFeatureMode::Concat)
        {
            let m = self.rel_graph.ok_or(EvalError::MissingFeature {
                kind: "relation graph features",
                id: name.to_string(),
            })?;
            Some(m.row_of(name).ok_or_else(|| EvalError::MissingFeature {
                kind: "relation graph feature",
                id: name.to_string(),
            })?)
        } else {
            None
        };
        Ok(params.encode_relation(text.map(FeatureInput::Row), graph)?)
    }

    fn encode_entity(&self, params: &ModelParams, name: &str) -> Result<Vec<f64>, EvalError> {
        let row = self
            .entities
            .row_of(name)
            .ok_or_else(|| EvalError::MissingFeature {
                kind: "entity feature",
                id: name.to_string(),
            })?;
        Ok(params.encode_entity(FeatureInput::Row(row))?)
    }
}

fn candidate_pool(splits: &SplitDataset, eval_split: Split, policy: CandidatePolicy) -> Vec<EntityId> {
    match policy {
        CandidatePolicy::UnionVocab => splits.entities().ids().collect(),
        CandidatePolicy::SplitOnly => splits.entity_ids(eval_split).into_iter().collect(),
    }
}

/// Scores every candidate for the queried slot, removes known true triples
/// other than the target, and ranks the target with average-rank ties.
pub fn rank_query(
    params: &ModelParams,
    splits: &SplitDataset,
    features: &EvalFeatures<'_>,
    query: &RankQuery,
    candidates: &[EntityId],
    filter: &FilterIndex,
) -> Result<QueryRank, EvalError> {
    let triple = query.triple;
    let target = match query.direction {
        Direction::Tail => triple.tail,
        Direction::Head => triple.head,
    };
    if !candidates.contains(&target) {
        return Err(EvalError::TargetMissing);
    }

    let relation_name = splits.relations().name(triple.relation);
    let r_vec = features.encode_relation(params, relation_name)?;
    let fixed = match query.direction {
        Direction::Tail => triple.head,
        Direction::Head => triple.tail,
    };
    let fixed_vec = features.encode_entity(params, splits.entities().name(fixed))?;
    let target_vec = features.encode_entity(params, splits.entities().name(target))?;

    let known = match query.direction {
        Direction::Tail => filter.true_tails(triple.relation, triple.head),
        Direction::Head => filter.true_heads(triple.relation, triple.tail),
    };

    let target_score = match query.direction {
        Direction::Tail => score(params.scorer(), &fixed_vec, &r_vec, &target_vec)?,
        Direction::Head => score(params.scorer(), &target_vec, &r_vec, &fixed_vec)?,
    };

    let mut greater = 0usize;
    let mut ties = 0usize;
    let mut pool = 1usize;
    for &c in candidates {
        if c == target {
            continue;
        }
        if known.is_some_and(|set| set.contains(&c)) {
            continue;
        }
        pool += 1;
        let c_vec = features.encode_entity(params, splits.entities().name(c))?;
        let s = match query.direction {
            Direction::Tail => score(params.scorer(), &fixed_vec, &r_vec, &c_vec)?,
            Direction::Head => score(params.scorer(), &c_vec, &r_vec, &fixed_vec)?,
        };
        if s > target_score {
            greater += 1;
        } else if s == target_score {
            ties += 1;
        }
    }

    Ok(QueryRank {
        rank: 1.0 + greater as f64 + ties as f64 / 2.0,
        pool,
    })
}

fn report_from_ranks(
    splits: &SplitDataset,
    policy: CandidatePolicy,
    queries: Vec<QueryRank>,
    by_relation: BTreeMap<String, Vec<f64>>,
) -> Result<RankingReport, EvalError> {
    let setting = splits.classify_setting()?;
    let ranks: Vec<f64> = queries.iter().map(|q| q.rank).collect();
    let (mrr, hits1, hits3, hits10) = aggregate(&ranks);
    let per_relation = by_relation
        .into_iter()
        .map(|(name, ranks)| {
            let (mrr, hits1, hits3, hits10) = aggregate(&ranks);
            (
                name,
                RelationMetrics {
                    n_queries: ranks.len(),
                    mrr,
                    hits1,
                    hits3,
                    hits10,
                },
            )
        })
        .collect();
    Ok(RankingReport {
        setting,
        candidate_policy: policy.descriptor(),
        n_queries: queries.len(),
        mrr,
        hits1,
        hits3,
        hits10,
        queries,
        per_relation,
    })
}

/// Two queries per triple of `eval_split` (head and tail prediction) with
/// filtered ranking. Candidate entity encodings are computed once and shared
/// across queries.
pub fn evaluate(
    params: &ModelParams,
    splits: &SplitDataset,
    features: &EvalFeatures<'_>,
    eval_split: Split,
    policy: CandidatePolicy,
) -> Result<RankingReport, EvalError> {
    let triples = splits.triples(eval_split);
    if triples.is_empty() {
        return Err(EvalError::EmptyEvalSplit);
    }
    let candidates = candidate_pool(splits, eval_split, policy);
    let filter = FilterIndex::build(splits);

    // Encode each candidate once; map global entity id → cache slot.
    let eff = params.effective_dim();
    let mut cache = Vec::with_capacity(candidates.len() * eff);
    let mut slot_of = alloc::vec![usize::MAX; splits.entities().len()];
    for (slot, &c) in candidates.iter().enumerate() {
        let v = features.encode_entity(params, splits.entities().name(c))?;
        cache.extend_from_slice(&v);
        slot_of[c.index()] = slot;
    }
    let cached = |e: EntityId| -> &[f64] {
        let slot = slot_of[e.index()];
        &cache[slot * eff..(slot + 1) * eff]
    };

    let mut relation_cache: BTreeMap<RelationId, Vec<f64>> = BTreeMap::new();
    for t in triples {
        if !relation_cache.contains_key(&t.relation) {
            let name = splits.relations().name(t.relation);
            relation_cache.insert(t.relation, features.encode_relation(params, name)?);
        }
    }

    let mut queries = Vec::with_capacity(triples.len() * 2);
    let mut by_relation: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in triples {
        let r_vec = &relation_cache[&t.relation];
        for direction in [Direction::Tail, Direction::Head] {
            let (fixed, target) = match direction {
                Direction::Tail => (t.head, t.tail),
                Direction::Head => (t.tail, t.head),
            };
            if slot_of[target.index()] == usize::MAX {
                return Err(EvalError::TargetMissing);
            }
            // The fixed side can fall outside a split-only pool.
            let fixed_vec = if slot_of[fixed.index()] != usize::MAX {
                cached(fixed).to_vec()
            } else {
                features.encode_entity(params, splits.entities().name(fixed))?
            };
            let known = match direction {
                Direction::Tail => filter.true_tails(t.relation, t.head),
                Direction::Head => filter.true_heads(t.relation, t.tail),
            };
            let target_score = match direction {
                Direction::Tail => score(params.scorer(), &fixed_vec, r_vec, cached(target))?,
                Direction::Head => score(params.scorer(), cached(target), r_vec, &fixed_vec)?,
            };
            let mut greater = 0usize;
            let mut ties = 0usize;
            let mut pool = 1usize;
            for &c in &candidates {
                if c == target {
                    continue;
                }
                if known.is_some_and(|set| set.contains(&c)) {
                    continue;
                }
                pool += 1;
                let s = match direction {
                    Direction::Tail => score(params.scorer(), &fixed_vec, r_vec, cached(c))?,
                    Direction::Head => score(params.scorer(), cached(c), r_vec, &fixed_vec)?,
                };
                if s > target_score {
                    greater += 1;
                } else if s == target_score {
                    ties += 1;
                }
            }
            let rank = QueryRank {
                rank: 1.0 + greater as f64 + ties as f64 / 2.0,
                pool,
            };
            queries.push(rank);
            by_relation
                .entry(splits.relations().name(t.relation).to_string())
                .or_default()
                .push(rank.rank);
        }
    }

    report_from_ranks(splits, policy, queries, by_relation)
}

/// Recomputes every rank with no caching, no indexes, and per-query linear
/// scans over all split triples for the filter. The correctness oracle for
/// [`evaluate`] on small instances.
pub fn brute_force_oracle(
    params: &ModelParams,
    splits: &SplitDataset,
    features: &EvalFeatures<'_>,
    eval_split: Split,
    policy: CandidatePolicy,
) -> Result<RankingReport, EvalError> {
    let triples = splits.triples(eval_split);
    if triples.is_empty() {
        return Err(EvalError::EmptyEvalSplit);
    }
    let candidates = candidate_pool(splits, eval_split, policy);

    let is_known = |h: EntityId, r: RelationId, t: EntityId| -> bool {
        Split::ALL.iter().any(|&s| {
            splits
                .triples(s)
                .iter()
                .any(|x| x.head == h && x.relation == r && x.tail == t)
        })
    };

    let mut queries = Vec::new();
    let mut by_relation: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in triples {
        let name = splits.relations().name(t.relation);
        for direction in [Direction::Tail, Direction::Head] {
            let target = match direction {
                Direction::Tail => t.tail,
                Direction::Head => t.head,
            };
            if !candidates.contains(&target) {
                return Err(EvalError::TargetMissing);
            }
            let r_vec = features.encode_relation(params, name)?;
            let mut scored: Vec<(EntityId, f64)> = Vec::new();
            for &c in &candidates {
                let (h, tt) = match direction {
                    Direction::Tail => (t.head, c),
                    Direction::Head => (c, t.tail),
                };
                if c != target && is_known(h, t.relation, tt) {
                    continue;
                }
                let h_vec = features.encode_entity(params, splits.entities().name(h))?;
                let t_vec = features.encode_entity(params, splits.entities().name(tt))?;
                scored.push((c, score(params.scorer(), &h_vec, &r_vec, &t_vec)?));
            }
            let target_score = scored
                .iter()
                .find(|(c, _)| *c == target)
                .expect("target retained")
                .1;
            let greater = scored.iter().filter(|&&(_, s)| s > target_score).count();
            let ties = scored
                .iter()
                .filter(|&&(c, s)| c != target && s == target_score)
                .count();
            let rank = QueryRank {
                rank: 1.0 + greater as f64 + ties as f64 / 2.0,
                pool: scored.len(),
            };
            queries.push(rank);
            by_relation
                .entry(name.to_string())
                .or_default()
                .push(rank.rank);
        }
    }

    report_from_ranks(splits, policy, queries, by_relation)
}
