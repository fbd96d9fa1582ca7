//! Pipeline for building truly-inductive (relation-disjoint) link-prediction
//! datasets from raw triples: rare-relation filtering, label/inverse/
//! duplicate cleanup, type-aware relation partitioning, per-part k-core
//! pruning, and skew filtering.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::kg::{EntityId, GraphId, RelationId, SplitDataset, StringTriple, TextRecord, Triple, Vocab};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(&'static str),
    #[error("part {0} is empty after processing")]
    EmptyPart(usize),
}

/// Maps relation ids to type ids; relations without an entry behave as
/// singleton types.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationTypeMap {
    map: BTreeMap<String, String>,
}

impl RelationTypeMap {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        RelationTypeMap { map }
    }

    pub fn get(&self, relation: &str) -> Option<&str> {
        self.map.get(relation).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl FromIterator<(String, String)> for RelationTypeMap {
    fn from_iter<T: IntoIterator<Item = (String, String)>>(iter: T) -> Self {
        RelationTypeMap {
            map: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GenConfig {
    /// Minimum triples a relation needs to survive.
    pub min_triples: u64,
    /// Entity-occurrence core order per part.
    pub k_per_split: [usize; 3],
    /// Fraction of relations aimed at each part.
    pub ratios: [f64; 3],
    /// A relation is skewed when one entity holds ≥ this fraction of a
    /// position.
    pub skew_threshold: f64,
    /// Overlap fraction above which a relation counts as inverse/duplicate.
    pub inverse_threshold: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            min_triples: 3,
            k_per_split: [10, 6, 5],
            ratios: [0.5, 0.25, 0.25],
            skew_threshold: 0.5,
            inverse_threshold: 0.9,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.min_triples < 1 {
            return Err(GenError::Config("min_triples must be at least 1"));
        }
        if self.k_per_split.iter().any(|&k| k < 1) {
            return Err(GenError::Config("k values must be at least 1"));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.ratios.iter().any(|&r| r <= 0.0) {
            return Err(GenError::Config("ratios must be positive and sum to 1"));
        }
        if !(self.skew_threshold > 0.0 && self.skew_threshold <= 1.0) {
            return Err(GenError::Config("skew_threshold must be in (0, 1]"));
        }
        if !(self.inverse_threshold > 0.5 && self.inverse_threshold <= 1.0) {
            return Err(GenError::Config("inverse_threshold must be in (0.5, 1]"));
        }
        Ok(())
    }
}

fn relation_counts(triples: &[Triple]) -> BTreeMap<RelationId, u64> {
    let mut counts = BTreeMap::new();
    for t in triples {
        *counts.entry(t.relation).or_insert(0) += 1;
    }
    counts
}

/// Drops relations occurring in fewer than `n` triples (with their triples).
pub fn filter_rare_relations(triples: Vec<Triple>, n: u64) -> Vec<Triple> {
    let counts = relation_counts(&triples);
    triples
        .into_iter()
        .filter(|t| counts[&t.relation] >= n)
        .collect()
}

/// Flags relations that mirror (inverse) or repeat (duplicate) a larger
/// relation on at least `theta` of their triples. Of each detected pair the
/// smaller relation is dropped; on equal sizes the lexicographically larger
/// id goes.
pub fn detect_inverse_and_duplicates(
    triples: &[Triple],
    theta: f64,
    relation_name: impl Fn(RelationId) -> String,
) -> BTreeSet<RelationId> {
    let mut pairs_of: BTreeMap<RelationId, BTreeSet<(EntityId, EntityId)>> = BTreeMap::new();
    for t in triples {
        pairs_of.entry(t.relation).or_default().insert((t.head, t.tail));
    }
    let relations: Vec<RelationId> = pairs_of.keys().copied().collect();

    let mut drop = BTreeSet::new();
    for (i, &a) in relations.iter().enumerate() {
        for &b in &relations[i + 1..] {
            let (na, nb) = (pairs_of[&a].len(), pairs_of[&b].len());
            // `small` is the candidate to drop.
            let (big, small) = if na > nb {
                (a, b)
            } else if nb > na {
                (b, a)
            } else if relation_name(a) <= relation_name(b) {
                (a, b)
            } else {
                (b, a)
            };
            let small_pairs = &pairs_of[&small];
            let big_pairs = &pairs_of[&big];
            let inverse_hits = small_pairs
                .iter()
                .filter(|(h, t)| big_pairs.contains(&(*t, *h)))
                .count();
            let duplicate_hits = small_pairs
                .iter()
                .filter(|pair| big_pairs.contains(pair))
                .count();
            let fraction = |hits: usize| hits as f64 / small_pairs.len() as f64;
            if fraction(inverse_hits) >= theta || fraction(duplicate_hits) >= theta {
                drop.insert(small);
            }
        }
    }
    drop
}

/// Partitions relations into three parts, keeping every relation of one type
/// together. Types are placed largest-first into the part with the largest
/// remaining deficit; the seed shuffles equal-size placement order.
pub fn split_relations(
    relations: &BTreeSet<RelationId>,
    type_of: &BTreeMap<RelationId, String>,
    ratios: [f64; 3],
    seed: u64,
) -> [BTreeSet<RelationId>; 3] {
    let mut groups: BTreeMap<String, Vec<RelationId>> = BTreeMap::new();
    for &r in relations {
        let key = match type_of.get(&r) {
            Some(t) => alloc::format!("type:{t}"),
            None => alloc::format!("singleton:{}", r.raw()),
        };
        groups.entry(key).or_default().push(r);
    }

    let mut group_list: Vec<Vec<RelationId>> = groups.into_values().collect();
    let mut rng = stream_rng(seed, Stream::Splits);
    for i in (1..group_list.len()).rev() {
        group_list.swap(i, rng.gen_range(0..=i));
    }
    // Stable: equal sizes stay in shuffled order.
    group_list.sort_by_key(|g| core::cmp::Reverse(g.len()));

    let total = relations.len() as f64;
    let mut parts: [BTreeSet<RelationId>; 3] = Default::default();
    for group in group_list {
        let deficit = |i: usize| ratios[i] * total - parts[i].len() as f64;
        let target = (0..3)
            .max_by(|&x, &y| deficit(x).partial_cmp(&deficit(y)).expect("finite"))
            .expect("three parts");
        parts[target].extend(group);
    }
    parts
}

/// Iteratively removes entities occurring in fewer than `k` triples, and
/// their triples, until a fixed point. An entity occurring twice in one
/// triple (a self-loop) counts once for that triple.
pub fn kcore(mut triples: Vec<Triple>, k: usize) -> Vec<Triple> {
    loop {
        let mut occurrences: BTreeMap<EntityId, usize> = BTreeMap::new();
        for t in &triples {
            *occurrences.entry(t.head).or_insert(0) += 1;
            if t.tail != t.head {
                *occurrences.entry(t.tail).or_insert(0) += 1;
            }
        }
        let weak: BTreeSet<EntityId> = occurrences
            .iter()
            .filter(|&(_, &c)| c < k)
            .map(|(&e, _)| e)
            .collect();
        if weak.is_empty() {
            return triples;
        }
        triples.retain(|t| !weak.contains(&t.head) && !weak.contains(&t.tail));
    }
}

/// Drops relations where a single entity occupies the head (or tail)
/// position in at least `threshold` of the relation's triples.
pub fn skew_filter(mut triples: Vec<Triple>, threshold: f64) -> Vec<Triple> {
    let mut heads: BTreeMap<RelationId, BTreeMap<EntityId, u64>> = BTreeMap::new();
    let mut tails: BTreeMap<RelationId, BTreeMap<EntityId, u64>> = BTreeMap::new();
    let counts = relation_counts(&triples);
    for t in &triples {
        *heads.entry(t.relation).or_default().entry(t.head).or_insert(0) += 1;
        *tails.entry(t.relation).or_default().entry(t.tail).or_insert(0) += 1;
    }
    let skewed: BTreeSet<RelationId> = counts
        .iter()
        .filter(|&(r, &n)| {
            let max_of = |m: &BTreeMap<RelationId, BTreeMap<EntityId, u64>>| {
                m[r].values().copied().max().unwrap_or(0)
            };
            let bound = threshold * n as f64;
            max_of(&heads) as f64 >= bound || max_of(&tails) as f64 >= bound
        })
        .map(|(&r, _)| r)
        .collect();
    triples.retain(|t| !skewed.contains(&t.relation));
    triples
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartStats {
    pub relations_assigned: usize,
    pub triples_extracted: usize,
    pub triples_after_kcore: usize,
    pub triples_after_skew: usize,
    pub final_relations: usize,
    pub final_entities: usize,
}

/// Per-step attrition counts of one generator run.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenStats {
    pub input_triples: usize,
    pub duplicate_triples_removed: usize,
    pub triples_after_rare_filter: usize,
    pub rare_relations_dropped: usize,
    pub triples_after_label_filter: usize,
    pub unlabeled_relations_dropped: usize,
    pub inverse_or_duplicate_relations_dropped: usize,
    pub triples_after_inverse_filter: usize,
    pub parts: [PartStats; 3],
}

/// Runs the full pipeline: rare-relation filter → label / inverse /
/// duplicate cleanup → type-aware relation split → per-part k-core → skew
/// filter. The output classifies as truly-inductive by construction.
pub fn generate(
    raw: &[StringTriple],
    types: &RelationTypeMap,
    entity_texts: &[TextRecord],
    relation_texts: &[TextRecord],
    config: &GenConfig,
) -> Result<(SplitDataset, GenStats), GenError> {
    config.validate()?;
    let mut stats = GenStats {
        input_triples: raw.len(),
        ..GenStats::default()
    };

    // Intern into a working id space.
    let mut entities: Vocab<EntityId> = Vocab::new();
    let mut relations: Vocab<RelationId> = Vocab::new();
    let mut seen = BTreeSet::new();
    let mut triples = Vec::new();
    for (h, r, t) in raw {
        let triple = Triple::new(entities.intern(h), relations.intern(r), entities.intern(t));
        if seen.insert(triple) {
            triples.push(triple);
        }
    }
    stats.duplicate_triples_removed = raw.len() - triples.len();

    // Step: drop rare relations.
    let relations_before = relation_counts(&triples).len();
    let triples = filter_rare_relations(triples, config.min_triples);
    stats.rare_relations_dropped = relations_before - relation_counts(&triples).len();
    stats.triples_after_rare_filter = triples.len();

    // Step: drop triples touching unlabeled entities or relations, then
    // inverse and duplicate relations.
    let labeled = |records: &[TextRecord]| -> BTreeSet<String> {
        records
            .iter()
            .filter(|r| !r.label.is_empty())
            .map(|r| r.id.clone())
            .collect()
    };
    let labeled_entities = labeled(entity_texts);
    let labeled_relations = labeled(relation_texts);
    let relations_before = relation_counts(&triples).len();
    let triples: Vec<Triple> = triples
        .into_iter()
        .filter(|t| {
            labeled_entities.contains(entities.name(t.head))
                && labeled_entities.contains(entities.name(t.tail))
                && labeled_relations.contains(relations.name(t.relation))
        })
        .collect();
    stats.unlabeled_relations_dropped = relations_before - relation_counts(&triples).len();
    stats.triples_after_label_filter = triples.len();

    let drop = detect_inverse_and_duplicates(&triples, config.inverse_threshold, |r| {
        relations.name(r).to_string()
    });
    stats.inverse_or_duplicate_relations_dropped = drop.len();
    let triples: Vec<Triple> = triples
        .into_iter()
        .filter(|t| !drop.contains(&t.relation))
        .collect();
    stats.triples_after_inverse_filter = triples.len();

    // Step: partition relations and extract per-part triples.
    let surviving: BTreeSet<RelationId> = triples.iter().map(|t| t.relation).collect();
    let type_of: BTreeMap<RelationId, String> = surviving
        .iter()
        .filter_map(|&r| types.get(relations.name(r)).map(|t| (r, t.to_string())))
        .collect();
    let parts = split_relations(&surviving, &type_of, config.ratios, config.seed);

    // Steps: per-part k-core, then skew filter.
    let mut outputs: Vec<Vec<StringTriple>> = Vec::with_capacity(3);
    for (i, part) in parts.iter().enumerate() {
        let extracted: Vec<Triple> = triples
            .iter()
            .filter(|t| part.contains(&t.relation))
            .copied()
            .collect();
        stats.parts[i].relations_assigned = part.len();
        stats.parts[i].triples_extracted = extracted.len();

        let cored = kcore(extracted, config.k_per_split[i]);
        stats.parts[i].triples_after_kcore = cored.len();

        let final_triples = skew_filter(cored, config.skew_threshold);
        stats.parts[i].triples_after_skew = final_triples.len();
        if final_triples.is_empty() {
            return Err(GenError::EmptyPart(i));
        }
        stats.parts[i].final_relations = relation_counts(&final_triples).len();
        stats.parts[i].final_entities = final_triples
            .iter()
            .flat_map(|t| [t.head, t.tail])
            .collect::<BTreeSet<_>>()
            .len();

        outputs.push(
            final_triples
                .iter()
                .map(|t| {
                    (
                        entities.name(t.head).to_string(),
                        relations.name(t.relation).to_string(),
                        entities.name(t.tail).to_string(),
                    )
                })
                .collect(),
        );
    }

    let test = outputs.pop().expect("three parts");
    let valid = outputs.pop().expect("three parts");
    let train = outputs.pop().expect("three parts");
    Ok((SplitDataset::new(train, valid, test), stats))
}
