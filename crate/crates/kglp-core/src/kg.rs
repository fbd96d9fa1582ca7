//! Triple data model: vocabularies, knowledge graphs, dataset splits, and
//! inductive-setting classification.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::marker::PhantomData;

/// Dense integer handle into a [`Vocab`].
pub trait GraphId: Copy + Ord {
    fn from_raw(raw: u32) -> Self;
    fn raw(self) -> u32;
    fn index(self) -> usize {
        self.raw() as usize
    }
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
        pub struct $name(pub u32);

        impl GraphId for $name {
            fn from_raw(raw: u32) -> Self {
                $name(raw)
            }
            fn raw(self) -> u32 {
                self.0
            }
        }
    };
}

id_type!(
    /// Handle for an entity within one vocabulary.
    EntityId
);
id_type!(
    /// Handle for a relation within one vocabulary.
    RelationId
);

/// Bijective map between string identifiers and dense integer handles.
///
/// Handles are contiguous from 0 in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab<I> {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
    _id: PhantomData<I>,
}

impl<I: GraphId> Vocab<I> {
    pub fn new() -> Self {
        Vocab {
            names: Vec::new(),
            index: BTreeMap::new(),
            _id: PhantomData,
        }
    }

    /// Returns the handle for `name`, interning it if unseen.
    pub fn intern(&mut self, name: &str) -> I {
        if let Some(&raw) = self.index.get(name) {
            return I::from_raw(raw);
        }
        let raw = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), raw);
        I::from_raw(raw)
    }

    pub fn get(&self, name: &str) -> Option<I> {
        self.index.get(name).map(|&raw| I::from_raw(raw))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// The string identifier behind a handle.
    ///
    /// Panics if the handle was not issued by this vocabulary.
    pub fn name(&self, id: I) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = I> + '_ {
        (0..self.names.len() as u32).map(I::from_raw)
    }

    /// Names in handle order.
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A single (head, relation, tail) statement in handle space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// A triple still in string-identifier form, as read from a file.
pub type StringTriple = (String, String, String);

/// Immutable triple store with per-relation indexes.
///
/// Vocabularies are interned in first-appearance order and duplicate triples
/// are dropped (the number removed is retained for reporting).
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vocab<EntityId>,
    relations: Vocab<RelationId>,
    triples: Vec<Triple>,
    by_relation: Vec<Vec<usize>>,
    head_counts: Vec<BTreeMap<EntityId, u64>>,
    tail_counts: Vec<BTreeMap<EntityId, u64>>,
    duplicates_removed: usize,
}

/// Interns string triples into a [`KnowledgeGraph`].
pub fn build_graph<I, S>(triples: I) -> KnowledgeGraph
where
    I: IntoIterator<Item = (S, S, S)>,
    S: AsRef<str>,
{
    let mut entities = Vocab::new();
    let mut relations = Vocab::new();
    let mut seen = BTreeSet::new();
    let mut interned = Vec::new();
    let mut duplicates_removed = 0usize;

    for (h, r, t) in triples {
        let triple = Triple::new(
            entities.intern(h.as_ref()),
            relations.intern(r.as_ref()),
            entities.intern(t.as_ref()),
        );
        if seen.insert(triple) {
            interned.push(triple);
        } else {
            duplicates_removed += 1;
        }
    }

    let mut by_relation = alloc::vec![Vec::new(); relations.len()];
    let mut head_counts = alloc::vec![BTreeMap::new(); relations.len()];
    let mut tail_counts = alloc::vec![BTreeMap::new(); relations.len()];
    for (i, t) in interned.iter().enumerate() {
        let r = t.relation.index();
        by_relation[r].push(i);
        *head_counts[r].entry(t.head).or_insert(0) += 1;
        *tail_counts[r].entry(t.tail).or_insert(0) += 1;
    }

    KnowledgeGraph {
        entities,
        relations,
        triples: interned,
        by_relation,
        head_counts,
        tail_counts,
        duplicates_removed,
    }
}

impl KnowledgeGraph {
    pub fn entities(&self) -> &Vocab<EntityId> {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab<RelationId> {
        &self.relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Triples whose relation is `r`.
    pub fn triples_of(&self, r: RelationId) -> impl Iterator<Item = &Triple> {
        self.by_relation[r.index()].iter().map(|&i| &self.triples[i])
    }

    pub fn relation_triple_count(&self, r: RelationId) -> usize {
        self.by_relation[r.index()].len()
    }

    /// How often `e` occurs at the head position of relation `r`.
    pub fn head_count(&self, r: RelationId, e: EntityId) -> u64 {
        self.head_counts[r.index()].get(&e).copied().unwrap_or(0)
    }

    /// How often `e` occurs at the tail position of relation `r`.
    pub fn tail_count(&self, r: RelationId, e: EntityId) -> u64 {
        self.tail_counts[r.index()].get(&e).copied().unwrap_or(0)
    }

    /// All (entity, count) pairs at the head position of `r`.
    pub fn head_counts(&self, r: RelationId) -> &BTreeMap<EntityId, u64> {
        &self.head_counts[r.index()]
    }

    /// All (entity, count) pairs at the tail position of `r`.
    pub fn tail_counts(&self, r: RelationId) -> &BTreeMap<EntityId, u64> {
        &self.tail_counts[r.index()]
    }

    pub fn duplicates_removed(&self) -> usize {
        self.duplicates_removed
    }

    /// Exports triples back to string form, in stored order.
    pub fn to_string_triples(&self) -> Vec<StringTriple> {
        self.triples
            .iter()
            .map(|t| {
                (
                    self.entities.name(t.head).to_string(),
                    self.relations.name(t.relation).to_string(),
                    self.entities.name(t.tail).to_string(),
                )
            })
            .collect()
    }
}

/// Free-text label and description attached to an entity or relation id.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TextRecord {
    pub id: String,
    pub label: String,
    pub description: String,
}

/// Which of the three dataset splits a triple belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        };
        f.write_str(s)
    }
}

/// How evaluation triples relate to the training vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InductiveSetting {
    /// All evaluation entities and relations are seen during training.
    Transductive,
    /// Some evaluation triple has one unseen endpoint; relations are seen.
    SemiInductive,
    /// Every evaluation triple has both endpoints unseen; relations are seen.
    FullyInductive,
    /// Some evaluation relation is never seen during training.
    TrulyInductive,
}

impl fmt::Display for InductiveSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InductiveSetting::Transductive => "transductive",
            InductiveSetting::SemiInductive => "semi_inductive",
            InductiveSetting::FullyInductive => "fully_inductive",
            InductiveSetting::TrulyInductive => "truly_inductive",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("test split contains no triples")]
    EmptyTestSplit,
}

/// Train/valid/test triples over one shared string-id space.
///
/// The global vocabularies span all three splits; each split additionally
/// carries its own [`KnowledgeGraph`] whose vocabulary contains exactly the
/// ids occurring in that split's triples.
#[derive(Clone, Debug)]
pub struct SplitDataset {
    entities: Vocab<EntityId>,
    relations: Vocab<RelationId>,
    triples: [Vec<Triple>; 3],
    graphs: [KnowledgeGraph; 3],
}

impl SplitDataset {
    pub fn new<I, S>(train: I, valid: I, test: I) -> Self
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: AsRef<str>,
    {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let mut triples: [Vec<Triple>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut graphs = Vec::with_capacity(3);

        for (slot, part) in [train, valid, test].into_iter().enumerate() {
            let mut seen = BTreeSet::new();
            let mut strings = Vec::new();
            for (h, r, t) in part {
                let triple = Triple::new(
                    entities.intern(h.as_ref()),
                    relations.intern(r.as_ref()),
                    entities.intern(t.as_ref()),
                );
                if seen.insert(triple) {
                    triples[slot].push(triple);
                    strings.push((
                        entities.name(triple.head).to_string(),
                        relations.name(triple.relation).to_string(),
                        entities.name(triple.tail).to_string(),
                    ));
                }
            }
            graphs.push(build_graph(strings));
        }

        let graphs: [KnowledgeGraph; 3] = graphs.try_into().expect("three splits");
        SplitDataset {
            entities,
            relations,
            triples,
            graphs,
        }
    }

    /// Global entity vocabulary spanning all splits.
    pub fn entities(&self) -> &Vocab<EntityId> {
        &self.entities
    }

    /// Global relation vocabulary spanning all splits.
    pub fn relations(&self) -> &Vocab<RelationId> {
        &self.relations
    }

    /// Triples of one split in global handle space.
    pub fn triples(&self, split: Split) -> &[Triple] {
        &self.triples[split as usize]
    }

    /// The split-local graph (its vocabulary covers exactly the split's ids).
    pub fn graph(&self, split: Split) -> &KnowledgeGraph {
        &self.graphs[split as usize]
    }

    /// Global entity ids occurring in one split.
    pub fn entity_ids(&self, split: Split) -> BTreeSet<EntityId> {
        self.triples[split as usize]
            .iter()
            .flat_map(|t| [t.head, t.tail])
            .collect()
    }

    /// Global relation ids occurring in one split.
    pub fn relation_ids(&self, split: Split) -> BTreeSet<RelationId> {
        self.triples[split as usize]
            .iter()
            .map(|t| t.relation)
            .collect()
    }

    /// Classifies the dataset into its inductive setting.
    ///
    /// Relation unseen-ness takes priority: any unseen evaluation relation
    /// makes the dataset truly-inductive regardless of entity overlap.
    pub fn classify_setting(&self) -> Result<InductiveSetting, ClassifyError> {
        if self.triples(Split::Test).is_empty() {
            return Err(ClassifyError::EmptyTestSplit);
        }

        let train_entities = self.entity_ids(Split::Train);
        let train_relations = self.relation_ids(Split::Train);
        let eval_triples = || {
            self.triples(Split::Valid)
                .iter()
                .chain(self.triples(Split::Test))
        };

        if eval_triples().any(|t| !train_relations.contains(&t.relation)) {
            return Ok(InductiveSetting::TrulyInductive);
        }
        let unseen = |e: &EntityId| !train_entities.contains(e);
        if eval_triples().all(|t| unseen(&t.head) && unseen(&t.tail)) {
            return Ok(InductiveSetting::FullyInductive);
        }
        if eval_triples().any(|t| unseen(&t.head) || unseen(&t.tail)) {
            return Ok(InductiveSetting::SemiInductive);
        }
        Ok(InductiveSetting::Transductive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn figure_graph() -> KnowledgeGraph {
        build_graph([
            ("e1", "r1", "e1"),
            ("e1", "r2", "e2"),
            ("e1", "r4", "e4"),
            ("e2", "r3", "e3"),
            ("e2", "r2", "e4"),
        ])
    }

    #[test]
    fn build_graph_single_triple() {
        let g = build_graph([("a", "r", "b")]);
        assert_eq!(g.entities().len(), 2);
        assert_eq!(g.relations().len(), 1);
        assert_eq!(g.triples().len(), 1);
    }

    #[test]
    fn build_graph_five_triple_fixture() {
        let g = figure_graph();
        assert_eq!(g.entities().len(), 4);
        assert_eq!(g.relations().len(), 4);
        assert_eq!(g.triples().len(), 5);
    }

    #[test]
    fn build_graph_removes_duplicates() {
        let g = build_graph([("a", "r", "b"), ("a", "r", "b"), ("a", "r", "c")]);
        assert_eq!(g.triples().len(), 2);
        assert_eq!(g.duplicates_removed(), 1);
    }

    #[test]
    fn interning_preserves_first_appearance_order() {
        let g = build_graph([("b", "r2", "a"), ("a", "r1", "b")]);
        assert_eq!(g.entities().name(EntityId(0)), "b");
        assert_eq!(g.entities().name(EntityId(1)), "a");
        assert_eq!(g.relations().name(RelationId(0)), "r2");
    }

    #[test]
    fn position_counts_sum_to_relation_size() {
        let g = figure_graph();
        for r in g.relations().ids() {
            let heads: u64 = g.head_counts(r).values().sum();
            let tails: u64 = g.tail_counts(r).values().sum();
            assert_eq!(heads, g.relation_triple_count(r) as u64);
            assert_eq!(tails, g.relation_triple_count(r) as u64);
        }
    }

    #[test]
    fn classify_transductive() {
        let splits = SplitDataset::new(
            vec![("a", "r", "b"), ("b", "r", "c")],
            vec![("a", "r", "c")],
            vec![("c", "r", "a")],
        );
        assert_eq!(
            splits.classify_setting().unwrap(),
            InductiveSetting::Transductive
        );
    }

    #[test]
    fn classify_semi_inductive() {
        let splits = SplitDataset::new(
            vec![("a", "r", "b")],
            vec![("a", "r", "x")],
            vec![("y", "r", "b")],
        );
        assert_eq!(
            splits.classify_setting().unwrap(),
            InductiveSetting::SemiInductive
        );
    }

    #[test]
    fn classify_fully_inductive() {
        let splits = SplitDataset::new(
            vec![("a", "r", "b")],
            vec![("x", "r", "y")],
            vec![("y", "r", "z")],
        );
        assert_eq!(
            splits.classify_setting().unwrap(),
            InductiveSetting::FullyInductive
        );
    }

    #[test]
    fn classify_truly_inductive_on_disjoint_relations() {
        let splits = SplitDataset::new(
            vec![("a", "r1", "b")],
            vec![("a", "r2", "b")],
            vec![("x", "r3", "y")],
        );
        assert_eq!(
            splits.classify_setting().unwrap(),
            InductiveSetting::TrulyInductive
        );
    }

    #[test]
    fn classify_rejects_empty_test_split() {
        let splits = SplitDataset::new(
            vec![("a", "r", "b")],
            vec![("a", "r", "b")],
            Vec::<(&str, &str, &str)>::new(),
        );
        assert_eq!(
            splits.classify_setting(),
            Err(ClassifyError::EmptyTestSplit)
        );
    }

    #[test]
    fn split_vocabularies_cover_exactly_their_triples() {
        let splits = SplitDataset::new(
            vec![("a", "r1", "b")],
            vec![("a", "r2", "c")],
            vec![("d", "r3", "e")],
        );
        let valid = splits.graph(Split::Valid);
        assert_eq!(valid.entities().len(), 2);
        assert_eq!(valid.relations().len(), 1);
        assert!(valid.entities().contains("a"));
        assert!(valid.entities().contains("c"));
        assert!(!valid.entities().contains("b"));
    }

    fn arb_triples() -> impl Strategy<Value = Vec<(String, String, String)>> {
        proptest::collection::vec(
            (0u8..12, 0u8..4, 0u8..12).prop_map(|(h, r, t)| {
                (
                    alloc::format!("e{h}"),
                    alloc::format!("r{r}"),
                    alloc::format!("e{t}"),
                )
            }),
            1..60,
        )
    }

    proptest! {
        #[test]
        fn round_trip_preserves_triple_set(triples in arb_triples()) {
            let g = build_graph(triples.clone());
            let exported: BTreeSet<_> = g.to_string_triples().into_iter().collect();
            let input: BTreeSet<_> = triples.into_iter().collect();
            prop_assert_eq!(exported, input);
        }

        #[test]
        fn index_counts_consistent(triples in arb_triples()) {
            let g = build_graph(triples);
            for r in g.relations().ids() {
                let heads: u64 = g.head_counts(r).values().sum();
                let tails: u64 = g.tail_counts(r).values().sum();
                prop_assert_eq!(heads, g.relation_triple_count(r) as u64);
                prop_assert_eq!(tails, g.relation_triple_count(r) as u64);
            }
        }

        #[test]
        fn classification_is_order_independent(
            train in arb_triples(),
            valid in arb_triples(),
            test in arb_triples(),
            seed in any::<u64>(),
        ) {
            let forward = SplitDataset::new(train.clone(), valid.clone(), test.clone());
            let mut shuffled = (train, valid, test);
            let mut state = seed | 1;
            let mut shuffle = |v: &mut Vec<(String, String, String)>| {
                for i in (1..v.len()).rev() {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    v.swap(i, (state >> 33) as usize % (i + 1));
                }
            };
            shuffle(&mut shuffled.0);
            shuffle(&mut shuffled.1);
            shuffle(&mut shuffled.2);
            let reordered = SplitDataset::new(shuffled.0, shuffled.1, shuffled.2);
            prop_assert_eq!(forward.classify_setting(), reordered.classify_setting());
        }
    }
}
