//! Weighted directed relation-relation network construction.
//!
//! Two relations become linked when their triples share entities: chained
//! (the tail of one triple is the head of another) or at the same position
//! (shared head or shared tail). Edge weights count the qualifying ordered
//! triple pairs, so relations that co-occur over many entities are strongly
//! connected while relations sharing no entity stay disconnected.

use alloc::vec::Vec;

use crate::kg::{EntityId, GraphId, KnowledgeGraph, RelationId, Vocab};

/// One weighted directed edge between two relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct NetworkEdge {
    pub source: RelationId,
    pub target: RelationId,
    pub weight: u64,
}

/// Weighted directed graph whose nodes are relations.
///
/// Relations without any edge stay in the node set; downstream embedding
/// applies its fallback to them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationNetwork {
    relations: Vocab<RelationId>,
    edges: Vec<NetworkEdge>,
    adjacency: Vec<Vec<(RelationId, u64)>>,
}

impl RelationNetwork {
    /// Assembles a network from an edge list. Zero-weight edges are never
    /// materialized; duplicate (source, target) pairs must not occur.
    pub fn from_edges(relations: Vocab<RelationId>, mut edges: Vec<NetworkEdge>) -> Self {
        debug_assert!(edges.iter().all(|e| e.weight >= 1));
        edges.sort_unstable();
        let mut adjacency = alloc::vec![Vec::new(); relations.len()];
        for e in &edges {
            adjacency[e.source.index()].push((e.target, e.weight));
        }
        RelationNetwork {
            relations,
            edges,
            adjacency,
        }
    }

    pub fn relations(&self) -> &Vocab<RelationId> {
        &self.relations
    }

    pub fn node_count(&self) -> usize {
        self.relations.len()
    }

    /// Edges sorted by (source, target).
    pub fn edges(&self) -> &[NetworkEdge] {
        &self.edges
    }

    /// Out-edges of `r`, sorted by target.
    pub fn out_edges(&self, r: RelationId) -> &[(RelationId, u64)] {
        &self.adjacency[r.index()]
    }

    pub fn has_edge(&self, source: RelationId, target: RelationId) -> bool {
        self.adjacency[source.index()]
            .binary_search_by_key(&target, |&(t, _)| t)
            .is_ok()
    }

    /// Nodes with no outgoing edge.
    pub fn nodes_without_out_edges(&self) -> Vec<RelationId> {
        self.relations
            .ids()
            .filter(|r| self.adjacency[r.index()].is_empty())
            .collect()
    }

    /// FNV-1a digest over node names and edges, used to tag derived
    /// embeddings with their source network.
    pub fn structural_hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for name in self.relations.names() {
            eat(name.as_bytes());
            eat(&[0xff]);
        }
        for e in &self.edges {
            eat(&e.source.raw().to_le_bytes());
            eat(&e.target.raw().to_le_bytes());
            eat(&e.weight.to_le_bytes());
        }
        h
    }
}

/// Builds the relation-relation network using per-(relation, entity)
/// position counts instead of the quadratic pair scan.
///
/// For distinct relations a, b over a deduplicated triple set:
/// * direct(a→b)  = Σ_e tail_a(e)·head_b(e)
/// * indirect(a,b) = Σ_e head_a(e)·head_b(e) + Σ_e tail_a(e)·tail_b(e)
///   − |pairs(a) ∩ pairs(b)|   (pairs sharing both positions count once)
///
/// For a relation with itself, pairs of one self-loop triple with itself are
/// excluded from the direct count and equal-pair terms drop out of the
/// indirect count:
/// * direct(a→a)  = Σ_e tail_a(e)·head_a(e) − #self_loops(a)
/// * indirect(a,a) = Σ_e head_a(e)² + Σ_e tail_a(e)² − 2·|T_a|
///
/// Equivalence with [`naive_network_oracle`] is enforced by test.
pub fn build_network(graph: &KnowledgeGraph) -> RelationNetwork {
    let relations = graph.relations();
    let n = relations.len();

    // Sorted (head, tail) pair list and self-loop count per relation.
    let mut pairs: Vec<Vec<(EntityId, EntityId)>> = Vec::with_capacity(n);
    let mut self_loops: Vec<u64> = Vec::with_capacity(n);
    for r in relations.ids() {
        let mut ps: Vec<(EntityId, EntityId)> =
            graph.triples_of(r).map(|t| (t.head, t.tail)).collect();
        ps.sort_unstable();
        self_loops.push(ps.iter().filter(|(h, t)| h == t).count() as u64);
        pairs.push(ps);
    }

    let dot = |a: &alloc::collections::BTreeMap<EntityId, u64>,
               b: &alloc::collections::BTreeMap<EntityId, u64>|
     -> u64 {
        let (small, big) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        small
            .iter()
            .map(|(e, &c)| c * big.get(e).copied().unwrap_or(0))
            .sum()
    };

    let shared_pairs = |a: &[(EntityId, EntityId)], b: &[(EntityId, EntityId)]| -> u64 {
        let (mut i, mut j, mut common) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        common
    };

    let mut edges = Vec::new();
    for a in relations.ids() {
        let (hc_a, tc_a) = (graph.head_counts(a), graph.tail_counts(a));
        let size_a = graph.relation_triple_count(a) as u64;

        // Self pair.
        let direct = dot(tc_a, hc_a) - self_loops[a.index()];
        let squares = |m: &alloc::collections::BTreeMap<EntityId, u64>| -> u64 {
            m.values().map(|&c| c * c).sum()
        };
        let indirect = squares(hc_a) + squares(tc_a) - 2 * size_a;
        if direct + indirect > 0 {
            edges.push(NetworkEdge {
                source: a,
                target: a,
                weight: direct + indirect,
            });
        }

        // Distinct pairs, each unordered pair visited once.
        for b in relations.ids().filter(|b| *b > a) {
            let (hc_b, tc_b) = (graph.head_counts(b), graph.tail_counts(b));
            let direct_ab = dot(tc_a, hc_b);
            let direct_ba = dot(tc_b, hc_a);
            let indirect = dot(hc_a, hc_b) + dot(tc_a, tc_b)
                - shared_pairs(&pairs[a.index()], &pairs[b.index()]);
            if direct_ab + indirect > 0 {
                edges.push(NetworkEdge {
                    source: a,
                    target: b,
                    weight: direct_ab + indirect,
                });
            }
            if direct_ba + indirect > 0 {
                edges.push(NetworkEdge {
                    source: b,
                    target: a,
                    weight: direct_ba + indirect,
                });
            }
        }
    }

    RelationNetwork::from_edges(relations.clone(), edges)
}

/// Literal transcription of the pairwise counting rules: a doubly nested
/// loop over triple pairs for every ordered relation pair. Quadratic in the
/// triple count; intended as the correctness oracle for [`build_network`]
/// on small graphs.
pub fn naive_network_oracle(graph: &KnowledgeGraph) -> RelationNetwork {
    let relations = graph.relations();
    let mut edges = Vec::new();

    for a in relations.ids() {
        for b in relations.ids() {
            let mut direct = 0u64;
            let mut indirect = 0u64;
            for t1 in graph.triples_of(a) {
                for t2 in graph.triples_of(b) {
                    if a == b {
                        if t1.tail == t2.head && (t1.head != t1.tail || t1.head != t2.tail) {
                            direct += 1;
                        }
                        if (t1.head == t2.head && t1.tail != t2.tail)
                            || (t1.tail == t2.tail && t1.head != t2.head)
                        {
                            indirect += 1;
                        }
                    } else {
                        if t1.tail == t2.head {
                            direct += 1;
                        }
                        if t1.head == t2.head || t1.tail == t2.tail {
                            indirect += 1;
                        }
                    }
                }
            }
            let weight = direct + indirect;
            if weight > 0 {
                edges.push(NetworkEdge {
                    source: a,
                    target: b,
                    weight,
                });
            }
        }
    }

    RelationNetwork::from_edges(relations.clone(), edges)
}
