//! Graph-based relation features: biased second-order random walks over a
//! [`RelationNetwork`], then skip-gram with negative sampling treating the
//! walks as sentences.
//!
//! The next hop from `current` given the previously visited `prev` is drawn
//! proportionally to `alpha(prev, u) * w(current→u)` where alpha is 1/p when
//! u == prev, 1 when the edge prev→u exists, and 1/q otherwise. The network
//! is treated as directed, so both the walk steps and the alpha lookup use
//! out-edges only.

use alloc::vec::Vec;

use rand::Rng;

use crate::kg::{GraphId, RelationId};
use crate::math;
use crate::rng::{stream_rng, substream_rng, SeedRng, Stream};
use crate::weidner::RelationNetwork;

/// Hyperparameters for walk generation and skip-gram training.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WalkConfig {
    pub num_walks_per_node: usize,
    pub walk_length: usize,
    pub window_size: usize,
    /// Return parameter; larger p discourages immediately revisiting a node.
    pub p: f64,
    /// In-out parameter; larger q keeps the walk close to the previous node.
    pub q: f64,
    pub epochs: usize,
    pub dim: usize,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            num_walks_per_node: 10,
            walk_length: 10,
            window_size: 10,
            p: 1.0,
            q: 1.0,
            epochs: 100,
            dim: 768,
            negatives_per_positive: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(WalkError::Config("p must be a positive finite number"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(WalkError::Config("q must be a positive finite number"));
        }
        if self.walk_length < 2 {
            return Err(WalkError::Config("walk_length must be at least 2"));
        }
        if self.dim == 0 {
            return Err(WalkError::Config("dim must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(WalkError::Config("learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WalkError {
    #[error("invalid walk config: {0}")]
    Config(&'static str),
    #[error("node {0} has no outgoing edges")]
    NoOutEdges(u32),
    #[error("walk corpus contains no walks")]
    EmptyCorpus,
}

/// Walks generated from one network, each a sequence of adjacent nodes.
#[derive(Clone, Debug)]
pub struct WalkCorpus {
    walks: Vec<Vec<RelationId>>,
    node_count: usize,
    isolated: Vec<RelationId>,
    network_hash: u64,
}

impl WalkCorpus {
    pub fn walks(&self) -> &[Vec<RelationId>] {
        &self.walks
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Nodes that produced no walks because they have no out-edges.
    pub fn isolated(&self) -> &[RelationId] {
        &self.isolated
    }

    pub fn network_hash(&self) -> u64 {
        self.network_hash
    }

    /// Occurrences of each node across all walks.
    pub fn node_frequencies(&self) -> Vec<u64> {
        let mut freq = alloc::vec![0u64; self.node_count];
        for walk in &self.walks {
            for node in walk {
                freq[node.index()] += 1;
            }
        }
        freq
    }
}

/// Unnormalized sampling weights over the out-neighbors of `current`.
fn biased_weights(
    network: &RelationNetwork,
    prev: Option<RelationId>,
    current: RelationId,
    p: f64,
    q: f64,
) -> Vec<(RelationId, f64)> {
    network
        .out_edges(current)
        .iter()
        .map(|&(u, w)| {
            let alpha = match prev {
                None => 1.0,
                Some(t) if u == t => 1.0 / p,
                Some(t) if network.has_edge(t, u) => 1.0,
                Some(_) => 1.0 / q,
            };
            (u, alpha * w as f64)
        })
        .collect()
}

/// Second-order transition probabilities from `current` given `prev`.
///
/// Returns (neighbor, probability) pairs summing to 1. With `prev` absent
/// (the first step of a walk) probabilities are proportional to the edge
/// weights alone.
pub fn transition_distribution(
    network: &RelationNetwork,
    prev: Option<RelationId>,
    current: RelationId,
    p: f64,
    q: f64,
) -> Result<Vec<(RelationId, f64)>, WalkError> {
    let mut weights = biased_weights(network, prev, current, p, q);
    if weights.is_empty() {
        return Err(WalkError::NoOutEdges(current.raw()));
    }
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Draws the next hop with the same weights as [`transition_distribution`].
pub fn sample_next(
    network: &RelationNetwork,
    prev: Option<RelationId>,
    current: RelationId,
    p: f64,
    q: f64,
    rng: &mut impl Rng,
) -> Option<RelationId> {
    let weights = biased_weights(network, prev, current, p, q);
    if weights.is_empty() {
        return None;
    }
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut draw = rng.gen_range(0.0..total);
    for &(u, w) in &weights {
        draw -= w;
        if draw < 0.0 {
            return Some(u);
        }
    }
    Some(weights.last().expect("non-empty").0)
}

/// One walk from `start`, truncated at `walk_length` nodes or at a dead end.
pub fn generate_single_walk(
    network: &RelationNetwork,
    start: RelationId,
    config: &WalkConfig,
    rng: &mut impl Rng,
) -> Vec<RelationId> {
    let mut walk = alloc::vec![start];
    let mut prev = None;
    let mut current = start;
    while walk.len() < config.walk_length {
        match sample_next(network, prev, current, config.p, config.q, rng) {
            Some(next) => {
                walk.push(next);
                prev = Some(current);
                current = next;
            }
            None => break,
        }
    }
    walk
}

/// The per-walk generator for walk `walk_idx` started from `node`.
pub fn walk_rng(config: &WalkConfig, node: RelationId, walk_idx: usize) -> SeedRng {
    substream_rng(
        config.seed,
        Stream::Walks,
        node.raw() as u64,
        walk_idx as u64,
    )
}

/// Starts `num_walks_per_node` walks from every node that has out-edges.
///
/// Each walk draws from its own (seed, node, index) generator, so the corpus
/// is identical whether walks are generated serially or in parallel.
pub fn generate_walks(network: &RelationNetwork, config: &WalkConfig) -> WalkCorpus {
    let mut walks = Vec::new();
    let mut isolated = Vec::new();
    for node in network.relations().ids() {
        if network.out_edges(node).is_empty() {
            isolated.push(node);
            continue;
        }
        for w in 0..config.num_walks_per_node {
            let mut rng = walk_rng(config, node, w);
            walks.push(generate_single_walk(network, node, config, &mut rng));
        }
    }
    WalkCorpus {
        walks,
        node_count: network.node_count(),
        isolated,
        network_hash: network.structural_hash(),
    }
}

/// Cumulative table for drawing skip-gram negatives from the unigram
/// distribution raised to the 3/4 power.
#[derive(Clone, Debug)]
pub struct NegativeTable {
    nodes: Vec<u32>,
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeTable {
    pub fn from_frequencies(freq: &[u64]) -> Self {
        let mut nodes = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (node, &f) in freq.iter().enumerate() {
            if f > 0 {
                total += num_traits::Float::powf(f as f64, 0.75);
                nodes.push(node as u32);
                cumulative.push(total);
            }
        }
        NegativeTable {
            nodes,
            cumulative,
            total,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        debug_assert!(self.total > 0.0);
        let draw = rng.gen_range(0.0..self.total);
        let idx = self
            .cumulative
            .partition_point(|&c| c <= draw)
            .min(self.nodes.len() - 1);
        self.nodes[idx]
    }
}

/// Center/context vector tables trained with skip-gram negative sampling.
#[derive(Clone, Debug)]
pub struct SkipGramModel {
    center: Vec<f64>,
    context: Vec<f64>,
    dim: usize,
    node_count: usize,
}

impl SkipGramModel {
    /// Center vectors start uniform in [-0.5/dim, 0.5/dim], context at zero.
    pub fn new(node_count: usize, dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::SkipGramInit);
        let extent = 0.5 / dim as f64;
        let center = (0..node_count * dim)
            .map(|_| rng.gen_range(-extent..extent))
            .collect();
        SkipGramModel {
            center,
            context: alloc::vec![0.0; node_count * dim],
            dim,
            node_count,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn center_vector(&self, node: u32) -> &[f64] {
        let i = node as usize * self.dim;
        &self.center[i..i + self.dim]
    }

    /// Trains all window pairs of one walk; returns (summed pair loss, pairs).
    ///
    /// Each (center, context) pair within `window` contributes a positive
    /// update plus `negatives` sampled updates; a sampled negative equal to
    /// the context target is skipped.
    pub fn train_walk(
        &mut self,
        walk: &[RelationId],
        window: usize,
        negatives: usize,
        lr: f64,
        table: &NegativeTable,
        rng: &mut impl Rng,
    ) -> (f64, usize) {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        let mut center_delta = alloc::vec![0.0; self.dim];

        for i in 0..walk.len() {
            let u = walk[i].index();
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let v = walk[j].index();
                center_delta.iter_mut().for_each(|x| *x = 0.0);
                let mut pair_loss = self.update_output(u, v, true, lr, &mut center_delta);
                for _ in 0..negatives {
                    let n = table.sample(rng) as usize;
                    if n == v {
                        continue;
                    }
                    pair_loss += self.update_output(u, n, false, lr, &mut center_delta);
                }
                let row = &mut self.center[u * self.dim..(u + 1) * self.dim];
                for (c, d) in row.iter_mut().zip(&center_delta) {
                    *c += d;
                }
                loss_sum += pair_loss;
                pairs += 1;
            }
        }
        (loss_sum, pairs)
    }

    /// One logistic update of context vector `target` against center `u`;
    /// the center update is accumulated into `center_delta`. Returns the
    /// pair's log-loss contribution.
    fn update_output(
        &mut self,
        u: usize,
        target: usize,
        label: bool,
        lr: f64,
        center_delta: &mut [f64],
    ) -> f64 {
        let center = &self.center[u * self.dim..(u + 1) * self.dim];
        let ctx = &self.context[target * self.dim..(target + 1) * self.dim];
        let f = math::dot(center, ctx);
        let loss = if label {
            math::softplus(-f)
        } else {
            math::softplus(f)
        };
        let g = ((label as u8 as f64) - math::sigmoid(f)) * lr;
        math::axpy(center_delta, g, ctx);
        let ctx = &mut self.context[target * self.dim..(target + 1) * self.dim];
        math::axpy(ctx, g, center);
        loss
    }

    pub fn into_center_vectors(self) -> Vec<f64> {
        self.center
    }
}

/// Trained vectors for every node of a network, with provenance metadata.
#[derive(Clone, Debug)]
pub struct NodeEmbeddings {
    vectors: Vec<f64>,
    dim: usize,
    node_count: usize,
    isolated: Vec<RelationId>,
    network_hash: u64,
    config: WalkConfig,
    epoch_mean_loss: Vec<f64>,
}

impl NodeEmbeddings {
    pub fn vector(&self, node: RelationId) -> &[f64] {
        let i = node.index() * self.dim;
        &self.vectors[i..i + self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Nodes that received the all-zero fallback vector.
    pub fn isolated(&self) -> &[RelationId] {
        &self.isolated
    }

    pub fn is_fallback(&self, node: RelationId) -> bool {
        self.isolated.binary_search(&node).is_ok()
    }

    pub fn network_hash(&self) -> u64 {
        self.network_hash
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    /// Mean skip-gram pair loss per training epoch.
    pub fn epoch_mean_loss(&self) -> &[f64] {
        &self.epoch_mean_loss
    }
}

/// Trains skip-gram over the walk corpus and returns the center vectors.
pub fn train_skipgram(corpus: &WalkCorpus, config: &WalkConfig) -> Result<NodeEmbeddings, WalkError> {
    config.validate()?;
    if corpus.walks().is_empty() {
        return Err(WalkError::EmptyCorpus);
    }

    let mut model = SkipGramModel::new(corpus.node_count(), config.dim, config.seed);
    let table = NegativeTable::from_frequencies(&corpus.node_frequencies());
    let mut rng = stream_rng(config.seed, Stream::SkipGramNegatives);
    let mut epoch_mean_loss = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pair_count = 0usize;
        for walk in corpus.walks() {
            let (loss, pairs) = model.train_walk(
                walk,
                config.window_size,
                config.negatives_per_positive,
                config.learning_rate,
                &table,
                &mut rng,
            );
            loss_sum += loss;
            pair_count += pairs;
        }
        epoch_mean_loss.push(if pair_count > 0 {
            loss_sum / pair_count as f64
        } else {
            0.0
        });
    }

    let vectors = model.into_center_vectors();
    debug_assert!(math::all_finite(&vectors));
    Ok(NodeEmbeddings {
        vectors,
        dim: config.dim,
        node_count: corpus.node_count(),
        isolated: Vec::new(),
        network_hash: corpus.network_hash(),
        config: config.clone(),
        epoch_mean_loss,
    })
}

/// Full graph-feature pipeline: walks, skip-gram, zero-vector fallback for
/// isolated nodes. Covers every node of the network; a network with no edges
/// yields all-fallback embeddings.
pub fn embed_relations(
    network: &RelationNetwork,
    config: &WalkConfig,
) -> Result<NodeEmbeddings, WalkError> {
    config.validate()?;
    let corpus = generate_walks(network, config);
    let mut isolated = corpus.isolated().to_vec();
    isolated.sort_unstable();

    let mut embeddings = if corpus.walks().is_empty() {
        NodeEmbeddings {
            vectors: alloc::vec![0.0; network.node_count() * config.dim],
            dim: config.dim,
            node_count: network.node_count(),
            isolated: Vec::new(),
            network_hash: network.structural_hash(),
            config: config.clone(),
            epoch_mean_loss: Vec::new(),
        }
    } else {
        train_skipgram(&corpus, config)?
    };

    for &node in &isolated {
        let i = node.index() * embeddings.dim;
        embeddings.vectors[i..i + embeddings.dim].fill(0.0);
    }
    embeddings.isolated = isolated;
    Ok(embeddings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{build_graph, Vocab};
    use crate::weidner::{build_network, NetworkEdge, RelationNetwork};
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn network_from(edges: &[(&str, &str, u64)]) -> RelationNetwork {
        let mut vocab: Vocab<RelationId> = Vocab::new();
        for (s, t, _) in edges {
            vocab.intern(s);
            vocab.intern(t);
        }
        let list = edges
            .iter()
            .map(|(s, t, w)| NetworkEdge {
                source: vocab.get(s).unwrap(),
                target: vocab.get(t).unwrap(),
                weight: *w,
            })
            .collect();
        RelationNetwork::from_edges(vocab, list)
    }

    fn small_config() -> WalkConfig {
        WalkConfig {
            num_walks_per_node: 5,
            walk_length: 8,
            window_size: 3,
            epochs: 5,
            dim: 8,
            negatives_per_positive: 3,
            learning_rate: 0.05,
            seed: 11,
            ..WalkConfig::default()
        }
    }

    #[test]
    fn neutral_parameters_reduce_to_weight_proportional() {
        let net = network_from(&[("c", "a", 2), ("c", "b", 1), ("x", "c", 1)]);
        let c = net.relations().get("c").unwrap();
        let x = net.relations().get("x").unwrap();
        for prev in [None, Some(x)] {
            let dist = transition_distribution(&net, prev, c, 1.0, 1.0).unwrap();
            let probs: Vec<f64> = dist.iter().map(|&(_, p)| p).collect();
            assert!((probs[0] - 2.0 / 3.0).abs() < 1e-12);
            assert!((probs[1] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bias_cases_follow_the_alpha_table() {
        // From v: back to t (d=0), to a reachable from t (d=1), to b (d=2).
        let net = network_from(&[
            ("v", "t", 1),
            ("v", "a", 2),
            ("v", "b", 3),
            ("t", "v", 1),
            ("t", "a", 1),
        ]);
        let ids = |n: &str| net.relations().get(n).unwrap();
        let dist = transition_distribution(&net, Some(ids("t")), ids("v"), 2.0, 0.5).unwrap();
        let lookup = |n: &str| {
            dist.iter()
                .find(|(u, _)| *u == ids(n))
                .map(|&(_, p)| p)
                .unwrap()
        };
        // Unnormalized weights (0.5, 2, 6), total 8.5.
        assert!((lookup("t") - 0.5 / 8.5).abs() < 1e-12);
        assert!((lookup("a") - 2.0 / 8.5).abs() < 1e-12);
        assert!((lookup("b") - 6.0 / 8.5).abs() < 1e-12);
    }

    #[test]
    fn no_out_edges_is_an_error() {
        let net = network_from(&[("a", "b", 1)]);
        let b = net.relations().get("b").unwrap();
        assert_eq!(
            transition_distribution(&net, None, b, 1.0, 1.0),
            Err(WalkError::NoOutEdges(b.0))
        );
    }

    #[test]
    fn two_node_cycle_walks_alternate() {
        let net = network_from(&[("a", "b", 1), ("b", "a", 1)]);
        let config = WalkConfig {
            walk_length: 4,
            num_walks_per_node: 3,
            ..small_config()
        };
        let corpus = generate_walks(&net, &config);
        assert_eq!(corpus.walks().len(), 6);
        for walk in corpus.walks() {
            assert_eq!(walk.len(), 4);
            for pair in walk.windows(2) {
                assert_ne!(pair[0], pair[1]);
            }
        }
    }

    #[test]
    fn dead_ends_truncate_and_are_reported() {
        let net = network_from(&[("a", "b", 1)]);
        let corpus = generate_walks(&net, &small_config());
        let b = net.relations().get("b").unwrap();
        assert_eq!(corpus.isolated(), &[b]);
        for walk in corpus.walks() {
            assert_eq!(walk.len(), 2); // a then the dead-end b
        }
    }

    #[test]
    fn corpus_is_deterministic_for_a_fixed_seed() {
        let net = network_from(&[
            ("a", "b", 1),
            ("b", "c", 2),
            ("c", "a", 1),
            ("c", "d", 3),
            ("d", "e", 1),
            ("e", "a", 2),
        ]);
        let config = small_config();
        let one = generate_walks(&net, &config);
        let two = generate_walks(&net, &config);
        assert_eq!(one.walks(), two.walks());
    }

    #[test]
    fn empirical_frequencies_track_the_distribution() {
        let net = network_from(&[
            ("v", "t", 1),
            ("v", "a", 2),
            ("v", "b", 3),
            ("t", "v", 1),
            ("t", "a", 1),
        ]);
        let ids = |n: &str| net.relations().get(n).unwrap();
        let (prev, current) = (ids("t"), ids("v"));
        let dist = transition_distribution(&net, Some(prev), current, 0.5, 2.0).unwrap();
        let mut rng = stream_rng(3, Stream::Walks);
        let mut counts = alloc::collections::BTreeMap::new();
        let n = 20_000;
        for _ in 0..n {
            let next = sample_next(&net, Some(prev), current, 0.5, 2.0, &mut rng).unwrap();
            *counts.entry(next).or_insert(0usize) += 1;
        }
        for (u, p) in dist {
            let freq = *counts.get(&u).unwrap_or(&0) as f64 / n as f64;
            assert!(
                (freq - p).abs() < 0.02,
                "node {u:?}: empirical {freq} vs expected {p}"
            );
        }
    }

    #[test]
    fn skipgram_respects_dim_and_zero_epochs_keep_initialization() {
        let net = network_from(&[("a", "b", 1), ("b", "a", 1)]);
        let config = WalkConfig {
            epochs: 0,
            ..small_config()
        };
        let corpus = generate_walks(&net, &config);
        let emb = train_skipgram(&corpus, &config).unwrap();
        let init = SkipGramModel::new(corpus.node_count(), config.dim, config.seed);
        for node in net.relations().ids() {
            assert_eq!(emb.vector(node).len(), config.dim);
            assert_eq!(emb.vector(node), init.center_vector(node.raw()));
        }
    }

    #[test]
    fn co_occurring_nodes_end_up_closer_than_strangers() {
        // a and b co-occur constantly (walks over the two-node cycle);
        // c exists but never appears in a walk.
        let corpus = WalkCorpus {
            walks: (0..60)
                .map(|_| {
                    alloc::vec![
                        RelationId(0),
                        RelationId(1),
                        RelationId(0),
                        RelationId(1)
                    ]
                })
                .collect(),
            node_count: 3,
            isolated: alloc::vec![RelationId(2)],
            network_hash: 0,
        };
        let config = WalkConfig {
            epochs: 30,
            window_size: 3,
            dim: 8,
            learning_rate: 0.05,
            seed: 5,
            ..WalkConfig::default()
        };
        let emb = train_skipgram(&corpus, &config).unwrap();
        let cos = |x: &[f64], y: &[f64]| {
            math::dot(x, y) / (math::l2_norm(x) * math::l2_norm(y))
        };
        let (a, b, c) = (
            emb.vector(RelationId(0)),
            emb.vector(RelationId(1)),
            emb.vector(RelationId(2)),
        );
        assert!(cos(a, b) > cos(a, c));
        assert!(cos(a, b) > cos(b, c));
    }

    #[test]
    fn epoch_loss_is_nonincreasing_with_at_most_one_inversion() {
        let net = network_from(&[
            ("a", "b", 2),
            ("b", "c", 1),
            ("c", "a", 1),
            ("c", "b", 2),
            ("b", "a", 1),
        ]);
        let config = WalkConfig {
            epochs: 5,
            num_walks_per_node: 20,
            learning_rate: 0.01,
            ..small_config()
        };
        let corpus = generate_walks(&net, &config);
        let emb = train_skipgram(&corpus, &config).unwrap();
        let losses = emb.epoch_mean_loss();
        assert_eq!(losses.len(), 5);
        let inversions = losses.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "losses not trending down: {losses:?}");
    }

    #[test]
    fn embed_relations_covers_every_node_and_flags_isolated() {
        let graph = build_graph([
            ("e1", "r1", "e1"),
            ("e1", "r2", "e2"),
            ("e1", "r4", "e4"),
            ("e2", "r3", "e3"),
            ("e2", "r2", "e4"),
        ]);
        let net = build_network(&graph);
        let config = WalkConfig {
            dim: 8,
            ..small_config()
        };
        let emb = embed_relations(&net, &config).unwrap();
        assert_eq!(emb.node_count(), 4);
        assert!(emb.isolated().is_empty());
        for r in net.relations().ids() {
            assert_eq!(emb.vector(r).len(), 8);
            assert!(math::all_finite(emb.vector(r)));
        }
    }

    #[test]
    fn isolated_node_gets_zero_fallback() {
        let net = network_from(&[("a", "b", 1), ("b", "a", 1), ("a", "lonely", 1)]);
        // "lonely" has an in-edge but no out-edge.
        let emb = embed_relations(&net, &small_config()).unwrap();
        let lonely = net.relations().get("lonely").unwrap();
        assert!(emb.is_fallback(lonely));
        assert!(emb.vector(lonely).iter().all(|&x| x == 0.0));
        let a = net.relations().get("a").unwrap();
        assert!(!emb.is_fallback(a));
    }

    #[test]
    fn edgeless_network_yields_all_fallback() {
        let mut vocab: Vocab<RelationId> = Vocab::new();
        vocab.intern("r1");
        vocab.intern("r2");
        let net = RelationNetwork::from_edges(vocab, Vec::new());
        let emb = embed_relations(&net, &small_config()).unwrap();
        assert_eq!(emb.isolated().len(), 2);
        assert!(emb.vector(RelationId(0)).iter().all(|&x| x == 0.0));
    }

    fn arb_network() -> impl Strategy<Value = RelationNetwork> {
        proptest::collection::btree_set((0u8..6, 0u8..6), 1..20).prop_map(|edge_set| {
            let mut vocab: Vocab<RelationId> = Vocab::new();
            for i in 0..6 {
                vocab.intern(&alloc::format!("r{i}"));
            }
            let edges = edge_set
                .into_iter()
                .map(|(s, t)| NetworkEdge {
                    source: RelationId(s as u32),
                    target: RelationId(t as u32),
                    weight: 1 + (s as u64 + t as u64) % 5,
                })
                .collect();
            RelationNetwork::from_edges(vocab, edges)
        })
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one_over_out_neighbors(
            net in arb_network(),
            p in 0.1f64..4.0,
            q in 0.1f64..4.0,
            prev_raw in proptest::option::of(0u32..6),
        ) {
            for current in net.relations().ids() {
                if net.out_edges(current).is_empty() {
                    continue;
                }
                let prev = prev_raw.map(RelationId);
                let dist = transition_distribution(&net, prev, current, p, q).unwrap();
                let total: f64 = dist.iter().map(|&(_, w)| w).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for (u, w) in dist {
                    prop_assert!(w > 0.0);
                    prop_assert!(net.has_edge(current, u));
                }
            }
        }

        #[test]
        fn walks_traverse_only_edges(net in arb_network(), seed in any::<u64>()) {
            let config = WalkConfig { seed, ..small_config() };
            let corpus = generate_walks(&net, &config);
            for walk in corpus.walks() {
                for pair in walk.windows(2) {
                    prop_assert!(net.has_edge(pair[0], pair[1]));
                }
            }
        }
    }
}
