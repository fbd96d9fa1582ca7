//! Fixed-dimension input features for entities and relations: averaged
//! pretrained word vectors over labels/descriptions, graph-derived relation
//! vectors, and the assembly rules combining the two.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::kg::TextRecord;
use crate::math;
use crate::relwalk::NodeEmbeddings;
use crate::weidner::RelationNetwork;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("row count {rows} does not match id count {ids}")]
    RowCountMismatch { rows: usize, ids: usize },
    #[error("feature row for `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("expected dimension {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("id `{0}` has no feature row")]
    MissingId(String),
    #[error("relation id sets of text and graph features differ")]
    IdSetMismatch,
    #[error("relation feature mode requires the {0} matrix")]
    MissingMatrix(&'static str),
    #[error("token vocabulary is empty")]
    EmptyVocabulary,
    #[error("token `{token}` of `{id}` is out of vocabulary")]
    OovToken { id: String, token: String },
}

/// Where a feature matrix came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeatureSource {
    Bow,
    PretrainedFile,
    Graph,
}

/// Dense row-major feature rows keyed by string ids.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
    dim: usize,
    source: FeatureSource,
    trainable: bool,
}

impl FeatureMatrix {
    /// Validates shape, finiteness, and id uniqueness.
    pub fn new(
        ids: Vec<String>,
        data: Vec<f64>,
        dim: usize,
        source: FeatureSource,
    ) -> Result<Self, FeatureError> {
        if ids.len() * dim != data.len() {
            return Err(FeatureError::RowCountMismatch {
                rows: if dim == 0 { 0 } else { data.len() / dim },
                ids: ids.len(),
            });
        }
        let mut index = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(FeatureError::DuplicateId(id.clone()));
            }
            if !math::all_finite(&data[i * dim..(i + 1) * dim]) {
                return Err(FeatureError::NonFinite(id.clone()));
            }
        }
        Ok(FeatureMatrix {
            ids,
            index,
            data,
            dim,
            source,
            trainable: false,
        })
    }

    /// Identity rows over `ids`, one dimension per id.
    pub fn one_hot(ids: Vec<String>, source: FeatureSource) -> Result<Self, FeatureError> {
        let n = ids.len();
        let mut data = alloc::vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        FeatureMatrix::new(ids, data, n, source)
    }

    /// Graph feature rows for every node of the network, in node order.
    pub fn from_node_embeddings(emb: &NodeEmbeddings, network: &RelationNetwork) -> Self {
        let ids: Vec<String> = network.relations().names().to_vec();
        let mut data = Vec::with_capacity(ids.len() * emb.dim());
        for r in network.relations().ids() {
            data.extend_from_slice(emb.vector(r));
        }
        FeatureMatrix::new(ids, data, emb.dim(), FeatureSource::Graph)
            .expect("embeddings are finite and cover every node")
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row_of(&self, id: &str) -> Option<&[f64]> {
        self.row_index(id).map(|i| self.row(i))
    }

    /// New matrix restricted to `ids`, in the given order.
    pub fn subset(&self, ids: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let row = self
                .row_of(id)
                .ok_or_else(|| FeatureError::MissingId(id.clone()))?;
            data.extend_from_slice(row);
        }
        let mut out = FeatureMatrix::new(ids.to_vec(), data, self.dim, self.source)?;
        out.trainable = self.trainable;
        Ok(out)
    }

    pub fn id_set(&self) -> BTreeSet<&str> {
        self.ids.iter().map(String::as_str).collect()
    }
}

/// What to do with tokens missing from the pretrained vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OovPolicy {
    /// Drop unknown tokens from the mean.
    #[default]
    Skip,
    /// Fail on the first unknown token.
    Error,
}

/// Pretrained word vectors keyed by token.
#[derive(Clone, Debug)]
pub struct TokenVocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    vectors: Vec<f64>,
    dim: usize,
    oov: OovPolicy,
}

impl TokenVocabulary {
    pub fn new(
        tokens: Vec<String>,
        vectors: Vec<f64>,
        dim: usize,
        oov: OovPolicy,
    ) -> Result<Self, FeatureError> {
        if tokens.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        if tokens.len() * dim != vectors.len() {
            return Err(FeatureError::RowCountMismatch {
                rows: if dim == 0 { 0 } else { vectors.len() / dim },
                ids: tokens.len(),
            });
        }
        let mut index = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(FeatureError::DuplicateId(tok.clone()));
            }
            if !math::all_finite(&vectors[i * dim..(i + 1) * dim]) {
                return Err(FeatureError::NonFinite(tok.clone()));
            }
        }
        Ok(TokenVocabulary {
            tokens,
            index,
            vectors,
            dim,
            oov,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }
}

/// Lowercases and splits on maximal runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(ToString::to_string)
        .collect()
}

/// Bag-of-words features plus the token composition behind each row.
#[derive(Clone, Debug)]
pub struct BowFeatures {
    pub matrix: FeatureMatrix,
    /// Ids whose tokens were all out of vocabulary (their rows are zero).
    pub zero_rows: Vec<String>,
    /// In-vocabulary token indices per row, aligned with `matrix.ids()`.
    pub compositions: Vec<Vec<usize>>,
}

/// Mean of pretrained vectors over the in-vocabulary tokens of each record's
/// label (and description when requested). Records without any in-vocabulary
/// token get a zero row and are reported in `zero_rows`.
pub fn build_bow_features(
    records: &[TextRecord],
    vocab: &TokenVocabulary,
    use_description: bool,
) -> Result<BowFeatures, FeatureError> {
    let dim = vocab.dim();
    let mut ids = Vec::with_capacity(records.len());
    let mut data = Vec::with_capacity(records.len() * dim);
    let mut zero_rows = Vec::new();
    let mut compositions = Vec::with_capacity(records.len());

    for record in records {
        let mut tokens = tokenize(&record.label);
        if use_description {
            tokens.extend(tokenize(&record.description));
        }
        let mut indices = Vec::new();
        for token in &tokens {
            match vocab.token_index(token) {
                Some(i) => indices.push(i),
                None if vocab.oov_policy() == OovPolicy::Error => {
                    return Err(FeatureError::OovToken {
                        id: record.id.clone(),
                        token: token.clone(),
                    });
                }
                None => {}
            }
        }

        let mut row = alloc::vec![0.0; dim];
        if indices.is_empty() {
            zero_rows.push(record.id.clone());
        } else {
            for &i in &indices {
                math::axpy(&mut row, 1.0, vocab.vector(i));
            }
            let inv = 1.0 / indices.len() as f64;
            row.iter_mut().for_each(|x| *x *= inv);
        }
        ids.push(record.id.clone());
        data.extend_from_slice(&row);
        compositions.push(indices);
    }

    let matrix = FeatureMatrix::new(ids, data, dim, FeatureSource::Bow)?;
    Ok(BowFeatures {
        matrix,
        zero_rows,
        compositions,
    })
}

/// Which feature sources feed the relation encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RelationFeatureMode {
    TextOnly,
    GraphOnly,
    Concat,
}

/// Validated relation feature sources for one model.
///
/// Raw features are not concatenated here; the model projects each source
/// and concatenates afterwards, and duplicates entity vectors exactly when
/// the mode is [`RelationFeatureMode::Concat`].
#[derive(Clone, Copy, Debug)]
pub struct RelationInputs<'a> {
    pub mode: RelationFeatureMode,
    pub text: Option<&'a FeatureMatrix>,
    pub graph: Option<&'a FeatureMatrix>,
    pub duplicate_entities: bool,
}

pub fn assemble_relation_inputs<'a>(
    text: Option<&'a FeatureMatrix>,
    graph: Option<&'a FeatureMatrix>,
    mode: RelationFeatureMode,
) -> Result<RelationInputs<'a>, FeatureError> {
    let need_text = matches!(mode, RelationFeatureMode::TextOnly | RelationFeatureMode::Concat);
    let need_graph = matches!(mode, RelationFeatureMode::GraphOnly | RelationFeatureMode::Concat);
    if need_text && text.is_none() {
        return Err(FeatureError::MissingMatrix("text"));
    }
    if need_graph && graph.is_none() {
        return Err(FeatureError::MissingMatrix("graph"));
    }
    if mode == RelationFeatureMode::Concat {
        let (t, g) = (text.unwrap(), graph.unwrap());
        if t.id_set() != g.id_set() {
            return Err(FeatureError::IdSetMismatch);
        }
    }
    Ok(RelationInputs {
        mode,
        text: if need_text { text } else { None },
        graph: if need_graph { graph } else { None },
        duplicate_entities: mode == RelationFeatureMode::Concat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn record(id: &str, label: &str, description: &str) -> TextRecord {
        TextRecord {
            id: id.to_string(),
            label: label.to_string(),
            description: description.to_string(),
        }
    }

    fn vocab(entries: &[(&str, &[f64])]) -> TokenVocabulary {
        let dim = entries[0].1.len();
        let tokens = entries.iter().map(|(t, _)| t.to_string()).collect();
        let vectors = entries.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        TokenVocabulary::new(tokens, vectors, dim, OovPolicy::Skip).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Christopher Nolan"), vec!["christopher", "nolan"]);
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(
            tokenize("co-founder of X.org"),
            vec!["co", "founder", "of", "x", "org"]
        );
    }

    #[test]
    fn single_token_row_equals_its_vector() {
        let v = vocab(&[("paris", &[0.25, -1.5, 3.0])]);
        let out = build_bow_features(&[record("e1", "Paris", "")], &v, true).unwrap();
        assert_eq!(out.matrix.row_of("e1").unwrap(), &[0.25, -1.5, 3.0]);
        assert!(out.zero_rows.is_empty());
    }

    #[test]
    fn two_token_mean() {
        let v = vocab(&[("alpha", &[1.0, 0.0]), ("beta", &[0.0, 1.0])]);
        let out = build_bow_features(&[record("e1", "alpha beta", "")], &v, false).unwrap();
        assert_eq!(out.matrix.row_of("e1").unwrap(), &[0.5, 0.5]);
    }

    #[test]
    fn all_oov_yields_zero_row_and_report() {
        let v = vocab(&[("known", &[1.0])]);
        let out = build_bow_features(&[record("e1", "mystery words", "")], &v, true).unwrap();
        assert_eq!(out.matrix.row_of("e1").unwrap(), &[0.0]);
        assert_eq!(out.zero_rows, vec!["e1".to_string()]);
        assert!(out.compositions[0].is_empty());
    }

    #[test]
    fn description_participation_is_flagged() {
        let v = vocab(&[("label", &[1.0, 0.0]), ("desc", &[0.0, 1.0])]);
        let records = [record("e1", "label", "desc")];
        let with = build_bow_features(&records, &v, true).unwrap();
        let without = build_bow_features(&records, &v, false).unwrap();
        assert_eq!(with.matrix.row_of("e1").unwrap(), &[0.5, 0.5]);
        assert_eq!(without.matrix.row_of("e1").unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn oov_error_policy_fails_fast() {
        let v = TokenVocabulary::new(
            vec!["known".into()],
            vec![1.0],
            1,
            OovPolicy::Error,
        )
        .unwrap();
        let err = build_bow_features(&[record("e1", "unknown", "")], &v, false).unwrap_err();
        assert!(matches!(err, FeatureError::OovToken { .. }));
    }

    #[test]
    fn matrix_validation_rejects_bad_input() {
        assert!(matches!(
            FeatureMatrix::new(vec!["a".into()], vec![1.0, 2.0, 3.0], 2, FeatureSource::Bow),
            Err(FeatureError::RowCountMismatch { .. })
        ));
        assert!(matches!(
            FeatureMatrix::new(
                vec!["a".into(), "a".into()],
                vec![1.0, 2.0],
                1,
                FeatureSource::Bow
            ),
            Err(FeatureError::DuplicateId(_))
        ));
        assert!(matches!(
            FeatureMatrix::new(vec!["a".into()], vec![f64::NAN], 1, FeatureSource::Bow),
            Err(FeatureError::NonFinite(_))
        ));
    }

    #[test]
    fn subset_preserves_rows_and_errors_on_missing() {
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0, 3.0, 4.0],
            2,
            FeatureSource::PretrainedFile,
        )
        .unwrap();
        let s = m.subset(&["b".into()]).unwrap();
        assert_eq!(s.row_of("b").unwrap(), &[3.0, 4.0]);
        assert!(matches!(
            m.subset(&["c".into()]),
            Err(FeatureError::MissingId(_))
        ));
    }

    #[test]
    fn assemble_modes_and_duplication_flag() {
        let text = FeatureMatrix::new(vec!["r".into()], vec![1.0], 1, FeatureSource::Bow).unwrap();
        let graph =
            FeatureMatrix::new(vec!["r".into()], vec![2.0], 1, FeatureSource::Graph).unwrap();

        let t = assemble_relation_inputs(Some(&text), None, RelationFeatureMode::TextOnly).unwrap();
        assert!(!t.duplicate_entities);
        assert!(t.text.is_some() && t.graph.is_none());

        let g =
            assemble_relation_inputs(None, Some(&graph), RelationFeatureMode::GraphOnly).unwrap();
        assert!(!g.duplicate_entities);

        let c = assemble_relation_inputs(Some(&text), Some(&graph), RelationFeatureMode::Concat)
            .unwrap();
        assert!(c.duplicate_entities);

        assert_eq!(
            assemble_relation_inputs(Some(&text), None, RelationFeatureMode::Concat).unwrap_err(),
            FeatureError::MissingMatrix("graph")
        );

        let other =
            FeatureMatrix::new(vec!["other".into()], vec![2.0], 1, FeatureSource::Graph).unwrap();
        assert_eq!(
            assemble_relation_inputs(Some(&text), Some(&other), RelationFeatureMode::Concat)
                .unwrap_err(),
            FeatureError::IdSetMismatch
        );
    }

    proptest! {
        #[test]
        fn bow_is_permutation_invariant(perm in proptest::sample::subsequence(vec![0usize, 1, 2, 3], 4)) {
            let words = ["w0", "w1", "w2", "w3"];
            let v = vocab(&[
                ("w0", &[1.0, 0.0]),
                ("w1", &[0.0, 1.0]),
                ("w2", &[2.0, 2.0]),
                ("w3", &[-1.0, 3.0]),
            ]);
            let forward: Vec<&str> = perm.iter().map(|&i| words[i]).collect();
            let mut backward = forward.clone();
            backward.reverse();
            let a = build_bow_features(&[record("x", &forward.join(" "), "")], &v, false).unwrap();
            let b = build_bow_features(&[record("x", &backward.join(" "), "")], &v, false).unwrap();
            prop_assert_eq!(a.matrix.row_of("x").unwrap(), b.matrix.row_of("x").unwrap());
        }
    }
}
