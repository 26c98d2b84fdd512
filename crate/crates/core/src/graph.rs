//! The bipartite user/claim interaction network and its normalized adjacency.
//!
//! Nodes are indexed with users first: users occupy `0..n_users` and claims
//! occupy `n_users..n_nodes`. Edges are undirected. Each relation (action
//! type) gets its own symmetrically normalized adjacency `D^-1/2 A D^-1/2`
//! with unit self-loops, and the union of all target relations, binarized and
//! with self-loops, is the reconstruction target.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

/// One observed action of a user on a claim.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRecord {
    pub user: String,
    pub claim: String,
    pub relation: String,
    pub weight: f64,
}

impl InteractionRecord {
    pub fn new(user: impl Into<String>, claim: impl Into<String>, relation: impl Into<String>) -> Self {
        Self {
            user: user.into(),
            claim: claim.into(),
            relation: relation.into(),
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valence {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub name: String,
    pub valence: Valence,
    /// Whether edges of this relation enter the reconstruction target.
    pub in_target: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub user: usize,
    pub claim: usize,
    pub relation: usize,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeType {
    User,
    Claim,
}

impl NodeType {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::User => "user",
            NodeType::Claim => "claim",
        }
    }
}

/// Options for [`build_bhin`].
#[derive(Clone, Debug)]
pub struct BuildOptions {
    /// Nodes with fewer incident edges are dropped, repeatedly, until no more
    /// nodes fall below the threshold.
    pub min_degree: usize,
    /// Relation names marked as negative valence.
    pub negative_relations: Vec<String>,
    /// Relation names kept out of the reconstruction target.
    pub exclude_from_target: Vec<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            min_degree: 1,
            negative_relations: Vec::new(),
            exclude_from_target: Vec::new(),
        }
    }
}

/// Bipartite heterogeneous information network.
#[derive(Clone, Debug, PartialEq)]
pub struct Bhin {
    users: Vec<String>,
    claims: Vec<String>,
    relations: Vec<Relation>,
    edges: Vec<Edge>,
}

impl Bhin {
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn claims(&self) -> &[String] {
        &self.claims
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_claims(&self) -> usize {
        self.claims.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.users.len() + self.claims.len()
    }

    /// Global node index of claim `c`.
    pub fn claim_node(&self, c: usize) -> usize {
        self.users.len() + c
    }

    pub fn node_type(&self, node: usize) -> NodeType {
        if node < self.users.len() {
            NodeType::User
        } else {
            NodeType::Claim
        }
    }

    pub fn node_id(&self, node: usize) -> &str {
        if node < self.users.len() {
            &self.users[node]
        } else {
            &self.claims[node - self.users.len()]
        }
    }

    pub fn find_user(&self, id: &str) -> Option<usize> {
        self.users.iter().position(|u| u == id)
    }

    pub fn find_claim(&self, id: &str) -> Option<usize> {
        self.claims
            .iter()
            .position(|c| c == id)
            .map(|c| self.claim_node(c))
    }
}

/// Builds the network from raw interaction records.
///
/// Identifiers are indexed in first-seen order, repeated
/// `(user, claim, relation)` records are merged by summing weights, zero-weight
/// edges are discarded, and nodes below `min_degree` are pruned to a fixpoint.
pub fn build_bhin(records: &[InteractionRecord], opts: &BuildOptions) -> Result<Bhin> {
    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut claim_index: HashMap<&str, usize> = HashMap::new();
    let mut relation_index: HashMap<&str, usize> = HashMap::new();
    let mut users: Vec<&str> = Vec::new();
    let mut claims: Vec<&str> = Vec::new();
    let mut relation_names: Vec<&str> = Vec::new();
    let mut edge_slot: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();

    for (k, rec) in records.iter().enumerate() {
        if rec.user.is_empty() || rec.claim.is_empty() || rec.relation.is_empty() {
            return Err(Error::Data(format!("record {k} has an empty identifier")));
        }
        if !(rec.weight >= 0.0) || !rec.weight.is_finite() {
            return Err(Error::Data(format!(
                "record {k} ({} -> {}) has invalid weight {}",
                rec.user, rec.claim, rec.weight
            )));
        }
        let u = *user_index.entry(&rec.user).or_insert_with(|| {
            users.push(&rec.user);
            users.len() - 1
        });
        let c = *claim_index.entry(&rec.claim).or_insert_with(|| {
            claims.push(&rec.claim);
            claims.len() - 1
        });
        let r = *relation_index.entry(&rec.relation).or_insert_with(|| {
            relation_names.push(&rec.relation);
            relation_names.len() - 1
        });
        match edge_slot.get(&(u, c, r)) {
            Some(&e) => edges[e].weight += rec.weight,
            None => {
                edge_slot.insert((u, c, r), edges.len());
                edges.push(Edge {
                    user: u,
                    claim: c,
                    relation: r,
                    weight: rec.weight,
                });
            }
        }
    }
    edges.retain(|e| e.weight > 0.0);

    loop {
        let mut user_deg = vec![0usize; users.len()];
        let mut claim_deg = vec![0usize; claims.len()];
        for e in &edges {
            user_deg[e.user] += 1;
            claim_deg[e.claim] += 1;
        }
        let before = edges.len();
        edges.retain(|e| {
            user_deg[e.user] >= opts.min_degree && claim_deg[e.claim] >= opts.min_degree
        });
        if edges.len() == before {
            break;
        }
    }

    if edges.is_empty() {
        return Err(Error::Data(
            "no edges remain after filtering; the graph is empty".into(),
        ));
    }

    // Reindex survivors, keeping first-seen order.
    let mut user_map = vec![usize::MAX; users.len()];
    let mut claim_map = vec![usize::MAX; claims.len()];
    let mut rel_map = vec![usize::MAX; relation_names.len()];
    let mut alive_users = BTreeSet::new();
    let mut alive_claims = BTreeSet::new();
    let mut alive_rels = BTreeSet::new();
    for e in &edges {
        alive_users.insert(e.user);
        alive_claims.insert(e.claim);
        alive_rels.insert(e.relation);
    }
    let kept_users: Vec<String> = alive_users
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            user_map[old] = new;
            users[old].to_string()
        })
        .collect();
    let kept_claims: Vec<String> = alive_claims
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            claim_map[old] = new;
            claims[old].to_string()
        })
        .collect();
    let relations: Vec<Relation> = alive_rels
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            rel_map[old] = new;
            let name = relation_names[old];
            Relation {
                name: name.to_string(),
                valence: if opts.negative_relations.iter().any(|n| n == name) {
                    Valence::Negative
                } else {
                    Valence::Positive
                },
                in_target: !opts.exclude_from_target.iter().any(|n| n == name),
            }
        })
        .collect();
    let edges = edges
        .into_iter()
        .map(|e| Edge {
            user: user_map[e.user],
            claim: claim_map[e.claim],
            relation: rel_map[e.relation],
            weight: e.weight,
        })
        .collect();

    Ok(Bhin {
        users: kept_users,
        claims: kept_claims,
        relations,
        edges,
    })
}

/// Normalized adjacency per relation plus the binary reconstruction target.
#[derive(Clone, Debug)]
pub struct NormalizedGraph {
    n_nodes: usize,
    n_users: usize,
    relations: Vec<Arc<SparseMatrix>>,
    target: SparseMatrix,
}

impl NormalizedGraph {
    /// Builds a graph over `n_nodes` nodes from undirected weighted edge lists,
    /// one list per relation. `in_target[r]` selects which relations feed the
    /// reconstruction target.
    pub fn from_relation_edges(
        n_nodes: usize,
        n_users: usize,
        relation_edges: &[Vec<(usize, usize, f64)>],
        in_target: &[bool],
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Data("graph has no nodes".into()));
        }
        if relation_edges.is_empty() || relation_edges.len() != in_target.len() {
            return Err(Error::Contract(format!(
                "{} relations with {} target flags",
                relation_edges.len(),
                in_target.len()
            )));
        }
        let mut target_pairs: BTreeSet<(usize, usize)> = (0..n_nodes).map(|k| (k, k)).collect();
        let mut relations = Vec::with_capacity(relation_edges.len());
        for (edges, &keep) in relation_edges.iter().zip(in_target) {
            let mut triplets: Vec<(usize, usize, f64)> = (0..n_nodes).map(|k| (k, k, 1.0)).collect();
            for &(i, j, w) in edges {
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Data(format!("edge ({i}, {j}) has invalid weight {w}")));
                }
                if w == 0.0 {
                    continue;
                }
                triplets.push((i, j, w));
                if i != j {
                    triplets.push((j, i, w));
                }
                if keep {
                    target_pairs.insert((i, j));
                    target_pairs.insert((j, i));
                }
            }
            let adjacency = SparseMatrix::from_triplets(n_nodes, n_nodes, triplets)?;
            let degree = adjacency.row_sums();
            // d_i * d_j commutes exactly, which keeps the result bitwise symmetric.
            let normalized = adjacency
                .entries()
                .iter()
                .map(|&(i, j, a)| (i, j, a / (degree[i] * degree[j]).sqrt()))
                .collect();
            relations.push(Arc::new(SparseMatrix::from_triplets(
                n_nodes, n_nodes, normalized,
            )?));
        }
        let target = SparseMatrix::from_triplets(
            n_nodes,
            n_nodes,
            target_pairs.into_iter().map(|(i, j)| (i, j, 1.0)).collect(),
        )?;
        Ok(Self {
            n_nodes,
            n_users,
            relations,
            target,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn relations(&self) -> &[Arc<SparseMatrix>] {
        &self.relations
    }

    /// Binary reconstruction target with unit diagonal.
    pub fn target(&self) -> &SparseMatrix {
        &self.target
    }

    /// Number of ones in the reconstruction target, self-loops included.
    pub fn positive_count(&self) -> usize {
        self.target.nnz()
    }
}

/// Symmetrically normalized adjacency of every relation in `bhin`.
pub fn normalize(bhin: &Bhin) -> Result<NormalizedGraph> {
    let mut per_relation = vec![Vec::new(); bhin.relations().len()];
    for e in bhin.edges() {
        per_relation[e.relation].push((e.user, bhin.claim_node(e.claim), e.weight));
    }
    let in_target: Vec<bool> = bhin.relations().iter().map(|r| r.in_target).collect();
    NormalizedGraph::from_relation_edges(bhin.n_nodes(), bhin.n_users(), &per_relation, &in_target)
}

/// Co-action projection onto users: two users are linked with weight equal to
/// the number of distinct claims both acted on.
pub fn user_projection(bhin: &Bhin) -> Vec<(usize, usize, f64)> {
    let mut by_claim: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); bhin.n_claims()];
    for e in bhin.edges() {
        by_claim[e.claim].insert(e.user);
    }
    co_occurrence(&by_claim)
}

/// Co-action projection onto claims: two claims are linked with weight equal
/// to the number of distinct users who acted on both.
pub fn claim_projection(bhin: &Bhin) -> Vec<(usize, usize, f64)> {
    let mut by_user: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); bhin.n_users()];
    for e in bhin.edges() {
        by_user[e.user].insert(e.claim);
    }
    co_occurrence(&by_user)
}

fn co_occurrence(groups: &[BTreeSet<usize>]) -> Vec<(usize, usize, f64)> {
    let mut counts: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for g in groups {
        let members: Vec<usize> = g.iter().copied().collect();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                *counts.entry((i, j)).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|((i, j), k)| (i, j, k as f64))
        .collect()
}

/// A six-node network with two blocks: users `u0, u1` share claims `c0, c1`,
/// and `u2` alone acts on `c2`.
pub fn toy_two_block_records() -> Vec<InteractionRecord> {
    [
        ("u0", "c0"),
        ("u0", "c1"),
        ("u1", "c0"),
        ("u1", "c1"),
        ("u2", "c2"),
    ]
    .into_iter()
    .map(|(u, c)| InteractionRecord::new(u, c, "act"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;
    use proptest::prelude::*;

    fn rec(u: &str, c: &str) -> InteractionRecord {
        InteractionRecord::new(u, c, "rt")
    }

    #[test]
    fn smallest_graph() {
        let g = build_bhin(&[rec("a", "x"), rec("b", "x")], &BuildOptions::default()).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.node_id(2), "x");
        assert_eq!(g.node_type(2), NodeType::Claim);
    }

    #[test]
    fn min_degree_cascade_empties_graph() {
        let opts = BuildOptions {
            min_degree: 2,
            ..Default::default()
        };
        let res = build_bhin(&[rec("a", "x"), rec("b", "x")], &opts);
        assert!(matches!(res, Err(Error::Data(_))));
    }

    #[test]
    fn duplicate_records_merge() {
        let g = build_bhin(&[rec("a", "x"), rec("a", "x")], &BuildOptions::default()).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].weight, 2.0);
    }

    #[test]
    fn negative_weight_rejected() {
        let bad = rec("a", "x").with_weight(-1.0);
        assert!(matches!(
            build_bhin(&[bad], &BuildOptions::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn relation_flags() {
        let opts = BuildOptions {
            negative_relations: vec!["nay".into()],
            exclude_from_target: vec!["abstain".into()],
            ..Default::default()
        };
        let g = build_bhin(
            &[
                InteractionRecord::new("a", "x", "yea"),
                InteractionRecord::new("b", "x", "nay"),
                InteractionRecord::new("c", "y", "abstain"),
            ],
            &opts,
        )
        .unwrap();
        assert_eq!(g.relations()[1].valence, Valence::Negative);
        assert!(!g.relations()[2].in_target);
        let ng = normalize(&g).unwrap();
        assert_eq!(ng.relations().len(), 3);
        // c-y only appears in the excluded relation.
        let c = g.find_user("c").unwrap();
        let y = g.find_claim("y").unwrap();
        assert_eq!(ng.target().get(c, y), 0.0);
        let b = g.find_user("b").unwrap();
        let x = g.find_claim("x").unwrap();
        assert_eq!(ng.target().get(b, x), 1.0);
    }

    #[test]
    fn two_node_normalization() {
        let g = NormalizedGraph::from_relation_edges(2, 1, &[vec![(0, 1, 1.0)]], &[true]).unwrap();
        let a = g.relations()[0].to_dense();
        assert_eq!(a, DenseMatrix::full(2, 2, 0.5));
        assert_eq!(g.target().to_dense(), DenseMatrix::full(2, 2, 1.0));
        assert_eq!(g.positive_count(), 4);
    }

    #[test]
    fn isolated_node_keeps_unit_self_loop() {
        let g = NormalizedGraph::from_relation_edges(3, 1, &[vec![(0, 1, 1.0)]], &[true]).unwrap();
        let a = &g.relations()[0];
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.row_sums()[2], 1.0);
    }

    #[test]
    fn projection_counts_shared_items() {
        let records = vec![
            rec("a", "x"),
            rec("a", "y"),
            rec("b", "x"),
            rec("b", "y"),
            rec("c", "z"),
        ];
        let g = build_bhin(&records, &BuildOptions::default()).unwrap();
        assert_eq!(user_projection(&g), vec![(0, 1, 2.0)]);
        assert_eq!(claim_projection(&g), vec![(0, 1, 2.0)]);
    }

    #[test]
    fn complete_bipartite_projects_to_complete_graph() {
        let mut records = Vec::new();
        for u in 0..4 {
            for c in 0..3 {
                records.push(rec(&format!("u{u}"), &format!("c{c}")));
            }
        }
        let g = build_bhin(&records, &BuildOptions::default()).unwrap();
        let p = user_projection(&g);
        assert_eq!(p.len(), 6);
        assert!(p.iter().all(|&(_, _, w)| w == 3.0));
    }

    fn brute_normalized(n: usize, edges: &[(usize, usize, f64)]) -> DenseMatrix {
        let mut a = DenseMatrix::identity(n);
        for &(i, j, w) in edges {
            a[(i, j)] += w;
            if i != j {
                a[(j, i)] += w;
            }
        }
        let d: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
        let mut dinv = DenseMatrix::zeros(n, n);
        for i in 0..n {
            dinv[(i, i)] = 1.0 / d[i].sqrt();
        }
        dinv.matmul(&a).unwrap().matmul(&dinv).unwrap()
    }

    fn edge_set(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (2..=max_nodes).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            (
                Just(n),
                proptest::collection::vec((proptest::bool::ANY, 1u8..4), pairs.len()).prop_map(
                    move |picks| {
                        pairs
                            .iter()
                            .zip(picks)
                            .filter(|(_, (on, _))| *on)
                            .map(|(&(i, j), (_, w))| (i, j, f64::from(w)))
                            .collect()
                    },
                ),
            )
        })
    }

    proptest! {
        #[test]
        fn normalization_matches_dense_reference((n, edges) in edge_set(12)) {
            let g = NormalizedGraph::from_relation_edges(n, 0, std::slice::from_ref(&edges), &[true]).unwrap();
            let sparse = &g.relations()[0];
            prop_assert!(sparse.is_symmetric());
            let reference = brute_normalized(n, &edges);
            let dense = sparse.to_dense();
            for i in 0..n {
                prop_assert!(dense[(i, i)] > 0.0);
                for j in 0..n {
                    prop_assert!((dense[(i, j)] - reference[(i, j)]).abs() <= 1e-12);
                    prop_assert!(dense[(i, j)] <= 1.0);
                }
            }
            let t = g.target().to_dense();
            for i in 0..n {
                prop_assert_eq!(t[(i, i)], 1.0);
                for j in 0..n {
                    prop_assert!(t[(i, j)] == 0.0 || t[(i, j)] == 1.0);
                    prop_assert_eq!(t[(i, j)], t[(j, i)]);
                }
            }
        }

        #[test]
        fn build_is_order_invariant(
            picks in proptest::collection::vec((0u8..6, 0u8..5, 1u8..3), 1..30),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let records: Vec<InteractionRecord> = picks
                .iter()
                .map(|&(u, c, w)| InteractionRecord::new(format!("u{u}"), format!("c{c}"), "r").with_weight(f64::from(w)))
                .collect();
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let canon = |g: &Bhin| {
                let mut e: Vec<(String, String, String, u64)> = g
                    .edges()
                    .iter()
                    .map(|e| (
                        g.users()[e.user].clone(),
                        g.claims()[e.claim].clone(),
                        g.relations()[e.relation].name.clone(),
                        e.weight.to_bits(),
                    ))
                    .collect();
                e.sort();
                e
            };
            let a = build_bhin(&records, &BuildOptions::default()).unwrap();
            let b = build_bhin(&shuffled, &BuildOptions::default()).unwrap();
            prop_assert_eq!(canon(&a), canon(&b));
            prop_assert_eq!(a.n_nodes(), b.n_nodes());
        }
    }
}
