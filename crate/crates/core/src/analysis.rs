//! Reading polarity out of an embedding, and scoring it against labels.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, stable_sigmoid, DenseMatrix};

/// The `k` axes with the largest column sums.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisSelection {
    /// Selected column indices, largest mass first.
    pub axes: Vec<usize>,
    /// Column sum of every axis, selected or not.
    pub mass: Vec<f64>,
}

pub fn select_axes(z: &DenseMatrix, k: usize) -> Result<AxisSelection> {
    if k == 0 || k > z.cols() {
        return Err(Error::Contract(format!(
            "cannot select {k} axes from {} dimensions",
            z.cols()
        )));
    }
    let mass = z.column_sums();
    let mut order: Vec<usize> = (0..z.cols()).collect();
    // Stable sort keeps the lower index first on ties.
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]));
    order.truncate(k);
    Ok(AxisSelection { axes: order, mass })
}

/// Axis with the largest coordinate among the selected ones, or `None` when
/// the node is zero on every selected axis.
pub fn classify(z: &DenseMatrix, selection: &AxisSelection) -> Vec<Option<usize>> {
    (0..z.rows())
        .map(|i| {
            let row = z.row(i);
            if selection.axes.iter().all(|&a| row[a] == 0.0) {
                return None;
            }
            let mut sorted = selection.axes.clone();
            sorted.sort_unstable();
            let mut best = sorted[0];
            for &a in &sorted[1..] {
                if row[a] > row[best] {
                    best = a;
                }
            }
            Some(best)
        })
        .collect()
}

/// Probability that the user agrees with the claim: `sigmoid(z_u · z_c)`.
pub fn stance_score(user: &[f64], claim: &[f64]) -> Result<f64> {
    if user.len() != claim.len() {
        return Err(Error::dim(
            "stance_score",
            format!("{} vs {} dimensions", user.len(), claim.len()),
        ));
    }
    let mut dot = 0.0;
    for (a, b) in user.iter().zip(claim) {
        dot += a * b;
    }
    Ok(stable_sigmoid(dot))
}

/// Which nodes to rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeFilter {
    Users,
    Claims,
    All,
}

impl NodeFilter {
    pub fn nodes(self, n_nodes: usize, n_users: usize) -> Vec<usize> {
        match self {
            NodeFilter::Users => (0..n_users).collect(),
            NodeFilter::Claims => (n_users..n_nodes).collect(),
            NodeFilter::All => (0..n_nodes).collect(),
        }
    }
}

/// Nodes sorted by descending coordinate on `axis`; ties keep node order.
pub fn rank_axis(
    z: &DenseMatrix,
    axis: usize,
    filter: NodeFilter,
    n_users: usize,
) -> Result<Vec<usize>> {
    if axis >= z.cols() {
        return Err(Error::Contract(format!(
            "axis {axis} out of range for {} dimensions",
            z.cols()
        )));
    }
    let mut nodes = filter.nodes(z.rows(), n_users.min(z.rows()));
    nodes.sort_by(|&a, &b| z[(b, axis)].total_cmp(&z[(a, axis)]));
    Ok(nodes)
}

/// `z[positive] - z[negative]` for every node.
pub fn signed_polarity(z: &DenseMatrix, positive_axis: usize, negative_axis: usize) -> Vec<f64> {
    (0..z.rows())
        .map(|i| z[(i, positive_axis)] - z[(i, negative_axis)])
        .collect()
}

/// Ground-truth classes for a subset of nodes. Class names are sorted, so
/// class indices are contiguous and independent of file order.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    names: Vec<String>,
    by_node: Vec<Option<usize>>,
}

impl LabelSet {
    pub fn new(n_nodes: usize, assignments: &[(usize, String)]) -> Result<Self> {
        let names: Vec<String> = assignments
            .iter()
            .map(|(_, l)| l.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut by_node = vec![None; n_nodes];
        for (node, label) in assignments {
            if *node >= n_nodes {
                return Err(Error::Data(format!(
                    "label for node {node} but graph has {n_nodes} nodes"
                )));
            }
            let class = names.binary_search(label).expect("collected above");
            if let Some(prev) = by_node[*node] {
                if prev != class {
                    return Err(Error::Data(format!(
                        "node {node} labeled both {} and {label}",
                        names[prev]
                    )));
                }
            }
            by_node[*node] = Some(class);
        }
        Ok(Self { names, by_node })
    }

    /// Builds directly from class indices; names become "0", "1", ...
    pub fn from_classes(by_node: Vec<Option<usize>>) -> Self {
        let n_classes = by_node.iter().flatten().max().map_or(0, |m| m + 1);
        Self {
            names: (0..n_classes).map(|c| c.to_string()).collect(),
            by_node,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_classes(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.by_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_node.is_empty()
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.by_node.get(node).copied().flatten()
    }

    /// Labeled nodes among `nodes`.
    pub fn labeled<'a>(&'a self, nodes: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
        nodes.iter().copied().filter(|&n| self.get(n).is_some())
    }
}

/// Which selected axis plays which class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassMapping {
    /// `axes[c]` predicts class `c`.
    Direct,
    /// `axes[c]` predicts class `1 - c`.
    Swapped,
}

impl ClassMapping {
    pub fn class_of(self, axes: &[usize], cluster: Option<usize>) -> Option<usize> {
        let pos = axes.iter().position(|&a| Some(a) == cluster)?;
        Some(match self {
            ClassMapping::Direct => pos,
            ClassMapping::Swapped => 1 - pos,
        })
    }

    /// Axis that predicts `class`.
    pub fn axis_for(self, axes: &[usize], class: usize) -> usize {
        match self {
            ClassMapping::Direct => axes[class],
            ClassMapping::Swapped => axes[1 - class],
        }
    }
}

/// Precision, recall and F1 of the positive class (class index 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mapping: ClassMapping,
}

/// Scores `clusters` (one selected axis per node, or unaligned) against
/// `truth` on `nodes`, under a fixed mapping.
pub fn prf1_with_mapping(
    clusters: &[Option<usize>],
    axes: &[usize],
    truth: &LabelSet,
    nodes: &[usize],
    mapping: ClassMapping,
) -> Result<Prf1> {
    check_binary(axes, truth)?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    let mut any = false;
    for n in truth.labeled(nodes) {
        any = true;
        let actual = truth.get(n) == Some(1);
        let predicted = mapping.class_of(axes, clusters[n]) == Some(1);
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if !any {
        return Err(Error::Metric("no labeled nodes to score".into()));
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = ratio(2 * tp, 2 * tp + fp + fneg);
    Ok(Prf1 {
        precision,
        recall,
        f1,
        mapping,
    })
}

/// Best of the two axis-to-class mappings by positive-class F1; the direct
/// mapping wins ties.
pub fn prf1(
    clusters: &[Option<usize>],
    axes: &[usize],
    truth: &LabelSet,
    nodes: &[usize],
) -> Result<Prf1> {
    let direct = prf1_with_mapping(clusters, axes, truth, nodes, ClassMapping::Direct)?;
    let swapped = prf1_with_mapping(clusters, axes, truth, nodes, ClassMapping::Swapped)?;
    Ok(if swapped.f1 > direct.f1 { swapped } else { direct })
}

fn check_binary(axes: &[usize], truth: &LabelSet) -> Result<()> {
    if axes.len() != 2 || truth.n_classes() != 2 {
        return Err(Error::Metric(format!(
            "polarity scoring needs 2 axes and 2 classes, got {} and {}",
            axes.len(),
            truth.n_classes()
        )));
    }
    Ok(())
}

/// `(1/N) Σ_clusters max_class |cluster ∩ class|` over labeled `nodes`.
/// Unaligned nodes count toward `N` but belong to no cluster.
pub fn purity(clusters: &[Option<usize>], truth: &LabelSet, nodes: &[usize]) -> Result<f64> {
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut total = 0usize;
    for n in truth.labeled(nodes) {
        total += 1;
        if let Some(c) = clusters[n] {
            *counts
                .entry(c)
                .or_default()
                .entry(truth.get(n).expect("labeled"))
                .or_default() += 1;
        }
    }
    if total == 0 {
        return Err(Error::Metric("no labeled nodes to score".into()));
    }
    let correct: usize = counts
        .values()
        .map(|per_class| per_class.values().copied().max().unwrap_or(0))
        .sum();
    Ok(correct as f64 / total as f64)
}

/// Kendall rank correlation, tau-b.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Metric(format!(
            "kendall needs two equal-length sequences of at least 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => ties_x += 1,
                (_, 0) => ties_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (concordant + discordant) as f64;
    let denom = ((n0 + ties_x as f64) * (n0 + ties_y as f64)).sqrt();
    if denom == 0.0 {
        return Err(Error::Metric("kendall is undefined when one sequence is constant".into()));
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// Scores for one node type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TypeScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Prf1> for TypeScores {
    fn from(p: Prf1) -> Self {
        Self {
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        }
    }
}

/// Evaluation results. Absent entries had nothing to score.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kendall_overall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kendall_group_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kendall_group_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cosine_similarity: Option<f64>,
}

impl MetricsReport {
    /// Present entries in the fixed key order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        [
            ("user_precision", self.user_precision),
            ("user_recall", self.user_recall),
            ("user_f1", self.user_f1),
            ("claim_precision", self.claim_precision),
            ("claim_recall", self.claim_recall),
            ("claim_f1", self.claim_f1),
            ("purity", self.purity),
            ("kendall_overall", self.kendall_overall),
            ("kendall_group_0", self.kendall_group_0),
            ("kendall_group_1", self.kendall_group_1),
            ("cosine_similarity", self.cosine_similarity),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// `key = value` lines, values in shortest round-trip form.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in self.entries() {
            writeln!(out, "{k} = {v:?}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain numbers serialize") + "\n"
    }
}

/// Inputs to [`evaluate`] beyond the embedding.
#[derive(Clone, Debug)]
pub struct EvaluationInputs<'a> {
    pub n_users: usize,
    pub labels: &'a LabelSet,
    /// Ground-truth ideology score per node, when known.
    pub ideology: Option<&'a [Option<f64>]>,
    pub k_axes: usize,
}

/// Intermediate results of an evaluation, for reporting.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub selection: AxisSelection,
    pub clusters: Vec<Option<usize>>,
    /// Mapping chosen on users, or on claims when no user is labeled.
    pub mapping: Option<ClassMapping>,
    pub unaligned: usize,
}

/// Selects axes, classifies every node and computes every metric the labels
/// allow.
pub fn evaluate(z: &DenseMatrix, inputs: &EvaluationInputs<'_>) -> Result<Evaluation> {
    let n = z.rows();
    if inputs.labels.len() != n {
        return Err(Error::dim(
            "evaluate",
            format!("{} labels for {n} nodes", inputs.labels.len()),
        ));
    }
    let selection = select_axes(z, inputs.k_axes)?;
    let clusters = classify(z, &selection);
    let users = NodeFilter::Users.nodes(n, inputs.n_users);
    let claims = NodeFilter::Claims.nodes(n, inputs.n_users);
    let all = NodeFilter::All.nodes(n, inputs.n_users);
    let labels = inputs.labels;
    let mut report = MetricsReport::default();

    let score = |nodes: &[usize]| -> Result<Option<Prf1>> {
        if labels.labeled(nodes).next().is_none() {
            return Ok(None);
        }
        prf1(&clusters, &selection.axes, labels, nodes).map(Some)
    };
    let user_scores = score(&users)?;
    let claim_scores = score(&claims)?;
    if let Some(s) = user_scores {
        report.user_precision = Some(s.precision);
        report.user_recall = Some(s.recall);
        report.user_f1 = Some(s.f1);
    }
    if let Some(s) = claim_scores {
        report.claim_precision = Some(s.precision);
        report.claim_recall = Some(s.recall);
        report.claim_f1 = Some(s.f1);
    }
    if labels.labeled(&all).next().is_some() {
        report.purity = Some(purity(&clusters, labels, &all)?);
    }
    let mapping = user_scores.or(claim_scores).map(|s| s.mapping);

    if let (Some(ideology), Some(mapping)) = (inputs.ideology, mapping) {
        if ideology.len() != n {
            return Err(Error::dim(
                "evaluate",
                format!("{} ideology values for {n} nodes", ideology.len()),
            ));
        }
        let pos = mapping.axis_for(&selection.axes, 1);
        let neg = mapping.axis_for(&selection.axes, 0);
        let polarity = signed_polarity(z, pos, neg);
        let pairs = |keep: &dyn Fn(usize) -> bool| -> (Vec<f64>, Vec<f64>) {
            (0..n)
                .filter(|&i| keep(i))
                .filter_map(|i| ideology[i].map(|v| (polarity[i], v)))
                .unzip()
        };
        let (p_all, v_all) = pairs(&|_| true);
        if p_all.len() >= 2 {
            report.kendall_overall = kendall(&p_all, &v_all).ok();
            report.cosine_similarity = Some(cosine_similarity(&p_all, &v_all));
        }
        for (class, slot) in [
            (0, &mut report.kendall_group_0),
            (1, &mut report.kendall_group_1),
        ] {
            let (p, v) = pairs(&|i| labels.get(i) == Some(class));
            if p.len() >= 2 {
                *slot = kendall(&p, &v).ok();
            }
        }
    }

    let unaligned = clusters.iter().filter(|c| c.is_none()).count();
    Ok(Evaluation {
        report,
        selection,
        clusters,
        mapping,
        unaligned,
    })
}
