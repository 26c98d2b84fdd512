//! End-to-end runs driven by a [`RunConfig`]: load data, train, embed,
//! evaluate, and compare ablations.
//!
//! Output directory layout after `train`:
//!
//! | file | contents |
//! |------|----------|
//! | `model.ivgae` | checkpoint (`model.users.ivgae` and `model.claims.ivgae` for separate learning) |
//! | `trace.csv` | training trace (`trace.users.csv`, `trace.claims.csv` likewise) |
//! | `embedding.tsv` | `node_id node_type z0 .. z{T-1}`, mean-mode embedding |
//!
//! `evaluate` adds `metrics.txt`, `metrics.json`, `scatter.csv` and
//! `scatter.svg`.

use std::path::{Path, PathBuf};

use crate::analysis::{evaluate, Evaluation, EvaluationInputs, LabelSet, MetricsReport};
use crate::error::{Error, Result};
use crate::graph::{
    build_bhin, claim_projection, normalize, user_projection, Bhin, BuildOptions,
    InteractionRecord, NodeType, NormalizedGraph,
};
use crate::io::{
    emit_scatter, format_labels, generate_synthetic, load_edgelist, load_ideology, load_labels,
    load_rollcall, read_checkpoint, write_atomic, write_checkpoint, write_edgelist, Checkpoint,
    RunConfig, ScatterPoint,
};
use crate::model::Features;
use crate::numerics::DenseMatrix;
use crate::trainer::{embed, train, train_separate, Ablations, EmbedMode, TrainedModel};

/// A graph with its ground truth resolved to node indices.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub bhin: Bhin,
    pub graph: NormalizedGraph,
    pub labels: LabelSet,
    pub ideology: Option<Vec<Option<f64>>>,
    /// Label or ideology rows whose id matched no node (pruned or absent).
    pub unmatched: usize,
}

/// Nodes an id refers to: a `user:` or `claim:` prefix restricts the
/// lookup to that type; a bare id matches users and claims alike.
pub fn resolve_node(bhin: &Bhin, id: &str) -> Vec<usize> {
    if let Some(u) = id.strip_prefix("user:") {
        return bhin.find_user(u).into_iter().collect();
    }
    if let Some(c) = id.strip_prefix("claim:") {
        return bhin.find_claim(c).into_iter().collect();
    }
    bhin.find_user(id)
        .into_iter()
        .chain(bhin.find_claim(id))
        .collect()
}

impl Dataset {
    pub fn from_records(
        records: &[InteractionRecord],
        labels: &[(String, String)],
        ideology: Option<&[(String, f64)]>,
        options: &BuildOptions,
    ) -> Result<Self> {
        let bhin = build_bhin(records, options)?;
        let graph = normalize(&bhin)?;
        let mut unmatched = 0;
        let mut assigned = Vec::new();
        for (id, label) in labels {
            let nodes = resolve_node(&bhin, id);
            if nodes.is_empty() {
                unmatched += 1;
            }
            assigned.extend(nodes.into_iter().map(|n| (n, label.clone())));
        }
        let labels = LabelSet::new(bhin.n_nodes(), &assigned)?;
        let ideology = ideology.map(|values| {
            let mut out = vec![None; bhin.n_nodes()];
            for (id, v) in values {
                let nodes = resolve_node(&bhin, id);
                if nodes.is_empty() {
                    unmatched += 1;
                }
                for n in nodes {
                    out[n] = Some(*v);
                }
            }
            out
        });
        Ok(Self {
            bhin,
            graph,
            labels,
            ideology,
            unmatched,
        })
    }

    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let d = &cfg.data;
        let options = BuildOptions {
            min_degree: d.min_degree,
            negative_relations: d.negative_relations.clone(),
            exclude_from_target: d.exclude_from_target.clone(),
        };
        let mut labels = match &d.labels {
            Some(p) => load_labels(p)?,
            None => Vec::new(),
        };
        let mut ideology = match &d.ideology {
            Some(p) => Some(load_ideology(p)?),
            None => None,
        };
        let records = match (&d.edgelist, &d.rollcall_members, &d.rollcall_votes) {
            (Some(p), _, _) => load_edgelist(p)?,
            (None, Some(m), Some(v)) => {
                let rc = load_rollcall(m, v, &d.rollcall.options())?;
                // Derived party and bill labels apply unless a label file is given.
                if d.labels.is_none() {
                    labels = rc.member_labels;
                    labels.extend(rc.bill_labels);
                }
                if d.ideology.is_none() && !rc.ideology.is_empty() {
                    ideology = Some(rc.ideology);
                }
                rc.records
            }
            _ => return Err(Error::Config("no input data configured".into())),
        };
        Self::from_records(&records, &labels, ideology.as_deref(), &options)
    }

    pub fn n_users(&self) -> usize {
        self.bhin.n_users()
    }

    /// Evaluates an embedding of this dataset's nodes.
    pub fn evaluate(&self, z: &DenseMatrix, k_axes: usize) -> Result<Evaluation> {
        evaluate(
            z,
            &EvaluationInputs {
                n_users: self.n_users(),
                labels: &self.labels,
                ideology: self.ideology.as_deref(),
                k_axes,
            },
        )
    }
}

/// Models produced by one training run.
#[derive(Clone, Debug)]
pub enum Trained {
    Joint(TrainedModel),
    Separate {
        users: TrainedModel,
        claims: TrainedModel,
    },
}

impl Trained {
    /// `(file suffix, model)` pairs.
    pub fn models(&self) -> Vec<(&'static str, &TrainedModel)> {
        match self {
            Trained::Joint(m) => vec![("", m)],
            Trained::Separate { users, claims } => vec![(".users", users), (".claims", claims)],
        }
    }
}

/// Trains according to `cfg.train` (including its ablation switches) and
/// returns the models with the mean-mode embedding.
pub fn train_dataset(ds: &Dataset, cfg: &RunConfig) -> Result<(Trained, DenseMatrix)> {
    if cfg.train.ablations.separate {
        let s = train_separate(&ds.bhin, &cfg.model, &cfg.train)?;
        Ok((
            Trained::Separate {
                users: s.users,
                claims: s.claims,
            },
            s.embedding,
        ))
    } else {
        let m = train(&ds.graph, &Features::Identity, &cfg.model, &cfg.train)?;
        let z = embed(&ds.graph, &Features::Identity, &m.encoder, m.rectified(), EmbedMode::Mean)?;
        Ok((Trained::Joint(m), z))
    }
}

pub fn checkpoint_path(dir: &Path, suffix: &str) -> PathBuf {
    dir.join(format!("model{suffix}.ivgae"))
}

pub fn trace_path(dir: &Path, suffix: &str) -> PathBuf {
    dir.join(format!("trace{suffix}.csv"))
}

/// Embedding TSV: header `node_id\tnode_type\tz0\t...`, one row per node.
pub fn format_embedding(bhin: &Bhin, z: &DenseMatrix) -> String {
    let mut out = String::from("node_id\tnode_type");
    for k in 0..z.cols() {
        out.push_str(&format!("\tz{k}"));
    }
    out.push('\n');
    for i in 0..z.rows() {
        out.push_str(bhin.node_id(i));
        out.push('\t');
        out.push_str(bhin.node_type(i).as_str());
        for v in z.row(i) {
            out.push_str(&format!("\t{v:?}"));
        }
        out.push('\n');
    }
    out
}

/// What a `train` run wrote.
#[derive(Clone, Debug)]
pub struct TrainOutputs {
    pub trained: Trained,
    pub embedding: DenseMatrix,
    pub files: Vec<PathBuf>,
}

/// Loads the data, trains, and writes checkpoint(s), trace(s) and the
/// embedding into `cfg.output_dir`.
pub fn run_train(cfg: &RunConfig) -> Result<TrainOutputs> {
    let ds = Dataset::load(cfg)?;
    let (trained, z) = train_dataset(&ds, cfg)?;
    let dir = &cfg.output_dir;
    let mut files = Vec::new();
    for (suffix, m) in trained.models() {
        let ck = checkpoint_path(dir, suffix);
        write_checkpoint(&ck, &Checkpoint::from_trained(m))?;
        let tr = trace_path(dir, suffix);
        let mut csv = Vec::new();
        m.trace
            .write_csv(&mut csv)
            .map_err(|e| Error::io(&tr, e))?;
        write_atomic(&tr, &csv)?;
        files.extend([ck, tr]);
    }
    let emb = dir.join("embedding.tsv");
    write_atomic(&emb, format_embedding(&ds.bhin, &z).as_bytes())?;
    files.push(emb);
    Ok(TrainOutputs {
        trained,
        embedding: z,
        files,
    })
}

/// Recomputes the mean-mode embedding from the checkpoint(s) in
/// `cfg.output_dir`.
pub fn load_embedding(ds: &Dataset, cfg: &RunConfig) -> Result<DenseMatrix> {
    embedding_from_checkpoints(ds, cfg, EmbedMode::Mean)
}

/// Embedding from the checkpoint(s) in `cfg.output_dir`. For separate
/// learning a sample seed `s` draws users with `s` and claims with `s + 1`.
pub fn embedding_from_checkpoints(ds: &Dataset, cfg: &RunConfig, mode: EmbedMode) -> Result<DenseMatrix> {
    let dir = &cfg.output_dir;
    if cfg.train.ablations.separate {
        let users = read_checkpoint(&checkpoint_path(dir, ".users"))?;
        let claims = read_checkpoint(&checkpoint_path(dir, ".claims"))?;
        let ug = NormalizedGraph::from_relation_edges(
            ds.bhin.n_users(),
            ds.bhin.n_users(),
            &[user_projection(&ds.bhin)],
            &[true],
        )?;
        let cg = NormalizedGraph::from_relation_edges(
            ds.bhin.n_claims(),
            0,
            &[claim_projection(&ds.bhin)],
            &[true],
        )?;
        let claim_mode = match mode {
            EmbedMode::Sample(s) => EmbedMode::Sample(s.wrapping_add(1)),
            m => m,
        };
        let zu = embed_checkpoint(&ug, &users, mode)?;
        let zc = embed_checkpoint(&cg, &claims, claim_mode)?;
        DenseMatrix::concat_rows(&[&zu, &zc])
    } else {
        let ck = read_checkpoint(&checkpoint_path(dir, ""))?;
        embed_checkpoint(&ds.graph, &ck, mode)
    }
}

pub fn embed_checkpoint(graph: &NormalizedGraph, ck: &Checkpoint, mode: EmbedMode) -> Result<DenseMatrix> {
    let width = ck.encoder.hidden[0][0].rows();
    if width != graph.n_nodes() || ck.encoder.n_relations() != graph.relations().len() {
        return Err(Error::Data(format!(
            "checkpoint was trained on {width} nodes and {} relations, data has {} and {}",
            ck.encoder.n_relations(),
            graph.n_nodes(),
            graph.relations().len()
        )));
    }
    embed(graph, &Features::Identity, &ck.encoder, ck.rectified(), mode)
}

/// Scatter points on the two selected axes.
pub fn scatter_points(ds: &Dataset, z: &DenseMatrix, axes: (usize, usize)) -> Vec<ScatterPoint> {
    (0..z.rows())
        .map(|i| ScatterPoint {
            node_id: ds.bhin.node_id(i).to_string(),
            node_type: ds.bhin.node_type(i).as_str().to_string(),
            x: z[(i, axes.0)],
            y: z[(i, axes.1)],
            label: ds.labels.get(i).map(|c| ds.labels.names()[c].clone()),
        })
        .collect()
}

/// Evaluates the trained embedding and writes metrics and scatter files.
pub fn run_evaluate(cfg: &RunConfig) -> Result<Evaluation> {
    let ds = Dataset::load(cfg)?;
    let z = load_embedding(&ds, cfg)?;
    let ev = ds.evaluate(&z, cfg.analysis.k_axes)?;
    write_metrics(&cfg.output_dir, &ev.report)?;
    let axes = (ev.selection.axes[0], ev.selection.axes[1]);
    let points = scatter_points(&ds, &z, axes);
    let dir = &cfg.output_dir;
    emit_scatter(
        &points,
        (&format!("axis {}", axes.0), &format!("axis {}", axes.1)),
        &dir.join("scatter.csv"),
        Some(&dir.join("scatter.svg")),
    )?;
    Ok(ev)
}

pub fn write_metrics(dir: &Path, report: &MetricsReport) -> Result<()> {
    let mut text = Vec::new();
    report
        .write_text(&mut text)
        .map_err(|e| Error::io(dir.join("metrics.txt"), e))?;
    write_atomic(&dir.join("metrics.txt"), &text)?;
    write_atomic(&dir.join("metrics.json"), report.to_json().as_bytes())
}

/// The full model followed by each single-switch ablation.
pub fn ablation_variants() -> Vec<Ablations> {
    let one = |f: fn(&mut Ablations)| {
        let mut a = Ablations::default();
        f(&mut a);
        a
    };
    vec![
        Ablations::default(),
        one(|a| a.no_tc = true),
        one(|a| a.no_pi = true),
        one(|a| a.gaussian = true),
        one(|a| a.separate = true),
    ]
}

/// Trains and evaluates every variant of [`ablation_variants`].
pub fn run_ablations(ds: &Dataset, cfg: &RunConfig) -> Result<Vec<(&'static str, MetricsReport)>> {
    ablation_variants()
        .into_iter()
        .map(|ablations| {
            let mut c = cfg.clone();
            c.train.ablations = ablations;
            let (_, z) = train_dataset(ds, &c)?;
            let ev = ds.evaluate(&z, c.analysis.k_axes)?;
            Ok((c.train.ablations.label(), ev.report))
        })
        .collect()
}

/// Tab-separated comparison table, one row per variant.
pub fn format_ablation_table(rows: &[(&str, MetricsReport)]) -> String {
    let cols = [
        "user_precision",
        "user_recall",
        "user_f1",
        "claim_precision",
        "claim_recall",
        "claim_f1",
        "purity",
    ];
    let mut out = format!("variant\t{}\n", cols.join("\t"));
    for (name, r) in rows {
        let entries = r.entries();
        out.push_str(name);
        for c in cols {
            match entries.iter().find(|(k, _)| *k == c) {
                Some((_, v)) => out.push_str(&format!("\t{v:.4}")),
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    out
}

/// Parameters of a planted two-block benchmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_claims: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_users: 40,
            n_claims: 60,
            p_in: 0.3,
            p_out: 0.02,
            seed: 0,
        }
    }
}

/// Writes `edges.tsv`, `labels.tsv` and a default `config.toml` (output
/// directory `out`) into `dir`; returns the config path.
pub fn write_synthetic_dataset(dir: &Path, spec: &SynthSpec) -> Result<PathBuf> {
    let s = generate_synthetic(spec.n_users, spec.n_claims, spec.p_in, spec.p_out, spec.seed)?;
    write_edgelist(&dir.join("edges.tsv"), &s.records)?;
    write_atomic(&dir.join("labels.tsv"), format_labels(&s.labels)?.as_bytes())?;
    let cfg = RunConfig::for_edgelist("edges.tsv".into(), Some("labels.tsv".into()), spec.seed);
    let path = dir.join("config.toml");
    write_atomic(&path, cfg.to_toml().as_bytes())?;
    Ok(path)
}

/// Node label for printing: `user:<id>` or `claim:<id>`.
pub fn qualified_id(bhin: &Bhin, node: usize) -> String {
    let prefix = match bhin.node_type(node) {
        NodeType::User => "user",
        NodeType::Claim => "claim",
    };
    format!("{prefix}:{}", bhin.node_id(node))
}
