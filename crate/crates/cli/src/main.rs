//! `infovgae` command-line tool.
//!
//! Exit codes: 0 success, 1 data or I/O error, 2 configuration error,
//! 3 numeric failure during training.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use infovgae::analysis::{rank_axis, stance_score, NodeFilter};
use infovgae::io::{write_atomic, RunConfig};
use infovgae::pipeline::{
    embedding_from_checkpoints, format_ablation_table, format_embedding, load_embedding,
    qualified_id, resolve_node, run_ablations, run_evaluate, run_train,
    write_synthetic_dataset, Dataset, SynthSpec,
};
use infovgae::trainer::EmbedMode;
use infovgae::Error;

#[derive(Parser)]
#[command(name = "infovgae", version, about = "Belief embeddings for users and claims")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, trace and embedding.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute the embedding from the trained checkpoint.
    Embed {
        #[arg(long)]
        config: PathBuf,
        /// Draw one posterior sample with this seed instead of the mean.
        #[arg(long)]
        sample_seed: Option<u64>,
        /// Destination; defaults to `<output_dir>/embedding.tsv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the trained embedding and write metrics and scatter files.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the nodes with the largest coordinate on one axis.
    Rank {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: usize,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, value_enum, default_value_t = Nodes::All)]
        nodes: Nodes,
    },
    /// Print the agreement score of a user with a claim.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        claim: String,
    },
    /// Write a planted two-block benchmark with labels and a config.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 40)]
        users: usize,
        #[arg(long, default_value_t = 60)]
        claims: usize,
        #[arg(long, default_value_t = 0.3)]
        p_in: f64,
        #[arg(long, default_value_t = 0.02)]
        p_out: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the full model and each ablation and compare their metrics.
    Ablate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Nodes {
    Users,
    Claims,
    All,
}

impl From<Nodes> for NodeFilter {
    fn from(n: Nodes) -> Self {
        match n {
            Nodes::Users => NodeFilter::Users,
            Nodes::Claims => NodeFilter::Claims,
            Nodes::All => NodeFilter::All,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numeric(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> infovgae::Result<()> {
    match command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = run_train(&cfg)?;
            for (suffix, m) in out.trained.models() {
                let last = m.trace.records.last();
                println!(
                    "trained{suffix}: {} steps, final recon {}, kl {}",
                    m.steps,
                    last.map_or(f64::NAN, |r| r.recon),
                    last.map_or(f64::NAN, |r| r.kl)
                );
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Embed {
            config,
            sample_seed,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let ds = Dataset::load(&cfg)?;
            let mode = sample_seed.map_or(EmbedMode::Mean, EmbedMode::Sample);
            let z = embedding_from_checkpoints(&ds, &cfg, mode)?;
            let path = out.unwrap_or_else(|| cfg.output_dir.join("embedding.tsv"));
            write_atomic(&path, format_embedding(&ds.bhin, &z).as_bytes())?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate { config } => {
            let cfg = RunConfig::load(&config)?;
            let ev = run_evaluate(&cfg)?;
            for (k, v) in ev.report.entries() {
                println!("{k} = {v:.4}");
            }
            println!(
                "axes {:?}, {} unaligned nodes",
                ev.selection.axes, ev.unaligned
            );
        }
        Command::Rank {
            config,
            axis,
            top,
            nodes,
        } => {
            let cfg = RunConfig::load(&config)?;
            let ds = Dataset::load(&cfg)?;
            let z = load_embedding(&ds, &cfg)?;
            let ranked = rank_axis(&z, axis, nodes.into(), ds.n_users())?;
            println!("rank\tnode\tvalue");
            for (r, &node) in ranked.iter().take(top).enumerate() {
                println!("{}\t{}\t{:.6}", r + 1, qualified_id(&ds.bhin, node), z[(node, axis)]);
            }
        }
        Command::Predict {
            config,
            user,
            claim,
        } => {
            let cfg = RunConfig::load(&config)?;
            let ds = Dataset::load(&cfg)?;
            let z = load_embedding(&ds, &cfg)?;
            let u = find_one(&ds, &user, "user")?;
            let c = find_one(&ds, &claim, "claim")?;
            println!("{}", stance_score(z.row(u), z.row(c))?);
        }
        Command::Synth {
            out_dir,
            users,
            claims,
            p_in,
            p_out,
            seed,
        } => {
            let spec = SynthSpec {
                n_users: users,
                n_claims: claims,
                p_in,
                p_out,
                seed,
            };
            let path = write_synthetic_dataset(&out_dir, &spec)?;
            println!("wrote {}", path.display());
        }
        Command::Ablate { config } => {
            let cfg = RunConfig::load(&config)?;
            let ds = Dataset::load(&cfg)?;
            let rows = run_ablations(&ds, &cfg)?;
            let table = format_ablation_table(&rows);
            write_atomic(&cfg.output_dir.join("ablation.tsv"), table.as_bytes())?;
            print!("{table}");
        }
    }
    Ok(())
}

fn find_one(ds: &Dataset, id: &str, kind: &str) -> infovgae::Result<usize> {
    let prefixed = format!("{kind}:{}", id.strip_prefix(&format!("{kind}:")).unwrap_or(id));
    resolve_node(&ds.bhin, &prefixed)
        .first()
        .copied()
        .ok_or_else(|| Error::Data(format!("unknown {kind} {id:?}")))
}
