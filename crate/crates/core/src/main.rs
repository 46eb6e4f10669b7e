use std::collections::BTreeSet;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use manifold_core::dataset::{Dataset, FeatureValues, InstanceId};
use manifold_core::divergence::DivergenceConfig;
use manifold_core::encoders::{apply_encoders, build_encoder, select_encodable_features};
use manifold_core::ingest::{load_bundle, write_cache};
use manifold_core::service::{serve, AppState, SessionStore};
use manifold_core::Error;

#[derive(Parser)]
#[command(name = "manifold", version, about = "Compare multiple ML models on one dataset")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a bundle and write the validated dataset cache.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a bundle; exits non-zero with a report on stderr when invalid.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Write the feature table augmented with distribution-difference encoders.
    Encode {
        #[arg(long)]
        manifest: PathBuf,
        /// File of instance ids separated by whitespace or commas.
        #[arg(long)]
        selection_a: PathBuf,
        #[arg(long)]
        selection_b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the encoders as JSON.
        #[arg(long)]
        encoders_json: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Serve the HTTP API. MANIFOLD_PORT overrides --port.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Persist sessions to this JSON file.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Ingest { manifest, out } => {
            let d = load_bundle(&manifest)?;
            write_cache(&d, &out)?;
            eprintln!(
                "ingested {} instances, {} models, {} features into {}",
                d.len(),
                d.models.len(),
                d.features.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { manifest } => match load_bundle(&manifest) {
            Ok(d) => {
                eprintln!("valid: {} instances, {} models", d.len(), d.models.len());
                Ok(ExitCode::SUCCESS)
            }
            Err(e @ (Error::Validation(_) | Error::Parse { .. } | Error::RowCountMismatch { .. })) => {
                eprintln!("{e}");
                Ok(ExitCode::FAILURE)
            }
            Err(e) => Err(e.into()),
        },
        Command::Encode {
            manifest,
            selection_a,
            selection_b,
            threshold,
            out,
            encoders_json,
            bins,
        } => {
            let d = load_bundle(&manifest)?;
            let a = read_ids(&selection_a)?;
            let b = read_ids(&selection_b)?;
            let cfg = DivergenceConfig {
                numeric_bins: bins,
                ..Default::default()
            };
            let selected = select_encodable_features(&d, &a, &b, threshold, &cfg)?;
            for f in &selected {
                eprintln!("{}\t{:.6}", f.feature, f.divergence);
            }
            let encoders = selected
                .iter()
                .map(|f| build_encoder(&d, &f.feature, &a, &b, &cfg))
                .collect::<Result<Vec<_>, _>>()?;
            write_table(&apply_encoders(&d, &encoders)?, &out)?;
            if let Some(path) = encoders_json {
                std::fs::write(&path, serde_json::to_vec_pretty(&encoders)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            manifest,
            port,
            host,
            static_dir,
            snapshot,
        } => {
            let port = match std::env::var("MANIFOLD_PORT") {
                Ok(v) => v.parse().with_context(|| format!("MANIFOLD_PORT={v:?} is not a port"))?,
                Err(_) => port,
            };
            let d = load_bundle(&manifest)?;
            let sessions = match &snapshot {
                Some(path) => SessionStore::with_snapshot(path, d.len())?,
                None => SessionStore::in_memory(),
            };
            let state = Arc::new(AppState::new(d, sessions));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, SocketAddr::new(host, port), static_dir.as_deref()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_ids(path: &Path) -> anyhow::Result<BTreeSet<InstanceId>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map(InstanceId)
                .with_context(|| format!("{}: {t:?} is not an instance id", path.display()))
        })
        .collect()
}

/// Dense columns only; sparse families have no single-cell representation.
fn write_table(d: &Dataset, path: &Path) -> anyhow::Result<()> {
    let cols: Vec<_> = d
        .features
        .iter()
        .filter(|f| !matches!(f.values, FeatureValues::SparseCount(_)))
        .collect();
    if cols.is_empty() {
        bail!("dataset has no dense features to write");
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(std::iter::once("instance").chain(cols.iter().map(|c| c.name.as_str())))?;
    for i in 0..d.len() {
        let mut rec = vec![i.to_string()];
        for c in &cols {
            rec.push(match &c.values {
                FeatureValues::Numeric(v) => v[i].to_string(),
                FeatureValues::Categorical(v) => v[i].clone(),
                FeatureValues::Boolean(v) => v[i].to_string(),
                FeatureValues::SparseCount(_) => unreachable!("filtered above"),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
