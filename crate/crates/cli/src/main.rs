//! `sigret`: index, query and evaluate signature image databases.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sigret_core::eval::{self, Protocol};
use sigret_core::image_io::{load_image, preprocess, CANONICAL_SIDE};
use sigret_core::retrieval::{query, FeatureDb, FeatureRecord};
use sigret_core::store::{load_db, save_db};
use sigret_core::synth::{self, generate_corpus, Jitter, SynthSpec};
use sigret_core::{CurveletConfig, FeatureExtractor, TransformSpec, Wavelet};

#[derive(Debug, Parser)]
#[command(
    name = "sigret",
    version,
    about = "Signature image retrieval with wavelet and curvelet texture features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract features for a corpus and write a .sigdb database.
    Index(IndexArgs),
    /// Rank database records by distance to one image (TSV on stdout).
    Query(QueryArgs),
    /// Precision/recall at top-k cuts for one or two databases.
    Eval(EvalArgs),
    /// Generate a synthetic signature corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransformKind {
    Dwt,
    Curvelet,
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// Transform used to build feature vectors.
    #[arg(long, value_enum)]
    transform: Option<TransformKind>,
    /// DWT decomposition depth.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// DWT filter family (haar, db2, db4).
    #[arg(long, default_value = "db4")]
    wavelet: String,
    /// Curvelet scale count.
    #[arg(long, default_value_t = 5)]
    scales: usize,
    /// Curvelet wedges at the second coarsest scale.
    #[arg(long, default_value_t = 16)]
    angles: usize,
    /// Split the finest curvelet scale into wedges instead of a single wavelet ring.
    #[arg(long)]
    finest_curvelets: bool,
}

impl TransformArgs {
    fn spec(&self, kind: TransformKind) -> Result<TransformSpec> {
        Ok(match kind {
            TransformKind::Dwt => TransformSpec::Dwt {
                levels: self.levels,
                wavelet: self.wavelet.parse::<Wavelet>()?,
            },
            TransformKind::Curvelet => {
                let cfg = CurveletConfig {
                    scales: self.scales,
                    angles_at_second_coarsest: self.angles,
                    finest_is_wavelet: !self.finest_curvelets,
                };
                cfg.validate()?;
                TransformSpec::Curvelet(cfg)
            }
        })
    }
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Corpus directory (scanned recursively, or its manifest.csv if present) or a manifest file.
    corpus: PathBuf,
    /// Output database path.
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    transform: TransformArgs,
    /// Canonical image side.
    #[arg(long, default_value_t = CANONICAL_SIDE)]
    size: usize,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Query image.
    image: PathBuf,
    #[arg(long)]
    db: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Override the transform recorded in the database (must match it).
    #[command(flatten)]
    transform: TransformArgs,
    #[arg(long, default_value_t = CANONICAL_SIDE)]
    size: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// One database, or two to compare (A then B).
    #[arg(long, required = true, num_args = 1)]
    db: Vec<PathBuf>,
    /// Comma-separated top-k cuts.
    #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_CUTS)]
    cuts: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Remove each query from the database before ranking.
    #[arg(long)]
    leave_out: bool,
    /// Comparison CSV written when two databases are given.
    #[arg(long, default_value = "comparison.csv")]
    csv: PathBuf,
    /// Also write each report as JSON next to its database.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    writers: usize,
    #[arg(long, default_value_t = 12)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = CANONICAL_SIDE)]
    side: usize,
    #[arg(long, default_value_t = Jitter::default().stroke)]
    stroke_jitter: f64,
    #[arg(long, default_value_t = Jitter::default().translation)]
    translation_jitter: f64,
    #[arg(long, default_value_t = Jitter::default().thickness)]
    thickness_jitter: f64,
}

/// One image to index.
struct CorpusItem {
    path: PathBuf,
    id: String,
    writer: String,
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pgm" | "png")
    )
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else if is_image(&path) {
            out.push(path);
        }
    }
    Ok(())
}

/// Lists corpus images. A manifest supplies labels; otherwise the writer
/// is the parent directory name and the id is `<writer>/<file stem>`.
fn discover(corpus: &Path) -> Result<Vec<CorpusItem>> {
    let manifest = if corpus.is_file() {
        Some(corpus.to_path_buf())
    } else {
        let m = corpus.join(synth::MANIFEST_NAME);
        m.is_file().then_some(m)
    };
    if let Some(manifest) = manifest {
        return Ok(synth::read_manifest(&manifest)
            .with_context(|| format!("reading {}", manifest.display()))?
            .into_iter()
            .map(|(path, e)| CorpusItem {
                path,
                id: format!("{}/{}", e.writer, e.sample),
                writer: e.writer,
            })
            .collect());
    }
    if !corpus.is_dir() {
        bail!("corpus {} does not exist", corpus.display());
    }
    let mut paths = Vec::new();
    walk(corpus, &mut paths).with_context(|| format!("scanning {}", corpus.display()))?;
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let writer = path
                .parent()
                .filter(|p| p != &corpus)
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "unknown".into());
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(CorpusItem {
                id: format!("{writer}/{stem}"),
                writer,
                path,
            })
        })
        .collect()
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    let kind = args.transform.transform.unwrap_or(TransformKind::Dwt);
    let spec = args.transform.spec(kind)?;
    let items = discover(&args.corpus)?;
    if items.is_empty() {
        bail!("no images found in {}", args.corpus.display());
    }
    let images = items
        .iter()
        .map(|item| {
            load_image(&item.path)
                .map(|img| preprocess(&img, args.size))
                .with_context(|| format!("loading {}", item.path.display()))
        })
        .collect::<Result<Vec<_>>>()?;

    let extractor = FeatureExtractor::new(spec, args.size)?;
    let vectors = extractor.extract_batch(&images);
    let records = items
        .into_iter()
        .zip(vectors)
        .map(|(item, vector)| {
            Ok(FeatureRecord {
                vector: vector.with_context(|| format!("extracting {}", item.path.display()))?,
                id: item.id,
                writer: item.writer,
                source: item.path.display().to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let db = FeatureDb::new(extractor.layout(), records)?;
    save_db(&db, &args.db).with_context(|| format!("writing {}", args.db.display()))?;
    println!(
        "indexed {} records (dim {}) into {}",
        db.len(),
        db.layout().dim(),
        args.db.display()
    );
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let db = load_db(&args.db).with_context(|| format!("reading {}", args.db.display()))?;
    let spec = match args.transform.transform {
        Some(kind) => args.transform.spec(kind)?,
        None => db.layout().transform,
    };
    let img = preprocess(
        &load_image(&args.image).with_context(|| format!("loading {}", args.image.display()))?,
        args.size,
    );
    let probe = FeatureExtractor::new(spec, args.size)?.extract(&img)?;
    let ranked = query(&db, &probe, args.k)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "rank\tid\twriter\tdistance\tsource")?;
    for (rank, entry) in ranked.entries.iter().enumerate() {
        let source = db.get(&entry.id).map_or("", |r| r.source.as_str());
        writeln!(
            out,
            "{}\t{}\t{}\t{:?}\t{}",
            rank + 1,
            entry.id,
            entry.writer,
            entry.distance,
            source
        )?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    if args.db.len() > 2 {
        bail!("eval takes one or two databases, got {}", args.db.len());
    }
    let protocol = Protocol {
        cuts: args.cuts.clone(),
        seed: args.seed,
        query_in_db: !args.leave_out,
    };
    let mut reports = Vec::new();
    for path in &args.db {
        let db = load_db(path).with_context(|| format!("reading {}", path.display()))?;
        let report = eval::run_benchmark(&db, &protocol)
            .with_context(|| format!("evaluating {}", path.display()))?;
        if args.json {
            let json_path = path.with_extension("eval.json");
            fs::write(&json_path, report.to_json())
                .with_context(|| format!("writing {}", json_path.display()))?;
        }
        reports.push(report);
    }

    match reports.as_slice() {
        [single] => print!("{}", eval::format_table(single)),
        [a, b] => {
            print!("{}", eval::format_comparison_table(a, b)?);
            eval::emit_comparison(a, b, &args.csv)
                .with_context(|| format!("writing {}", args.csv.display()))?;
            let behind: Vec<usize> = a
                .cuts
                .iter()
                .zip(&b.cuts)
                .filter(|(ca, cb)| ca.k >= 2 && cb.precision < ca.precision)
                .map(|(ca, _)| ca.k)
                .collect();
            if behind.is_empty() {
                println!("trend: B precision >= A precision at every cut >= 2");
            } else {
                println!("trend: B precision < A precision at cuts {behind:?}");
            }
            eprintln!("wrote {}", args.csv.display());
        }
        _ => unreachable!("one or two databases"),
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        writers: args.writers,
        samples_per_writer: args.samples,
        seed: args.seed,
        side: args.side,
        jitter: Jitter {
            stroke: args.stroke_jitter,
            translation: args.translation_jitter,
            thickness: args.thickness_jitter,
        },
    };
    let corpus = generate_corpus(&spec)?;
    let entries = synth::write_corpus(&corpus, &args.out)?;
    println!("wrote {} images to {}", entries.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Query(a) => cmd_query(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
