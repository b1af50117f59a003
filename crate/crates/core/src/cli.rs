//! The `smdcard` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::card::{build_card, read_manifest, render, CardFormat};
use crate::engine::{calibrate, evaluate, load_inputs, validate_plan, InputPaths};
use crate::error::{Error, Result};
use crate::harness::{build_fixtures, embeddings_to_table, Dataset, DefectDescriptor, Recipe};
use crate::ingest::{
    format_embeddings, format_record_table, read_embeddings, read_eval_config, read_record_table,
    read_report, report_to_json, write_atomic, EmbeddingColumns, SEED_ENV,
};
use crate::model::QualityReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "smdcard", version, about = "Evaluate synthetic medical data and build SMD Cards")]
#[command(after_help = format!("Environment:\n  {SEED_ENV}  default seed when the config sets none"))]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the configured metrics and write a quality report.
    Evaluate {
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        /// Image pair manifest (CSV of real,synthetic PGM paths).
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required_unless_present = "validate_config")]
        out: Option<PathBuf>,
        /// Check inputs and config against the plan without computing.
        #[arg(long)]
        validate_config: bool,
    },
    /// Render an SMD Card from a manifest and a quality report.
    Card {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Structured)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive normalization bounds from seeded self-splits of the reference set.
    Calibrate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write harness fixtures and their expected-effect manifest.
    Fixtures {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Structured,
    Md,
    Html,
}

impl From<FormatArg> for CardFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Structured => CardFormat::Structured,
            FormatArg::Md => CardFormat::Markdown,
            FormatArg::Html => CardFormat::Html,
        }
    }
}

/// Exit code for an error: validation and config problems are the
/// caller's to fix, everything else is internal.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        EXIT_INVALID
    } else {
        EXIT_INTERNAL
    }
}

/// `E<code>: <message>` lines, one per error.
pub fn error_lines(err: &Error) -> Vec<String> {
    match err {
        Error::Validation(list) => list.iter().map(|m| format!("E{}: {m}", err.code())).collect(),
        other => vec![format!("E{}: {other}", other.code())],
    }
}

/// Runs a parsed command, writing the summary to `stdout` and error lines
/// to `stderr`; returns the process exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match dispatch(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            for line in error_lines(&e) {
                let _ = writeln!(stderr, "{line}");
            }
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Evaluate {
            real,
            synthetic,
            table,
            images,
            config,
            out,
            validate_config,
        } => {
            let config = read_eval_config(&config)?;
            let inputs = load_inputs(
                &config,
                InputPaths {
                    real: real.as_deref(),
                    synthetic: &synthetic,
                    table: table.as_deref(),
                    images: images.as_deref(),
                },
            )?;
            if validate_config {
                validate_plan(&inputs, &config)?;
                say(stdout, "config ok")?;
                return Ok(());
            }
            let out = out.ok_or_else(|| Error::Config("--out is required".into()))?;
            let report = evaluate(inputs, &config)?;
            write_atomic(&out, report_to_json(&report)?.as_bytes())?;
            say(stdout, &verdict_summary(&report))
        }
        Command::Card {
            manifest,
            report,
            format,
            out,
        } => {
            let manifest = read_manifest(&manifest)?;
            let report = report.as_deref().map(read_report).transpose()?;
            let card = build_card(&manifest, report.as_ref())?;
            write_atomic(&out, render(&card, format.into()).as_bytes())
        }
        Command::Calibrate { real, config, out } => {
            let config = read_eval_config(&config)?;
            let cols = EmbeddingColumns {
                id: &config.data.id_column,
                subgroup: config.data.subgroup_column.as_deref(),
                region: config.data.region_column.as_deref(),
            };
            let real = read_embeddings(&real, &cols)?;
            let table = config
                .data
                .reference_table
                .as_ref()
                .map(|p| read_record_table(&config.resolve(p), &config.table_schema()))
                .transpose()?;
            let bounds = calibrate(&real, table.as_ref(), &config)?;
            let text = toml::to_string(&bounds).map_err(|e| Error::Serde(e.to_string()))?;
            write_atomic(&out, text.as_bytes())?;
            say(stdout, &format!("{} bounds written to {}", bounds.bounds.len(), out.display()))
        }
        Command::Fixtures { recipe, out } => {
            let text = std::fs::read_to_string(&recipe).map_err(|e| Error::io(&recipe, e))?;
            let recipe = Recipe::from_toml_str(&text)?;
            let written = write_fixtures(&recipe, &out)?;
            say(stdout, &format!("{} files written to {}", written, out.display()))
        }
    }
}

fn say(stdout: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))
}

/// One line per criterion of the global scope.
pub fn verdict_summary(report: &QualityReport) -> String {
    report
        .global
        .criteria
        .iter()
        .map(|c| match c.score {
            Some(s) => format!("{}: {s:.1} ({})", c.criterion, c.verdict),
            None => format!("{}: {}", c.criterion, c.verdict),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Serialize)]
struct FixtureManifest<'a> {
    seed: u64,
    real: &'static str,
    synthetic: &'static str,
    real_table: &'static str,
    synthetic_table: &'static str,
    defects: Vec<FixtureEntry<'a>>,
}

#[derive(Serialize)]
struct FixtureEntry<'a> {
    file: String,
    #[serde(flatten)]
    descriptor: &'a DefectDescriptor,
}

/// Writes every fixture file plus `expected.json`; returns the file count.
pub fn write_fixtures(recipe: &Recipe, dir: &Path) -> Result<usize> {
    let set = build_fixtures(recipe)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, String)> = vec![
        ("real.csv".into(), format_embeddings(&set.real)),
        ("synthetic.csv".into(), format_embeddings(&set.baseline)),
        ("real_table.csv".into(), format_record_table(&embeddings_to_table(&set.real))),
        ("synthetic_table.csv".into(), format_record_table(&embeddings_to_table(&set.baseline))),
    ];
    let mut entries = Vec::new();
    for (i, d) in set.defects.iter().enumerate() {
        let name = d.descriptor.defect.name();
        let (file, body) = match &d.data {
            Dataset::Embeddings(e) => (format!("defect{i}_{name}.csv"), format_embeddings(e)),
            Dataset::Table(t) => (format!("defect{i}_{name}_table.csv"), format_record_table(t)),
        };
        entries.push(FixtureEntry {
            file: file.clone(),
            descriptor: &d.descriptor,
        });
        files.push((file, body));
    }
    let manifest = FixtureManifest {
        seed: recipe.seed,
        real: "real.csv",
        synthetic: "synthetic.csv",
        real_table: "real_table.csv",
        synthetic_table: "synthetic_table.csv",
        defects: entries,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
    json.push('\n');
    files.push(("expected.json".into(), json));
    for (name, body) in &files {
        write_atomic(&dir.join(name), body.as_bytes())?;
    }
    Ok(files.len())
}
