use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use robust_priors::fmri::config::{default_fmri_theta_grid, FmriStudy};
use robust_priors::fmri::report::{run_cell, write_scene_design, write_scene_psi, EstimatorReport};
use robust_priors::fmri::simulate;
use robust_priors::harness::data::{classification_dataset_from_table, paired_dataset_from_table, read_table};
use robust_priors::harness::sweep::{
    default_theta_grid, iteration_rng, Baseline, ModelSummary, Solver, SweepConfig, DEFAULT_TIE_TOLERANCE,
};
use robust_priors::harness::{run_sweep, DatasetKind};
use robust_priors::PriorKind;

use crate::args::{Common, FmriArgs, TableArgs};
use crate::output::{read_input, InputDigest, OutDir, RunManifest};
use crate::{CliError, CliResult};

const DECIDE_TRAIN_SIZE: usize = 50;
const CLASSIFY_TRAIN_SIZE: usize = 100;
const DEFAULT_ITERATIONS: usize = 1000;

/// Random stream used for the left/right coin flips of pairwise encoding,
/// kept apart from the per-iteration streams.
const ENCODING_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GridPreset {
    Decision,
    Fmri,
}

fn parse_theta_grid(spec: &str, default: GridPreset) -> CliResult<Vec<f64>> {
    let preset = match spec.trim() {
        "default" => Some(default),
        "decision" => Some(GridPreset::Decision),
        "fmri" => Some(GridPreset::Fmri),
        _ => None,
    };
    if let Some(p) = preset {
        return Ok(match p {
            GridPreset::Decision => default_theta_grid(),
            GridPreset::Fmri => default_fmri_theta_grid(),
        });
    }
    spec.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| CliError::config(format!("theta grid entry '{t}' is not a number or preset")))
        })
        .collect()
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> CliResult<(T, Option<InputDigest>)> {
    let Some(path) = path else {
        return Ok((T::default(), None));
    };
    let (bytes, digest) = read_input(path, CliError::CONFIG)?;
    let value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
    Ok((value, Some(digest)))
}

/// Config file for `decide` and `classify`. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TableConfig {
    target: Option<String>,
    positive_label: Option<String>,
    train_size: Option<usize>,
    iterations: Option<usize>,
    seed: Option<u64>,
    theta_grid: Option<Vec<f64>>,
    solver: Option<Solver>,
    models: Option<Vec<PriorKind>>,
    tie_tolerance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ResolvedTable {
    target: String,
    positive_label: Option<String>,
    sweep: SweepConfig,
}

fn resolve_table(args: &TableArgs, file: TableConfig, kind: DatasetKind) -> CliResult<ResolvedTable> {
    let c = &args.common;
    let target = args
        .target
        .clone()
        .or(file.target)
        .ok_or_else(|| CliError::config("no target column: pass --target or set \"target\" in the config"))?;
    let positive_label = args.positive_label.clone().or(file.positive_label);
    if positive_label.is_some() && kind == DatasetKind::PairedComparison {
        return Err(CliError::config("--positive-label applies to classify only"));
    }
    let default_train = match kind {
        DatasetKind::PairedComparison => DECIDE_TRAIN_SIZE,
        DatasetKind::Classification => CLASSIFY_TRAIN_SIZE,
    };
    let mut sweep = SweepConfig::new(
        args.train_size.or(file.train_size).unwrap_or(default_train),
        c.iterations.or(file.iterations).unwrap_or(DEFAULT_ITERATIONS),
        c.seed.or(file.seed).unwrap_or(0),
    );
    sweep.theta_grid = match (&c.theta_grid, file.theta_grid) {
        (Some(s), _) => parse_theta_grid(s, GridPreset::Decision)?,
        (None, Some(g)) => g,
        (None, None) => default_theta_grid(),
    };
    if let Some(s) = file.solver {
        sweep.solver = s;
    }
    if let Some(m) = file.models {
        sweep.models = m;
    }
    sweep.tie_tolerance = file.tie_tolerance.unwrap_or(DEFAULT_TIE_TOLERANCE);
    Ok(ResolvedTable { target, positive_label, sweep })
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    kind: DatasetKind,
    input_rows: usize,
    dropped_rows: usize,
    dataset_rows: usize,
    cue_names: &'a [String],
    config: &'a SweepConfig,
    models: &'a [ModelSummary],
    baselines: &'a [Baseline],
    total_resamples: usize,
}

fn write_manifest(
    out: &OutDir,
    subcommand: &'static str,
    seed: u64,
    config: &impl Serialize,
    inputs: Vec<InputDigest>,
    outputs: &[&str],
) -> CliResult<()> {
    let config = serde_json::to_value(config)
        .map_err(|e| CliError::new(CliError::OUTPUT, format!("cannot serialize config: {e}")))?;
    out.write_json(
        "manifest.json",
        &RunManifest {
            subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs,
            outputs: outputs.iter().map(|o| out.display(o)).collect(),
        },
    )
}

fn table_command(args: TableArgs, kind: DatasetKind) -> CliResult<()> {
    let subcommand = match kind {
        DatasetKind::PairedComparison => "decide",
        DatasetKind::Classification => "classify",
    };
    let (file, config_digest) = read_config::<TableConfig>(args.common.config.as_deref())?;
    let resolved = resolve_table(&args, file, kind)?;
    let (bytes, data_digest) = read_input(&args.dataset, CliError::DATA)?;
    let out = OutDir::create(&args.common.out_dir)?;
    let inputs = std::iter::once(data_digest).chain(config_digest).collect();
    write_manifest(
        &out,
        subcommand,
        resolved.sweep.seed,
        &resolved,
        inputs,
        &["sweep.csv", "summary.json"],
    )?;

    let table = read_table(bytes.as_slice(), &resolved.target)?;
    let data = match kind {
        DatasetKind::PairedComparison => {
            let mut rng = ChaCha8Rng::seed_from_u64(resolved.sweep.seed);
            rng.set_stream(ENCODING_STREAM);
            paired_dataset_from_table(&table, &mut rng)?
        }
        DatasetKind::Classification => classification_dataset_from_table(&table, resolved.positive_label.as_deref())?,
    };
    eprintln!(
        "{subcommand}: {} rows ({} dropped for missing values), {} cues, {} encoded rows, {} iterations",
        table.target.len(),
        table.dropped_rows,
        data.m(),
        data.n(),
        resolved.sweep.iterations
    );
    let result = run_sweep(&data, &resolved.sweep)?;

    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    let summary = SweepSummary {
        kind,
        input_rows: table.target.len() + table.dropped_rows,
        dropped_rows: table.dropped_rows,
        dataset_rows: result.rows_in_dataset,
        cue_names: &data.cue_names,
        config: &result.config,
        models: &result.models,
        baselines: &result.baselines,
        total_resamples: result.total_resamples,
    };
    out.write("sweep.csv", &csv)?;
    out.write_json("summary.json", &summary)
}

pub fn decide(args: TableArgs) -> CliResult<()> {
    table_command(args, DatasetKind::PairedComparison)
}

pub fn classify(args: TableArgs) -> CliResult<()> {
    table_command(args, DatasetKind::Classification)
}

fn resolve_fmri(args: &FmriArgs, mut study: FmriStudy) -> CliResult<FmriStudy> {
    let c: &Common = &args.common;
    if let Some(s) = c.seed {
        study.sim.seed = s;
    }
    if let Some(n) = c.iterations {
        study.iterations = n;
    }
    if let Some(g) = &c.theta_grid {
        study.theta_grid = parse_theta_grid(g, GridPreset::Fmri)?;
    }
    if let Some(isi) = &args.isi {
        study.isi_levels = isi.clone();
    }
    if let Some(snr) = &args.snr {
        study.sigma2_psi_levels = snr.clone();
    }
    study.validate()?;
    for cell in study.cells() {
        cell.validate()?;
    }
    Ok(study)
}

pub fn fmri(args: FmriArgs) -> CliResult<()> {
    let (file, config_digest) = read_config::<FmriStudy>(args.common.config.as_deref())?;
    let study = resolve_fmri(&args, file)?;
    let out = OutDir::create(&args.common.out_dir)?;
    let mut outputs = vec!["fmri.csv"];
    if args.raw {
        outputs.push("fmri_raw.csv");
    }
    let cells = study.cells();
    let dumps: Vec<String> = (0..study.sim.runs)
        .flat_map(|r| [format!("scene_run{r}_design.bin"), format!("scene_run{r}_psi.bin")])
        .collect();
    if args.dump_scene {
        outputs.extend(dumps.iter().map(String::as_str));
    }
    write_manifest(&out, "fmri", study.sim.seed, &study, config_digest.into_iter().collect(), &outputs)?;

    let mut reports = Vec::with_capacity(cells.len());
    for (i, cfg) in cells.iter().enumerate() {
        eprintln!(
            "fmri: cell {}/{} isi={} sigma2_psi={} ({} iterations)",
            i + 1,
            cells.len(),
            cfg.isi,
            cfg.sigma2_psi,
            study.iterations
        );
        reports.push(run_cell(cfg, &study.theta_grid, study.iterations)?);
    }
    let report = EstimatorReport { study: study.clone(), cells: reports };

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let mut raw = Vec::new();
    if args.raw {
        report.write_raw_csv(&mut raw)?;
    }
    let mut scene_files = Vec::new();
    if args.dump_scene {
        let scenes = simulate(&cells[0], &mut iteration_rng(cells[0].seed, 0))?;
        for (r, scene) in scenes.iter().enumerate() {
            let mut design = Vec::new();
            write_scene_design(&mut design, scene)?;
            let mut psi = Vec::new();
            write_scene_psi(&mut psi, scene, cells[0].d)?;
            scene_files.push((dumps[2 * r].clone(), design));
            scene_files.push((dumps[2 * r + 1].clone(), psi));
        }
    }
    out.write("fmri.csv", &csv)?;
    if args.raw {
        out.write("fmri_raw.csv", &raw)?;
    }
    for (name, bytes) in &scene_files {
        out.write(name, bytes)?;
    }
    Ok(())
}
