//! `neurop`: the laboratory's command line. Generates PDE datasets,
//! trains operator models, renders receptive-field maps, and runs full
//! experiment recipes.
//!
//! Every subcommand resolves its settings from (highest priority first)
//! explicit flags, a flat JSON configuration file, and built-in defaults,
//! then writes a `manifest.json` — resolved settings, input-file hashes,
//! tool version, and the planned artifact list — into the output
//! directory before producing any artifact. Reruns with identical inputs
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use neurop::datagen::{DatasetRequest, FamilyParams, PdeFamily};
use neurop::erf::{
    erf_analytical_wave, erf_autodiff, erf_compare, erf_export, erf_finite_difference,
    ErfExportFormat, ErfMap,
};
use neurop::field::BoundaryKind;
use neurop::models::ModelState;
use neurop::recipes::{
    self, checkpoint_meta, normalized_field, EquivarianceConfig, NsErfConfig, SpectraConfig,
    Table1Config, WaveErfConfig, EXPERIMENTS,
};
use neurop::storage::{
    digest_bytes, read_checkpoint, read_dataset, write_checkpoint, write_dataset,
    write_file_atomic, DatasetContainer,
};
use neurop::train::{train, write_history_csv, TrainConfig};

/// Environment variable holding the default output root.
const OUT_ENV: &str = "NEUROP_OUT";

#[derive(Parser)]
#[command(
    name = "neurop",
    version,
    about = "Desk-scale neural-operator laboratory",
    propagate_version = true
)]
struct Cli {
    /// Flat JSON configuration file; explicit flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $NEUROP_OUT/<subcommand> or
    /// runs/<subcommand>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker-pool size hint; this build executes sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a PDE dataset (train + test containers).
    GenData {
        /// PDE family: wave, ns, darcy, or allen-cahn.
        #[arg(long)]
        pde: Option<String>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        /// Grid extent per axis.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Solution time (wave and ns only).
        #[arg(long)]
        t: Option<f64>,
        /// Viscosity (ns only).
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Train a model on a generated dataset.
    Train {
        /// Model tag: fno, fno3x3, fno-full, deeponet, t1, cno, or gt.
        #[arg(long)]
        model: Option<String>,
        /// Directory written by gen-data (train.nodf + test.nodf).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Hidden channel count (default: the model preset).
        #[arg(long)]
        width: Option<usize>,
        /// Layer count (default: the model preset).
        #[arg(long)]
        depth: Option<usize>,
        /// Retained spectral half-band (default: the model preset).
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render receptive-field maps for a checkpoint or the wave kernel.
    Erf {
        /// Checkpoint file (needed for autodiff and fd).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory written by gen-data; supplies the probe input and
        /// the dataset metadata.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Test-split sample used as the linearization point.
        #[arg(long)]
        probe_index: Option<usize>,
        /// Probed output location as `ix,iy` (default: grid center).
        #[arg(long)]
        x0: Option<String>,
        /// Map construction; repeat the flag to produce several maps and
        /// their pairwise comparison reports.
        #[arg(long = "method", required = true)]
        methods: Vec<MethodArg>,
    },
    /// Run a full experiment recipe end-to-end.
    Report {
        /// One of: table1, wave-erf, ns-erf, spectra, equivariance.
        #[arg(long)]
        experiment: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Autodiff,
    Fd,
    Analytical,
}

impl MethodArg {
    fn label(self) -> &'static str {
        match self {
            MethodArg::Autodiff => "autodiff",
            MethodArg::Fd => "fd",
            MethodArg::Analytical => "analytical",
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::GenData { .. } => cmd_gen_data(&cli, &cfg),
        Command::Train { .. } => cmd_train(&cli, &cfg),
        Command::Erf { .. } => cmd_erf(&cli, &cfg),
        Command::Report { .. } => cmd_report(&cli, &cfg),
    }
}

// ---------------------------------------------------------------------------
// configuration file
// ---------------------------------------------------------------------------

/// A flat JSON object of default settings; flags override its keys.
struct ConfigFile {
    path: Option<PathBuf>,
    map: serde_json::Map<String, Value>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile {
                path: None,
                map: serde_json::Map::new(),
            });
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let Value::Object(map) = value else {
            bail!("config {} must hold a JSON object", path.display());
        };
        Ok(ConfigFile {
            path: Some(path.to_path_buf()),
            map,
        })
    }

    /// Typed lookup of one key; absent keys give `None`.
    fn get<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => Ok(Some(
                serde_json::from_value(v.clone())
                    .with_context(|| format!("config key '{key}'"))?,
            )),
        }
    }

    /// The whole object (the experiment configuration for `report`).
    fn as_value(&self) -> Value {
        Value::Object(self.map.clone())
    }
}

/// Flag value, else config key, else default.
fn pick<T: serde::de::DeserializeOwned>(
    flag: &Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T>
where
    T: Clone,
{
    Ok(flag
        .clone()
        .or(cfg.get(key)?)
        .unwrap_or(default))
}

/// Flag value, else config key, else `None`.
fn pick_opt<T: serde::de::DeserializeOwned + Clone>(
    flag: &Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<Option<T>> {
    Ok(flag.clone().or(cfg.get(key)?))
}

/// Flag value, else config key, else an error naming the flag.
fn require<T: serde::de::DeserializeOwned + Clone>(
    flag: &Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<T> {
    pick_opt(flag, cfg, key)?.with_context(|| format!("missing --{} (or config key '{key}')", key.replace('_', "-")))
}

fn resolve_out(cli: &Cli, cfg: &ConfigFile, subdir: &str) -> Result<PathBuf> {
    if let Some(p) = &cli.out {
        return Ok(p.clone());
    }
    if let Some(p) = cfg.get::<String>("out")? {
        return Ok(PathBuf::from(p));
    }
    let root = std::env::var(OUT_ENV).unwrap_or_else(|_| "runs".to_string());
    Ok(Path::new(&root).join(subdir))
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

/// Run manifest: written into the output directory before any artifact.
/// Every artifact a run produces is listed here; the digests let a reader
/// verify the exact inputs afterwards.
#[derive(Serialize)]
struct Manifest {
    tool: String,
    command: String,
    /// Fully resolved settings (flags merged over config over defaults).
    config: Value,
    /// SHA-256 of every input file, keyed by path.
    inputs: BTreeMap<String, String>,
    /// Artifact files this run produces, relative to the output
    /// directory.
    artifacts: Vec<String>,
    jobs: usize,
}

fn input_digests(paths: &[&Path]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let bytes =
            std::fs::read(p).with_context(|| format!("reading input {}", p.display()))?;
        out.insert(p.display().to_string(), digest_bytes(&bytes));
    }
    Ok(out)
}

/// Creates the output directory and writes `manifest.json` into it.
fn write_manifest(out_dir: &Path, manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_file_atomic(&out_dir.join("manifest.json"), text.as_bytes())?;
    Ok(())
}

/// Exit-status contract: a run succeeds only if every artifact it
/// announced in the manifest actually exists afterwards.
fn verify_artifacts(out_dir: &Path, artifacts: &[String]) -> Result<()> {
    for a in artifacts {
        let p = out_dir.join(a);
        if !p.exists() {
            bail!("artifact {} was not produced", p.display());
        }
    }
    Ok(())
}

fn config_inputs(cfg: &ConfigFile) -> Vec<&Path> {
    cfg.path.as_deref().into_iter().collect()
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

fn cmd_gen_data(cli: &Cli, cfg: &ConfigFile) -> Result<()> {
    let Command::GenData {
        pde,
        n_train,
        n_test,
        grid,
        seed,
        t,
        nu,
    } = &cli.command
    else {
        unreachable!()
    };
    let pde = require(pde, cfg, "pde")?;
    let n_train = pick(n_train, cfg, "n_train", 8)?;
    let n_test = pick(n_test, cfg, "n_test", 2)?;
    let grid = pick(grid, cfg, "grid", 64)?;
    let seed = pick(seed, cfg, "seed", 0)?;
    let t_opt = pick_opt(t, cfg, "t")?;
    let nu_opt = pick_opt(nu, cfg, "nu")?;

    let family = match pde.as_str() {
        "wave" => PdeFamily::WaveAt {
            t: t_opt.unwrap_or(5.0),
        },
        "ns" | "navier-stokes" => PdeFamily::NavierStokesAt {
            t: t_opt.unwrap_or(5.0),
        },
        "darcy" | "allen-cahn" => {
            if t_opt.is_some() {
                bail!("invalid parameter combination: --t applies only to wave and ns");
            }
            if pde == "darcy" {
                PdeFamily::Darcy
            } else {
                PdeFamily::AllenCahn
            }
        }
        other => bail!(
            "pde family '{other}' is out of scope; available: wave, ns, darcy, allen-cahn"
        ),
    };
    let mut params = FamilyParams::default();
    if let Some(nu) = nu_opt {
        if !matches!(family, PdeFamily::NavierStokesAt { .. }) {
            bail!("invalid parameter combination: --nu applies only to ns");
        }
        params.ns_viscosity = nu;
    }

    let out_dir = resolve_out(cli, cfg, "gen-data")?;
    let artifacts = vec![
        "train.nodf".to_string(),
        "test.nodf".to_string(),
        "data_card.txt".to_string(),
    ];
    write_manifest(
        &out_dir,
        &Manifest {
            tool: tool_version(),
            command: "gen-data".into(),
            config: serde_json::json!({
                "pde": family.tag(),
                "n_train": n_train,
                "n_test": n_test,
                "grid": grid,
                "seed": seed,
                "params": serde_json::to_value(&params)?,
            }),
            inputs: input_digests(&config_inputs(cfg))?,
            artifacts: artifacts.clone(),
            jobs: cli.jobs,
        },
    )?;

    let pair = neurop::datagen::build_dataset(&DatasetRequest {
        family,
        n_train,
        n_test,
        grid,
        seed,
        params,
    })?;
    write_dataset(&out_dir.join("train.nodf"), &pair.train)?;
    write_dataset(&out_dir.join("test.nodf"), &pair.test)?;
    let card = format!(
        "{}\n{}",
        neurop::datagen::data_card(&pair.train.meta),
        neurop::datagen::data_card(&pair.test.meta)
    );
    write_file_atomic(&out_dir.join("data_card.txt"), card.as_bytes())?;
    verify_artifacts(&out_dir, &artifacts)?;
    println!(
        "wrote {} ({} train + {} test, {}x{})",
        out_dir.display(),
        n_train,
        n_test,
        grid,
        grid
    );
    Ok(())
}

fn tool_version() -> String {
    format!("neurop {}", env!("CARGO_PKG_VERSION"))
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn load_pair(dir: &Path) -> Result<neurop::datagen::DatasetPair> {
    let train = read_dataset(&dir.join("train.nodf"))
        .with_context(|| format!("loading {}/train.nodf", dir.display()))?;
    let test = read_dataset(&dir.join("test.nodf"))
        .with_context(|| format!("loading {}/test.nodf", dir.display()))?;
    Ok(neurop::datagen::DatasetPair { train, test })
}

fn cmd_train(cli: &Cli, cfg: &ConfigFile) -> Result<()> {
    let Command::Train {
        model,
        data,
        epochs,
        lr,
        batch_size,
        width,
        depth,
        modes,
        seed,
    } = &cli.command
    else {
        unreachable!()
    };
    let model = require(model, cfg, "model")?;
    let data: PathBuf = require(data, cfg, "data")?;
    let epochs = pick(epochs, cfg, "epochs", TrainConfig::default().epochs)?;
    let lr = pick(lr, cfg, "lr", TrainConfig::default().learning_rate)?;
    let batch_size = pick(batch_size, cfg, "batch_size", TrainConfig::default().batch_size)?;
    let width = pick_opt(width, cfg, "width")?;
    let depth = pick_opt(depth, cfg, "depth")?;
    let modes = pick_opt(modes, cfg, "modes")?;
    let seed = pick(seed, cfg, "seed", 0)?;

    let pair = load_pair(&data)?;
    let grid = pair.train.meta.grid;
    let mut model_cfg = recipes::tagged_config(&model, grid, width, depth, None)?;
    if let Some(m) = modes {
        model_cfg.modes = m;
        model_cfg.validate()?;
    }
    let train_cfg = TrainConfig {
        epochs,
        batch_size,
        learning_rate: lr,
        seed,
        ..TrainConfig::default()
    };
    train_cfg.validate()?;

    let out_dir = resolve_out(cli, cfg, "train")?;
    let artifacts = vec!["checkpoint.nock".to_string(), "history.csv".to_string()];
    let mut inputs = config_inputs(cfg);
    let train_path = data.join("train.nodf");
    let test_path = data.join("test.nodf");
    inputs.push(&train_path);
    inputs.push(&test_path);
    write_manifest(
        &out_dir,
        &Manifest {
            tool: tool_version(),
            command: "train".into(),
            config: serde_json::json!({
                "model": serde_json::to_value(&model_cfg)?,
                "train": serde_json::to_value(&train_cfg)?,
                "data": data.display().to_string(),
            }),
            inputs: input_digests(&inputs)?,
            artifacts: artifacts.clone(),
            jobs: cli.jobs,
        },
    )?;

    let init = ModelState::<f32>::init(&model_cfg, seed)?;
    let outcome = train(&init, &pair, &train_cfg)?;
    let meta = checkpoint_meta(
        &model_cfg,
        &train_cfg,
        &outcome,
        &pair.train.payload_digest(),
    )?;
    write_checkpoint(
        &out_dir.join("checkpoint.nock"),
        &outcome.best_state.to_checkpoint(meta),
    )?;
    write_history_csv(&out_dir.join("history.csv"), &outcome.history)?;
    verify_artifacts(&out_dir, &artifacts)?;

    let last = outcome.history.last().expect("history is non-empty");
    let best = &outcome.history[outcome.best_epoch];
    println!("final test rel l2: {:.2}%", last.test_rel_l2 * 100.0);
    println!(
        "best  test rel l2: {:.2}% (epoch {})",
        best.test_rel_l2 * 100.0,
        best.epoch
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// erf
// ---------------------------------------------------------------------------

fn parse_x0(s: &str, grid: usize) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("--x0 expects 'ix,iy', got '{s}'");
    }
    let ix: usize = parts[0].trim().parse().with_context(|| format!("--x0 '{s}'"))?;
    let iy: usize = parts[1].trim().parse().with_context(|| format!("--x0 '{s}'"))?;
    if ix >= grid || iy >= grid {
        bail!("--x0 {ix},{iy} is outside the {grid}x{grid} grid");
    }
    Ok((ix, iy))
}

/// Distance convention for mass curves and comparisons, by family tag.
fn family_boundary(family: &str) -> BoundaryKind {
    let base = family.split('@').next().unwrap_or(family);
    match base {
        "navier-stokes" | "allen-cahn" => BoundaryKind::Periodic,
        _ => BoundaryKind::DirichletZero,
    }
}

/// Solution time of a `wave@t` family tag, if it is one.
fn wave_time(family: &str) -> Option<f64> {
    family
        .strip_prefix("wave@")
        .and_then(|t| t.parse::<f64>().ok())
}

fn cmd_erf(cli: &Cli, cfg: &ConfigFile) -> Result<()> {
    let Command::Erf {
        checkpoint,
        data,
        probe_index,
        x0,
        methods,
    } = &cli.command
    else {
        unreachable!()
    };
    let data: PathBuf = require(data, cfg, "data")?;
    let probe_index = pick(probe_index, cfg, "probe_index", 0)?;
    let x0_text = pick_opt(x0, cfg, "x0")?;
    let checkpoint_path = pick_opt(checkpoint, cfg, "checkpoint")?;

    let test_path = data.join("test.nodf");
    let test: DatasetContainer = read_dataset(&test_path)
        .with_context(|| format!("loading {}", test_path.display()))?;
    let grid = test.meta.grid;
    let family = test.meta.family.clone();
    let x0 = match &x0_text {
        Some(s) => parse_x0(s, grid)?,
        None => (grid / 2, grid / 2),
    };
    if probe_index >= test.meta.sample_count {
        bail!(
            "--probe-index {} is outside the {}-sample test split",
            probe_index,
            test.meta.sample_count
        );
    }

    let needs_model = methods
        .iter()
        .any(|m| matches!(m, MethodArg::Autodiff | MethodArg::Fd));
    if needs_model && checkpoint_path.is_none() {
        bail!("--checkpoint is required for the autodiff and fd methods");
    }
    if methods.contains(&MethodArg::Analytical) && wave_time(&family).is_none() {
        bail!("the analytical method applies only to wave data, not '{family}'");
    }

    let mut artifacts = Vec::new();
    for m in methods {
        let label = m.label();
        artifacts.push(format!("erf_{label}.csv"));
        artifacts.push(format!("erf_{label}.pgm"));
        artifacts.push(format!("erf_{label}.bounds.txt"));
    }
    for i in 0..methods.len() {
        for j in (i + 1)..methods.len() {
            artifacts.push(format!(
                "compare_{}_vs_{}.json",
                methods[i].label(),
                methods[j].label()
            ));
        }
    }

    let out_dir = resolve_out(cli, cfg, "erf")?;
    let mut inputs = config_inputs(cfg);
    inputs.push(&test_path);
    if let Some(p) = &checkpoint_path {
        inputs.push(p);
    }
    write_manifest(
        &out_dir,
        &Manifest {
            tool: tool_version(),
            command: "erf".into(),
            config: serde_json::json!({
                "data": data.display().to_string(),
                "checkpoint": checkpoint_path.as_ref().map(|p| p.display().to_string()),
                "probe_index": probe_index,
                "x0": [x0.0, x0.1],
                "methods": methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
                "family": family,
            }),
            inputs: input_digests(&inputs)?,
            artifacts: artifacts.clone(),
            jobs: cli.jobs,
        },
    )?;

    let state = match &checkpoint_path {
        Some(p) if needs_model => {
            let ckpt = read_checkpoint(p)?;
            let state = ModelState::<f32>::from_checkpoint(&ckpt)?;
            if state.config().grid != grid {
                bail!(
                    "dataset/model grid mismatch: data {}x{}, checkpoint {}x{}",
                    grid,
                    grid,
                    state.config().grid,
                    state.config().grid
                );
            }
            Some(state)
        }
        _ => None,
    };
    let probe = normalized_field(&test.input_field(probe_index)?, &test.meta.norm)?;

    let mut maps: Vec<(MethodArg, ErfMap)> = Vec::new();
    for m in methods {
        let map = match m {
            MethodArg::Autodiff => {
                erf_autodiff(state.as_ref().expect("checked above"), &probe, x0)?
            }
            MethodArg::Fd => {
                erf_finite_difference(state.as_ref().expect("checked above"), &probe, x0, None)?
            }
            MethodArg::Analytical => {
                let t = wave_time(&family).expect("checked above");
                let b = BoundaryKind::DirichletZero;
                erf_analytical_wave(
                    (b.coord(x0.0, grid), b.coord(x0.1, grid)),
                    t,
                    neurop::datagen::WAVE_SPEED,
                    neurop::datagen::WAVE_TRUNCATION,
                    grid,
                    true,
                )?
            }
        };
        let label = m.label();
        erf_export(&map, &out_dir.join(format!("erf_{label}.csv")), ErfExportFormat::Csv)?;
        erf_export(&map, &out_dir.join(format!("erf_{label}.pgm")), ErfExportFormat::Pgm)?;
        println!("wrote erf_{label}.csv / erf_{label}.pgm");
        maps.push((*m, map));
    }

    let boundary = family_boundary(&family);
    for i in 0..maps.len() {
        for j in (i + 1)..maps.len() {
            let (ma, a) = &maps[i];
            let (mb, b) = &maps[j];
            let report = erf_compare(a, b, boundary)?;
            let name = format!("compare_{}_vs_{}.json", ma.label(), mb.label());
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            write_file_atomic(&out_dir.join(&name), text.as_bytes())?;
            println!(
                "compare {} vs {}: cosine {:.4}",
                ma.label(),
                mb.label(),
                report.cosine
            );
        }
    }
    verify_artifacts(&out_dir, &artifacts)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(cli: &Cli, cfg: &ConfigFile) -> Result<()> {
    let Command::Report { experiment } = &cli.command else {
        unreachable!()
    };
    let name: String = require(experiment, cfg, "experiment")?;
    let raw = cfg.as_value();
    let out_dir = resolve_out(cli, cfg, &name)?;
    let inputs = input_digests(&config_inputs(cfg))?;

    let (resolved, artifacts): (Value, Vec<String>) = match name.as_str() {
        "table1" => {
            let c: Table1Config = serde_json::from_value(raw)?;
            let mut arts = vec!["table1.json".to_string(), "table1.csv".to_string()];
            for m in &c.models {
                for s in &c.seeds {
                    arts.push(format!("history_{m}_s{s}.csv"));
                }
            }
            (serde_json::to_value(&c)?, arts)
        }
        "wave-erf" => {
            let c: WaveErfConfig = serde_json::from_value(raw)?;
            let mut arts = vec!["wave_erf.json".to_string()];
            for stem in std::iter::once("analytical".to_string())
                .chain(c.models.iter().cloned())
            {
                arts.push(format!("erf_{stem}.csv"));
                arts.push(format!("erf_{stem}.pgm"));
                arts.push(format!("erf_{stem}.bounds.txt"));
            }
            for m in &c.models {
                arts.push(format!("model_{m}.nock"));
            }
            (serde_json::to_value(&c)?, arts)
        }
        "ns-erf" => {
            let c: NsErfConfig = serde_json::from_value(raw)?;
            let mut arts = vec!["ns_erf.json".to_string()];
            for m in &c.models {
                arts.push(format!("erf_{m}.csv"));
                arts.push(format!("erf_{m}.pgm"));
                arts.push(format!("erf_{m}.bounds.txt"));
            }
            (serde_json::to_value(&c)?, arts)
        }
        "spectra" => {
            let c: SpectraConfig = serde_json::from_value(raw)?;
            let mut arts = vec!["spectra.json".to_string()];
            for m in &c.models {
                arts.push(format!("spectrum_{m}.csv"));
            }
            (serde_json::to_value(&c)?, arts)
        }
        "equivariance" => {
            let c: EquivarianceConfig = serde_json::from_value(raw)?;
            (serde_json::to_value(&c)?, vec!["equivariance.json".to_string()])
        }
        other => bail!(
            "unknown experiment '{other}' (expected one of {})",
            EXPERIMENTS.join(", ")
        ),
    };

    write_manifest(
        &out_dir,
        &Manifest {
            tool: tool_version(),
            command: format!("report {name}"),
            config: resolved.clone(),
            inputs,
            artifacts: artifacts.clone(),
            jobs: cli.jobs,
        },
    )?;

    match name.as_str() {
        "table1" => {
            let c: Table1Config = serde_json::from_value(resolved)?;
            let report = recipes::run_table1(&c, Some(&out_dir))?;
            for m in &report.models {
                println!(
                    "{:>9}: {:.2}% ± {:.2}",
                    m.model,
                    m.mean_rel_l2 * 100.0,
                    m.std_rel_l2 * 100.0
                );
            }
        }
        "wave-erf" => {
            let c: WaveErfConfig = serde_json::from_value(resolved)?;
            let report = recipes::run_wave_erf(&c, Some(&out_dir))?;
            for e in &report.entries {
                println!(
                    "{:>9}: test {:.2}%, cosine vs analytical {:.4}",
                    e.model,
                    e.test_rel_l2 * 100.0,
                    e.cosine_vs_analytical
                );
            }
        }
        "ns-erf" => {
            let c: NsErfConfig = serde_json::from_value(resolved)?;
            let report = recipes::run_ns_erf(&c, Some(&out_dir))?;
            for e in &report.entries {
                println!("{:>9}: test {:.2}%", e.model, e.test_rel_l2 * 100.0);
            }
            for (pair, cos) in report.entries.windows(2).zip(&report.pair_cosines) {
                println!(
                    "cosine {} vs {}: {:.4}",
                    pair[0].model, pair[1].model, cos
                );
            }
        }
        "spectra" => {
            let c: SpectraConfig = serde_json::from_value(resolved)?;
            let report = recipes::run_spectra(&c, Some(&out_dir))?;
            for m in &report.models {
                println!(
                    "{:>9}: test {:.2}%, low-band energy {:.3e}",
                    m.model,
                    m.test_rel_l2 * 100.0,
                    m.low_band_energy
                );
            }
        }
        "equivariance" => {
            let c: EquivarianceConfig = serde_json::from_value(resolved)?;
            let report = recipes::run_equivariance(&c, Some(&out_dir))?;
            for a in &report.audits {
                println!("{:>9}: mean rel l2 {:.3e}", a.model, a.mean_rel_l2);
            }
        }
        _ => unreachable!(),
    }
    verify_artifacts(&out_dir, &artifacts)?;
    println!("report written to {}", out_dir.display());
    Ok(())
}
