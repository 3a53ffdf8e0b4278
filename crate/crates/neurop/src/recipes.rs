//! End-to-end experiment recipes: each one goes from a data request to a
//! serializable report plus optional artifact files, so the command line
//! and the test suite drive exactly the same code.
//!
//! Every recipe is deterministic in its configuration: datasets come from
//! seeded generators, model initialization and shuffling are seeded, and
//! reruns produce byte-identical reports and files.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{c4_equivariance_error, radial_error_spectrum, spectrum_csv, SpectrumBins};
use crate::datagen::{
    build_dataset, sample_grf, DatasetRequest, FamilyParams, GrfSpec, PdeFamily, WAVE_SPEED,
    WAVE_TRUNCATION,
};
use crate::erf::{erf_analytical_wave, erf_autodiff, erf_compare, erf_export, ErfExportFormat, ErfMap};
use crate::error::{Error, Result};
use crate::field::{BoundaryKind, Field2D};
use crate::models::{ModelConfig, ModelState};
use crate::storage::{
    digest_f64, format_float, write_csv, write_file_atomic, write_checkpoint, CheckpointMeta,
    DatasetContainer, NormStats,
};
use crate::train::{normalize_inputs, train, write_history_csv, LrSchedule, TrainConfig, TrainOutcome};

/// Builds a model configuration from a preset tag with optional overrides.
pub fn tagged_config(
    tag: &str,
    grid: usize,
    width: Option<usize>,
    depth: Option<usize>,
    coord_features: Option<bool>,
) -> Result<ModelConfig> {
    let mut cfg = ModelConfig::preset(tag, grid)?;
    if let Some(w) = width {
        cfg.width = w;
    }
    if let Some(d) = depth {
        cfg.depth = d;
    }
    if let Some(c) = coord_features {
        cfg.coord_features = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn json_to_file<S: Serialize>(value: &S, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file_atomic(path, text.as_bytes())
}

/// SHA-256 digest of a loss history, over the flattened
/// `(train, test, learning-rate)` rows.
pub fn history_digest(history: &[crate::train::EpochStats]) -> String {
    let flat: Vec<f64> = history
        .iter()
        .flat_map(|h| [h.train_rel_l2, h.test_rel_l2, h.learning_rate])
        .collect();
    digest_f64(&flat)
}

/// Assembles checkpoint metadata for a finished run.
pub fn checkpoint_meta(
    model: &ModelConfig,
    train_config: &TrainConfig,
    outcome: &TrainOutcome<f32>,
    dataset_digest: &str,
) -> Result<CheckpointMeta> {
    Ok(CheckpointMeta {
        model: serde_json::to_value(model)?,
        train: serde_json::to_value(train_config)?,
        epoch: outcome.best_epoch,
        history_digest: history_digest(&outcome.history),
        dataset_digest: dataset_digest.to_string(),
    })
}

/// Mean low-band and total spectral error energy of a model over a split
/// (inputs normalized by the training statistics, as in evaluation).
pub fn spectral_errors(
    state: &ModelState<f32>,
    split: &DatasetContainer,
    stats: &NormStats,
) -> Result<(f64, f64)> {
    let n = split.meta.sample_count;
    if n == 0 {
        return Err(Error::arg("spectral-errors", "empty split"));
    }
    let grid = split.meta.grid;
    let mut low = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let x = normalize_inputs(&split.input_batch::<f32>(&[i])?, stats)?;
        let out = state.forward(&x)?;
        let pred = Field2D::from_slice(
            grid,
            grid,
            &out.data().iter().map(|v| *v as f64).collect::<Vec<f64>>(),
        )?;
        let bins = radial_error_spectrum(&pred, &split.target_field(i)?)?;
        low += bins.low_band();
        total += bins.total_energy();
    }
    Ok((low / n as f64, total / n as f64))
}

/// Mean radial error spectrum of a model over a split: per-bin mean of
/// the per-sample energies, counts unchanged.
pub fn mean_spectrum(
    state: &ModelState<f32>,
    split: &DatasetContainer,
    stats: &NormStats,
) -> Result<SpectrumBins> {
    let n = split.meta.sample_count;
    if n == 0 {
        return Err(Error::arg("mean-spectrum", "empty split"));
    }
    let grid = split.meta.grid;
    let mut acc: Option<SpectrumBins> = None;
    for i in 0..n {
        let x = normalize_inputs(&split.input_batch::<f32>(&[i])?, stats)?;
        let out = state.forward(&x)?;
        let pred = Field2D::from_slice(
            grid,
            grid,
            &out.data().iter().map(|v| *v as f64).collect::<Vec<f64>>(),
        )?;
        let bins = radial_error_spectrum(&pred, &split.target_field(i)?)?;
        acc = Some(match acc {
            None => bins,
            Some(mut a) => {
                for (dst, src) in a.energy.iter_mut().zip(&bins.energy) {
                    *dst += src;
                }
                a
            }
        });
    }
    let mut bins = acc.expect("split is non-empty");
    for e in bins.energy.iter_mut() {
        *e /= n as f64;
    }
    Ok(bins)
}

// ---------------------------------------------------------------------------
// table1
// ---------------------------------------------------------------------------

/// Configuration of the model-comparison table: several architectures
/// trained under identical budgets on one dataset, across several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table1Config {
    pub family: String,
    pub grid: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub models: Vec<String>,
    /// Training seeds; every model is trained once per seed.
    pub seeds: Vec<u64>,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
}

impl Default for Table1Config {
    fn default() -> Self {
        // Pinned by a tuning sweep: at this width the plain spectral model
        // stagnates around 0.26–0.30 while the 3×3-augmented variant
        // reaches ~0.14, and the full-band variant needs a decaying rate
        // to close the gap — a constant rate keeps every epoch budget an
        // honest prefix of one trajectory.
        Table1Config {
            family: "darcy".into(),
            grid: 64,
            n_train: 200,
            n_test: 50,
            data_seed: 1,
            models: vec!["fno".into(), "fno3x3".into(), "fno-full".into()],
            seeds: vec![0, 1, 2, 3, 4],
            width: Some(8),
            depth: Some(2),
            epochs: 40,
            batch_size: 16,
            learning_rate: 3e-3,
            schedule: LrSchedule::Constant,
        }
    }
}

/// One trained seed of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Held-out relative ℓ2 of the best epoch.
    pub test_rel_l2: f64,
    pub best_epoch: usize,
    /// Mean low-band (radius ≤ 6) spectral error energy on the test split.
    pub low_band_energy: f64,
    /// Mean total spectral error energy on the test split.
    pub total_energy: f64,
}

/// All seeds of one model plus the summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTable {
    pub model: String,
    pub runs: Vec<SeedRun>,
    pub mean_rel_l2: f64,
    /// Sample standard deviation over seeds (n−1 denominator).
    pub std_rel_l2: f64,
    pub mean_low_band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub family: String,
    pub grid: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub models: Vec<ModelTable>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the comparison table. With an output directory, writes per-run
/// history CSVs, the summary JSON, and a flat per-run CSV.
pub fn run_table1(config: &Table1Config, out_dir: Option<&Path>) -> Result<Table1Report> {
    let family = PdeFamily::from_str(&config.family)?;
    let pair = build_dataset(&DatasetRequest {
        family,
        n_train: config.n_train,
        n_test: config.n_test,
        grid: config.grid,
        seed: config.data_seed,
        params: FamilyParams::default(),
    })?;
    let stats = pair.train.meta.norm;

    let mut models = Vec::with_capacity(config.models.len());
    for tag in &config.models {
        let model_cfg = tagged_config(tag, config.grid, config.width, config.depth, None)?;
        let mut runs = Vec::with_capacity(config.seeds.len());
        for &seed in &config.seeds {
            let tc = TrainConfig {
                epochs: config.epochs,
                batch_size: config.batch_size,
                learning_rate: config.learning_rate,
                seed,
                schedule: config.schedule,
                ..TrainConfig::default()
            };
            let init = ModelState::<f32>::init(&model_cfg, seed)?;
            let outcome = train(&init, &pair, &tc)?;
            let (low_band_energy, total_energy) =
                spectral_errors(&outcome.best_state, &pair.test, &stats)?;
            if let Some(dir) = out_dir {
                write_history_csv(
                    &dir.join(format!("history_{tag}_s{seed}.csv")),
                    &outcome.history,
                )?;
            }
            runs.push(SeedRun {
                seed,
                test_rel_l2: outcome.history[outcome.best_epoch].test_rel_l2,
                best_epoch: outcome.best_epoch,
                low_band_energy,
                total_energy,
            });
        }
        let rels: Vec<f64> = runs.iter().map(|r| r.test_rel_l2).collect();
        let (mean_rel_l2, std_rel_l2) = mean_std(&rels);
        let lows: Vec<f64> = runs.iter().map(|r| r.low_band_energy).collect();
        models.push(ModelTable {
            model: tag.clone(),
            runs,
            mean_rel_l2,
            std_rel_l2,
            mean_low_band: mean_std(&lows).0,
        });
    }

    let report = Table1Report {
        family: config.family.clone(),
        grid: config.grid,
        n_train: config.n_train,
        n_test: config.n_test,
        models,
    };
    if let Some(dir) = out_dir {
        json_to_file(&report, &dir.join("table1.json"))?;
        let header: Vec<String> = ["model", "seed", "test_rel_l2", "low_band_energy"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for m in &report.models {
            for r in &m.runs {
                rows.push(vec![
                    m.model.clone(),
                    r.seed.to_string(),
                    format_float(r.test_rel_l2),
                    format_float(r.low_band_energy),
                ]);
            }
        }
        write_csv(&dir.join("table1.csv"), &header, &rows)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// wave-erf
// ---------------------------------------------------------------------------

/// Configuration of the wave sensitivity study: train models on the wave
/// dataset, compare their receptive fields against the analytical kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveErfConfig {
    pub grid: usize,
    pub t: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub models: Vec<String>,
    pub train_seed: u64,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Grid location of the probed output; grid center when absent.
    pub x0: Option<(usize, usize)>,
    /// Index of the test sample used as the linearization point.
    pub probe_index: usize,
}

impl Default for WaveErfConfig {
    fn default() -> Self {
        WaveErfConfig {
            grid: 64,
            t: 5.0,
            n_train: 48,
            n_test: 8,
            data_seed: 11,
            models: vec!["fno".into(), "fno3x3".into()],
            train_seed: 0,
            width: Some(12),
            depth: None,
            epochs: 24,
            batch_size: 16,
            learning_rate: 3e-3,
            x0: None,
            probe_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveErfEntry {
    pub model: String,
    pub test_rel_l2: f64,
    /// Cosine similarity of the model map against the analytical kernel.
    pub cosine_vs_analytical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveErfReport {
    pub t: f64,
    pub x0: (usize, usize),
    pub entries: Vec<WaveErfEntry>,
}

/// Runs the wave sensitivity study. With an output directory, writes the
/// analytical and per-model maps (CSV + PGM) and the comparison JSON.
pub fn run_wave_erf(config: &WaveErfConfig, out_dir: Option<&Path>) -> Result<WaveErfReport> {
    let pair = build_dataset(&DatasetRequest {
        family: PdeFamily::WaveAt { t: config.t },
        n_train: config.n_train,
        n_test: config.n_test,
        grid: config.grid,
        seed: config.data_seed,
        params: FamilyParams::default(),
    })?;
    let stats = pair.train.meta.norm;
    let n = config.grid;
    let x0 = config.x0.unwrap_or((n / 2, n / 2));
    if config.probe_index >= config.n_test {
        return Err(Error::arg(
            "wave-erf",
            format!(
                "probe index {} outside the {}-sample test split",
                config.probe_index, config.n_test
            ),
        ));
    }

    // Vertex-grid coordinates of the probed location.
    let coord = BoundaryKind::DirichletZero;
    let analytical = erf_analytical_wave(
        (coord.coord(x0.0, n), coord.coord(x0.1, n)),
        config.t,
        WAVE_SPEED,
        WAVE_TRUNCATION,
        n,
        true,
    )?;
    if let Some(dir) = out_dir {
        export_map_pair(&analytical, dir, "erf_analytical")?;
    }

    let probe_raw = pair.test.input_field(config.probe_index)?;
    let probe = normalized_field(&probe_raw, &stats)?;

    let mut entries = Vec::with_capacity(config.models.len());
    for tag in &config.models {
        let model_cfg = tagged_config(tag, n, config.width, config.depth, None)?;
        let tc = TrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            seed: config.train_seed,
            ..TrainConfig::default()
        };
        let init = ModelState::<f32>::init(&model_cfg, config.train_seed)?;
        let outcome = train(&init, &pair, &tc)?;
        let map = erf_autodiff(&outcome.best_state, &probe, x0)?;
        let comparison = erf_compare(&map, &analytical, BoundaryKind::DirichletZero)?;
        if let Some(dir) = out_dir {
            export_map_pair(&map, dir, &format!("erf_{tag}"))?;
            write_checkpoint(
                &dir.join(format!("model_{tag}.nock")),
                &outcome.best_state.to_checkpoint(checkpoint_meta(
                    &model_cfg,
                    &tc,
                    &outcome,
                    &pair.train.payload_digest(),
                )?),
            )?;
        }
        entries.push(WaveErfEntry {
            model: tag.clone(),
            test_rel_l2: outcome.history[outcome.best_epoch].test_rel_l2,
            cosine_vs_analytical: comparison.cosine,
        });
    }

    let report = WaveErfReport {
        t: config.t,
        x0,
        entries,
    };
    if let Some(dir) = out_dir {
        json_to_file(&report, &dir.join("wave_erf.json"))?;
    }
    Ok(report)
}

/// Standardizes a field with the training input statistics.
pub fn normalized_field(field: &Field2D, stats: &NormStats) -> Result<Field2D> {
    Field2D::from_slice(
        field.h(),
        field.w(),
        &field
            .data()
            .iter()
            .map(|v| (v - stats.input_mean) / stats.input_std)
            .collect::<Vec<f64>>(),
    )
}

fn export_map_pair(map: &ErfMap, dir: &Path, stem: &str) -> Result<()> {
    erf_export(map, &dir.join(format!("{stem}.csv")), ErfExportFormat::Csv)?;
    erf_export(map, &dir.join(format!("{stem}.pgm")), ErfExportFormat::Pgm)
}

// ---------------------------------------------------------------------------
// ns-erf
// ---------------------------------------------------------------------------

/// Configuration of the Navier-Stokes sensitivity study: train models on
/// vorticity snapshots and render their receptive fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NsErfConfig {
    pub grid: usize,
    pub t: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub models: Vec<String>,
    pub train_seed: u64,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub x0: Option<(usize, usize)>,
    pub probe_index: usize,
}

impl Default for NsErfConfig {
    fn default() -> Self {
        NsErfConfig {
            grid: 32,
            t: 5.0,
            n_train: 24,
            n_test: 8,
            data_seed: 21,
            models: vec!["fno".into(), "cno".into()],
            train_seed: 0,
            width: Some(12),
            depth: None,
            epochs: 24,
            batch_size: 8,
            learning_rate: 3e-3,
            x0: None,
            probe_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsErfEntry {
    pub model: String,
    pub test_rel_l2: f64,
    /// Fraction of absolute map mass within 0.05k of the seed, k = 1..15,
    /// under the periodic distance.
    pub mass_in_disc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsErfReport {
    pub t: f64,
    pub x0: (usize, usize),
    pub entries: Vec<NsErfEntry>,
    /// Pairwise cosine similarity between consecutive model maps (one
    /// entry per adjacent pair in `entries`).
    pub pair_cosines: Vec<f64>,
}

/// Runs the Navier-Stokes sensitivity study.
pub fn run_ns_erf(config: &NsErfConfig, out_dir: Option<&Path>) -> Result<NsErfReport> {
    let pair = build_dataset(&DatasetRequest {
        family: PdeFamily::NavierStokesAt { t: config.t },
        n_train: config.n_train,
        n_test: config.n_test,
        grid: config.grid,
        seed: config.data_seed,
        params: FamilyParams::default(),
    })?;
    let stats = pair.train.meta.norm;
    let n = config.grid;
    let x0 = config.x0.unwrap_or((n / 2, n / 2));
    if config.probe_index >= config.n_test {
        return Err(Error::arg(
            "ns-erf",
            format!(
                "probe index {} outside the {}-sample test split",
                config.probe_index, config.n_test
            ),
        ));
    }
    let probe = normalized_field(&pair.test.input_field(config.probe_index)?, &stats)?;

    let mut entries = Vec::with_capacity(config.models.len());
    let mut maps: Vec<ErfMap> = Vec::with_capacity(config.models.len());
    for tag in &config.models {
        let model_cfg = tagged_config(tag, n, config.width, config.depth, None)?;
        let tc = TrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            seed: config.train_seed,
            ..TrainConfig::default()
        };
        let init = ModelState::<f32>::init(&model_cfg, config.train_seed)?;
        let outcome = train(&init, &pair, &tc)?;
        let map = erf_autodiff(&outcome.best_state, &probe, x0)?;
        if let Some(dir) = out_dir {
            export_map_pair(&map, dir, &format!("erf_{tag}"))?;
        }
        let radii = crate::erf::default_radii();
        let mass = radii
            .iter()
            .map(|&r| crate::erf::mass_in_disc(&map, r, BoundaryKind::Periodic))
            .collect::<Result<Vec<f64>>>()?;
        entries.push(NsErfEntry {
            model: tag.clone(),
            test_rel_l2: outcome.history[outcome.best_epoch].test_rel_l2,
            mass_in_disc: mass,
        });
        maps.push(map);
    }
    let pair_cosines = maps
        .windows(2)
        .map(|w| Ok(erf_compare(&w[0], &w[1], BoundaryKind::Periodic)?.cosine))
        .collect::<Result<Vec<f64>>>()?;

    let report = NsErfReport {
        t: config.t,
        x0,
        entries,
        pair_cosines,
    };
    if let Some(dir) = out_dir {
        json_to_file(&report, &dir.join("ns_erf.json"))?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// spectra
// ---------------------------------------------------------------------------

/// Configuration of the spectral-error study: train models once and bin
/// their test errors by frequency radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectraConfig {
    pub family: String,
    pub grid: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub data_seed: u64,
    pub models: Vec<String>,
    pub train_seed: u64,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        SpectraConfig {
            family: "darcy".into(),
            grid: 64,
            n_train: 96,
            n_test: 24,
            data_seed: 1,
            models: vec!["fno".into(), "fno3x3".into()],
            train_seed: 0,
            width: Some(12),
            depth: None,
            epochs: 24,
            batch_size: 16,
            learning_rate: 3e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub model: String,
    pub test_rel_l2: f64,
    pub low_band_energy: f64,
    pub total_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraReport {
    pub family: String,
    pub grid: usize,
    pub models: Vec<SpectrumSummary>,
}

/// Runs the spectral study. With an output directory, writes one mean
/// spectrum CSV per model plus the summary JSON.
pub fn run_spectra(config: &SpectraConfig, out_dir: Option<&Path>) -> Result<SpectraReport> {
    let family = PdeFamily::from_str(&config.family)?;
    let pair = build_dataset(&DatasetRequest {
        family,
        n_train: config.n_train,
        n_test: config.n_test,
        grid: config.grid,
        seed: config.data_seed,
        params: FamilyParams::default(),
    })?;
    let stats = pair.train.meta.norm;

    let mut models = Vec::with_capacity(config.models.len());
    for tag in &config.models {
        let model_cfg = tagged_config(tag, config.grid, config.width, config.depth, None)?;
        let tc = TrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            seed: config.train_seed,
            ..TrainConfig::default()
        };
        let init = ModelState::<f32>::init(&model_cfg, config.train_seed)?;
        let outcome = train(&init, &pair, &tc)?;
        let bins = mean_spectrum(&outcome.best_state, &pair.test, &stats)?;
        if let Some(dir) = out_dir {
            spectrum_csv(&dir.join(format!("spectrum_{tag}.csv")), &bins)?;
        }
        models.push(SpectrumSummary {
            model: tag.clone(),
            test_rel_l2: outcome.history[outcome.best_epoch].test_rel_l2,
            low_band_energy: bins.low_band(),
            total_energy: bins.total_energy(),
        });
    }
    let report = SpectraReport {
        family: config.family.clone(),
        grid: config.grid,
        models,
    };
    if let Some(dir) = out_dir {
        json_to_file(&report, &dir.join("spectra.json"))?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// equivariance
// ---------------------------------------------------------------------------

/// Configuration of the C₄ audit: freshly initialized models (coordinate
/// features disabled) audited on seeded random fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquivarianceConfig {
    pub grid: usize,
    pub models: Vec<String>,
    pub samples: usize,
    pub sample_seed: u64,
    pub init_seed: u64,
    pub width: Option<usize>,
    pub depth: Option<usize>,
}

impl Default for EquivarianceConfig {
    fn default() -> Self {
        EquivarianceConfig {
            grid: 16,
            models: vec![
                "fno".into(),
                "fno3x3".into(),
                "t1".into(),
                "cno".into(),
                "gt".into(),
            ],
            samples: 4,
            sample_seed: 5,
            init_seed: 0,
            width: None,
            depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub model: String,
    pub mean_rel_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub grid: usize,
    pub samples: usize,
    pub audits: Vec<ModelAudit>,
}

/// Runs the audit over smooth periodic random fields.
pub fn run_equivariance(
    config: &EquivarianceConfig,
    out_dir: Option<&Path>,
) -> Result<EquivarianceReport> {
    if config.samples == 0 {
        return Err(Error::arg("equivariance", "need at least one sample"));
    }
    let spec = GrfSpec::new(2.0, 3.0, 1.0, BoundaryKind::Periodic)?;
    let samples = (0..config.samples)
        .map(|i| sample_grf(&spec, config.sample_seed.wrapping_add(i as u64), config.grid))
        .collect::<Result<Vec<Field2D>>>()?;

    let mut audits = Vec::with_capacity(config.models.len());
    for tag in &config.models {
        let cfg = tagged_config(tag, config.grid, config.width, config.depth, Some(false))?;
        let state = ModelState::<f32>::init(&cfg, config.init_seed)?;
        audits.push(ModelAudit {
            model: tag.clone(),
            mean_rel_l2: c4_equivariance_error(&state, &samples)?,
        });
    }
    let report = EquivarianceReport {
        grid: config.grid,
        samples: config.samples,
        audits,
    };
    if let Some(dir) = out_dir {
        json_to_file(&report, &dir.join("equivariance.json"))?;
    }
    Ok(report)
}

/// The experiment tags understood by [`run_experiment`].
pub const EXPERIMENTS: [&str; 5] = ["table1", "wave-erf", "ns-erf", "spectra", "equivariance"];

/// Runs one named experiment from a JSON configuration value (missing
/// fields fall back to the experiment's defaults), writing artifacts into
/// `out_dir`. Returns the report serialized back to JSON.
pub fn run_experiment(
    name: &str,
    config: &serde_json::Value,
    out_dir: &Path,
) -> Result<serde_json::Value> {
    match name {
        "table1" => {
            let cfg: Table1Config = serde_json::from_value(config.clone())?;
            Ok(serde_json::to_value(run_table1(&cfg, Some(out_dir))?)?)
        }
        "wave-erf" => {
            let cfg: WaveErfConfig = serde_json::from_value(config.clone())?;
            Ok(serde_json::to_value(run_wave_erf(&cfg, Some(out_dir))?)?)
        }
        "ns-erf" => {
            let cfg: NsErfConfig = serde_json::from_value(config.clone())?;
            Ok(serde_json::to_value(run_ns_erf(&cfg, Some(out_dir))?)?)
        }
        "spectra" => {
            let cfg: SpectraConfig = serde_json::from_value(config.clone())?;
            Ok(serde_json::to_value(run_spectra(&cfg, Some(out_dir))?)?)
        }
        "equivariance" => {
            let cfg: EquivarianceConfig = serde_json::from_value(config.clone())?;
            Ok(serde_json::to_value(run_equivariance(&cfg, Some(out_dir))?)?)
        }
        other => Err(Error::arg(
            "report",
            format!(
                "unknown experiment '{other}' (expected one of {})",
                EXPERIMENTS.join(", ")
            ),
        )),
    }
}

/// Output-directory helper shared by the recipes and the CLI: ensures the
/// directory exists and returns it.
pub fn ensure_out_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path)?;
    Ok(path.to_path_buf())
}
