//! Launch-power sweeps with Monte Carlo trials, result emission, and runtime scaling.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{cdc, dbp_ssfm};
use crate::channel::{propagate_link, LinkConfig, SplitScheme, StepConfig};
use crate::diagnostics::{l1_norm, soliton_power_ratio, EigenConfig};
use crate::error::{Error, Result};
use crate::nfddbp::{backrotate, dbp_nfd, inverse_scatter, DbpNfdConfig, InverseMode};
use crate::normcoord::{
    derive_normalization, from_normalized, normalized_distance, to_normalized, Kappa,
    NormalizedSignal, PhysicalSignal,
};
use crate::txrx::{
    evm, gate_to_slot, map_bits, q_factor_from_evm, random_bits, slot_of_window, BurstLayout,
    ModFormat, NyquistConfig, OfdmConfig, Transceiver,
};
use crate::zscatter::scatter_fast;
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Equalizer {
    Nfd,
    DbpSsfm { steps_per_span: usize },
    Cdc,
}

impl Equalizer {
    pub fn label(&self) -> String {
        match self {
            Equalizer::Nfd => "nfd".into(),
            Equalizer::DbpSsfm { steps_per_span } => format!("dbp_ssfm_{steps_per_span}"),
            Equalizer::Cdc => "cdc".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NfdSettings {
    #[serde(default)]
    pub window_pad: usize,
    #[serde(default)]
    pub inverse_mode: InverseMode,
}

impl Default for NfdSettings {
    fn default() -> Self {
        Self {
            window_pad: 0,
            inverse_mode: InverseMode::Fast,
        }
    }
}

fn default_guard_factor() -> f64 {
    1.1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub link: LinkConfig,
    pub transceiver: Transceiver,
    pub format: ModFormat,
    pub equalizers: Vec<Equalizer>,
    #[serde(rename = "power_sweep_dBm")]
    pub power_sweep_dbm: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub desk_scale: bool,
    /// Split-step resolution of the simulated fiber.
    pub forward_steps_per_span: usize,
    /// Guard interval as a multiple of the dispersion memory.
    #[serde(default = "default_guard_factor")]
    pub guard_factor: f64,
    /// Processing window in samples; twice the slot rounded up to a power of two when unset.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub nfd: NfdSettings,
    /// ASE after every span.
    #[serde(default = "default_true")]
    pub noise: bool,
    /// L1 norm and soliton ratio of the launched bursts.
    #[serde(default = "default_true")]
    pub diagnostics: bool,
    #[serde(default)]
    pub eigen: EigenConfig,
    /// Wall-clock timings make outputs non-reproducible; off gives byte-identical reruns.
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default)]
    pub strict_guard: bool,
}

impl ExperimentConfig {
    /// Normal dispersion, 4 x 80 km, QPSK over 56 GBd sinc pulses.
    pub fn desk_normal_nyquist() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: "desk-normal-nyquist".into(),
            link: LinkConfig::standard(4, Kappa::Defocusing),
            transceiver: Transceiver::Nyquist(NyquistConfig {
                baud_rate: 56e9,
                symbols_per_packet: 32,
                oversampling: 8,
            }),
            format: ModFormat::Qpsk,
            equalizers: vec![
                Equalizer::Nfd,
                Equalizer::DbpSsfm { steps_per_span: 40 },
                Equalizer::Cdc,
            ],
            power_sweep_dbm: vec![-12.0, -8.0, -4.0, 0.0, 4.0, 8.0],
            trials: 20,
            seed: 1,
            desk_scale: true,
            forward_steps_per_span: 80,
            guard_factor: 2.0,
            window: Some(4096),
            nfd: NfdSettings::default(),
            noise: true,
            diagnostics: false,
            eigen: EigenConfig::default(),
            record_runtime: false,
            strict_guard: true,
        }
    }

    /// Anomalous dispersion, 4 x 80 km, 64QAM OFDM; sweeps into the solitonic regime.
    pub fn desk_anomalous_ofdm() -> Self {
        Self {
            name: "desk-anomalous-ofdm".into(),
            link: LinkConfig::standard(4, Kappa::Focusing),
            transceiver: Transceiver::Ofdm(OfdmConfig {
                symbols_per_packet: 1,
                oversampling: 4,
                ..OfdmConfig::default()
            }),
            format: ModFormat::Qam64,
            power_sweep_dbm: vec![-24.0, -20.0, -16.0, -12.0, -8.0, -6.0, -4.0, -2.0, 0.0],
            window: Some(2048),
            nfd: NfdSettings {
                window_pad: 1024,
                ..NfdSettings::default()
            },
            diagnostics: true,
            ..Self::desk_normal_nyquist()
        }
    }

    /// Full-scale link: 50 x 80 km, 256-symbol packets, 65536-sample window.
    pub fn full_scale() -> Self {
        Self {
            name: "full-scale".into(),
            link: LinkConfig::standard(50, Kappa::Defocusing),
            transceiver: Transceiver::Nyquist(NyquistConfig::default()),
            equalizers: vec![
                Equalizer::Nfd,
                Equalizer::DbpSsfm { steps_per_span: 20 },
                Equalizer::Cdc,
            ],
            power_sweep_dbm: (-6..=6).step_by(2).map(f64::from).collect(),
            trials: 20,
            desk_scale: false,
            window: Some(65536),
            diagnostics: false,
            ..Self::desk_normal_nyquist()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk-normal-nyquist" => Some(Self::desk_normal_nyquist()),
            "desk-anomalous-ofdm" => Some(Self::desk_anomalous_ofdm()),
            "full-scale" => Some(Self::full_scale()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Caps window at 4096 samples, spans at 10 and packets at 64 symbols.
    pub fn apply_desk_scale(&mut self) {
        self.desk_scale = true;
        self.link.num_spans = self.link.num_spans.min(10);
        if let Some(w) = self.window.as_mut() {
            *w = (*w).min(4096);
        }
        match &mut self.transceiver {
            Transceiver::Nyquist(c) => c.symbols_per_packet = c.symbols_per_packet.min(64),
            Transceiver::Ofdm(c) => {
                let per = c.active_subcarriers.max(1);
                c.symbols_per_packet = c.symbols_per_packet.min((64 / per).max(1));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.power_sweep_dbm.is_empty() {
            return Err(Error::InvalidConfig("power sweep is empty".into()));
        }
        if self.equalizers.is_empty() {
            return Err(Error::InvalidConfig("no equalizers selected".into()));
        }
        if self.forward_steps_per_span == 0 {
            return Err(Error::InvalidConfig(
                "forward_steps_per_span must be at least 1".into(),
            ));
        }
        if !(self.guard_factor >= 0.0) {
            return Err(Error::InvalidConfig(
                "guard_factor must be non-negative".into(),
            ));
        }
        for eq in &self.equalizers {
            if let Equalizer::DbpSsfm { steps_per_span: 0 } = eq {
                return Err(Error::InvalidConfig(
                    "dbp_ssfm needs at least one step".into(),
                ));
            }
        }
        self.transceiver.validate()?;
        if self.link.num_spans > 0 {
            self.link.validate()?;
        }
        if self.equalizers.contains(&Equalizer::Nfd) {
            let total = self.layout()?.window + 2 * self.nfd.window_pad;
            if !total.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "window plus NFD padding on both sides is {total}, not a power of two"
                )));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn layout(&self) -> Result<BurstLayout> {
        let memory = self.link.dispersion_memory(self.transceiver.bandwidth());
        BurstLayout::new(
            self.transceiver.packet_samples(),
            self.guard_factor * memory,
            memory,
            self.transceiver.sample_interval(),
            self.transceiver.slot_granule(),
            self.window,
            self.strict_guard,
        )
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one (power, trial) cell, independent of scheduling.
pub fn cell_seed(master: u64, power_index: usize, trial: usize) -> u64 {
    splitmix64(master ^ splitmix64(((power_index as u64) << 32) | trial as u64))
}

/// One launched burst in its processing window, plus the symbols it carries.
#[derive(Debug, Clone)]
pub struct Burst {
    pub symbols: Vec<C64>,
    pub window: PhysicalSignal,
}

/// Random data modulated into a slot, scaled to `power_dbm` over the packet, and centered
/// in the processing window.
pub fn launch_burst(
    cfg: &ExperimentConfig,
    layout: &BurstLayout,
    power_dbm: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Burst> {
    let n = cfg.transceiver.symbols_per_packet();
    let bits = random_bits(rng, n * cfg.format.bits_per_symbol());
    let symbols = map_bits(&bits, cfg.format)?;
    let slot = cfg.transceiver.modulate(&symbols, layout.slot_samples())?;
    let packet_duration = layout.packet_samples as f64 * layout.sample_interval;
    let energy: f64 = slot.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * slot.sample_interval;
    let target = 1e-3 * 10f64.powf(power_dbm / 10.0);
    let scale = (target * packet_duration / energy).sqrt();
    let mut window = vec![C64::new(0.0, 0.0); layout.window];
    let off = layout.slot_offset();
    for (w, v) in window[off..].iter_mut().zip(&slot.samples) {
        *w = v * scale;
    }
    Ok(Burst {
        symbols,
        window: PhysicalSignal::new(window, layout.sample_interval)?,
    })
}

/// Full NFD back-propagation of a physical window over the whole link.
pub fn nfd_equalize(
    received: &PhysicalSignal,
    link: &LinkConfig,
    settings: &NfdSettings,
) -> Result<PhysicalSignal> {
    if link.num_spans == 0 {
        return Ok(received.clone());
    }
    let p = derive_normalization(link, received.duration())?.anchored_to(received);
    let x1 = normalized_distance(link, &p);
    let norm = to_normalized(received, &p)?.at(x1);
    let out = dbp_nfd(
        &norm,
        &DbpNfdConfig {
            x1,
            window_pad: settings.window_pad,
            inverse_mode: settings.inverse_mode,
        },
    )?;
    Ok(from_normalized(&out.signal, &p))
}

pub fn equalize(
    eq: &Equalizer,
    received: &PhysicalSignal,
    cfg: &ExperimentConfig,
) -> Result<PhysicalSignal> {
    match eq {
        Equalizer::Nfd => nfd_equalize(received, &cfg.link, &cfg.nfd),
        Equalizer::DbpSsfm { steps_per_span } => dbp_ssfm(received, &cfg.link, *steps_per_span),
        Equalizer::Cdc => cdc(received, &cfg.link),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    /// One entry per equalizer, in config order.
    pub evm: Vec<Option<f64>>,
    pub runtime_ms: Vec<f64>,
    pub errors: Vec<Option<String>>,
    pub l1_norm: Option<f64>,
    pub soliton_ratio: Option<f64>,
}

/// Launch, propagate, then run every equalizer on the same received window.
pub fn run_trial(
    cfg: &ExperimentConfig,
    layout: &BurstLayout,
    power_dbm: f64,
    seed: u64,
) -> Result<TrialMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let burst = launch_burst(cfg, layout, power_dbm, &mut rng)?;
    let mut link = cfg.link.clone();
    if !cfg.noise {
        link.photon_occupancy = 0.0;
    }
    let steps = StepConfig {
        steps_per_span: cfg.forward_steps_per_span,
        scheme: SplitScheme::Symmetric,
    };
    let mut received = propagate_link(&burst.window, &link, &steps, splitmix64(seed))?;
    gate_to_slot(&mut received, layout);

    let (mut l1, mut ratio) = (None, None);
    if cfg.diagnostics && cfg.link.num_spans > 0 {
        let p = derive_normalization(&cfg.link, burst.window.duration())?;
        let launched = to_normalized(&burst.window, &p)?;
        l1 = Some(l1_norm(&launched));
        ratio = Some(soliton_power_ratio(&launched, &cfg.eigen)?.ratio);
    }

    let n = cfg.transceiver.symbols_per_packet();
    let mut out = TrialMetrics {
        evm: Vec::new(),
        runtime_ms: Vec::new(),
        errors: Vec::new(),
        l1_norm: l1,
        soliton_ratio: ratio,
    };
    for eq in &cfg.equalizers {
        let start = Instant::now();
        let result = equalize(eq, &received, cfg).and_then(|w| {
            let slot = slot_of_window(&w, layout)?;
            let rx = cfg.transceiver.demodulate(&slot, n)?;
            evm(&rx, &burst.symbols)
        });
        out.runtime_ms.push(start.elapsed().as_secs_f64() * 1e3);
        match result {
            Ok(e) => {
                out.evm.push(Some(e));
                out.errors.push(None);
            }
            Err(e) => {
                out.evm.push(None);
                out.errors.push(Some(e.to_string()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    #[serde(rename = "power_dBm")]
    pub power_dbm: f64,
    pub equalizer: String,
    /// RMS EVM over successful trials.
    pub evm: Option<f64>,
    pub ber: Option<f64>,
    /// From the RMS EVM; empty when undefined.
    pub q_db: Option<f64>,
    /// 95% half-width of the per-trial Q values.
    pub q_half_width: Option<f64>,
    pub l1_norm: Option<f64>,
    pub soliton_ratio: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub trials: usize,
}

/// A (power, trial) cell or a single equalizer that failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    #[serde(rename = "power_dBm")]
    pub power_dbm: f64,
    pub trial: usize,
    pub equalizer: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<CellFailure>,
    /// Whether the guard interval covers the dispersion memory.
    pub guard_ok: bool,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn half_width(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v)?;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    finite(1.96 * (var / v.len() as f64).sqrt())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let layout = cfg.layout()?;
    let cells: Vec<(usize, usize)> = (0..cfg.power_sweep_dbm.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<Result<TrialMetrics>> = cells
        .par_iter()
        .map(|&(p, t)| {
            run_trial(
                cfg,
                &layout,
                cfg.power_sweep_dbm[p],
                cell_seed(cfg.seed, p, t),
            )
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (pi, &power) in cfg.power_sweep_dbm.iter().enumerate() {
        let cell = |t: usize| &outcomes[pi * cfg.trials + t];
        let mut l1 = Vec::new();
        let mut ratio = Vec::new();
        for t in 0..cfg.trials {
            match cell(t) {
                Ok(m) => {
                    l1.extend(m.l1_norm);
                    ratio.extend(m.soliton_ratio);
                }
                Err(e) => failures.push(CellFailure {
                    power_dbm: power,
                    trial: t,
                    equalizer: None,
                    message: e.to_string(),
                }),
            }
        }
        for (ei, eq) in cfg.equalizers.iter().enumerate() {
            let mut evms = Vec::new();
            let mut qs = Vec::new();
            let mut times = Vec::new();
            for t in 0..cfg.trials {
                let Ok(m) = cell(t) else { continue };
                if let Some(msg) = &m.errors[ei] {
                    failures.push(CellFailure {
                        power_dbm: power,
                        trial: t,
                        equalizer: Some(eq.label()),
                        message: msg.clone(),
                    });
                    continue;
                }
                let e = m.evm[ei].expect("evm present without error");
                evms.push(e);
                if let Some(q) = q_factor_from_evm(e, cfg.format).ok().and_then(finite) {
                    qs.push(q);
                }
                times.push(m.runtime_ms[ei]);
            }
            let rms = mean(&evms.iter().map(|e| e * e).collect::<Vec<_>>()).map(f64::sqrt);
            let rms = rms.and_then(finite);
            rows.push(MetricsRow {
                power_dbm: power,
                equalizer: eq.label(),
                evm: rms,
                ber: rms.and_then(|e| crate::txrx::ber_from_evm(e, cfg.format).ok()),
                q_db: rms
                    .and_then(|e| q_factor_from_evm(e, cfg.format).ok())
                    .and_then(finite),
                q_half_width: half_width(&qs),
                l1_norm: mean(&l1),
                soliton_ratio: mean(&ratio),
                runtime_ms: if cfg.record_runtime {
                    mean(&times)
                } else {
                    None
                },
                trials: evms.len(),
            });
        }
    }
    Ok(MetricsReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        rows,
        failures,
        guard_ok: layout.guard_ok,
    })
}

/// Flat CSV record; column order is the output schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    #[serde(rename = "power_dBm")]
    pub power_dbm: f64,
    pub equalizer: String,
    pub evm: Option<f64>,
    pub ber: Option<f64>,
    pub q_db: Option<f64>,
    pub l1_norm: Option<f64>,
    pub soliton_ratio: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub trials: usize,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "power_dBm",
    "equalizer",
    "evm",
    "ber",
    "q_db",
    "l1_norm",
    "soliton_ratio",
    "runtime_ms",
    "trials",
];

impl MetricsReport {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.rows
            .iter()
            .map(|r| CsvRow {
                power_dbm: r.power_dbm,
                equalizer: r.equalizer.clone(),
                evm: r.evm,
                ber: r.ber,
                q_db: r.q_db,
                l1_norm: r.l1_norm,
                soliton_ratio: r.soliton_ratio,
                runtime_ms: r.runtime_ms,
                trials: r.trials,
            })
            .collect()
    }

    pub fn row(&self, power_dbm: f64, equalizer: &str) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.power_dbm == power_dbm && r.equalizer == equalizer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

pub fn write_csv<W: std::io::Write>(report: &MetricsReport, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in report.csv_rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report<W: std::io::Write>(
    report: &MetricsReport,
    out: W,
    format: OutputFormat,
) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(report, out),
        OutputFormat::Json => {
            let mut out = std::io::BufWriter::new(out);
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

pub fn emit_results(report: &MetricsReport, path: &Path, format: OutputFormat) -> Result<()> {
    write_report(report, std::fs::File::create(path)?, format)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn read_json(path: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub d: usize,
    pub scatter_ms: f64,
    pub backrotate_ms: f64,
    pub inverse_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRow {
    pub spans: usize,
    pub nfd_ms: f64,
    pub ssfm_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sizes: Vec<ScalingRow>,
    pub spans: Vec<SpanRow>,
}

fn ratios(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] / w[0]).collect()
}

impl BenchReport {
    pub fn scatter_doubling(&self) -> Vec<f64> {
        ratios(&self.sizes.iter().map(|r| r.scatter_ms).collect::<Vec<_>>())
    }

    pub fn backrotate_doubling(&self) -> Vec<f64> {
        ratios(
            &self
                .sizes
                .iter()
                .map(|r| r.backrotate_ms)
                .collect::<Vec<_>>(),
        )
    }

    pub fn inverse_doubling(&self) -> Vec<f64> {
        ratios(&self.sizes.iter().map(|r| r.inverse_ms).collect::<Vec<_>>())
    }

    /// Largest relative deviation of NFD runtime from its mean over span counts.
    pub fn nfd_span_spread(&self) -> f64 {
        let t: Vec<f64> = self.spans.iter().map(|r| r.nfd_ms).collect();
        let m = mean(&t).unwrap_or(0.0);
        t.iter().map(|x| (x / m - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Least-squares line through split-step runtime against span count, as
    /// `(intercept_ms, ms_per_span, largest residual over the largest runtime)`.
    pub fn ssfm_span_fit(&self) -> (f64, f64, f64) {
        let x: Vec<f64> = self.spans.iter().map(|r| r.spans as f64).collect();
        let y: Vec<f64> = self.spans.iter().map(|r| r.ssfm_ms).collect();
        let (mx, my) = (mean(&x).unwrap_or(0.0), mean(&y).unwrap_or(0.0));
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = my - slope * mx;
        let top = y.iter().copied().fold(0.0, f64::max);
        let resid = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (intercept + slope * a - b).abs() / top)
            .fold(0.0, f64::max);
        (intercept, slope, resid)
    }
}

/// Thread CPU time of one call, in ms.
fn time_ms<F: FnOnce()>(f: F) -> f64 {
    let start = thread_cpu_ms();
    f();
    thread_cpu_ms() - start
}

/// CPU time consumed by the calling thread; unlike wall time it ignores preemption.
#[cfg(unix)]
fn thread_cpu_ms() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "thread CPU clock unavailable");
    ts.tv_sec as f64 * 1e3 + ts.tv_nsec as f64 * 1e-6
}

#[cfg(not(unix))]
fn thread_cpu_ms() -> f64 {
    use std::sync::OnceLock;
    static T0: OnceLock<Instant> = OnceLock::new();
    T0.get_or_init(Instant::now).elapsed().as_secs_f64() * 1e3
}

fn bench_signal(d: usize, kappa: Kappa) -> NormalizedSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
    let mut s = NormalizedSignal::new(vec![C64::new(0.0, 0.0); d], kappa).expect("power of two");
    for n in d / 4..3 * d / 4 {
        s.samples[n] = C64::new(
            rand::Rng::random_range(&mut rng, -1.0..1.0),
            rand::Rng::random_range(&mut rng, -1.0..1.0),
        );
    }
    s
}

/// Times the three NFD steps per window size, then NFD and split-step back-propagation
/// against span count at `span_window` samples.
pub fn bench_scaling(
    sizes: &[usize],
    span_counts: &[usize],
    span_window: usize,
    repeats: usize,
) -> Result<BenchReport> {
    // Inputs and stage outputs are prepared once; timing rounds then visit every size in
    // turn so slow phases of the machine hit all sizes alike.
    let mut stages = Vec::new();
    for &d in sizes {
        let s = bench_signal(d, Kappa::Defocusing);
        let q: Vec<C64> = s.samples.iter().map(|v| v * s.eps() * 0.5).collect();
        let pair = scatter_fast(&q, s.kappa)?;
        let rotated = backrotate(&pair, 1e-4);
        inverse_scatter(&rotated, InverseMode::Fast)?;
        stages.push((q, pair, rotated));
    }
    let mut rows: Vec<ScalingRow> = sizes
        .iter()
        .map(|&d| ScalingRow {
            d,
            scatter_ms: f64::INFINITY,
            backrotate_ms: f64::INFINITY,
            inverse_ms: f64::INFINITY,
        })
        .collect();
    for _ in 0..repeats.max(1) {
        for (row, (q, pair, rotated)) in rows.iter_mut().zip(&stages) {
            row.scatter_ms = row.scatter_ms.min(time_ms(|| {
                let _ = scatter_fast(q, pair.kappa);
            }));
            row.backrotate_ms = row.backrotate_ms.min(time_ms(|| {
                let _ = backrotate(pair, 1e-4);
            }));
            row.inverse_ms = row.inverse_ms.min(time_ms(|| {
                let _ = inverse_scatter(rotated, InverseMode::Fast);
            }));
        }
    }

    let mut spans = Vec::new();
    let dt = 2e-12;
    let base = bench_signal(span_window, Kappa::Defocusing);
    let sig = PhysicalSignal::new(base.samples.iter().map(|v| v * 1e-2).collect(), dt)?;
    let links: Vec<LinkConfig> = span_counts
        .iter()
        .map(|&k| LinkConfig::standard(k, Kappa::Defocusing))
        .collect();
    let settings = NfdSettings::default();
    let mut nfd_ms = vec![f64::INFINITY; links.len()];
    let mut ssfm_ms = vec![f64::INFINITY; links.len()];
    // Interleaved so slow drift of the machine hits every span count alike.
    for _ in 0..repeats.max(1) {
        for (i, link) in links.iter().enumerate() {
            nfd_ms[i] = nfd_ms[i].min(time_ms(|| {
                nfd_equalize(&sig, link, &settings).expect("bench signal equalizes");
            }));
            ssfm_ms[i] = ssfm_ms[i].min(time_ms(|| {
                dbp_ssfm(&sig, link, 20).expect("bench signal propagates");
            }));
        }
    }
    for (i, &k) in span_counts.iter().enumerate() {
        spans.push(SpanRow {
            spans: k,
            nfd_ms: nfd_ms[i],
            ssfm_ms: ssfm_ms[i],
        });
    }
    Ok(BenchReport { sizes: rows, spans })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(mut cfg: ExperimentConfig) -> ExperimentConfig {
        cfg.trials = 2;
        cfg.power_sweep_dbm = vec![-10.0, 0.0];
        cfg.window = Some(2048);
        cfg.guard_factor = 1.1;
        cfg.forward_steps_per_span = 10;
        if let Transceiver::Nyquist(c) = &mut cfg.transceiver {
            c.symbols_per_packet = 16;
            c.oversampling = 8;
        }
        cfg
    }

    #[test]
    fn presets_validate_and_round_trip_through_toml() {
        for name in ["desk-normal-nyquist", "desk-anomalous-ofdm", "full-scale"] {
            let cfg = ExperimentConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            cfg.layout().unwrap();
            let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
        assert!(ExperimentConfig::preset("nope").is_none());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut cfg = ExperimentConfig::desk_normal_nyquist();
        cfg.schema_version = 99;
        assert!(ExperimentConfig::from_toml(&cfg.to_toml()).is_err());
    }

    #[test]
    fn desk_scale_clamps() {
        let mut cfg = ExperimentConfig::full_scale();
        cfg.apply_desk_scale();
        assert_eq!(cfg.link.num_spans, 10);
        assert_eq!(cfg.window, Some(4096));
        assert_eq!(cfg.transceiver.symbols_per_packet(), 64);
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..10 {
            for t in 0..100 {
                assert!(seen.insert(cell_seed(7, p, t)));
            }
        }
    }

    #[test]
    fn empty_link_without_noise_is_transparent() {
        let mut cfg = tiny(ExperimentConfig::desk_normal_nyquist());
        cfg.link.num_spans = 0;
        cfg.noise = false;
        cfg.trials = 1;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        for row in &report.rows {
            assert!(row.evm.unwrap() < 1e-10, "{row:?}");
        }
    }

    #[test]
    fn same_seed_gives_identical_csv() {
        let cfg = tiny(ExperimentConfig::desk_normal_nyquist());
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_csv(&a, &mut x).unwrap();
        write_csv(&b, &mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(a, b);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let cfg = tiny(ExperimentConfig::desk_normal_nyquist());
        let report = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("r.csv");
        emit_results(&report, &csv_path, OutputFormat::Csv).unwrap();
        assert_eq!(read_csv(&csv_path).unwrap(), report.csv_rows());
        let header = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(header.lines().next().unwrap(), CSV_COLUMNS.join(","));
        let json_path = dir.path().join("r.json");
        emit_results(&report, &json_path, OutputFormat::Json).unwrap();
        let back = read_json(&json_path).unwrap();
        assert_eq!(back, report);
        let raw: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(raw["seed"], cfg.seed);
        assert_eq!(raw["config_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn empty_report_gives_header_only_csv() {
        let cfg = ExperimentConfig::desk_normal_nyquist();
        let report = MetricsReport {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg,
            rows: Vec::new(),
            failures: Vec::new(),
            guard_ok: true,
        };
        let mut out = Vec::new();
        write_csv(&report, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            CSV_COLUMNS.join(",") + "\n"
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::desk_normal_nyquist();
        cfg.trials = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = ExperimentConfig::desk_normal_nyquist();
        cfg.power_sweep_dbm.clear();
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = ExperimentConfig::desk_normal_nyquist();
        cfg.guard_factor = 0.5;
        assert!(matches!(cfg.layout(), Err(Error::GuardTooShort { .. })));
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let mut cfg = tiny(ExperimentConfig::desk_normal_nyquist());
        cfg.trials = 1;
        cfg.power_sweep_dbm = vec![40.0];
        cfg.equalizers = vec![Equalizer::Nfd, Equalizer::Cdc];
        let report = run_experiment(&cfg).unwrap();
        let nfd = report.row(40.0, "nfd").unwrap();
        let cdc = report.row(40.0, "cdc").unwrap();
        assert_eq!(cdc.trials, 1);
        // 10 W in normal dispersion pushes samples outside the unit disk
        assert_eq!(nfd.trials, 0);
        assert!(nfd.evm.is_none());
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].equalizer.as_deref(), Some("nfd"));
    }

    #[test]
    fn guard_leakage_shrinks_with_guard_length() {
        // Sinc tails keep about 1.4% of the burst energy in the guard, so the leak at
        // 1.1 memory lengths is of order 1e-3 rather than negligible.
        let mut leaks = Vec::new();
        for g in [1.1, 2.0, 3.0] {
            let mut cfg = ExperimentConfig::desk_normal_nyquist();
            cfg.guard_factor = g;
            cfg.window = Some(8192);
            let layout = cfg.layout().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let burst = launch_burst(&cfg, &layout, 0.0, &mut rng).unwrap();
            let mut link = cfg.link.clone();
            link.photon_occupancy = 0.0;
            let rx = propagate_link(&burst.window, &link, &StepConfig::symmetric(40), 1).unwrap();
            leaks.push(crate::txrx::slot_leakage(&rx, &layout));
        }
        assert!(leaks[0] < 5e-3 && leaks[0] > 1e-4, "{leaks:?}");
        assert!(
            leaks[1] < 0.2 * leaks[0] && leaks[2] < 0.5 * leaks[1],
            "{leaks:?}"
        );
    }
}
