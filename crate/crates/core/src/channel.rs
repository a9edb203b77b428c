//! Monte Carlo symbol-error-rate estimation under noise and narrowband
//! interference, plus the experiment sweeps built on it: SER vs RSSI,
//! SER vs INR, and the descending max-INR threshold search.
//!
//! Determinism: trial `t` of a scenario draws from `RngStream(seed,
//! TRIAL | t)` and the interference waveform for its 100-trial batch from
//! `RngStream(seed, WAVEFORM | batch)`, so every reported number is a pure
//! function of the scenario and independent of worker count.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::css::{self, ComplexBaseband, DecisionStatistic, LoRaConfig};
use crate::error::{Error, Result};
use crate::waveforms::{
    self, derive_seed, InterferenceKind, InterferenceSpec, RngStream,
    DEFAULT_GMSK_BT, DEFAULT_INTERFERER_BANDWIDTH_HZ, FILTER_TRANSIENT_SYMBOLS,
};

/// Boltzmann constant, J/K.
pub const BOLTZMANN_J_PER_K: f64 = 1.380_649e-23;
/// Room temperature assumed by the noise floor, K.
pub const DEFAULT_TEMPERATURE_K: f64 = 290.0;
/// Receiver noise figure, dB.
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 6.0;
/// Trials per scenario unless overridden.
pub const DEFAULT_TRIALS: u64 = 10_000;

/// Trials sharing one freshly drawn interference waveform.
const TRIALS_PER_BATCH: u64 = 100;
/// Interference waveform length per batch, in LoRa symbol durations.
const WAVEFORM_SYMBOLS_PER_BATCH: f64 = 100.0;

/// Stream-id namespaces; the low bits carry the trial or batch index.
const TAG_TRIAL: u64 = 1 << 60;
const TAG_WAVEFORM: u64 = 2 << 60;
/// Seed salt for the waveform behind a standalone trial-statistic call.
const SALT_SINGLE_TRIAL_WAVEFORM: u64 = 0x57a9_da10;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Receiver noise floor model: thermal noise over the LoRa bandwidth at a
/// given temperature, raised by the receiver noise figure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub bandwidth_hz: f64,
    pub temperature_k: f64,
    pub noise_figure_db: f64,
}

impl NoiseModel {
    /// Noise model at 290 K with a 6 dB noise figure.
    pub fn new(bandwidth_hz: f64) -> Self {
        Self {
            bandwidth_hz,
            temperature_k: DEFAULT_TEMPERATURE_K,
            noise_figure_db: DEFAULT_NOISE_FIGURE_DB,
        }
    }

    pub fn with_params(bandwidth_hz: f64, temperature_k: f64, noise_figure_db: f64) -> Self {
        Self {
            bandwidth_hz,
            temperature_k,
            noise_figure_db,
        }
    }

    /// Thermal noise power `k_B * T * B` in dBm.
    pub fn thermal_noise_dbm(&self) -> f64 {
        mw_to_dbm(BOLTZMANN_J_PER_K * self.temperature_k * self.bandwidth_hz * 1e3)
    }

    /// Total noise floor in dBm (thermal noise plus noise figure).
    pub fn noise_floor_dbm(&self) -> f64 {
        self.thermal_noise_dbm() + self.noise_figure_db
    }

    pub fn noise_floor_mw(&self) -> f64 {
        dbm_to_mw(self.noise_floor_dbm())
    }
}

/// One Monte Carlo configuration: LoRa config, powers relative to the
/// noise floor, optional interferer, trial budget, and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub cfg: LoRaConfig,
    pub snr_db: f64,
    pub inr_db: Option<f64>,
    pub interferer: Option<InterferenceKind>,
    pub interferer_bandwidth_hz: f64,
    pub gmsk_bt: f64,
    pub noise: NoiseModel,
    pub noise_enabled: bool,
    pub trials: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(cfg: LoRaConfig, noise: NoiseModel, snr_db: f64) -> Self {
        Self {
            cfg,
            snr_db,
            inr_db: None,
            interferer: None,
            interferer_bandwidth_hz: DEFAULT_INTERFERER_BANDWIDTH_HZ,
            gmsk_bt: DEFAULT_GMSK_BT,
            noise,
            noise_enabled: true,
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }

    pub fn with_interferer(mut self, kind: InterferenceKind, inr_db: f64) -> Self {
        self.interferer = Some(kind);
        self.inr_db = Some(inr_db);
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Zeroes the thermal noise term; used to test the construction of
    /// the decision statistic in the noise-free limit.
    pub fn with_noise_disabled(mut self) -> Self {
        self.noise_enabled = false;
        self
    }

    pub fn with_interferer_bandwidth(mut self, bandwidth_hz: f64) -> Self {
        self.interferer_bandwidth_hz = bandwidth_hz;
        self
    }

    pub fn with_gmsk_bt(mut self, bt: f64) -> Self {
        self.gmsk_bt = bt;
        self
    }

    pub fn noise_power_mw(&self) -> f64 {
        self.noise.noise_floor_mw()
    }

    pub fn signal_power_mw(&self) -> f64 {
        self.noise_power_mw() * 10f64.powf(self.snr_db / 10.0)
    }

    pub fn interference_power_mw(&self) -> Option<f64> {
        self.inr_db
            .map(|inr| self.noise_power_mw() * 10f64.powf(inr / 10.0))
    }

    /// Received LoRa signal power in dBm.
    pub fn rssi_dbm(&self) -> f64 {
        self.noise.noise_floor_dbm() + self.snr_db
    }
}

/// Symbol-error count with its Wilson 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SerEstimate {
    pub errors: u64,
    pub trials: u64,
}

impl SerEstimate {
    pub fn ser(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    /// Wilson score interval at 95% confidence.
    pub fn wilson_ci95(&self) -> (f64, f64) {
        let z = 1.959_963_984_540_054f64;
        let n = self.trials as f64;
        let p = self.ser();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        ((center - half).max(0.0), (center + half).min(1.0))
    }

    pub fn ci_overlaps(&self, other: &SerEstimate) -> bool {
        let (a_lo, a_hi) = self.wilson_ci95();
        let (b_lo, b_hi) = other.wilson_ci95();
        a_lo <= b_hi && b_lo <= a_hi
    }
}

/// The long interference waveform a batch of trials draws segments from,
/// already power-normalized and trimmed of filter transients.
struct InterferenceSource {
    usable: ComplexBaseband,
}

fn build_interference_source(
    scenario: &Scenario,
    kind: InterferenceKind,
    stream: RngStream,
) -> InterferenceSource {
    let bw = scenario.cfg.bandwidth_hz();
    let rate = scenario.interferer_bandwidth_hz;
    let duration = WAVEFORM_SYMBOLS_PER_BATCH * scenario.cfg.symbol_duration_s();
    let power = scenario
        .interference_power_mw()
        .expect("interferer requires an INR");
    let raw = match kind {
        InterferenceKind::Bpsk => {
            waveforms::gen_bpsk(rate, duration, bw, stream).expect("BPSK generator preconditions")
        }
        InterferenceKind::Gmsk => waveforms::gen_gmsk(rate, scenario.gmsk_bt, duration, bw, stream)
            .expect("GMSK generator preconditions"),
        InterferenceKind::AwgnControl => {
            waveforms::gen_awgn((duration * bw).round() as usize, 1.0, bw, stream)
        }
    };
    let normed = waveforms::normalize_power(&raw, power).expect("generated waveform has energy");
    let margin = match kind {
        InterferenceKind::AwgnControl => 0,
        _ => (FILTER_TRANSIENT_SYMBOLS * bw / rate).ceil() as usize,
    };
    let usable = normed.samples[margin..normed.len() - margin].to_vec();
    assert!(
        usable.len() >= scenario.cfg.n(),
        "interference waveform too short after transient trimming"
    );
    InterferenceSource {
        usable: ComplexBaseband::new(usable, bw),
    }
}

/// Precomputed per-scenario state shared by all trials.
struct EngineCtx<'a> {
    scenario: &'a Scenario,
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    conj_up: Vec<Complex64>,
    upchirp: Vec<Complex64>,
    /// sqrt(P_s) * N: the clean signal peak in the decision statistic.
    signal_peak: f64,
    /// Per-dimension std of a frequency-domain noise bin, sqrt(N*P_n/2).
    bin_noise_sigma: f64,
    /// Per-dimension std of a time-domain noise sample, sqrt(P_n/2).
    sample_noise_sigma: f64,
    max_abs_offset_hz: f64,
    time_domain: bool,
}

impl<'a> EngineCtx<'a> {
    fn new(scenario: &'a Scenario, time_domain: bool) -> Self {
        let n = scenario.cfg.n();
        assert!(scenario.trials >= 1, "scenario requires at least one trial");
        if scenario.interferer.is_some() {
            assert!(
                scenario.interferer_bandwidth_hz < scenario.cfg.bandwidth_hz(),
                "interferer bandwidth must be below the LoRa bandwidth"
            );
        }
        let p_n = scenario.noise_power_mw();
        let p_s = scenario.signal_power_mw();
        Self {
            scenario,
            n,
            fft: FftPlanner::new().plan_fft_forward(n),
            conj_up: css::conj_upchirp(&scenario.cfg),
            upchirp: css::make_upchirp(&scenario.cfg).samples,
            signal_peak: p_s.sqrt() * n as f64,
            bin_noise_sigma: if scenario.noise_enabled {
                (n as f64 * p_n / 2.0).sqrt()
            } else {
                0.0
            },
            sample_noise_sigma: if scenario.noise_enabled {
                (p_n / 2.0).sqrt()
            } else {
                0.0
            },
            max_abs_offset_hz: InterferenceSpec::max_abs_offset_hz(
                scenario.interferer_bandwidth_hz,
                scenario.cfg.bandwidth_hz(),
            ),
            time_domain,
        }
    }

    /// Draws the per-trial interference placement: frequency offset, then
    /// segment start (same discipline as `waveforms::random_segment`).
    fn draw_placement(&self, source: &InterferenceSource, rng: &mut ChaCha8Rng) -> (f64, usize) {
        let delta_f = rng.random_range(-self.max_abs_offset_hz..self.max_abs_offset_hz);
        let start = rng.random_range(0..=source.usable.len() - self.n);
        (delta_f, start)
    }

    /// Assembles the decision statistic for one trial into `buf`.
    fn trial_bins(
        &self,
        source: Option<&InterferenceSource>,
        p: usize,
        rng: &mut ChaCha8Rng,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        if self.time_domain {
            self.trial_bins_time_domain(source, p, rng, buf, scratch);
        } else {
            self.trial_bins_hybrid(source, p, rng, buf, scratch);
        }
    }

    /// Hybrid construction: interference through the dechirp-DFT chain,
    /// signal placed directly as the real peak sqrt(P_s)*N at bin `p`,
    /// noise drawn per bin as CN(0, N*P_n/2).
    fn trial_bins_hybrid(
        &self,
        source: Option<&InterferenceSource>,
        p: usize,
        rng: &mut ChaCha8Rng,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        if let Some(src) = source {
            let (delta_f, start) = self.draw_placement(src, rng);
            let ratio = delta_f / self.scenario.cfg.bandwidth_hz();
            for (i, b) in buf.iter_mut().enumerate() {
                let turns = ratio * i as f64;
                *b = src.usable.samples[start + i]
                    * Complex64::from_polar(1.0, 2.0 * PI * (turns - turns.floor()));
            }
            css::dechirp_dft_with(&self.fft, &self.conj_up, buf, scratch);
        } else {
            buf.fill(Complex64::new(0.0, 0.0));
        }
        buf[p].re += self.signal_peak;
        if self.bin_noise_sigma > 0.0 {
            for b in buf.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                b.re += self.bin_noise_sigma * re;
                b.im += self.bin_noise_sigma * im;
            }
        }
    }

    /// Full time-domain construction: symbol, noise, and interference
    /// synthesized as waveforms, summed, then dechirped and transformed.
    fn trial_bins_time_domain(
        &self,
        source: Option<&InterferenceSource>,
        p: usize,
        rng: &mut ChaCha8Rng,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        let amp = self.signal_peak / self.n as f64;
        let rot = Complex64::from_polar(1.0, 2.0 * PI * p as f64 / self.n as f64);
        let mut tone = Complex64::new(amp, 0.0);
        for (i, b) in buf.iter_mut().enumerate() {
            *b = self.upchirp[i] * tone;
            tone *= rot;
        }
        if let Some(src) = source {
            let (delta_f, start) = self.draw_placement(src, rng);
            let ratio = delta_f / self.scenario.cfg.bandwidth_hz();
            for (i, b) in buf.iter_mut().enumerate() {
                let turns = ratio * i as f64;
                *b += src.usable.samples[start + i]
                    * Complex64::from_polar(1.0, 2.0 * PI * (turns - turns.floor()));
            }
        }
        if self.sample_noise_sigma > 0.0 {
            for b in buf.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                b.re += self.sample_noise_sigma * re;
                b.im += self.sample_noise_sigma * im;
            }
        }
        css::dechirp_dft_with(&self.fft, &self.conj_up, buf, scratch);
    }

    fn batch_source(&self, batch: u64) -> Option<InterferenceSource> {
        self.scenario.interferer.map(|kind| {
            build_interference_source(
                self.scenario,
                kind,
                RngStream::new(self.scenario.seed, TAG_WAVEFORM | batch),
            )
        })
    }

    /// Runs one batch of trials; with `early_stop` it returns at the
    /// first error, which leaves the zero/nonzero outcome unchanged.
    fn batch_errors(&self, batch: u64, early_stop: bool) -> u64 {
        let source = self.batch_source(batch);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let lo = batch * TRIALS_PER_BATCH;
        let hi = (lo + TRIALS_PER_BATCH).min(self.scenario.trials);
        let mut errors = 0;
        for t in lo..hi {
            let mut rng = RngStream::new(self.scenario.seed, TAG_TRIAL | t).rng();
            let p = rng.random_range(0..self.n);
            self.trial_bins(source.as_ref(), p, &mut rng, &mut buf, &mut scratch);
            if css::argmax_bins(&buf) != p {
                errors += 1;
                if early_stop {
                    break;
                }
            }
        }
        errors
    }

    fn n_batches(&self) -> u64 {
        self.scenario.trials.div_ceil(TRIALS_PER_BATCH)
    }

    fn count_errors(&self) -> u64 {
        (0..self.n_batches())
            .into_par_iter()
            .map(|b| self.batch_errors(b, false))
            .sum()
    }

    fn any_error(&self) -> bool {
        (0..self.n_batches())
            .into_par_iter()
            .any(|b| self.batch_errors(b, true) > 0)
    }
}

/// Builds one trial's decision statistic with the hybrid construction.
///
/// The interference waveform is synthesized from a sub-stream derived
/// from `stream`, so repeat calls are bit-identical.
pub fn build_trial_statistic(
    scenario: &Scenario,
    p: usize,
    stream: RngStream,
) -> Result<DecisionStatistic> {
    trial_statistic(scenario, p, stream, false)
}

/// Builds one trial's decision statistic entirely in the time domain;
/// statistically equivalent to [`build_trial_statistic`].
pub fn build_trial_statistic_time_domain(
    scenario: &Scenario,
    p: usize,
    stream: RngStream,
) -> Result<DecisionStatistic> {
    trial_statistic(scenario, p, stream, true)
}

fn trial_statistic(
    scenario: &Scenario,
    p: usize,
    stream: RngStream,
    time_domain: bool,
) -> Result<DecisionStatistic> {
    let n = scenario.cfg.n();
    if p >= n {
        return Err(Error::SymbolIndexOutOfRange { index: p, n });
    }
    let ctx = EngineCtx::new(scenario, time_domain);
    let source = scenario.interferer.map(|kind| {
        build_interference_source(
            scenario,
            kind,
            RngStream::new(
                derive_seed(stream.seed, SALT_SINGLE_TRIAL_WAVEFORM),
                stream.stream_id,
            ),
        )
    });
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); ctx.fft.get_inplace_scratch_len()];
    let mut rng = stream.rng();
    ctx.trial_bins(source.as_ref(), p, &mut rng, &mut buf, &mut scratch);
    Ok(DecisionStatistic::new(buf))
}

/// Estimates the SER of a scenario over its trial budget with the hybrid
/// trial construction. Each trial uses a uniformly random true symbol and
/// its own RNG sub-stream; deterministic for a fixed seed regardless of
/// worker count.
pub fn estimate_ser(scenario: &Scenario) -> SerEstimate {
    let ctx = EngineCtx::new(scenario, false);
    SerEstimate {
        errors: ctx.count_errors(),
        trials: scenario.trials,
    }
}

/// SER estimate using the full time-domain trial construction; the
/// cross-validation counterpart of [`estimate_ser`].
pub fn estimate_ser_time_domain(scenario: &Scenario) -> SerEstimate {
    let ctx = EngineCtx::new(scenario, true);
    SerEstimate {
        errors: ctx.count_errors(),
        trials: scenario.trials,
    }
}

/// True if the scenario produces at least one symbol error over its trial
/// budget. Same decision as `estimate_ser(..).errors > 0`, but allowed to
/// stop at the first error found.
pub fn has_any_error(scenario: &Scenario) -> bool {
    EngineCtx::new(scenario, false).any_error()
}

/// Outcome of the zero-SER RSSI threshold extraction from an RSSI sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum RssiThreshold {
    /// Lowest grid RSSI with zero errors whose entire upper tail is also
    /// error-free, bracketed by an errored point below it.
    Found(f64),
    /// The whole grid was error-free; the true threshold may lie below
    /// the reported lowest grid point.
    GridLimited(f64),
    /// No error-free upper tail on this grid.
    NotFound { diagnostic: String },
}

/// SER-vs-RSSI sweep result.
#[derive(Debug, Clone, PartialEq)]
pub struct RssiSweep {
    /// One `(rssi_dbm, estimate)` per grid point.
    pub points: Vec<(f64, SerEstimate)>,
    pub threshold: RssiThreshold,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid must be non-empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Noise-only SER sweep over an RSSI grid, reporting the zero-SER
/// threshold `R_T`: the minimum grid RSSI with zero errors such that all
/// larger grid RSSIs are also error-free.
pub fn sweep_ser_vs_rssi(
    cfg: LoRaConfig,
    noise: NoiseModel,
    rssi_grid_dbm: &[f64],
    trials: u64,
    seed: u64,
) -> Result<RssiSweep> {
    validate_grid(rssi_grid_dbm)?;
    let floor = noise.noise_floor_dbm();
    let points: Vec<(f64, SerEstimate)> = rssi_grid_dbm
        .par_iter()
        .enumerate()
        .map(|(i, &rssi)| {
            let scenario = Scenario::new(cfg, noise, rssi - floor)
                .with_trials(trials)
                .with_seed(derive_seed(seed, i as u64));
            (rssi, estimate_ser(&scenario))
        })
        .collect();
    // Start of the error-free upper tail.
    let mut tail_start = points.len();
    for (i, (_, est)) in points.iter().enumerate().rev() {
        if est.errors == 0 {
            tail_start = i;
        } else {
            break;
        }
    }
    let threshold = if tail_start == points.len() {
        RssiThreshold::NotFound {
            diagnostic: format!(
                "no zero-error tail: errors persist up to {:.2} dBm; extend the grid upward",
                points.last().unwrap().0
            ),
        }
    } else if tail_start == 0 {
        RssiThreshold::GridLimited(points[0].0)
    } else {
        RssiThreshold::Found(points[tail_start].0)
    };
    Ok(RssiSweep { points, threshold })
}

/// SER sweep over an INR grid at fixed SNR for one interferer kind.
/// The AWGN control kind injects white noise of power `P_i` through the
/// same segment/offset/dechirp chain as the modulated interferers.
#[allow(clippy::too_many_arguments)]
pub fn sweep_ser_vs_inr(
    cfg: LoRaConfig,
    noise: NoiseModel,
    snr_db: f64,
    kind: InterferenceKind,
    inr_grid_db: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<(f64, SerEstimate)>> {
    validate_grid(inr_grid_db)?;
    Ok(inr_grid_db
        .par_iter()
        .enumerate()
        .map(|(i, &inr)| {
            let scenario = Scenario::new(cfg, noise, snr_db)
                .with_interferer(kind, inr)
                .with_trials(trials)
                .with_seed(derive_seed(seed, i as u64));
            (inr, estimate_ser(&scenario))
        })
        .collect())
}

/// How far below the start INR the descending scan may walk before
/// giving up.
const SCAN_FLOOR_DEPTH_DB: f64 = 80.0;

/// Descending scan for the highest INR with zero symbol errors.
///
/// Starts at `start_inr_db`, which must produce errors, and decrements in
/// `step_db` steps, re-running the trial budget at each level, until a
/// level completes all trials without a single error; that INR is
/// returned.
#[allow(clippy::too_many_arguments)]
pub fn find_max_inr(
    cfg: LoRaConfig,
    noise: NoiseModel,
    snr_db: f64,
    kind: InterferenceKind,
    start_inr_db: f64,
    step_db: f64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if !(step_db > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step_db must be positive, got {step_db}"
        )));
    }
    let scenario_at = |inr_db: f64, level: u64| {
        Scenario::new(cfg, noise, snr_db)
            .with_interferer(kind, inr_db)
            .with_trials(trials)
            .with_seed(derive_seed(seed, level))
    };
    if !has_any_error(&scenario_at(start_inr_db, 0)) {
        return Err(Error::ScanStartErrorFree {
            start_inr_db,
            trials,
        });
    }
    let floor = start_inr_db - SCAN_FLOOR_DEPTH_DB;
    let mut level = 1u64;
    loop {
        let inr = start_inr_db - level as f64 * step_db;
        if inr < floor {
            return Err(Error::ScanFloorReached { floor_db: floor });
        }
        if !has_any_error(&scenario_at(inr, level)) {
            return Ok(inr);
        }
        level += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::css::demodulate;

    fn sf7() -> (LoRaConfig, NoiseModel) {
        let cfg = LoRaConfig::with_default_bandwidth(7).unwrap();
        (cfg, NoiseModel::new(cfg.bandwidth_hz()))
    }

    #[test]
    fn noise_floor_matches_expected_values() {
        let noise = NoiseModel::new(125_000.0);
        assert!((noise.thermal_noise_dbm() - -123.0).abs() < 0.5);
        assert!((noise.noise_floor_dbm() - -117.0).abs() < 0.5);
    }

    #[test]
    fn scenario_power_derivation() {
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, 10.0).with_interferer(InterferenceKind::Gmsk, 3.0);
        let p_n = sc.noise_power_mw();
        assert!((sc.signal_power_mw() / p_n - 10.0).abs() < 1e-9);
        assert!((sc.interference_power_mw().unwrap() / p_n - 10f64.powf(0.3)).abs() < 1e-9);
        assert!((sc.rssi_dbm() - (noise.noise_floor_dbm() + 10.0)).abs() < 1e-12);
    }

    #[test]
    fn noise_free_trial_has_single_peak_at_p() {
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, 0.0).with_noise_disabled();
        let stat = build_trial_statistic(&sc, 41, RngStream::new(1, 0)).unwrap();
        assert_eq!(demodulate(&stat), 41);
        let nonzero = stat.bins.iter().filter(|b| b.norm() > 1e-30).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn trial_statistic_is_deterministic() {
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, -5.0).with_interferer(InterferenceKind::Bpsk, 5.0);
        let a = build_trial_statistic(&sc, 7, RngStream::new(42, 9)).unwrap();
        let b = build_trial_statistic(&sc, 7, RngStream::new(42, 9)).unwrap();
        assert_eq!(a.bins, b.bins);
    }

    #[test]
    fn trial_statistic_rejects_bad_symbol() {
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, 0.0);
        assert!(build_trial_statistic(&sc, 128, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn time_domain_clean_trial_peaks_at_sqrt_ps_n() {
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, 3.0).with_noise_disabled();
        for p in [0usize, 17, 127] {
            let stat = build_trial_statistic_time_domain(&sc, p, RngStream::new(5, 0)).unwrap();
            assert_eq!(demodulate(&stat), p);
            let expected = sc.signal_power_mw().sqrt() * 128.0;
            assert!((stat.bins[p].norm() - expected).abs() < 1e-6 * expected);
        }
    }

    #[test]
    fn hybrid_matches_manual_waveform_chain() {
        // With noise disabled, the builder must equal the composition of
        // the public waveform ops drawn from the same stream.
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, 0.0)
            .with_interferer(InterferenceKind::Gmsk, 10.0)
            .with_noise_disabled();
        let stream = RngStream::new(33, 4);
        let stat = build_trial_statistic(&sc, 3, stream).unwrap();

        let source = build_interference_source(
            &sc,
            InterferenceKind::Gmsk,
            RngStream::new(derive_seed(stream.seed, SALT_SINGLE_TRIAL_WAVEFORM), stream.stream_id),
        );
        let mut rng = stream.rng();
        let _p = rng.random_range(0..sc.cfg.n());
        let max_off = InterferenceSpec::max_abs_offset_hz(
            sc.interferer_bandwidth_hz,
            cfg.bandwidth_hz(),
        );
        let delta_f = rng.random_range(-max_off..max_off);
        let seg = waveforms::random_segment(&source.usable, cfg.n(), &mut rng).unwrap();
        let shifted = waveforms::apply_freq_offset(&seg, delta_f);
        let mut expect = css::dechirp_dft(&cfg, &shifted).unwrap();
        expect.bins[3].re += sc.signal_power_mw().sqrt() * cfg.n() as f64;
        for (a, b) in stat.bins.iter().zip(&expect.bins) {
            assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn estimate_ser_is_deterministic_and_pool_invariant() {
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, -10.0)
            .with_trials(400)
            .with_seed(7);
        let a = estimate_ser(&sc);
        let b = estimate_ser(&sc);
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_ser(&sc));
        assert_eq!(a, single);
        assert!(a.errors > 0, "SNR -10 dB at SF7 should produce errors");
    }

    #[test]
    fn high_snr_is_nearly_error_free() {
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, 30.0).with_trials(10_000).with_seed(3);
        let est = estimate_ser(&sc);
        assert!(est.errors <= 1, "got {} errors", est.errors);
    }

    #[test]
    fn hybrid_and_time_domain_agree_at_spec_point() {
        let (cfg, noise) = sf7();
        let floor = noise.noise_floor_dbm();
        let sc = Scenario::new(cfg, noise, -123.0 - floor)
            .with_trials(10_000)
            .with_seed(11);
        let hybrid = estimate_ser(&sc);
        let td = estimate_ser_time_domain(&sc);
        assert!(hybrid.ci_overlaps(&td));
    }

    #[test]
    fn noise_bin_variance_calibration() {
        // Time-domain noise propagated through dechirp + DFT must land at
        // N * P_n / 2 per dimension in every bin.
        let (cfg, noise) = sf7();
        let sc = Scenario::new(cfg, noise, 0.0);
        let n = cfg.n();
        let trials = 2_000usize;
        let mut acc = 0.0f64;
        let mut count = 0usize;
        for t in 0..trials {
            let stat =
                build_trial_statistic_time_domain(&sc, 0, RngStream::new(99, t as u64)).unwrap();
            for (k, bin) in stat.bins.iter().enumerate() {
                if k == 0 {
                    continue; // signal bin
                }
                acc += bin.re * bin.re + bin.im * bin.im;
                count += 2;
            }
        }
        let per_dim = acc / count as f64;
        let expected = n as f64 * sc.noise_power_mw() / 2.0;
        assert!(
            (per_dim / expected - 1.0).abs() < 0.05,
            "per-dim variance {per_dim} vs expected {expected}"
        );
    }

    #[test]
    fn rssi_sweep_reports_threshold_flavors() {
        let (cfg, noise) = sf7();
        // Single very high point: zero errors, grid-limited.
        let sweep = sweep_ser_vs_rssi(cfg, noise, &[-100.0], 500, 1).unwrap();
        assert_eq!(sweep.threshold, RssiThreshold::GridLimited(-100.0));
        // Grid below the transition: threshold not found.
        let sweep = sweep_ser_vs_rssi(cfg, noise, &[-140.0, -139.0], 500, 1).unwrap();
        assert!(matches!(sweep.threshold, RssiThreshold::NotFound { .. }));
        // Grids must be strictly increasing and non-empty.
        assert!(sweep_ser_vs_rssi(cfg, noise, &[], 500, 1).is_err());
        assert!(sweep_ser_vs_rssi(cfg, noise, &[-1.0, -1.0], 500, 1).is_err());
    }

    #[test]
    fn find_max_inr_rejects_error_free_start() {
        let (cfg, noise) = sf7();
        let err = find_max_inr(
            cfg,
            noise,
            20.0,
            InterferenceKind::Gmsk,
            -20.0,
            0.5,
            500,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ScanStartErrorFree { .. }));
    }

    #[test]
    fn wilson_interval_matches_known_values() {
        let zero = SerEstimate {
            errors: 0,
            trials: 10_000,
        };
        let (lo, hi) = zero.wilson_ci95();
        assert_eq!(lo, 0.0);
        assert!((hi - 3.8e-4).abs() < 0.2e-4, "upper bound {hi}");
        let half = SerEstimate {
            errors: 5_000,
            trials: 10_000,
        };
        let (lo, hi) = half.wilson_ci95();
        assert!((lo - 0.4902).abs() < 1e-3);
        assert!((hi - 0.5098).abs() < 1e-3);
    }
}
