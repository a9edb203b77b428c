//! LoRa chirp-spread-spectrum symbol math: chirp generation, dechirping,
//! the N-point DFT decision statistic, and the argmax symbol decision.
//!
//! Sampling is one sample per chip (sample rate = bandwidth), so a symbol
//! is exactly `N = 2^SF` complex samples.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// LoRa PHY configuration: spreading factor and bandwidth.
///
/// Derived quantities: symbol length `N = 2^SF` samples and symbol
/// duration `N / bandwidth` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoRaConfig {
    sf: u8,
    bandwidth_hz: f64,
}

/// Default LoRa channel bandwidth in Hz.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 125_000.0;

impl LoRaConfig {
    /// Creates a config, validating `sf` in 7..=12 and a positive bandwidth.
    pub fn new(sf: u8, bandwidth_hz: f64) -> Result<Self> {
        if !(7..=12).contains(&sf) {
            return Err(Error::SpreadingFactorOutOfRange(sf));
        }
        if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {bandwidth_hz}"
            )));
        }
        Ok(Self { sf, bandwidth_hz })
    }

    /// Config with the default 125 kHz bandwidth.
    pub fn with_default_bandwidth(sf: u8) -> Result<Self> {
        Self::new(sf, DEFAULT_BANDWIDTH_HZ)
    }

    pub fn sf(&self) -> u8 {
        self.sf
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// Symbol length in samples, `N = 2^SF`.
    pub fn n(&self) -> usize {
        1usize << self.sf
    }

    /// Symbol duration `N / bandwidth` in seconds.
    pub fn symbol_duration_s(&self) -> f64 {
        self.n() as f64 / self.bandwidth_hz
    }
}

/// A finite complex baseband waveform with its sample rate.
///
/// Samples carry units of sqrt(mW): `|sample|^2` is instantaneous power
/// in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBaseband {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl ComplexBaseband {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time-mean of `|sample|^2`, i.e. average power in mW.
    pub fn mean_power_mw(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// The N complex DFT bins `Y[k]` a symbol decision is made from.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionStatistic {
    pub bins: Vec<Complex64>,
}

impl DecisionStatistic {
    pub fn new(bins: Vec<Complex64>) -> Self {
        Self { bins }
    }

    pub fn n(&self) -> usize {
        self.bins.len()
    }
}

/// Generates the index-0 upchirp, `exp(j*pi*n*(n-N)/N)` for n = 0..N.
///
/// Every sample has unit magnitude; the sample rate equals the bandwidth.
pub fn make_upchirp(cfg: &LoRaConfig) -> ComplexBaseband {
    let n = cfg.n();
    let samples = (0..n)
        .map(|i| Complex64::from_polar(1.0, upchirp_phase(i, n)))
        .collect();
    ComplexBaseband::new(samples, cfg.bandwidth_hz())
}

/// Phase of the upchirp at sample `i`: pi * i * (i - N) / N.
pub(crate) fn upchirp_phase(i: usize, n: usize) -> f64 {
    PI * i as f64 * (i as f64 - n as f64) / n as f64
}

/// Generates the time-domain symbol with index `p` and per-sample
/// amplitude `amplitude` (sqrt of average power).
///
/// The symbol is the upchirp rotated by the bin-`p` tone, so after
/// dechirping the DFT peaks at exactly `amplitude * N` in bin `p` with
/// zero phase.
pub fn make_symbol(cfg: &LoRaConfig, p: usize, amplitude: f64) -> Result<ComplexBaseband> {
    let n = cfg.n();
    if p >= n {
        return Err(Error::SymbolIndexOutOfRange { index: p, n });
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "amplitude must be positive and finite, got {amplitude}"
        )));
    }
    let tone = 2.0 * PI * p as f64 / n as f64;
    let samples = (0..n)
        .map(|i| Complex64::from_polar(amplitude, upchirp_phase(i, n) + tone * i as f64))
        .collect();
    Ok(ComplexBaseband::new(samples, cfg.bandwidth_hz()))
}

/// Dechirps `received` by the conjugate upchirp and applies the
/// un-normalized N-point forward DFT:
///
/// `bins[k] = sum_n conj(upchirp[n]) * received[n] * exp(-j*2*pi*k*n/N)`
///
/// A clean unit-amplitude symbol therefore peaks at magnitude `N`.
pub fn dechirp_dft(cfg: &LoRaConfig, received: &ComplexBaseband) -> Result<DecisionStatistic> {
    let n = cfg.n();
    if received.len() != n {
        return Err(Error::SampleCountMismatch {
            expected: n,
            got: received.len(),
        });
    }
    if received.sample_rate_hz != cfg.bandwidth_hz() {
        return Err(Error::SampleRateMismatch {
            expected: cfg.bandwidth_hz(),
            got: received.sample_rate_hz,
        });
    }
    let mut bins: Vec<Complex64> = received
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| Complex64::from_polar(1.0, -upchirp_phase(i, n)) * s)
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut bins);
    Ok(DecisionStatistic::new(bins))
}

/// In-place dechirp + DFT on a scratch buffer, reusing a planned FFT.
///
/// Hot path for Monte Carlo trials; semantics identical to [`dechirp_dft`].
pub(crate) fn dechirp_dft_with(
    fft: &std::sync::Arc<dyn rustfft::Fft<f64>>,
    dechirp_ref: &[Complex64],
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    for (b, r) in buf.iter_mut().zip(dechirp_ref) {
        *b *= r;
    }
    fft.process_with_scratch(buf, scratch);
}

/// Conjugate upchirp samples, precomputed once per batch for the hot path.
pub(crate) fn conj_upchirp(cfg: &LoRaConfig) -> Vec<Complex64> {
    let n = cfg.n();
    (0..n)
        .map(|i| Complex64::from_polar(1.0, -upchirp_phase(i, n)))
        .collect()
}

/// Decides the symbol: `argmax_k |Y[k]|`, ties broken by the lowest index.
pub fn demodulate(stat: &DecisionStatistic) -> usize {
    argmax_bins(&stat.bins)
}

/// Lowest-index argmax over bin magnitudes; shared by the Monte Carlo
/// hot path so the tie-break stays in one place.
pub(crate) fn argmax_bins(bins: &[Complex64]) -> usize {
    let mut best = 0usize;
    let mut best_mag = f64::NEG_INFINITY;
    for (k, bin) in bins.iter().enumerate() {
        let mag = bin.norm_sqr();
        if mag > best_mag {
            best_mag = mag;
            best = k;
        }
    }
    best
}
