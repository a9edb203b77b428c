//! Stationary-phase approximation of the interference term of the
//! decision statistic: the dechirped, DFT-transformed narrowband
//! interferer's bin magnitudes approximate a scaled copy of its complex
//! envelope, `|Y_i[k]| ~= sqrt(N) * |i[n_k]|`, under the bin-to-sample
//! index mapping `n_k = N*df/B - k + N/2 (mod N)`.
//!
//! [`approximation_error`] quantifies the approximation against the exact
//! dechirp-DFT computation.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::css::{self, ComplexBaseband, LoRaConfig};
use crate::error::{Error, Result};

/// Phase kernel of one DFT bin: the oscillatory factor the interferer is
/// summed against after dechirping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseKernel {
    pub cfg: LoRaConfig,
    pub delta_f_hz: f64,
    pub k: usize,
}

impl PhaseKernel {
    pub fn new(cfg: LoRaConfig, delta_f_hz: f64, k: usize) -> Result<Self> {
        if k >= cfg.n() {
            return Err(Error::SymbolIndexOutOfRange { index: k, n: cfg.n() });
        }
        Ok(Self { cfg, delta_f_hz, k })
    }

    /// The phase term `F[n; k]` at (possibly fractional) sample index `n`:
    /// `2*pi*df*n/B - pi*n*(n-N)/N - 2*pi*k*n/N`.
    pub fn phase(&self, n: f64) -> f64 {
        let big_n = self.cfg.n() as f64;
        2.0 * PI * self.delta_f_hz * n / self.cfg.bandwidth_hz()
            - PI * n * (n - big_n) / big_n
            - 2.0 * PI * self.k as f64 * n / big_n
    }
}

/// Real-valued stationary point of the bin-`k` phase kernel:
/// `n_k = N*df/B - k + N/2`, not reduced modulo N.
pub fn stationary_index(kernel: &PhaseKernel) -> f64 {
    let big_n = kernel.cfg.n() as f64;
    big_n * kernel.delta_f_hz / kernel.cfg.bandwidth_hz() - kernel.k as f64 + big_n / 2.0
}

/// Nearest-integer sample index hit by bin `k`'s stationary point, with
/// modulo-N wraparound.
pub fn stationary_sample(kernel: &PhaseKernel) -> usize {
    let n = kernel.cfg.n() as i64;
    (stationary_index(kernel).round() as i64).rem_euclid(n) as usize
}

fn check_segment(cfg: &LoRaConfig, segment: &ComplexBaseband) -> Result<()> {
    if segment.len() != cfg.n() {
        return Err(Error::SampleCountMismatch {
            expected: cfg.n(),
            got: segment.len(),
        });
    }
    if segment.sample_rate_hz != cfg.bandwidth_hz() {
        return Err(Error::SampleRateMismatch {
            expected: cfg.bandwidth_hz(),
            got: segment.sample_rate_hz,
        });
    }
    Ok(())
}

/// Approximate interference bin magnitudes `sqrt(N) * |i[n_k]|` for every
/// bin k, from the pre-offset complex envelope segment `i[n]`.
pub fn approx_interference_bins(
    cfg: &LoRaConfig,
    segment: &ComplexBaseband,
    delta_f_hz: f64,
) -> Result<Vec<f64>> {
    check_segment(cfg, segment)?;
    let sqrt_n = (cfg.n() as f64).sqrt();
    (0..cfg.n())
        .map(|k| {
            let kernel = PhaseKernel::new(*cfg, delta_f_hz, k)?;
            Ok(sqrt_n * segment.samples[stationary_sample(&kernel)].norm())
        })
        .collect()
}

/// Complex stationary-phase approximation of the interference bins,
/// `sqrt(N) * exp(j*(F(n_k; k) - pi/4)) * i[n_k]`, with the phase factor
/// evaluated at the real-valued stationary point.
pub fn approx_interference_bins_complex(
    cfg: &LoRaConfig,
    segment: &ComplexBaseband,
    delta_f_hz: f64,
) -> Result<Vec<Complex64>> {
    check_segment(cfg, segment)?;
    let sqrt_n = (cfg.n() as f64).sqrt();
    (0..cfg.n())
        .map(|k| {
            let kernel = PhaseKernel::new(*cfg, delta_f_hz, k)?;
            let n_k = stationary_index(&kernel);
            let phase = kernel.phase(n_k) - PI / 4.0;
            Ok(sqrt_n
                * Complex64::from_polar(1.0, phase)
                * segment.samples[stationary_sample(&kernel)])
        })
        .collect()
}

/// Per-bin comparison of exact and approximate interference magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct BinError {
    pub k: usize,
    pub exact_mag: f64,
    pub approx_mag: f64,
    /// Unreduced stationary index for this bin.
    pub n_k: f64,
}

/// Accuracy report for the stationary-phase approximation on one segment.
///
/// Relative figures are normalized by `sqrt(N * P_i)`, the approximation's
/// own magnitude scale at the segment's mean power `P_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxErrorReport {
    pub per_bin: Vec<BinError>,
    pub max_abs: f64,
    pub rms: f64,
    pub max_rel: f64,
    pub rms_rel: f64,
}

/// Quantifies the approximation error: exact `|Y_i[k]|` via the dechirp-DFT
/// of the frequency-shifted segment versus [`approx_interference_bins`].
pub fn approximation_error(
    cfg: &LoRaConfig,
    segment: &ComplexBaseband,
    delta_f_hz: f64,
) -> Result<ApproxErrorReport> {
    check_segment(cfg, segment)?;
    let shifted = crate::waveforms::apply_freq_offset(segment, delta_f_hz);
    let exact = css::dechirp_dft(cfg, &shifted)?;
    let approx = approx_interference_bins(cfg, segment, delta_f_hz)?;
    let per_bin: Vec<BinError> = exact
        .bins
        .iter()
        .zip(&approx)
        .enumerate()
        .map(|(k, (e, &a))| {
            let kernel = PhaseKernel::new(*cfg, delta_f_hz, k).expect("k < N");
            BinError {
                k,
                exact_mag: e.norm(),
                approx_mag: a,
                n_k: stationary_index(&kernel),
            }
        })
        .collect();
    let n = cfg.n() as f64;
    let scale = (n * segment.mean_power_mw()).sqrt();
    let mut max_abs = 0.0f64;
    let mut sum_sq = 0.0f64;
    for b in &per_bin {
        let d = (b.exact_mag - b.approx_mag).abs();
        max_abs = max_abs.max(d);
        sum_sq += d * d;
    }
    let rms = (sum_sq / n).sqrt();
    let (max_rel, rms_rel) = if scale > 0.0 {
        (max_abs / scale, rms / scale)
    } else {
        (0.0, 0.0)
    };
    Ok(ApproxErrorReport {
        per_bin,
        max_abs,
        rms,
        max_rel,
        rms_rel,
    })
}

/// Peak-to-peak spread of a magnitude profile relative to its mean:
/// `(max - min) / mean`. Zero for a perfectly flat profile.
pub fn profile_flatness(mags: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &m in mags {
        lo = lo.min(m);
        hi = hi.max(m);
        sum += m;
    }
    let mean = sum / mags.len() as f64;
    if mean == 0.0 {
        0.0
    } else {
        (hi - lo) / mean
    }
}
