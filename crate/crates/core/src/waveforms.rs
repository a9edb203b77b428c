//! Interferer and noise waveform synthesis: pulse-shaped BPSK, GMSK, and
//! AWGN, with exact power normalization, frequency offsetting, and random
//! segment extraction.
//!
//! Generators evaluate pulses at exact sample times, so non-integer
//! samples-per-bit ratios (e.g. 125 kHz / 600 bps) need no resampling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::css::ComplexBaseband;
use crate::error::{Error, Result};

/// Which interferer waveform a scenario injects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum InterferenceKind {
    /// Pulse-shaped BPSK (Sigfox-like narrowband uplink).
    Bpsk,
    /// Gaussian minimum-shift keying (LR-FHSS-like, constant envelope).
    Gmsk,
    /// Equal-power white Gaussian noise control group.
    AwgnControl,
}

impl InterferenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InterferenceKind::Bpsk => "bpsk",
            InterferenceKind::Gmsk => "gmsk",
            InterferenceKind::AwgnControl => "awgn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bpsk" => Some(InterferenceKind::Bpsk),
            "gmsk" => Some(InterferenceKind::Gmsk),
            "awgn" | "awgn_control" => Some(InterferenceKind::AwgnControl),
            _ => None,
        }
    }
}

impl std::fmt::Display for InterferenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default occupied bandwidth of the narrowband interferers, Hz.
pub const DEFAULT_INTERFERER_BANDWIDTH_HZ: f64 = 600.0;
/// Default interferer bit/symbol rate, chosen so the occupied bandwidth
/// comes out near [`DEFAULT_INTERFERER_BANDWIDTH_HZ`].
pub const DEFAULT_INTERFERER_RATE_HZ: f64 = 600.0;
/// Default GMSK bandwidth-time product.
pub const DEFAULT_GMSK_BT: f64 = 0.5;
/// GMSK modulation index (MSK family).
pub const GMSK_MODULATION_INDEX: f64 = 0.5;
/// Raised-cosine span, in bit periods, on each side of a BPSK pulse.
pub const BPSK_PULSE_SPAN_BITS: f64 = 4.0;
/// Symbol periods trimmed from each end of a modulated waveform before
/// segment extraction, covering pulse-shaping edge transients.
pub const FILTER_TRANSIENT_SYMBOLS: f64 = 4.0;

/// Narrowband interferer description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceSpec {
    pub kind: InterferenceKind,
    pub occupied_bandwidth_hz: f64,
    pub power_mw: f64,
    pub freq_offset_hz: f64,
}

impl InterferenceSpec {
    /// Builds a spec and checks that the interferer lies entirely inside
    /// the given LoRa bandwidth.
    pub fn new(
        kind: InterferenceKind,
        occupied_bandwidth_hz: f64,
        power_mw: f64,
        freq_offset_hz: f64,
        lora_bandwidth_hz: f64,
    ) -> Result<Self> {
        if !(occupied_bandwidth_hz > 0.0) || occupied_bandwidth_hz >= lora_bandwidth_hz {
            return Err(Error::InvalidParameter(format!(
                "interferer bandwidth {occupied_bandwidth_hz} Hz must be positive and below \
                 the LoRa bandwidth {lora_bandwidth_hz} Hz"
            )));
        }
        if !(power_mw > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "interferer power must be positive, got {power_mw} mW"
            )));
        }
        if freq_offset_hz.abs() + occupied_bandwidth_hz / 2.0 > lora_bandwidth_hz / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "offset {freq_offset_hz} Hz puts the interferer partly outside the LoRa band"
            )));
        }
        Ok(Self {
            kind,
            occupied_bandwidth_hz,
            power_mw,
            freq_offset_hz,
        })
    }

    /// Largest |freq_offset| keeping a `width_hz`-wide interferer fully
    /// inside a LoRa band of `lora_bandwidth_hz`.
    pub fn max_abs_offset_hz(width_hz: f64, lora_bandwidth_hz: f64) -> f64 {
        (lora_bandwidth_hz - width_hz) / 2.0
    }
}

/// A named, reproducible random stream: identical `(seed, stream_id)`
/// pairs yield bit-identical sample sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Instantiates the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// splitmix64 finalizer; used to derive independent sub-seeds from a
/// run seed and a salt without overlapping stream ids.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn check_generator_preconditions(rate_hz: f64, duration_s: f64, sample_rate_hz: f64) -> Result<()> {
    if !(rate_hz > 0.0 && duration_s > 0.0 && sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(
            "rate, duration, and sample rate must all be positive".into(),
        ));
    }
    if duration_s * rate_hz < 8.0 {
        return Err(Error::InvalidParameter(format!(
            "duration {duration_s} s holds fewer than 8 bits at {rate_hz} baud"
        )));
    }
    if sample_rate_hz < 10.0 * rate_hz {
        return Err(Error::InvalidParameter(format!(
            "sample rate {sample_rate_hz} Hz undersamples a {rate_hz} baud signal \
             (need at least 10 samples per bit)"
        )));
    }
    Ok(())
}

fn draw_bits(count: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    (0..count).map(|_| rng.random::<bool>()).collect()
}

/// Raised-cosine pulse with roll-off 1, in bit-period units, given
/// `s2 = sin(2*pi*u)` shared across integer shifts of `u`.
///
/// g(u) = sinc(u) * cos(pi*u) / (1 - 4u^2) = sin(2*pi*u) / (2*pi*u*(1-4u^2)),
/// with removable singularities at u = 0 and u = +-1/2.
fn rc_pulse_shared(u: f64, s2: f64) -> f64 {
    if u.abs() < 1e-7 {
        return 1.0;
    }
    let dp = u - 0.5;
    if dp.abs() < 1e-7 {
        return 0.5 - 1.5 * dp;
    }
    let dm = u + 0.5;
    if dm.abs() < 1e-7 {
        return 0.5 + 1.5 * dm;
    }
    s2 / (2.0 * PI * u * (1.0 - 4.0 * u * u))
}

/// Pulse-shaped BPSK from an explicit bit sequence.
///
/// Bit `m` occupies `[m*T, (m+1)*T)` of the output; the bit vector must
/// also cover [`BPSK_PULSE_SPAN_BITS`] periods beyond each end of the
/// requested duration so edge samples see a full pulse span.
pub fn gen_bpsk_from_bits(
    bits: &[bool],
    bit_rate_hz: f64,
    sample_rate_hz: f64,
    n_samples: usize,
) -> Result<ComplexBaseband> {
    let t_bit = 1.0 / bit_rate_hz;
    let span = BPSK_PULSE_SPAN_BITS;
    let needed = ((n_samples as f64 / sample_rate_hz) * bit_rate_hz + 2.0 * span).ceil() as usize;
    if bits.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "need at least {needed} bits to shape {n_samples} samples, got {}",
            bits.len()
        )));
    }
    let levels: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let samples = (0..n_samples)
        .map(|n| {
            // Generated time axis starts `span` bit periods into the bit
            // stream, so the first sample already has full pulse support.
            let t = span * t_bit + n as f64 / sample_rate_hz;
            let u_frac = t / t_bit - 0.5; // offset to the center of bit 0
            let s2 = (2.0 * PI * (u_frac - u_frac.floor())).sin();
            let m_lo = ((t / t_bit - 0.5) - span).ceil().max(0.0) as usize;
            let m_hi = (((t / t_bit - 0.5) + span).floor() as usize).min(levels.len() - 1);
            let mut acc = 0.0;
            for (m, &a) in levels[m_lo..=m_hi].iter().enumerate() {
                let u = u_frac - (m_lo + m) as f64;
                acc += a * rc_pulse_shared(u, s2);
            }
            Complex64::new(acc, 0.0)
        })
        .collect();
    Ok(ComplexBaseband::new(samples, sample_rate_hz))
}

/// Pulse-shaped BPSK with random equiprobable bits.
///
/// The envelope passes through zero at every bit flip and the waveform is
/// real-valued until a frequency offset is applied.
pub fn gen_bpsk(
    bit_rate_hz: f64,
    duration_s: f64,
    sample_rate_hz: f64,
    rng: RngStream,
) -> Result<ComplexBaseband> {
    check_generator_preconditions(bit_rate_hz, duration_s, sample_rate_hz)?;
    let n_samples = (duration_s * sample_rate_hz).round() as usize;
    let n_bits = (duration_s * bit_rate_hz + 2.0 * BPSK_PULSE_SPAN_BITS).ceil() as usize + 1;
    let bits = draw_bits(n_bits, &mut rng.rng());
    gen_bpsk_from_bits(&bits, bit_rate_hz, sample_rate_hz, n_samples)
}

/// Integrated Gaussian-filtered frequency pulse q(u), in bit-period units,
/// tabulated once per BT product.
///
/// q(u) rises from 0 to 1/2 as the filtered NRZ transition passes;
/// multiplying by `2*pi*h` with h = 0.5 gives each bit's phase ramp.
struct GmskPhasePulse {
    span: f64,
    inv_step: f64,
    values: Vec<f64>,
}

impl GmskPhasePulse {
    fn build(bt: f64) -> Self {
        // 3-dB filter bandwidth B_g = bt * rate; Gaussian std in bit periods.
        let sigma = (2.0f64.ln()).sqrt() / (2.0 * PI * bt);
        let span = 0.5 + 6.0 * sigma;
        let n = 1usize << 18;
        let step = 2.0 * span / (n - 1) as f64;
        let beta = 1.0 / (std::f64::consts::SQRT_2 * sigma);
        // E(x) = x*erf(x) + exp(-x^2)/sqrt(pi) is the antiderivative of erf.
        let e = |x: f64| x * libm::erf(x) + (-x * x).exp() / PI.sqrt();
        let values = (0..n)
            .map(|i| {
                let u = -span + i as f64 * step;
                0.25 + (std::f64::consts::SQRT_2 * sigma / 4.0)
                    * (e(beta * (u + 0.5)) - e(beta * (u - 0.5)))
            })
            .collect();
        Self {
            span,
            inv_step: 1.0 / step,
            values,
        }
    }

    #[inline]
    fn eval(&self, u: f64) -> f64 {
        if u <= -self.span {
            return 0.0;
        }
        if u >= self.span {
            return 0.5;
        }
        let x = (u + self.span) * self.inv_step;
        let i = x as usize;
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

fn gmsk_phase_pulse(bt: f64) -> Arc<GmskPhasePulse> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<GmskPhasePulse>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(bt.to_bits())
        .or_insert_with(|| Arc::new(GmskPhasePulse::build(bt)))
        .clone()
}

/// GMSK from an explicit bit sequence; unit amplitude.
///
/// Bits drive an NRZ train through a Gaussian filter whose integrated
/// frequency pulse is accumulated into phase with modulation index 0.5,
/// then `i[n] = exp(j*phi[n])`: the envelope is constant by construction.
pub fn gen_gmsk_from_bits(
    bits: &[bool],
    symbol_rate_hz: f64,
    bt_product: f64,
    sample_rate_hz: f64,
    n_samples: usize,
) -> Result<ComplexBaseband> {
    if !(bt_product > 0.0 && bt_product <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "BT product must be in (0, 1], got {bt_product}"
        )));
    }
    let pulse = gmsk_phase_pulse(bt_product);
    let t_bit = 1.0 / symbol_rate_hz;
    let span_bits = pulse.span.ceil();
    let needed =
        ((n_samples as f64 / sample_rate_hz) * symbol_rate_hz + 2.0 * span_bits).ceil() as usize;
    if bits.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "need at least {needed} bits to shape {n_samples} samples, got {}",
            bits.len()
        )));
    }
    let levels: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    // Prefix sums give the settled +-pi/2-per-bit phase of bits whose
    // pulse has fully passed.
    let mut prefix = Vec::with_capacity(levels.len() + 1);
    prefix.push(0.0f64);
    for &a in &levels {
        prefix.push(prefix.last().unwrap() + a);
    }
    let two_pi_h = 2.0 * PI * GMSK_MODULATION_INDEX;
    let samples = (0..n_samples)
        .map(|n| {
            let t = span_bits * t_bit + n as f64 / sample_rate_hz;
            let u0 = t / t_bit - 0.5; // offset to the center of bit 0
            let m_lo = ((u0 - pulse.span).ceil().max(0.0)) as usize;
            let m_hi = ((u0 + pulse.span).floor() as usize).min(levels.len() - 1);
            let mut q_sum = 0.5 * prefix[m_lo];
            for (m, &a) in levels[m_lo..=m_hi].iter().enumerate() {
                q_sum += a * pulse.eval(u0 - (m_lo + m) as f64);
            }
            Complex64::from_polar(1.0, two_pi_h * q_sum)
        })
        .collect();
    Ok(ComplexBaseband::new(samples, sample_rate_hz))
}

/// GMSK with random equiprobable bits; unit amplitude.
pub fn gen_gmsk(
    symbol_rate_hz: f64,
    bt_product: f64,
    duration_s: f64,
    sample_rate_hz: f64,
    rng: RngStream,
) -> Result<ComplexBaseband> {
    check_generator_preconditions(symbol_rate_hz, duration_s, sample_rate_hz)?;
    let n_samples = (duration_s * sample_rate_hz).round() as usize;
    let span = 0.5 + 6.0 * (2.0f64.ln()).sqrt() / (2.0 * PI * bt_product);
    let n_bits = (duration_s * symbol_rate_hz + 2.0 * span.ceil()).ceil() as usize + 1;
    let bits = draw_bits(n_bits, &mut rng.rng());
    gen_gmsk_from_bits(&bits, symbol_rate_hz, bt_product, sample_rate_hz, n_samples)
}

/// Complex white Gaussian noise: i.i.d. CN with variance `power_mw / 2`
/// per real dimension, so the mean power converges to `power_mw`.
pub fn gen_awgn(
    n_samples: usize,
    power_mw: f64,
    sample_rate_hz: f64,
    rng: RngStream,
) -> ComplexBaseband {
    let sigma = (power_mw / 2.0).sqrt();
    let mut r = rng.rng();
    let samples = (0..n_samples)
        .map(|_| {
            let re: f64 = r.sample(StandardNormal);
            let im: f64 = r.sample(StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    ComplexBaseband::new(samples, sample_rate_hz)
}

/// Scales a waveform so its time-mean power equals `target_mw`.
pub fn normalize_power(w: &ComplexBaseband, target_mw: f64) -> Result<ComplexBaseband> {
    if !(target_mw > 0.0) || !target_mw.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target power must be positive and finite, got {target_mw} mW"
        )));
    }
    let mean = w.mean_power_mw();
    if mean == 0.0 {
        return Err(Error::ZeroEnergyWaveform);
    }
    let scale = (target_mw / mean).sqrt();
    Ok(ComplexBaseband::new(
        w.samples.iter().map(|s| s * scale).collect(),
        w.sample_rate_hz,
    ))
}

/// Multiplies sample `n` by `exp(j*2*pi*delta_f*n / sample_rate)`.
///
/// The phase is reduced modulo one turn before evaluation, so long
/// waveforms and aliasing offsets stay exact.
pub fn apply_freq_offset(w: &ComplexBaseband, delta_f_hz: f64) -> ComplexBaseband {
    let ratio = delta_f_hz / w.sample_rate_hz;
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let turns = ratio * n as f64;
            s * Complex64::from_polar(1.0, 2.0 * PI * (turns - turns.floor()))
        })
        .collect();
    ComplexBaseband::new(samples, w.sample_rate_hz)
}

/// Contiguous `n_samples`-long slice starting at a uniformly random index.
pub fn random_segment(
    w: &ComplexBaseband,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ComplexBaseband> {
    if n_samples > w.len() {
        return Err(Error::SegmentTooLong {
            requested: n_samples,
            available: w.len(),
        });
    }
    let start = rng.random_range(0..=w.len() - n_samples);
    Ok(ComplexBaseband::new(
        w.samples[start..start + n_samples].to_vec(),
        w.sample_rate_hz,
    ))
}
