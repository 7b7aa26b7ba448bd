//! Heterodyne beatnote synthesis, power spectral density estimation,
//! Lorentzian linewidth fitting and the transport Doppler relations.
//!
//! The synthetic beatnote carries Wiener phase noise: independent Gaussian
//! phase increments of variance 2π·FWHM·dt produce an exactly Lorentzian
//! line of the requested full width, which is also the model the fit
//! assumes.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Complex baseband record of a beatnote at nominal frequency `f0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace {
    /// Samples per second; must exceed 2·f0.
    pub sample_rate: f64,
    pub samples: Vec<Complex64>,
    /// Nominal beat frequency, Hz.
    pub f0: f64,
    pub seed: u64,
}

/// One-sided averaged periodogram on a shifted frequency grid
/// (−fs/2 … fs/2), strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq: Vec<f64>,
    pub psd: Vec<f64>,
    /// Equivalent noise bandwidth of the analysis window, Hz.
    pub resolution_bandwidth: f64,
}

impl Spectrum {
    /// CSV export with header `freq_hz,psd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,psd\n");
        for (f, p) in self.freq.iter().zip(&self.psd) {
            out.push_str(&format!("{f:?},{p:?}\n"));
        }
        out
    }
}

/// Lorentzian line fit result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub f_center: f64,
    pub fwhm: f64,
    /// RMS residual of the fit window, normalised to the peak amplitude.
    pub residual: f64,
    /// True when the fitted width is within twice the resolution
    /// bandwidth, i.e. the line is not resolved.
    pub resolution_limited: bool,
}

/// Doppler splitting between the two emission directions for a moving
/// source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerSplitting {
    /// cw/ccw frequency difference, Hz.
    pub delta_f: f64,
    /// Set when the transport speed exceeds the validity bound of the
    /// rigid-transport picture (1 cm/s).
    pub out_of_model: bool,
}

/// Synthesise a unit-amplitude beatnote with Wiener phase noise giving a
/// Lorentzian line of the requested FWHM.
pub fn synth_field(
    fwhm: f64,
    f0: f64,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<FieldTrace> {
    if fwhm < 0.0 {
        return Err(Error::domain(format!("linewidth must be >= 0, got {fwhm}")));
    }
    if duration <= 0.0 || duration.is_nan() {
        return Err(Error::domain(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    if sample_rate.is_nan() || sample_rate <= 2.0 * f0.abs() || sample_rate <= 0.0 {
        return Err(Error::domain(format!(
            "sample rate {sample_rate} must exceed twice the beat frequency {f0}"
        )));
    }
    let n = (duration * sample_rate).round() as usize;
    if n == 0 {
        return Err(Error::domain("duration shorter than one sample"));
    }
    let dt = 1.0 / sample_rate;
    let sigma = (std::f64::consts::TAU * fwhm * dt).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(n);
    let mut phase = 0.0_f64;
    for k in 0..n {
        let t = k as f64 * dt;
        let total = std::f64::consts::TAU * f0 * t + phase;
        samples.push(Complex64::new(total.cos(), total.sin()));
        if sigma > 0.0 {
            phase += sigma * noise.sample(&mut rng);
        }
    }
    Ok(FieldTrace {
        sample_rate,
        samples,
        f0,
        seed,
    })
}

/// Averaged Hann-windowed periodogram (Welch). `segment_length` must be
/// even and no longer than the trace; `overlap` is the fractional segment
/// overlap in [0, 0.9].
pub fn estimate_psd(trace: &FieldTrace, segment_length: usize, overlap: f64) -> Result<Spectrum> {
    let n = trace.samples.len();
    if segment_length < 16 || !segment_length.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "segment length must be even and at least 16, got {segment_length}"
        )));
    }
    if segment_length > n {
        return Err(Error::domain(format!(
            "segment length {segment_length} exceeds trace length {n}"
        )));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(Error::domain(format!(
            "overlap must lie in [0, 0.9], got {overlap}"
        )));
    }
    let fs = trace.sample_rate;
    let len = segment_length;
    let hop = ((len as f64) * (1.0 - overlap)).round().max(1.0) as usize;

    // periodic Hann window
    let window: Vec<f64> = (0..len)
        .map(|k| 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / len as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let window_sum: f64 = window.iter().sum();
    let resolution_bandwidth = fs * window_power / (window_sum * window_sum);

    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut acc = vec![0.0_f64; len];
    let mut buf = vec![Complex64::default(); len];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + len <= n {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = trace.samples[start + k] * window[k];
        }
        fft.process(&mut buf);
        for (k, value) in buf.iter().enumerate() {
            acc[k] += value.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    debug_assert!(segments > 0);
    let scale = 1.0 / (fs * window_power * segments as f64);

    // shift so the frequency axis runs −fs/2 … fs/2 − df
    let half = len / 2;
    let df = fs / len as f64;
    let mut freq = Vec::with_capacity(len);
    let mut psd = Vec::with_capacity(len);
    for j in 0..len {
        freq.push((j as f64 - half as f64) * df);
        psd.push(acc[(j + half) % len] * scale);
    }
    Ok(Spectrum {
        freq,
        psd,
        resolution_bandwidth,
    })
}

/// Least-squares fit of a Lorentzian plus constant floor to a spectrum
/// containing a single dominant peak.
pub fn fit_lorentzian_fwhm(spectrum: &Spectrum) -> Result<LorentzianFit> {
    let n = spectrum.psd.len();
    if n < 32 {
        return Err(Error::Fit(format!("spectrum has only {n} points")));
    }
    // peak and half-max run are detected on a lightly smoothed copy so
    // estimation noise on the line itself cannot break the run; the fit
    // runs on the raw data
    let smooth_half = 4usize.min(n / 64);
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(smooth_half);
            let hi = (i + smooth_half).min(n - 1);
            spectrum.psd[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let peak_idx = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Fit("empty spectrum".into()))?;
    let peak = smooth[peak_idx];
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::Fit("no peak above zero power".into()));
    }
    let mut sorted = smooth.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[n / 4];
    let half_level = floor + 0.5 * (peak - floor);

    // contiguous half-max run around the peak
    let mut lo = peak_idx;
    while lo > 0 && smooth[lo - 1] > half_level {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < n && smooth[hi + 1] > half_level {
        hi += 1;
    }
    // fewer than ~10 points above half maximum means the line is not
    // resolved by the analysis bandwidth; fit it anyway over a fixed
    // window so resolution-limited tones report a width and a flag
    // instead of failing
    let run = hi - lo + 1;
    let resolved = run >= 10;
    // a comparable maximum outside the run means the peak is not unique
    let guard = 2 + 2 * smooth_half;
    let rival = smooth
        .iter()
        .enumerate()
        .filter(|(i, _)| i + guard < lo || *i > hi + guard)
        .map(|(_, &p)| p)
        .fold(0.0, f64::max);
    if rival > floor + 0.8 * (peak - floor) {
        return Err(Error::Fit(
            "spectrum does not contain a single dominant peak".into(),
        ));
    }

    let df = spectrum.freq[1] - spectrum.freq[0];
    let raw_peak = spectrum.psd[lo..=hi].iter().copied().fold(0.0, f64::max);
    let mut amp = raw_peak - floor;
    let mut center = spectrum.freq[peak_idx];
    let mut width = if resolved {
        (run as f64) * df
    } else {
        spectrum.resolution_bandwidth.max(df)
    };
    let mut offset = floor;

    // fit window: ±10 widths around the run, clamped to the grid
    let pad = if resolved {
        (10.0 * width / df).ceil() as usize
    } else {
        64
    };
    let w_lo = lo.saturating_sub(pad);
    let w_hi = (hi + pad).min(n - 1);
    let xs = &spectrum.freq[w_lo..=w_hi];
    let ys = &spectrum.psd[w_lo..=w_hi];

    let sse = |a: f64, f0: f64, w: f64, c: f64| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let u = (x - f0) / (w / 2.0);
                let r = y - (a / (1.0 + u * u) + c);
                r * r
            })
            .sum()
    };

    // Levenberg-Marquardt with analytic Jacobian
    let mut lambda = 1e-3;
    let mut best = sse(amp, center, width, offset);
    for _ in 0..200 {
        let mut jtj = [[0.0_f64; 4]; 4];
        let mut jtr = [0.0_f64; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let u = (x - center) / (width / 2.0);
            let d = 1.0 + u * u;
            let model = amp / d + offset;
            let r = y - model;
            let j = [
                1.0 / d,
                amp * 4.0 * u / (width * d * d),
                amp * 2.0 * u * u / (width * d * d),
                1.0,
            ];
            for (a, &ja) in j.iter().enumerate() {
                jtr[a] += ja * r;
                for (b, &jb) in j.iter().enumerate() {
                    jtj[a][b] += ja * jb;
                }
            }
        }
        for (a, row) in jtj.iter_mut().enumerate() {
            row[a] *= 1.0 + lambda;
        }
        let Some(delta) = solve4(jtj, jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = (
            amp + delta[0],
            center + delta[1],
            width + delta[2],
            offset + delta[3],
        );
        // widths below the grid spacing are unresolvable
        if !trial.2.is_finite() || trial.2.abs() < 0.9 * df {
            lambda *= 10.0;
            continue;
        }
        let cost = sse(trial.0, trial.1, trial.2, trial.3);
        if cost < best {
            let converged = (best - cost) <= 1e-12 * best.max(f64::MIN_POSITIVE)
                || delta[2].abs() <= 1e-9 * width.abs();
            amp = trial.0;
            center = trial.1;
            width = trial.2;
            offset = trial.3;
            best = cost;
            lambda = (lambda / 3.0).max(1e-12);
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    let fwhm = width.abs();
    if fwhm <= 0.0 || !fwhm.is_finite() || amp.is_nan() || amp <= 0.0 {
        return Err(Error::Fit(format!(
            "fit collapsed: amplitude {amp}, width {width}"
        )));
    }
    let residual = (best / xs.len() as f64).sqrt() / amp;
    Ok(LorentzianFit {
        f_center: center,
        fwhm,
        residual,
        resolution_limited: fwhm < 2.0 * spectrum.resolution_bandwidth,
    })
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (k, slot) in lower[0].iter_mut().enumerate().skip(col) {
                *slot -= factor * upper[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut sum = b[col];
        for k in col + 1..4 {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Some(x)
}

/// Lattice transport velocity from the lattice-beam frequency offset:
/// v_t = δ_t·λ_813.
pub fn transport_velocity(delta_t: f64) -> f64 {
    delta_t * PhysicalConstants::SR88.lambda_813
}

/// Validity bound of the rigid-transport Doppler relation, m/s.
pub const DOPPLER_MODEL_BOUND: f64 = 1e-2;

/// cw/ccw frequency difference 2·v_t/λ_689 for emission from a source
/// moving along the cavity axis at `v_t`. Flagged out-of-model above
/// [`DOPPLER_MODEL_BOUND`], where the atoms no longer follow the lattice.
pub fn doppler_difference(v_t: f64) -> DopplerSplitting {
    DopplerSplitting {
        delta_f: 2.0 * v_t / PhysicalConstants::SR88.lambda_689,
        out_of_model: v_t.abs() > DOPPLER_MODEL_BOUND,
    }
}

/// Binary field export: one text header line `sample_rate f0 length`,
/// then interleaved little-endian float32 (re, im) samples.
pub fn write_field(path: impl AsRef<Path>, trace: &FieldTrace) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        file,
        "{:?} {:?} {}",
        trace.sample_rate,
        trace.f0,
        trace.samples.len()
    )?;
    for s in &trace.samples {
        file.write_all(&(s.re as f32).to_le_bytes())?;
        file.write_all(&(s.im as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Read a binary field trace written by [`write_field`].
pub fn read_field(path: impl AsRef<Path>) -> Result<FieldTrace> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        file.read_exact(&mut byte).map_err(|_| Error::Parse {
            line: 1,
            msg: "missing field header".into(),
        })?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
    }
    let header = String::from_utf8_lossy(&header);
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("field header needs `sample_rate f0 length`, got {header:?}"),
        });
    }
    let parse = |s: &str, what: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse {
            line: 1,
            msg: format!("bad {what} in field header: {s:?}"),
        })
    };
    let sample_rate = parse(parts[0], "sample rate")?;
    let f0 = parse(parts[1], "beat frequency")?;
    let length = parse(parts[2], "length")? as usize;
    let mut raw = vec![0u8; length * 8];
    file.read_exact(&mut raw).map_err(|_| Error::Parse {
        line: 1,
        msg: format!("field body truncated; expected {length} complex samples"),
    })?;
    let samples = raw
        .chunks_exact(8)
        .map(|chunk| {
            let re = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
            let im = f32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]) as f64;
            Complex64::new(re, im)
        })
        .collect();
    Ok(FieldTrace {
        sample_rate,
        samples,
        f0,
        seed: 0,
    })
}
