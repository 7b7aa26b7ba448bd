//! Photon-stream synthesis and intensity-correlation estimation.
//!
//! Streams are sorted arrival timestamps from a single counter (no
//! beam-splitter), optionally filtered by a non-paralyzable dead time.
//! [`g2_estimate`] evaluates the binned correlation
//!
//! g²(τ) = Σᵢ nᵢ·nᵢ₊τ / (Σᵢ nᵢ)² · (i_max − τ),  sums over i = 1..i_max−τ,
//!
//! as written, including the same-bin self-pairs at τ = 0. At realistic
//! counts per bin the τ = 0 lag is therefore dominated by shot noise
//! (1 + 1/n̄ for coherent light); the physical zero-delay value is the
//! τ → 0 limit read from the first nonzero lag, see [`g2_zero_limit`].

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Sorted photon arrival times on [0, duration).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStream {
    pub timestamps: Vec<f64>,
    pub duration: f64,
    pub seed: u64,
}

impl PhotonStream {
    /// Validating constructor for externally supplied timestamps.
    pub fn from_timestamps(timestamps: Vec<f64>, duration: f64, seed: u64) -> Result<Self> {
        if duration <= 0.0 || duration.is_nan() {
            return Err(Error::domain(format!(
                "duration must be > 0, got {duration}"
            )));
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::domain(format!(
                    "timestamps must be strictly increasing (violated at index {})",
                    i + 1
                )));
            }
        }
        if timestamps.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::domain("timestamps must be non-negative"));
        }
        if timestamps.last().is_some_and(|&t| t >= duration) {
            return Err(Error::domain("timestamps must lie below the duration"));
        }
        Ok(PhotonStream {
            timestamps,
            duration,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Counts per consecutive bin of width `bin_width`, right-open intervals
/// [k·w, (k+1)·w).
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    pub bin_width: f64,
    pub counts: Vec<u32>,
    pub i_max: usize,
}

/// Correlation estimate over integer bin lags.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Result {
    /// Lag times, integer multiples of the bin width, s.
    pub tau: Vec<f64>,
    /// Estimated g² per lag; NaN where undefined.
    pub g2: Vec<f64>,
    /// False where the truncated denominator sum was zero.
    pub defined: Vec<bool>,
}

impl G2Result {
    /// CSV export with header `tau_s,g2,defined_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,g2,defined_flag\n");
        for i in 0..self.tau.len() {
            out.push_str(&format!(
                "{:?},{:?},{}\n",
                self.tau[i],
                self.g2[i],
                u8::from(self.defined[i])
            ));
        }
        out
    }
}

/// The τ → 0 limit of the correlation: g² at the first defined nonzero
/// lag. This is the quantity quoted as g²(0) for measured light; the
/// raw τ = 0 lag carries the same-bin shot-noise term.
pub fn g2_zero_limit(result: &G2Result) -> Option<f64> {
    result
        .tau
        .iter()
        .zip(result.g2.iter().zip(&result.defined))
        .find(|(&tau, (_, &defined))| tau > 0.0 && defined)
        .map(|(_, (&g2, _))| g2)
}

fn check_rate_duration(rate: f64, duration: f64) -> Result<()> {
    if rate <= 0.0 || rate.is_nan() {
        return Err(Error::domain(format!("rate must be > 0, got {rate}")));
    }
    if duration <= 0.0 || duration.is_nan() {
        return Err(Error::domain(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    Ok(())
}

/// Homogeneous Poisson stream, reproducible per seed.
pub fn gen_poisson(rate: f64, duration: f64, seed: u64) -> Result<PhotonStream> {
    check_rate_duration(rate, duration)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let gaps = Exp::new(rate).expect("rate checked positive");
    let mut timestamps = Vec::with_capacity((rate * duration * 1.01) as usize + 16);
    let mut t = gaps.sample(&mut rng);
    while t < duration {
        timestamps.push(t);
        t += gaps.sample(&mut rng);
    }
    Ok(PhotonStream {
        timestamps,
        duration,
        seed,
    })
}

/// Inhomogeneous Poisson stream with intensity
/// rate·(1 + depth·sin(2π·mod_freq·t)), generated by thinning.
pub fn gen_modulated(
    rate: f64,
    mod_freq: f64,
    depth: f64,
    duration: f64,
    seed: u64,
) -> Result<PhotonStream> {
    check_rate_duration(rate, duration)?;
    if !(0.0..=1.0).contains(&depth) {
        return Err(Error::domain(format!(
            "modulation depth must lie in [0, 1], got {depth}"
        )));
    }
    if mod_freq < 0.0 {
        return Err(Error::domain(format!(
            "modulation frequency must be >= 0, got {mod_freq}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let rate_max = rate * (1.0 + depth);
    let gaps = Exp::new(rate_max).expect("rate checked positive");
    let mut timestamps = Vec::with_capacity((rate * duration * 1.01) as usize + 16);
    let mut t = gaps.sample(&mut rng);
    while t < duration {
        let intensity = rate * (1.0 + depth * (std::f64::consts::TAU * mod_freq * t).sin());
        if rng.random::<f64>() * rate_max < intensity {
            timestamps.push(t);
        }
        t += gaps.sample(&mut rng);
    }
    Ok(PhotonStream {
        timestamps,
        duration,
        seed,
    })
}

/// Doubly stochastic (thermal) stream: piecewise-constant intensity drawn
/// from an exponential distribution, refreshed every `coherence_time`.
///
/// For bins much shorter than the coherence time the intensity statistics
/// give g²(0) → 2; the correlation decays to 1 on the coherence timescale
/// as 1 + max(0, 1 − τ/T_c).
pub fn gen_thermal(
    rate: f64,
    coherence_time: f64,
    duration: f64,
    seed: u64,
) -> Result<PhotonStream> {
    check_rate_duration(rate, duration)?;
    if coherence_time <= 0.0 || coherence_time.is_nan() {
        return Err(Error::domain(format!(
            "coherence time must be > 0, got {coherence_time}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let intensity_dist = Exp::new(1.0 / rate).expect("rate checked positive");
    let mut timestamps = Vec::with_capacity((rate * duration * 1.2) as usize + 16);
    let mut segment_start = 0.0;
    while segment_start < duration {
        let segment_end = (segment_start + coherence_time).min(duration);
        let intensity: f64 = intensity_dist.sample(&mut rng);
        if intensity > 0.0 {
            let gaps = Exp::new(intensity).expect("intensity positive");
            let mut t = segment_start + gaps.sample(&mut rng);
            while t < segment_end {
                timestamps.push(t);
                t += gaps.sample(&mut rng);
            }
        }
        segment_start += coherence_time;
    }
    Ok(PhotonStream {
        timestamps,
        duration,
        seed,
    })
}

/// Non-paralyzable dead time: an event is kept iff it arrives at least
/// `dead_time` after the last kept event. Idempotent.
pub fn apply_dead_time(stream: &PhotonStream, dead_time: f64) -> Result<PhotonStream> {
    if dead_time < 0.0 {
        return Err(Error::domain(format!(
            "dead time must be >= 0, got {dead_time}"
        )));
    }
    let mut kept = Vec::with_capacity(stream.timestamps.len());
    let mut last = f64::NEG_INFINITY;
    for &t in &stream.timestamps {
        if t - last >= dead_time {
            kept.push(t);
            last = t;
        }
    }
    Ok(PhotonStream {
        timestamps: kept,
        duration: stream.duration,
        seed: stream.seed,
    })
}

/// Histogram the stream into fixed-width bins covering [0, duration).
pub fn bin_counts(stream: &PhotonStream, bin_width: f64) -> Result<BinnedCounts> {
    if bin_width <= 0.0 || bin_width.is_nan() {
        return Err(Error::domain(format!(
            "bin width must be > 0, got {bin_width}"
        )));
    }
    let i_max = (stream.duration / bin_width).ceil() as usize;
    let i_max = i_max.max(1);
    let mut counts = vec![0u32; i_max];
    for &t in &stream.timestamps {
        let idx = ((t / bin_width) as usize).min(i_max - 1);
        counts[idx] += 1;
    }
    Ok(BinnedCounts {
        bin_width,
        counts,
        i_max,
    })
}

/// Binned correlation estimate for lags 0..=`tau_max_bins`.
///
/// Lags whose truncated denominator sum is zero are flagged undefined
/// rather than raising an error.
pub fn g2_estimate(bins: &BinnedCounts, tau_max_bins: usize) -> Result<G2Result> {
    let i_max = bins.i_max;
    if tau_max_bins >= i_max {
        return Err(Error::domain(format!(
            "tau_max_bins ({tau_max_bins}) must be below the bin count ({i_max})"
        )));
    }
    // suffix sums give the truncated denominator for every lag in O(1)
    let total: f64 = bins.counts.iter().map(|&c| c as f64).sum();
    let mut tail = Vec::with_capacity(tau_max_bins + 1);
    tail.push(0.0);
    for lag in 1..=tau_max_bins {
        tail.push(tail[lag - 1] + bins.counts[i_max - lag] as f64);
    }

    let lags: Vec<(f64, bool)> = (0..=tau_max_bins)
        .into_par_iter()
        .map(|lag| {
            let terms = i_max - lag;
            let numerator: f64 = (0..terms)
                .map(|i| bins.counts[i] as f64 * bins.counts[i + lag] as f64)
                .sum();
            let partial = total - tail[lag];
            if partial == 0.0 {
                (f64::NAN, false)
            } else {
                (numerator / (partial * partial) * terms as f64, true)
            }
        })
        .collect();

    Ok(G2Result {
        tau: (0..=tau_max_bins)
            .map(|lag| lag as f64 * bins.bin_width)
            .collect(),
        g2: lags.iter().map(|&(g, _)| g).collect(),
        defined: lags.iter().map(|&(_, d)| d).collect(),
    })
}

/// Read a time-tag file: one arrival time in seconds per line. The stream
/// duration is the smallest value above the last timestamp unless
/// overridden.
pub fn read_timetags(path: impl AsRef<Path>, duration: Option<f64>) -> Result<PhotonStream> {
    let text = std::fs::read_to_string(path)?;
    let mut timestamps = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let t: f64 = trimmed.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("not a number: {trimmed:?}"),
        })?;
        if let Some(&last) = timestamps.last() {
            if t <= last {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("timestamps must be strictly increasing ({t} after {last})"),
                });
            }
        } else if t < 0.0 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("negative timestamp {t}"),
            });
        }
        timestamps.push(t);
    }
    let duration = match duration {
        Some(d) => d,
        None => timestamps
            .last()
            .copied()
            .unwrap_or(0.0)
            .next_up()
            .max(1e-12),
    };
    PhotonStream::from_timestamps(timestamps, duration, 0)
}

/// Serialise a stream in the time-tag format.
pub fn write_timetags(stream: &PhotonStream) -> String {
    let mut out = String::new();
    for t in &stream.timestamps {
        out.push_str(&format!("{t:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_count_and_determinism() {
        let rate = 1e5;
        let duration = 2.0;
        let a = gen_poisson(rate, duration, 7).unwrap();
        let b = gen_poisson(rate, duration, 7).unwrap();
        assert_eq!(a.timestamps, b.timestamps);
        let expect = rate * duration;
        let dev = (a.len() as f64 - expect).abs();
        assert!(dev < 4.0 * expect.sqrt(), "count {} vs {expect}", a.len());
        let c = gen_poisson(rate, duration, 8).unwrap();
        assert_ne!(a.timestamps, c.timestamps);
    }

    #[test]
    fn poisson_gaps_pass_ks_test() {
        let rate = 5e4;
        let stream = gen_poisson(rate, 2.0, 42).unwrap();
        let mut gaps: Vec<f64> = stream.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let cdf = 1.0 - (-rate * g).exp();
                let lo = i as f64 / n;
                let hi = (i + 1) as f64 / n;
                (cdf - lo).abs().max((hi - cdf).abs())
            })
            .fold(0.0, f64::max);
        // KS critical value at significance 0.01
        let critical = 1.63 / n.sqrt();
        assert!(d < critical, "KS statistic {d} over critical {critical}");
    }

    #[test]
    fn modulated_zero_depth_is_plain_poisson_rate() {
        let stream = gen_modulated(1e5, 1e4, 0.0, 2.0, 3).unwrap();
        let expect = 1e5 * 2.0;
        let dev = (stream.len() as f64 - expect).abs();
        assert!(dev < 4.0 * expect.sqrt());
    }

    #[test]
    fn modulated_invalid_depth_rejected() {
        assert!(gen_modulated(1e5, 1e4, -0.1, 1.0, 0).is_err());
        assert!(gen_modulated(1e5, 1e4, 1.1, 1.0, 0).is_err());
    }

    #[test]
    fn thermal_zero_lag_approaches_two() {
        let stream = gen_thermal(1e5, 1e-3, 60.0, 11).unwrap();
        let bins = bin_counts(&stream, 5e-5).unwrap();
        let g2 = g2_estimate(&bins, 4).unwrap();
        let zero = g2_zero_limit(&g2).unwrap();
        assert!((zero - 2.0).abs() < 0.1, "thermal g2(0) = {zero}");
    }

    #[test]
    fn thermal_decays_on_coherence_timescale() {
        let coherence = 1e-3;
        let bin = 1e-4;
        let stream = gen_thermal(2e5, coherence, 120.0, 5).unwrap();
        let bins = bin_counts(&stream, bin).unwrap();
        let g2 = g2_estimate(&bins, 30).unwrap();
        // piecewise-constant intensity: g2(tau) = 1 + max(0, 1 - tau/T_c)
        for (i, (&tau, &val)) in g2.tau.iter().zip(&g2.g2).enumerate() {
            if i == 0 {
                continue;
            }
            let expect = 1.0 + (1.0 - tau / coherence).max(0.0);
            assert!(
                (val - expect).abs() < 0.12,
                "g2({tau}) = {val}, expected {expect}"
            );
        }
    }

    #[test]
    fn thermal_long_bins_average_to_coherent() {
        let stream = gen_thermal(2e5, 1e-4, 60.0, 9).unwrap();
        let bins = bin_counts(&stream, 5e-3).unwrap();
        let g2 = g2_estimate(&bins, 3).unwrap();
        let zero = g2_zero_limit(&g2).unwrap();
        assert!((zero - 1.0).abs() < 0.05, "averaged g2(0) = {zero}");
    }

    #[test]
    fn dead_time_basics() {
        let empty = PhotonStream {
            timestamps: vec![],
            duration: 1.0,
            seed: 0,
        };
        assert!(apply_dead_time(&empty, 22e-9).unwrap().is_empty());

        let pair = PhotonStream {
            timestamps: vec![1e-6, 1e-6 + 10e-9],
            duration: 1.0,
            seed: 0,
        };
        let filtered = apply_dead_time(&pair, 22e-9).unwrap();
        assert_eq!(filtered.timestamps, vec![1e-6]);
    }

    #[test]
    fn dead_time_minimum_gap_and_idempotence() {
        let stream = gen_poisson(2e6, 0.5, 21).unwrap();
        let dead = 22e-9;
        let once = apply_dead_time(&stream, dead).unwrap();
        for w in once.timestamps.windows(2) {
            assert!(w[1] - w[0] >= dead);
        }
        let twice = apply_dead_time(&once, dead).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn binning_preserves_totals_and_edges() {
        // 0.25-wide bins have exactly representable edges
        let stream = PhotonStream {
            timestamps: vec![0.0, 0.25, 0.5, 0.5000001, 0.9],
            duration: 1.0,
            seed: 0,
        };
        let bins = bin_counts(&stream, 0.25).unwrap();
        assert_eq!(bins.i_max, 4);
        assert_eq!(bins.counts.iter().sum::<u32>() as usize, stream.len());
        // exact edges land in the right-open interval to their right
        assert_eq!(bins.counts, vec![1, 1, 2, 1]);

        let single = bin_counts(&stream, 2.0).unwrap();
        assert_eq!(single.i_max, 1);
        assert_eq!(single.counts[0] as usize, stream.len());
    }

    #[test]
    fn g2_toy_example_exact() {
        let bins = BinnedCounts {
            bin_width: 1.0,
            counts: vec![1, 2, 1, 0],
            i_max: 4,
        };
        let g2 = g2_estimate(&bins, 2).unwrap();
        assert_eq!(g2.g2[0], 1.5);
        assert_eq!(g2.g2[1], 0.75);
        assert!(g2.defined[0] && g2.defined[1]);
    }

    #[test]
    fn g2_scaling_invariance() {
        let counts: Vec<u32> = vec![1, 2, 1, 0, 3, 1, 0, 2, 2, 1];
        let bins = BinnedCounts {
            bin_width: 1.0,
            counts: counts.clone(),
            i_max: counts.len(),
        };
        let scaled = BinnedCounts {
            bin_width: 1.0,
            counts: counts.iter().map(|c| c * 3).collect(),
            i_max: counts.len(),
        };
        let a = g2_estimate(&bins, 5).unwrap();
        let b = g2_estimate(&scaled, 5).unwrap();
        assert_eq!(a.g2, b.g2);
    }

    #[test]
    fn g2_undefined_tail_flagged() {
        let bins = BinnedCounts {
            bin_width: 1.0,
            counts: vec![0, 0, 1, 1],
            i_max: 4,
        };
        // lag 3 sums only the first bin, which is empty
        let g2 = g2_estimate(&bins, 3).unwrap();
        assert!(!g2.defined[3]);
        assert!(g2.g2[3].is_nan());
        assert!(g2_estimate(&bins, 4).is_err());
    }

    #[test]
    fn poisson_g2_flat_at_unity() {
        let stream = gen_poisson(1e6, 3.0, 17).unwrap();
        let bins = bin_counts(&stream, 300e-9).unwrap();
        let g2 = g2_estimate(&bins, 20).unwrap();
        for lag in 1..=20 {
            assert!(
                (g2.g2[lag] - 1.0).abs() < 0.05,
                "g2 at lag {lag} = {}",
                g2.g2[lag]
            );
        }
        // the raw zero lag carries the shot-noise term 1 + 1/n̄
        let mean = 1e6 * 300e-9;
        assert!((g2.g2[0] - (1.0 + 1.0 / mean)).abs() < 0.2);
    }

    #[test]
    fn dead_time_bias_pushes_g2_below_one() {
        let stream = gen_poisson(1.5e6, 2.0, 33).unwrap();
        let filtered = apply_dead_time(&stream, 22e-9).unwrap();
        let bins = bin_counts(&filtered, 30e-9).unwrap();
        let g2 = g2_estimate(&bins, 5).unwrap();
        let zero = g2_zero_limit(&g2).unwrap();
        assert!(zero < 1.0, "dead-time-biased g2(0) = {zero}");
    }

    #[test]
    fn timetag_round_trip_and_errors() {
        let stream = gen_poisson(1e4, 0.1, 3).unwrap();
        let text = write_timetags(&stream);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tags.txt");
        std::fs::write(&path, &text).unwrap();
        let back = read_timetags(&path, Some(stream.duration)).unwrap();
        assert_eq!(back.timestamps, stream.timestamps);

        std::fs::write(&path, "1.0\nbogus\n").unwrap();
        match read_timetags(&path, None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }

        std::fs::write(&path, "1.0\n0.5\n").unwrap();
        assert!(read_timetags(&path, None).is_err());
    }
}
