//! Time-domain filter-and-sum processing and anechoic scene synthesis.

mod scene;
pub mod wav;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::array::{ArrayGeometry, Direction};
use crate::error::{Error, Result};
use crate::fir::BeamformerFilters;
use crate::hrtf::HrtfDataset;
use crate::steering::plane_wave_delays;

pub use scene::{SceneSpec, SignalSource, SourceSpec};

/// Multichannel real signal, `[channel][time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: f64,
    channels: Vec<Vec<f64>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let Some(first) = channels.first() else {
            return Err(Error::invalid("audio buffer needs at least one channel"));
        };
        if channels.iter().any(|c| c.len() != first.len()) {
            return Err(Error::invalid("audio channels differ in length"));
        }
        for (c, ch) in channels.iter().enumerate() {
            if let Some(k) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "channel {c} sample {k} is not finite"
                )));
            }
        }
        Ok(AudioBuffer {
            sample_rate,
            channels,
        })
    }

    pub fn mono(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }
}

pub(crate) fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Full linear convolution, length `x.len() + h.len() − 1`.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let n = x.len() + h.len() - 1;
    if x.len().min(h.len()) <= 64 {
        let (long, short) = if x.len() >= h.len() { (x, h) } else { (h, x) };
        let mut y = vec![0.0; n];
        for (j, &s) in short.iter().enumerate() {
            for (yk, &l) in y[j..j + long.len()].iter_mut().zip(long) {
                *yk += s * l;
            }
        }
        return y;
    }
    let nfft = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let mut a = padded(x, nfft);
    let mut b = padded(h, nfft);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    a[..n].iter().map(|c| c.re / nfft as f64).collect()
}

fn padded(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (c, &r) in v.iter_mut().zip(x) {
        c.re = r;
    }
    v
}

/// `y[k] = Σ_n Σ_l w_{n,l} x_n[k − l]`, full length `T + L − 1`.
pub fn filter_and_sum(bf: &BeamformerFilters, x: &AudioBuffer) -> Result<AudioBuffer> {
    if x.num_channels() != bf.num_mics() {
        return Err(Error::invalid(format!(
            "signal has {} channels, filters expect {}",
            x.num_channels(),
            bf.num_mics()
        )));
    }
    if !same_rate(x.sample_rate(), bf.sample_rate()) {
        return Err(Error::invalid(format!(
            "signal sample rate {} Hz does not match filter rate {} Hz",
            x.sample_rate(),
            bf.sample_rate()
        )));
    }
    let n = x.len() + bf.len() - 1;
    let nfft = n.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let spectra: Vec<Vec<Complex64>> = x
        .channels()
        .par_iter()
        .zip(bf.taps().par_iter())
        .map(|(xc, w)| {
            let mut a = padded(xc, nfft);
            let mut b = padded(w, nfft);
            fwd.process(&mut a);
            fwd.process(&mut b);
            a.iter_mut().zip(&b).for_each(|(u, v)| *u *= v);
            a
        })
        .collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); nfft];
    for s in &spectra {
        acc.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }
    inv.process(&mut acc);
    AudioBuffer::mono(
        x.sample_rate(),
        acc[..n].iter().map(|c| c.re / nfft as f64).collect(),
    )
}

pub const FRACTIONAL_DELAY_TAPS: usize = 64;
/// Integer part of the delay every fractional-delay filter adds.
pub const FRACTIONAL_DELAY_BULK: usize = 32;
pub const KAISER_BETA: f64 = 8.0;
const MAX_FRACTIONAL_DELAY: f64 = 16.0;

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Kaiser-windowed sinc realizing a delay of `FRACTIONAL_DELAY_BULK + delay`
/// samples, `|delay| ≤ 16`. The window is centred on the delayed peak.
pub fn fractional_delay_filter(delay_samples: f64) -> Result<Vec<f64>> {
    if !(delay_samples.abs() <= MAX_FRACTIONAL_DELAY) {
        return Err(Error::invalid(format!(
            "relative delay of {delay_samples} samples exceeds ±{MAX_FRACTIONAL_DELAY}"
        )));
    }
    let centre = FRACTIONAL_DELAY_BULK as f64 + delay_samples;
    let half = centre.min((FRACTIONAL_DELAY_TAPS - 1) as f64 - centre);
    let norm = bessel_i0(KAISER_BETA);
    Ok((0..FRACTIONAL_DELAY_TAPS)
        .map(|k| {
            let t = k as f64 - centre;
            let r = t / half;
            if r.abs() > 1.0 {
                0.0
            } else {
                sinc(t) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
            }
        })
        .collect())
}

/// How sources reach the microphones.
#[derive(Debug, Clone, Copy)]
pub enum Acoustics<'a> {
    /// Plane waves, realized with fractional-delay filters.
    FreeField {
        geometry: &'a ArrayGeometry,
        sound_speed: f64,
    },
    /// Measured impulse responses; source directions must be grid nodes.
    Measured(&'a HrtfDataset),
}

impl Acoustics<'_> {
    pub fn geometry(&self) -> &ArrayGeometry {
        match self {
            Acoustics::FreeField { geometry, .. } => geometry,
            Acoustics::Measured(ds) => ds.geometry(),
        }
    }

    /// Per-microphone impulse responses for a source in `dir`.
    pub fn impulse_responses(&self, dir: &Direction, sample_rate: f64) -> Result<Vec<Vec<f64>>> {
        match self {
            Acoustics::FreeField {
                geometry,
                sound_speed,
            } => plane_wave_delays(geometry, dir, *sound_speed)
                .iter()
                .map(|t| fractional_delay_filter(t * sample_rate))
                .collect(),
            Acoustics::Measured(ds) => {
                if !same_rate(ds.sample_rate(), sample_rate) {
                    return Err(Error::invalid(format!(
                        "dataset sample rate {} Hz does not match scene rate {sample_rate} Hz",
                        ds.sample_rate()
                    )));
                }
                let m = ds.grid().index_of(dir).ok_or_else(|| {
                    Error::invalid(format!("source direction {dir} is not on the dataset grid"))
                })?;
                Ok((0..ds.geometry().num_mics())
                    .map(|n| ds.impulse_response(m, n).to_vec())
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderedScene {
    /// Sum of stems plus sensor noise.
    pub mix: AudioBuffer,
    /// One multichannel buffer per source, gain applied.
    pub stems: Vec<AudioBuffer>,
    pub noise: Option<AudioBuffer>,
    pub target_index: usize,
    pub frontmost_index: usize,
}

/// Renders every source at every microphone. `signals[i]` is the mono
/// signal of `scene.sources[i]`, already at the scene rate; it is cut or
/// zero-padded to the scene duration.
pub fn render_scene(
    scene: &SceneSpec,
    signals: &[Vec<f64>],
    acoustics: &Acoustics,
) -> Result<RenderedScene> {
    scene.validate()?;
    if signals.len() != scene.sources.len() {
        return Err(Error::invalid(format!(
            "{} signals given for {} sources",
            signals.len(),
            scene.sources.len()
        )));
    }
    let fs = scene.sample_rate_hz;
    let t = scene.num_samples();
    let geom = acoustics.geometry();
    let stems = scene
        .sources
        .iter()
        .zip(signals)
        .map(|(src, sig)| {
            let irs = acoustics.impulse_responses(&src.direction, fs)?;
            let gain = 10f64.powf(src.gain_db / 20.0);
            let mut x: Vec<f64> = sig.iter().take(t).map(|v| v * gain).collect();
            x.resize(t, 0.0);
            let chans = irs.par_iter().map(|h| convolve(&x, h)).collect();
            AudioBuffer::new(fs, chans)
        })
        .collect::<Result<Vec<_>>>()?;
    let len = stems[0].len();
    let nmics = geom.num_mics();
    let mut mix = vec![vec![0.0; len]; nmics];
    for stem in &stems {
        for (m, s) in mix.iter_mut().zip(stem.channels()) {
            m.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }
    let noise = match scene.sensor_noise_snr_db {
        None => None,
        Some(snr) => {
            let front = stems[scene.target_index].channel(geom.frontmost_index());
            let power = front.iter().map(|v| v * v).sum::<f64>() / front.len() as f64;
            if !(power > 0.0) {
                return Err(Error::invalid(
                    "sensor noise SNR is relative to a silent target",
                ));
            }
            let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
            let chans: Vec<Vec<f64>> = (0..nmics)
                .map(|_| {
                    (0..len)
                        .map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                        .collect::<Vec<f64>>()
                })
                .collect();
            for (m, s) in mix.iter_mut().zip(&chans) {
                m.iter_mut().zip(s).for_each(|(a, b)| *a += b);
            }
            Some(AudioBuffer::new(fs, chans)?)
        }
    };
    Ok(RenderedScene {
        mix: AudioBuffer::new(fs, mix)?,
        stems,
        noise,
        target_index: scene.target_index,
        frontmost_index: geom.frontmost_index(),
    })
}

/// Signal pairs for the intrusive metric: target and mixture at the
/// frontmost microphone, and both passed through the beamformer.
#[derive(Debug, Clone)]
pub struct ReferenceSignals {
    pub input_ref: Vec<f64>,
    pub input_test: Vec<f64>,
    pub output_ref: Vec<f64>,
    pub output_test: Vec<f64>,
}

pub fn reference_signals(
    scene: &RenderedScene,
    bf: &BeamformerFilters,
) -> Result<ReferenceSignals> {
    let target = &scene.stems[scene.target_index];
    Ok(ReferenceSignals {
        input_ref: target.channel(scene.frontmost_index).to_vec(),
        input_test: scene.mix.channel(scene.frontmost_index).to_vec(),
        output_ref: filter_and_sum(bf, target)?.into_channels().remove(0),
        output_test: filter_and_sum(bf, &scene.mix)?.into_channels().remove(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn direct_filter_and_sum(bf: &BeamformerFilters, x: &AudioBuffer) -> Vec<f64> {
        let n = x.len() + bf.len() - 1;
        let mut y = vec![0.0; n];
        for (xc, w) in x.channels().iter().zip(bf.taps()) {
            for k in 0..n {
                for (l, wl) in w.iter().enumerate() {
                    if k >= l && k - l < xc.len() {
                        y[k] += wl * xc[k - l];
                    }
                }
            }
        }
        y
    }

    #[test]
    fn buffer_validation() {
        assert!(AudioBuffer::new(16000.0, vec![]).is_err());
        assert!(AudioBuffer::new(16000.0, vec![vec![0.0; 3], vec![0.0; 2]]).is_err());
        assert!(AudioBuffer::new(0.0, vec![vec![0.0]]).is_err());
        assert!(AudioBuffer::new(16000.0, vec![vec![f64::NAN]]).is_err());
        let b = AudioBuffer::new(8000.0, vec![vec![1.0, 2.0]; 3]).unwrap();
        assert_eq!((b.num_channels(), b.len()), (3, 2));
    }

    #[test]
    fn identity_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = AudioBuffer::mono(16000.0, random_signal(&mut rng, 500)).unwrap();
        let mut taps = vec![0.0; 8];
        taps[0] = 1.0;
        let bf = BeamformerFilters::new(vec![taps], 0, 16000.0).unwrap();
        let y = filter_and_sum(&bf, &x).unwrap();
        assert_eq!(y.len(), 507);
        for (a, b) in y.channel(0).iter().zip(x.channel(0)) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(y.channel(0)[500..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn averaging_identical_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_signal(&mut rng, 300);
        let x = AudioBuffer::new(16000.0, vec![s.clone(); 4]).unwrap();
        let mut taps = vec![0.0; 4];
        taps[0] = 0.25;
        let bf = BeamformerFilters::new(vec![taps; 4], 0, 16000.0).unwrap();
        let y = filter_and_sum(&bf, &x).unwrap();
        for (a, b) in y.channel(0).iter().zip(&s) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, t, l) in [(1, 10, 4), (3, 777, 64), (5, 1000, 129)] {
            let x = AudioBuffer::new(
                16000.0,
                (0..n).map(|_| random_signal(&mut rng, t)).collect(),
            )
            .unwrap();
            let taps = (0..n).map(|_| random_signal(&mut rng, l)).collect();
            let bf = BeamformerFilters::new(taps, l / 2, 16000.0).unwrap();
            let y = filter_and_sum(&bf, &x).unwrap();
            let oracle = direct_filter_and_sum(&bf, &x);
            assert_eq!(y.len(), oracle.len());
            for (a, b) in y.channel(0).iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shift_invariance_and_reproducibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_signal(&mut rng, 400);
        let taps = vec![random_signal(&mut rng, 32), random_signal(&mut rng, 32)];
        let bf = BeamformerFilters::new(taps, 16, 16000.0).unwrap();
        let a = filter_and_sum(
            &bf,
            &AudioBuffer::new(16000.0, vec![x.clone(), x.clone()]).unwrap(),
        )
        .unwrap();
        let mut shifted = vec![0.0; 7];
        shifted.extend(&x);
        let b = filter_and_sum(
            &bf,
            &AudioBuffer::new(16000.0, vec![shifted.clone(), shifted]).unwrap(),
        )
        .unwrap();
        assert!(b.channel(0)[..7].iter().all(|v| v.abs() < 1e-12));
        for (u, v) in a.channel(0).iter().zip(&b.channel(0)[7..]) {
            assert!((u - v).abs() < 1e-12);
        }
        let again =
            filter_and_sum(&bf, &AudioBuffer::new(16000.0, vec![x.clone(), x]).unwrap()).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn mismatches_are_errors() {
        let bf = BeamformerFilters::new(vec![vec![1.0, 0.0]], 0, 16000.0).unwrap();
        let two = AudioBuffer::new(16000.0, vec![vec![0.0; 4]; 2]).unwrap();
        assert!(filter_and_sum(&bf, &two).is_err());
        let rate = AudioBuffer::mono(8000.0, vec![0.0; 4]).unwrap();
        assert!(filter_and_sum(&bf, &rate).is_err());
    }

    #[test]
    fn delay_and_sum_noise_reduction() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 160_000;
        let chans: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..t).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let x = AudioBuffer::new(16000.0, chans).unwrap();
        let mut taps = vec![0.0; 16];
        taps[8] = 1.0 / n as f64;
        let bf = BeamformerFilters::new(vec![taps; n], 8, 16000.0).unwrap();
        let y = filter_and_sum(&bf, &x).unwrap();
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        let ratio = rms(&y.channel(0)[8..8 + t]) / rms(x.channel(0));
        assert!((ratio * (n as f64).sqrt() - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn convolve_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_signal(&mut rng, 300);
        let h = random_signal(&mut rng, 100);
        let fast = convolve(&x, &h);
        let mut slow = vec![0.0; 399];
        for (i, a) in x.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                slow[i + j] += a * b;
            }
        }
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(convolve(&[], &h).is_empty());
    }

    fn dtft(h: &[f64], f: f64, fs: f64) -> Complex64 {
        h.iter()
            .enumerate()
            .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * f / fs * k as f64))
            .sum()
    }

    #[test]
    fn fractional_delay_response() {
        let fs = 16000.0;
        for d in [0.0, 0.37, -2.5, 4.66, -7.9] {
            let h = fractional_delay_filter(d).unwrap();
            assert_eq!(h.len(), 64);
            let mut f = 300.0;
            while f <= 5000.0 {
                let r = dtft(&h, f, fs);
                assert!(
                    (r.norm() - 1.0).abs() < 1e-3,
                    "d={d} f={f} |H|={}",
                    r.norm()
                );
                let ideal = Complex64::from_polar(1.0, -2.0 * PI * f / fs * (32.0 + d));
                assert!((r - ideal).norm() < 2e-3, "d={d} f={f}");
                f += 50.0;
            }
        }
        assert!(fractional_delay_filter(16.5).is_err());
        assert!(fractional_delay_filter(f64::NAN).is_err());
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-16);
        assert!((bessel_i0(8.0) - 427.564_115_721_804_74).abs() < 1e-9);
    }

    fn one_source_scene(dir: Direction, noise: Option<f64>) -> SceneSpec {
        SceneSpec {
            sample_rate_hz: 16000.0,
            duration_s: 0.25,
            sources: vec![SourceSpec {
                signal: SignalSource::WhiteNoise { seed: 1 },
                direction: dir,
                gain_db: 0.0,
            }],
            target_index: 0,
            sensor_noise_snr_db: noise,
            seed: 9,
        }
    }

    #[test]
    fn centroid_mic_gets_pure_bulk_delay() {
        let geom = ArrayGeometry::new(vec![[0.0; 3]], 0).unwrap();
        let scene = one_source_scene(Direction::new(30.0, 60.0).unwrap(), None);
        let sig = crate::signals::speech_shaped_noise(3, scene.num_samples(), 16000.0);
        let ac = Acoustics::FreeField {
            geometry: &geom,
            sound_speed: 343.0,
        };
        let r = render_scene(&scene, std::slice::from_ref(&sig), &ac).unwrap();
        let h = fractional_delay_filter(0.0).unwrap();
        assert_eq!(r.stems[0].channel(0), convolve(&sig, &h).as_slice());
        assert_eq!(r.mix, r.stems[0]);
        assert!(r.noise.is_none());
    }

    /// Delay of `b` relative to `a`, from the peak of the cross-correlation
    /// interpolated by zero-padding its spectrum.
    fn xcorr_delay(a: &[f64], b: &[f64], upsample: usize) -> f64 {
        let n = (a.len() + b.len()).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let mut fa = padded(a, n);
        let mut fb = padded(b, n);
        planner.plan_fft_forward(n).process(&mut fa);
        planner.plan_fft_forward(n).process(&mut fb);
        let big = n * upsample;
        let mut c = vec![Complex64::new(0.0, 0.0); big];
        for k in 0..n / 2 {
            c[k] = fb[k] * fa[k].conj();
            if k > 0 {
                c[big - k] = fb[n - k] * fa[n - k].conj();
            }
        }
        planner.plan_fft_inverse(big).process(&mut c);
        let (i, _) = c
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
                if v.re > acc.1 {
                    (i, v.re)
                } else {
                    acc
                }
            });
        let lag = if i > big / 2 {
            i as f64 - big as f64
        } else {
            i as f64
        };
        lag / upsample as f64
    }

    #[test]
    fn inter_channel_delay_by_cross_correlation() {
        let x = 0.05;
        let c = 343.0;
        let fs = 16000.0;
        let geom = ArrayGeometry::new(vec![[-x, 0.0, 0.0], [x, 0.0, 0.0]], 0).unwrap();
        // source on the +x axis reaches mic 1 first
        let mut scene = one_source_scene(Direction::new(0.0, 90.0).unwrap(), None);
        scene.duration_s = 1.0;
        let sig = crate::signals::speech_shaped_noise(11, scene.num_samples(), fs);
        let ac = Acoustics::FreeField {
            geometry: &geom,
            sound_speed: c,
        };
        let r = render_scene(&scene, &[sig], &ac).unwrap();
        let measured = xcorr_delay(r.mix.channel(1), r.mix.channel(0), 64);
        let expected = 2.0 * x / c * fs;
        assert!(
            (measured - expected).abs() < 0.1,
            "{measured} vs {expected}"
        );
    }

    fn two_source_scene(interferer_gain: f64, noise: Option<f64>) -> (SceneSpec, Vec<Vec<f64>>) {
        let scene = SceneSpec {
            sample_rate_hz: 16000.0,
            duration_s: 0.6,
            sources: vec![
                SourceSpec {
                    signal: SignalSource::SpeechNoise { seed: 1 },
                    direction: Direction::new(90.0, 90.0).unwrap(),
                    gain_db: 0.0,
                },
                SourceSpec {
                    signal: SignalSource::SpeechNoise { seed: 2 },
                    direction: Direction::new(15.0, 73.0).unwrap(),
                    gain_db: interferer_gain,
                },
            ],
            target_index: 0,
            sensor_noise_snr_db: noise,
            seed: 4,
        };
        let sigs = scene.signals(std::path::Path::new(".")).unwrap();
        (scene, sigs)
    }

    #[test]
    fn mix_is_sum_of_stems_and_noise() {
        let geom = ArrayGeometry::head12();
        let ac = Acoustics::FreeField {
            geometry: &geom,
            sound_speed: 343.0,
        };
        let (scene, sigs) = two_source_scene(0.0, None);
        let r = render_scene(&scene, &sigs, &ac).unwrap();
        for c in 0..12 {
            for k in 0..r.mix.len() {
                assert_eq!(
                    r.mix.channel(c)[k],
                    r.stems[0].channel(c)[k] + r.stems[1].channel(c)[k]
                );
            }
        }

        let (scene, sigs) = two_source_scene(-6.0, Some(20.0));
        let r = render_scene(&scene, &sigs, &ac).unwrap();
        let noise = r.noise.as_ref().unwrap();
        let p = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64;
        let snr = 10.0 * (p(r.stems[0].channel(1)) / p(noise.channel(1))).log10();
        assert!((snr - 20.0).abs() < 0.3, "{snr}");
        let again = render_scene(&scene, &sigs, &ac).unwrap();
        assert_eq!(r.mix, again.mix);
        let mut other = scene.clone();
        other.seed = 5;
        assert_ne!(render_scene(&other, &sigs, &ac).unwrap().mix, r.mix);
    }

    #[test]
    fn references_of_target_only_scene() {
        let geom = ArrayGeometry::head12();
        let ac = Acoustics::FreeField {
            geometry: &geom,
            sound_speed: 343.0,
        };
        let (scene, sigs) = two_source_scene(f64::NEG_INFINITY, None);
        let r = render_scene(&scene, &sigs, &ac).unwrap();
        let mut taps = vec![0.0; 16];
        taps[3] = 1.0 / 12.0;
        let bf = BeamformerFilters::new(vec![taps; 12], 8, 16000.0).unwrap();
        let refs = reference_signals(&r, &bf).unwrap();
        assert_eq!(refs.input_ref, refs.input_test);
        assert_eq!(refs.output_ref, refs.output_test);
        assert_eq!(refs.input_ref, r.stems[0].channel(1));
    }

    #[test]
    fn references_are_linear() {
        let geom = ArrayGeometry::head12();
        let ac = Acoustics::FreeField {
            geometry: &geom,
            sound_speed: 343.0,
        };
        let (scene, sigs) = two_source_scene(-3.0, Some(10.0));
        let r = render_scene(&scene, &sigs, &ac).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let taps = (0..12).map(|_| random_signal(&mut rng, 64)).collect();
        let bf = BeamformerFilters::new(taps, 32, 16000.0).unwrap();
        let refs = reference_signals(&r, &bf).unwrap();
        let interf = filter_and_sum(&bf, &r.stems[1]).unwrap();
        let noise = filter_and_sum(&bf, r.noise.as_ref().unwrap()).unwrap();
        for k in 0..refs.output_test.len() {
            let sum = refs.output_ref[k] + interf.channel(0)[k] + noise.channel(0)[k];
            assert!((refs.output_test[k] - sum).abs() < 1e-10);
        }
    }

    #[test]
    fn measured_acoustics() {
        use crate::array::DirectionGrid;
        let geom = ArrayGeometry::new(vec![[0.0; 3], [0.1, 0.0, 0.0]], 1).unwrap();
        let grid = DirectionGrid::with_equal_weights(vec![
            Direction::new(0.0, 90.0).unwrap(),
            Direction::new(90.0, 90.0).unwrap(),
        ])
        .unwrap();
        let irs = vec![1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0];
        let ds = HrtfDataset::new(geom, grid, 16000.0, 3, irs).unwrap();
        let ac = Acoustics::Measured(&ds);
        let mut scene = one_source_scene(Direction::new(90.0, 90.0).unwrap(), None);
        scene.duration_s = 4.0 / 16000.0;
        let r = render_scene(&scene, &[vec![1.0, 2.0, 3.0, 4.0]], &ac).unwrap();
        assert_eq!(r.mix.channel(0), &[0.0, 0.25, 0.5, 0.75, 1.0, 0.0]);
        assert_eq!(r.mix.channel(1), &[0.0; 6]);
        assert_eq!(r.frontmost_index, 1);
        scene.sources[0].direction = Direction::new(45.0, 90.0).unwrap();
        assert!(render_scene(&scene, &[vec![1.0; 4]], &ac).is_err());
        scene.sample_rate_hz = 8000.0;
        scene.sources[0].direction = Direction::new(0.0, 90.0).unwrap();
        assert!(render_scene(&scene, &[vec![1.0; 4]], &ac).is_err());
    }
}
