//! Independent reference implementations shared by the oracle and acceptance
//! suites.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rlsfi::array::{make_uniform_grid, ArrayGeometry};
use rlsfi::dsp::{filter_and_sum, AudioBuffer};
use rlsfi::fir::{synthesize_fir, BeamformerFilters};
use rlsfi::hrtf::HrtfDataset;
use rlsfi::solver::{solve_frequency, FrequencyDesign};
use rlsfi::steering::{hrtf_steering, FrequencyGrid};

pub type C = Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> C {
    C::new(gauss(rng), gauss(rng)) / 2f64.sqrt()
}

/// One per-bin LSQI problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub g: DMatrix<C>,
    pub b: Vec<f64>,
    pub d: Vec<C>,
    pub gamma: f64,
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Instance {
        let g = DMatrix::from_fn(m, n, |_, _| cgauss(rng));
        let b = (0..m).map(|_| rng.random::<f64>()).collect();
        let d: Vec<C> = if rng.random_bool(0.5) {
            (0..n)
                .map(|_| C::from_polar(1.0, rng.random_range(-PI..PI)))
                .collect()
        } else {
            (0..n).map(|_| cgauss(rng)).collect()
        };
        let d2: f64 = d.iter().map(|v| v.norm_sqr()).sum();
        // from just below the delay-and-sum limit down to 8 dB under it
        let below_db = rng.random_range(0.05..8.0);
        let gamma = d2 * 10f64.powf(-below_db / 10.0);
        Instance { g, b, d, gamma }
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }
}

/// Weights minimizing `‖Gw − b‖² + μ‖w‖²` subject to `wᵀd = 1`, from the
/// bordered normal equations
///
/// ```text
/// [GᴴG + μI  conj(d)] [w]   [Gᴴb]
/// [   dᵀ        0   ] [ν] = [ 1 ]
/// ```
struct Penalized {
    gram: DMatrix<C>,
    ghb: DVector<C>,
    d: Vec<C>,
}

impl Penalized {
    fn new(inst: &Instance) -> Self {
        let bc = DVector::from_iterator(inst.b.len(), inst.b.iter().map(|&v| C::new(v, 0.0)));
        Penalized {
            gram: inst.g.ad_mul(&inst.g),
            ghb: inst.g.ad_mul(&bc),
            d: inst.d.clone(),
        }
    }

    fn solve(&self, mu: f64) -> DVector<C> {
        let n = self.d.len();
        let mut k = DMatrix::<C>::zeros(n + 1, n + 1);
        k.view_mut((0, 0), (n, n)).copy_from(&self.gram);
        for i in 0..n {
            k[(i, i)] += mu;
            k[(i, n)] = self.d[i].conj();
            k[(n, i)] = self.d[i];
        }
        let mut rhs = DVector::<C>::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&self.ghb);
        rhs[n] = C::new(1.0, 0.0);
        let sol = k.lu().solve(&rhs).expect("bordered system is nonsingular");
        sol.rows(0, n).into_owned()
    }
}

pub const ORACLE_GRID: usize = 10_000;

/// Reference LSQI solution: scans `ORACLE_GRID` log-spaced penalties for the
/// first one whose solution satisfies `‖w‖² ≤ 1/γ`, then bisects in `log μ`
/// between it and its predecessor.
pub fn lambda_grid_oracle(inst: &Instance) -> Vec<C> {
    let p = Penalized::new(inst);
    let scale = inst.g.norm_squared() / inst.n() as f64;
    let cap = 1.0 / inst.gamma;
    let (lo_exp, hi_exp) = (-11.0, 11.0);
    let mu_at = |i: usize| {
        scale * 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (ORACLE_GRID - 1) as f64)
    };
    let fits = |w: &DVector<C>| w.norm_squared() <= cap;

    let first = p.solve(mu_at(0));
    if fits(&first) {
        return first.iter().cloned().collect();
    }
    let hit = (1..ORACLE_GRID)
        .find(|&i| fits(&p.solve(mu_at(i))))
        .expect("largest penalty is feasible");
    let (mut lo, mut hi) = (mu_at(hit - 1).ln(), mu_at(hit).ln());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if fits(&p.solve(mid.exp())) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    p.solve(hi.exp()).iter().cloned().collect()
}

pub fn rel_err(a: &[C], b: &[C]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let base: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    (diff / base).sqrt()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SolverCheck {
    pub instances: usize,
    pub max_rel_err: f64,
    pub max_stationarity: f64,
    pub max_slackness: f64,
    pub all_feasible: bool,
    pub active: usize,
    pub solver_seconds: f64,
}

/// Runs the solver against the oracle on `count` random instances.
pub fn check_solver(seed: u64, count: usize) -> SolverCheck {
    let mut r = rng(seed);
    let mut out = SolverCheck {
        all_feasible: true,
        ..Default::default()
    };
    for _ in 0..count {
        let n = r.random_range(2..=12);
        let m = r.random_range(8..=128);
        let inst = Instance::random(&mut r, n, m);
        let t = std::time::Instant::now();
        let sol = solve_frequency(&inst.g, &inst.b, &inst.d, inst.gamma).expect("solver");
        out.solver_seconds += t.elapsed().as_secs_f64();
        let reference = lambda_grid_oracle(&inst);
        let dg = &sol.diagnostics;
        out.instances += 1;
        out.max_rel_err = out.max_rel_err.max(rel_err(&sol.weights, &reference));
        out.max_stationarity = out.max_stationarity.max(dg.stationarity);
        out.all_feasible &= dg.feasible();
        if sol.lambda > 0.0 {
            out.active += 1;
            // complementary slackness: an active multiplier needs ‖w‖² = 1/γ
            out.max_slackness = out
                .max_slackness
                .max(dg.feasibility_margin.abs() * inst.gamma);
        }
    }
    out
}

/// `Σ_l h[l] e^{−jωl}` evaluated term by term.
pub fn naive_dtft(h: &[f64], omega: f64) -> C {
    h.iter()
        .enumerate()
        .map(|(l, &v)| C::from_polar(v, -omega * l as f64))
        .sum()
}

/// `2πq/L` rad/sample.
pub fn digital_omega(q: usize, l: usize) -> f64 {
    2.0 * PI * q as f64 / l as f64
}

/// Random dataset on a coarse grid: `ir_len` taps per (direction, mic).
pub fn random_dataset(seed: u64, ir_len: usize) -> HrtfDataset {
    let mut r = rng(seed);
    let geometry = ArrayGeometry::head12();
    let grid = make_uniform_grid(45.0, 45.0, true).unwrap();
    let irs = (0..grid.len() * geometry.num_mics() * ir_len)
        .map(|_| gauss(&mut r))
        .collect();
    HrtfDataset::new(geometry, grid, 16000.0, ir_len, irs).unwrap()
}

/// Largest deviation between `hrtf_steering` and a naive DFT of each impulse
/// response, relative to the largest response magnitude.
pub fn steering_vs_naive_dft(ds: &HrtfDataset, l: usize) -> f64 {
    let freqs = FrequencyGrid::new(ds.sample_rate(), l).unwrap();
    let steer = hrtf_steering(ds, &freqs).unwrap();
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for q in 0..freqs.num_bins() {
        for m in 0..ds.grid().len() {
            for n in 0..ds.geometry().num_mics() {
                let want = naive_dtft(ds.impulse_response(m, n), digital_omega(q, l));
                worst = worst.max((steer.response(q, m, n) - want).norm());
                peak = peak.max(want.norm());
            }
        }
    }
    worst / peak
}

/// Random design weights on `L/2 + 1` bins.
pub fn random_design(seed: u64, n_mics: usize, l: usize) -> FrequencyDesign {
    let mut r = rng(seed);
    let freqs = FrequencyGrid::new(16000.0, l).unwrap();
    let weights = (0..freqs.num_bins())
        .map(|q| {
            (0..n_mics)
                .map(|_| {
                    let v = cgauss(&mut r);
                    // bins 0 and L/2 of a real filter are real
                    if q == 0 || q == l / 2 {
                        C::new(v.re, 0.0)
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    FrequencyDesign {
        freqs,
        look: rlsfi::array::Direction::new(90.0, 90.0).unwrap(),
        gamma: 0.01,
        beamwidth_3db: 20.0,
        weights,
        diagnostics: Vec::new(),
        grid_hash: String::new(),
    }
}

/// FIR synthesis against a naive inverse DFT of the delayed, Hermitian
/// extended spectrum; relative max-abs error over all taps.
pub fn synthesis_vs_naive_idft(fd: &FrequencyDesign) -> f64 {
    let bf = synthesize_fir(fd).unwrap();
    let l = fd.freqs.num_taps();
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for n in 0..fd.num_mics() {
        let spec: Vec<C> = (0..l)
            .map(|k| {
                let q = if k <= l / 2 { k } else { l - k };
                let delayed = fd.weights[q][n] * C::from_polar(1.0, -PI * q as f64);
                if k <= l / 2 {
                    delayed
                } else {
                    delayed.conj()
                }
            })
            .collect();
        for (t, &tap) in bf.taps()[n].iter().enumerate() {
            let want: C = spec
                .iter()
                .enumerate()
                .map(|(k, s)| s * C::from_polar(1.0, 2.0 * PI * (k * t % l) as f64 / l as f64))
                .sum::<C>()
                / l as f64;
            worst = worst.max((tap - want.re).abs());
            peak = peak.max(want.norm());
        }
    }
    worst / peak
}

/// Parseval for the synthesized filters: `Σ_l w[l]² = (1/L) Σ_k |W_k|²`
/// with the full Hermitian spectrum rebuilt from the half-spectrum design.
/// Returns the relative energy mismatch.
pub fn synthesis_parseval(fd: &FrequencyDesign) -> f64 {
    let bf = synthesize_fir(fd).unwrap();
    let l = fd.freqs.num_taps();
    let mut worst: f64 = 0.0;
    for n in 0..fd.num_mics() {
        let time: f64 = bf.taps()[n].iter().map(|v| v * v).sum();
        let freq: f64 = (0..=l / 2)
            .map(|q| {
                let e = fd.weights[q][n].norm_sqr();
                if q == 0 || q == l / 2 {
                    e
                } else {
                    2.0 * e
                }
            })
            .sum::<f64>()
            / l as f64;
        worst = worst.max((time - freq).abs() / freq);
    }
    worst
}

/// Parseval for tabulated steering: `Σ h² = (1/L)(|H_0|² + |H_{L/2}|² +
/// 2 Σ_{0<q<L/2} |H_q|²)` for every response of the dataset.
pub fn steering_parseval(ds: &HrtfDataset, l: usize) -> f64 {
    let freqs = FrequencyGrid::new(ds.sample_rate(), l).unwrap();
    let steer = hrtf_steering(ds, &freqs).unwrap();
    let mut worst: f64 = 0.0;
    for m in 0..ds.grid().len() {
        for n in 0..ds.geometry().num_mics() {
            let time: f64 = ds.impulse_response(m, n).iter().map(|v| v * v).sum();
            let freq: f64 = (0..freqs.num_bins())
                .map(|q| {
                    let e = steer.response(q, m, n).norm_sqr();
                    if q == 0 || q == l / 2 {
                        e
                    } else {
                        2.0 * e
                    }
                })
                .sum::<f64>()
                / l as f64;
            worst = worst.max((time - freq).abs() / time);
        }
    }
    worst
}

/// `y[t] = Σ_n Σ_l w_n[l] x_n[t − l]` summed directly.
pub fn direct_filter_and_sum(bf: &BeamformerFilters, x: &AudioBuffer) -> Vec<f64> {
    let out_len = x.len() + bf.len() - 1;
    let mut y = vec![0.0; out_len];
    for (w, xc) in bf.taps().iter().zip(x.channels()) {
        for (t, yt) in y.iter_mut().enumerate() {
            let lo = t.saturating_sub(xc.len() - 1);
            let hi = t.min(w.len() - 1);
            for l in lo..=hi {
                *yt += w[l] * xc[t - l];
            }
        }
    }
    y
}

/// Engine against direct summation for random filters and signals; relative
/// max-abs error.
pub fn engine_vs_direct(seed: u64, n_mics: usize, taps: usize, samples: usize) -> f64 {
    let mut r = rng(seed);
    let w = (0..n_mics)
        .map(|_| (0..taps).map(|_| gauss(&mut r)).collect())
        .collect();
    let bf = BeamformerFilters::new(w, taps / 2, 16000.0).unwrap();
    let x = AudioBuffer::new(
        16000.0,
        (0..n_mics)
            .map(|_| (0..samples).map(|_| gauss(&mut r)).collect())
            .collect(),
    )
    .unwrap();
    let got = filter_and_sum(&bf, &x).unwrap();
    let want = direct_filter_and_sum(&bf, &x);
    assert_eq!(got.len(), want.len());
    let peak = want.iter().fold(0f64, |a, v| a.max(v.abs()));
    got.channel(0)
        .iter()
        .zip(&want)
        .fold(0f64, |a, (g, w)| a.max((g - w).abs()))
        / peak
}
