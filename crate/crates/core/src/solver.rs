//! Per-frequency robust least-squares design.
//!
//! At every design bin the weights solve
//!
//! ```text
//! minimize   ‖G w − b̂‖²
//! subject to wᵀd = 1,  |wᵀd|² / (wᴴw) ≥ γ
//! ```
//!
//! With the distortionless constraint active the WNG constraint is simply
//! `‖w‖² ≤ 1/γ`. Writing `w = w_p + U z`, where `w_p = conj(d)/‖d‖²` and the
//! columns of `U` span the null space of `wᵀd`, turns the problem into a
//! least-squares fit over a ball,
//!
//! ```text
//! minimize ‖(GU) z − (b̂ − G w_p)‖²   subject to ‖z‖² ≤ ρ² = 1/γ − 1/‖d‖²,
//! ```
//!
//! whose solution is the Tikhonov solution `z(λ)` for the smallest `λ ≥ 0`
//! that lands inside the ball. `‖z(λ)‖` is nonincreasing in `λ`, so `λ` is
//! found by bisection on an SVD of the (QR-compressed) system matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::Direction;
use crate::desired::DesiredResponse;
use crate::error::{Error, Result};
use crate::steering::{FrequencyGrid, SteeringSet};

const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 2000;
const CLAMP_FRACTION: f64 = 0.999;

/// Parameters shared by every bin of a broadband design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Linear WNG floor γ.
    pub gamma: f64,
    pub look: Direction,
    pub beamwidth_3db: f64,
    pub num_taps: usize,
    pub sample_rate: f64,
    /// Reporting band `[f_lo, f_hi]` in Hz.
    pub band: (f64, f64),
}

impl DesignConfig {
    pub fn new(
        gamma_db: f64,
        look: Direction,
        beamwidth_3db: f64,
        num_taps: usize,
        sample_rate: f64,
        band: (f64, f64),
    ) -> Result<Self> {
        let cfg = DesignConfig {
            gamma: 10f64.powf(gamma_db / 10.0),
            look,
            beamwidth_3db,
            num_taps,
            sample_rate,
            band,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "WNG floor must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.beamwidth_3db.is_finite() && self.beamwidth_3db > 0.0) {
            return Err(Error::invalid("beamwidth must be positive"));
        }
        FrequencyGrid::new(self.sample_rate, self.num_taps)?;
        let (lo, hi) = self.band;
        if !(lo >= 0.0 && lo < hi && hi <= self.sample_rate / 2.0) {
            return Err(Error::invalid(format!(
                "band [{lo}, {hi}] Hz must satisfy 0 ≤ lo < hi ≤ f_s/2"
            )));
        }
        Ok(())
    }

    pub fn gamma_db(&self) -> f64 {
        10.0 * self.gamma.log10()
    }

    pub fn freqs(&self) -> FrequencyGrid {
        FrequencyGrid::new(self.sample_rate, self.num_taps).expect("validated")
    }
}

/// Per-bin solver report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDiagnostics {
    /// ‖G w − b̂‖
    pub residual: f64,
    /// Achieved WNG, linear.
    pub wng: f64,
    /// `1/γ − wᴴw` with the γ actually used; nonnegative when feasible.
    pub feasibility_margin: f64,
    /// Multiplier of the norm constraint. Infinite when the feasible set is a
    /// single point (γ = ‖d‖²); `null` in JSON.
    #[serde(with = "infinite_as_null")]
    pub lambda: f64,
    /// γ used at this bin (differs from the requested one when clamped).
    pub gamma_used: f64,
    /// Requested γ exceeded ‖d‖² and was reduced to 0.999·‖d‖².
    pub clamped: bool,
    pub bisection_steps: usize,
    /// ‖(GU)ᴴ((GU)z − r) + λz‖ / ‖(GU)ᴴ r‖, the denominator floored at
    /// √ε·‖G‖‖r‖ (GU vanishes at DC).
    pub stationarity: f64,
    /// |wᵀd − 1|
    pub constraint_error: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl BinDiagnostics {
    pub fn feasible(&self) -> bool {
        self.feasibility_margin >= -1e-8 / self.gamma_used && self.constraint_error <= 1e-9
    }
}

#[derive(Debug, Clone)]
pub struct BinSolution {
    pub weights: Vec<Complex64>,
    pub lambda: f64,
    pub diagnostics: BinDiagnostics,
}

/// Optimum per-bin weights `w_f(ω_q)` of a broadband design.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDesign {
    pub freqs: FrequencyGrid,
    pub look: Direction,
    /// Requested WNG floor, linear.
    pub gamma: f64,
    pub beamwidth_3db: f64,
    /// `[bin][mic]`
    pub weights: Vec<Vec<Complex64>>,
    pub diagnostics: Vec<BinDiagnostics>,
    /// Fingerprint of the design-direction grid.
    pub grid_hash: String,
}

impl FrequencyDesign {
    pub fn num_mics(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn multipliers(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.lambda).collect()
    }

    pub fn clamped_bins(&self) -> Vec<usize> {
        (0..self.diagnostics.len())
            .filter(|&q| self.diagnostics[q].clamped)
            .collect()
    }
}

/// Largest attainable WNG under the distortionless constraint: `‖d‖²`.
pub fn feasibility_bound(d: &[Complex64]) -> Result<f64> {
    let n2: f64 = d.iter().map(|v| v.norm_sqr()).sum();
    if !n2.is_finite() {
        return Err(Error::invalid("steering vector has non-finite entries"));
    }
    if n2 == 0.0 {
        return Err(Error::invalid("steering vector is zero"));
    }
    Ok(n2)
}

/// Orthonormal basis (N × N−1) of `{v : vᵀd = 0}`, i.e. the orthogonal
/// complement of `conj(d)`, from the trailing columns of a Householder
/// reflector that maps `conj(d)` onto the first axis.
fn null_space_basis(d: &[Complex64], d_norm: f64) -> DMatrix<Complex64> {
    let n = d.len();
    let x: Vec<Complex64> = d.iter().map(|v| v.conj() / d_norm).collect();
    let phase = if x[0].norm() > 0.0 {
        x[0] / x[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut v = x.clone();
    v[0] += phase;
    let vv: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    DMatrix::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        let delta = if i == col { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - v[i] * v[col].conj() * (2.0 / vv)
    })
}

/// The regularized least-squares family `z(λ) = V diag(σ/(σ²+λ)) Pᴴ Qᴴ r`.
struct Tikhonov {
    sigma: Vec<f64>,
    beta: Vec<Complex64>,
    v: DMatrix<Complex64>,
}

impl Tikhonov {
    /// Singular values below `scale·max(m, k)·ε` are treated as zero; pass
    /// the norm of the unreduced system so cancellation in `GU` is caught.
    fn new(a: &DMatrix<Complex64>, r: &DVector<Complex64>, scale: f64) -> Result<Self> {
        let (m, k) = a.shape();
        // compress tall systems with a QR first; the SVD then runs on R only
        let (core, rhs) = if m > k {
            let qr = a.clone().qr();
            let q = qr.q();
            (qr.r(), q.ad_mul(r))
        } else {
            (a.clone(), r.clone())
        };
        let svd = core.svd(true, true);
        let u = svd
            .u
            .ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Numerical("SVD did not return Vᴴ".into()))?;
        let beta_vec = u.ad_mul(&rhs);
        let tol = scale * (m.max(k) as f64) * f64::EPSILON;
        let sigma: Vec<f64> = svd
            .singular_values
            .iter()
            .map(|&s| if s > tol { s } else { 0.0 })
            .collect();
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numerical("non-finite singular values".into()));
        }
        Ok(Tikhonov {
            beta: beta_vec.iter().cloned().collect(),
            sigma,
            v: v_t.adjoint(),
        })
    }

    fn coeffs(&self, lambda: f64) -> impl Iterator<Item = Complex64> + '_ {
        self.sigma.iter().zip(&self.beta).map(move |(&s, &b)| {
            if s > 0.0 {
                b * (s / (s * s + lambda))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn norm_sqr(&self, lambda: f64) -> f64 {
        self.coeffs(lambda).map(|c| c.norm_sqr()).sum()
    }

    fn solution(&self, lambda: f64) -> DVector<Complex64> {
        let c = DVector::from_iterator(self.sigma.len(), self.coeffs(lambda));
        &self.v * c
    }
}

/// Solves one bin. `g` is M × N, `b_hat` has M entries, `d` has N.
pub fn solve_frequency(
    g: &DMatrix<Complex64>,
    b_hat: &[f64],
    d: &[Complex64],
    gamma: f64,
) -> Result<BinSolution> {
    let (m, n) = g.shape();
    if m == 0 || n == 0 || b_hat.len() != m || d.len() != n {
        return Err(Error::invalid(format!(
            "inconsistent dimensions: G is {m}×{n}, b̂ has {}, d has {}",
            b_hat.len(),
            d.len()
        )));
    }
    if g.iter().any(|v| !(v.re.is_finite() && v.im.is_finite()))
        || b_hat.iter().any(|v| !v.is_finite())
        || d.iter().any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::invalid("non-finite input to the per-bin solver"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!(
            "WNG floor must be positive, got {gamma}"
        )));
    }
    let d_norm2 = feasibility_bound(d)?;
    if gamma > d_norm2 * (1.0 + 1e-12) {
        return Err(Error::Infeasible {
            gamma,
            gamma_max: d_norm2,
        });
    }
    let d_norm = d_norm2.sqrt();
    let rho2 = (1.0 / gamma - 1.0 / d_norm2).max(0.0);
    let w_p = DVector::from_iterator(n, d.iter().map(|v| v.conj() / d_norm2));
    let b = DVector::from_iterator(m, b_hat.iter().map(|&v| Complex64::new(v, 0.0)));

    let mut lambda = 0.0;
    let mut steps = 0;
    let mut stationarity = 0.0;
    let w = if n == 1 {
        w_p.clone()
    } else if rho2 == 0.0 {
        lambda = f64::INFINITY;
        w_p.clone()
    } else {
        let u = null_space_basis(d, d_norm);
        let a = g * &u;
        let r = &b - g * &w_p;
        let tk = Tikhonov::new(&a, &r, g.norm())?;
        if tk.norm_sqr(0.0) > rho2 {
            let (l, s) = bisect_multiplier(&tk, rho2, gamma)?;
            lambda = l;
            steps = s;
        }
        let z = tk.solution(lambda);
        let ahr = a.ad_mul(&r);
        let grad = a.ad_mul(&(&a * &z - &r)) + &z * Complex64::new(lambda, 0.0);
        let scale = ahr.norm().max(f64::EPSILON.sqrt() * g.norm() * r.norm());
        stationarity = if scale > 0.0 {
            grad.norm() / scale
        } else {
            grad.norm()
        };
        &w_p + &u * z
    };

    let wd: Complex64 = w.iter().zip(d).map(|(a, b)| a * b).sum();
    let wh_w: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    let residual = (g * &w - &b).norm();
    let diagnostics = BinDiagnostics {
        residual,
        wng: wd.norm_sqr() / wh_w,
        feasibility_margin: 1.0 / gamma - wh_w,
        lambda,
        gamma_used: gamma,
        clamped: false,
        bisection_steps: steps,
        stationarity,
        constraint_error: (wd - 1.0).norm(),
    };
    Ok(BinSolution {
        weights: w.iter().cloned().collect(),
        lambda,
        diagnostics,
    })
}

/// Smallest λ with `‖z(λ)‖² ≤ ρ²`, returned from the feasible side of the
/// bracket so the norm constraint holds.
fn bisect_multiplier(tk: &Tikhonov, rho2: f64, gamma: f64) -> Result<(f64, usize)> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while tk.norm_sqr(hi) > rho2 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Numerical(format!(
                "could not bracket the multiplier: ‖z(λ)‖² = {:.3e} > ρ² = {rho2:.3e} at λ = {hi:.3e}",
                tk.norm_sqr(lo)
            )));
        }
    }
    let res_tol = 1e-10 * rho2.max(1.0);
    // keeps λ·(1/γ − wᴴw) within the complementary-slackness budget
    let cs_tol = 1e-9 / gamma;
    for step in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if tk.norm_sqr(mid) > rho2 {
            lo = mid;
        } else {
            hi = mid;
        }
        let gap = rho2 - tk.norm_sqr(hi);
        if (gap <= res_tol && hi * gap <= cs_tol) || hi - lo <= 1e-14 * hi {
            return Ok((hi, step));
        }
    }
    Err(Error::Numerical(format!(
        "multiplier bisection did not converge in {MAX_BISECTIONS} steps: bracket [{lo:.6e}, {hi:.6e}], \
         ‖z(hi)‖² = {:.6e}, ρ² = {rho2:.6e}",
        tk.norm_sqr(hi)
    )))
}

/// Solves every bin `0..=L/2` independently with the look-direction row of
/// the steering set as `d(ω_q)`. Bins where γ exceeds `‖d(ω_q)‖²` are
/// solved with γ clamped to `0.999·‖d(ω_q)‖²` and flagged.
pub fn design_broadband(
    steer: &SteeringSet,
    desired: &DesiredResponse,
    cfg: &DesignConfig,
) -> Result<FrequencyDesign> {
    cfg.validate()?;
    let freqs = *steer.freqs();
    if freqs.num_taps() != cfg.num_taps || (freqs.sample_rate() - cfg.sample_rate).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "steering set is for L = {} at {} Hz, design asks for L = {} at {} Hz",
            freqs.num_taps(),
            freqs.sample_rate(),
            cfg.num_taps,
            cfg.sample_rate
        )));
    }
    let rows = desired
        .grid()
        .directions()
        .iter()
        .map(|dir| {
            steer.grid().index_of(dir).ok_or_else(|| {
                Error::invalid(format!(
                    "design direction {dir} is not on the steering grid"
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let look = desired.look();
    if crate::array::great_circle_distance(&look, &cfg.look) > 1e-6 {
        return Err(Error::invalid(format!(
            "desired response looks at {look} but the configuration asks for {}",
            cfg.look
        )));
    }
    let look_idx = rows[desired.look_index()];
    let b_hat = desired.values();

    let solved: Vec<BinSolution> = (0..freqs.num_bins())
        .into_par_iter()
        .map(|q| {
            let at_bin = |e: Error| Error::AtBin {
                bin: q,
                source: Box::new(e),
            };
            let g = steer.submatrix(q, &rows).map_err(at_bin)?;
            let d = steer.vector(q, look_idx);
            let gamma_max = feasibility_bound(&d).map_err(at_bin)?;
            let (gamma, clamped) = if cfg.gamma > gamma_max * (1.0 + 1e-12) {
                (CLAMP_FRACTION * gamma_max, true)
            } else {
                (cfg.gamma.min(gamma_max), false)
            };
            let mut sol = solve_frequency(&g, b_hat, &d, gamma).map_err(at_bin)?;
            sol.diagnostics.clamped = clamped;
            Ok(sol)
        })
        .collect::<Result<_>>()?;

    let (weights, diagnostics) = solved
        .into_iter()
        .map(|s| (s.weights, s.diagnostics))
        .unzip();
    Ok(FrequencyDesign {
        freqs,
        look: cfg.look,
        gamma: cfg.gamma,
        beamwidth_3db: cfg.beamwidth_3db,
        weights,
        diagnostics,
        grid_hash: desired.grid().fingerprint(),
    })
}
