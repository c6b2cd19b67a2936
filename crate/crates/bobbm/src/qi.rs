//! Exact Wick/Isserlis second moments of time-integrated trilinear forms
//! under the linear flow, their scaling in the cutoff, and the
//! integrability-exponent schedules.
//!
//! For a permutation-symmetric kernel `K` the quantity
//! `E[ |∫_0^t Q^{(K)}(S(-t') u_0) dt'|² ]` over the Gaussian ensemble
//! collapses, by Isserlis' theorem, to the lattice sum
//!
//! ```text
//! 3! · Σ_{n₁+n₂+n₃=0, 0<|n_j|<=N} |K(n̄)|² Π_j |n_j|^{-(2s+1)} · (2-2cos(tΦ(n̄)))/Φ(n̄)²
//! ```
//!
//! No self-pairings occur because the lattice excludes `n_j + n_k = 0`, and
//! for a symmetric kernel the permanent collapses to six times the diagonal.
//! The oscillatory weight uses `|(e^{itΦ}-1)/Φ|² = (2-2cos(tΦ))/Φ²` directly
//! to avoid complex cancellation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::linear_propagator;
use crate::gaussian::GaussianSpec;
use crate::record::Estimate;
use crate::stream::{mean_and_se, tree_sum};
use crate::trilinear::{phase, q_full, q_split, FrequencyTriple};
use crate::{Error, Result};

/// Choice of symmetrised trilinear kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KernelVariant {
    /// Dispersive part, kernel `-(i/3) Ψ_s(n̄)`.
    Q1Sym,
    /// Regularised part, kernel `(i/3) Σ_j sgn(n_j)|n_j|^{2s+1}(1+|n_j|)^{-1}`.
    Q2Sym,
    /// The full energy derivative, `-(i/3) Σ_j sgn(n_j)|n_j|^{2s+2}(1+|n_j|)^{-1}`.
    #[default]
    Full,
}

impl std::str::FromStr for KernelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q1" => Ok(KernelVariant::Q1Sym),
            "q2" => Ok(KernelVariant::Q2Sym),
            "full" => Ok(KernelVariant::Full),
            other => Err(Error::InvalidParam(format!("unknown kernel variant {other}"))),
        }
    }
}

impl std::fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelVariant::Q1Sym => write!(f, "q1"),
            KernelVariant::Q2Sym => write!(f, "q2"),
            KernelVariant::Full => write!(f, "full"),
        }
    }
}

/// Per-frequency kernel magnitude before the sign and 1/3 symmetrisation.
fn kern_mag(variant: KernelVariant, s: f64, k: f64) -> f64 {
    match variant {
        KernelVariant::Q1Sym => k.powf(2.0 * s + 1.0),
        KernelVariant::Q2Sym => k.powf(2.0 * s + 1.0) / (1.0 + k),
        KernelVariant::Full => k.powf(2.0 * s + 2.0) / (1.0 + k),
    }
}

fn kern_sign(variant: KernelVariant) -> f64 {
    match variant {
        KernelVariant::Q1Sym | KernelVariant::Full => -1.0,
        KernelVariant::Q2Sym => 1.0,
    }
}

/// A symmetrised trilinear kernel at fixed `(s, N)`. The realised kernel is
/// `K(n̄) = i·κ(n̄)` with `κ` real and permutation-symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiKernel {
    pub variant: KernelVariant,
    pub s: f64,
    pub max_freq: usize,
}

impl QiKernel {
    pub fn new(variant: KernelVariant, s: f64, max_freq: usize) -> Self {
        QiKernel { variant, s, max_freq }
    }

    /// The real factor `κ(n̄)` in `K(n̄) = i·κ(n̄)`.
    pub fn kappa(&self, triple: &FrequencyTriple) -> f64 {
        let sum: f64 = triple
            .entries()
            .iter()
            .map(|&n| n.signum() as f64 * kern_mag(self.variant, self.s, n.abs() as f64))
            .sum();
        kern_sign(self.variant) / 3.0 * sum
    }

    /// Trilinear form value `Q^{(K)}(u)` for the kernel variant.
    pub fn form(&self, u: &crate::spectral::FourierField) -> f64 {
        match self.variant {
            KernelVariant::Full => q_full(u, self.s, self.max_freq),
            KernelVariant::Q1Sym => q_split(u, self.s, self.max_freq).0,
            KernelVariant::Q2Sym => q_split(u, self.s, self.max_freq).1,
        }
    }
}

/// `|(e^{itφ}-1)/φ|²` evaluated as `(2-2cos(tφ))/φ²`; the removable
/// singularity at `φ = 0` continues to `t²` (defensive only: `|φ| >= 1/3` on
/// the zero-sum lattice).
pub fn osc_weight(t: f64, phi: f64) -> f64 {
    if phi.abs() < 1e-9 {
        t * t
    } else {
        (2.0 - 2.0 * (t * phi).cos()) / (phi * phi)
    }
}

/// Restriction of the lattice enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LatticeSubset {
    /// All zero-sum triples with `0 < |n_j| <= N`.
    All,
    /// `n₂, n₃ < 0 < n₁` with `|n₁| ~ |n₂|` (same octave) and
    /// `min(|n₁|,|n₂|) >= 4 |n₃|`.
    GammaWindow,
}

fn lattice_sum(kernel: &QiKernel, t: f64, subset: LatticeSubset) -> f64 {
    let n = kernel.max_freq as i64;
    let s = kernel.s;
    // Per-frequency tables keep powf out of the O(N²) loop; entries are the
    // same scalar calls QiKernel::kappa makes.
    let mut mag = vec![0.0f64; kernel.max_freq + 1];
    let mut wt = vec![0.0f64; kernel.max_freq + 1];
    let mut ph = vec![0.0f64; kernel.max_freq + 1];
    for k in 1..=kernel.max_freq {
        let kf = k as f64;
        mag[k] = kern_mag(kernel.variant, s, kf);
        wt[k] = kf.powf(-(2.0 * s + 1.0));
        ph[k] = kf / (1.0 + kf);
    }
    let block = 64usize;
    let starts: Vec<i64> = (1..=n).step_by(block).collect();
    let partials: Vec<f64> = starts
        .par_iter()
        .map(|&start| {
            let stop = (start + block as i64 - 1).min(n);
            let mut acc = 0.0f64;
            for n1 in start..=stop {
                let a1 = n1 as usize;
                let (lo2, hi2) = match subset {
                    LatticeSubset::All => (-n, n),
                    LatticeSubset::GammaWindow => (-n, -1),
                };
                for n2 in lo2..=hi2 {
                    if n2 == 0 {
                        continue;
                    }
                    let n3 = -(n1 + n2);
                    if n3 == 0 || n3.abs() > n {
                        continue;
                    }
                    let a2 = n2.unsigned_abs() as usize;
                    let a3 = n3.unsigned_abs() as usize;
                    if subset == LatticeSubset::GammaWindow {
                        if n3 >= 0 {
                            continue;
                        }
                        let hi = a1.max(a2);
                        let lo = a1.min(a2);
                        if hi > 2 * lo || lo < 4 * a3 {
                            continue;
                        }
                    }
                    let kappa = (n1.signum() as f64 * mag[a1]
                        + n2.signum() as f64 * mag[a2]
                        + n3.signum() as f64 * mag[a3])
                        / 3.0;
                    let phi = n1.signum() as f64 * ph[a1]
                        + n2.signum() as f64 * ph[a2]
                        + n3.signum() as f64 * ph[a3];
                    acc += kappa * kappa * wt[a1] * wt[a2] * wt[a3] * osc_weight(t, phi);
                }
            }
            acc
        })
        .collect();
    let total = tree_sum(&partials);
    match subset {
        // 3! from the Wick collapse; the n₁ > 0 half doubles by n̄ → -n̄.
        LatticeSubset::All => 12.0 * total,
        LatticeSubset::GammaWindow => 6.0 * total,
    }
}

/// Exact second moment `E[ |∫_0^t Q^{(K)}(S(-t') u_0) dt'|² ]`.
pub fn qi_second_moment_exact(kernel: &QiKernel, t: f64) -> f64 {
    lattice_sum(kernel, t, LatticeSubset::All)
}

/// The same sum restricted to the high-high-low window with
/// `n₂, n₃ < 0 < n₁`; at `s = 1/2` this window alone grows like `(log N)²`.
pub fn qi_gamma_restricted(kernel: &QiKernel, t: f64) -> f64 {
    lattice_sum(kernel, t, LatticeSubset::GammaWindow)
}

/// Brute-force Wick oracle: the double sum over ordered triple pairs
/// `(n̄, m̄)` with explicit bijection counting. `O(#triples²)`; reference
/// implementation for small cutoffs, independent of the collapsed formula.
pub fn qi_second_moment_bruteforce(kernel: &QiKernel, t: f64) -> f64 {
    let n = kernel.max_freq as i64;
    let mut triples: Vec<FrequencyTriple> = Vec::new();
    for n1 in -n..=n {
        for n2 in -n..=n {
            if n1 == 0 || n2 == 0 {
                continue;
            }
            if let Some(tr) = FrequencyTriple::from_pair(n1, n2) {
                if tr.max_abs() <= n {
                    triples.push(tr);
                }
            }
        }
    }
    let coeff = |tr: &FrequencyTriple| -> Complex64 {
        let kappa = kernel.kappa(tr);
        let phi = phase(tr);
        // ∫_0^t e^{-it'φ} dt' = (1 - e^{-itφ})/(iφ)
        let timefac = if phi.abs() < 1e-9 {
            Complex64::new(t, 0.0)
        } else {
            (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -t * phi))
                / Complex64::new(0.0, phi)
        };
        let weight: f64 = tr
            .entries()
            .iter()
            .map(|&k| (k.abs() as f64).powf(-(kernel.s + 0.5)))
            .product();
        Complex64::new(0.0, kappa) * timefac * weight
    };
    let cs: Vec<Complex64> = triples.iter().map(coeff).collect();
    const PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, ca) in triples.iter().zip(&cs) {
        let ea = a.entries();
        for (b, cb) in triples.iter().zip(&cs) {
            let eb = b.entries();
            let matches = PERMS
                .iter()
                .filter(|p| (0..3).all(|j| ea[j] == eb[p[j]]))
                .count();
            if matches > 0 {
                acc += ca * cb.conj() * matches as f64;
            }
        }
    }
    debug_assert!(acc.im.abs() <= 1e-10 * acc.re.abs().max(1e-300));
    acc.re
}

/// Monte Carlo estimate of the same second moment: sample `u_0`, evaluate the
/// kernel's trilinear form along the linear flow at Simpson nodes, integrate,
/// square, average.
pub fn qi_second_moment_mc(
    kernel: &QiKernel,
    t: f64,
    samples: u64,
    quad_nodes: usize,
    seed: u64,
) -> Result<Estimate> {
    if quad_nodes < 8 {
        return Err(Error::InvalidParam(format!(
            "quad_nodes must be at least 8, got {quad_nodes}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParam("samples must be positive".into()));
    }
    let intervals = quad_nodes + quad_nodes % 2; // even interval count
    let h = t / intervals as f64;
    let spec = GaussianSpec::new(kernel.s, kernel.max_freq, seed);
    let sq: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let u = spec.sample(i);
            let values: Vec<f64> = (0..=intervals)
                .map(|k| kernel.form(&linear_propagator(&u, -(h * k as f64))))
                .collect();
            let integral = crate::dynamics::simpson(&values, h);
            integral * integral
        })
        .collect();
    let (mean, se) = mean_and_se(&sq);
    Ok(Estimate::new(mean, se, samples))
}

/// Least-squares fit of `log(QI/t²)` against `log N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// The per-cutoff exact values `(N, QI)` entering the fit.
    pub values: Vec<(usize, f64)>,
}

fn log_log_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} point(s)", points.len())));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-12 {
        return Err(Error::DegenerateFit("collinear abscissae".into()));
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let rss: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum();
    Ok((slope, intercept, (rss / n).sqrt()))
}

/// Exact-QI scaling fit across cutoffs for the full kernel; the slope
/// estimates the growth exponent of `QI/t²` in `N`.
pub fn qi_scaling_fit(s: f64, t: f64, n_list: &[usize]) -> Result<ScalingFit> {
    if s <= 0.0 {
        return Err(Error::InvalidParam(format!("scaling fit needs s > 0, got {s}")));
    }
    if t == 0.0 {
        return Err(Error::InvalidParam("scaling fit needs t != 0".into()));
    }
    let values: Vec<(usize, f64)> = n_list
        .iter()
        .map(|&n| (n, qi_second_moment_exact(&QiKernel::new(KernelVariant::Full, s, n), t)))
        .collect();
    let pts: Vec<(f64, f64)> = values
        .iter()
        .map(|&(n, v)| ((n as f64).ln(), (v / (t * t)).ln()))
        .collect();
    let (slope, intercept, residual) = log_log_fit(&pts)?;
    Ok(ScalingFit { slope, intercept, residual, values })
}

/// `s = 1/2` ratios `QI / (t² (log N)²)`; a log-squared law has no constant
/// log-log slope, so the contract is bounded positive ratios instead.
pub fn qi_halfcase_ratio(t: f64, n_list: &[usize]) -> Result<Vec<(usize, f64)>> {
    if t == 0.0 {
        return Err(Error::InvalidParam("halfcase ratio needs t != 0".into()));
    }
    if n_list.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} point(s)", n_list.len())));
    }
    Ok(n_list
        .iter()
        .map(|&n| {
            let qi = qi_second_moment_exact(&QiKernel::new(KernelVariant::Full, 0.5, n), t);
            (n, qi / (t * t * (n as f64).ln().powi(2)))
        })
        .collect())
}

/// Integrability-exponent schedule `(p, r₁, τ_R)` with the admissibility
/// constraint `p²/(2p-1) > r₁` (which forces `r₁ < p`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSchedule {
    pub p: f64,
    pub r1: f64,
    pub tau_r: f64,
}

impl ExponentSchedule {
    pub fn new(p: f64, r1: f64, tau_r: f64) -> Result<Self> {
        let sched = ExponentSchedule { p, r1, tau_r };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !(self.r1 > 1.0) || !(self.tau_r > 0.0) {
            return Err(Error::InvalidParam(format!(
                "schedule needs p > 1, r1 > 1, tau_r > 0; got ({}, {}, {})",
                self.p, self.r1, self.tau_r
            )));
        }
        if self.p * self.p / (2.0 * self.p - 1.0) <= self.r1 {
            return Err(Error::InvalidParam(format!(
                "admissibility p²/(2p-1) > r1 violated: p = {}, r1 = {}",
                self.p, self.r1
            )));
        }
        Ok(())
    }

    fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn r1_conj(&self) -> f64 {
        self.r1 / (self.r1 - 1.0)
    }

    /// Closed form `r_j = [1 - (p'/r₁') e^{-j log p'}]^{-1}`, `j >= 1`.
    pub fn r_j(&self, j: u32) -> Result<f64> {
        self.validate()?;
        if j == 0 {
            return Err(Error::InvalidParam("exponent index starts at 1".into()));
        }
        let lp = self.p_conj().ln();
        Ok(1.0 / (1.0 - self.p_conj() / self.r1_conj() * (-(j as f64) * lp).exp()))
    }

    /// The defining recursion `r_{j+1} = r_j p / (p + r_j - 1)` from `r_1`;
    /// the independent route against which the closed form is checked.
    pub fn r_j_recursive(&self, j: u32) -> f64 {
        let mut r = self.r1;
        for _ in 1..j {
            r = r * self.p / (self.p + r - 1.0);
        }
        r
    }

    /// Time-continuous exponent `q(t) = [1 - (p'/r₁') exp(-(2t/τ_R) log p')]^{-1}`,
    /// monotonically decreasing with `q(0) = r₁(p-1)/(p-r₁) < p` and limit 1.
    pub fn integrability_exponent(&self, t: f64) -> Result<f64> {
        self.validate()?;
        if t < 0.0 {
            return Err(Error::InvalidParam("q(t) is defined for t >= 0".into()));
        }
        let lp = self.p_conj().ln();
        Ok(1.0 / (1.0 - self.p_conj() / self.r1_conj() * (-(2.0 * t / self.tau_r) * lp).exp()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleParams {
    /// Smallest `p` with `p²/(2p-1) = r₁`: the root `r₁ + sqrt(r₁(r₁-1))`.
    pub p_min: f64,
    /// `τ_R` solving `r₁(p-1)/(p-r₁) · τ_R = c₀/R` for the chosen `p`.
    pub tau_r: f64,
}

/// Admissible `(p, τ_R)` pair for the iteration: `p` is caller-chosen and must
/// exceed `p_min(r₁)`.
pub fn admissible_params(r1: f64, c0: f64, r_ball: f64, p: f64) -> Result<AdmissibleParams> {
    if r1 < 1.0 {
        return Err(Error::InvalidParam(format!("r1 must be at least 1, got {r1}")));
    }
    if !(c0 > 0.0) || !(r_ball > 0.0) {
        return Err(Error::InvalidParam("c0 and R must be positive".into()));
    }
    let p_min = r1 + (r1 * (r1 - 1.0)).sqrt();
    if p <= p_min {
        return Err(Error::InvalidParam(format!(
            "p = {p} must exceed p_min = {p_min}"
        )));
    }
    let q0 = r1 * (p - 1.0) / (p - r1);
    Ok(AdmissibleParams { p_min, tau_r: (c0 / r_ball) / q0 })
}
