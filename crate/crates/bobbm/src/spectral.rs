//! Fourier-side representation of mean-zero real functions on the torus.
//!
//! A [`FourierField`] stores the coefficients `û(n)` for `n = 1..=N` only;
//! the coefficient at `-n` is implicitly `conj(û(n))` and the zero mode is
//! identically absent. Reality and mean-zero therefore hold by construction,
//! and all positive-frequency sums are doubled where a full-spectrum formula
//! is intended. The Fourier convention is `û(n) = (2π)^{-1} ∫ e^{-inx} u dx`,
//! so `‖u‖²_{L²} = 2π Σ_{n≠0} |û(n)|²` while `‖u‖²_{H^σ} = Σ_{n≠0}
//! |n|^{2σ}|û(n)|²` carries no `2π`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean-zero real trigonometric polynomial, positive-frequency coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    coeffs: Vec<Complex64>,
}

impl FourierField {
    /// Zero field with frequencies up to `max_freq`.
    pub fn zeros(max_freq: usize) -> Self {
        FourierField {
            coeffs: vec![Complex64::new(0.0, 0.0); max_freq],
        }
    }

    /// Field from coefficients for `n = 1..=coeffs.len()`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        FourierField { coeffs }
    }

    /// Largest stored frequency `N`.
    pub fn max_freq(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficients for `n = 1..=N` in order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Signed-frequency access: `û(n)` for any integer `n`, zero outside the
    /// stored band and at `n = 0`.
    #[inline]
    pub fn coeff(&self, n: i64) -> Complex64 {
        let a = n.unsigned_abs() as usize;
        if n == 0 || a > self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else if n > 0 {
            self.coeffs[a - 1]
        } else {
            self.coeffs[a - 1].conj()
        }
    }

    /// Set `û(n)` for a positive frequency `1 <= n <= N`.
    pub fn set_coeff(&mut self, n: usize, value: Complex64) {
        assert!(n >= 1 && n <= self.coeffs.len(), "frequency out of range");
        self.coeffs[n - 1] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm_sqr() == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `‖u‖_{H^σ} = (Σ_{0<|n|<=N} |n|^{2σ} |û(n)|²)^{1/2}`.
    pub fn sobolev_norm(&self, sigma: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let n = (k + 1) as f64;
            acc += n.powf(2.0 * sigma) * c.norm_sqr();
        }
        (2.0 * acc).sqrt()
    }

    /// `‖u‖_{L²} = (2π Σ_{0<|n|<=N} |û(n)|²)^{1/2}`; note the `2π` factor
    /// distinguishing L² from H⁰.
    pub fn l2_norm(&self) -> f64 {
        let acc: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (4.0 * std::f64::consts::PI * acc).sqrt()
    }

    /// Conserved energy `E(u) = (‖u‖²_{L²} + 2π ‖u‖²_{H^{1/2}})^{1/2}`.
    pub fn energy(&self) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let n = (k + 1) as f64;
            acc += (1.0 + n) * c.norm_sqr();
        }
        (4.0 * std::f64::consts::PI * acc).sqrt()
    }

    /// Sharp projector `P_{<=M}`: zero out frequencies above `M`; the result
    /// stores `min(M, N)` frequencies.
    pub fn project_leq(&self, m: usize) -> FourierField {
        let keep = m.min(self.coeffs.len());
        FourierField {
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    /// Littlewood-Paley projector with multiplier `φ(n / n_dyadic)`,
    /// `φ(ξ) = η(ξ) - η(2ξ)`; `n_dyadic` must be a power of two.
    pub fn dyadic_project(&self, n_dyadic: usize) -> Result<FourierField> {
        if n_dyadic == 0 || !n_dyadic.is_power_of_two() {
            return Err(Error::InvalidParam(format!(
                "dyadic_project needs a power of two, got {n_dyadic}"
            )));
        }
        let nd = n_dyadic as f64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * phi_bump((k + 1) as f64 / nd))
            .collect();
        Ok(FourierField { coeffs })
    }

    /// Apply a Fourier multiplier `m(n)`. The multiplier must satisfy
    /// `m(-n) = conj(m(n))`, otherwise reality would break and the call is
    /// rejected.
    pub fn apply_symbol<F: Fn(i64) -> Complex64>(&self, m: F) -> Result<FourierField> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (k, c) in self.coeffs.iter().enumerate() {
            let n = (k + 1) as i64;
            let mp = m(n);
            let mm = m(-n);
            let err = (mm - mp.conj()).norm();
            if err > 1e-12 * (1.0 + mp.norm()) {
                return Err(Error::RealityViolation { n });
            }
            coeffs.push(c * mp);
        }
        Ok(FourierField { coeffs })
    }

    /// Grid values `u(2πj/len)` for `j = 0..len`. Exact (up to round-off)
    /// whenever `len >= 2N + 1`.
    pub fn synthesize(&self, len: usize) -> Vec<f64> {
        assert!(len >= 2 * self.coeffs.len() + 1, "grid too coarse");
        let spectrum = self.full_spectrum(len);
        let grid = fft_with_len(spectrum, FftDirection::Inverse);
        grid.into_iter().map(|z| z.re).collect()
    }

    /// Largest imaginary residue on a synthesis grid, relative to the field
    /// magnitude; a direct check of the reality invariant.
    pub fn reality_defect(&self, len: usize) -> f64 {
        let spectrum = self.full_spectrum(len);
        let grid = fft_with_len(spectrum, FftDirection::Inverse);
        let max_im = grid.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let max_abs = grid.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max_abs == 0.0 {
            0.0
        } else {
            max_im / max_abs
        }
    }

    /// Full spectrum of length `len` with negative frequencies wrapped to the
    /// top half, ready for an inverse transform.
    fn full_spectrum(&self, len: usize) -> Vec<Complex64> {
        assert!(len >= 2 * self.coeffs.len() + 1);
        let mut spec = vec![Complex64::new(0.0, 0.0); len];
        for (k, c) in self.coeffs.iter().enumerate() {
            let n = k + 1;
            spec[n] = *c;
            spec[len - n] = c.conj();
        }
        spec
    }

    /// `self + a * other`; both fields must share the same `max_freq`.
    pub fn add_scaled(&self, a: f64, other: &FourierField) -> FourierField {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        FourierField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> FourierField {
        FourierField {
            coeffs: self.coeffs.iter().map(|x| a * x).collect(),
        }
    }

    /// Spatial translation `u(· - θ)`: multiplies `û(n)` by `e^{-inθ}`.
    pub fn translate(&self, theta: f64) -> FourierField {
        FourierField {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::from_polar(1.0, -((k + 1) as f64) * theta))
                .collect(),
        }
    }

    /// Max relative coefficient difference against `other` (padding the
    /// shorter spectrum with zeros), normalised by the larger field norm.
    pub fn rel_distance(&self, other: &FourierField) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for k in 1..=n {
            let a = self.coeff(k as i64);
            let b = other.coeff(k as i64);
            num = num.max((a - b).norm());
            den = den.max(a.norm().max(b.norm()));
        }
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// Smooth step `η`: 1 on `|ξ| <= 1`, 0 on `|ξ| >= 2`, strictly between
/// otherwise. Built from `ψ(x) = e^{-1/x}` for `x > 0`.
pub fn eta_bump(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
        let up = psi(2.0 - a);
        up / (up + psi(a - 1.0))
    }
}

/// Dyadic annulus bump `φ(ξ) = η(ξ) - η(2ξ)`, supported in `1/2 < |ξ| < 2`.
pub fn phi_bump(xi: f64) -> f64 {
    eta_bump(xi) - eta_bump(2.0 * xi)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            FftDirection::Forward => p.plan_fft_forward(len),
            FftDirection::Inverse => p.plan_fft_inverse(len),
        }
    })
}

fn fft_with_len(mut buf: Vec<Complex64>, dir: FftDirection) -> Vec<Complex64> {
    let fft = plan(buf.len(), dir);
    fft.process(&mut buf);
    buf
}

/// Exact pointwise product of two fields, mean mode dropped, computed by a
/// zero-padded transform of length `>= 2(N_u + N_v) + 1` so no aliasing can
/// occur. Output degree is `N_u + N_v`.
pub fn multiply(u: &FourierField, v: &FourierField) -> FourierField {
    let out_deg = u.max_freq() + v.max_freq();
    if out_deg == 0 {
        return FourierField::zeros(0);
    }
    let len = (2 * out_deg + 1).next_power_of_two();
    let gu = fft_with_len(u.full_spectrum(len), FftDirection::Inverse);
    let gv = fft_with_len(v.full_spectrum(len), FftDirection::Inverse);
    let prod: Vec<Complex64> = gu.iter().zip(&gv).map(|(a, b)| a * b).collect();
    let spec = fft_with_len(prod, FftDirection::Forward);
    let scale = 1.0 / len as f64;
    let coeffs = (1..=out_deg).map(|n| spec[n] * scale).collect();
    FourierField { coeffs }
}

/// Direct `O(N²)` convolution; the oracle backend for [`multiply`].
pub fn multiply_direct(u: &FourierField, v: &FourierField) -> FourierField {
    let nu = u.max_freq() as i64;
    let nv = v.max_freq() as i64;
    let out_deg = (nu + nv) as usize;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); out_deg];
    for n in 1..=out_deg as i64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in -nu..=nu {
            if a == 0 {
                continue;
            }
            let b = n - a;
            if b == 0 || b.abs() > nv {
                continue;
            }
            acc += u.coeff(a) * v.coeff(b);
        }
        coeffs[(n - 1) as usize] = acc;
    }
    FourierField { coeffs }
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    #[serde(rename = "N")]
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for FourierField {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        FieldJson {
            n: self.coeffs.len(),
            re: self.coeffs.iter().map(|c| c.re).collect(),
            im: self.coeffs.iter().map(|c| c.im).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FourierField {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = FieldJson::deserialize(de)?;
        if raw.re.len() != raw.n || raw.im.len() != raw.n {
            return Err(serde::de::Error::custom("field arrays must have length N"));
        }
        Ok(FourierField {
            coeffs: raw
                .re
                .into_iter()
                .zip(raw.im)
                .map(|(re, im)| Complex64::new(re, im))
                .collect(),
        })
    }
}
