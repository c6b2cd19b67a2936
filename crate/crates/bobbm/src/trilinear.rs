//! The trilinear energy derivative `Q_{s,N}` and its symmetrised split.
//!
//! `Q_{s,N}(u)` is minus the time derivative at `t = 0` of half the squared
//! `H^{s+1/2}` norm along the truncated flow. On the Fourier side it is
//!
//! ```text
//! Q_{s,N}(u) = Σ_{0<|n|<=N} |n|^{2s+1} (i n/(1+|n|)) (P_{<=N} u²)^(n) û(-n),
//! ```
//!
//! a real number. Summing instead over the zero-sum frequency lattice gives
//! the kernel form `-i sgn(n₁)|n₁|^{2s+2}(1+|n₁|)^{-1} û₁û₂û₃`, which splits
//! into a dispersive part with kernel `-(i/3) Ψ_s(n̄)` and a regularised part
//! with kernel `i sgn(n₁)|n₁|^{2s+1}(1+|n₁|)^{-1}`; the normalisation is the
//! unique one making `q1 + q2 = q_full` exact. Fields with a nonzero mean are
//! unrepresentable here, so the mean-zero precondition holds structurally.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::spectral::{multiply, FourierField};
use crate::stream::tree_sum;
use crate::{Error, Result};

/// Zero-sum triple of nonzero frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyTriple {
    n1: i64,
    n2: i64,
    n3: i64,
}

impl FrequencyTriple {
    pub fn new(n1: i64, n2: i64, n3: i64) -> Result<Self> {
        if n1 + n2 + n3 != 0 || n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(Error::InvalidParam(format!(
                "({n1},{n2},{n3}) is not a zero-sum triple of nonzero frequencies"
            )));
        }
        Ok(FrequencyTriple { n1, n2, n3 })
    }

    /// The third entry determined by the first two, when admissible.
    pub fn from_pair(n1: i64, n2: i64) -> Option<Self> {
        let n3 = -(n1 + n2);
        Self::new(n1, n2, n3).ok()
    }

    pub fn entries(&self) -> [i64; 3] {
        [self.n1, self.n2, self.n3]
    }

    pub fn negated(&self) -> Self {
        FrequencyTriple { n1: -self.n1, n2: -self.n2, n3: -self.n3 }
    }

    /// Entries sorted by decreasing magnitude, `|n_(1)| >= |n_(2)| >= |n_(3)|`,
    /// ties broken by original index order.
    pub fn ordered(&self) -> [i64; 3] {
        let mut e = self.entries();
        e.sort_by_key(|n| std::cmp::Reverse(n.abs()));
        e
    }

    pub fn max_abs(&self) -> i64 {
        self.ordered()[0].abs()
    }
}

/// Dispersive weight `Ψ_s(n̄) = Σ_j |n_j|^{2s+1} sgn(n_j)`; odd under
/// `n̄ → -n̄`.
pub fn psi(s: f64, triple: &FrequencyTriple) -> f64 {
    triple
        .entries()
        .iter()
        .map(|&n| (n.abs() as f64).powf(2.0 * s + 1.0) * n.signum() as f64)
        .sum()
}

/// Resonance function `Φ(n̄) = Σ_j n_j/(1+|n_j|)`; bounded by 3 and bounded
/// away from zero on the zero-sum lattice (minimum 1/3 at `±(1,1,-2)`).
pub fn phase(triple: &FrequencyTriple) -> f64 {
    triple
        .entries()
        .iter()
        .map(|&n| n as f64 / (1.0 + n.abs() as f64))
        .sum()
}

/// Which trilinear kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FormKind {
    Full,
    Dispersive,
    Regularised,
}

/// Per-mode evaluation shared by the three kernel forms: with
/// `m(n)` the form's multiplier, returns `Σ_{0<|n|<=N} m(n) (u²)^(n) û(-n)`.
/// The sum is exactly real by conjugate symmetry; the imaginary residue is
/// checked and discarded.
fn per_mode_form(u: &FourierField, s: f64, n: usize, kind: FormKind) -> f64 {
    let w = u.project_leq(n);
    if w.coeffs().iter().filter(|c| c.norm_sqr() > 0.0).count() < 2 {
        // fewer than two active modes admit no zero-sum triple
        return 0.0;
    }
    let sq = multiply(&w, &w).project_leq(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 1..=n as i64 {
        let kf = k as f64;
        let m_abs = match kind {
            FormKind::Full => kf.powf(2.0 * s + 1.0) * kf / (1.0 + kf),
            FormKind::Dispersive => kf.powf(2.0 * s + 1.0),
            FormKind::Regularised => kf.powf(2.0 * s + 1.0) / (1.0 + kf),
        };
        // multipliers: full  i n/(1+|n|) |n|^{2s+1}   (odd, imaginary)
        //              disp  i sgn(n) |n|^{2s+1}
        //              reg  -i sgn(n) |n|^{2s+1}/(1+|n|)
        let m_pos = match kind {
            FormKind::Full | FormKind::Dispersive => Complex64::new(0.0, m_abs),
            FormKind::Regularised => Complex64::new(0.0, -m_abs),
        };
        acc += m_pos * sq.coeff(k) * w.coeff(-k);
        acc += m_pos.conj() * sq.coeff(-k) * w.coeff(k);
    }
    debug_assert!(
        acc.im.abs() <= 1e-12 * acc.norm().max(1e-300),
        "imaginary residue {} on |sum| {}",
        acc.im,
        acc.norm()
    );
    acc.re
}

/// `Q_{s,N}(u)`, fast per-mode backend (`O(N log N)`).
pub fn q_full(u: &FourierField, s: f64, n: usize) -> f64 {
    per_mode_form(u, s, n, FormKind::Full)
}

/// `Q_{s,N}(u)` by direct triple sum over the zero-sum lattice with kernel
/// `-i sgn(n₁)|n₁|^{2s+2}(1+|n₁|)^{-1}` (`O(N²)`); the oracle backend.
/// Parallel over the outer frequency with a deterministic tree reduction.
pub fn q_full_direct(u: &FourierField, s: f64, n: usize) -> f64 {
    let w = u.project_leq(n);
    let nn = n as i64;
    let block = 32usize;
    let starts: Vec<i64> = (1..=nn).step_by(block).collect();
    let partials: Vec<f64> = starts
        .par_iter()
        .map(|&start| {
            let stop = (start + block as i64 - 1).min(nn);
            let mut acc = Complex64::new(0.0, 0.0);
            for a1 in start..=stop {
                for &n1 in &[a1, -a1] {
                    let k1 = (a1 as f64).powf(2.0 * s + 2.0) / (1.0 + a1 as f64);
                    let kernel = Complex64::new(0.0, -(n1.signum() as f64) * k1);
                    for n2 in -nn..=nn {
                        if n2 == 0 {
                            continue;
                        }
                        let n3 = -(n1 + n2);
                        if n3 == 0 || n3.abs() > nn {
                            continue;
                        }
                        acc += kernel * w.coeff(n1) * w.coeff(n2) * w.coeff(n3);
                    }
                }
            }
            acc.re
        })
        .collect();
    tree_sum(&partials)
}

/// The symmetrised decomposition `(q1, q2)` with `q1 + q2 = q_full` exactly:
/// `q1 = -(i/3) Σ Ψ_s(n̄) û₁û₂û₃` and
/// `q2 = i Σ sgn(n₁)|n₁|^{2s+1}(1+|n₁|)^{-1} û₁û₂û₃`.
pub fn q_split(u: &FourierField, s: f64, n: usize) -> (f64, f64) {
    // The (1/3)Ψ_s kernel re-sums against the symmetric product to a single
    // sgn(n)|n|^{2s+1} factor per mode, so both parts reduce to weighted
    // per-mode sums over u².
    let q1 = per_mode_form(u, s, n, FormKind::Dispersive);
    let q2 = per_mode_form(u, s, n, FormKind::Regularised);
    (q1, q2)
}

/// Lemma-scan: maximum of `|Ψ_s(n̄)| / (|n_(1)|^{2s} |n_(3)|)` over zero-sum
/// triples with `|n_j| <= N` in the separated regime `|n_(2)| >= gap·|n_(3)|`.
pub fn psi_bound_constant(s: f64, n: usize, gap: f64) -> f64 {
    assert!(s > 0.5 && gap > 1.0);
    let nn = n as i64;
    let rows: Vec<i64> = (1..=nn).collect();
    rows.par_iter()
        .map(|&n1| {
            let mut best = 0.0f64;
            for n2 in -nn..=nn {
                if n2 == 0 {
                    continue;
                }
                let Some(t) = FrequencyTriple::from_pair(n1, n2) else { continue };
                if t.max_abs() > nn {
                    continue;
                }
                let o = t.ordered();
                if (o[1].abs() as f64) < gap * o[2].abs() as f64 {
                    continue;
                }
                let ratio = psi(s, &t).abs()
                    / ((o[0].abs() as f64).powf(2.0 * s) * o[2].abs() as f64);
                best = best.max(ratio);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Brute-force minimum of `|Φ|` over the truncated lattice, with the set of
/// minimisers (canonicalised as magnitude-sorted triples).
pub fn min_abs_phase(n: usize) -> (f64, Vec<[i64; 3]>) {
    let nn = n as i64;
    let mut min = f64::INFINITY;
    let mut argmins: Vec<[i64; 3]> = Vec::new();
    for n1 in -nn..=nn {
        if n1 == 0 {
            continue;
        }
        for n2 in n1..=nn {
            if n2 == 0 {
                continue;
            }
            let Some(t) = FrequencyTriple::from_pair(n1, n2) else { continue };
            if t.max_abs() > nn {
                continue;
            }
            let v = phase(&t).abs();
            if v < min - 1e-15 {
                min = v;
                argmins.clear();
            }
            if (v - min).abs() <= 1e-15 {
                let key = t.ordered();
                if !argmins.contains(&key) {
                    argmins.push(key);
                }
            }
        }
    }
    (min, argmins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{flow, flow_trajectory, simpson, FlowParams};
    use crate::gaussian::GaussianSpec;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// u = 2cos x + 2sin 2x: û(±1) = 1, û(2) = -i, û(-2) = i.
    fn hand_field() -> FourierField {
        FourierField::from_coeffs(vec![c(1.0, 0.0), c(0.0, -1.0)])
    }

    #[test]
    fn psi_hand_values_and_oddness() {
        let t = FrequencyTriple::new(1, 1, -2).unwrap();
        assert_eq!(psi(1.0, &t), -6.0);
        assert_eq!(psi(0.5, &t), -2.0);
        assert_eq!(psi(0.5, &t.negated()), 2.0);
    }

    #[test]
    fn phase_hand_value_and_oddness() {
        let t = FrequencyTriple::new(1, 1, -2).unwrap();
        assert!((phase(&t) - 1.0 / 3.0).abs() < 1e-15);
        assert!((phase(&t.negated()) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn phase_minimum_over_lattice() {
        let (min, argmins) = min_abs_phase(512);
        assert!((min - 1.0 / 3.0).abs() < 1e-14);
        // only ±(1,1,-2) up to permutation
        assert_eq!(argmins.len(), 2);
        assert!(argmins.contains(&[-2, 1, 1]));
        assert!(argmins.contains(&[2, -1, -1]));
    }

    #[test]
    fn triple_constructor_rejects_bad_input() {
        assert!(FrequencyTriple::new(1, 1, 1).is_err());
        assert!(FrequencyTriple::new(0, 1, -1).is_err());
        assert!(FrequencyTriple::from_pair(1, -1).is_none());
        let t = FrequencyTriple::new(3, -4, 1).unwrap();
        assert_eq!(t.ordered(), [-4, 3, 1]);
    }

    #[test]
    fn q_full_hand_value() {
        let u = hand_field();
        let q = q_full(&u, 0.5, 2);
        assert!((q + 10.0 / 3.0).abs() < 1e-13, "q = {q}");
        let qd = q_full_direct(&u, 0.5, 2);
        assert!((qd + 10.0 / 3.0).abs() < 1e-13, "direct = {qd}");
    }

    #[test]
    fn q_split_hand_values_and_identity() {
        let u = hand_field();
        let (q1, q2) = q_split(&u, 0.5, 2);
        assert!((q1 + 4.0).abs() < 1e-13, "q1 = {q1}");
        assert!((q2 - 2.0 / 3.0).abs() < 1e-13, "q2 = {q2}");
        assert!((q1 + q2 + 10.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn even_fields_give_zero() {
        // all-real coefficients: -i times a real symmetric sum must be real,
        // forcing zero (up to transform round-off)
        let u = FourierField::from_coeffs(vec![c(0.7, 0.0), c(-0.3, 0.0), c(0.11, 0.0)]);
        assert!(q_full(&u, 0.8, 3).abs() < 1e-14);
        let (q1, q2) = q_split(&u, 0.8, 3);
        assert!(q1.abs() < 1e-14 && q2.abs() < 1e-14);
        // the direct backend sees exactly real products and returns exact zero
        assert_eq!(q_full_direct(&u, 0.8, 3), 0.0);
    }

    #[test]
    fn degenerate_single_mode_short_circuits() {
        let u = FourierField::from_coeffs(vec![c(0.3, 0.9)]);
        assert_eq!(q_full(&u, 0.75, 1), 0.0);
    }

    #[test]
    fn backends_agree_on_gaussian_samples() {
        let spec = GaussianSpec::new(0.75, 24, 17);
        for i in 0..6 {
            let u = spec.sample(i);
            let fast = q_full(&u, spec.s, 24);
            let direct = q_full_direct(&u, spec.s, 24);
            let scale = fast.abs().max(direct.abs()).max(1e-300);
            assert!((fast - direct).abs() / scale < 1e-10, "{fast} vs {direct}");
            let (q1, q2) = q_split(&u, spec.s, 24);
            assert!(((q1 + q2) - fast).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn linear_part_orthogonality() {
        // Σ |n|^{2s+1} (i n/(1+|n|)) |û(n)|² cancels exactly over ±n.
        let spec = GaussianSpec::new(0.6, 32, 23);
        let u = spec.sample(0);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=32i64 {
            let kf = k as f64;
            let m = Complex64::new(0.0, kf.powf(2.0 * 0.6 + 1.0) * kf / (1.0 + kf));
            acc += m * u.coeff(k) * u.coeff(-k);
            acc += m.conj() * u.coeff(-k) * u.coeff(k);
        }
        assert!(acc.norm() <= 1e-14 * u.sobolev_norm(0.6).powi(2));
    }

    #[test]
    fn centred_difference_matches_q_full() {
        let spec = GaussianSpec::new(0.75, 16, 29);
        let params = FlowParams::default();
        let h = 1e-4;
        for i in 0..3 {
            let u = spec.sample(i).project_leq(16);
            let q = q_full(&u, spec.s, 16);
            let half_sq = |v: &FourierField| 0.5 * v.sobolev_norm(spec.s + 0.5).powi(2);
            let plus = half_sq(&flow(&u, h, 16, &params).unwrap());
            let minus = half_sq(&flow(&u, -h, 16, &params).unwrap());
            let fd = -(plus - minus) / (2.0 * h);
            assert!((fd - q).abs() / q.abs().max(1e-12) < 1e-5, "fd {fd} vs q {q}");
        }
    }

    #[test]
    fn ftc_identity_along_trajectory() {
        // ½‖u‖² - ½‖Φ_t u‖² = ∫_0^t Q(Φ_τ u) dτ in H^{s+1/2}.
        let spec = GaussianSpec::new(0.75, 16, 37);
        let params = FlowParams::default();
        let t = 0.5;
        let u = spec.sample(0).project_leq(16);
        let traj = flow_trajectory(&u, t, 16, &params).unwrap();
        let qs: Vec<f64> = traj.states.iter().map(|v| q_full(v, spec.s, 16)).collect();
        let integral = simpson(&qs, traj.step());
        let half_sq = |v: &FourierField| 0.5 * v.sobolev_norm(spec.s + 0.5).powi(2);
        let lhs = half_sq(&u) - half_sq(traj.states.last().unwrap());
        assert!(
            (integral - lhs).abs() / lhs.abs().max(1e-12) < 1e-6,
            "residual {}",
            (integral - lhs).abs() / lhs.abs()
        );
    }

    #[test]
    fn translation_invariance_and_cubic_scaling() {
        let spec = GaussianSpec::new(0.75, 16, 41);
        let u = spec.sample(0);
        let q = q_full(&u, spec.s, 16);
        let shifted = q_full(&u.translate(0.83), spec.s, 16);
        assert!((q - shifted).abs() / q.abs() < 1e-12);
        let lam = 1.7;
        let scaled = q_full(&u.scaled(lam), spec.s, 16);
        assert!((scaled - lam.powi(3) * q).abs() / q.abs() < 1e-12);
    }

    #[test]
    fn psi_bound_constant_hand_ratio_and_stability() {
        // (10,-9,-1) at s=1: |1000-729-1|/(100·1) = 2.7.
        let t = FrequencyTriple::new(10, -9, -1).unwrap();
        let o = t.ordered();
        let ratio = psi(1.0, &t).abs() / ((o[0].abs() as f64).powi(2) * o[2].abs() as f64);
        assert!((ratio - 2.7).abs() < 1e-12);

        let c64 = psi_bound_constant(1.0, 64, 4.0);
        let c128 = psi_bound_constant(1.0, 128, 4.0);
        let c256 = psi_bound_constant(1.0, 256, 4.0);
        assert!(c64 <= c128 + 1e-12 && c128 <= c256 + 1e-12);
        assert!((c256 - c64) / c64 < 0.05, "not saturating: {c64} {c128} {c256}");
        // mean-value-theorem envelope 2s+1+ε
        assert!(c256 <= 3.1, "constant {c256}");
    }

    #[test]
    fn growth_envelope_in_cutoff() {
        // |Q| <= C N^{2s+1/2} ‖u‖³_{H^{1/2}} with C calibrated at N = 8.
        let s = 0.75;
        let ratio_max = |n: usize, seed: u64| {
            let spec = GaussianSpec::new(s, n, seed);
            (0..40)
                .map(|i| {
                    let u = spec.sample(i);
                    let denom = (n as f64).powf(2.0 * s + 0.5) * u.sobolev_norm(0.5).powi(3);
                    q_full(&u, s, n).abs() / denom
                })
                .fold(0.0, f64::max)
        };
        let c8 = ratio_max(8, 51);
        for n in [16usize, 32] {
            let r = ratio_max(n, 52);
            assert!(r <= 2.0 * c8, "N={n}: ratio {r} vs calibration {c8}");
        }
    }

    proptest! {
        #[test]
        fn psi_and_phase_odd(n1 in 1i64..200, n2 in -200i64..200, s in 0.1f64..1.5) {
            prop_assume!(n2 != 0);
            if let Some(t) = FrequencyTriple::from_pair(n1, n2) {
                prop_assert!((psi(s, &t) + psi(s, &t.negated())).abs() <= 1e-9 * psi(s, &t).abs().max(1.0));
                prop_assert!((phase(&t) + phase(&t.negated())).abs() < 1e-12);
                prop_assert!(phase(&t).abs() >= 1.0/3.0 - 1e-12);
            }
        }
    }
}
