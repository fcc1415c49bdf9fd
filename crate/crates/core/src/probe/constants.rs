//! Explicit constants of the unique-continuation argument and the iterated
//! modulus of continuity.

use std::cmp::Ordering;
use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::Serialize;

use crate::{Error, Result};

/// `β = ln(8/7) / ln 4`.
pub fn beta() -> f64 {
    (8.0f64 / 7.0).ln() / (2.0 * LN_2)
}

/// `τ_r = ln((12r₁−2r)/(12r₁−3r)) / ln((6r₁−r)/(2r₁))` for `0 < r < 2r₁`.
pub fn tau_r(r: f64, r1: f64) -> Result<f64> {
    if !(r1 > 0.0) || !(r > 0.0 && r < 2.0 * r1) {
        return Err(Error::InvalidInput(format!("τ_r needs 0 < r < 2r₁, got r = {r}, r₁ = {r1}")));
    }
    Ok((r / (12.0 * r1 - 3.0 * r)).ln_1p() / ((6.0 * r1 - r) / (2.0 * r1)).ln())
}

/// Lower bound `1/(12 r₁ ln 3)` for `τ_r / r`.
pub fn tau_slope_bound(r1: f64) -> f64 {
    1.0 / (12.0 * r1 * 3f64.ln())
}

/// `N₁ = A/|B_{r₁}| + 1` in the plane.
pub fn n1(area_bound: f64, r1: f64) -> f64 {
    area_bound / (PI * r1 * r1) + 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantsLedger {
    pub r0: f64,
    pub r1: f64,
    pub lipschitz: f64,
    pub area_bound: f64,
    pub potential_bound: f64,
    pub n_cells: usize,
    pub chain_length: usize,
    pub beta: f64,
    pub n1: f64,
}

impl ConstantsLedger {
    pub fn new(
        r0: f64,
        lipschitz: f64,
        area_bound: f64,
        potential_bound: f64,
        n_cells: usize,
        chain_length: usize,
    ) -> Result<Self> {
        if !(r0 > 0.0 && lipschitz > 0.0 && area_bound > 0.0 && potential_bound > 0.0) {
            return Err(Error::InvalidInput("ledger parameters must be positive".into()));
        }
        let r1 = r0 / 16.0;
        Ok(ConstantsLedger {
            r0,
            r1,
            lipschitz,
            area_bound,
            potential_bound,
            n_cells,
            chain_length,
            beta: beta(),
            n1: n1(area_bound, r1),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallnessExponents {
    pub tau_r: f64,
    pub beta: f64,
    pub n1: f64,
    /// `τ_r / r`.
    pub slope: f64,
    /// `1/(12 r₁ ln 3)`.
    pub slope_bound: f64,
}

impl SmallnessExponents {
    pub fn bound_holds(&self) -> bool {
        self.slope >= self.slope_bound
    }
}

pub fn smallness_exponents(r: f64, ledger: &ConstantsLedger) -> Result<SmallnessExponents> {
    let tau = tau_r(r, ledger.r1)?;
    Ok(SmallnessExponents {
        tau_r: tau,
        beta: ledger.beta,
        n1: ledger.n1,
        slope: tau / r,
        slope_bound: tau_slope_bound(ledger.r1),
    })
}

/// Modulus used in the recursion: `ω(t) = |ln t|^{-p}` for `t < e^{-ℓ₀}`,
/// `ℓ₀^{-p}` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecursionMode {
    /// `p = 1/4`, `ℓ₀ = 3`.
    N3,
    /// `p = 1`, `ℓ₀ = 2`.
    N2Or4,
    /// `p = (n−4)/4`, `ℓ₀ = n`.
    NGe5(usize),
}

impl RecursionMode {
    pub fn new(n: usize) -> Result<Self> {
        match n {
            2 | 4 => Ok(RecursionMode::N2Or4),
            3 => Ok(RecursionMode::N3),
            n if n >= 5 => Ok(RecursionMode::NGe5(n)),
            _ => Err(Error::UnsupportedDimension(n)),
        }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            RecursionMode::N3 => 0.25,
            RecursionMode::N2Or4 => 1.0,
            RecursionMode::NGe5(n) => (n as f64 - 4.0) / 4.0,
        }
    }

    pub fn cutoff(&self) -> f64 {
        match *self {
            RecursionMode::N3 => 3.0,
            RecursionMode::N2Or4 => 2.0,
            RecursionMode::NGe5(n) => n as f64,
        }
    }

    /// `sup ω = ℓ₀^{-p}`.
    pub fn max_value(&self) -> f64 {
        self.cutoff().powf(-self.exponent())
    }

    /// `1/ω(1)`, the constant added to `C` in the iterated bound.
    pub fn shift(&self) -> f64 {
        1.0 / self.max_value()
    }

    pub fn omega(&self, t: f64) -> f64 {
        assert!(t > 0.0, "ω is defined for t > 0");
        if t < (-self.cutoff()).exp() {
            (-t.ln()).powf(-self.exponent())
        } else {
            self.max_value()
        }
    }

    /// `ω` composed `m` times.
    pub fn omega_iter(&self, t: f64, m: usize) -> f64 {
        (0..m).fold(t, |v, _| self.omega(v))
    }

    /// Forward map in `ℓ = −ln t` coordinates: `ω(e^{−ℓ}) = e^{−F(ℓ)}`.
    fn forward_log(&self, l: f64) -> f64 {
        self.exponent() * l.max(self.cutoff()).ln()
    }
}

/// `ω(t) = |ln t|^{-1/4}` for `t < e^{-3}`, else `3^{-1/4}`.
pub fn omega(t: f64) -> f64 {
    RecursionMode::N3.omega(t)
}

/// Positive number `exp^height(top)` (iterated exponential).
///
/// Canonical form: `height = 0` with `top < e^700`, or `height ≥ 1` with
/// `700 ≤ top < e^700`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TowerNumber {
    pub height: u32,
    pub top: f64,
}

const TOWER_CAP: f64 = 700.0;

impl TowerNumber {
    pub fn from_f64(x: f64) -> TowerNumber {
        assert!(x >= 0.0 && x.is_finite(), "tower numbers start from finite nonnegative values");
        TowerNumber { height: 0, top: x }
    }

    pub fn exp(self) -> TowerNumber {
        if self.height == 0 && self.top < TOWER_CAP {
            TowerNumber { height: 0, top: self.top.exp() }
        } else {
            TowerNumber { height: self.height + 1, top: self.top }
        }
    }

    /// Natural logarithm; values below 1 are not supported at height ≥ 1.
    pub fn ln(self) -> TowerNumber {
        if self.height == 0 {
            TowerNumber { height: 0, top: self.top.ln() }
        } else if self.height == 1 {
            TowerNumber { height: 0, top: self.top }
        } else {
            TowerNumber { height: self.height - 1, top: self.top }
        }
    }

    /// `self / p` for `p ≥ 1`, exact at height 0 and 1, else absorbed.
    pub fn div(self, p: f64) -> TowerNumber {
        match self.height {
            0 => TowerNumber { height: 0, top: self.top / p },
            1 => {
                // e^{top}/p = e^{top − ln p}
                let t = self.top - p.ln();
                if t < TOWER_CAP {
                    TowerNumber { height: 0, top: t.exp() }
                } else {
                    TowerNumber { height: 1, top: t }
                }
            }
            _ => self,
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.height == 0 {
            self.top
        } else {
            f64::INFINITY
        }
    }

    pub fn log10(self) -> TowerNumber {
        match self.height {
            0 => TowerNumber::from_f64(self.top.log10()),
            1 => TowerNumber::from_f64(self.top / std::f64::consts::LN_10),
            _ => self.ln(),
        }
    }
}

impl PartialOrd for TowerNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.height.cmp(&other.height) {
            Ordering::Equal => self.top.partial_cmp(&other.top),
            o => Some(o),
        }
    }
}

impl fmt::Display for TowerNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.height {
            0 => write!(f, "{:.6e}", self.top),
            h => write!(f, "exp^{h}({:.6})", self.top),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecursionBound {
    /// `s = (C + 1/ω(1))^{-M}`.
    pub argument: f64,
    /// `−ln ω_M^{-1}(s)`.
    pub inverse_log: TowerNumber,
    /// `(1 − ω_M^{-1}(s)) / ω_M^{-1}(s)`, the bound on `E/ε`.
    pub factor: TowerNumber,
}

/// `(1 − t)/t`, the amplification for a given inverse value.
pub fn bound_from_inverse(t: f64) -> f64 {
    (1.0 - t) / t
}

/// `ω_M^{-1}(s)` in `ℓ = −ln t` coordinates for `0 < s < sup ω`.
pub fn omega_inverse_log(mode: RecursionMode, m: usize, s: f64) -> Result<TowerNumber> {
    if m == 0 {
        return Err(Error::InvalidInput("composition depth M must be at least 1".into()));
    }
    if !(s > 0.0) || s >= mode.max_value() {
        return Err(Error::InvalidInput(format!(
            "ω_M is not invertible at {s}: the argument must lie in (0, {})",
            mode.max_value()
        )));
    }
    let p = mode.exponent();
    // ℓ₁ = s^{-1/p}, then ℓ_{i+1} = exp(ℓ_i / p)
    let mut l = TowerNumber::from_f64(s.powf(-1.0 / p));
    for _ in 1..m {
        l = l.div(p).exp();
    }
    if l.height == 0 && l.top < 1e300 {
        let sigma = -s.ln();
        let target = l.top;
        let (mut lo, mut hi) = (mode.cutoff().ln(), (2.0 * target).ln().max(mode.cutoff().ln() + 1.0));
        let f = |ln_l: f64| (0..m).fold(ln_l.exp(), |v, _| mode.forward_log(v));
        while f(hi) < sigma {
            hi *= 2.0;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < sigma {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi.abs().max(1.0) {
                break;
            }
        }
        l = TowerNumber::from_f64(0.5 * (lo + hi)).exp();
    }
    Ok(l)
}

/// Bound on `E/ε` after `M` steps of the recursion with constant `C`.
pub fn recursion_bound(m: usize, c: f64, mode: RecursionMode) -> Result<RecursionBound> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    let s = (c + mode.shift()).powf(-(m as f64));
    let l = omega_inverse_log(mode, m, s)?;
    // (1 − e^{−ℓ})/e^{−ℓ} = e^ℓ − 1
    let factor = if l.height == 0 && l.top < TOWER_CAP { TowerNumber::from_f64(l.top.exp_m1()) } else { l.exp() };
    Ok(RecursionBound { argument: s, inverse_log: l, factor })
}

/// `δ_k = C (ε + δ_{k−1} + E) ω((ε + δ_{k−1})/(ε + δ_{k−1} + E))`, `δ₀ = 0`.
pub fn delta_sequence(c: f64, eps: f64, e: f64, m: usize, mode: RecursionMode) -> Vec<f64> {
    let mut out = vec![0.0];
    for _ in 0..m {
        let d = *out.last().unwrap();
        let total = eps + d + e;
        out.push(c * total * mode.omega((eps + d) / total));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_value() {
        assert!((beta() - 0.096_322_538_971_197_91).abs() < 1e-16);
        assert!((beta() - (8.0f64 / 7.0).ln() / 4f64.ln()).abs() <= f64::EPSILON * beta());
    }

    #[test]
    fn tau_range_and_limit() {
        let r1 = 0.25 / 16.0;
        let t = tau_r(r1, r1).unwrap();
        assert!(t > 0.0 && t < 1.0);
        let small = tau_r(1e-9 * r1, r1).unwrap();
        assert!(small < 1e-9);
        assert!(((small / (1e-9 * r1)) - tau_slope_bound(r1)).abs() < 1e-6 * tau_slope_bound(r1));
        assert!(tau_r(2.0 * r1, r1).is_err());
        assert!(tau_r(0.0, r1).is_err());
    }

    #[test]
    fn omega_table() {
        assert_eq!(omega(1.0), 3f64.powf(-0.25));
        assert_eq!(omega((-3.0f64).exp()), 3f64.powf(-0.25));
        assert_eq!(omega((-16.0f64).exp()), 0.5);
        assert_eq!(RecursionMode::N3.omega_iter((-16.0f64).exp(), 2), 3f64.powf(-0.25));
    }

    #[test]
    fn single_step_inverse_at_the_cutoff() {
        // C → 0, M = 1: s = 3^{-1/4}⁻... approaches the cutoff e^{-3}
        let b = recursion_bound(1, 1e-12, RecursionMode::N3).unwrap();
        assert!((b.inverse_log.top - 3.0).abs() < 1e-9);
        assert!((b.factor.to_f64() - (3f64.exp() - 1.0)).abs() < 1e-7);
    }

    #[test]
    fn inverse_round_trips() {
        for mode in [RecursionMode::N3, RecursionMode::N2Or4, RecursionMode::NGe5(6)] {
            for m in 1..=2 {
                let s = 0.5 * mode.max_value().powi(m as i32);
                let l = omega_inverse_log(mode, m, s).unwrap();
                if l.height == 0 && l.top < 700.0 {
                    let back = mode.omega_iter((-l.top).exp(), m);
                    assert!((back - s).abs() <= 1e-10 * s, "{mode:?} M={m}: {back} vs {s}");
                }
            }
        }
        assert!(omega_inverse_log(RecursionMode::N3, 1, 0.9).is_err());
        assert!(omega_inverse_log(RecursionMode::N3, 1, 0.0).is_err());
    }

    #[test]
    fn towers_compare_lexicographically() {
        let a = TowerNumber::from_f64(800.0).exp();
        let b = TowerNumber::from_f64(1e300);
        assert!(a > b);
        assert_eq!(a.ln(), TowerNumber::from_f64(800.0));
        assert_eq!(TowerNumber::from_f64(2.0).exp().to_f64(), 2f64.exp());
    }
}
