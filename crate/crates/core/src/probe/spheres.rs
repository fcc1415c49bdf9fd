//! Empirical three-spheres (three-circles) inequality on concentric disks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    L2,
    Linf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThreeSpheres {
    pub radii: [f64; 3],
    /// `‖u‖` on the disks of radii `ρ₁, ρ₂, ρ₃`.
    pub norms: [f64; 3],
    /// Hadamard exponent `ln(ρ₃/ρ₂) / ln(ρ₃/ρ₁)`.
    pub alpha: f64,
    /// Interpolation exponent `ln(2ρ₃/(ρ₂+ρ₃)) / ln(ρ₃/ρ₁)`.
    pub beta: f64,
    /// `‖u‖_{ρ₂}`.
    pub lhs: f64,
    /// `‖u‖_{ρ₁}^α ‖u‖_{ρ₃}^{1−α}`.
    pub rhs_alpha: f64,
    /// `‖u‖_{ρ₁}^β ‖u‖_{ρ₃}^{1−β}`.
    pub rhs_beta: f64,
    /// Empirical constants `lhs / rhs`.
    pub q_alpha: f64,
    pub q_beta: f64,
}

const RADIAL: usize = 160;
const ANGULAR: usize = 720;

/// Norm of `u` on the disk `B_ρ(center)`; `None` if `u` is undefined there.
fn disk_norm<F: Fn(&Point) -> Option<C64> + Sync>(u: &F, center: &Point, rho: f64, mode: NormMode) -> Option<f64> {
    match mode {
        NormMode::Linf => {
            // |u| is subharmonic for the solutions of interest; sample densely
            // with the boundary circle included
            let mut m: f64 = 0.0;
            for i in 0..=RADIAL {
                let r = rho * i as f64 / RADIAL as f64;
                let n_theta = if i == 0 { 1 } else { ANGULAR };
                for j in 0..n_theta {
                    let t = 2.0 * PI * j as f64 / ANGULAR as f64;
                    let p = Point::new(center.x + r * t.cos(), center.y + r * t.sin());
                    m = m.max(u(&p)?.norm());
                }
            }
            Some(m)
        }
        NormMode::L2 => {
            // Gauss–Legendre in r (two points per panel), trapezoid in θ
            let g = 0.5 / 3f64.sqrt();
            let dr = rho / RADIAL as f64;
            let dt = 2.0 * PI / ANGULAR as f64;
            let mut s = 0.0;
            for i in 0..RADIAL {
                for off in [0.5 - g, 0.5 + g] {
                    let r = (i as f64 + off) * dr;
                    for j in 0..ANGULAR {
                        let t = j as f64 * dt;
                        let p = Point::new(center.x + r * t.cos(), center.y + r * t.sin());
                        s += u(&p)?.norm_sqr() * r * 0.5 * dr * dt;
                    }
                }
            }
            Some(s.sqrt())
        }
    }
}

/// Norms of `u` on three concentric disks and the empirical constants of the
/// interpolation inequality `‖u‖_{ρ₂} ≤ Q ‖u‖_{ρ₁}^θ ‖u‖_{ρ₃}^{1−θ}`.
pub fn three_spheres_check<F>(u: F, center: Point, rho1: f64, rho2: f64, rho3: f64, mode: NormMode) -> Result<ThreeSpheres>
where
    F: Fn(&Point) -> Option<C64> + Sync,
{
    if !(0.0 < rho1 && rho1 < rho2 && rho2 < rho3) || !rho3.is_finite() {
        return Err(Error::InvalidInput(format!("radii must satisfy 0 < ρ₁ < ρ₂ < ρ₃, got {rho1}, {rho2}, {rho3}")));
    }
    let norm = |rho: f64| {
        disk_norm(&u, &center, rho, mode)
            .ok_or_else(|| Error::Precondition(format!("disk of radius {rho} leaves the field's domain")))
    };
    let norms = [norm(rho1)?, norm(rho2)?, norm(rho3)?];
    let span = (rho3 / rho1).ln();
    let alpha = (rho3 / rho2).ln() / span;
    let beta = (2.0 * rho3 / (rho2 + rho3)).ln() / span;
    let interp = |t: f64| norms[0].powf(t) * norms[2].powf(1.0 - t);
    let (rhs_alpha, rhs_beta) = (interp(alpha), interp(beta));
    let ratio = |lhs: f64, rhs: f64| if lhs == 0.0 { 1.0 } else { lhs / rhs };
    Ok(ThreeSpheres {
        radii: [rho1, rho2, rho3],
        norms,
        alpha,
        beta,
        lhs: norms[1],
        rhs_alpha,
        rhs_beta,
        q_alpha: ratio(norms[1], rhs_alpha),
        q_beta: ratio(norms[1], rhs_beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_is_tight() {
        let r = three_spheres_check(|_: &Point| Some(C64::new(1.0, 0.0)), Point::origin(), 0.1, 0.2, 0.4, NormMode::Linf).unwrap();
        assert_eq!(r.q_alpha, 1.0);
        assert_eq!(r.q_beta, 1.0);
    }

    #[test]
    fn cubic_harmonic_attains_hadamard() {
        let u = |p: &Point| Some(C64::new(p.x.powi(3) - 3.0 * p.x * p.y * p.y, 0.0));
        let r = three_spheres_check(u, Point::origin(), 0.1, 0.25, 0.5, NormMode::Linf).unwrap();
        assert!((r.q_alpha - 1.0).abs() < 1e-12, "{}", r.q_alpha);
        // L² norm on B_ρ of r³cos3θ is ρ⁴ √(π/8)
        let l2 = three_spheres_check(u, Point::origin(), 0.1, 0.25, 0.5, NormMode::L2).unwrap();
        let exact = 0.25f64.powi(4) * (PI / 8.0).sqrt();
        assert!((l2.norms[1] - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn unordered_radii_are_rejected() {
        let u = |_: &Point| Some(C64::new(1.0, 0.0));
        assert!(three_spheres_check(u, Point::origin(), 0.3, 0.2, 0.4, NormMode::L2).is_err());
    }
}
