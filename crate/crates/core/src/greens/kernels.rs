//! Closed-form singular kernels.

use std::f64::consts::PI;

use crate::geometry::Point;
use crate::greens::special::{gamma_half_integer, hankel1};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    /// Hankel fundamental solution of `Δ + q_m`, `n ≥ 4`.
    Fundamental,
    /// `x_n`-derivative of the Laplace fundamental solution, `n ∈ {2, 3}`.
    Dipole,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub n: usize,
    pub kind: KernelKind,
    pub q_m: C64,
}

impl Kernel {
    pub fn dipole(n: usize) -> Result<Kernel> {
        if !(2..=3).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        Ok(Kernel { n, kind: KernelKind::Dipole, q_m: C64::new(0.0, 0.0) })
    }

    pub fn hankel(n: usize, q_m: C64) -> Result<Kernel> {
        if !(4..=9).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        Ok(Kernel { n, kind: KernelKind::Fundamental, q_m })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<C64> {
        match self.kind {
            KernelKind::Dipole => dipole_kernel(self.n, x, y).map(|v| C64::new(v, 0.0)),
            KernelKind::Fundamental => hankel_fundamental(self.n, self.q_m, x, y),
        }
    }
}

fn distance(n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != n || y.len() != n {
        return Err(Error::InvalidInput(format!("points must have {n} coordinates")));
    }
    let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::InvalidInput("kernel is singular at x = y".into()));
    }
    Ok(r)
}

/// n = 3: `−(x₃−y₃)/(4π|x−y|³)`; n = 2: `−(x₂−y₂)/(2π|x−y|²)`.
pub fn dipole_kernel(n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    match n {
        2 => {
            let r = distance(2, x, y)?;
            Ok(-(x[1] - y[1]) / (2.0 * PI * r * r))
        }
        3 => {
            let r = distance(3, x, y)?;
            Ok(-(x[2] - y[2]) / (4.0 * PI * r * r * r))
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Two-dimensional dipole kernel without argument checks.
#[inline]
pub fn dipole2(x: &Point, y: &Point) -> f64 {
    let d = x - y;
    -d.y / (2.0 * PI * d.norm_squared())
}

/// `q_m^{(n−2)/4} H^{(1)}_ν(√q_m r) / (4i (2π)^ν r^ν)`, `ν = (n−2)/2`.
pub fn hankel_fundamental(n: usize, q_m: C64, x: &[f64], y: &[f64]) -> Result<C64> {
    if !(4..=9).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    let r = distance(n, x, y)?;
    Ok(hankel_radial(n, q_m, r))
}

pub fn hankel_radial(n: usize, q_m: C64, r: f64) -> C64 {
    let nu = (n as f64 - 2.0) / 2.0;
    let k = q_m.sqrt();
    let h = hankel1(nu, k * r).expect("order checked by caller");
    q_m.powf((n as f64 - 2.0) / 4.0) * h / (C64::new(0.0, 4.0) * (2.0 * PI).powf(nu) * r.powf(nu))
}

/// Laplace fundamental solution `Γ(n/2+1) / (n(2−n)π^{n/2}) r^{2−n}`, n ≥ 3.
pub fn laplace_fundamental(n: usize, r: f64) -> f64 {
    assert!(n >= 3, "logarithmic case not covered");
    gamma_half_integer(n as f64 / 2.0 + 1.0) / (n as f64 * (2.0 - n as f64) * PI.powf(n as f64 / 2.0))
        * r.powi(2 - n as i32)
}
