//! Modified Bessel functions of integer order and Hankel functions of the
//! first kind for integer and half-integer orders.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Γ(x)` for positive integers and half-integers.
pub fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!((2.0 * x - twice).abs() < 1e-12 && twice >= 1.0, "argument must be a positive (half-)integer");
    let mut v = if twice as i64 % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut a = if twice as i64 % 2 == 0 { 1.0 } else { 0.5 };
    while a < x - 1e-12 {
        v *= a;
        a += 1.0;
    }
    v
}

/// `I_k(x)` by its ascending series.
pub fn bessel_i(k: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = h.powi(k as i32) / factorial(k);
    let mut sum = term;
    for m in 1..500 {
        term *= h * h / (m as f64 * (m + k) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `I_k'(x) = (I_{k-1}(x) + I_{k+1}(x)) / 2`, with `I_{-1} = I_1`.
pub fn bessel_i_prime(k: usize, x: f64) -> f64 {
    let below = if k == 0 { bessel_i(1, x) } else { bessel_i(k - 1, x) };
    0.5 * (below + bessel_i(k + 1, x))
}

/// `H^{(1)}_ν(z)` for `ν = n/2`, `n = 0..=16`.
pub fn hankel1(nu: f64, z: C64) -> Result<C64> {
    let twice = (2.0 * nu).round();
    if (2.0 * nu - twice).abs() > 1e-12 || !(0.0..=16.0).contains(&twice) {
        return Err(Error::InvalidInput(format!("unsupported Hankel order {nu}")));
    }
    if z.norm() == 0.0 {
        return Err(Error::InvalidInput("Hankel function is singular at z = 0".into()));
    }
    let twice = twice as usize;
    if twice % 2 == 1 {
        Ok(hankel1_half(twice / 2, z))
    } else if z.norm() > 25.0 {
        Ok(hankel1_asymptotic(nu, z))
    } else {
        Ok(hankel1_integer(twice / 2, z))
    }
}

/// `H^{(1)}_{l+1/2}(z) = √(2z/π) h_l(z)` with the terminating spherical form
/// `h_l(z) = (−i)^{l+1} e^{iz}/z · Σ_k i^k (l+k)! / (k!(l−k)!(2z)^k)`.
fn hankel1_half(l: usize, z: C64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let mut sum = C64::new(0.0, 0.0);
    for k in 0..=l {
        let c = factorial(l + k) / (factorial(k) * factorial(l - k));
        sum += i.powu(k as u32) * c / (2.0 * z).powu(k as u32);
    }
    let h = (-i).powu(l as u32 + 1) * (i * z).exp() / z * sum;
    (2.0 * z / PI).sqrt() * h
}

fn bessel_j_series(n: usize, z: C64) -> C64 {
    let h = 0.5 * z;
    let mut term = h.powu(n as u32) / factorial(n);
    let mut sum = term;
    for m in 1..400 {
        term *= -(h * h) / (m as f64 * (m + n) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn digamma_integer(k: usize) -> f64 {
    -EULER_GAMMA + (1..k).map(|j| 1.0 / j as f64).sum::<f64>()
}

/// `J_n + i Y_n` from the ascending series of both.
fn hankel1_integer(n: usize, z: C64) -> C64 {
    let j = bessel_j_series(n, z);
    let h = 0.5 * z;
    let mut y = 2.0 / PI * j * h.ln();
    for k in 0..n {
        y -= factorial(n - k - 1) / factorial(k) * h.powi(2 * k as i32 - n as i32) / PI;
    }
    let mut term = h.powu(n as u32) / factorial(n);
    let mut k = 0usize;
    loop {
        let contrib = (digamma_integer(k + 1) + digamma_integer(n + k + 1)) * term;
        y -= contrib / PI;
        k += 1;
        term *= -(h * h) / (k as f64 * (n + k) as f64);
        if k > 400 || (term.norm() <= 1e-18 * y.norm().max(1e-300) && k > 2) {
            break;
        }
    }
    j + C64::new(0.0, 1.0) * y
}

fn hankel1_asymptotic(nu: f64, z: C64) -> C64 {
    let mu = 4.0 * nu * nu;
    let i = C64::new(0.0, 1.0);
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..40 {
        let a = (mu - ((2 * k - 1) as f64).powi(2)) / (k as f64 * 8.0);
        let next = term * i * a / z;
        if next.norm() > term.norm() {
            break;
        }
        term = next;
        sum += term;
        if term.norm() < 1e-17 {
            break;
        }
    }
    (2.0 / (PI * z)).sqrt() * (i * (z - nu * PI / 2.0 - PI / 4.0)).exp() * sum
}
