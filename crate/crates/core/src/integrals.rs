//! Closed-form time integrals of products of sines and complex exponentials.
//!
//! Every quantity the gate model needs (displacements, two-time phase
//! integrals, the decoupling matrix and its frequency derivatives) reduces to
//! one of three primitives evaluated over `[0, tau]`:
//!
//! * `E(x)   = ∫ e^{ixt} dt`
//! * `K_n(x) = ∫ t^n e^{ixt} dt`
//! * `H(a,b) = ∫_0^tau e^{ibt} ∫_0^t e^{ias} ds dt`
//!
//! Near-resonant arguments switch to power series so that nothing divides by a
//! vanishing frequency difference.

use num_complex::Complex64;

/// Below this `|a| tau`, the triangle integral uses its Taylor series in `a`.
pub const TRIANGLE_SERIES_THRESHOLD: f64 = 1e-2;
const TRIANGLE_SERIES_TERMS: usize = 9;

const SINC_SERIES_THRESHOLD: f64 = 1e-4;

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `∫_0^1 s^n e^{ixs} ds`.
pub fn unit_moment(n: usize, x: f64) -> Complex64 {
    let half = 0.5 * x;
    let k0 = Complex64::from_polar(sinc(half), half);
    if n == 0 {
        return k0;
    }
    if x.abs() <= (n + 1) as f64 {
        // Power series; converges for all x and is well conditioned here.
        let ix = Complex64::new(0.0, x);
        let mut term = Complex64::new(1.0, 0.0); // (ix)^j / j!
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..400 {
            let contrib = term / (n + j + 1) as f64;
            sum += contrib;
            if contrib.norm() <= 1e-18 * sum.norm() && j > n {
                break;
            }
            term = term * ix / (j + 1) as f64;
        }
        sum
    } else {
        // Upward recursion, stable for |x| > n.
        let e = Complex64::from_polar(1.0, x);
        let inv_ix = Complex64::new(0.0, -1.0 / x);
        let mut k = k0;
        for m in 1..=n {
            k = (e - k * m as f64) * inv_ix;
        }
        k
    }
}

/// `E(x) = ∫_0^tau e^{ixt} dt`.
pub fn expi_integral(x: f64, tau: f64) -> Complex64 {
    let half = 0.5 * x * tau;
    Complex64::from_polar(tau * sinc(half), half)
}

/// `K_n(x) = ∫_0^tau t^n e^{ixt} dt`.
pub fn time_moment(n: usize, x: f64, tau: f64) -> Complex64 {
    unit_moment(n, x * tau) * tau.powi(n as i32 + 1)
}

/// `∫_0^tau sin(mu t) e^{i omega t} dt`.
pub fn sine_exp_integral(mu: f64, omega: f64, tau: f64) -> Complex64 {
    let diff = expi_integral(omega + mu, tau) - expi_integral(omega - mu, tau);
    diff * Complex64::new(0.0, -0.5)
}

/// Triangle integral `H(a, b)` together with its partial derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub value: Complex64,
    pub d_a: Complex64,
    pub d_b: Complex64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `H(a, b) = ∫_0^tau e^{ibt} ∫_0^t e^{ias} ds dt`.
pub fn triangle(a: f64, b: f64, tau: f64) -> Complex64 {
    if (a * tau).abs() >= TRIANGLE_SERIES_THRESHOLD {
        (expi_integral(a + b, tau) - expi_integral(b, tau)) / Complex64::new(0.0, a)
    } else {
        let ia = Complex64::new(0.0, a);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..TRIANGLE_SERIES_TERMS {
            sum += pow * time_moment(k + 1, b, tau) / factorial(k + 1);
            pow *= ia;
        }
        sum
    }
}

/// `H(a, b)` plus `∂H/∂a` and `∂H/∂b`.
pub fn triangle_with_derivatives(a: f64, b: f64, tau: f64) -> Triangle {
    let i = Complex64::new(0.0, 1.0);
    if (a * tau).abs() >= TRIANGLE_SERIES_THRESHOLD {
        let value = (expi_integral(a + b, tau) - expi_integral(b, tau)) / (i * a);
        let k1_ab = time_moment(1, a + b, tau);
        let d_a = (k1_ab - value) / a;
        let d_b = (k1_ab - time_moment(1, b, tau)) / a;
        Triangle { value, d_a, d_b }
    } else {
        let mut value = Complex64::new(0.0, 0.0);
        let mut d_a = Complex64::new(0.0, 0.0);
        let mut d_b = Complex64::new(0.0, 0.0);
        // (ia)^k and k i^k a^{k-1}
        let mut pow = Complex64::new(1.0, 0.0);
        let mut dpow = Complex64::new(0.0, 0.0);
        for k in 0..TRIANGLE_SERIES_TERMS {
            let f = factorial(k + 1);
            value += pow * time_moment(k + 1, b, tau) / f;
            d_a += dpow * time_moment(k + 1, b, tau) / f;
            d_b += pow * i * time_moment(k + 2, b, tau) / f;
            dpow = dpow * (i * a) + pow * i;
            pow *= i * a;
        }
        Triangle { value, d_a, d_b }
    }
}

/// Two-time kernel for one mode:
/// `∫_0^tau dt1 ∫_0^t1 dt2 sin(mu_late t1) sin(mu_early t2) sin(omega (t1 - t2))`.
pub fn phase_kernel(mu_early: f64, mu_late: f64, omega: f64, tau: f64) -> f64 {
    let (am, ap) = (mu_early - omega, -mu_early - omega);
    let (bp, bm) = (mu_late + omega, omega - mu_late);
    let sum = triangle(am, bp, tau) - triangle(am, bm, tau) - triangle(ap, bp, tau) + triangle(ap, bm, tau);
    -0.25 * sum.im
}

/// `phase_kernel` and its derivative with respect to `omega`.
pub fn phase_kernel_with_derivative(mu_early: f64, mu_late: f64, omega: f64, tau: f64) -> (f64, f64) {
    let (am, ap) = (mu_early - omega, -mu_early - omega);
    let (bp, bm) = (mu_late + omega, omega - mu_late);
    let terms = [
        (triangle_with_derivatives(am, bp, tau), 1.0),
        (triangle_with_derivatives(am, bm, tau), -1.0),
        (triangle_with_derivatives(ap, bp, tau), -1.0),
        (triangle_with_derivatives(ap, bm, tau), 1.0),
    ];
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for (t, sign) in terms {
        value += t.value * sign;
        // da/domega = -1, db/domega = +1 for every term.
        deriv += (t.d_b - t.d_a) * sign;
    }
    (-0.25 * value.im, -0.25 * deriv.im)
}

/// `∂^k/∂omega^k ∫_0^tau sin(mu t) sin(omega (tau/2 - t)) dt` for a tone
/// `mu = 2 pi n / tau`.
pub fn decoupling_entry(harmonic: i64, omega: f64, tau: f64, order: usize) -> f64 {
    let mu = std::f64::consts::TAU * harmonic as f64 / tau;
    let h = 0.5 * tau;
    let parity = if harmonic.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
    let lower = sinc_derivative(order, (mu - omega) * h);
    let upper = sinc_derivative(order, (mu + omega) * h);
    let sign_lower = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    parity * h.powi(order as i32 + 1) * (sign_lower * lower - upper)
}

/// k-th derivative of `sin(x)/x`.
pub fn sinc_derivative(order: usize, x: f64) -> f64 {
    if order == 0 {
        return sinc(x);
    }
    // sinc(x) = ∫_0^1 cos(xs) ds, so d^k/dx^k = Re[i^k ∫_0^1 s^k e^{ixs} ds].
    let ik = match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    (ik * unit_moment(order, x)).re
}
