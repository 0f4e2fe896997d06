//! Error-function family used by the closed-form tails.

pub use libm::{erf, erfc};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Scaled complementary error function exp(x²)·erfc(x).
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 2.0 {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction, evaluated bottom-up.
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + 0.5 * k as f64 / tail;
    }
    FRAC_1_SQRT_PI / tail
}
