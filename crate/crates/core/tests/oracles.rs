//! Independent estimates of closed-form quantities.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spinres::analytic::gamma2;
use spinres::special::{bessel_j0, integrate, struve_h0, QuadratureSpec};

// The double integral ∫₀^{2π}dφ ∫₀^φ dφ′ φ cos[r(sin φ − sin φ′)] by uniform
// sampling of the triangle φ′ < φ. Returns (estimate, standard error).
fn triangle_monte_carlo(r: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let area = 0.5 * TAU * TAU;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (u, v): (f64, f64) = (rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU);
        let (phi, phi_prime) = if u > v { (u, v) } else { (v, u) };
        let f = phi * (r * (phi.sin() - phi_prime.sin())).cos();
        sum += f;
        sum_sq += f * f;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    (area * mean, area * (var / n).sqrt())
}

#[test]
fn gamma2_agrees_with_monte_carlo() {
    let r = 1.0;
    let spec = QuadratureSpec::new(1e-12, 1e-12, 40).unwrap();
    let j0 = bessel_j0(r);
    let weighted = integrate(|x| x * x * (r * x.sin()).cos(), 0.0, TAU, &spec).unwrap();
    let single =
        0.25 * PI * PI * struve_h0(r).powi(2) - 4.0 * PI * PI / 3.0 * j0 * j0 - j0 / TAU * weighted;
    let (double, stderr) = triangle_monte_carlo(r, 10_000_000, 0x5eed);
    let estimate = single + double / PI;
    let err = stderr / PI;
    let value = gamma2(r).unwrap();
    assert!(
        (value - estimate).abs() < 3.0 * err,
        "gamma2(1) = {value}, Monte Carlo {estimate} ± {err}"
    );
    assert!(err < 5e-3);
}

#[test]
fn gamma2_vanishes_without_drive() {
    // −4π²/3 − 4π²/3 + 8π²/3 at r = 0
    let (double, stderr) = triangle_monte_carlo(0.0, 1_000_000, 1);
    assert!((double - 8.0 * PI.powi(3) / 3.0).abs() < 3.0 * stderr);
    assert!(gamma2(0.0).unwrap().abs() < 1e-8);
}
