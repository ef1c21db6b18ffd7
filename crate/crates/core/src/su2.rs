//! Two-level algebra in the Pauli basis.
//!
//! Every 2×2 complex operator is written as `s·I + v·σ` with a complex scalar
//! `s` and a complex 3-vector `v`. Products, adjoints and exponentials of
//! Hermitian generators all have closed forms in this basis, so propagators
//! built here are unitary by construction.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Real 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const EX: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const EY: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const EZ: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, k: f64) -> Vec3 {
        Vec3::new(k * self.x, k * self.y, k * self.z)
    }

    pub fn max_abs(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Normalized spin-1/2 state `up·|+⟩ + down·|−⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor {
    up: C64,
    down: C64,
}

impl Spinor {
    /// Builds a state from two amplitudes, normalizing them.
    pub fn new(up: C64, down: C64) -> Result<Self> {
        let norm = (up.norm_sqr() + down.norm_sqr()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::domain(
                "spinor amplitudes must be finite and not both zero",
            ));
        }
        Ok(Spinor {
            up: up / norm,
            down: down / norm,
        })
    }

    pub fn plus() -> Self {
        Spinor {
            up: ONE,
            down: ZERO,
        }
    }

    pub fn minus() -> Self {
        Spinor {
            up: ZERO,
            down: ONE,
        }
    }

    /// `c|+⟩ + e^{iϕ}·sqrt(1−c²)|−⟩` with `c ∈ [0, 1]`.
    pub fn superposition(c: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) || !phase.is_finite() {
            return Err(Error::domain(format!(
                "superposition needs c in [0, 1] and a finite phase, got c = {c}, phase = {phase}"
            )));
        }
        let down = C64::from_polar((1.0 - c * c).sqrt(), phase);
        Ok(Spinor {
            up: C64::new(c, 0.0),
            down,
        })
    }

    /// Wraps amplitudes without renormalizing. Only for results of unitary maps.
    pub(crate) fn from_amplitudes(up: C64, down: C64) -> Self {
        Spinor { up, down }
    }

    pub fn up(&self) -> C64 {
        self.up
    }

    pub fn down(&self) -> C64 {
        self.down
    }

    pub fn norm(&self) -> f64 {
        (self.up.norm_sqr() + self.down.norm_sqr()).sqrt()
    }

    /// True when the state is `|+⟩` up to a global phase.
    pub fn is_plus(&self) -> bool {
        self.down.norm() < 1e-15
    }

    /// True when the state is `|−⟩` up to a global phase.
    pub fn is_minus(&self) -> bool {
        self.up.norm() < 1e-15
    }
}

/// `⟨ψ|σz|ψ⟩`.
pub fn expect_sz(psi: &Spinor) -> f64 {
    psi.up.norm_sqr() - psi.down.norm_sqr()
}

/// 2×2 operator `s·I + v·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliOperator {
    pub s: C64,
    pub v: [C64; 3],
}

impl PauliOperator {
    pub fn new(s: C64, v: [C64; 3]) -> Self {
        PauliOperator { s, v }
    }

    pub fn zero() -> Self {
        PauliOperator::new(ZERO, [ZERO; 3])
    }

    pub fn identity() -> Self {
        PauliOperator::new(ONE, [ZERO; 3])
    }

    pub fn sigma_x() -> Self {
        PauliOperator::new(ZERO, [ONE, ZERO, ZERO])
    }

    pub fn sigma_y() -> Self {
        PauliOperator::new(ZERO, [ZERO, ONE, ZERO])
    }

    pub fn sigma_z() -> Self {
        PauliOperator::new(ZERO, [ZERO, ZERO, ONE])
    }

    /// Hermitian operator `s·I + v·σ` with real coefficients.
    pub fn hermitian(s: f64, v: Vec3) -> Self {
        PauliOperator::new(
            C64::new(s, 0.0),
            [C64::new(v.x, 0.0), C64::new(v.y, 0.0), C64::new(v.z, 0.0)],
        )
    }

    /// `(k·a)·σ` for a complex factor `k` and real vector `a`.
    pub fn from_vector(k: C64, a: Vec3) -> Self {
        PauliOperator::new(ZERO, [k * a.x, k * a.y, k * a.z])
    }

    pub fn scale(&self, k: C64) -> Self {
        PauliOperator::new(k * self.s, self.v.map(|c| k * c))
    }

    pub fn adjoint(&self) -> Self {
        PauliOperator::new(self.s.conj(), self.v.map(|c| c.conj()))
    }

    /// Real parts of the Pauli coefficients.
    pub fn real_vector(&self) -> Vec3 {
        Vec3::new(self.v[0].re, self.v[1].re, self.v[2].re)
    }

    /// Imaginary parts of the Pauli coefficients.
    pub fn imag_vector(&self) -> Vec3 {
        Vec3::new(self.v[0].im, self.v[1].im, self.v[2].im)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.s.im.abs() < tol && self.v.iter().all(|c| c.im.abs() < tol)
    }

    /// `‖U†U − I‖_max < tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self - PauliOperator::identity()).max_abs() < tol
    }

    pub fn to_matrix(&self) -> [[C64; 2]; 2] {
        let [x, y, z] = self.v;
        [[self.s + z, x - I * y], [x + I * y, self.s - z]]
    }

    pub fn from_matrix(m: [[C64; 2]; 2]) -> Self {
        let s = (m[0][0] + m[1][1]) * 0.5;
        let z = (m[0][0] - m[1][1]) * 0.5;
        let x = (m[0][1] + m[1][0]) * 0.5;
        let y = (m[1][0] - m[0][1]) * (-0.5 * I);
        PauliOperator::new(s, [x, y, z])
    }

    /// Largest entry modulus of the 2×2 matrix.
    pub fn max_abs(&self) -> f64 {
        self.to_matrix()
            .iter()
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of the 2×2 matrix.
    pub fn frobenius(&self) -> f64 {
        (2.0 * (self.s.norm_sqr() + self.v.iter().map(|c| c.norm_sqr()).sum::<f64>())).sqrt()
    }

    pub fn apply(&self, psi: &Spinor) -> Spinor {
        let m = self.to_matrix();
        Spinor::from_amplitudes(
            m[0][0] * psi.up + m[0][1] * psi.down,
            m[1][0] * psi.up + m[1][1] * psi.down,
        )
    }

    pub fn commutator(&self, other: &PauliOperator) -> PauliOperator {
        *self * *other - *other * *self
    }
}

fn cdot(a: &[C64; 3], b: &[C64; 3]) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn ccross(a: &[C64; 3], b: &[C64; 3]) -> [C64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl Mul for PauliOperator {
    type Output = PauliOperator;

    // (s + a·σ)(t + b·σ) = st + a·b + (s b + t a + i a×b)·σ
    fn mul(self, o: PauliOperator) -> PauliOperator {
        let cross = ccross(&self.v, &o.v);
        let mut v = [ZERO; 3];
        for k in 0..3 {
            v[k] = self.s * o.v[k] + o.s * self.v[k] + I * cross[k];
        }
        PauliOperator::new(self.s * o.s + cdot(&self.v, &o.v), v)
    }
}

impl Add for PauliOperator {
    type Output = PauliOperator;
    fn add(self, o: PauliOperator) -> PauliOperator {
        PauliOperator::new(
            self.s + o.s,
            [self.v[0] + o.v[0], self.v[1] + o.v[1], self.v[2] + o.v[2]],
        )
    }
}

impl Sub for PauliOperator {
    type Output = PauliOperator;
    fn sub(self, o: PauliOperator) -> PauliOperator {
        PauliOperator::new(
            self.s - o.s,
            [self.v[0] - o.v[0], self.v[1] - o.v[1], self.v[2] - o.v[2]],
        )
    }
}

/// `exp(−i t h)` for Hermitian `h = s·I + (w/2)(u·σ)`:
/// `e^{−i t s}[cos(wt/2) I − i sin(wt/2) u·σ]`.
pub fn pauli_exponential(h: &PauliOperator, t: f64) -> Result<PauliOperator> {
    let scale =
        h.s.norm()
            .max(h.v.iter().map(|c| c.norm()).fold(1.0, f64::max));
    if !h.is_hermitian(1e-12 * scale) {
        return Err(Error::domain(
            "pauli_exponential requires a Hermitian generator",
        ));
    }
    let phase = C64::from_polar(1.0, -t * h.s.re);
    let v = h.real_vector();
    let half_w = v.norm();
    if half_w == 0.0 {
        return Ok(PauliOperator::identity().scale(phase));
    }
    let angle = half_w * t;
    let u = v.scale(1.0 / half_w);
    let rot = PauliOperator::new(C64::new(angle.cos(), 0.0), [ZERO; 3])
        + PauliOperator::from_vector(C64::new(0.0, -angle.sin()), u);
    Ok(rot.scale(phase))
}

/// Counterclockwise rotation of `a` by `angle` about the unit axis `n`.
pub fn rotate_vec(a: Vec3, n: Vec3, angle: f64) -> Result<Vec3> {
    if (n.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "rotation axis must be a unit vector, |n| = {}",
            n.norm()
        )));
    }
    let along = n.scale(n.dot(&a));
    Ok(along + (a - along).scale(angle.cos()) + n.cross(&a).scale(angle.sin()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: &PauliOperator, b: &PauliOperator, tol: f64) -> bool {
        (*a - *b).max_abs() < tol
    }

    // Plain 3×3 rotation matrix (Rodrigues), independent of rotate_vec.
    fn rotation_matrix(n: Vec3, angle: f64) -> [[f64; 3]; 3] {
        let (c, s) = (angle.cos(), angle.sin());
        let k = 1.0 - c;
        let (x, y, z) = (n.x, n.y, n.z);
        [
            [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
            [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
            [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
        ]
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let u = pauli_exponential(&PauliOperator::zero(), 3.7).unwrap();
        assert!(close(&u, &PauliOperator::identity(), 1e-15));
    }

    #[test]
    fn full_period_flips_sign() {
        let h = PauliOperator::sigma_z().scale(C64::new(-0.5, 0.0));
        let u = pauli_exponential(&h, 2.0 * PI).unwrap();
        assert!(close(
            &u,
            &PauliOperator::identity().scale(C64::new(-1.0, 0.0)),
            1e-12
        ));
    }

    #[test]
    fn h0_flips_plus_at_half_period() {
        // ω⊥ = 3, ω∥ = −1: h0 = −(3/2)σx, Ω0 = 3.
        let h0 = PauliOperator::hermitian(0.0, Vec3::new(-1.5, 0.0, 0.0));
        let u = pauli_exponential(&h0, PI / 3.0).unwrap();
        let psi = u.apply(&Spinor::plus());
        assert!((expect_sz(&psi) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_generator_rejected() {
        let h = PauliOperator::sigma_x().scale(C64::new(0.0, 1.0));
        assert!(matches!(pauli_exponential(&h, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_part_is_a_global_phase() {
        let h = PauliOperator::hermitian(0.7, Vec3::ZERO);
        let u = pauli_exponential(&h, 2.0).unwrap();
        let expected = PauliOperator::identity().scale(C64::from_polar(1.0, -1.4));
        assert!(close(&u, &expected, 1e-15));
    }

    #[test]
    fn rotate_fixed_axis_and_quarter_turn() {
        let n = Vec3::new(1.0, 2.0, -2.0).scale(1.0 / 3.0);
        let r = rotate_vec(n, n, 1.234).unwrap();
        assert!((r - n).max_abs() < 1e-15);

        let r = rotate_vec(Vec3::EX, Vec3::EZ, PI / 2.0).unwrap();
        assert!((r - Vec3::EY).max_abs() < 1e-15);
    }

    #[test]
    fn rotate_half_turn_about_diagonal_matches_matrix() {
        let n = Vec3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
        let r = rotate_vec(Vec3::EX, n, PI).unwrap();
        let m = rotation_matrix(n, PI);
        let oracle = Vec3::new(m[0][0], m[1][0], m[2][0]);
        assert!((r - oracle).max_abs() < 1e-12);
        assert!((r - Vec3::EZ).max_abs() < 1e-12);
    }

    #[test]
    fn rotate_rejects_non_unit_axis() {
        assert!(rotate_vec(Vec3::EX, Vec3::new(1.0, 1.0, 0.0), 0.3).is_err());
    }

    #[test]
    fn sz_of_eigenstates_and_balanced_superposition() {
        assert_eq!(expect_sz(&Spinor::plus()), 1.0);
        assert_eq!(expect_sz(&Spinor::minus()), -1.0);
        for phase in [0.0, 0.3, 2.0, 5.9] {
            let psi = Spinor::superposition(FRAC_1_SQRT_2, phase).unwrap();
            assert!(expect_sz(&psi).abs() < 1e-15);
        }
    }

    #[test]
    fn superposition_rejects_bad_weight() {
        assert!(Spinor::superposition(1.2, 0.0).is_err());
        assert!(Spinor::superposition(-0.1, 0.0).is_err());
        assert!(Spinor::new(ZERO, ZERO).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let op = PauliOperator::new(
            C64::new(0.1, -0.2),
            [
                C64::new(1.0, 2.0),
                C64::new(-0.5, 0.25),
                C64::new(3.0, -1.0),
            ],
        );
        assert!(close(
            &PauliOperator::from_matrix(op.to_matrix()),
            &op,
            1e-15
        ));
    }

    #[test]
    fn product_matches_matrix_product() {
        let a = PauliOperator::new(
            C64::new(0.3, 0.1),
            [C64::new(1.0, -2.0), C64::new(0.5, 0.0), C64::new(-1.0, 1.0)],
        );
        let b = PauliOperator::new(
            C64::new(-0.7, 0.4),
            [C64::new(0.2, 0.3), C64::new(-1.5, 0.5), C64::new(0.0, 2.0)],
        );
        let (ma, mb) = (a.to_matrix(), b.to_matrix());
        let mut mc = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                mc[i][j] = ma[i][0] * mb[0][j] + ma[i][1] * mb[1][j];
            }
        }
        assert!(close(&(a * b), &PauliOperator::from_matrix(mc), 1e-14));
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn exponential_group_property(s in -2.0..2.0f64, v in vec3(), t1 in -5.0..5.0f64, t2 in -5.0..5.0f64) {
            let h = PauliOperator::hermitian(s, v);
            let lhs = pauli_exponential(&h, t1).unwrap() * pauli_exponential(&h, t2).unwrap();
            let rhs = pauli_exponential(&h, t1 + t2).unwrap();
            prop_assert!(close(&lhs, &rhs, 1e-12));
            prop_assert!(rhs.is_unitary(1e-12));
        }

        #[test]
        fn conjugation_is_rotation(v in vec3(), a in vec3(), t in -4.0..4.0f64) {
            prop_assume!(v.norm() > 1e-3);
            // h = −(Ω/2) n·σ
            let h = PauliOperator::hermitian(0.0, v);
            let omega = 2.0 * v.norm();
            let n = v.scale(-1.0 / v.norm());
            let u = pauli_exponential(&h, t).unwrap();
            let conj = u.adjoint() * PauliOperator::hermitian(0.0, a) * u;
            let rotated = rotate_vec(a, n, omega * t).unwrap();
            prop_assert!((conj.real_vector() - rotated).max_abs() < 1e-12);
            prop_assert!(conj.imag_vector().max_abs() < 1e-12);
            prop_assert!((rotated.norm() - a.norm()).abs() < 1e-12);
        }

        #[test]
        fn sz_stays_bounded(v in vec3(), t in -10.0..10.0f64, c in 0.0..1.0f64, phase in 0.0..6.3f64) {
            let u = pauli_exponential(&PauliOperator::hermitian(0.0, v), t).unwrap();
            let psi = u.apply(&Spinor::superposition(c, phase).unwrap());
            prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
            let sz = expect_sz(&psi);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&sz));
        }
    }
}
