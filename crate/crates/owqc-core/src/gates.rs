//! Elementary symplectic matrices and the single-mode Euler machinery.
//!
//! All multimode constructors act on (x1..xm, y1..ym).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{OwqcError, Result};
use crate::matrix::{block2, max_abs, max_abs_diff, Mat};

/// Below this, sin Θ₋ (or a tan/cot argument) counts as singular.
pub const ANGLE_EPS: f64 = 1e-12;

/// Wrap into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

fn check_weight(w: &Mat, zero_diagonal: bool) -> Result<()> {
    let m = w.nrows();
    if w.ncols() != m {
        return Err(OwqcError::InvalidWeight(format!("weight matrix must be square, got {}x{}", w.nrows(), w.ncols())));
    }
    let asym = max_abs_diff(w, &w.transpose());
    if asym > 1e-12 * max_abs(w).max(1.0) {
        return Err(OwqcError::InvalidWeight(format!("asymmetric (by {asym:.3e})")));
    }
    if zero_diagonal {
        if let Some(i) = (0..m).find(|&i| w[(i, i)] != 0.0) {
            return Err(OwqcError::InvalidWeight(format!("nonzero diagonal at {i}")));
        }
    }
    Ok(())
}

/// CZ[W] = [[I, 0], [W, I]] for symmetric zero-diagonal W.
pub fn cz_of(w: &Mat) -> Result<Mat> {
    check_weight(w, true)?;
    Ok(shear_unchecked(w))
}

/// [[I, 0], [P, I]] for any symmetric P. A nonzero diagonal adds single-mode
/// shears; the result is still symplectic.
pub fn shear_of(p: &Mat) -> Result<Mat> {
    check_weight(p, false)?;
    Ok(shear_unchecked(p))
}

fn shear_unchecked(w: &Mat) -> Mat {
    let m = w.nrows();
    let i = Mat::identity(m, m);
    block2(&i, &Mat::zeros(m, m), w, &i)
}

fn diag2(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> Mat {
    let v: Vec<f64> = a.chain(b).collect();
    Mat::from_diagonal(&DVector::from_vec(v))
}

/// S(r) = diag(e^{−r}, e^{r}) per mode.
pub fn squeeze_of(r: &[f64]) -> Mat {
    diag2(r.iter().map(|v| (-v).exp()), r.iter().map(|v| v.exp()))
}

/// diag(1/t, t) per mode. Equals S(ln t) for t > 0 and stays symplectic for
/// t < 0, which is how S(ln tan(Θ₋/2)) is read when tan(Θ₋/2) is negative.
pub fn squeeze_gain(t: &[f64]) -> Mat {
    diag2(t.iter().map(|v| 1.0 / v), t.iter().copied())
}

/// R(Θ) = [[cos Θ, −sin Θ], [sin Θ, cos Θ]] with diagonal angle blocks.
pub fn rotate_of(theta: &[f64]) -> Mat {
    let c = Mat::from_diagonal(&DVector::from_iterator(theta.len(), theta.iter().map(|t| t.cos())));
    let s = Mat::from_diagonal(&DVector::from_iterator(theta.len(), theta.iter().map(|t| t.sin())));
    block2(&c, &(-&s), &s, &c)
}

pub fn rot1(theta: f64) -> Mat {
    rotate_of(&[theta])
}

fn check_minus(theta_minus: &[f64]) -> Result<()> {
    if let Some(t) = theta_minus.iter().find(|t| t.sin().abs() < ANGLE_EPS) {
        return Err(OwqcError::DegenerateAngles(format!("sin(theta_minus) = 0 at theta_minus = {t}")));
    }
    Ok(())
}

/// Φ(Θ₊, Θ₋) = csc Θ₋ [[cos Θ₋ + cos Θ₊, sin Θ₊], [−sin Θ₊, cos Θ₊ − cos Θ₋]].
pub fn phi_of(theta_plus: &[f64], theta_minus: &[f64]) -> Result<Mat> {
    if theta_plus.len() != theta_minus.len() {
        return Err(OwqcError::DimensionMismatch("theta_plus and theta_minus differ in length".into()));
    }
    check_minus(theta_minus)?;
    let m = theta_plus.len();
    let mut out = Mat::zeros(2 * m, 2 * m);
    for k in 0..m {
        let csc = 1.0 / theta_minus[k].sin();
        let (sp, cp) = theta_plus[k].sin_cos();
        let cm = theta_minus[k].cos();
        out[(k, k)] = (cm + cp) * csc;
        out[(k, m + k)] = sp * csc;
        out[(m + k, k)] = -sp * csc;
        out[(m + k, m + k)] = (cp - cm) * csc;
    }
    Ok(out)
}

/// R(−Θ₊/2) · S(ln tan(Θ₋/2)) · R(−Θ₊/2), the product form of Φ.
pub fn rsr(theta_plus: &[f64], theta_minus: &[f64]) -> Result<Mat> {
    if theta_plus.len() != theta_minus.len() {
        return Err(OwqcError::DimensionMismatch("theta_plus and theta_minus differ in length".into()));
    }
    check_minus(theta_minus)?;
    let half: Vec<f64> = theta_plus.iter().map(|t| -t / 2.0).collect();
    let tans: Vec<f64> = theta_minus.iter().map(|t| (t / 2.0).tan()).collect();
    let r = rotate_of(&half);
    Ok(&r * squeeze_gain(&tans) * &r)
}

/// Single-mode Euler factors, M = R(phi1) · S(r) · R(phi2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerFactors {
    pub phi1: f64,
    pub r: f64,
    pub phi2: f64,
}

impl EulerFactors {
    pub fn reconstruct(&self) -> Mat {
        rot1(self.phi1) * squeeze_of(&[self.r]) * rot1(self.phi2)
    }
}

/// Canonical factors: r ≥ 0, angles in (−π, π], φ₂ = 0 when r = 0.
pub fn euler_decompose(m: &Mat) -> Result<EulerFactors> {
    if m.shape() != (2, 2) {
        return Err(OwqcError::DecompositionFailure(format!("expected a 2x2 matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(OwqcError::DecompositionFailure("non-finite entry".into()));
    }
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let scale = max_abs(m).powi(2).max(1.0);
    if (det - 1.0).abs() > 1e-9 * scale {
        return Err(OwqcError::DecompositionFailure(format!("not symplectic (det = {det})")));
    }
    // split into a rotation-like part (p, q) and a reflection-like part (s, u)
    let p = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let q = 0.5 * (m[(1, 0)] - m[(0, 1)]);
    let s = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let u = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let sh = s.hypot(u);
    let r = sh.asinh();
    let sigma = q.atan2(p);
    if sh == 0.0 {
        return Ok(EulerFactors { phi1: wrap_angle(sigma), r: 0.0, phi2: 0.0 });
    }
    let delta = u.atan2(-s);
    Ok(EulerFactors { phi1: wrap_angle(0.5 * (sigma - delta)), r, phi2: wrap_angle(0.5 * (sigma + delta)) })
}

/// Angles of the four-node templates. Θ₃ and Θ₄ belong to the two
/// measured-only nodes, Θ± to the input beam-splitter ports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourNodeAngles {
    pub theta3: f64,
    pub theta4: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trig {
    Tan,
    Cot,
}

fn trig(kind: Trig, a: f64) -> Result<f64> {
    let (s, c) = a.sin_cos();
    match kind {
        Trig::Tan if c.abs() < ANGLE_EPS => Err(OwqcError::DegenerateAngles(format!("tan({a}) is singular"))),
        Trig::Cot if s.abs() < ANGLE_EPS => Err(OwqcError::DegenerateAngles(format!("cot({a}) is singular"))),
        Trig::Tan => Ok(s / c),
        Trig::Cot => Ok(c / s),
    }
}

fn inv_trig(kind: Trig, v: f64) -> f64 {
    match kind {
        Trig::Tan => v.atan(),
        Trig::Cot => 1.0_f64.atan2(v),
    }
}

/// (Θ₃ function, Θ₄ function, quarter turn on the left l, quarter turn on the right p).
fn template(config_id: u8) -> Result<(Trig, Trig, bool, bool)> {
    Ok(match config_id {
        1 => (Trig::Tan, Trig::Cot, false, true),
        2 => (Trig::Cot, Trig::Tan, true, false),
        3 => (Trig::Cot, Trig::Cot, false, false),
        4 => (Trig::Tan, Trig::Tan, true, true),
        5 => (Trig::Tan, Trig::Tan, false, false),
        _ => {
            return Err(OwqcError::InvalidPartition(format!(
                "four-node configuration id must be 1..5, got {config_id}"
            )))
        }
    })
}

/// [[ab − 1, b], [−a, −1]], the core shared by all five templates.
pub fn template_core(a: f64, b: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[a * b - 1.0, b, -a, -1.0])
}

/// Ũ_j for the four-node template `config_id`.
pub fn four_node_matrix(config_id: u8, angles: &FourNodeAngles) -> Result<Mat> {
    let (f3, f4, left, right) = template(config_id)?;
    let a = trig(f3, angles.theta3)?;
    let b = trig(f4, angles.theta4)?;
    let quarter = rot1(-FRAC_PI_2);
    let mut u = template_core(a, b);
    if left {
        u = &quarter * u;
    }
    if right {
        u *= &quarter;
    }
    Ok(u * rsr(&[angles.theta_plus], &[angles.theta_minus])?)
}

/// Quarter-turn offsets (l, p) of the closed-form decomposition of Ũ_j.
pub fn quarter_turns(config_id: u8) -> Result<(u8, u8)> {
    let (_, _, l, p) = template(config_id)?;
    Ok((l as u8, p as u8))
}

/// Closed-form angles realizing Ũ_j = R(−πl/2 + φ₁) S(r) R(φ₂ − πp/2 − Θ₊)
/// at Θ₋ = π/2, Θ₊ = 0. Returns the angles and φ₂.
///
/// The closed forms are written for the gain g = e^r. All three square roots
/// carry one common sign and φ₂ is only fixed mod π, so the four branches are
/// tried in order and the first that reconstructs within 1e−9 is returned.
pub fn four_node_angles_for(config_id: u8, phi1: f64, r: f64) -> Result<(FourNodeAngles, f64)> {
    let (f3, f4, l, p) = template(config_id)?;
    let out = || OwqcError::OutOfBranch { config_id, phi1, r };
    let (s1, c1) = phi1.sin_cos();
    if s1.abs() < 1e-9 || !r.is_finite() {
        return Err(out());
    }
    let g = r.exp();
    let g2 = g * g;
    let g4 = g2 * g2;
    let csc = 1.0 / s1;
    let cot = c1 / s1;
    let s2 = s1 * s1;
    let rad1 = s2 * (g4 * c1 * c1 - g2 + s2);
    let rad2 = (g2 - 1.0) * s2 * ((g2 + 1.0) * (2.0 * phi1).cos() + g2 - 1.0);
    // radicands within rounding of zero are snapped to zero; the square root
    // would otherwise blow 1e-16 noise up to 1e-8
    let scale1 = s2 * (g4 * c1 * c1 + g2 + s2);
    let scale2 = (g2 + 1.0) * s2 * (2.0 * g2 + 1.0);
    let snap = |rad: f64, scale: f64| -> Option<f64> {
        if rad.abs() <= 1e-13 * scale {
            Some(0.0)
        } else if rad < 0.0 {
            None
        } else {
            Some(rad.sqrt())
        }
    };
    let (Some(sq1), Some(sq2)) = (snap(rad1, scale1), snap(rad2, scale2)) else {
        return Err(out());
    };

    let target = |phi2: f64| {
        let lft = rot1(-FRAC_PI_2 * l as u8 as f64 + phi1);
        lft * squeeze_of(&[r]) * rot1(phi2 - FRAC_PI_2 * p as u8 as f64)
    };
    for sign in [1.0, -1.0] {
        let num = g * (csc.powi(3) * sign * sq1 - g * cot);
        let den = g2 * csc * csc - 1.0;
        let a = csc * sign * sq1 / g;
        let b = (2.0 * (g4 - 1.0) * cot + std::f64::consts::SQRT_2 * g * csc.powi(3) * sign * sq2)
            / (2.0 * g4 * cot * cot + 2.0);
        let angles = FourNodeAngles {
            theta3: inv_trig(f3, a),
            theta4: inv_trig(f4, b),
            theta_plus: 0.0,
            theta_minus: FRAC_PI_2,
        };
        let Ok(u) = four_node_matrix(config_id, &angles) else {
            continue;
        };
        let base = num.atan2(den);
        for phi2 in [base, base + PI] {
            let phi2 = wrap_angle(phi2);
            let want = target(phi2);
            if max_abs_diff(&u, &want) < 1e-9 * max_abs(&want).max(1.0) {
                return Ok((angles, phi2));
            }
        }
    }
    Err(out())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::symplectic_defect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cz_examples() {
        assert_eq!(cz_of(&Mat::zeros(2, 2)).unwrap(), Mat::identity(4, 4));
        let w = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = cz_of(&w).unwrap();
        assert_eq!(c.view((2, 0), (2, 2)).into_owned(), w);
        assert_eq!(symplectic_defect(&c).unwrap(), 0.0);
        assert!(cz_of(&Mat::identity(2, 2)).is_err());
        assert!(shear_of(&Mat::identity(2, 2)).is_ok());
        assert!(shear_of(&Mat::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).is_err());
    }

    #[test]
    fn squeeze_examples() {
        assert_eq!(squeeze_of(&[0.0]), Mat::identity(2, 2));
        let s = squeeze_of(&[2.0_f64.ln()]);
        assert!((s[(0, 0)] - 0.5).abs() < 1e-15 && (s[(1, 1)] - 2.0).abs() < 1e-15);
        let s = squeeze_of(&[-(2.0_f64.ln()) / 2.0]);
        assert!((s[(0, 0)] - 2.0_f64.sqrt()).abs() < 1e-15);
        assert!((s[(1, 1)] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!(symplectic_defect(&squeeze_gain(&[-0.3, 2.0])).unwrap() < 1e-15);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotate_of(&[0.0, 0.0]), Mat::identity(4, 4));
        let r = rot1(FRAC_PI_2);
        let want = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(max_abs_diff(&r, &want) < 1e-16);
    }

    #[test]
    fn phi_examples() {
        let p = phi_of(&[0.0], &[FRAC_PI_2]).unwrap();
        assert!(max_abs_diff(&p, &Mat::identity(2, 2)) < 1e-15);
        let p = phi_of(&[0.0], &[PI / 3.0]).unwrap();
        assert!((p[(0, 0)] - 3.0_f64.sqrt()).abs() < 1e-14);
        assert!((p[(1, 1)] - 1.0 / 3.0_f64.sqrt()).abs() < 1e-14);
        assert!(matches!(phi_of(&[0.3], &[0.0]), Err(OwqcError::DegenerateAngles(_))));
        assert!(matches!(rsr(&[0.3], &[PI]), Err(OwqcError::DegenerateAngles(_))));
    }

    #[test]
    fn euler_examples() {
        let f = euler_decompose(&Mat::identity(2, 2)).unwrap();
        assert_eq!((f.phi1, f.r, f.phi2), (0.0, 0.0, 0.0));
        let f = euler_decompose(&rot1(0.7)).unwrap();
        assert!((f.phi1 - 0.7).abs() < 1e-15 && f.r == 0.0 && f.phi2 == 0.0);
        let m = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
        let f = euler_decompose(&m).unwrap();
        assert!(f.r >= 0.0);
        assert!(max_abs_diff(&f.reconstruct(), &m) < 1e-12);
        assert!(matches!(
            euler_decompose(&Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])),
            Err(OwqcError::DecompositionFailure(_))
        ));
    }

    #[test]
    fn euler_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let e = EulerFactors {
                phi1: rng.random_range(-PI..PI),
                r: rng.random_range(-2.0..2.0),
                phi2: rng.random_range(-PI..PI),
            };
            let m = e.reconstruct();
            let f = euler_decompose(&m).unwrap();
            assert!(f.r >= 0.0);
            assert!(f.phi1 > -PI && f.phi1 <= PI && f.phi2 > -PI && f.phi2 <= PI);
            assert!(max_abs_diff(&f.reconstruct(), &m) < 1e-9);
        }
    }

    #[test]
    fn first_template_example() {
        let a = FourNodeAngles { theta3: PI / 4.0, theta4: PI / 4.0, theta_plus: 0.0, theta_minus: FRAC_PI_2 };
        let u = four_node_matrix(1, &a).unwrap();
        let want = Mat::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
        assert!(max_abs_diff(&u, &want) < 1e-14);
        assert!(four_node_matrix(6, &a).is_err());
        let bad = FourNodeAngles { theta3: FRAC_PI_2, ..a };
        assert!(matches!(four_node_matrix(5, &bad), Err(OwqcError::DegenerateAngles(_))));
    }

    #[test]
    fn closed_form_angles_reconstruct() {
        for j in 1..=5u8 {
            let (l, p) = quarter_turns(j).unwrap();
            for (phi1, r) in [(1.2, -0.5), (0.3, 0.8), (-2.9, 1.2), (0.2, 0.0)] {
                let (ang, phi2) =
                    four_node_angles_for(j, phi1, r).unwrap_or_else(|e| panic!("j={j} phi1={phi1} r={r}: {e}"));
                let u = four_node_matrix(j, &ang).unwrap();
                let want = rot1(-FRAC_PI_2 * l as f64 + phi1)
                    * squeeze_of(&[r])
                    * rot1(phi2 - FRAC_PI_2 * p as f64 - ang.theta_plus);
                assert!(max_abs_diff(&u, &want) < 1e-9, "j={j} phi1={phi1} r={r}");
            }
        }
    }

    #[test]
    fn infeasible_point_is_out_of_branch() {
        // for r > 0 the band around φ₁ = ±π/2 is infeasible
        assert!(matches!(four_node_angles_for(5, -1.5, 1.0), Err(OwqcError::OutOfBranch { config_id: 5, .. })));
        assert!(four_node_angles_for(5, 0.0, -1.0).is_err());
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!(angle_distance(PI - 1e-3, -PI + 1e-3) < 3e-3);
    }
}
