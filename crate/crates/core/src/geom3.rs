//! Rotation algebra on SO(3).
//!
//! Rotations are stored as plain 3×3 matrices. Everything here is a pure
//! function of its inputs. The swing–twist solvers follow the convention
//! `R = swing · twist`, where the twist turns about the *template* bone axis
//! and the swing carries the template bone direction onto the observed one.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Default threshold for colinearity and vanishing-projection tests.
pub const DEFAULT_EPS: f64 = 1e-8;

/// A proper rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Wraps a matrix after checking `m·mᵀ = I` and `det m = 1` within `tol`.
    pub fn try_from_matrix(m: Mat3, tol: f64) -> Result<Self> {
        let r = Rotation(m);
        if r.orthonormality_error() > tol || (m.determinant() - 1.0).abs() > tol {
            return Err(Error::validation("matrix is not a proper rotation"));
        }
        Ok(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Largest absolute entry of `m·mᵀ − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0 * self.0.transpose() - Mat3::identity()).abs().max()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }

    /// Rotation vector (axis × angle) with angle in [0, π].
    pub fn log(&self) -> Vec3 {
        let aa = to_axis_angle(self);
        aa.axis * aa.angle
    }

    /// Rotation from a rotation vector; the zero vector maps to identity.
    pub fn exp(v: &Vec3) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            return Rotation::identity();
        }
        rodrigues_unit(&(v / angle), angle)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.0;
        let rows = [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ];
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        let m = Mat3::from_fn(|i, j| rows[i][j]);
        Rotation::try_from_matrix(m, 1e-6).map_err(serde::de::Error::custom)
    }
}

/// Unit axis and angle in [0, π].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

/// Result of a swing–twist solve for one bone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwingTwist {
    pub swing: Rotation,
    pub twist: Rotation,
    pub n_sw: Vec3,
    pub alpha_sw: f64,
    pub n_tw: Vec3,
    pub alpha_tw: f64,
    pub swing_degenerate: bool,
    pub twist_degenerate: bool,
    /// Fraction of anchor weight that survived the projection test.
    pub twist_confidence: f64,
}

impl SwingTwist {
    /// The composed rotation `swing · twist`.
    pub fn rotation(&self) -> Rotation {
        self.swing * self.twist
    }
}

/// Output of [`swing_from_vectors`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Swing {
    pub rotation: Rotation,
    pub axis: Vec3,
    pub angle: f64,
    pub degenerate: bool,
}

/// Output of [`twist_from_anchors`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist {
    pub rotation: Rotation,
    pub angle: f64,
    pub confidence: f64,
    pub degenerate: bool,
}

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn rodrigues_unit(axis: &Vec3, angle: f64) -> Rotation {
    let k = skew(axis);
    let (s, c) = angle.sin_cos();
    Rotation(Mat3::identity() + k * s + k * k * (1.0 - c))
}

/// `I + sin α [n]× + (1 − cos α)[n]×²`.
pub fn rodrigues(axis: &Vec3, angle: f64) -> Result<Rotation> {
    let n = axis.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "rodrigues axis must be unit length, got norm {n}"
        )));
    }
    if !angle.is_finite() {
        return Err(Error::validation("rodrigues angle must be finite"));
    }
    Ok(rodrigues_unit(axis, angle))
}

/// Inverse of [`rodrigues`].
///
/// Uses the largest-pivot quaternion extraction so accuracy holds near both
/// 0 and π. The identity maps to angle 0 about (1, 0, 0); at exactly π the
/// axis sign is chosen so its largest-magnitude component is positive.
pub fn to_axis_angle(r: &Rotation) -> AxisAngle {
    let m = &r.0;
    let trace = m.trace();
    // (w, x, y, z), scaled; only direction matters after this block
    let q = if trace >= m[(0, 0)] && trace >= m[(1, 1)] && trace >= m[(2, 2)] {
        let s = (1.0 + trace).max(0.0).sqrt() * 2.0;
        [
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        ]
    } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).max(0.0).sqrt() * 2.0;
        [
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        ]
    } else if m[(1, 1)] >= m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).max(0.0).sqrt() * 2.0;
        [
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        ]
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).max(0.0).sqrt() * 2.0;
        [
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        ]
    };
    let (mut w, mut v) = (q[0], Vec3::new(q[1], q[2], q[3]));
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let vn = v.norm();
    if vn == 0.0 {
        return AxisAngle {
            axis: Vec3::x(),
            angle: 0.0,
        };
    }
    let angle = 2.0 * vn.atan2(w);
    let mut axis = v / vn;
    // half turns: both signs describe the same rotation
    if w <= 1e-12 * vn {
        let big = axis.iamax();
        if axis[big] < 0.0 {
            axis = -axis;
        }
    }
    AxisAngle {
        axis,
        angle: angle.min(PI),
    }
}

/// Unit vector perpendicular to `t`: Gram–Schmidt of (1,0,0), falling back
/// to (0,1,0) when `t` is too close to the x axis.
pub fn deterministic_perpendicular(t: &Vec3) -> Vec3 {
    let t = t.normalize();
    for e in [Vec3::x(), Vec3::y()] {
        let u = e - t * t.dot(&e);
        let n = u.norm();
        if n > 0.1 {
            return u / n;
        }
    }
    unreachable!("x and y cannot both be parallel to a unit vector")
}

/// Minimal rotation carrying the direction of `v_tem` onto that of `v_obs`.
///
/// When the vectors are (anti-)parallel within `eps` the axis is undefined:
/// the aligned case yields identity, the anti-aligned case a half turn about
/// [`deterministic_perpendicular`], and `degenerate` is set either way.
pub fn swing_from_vectors(v_tem: &Vec3, v_obs: &Vec3, eps: f64) -> Result<Swing> {
    let nt = v_tem.norm();
    let no = v_obs.norm();
    if !(nt > eps) || !(no > eps) || !nt.is_finite() || !no.is_finite() {
        return Err(Error::validation(
            "swing requires two finite non-zero vectors",
        ));
    }
    let cross = v_tem.cross(v_obs);
    let cn = cross.norm();
    let dot = v_tem.dot(v_obs);
    if cn <= eps * nt * no {
        if dot > 0.0 {
            return Ok(Swing {
                rotation: Rotation::identity(),
                axis: deterministic_perpendicular(v_tem),
                angle: 0.0,
                degenerate: true,
            });
        }
        let axis = deterministic_perpendicular(v_tem);
        return Ok(Swing {
            rotation: rodrigues_unit(&axis, PI),
            axis,
            angle: PI,
            degenerate: true,
        });
    }
    let axis = cross / cn;
    let angle = cn.atan2(dot);
    Ok(Swing {
        rotation: rodrigues_unit(&axis, angle),
        axis,
        angle,
        degenerate: false,
    })
}

/// Twist about `n_tw` aligning template anchors with observed anchors.
pub fn twist_from_anchors(n_tw: &Vec3, a_tem: &[Vec3], a_obs: &[Vec3], eps: f64) -> Result<Twist> {
    let ones = vec![1.0; a_tem.len()];
    twist_from_weighted_anchors(n_tw, a_tem, a_obs, &ones, eps)
}

/// [`twist_from_anchors`] with an extra non-negative weight per anchor pair,
/// multiplied into the projected-norm weight.
///
/// Each pair is projected onto the plane perpendicular to `n_tw`; the signed
/// angle of each surviving pair is averaged on the circle.
pub fn twist_from_weighted_anchors(
    n_tw: &Vec3,
    a_tem: &[Vec3],
    a_obs: &[Vec3],
    weights: &[f64],
    eps: f64,
) -> Result<Twist> {
    if a_tem.len() != a_obs.len() || a_tem.len() != weights.len() {
        return Err(Error::validation(format!(
            "twist anchor lists differ in length: {} template, {} observed, {} weights",
            a_tem.len(),
            a_obs.len(),
            weights.len()
        )));
    }
    let nn = n_tw.norm();
    if (nn - 1.0).abs() > 1e-9 {
        return Err(Error::validation("twist axis must be unit length"));
    }
    let mut total = 0.0;
    let mut surviving = 0.0;
    let (mut sum_sin, mut sum_cos) = (0.0, 0.0);
    for ((t, o), &extra) in a_tem.iter().zip(a_obs).zip(weights) {
        if extra < 0.0 || !extra.is_finite() {
            return Err(Error::validation("twist anchor weights must be finite and >= 0"));
        }
        let tp = t - n_tw * t.dot(n_tw);
        let op = o - n_tw * o.dot(n_tw);
        let (tn, on) = (tp.norm(), op.norm());
        let w = tn.min(on) * extra;
        total += w;
        if tn <= eps || on <= eps || w == 0.0 {
            continue;
        }
        let alpha = tp.cross(&op).dot(n_tw).atan2(tp.dot(&op));
        surviving += w;
        sum_sin += w * alpha.sin();
        sum_cos += w * alpha.cos();
    }
    if surviving == 0.0 || (sum_sin.hypot(sum_cos)) <= eps * surviving {
        return Ok(Twist {
            rotation: Rotation::identity(),
            angle: 0.0,
            confidence: 0.0,
            degenerate: true,
        });
    }
    let angle = sum_sin.atan2(sum_cos);
    Ok(Twist {
        rotation: rodrigues_unit(n_tw, angle),
        angle,
        confidence: (surviving / total).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Full bone rotation `swing · twist`.
pub fn solve_bone_rotation(
    v_tem: &Vec3,
    v_obs: &Vec3,
    a_tem: &[Vec3],
    a_obs: &[Vec3],
    eps: f64,
) -> Result<SwingTwist> {
    let ones = vec![1.0; a_tem.len()];
    solve_weighted_bone_rotation(v_tem, v_obs, a_tem, a_obs, &ones, eps)
}

/// [`solve_bone_rotation`] with per-anchor weights (e.g. anchor confidences).
///
/// Observed anchors are un-swung before projection so the twist is measured
/// about the template bone axis.
pub fn solve_weighted_bone_rotation(
    v_tem: &Vec3,
    v_obs: &Vec3,
    a_tem: &[Vec3],
    a_obs: &[Vec3],
    weights: &[f64],
    eps: f64,
) -> Result<SwingTwist> {
    if a_tem.len() != a_obs.len() {
        return Err(Error::validation("bone anchor lists differ in length"));
    }
    let swing = swing_from_vectors(v_tem, v_obs, eps)?;
    let n_tw = v_tem.normalize();
    let unswung: Vec<Vec3> = a_obs
        .iter()
        .map(|a| swing.rotation.transpose() * *a)
        .collect();
    let twist = twist_from_weighted_anchors(&n_tw, a_tem, &unswung, weights, eps)?;
    Ok(SwingTwist {
        swing: swing.rotation,
        twist: twist.rotation,
        n_sw: swing.axis,
        alpha_sw: swing.angle,
        n_tw,
        alpha_tw: twist.angle,
        swing_degenerate: swing.degenerate,
        twist_degenerate: twist.degenerate,
        twist_confidence: twist.confidence,
    })
}

/// Splits `r` into `swing · twist` with the twist about `axis`.
pub fn swing_twist_decompose(r: &Rotation, axis: &Vec3, eps: f64) -> Result<SwingTwist> {
    let n_tw = axis.normalize();
    let swing = swing_from_vectors(&n_tw, &(r * &n_tw), eps)?;
    let twist = swing.rotation.transpose() * *r;
    let aa = to_axis_angle(&twist);
    let alpha_tw = if aa.angle == 0.0 {
        0.0
    } else {
        aa.angle * aa.axis.dot(&n_tw).signum()
    };
    Ok(SwingTwist {
        swing: swing.rotation,
        twist,
        n_sw: swing.axis,
        alpha_sw: swing.angle,
        n_tw,
        alpha_tw,
        swing_degenerate: swing.degenerate,
        twist_degenerate: false,
        twist_confidence: 1.0,
    })
}

/// Nearest rotation to an arbitrary matrix in the Frobenius sense: the
/// orthogonal polar factor with its determinant forced to +1.
pub fn project_to_so3(m: &Mat3) -> Result<Rotation> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("cannot project a non-finite matrix onto SO(3)"));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::numerical("SVD failed while projecting onto SO(3)")),
    };
    let d = (u * v_t).determinant().signum();
    let d = if d == 0.0 { 1.0 } else { d };
    let corr = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    Ok(Rotation(u * corr * v_t))
}

/// Weighted chordal L2 mean: the exact minimiser of `Σ wᵢ‖R − Rᵢ‖²_F`.
pub fn chordal_mean(rotations: &[Rotation], weights: &[f64]) -> Result<Rotation> {
    if rotations.is_empty() {
        return Err(Error::validation("chordal mean of an empty set"));
    }
    if rotations.len() != weights.len() {
        return Err(Error::validation("chordal mean: one weight per rotation required"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::validation("chordal mean weights must be finite and >= 0"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation("chordal mean needs at least one positive weight"));
    }
    let mut acc = Mat3::zeros();
    for (r, w) in rotations.iter().zip(weights) {
        acc += r.0 * (*w / total);
    }
    project_to_so3(&acc)
}

/// Weighted orthogonal Procrustes: rotation minimising `Σ wᵢ‖dstᵢ − R·srcᵢ‖²`.
pub fn procrustes(src: &[Vec3], dst: &[Vec3], weights: &[f64]) -> Result<Rotation> {
    if src.len() != dst.len() || src.len() != weights.len() || src.is_empty() {
        return Err(Error::validation(
            "procrustes needs equally sized, non-empty vector lists",
        ));
    }
    let mut m = Mat3::zeros();
    for ((s, d), w) in src.iter().zip(dst).zip(weights) {
        m += d * s.transpose() * *w;
    }
    if m.norm() == 0.0 {
        return Err(Error::validation("procrustes cross-covariance vanishes"));
    }
    project_to_so3(&m)
}

/// Rank of the weighted cross-covariance used by [`procrustes`], judged
/// relative to its largest singular value.
pub fn procrustes_rank(src: &[Vec3], dst: &[Vec3], weights: &[f64], rel_tol: f64) -> usize {
    let mut m = Mat3::zeros();
    for ((s, d), w) in src.iter().zip(dst).zip(weights) {
        m += d * s.transpose() * *w;
    }
    let sv = m.singular_values();
    let top = sv.max();
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * top).count()
}

/// Geodesic distance in degrees, `acos((tr(r1ᵀ r2) − 1)/2)` clamped.
pub fn geodesic_angle_deg(r1: &Rotation, r2: &Rotation) -> f64 {
    let rel = r1.0.transpose() * r2.0;
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Geodesic distance in radians, accurate for small angles.
pub fn geodesic_angle_rad(r1: &Rotation, r2: &Rotation) -> f64 {
    to_axis_angle(&(r1.transpose() * *r2)).angle
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_abs(m: &Mat3) -> f64 {
        m.abs().max()
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rodrigues(&Vec3::z(), PI / 2.0).unwrap();
        let want = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(max_abs(&(r.matrix() - want)) < 1e-15);
    }

    #[test]
    fn zero_angle_is_identity() {
        let r = rodrigues(&Vec3::new(0.6, 0.0, 0.8), 0.0).unwrap();
        assert_eq!(*r.matrix(), Mat3::identity());
    }

    #[test]
    fn rodrigues_rejects_non_unit_axis() {
        assert!(matches!(
            rodrigues(&Vec3::new(0.0, 0.0, 2.0), 1.0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn identity_to_axis_angle() {
        let aa = to_axis_angle(&Rotation::identity());
        assert_eq!(aa.angle, 0.0);
        assert_eq!(aa.axis, Vec3::x());
    }

    #[test]
    fn axis_angle_round_trip_about_y() {
        let aa = to_axis_angle(&rodrigues(&Vec3::y(), 1.0).unwrap());
        assert_abs_diff_eq!(aa.angle, 1.0, epsilon = 1e-9);
        assert!((aa.axis - Vec3::y()).norm() < 1e-9);
    }

    #[test]
    fn half_turn_sign_rule() {
        for axis in [Vec3::x(), -Vec3::x(), Vec3::new(0.0, -0.6, 0.8)] {
            let r = rodrigues(&axis, PI).unwrap();
            let aa = to_axis_angle(&r);
            assert_abs_diff_eq!(aa.angle, PI, epsilon = 1e-9);
            assert!(aa.axis[aa.axis.iamax()] > 0.0);
            let back = rodrigues(&aa.axis, aa.angle).unwrap();
            assert!(max_abs(&(back.matrix() - r.matrix())) < 1e-9);
        }
    }

    #[test]
    fn swing_parallel_is_identity() {
        let s = swing_from_vectors(&Vec3::z(), &Vec3::new(0.0, 0.0, 2.0), DEFAULT_EPS).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.rotation, Rotation::identity());
    }

    #[test]
    fn swing_quarter_turn() {
        let s = swing_from_vectors(&Vec3::z(), &Vec3::x(), DEFAULT_EPS).unwrap();
        assert!(!s.degenerate);
        assert!((s.axis - Vec3::y()).norm() < 1e-12);
        assert_abs_diff_eq!(s.angle, PI / 2.0, epsilon = 1e-12);
        assert!((s.rotation * Vec3::z() - Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn swing_anti_parallel_half_turn_about_x() {
        let s = swing_from_vectors(&Vec3::z(), &-Vec3::z(), DEFAULT_EPS).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.axis, Vec3::x());
        assert_abs_diff_eq!(s.angle, PI);
        assert!((s.rotation * Vec3::z() + Vec3::z()).norm() < 1e-9);
    }

    #[test]
    fn swing_rejects_zero_vector() {
        assert!(swing_from_vectors(&Vec3::zeros(), &Vec3::x(), DEFAULT_EPS).is_err());
    }

    #[test]
    fn twist_identity_when_anchors_agree() {
        let a = [Vec3::new(1.0, 0.0, 0.3), Vec3::new(0.0, 1.0, -0.2)];
        let t = twist_from_anchors(&Vec3::z(), &a, &a, DEFAULT_EPS).unwrap();
        assert_eq!(t.angle, 0.0);
        assert!(!t.degenerate);
        assert!(max_abs(&(t.rotation.matrix() - Mat3::identity())) < 1e-15);
    }

    #[test]
    fn twist_recovers_single_anchor_angle() {
        let a = Vec3::x();
        let obs = rodrigues(&Vec3::z(), 0.5).unwrap() * a;
        let t = twist_from_anchors(&Vec3::z(), &[a], &[obs], DEFAULT_EPS).unwrap();
        assert_abs_diff_eq!(t.angle, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(t.confidence, 1.0);
    }

    #[test]
    fn twist_colinear_anchor_is_degenerate() {
        let a = Vec3::new(0.0, 0.0, 2.0);
        let t = twist_from_anchors(&Vec3::z(), &[a], &[a], DEFAULT_EPS).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.confidence, 0.0);
        assert_eq!(t.rotation, Rotation::identity());
    }

    #[test]
    fn twist_rejects_mismatched_lists() {
        let r = twist_from_anchors(&Vec3::z(), &[Vec3::x()], &[], DEFAULT_EPS);
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn bone_parallel_with_twisted_anchors() {
        let tw = rodrigues(&Vec3::y(), 1.2).unwrap();
        let a_tem = [Vec3::new(0.1, 0.05, 0.0), Vec3::new(0.0, 0.2, 0.08)];
        let a_obs: Vec<Vec3> = a_tem.iter().map(|a| tw * *a).collect();
        let st = solve_bone_rotation(&Vec3::y(), &(Vec3::y() * 3.0), &a_tem, &a_obs, DEFAULT_EPS)
            .unwrap();
        assert_eq!(st.swing, Rotation::identity());
        assert_abs_diff_eq!(st.alpha_tw, 1.2, epsilon = 1e-9);
    }

    #[test]
    fn bone_colinear_anchors_give_swing_only() {
        let v = Vec3::new(0.0, -0.4, 0.0);
        let a = [v * 0.5, v * 0.9];
        let obs_dir = Vec3::new(0.3, -0.3, 0.1);
        let a_obs: Vec<Vec3> = a.iter().map(|x| obs_dir.normalize() * x.norm()).collect();
        let st = solve_bone_rotation(&v, &obs_dir, &a, &a_obs, DEFAULT_EPS).unwrap();
        assert!(st.twist_degenerate);
        assert_eq!(st.alpha_tw, 0.0);
        assert!((st.rotation() * v.normalize() - obs_dir.normalize()).norm() < 1e-9);
    }

    #[test]
    fn chordal_mean_of_copies() {
        let r = rodrigues(&Vec3::new(0.0, 0.6, 0.8), 2.0).unwrap();
        let m = chordal_mean(&[r, r, r], &[1.0, 2.0, 0.5]).unwrap();
        assert!(max_abs(&(m.matrix() - r.matrix())) < 1e-12);
    }

    #[test]
    fn chordal_mean_errors() {
        assert!(chordal_mean(&[], &[]).is_err());
        assert!(chordal_mean(&[Rotation::identity()], &[0.0]).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let q = rodrigues(&Vec3::x(), PI / 2.0).unwrap();
        assert_abs_diff_eq!(geodesic_angle_deg(&q, &q), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(geodesic_angle_deg(&Rotation::identity(), &q), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn decompose_recombines() {
        let r = Rotation::exp(&Vec3::new(0.3, -0.7, 0.4));
        let axis = Vec3::new(0.2, 1.0, -0.1);
        let st = swing_twist_decompose(&r, &axis, DEFAULT_EPS).unwrap();
        assert!(max_abs(&(st.rotation().matrix() - r.matrix())) < 1e-12);
        assert!((st.twist * st.n_tw - st.n_tw).norm() < 1e-12);
    }
}
