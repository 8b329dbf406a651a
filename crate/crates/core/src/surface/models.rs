//! Closed-form geometry of the analytic model surfaces, in raw chart coordinates.
//!
//! Directions are frame angles: the angle of a tangent direction measured in the
//! orthonormal frame obtained by normalizing the coordinate frame of the chart.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Below this `sin(theta)` (sphere) or radius (cone) the coordinate frame is
/// degenerate and the second basis vector is taken with unit length.
pub(crate) const POLE_EPS: f64 = 1e-12;

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Raw answer of a direction query between two points.
#[derive(Clone, Debug)]
pub(crate) struct RawDirections {
    pub distance: f64,
    /// Frame angles of the initial directions of all minimizing geodesics.
    pub angles: Vec<f64>,
    pub continuum: bool,
    /// False when the infimum is only approached (slit plane, through the tip).
    pub attained: bool,
}

impl RawDirections {
    fn unique(distance: f64, angle: f64) -> Self {
        Self { distance, angles: vec![angle], continuum: false, attained: true }
    }
}

// ---------------------------------------------------------------- plane

pub(crate) fn plane_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

pub(crate) fn plane_directions(a: [f64; 2], b: [f64; 2]) -> RawDirections {
    RawDirections::unique(plane_distance(a, b), (b[1] - a[1]).atan2(b[0] - a[0]))
}

pub(crate) fn plane_exp(a: [f64; 2], psi: f64, t: f64) -> [f64; 2] {
    [a[0] + t * psi.cos(), a[1] + t * psi.sin()]
}

// ---------------------------------------------------------------- sphere

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Unit position vector of polar coordinates `(theta, phi)`.
pub(crate) fn sphere_unit(c: [f64; 2]) -> V3 {
    let (st, ct) = c[0].sin_cos();
    let (sp, cp) = c[1].sin_cos();
    [st * cp, st * sp, ct]
}

/// Orthonormal frame `(e_theta, e_phi)`; well defined at the poles through `phi`.
pub(crate) fn sphere_frame(c: [f64; 2]) -> (V3, V3) {
    let (st, ct) = c[0].sin_cos();
    let (sp, cp) = c[1].sin_cos();
    ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

pub(crate) fn sphere_from_unit(n: V3) -> [f64; 2] {
    let theta = n[2].clamp(-1.0, 1.0).acos();
    let phi = if n[0] == 0.0 && n[1] == 0.0 { 0.0 } else { n[1].atan2(n[0]) };
    [theta, phi]
}

/// Central angle between two points of the unit sphere.
pub(crate) fn sphere_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (na, nb) = (sphere_unit(a), sphere_unit(b));
    norm3(cross(na, nb)).atan2(dot(na, nb))
}

pub(crate) fn sphere_directions(
    radius: f64,
    a: [f64; 2],
    b: [f64; 2],
    tol: f64,
    samples: usize,
) -> RawDirections {
    let ang = sphere_angle(a, b);
    let distance = radius * ang;
    if (PI - ang) * radius <= tol {
        let angles = (0..samples).map(|k| wrap_angle(-PI + TAU * k as f64 / samples as f64)).collect();
        return RawDirections { distance, angles, continuum: true, attained: true };
    }
    let (na, nb) = (sphere_unit(a), sphere_unit(b));
    let c = dot(na, nb);
    let w = [nb[0] - c * na[0], nb[1] - c * na[1], nb[2] - c * na[2]];
    let (et, ep) = sphere_frame(a);
    RawDirections::unique(distance, dot(w, ep).atan2(dot(w, et)))
}

pub(crate) fn sphere_exp(radius: f64, a: [f64; 2], psi: f64, t: f64) -> [f64; 2] {
    let n = sphere_unit(a);
    let (et, ep) = sphere_frame(a);
    let (sp, cp) = psi.sin_cos();
    let (s, c) = (t / radius).sin_cos();
    let p = [
        c * n[0] + s * (cp * et[0] + sp * ep[0]),
        c * n[1] + s * (cp * et[1] + sp * ep[1]),
        c * n[2] + s * (cp * et[2] + sp * ep[2]),
    ];
    let l = norm3(p);
    sphere_from_unit([p[0] / l, p[1] / l, p[2] / l])
}

pub(crate) fn sphere_ambient(a: [f64; 2], psi: f64) -> V3 {
    let (et, ep) = sphere_frame(a);
    let (sp, cp) = psi.sin_cos();
    [cp * et[0] + sp * ep[0], cp * et[1] + sp * ep[1], cp * et[2] + sp * ep[2]]
}

// ---------------------------------------------------------------- hyperbolic (Poincare disk)

fn cplx(a: [f64; 2]) -> Complex64 {
    Complex64::new(a[0], a[1])
}

/// Moves `b` so that `a` goes to the origin; direction-preserving at `a`.
fn disk_to_origin(a: Complex64, b: Complex64) -> Complex64 {
    (b - a) / (Complex64::new(1.0, 0.0) - a.conj() * b)
}

fn disk_from_origin(a: Complex64, u: Complex64) -> Complex64 {
    (u + a) / (Complex64::new(1.0, 0.0) + a.conj() * u)
}

pub(crate) fn hyperbolic_distance(scale: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
    let r = disk_to_origin(cplx(a), cplx(b)).norm().min(1.0 - 1e-16);
    2.0 * scale * r.atanh()
}

pub(crate) fn hyperbolic_directions(scale: f64, a: [f64; 2], b: [f64; 2]) -> RawDirections {
    let w = disk_to_origin(cplx(a), cplx(b));
    RawDirections::unique(2.0 * scale * w.norm().min(1.0 - 1e-16).atanh(), w.arg())
}

pub(crate) fn hyperbolic_exp(scale: f64, a: [f64; 2], psi: f64, t: f64) -> [f64; 2] {
    let u = Complex64::from_polar((t / (2.0 * scale)).tanh(), psi);
    let z = disk_from_origin(cplx(a), u);
    [z.re, z.im]
}

/// Conformal factor of the disk metric, `g = lambda^2 * euclidean`.
pub(crate) fn hyperbolic_conformal(scale: f64, a: [f64; 2]) -> f64 {
    2.0 * scale / (1.0 - (a[0] * a[0] + a[1] * a[1]))
}

// ---------------------------------------------------------------- flat cylinder

/// Horizontal offsets of the two shortest lifts of `b` relative to `a`.
fn cylinder_offsets(circumference: f64, a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let half = 0.5 * circumference;
    let du = (b[0] - a[0] + half).rem_euclid(circumference) - half;
    let alt = if du >= 0.0 { du - circumference } else { du + circumference };
    (du, alt)
}

pub(crate) fn cylinder_distance(circumference: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (du, _) = cylinder_offsets(circumference, a, b);
    du.hypot(b[1] - a[1])
}

pub(crate) fn cylinder_directions(circumference: f64, a: [f64; 2], b: [f64; 2], tol: f64) -> RawDirections {
    let (du, alt) = cylinder_offsets(circumference, a, b);
    let dh = b[1] - a[1];
    let (d0, d1) = (du.hypot(dh), alt.hypot(dh));
    let mut angles = vec![dh.atan2(du)];
    if d1 <= d0 + tol && d0 > 0.0 {
        angles.push(dh.atan2(alt));
    }
    RawDirections { distance: d0.min(d1), angles, continuum: false, attained: true }
}

pub(crate) fn cylinder_normalize(circumference: f64, a: [f64; 2]) -> [f64; 2] {
    [a[0].rem_euclid(circumference), a[1]]
}

// ---------------------------------------------------------------- slit plane

/// True when `p` lies on the removed ray `{(0, t) : t >= 0}`.
pub(crate) fn slit_on_ray(p: [f64; 2]) -> bool {
    p[0] == 0.0 && p[1] >= 0.0
}

/// True when the closed segment `ab` meets the removed ray.
pub(crate) fn slit_blocked(a: [f64; 2], b: [f64; 2]) -> bool {
    if slit_on_ray(a) || slit_on_ray(b) {
        return true;
    }
    if a[0] == 0.0 || b[0] == 0.0 || (a[0] > 0.0) == (b[0] > 0.0) {
        // Either both strictly on one side, or one endpoint on the open
        // negative axis which the ray does not contain.
        return false;
    }
    let y0 = a[1] + (b[1] - a[1]) * (-a[0]) / (b[0] - a[0]);
    y0 >= 0.0
}

pub(crate) fn slit_distance(a: [f64; 2], b: [f64; 2]) -> (f64, bool) {
    if slit_blocked(a, b) {
        (a[0].hypot(a[1]) + b[0].hypot(b[1]), false)
    } else {
        (plane_distance(a, b), true)
    }
}

pub(crate) fn slit_directions(a: [f64; 2], b: [f64; 2]) -> RawDirections {
    let (distance, attained) = slit_distance(a, b);
    let angle = if attained { (b[1] - a[1]).atan2(b[0] - a[0]) } else { (-a[1]).atan2(-a[0]) };
    RawDirections { distance, angles: vec![angle], continuum: false, attained }
}

pub(crate) fn slit_exp(a: [f64; 2], psi: f64, t: f64) -> Result<[f64; 2]> {
    let (s, c) = psi.sin_cos();
    let hit = if a[0] != 0.0 && c != 0.0 {
        let t_star = -a[0] / c;
        (t_star > 0.0 && a[1] + t_star * s >= 0.0).then_some(t_star)
    } else if a[0] == 0.0 && c.abs() < 1e-15 && s > 0.0 {
        Some(-a[1] / s)
    } else {
        None
    };
    if let Some(t_exit) = hit {
        if t_exit <= t {
            return Err(Error::DomainExit { t_exit });
        }
    }
    Ok(plane_exp(a, psi, t))
}

/// Distance from `p` to the removed ray.
pub(crate) fn slit_ray_distance(p: [f64; 2]) -> f64 {
    if p[1] <= 0.0 {
        p[0].hypot(p[1])
    } else {
        p[0].abs()
    }
}

// ---------------------------------------------------------------- flat cone

pub(crate) fn cone_normalize(total: f64, a: [f64; 2]) -> [f64; 2] {
    if a[0] == 0.0 {
        [0.0, 0.0]
    } else {
        [a[0], a[1].rem_euclid(total)]
    }
}

pub(crate) fn cone_directions(total: f64, a: [f64; 2], b: [f64; 2], tol: f64) -> RawDirections {
    let (r1, r2) = (a[0], b[0]);
    if r1 <= POLE_EPS || r2 <= POLE_EPS {
        let angle = if r2 <= POLE_EPS { PI } else { 0.0 };
        return RawDirections::unique((r1 - r2).abs(), angle);
    }
    let ccw = (b[1] - a[1]).rem_euclid(total);
    let mut cands: Vec<(f64, f64)> = Vec::with_capacity(2);
    for (w, sign) in [(ccw, 1.0), (total - ccw, -1.0)] {
        if w < PI {
            let (sw, cw) = w.sin_cos();
            let len = (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * cw).max(0.0).sqrt();
            cands.push((len, (sign * r2 * sw).atan2(r2 * cw - r1)));
        } else {
            cands.push((r1 + r2, PI));
        }
    }
    let d = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let mut angles: Vec<f64> = Vec::new();
    for (len, ang) in cands {
        if len <= d + tol && !angles.iter().any(|a: &f64| wrap_angle(a - ang).abs() < 1e-12) {
            angles.push(ang);
        }
    }
    RawDirections { distance: d, angles, continuum: false, attained: true }
}

pub(crate) fn cone_exp(total: f64, a: [f64; 2], psi: f64, t: f64) -> Result<[f64; 2]> {
    let (s, c) = psi.sin_cos();
    let p = [a[0] + t * c, t * s];
    let r = p[0].hypot(p[1]);
    if s.abs() < 1e-15 && c < 0.0 && t > a[0] {
        return Err(Error::ApexHit { t_apex: a[0] });
    }
    if r <= POLE_EPS {
        return Ok([0.0, 0.0]);
    }
    Ok(cone_normalize(total, [r, a[1] + p[1].atan2(p[0])]))
}
