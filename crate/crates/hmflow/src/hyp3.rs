//! Hyperbolic 3-space in the upper half-space model: points, ideal points,
//! Möbius isometries with their Poincaré extension, geodesics, geodesic
//! planes, convex hulls of ideal vertex sets, discrete curve curvature.
//!
//! The metric is (dx² + dy² + dz²)/z². Exponential and logarithm maps go
//! through the hyperboloid (Minkowski) model where they are linear-algebraic.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointH3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PointH3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        PointH3 { x, y, z }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.z > 0.0
    }

    /// Horizontal coordinate as a complex number.
    pub fn horiz(&self) -> C64 {
        C64::new(self.x, self.y)
    }
}

/// A boundary point of ℍ³, i.e. a point of ℂP¹ = ℂ ∪ {∞}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdealPoint {
    Finite(C64),
    Inf,
}

impl IdealPoint {
    pub fn finite(x: f64, y: f64) -> Self {
        IdealPoint::Finite(C64::new(x, y))
    }

    /// Projective lift: ∞ = (1 : 0), finite w = (w : 1).
    pub fn lift(&self) -> (C64, C64) {
        match self {
            IdealPoint::Finite(w) => (*w, C64::new(1.0, 0.0)),
            IdealPoint::Inf => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        }
    }

    pub fn from_lift(a: C64, b: C64) -> Self {
        if b.norm() == 0.0 || a.norm() / b.norm() > 1e14 {
            IdealPoint::Inf
        } else {
            IdealPoint::Finite(a / b)
        }
    }

    pub fn approx_eq(&self, other: &IdealPoint, tol: f64) -> bool {
        match (self, other) {
            (IdealPoint::Inf, IdealPoint::Inf) => true,
            (IdealPoint::Finite(a), IdealPoint::Finite(b)) => (a - b).norm() <= tol,
            _ => false,
        }
    }
}

/// det(p, q) of the projective lifts; zero iff the ideal points coincide.
pub fn lift_det(p: &IdealPoint, q: &IdealPoint) -> C64 {
    let (a1, b1) = p.lift();
    let (a2, b2) = q.lift();
    a1 * b2 - a2 * b1
}

// ---------------------------------------------------------------------------
// distance and the hyperboloid model

/// Hyperbolic distance, cosh d = 1 + (Δx² + Δy² + Δz²)/(2 z_p z_q).
pub fn dist(p: &PointH3, q: &PointH3) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let dz = p.z - q.z;
    let c = 1.0 + (dx * dx + dy * dy + dz * dz) / (2.0 * p.z * q.z);
    // Guard the acosh argument against rounding below 1.
    c.max(1.0).acosh()
}

/// Minkowski coordinates (X0, X1, X2, X3) with X0² − X1² − X2² − X3² = 1.
pub fn to_mink(p: &PointH3) -> [f64; 4] {
    let r2 = p.x * p.x + p.y * p.y + p.z * p.z;
    [
        (r2 + 1.0) / (2.0 * p.z),
        p.x / p.z,
        p.y / p.z,
        (r2 - 1.0) / (2.0 * p.z),
    ]
}

pub fn from_mink(v: [f64; 4]) -> PointH3 {
    let z = 1.0 / (v[0] - v[3]);
    PointH3::new(v[1] * z, v[2] * z, z)
}

fn mink_inner(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
}

/// Push a model-coordinate tangent vector at p to the hyperboloid.
fn mink_push(p: &PointH3, v: [f64; 3]) -> [f64; 4] {
    let x = to_mink(p);
    let radial = (p.x * v[0] + p.y * v[1] + p.z * v[2]) / p.z;
    [
        radial - x[0] * v[2] / p.z,
        (v[0] - x[1] * v[2]) / p.z,
        (v[1] - x[2] * v[2]) / p.z,
        radial - x[3] * v[2] / p.z,
    ]
}

/// Pull a Minkowski tangent at the image of p back to model coordinates.
fn mink_pull(p: &PointH3, w: [f64; 4]) -> [f64; 3] {
    let x = to_mink(p);
    let dz = -(w[0] - w[3]) * p.z * p.z;
    [w[1] * p.z + x[1] * dz, w[2] * p.z + x[2] * dz, dz]
}

/// Hyperbolic norm of a model-coordinate tangent vector at p.
pub fn tangent_norm(p: &PointH3, v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() / p.z
}

/// Exponential map: move from p along the tangent vector v (model
/// coordinates) by hyperbolic distance |v|.
pub fn exp_map(p: &PointH3, v: [f64; 3]) -> PointH3 {
    let s = tangent_norm(p, v);
    if s < 1e-300 {
        return *p;
    }
    // Recentre on p (w ↦ (w − p)/p.z): Minkowski coordinates of p become
    // (1,0,0,0), so small moves are not lost to cancellation when p.z is
    // very large or very small.
    let o = PointH3::new(0.0, 0.0, 1.0);
    let vv = [v[0] / p.z, v[1] / p.z, v[2] / p.z];
    let x = to_mink(&o);
    let w = mink_push(&o, vv);
    let (ch, sh) = (s.cosh(), s.sinh());
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = ch * x[i] + sh * w[i] / s;
    }
    let b = from_mink(out);
    PointH3::new(p.x + p.z * b.x, p.y + p.z * b.y, p.z * b.z)
}

/// Logarithm map: tangent vector at p (model coordinates) pointing to q,
/// with hyperbolic norm dist(p, q).
pub fn log_map(p: &PointH3, q: &PointH3) -> [f64; 3] {
    // Recentre on p as in exp_map, then scale the tangent back.
    let o = PointH3::new(0.0, 0.0, 1.0);
    let qq = PointH3::new((q.x - p.x) / p.z, (q.y - p.y) / p.z, q.z / p.z);
    let d = dist(&o, &qq);
    let xp = to_mink(&o);
    let xq = to_mink(&qq);
    let w = if d < 1e-12 {
        // First-order: the difference is already tangent to this accuracy.
        [xq[0] - xp[0], xq[1] - xp[1], xq[2] - xp[2], xq[3] - xp[3]]
    } else {
        let ch = d.cosh();
        let scale = d / d.sinh();
        [
            (xq[0] - ch * xp[0]) * scale,
            (xq[1] - ch * xp[1]) * scale,
            (xq[2] - ch * xp[2]) * scale,
            (xq[3] - ch * xp[3]) * scale,
        ]
    };
    let vv = mink_pull(&o, w);
    [vv[0] * p.z, vv[1] * p.z, vv[2] * p.z]
}

/// Normalized Minkowski blend of points with nonnegative weights: a smooth
/// barycenter that reduces to a point on the geodesic for two points.
pub fn mink_blend(points: &[PointH3], weights: &[f64]) -> PointH3 {
    // Recentre on the heaviest point so Minkowski coordinates stay O(1);
    // blending raw coordinates of deep-cusp points (z ~ 1e-20) cancels
    // catastrophically in the normalisation.
    let mut ref_i = 0;
    for (i, w) in weights.iter().enumerate() {
        if w.abs() > weights[ref_i].abs() {
            ref_i = i;
        }
    }
    let c = points[ref_i];
    let mut acc = [0.0; 4];
    for (p, w) in points.iter().zip(weights) {
        let q = PointH3::new((p.x - c.x) / c.z, (p.y - c.y) / c.z, p.z / c.z);
        let x = to_mink(&q);
        for i in 0..4 {
            acc[i] += w * x[i];
        }
    }
    let n = mink_inner(acc, acc).max(1e-300).sqrt();
    for a in acc.iter_mut() {
        *a /= n;
    }
    let b = from_mink(acc);
    PointH3::new(c.x + c.z * b.x, c.y + c.z * b.y, c.z * b.z)
}

// ---------------------------------------------------------------------------
// Möbius transformations

#[derive(Debug, Clone, Copy)]
pub struct Mobius {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mobius {
    pub fn identity() -> Self {
        Mobius {
            a: C64::new(1.0, 0.0),
            b: C64::new(0.0, 0.0),
            c: C64::new(0.0, 0.0),
            d: C64::new(1.0, 0.0),
        }
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Scale entries so the determinant is 1 (PSL₂: sign is a gauge).
    pub fn normalized(&self) -> Result<Mobius> {
        let det = self.det();
        if det.norm() < 1e-100 {
            return Err(Error::Invalid("degenerate Mobius matrix".into()));
        }
        let s = det.sqrt();
        Ok(Mobius {
            a: self.a / s,
            b: self.b / s,
            c: self.c / s,
            d: self.d / s,
        })
    }

    pub fn inverse(&self) -> Mobius {
        // For det = 1 this is the exact inverse; otherwise inverse up to scale,
        // which is the same PSL₂ element.
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn compose(&self, rhs: &Mobius) -> Mobius {
        Mobius {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn apply_ideal(&self, p: &IdealPoint) -> IdealPoint {
        let (alpha, beta) = p.lift();
        IdealPoint::from_lift(self.a * alpha + self.b * beta, self.c * alpha + self.d * beta)
    }

    /// Poincaré extension to the interior, via the quaternion formula:
    /// for w = u + z j, g(w) = (aw + b)(cw + d)^{-1}.
    pub fn apply_point(&self, p: &PointH3) -> PointH3 {
        let u = p.horiz();
        let pnum = self.a * u + self.b;
        let qnum = self.a * p.z;
        let pden = self.c * u + self.d;
        let qden = self.c * p.z;
        let det = self.det();
        let denom = pden.norm_sqr() + qden.norm_sqr();
        let unew = (pnum * pden.conj() + qnum * qden.conj()) / denom;
        let znew = p.z * det.norm() / denom;
        PointH3::new(unew.re, unew.im, znew)
    }

    /// Push a tangent vector at p forward through the isometry.
    /// Central difference through exp/log; O(δ²) ≈ 1e−10 accuracy.
    pub fn apply_tangent(&self, p: &PointH3, v: [f64; 3]) -> [f64; 3] {
        let n = tangent_norm(p, v);
        if n < 1e-300 {
            return [0.0; 3];
        }
        let delta = 1e-5 / n;
        let plus = self.apply_point(&exp_map(p, [v[0] * delta, v[1] * delta, v[2] * delta]));
        let minus = self.apply_point(&exp_map(p, [-v[0] * delta, -v[1] * delta, -v[2] * delta]));
        let gp = self.apply_point(p);
        let lp = log_map(&gp, &plus);
        let lm = log_map(&gp, &minus);
        [
            (lp[0] - lm[0]) / (2.0 * delta),
            (lp[1] - lm[1]) / (2.0 * delta),
            (lp[2] - lm[2]) / (2.0 * delta),
        ]
    }
}

// ---------------------------------------------------------------------------
// cross-ratios and normalizations

/// cr = ((p1−p3)(p2−p4)) / ((p1−p4)(p2−p3)), with the ∞-limit rules handled
/// through projective lifts. cr(0, 1, ∞, λ) = (λ−1)/λ.
pub fn cross_ratio(p1: &IdealPoint, p2: &IdealPoint, p3: &IdealPoint, p4: &IdealPoint) -> Result<C64> {
    let num = lift_det(p1, p3) * lift_det(p2, p4);
    let den = lift_det(p1, p4) * lift_det(p2, p3);
    if den.norm() < 1e-150 * (1.0 + num.norm()) {
        return Err(Error::Invalid("degenerate cross-ratio quadruple".into()));
    }
    Ok(num / den)
}

/// Möbius transformation sending (p1, p2, p3) to (0, 1, ∞).
pub fn normalize_triple(p1: &IdealPoint, p2: &IdealPoint, p3: &IdealPoint) -> Result<Mobius> {
    let (a1, b1) = p1.lift();
    let (a3, b3) = p3.lift();
    let d23 = lift_det(p2, p3);
    let d21 = lift_det(p2, p1);
    let g = Mobius {
        a: b1 * d23,
        b: -a1 * d23,
        c: b3 * d21,
        d: -a3 * d21,
    };
    g.normalized()
        .map_err(|_| Error::Invalid("normalize_triple requires three distinct ideal points".into()))
}

/// Möbius transformation sending (e1, e2) to (0, ∞); the remaining
/// z ↦ kz freedom is fixed by the lift normalization.
pub fn normalize_pair(e1: &IdealPoint, e2: &IdealPoint) -> Result<Mobius> {
    let (a1, b1) = e1.lift();
    let (a2, b2) = e2.lift();
    let g = Mobius {
        a: b1,
        b: -a1,
        c: b2,
        d: -a2,
    };
    g.normalized()
        .map_err(|_| Error::Invalid("geodesic endpoints must be distinct".into()))
}

// ---------------------------------------------------------------------------
// geodesics

#[derive(Debug, Clone, Copy)]
pub struct GeodesicLine {
    pub e1: IdealPoint,
    pub e2: IdealPoint,
}

impl GeodesicLine {
    pub fn new(e1: IdealPoint, e2: IdealPoint) -> Result<Self> {
        if lift_det(&e1, &e2).norm() < 1e-14 {
            return Err(Error::Invalid("geodesic endpoints coincide".into()));
        }
        Ok(GeodesicLine { e1, e2 })
    }

    /// Unit-speed parametrization: x → −∞ approaches e1, x → +∞ approaches e2.
    /// The basepoint (x = 0) is the pullback of (0,0,1) under the pair
    /// normalization, a deterministic choice.
    pub fn point_at(&self, x: f64) -> Result<PointH3> {
        let g = normalize_pair(&self.e1, &self.e2)?;
        Ok(g.inverse().apply_point(&PointH3::new(0.0, 0.0, x.exp())))
    }

    pub fn dist_to(&self, p: &PointH3) -> Result<f64> {
        let g = normalize_pair(&self.e1, &self.e2)?;
        let q = g.apply_point(p);
        let r = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        Ok((r / q.z).max(1.0).acosh())
    }
}

/// Elliptic rotation about the axis by the given angle; fixes both endpoints.
pub fn elliptic_about_axis(axis: &GeodesicLine, angle: f64) -> Result<Mobius> {
    screw_about_axis(axis, angle, 0.0)
}

/// Isometry fixing the axis with rotation `angle` and translation length
/// `trans` along it (elliptic for trans = 0, loxodromic otherwise).
pub fn screw_about_axis(axis: &GeodesicLine, angle: f64, trans: f64) -> Result<Mobius> {
    let g = normalize_pair(&axis.e1, &axis.e2)?;
    let half = C64::from_polar((trans / 2.0).exp(), angle / 2.0);
    let rot = Mobius {
        a: half,
        b: C64::new(0.0, 0.0),
        c: C64::new(0.0, 0.0),
        d: half.inv(),
    };
    Ok(g.inverse().compose(&rot).compose(&g))
}

/// Rotation angle and translation length of an isometry fixing the axis
/// endpoints (elliptic/loxodromic with that axis).
pub fn axis_rotation_angle(g: &Mobius, axis: &GeodesicLine) -> Result<(f64, f64)> {
    let n = normalize_pair(&axis.e1, &axis.e2)?;
    let conj = n.compose(g).compose(&n.inverse()).normalized()?;
    if conj.b.norm() > 1e-6 || conj.c.norm() > 1e-6 {
        return Err(Error::Numerical("isometry does not fix the axis".into()));
    }
    // diag(λ, 1/λ) acts as w ↦ λ² w; rotation angle = arg λ², translation = |ln|λ²||.
    let lam2 = conj.a / conj.d;
    Ok((lam2.arg(), lam2.norm().ln()))
}

/// Geodesic through two interior points, extended to its ideal endpoints.
/// Ordered so that walking from p towards q heads to the e2 endpoint.
pub fn geodesic_through(p: &PointH3, q: &PointH3) -> Result<GeodesicLine> {
    let dp = q.horiz() - p.horiz();
    let l = dp.norm();
    let sep = dist(p, q);
    if sep < 1e-12 {
        return Err(Error::Invalid("geodesic_through requires distinct points".into()));
    }
    if l < 1e-12 * (p.z + q.z) {
        // Vertical line.
        let foot = IdealPoint::Finite(p.horiz());
        return if q.z > p.z {
            GeodesicLine::new(foot, IdealPoint::Inf)
        } else {
            GeodesicLine::new(IdealPoint::Inf, foot)
        };
    }
    let u = dp / l;
    let t = (l * l + q.z * q.z - p.z * p.z) / (2.0 * l);
    let center = p.horiz() + u * t;
    let rho = (t * t + p.z * p.z).sqrt();
    // Endpoint on the q side is center + ρu.
    GeodesicLine::new(IdealPoint::Finite(center - u * rho), IdealPoint::Finite(center + u * rho))
}

// ---------------------------------------------------------------------------
// geodesic planes and convex hulls

#[derive(Debug, Clone, Copy)]
pub enum PlaneShape {
    Hemisphere { center: C64, radius: f64 },
    /// Vertical plane over the boundary line {point + t·dir}.
    Vertical { point: C64, dir: C64 },
}

/// A totally geodesic plane together with a selected closed half-space.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicPlane {
    pub shape: PlaneShape,
    /// For hemispheres: selected half-space is "under the dome" when false.
    /// For vertical planes: selected side is the left of dir when false.
    pub flip: bool,
}

impl GeodesicPlane {
    /// Signed distance to the plane, positive outside the selected half-space.
    pub fn signed_dist(&self, p: &PointH3) -> f64 {
        let raw = match self.shape {
            PlaneShape::Hemisphere { center, radius } => {
                let dx = p.x - center.re;
                let dy = p.y - center.im;
                let s = (dx * dx + dy * dy + p.z * p.z - radius * radius) / (2.0 * radius * p.z);
                s.asinh()
            }
            PlaneShape::Vertical { point, dir } => {
                let rel = (p.horiz() - point) / dir;
                // Positive on the right of dir.
                (-rel.im / p.z).asinh()
            }
        };
        if self.flip {
            -raw
        } else {
            raw
        }
    }

    /// Distance from the selected half-space: f_α(p) = max(signed, 0).
    pub fn half_space_dist(&self, p: &PointH3) -> f64 {
        self.signed_dist(p).max(0.0)
    }

    /// Whether an ideal point lies in the closure of the selected half-space
    /// (sign of the boundary test, tolerance tol in the plane's scale).
    fn ideal_side(&self, p: &IdealPoint, tol: f64) -> f64 {
        let raw = match (self.shape, p) {
            (PlaneShape::Hemisphere { center, radius }, IdealPoint::Finite(w)) => {
                (w - center).norm() - radius
            }
            (PlaneShape::Hemisphere { .. }, IdealPoint::Inf) => 1.0,
            (PlaneShape::Vertical { point, dir }, IdealPoint::Finite(w)) => {
                let rel = (w - point) / dir;
                -rel.im
            }
            (PlaneShape::Vertical { .. }, IdealPoint::Inf) => 0.0,
        };
        let signed = if self.flip { -raw } else { raw };
        if signed.abs() <= tol {
            0.0
        } else {
            signed
        }
    }
}

/// Klein-ball boundary embedding of an ideal point onto the unit sphere.
fn sphere_point(p: &IdealPoint) -> [f64; 3] {
    match p {
        IdealPoint::Inf => [0.0, 0.0, 1.0],
        IdealPoint::Finite(w) => {
            let n = w.norm_sqr();
            [2.0 * w.re / (n + 1.0), 2.0 * w.im / (n + 1.0), (n - 1.0) / (n + 1.0)]
        }
    }
}

/// Circle or line through three distinct ideal points, as the boundary of a
/// geodesic plane (orientation unset).
fn plane_through(a: &IdealPoint, b: &IdealPoint, c: &IdealPoint) -> Result<PlaneShape> {
    // Put a possible ∞ last.
    let (p, q, r) = match (a, b, c) {
        (IdealPoint::Inf, _, _) => (b, c, a),
        (_, IdealPoint::Inf, _) => (a, c, b),
        _ => (a, b, c),
    };
    let (pw, qw) = match (p, q) {
        (IdealPoint::Finite(pw), IdealPoint::Finite(qw)) => (*pw, *qw),
        _ => return Err(Error::Invalid("two ideal points at infinity".into())),
    };
    if let IdealPoint::Inf = r {
        let d = qw - pw;
        if d.norm() < 1e-14 {
            return Err(Error::Invalid("coincident ideal points".into()));
        }
        return Ok(PlaneShape::Vertical { point: pw, dir: d / d.norm() });
    }
    let rw = match r {
        IdealPoint::Finite(rw) => *rw,
        IdealPoint::Inf => unreachable!(),
    };
    let scale = (qw - pw).norm().max((rw - pw).norm());
    let cross = ((qw - pw).conj() * (rw - pw)).im;
    if cross.abs() < 1e-12 * scale * scale {
        let d = qw - pw;
        return Ok(PlaneShape::Vertical { point: pw, dir: d / d.norm() });
    }
    // Circumcenter of three finite points.
    let d = 2.0 * (pw.re * (qw.im - rw.im) + qw.re * (rw.im - pw.im) + rw.re * (pw.im - qw.im));
    let ux = (pw.norm_sqr() * (qw.im - rw.im)
        + qw.norm_sqr() * (rw.im - pw.im)
        + rw.norm_sqr() * (pw.im - qw.im))
        / d;
    let uy = (pw.norm_sqr() * (rw.re - qw.re)
        + qw.norm_sqr() * (pw.re - rw.re)
        + rw.norm_sqr() * (qw.re - pw.re))
        / d;
    let center = C64::new(ux, uy);
    Ok(PlaneShape::Hemisphere { center, radius: (pw - center).norm() })
}

/// Supporting half-spaces of the convex hull of a set of ideal points,
/// via the Klein-model reduction. Coplanar sets give the two half-spaces
/// bounded by the single plane through them.
pub fn hull_faces(vertices: &[IdealPoint]) -> Result<Vec<GeodesicPlane>> {
    // Deduplicate.
    let mut pts: Vec<IdealPoint> = Vec::new();
    for v in vertices {
        if !pts.iter().any(|p| p.approx_eq(v, 1e-12)) {
            pts.push(*v);
        }
    }
    let n = pts.len();
    if n < 3 {
        return Err(Error::Invalid("hull needs at least 3 distinct ideal points".into()));
    }
    let sph: Vec<[f64; 3]> = pts.iter().map(sphere_point).collect();
    let tol = 1e-10;

    let mut faces: Vec<(GeodesicPlane, [f64; 4])> = Vec::new();
    let push_face = |plane: GeodesicPlane, key: [f64; 4], faces: &mut Vec<(GeodesicPlane, [f64; 4])>| {
        let dup = faces.iter().any(|(_, k)| {
            (k[0] - key[0]).abs() < 1e-7
                && (k[1] - key[1]).abs() < 1e-7
                && (k[2] - key[2]).abs() < 1e-7
                && (k[3] - key[3]).abs() < 1e-7
        });
        if !dup {
            faces.push((plane, key));
        }
    };

    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (a, b, c) = (sph[i], sph[j], sph[k]);
                let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let ac = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let nrm = [
                    ab[1] * ac[2] - ab[2] * ac[1],
                    ab[2] * ac[0] - ab[0] * ac[2],
                    ab[0] * ac[1] - ab[1] * ac[0],
                ];
                let nn = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
                if nn < 1e-12 {
                    continue;
                }
                let nu = [nrm[0] / nn, nrm[1] / nn, nrm[2] / nn];
                let off = nu[0] * a[0] + nu[1] * a[1] + nu[2] * a[2];
                let mut lo = 0.0f64;
                let mut hi = 0.0f64;
                for s in &sph {
                    let d = nu[0] * s[0] + nu[1] * s[1] + nu[2] * s[2] - off;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                let support_pos = lo >= -tol; // all points on the +side
                let support_neg = hi <= tol;
                if !support_pos && !support_neg {
                    continue;
                }
                let shape = plane_through(&pts[i], &pts[j], &pts[k])?;
                // Orient so the hull is inside the selected half-space: find a
                // vertex strictly off the plane and flip towards it.
                let mut base = GeodesicPlane { shape, flip: false };
                let mut witness = 0.0f64;
                for p in &pts {
                    let s = base.ideal_side(p, 1e-9);
                    if s.abs() > witness.abs() {
                        witness = s;
                    }
                }
                if support_pos && support_neg {
                    // All points coplanar: emit both orientations.
                    push_face(base, [nu[0], nu[1], nu[2], off], &mut faces);
                    base.flip = true;
                    push_face(base, [-nu[0], -nu[1], -nu[2], -off], &mut faces);
                } else {
                    if witness > 0.0 {
                        base.flip = true;
                    }
                    let sign = if support_pos { 1.0 } else { -1.0 };
                    push_face(
                        base,
                        [sign * nu[0], sign * nu[1], sign * nu[2], sign * off],
                        &mut faces,
                    );
                }
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::Invalid("degenerate ideal point configuration".into()));
    }
    Ok(faces.into_iter().map(|(p, _)| p).collect())
}

/// Convex-hull gauge G(p) = max over faces of f_α(p); 0 inside the hull.
pub fn hull_gauge(p: &PointH3, faces: &[GeodesicPlane]) -> Result<f64> {
    if faces.is_empty() {
        return Err(Error::Invalid("empty face list".into()));
    }
    Ok(faces
        .iter()
        .map(|f| f.half_space_dist(p))
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// discrete curves

/// Discrete geodesic curvature at interior samples via covariant second
/// differences of the log maps, with arclength normalization.
pub fn polyline_curvature(points: &[PointH3]) -> Result<Vec<f64>> {
    if points.len() < 3 {
        return Err(Error::Invalid("polyline needs at least 3 points".into()));
    }
    for w in points.windows(2) {
        if dist(&w[0], &w[1]) < 1e-14 {
            return Err(Error::Invalid("duplicate consecutive polyline points".into()));
        }
    }
    let mut out = Vec::with_capacity(points.len() - 2);
    for i in 1..points.len() - 1 {
        let p = &points[i];
        let vm = log_map(p, &points[i - 1]);
        let vp = log_map(p, &points[i + 1]);
        let sm = tangent_norm(p, vm);
        let sp = tangent_norm(p, vp);
        // Acceleration of the arclength parametrization.
        let mut acc = [0.0; 3];
        let mut tan = [0.0; 3];
        for k in 0..3 {
            acc[k] = 2.0 * (vp[k] / sp + vm[k] / sm) / (sp + sm);
            tan[k] = (vp[k] - vm[k]) / (sp + sm);
        }
        // Remove the tangential component (metric is conformal: plain dot works).
        let tt = tan[0] * tan[0] + tan[1] * tan[1] + tan[2] * tan[2];
        if tt > 0.0 {
            let at = (acc[0] * tan[0] + acc[1] * tan[1] + acc[2] * tan[2]) / tt;
            for k in 0..3 {
                acc[k] -= at * tan[k];
            }
        }
        out.push(tangent_norm(p, acc));
    }
    Ok(out)
}

/// Geodesic through the two points at maximal pairwise distance, plus the
/// max distance of the samples to it.
pub fn fit_geodesic(points: &[PointH3]) -> Result<(GeodesicLine, f64)> {
    if points.len() < 2 {
        return Err(Error::Invalid("fit_geodesic needs at least 2 points".into()));
    }
    let (mut bi, mut bj, mut bd) = (0, 0, -1.0);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = dist(&points[i], &points[j]);
            if d > bd {
                bd = d;
                bi = i;
                bj = j;
            }
        }
    }
    if bd < 1e-12 {
        return Err(Error::Invalid("all points coincide".into()));
    }
    let line = geodesic_through(&points[bi], &points[bj])?;
    let mut res = 0.0f64;
    for p in points {
        res = res.max(line.dist_to(p)?);
    }
    Ok((line, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dist_basics() {
        let o = PointH3::new(0.0, 0.0, 1.0);
        assert_eq!(dist(&o, &o), 0.0);
        let e = PointH3::new(0.0, 0.0, std::f64::consts::E);
        assert!((dist(&o, &e) - 1.0).abs() < 1e-12);
        // Frozen oracle: numeric geodesic shooting between (1,0,1) and (0,0,1)
        // integrates the metric to acosh(1.5).
        let p = PointH3::new(1.0, 0.0, 1.0);
        assert!((dist(&p, &o) - 1.5f64.acosh()).abs() < 1e-12);
    }

    #[test]
    fn exp_log_roundtrip() {
        let p = PointH3::new(0.3, -1.2, 0.7);
        let v = [0.4, -0.1, 0.25];
        let q = exp_map(&p, v);
        let w = log_map(&p, &q);
        for k in 0..3 {
            assert!((v[k] - w[k]).abs() < 1e-10, "{v:?} vs {w:?}");
        }
        assert!((dist(&p, &q) - tangent_norm(&p, v)).abs() < 1e-12);
    }

    #[test]
    fn mobius_translation_and_inversion() {
        let id = Mobius::identity();
        let p = PointH3::new(3.0, 4.0, 5.0);
        assert_eq!(id.apply_point(&p), p);

        let shift = Mobius {
            a: c(1.0, 0.0),
            b: c(1.0, 0.0),
            c: c(0.0, 0.0),
            d: c(1.0, 0.0),
        };
        let q = shift.apply_point(&PointH3::new(0.0, 0.0, 2.0));
        assert!((q.x - 1.0).abs() < 1e-15 && q.y.abs() < 1e-15 && (q.z - 2.0).abs() < 1e-15);

        let inv = Mobius {
            a: c(0.0, 0.0),
            b: c(1.0, 0.0),
            c: c(1.0, 0.0),
            d: c(0.0, 0.0),
        };
        match inv.apply_ideal(&IdealPoint::finite(2.0, 0.0)) {
            IdealPoint::Finite(w) => assert!((w - c(0.5, 0.0)).norm() < 1e-15),
            _ => panic!("expected finite"),
        }
        let fixed = inv.apply_point(&PointH3::new(0.0, 0.0, 1.0));
        assert!(dist(&fixed, &PointH3::new(0.0, 0.0, 1.0)) < 1e-12);
    }

    #[test]
    fn elliptic_rotation_about_vertical_axis() {
        let axis = GeodesicLine::new(IdealPoint::finite(0.0, 0.0), IdealPoint::Inf).unwrap();
        let rot = elliptic_about_axis(&axis, std::f64::consts::PI).unwrap();
        let q = rot.apply_point(&PointH3::new(1.0, 0.0, 1.0));
        assert!((q.x + 1.0).abs() < 1e-12 && q.y.abs() < 1e-12 && (q.z - 1.0).abs() < 1e-12);

        let axis2 = GeodesicLine::new(IdealPoint::finite(-1.0, 0.0), IdealPoint::finite(1.0, 0.0)).unwrap();
        let rot2 = elliptic_about_axis(&axis2, std::f64::consts::FRAC_PI_2).unwrap();
        let p = PointH3::new(0.0, 0.0, 1.0);
        let q2 = rot2.apply_point(&p);
        let d_before = axis2.dist_to(&p).unwrap();
        let d_after = axis2.dist_to(&q2).unwrap();
        assert!((d_before - d_after).abs() < 1e-8);
    }

    #[test]
    fn cross_ratio_convention_anchor() {
        // cr(0,1,∞,λ) = (λ−1)/λ by the ∞-rule.
        let lam = c(2.5, 0.3);
        let cr = cross_ratio(
            &IdealPoint::finite(0.0, 0.0),
            &IdealPoint::finite(1.0, 0.0),
            &IdealPoint::Inf,
            &IdealPoint::Finite(lam),
        )
        .unwrap();
        assert!((cr - (lam - 1.0) / lam).norm() < 1e-14);
    }

    #[test]
    fn normalize_triple_images() {
        let pts = [
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::finite(2.0, 0.0),
            IdealPoint::finite(3.0, 0.0),
        ];
        let g = normalize_triple(&pts[0], &pts[1], &pts[2]).unwrap();
        assert!(g.apply_ideal(&pts[0]).approx_eq(&IdealPoint::finite(0.0, 0.0), 1e-12));
        assert!(g.apply_ideal(&pts[1]).approx_eq(&IdealPoint::finite(1.0, 0.0), 1e-12));
        assert!(matches!(g.apply_ideal(&pts[2]), IdealPoint::Inf));

        let g2 = normalize_triple(&IdealPoint::Inf, &IdealPoint::finite(0.0, 0.0), &IdealPoint::finite(1.0, 0.0)).unwrap();
        assert!(g2.apply_ideal(&IdealPoint::Inf).approx_eq(&IdealPoint::finite(0.0, 0.0), 1e-12));
        assert!(matches!(g2.apply_ideal(&IdealPoint::finite(1.0, 0.0)), IdealPoint::Inf));
    }

    #[test]
    fn plane_distance_oracles() {
        // Unit hemisphere, point (0,0,2): vertical geodesic arclength ln 2.
        let plane = GeodesicPlane {
            shape: PlaneShape::Hemisphere { center: c(0.0, 0.0), radius: 1.0 },
            flip: false,
        };
        let d = plane.signed_dist(&PointH3::new(0.0, 0.0, 2.0));
        assert!((d - 2.0f64.ln()).abs() < 1e-12);
        // On the plane: zero.
        let on = PointH3::new(0.6, 0.0, 0.8);
        assert!(plane.signed_dist(&on).abs() < 1e-12);
    }

    #[test]
    fn hull_face_counts() {
        let tri = [
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
        ];
        assert_eq!(hull_faces(&tri).unwrap().len(), 2);

        let tetra = [
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
            IdealPoint::finite(0.0, 1.0),
        ];
        assert_eq!(hull_faces(&tetra).unwrap().len(), 4);

        let circ = [
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
            IdealPoint::finite(-1.0, 0.0),
        ];
        assert_eq!(hull_faces(&circ).unwrap().len(), 2);
    }

    #[test]
    fn hull_gauge_properties() {
        let tetra = [
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
            IdealPoint::finite(0.0, 1.0),
        ];
        let faces = hull_faces(&tetra).unwrap();
        // A point well inside the hull.
        let inside = PointH3::new(0.3, 0.3, 1.0);
        assert_eq!(hull_gauge(&inside, &faces).unwrap(), 0.0);
        // Moving away along a geodesic does not decrease the gauge.
        let far = PointH3::new(8.0, -8.0, 1.0);
        let mut prev = 0.0;
        for k in 0..20 {
            let t = k as f64 / 19.0;
            let v = log_map(&inside, &far);
            let p = exp_map(&inside, [v[0] * t, v[1] * t, v[2] * t]);
            let g = hull_gauge(&p, &faces).unwrap();
            assert!(g + 1e-9 >= prev);
            prev = g;
        }
    }

    #[test]
    fn curvature_oracles() {
        // Vertical geodesic: curvature ~ 0.
        let geod: Vec<PointH3> = (0..40)
            .map(|k| PointH3::new(0.0, 0.0, (0.05 * k as f64).exp()))
            .collect();
        for k in polyline_curvature(&geod).unwrap() {
            assert!(k < 1e-8, "geodesic curvature {k}");
        }
        // Horocycle {(t,0,1)}: curvature 1 within O(h²).
        let h = 0.01;
        let horo: Vec<PointH3> = (0..200).map(|k| PointH3::new(h * k as f64, 0.0, 1.0)).collect();
        for k in polyline_curvature(&horo).unwrap() {
            assert!((k - 1.0).abs() < 1e-3, "horocycle curvature {k}");
        }
        // Constant-distance curve from a geodesic: curvature tanh(v0).
        // Fermi coordinates about the vertical axis: the curve at distance v0
        // is (sin a, 0, cos a)·e^t with sin a = tanh v0.
        let v0 = 0.8f64;
        let sa = v0.tanh();
        let ca = (1.0 - sa * sa).sqrt();
        let tube: Vec<PointH3> = (0..200)
            .map(|k| {
                let s = (0.01 * k as f64).exp();
                PointH3::new(sa * s, 0.0, ca * s)
            })
            .collect();
        for k in polyline_curvature(&tube).unwrap() {
            assert!((k - v0.tanh()).abs() < 1e-3, "tube curvature {k} vs {}", v0.tanh());
        }
    }

    #[test]
    fn fit_geodesic_cases() {
        let geod: Vec<PointH3> = (0..10)
            .map(|k| PointH3::new(0.0, 0.0, (0.3 * k as f64).exp()))
            .collect();
        let (_, res) = fit_geodesic(&geod).unwrap();
        assert!(res < 1e-8);

        let two = [PointH3::new(0.0, 0.0, 1.0), PointH3::new(1.0, 1.0, 2.0)];
        let (_, res2) = fit_geodesic(&two).unwrap();
        assert!(res2 < 1e-9);
    }

    #[test]
    fn geodesic_point_parametrization() {
        let line = GeodesicLine::new(IdealPoint::finite(0.0, 0.0), IdealPoint::Inf).unwrap();
        let p = line.point_at(0.0).unwrap();
        let q = line.point_at(1.5).unwrap();
        assert!((dist(&p, &q) - 1.5).abs() < 1e-12);
        assert!(q.z > p.z, "x → +∞ heads to e2 = ∞");

        // Unit speed on a generic line.
        let line2 = GeodesicLine::new(IdealPoint::finite(-2.0, 1.0), IdealPoint::finite(3.0, 0.5)).unwrap();
        let a = line2.point_at(-0.7).unwrap();
        let b = line2.point_at(0.9).unwrap();
        assert!((dist(&a, &b) - 1.6).abs() < 1e-10);
    }
}
