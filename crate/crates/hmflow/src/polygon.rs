//! Twisted ideal polygons in ∂ℍ³, their Möbius-invariant diagonal
//! parameters, straightening to a planar (real) polygon plus bending data,
//! the inverse bending construction, the bending cocycle of the associated
//! pleated plane, and cusp charts at the vertices.
//!
//! Conventions: the fan triangulation from vertex 0 has triangles
//! T_k = (ξ_0, ξ_k, ξ_{k+1}) for k = 1..n−2 and diagonals (ξ_0, ξ_j) for
//! j = 2..n−2; T_1 is the base region. The parameter of diagonal j is
//! c_j = −g(ξ_{j−1})/g(ξ_{j+1}) where g sends (ξ_0, ξ_j) to (0, ∞); the
//! polygon is planar (conjugate into ∂ℍ² = R̂, correctly ordered) exactly
//! when every c_j is real and positive.

use crate::error::{Error, Result};
use crate::hyp3::{
    elliptic_about_axis, normalize_pair, normalize_triple, GeodesicLine, IdealPoint, Mobius,
    PointH3,
};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct TwistedIdealPolygon {
    pub vertices: Vec<IdealPoint>,
}

/// Bending angles θ_j ∈ (−π, π] along the diagonals (ξ_0, ξ_j), j = 2..n−2.
#[derive(Debug, Clone, PartialEq)]
pub struct BendingData {
    pub thetas: Vec<f64>,
}

impl TwistedIdealPolygon {
    pub fn new(vertices: Vec<IdealPoint>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Invalid("an ideal polygon needs at least 3 vertices".into()));
        }
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                if vertices[i].approx_eq(&vertices[j], 1e-12) {
                    return Err(Error::Invalid(format!("vertices {i} and {j} coincide")));
                }
            }
        }
        Ok(TwistedIdealPolygon { vertices })
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: isize) -> &IdealPoint {
        let n = self.vertices.len() as isize;
        &self.vertices[i.rem_euclid(n) as usize]
    }

    /// Diagonal parameters c_2, …, c_{n−2} (Möbius invariant).
    pub fn to_params(&self) -> Result<Vec<C64>> {
        let n = self.n();
        let mut out = Vec::with_capacity(n - 3);
        for j in 2..=(n - 2) {
            let g = normalize_pair(&self.vertices[0], &self.vertices[j])?;
            let a = finite(&g.apply_ideal(&self.vertices[j - 1]))?;
            let b = finite(&g.apply_ideal(&self.vertices[j + 1]))?;
            if b.norm() < 1e-150 {
                return Err(Error::Invalid("degenerate diagonal parameter".into()));
            }
            out.push(-a / b);
        }
        Ok(out)
    }

    /// Rebuild a polygon in normalized position (ξ_0, ξ_1, ξ_2) = (0, 1, ∞)
    /// from its diagonal parameters.
    pub fn from_params(params: &[C64]) -> Result<Self> {
        if params.iter().any(|c| c.norm() < 1e-150 || !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Invalid("diagonal parameters must be finite and nonzero".into()));
        }
        let mut vertices = vec![
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
        ];
        for (idx, c) in params.iter().enumerate() {
            let j = idx + 2;
            let g = normalize_pair(&vertices[0], &vertices[j])?;
            let a = finite(&g.apply_ideal(&vertices[j - 1]))?;
            let b = -a / c;
            vertices.push(g.inverse().apply_ideal(&IdealPoint::Finite(b)));
        }
        TwistedIdealPolygon::new(vertices)
    }

    /// All diagonal parameters real and positive.
    pub fn is_planar(&self, tol: f64) -> Result<bool> {
        Ok(self
            .to_params()?
            .iter()
            .all(|c| c.re > 0.0 && c.im.abs() <= tol * c.norm()))
    }

    /// Straightened polygon (same |c_j|, in normalized position) and the
    /// bending angles θ_j = arg c_j.
    pub fn straighten(&self) -> Result<(TwistedIdealPolygon, BendingData)> {
        let params = self.to_params()?;
        let flat: Vec<C64> = params.iter().map(|c| C64::new(c.norm(), 0.0)).collect();
        let thetas = params.iter().map(|c| c.arg()).collect();
        Ok((TwistedIdealPolygon::from_params(&flat)?, BendingData { thetas }))
    }

    /// Apply the transformation sending (ξ_0, ξ_1, ξ_2) to (0, 1, ∞).
    pub fn normalized(&self) -> Result<(TwistedIdealPolygon, Mobius)> {
        let g = normalize_triple(&self.vertices[0], &self.vertices[1], &self.vertices[2])?;
        let vertices = self.vertices.iter().map(|v| g.apply_ideal(v)).collect();
        Ok((TwistedIdealPolygon::new(vertices)?, g))
    }

    /// Cusp chart at vertex i: sends (ξ_{i−1}, ξ_{i+1}, ξ_i) to (0, 1, ∞).
    pub fn cusp_chart(&self, i: usize) -> Result<Mobius> {
        let i = i as isize;
        normalize_triple(self.vertex(i - 1), self.vertex(i + 1), self.vertex(i))
    }

    /// Diagonal axes (ξ_0, ξ_j) for j = 2..n−2.
    pub fn diagonal_axes(&self) -> Result<Vec<GeodesicLine>> {
        (2..=self.n() - 2)
            .map(|j| GeodesicLine::new(self.vertices[0].clone(), self.vertices[j].clone()))
            .collect()
    }
}

fn finite(p: &IdealPoint) -> Result<C64> {
    match p {
        IdealPoint::Finite(v) => Ok(*v),
        IdealPoint::Inf => Err(Error::Invalid("unexpected ideal point at infinity".into())),
    }
}

/// Bending elliptics of a straightened polygon: e_j rotates by −θ_j about
/// the diagonal (ξ_0, ξ_j).
fn bending_elliptics(flat: &TwistedIdealPolygon, bend_data: &BendingData) -> Result<Vec<Mobius>> {
    let n = flat.n();
    if bend_data.thetas.len() != n - 3 {
        return Err(Error::Invalid(format!(
            "expected {} bending angles for an {n}-gon, got {}",
            n - 3,
            bend_data.thetas.len()
        )));
    }
    if bend_data.thetas.iter().any(|t| !(*t > -PI - 1e-12 && *t <= PI + 1e-12)) {
        return Err(Error::Invalid("bending angles must lie in (−π, π]".into()));
    }
    let axes = flat.diagonal_axes()?;
    axes.iter()
        .zip(&bend_data.thetas)
        .map(|(axis, th)| elliptic_about_axis(axis, -th))
        .collect()
}

/// Rebuild the twisted polygon from a straightened one and bending angles:
/// ξ_k = (e_2 ∘ … ∘ e_{k−1})(ξ_k^flat). Inverse of straighten, up to a
/// global Möbius transformation (exact in normalized position).
pub fn bend(flat: &TwistedIdealPolygon, bend_data: &BendingData) -> Result<TwistedIdealPolygon> {
    let ell = bending_elliptics(flat, bend_data)?;
    let n = flat.n();
    let mut vertices = flat.vertices[..3].to_vec();
    let mut acc = Mobius::identity();
    for k in 3..n {
        // Extend the composition by e_{k−1}.
        acc = acc.compose(&ell[k - 3]);
        vertices.push(acc.apply_ideal(&flat.vertices[k]));
    }
    TwistedIdealPolygon::new(vertices)
}

/// Interior point of the ideal triangle (a, b, c): pullback of the incenter
/// of (0, 1, ∞).
pub fn triangle_incenter(a: &IdealPoint, b: &IdealPoint, c: &IdealPoint) -> Result<PointH3> {
    let g = normalize_triple(a, b, c)?;
    Ok(g.inverse().apply_point(&PointH3::new(0.5, 0.0, 3f64.sqrt() / 2.0)))
}

/// Bending cocycle of the pleated plane over a straightened polygon.
///
/// Points of the abstract pleated surface are points of the vertical plane
/// {y = 0} ⊂ ℍ³ (the plane containing the straightened polygon). B(p, q) is
/// the ordered product of bending elliptics for the diagonals crossed by the
/// geodesic segment p → q, signed by the crossing direction, so that for q
/// in triangle T_k and p in the base region, B(p, q) = e_2 ∘ e_3 ∘ … ∘ e_k.
pub struct BendingCocycle {
    flat: TwistedIdealPolygon,
    elliptics: Vec<Mobius>,
    /// (diagonal endpoint ξ_j as a real number or None for ∞,
    ///  side of the base region).
    diagonals: Vec<(Option<f64>, f64)>,
}

impl BendingCocycle {
    pub fn new(flat: &TwistedIdealPolygon, bend_data: &BendingData) -> Result<Self> {
        if !flat.is_planar(1e-9)? {
            return Err(Error::Invalid("bending cocycle requires a straightened polygon".into()));
        }
        let (flat, _) = flat.normalized()?;
        let elliptics = bending_elliptics(&flat, bend_data)?;
        // Base region reference: interior of T_1 = (ξ_0, ξ_1, ξ_2).
        let base = triangle_incenter(&flat.vertices[0], &flat.vertices[1], &flat.vertices[2])?;
        let mut diagonals = Vec::new();
        for j in 2..=(flat.n() - 2) {
            let end = match flat.vertices[j] {
                IdealPoint::Finite(v) => Some(v.re),
                IdealPoint::Inf => None,
            };
            let s = side(end, &base);
            if s == 0.0 {
                return Err(Error::Numerical("base region touches a diagonal".into()));
            }
            diagonals.push((end, s));
        }
        Ok(BendingCocycle { flat, elliptics, diagonals })
    }

    pub fn polygon(&self) -> &TwistedIdealPolygon {
        &self.flat
    }

    /// Interior point of triangle T_k = (ξ_0, ξ_k, ξ_{k+1}), k = 1..n−2.
    pub fn region_point(&self, k: usize) -> Result<PointH3> {
        if !(1..=self.flat.n() - 2).contains(&k) {
            return Err(Error::Invalid("region index out of range".into()));
        }
        triangle_incenter(&self.flat.vertices[0], &self.flat.vertices[k], &self.flat.vertices[k + 1])
    }

    /// B(p, q) for points p, q of the plane {y = 0} off the diagonals.
    pub fn transform(&self, p: &PointH3, q: &PointH3) -> Result<Mobius> {
        let v = crate::hyp3::log_map(p, q);
        let gamma = |t: f64| crate::hyp3::exp_map(p, [v[0] * t, v[1] * t, v[2] * t]);
        // Each diagonal is a complete geodesic: the segment crosses it at most
        // once, exactly when the endpoints lie on opposite sides.
        let mut crossings: Vec<(f64, usize, f64)> = Vec::new();
        for (idx, (end, base_side)) in self.diagonals.iter().enumerate() {
            let sp = side(*end, p);
            let sq = side(*end, q);
            if sp == 0.0 || sq == 0.0 {
                return Err(Error::Numerical("cocycle endpoint lies on a diagonal".into()));
            }
            if sp == sq {
                continue;
            }
            // Bisect for the crossing parameter.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if side(*end, &gamma(mid)) == sp {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // +1 when leaving the base-region side of this diagonal.
            let dir = if sp == *base_side { 1.0 } else { -1.0 };
            crossings.push((0.5 * (lo + hi), idx, dir));
        }
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut acc = Mobius::identity();
        for (_, idx, dir) in crossings {
            let e = if dir > 0.0 {
                self.elliptics[idx].clone()
            } else {
                self.elliptics[idx].inverse()
            };
            acc = acc.compose(&e);
        }
        Ok(acc)
    }
}

/// Side (±1) of the diagonal (0, end) for a point of the plane {y = 0};
/// end = None encodes the vertical diagonal (0, ∞).
fn side(end: Option<f64>, p: &PointH3) -> f64 {
    let v = match end {
        None => p.x,
        Some(e) => p.x * p.x + p.z * p.z - e * p.x,
    };
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}
