//! Initial map u₀: ℂ → ℍ³ built from the planar harmonic map h, the cusp
//! charts of the straightened and bent polygons, and rotation interpolation
//! across the horizontal charts: on each cusp chart u₀ is an isometric
//! repositioning of h; across each side strip the repositioning rotates about
//! the side axis through a C² angle profile, so the seams close up around the
//! polygon by telescoping.

use crate::error::{Error, Result};
use crate::flow::{DiscreteMap, Grid};
use crate::hyp3::{
    axis_rotation_angle, dist, mink_blend, screw_about_axis, Mobius, PointH3,
};
use crate::planar::{angular_cell, side_geodesics, Cell};
use crate::polygon::TwistedIdealPolygon;
use crate::qd::{
    smoothstep5, smoothstep5_d1, smoothstep5_d2, smoothstep7, smoothstep7_d1, smoothstep7_d2,
    Decomposition,
};
use num_complex::Complex64 as C64;

/// Smoothstep family used by the angle profile: the quintic is the default,
/// the septic (one order smoother) drives the twin-run uniqueness experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileKind {
    #[default]
    Quintic,
    Septic,
}

/// C² interpolation angle profile on [a, b]: θ(x) = 0 for x ≤ a, θ₀ for
/// x ≥ b, a smoothstep in between, with θ′ = θ″ = 0 at both endpoints
/// (quintic: sup|θ′| = (15/8)·θ₀/(b − a)).
#[derive(Debug, Clone, Copy)]
pub struct ThetaProfile {
    pub a: f64,
    pub b: f64,
    pub theta0: f64,
    pub kind: ProfileKind,
}

impl ThetaProfile {
    pub fn new(a: f64, b: f64, theta0: f64) -> Result<Self> {
        Self::with_kind(a, b, theta0, ProfileKind::Quintic)
    }

    pub fn with_kind(a: f64, b: f64, theta0: f64, kind: ProfileKind) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Invalid(format!("empty profile interval [{a}, {b}]")));
        }
        Ok(ThetaProfile { a, b, theta0, kind })
    }

    fn t(&self, x: f64) -> f64 {
        ((x - self.a) / (self.b - self.a)).clamp(0.0, 1.0)
    }

    pub fn theta(&self, x: f64) -> f64 {
        let s = match self.kind {
            ProfileKind::Quintic => smoothstep5(self.t(x)),
            ProfileKind::Septic => smoothstep7(self.t(x)),
        };
        self.theta0 * s
    }

    pub fn dtheta(&self, x: f64) -> f64 {
        let s = match self.kind {
            ProfileKind::Quintic => smoothstep5_d1(self.t(x)),
            ProfileKind::Septic => smoothstep7_d1(self.t(x)),
        };
        self.theta0 * s / (self.b - self.a)
    }

    pub fn ddtheta(&self, x: f64) -> f64 {
        let s = match self.kind {
            ProfileKind::Quintic => smoothstep5_d2(self.t(x)),
            ProfileKind::Septic => smoothstep7_d2(self.t(x)),
        };
        self.theta0 * s / ((self.b - self.a) * (self.b - self.a))
    }
}

/// Local data of the planar map h = (f, 0, g) in the frame where the side is
/// the vertical axis through (0, 0, 1); x-derivatives only — the y-derivatives
/// drop out of the interpolated tension once τ(h) = 0 is substituted.
#[derive(Debug, Clone, Copy)]
pub struct StripSample {
    pub f: f64,
    pub g: f64,
    pub f_x: f64,
    pub g_x: f64,
}

/// Closed-form tension of the rotation-interpolated map
/// u = (f cosθ(x), f sinθ(x), g) assuming (f, 0, g) is harmonic:
///   τ¹ = −f(cosθ·θ′² + sinθ·θ″) + 2 sinθ·θ′·(f g_x/g − f_x)
///   τ² =  f(−sinθ·θ′² + cosθ·θ″) − 2 cosθ·θ′·(f g_x/g − f_x)
///   τ³ =  f²θ′²/g
/// Euclidean coordinate components at u(x, y), flat domain Laplacian.
pub fn interp_tension_closed_form(s: &StripSample, profile: &ThetaProfile, x: f64) -> [f64; 3] {
    let th = profile.theta(x);
    let d1 = profile.dtheta(x);
    let d2 = profile.ddtheta(x);
    let (sin, cos) = th.sin_cos();
    let k = s.f * s.g_x / s.g - s.f_x;
    [
        -s.f * (cos * d1 * d1 + sin * d2) + 2.0 * sin * d1 * k,
        s.f * (-sin * d1 * d1 + cos * d2) - 2.0 * cos * d1 * k,
        s.f * s.f * d1 * d1 / s.g,
    ]
}

/// Which construction produced a node of the initial map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitRegion {
    /// Repositioned h on the cusp chart C_i.
    Cusp(usize),
    /// Rotation-interpolated strip on the horizontal chart H_i.
    Strip(usize),
    /// Angular-profile construction inside the saturation radius.
    Inner,
    /// Radial blend between the inner and chart-based constructions.
    Blend,
}

pub struct InitialMap {
    pub map: DiscreteMap,
    pub labels: Vec<InitRegion>,
    /// Per-side rotation angles β_i with Φ_{i+1} = S_i(β_i, t_i) ∘ Φ_i.
    pub betas: Vec<f64>,
    /// Per-side axis translation lengths t_i of the transitions.
    pub transl: Vec<f64>,
    /// Per-side strip profiles in H_i chart coordinates.
    pub profiles: Vec<ThetaProfile>,
}

/// Per-vertex repositioning isometries Φ_i mapping the cusp chart frame of
/// the straightened polygon onto the bent one: Φ_i = m̂_i⁻¹ ∘ m̃_i with m̃, m̂
/// the cusp charts of p0 and p. Consecutive ones differ by an elliptic about
/// side i of p.
fn repositionings(p0: &TwistedIdealPolygon, p: &TwistedIdealPolygon) -> Result<Vec<Mobius>> {
    (0..p0.n())
        .map(|i| Ok(p.cusp_chart(i)?.inverse().compose(&p0.cusp_chart(i)?)))
        .collect()
}

fn closure_check(r_phi: &Mobius, phi_next: &Mobius) -> Result<()> {
    let probes = [
        PointH3::new(0.0, 0.0, 1.0),
        PointH3::new(1.0, 0.0, 2.0),
        PointH3::new(-1.0, 0.5, 1.0),
    ];
    for pt in &probes {
        let d = dist(&r_phi.apply_point(pt), &phi_next.apply_point(pt));
        if d > 1e-6 {
            return Err(Error::Numerical(format!(
                "seam closure failed: repositionings differ by {d:.3e} beyond an axis rotation"
            )));
        }
    }
    Ok(())
}

/// Assemble u₀ from the converged planar map h (sampled on `grid`, asymptotic
/// to the straightened polygon `p0`) and the bent target polygon `p`.
pub fn build_initial_map(
    h: &DiscreteMap,
    p0: &TwistedIdealPolygon,
    p: &TwistedIdealPolygon,
    decomp: &Decomposition,
    grid: &Grid,
) -> Result<InitialMap> {
    build_initial_map_with(h, p0, p, decomp, grid, ProfileKind::Quintic)
}

/// `build_initial_map` with an explicit smoothstep family for the angle
/// profiles.
pub fn build_initial_map_with(
    h: &DiscreteMap,
    p0: &TwistedIdealPolygon,
    p: &TwistedIdealPolygon,
    decomp: &Decomposition,
    grid: &Grid,
    kind: ProfileKind,
) -> Result<InitialMap> {
    let n = decomp.charts.len() / 2;
    if p0.n() != n || p.n() != n {
        return Err(Error::Invalid(format!(
            "polygon sides ({}, {}) do not match the {} horizontal directions",
            p0.n(),
            p.n(),
            n
        )));
    }
    if !p0.is_planar(1e-9)? {
        return Err(Error::Invalid("initial map requires a straightened source polygon".into()));
    }
    let phis = repositionings(p0, p)?;
    let sides_p = side_geodesics(p)?;

    // Screw parameters about side i of p carrying Φ_i to Φ_{i+1}: rotation
    // β_i plus a translation t_i along the axis. The translation compensates
    // for the horoball-scale drift of the triple-normalised cusp charts
    // (bending does not preserve the side cross-ratio moduli); since it
    // fixes the side geodesic, interpolating it keeps the strip asymptotics.
    let mut betas = Vec::with_capacity(n);
    let mut transl = Vec::with_capacity(n);
    for i in 0..n {
        let t = phis[(i + 1) % n].compose(&phis[i].inverse());
        let (beta, trans) = axis_rotation_angle(&t, &sides_p[i]).map_err(|_| {
            Error::Numerical(format!(
                "horoball inconsistency: transition on side {i} does not fix the side axis"
            ))
        })?;
        let s = screw_about_axis(&sides_p[i], beta, trans)?;
        closure_check(&s.compose(&phis[i]), &phis[(i + 1) % n])?;
        betas.push(beta);
        transl.push(trans);
    }

    // Strip bounds in H_i coordinates: between the leaf base points of the
    // adjacent cusp charts (C_i at large x, C_{i+1} at negative x), shrunk by
    // a 10% margin at each end.
    let mut profiles = Vec::with_capacity(n);
    for i in 0..n {
        let z_hi = decomp.leaf_base_point(2 * i)?;
        let z_lo = decomp.leaf_base_point(2 * ((i + 1) % n))?;
        let x_hi = decomp.chart_coords(2 * i + 1, z_hi)?.0;
        let x_lo = decomp.chart_coords(2 * i + 1, z_lo)?.0;
        if x_lo >= x_hi {
            return Err(Error::Invalid(format!(
                "strip {i} not covered: chart bounds [{x_lo}, {x_hi}]"
            )));
        }
        let m = 0.1 * (x_hi - x_lo);
        profiles.push(ThetaProfile::with_kind(x_lo + m, x_hi - m, 1.0, kind)?);
    }

    let r_sat = (0..2 * n)
        .map(|k| decomp.leaf_base_point(k).map(|z| z.norm()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    // Strip map on H_i: apply the fractional screw S_i(λ)∘Φ_i with
    // λ = 1 − profile(x), so λ = 0 on the C_i end (x large) and 1 on the
    // C_{i+1} end; the angular variant replaces the profile argument by the
    // cell fraction so it stays well-defined near the origin where chart
    // coordinates saturate.
    let screw = |i: usize, lam: f64, hv: &PointH3| -> Result<PointH3> {
        let s = screw_about_axis(&sides_p[i], lam * betas[i], lam * transl[i])?;
        Ok(s.compose(&phis[i]).apply_point(hv))
    };
    let outer = |i: usize, z: C64, hv: &PointH3| -> Result<PointH3> {
        let x = decomp.chart_coords_nudged(2 * i + 1, z)?.0;
        screw(i, 1.0 - profiles[i].theta(x), hv)
    };
    let inner = |i: usize, frac: f64, hv: &PointH3| -> Result<PointH3> {
        screw(i, smoothstep5(frac), hv)
    };

    let mut values = Vec::with_capacity(grid.nx * grid.ny);
    let mut labels = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let z = grid.node(i, j);
            let hv = &h.values[grid.idx(i, j)];
            let cell = angular_cell(decomp, z.arg());
            let (v, l) = match cell {
                Cell::Cusp { index, .. } => (phis[index].apply_point(hv), InitRegion::Cusp(index)),
                Cell::Side { index, frac } => {
                    let r = z.norm();
                    if r <= r_sat {
                        (inner(index, frac, hv)?, InitRegion::Inner)
                    } else if r >= 1.5 * r_sat {
                        (outer(index, z, hv)?, InitRegion::Strip(index))
                    } else {
                        let w = smoothstep5((r - r_sat) / (0.5 * r_sat));
                        let a = inner(index, frac, hv)?;
                        let b = outer(index, z, hv)?;
                        (mink_blend(&[a, b], &[1.0 - w, w]), InitRegion::Blend)
                    }
                }
            };
            values.push(v);
            labels.push(l);
        }
    }
    Ok(InitialMap { map: DiscreteMap { values }, labels, betas, transl, profiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{energy_density, tension_field, DiscreteMap, Grid};
    use crate::hyp3::{elliptic_about_axis, GeodesicLine, IdealPoint};
    use crate::planar::build_planar_initial;
    use crate::qd::{decompose, PolyQD};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn theta_profile_endpoint_conditions() {
        let p = ThetaProfile::new(-0.5, 1.5, 1.2).unwrap();
        assert_eq!(p.theta(-0.5), 0.0);
        assert_eq!(p.theta(-2.0), 0.0);
        assert_eq!(p.theta(1.5), 1.2);
        assert_eq!(p.theta(9.0), 1.2);
        assert!((p.theta(0.5) - 0.6).abs() < 1e-14, "midpoint symmetry");
        for x in [-0.5, 1.5] {
            assert_eq!(p.dtheta(x), 0.0);
            assert_eq!(p.ddtheta(x), 0.0);
        }
        // sup|θ′| = (15/8)·θ₀/(b−a) at the midpoint.
        let sup = (0..=400).map(|k| p.dtheta(-0.5 + 2.0 * k as f64 / 400.0).abs()).fold(0.0, f64::max);
        assert!((sup - 15.0 / 8.0 * 1.2 / 2.0).abs() < 1e-12, "sup {sup}");
        assert!(ThetaProfile::new(1.0, 1.0, 0.3).is_err());
        let z = ThetaProfile::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(z.theta(0.3), 0.0);
    }

    #[test]
    fn closed_form_tension_trivial_cases() {
        let pr = ThetaProfile::new(-1.0, 1.0, 0.7).unwrap();
        let s = StripSample { f: 0.4, g: 0.9, f_x: 0.2, g_x: -0.1 };
        // Outside the profile support θ′ = θ″ = 0: harmonic pieces.
        for x in [-3.0, 5.0] {
            assert_eq!(interp_tension_closed_form(&s, &pr, x), [0.0; 3]);
        }
        // f = f_x = 0: the map sits on the axis, rotation does nothing.
        let s0 = StripSample { f: 0.0, g: 1.0, f_x: 0.0, g_x: 0.3 };
        let t = interp_tension_closed_form(&s0, &pr, 0.2);
        assert_eq!(t, [0.0; 3]);
    }

    /// Analytic harmonic strip h(x, y) = (tanh cx, 0, sech cx): the geodesic
    /// semicircle of radius 1 traversed at speed c.
    fn geodesic_strip(cc: f64, x: f64) -> StripSample {
        let (t, s) = ((cc * x).tanh(), 1.0 / (cc * x).cosh());
        StripSample { f: t, g: s, f_x: cc * s * s, g_x: -cc * s * t }
    }

    #[test]
    fn rotated_point_matches_strip_formula() {
        // Elliptic about the vertical axis applied to (f, 0, g) must equal
        // (f cosθ, f sinθ, g): the h3 formula and the isometry machinery agree.
        let axis =
            GeodesicLine::new(IdealPoint::finite(0.0, 0.0), IdealPoint::Inf).unwrap();
        let pr = ThetaProfile::new(-0.5, 0.5, PI / 2.0).unwrap();
        for x in [-0.4, -0.1, 0.0, 0.2, 0.45] {
            let s = geodesic_strip(0.8, x);
            let th = pr.theta(x);
            let u = elliptic_about_axis(&axis, th)
                .unwrap()
                .apply_point(&PointH3::new(s.f, 0.0, s.g));
            assert!((u.x - s.f * th.cos()).abs() < 1e-12);
            assert!((u.y - s.f * th.sin()).abs() < 1e-12);
            assert!((u.z - s.g).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_tension_matches_closed_form() {
        // Interpolated map on the analytic strip: the discrete tension must
        // converge to the closed form at second order.
        let cc = 0.8;
        let pr = ThetaProfile::new(-0.5, 0.5, 1.2).unwrap();
        let err_at = |nn: usize| -> f64 {
            let g = Grid::centered_square(nn, 1.0, |_| 1.0).unwrap();
            let m = DiscreteMap::sample(&g, |z| {
                let s = geodesic_strip(cc, z.re);
                let th = pr.theta(z.re);
                PointH3::new(s.f * th.cos(), s.f * th.sin(), s.g)
            });
            let tau = tension_field(&g, &m);
            let mut worst = 0.0f64;
            for j in 1..g.ny - 1 {
                for i in 1..g.nx - 1 {
                    let x = g.x(i);
                    // The quintic profile is only C²: θ‴ jumps at the strip
                    // edges and the stencil is locally first-order there, so
                    // measure the order away from the kinks.
                    if (x.abs() - 0.5).abs() < 0.1 {
                        continue;
                    }
                    let exact = interp_tension_closed_form(&geodesic_strip(cc, x), &pr, x);
                    let got = tau[g.idx(i, j)];
                    for k in 0..3 {
                        worst = worst.max((got[k] - exact[k]).abs());
                    }
                }
            }
            worst
        };
        let e1 = err_at(33);
        let e2 = err_at(65);
        let order = (e1 / e2).log2();
        assert!(e1 < 0.1, "coarse error {e1}");
        assert!(order > 1.85, "order {order} (errors {e1:.3e}, {e2:.3e})");
    }

    #[test]
    fn strip_energy_density_splits() {
        // e(u₀) = e(h) + f²θ′²/g² pointwise within O(h²); here e(h) = c².
        let cc = 0.8;
        let pr = ThetaProfile::new(-0.5, 0.5, 1.2).unwrap();
        let err_at = |nn: usize| -> f64 {
            let g = Grid::centered_square(nn, 1.0, |_| 1.0).unwrap();
            let m = DiscreteMap::sample(&g, |z| {
                let s = geodesic_strip(cc, z.re);
                let th = pr.theta(z.re);
                PointH3::new(s.f * th.cos(), s.f * th.sin(), s.g)
            });
            let e = energy_density(&g, &m);
            let mut worst = 0.0f64;
            for j in 1..g.ny - 1 {
                for i in 1..g.nx - 1 {
                    let x = g.x(i);
                    let s = geodesic_strip(cc, x);
                    let d1 = pr.dtheta(x);
                    let expected = cc * cc + s.f * s.f * d1 * d1 / (s.g * s.g);
                    worst = worst.max((e[g.idx(i, j)] - expected).abs());
                }
            }
            worst
        };
        let e1 = err_at(33);
        let e2 = err_at(65);
        assert!(e2 < 0.02, "fine error {e2}");
        assert!((e1 / e2).log2() > 1.85, "order {}", (e1 / e2).log2());
    }

    fn square_setup() -> (TwistedIdealPolygon, Decomposition, Grid) {
        // Degree-2 differential with 4 horizontal rays along the axes.
        let q = PolyQD::new(vec![c(-0.002, 0.0), c(0.0, 0.0), c(0.05, 0.0)]).unwrap();
        let d = decompose(q, 2.0).unwrap();
        let grid = Grid::centered_square(41, 8.0, |_| 1.0).unwrap();
        let p0 = TwistedIdealPolygon::new(vec![
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
            IdealPoint::finite(-1.0, 0.0),
        ])
        .unwrap();
        (p0, d, grid)
    }

    #[test]
    fn zero_bending_reproduces_h() {
        let (p0, d, grid) = square_setup();
        let h = build_planar_initial(&p0, &d, &grid).unwrap().map;
        let u0 = build_initial_map(&h, &p0, &p0, &d, &grid).unwrap();
        for (b, pr) in u0.betas.iter().zip(&u0.profiles) {
            assert!(b.abs() < 1e-9, "beta {b}");
            assert!(pr.a < pr.b);
        }
        let worst = h
            .values
            .iter()
            .zip(&u0.map.values)
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "u0 differs from h by {worst}");
    }

    #[test]
    fn bent_square_is_continuous_and_nonplanar() {
        let (p0, d, grid) = square_setup();
        let bd = crate::polygon::BendingData { thetas: vec![PI / 2.0] };
        let p = crate::polygon::bend(&p0, &bd).unwrap();
        let h = build_planar_initial(&p0, &d, &grid).unwrap().map;
        let u0 = build_initial_map(&h, &p0, &p, &d, &grid).unwrap();
        // Actually twisted: some node leaves the plane.
        let ymax = u0.map.values.iter().map(|v| v.y.abs()).fold(0.0, f64::max);
        assert!(ymax > 0.1, "bent initial map stayed planar ({ymax})");
        // Continuity: neighbor jumps comparable with those of h itself.
        let jump = |m: &DiscreteMap| -> f64 {
            let mut worst = 0.0f64;
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let cdx = grid.idx(i, j);
                    if i + 1 < grid.nx {
                        worst = worst.max(dist(&m.values[cdx], &m.values[cdx + 1]));
                    }
                    if j + 1 < grid.ny {
                        worst = worst.max(dist(&m.values[cdx], &m.values[cdx + grid.nx]));
                    }
                }
            }
            worst
        };
        let jh = jump(&h);
        let ju = jump(&u0.map);
        assert!(ju < 3.0 * jh + 0.5, "seam jump {ju} vs h jump {jh}");
        // Cusp sectors carry the pure repositioning label.
        let far = grid.idx(grid.nx - 1, grid.ny / 2);
        assert!(matches!(u0.labels[far], InitRegion::Cusp(0) | InitRegion::Strip(_)));
    }
}
