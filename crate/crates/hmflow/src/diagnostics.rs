//! Measurements on flow states: Hopf differential extraction and polynomial
//! fitting, principal-part comparison, the pleated field Ξ and the distance
//! Ψ, convex-hull gauge, side asymptotics on far leaves, exponential decay
//! fits, and report assembly.

use crate::error::{Error, Result};
use crate::flow::{DiscreteMap, Grid};
use crate::hyp3::{
    dist, fit_geodesic, hull_gauge, mink_blend, polyline_curvature, GeodesicPlane, GeodesicLine,
    PointH3,
};
use crate::polygon::BendingCocycle;
use crate::qd::{Decomposition, PolyQD, PrincipalPart};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Hopf differential

pub struct HopfField {
    /// φ = ⟨u_z, u_z⟩ per node (None on the boundary ring).
    pub phi: Vec<Option<C64>>,
    /// |∂̄φ| by central differences (None where the stencil is incomplete).
    pub dbar: Vec<Option<f64>>,
    /// Least-squares polynomial fit over the trusted annulus.
    pub fit: Vec<C64>,
    /// ‖fit − φ‖₂ / ‖φ‖₂ over the annulus.
    pub fit_rel_residual: f64,
    /// Node indices used for the fit.
    pub annulus: Vec<usize>,
}

/// φ and its ∂̄ residual from the map: u_z = ½(∂_x − i∂_y)u componentwise,
/// φ = (a² + b² + c²)/(u³)² with the hyperbolic conformal factor.
pub fn hopf_phi(grid: &Grid, map: &DiscreteMap) -> (Vec<Option<C64>>, Vec<Option<f64>>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let v = &map.values;
    let mut phi: Vec<Option<C64>> = vec![None; nx * ny];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = grid.idx(i, j);
            let dz = |f: &dyn Fn(&PointH3) -> f64| -> C64 {
                let fx = (f(&v[c + 1]) - f(&v[c - 1])) / (2.0 * grid.hx);
                let fy = (f(&v[c + nx]) - f(&v[c - nx])) / (2.0 * grid.hy);
                0.5 * C64::new(fx, -fy)
            };
            let a = dz(&|p| p.x);
            let b = dz(&|p| p.y);
            let d = dz(&|p| p.z);
            let z = v[c].z;
            phi[c] = Some((a * a + b * b + d * d) / (z * z));
        }
    }
    let mut dbar: Vec<Option<f64>> = vec![None; nx * ny];
    for j in 2..ny - 2 {
        for i in 2..nx - 2 {
            let c = grid.idx(i, j);
            if let (Some(pe), Some(pw), Some(pn), Some(ps)) =
                (phi[c + 1], phi[c - 1], phi[c + nx], phi[c - nx])
            {
                let px = (pe - pw) / (2.0 * grid.hx);
                let py = (pn - ps) / (2.0 * grid.hy);
                dbar[c] = Some((0.5 * (px + C64::i() * py)).norm());
            }
        }
    }
    (phi, dbar)
}

/// Trusted fit annulus: interior nodes within 85% of the grid half-extent,
/// excluding disks of radius 2ε around the prescribed zeros.
pub fn trusted_annulus(grid: &Grid, zeros: &[C64], eps: f64) -> Vec<usize> {
    let half_extent = (-grid.x0)
        .min(grid.x(grid.nx - 1))
        .min(-grid.y0)
        .min(grid.y(grid.ny - 1));
    let rmax = 0.85 * half_extent;
    let mut nodes = Vec::new();
    for j in 2..grid.ny - 2 {
        for i in 2..grid.nx - 2 {
            let z = grid.node(i, j);
            if z.norm() > rmax {
                continue;
            }
            if zeros.iter().any(|z0| (z - z0).norm() <= 2.0 * eps) {
                continue;
            }
            nodes.push(grid.idx(i, j));
        }
    }
    nodes
}

/// Least-squares fit of φ on the given nodes by a polynomial of degree `deg`
/// (complex normal equations, Gaussian elimination with partial pivoting).
pub fn fit_polynomial(
    grid: &Grid,
    phi: &[Option<C64>],
    deg: usize,
    nodes: &[usize],
) -> Result<(Vec<C64>, f64)> {
    let m = deg + 1;
    let mut samples = Vec::new();
    for &c in nodes {
        if let Some(p) = phi[c] {
            let z = grid.node(c % grid.nx, c / grid.nx);
            samples.push((z, p));
        }
    }
    if samples.len() < 4 * m {
        return Err(Error::Invalid(format!(
            "fit annulus too small: {} samples for degree {deg}",
            samples.len()
        )));
    }
    // Normal equations A c = b with A = V^H V, b = V^H φ.
    let mut a = vec![vec![C64::new(0.0, 0.0); m]; m];
    let mut b = vec![C64::new(0.0, 0.0); m];
    for &(z, p) in &samples {
        let mut pw = vec![C64::new(1.0, 0.0); m];
        for k in 1..m {
            pw[k] = pw[k - 1] * z;
        }
        for r in 0..m {
            b[r] += pw[r].conj() * p;
            for s in 0..m {
                a[r][s] += pw[r].conj() * pw[s];
            }
        }
    }
    let c = solve_complex(&mut a, &mut b)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(z, p) in &samples {
        let mut fit = C64::new(0.0, 0.0);
        let mut pw = C64::new(1.0, 0.0);
        for ck in &c {
            fit += ck * pw;
            pw *= z;
        }
        num += (fit - p).norm_sqr();
        den += p.norm_sqr();
    }
    Ok((c, (num / den.max(1e-300)).sqrt()))
}

fn solve_complex(a: &mut [Vec<C64>], b: &mut [C64]) -> Result<Vec<C64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].norm().partial_cmp(&a[s][col].norm()).unwrap())
            .unwrap();
        if a[piv][col].norm() < 1e-300 {
            return Err(Error::Numerical("singular normal equations in polynomial fit".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for s in col..n {
                let sub = f * a[col][s];
                a[r][s] -= sub;
            }
            let sub = f * b[col];
            b[r] -= sub;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for s in r + 1..n {
            acc -= a[r][s] * x[s];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

/// Full Hopf pipeline: φ, ∂̄ residual, and degree-`deg` fit over the trusted
/// annulus away from the boundary (15% margin) and the 2ε zero disks.
pub fn hopf_field(
    grid: &Grid,
    map: &DiscreteMap,
    deg: usize,
    zeros: &[C64],
    eps: f64,
) -> Result<HopfField> {
    let (phi, dbar) = hopf_phi(grid, map);
    let annulus = trusted_annulus(grid, zeros, eps);
    let (fit, fit_rel_residual) = fit_polynomial(grid, &phi, deg, &annulus)?;
    Ok(HopfField { phi, dbar, fit, fit_rel_residual, annulus })
}

/// Principal part of the fitted polynomial.
pub fn pp_of_fit(hf: &HopfField) -> Result<PrincipalPart> {
    Ok(PolyQD::new(hf.fit.clone())?.principal_part())
}

/// Coefficient-wise distance up to the global sign of √q.
pub fn pp_compare(a: &PrincipalPart, b: &PrincipalPart) -> f64 {
    a.distance(b)
}

// ---------------------------------------------------------------------------
// Pleated field and Ψ

pub struct PleatedField {
    pub values: Vec<PointH3>,
    /// Nodes whose h-image lies within ε of a diagonal: Ξ uses the
    /// nearest-region value there and the node is excluded from Ψ sups.
    pub flagged: Vec<bool>,
    pub n_flagged: usize,
}

/// Ξ = B(x₀, h(x)) ∘ h(x) with x₀ in the base region T₁; `h` must live in
/// the plane {y = 0} of the cocycle's normalised polygon.
pub fn pleated_field(
    h: &DiscreteMap,
    cocycle: &BendingCocycle,
    eps: f64,
) -> Result<PleatedField> {
    let x0 = cocycle.region_point(1)?;
    let diagonals = cocycle.polygon().diagonal_axes()?;
    let mut values = Vec::with_capacity(h.values.len());
    let mut flagged = vec![false; h.values.len()];
    let mut n_flagged = 0;
    for (idx, hp) in h.values.iter().enumerate() {
        let mut q = *hp;
        let mut near = false;
        for dgn in &diagonals {
            if dgn.dist_to(hp)? < eps {
                near = true;
                break;
            }
        }
        if near {
            // Nearest-region value: query the cocycle slightly towards the
            // base point so the crossing count is unambiguous.
            q = mink_blend(&[x0, *hp], &[0.02, 0.98]);
            flagged[idx] = true;
            n_flagged += 1;
        }
        let b = cocycle.transform(&x0, &q)?;
        values.push(b.apply_point(hp));
    }
    Ok(PleatedField { values, flagged, n_flagged })
}

/// sup over unflagged nodes of Ψ(x) = dist(u(x), Ξ(x)).
pub fn psi_sup(u: &DiscreteMap, pleated: &PleatedField) -> f64 {
    u.values
        .iter()
        .zip(&pleated.values)
        .zip(&pleated.flagged)
        .filter(|(_, &f)| !f)
        .map(|((a, b), _)| dist(a, b))
        .fold(0.0, f64::max)
}

/// sup over nodes of the convex-hull gauge G(x) = hull distance of u(x).
pub fn gauge_sup(u: &DiscreteMap, faces: &[GeodesicPlane]) -> Result<f64> {
    let mut sup = 0.0f64;
    for p in &u.values {
        sup = sup.max(hull_gauge(p, faces)?);
    }
    Ok(sup)
}

// ---------------------------------------------------------------------------
// Side asymptotics

/// Bilinear sample of the map at z (Minkowski blend of the cell corners);
/// None outside the grid.
pub fn sample_map_at(grid: &Grid, map: &DiscreteMap, z: C64) -> Option<PointH3> {
    let fx = (z.re - grid.x0) / grid.hx;
    let fy = (z.im - grid.y0) / grid.hy;
    if fx < 0.0 || fy < 0.0 || fx > (grid.nx - 1) as f64 || fy > (grid.ny - 1) as f64 {
        return None;
    }
    let i = (fx.floor() as usize).min(grid.nx - 2);
    let j = (fy.floor() as usize).min(grid.ny - 2);
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let c = grid.idx(i, j);
    let pts = [
        map.values[c],
        map.values[c + 1],
        map.values[c + grid.nx],
        map.values[c + grid.nx + 1],
    ];
    let w = [
        (1.0 - tx) * (1.0 - ty),
        tx * (1.0 - ty),
        (1.0 - tx) * ty,
        tx * ty,
    ];
    Some(mink_blend(&pts, &w))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SideReport {
    pub side: usize,
    pub leaf_height: f64,
    pub n_points: usize,
    pub max_curvature: f64,
    pub geodesic_fit_residual: f64,
    pub side_residual: f64,
}

/// For each horizontal chart, trace the image of the leaf {Im η = leaf_height
/// above the chart base} and measure its curvature, its best-geodesic
/// residual, and its distance from the matching polygon side.
pub fn side_asymptotics(
    grid: &Grid,
    map: &DiscreteMap,
    sides: &[GeodesicLine],
    decomp: &Decomposition,
    leaf_height: f64,
    samples: usize,
) -> Result<Vec<SideReport>> {
    let n = decomp.charts.len() / 2;
    if sides.len() != n {
        return Err(Error::Invalid("side count does not match the decomposition".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let z_hi = decomp.leaf_base_point(2 * i)?;
        let z_lo = decomp.leaf_base_point(2 * ((i + 1) % n))?;
        let x_hi = decomp.chart_coords(2 * i + 1, z_hi)?.0;
        let x_lo = decomp.chart_coords(2 * i + 1, z_lo)?.0;
        let m = 0.2 * (x_hi - x_lo);
        let (a, b) = (x_lo + m, x_hi - m);
        let mut pts = Vec::new();
        for k in 0..samples {
            let x = a + (b - a) * k as f64 / (samples - 1) as f64;
            let z = match decomp.from_chart(2 * i + 1, x, leaf_height) {
                Ok(z) => z,
                Err(_) => continue,
            };
            if let Some(p) = sample_map_at(grid, map, z) {
                pts.push(p);
            }
        }
        if pts.len() < 5 {
            return Err(Error::Invalid(format!(
                "leaf for side {i} at height {leaf_height} leaves the grid ({} points)",
                pts.len()
            )));
        }
        let curv = polyline_curvature(&pts)?;
        let (_, fit_res) = fit_geodesic(&pts)?;
        let side_res = pts
            .iter()
            .map(|p| sides[i].dist_to(p))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(SideReport {
            side: i,
            leaf_height,
            n_points: pts.len(),
            max_curvature: curv.into_iter().fold(0.0, f64::max),
            geodesic_fit_residual: fit_res,
            side_residual: side_res,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Decay fits

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub n: usize,
}

/// Linear fit of ln(value) against distance; nonpositive values are dropped,
/// at least 10 must survive.
pub fn decay_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|(_, v)| *v > 0.0).map(|&(d, v)| (d, v.ln())).collect();
    let n = pts.len();
    if n < 10 {
        return Err(Error::Invalid(format!("decay fit needs ≥ 10 positive samples, got {n}")));
    }
    let nf = n as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / nf, sy / nf);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx < 1e-300 {
        return Err(Error::Invalid("decay fit needs spread in the distance samples".into()));
    }
    let slope = sxy / sxx;
    let correlation = if syy < 1e-300 { 0.0 } else { sxy / (sxx * syy).sqrt() };
    Ok(DecayFit { slope, intercept: my - slope * mx, correlation, n })
}

// ---------------------------------------------------------------------------
// Report

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportEntry {
    pub id: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub config_hash: String,
    pub ok: bool,
    pub entries: Vec<ReportEntry>,
}

/// Aggregate check entries; errors if a required check id is missing.
pub fn assemble_report(
    config_hash: &str,
    entries: Vec<ReportEntry>,
    required: &[&str],
) -> Result<Report> {
    for id in required {
        if !entries.iter().any(|e| e.id == *id) {
            return Err(Error::Invalid(format!("mandatory check '{id}' missing from report")));
        }
    }
    let ok = entries.iter().all(|e| e.pass);
    Ok(Report { config_hash: config_hash.to_string(), ok, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyp3::{hull_faces, IdealPoint};
    use crate::planar::side_geodesics;
    use crate::polygon::{BendingData, TwistedIdealPolygon};
    use crate::qd::decompose;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hopf_of_collapse_map_is_quarter() {
        let grid = Grid::centered_square(33, 1.0, |_| 1.0).unwrap();
        let m = DiscreteMap::sample(&grid, |z| PointH3::new(0.0, 0.0, z.re.exp()));
        let hf = hopf_field(&grid, &m, 0, &[], 0.0).unwrap();
        // φ_disc = ¼(sinh h / h)² = ¼ + O(h²), constant over the grid.
        for p in hf.phi.iter().flatten() {
            assert!((p - c(0.25, 0.0)).norm() < 1e-3, "phi {p}");
        }
        for d in hf.dbar.iter().flatten() {
            assert!(*d < 1e-10);
        }
        assert!((hf.fit[0] - c(0.25, 0.0)).norm() < 1e-3);
        assert!(hf.fit_rel_residual < 1e-9);
    }

    #[test]
    fn hopf_of_constant_map_is_zero() {
        let grid = Grid::centered_square(17, 1.0, |_| 1.0).unwrap();
        let m = DiscreteMap::sample(&grid, |_| PointH3::new(0.3, -0.1, 2.0));
        let (phi, _) = hopf_phi(&grid, &m);
        for p in phi.iter().flatten() {
            assert_eq!(*p, c(0.0, 0.0));
        }
    }

    #[test]
    fn polynomial_fit_recovers_coefficients() {
        let grid = Grid::centered_square(41, 2.0, |_| 1.0).unwrap();
        let q = [c(0.3, -0.2), c(0.0, 1.0), c(-1.5, 0.0)];
        let mut phi: Vec<Option<C64>> = vec![None; grid.nx * grid.ny];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let z = grid.node(i, j);
                phi[grid.idx(i, j)] = Some(q[0] + q[1] * z + q[2] * z * z + c(1e-9, -1e-9));
            }
        }
        let nodes = trusted_annulus(&grid, &[c(0.5, 0.5)], 0.1);
        // The excluded zero disk must actually remove nodes.
        assert!(nodes.len() < (grid.nx - 4) * (grid.ny - 4));
        let (fit, res) = fit_polynomial(&grid, &phi, 2, &nodes).unwrap();
        for (a, b) in fit.iter().zip(&q) {
            assert!((a - b).norm() < 1e-7, "{a} vs {b}");
        }
        assert!(res < 1e-7);
        // Fitting a higher degree: excess coefficients stay negligible.
        let (fit4, _) = fit_polynomial(&grid, &phi, 4, &nodes).unwrap();
        assert!(fit4[3].norm() < 1e-6 && fit4[4].norm() < 1e-6);
    }

    #[test]
    fn pp_of_fit_matches_series() {
        // fit = z² → √q = z: twice-exponents {2}, coefficient 1 → ω = z dz.
        let hf = HopfField {
            phi: vec![],
            dbar: vec![],
            fit: vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            fit_rel_residual: 0.0,
            annulus: vec![],
        };
        let pp = pp_of_fit(&hf).unwrap();
        let direct = PolyQD::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
            .unwrap()
            .principal_part();
        assert!(pp_compare(&pp, &direct) < 1e-12);
    }

    fn square0() -> TwistedIdealPolygon {
        TwistedIdealPolygon::new(vec![
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
            IdealPoint::finite(-1.0, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn pleated_field_no_bending_is_identity() {
        let p0 = square0();
        let cocycle = BendingCocycle::new(&p0, &BendingData { thetas: vec![0.0] }).unwrap();
        let grid = Grid::centered_square(9, 1.0, |_| 1.0).unwrap();
        let h = DiscreteMap::sample(&grid, |z| PointH3::new(z.re, 0.0, 1.5 + 0.2 * z.im));
        let pf = pleated_field(&h, &cocycle, 1e-6).unwrap();
        for (a, b) in h.values.iter().zip(&pf.values) {
            assert!(dist(a, b) < 1e-12);
        }
        assert_eq!(psi_sup(&h, &pf), 0.0);
    }

    #[test]
    fn pleated_field_single_diagonal_applies_elliptic() {
        let p0 = square0();
        let bd = BendingData { thetas: vec![std::f64::consts::FRAC_PI_2] };
        let cocycle = BendingCocycle::new(&p0, &bd).unwrap();
        // Diagonal (ξ_0, ξ_2) = (0, ∞): the vertical plane x = 0. Base region
        // T₁ lies on x > 0; nodes with x < 0 get e₁ applied.
        let grid = Grid::centered_square(9, 1.0, |_| 1.0).unwrap();
        let h = DiscreteMap::sample(&grid, |z| PointH3::new(z.re, 0.0, 1.0));
        let pf = pleated_field(&h, &cocycle, 1e-9).unwrap();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let idx = grid.idx(i, j);
                let hx = h.values[idx].x;
                let xi = &pf.values[idx];
                if hx > 1e-6 {
                    assert!(dist(&h.values[idx], xi) < 1e-12, "right side moved");
                } else if hx < -1e-6 {
                    // Bent out of the plane, same distance from the diagonal.
                    assert!(xi.y.abs() > 1e-3, "left side not bent: {xi:?}");
                }
            }
        }
        // Flagged nodes (on the diagonal) are counted.
        assert_eq!(pf.n_flagged, 9);
    }

    #[test]
    fn gauge_sup_zero_inside_hull() {
        let p0 = square0();
        let faces = hull_faces(&p0.vertices).unwrap();
        let grid = Grid::centered_square(5, 0.4, |_| 1.0).unwrap();
        let m = DiscreteMap::sample(&grid, |z| PointH3::new(0.3 * z.re, 0.0, 1.0));
        assert_eq!(gauge_sup(&m, &faces).unwrap(), 0.0);
    }

    #[test]
    fn decay_fit_oracles() {
        let exact: Vec<(f64, f64)> = (0..20).map(|k| {
            let x = 0.3 * k as f64;
            (x, (-x).exp())
        }).collect();
        let f = decay_fit(&exact).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-9, "slope {}", f.slope);
        assert!((f.correlation + 1.0).abs() < 1e-9);

        let flat: Vec<(f64, f64)> = (0..15).map(|k| (k as f64, 2.0)).collect();
        let f = decay_fit(&flat).unwrap();
        assert!(f.slope.abs() < 1e-12);

        let noisy: Vec<(f64, f64)> = (0..30).map(|k| {
            let x = 0.2 * k as f64;
            (x, (-2.0 * x).exp() + 1e-8)
        }).collect();
        let f = decay_fit(&noisy).unwrap();
        assert!((f.slope + 2.0).abs() < 0.05, "slope {}", f.slope);

        assert!(decay_fit(&exact[..8]).is_err());
        let negs: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, -1.0)).collect();
        assert!(decay_fit(&negs).is_err());
    }

    #[test]
    fn side_asymptotics_on_exact_collapse() {
        // Map every node onto side 0 via the H₀ chart coordinate: the far
        // leaf image is exactly the side geodesic.
        let q = PolyQD::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let d = decompose(q, 2.0).unwrap();
        let grid = Grid::centered_square(41, 8.0, |_| 1.0).unwrap();
        let p0 = TwistedIdealPolygon::new(vec![
            IdealPoint::finite(0.0, 0.0),
            IdealPoint::finite(1.0, 0.0),
            IdealPoint::Inf,
        ])
        .unwrap();
        let sides = side_geodesics(&p0).unwrap();
        let g0 = sides[0].clone();
        let dd = &d;
        let m = DiscreteMap::sample(&grid, |z| {
            let x = dd.chart_coords(1, z).unwrap().0;
            g0.point_at(x).unwrap()
        });
        let reports = side_asymptotics(&grid, &m, &sides, &d, 1.0, 24).unwrap();
        let r0 = &reports[0];
        assert!(r0.n_points >= 20);
        assert!(r0.max_curvature < 1e-6, "curvature {}", r0.max_curvature);
        assert!(r0.geodesic_fit_residual < 1e-6);
        assert!(r0.side_residual < 1e-6, "side residual {}", r0.side_residual);
    }

    #[test]
    fn report_assembly_and_roundtrip() {
        let entries = vec![
            ReportEntry {
                id: "alpha".into(),
                pass: true,
                measured: 0.5,
                tolerance: 1.0,
                detail: "ok".into(),
            },
            ReportEntry {
                id: "beta".into(),
                pass: false,
                measured: 2.0,
                tolerance: 1.0,
                detail: "over".into(),
            },
        ];
        let r = assemble_report("deadbeef", entries.clone(), &["alpha", "beta"]).unwrap();
        assert!(!r.ok);
        let json = serde_json::to_string_pretty(&r).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(assemble_report("x", entries, &["gamma"]).is_err());
        let ok = assemble_report(
            "x",
            vec![ReportEntry {
                id: "alpha".into(),
                pass: true,
                measured: 0.0,
                tolerance: 1.0,
                detail: String::new(),
            }],
            &["alpha"],
        )
        .unwrap();
        assert!(ok.ok);
    }
}
