//! Planar harmonic map h: ℂ → {y = 0} ⊂ ℍ³ asymptotic to a straightened
//! ideal polygon: a collapse-style initial guess assembled from the chain
//! decomposition, the flow restricted to planar data, and the vortex-equation
//! residual used to validate harmonicity.

use crate::error::{Error, Result};
use crate::flow::{run, BoundaryMode, DiscreteMap, FlowParams, FlowResult, Grid};
use crate::hyp3::{mink_blend, GeodesicLine, PointH3};
use crate::polygon::TwistedIdealPolygon;
use crate::qd::{smoothstep5, Decomposition};
use num_complex::Complex64 as C64;
use std::f64::consts::{PI, TAU};

/// Which angular cell of the decomposition a direction falls in: cells are
/// centred on the rays (C on horizontal rays, H on the midpoint rays) with
/// boundaries halfway between consecutive rays. `frac` runs 0 → 1 across the
/// cell counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Cusp { index: usize, frac: f64 },
    Side { index: usize, frac: f64 },
}

pub fn angular_cell(decomp: &Decomposition, ang: f64) -> Cell {
    let n = decomp.charts.len() / 2;
    let theta0 = decomp.charts[0].center_angle;
    let width = PI / n as f64; // ray spacing
    // Position in units of ray spacing from θ_0, cell boundaries at half-integers.
    let s = (ang - theta0).rem_euclid(TAU) / width;
    let slot = (s + 0.5).floor(); // 0..=2n, slot r ↔ ray r (C for even, H for odd)
    let frac = s + 0.5 - slot;
    let slot = (slot as usize) % (2 * n);
    if slot % 2 == 0 {
        Cell::Cusp { index: slot / 2, frac }
    } else {
        Cell::Side { index: slot / 2, frac }
    }
}

/// Side geodesics of the polygon, indexed by the matching horizontal chart:
/// side k joins ξ_{k+1} (x → −∞) to ξ_k (x → +∞), so that the chart
/// coordinate x = Re η increases towards the cusp at ξ_k.
pub fn side_geodesics(p: &TwistedIdealPolygon) -> Result<Vec<GeodesicLine>> {
    (0..p.n())
        .map(|k| {
            GeodesicLine::new(
                p.vertex(k as isize + 1).clone(),
                p.vertices[k].clone(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// Collapse onto side k through the horizontal chart H_k.
    Side(usize),
    /// Geodesic blend of the two sides adjacent to cusp k.
    Cusp(usize),
}

pub struct PlanarInitial {
    pub map: DiscreteMap,
    pub labels: Vec<RegionLabel>,
}

/// Collapse-style initial guess: on each horizontal cell the image is
/// γ_k(x_k(z)) on the matching side; across cusp cells the two adjacent
/// collapse candidates are geodesically blended with a C² angular weight.
pub fn build_planar_initial(
    p0: &TwistedIdealPolygon,
    decomp: &Decomposition,
    grid: &Grid,
) -> Result<PlanarInitial> {
    let n = decomp.charts.len() / 2;
    if p0.n() != n {
        return Err(Error::Invalid(format!(
            "polygon has {} sides but the differential has {} horizontal directions",
            p0.n(),
            n
        )));
    }
    if !p0.is_planar(1e-9)? {
        return Err(Error::Invalid("planar initial guess requires a straightened polygon".into()));
    }
    // The grid must reach past the bounding leaves of every chart.
    let reach = (0..decomp.charts.len())
        .map(|k| decomp.leaf_base_point(k).map(|z| z.norm()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let half_extent = (-grid.x0)
        .min(grid.x(grid.nx - 1))
        .min(-grid.y0)
        .min(grid.y(grid.ny - 1));
    if half_extent < reach {
        return Err(Error::Invalid(format!(
            "grid too coarse/small: half-extent {half_extent} does not cover the \
             decomposition (bounding leaves reach {reach})"
        )));
    }
    let sides = side_geodesics(p0)?;
    let x_of = |k: usize, z: C64| -> Result<f64> { Ok(decomp.chart_coords_nudged(2 * k + 1, z)?.0) };
    let cand = |k: usize, z: C64| -> Result<PointH3> { sides[k].point_at(x_of(k, z)?) };
    let mut values = Vec::with_capacity(grid.nx * grid.ny);
    let mut labels = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let z = grid.node(i, j);
            match angular_cell(decomp, z.arg()) {
                Cell::Side { index, .. } => {
                    values.push(cand(index, z)?);
                    labels.push(RegionLabel::Side(index));
                }
                Cell::Cusp { index, frac } => {
                    let prev = (index + n - 1) % n;
                    let w = smoothstep5(frac);
                    let a = cand(prev, z)?;
                    let b = cand(index, z)?;
                    values.push(mink_blend(&[a, b], &[1.0 - w, w]));
                    labels.push(RegionLabel::Cusp(index));
                }
            }
        }
    }
    Ok(PlanarInitial { map: DiscreteMap { values }, labels })
}

/// Largest |y| over the map; the flow preserves y = 0 exactly, this guards it.
pub fn planarity_drift(map: &DiscreteMap) -> f64 {
    map.values.iter().map(|p| p.y.abs()).fold(0.0, f64::max)
}

/// Flow the planar initial guess to stationarity with pinned boundary.
/// The output is asserted planar (|y| < 1e−9) and y is projected to zero.
pub fn solve_planar_harmonic(
    grid: &Grid,
    init: PlanarInitial,
    params: &FlowParams,
) -> Result<FlowResult> {
    if planarity_drift(&init.map) > 1e-9 {
        return Err(Error::Invalid("initial guess is not planar".into()));
    }
    let mut result = run(grid, init.map, params, BoundaryMode::Pinned, None)?;
    let drift = planarity_drift(&result.map);
    if drift > 1e-9 {
        return Err(Error::Numerical(format!("planarity drift {drift} exceeds 1e-9")));
    }
    for p in result.map.values.iter_mut() {
        p.y = 0.0;
    }
    Ok(result)
}

/// Per-node vortex data of a (planar) map: w₁ = ¼ ln(ℋ/ℒ), the Hopf modulus
/// |φ|, and the residual of Δ_ξ w₁ = e^{2w₁} − e^{−2w₁} in the canonical
/// coordinates of φ (Δ_ξ = Δ_z/|φ|). Cells where the differential degenerates
/// (ℒ ≈ 0 or |φ| ≈ 0) are excluded.
pub struct VortexData {
    /// w₁ per node (None where excluded or on the boundary ring).
    pub w1: Vec<Option<f64>>,
    /// |Δ_ξ w₁ − 2 sinh 2w₁| per node (needs a full w₁ stencil).
    pub residual: Vec<Option<f64>>,
    pub excluded: usize,
}

/// Normalized energy density e = 2 cosh 2w₁ (→ 2 where the map is an
/// almost-isometry in the horizontal direction).
pub fn normalized_energy(w1: &[Option<f64>]) -> Vec<Option<f64>> {
    w1.iter().map(|o| o.map(|w| 2.0 * (2.0 * w).cosh())).collect()
}

pub fn vortex_residual(grid: &Grid, map: &DiscreteMap) -> VortexData {
    let (nx, ny) = (grid.nx, grid.ny);
    let v = &map.values;
    let mut w1 = vec![None; nx * ny];
    let mut phi_abs = vec![0.0f64; nx * ny];
    let mut excluded = 0usize;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = grid.idx(i, j);
            let dzc = |f: fn(&PointH3) -> f64| -> C64 {
                let dx = (f(&v[c + 1]) - f(&v[c - 1])) / (2.0 * grid.hx);
                let dy = (f(&v[c + nx]) - f(&v[c - nx])) / (2.0 * grid.hy);
                C64::new(dx, -dy) / 2.0
            };
            let a = dzc(|p| p.x);
            let b = dzc(|p| p.y);
            let d = dzc(|p| p.z);
            let z2 = v[c].z * v[c].z;
            // ℋ = |u_z|², ℒ = |u_z̄|²; u_z̄ = conj of (∂x + i∂y)/2 parts.
            let h_energy = (a.norm_sqr() + b.norm_sqr() + d.norm_sqr()) / z2;
            let phi = (a * a + b * b + d * d) / z2;
            // ℒ from |φ|² = ℋℒ (planar targets).
            let l_energy = if h_energy > 0.0 { phi.norm_sqr() / h_energy } else { 0.0 };
            phi_abs[c] = phi.norm();
            if l_energy <= 1e-14 * h_energy || h_energy == 0.0 || phi.norm() < 1e-300 {
                excluded += 1;
                continue;
            }
            w1[c] = Some(0.25 * (h_energy / l_energy).ln());
        }
    }
    let mut residual = vec![None; nx * ny];
    for j in 2..ny.saturating_sub(2) {
        for i in 2..nx.saturating_sub(2) {
            let c = grid.idx(i, j);
            let (wc, we, ww, wn, ws) = match (w1[c], w1[c + 1], w1[c - 1], w1[c + nx], w1[c - nx]) {
                (Some(a), Some(b), Some(cc), Some(d), Some(e)) => (a, b, cc, d, e),
                _ => continue,
            };
            let lap = (we - 2.0 * wc + ww) / (grid.hx * grid.hx)
                + (wn - 2.0 * wc + ws) / (grid.hy * grid.hy);
            residual[c] = Some((lap / phi_abs[c] - 2.0 * (2.0 * wc).sinh()).abs());
        }
    }
    VortexData { w1, residual, excluded }
}
