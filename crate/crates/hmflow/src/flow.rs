//! Discrete tension-field heat flow for maps from a rectangle with conformal
//! metric σ|dz|² into ℍ³ (upper half-space), on a uniform grid with 5-point
//! stencils, stepped explicitly through the exponential map.

use crate::error::{Error, Result};
use crate::hyp3::{exp_map, PointH3};
use num_complex::Complex64 as C64;

#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    /// σ sampled at the nodes, row-major (j·nx + i).
    pub sigma: Vec<f64>,
}

impl Grid {
    pub fn new(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
        sigma: impl Fn(C64) -> f64,
    ) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Invalid("grid needs at least 3 nodes per side".into()));
        }
        if !(hx > 0.0 && hy > 0.0) {
            return Err(Error::Invalid("grid spacing must be positive".into()));
        }
        let mut s = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let v = sigma(C64::new(x0 + hx * i as f64, y0 + hy * j as f64));
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Invalid(format!("σ must be positive (node {i},{j}: {v})")));
                }
                s.push(v);
            }
        }
        Ok(Grid { nx, ny, x0, y0, hx, hy, sigma: s })
    }

    /// Square grid centred at the origin with n nodes and half-width `ext`.
    pub fn centered_square(n: usize, ext: f64, sigma: impl Fn(C64) -> f64) -> Result<Self> {
        let h = 2.0 * ext / (n - 1) as f64;
        Grid::new(n, n, -ext, -ext, h, h, sigma)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.hx * i as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + self.hy * j as f64
    }

    pub fn node(&self, i: usize, j: usize) -> C64 {
        C64::new(self.x(i), self.y(j))
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteMap {
    pub values: Vec<PointH3>,
}

impl DiscreteMap {
    pub fn sample(grid: &Grid, f: impl Fn(C64) -> PointH3) -> Self {
        let mut values = Vec::with_capacity(grid.nx * grid.ny);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.node(i, j)));
            }
        }
        DiscreteMap { values }
    }

    pub fn min_height(&self) -> f64 {
        self.values.iter().map(|p| p.z).fold(f64::INFINITY, f64::min)
    }
}

/// Boundary handling during the flow.
pub enum BoundaryMode<'a> {
    /// Boundary nodes stay at their initial values.
    Pinned,
    /// Boundary nodes follow a prescribed family (x, y, t) ↦ point; used for
    /// convergence studies against exact solutions.
    Prescribed(&'a dyn Fn(f64, f64, f64) -> PointH3),
}

/// Tension field τ(u) at every node (zero on the boundary), as Euclidean
/// coordinate vectors. Second-order consistent with
///   τ¹ = σ⁻¹[Δu¹ − (2/u³)(u¹ₓu³ₓ + u¹ᵧu³ᵧ)]
///   τ² = σ⁻¹[Δu² − (2/u³)(u²ₓu³ₓ + u²ᵧu³ᵧ)]
///   τ³ = σ⁻¹[Δu³ + (1/u³)(|∇u¹|² + |∇u²|² − |∇u³|²)]
/// but computed as τ = −(u³)²/σ · ∇E of the edge-based discrete energy
/// (see `energy`), so the explicit flow decreases that energy at every step
/// and its fixed point is exactly the discrete critical point.
pub fn tension_field(grid: &Grid, map: &DiscreteMap) -> Vec<[f64; 3]> {
    let mut tau = vec![[0.0; 3]; grid.nx * grid.ny];
    tension_field_into(grid, map, &mut tau);
    tau
}

/// `tension_field` into a caller-owned buffer (boundary entries are left
/// untouched; they are zero on a fresh buffer and never written afterwards).
fn tension_field_into(grid: &Grid, map: &DiscreteMap, tau: &mut [[f64; 3]]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let v = &map.values;
    let wx = 1.0 / (grid.hx * grid.hx);
    let wy = 1.0 / (grid.hy * grid.hy);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = grid.idx(i, j);
            let p = &v[c];
            let z = p.z;
            let mut g = [0.0f64; 3];
            for (n, w) in [
                (&v[c + 1], wx),
                (&v[c - 1], wx),
                (&v[c + nx], wy),
                (&v[c - nx], wy),
            ] {
                let inv_zz = 1.0 / (z * n.z);
                let (dx, dy, dz) = (n.x - p.x, n.y - p.y, n.z - p.z);
                g[0] += w * dx * inv_zz;
                g[1] += w * dy * inv_zz;
                g[2] += w * inv_zz * (dz + (dx * dx + dy * dy + dz * dz) / (2.0 * z));
            }
            let s = z * z / grid.sigma[c];
            tau[c] = [s * g[0], s * g[1], s * g[2]];
        }
    }
}

/// sup over interior nodes of the hyperbolic norm |τ| = |τ|₂ / u³.
pub fn sup_tension(map: &DiscreteMap, tau: &[[f64; 3]]) -> f64 {
    tau.iter()
        .zip(&map.values)
        .map(|(t, p)| (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt() / p.z)
        .fold(0.0, f64::max)
}

/// Energy density e(u) = σ⁻¹ Σ_k |∇u^k|² / (u³)² at interior nodes.
pub fn energy_density(grid: &Grid, map: &DiscreteMap) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut e = vec![0.0; nx * ny];
    let v = &map.values;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = grid.idx(i, j);
            let (pe, pw) = (&v[c + 1], &v[c - 1]);
            let (pn, ps) = (&v[c + nx], &v[c - nx]);
            let dx = [
                (pe.x - pw.x) / (2.0 * grid.hx),
                (pe.y - pw.y) / (2.0 * grid.hx),
                (pe.z - pw.z) / (2.0 * grid.hx),
            ];
            let dy = [
                (pn.x - ps.x) / (2.0 * grid.hy),
                (pn.y - ps.y) / (2.0 * grid.hy),
                (pn.z - ps.z) / (2.0 * grid.hy),
            ];
            let g2: f64 = dx.iter().chain(dy.iter()).map(|d| d * d).sum();
            e[c] = g2 / (grid.sigma[c] * v[c].z * v[c].z);
        }
    }
    e
}

/// Total discrete energy: edge-based sum
///   E = ½ Σ_x-edges (hy/hx) |Δu|²/(z_a z_b) + ½ Σ_y-edges (hx/hy) |Δu|²/(z_a z_b),
/// a consistent discretisation of ½ ∫ Σ_k |∇u^k|²/(u³)² dx dy (σ cancels by
/// conformal invariance). `tension_field` is its exact negative gradient up
/// to the positive node-wise factor (u³)²/(σ hx hy), so the flow decreases
/// this quantity monotonically.
pub fn energy(grid: &Grid, map: &DiscreteMap) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let v = &map.values;
    let mut e = 0.0;
    let d2 = |a: &PointH3, b: &PointH3| {
        let (dx, dy, dz) = (b.x - a.x, b.y - a.y, b.z - a.z);
        (dx * dx + dy * dy + dz * dz) / (a.z * b.z)
    };
    for j in 0..ny {
        for i in 0..nx - 1 {
            let c = grid.idx(i, j);
            e += grid.hy / grid.hx * d2(&v[c], &v[c + 1]);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let c = grid.idx(i, j);
            e += grid.hx / grid.hy * d2(&v[c], &v[c + nx]);
        }
    }
    0.5 * e
}

#[derive(Debug, Clone)]
pub struct FlowParams {
    /// Safety factor on the explicit stability bound Δt ≤ σ_min h²/4.
    pub c_cfl: f64,
    /// Maximum number of accepted steps.
    pub max_steps: usize,
    /// Stop when sup|τ| falls below this (None: run max_steps).
    pub tol_sup_tau: Option<f64>,
    /// Hard floor on the height coordinate.
    pub z_floor: f64,
    /// Record a series row every this many steps (and at the last step).
    pub series_every: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            c_cfl: 0.2,
            max_steps: 100_000,
            tol_sup_tau: None,
            z_floor: 1e-8,
            series_every: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SeriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub sup_tau: f64,
}

#[derive(Debug)]
pub struct FlowResult {
    pub map: DiscreteMap,
    pub t: f64,
    pub steps: usize,
    pub sup_tau: f64,
    pub converged: bool,
    pub series: Vec<SeriesRow>,
}

/// One explicit step u ↦ exp_u(Δt τ(u)) at interior nodes, written into
/// `out` (whose boundary entries are left as they are). Returns false if the
/// step would sink a node below the z-floor.
fn try_step_into(
    grid: &Grid,
    map: &DiscreteMap,
    tau: &[[f64; 3]],
    dt: f64,
    z_floor: f64,
    out: &mut [PointH3],
) -> bool {
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let c = grid.idx(i, j);
            let t = tau[c];
            let p = exp_map(&map.values[c], [t[0] * dt, t[1] * dt, t[2] * dt]);
            if !(p.z >= z_floor && p.is_valid()) {
                return false;
            }
            out[c] = p;
        }
    }
    true
}

/// Run the flow from `map` (consumed) with the given boundary handling.
/// `on_checkpoint(step, t, map)` is invoked on series steps so callers can
/// persist state; errors from it abort the run.
pub fn run(
    grid: &Grid,
    mut map: DiscreteMap,
    params: &FlowParams,
    boundary: BoundaryMode<'_>,
    mut on_checkpoint: Option<&mut dyn FnMut(usize, f64, &DiscreteMap) -> Result<()>>,
) -> Result<FlowResult> {
    if map.values.len() != grid.nx * grid.ny {
        return Err(Error::Invalid("map size does not match grid".into()));
    }
    if map.min_height() < params.z_floor {
        return Err(Error::Numerical("initial map breaches the z-floor".into()));
    }
    if !(params.c_cfl > 0.0 && params.c_cfl <= 1.0) {
        return Err(Error::Invalid("CFL safety factor must lie in (0, 1]".into()));
    }
    let h = grid.hx.min(grid.hy);
    let dt0 = params.c_cfl * grid.sigma_min() * h * h / 4.0;
    let mut t = 0.0;
    let mut series = Vec::new();
    // Step buffer: boundary entries are kept in sync by the swap (Pinned
    // boundaries are constant; Prescribed ones are overwritten every step).
    let mut next = map.values.clone();
    let mut tau = vec![[0.0f64; 3]; map.values.len()];
    tension_field_into(grid, &map, &mut tau);
    let mut sup = sup_tension(&map, &tau);
    let record = |series: &mut Vec<SeriesRow>, step, t, grid: &Grid, map: &DiscreteMap, sup| {
        series.push(SeriesRow { step, t, energy: energy(grid, map), sup_tau: sup });
    };
    record(&mut series, 0, 0.0, grid, &map, sup);

    let mut step = 0usize;
    while step < params.max_steps {
        if let Some(tol) = params.tol_sup_tau {
            if sup <= tol {
                break;
            }
        }
        // Adaptive halving when a node would dive toward the floor.
        let mut dt = dt0;
        let mut stepped = false;
        for _ in 0..40 {
            if try_step_into(grid, &map, &tau, dt, params.z_floor, &mut next) {
                stepped = true;
                break;
            }
            dt *= 0.5;
        }
        if !stepped {
            return Err(Error::Numerical(format!(
                "z-floor breached at t = {t} even with reduced steps"
            )));
        }
        t += dt;
        step += 1;
        if let BoundaryMode::Prescribed(f) = boundary {
            for i in 0..grid.nx {
                next[grid.idx(i, 0)] = f(grid.x(i), grid.y(0), t);
                next[grid.idx(i, grid.ny - 1)] = f(grid.x(i), grid.y(grid.ny - 1), t);
            }
            for j in 0..grid.ny {
                next[grid.idx(0, j)] = f(grid.x(0), grid.y(j), t);
                next[grid.idx(grid.nx - 1, j)] = f(grid.x(grid.nx - 1), grid.y(j), t);
            }
        }
        std::mem::swap(&mut map.values, &mut next);
        tension_field_into(grid, &map, &mut tau);
        sup = sup_tension(&map, &tau);
        if step % params.series_every == 0 || step == params.max_steps {
            record(&mut series, step, t, grid, &map, sup);
            if let Some(cb) = on_checkpoint.as_deref_mut() {
                cb(step, t, &map)?;
            }
        }
    }
    if series.last().map(|r| r.step) != Some(step) {
        record(&mut series, step, t, grid, &map, sup);
    }
    let converged = params.tol_sup_tau.map(|tol| sup <= tol).unwrap_or(true);
    Ok(FlowResult { map, t, steps: step, sup_tau: sup, converged, series })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_grid(n: usize, ext: f64) -> Grid {
        Grid::centered_square(n, ext, |_| 1.0).unwrap()
    }

    #[test]
    fn constant_map_has_zero_tension() {
        let g = flat_grid(17, 1.0);
        let m = DiscreteMap::sample(&g, |_| PointH3::new(0.3, -0.2, 2.0));
        let tau = tension_field(&g, &m);
        let s = sup_tension(&m, &tau);
        assert_eq!(s, 0.0);
        assert_eq!(energy(&g, &m), 0.0);
    }

    #[test]
    fn horizontal_graph_tension_oracle() {
        // u = (x, y, c): τ = (0, 0, 2/c), exactly reproduced by the stencil
        // because the map is affine.
        let g = flat_grid(17, 1.0);
        let c = 1.7;
        let m = DiscreteMap::sample(&g, |z| PointH3::new(z.re, z.im, c));
        let tau = tension_field(&g, &m);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let t = tau[g.idx(i, j)];
                assert!(t[0].abs() < 1e-13 && t[1].abs() < 1e-13);
                assert!((t[2] - 2.0 / c).abs() < 1e-12, "{}", t[2]);
            }
        }
        // Scaling σ divides τ.
        let g2 = Grid::centered_square(17, 1.0, |_| 4.0).unwrap();
        let tau2 = tension_field(&g2, &m);
        assert!((tau2[g.idx(8, 8)][2] - 0.5 / c).abs() < 1e-12);
    }

    #[test]
    fn vertical_plane_graph_is_harmonic() {
        // u = (0, 0, e^x) parametrizes a geodesic by arclength: τ ≡ 0. The
        // edge-based stencil is exact here (e^{-s}(e^s−1)(e^s+1)/2 = sinh s
        // cancels over the ±h pair), so the residual is pure roundoff.
        let sup_at = |n: usize| {
            let g = flat_grid(n, 1.0);
            let m = DiscreteMap::sample(&g, |z| PointH3::new(0.0, 0.0, z.re.exp()));
            let tau = tension_field(&g, &m);
            sup_tension(&m, &tau)
        };
        assert!(sup_at(33) < 1e-9, "sup tau {}", sup_at(33));
        assert!(sup_at(65) < 1e-9, "sup tau {}", sup_at(65));
    }

    #[test]
    fn tension_stencil_is_second_order() {
        // Analytic tension of u = (sin x, 0, 2 + ½cos y) versus the stencil;
        // Richardson between h and h/2 gives order ≈ 2.
        let f = |x: f64, y: f64| PointH3::new(x.sin(), 0.0, 2.0 + 0.5 * y.cos());
        let exact = |x: f64, y: f64| -> [f64; 3] {
            let z = 2.0 + 0.5 * y.cos();
            let u1x = x.cos();
            let u3y = -0.5 * y.sin();
            let lap1 = -x.sin();
            let lap3 = -0.5 * y.cos();
            [
                lap1, // u¹ₓu³ₓ = 0 and u¹ᵧ = 0
                0.0,
                lap3 + (u1x * u1x - u3y * u3y) / z,
            ]
        };
        let err = |n: usize| -> f64 {
            let g = flat_grid(n, 1.0);
            let m = DiscreteMap::sample(&g, |w| f(w.re, w.im));
            let tau = tension_field(&g, &m);
            let mut worst = 0.0f64;
            for j in 1..g.ny - 1 {
                for i in 1..g.nx - 1 {
                    let e = exact(g.x(i), g.y(j));
                    let t = tau[g.idx(i, j)];
                    for k in 0..3 {
                        worst = worst.max((t[k] - e[k]).abs());
                    }
                }
            }
            worst
        };
        let e1 = err(33);
        let e2 = err(65);
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order} ({e1} vs {e2})");
    }

    #[test]
    fn flow_decreases_energy_and_tension() {
        let g = flat_grid(25, 1.0);
        // Bumpy interior, pinned smooth boundary.
        let m = DiscreteMap::sample(&g, |z| {
            let bump = 0.3 * (std::f64::consts::PI * z.re).sin() * (std::f64::consts::PI * z.im).sin();
            PointH3::new(z.re, z.im, 2.0 + bump)
        });
        let params = FlowParams { max_steps: 400, ..Default::default() };
        let r = run(&g, m, &params, BoundaryMode::Pinned, None).unwrap();
        let energies: Vec<f64> = r.series.iter().map(|s| s.energy).collect();
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energy rose: {w:?}");
        }
        assert!(r.series.last().unwrap().sup_tau < r.series[0].sup_tau * 0.8);
    }

    #[test]
    fn flow_reaches_tolerance_on_harmonic_target() {
        // Pinned boundary sampled from the harmonic graph u = (0,0,e^x);
        // flow from a perturbed interior returns to it.
        let g = flat_grid(21, 0.8);
        let exactf = |z: C64| PointH3::new(0.0, 0.0, z.re.exp());
        let m = DiscreteMap::sample(&g, |z| {
            let mut p = exactf(z);
            if (z.re.abs() - 0.8).abs() > 1e-12 && (z.im.abs() - 0.8).abs() > 1e-12 {
                p.z *= 1.0 + 0.2 * (1.0 - (z.re / 0.8).powi(2)) * (1.0 - (z.im / 0.8).powi(2));
            }
            p
        });
        let params = FlowParams {
            max_steps: 20_000,
            tol_sup_tau: Some(5e-4),
            ..Default::default()
        };
        let r = run(&g, m, &params, BoundaryMode::Pinned, None).unwrap();
        assert!(r.converged, "sup tau {}", r.sup_tau);
        let exact = DiscreteMap::sample(&g, exactf);
        let worst = r
            .map
            .values
            .iter()
            .zip(&exact.values)
            .map(|(a, b)| crate::hyp3::dist(a, b))
            .fold(0.0, f64::max);
        assert!(worst < 5e-3, "distance to harmonic graph {worst}");
    }

    #[test]
    fn euler_time_stepping_is_first_order() {
        // Richardson in Δt via the CFL safety factor: halving c_cfl halves the
        // global error against a tiny-step reference.
        let g = flat_grid(17, 1.0);
        let init = |z: C64| {
            PointH3::new(
                z.re,
                z.im,
                2.0 + 0.4 * (std::f64::consts::PI * z.re).cos() * (std::f64::consts::PI * z.im).cos(),
            )
        };
        let run_to = |c_cfl: f64| -> DiscreteMap {
            // Fixed number of accepted steps scaled so total time matches.
            let base_steps = 32;
            let steps = (base_steps as f64 / c_cfl * 0.2) as usize;
            let params = FlowParams { c_cfl, max_steps: steps, series_every: steps, ..Default::default() };
            run(&g, DiscreteMap::sample(&g, init), &params, BoundaryMode::Pinned, None)
                .unwrap()
                .map
        };
        let reference = run_to(0.025);
        let diff = |a: &DiscreteMap, b: &DiscreteMap| {
            a.values
                .iter()
                .zip(&b.values)
                .map(|(p, q)| crate::hyp3::dist(p, q))
                .fold(0.0, f64::max)
        };
        let e1 = diff(&run_to(0.2), &reference);
        let e2 = diff(&run_to(0.1), &reference);
        let order = (e1 / e2).log2();
        assert!(order > 0.8, "time order {order} ({e1} vs {e2})");
    }

    #[test]
    fn prescribed_boundary_is_applied() {
        let g = flat_grid(9, 1.0);
        let m = DiscreteMap::sample(&g, |_| PointH3::new(0.0, 0.0, 1.0));
        let f = |x: f64, y: f64, t: f64| PointH3::new(x, y, 1.0 + t);
        let params = FlowParams { max_steps: 3, series_every: 1, ..Default::default() };
        let r = run(&g, m, &params, BoundaryMode::Prescribed(&f), None).unwrap();
        let corner = &r.map.values[0];
        assert!((corner.z - (1.0 + r.t)).abs() < 1e-14);
        assert!((corner.x - g.x0).abs() < 1e-14);
    }

    #[test]
    fn z_floor_guard_errors() {
        let g = flat_grid(9, 1.0);
        // Initial data already below the floor.
        let m = DiscreteMap::sample(&g, |_| PointH3::new(0.0, 0.0, 1e-9));
        let params = FlowParams::default();
        assert!(run(&g, m, &params, BoundaryMode::Pinned, None).is_err());
    }

    #[test]
    fn checkpoint_callback_runs() {
        let g = flat_grid(9, 1.0);
        let m = DiscreteMap::sample(&g, |z| PointH3::new(z.re, z.im, 2.0));
        let params = FlowParams { max_steps: 10, series_every: 5, ..Default::default() };
        let mut hits = Vec::new();
        let mut cb = |step: usize, _t: f64, _m: &DiscreteMap| {
            hits.push(step);
            Ok(())
        };
        run(&g, m, &params, BoundaryMode::Pinned, Some(&mut cb)).unwrap();
        assert_eq!(hits, vec![5, 10]);
    }
}
