//! End-to-end run orchestration: configuration → straightened polygon →
//! planar harmonic map → screw-interpolated initial map → hyperbolic flow,
//! with Ψ/G sampling and checkpoint hooks at the configured cadence.

use crate::config::RunConfig;
use crate::diagnostics::{
    assemble_report, decay_fit, gauge_sup, hopf_field, pleated_field, pp_of_fit, psi_sup,
    side_asymptotics, PleatedField, Report, ReportEntry, SideReport,
};
use crate::error::{Error, Result};
use crate::flow::{
    self, sup_tension, tension_field, BoundaryMode, DiscreteMap, FlowParams, FlowResult, Grid,
};
use crate::hyp3::{hull_faces, mink_blend, tangent_norm, GeodesicPlane};
use crate::initmap::{build_initial_map, InitialMap};
use crate::io::SeriesRecord;
use crate::planar::{build_planar_initial, side_geodesics, solve_planar_harmonic};
use crate::polygon::{bend, BendingCocycle, BendingData, TwistedIdealPolygon};
use crate::qd::{decompose, smooth_metric, Decomposition, DomainMetric, PolyQD};
use num_complex::Complex64 as C64;

/// Leaf depth (in flat-coordinate units) at which the half-plane charts are
/// truncated.
pub const CHART_OFFSET: f64 = 2.0;

/// Largest radius at which a chart's bounding leaf meets its central ray:
/// everything outside is covered by the half-plane chain.
pub fn decomposition_reach(decomp: &Decomposition) -> Result<f64> {
    let mut reach: f64 = 0.0;
    for k in 0..decomp.charts.len() {
        reach = reach.max(decomp.leaf_base_point(k)?.norm());
    }
    Ok(reach)
}

/// The automatic differential z^{n−2} − 1, rescaled so the decomposition
/// reach is at most 60% of the truncation radius. The smallest admissible
/// scale is used: flat depths grow as √s under q ↦ s·q, so larger scales
/// only push the collapse heights closer to the z-floor.
pub fn auto_q(n_sides: usize, radius: f64) -> Result<PolyQD> {
    let deg = n_sides - 2;
    let mut coeffs = vec![C64::new(0.0, 0.0); deg + 1];
    coeffs[0] = C64::new(-1.0, 0.0);
    coeffs[deg] = C64::new(1.0, 0.0);
    let base = PolyQD::new(coeffs)?;
    let d = decompose(base.clone(), CHART_OFFSET)?;
    let r_target = 0.6 * radius;
    if r_target <= d.r0 {
        return Err(Error::Invalid(format!(
            "automatic q needs grid.radius > {:.2} so the half-plane chain fits \
             inside 60% of the truncation radius",
            d.r0 / 0.6
        )));
    }
    // Pick s so every chart's bounding leaf meets its ray by r_target:
    // scaled depth √s·D(r_target) must reach the chart offset.
    let mut d_min = f64::INFINITY;
    for (k, ch) in d.charts.iter().enumerate() {
        let z = C64::from_polar(r_target, ch.center_angle);
        let raw = d.chart_coords(k, z)?.1 + CHART_OFFSET;
        d_min = d_min.min(raw);
    }
    if !(d_min > 0.0) {
        return Err(Error::Numerical("automatic q: flat depth not positive at target radius".into()));
    }
    let s = (CHART_OFFSET / d_min).powi(2) * 1.02;
    Ok(base.scaled(s))
}

/// Everything derived from the configuration before any flow runs. All
/// geometry lives in the normalized frame (ξ₀, ξ₁, ξ₂) = (0, 1, ∞).
pub struct Prepared {
    pub config: RunConfig,
    pub hash: String,
    /// Bent target polygon.
    pub p: TwistedIdealPolygon,
    /// Straightened (planar) polygon.
    pub p0: TwistedIdealPolygon,
    pub bend_data: BendingData,
    pub q: PolyQD,
    pub decomp: Decomposition,
    pub metric: DomainMetric,
    pub grid: Grid,
    /// Supporting half-spaces of the convex hull of the target vertices.
    pub hull: Vec<GeodesicPlane>,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let hash = config.hash();
    let input = config.polygon()?;
    let (p0, bend_data) = input.straighten()?;
    // Work with the bent polygon reconstructed in the normalized frame so
    // that p = bend(p0, θ) holds exactly, not just up to isometry.
    let p = bend(&p0, &bend_data)?;
    let n = p.n();
    let radius = config.grid.radius;

    let (q, max_reach) = match config.q_coeffs() {
        Some(cs) => (PolyQD::new(cs)?, radius),
        None => (auto_q(n, radius)?, 0.6 * radius),
    };
    if q.horizontal_directions().len() != n {
        return Err(Error::Invalid(format!(
            "q has {} horizontal directions but the polygon has {} sides",
            q.horizontal_directions().len(),
            n
        )));
    }
    let decomp = decompose(q.clone(), CHART_OFFSET)?;
    let reach = decomposition_reach(&decomp)?;
    if reach > max_reach {
        return Err(Error::Invalid(format!(
            "decomposition reach {reach:.3} exceeds {max_reach:.3}; enlarge grid.radius"
        )));
    }
    let metric = smooth_metric(&q, config.diagnostics.metric_eps)?;
    let grid = Grid::centered_square(config.grid.n, radius, |z| metric.sigma(z))?;
    let hull = hull_faces(&p.vertices)?;
    Ok(Prepared {
        config: config.clone(),
        hash,
        p,
        p0,
        bend_data,
        q,
        decomp,
        metric,
        grid,
        hull,
    })
}

/// Node counts of the planar coarse-to-fine cascade, coarsest first. Levels
/// halve while the node count stays odd-splittable and at least 17 per side.
fn planar_levels(n: usize) -> Vec<usize> {
    let mut ns = vec![n];
    let mut cur = n;
    while (cur - 1) % 2 == 0 && (cur - 1) / 2 + 1 >= 17 {
        cur = (cur - 1) / 2 + 1;
        ns.push(cur);
    }
    ns.reverse();
    ns
}

/// Bilinear prolongation (Minkowski-barycentric) to a grid with doubled
/// resolution over the same extent.
fn prolong(fine: &Grid, coarse: &Grid, m: &DiscreteMap) -> DiscreteMap {
    debug_assert_eq!(fine.nx, 2 * coarse.nx - 1);
    debug_assert_eq!(fine.ny, 2 * coarse.ny - 1);
    let at = |ci: usize, cj: usize| m.values[coarse.idx(ci, cj)];
    let mut values = Vec::with_capacity(fine.nx * fine.ny);
    for j in 0..fine.ny {
        for i in 0..fine.nx {
            let (ci, cj) = (i / 2, j / 2);
            let p = match (i % 2, j % 2) {
                (0, 0) => at(ci, cj),
                (1, 0) => mink_blend(&[at(ci, cj), at(ci + 1, cj)], &[0.5, 0.5]),
                (0, 1) => mink_blend(&[at(ci, cj), at(ci, cj + 1)], &[0.5, 0.5]),
                _ => mink_blend(
                    &[at(ci, cj), at(ci + 1, cj), at(ci, cj + 1), at(ci + 1, cj + 1)],
                    &[0.25, 0.25, 0.25, 0.25],
                ),
            };
            values.push(p);
        }
    }
    DiscreteMap { values }
}

/// Richardson-extrapolated warm start (4/3)·I(u_h) − (1/3)·I(u_2h), node by
/// node in Minkowski coordinates; falls back to I(u_h) where the combination
/// leaves the hyperboloid.
fn richardson(a: &DiscreteMap, b: &DiscreteMap) -> DiscreteMap {
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(pa, pb)| {
            let p = mink_blend(&[*pa, *pb], &[4.0 / 3.0, -1.0 / 3.0]);
            if p.is_valid() && p.z > 0.0 {
                p
            } else {
                *pa
            }
        })
        .collect();
    DiscreteMap { values }
}

/// Planar stage: the collapse guess is flowed to stationarity on a coarse
/// grid first and prolonged level by level, so the smooth (slowest) error
/// modes relax where steps are cheap. Boundary rings always carry the exact
/// collapse values; each level runs the plain flow engine.
pub fn solve_planar_stage(prep: &Prepared) -> Result<FlowResult> {
    let fs = &prep.config.flow;
    let params = FlowParams {
        c_cfl: fs.c_cfl,
        max_steps: fs.planar_max_steps,
        tol_sup_tau: Some(fs.tol_tau),
        z_floor: fs.z_floor,
        series_every: fs.series_every,
    };
    let radius = prep.config.grid.radius;
    let mut solved: Vec<(Grid, DiscreteMap)> = Vec::new();
    let mut last: Option<FlowResult> = None;
    for &nl in &planar_levels(prep.config.grid.n) {
        let grid_l = if nl == prep.config.grid.n {
            prep.grid.clone()
        } else {
            Grid::centered_square(nl, radius, |z| prep.metric.sigma(z))?
        };
        let mut init = build_planar_initial(&prep.p0, &prep.decomp, &grid_l)?;
        if let Some((gc, mc)) = solved.last() {
            let ih = prolong(&grid_l, gc, mc);
            let guess = if solved.len() >= 2 {
                let (gcc, mcc) = &solved[solved.len() - 2];
                let i2h = prolong(&grid_l, gc, &prolong(gc, gcc, mcc));
                richardson(&ih, &i2h)
            } else {
                ih
            };
            for j in 1..grid_l.ny - 1 {
                for i in 1..grid_l.nx - 1 {
                    let c = grid_l.idx(i, j);
                    let mut p = guess.values[c];
                    p.y = 0.0;
                    init.map.values[c] = p;
                }
            }
        }
        if init.map.min_height() < fs.z_floor {
            return Err(Error::Invalid(format!(
                "collapse heights dip to {:.3e}, below flow.z_floor = {:.1e}; \
                 increase grid.radius or lower the floor",
                init.map.min_height(),
                fs.z_floor
            )));
        }
        let res = solve_planar_harmonic(&grid_l, init, &params)?;
        if !res.converged {
            return Err(Error::NotConverged(format!(
                "planar stage at {nl}²: sup|τ| = {:.3e} after {} steps",
                res.sup_tau, res.steps
            )));
        }
        if std::env::var_os("HMFLOW_TRACE").is_some() {
            eprintln!(
                "planar level {nl}²: {} steps, t = {:.3}, sup|τ| = {:.3e}",
                res.steps, res.t, res.sup_tau
            );
        }
        solved.push((grid_l, res.map.clone()));
        last = Some(res);
    }
    Ok(last.expect("at least one cascade level"))
}

pub struct PipelineOutput {
    /// Converged planar stage.
    pub planar: FlowResult,
    /// Screw-interpolated initial map (rebuilt even on resume).
    pub initial: InitialMap,
    /// Pleated reference Ξ over the grid, when the Ψ diagnostic is on.
    pub pleated: Option<PleatedField>,
    /// The hyperbolic flow result; `steps`/`t`/series are run-local.
    pub result: FlowResult,
    /// Series with global steps/times and Ψ/G at checkpoint cadence.
    pub series: Vec<SeriesRecord>,
    pub start_step: usize,
    pub start_t: f64,
}

impl PipelineOutput {
    pub fn final_step(&self) -> usize {
        self.start_step + self.result.steps
    }

    pub fn final_t(&self) -> f64 {
        self.start_t + self.result.t
    }
}

/// Run planar stage → initial map → hyperbolic flow. `resume` supplies a
/// (step, t, map) state from a checkpoint; the planar stage and initial map
/// are deterministic, so re-deriving them keeps resumed runs bitwise
/// consistent with uninterrupted ones. `on_checkpoint(step, t, map)` fires at
/// the checkpoint cadence with global step numbers.
pub fn run_pipeline(
    prep: &Prepared,
    resume: Option<(usize, f64, DiscreteMap)>,
    mut on_checkpoint: Option<&mut dyn FnMut(usize, f64, &DiscreteMap) -> Result<()>>,
) -> Result<PipelineOutput> {
    let fs = &prep.config.flow;
    let ds = &prep.config.diagnostics;

    let planar = solve_planar_stage(prep)?;

    let initial = build_initial_map(&planar.map, &prep.p0, &prep.p, &prep.decomp, &prep.grid)?;

    let pleated = if ds.pleated {
        let cocycle = BendingCocycle::new(&prep.p0, &prep.bend_data)?;
        Some(pleated_field(&planar.map, &cocycle, ds.diagonal_eps)?)
    } else {
        None
    };

    let (start_step, start_t, start_map) = match resume {
        Some((s, t, m)) => {
            if m.values.len() != prep.grid.nx * prep.grid.ny {
                return Err(Error::Invalid("resume state does not match the grid".into()));
            }
            (s, t, m)
        }
        None => (0, 0.0, initial.map.clone()),
    };

    let sample = |u: &DiscreteMap| -> Result<(Option<f64>, Option<f64>)> {
        let psi = pleated.as_ref().map(|pl| psi_sup(u, pl));
        let gauge = if ds.gauge { Some(gauge_sup(u, &prep.hull)?) } else { None };
        Ok((psi, gauge))
    };

    let params = FlowParams {
        c_cfl: fs.c_cfl,
        max_steps: fs.max_steps.saturating_sub(start_step),
        tol_sup_tau: Some(fs.tol_tau),
        z_floor: fs.z_floor,
        series_every: fs.series_every,
    };
    // Ψ/G samples by global step, collected while the flow runs.
    let mut sampled: Vec<(usize, (Option<f64>, Option<f64>))> = Vec::new();
    if start_step % fs.checkpoint_every == 0 {
        sampled.push((start_step, sample(&start_map)?));
    }
    let result = {
        let mut cb = |step: usize, t: f64, m: &DiscreteMap| -> Result<()> {
            let gs = start_step + step;
            if gs % fs.checkpoint_every == 0 {
                sampled.push((gs, sample(m)?));
                if let Some(f) = on_checkpoint.as_deref_mut() {
                    f(gs, start_t + t, m)?;
                }
            }
            Ok(())
        };
        flow::run(&prep.grid, start_map, &params, BoundaryMode::Pinned, Some(&mut cb))?
    };
    // Always sample the final state, whether or not it fell on the cadence.
    let final_step = start_step + result.steps;
    if sampled.last().map(|(s, _)| *s) != Some(final_step) {
        sampled.push((final_step, sample(&result.map)?));
    }

    let series = result
        .series
        .iter()
        .map(|r| {
            let gs = start_step + r.step;
            let (sup_psi, sup_gauge) = sampled
                .iter()
                .find(|(s, _)| *s == gs)
                .map(|(_, v)| *v)
                .unwrap_or((None, None));
            SeriesRecord {
                t: start_t + r.t,
                energy: r.energy,
                sup_tau: r.sup_tau,
                sup_psi,
                sup_gauge,
            }
        })
        .collect();

    Ok(PipelineOutput { planar, initial, pleated, result, series, start_step, start_t })
}

// ---------------------------------------------------------------------------
// Standard diagnostics bundle

/// Diagnostics computed for one flow state, shared by the CLI and the C API.
pub struct DiagOutput {
    pub report: Report,
    /// Ring sups of the pointwise tension norm against radius |z|.
    pub rings: Vec<(f64, f64)>,
    /// Per-side leaf asymptotics (empty when the check is disabled).
    pub sides: Vec<SideReport>,
}

/// Ring sups of the tension norm over interior nodes with |z| at least a
/// quarter of the grid half-extent, binned at half the grid spacing.
pub fn tension_rings(grid: &Grid, map: &DiscreteMap) -> Vec<(f64, f64)> {
    let tau = tension_field(grid, map);
    let ext = -grid.x0;
    let w = 0.5 * grid.hx.max(grid.hy);
    let nbins = (1.5 * ext / w).ceil() as usize + 1;
    let mut sup = vec![f64::NEG_INFINITY; nbins];
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let idx = grid.idx(i, j);
            let r = grid.node(i, j).norm();
            if r < 0.25 * ext {
                continue;
            }
            let b = (r / w) as usize;
            if b < nbins {
                let v = tangent_norm(&map.values[idx], tau[idx]);
                sup[b] = sup[b].max(v);
            }
        }
    }
    (0..nbins)
        .filter(|&b| sup[b] > f64::NEG_INFINITY)
        .map(|b| ((b as f64 + 0.5) * w, sup[b]))
        .collect()
}

/// Assemble the configured diagnostic checks for the state `map` at the given
/// global `step`/`t`. `planar` is the converged planar stage output; it is
/// required when the pleated-plane or hull-gauge checks are on, because both
/// compare against the initial map rebuilt from it.
pub fn run_diagnostics(
    prep: &Prepared,
    map: &DiscreteMap,
    planar: Option<&DiscreteMap>,
    step: usize,
    t: f64,
) -> Result<DiagOutput> {
    let cfg = &prep.config;
    let ds = &cfg.diagnostics;
    let mut entries: Vec<ReportEntry> = Vec::new();
    let mut required: Vec<&str> = vec!["sup_tension", "tension_decay"];

    let tau = tension_field(&prep.grid, map);
    let sup = sup_tension(map, &tau);
    entries.push(ReportEntry {
        id: "sup_tension".into(),
        pass: sup <= cfg.flow.tol_tau,
        measured: sup,
        tolerance: cfg.flow.tol_tau,
        detail: format!("step {step} t {t}"),
    });

    let rings = tension_rings(&prep.grid, map);
    let fit = decay_fit(&rings)?;
    entries.push(ReportEntry {
        id: "tension_decay".into(),
        pass: fit.slope < 0.0,
        measured: fit.slope,
        tolerance: 0.0,
        detail: format!("correlation {:.4} over {} rings", fit.correlation, fit.n),
    });

    let initial = match planar {
        Some(pm) if ds.pleated || ds.gauge => {
            Some(build_initial_map(pm, &prep.p0, &prep.p, &prep.decomp, &prep.grid)?.map)
        }
        None if ds.pleated || ds.gauge => {
            return Err(Error::Invalid(
                "pleated/gauge diagnostics need the planar stage output".into(),
            ));
        }
        _ => None,
    };

    if ds.pleated {
        required.push("psi_sup");
        let cocycle = BendingCocycle::new(&prep.p0, &prep.bend_data)?;
        let pl = pleated_field(planar.unwrap(), &cocycle, ds.diagonal_eps)?;
        let m0 = psi_sup(initial.as_ref().unwrap(), &pl);
        let psi = psi_sup(map, &pl);
        let tol = m0 * 1.005 + 1e-12;
        entries.push(ReportEntry {
            id: "psi_sup".into(),
            pass: psi <= tol,
            measured: psi,
            tolerance: tol,
            detail: format!("initial sup {:.6e}, {} flagged nodes", m0, pl.n_flagged),
        });
    }

    if ds.gauge {
        required.push("gauge_sup");
        let g0 = gauge_sup(initial.as_ref().unwrap(), &prep.hull)?;
        let g = gauge_sup(map, &prep.hull)?;
        let tol = g0 + 0.05;
        entries.push(ReportEntry {
            id: "gauge_sup".into(),
            pass: g <= tol,
            measured: g,
            tolerance: tol,
            detail: format!("initial gauge {g0:.6e}"),
        });
    }

    if ds.hopf {
        required.push("hopf_fit");
        let n = prep.p.n();
        let hf = hopf_field(&prep.grid, map, n - 2, &prep.q.zeros(), ds.metric_eps)?;
        let dbar_sup =
            hf.annulus.iter().filter_map(|&i| hf.dbar[i]).fold(0.0, f64::max);
        let pp = pp_of_fit(&hf)?;
        entries.push(ReportEntry {
            id: "hopf_fit".into(),
            pass: hf.fit_rel_residual < 0.05,
            measured: hf.fit_rel_residual,
            tolerance: 0.05,
            detail: format!(
                "dbar sup {:.6e} on {} annulus nodes; principal part {:?}",
                dbar_sup,
                hf.annulus.len(),
                pp.twice_exponents_and_coeffs
            ),
        });
    }

    let mut sides = Vec::new();
    if ds.sides {
        required.push("side_geodesic_fit");
        let geos = side_geodesics(&prep.p)?;
        sides = side_asymptotics(
            &prep.grid,
            map,
            &geos,
            &prep.decomp,
            ds.leaf_height,
            ds.leaf_samples,
        )?;
        let max_fit = sides.iter().map(|r| r.geodesic_fit_residual).fold(0.0, f64::max);
        let max_curv = sides.iter().map(|r| r.max_curvature).fold(0.0, f64::max);
        let tol = 10.0 * prep.grid.hx;
        entries.push(ReportEntry {
            id: "side_geodesic_fit".into(),
            pass: max_fit < tol,
            measured: max_fit,
            tolerance: tol,
            detail: format!("max curvature {:.6e} over {} sides", max_curv, sides.len()),
        });
    }

    let report = assemble_report(&prep.hash, entries, &required)?;
    Ok(DiagOutput { report, rings, sides })
}
