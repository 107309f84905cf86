//! Polynomial quadratic differentials q(z)dz²: evaluation, zeros, the
//! singular flat 4q-metric and its C² smoothing, the chain decomposition into
//! overlapping half-planes, natural coordinates by branch-tracked integration
//! of 2√q, and principal parts at infinity.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::{PI, TAU};

/// Quintic smoothstep on [0,1]: S(0)=S'(0)=S''(0)=0, S(1)=1, S'(1)=S''(1)=0.
pub fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

pub fn smoothstep5_d1(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

pub fn smoothstep5_d2(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    60.0 * t * (2.0 * t - 1.0) * (t - 1.0)
}

/// Septic smoothstep: one order smoother (θ‴ also vanishes at the endpoints);
/// used for the twin-run uniqueness experiment.
pub fn smoothstep7(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let t4 = t * t * t * t;
    t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
}

pub fn smoothstep7_d1(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    let u = t * (1.0 - t);
    140.0 * u * u * u
}

pub fn smoothstep7_d2(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    let u = t * (1.0 - t);
    420.0 * u * u * (1.0 - 2.0 * t)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct PolyQD {
    /// Ascending coefficients; leading coefficient nonzero.
    pub coeffs: Vec<C64>,
}

impl PolyQD {
    pub fn new(mut coeffs: Vec<C64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last().unwrap().norm() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs.last().unwrap().norm() == 0.0 {
            return Err(Error::Invalid("zero polynomial is not a quadratic differential".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Invalid("non-finite polynomial coefficient".into()));
        }
        Ok(PolyQD { coeffs })
    }

    pub fn constant(c: C64) -> Self {
        PolyQD { coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn eval_deriv(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * z + c * (k as f64);
        }
        acc
    }

    /// q(z + a) as a polynomial (Taylor shift).
    pub fn shifted(&self, a: C64) -> PolyQD {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let (next, cur) = (c[j + 1], c[j]);
                c[j] = cur + a * next;
            }
        }
        PolyQD { coeffs: c }
    }

    /// s·q.
    pub fn scaled(&self, s: f64) -> PolyQD {
        PolyQD { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// All complex zeros (with multiplicity), by Aberth–Ehrlich simultaneous
    /// iteration with a Newton polish.
    pub fn zeros(&self) -> Vec<C64> {
        let d = self.degree();
        if d == 0 {
            return Vec::new();
        }
        let lead = *self.coeffs.last().unwrap();
        let monic: Vec<C64> = self.coeffs.iter().map(|c| c / lead).collect();
        let eval = |z: C64| -> (C64, C64) {
            let mut p = C64::new(0.0, 0.0);
            let mut dp = C64::new(0.0, 0.0);
            for c in monic.iter().rev() {
                dp = dp * z + p;
                p = p * z + c;
            }
            (p, dp)
        };
        let rad = 1.0 + monic.iter().take(d).map(|c| c.norm()).fold(0.0, f64::max);
        let mut roots: Vec<C64> = (0..d)
            .map(|k| C64::from_polar(rad * 0.8, TAU * k as f64 / d as f64 + 0.43))
            .collect();
        let scale = 1.0 + monic.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for _ in 0..300 {
            let mut moved = 0.0f64;
            for k in 0..d {
                let zk = roots[k];
                let (p, dp) = eval(zk);
                if p.norm() < 1e-15 * scale {
                    continue;
                }
                let newton = if dp.norm() > 0.0 { p / dp } else { C64::new(1e-8, 0.0) };
                let mut s = C64::new(0.0, 0.0);
                for (j, rj) in roots.iter().enumerate() {
                    if j != k {
                        s += 1.0 / (zk - rj);
                    }
                }
                let denom = 1.0 - newton * s;
                let corr = if denom.norm() > 1e-14 { newton / denom } else { newton };
                roots[k] = zk - corr;
                moved = moved.max(corr.norm());
            }
            if moved < 1e-14 * (1.0 + rad) {
                break;
            }
        }
        for r in roots.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = eval(*r);
                if dp.norm() > 1e-14 {
                    *r -= p / dp;
                }
            }
        }
        roots
    }

    /// The m+2 horizontal direction angles at ∞, sorted in [0, 2π):
    /// arg(a_m) + (m+2)θ ≡ 0 (mod 2π).
    pub fn horizontal_directions(&self) -> Vec<f64> {
        let m = self.degree();
        let n_dir = m + 2;
        let base = -self.coeffs.last().unwrap().arg() / n_dir as f64;
        let mut out: Vec<f64> = (0..n_dir)
            .map(|k| (base + TAU * k as f64 / n_dir as f64).rem_euclid(TAU))
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    /// Non-integrable tail of √q at ∞ (terms of exponent ≥ −1).
    pub fn principal_part(&self) -> PrincipalPart {
        let m = self.degree();
        let lead = *self.coeffs.last().unwrap();
        // √q = √a_m z^{m/2} Σ s_j z^{−j},  with s from the sqrt power series of
        // 1 + b_1/z + … + b_m/z^m, b_j = a_{m−j}/a_m.
        let jmax = (m + 2) / 2; // largest j with m/2 − j ≥ −1
        let mut s = vec![C64::new(0.0, 0.0); jmax + 1];
        s[0] = C64::new(1.0, 0.0);
        for k in 1..=jmax {
            let b = if k <= m { self.coeffs[m - k] / lead } else { C64::new(0.0, 0.0) };
            let mut acc = b;
            for i in 1..k {
                acc -= s[i] * s[k - i];
            }
            s[k] = acc / 2.0;
        }
        let sq = lead.sqrt();
        let terms = (0..=jmax)
            .map(|j| (m as i32 - 2 * j as i32, sq * s[j]))
            .collect();
        PrincipalPart { twice_exponents_and_coeffs: terms }
    }
}

/// Principal part of √q at ∞: coefficients of z^{e/2} for the stored twice-
/// exponents e ≥ −2, defined up to a global sign (branch of the root).
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPart {
    /// (2·exponent, coefficient), descending exponents.
    pub twice_exponents_and_coeffs: Vec<(i32, C64)>,
}

impl PrincipalPart {
    /// Coefficient-wise max distance, minimized over the global branch sign.
    pub fn distance(&self, other: &PrincipalPart) -> f64 {
        let a = &self.twice_exponents_and_coeffs;
        let b = &other.twice_exponents_and_coeffs;
        let exps: std::collections::BTreeSet<i32> =
            a.iter().chain(b.iter()).map(|(e, _)| *e).collect();
        let get = |v: &Vec<(i32, C64)>, e: i32| {
            v.iter().find(|(ee, _)| *ee == e).map(|(_, c)| *c).unwrap_or(C64::new(0.0, 0.0))
        };
        let mut d_plus = 0.0f64;
        let mut d_minus = 0.0f64;
        for e in exps {
            let ca = get(a, e);
            let cb = get(b, e);
            d_plus = d_plus.max((ca - cb).norm());
            d_minus = d_minus.max((ca + cb).norm());
        }
        d_plus.min(d_minus)
    }

    pub fn equal(&self, other: &PrincipalPart, tol: f64) -> bool {
        self.distance(other) <= tol
    }
}

// ---------------------------------------------------------------------------
// branch-tracked continuation of √q and path integration of ξ = ∫2√q

struct SqrtCont<'a> {
    q: &'a PolyQD,
    zeros: &'a [C64],
    /// Typical magnitude of √q near the anchor circle; absolute floor for
    /// branch decisions (the sign of a vanishing value is irrelevant).
    wscale: f64,
}

impl<'a> SqrtCont<'a> {
    fn new(q: &'a PolyQD, zeros: &'a [C64]) -> Self {
        let r0 = 2.0 * zeros.iter().map(|z| z.norm()).fold(0.0, f64::max) + 2.0;
        let bound: f64 = q
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * r0.powi(k as i32))
            .sum();
        SqrtCont { q, zeros, wscale: bound.sqrt().max(1e-150) }
    }
    /// Minimal distance from the segment [a,b] to the zero set.
    fn seg_clearance(&self, a: C64, b: C64) -> f64 {
        let mut best = f64::INFINITY;
        let d = b - a;
        let len2 = d.norm_sqr();
        for z in self.zeros {
            let t = if len2 > 0.0 { ((z - a).re * d.re + (z - a).im * d.im) / len2 } else { 0.0 };
            let t = t.clamp(0.0, 1.0);
            best = best.min((a + d * t - z).norm());
        }
        best
    }

    /// Continue √q from (z0, w0) to z1 along the straight segment.
    fn cont(&self, z0: C64, w0: C64, z1: C64, depth: usize) -> Result<C64> {
        let w = self.q.eval(z1).sqrt();
        let pick = if (w - w0).norm() <= (w + w0).norm() { w } else { -w };
        // Unambiguous if the value did not swing too far.
        let swing = (pick - w0).norm();
        // Accept small relative swings, or any swing when both values are
        // negligible (near a zero the branch sign carries no information).
        if swing <= 0.5 * (pick.norm() + w0.norm()) || pick.norm() + w0.norm() <= 1e-7 * self.wscale
        {
            return Ok(pick);
        }
        if depth >= 80 {
            return Err(Error::Numerical(format!(
                "branch tracking failed on segment {z0} -> {z1}"
            )));
        }
        let mid = (z0 + z1) / 2.0;
        let wm = self.cont(z0, w0, mid, depth + 1)?;
        self.cont(mid, wm, z1, depth + 1)
    }

    /// ∫ 2√q dz along the segment, branch continued from w0 at z0.
    /// Returns (integral, branch value at z1).
    fn integrate_segment(&self, z0: C64, w0: C64, z1: C64) -> Result<(C64, C64)> {
        let mut n = 8usize;
        let mut prev: Option<C64> = None;
        loop {
            let dz = (z1 - z0) / n as f64;
            let mut w_prev = w0;
            let mut z_prev = z0;
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=n {
                let z_next = if k == n { z1 } else { z0 + dz * k as f64 };
                let z_mid = (z_prev + z_next) / 2.0;
                let w_mid = self.cont(z_prev, w_prev, z_mid, 0)?;
                let w_next = self.cont(z_mid, w_mid, z_next, 0)?;
                // Simpson on the sub-segment.
                acc += (z_next - z_prev) * (w_prev + 4.0 * w_mid + w_next) / 6.0;
                w_prev = w_next;
                z_prev = z_next;
            }
            let integral = acc * 2.0;
            if let Some(p) = prev {
                if (integral - p).norm() <= 1e-11 * (1.0 + integral.norm()) || n >= 1 << 13 {
                    return Ok((integral, w_prev));
                }
            }
            prev = Some(integral);
            n *= 2;
        }
    }

    fn integrate_polyline(&self, pts: &[C64], w0: C64) -> Result<(C64, C64)> {
        let mut acc = C64::new(0.0, 0.0);
        let mut w = w0;
        for seg in pts.windows(2) {
            let (i, wn) = self.integrate_segment(seg[0], w, seg[1])?;
            acc += i;
            w = wn;
        }
        Ok((acc, w))
    }
}

// ---------------------------------------------------------------------------
// half-plane charts and the chain decomposition

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    /// Bounded by a horizontal leaf {Im η = offset}; collapses to a side.
    Horizontal,
    /// Bounded by a vertical leaf {Re η = offset}; maps into a cusp.
    Vertical,
}

/// One half-plane of the chain, described through the natural coordinate
/// η(z) = sign·(ξ(z) − ξ(anchor)) where ξ = ∫2√q along branch-tracked paths.
/// Level sets of Im η are horizontal leaves and of Re η vertical leaves,
/// exactly; |dη| is the 4q-metric.
#[derive(Debug, Clone)]
pub struct HalfPlaneChart {
    pub kind: ChartKind,
    pub index: usize,
    /// Asymptotic direction of the central ray.
    pub center_angle: f64,
    pub anchor: C64,
    pub w_anchor: C64,
    pub xi_anchor: C64,
    pub sign: f64,
    /// The bounding leaf: chart = {Im η ≥ offset} (horizontal) or
    /// {Re η ≥ offset} (vertical).
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub q: PolyQD,
    pub zeros: Vec<C64>,
    /// Anchor radius: all anchors sit on the circle |z| = r0 beyond the zeros.
    pub r0: f64,
    /// Flat distance from the anchor level to the bounding leaves.
    pub radius: f64,
    /// 2(m+2) charts in cyclic order C_0, H_0, C_1, H_1, …
    pub charts: Vec<HalfPlaneChart>,
}

impl Decomposition {
    /// η for chart k at z, by branch-tracked integration along
    /// anchor → arc → radial → z.
    pub fn eta(&self, k: usize, z: C64) -> Result<C64> {
        let ch = &self.charts[k];
        let cont = SqrtCont::new(&self.q, &self.zeros);
        let path = self.path_from_anchor(ch, z)?;
        let (xi_rel, _) = cont.integrate_polyline(&path, ch.w_anchor)?;
        Ok((xi_rel) * ch.sign)
    }

    /// Chart coordinates (x along the bounding leaf, y ≥ 0 into the chart).
    pub fn chart_coords(&self, k: usize, z: C64) -> Result<(f64, f64)> {
        let eta = self.eta(k, z)?;
        Ok(match self.charts[k].kind {
            ChartKind::Horizontal => (eta.re, eta.im - self.charts[k].offset),
            ChartKind::Vertical => (eta.im, eta.re - self.charts[k].offset),
        })
    }

    /// `chart_coords`, but when branch tracking cannot reach z (grid nodes
    /// may sit arbitrarily close to a zero) the point is nudged radially away
    /// from the nearest zero. Callers that only need a smooth nearby value
    /// (initial-guess sampling) use this.
    pub fn chart_coords_nudged(&self, k: usize, z: C64) -> Result<(f64, f64)> {
        if let Ok(v) = self.chart_coords(k, z) {
            return Ok(v);
        }
        let z0 = self
            .zeros
            .iter()
            .min_by(|a, b| (z - *a).norm().total_cmp(&(z - *b).norm()))
            .copied()
            .unwrap_or_default();
        let d = (z - z0).norm();
        let dir = if d < 1e-12 {
            C64::from_polar(1.0, self.charts[k].center_angle)
        } else {
            (z - z0) / d
        };
        self.chart_coords(k, z0 + dir * (0.05 * self.r0))
    }

    pub fn contains(&self, k: usize, z: C64) -> Result<bool> {
        Ok(self.chart_coords(k, z)?.1 >= 0.0)
    }

    /// Invert the chart map by Newton, starting from an asymptotic guess.
    pub fn from_chart(&self, k: usize, x: f64, y: f64) -> Result<C64> {
        let ch = &self.charts[k];
        let eta_target = match ch.kind {
            ChartKind::Horizontal => C64::new(x, y + ch.offset),
            ChartKind::Vertical => C64::new(y + ch.offset, x),
        };
        // Asymptotic inversion of ξ ≈ (2√a_m/κ) z^κ against the chart branch.
        let m = self.q.degree() as f64;
        let kappa = (m + 2.0) / 2.0;
        let lead = self.q.coeffs.last().unwrap();
        let xi_abs = eta_target.norm().max(1.0);
        let r_guess = (kappa * xi_abs / (2.0 * lead.norm().sqrt())).powf(1.0 / kappa);
        let mut z = C64::from_polar(r_guess.max(self.r0), ch.center_angle);
        for _ in 0..60 {
            let eta = self.eta(k, z)?;
            let resid = eta_target - eta;
            if resid.norm() < 1e-9 * (1.0 + eta_target.norm()) {
                return Ok(z);
            }
            let dz = resid / (ch.sign * 2.0 * self.branch_at(k, z)?);
            // Damped Newton for robustness far from the guess.
            let step = if dz.norm() > 0.5 * z.norm().max(self.r0) {
                dz * (0.5 * z.norm().max(self.r0) / dz.norm())
            } else {
                dz
            };
            z += step;
        }
        Err(Error::Numerical("chart inversion did not converge".into()))
    }

    /// The continued branch of √q at z along the chart's canonical path.
    pub fn branch_at(&self, k: usize, z: C64) -> Result<C64> {
        let ch = &self.charts[k];
        let cont = SqrtCont::new(&self.q, &self.zeros);
        let path = self.path_from_anchor(ch, z)?;
        let mut w = ch.w_anchor;
        for seg in path.windows(2) {
            w = cont.cont(seg[0], w, seg[1], 0)?;
        }
        Ok(w)
    }

    /// Polyline from the chart anchor to z: arc at radius r0 sweeping the
    /// short way, then radially, nudging the leave-angle if the radial leg
    /// would pass too close to a zero.
    fn path_from_anchor(&self, ch: &HalfPlaneChart, z: C64) -> Result<Vec<C64>> {
        let cont = SqrtCont::new(&self.q, &self.zeros);
        let dmin = 0.02 * self.r0;
        let target_angle = z.arg();
        let mut rel = (target_angle - ch.center_angle).rem_euclid(TAU);
        if rel > PI {
            rel -= TAU;
        }
        let mut chosen: Option<f64> = None;
        for attempt in 0..21 {
            let step = 0.06 * ((attempt + 1) / 2) as f64 * if attempt % 2 == 1 { 1.0 } else { -1.0 };
            let psi = ch.center_angle + rel + step;
            let exit = C64::from_polar(self.r0, psi);
            if cont.seg_clearance(exit, z).max((z - exit).norm().min(f64::INFINITY)) >= 0.0 {
                let clear = cont.seg_clearance(exit, z);
                let endpoint_dist = self.zeros.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
                if clear >= dmin.min(endpoint_dist) || clear >= dmin {
                    chosen = Some(psi);
                    break;
                }
            }
        }
        let psi = chosen.ok_or_else(|| {
            Error::Numerical(format!("no clear path from anchor to {z} (zeros in the way)"))
        })?;
        let mut path = vec![ch.anchor];
        let sweep = psi - ch.center_angle;
        let n_arc = (sweep.abs() / 0.1).ceil() as usize;
        for j in 1..=n_arc.max(1) {
            let a = ch.center_angle + sweep * j as f64 / n_arc.max(1) as f64;
            path.push(C64::from_polar(self.r0, a));
        }
        path.push(z);
        Ok(path)
    }

    /// Point on the chart's central ray where the depth coordinate equals the
    /// chart offset (the base point of the bounding leaf).
    pub fn leaf_base_point(&self, k: usize) -> Result<C64> {
        let ch = &self.charts[k];
        let depth = |r: f64| -> Result<f64> {
            let z = C64::from_polar(r, ch.center_angle);
            Ok(self.chart_coords(k, z)?.1)
        };
        let mut lo = self.r0;
        let mut hi = self.r0 * 1.5;
        let mut d_hi = depth(hi)?;
        let mut guard = 0;
        while d_hi < 0.0 {
            hi *= 1.5;
            d_hi = depth(hi)?;
            guard += 1;
            if guard > 60 {
                return Err(Error::Numerical("leaf base point out of range".into()));
            }
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if depth(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(C64::from_polar(0.5 * (lo + hi), ch.center_angle))
    }
}

/// Flat 4q-arclength of the straight ray segment between two radii.
pub fn flat_arclength_on_ray(q: &PolyQD, angle: f64, r_from: f64, r_to: f64) -> f64 {
    let n = 512;
    let mut acc = 0.0;
    let dr = (r_to - r_from) / n as f64;
    for k in 0..n {
        let r = r_from + dr * (k as f64 + 0.5);
        acc += 2.0 * q.eval(C64::from_polar(r, angle)).norm().sqrt() * dr;
    }
    acc
}

/// Build one natural chart centered on the given ray (vertical kind on
/// horizontal rays, horizontal kind on the midpoint rays).
pub fn natural_chart(q: &PolyQD, ray_index: usize, radius: f64) -> Result<HalfPlaneChart> {
    let d = decompose(q.clone(), radius)?;
    d.charts
        .into_iter()
        .find(|c| c.kind == ChartKind::Vertical && c.index == ray_index)
        .ok_or_else(|| Error::Invalid("ray index out of range".into()))
}

/// The cyclically ordered chain {C_0, H_0, …, C_{m+1}, H_{m+1}} of 2(m+2)
/// overlapping half-planes; consecutive charts overlap in quarter-planes.
pub fn decompose(q: PolyQD, radius: f64) -> Result<Decomposition> {
    if radius <= 0.0 {
        return Err(Error::Invalid("decomposition radius must be positive".into()));
    }
    let zeros = q.zeros();
    let maxz = zeros.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r0 = 2.0 * maxz + 2.0;
    let dirs = q.horizontal_directions();
    let n_dir = dirs.len();
    let half_sector = PI / n_dir as f64;

    let cont = SqrtCont::new(&q, &zeros);
    let theta0 = dirs[0];
    let base = C64::from_polar(r0, theta0);
    let mut w_base = q.eval(base).sqrt();
    if (w_base * C64::from_polar(1.0, theta0)).re < 0.0 {
        w_base = -w_base;
    }

    let mut charts = Vec::with_capacity(2 * n_dir);
    // Walk the anchor circle once, accumulating ξ and the branch.
    let mut z_cur = base;
    let mut w_cur = w_base;
    let mut xi_cur = C64::new(0.0, 0.0);
    let advance = |to_angle: f64, z_cur: &mut C64, w_cur: &mut C64, xi_cur: &mut C64| -> Result<()> {
        let from_angle = z_cur.arg();
        let mut sweep = (to_angle - from_angle).rem_euclid(TAU);
        if sweep > PI {
            sweep -= TAU;
        }
        let n_arc = ((sweep.abs() / 0.08).ceil() as usize).max(1);
        let mut pts = vec![*z_cur];
        for j in 1..=n_arc {
            pts.push(C64::from_polar(r0, from_angle + sweep * j as f64 / n_arc as f64));
        }
        let (dxi, wn) = cont.integrate_polyline(&pts, *w_cur)?;
        *xi_cur += dxi;
        *w_cur = wn;
        *z_cur = *pts.last().unwrap();
        Ok(())
    };

    for k in 0..n_dir {
        // Vertical chart on the horizontal ray θ_k.
        advance(dirs[k], &mut z_cur, &mut w_cur, &mut xi_cur)?;
        let u = 2.0 * w_cur * C64::from_polar(1.0, dirs[k]);
        charts.push(HalfPlaneChart {
            kind: ChartKind::Vertical,
            index: k,
            center_angle: dirs[k],
            anchor: z_cur,
            w_anchor: w_cur,
            xi_anchor: xi_cur,
            sign: if u.re >= 0.0 { 1.0 } else { -1.0 },
            offset: radius,
        });
        // Horizontal chart on the midpoint ray ψ_k.
        let psi = dirs[k] + half_sector;
        advance(psi, &mut z_cur, &mut w_cur, &mut xi_cur)?;
        let u = 2.0 * w_cur * C64::from_polar(1.0, psi);
        charts.push(HalfPlaneChart {
            kind: ChartKind::Horizontal,
            index: k,
            center_angle: psi,
            anchor: z_cur,
            w_anchor: w_cur,
            xi_anchor: xi_cur,
            sign: if u.im >= 0.0 { 1.0 } else { -1.0 },
            offset: radius,
        });
    }

    Ok(Decomposition { q, zeros, r0, radius, charts })
}

// ---------------------------------------------------------------------------
// smoothed conformal metric

/// σ|dz|²: equal to |4q| outside ε-disks around the zeros, radially blended
/// inside them against a positive cap (C² across the seam, positive at the
/// zeros themselves).
#[derive(Debug, Clone)]
pub struct DomainMetric {
    pub q: PolyQD,
    pub centers: Vec<C64>,
    pub eps: f64,
    caps: Vec<f64>,
}

pub fn smooth_metric(q: &PolyQD, eps: f64) -> Result<DomainMetric> {
    if eps <= 0.0 {
        return Err(Error::Invalid("smoothing radius must be positive".into()));
    }
    let mut centers: Vec<C64> = Vec::new();
    for z in q.zeros() {
        // Numerically computed multiple zeros spread over ~scale·eps^(1/mult);
        // cluster them into one smoothing disk.
        if !centers.iter().any(|c| (c - z).norm() < 1e-5 * (1.0 + z.norm())) {
            centers.push(z);
        }
    }
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            if (centers[i] - centers[j]).norm() <= 2.0 * eps {
                return Err(Error::Invalid(format!(
                    "smoothing disks overlap: zeros {} and {} within 2ε",
                    centers[i], centers[j]
                )));
            }
        }
    }
    let caps = centers
        .iter()
        .map(|c| {
            let n = 64;
            let mut acc = 0.0;
            for k in 0..n {
                let z = c + C64::from_polar(eps, TAU * k as f64 / n as f64);
                acc += 4.0 * q.eval(z).norm();
            }
            acc / n as f64
        })
        .collect();
    Ok(DomainMetric { q: q.clone(), centers, eps, caps })
}

impl DomainMetric {
    pub fn sigma(&self, z: C64) -> f64 {
        let flat = 4.0 * self.q.eval(z).norm();
        for (c, cap) in self.centers.iter().zip(&self.caps) {
            let r = (z - c).norm();
            if r < self.eps {
                let s = smoothstep5(r / self.eps);
                return (1.0 - s) * cap + s * flat;
            }
        }
        flat
    }
}
