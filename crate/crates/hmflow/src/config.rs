//! Run configuration: JSON schema, validation, and the stable config hash
//! recorded in every artifact.

use crate::error::{Error, Result};
use crate::hyp3::IdealPoint;
use crate::polygon::TwistedIdealPolygon;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Polygon vertex: `[x, y]` or the string `"inf"`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum VertexSpec {
    Inf(String),
    Finite([f64; 2]),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PolygonSpec {
    /// Explicit ideal vertices in ccw order.
    Vertices { vertices: Vec<VertexSpec> },
    /// Shear–bend parameters c_2..c_{n−2} as `[re, im]` pairs; the polygon is
    /// reconstructed with (ξ_0, ξ_1, ξ_2) = (0, 1, ∞).
    Params { params: Vec<[f64; 2]> },
}

/// Hopf differential: explicit ascending coefficients or `"auto"` for
/// z^{n−2} − 1 scaled by the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum QSpec {
    Auto(String),
    Coeffs(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    /// Truncation half-extent: the grid covers [−radius, radius]².
    pub radius: f64,
    /// Nodes per side.
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FlowSpec {
    #[serde(default = "d_cfl")]
    pub c_cfl: f64,
    #[serde(default = "d_tol_tau")]
    pub tol_tau: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
    #[serde(default = "d_z_floor")]
    pub z_floor: f64,
    #[serde(default = "d_series_every")]
    pub series_every: usize,
    #[serde(default = "d_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Step budget per cascade level of the planar pre-flow (same CFL and
    /// tolerance as the main flow).
    #[serde(default = "d_planar_max_steps")]
    pub planar_max_steps: usize,
}

fn d_cfl() -> f64 {
    0.2
}
fn d_tol_tau() -> f64 {
    1e-4
}
fn d_max_steps() -> usize {
    20_000
}
fn d_z_floor() -> f64 {
    1e-8
}
fn d_series_every() -> usize {
    25
}
fn d_checkpoint_every() -> usize {
    500
}
fn d_planar_max_steps() -> usize {
    1_500_000
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            c_cfl: d_cfl(),
            tol_tau: d_tol_tau(),
            max_steps: d_max_steps(),
            z_floor: d_z_floor(),
            series_every: d_series_every(),
            checkpoint_every: d_checkpoint_every(),
            planar_max_steps: d_planar_max_steps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiagSpec {
    #[serde(default = "d_true")]
    pub hopf: bool,
    #[serde(default = "d_true")]
    pub pleated: bool,
    #[serde(default = "d_true")]
    pub gauge: bool,
    #[serde(default = "d_true")]
    pub sides: bool,
    /// Leaf height (chart units) for side asymptotics.
    #[serde(default = "d_leaf")]
    pub leaf_height: f64,
    #[serde(default = "d_leaf_samples")]
    pub leaf_samples: usize,
    /// Flagging distance around diagonal preimages for Ψ.
    #[serde(default = "d_diag_eps")]
    pub diagonal_eps: f64,
    /// Metric smoothing scale around the zeros of q.
    #[serde(default = "d_metric_eps")]
    pub metric_eps: f64,
}

fn d_true() -> bool {
    true
}
fn d_leaf() -> f64 {
    1.0
}
fn d_leaf_samples() -> usize {
    24
}
fn d_diag_eps() -> f64 {
    1e-6
}
fn d_metric_eps() -> f64 {
    0.5
}

impl Default for DiagSpec {
    fn default() -> Self {
        DiagSpec {
            hopf: true,
            pleated: true,
            gauge: true,
            sides: true,
            leaf_height: d_leaf(),
            leaf_samples: d_leaf_samples(),
            diagonal_eps: d_diag_eps(),
            metric_eps: d_metric_eps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub polygon: PolygonSpec,
    pub q: QSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub diagnostics: DiagSpec,
    pub out_dir: String,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(s).map_err(|e| Error::Invalid(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn polygon(&self) -> Result<TwistedIdealPolygon> {
        match &self.polygon {
            PolygonSpec::Vertices { vertices } => {
                let vs = vertices
                    .iter()
                    .map(|v| match v {
                        VertexSpec::Finite([x, y]) => Ok(IdealPoint::finite(*x, *y)),
                        VertexSpec::Inf(s) if s == "inf" => Ok(IdealPoint::Inf),
                        VertexSpec::Inf(s) => {
                            Err(Error::Invalid(format!("unknown vertex token '{s}'")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                TwistedIdealPolygon::new(vs)
            }
            PolygonSpec::Params { params } => {
                let cs: Vec<C64> = params.iter().map(|[r, i]| C64::new(*r, *i)).collect();
                TwistedIdealPolygon::from_params(&cs)
            }
        }
    }

    pub fn q_coeffs(&self) -> Option<Vec<C64>> {
        match &self.q {
            QSpec::Auto(_) => None,
            QSpec::Coeffs(cs) => Some(cs.iter().map(|[r, i]| C64::new(*r, *i)).collect()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.polygon()?;
        let n = p.n();
        match &self.q {
            QSpec::Auto(s) if s != "auto" => {
                return Err(Error::Invalid(format!("q must be \"auto\" or coefficients, got '{s}'")));
            }
            QSpec::Coeffs(cs) => {
                if cs.len() != n - 1 {
                    return Err(Error::Invalid(format!(
                        "q degree must be n−2 = {} for an n = {n} polygon (got degree {})",
                        n - 2,
                        cs.len().saturating_sub(1)
                    )));
                }
                let [re, im] = cs[cs.len() - 1];
                if re == 0.0 && im == 0.0 {
                    return Err(Error::Invalid("q leading coefficient is zero".into()));
                }
            }
            _ => {}
        }
        if !(self.grid.radius > 0.0) {
            return Err(Error::Invalid("grid.radius must be positive".into()));
        }
        if self.grid.n < 9 {
            return Err(Error::Invalid("grid.n must be at least 9".into()));
        }
        let f = &self.flow;
        for (name, v) in [
            ("flow.c_cfl", f.c_cfl),
            ("flow.tol_tau", f.tol_tau),
            ("flow.z_floor", f.z_floor),
        ] {
            if !(v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if f.c_cfl > 1.0 {
            return Err(Error::Invalid("flow.c_cfl must be ≤ 1".into()));
        }
        if f.series_every == 0 || f.checkpoint_every == 0 {
            return Err(Error::Invalid("cadences must be ≥ 1".into()));
        }
        if f.checkpoint_every % f.series_every != 0 {
            return Err(Error::Invalid(
                "flow.checkpoint_every must be a multiple of flow.series_every".into(),
            ));
        }
        if self.out_dir.is_empty() {
            return Err(Error::Invalid("out_dir must be set".into()));
        }
        if !(self.diagnostics.diagonal_eps > 0.0 && self.diagnostics.metric_eps > 0.0) {
            return Err(Error::Invalid("diagnostics tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON serialization (FNV-1a, 64-bit).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }
}
