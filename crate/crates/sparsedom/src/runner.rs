//! Deterministic experiment runner: seeded input generation, engine
//! invocation, JSON reports and CSV curves.
//!
//! All randomness flows through the config's seed list and the SplitMix64
//! generator; iteration orders are fixed, maps are sorted, and reports carry
//! no timing, so identical configs produce byte-identical outputs. Reports are
//! written even when assertions fail; the process exit code is 0 iff every
//! assertion in the run passed.

use crate::dyadic::{parse_rational, rational_string, DyadicCube, Rational, RootGeometry};
use crate::engine::{build_sparse_bilinear, build_sparse_pointwise};
use crate::family::{
    canonical_family, check_ellr, check_majorization, CanonicalKind,
    CheckBudget, CubeFamily, OperatorFamily, SparseParams,
};
use crate::grid::{DiscreteMeasure, GridFunction, Weight};
use crate::poincare::{
    poincare_sparse, verify_self_improve, ImproveMode, NormSpec, SmallnessFunctional,
};
use crate::rng::SplitMix64;
use crate::square::{kernel_validate, square_sparse, HormanderKernel};
use crate::sums::{good_lambda_sums, potential, smallness_constant, sum_sparse, CubeCoefficients};
use crate::tent::{
    tent_good_lambda, tent_sparse, AmbientGrid, GoodLambdaRow, HalfSpaceFunction, TentAnalysis,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {err}")]
    Io { path: String, err: String },
    #[error("{0}")]
    Other(String),
}

impl From<serde_json::Error> for RunnerError {
    fn from(e: serde_json::Error) -> Self {
        RunnerError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunnerError + '_ {
    move |e| RunnerError::Io { path: path.display().to_string(), err: e.to_string() }
}

/// Experiment kind, matching the CLI subcommand names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifySparse,
    Bilinear,
    EllrCheck,
    Poincare,
    Tent,
    Square,
    Potential,
    GoodlambdaTent,
    GoodlambdaSums,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub depth: u32,
    #[serde(default = "default_side")]
    pub side: String,
    #[serde(default)]
    pub origin: Option<Vec<String>>,
}

fn default_side() -> String {
    "1".to_string()
}

impl GeometryConfig {
    pub fn build(&self) -> Result<Arc<RootGeometry>, RunnerError> {
        let side = parse_rational(&self.side).map_err(|e| RunnerError::Config(e.to_string()))?;
        let origin = match &self.origin {
            None => vec![Rational::from_integer(0); self.n],
            Some(o) => o
                .iter()
                .map(|s| parse_rational(s).map_err(|e| RunnerError::Config(e.to_string())))
                .collect::<Result<_, _>>()?,
        };
        RootGeometry::new(self.n, self.depth, side, origin)
            .map(Arc::new)
            .map_err(|e| RunnerError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// canonical | operator | tent | square | poincare | dyadic-sums
    pub kind: String,
    /// canonical maps: restrict | mean-center | window-center | local-max
    #[serde(default)]
    pub map: Option<String>,
    /// operator kinds: identity | average | moving-average
    #[serde(default)]
    pub operator: Option<String>,
    /// fixed scale for the averaging operator
    #[serde(default)]
    pub op_scale: Option<u32>,
    /// localization factor alpha >= 1
    #[serde(default)]
    pub alpha: Option<f64>,
    /// polynomial degree for the poincare family
    #[serde(default)]
    pub m: Option<u32>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            kind: "canonical".into(),
            map: None,
            operator: None,
            op_scale: None,
            alpha: None,
            m: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_etas")]
    pub etas: Vec<String>,
    #[serde(default = "default_one")]
    pub r: f64,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub m: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_one")]
    pub delta: f64,
    #[serde(default = "default_one")]
    pub s: f64,
    #[serde(default = "default_one")]
    pub p: f64,
    #[serde(default = "default_one")]
    pub alpha: f64,
    #[serde(default = "default_quantiles")]
    pub lambda_quantiles: Vec<f64>,
    #[serde(default = "default_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_grid")]
    pub eps_grid: Vec<f64>,
    /// exhaustive | sampled (chain checker budget)
    #[serde(default)]
    pub budget: Option<String>,
    /// poincare mode: pointwise | mq | ratio
    #[serde(default)]
    pub mode: Option<String>,
    /// poincare functional: oscillation | power | user-table
    #[serde(default)]
    pub functional: Option<String>,
    /// weight input file for poincare
    #[serde(default)]
    pub weight: Option<String>,
}

fn default_etas() -> Vec<String> {
    vec!["1/2".into()]
}
fn default_one() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.5
}
fn default_quantiles() -> Vec<f64> {
    vec![0.5, 0.75, 0.9]
}
fn default_grid() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

impl Default for ParamsConfig {
    fn default() -> Self {
        serde_json::from_value(json!({})).unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// uniform | spiky | smooth | measure | weight | file
    pub kind: String,
    #[serde(default)]
    pub atoms: Option<usize>,
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default)]
    pub floor: Option<f64>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    #[serde(default)]
    pub density: Option<f64>,
    #[serde(default)]
    pub path: Option<String>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            kind: "smooth".into(),
            atoms: None,
            power: None,
            floor: None,
            lo: None,
            hi: None,
            density: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub input: InputConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, RunnerError> {
        Ok(serde_json::from_str(s)?)
    }
}

// ---------------------------------------------------------------------------
// seeded input generation

/// Generate a grid function from an input spec (uniform / spiky / smooth).
pub fn generate_grid(
    geom: &Arc<RootGeometry>,
    spec: &InputConfig,
    seed: u64,
) -> Result<GridFunction, RunnerError> {
    let mut rng = SplitMix64::new(seed);
    let n_leaves = geom.total_leaves();
    let values = match spec.kind.as_str() {
        "uniform" => {
            let lo = spec.lo.unwrap_or(-1.0);
            let hi = spec.hi.unwrap_or(1.0);
            (0..n_leaves).map(|_| rng.range_f64(lo, hi)).collect()
        }
        "spiky" => {
            let k = spec.atoms.unwrap_or(3).min(n_leaves);
            let mut v = vec![0.0; n_leaves];
            for l in rng.distinct(k, n_leaves) {
                v[l] = rng.range_f64(0.5, 2.0) * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            }
            v
        }
        "smooth" => {
            // three low-frequency cosines with seeded integer wave vectors
            let mut waves = Vec::new();
            for _ in 0..3 {
                let k: Vec<f64> = (0..geom.n).map(|_| (1 + rng.below(3)) as f64).collect();
                let amp = rng.range_f64(0.3, 1.0);
                let phase = rng.range_f64(0.0, 1.0);
                waves.push((k, amp, phase));
            }
            (0..n_leaves)
                .map(|l| {
                    let x = geom.leaf_center(l);
                    waves
                        .iter()
                        .map(|(k, amp, phase)| {
                            let dot: f64 = x.iter().zip(k).map(|(a, b)| a * b).sum();
                            amp * (2.0 * std::f64::consts::PI * (dot + phase)).cos()
                        })
                        .sum()
                })
                .collect()
        }
        "file" => {
            let path = spec.path.as_deref().ok_or_else(|| {
                RunnerError::Config("input kind 'file' requires a path".into())
            })?;
            return load_grid(Path::new(path));
        }
        other => return Err(RunnerError::Config(format!("unknown grid input kind `{other}`"))),
    };
    GridFunction::new(geom.clone(), values).map_err(|e| RunnerError::Config(e.to_string()))
}

/// Generate a nonnegative measure (atoms by default).
pub fn generate_measure(
    geom: &Arc<RootGeometry>,
    spec: &InputConfig,
    seed: u64,
) -> Result<DiscreteMeasure, RunnerError> {
    if spec.kind == "file" {
        let path = spec.path.as_deref().ok_or_else(|| {
            RunnerError::Config("input kind 'file' requires a path".into())
        })?;
        return load_measure(Path::new(path));
    }
    let mut rng = SplitMix64::new(seed);
    let n_leaves = geom.total_leaves();
    let masses = match spec.kind.as_str() {
        "measure" | "spiky" => {
            let k = spec.atoms.unwrap_or(1).min(n_leaves);
            let mut v = vec![0.0; n_leaves];
            for l in rng.distinct(k, n_leaves) {
                v[l] = rng.range_f64(0.5, 2.0);
            }
            v
        }
        "uniform" => (0..n_leaves).map(|_| rng.next_f64()).collect(),
        other => return Err(RunnerError::Config(format!("unknown measure kind `{other}`"))),
    };
    DiscreteMeasure::new(geom.clone(), masses).map_err(|e| RunnerError::Config(e.to_string()))
}

/// Generate a strictly positive weight `w(x) = max(|x - x0|^a, floor)`.
pub fn generate_weight(
    geom: &Arc<RootGeometry>,
    spec: &InputConfig,
    seed: u64,
) -> Result<Weight, RunnerError> {
    if spec.kind == "file" {
        let path = spec.path.as_deref().ok_or_else(|| {
            RunnerError::Config("input kind 'file' requires a path".into())
        })?;
        return Weight::new(load_grid(Path::new(path))?)
            .map_err(|e| RunnerError::Config(e.to_string()));
    }
    let mut rng = SplitMix64::new(seed);
    let a = spec.power.unwrap_or(0.5);
    let floor = spec.floor.unwrap_or(1e-3);
    let x0 = geom.leaf_center(rng.below(geom.total_leaves()));
    let f = GridFunction::from_centers(geom.clone(), |x| {
        let d: f64 = x.iter().zip(&x0).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        d.powf(a).max(floor)
    });
    Weight::new(f).map_err(|e| RunnerError::Config(e.to_string()))
}

/// Seeded half-space data: per band, cells carry a value with the given
/// density (default 0.3).
pub fn generate_halfspace(
    geom: &Arc<RootGeometry>,
    spec: &InputConfig,
    seed: u64,
) -> Result<HalfSpaceFunction, RunnerError> {
    if spec.kind == "file" {
        let path = spec.path.as_deref().ok_or_else(|| {
            RunnerError::Config("input kind 'file' requires a path".into())
        })?;
        return load_halfspace(Path::new(path));
    }
    let mut rng = SplitMix64::new(seed);
    let grid = AmbientGrid { analysis: geom.clone() };
    let density = spec.density.unwrap_or(0.3);
    let values: Vec<Vec<f64>> = (0..geom.depth)
        .map(|_| {
            (0..grid.total_cells())
                .map(|_| if rng.next_f64() < density { rng.range_f64(-1.0, 1.0) } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(HalfSpaceFunction::new(geom.clone(), values))
}

/// Seeded coefficients with hierarchical support (every supported cube's
/// ancestors are supported), so the smallness constant is finite.
pub fn generate_coefficients(geom: &Arc<RootGeometry>, seed: u64) -> CubeCoefficients {
    let mut rng = SplitMix64::new(seed);
    let root = geom.root_cube();
    let mut alpha = CubeCoefficients::new(geom.clone(), root);
    alpha.set(root, rng.range_f64(0.5, 1.0));
    for _ in 0..(2 * geom.depth as usize) {
        let leaf = rng.below(geom.total_leaves());
        let gen = 1 + rng.below(geom.depth as usize) as u32;
        let cube = DyadicCube { gen: geom.depth, idx: geom.leaf_coords(leaf) }.ancestor(gen);
        for g in 0..=gen {
            let anc = cube.ancestor(g);
            if alpha.get(&anc) == 0.0 {
                alpha.set(anc, rng.range_f64(0.05, 0.5));
            }
        }
    }
    alpha
}

// ---------------------------------------------------------------------------
// file formats

fn geometry_header(geom: &RootGeometry) -> Value {
    json!({
        "n": geom.n,
        "L": geom.depth,
        "side": rational_string(geom.side),
        "origin": geom.origin.iter().map(|&o| rational_string(o)).collect::<Vec<_>>(),
    })
}

fn parse_geometry_header(v: &Value) -> Result<Arc<RootGeometry>, RunnerError> {
    let bad = |m: &str| RunnerError::Config(format!("bad header: {m}"));
    let n = v["n"].as_u64().ok_or_else(|| bad("n"))? as usize;
    let depth = v["L"].as_u64().ok_or_else(|| bad("L"))? as u32;
    let side = parse_rational(v["side"].as_str().ok_or_else(|| bad("side"))?)
        .map_err(|e| RunnerError::Config(e.to_string()))?;
    let origin: Vec<Rational> = v["origin"]
        .as_array()
        .ok_or_else(|| bad("origin"))?
        .iter()
        .map(|s| {
            parse_rational(s.as_str().unwrap_or("0"))
                .map_err(|e| RunnerError::Config(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    RootGeometry::new(n, depth, side, origin)
        .map(Arc::new)
        .map_err(|e| RunnerError::Config(e.to_string()))
}

const BIN_MAGIC: &[u8] = b"SDGF1\n";

/// Save a grid function: `.json` (header + values array) or `.bin`
/// (magic, header line, then little-endian f64 values).
pub fn save_grid(f: &GridFunction, path: &Path) -> Result<(), RunnerError> {
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(BIN_MAGIC);
        bytes.extend_from_slice(geometry_header(&f.geom).to_string().as_bytes());
        bytes.push(b'\n');
        for v in &f.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes).map_err(io_err(path))
    } else {
        let mut doc = geometry_header(&f.geom);
        doc["values"] = json!(f.values);
        fs::write(path, serde_json::to_string(&doc)?).map_err(io_err(path))
    }
}

pub fn load_grid(path: &Path) -> Result<GridFunction, RunnerError> {
    if path.extension().map(|e| e == "bin").unwrap_or(false) {
        let bytes = fs::read(path).map_err(io_err(path))?;
        if !bytes.starts_with(BIN_MAGIC) {
            return Err(RunnerError::Config("bad binary magic".into()));
        }
        let rest = &bytes[BIN_MAGIC.len()..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| RunnerError::Config("missing header line".into()))?;
        let header: Value = serde_json::from_slice(&rest[..nl])?;
        let geom = parse_geometry_header(&header)?;
        let payload = &rest[nl + 1..];
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridFunction::new(geom, values).map_err(|e| RunnerError::Config(e.to_string()))
    } else {
        let doc: Value = serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?;
        let geom = parse_geometry_header(&doc)?;
        let values: Vec<f64> = serde_json::from_value(doc["values"].clone())?;
        GridFunction::new(geom, values).map_err(|e| RunnerError::Config(e.to_string()))
    }
}

pub fn save_measure(m: &DiscreteMeasure, path: &Path) -> Result<(), RunnerError> {
    let mut doc = geometry_header(&m.geom);
    doc["masses"] = json!(m.masses);
    fs::write(path, serde_json::to_string(&doc)?).map_err(io_err(path))
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure, RunnerError> {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?;
    let geom = parse_geometry_header(&doc)?;
    let masses: Vec<f64> = serde_json::from_value(doc["masses"].clone())?;
    DiscreteMeasure::new(geom, masses).map_err(|e| RunnerError::Config(e.to_string()))
}

pub fn save_halfspace(h: &HalfSpaceFunction, path: &Path) -> Result<(), RunnerError> {
    let mut doc = geometry_header(&h.grid.analysis);
    doc["bands"] = json!(h.values);
    fs::write(path, serde_json::to_string(&doc)?).map_err(io_err(path))
}

pub fn load_halfspace(path: &Path) -> Result<HalfSpaceFunction, RunnerError> {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?;
    let geom = parse_geometry_header(&doc)?;
    let values: Vec<Vec<f64>> = serde_json::from_value(doc["bands"].clone())?;
    Ok(HalfSpaceFunction::new(geom, values))
}

/// Coefficients serialize as a JSON list of (cube address, value).
pub fn save_coefficients(c: &CubeCoefficients, path: &Path) -> Result<(), RunnerError> {
    let mut doc = geometry_header(&c.geom);
    doc["root"] = json!(c.root.address(c.geom.n));
    doc["coeffs"] = json!(c
        .coeffs
        .iter()
        .map(|(cube, v)| json!([cube.address(c.geom.n), v]))
        .collect::<Vec<_>>());
    fs::write(path, serde_json::to_string(&doc)?).map_err(io_err(path))
}

pub fn load_coefficients(path: &Path) -> Result<CubeCoefficients, RunnerError> {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?;
    let geom = parse_geometry_header(&doc)?;
    let root = DyadicCube::parse_address(&geom, doc["root"].as_str().unwrap_or("0:0"))
        .map_err(|e| RunnerError::Config(e.to_string()))?;
    let mut out = CubeCoefficients::new(geom.clone(), root);
    for entry in doc["coeffs"].as_array().cloned().unwrap_or_default() {
        let addr = entry[0].as_str().ok_or_else(|| RunnerError::Config("bad coeff".into()))?;
        let v = entry[1].as_f64().ok_or_else(|| RunnerError::Config("bad coeff".into()))?;
        let cube = DyadicCube::parse_address(&geom, addr)
            .map_err(|e| RunnerError::Config(e.to_string()))?;
        out.set(cube, v);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// curves

/// Write good-λ rows with the stable column order.
pub fn curve_csv(rows: &[GoodLambdaRow]) -> String {
    let mut out = String::from(
        "lambda,gamma_or_eps,bad_measure,superlevel_measure,ratio,overlap_min\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.lambda, r.gamma_or_eps, r.bad_measure, r.superlevel_measure, r.ratio, r.overlap_min
        );
    }
    out
}

/// Parse a curve CSV back (round-trip check).
pub fn parse_curve_csv(s: &str) -> Result<Vec<GoodLambdaRow>, RunnerError> {
    let mut rows = Vec::new();
    for (i, line) in s.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(RunnerError::Config(format!("bad curve row: {line}")));
        }
        let p = |j: usize| -> Result<f64, RunnerError> {
            parts[j].parse::<f64>().map_err(|e| RunnerError::Config(e.to_string()))
        };
        rows.push(GoodLambdaRow {
            lambda: p(0)?,
            gamma_or_eps: p(1)?,
            bad_measure: p(2)?,
            superlevel_measure: p(3)?,
            ratio: p(4)?,
            overlap_min: p(5)?,
        });
    }
    Ok(rows)
}

/// JSON rendering of a domination report: the family as arrays of generations
/// (cube addresses), the coefficients, both verified constants, and the
/// witness leaf with both sides of the inequality there.
pub fn domination_json(geom: &RootGeometry, rep: &crate::engine::DominationReport) -> Value {
    json!({
        "family": rep
            .generations
            .iter()
            .map(|g| g.iter().map(|c| c.address(geom.n)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "coefficients": rep
            .coefficients
            .iter()
            .map(|c| json!([c.cube.address(geom.n), c.coefficient]))
            .collect::<Vec<_>>(),
        "empirical_constant": rep.empirical_constant,
        "proof_bound": rep.proof_bound,
        "witness": {
            "leaf": rep.witness.leaf,
            "lhs": rep.witness.lhs,
            "rhs": rep.witness.rhs,
        },
        "checks": {
            "sparse_certified": rep.sparse_certified,
            "overlap_ok": rep.overlap_ok,
            "omega_bound_ok": rep.omega_bound_ok,
            "ep_bound_ok": rep.ep_bound_ok,
            "cz_ok": rep.cz_ok,
        },
    })
}

/// Per-cube coefficient CSV `(P, |P|, gamma_P)`.
pub fn cubes_csv(geom: &RootGeometry, report: &crate::engine::DominationReport) -> String {
    let mut out = String::from("cube,measure,coefficient\n");
    for c in &report.coefficients {
        let _ = writeln!(
            out,
            "{},{},{}",
            c.cube.address(geom.n),
            crate::dyadic::ratio_to_f64(c.cube.measure(geom)),
            c.coefficient
        );
    }
    out
}

// ---------------------------------------------------------------------------
// experiment dispatch

/// One (seed, eta) run summary in the report.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub eta: String,
    pub constant: f64,
    pub bound: f64,
    pub ok: bool,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub median_constant: f64,
    pub max_constant: f64,
    pub all_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: Value,
    pub runs: Vec<RunSummary>,
    pub aggregate: Aggregate,
    pub pass: bool,
}

/// Everything an experiment produces: a report, named curve files, and named
/// auxiliary CSV files.
pub struct RunOutcome {
    pub report: RunReport,
    pub curves: Vec<(String, Vec<GoodLambdaRow>)>,
    pub extra_csv: Vec<(String, String)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn aggregate(runs: &[RunSummary]) -> Aggregate {
    let consts: Vec<f64> = runs.iter().map(|r| r.constant).filter(|c| c.is_finite()).collect();
    Aggregate {
        runs: runs.len(),
        median_constant: median(consts.clone()),
        max_constant: consts.iter().cloned().fold(0.0, f64::max),
        all_ok: runs.iter().all(|r| r.ok),
    }
}

fn eta_list(params: &ParamsConfig) -> Result<Vec<Rational>, RunnerError> {
    params
        .etas
        .iter()
        .map(|s| parse_rational(s).map_err(|e| RunnerError::Config(e.to_string())))
        .collect()
}

fn sanitize(s: &str) -> String {
    s.replace('/', "_")
}

/// Build the configured family over a generated input.
fn build_family(
    geom: &Arc<RootGeometry>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Box<dyn CubeFamily>, RunnerError> {
    match cfg.family.kind.as_str() {
        "canonical" => {
            let f = generate_grid(geom, &cfg.input, seed)?;
            let kind = match cfg.family.map.as_deref().unwrap_or("mean-center") {
                "restrict" => CanonicalKind::Restrict,
                "mean-center" => CanonicalKind::MeanCenter,
                "window-center" => CanonicalKind::WindowCenter,
                "local-max" => CanonicalKind::LocalMax,
                other => {
                    return Err(RunnerError::Config(format!("unknown canonical map `{other}`")))
                }
            };
            Ok(Box::new(canonical_family(f, kind, cfg.params.r)))
        }
        "operator" => {
            let f = generate_grid(geom, &cfg.input, seed)?;
            let alpha = cfg.family.alpha.unwrap_or(1.0);
            let fam = operator_family_by_name(
                f,
                cfg.family.operator.as_deref().unwrap_or("average"),
                cfg.family.op_scale.unwrap_or(2).min(geom.depth),
                alpha,
                cfg.params.r,
            )?;
            Ok(Box::new(fam))
        }
        "poincare" => {
            let f = generate_grid(geom, &cfg.input, seed)?;
            let m = cfg.family.m.unwrap_or(cfg.params.m);
            let projector = crate::poincare::PolynomialProjector::new(geom.clone(), m)
                .map_err(|e| RunnerError::Other(e.to_string()))?;
            let (fam, _) = crate::poincare::poincare_family(&f, &projector);
            Ok(Box::new(fam))
        }
        "tent" => {
            let hs = generate_halfspace(geom, &cfg.input, seed)?;
            let analysis = TentAnalysis::new(Arc::new(hs), cfg.params.alpha);
            Ok(Box::new(crate::tent::TentBandFamily::new(&analysis)))
        }
        "square" => {
            let f = generate_grid(geom, &cfg.input, seed)?;
            let grid = AmbientGrid { analysis: geom.clone() };
            let kernel = HormanderKernel::gaussian_diff(geom.n);
            let q = cfg.params.q.unwrap_or(2.0);
            Ok(Box::new(crate::square::SquareBandFamily::new(&grid.embed(&f), &kernel, q)))
        }
        "dyadic-sums" => {
            let alpha = generate_coefficients(geom, seed);
            Ok(Box::new(crate::sums::DyadicSumsFamily { alpha }))
        }
        other => Err(RunnerError::Config(format!("unknown family kind `{other}`"))),
    }
}

/// Effective chain exponent of the configured family.
fn family_r(cfg: &ExperimentConfig) -> f64 {
    match cfg.family.kind.as_str() {
        "tent" => 2.0,
        "square" => cfg.params.q.unwrap_or(2.0),
        _ => cfg.params.r,
    }
}

pub fn operator_family_by_name(
    f: GridFunction,
    name: &str,
    scale: u32,
    alpha: f64,
    r: f64,
) -> Result<OperatorFamily, RunnerError> {
    let op: Box<dyn Fn(&GridFunction) -> GridFunction + Sync + Send> = match name {
        "identity" => Box::new(|x: &GridFunction| x.clone()),
        "average" => Box::new(move |x: &GridFunction| {
            let geom = x.geom.clone();
            let mut out = vec![0.0; geom.total_leaves()];
            for cube in geom.root_cube().descendants(&geom) {
                if cube.gen == scale {
                    let m = crate::grid::mean(x, &cube);
                    for l in cube.leaves(&geom) {
                        out[l] = m;
                    }
                }
            }
            GridFunction::new(geom, out).unwrap()
        }),
        "moving-average" => Box::new(|x: &GridFunction| {
            let geom = x.geom.clone();
            let src = x.values.clone();
            let n = src.len();
            let vals: Vec<f64> = (0..n)
                .map(|i| {
                    let a = if i > 0 { src[i - 1] } else { 0.0 };
                    let c = if i + 1 < n { src[i + 1] } else { 0.0 };
                    (a + src[i] + c) / 3.0
                })
                .collect();
            GridFunction::new(geom, vals).unwrap()
        }),
        other => return Err(RunnerError::Config(format!("unknown operator `{other}`"))),
    };
    Ok(OperatorFamily::new(f, op, alpha, r))
}

/// Positive-value quantiles used for λ grids.
pub fn positive_quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut pos: Vec<f64> = values.iter().cloned().filter(|&v| v > 0.0).collect();
    if pos.is_empty() {
        return vec![1.0];
    }
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = qs
        .iter()
        .map(|&q| {
            let idx = ((pos.len() as f64 - 1.0) * q.clamp(0.0, 1.0)).round() as usize;
            pos[idx]
        })
        .collect();
    out.dedup();
    out
}

/// Run an experiment. Reports are deterministic functions of the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, RunnerError> {
    let geom = cfg.geometry.build()?;
    let etas = eta_list(&cfg.params)?;
    let mut runs: Vec<RunSummary> = Vec::new();
    let mut curves: Vec<(String, Vec<GoodLambdaRow>)> = Vec::new();
    let mut extra_csv: Vec<(String, String)> = Vec::new();
    let root = geom.root_cube();

    match cfg.experiment {
        ExperimentKind::VerifySparse => {
            for &seed in &cfg.seeds {
                let fam = build_family(&geom, cfg, seed)?;
                let r = family_r(cfg);
                let maj = check_majorization(
                    fam.as_ref(),
                    &root,
                    CheckBudget::Sampled { chains: 200, seed: seed ^ 0xABCD },
                );
                for eta in &etas {
                    let params = SparseParams::pointwise(*eta, r)
                        .map_err(|e| RunnerError::Config(e.to_string()))?;
                    let rep = build_sparse_pointwise(fam.as_ref(), &root, &params)
                        .map_err(|e| RunnerError::Other(e.to_string()))?;
                    let ok = rep.all_checks_ok() && maj.ok;
                    if runs.is_empty() {
                        extra_csv.push((
                            format!("cubes_seed{}_eta{}.csv", seed, sanitize(&rational_string(*eta))),
                            cubes_csv(&geom, &rep),
                        ));
                    }
                    let mut details = domination_json(&geom, &rep);
                    details["majorization_worst"] = json!(maj.worst_ratio);
                    runs.push(RunSummary {
                        seed,
                        eta: rational_string(*eta),
                        constant: rep.empirical_constant,
                        bound: rep.proof_bound,
                        ok,
                        details,
                    });
                }
            }
        }
        ExperimentKind::Bilinear => {
            let q = cfg.params.q.ok_or_else(|| {
                RunnerError::Config("bilinear requires params.q > r".into())
            })?;
            if q <= cfg.params.r {
                return Err(RunnerError::Config(format!(
                    "bilinear requires q > r (q = {q}, r = {})",
                    cfg.params.r
                )));
            }
            for &seed in &cfg.seeds {
                let fam = build_family(&geom, cfg, seed)?;
                let r = family_r(cfg);
                for eta in &etas {
                    let params = SparseParams::bilinear(*eta, r, q)
                        .map_err(|e| RunnerError::Config(e.to_string()))?;
                    for (tag, g) in [
                        ("ones", GridFunction::constant(geom.clone(), 1.0)),
                        ("random", {
                            let mut rng = SplitMix64::new(seed ^ 0x9e3779b9);
                            GridFunction::new(
                                geom.clone(),
                                (0..geom.total_leaves()).map(|_| rng.range_f64(0.0, 2.0)).collect(),
                            )
                            .unwrap()
                        }),
                    ] {
                        let rep = build_sparse_bilinear(fam.as_ref(), &root, &params, &g)
                            .map_err(|e| RunnerError::Other(e.to_string()))?;
                        let b = rep.bilinear.clone().unwrap();
                        runs.push(RunSummary {
                            seed,
                            eta: rational_string(*eta),
                            constant: b.empirical_constant,
                            bound: b.proof_bound,
                            ok: rep.all_checks_ok(),
                            details: json!({"g": tag, "lhs": b.lhs, "rhs": b.rhs}),
                        });
                    }
                }
            }
        }
        ExperimentKind::EllrCheck => {
            for &seed in &cfg.seeds {
                let fam = build_family(&geom, cfg, seed)?;
                // the checker measures the constant at exactly the requested r
                let r = cfg.params.r;
                let budget = match cfg.params.budget.as_deref() {
                    Some("sampled") => CheckBudget::Sampled { chains: 500, seed },
                    _ => CheckBudget::Exhaustive,
                };
                let rep = check_ellr(fam.as_ref(), r, &root, budget);
                runs.push(RunSummary {
                    seed,
                    eta: String::new(),
                    constant: rep.c_hat,
                    bound: 1.0,
                    ok: rep.c_hat <= 1.0 + 1e-12,
                    details: json!({"chains": rep.chains_tested, "exact": rep.exact}),
                });
            }
        }
        ExperimentKind::Poincare => {
            let m = cfg.params.m;
            let p = cfg.params.p;
            let s = cfg.params.s;
            for &seed in &cfg.seeds {
                let f = generate_grid(&geom, &cfg.input, seed)?;
                let w = match &cfg.params.weight {
                    Some(path) => Weight::new(load_grid(Path::new(path))?)
                        .map_err(|e| RunnerError::Config(e.to_string()))?,
                    None => Weight::new(GridFunction::constant(geom.clone(), 1.0)).unwrap(),
                };
                for eta in &etas {
                    let rep = poincare_sparse(&f, &root, m, *eta)
                        .map_err(|e| RunnerError::Other(e.to_string()))?;
                    let functional = match cfg.params.functional.as_deref().unwrap_or("oscillation")
                    {
                        "oscillation" => SmallnessFunctional::oscillation(&f, m)
                            .map_err(|e| RunnerError::Other(e.to_string()))?,
                        "power" => SmallnessFunctional::Power { s },
                        other => {
                            return Err(RunnerError::Config(format!(
                                "unknown functional `{other}`"
                            )))
                        }
                    };
                    let (mode, spec) = match cfg.params.mode.as_deref().unwrap_or("pointwise") {
                        "pointwise" => {
                            (ImproveMode::Pointwise, NormSpec::WeightedLp { w: w.clone(), p })
                        }
                        "mq" => {
                            (ImproveMode::LocalMaximal, NormSpec::WeightedLp { w: w.clone(), p })
                        }
                        "ratio" => (
                            ImproveMode::LocalMaximal,
                            NormSpec::Ratio { w: w.clone(), p, r: 2.0 },
                        ),
                        other => {
                            return Err(RunnerError::Config(format!("unknown mode `{other}`")))
                        }
                    };
                    let si = verify_self_improve(&f, &functional, &root, m, &spec, s, mode)
                        .map_err(|e| RunnerError::Other(e.to_string()))?;
                    let ok = rep.domination.all_checks_ok()
                        && rep.bound_ok
                        && rep.level_bound_ok
                        && si.chain_ok
                        && si.generation_volume_ok
                        && si.generation_phi_ok;
                    runs.push(RunSummary {
                        seed,
                        eta: rational_string(*eta),
                        constant: rep.empirical_constant,
                        bound: rep.derived_bound,
                        ok,
                        details: json!({
                            "c_m_hat": rep.c_m_hat,
                            "lhs": si.lhs,
                            "rhs_chain": si.rhs_chain,
                            "rhs_phi": si.rhs_phi,
                            "rhs_closed": si.rhs_closed,
                            "measured_norm": si.measured_norm,
                            "a_root": si.a_root,
                        }),
                    });
                }
            }
        }
        ExperimentKind::Tent => {
            for &seed in &cfg.seeds {
                let hs = generate_halfspace(&geom, &cfg.input, seed)?;
                let analysis = TentAnalysis::new(Arc::new(hs), cfg.params.alpha);
                for eta in &etas {
                    let rep = tent_sparse(&analysis, &root, *eta)
                        .map_err(|e| RunnerError::Other(e.to_string()))?;
                    let ok = rep.domination.all_checks_ok()
                        && rep.sandwich_ok
                        && rep.empirical_sq.is_finite();
                    runs.push(RunSummary {
                        seed,
                        eta: rational_string(*eta),
                        constant: rep.empirical,
                        bound: f64::INFINITY,
                        ok,
                        details: json!({
                            "empirical_sq": rep.empirical_sq,
                            "sandwich_ok": rep.sandwich_ok,
                            "engine_constant": rep.domination.empirical_constant,
                            "engine_bound": rep.domination.proof_bound,
                        }),
                    });
                }
            }
        }
        ExperimentKind::Square => {
            let kernel = HormanderKernel::gaussian_diff(geom.n);
            let krep = kernel_validate(&kernel);
            let q = cfg.params.q.unwrap_or(2.0);
            for &seed in &cfg.seeds {
                let f = generate_grid(&geom, &cfg.input, seed)?;
                let grid = AmbientGrid { analysis: geom.clone() };
                let ambient = grid.embed(&f);
                for eta in &etas {
                    let rep = square_sparse(&ambient, &root, q, &kernel, *eta)
                        .map_err(|e| RunnerError::Other(e.to_string()))?;
                    let ok = rep.domination.all_checks_ok()
                        && rep.empirical_q.is_finite()
                        && krep.ok();
                    runs.push(RunSummary {
                        seed,
                        eta: rational_string(*eta),
                        constant: rep.empirical,
                        bound: f64::INFINITY,
                        ok,
                        details: json!({
                            "empirical_q": rep.empirical_q,
                            "weak_l1_diag": rep.weak_l1_diag,
                            "kernel_integral_residual": krep.integral_residual,
                            "engine_constant": rep.domination.empirical_constant,
                            "engine_bound": rep.domination.proof_bound,
                        }),
                    });
                }
            }
        }
        ExperimentKind::Potential => {
            let q = cfg.params.q.unwrap_or(1.0);
            let gamma = cfg.params.gamma;
            let delta = cfg.params.delta;
            for &seed in &cfg.seeds {
                let mu = generate_measure(&geom, &cfg.input, seed)?;
                let (t, m_fn, alpha) = potential(&mu, q, gamma)
                    .map_err(|e| RunnerError::Other(e.to_string()))?;
                let small = smallness_constant(&alpha, delta)
                    .map_err(|e| RunnerError::Other(e.to_string()))?;
                let rep = sum_sparse(&alpha, delta, etas[0])
                    .map_err(|e| RunnerError::Other(e.to_string()))?;
                let ok = rep.bound_ok && rep.gamma_vs_alpha_ok && rep.domination.all_checks_ok();
                runs.push(RunSummary {
                    seed,
                    eta: rational_string(etas[0]),
                    constant: rep.empirical_constant,
                    bound: rep.proof_bound,
                    ok,
                    details: json!({
                        "smallness": small.constant,
                        "t_max": t.values.iter().cloned().fold(0.0, f64::max),
                        "m_max": m_fn.values.iter().cloned().fold(0.0, f64::max),
                    }),
                });
            }
        }
        ExperimentKind::GoodlambdaTent => {
            for &seed in &cfg.seeds {
                let hs = generate_halfspace(&geom, &cfg.input, seed)?;
                let analysis = TentAnalysis::new(Arc::new(hs), cfg.params.alpha);
                let a_vals: Vec<f64> = (0..geom.total_leaves())
                    .map(|l| analysis.sharp_inner.squared_truncated(l, 0).sqrt())
                    .collect();
                let lambdas: Vec<f64> = positive_quantiles(&a_vals, &cfg.params.lambda_quantiles)
                    .iter()
                    .map(|&v| v / 2.0)
                    .collect();
                let gl = tent_good_lambda(&analysis, &lambdas, &cfg.params.gamma_grid)
                    .map_err(|e| RunnerError::Other(e.to_string()))?;
                let ok = gl.certificate_ok && gl.local_bound_ok && gl.tail_bound_ok;
                runs.push(RunSummary {
                    seed,
                    eta: "1/2".into(),
                    constant: gl.rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
                    bound: 1.0,
                    ok,
                    details: json!({
                        "certificate_ok": gl.certificate_ok,
                        "local_bound_ok": gl.local_bound_ok,
                        "tail_bound_ok": gl.tail_bound_ok,
                        "rows": gl.rows.len(),
                    }),
                });
                curves.push((format!("curve_seed{seed}.csv"), gl.rows));
            }
        }
        ExperimentKind::GoodlambdaSums => {
            let q = cfg.params.q.unwrap_or(1.0);
            let gamma = cfg.params.gamma;
            let delta = cfg.params.delta.min(q);
            for &seed in &cfg.seeds {
                let mu = generate_measure(&geom, &cfg.input, seed)?;
                let (t, _m, alpha) = potential(&mu, q, gamma)
                    .map_err(|e| RunnerError::Other(e.to_string()))?;
                let lambdas = positive_quantiles(&t.values, &cfg.params.lambda_quantiles);
                let gl = good_lambda_sums(&alpha, q, delta, &lambdas, &cfg.params.eps_grid)
                    .map_err(|e| RunnerError::Other(e.to_string()))?;
                let ok = gl.certificate_ok && gl.chain_bound_ok;
                runs.push(RunSummary {
                    seed,
                    eta: "1/2".into(),
                    constant: gl.rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
                    bound: 1.0,
                    ok,
                    details: json!({
                        "certificate_ok": gl.certificate_ok,
                        "chain_bound_ok": gl.chain_bound_ok,
                        "rows": gl.rows.len(),
                    }),
                });
                curves.push((format!("curve_seed{seed}.csv"), gl.rows));
            }
        }
    }

    let agg = aggregate(&runs);
    let pass = agg.all_ok;
    let report = RunReport { config: serde_json::to_value(cfg)?, runs, aggregate: agg, pass };
    Ok(RunOutcome { report, curves, extra_csv })
}

/// Run and write `report.json` plus curve/auxiliary CSVs into `out_dir`.
/// Returns whether every assertion passed (reports are written either way).
pub fn run_and_write(cfg: &ExperimentConfig, out_dir: &Path) -> Result<bool, RunnerError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let outcome = run_experiment(cfg)?;
    let report_path = out_dir.join("report.json");
    let mut doc = serde_json::to_string_pretty(&outcome.report)?;
    doc.push('\n');
    fs::write(&report_path, doc).map_err(io_err(&report_path))?;
    for (name, rows) in &outcome.curves {
        let p = out_dir.join(name);
        fs::write(&p, curve_csv(rows)).map_err(io_err(&p))?;
    }
    for (name, body) in &outcome.extra_csv {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(io_err(&p))?;
    }
    Ok(outcome.report.pass)
}

/// Output directory: `--out` flag, then config `out`, then "runs".
pub fn resolve_out_dir(cfg: &ExperimentConfig, flag: Option<&str>) -> PathBuf {
    if let Some(f) = flag {
        return PathBuf::from(f);
    }
    if let Some(o) = &cfg.out {
        return PathBuf::from(o);
    }
    PathBuf::from("runs")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            geometry: GeometryConfig {
                n: 1,
                depth: 5,
                side: "1".into(),
                origin: None,
            },
            family: FamilyConfig::default(),
            params: ParamsConfig::default(),
            input: InputConfig::default(),
            seeds: vec![1, 2],
            out: None,
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let s = r#"{"experiment":"verify-sparse","geometry":{"n":1,"L":4},"seeds":[1],"bogus":1}"#;
        assert!(ExperimentConfig::from_json(s).is_err());
        let s2 = r#"{"experiment":"verify-sparse","geometry":{"n":1,"L":4,"extra":2},"seeds":[1]}"#;
        assert!(ExperimentConfig::from_json(s2).is_err());
    }

    #[test]
    fn bilinear_rejects_bad_exponents() {
        let mut cfg = base_config(ExperimentKind::Bilinear);
        cfg.params.q = Some(1.0); // q == r
        assert!(run_experiment(&cfg).is_err());
        cfg.params.q = None;
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn generators_are_reproducible() {
        let geom = Arc::new(RootGeometry::unit(1, 6));
        let spec = InputConfig { kind: "spiky".into(), atoms: Some(1), ..Default::default() };
        let a = generate_grid(&geom, &spec, 1).unwrap();
        let b = generate_grid(&geom, &spec, 1).unwrap();
        assert_eq!(a.values, b.values);
        let c = generate_grid(&geom, &spec, 2).unwrap();
        assert_ne!(a.values, c.values);
        // exactly one atom
        assert_eq!(a.values.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn weight_generator_is_positive() {
        let geom = Arc::new(RootGeometry::unit(1, 5));
        let spec = InputConfig {
            kind: "weight".into(),
            power: Some(0.5),
            floor: Some(1e-3),
            ..Default::default()
        };
        let w = generate_weight(&geom, &spec, 3).unwrap();
        assert!(w.0.values.iter().all(|&v| v >= 1e-3));
    }

    #[test]
    fn grid_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let geom = Arc::new(RootGeometry::unit(2, 3));
        let spec = InputConfig { kind: "uniform".into(), ..Default::default() };
        let f = generate_grid(&geom, &spec, 7).unwrap();
        for name in ["f.json", "f.bin"] {
            let p = dir.path().join(name);
            save_grid(&f, &p).unwrap();
            let g = load_grid(&p).unwrap();
            assert_eq!(f.values, g.values);
            assert_eq!(f.geom.depth, g.geom.depth);
        }
    }

    #[test]
    fn curve_csv_round_trip() {
        let rows = vec![
            GoodLambdaRow {
                lambda: 0.5,
                gamma_or_eps: 0.25,
                bad_measure: 0.125,
                superlevel_measure: 0.5,
                ratio: 0.25,
                overlap_min: 3.0,
            },
            GoodLambdaRow {
                lambda: 1.0,
                gamma_or_eps: 0.5,
                bad_measure: 0.0,
                superlevel_measure: 0.25,
                ratio: 0.0,
                overlap_min: 0.0,
            },
        ];
        let csv = curve_csv(&rows);
        let parsed = parse_curve_csv(&csv).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].lambda, 0.5);
        assert_eq!(parsed[1].overlap_min, 0.0);
        // header-only file parses to an empty curve
        assert!(parse_curve_csv("lambda,gamma_or_eps,bad_measure,superlevel_measure,ratio,overlap_min\n")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn verify_sparse_runs_and_passes() {
        let mut cfg = base_config(ExperimentKind::VerifySparse);
        cfg.params.etas = vec!["1/4".into(), "1/2".into()];
        let out = run_experiment(&cfg).unwrap();
        assert!(out.report.pass);
        assert_eq!(out.report.runs.len(), 4);
    }

    #[test]
    fn determinism_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base_config(ExperimentKind::VerifySparse);
        cfg.seeds = vec![5];
        let d1 = dir.path().join("a");
        let d2 = dir.path().join("b");
        run_and_write(&cfg, &d1).unwrap();
        run_and_write(&cfg, &d2).unwrap();
        let r1 = fs::read(d1.join("report.json")).unwrap();
        let r2 = fs::read(d2.join("report.json")).unwrap();
        assert_eq!(r1, r2, "identical config must produce byte-identical reports");
    }
}
