//! The abstract cube-indexed family `{f_Q, f_{P,Q}}` and its two hypotheses.
//!
//! A [`CubeFamily`] evaluates `f_Q` on any dyadic cube `Q` and the connector
//! `f_{P,Q}` on `P` for `P ⊆ Q`, with the convention `f_{Q,Q} = 0`. The two
//! hypotheses consumed by the stopping-time engine are the chain (`ℓʳ`)
//! condition and the pointwise majorization `|f_{P,Q}| <= |f_P| + |f_Q|`;
//! both have exhaustive checkers here that measure the best constant on the
//! finite tree instead of assuming it.

use crate::dyadic::{DyadicCube, Rational, RootGeometry};
use crate::grid::{dyadic_maximal, oscillation_values, GridFunction, OscMode};
use crate::rng::SplitMix64;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("q must exceed r in bilinear mode (q = {q}, r = {r})")]
    BadBilinearExponents { q: f64, r: f64 },
    #[error("r must be positive")]
    BadR,
}

/// A family of functions indexed by dyadic cubes. Evaluation must be pure and
/// re-entrant: the engine evaluates many `(P, Q)` pairs concurrently.
pub trait CubeFamily: Sync {
    fn geometry(&self) -> &Arc<RootGeometry>;

    /// `f_Q` on the leaves of `cube`, in the cube's row-major leaf order.
    fn eval_f(&self, cube: &DyadicCube) -> Vec<f64>;

    /// `f_{P,Q}` on the leaves of `inner`, for `inner ⊆ outer`.
    /// Implementations must honor `eval_diff(Q, Q) = 0`.
    fn eval_diff(&self, inner: &DyadicCube, outer: &DyadicCube) -> Vec<f64>;

    /// Exponent of the declared chain condition.
    fn declared_r(&self) -> f64;

    /// Claimed chain constant (1 for every built-in family).
    fn declared_cr(&self) -> f64 {
        1.0
    }
}

/// Stopping-time parameters. The rearrangement threshold used per cube is
/// `t_P = |P| (1-eta) / 2^(n+2)`.
#[derive(Debug, Clone)]
pub struct SparseParams {
    pub eta: Rational,
    pub r: f64,
    /// bilinear mode only; must satisfy `q > r`
    pub q: Option<f64>,
}

impl SparseParams {
    pub fn pointwise(eta: Rational, r: f64) -> Result<Self, FamilyError> {
        if r <= 0.0 {
            return Err(FamilyError::BadR);
        }
        Ok(SparseParams { eta, r, q: None })
    }

    pub fn bilinear(eta: Rational, r: f64, q: f64) -> Result<Self, FamilyError> {
        if r <= 0.0 {
            return Err(FamilyError::BadR);
        }
        if q <= r {
            return Err(FamilyError::BadBilinearExponents { q, r });
        }
        Ok(SparseParams { eta, r, q: Some(q) })
    }

    /// `(1-eta) / 2^(n+2)` as an exact rational.
    pub fn threshold_fraction(&self, n: usize) -> Rational {
        (Rational::from_integer(1) - self.eta) / Rational::from_integer(1i128 << (n + 2))
    }
}

type CubeMap = Box<dyn Fn(&DyadicCube) -> Vec<f64> + Sync + Send>;

/// The canonical family `f_{P,Q} := f_Q - f_P` built from a per-cube map
/// `Q -> f_Q` (each value is a full-root vector; evaluation restricts).
/// Satisfies the chain condition with constant 1 for `r <= 1`.
pub struct CanonicalFamily {
    geom: Arc<RootGeometry>,
    map: CubeMap,
    r: f64,
    cache: Mutex<HashMap<DyadicCube, Arc<Vec<f64>>>>,
}

impl CanonicalFamily {
    pub fn new(geom: Arc<RootGeometry>, r: f64, map: CubeMap) -> Self {
        CanonicalFamily { geom, map, r, cache: Mutex::new(HashMap::new()) }
    }

    fn full(&self, cube: &DyadicCube) -> Arc<Vec<f64>> {
        let mut cache = self.cache.lock().unwrap();
        cache.entry(*cube).or_insert_with(|| Arc::new((self.map)(cube))).clone()
    }
}

impl CubeFamily for CanonicalFamily {
    fn geometry(&self) -> &Arc<RootGeometry> {
        &self.geom
    }

    fn eval_f(&self, cube: &DyadicCube) -> Vec<f64> {
        let full = self.full(cube);
        cube.leaves(&self.geom).into_iter().map(|l| full[l]).collect()
    }

    fn eval_diff(&self, inner: &DyadicCube, outer: &DyadicCube) -> Vec<f64> {
        if inner == outer {
            return vec![0.0; inner.leaf_count(&self.geom)];
        }
        let fo = self.full(outer);
        let fi = self.full(inner);
        inner.leaves(&self.geom).into_iter().map(|l| fo[l] - fi[l]).collect()
    }

    fn declared_r(&self) -> f64 {
        self.r
    }
}

/// Convenience constructors for the canonical maps used by the CLI.
pub enum CanonicalKind {
    /// `f_Q = f` restricted to `Q` (all connectors vanish)
    Restrict,
    /// `f_Q = f - <f>_Q` (connectors are constants)
    MeanCenter,
    /// `f_Q = f - c_{1/4}(f;Q)` with the exact shortest-window center
    WindowCenter,
    /// `f_Q = M_Q f`, the local dyadic maximal function (nonconstant connectors)
    LocalMax,
}

pub fn canonical_family(f: GridFunction, kind: CanonicalKind, r: f64) -> CanonicalFamily {
    let geom = f.geom.clone();
    let map: CubeMap = match kind {
        CanonicalKind::Restrict => Box::new(move |_c| f.values.clone()),
        CanonicalKind::MeanCenter => Box::new(move |c| {
            let avg = crate::grid::mean(&f, c);
            f.values.iter().map(|v| v - avg).collect()
        }),
        CanonicalKind::WindowCenter => Box::new(move |c| {
            let (_omega, center) = crate::grid::local_oscillation(&f, c, 0.25).unwrap();
            f.values.iter().map(|v| v - center).collect()
        }),
        CanonicalKind::LocalMax => Box::new(move |c| {
            let local = dyadic_maximal(&f, c);
            let mut out = vec![0.0; f.geom.total_leaves()];
            for (i, l) in c.leaves(&f.geom).into_iter().enumerate() {
                out[l] = local[i];
            }
            out
        }),
    };
    CanonicalFamily::new(geom, r, map)
}

type GridOp = Box<dyn Fn(&GridFunction) -> GridFunction + Sync + Send>;

/// The α-localisation family of an operator `T`:
/// `f_Q = |T(f chi_{aQ})|` on `Q` and `f_{P,Q} = |T(f chi_{aQ}) - T(f chi_{aP})|`.
/// `aQ` is the concentric box of side `a * l_Q`, clipped at the root (zero
/// extension outside); membership of a cell is decided by its center.
pub struct OperatorFamily {
    geom: Arc<RootGeometry>,
    op: GridOp,
    f: GridFunction,
    pub alpha: f64,
    r: f64,
    cache: Mutex<HashMap<DyadicCube, Arc<Vec<f64>>>>,
}

impl OperatorFamily {
    pub fn new(f: GridFunction, op: GridOp, alpha: f64, r: f64) -> Self {
        assert!(alpha >= 1.0);
        OperatorFamily { geom: f.geom.clone(), op, f, alpha, r, cache: Mutex::new(HashMap::new()) }
    }

    /// `T(f chi_{aQ})` on the whole root, signed.
    fn localized(&self, cube: &DyadicCube) -> Arc<Vec<f64>> {
        let mut cache = self.cache.lock().unwrap();
        cache
            .entry(*cube)
            .or_insert_with(|| {
                let center = cube.center(&self.geom);
                let half = self.alpha * self.geom.side_len_f64(cube.gen) / 2.0;
                let mut masked = self.f.clone();
                for l in 0..self.geom.total_leaves() {
                    let c = self.geom.leaf_center(l);
                    let inside =
                        (0..self.geom.n).all(|a| (c[a] - center[a]).abs() <= half);
                    if !inside {
                        masked.values[l] = 0.0;
                    }
                }
                Arc::new((self.op)(&masked).values)
            })
            .clone()
    }
}

impl CubeFamily for OperatorFamily {
    fn geometry(&self) -> &Arc<RootGeometry> {
        &self.geom
    }

    fn eval_f(&self, cube: &DyadicCube) -> Vec<f64> {
        let t = self.localized(cube);
        cube.leaves(&self.geom).into_iter().map(|l| t[l].abs()).collect()
    }

    fn eval_diff(&self, inner: &DyadicCube, outer: &DyadicCube) -> Vec<f64> {
        if inner == outer {
            return vec![0.0; inner.leaf_count(&self.geom)];
        }
        let to = self.localized(outer);
        let ti = self.localized(inner);
        inner.leaves(&self.geom).into_iter().map(|l| (to[l] - ti[l]).abs()).collect()
    }

    fn declared_r(&self) -> f64 {
        self.r
    }
}

/// The operator analogue of the sharp maximal function,
/// `M#_{T,Q} f(x) = sup_{P ∋ x} osc(T_{P,Q} f; P)` with the *signed* difference.
/// Dominates the family sharp maximal function pointwise.
pub fn operator_sharp_maximal(fam: &OperatorFamily, cube: &DyadicCube) -> Vec<f64> {
    let geom = fam.geometry().clone();
    let to = fam.localized(cube);
    let mut out = vec![0.0; cube.leaf_count(&geom)];
    let leaves = cube.leaves(&geom);
    let pos: HashMap<usize, usize> = leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    fn descend(
        fam: &OperatorFamily,
        to: &[f64],
        c: &DyadicCube,
        outer_is_c: bool,
        inherited: f64,
        pos: &HashMap<usize, usize>,
        out: &mut [f64],
    ) {
        let geom = fam.geometry();
        let osc = if outer_is_c {
            0.0
        } else {
            let ti = fam.localized(c);
            let vals: Vec<f64> =
                c.leaves(geom).into_iter().map(|l| to[l] - ti[l]).collect();
            oscillation_values(&vals, OscMode::Sup)
        };
        let cur = inherited.max(osc);
        if c.is_leaf(geom) {
            out[pos[&geom.leaf_index(&c.idx[..geom.n])]] = cur;
        } else {
            for ch in c.children(geom).unwrap() {
                descend(fam, to, &ch, false, cur, pos, out);
            }
        }
    }
    descend(fam, &to, cube, true, 0.0, &pos, &mut out);
    out
}

/// Sharp maximal function of a family on `Q`:
/// `m_Q^# f(x) = sup_{P in D(Q), P ∋ x} osc(f_{P,Q}; P)` in the requested mode.
/// Each cube's oscillation is computed once and propagated down its chain.
pub fn sharp_maximal(fam: &dyn CubeFamily, cube: &DyadicCube, mode: OscMode) -> Vec<f64> {
    let geom = fam.geometry().clone();
    let leaves = cube.leaves(&geom);
    let pos: HashMap<usize, usize> = leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut out = vec![0.0; leaves.len()];
    fn descend(
        fam: &dyn CubeFamily,
        outer: &DyadicCube,
        c: &DyadicCube,
        mode: OscMode,
        inherited: f64,
        pos: &HashMap<usize, usize>,
        out: &mut [f64],
    ) {
        let geom = fam.geometry();
        let osc = if c == outer {
            0.0 // f_{Q,Q} = 0 by convention
        } else {
            oscillation_values(&fam.eval_diff(c, outer), mode)
        };
        let cur = inherited.max(osc);
        if c.is_leaf(geom) {
            out[pos[&geom.leaf_index(&c.idx[..geom.n])]] = cur;
        } else {
            for ch in c.children(geom).unwrap() {
                descend(fam, outer, &ch, mode, cur, pos, out);
            }
        }
    }
    descend(fam, cube, cube, mode, 0.0, &pos, &mut out);
    out
}

/// Budget for the chain / majorization checkers.
#[derive(Debug, Clone, Copy)]
pub enum CheckBudget {
    /// every descending chain in the subtree (exact; meant for small trees)
    Exhaustive,
    /// seeded random chains; yields a certified lower bound on the constant
    Sampled { chains: usize, seed: u64 },
}

/// Result of measuring the chain constant.
#[derive(Debug, Clone)]
pub struct EllrReport {
    /// measured constant (max ratio over tested chains and leaves)
    pub c_hat: f64,
    /// true when the budget was exhaustive, i.e. `c_hat` is exact
    pub exact: bool,
    pub chains_tested: usize,
}

/// Measure the best chain constant
/// `C_r = max |f_{P_1}(x)| / (sum_k |f_{P_{k+1},P_k}(x)|^r + |f_{P_m}(x)|^r)^(1/r)`
/// over descending chains `P_m ⊂ ... ⊂ P_1` in `D(root)`.
///
/// Chains with a zero denominator require a zero numerator, otherwise the
/// report carries infinity.
pub fn check_ellr(fam: &dyn CubeFamily, r: f64, root: &DyadicCube, budget: CheckBudget) -> EllrReport {
    let geom = fam.geometry().clone();
    let mut c_hat: f64 = 0.0;
    let mut tested = 0usize;

    let mut run_chain = |chain: &[DyadicCube]| {
        // chain sorted outermost..innermost
        let bottom = *chain.last().unwrap();
        let top = chain[0];
        let num = fam.eval_f(&top);
        let top_on_bottom: Vec<f64> = {
            // restrict f_{P_1} to the bottom cube
            let leaves_top = top.leaves(&geom);
            let pos: HashMap<usize, usize> =
                leaves_top.iter().enumerate().map(|(i, &l)| (l, i)).collect();
            bottom.leaves(&geom).iter().map(|l| num[pos[l]]).collect()
        };
        let mut denom_pow = vec![0.0f64; bottom.leaf_count(&geom)];
        for w in chain.windows(2) {
            let diff = fam.eval_diff(&w[1], &w[0]);
            let leaves_in = w[1].leaves(&geom);
            let pos: HashMap<usize, usize> =
                leaves_in.iter().enumerate().map(|(i, &l)| (l, i)).collect();
            for (j, l) in bottom.leaves(&geom).iter().enumerate() {
                denom_pow[j] += diff[pos[l]].abs().powf(r);
            }
        }
        let fbot = fam.eval_f(&bottom);
        for (j, d) in denom_pow.iter_mut().enumerate() {
            *d += fbot[j].abs().powf(r);
        }
        for (j, &d) in denom_pow.iter().enumerate() {
            let numv = top_on_bottom[j].abs();
            if d > 0.0 {
                c_hat = c_hat.max(numv / d.powf(1.0 / r));
            } else if numv > 0.0 {
                c_hat = f64::INFINITY;
            }
        }
        tested += 1;
    };

    match budget {
        CheckBudget::Exhaustive => {
            for bottom in root.descendants(&geom) {
                // strict ancestors of `bottom` inside the subtree
                let ancestors: Vec<DyadicCube> =
                    (root.gen..bottom.gen).map(|g| bottom.ancestor(g)).collect();
                let a = ancestors.len();
                for mask in 0..(1u64 << a) {
                    let mut chain: Vec<DyadicCube> = ancestors
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, c)| *c)
                        .collect();
                    chain.push(bottom);
                    run_chain(&chain);
                }
            }
        }
        CheckBudget::Sampled { chains, seed } => {
            let mut rng = SplitMix64::new(seed);
            let depth_span = geom.depth - root.gen;
            for _ in 0..chains {
                let g = root.gen + 1 + rng.below(depth_span as usize) as u32;
                let mut idx = [0u32; crate::dyadic::MAX_N];
                for (a, i) in idx.iter_mut().enumerate().take(geom.n) {
                    let w = 1u32 << (g - root.gen);
                    *i = root.idx[a] * w + rng.below(w as usize) as u32;
                }
                let bottom = DyadicCube { gen: g, idx };
                let ancestors: Vec<DyadicCube> =
                    (root.gen..bottom.gen).map(|gg| bottom.ancestor(gg)).collect();
                let mask = rng.next_u64() & ((1u64 << ancestors.len()) - 1);
                let mut chain: Vec<DyadicCube> = ancestors
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, c)| *c)
                    .collect();
                chain.push(bottom);
                run_chain(&chain);
            }
        }
    }
    EllrReport {
        c_hat,
        exact: matches!(budget, CheckBudget::Exhaustive),
        chains_tested: tested,
    }
}

/// Result of the majorization check `|f_{P,Q}| <= |f_P| + |f_Q|`.
#[derive(Debug, Clone)]
pub struct MajorizationReport {
    pub ok: bool,
    /// worst observed `|f_{P,Q}| / (|f_P| + |f_Q|)` (finite part)
    pub worst_ratio: f64,
    pub pairs_tested: usize,
}

/// Verify the majorization hypothesis at every leaf of every tested `(P, Q)`
/// pair (exhaustive over the subtree, or seeded pairs).
pub fn check_majorization(
    fam: &dyn CubeFamily,
    root: &DyadicCube,
    budget: CheckBudget,
) -> MajorizationReport {
    let geom = fam.geometry().clone();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut tested = 0usize;

    let mut run_pair = |inner: &DyadicCube, outer: &DyadicCube| {
        let diff = fam.eval_diff(inner, outer);
        let fi = fam.eval_f(inner);
        let fo = fam.eval_f(outer);
        let leaves_outer = outer.leaves(&geom);
        let pos: HashMap<usize, usize> =
            leaves_outer.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        for (j, l) in inner.leaves(&geom).iter().enumerate() {
            let rhs = fi[j].abs() + fo[pos[l]].abs();
            let lhs = diff[j].abs();
            if lhs > rhs * (1.0 + 1e-12) {
                ok = false;
            }
            if rhs > 0.0 {
                worst = worst.max(lhs / rhs);
            } else if lhs > 0.0 {
                ok = false;
                worst = f64::INFINITY;
            }
        }
        tested += 1;
    };

    match budget {
        CheckBudget::Exhaustive => {
            for outer in root.descendants(&geom) {
                for inner in outer.descendants(&geom) {
                    if inner != outer {
                        run_pair(&inner, &outer);
                    }
                }
            }
        }
        CheckBudget::Sampled { chains, seed } => {
            let mut rng = SplitMix64::new(seed);
            let depth_span = geom.depth - root.gen;
            for _ in 0..chains {
                let go = root.gen + rng.below(depth_span as usize) as u32;
                let mut idx = [0u32; crate::dyadic::MAX_N];
                for (a, i) in idx.iter_mut().enumerate().take(geom.n) {
                    let w = 1u32 << (go - root.gen);
                    *i = root.idx[a] * w + rng.below(w.max(1) as usize) as u32;
                }
                let outer = DyadicCube { gen: go, idx };
                let gi = go + 1 + rng.below((geom.depth - go) as usize) as u32;
                let mut iidx = [0u32; crate::dyadic::MAX_N];
                for (a, i) in iidx.iter_mut().enumerate().take(geom.n) {
                    let w = 1u32 << (gi - go);
                    *i = outer.idx[a] * w + rng.below(w as usize) as u32;
                }
                let inner = DyadicCube { gen: gi, idx: iidx };
                run_pair(&inner, &outer);
            }
        }
    }
    MajorizationReport { ok, worst_ratio: worst, pairs_tested: tested }
}
