//! Polynomial projections, smallness-preserving functionals, and
//! self-improving Poincaré–Sobolev inequalities.
//!
//! The degree-`m` projection is least squares onto cell averages of monomials,
//! so "polynomial" is closed under projection on the grid: cell-averaged
//! polynomials of degree `<= m` reproduce exactly, and the projector is
//! idempotent and an `L^2` contraction. Bases are orthonormalized per
//! generation on shifted/scaled coordinates (all cubes of a generation share
//! one basis).

use crate::dyadic::{ratio_to_f64, DyadicCube, Rational, RootGeometry};
use crate::engine::{build_sparse_pointwise, DominationReport, EngineError};
use crate::family::{CanonicalFamily, SparseParams};
use crate::grid::{dyadic_maximal, GridFunction, Weight};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoincareError {
    #[error("cube at generation {gen} has {cells} cells per axis, need >= {need} for degree {degree}")]
    DegenerateCube { gen: u32, cells: u32, need: u32, degree: u32 },
    #[error("p and s must be >= 1")]
    BadExponents,
    #[error("hypothesis <|f - P_Q f|>_1 <= a(Q) fails on cube {0}; run is vacuous")]
    VacuousHypothesis(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Multi-indices of total degree `<= m` in `n` variables.
fn multi_indices(n: usize, m: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(n: usize, axis: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if axis == n {
            out.push(cur.clone());
            return;
        }
        for d in 0..=left {
            cur[axis] = d;
            rec(n, axis + 1, left - d, cur, out);
        }
        cur[axis] = 0;
    }
    rec(n, 0, m, &mut cur, &mut out);
    out
}

/// Cell average of `u^j` over `[a, b]`: `(b^(j+1) - a^(j+1)) / ((j+1)(b-a))`.
fn cell_avg_pow(a: f64, b: f64, j: u32) -> f64 {
    let jj = j as i32 + 1;
    (b.powi(jj) - a.powi(jj)) / (jj as f64 * (b - a))
}

/// One generation's orthonormal basis, in the local leaf order shared by every
/// cube of that generation (coordinates scaled to `[-1, 1]^n`).
struct LevelBasis {
    /// `basis[b][local_leaf]`, orthonormal under the mean inner product
    basis: Vec<Vec<f64>>,
    /// worst deviation of the Gram matrix from the identity
    gram_defect: f64,
}

fn mean_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

fn build_level_basis(n: usize, depth: u32, gen: u32, degree: u32) -> LevelBasis {
    let w = 1usize << (depth - gen); // cells per axis
    let n_loc = w.pow(n as u32);
    // raw vectors: cell averages of u^beta on the [-1,1]^n reference cube
    let mut raw: Vec<Vec<f64>> = Vec::new();
    for beta in multi_indices(n, degree) {
        let mut v = vec![1.0f64; n_loc];
        for (axis, &d) in beta.iter().enumerate().take(n) {
            // per-axis averages
            let per: Vec<f64> = (0..w)
                .map(|i| {
                    let a = -1.0 + 2.0 * i as f64 / w as f64;
                    let b = -1.0 + 2.0 * (i + 1) as f64 / w as f64;
                    cell_avg_pow(a, b, d)
                })
                .collect();
            // local row-major layout matches DyadicCube::leaves
            for (loc, val) in v.iter_mut().enumerate() {
                let mut rest = loc;
                let mut coord = 0usize;
                for a2 in (0..n).rev() {
                    let c = rest % w;
                    rest /= w;
                    if a2 == axis {
                        coord = c;
                    }
                }
                *val *= per[coord];
            }
        }
        raw.push(v);
    }
    // modified Gram-Schmidt under the mean inner product
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in raw {
        for q in &basis {
            let c = mean_dot(&v, q);
            for (vv, qq) in v.iter_mut().zip(q) {
                *vv -= c * qq;
            }
        }
        // re-orthogonalize once for conditioning
        for q in &basis {
            let c = mean_dot(&v, q);
            for (vv, qq) in v.iter_mut().zip(q) {
                *vv -= c * qq;
            }
        }
        let norm = mean_dot(&v, &v).sqrt();
        assert!(norm > 1e-14, "polynomial basis degenerate");
        for vv in v.iter_mut() {
            *vv /= norm;
        }
        basis.push(v);
    }
    let mut gram_defect = 0.0f64;
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let g = mean_dot(a, b);
            let target = if i == j { 1.0 } else { 0.0 };
            gram_defect = gram_defect.max((g - target).abs());
        }
    }
    LevelBasis { basis, gram_defect }
}

/// Degree-`m` discrete `L^2` projector with per-generation basis cache.
pub struct PolynomialProjector {
    pub geom: Arc<RootGeometry>,
    pub degree: u32,
    levels: Vec<LevelBasis>,
}

impl PolynomialProjector {
    pub fn new(geom: Arc<RootGeometry>, degree: u32) -> Result<Self, PoincareError> {
        // every generation we project on needs >= degree+1 cells per axis
        let mut levels = Vec::new();
        for gen in 0..=geom.depth {
            let cells = 1u32 << (geom.depth - gen);
            if cells > degree {
                levels.push(build_level_basis(geom.n, geom.depth, gen, degree));
            } else {
                // deeper cubes are degenerate for this degree; keep the list
                // aligned with generations by stopping here
                break;
            }
        }
        if levels.is_empty() {
            return Err(PoincareError::DegenerateCube {
                gen: 0,
                cells: 1 << geom.depth,
                need: degree + 1,
                degree,
            });
        }
        Ok(PolynomialProjector { geom, degree, levels })
    }

    /// Deepest generation this projector can handle.
    pub fn max_gen(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn gram_defect(&self) -> f64 {
        self.levels.iter().map(|l| l.gram_defect).fold(0.0, f64::max)
    }

    /// Dimension of the polynomial space, `C(n+m, m)`.
    pub fn dim(&self) -> usize {
        self.levels[0].basis.len()
    }

    /// Project values given in a cube's local leaf order.
    pub fn project_local(&self, gen: u32, values: &[f64]) -> Result<Vec<f64>, PoincareError> {
        let lb = self.levels.get(gen as usize).ok_or(PoincareError::DegenerateCube {
            gen,
            cells: 1 << (self.geom.depth - gen),
            need: self.degree + 1,
            degree: self.degree,
        })?;
        let mut out = vec![0.0f64; values.len()];
        for q in &lb.basis {
            let c = mean_dot(values, q);
            for (o, qq) in out.iter_mut().zip(q) {
                *o += c * qq;
            }
        }
        Ok(out)
    }

    /// `P_Q f` on the leaves of `cube`.
    pub fn project(&self, f: &GridFunction, cube: &DyadicCube) -> Result<Vec<f64>, PoincareError> {
        self.project_local(cube.gen, &f.on_cube(cube))
    }

    /// Per-generation projection fields: entry `k` holds, at each root leaf,
    /// the value of `P_R f` for the generation-`k` cube `R` containing it.
    pub fn project_field(&self, f: &GridFunction) -> Vec<Vec<f64>> {
        let geom = &self.geom;
        let mut out = Vec::with_capacity(self.levels.len());
        for gen in 0..self.levels.len() as u32 {
            let mut field = vec![0.0f64; geom.total_leaves()];
            for cube in geom.root_cube().descendants(geom) {
                if cube.gen == gen {
                    let proj = self.project(f, &cube).unwrap();
                    for (i, l) in cube.leaves(geom).into_iter().enumerate() {
                        field[l] = proj[i];
                    }
                }
            }
            out.push(field);
        }
        out
    }
}

/// The grid representation of a polynomial: exact cell averages of
/// `x -> sum coeffs_beta x^beta` (ambient coordinates).
pub fn polynomial_grid(
    geom: &Arc<RootGeometry>,
    terms: &[(Vec<u32>, f64)],
) -> GridFunction {
    let n = geom.n;
    let w = geom.cells_per_axis() as usize;
    let cell = ratio_to_f64(geom.side) / w as f64;
    let origins: Vec<f64> = geom.origin.iter().map(|&o| ratio_to_f64(o)).collect();
    let mut values = vec![0.0f64; geom.total_leaves()];
    for (l, v) in values.iter_mut().enumerate() {
        let coords = geom.leaf_coords(l);
        let mut acc = 0.0;
        for (beta, c) in terms {
            let mut t = *c;
            for a in 0..n {
                let lo = origins[a] + coords[a] as f64 * cell;
                let hi = lo + cell;
                t *= cell_avg_pow(lo, hi, beta[a]);
            }
            acc += t;
        }
        *v = acc;
    }
    GridFunction::new(geom.clone(), values).unwrap()
}

/// Measured sup bound of the projection:
/// `max over cubes of ||P_Q f||_inf(Q) / <|f|>_{1,Q}` (the per-run analogue of
/// the bounded-projection constant; reported, never assumed).
pub fn projection_sup_ratio(projector: &PolynomialProjector, f: &GridFunction) -> f64 {
    let geom = &projector.geom;
    let mut worst = 0.0f64;
    for cube in geom.root_cube().descendants(geom) {
        if cube.gen > projector.max_gen() {
            continue;
        }
        let proj = projector.project(f, &cube).unwrap();
        let sup = proj.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let avg = f.on_cube(&cube).iter().map(|v| v.abs()).sum::<f64>()
            / cube.leaf_count(geom) as f64;
        if avg > 1e-300 {
            worst = worst.max(sup / avg);
        }
    }
    worst
}

/// The `f_Q = f - P_Q f`, `f_{R,Q} = P_R f - P_Q f` family (chain constant 1
/// at `r = 1`), built on precomputed per-generation projection fields.
pub fn poincare_family(
    f: &GridFunction,
    projector: &PolynomialProjector,
) -> (CanonicalFamily, Arc<Vec<Vec<f64>>>) {
    let fields = Arc::new(projector.project_field(f));
    let fields2 = fields.clone();
    let fv = f.values.clone();
    let geom = f.geom.clone();
    let max_gen = projector.max_gen();
    let fam = CanonicalFamily::new(
        geom,
        1.0,
        Box::new(move |cube: &DyadicCube| {
            let gen = cube.gen.min(max_gen);
            fv.iter().zip(fields2[gen as usize].iter()).map(|(a, b)| a - b).collect()
        }),
    );
    (fam, fields)
}

/// The local-maximal variant `f_Q = M_Q (f - P_Q f)` with canonical connectors.
pub fn mq_poincare_family(f: &GridFunction, projector: &PolynomialProjector) -> CanonicalFamily {
    let fields = Arc::new(projector.project_field(f));
    let fv = f.clone();
    let geom = f.geom.clone();
    let max_gen = projector.max_gen();
    CanonicalFamily::new(
        geom.clone(),
        1.0,
        Box::new(move |cube: &DyadicCube| {
            let gen = cube.gen.min(max_gen);
            let local: Vec<f64> = fv
                .values
                .iter()
                .zip(fields[gen as usize].iter())
                .map(|(a, b)| a - b)
                .collect();
            let gf = GridFunction::new(geom.clone(), local).unwrap();
            let m = dyadic_maximal(&gf, cube);
            let mut out = vec![0.0f64; geom.total_leaves()];
            for (i, l) in cube.leaves(&geom).into_iter().enumerate() {
                out[l] = m[i];
            }
            out
        }),
    )
}

/// Report of the polynomial sparse domination.
#[derive(Debug, Clone)]
pub struct PoincareSparseReport {
    pub domination: DominationReport,
    /// RHS coefficients `a(R) = <|f - P_R f|>_{1,R}` for `R` in the family
    pub coefficients: Vec<(DyadicCube, f64)>,
    /// `max_x |f - P_Q f| / sum a(R) chi_R`
    pub empirical_constant: f64,
    /// measured projection-difference constant
    /// `max ||P_{R'} f - P_R f||_inf(R') / <|f - P_R f|>_{1,R'}`
    pub c_m_hat: f64,
    /// per-cube bound `gamma_R <= (1 + 2 c_m_hat) 2^(n+2)/(1-eta) a(R)`
    pub level_bound_ok: bool,
    /// `6 (1 + 2 c_m_hat) 2^(n+2) / (1-eta)`, the verified-chain bound
    pub derived_bound: f64,
    pub bound_ok: bool,
}

/// Build the degree-`m` family, run the engine, and verify
/// `|f - P_Q f| chi_Q <= c sum_R <|f - P_R f|>_{1,R} chi_R` with a bound
/// derived from measured quantities.
pub fn poincare_sparse(
    f: &GridFunction,
    root: &DyadicCube,
    degree: u32,
    eta: Rational,
) -> Result<PoincareSparseReport, PoincareError> {
    let projector = PolynomialProjector::new(f.geom.clone(), degree)?;
    let (fam, fields) = poincare_family(f, &projector);
    let params = SparseParams::pointwise(eta, 1.0).expect("r = 1");
    let domination = build_sparse_pointwise(&fam, root, &params)?;
    let geom = f.geom.clone();
    let max_gen = projector.max_gen();

    // a(R) on the family cubes and the pointwise Proposition inequality
    let a_of = |cube: &DyadicCube| -> f64 {
        let gen = cube.gen.min(max_gen);
        let leaves = cube.leaves(&geom);
        leaves.iter().map(|&l| (f.values[l] - fields[gen as usize][l]).abs()).sum::<f64>()
            / leaves.len() as f64
    };
    let mut coefficients = Vec::new();
    let root_leaves = root.leaves(&geom);
    let pos: std::collections::HashMap<usize, usize> =
        root_leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut rhs = vec![0.0f64; root_leaves.len()];
    for c in &domination.coefficients {
        let a_r = a_of(&c.cube);
        coefficients.push((c.cube, a_r));
        for l in c.cube.leaves(&geom) {
            rhs[pos[&l]] += a_r;
        }
    }
    let gen_root = root.gen.min(max_gen) as usize;
    let mut empirical = 0.0f64;
    for (i, &l) in root_leaves.iter().enumerate() {
        let lhs = (f.values[l] - fields[gen_root][l]).abs();
        if rhs[i] > 0.0 {
            empirical = empirical.max(lhs / rhs[i]);
        } else if lhs > 1e-300 {
            empirical = f64::INFINITY;
        }
    }

    // measured projection-difference constant over all nested pairs
    let mut c_m_hat = 0.0f64;
    for outer in root.descendants(&geom) {
        let go = outer.gen.min(max_gen) as usize;
        for inner in outer.descendants(&geom) {
            if inner == outer {
                continue;
            }
            let gi = inner.gen.min(max_gen) as usize;
            if gi == go {
                continue;
            }
            let leaves = inner.leaves(&geom);
            let num = leaves
                .iter()
                .map(|&l| (fields[gi][l] - fields[go][l]).abs())
                .fold(0.0, f64::max);
            let den = leaves.iter().map(|&l| (f.values[l] - fields[go][l]).abs()).sum::<f64>()
                / leaves.len() as f64;
            if den > 1e-300 {
                c_m_hat = c_m_hat.max(num / den);
            }
        }
    }

    // gamma_R <= (1 + 2 c_m_hat) 2^(n+2)/(1-eta) a(R): Chebyshev for the level
    // term, weak (1,1) of the local maximal operator for the sharp term
    let factor = (1.0 + 2.0 * c_m_hat) * (1i128 << (geom.n + 2)) as f64
        / (1.0 - ratio_to_f64(eta));
    let mut level_bound_ok = true;
    for (c, (_, a_r)) in domination.coefficients.iter().zip(coefficients.iter()) {
        if c.coefficient > factor * a_r * (1.0 + 1e-9) {
            level_bound_ok = false;
        }
    }
    let derived_bound = 6.0 * factor;
    Ok(PoincareSparseReport {
        bound_ok: empirical <= derived_bound * (1.0 + 1e-9),
        domination,
        coefficients,
        empirical_constant: empirical,
        c_m_hat,
        level_bound_ok,
        derived_bound,
    })
}

/// A functional `a : cubes -> [0, inf)`.
pub enum SmallnessFunctional {
    /// `a(Q) = <|f - P_Q f|>_{1,Q}` (the oscillation functional of degree `m`)
    Oscillation { f: GridFunction, fields: Arc<Vec<Vec<f64>>>, max_gen: u32 },
    /// `a(Q) = |Q|^(1/s)`
    Power { s: f64 },
    /// explicit table; absent cubes are 0
    Table(BTreeMap<DyadicCube, f64>),
}

impl SmallnessFunctional {
    pub fn oscillation(f: &GridFunction, degree: u32) -> Result<Self, PoincareError> {
        let projector = PolynomialProjector::new(f.geom.clone(), degree)?;
        let fields = Arc::new(projector.project_field(f));
        let max_gen = projector.max_gen();
        Ok(SmallnessFunctional::Oscillation { f: f.clone(), fields, max_gen })
    }

    pub fn eval(&self, geom: &RootGeometry, cube: &DyadicCube) -> f64 {
        match self {
            SmallnessFunctional::Oscillation { f, fields, max_gen } => {
                let gen = cube.gen.min(*max_gen) as usize;
                let leaves = cube.leaves(geom);
                leaves.iter().map(|&l| (f.values[l] - fields[gen][l]).abs()).sum::<f64>()
                    / leaves.len() as f64
            }
            SmallnessFunctional::Power { s } => ratio_to_f64(cube.measure(geom)).powf(1.0 / s),
            SmallnessFunctional::Table(t) => t.get(cube).copied().unwrap_or(0.0),
        }
    }

    /// Scale the functional pointwise (used by linearity tests).
    pub fn scaled(&self, geom: &RootGeometry, root: &DyadicCube, c: f64) -> SmallnessFunctional {
        let mut table = BTreeMap::new();
        for cube in root.descendants(geom) {
            table.insert(cube, c * self.eval(geom, &cube));
        }
        SmallnessFunctional::Table(table)
    }
}

/// Search budget for the smallness norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmallnessBudget {
    /// singletons and full generations only (cheap lower bound)
    Basic,
    /// exact dynamic program over every antichain of every subtree
    Exact,
}

#[derive(Debug, Clone)]
pub struct SmallnessNormReport {
    pub norm: f64,
    /// true when the budget was exact over all (Q', antichain) pairs
    pub exact: bool,
    pub budget: SmallnessBudget,
}

/// Measured `SD_p^s(w)` norm: the best ratio
/// `((1/w(Q')) sum_j a(Q_j)^p w(Q_j))^(1/p) / ((sum_j |Q_j| / |Q'|)^(1/s) a(Q'))`
/// over ambient cubes `Q'` and disjoint families `{Q_j} ⊂ D(Q')`.
///
/// The exact budget runs a knapsack over leaf coverage: the denominator
/// depends only on the covered volume, and the numerator is additive, so a
/// per-cube table of (coverage -> best value) maximizes over every antichain.
/// `extra_families` (for example, the generations of an engine-produced sparse
/// family) are always included as candidates.
pub fn smallness_norm(
    a: &SmallnessFunctional,
    w: &Weight,
    p: f64,
    s: f64,
    root: &DyadicCube,
    budget: SmallnessBudget,
    extra_families: &[Vec<DyadicCube>],
) -> Result<SmallnessNormReport, PoincareError> {
    if p < 1.0 || s < 1.0 {
        return Err(PoincareError::BadExponents);
    }
    let geom = w.0.geom.clone();
    let value = |c: &DyadicCube| -> f64 { a.eval(&geom, c).powf(p) * w.w_cube(c) };
    let mut best = 0.0f64;

    let mut consider = |ambient: &DyadicCube, covered_leaves: usize, num_sum: f64| {
        if covered_leaves == 0 || num_sum <= 0.0 {
            return;
        }
        let a_q = a.eval(&geom, ambient);
        if a_q <= 0.0 {
            best = f64::INFINITY;
            return;
        }
        let frac = covered_leaves as f64 / ambient.leaf_count(&geom) as f64;
        let num = (num_sum / w.w_cube(ambient)).powf(1.0 / p);
        let den = frac.powf(1.0 / s) * a_q;
        best = best.max(num / den);
    };

    // singletons and full generations under every ambient cube
    let cubes = root.descendants(&geom);
    for ambient in &cubes {
        for cand in ambient.descendants(&geom) {
            consider(ambient, cand.leaf_count(&geom), value(&cand));
        }
        for gen in ambient.gen..=geom.depth {
            let members: Vec<DyadicCube> = ambient
                .descendants(&geom)
                .into_iter()
                .filter(|c| c.gen == gen)
                .collect();
            let num: f64 = members.iter().map(&value).sum();
            let covered: usize = members.iter().map(|c| c.leaf_count(&geom)).sum();
            consider(ambient, covered, num);
        }
    }
    // caller-provided families (measured against the root)
    for fam in extra_families {
        let num: f64 = fam.iter().map(&value).sum();
        let covered: usize = fam.iter().map(|c| c.leaf_count(&geom)).sum();
        consider(root, covered, num);
    }

    if budget == SmallnessBudget::Exact {
        // coverage knapsack: table[c] = best antichain value covering c leaves
        fn dp(
            geom: &RootGeometry,
            value: &dyn Fn(&DyadicCube) -> f64,
            cube: &DyadicCube,
            consider: &mut dyn FnMut(&DyadicCube, usize, f64),
        ) -> Vec<f64> {
            let n_leaves = cube.leaf_count(geom);
            let mut table = if cube.is_leaf(geom) {
                vec![0.0, value(cube)]
            } else {
                let mut comb = vec![0.0f64];
                for child in cube.children(geom).unwrap() {
                    let ct = dp(geom, value, &child, consider);
                    let mut next = vec![f64::NEG_INFINITY; comb.len() + ct.len() - 1];
                    for (c1, &v1) in comb.iter().enumerate() {
                        if v1 == f64::NEG_INFINITY {
                            continue;
                        }
                        for (c2, &v2) in ct.iter().enumerate() {
                            let t = v1 + v2;
                            if t > next[c1 + c2] {
                                next[c1 + c2] = t;
                            }
                        }
                    }
                    comb = next;
                }
                comb
            };
            if table.len() == n_leaves + 1 && value(cube) > table[n_leaves] {
                table[n_leaves] = value(cube);
            }
            for (c, &v) in table.iter().enumerate() {
                consider(cube, c, v);
            }
            table
        }
        dp(&geom, &value, root, &mut consider);
    }

    Ok(SmallnessNormReport { norm: best, exact: budget == SmallnessBudget::Exact, budget })
}

/// Brute-force smallness norm over every antichain, for small subtrees only
/// (test oracle for the knapsack).
pub fn smallness_norm_bruteforce(
    a: &SmallnessFunctional,
    w: &Weight,
    p: f64,
    s: f64,
    root: &DyadicCube,
) -> f64 {
    let geom = w.0.geom.clone();
    assert!(root.leaf_count(&geom) <= 8, "exponential enumeration");
    // enumerate antichains: subsets of cubes, pairwise disjoint
    let cubes = root.descendants(&geom);
    let k = cubes.len();
    let mut best = 0.0f64;
    for mask in 1u64..(1 << k) {
        let members: Vec<&DyadicCube> =
            cubes.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| c).collect();
        let mut disjoint = true;
        'outer: for (i, a1) in members.iter().enumerate() {
            for b in members.iter().skip(i + 1) {
                if a1.contains(b) || b.contains(a1) {
                    disjoint = false;
                    break 'outer;
                }
            }
        }
        if !disjoint {
            continue;
        }
        for ambient in &cubes {
            if !members.iter().all(|c| ambient.contains(c)) {
                continue;
            }
            let a_q = a.eval(&geom, ambient);
            let num: f64 =
                members.iter().map(|c| a.eval(&geom, c).powf(p) * w.w_cube(c)).sum();
            if num <= 0.0 {
                continue;
            }
            if a_q <= 0.0 {
                return f64::INFINITY;
            }
            let covered: usize = members.iter().map(|c| c.leaf_count(&geom)).sum();
            let frac = covered as f64 / ambient.leaf_count(&geom) as f64;
            let ratio = (num / w.w_cube(ambient)).powf(1.0 / p) / (frac.powf(1.0 / s) * a_q);
            best = best.max(ratio);
        }
    }
    best
}

/// Norm used on the left-hand side of the self-improvement theorem.
pub enum NormSpec {
    /// `||g||_{X_Q} = ((1/w(Q)) int_Q |g|^p w)^(1/p)`
    WeightedLp { w: Weight, p: f64 },
    /// the ratio norm of the corollary:
    /// `((1/w_r(Q)) int_Q (|g| / M#_m f)^p w)^(1/p) * a(Q)` with
    /// `w_r(Q) = |Q|^(1/r') (int_Q w^r)^(1/r)`
    Ratio { w: Weight, p: f64, r: f64 },
}

impl NormSpec {
    /// `phi(t)` exponent `1/s_phi` of the induced smallness modulus.
    pub fn phi_exponent(&self, s: f64) -> f64 {
        match self {
            NormSpec::WeightedLp { .. } => 1.0 / s,
            NormSpec::Ratio { p, r, .. } => {
                let r_conj = r / (r - 1.0);
                1.0 / (p * r_conj)
            }
        }
    }
}

/// Self-improvement verification report.
#[derive(Debug, Clone)]
pub struct SelfImproveReport {
    /// `||(f - P_Q f) chi_Q||` (or the local-maximal / ratio variant)
    pub lhs: f64,
    /// `C_emp * sum_k || sum_{R in F_k} a(R) chi_R ||` — the exact chain
    pub rhs_chain: f64,
    /// `C_emp * a(Q) * sum_k phi(2^-k)` over the realized generations
    pub rhs_phi: f64,
    /// `a(Q) * (s_phi + 1) * norm` — the closed-form factor, without the
    /// run's measured constant
    pub rhs_factor: f64,
    /// `C_emp * rhs_factor` — the closed-form specialization
    pub rhs_closed: f64,
    /// pointwise constant of the underlying engine run
    pub pointwise_constant: f64,
    /// measured smallness norm (includes the run's generations as candidates)
    pub measured_norm: f64,
    pub a_root: f64,
    /// `sum_{R in F_k} |R| <= 2^-k |Q|` for every generation
    pub generation_volume_ok: bool,
    /// per-generation `||sum a(R) chi_R|| <= phi(2^-k) a(Q)`
    pub generation_phi_ok: bool,
    pub chain_ok: bool,
    pub hypothesis_ok: bool,
    pub generations: usize,
}

/// Mode for the left-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImproveMode {
    Pointwise,
    LocalMaximal,
}

fn eval_norm(
    spec: &NormSpec,
    geom: &RootGeometry,
    root: &DyadicCube,
    values_on_root: &[f64],
    msharp: &[f64],
    a_root: f64,
) -> f64 {
    match spec {
        NormSpec::WeightedLp { w, p } => {
            let leaves = root.leaves(geom);
            let m = ratio_to_f64(geom.leaf_measure());
            let wq = w.w_cube(root);
            let s: f64 = leaves
                .iter()
                .enumerate()
                .map(|(i, &l)| values_on_root[i].abs().powf(*p) * w.0.values[l] * m)
                .sum();
            (s / wq).powf(1.0 / p)
        }
        NormSpec::Ratio { w, p, r } => {
            let leaves = root.leaves(geom);
            let m = ratio_to_f64(geom.leaf_measure());
            let r_conj = r / (r - 1.0);
            let wr = ratio_to_f64(root.measure(geom)).powf(1.0 / r_conj)
                * leaves
                    .iter()
                    .map(|&l| w.0.values[l].powf(*r) * m)
                    .sum::<f64>()
                    .powf(1.0 / r);
            let s: f64 = leaves
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    if msharp[i] > 0.0 {
                        (values_on_root[i].abs() / msharp[i]).powf(*p) * w.0.values[l] * m
                    } else {
                        0.0
                    }
                })
                .sum();
            (s / wr).powf(1.0 / p) * a_root
        }
    }
}

/// Verify the self-improving inequality: run the engine on the degree-`m`
/// family at `eta = 1/2`, check the starting hypothesis
/// `<|f - P_Q f|>_1 <= a(Q)` on every cube, and compare the exact
/// `||.||_{X_Q}` of the left side against the verified chain
/// `C_emp * sum_k ||sum_{R in F_k} a(R) chi_R||  <=  C_emp a(Q) sum_k phi(2^-k)`.
pub fn verify_self_improve(
    f: &GridFunction,
    a: &SmallnessFunctional,
    root: &DyadicCube,
    degree: u32,
    spec: &NormSpec,
    s: f64,
    mode: ImproveMode,
) -> Result<SelfImproveReport, PoincareError> {
    let geom = f.geom.clone();
    let projector = PolynomialProjector::new(geom.clone(), degree)?;
    let fields = Arc::new(projector.project_field(f));
    let max_gen = projector.max_gen();

    // hypothesis on every cube of the subtree
    let mut hypothesis_ok = true;
    for cube in root.descendants(&geom) {
        let gen = cube.gen.min(max_gen) as usize;
        let leaves = cube.leaves(&geom);
        let avg = leaves.iter().map(|&l| (f.values[l] - fields[gen][l]).abs()).sum::<f64>()
            / leaves.len() as f64;
        if avg > a.eval(&geom, &cube) * (1.0 + 1e-9) {
            hypothesis_ok = false;
        }
    }
    if !hypothesis_ok {
        return Err(PoincareError::VacuousHypothesis(root.address(geom.n)));
    }

    let (fam, _) = poincare_family(f, &projector);
    let params = SparseParams::pointwise(Rational::new(1, 2), 1.0).expect("eta");
    let domination = match mode {
        ImproveMode::Pointwise => build_sparse_pointwise(&fam, root, &params)?,
        ImproveMode::LocalMaximal => {
            let mq = mq_poincare_family(f, &projector);
            build_sparse_pointwise(&mq, root, &params)?
        }
    };

    // pointwise constant vs a(R)-coefficients
    let root_leaves = root.leaves(&geom);
    let pos: std::collections::HashMap<usize, usize> =
        root_leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut rhs_ptwise = vec![0.0f64; root_leaves.len()];
    for c in &domination.coefficients {
        let a_r = a.eval(&geom, &c.cube);
        for l in c.cube.leaves(&geom) {
            rhs_ptwise[pos[&l]] += a_r;
        }
    }
    let gen_root = root.gen.min(max_gen) as usize;
    let lhs_field: Vec<f64> = match mode {
        ImproveMode::Pointwise => root_leaves
            .iter()
            .map(|&l| (f.values[l] - fields[gen_root][l]).abs())
            .collect(),
        ImproveMode::LocalMaximal => {
            let local: Vec<f64> =
                f.values.iter().zip(fields[gen_root].iter()).map(|(a, b)| a - b).collect();
            let gf = GridFunction::new(geom.clone(), local).unwrap();
            dyadic_maximal(&gf, root)
        }
    };
    let mut pointwise_constant = 0.0f64;
    for (i, _) in root_leaves.iter().enumerate() {
        if rhs_ptwise[i] > 0.0 {
            pointwise_constant = pointwise_constant.max(lhs_field[i] / rhs_ptwise[i]);
        } else if lhs_field[i] > 1e-300 {
            pointwise_constant = f64::INFINITY;
        }
    }

    // polynomial sharp maximal field for the ratio norm
    let msharp: Vec<f64> = {
        let mut out = vec![0.0f64; root_leaves.len()];
        for (i, &l) in root_leaves.iter().enumerate() {
            let leaf_cube = DyadicCube { gen: geom.depth, idx: geom.leaf_coords(l) };
            let mut best = 0.0f64;
            for g in root.gen..=geom.depth {
                let anc = leaf_cube.ancestor(g);
                let gen = anc.gen.min(max_gen) as usize;
                let leaves = anc.leaves(&geom);
                let avg = leaves
                    .iter()
                    .map(|&ll| (f.values[ll] - fields[gen][ll]).abs())
                    .sum::<f64>()
                    / leaves.len() as f64;
                best = best.max(avg);
            }
            out[i] = best;
        }
        out
    };

    let a_root = a.eval(&geom, root);
    let lhs = eval_norm(spec, &geom, root, &lhs_field, &msharp, a_root);

    // measured norm with the engine generations as extra candidates
    let weight_for_norm = match spec {
        NormSpec::WeightedLp { w, .. } | NormSpec::Ratio { w, .. } => w,
    };
    let p_norm = match spec {
        NormSpec::WeightedLp { p, .. } | NormSpec::Ratio { p, .. } => *p,
    };
    let measured = smallness_norm(
        a,
        weight_for_norm,
        p_norm,
        s,
        root,
        SmallnessBudget::Exact,
        &domination.generations,
    )?;

    // exact chain: triangle inequality over generations
    let phi_exp = spec.phi_exponent(s);
    let s_phi = 1.0 / phi_exp;
    let mut rhs_chain = 0.0f64;
    let mut rhs_phi = 0.0f64;
    let mut generation_volume_ok = true;
    let mut generation_phi_ok = true;
    for (k, gen) in domination.generations.iter().enumerate() {
        let mut layer = vec![0.0f64; root_leaves.len()];
        for cube in gen {
            let a_r = a.eval(&geom, cube);
            for l in cube.leaves(&geom) {
                layer[pos[&l]] += a_r;
            }
        }
        let layer_norm = eval_norm(spec, &geom, root, &layer, &msharp, a_root);
        rhs_chain += layer_norm;
        let covered: usize = gen.iter().map(|c| c.leaf_count(&geom)).sum();
        if covered as f64 > root.leaf_count(&geom) as f64 * 0.5f64.powi(k as i32) * (1.0 + 1e-12)
        {
            generation_volume_ok = false;
        }
        let phi_k = measured.norm * 0.5f64.powf(k as f64 * phi_exp) * a_root;
        rhs_phi += phi_k;
        if layer_norm > phi_k * (1.0 + 1e-9) {
            generation_phi_ok = false;
        }
    }
    rhs_chain *= pointwise_constant;
    rhs_phi *= pointwise_constant;
    let rhs_factor = a_root * (s_phi + 1.0) * measured.norm;
    let rhs_closed = pointwise_constant * rhs_factor;
    let chain_ok = lhs <= rhs_chain * (1.0 + 1e-9) && rhs_chain <= rhs_phi * (1.0 + 1e-9);

    Ok(SelfImproveReport {
        lhs,
        rhs_chain,
        rhs_phi,
        rhs_factor,
        rhs_closed,
        pointwise_constant,
        measured_norm: measured.norm,
        a_root,
        generation_volume_ok,
        generation_phi_ok,
        chain_ok,
        hypothesis_ok,
        generations: domination.generations.len(),
    })
}
