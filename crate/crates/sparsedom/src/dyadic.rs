//! Dyadic cube addressing, tree navigation, and contracting/sparse families.
//!
//! Cubes are half-open boxes `[a, b)^n` addressed by `(generation, index)`
//! relative to a fixed root cube, so the leaf cells of generation `L` partition
//! the root exactly. Measures are exact rationals and every set-theoretic check
//! (disjointness, nesting, `|E_P| >= eta |P|`) reduces to integer leaf counting.

use num::rational::Ratio;
use num::{One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Exact scalar for geometry and measure arithmetic.
pub type Rational = Ratio<i128>;

/// Maximum supported ambient dimension.
pub const MAX_N: usize = 3;

/// Parse "p/q" or "p" into a rational.
pub fn parse_rational(s: &str) -> Result<Rational, DyadicError> {
    let bad = || DyadicError::BadRational(s.to_string());
    match s.split_once('/') {
        Some((p, q)) => {
            let p = i128::from_str(p.trim()).map_err(|_| bad())?;
            let q = i128::from_str(q.trim()).map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Ratio::new(p, q))
        }
        None => {
            let p = i128::from_str(s.trim()).map_err(|_| bad())?;
            Ok(Ratio::from_integer(p))
        }
    }
}

/// Render a rational as "p" or "p/q".
pub fn rational_string(r: Rational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DyadicError {
    #[error("leaf has no children")]
    LeafHasNoChildren,
    #[error("point outside root cube (half-open convention)")]
    OutOfDomain,
    #[error("generation {0} exceeds tree depth")]
    GenerationOutOfRange(u32),
    #[error("cube index out of range at generation {0}")]
    IndexOutOfRange(u32),
    #[error("unsupported dimension {0} (1..={MAX_N})")]
    BadDimension(usize),
    #[error("invalid rational literal `{0}`")]
    BadRational(String),
    #[error("invalid geometry: {0}")]
    BadGeometry(String),
    #[error("invalid cube address `{0}`")]
    BadAddress(String),
}

/// The fixed root cube: dimension, side length, corner, and leaf generation.
#[derive(Debug, Clone, PartialEq)]
pub struct RootGeometry {
    pub n: usize,
    pub depth: u32,
    pub side: Rational,
    pub origin: Vec<Rational>,
}

impl RootGeometry {
    pub fn new(n: usize, depth: u32, side: Rational, origin: Vec<Rational>) -> Result<Self, DyadicError> {
        if n == 0 || n > MAX_N {
            return Err(DyadicError::BadDimension(n));
        }
        if depth == 0 || (n as u32) * depth > 24 {
            return Err(DyadicError::BadGeometry(format!(
                "depth {depth} gives 2^{} leaf cells",
                n as u32 * depth
            )));
        }
        if side <= Rational::zero() {
            return Err(DyadicError::BadGeometry("side must be positive".into()));
        }
        if origin.len() != n {
            return Err(DyadicError::BadGeometry("origin length != n".into()));
        }
        Ok(RootGeometry { n, depth, side, origin })
    }

    /// Unit cube `[0,1)^n` at depth `L`.
    pub fn unit(n: usize, depth: u32) -> Self {
        RootGeometry::new(n, depth, Rational::one(), vec![Rational::zero(); n]).unwrap()
    }

    pub fn cells_per_axis(&self) -> u32 {
        1 << self.depth
    }

    pub fn total_leaves(&self) -> usize {
        1usize << (self.n as u32 * self.depth)
    }

    /// Exact measure of a generation-`gen` cube, `(side * 2^-gen)^n`.
    pub fn cube_measure(&self, gen: u32) -> Rational {
        let cell = self.side / Rational::from_integer(1i128 << gen);
        let mut m = Rational::one();
        for _ in 0..self.n {
            m *= cell;
        }
        m
    }

    pub fn leaf_measure(&self) -> Rational {
        self.cube_measure(self.depth)
    }

    /// Side length of a generation-`gen` cube as f64 (exact for dyadic sides).
    pub fn side_len_f64(&self, gen: u32) -> f64 {
        ratio_to_f64(self.side) / (1u64 << gen) as f64
    }

    /// Center of a leaf cell, in ambient coordinates.
    pub fn leaf_center(&self, leaf: usize) -> Vec<f64> {
        let coords = self.leaf_coords(leaf);
        let cell = self.side_len_f64(self.depth);
        coords
            .iter()
            .take(self.n)
            .enumerate()
            .map(|(a, &c)| ratio_to_f64(self.origin[a]) + (c as f64 + 0.5) * cell)
            .collect()
    }

    /// Per-axis leaf coordinates from the flat row-major index.
    pub fn leaf_coords(&self, leaf: usize) -> [u32; MAX_N] {
        let w = self.cells_per_axis() as usize;
        let mut out = [0u32; MAX_N];
        let mut rest = leaf;
        for a in (0..self.n).rev() {
            out[a] = (rest % w) as u32;
            rest /= w;
        }
        out
    }

    /// Flat leaf index from per-axis coordinates.
    pub fn leaf_index(&self, coords: &[u32]) -> usize {
        let w = self.cells_per_axis() as usize;
        coords.iter().take(self.n).fold(0usize, |acc, &c| acc * w + c as usize)
    }

    pub fn root_cube(&self) -> DyadicCube {
        DyadicCube { gen: 0, idx: [0; MAX_N] }
    }
}

pub fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// A dyadic subcube of the root, addressed by generation and per-axis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub gen: u32,
    pub idx: [u32; MAX_N],
}

impl DyadicCube {
    pub fn new(geom: &RootGeometry, gen: u32, idx: &[u32]) -> Result<Self, DyadicError> {
        if gen > geom.depth {
            return Err(DyadicError::GenerationOutOfRange(gen));
        }
        let mut a = [0u32; MAX_N];
        for (i, &c) in idx.iter().take(geom.n).enumerate() {
            if c >= (1 << gen) {
                return Err(DyadicError::IndexOutOfRange(gen));
            }
            a[i] = c;
        }
        Ok(DyadicCube { gen, idx: a })
    }

    pub fn is_leaf(&self, geom: &RootGeometry) -> bool {
        self.gen == geom.depth
    }

    /// The `2^n` congruent half-open subcubes.
    pub fn children(&self, geom: &RootGeometry) -> Result<Vec<DyadicCube>, DyadicError> {
        if self.gen >= geom.depth {
            return Err(DyadicError::LeafHasNoChildren);
        }
        let mut out = Vec::with_capacity(1 << geom.n);
        for bits in 0..(1u32 << geom.n) {
            let mut idx = [0u32; MAX_N];
            for (a, i) in idx.iter_mut().enumerate().take(geom.n) {
                *i = 2 * self.idx[a] + ((bits >> a) & 1);
            }
            out.push(DyadicCube { gen: self.gen + 1, idx });
        }
        Ok(out)
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        if self.gen == 0 {
            return None;
        }
        let mut idx = [0u32; MAX_N];
        for (a, i) in idx.iter_mut().enumerate() {
            *i = self.idx[a] / 2;
        }
        Some(DyadicCube { gen: self.gen - 1, idx })
    }

    /// The generation-`gen` ancestor (or self if `gen == self.gen`).
    pub fn ancestor(&self, gen: u32) -> DyadicCube {
        debug_assert!(gen <= self.gen);
        let shift = self.gen - gen;
        let mut idx = [0u32; MAX_N];
        for (a, i) in idx.iter_mut().enumerate() {
            *i = self.idx[a] >> shift;
        }
        DyadicCube { gen, idx }
    }

    /// Set containment (equality counts as contained).
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.gen >= self.gen && other.ancestor(self.gen) == *self
    }

    pub fn measure(&self, geom: &RootGeometry) -> Rational {
        geom.cube_measure(self.gen)
    }

    /// Number of depth-`L` leaf cells in this cube.
    pub fn leaf_count(&self, geom: &RootGeometry) -> usize {
        1usize << (geom.n as u32 * (geom.depth - self.gen))
    }

    /// Per-axis leaf coordinate ranges `[lo, hi)` at depth `L`.
    pub fn leaf_ranges(&self, geom: &RootGeometry) -> Vec<std::ops::Range<u32>> {
        let w = 1u32 << (geom.depth - self.gen);
        (0..geom.n).map(|a| (self.idx[a] * w)..((self.idx[a] + 1) * w)).collect()
    }

    /// Flat leaf indices of this cube, in row-major order.
    pub fn leaves(&self, geom: &RootGeometry) -> Vec<usize> {
        let ranges = self.leaf_ranges(geom);
        let mut out = Vec::with_capacity(self.leaf_count(geom));
        match geom.n {
            1 => out.extend(ranges[0].clone().map(|x| x as usize)),
            2 => {
                let w = geom.cells_per_axis() as usize;
                for x in ranges[0].clone() {
                    for y in ranges[1].clone() {
                        out.push(x as usize * w + y as usize);
                    }
                }
            }
            _ => {
                let w = geom.cells_per_axis() as usize;
                for x in ranges[0].clone() {
                    for y in ranges[1].clone() {
                        for z in ranges[2].clone() {
                            out.push((x as usize * w + y as usize) * w + z as usize);
                        }
                    }
                }
            }
        }
        out
    }

    /// Center in ambient coordinates.
    pub fn center(&self, geom: &RootGeometry) -> Vec<f64> {
        let side = geom.side_len_f64(self.gen);
        (0..geom.n)
            .map(|a| ratio_to_f64(geom.origin[a]) + (self.idx[a] as f64 + 0.5) * side)
            .collect()
    }

    /// All cubes of the subtree rooted here, top-down, generation by generation.
    pub fn descendants(&self, geom: &RootGeometry) -> Vec<DyadicCube> {
        let mut out = vec![*self];
        let mut frontier = vec![*self];
        while !frontier.is_empty() {
            let mut next = Vec::with_capacity(frontier.len() << geom.n);
            for c in &frontier {
                if c.gen < geom.depth {
                    next.extend(c.children(geom).unwrap());
                }
            }
            out.extend(next.iter().copied());
            frontier = next;
        }
        out
    }

    /// Serialized address "k:i1,i2,...,in".
    pub fn address(&self, n: usize) -> String {
        let coords: Vec<String> = self.idx[..n].iter().map(|c| c.to_string()).collect();
        format!("{}:{}", self.gen, coords.join(","))
    }

    pub fn parse_address(geom: &RootGeometry, s: &str) -> Result<Self, DyadicError> {
        let bad = || DyadicError::BadAddress(s.to_string());
        let (k, rest) = s.split_once(':').ok_or_else(bad)?;
        let gen: u32 = k.trim().parse().map_err(|_| bad())?;
        let idx: Vec<u32> = rest
            .split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        if idx.len() != geom.n {
            return Err(bad());
        }
        DyadicCube::new(geom, gen, &idx)
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Display does not know n; print all nonzero-prefix coords via MAX_N is
        // ambiguous, so the canonical serialization goes through `address`.
        write!(f, "{}:{},{},{}", self.gen, self.idx[0], self.idx[1], self.idx[2])
    }
}

/// Locate the unique generation-`k` cube containing `x` (half-open cells).
pub fn locate(geom: &RootGeometry, x: &[f64], k: u32) -> Result<DyadicCube, DyadicError> {
    if k > geom.depth {
        return Err(DyadicError::GenerationOutOfRange(k));
    }
    let side = ratio_to_f64(geom.side);
    let mut idx = [0u32; MAX_N];
    for a in 0..geom.n {
        let rel = (x[a] - ratio_to_f64(geom.origin[a])) / side;
        if !(0.0..1.0).contains(&rel) {
            return Err(DyadicError::OutOfDomain);
        }
        idx[a] = (rel * (1u64 << k) as f64).floor() as u32;
        if idx[a] >= (1 << k) {
            return Err(DyadicError::OutOfDomain);
        }
    }
    Ok(DyadicCube { gen: k, idx })
}

/// Generations `F_0, F_1, ...` of a contracting family. `F_0 = {root}`; the
/// stored list is finite, which realizes `|Omega_k| -> 0` on a finite tree
/// (generations past the end are empty).
#[derive(Debug, Clone, PartialEq)]
pub struct ContractingFamily {
    pub root: DyadicCube,
    pub generations: Vec<Vec<DyadicCube>>,
}

impl ContractingFamily {
    pub fn new(root: DyadicCube, generations: Vec<Vec<DyadicCube>>) -> Self {
        ContractingFamily { root, generations }
    }

    /// All member cubes with their generation index.
    pub fn iter_cubes(&self) -> impl Iterator<Item = (usize, &DyadicCube)> {
        self.generations.iter().enumerate().flat_map(|(k, g)| g.iter().map(move |c| (k, c)))
    }

    pub fn cube_count(&self) -> usize {
        self.generations.iter().map(|g| g.len()).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyViolation {
    #[error("generation 0 must be exactly the root cube")]
    FirstGenerationNotRoot,
    #[error("generation {gen} not pairwise disjoint: {a} overlaps {b}")]
    NotPairwiseDisjoint { gen: usize, a: String, b: String },
    #[error("cube {cube} in generation {gen} is not a strict descendant of generation {parent_gen}")]
    NotStrictDescendant { gen: usize, cube: String, parent_gen: usize },
    #[error("cube {cube}: |E_P|/|P| = {}/{} < eta", ratio.0, ratio.1)]
    NotEtaSparse { cube: String, ratio: (usize, usize) },
    #[error("eta must lie in (0,1)")]
    BadEta,
}

/// Check disjointness per generation, strict-descendant nesting, and `F_0 = {root}`.
///
/// Dyadic cubes overlap iff one contains the other, so all checks are exact
/// address arithmetic.
pub fn validate_contracting(fam: &ContractingFamily) -> Result<(), FamilyViolation> {
    if fam.generations.is_empty()
        || fam.generations[0].len() != 1
        || fam.generations[0][0] != fam.root
    {
        return Err(FamilyViolation::FirstGenerationNotRoot);
    }
    for (k, gen) in fam.generations.iter().enumerate() {
        for (i, a) in gen.iter().enumerate() {
            for b in gen.iter().skip(i + 1) {
                if a.contains(b) || b.contains(a) {
                    return Err(FamilyViolation::NotPairwiseDisjoint {
                        gen: k,
                        a: a.to_string(),
                        b: b.to_string(),
                    });
                }
            }
        }
        if k > 0 {
            for c in gen {
                let ok = fam.generations[k - 1]
                    .iter()
                    .any(|p| p.contains(c) && p.gen < c.gen);
                if !ok {
                    return Err(FamilyViolation::NotStrictDescendant {
                        gen: k,
                        cube: c.to_string(),
                        parent_gen: k - 1,
                    });
                }
            }
        }
    }
    Ok(())
}

/// A contracting family together with its sparseness certificate: per-cube
/// sets `E_P = P \ Omega_{k+1}` (stored as leaf lists, aligned with
/// `family.generations`) and the certified `eta`.
#[derive(Debug, Clone)]
pub struct SparseFamily {
    pub family: ContractingFamily,
    pub eta: Rational,
    /// `e_sets[k][i]` = leaf cells of `E_P` for `family.generations[k][i]`.
    pub e_sets: Vec<Vec<Vec<usize>>>,
}

/// Compute every `E_P` exactly and certify `|E_P| >= eta |P|`.
pub fn validate_eta_sparse(
    geom: &RootGeometry,
    fam: &ContractingFamily,
    eta: Rational,
) -> Result<SparseFamily, FamilyViolation> {
    if eta <= Rational::zero() || eta >= Rational::one() {
        return Err(FamilyViolation::BadEta);
    }
    validate_contracting(fam)?;
    let mut e_sets: Vec<Vec<Vec<usize>>> = Vec::with_capacity(fam.generations.len());
    let empty: Vec<DyadicCube> = Vec::new();
    for (k, gen) in fam.generations.iter().enumerate() {
        let next = fam.generations.get(k + 1).unwrap_or(&empty);
        let mut gen_sets = Vec::with_capacity(gen.len());
        for p in gen {
            let inside: Vec<&DyadicCube> = next.iter().filter(|c| p.contains(c)).collect();
            let e: Vec<usize> = p
                .leaves(geom)
                .into_iter()
                .filter(|&leaf| {
                    let coords = geom.leaf_coords(leaf);
                    let lc = DyadicCube { gen: geom.depth, idx: coords };
                    !inside.iter().any(|c| c.contains(&lc))
                })
                .collect();
            // |E_P| >= eta |P|  <=>  cnt * den >= num * N  (exact integers)
            let cnt = e.len() as i128;
            let n_p = p.leaf_count(geom) as i128;
            if cnt * eta.denom() < eta.numer() * n_p {
                return Err(FamilyViolation::NotEtaSparse {
                    cube: p.address(geom.n),
                    ratio: (cnt as usize, n_p as usize),
                });
            }
            gen_sets.push(e);
        }
        e_sets.push(gen_sets);
    }
    Ok(SparseFamily { family: fam.clone(), eta, e_sets })
}

/// One row of the overlap distribution table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapRow {
    pub alpha: u32,
    /// exact measure of `{sum chi_P > alpha}` as f64
    pub measure: f64,
    /// `(1-eta)^(alpha-1) |Q|`
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct OverlapDistribution {
    /// per-leaf overlap count `sum_P chi_P(x)` on the family root
    pub overlap: Vec<u32>,
    pub rows: Vec<OverlapRow>,
    pub all_ok: bool,
}

/// Exact overlap counts and the distributional bound
/// `|{sum chi_P > alpha}| <= (1-eta)^(alpha-1) |Q|` for integer `alpha >= 0`.
///
/// The comparison is done in rational arithmetic; the row stores f64 renderings.
pub fn overlap_distribution(geom: &RootGeometry, sparse: &SparseFamily) -> OverlapDistribution {
    let root = sparse.family.root;
    let root_leaves = root.leaves(geom);
    let offset: std::collections::HashMap<usize, usize> =
        root_leaves.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut overlap = vec![0u32; root_leaves.len()];
    for (_, c) in sparse.family.iter_cubes() {
        for leaf in c.leaves(geom) {
            overlap[offset[&leaf]] += 1;
        }
    }
    let max_k = sparse.family.generations.len() as u32;
    let leaf_m = geom.leaf_measure();
    let root_m = root.measure(geom);
    let one_minus = Rational::one() - sparse.eta;
    let mut rows = Vec::new();
    let mut all_ok = true;
    for alpha in 0..=max_k {
        let cnt = overlap.iter().filter(|&&o| o > alpha).count() as i128;
        // cnt * m_leaf <= (1-eta)^(alpha-1) * |Q| exactly
        let lhs = Rational::from_integer(cnt) * leaf_m;
        let bound = pow_signed(one_minus, alpha as i32 - 1) * root_m;
        let ok = lhs <= bound;
        all_ok &= ok;
        rows.push(OverlapRow {
            alpha,
            measure: ratio_to_f64(lhs),
            bound: ratio_to_f64(bound),
            ok,
        });
        if cnt == 0 && alpha > 0 {
            break;
        }
    }
    OverlapDistribution { overlap, rows, all_ok }
}

fn pow_signed(r: Rational, e: i32) -> Rational {
    if e >= 0 {
        num::pow::pow(r, e as usize)
    } else {
        Rational::one() / num::pow::pow(r, (-e) as usize)
    }
}
