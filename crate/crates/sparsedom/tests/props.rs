//! Property tests for the exact-arithmetic invariants.

use proptest::prelude::*;
use sparsedom::dyadic::{ratio_to_f64, DyadicCube, Rational, RootGeometry};
use sparsedom::engine::toy_domination_check;
use sparsedom::family::{canonical_family, CanonicalKind};
use sparsedom::grid::{local_oscillation, p_average, GridFunction, Rearrangement};
use std::sync::Arc;

fn geom(n: usize, depth: u32) -> Arc<RootGeometry> {
    Arc::new(RootGeometry::unit(n, depth))
}

proptest! {
    #[test]
    fn children_partition_parent(gen in 0u32..5, idx in 0u32..32, n in 1usize..=2) {
        let depth = 5;
        let g = geom(n, depth);
        let idx_vec: Vec<u32> = (0..n).map(|a| (idx >> a) % (1 << gen)).collect();
        let cube = DyadicCube::new(&g, gen, &idx_vec).unwrap();
        let kids = cube.children(&g).unwrap();
        prop_assert_eq!(kids.len(), 1 << n);
        // exact measure additivity
        let total: Rational = kids.iter().map(|c| c.measure(&g)).sum();
        prop_assert_eq!(total, cube.measure(&g));
        // round trip and leaf partition
        let mut all_leaves = Vec::new();
        for k in &kids {
            prop_assert_eq!(k.parent().unwrap(), cube);
            all_leaves.extend(k.leaves(&g));
        }
        all_leaves.sort_unstable();
        let mut expected = cube.leaves(&g);
        expected.sort_unstable();
        prop_assert_eq!(all_leaves, expected);
    }

    #[test]
    fn rearrangement_matches_bruteforce(vals in prop::collection::vec(-5.0f64..5.0, 8), t_frac in 0.0f64..1.2) {
        let g = geom(1, 3);
        let m = ratio_to_f64(g.leaf_measure());
        let f = GridFunction::new(g.clone(), vals.clone()).unwrap();
        let r = sparsedom::grid::rearrangement(&f);
        let t = t_frac; // |Q| = 1
        let dist = |alpha: f64| vals.iter().filter(|v| v.abs() > alpha).count() as f64 * m;
        let mut cands: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        cands.push(0.0);
        cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let brute = cands.iter().cloned().find(|&a| dist(a) <= t).unwrap();
        prop_assert_eq!(r.query(t).unwrap(), brute);
        // |{|f| > f*(t)}| <= t
        prop_assert!(dist(r.query(t).unwrap()) <= t + 1e-15);
    }

    #[test]
    fn rearrangement_power_identity(vals in prop::collection::vec(0.0f64..3.0, 8), k in 0usize..9) {
        // (|f|^d)*(t) = (f*(t))^d exactly on grids
        let g = geom(1, 3);
        let m = ratio_to_f64(g.leaf_measure());
        let t = k as f64 * m;
        for d in [0.5f64, 2.0] {
            let r1 = Rearrangement::from_values(&vals, m);
            let powed: Vec<f64> = vals.iter().map(|v| v.powf(d)).collect();
            let r2 = Rearrangement::from_values(&powed, m);
            prop_assert_eq!(r2.query(t).unwrap(), r1.query(t).unwrap().powf(d));
        }
    }

    #[test]
    fn shortest_window_is_optimal(vals in prop::collection::vec(-2.0f64..2.0, 8), lam_i in 1usize..4) {
        let g = geom(1, 3);
        let m = ratio_to_f64(g.leaf_measure());
        let lambda = lam_i as f64 / 8.0; // in (0, 1/2)
        let f = GridFunction::new(g.clone(), vals.clone()).unwrap();
        let (omega, center) = local_oscillation(&f, &g.root_cube(), lambda).unwrap();
        // the returned center achieves its own omega
        let shifted: Vec<f64> = vals.iter().map(|v| v - center).collect();
        let achieved = Rearrangement::from_values(&shifted, m).query(lambda).unwrap();
        prop_assert!(achieved <= omega * (1.0 + 1e-12) + 1e-15);
        // no candidate center does better (midpoints of value pairs suffice)
        let mut cands: Vec<f64> = vals.clone();
        for i in 0..vals.len() {
            for j in (i + 1)..vals.len() {
                cands.push((vals[i] + vals[j]) / 2.0);
            }
        }
        let best = cands
            .iter()
            .map(|&c| {
                let s: Vec<f64> = vals.iter().map(|v| v - c).collect();
                Rearrangement::from_values(&s, m).query(lambda).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!(omega <= best * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn p_average_monotone_in_p(vals in prop::collection::vec(-3.0f64..3.0, 8)) {
        let g = geom(1, 3);
        let f = GridFunction::new(g.clone(), vals).unwrap();
        let root = g.root_cube();
        let a1 = p_average(&f, &root, 1.0).unwrap();
        let a2 = p_average(&f, &root, 2.0).unwrap();
        let a3 = p_average(&f, &root, 3.0).unwrap();
        prop_assert!(a1 <= a2 * (1.0 + 1e-12));
        prop_assert!(a2 <= a3 * (1.0 + 1e-12));
    }

    #[test]
    fn toy_domination_on_random_chain_families(
        vals in prop::collection::vec(-2.0f64..2.0, 16),
        picks in prop::collection::vec(0usize..2, 4),
    ) {
        // contracting chain family: F_{k+1} is one child of the F_k cube
        let g = geom(1, 4);
        let root = g.root_cube();
        let mut generations = vec![vec![root]];
        let mut cur = root;
        for &p in &picks {
            if cur.is_leaf(&g) {
                break;
            }
            cur = cur.children(&g).unwrap()[p];
            generations.push(vec![cur]);
        }
        let family = sparsedom::dyadic::ContractingFamily::new(root, generations);
        prop_assert!(sparsedom::dyadic::validate_contracting(&family).is_ok());
        let f = GridFunction::new(g.clone(), vals).unwrap();
        let fam = canonical_family(f, CanonicalKind::MeanCenter, 1.0);
        let ratio = toy_domination_check(&fam, &family, &root, 1.0);
        prop_assert!(ratio <= 1.0 + 1e-9, "toy domination ratio {} exceeds C_r^r = 1", ratio);
    }
}
