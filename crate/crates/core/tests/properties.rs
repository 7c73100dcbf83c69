#![allow(clippy::needless_range_loop)]

use ase_core::ase::{ase_from_scaled, schur_chain};
use ase_core::gkf::simplified_schur;
use ase_core::kernels::{distance_matrix, vandermonde, vandermonde_ranks, wronskian, MonomialBasis};
use ase_core::linalg::{complement_basis, sym_eigen_desc};
use ase_core::oracle::{default_grid, eigen_sweep, match_ase, SweepSource};
use ase_core::scaling::{auto_scale, check_valid, extract_h, tight_entries};
use ase_core::{
    ase_from_gkf, block_rrqr, iterative_ase, Ase, DiagonalScaling, Exponent, GkfForm, KernelModel, MatrixSeries,
    NodeSet, ScalarSeries, ScaledForm, ValuationMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

pub const SEED: u64 = 0x5eed_a5e0;
pub const CASES: u32 = 200;

fn config() -> ProptestConfig {
    ProptestConfig { cases: CASES, rng_seed: RngSeed::Fixed(SEED), failure_persistence: None, ..ProptestConfig::default() }
}

fn e(v: i64) -> Exponent {
    Exponent::int(v)
}

fn matrix(n: usize, m: usize, vals: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |i, j| vals[(i * m + j) % vals.len()])
}

fn spd(n: usize, vals: &[f64]) -> DMatrix<f64> {
    let a = matrix(n, n, vals);
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn sym(n: usize, vals: &[f64]) -> DMatrix<f64> {
    let a = matrix(n, n, vals);
    (&a + a.transpose()) * 0.5
}

/// Block sizes summing to n with nondecreasing integer exponents 0, g_1, g_1+g_2, ….
fn scaling_from(n: usize, cuts: &[bool], gaps: &[i64]) -> DiagonalScaling {
    let mut blocks: Vec<(Exponent, usize)> = vec![(e(0), 1)];
    for i in 1..n {
        if cuts[i % cuts.len()] {
            let nu = blocks.last().unwrap().0 + e(gaps[i % gaps.len()]);
            blocks.push((nu, 1));
        } else {
            blocks.last_mut().unwrap().1 += 1;
        }
    }
    DiagonalScaling::new(blocks).unwrap()
}

/// Δ H Δ as an exact series.
fn scaled_series(h: &DMatrix<f64>, scaling: &DiagonalScaling) -> MatrixSeries {
    let nu = scaling.expand();
    let n = nu.len();
    let mut terms: std::collections::BTreeMap<Exponent, DMatrix<f64>> = Default::default();
    for i in 0..n {
        for j in 0..n {
            terms.entry(nu[i] + nu[j]).or_insert_with(|| DMatrix::zeros(n, n))[(i, j)] = h[(i, j)];
        }
    }
    MatrixSeries::from_terms(n, terms.into_iter().collect()).unwrap()
}

fn unit_vals(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn omega_strategy() -> impl Strategy<Value = Vec<Vec<Exponent>>> {
    (1usize..7).prop_flat_map(|n| prop::collection::vec(prop::option::weighted(0.8, 0i64..12), n * n)).prop_map(|raw| {
        let n = (raw.len() as f64).sqrt() as usize;
        let mut rows = vec![vec![Exponent::PLUS_INFINITY; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = raw[i * n + j].map(|k| Exponent::new(k, 2).unwrap()).unwrap_or(Exponent::PLUS_INFINITY);
                rows[i][j] = v;
                rows[j][i] = v;
            }
            if rows[i].iter().all(|x| !x.is_finite()) {
                rows[i][i] = e(6);
            }
        }
        rows
    })
}

fn random_nodes(n: usize, d: usize, vals: &[f64]) -> NodeSet {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..d).map(|k| vals[(i * d + k) % vals.len()]).collect()).collect();
    NodeSet::from_rows(&rows).unwrap()
}

fn distinct(rows: &NodeSet) -> bool {
    let n = rows.n();
    (0..n).all(|i| {
        (0..i).all(|j| rows.point(i).iter().zip(rows.point(j)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-3)
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn valuation_of_product_is_additive(
        a in prop::collection::vec((0i64..6, -8i64..8), 1..5),
        b in prop::collection::vec((0i64..6, -8i64..8), 1..5),
    ) {
        let mk = |t: &[(i64, i64)]| ScalarSeries::new(t.iter().map(|(k, c)| (e(*k), *c as f64 / 8.0)), e(20)).unwrap();
        let (sa, sb) = (mk(&a), mk(&b));
        prop_assume!(!sa.is_zero() && !sb.is_zero());
        prop_assert_eq!(sa.mul(&sb).valuation(), sa.valuation() + sb.valuation());
    }

    #[test]
    fn evaluation_is_linear(n in 1usize..5, va in unit_vals(40), vb in unit_vals(40), eps in 1e-6f64..1.0) {
        let a = MatrixSeries::from_terms(n, vec![(e(0), sym(n, &va)), (Exponent::frac(3, 2), sym(n, &va[3..]))]).unwrap();
        let b = MatrixSeries::from_terms(n, vec![(e(1), sym(n, &vb)), (e(2), sym(n, &vb[5..]))]).unwrap();
        let lhs = a.add(&b).unwrap().evaluate(eps);
        let rhs = a.evaluate(eps) + b.evaluate(eps);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm().max(1e-300));
    }

    #[test]
    fn series_inverse_residual(n in 1usize..6, vals in unit_vals(120), order in 3i64..8) {
        let mut terms = vec![(e(0), DMatrix::identity(n, n) * 2.0 + matrix(n, n, &vals) * 0.3)];
        terms.push((Exponent::frac(1, 2), matrix(n, n, &vals[7..])));
        terms.push((e(2), matrix(n, n, &vals[13..])));
        let h = MatrixSeries::new(n, n, terms, e(order), false).unwrap();
        let inv = h.inverse(e(order)).unwrap();
        let prod = h.mul(&inv).unwrap().sub(&MatrixSeries::identity(n)).unwrap();
        for (ex, m) in prod.terms() {
            if *ex < e(order) {
                prop_assert!(m.norm() < 1e-10, "coefficient at {} has norm {}", ex, m.norm());
            }
        }
    }

    #[test]
    fn symmetric_series_has_symmetric_valuations(n in 1usize..6, vals in unit_vals(60), mask in prop::collection::vec(any::<bool>(), 36)) {
        let mut m = sym(n, &vals);
        for i in 0..n { for j in 0..=i { if mask[i * 6 + j] { m[(i, j)] = 0.0; m[(j, i)] = 0.0; } } }
        let k = MatrixSeries::from_terms(n, vec![(e(0), m), (e(1), sym(n, &vals[9..]))]).unwrap();
        prop_assert!(k.valuation_matrix().is_symmetric());
    }

    #[test]
    fn auto_scale_is_valid_and_maximally_tight(rows in omega_strategy()) {
        let n = rows.len();
        let omega = ValuationMatrix::from_rows(rows.clone()).unwrap();
        let auto = auto_scale(&omega).unwrap();
        for i in 0..n {
            prop_assert!(!auto.nu[i].is_negative());
            let mut tight = false;
            for j in 0..n {
                let s = auto.nu[i] + auto.nu[j];
                prop_assert!(s <= rows[i][j], "ν_{} + ν_{} exceeds Ω", i, j);
                tight |= s == rows[i][j];
            }
            prop_assert!(tight, "row {} can be increased alone", i);
        }
        let permuted: Vec<Vec<Exponent>> =
            auto.order.iter().map(|&i| auto.order.iter().map(|&j| rows[i][j]).collect()).collect();
        let pm = ValuationMatrix::from_rows(permuted).unwrap();
        prop_assert!(check_valid(&pm, &auto.scaling).unwrap().0);
        let t = tight_entries(&pm, &auto.scaling).unwrap();
        prop_assert!(t.iter().all(|(i, j)| t.contains(&(*j, *i))));
    }

    #[test]
    fn auto_scale_dominates_valid_scalings(rows in omega_strategy(), frac in prop::collection::vec(0.0f64..1.0, 6)) {
        let n = rows.len();
        let omega = ValuationMatrix::from_rows(rows.clone()).unwrap();
        let auto = auto_scale(&omega).unwrap();
        let cap: Vec<f64> = (0..n).map(|i| rows[i].iter().filter(|x| x.is_finite()).map(|x| x.to_f64()).fold(f64::INFINITY, f64::min) / 2.0).collect();
        let given: Vec<Exponent> = (0..n).map(|i| Exponent::new((frac[i] * cap[i] * 4.0).floor() as i64, 4).unwrap()).collect();
        for i in 0..n { for j in 0..n { prop_assert!(given[i] + given[j] <= rows[i][j]); } }
        let total = |v: &[Exponent]| v.iter().map(|x| x.to_f64()).sum::<f64>();
        prop_assert!(total(&auto.nu) >= total(&given) - 1e-12);
    }

    #[test]
    fn extracted_h_reconstructs_leading_terms(n in 1usize..6, vals in unit_vals(80), mask in prop::collection::vec(0u8..4, 36)) {
        let mut terms: std::collections::BTreeMap<Exponent, DMatrix<f64>> = Default::default();
        for i in 0..n {
            for j in 0..=i {
                let k = mask[i * 6 + j] as i64;
                let v = if i == j { 1.0 + vals[i].abs() } else { vals[(i * 7 + j) % vals.len()] };
                for (ex, c) in [(e(k + if i == j { 0 } else { 1 }), v), (e(5), vals[(i + j) % vals.len()])] {
                    let m = terms.entry(ex).or_insert_with(|| DMatrix::zeros(n, n));
                    m[(i, j)] += c;
                    if i != j { m[(j, i)] += c; }
                }
            }
        }
        let k = MatrixSeries::from_terms(n, terms.into_iter().collect()).unwrap();
        let auto = auto_scale(&k.valuation_matrix()).unwrap();
        let kp = k.select(&auto.order);
        let form = extract_h(&kp, &auto.scaling).unwrap();
        let nu = auto.scaling.expand();
        for i in 0..n {
            for j in 0..n {
                let s = nu[i] + nu[j];
                let lead = ScalarSeries::new([(s, form.h[(i, j)])], kp.trunc_order()).unwrap();
                prop_assert!(kp.entry(i, j).sub(&lead).valuation() > s);
            }
        }
    }

    #[test]
    fn ase_terms_are_symmetric_orthogonal_and_complete(
        n in 1usize..7, vals in unit_vals(60), cuts in prop::collection::vec(any::<bool>(), 6),
        gaps in prop::collection::vec(1i64..3, 6), definite in any::<bool>(),
    ) {
        let h = if definite { spd(n, &vals) } else { sym(n, &vals) + DMatrix::identity(n, n) * 0.1 };
        let scaling = scaling_from(n, &cuts, &gaps);
        let form = ScaledForm { block_sizes: scaling.block_sizes(), scaling, h };
        let ase = ase_from_scaled(&form, 1e-10).unwrap();
        prop_assert!(ase.check_invariants().is_ok(), "{:?}", ase.check_invariants());
        if definite {
            prop_assert!(ase.is_complete());
            prop_assert_eq!(ase.rank_sum(), n);
        }
    }

    #[test]
    fn ase_commutes_with_block_permutations(
        n in 2usize..7, vals in unit_vals(60), cuts in prop::collection::vec(any::<bool>(), 6),
        gaps in prop::collection::vec(1i64..3, 6), swaps in prop::collection::vec(any::<bool>(), 6),
    ) {
        let h = spd(n, &vals);
        let scaling = scaling_from(n, &cuts, &gaps);
        let nu = scaling.expand();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in 1..n {
            if swaps[i % swaps.len()] && nu[i] == nu[i - 1] { perm.swap(i, i - 1); }
        }
        let p = DMatrix::from_fn(n, n, |i, j| if perm[j] == i { 1.0 } else { 0.0 });
        let a = ase_from_scaled(&ScaledForm { block_sizes: scaling.block_sizes(), scaling: scaling.clone(), h: h.clone() }, 1e-10).unwrap();
        let b = ase_from_scaled(&ScaledForm { block_sizes: scaling.block_sizes(), scaling, h: p.transpose() * &h * &p }, 1e-10).unwrap();
        prop_assert_eq!(a.valuations(), b.valuations());
        for (ga, gb) in a.groups.iter().zip(&b.groups) {
            prop_assert!((p.transpose() * &ga.term * &p - &gb.term).norm() < 1e-10);
        }
    }

    #[test]
    fn scaled_oracle_equivalence(
        n in 1usize..7, vals in unit_vals(60), cuts in prop::collection::vec(any::<bool>(), 6),
        gaps in prop::collection::vec(1i64..3, 6),
    ) {
        let h = spd(n, &vals);
        let scaling = scaling_from(n, &cuts, &gaps);
        let k = scaled_series(&h, &scaling);
        let ase = ase_from_scaled(&ScaledForm { block_sizes: scaling.block_sizes(), scaling: scaling.clone(), h }, 1e-10).unwrap();
        let eps = 1e-4;
        let (vals_num, _) = ase_core::linalg::jacobi_eigen_by_magnitude(&k.evaluate(eps));
        let mut off = 0;
        for g in ase_core::eigen_readout(&ase) {
            let mut num: Vec<f64> = vals_num[off..off + g.count()].iter().map(|v| v / g.valuation.pow(eps)).collect();
            num.sort_by(|a, b| b.total_cmp(a));
            for (x, y) in num.iter().zip(&g.leading_values) {
                prop_assert!((x - y).abs() <= 1e-2 * y.abs(), "group {}: {} vs {}", g.valuation, x, y);
            }
            off += g.count();
        }
    }

    #[test]
    fn gkf_oracle_equivalence(
        n in 1usize..7, vvals in unit_vals(36), wvals in unit_vals(36),
        cuts in prop::collection::vec(any::<bool>(), 6), gaps in prop::collection::vec(1i64..3, 6),
    ) {
        let v = matrix(n, n, &vvals) + DMatrix::identity(n, n) * 1.5;
        let form = GkfForm::new(v, scaling_from(n, &cuts, &gaps), spd(n, &wvals)).unwrap();
        let ase = ase_from_gkf(&form, 1e-10).unwrap();
        prop_assert!(ase.is_complete());
        let sweep = eigen_sweep(&SweepSource::Gkf(&form), &default_grid()).unwrap();
        let report = match_ase(&ase, &sweep, 1e-2, 1e-2).unwrap();
        prop_assert!(report.pass, "{:?}", report);
        for g in &report.groups {
            if g.status == ase_core::oracle::GroupStatus::Pass {
                for s in g.slopes.iter().flatten() {
                    prop_assert!((s - g.valuation.to_f64()).abs() <= 0.05);
                }
            }
        }
    }

    #[test]
    fn gkf_with_identity_v_matches_scaled_path(
        n in 1usize..7, wvals in unit_vals(36), cuts in prop::collection::vec(any::<bool>(), 6),
        gaps in prop::collection::vec(1i64..3, 6),
    ) {
        let w = spd(n, &wvals);
        let scaling = scaling_from(n, &cuts, &gaps);
        let a = ase_from_gkf(&GkfForm::new(DMatrix::identity(n, n), scaling.clone(), w.clone()).unwrap(), 1e-10).unwrap();
        let b = ase_from_scaled(&ScaledForm { block_sizes: scaling.block_sizes(), scaling, h: w }, 1e-10).unwrap();
        prop_assert_eq!(a.valuations(), b.valuations());
        for (ga, gb) in a.groups.iter().zip(&b.groups) {
            prop_assert!((&ga.term - &gb.term).norm() < 1e-10);
        }
    }

    #[test]
    fn gkf_is_equivariant_under_orthogonal_congruence(
        n in 1usize..7, vvals in unit_vals(36), wvals in unit_vals(36), pvals in unit_vals(36),
        cuts in prop::collection::vec(any::<bool>(), 6), gaps in prop::collection::vec(1i64..3, 6),
    ) {
        let v = matrix(n, n, &vvals) + DMatrix::identity(n, n) * 1.5;
        let p = matrix(n, n, &pvals).qr().q();
        let scaling = scaling_from(n, &cuts, &gaps);
        let w = spd(n, &wvals);
        let a = ase_from_gkf(&GkfForm::new(v.clone(), scaling.clone(), w.clone()).unwrap(), 1e-10).unwrap();
        let b = ase_from_gkf(&GkfForm::new(&p * v, scaling, w).unwrap(), 1e-10).unwrap();
        prop_assert_eq!(a.valuations(), b.valuations());
        prop_assert_eq!(a.rank_sum(), n);
        for (ga, gb) in a.groups.iter().zip(&b.groups) {
            let scale = ga.term.norm().max(1.0);
            prop_assert!((&p * &ga.term * p.transpose() - &gb.term).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn simplified_schur_matches_chain(
        n in 1usize..7, vvals in unit_vals(36), wvals in unit_vals(36),
        cuts in prop::collection::vec(any::<bool>(), 6), gaps in prop::collection::vec(1i64..3, 6),
    ) {
        let v = matrix(n, n, &vvals) + DMatrix::identity(n, n) * 1.5;
        let scaling = scaling_from(n, &cuts, &gaps);
        let w = spd(n, &wvals);
        let qr = block_rrqr(&v, &scaling.block_sizes(), 1e-10).unwrap();
        let (h, sizes) = ase_core::build_h(&qr, &w);
        let chain = schur_chain(&h, &sizes, 1e-10).unwrap();
        for (j, s) in chain.complements.iter().enumerate() {
            let t = simplified_schur(&w, &qr, j).unwrap();
            prop_assert!((&t - s).norm() < 1e-9 * s.norm().max(1.0));
        }
    }

    #[test]
    fn iterative_ase_satisfies_invariants(
        n in 1usize..6, vals in unit_vals(80), mask in prop::collection::vec(0u8..4, 36), swaps in prop::collection::vec(any::<bool>(), 6),
    ) {
        let mut terms: std::collections::BTreeMap<Exponent, DMatrix<f64>> = Default::default();
        for i in 0..n {
            for j in 0..=i {
                let k = mask[i * 6 + j] as i64;
                let c = if i == j { 1.0 } else { vals[(i * 5 + j) % vals.len()] };
                let m = terms.entry(e(k)).or_insert_with(|| DMatrix::zeros(n, n));
                m[(i, j)] += c;
                if i != j { m[(j, i)] += c; }
            }
        }
        terms.entry(e(8)).or_insert_with(|| DMatrix::zeros(n, n));
        let k = MatrixSeries::new(n, n, terms, e(9), true).unwrap();
        let ase = iterative_ase(&k, 1e-10, 64).unwrap();
        prop_assert!(ase.check_invariants().is_ok(), "{:?}", ase.check_invariants());

        let mut perm: Vec<usize> = (0..n).collect();
        for i in 1..n { if swaps[i] { perm.swap(i, i - 1); } }
        let kp = k.select(&perm);
        let bp = iterative_ase(&kp, 1e-10, 64).unwrap();
        prop_assert!(bp.check_invariants().is_ok());
        if ase.is_complete() && bp.is_complete() {
            let p = DMatrix::from_fn(n, n, |i, j| if perm[j] == i { 1.0 } else { 0.0 });
            prop_assert_eq!(ase.valuations(), bp.valuations());
            for (ga, gb) in ase.groups.iter().zip(&bp.groups) {
                prop_assert!((p.transpose() * &ga.term * &p - &gb.term).norm() < 1e-8 * ga.term.norm().max(1.0));
            }
        }
    }

    #[test]
    fn wronskians_within_smoothness_are_spd(d in 1usize..4, deg in 0usize..6, matern in any::<bool>()) {
        let (kernel, deg) = if matern { (KernelModel::matern2(), deg.min(1)) } else { (KernelModel::gaussian(), deg.min(if d == 1 { 5 } else { 3 })) };
        let w = wronskian(&kernel, d, deg).unwrap();
        prop_assert!((&w - w.transpose()).norm() == 0.0);
        prop_assert!(w.clone().cholesky().is_some(), "W not SPD for d={} deg={}", d, deg);
    }

    #[test]
    fn distance_matrices_are_conditionally_definite(n in 4usize..10, d in 1usize..4, vals in unit_vals(30), r in 1u32..3) {
        let nodes = random_nodes(n, d, &vals);
        prop_assume!(distinct(&nodes));
        let (v, _) = vandermonde(&nodes, (r - 1) as usize);
        prop_assume!(ase_core::linalg::rank(&v, 1e-9) == v.ncols() && n > v.ncols());
        let a = complement_basis(&v, 1e-9);
        let sign = if r % 2 == 1 { -1.0 } else { 1.0 };
        let m = a.transpose() * distance_matrix(&nodes, 2 * r - 1) * &a * sign;
        let (ev, _) = sym_eigen_desc(&m);
        prop_assert!(*ev.last().unwrap() > 0.0, "smallest eigenvalue {}", ev.last().unwrap());
    }

    #[test]
    fn vandermonde_rank_grows_until_full(n in 2usize..9, d in 1usize..4, vals in unit_vals(30), kind in 0u8..3, seed in 0u64..1000) {
        let nodes = match kind {
            0 => random_nodes(n, d, &vals),
            1 => NodeSet::circle(n, seed).unwrap(),
            _ => NodeSet::cubic_curve(n, seed).unwrap(),
        };
        prop_assume!(distinct(&nodes));
        let ranks = vandermonde_ranks(&ase_core::kernels::normalised(&nodes).0, n - 1, 1e-9);
        for s in 1..n {
            if ranks[s - 1] < n {
                prop_assert!(ranks[s] > ranks[s - 1], "ranks {:?}", ranks);
            }
        }
        prop_assert_eq!(*ranks.last().unwrap(), n);
    }
}

#[test]
fn monomial_counts_are_cumulative() {
    for d in 1..=10 {
        for s in 0..=10 {
            let sum: usize = (0..=s).map(|t| MonomialBasis::count_degree(t, d)).sum();
            assert_eq!(MonomialBasis::count_total(s, d), sum);
        }
        assert_eq!(MonomialBasis::new(d.min(4), 3).len(), MonomialBasis::count_total(3, d.min(4)));
    }
}

#[test]
fn ase_json_roundtrip_is_match_compatible() {
    let h = spd(4, &[0.3, -0.2, 0.9, 0.1, 0.5, -0.7, 0.4]);
    let scaling = DiagonalScaling::new(vec![(e(0), 1), (e(1), 2), (e(2), 1)]).unwrap();
    let k = scaled_series(&h, &scaling);
    let ase = ase_from_scaled(&ScaledForm { block_sizes: scaling.block_sizes(), scaling, h }, 1e-10).unwrap();
    let back = Ase::from_json_str(&ase.to_json_value().to_string()).unwrap();
    for (a, b) in ase.groups.iter().zip(&back.groups) {
        assert!((&a.term - &b.term).norm() < 1e-12);
    }
    let sweep = eigen_sweep(&SweepSource::Series(&k), &default_grid()).unwrap();
    assert!(match_ase(&back, &sweep, 1e-2, 1e-2).unwrap().pass);
}

/// Every property above, grouped by the invariant family it checks. Used by the
/// acceptance target to run and time the full suite.
#[allow(dead_code)]
pub type Suite = (&'static str, &'static [(&'static str, fn())]);

#[allow(dead_code)]
pub const SUITES: &[Suite] = &[
    ("ase invariants", &[
        ("terms", ase_terms_are_symmetric_orthogonal_and_complete),
        ("permutations", ase_commutes_with_block_permutations),
        ("iterative", iterative_ase_satisfies_invariants),
        ("json roundtrip", ase_json_roundtrip_is_match_compatible),
    ]),
    ("series algebra", &[
        ("valuation", valuation_of_product_is_additive),
        ("evaluation", evaluation_is_linear),
        ("inverse residual", series_inverse_residual),
        ("symmetry", symmetric_series_has_symmetric_valuations),
    ]),
    ("scaling", &[
        ("valid and tight", auto_scale_is_valid_and_maximally_tight),
        ("maximal", auto_scale_dominates_valid_scalings),
        ("extraction", extracted_h_reconstructs_leading_terms),
    ]),
    ("wronskian spd", &[("wronskian", wronskians_within_smoothness_are_spd)]),
    ("distance cpd", &[("distance", distance_matrices_are_conditionally_definite)]),
    ("vandermonde rank", &[
        ("growth", vandermonde_rank_grows_until_full),
        ("counts", monomial_counts_are_cumulative),
    ]),
    ("gkf oracle equivalence", &[
        ("gkf oracle", gkf_oracle_equivalence),
        ("scaled oracle", scaled_oracle_equivalence),
        ("identity v", gkf_with_identity_v_matches_scaled_path),
        ("congruence", gkf_is_equivariant_under_orthogonal_congruence),
        ("simplified schur", simplified_schur_matches_chain),
    ]),
];
