use paramix::basis::{basis_matrix_hf, basis_matrix_lf, frobenius_inner, BasisTable, Sign};
use paramix::eom::coupling_matrix;
use paramix::ppm::{project_raw, project_pumps};
use paramix::{CMatrix, Complex64, ModeGrid, PumpSet};
use proptest::prelude::*;

fn grid(m_lo: i64, n: usize) -> ModeGrid {
    ModeGrid::new(m_lo, m_lo + n as i64 - 1, 1e5, 1.12e8, 0.0).unwrap()
}

/// Expected `(B_a, B_b)` from the index rules alone.
fn analytic_gram(g: &ModeGrid, a: (bool, i64, Sign), b: (bool, i64, Sign)) -> i64 {
    if a != b {
        return 0;
    }
    let n = g.n_modes() as i64;
    match a {
        (true, k, _) => 2 * (n - k),
        (false, kp, _) => n - (kp - (g.m_lo() + g.m_hi())).abs(),
    }
}

fn labels(g: &ModeGrid) -> Vec<(bool, i64, Sign)> {
    let mut out = Vec::new();
    for k in g.lf_indices() {
        out.push((true, k, Sign::Plus));
        out.push((true, k, Sign::Minus));
    }
    for k in g.hf_indices() {
        out.push((false, k, Sign::Plus));
        out.push((false, k, Sign::Minus));
    }
    out
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn pumps_for(g: &ModeGrid, values: &[Complex64]) -> PumpSet {
    let mut p = PumpSet::new();
    let mut it = values.iter().cycle();
    for k in g.lf_indices() {
        p.set_lf(k, *it.next().unwrap());
    }
    for k in g.hf_indices() {
        p.set_hf(k, *it.next().unwrap());
    }
    p
}

#[test]
fn gram_matrix_is_diagonal_with_analytic_norms() {
    for n in 1..=12 {
        for m_lo in [-(n as i64) / 2, 0, 3] {
            let g = grid(m_lo, n);
            let table = BasisTable::new(&g);
            let all = table.all();
            let labels = labels(&g);
            assert_eq!(all.len(), 2 * (3 * n - 2));
            for (i, a) in all.iter().enumerate() {
                for (j, b) in all.iter().enumerate() {
                    assert_eq!(a.inner(b), analytic_gram(&g, labels[i], labels[j]), "N={n} m_lo={m_lo} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn partners_are_transposes() {
    let g = grid(-2, 5);
    for k in g.lf_indices() {
        let p = basis_matrix_lf(&g, k, Sign::Plus).unwrap().to_dense();
        let m = basis_matrix_lf(&g, k, Sign::Minus).unwrap().to_dense();
        assert_eq!(p.transpose(), m);
    }
    for k in g.hf_indices() {
        let p = basis_matrix_hf(&g, k, Sign::Plus).unwrap().to_dense();
        let m = basis_matrix_hf(&g, k, Sign::Minus).unwrap().to_dense();
        assert_eq!(p.transpose(), -m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distinct_elements_have_disjoint_support(n in 1usize..10, m_lo in -6i64..6) {
        let g = grid(m_lo, n);
        let table = BasisTable::new(&g);
        let all = table.all();
        for (i, a) in all.iter().enumerate() {
            for b in all.iter().skip(i + 1) {
                for ea in a.entries() {
                    prop_assert!(!b.entries().iter().any(|eb| (eb.0, eb.1) == (ea.0, ea.1)));
                }
            }
        }
    }

    #[test]
    fn coupling_has_conjugate_pair_structure(n in 1usize..8, vals in prop::collection::vec(complex(), 1..30)) {
        let g = grid(-(n as i64) / 2, n);
        let dm = coupling_matrix(&g, &pumps_for(&g, &vals)).unwrap();
        for r in (0..g.dim()).step_by(2) {
            for c in (0..g.dim()).step_by(2) {
                // a-row / a†-row blocks are mirrored with a sign flip and conjugation
                prop_assert!((dm[(r + 1, c + 1)] + dm[(r, c)].conj()).norm() < 1e-15);
                prop_assert!((dm[(r + 1, c)] + dm[(r, c + 1)].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn expansion_then_projection_is_identity(n in 1usize..9, m_lo in -5i64..5, vals in prop::collection::vec(complex(), 1..30)) {
        let g = grid(m_lo, n);
        let p = pumps_for(&g, &vals);
        let back = project_pumps(&coupling_matrix(&g, &p).unwrap(), &g).unwrap();
        prop_assert!(back.max_abs_diff(&p) < 1e-14);
    }

    #[test]
    fn projection_is_real_linear(
        n in 1usize..7,
        a in prop::collection::vec(complex(), 1..40),
        b in prop::collection::vec(complex(), 1..40),
        s in -3.0f64..3.0,
        t in -3.0f64..3.0,
    ) {
        let g = grid(0, n);
        let d = g.dim();
        let ma = CMatrix::from_fn(d, d, |r, c| a[(r * d + c) % a.len()]);
        let mb = CMatrix::from_fn(d, d, |r, c| b[(r * d + c) % b.len()]);
        let combo = ma.map(|z| z * s) + mb.map(|z| z * t);
        let pa = project_pumps(&ma, &g).unwrap();
        let pb = project_pumps(&mb, &g).unwrap();
        let pc = project_pumps(&combo, &g).unwrap();
        for (kind_lf, k) in g.lf_indices().map(|k| (true, k)).chain(g.hf_indices().map(|k| (false, k))) {
            let get = |p: &PumpSet| if kind_lf { p.lf(k) } else { p.hf(k) };
            prop_assert!((get(&pc) - (get(&pa) * s + get(&pb) * t)).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_is_invisible_to_projection(n in 1usize..8, diag in prop::collection::vec(complex(), 16)) {
        let g = grid(-1, n);
        let table = BasisTable::new(&g);
        let mut m = CMatrix::zeros(g.dim(), g.dim());
        for i in 0..g.dim() {
            m[(i, i)] = diag[i % diag.len()];
        }
        let proj = project_raw(&m, &table).unwrap();
        prop_assert!(proj.pumps().tones().all(|(_, _, v)| v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn frobenius_is_symmetric_bilinear(vals in prop::collection::vec(complex(), 18), s in complex()) {
        let a = CMatrix::from_fn(3, 3, |r, c| vals[r * 3 + c]);
        let b = CMatrix::from_fn(3, 3, |r, c| vals[9 + r * 3 + c]);
        let ab = frobenius_inner(&a, &b).unwrap();
        prop_assert!((ab - frobenius_inner(&b, &a).unwrap()).norm() < 1e-14);
        prop_assert!((frobenius_inner(&(a.map(|z| z * s)), &b).unwrap() - ab * s).norm() < 1e-13);
    }
}
