use proptest::prelude::*;
use sfwm::atomic::{build_structure_matrices, clebsch_gordan, LevelScheme, ManifoldKind};
use sfwm::zeeman::BlochModel;
use sfwm::Error;

fn fact(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `⟨j1 m1; j2 m2 | J M⟩` from the Racah closed form.
fn racah(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    if m1 + m2 != m || j < (j1 - j2).abs() || j > j1 + j2 || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    let pre = ((2 * j + 1) as f64 * fact(j + j1 - j2) * fact(j - j1 + j2) * fact(j1 + j2 - j) / fact(j1 + j2 + j + 1))
        .sqrt();
    let norm = (fact(j + m) * fact(j - m) * fact(j1 - m1) * fact(j1 + m1) * fact(j2 - m2) * fact(j2 + m2)).sqrt();
    let mut sum = 0.0;
    for k in 0..=(j1 + j2 + j) {
        let d = [k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k];
        if d.iter().any(|&x| x < 0) {
            continue;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / d.iter().map(|&x| fact(x)).product::<f64>();
    }
    pre * norm * sum
}

#[test]
fn clebsch_gordan_matches_racah_oracle() {
    let mut checked = 0;
    for fg in 0..=3 {
        for fe in 0..=4 {
            for mg in -fg..=fg {
                for me in -fe..=fe {
                    let q: i32 = me - mg;
                    let oracle = if q.abs() <= 1 { racah(fg, mg, 1, q, fe, me) } else { 0.0 };
                    let got = clebsch_gordan(fe, me, fg, mg);
                    assert!((got - oracle).abs() < 1e-12, "F'={fe} M'={me} F={fg} M={mg}: {got} vs {oracle}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 300);
    assert!((clebsch_gordan(2, 2, 1, 1) - racah(1, 1, 1, 1, 2, 2)).abs() < 1e-15);
}

#[test]
fn selection_rule_examples() {
    assert_eq!(clebsch_gordan(2, 2, 1, 0), 0.0);
    assert_eq!(clebsch_gordan(3, 0, 1, 0), 0.0);
}

#[test]
fn completeness_over_ground_sublevels() {
    for fg in 0..=3 {
        for fe in (fg - 1).max(0)..=fg + 1 {
            if fe == 0 && fg == 0 {
                continue;
            }
            for me in -fe..=fe {
                let s: f64 = (-fg..=fg).map(|mg| clebsch_gordan(fe, me, fg, mg).powi(2)).sum();
                assert!((s - 1.0).abs() < 1e-12, "F'={fe} M'={me} F={fg}: {s}");
            }
        }
    }
}

#[test]
fn structure_matrices_of_the_default_scheme() {
    let s = LevelScheme::default();
    let m = build_structure_matrices(&s).unwrap();
    assert_eq!((m.c_ge.rows, m.c_ge.cols), (8, 8));
    let g = s.ground_states();
    let e = s.excited_states();
    for (i, a) in g.iter().enumerate() {
        for (j, b) in g.iter().enumerate() {
            assert_eq!(m.r_g.get(i, j), if a.f == b.f { 1.0 } else { 0.0 });
            let expect = if a.f == b.f && a.m == b.m { 0.0 } else { s.gamma12 };
            assert_eq!(m.gamma.get(i, j), expect);
            assert_eq!(m.gamma.get(i, j), m.gamma.get(j, i));
        }
        for (k, x) in e.iter().enumerate() {
            let t = s
                .transition(&s.manifolds[a.manifold].label, &s.manifolds[x.manifold].label)
                .unwrap();
            let cg = clebsch_gordan(x.f as i32, x.m, a.f as i32, a.m);
            assert!((m.c_ge.get(i, k) - t.branching.sqrt() * cg).abs() < 1e-15);
        }
    }
}

#[test]
fn every_excited_sublevel_decays_at_unit_rate() {
    let s = LevelScheme::default();
    let model = BlochModel::new(&s, vec![0.0; 8], vec![0.0; 8], s.gamma_d1()).unwrap();
    let d = model.decay_matrix();
    for a in 0..8 {
        for b in 0..8 {
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((d[a * 8 + b] - expect).abs() < 1e-12, "D[{a}][{b}] = {}", d[a * 8 + b]);
        }
    }
}

#[test]
fn decay_operator_is_positive_semidefinite() {
    let s = LevelScheme::default();
    let m = build_structure_matrices(&s).unwrap();
    let d = m.c_eg().matmul(&m.c_ge).unwrap();
    for seed in 0..50u32 {
        let x: Vec<f64> = (0..8).map(|i| (((seed * 31 + i * 17) % 13) as f64 - 6.0) / 6.0).collect();
        let mut q = 0.0;
        for a in 0..8 {
            for b in 0..8 {
                q += x[a] * d.get(a, b) * x[b];
                assert!((d.get(a, b) - d.get(b, a)).abs() < 1e-15);
            }
        }
        assert!(q >= -1e-12);
    }
}

#[test]
fn default_scheme_counts() {
    let s = LevelScheme::default();
    assert_eq!(s.zeeman_count(), 16);
    assert_eq!(s.manifolds.iter().filter(|m| m.kind == ManifoldKind::Excited).count(), 2);
    let ratio = s.gamma12 / s.gamma_d1();
    assert!((ratio - 0.057).abs() < 1e-12);
}

#[test]
fn invalid_schemes_rejected() {
    let bad_f = r#"{"manifolds":[{"label":"1","kind":"ground","f":0},{"label":"3","kind":"excited","f":2,"line":"D1"}],
        "decay_rates":{"D1":1.0},"gamma12":0.0,"detunings":{"pump":0.0,"control":0.0},"wavelengths":{"D1":7.9e-7},
        "transitions":[{"ground":"1","excited":"3","reduced_dipole":1e-29,"branching":1.0}]}"#;
    assert!(matches!(LevelScheme::from_json(bad_f), Err(Error::Config(_))));
    let no_line = bad_f.replace(r#","line":"D1""#, "");
    assert!(LevelScheme::from_json(&no_line).is_err());
    let dup = bad_f.replace(r#""label":"3""#, r#""label":"1""#);
    assert!(LevelScheme::from_json(&dup).is_err());
    assert!(matches!(LevelScheme::from_json("{"), Err(Error::Json(_))));
}

proptest! {
    #[test]
    fn clebsch_gordan_vanishes_outside_selection_rules(fe in 0i32..5, fg in 0i32..5, me in -5i32..6, mg in -5i32..6) {
        let v = clebsch_gordan(fe, me, fg, mg);
        if (me - mg).abs() > 1 || (fe - fg).abs() > 1 || me.abs() > fe || mg.abs() > fg {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert!(v.abs() <= 1.0 + 1e-12);
    }
}
