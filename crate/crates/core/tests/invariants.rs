//! Cross-checks between the checkers and the definitions they implement.

use nalgebra::DMatrix;
use rand::Rng;
use translab::domain::BoxDomain;
use translab::exec::substream;
use translab::expr::{ExprMap, Wrt};
use translab::strata::{morse_check, stratum_defect, MorseVerdict};
use translab::transversality::{
    classify_family_point, defect_family_sup, delta_star, sample_sigma, Classification, FamilyProblem,
    LevelSetSubmanifold, SigmaOptions,
};

#[test]
fn morse_report_matches_the_definition() {
    let cases = [
        ("[x1^2 + x2^2]", MorseVerdict::Morse),
        ("[x1^3 - 3*x1 + x2^2]", MorseVerdict::Morse),
        ("[x1^3 + x2^2]", MorseVerdict::NotMorse),
        ("[x1^2 * x2^2]", MorseVerdict::NotMorse),
        ("[sin(x1) * cos(x2)]", MorseVerdict::Morse),
    ];
    let d = BoxDomain::cube(2, -2.0, 2.0);
    for (src, verdict) in cases {
        let f = ExprMap::parse(src, 2, 0).unwrap();
        let rep = morse_check(&f, &d, None).unwrap();
        assert_eq!(rep.verdict, verdict, "{src}");
        for c in &rep.critical_points {
            assert!(c.gradient_norm < 1e-7, "{src} at {:?}", c.x);
            let corank = stratum_defect(&f, 1, &c.x).unwrap_or_else(|e| panic!("{src} at {:?} grad {}: {e}", c.x, c.gradient_norm));
            if c.nondegenerate {
                assert_eq!(corank, 0, "{src} at {:?}", c.x);
            } else {
                assert!(c.hessian_det.abs() < 1e-6, "{src} at {:?}", c.x);
                assert!(rep.degenerate_witnesses.contains(&c.x));
            }
        }
    }
}

#[test]
fn generic_linear_perturbations_are_morse() {
    let g = ExprMap::parse("[x1^3 + x2^3 + x1*x2^2]", 2, 0).unwrap();
    let d = BoxDomain::cube(2, -1.5, 1.5);
    let mut rng = substream(12, 0);
    for _ in 0..60 {
        let pi = DMatrix::from_fn(1, 2, |_, _| rng.random_range(-1.0..1.0));
        let f = g.add_linear(&pi).unwrap();
        assert_eq!(morse_check(&f, &d, Some(400)).unwrap().verdict, MorseVerdict::Morse, "{pi}");
    }
}

fn random_family(rng: &mut impl Rng) -> FamilyProblem {
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let map = format!(
        "[x1*x2 + {} * a1 - a2^2, x1^2 - {} * x2 + {} * a1 * a2]",
        c[0], c[1].abs() + 0.1, c[2]
    );
    FamilyProblem::new(
        ExprMap::parse(&map, 2, 2).unwrap(),
        LevelSetSubmanifold::point(&[c[3] * 0.2, c[4] * 0.2]).unwrap(),
        BoxDomain::cube(2, -1.0, 1.0),
        BoxDomain::cube(2, -1.0, 1.0),
    )
    .unwrap()
}

#[test]
fn section_defect_dominates_family_defect() {
    let mut rng = substream(21, 0);
    let mut on_z = 0;
    for k in 0..8 {
        let p = random_family(&mut rng);
        let cloud = sample_sigma(&p, &SigmaOptions::new(60, k)).unwrap();
        for (x, a) in cloud.witnesses.iter().zip(&cloud.points) {
            let rep = classify_family_point(&p, x, a).unwrap();
            assert!(rep.delta_section >= rep.delta_family);
            assert!(
                matches!(rep.classification, Classification::InW | Classification::InWTilde),
                "bad parameter {a:?} classified {:?}",
                rep.classification
            );
            on_z += 1;
        }
        for _ in 0..100 {
            let (x, a) = (p.x_box.sample_uniform(&mut rng), p.a_box.sample_uniform(&mut rng));
            let rep = classify_family_point(&p, &x, &a).unwrap();
            assert!(rep.delta_section >= rep.delta_family);
        }
    }
    assert!(on_z > 0);
}

#[test]
fn defect_budget_is_nonnegative_when_z_is_hit() {
    let mut rng = substream(22, 0);
    for _ in 0..8 {
        let p = random_family(&mut rng);
        let sup = defect_family_sup(&p, 1500).unwrap();
        if sup.on_target > 0 {
            assert!(p.param_dim() as i64 + delta_star(&p, sup.value) >= 0);
        }
    }
}

#[test]
fn family_jacobian_blocks_agree() {
    let mut rng = substream(23, 0);
    let p = random_family(&mut rng);
    let (x, a) = ([0.3, -0.7], [0.1, 0.9]);
    let full = p.map.jacobian(&x, &a, Wrt::XA).unwrap();
    let jx = p.map.jacobian(&x, &a, Wrt::X).unwrap();
    let ja = p.map.jacobian(&x, &a, Wrt::A).unwrap();
    assert_eq!(full.columns(0, 2), jx);
    assert_eq!(full.columns(2, 2), ja);
}
