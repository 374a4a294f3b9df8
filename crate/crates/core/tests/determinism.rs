//! Fixed seeds give identical results whatever the worker count.

use translab::dimension::{box_count, ScaleSpec};
use translab::domain::BoxDomain;
use translab::exec::with_threads;
use translab::expr::ExprMap;
use translab::multipoint::{double_point_search, estimate_df};
use translab::pareto::{build_pareto_atlas, perturbation_study, MultiObjective, PerturbationStudyOptions};
use translab::strata::{corank_survey, morse_check};
use translab::transversality::{
    defect_family_sup, measure_zero_probe, sample_sigma, FamilyProblem, LevelSetSubmanifold, SigmaOptions,
    WitnessSearch,
};

fn same<T: PartialEq + std::fmt::Debug + Send>(run: impl Fn() -> T + Sync) {
    let one = with_threads(1, &run);
    let eight = with_threads(8, &run);
    assert_eq!(one, eight);
}

fn diagonal_family() -> FamilyProblem {
    FamilyProblem::new(
        ExprMap::parse("[x1 + a1, x1 + a2]", 1, 2).unwrap(),
        LevelSetSubmanifold::point(&[0.0, 0.0]).unwrap(),
        BoxDomain::cube(1, -2.0, 2.0),
        BoxDomain::cube(2, -1.0, 1.0),
    )
    .unwrap()
}

#[test]
fn sigma_sampling_and_box_counting() {
    let p = diagonal_family();
    same(|| {
        let cloud = sample_sigma(&p, &SigmaOptions::new(3000, 5)).unwrap();
        let est = box_count(&cloud.points, &ScaleSpec::default()).unwrap();
        (cloud, est)
    });
    same(|| defect_family_sup(&p, 2000).unwrap());
    same(|| measure_zero_probe(&p, 300, 8, WitnessSearch::Auto).unwrap());
}

#[test]
fn multipoint_estimates() {
    let circle = ExprMap::parse("[cos(x1), sin(x1), 0]", 1, 0).unwrap();
    let d = BoxDomain::cube(1, -3.0, 3.0);
    same(|| estimate_df(&circle, &d, 1500, 3).unwrap());
    let eight = ExprMap::parse("[sin(2*x1), sin(x1)]", 1, 0).unwrap();
    same(|| double_point_search(&eight, &BoxDomain::cube(1, -1.0, 5.0), 1000).unwrap());
}

#[test]
fn jet_checkers() {
    let f = ExprMap::parse("[x1^3 - x1 + x2^2 * x1]", 2, 0).unwrap();
    let d = BoxDomain::cube(2, -1.5, 1.5);
    same(|| morse_check(&f, &d, Some(400)).unwrap());
    let g = ExprMap::parse("[x1^2, x1*x2, x2]", 2, 0).unwrap();
    same(|| corank_survey(&g, &d, 900, None).unwrap());
}

#[test]
fn pareto_study_and_atlas() {
    let f = MultiObjective::parse("[x1^2 + x2^2, x1^2 + x2^2]", 2, BoxDomain::cube(2, -3.0, 3.0))
        .unwrap()
        .with_convexity_estimate(256)
        .unwrap();
    same(|| build_pareto_atlas(&f, 12).unwrap());
    same(|| perturbation_study(&f, &PerturbationStudyOptions::new(1.0, 10, 4)).unwrap());
}
