//! Pareto machinery against a brute-force 200 x 200 dominance grid.

use translab::domain::BoxDomain;
use translab::exec::substream;
use translab::pareto::{build_pareto_atlas, pareto_membership, scalarize_min, MultiObjective};

const GRID: usize = 200;

fn problem() -> MultiObjective {
    let domain = BoxDomain::cube(2, -4.0, 4.0);
    MultiObjective::parse(
        "[(x1 - 1)^2 + 2*(x2 + 2)^2 + 0.5*x1*x2, (x1 + 0.5)^2 + (x2 - 3)^2 + 0.1*x1^4]",
        2,
        domain,
    )
    .unwrap()
}

fn grid_values(f: &MultiObjective) -> Vec<(Vec<f64>, Vec<f64>)> {
    f.domain
        .grid(GRID)
        .into_iter()
        .map(|x| {
            let v = f.map.eval(&x, &[]).unwrap();
            (x, v)
        })
        .collect()
}

/// A grid point beating `v` by at least `margin` in every objective.
fn dominator<'a>(grid: &'a [(Vec<f64>, Vec<f64>)], v: &[f64], margin: f64) -> Option<&'a [f64]> {
    grid.iter()
        .find(|(_, g)| g.iter().zip(v).all(|(a, b)| *a <= b - margin))
        .map(|(x, _)| x.as_slice())
}

#[test]
fn atlas_nodes_are_not_dominated_by_the_grid() {
    let f = problem();
    let grid = grid_values(&f);
    let atlas = build_pareto_atlas(&f, 20).unwrap();
    for (x, v) in atlas.minimizers.iter().zip(&atlas.values) {
        assert!(dominator(&grid, v, 1e-9).is_none(), "{x:?} dominated");
        assert!(pareto_membership(&f, x, 64), "{x:?} rejected");
    }
}

#[test]
fn scalarized_minimum_beats_every_grid_point() {
    let f = problem();
    let grid = grid_values(&f);
    for w in [[1.0, 0.0], [0.8, 0.2], [0.5, 0.5], [0.1, 0.9], [0.0, 1.0]] {
        let sol = scalarize_min(&f, &w).unwrap();
        let v = f.map.eval(&sol.x, &[]).unwrap();
        let best = v[0] * w[0] + v[1] * w[1];
        let grid_best = grid.iter().map(|(_, g)| g[0] * w[0] + g[1] * w[1]).fold(f64::INFINITY, f64::min);
        assert!(best <= grid_best + 1e-12, "w = {w:?}: {best} vs grid {grid_best}");
    }
}

#[test]
fn membership_agrees_with_grid_dominance() {
    let f = problem();
    let grid = grid_values(&f);
    let mut rng = substream(17, 0);
    let mut dominated = 0;
    for _ in 0..300 {
        let x = f.domain.sample_uniform(&mut rng);
        let v = f.map.eval(&x, &[]).unwrap();
        if let Some(d) = dominator(&grid, &v, 1e-6) {
            dominated += 1;
            assert!(!pareto_membership(&f, &x, 64), "{x:?} accepted though {d:?} dominates it");
        }
    }
    assert!(dominated > 200);
}
