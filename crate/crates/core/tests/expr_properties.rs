use nalgebra::DMatrix;
use proptest::prelude::*;
use translab::expr::{Expr, ExprMap, UnaryFn, Wrt};

const N: usize = 3;

/// Random smooth expressions in `x1..x3` that are finite everywhere.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..N).prop_map(Expr::x),
        (-3.0..3.0f64).prop_map(Expr::Const),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), 0..4i32).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
            inner.clone().prop_map(|a| Expr::Call(UnaryFn::Sin, Box::new(a))),
            inner.clone().prop_map(|a| Expr::Call(UnaryFn::Cos, Box::new(a))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5..1.5f64, N)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn fd_gradient(f: &ExprMap, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let h = 1e-5 * (1.0 + x[j].abs());
            let (mut up, mut down) = (x.to_vec(), x.to_vec());
            up[j] += h;
            down[j] -= h;
            (f.eval(&up, &[]).unwrap()[0] - f.eval(&down, &[]).unwrap()[0]) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_source_round_trips(e in smooth_expr(), x in point()) {
        let f = ExprMap::new(N, 0, vec![e]).unwrap();
        let g = ExprMap::parse(&f.to_source(), N, 0).unwrap();
        let (u, v) = (f.eval(&x, &[]).unwrap()[0], g.eval(&x, &[]).unwrap()[0]);
        prop_assert!(close(u, v, 1e-12), "{} vs {}: {u} {v}", f.to_source(), g.to_source());
    }

    #[test]
    fn gradient_matches_central_differences(e in smooth_expr(), x in point()) {
        let f = ExprMap::new(N, 0, vec![e]).unwrap();
        let j = f.jacobian(&x, &[], Wrt::X).unwrap();
        let fd = fd_gradient(&f, &x);
        for (k, d) in fd.iter().enumerate() {
            prop_assert!(close(j[(0, k)], *d, 1e-6), "{}: d/dx{} AD {} FD {}", f.to_source(), k + 1, j[(0, k)], d);
        }
    }

    #[test]
    fn hessian_matches_differences_of_gradients(e in smooth_expr(), x in point()) {
        let f = ExprMap::new(N, 0, vec![e]).unwrap();
        let h = f.hessians(&x, &[]).unwrap().remove(0);
        for j in 0..N {
            let step = 1e-5 * (1.0 + x[j].abs());
            let (mut up, mut down) = (x.clone(), x.clone());
            up[j] += step;
            down[j] -= step;
            let gu = f.jacobian(&up, &[], Wrt::X).unwrap();
            let gd = f.jacobian(&down, &[], Wrt::X).unwrap();
            for i in 0..N {
                let fd = (gu[(0, i)] - gd[(0, i)]) / (2.0 * step);
                prop_assert!(close(h[(i, j)], fd, 1e-5), "{}: H[{i}][{j}] AD {} FD {fd}", f.to_source(), h[(i, j)]);
            }
            prop_assert!(h[(j, 0)] == h[(0, j)]);
        }
    }

    #[test]
    fn jacobian_of_sum_is_sum_of_jacobians(a in smooth_expr(), b in smooth_expr(), x in point()) {
        let fa = ExprMap::new(N, 0, vec![a.clone()]).unwrap();
        let fb = ExprMap::new(N, 0, vec![b.clone()]).unwrap();
        let sum = ExprMap::new(N, 0, vec![a.add(b)]).unwrap();
        let (ja, jb, js) = (
            fa.jacobian(&x, &[], Wrt::X).unwrap(),
            fb.jacobian(&x, &[], Wrt::X).unwrap(),
            sum.jacobian(&x, &[], Wrt::X).unwrap(),
        );
        for k in 0..N {
            prop_assert!(close(js[(0, k)], ja[(0, k)] + jb[(0, k)], 1e-12));
        }
    }

    #[test]
    fn affine_chain_rule(
        e in smooth_expr(),
        m in prop::collection::vec(-2.0..2.0f64, N * N),
        c in prop::collection::vec(-1.0..1.0f64, N),
        y in point(),
    ) {
        let outer = ExprMap::new(N, 0, vec![e]).unwrap();
        let mat = DMatrix::from_row_slice(N, N, &m);
        let inner = ExprMap::new(N, 0, (0..N).map(|i| Expr::Const(c[i])).collect())
            .unwrap()
            .add_linear(&mat)
            .unwrap();
        let composed = outer.compose(&inner).unwrap();
        let x = inner.eval(&y, &[]).unwrap();
        let expected = outer.jacobian(&x, &[], Wrt::X).unwrap() * &mat;
        let got = composed.jacobian(&y, &[], Wrt::X).unwrap();
        for k in 0..N {
            prop_assert!(close(got[(0, k)], expected[(0, k)], 1e-10), "{} vs {}", got[(0, k)], expected[(0, k)]);
        }
        let v = composed.eval(&y, &[]).unwrap()[0];
        prop_assert!(close(v, outer.eval(&x, &[]).unwrap()[0], 1e-12));
    }
}
