use std::f64::consts::TAU;
use std::sync::OnceLock;

use proptest::prelude::*;

use canard::canardmap::Case;
use canard::degree::{winding, WindingOptions};
use canard::expr::{parse, BinOp, Expression, Func, Node, Var};
use canard::integrate::{integrate_full, Direction, EventSpec, FullOptions, Options};
use canard::reduced::{classify, compute_geometry, default_alpha, Chart, ChartPoint, Class, GeometryOptions, ReducedGeometry};
use canard::system::{ReducedKind, SystemSpec};

const PARAMS: [&str; 2] = ["a", "mu"];

fn node() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Node::Num(f64::from(n) / 8.0)),
        Just(Node::Var(Var::X)),
        Just(Node::Var(Var::Y)),
        Just(Node::Var(Var::Z)),
        (0usize..PARAMS.len()).prop_map(|i| Node::Var(Var::Param(i))),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        let func = prop_oneof![
            Just(Func::Abs),
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Exp),
            Just(Func::Sqrt)
        ];
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        prop_oneof![
            inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
            (func, inner.clone()).prop_map(|(f, a)| Node::Call(f, Box::new(a))),
            (op, inner.clone(), inner).prop_map(|(o, a, b)| Node::Bin(o, Box::new(a), Box::new(b))),
        ]
    })
}

fn a3() -> &'static (SystemSpec, ReducedGeometry, f64) {
    static CELL: OnceLock<(SystemSpec, ReducedGeometry, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let sys = SystemSpec::example_family(3.0);
        let geom = compute_geometry(&sys, &GeometryOptions::default()).unwrap();
        let alpha = default_alpha(&sys, &geom, 8);
        (sys, geom, alpha)
    })
}

proptest! {
    #[test]
    fn printed_expressions_reparse_identically(root in node()) {
        let params: Vec<String> = PARAMS.iter().map(|s| s.to_string()).collect();
        let e = Expression::from_node(root, params);
        let text = e.to_string();
        let back = parse(&text, &PARAMS).unwrap();
        prop_assert_eq!(back.root(), e.root(), "printed as {}", text);
    }

    #[test]
    fn evaluation_is_deterministic(root in node(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let e = Expression::from_node(root, PARAMS.iter().map(|s| s.to_string()).collect());
        let r1 = e.eval([x, y, 0.5], &[3.0, -0.25]);
        let r2 = e.eval([x, y, 0.5], &[3.0, -0.25]);
        match (r1, r2) {
            (Ok(v1), Ok(v2)) => prop_assert_eq!(v1.to_bits(), v2.to_bits()),
            (Err(e1), Err(e2)) => prop_assert_eq!(format!("{e1:?}"), format!("{e2:?}")),
            _ => prop_assert!(false, "outcomes differ"),
        }
    }

    #[test]
    fn attractive_plane_is_slow_and_reduced_rhs_matches(x in -3.0..0.0f64, y in -3.0..1.0f64, a in 0.5..5.0f64, eps in 0.01..1.0f64) {
        let sys = SystemSpec::example_family(a);
        let full = sys.full_rhs(eps, [x, y, x]).unwrap();
        prop_assert_eq!(full[2], 0.0);
        let red = sys.reduced_rhs(ReducedKind::Attractive, [x, y]).unwrap();
        prop_assert_eq!([full[0], full[1]], red);
        let full_r = sys.full_rhs(eps, [x, y, -x]).unwrap();
        prop_assert_eq!(full_r[2], 0.0);
        prop_assert_eq!([full_r[0], full_r[1]], sys.reduced_rhs(ReducedKind::Repulsive, [x, y]).unwrap());
    }

    #[test]
    fn case_tags_partition_the_exit_times(s in -20.0..20.0f64, sigma in 0.5..5.0f64, alpha in 0.01..0.5f64) {
        let d = s - sigma;
        let case = Case::from_s(s, sigma, alpha);
        prop_assert_eq!(case == Case::Case1, d.abs() < alpha);
        prop_assert_eq!(case == Case::Case2, d.abs() >= alpha && d.abs() < 2.0 * alpha);
        prop_assert_eq!(case == Case::Case3, d >= 2.0 * alpha);
        prop_assert_eq!(case == Case::Case4, d <= -2.0 * alpha);
    }

    #[test]
    fn linear_field_winding_is_determinant_sign(m in prop::array::uniform4(-5.0..5.0f64), reverse in any::<bool>()) {
        let det = m[0] * m[3] - m[1] * m[2];
        prop_assume!(det.abs() > 1e-2);
        let dir = if reverse { -1.0 } else { 1.0 };
        let field = |s: f64| {
            let (u, v) = ((dir * s).cos(), (dir * s).sin());
            Ok([m[0] * u + m[1] * v, m[2] * u + m[3] * v])
        };
        let opts = WindingOptions::default();
        let w = winding(field, TAU, &opts).unwrap();
        prop_assert_eq!(w.winding, dir as i64 * det.signum() as i64);
        let dense = winding(field, TAU, &WindingOptions { n_samples: 2 * opts.n_samples, ..opts }).unwrap();
        prop_assert_eq!(dense.winding, w.winding);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chart_inverse_round_trips(fu in -1.0..1.0f64, fv in -1.0..1.0f64) {
        let (sys, geom, alpha) = a3();
        let chart = Chart::for_alpha(sys, geom, *alpha).unwrap();
        let uv = ChartPoint::new(fu * alpha / 2.0, fv * alpha / 2.0);
        let p = chart.chart_inverse(uv, chart.linear_inverse(uv.as_array())).unwrap();
        let back = chart.chart_uv(p).unwrap();
        prop_assert!((back.u - uv.u).abs() < 1e-7 && (back.v - uv.v).abs() < 1e-7, "{:?} -> {:?}", uv, back);
    }

    #[test]
    fn classification_follows_sign_rule(fu in -1.0..1.0f64, fv in -1.0..1.0f64) {
        let (sys, geom, alpha) = a3();
        let v = fv * alpha / 2.0;
        prop_assume!(v.abs() > 1e-4);
        let chart = Chart::for_alpha(sys, geom, *alpha).unwrap();
        let uv = ChartPoint::new(fu * alpha / 2.0, v);
        let p = chart.chart_inverse(uv, chart.linear_inverse(uv.as_array())).unwrap();
        let (class, _) = classify(&chart, p).unwrap();
        let expected = if geom.a * v > 0.0 { Class::Destabilizing } else { Class::Stabilizing };
        prop_assert_eq!(class, expected);
    }

    #[test]
    fn upper_invariant_set_is_never_left(x in -3.0..1.0f64, y in -3.0..1.0f64, z in -3.0..1.0f64, eps in prop::sample::select(vec![0.2, 0.1, 0.05])) {
        let sys = SystemSpec::example_family(3.0);
        let m = 3.0 * 3.0 + 1.0 / 3.0;
        let opts = FullOptions { base: Options::with_tol(1e-10), m_est: m, ..FullOptions::default() };
        let tr = integrate_full(&sys, eps, [x, y, z], 0.0, 3.0, &[], &opts).unwrap();
        let mut inside = false;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let now = s[2] > -s[0] + m * eps;
            prop_assert!(!inside || now, "left the set at t = {} from {:?}", t, [x, y, z]);
            inside |= now;
        }
    }

    #[test]
    fn event_logs_are_reproducible(x in -2.0..0.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
        let sys = SystemSpec::example_family(3.0);
        let run = || {
            let ev = [EventSpec::new("z=0", Direction::Any, false, |_, s: &[f64; 3]| s[2])];
            integrate_full(&sys, 0.1, [x, y, z], 0.0, 3.0, &ev, &FullOptions::default()).unwrap()
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.events_json(), b.events_json());
        prop_assert_eq!(a.times, b.times);
    }
}

#[test]
fn canonical_curves_stay_left_of_the_turning_line() {
    let (_, geom, _) = a3();
    for c in [&geom.gamma_a, &geom.gamma_r] {
        let interior = &c.points[1..c.points.len() - 1];
        let max_x = interior.iter().map(|q| q.p[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_x < 0.0, "{:?}: max x = {max_x}", c.kind);
    }
}

#[test]
fn chart_gradients_are_independent_with_orientation_of_a() {
    let (sys, geom, alpha) = a3();
    let chart = Chart::for_alpha(sys, geom, *alpha).unwrap();
    let h = 1e-5;
    let star = geom.star();
    let uv = |dx: f64, dy: f64| chart.chart_uv([star[0] + dx, star[1] + dy]).unwrap();
    let (px, mx, py, my) = (uv(h, 0.0), uv(-h, 0.0), uv(0.0, h), uv(0.0, -h));
    let grad_u = [(px.u - mx.u) / (2.0 * h), (py.u - my.u) / (2.0 * h)];
    let grad_v = [(px.v - mx.v) / (2.0 * h), (py.v - my.v) / (2.0 * h)];
    let cross = grad_u[0] * grad_v[1] - grad_u[1] * grad_v[0];
    assert!(cross.abs() > 1e-3, "gradients nearly parallel: {grad_u:?}, {grad_v:?}");
    assert_eq!(cross.signum(), geom.a.signum());
}
