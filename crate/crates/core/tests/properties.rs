use std::sync::Arc;

use nldeg_core::operator::eval_operator;
use nldeg_core::quadrature::{build_kernel_weights, KernelWeights};
use nldeg_core::*;
use proptest::prelude::*;

fn nonlinearity() -> impl Strategy<Value = NonlinearityKind> {
    prop_oneof![
        Just(NonlinearityKind::Identity),
        (
            1e-3..1e3f64,
            1e-3..1e3f64,
            1e-3..1e3f64,
            1e-3..1.0f64,
            2.0..50.0f64
        )
            .prop_map(
                |(s1, s2, s3, a, k)| NonlinearityKind::SmoothPiecewiseSlopes {
                    s1,
                    s2,
                    s3,
                    a,
                    b: a * k
                }
            ),
        (0.0..2.0f64, 0.1..5.0f64, 0.1..5.0f64).prop_map(|(floor, amplitude, scale)| {
            NonlinearityKind::ArctanScaled {
                floor,
                amplitude,
                scale,
            }
        }),
        (0.1..10.0f64).prop_map(|scale| NonlinearityKind::ConcaveSoft { scale }),
    ]
}

fn forcing() -> impl Strategy<Value = ForcingKind> {
    prop_oneof![
        (0.1..10.0f64).prop_map(|mu| ForcingKind::Linear { mu }),
        (0.1..10.0f64, 0.0..5.0f64).prop_map(|(mu, cubic)| ForcingKind::Superlinear { mu, cubic }),
    ]
}

// flat_plus_bump is only ever rejected, see below
fn datum() -> impl Strategy<Value = BoundaryKind> {
    (0.0..5.0f64).prop_map(|slope| BoundaryKind::SmoothedCone { slope })
}

fn weights_1d() -> &'static KernelWeights {
    use std::sync::OnceLock;
    static W: OnceLock<KernelWeights> = OnceLock::new();
    W.get_or_init(|| build_kernel_weights(1, 1.5, 0.1, 2.0).unwrap())
}

fn grid_1d() -> Grid {
    Grid::new(1, 0.1, 4.0).unwrap()
}

fn field(values: Vec<f64>, shift: f64) -> GridFunction {
    GridFunction::from_values(
        grid_1d(),
        values,
        FarField::analytic("shifted", move |x: &[f64]| x[0].cos() + shift),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constructors_satisfy_their_claimed_conditions(
        sigma in 1.05..1.95f64,
        f in nonlinearity(),
        g in forcing(),
        phi in datum(),
        dim in 1usize..=2,
    ) {
        let spec = ProblemSpec::new(
            sigma,
            make_nonlinearity(f).unwrap(),
            make_forcing(g).unwrap(),
            make_boundary_datum(phi, dim).unwrap(),
            Truncation { box_radius: 2.0, h: 0.1, rho_tail: None },
        )
        .unwrap();
        let report = validate_problem(&spec);
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
        prop_assert!(failed.is_empty(), "{:?}", failed);
    }

    #[test]
    fn smoothed_cone_second_derivative_in_range(a in 0.01..5.0f64, x in -50.0..50.0f64) {
        let phi = make_boundary_datum(BoundaryKind::SmoothedCone { slope: a }, 1).unwrap();
        let d2 = phi.hess(&[x])[0][0];
        let exact = a * (1.0 + x * x).powf(-1.5);
        prop_assert!(d2 > 0.0 && d2 <= a * (1.0 + 1e-12));
        prop_assert!((d2 - exact).abs() <= 1e-9 * a);
    }

    #[test]
    fn operator_ignores_constant_shifts(
        f in nonlinearity(),
        vals in prop::collection::vec(-3.0..3.0f64, 81),
        c in -5.0..5.0f64,
        node in -20i64..=20,
    ) {
        let f = make_nonlinearity(f).unwrap();
        let w = weights_1d();
        let u = field(vals.clone(), 0.0);
        let v = field(vals.iter().map(|x| x + c).collect(), c);
        let a = eval_operator(&u, &f, w, [node, 0]).unwrap();
        let b = eval_operator(&v, &f, w, [node, 0]).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn identity_operator_is_linear(
        u in prop::collection::vec(-3.0..3.0f64, 81),
        v in prop::collection::vec(-3.0..3.0f64, 81),
        s in -2.0..2.0f64,
        t in -2.0..2.0f64,
        node in -20i64..=20,
    ) {
        let id = make_nonlinearity(NonlinearityKind::Identity).unwrap();
        let w = weights_1d();
        let far = |k: f64| FarField::Analytic { f: Arc::new(move |x: &[f64]| k * x[0].sin()), label: "sin".into() };
        let fu = GridFunction::from_values(grid_1d(), u.clone(), far(1.0)).unwrap();
        let fv = GridFunction::from_values(grid_1d(), v.clone(), far(-1.0)).unwrap();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| s * a + t * b).collect();
        let fm = GridFunction::from_values(grid_1d(), mix, far(s - t)).unwrap();
        let m = [node, 0];
        let lhs = eval_operator(&fm, &id, w, m).unwrap();
        let rhs = s * eval_operator(&fu, &id, w, m).unwrap() + t * eval_operator(&fv, &id, w, m).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn invalid_parameters_are_rejected(s in -10.0..=0.0f64, sigma in prop_oneof![0.0..=1.0f64, 2.0..4.0f64]) {
        let bad_slope = NonlinearityKind::SmoothPiecewiseSlopes { s1: 1.0, s2: s, s3: 1.0, a: 0.1, b: 1.0 };
        let bad_scale = NonlinearityKind::ConcaveSoft { scale: s };
        prop_assert!(make_nonlinearity(bad_slope).is_err());
        prop_assert!(make_nonlinearity(bad_scale).is_err());
        let r = ProblemSpec::new(
            sigma,
            make_nonlinearity(NonlinearityKind::Identity).unwrap(),
            make_forcing(ForcingKind::Linear { mu: 1.0 }).unwrap(),
            make_boundary_datum(BoundaryKind::SmoothedCone { slope: 1.0 }, 1).unwrap(),
            Truncation { box_radius: 2.0, h: 0.1, rho_tail: None },
        );
        prop_assert!(matches!(r, Err(Error::SigmaOutOfRange(_))));
    }

    #[test]
    fn bumps_are_rejected(amplitude in prop_oneof![-3.0..-0.01f64, 0.01..3.0f64], width in 0.2..4.0f64, dim in 1usize..=2) {
        let bump = BoundaryKind::FlatPlusBump { amplitude, width };
        prop_assert!(make_boundary_datum(bump, dim).is_err());
    }
}
