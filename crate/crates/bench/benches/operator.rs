use criterion::{black_box, criterion_group, criterion_main, Criterion};

use nldeg_core::envelopes::sup_envelope;
use nldeg_core::operator::OperatorContext;
use nldeg_core::quadrature::build_kernel_weights;
use nldeg_core::solver::{solve_uniformly_elliptic, SolverConfig};
use nldeg_core::*;

fn regression(h: f64, box_radius: f64) -> ProblemSpec {
    ProblemSpec::new(
        1.5,
        make_nonlinearity(NonlinearityKind::ArctanScaled {
            floor: 0.2,
            amplitude: 1.0,
            scale: 1.0,
        })
        .unwrap(),
        make_forcing(ForcingKind::Linear { mu: 1.0 }).unwrap(),
        make_boundary_datum(BoundaryKind::SmoothedCone { slope: 1.0 }, 1).unwrap(),
        Truncation {
            box_radius,
            h,
            rho_tail: None,
        },
    )
    .unwrap()
}

fn weights(c: &mut Criterion) {
    c.bench_function("kernel_weights_1d_h0.01", |b| {
        b.iter(|| build_kernel_weights(1, 1.5, black_box(0.01), 10.0).unwrap())
    });
    c.bench_function("kernel_weights_2d_h0.1", |b| {
        b.iter(|| build_kernel_weights(2, 1.5, black_box(0.1), 3.2).unwrap())
    });
}

fn operator(c: &mut Criterion) {
    let spec = regression(0.01, 20.0);
    let w = build_kernel_weights(1, spec.sigma, 0.01, spec.rho_tail).unwrap();
    let ctx = OperatorContext::for_problem(&spec, w).unwrap();
    let u = spec.phi_grid();
    c.bench_function("residual_1d_4001_nodes", |b| {
        b.iter(|| ctx.residual(black_box(&u), &spec, &spec.f))
    });
}

fn solve(c: &mut Criterion) {
    let spec = regression(0.02, 10.0);
    let w = build_kernel_weights(1, spec.sigma, 0.02, spec.rho_tail).unwrap();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    group.bench_function("newton_arctan_1d_1001_nodes", |b| {
        b.iter(|| solve_uniformly_elliptic(&spec, &w, &SolverConfig::default(), None).unwrap())
    });
    group.finish();
}

fn envelopes(c: &mut Criterion) {
    let g = Grid::new(2, 0.05, 1.0).unwrap();
    let u = sample_to_grid(
        |x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos(),
        g,
        FarField::Zero,
    )
    .unwrap();
    c.bench_function("sup_envelope_2d_41x41", |b| {
        b.iter(|| sup_envelope(black_box(&u), 0.05).unwrap())
    });
}

criterion_group!(benches, weights, operator, solve, envelopes);
criterion_main!(benches);
