use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use prolate_ewald::ewald::{direct_fourier_sum, fast_fourier_sum, gen_system, real_space_sum, EwaldPlan};
use prolate_ewald::params::{select_parameters, ErrorModelInput};
use prolate_ewald::pswf::build_pswf;
use prolate_ewald::split::make_pswf_split;

fn pswf(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_pswf");
    for bw in [10.0, 30.0, 60.0] {
        g.bench_with_input(BenchmarkId::from_parameter(bw), &bw, |b, &bw| {
            b.iter(|| build_pswf(black_box(bw), 1e-14).unwrap())
        });
    }
    g.finish();
}

fn far_field(c: &mut Criterion) {
    let sys = gen_system(1, 1000, 1.0).unwrap();
    let mut g = c.benchmark_group("far_field");
    g.sample_size(10);
    for eps in [1e-4, 1e-8] {
        let params = select_parameters(&ErrorModelInput::for_system(eps, 0.1, &sys).unwrap()).unwrap();
        let plan = EwaldPlan::for_parameters(&params).unwrap();
        g.bench_with_input(BenchmarkId::new("fast", eps), &plan, |b, plan| {
            b.iter(|| fast_fourier_sum(&sys, plan).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("local", eps), &plan, |b, plan| {
            b.iter(|| real_space_sum(&sys, plan.split()).unwrap())
        });
    }
    let small = gen_system(2, 100, 1.0).unwrap();
    let split = make_pswf_split(9.0, 0.1).unwrap();
    g.bench_function("direct_m28", |b| b.iter(|| direct_fourier_sum(&small, &split, 28).unwrap()));
    g.finish();
}

criterion_group!(benches, pswf, far_field);
criterion_main!(benches);
