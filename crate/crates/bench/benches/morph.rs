use affectmorph::fixtures;
use affectmorph::landmarks::{add_boundary_points, CanonicalFrame};
use affectmorph::morph::pair_triangulation;
use affectmorph::{morph, triangulate, warp_image, Expression};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn benches(c: &mut Criterion) {
    let frame = CanonicalFrame::default();
    let a = fixtures::synthetic_face(1, Expression::Neutral, &frame);
    let b = fixtures::synthetic_face(1, Expression::Happy, &frame);
    let la = add_boundary_points(&a.landmarks).points;
    let lb = add_boundary_points(&b.landmarks).points;
    let tri = pair_triangulation(&la, &lb).unwrap();

    c.bench_function("triangulate 76 points", |bench| {
        bench.iter(|| triangulate(black_box(&la)).unwrap())
    });
    c.bench_function("warp 512x512", |bench| {
        bench.iter(|| warp_image(black_box(&a.image), &la, &lb, &tri, frame.fill).unwrap())
    });
    c.bench_function("morph 512x512 r=0.4", |bench| {
        bench.iter(|| morph(&a.image, &a.landmarks, &b.image, &b.landmarks, black_box(0.4), frame.fill).unwrap())
    });
}

criterion_group! {
    name = morph_benches;
    config = Criterion::default().sample_size(20);
    targets = benches
}
criterion_main!(morph_benches);
