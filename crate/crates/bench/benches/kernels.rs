use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpatch::frames::{expand_offsets, orient_frames};
use qpatch::mesh::sample_points;
use qpatch::metrics::Bvh;
use qpatch::patch::extract_dataset;
use qpatch::sparse::{ksvd_learn, masked_omp_encode, omp_encode, DictMeta, KsvdOptions};
use qpatch::{shapes, Dictionary, PatchParams, Vec3};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn omp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = Dictionary::from_columns(random_matrix(&mut rng, 256, 100), DictMeta::default()).unwrap();
    let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mask: Vec<bool> = (0..256).map(|i| i % 5 != 0).collect();
    c.bench_function("omp 256x100 k=20", |b| b.iter(|| omp_encode(&x, &d, 20).unwrap()));
    c.bench_function("masked omp 256x100 k=20", |b| b.iter(|| masked_omp_encode(&x, &mask, &d, 20).unwrap()));
}

fn ksvd(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_matrix(&mut rng, 256, 500);
    let opts = KsvdOptions::new(100, 10, 1, 0);
    let mut g = c.benchmark_group("ksvd");
    g.sample_size(10);
    g.bench_function("one iteration 256x500 p=100 k=10", |b| b.iter(|| ksvd_learn(&x, None, &opts).unwrap()));
    g.finish();
}

fn extract(c: &mut Criterion) {
    let mesh = shapes::sinusoid_plane(150, 0.6, 0.01, 0.1);
    let frames = expand_offsets(&orient_frames(&shapes::plane_quads(10, 0.6)).unwrap(), 1, 0.06);
    let params = PatchParams::new(0.06 / 2f64.sqrt(), 16);
    let h = params.bin_size();
    let mut g = c.benchmark_group("extract");
    g.sample_size(10);
    g.bench_function("sample 4/bin", |b| b.iter(|| sample_points(&mesh, 4.0 / (h * h), 0).unwrap()));
    let cloud = sample_points(&mesh, 4.0 / (h * h), 0).unwrap();
    g.bench_function("500 patches N=16 with conn map", |b| {
        b.iter(|| extract_dataset(&cloud, &frames, &params, Some(&mesh), None).unwrap())
    });
    g.finish();
}

fn bvh(c: &mut Criterion) {
    let mesh = shapes::icosphere(5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Vec3> = (0..1000)
        .map(|_| Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
        .collect();
    c.bench_function("bvh build icosphere(5)", |b| b.iter(|| Bvh::new(&mesh)));
    let tree = Bvh::new(&mesh);
    c.bench_function("bvh 1000 closest-point queries", |b| {
        b.iter_batched(|| pts.clone(), |p| tree.distances(&p), BatchSize::SmallInput)
    });
}

criterion_group!(benches, omp, ksvd, extract, bvh);
criterion_main!(benches);
