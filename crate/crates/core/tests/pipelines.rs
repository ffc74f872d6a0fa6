use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpatch::inpaint::{compute_frames, denoise, InpaintConfig};
use qpatch::mesh::sample_points;
use qpatch::metrics::cloud_to_mesh;
use qpatch::patch::{extract_dataset, read_dataset, sidecar_path, write_dataset};
use qpatch::sparse::{ksvd_learn_dataset, KsvdOptions};
use qpatch::{shapes, Vec3};

fn config() -> InpaintConfig {
    InpaintConfig { quad_length: 0.06, overlap: 1, sparsity: 5, ..Default::default() }
}

#[test]
fn denoising_with_a_clean_dictionary_reduces_error() {
    let clean = shapes::wave_plane(150, 0.6);
    let cfg = config();
    let frames = compute_frames(&clean, &cfg).unwrap();
    let cloud = sample_points(&clean, cfg.density(), 1).unwrap();
    let ds = extract_dataset(&cloud, &frames, &cfg.params(), None, None).unwrap();
    let (dict, _) = ksvd_learn_dataset(&ds, &KsvdOptions::new(50, 5, 10, 0)).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sigma = 0.002;
    let mut noisy = clean.clone();
    for v in &mut noisy.vertices {
        *v += Vec3::new(0.0, 0.0, sigma * rng.random_range(-1.0..1.0));
    }
    let before = cloud_to_mesh(&noisy.vertices, &clean).unwrap().mean;
    let (out, rep) = denoise(&noisy, &dict, &cfg).unwrap();
    let after = cloud_to_mesh(&out.vertices, &clean).unwrap().mean;
    assert!(rep.patches > 0);
    assert!(after < 0.7 * before, "{after} vs {before}");
    assert_eq!(out.faces, clean.faces);

    let other = InpaintConfig { resolution: 8, ..cfg };
    assert!(denoise(&noisy, &dict, &other).is_err());
}

#[test]
fn dataset_files_keep_connectivity() {
    let mesh = shapes::sinusoid_plane(40, 0.6, 0.01, 0.1);
    let cfg = config();
    let frames = compute_frames(&mesh, &cfg).unwrap();
    let cloud = sample_points(&mesh, cfg.density(), 2).unwrap();
    let ds = extract_dataset(&cloud, &frames, &cfg.params(), Some(&mesh), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.qpd");
    write_dataset(&path, &ds).unwrap();
    assert!(sidecar_path(&path).exists());
    let back = read_dataset(&path).unwrap();
    assert_eq!(back.conn, ds.conn);
    assert_eq!(back.provenance, ds.provenance);
    assert_eq!(back.len(), ds.len());
    for (a, b) in back.patches.iter().zip(&ds.patches) {
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.frame, b.frame);
        for (x, y) in a.heights.iter().zip(&b.heights) {
            assert_eq!(*x, *y as f32 as f64);
        }
    }
}
