use super::PatchFrame;

/// Adds `4k` in-plane offset seeds around every frame: for `j = 1..=k` the
/// seed moves by `j · quad_length / (k + 1)` along +X, −X, +Y, −Y (in that
/// order, `offset_id = 1 + 4(j−1) + dir`). Rotations are copied unchanged.
/// Each centre is followed by its offsets in the output.
pub fn expand_offsets(frames: &[PatchFrame], k: usize, quad_length: f64) -> Vec<PatchFrame> {
    let mut out = Vec::with_capacity(frames.len() * (4 * k + 1));
    let step = quad_length / (k + 1) as f64;
    for f in frames {
        out.push(*f);
        let x = f.x_axis();
        let y = f.y_axis();
        for j in 1..=k {
            let d = step * j as f64;
            for (dir, v) in [x, -x, y, -y].into_iter().enumerate() {
                out.push(PatchFrame {
                    seed: f.seed + v * d,
                    rotation: f.rotation,
                    quad_id: f.quad_id,
                    offset_id: 1 + 4 * (j - 1) + dir,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn frame() -> PatchFrame {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        PatchFrame {
            seed: Vec3::new(0.5, -0.1, 0.2),
            rotation: *r.matrix(),
            quad_id: 3,
            offset_id: 0,
        }
    }

    #[test]
    fn zero_overlap_is_identity() {
        let f = vec![frame(), frame()];
        assert_eq!(expand_offsets(&f, 0, 0.03), f);
    }

    #[test]
    fn one_level_gives_four_half_length_offsets() {
        let f = frame();
        let out = expand_offsets(&[f], 1, 0.2);
        assert_eq!(out.len(), 5);
        let dirs = [f.x_axis(), -f.x_axis(), f.y_axis(), -f.y_axis()];
        for (i, o) in out[1..].iter().enumerate() {
            assert_eq!(o.rotation, f.rotation);
            assert_eq!(o.offset_id, i + 1);
            let d = o.seed - f.seed;
            assert!((d.norm() - 0.1).abs() < 1e-12);
            assert!((d.normalize() - dirs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn twenty_eight_offsets_per_quad_at_level_seven() {
        let frames = vec![frame(); 658];
        let out = expand_offsets(&frames, 7, 0.03);
        assert_eq!(out.len(), 658 * 29);
        assert_eq!(out.iter().filter(|f| f.offset_id == 0).count(), 658);
        assert_eq!(out.iter().map(|f| f.offset_id).max(), Some(28));
    }
}
