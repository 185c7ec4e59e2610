use crate::geometry::OrientationMap;
use crate::Vec3;

/// Trilinear interpolation of an axial peak field at a voxel-space position.
///
/// Each of the 8 surrounding peaks is flipped to a nonnegative dot product
/// with `prev_dir` (or, without one, with the nearest voxel's peak, falling
/// back to the first nonzero corner) before weighting. Corners outside the
/// grid contribute zero. The result may be arbitrarily short.
pub fn interpolate_peak(tom: &OrientationMap, pos_vox: Vec3, prev_dir: Option<Vec3>) -> Vec3 {
    let geom = tom.geometry();
    let dims = geom.dims();
    let base = pos_vox.map(f64::floor);
    let frac = pos_vox - base;

    let mut corners = [(Vec3::zeros(), 0.0f64); 8];
    for (c, corner) in corners.iter_mut().enumerate() {
        let off = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
        let mut w = 1.0;
        let mut ijk = [0i64; 3];
        for a in 0..3 {
            ijk[a] = base[a] as i64 + off[a] as i64;
            w *= if off[a] == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        if w == 0.0 || !(0..3).all(|a| ijk[a] >= 0 && (ijk[a] as usize) < dims[a]) {
            continue;
        }
        let v = tom.get([ijk[0] as usize, ijk[1] as usize, ijk[2] as usize]);
        *corner = (v, w);
    }

    let reference = prev_dir.unwrap_or_else(|| {
        geom.nearest_voxel(pos_vox)
            .map(|ijk| tom.get(ijk))
            .filter(|v| *v != Vec3::zeros())
            .or_else(|| corners.iter().map(|c| c.0).find(|v| *v != Vec3::zeros()))
            .unwrap_or_else(Vec3::zeros)
    });

    corners.iter().fold(Vec3::zeros(), |acc, (v, w)| {
        let v = if v.dot(&reference) < 0.0 { -v } else { *v };
        acc + v * *w
    })
}
