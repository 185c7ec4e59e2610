//! Synthetic single-bundle phantoms with exact ground truth.
//!
//! A bundle is a tube around a planar centerline built from straight and
//! circular pieces. Streamlines are parallel offsets of the centerline, the
//! ground-truth TOM holds the centerline tangent at each voxel's foot point,
//! and the endpoint regions are rasterized end-cap disks.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{close, dilate, BinaryMask, GridGeometry, OrientationMap, PeakImage};
use crate::reference_prep::{zyx_less, EndpointRegions};
use crate::streamlines::{voxelize, Streamline, Tractogram};
use crate::Vec3;

/// Spacing of generated streamline points, mm.
pub const POINT_SPACING_MM: f64 = 1.0;
/// Distance between independent jitter draws along a streamline, mm.
pub const JITTER_CORRELATION_MM: f64 = 10.0;
/// Free voxels required between the tube and the grid border.
pub const GRID_MARGIN_VOX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BundleKind {
    Straight { length_mm: f64 },
    Arc { radius_mm: f64, sweep_deg: f64 },
    /// Two parallel legs joined by an arc.
    UShape { radius_mm: f64, sweep_deg: f64, leg_length_mm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleSpec {
    pub kind: BundleKind,
    pub tube_radius_mm: f64,
    pub n_streamlines: usize,
    /// Standard deviation of the perpendicular jitter. Jitter is drawn every
    /// [`JITTER_CORRELATION_MM`] along a streamline and blended smoothly in
    /// between.
    pub jitter_mm: f64,
    /// Peak perturbation scale used by [`perturb_peaks`].
    pub noise_angle_deg: f64,
    /// Fraction of TOM voxels zeroed by [`perturb_peaks`].
    pub dropout: f64,
}

impl BundleSpec {
    fn with_kind(kind: BundleKind, tube_radius_mm: f64) -> Self {
        Self {
            kind,
            tube_radius_mm,
            n_streamlines: 1000,
            jitter_mm: 0.2,
            noise_angle_deg: 0.0,
            dropout: 0.0,
        }
    }

    /// 100 mm along +x, 5 mm tube radius.
    pub fn straight() -> Self {
        Self::with_kind(BundleKind::Straight { length_mm: 100.0 }, 5.0)
    }

    /// Quarter circle of radius 40 mm, 5 mm tube radius.
    pub fn arc() -> Self {
        Self::with_kind(BundleKind::Arc { radius_mm: 40.0, sweep_deg: 90.0 }, 5.0)
    }

    /// Thin U with 40 mm legs 25 mm apart, so both ends lie close together.
    pub fn u_shape() -> Self {
        Self::with_kind(
            BundleKind::UShape { radius_mm: 12.5, sweep_deg: 180.0, leg_length_mm: 40.0 },
            3.75,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tube_radius_mm > 0.0) {
            return bad(format!("tube radius must be > 0, got {}", self.tube_radius_mm));
        }
        if self.n_streamlines == 0 {
            return bad("phantom needs at least one streamline".into());
        }
        if !(self.jitter_mm >= 0.0) || !(self.noise_angle_deg >= 0.0) {
            return bad("jitter and noise angle must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        match self.kind {
            BundleKind::Straight { length_mm } if !(length_mm > 0.0) => bad("length must be > 0".into()),
            BundleKind::Arc { radius_mm, sweep_deg } | BundleKind::UShape { radius_mm, sweep_deg, .. } => {
                if !(sweep_deg > 0.0 && sweep_deg <= 270.0) {
                    return bad(format!("sweep must be in (0, 270] degrees, got {sweep_deg}"));
                }
                if !(radius_mm > self.tube_radius_mm) {
                    return bad("bend radius must exceed the tube radius".into());
                }
                if let BundleKind::UShape { leg_length_mm, .. } = self.kind {
                    if !(leg_length_mm >= 0.0) {
                        return bad("leg length must be >= 0".into());
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Line { start: Vec3, dir: Vec3, length: f64 },
    /// Counter-clockwise in the xy plane from angle `theta0`.
    Arc { center: Vec3, radius: f64, theta0: f64, sweep: f64 },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Line { length, .. } => length,
            Piece::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    fn point(&self, s: f64) -> Vec3 {
        match *self {
            Piece::Line { start, dir, .. } => start + dir * s,
            Piece::Arc { center, radius, theta0, .. } => {
                let th = theta0 + s / radius;
                center + Vec3::new(th.cos(), th.sin(), 0.0) * radius
            }
        }
    }

    fn tangent(&self, s: f64) -> Vec3 {
        match *self {
            Piece::Line { dir, .. } => dir,
            Piece::Arc { radius, theta0, .. } => {
                let th = theta0 + s / radius;
                Vec3::new(-th.sin(), th.cos(), 0.0)
            }
        }
    }

    /// Local arc-length parameter of the closest point to `p`.
    fn foot(&self, p: Vec3) -> f64 {
        match *self {
            Piece::Line { start, dir, length } => (p - start).dot(&dir).clamp(0.0, length),
            Piece::Arc { center, radius, theta0, sweep } => {
                let d = p - center;
                let rel = (d.y.atan2(d.x) - theta0).rem_euclid(TAU);
                if rel <= sweep {
                    rel * radius
                } else if (p - self.point(0.0)).norm() <= (p - self.point(self.length())).norm() {
                    0.0
                } else {
                    self.length()
                }
            }
        }
    }

    fn translate(&mut self, t: Vec3) {
        match self {
            Piece::Line { start, .. } => *start += t,
            Piece::Arc { center, .. } => *center += t,
        }
    }
}

/// Arc-length parameterised planar curve (z = const).
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    pieces: Vec<Piece>,
}

impl Centerline {
    fn for_kind(kind: BundleKind) -> Self {
        let pieces = match kind {
            BundleKind::Straight { length_mm } => vec![Piece::Line {
                start: Vec3::new(-length_mm / 2.0, 0.0, 0.0),
                dir: Vec3::x(),
                length: length_mm,
            }],
            BundleKind::Arc { radius_mm, sweep_deg } => vec![Piece::Arc {
                center: Vec3::zeros(),
                radius: radius_mm,
                theta0: 0.0,
                sweep: sweep_deg.to_radians(),
            }],
            BundleKind::UShape { radius_mm, sweep_deg, leg_length_mm } => {
                let sweep = sweep_deg.to_radians();
                let arc = Piece::Arc { center: Vec3::zeros(), radius: radius_mm, theta0: PI, sweep };
                let first_end = arc.point(0.0);
                let last = arc.point(arc.length());
                let last_dir = arc.tangent(arc.length());
                vec![
                    Piece::Line {
                        start: first_end + Vec3::y() * leg_length_mm,
                        dir: -Vec3::y(),
                        length: leg_length_mm,
                    },
                    arc,
                    Piece::Line { start: last, dir: last_dir, length: leg_length_mm },
                ]
            }
        };
        let mut c = Self {
            pieces: pieces.into_iter().filter(|p| p.length() > 0.0).collect(),
        };
        let (lo, hi) = c.bounds(0.0);
        let shift = -(lo + hi) / 2.0;
        for p in &mut c.pieces {
            p.translate(shift);
        }
        c
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(Piece::length).sum()
    }

    fn locate(&self, s: f64) -> (&Piece, f64) {
        let mut rest = s.clamp(0.0, self.length());
        for (i, p) in self.pieces.iter().enumerate() {
            if rest <= p.length() || i + 1 == self.pieces.len() {
                return (p, rest.min(p.length()));
            }
            rest -= p.length();
        }
        unreachable!("centerline has at least one piece")
    }

    pub fn point(&self, s: f64) -> Vec3 {
        let (p, t) = self.locate(s);
        p.point(t)
    }

    pub fn tangent(&self, s: f64) -> Vec3 {
        let (p, t) = self.locate(s);
        p.tangent(t)
    }

    /// Arc-length parameter of the closest centerline point to `p`.
    pub fn foot(&self, p: Vec3) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut offset = 0.0;
        for piece in &self.pieces {
            let t = piece.foot(p);
            let d = (piece.point(t) - p).norm();
            if d < best.0 {
                best = (d, offset + t);
            }
            offset += piece.length();
        }
        best.1
    }

    /// Axis-aligned bounds of the tube of radius `r` around the curve.
    pub fn bounds(&self, r: f64) -> (Vec3, Vec3) {
        let n = (self.length() / 0.25).ceil() as usize + 1;
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for k in 0..n {
            let p = self.point(self.length() * k as f64 / (n - 1) as f64);
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        (lo - Vec3::repeat(r), hi + Vec3::repeat(r))
    }

    /// In-plane unit normal and the plane normal at `s`.
    fn frame(&self, s: f64) -> (Vec3, Vec3) {
        let t = self.tangent(s);
        (Vec3::new(-t.y, t.x, 0.0), Vec3::z())
    }
}

/// Phantom ground truth.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub centerline: Centerline,
    pub tractogram: Tractogram,
    pub tom_gt: OrientationMap,
    pub tract_mask_gt: BinaryMask,
    pub endpoints_gt: EndpointRegions,
}

/// The default phantom grid: 50³ voxels of 2.5 mm centred on the origin.
pub fn default_grid() -> GridGeometry {
    GridGeometry::centered_isotropic([50; 3], 2.5).expect("valid default grid")
}

fn substream(key: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(key);
    r.set_stream(index);
    r
}

/// Builds a bundle centred in world space and its ground truth on `geom`.
pub fn generate_phantom<R: Rng + ?Sized>(spec: &BundleSpec, geom: &GridGeometry, rng: &mut R) -> Result<Phantom> {
    spec.validate()?;
    let centerline = Centerline::for_kind(spec.kind);
    check_fits(&centerline, spec.tube_radius_mm, geom)?;

    let key: u64 = rng.random();
    let len = centerline.length();
    let n_pts = (len / POINT_SPACING_MM).ceil() as usize + 1;
    let streamlines = (0..spec.n_streamlines as u64)
        .map(|i| {
            let mut r = substream(key, i);
            let radius = spec.tube_radius_mm * r.random::<f64>().sqrt();
            let phi = r.random_range(0.0..TAU);
            let base = (radius * phi.cos(), radius * phi.sin());
            let n_knots = (len / JITTER_CORRELATION_MM).ceil() as usize + 1;
            let knots: Vec<(f64, f64)> = (0..n_knots)
                .map(|_| {
                    if spec.jitter_mm > 0.0 {
                        let a: f64 = r.sample(StandardNormal);
                        let b: f64 = r.sample(StandardNormal);
                        (a * spec.jitter_mm, b * spec.jitter_mm)
                    } else {
                        (0.0, 0.0)
                    }
                })
                .collect();
            let pts = (0..n_pts)
                .map(|k| {
                    let s = len * k as f64 / (n_pts - 1) as f64;
                    let (ja, jb) = blend(&knots, s / JITTER_CORRELATION_MM);
                    let (mut a, mut b) = (base.0 + ja, base.1 + jb);
                    let rad = a.hypot(b);
                    if rad > spec.tube_radius_mm {
                        a *= spec.tube_radius_mm / rad;
                        b *= spec.tube_radius_mm / rad;
                    }
                    let (n1, n2) = centerline.frame(s);
                    centerline.point(s) + n1 * a + n2 * b
                })
                .collect();
            Streamline::from_raw(pts)
        })
        .collect();
    let tractogram = Tractogram::new(streamlines, geom.clone());

    let tract_mask_gt = voxelize(&tractogram);
    let mut tom_gt = OrientationMap::zeros(geom.clone());
    for i in tract_mask_gt.set_indices() {
        let ijk = geom.ijk(i);
        let w = geom.voxel_to_world(Vec3::new(ijk[0] as f64, ijk[1] as f64, ijk[2] as f64));
        tom_gt.data_mut()[i] = centerline.tangent(centerline.foot(w));
    }
    let endpoints_gt = end_caps(&centerline, spec.tube_radius_mm, geom)?;
    Ok(Phantom {
        centerline,
        tractogram,
        tom_gt,
        tract_mask_gt,
        endpoints_gt,
    })
}

/// Smoothstep blend of knot values at fractional knot position `x`.
fn blend(knots: &[(f64, f64)], x: f64) -> (f64, f64) {
    let i = (x.floor() as usize).min(knots.len() - 1);
    let j = (i + 1).min(knots.len() - 1);
    let t = (x - i as f64).clamp(0.0, 1.0);
    let w = t * t * (3.0 - 2.0 * t);
    (
        knots[i].0 + (knots[j].0 - knots[i].0) * w,
        knots[i].1 + (knots[j].1 - knots[i].1) * w,
    )
}

fn check_fits(c: &Centerline, tube_radius: f64, geom: &GridGeometry) -> Result<()> {
    let n = (c.length() / 0.25).ceil() as usize + 1;
    let dims = geom.dims();
    for k in 0..n {
        let s = c.length() * k as f64 / (n - 1) as f64;
        let (n1, n2) = c.frame(s);
        for (da, db) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let p = c.point(s) + (n1 * da + n2 * db) * tube_radius;
            let v = geom.world_to_voxel(p);
            for a in 0..3 {
                if v[a] < GRID_MARGIN_VOX || v[a] > dims[a] as f64 - 1.0 - GRID_MARGIN_VOX {
                    return Err(Error::BundleExceedsGrid(format!(
                        "tube reaches voxel coordinate {:.2} on axis {a} (grid size {})",
                        v[a], dims[a]
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Rasterized end-cap disks, closed and dilated once, made disjoint.
fn end_caps(c: &Centerline, radius: f64, geom: &GridGeometry) -> Result<EndpointRegions> {
    let step = 0.25 * geom.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    let cap = |s: f64| -> (BinaryMask, Vec3) {
        let centre = c.point(s);
        let (n1, n2) = c.frame(s);
        let mut m = BinaryMask::empty(geom.clone());
        let nr = (radius / step).ceil() as usize;
        for ir in 0..=nr {
            let r = radius * ir as f64 / nr as f64;
            let na = ((TAU * r / step).ceil() as usize).max(1);
            for ia in 0..na {
                let a = TAU * ia as f64 / na as f64;
                let p = centre + (n1 * a.cos() + n2 * a.sin()) * r;
                if let Some(ijk) = geom.nearest_voxel_world(p) {
                    m.set(ijk, true);
                }
            }
        }
        (dilate(&close(&m, 1), 1), centre)
    };
    let (mut a, ca) = cap(0.0);
    let (mut b, cb) = cap(c.length());
    for i in 0..geom.n_voxels() {
        if a.get_index(i) && b.get_index(i) {
            let ijk = geom.ijk(i);
            let w = geom.voxel_to_world(Vec3::new(ijk[0] as f64, ijk[1] as f64, ijk[2] as f64));
            if (w - ca).norm() <= (w - cb).norm() {
                b.set_index(i, false);
            } else {
                a.set_index(i, false);
            }
        }
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::BundleExceedsGrid("an end cap falls outside the grid".into()));
    }
    Ok(if zyx_less(&cb, &ca) {
        EndpointRegions { start: b, end: a }
    } else {
        EndpointRegions { start: a, end: b }
    })
}

/// Rotates each nonzero peak by |N(0, noise_angle_deg²)| degrees about a
/// random axis perpendicular to it, and zeroes each nonzero voxel with
/// probability `dropout`.
pub fn perturb_peaks<R: Rng + ?Sized>(
    tom: &OrientationMap,
    noise_angle_deg: f64,
    dropout: f64,
    rng: &mut R,
) -> Result<OrientationMap> {
    if !(noise_angle_deg >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise angle must be >= 0, got {noise_angle_deg}")));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::InvalidParameter(format!("dropout must be in [0, 1), got {dropout}")));
    }
    let key: u64 = rng.random();
    let mut out = tom.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if *v == Vec3::zeros() {
            continue;
        }
        let mut r = substream(key, i as u64);
        let drop = r.random::<f64>() < dropout;
        let angle = (noise_angle_deg * r.sample::<f64, _>(StandardNormal)).abs().to_radians();
        let phi = r.random_range(0.0..TAU);
        if drop {
            *v = Vec3::zeros();
        } else if angle > 0.0 {
            let (e1, e2) = perpendicular_basis(v);
            let axis = e1 * phi.cos() + e2 * phi.sin();
            *v = rotate(v, &axis, angle);
        }
    }
    Ok(out)
}

fn perpendicular_basis(v: &Vec3) -> (Vec3, Vec3) {
    let u = v.normalize();
    let helper = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = u.cross(&helper).normalize();
    (e1, u.cross(&e1))
}

/// Rodrigues rotation of `v` about unit `axis`.
fn rotate(v: &Vec3, axis: &Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * axis.dot(v) * (1.0 - c)
}

/// Peak image whose first peak is `tom` and whose other two peaks are
/// weaker distractors at least 60° away from it.
pub fn peaks_with_distractors<R: Rng + ?Sized>(tom: &OrientationMap, rng: &mut R) -> PeakImage {
    let key: u64 = rng.random();
    let mut peaks = PeakImage::zeros(tom.geometry().clone());
    for (i, v) in tom.data().iter().enumerate() {
        if *v == Vec3::zeros() {
            continue;
        }
        let mut r = substream(key, i as u64);
        let (e1, e2) = perpendicular_basis(v);
        let u = v.normalize();
        let mut distractor = |scale: f64| {
            let tilt = r.random_range(60f64.to_radians()..FRAC_PI_2);
            let phi = r.random_range(0.0..TAU);
            (u * tilt.cos() + (e1 * phi.cos() + e2 * phi.sin()) * tilt.sin()) * scale
        };
        let (p2, p3) = (distractor(0.6), distractor(0.3));
        peaks.set_peaks(i, [*v, p2, p3]);
    }
    peaks
}
