//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Volumes are held x-fastest with the channel (4th) dimension slowest, which
//! is the on-disk order. Orientation comes from the sform when
//! `sform_code > 0`, else the qform when `qform_code > 0`, else from pixdim.
//! Writers emit both sform and qform with code 1 (scanner anatomical).
//!
//! Peak images use peak-major channel order: p1x, p1y, p1z, p2x, ...

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, GridGeometry, OrientationMap, PeakImage};
use crate::Vec3;

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_INT8: i16 = 256;
const DT_UINT16: i16 = 512;
const DT_UINT32: i16 = 768;

/// On-disk storage type for written volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageType {
    Uint8,
    Float32,
}

/// A decoded NIfTI volume with its payload converted to `f64`.
#[derive(Debug, Clone)]
pub struct NiftiVolume {
    pub geometry: GridGeometry,
    pub channels: usize,
    /// Raw on-disk datatype code.
    pub datatype: i16,
    /// `data[c * n_voxels + voxel_index]`, scaling already applied.
    pub data: Vec<f64>,
}

impl NiftiVolume {
    pub fn into_mask(self) -> Result<BinaryMask> {
        self.expect_channels(1)?;
        let data = self.data.iter().map(|&v| v != 0.0).collect();
        BinaryMask::from_data(self.geometry, data)
    }

    pub fn into_orientation_map(self) -> Result<OrientationMap> {
        self.expect_channels(3)?;
        let n = self.geometry.n_voxels();
        let d = &self.data;
        let data = (0..n).map(|i| Vec3::new(d[i], d[n + i], d[2 * n + i])).collect();
        OrientationMap::from_data(self.geometry, data)
    }

    pub fn into_peak_image(self) -> Result<PeakImage> {
        self.expect_channels(9)?;
        let n = self.geometry.n_voxels();
        let d = &self.data;
        let at = |c: usize, i: usize| d[c * n + i];
        let data = (0..n)
            .map(|i| {
                [0, 1, 2].map(|p| Vec3::new(at(3 * p, i), at(3 * p + 1, i), at(3 * p + 2, i)))
            })
            .collect();
        PeakImage::from_data(self.geometry, data)
    }

    fn expect_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} channel(s), volume has {}",
                self.channels
            )));
        }
        Ok(())
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

fn wants_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiVolume> {
    let path = path.as_ref();
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if is_gzip(&raw) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    decode_nifti(&bytes)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    read_nifti(path)?.into_mask()
}

pub fn read_orientation_map(path: impl AsRef<Path>) -> Result<OrientationMap> {
    read_nifti(path)?.into_orientation_map()
}

pub fn read_peak_image(path: impl AsRef<Path>) -> Result<PeakImage> {
    read_nifti(path)?.into_peak_image()
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl HeaderReader<'_> {
    fn arr<const N: usize>(&self, off: usize) -> [u8; N] {
        self.bytes[off..off + N].try_into().unwrap()
    }
    fn i16(&self, off: usize) -> i16 {
        let b = self.arr::<2>(off);
        if self.big_endian { i16::from_be_bytes(b) } else { i16::from_le_bytes(b) }
    }
    fn f32(&self, off: usize) -> f64 {
        let b = self.arr::<4>(off);
        (if self.big_endian { f32::from_be_bytes(b) } else { f32::from_le_bytes(b) }) as f64
    }
}

/// Decodes an uncompressed single-file NIfTI-1 image.
pub fn decode_nifti(bytes: &[u8]) -> Result<NiftiVolume> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::NiftiMalformedHeader(format!(
            "file is {} bytes, shorter than the 348-byte header",
            bytes.len()
        )));
    }
    let big_endian = match (
        i32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        i32::from_be_bytes(bytes[0..4].try_into().unwrap()),
    ) {
        (348, _) => false,
        (_, 348) => true,
        (v, _) => return Err(Error::NiftiMalformedHeader(format!("sizeof_hdr is {v}, expected 348"))),
    };
    let h = HeaderReader { bytes, big_endian };
    let magic = &bytes[344..348];
    if magic != b"n+1\0" {
        return Err(Error::NiftiMalformedHeader(format!(
            "magic {magic:?} is not single-file NIfTI-1 (n+1)"
        )));
    }

    let dim: Vec<i16> = (0..8).map(|k| h.i16(40 + 2 * k)).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::NiftiMalformedHeader(format!("dim[0] = {ndim} out of range 1..=7")));
    }
    let mut dims = [1usize; 3];
    let mut channels = 1usize;
    for k in 1..=ndim as usize {
        if dim[k] < 1 {
            return Err(Error::NiftiMalformedHeader(format!("dim[{k}] = {} must be positive", dim[k])));
        }
        if k <= 3 {
            dims[k - 1] = dim[k] as usize;
        } else {
            channels *= dim[k] as usize;
        }
    }

    let datatype = h.i16(70);
    let elem = match datatype {
        DT_UINT8 | DT_INT8 => 1,
        DT_INT16 | DT_UINT16 => 2,
        DT_INT32 | DT_UINT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(Error::NiftiUnsupportedDatatype(other)),
    };
    let pixdim: Vec<f64> = (0..8).map(|k| h.f32(76 + 4 * k)).collect();
    let vox_offset = h.f32(108);
    if !(vox_offset >= HEADER_SIZE as f64) {
        return Err(Error::NiftiMalformedHeader(format!("vox_offset {vox_offset} < 348")));
    }
    let vox_offset = vox_offset as usize;
    let scl_slope = h.f32(112);
    let scl_inter = h.f32(116);
    let qform_code = h.i16(252);
    let sform_code = h.i16(254);

    let affine = if sform_code > 0 {
        let mut a = Matrix4::identity();
        for r in 0..3 {
            for c in 0..4 {
                a[(r, c)] = h.f32(280 + 16 * r + 4 * c);
            }
        }
        a
    } else if qform_code > 0 {
        qform_affine(
            [h.f32(256), h.f32(260), h.f32(264)],
            [h.f32(268), h.f32(272), h.f32(276)],
            &pixdim,
        )
    } else {
        let mut a = Matrix4::identity();
        for axis in 0..3 {
            let s = pixdim[axis + 1];
            a[(axis, axis)] = if s > 0.0 { s } else { 1.0 };
        }
        a
    };
    let geometry = GridGeometry::from_affine(dims, affine)?;

    let n = geometry.n_voxels() * channels;
    let expected = n * elem;
    let available = bytes.len().saturating_sub(vox_offset);
    if available < expected {
        return Err(Error::NiftiTruncated {
            expected,
            found: available,
        });
    }
    let payload = &bytes[vox_offset..vox_offset + expected];
    let mut data = Vec::with_capacity(n);
    macro_rules! decode {
        ($t:ty) => {
            for chunk in payload.chunks_exact(std::mem::size_of::<$t>()) {
                let b = chunk.try_into().unwrap();
                let v = if big_endian { <$t>::from_be_bytes(b) } else { <$t>::from_le_bytes(b) };
                data.push(v as f64);
            }
        };
    }
    match datatype {
        DT_UINT8 => decode!(u8),
        DT_INT8 => decode!(i8),
        DT_INT16 => decode!(i16),
        DT_UINT16 => decode!(u16),
        DT_INT32 => decode!(i32),
        DT_UINT32 => decode!(u32),
        DT_FLOAT32 => decode!(f32),
        DT_FLOAT64 => decode!(f64),
        _ => unreachable!(),
    }
    if scl_slope != 0.0 && !(scl_slope == 1.0 && scl_inter == 0.0) {
        for v in &mut data {
            *v = *v * scl_slope + scl_inter;
        }
    }
    Ok(NiftiVolume {
        geometry,
        channels,
        datatype,
        data,
    })
}

fn qform_affine(bcd: [f64; 3], offset: [f64; 3], pixdim: &[f64]) -> Matrix4<f64> {
    let [b, c, d] = bcd;
    let a2 = 1.0 - (b * b + c * c + d * d);
    let (a, b, c, d) = if a2 < 1e-7 {
        let s = (b * b + c * c + d * d).sqrt();
        (0.0, b / s, c / s, d / s)
    } else {
        (a2.sqrt(), b, c, d)
    };
    let r = Matrix3::new(
        a * a + b * b - c * c - d * d,
        2.0 * (b * c - a * d),
        2.0 * (b * d + a * c),
        2.0 * (b * c + a * d),
        a * a + c * c - b * b - d * d,
        2.0 * (c * d - a * b),
        2.0 * (b * d - a * c),
        2.0 * (c * d + a * b),
        a * a + d * d - c * c - b * b,
    );
    let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let sx = if pixdim[1] > 0.0 { pixdim[1] } else { 1.0 };
    let sy = if pixdim[2] > 0.0 { pixdim[2] } else { 1.0 };
    let sz = if pixdim[3] > 0.0 { pixdim[3] } else { 1.0 };
    let lin = r * Matrix3::from_diagonal(&Vec3::new(sx, sy, qfac * sz));
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&lin);
    for k in 0..3 {
        out[(k, 3)] = offset[k];
    }
    out
}

/// Quaternion (b, c, d) and qfac describing the rotation part of `geom`.
fn qform_params(geom: &GridGeometry) -> ([f32; 3], f32) {
    let a = geom.affine();
    let s = geom.spacing();
    let mut r = Matrix3::zeros();
    for col in 0..3 {
        for row in 0..3 {
            r[(row, col)] = a[(row, col)] / s[col];
        }
    }
    let qfac = if r.determinant() < 0.0 {
        r.column_mut(2).neg_mut();
        -1.0
    } else {
        1.0
    };
    let rot = Rotation3::from_matrix_unchecked(r);
    let q = UnitQuaternion::from_rotation_matrix(&rot);
    let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
    ([q.i as f32, q.j as f32, q.k as f32], qfac)
}

/// Encodes a volume as an uncompressed single-file NIfTI-1 image.
///
/// `data` follows the [`NiftiVolume::data`] layout.
pub fn encode_nifti(geom: &GridGeometry, channels: usize, data: &[f64], storage: StorageType) -> Result<Vec<u8>> {
    let n = geom.n_voxels() * channels;
    if data.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "payload has {} values, expected {n}",
            data.len()
        )));
    }
    let dims = geom.dims();
    for &d in &dims {
        if d > i16::MAX as usize {
            return Err(Error::InvalidGeometry(format!("dimension {d} exceeds NIfTI-1 limit")));
        }
    }
    let (datatype, bitpix) = match storage {
        StorageType::Uint8 => (DT_UINT8, 8i16),
        StorageType::Float32 => (DT_FLOAT32, 32i16),
    };
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut [u8], off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_i32 = |h: &mut [u8], off: usize, v: i32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());

    put_i32(&mut h, 0, HEADER_SIZE as i32);
    h[38] = b'r';
    let ndim: i16 = if channels > 1 { 4 } else { 3 };
    let dim = [ndim, dims[0] as i16, dims[1] as i16, dims[2] as i16, channels as i16, 1, 1, 1];
    for (k, v) in dim.iter().enumerate() {
        put_i16(&mut h, 40 + 2 * k, *v);
    }
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, bitpix);

    let (quat, qfac) = qform_params(geom);
    let s = geom.spacing();
    let pixdim = [qfac, s[0] as f32, s[1] as f32, s[2] as f32, if channels > 1 { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0];
    for (k, v) in pixdim.iter().enumerate() {
        put_f32(&mut h, 76 + 4 * k, *v);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    h[123] = 2; // NIFTI_UNITS_MM
    let descrip = b"tomtrack";
    h[148..148 + descrip.len()].copy_from_slice(descrip);
    put_i16(&mut h, 252, 1);
    put_i16(&mut h, 254, 1);
    for (k, v) in quat.iter().enumerate() {
        put_f32(&mut h, 256 + 4 * k, *v);
    }
    let a = geom.affine();
    for k in 0..3 {
        put_f32(&mut h, 268 + 4 * k, a[(k, 3)] as f32);
    }
    for r in 0..3 {
        for c in 0..4 {
            put_f32(&mut h, 280 + 16 * r + 4 * c, a[(r, c)] as f32);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");

    match storage {
        StorageType::Uint8 => h.extend(data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8)),
        StorageType::Float32 => {
            h.reserve(4 * n);
            for &v in data {
                h.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    Ok(h)
}

/// File contents for `path`: `bytes` gzip-compressed when the path ends in
/// `.gz`, unchanged otherwise. The gzip header carries no timestamp.
pub fn file_bytes_for_path(path: impl AsRef<Path>, bytes: &[u8]) -> Result<Vec<u8>> {
    let path = path.as_ref();
    if !wants_gzip(path) {
        return Ok(bytes.to_vec());
    }
    let mut gz = GzEncoder::new(Vec::with_capacity(bytes.len() / 4), Compression::default());
    gz.write_all(bytes).map_err(|e| Error::io(path, e))?;
    gz.finish().map_err(|e| Error::io(path, e))
}

/// Writes raw bytes, gzip-compressing when the path ends in `.gz`.
pub fn write_nifti_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let out = file_bytes_for_path(path, bytes)?;
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn encode_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let data: Vec<f64> = mask.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    encode_nifti(mask.geometry(), 1, &data, StorageType::Uint8)
}

pub fn encode_orientation_map(tom: &OrientationMap) -> Result<Vec<u8>> {
    let n = tom.geometry().n_voxels();
    let mut data = vec![0.0; 3 * n];
    for (i, v) in tom.data().iter().enumerate() {
        for c in 0..3 {
            data[c * n + i] = v[c];
        }
    }
    encode_nifti(tom.geometry(), 3, &data, StorageType::Float32)
}

pub fn encode_peak_image(peaks: &PeakImage) -> Result<Vec<u8>> {
    let n = peaks.geometry().n_voxels();
    let mut data = vec![0.0; 9 * n];
    for (i, ps) in peaks.data().iter().enumerate() {
        for (p, v) in ps.iter().enumerate() {
            for c in 0..3 {
                data[(3 * p + c) * n + i] = v[c];
            }
        }
    }
    encode_nifti(peaks.geometry(), 9, &data, StorageType::Float32)
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_nifti_bytes(path, &encode_mask(mask)?)
}

pub fn write_orientation_map(tom: &OrientationMap, path: impl AsRef<Path>) -> Result<()> {
    write_nifti_bytes(path, &encode_orientation_map(tom)?)
}

pub fn write_peak_image(peaks: &PeakImage, path: impl AsRef<Path>) -> Result<()> {
    write_nifti_bytes(path, &encode_peak_image(peaks)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotated_geometry() -> GridGeometry {
        let rot = Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let lin = rot.matrix() * Matrix3::from_diagonal(&Vec3::new(1.25, 2.0, 2.5));
        let mut a = Matrix4::identity();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&lin);
        a[(0, 3)] = -90.0;
        a[(1, 3)] = 126.0;
        a[(2, 3)] = -72.5;
        GridGeometry::from_affine([4, 5, 6], a).unwrap()
    }

    #[test]
    fn qform_only_header_recovers_rotation() {
        let g = rotated_geometry();
        let mut bytes = encode_nifti(&g, 1, &vec![0.0; g.n_voxels()], StorageType::Uint8).unwrap();
        bytes[254..256].copy_from_slice(&0i16.to_le_bytes());
        let back = decode_nifti(&bytes).unwrap();
        assert!(back.geometry.matches(&g, 1e-5));
    }

    #[test]
    fn mirrored_affine_sets_negative_qfac() {
        let mut a = Matrix4::identity();
        a[(0, 0)] = -2.0;
        let g = GridGeometry::from_affine([2, 2, 2], a).unwrap();
        let mut bytes = encode_mask(&BinaryMask::empty(g.clone())).unwrap();
        bytes[254..256].copy_from_slice(&0i16.to_le_bytes());
        let back = decode_nifti(&bytes).unwrap();
        assert!(back.geometry.matches(&g, 1e-6), "{:?}", back.geometry.affine());
    }

    #[test]
    fn big_endian_header_is_read() {
        let g = GridGeometry::axis_aligned([2, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        let le = encode_nifti(&g, 1, &[1.5, -2.0], StorageType::Float32).unwrap();
        let mut be = le.clone();
        let swap = |b: &mut [u8], off: usize, len: usize| b[off..off + len].reverse();
        swap(&mut be, 0, 4);
        for k in 0..8 {
            swap(&mut be, 40 + 2 * k, 2);
            swap(&mut be, 76 + 4 * k, 4);
        }
        for off in [70, 72, 252, 254] {
            swap(&mut be, off, 2);
        }
        for off in [108, 112, 116] {
            swap(&mut be, off, 4);
        }
        for k in 0..(3 + 3 + 12) {
            swap(&mut be, 256 + 4 * k, 4);
        }
        swap(&mut be, 352, 4);
        swap(&mut be, 356, 4);
        let v = decode_nifti(&be).unwrap();
        assert_eq!(v.data, vec![1.5, -2.0]);
    }

    #[test]
    fn truncated_payload_is_reported() {
        let g = GridGeometry::axis_aligned([4, 4, 4], [1.0; 3], Vec3::zeros()).unwrap();
        let bytes = encode_mask(&BinaryMask::empty(g)).unwrap();
        assert!(matches!(
            decode_nifti(&bytes[..bytes.len() - 1]),
            Err(Error::NiftiTruncated { expected: 64, found: 63 })
        ));
    }

    #[test]
    fn bad_magic_and_datatype() {
        let g = GridGeometry::axis_aligned([1, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        let good = encode_mask(&BinaryMask::empty(g)).unwrap();
        let mut bad = good.clone();
        bad[344] = b'x';
        assert!(matches!(decode_nifti(&bad), Err(Error::NiftiMalformedHeader(_))));
        let mut bad = good.clone();
        bad[70..72].copy_from_slice(&128i16.to_le_bytes());
        assert!(matches!(decode_nifti(&bad), Err(Error::NiftiUnsupportedDatatype(128))));
        assert!(matches!(decode_nifti(&good[..100]), Err(Error::NiftiMalformedHeader(_))));
    }

    #[test]
    fn scaling_is_applied() {
        let g = GridGeometry::axis_aligned([2, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        let mut bytes = encode_nifti(&g, 1, &[1.0, 2.0], StorageType::Uint8).unwrap();
        bytes[112..116].copy_from_slice(&2.0f32.to_le_bytes());
        bytes[116..120].copy_from_slice(&0.5f32.to_le_bytes());
        assert_eq!(decode_nifti(&bytes).unwrap().data, vec![2.5, 4.5]);
    }

    #[test]
    fn channel_count_is_checked() {
        let g = GridGeometry::axis_aligned([1, 1, 1], [1.0; 3], Vec3::zeros()).unwrap();
        let bytes = encode_mask(&BinaryMask::empty(g)).unwrap();
        assert!(decode_nifti(&bytes).unwrap().into_orientation_map().is_err());
    }
}
