//! MRtrix `.tck` streamline files.
//!
//! A text header (`mrtrix tracks`, `key: value` lines, `END`) is followed at
//! the `file: . <offset>` position by float32 xyz triplets in world mm. Each
//! streamline is closed by a NaN triplet and the stream by an Inf triplet.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::streamlines::{Streamline, Tractogram};
use crate::Vec3;

const MAGIC: &str = "mrtrix tracks";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

/// Serializes streamlines to TCK bytes. `properties` are written as extra
/// header lines between the magic line and the mandatory fields.
pub fn encode_tck(streamlines: &[Streamline], properties: &[(String, String)]) -> Vec<u8> {
    let mut head = String::from(MAGIC);
    head.push('\n');
    for (k, v) in properties {
        head.push_str(&format!("{k}: {v}\n"));
    }
    head.push_str(&format!("count: {}\n", streamlines.len()));
    head.push_str(&format!("total_count: {}\n", streamlines.len()));
    head.push_str("datatype: Float32LE\n");

    // The offset's own digit count feeds back into the header length.
    let mut offset = head.len() + "file: . \nEND\n".len() + 1;
    loop {
        let len = head.len() + format!("file: . {offset}\nEND\n").len();
        if len == offset {
            break;
        }
        offset = len;
    }
    head.push_str(&format!("file: . {offset}\nEND\n"));

    let n_points: usize = streamlines.iter().map(|s| s.len() + 1).sum::<usize>() + 1;
    let mut out = head.into_bytes();
    out.reserve(n_points * 12);
    let mut push = |v: [f32; 3]| {
        for c in v {
            out.extend_from_slice(&c.to_le_bytes());
        }
    };
    for s in streamlines {
        for p in s.points() {
            push([p.x as f32, p.y as f32, p.z as f32]);
        }
        push([f32::NAN; 3]);
    }
    push([f32::INFINITY; 3]);
    out
}

/// Header key/value pairs in file order.
pub type TckProperties = Vec<(String, String)>;

/// Parses TCK bytes into raw streamlines plus the header key/value pairs.
pub fn decode_tck(bytes: &[u8]) -> Result<(Vec<Streamline>, TckProperties)> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Option<String> {
        let rest = &bytes[*pos..];
        let nl = rest.iter().position(|&b| b == b'\n')?;
        *pos += nl + 1;
        Some(String::from_utf8_lossy(&rest[..nl]).trim_end_matches('\r').to_string())
    };

    match next_line(&mut pos) {
        Some(l) if l.trim() == MAGIC => {}
        Some(l) => return Err(Error::TckMalformedHeader(format!("first line is {l:?}, expected {MAGIC:?}"))),
        None => return Err(Error::TckMalformedHeader("missing magic line".into())),
    }
    let mut props = Vec::new();
    let mut ended = false;
    while let Some(line) = next_line(&mut pos) {
        if line.trim() == "END" {
            ended = true;
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| Error::TckMalformedHeader(format!("line {line:?} is not `key: value`")))?;
        props.push((k.trim().to_string(), v.trim().to_string()));
    }
    if !ended {
        return Err(Error::TckMalformedHeader("header not terminated by END".into()));
    }

    let get = |key: &str| props.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let endian = match get("datatype") {
        Some("Float32LE") => Endian::Little,
        Some("Float32BE") => Endian::Big,
        Some(other) => return Err(Error::TckUnsupportedDatatype(other.to_string())),
        None => return Err(Error::TckMalformedHeader("missing datatype field".into())),
    };
    let file = get("file").ok_or_else(|| Error::TckMalformedHeader("missing file field".into()))?;
    let offset: usize = match file.split_whitespace().collect::<Vec<_>>().as_slice() {
        [".", off] => off
            .parse()
            .map_err(|_| Error::TckMalformedHeader(format!("bad file offset {off:?}")))?,
        _ => return Err(Error::TckMalformedHeader(format!("unsupported file field {file:?}"))),
    };
    if offset < pos {
        return Err(Error::TckMalformedHeader(format!(
            "data offset {offset} lies inside the header ({pos} bytes)"
        )));
    }
    if offset > bytes.len() {
        return Err(Error::TckTruncated(format!(
            "data offset {offset} beyond end of file ({} bytes)",
            bytes.len()
        )));
    }

    let data = &bytes[offset..];
    let read = |chunk: &[u8]| {
        let b: [u8; 4] = chunk.try_into().unwrap();
        match endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        }
    };
    let mut streamlines = Vec::new();
    let mut current = Vec::new();
    let mut terminated = false;
    for triplet in data.chunks(12) {
        if triplet.len() < 12 {
            return Err(Error::TckTruncated(format!(
                "partial triplet of {} bytes at end of data",
                triplet.len()
            )));
        }
        let v = [read(&triplet[0..4]), read(&triplet[4..8]), read(&triplet[8..12])];
        if v.iter().all(|c| c.is_infinite()) {
            terminated = true;
            break;
        }
        if v.iter().all(|c| c.is_nan()) {
            streamlines.push(Streamline::from_raw(std::mem::take(&mut current)));
            continue;
        }
        current.push(Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64));
    }
    if !terminated {
        return Err(Error::TckTruncated(format!(
            "no end-of-data marker after {} streamline(s)",
            streamlines.len()
        )));
    }
    if !current.is_empty() {
        streamlines.push(Streamline::from_raw(current));
    }
    Ok((streamlines, props))
}

pub fn write_tck_streamlines(streamlines: &[Streamline], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_tck(streamlines, &[])).map_err(|e| Error::io(path, e))
}

pub fn write_tck(t: &Tractogram, path: impl AsRef<Path>) -> Result<()> {
    write_tck_streamlines(&t.streamlines, path)
}

pub fn read_tck_streamlines(path: impl AsRef<Path>) -> Result<Vec<Streamline>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_tck(&bytes)?.0)
}

/// Reads a TCK file and attaches the reference grid.
pub fn read_tck(path: impl AsRef<Path>, geometry: GridGeometry) -> Result<Tractogram> {
    Ok(Tractogram::new(read_tck_streamlines(path)?, geometry))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(pts: &[[f64; 3]]) -> Streamline {
        Streamline::from_raw(pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn empty_round_trip() {
        let bytes = encode_tck(&[], &[]);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("mrtrix tracks\n"));
        assert!(text.contains("count: 0\n"));
        let (s, _) = decode_tck(&bytes).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn single_streamline_round_trip() {
        let s = line(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]);
        let (back, props) = decode_tck(&encode_tck(std::slice::from_ref(&s), &[])).unwrap();
        assert_eq!(back, vec![s]);
        assert!(props.iter().any(|(k, v)| k == "total_count" && v == "1"));
    }

    #[test]
    fn offset_points_past_end_marker() {
        for n in [0usize, 5, 123] {
            let s: Vec<Streamline> = (0..n).map(|i| line(&[[i as f64, 0.0, 0.0], [0.0, 1.0, 2.0]])).collect();
            let props = vec![("step_size".to_string(), "0.7".to_string())];
            let bytes = encode_tck(&s, &props);
            let text = String::from_utf8_lossy(&bytes);
            let end = text.find("END\n").unwrap() + 4;
            let off: usize = text
                .lines()
                .find_map(|l| l.strip_prefix("file: . "))
                .unwrap()
                .parse()
                .unwrap();
            assert_eq!(off, end);
        }
    }

    #[test]
    fn wrong_magic_is_malformed() {
        assert!(matches!(decode_tck(b"mrtrix image\nEND\n"), Err(Error::TckMalformedHeader(_))));
        assert!(matches!(decode_tck(b"mrtrix tracks\ncount: 0\n"), Err(Error::TckMalformedHeader(_))));
    }

    #[test]
    fn wrong_datatype_is_reported() {
        let bytes = encode_tck(&[], &[]);
        let text = String::from_utf8(bytes[..bytes.len() - 12].to_vec()).unwrap();
        let bad = text.replace("Float32LE", "Float64LE");
        assert!(matches!(
            decode_tck(bad.as_bytes()),
            Err(Error::TckUnsupportedDatatype(d)) if d == "Float64LE"
        ));
    }

    #[test]
    fn truncated_data_is_reported() {
        let s = line(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]);
        let bytes = encode_tck(&[s], &[]);
        assert!(matches!(decode_tck(&bytes[..bytes.len() - 12]), Err(Error::TckTruncated(_))));
        assert!(matches!(decode_tck(&bytes[..bytes.len() - 5]), Err(Error::TckTruncated(_))));
    }

    #[test]
    fn big_endian_data_is_read() {
        let mut bytes = b"mrtrix tracks\ndatatype: Float32BE\nfile: . 64\nEND\n".to_vec();
        bytes.resize(64, 0);
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0, f32::NAN, f32::NAN, f32::NAN, f32::INFINITY, f32::INFINITY, f32::INFINITY] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let (s, _) = decode_tck(&bytes).unwrap();
        assert_eq!(s, vec![line(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])]);
    }
}
