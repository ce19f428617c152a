//! NPY (v1.0, little-endian) readers and writers for position maps, masks
//! and landmark arrays. Arrays are written as `<f4`; `<f4` and `<f8` are
//! accepted on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use npyz::DType;

use crate::error::{Error, Result};
use crate::geom::{LandmarkSet, Point3, Schema, UvPositionMap};

/// Shape and row-major values of a floating point NPY array.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn read_float_array(path: &Path) -> Result<FloatArray> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_float_array_from(BufReader::new(file)).map_err(|m| Error::parse(path, m))
}

fn read_float_array_from(reader: impl Read) -> std::result::Result<FloatArray, String> {
    let npy = npyz::NpyFile::new(reader).map_err(|e| format!("malformed NPY header: {e}"))?;
    if npy.order() != npyz::Order::C {
        return Err("Fortran-ordered arrays are not supported".into());
    }
    let shape: Vec<usize> = npy.shape().iter().map(|&d| d as usize).collect();
    let descr = match npy.dtype() {
        DType::Plain(t) => t.to_string(),
        other => return Err(format!("unsupported dtype {}", other.descr())),
    };
    let expected: usize = shape.iter().product();
    let data: Vec<f64> = match descr.as_str() {
        "<f4" => npy
            .into_vec::<f32>()
            .map_err(|e| format!("truncated or corrupt data: {e}"))?
            .into_iter()
            .map(f64::from)
            .collect(),
        "<f8" => npy.into_vec::<f64>().map_err(|e| format!("truncated or corrupt data: {e}"))?,
        other => return Err(format!("unsupported dtype {other}, expected <f4 or <f8")),
    };
    if data.len() != expected {
        return Err(format!("expected {expected} values, found {}", data.len()));
    }
    Ok(FloatArray { shape, data })
}

/// Writes `data` as a C-ordered little-endian `<f4` array.
pub fn write_f32_array(path: &Path, shape: &[usize], data: impl IntoIterator<Item = f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_f32_array_to(&mut out, shape, data).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_f32_array_to(w: &mut impl Write, shape: &[usize], data: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    write_header(w, "<f4", shape)?;
    let mut count = 0usize;
    for v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
        count += 1;
    }
    let expected: usize = shape.iter().product();
    if count != expected {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("shape {shape:?} needs {expected} values, got {count}"),
        ));
    }
    Ok(())
}

/// Version 1.0 header laid out exactly as `numpy.save` writes it.
fn write_header(w: &mut impl Write, descr: &str, shape: &[usize]) -> std::io::Result<()> {
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!("({})", shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    let mut dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    dict.push_str(&" ".repeat((HEADER_ALIGN - unpadded % HEADER_ALIGN) % HEADER_ALIGN));
    dict.push('\n');
    let len = u16::try_from(dict.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "header too long for v1.0"))?;
    w.write_all(MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(dict.as_bytes())
}

const MAGIC: &[u8] = b"\x93NUMPY";
const HEADER_ALIGN: usize = 64;

pub fn read_position_map(path: &Path) -> Result<UvPositionMap> {
    let arr = read_float_array(path)?;
    match arr.shape[..] {
        [h, w, 3] => UvPositionMap::new(h, w, triples(&arr.data)).map_err(|e| match e {
            Error::Shape(m) | Error::Invariant(m) => Error::parse(path, m),
            e => e,
        }),
        _ => Err(Error::Shape(format!(
            "{}: position map must have shape (H, W, 3), got {:?}",
            path.display(),
            arr.shape
        ))),
    }
}

pub fn write_position_map(path: &Path, map: &UvPositionMap) -> Result<()> {
    write_f32_array(path, &[map.height(), map.width(), 3], map.data().iter().flatten().copied())
}

/// Reads an `(H, W)` validity mask; nonzero means valid.
pub fn read_mask(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let npy = npyz::NpyFile::new(BufReader::new(file)).map_err(|e| Error::parse(path, e))?;
    let shape: Vec<usize> = npy.shape().iter().map(|&d| d as usize).collect();
    let [h, w] = shape[..] else {
        return Err(Error::Shape(format!("{}: mask must be 2-D, got {shape:?}", path.display())));
    };
    let descr = match npy.dtype() {
        DType::Plain(t) => t.to_string(),
        other => other.descr(),
    };
    let mask: Vec<bool> = match descr.as_str() {
        "|b1" => npy.into_vec::<bool>().map_err(|e| Error::parse(path, e))?,
        "|u1" => npy.into_vec::<u8>().map_err(|e| Error::parse(path, e))?.into_iter().map(|b| b != 0).collect(),
        _ => {
            let arr = read_float_array(path)?;
            arr.data.into_iter().map(|v| v != 0.0).collect()
        }
    };
    if mask.len() != h * w {
        return Err(Error::parse(path, "truncated mask data"));
    }
    Ok((h, w, mask))
}

pub fn write_mask(path: &Path, height: usize, width: usize, mask: &[bool]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_header(&mut out, "|u1", &[height, width])
        .and_then(|_| out.write_all(&mask.iter().map(|&b| b as u8).collect::<Vec<_>>()))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads an `(N, 3)` landmark array.
pub fn read_landmarks(path: &Path) -> Result<LandmarkSet> {
    let arr = read_float_array(path)?;
    match arr.shape[..] {
        [n, 3] => LandmarkSet::new(triples(&arr.data), Schema::for_count(n)),
        _ => Err(Error::Shape(format!("{}: landmarks must have shape (N, 3), got {:?}", path.display(), arr.shape))),
    }
}

pub fn write_landmarks(path: &Path, l: &LandmarkSet) -> Result<()> {
    write_f32_array(path, &[l.len(), 3], l.flat())
}

/// Reads a stacked `(images, N, 3)` prediction array.
pub fn read_landmark_stack(path: &Path) -> Result<Vec<LandmarkSet>> {
    let arr = read_float_array(path)?;
    let [m, n, 3] = arr.shape[..] else {
        return Err(Error::Shape(format!(
            "{}: predictions must have shape (images, N, 3), got {:?}",
            path.display(),
            arr.shape
        )));
    };
    let pts = triples(&arr.data);
    (0..m).map(|i| LandmarkSet::new(pts[i * n..(i + 1) * n].to_vec(), Schema::for_count(n))).collect()
}

fn triples(data: &[f64]) -> Vec<Point3> {
    data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_v1_little_endian_f4() {
        let mut buf = Vec::new();
        write_f32_array_to(&mut buf, &[2, 3], (0..6).map(|v| v as f64)).unwrap();
        assert_eq!(&buf[..8], b"\x93NUMPY\x01\x00");
        let header_len = u16::from_le_bytes([buf[8], buf[9]]) as usize;
        let header = std::str::from_utf8(&buf[10..10 + header_len]).unwrap();
        assert!(header.contains("'descr': '<f4'"), "{header}");
        assert_eq!(header.trim_end(), "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }");
        assert!(header.ends_with('\n'));
        assert_eq!((10 + header_len) % 64, 0);
        assert_eq!(buf.len(), 10 + header_len + 6 * 4);
        let back = read_float_array_from(&buf[..]).unwrap();
        assert_eq!(back.shape, vec![2, 3]);
        assert_eq!(back.data, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn truncated_data_is_a_parse_error() {
        let mut buf = Vec::new();
        write_f32_array_to(&mut buf, &[4, 4, 3], std::iter::repeat_n(1.0, 48)).unwrap();
        buf.truncate(buf.len() - 10);
        assert!(read_float_array_from(&buf[..]).is_err());
        assert!(read_float_array_from(&b"\x93NUMP"[..]).is_err());
    }
}
