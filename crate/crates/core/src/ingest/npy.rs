//! Minimal `.npy` reader that streams slices along the first axis.

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Bool,
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    U64,
    I64,
    F32,
    F64,
}

impl Dtype {
    fn parse(descr: &str) -> Option<(Self, bool)> {
        let (order, code) = descr.split_at(1);
        let little = match order {
            "<" | "|" | "=" => true,
            ">" => false,
            _ => return None,
        };
        let t = match code {
            "b1" => Dtype::Bool,
            "u1" => Dtype::U8,
            "i1" => Dtype::I8,
            "u2" => Dtype::U16,
            "i2" => Dtype::I16,
            "u4" => Dtype::U32,
            "i4" => Dtype::I32,
            "u8" => Dtype::U64,
            "i8" => Dtype::I64,
            "f4" => Dtype::F32,
            "f8" => Dtype::F64,
            _ => return None,
        };
        Some((t, little))
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::Bool | Dtype::U8 | Dtype::I8 => 1,
            Dtype::U16 | Dtype::I16 => 2,
            Dtype::U32 | Dtype::I32 | Dtype::F32 => 4,
            Dtype::U64 | Dtype::I64 | Dtype::F64 => 8,
        }
    }
}

#[derive(Debug)]
pub struct NpyFile {
    path: PathBuf,
    reader: BufReader<File>,
    pub dtype: Dtype,
    little_endian: bool,
    pub shape: Vec<usize>,
    data_offset: u64,
}

impl NpyFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let bad = |m: &str| Error::record(&path, m.to_string());
        let mut reader = BufReader::new(File::open(&path).map_err(|e| bad(&e.to_string()))?);
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic).map_err(|e| bad(&e.to_string()))?;
        if &magic[..6] != b"\x93NUMPY" {
            return Err(bad("not an .npy file"));
        }
        let header_len = if magic[6] == 1 {
            let mut b = [0u8; 2];
            reader.read_exact(&mut b)?;
            u16::from_le_bytes(b) as usize
        } else {
            let mut b = [0u8; 4];
            reader.read_exact(&mut b)?;
            u32::from_le_bytes(b) as usize
        };
        let mut header = vec![0u8; header_len];
        reader.read_exact(&mut header)?;
        let header = String::from_utf8_lossy(&header).to_string();
        let descr = dict_value(&header, "descr").ok_or_else(|| bad("header lacks descr"))?;
        let descr = descr
            .trim_start_matches(['\'', '"'])
            .split(['\'', '"'])
            .next()
            .unwrap_or("");
        let (dtype, little_endian) = Dtype::parse(descr).ok_or_else(|| bad(&format!("unsupported dtype {descr}")))?;
        if dict_value(&header, "fortran_order").is_some_and(|v| v.starts_with("True")) {
            return Err(bad("fortran-ordered arrays are not supported"));
        }
        let shape_text = dict_value(&header, "shape").ok_or_else(|| bad("header lacks shape"))?;
        let shape = shape_text
            .trim_start_matches('(')
            .split(')')
            .next()
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| bad(&format!("bad shape {shape_text}"))))
            .collect::<Result<Vec<_>>>()?;
        let data_offset = reader.stream_position()?;
        Ok(Self {
            path,
            reader,
            dtype,
            little_endian,
            shape,
            data_offset,
        })
    }

    /// Number of slices along the first axis.
    pub fn len(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    /// Slice `index` along the first axis, converted to `f64`.
    pub fn read_slice(&mut self, index: usize) -> Result<Vec<f64>> {
        if index >= self.len() {
            return Err(Error::record(&self.path, format!("slice {index} out of {}", self.len())));
        }
        let n = self.slice_len();
        let sz = self.dtype.size();
        self.reader
            .seek(SeekFrom::Start(self.data_offset + (index * n * sz) as u64))?;
        let mut raw = vec![0u8; n * sz];
        self.reader
            .read_exact(&mut raw)
            .map_err(|e| Error::record(&self.path, format!("truncated data: {e}")))?;
        let le = self.little_endian;
        macro_rules! conv {
            ($t:ty) => {
                raw.chunks_exact(sz)
                    .map(|c| {
                        let b = c.try_into().expect("chunk size");
                        (if le { <$t>::from_le_bytes(b) } else { <$t>::from_be_bytes(b) }) as f64
                    })
                    .collect()
            };
        }
        Ok(match self.dtype {
            Dtype::Bool | Dtype::U8 => raw.iter().map(|&b| b as f64).collect(),
            Dtype::I8 => raw.iter().map(|&b| b as i8 as f64).collect(),
            Dtype::U16 => conv!(u16),
            Dtype::I16 => conv!(i16),
            Dtype::U32 => conv!(u32),
            Dtype::I32 => conv!(i32),
            Dtype::U64 => conv!(u64),
            Dtype::I64 => conv!(i64),
            Dtype::F32 => conv!(f32),
            Dtype::F64 => conv!(f64),
        })
    }
}

/// Raw text of `'key': value` in a python dict literal.
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let pat_single = format!("'{key}':");
    let pat_double = format!("\"{key}\":");
    let start = header
        .find(&pat_single)
        .map(|i| i + pat_single.len())
        .or_else(|| header.find(&pat_double).map(|i| i + pat_double.len()))?;
    Some(header[start..].trim_start())
}

/// Writes a little-endian `.npy` file; used by converters' tests and
/// fixture tooling.
pub fn write_npy(path: impl AsRef<Path>, descr: &str, shape: &[usize], data: &[u8]) -> Result<()> {
    let shape_text = match shape {
        [one] => format!("({one},)"),
        s => format!("({})", s.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
    };
    let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_text}, }}");
    let total = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - total % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + data.len());
    out.extend_from_slice(b"\x93NUMPY\x01\x00");
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(data);
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_slices() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.npy");
        let vals: Vec<i32> = (0..12).map(|v| v - 3).collect();
        let bytes: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        write_npy(&p, "<i4", &[3, 2, 2], &bytes).unwrap();
        let mut f = NpyFile::open(&p).unwrap();
        assert_eq!(f.shape, vec![3, 2, 2]);
        assert_eq!(f.read_slice(1).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.read_slice(0).unwrap()[0], -3.0);
        assert!(f.read_slice(3).is_err());
    }

    #[test]
    fn rejects_non_npy() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.npy");
        std::fs::write(&p, b"hello world").unwrap();
        assert!(NpyFile::open(&p).is_err());
    }
}
