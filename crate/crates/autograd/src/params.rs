use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::TensorError;
use crate::tensor::Tensor;

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

const BLOB_MAGIC: &[u8; 8] = b"SCLYPRM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Trainable,
    /// Running statistics and similar state, never differentiated.
    Buffer,
}

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    pub kind: ParamKind,
}

/// Named parameters of one subnetwork.
#[derive(Debug)]
pub struct ParamStore {
    uid: u64,
    name: String,
    entries: Vec<ParamEntry>,
    frozen: bool,
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        Self {
            uid: NEXT_UID.fetch_add(1, Ordering::Relaxed),
            name: self.name.clone(),
            entries: self.entries.clone(),
            frozen: self.frozen,
        }
    }
}

impl ParamStore {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            uid: NEXT_UID.fetch_add(1, Ordering::Relaxed),
            name: name.into(),
            entries: Vec::new(),
            frozen: false,
        }
    }

    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.push(name.into(), value, ParamKind::Trainable)
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.push(name.into(), value, ParamKind::Buffer)
    }

    fn push(&mut self, name: String, value: Tensor, kind: ParamKind) -> ParamId {
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry { name, value, kind });
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) {
        let entry = &mut self.entries[id.0];
        assert_eq!(entry.value.shape(), value.shape(), "set {}: shape", entry.name);
        entry.value = value;
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].kind == ParamKind::Trainable
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of trainable scalars.
    pub fn numel(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind == ParamKind::Trainable)
            .map(|e| e.value.numel())
            .sum()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Bitwise equality of every stored value.
    pub fn bit_identical(&self, other: &ParamStore) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.name == b.name
                    && a.value.shape() == b.value.shape()
                    && a
                        .value
                        .data()
                        .iter()
                        .zip(b.value.data())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), TensorError> {
        w.write_all(BLOB_MAGIC)?;
        write_u64(w, self.entries.len() as u64)?;
        for e in &self.entries {
            write_u64(w, e.name.len() as u64)?;
            w.write_all(e.name.as_bytes())?;
            w.write_all(&[match e.kind {
                ParamKind::Trainable => 0,
                ParamKind::Buffer => 1,
            }])?;
            write_u64(w, e.value.ndim() as u64)?;
            for &d in e.value.shape() {
                write_u64(w, d as u64)?;
            }
            for v in e.value.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(name: impl Into<String>, r: &mut impl Read) -> Result<Self, TensorError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BLOB_MAGIC {
            return Err(TensorError::Blob("bad magic".into()));
        }
        let mut store = ParamStore::new(name);
        let count = read_u64(r)?;
        for _ in 0..count {
            let len = read_u64(r)? as usize;
            if len > 4096 {
                return Err(TensorError::Blob(format!("name length {len}")));
            }
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| TensorError::Blob(e.to_string()))?;
            let mut kind = [0u8; 1];
            r.read_exact(&mut kind)?;
            let ndim = read_u64(r)? as usize;
            if ndim > 8 {
                return Err(TensorError::Blob(format!("rank {ndim}")));
            }
            let shape = (0..ndim)
                .map(|_| read_u64(r).map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            let value = Tensor::from_vec(&shape, data)?;
            match kind[0] {
                0 => store.add(name, value),
                1 => store.add_buffer(name, value),
                k => return Err(TensorError::Blob(format!("unknown kind {k}"))),
            };
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Replaces every value with the one stored at `path`. Names, kinds and
    /// shapes must match exactly.
    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        let loaded = Self::read_from(self.name.clone(), &mut BufReader::new(File::open(path)?))?;
        self.copy_from(&loaded)
    }

    pub fn copy_from(&mut self, other: &ParamStore) -> Result<(), TensorError> {
        if other.entries.len() != self.entries.len() {
            return Err(TensorError::Blob(format!(
                "{}: expected {} entries, found {}",
                self.name,
                self.entries.len(),
                other.entries.len()
            )));
        }
        for (mine, theirs) in self.entries.iter_mut().zip(&other.entries) {
            if mine.name != theirs.name || mine.value.shape() != theirs.value.shape() {
                return Err(TensorError::Blob(format!(
                    "{}: entry {}{:?} does not match {}{:?}",
                    self.name,
                    mine.name,
                    mine.value.shape(),
                    theirs.name,
                    theirs.value.shape()
                )));
            }
            mine.value = theirs.value.clone();
        }
        Ok(())
    }
}

fn write_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
