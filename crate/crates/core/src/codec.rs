//! Wire format for sparsified gradients (format version 1).
//!
//! All integers and reals are little-endian.
//!
//! ```text
//! offset        size  field
//! 0             4     magic "ATMO"
//! 4             1     format version (1)
//! 5             1     kind: 0 entry-wise, 1 svd, 2 dense
//! 6             1     rank r of the original shape
//! 7             8r    dims, u64 each
//! 7+8r          4     atom count k, u32
//! 11+8r         8     budget s, f64
//! 19+8r         ...   payload, k records:
//!                       entry-wise: u32 flat index, f32 weight
//!                       svd (n x m): f32 weight, n f32 (u), m f32 (v)
//!                       dense: f32 value
//! ```
//!
//! Weights and vectors are narrowed to 32 bits on the wire. Decoding widens
//! them back without renormalizing.
//!
//! Example: an entry-wise message for shape `[2, 3]` with budget 1.5 keeping
//! flat index 1 with weight 0.5 and flat index 4 with weight -2.25:
//!
//! ```text
//! 41544d4f 01 00 02                       magic, version, kind, rank
//! 0200000000000000 0300000000000000       dims
//! 02000000 000000000000f83f               count, budget
//! 01000000 0000003f 04000000 000010c0     records
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atoms::{AtomDescriptor, DecompositionKind, Tensor};
use crate::sparsifier::{KeptAtom, SparsifiedGradient};

pub const WIRE_MAGIC: &[u8; 4] = b"ATMO";
pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("bad magic at offset 0: expected \"ATMO\", found {found:02x?}")]
    BadMagic { found: Vec<u8> },

    #[error("unsupported format version {version} at offset 4")]
    UnsupportedVersion { version: u8 },

    #[error("unknown message kind {kind} at offset 5")]
    UnknownKind { kind: u8 },

    #[error("truncated message: expected {expected} bytes, found {actual} (short at offset {offset})")]
    Truncated {
        offset: usize,
        expected: usize,
        actual: usize,
    },

    #[error("{extra} trailing bytes after offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },

    #[error("invalid shape at offset {offset}: {reason}")]
    InvalidShape { offset: usize, reason: String },

    #[error("atom index {index} at offset {offset} is out of range for {len} entries")]
    IndexOutOfRange { offset: usize, index: u64, len: usize },

    #[error("non-finite value at offset {offset}")]
    NonFinite { offset: usize },

    #[error("{count} atoms exceed the u32 atom count field")]
    Capacity { count: usize },

    #[error("cannot encode: {0}")]
    Unencodable(String),
}

type Result<T> = std::result::Result<T, CodecError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireKind {
    Entrywise = 0,
    Svd = 1,
    Dense = 2,
}

impl WireKind {
    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Self::Entrywise),
            1 => Ok(Self::Svd),
            2 => Ok(Self::Dense),
            kind => Err(CodecError::UnknownKind { kind }),
        }
    }
}

impl From<DecompositionKind> for WireKind {
    fn from(k: DecompositionKind) -> Self {
        match k {
            DecompositionKind::Entrywise => Self::Entrywise,
            DecompositionKind::Svd => Self::Svd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireHeader {
    pub version: u8,
    pub kind: WireKind,
    pub shape: Vec<usize>,
    pub atom_count: u32,
    pub budget: f64,
}

impl WireHeader {
    pub fn encoded_len(&self) -> usize {
        header_len(self.shape.len())
    }

    /// Bytes of one payload record.
    pub fn record_len(&self) -> usize {
        record_len(self.kind, &self.shape)
    }
}

fn header_len(rank: usize) -> usize {
    19 + 8 * rank
}

fn record_len(kind: WireKind, shape: &[usize]) -> usize {
    match kind {
        WireKind::Entrywise => 8,
        WireKind::Dense => 4,
        WireKind::Svd => match shape {
            [n, m] => 4 * (1 + n + m),
            _ => 0,
        },
    }
}

/// Communication cost of one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// Reals sent: one per entry-wise atom, `n+m+1` per singular triplet.
    pub reals_transmitted: u64,
    /// Exact encoded length.
    pub bytes_on_wire: u64,
    /// Bytes spent on flat indices.
    pub index_overhead_bytes: u64,
}

pub fn message_cost(sg: &SparsifiedGradient) -> CostReport {
    let kind = WireKind::from(sg.decomposition_kind);
    let k = sg.kept_atoms.len() as u64;
    let per_atom_reals = match (kind, &sg.original_shape[..]) {
        (WireKind::Svd, [n, m]) => (n + m + 1) as u64,
        _ => 1,
    };
    CostReport {
        reals_transmitted: k * per_atom_reals,
        bytes_on_wire: (header_len(sg.original_shape.len()) + sg.kept_atoms.len() * record_len(kind, &sg.original_shape))
            as u64,
        index_overhead_bytes: if kind == WireKind::Entrywise { 4 * k } else { 0 },
    }
}

pub fn dense_cost(t: &Tensor) -> CostReport {
    CostReport {
        reals_transmitted: t.len() as u64,
        bytes_on_wire: (header_len(t.rank()) + 4 * t.len()) as u64,
        index_overhead_bytes: 0,
    }
}

fn write_header(buf: &mut Vec<u8>, kind: WireKind, shape: &[usize], count: usize, budget: f64) -> Result<()> {
    let rank = u8::try_from(shape.len())
        .map_err(|_| CodecError::Unencodable(format!("rank {} exceeds 255", shape.len())))?;
    let count = u32::try_from(count).map_err(|_| CodecError::Capacity { count })?;
    buf.extend_from_slice(WIRE_MAGIC);
    buf.push(WIRE_VERSION);
    buf.push(kind as u8);
    buf.push(rank);
    for &d in shape {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&budget.to_le_bytes());
    Ok(())
}

fn push_f32(buf: &mut Vec<u8>, x: f64) {
    buf.extend_from_slice(&(x as f32).to_le_bytes());
}

pub fn encode(sg: &SparsifiedGradient) -> Result<Vec<u8>> {
    let kind = WireKind::from(sg.decomposition_kind);
    let shape = &sg.original_shape;
    let mut buf = Vec::with_capacity(message_cost(sg).bytes_on_wire as usize);
    write_header(&mut buf, kind, shape, sg.kept_atoms.len(), sg.budget_used)?;
    let len: usize = shape.iter().product();
    for kept in &sg.kept_atoms {
        match (&kept.atom, kind) {
            (AtomDescriptor::StandardBasis(i), WireKind::Entrywise) => {
                let index = u32::try_from(*i)
                    .ok()
                    .filter(|_| *i < len)
                    .ok_or_else(|| CodecError::Unencodable(format!("flat index {i} out of range")))?;
                buf.extend_from_slice(&index.to_le_bytes());
                push_f32(&mut buf, kept.weight);
            }
            (AtomDescriptor::RankOne { u, v }, WireKind::Svd) => {
                if shape.len() != 2 || u.len() != shape[0] || v.len() != shape[1] {
                    return Err(CodecError::Unencodable(format!(
                        "rank-one atom {}x{} does not match shape {shape:?}",
                        u.len(),
                        v.len()
                    )));
                }
                push_f32(&mut buf, kept.weight);
                u.iter().chain(v).for_each(|&x| push_f32(&mut buf, x));
            }
            _ => {
                return Err(CodecError::Unencodable(format!(
                    "atom kind does not match {kind:?} message"
                )))
            }
        }
    }
    Ok(buf)
}

/// Dense transmission of a whole tensor (no sparsification).
pub fn encode_dense(t: &Tensor) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(dense_cost(t).bytes_on_wire as usize);
    write_header(&mut buf, WireKind::Dense, t.shape(), t.len(), t.len() as f64)?;
    t.data().iter().for_each(|&x| push_f32(&mut buf, x));
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, expected_total: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < self.pos + n {
            return Err(CodecError::Truncated {
                offset: self.pos,
                expected: expected_total.max(self.pos + n),
                actual: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1, 0)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, 0)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, 0)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, 0)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64> {
        let offset = self.pos;
        let x = f32::from_le_bytes(self.take(4, 0)?.try_into().unwrap());
        if x.is_finite() {
            Ok(f64::from(x))
        } else {
            Err(CodecError::NonFinite { offset })
        }
    }
}

pub fn decode_header(bytes: &[u8]) -> Result<WireHeader> {
    read_header(&mut Reader { bytes, pos: 0 })
}

fn read_header(r: &mut Reader<'_>) -> Result<WireHeader> {
    let magic = r.take(4, 0).map_err(|_| CodecError::BadMagic {
        found: r.bytes[..r.bytes.len().min(4)].to_vec(),
    })?;
    if magic != WIRE_MAGIC {
        return Err(CodecError::BadMagic { found: magic.to_vec() });
    }
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(CodecError::UnsupportedVersion { version });
    }
    let kind = WireKind::from_byte(r.u8()?)?;
    let rank = r.u8()? as usize;
    let dims_offset = r.pos;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let d = r.u64()?;
        let d = usize::try_from(d).ok().filter(|&d| d > 0).ok_or_else(|| CodecError::InvalidShape {
            offset: dims_offset,
            reason: format!("dimension {d} is not a positive size"),
        })?;
        shape.push(d);
    }
    if rank == 0 {
        return Err(CodecError::InvalidShape {
            offset: 6,
            reason: "rank must be at least 1".into(),
        });
    }
    if kind == WireKind::Svd && rank != 2 {
        return Err(CodecError::InvalidShape {
            offset: 6,
            reason: format!("svd message needs a matrix shape, got rank {rank}"),
        });
    }
    if shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).is_none() {
        return Err(CodecError::InvalidShape {
            offset: dims_offset,
            reason: format!("shape {shape:?} overflows"),
        });
    }
    let atom_count = r.u32()?;
    let budget = r.f64()?;
    Ok(WireHeader {
        version,
        kind,
        shape,
        atom_count,
        budget,
    })
}

/// Inverse of [`encode`] and [`encode_dense`]. Dense messages decode to an
/// entry-wise gradient keeping every coordinate.
pub fn decode(bytes: &[u8]) -> Result<SparsifiedGradient> {
    let mut r = Reader { bytes, pos: 0 };
    let header = read_header(&mut r)?;
    let len: usize = header.shape.iter().product();
    let count = header.atom_count as usize;
    let expected = header.encoded_len() as u128 + count as u128 * header.record_len() as u128;
    let expected = usize::try_from(expected).unwrap_or(usize::MAX);
    if bytes.len() < expected {
        return Err(CodecError::Truncated {
            offset: bytes.len(),
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CodecError::TrailingBytes {
            offset: expected,
            extra: bytes.len() - expected,
        });
    }

    let mut kept_atoms = Vec::with_capacity(count);
    match header.kind {
        WireKind::Entrywise => {
            for _ in 0..count {
                let offset = r.pos;
                let index = r.u32()?;
                if index as usize >= len {
                    return Err(CodecError::IndexOutOfRange {
                        offset,
                        index: index.into(),
                        len,
                    });
                }
                let weight = r.f32()?;
                kept_atoms.push(KeptAtom {
                    atom: AtomDescriptor::StandardBasis(index as usize),
                    weight,
                });
            }
        }
        WireKind::Svd => {
            let (n, m) = (header.shape[0], header.shape[1]);
            for _ in 0..count {
                let weight = r.f32()?;
                let u = (0..n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
                let v = (0..m).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
                kept_atoms.push(KeptAtom {
                    atom: AtomDescriptor::RankOne { u, v },
                    weight,
                });
            }
        }
        WireKind::Dense => {
            if count != len {
                return Err(CodecError::InvalidShape {
                    offset: 7 + 8 * header.shape.len(),
                    reason: format!("dense message carries {count} values for {len} entries"),
                });
            }
            for i in 0..count {
                kept_atoms.push(KeptAtom {
                    atom: AtomDescriptor::StandardBasis(i),
                    weight: r.f32()?,
                });
            }
        }
    }
    Ok(SparsifiedGradient {
        decomposition_kind: match header.kind {
            WireKind::Svd => DecompositionKind::Svd,
            _ => DecompositionKind::Entrywise,
        },
        kept_atoms,
        original_shape: header.shape,
        budget_used: header.budget,
    })
}
