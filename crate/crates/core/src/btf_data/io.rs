//! `BTFD` container, little-endian:
//!
//! ```text
//! "BTFD" | u32 version=1 | u32 width | u32 height | u32 N | u8 scalar_type
//! | 3 reserved bytes | N x 6 f32 (wi.xyz, wo.xyz) | payload [pair][row][col][rgb]
//! ```
//!
//! `scalar_type` is 0 for f32 and 1 for f16 payloads. Directions are always f32.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use half::f16;
use nalgebra::Vector3;

use super::{BtfDataset, DirectionPair};
use crate::error::{Error, Result};

pub const BTF_MAGIC: &[u8; 4] = b"BTFD";
pub const BTF_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 * 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    F32 = 0,
    F16 = 1,
}

impl ScalarType {
    fn size(self) -> usize {
        match self {
            ScalarType::F32 => 4,
            ScalarType::F16 => 2,
        }
    }
}

pub fn save_btf(dataset: &BtfDataset, path: impl AsRef<Path>) -> Result<()> {
    save_btf_as(dataset, path, ScalarType::F32)
}

pub fn save_btf_as(dataset: &BtfDataset, path: impl AsRef<Path>, scalar: ScalarType) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(dataset, scalar);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_btf(path: impl AsRef<Path>) -> Result<BtfDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode(dataset: &BtfDataset, scalar: ScalarType) -> Vec<u8> {
    let n = dataset.num_pairs();
    let mut out = Vec::with_capacity(HEADER_LEN + n * 24 + dataset.data().len() * scalar.size());
    out.extend_from_slice(BTF_MAGIC);
    for v in [BTF_VERSION, dataset.width() as u32, dataset.height() as u32, n as u32] {
        out.write_u32::<LittleEndian>(v).unwrap();
    }
    out.write_u8(scalar as u8).unwrap();
    out.write_all(&[0u8; 3]).unwrap();
    for pair in dataset.pairs() {
        for c in pair.wi().iter().chain(pair.wo().iter()) {
            out.write_f32::<LittleEndian>(*c as f32).unwrap();
        }
    }
    match scalar {
        ScalarType::F32 => {
            for v in dataset.data() {
                out.write_f32::<LittleEndian>(*v).unwrap();
            }
        }
        ScalarType::F16 => {
            for v in dataset.data() {
                out.write_u16::<LittleEndian>(f16::from_f32(*v).to_bits()).unwrap();
            }
        }
    }
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Result<BtfDataset> {
    if bytes.len() < 4 || &bytes[..4] != BTF_MAGIC {
        return Err(Error::Format("missing BTFD magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corruption("truncated header".into()));
    }
    let mut cur = Cursor::new(&bytes[4..]);
    let read_u32 = |cur: &mut Cursor<&[u8]>| cur.read_u32::<LittleEndian>().unwrap();
    let version = read_u32(&mut cur);
    if version != BTF_VERSION {
        return Err(Error::Version {
            found: version,
            expected: BTF_VERSION,
        });
    }
    let width = read_u32(&mut cur) as usize;
    let height = read_u32(&mut cur) as usize;
    let n = read_u32(&mut cur) as usize;
    let scalar = match cur.read_u8().unwrap() {
        0 => ScalarType::F32,
        1 => ScalarType::F16,
        other => return Err(Error::Format(format!("unknown scalar type {other}"))),
    };
    let mut reserved = [0u8; 3];
    cur.read_exact(&mut reserved).unwrap();

    let values = n
        .checked_mul(width)
        .and_then(|v| v.checked_mul(height))
        .and_then(|v| v.checked_mul(3))
        .ok_or_else(|| Error::Corruption("header dimensions overflow".into()))?;
    let expected = HEADER_LEN + n * 24 + values * scalar.size();
    if bytes.len() != expected {
        return Err(Error::Corruption(format!(
            "expected {expected} bytes for {n} pairs of {width}x{height}, found {}",
            bytes.len()
        )));
    }

    let mut cur = Cursor::new(&bytes[HEADER_LEN..]);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut c = [0f64; 6];
        for v in &mut c {
            *v = cur.read_f32::<LittleEndian>().unwrap() as f64;
        }
        let pair = DirectionPair::new(Vector3::new(c[0], c[1], c[2]), Vector3::new(c[3], c[4], c[5]))
            .map_err(|e| Error::Corruption(format!("direction table: {e}")))?;
        pairs.push(pair);
    }
    let mut data = vec![0f32; values];
    match scalar {
        ScalarType::F32 => cur.read_f32_into::<LittleEndian>(&mut data).unwrap(),
        ScalarType::F16 => {
            for v in &mut data {
                *v = f16::from_bits(cur.read_u16::<LittleEndian>().unwrap()).to_f32();
            }
        }
    }
    BtfDataset::new(width, height, pairs, data).map_err(|e| Error::Corruption(e.to_string()))
}
