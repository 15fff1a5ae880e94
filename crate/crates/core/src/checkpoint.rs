//! `TPLN` checkpoint container.
//!
//! All fields little-endian:
//!
//! ```text
//! "TPLN" | u32 version
//! 3 x plane header (U, H, D): u32 width | u32 height | u32 channels | u8 wrap_u | u8 wrap_v | 2 reserved
//! decoder header: u32 n_dims | n_dims x u32 | f64 leaky_slope | u8 output_activation | u8 fold_phi_d | 2 reserved
//! f32 tensors: U, H, D, then weight (row-major out x in) and bias of each layer
//! optional blocks until EOF: 4-byte tag | u64 payload length | payload
//! ```
//!
//! Blocks: `GLUT` Gaussianized positional plane and its tables, `QPLN`
//! quilted positional plane, `ADAM` optimizer state for resuming training.
//! Unknown tags are skipped.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::neural::{AddressMode, AdamWState, FeaturePlane, Layer, MlpParams, TriplePlaneModel};
use crate::synthesis::{ChannelLut, GaussianizedExemplar};

pub const MAGIC: &[u8; 4] = b"TPLN";
pub const VERSION: u32 = 1;

/// Optimizer progress stored alongside a model for resuming.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub epochs_done: u32,
    pub optimizer: AdamWState<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TriplePlaneModel<f32>,
    pub gaussianized: Option<GaussianizedExemplar>,
    pub quilted: Option<FeaturePlane<f32>>,
    pub train_state: Option<TrainState>,
}

impl Checkpoint {
    pub fn new(model: TriplePlaneModel<f32>) -> Self {
        Checkpoint {
            model,
            gaussianized: None,
            quilted: None,
            train_state: None,
        }
    }
}

fn wrap_byte(m: AddressMode) -> u8 {
    match m {
        AddressMode::Wrap => 0,
        AddressMode::Clamp => 1,
    }
}

fn wrap_from(b: u8) -> Result<AddressMode> {
    match b {
        0 => Ok(AddressMode::Wrap),
        1 => Ok(AddressMode::Clamp),
        _ => Err(Error::Format(format!("unknown addressing mode {b}"))),
    }
}

fn put_plane_header(out: &mut Vec<u8>, p: &FeaturePlane<f32>) {
    for v in [p.width(), p.height(), p.channels()] {
        out.write_u32::<LE>(v as u32).unwrap();
    }
    out.extend_from_slice(&[wrap_byte(p.wrap_u), wrap_byte(p.wrap_v), 0, 0]);
}

fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    out.reserve(v.len() * 4);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_plane(out: &mut Vec<u8>, p: &FeaturePlane<f32>) {
    put_plane_header(out, p);
    put_f32s(out, p.data());
}

fn put_block(out: &mut Vec<u8>, tag: &[u8; 4], payload: Vec<u8>) {
    out.extend_from_slice(tag);
    out.write_u64::<LE>(payload.len() as u64).unwrap();
    out.extend_from_slice(&payload);
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let m = &ckpt.model;
    let mut out = Vec::with_capacity(64 + 4 * m.tensors().iter().map(|t| t.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.write_u32::<LE>(VERSION).unwrap();
    for p in [&m.plane_u, &m.plane_h, &m.plane_d] {
        put_plane_header(&mut out, p);
    }
    let dims = m.mlp.dims();
    out.write_u32::<LE>(dims.len() as u32).unwrap();
    for d in &dims {
        out.write_u32::<LE>(*d as u32).unwrap();
    }
    out.write_f64::<LE>(m.mlp.leaky_slope).unwrap();
    out.extend_from_slice(&[m.mlp.output_activation as u8, m.fold_phi_d as u8, 0, 0]);
    for t in m.tensors() {
        put_f32s(&mut out, t);
    }

    if let Some(g) = &ckpt.gaussianized {
        let mut b = Vec::new();
        let lut_size = g.luts.first().map_or(0, |l| l.forward.len());
        b.write_u32::<LE>(lut_size as u32).unwrap();
        put_plane(&mut b, &g.gauss_plane);
        for l in &g.luts {
            put_f32s(&mut b, &[l.value_min, l.value_max, l.gauss_bound]);
            put_f32s(&mut b, &l.forward);
            put_f32s(&mut b, &l.inverse);
        }
        put_block(&mut out, b"GLUT", b);
    }
    if let Some(q) = &ckpt.quilted {
        let mut b = Vec::new();
        put_plane(&mut b, q);
        put_block(&mut out, b"QPLN", b);
    }
    if let Some(s) = &ckpt.train_state {
        let o = &s.optimizer;
        let mut b = Vec::new();
        b.write_u32::<LE>(s.epochs_done).unwrap();
        b.write_u64::<LE>(o.step).unwrap();
        for v in [o.beta1, o.beta2, o.eps] {
            b.write_f64::<LE>(v).unwrap();
        }
        b.write_u32::<LE>(o.first_moment.len() as u32).unwrap();
        for (m1, m2) in o.first_moment.iter().zip(&o.second_moment) {
            b.write_u64::<LE>(m1.len() as u64).unwrap();
            put_f32s(&mut b, m1);
            put_f32s(&mut b, m2);
        }
        put_block(&mut out, b"ADAM", b);
    }
    out
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

fn truncated<E>(_: E) -> Error {
    Error::Corruption("checkpoint ends early".into())
}

impl<'a> Reader<'a> {
    fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(truncated)
    }

    fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LE>().map_err(truncated)
    }

    fn u64(&mut self) -> Result<u64> {
        self.cur.read_u64::<LE>().map_err(truncated)
    }

    fn f64(&mut self) -> Result<f64> {
        self.cur.read_f64::<LE>().map_err(truncated)
    }

    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        if n.checked_mul(4).is_none_or(|b| b > self.remaining()) {
            return Err(Error::Corruption(format!("checkpoint tensor of {n} values runs past the end")));
        }
        let mut v = vec![0.0f32; n];
        self.cur.read_f32_into::<LE>(&mut v).map_err(truncated)?;
        Ok(v)
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Corruption("checkpoint block runs past the end".into()));
        }
        let start = self.cur.position() as usize;
        self.cur.set_position((start + n) as u64);
        Ok(&self.cur.get_ref()[start..start + n])
    }

    fn plane_header(&mut self) -> Result<(usize, usize, usize, AddressMode, AddressMode)> {
        let (w, h, c) = (self.u32()? as usize, self.u32()? as usize, self.u32()? as usize);
        let (wu, wv) = (wrap_from(self.u8()?)?, wrap_from(self.u8()?)?);
        self.u8()?;
        self.u8()?;
        if w == 0 || h == 0 || c == 0 {
            return Err(Error::Format("plane with a zero dimension".into()));
        }
        Ok((w, h, c, wu, wv))
    }

    fn plane_data(&mut self, header: (usize, usize, usize, AddressMode, AddressMode)) -> Result<FeaturePlane<f32>> {
        let (w, h, c, wu, wv) = header;
        let n = w
            .checked_mul(h)
            .and_then(|x| x.checked_mul(c))
            .ok_or_else(|| Error::Format("plane dimensions overflow".into()))?;
        let data = self.f32s(n)?;
        FeaturePlane::from_data(w, h, c, wu, wv, data).map_err(|e| Error::Corruption(e.to_string()))
    }

    fn plane(&mut self) -> Result<FeaturePlane<f32>> {
        let header = self.plane_header()?;
        self.plane_data(header)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a TPLN checkpoint (bad magic)".into()));
    }
    let mut r = Reader {
        cur: Cursor::new(bytes),
    };
    r.cur.set_position(4);
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let headers = [r.plane_header()?, r.plane_header()?, r.plane_header()?];
    let n_dims = r.u32()? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(Error::Format(format!("decoder with {n_dims} layer widths")));
    }
    let dims = (0..n_dims).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    if dims.iter().any(|d| *d == 0) {
        return Err(Error::Format("decoder layer of width zero".into()));
    }
    let slope = r.f64()?;
    let output_activation = r.u8()? != 0;
    let fold_phi_d = r.u8()? != 0;
    r.u8()?;
    r.u8()?;

    let plane_u = r.plane_data(headers[0])?;
    let plane_h = r.plane_data(headers[1])?;
    let plane_d = r.plane_data(headers[2])?;
    let mut layers = Vec::with_capacity(n_dims - 1);
    for w in dims.windows(2) {
        let weight = r.f32s(w[0] * w[1])?;
        let bias = r.f32s(w[1])?;
        layers.push(Layer {
            inputs: w[0],
            outputs: w[1],
            weight,
            bias,
        });
    }
    let mlp = MlpParams {
        layers,
        leaky_slope: slope,
        output_activation,
    };
    let model = TriplePlaneModel::from_parts(plane_u, plane_h, plane_d, mlp, fold_phi_d)
        .map_err(|e| Error::Format(e.to_string()))?;
    if !model.all_finite() {
        return Err(Error::Corruption("checkpoint holds non-finite parameters".into()));
    }

    let mut ckpt = Checkpoint::new(model);
    while r.remaining() > 0 {
        let tag: [u8; 4] = r.bytes(4)?.try_into().unwrap();
        let len = r.u64()? as usize;
        let payload = r.bytes(len)?;
        let mut b = Reader {
            cur: Cursor::new(payload),
        };
        match &tag {
            b"GLUT" => {
                let lut_size = b.u32()? as usize;
                let gauss_plane = b.plane()?;
                let mut luts = Vec::with_capacity(gauss_plane.channels());
                for _ in 0..gauss_plane.channels() {
                    let head = b.f32s(3)?;
                    luts.push(ChannelLut {
                        value_min: head[0],
                        value_max: head[1],
                        gauss_bound: head[2],
                        forward: b.f32s(lut_size)?,
                        inverse: b.f32s(lut_size)?,
                    });
                }
                ckpt.gaussianized = Some(GaussianizedExemplar::new(gauss_plane, luts));
            }
            b"QPLN" => ckpt.quilted = Some(b.plane()?),
            b"ADAM" => {
                let epochs_done = b.u32()?;
                let step = b.u64()?;
                let (beta1, beta2, eps) = (b.f64()?, b.f64()?, b.f64()?);
                let n = b.u32()? as usize;
                let mut first_moment = Vec::with_capacity(n.min(1024));
                let mut second_moment = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    let len = b.u64()? as usize;
                    first_moment.push(b.f32s(len)?);
                    second_moment.push(b.f32s(len)?);
                }
                ckpt.train_state = Some(TrainState {
                    epochs_done,
                    optimizer: AdamWState {
                        first_moment,
                        second_moment,
                        step,
                        beta1,
                        beta2,
                        eps,
                    },
                });
            }
            _ => continue,
        }
        if b.remaining() != 0 {
            return Err(Error::Corruption(format!(
                "block {} has trailing bytes",
                String::from_utf8_lossy(&tag)
            )));
        }
    }
    Ok(ckpt)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ModelConfig;
    use crate::synthesis::build_gaussianization;

    fn small_model(seed: u64) -> TriplePlaneModel<f32> {
        let c = ModelConfig {
            positional: crate::neural::PlaneDims::new(6, 5, 4),
            half: crate::neural::PlaneDims::new(3, 4, 2),
            diff: crate::neural::PlaneDims::new(4, 3, 2),
            hidden: 5,
            hidden_layers: 2,
            ..ModelConfig::default()
        };
        TriplePlaneModel::new(&c, seed).unwrap()
    }

    #[test]
    fn model_only_round_trip() {
        let ck = Checkpoint::new(small_model(1));
        assert_eq!(decode(&encode(&ck)).unwrap(), ck);
    }

    #[test]
    fn all_blocks_round_trip() {
        let model = small_model(2);
        let g = build_gaussianization(&model.plane_u);
        let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        let mut opt = AdamWState::new(&shapes);
        opt.step = 17;
        opt.first_moment[0][1] = 0.25;
        opt.second_moment[4][0] = 3.5;
        let ck = Checkpoint {
            quilted: Some(model.plane_u.clone()),
            gaussianized: Some(g),
            train_state: Some(TrainState {
                epochs_done: 3,
                optimizer: opt,
            }),
            model,
        };
        let bytes = encode(&ck);
        assert_eq!(decode(&bytes).unwrap(), ck);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tpln");
        save_checkpoint(&ck, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode(&Checkpoint::new(small_model(3)));
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(Error::Version { found: 9, .. })));
    }

    #[test]
    fn truncation_is_corruption() {
        let bytes = encode(&Checkpoint::new(small_model(4)));
        for cut in [20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Corruption(_))), "cut {cut}");
        }
    }

    #[test]
    fn unknown_blocks_are_skipped() {
        let ck = Checkpoint::new(small_model(5));
        let mut bytes = encode(&ck);
        put_block(&mut bytes, b"XTRA", vec![1, 2, 3]);
        assert_eq!(decode(&bytes).unwrap(), ck);
    }

    #[test]
    fn default_plane_payload_in_file() {
        let m = TriplePlaneModel::<f32>::new(&ModelConfig::default(), 0).unwrap();
        let bytes = encode(&Checkpoint::new(m.clone()));
        let header = 8 + 3 * 16 + 4 + 5 * 4 + 8 + 4;
        let mlp = 4 * m.mlp.num_params();
        assert_eq!(bytes.len() - header - mlp, 10_265_600);
    }
}
