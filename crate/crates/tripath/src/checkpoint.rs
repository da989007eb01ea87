//! Binary checkpoints: `TPN1` for joint networks, `RBM1` for pretrained
//! stacks. All integers are u32 and all reals f64, little-endian.
//!
//! `TPN1`: magic, pathway count (3), layer count per pathway, then
//! `(inputs, outputs)` of every layer in encoder, image-decoder,
//! label-decoder order, then the flat parameter vector, then λ.
//!
//! `RBM1`: magic, layer count, `(visible, hidden)` per layer, then per
//! layer the weights row-major, the visible bias and the hidden bias.

use std::fs;
use std::path::Path;

use tripath_core::network::{Model, NetShape, TriPathNet};
use tripath_core::rbm::Rbm;
use tripath_core::Matrix;

use crate::error::{CliError, Result};

pub const NET_MAGIC: &[u8; 4] = b"TPN1";
pub const STACK_MAGIC: &[u8; 4] = b"RBM1";
const PATHWAYS: u32 = 3;

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                format!(
                    "truncated at byte {}: wanted {n} more, {} left",
                    self.at,
                    self.bytes.len() - self.at
                )
            })?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("size overflow")?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<(), String> {
        let got = self.take(4)?;
        if got != want {
            return Err(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(want)
            ));
        }
        Ok(())
    }

    fn finish(self) -> Result<(), String> {
        if self.at != self.bytes.len() {
            return Err(format!("{} trailing bytes", self.bytes.len() - self.at));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("dimension fits in u32").to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_net(net: &TriPathNet) -> Vec<u8> {
    let shape = net.shape();
    let mut out = NET_MAGIC.to_vec();
    put_u32(&mut out, PATHWAYS as usize);
    let pathways = [&shape.encoder, &shape.decoder_img, &shape.decoder_lab];
    for p in pathways {
        put_u32(&mut out, p.len());
    }
    for &(i, o) in pathways.into_iter().flatten() {
        put_u32(&mut out, i);
        put_u32(&mut out, o);
    }
    put_f64s(&mut out, &net.flatten());
    put_f64s(&mut out, &[net.lambda()]);
    out
}

pub fn decode_net(bytes: &[u8]) -> Result<TriPathNet, String> {
    let mut r = Reader { bytes, at: 0 };
    r.magic(NET_MAGIC)?;
    let pathways = r.u32()?;
    if pathways != PATHWAYS as usize {
        return Err(format!("{pathways} pathways, expected {PATHWAYS}"));
    }
    let counts = [r.u32()?, r.u32()?, r.u32()?];
    let mut dims = Vec::with_capacity(3);
    for count in counts {
        let layers: Vec<(usize, usize)> = (0..count)
            .map(|_| Ok((r.u32()?, r.u32()?)))
            .collect::<Result<_, String>>()?;
        dims.push(layers);
    }
    let mut dims = dims.into_iter();
    let mut shape = NetShape {
        encoder: dims.next().unwrap(),
        decoder_img: dims.next().unwrap(),
        decoder_lab: dims.next().unwrap(),
        lambda: 0.0,
    };
    let params = r.f64s(shape.num_params())?;
    shape.lambda = r.f64s(1)?[0];
    r.finish()?;
    shape.unflatten(&params).map_err(|e| e.to_string())
}

pub fn encode_stack(rbms: &[Rbm]) -> Vec<u8> {
    let mut out = STACK_MAGIC.to_vec();
    put_u32(&mut out, rbms.len());
    for rbm in rbms {
        put_u32(&mut out, rbm.visible());
        put_u32(&mut out, rbm.hidden());
    }
    for rbm in rbms {
        put_f64s(&mut out, rbm.w.as_slice());
        put_f64s(&mut out, rbm.b_vis.as_slice());
        put_f64s(&mut out, rbm.b_hid.as_slice());
    }
    out
}

pub fn decode_stack(bytes: &[u8]) -> Result<Vec<Rbm>, String> {
    let mut r = Reader { bytes, at: 0 };
    r.magic(STACK_MAGIC)?;
    let n = r.u32()?;
    let dims: Vec<(usize, usize)> = (0..n)
        .map(|_| Ok((r.u32()?, r.u32()?)))
        .collect::<Result<_, String>>()?;
    let mut rbms = Vec::with_capacity(n);
    for (v, h) in dims {
        let matrix = |r: &mut Reader, rows, cols| -> Result<Matrix, String> {
            Matrix::new(rows, cols, r.f64s(rows * cols)?).map_err(|e| e.to_string())
        };
        let w = matrix(&mut r, v, h)?;
        let b_vis = matrix(&mut r, 1, v)?;
        let b_hid = matrix(&mut r, 1, h)?;
        rbms.push(Rbm::new(w, b_vis, b_hid).map_err(|e| e.to_string())?);
    }
    r.finish()?;
    Ok(rbms)
}

pub fn save_net(path: impl AsRef<Path>, net: &TriPathNet) -> Result<()> {
    fs::write(&path, encode_net(net)).map_err(|e| CliError::io(path, e))
}

pub fn load_net(path: impl AsRef<Path>) -> Result<TriPathNet> {
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    decode_net(&bytes).map_err(|m| CliError::format(path, m))
}

pub fn save_stack(path: impl AsRef<Path>, rbms: &[Rbm]) -> Result<()> {
    fs::write(&path, encode_stack(rbms)).map_err(|e| CliError::io(path, e))
}

pub fn load_stack(path: impl AsRef<Path>) -> Result<Vec<Rbm>> {
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    decode_stack(&bytes).map_err(|m| CliError::format(path, m))
}
