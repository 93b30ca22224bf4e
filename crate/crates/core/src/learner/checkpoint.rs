//! Checkpoint layout (little-endian):
//! magic "RGPTQNET", u16 version, u16 architecture id, u16 G, u16 R,
//! u16 scalar bytes (4 or 8), u16 layer count, per layer five u16
//! (in, out, kernel, dilation, relu), u64 parameter count, the parameters,
//! then a CRC32 of everything before it.

use std::fs;
use std::path::Path;

use super::{cast, Architecture, ConvQNet, LayerSpec, LearnerError, Scalar};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RGPTQNET";
pub const CHECKPOINT_VERSION: u16 = 1;

fn put16(buf: &mut Vec<u8>, v: usize) -> Result<(), LearnerError> {
    let v = u16::try_from(v).map_err(|_| LearnerError::Shape(format!("{v} does not fit the checkpoint header")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn write_checkpoint<T: Scalar>(net: &ConvQNet<T>) -> Result<Vec<u8>, LearnerError> {
    let width = std::mem::size_of::<T>();
    if width != 4 && width != 8 {
        return Err(LearnerError::Shape(format!("unsupported scalar width {width}")));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&net.arch.id().to_le_bytes());
    put16(&mut buf, super::QModel::grid(net))?;
    put16(&mut buf, super::QModel::rotations(net))?;
    put16(&mut buf, width)?;
    put16(&mut buf, net.layers().len())?;
    for l in net.layers() {
        for v in [l.in_c, l.out_c, l.kernel, l.dilation, usize::from(l.relu)] {
            put16(&mut buf, v)?;
        }
    }
    buf.extend_from_slice(&(net.params().len() as u64).to_le_bytes());
    for p in net.params() {
        let v = p.to_f64().expect("finite scalar");
        if width == 4 {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        } else {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LearnerError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| LearnerError::Corrupt("truncated checkpoint".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<usize, LearnerError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize)
    }
}

pub fn read_checkpoint<T: Scalar>(data: &[u8]) -> Result<ConvQNet<T>, LearnerError> {
    if data.len() < 12 || &data[..8] != CHECKPOINT_MAGIC {
        return Err(LearnerError::Corrupt("bad magic".into()));
    }
    let (body, tail) = data.split_at(data.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
        return Err(LearnerError::Corrupt("checksum mismatch".into()));
    }
    let mut r = Reader { data: body, pos: 8 };
    let version = r.u16()? as u16;
    if version != CHECKPOINT_VERSION {
        return Err(LearnerError::VersionMismatch { found: version });
    }
    let arch = Architecture::from_id(r.u16()? as u16).ok_or_else(|| LearnerError::Corrupt("unknown architecture".into()))?;
    let (g, rot, width, n_layers) = (r.u16()?, r.u16()?, r.u16()?, r.u16()?);
    if width != std::mem::size_of::<T>() {
        return Err(LearnerError::Shape(format!("checkpoint stores {width}-byte scalars")));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let v = [r.u16()?, r.u16()?, r.u16()?, r.u16()?, r.u16()?];
        layers.push(LayerSpec { in_c: v[0], out_c: v[1], kernel: v[2], dilation: v[3], relu: v[4] != 0 });
    }
    let valid = !layers.is_empty()
        && layers[0].in_c == super::INPUT_CHANNELS
        && layers.last().map(|l| l.out_c) == Some(rot)
        && layers.windows(2).all(|w| w[0].out_c == w[1].in_c)
        && layers.iter().all(|l| l.kernel % 2 == 1 && l.dilation >= 1);
    if !valid || g == 0 {
        return Err(LearnerError::Corrupt("inconsistent layer table".into()));
    }
    let mut net = ConvQNet::<T>::zeroed(arch, g, rot, layers);
    let count = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
    if count != net.params().len() || body.len() - r.pos != count * width {
        return Err(LearnerError::Corrupt("parameter count does not match the layers".into()));
    }
    let raw = r.take(count * width)?;
    for (p, chunk) in net.params_mut().iter_mut().zip(raw.chunks_exact(width)) {
        *p = if width == 4 {
            cast(f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes"))))
        } else {
            cast(f64::from_le_bytes(chunk.try_into().expect("8 bytes")))
        };
    }
    Ok(net)
}

pub fn save_checkpoint<T: Scalar>(net: &ConvQNet<T>, path: &Path) -> Result<(), LearnerError> {
    fs::write(path, write_checkpoint(net)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ConvQNet<T>, LearnerError> {
    read_checkpoint(&fs::read(path)?)
}
