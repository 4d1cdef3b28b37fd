//! Checkpoint files: parameters, delays and optimizer state.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic        8 bytes  "DLYCKPT\0"
//! version      u32      currently 1
//! n_in n_hidden n_out   u32 ×3
//! reset_mode   u8       0 soft subtract, 1 hard zero
//! tau_rec tau_out u_th  f64 ×3
//! w_in w_rec w_out      f64, row-major
//! dt_ms        f64
//! delays_ms    n_hidden f64
//! opt_kind     u8       0 madgrad, 1 sgd
//! lr momentum eps       f64 ×3
//! k            u64
//! s nu x0      3 × len f64, len = total parameter count
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::NetworkParams;
use crate::neuron::ResetMode;
use crate::topology::DelaySchedule;
use crate::training::{OptimizerConfig, OptimizerKind, OptimizerState};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DLYCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub delays: DelaySchedule,
    pub reset_mode: ResetMode,
    pub optimizer: OptimizerState,
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    v.iter().try_for_each(|&x| w.write_f64::<LittleEndian>(x))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut v)?;
    Ok(v)
}

pub fn write_checkpoint<W: Write>(mut w: W, c: &Checkpoint) -> std::io::Result<()> {
    let p = &c.params;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    for d in [p.n_in(), p.n_hidden(), p.n_out()] {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    w.write_u8(match c.reset_mode {
        ResetMode::SoftSubtract => 0,
        ResetMode::HardZero => 1,
    })?;
    write_f64s(&mut w, &[p.tau_rec, p.tau_out, p.u_th])?;
    for m in [&p.w_in, &p.w_rec, &p.w_out] {
        write_f64s(&mut w, m.as_slice())?;
    }
    w.write_f64::<LittleEndian>(c.delays.dt_ms)?;
    write_f64s(&mut w, &c.delays.delays_ms)?;
    let o = &c.optimizer;
    w.write_u8(match o.config.kind {
        OptimizerKind::Madgrad => 0,
        OptimizerKind::Sgd => 1,
    })?;
    write_f64s(&mut w, &[o.config.lr, o.config.momentum, o.config.eps])?;
    w.write_u64::<LittleEndian>(o.k)?;
    for v in [&o.s, &o.nu, &o.x0] {
        write_f64s(&mut w, v)?;
    }
    Ok(())
}

fn read_inner<R: Read>(r: &mut R) -> std::io::Result<std::result::Result<Checkpoint, String>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Ok(Err("not a checkpoint file (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Ok(Err(format!("unsupported checkpoint version {version}")));
    }
    let n_in = r.read_u32::<LittleEndian>()? as usize;
    let h = r.read_u32::<LittleEndian>()? as usize;
    let n_out = r.read_u32::<LittleEndian>()? as usize;
    let reset_mode = match r.read_u8()? {
        0 => ResetMode::SoftSubtract,
        1 => ResetMode::HardZero,
        b => return Ok(Err(format!("unknown reset mode {b}"))),
    };
    let scalars = read_f64s(r, 3)?;
    let w_in = Matrix::from_vec(h, n_in, read_f64s(r, h * n_in)?);
    let w_rec = Matrix::from_vec(h, h, read_f64s(r, h * h)?);
    let w_out = Matrix::from_vec(n_out, h, read_f64s(r, n_out * h)?);
    let params = NetworkParams { w_in, w_rec, w_out, tau_rec: scalars[0], tau_out: scalars[1], u_th: scalars[2] };
    let dt = r.read_f64::<LittleEndian>()?;
    let delays_ms = read_f64s(r, h)?;
    let kind = match r.read_u8()? {
        0 => OptimizerKind::Madgrad,
        1 => OptimizerKind::Sgd,
        b => return Ok(Err(format!("unknown optimizer kind {b}"))),
    };
    let hyper = read_f64s(r, 3)?;
    let k = r.read_u64::<LittleEndian>()?;
    let len = params.len_flat();
    let (s, nu, x0) = (read_f64s(r, len)?, read_f64s(r, len)?, read_f64s(r, len)?);
    let delays = match DelaySchedule::from_ms(delays_ms, dt) {
        Ok(d) => d,
        Err(e) => return Ok(Err(e.to_string())),
    };
    if let Err(e) = params.validate() {
        return Ok(Err(e.to_string()));
    }
    let config = OptimizerConfig { kind, lr: hyper[0], momentum: hyper[1], eps: hyper[2] };
    Ok(Ok(Checkpoint { params, delays, reset_mode, optimizer: OptimizerState { config, s, nu, x0, k } }))
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, c).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    match read_inner(&mut BufReader::new(f)) {
        Ok(Ok(c)) => Ok(c),
        Ok(Err(m)) => Err(Error::format(path, m)),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::format(path, "truncated checkpoint")),
        Err(e) => Err(Error::io(path, e)),
    }
}
