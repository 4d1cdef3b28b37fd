//! IDX array files (big-endian headers), as used by the MNIST digit sets.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

const UBYTE: u8 = 0x08;

/// `count` images of `rows × cols` unsigned bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.pixels.len() / (self.rows * self.cols)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn read_header<R: Read>(r: &mut R, dims: u8) -> std::io::Result<Result<Vec<usize>, String>> {
    let magic = r.read_u32::<BigEndian>()?;
    let (zero, ty, nd) = ((magic >> 16) as u16, (magic >> 8) as u8, magic as u8);
    if zero != 0 || ty != UBYTE || nd != dims {
        return Ok(Err(format!("bad magic 0x{magic:08x}: expected unsigned bytes with {dims} dimensions")));
    }
    let mut sizes = Vec::with_capacity(dims as usize);
    for _ in 0..dims {
        sizes.push(r.read_u32::<BigEndian>()? as usize);
    }
    Ok(Ok(sizes))
}

fn parse(path: &Path, bytes: &[u8], dims: u8) -> Result<(Vec<usize>, Vec<u8>)> {
    let mut cur = std::io::Cursor::new(bytes);
    let sizes = read_header(&mut cur, dims)
        .map_err(|_| Error::format(path, "truncated header"))?
        .map_err(|m| Error::format(path, m))?;
    let body = &bytes[cur.position() as usize..];
    let expect: usize = sizes.iter().product();
    if body.len() != expect {
        return Err(Error::format(path, format!("header promises {expect} bytes of data, file has {}", body.len())));
    }
    Ok((sizes, body.to_vec()))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let (sizes, pixels) = parse(path, &read_file(path)?, 3)?;
    Ok(IdxImages { rows: sizes[1], cols: sizes[2], pixels })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    Ok(parse(path, &read_file(path)?, 1)?.1)
}

pub fn write_idx_images<W: Write>(mut w: W, images: &IdxImages) -> std::io::Result<()> {
    w.write_u32::<BigEndian>(u32::from(UBYTE) << 8 | 3)?;
    for v in [images.len(), images.rows, images.cols] {
        w.write_u32::<BigEndian>(v as u32)?;
    }
    w.write_all(&images.pixels)
}

pub fn write_idx_labels<W: Write>(mut w: W, labels: &[u8]) -> std::io::Result<()> {
    w.write_u32::<BigEndian>(u32::from(UBYTE) << 8 | 1)?;
    w.write_u32::<BigEndian>(labels.len() as u32)?;
    w.write_all(labels)
}
