//! Episode files and generated datasets.
//!
//! Episode file, little-endian:
//!
//! ```text
//! magic     8 bytes  "DLYEPI01"
//! steps     u32
//! channels  u32
//! dt_ms     f64
//! label     u32      0 left, 1 right
//! window    u32 u32  recall window start, end (exclusive)
//! wait_ms   f64
//! n_cues    u32
//! cues      n_cues bytes, 0 left, 1 right
//! spikes    steps × channels bytes, row-major, each 0 or 1
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::cue::{generate_cue_sample, CueSample, CueTaskConfig, Side};
use crate::error::{Error, Result};
use crate::network::write_raster_csv;
use crate::seed::derive_indexed;
use crate::spikes::SpikeTrain;

pub const EPISODE_MAGIC: &[u8; 8] = b"DLYEPI01";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

pub fn write_episode<W: Write>(mut w: W, s: &CueSample) -> std::io::Result<()> {
    w.write_all(EPISODE_MAGIC)?;
    w.write_u32::<LittleEndian>(s.spikes.steps() as u32)?;
    w.write_u32::<LittleEndian>(s.spikes.channels() as u32)?;
    w.write_f64::<LittleEndian>(s.spikes.dt_ms())?;
    w.write_u32::<LittleEndian>(s.label.class() as u32)?;
    w.write_u32::<LittleEndian>(s.recall_window.start as u32)?;
    w.write_u32::<LittleEndian>(s.recall_window.end as u32)?;
    w.write_f64::<LittleEndian>(s.wait_ms)?;
    w.write_u32::<LittleEndian>(s.cue_sequence.len() as u32)?;
    for c in &s.cue_sequence {
        w.write_u8(c.class() as u8)?;
    }
    w.write_all(s.spikes.as_slice())
}

fn side(b: u32) -> std::result::Result<Side, String> {
    Side::from_class(b as usize).ok_or_else(|| format!("side code {b} is neither 0 nor 1"))
}

fn read_inner<R: Read>(r: &mut R) -> std::io::Result<std::result::Result<CueSample, String>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != EPISODE_MAGIC {
        return Ok(Err("not an episode file (bad magic)".into()));
    }
    let steps = r.read_u32::<LittleEndian>()? as usize;
    let channels = r.read_u32::<LittleEndian>()? as usize;
    let dt = r.read_f64::<LittleEndian>()?;
    let label = r.read_u32::<LittleEndian>()?;
    let (ws, we) = (r.read_u32::<LittleEndian>()? as usize, r.read_u32::<LittleEndian>()? as usize);
    let wait_ms = r.read_f64::<LittleEndian>()?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut cues = vec![0u8; n];
    r.read_exact(&mut cues)?;
    let mut data = vec![0u8; steps * channels];
    r.read_exact(&mut data)?;
    let parsed = (|| {
        let label = side(label)?;
        let cue_sequence = cues.iter().map(|&c| side(u32::from(c))).collect::<std::result::Result<Vec<_>, _>>()?;
        if ws >= we || we > steps {
            return Err(format!("recall window {ws}..{we} outside 0..{steps}"));
        }
        let spikes = SpikeTrain::from_raw(steps, channels, dt, data).map_err(|e| e.to_string())?;
        if !spikes.is_binary() {
            return Err("spike bytes must be 0 or 1".into());
        }
        Ok(CueSample { spikes, label, cue_sequence, wait_ms, recall_window: ws..we })
    })();
    Ok(parsed)
}

pub fn read_episode(path: &Path) -> Result<CueSample> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    match read_inner(&mut r) {
        Ok(Ok(s)) => Ok(s),
        Ok(Err(m)) => Err(Error::format(path, m)),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::format(path, "truncated episode file")),
        Err(e) => Err(Error::io(path, e)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub seed: u64,
    pub label: Side,
}

/// Everything needed to regenerate a dataset exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorManifest {
    pub version: u32,
    pub task: CueTaskConfig,
    pub root_seed: u64,
    pub count: usize,
    pub episodes: Vec<ManifestEntry>,
}

/// Writes `count` episodes (binary plus raster CSV) and a manifest into `dir`.
/// Episode `i` uses seed `derive_indexed(root_seed, "episode", i)`.
pub fn generate_dataset(dir: &Path, cfg: &CueTaskConfig, root_seed: u64, count: usize) -> Result<GeneratorManifest> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut episodes = Vec::with_capacity(count);
    for i in 0..count {
        let seed = derive_indexed(root_seed, "episode", i as u64);
        let sample = generate_cue_sample(cfg, seed)?;
        let stem = format!("episode_{i:05}");
        let bin = dir.join(format!("{stem}.bin"));
        let csv = dir.join(format!("{stem}.csv"));
        let f = File::create(&bin).map_err(|e| Error::io(&bin, e))?;
        let mut w = BufWriter::new(f);
        write_episode(&mut w, &sample).and_then(|_| w.flush()).map_err(|e| Error::io(&bin, e))?;
        let f = File::create(&csv).map_err(|e| Error::io(&csv, e))?;
        let mut w = BufWriter::new(f);
        write_raster_csv(&mut w, &sample.spikes).and_then(|_| w.flush()).map_err(|e| Error::io(&csv, e))?;
        episodes.push(ManifestEntry { file: format!("{stem}.bin"), seed, label: sample.label });
    }
    let manifest = GeneratorManifest { version: MANIFEST_VERSION, task: cfg.clone(), root_seed, count, episodes };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<GeneratorManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: GeneratorManifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::format(&path, format!("unsupported manifest version {}", m.version)));
    }
    Ok(m)
}
