//! Sample files: a window descriptor followed by interlacement samples, as JSON or
//! as a compact little-endian binary stream of runs and step codes.
//!
//! Binary layout (all integers little endian):
//!
//! ```text
//! magic "RIBS", version u32, descriptor length u32, descriptor JSON bytes,
//! sample count u64, then per sample:
//!   level f64, trajectory count u32, then per trajectory:
//!     label f64, forward runs, backward runs
//! runs: count u32, then per run: d x i64 start, step count u32, step codes u8
//! ```
//!
//! Visits are not stored; they are recomputed from the forward points on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interlacement::InterlacementSample;
use crate::lattice::{Window, WindowDescriptor};
use crate::walk::{Run, Trajectory};

pub const MAGIC: &[u8; 4] = b"RIBS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub window: Arc<Window>,
    pub samples: Vec<InterlacementSample>,
}

#[derive(Serialize, Deserialize)]
struct JsonSample {
    level: f64,
    trajectories: Vec<JsonTrajectory>,
}

#[derive(Serialize, Deserialize)]
struct JsonTrajectory {
    label: f64,
    forward: Vec<Run>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    backward: Vec<Run>,
}

#[derive(Serialize, Deserialize)]
struct JsonBatch {
    version: u32,
    window: WindowDescriptor,
    samples: Vec<JsonSample>,
}

impl SampleBatch {
    pub fn new(window: Arc<Window>, samples: Vec<InterlacementSample>) -> Result<Self> {
        if samples.iter().any(|s| !Arc::ptr_eq(s.window(), &window) && s.window().descriptor() != window.descriptor()) {
            return Err(Error::UniverseMismatch);
        }
        Ok(SampleBatch { window, samples })
    }

    /// Writes JSON when the extension is `.json`, binary otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        if is_json(path) {
            self.write_json(w)
        } else {
            self.write_bin(w)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        if is_json(path) {
            Self::read_json(r)
        } else {
            Self::read_bin(r)
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let batch = JsonBatch {
            version: FORMAT_VERSION,
            window: self.window.descriptor(),
            samples: self
                .samples
                .iter()
                .map(|s| JsonSample {
                    level: s.level(),
                    trajectories: s
                        .trajectories()
                        .iter()
                        .map(|t| JsonTrajectory { label: t.label, forward: t.forward.clone(), backward: t.backward.clone() })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_writer(w, &batch)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let batch: JsonBatch = serde_json::from_reader(r)?;
        if batch.version != FORMAT_VERSION {
            return Err(Error::Format(format!("version {} (expected {FORMAT_VERSION})", batch.version)));
        }
        let window = Arc::new(Window::from_descriptor(&batch.window)?);
        let samples = batch
            .samples
            .into_iter()
            .map(|s| {
                let trajectories = s
                    .trajectories
                    .into_iter()
                    .map(|t| rebuild(&window, t.label, t.forward, t.backward))
                    .collect::<Result<_>>()?;
                InterlacementSample::new(window.clone(), s.level, trajectories)
            })
            .collect::<Result<_>>()?;
        Ok(SampleBatch { window, samples })
    }

    pub fn write_bin<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(FORMAT_VERSION)?;
        let desc = serde_json::to_vec(&self.window.descriptor())?;
        w.write_u32::<LE>(desc.len() as u32)?;
        w.write_all(&desc)?;
        w.write_u64::<LE>(self.samples.len() as u64)?;
        for s in &self.samples {
            w.write_f64::<LE>(s.level())?;
            w.write_u32::<LE>(s.trajectories().len() as u32)?;
            for t in s.trajectories() {
                w.write_f64::<LE>(t.label)?;
                write_runs(&mut w, &t.forward)?;
                write_runs(&mut w, &t.backward)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_bin<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.read_u32::<LE>()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("version {version} (expected {FORMAT_VERSION})")));
        }
        let len = r.read_u32::<LE>()? as usize;
        let mut desc = vec![0u8; len];
        r.read_exact(&mut desc)?;
        let desc: WindowDescriptor = serde_json::from_slice(&desc)?;
        let window = Arc::new(Window::from_descriptor(&desc)?);
        let d = window.dim();
        let n = r.read_u64::<LE>()?;
        let mut samples = Vec::with_capacity(n.min(1 << 20) as usize);
        for _ in 0..n {
            let level = r.read_f64::<LE>()?;
            let k = r.read_u32::<LE>()?;
            let mut trajectories = Vec::with_capacity(k as usize);
            for _ in 0..k {
                let label = r.read_f64::<LE>()?;
                let forward = read_runs(&mut r, d)?;
                let backward = read_runs(&mut r, d)?;
                trajectories.push(rebuild(&window, label, forward, backward)?);
            }
            samples.push(InterlacementSample::new(window.clone(), level, trajectories)?);
        }
        Ok(SampleBatch { window, samples })
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn write_runs<W: Write>(w: &mut W, runs: &[Run]) -> Result<()> {
    w.write_u32::<LE>(runs.len() as u32)?;
    for run in runs {
        for &c in &run.start {
            w.write_i64::<LE>(c)?;
        }
        w.write_u32::<LE>(run.steps.len() as u32)?;
        w.write_all(&run.steps)?;
    }
    Ok(())
}

fn read_runs<R: Read>(r: &mut R, d: usize) -> Result<Vec<Run>> {
    let n = r.read_u32::<LE>()?;
    let mut runs = Vec::with_capacity(n.min(1 << 16) as usize);
    for _ in 0..n {
        let mut start = vec![0i64; d];
        for c in start.iter_mut() {
            *c = r.read_i64::<LE>()?;
        }
        let len = r.read_u32::<LE>()? as usize;
        let mut steps = vec![0u8; len];
        r.read_exact(&mut steps)?;
        if steps.iter().any(|&s| s as usize >= 2 * d) {
            return Err(Error::Format("step code out of range".into()));
        }
        runs.push(Run { start, steps });
    }
    Ok(runs)
}

fn rebuild(window: &Window, label: f64, forward: Vec<Run>, backward: Vec<Run>) -> Result<Trajectory> {
    if forward.is_empty() {
        return Err(Error::Format("trajectory without forward runs".into()));
    }
    let d = window.dim();
    if forward.iter().chain(&backward).any(|r| r.start.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: forward[0].start.len() });
    }
    let mut t = Trajectory { forward, backward, label, visits: Vec::new() };
    t.visits = t.forward_points().filter_map(|p| window.index_of(&p).map(|i| i as u32)).collect();
    Ok(t)
}
