//! File formats and atomic writes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rbc_core::classifier::{MlpModel, ModelFile};
use rbc_core::qdsim::{DeviceState, DiagramStack, StabilityDiagram};
use rbc_core::{RbcError, Result};

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    tmp.set_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Opens `path` for reading; errors name the file.
pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// Compact JSON, for bulky grids.
pub fn save_json_compact<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| RbcError::Config(format!("{}: {e}", path.display())))
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramMeta {
    pub v1_min: f64,
    /// Exclusive: the last column sits at `v1_max - resolution_mv`.
    pub v1_max: f64,
    pub v2_min: f64,
    pub v2_max: f64,
    pub resolution_mv: f64,
    pub vb_mv: f64,
    pub device_seed: u64,
    pub noise_seed: u64,
}

/// File form of a [`StabilityDiagram`]; rows run along `V_P2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramFile {
    pub meta: DiagramMeta,
    pub signal: Vec<Vec<f64>>,
    pub labels: Vec<Vec<u8>>,
}

impl From<&StabilityDiagram> for DiagramFile {
    fn from(d: &StabilityDiagram) -> Self {
        let nx = d.nx();
        Self {
            meta: DiagramMeta {
                v1_min: d.v1_axis[0],
                v1_max: d.v1_axis[0] + nx as f64 * d.resolution,
                v2_min: d.v2_axis[0],
                v2_max: d.v2_axis[0] + d.ny() as f64 * d.resolution,
                resolution_mv: d.resolution,
                vb_mv: d.vb,
                device_seed: d.device_seed,
                noise_seed: d.noise_seed,
            },
            signal: d.signal.chunks(nx).map(<[f64]>::to_vec).collect(),
            labels: d.labels.chunks(nx).map(|r| r.iter().map(|s| s.index() as u8).collect()).collect(),
        }
    }
}

impl TryFrom<DiagramFile> for StabilityDiagram {
    type Error = RbcError;

    fn try_from(f: DiagramFile) -> Result<Self> {
        let m = &f.meta;
        if !(m.resolution_mv > 0.0) {
            return Err(RbcError::Config("diagram resolution must be positive".into()));
        }
        let ny = f.signal.len();
        let nx = f.signal.first().map_or(0, Vec::len);
        if nx == 0 || ny == 0 {
            return Err(RbcError::Empty("diagram signal"));
        }
        for row in &f.signal {
            if row.len() != nx {
                return Err(RbcError::Dimension { expected: nx, got: row.len() });
            }
        }
        if f.labels.len() != ny {
            return Err(RbcError::Dimension { expected: ny, got: f.labels.len() });
        }
        let mut labels = Vec::with_capacity(nx * ny);
        for row in &f.labels {
            if row.len() != nx {
                return Err(RbcError::Dimension { expected: nx, got: row.len() });
            }
            for &l in row {
                labels.push(
                    DeviceState::from_index(l as usize)
                        .ok_or_else(|| RbcError::Config(format!("label {l} is not a device state")))?,
                );
            }
        }
        Ok(StabilityDiagram {
            v1_axis: (0..nx).map(|i| m.v1_min + i as f64 * m.resolution_mv).collect(),
            v2_axis: (0..ny).map(|j| m.v2_min + j as f64 * m.resolution_mv).collect(),
            resolution: m.resolution_mv,
            vb: m.vb_mv,
            signal: f.signal.concat(),
            labels,
            device_seed: m.device_seed,
            noise_seed: m.noise_seed,
        })
    }
}

pub fn save_diagram(path: &Path, d: &StabilityDiagram) -> Result<()> {
    save_json_compact(path, &DiagramFile::from(d))
}

pub fn load_diagram(path: &Path) -> Result<StabilityDiagram> {
    load_json::<DiagramFile>(path)?.try_into()
}

pub fn save_stack(path: &Path, s: &DiagramStack) -> Result<()> {
    save_json_compact(path, &s.slices.iter().map(DiagramFile::from).collect::<Vec<_>>())
}

/// Loads a stack; a single-scan file becomes a one-slice stack.
pub fn load_stack(path: &Path) -> Result<DiagramStack> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Stack(Vec<DiagramFile>),
        One(DiagramFile),
    }
    let files = match load_json(path)? {
        Either::Stack(v) => v,
        Either::One(f) => vec![f],
    };
    DiagramStack::new(files.into_iter().map(StabilityDiagram::try_from).collect::<Result<_>>()?)
}

pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    save_json(path, &ModelFile::from(model))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    load_json::<ModelFile>(path)?.try_into()
}
