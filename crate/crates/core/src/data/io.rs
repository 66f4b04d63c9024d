use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::recording::{MotionLabel, Recording, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::quat::{Quaternion, Vec3};

const HEADER: [&str; 11] = ["t", "ax", "ay", "az", "gx", "gy", "gz", "qw", "qx", "qy", "qz"];

/// Metadata stored next to a recording CSV as `<stem>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<MotionLabel>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Reads a recording CSV (`t,ax,ay,az,gx,gy,gz,qw,qx,qy,qz`).
///
/// The sample rate comes from the sidecar JSON when present, otherwise from
/// the time column. Parse errors report the 1-based line number.
pub fn load_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != HEADER.len() || header.iter().zip(HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            row: 1,
            msg: format!("expected header `{}`", HEADER.join(",")),
        });
    }

    let mut t = Vec::new();
    let mut acc = Vec::new();
    let mut gyr = Vec::new();
    let mut q_ref = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            msg: e.to_string(),
        })?;
        if record.len() != HEADER.len() {
            return Err(Error::Parse {
                row: line,
                msg: format!("expected {} fields, found {}", HEADER.len(), record.len()),
            });
        }
        let mut v = [0.0; 11];
        for (j, field) in record.iter().enumerate() {
            v[j] = field.parse::<f64>().map_err(|e| Error::Parse {
                row: line,
                msg: format!("column {}: {e}", HEADER[j]),
            })?;
            if !v[j].is_finite() {
                return Err(Error::Parse {
                    row: line,
                    msg: format!("column {} is not finite", HEADER[j]),
                });
            }
        }
        let q = Quaternion::new(v[7], v[8], v[9], v[10]);
        if !q.is_unit(1e-6) {
            return Err(Error::Parse {
                row: line,
                msg: format!("reference quaternion norm {} is not 1", q.norm()),
            });
        }
        t.push(v[0]);
        acc.push(Vec3::new(v[1], v[2], v[3]));
        gyr.push(Vec3::new(v[4], v[5], v[6]));
        q_ref.push(q);
    }
    if t.is_empty() {
        return Err(Error::Parse {
            row: 2,
            msg: "no samples".into(),
        });
    }

    let sidecar = read_sidecar(path)?;
    let sample_rate_hz = match &sidecar {
        Some(s) => s.sample_rate_hz,
        None if t.len() >= 2 => {
            let span = t[t.len() - 1] - t[0];
            if !(span > 0.0) {
                return Err(Error::Parse {
                    row: t.len() + 1,
                    msg: "time column is not increasing".into(),
                });
            }
            (t.len() - 1) as f64 / span
        }
        None => DEFAULT_SAMPLE_RATE_HZ,
    };

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Recording::new(
        name,
        sample_rate_hz,
        acc,
        gyr,
        q_ref,
        sidecar.and_then(|s| s.label),
    )
}

fn read_sidecar(csv_path: &Path) -> Result<Option<Sidecar>> {
    let p = sidecar_path(csv_path);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

/// Writes the CSV and its sidecar. Values use shortest round-trip formatting,
/// so loading the file back reproduces every sample bit for bit.
pub fn save_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", HEADER.join(",")).map_err(io)?;
    for k in 0..rec.len() {
        let (a, g, q) = (rec.acc[k], rec.gyr[k], rec.q_ref[k]);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            rec.time(k),
            a.x,
            a.y,
            a.z,
            g.x,
            g.y,
            g.z,
            q.w,
            q.x,
            q.y,
            q.z
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;

    let sidecar = Sidecar {
        sample_rate_hz: rec.sample_rate_hz,
        label: rec.label,
    };
    let sp = sidecar_path(path);
    std::fs::write(&sp, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&sp, e))?;
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            row: 1,
            msg: format!("{other:?}"),
        },
    }
}
