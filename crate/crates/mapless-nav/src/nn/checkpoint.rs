//! Network checkpoint files: a text manifest listing entry names, shapes and
//! byte offsets, followed by the raw little-endian f64 arrays in manifest
//! order. Optimizer moments ride along as extra `m`/`v` entries so a resumed
//! run continues bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::params::ParamArena;

const MAGIC: &str = "params-manifest v1";

fn io_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Write `values` as little-endian f64 bytes.
pub fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read exactly `n` little-endian f64 values.
pub fn read_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn shape_str(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

/// Save one network's parameters (values + optimizer moments) atomically.
pub fn save_params(path: &Path, arena: &ParamArena) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).map_err(|e| io_err(&tmp, e.to_string()))?;
        let mut w = BufWriter::new(file);
        let mut manifest = String::new();
        manifest.push_str(MAGIC);
        manifest.push('\n');
        manifest.push_str(&format!("step={}\n", arena.step()));
        manifest.push_str(&format!("entries={}\n", arena.entries().len() * 3));
        let mut offset = 0usize;
        for kind in ["value", "m", "v"] {
            for e in arena.entries() {
                manifest.push_str(&format!(
                    "entry name={} shape={} kind={kind} offset={offset}\n",
                    e.name,
                    shape_str(&e.shape)
                ));
                offset += e.len() * 8;
            }
        }
        manifest.push_str(&format!("payload={offset}\n"));
        manifest.push_str("end\n");
        w.write_all(manifest.as_bytes())
            .map_err(|e| io_err(&tmp, e.to_string()))?;
        let (m, v) = arena.adam_state();
        for arr in [arena.value(), m, v] {
            write_f64s(&mut w, arr).map_err(|e| io_err(&tmp, e.to_string()))?;
        }
        w.flush().map_err(|e| io_err(&tmp, e.to_string()))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e.to_string()))?;
    Ok(())
}

/// Load a checkpoint into an arena with the same entry layout (typically one
/// freshly built by the architecture builders). Verifies the manifest against
/// the arena's names/shapes and the payload length before overwriting state.
pub fn load_params(path: &Path, arena: &mut ParamArena) -> Result<()> {
    let file = File::open(path).map_err(|e| io_err(path, e.to_string()))?;
    let mut r = BufReader::new(file);

    // The manifest is short; read it line-by-line without pulling the binary
    // payload through a string.
    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)
            .map_err(|_| io_err(path, "truncated manifest"))?;
        header.push(byte[0]);
        if header.ends_with(b"end\n") {
            break;
        }
        if header.len() > 1 << 20 {
            return Err(io_err(path, "manifest unreasonably large"));
        }
    }
    let header = String::from_utf8(header).map_err(|_| io_err(path, "manifest is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(io_err(path, "bad magic line"));
    }

    let mut step = None;
    let mut declared_entries = None;
    let mut declared_payload = None;
    let mut entries: Vec<(String, String, String)> = Vec::new(); // name, shape, kind
    for line in lines {
        if line == "end" {
            break;
        }
        if let Some(v) = line.strip_prefix("step=") {
            step = v.parse::<u64>().ok();
        } else if let Some(v) = line.strip_prefix("entries=") {
            declared_entries = v.parse::<usize>().ok();
        } else if let Some(v) = line.strip_prefix("payload=") {
            declared_payload = v.parse::<usize>().ok();
        } else if let Some(rest) = line.strip_prefix("entry ") {
            let mut name = None;
            let mut shape = None;
            let mut kind = None;
            for field in rest.split_whitespace() {
                if let Some(v) = field.strip_prefix("name=") {
                    name = Some(v.to_string());
                } else if let Some(v) = field.strip_prefix("shape=") {
                    shape = Some(v.to_string());
                } else if let Some(v) = field.strip_prefix("kind=") {
                    kind = Some(v.to_string());
                }
            }
            match (name, shape, kind) {
                (Some(n), Some(s), Some(k)) => entries.push((n, s, k)),
                _ => return Err(io_err(path, format!("malformed entry line: {line}"))),
            }
        } else {
            return Err(io_err(path, format!("unrecognized manifest line: {line}")));
        }
    }

    let step = step.ok_or_else(|| io_err(path, "missing step"))?;
    if declared_entries != Some(entries.len()) {
        return Err(io_err(path, "entry count disagrees with manifest body"));
    }

    // Cross-check against the arena layout: same names, same shapes, same
    // order, for each of the three kinds.
    let expected: Vec<(String, String, String)> = ["value", "m", "v"]
        .iter()
        .flat_map(|kind| {
            arena
                .entries()
                .iter()
                .map(move |e| (e.name.clone(), shape_str(&e.shape), kind.to_string()))
        })
        .collect();
    if entries != expected {
        for (got, want) in entries.iter().zip(&expected) {
            if got != want {
                return Err(io_err(
                    path,
                    format!(
                        "manifest mismatch: file has {}/{}/{}, architecture expects {}/{}/{}",
                        got.0, got.1, got.2, want.0, want.1, want.2
                    ),
                ));
            }
        }
        return Err(io_err(
            path,
            format!(
                "manifest lists {} entries, architecture expects {}",
                entries.len(),
                expected.len()
            ),
        ));
    }

    let total = arena.len() * 3;
    if declared_payload != Some(total * 8) {
        return Err(io_err(path, "payload length disagrees with architecture"));
    }
    let all = read_f64s(&mut r, total).map_err(|_| io_err(path, "truncated payload"))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| io_err(path, e.to_string()))? != 0 {
        return Err(io_err(path, "trailing bytes after declared payload"));
    }

    let n = arena.len();
    arena.value_mut().copy_from_slice(&all[..n]);
    arena.restore_adam_state(all[n..2 * n].to_vec(), all[2 * n..].to_vec(), step)?;
    Ok(())
}
