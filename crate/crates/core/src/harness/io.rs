//! On-disk formats: one JSON file per evaluated episode and JSON-lines
//! replay buffers, each opening with a versioned header.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::trace::{EpisodeTrace, PolicyKind};
use crate::error::{Error, Result};
use crate::gridworld::EnvVariant;

pub const TRACE_FORMAT: &str = "novelty-wm-trace";
pub const BUFFER_FORMAT: &str = "novelty-wm-buffer";
pub const FILE_VERSION: u32 = 1;

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub variant: String,
    pub activation_step: u32,
    pub seed: u64,
    pub policy: PolicyKind,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    #[serde(flatten)]
    header: TraceHeader,
    trace: EpisodeTrace,
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_header(path: &Path, format: &str, expected: &str, version: u32) -> Result<()> {
    if format != expected {
        return Err(Error::format(
            path,
            format!("expected format `{expected}`, found `{format}`"),
        ));
    }
    if version != FILE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    Ok(())
}

pub fn write_trace(path: &Path, trace: &EpisodeTrace, config_digest: &str) -> Result<()> {
    let file = TraceFile {
        header: TraceHeader {
            format: TRACE_FORMAT.into(),
            version: FILE_VERSION,
            variant: trace.variant.kind.id().into(),
            activation_step: trace.variant.activation_step,
            seed: trace.seed,
            policy: trace.policy,
            config_digest: config_digest.into(),
        },
        trace: trace.clone(),
    };
    let text = serde_json::to_string(&file).expect("trace serializes");
    write_text(path, &text)
}

pub fn read_trace(path: &Path) -> Result<(TraceHeader, EpisodeTrace)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: TraceFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
    let h = &file.header;
    check_header(path, &h.format, TRACE_FORMAT, h.version)?;
    if h.variant != file.trace.variant.kind.id() || h.seed != file.trace.seed {
        return Err(Error::format(path, "header disagrees with the trace body"));
    }
    Ok((file.header, file.trace))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferHeader {
    pub format: String,
    pub version: u32,
    pub variant: EnvVariant,
    pub policy: PolicyKind,
    pub episodes: usize,
    pub steps: usize,
    pub config_digest: String,
}

/// Header line followed by one trace per line.
pub fn write_buffer(
    path: &Path,
    variant: EnvVariant,
    policy: PolicyKind,
    traces: &[EpisodeTrace],
    config_digest: &str,
) -> Result<BufferHeader> {
    create_parent(path)?;
    let header = BufferHeader {
        format: BUFFER_FORMAT.into(),
        version: FILE_VERSION,
        variant,
        policy,
        episodes: traces.len(),
        steps: traces.iter().map(EpisodeTrace::len).sum(),
        config_digest: config_digest.into(),
    };
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    serde_json::to_writer(&mut w, &header).expect("header serializes");
    w.write_all(b"\n").map_err(io)?;
    for t in traces {
        serde_json::to_writer(&mut w, t).expect("trace serializes");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(header)
}

pub fn read_buffer(path: &Path) -> Result<(BufferHeader, Vec<EpisodeTrace>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty buffer file"))?
        .map_err(|e| Error::io(path, e))?;
    let header: BufferHeader = serde_json::from_str(&first).map_err(|e| Error::format(path, e))?;
    check_header(path, &header.format, BUFFER_FORMAT, header.version)?;
    let mut traces = Vec::with_capacity(header.episodes);
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        traces.push(serde_json::from_str(&line).map_err(|e| Error::format(path, e))?);
    }
    let steps: usize = traces.iter().map(EpisodeTrace::len).sum();
    if traces.len() != header.episodes || steps != header.steps {
        return Err(Error::format(
            path,
            format!(
                "header promises {} episodes / {} steps, body has {} / {steps}",
                header.episodes,
                header.steps,
                traces.len()
            ),
        ));
    }
    Ok((header, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{EnvConfig, VariantKind};
    use crate::harness::collect_steps;

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let traces = collect_steps(
            VariantKind::Teleport.into(),
            PolicyKind::Scripted,
            40,
            5,
            EnvConfig::default(),
        );
        let p = dir.path().join("a/t.json");
        write_trace(&p, &traces[0], "d1").unwrap();
        let (h, back) = read_trace(&p).unwrap();
        assert_eq!(back, traces[0]);
        assert_eq!(h.variant, "teleport");
        assert_eq!(h.config_digest, "d1");
    }

    #[test]
    fn buffer_round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let traces = collect_steps(
            EnvVariant::nominal(),
            PolicyKind::Random,
            300,
            5,
            EnvConfig::default(),
        );
        let p = dir.path().join("b.jsonl");
        let h = write_buffer(&p, EnvVariant::nominal(), PolicyKind::Random, &traces, "x").unwrap();
        assert_eq!(h.steps, 300);
        let (h2, back) = read_buffer(&p).unwrap();
        assert_eq!(h2, h);
        assert_eq!(back, traces);

        let text = fs::read_to_string(&p).unwrap();
        let cut: Vec<&str> = text.lines().take(1).collect();
        fs::write(&p, cut.join("\n")).unwrap();
        assert!(matches!(read_buffer(&p), Err(Error::Format { .. })));
        assert!(matches!(read_trace(&p), Err(Error::Format { .. })));
        assert!(matches!(
            read_buffer(&dir.path().join("none")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn digest_is_stable_hex() {
        let a = config_digest(&("x", 1));
        assert_eq!(a, config_digest(&("x", 1)));
        assert_ne!(a, config_digest(&("x", 2)));
        assert_eq!(a.len(), 64);
    }
}
