//! Line-delimited episode logs and the run manifest.
//!
//! Each episode file holds one `{"record": "step", ...}` line per step and
//! a closing `{"record": "summary", ...}` line.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::HarnessError;
use crate::runner::{EpisodeLog, EpisodeSummary, SeedRun, StepRecord};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Step(StepRecord),
    Summary(EpisodeSummary),
}

pub fn episode_file_name(seed: u64, episode: u64) -> String {
    format!("seed{seed}_episode{episode:05}.jsonl")
}

fn policy_file_name(seed: u64) -> String {
    format!("policy_seed{seed}.json")
}

pub fn encode_episode(log: &EpisodeLog) -> Vec<u8> {
    let mut out = Vec::new();
    for step in &log.steps {
        serde_json::to_writer(&mut out, &Line::Step(step.clone())).expect("step serializes");
        out.push(b'\n');
    }
    serde_json::to_writer(&mut out, &Line::Summary(log.summary.clone())).expect("summary serializes");
    out.push(b'\n');
    out
}

/// Parses an episode file. Steps must be contiguous and the summary must
/// come last.
pub fn decode_episode<R: BufRead>(reader: R, path: &Path) -> Result<EpisodeLog, HarnessError> {
    let bad = |line: usize, message: String| HarnessError::Log {
        path: path.to_owned(),
        line,
        message,
    };
    let mut steps = Vec::new();
    let mut summary = None;
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(bad(n, "records after the summary".into()));
        }
        match serde_json::from_str::<Line>(&line).map_err(|e| bad(n, e.to_string()))? {
            Line::Step(s) => {
                if s.step != steps.len() as u64 {
                    return Err(bad(n, format!("expected step {}, found {}", steps.len(), s.step)));
                }
                steps.push(s);
            }
            Line::Summary(s) => summary = Some(s),
        }
    }
    let summary = summary.ok_or_else(|| bad(0, "missing summary record".into()))?;
    Ok(EpisodeLog { summary, steps })
}

pub fn read_episode(path: &Path) -> Result<EpisodeLog, HarnessError> {
    let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    decode_episode(BufReader::new(file), path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    /// Episode returns per seed, in episode order.
    pub returns: BTreeMap<u64, Vec<f64>>,
    pub files: Vec<FileEntry>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

fn is_run_file(name: &str) -> bool {
    name == MANIFEST
        || (name.starts_with("seed") && name.ends_with(".jsonl"))
        || (name.starts_with("policy_seed") && name.ends_with(".json"))
}

/// Writes every episode file, any learned policy tables and the manifest.
/// Refuses a directory that already holds a manifest unless `overwrite`,
/// in which case the previous run's files are removed first.
pub fn write_logs(dir: &Path, cfg: &RunConfig, runs: &[SeedRun], overwrite: bool) -> Result<Manifest, HarnessError> {
    let manifest_path = dir.join(MANIFEST);
    if manifest_path.exists() {
        if !overwrite {
            return Err(HarnessError::OutputExists(dir.to_owned()));
        }
        for entry in fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
            let entry = entry.map_err(|e| HarnessError::io(dir, e))?;
            if entry.file_name().to_str().is_some_and(is_run_file) {
                fs::remove_file(entry.path()).map_err(|e| HarnessError::io(&entry.path(), e))?;
            }
        }
    }
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;

    let mut files = Vec::new();
    let mut returns = BTreeMap::new();
    for run in runs {
        for ep in &run.episodes {
            let name = episode_file_name(run.seed, ep.summary.episode);
            let bytes = encode_episode(ep);
            write_file(&dir.join(&name), &bytes)?;
            files.push(FileEntry {
                file: name,
                sha256: sha256_hex(&bytes),
            });
        }
        if let Some(table) = &run.table {
            let name = policy_file_name(run.seed);
            let bytes = serde_json::to_vec(table).expect("table serializes");
            write_file(&dir.join(&name), &bytes)?;
            files.push(FileEntry {
                file: name,
                sha256: sha256_hex(&bytes),
            });
        }
        returns.insert(run.seed, run.returns());
    }

    let versions = [
        ("marketgym-harness", env!("CARGO_PKG_VERSION")),
        ("marketgym-gym", marketgym_gym::VERSION),
        ("marketgym-core", marketgym_core::VERSION),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v.to_owned()))
    .collect();
    let manifest = Manifest {
        config: cfg.clone(),
        config_sha256: cfg.hash(),
        versions,
        seeds: cfg.seeds.clone(),
        episodes: cfg.episodes,
        returns,
        files,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_file(&manifest_path, &bytes)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let path: PathBuf = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Log {
        path,
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EpisodeLog {
        EpisodeLog {
            summary: EpisodeSummary {
                seed: 1,
                episode: 0,
                kernel_seed: 99,
                steps: 2,
                total_reward: 0.30000000000000004,
                exploration: 1.0,
                trades: 0,
                tape_sha256: sha256_hex(b"[]"),
            },
            steps: (0..2)
                .map(|i| StepRecord {
                    step: i,
                    time: "09:35:00".into(),
                    state: vec![0.1, -3.0],
                    action: 1,
                    reward: if i == 0 { 0.1 } else { 0.2 },
                    done: i == 1,
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let log = sample();
        let bytes = encode_episode(&log);
        let back = decode_episode(&bytes[..], Path::new("x")).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.recomputed_return(), back.summary.total_reward);
    }

    #[test]
    fn malformed_logs() {
        let good = String::from_utf8(encode_episode(&sample())).unwrap();
        let lines: Vec<&str> = good.lines().collect();
        for text in [
            lines[..2].join("\n"),
            format!("{}\n{}", lines[1], lines[2]),
            format!("{good}{}\n", lines[0]),
            "{\"record\": \"nope\"}".to_owned(),
        ] {
            assert!(decode_episode(text.as_bytes(), Path::new("x")).is_err(), "{text}");
        }
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
