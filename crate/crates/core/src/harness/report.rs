//! Report emission: per-run CSV/JSON files, summary tables and a manifest.
//!
//! Timing data only ever lands in files whose manifest kind is `timing`, so
//! every `data` file is a deterministic function of the configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::io::{write_json, write_text};
use crate::metrics::ErrorReport;

/// Outcome of one simulation compared against its reference.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    /// Unique, filesystem-safe label.
    pub label: String,
    /// `ptrom`, `gnat`, `fom`, `heun`, `bh_implicit`, ...
    pub method: String,
    pub n: usize,
    pub mu: Option<[f64; 2]>,
    pub errors: Option<ErrorReport>,
    /// Wall time of the timed loop (seconds).
    pub wall_time: Option<f64>,
    /// Wall time of the implicit FOM reference (seconds).
    pub reference_wall_time: Option<f64>,
    /// Deterministic scalar facts (basis sizes, cluster counts, iteration totals).
    pub facts: BTreeMap<String, f64>,
    /// Plot-ready frames `(step, state)`.
    pub frames: Vec<(usize, Vec<f64>)>,
    /// Failure message when the run aborted.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn speedup(&self) -> Option<f64> {
        match (self.reference_wall_time, self.wall_time) {
            (Some(r), Some(w)) if w > 0.0 => Some(r / w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Data,
    Timing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: ArtifactKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn add(&mut self, path: impl Into<String>, kind: ArtifactKind) {
        self.entries.push(ManifestEntry {
            path: path.into(),
            kind,
        });
    }

    pub fn extend(&mut self, other: Manifest) {
        self.entries.extend(other.entries);
    }

    pub fn data_files(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|e| e.kind == ArtifactKind::Data)
            .map(|e| e.path.as_str())
    }

    /// Sorts, deduplicates and writes `manifest.json` into `dir`.
    pub fn write(mut self, dir: &Path) -> Result<Manifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        self.entries.dedup();
        write_json(&dir.join("manifest.json"), &self)?;
        Ok(self)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

fn frames_csv(frames: &[(usize, Vec<f64>)]) -> String {
    let mut s = String::new();
    for (step, x) in frames {
        let vals: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{step},{}", vals.join(","));
    }
    s
}

/// Writes per-run files plus `summary.csv` and `wall_times.csv` under `dir`.
///
/// An empty run list produces only an empty manifest.
pub fn emit_reports(dir: &Path, runs: &[RunRecord]) -> Result<Manifest> {
    let mut manifest = Manifest::default();
    if runs.is_empty() {
        return manifest.write(dir);
    }
    let mut summary = String::from("label,method,n,mu1,mu2,mean_mae_d,mean_ae_h,failure\n");
    let mut times = String::from("label,method,n,wall_time,reference_wall_time,speedup\n");
    for r in runs {
        let base = format!("runs/{}", r.label);
        let (m1, m2) = r.mu.map_or((None, None), |m| (Some(m[0]), Some(m[1])));
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            r.label,
            r.method,
            r.n,
            opt(m1),
            opt(m2),
            opt(r.errors.as_ref().map(|e| e.mean_mae_d)),
            opt(r.errors.as_ref().map(|e| e.mean_ae_h)),
            r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        );
        let _ = writeln!(
            times,
            "{},{},{},{},{},{}",
            r.label,
            r.method,
            r.n,
            opt(r.wall_time),
            opt(r.reference_wall_time),
            opt(r.speedup())
        );
        let mut json = serde_json::json!({
            "label": r.label,
            "method": r.method,
            "n": r.n,
            "mu": r.mu,
            "facts": r.facts,
            "failure": r.failure,
        });
        if let Some(e) = &r.errors {
            json["errors"] = e.summary_json();
            let path = format!("{base}/errors.csv");
            write_text(&dir.join(&path), &e.to_csv())?;
            manifest.add(path, ArtifactKind::Data);
        }
        let path = format!("{base}/summary.json");
        write_json(&dir.join(&path), &json)?;
        manifest.add(path, ArtifactKind::Data);
        if !r.frames.is_empty() {
            let path = format!("{base}/trajectory.csv");
            write_text(&dir.join(&path), &frames_csv(&r.frames))?;
            manifest.add(path, ArtifactKind::Data);
        }
        let path = format!("{base}/timing.json");
        write_json(
            &dir.join(&path),
            &serde_json::json!({
                "wall_time": r.wall_time,
                "reference_wall_time": r.reference_wall_time,
                "speedup": r.speedup(),
            }),
        )?;
        manifest.add(path, ArtifactKind::Timing);
    }
    write_text(&dir.join("summary.csv"), &summary)?;
    manifest.add("summary.csv", ArtifactKind::Data);
    write_text(&dir.join("wall_times.csv"), &times)?;
    manifest.add("wall_times.csv", ArtifactKind::Timing);
    manifest.write(dir)
}

/// Writes the resolved configuration as `rel` under `dir` for provenance.
pub fn write_config(dir: &Path, rel: &str, cfg: &ExperimentConfig) -> Result<Manifest> {
    write_json(&dir.join(rel), cfg)?;
    let mut m = Manifest::default();
    m.add(rel, ArtifactKind::Data);
    Ok(m)
}

/// Frames at every `stride`-th step plus the final one.
pub fn sample_frames<'a>(
    states: impl IntoIterator<Item = &'a [f64]>,
    stride: usize,
) -> Vec<(usize, Vec<f64>)> {
    let stride = stride.max(1);
    let all: Vec<&[f64]> = states.into_iter().collect();
    let last = all.len();
    all.iter()
        .enumerate()
        .map(|(k, x)| (k + 1, *x))
        .filter(|(step, _)| step % stride == 0 || *step == last)
        .map(|(step, x)| (step, x.to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_list_gives_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_reports(dir.path(), &[]).unwrap();
        assert!(m.entries.is_empty());
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn frames_include_last_step() {
        let states: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64]).collect();
        let f = sample_frames(states.iter().map(Vec::as_slice), 3);
        let steps: Vec<usize> = f.iter().map(|(s, _)| *s).collect();
        assert_eq!(steps, vec![3, 6, 7]);
    }
}
