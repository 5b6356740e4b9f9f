//! Side-by-side comparison of result directories solved from one dataset.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dynslam::io::{self, Metrics, METRICS_FILE, TRACE_FILE};
use dynslam::solver::{error_changes, parse_trace, sign_flips};

use crate::manifest::RunManifest;
use crate::{CliError, Result};

pub const COMPARISON_HEADER: &str = "# dynslam comparison v1";

/// What one result directory contributes to a comparison.
#[derive(Clone, Debug)]
pub struct Run {
    /// Formulation name, suffixed `#n` when it repeats.
    pub label: String,
    pub dir: PathBuf,
    pub dataset_sha256: String,
    pub iterations: usize,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Sign changes of the trace's error-change column.
    pub sign_flips: usize,
    pub final_chi2: f64,
    pub metrics: Metrics,
}

impl Run {
    fn load(dir: &Path) -> Result<Run> {
        let manifest = RunManifest::read(dir)?;
        let records = parse_trace(&io::read_file(&dir.join(TRACE_FILE))?)?;
        let metrics_path = dir.join(METRICS_FILE);
        if !metrics_path.exists() {
            return Err(CliError::Invalid(format!("{}: no metrics; run `dynslam eval` on it first", dir.display())));
        }
        Ok(Run {
            label: manifest.require("formulation")?,
            dir: dir.to_path_buf(),
            dataset_sha256: manifest.require("dataset_sha256")?,
            iterations: manifest.require("iterations")?,
            steps: manifest.require("steps")?,
            rejected_steps: manifest.require("rejected_steps")?,
            sign_flips: sign_flips(&error_changes(&records)),
            final_chi2: manifest.require("final_chi2")?,
            metrics: io::parse_metrics(&io::read_file(&metrics_path)?)?,
        })
    }

    /// Per-object rows of a section keyed by id.
    fn object_rows(&self, section: &str) -> BTreeMap<&str, (f64, f64)> {
        self.metrics
            .rows
            .iter()
            .filter(|r| r.section == section && r.id.contains('|') && !r.id.ends_with("|mean"))
            .filter_map(|r| r.mean.map(|m| (r.id.as_str(), m)))
            .collect()
    }
}

/// How often run `a` beats run `b` on the objects both have samples for.
/// Exact ties count half a win for each side.
#[derive(Clone, Debug, PartialEq)]
pub struct WinCount {
    pub section: String,
    pub a: String,
    pub b: String,
    pub objects: usize,
    pub wins_t: f64,
    pub wins_r: f64,
}

impl WinCount {
    pub fn fraction_t(&self) -> Option<f64> {
        (self.objects > 0).then(|| self.wins_t / self.objects as f64)
    }

    pub fn fraction_r(&self) -> Option<f64> {
        (self.objects > 0).then(|| self.wins_r / self.objects as f64)
    }
}

fn win_points(a: f64, b: f64) -> f64 {
    if a < b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub dataset_sha256: String,
    pub runs: Vec<Run>,
    /// Every ordered pair `a` before `b` in run order, for the motion and pose sections.
    pub wins: Vec<WinCount>,
}

impl Comparison {
    pub fn run(&self, label: &str) -> Option<&Run> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn win(&self, section: &str, a: &str, b: &str) -> Option<&WinCount> {
        self.wins.iter().find(|w| w.section == section && w.a == a && w.b == b)
    }

    pub fn render(&self) -> String {
        let mut out = String::from(COMPARISON_HEADER);
        out.push('\n');
        let _ = writeln!(out, "dataset_sha256 {}", self.dataset_sha256);
        let lw = self.runs.iter().map(|r| r.label.len()).max().unwrap_or(0).max(11);
        for r in &self.runs {
            let _ = writeln!(out, "run {:<lw$} {}", r.label, r.dir.display());
        }

        let base = &self.runs[0];
        let _ = writeln!(out, "\nmetrics (E_t in m, E_r in degrees; deltas relative to {})", base.label);
        let iw = base.metrics.rows.iter().map(|r| r.id.len()).max().unwrap_or(0).max(8);
        let _ = writeln!(
            out,
            "{:<7} {:<iw$} {:<lw$} {:>12} {:>12} {:>13} {:>13}",
            "section", "id", "formulation", "E_t", "E_r", "dE_t", "dE_r"
        );
        for row in &base.metrics.rows {
            for r in &self.runs {
                let m = r.metrics.rows.iter().find(|x| x.section == row.section && x.id == row.id).and_then(|x| x.mean);
                let (t, e, dt, de) = match (m, row.mean) {
                    (Some(m), Some(b)) => {
                        (format!("{:.6}", m.0), format!("{:.6}", m.1), format!("{:+.6}", m.0 - b.0), format!("{:+.6}", m.1 - b.1))
                    }
                    (Some(m), None) => (format!("{:.6}", m.0), format!("{:.6}", m.1), "-".into(), "-".into()),
                    _ => ("-".into(), "-".into(), "-".into(), "-".into()),
                };
                let _ = writeln!(out, "{:<7} {:<iw$} {:<lw$} {t:>12} {e:>12} {dt:>13} {de:>13}", row.section, row.id, r.label);
            }
        }

        let _ = writeln!(out, "\nsolver");
        let _ = writeln!(
            out,
            "{:<lw$} {:>10} {:>6} {:>9} {:>11} {:>12}",
            "formulation", "iterations", "steps", "rejected", "sign_flips", "final_chi2"
        );
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{:<lw$} {:>10} {:>6} {:>9} {:>11} {:>12.4e}",
                r.label, r.iterations, r.steps, r.rejected_steps, r.sign_flips, r.final_chi2
            );
        }

        let _ = writeln!(out, "\nper-object win fractions of A over B (ties split)");
        let _ = writeln!(out, "{:<7} {:<lw$} {:<lw$} {:>7} {:>8} {:>8}", "section", "A", "B", "objects", "E_t", "E_r");
        let pct = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{:.1}%", 100.0 * x));
        for w in &self.wins {
            let _ = writeln!(
                out,
                "{:<7} {:<lw$} {:<lw$} {:>7} {:>8} {:>8}",
                w.section,
                w.a,
                w.b,
                w.objects,
                pct(w.fraction_t()),
                pct(w.fraction_r())
            );
        }
        out
    }
}

/// Loads each result directory (manifest, trace and metrics) and compares them.
/// All directories must have been solved from byte-identical datasets.
pub fn cmd_compare(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(CliError::Invalid("compare needs at least two result directories".into()));
    }
    let mut runs = dirs.iter().map(|d| Run::load(d)).collect::<Result<Vec<_>>>()?;
    let hash = runs[0].dataset_sha256.clone();
    if let Some(r) = runs.iter().find(|r| r.dataset_sha256 != hash) {
        return Err(CliError::Invalid(format!(
            "dataset hash mismatch: {} was solved from {}, {} from {}",
            runs[0].dir.display(),
            hash,
            r.dir.display(),
            r.dataset_sha256
        )));
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for r in &mut runs {
        let n = seen.entry(r.label.clone()).or_default();
        *n += 1;
        if *n > 1 {
            r.label = format!("{}#{n}", r.label);
        }
    }

    let mut wins = Vec::new();
    for section in ["motion", "pose"] {
        for (ia, a) in runs.iter().enumerate() {
            for b in &runs[ia + 1..] {
                let (ra, rb) = (a.object_rows(section), b.object_rows(section));
                let mut w = WinCount { section: section.into(), a: a.label.clone(), b: b.label.clone(), objects: 0, wins_t: 0.0, wins_r: 0.0 };
                for (id, ma) in &ra {
                    if let Some(mb) = rb.get(id) {
                        w.objects += 1;
                        w.wins_t += win_points(ma.0, mb.0);
                        w.wins_r += win_points(ma.1, mb.1);
                    }
                }
                wins.push(w);
            }
        }
    }
    Ok(Comparison { dataset_sha256: hash, runs, wins })
}
