//! `generate`, `solve` and `eval`.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use dynslam::builders::{build, Formulation};
use dynslam::eval::{camera_rpe, object_motion_rpe, object_pose_rpe, propagate_from_ground_truth};
use dynslam::io::{self, Metrics, ESTIMATES_FILE, METRICS_FILE};
use dynslam::sim::{generate, perturb_values, SceneConfig};
use dynslam::solver::{solve, SolveTrace};
use dynslam::SceneDataset;
use sha2::{Digest, Sha256};

use crate::experiment::{load_scene_config, ExperimentSpec};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{CliError, Result};

pub const EXPERIMENT_FILE: &str = "experiment.toml";
/// Dataset written next to the results when solving from a scene config.
pub const GENERATED_DATASET_FILE: &str = "dataset.txt";
pub const TABLES_FILE: &str = "tables.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug)]
pub struct GenerateSummary {
    pub path: PathBuf,
    pub sha256: String,
    pub steps: usize,
    pub objects: usize,
    pub static_tracklets: usize,
    pub dynamic_tracklets: usize,
    pub static_measurements: usize,
    pub dynamic_measurements: usize,
    pub motions: usize,
}

impl GenerateSummary {
    fn new(path: &Path, text: &str, d: &SceneDataset) -> Self {
        GenerateSummary {
            path: path.to_path_buf(),
            sha256: sha256_hex(text.as_bytes()),
            steps: d.num_steps(),
            objects: d.objects().len(),
            static_tracklets: d.static_tracks().len(),
            dynamic_tracklets: d.dynamic_tracks().len(),
            static_measurements: d.static_meas.len(),
            dynamic_measurements: d.dynamic_meas.len(),
            motions: d.motion_init.len(),
        }
    }
}

impl fmt::Display for GenerateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wrote {}", self.path.display())?;
        writeln!(f, "  sha256               {}", self.sha256)?;
        writeln!(f, "  steps                {}", self.steps)?;
        writeln!(f, "  objects              {}", self.objects)?;
        writeln!(f, "  static tracklets     {}", self.static_tracklets)?;
        writeln!(f, "  dynamic tracklets    {}", self.dynamic_tracklets)?;
        writeln!(f, "  static measurements  {}", self.static_measurements)?;
        writeln!(f, "  dynamic measurements {}", self.dynamic_measurements)?;
        write!(f, "  object motions       {}", self.motions)
    }
}

/// Simulates `config` and writes the dataset to `out`.
pub fn cmd_generate(config: &SceneConfig, out: &Path) -> Result<GenerateSummary> {
    let d = generate(config)?;
    let text = io::serialize_dataset(&d);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| dynslam::Error::io(parent, e))?;
    }
    io::write_file(out, &text)?;
    Ok(GenerateSummary::new(out, &text, &d))
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub formulation: Formulation,
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub trace: SolveTrace,
}

impl fmt::Display for SolveOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.trace;
        write!(
            f,
            "{:<12} chi2 {:.4e} -> {:.4e}  iterations {:>3}  steps {:>3}  rejected {:>3}  {}  {:.3} s  -> {}",
            self.formulation.name(),
            t.initial_chi2,
            t.final_chi2,
            t.iterations,
            t.steps,
            t.rejected_steps,
            t.stop_reason.name(),
            t.wall_time.as_secs_f64(),
            self.dir.display()
        )
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| dynslam::Error::io(p, e).into())
}

/// Loads (or generates) the dataset once and solves every selected formulation
/// on it concurrently, writing `out/<formulation>/`.
pub fn cmd_solve(spec: &ExperimentSpec) -> Result<Vec<SolveOutcome>> {
    spec.validate()?;
    fs::create_dir_all(&spec.out).map_err(|e| dynslam::Error::io(&spec.out, e))?;

    let mut saved = spec.clone();
    saved.out = absolute(&spec.out)?;
    let text = match (&spec.dataset, &spec.scene) {
        (Some(path), _) => {
            saved.dataset = Some(absolute(path)?);
            io::read_file(path)?
        }
        (None, Some(path)) => {
            saved.scene = Some(absolute(path)?);
            let mut config = load_scene_config(path)?;
            if let Some(seed) = spec.seed {
                config.seed = seed;
            }
            let text = io::serialize_dataset(&generate(&config)?);
            io::write_file(&spec.out.join(GENERATED_DATASET_FILE), &text)?;
            text
        }
        (None, None) => unreachable!("validated"),
    };
    io::write_file(&spec.out.join(EXPERIMENT_FILE), &saved.to_toml())?;

    let hash = sha256_hex(text.as_bytes());
    let dataset = io::parse_dataset(&text)?;
    let formulations = spec.formulation.formulations();
    let results: Vec<Result<SolveOutcome>> = thread::scope(|s| {
        let handles: Vec<_> = formulations
            .iter()
            .map(|&f| {
                let (dataset, hash) = (&dataset, &hash);
                s.spawn(move || solve_one(spec, dataset, hash, f))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    results.into_iter().collect()
}

fn solve_one(spec: &ExperimentSpec, dataset: &SceneDataset, hash: &str, f: Formulation) -> Result<SolveOutcome> {
    let solve_err = |source| CliError::Solve { formulation: f.name().into(), source };
    let problem = build(dataset, f, &spec.build)?;
    let p = &spec.perturbation;
    let initial = if p.is_zero() {
        problem.initial.clone()
    } else {
        perturb_values(&problem.initial, p.rot, p.trans, p.point, spec.perturbation_seed())?
    };
    let (values, trace) = solve(&problem.graph, &initial, &spec.solver).map_err(solve_err)?;
    let dir = spec.out.join(f.name());
    fs::create_dir_all(&dir).map_err(|e| dynslam::Error::io(&dir, e))?;
    io::write_results(&dir, &values, None, &trace)?;
    let manifest = RunManifest::new(hash, &problem, &trace);
    io::write_file(&dir.join(MANIFEST_FILE), &manifest.format())?;
    Ok(SolveOutcome { formulation: f, dir, manifest, trace })
}

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub dir: PathBuf,
    pub metrics: Metrics,
    /// Aligned text rendering of `metrics`.
    pub tables: String,
}

/// Scores `estimates` (a result directory or an estimates file) against the
/// dataset's ground truth. World-centric results carry no object poses, so
/// their trajectories are propagated from the ground-truth start pose.
pub fn cmd_eval(estimates: &Path, dataset: &Path, out: Option<&Path>, seq: Option<&str>) -> Result<EvalSummary> {
    let (est_file, default_dir) = if estimates.is_dir() {
        (estimates.join(ESTIMATES_FILE), estimates.to_path_buf())
    } else {
        (estimates.to_path_buf(), estimates.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let d = io::parse_dataset(&io::read_file(dataset)?)?;
    let gt = &d.ground_truth;
    if gt.cameras.is_empty() || gt.motions.is_empty() || gt.objects.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: ground truth incomplete (needs GT_CAM, GT_OBJ and GT_MOTION records)",
            dataset.display()
        )));
    }
    let est = io::read_estimates(&est_file)?;
    let camera = camera_rpe(&est.cameras, &gt.cameras)?;
    let motion = object_motion_rpe(&est.motions, &gt.motions)?;
    let (poses, note) = if est.objects.is_empty() {
        (propagate_from_ground_truth(&est.motions, &gt.objects)?, Some("propagated"))
    } else {
        (est.objects, None)
    };
    let pose = object_pose_rpe(&poses, &gt.objects)?;

    let seq = match seq {
        Some(s) => s.to_string(),
        None => dataset.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "seq".into()),
    };
    if seq.is_empty() || seq.contains(char::is_whitespace) || seq.contains('|') {
        return Err(CliError::Invalid(format!("sequence name `{seq}` must be non-empty without spaces or `|`")));
    }
    let metrics = Metrics::from_evaluation(&seq, &camera, &motion, &pose, note);
    let tables = render_tables(&metrics);
    let dir = out.map(Path::to_path_buf).unwrap_or(default_dir);
    fs::create_dir_all(&dir).map_err(|e| dynslam::Error::io(&dir, e))?;
    io::write_file(&dir.join(METRICS_FILE), &io::format_metrics(&metrics))?;
    io::write_file(&dir.join(TABLES_FILE), &tables)?;
    Ok(EvalSummary { dir, metrics, tables })
}

/// One aligned table per section, in the layout of camera / object-motion /
/// object-pose RPE tables.
pub fn render_tables(m: &Metrics) -> String {
    let mut out = String::new();
    for (section, title) in [("camera", "camera RPE"), ("motion", "object motion RPE"), ("pose", "object pose RPE")] {
        let rows: Vec<_> = m.rows.iter().filter(|r| r.section == section).collect();
        if rows.is_empty() {
            continue;
        }
        let width = rows.iter().map(|r| r.id.len()).max().unwrap_or(0).max(8);
        let _ = writeln!(out, "{title} (arithmetic mean over samples)");
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>12}  {:>7}  note", "id", "E_t [m]", "E_r [deg]", "samples");
        for r in rows {
            let (t, e) = match r.mean {
                Some((t, e)) => (format!("{t:.6}"), format!("{e:.6}")),
                None => ("-".into(), "-".into()),
            };
            let _ = writeln!(out, "{:<width$}  {t:>12}  {e:>12}  {:>7}  {}", r.id, r.samples, r.note.as_deref().unwrap_or(""));
        }
        out.push('\n');
    }
    out
}
