//! Line-oriented text formats: datasets, estimates and metrics.
//!
//! Records are whitespace separated and start with a tag; `#` starts a
//! comment. Reals are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly. Poses are `tx ty tz qx qy qz qw`.
//!
//! ```text
//! CAM_INIT k pose            ODOM k_prev k pose        MOTION_INIT j k_prev k pose
//! STATIC_MEAS i k x y z      DYN_MEAS i j k x y z
//! GT_CAM k pose              GT_OBJ j k pose           GT_MOTION j k_prev k pose
//! GT_POINT i k x y z
//! EST_CAM k pose             EST_OBJ j k pose          EST_MOTION j k_prev k pose
//! EST_POINT S i x y z        EST_POINT D i k x y z     EST_POINT L i j x y z
//! ```
//!
//! Output is canonical: records are grouped by tag in the order above and sorted
//! by their indices within a tag.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::dataset::SceneDataset;
use crate::error::{Error, Result};
use crate::eval::{Estimates, ObjectRpe, RpeSeries};
use crate::graph::{Values, Variable, VariableKey};
use crate::se3::{Point3, Pose};
use crate::solver::{export_trace, SolveTrace};

pub const DATASET_HEADER: &str = "# dynslam dataset v1";
pub const ESTIMATES_HEADER: &str = "# dynslam estimates v1";
pub const METRICS_HEADER: &str = "# dynslam metrics v1; E_t in m, E_r in degrees, means are arithmetic over samples";

/// Largest accepted deviation of a quaternion's norm from 1.
pub const QUATERNION_TOLERANCE: f64 = 1e-6;
/// Quaternions closer than this to unit norm are stored without renormalizing.
const QUATERNION_EXACT: f64 = 1e-9;

fn push_real(out: &mut String, x: f64) {
    let _ = write!(out, " {x:.16e}");
}

fn push_pose(out: &mut String, p: &Pose) {
    let t = p.translation();
    let q = p.quaternion();
    for x in [t.x, t.y, t.z, q.i, q.j, q.k, q.w] {
        push_real(out, x);
    }
}

fn push_point(out: &mut String, p: &Point3) {
    for x in p.iter() {
        push_real(out, *x);
    }
}

fn record(out: &mut String, tag: &str, indices: &[usize]) {
    out.push_str(tag);
    for i in indices {
        let _ = write!(out, " {i}");
    }
}

pub fn serialize_dataset(d: &SceneDataset) -> String {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    let pose_line = |out: &mut String, tag: &str, idx: &[usize], p: &Pose| {
        record(out, tag, idx);
        push_pose(out, p);
        out.push('\n');
    };
    for (&k, p) in &d.camera_init {
        pose_line(&mut out, "CAM_INIT", &[k], p);
    }
    for (&(kp, k), p) in &d.odometry {
        pose_line(&mut out, "ODOM", &[kp, k], p);
    }
    for (&(j, kp, k), p) in &d.motion_init {
        pose_line(&mut out, "MOTION_INIT", &[j, kp, k], p);
    }
    let point_line = |out: &mut String, tag: &str, idx: &[usize], p: &Point3| {
        record(out, tag, idx);
        push_point(out, p);
        out.push('\n');
    };
    for (&(i, k), z) in &d.static_meas {
        point_line(&mut out, "STATIC_MEAS", &[i, k], z);
    }
    for (&(i, j, k), z) in &d.dynamic_meas {
        point_line(&mut out, "DYN_MEAS", &[i, j, k], z);
    }
    let gt = &d.ground_truth;
    for (&k, p) in &gt.cameras {
        pose_line(&mut out, "GT_CAM", &[k], p);
    }
    for (&(j, k), p) in &gt.objects {
        pose_line(&mut out, "GT_OBJ", &[j, k], p);
    }
    for (&(j, kp, k), p) in &gt.motions {
        pose_line(&mut out, "GT_MOTION", &[j, kp, k], p);
    }
    for (&(i, k), p) in &gt.points {
        point_line(&mut out, "GT_POINT", &[i, k], p);
    }
    out
}

/// Tokens of one record with its 1-based line number for error reporting.
struct Line<'a> {
    number: usize,
    tag: &'a str,
    fields: Vec<&'a str>,
}

impl<'a> Line<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: self.number, message: message.into() }
    }

    fn expect_arity(&self, indices: usize, reals: usize) -> Result<()> {
        let want = indices + reals;
        if self.fields.len() != want {
            return Err(self.error(format!("{} expects {want} fields after the tag, found {}", self.tag, self.fields.len())));
        }
        Ok(())
    }

    fn index(&self, n: usize) -> Result<usize> {
        self.fields[n].parse().map_err(|_| self.error(format!("field {} of {}: `{}` is not an index", n + 1, self.tag, self.fields[n])))
    }

    fn indices<const N: usize>(&self) -> Result<[usize; N]> {
        let mut out = [0; N];
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = self.index(n)?;
        }
        Ok(out)
    }

    fn real(&self, n: usize) -> Result<f64> {
        match self.fields[n].parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.error(format!("field {} of {}: `{}` is not a finite number", n + 1, self.tag, self.fields[n]))),
        }
    }

    fn point(&self, start: usize) -> Result<Point3> {
        Ok(Point3::new(self.real(start)?, self.real(start + 1)?, self.real(start + 2)?))
    }

    fn pose(&self, start: usize) -> Result<Pose> {
        let t = Vector3::new(self.real(start)?, self.real(start + 1)?, self.real(start + 2)?);
        let [qx, qy, qz, qw] = [start + 3, start + 4, start + 5, start + 6].map(|n| self.real(n));
        let (qx, qy, qz, qw) = (qx?, qy?, qz?, qw?);
        let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
        let off = (norm - 1.0).abs();
        if off > QUATERNION_TOLERANCE {
            return Err(self.error(format!("quaternion norm {norm} is not 1 (tolerance {QUATERNION_TOLERANCE})")));
        }
        if off > QUATERNION_EXACT {
            Ok(Pose::from_raw_parts(t, qx / norm, qy / norm, qz / norm, qw / norm))
        } else {
            Ok(Pose::from_raw_parts(t, qx, qy, qz, qw))
        }
    }
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(n, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let tag = tokens.next()?;
        Some(Line { number: n + 1, tag, fields: tokens.collect() })
    })
}

fn insert_unique<K: Ord, V>(map: &mut BTreeMap<K, V>, key: K, value: V, line: &Line) -> Result<()> {
    if map.insert(key, value).is_some() {
        return Err(line.error(format!("duplicate {} record", line.tag)));
    }
    Ok(())
}

/// Parses a dataset and checks cross-record consistency.
pub fn parse_dataset(text: &str) -> Result<SceneDataset> {
    let mut d = SceneDataset::default();
    for line in lines(text) {
        match line.tag {
            "CAM_INIT" => {
                line.expect_arity(1, 7)?;
                let [k] = line.indices()?;
                insert_unique(&mut d.camera_init, k, line.pose(1)?, &line)?;
            }
            "ODOM" => {
                line.expect_arity(2, 7)?;
                let [kp, k] = line.indices()?;
                insert_unique(&mut d.odometry, (kp, k), line.pose(2)?, &line)?;
            }
            "MOTION_INIT" => {
                line.expect_arity(3, 7)?;
                let [j, kp, k] = line.indices()?;
                insert_unique(&mut d.motion_init, (j, kp, k), line.pose(3)?, &line)?;
            }
            "STATIC_MEAS" => {
                line.expect_arity(2, 3)?;
                let [i, k] = line.indices()?;
                insert_unique(&mut d.static_meas, (i, k), line.point(2)?, &line)?;
            }
            "DYN_MEAS" => {
                line.expect_arity(3, 3)?;
                let [i, j, k] = line.indices()?;
                insert_unique(&mut d.dynamic_meas, (i, j, k), line.point(3)?, &line)?;
            }
            "GT_CAM" => {
                line.expect_arity(1, 7)?;
                let [k] = line.indices()?;
                insert_unique(&mut d.ground_truth.cameras, k, line.pose(1)?, &line)?;
            }
            "GT_OBJ" => {
                line.expect_arity(2, 7)?;
                let [j, k] = line.indices()?;
                insert_unique(&mut d.ground_truth.objects, (j, k), line.pose(2)?, &line)?;
            }
            "GT_MOTION" => {
                line.expect_arity(3, 7)?;
                let [j, kp, k] = line.indices()?;
                insert_unique(&mut d.ground_truth.motions, (j, kp, k), line.pose(3)?, &line)?;
            }
            "GT_POINT" => {
                line.expect_arity(2, 3)?;
                let [i, k] = line.indices()?;
                insert_unique(&mut d.ground_truth.points, (i, k), line.point(2)?, &line)?;
            }
            other => return Err(line.error(format!("unknown tag `{other}`"))),
        }
    }
    d.validate()?;
    Ok(d)
}

/// Estimates in canonical order; an empty `Values` gives the header alone.
pub fn serialize_estimates(values: &Values) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    let tag_rank = |key: &VariableKey| match key {
        VariableKey::CameraPose(_) => 0,
        VariableKey::ObjectPose(..) => 1,
        VariableKey::ObjectMotion(..) => 2,
        VariableKey::StaticPoint(_) => 3,
        VariableKey::DynamicPointWorld(..) => 4,
        VariableKey::DynamicPointLocal(..) => 5,
    };
    let mut entries: Vec<(&VariableKey, &Variable)> = values.iter().collect();
    entries.sort_by_key(|(k, _)| (tag_rank(k), **k));
    for (key, var) in entries {
        match (*key, var) {
            (VariableKey::CameraPose(k), Variable::Pose(p)) => {
                record(&mut out, "EST_CAM", &[k]);
                push_pose(&mut out, p);
            }
            (VariableKey::ObjectPose(j, k), Variable::Pose(p)) => {
                record(&mut out, "EST_OBJ", &[j, k]);
                push_pose(&mut out, p);
            }
            (VariableKey::ObjectMotion(j, k), Variable::Pose(p)) => {
                record(&mut out, "EST_MOTION", &[j, k - 1, k]);
                push_pose(&mut out, p);
            }
            (VariableKey::StaticPoint(i), Variable::Point(p)) => {
                out.push_str("EST_POINT S");
                record(&mut out, "", &[i]);
                push_point(&mut out, p);
            }
            (VariableKey::DynamicPointWorld(i, k), Variable::Point(p)) => {
                out.push_str("EST_POINT D");
                record(&mut out, "", &[i, k]);
                push_point(&mut out, p);
            }
            (VariableKey::DynamicPointLocal(i, j), Variable::Point(p)) => {
                out.push_str("EST_POINT L");
                record(&mut out, "", &[i, j]);
                push_point(&mut out, p);
            }
            // Values built through the typed inserters never mix kinds.
            _ => unreachable!("variable {key} has the wrong type"),
        }
        out.push('\n');
    }
    out
}

pub fn parse_estimates(text: &str) -> Result<Values> {
    let mut values = Values::new();
    let mut insert = |key: VariableKey, var: Variable, line: &Line| {
        if values.contains(&key) {
            return Err(line.error(format!("duplicate estimate for {key}")));
        }
        match var {
            Variable::Pose(p) => values.insert_pose(key, p),
            Variable::Point(p) => values.insert_point(key, p),
        }
        Ok(())
    };
    for line in lines(text) {
        match line.tag {
            "EST_CAM" => {
                line.expect_arity(1, 7)?;
                let [k] = line.indices()?;
                insert(VariableKey::CameraPose(k), Variable::Pose(line.pose(1)?), &line)?;
            }
            "EST_OBJ" => {
                line.expect_arity(2, 7)?;
                let [j, k] = line.indices()?;
                insert(VariableKey::ObjectPose(j, k), Variable::Pose(line.pose(2)?), &line)?;
            }
            "EST_MOTION" => {
                line.expect_arity(3, 7)?;
                let [j, kp, k] = line.indices()?;
                if kp + 1 != k {
                    return Err(line.error("EST_MOTION must link consecutive steps"));
                }
                insert(VariableKey::ObjectMotion(j, k), Variable::Pose(line.pose(3)?), &line)?;
            }
            "EST_POINT" => {
                let Some(&kind) = line.fields.first() else {
                    return Err(line.error("EST_POINT needs a point type (S, D or L)"));
                };
                let rest = Line { number: line.number, tag: line.tag, fields: line.fields[1..].to_vec() };
                let key = match kind {
                    "S" => {
                        rest.expect_arity(1, 3)?;
                        VariableKey::StaticPoint(rest.index(0)?)
                    }
                    "D" => {
                        rest.expect_arity(2, 3)?;
                        let [i, k] = rest.indices()?;
                        VariableKey::DynamicPointWorld(i, k)
                    }
                    "L" => {
                        rest.expect_arity(2, 3)?;
                        let [i, j] = rest.indices()?;
                        VariableKey::DynamicPointLocal(i, j)
                    }
                    other => return Err(line.error(format!("unknown EST_POINT type `{other}`"))),
                };
                let offset = rest.fields.len() - 3;
                insert(key, Variable::Point(rest.point(offset)?), &line)?;
            }
            other => return Err(line.error(format!("unknown tag `{other}`"))),
        }
    }
    Ok(values)
}

/// One row of the metrics file.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    /// `camera`, `motion` or `pose`.
    pub section: String,
    /// `seq` for sequence-level rows, `seq|j` for object rows, `seq|mean` for the cross-object mean.
    pub id: String,
    /// `(E_t, E_r)`, absent when there are no samples.
    pub mean: Option<(f64, f64)>,
    pub samples: usize,
    /// Free-form marker such as `propagated` or `untracked`.
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub rows: Vec<MetricRow>,
}

impl Metrics {
    /// Rows for camera, per-object motion and per-object pose errors of one sequence.
    pub fn from_evaluation(
        seq: &str,
        camera: &RpeSeries,
        motion: &ObjectRpe,
        pose: &ObjectRpe,
        pose_note: Option<&str>,
    ) -> Metrics {
        let mut rows = vec![MetricRow {
            section: "camera".into(),
            id: seq.into(),
            mean: camera.mean(),
            samples: camera.samples.len(),
            note: None,
        }];
        for (section, rpe, note) in [("motion", motion, None), ("pose", pose, pose_note)] {
            for (j, series) in &rpe.per_object {
                let note = if series.samples.is_empty() { Some("untracked") } else { note };
                rows.push(MetricRow {
                    section: section.into(),
                    id: format!("{seq}|{j}"),
                    mean: series.mean(),
                    samples: series.samples.len(),
                    note: note.map(str::to_string),
                });
            }
            rows.push(MetricRow {
                section: section.into(),
                id: format!("{seq}|mean"),
                mean: rpe.mean(),
                samples: rpe.per_object.values().map(|s| s.samples.len()).sum(),
                note: note.map(str::to_string),
            });
        }
        Metrics { rows }
    }

    pub fn get(&self, section: &str, id: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.section == section && r.id == id)
    }
}

/// `key=value` rows, one per metric row.
pub fn format_metrics(m: &Metrics) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in &m.rows {
        let _ = write!(out, "section={} id={}", r.section, r.id);
        match r.mean {
            Some((t, e)) => {
                let _ = write!(out, " e_t={t:e} e_r={e:e}");
            }
            None => out.push_str(" e_t=none e_r=none"),
        }
        let _ = write!(out, " samples={}", r.samples);
        if let Some(note) = &r.note {
            let _ = write!(out, " note={note}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_metrics(text: &str) -> Result<Metrics> {
    let mut rows = Vec::new();
    for line in lines(text) {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for token in std::iter::once(line.tag).chain(line.fields.iter().copied()) {
            let (k, v) = token.split_once('=').ok_or_else(|| line.error(format!("`{token}` is not key=value")))?;
            if fields.insert(k, v).is_some() {
                return Err(line.error(format!("duplicate key `{k}`")));
            }
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| line.error(format!("missing `{k}`")));
        let real = |k: &str| -> Result<Option<f64>> {
            match get(k)? {
                "none" => Ok(None),
                v => v.parse().map(Some).map_err(|_| line.error(format!("`{k}={v}` is not a number"))),
            }
        };
        let mean = match (real("e_t")?, real("e_r")?) {
            (Some(t), Some(r)) => Some((t, r)),
            (None, None) => None,
            _ => return Err(line.error("e_t and e_r must both be present or both be none")),
        };
        rows.push(MetricRow {
            section: get("section")?.to_string(),
            id: get("id")?.to_string(),
            mean,
            samples: get("samples")?.parse().map_err(|_| line.error("`samples` is not a count"))?,
            note: fields.get("note").map(|s| s.to_string()),
        });
    }
    Ok(Metrics { rows })
}

pub const ESTIMATES_FILE: &str = "estimates.graph";
pub const METRICS_FILE: &str = "metrics.txt";
pub const TRACE_FILE: &str = "trace.csv";

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes estimates, trace and (when given) metrics into `dir`, creating it.
pub fn write_results(dir: &Path, estimates: &Values, metrics: Option<&Metrics>, trace: &SolveTrace) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(ESTIMATES_FILE), &serialize_estimates(estimates))?;
    write_file(&dir.join(TRACE_FILE), &export_trace(trace))?;
    if let Some(m) = metrics {
        write_file(&dir.join(METRICS_FILE), &format_metrics(m))?;
    }
    Ok(())
}

/// Camera, motion and object-pose trajectories read back from an estimates file.
pub fn read_estimates(path: &Path) -> Result<Estimates> {
    Ok(Estimates::from_values(&parse_estimates(&read_file(path)?)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_camera_record() {
        let d = parse_dataset("CAM_INIT 0 0 0 0 0 0 0 1\n").unwrap();
        assert_eq!(d.camera_init[&0], Pose::identity());
    }

    #[test]
    fn dynamic_measurement_record() {
        let text = "CAM_INIT 0 0 0 0 0 0 0 1\nCAM_INIT 1 0 0 0 0 0 0 1\nCAM_INIT 2 0 0 0 0 0 0 1\nCAM_INIT 3 0 0 0 0 0 0 1\n\
                    ODOM 0 1 0 0 0 0 0 0 1\nODOM 1 2 0 0 0 0 0 0 1\nODOM 2 3 0 0 0 0 0 0 1\nDYN_MEAS 7 2 3 1.0 2.0 3.0\n";
        let d = parse_dataset(text).unwrap();
        assert_eq!(d.dynamic_meas[&(7, 2, 3)], Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_dataset("# header\nCAM_INIT 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("CAM_INIT 0 0 0 0 0 0 0 1\nBOGUS 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("CAM_INIT 0 0 0 0 0 0 0 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_dataset("CAM_INIT 0 0 0 0 0 0 0 1\nCAM_INIT 0 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_estimates_are_header_only() {
        assert_eq!(serialize_estimates(&Values::new()), format!("{ESTIMATES_HEADER}\n"));
        assert!(parse_estimates(&serialize_estimates(&Values::new())).unwrap().is_empty());
    }
}
