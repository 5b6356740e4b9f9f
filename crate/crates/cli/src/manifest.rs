//! `manifest.txt`: what was solved, from which bytes, and how it went.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dynslam::builders::{BuiltProblem, FactorRole};
use dynslam::solver::SolveTrace;

use crate::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const MANIFEST_HEADER: &str = "# dynslam run manifest v1";

/// Ordered `key=value` pairs; values never contain newlines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    pub entries: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(dataset_sha256: &str, problem: &BuiltProblem, trace: &SolveTrace) -> Self {
        let mut m = RunManifest::default();
        m.set("formulation", problem.formulation);
        m.set("dataset_sha256", dataset_sha256);
        let counts = &problem.manifest;
        m.set("variables", counts.total_variables());
        for (kind, n) in &counts.variables {
            m.set(format!("variables.{kind}"), n);
        }
        m.set("factors", counts.total_factors());
        for role in FactorRole::ALL {
            m.set(format!("factors.{}", role.name()), counts.factor_count(role));
        }
        let singles: Vec<String> = counts.single_observation_tracklets.iter().map(usize::to_string).collect();
        m.set("single_observation_tracklets", singles.join(","));
        m.set("initial_chi2", format!("{:e}", trace.initial_chi2));
        m.set("final_chi2", format!("{:e}", trace.final_chi2));
        m.set("iterations", trace.iterations);
        m.set("steps", trace.steps);
        m.set("rejected_steps", trace.rejected_steps);
        m.set("sign_flips", trace.sign_flips());
        m.set("converged", trace.converged);
        m.set("stop_reason", trace.stop_reason.name());
        m.set("wall_time_s", format!("{:.6}", trace.wall_time.as_secs_f64()));
        m
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key).ok_or_else(|| CliError::Invalid(format!("manifest has no `{key}`")))?;
        v.parse().map_err(|_| CliError::Invalid(format!("manifest `{key}={v}` is malformed")))
    }

    pub fn format(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest::default();
        for (n, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::from(dynslam::Error::Parse { line: n + 1, message: format!("`{line}` is not key=value") })
            })?;
            m.set(k, v);
        }
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        RunManifest::parse(&dynslam::io::read_file(&dir.join(MANIFEST_FILE))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_parse_round_trip() {
        let mut m = RunManifest::default();
        m.set("formulation", "world");
        m.set("steps", 12);
        let back = RunManifest::parse(&m.format()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.require::<usize>("steps").unwrap(), 12);
        assert!(back.require::<usize>("formulation").is_err());
        assert!(RunManifest::parse("no equals sign").is_err());
    }
}
