//! Example runs, CSV records and convergence-rate fits.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use crate::adaptivity::{run, AdaptiveConfig, Estimate, IterationRecord, RunFailure, RunRecord};
use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchicalBasis, SubdomainHierarchy, DEFAULT_MAX_DEPTH};
use crate::registry::{find, initial_space, ExampleSpec};
use crate::tensor::TensorFunction;

pub const CSV_HEADER: &str = "iter,dofs,elements,levels,energy_error,estimator,efficiency,marked,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Adaptive,
    Uniform,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Mode::Adaptive),
            "uniform" => Ok(Mode::Uniform),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Adaptive => "adaptive",
            Mode::Uniform => "uniform",
        })
    }
}

/// Settings of one example run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: String,
    pub degree: usize,
    pub mode: Mode,
    pub theta: f64,
    /// Largest space solved after the initial one.
    pub max_dofs: Option<usize>,
    /// Stop once the global indicator is at most this value.
    pub tol: f64,
    /// Stop once the energy error is at most this value.
    pub error_tol: f64,
    pub init_elems: Option<usize>,
    pub max_iterations: usize,
    /// Cap on the number of hierarchy levels.
    pub max_depth: usize,
    /// Directory receiving one indicator dump per iteration.
    pub dump_indicators: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(example: &str, degree: usize, mode: Mode) -> Self {
        Self {
            example: example.to_string(),
            degree,
            mode,
            theta: 0.5,
            max_dofs: None,
            tol: 0.0,
            error_tol: 0.0,
            init_elems: None,
            max_iterations: 200,
            max_depth: DEFAULT_MAX_DEPTH,
            dump_indicators: None,
        }
    }

    /// Applies `key = value` settings (as read by [`parse_key_values`]).
    pub fn apply(&mut self, settings: &BTreeMap<String, String>) -> Result<()> {
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse(format!("bad value `{v}` for `{k}`")))
        }
        for (k, v) in settings {
            match k.as_str() {
                "example" => self.example = v.clone(),
                "degree" => self.degree = num(k, v)?,
                "mode" => self.mode = v.parse()?,
                "theta" => self.theta = num(k, v)?,
                "max_dofs" | "max-dofs" => self.max_dofs = Some(num(k, v)?),
                "tol" => self.tol = num(k, v)?,
                "error_tol" | "error-tol" => self.error_tol = num(k, v)?,
                "init_elems" | "init-elems" => self.init_elems = Some(num(k, v)?),
                "max_iterations" | "max-iterations" => self.max_iterations = num(k, v)?,
                "max_depth" | "max-depth" => self.max_depth = num(k, v)?,
                "dump_indicators" | "dump-indicators" => self.dump_indicators = Some(PathBuf::from(v)),
                _ => return Err(Error::Parse(format!("unknown setting `{k}`"))),
            }
        }
        Ok(())
    }
}

/// Reads a flat `key = value` file; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Initial discretization of an example.
pub fn initial_discretization(
    spec: &ExampleSpec,
    degree: usize,
    init_elems: Option<usize>,
    max_depth: usize,
) -> Result<Discretization> {
    let space = initial_space(spec.map, degree, init_elems.unwrap_or(spec.init_elems))?;
    let hierarchy = SubdomainHierarchy::new(space).with_max_depth(max_depth)?;
    Discretization::new(HierarchicalBasis::build(hierarchy), spec.geometry())
}

/// Runs an example in adaptive or uniform mode.
pub fn run_example(config: &RunConfig) -> std::result::Result<RunRecord, RunFailure> {
    let fail = |error| RunFailure { error, partial: RunRecord::default() };
    let spec = find(&config.example).map_err(fail)?;
    let max_dofs = config.max_dofs.unwrap_or(spec.default_max_dofs);
    let initial = initial_discretization(&spec, config.degree, config.init_elems, config.max_depth).map_err(fail)?;
    let adaptive = AdaptiveConfig {
        theta: config.theta,
        max_dofs,
        estimator_tol: config.tol,
        error_tol: config.error_tol,
        max_iterations: config.max_iterations,
        ..Default::default()
    };
    let dump = config.dump_indicators.clone();
    if let Some(dir) = &dump {
        fs::create_dir_all(dir).map_err(|e| fail(e.into()))?;
    }
    let mut iter = 0usize;
    let mut dump_error = None;
    let mut observer = |disc: &Discretization, est: &Estimate, _: &[TensorFunction]| {
        if let Some(dir) = &dump {
            let path = dir.join(format!("indicators_{iter:03}.txt"));
            let res = fs::File::create(&path).and_then(|f| est.indicators.write_dump(std::io::BufWriter::new(f), disc.dim()));
            if let Err(e) = res {
                dump_error.get_or_insert(e);
            }
        }
        iter += 1;
    };
    let record = match config.mode {
        Mode::Adaptive => run(initial, &spec.problem, &adaptive, Some(&mut observer)),
        Mode::Uniform => run_uniform(initial, &spec, &adaptive, max_dofs, &mut observer),
    }?;
    if let Some(e) = dump_error {
        return Err(RunFailure { error: e.into(), partial: record });
    }
    Ok(record)
}

/// Global dyadic refinement: iteration `k` solves on the single-level space
/// with `2^k` times the initial elements, up to `max_dofs` functions.
fn run_uniform(
    initial: Discretization,
    spec: &ExampleSpec,
    config: &AdaptiveConfig,
    max_dofs: usize,
    observer: &mut dyn FnMut(&Discretization, &Estimate, &[TensorFunction]),
) -> std::result::Result<RunRecord, RunFailure> {
    let mut record = RunRecord::default();
    let base = initial.basis.space(0);
    for k in 0..config.max_iterations.max(1) as u32 {
        let space = base.at_level(k);
        if k > 0 && space.num_functions() as usize > max_dofs {
            break;
        }
        let start = Instant::now();
        let step = space
            .to_base()
            .and_then(|s| Discretization::new(HierarchicalBasis::build(SubdomainHierarchy::new(s)), initial.map))
            .and_then(|disc| crate::adaptivity::solve_and_estimate(&disc, &spec.problem, &config.solver).map(|e| (disc, e)));
        let (disc, est) = match step {
            Ok(v) => v,
            Err(error) => return Err(RunFailure { error, partial: record }),
        };
        observer(&disc, &est, &[]);
        let global = est.indicators.global();
        record.rows.push(IterationRecord {
            iter: k as usize,
            dofs: disc.num_dofs(),
            elements: disc.mesh.len(),
            levels: 1,
            energy_error: est.energy_error,
            estimator: global,
            efficiency: est.energy_error.filter(|e| *e > 0.0).map(|e| global / e),
            marked: 0,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if est.energy_error.is_some_and(|e| e <= config.error_tol) || global <= config.estimator_tol {
            break;
        }
    }
    Ok(record)
}

/// Least-squares slope of `log(error)` against `log(DOFs)`.
///
/// Uses the last `window` iterations with at least `min_dofs` DOFs and a
/// positive error; at least three are required.
pub fn fit_rate(record: &RunRecord, window: usize, min_dofs: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> = record
        .rows
        .iter()
        .filter(|r| r.dofs >= min_dofs)
        .filter_map(|r| r.energy_error.filter(|e| *e > 0.0).map(|e| ((r.dofs as f64).ln(), e.ln())))
        .collect();
    let pts = &pts[pts.len().saturating_sub(window)..];
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable iterations for a rate fit, need 3",
            pts.len()
        )));
    }
    Ok(slope(pts))
}

pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Default fit window and DOF threshold.
pub const RATE_WINDOW: usize = 5;
pub const RATE_MIN_DOFS: usize = 500;

/// Estimator over energy error for every iteration where the error is positive.
pub fn efficiency_series(record: &RunRecord) -> Vec<f64> {
    record.rows.iter().filter_map(|r| r.efficiency).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(record: &RunRecord, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &record.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.dofs,
            r.elements,
            r.levels,
            fmt_opt(r.energy_error),
            r.estimator,
            fmt_opt(r.efficiency),
            r.marked,
            r.wall_ms
        )?;
    }
    Ok(())
}

pub fn csv_string(record: &RunRecord) -> String {
    let mut v = Vec::new();
    write_csv(record, &mut v).expect("writing to memory");
    String::from_utf8(v).expect("ASCII output")
}

pub fn parse_csv(text: &str) -> Result<RunRecord> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Parse("missing or unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse(format!("row {}: expected 9 fields", n + 1)));
        }
        let bad = |i: usize| Error::Parse(format!("row {}: bad field `{}`", n + 1, f[i]));
        let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad(i));
        let real = |i: usize| f[i].parse::<f64>().map_err(|_| bad(i));
        let opt = |i: usize| if f[i].is_empty() { Ok(None) } else { real(i).map(Some) };
        rows.push(IterationRecord {
            iter: int(0)?,
            dofs: int(1)?,
            elements: int(2)?,
            levels: int(3)?,
            energy_error: opt(4)?,
            estimator: real(5)?,
            efficiency: opt(6)?,
            marked: int(7)?,
            wall_ms: real(8)?,
        });
    }
    Ok(RunRecord { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(rows: &[(usize, f64)]) -> RunRecord {
        RunRecord {
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, &(dofs, err))| IterationRecord {
                    iter: i,
                    dofs,
                    elements: dofs,
                    levels: 1,
                    energy_error: Some(err),
                    estimator: 2.0 * err,
                    efficiency: Some(2.0),
                    marked: 1,
                    wall_ms: 0.5,
                })
                .collect(),
        }
    }

    #[test]
    fn rate_of_synthetic_record() {
        let r = synthetic(&[(600, 1.0 / 600.0), (1200, 1.0 / 1200.0), (5000, 1.0 / 5000.0), (9000, 1.0 / 9000.0)]);
        assert!((fit_rate(&r, 5, 500).unwrap() + 1.0).abs() < 1e-12);
        let short = synthetic(&[(600, 1.0), (100, 2.0), (900, 0.5)]);
        assert!(matches!(fit_rate(&short, 5, 500), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn csv_round_trip() {
        let mut r = synthetic(&[(16, 0.1), (40, 0.012345678901234567)]);
        r.rows[1].energy_error = None;
        r.rows[1].efficiency = None;
        let text = csv_string(&r);
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.contains(",,"));
        assert_eq!(parse_csv(&text).unwrap(), r);
        assert!(parse_csv("iter,dofs\n").is_err());
    }

    #[test]
    fn key_value_settings() {
        let kv = parse_key_values("# run\nexample = lshape\ndegree=3\nmode = uniform # note\n").unwrap();
        let mut c = RunConfig::new("gaussian-square", 2, Mode::Adaptive);
        c.apply(&kv).unwrap();
        assert_eq!(c.example, "lshape");
        assert_eq!(c.degree, 3);
        assert_eq!(c.mode, Mode::Uniform);
        assert!(parse_key_values("novalue").is_err());
        let mut kv = BTreeMap::new();
        kv.insert("colour".to_string(), "red".to_string());
        assert!(c.apply(&kv).is_err());
    }

    #[test]
    fn efficiency_series_skips_missing() {
        let mut r = synthetic(&[(16, 0.1), (40, 0.01)]);
        r.rows[0].efficiency = None;
        assert_eq!(efficiency_series(&r), vec![2.0]);
    }
}
