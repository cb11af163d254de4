//! Plain-text run configuration.
//!
//! The format is line-based: `[section]` headers, `key = value` pairs,
//! `#` comments. Repeated keys accumulate (generator and velocity rows).
//! Sections: `[chain]`, `[velocity]`, `[space]`, `[test_function]`,
//! `[expansion]`, `[sweep]`, `[solve]`, `[mc]`, `[tolerances]`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::builtin::builtin_model;
use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::grid::{ModeGrid, TestFunction, Wave};
use crate::scalar::{real, Real};
use crate::tol::Tolerances;

/// Where the chain comes from.
#[derive(Debug, Clone, Serialize)]
pub enum ModelSpec {
    Builtin(String),
    Explicit {
        generator_rows: Vec<Vec<f64>>,
        velocity_rows: Vec<Vec<f64>>,
    },
}

/// Test-function specification; `CsvPath` must be resolved to `Samples`
/// before materialization (the library does no file IO).
#[derive(Debug, Clone, Serialize)]
pub enum TestFunctionSpec {
    Sine(Wave),
    Cosine(Wave),
    Constant(f64),
    GaussianBump(f64),
    /// Offset plus sine/cosine terms: `(wave, amplitude)` pairs.
    Poly {
        offset: f64,
        sines: Vec<(Wave, f64)>,
        cosines: Vec<(Wave, f64)>,
    },
    CsvPath(String),
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    pub time: f64,
    pub orders: Vec<usize>,
    pub min_slope: Vec<f64>,
    pub min_r_squared: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            eps: vec![0.2, 0.1, 0.05, 0.025],
            time: 1.0,
            orders: vec![0, 1, 2],
            min_slope: vec![],
            min_r_squared: 0.98,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSection {
    pub eps: f64,
    pub time: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            eps: 0.1,
            time: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McSection {
    pub paths: usize,
    pub seed: u64,
    pub points: usize,
    pub time: f64,
    pub eps: f64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 42,
            points: 20,
            time: 1.0,
            eps: 0.1,
        }
    }
}

/// Fully resolved run configuration; embedded into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Spatial dimension; defaults to the model's natural dimension.
    pub dim: Option<usize>,
    pub modes_per_axis: usize,
    pub test_function: TestFunctionSpec,
    pub order: usize,
    pub sweep: SweepSection,
    pub solve: SolveSection,
    pub mc: McSection,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn model<T: Real>(&self) -> Result<ChainModel<T>> {
        match &self.model {
            ModelSpec::Builtin(name) => builtin_model(name, &self.tolerances),
            ModelSpec::Explicit {
                generator_rows,
                velocity_rows,
            } => {
                let n = generator_rows.len();
                if n == 0 || generator_rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(
                        "generator rows must form a square matrix".into(),
                    ));
                }
                if velocity_rows.is_empty() || velocity_rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!(
                        "velocity rows must each have {n} entries"
                    )));
                }
                let q = DMatrix::from_fn(n, n, |i, j| real::<T>(generator_rows[i][j]));
                let d = velocity_rows.len();
                let a = DMatrix::from_fn(d, n, |i, j| real::<T>(velocity_rows[i][j]));
                ChainModel::new(q, a, &self.tolerances)
            }
        }
    }

    pub fn grid<T: Real>(&self, model: &ChainModel<T>) -> Result<ModeGrid> {
        let dim = self.dim.unwrap_or(model.dim());
        if dim != model.dim() {
            return Err(Error::Config(format!(
                "configured dimension {dim} does not match the model dimension {}",
                model.dim()
            )));
        }
        ModeGrid::new(dim, self.modes_per_axis)
    }

    pub fn test_function<T: Real>(&self, grid: &ModeGrid) -> Result<TestFunction<T>> {
        match &self.test_function {
            TestFunctionSpec::Sine(k) => TestFunction::sine(grid, *k),
            TestFunctionSpec::Cosine(k) => TestFunction::cosine(grid, *k),
            TestFunctionSpec::Constant(c) => Ok(TestFunction::constant(grid, real(*c))),
            TestFunctionSpec::GaussianBump(w) => TestFunction::gaussian_bump(grid, real(*w)),
            TestFunctionSpec::Poly {
                offset,
                sines,
                cosines,
            } => {
                let mut f = TestFunction::constant(grid, real(*offset));
                let mut coeffs = f.coeffs().to_vec();
                for (k, amp) in sines {
                    let s = TestFunction::<T>::sine(grid, *k)?;
                    for (c, sc) in coeffs.iter_mut().zip(s.coeffs()) {
                        *c += *sc * crate::scalar::lift(real::<T>(*amp));
                    }
                }
                for (k, amp) in cosines {
                    let s = TestFunction::<T>::cosine(grid, *k)?;
                    for (c, sc) in coeffs.iter_mut().zip(s.coeffs()) {
                        *c += *sc * crate::scalar::lift(real::<T>(*amp));
                    }
                }
                f = TestFunction::from_coeffs("poly", grid, coeffs)?;
                Ok(f)
            }
            TestFunctionSpec::Samples(values) => {
                let samples: Vec<T> = values.iter().map(|&v| real(v)).collect();
                TestFunction::from_samples("csv", grid, &samples)
            }
            TestFunctionSpec::CsvPath(path) => Err(Error::Config(format!(
                "test-function samples at `{path}` must be loaded before materialization"
            ))),
        }
    }
}

fn parse(text: &str) -> Result<RunConfig> {
    let mut section = String::new();
    let mut builtin: Option<String> = None;
    let mut declared_n: Option<usize> = None;
    let mut q_rows: Vec<Vec<f64>> = vec![];
    let mut a_rows: Vec<Vec<f64>> = vec![];
    let mut dim: Option<usize> = None;
    let mut modes_per_axis = 33usize;
    let mut tf_kind: Option<String> = None;
    let mut tf_wave: Wave = [1, 0, 0];
    let mut tf_value = 1.0f64;
    let mut tf_width = 0.8f64;
    let mut tf_path: Option<String> = None;
    let mut tf_offset = 0.0f64;
    let mut tf_sines: Vec<(Wave, f64)> = vec![];
    let mut tf_cosines: Vec<(Wave, f64)> = vec![];
    let mut order = 4usize;
    let mut sweep = SweepSection::default();
    let mut solve = SolveSection::default();
    let mut mc = McSection::default();
    let mut tolerances = Tolerances::default();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let key = key.trim();
        let value = value.trim();

        let parse_f64 =
            |v: &str| -> Result<f64> { v.parse().map_err(|_| err(format!("bad number `{v}`"))) };
        let parse_usize =
            |v: &str| -> Result<usize> { v.parse().map_err(|_| err(format!("bad integer `{v}`"))) };
        let parse_floats = |v: &str| -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|x| x.parse().map_err(|_| err(format!("bad number `{x}`"))))
                .collect()
        };
        let parse_wave = |v: &str| -> Result<Wave> {
            let parts: Vec<i64> = v
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| err(format!("bad wavevector `{v}`"))))
                .collect::<Result<_>>()?;
            if parts.is_empty() || parts.len() > 3 {
                return Err(err(format!("wavevector needs 1..=3 entries, got `{v}`")));
            }
            let mut k = [0i64; 3];
            k[..parts.len()].copy_from_slice(&parts);
            Ok(k)
        };

        match (section.as_str(), key) {
            ("chain", "builtin") => builtin = Some(value.to_string()),
            ("chain", "n") => declared_n = Some(parse_usize(value)?),
            ("chain", "q_row") => q_rows.push(parse_floats(value)?),
            ("velocity", "a_row") => a_rows.push(parse_floats(value)?),
            ("space", "d") => dim = Some(parse_usize(value)?),
            ("space", "modes") => modes_per_axis = parse_usize(value)?,
            ("test_function", "kind") => tf_kind = Some(value.to_string()),
            ("test_function", "k") => tf_wave = parse_wave(value)?,
            ("test_function", "value") => tf_value = parse_f64(value)?,
            ("test_function", "width") => tf_width = parse_f64(value)?,
            ("test_function", "path") => tf_path = Some(value.to_string()),
            ("test_function", "offset") => tf_offset = parse_f64(value)?,
            ("test_function", "sin") => {
                let parts = parse_floats(value)?;
                let (wave, amp) = split_wave_amp(&parts).map_err(&err)?;
                tf_sines.push((wave, amp));
            }
            ("test_function", "cos") => {
                let parts = parse_floats(value)?;
                let (wave, amp) = split_wave_amp(&parts).map_err(&err)?;
                tf_cosines.push((wave, amp));
            }
            ("expansion", "order") => order = parse_usize(value)?,
            ("sweep", "eps") => sweep.eps = parse_floats(value)?,
            ("sweep", "time") => sweep.time = parse_f64(value)?,
            ("sweep", "orders") => {
                sweep.orders = value
                    .split_whitespace()
                    .map(|x| x.parse().map_err(|_| err(format!("bad order `{x}`"))))
                    .collect::<Result<_>>()?
            }
            ("sweep", "min_slope") => sweep.min_slope = parse_floats(value)?,
            ("sweep", "min_r_squared") => sweep.min_r_squared = parse_f64(value)?,
            ("solve", "eps") => solve.eps = parse_f64(value)?,
            ("solve", "time") => solve.time = parse_f64(value)?,
            ("mc", "paths") => mc.paths = parse_usize(value)?,
            ("mc", "seed") => {
                mc.seed = value
                    .parse()
                    .map_err(|_| err(format!("bad seed `{value}`")))?
            }
            ("mc", "points") => mc.points = parse_usize(value)?,
            ("mc", "time") => mc.time = parse_f64(value)?,
            ("mc", "eps") => mc.eps = parse_f64(value)?,
            ("tolerances", k) => {
                let v = parse_f64(value)?;
                tolerances.set(k, v).map_err(err)?;
            }
            (s, k) => {
                return Err(err(format!("unknown key `{k}` in section `[{s}]`")));
            }
        }
    }

    if let Some(n) = declared_n {
        if !q_rows.is_empty() && q_rows.len() != n {
            return Err(Error::Config(format!(
                "declared n = {n} but {} generator rows were given",
                q_rows.len()
            )));
        }
    }
    let model = match (builtin, q_rows.is_empty()) {
        (Some(name), true) => ModelSpec::Builtin(name),
        (None, false) => {
            if a_rows.is_empty() {
                return Err(Error::Config(
                    "explicit models need velocity rows in [velocity]".into(),
                ));
            }
            ModelSpec::Explicit {
                generator_rows: q_rows,
                velocity_rows: a_rows,
            }
        }
        (Some(_), false) => {
            return Err(Error::Config(
                "give either a builtin name or explicit q_row lines, not both".into(),
            ));
        }
        (None, true) => {
            return Err(Error::Config(
                "the [chain] section needs `builtin = ...` or q_row lines".into(),
            ));
        }
    };

    let test_function = match tf_kind.as_deref() {
        None | Some("sine") | Some("sin_k") => TestFunctionSpec::Sine(tf_wave),
        Some("cosine") => TestFunctionSpec::Cosine(tf_wave),
        Some("constant") => TestFunctionSpec::Constant(tf_value),
        Some("gaussian_bump") => TestFunctionSpec::GaussianBump(tf_width),
        Some("poly") => TestFunctionSpec::Poly {
            offset: tf_offset,
            sines: tf_sines,
            cosines: tf_cosines,
        },
        Some("csv") => TestFunctionSpec::CsvPath(
            tf_path
                .ok_or_else(|| Error::Config("test_function kind csv needs `path = ...`".into()))?,
        ),
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown test function kind `{other}`"
            )));
        }
    };

    if order > 8 {
        return Err(Error::Config(format!(
            "expansion order {order} exceeds the hard cap of 8"
        )));
    }

    Ok(RunConfig {
        model,
        dim,
        modes_per_axis,
        test_function,
        order,
        sweep,
        solve,
        mc,
        tolerances,
    })
}

fn split_wave_amp(parts: &[f64]) -> std::result::Result<(Wave, f64), String> {
    if parts.len() < 2 || parts.len() > 4 {
        return Err(format!(
            "expected `k... amplitude` with 1..=3 wave entries, got {} numbers",
            parts.len()
        ));
    }
    let (wave_part, amp) = parts.split_at(parts.len() - 1);
    let mut k = [0i64; 3];
    for (slot, &v) in k.iter_mut().zip(wave_part) {
        if v.fract() != 0.0 {
            return Err(format!("wavevector entries must be integers, got {v}"));
        }
        *slot = v as i64;
    }
    Ok((k, amp[0]))
}
