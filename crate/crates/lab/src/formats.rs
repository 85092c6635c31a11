//! Instance and experiment file formats.

use std::path::{Path, PathBuf};

use marstrand_core::conformal::TLaw;
use marstrand_core::exactlin::{format_rational, parse_rational, BlockStructure, Rational, RationalMatrix};
use marstrand_core::fractal::{SelfSimilarSpec, Similarity, ScaleRange};
use marstrand_core::mstar::DimensionVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

/// A rational written as `"p/q"`, `"p"`, or a bare JSON integer.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RatText {
    Int(i64),
    Text(String),
}

impl RatText {
    pub fn parse(&self, field: &str) -> LabResult<Rational> {
        match self {
            RatText::Int(v) => Ok(marstrand_core::exactlin::int(*v)),
            RatText::Text(t) => parse_rational(t).map_err(|_| LabError::field(field, format!("not a rational: {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub k: usize,
    pub blocks: Vec<usize>,
    pub matrix: Vec<Vec<RatText>>,
    #[serde(default)]
    pub dims: Option<Vec<RatText>>,
    #[serde(default)]
    pub s: Option<RatText>,
}

/// A validated instance. Surjectivity is checked by the commands, not here.
#[derive(Debug, Clone)]
pub struct Instance {
    pub pi: RationalMatrix,
    pub blocks: BlockStructure,
    pub dims: Option<DimensionVector>,
    pub s: Option<Rational>,
}

#[derive(Serialize)]
struct Canonical<'a> {
    k: usize,
    blocks: &'a [usize],
    matrix: Vec<Vec<String>>,
    dims: Option<Vec<String>>,
    s: Option<String>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> LabResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Json { path: path.to_path_buf(), source: e })
}

pub fn parse_matrix(k: usize, cols: usize, rows: &[Vec<RatText>]) -> LabResult<RationalMatrix> {
    if rows.len() != k {
        return Err(LabError::field("matrix", format!("expected {k} rows, got {}", rows.len())));
    }
    let mut entries = Vec::with_capacity(k * cols);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(LabError::field(format!("matrix[{r}]"), format!("expected {cols} entries (sum of blocks), got {}", row.len())));
        }
        for (c, v) in row.iter().enumerate() {
            entries.push(v.parse(&format!("matrix[{r}][{c}]"))?);
        }
    }
    Ok(RationalMatrix::from_entries(k, cols, entries)?)
}

pub fn parse_dims(field: &str, values: &[RatText], n: usize) -> LabResult<DimensionVector> {
    if values.len() != n {
        return Err(LabError::field(field, format!("expected {n} entries (one per block), got {}", values.len())));
    }
    let d = values.iter().enumerate().map(|(i, v)| v.parse(&format!("{field}[{i}]"))).collect::<LabResult<Vec<_>>>()?;
    DimensionVector::new(d).map_err(|e| LabError::field(field, e.to_string()))
}

/// Comma- or space-separated rationals, as given to `--dims`.
pub fn parse_rational_list(field: &str, text: &str) -> LabResult<Vec<RatText>> {
    let items: Vec<RatText> = text.split([',', ' ']).filter(|t| !t.is_empty()).map(|t| RatText::Text(t.to_string())).collect();
    if items.is_empty() {
        return Err(LabError::field(field, "empty list"));
    }
    Ok(items)
}

pub fn parse_rational_arg(field: &str, text: &str) -> LabResult<Rational> {
    RatText::Text(text.to_string()).parse(field)
}

impl InstanceFile {
    pub fn validate(&self) -> LabResult<Instance> {
        if self.blocks.is_empty() {
            return Err(LabError::field("blocks", "at least one block required"));
        }
        if self.blocks.contains(&0) {
            return Err(LabError::field("blocks", "block sizes must be positive"));
        }
        if self.k == 0 {
            return Err(LabError::field("k", "must be positive"));
        }
        let blocks = BlockStructure::new(self.blocks.clone(), self.k).map_err(|e| LabError::field("blocks", e.to_string()))?;
        let pi = parse_matrix(self.k, blocks.total_dim(), &self.matrix)?;
        let dims = self.dims.as_ref().map(|d| parse_dims("dims", d, blocks.n())).transpose()?;
        let s = self.s.as_ref().map(|s| s.parse("s")).transpose()?;
        if s.as_ref().is_some_and(|s| *s < marstrand_core::exactlin::int(0)) {
            return Err(LabError::field("s", "must be nonnegative"));
        }
        Ok(Instance { pi, blocks, dims, s })
    }
}

pub fn load_instance(path: &Path) -> LabResult<Instance> {
    read_json::<InstanceFile>(path)?.validate()
}

impl Instance {
    pub fn require_dims(&self) -> LabResult<&DimensionVector> {
        self.dims.as_ref().ok_or_else(|| LabError::field("dims", "required (in the instance file or via --dims)"))
    }

    pub fn require_s(&self) -> LabResult<&Rational> {
        self.s.as_ref().ok_or_else(|| LabError::field("s", "required (in the instance file or via --s)"))
    }

    /// Hex sha256 of the canonical JSON form (lowest-terms rationals, fixed key order).
    pub fn digest(&self) -> String {
        let matrix = (0..self.pi.rows()).map(|r| self.pi.row(r).iter().map(format_rational).collect()).collect();
        let c = Canonical {
            k: self.blocks.k(),
            blocks: self.blocks.sizes(),
            matrix,
            dims: self.dims.as_ref().map(|d| d.as_slice().iter().map(format_rational).collect()),
            s: self.s.as_ref().map(format_rational),
        };
        sha256_hex(serde_json::to_string(&c).expect("serializable").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short digest of a parameter vector from its little-endian bytes.
pub fn f64_digest(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256_hex(&bytes)[..16].to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub ratio: f64,
    pub translation: Vec<f64>,
    #[serde(default)]
    pub rotation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpecConfig {
    MiddleThird,
    /// Two maps with similarity dimension `s` on `[0, 1]`.
    Dimension { s: f64 },
    Uniform { maps: usize, ratio: f64 },
    General { ambient_dim: usize, maps: Vec<MapConfig> },
}

impl SpecConfig {
    pub fn build(&self, field: &str) -> LabResult<SelfSimilarSpec> {
        let wrap = |e: marstrand_core::Error| LabError::field(field, e.to_string());
        match self {
            SpecConfig::MiddleThird => Ok(SelfSimilarSpec::middle_third()),
            SpecConfig::Dimension { s } => SelfSimilarSpec::two_map_cantor(*s).map_err(wrap),
            SpecConfig::Uniform { maps, ratio } => SelfSimilarSpec::uniform_cantor(*maps, *ratio).map_err(wrap),
            SpecConfig::General { ambient_dim, maps } => {
                let maps = maps
                    .iter()
                    .map(|m| {
                        let rotation = m
                            .rotation
                            .as_ref()
                            .map(|r| marstrand_core::conformal::Rotation::from_entries(*ambient_dim, r.clone()))
                            .transpose()
                            .map_err(wrap)?;
                        Ok(Similarity { ratio: m.ratio, translation: m.translation.clone(), rotation })
                    })
                    .collect::<LabResult<Vec<_>>>()?;
                SelfSimilarSpec::new(*ambient_dim, maps, "general").map_err(wrap)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Dimension runs: allowed `|slope − 𝔪|`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Fraction of trials that must meet the per-trial threshold.
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    /// Positive-measure runs: per-trial coverage threshold.
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    /// Positive-measure runs: coverage required of the λ = identity control.
    #[serde(default = "default_control")]
    pub control: f64,
}

fn default_tolerance() -> f64 {
    0.08
}
fn default_fraction() -> f64 {
    0.9
}
fn default_coverage() -> f64 {
    0.3
}
fn default_control() -> f64 {
    0.95
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { tolerance: 0.08, fraction: 0.9, coverage: 0.3, control: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleWindow {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Path to an instance file, relative to the config file.
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<RatText>>>,
    pub specs: Vec<SpecConfig>,
    pub trials: usize,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub depths: Option<Vec<usize>>,
    pub seed: u64,
    #[serde(default)]
    pub t_law: Option<String>,
    #[serde(default)]
    pub scale_window: Option<ScaleWindow>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// A validated experiment: everything needed to build an `ExperimentSetup`.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub instance: Instance,
    pub specs: Vec<SelfSimilarSpec>,
    pub trials: usize,
    pub depths: Vec<usize>,
    pub seed: u64,
    pub t_law: TLaw,
    pub scale_window: Option<ScaleRange>,
    pub budget: Option<usize>,
    pub out: Option<PathBuf>,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn validate(&self, base: &Path) -> LabResult<Experiment> {
        if self.trials == 0 {
            return Err(LabError::field("trials", "must be positive"));
        }
        if self.specs.is_empty() {
            return Err(LabError::field("specs", "at least one spec required"));
        }
        let specs = self.specs.iter().enumerate().map(|(i, s)| s.build(&format!("specs[{i}]"))).collect::<LabResult<Vec<_>>>()?;
        let blocks: Vec<usize> = specs.iter().map(|s| s.ambient_dim).collect();
        let instance = match (&self.instance, self.k, &self.matrix) {
            (Some(path), None, None) => {
                let inst = load_instance(&base.join(path))?;
                if inst.blocks.sizes() != blocks.as_slice() {
                    return Err(LabError::field("specs", format!("ambient dims {blocks:?} do not match instance blocks {:?}", inst.blocks.sizes())));
                }
                Instance { dims: None, s: None, ..inst }
            }
            (None, Some(k), Some(matrix)) => InstanceFile { k, blocks, matrix: matrix.clone(), dims: None, s: None }.validate()?,
            (Some(_), _, _) => return Err(LabError::field("instance", "give either `instance` or inline `k` and `matrix`, not both")),
            _ => return Err(LabError::field("instance", "missing: give `instance` or inline `k` and `matrix`")),
        };
        let depths = match (self.depth, &self.depths) {
            (Some(d), None) => vec![d],
            (None, Some(ds)) if !ds.is_empty() => ds.clone(),
            (None, Some(_)) => return Err(LabError::field("depths", "must be nonempty")),
            (Some(_), Some(_)) => return Err(LabError::field("depth", "give either `depth` or `depths`, not both")),
            (None, None) => return Err(LabError::field("depth", "missing")),
        };
        if depths.contains(&0) {
            return Err(LabError::field("depth", "must be positive"));
        }
        let t_law = match &self.t_law {
            None => TLaw::EXPERIMENT_DEFAULT,
            Some(t) => t.parse().map_err(|e: marstrand_core::Error| LabError::field("t_law", e.to_string()))?,
        };
        let scale_window = match self.scale_window {
            Some(w) if w.min > w.max => return Err(LabError::field("scale_window", "min exceeds max")),
            Some(w) => Some(ScaleRange { min: w.min, max: w.max }),
            None => None,
        };
        if self.budget == Some(0) {
            return Err(LabError::field("budget", "must be positive"));
        }
        let th = self.thresholds;
        if !(0.0..=1.0).contains(&th.fraction) || !(0.0..=1.0).contains(&th.coverage) || !(0.0..=1.0).contains(&th.control) || th.tolerance.is_nan() || th.tolerance < 0.0 {
            return Err(LabError::field("thresholds", "fractions must lie in [0, 1] and the tolerance must be nonnegative"));
        }
        Ok(Experiment {
            instance,
            specs,
            trials: self.trials,
            depths,
            seed: self.seed,
            t_law,
            scale_window,
            budget: self.budget,
            out: self.out.as_ref().map(|p| base.join(p)),
            thresholds: th,
        })
    }
}

pub fn load_experiment(path: &Path) -> LabResult<Experiment> {
    let base = path.parent().unwrap_or(Path::new("."));
    read_json::<ExperimentConfig>(path)?.validate(base)
}
