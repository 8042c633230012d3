//! Problem-spec documents: a strict JSON schema and its resolution into
//! channels, instances, generator families and pipelines.
//!
//! Complex entries are written as `[re, im]` or as a bare real number.

use serde::Deserialize;
use thiserror::Error;

use crate::channel::{paulis, DensityMatrix, LinkingMapPair, Povm, QuantumChannel};
use crate::dynamics::{propagator, uniform_grid, GeneratorFamily, LindbladGenerator, OperatorNorm};
use crate::linalg::{ComplexMatrix, C64};
use crate::norm::OptBudget;
use crate::pipeline::{ClassicalProblem, InitializationMap, PipelineInstance};
use crate::qcc::{QccInstance, QccOptions};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column} (at `{path}`): {message}")]
    Parse { line: usize, column: usize, path: String, message: String },
    #[error("unsupported schema version {0:?}, expected \"1\"")]
    UnsupportedVersion(String),
    #[error("block `{block}`: {message}")]
    Block { block: String, message: String },
    #[error("command `{command}` needs the `{section}` section")]
    Missing { section: &'static str, command: String },
}

fn block_err(block: impl Into<String>, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Block { block: block.into(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> C64 {
        match self {
            Entry::Real(re) => C64::new(re, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// Row-major matrix, one inner list per row.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<Entry>>);

impl MatrixSpec {
    pub fn resolve(&self, block: &str) -> Result<ComplexMatrix, ConfigError> {
        let rows: Vec<Vec<C64>> = self.0.iter().map(|r| r.iter().map(|e| e.value()).collect()).collect();
        ComplexMatrix::from_rows(&rows).map_err(|e| block_err(block, e))
    }
}

fn vector(entries: &[Entry]) -> Vec<C64> {
    entries.iter().map(|e| e.value()).collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UnitarySpec {
    Identity(usize),
    PauliX,
    PauliY,
    PauliZ,
    Hadamard,
    /// `diag(1, e^{iθ})`.
    Phase(f64),
    Matrix(MatrixSpec),
}

impl UnitarySpec {
    pub fn resolve(&self, block: &str) -> Result<ComplexMatrix, ConfigError> {
        Ok(match self {
            UnitarySpec::Identity(d) => ComplexMatrix::identity(*d),
            UnitarySpec::PauliX => paulis::x(),
            UnitarySpec::PauliY => paulis::y(),
            UnitarySpec::PauliZ => paulis::z(),
            UnitarySpec::Hadamard => paulis::hadamard(),
            UnitarySpec::Phase(theta) => ComplexMatrix::from_diag(&[C64::new(1.0, 0.0), C64::from_polar(1.0, *theta)]),
            UnitarySpec::Matrix(m) => m.resolve(block)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity(usize),
    Unitary(UnitarySpec),
    Kraus(Vec<MatrixSpec>),
    BitFlip(f64),
    PhaseFlip(f64),
    AmplitudeDamping(f64),
    Depolarizing { dim: usize, p: f64 },
    CompletelyDepolarizing(usize),
    Iid { channel: Box<ChannelSpec>, sites: usize },
    Propagator { generator: GeneratorSpec, time: f64 },
}

impl ChannelSpec {
    pub fn resolve(&self, block: &str) -> Result<QuantumChannel, ConfigError> {
        let wrap = |e: crate::channel::ChannelError| block_err(block, e);
        Ok(match self {
            ChannelSpec::Identity(d) => QuantumChannel::identity(*d),
            ChannelSpec::Unitary(u) => QuantumChannel::unitary(&u.resolve(block)?).map_err(wrap)?,
            ChannelSpec::Kraus(ops) => {
                let ops = ops.iter().map(|m| m.resolve(block)).collect::<Result<Vec<_>, _>>()?;
                QuantumChannel::from_kraus(ops).map_err(wrap)?
            }
            ChannelSpec::BitFlip(q) => QuantumChannel::bit_flip(*q).map_err(wrap)?,
            ChannelSpec::PhaseFlip(q) => QuantumChannel::phase_flip(*q).map_err(wrap)?,
            ChannelSpec::AmplitudeDamping(g) => QuantumChannel::amplitude_damping(*g).map_err(wrap)?,
            ChannelSpec::Depolarizing { dim, p } => QuantumChannel::depolarizing(*dim, *p).map_err(wrap)?,
            ChannelSpec::CompletelyDepolarizing(d) => QuantumChannel::completely_depolarizing(*d),
            ChannelSpec::Iid { channel, sites } => {
                if *sites == 0 {
                    return Err(block_err(block, "sites must be positive"));
                }
                QuantumChannel::iid_noise(&channel.resolve(block)?, *sites)
            }
            ChannelSpec::Propagator { generator, time } => {
                propagator(&generator.resolve(block)?, *time).map_err(|e| block_err(block, e))?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Damping(f64),
    BitFlipRate(f64),
    Dephasing(f64),
    Precession(f64),
    Lindblad {
        hamiltonian: MatrixSpec,
        #[serde(default)]
        jumps: Vec<MatrixSpec>,
    },
    Iid {
        generator: Box<GeneratorSpec>,
        sites: usize,
    },
    Sum(Vec<GeneratorSpec>),
}

impl GeneratorSpec {
    pub fn resolve(&self, block: &str) -> Result<LindbladGenerator, ConfigError> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(block_err(block, format!("{name} must be finite and non-negative, got {v}")))
            }
        };
        Ok(match self {
            GeneratorSpec::Damping(g) => LindbladGenerator::damping(nonneg("gamma", *g)?),
            GeneratorSpec::BitFlipRate(r) => LindbladGenerator::bit_flip_rate(nonneg("rate", *r)?),
            GeneratorSpec::Dephasing(r) => LindbladGenerator::dephasing(nonneg("rate", *r)?),
            GeneratorSpec::Precession(w) => LindbladGenerator::precession(*w),
            GeneratorSpec::Lindblad { hamiltonian, jumps } => {
                let h = hamiltonian.resolve(block)?;
                let jumps = jumps.iter().map(|m| m.resolve(block)).collect::<Result<Vec<_>, _>>()?;
                LindbladGenerator::new(h, jumps).map_err(|e| block_err(block, e))?
            }
            GeneratorSpec::Iid { generator, sites } => {
                if *sites == 0 {
                    return Err(block_err(block, "sites must be positive"));
                }
                generator.resolve(block)?.iid(*sites)
            }
            GeneratorSpec::Sum(parts) => {
                let mut parts = parts.iter().map(|g| g.resolve(block));
                let first = parts.next().ok_or_else(|| block_err(block, "empty generator sum"))??;
                parts.try_fold(first, |acc, g| acc.plus(&g?).map_err(|e| block_err(block, e)))?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitLinks {
    pub encode: ChannelSpec,
    pub decode: ChannelSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LinksSpec {
    /// Identity links on the unitary's dimension.
    Trivial,
    /// Three-qubit bit-flip code around one logical qubit.
    Repetition,
    Explicit(ExplicitLinks),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetSpec {
    pub restarts: usize,
    pub iterations: usize,
    pub step: f64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        let b = OptBudget::default();
        Self { restarts: b.restarts, iterations: b.iterations, step: b.step }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifierSpec {
    pub bruteforce_resolution: usize,
    pub diamond: bool,
}

impl Default for VerifierSpec {
    fn default() -> Self {
        let o = QccOptions::default();
        Self { bruteforce_resolution: o.bruteforce_resolution, diamond: o.with_diamond }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    So,
    Diamond,
    Trace,
}

impl std::str::FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "so" => Ok(NormKind::So),
            "diamond" => Ok(NormKind::Diamond),
            "trace" => Ok(NormKind::Trace),
            other => Err(format!("unknown norm kind {other:?}, expected so, diamond or trace")),
        }
    }
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::So => "so",
            NormKind::Diamond => "diamond",
            NormKind::Trace => "trace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Basis(usize),
    MaximallyMixed,
    Vector(Vec<Entry>),
    Matrix(MatrixSpec),
}

impl StateSpec {
    pub fn resolve(&self, dim: usize, block: &str) -> Result<DensityMatrix, ConfigError> {
        let state = match self {
            StateSpec::Basis(k) if *k < dim => DensityMatrix::basis(dim, *k),
            StateSpec::Basis(k) => return Err(block_err(block, format!("basis index {k} out of range for dim {dim}"))),
            StateSpec::MaximallyMixed => DensityMatrix::maximally_mixed(dim),
            StateSpec::Vector(v) => DensityMatrix::pure(&vector(v)).map_err(|e| block_err(block, e))?,
            StateSpec::Matrix(m) => DensityMatrix::new(m.resolve(block)?).map_err(|e| block_err(block, e))?,
        };
        if state.dim() != dim {
            return Err(block_err(block, format!("state has dim {}, channel acts on dim {dim}", state.dim())));
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    #[serde(default)]
    pub kind: NormKind,
    /// Map subtracted from the channel; defaults to the unitary's channel, or the identity.
    pub reference: Option<ChannelSpec>,
    /// Input state for `trace`.
    pub state: Option<StateSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Damping rate of `|1⟩ → |0⟩`.
    Gamma,
    /// Bit-flip jump rate.
    FlipRate,
    /// Coherence decay rate.
    DephasingRate,
    /// Precession frequency.
    Omega,
}

impl std::str::FromStr for SweepParameter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gamma" => Ok(SweepParameter::Gamma),
            "flip_rate" => Ok(SweepParameter::FlipRate),
            "dephasing_rate" => Ok(SweepParameter::DephasingRate),
            "omega" => Ok(SweepParameter::Omega),
            other => {
                Err(format!("unknown sweep parameter {other:?}, expected gamma, flip_rate, dephasing_rate or omega"))
            }
        }
    }
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Gamma => "gamma",
            SweepParameter::FlipRate => "flip_rate",
            SweepParameter::DephasingRate => "dephasing_rate",
            SweepParameter::Omega => "omega",
        }
    }

    fn generator(self, z: f64) -> LindbladGenerator {
        match self {
            SweepParameter::Gamma => LindbladGenerator::damping(z),
            SweepParameter::FlipRate => LindbladGenerator::bit_flip_rate(z),
            SweepParameter::DephasingRate => LindbladGenerator::dephasing(z),
            SweepParameter::Omega => LindbladGenerator::precession(z),
        }
    }

    fn requires_nonnegative(self) -> bool {
        !matches!(self, SweepParameter::Omega)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Uniform { start: f64, stop: f64, count: usize },
    Values(Vec<f64>),
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            GridSpec::Uniform { start, stop, count } => uniform_grid(*start, *stop, *count),
            GridSpec::Values(v) => v.clone(),
        }
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;
    /// `start:stop:count` or a comma-separated list of values.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |part: &str| format!("grid: cannot parse {part:?} as a number");
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("grid {s:?} must look like start:stop:count"));
            }
            let start = parts[0].trim().parse().map_err(|_| bad(parts[0]))?;
            let stop = parts[1].trim().parse().map_err(|_| bad(parts[1]))?;
            let count = parts[2].trim().parse().map_err(|_| bad(parts[2]))?;
            Ok(GridSpec::Uniform { start, stop, count })
        } else {
            s.split(',')
                .map(|p| p.trim().parse().map_err(|_| bad(p)))
                .collect::<Result<Vec<f64>, _>>()
                .map(GridSpec::Values)
        }
    }
}

fn default_lambdas() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: Option<SweepParameter>,
    pub grid: Option<GridSpec>,
    /// Defaults to the first grid point.
    pub baseline: Option<f64>,
    pub time: f64,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub resolvent_norm: OperatorNorm,
    /// Independent copies of the single-qubit family member.
    #[serde(default = "one")]
    pub sites: usize,
    /// Fixed generator added to every family member.
    pub background: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// `values[k]` is the output for `inputs[k]`.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PreparationSpec {
    /// Input `k` prepares `|k⟩`.
    #[default]
    Computational,
    Vectors(Vec<Vec<Entry>>),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReadoutSpec {
    #[default]
    Computational,
    /// `E_y = r|y⟩⟨y| + (1-r)/(d-1) Σ_{k≠y} |k⟩⟨k|`.
    NoisyComputational {
        accuracy: f64,
    },
    Effects(Vec<MatrixSpec>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub preparation: PreparationSpec,
    #[serde(default)]
    pub readout: ReadoutSpec,
    pub p_budget: f64,
    pub trials: Option<usize>,
    pub repeats: Option<usize>,
}

fn default_version() -> String {
    SCHEMA_VERSION.to_string()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    #[serde(default = "default_version")]
    pub version: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: BudgetSpec,
    pub unitary: Option<UnitarySpec>,
    pub channel: Option<ChannelSpec>,
    pub generator: Option<GeneratorSpec>,
    pub time: Option<f64>,
    pub links: Option<LinksSpec>,
    pub alpha_budget: Option<f64>,
    #[serde(default)]
    pub verifier: VerifierSpec,
    pub norm: Option<NormSpec>,
    pub sweep: Option<SweepSpec>,
    pub pipeline: Option<PipelineSpec>,
}

/// Parses and validates a document; every present section is resolved once so
/// dimension errors surface here, naming the block.
pub fn parse_spec(text: &str) -> Result<SpecDocument, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: SpecDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let full = inner.to_string();
        let suffix = format!(" at line {line} column {column}");
        let message = full.strip_suffix(&suffix).unwrap_or(&full).to_string();
        ConfigError::Parse { line, column, path, message }
    })?;
    doc.validate()?;
    Ok(doc)
}

impl SpecDocument {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(ConfigError::UnsupportedVersion(self.version.clone()));
        }
        self.budget(0).validate_for("budget")?;
        if self.unitary.is_some() {
            self.unitary()?;
        }
        if self.channel.is_some() || self.generator.is_some() || self.time.is_some() {
            self.implementation()?;
        }
        if self.unitary.is_some() && self.links.is_some() {
            self.links()?;
        }
        if self.unitary.is_some() && (self.channel.is_some() || self.generator.is_some()) {
            self.qcc_instance()?;
        }
        if let Some(norm) = &self.norm {
            self.norm_delta_parts(norm.kind)?;
        }
        if self.sweep.is_some() {
            self.sweep_family(None, None)?;
        }
        if self.pipeline.is_some() {
            self.pipeline_instance()?;
        }
        Ok(())
    }

    /// Optimizer budget from the document with the given seed.
    pub fn budget(&self, seed: u64) -> OptBudget {
        OptBudget { restarts: self.budget.restarts, iterations: self.budget.iterations, step: self.budget.step, seed }
    }

    pub fn verifier_options(&self) -> QccOptions {
        QccOptions { bruteforce_resolution: self.verifier.bruteforce_resolution, with_diamond: self.verifier.diamond }
    }

    pub fn unitary(&self) -> Result<ComplexMatrix, ConfigError> {
        let spec = self.unitary.as_ref().ok_or(ConfigError::Missing { section: "unitary", command: String::new() })?;
        spec.resolve("unitary")
    }

    /// The implementation channel: `channel`, or `generator` run for `time`.
    pub fn implementation(&self) -> Result<QuantumChannel, ConfigError> {
        match (&self.channel, &self.generator, self.time) {
            (Some(c), None, None) => c.resolve("channel"),
            (None, Some(g), Some(t)) => propagator(&g.resolve("generator")?, t).map_err(|e| block_err("generator", e)),
            (None, Some(_), None) => Err(block_err("generator", "a generator needs `time`")),
            (None, None, Some(_)) => Err(block_err("time", "`time` needs a `generator`")),
            (Some(_), _, _) => Err(block_err("channel", "give either `channel` or `generator` with `time`, not both")),
            (None, None, None) => Err(ConfigError::Missing { section: "channel", command: String::new() }),
        }
    }

    pub fn links(&self) -> Result<LinkingMapPair, ConfigError> {
        match self.links.as_ref().unwrap_or(&LinksSpec::Trivial) {
            LinksSpec::Trivial => Ok(LinkingMapPair::trivial(self.unitary()?.rows())),
            LinksSpec::Repetition => Ok(LinkingMapPair::repetition_code()),
            LinksSpec::Explicit(ExplicitLinks { encode, decode }) => {
                LinkingMapPair::new(encode.resolve("links.explicit.encode")?, decode.resolve("links.explicit.decode")?)
                    .map_err(|e| block_err("links", e))
            }
        }
    }

    pub fn qcc_instance(&self) -> Result<QccInstance, ConfigError> {
        let u = self.unitary()?;
        let links = self.links()?;
        if u.rows() != links.dim_logical() {
            return Err(block_err(
                "unitary",
                format!("unitary acts on dim {}, links expect logical dim {}", u.rows(), links.dim_logical()),
            ));
        }
        let p = self.implementation()?;
        if p.dim_in() != links.dim_comp() {
            let block = if self.channel.is_some() { "channel" } else { "generator" };
            return Err(block_err(
                block,
                format!(
                    "implementation acts on dim {}, links expect computational dim {}",
                    p.dim_in(),
                    links.dim_comp()
                ),
            ));
        }
        let budget = self.alpha_budget.unwrap_or(0.0);
        QccInstance::new(u, p, links, budget).map_err(|e| block_err("alpha_budget", e))
    }

    /// Target and links with an identity implementation, for commands that
    /// supply the implementation themselves.
    pub fn qcc_template(&self) -> Result<QccInstance, ConfigError> {
        let u = self.unitary()?;
        let links = self.links()?;
        let dim = links.dim_comp();
        QccInstance::new(u, QuantumChannel::identity(dim), links, self.alpha_budget.unwrap_or(0.0))
            .map_err(|e| block_err("unitary", e))
    }

    /// The channel and reference map compared by the `norm` command, plus the
    /// input state when the kind needs one.
    pub fn norm_delta_parts(
        &self,
        kind: NormKind,
    ) -> Result<(QuantumChannel, QuantumChannel, Option<DensityMatrix>), ConfigError> {
        let channel = self.implementation()?;
        let norm = self.norm.clone().unwrap_or_default();
        let reference = match (&norm.reference, &self.unitary) {
            (Some(r), _) => r.resolve("norm.reference")?,
            (None, Some(_)) => QuantumChannel::unitary(&self.unitary()?).map_err(|e| block_err("unitary", e))?,
            (None, None) => QuantumChannel::identity(channel.dim_in()),
        };
        if reference.dim_in() != channel.dim_in() || reference.dim_out() != channel.dim_out() {
            return Err(block_err(
                "norm.reference",
                format!("reference acts on dim {}, channel on dim {}", reference.dim_in(), channel.dim_in()),
            ));
        }
        let state = match (&norm.state, kind) {
            (Some(s), _) => Some(s.resolve(channel.dim_in(), "norm.state")?),
            (None, NormKind::Trace) => return Err(block_err("norm.state", "kind `trace` needs an input state")),
            (None, _) => None,
        };
        Ok((channel, reference, state))
    }

    /// Family, grid, time and baseline for the `sweep` command, with optional
    /// parameter and grid overrides.
    pub fn sweep_family(
        &self,
        parameter: Option<SweepParameter>,
        grid: Option<&GridSpec>,
    ) -> Result<ResolvedSweep, ConfigError> {
        let spec = self.sweep.as_ref().ok_or(ConfigError::Missing { section: "sweep", command: "sweep".into() })?;
        let parameter =
            parameter.or(spec.parameter).ok_or_else(|| block_err("sweep.parameter", "no sweep parameter given"))?;
        let points = grid.or(spec.grid.as_ref()).ok_or_else(|| block_err("sweep.grid", "no grid given"))?.points();
        if points.is_empty() {
            return Err(block_err("sweep.grid", "grid is empty"));
        }
        if let Some(bad) = points.iter().find(|z| !z.is_finite() || (parameter.requires_nonnegative() && **z < 0.0)) {
            return Err(block_err("sweep.grid", format!("grid value {bad} is invalid for {}", parameter.name())));
        }
        if spec.sites == 0 {
            return Err(block_err("sweep.sites", "sites must be positive"));
        }
        if !(spec.time.is_finite() && spec.time >= 0.0) {
            return Err(block_err("sweep.time", format!("time must be non-negative, got {}", spec.time)));
        }
        if let Some(bad) = spec.lambdas.iter().find(|l| l.is_nan() || **l <= 0.0) {
            return Err(block_err("sweep.lambdas", format!("lambda must be positive, got {bad}")));
        }
        let baseline = spec.baseline.unwrap_or(points[0]);
        let background = spec.background.as_ref().map(|g| g.resolve("sweep.background")).transpose()?;
        let sites = spec.sites;
        let family = GeneratorFamily::new(parameter.name(), points, move |z| {
            let member = parameter.generator(z).iid(sites);
            match &background {
                Some(b) => member.plus(b),
                None => Ok(member),
            }
        })
        .map_err(|e| block_err("sweep", e))?;
        Ok(ResolvedSweep {
            family,
            time: spec.time,
            baseline,
            lambdas: spec.lambdas.clone(),
            resolvent_norm: spec.resolvent_norm,
        })
    }

    /// Pipeline instance; its device is the `qcc` instance of this document.
    pub fn pipeline_instance(&self) -> Result<PipelineInstance, ConfigError> {
        let spec =
            self.pipeline.as_ref().ok_or(ConfigError::Missing { section: "pipeline", command: "pipeline".into() })?;
        let device = self.qcc_instance()?;
        let dim = device.dim_logical();
        let ProblemSpec { inputs, outputs, values } = &spec.problem;
        let problem = ClassicalProblem::new(inputs.clone(), outputs.clone(), values.clone())
            .map_err(|e| block_err("pipeline.problem", e))?;
        let init = match &spec.preparation {
            PreparationSpec::Computational => {
                if inputs.len() > dim {
                    return Err(block_err(
                        "pipeline.preparation",
                        format!("{} inputs do not fit in {dim} basis states", inputs.len()),
                    ));
                }
                InitializationMap::computational(dim, inputs.len())
            }
            PreparationSpec::Vectors(vs) => {
                let states = vs
                    .iter()
                    .map(|v| DensityMatrix::pure(&vector(v)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| block_err("pipeline.preparation", e))?;
                InitializationMap::new(states).map_err(|e| block_err("pipeline.preparation", e))?
            }
        };
        let readout = match &spec.readout {
            ReadoutSpec::Computational => {
                if outputs.len() != dim {
                    return Err(block_err(
                        "pipeline.readout",
                        format!("computational readout on dim {dim} needs {dim} outputs, got {}", outputs.len()),
                    ));
                }
                Povm::computational(outputs.clone())
            }
            ReadoutSpec::NoisyComputational { accuracy } => {
                if outputs.len() != dim || dim < 2 {
                    return Err(block_err(
                        "pipeline.readout",
                        format!("noisy computational readout on dim {dim} needs {dim} outputs, got {}", outputs.len()),
                    ));
                }
                let off = (1.0 - accuracy) / (dim - 1) as f64;
                let effects = (0..dim)
                    .map(|y| {
                        let diag: Vec<f64> = (0..dim).map(|k| if k == y { *accuracy } else { off }).collect();
                        ComplexMatrix::from_real_diag(&diag)
                    })
                    .collect();
                Povm::new(outputs.clone(), effects)
            }
            ReadoutSpec::Effects(ms) => {
                let effects = ms.iter().map(|m| m.resolve("pipeline.readout")).collect::<Result<Vec<_>, _>>()?;
                Povm::new(outputs.clone(), effects)
            }
        }
        .map_err(|e| block_err("pipeline.readout", e))?;
        PipelineInstance::new(problem, init, device, readout, spec.p_budget).map_err(|e| block_err("pipeline", e))
    }
}

trait ValidateFor {
    fn validate_for(&self, block: &str) -> Result<(), ConfigError>;
}

impl ValidateFor for OptBudget {
    fn validate_for(&self, block: &str) -> Result<(), ConfigError> {
        if self.restarts == 0 {
            return Err(block_err(block, "restarts must be positive"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(block_err(block, format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedSweep {
    pub family: GeneratorFamily,
    pub time: f64,
    pub baseline: f64,
    pub lambdas: Vec<f64>,
    pub resolvent_norm: OperatorNorm,
}
