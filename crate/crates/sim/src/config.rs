//! Experiment configuration: TOML schema, validation, and derived
//! parameters. Unknown keys are rejected, and settings that leave the
//! regime the convergence guarantees assume are reported as warnings
//! rather than silently accepted.

use std::path::PathBuf;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use ppsl_core::env::OptionSet;
use ppsl_core::protocol::ProtocolParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("graph kind {kind} requires key `{key}`")]
    MissingGraphKey {
        kind: &'static str,
        key: &'static str,
    },
    #[error("graph kind {kind} does not use key `{key}`")]
    UnusedGraphKey {
        kind: &'static str,
        key: &'static str,
    },
    #[error("options need `etas` or `m`")]
    MissingOptions,
    #[error("`etas` has {etas} entries but `m` = {m}")]
    OptionCountMismatch { etas: usize, m: usize },
    #[error("invalid option set: {0}")]
    Options(#[from] ppsl_core::env::EnvError),
    #[error("invalid protocol parameters: {0}")]
    Protocol(#[from] ppsl_core::protocol::ProtocolError),
    #[error("{0}")]
    Invalid(String),
}

/// Top-level experiment description, loaded from TOML.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub options: OptionsConfig,
    pub protocol: ProtocolConfig,
    pub dissemination: DisseminationConfig,
    #[serde(default)]
    pub walk: WalkConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.graph.validate_keys()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    ErdosRenyi,
    RandomRegular,
    EdgeList,
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::ErdosRenyi => "erdos_renyi",
            GraphKind::RandomRegular => "random_regular",
            GraphKind::EdgeList => "edge_list",
        }
    }
}

/// Graph source. Which keys are required depends on `kind`; supplying a
/// key the kind does not use is an error, matching the strict treatment
/// of unknown keys elsewhere.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: GraphKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl GraphConfig {
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Self {
        Self {
            kind: GraphKind::ErdosRenyi,
            n: Some(n),
            p: Some(p),
            d: None,
            seed: Some(seed),
            path: None,
        }
    }

    pub fn random_regular(n: usize, d: u32, seed: u64) -> Self {
        Self {
            kind: GraphKind::RandomRegular,
            n: Some(n),
            p: None,
            d: Some(d),
            seed: Some(seed),
            path: None,
        }
    }

    pub fn edge_list(path: PathBuf) -> Self {
        Self {
            kind: GraphKind::EdgeList,
            n: None,
            p: None,
            d: None,
            seed: None,
            path: Some(path),
        }
    }

    pub fn validate_keys(&self) -> Result<(), ConfigError> {
        let kind = self.kind.name();
        let need = |present: bool, key: &'static str| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::MissingGraphKey { kind, key })
            }
        };
        let forbid = |absent: bool, key: &'static str| {
            if absent {
                Ok(())
            } else {
                Err(ConfigError::UnusedGraphKey { kind, key })
            }
        };
        match self.kind {
            GraphKind::ErdosRenyi => {
                need(self.n.is_some(), "n")?;
                need(self.p.is_some(), "p")?;
                need(self.seed.is_some(), "seed")?;
                forbid(self.d.is_none(), "d")?;
                forbid(self.path.is_none(), "path")
            }
            GraphKind::RandomRegular => {
                need(self.n.is_some(), "n")?;
                need(self.d.is_some(), "d")?;
                need(self.seed.is_some(), "seed")?;
                forbid(self.p.is_none(), "p")?;
                forbid(self.path.is_none(), "path")
            }
            GraphKind::EdgeList => {
                need(self.path.is_some(), "path")?;
                forbid(self.n.is_none(), "n")?;
                forbid(self.p.is_none(), "p")?;
                forbid(self.d.is_none(), "d")?;
                forbid(self.seed.is_none(), "seed")
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    /// Explicit quality probabilities, best first by convention.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    /// Option count; without `etas` the qualities default to a linear
    /// spread from 0.9 down to 0.5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl OptionsConfig {
    pub fn build(&self) -> Result<OptionSet, ConfigError> {
        match (&self.etas, self.m) {
            (Some(etas), Some(m)) if etas.len() != m => Err(ConfigError::OptionCountMismatch {
                etas: etas.len(),
                m,
            }),
            (Some(etas), _) => Ok(OptionSet::new(etas.clone())?),
            (None, Some(m)) => Ok(OptionSet::with_default_etas(m)?),
            (None, None) => Err(ConfigError::MissingOptions),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Privacy budget per round; the string "infinity" disables
    /// perturbation for no-privacy baselines.
    pub epsilon: EpsilonSpec,
    pub beta: f64,
    pub mu: f64,
}

impl ProtocolConfig {
    pub fn build(&self) -> Result<ProtocolParams, ConfigError> {
        Ok(ProtocolParams::new(self.epsilon.0, self.beta, self.mu)?)
    }
}

/// Privacy budget that may be infinite. Serializes as the number, or as
/// the string "infinity" when infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSpec(pub f64);

impl Serialize for EpsilonSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            serializer.serialize_str("infinity")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for EpsilonSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(EpsilonSpec(v)),
            Raw::Text(s) if s == "infinity" || s == "inf" => Ok(EpsilonSpec(f64::INFINITY)),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "epsilon must be a number or \"infinity\", got \"{s}\""
            ))),
        }
    }
}

impl std::str::FromStr for EpsilonSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "infinity" || s == "inf" {
            return Ok(EpsilonSpec(f64::INFINITY));
        }
        s.parse::<f64>()
            .map(EpsilonSpec)
            .map_err(|e| format!("bad epsilon value {s:?}: {e}"))
    }
}

/// Choice of the per-agent walk count scale g(N): `"log2"` for ln^2 N,
/// `"sqrt"` for N^(1/2), or an explicit number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GChoice {
    Log2,
    Sqrt,
    Explicit(f64),
}

impl GChoice {
    pub fn value(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            GChoice::Log2 => nf.ln() * nf.ln(),
            GChoice::Sqrt => nf.sqrt(),
            GChoice::Explicit(v) => *v,
        }
    }

    pub fn label(&self) -> String {
        match self {
            GChoice::Log2 => "log2".into(),
            GChoice::Sqrt => "sqrt".into(),
            GChoice::Explicit(v) => format!("{v}"),
        }
    }
}

impl Serialize for GChoice {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            GChoice::Log2 => serializer.serialize_str("log2"),
            GChoice::Sqrt => serializer.serialize_str("sqrt"),
            GChoice::Explicit(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for GChoice {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) if v > 0.0 => Ok(GChoice::Explicit(v)),
            Raw::Number(v) => Err(D::Error::custom(format!("g must be positive, got {v}"))),
            Raw::Text(s) => s.parse().map_err(D::Error::custom),
        }
    }
}

impl std::str::FromStr for GChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log2" => Ok(GChoice::Log2),
            "sqrt" => Ok(GChoice::Sqrt),
            other => other
                .parse::<f64>()
                .map(GChoice::Explicit)
                .map_err(|_| format!("g must be \"log2\", \"sqrt\", or a number, got {other:?}")),
        }
    }
}

fn default_sigma() -> f64 {
    15.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DisseminationConfig {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub g: GChoice,
    /// Walk multiplier override. Without it the theoretical
    /// `16 sigma / (1 - beta)` applies, which is far too heavy for desk
    /// runs; overrides are flagged in the manifest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot_cap: Option<u32>,
}

fn default_dense_threshold() -> usize {
    4096
}

fn default_c_walk() -> f64 {
    4.0
}

fn default_gap_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    /// Uniformity tolerance; defaults to 1/N^3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Above this size the spectral gap is no longer computed exactly.
    #[serde(default = "default_dense_threshold")]
    pub dense_threshold: usize,
    /// Externally supplied gap estimate for large graphs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_estimate: Option<f64>,
    /// Fallback walk-length multiplier when no gap is available:
    /// `c_walk * ceil(log2 n)`.
    #[serde(default = "default_c_walk")]
    pub c_walk: f64,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            dense_threshold: default_dense_threshold(),
            gap_estimate: None,
            c_walk: default_c_walk(),
            gap_tol: default_gap_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    /// One draw per (round, option), served to every agent.
    #[default]
    Shared,
    /// Independent draws per agent.
    PerAgent,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rounds: u32,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub quality_mode: QualityMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Checks of the parameter regime the convergence theory assumes. All are
/// recorded in the manifest; none block a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConditionReport {
    /// sigma >= 11.
    pub sigma_in_regime: bool,
    /// 6 mu <= delta^2.
    pub exploration_within_bias: bool,
    /// ln N < g(N) < N.
    pub g_within_bounds: bool,
    /// h equals the theoretical 16 sigma / (1 - beta).
    pub h_at_theoretical: bool,
    /// 1/2 < beta < e/(e+1).
    pub beta_in_convergence_range: bool,
    /// Quality ordering eta_1 > eta_2 >= ... hold.
    pub etas_in_canonical_order: bool,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.sigma_in_regime
            && self.exploration_within_bias
            && self.g_within_bounds
            && self.h_at_theoretical
            && self.beta_in_convergence_range
            && self.etas_in_canonical_order
    }
}

/// Fully derived run parameters.
#[derive(Debug, Clone)]
pub struct ResolvedParams {
    pub n: usize,
    pub opts: OptionSet,
    pub protocol: ProtocolParams,
    pub sigma: f64,
    pub h: f64,
    pub g_value: f64,
    pub cap: usize,
    pub slot_cap: Option<u32>,
    pub alpha: f64,
    pub rounds: u32,
    pub seeds: Vec<u64>,
    pub quality_mode: QualityMode,
    pub conditions: ConditionReport,
    pub warnings: Vec<String>,
}

/// Resolves a config against a concrete node count (the graph must already
/// be known for file-backed topologies).
pub fn resolve(cfg: &ExperimentConfig, n: usize) -> Result<ResolvedParams, ConfigError> {
    let opts = cfg.options.build()?;
    let protocol = cfg.protocol.build()?;
    let mut warnings = Vec::new();

    let sigma = cfg.dissemination.sigma;
    let theoretical_h = 16.0 * sigma / (1.0 - protocol.beta());
    let h = cfg.dissemination.h.unwrap_or(theoretical_h);
    let g_value = cfg.dissemination.g.value(n);
    let cap = (h * g_value).floor() as usize;
    if cap < 1 {
        return Err(ConfigError::Invalid(format!(
            "h * g(N) = {} must be at least 1",
            h * g_value
        )));
    }
    let alpha = cfg
        .walk
        .alpha
        .unwrap_or_else(|| ppsl_core::transition::default_alpha(n));
    if alpha <= 0.0 {
        return Err(ConfigError::Invalid("alpha must be positive".into()));
    }

    let delta = protocol.delta();
    let e = std::f64::consts::E;
    let conditions = ConditionReport {
        sigma_in_regime: sigma >= 11.0,
        exploration_within_bias: protocol.exploration_within_bias(),
        g_within_bounds: (n as f64).ln() < g_value && g_value < n as f64,
        h_at_theoretical: (h - theoretical_h).abs() < 1e-9,
        beta_in_convergence_range: protocol.beta() > 0.5 && protocol.beta() < e / (e + 1.0),
        etas_in_canonical_order: opts.ordering_is_canonical(),
    };
    if !conditions.sigma_in_regime {
        warnings.push(format!(
            "sigma = {sigma} below the analyzed regime (sigma >= 11)"
        ));
    }
    if !conditions.exploration_within_bias {
        warnings.push(format!(
            "6*mu = {} exceeds delta^2 = {}",
            6.0 * protocol.mu(),
            delta * delta
        ));
    }
    if !conditions.g_within_bounds {
        warnings.push(format!(
            "g(N) = {g_value} outside (ln N, N) = ({}, {n})",
            (n as f64).ln()
        ));
    }
    if !conditions.h_at_theoretical {
        warnings.push(format!(
            "h = {h} overrides the theoretical 16*sigma/(1-beta) = {theoretical_h}; \
             run is outside theoretical constants"
        ));
    }
    if !conditions.beta_in_convergence_range {
        warnings.push(format!(
            "beta = {} outside the convergence range (1/2, e/(e+1))",
            protocol.beta()
        ));
    }
    if !conditions.etas_in_canonical_order {
        warnings.push("etas are not in canonical best-first order".into());
    }

    Ok(ResolvedParams {
        n,
        opts,
        protocol,
        sigma,
        h,
        g_value,
        cap,
        slot_cap: cfg.dissemination.slot_cap,
        alpha,
        rounds: cfg.run.rounds,
        seeds: cfg.run.seeds.clone(),
        quality_mode: cfg.run.quality_mode,
        conditions,
        warnings,
    })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::ExperimentConfig;

    /// Small, fast reference config shared by the crate's unit tests.
    pub(crate) fn sample_config() -> ExperimentConfig {
        ExperimentConfig::from_toml(super::tests::SAMPLE).unwrap()
    }
}
