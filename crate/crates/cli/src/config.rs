//! Experiment configuration: the JSON schema mirroring the CLI flags,
//! full validation (all violations reported at once), and model
//! resolution from builtin names or model definition files.

use std::path::Path;

use favard_core::models::{self, Builtin, GridModel, Model};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Sample,
    Favard,
    Expected,
    ExactExpected,
    Survival,
    Vtheta,
    Limit,
    Ratio,
    DegScan,
    Bv,
    Bounds,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Sample => "sample",
            CommandKind::Favard => "favard",
            CommandKind::Expected => "expected",
            CommandKind::ExactExpected => "exact-expected",
            CommandKind::Survival => "survival",
            CommandKind::Vtheta => "vtheta",
            CommandKind::Limit => "limit",
            CommandKind::Ratio => "ratio",
            CommandKind::DegScan => "deg-scan",
            CommandKind::Bv => "bv",
            CommandKind::Bounds => "bounds",
        }
    }

    /// Substream word mixed into every random key this command derives.
    pub fn stream_word(self) -> u64 {
        self as u64 + 1
    }

    pub fn needs_model(self) -> bool {
        !matches!(self, CommandKind::Bounds)
    }

    pub fn needs_seed(self) -> bool {
        matches!(
            self,
            CommandKind::Sample
                | CommandKind::Favard
                | CommandKind::Expected
                | CommandKind::Ratio
                | CommandKind::Bv
                | CommandKind::Bounds
        )
    }

    pub fn needs_depth(self) -> bool {
        matches!(
            self,
            CommandKind::Sample
                | CommandKind::Favard
                | CommandKind::Expected
                | CommandKind::ExactExpected
                | CommandKind::Survival
                | CommandKind::Ratio
                | CommandKind::DegScan
                | CommandKind::Bv
        )
    }
}

/// Raw experiment description; every field optional so validation can
/// enumerate all problems.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub command: Option<CommandKind>,
    /// builtin name or path to a model definition file
    pub model: Option<String>,
    pub l: Option<u32>,
    /// depth or inclusive range `a..b`
    pub n: Option<String>,
    pub replicates: Option<u32>,
    pub chains: Option<u32>,
    pub ref_replicates: Option<u32>,
    pub theta_nodes: Option<u32>,
    pub t_nodes: Option<u32>,
    pub seed: Option<u64>,
    pub fatten: Option<f64>,
    pub k_max: Option<u32>,
    pub angles_per_band: Option<u32>,
    pub trials: Option<u64>,
    pub m_override: Option<u32>,
    pub condition_on_survival: Option<bool>,
    pub disc_random_count: Option<bool>,
    pub out: Option<String>,
    pub threads: Option<usize>,
}

/// Model definition file schema.
#[derive(Debug, Clone, Deserialize)]
struct ModelFile {
    #[serde(rename = "L")]
    l: u32,
    law: ModelFileLaw,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ModelFileLaw {
    Explicit { atoms: Vec<ModelFileAtom> },
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, Deserialize)]
struct ModelFileAtom {
    squares: Vec<(u8, u8)>,
    prob: f64,
}

fn load_model_file(path: &str) -> Result<(Model, String), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("model file {path}: {e}"))?;
    let parsed: ModelFile =
        serde_json::from_str(&text).map_err(|e| format!("model file {path}: {e}"))?;
    let model = match parsed.law {
        ModelFileLaw::Bernoulli { p } => {
            GridModel::bernoulli(parsed.l, p).map(Model::Grid)
        }
        ModelFileLaw::Explicit { atoms } => {
            let atoms = atoms
                .into_iter()
                .map(|a| {
                    (
                        a.squares
                            .into_iter()
                            .map(|(i, j)| favard_core::address::Cell::new(i, j))
                            .collect::<Vec<_>>(),
                        a.prob,
                    )
                })
                .collect();
            GridModel::from_atoms(parsed.l, atoms).map(Model::Grid)
        }
    }
    .map_err(|e| format!("model file {path}: {e}"))?;
    let stem = Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    Ok((model, models::model_id(&stem, parsed.l)))
}

/// A validated, fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub command: CommandKind,
    pub model: Option<Model>,
    pub model_id: String,
    pub n_lo: u32,
    pub n_hi: u32,
    pub replicates: u32,
    pub chains: u32,
    pub ref_replicates: u32,
    pub theta_nodes: u32,
    pub t_nodes: u32,
    pub seed: u64,
    pub fatten: f64,
    pub k_max: u32,
    pub angles_per_band: u32,
    pub trials: u64,
    pub m_override: Option<u32>,
    pub condition_on_survival: bool,
    pub out: Option<String>,
    pub threads: usize,
    /// the resolved config serialized into every output's comment line
    pub resolved: RawConfig,
}

fn parse_depth_spec(s: &str) -> Result<(u32, u32), String> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: u32 = a.trim().parse().map_err(|_| format!("bad depth range `{s}`"))?;
        let hi: u32 = b.trim().parse().map_err(|_| format!("bad depth range `{s}`"))?;
        if lo > hi {
            return Err(format!("empty depth range `{s}`"));
        }
        Ok((lo, hi))
    } else {
        let n: u32 = s.trim().parse().map_err(|_| format!("bad depth `{s}`"))?;
        Ok((n, n))
    }
}

fn depth_guard(l: u32, n: u32) -> Result<(), String> {
    let mut leaves: u64 = 1;
    for _ in 0..n {
        leaves = leaves.saturating_mul(l as u64);
        if leaves > models::MAX_LEAVES {
            return Err(format!(
                "depth {n} at L = {l} exceeds the {} -leaf memory guard",
                models::MAX_LEAVES
            ));
        }
    }
    Ok(())
}

/// Validates a raw config, reporting every violation.
pub fn validate(raw: RawConfig) -> Result<Experiment, CliError> {
    let mut errors: Vec<String> = Vec::new();
    let command = match raw.command {
        Some(c) => c,
        None => {
            errors.push("missing field: command".into());
            return Err(CliError::config(errors));
        }
    };

    // model resolution
    let mut model: Option<Model> = None;
    let mut model_id = String::from("none");
    if command.needs_model() {
        match &raw.model {
            None => errors.push("missing field: model (builtin name or file path)".into()),
            Some(name) => {
                if let Some(builtin) = Builtin::parse(name) {
                    let l = raw.l.or(builtin.forced_l()).unwrap_or(0);
                    if l == 0 {
                        errors.push(format!("missing field: l (required for builtin {name})"));
                    } else {
                        let built = if builtin == Builtin::VvDiscs
                            && raw.disc_random_count.unwrap_or(false)
                        {
                            favard_core::models::DiscModel::new(l, true).map(Model::Disc)
                        } else {
                            models::make_builtin(builtin, l)
                        };
                        match built {
                            Ok(m) => {
                                model_id = models::model_id(name, l);
                                model = Some(m);
                            }
                            Err(e) => errors.push(e.message().into()),
                        }
                    }
                } else {
                    match load_model_file(name) {
                        Ok((m, id)) => {
                            model_id = id;
                            model = Some(m);
                        }
                        Err(e) => errors.push(e),
                    }
                }
            }
        }
    }

    // model-level validity (criticality) and command compatibility
    if let Some(m) = &model {
        match favard_core::models::classify(m) {
            Err(e) => errors.push(e.message().into()),
            Ok(c) => {
                if command == CommandKind::Limit && c.is_degenerate() {
                    // surfaced exactly as the computation would report it
                    if let Err(e) =
                        favard_core::asymptotics::limit_constant(m, favard_core::QuadratureRule::new(8))
                    {
                        errors.push(e.message().into());
                    }
                }
            }
        }
    }

    if command.needs_seed() && raw.seed.is_none() {
        errors.push(format!(
            "missing field: seed (required for stochastic command {})",
            command.name()
        ));
    }

    let (mut n_lo, mut n_hi) = (0u32, 0u32);
    if command.needs_depth() {
        match &raw.n {
            None => errors.push("missing field: n".into()),
            Some(spec) => match parse_depth_spec(spec) {
                Ok((lo, hi)) => {
                    n_lo = lo;
                    n_hi = hi;
                    if let Some(m) = &model {
                        if let Err(e) = depth_guard(m.l(), hi) {
                            errors.push(e);
                        }
                    }
                }
                Err(e) => errors.push(e),
            },
        }
    }

    let replicates = raw.replicates.unwrap_or(match command {
        CommandKind::Favard => 1,
        _ => 1000,
    });
    if command == CommandKind::Expected && replicates < 2 {
        errors.push("expected needs replicates >= 2".into());
    }
    let chains = raw.chains.unwrap_or(100);
    if command == CommandKind::Ratio && chains < 1 {
        errors.push("ratio needs chains >= 1".into());
    }
    let trials = raw.trials.unwrap_or(100_000);
    if command == CommandKind::Bounds && trials < 1 {
        errors.push("bounds needs trials >= 1".into());
    }

    if !errors.is_empty() {
        return Err(CliError::config(errors));
    }

    let theta_nodes = raw.theta_nodes.unwrap_or(match command {
        CommandKind::Vtheta => 128,
        CommandKind::Limit => 512,
        CommandKind::Survival => 16,
        CommandKind::ExactExpected => 64,
        _ => 256,
    });
    let t_nodes = raw.t_nodes.unwrap_or(match command {
        CommandKind::Survival => 33,
        _ => 129,
    });

    let mut resolved = raw.clone();
    resolved.l = model.as_ref().map(|m| m.l()).or(raw.l);
    resolved.replicates = Some(replicates);
    resolved.chains = Some(chains);
    resolved.ref_replicates = Some(raw.ref_replicates.unwrap_or(1000));
    resolved.theta_nodes = Some(theta_nodes);
    resolved.t_nodes = Some(t_nodes);
    resolved.fatten = Some(raw.fatten.unwrap_or(0.0));
    resolved.k_max = Some(raw.k_max.unwrap_or(3));
    resolved.angles_per_band = Some(raw.angles_per_band.unwrap_or(3));
    resolved.trials = Some(trials);
    resolved.condition_on_survival = Some(raw.condition_on_survival.unwrap_or(false));
    resolved.threads = Some(raw.threads.unwrap_or(1));

    Ok(Experiment {
        command,
        model,
        model_id,
        n_lo,
        n_hi,
        replicates,
        chains,
        ref_replicates: raw.ref_replicates.unwrap_or(1000),
        theta_nodes,
        t_nodes,
        seed: raw.seed.unwrap_or(0),
        fatten: raw.fatten.unwrap_or(0.0),
        k_max: raw.k_max.unwrap_or(3),
        angles_per_band: raw.angles_per_band.unwrap_or(3),
        trials,
        m_override: raw.m_override,
        condition_on_survival: raw.condition_on_survival.unwrap_or(false),
        out: raw.out.clone(),
        threads: raw.threads.unwrap_or(1),
        resolved,
    })
}

impl Experiment {
    /// Root key for this run: seed mixed with the command word, so
    /// different commands never share draws.
    pub fn stream(&self) -> favard_core::Key {
        favard_core::Key::new(self.seed).child(self.command.stream_word())
    }

    pub fn config_comment(&self) -> String {
        let mut cfg = serde_json::to_value(&self.resolved).unwrap();
        if let Some(map) = cfg.as_object_mut() {
            map.insert(
                "code_version".into(),
                serde_json::Value::String(CODE_VERSION.into()),
            );
            map.insert(
                "model_id".into(),
                serde_json::Value::String(self.model_id.clone()),
            );
            map.retain(|_, v| !v.is_null());
        }
        format!("# config: {cfg}")
    }
}
