//! Run configuration: a line-oriented `key = value` file with defaults for
//! every stage.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::embed::{EmbedMode, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{ApDenominator, DEFAULT_KS};
use crate::rtud::{BetaUpdate, EmConfig, StabilityMode, ThetaUpdate};
use crate::walk::{WalkConfig, WalkMode};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub fraction: f64,
    pub ks: Vec<usize>,
    pub seed: u64,
    /// Ranked list length; 0 means the largest cutoff in `ks`.
    pub top_k: usize,
    pub ap_denominator: ApDenominator,
    pub query_type: String,
    pub target_type: String,
    pub held_out: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            fraction: 0.1,
            ks: DEFAULT_KS.to_vec(),
            seed: 0,
            top_k: 0,
            ap_denominator: ApDenominator::MinRelevantK,
            query_type: "P_s".into(),
            target_type: "P_t".into(),
            held_out: "cite_x".into(),
        }
    }
}

impl EvalConfig {
    pub fn list_length(&self) -> usize {
        if self.top_k > 0 {
            self.top_k
        } else {
            self.ks.iter().copied().max().unwrap_or(10)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Paths {
    pub schema: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub paths: Paths,
    pub seed: u64,
    pub workers: usize,
    pub rtud: EmConfig,
    /// Damping factor, kept even while the direct-sum update is selected.
    pub lambda: f64,
    /// Upper bound on labeled pairs used for usefulness training; 0 = all.
    pub max_pairs: usize,
    pub walk: WalkConfig,
    pub embed: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            seed: 0,
            workers: 0,
            rtud: EmConfig::default(),
            lambda: 0.2,
            max_pairs: 0,
            walk: WalkConfig::default(),
            embed: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{key}`: expected true or false, got `{v}`")),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.apply(key.trim(), value.trim()).map_err(Error::Invalid)
    }

    fn apply(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "schema" => self.paths.schema = Some(v.into()),
            "edges" => self.paths.edges = Some(v.into()),
            "pairs" => self.paths.pairs = Some(v.into()),
            "out_dir" => self.paths.out_dir = Some(v.into()),
            "seed" => self.seed = num(key, v)?,
            "workers" => self.workers = num(key, v)?,
            "rtud.k" => self.rtud.k = num(key, v)?,
            "rtud.f_theta" => self.rtud.theta_update = v.parse::<ThetaUpdate>().map_err(|e| e.to_string())?,
            "rtud.f_beta" => self.rtud.beta_update = BetaUpdate::parse(v, self.lambda).map_err(|e| e.to_string())?,
            "rtud.lambda" => {
                let l: f64 = num(key, v)?;
                let damped = BetaUpdate::parse("SDF", l).map_err(|e| e.to_string())?;
                self.lambda = l;
                if let BetaUpdate::Damped { .. } = self.rtud.beta_update {
                    self.rtud.beta_update = damped;
                }
            }
            "rtud.epsilon" => self.rtud.epsilon = num(key, v)?,
            "rtud.max_iters" => self.rtud.max_iters = num(key, v)?,
            "rtud.exclude_direct_edge" => self.rtud.exclude_direct_edge = flag(key, v)?,
            "rtud.stability" => {
                self.rtud.stability = match v {
                    "ordered" => StabilityMode::Ordered,
                    "set" => StabilityMode::Set,
                    _ => return Err(format!("`{key}`: expected ordered or set, got `{v}`")),
                }
            }
            "rtud.max_pairs" => self.max_pairs = num(key, v)?,
            "walk.r" => self.walk.walks_per_vertex = num(key, v)?,
            "walk.l" => self.walk.walk_length = num(key, v)?,
            "walk.seed" => self.walk.seed = num(key, v)?,
            "walk.mode" => self.walk.mode = v.parse::<WalkMode>().map_err(|e| e.to_string())?,
            "embed.d" => self.embed.dim = num(key, v)?,
            "embed.ws" => self.embed.window = num(key, v)?,
            "embed.negatives" => self.embed.negatives = num(key, v)?,
            "embed.epochs" => self.embed.epochs = num(key, v)?,
            "embed.lr" => self.embed.learning_rate = num(key, v)?,
            "embed.mode" => self.embed.mode = v.parse::<EmbedMode>().map_err(|e| e.to_string())?,
            "embed.reproducible" => self.embed.reproducible = flag(key, v)?,
            "eval.fraction" => self.eval.fraction = num(key, v)?,
            "eval.seed" => self.eval.seed = num(key, v)?,
            "eval.top_k" => self.eval.top_k = num(key, v)?,
            "eval.ks" => {
                self.eval.ks = v
                    .split(',')
                    .map(|k| num::<usize>(key, k.trim()))
                    .collect::<std::result::Result<_, _>>()?;
                if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
                    return Err(format!("`{key}`: cutoffs must be positive"));
                }
            }
            "eval.ap_denominator" => {
                self.eval.ap_denominator = match v {
                    "min" => ApDenominator::MinRelevantK,
                    "relevant" => ApDenominator::Relevant,
                    _ => return Err(format!("`{key}`: expected min or relevant, got `{v}`")),
                }
            }
            "eval.query_type" => self.eval.query_type = v.into(),
            "eval.target_type" => self.eval.target_type = v.into(),
            "eval.held_out" => self.eval.held_out = v.into(),
            _ => return Err(format!("unknown setting `{key}`")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` over the current values.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(origin, idx + 1, "expected `key = value`"));
            };
            self.apply(k.trim(), v.trim())
                .map_err(|msg| Error::parse(origin, idx + 1, msg))?;
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.merge_text(text, origin)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.rtud.validate()?;
        self.walk.validate()?;
        self.embed.validate()?;
        if !(self.eval.fraction > 0.0 && self.eval.fraction < 1.0) {
            return Err(Error::Invalid(format!("eval.fraction {} outside (0, 1)", self.eval.fraction)));
        }
        Ok(())
    }

    /// Fully resolved settings in the same `key = value` format.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        for (k, p) in [
            ("schema", &self.paths.schema),
            ("edges", &self.paths.edges),
            ("pairs", &self.paths.pairs),
            ("out_dir", &self.paths.out_dir),
        ] {
            if let Some(p) = path(p) {
                let _ = writeln!(o, "{k} = {p}");
            }
        }
        let lines: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("rtud.k", self.rtud.k.to_string()),
            ("rtud.f_theta", self.rtud.theta_update.to_string()),
            ("rtud.f_beta", self.rtud.beta_update.name().into()),
            ("rtud.lambda", self.lambda.to_string()),
            ("rtud.epsilon", self.rtud.epsilon.to_string()),
            ("rtud.max_iters", self.rtud.max_iters.to_string()),
            ("rtud.exclude_direct_edge", self.rtud.exclude_direct_edge.to_string()),
            (
                "rtud.stability",
                match self.rtud.stability {
                    StabilityMode::Ordered => "ordered",
                    StabilityMode::Set => "set",
                }
                .into(),
            ),
            ("rtud.max_pairs", self.max_pairs.to_string()),
            ("walk.r", self.walk.walks_per_vertex.to_string()),
            ("walk.l", self.walk.walk_length.to_string()),
            ("walk.seed", self.walk.seed.to_string()),
            ("walk.mode", self.walk.mode.name().into()),
            ("embed.d", self.embed.dim.to_string()),
            ("embed.ws", self.embed.window.to_string()),
            ("embed.negatives", self.embed.negatives.to_string()),
            ("embed.epochs", self.embed.epochs.to_string()),
            ("embed.lr", self.embed.learning_rate.to_string()),
            ("embed.mode", self.embed.mode.name().into()),
            ("embed.reproducible", self.embed.reproducible.to_string()),
            ("eval.fraction", self.eval.fraction.to_string()),
            (
                "eval.ks",
                self.eval.ks.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            ),
            ("eval.seed", self.eval.seed.to_string()),
            ("eval.top_k", self.eval.top_k.to_string()),
            (
                "eval.ap_denominator",
                match self.eval.ap_denominator {
                    ApDenominator::MinRelevantK => "min",
                    ApDenominator::Relevant => "relevant",
                }
                .into(),
            ),
            ("eval.query_type", self.eval.query_type.clone()),
            ("eval.target_type", self.eval.target_type.clone()),
            ("eval.held_out", self.eval.held_out.clone()),
        ];
        for (k, v) in lines {
            let _ = writeln!(o, "{k} = {v}");
        }
        o
    }
}
