//! Flat `key=value` run configuration.
//!
//! Keys mirror the usual experiment abbreviations: `method`, `optimizer`,
//! `init`, `layers`, `neurons`, `ntp`, `lambda`, `xend`, `kmax`, `seed`,
//! `runs`, `workers`, `timing`. A config file holds one pair per line with
//! `#` comments; every key is also a CLI flag, and CLI values override the
//! file.

use std::path::Path;
use std::str::FromStr;

use crate::form::Method;
use crate::net::Architecture;
use crate::ode::{Grid, StiffLinearIvp};
use crate::optim::{InitSpec, OptimizerConfig, TrainingConfig};
use crate::{Error, Result};

/// Optimiser choice. Hyperparameters are fixed per kind: cBP uses α = 1e-3,
/// β = 0.9; vBP uses α0 = 1e-2, αe = 1e-3, kc = 1e4, β = 0.9; Adam uses
/// α = 1e-3, β1 = 0.9, β2 = 0.999, ε = 1e-8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Cbp,
    Vbp,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Cbp => "cbp",
            OptimizerKind::Vbp => "vbp",
        }
    }

    pub fn to_config(self) -> OptimizerConfig {
        match self {
            OptimizerKind::Adam => OptimizerConfig::adam(),
            OptimizerKind::Cbp => OptimizerConfig::cbp(),
            OptimizerKind::Vbp => OptimizerConfig::vbp(),
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "cbp" => Ok(OptimizerKind::Cbp),
            "vbp" => Ok(OptimizerKind::Vbp),
            other => Err(Error::config(
                "optimizer",
                format!("expected `adam`, `cbp` or `vbp`, got `{other}`"),
            )),
        }
    }
}

/// Weight initialisation key: `const` (zeros), `const:<c>`, `rand`
/// (uniform on [0, 1e-2)), or `rand:<lo>:<hi>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    Constant(f64),
    Uniform(f64, f64),
}

impl InitKind {
    pub fn to_spec(self) -> InitSpec {
        match self {
            InitKind::Constant(value) => InitSpec::Constant { value },
            InitKind::Uniform(lo, hi) => InitSpec::Uniform { lo, hi },
        }
    }

    pub fn to_key(self) -> String {
        match self {
            InitKind::Constant(c) => format!("const:{c}"),
            InitKind::Uniform(lo, hi) => format!("rand:{lo}:{hi}"),
        }
    }
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let parse = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::config("init", format!("cannot parse `{v}` as a number")))
        };
        match parts.as_slice() {
            ["const"] => Ok(InitKind::Constant(0.0)),
            ["const", c] => Ok(InitKind::Constant(parse(c)?)),
            ["rand"] => Ok(InitKind::Uniform(0.0, 1e-2)),
            ["rand", lo, hi] => Ok(InitKind::Uniform(parse(lo)?, parse(hi)?)),
            _ => Err(Error::config(
                "init",
                format!("expected `const[:c]` or `rand[:lo:hi]`, got `{s}`"),
            )),
        }
    }
}

/// A fully resolved run configuration. Defaults match the standard setup:
/// mTSM, Adam, constant-zero init, one hidden layer of five neurons,
/// ntP = 10, λ = -5, x ∈ [0, 2], kmax = 1e5.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub optimizer: OptimizerKind,
    pub init: InitKind,
    pub layers: usize,
    pub neurons: usize,
    pub ntp: usize,
    pub lambda: f64,
    pub xend: f64,
    pub kmax: u64,
    pub seed: u64,
    /// Ensemble size; commands pick their own default when unset.
    pub runs: Option<usize>,
    /// Worker budget; defaults to available parallelism when unset.
    pub workers: Option<usize>,
    /// Populate the wall_ms CSV column. Off by default so emitted files are
    /// byte-identical across reruns.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Mtsm,
            optimizer: OptimizerKind::Adam,
            init: InitKind::Constant(0.0),
            layers: 1,
            neurons: 5,
            ntp: 10,
            lambda: -5.0,
            xend: 2.0,
            kmax: 100_000,
            seed: 0,
            runs: None,
            workers: None,
            timing: false,
        }
    }
}

impl RunConfig {
    /// Applies one `key=value` pair.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
        }
        match key {
            "method" => self.method = value.parse()?,
            "optimizer" => self.optimizer = value.parse()?,
            "init" => self.init = value.parse()?,
            "layers" => self.layers = num(key, value)?,
            "neurons" => self.neurons = num(key, value)?,
            "ntp" => self.ntp = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "xend" => self.xend = num(key, value)?,
            "kmax" => self.kmax = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "runs" => self.runs = Some(num(key, value)?),
            "workers" => self.workers = Some(num(key, value)?),
            "timing" => {
                self.timing = match value {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => {
                        return Err(Error::config(
                            "timing",
                            format!("expected 0/1/true/false, got `{other}`"),
                        ))
                    }
                }
            }
            other => {
                return Err(Error::config(
                    other,
                    "unknown configuration key".to_string(),
                ))
            }
        }
        Ok(())
    }

    /// Reads a config file: one `key=value` per line, `#` comments, blank
    /// lines ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    "config",
                    format!("line {}: expected key=value, got `{line}`", lineno + 1),
                )
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn runs_or(&self, default: usize) -> usize {
        self.runs.unwrap_or(default)
    }

    pub fn workers_or_default(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }

    /// Builds the model problem and training grid. u(0) = 1 throughout.
    pub fn problem(&self) -> Result<(StiffLinearIvp, Grid)> {
        let ivp = StiffLinearIvp::new(self.lambda, 1.0, self.xend)?;
        let grid = Grid::uniform(self.xend, self.ntp)
            .map_err(|e| Error::config("ntp", e.to_string()))?;
        Ok((ivp, grid))
    }

    /// Builds the training configuration.
    pub fn training(&self, record_history: bool) -> Result<TrainingConfig> {
        if self.layers == 0 {
            return Err(Error::config("layers", "must be at least 1"));
        }
        if self.neurons == 0 {
            return Err(Error::config("neurons", "must be at least 1"));
        }
        let arch = Architecture::new(self.layers, self.neurons)?;
        let config = TrainingConfig {
            method: self.method,
            optimizer: self.optimizer.to_config(),
            arch,
            init: self.init.to_spec(),
            seed: self.seed,
            k_max: self.kmax,
            condition_weight: None,
            record_history,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_standard_setup() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.method, Method::Mtsm);
        assert_eq!(cfg.optimizer, OptimizerKind::Adam);
        assert_eq!(cfg.init, InitKind::Constant(0.0));
        assert_eq!((cfg.layers, cfg.neurons, cfg.ntp), (1, 5, 10));
        assert_eq!((cfg.lambda, cfg.xend), (-5.0, 2.0));
        assert_eq!(cfg.kmax, 100_000);
    }

    #[test]
    fn apply_parses_all_keys() {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("method", "tsm"),
            ("optimizer", "vbp"),
            ("init", "rand:0:0.01"),
            ("layers", "3"),
            ("neurons", "7"),
            ("ntp", "40"),
            ("lambda", "-2.5"),
            ("xend", "1.5"),
            ("kmax", "5000"),
            ("seed", "77"),
            ("runs", "10"),
            ("workers", "2"),
            ("timing", "1"),
        ] {
            cfg.apply(k, v).unwrap();
        }
        assert_eq!(cfg.method, Method::Tsm);
        assert_eq!(cfg.optimizer, OptimizerKind::Vbp);
        assert_eq!(cfg.init, InitKind::Uniform(0.0, 0.01));
        assert_eq!(cfg.lambda, -2.5);
        assert_eq!(cfg.runs, Some(10));
        assert!(cfg.timing);
    }

    #[test]
    fn apply_rejects_unknown_key_and_bad_values() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply("ntpp", "10").unwrap_err();
        assert!(err.to_string().contains("ntpp"));
        assert!(cfg.apply("ntp", "ten").is_err());
        assert!(cfg.apply("init", "gaussian").is_err());
        assert!(cfg.apply("method", "rk4").is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# standard setup\nmethod = tsm\nntp=20\nlambda = -3  # stiffness\n\nseed=5\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.method, Method::Tsm);
        assert_eq!(cfg.ntp, 20);
        assert_eq!(cfg.lambda, -3.0);
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn init_keys_round_trip() {
        for init in [
            InitKind::Constant(0.0),
            InitKind::Constant(-0.35),
            InitKind::Uniform(0.0, 1e-2),
            InitKind::Uniform(-5e-3, 5e-3),
        ] {
            let parsed: InitKind = init.to_key().parse().unwrap();
            assert_eq!(parsed, init);
        }
        assert_eq!("const".parse::<InitKind>().unwrap(), InitKind::Constant(0.0));
        assert_eq!(
            "rand".parse::<InitKind>().unwrap(),
            InitKind::Uniform(0.0, 1e-2)
        );
    }

    #[test]
    fn problem_validates_fields() {
        let mut cfg = RunConfig::default();
        cfg.ntp = 1;
        assert!(cfg.problem().is_err());
        cfg.ntp = 10;
        cfg.xend = 0.0;
        assert!(cfg.problem().is_err());
        cfg.xend = 2.0;
        cfg.layers = 0;
        assert!(cfg.training(false).is_err());
        cfg.layers = 1;
        cfg.kmax = 0;
        assert!(cfg.training(false).is_err());
    }
}
