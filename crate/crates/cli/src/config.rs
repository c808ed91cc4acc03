//! Command-line flags, the JSON config file and their merge.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "iterlog", version, about = "Iterated random walks: exact renewal tables, CMJ simulation, RRT profiles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Moments,
    Renewal,
    Simulate,
    Mc,
    Rrt,
    Gauss,
    Verify,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact moments and asymptotic constants of a law
    Moments(Flags),
    /// Exact lattice renewal tables V_1..V_K (or V*_k with --eta)
    Renewal(Flags),
    /// Per-replica generation counts and normalized statistics
    Simulate(Flags),
    /// Monte Carlo ensemble summary
    Mc(Flags),
    /// Random recursive tree profiles (--N non-root vertices)
    Rrt(Flags),
    /// Discretized Brownian integrals B_{1,k}, B_{2,k}
    Gauss(Flags),
    /// Run the verification suite
    Verify(Flags),
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Moments(f) => (CommandKind::Moments, f),
            Command::Renewal(f) => (CommandKind::Renewal, f),
            Command::Simulate(f) => (CommandKind::Simulate, f),
            Command::Mc(f) => (CommandKind::Mc, f),
            Command::Rrt(f) => (CommandKind::Rrt, f),
            Command::Gauss(f) => (CommandKind::Gauss, f),
            Command::Verify(f) => (CommandKind::Verify, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterMode {
    Formula,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grower {
    Yule,
    Discrete,
}

/// Flags shared by every subcommand; all optional so that a config file
/// can fill the gaps.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// Inter-arrival law, e.g. exp:rate=1, gamma:shape=2,rate=1,
    /// unif:lo=0.5,hi=1.5, lattice:d=1;p=0.5,0.3,0.2, geom:p=0.5
    #[arg(long)]
    pub law: Option<String>,
    /// Perturbation law (perturbed walk T_n = S_{n-1} + eta_n)
    #[arg(long)]
    pub eta: Option<String>,
    /// Generation index for single-generation statistics
    #[arg(long = "k")]
    pub k: Option<usize>,
    /// Maximum generation / profile level
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub max_level: Option<usize>,
    /// Time horizon
    #[arg(long = "t")]
    pub t: Option<f64>,
    /// Grid horizon for renewal tables; non-root vertex count for rrt
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path grid, e.g. geometric:base=1.5,count=25[,start=7.389]
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Brownian discretization step
    #[arg(long)]
    pub step: Option<f64>,
    /// Centering of Y_k(t): closed-form leading term or exact mean
    #[arg(long, value_enum)]
    pub centering: Option<CenterMode>,
    /// RRT growth mechanism
    #[arg(long, value_enum)]
    pub grower: Option<Grower>,
    /// Run only the named verification checks (repeatable), e.g. c3
    #[arg(long = "check")]
    pub checks: Option<Vec<String>>,
    /// JSON config file mirroring these flags; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Flags {
    /// Fills every unset field from `base`.
    pub fn over(self, base: Flags) -> Flags {
        Flags {
            law: self.law.or(base.law),
            eta: self.eta.or(base.eta),
            k: self.k.or(base.k),
            max_level: self.max_level.or(base.max_level),
            t: self.t.or(base.t),
            n: self.n.or(base.n),
            replicas: self.replicas.or(base.replicas),
            seed: self.seed.or(base.seed),
            grid: self.grid.or(base.grid),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            suite: self.suite.or(base.suite),
            step: self.step.or(base.step),
            centering: self.centering.or(base.centering),
            grower: self.grower.or(base.grower),
            checks: self.checks.or(base.checks),
            config: self.config,
        }
    }
}

pub fn read_config_file(path: &Path) -> anyhow::Result<Flags> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Fully defaulted experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub law: String,
    pub eta: Option<String>,
    pub k: usize,
    #[serde(rename = "K")]
    pub max_level: usize,
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub suite: Suite,
    pub step: f64,
    pub centering: CenterMode,
    pub grower: Grower,
    pub checks: Vec<String>,
}

impl ExperimentConfig {
    pub fn resolve(command: CommandKind, flags: Flags) -> anyhow::Result<Self> {
        let flags = match &flags.config {
            Some(path) => {
                let file = read_config_file(path)?;
                flags.over(file)
            }
            None => flags,
        };
        let default_format = match command {
            CommandKind::Moments | CommandKind::Mc | CommandKind::Verify => Format::Json,
            _ => Format::Csv,
        };
        let default_law = match command {
            CommandKind::Renewal => "geom:p=0.5",
            _ => "exp:rate=1",
        };
        let cfg = ExperimentConfig {
            command,
            law: flags.law.unwrap_or_else(|| default_law.to_string()),
            eta: flags.eta,
            k: flags.k.unwrap_or(1),
            max_level: flags.max_level.unwrap_or(3),
            t: flags.t.unwrap_or(100.0),
            n: flags.n.unwrap_or(100),
            replicas: flags.replicas.unwrap_or(1000),
            seed: flags.seed.unwrap_or(0),
            grid: flags.grid,
            out: flags.out,
            format: flags.format.unwrap_or(default_format),
            suite: flags.suite.unwrap_or(Suite::Fast),
            step: flags.step.unwrap_or(iterlog_core::gauss::DEFAULT_STEP),
            centering: flags.centering.unwrap_or(CenterMode::Formula),
            grower: flags.grower.unwrap_or(Grower::Yule),
            checks: flags.checks.unwrap_or_default(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.k == 0 || self.max_level == 0 {
            bail!("--k and --K must be at least 1");
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            bail!("--t must be positive");
        }
        if self.replicas == 0 {
            bail!("--replicas must be at least 1");
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            bail!("--step must be positive");
        }
        Ok(())
    }
}

/// `geometric:base=B,count=C[,start=S]`; the default start is `e²`.
pub fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let Some(params) = spec.strip_prefix("geometric:") else {
        bail!("unknown grid `{spec}` (expected geometric:base=..,count=..)");
    };
    let (mut base, mut count, mut start) = (None, None, std::f64::consts::E.powi(2));
    for part in params.split(',') {
        match part.split_once('=') {
            Some(("base", v)) => base = Some(v.trim().parse::<f64>()?),
            Some(("count", v)) => count = Some(v.trim().parse::<usize>()?),
            Some(("start", v)) => start = v.trim().parse::<f64>()?,
            _ => bail!("unknown grid parameter `{part}`"),
        }
    }
    let base = base.context("grid needs base")?;
    let count = count.context("grid needs count")?;
    if !(base > 1.0 && count > 0 && start > 0.0) {
        bail!("grid needs base > 1, count > 0, start > 0");
    }
    Ok(iterlog_core::cmj::geometric_grid(start, base, count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::resolve(
            CommandKind::Mc,
            Flags {
                law: Some("gamma:shape=2,rate=1".into()),
                grid: Some("geometric:base=1.5,count=4".into()),
                t: Some(0.1 + 0.2),
                ..Flags::default()
            },
        )
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_override_file() {
        let file = Flags {
            law: Some("exp:rate=2".into()),
            seed: Some(3),
            ..Flags::default()
        };
        let cli = Flags {
            seed: Some(9),
            ..Flags::default()
        };
        let merged = cli.over(file);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.law.as_deref(), Some("exp:rate=2"));
    }

    #[test]
    fn file_keys_mirror_flags() {
        let f: Flags = serde_json::from_str(r#"{"law":"exp:rate=1","K":4,"N":50,"format":"svg","suite":"full"}"#).unwrap();
        assert_eq!(f.max_level, Some(4));
        assert_eq!(f.n, Some(50));
        assert_eq!(f.format, Some(Format::Svg));
        assert!(serde_json::from_str::<Flags>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("geometric:base=2,count=3,start=1").unwrap();
        assert_eq!(g, vec![1.0, 2.0, 4.0]);
        let g = parse_grid("geometric:base=1.5,count=26").unwrap();
        assert_eq!(g.len(), 26);
        assert!((g[0] - std::f64::consts::E.powi(2)).abs() < 1e-12);
        assert!(parse_grid("linear:step=1").is_err());
        assert!(parse_grid("geometric:base=0.5,count=3").is_err());
    }
}
