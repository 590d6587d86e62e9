//! Resolved run configuration: defaults, then a config file, then flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use crate::error::{EosError, Result};
use crate::model::{InitScheme, MAX_STEPS};
use crate::regime::geometric_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Run,
    Sweep,
    Classify,
    PhaseDiagram,
    Toy,
    Analyze,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Sweep => "sweep",
            Mode::Classify => "classify",
            Mode::PhaseDiagram => "phase-diagram",
            Mode::Toy => "toy",
            Mode::Analyze => "analyze",
        }
    }
}

impl FromStr for Mode {
    type Err = EosError;
    fn from_str(s: &str) -> Result<Self> {
        Mode::from_str_value(s)
    }
}

impl Mode {
    fn from_str_value(s: &str) -> Result<Self> {
        <Mode as ValueEnum>::from_str(s.trim(), false).map_err(|_| EosError::InvalidArgument(format!("unknown mode '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    pub fn extension(&self) -> &'static str {
        self.as_str()
    }
}

/// A grid axis: `lo:hi[:per_decade]` (geometric, 40 per decade by default),
/// `lin:lo:hi:count`, or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Geometric { lo: f64, hi: f64, per_decade: usize },
    Linear { lo: f64, hi: f64, count: usize },
    List(Vec<f64>),
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Geometric { lo, hi, per_decade } => geometric_grid(*lo, *hi, *per_decade),
            GridSpec::Linear { lo, hi, count } => match count {
                0 => vec![],
                1 => vec![*lo],
                c => (0..*c).map(|i| lo + (hi - lo) * i as f64 / (*c - 1) as f64).collect(),
            },
            GridSpec::List(v) => v.clone(),
        }
    }
}

impl FromStr for GridSpec {
    type Err = EosError;
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = |m: &str| EosError::InvalidArgument(format!("grid '{text}': {m}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let spec = if let Some(rest) = text.strip_prefix("lin:") {
            let p: Vec<&str> = rest.split(':').collect();
            if p.len() != 3 {
                return Err(bad("expected lin:lo:hi:count"));
            }
            let count = p[2].trim().parse::<usize>().map_err(|_| bad("bad count"))?;
            GridSpec::Linear { lo: num(p[0])?, hi: num(p[1])?, count }
        } else if text.contains(':') {
            let p: Vec<&str> = text.split(':').collect();
            if p.len() > 3 {
                return Err(bad("expected lo:hi[:per_decade]"));
            }
            let per_decade = match p.get(2) {
                Some(s) => s.trim().parse::<usize>().map_err(|_| bad("bad points per decade"))?,
                None => 40,
            };
            let (lo, hi) = (num(p[0])?, num(p[1])?);
            if !(lo > 0.0 && hi >= lo && per_decade > 0) {
                return Err(bad("geometric grids need 0 < lo <= hi"));
            }
            GridSpec::Geometric { lo, hi, per_decade }
        } else {
            GridSpec::List(text.split(',').map(num).collect::<Result<Vec<_>>>()?)
        };
        let v = spec.values();
        if v.is_empty() || v.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
            return Err(bad("values must be finite and strictly increasing"));
        }
        Ok(spec)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Geometric { lo, hi, per_decade } => write!(f, "{lo:?}:{hi:?}:{per_decade}"),
            GridSpec::Linear { lo, hi, count } => write!(f, "lin:{lo:?}:{hi:?}:{count}"),
            GridSpec::List(v) => {
                let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "{}", items.join(","))
            }
        }
    }
}

fn parse_init(text: &str) -> Result<InitScheme> {
    let t = text.trim();
    if t == "symmetric" {
        return Ok(InitScheme::Symmetric);
    }
    if t == "zero_target" {
        return Ok(InitScheme::ZERO_TARGET);
    }
    if let Some(rest) = t.strip_prefix("scaled:") {
        if let Some((p, m)) = rest.split_once(',') {
            if let (Ok(plus), Ok(minus)) = (p.trim().parse(), m.trim().parse()) {
                return Ok(InitScheme::Scaled { plus, minus });
            }
        }
    }
    Err(EosError::InvalidArgument(format!("init '{t}': expected symmetric, zero_target or scaled:P,M")))
}

fn describe_init(init: &InitScheme) -> String {
    match init {
        InitScheme::Symmetric => "symmetric".into(),
        InitScheme::Scaled { plus, minus } => format!("scaled:{plus:?},{minus:?}"),
    }
}

/// Command-line flags. Every value can also come from `--config`.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "eos-lab", version, about = "Gradient descent on quadratically parameterized regression")]
pub struct Flags {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Step size
    #[arg(long)]
    pub eta: Option<f64>,
    /// Initialization scale
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Second input coordinate of the single sample x = (1, x)
    #[arg(long)]
    pub x: Option<f64>,
    /// Target y of the single sample
    #[arg(long)]
    pub mu: Option<f64>,
    /// Dimension for generated data; needs --n and --k
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Support size of the generating vector
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step budget
    #[arg(long)]
    pub steps: Option<usize>,
    /// symmetric, zero_target or scaled:P,M
    #[arg(long)]
    pub init: Option<String>,
    /// lo:hi[:per_decade], lin:lo:hi:count or v1,v2,...
    #[arg(long)]
    pub grid_eta: Option<String>,
    #[arg(long)]
    pub grid_alpha: Option<String>,
    #[arg(long)]
    pub grid_x: Option<String>,
    /// Largest number of runs a phase diagram may request
    #[arg(long)]
    pub grid_budget: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write SVG charts
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 1 when the outcome is divergence only
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub require_convergence: Option<bool>,
    /// Toy alpha schedule: V, const:V, tanh:A,M,W or piecewise:T:V,...
    #[arg(long, allow_hyphen_values = true)]
    pub toy_alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub toy_beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub toy_r0: Option<f64>,
    /// Flat key = value file, or any output file of this tool
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_val<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| EosError::InvalidArgument(format!("bad value for {key}: '{v}'")))
}

impl Flags {
    /// Sets one field from its config-file spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "mode" => self.mode = Some(Mode::from_str_value(v)?),
            "eta" => self.eta = Some(parse_val(&key, v)?),
            "alpha" => self.alpha = Some(parse_val(&key, v)?),
            "x" => self.x = Some(parse_val(&key, v)?),
            "mu" => self.mu = Some(parse_val(&key, v)?),
            "d" => self.d = Some(parse_val(&key, v)?),
            "n" => self.n = Some(parse_val(&key, v)?),
            "k" => self.k = Some(parse_val(&key, v)?),
            "seed" => self.seed = Some(parse_val(&key, v)?),
            "steps" => self.steps = Some(parse_val(&key, v)?),
            "init" => self.init = Some(v.into()),
            "grid_eta" => self.grid_eta = Some(v.into()),
            "grid_alpha" => self.grid_alpha = Some(v.into()),
            "grid_x" => self.grid_x = Some(v.into()),
            "grid_budget" => self.grid_budget = Some(parse_val(&key, v)?),
            "format" => {
                self.format = Some(
                    <Format as ValueEnum>::from_str(v, false)
                        .map_err(|_| EosError::InvalidArgument(format!("unknown format '{v}'")))?,
                )
            }
            "svg" => self.svg = Some(parse_val(&key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "require_convergence" => self.require_convergence = Some(parse_val(&key, v)?),
            "toy_alpha" => self.toy_alpha = Some(v.into()),
            "toy_beta" => self.toy_beta = Some(v.into()),
            "toy_r0" => self.toy_r0 = Some(parse_val(&key, v)?),
            _ => return Err(EosError::InvalidArgument(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: &Flags) -> Flags {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f.clone(); } )* };
        }
        take!(
            mode, eta, alpha, x, mu, d, n, k, seed, steps, init, grid_eta, grid_alpha, grid_x, grid_budget, format,
            svg, out, require_convergence, toy_alpha, toy_beta, toy_r0
        );
        self
    }
}

/// Reads a config file.
///
/// Output files of this tool are accepted too: when any `config:` header line is
/// present, only those lines are read. JSON outputs are read through their `config` object.
pub fn parse_config_text(text: &str) -> Result<Flags> {
    let mut flags = Flags::default();
    if text.trim_start().starts_with('{') {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| EosError::InvalidArgument(format!("config json: {e}")))?;
        let obj = doc
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| EosError::InvalidArgument("config json has no 'config' object".into()))?;
        for (k, v) in obj {
            let v = v.as_str().map(str::to_owned).unwrap_or_else(|| v.to_string());
            flags.set(k, &v)?;
        }
        return Ok(flags);
    }
    let header: Vec<&str> = text
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            l.strip_prefix("# config:")
                .or_else(|| l.strip_prefix("<!-- config:").and_then(|r| r.strip_suffix("-->")))
        })
        .collect();
    let lines: Vec<&str> = if header.is_empty() { text.lines().collect() } else { header };
    for (i, line) in lines.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| EosError::InvalidArgument(format!("config line {}: expected key = value", i + 1)))?;
        flags.set(k, v)?;
    }
    Ok(flags)
}

pub fn load_config_file(path: &Path) -> Result<Flags> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EosError::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub eta: Option<f64>,
    pub alpha: f64,
    pub x: f64,
    pub mu: f64,
    /// `(d, n, k)` when data are generated.
    pub generated: Option<(usize, usize, usize)>,
    pub seed: u64,
    pub steps: usize,
    pub init: InitScheme,
    pub grid_eta: Option<GridSpec>,
    pub grid_alpha: Option<GridSpec>,
    pub grid_x: Option<GridSpec>,
    pub grid_budget: usize,
    pub format: Format,
    pub svg: bool,
    pub out: PathBuf,
    pub require_convergence: bool,
    pub toy_alpha: String,
    pub toy_beta: String,
    pub toy_r0: f64,
}

pub const DEFAULT_GRID_BUDGET: usize = 2500;
pub const DEFAULT_TOY_STEPS: usize = 200;

impl RunConfig {
    pub fn resolve(f: &Flags) -> Result<Self> {
        let usage = |m: String| EosError::InvalidArgument(m);
        let mode = f.mode.ok_or_else(|| usage("--mode is required".into()))?;
        let generated = match (f.d, f.n, f.k) {
            (None, None, None) => None,
            (Some(d), Some(n), Some(k)) => Some((d, n, k)),
            _ => return Err(usage("--d, --n and --k go together".into())),
        };
        if generated.is_some() && (f.x.is_some() || f.mu.is_some()) {
            return Err(usage("--x/--mu describe the single-sample input; drop them when generating data".into()));
        }
        let grid = |s: &Option<String>| s.as_deref().map(GridSpec::from_str).transpose();
        let cfg = RunConfig {
            mode,
            eta: f.eta,
            alpha: f.alpha.unwrap_or(0.01),
            x: f.x.unwrap_or(0.5),
            mu: f.mu.unwrap_or(1.0),
            generated,
            seed: f.seed.unwrap_or(0),
            steps: f.steps.unwrap_or(if mode == Mode::Toy { DEFAULT_TOY_STEPS } else { MAX_STEPS }),
            init: f.init.as_deref().map(parse_init).transpose()?.unwrap_or(InitScheme::Symmetric),
            grid_eta: grid(&f.grid_eta)?,
            grid_alpha: grid(&f.grid_alpha)?,
            grid_x: grid(&f.grid_x)?,
            grid_budget: f.grid_budget.unwrap_or(DEFAULT_GRID_BUDGET),
            format: f.format.unwrap_or(Format::Csv),
            svg: f.svg.unwrap_or(false),
            out: f.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            require_convergence: f.require_convergence.unwrap_or(false),
            toy_alpha: f.toy_alpha.clone().unwrap_or_else(|| "0.05".into()),
            toy_beta: f.toy_beta.clone().unwrap_or_else(|| "0.1".into()),
            toy_r0: f.toy_r0.unwrap_or(-0.3),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let usage = |m: &str| Err(EosError::InvalidArgument(m.into()));
        let needs_eta = matches!(self.mode, Mode::Run | Mode::Classify | Mode::Analyze)
            || (self.mode == Mode::Sweep && self.grid_alpha.is_some());
        if needs_eta && self.eta.is_none() {
            return usage("--eta is required for this mode");
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return usage("--eta must be positive");
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return usage("--alpha must be positive");
        }
        match self.mode {
            Mode::Sweep => {
                if self.grid_eta.is_some() == self.grid_alpha.is_some() {
                    return usage("sweep needs exactly one of --grid-eta and --grid-alpha");
                }
            }
            Mode::PhaseDiagram => {
                if self.grid_eta.is_none() {
                    return usage("phase-diagram needs --grid-eta");
                }
                if self.grid_x.is_some() == self.grid_alpha.is_some() {
                    return usage("phase-diagram needs exactly one of --grid-x and --grid-alpha");
                }
                if self.grid_x.is_some() && self.generated.is_some() {
                    return usage("--grid-x varies the single-sample input; drop --d/--n/--k");
                }
            }
            Mode::Analyze
                if self.generated.is_some() => {
                    return usage("analyze works on the single-sample map; drop --d/--n/--k");
                }
            _ => {}
        }
        Ok(())
    }

    /// `key = value` pairs in a fixed order; feeding them back through [`Flags::set`]
    /// reproduces this configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut e: Vec<(&'static str, String)> = vec![("mode", self.mode.as_str().into())];
        if let Some(eta) = self.eta {
            e.push(("eta", format!("{eta:?}")));
        }
        e.push(("alpha", format!("{:?}", self.alpha)));
        match self.generated {
            Some((d, n, k)) => {
                e.push(("d", d.to_string()));
                e.push(("n", n.to_string()));
                e.push(("k", k.to_string()));
            }
            None => {
                e.push(("x", format!("{:?}", self.x)));
                e.push(("mu", format!("{:?}", self.mu)));
            }
        }
        e.push(("seed", self.seed.to_string()));
        e.push(("steps", self.steps.to_string()));
        e.push(("init", describe_init(&self.init)));
        for (k, g) in [("grid_eta", &self.grid_eta), ("grid_alpha", &self.grid_alpha), ("grid_x", &self.grid_x)] {
            if let Some(g) = g {
                e.push((k, g.to_string()));
            }
        }
        e.push(("grid_budget", self.grid_budget.to_string()));
        e.push(("format", self.format.as_str().into()));
        e.push(("svg", self.svg.to_string()));
        e.push(("out", self.out.display().to_string()));
        e.push(("require_convergence", self.require_convergence.to_string()));
        if self.mode == Mode::Toy {
            e.push(("toy_alpha", self.toy_alpha.clone()));
            e.push(("toy_beta", self.toy_beta.clone()));
            e.push(("toy_r0", format!("{:?}", self.toy_r0)));
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Flags {
        let mut f = Flags::default();
        for (k, v) in pairs {
            f.set(k, v).unwrap();
        }
        f
    }

    #[test]
    fn grid_forms() {
        let g: GridSpec = "0.1:10:2".parse().unwrap();
        assert_eq!(g.values().len(), 5);
        let g: GridSpec = "lin:0.05:0.95:10".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 10);
        assert!((v[9] - 0.95).abs() < 1e-15);
        let g: GridSpec = "0.5,1.2".parse().unwrap();
        assert_eq!(g.values(), vec![0.5, 1.2]);
        assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
        assert!("1.2,0.5".parse::<GridSpec>().is_err());
        assert!("0:1".parse::<GridSpec>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config_text("mode = run\neta = 0.5\n# comment\nalpha = 0.1\n").unwrap();
        let cli = flags(&[("eta", "1.2")]);
        let cfg = RunConfig::resolve(&file.overlay(&cli)).unwrap();
        assert_eq!(cfg.eta, Some(1.2));
        assert_eq!(cfg.alpha, 0.1);
    }

    #[test]
    fn entries_round_trip() {
        let cfg = RunConfig::resolve(&flags(&[
            ("mode", "phase-diagram"),
            ("grid_eta", "0.5:1.5:10"),
            ("grid_x", "lin:0.05:0.95:20"),
            ("init", "zero_target"),
            ("mu", "0.3"),
        ]))
        .unwrap();
        let text: String = cfg.entries().iter().map(|(k, v)| format!("# config: {k} = {v}\n")).collect();
        let again = RunConfig::resolve(&parse_config_text(&format!("{text}axis1,axis2\n1,2\n")).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn usage_errors() {
        assert!(RunConfig::resolve(&flags(&[("mode", "run")])).is_err());
        assert!(RunConfig::resolve(&flags(&[("mode", "sweep"), ("eta", "1")])).is_err());
        assert!(RunConfig::resolve(&flags(&[("mode", "run"), ("eta", "1"), ("d", "3")])).is_err());
        assert!(parse_config_text("eta 1").is_err());
        assert!(parse_config_text("colour = red").is_err());
    }
}
