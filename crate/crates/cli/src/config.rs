//! Run configuration: a TOML file with `[problem]`, `[run]` and `[mcmc]`
//! sections. Every field has a default, so an empty file is valid.

use std::fmt::Write as _;
use std::path::Path;

use bdr_core::inference::{InnerMode, McmcConfig};
use bdr_core::problems::{ProblemConfig, ProblemName};
use bdr_core::reduction::ReductionKind;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Outer Monte Carlo sample count.
    pub n: i64,
    /// Inner sample count ℓ.
    pub l: i64,
    pub inner_mode: InnerMode,
    /// Work in whitened coordinates when the model has Gaussian prior and noise.
    pub whitened: bool,
    pub kind: ReductionKind,
    /// Error budget ε′ for dimension selection.
    pub eps: f64,
    pub lsi_const: f64,
    /// Dimensions swept by `cmi_curves` and `mcmc_study`; empty picks a default sweep.
    pub dims: Vec<usize>,
    /// Chain length per MCMC run.
    pub samples: i64,
    pub chains: i64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            n: 1000,
            l: 1,
            inner_mode: InnerMode::Fresh,
            whitened: true,
            kind: ReductionKind::Rotation,
            eps: 1e-2,
            lsi_const: 1.0,
            dims: Vec::new(),
            samples: 10_000,
            chains: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub run: RunSection,
    pub mcmc: McmcConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemConfig::with_defaults(ProblemName::LinearGaussian),
            run: RunSection::default(),
            mcmc: McmcConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn n(&self) -> usize {
        self.run.n as usize
    }

    pub fn l(&self) -> usize {
        self.run.l as usize
    }
}

/// One configuration problem, with the 1-based source line when known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Map from `(section, key)` to the line where the key is assigned.
struct KeyLines(Vec<(String, String, usize)>);

impl KeyLines {
    fn scan(src: &str) -> Self {
        let mut out = Vec::new();
        let mut section = String::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if let Some(h) = line.strip_prefix('[') {
                section = h.trim_end_matches(']').trim().to_string();
                out.push((section.clone(), String::new(), i + 1));
            } else if let Some((k, _)) = line.split_once('=') {
                out.push((section.clone(), k.trim().trim_matches('"').to_string(), i + 1));
            }
        }
        KeyLines(out)
    }

    fn find(&self, section: &str, key: &str) -> Option<usize> {
        self.0.iter().find(|(s, k, _)| s == section && k == key).map(|e| e.2)
    }
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn is_optional_key(path: &str) -> bool {
    matches!(path, "problem.image.fixed_gamma" | "mcmc.initial_scale")
}

/// Reports every key of `given` that the schema `known` lacks.
fn unknown_keys(given: &toml::Table, known: &toml::Table, prefix: &str, lines: &KeyLines, errs: &mut Vec<ConfigError>) {
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match known.get(k) {
            Some(toml::Value::Table(sub)) => {
                if let toml::Value::Table(g) = v {
                    unknown_keys(g, sub, &path, lines, errs);
                }
            }
            Some(_) => {}
            None if is_optional_key(&path) => {}
            None => errs.push(ConfigError {
                line: lines.find(prefix, k).or_else(|| lines.find(&path, "")),
                message: format!("unknown key `{path}`"),
            }),
        }
    }
}

fn schema() -> toml::Table {
    let mut t = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    // Every problem section is accepted whichever problem is selected.
    if let Some(toml::Value::Table(p)) = t.get_mut("problem") {
        p.insert("name".into(), toml::Value::String("linear_gaussian".into()));
    }
    t
}

/// Parses and validates a configuration, collecting every error found.
pub fn parse_config(src: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let lines = KeyLines::scan(src);
    let table: toml::Table = match src.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            return Err(vec![ConfigError {
                line: e.span().map(|s| line_of_offset(src, s.start)),
                message: e.message().to_string(),
            }]);
        }
    };
    let mut errs = Vec::new();
    unknown_keys(&table, &schema(), "", &lines, &mut errs);
    if !errs.is_empty() {
        errs.sort_by_key(|e| e.line);
        return Err(errs);
    }
    if let Some(toml::Value::Table(p)) = table.get("problem") {
        if !p.contains_key("name") {
            errs.push(ConfigError { line: lines.find("problem", ""), message: "problem.name is required when [problem] is given".into() });
            return Err(errs);
        }
    }
    let cfg: RunConfig = match toml::from_str(src) {
        Ok(c) => c,
        Err(e) => {
            return Err(vec![ConfigError {
                line: e.span().map(|s| line_of_offset(src, s.start)),
                message: e.message().to_string(),
            }])
        }
    };
    errs.extend(validate(&cfg, &lines));
    errs.sort_by_key(|e| e.line);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, Vec<ConfigError>> {
    let src = std::fs::read_to_string(path).map_err(|e| {
        vec![ConfigError { line: None, message: format!("cannot read {}: {e}", path.display()) }]
    })?;
    parse_config(&src)
}

fn validate(cfg: &RunConfig, lines: &KeyLines) -> Vec<ConfigError> {
    let mut errs = Vec::new();
    let mut push = |section: &str, key: &str, message: String| {
        errs.push(ConfigError { line: lines.find(section, key), message });
    };
    let r = &cfg.run;
    if r.n < 1 {
        push("run", "n", format!("run.n must be positive, got {}", r.n));
    }
    let min_l = if r.inner_mode == InnerMode::Mean { 0 } else { 1 };
    if r.l < min_l {
        push("run", "l", format!("run.l must be at least {min_l}, got {}", r.l));
    }
    if !(r.eps > 0.0) {
        push("run", "eps", format!("run.eps: select_dims requires eps > 0, got {}", r.eps));
    }
    if !(r.lsi_const > 0.0) {
        push("run", "lsi_const", format!("run.lsi_const must be positive, got {}", r.lsi_const));
    }
    if r.samples < bdr_core::inference::MIN_CHAIN_LEN as i64 {
        push(
            "run",
            "samples",
            format!("run.samples must be at least {}, got {}", bdr_core::inference::MIN_CHAIN_LEN, r.samples),
        );
    }
    if r.chains < 1 {
        push("run", "chains", format!("run.chains must be positive, got {}", r.chains));
    }
    let m = &cfg.mcmc;
    if !(0.0..1.0).contains(&m.burn_in_fraction) {
        push("mcmc", "burn_in_fraction", "mcmc.burn_in_fraction must lie in [0, 1)".into());
    }
    if !(m.target_acceptance > 0.0 && m.target_acceptance < 1.0) {
        push("mcmc", "target_acceptance", "mcmc.target_acceptance must lie in (0, 1)".into());
    }
    if let Some(s) = m.initial_scale {
        if !(s > 0.0) {
            push("mcmc", "initial_scale", "mcmc.initial_scale must be positive".into());
        }
    }
    let section = format!("problem.{}", cfg.problem.name);
    for e in cfg.problem.validate() {
        let key = e.split(": ").nth(1).and_then(|t| t.split_whitespace().next()).unwrap_or("");
        let line = lines.find(&section, key).or_else(|| lines.find(&section, ""));
        errs.push(ConfigError { line, message: e });
    }
    errs
}

/// Canonical TOML text of a configuration; hashing this makes the config
/// digest independent of formatting and of which defaults were spelled out.
pub fn canonical(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

/// Normalized configuration with a provenance comment on every key.
pub fn render_normalized(cfg: &RunConfig, src: &str) -> String {
    let given: toml::Table = src.parse().unwrap_or_default();
    let full = toml::Table::try_from(cfg).expect("config serializes");
    let mut out = String::new();
    render_table(&full, &given, "", &mut out);
    out
}

fn render_table(full: &toml::Table, given: &toml::Table, prefix: &str, out: &mut String) {
    let (leaves, tables): (Vec<_>, Vec<_>) = full.iter().partition(|(_, v)| !v.is_table());
    if !prefix.is_empty() {
        let _ = writeln!(out, "\n[{prefix}]");
    }
    for (k, v) in leaves {
        let origin = if given.contains_key(k) { "from file" } else { "default" };
        let _ = writeln!(out, "{k} = {v}  # {origin}");
    }
    for (k, v) in tables {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let empty = toml::Table::new();
        let sub_given = given.get(k).and_then(|g| g.as_table()).unwrap_or(&empty);
        render_table(v.as_table().expect("table"), sub_given, &path, out);
    }
}
