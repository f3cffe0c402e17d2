//! Flat `key = value` run configuration.
//!
//! Lists are comma separated. `contagion.<primary_id> = sat, sat` lines define
//! contagion regions in file order; without them the default California
//! regions are resolved by city name. `synth.*` keys drive the generator.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use metrohpi_core::contagion::RegionGroup;
use metrohpi_core::synth::{LeadLagSpec, SynthConfig};
use metrohpi_core::{
    DependentMode, IndexAveraging, InteractionKind, JumpCentering, LmScaling, Quarter, SerialPolicy,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hpi_csv: PathBuf,
    pub factor_csv: PathBuf,
    pub out_dir: PathBuf,
    pub report_span: (Quarter, Quarter),
    pub window_len: usize,
    pub dependent: DependentMode,
    pub min_history: usize,
    pub jump_thresholds: (f64, f64),
    pub lm_scaling: LmScaling,
    pub jump_gate: f64,
    pub jump_centering: JumpCentering,
    pub min_return_overlap: usize,
    pub min_jump_quarters: usize,
    pub corr_t_thresholds: Vec<f64>,
    pub division_t_threshold: f64,
    pub cohort_starts: Vec<Quarter>,
    pub n_lags: usize,
    pub interaction: InteractionKind,
    pub interaction_lags: usize,
    pub serial_policy: SerialPolicy,
    pub index_averaging: IndexAveraging,
    /// Explicit regions; `None` resolves the default regions by name.
    pub regions: Option<Vec<RegionGroup>>,
    pub fig1_base: Quarter,
    pub seed: u64,
    pub synth: SynthConfig,
    /// Every key as written, for the manifest.
    pub echo: BTreeMap<String, String>,
}

fn q(s: &str) -> Quarter {
    s.parse().expect("valid literal quarter")
}

impl RunConfig {
    fn defaults(base: &Path) -> Self {
        RunConfig {
            hpi_csv: base.join("hpi.csv"),
            factor_csv: base.join("factors.csv"),
            out_dir: base.join("out"),
            report_span: (q("1983Q4"), q("2010Q1")),
            window_len: 20,
            dependent: DependentMode::Prewhitened,
            min_history: 8,
            jump_thresholds: (1.65, 2.0),
            lm_scaling: LmScaling::Scaled,
            jump_gate: 2.0,
            jump_centering: JumpCentering::UnionSet,
            min_return_overlap: 8,
            min_jump_quarters: 3,
            corr_t_thresholds: vec![2.0, 3.0],
            division_t_threshold: 5.0,
            cohort_starts: vec![q("1983Q4"), q("1989Q2"), q("1992Q1")],
            n_lags: 3,
            interaction: InteractionKind::PrimaryCityResidual,
            interaction_lags: 3,
            serial_policy: SerialPolicy::AutoCochraneOrcutt,
            index_averaging: IndexAveraging::LogLevels,
            regions: None,
            fig1_base: q("1980Q1"),
            seed: 1,
            synth: SynthConfig::default(),
            echo: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(base);
        let mut regions: Vec<RegionGroup> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if cfg.echo.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            let err = |msg: String| CliError::Config(format!("line {}: {key}: {msg}", lineno + 1));
            if let Some(primary) = key.strip_prefix("contagion.") {
                regions.push(RegionGroup {
                    primary: primary.to_string(),
                    satellites: list(value).map(String::from).collect(),
                });
                continue;
            }
            if let Some(skey) = key.strip_prefix("synth.") {
                apply_synth(&mut cfg.synth, skey, value).map_err(err)?;
                continue;
            }
            match key {
                "hpi_csv" => cfg.hpi_csv = base.join(value),
                "factor_csv" => cfg.factor_csv = base.join(value),
                "out_dir" => cfg.out_dir = base.join(value),
                "report_span" => {
                    let v: Vec<Quarter> = parse_list(value).map_err(err)?;
                    match v[..] {
                        [a, b] if a <= b => cfg.report_span = (a, b),
                        _ => return Err(err("expected two ordered quarters".into())),
                    }
                }
                "window_len" => cfg.window_len = parse(value).map_err(err)?,
                "dependent" => {
                    cfg.dependent = match value {
                        "prewhitened" => DependentMode::Prewhitened,
                        "raw" => DependentMode::Raw,
                        _ => return Err(err("expected prewhitened or raw".into())),
                    }
                }
                "min_history" => cfg.min_history = parse(value).map_err(err)?,
                "jump_thresholds" => {
                    let v: Vec<f64> = parse_list(value).map_err(err)?;
                    match v[..] {
                        [a, b] if a <= b => cfg.jump_thresholds = (a, b),
                        _ => return Err(err("expected two ascending thresholds".into())),
                    }
                }
                "lm_scaling" => {
                    cfg.lm_scaling = match value {
                        "scaled" => LmScaling::Scaled,
                        "unscaled" => LmScaling::Unscaled,
                        _ => return Err(err("expected scaled or unscaled".into())),
                    }
                }
                "jump_gate" => cfg.jump_gate = parse(value).map_err(err)?,
                "jump_centering" => {
                    cfg.jump_centering = match value {
                        "union" => JumpCentering::UnionSet,
                        "full" => JumpCentering::FullSample,
                        _ => return Err(err("expected union or full".into())),
                    }
                }
                "min_return_overlap" => cfg.min_return_overlap = parse(value).map_err(err)?,
                "min_jump_quarters" => cfg.min_jump_quarters = parse(value).map_err(err)?,
                "corr_t_thresholds" => cfg.corr_t_thresholds = parse_list(value).map_err(err)?,
                "division_t_threshold" => cfg.division_t_threshold = parse(value).map_err(err)?,
                "cohort_starts" => cfg.cohort_starts = parse_list(value).map_err(err)?,
                "n_lags" => cfg.n_lags = parse(value).map_err(err)?,
                "interaction" => {
                    cfg.interaction = match value {
                        "none" => InteractionKind::None,
                        "primary_city_residual" => InteractionKind::PrimaryCityResidual,
                        "equal_weight_ca_residual" => InteractionKind::EqualWeightCaResidual,
                        _ => return Err(err("unknown interaction variant".into())),
                    }
                }
                "interaction_lags" => cfg.interaction_lags = parse(value).map_err(err)?,
                "serial_policy" => {
                    cfg.serial_policy = match value {
                        "plain" => SerialPolicy::Plain,
                        "auto" => SerialPolicy::AutoCochraneOrcutt,
                        "force" => SerialPolicy::ForceCochraneOrcutt,
                        _ => return Err(err("expected plain, auto or force".into())),
                    }
                }
                "index_averaging" => {
                    cfg.index_averaging = match value {
                        "log_levels" => IndexAveraging::LogLevels,
                        "levels" => IndexAveraging::Levels,
                        _ => return Err(err("expected log_levels or levels".into())),
                    }
                }
                "fig1_base" => cfg.fig1_base = parse(value).map_err(err)?,
                "seed" => {
                    cfg.seed = parse(value).map_err(err)?;
                    cfg.synth.seed = cfg.seed;
                }
                _ => return Err(err("unknown key".into())),
            }
        }
        if !regions.is_empty() {
            cfg.regions = Some(regions);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.window_len <= 14 {
            return bad(format!("window_len {} must exceed 14", self.window_len));
        }
        if self.min_history < 2 {
            return bad(format!("min_history {} must be at least 2", self.min_history));
        }
        let positive = [
            ("jump_thresholds", self.jump_thresholds.0),
            ("jump_thresholds", self.jump_thresholds.1),
            ("jump_gate", self.jump_gate),
            ("division_t_threshold", self.division_t_threshold),
        ];
        for (k, v) in positive.into_iter().chain(self.corr_t_thresholds.iter().map(|&t| ("corr_t_thresholds", t))) {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        if self.min_jump_quarters < 2 || self.min_return_overlap < 3 {
            return bad("min_jump_quarters must be ≥ 2 and min_return_overlap ≥ 3".into());
        }
        Ok(())
    }

    /// Fails with a config error naming the first missing input.
    pub fn check_inputs(&self) -> Result<(), CliError> {
        for p in [&self.hpi_csv, &self.factor_csv] {
            if !p.is_file() {
                return Err(CliError::Config(format!("input file not found: {}", p.display())));
            }
        }
        Ok(())
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("cannot parse {value:?}: {e}"))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    list(value).map(parse).collect()
}

/// `primary:satellite:c0/c1/...:noise_sd`
fn parse_lead_lag(item: &str) -> Result<LeadLagSpec, String> {
    let parts: Vec<&str> = item.split(':').map(str::trim).collect();
    let [primary, satellite, coefs, noise] = parts[..] else {
        return Err(format!("lead-lag {item:?} must be primary:satellite:c0/c1/..:noise_sd"));
    };
    Ok(LeadLagSpec {
        primary: primary.to_string(),
        satellite: satellite.to_string(),
        coefficients: coefs.split('/').map(|c| parse(c.trim())).collect::<Result<_, _>>()?,
        noise_sd: parse(noise)?,
    })
}

fn apply_synth(s: &mut SynthConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "n_msas" => s.n_msas = parse(value)?,
        "first" => s.first = parse(value)?,
        "last" => s.last = parse(value)?,
        "target_r2" => s.target_r2 = parse(value)?,
        "return_sd" => s.return_sd = parse(value)?,
        "ragged_until" => s.ragged_until = Some(parse(value)?),
        "jump_prob" => s.jump_prob = parse(value)?,
        "jump_size_sd" => s.jump_size_sd = parse(value)?,
        "lead_lag" => s.lead_lag = list(value).map(parse_lead_lag).collect::<Result<_, _>>()?,
        _ => return Err("unknown synth key".into()),
    }
    Ok(())
}
