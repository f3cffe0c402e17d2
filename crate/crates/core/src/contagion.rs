//! Lead-lag regressions of satellite MSAs on a large primary MSA.
//!
//! The satellite return is regressed on the primary return and its lags,
//! optionally interacted with a boom/bust indicator: the residual of a linear
//! trend fit to a log price index.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linreg::{cochrane_orcutt, dw_lower_bound, ols_fit, time_trend_fit, RegressionFit, TStat};
use crate::panel::{
    cumulative_log_level, equal_weighted_log_index, primary_city, IndexAveraging, MsaMeta, Quarter, ReturnPanel,
    Series,
};

/// Observations required beyond the parameter count.
pub const MIN_EXCESS_OBS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InteractionKind {
    #[default]
    None,
    /// Trend residual of the primary MSA's own log index.
    PrimaryCityResidual,
    /// Trend residual of the equal-weighted California log index.
    EqualWeightCaResidual,
}

impl InteractionKind {
    pub fn label(self) -> &'static str {
        match self {
            InteractionKind::None => "none",
            InteractionKind::PrimaryCityResidual => "primary_city_residual",
            InteractionKind::EqualWeightCaResidual => "equal_weight_ca_residual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SerialPolicy {
    Plain,
    /// Refit with Cochrane–Orcutt when DW falls below the 5% lower bound.
    #[default]
    AutoCochraneOrcutt,
    ForceCochraneOrcutt,
}

impl SerialPolicy {
    pub fn label(self) -> &'static str {
        match self {
            SerialPolicy::Plain => "plain",
            SerialPolicy::AutoCochraneOrcutt => "auto",
            SerialPolicy::ForceCochraneOrcutt => "force",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionSpec {
    pub primary_msa: String,
    pub satellite_msa: String,
    pub n_lags: usize,
    pub interaction: InteractionKind,
    /// Lags of the primary return that enter the interaction terms.
    pub interaction_lags: usize,
    pub serial_policy: SerialPolicy,
    pub index_averaging: IndexAveraging,
}

impl ContagionSpec {
    pub fn new(primary: &str, satellite: &str) -> Self {
        ContagionSpec {
            primary_msa: primary.to_string(),
            satellite_msa: satellite.to_string(),
            n_lags: 3,
            interaction: InteractionKind::None,
            interaction_lags: 3,
            serial_policy: SerialPolicy::AutoCochraneOrcutt,
            index_averaging: IndexAveraging::LogLevels,
        }
    }
}

/// Regression inputs; columns are intercept, primary lags 0..=n_lags, then interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub start: Quarter,
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub n_lags: usize,
    pub interaction_lags: Option<usize>,
}

impl Design {
    pub fn n_obs(&self) -> usize {
        self.y.len()
    }
}

/// Aligns satellite returns with lagged primary returns and, when `z` is given,
/// primary lags multiplied by the contemporaneous `z_t`.
pub fn build_design(
    satellite: &Series,
    primary: &Series,
    n_lags: usize,
    z: Option<(&Series, usize)>,
) -> Result<Design> {
    let max_lag = n_lags.max(z.map_or(0, |(_, l)| l)) as u32;
    let mut first = satellite.start.max(primary.start + max_lag);
    let mut last = satellite.last().min(primary.last());
    if let Some((zs, _)) = z {
        first = first.max(zs.start);
        last = last.min(zs.last());
    }
    let n_params = 1 + n_lags + 1 + z.map_or(0, |(_, l)| l + 1);
    let n_obs = if last >= first { (last - first + 1) as usize } else { 0 };
    if n_obs < MIN_EXCESS_OBS + n_params {
        return Err(Error::Insufficient(format!(
            "contagion design has {n_obs} aligned quarters, needs {} for {n_params} parameters",
            MIN_EXCESS_OBS + n_params
        )));
    }

    let quarters: Vec<Quarter> = Quarter::range_inclusive(first, last).collect();
    let y = quarters.iter().map(|&t| satellite.value_at(t).expect("inside span")).collect();
    let lagged = |t: Quarter, j: usize| primary.value_at(t - j as u32).expect("inside span");
    let x = DMatrix::from_fn(n_obs, n_params, |i, c| {
        let t = quarters[i];
        if c == 0 {
            1.0
        } else if c <= n_lags + 1 {
            lagged(t, c - 1)
        } else {
            let (zs, _) = z.expect("interaction columns imply z");
            lagged(t, c - n_lags - 2) * zs.value_at(t).expect("inside span")
        }
    });
    Ok(Design {
        start: first,
        y,
        x,
        n_lags,
        interaction_lags: z.map(|(_, l)| l),
    })
}

/// Residuals of a linear trend fit to a log price level.
pub fn boom_bust_residual(log_index: &Series) -> Result<Series> {
    if log_index.len() < 12 {
        return Err(Error::Insufficient(format!(
            "boom/bust residual needs 12 quarters, got {}",
            log_index.len()
        )));
    }
    let fit = time_trend_fit(&log_index.values)?;
    Series::new(log_index.start, fit.residuals)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coef {
    pub value: f64,
    pub t: TStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContagionFit {
    pub primary_msa: String,
    pub satellite_msa: String,
    pub interaction: InteractionKind,
    pub start: Quarter,
    pub n_obs: usize,
    pub constant: Coef,
    pub lags: Vec<Coef>,
    /// Empty when there is no interaction.
    pub interactions: Vec<Coef>,
    pub r_squared: f64,
    /// Durbin–Watson of the reported fit; `None` for an exact fit.
    pub durbin_watson: Option<f64>,
    pub co_applied: bool,
    pub rho: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl ContagionFit {
    pub fn coefficient_count(&self) -> usize {
        1 + self.lags.len() + self.interactions.len()
    }
}

fn dw_lower_cached(n: usize, regressors: usize) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&v) = cache.lock().expect("cache lock").get(&(n, regressors)) {
        return Ok(v);
    }
    let v = dw_lower_bound(n, regressors, 0.05)?;
    cache.lock().expect("cache lock").insert((n, regressors), v);
    Ok(v)
}

/// Final regression for a design under the serial-correlation policy.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignFit {
    /// Full-width coefficients; dropped all-zero columns report 0 with t = 0.
    pub coefficients: Vec<f64>,
    pub t_stats: Vec<TStat>,
    pub fit: RegressionFit,
    pub co_applied: bool,
    pub rho: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Fits a design, dropping identically-zero columns and applying the policy.
pub fn fit_design(design: &Design, policy: SerialPolicy) -> Result<DesignFit> {
    let p = design.x.ncols();
    let keep: Vec<usize> = (0..p)
        .filter(|&c| c == 0 || design.x.column(c).iter().any(|&v| v != 0.0))
        .collect();
    let mut diagnostics = Vec::new();
    if keep.len() < p {
        diagnostics.push(format!(
            "dropped {} all-zero column(s); reported as 0",
            p - keep.len()
        ));
    }
    let x = design.x.select_columns(keep.iter());
    let plain = ols_fit(&x, &design.y)?;

    let wants_co = match policy {
        SerialPolicy::Plain => false,
        SerialPolicy::ForceCochraneOrcutt => true,
        SerialPolicy::AutoCochraneOrcutt => match plain.durbin_watson {
            Some(dw) => dw < dw_lower_cached(plain.n_obs, keep.len() - 1)?,
            None => false,
        },
    };
    let (fit, co_applied, rho) = if wants_co {
        match cochrane_orcutt(&x, &design.y) {
            Ok(co) => (co.fit, true, Some(co.rho)),
            Err(e) => {
                diagnostics.push(format!("cochrane-orcutt failed, plain fit kept: {e}"));
                (plain, false, None)
            }
        }
    } else {
        (plain, false, None)
    };

    let mut coefficients = vec![0.0; p];
    let mut t_stats = vec![TStat::Finite(0.0); p];
    for (i, &c) in keep.iter().enumerate() {
        coefficients[c] = fit.coefficients[i];
        t_stats[c] = fit.t_stats[i];
    }
    Ok(DesignFit {
        coefficients,
        t_stats,
        fit,
        co_applied,
        rho,
        diagnostics,
    })
}

fn interaction_index(spec: &ContagionSpec, panel: &ReturnPanel) -> Result<Option<Series>> {
    let log_index = match spec.interaction {
        InteractionKind::None => return Ok(None),
        InteractionKind::PrimaryCityResidual => cumulative_log_level(series(panel, &spec.primary_msa)?),
        InteractionKind::EqualWeightCaResidual => {
            let ca = panel.ids_where(MsaMeta::is_california);
            equal_weighted_log_index(panel, &ca, spec.index_averaging)?
        }
    };
    boom_bust_residual(&log_index).map(Some)
}

fn series<'a>(panel: &'a ReturnPanel, id: &str) -> Result<&'a Series> {
    panel.get(id).ok_or_else(|| Error::UnknownSeries(id.to_string()))
}

/// Regression of one satellite on one primary.
pub fn fit_contagion(spec: &ContagionSpec, panel: &ReturnPanel) -> Result<ContagionFit> {
    let z = interaction_index(spec, panel)?;
    fit_with_index(spec, panel, z.as_ref())
}

fn fit_with_index(spec: &ContagionSpec, panel: &ReturnPanel, z: Option<&Series>) -> Result<ContagionFit> {
    if spec.primary_msa == spec.satellite_msa {
        return Err(Error::InvalidArgument(format!(
            "primary and satellite are both {}",
            spec.primary_msa
        )));
    }
    let sat = series(panel, &spec.satellite_msa)?;
    let prim = series(panel, &spec.primary_msa)?;
    let design = build_design(sat, prim, spec.n_lags, z.map(|z| (z, spec.interaction_lags)))?;
    let df = fit_design(&design, spec.serial_policy)?;
    let coef = |i: usize| Coef {
        value: df.coefficients[i],
        t: df.t_stats[i],
    };
    let n_lag_cols = spec.n_lags + 1;
    Ok(ContagionFit {
        primary_msa: spec.primary_msa.clone(),
        satellite_msa: spec.satellite_msa.clone(),
        interaction: if z.is_some() { spec.interaction } else { InteractionKind::None },
        start: design.start + df.co_applied as u32,
        n_obs: df.fit.n_obs,
        constant: coef(0),
        lags: (1..=n_lag_cols).map(coef).collect(),
        interactions: (n_lag_cols + 1..design.x.ncols()).map(coef).collect(),
        r_squared: df.fit.r_squared,
        durbin_watson: df.fit.durbin_watson,
        co_applied: df.co_applied,
        rho: df.rho,
        diagnostics: df.diagnostics,
    })
}

/// One primary MSA and the satellites regressed on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGroup {
    pub primary: String,
    pub satellites: Vec<String>,
}

/// Default regions by primary-city name: Los Angeles, San Francisco, Santa Barbara.
pub fn default_region_names() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        (
            "Los Angeles",
            vec!["Bakersfield", "Fresno", "Oxnard", "Riverside", "San Diego", "Santa Ana", "Santa Barbara"],
        ),
        (
            "San Francisco",
            vec![
                "Merced",
                "Modesto",
                "Napa",
                "Oakland",
                "Sacramento",
                "Salinas",
                "San Jose",
                "Santa Cruz",
                "Santa Rosa",
                "Stockton",
                "Vallejo",
            ],
        ),
        ("Santa Barbara", vec!["Oxnard", "San Luis Obispo"]),
    ]
}

/// Maps city names to California MSA ids by primary city; unmatched names become diagnostics.
pub fn resolve_regions(
    names: &[(&str, Vec<&str>)],
    meta: &BTreeMap<String, MsaMeta>,
) -> (Vec<RegionGroup>, Vec<String>) {
    let lookup = |city: &str| {
        meta.values()
            .find(|m| m.is_california() && primary_city(&m.name).eq_ignore_ascii_case(city))
            .map(|m| m.msa_id.clone())
    };
    let mut groups = Vec::new();
    let mut diagnostics = Vec::new();
    for (primary, sats) in names {
        let Some(pid) = lookup(primary) else {
            diagnostics.push(format!("primary {primary} not found; region skipped"));
            continue;
        };
        let mut satellites = Vec::new();
        for s in sats {
            match lookup(s) {
                Some(id) => satellites.push(id),
                None => diagnostics.push(format!("satellite {s} of {primary} not found; row skipped")),
            }
        }
        groups.push(RegionGroup { primary: pid, satellites });
    }
    (groups, diagnostics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionOptions {
    pub n_lags: usize,
    pub interaction: InteractionKind,
    pub interaction_lags: usize,
    pub serial_policy: SerialPolicy,
    pub index_averaging: IndexAveraging,
}

impl Default for ContagionOptions {
    fn default() -> Self {
        ContagionOptions {
            n_lags: 3,
            interaction: InteractionKind::PrimaryCityResidual,
            interaction_lags: 3,
            serial_policy: SerialPolicy::AutoCochraneOrcutt,
            index_averaging: IndexAveraging::LogLevels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    pub primary: String,
    /// Lag-only regressions, satellites in configured order.
    pub plain: Vec<ContagionFit>,
    /// Regressions with boom/bust interaction terms.
    pub interaction: Vec<ContagionFit>,
    pub diagnostics: Vec<String>,
}

/// Plain and interaction fits for every satellite of every region.
pub fn contagion_suite(regions: &[RegionGroup], panel: &ReturnPanel, opts: &ContagionOptions) -> Vec<RegionTable> {
    regions
        .iter()
        .map(|region| {
            let mut table = RegionTable {
                primary: region.primary.clone(),
                plain: Vec::new(),
                interaction: Vec::new(),
                diagnostics: Vec::new(),
            };
            let spec_for = |sat: &str, interaction: InteractionKind| ContagionSpec {
                primary_msa: region.primary.clone(),
                satellite_msa: sat.to_string(),
                n_lags: opts.n_lags,
                interaction,
                interaction_lags: opts.interaction_lags,
                serial_policy: opts.serial_policy,
                index_averaging: opts.index_averaging,
            };
            let z = if opts.interaction == InteractionKind::None || panel.get(&region.primary).is_none() {
                None
            } else {
                match interaction_index(&spec_for("", opts.interaction), panel) {
                    Ok(z) => z,
                    Err(e) => {
                        table.diagnostics.push(format!("{}: no boom/bust index: {e}", region.primary));
                        None
                    }
                }
            };
            let rows: Vec<(Result<ContagionFit>, Option<Result<ContagionFit>>)> = region
                .satellites
                .par_iter()
                .map(|sat| {
                    let plain = fit_with_index(&spec_for(sat, InteractionKind::None), panel, None);
                    let inter = z
                        .as_ref()
                        .map(|z| fit_with_index(&spec_for(sat, opts.interaction), panel, Some(z)));
                    (plain, inter)
                })
                .collect();
            for (sat, (plain, inter)) in region.satellites.iter().zip(rows) {
                match plain {
                    Ok(f) => table.plain.push(f),
                    Err(e) => table.diagnostics.push(format!("{sat} on {}: {e}", region.primary)),
                }
                match inter {
                    Some(Ok(f)) => table.interaction.push(f),
                    Some(Err(e)) => table
                        .diagnostics
                        .push(format!("{sat} on {} (interaction): {e}", region.primary)),
                    None => {}
                }
            }
            table
        })
        .collect()
}
