//! Market integration measured by rolling factor-model R².
//!
//! Each MSA's returns are prewhitened with an AR(1), then regressed on an
//! intercept plus the national factors over every complete moving window.
//! The R² of each window is dated at the window's final quarter.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FactorPanel;
use crate::linreg::{ols_fit, time_trend_fit, TStat};
use crate::panel::{MsaMeta, Quarter, ReturnPanel, Series};
use crate::stats;

pub const DEFAULT_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Prewhitened {
    pub series: Series,
    /// Set when the input was constant and residuals were taken as zero.
    pub constant_input: bool,
}

/// Residuals of `r_t = a + b·r_{t−1} + e_t`, one shorter and one quarter later.
pub fn prewhiten(returns: &Series) -> Result<Prewhitened> {
    let n = returns.len();
    if n < 8 {
        return Err(Error::Insufficient(format!("prewhitening needs 8 returns, got {n}")));
    }
    let v = &returns.values;
    let start = returns.start + 1;
    if v.iter().all(|&x| x == v[0]) {
        return Ok(Prewhitened {
            series: Series::new(start, vec![0.0; n - 1])?,
            constant_input: true,
        });
    }
    let x = DMatrix::from_fn(n - 1, 2, |i, j| if j == 0 { 1.0 } else { v[i] });
    let residuals = match ols_fit(&x, &v[1..]) {
        Ok(fit) => fit.residuals,
        // constant lag column: the AR term is unidentified, demean only
        Err(Error::RankDeficient { .. }) => {
            let m = stats::mean(&v[1..]);
            v[1..].iter().map(|x| x - m).collect()
        }
        Err(e) => return Err(e),
    };
    Ok(Prewhitened {
        series: Series::new(start, residuals)?,
        constant_input: false,
    })
}

/// Rolling-window R² for one MSA.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSeries {
    /// Terminal quarter of the first complete window.
    pub start: Quarter,
    /// `None` where the window design was rank deficient.
    pub r2: Vec<Option<f64>>,
    pub window_len: usize,
    pub diagnostics: Vec<String>,
}

impl IntegrationSeries {
    pub fn last(&self) -> Quarter {
        self.start + (self.r2.len() as u32 - 1)
    }

    pub fn value_at(&self, q: Quarter) -> Option<f64> {
        if q < self.start {
            return None;
        }
        self.r2.get((q - self.start) as usize).copied().flatten()
    }

    pub fn points(&self) -> impl Iterator<Item = (Quarter, f64)> + '_ {
        self.r2
            .iter()
            .enumerate()
            .filter_map(move |(i, v)| v.map(|r| (self.start + i as u32, r)))
    }
}

/// R² of `returns` on an intercept and the factors for every complete window.
pub fn rolling_r2(returns: &Series, factors: &FactorPanel, window: usize) -> Result<IntegrationSeries> {
    let k = factors.len();
    if window <= k + 2 {
        return Err(Error::InvalidArgument(format!(
            "window {window} must exceed regressor count {} plus one",
            k + 1
        )));
    }
    let (f0, f1) = factors
        .common_span()
        .ok_or_else(|| Error::Insufficient("factors share no quarter".into()))?;
    let first_obs = returns.start.max(f0);
    let last = returns.last().min(f1);
    let first_terminal = first_obs + (window as u32 - 1);
    if first_terminal > last {
        return Err(Error::Insufficient(format!(
            "no complete {window}-quarter window between {first_obs} and {last}"
        )));
    }

    let mut r2 = Vec::new();
    let mut diagnostics = Vec::new();
    for q in Quarter::range_inclusive(first_terminal, last) {
        let w0 = q - (window as u32 - 1);
        let y = returns.slice(w0, q).expect("window inside returns");
        let block = factors.design_block(w0, q).expect("window inside factors");
        let x = DMatrix::from_fn(window, k + 1, |i, j| if j == 0 { 1.0 } else { block[(i, j - 1)] });
        match ols_fit(&x, y) {
            Ok(fit) => r2.push(Some(fit.r_squared)),
            Err(Error::RankDeficient { columns }) => {
                diagnostics.push(format!("{q}: rank-deficient window, dependent columns {columns:?}"));
                r2.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(IntegrationSeries {
        start: first_terminal,
        r2,
        window_len: window,
        diagnostics,
    })
}

/// Which return series enters the rolling regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DependentMode {
    #[default]
    Prewhitened,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOptions {
    pub window_len: usize,
    /// First and last quarter for the final / change statistics.
    pub report_span: (Quarter, Quarter),
    pub dependent: DependentMode,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            window_len: DEFAULT_WINDOW,
            report_span: (Quarter::new(1983, 4).unwrap(), Quarter::new(2010, 1).unwrap()),
            dependent: DependentMode::Prewhitened,
        }
    }
}

/// The five per-MSA characteristics, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Characteristic {
    Mean,
    Sigma,
    FinalR2,
    ChangeR2,
    TrendT,
}

impl Characteristic {
    pub const ALL: [Characteristic; 5] = [
        Characteristic::Mean,
        Characteristic::Sigma,
        Characteristic::FinalR2,
        Characteristic::ChangeR2,
        Characteristic::TrendT,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Characteristic::Mean => "mean",
            Characteristic::Sigma => "sigma",
            Characteristic::FinalR2 => "final_r2",
            Characteristic::ChangeR2 => "change_r2",
            Characteristic::TrendT => "trend_t",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsaIntegration {
    pub msa_id: String,
    pub mean: f64,
    pub sigma: f64,
    pub final_r2: Option<f64>,
    pub change_r2: Option<f64>,
    pub trend_t: Option<TStat>,
}

impl MsaIntegration {
    pub fn get(&self, c: Characteristic) -> Option<f64> {
        match c {
            Characteristic::Mean => Some(self.mean),
            Characteristic::Sigma => Some(self.sigma),
            Characteristic::FinalR2 => self.final_r2,
            Characteristic::ChangeR2 => self.change_r2,
            Characteristic::TrendT => self.trend_t.map(TStat::value),
        }
    }
}

/// Cross-MSA summary of one characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSummary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: Option<f64>,
    /// Minimum value inside each rank quintile; the first entry is the overall minimum.
    pub quintile_minima: [Option<f64>; 5],
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub record: MsaIntegration,
    /// 1-based ascending rank per characteristic.
    pub ranks: [Option<usize>; 5],
    pub quintiles: [Option<usize>; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedTable {
    pub rows: Vec<RankedRow>,
    pub summary: [Option<CharacteristicSummary>; 5],
}

/// Quintile bin `ceil(5·rank/N)`.
pub fn quintile(rank: usize, n: usize) -> usize {
    (5 * rank).div_ceil(n)
}

/// Ranks every characteristic ascending and summarizes it. Ties are broken by MSA id.
pub fn rank_and_summarize(records: &[MsaIntegration]) -> RankedTable {
    let mut rows: Vec<RankedRow> = records
        .iter()
        .map(|r| RankedRow {
            record: r.clone(),
            ranks: [None; 5],
            quintiles: [None; 5],
        })
        .collect();
    let mut summary: [Option<CharacteristicSummary>; 5] = Default::default();

    for (ci, c) in Characteristic::ALL.into_iter().enumerate() {
        let mut order: Vec<(usize, f64)> = rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.record.get(c).map(|v| (i, v)))
            .collect();
        order.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then_with(|| rows[a.0].record.msa_id.cmp(&rows[b.0].record.msa_id))
        });
        let n = order.len();
        if n == 0 {
            continue;
        }
        let mut minima = [None; 5];
        for (pos, &(i, v)) in order.iter().enumerate() {
            let rank = pos + 1;
            let bin = quintile(rank, n);
            rows[i].ranks[ci] = Some(rank);
            rows[i].quintiles[ci] = Some(bin);
            if minima[bin - 1].is_none() {
                minima[bin - 1] = Some(v);
            }
        }
        let values: Vec<f64> = order.iter().map(|&(_, v)| v).collect();
        summary[ci] = Some(CharacteristicSummary {
            n,
            mean: stats::mean(&values),
            std_dev: stats::sample_sd(&values),
            quintile_minima: minima,
            max: values[n - 1],
        });
    }
    RankedTable { rows, summary }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationReport {
    pub series: BTreeMap<String, IntegrationSeries>,
    pub table: RankedTable,
    /// MSAs without a complete window, with the reason.
    pub skipped: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

fn characteristics(
    id: &str,
    returns: &Series,
    r2: &IntegrationSeries,
    span: (Quarter, Quarter),
) -> Result<MsaIntegration> {
    let in_span: Vec<(Quarter, f64)> = r2
        .points()
        .filter(|(q, _)| *q >= span.0 && *q <= span.1)
        .collect();
    let final_r2 = in_span.last().map(|p| p.1);
    let change_r2 = match (in_span.first(), in_span.last()) {
        (Some(a), Some(b)) => Some(b.1 - a.1),
        _ => None,
    };
    let all: Vec<f64> = r2.points().map(|p| p.1).collect();
    let trend_t = if all.len() >= 3 {
        Some(time_trend_fit(&all)?.slope_t_stat)
    } else {
        None
    };
    Ok(MsaIntegration {
        msa_id: id.to_string(),
        mean: stats::mean(&returns.values),
        sigma: stats::sample_sd(&returns.values).unwrap_or(0.0),
        final_r2,
        change_r2,
        trend_t,
    })
}

/// Rolling R², per-MSA characteristics, ranks and the cross-MSA summary.
pub fn integration_report(
    panel: &ReturnPanel,
    factors: &FactorPanel,
    opts: &IntegrationOptions,
) -> Result<IntegrationReport> {
    type Outcome = std::result::Result<(IntegrationSeries, MsaIntegration, Option<String>), String>;
    let ids: Vec<&String> = panel.series().keys().collect();
    let outcomes: Vec<Result<Outcome>> = ids
        .par_iter()
        .map(|id| {
            let returns = &panel.series()[*id];
            let (dependent, warning) = match opts.dependent {
                DependentMode::Raw => (returns.clone(), None),
                DependentMode::Prewhitened => match prewhiten(returns) {
                    Ok(p) => {
                        let w = p
                            .constant_input
                            .then(|| format!("{id}: constant returns, prewhitened to zeros"));
                        (p.series, w)
                    }
                    Err(Error::Insufficient(msg)) => return Ok(Err(msg)),
                    Err(e) => return Err(e),
                },
            };
            match rolling_r2(&dependent, factors, opts.window_len) {
                Ok(series) => {
                    let record = characteristics(id, returns, &series, opts.report_span)?;
                    Ok(Ok((series, record, warning)))
                }
                Err(Error::Insufficient(msg)) => Ok(Err(msg)),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut series = BTreeMap::new();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    for (id, outcome) in ids.into_iter().zip(outcomes) {
        match outcome? {
            Ok((s, rec, warning)) => {
                warnings.extend(warning);
                warnings.extend(s.diagnostics.iter().map(|d| format!("{id}: {d}")));
                series.insert(id.clone(), s);
                records.push(rec);
            }
            Err(reason) => skipped.push((id.clone(), reason)),
        }
    }
    if records.is_empty() {
        return Err(Error::Insufficient("no MSA has a complete first window".into()));
    }
    Ok(IntegrationReport {
        series,
        table: rank_and_summarize(&records),
        skipped,
        warnings,
    })
}

/// Equal-weighted mean R² of a member group, one point per quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSeries {
    pub name: String,
    pub members: usize,
    pub points: Vec<(Quarter, f64)>,
}

/// Averages member R² per quarter from `from` onward (or the earliest member
/// quarter). Quarters where no member has a value are omitted.
pub fn average_members(
    name: &str,
    series: &BTreeMap<String, IntegrationSeries>,
    members: &[String],
    from: Option<Quarter>,
) -> Option<GroupSeries> {
    let present: Vec<&IntegrationSeries> = members.iter().filter_map(|id| series.get(id)).collect();
    if present.is_empty() {
        return None;
    }
    let first = from.unwrap_or_else(|| present.iter().map(|s| s.start).min().expect("non-empty"));
    let last = present.iter().map(|s| s.last()).max().expect("non-empty");
    let mut points = Vec::new();
    if first <= last {
        for q in Quarter::range_inclusive(first, last) {
            let vals: Vec<f64> = present.iter().filter_map(|s| s.value_at(q)).collect();
            if !vals.is_empty() {
                points.push((q, stats::mean(&vals)));
            }
        }
    }
    Some(GroupSeries {
        name: name.to_string(),
        members: present.len(),
        points,
    })
}

/// Mean R² per cohort; a cohort holds the MSAs whose R² series begins at or
/// before its start quarter. Empty cohorts are omitted with a warning.
pub fn cohort_averages(
    series: &BTreeMap<String, IntegrationSeries>,
    cohorts: &[(String, Quarter)],
) -> (Vec<GroupSeries>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (name, start) in cohorts {
        let members: Vec<String> = series
            .iter()
            .filter(|(_, s)| s.start <= *start)
            .map(|(id, _)| id.clone())
            .collect();
        match average_members(name, series, &members, Some(*start)) {
            Some(g) => out.push(g),
            None => warnings.push(format!("cohort {name} starting {start} has no members")),
        }
    }
    (out, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Coast,
    Division,
}

/// Mean R² per metadata group, in group-label order.
pub fn group_averages(
    series: &BTreeMap<String, IntegrationSeries>,
    meta: &BTreeMap<String, MsaMeta>,
    grouping: Grouping,
    from: Option<Quarter>,
) -> (Vec<GroupSeries>, Vec<String>) {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in series.keys() {
        let Some(m) = meta.get(id) else { continue };
        let label = match grouping {
            Grouping::Coast => m.coast.label().to_string(),
            Grouping::Division => format!("div{}", m.division.label()),
        };
        groups.entry(label).or_default().push(id.clone());
    }
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (label, members) in groups {
        match average_members(&label, series, &members, from) {
            Some(g) => out.push(g),
            None => warnings.push(format!("group {label} has no members")),
        }
    }
    (out, warnings)
}
