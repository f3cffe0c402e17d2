//! Pairwise return and jump correlations across MSAs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jumps::JumpSeries;
use crate::linreg::{corr_t_stat, mean_corr_tstat, TStat};
use crate::panel::{CensusDivision, MsaMeta, Series};
use crate::stats;

pub const MIN_RETURN_OVERLAP: usize = 8;
pub const MIN_JUMP_QUARTERS: usize = 3;
pub const JUMP_GATE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairMode {
    /// Unordered pairs, same quarter.
    Contemporaneous,
    /// Ordered pairs `(a, b)`: `corr(a_t, b_{t+1})`, self-pairs included.
    Lead,
}

impl PairMode {
    pub fn label(self) -> &'static str {
        match self {
            PairMode::Contemporaneous => "contemporaneous",
            PairMode::Lead => "lead",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairKind {
    Return,
    Jump,
}

impl PairKind {
    pub fn label(self) -> &'static str {
        match self {
            PairKind::Return => "return",
            PairKind::Jump => "jump",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub id_a: String,
    pub id_b: String,
    pub mode: PairMode,
    pub kind: PairKind,
    pub r: f64,
    pub n_obs: usize,
    pub t: TStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub mode: PairMode,
    pub kind: PairKind,
    pub pairs: Vec<PairCorrelation>,
    /// Pairs dropped for too little overlap (or too few jump quarters).
    pub skipped_overlap: usize,
    /// Pairs dropped for zero variance on one side.
    pub skipped_degenerate: usize,
}

/// Index pairs in lexical (a, b) order for the mode.
fn index_pairs(m: usize, mode: PairMode) -> Vec<(usize, usize)> {
    match mode {
        PairMode::Contemporaneous => (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect(),
        PairMode::Lead => (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).collect(),
    }
}

/// Aligned slices `(a_t, b_{t+shift})` over the common span.
fn aligned<'a>(a: &'a Series, b: &'a Series, mode: PairMode) -> (&'a [f64], &'a [f64]) {
    let shift: i64 = match mode {
        PairMode::Contemporaneous => 0,
        PairMode::Lead => 1,
    };
    let (sa, sb) = (a.start.ordinal() as i64, b.start.ordinal() as i64 - shift);
    let (ea, eb) = (sa + a.len() as i64, sb + b.len() as i64);
    let (lo, hi) = (sa.max(sb), ea.min(eb));
    if hi <= lo {
        return (&[], &[]);
    }
    let ia = (lo - sa) as usize;
    let ib = (lo - sb) as usize;
    let n = (hi - lo) as usize;
    (&a.values[ia..ia + n], &b.values[ib..ib + n])
}

enum Outcome {
    Pair(f64, usize),
    Short,
    Degenerate,
}

fn collect_pairs(
    ids: &[&String],
    mode: PairMode,
    kind: PairKind,
    compute: impl Fn(usize, usize) -> Outcome + Sync,
) -> PairSet {
    let outcomes: Vec<((usize, usize), Outcome)> = index_pairs(ids.len(), mode)
        .into_par_iter()
        .map(|(i, j)| ((i, j), compute(i, j)))
        .collect();
    let mut set = PairSet {
        mode,
        kind,
        pairs: Vec::new(),
        skipped_overlap: 0,
        skipped_degenerate: 0,
    };
    for ((i, j), o) in outcomes {
        match o {
            Outcome::Pair(r, n) => set.pairs.push(PairCorrelation {
                id_a: ids[i].clone(),
                id_b: ids[j].clone(),
                mode,
                kind,
                r,
                n_obs: n,
                t: corr_t_stat(r, n),
            }),
            Outcome::Short => set.skipped_overlap += 1,
            Outcome::Degenerate => set.skipped_degenerate += 1,
        }
    }
    set
}

/// Pearson correlations of returns over each pair's overlap.
pub fn return_corr_all_pairs(series: &BTreeMap<String, Series>, mode: PairMode, min_overlap: usize) -> PairSet {
    let ids: Vec<&String> = series.keys().collect();
    let values: Vec<&Series> = series.values().collect();
    collect_pairs(&ids, mode, PairKind::Return, |i, j| {
        let (x, y) = aligned(values[i], values[j], mode);
        if x.len() < min_overlap.max(3) {
            return Outcome::Short;
        }
        match stats::pearson(x, y) {
            Some(r) => Outcome::Pair(r, x.len()),
            None => Outcome::Degenerate,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JumpCentering {
    /// Correlate over quarters where at least one side jumped.
    #[default]
    UnionSet,
    /// Correlate over the full overlap, zeros included.
    FullSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpCorrOptions {
    pub gate: f64,
    pub min_quarters: usize,
    pub centering: JumpCentering,
}

impl Default for JumpCorrOptions {
    fn default() -> Self {
        JumpCorrOptions {
            gate: JUMP_GATE,
            min_quarters: MIN_JUMP_QUARTERS,
            centering: JumpCentering::UnionSet,
        }
    }
}

/// Censored-jump correlation of two aligned censored series.
pub fn censored_jump_corr(x: &[f64], y: &[f64], opts: &JumpCorrOptions) -> Option<Result<(f64, usize)>> {
    let (ux, uy): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a != 0.0 || **b != 0.0)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if ux.len() < opts.min_quarters.max(2) {
        return None;
    }
    let (cx, cy) = match opts.centering {
        JumpCentering::UnionSet => (&ux[..], &uy[..]),
        JumpCentering::FullSample => (x, y),
    };
    Some(
        stats::pearson(cx, cy)
            .map(|r| (r, cx.len()))
            .ok_or_else(|| crate::error::Error::ZeroVariance("censored jump series".into())),
    )
}

/// Correlations of censored LM series (`LM` where `|LM| > gate`, else 0).
pub fn jump_corr_all_pairs(jumps: &BTreeMap<String, JumpSeries>, mode: PairMode, opts: &JumpCorrOptions) -> PairSet {
    let ids: Vec<&String> = jumps.keys().collect();
    let censored: Vec<Series> = jumps.values().map(|j| j.censored(opts.gate)).collect();
    collect_pairs(&ids, mode, PairKind::Jump, |i, j| {
        let (x, y) = aligned(&censored[i], &censored[j], mode);
        match censored_jump_corr(x, y, opts) {
            None => Outcome::Short,
            Some(Ok((r, n))) => Outcome::Pair(r, n),
            Some(Err(_)) => Outcome::Degenerate,
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumSummary {
    /// `None` for the full sample, else the strict lower bound on t.
    pub threshold: Option<f64>,
    pub n: usize,
    pub mean: Option<f64>,
    pub sigma: Option<f64>,
    pub mean_t: Option<f64>,
    pub max: Option<f64>,
    pub min: Option<f64>,
}

impl StratumSummary {
    pub fn label(&self) -> String {
        match self.threshold {
            None => "all".to_string(),
            Some(t) => format!("t>{t}"),
        }
    }

    fn of(threshold: Option<f64>, rs: &[f64]) -> Self {
        let n = rs.len();
        let mean = (n > 0).then(|| stats::mean(rs));
        let sigma = stats::sample_sd(rs);
        let mean_t = match (mean, sigma) {
            (Some(m), Some(s)) => mean_corr_tstat(m, s, n).ok(),
            _ => None,
        };
        StratumSummary {
            threshold,
            n,
            mean,
            sigma,
            mean_t,
            max: rs.iter().copied().reduce(f64::max),
            min: rs.iter().copied().reduce(f64::min),
        }
    }
}

/// Full-sample row followed by one row per threshold (pairs with `t > threshold`).
pub fn stratify(pairs: &[PairCorrelation], thresholds: &[f64]) -> Vec<StratumSummary> {
    let all: Vec<f64> = pairs.iter().map(|p| p.r).collect();
    let mut rows = vec![StratumSummary::of(None, &all)];
    for &th in thresholds {
        let rs: Vec<f64> = pairs.iter().filter(|p| p.t.value() > th).map(|p| p.r).collect();
        rows.push(StratumSummary::of(Some(th), &rs));
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionRow {
    pub division: CensusDivision,
    /// Within-division pairs.
    pub n: usize,
    pub significant: usize,
    pub pct_significant: Option<f64>,
    pub mean_r: Option<f64>,
}

/// Within-division counts of pairs with `t > t_threshold`, one row per division.
pub fn division_summary(
    pairs: &[PairCorrelation],
    meta: &BTreeMap<String, MsaMeta>,
    t_threshold: f64,
) -> Vec<DivisionRow> {
    let mut by_div: BTreeMap<CensusDivision, Vec<&PairCorrelation>> = BTreeMap::new();
    for p in pairs {
        let (Some(a), Some(b)) = (meta.get(&p.id_a), meta.get(&p.id_b)) else {
            continue;
        };
        if a.division == b.division {
            by_div.entry(a.division).or_default().push(p);
        }
    }
    CensusDivision::ALL
        .iter()
        .map(|&d| {
            let ps = by_div.get(&d).map(Vec::as_slice).unwrap_or(&[]);
            let n = ps.len();
            let significant = ps.iter().filter(|p| p.t.value() > t_threshold).count();
            let rs: Vec<f64> = ps.iter().map(|p| p.r).collect();
            DivisionRow {
                division: d,
                n,
                significant,
                pct_significant: (n > 0).then(|| 100.0 * significant as f64 / n as f64),
                mean_r: (n > 0).then(|| stats::mean(&rs)),
            }
        })
        .collect()
}
