//! Calendar quarters, series containers and panel assembly.
//!
//! Quarters live on a contiguous integer grid anchored at 1975Q1 (ordinal 0).
//! A [`Series`] is a start quarter plus a gap-free run of values; ragged
//! coverage across MSAs is expressed only through differing starts and
//! lengths.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FactorPanel;

pub const ANCHOR_YEAR: i32 = 1975;

/// A calendar quarter, stored as the number of quarters since 1975Q1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Quarter(u32);

impl Quarter {
    pub const fn from_ordinal(ordinal: u32) -> Self {
        Quarter(ordinal)
    }

    pub fn new(year: i32, quarter: u32) -> Result<Self> {
        if !(1..=4).contains(&quarter) || year < ANCHOR_YEAR {
            return Err(Error::QuarterParse(format!("{year}Q{quarter}")));
        }
        let ordinal = (year - ANCHOR_YEAR) as u32 * 4 + (quarter - 1);
        Ok(Quarter(ordinal))
    }

    pub const fn ordinal(self) -> u32 {
        self.0
    }

    pub fn year(self) -> i32 {
        ANCHOR_YEAR + (self.0 / 4) as i32
    }

    /// Quarter of the year, 1..=4.
    pub fn quarter_of_year(self) -> u32 {
        self.0 % 4 + 1
    }

    /// Shifts by `n` quarters; `None` if the result would precede 1975Q1.
    pub fn checked_shift(self, n: i64) -> Option<Self> {
        let ordinal = i64::from(self.0) + n;
        u32::try_from(ordinal).ok().map(Quarter)
    }

    pub fn next(self) -> Self {
        Quarter(self.0 + 1)
    }

    /// Inclusive range of quarters.
    pub fn range_inclusive(first: Quarter, last: Quarter) -> impl Iterator<Item = Quarter> {
        (first.0..=last.0).map(Quarter)
    }
}

impl Add<u32> for Quarter {
    type Output = Quarter;

    fn add(self, rhs: u32) -> Quarter {
        Quarter(self.0 + rhs)
    }
}

impl Sub<u32> for Quarter {
    type Output = Quarter;

    fn sub(self, rhs: u32) -> Quarter {
        Quarter(self.0.checked_sub(rhs).expect("quarter precedes 1975Q1"))
    }
}

impl Sub<Quarter> for Quarter {
    type Output = i64;

    fn sub(self, rhs: Quarter) -> i64 {
        i64::from(self.0) - i64::from(rhs.0)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year(), self.quarter_of_year())
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::QuarterParse(s.to_string());
        let (year, q) = t
            .split_once(['Q', 'q'])
            .ok_or_else(bad)?;
        let year = year.trim_end_matches(':');
        if year.len() != 4 || q.len() != 1 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let q: u32 = q.parse().map_err(|_| bad())?;
        Quarter::new(year, q).map_err(|_| bad())
    }
}

impl From<Quarter> for String {
    fn from(q: Quarter) -> String {
        q.to_string()
    }
}

impl TryFrom<String> for Quarter {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Census division grouping with California broken out of division 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CensusDivision {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
    D8,
    D9,
    California,
}

impl CensusDivision {
    pub const ALL: [CensusDivision; 10] = [
        CensusDivision::D1,
        CensusDivision::D2,
        CensusDivision::D3,
        CensusDivision::D4,
        CensusDivision::D5,
        CensusDivision::D6,
        CensusDivision::D7,
        CensusDivision::D8,
        CensusDivision::D9,
        CensusDivision::California,
    ];

    pub fn from_state(state: &str) -> Result<Self> {
        let state = state.trim().to_ascii_uppercase();
        let division = match state.as_str() {
            "CA" => CensusDivision::California,
            "AK" | "HI" | "OR" | "WA" => CensusDivision::D1,
            "AZ" | "CO" | "ID" | "MT" | "NM" | "NV" | "UT" | "WY" => CensusDivision::D2,
            "IA" | "KS" | "MN" | "MO" | "ND" | "NE" | "SD" => CensusDivision::D3,
            "AR" | "LA" | "OK" | "TX" => CensusDivision::D4,
            "IL" | "IN" | "MI" | "OH" | "WI" => CensusDivision::D5,
            "AL" | "KY" | "MS" | "TN" => CensusDivision::D6,
            "DC" | "DE" | "FL" | "GA" | "MD" | "NC" | "SC" | "VA" | "WV" => CensusDivision::D7,
            "NJ" | "NY" | "PA" => CensusDivision::D8,
            "CT" | "MA" | "ME" | "NH" | "RI" | "VT" => CensusDivision::D9,
            _ => return Err(Error::UnknownState(state)),
        };
        Ok(division)
    }

    pub fn label(self) -> &'static str {
        match self {
            CensusDivision::D1 => "1",
            CensusDivision::D2 => "2",
            CensusDivision::D3 => "3",
            CensusDivision::D4 => "4",
            CensusDivision::D5 => "5",
            CensusDivision::D6 => "6",
            CensusDivision::D7 => "7",
            CensusDivision::D8 => "8",
            CensusDivision::D9 => "9",
            CensusDivision::California => "CA",
        }
    }
}

impl fmt::Display for CensusDivision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CoastFlag {
    Coastal,
    Inland,
    NotCalifornia,
}

impl CoastFlag {
    pub fn label(self) -> &'static str {
        match self {
            CoastFlag::Coastal => "ca_coastal",
            CoastFlag::Inland => "ca_inland",
            CoastFlag::NotCalifornia => "not_ca",
        }
    }
}

/// Primary cities of the California MSAs classified as coastal.
pub const CA_COASTAL_CITIES: [&str; 10] = [
    "Los Angeles",
    "Oakland",
    "Oxnard",
    "San Diego",
    "San Francisco",
    "San Jose",
    "San Luis Obispo",
    "Santa Ana",
    "Santa Barbara",
    "Santa Cruz",
];

/// Leading city of an MSA display name: `"Oxnard-Thousand Oaks-Ventura, CA"` → `"Oxnard"`.
pub fn primary_city(name: &str) -> &str {
    name.split(['-', ',', '('])
        .next()
        .unwrap_or(name)
        .trim()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsaMeta {
    pub msa_id: String,
    pub name: String,
    pub state: String,
    pub division: CensusDivision,
    pub coast: CoastFlag,
}

impl MsaMeta {
    /// Builds metadata, deriving the division from the state and the coast
    /// flag from the fixed coastal city list.
    pub fn derive(msa_id: &str, name: &str, state: &str) -> Result<Self> {
        let division = CensusDivision::from_state(state)?;
        let coast = if division == CensusDivision::California {
            let city = primary_city(name);
            if CA_COASTAL_CITIES.iter().any(|c| c.eq_ignore_ascii_case(city)) {
                CoastFlag::Coastal
            } else {
                CoastFlag::Inland
            }
        } else {
            CoastFlag::NotCalifornia
        };
        Ok(MsaMeta {
            msa_id: msa_id.to_string(),
            name: name.to_string(),
            state: state.trim().to_ascii_uppercase(),
            division,
            coast,
        })
    }

    pub fn is_california(&self) -> bool {
        self.division == CensusDivision::California
    }
}

/// A gap-free run of values beginning at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub start: Quarter,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(start: Quarter, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at {}",
                start + i as u32
            )));
        }
        Ok(Series { start, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last covered quarter.
    pub fn end(&self) -> Quarter {
        self.start + self.values.len() as u32
    }

    /// Last covered quarter. Panics on an empty series.
    pub fn last(&self) -> Quarter {
        assert!(!self.values.is_empty(), "empty series has no last quarter");
        self.end() - 1
    }

    pub fn covers(&self, q: Quarter) -> bool {
        self.start <= q && q < self.end()
    }

    pub fn value_at(&self, q: Quarter) -> Option<f64> {
        if self.covers(q) {
            Some(self.values[(q - self.start) as usize])
        } else {
            None
        }
    }

    /// Values over the inclusive range `[first, last]`, if fully covered.
    pub fn slice(&self, first: Quarter, last: Quarter) -> Option<&[f64]> {
        if first > last || !self.covers(first) || !self.covers(last) {
            return None;
        }
        let a = (first - self.start) as usize;
        let b = (last - self.start) as usize;
        Some(&self.values[a..=b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Quarter, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start + i as u32, v))
    }
}

/// Per-MSA quarterly percent log returns with metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReturnPanel {
    series: BTreeMap<String, Series>,
    meta: BTreeMap<String, MsaMeta>,
}

impl ReturnPanel {
    pub fn new(series: BTreeMap<String, Series>, meta: BTreeMap<String, MsaMeta>) -> Result<Self> {
        for (id, s) in &series {
            if !meta.contains_key(id) {
                return Err(Error::InvalidArgument(format!("no metadata for MSA `{id}`")));
            }
            if s.is_empty() {
                return Err(Error::Insufficient(format!("MSA `{id}` has no returns")));
            }
        }
        let meta = meta
            .into_iter()
            .filter(|(id, _)| series.contains_key(id))
            .collect();
        Ok(ReturnPanel { series, meta })
    }

    pub fn series(&self) -> &BTreeMap<String, Series> {
        &self.series
    }

    pub fn meta(&self) -> &BTreeMap<String, MsaMeta> {
        &self.meta
    }

    pub fn get(&self, id: &str) -> Option<&Series> {
        self.series.get(id)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    /// MSA ids whose metadata satisfies `pred`, in id order.
    pub fn ids_where(&self, pred: impl Fn(&MsaMeta) -> bool) -> Vec<String> {
        self.meta
            .values()
            .filter(|m| pred(m))
            .map(|m| m.msa_id.clone())
            .collect()
    }

    /// `[first, last]` quarters covered by any series.
    pub fn grid(&self) -> Option<(Quarter, Quarter)> {
        let first = self.series.values().map(|s| s.start).min()?;
        let last = self.series.values().map(|s| s.last()).max()?;
        Some((first, last))
    }

    /// Builds a return panel from price levels.
    pub fn from_levels(
        levels: &BTreeMap<String, Series>,
        meta: BTreeMap<String, MsaMeta>,
    ) -> Result<Self> {
        let mut series = BTreeMap::new();
        for (id, lv) in levels {
            let r = log_return(lv).map_err(|e| e.for_series(id))?;
            series.insert(id.clone(), r);
        }
        ReturnPanel::new(series, meta)
    }
}

impl Error {
    pub(crate) fn for_series(self, id: &str) -> Error {
        match self {
            Error::NonPositive { quarter, value, .. } => Error::NonPositive {
                series: id.to_string(),
                quarter,
                value,
            },
            Error::MissingQuarter { quarter, .. } => Error::MissingQuarter {
                series: id.to_string(),
                quarter,
            },
            other => other,
        }
    }
}

/// Percent log returns `100 · ln(P_t / P_{t−1})`, starting one quarter later.
pub fn log_return(levels: &Series) -> Result<Series> {
    if levels.len() < 2 {
        return Err(Error::Insufficient(format!(
            "log return needs at least 2 levels, got {}",
            levels.len()
        )));
    }
    if let Some((q, v)) = levels.iter().find(|&(_, v)| v <= 0.0) {
        return Err(Error::NonPositive {
            series: String::new(),
            quarter: q,
            value: v,
        });
    }
    let values = levels
        .values
        .windows(2)
        .map(|w| 100.0 * (w[1] / w[0]).ln())
        .collect();
    Ok(Series {
        start: levels.start + 1,
        values,
    })
}

/// Log level path implied by percent returns: `0` at the quarter before the
/// first return, then the running sum of `r / 100`.
pub fn cumulative_log_level(returns: &Series) -> Series {
    let mut values = Vec::with_capacity(returns.len() + 1);
    let mut acc = 0.0;
    values.push(acc);
    for &r in &returns.values {
        acc += r / 100.0;
        values.push(acc);
    }
    Series {
        start: returns.start - 1,
        values,
    }
}

/// Joint return/factor observations for one MSA.
#[derive(Debug, Clone, PartialEq)]
pub struct JointObservations {
    pub start: Quarter,
    pub returns: Vec<f64>,
    /// One row per quarter, one column per factor in panel order.
    pub factors: DMatrix<f64>,
}

impl JointObservations {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Alignment {
    Observed(JointObservations),
    Skipped,
}

/// Intersects each MSA's returns with the factor coverage inside `window`.
pub fn align(
    panel: &ReturnPanel,
    factors: &FactorPanel,
    window: (Quarter, Quarter),
) -> Result<BTreeMap<String, Alignment>> {
    let (w0, w1) = window;
    if w0 > w1 {
        return Err(Error::InvalidArgument(format!("empty window {w0}..{w1}")));
    }
    let span = factors.common_span();
    let mut out = BTreeMap::new();
    for (id, s) in panel.series() {
        let alignment = match span {
            Some((f0, f1)) => {
                let first = w0.max(f0).max(s.start);
                let last = w1.min(f1).min(s.last());
                if first > last {
                    Alignment::Skipped
                } else {
                    let returns = s.slice(first, last).expect("covered").to_vec();
                    Alignment::Observed(JointObservations {
                        start: first,
                        returns,
                        factors: factors.design_block(first, last).expect("covered"),
                    })
                }
            }
            None => Alignment::Skipped,
        };
        out.insert(id.clone(), alignment);
    }
    Ok(out)
}

/// How the equal-weighted index combines member log levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IndexAveraging {
    /// Arithmetic mean of rebased log levels.
    #[default]
    LogLevels,
    /// Log of the arithmetic mean of rebased levels.
    Levels,
}

/// Equal-weighted log price index of `subset`, on the quarters where every
/// member has a price level, rebased to 0 at the first of them.
pub fn equal_weighted_log_index(
    panel: &ReturnPanel,
    subset: &[String],
    averaging: IndexAveraging,
) -> Result<Series> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty subset".into()));
    }
    let mut levels = Vec::with_capacity(subset.len());
    for id in subset {
        let r = panel
            .get(id)
            .ok_or_else(|| Error::UnknownSeries(id.clone()))?;
        levels.push((id.as_str(), cumulative_log_level(r)));
    }
    // latest start limits first; ties resolved by id for a stable message
    let (limiting, first) = levels
        .iter()
        .map(|(id, l)| (*id, l.start))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .expect("non-empty");
    let last = levels.iter().map(|(_, l)| l.last()).min().expect("non-empty");
    if first > last {
        return Err(Error::NoCommonQuarter {
            limiting: limiting.to_string(),
        });
    }
    let n = (last - first) as usize + 1;
    let m = levels.len() as f64;
    let mut values = vec![0.0; n];
    for (_, l) in &levels {
        let path = l.slice(first, last).expect("covered");
        let base = path[0];
        for (acc, &v) in values.iter_mut().zip(path) {
            *acc += match averaging {
                IndexAveraging::LogLevels => v - base,
                IndexAveraging::Levels => (v - base).exp(),
            };
        }
    }
    for v in &mut values {
        *v /= m;
        if averaging == IndexAveraging::Levels {
            *v = v.ln();
        }
    }
    Series::new(first, values)
}

/// Chain-linked equal-weighted log index over an unbalanced panel: each
/// quarter adds the mean return of the members active in that quarter.
pub fn chained_equal_weighted_index(panel: &ReturnPanel, subset: &[String]) -> Result<Series> {
    let members: Vec<&Series> = subset
        .iter()
        .map(|id| panel.get(id).ok_or_else(|| Error::UnknownSeries(id.clone())))
        .collect::<Result<_>>()?;
    let first = members
        .iter()
        .map(|s| s.start)
        .min()
        .ok_or_else(|| Error::InvalidArgument("empty subset".into()))?;
    let last = members.iter().map(|s| s.last()).max().expect("non-empty");
    let mut values = vec![0.0];
    let mut acc = 0.0;
    for q in Quarter::range_inclusive(first, last) {
        let (sum, count) = members
            .iter()
            .filter_map(|s| s.value_at(q))
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            return Err(Error::MissingQuarter {
                series: "equal-weighted index".into(),
                quarter: q,
            });
        }
        acc += sum / count as f64 / 100.0;
        values.push(acc);
    }
    Series::new(first - 1, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn q(s: &str) -> Quarter {
        s.parse().unwrap()
    }

    fn meta(id: &str, name: &str, state: &str) -> (String, MsaMeta) {
        (id.to_string(), MsaMeta::derive(id, name, state).unwrap())
    }

    fn panel(entries: &[(&str, &str, Vec<f64>)]) -> ReturnPanel {
        let mut series = BTreeMap::new();
        let mut metas = BTreeMap::new();
        for (id, start, vals) in entries {
            series.insert(id.to_string(), Series::new(q(start), vals.clone()).unwrap());
            let (k, m) = meta(id, id, "TX");
            metas.insert(k, m);
        }
        ReturnPanel::new(series, metas).unwrap()
    }

    #[test]
    fn quarter_render_and_parse() {
        assert_eq!(Quarter::from_ordinal(0).to_string(), "1975Q1");
        assert_eq!(q("2010Q1").ordinal(), 35 * 4);
        assert_eq!(q("1983q4") - q("1975Q1"), 35);
        assert!("1974Q4".parse::<Quarter>().is_err());
        assert!("1990Q5".parse::<Quarter>().is_err());
        assert!("199Q1".parse::<Quarter>().is_err());
    }

    #[test]
    fn quarter_round_trip_whole_range() {
        for ord in 0..=q("2100Q4").ordinal() {
            let qq = Quarter::from_ordinal(ord);
            assert_eq!(qq.to_string().parse::<Quarter>().unwrap(), qq);
        }
    }

    proptest! {
        #[test]
        fn quarter_shifts_compose(a in 0u32..500, b in 0i64..200, c in 0i64..200) {
            let q0 = Quarter::from_ordinal(a);
            let ab = q0.checked_shift(b).unwrap().checked_shift(c).unwrap();
            let ba = q0.checked_shift(c).unwrap().checked_shift(b).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab - q0, b + c);
        }
    }

    #[test]
    fn log_return_examples() {
        let flat = Series::new(q("1990Q1"), vec![100.0, 100.0, 100.0]).unwrap();
        let r = log_return(&flat).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
        assert_eq!(r.start, q("1990Q2"));

        let up = Series::new(q("1990Q1"), vec![100.0, 100.0 * 0.02f64.exp()]).unwrap();
        assert_abs_diff_eq!(log_return(&up).unwrap().values[0], 2.0, epsilon = 1e-12);
        // a level rounded to four decimals is only good to about 3e-5
        let rounded = Series::new(q("1990Q1"), vec![100.0, 102.0201]).unwrap();
        assert_abs_diff_eq!(log_return(&rounded).unwrap().values[0], 2.0, epsilon = 1e-4);

        let down = Series::new(q("1990Q1"), vec![100.0, 95.122942]).unwrap();
        assert_abs_diff_eq!(log_return(&down).unwrap().values[0], -5.0, epsilon = 1e-4);
    }

    #[test]
    fn log_return_rejects_non_positive() {
        let s = Series::new(q("1990Q1"), vec![100.0, 0.0, 101.0]).unwrap();
        match log_return(&s) {
            Err(Error::NonPositive { quarter, .. }) => assert_eq!(quarter, q("1990Q2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn cumulative_sum_reconstructs_log_levels(
            levels in prop::collection::vec(1.0f64..1000.0, 2..60)
        ) {
            let s = Series::new(q("1980Q1"), levels.clone()).unwrap();
            let path = cumulative_log_level(&log_return(&s).unwrap());
            let base = levels[0].ln();
            for (i, l) in levels.iter().enumerate() {
                let want = l.ln() - base;
                prop_assert!((path.values[i] - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn msa_meta_classification() {
        let la = MsaMeta::derive("31084", "Los Angeles-Long Beach-Glendale, CA", "CA").unwrap();
        assert_eq!(la.division, CensusDivision::California);
        assert_eq!(la.coast, CoastFlag::Coastal);
        let fresno = MsaMeta::derive("23420", "Fresno", "ca").unwrap();
        assert_eq!(fresno.coast, CoastFlag::Inland);
        let seattle = MsaMeta::derive("42644", "Seattle", "WA").unwrap();
        assert_eq!(seattle.division, CensusDivision::D1);
        assert_eq!(seattle.coast, CoastFlag::NotCalifornia);
        assert!(MsaMeta::derive("x", "Nowhere", "ZZ").is_err());
    }

    #[test]
    fn align_counts_quarters() {
        use crate::ingest::{FactorPanel, FactorSpec, Transform};
        let p = panel(&[("a", "1980Q1", vec![0.5; (q("2010Q1") - q("1980Q1") + 1) as usize])]);
        let n_fac = (q("2010Q1") - q("1977Q4") + 1) as usize;
        let fac = FactorPanel::from_transformed(vec![(
            FactorSpec::new("F", Transform::LogLevel),
            Series::new(q("1977Q4"), (0..n_fac).map(|i| i as f64).collect()).unwrap(),
        )])
        .unwrap();
        let out = align(&p, &fac, (q("1983Q4"), q("2010Q1"))).unwrap();
        match &out["a"] {
            Alignment::Observed(j) => {
                assert_eq!(j.len(), 106);
                assert_eq!(j.start, q("1983Q4"));
                assert_eq!(j.factors.nrows(), 106);
            }
            Alignment::Skipped => panic!("expected observations"),
        }

        let one = align(&p, &fac, (q("1990Q1"), q("1990Q1"))).unwrap();
        assert!(matches!(&one["a"], Alignment::Observed(j) if j.len() == 1));

        let disjoint = panel(&[("b", "1975Q2", vec![1.0; 4])]);
        let out = align(&disjoint, &fac, (q("1975Q1"), q("2010Q1"))).unwrap();
        assert_eq!(out["b"], Alignment::Skipped);
    }

    #[test]
    fn equal_weighted_examples() {
        // log levels {0, 0.02} and {0, 0.04}
        let p = panel(&[("a", "1990Q2", vec![2.0]), ("b", "1990Q2", vec![4.0])]);
        let ids = vec!["a".to_string(), "b".to_string()];
        let idx = equal_weighted_log_index(&p, &ids, IndexAveraging::LogLevels).unwrap();
        assert_eq!(idx.start, q("1990Q1"));
        assert_abs_diff_eq!(idx.values[0], 0.0);
        assert_abs_diff_eq!(idx.values[1], 0.03, epsilon = 1e-12);

        let single = equal_weighted_log_index(&p, &ids[..1], IndexAveraging::LogLevels).unwrap();
        assert_eq!(single, cumulative_log_level(p.get("a").unwrap()));

        let twins = panel(&[("a", "1990Q2", vec![1.0, -2.0]), ("b", "1990Q2", vec![1.0, -2.0])]);
        let both = equal_weighted_log_index(&twins, &ids, IndexAveraging::Levels).unwrap();
        let alone = equal_weighted_log_index(&twins, &ids[..1], IndexAveraging::Levels).unwrap();
        for (x, y) in both.values.iter().zip(&alone.values) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn equal_weighted_rebases_at_first_common_quarter() {
        let p = panel(&[("a", "1990Q1", vec![1.0, 1.0, 1.0]), ("b", "1990Q3", vec![3.0])]);
        let ids = vec!["a".to_string(), "b".to_string()];
        let idx = equal_weighted_log_index(&p, &ids, IndexAveraging::LogLevels).unwrap();
        assert_eq!(idx.start, q("1990Q2"));
        assert_eq!(idx.len(), 2);
        assert_abs_diff_eq!(idx.values[1], 0.02, epsilon = 1e-12);
    }

    #[test]
    fn equal_weighted_no_common_quarter() {
        let p = panel(&[("a", "1980Q1", vec![1.0; 3]), ("b", "1990Q1", vec![1.0; 3])]);
        let ids = vec!["a".to_string(), "b".to_string()];
        match equal_weighted_log_index(&p, &ids, IndexAveraging::LogLevels) {
            Err(Error::NoCommonQuarter { limiting }) => assert_eq!(limiting, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn equal_weighted_is_permutation_invariant(
            rets in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 2..6),
            rot in 0usize..6
        ) {
            let entries: Vec<(String, Vec<f64>)> = rets
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("m{i}"), r.clone()))
                .collect();
            let refs: Vec<(&str, &str, Vec<f64>)> = entries
                .iter()
                .map(|(id, r)| (id.as_str(), "1990Q1", r.clone()))
                .collect();
            let p = panel(&refs);
            let ids: Vec<String> = entries.iter().map(|(id, _)| id.clone()).collect();
            let mut rotated = ids.clone();
            rotated.rotate_left(rot % ids.len());
            rotated.reverse();
            for mode in [IndexAveraging::LogLevels, IndexAveraging::Levels] {
                let a = equal_weighted_log_index(&p, &ids, mode).unwrap();
                let b = equal_weighted_log_index(&p, &rotated, mode).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn chained_index_handles_ragged_members() {
        let p = panel(&[("a", "1990Q1", vec![2.0, 2.0, 2.0]), ("b", "1990Q2", vec![4.0, 4.0])]);
        let ids = vec!["a".to_string(), "b".to_string()];
        let idx = chained_equal_weighted_index(&p, &ids).unwrap();
        assert_eq!(idx.start, q("1989Q4"));
        let want = [0.0, 0.02, 0.05, 0.08];
        for (x, y) in idx.values.iter().zip(want) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
    }
}
