//! CSV ingestion for house-price indices and national factors.
//!
//! HPI files carry `msa_id,msa_name,state,year,quarter,index`; factor files
//! carry `quarter_id,series_id,value` with `YYYYQn` quarter ids. Headers are
//! matched case-insensitively. Within one series, quarters must be strictly
//! increasing and contiguous; rows of different series may interleave.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{log_return, MsaMeta, Quarter, ReturnPanel, Series};

pub const HPI_HEADER: [&str; 6] = ["msa_id", "msa_name", "state", "year", "quarter", "index"];
pub const FACTOR_HEADER: [&str; 3] = ["quarter_id", "series_id", "value"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    /// `100 · Δln(level)`; the transformed series starts one quarter later.
    LogPctChange,
    /// `ln(level)`.
    LogLevel,
}

impl Transform {
    pub fn tag(self) -> &'static str {
        match self {
            Transform::LogPctChange => "log_pct_change",
            Transform::LogLevel => "log_level",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorSpec {
    pub key: String,
    pub transform: Transform,
}

impl FactorSpec {
    pub fn new(key: &str, transform: Transform) -> Self {
        FactorSpec {
            key: key.to_string(),
            transform,
        }
    }
}

/// The twelve national factors, in the order they enter the design matrix.
pub fn default_factor_specs() -> Vec<FactorSpec> {
    use Transform::*;
    [
        ("CNP16OV", LogPctChange),
        ("CPILFESL", LogPctChange),
        ("FEDFUNDS", LogLevel),
        ("GS10", LogLevel),
        ("INDPRO", LogPctChange),
        ("PAYEMS", LogPctChange),
        ("PERMIT1", LogLevel),
        ("PPIITM", LogPctChange),
        ("UMCSENT", LogLevel),
        ("UNRATE", LogLevel),
        ("SP500", LogPctChange),
        ("INCOME", LogPctChange),
    ]
    .into_iter()
    .map(|(k, t)| FactorSpec::new(k, t))
    .collect()
}

/// Transformed national factors on the quarter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    factors: Vec<(FactorSpec, Series)>,
}

impl FactorPanel {
    pub fn from_transformed(factors: Vec<(FactorSpec, Series)>) -> Result<Self> {
        for (i, (spec, s)) in factors.iter().enumerate() {
            if factors[..i].iter().any(|(other, _)| other.key == spec.key) {
                return Err(Error::InvalidArgument(format!("duplicate factor `{}`", spec.key)));
            }
            if s.is_empty() {
                return Err(Error::Insufficient(format!("factor `{}` is empty", spec.key)));
            }
        }
        Ok(FactorPanel { factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FactorSpec, &Series)> {
        self.factors.iter().map(|(k, s)| (k, s))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|(k, _)| k.key.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&Series> {
        self.factors.iter().find(|(k, _)| k.key == key).map(|(_, s)| s)
    }

    /// Quarters on which every factor is observed.
    pub fn common_span(&self) -> Option<(Quarter, Quarter)> {
        let first = self.factors.iter().map(|(_, s)| s.start).max()?;
        let last = self.factors.iter().map(|(_, s)| s.last()).min()?;
        (first <= last).then_some((first, last))
    }

    /// Factor values for `[first, last]`, one row per quarter.
    pub fn design_block(&self, first: Quarter, last: Quarter) -> Option<DMatrix<f64>> {
        let cols: Vec<&[f64]> = self
            .factors
            .iter()
            .map(|(_, s)| s.slice(first, last))
            .collect::<Option<_>>()?;
        let n = (last - first) as usize + 1;
        Some(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
    }
}

/// Parsed house-price index levels with derived metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct HpiData {
    pub levels: BTreeMap<String, Series>,
    pub meta: BTreeMap<String, MsaMeta>,
}

impl HpiData {
    pub fn returns(&self) -> Result<ReturnPanel> {
        ReturnPanel::from_levels(&self.levels, self.meta.clone())
    }
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let ok = found.len() == expected.len()
        && found
            .iter()
            .zip(expected)
            .all(|(f, e)| f.trim().eq_ignore_ascii_case(e));
    if ok {
        Ok(())
    } else {
        Err(Error::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

/// Accumulates contiguous per-key runs, rejecting duplicates, reordering and gaps.
struct SeriesBuilder {
    path: PathBuf,
    runs: BTreeMap<String, (Quarter, Vec<f64>)>,
}

impl SeriesBuilder {
    fn new(path: &Path) -> Self {
        SeriesBuilder {
            path: path.to_path_buf(),
            runs: BTreeMap::new(),
        }
    }

    fn push(&mut self, row: usize, key: &str, q: Quarter, value: f64) -> Result<()> {
        let row_err = |message: String| Error::Row {
            path: self.path.clone(),
            row,
            message,
        };
        match self.runs.get_mut(key) {
            None => {
                self.runs.insert(key.to_string(), (q, vec![value]));
            }
            Some((start, values)) => {
                let next = *start + values.len() as u32;
                if q < *start {
                    return Err(row_err(format!("quarter {q} out of order for `{key}`")));
                }
                if q < next {
                    return Err(row_err(format!("duplicate quarter {q} for `{key}`")));
                }
                if q > next {
                    return Err(Error::MissingQuarter {
                        series: key.to_string(),
                        quarter: next,
                    });
                }
                values.push(value);
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<BTreeMap<String, Series>> {
        self.runs
            .into_iter()
            .map(|(k, (start, values))| Series::new(start, values).map(|s| (k, s)))
            .collect()
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_f64(path: &Path, row: usize, field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Row {
            path: path.to_path_buf(),
            row,
            message: format!("invalid {what} `{field}`"),
        })
}

pub fn parse_hpi_csv(path: &Path) -> Result<HpiData> {
    parse_hpi_reader(open(path)?, path)
}

/// Parses HPI rows from any reader; `path` labels diagnostics.
pub fn parse_hpi_reader<R: Read>(reader: R, path: &Path) -> Result<HpiData> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(path, rdr.headers().map_err(csv_err)?, &HPI_HEADER)?;

    let mut builder = SeriesBuilder::new(path);
    let mut meta: BTreeMap<String, MsaMeta> = BTreeMap::new();
    let mut n_rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            row,
            message,
        };
        let (id, name, state) = (&rec[0], &rec[1], &rec[2]);
        let year: i32 = rec[3]
            .parse()
            .map_err(|_| row_err(format!("invalid year `{}`", &rec[3])))?;
        let quarter: u32 = rec[4]
            .parse()
            .map_err(|_| row_err(format!("invalid quarter `{}`", &rec[4])))?;
        let q = Quarter::new(year, quarter).map_err(|e| row_err(e.to_string()))?;
        let index = parse_f64(path, row, &rec[5], "index")?;
        if index <= 0.0 {
            return Err(row_err(format!("non-positive index {index}")));
        }
        match meta.get(id) {
            Some(m) if m.name != name || m.state != state.to_ascii_uppercase() => {
                return Err(row_err(format!("inconsistent name/state for `{id}`")));
            }
            Some(_) => {}
            None => {
                let m = MsaMeta::derive(id, name, state).map_err(|e| row_err(e.to_string()))?;
                meta.insert(id.to_string(), m);
            }
        }
        builder.push(row, id, q, index)?;
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Insufficient(format!("{}: no data rows", path.display())));
    }
    Ok(HpiData {
        levels: builder.finish()?,
        meta,
    })
}

pub fn parse_factor_csv(path: &Path) -> Result<BTreeMap<String, Series>> {
    parse_factor_reader(open(path)?, path)
}

pub fn parse_factor_reader<R: Read>(reader: R, path: &Path) -> Result<BTreeMap<String, Series>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(path, rdr.headers().map_err(csv_err)?, &FACTOR_HEADER)?;

    let mut builder = SeriesBuilder::new(path);
    let mut n_rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let q: Quarter = rec[0].parse().map_err(|e: Error| Error::Row {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        let value = parse_f64(path, row, &rec[2], "value")?;
        builder.push(row, &rec[1], q, value)?;
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Insufficient(format!("{}: no data rows", path.display())));
    }
    builder.finish()
}

/// Applies each factor's transform; factors absent from `specs` are ignored.
pub fn transform_factors(raw: &BTreeMap<String, Series>, specs: &[FactorSpec]) -> Result<FactorPanel> {
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let levels = raw
            .get(&spec.key)
            .ok_or_else(|| Error::UnknownSeries(spec.key.clone()))?;
        let series = match spec.transform {
            Transform::LogPctChange => log_return(levels).map_err(|e| e.for_series(&spec.key))?,
            Transform::LogLevel => {
                if let Some((q, v)) = levels.iter().find(|&(_, v)| v <= 0.0) {
                    return Err(Error::NonPositive {
                        series: spec.key.clone(),
                        quarter: q,
                        value: v,
                    });
                }
                Series::new(levels.start, levels.values.iter().map(|v| v.ln()).collect())?
            }
        };
        out.push((spec.clone(), series));
    }
    FactorPanel::from_transformed(out)
}

pub fn write_hpi_csv<W: Write>(writer: W, data: &HpiData) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HPI_HEADER)?;
    for (id, s) in &data.levels {
        let m = &data.meta[id];
        for (q, v) in s.iter() {
            w.write_record([
                id.as_str(),
                m.name.as_str(),
                m.state.as_str(),
                &q.year().to_string(),
                &q.quarter_of_year().to_string(),
                &v.to_string(),
            ])?;
        }
    }
    w.flush()
}

pub fn write_factor_csv<W: Write>(writer: W, factors: &BTreeMap<String, Series>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FACTOR_HEADER)?;
    for (key, s) in factors {
        for (q, v) in s.iter() {
            w.write_record([q.to_string().as_str(), key.as_str(), &v.to_string()])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::CensusDivision;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    fn hpi(text: &str) -> Result<HpiData> {
        parse_hpi_reader(text.as_bytes(), Path::new("hpi.csv"))
    }

    fn factors(text: &str) -> Result<BTreeMap<String, Series>> {
        parse_factor_reader(text.as_bytes(), Path::new("factors.csv"))
    }

    #[test]
    fn hpi_single_msa() {
        let d = hpi("msa_id,msa_name,state,year,quarter,index\n\
                     1,Austin,TX,1990,1,100\n1,Austin,TX,1990,2,101\n1,Austin,TX,1990,3,102\n")
        .unwrap();
        let s = &d.levels["1"];
        assert_eq!(s.len(), 3);
        assert_eq!(s.start.to_string(), "1990Q1");
        assert_eq!(d.meta["1"].division, CensusDivision::D4);
    }

    #[test]
    fn hpi_header_is_case_insensitive_but_exact() {
        assert!(hpi("MSA_ID,Msa_Name,STATE,year,quarter,index\n1,A,TX,1990,1,100\n").is_ok());
        assert!(matches!(
            hpi("msa_id,name,state,year,quarter,index\n1,A,TX,1990,1,100\n"),
            Err(Error::Header { .. })
        ));
    }

    #[test]
    fn hpi_duplicate_reports_row() {
        let err = hpi("msa_id,msa_name,state,year,quarter,index\n\
                       1,A,TX,1990,1,100\n1,A,TX,1990,2,101\n1,A,TX,1990,2,101\n")
        .unwrap_err();
        match err {
            Error::Row { row, message, .. } => {
                assert_eq!(row, 4);
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hpi_out_of_order_and_gap_and_state() {
        let e = hpi("msa_id,msa_name,state,year,quarter,index\n\
                     1,A,TX,1990,2,100\n1,A,TX,1990,1,101\n")
        .unwrap_err();
        assert!(e.to_string().contains("out of order"), "{e}");

        let e = hpi("msa_id,msa_name,state,year,quarter,index\n\
                     1,A,TX,1990,1,100\n1,A,TX,1990,3,101\n")
        .unwrap_err();
        assert!(matches!(e, Error::MissingQuarter { ref quarter, .. } if quarter.to_string() == "1990Q2"));

        let e = hpi("msa_id,msa_name,state,year,quarter,index\n1,A,XX,1990,1,100\n").unwrap_err();
        assert!(e.to_string().contains("unknown state"), "{e}");

        assert!(hpi("msa_id,msa_name,state,year,quarter,index\n").is_err());
    }

    #[test]
    fn factor_rows() {
        let f = factors("quarter_id,series_id,value\n1975Q1,FEDFUNDS,6.3\n1975Q2,FEDFUNDS,5.4\n\
                         1975Q3,FEDFUNDS,6.2\n1975Q4,FEDFUNDS,5.5\n")
        .unwrap();
        assert_eq!(f["FEDFUNDS"].len(), 4);

        let e = factors("quarter_id,series_id,value\n1975Q1,GS10,7\n1975Q3,GS10,7\n").unwrap_err();
        assert!(e.to_string().contains("1975Q2"), "{e}");

        let f = factors("quarter_id,series_id,value\n1977Q4,UMCSENT,83.1\n1978Q1,UMCSENT,84\n").unwrap();
        assert_eq!(f["UMCSENT"].start.to_string(), "1977Q4");
    }

    #[test]
    fn transform_examples() {
        let q = |s: &str| s.parse::<Quarter>().unwrap();
        let mut raw = BTreeMap::new();
        raw.insert("SP500".to_string(), Series::new(q("1990Q1"), vec![100.0, 110.0]).unwrap());
        raw.insert("UNRATE".to_string(), Series::new(q("1990Q1"), vec![7.4, 7.4]).unwrap());
        raw.insert("PERMIT1".to_string(), Series::new(q("1990Q1"), vec![50.0; 5]).unwrap());
        let specs = vec![
            FactorSpec::new("SP500", Transform::LogPctChange),
            FactorSpec::new("UNRATE", Transform::LogLevel),
            FactorSpec::new("PERMIT1", Transform::LogLevel),
        ];
        let fp = transform_factors(&raw, &specs).unwrap();
        let sp = fp.get("SP500").unwrap();
        assert_eq!(sp.start, q("1990Q2"));
        assert_abs_diff_eq!(sp.values[0], 9.531, epsilon = 1e-3);
        assert_abs_diff_eq!(fp.get("UNRATE").unwrap().values[0], 2.0015, epsilon = 1e-4);
        let permits = &fp.get("PERMIT1").unwrap().values;
        assert!(permits.iter().all(|&v| v == permits[0]));
        assert_eq!(fp.len(), 3);
        assert_eq!(fp.common_span(), Some((q("1990Q2"), q("1990Q2"))));

        raw.insert("GS10".to_string(), Series::new(q("1990Q1"), vec![1.0, -1.0]).unwrap());
        let e = transform_factors(&raw, &[FactorSpec::new("GS10", Transform::LogLevel)]).unwrap_err();
        assert!(matches!(e, Error::NonPositive { ref series, ref quarter, .. }
            if series == "GS10" && quarter.to_string() == "1990Q2"));
    }

    #[test]
    fn default_factor_set_matches_appendix() {
        let specs = default_factor_specs();
        assert_eq!(specs.len(), 12);
        let logged: Vec<&str> = specs
            .iter()
            .filter(|s| s.transform == Transform::LogLevel)
            .map(|s| s.key.as_str())
            .collect();
        assert_eq!(logged, ["FEDFUNDS", "GS10", "PERMIT1", "UMCSENT", "UNRATE"]);
    }

    #[test]
    fn division_histogram_matches_state_lists() {
        // independent map transcribed from the division note
        let lists: [(&str, &str); 10] = [
            ("1", "AK HI OR WA"),
            ("2", "AZ CO ID MT NM NV UT WY"),
            ("3", "IA KS MN MO ND NE SD"),
            ("4", "AR LA OK TX"),
            ("5", "IL IN MI OH WI"),
            ("6", "AL KY MS TN"),
            ("7", "DC DE FL GA MD NC SC VA WV"),
            ("8", "NJ NY PA"),
            ("9", "CT MA ME NH RI VT"),
            ("CA", "CA"),
        ];
        let mut state_div = HashMap::new();
        for (d, states) in lists {
            for s in states.split_whitespace() {
                state_div.insert(s, d);
            }
        }
        let mut states: Vec<&str> = state_div.keys().copied().collect();
        states.sort();
        assert_eq!(states.len(), 51);

        let mut text = String::from("msa_id,msa_name,state,year,quarter,index\n");
        let mut expected: BTreeMap<&str, usize> = BTreeMap::new();
        for i in 0..384 {
            let st = states[(i * 7) % states.len()];
            *expected.entry(state_div[st]).or_default() += 1;
            text.push_str(&format!("m{i:03},City {i},{st},1990,1,100\n"));
        }
        let d = hpi(&text).unwrap();
        let mut got: BTreeMap<&str, usize> = BTreeMap::new();
        for m in d.meta.values() {
            *got.entry(m.division.label()).or_default() += 1;
        }
        assert_eq!(got, expected);
        assert_eq!(d.meta.len(), 384);
    }

    #[test]
    fn parse_write_parse_is_idempotent() {
        let text = "msa_id,msa_name,state,year,quarter,index\n\
                    b,\"Santa Ana-Anaheim, CA\",CA,1990,4,101.25\na,Austin,TX,1990,1,100\n\
                    b,\"Santa Ana-Anaheim, CA\",CA,1991,1,99.875\na,Austin,TX,1990,2,100.3333333333\n";
        let first = hpi(text).unwrap();
        let mut buf = Vec::new();
        write_hpi_csv(&mut buf, &first).unwrap();
        let second = parse_hpi_reader(buf.as_slice(), Path::new("x")).unwrap();
        assert_eq!(first, second);

        let f = factors("quarter_id,series_id,value\n1975Q1,GS10,7.125\n1975Q2,GS10,0.1\n").unwrap();
        let mut buf = Vec::new();
        write_factor_csv(&mut buf, &f).unwrap();
        assert_eq!(parse_factor_reader(buf.as_slice(), Path::new("x")).unwrap(), f);
    }
}
