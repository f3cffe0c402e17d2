//! Seeded synthetic panels with known ground truth.
//!
//! Returns follow a linear factor model with a chosen population R²; jumps and
//! lead-lag satellites can be layered on top. Everything is reproducible from
//! the seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{default_factor_specs, HpiData, Transform};
use crate::panel::{MsaMeta, Quarter, Series};

/// Named MSAs used first, so the default contagion regions resolve.
const NAMED_MSAS: [(&str, &str, &str); 24] = [
    ("31084", "Los Angeles-Long Beach-Glendale", "CA"),
    ("40140", "Riverside-San Bernardino-Ontario", "CA"),
    ("19124", "Dallas-Plano-Irving", "TX"),
    ("41884", "San Francisco-San Mateo-Redwood City", "CA"),
    ("12540", "Bakersfield-Delano", "CA"),
    ("23420", "Fresno", "CA"),
    ("37100", "Oxnard-Thousand Oaks-Ventura", "CA"),
    ("41740", "San Diego-Carlsbad-San Marcos", "CA"),
    ("42044", "Santa Ana-Anaheim-Irvine", "CA"),
    ("42200", "Santa Barbara-Santa Maria-Goleta", "CA"),
    ("36084", "Oakland-Fremont-Hayward", "CA"),
    ("40900", "Sacramento-Arden-Arcade-Roseville", "CA"),
    ("41940", "San Jose-Sunnyvale-Santa Clara", "CA"),
    ("44700", "Stockton", "CA"),
    ("42220", "Santa Rosa-Petaluma", "CA"),
    ("42020", "San Luis Obispo-Paso Robles", "CA"),
    ("14484", "Boston-Quincy", "MA"),
    ("35644", "New York-White Plains-Wayne", "NY"),
    ("16974", "Chicago-Naperville-Joliet", "IL"),
    ("12060", "Atlanta-Sandy Springs-Marietta", "GA"),
    ("38060", "Phoenix-Mesa-Scottsdale", "AZ"),
    ("42644", "Seattle-Bellevue-Everett", "WA"),
    ("33460", "Minneapolis-St. Paul-Bloomington", "MN"),
    ("34980", "Nashville-Davidson-Murfreesboro", "TN"),
];

const FILLER_STATES: [&str; 12] = ["TX", "OH", "FL", "NY", "CO", "MO", "LA", "KY", "WA", "PA", "MA", "WI"];

/// Mean and standard deviation of each factor in transformed units.
fn factor_moments(key: &str) -> (f64, f64) {
    match key {
        "CNP16OV" => (0.3, 0.15),
        "CPILFESL" => (0.9, 0.4),
        "FEDFUNDS" => (1.5, 0.6),
        "GS10" => (1.9, 0.3),
        "INDPRO" => (0.5, 1.5),
        "PAYEMS" => (0.4, 0.6),
        "PERMIT1" => (7.0, 0.3),
        "PPIITM" => (0.7, 1.5),
        "UMCSENT" => (4.5, 0.12),
        "UNRATE" => (1.8, 0.25),
        "SP500" => (1.8, 7.0),
        _ => (1.4, 0.8),
    }
}

/// First quarter with survey-sentiment data.
pub fn umcsent_start() -> Quarter {
    Quarter::new(1977, 4).expect("valid quarter")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadLagSpec {
    pub primary: String,
    pub satellite: String,
    /// Coefficients on the primary return at lags 0, 1, ...
    pub coefficients: Vec<f64>,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_msas: usize,
    /// Quarter of the first index level.
    pub first: Quarter,
    pub last: Quarter,
    pub target_r2: f64,
    /// Total return standard deviation, in percent per quarter.
    pub return_sd: f64,
    /// Latest possible first index quarter when starts are ragged; `None` for a balanced panel.
    pub ragged_until: Option<Quarter>,
    pub jump_prob: f64,
    pub jump_size_sd: f64,
    pub lead_lag: Vec<LeadLagSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_msas: 3,
            first: Quarter::new(1975, 1).expect("valid quarter"),
            last: Quarter::new(2010, 1).expect("valid quarter"),
            target_r2: 0.5,
            return_sd: 2.4,
            ragged_until: None,
            jump_prob: 0.0,
            jump_size_sd: 10.0,
            lead_lag: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMsa {
    pub msa_id: String,
    pub name: String,
    pub state: String,
    pub first_level: Quarter,
    pub alpha: f64,
    /// Loadings on demeaned transformed factors, in factor order.
    pub loadings: Vec<f64>,
    pub noise_sd: f64,
    /// `None` for lead-lag satellites.
    pub population_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthJump {
    pub msa_id: String,
    pub quarter: Quarter,
    /// Added return, in percent.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub target_r2: f64,
    pub factor_keys: Vec<String>,
    pub msas: Vec<TruthMsa>,
    pub jumps: Vec<TruthJump>,
    pub lead_lag: Vec<LeadLagSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub hpi: HpiData,
    /// Raw factor levels, ready for the factor CSV.
    pub factor_levels: BTreeMap<String, Series>,
    pub truth: SynthTruth,
}

fn msa_identity(i: usize) -> (String, String, String) {
    match NAMED_MSAS.get(i) {
        Some((id, name, state)) => (id.to_string(), name.to_string(), state.to_string()),
        None => (
            format!("9{i:04}"),
            format!("Synthetic City {i:03}"),
            FILLER_STATES[i % FILLER_STATES.len()].to_string(),
        ),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Builds a synthetic panel and its ground truth from `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    if cfg.n_msas == 0 {
        return Err(Error::InvalidArgument("n_msas must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.target_r2) {
        return Err(Error::InvalidArgument(format!("target_r2 {} outside [0, 1]", cfg.target_r2)));
    }
    if cfg.last <= cfg.first + 8 {
        return Err(Error::InvalidArgument("synthetic span shorter than 9 quarters".into()));
    }
    if !(0.0..1.0).contains(&cfg.jump_prob) {
        return Err(Error::InvalidArgument(format!("jump_prob {} outside [0, 1)", cfg.jump_prob)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let specs = default_factor_specs();
    let n_q = (cfg.last - cfg.first + 1) as usize;

    // transformed factor values indexed by quarter offset from `first`; NaN where undefined
    let mut factor_values = vec![vec![f64::NAN; n_q]; specs.len()];
    let mut factor_levels = BTreeMap::new();
    for (j, spec) in specs.iter().enumerate() {
        let (mu, sd) = factor_moments(&spec.key);
        let start = if spec.key == "UMCSENT" { umcsent_start().max(cfg.first) } else { cfg.first };
        let offset = (start - cfg.first) as usize;
        let mut levels = Vec::with_capacity(n_q - offset);
        let mut level = 100.0f64;
        for t in offset..n_q {
            let f = mu + sd * normal(&mut rng);
            match spec.transform {
                Transform::LogLevel => {
                    factor_values[j][t] = f;
                    levels.push(f.exp());
                }
                Transform::LogPctChange => {
                    if t > offset {
                        level *= (f / 100.0).exp();
                        factor_values[j][t] = f;
                    }
                    levels.push(level);
                }
            }
        }
        factor_levels.insert(spec.key.clone(), Series::new(start, levels)?);
    }
    let demeaned = |j: usize, t: usize| {
        let v = factor_values[j][t];
        if v.is_nan() {
            0.0
        } else {
            v - factor_moments(&specs[j].key).0
        }
    };

    let mut truth_msas = Vec::with_capacity(cfg.n_msas);
    let mut returns: BTreeMap<String, (usize, Vec<f64>)> = BTreeMap::new();
    let mut meta = BTreeMap::new();
    let mut jumps = Vec::new();
    for i in 0..cfg.n_msas {
        let (id, name, state) = msa_identity(i);
        let first_offset = match cfg.ragged_until {
            Some(q) if i > 0 && q > cfg.first => rng.random_range(0..=(q - cfg.first) as usize),
            _ => 0,
        }
        .min(n_q - 10);
        let alpha = 1.0 + 0.3 * normal(&mut rng);
        let raw: Vec<f64> = specs.iter().map(|s| normal(&mut rng) / factor_moments(&s.key).1).collect();
        let (loadings, noise_sd) = if cfg.target_r2 == 0.0 {
            (vec![0.0; specs.len()], cfg.return_sd)
        } else {
            let signal: f64 = raw.iter().zip(&specs).map(|(b, s)| (b * factor_moments(&s.key).1).powi(2)).sum();
            let scale = cfg.return_sd * cfg.target_r2.sqrt() / signal.sqrt();
            let noise = cfg.return_sd * (1.0 - cfg.target_r2).sqrt();
            (raw.iter().map(|b| b * scale).collect::<Vec<_>>(), noise)
        };
        let mut r = Vec::with_capacity(n_q - first_offset - 1);
        for t in first_offset + 1..n_q {
            let signal: f64 = loadings.iter().enumerate().map(|(j, b)| b * demeaned(j, t)).sum();
            let mut v = alpha + signal + noise_sd * normal(&mut rng);
            // leave enough history for the jump test before injecting
            if cfg.jump_prob > 0.0 && t >= first_offset + 10 && rng.random::<f64>() < cfg.jump_prob {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let size = sign * cfg.jump_size_sd * cfg.return_sd;
                v += size;
                jumps.push(TruthJump {
                    msa_id: id.clone(),
                    quarter: cfg.first + t as u32,
                    size,
                });
            }
            r.push(v);
        }
        meta.insert(id.clone(), MsaMeta::derive(&id, &name, &state)?);
        returns.insert(id.clone(), (first_offset + 1, r));
        truth_msas.push(TruthMsa {
            msa_id: id,
            name,
            state,
            first_level: cfg.first + first_offset as u32,
            alpha,
            loadings,
            noise_sd,
            population_r2: Some(cfg.target_r2),
        });
    }

    for ll in &cfg.lead_lag {
        let (p_off, p_ret) = returns
            .get(&ll.primary)
            .cloned()
            .ok_or_else(|| Error::UnknownSeries(ll.primary.clone()))?;
        let (s_off, _) = returns
            .get(&ll.satellite)
            .cloned()
            .ok_or_else(|| Error::UnknownSeries(ll.satellite.clone()))?;
        if ll.coefficients.is_empty() {
            return Err(Error::InvalidArgument("lead-lag needs at least one coefficient".into()));
        }
        let first_ret = s_off.max(p_off + ll.coefficients.len() - 1);
        let sat: Vec<f64> = (first_ret..n_q)
            .map(|t| {
                let lagged: f64 = ll
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * p_ret[t - j - p_off])
                    .sum();
                lagged + ll.noise_sd * normal(&mut rng)
            })
            .collect();
        returns.insert(ll.satellite.clone(), (first_ret, sat));
        jumps.retain(|j| j.msa_id != ll.satellite);
        if let Some(m) = truth_msas.iter_mut().find(|m| m.msa_id == ll.satellite) {
            m.first_level = cfg.first + (first_ret - 1) as u32;
            m.alpha = 0.0;
            m.loadings = vec![0.0; specs.len()];
            m.noise_sd = ll.noise_sd;
            m.population_r2 = None;
        }
    }

    let mut levels = BTreeMap::new();
    for (id, (off, r)) in returns {
        let mut p = Vec::with_capacity(r.len() + 1);
        let mut level = 100.0f64;
        p.push(level);
        for v in r {
            level *= (v / 100.0).exp();
            p.push(level);
        }
        levels.insert(id, Series::new(cfg.first + (off - 1) as u32, p)?);
    }

    Ok(SynthOutput {
        hpi: HpiData { levels, meta },
        factor_levels,
        truth: SynthTruth {
            seed: cfg.seed,
            target_r2: cfg.target_r2,
            factor_keys: specs.iter().map(|s| s.key.clone()).collect(),
            msas: truth_msas,
            jumps,
            lead_lag: cfg.lead_lag.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::transform_factors;
    use approx::assert_abs_diff_eq;

    #[test]
    fn same_seed_same_panel() {
        let cfg = SynthConfig {
            n_msas: 5,
            jump_prob: 0.02,
            ragged_until: Some(Quarter::new(1990, 1).unwrap()),
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = generate(&SynthConfig { seed: 2, ..cfg.clone() }).unwrap();
        assert_ne!(generate(&cfg).unwrap().hpi, other.hpi);
    }

    #[test]
    fn factors_transform_back_to_generated_moments() {
        let out = generate(&SynthConfig::default()).unwrap();
        let panel = transform_factors(&out.factor_levels, &default_factor_specs()).unwrap();
        let (first, last) = panel.common_span().unwrap();
        assert_eq!(first, umcsent_start());
        assert_eq!(last, Quarter::new(2010, 1).unwrap());
        let unrate = panel.get("UNRATE").unwrap();
        let m = crate::stats::mean(&unrate.values);
        assert_abs_diff_eq!(m, 1.8, epsilon = 0.1);
    }

    #[test]
    fn returns_recover_model_and_jumps_are_recorded() {
        let cfg = SynthConfig {
            n_msas: 30,
            jump_prob: 0.01,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        assert_eq!(out.truth.msas.len(), 30);
        assert!(!out.truth.jumps.is_empty());
        let returns = out.hpi.returns().unwrap();
        for j in &out.truth.jumps {
            let r = returns.get(&j.msa_id).unwrap().value_at(j.quarter).unwrap();
            assert!(r.abs() > 10.0, "{r}");
        }
        for m in &out.truth.msas {
            let sd = crate::stats::sample_sd(&m.loadings).unwrap();
            assert!(sd > 0.0);
            assert_abs_diff_eq!(m.noise_sd, 2.4 * 0.5f64.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn lead_lag_satellite_follows_primary() {
        let cfg = SynthConfig {
            n_msas: 3,
            lead_lag: vec![LeadLagSpec {
                primary: "31084".into(),
                satellite: "40140".into(),
                coefficients: vec![0.6, 0.3],
                noise_sd: 0.0,
            }],
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let r = out.hpi.returns().unwrap();
        let p = r.get("31084").unwrap();
        let s = r.get("40140").unwrap();
        assert_eq!(s.start, p.start + 1);
        for (q, v) in s.iter() {
            let expect = 0.6 * p.value_at(q).unwrap() + 0.3 * p.value_at(q - 1).unwrap();
            assert_abs_diff_eq!(v, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn truth_round_trips_through_json() {
        let out = generate(&SynthConfig {
            jump_prob: 0.05,
            ..SynthConfig::default()
        })
        .unwrap();
        let text = serde_json::to_string(&out.truth).unwrap();
        let back: SynthTruth = serde_json::from_str(&text).unwrap();
        assert_eq!(back.jumps, out.truth.jumps);
    }
}
