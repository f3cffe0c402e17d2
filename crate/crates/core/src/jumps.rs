//! Lee–Mykland jump detection on quarterly returns.
//!
//! Each return is scaled by the square root of the bipower variation of all
//! strictly earlier returns, then by √(2/π) so the statistic is unit normal
//! under the no-jump null.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Quarter, Series};

pub const LM_SCALE: f64 = 0.797_884_560_802_865_4; // √(2/π)

/// `(1/(T−1)) Σ_{t≥2} |R_t||R_{t−1}|`.
pub fn bipower_variation(returns: &[f64]) -> Result<f64> {
    let mut state = BipowerState::default();
    for &r in returns {
        state.push(r);
    }
    state
        .value()
        .ok_or_else(|| Error::Insufficient(format!("bipower variation needs 2 returns, got {}", returns.len())))
}

/// Running bipower accumulator over an expanding window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BipowerState {
    sum: f64,
    count: usize,
    last: Option<f64>,
}

impl BipowerState {
    pub fn push(&mut self, r: f64) {
        if let Some(prev) = self.last {
            self.sum += r.abs() * prev.abs();
        }
        self.last = Some(r);
        self.count += 1;
    }

    /// Number of returns accumulated.
    pub fn t_k(&self) -> usize {
        self.count
    }

    pub fn value(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.sum / (self.count - 1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LmScaling {
    /// Multiplied by √(2/π); unit normal under the null.
    #[default]
    Scaled,
    Unscaled,
}

/// LM statistic for `next` given its history; `None` when the history has zero bipower variation.
pub fn lm_statistic(next: f64, history: &[f64], scaling: LmScaling) -> Result<Option<f64>> {
    let b = bipower_variation(history)?;
    Ok(lm_from_bipower(next, b, scaling))
}

fn lm_from_bipower(next: f64, b: f64, scaling: LmScaling) -> Option<f64> {
    if b <= 0.0 {
        return None;
    }
    let l = next / b.sqrt();
    Some(match scaling {
        LmScaling::Scaled => l * LM_SCALE,
        LmScaling::Unscaled => l,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpConfig {
    pub min_history: usize,
    pub threshold_10pct: f64,
    pub threshold_big: f64,
    pub scaling: LmScaling,
}

impl Default for JumpConfig {
    fn default() -> Self {
        JumpConfig {
            min_history: 8,
            threshold_10pct: 1.65,
            threshold_big: 2.0,
            scaling: LmScaling::Scaled,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpSeries {
    /// First tested quarter: returns start + min_history.
    pub start: Quarter,
    /// `None` where the history had zero bipower variation.
    pub lm: Vec<Option<f64>>,
    pub jump_10pct: Vec<bool>,
    pub jump_big: Vec<bool>,
    pub min_history: usize,
}

impl JumpSeries {
    pub fn len(&self) -> usize {
        self.lm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lm.is_empty()
    }

    pub fn last(&self) -> Quarter {
        self.start + (self.lm.len() as u32 - 1)
    }

    fn index(&self, q: Quarter) -> Option<usize> {
        (q >= self.start && q <= self.last()).then(|| (q - self.start) as usize)
    }

    pub fn lm_at(&self, q: Quarter) -> Option<f64> {
        self.index(q).and_then(|i| self.lm[i])
    }

    /// LM where `|LM| > gate`, zero elsewhere (including undefined quarters).
    pub fn censored(&self, gate: f64) -> Series {
        let values = self
            .lm
            .iter()
            .map(|l| match l {
                Some(v) if v.abs() > gate => *v,
                _ => 0.0,
            })
            .collect();
        Series::new(self.start, values).expect("finite LM values")
    }
}

/// Tests every return from `min_history` onward against its expanding history.
pub fn classify_jumps(returns: &Series, cfg: &JumpConfig) -> Result<JumpSeries> {
    if cfg.min_history < 2 {
        return Err(Error::InvalidArgument(format!(
            "min_history must be at least 2, got {}",
            cfg.min_history
        )));
    }
    if returns.len() < cfg.min_history + 1 {
        return Err(Error::Insufficient(format!(
            "jump test needs {} returns, got {}",
            cfg.min_history + 1,
            returns.len()
        )));
    }
    let v = &returns.values;
    let mut state = BipowerState::default();
    for &r in &v[..cfg.min_history] {
        state.push(r);
    }
    let n = v.len() - cfg.min_history;
    let mut lm = Vec::with_capacity(n);
    let mut jump_10pct = Vec::with_capacity(n);
    let mut jump_big = Vec::with_capacity(n);
    for &r in &v[cfg.min_history..] {
        let stat = lm_from_bipower(r, state.value().expect("history ≥ 2"), cfg.scaling);
        let abs = stat.map_or(0.0, f64::abs);
        lm.push(stat);
        jump_10pct.push(abs > cfg.threshold_10pct);
        jump_big.push(abs > cfg.threshold_big);
        state.push(r);
    }
    Ok(JumpSeries {
        start: returns.start + cfg.min_history as u32,
        lm,
        jump_10pct,
        jump_big,
        min_history: cfg.min_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpThreshold {
    TenPercent,
    Big,
}

/// Percentage of members with a defined LM that are flagged, per quarter.
/// Quarters with no defined member are omitted.
pub fn jump_incidence(
    series: &BTreeMap<String, JumpSeries>,
    members: &[String],
    threshold: JumpThreshold,
) -> Vec<(Quarter, f64)> {
    let present: Vec<&JumpSeries> = members.iter().filter_map(|id| series.get(id)).collect();
    let Some(first) = present.iter().map(|s| s.start).min() else {
        return Vec::new();
    };
    let last = present.iter().map(|s| s.last()).max().expect("non-empty");
    let mut out = Vec::new();
    for q in Quarter::range_inclusive(first, last) {
        let (mut active, mut flagged) = (0usize, 0usize);
        for s in &present {
            let Some(i) = s.index(q) else { continue };
            if s.lm[i].is_none() {
                continue;
            }
            active += 1;
            let hit = match threshold {
                JumpThreshold::TenPercent => s.jump_10pct[i],
                JumpThreshold::Big => s.jump_big[i],
            };
            flagged += hit as usize;
        }
        if active > 0 {
            out.push((q, 100.0 * flagged as f64 / active as f64));
        }
    }
    out
}
