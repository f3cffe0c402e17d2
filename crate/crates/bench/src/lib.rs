//! Benchmark inputs built from the synthetic generator.

use std::collections::BTreeMap;

use metrohpi_core::ingest::{default_factor_specs, transform_factors};
use metrohpi_core::jumps::classify_jumps;
use metrohpi_core::synth::{generate, SynthConfig};
use metrohpi_core::{FactorPanel, JumpConfig, JumpSeries, ReturnPanel};

/// A balanced 1975Q1-2010Q1 panel of `n_msas` with injected jumps.
pub fn panel(n_msas: usize, seed: u64) -> (ReturnPanel, FactorPanel) {
    let out = generate(&SynthConfig {
        seed,
        n_msas,
        jump_prob: 0.02,
        ..SynthConfig::default()
    })
    .expect("synthetic panel");
    let factors = transform_factors(&out.factor_levels, &default_factor_specs()).expect("factor transforms");
    (out.hpi.returns().expect("returns"), factors)
}

pub fn jump_series(panel: &ReturnPanel) -> BTreeMap<String, JumpSeries> {
    let cfg = JumpConfig::default();
    panel
        .series()
        .iter()
        .map(|(id, s)| (id.clone(), classify_jumps(s, &cfg).expect("jump statistics")))
        .collect()
}
