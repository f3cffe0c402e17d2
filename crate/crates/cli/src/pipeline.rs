//! Pipeline stages and the files each one writes.

use std::collections::BTreeMap;
use std::path::Path;

use metrohpi_core::contagion::{contagion_suite, default_region_names, resolve_regions, ContagionFit, RegionTable};
use metrohpi_core::correlations::{
    division_summary, jump_corr_all_pairs, return_corr_all_pairs, stratify, JumpCorrOptions, PairSet,
};
use metrohpi_core::ingest::{
    default_factor_specs, parse_factor_csv, parse_hpi_csv, transform_factors, write_factor_csv, write_hpi_csv,
};
use metrohpi_core::integration::{
    average_members, cohort_averages, integration_report, rank_and_summarize, Characteristic, GroupSeries,
    RankedTable,
};
use metrohpi_core::jumps::{classify_jumps, jump_incidence};
use metrohpi_core::panel::chained_equal_weighted_index;
use metrohpi_core::synth::generate;
use metrohpi_core::{
    CoastFlag, ContagionOptions, Error, FactorPanel, IntegrationOptions, JumpConfig, JumpSeries,
    JumpThreshold, MsaMeta, PairMode, Quarter, ReturnPanel,
};

use crate::config::RunConfig;
use crate::output::{f, opt, Manifest, Sink};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Integrate,
    Jumps,
    Correlate,
    Contagion,
    Figures,
    Synth,
}

impl Stage {
    /// Stages executed by `run`, in order.
    pub const PIPELINE: [Stage; 6] = [
        Stage::Ingest,
        Stage::Integrate,
        Stage::Jumps,
        Stage::Correlate,
        Stage::Contagion,
        Stage::Figures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Integrate => "integrate",
            Stage::Jumps => "jumps",
            Stage::Correlate => "correlate",
            Stage::Contagion => "contagion",
            Stage::Figures => "figures",
            Stage::Synth => "synth",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::PIPELINE
            .into_iter()
            .chain([Stage::Synth])
            .find(|s| s.name() == name)
    }
}

struct Inputs {
    panel: ReturnPanel,
    factors: FactorPanel,
}

fn load(cfg: &RunConfig) -> Result<Inputs, CliError> {
    cfg.check_inputs()?;
    let panel = parse_hpi_csv(&cfg.hpi_csv)?.returns()?;
    let raw = parse_factor_csv(&cfg.factor_csv)?;
    let factors = transform_factors(&raw, &default_factor_specs())?;
    Ok(Inputs { panel, factors })
}

/// Runs `stages` in order, recording each in the manifest. Stops at the first failure.
pub fn execute(cfg: &RunConfig, stages: &[Stage]) -> Result<(), CliError> {
    let mut manifest = Manifest::load_or_new(&cfg.out_dir, &cfg.echo);
    let mut inputs: Option<Inputs> = None;
    for &stage in stages {
        let mut sink = Sink::new(&cfg.out_dir)?;
        let outcome = run_stage(stage, cfg, &mut inputs, &mut sink);
        let status = match &outcome {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        manifest.stages.insert(stage.name().to_string(), sink.into_record(&status));
        manifest.save(&cfg.out_dir)?;
        outcome?;
    }
    Ok(())
}

fn run_stage(stage: Stage, cfg: &RunConfig, inputs: &mut Option<Inputs>, sink: &mut Sink) -> Result<(), CliError> {
    if stage == Stage::Synth {
        return synth(cfg, sink);
    }
    if inputs.is_none() {
        *inputs = Some(load(cfg)?);
    }
    let inp = inputs.as_ref().expect("loaded");
    match stage {
        Stage::Ingest => ingest(inp, sink),
        Stage::Integrate => integrate(cfg, inp, sink),
        Stage::Jumps => jumps(cfg, inp, sink),
        Stage::Correlate => correlate(cfg, inp, sink),
        Stage::Contagion => contagion(cfg, inp, sink),
        Stage::Figures => figures(cfg, inp, sink),
        Stage::Synth => unreachable!(),
    }
}

fn meta_cols(m: &MsaMeta) -> [String; 4] {
    [
        m.name.clone(),
        m.state.clone(),
        m.division.label().to_string(),
        m.coast.label().to_string(),
    ]
}

fn ingest(inp: &Inputs, sink: &mut Sink) -> Result<(), CliError> {
    let meta = inp.panel.meta();
    sink.csv(
        "msa_meta.csv",
        &["msa_id", "msa_name", "state", "division", "coast"],
        meta.iter().map(|(id, m)| {
            let [a, b, c, d] = meta_cols(m);
            vec![id.clone(), a, b, c, d]
        }),
    )?;
    sink.csv(
        "returns.csv",
        &["msa_id", "quarter", "return"],
        inp.panel
            .series()
            .iter()
            .flat_map(|(id, s)| s.iter().map(move |(q, v)| vec![id.clone(), q.to_string(), f(v)])),
    )?;
    sink.csv(
        "factors_transformed.csv",
        &["quarter", "series_id", "transform", "value"],
        inp.factors.iter().flat_map(|(spec, s)| {
            s.iter()
                .map(move |(q, v)| vec![q.to_string(), spec.key.clone(), spec.transform.tag().to_string(), f(v)])
        }),
    )?;
    if let Some((a, b)) = inp.factors.common_span() {
        sink.note(format!("factor common span {a}..{b}"));
    }
    sink.note(format!("{} MSAs", inp.panel.len()));
    Ok(())
}

fn summary_rows(scope: &str, table: &RankedTable) -> Vec<Vec<String>> {
    let cell = |c: usize, pick: &dyn Fn(&metrohpi_core::integration::CharacteristicSummary) -> Option<f64>| {
        opt(table.summary[c].as_ref().and_then(pick))
    };
    let mut rows = Vec::new();
    let mut push = |stat: String, pick: &dyn Fn(&metrohpi_core::integration::CharacteristicSummary) -> Option<f64>| {
        let mut row = vec![scope.to_string(), stat];
        row.extend((0..5).map(|c| cell(c, pick)));
        rows.push(row);
    };
    push("n".into(), &|s| Some(s.n as f64));
    push("mean".into(), &|s| Some(s.mean));
    push("std_dev".into(), &|s| s.std_dev);
    for k in 0..5 {
        push(format!("q{}_min", k + 1), &move |s| s.quintile_minima[k]);
    }
    push("max".into(), &|s| Some(s.max));
    rows
}

fn r2_trend(sink: &mut Sink, g: &GroupSeries) -> Result<(), CliError> {
    sink.csv(
        &format!("r2_trend_{}.csv", g.name),
        &["quarter", "mean_r2"],
        g.points.iter().map(|(q, v)| vec![q.to_string(), f(*v)]),
    )
}

fn groups_by(meta: &BTreeMap<String, MsaMeta>, label: impl Fn(&MsaMeta) -> String) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (id, m) in meta {
        out.entry(label(m)).or_default().push(id.clone());
    }
    out
}

fn integrate(cfg: &RunConfig, inp: &Inputs, sink: &mut Sink) -> Result<(), CliError> {
    let opts = IntegrationOptions {
        window_len: cfg.window_len,
        report_span: cfg.report_span,
        dependent: cfg.dependent,
    };
    let report = integration_report(&inp.panel, &inp.factors, &opts)?;
    for (id, reason) in &report.skipped {
        sink.note(format!("skipped {id}: {reason}"));
    }
    for w in &report.warnings {
        sink.note(w.clone());
    }
    let meta = inp.panel.meta();

    let mut header = vec![
        "msa_id", "msa_name", "state", "division", "coast", "r2_first", "r2_last", "mean", "sigma", "final_r2",
        "change_r2", "trend_t",
    ];
    let rank_cols: Vec<String> = Characteristic::ALL
        .iter()
        .flat_map(|c| [format!("rank_{}", c.label()), format!("quintile_{}", c.label())])
        .collect();
    header.extend(rank_cols.iter().map(String::as_str));
    sink.csv(
        "integration_per_msa.csv",
        &header,
        report.table.rows.iter().map(|row| {
            let r = &row.record;
            let s = &report.series[&r.msa_id];
            let mut v = vec![r.msa_id.clone()];
            v.extend(meta_cols(&meta[&r.msa_id]));
            v.extend([
                s.start.to_string(),
                s.last().to_string(),
                f(r.mean),
                f(r.sigma),
                opt(r.final_r2),
                opt(r.change_r2),
                opt(r.trend_t),
            ]);
            for c in 0..5 {
                v.push(opt(row.ranks[c]));
                v.push(opt(row.quintiles[c]));
            }
            v
        }),
    )?;

    let ca: Vec<_> = report
        .table
        .rows
        .iter()
        .filter(|r| meta[&r.record.msa_id].is_california())
        .map(|r| r.record.clone())
        .collect();
    let mut rows = summary_rows("us", &report.table);
    rows.extend(summary_rows("ca", &rank_and_summarize(&ca)));
    let mut sheader = vec!["scope", "statistic"];
    sheader.extend(Characteristic::ALL.iter().map(|c| c.label()));
    sink.csv("integration_summary.csv", &sheader, rows)?;

    sink.csv(
        "integration_series.csv",
        &["msa_id", "quarter", "r2"],
        report.series.iter().flat_map(|(id, s)| {
            s.r2.iter()
                .enumerate()
                .map(move |(i, v)| vec![id.clone(), (s.start + i as u32).to_string(), opt(*v)])
        }),
    )?;

    let cohorts: Vec<(String, Quarter)> = cfg
        .cohort_starts
        .iter()
        .enumerate()
        .map(|(i, q)| (format!("cohort{}", i + 1), *q))
        .collect();
    let (groups, warnings) = cohort_averages(&report.series, &cohorts);
    sink.notes.extend(warnings);
    for g in &groups {
        r2_trend(sink, g)?;
    }
    let from = Some(cfg.report_span.0);
    let all: Vec<String> = report.series.keys().cloned().collect();
    if let Some(g) = average_members("national", &report.series, &all, from) {
        r2_trend(sink, &g)?;
    }
    let mut named = groups_by(meta, |m| m.coast.label().to_string());
    named.extend(groups_by(meta, |m| format!("div{}", m.division.label())));
    for (name, members) in &named {
        match average_members(name, &report.series, members, from) {
            Some(g) => r2_trend(sink, &g)?,
            None => sink.note(format!("group {name} has no integration series")),
        }
    }
    Ok(())
}

fn jump_config(cfg: &RunConfig) -> JumpConfig {
    JumpConfig {
        min_history: cfg.min_history,
        threshold_10pct: cfg.jump_thresholds.0,
        threshold_big: cfg.jump_thresholds.1,
        scaling: cfg.lm_scaling,
    }
}

fn classify_all(cfg: &RunConfig, panel: &ReturnPanel, notes: &mut Vec<String>) -> Result<BTreeMap<String, JumpSeries>, CliError> {
    let jc = jump_config(cfg);
    let mut out = BTreeMap::new();
    for (id, s) in panel.series() {
        match classify_jumps(s, &jc) {
            Ok(j) => {
                out.insert(id.clone(), j);
            }
            Err(Error::Insufficient(msg)) => notes.push(format!("jumps skipped {id}: {msg}")),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Incidence groups: everything, then the two California coast classes.
fn incidence_groups(meta: &BTreeMap<String, MsaMeta>) -> Vec<(&'static str, Vec<String>)> {
    let pick = |flag: CoastFlag| meta.iter().filter(|(_, m)| m.coast == flag).map(|(id, _)| id.clone()).collect();
    vec![
        ("national", meta.keys().cloned().collect()),
        ("ca_coastal", pick(CoastFlag::Coastal)),
        ("ca_inland", pick(CoastFlag::Inland)),
    ]
}

fn jumps(cfg: &RunConfig, inp: &Inputs, sink: &mut Sink) -> Result<(), CliError> {
    let mut notes = Vec::new();
    let series = classify_all(cfg, &inp.panel, &mut notes)?;
    sink.notes.extend(notes);
    sink.csv(
        "jumps_per_msa.csv",
        &["msa_id", "quarter", "lm", "jump165", "jump200"],
        series.iter().flat_map(|(id, j)| {
            (0..j.len()).map(move |i| {
                vec![
                    id.clone(),
                    (j.start + i as u32).to_string(),
                    opt(j.lm[i]),
                    (j.jump_10pct[i] as u8).to_string(),
                    (j.jump_big[i] as u8).to_string(),
                ]
            })
        }),
    )?;
    for (name, members) in incidence_groups(inp.panel.meta()) {
        if members.is_empty() {
            sink.note(format!("incidence group {name} has no members"));
            continue;
        }
        for (suffix, th) in [("", JumpThreshold::Big), ("_10pct", JumpThreshold::TenPercent)] {
            let inc = jump_incidence(&series, &members, th);
            sink.csv(
                &format!("jump_incidence_{name}{suffix}.csv"),
                &["quarter", "pct"],
                inc.iter().map(|(q, p)| vec![q.to_string(), f(*p)]),
            )?;
        }
    }
    Ok(())
}

fn pair_file(sink: &mut Sink, set: &PairSet) -> Result<(), CliError> {
    sink.note(format!(
        "{} {}: {} pairs, {} short overlap, {} zero variance",
        set.kind.label(),
        set.mode.label(),
        set.pairs.len(),
        set.skipped_overlap,
        set.skipped_degenerate
    ));
    sink.csv(
        &format!("corr_pairs_{}_{}.csv", set.kind.label(), set.mode.label()),
        &["id_a", "id_b", "r", "n", "t"],
        set.pairs
            .iter()
            .map(|p| vec![p.id_a.clone(), p.id_b.clone(), f(p.r), p.n_obs.to_string(), p.t.to_string()]),
    )
}

fn correlate(cfg: &RunConfig, inp: &Inputs, sink: &mut Sink) -> Result<(), CliError> {
    let mut notes = Vec::new();
    let jumps = classify_all(cfg, &inp.panel, &mut notes)?;
    sink.notes.extend(notes);
    let jopts = JumpCorrOptions {
        gate: cfg.jump_gate,
        min_quarters: cfg.min_jump_quarters,
        centering: cfg.jump_centering,
    };
    let mut sets = Vec::new();
    for mode in [PairMode::Contemporaneous, PairMode::Lead] {
        sets.push(return_corr_all_pairs(inp.panel.series(), mode, cfg.min_return_overlap));
        sets.push(jump_corr_all_pairs(&jumps, mode, &jopts));
    }
    for set in &sets {
        pair_file(sink, set)?;
    }

    let mut t3 = Vec::new();
    for (panel_tag, set) in [("A_returns", &sets[0]), ("B_jumps", &sets[1])] {
        for s in stratify(&set.pairs, &cfg.corr_t_thresholds) {
            t3.push(vec![
                panel_tag.to_string(),
                s.label(),
                s.n.to_string(),
                opt(s.mean),
                opt(s.sigma),
                opt(s.mean_t),
                opt(s.max),
                opt(s.min),
            ]);
        }
    }
    sink.csv("table3.csv", &["panel", "stratum", "n", "mean", "sigma", "mean_t", "max", "min"], t3)?;

    let mut t4 = Vec::new();
    for set in &sets {
        for row in division_summary(&set.pairs, inp.panel.meta(), cfg.division_t_threshold) {
            t4.push(vec![
                row.division.label().to_string(),
                set.kind.label().to_string(),
                set.mode.label().to_string(),
                row.n.to_string(),
                row.significant.to_string(),
                opt(row.pct_significant),
                opt(row.mean_r),
            ]);
        }
    }
    t4.sort_by_key(|r| (division_order(&r[0]), r[1].clone(), r[2].clone()));
    sink.csv(
        "table4.csv",
        &["division", "kind", "mode", "n", "n_significant", "pct_significant", "mean_r"],
        t4,
    )?;
    Ok(())
}

fn division_order(label: &str) -> usize {
    label.parse().unwrap_or(10)
}

fn fit_row(fit: &ContagionFit, meta: &BTreeMap<String, MsaMeta>) -> Vec<String> {
    let mut v = vec![
        fit.satellite_msa.clone(),
        meta.get(&fit.satellite_msa).map(|m| m.name.clone()).unwrap_or_default(),
        fit.n_obs.to_string(),
        fit.start.to_string(),
        f(fit.constant.value),
        fit.constant.t.to_string(),
    ];
    for c in fit.lags.iter().chain(&fit.interactions) {
        v.push(f(c.value));
        v.push(c.t.to_string());
    }
    v.extend([
        f(fit.r_squared),
        opt(fit.durbin_watson),
        (fit.co_applied as u8).to_string(),
        opt(fit.rho),
    ]);
    v
}

fn table_header(n_lags: usize, interaction_lags: Option<usize>) -> Vec<String> {
    let mut h: Vec<String> = ["satellite_id", "satellite_name", "n_obs", "start", "constant", "constant_t"]
        .map(String::from)
        .to_vec();
    for j in 0..=n_lags {
        h.push(format!("lag{j}"));
        h.push(format!("lag{j}_t"));
    }
    if let Some(il) = interaction_lags {
        for j in 0..=il {
            h.push(format!("inter{j}"));
            h.push(format!("inter{j}_t"));
        }
    }
    h.extend(["r_squared", "durbin_watson", "co_applied", "rho"].map(String::from));
    h
}

fn contagion(cfg: &RunConfig, inp: &Inputs, sink: &mut Sink) -> Result<(), CliError> {
    let meta = inp.panel.meta();
    let regions = match &cfg.regions {
        Some(r) => r.clone(),
        None => {
            let (r, diag) = resolve_regions(&default_region_names(), meta);
            sink.notes.extend(diag);
            r
        }
    };
    let opts = ContagionOptions {
        n_lags: cfg.n_lags,
        interaction: cfg.interaction,
        interaction_lags: cfg.interaction_lags,
        serial_policy: cfg.serial_policy,
        index_averaging: cfg.index_averaging,
    };
    let tables: Vec<RegionTable> = contagion_suite(&regions, &inp.panel, &opts);
    let mut long = Vec::new();
    for t in &tables {
        sink.notes.extend(t.diagnostics.iter().map(|d| format!("{}: {d}", t.primary)));
        let plain_h = table_header(cfg.n_lags, None);
        sink.csv(
            &format!("table5_{}.csv", t.primary),
            &plain_h.iter().map(String::as_str).collect::<Vec<_>>(),
            t.plain.iter().map(|fit| fit_row(fit, meta)),
        )?;
        if cfg.interaction != metrohpi_core::InteractionKind::None {
            let inter_h = table_header(cfg.n_lags, Some(cfg.interaction_lags));
            sink.csv(
                &format!("table6_{}.csv", t.primary),
                &inter_h.iter().map(String::as_str).collect::<Vec<_>>(),
                t.interaction.iter().map(|fit| fit_row(fit, meta)),
            )?;
        }
        for (variant, fits) in [("plain", &t.plain), ("interaction", &t.interaction)] {
            for fit in fits.iter() {
                sink.notes.extend(fit.diagnostics.iter().map(|d| format!("{}: {d}", fit.satellite_msa)));
                let mut terms = vec![("constant".to_string(), fit.constant)];
                terms.extend(fit.lags.iter().enumerate().map(|(j, c)| (format!("lag{j}"), *c)));
                terms.extend(fit.interactions.iter().enumerate().map(|(j, c)| (format!("inter{j}"), *c)));
                for (term, c) in terms {
                    long.push(vec![
                        t.primary.clone(),
                        fit.satellite_msa.clone(),
                        variant.to_string(),
                        term,
                        f(c.value),
                        c.t.to_string(),
                    ]);
                }
            }
        }
    }
    sink.csv(
        "contagion_long.csv",
        &["primary_id", "satellite_id", "variant", "term", "coef", "t"],
        long,
    )
}

fn read_series_csv(path: &Path) -> Result<Vec<(Quarter, f64)>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        let parsed = rec
            .get(0)
            .and_then(|q| q.parse::<Quarter>().ok())
            .zip(rec.get(1).and_then(|v| v.parse::<f64>().ok()));
        let (q, v) = parsed.ok_or_else(|| CliError::MissingStage(format!("{} is malformed", path.display())))?;
        out.push((q, v));
    }
    Ok(out)
}

/// Joins `(name, file)` series on quarter into one wide CSV; absent files are left out.
fn wide_figure(sink: &mut Sink, name: &str, sources: &[(String, String)]) -> Result<(), CliError> {
    let mut cols = Vec::new();
    let mut table: BTreeMap<Quarter, BTreeMap<usize, f64>> = BTreeMap::new();
    for (label, file) in sources {
        let path = sink.dir().join(file);
        if !path.is_file() {
            continue;
        }
        let idx = cols.len();
        cols.push(label.clone());
        for (q, v) in read_series_csv(&path)? {
            table.entry(q).or_default().insert(idx, v);
        }
    }
    let mut header = vec!["quarter".to_string()];
    header.extend(cols.iter().cloned());
    let n = cols.len();
    sink.csv(
        name,
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        table.into_iter().map(|(q, vals)| {
            let mut row = vec![q.to_string()];
            row.extend((0..n).map(|i| opt(vals.get(&i))));
            row
        }),
    )
}

fn require(sink: &Sink, stage: &str, file: &str) -> Result<(), CliError> {
    if sink.dir().join(file).is_file() {
        Ok(())
    } else {
        Err(CliError::MissingStage(format!(
            "figures need the {stage} stage output {file}; run {stage} first"
        )))
    }
}

fn figures(cfg: &RunConfig, inp: &Inputs, sink: &mut Sink) -> Result<(), CliError> {
    require(sink, "integrate", "r2_trend_national.csv")?;
    require(sink, "jumps", "jump_incidence_national.csv")?;

    let all: Vec<String> = inp.panel.ids().map(String::from).collect();
    let ca = inp.panel.ids_where(MsaMeta::is_california);
    let us_idx = chained_equal_weighted_index(&inp.panel, &all)?;
    let base = us_idx.value_at(cfg.fig1_base).ok_or_else(|| {
        CliError::Core(Error::Insufficient(format!(
            "fig1 base quarter {} outside the index span",
            cfg.fig1_base
        )))
    })?;
    let ca_idx = if ca.is_empty() { None } else { Some(chained_equal_weighted_index(&inp.panel, &ca)?) };
    let ca_base = ca_idx.as_ref().and_then(|s| s.value_at(cfg.fig1_base));
    sink.csv(
        "fig1.csv",
        &["quarter", "us", "ca"],
        us_idx.iter().map(|(q, v)| {
            let ca_v = match (&ca_idx, ca_base) {
                (Some(s), Some(b)) => s.value_at(q).map(|c| 100.0 * (c - b).exp()),
                _ => None,
            };
            vec![q.to_string(), f(100.0 * (v - base).exp()), opt(ca_v)]
        }),
    )?;

    let src = |labels: &[(&str, &str)]| -> Vec<(String, String)> {
        labels.iter().map(|(l, f)| (l.to_string(), f.to_string())).collect()
    };
    let cohorts: Vec<(String, String)> = (1..=cfg.cohort_starts.len())
        .map(|i| (format!("cohort{i}"), format!("r2_trend_cohort{i}.csv")))
        .collect();
    wide_figure(sink, "fig2a.csv", &cohorts)?;
    wide_figure(
        sink,
        "fig2b.csv",
        &src(&[
            ("national", "r2_trend_national.csv"),
            ("ca_coastal", "r2_trend_ca_coastal.csv"),
            ("ca_inland", "r2_trend_ca_inland.csv"),
        ]),
    )?;
    let divisions: Vec<(String, String)> = metrohpi_core::CensusDivision::ALL
        .iter()
        .map(|d| (format!("div{}", d.label()), format!("r2_trend_div{}.csv", d.label())))
        .collect();
    wide_figure(sink, "fig2c.csv", &divisions)?;
    wide_figure(
        sink,
        "fig3a.csv",
        &src(&[
            ("pct_165", "jump_incidence_national_10pct.csv"),
            ("pct_200", "jump_incidence_national.csv"),
        ]),
    )?;
    wide_figure(
        sink,
        "fig3b.csv",
        &src(&[
            ("ca_coastal", "jump_incidence_ca_coastal.csv"),
            ("ca_inland", "jump_incidence_ca_inland.csv"),
        ]),
    )?;
    Ok(())
}

fn synth(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let out = generate(&cfg.synth)?;
    let mut hpi = Vec::new();
    write_hpi_csv(&mut hpi, &out.hpi).expect("in-memory write");
    let hpi_rows = out.hpi.levels.values().map(|s| s.len()).sum();
    sink.raw("hpi.csv", &hpi, hpi_rows)?;
    let mut fac = Vec::new();
    write_factor_csv(&mut fac, &out.factor_levels).expect("in-memory write");
    let fac_rows = out.factor_levels.values().map(|s| s.len()).sum();
    sink.raw("factors.csv", &fac, fac_rows)?;
    let mut truth = serde_json::to_string_pretty(&out.truth).expect("truth serializes");
    truth.push('\n');
    sink.raw("truth.json", truth.as_bytes(), out.truth.msas.len())?;
    sink.note(format!(
        "seed {}, {} MSAs, {} injected jumps",
        cfg.synth.seed,
        out.truth.msas.len(),
        out.truth.jumps.len()
    ));
    Ok(())
}
