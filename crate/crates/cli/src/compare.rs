//! Multi-run views: `stats` and `patterns`.

use std::collections::BTreeMap;

use serde::Serialize;
use skillmoo_core::analysis::{
    edits_from_events, pattern_table, scott_knott_esd, BaselineMetrics, PatternRow, RunSet, ScottKnottConfig, Summary,
};

use crate::output::{fmt_f, Format, Table};
use crate::{runs, Metric, PatternsArgs, StatsArgs};

#[derive(Serialize)]
struct StatsRow {
    method: String,
    runs: usize,
    pass_rate: Summary,
    cost_usd: Summary,
    runtime_s: Summary,
    skills: f64,
    rank: Option<usize>,
}

/// Observations oriented so larger is better, optionally log1p-scaled first.
fn ranked_values(set: &RunSet, metric: Metric, log1p: bool) -> Vec<f64> {
    let (raw, sign) = match metric {
        Metric::PassRate => (&set.pass_rate, 1.0),
        Metric::CostUsd => (&set.cost_usd, -1.0),
        Metric::RuntimeS => (&set.runtime_s, -1.0),
    };
    raw.iter().map(|&x| sign * if log1p { x.ln_1p() } else { x }).collect()
}

pub fn stats(args: &StatsArgs) -> anyhow::Result<()> {
    let dirs = runs::expand(&args.runs)?;
    let mut sets: BTreeMap<String, (RunSet, Vec<usize>)> = BTreeMap::new();
    for dir in &dirs {
        let run = runs::load(dir)?;
        let f = run.final_candidate();
        let label = run.manifest.label.clone();
        let entry = sets
            .entry(label.clone())
            .or_insert_with(|| (RunSet::new(label), Vec::new()));
        entry.0.push(f.result.pass_rate, f.result.cost_usd, f.result.runtime_s);
        entry.1.push(f.bundle.skills().len());
    }

    let ranks = if sets.values().all(|(s, _)| s.len() >= 2) {
        let groups: BTreeMap<String, Vec<f64>> = sets
            .iter()
            .map(|(k, (s, _))| (k.clone(), ranked_values(s, args.metric, args.log1p)))
            .collect();
        Some(scott_knott_esd(&groups, &ScottKnottConfig::default())?.ranks)
    } else {
        None
    };

    let mut rows: Vec<StatsRow> = sets
        .iter()
        .map(|(label, (set, skills))| {
            let s = set.summarize().expect("every group holds a run");
            StatsRow {
                method: label.clone(),
                runs: set.len(),
                pass_rate: s.pass_rate,
                cost_usd: s.cost_usd,
                runtime_s: s.runtime_s,
                skills: skills.iter().sum::<usize>() as f64 / skills.len() as f64,
                rank: ranks.as_ref().map(|r| r[label]),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.method.cmp(&b.method)));

    if args.format.format == Format::Json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    let d = args.decimals;
    let mut t = Table::new(["method", "runs", "pass_rate", "cost_usd", "runtime_s", "skills", "rank"]);
    for r in &rows {
        t.row([
            r.method.clone(),
            r.runs.to_string(),
            r.pass_rate.format(d),
            r.cost_usd.format(d),
            r.runtime_s.format(d),
            fmt_f(r.skills, 1),
            r.rank.map_or_else(|| "-".into(), |x| x.to_string()),
        ]);
    }
    t.print(args.format.format)
}

fn merge(into: &mut BTreeMap<String, PatternRow>, rows: Vec<PatternRow>) {
    for r in rows {
        match into.get_mut(&r.pattern) {
            Some(acc) => {
                acc.edits += r.edits;
                acc.pass_improved += r.pass_improved;
                acc.cost_reduced += r.cost_reduced;
                acc.time_reduced += r.time_reduced;
            }
            None => {
                into.insert(r.pattern.clone(), r);
            }
        }
    }
}

/// Without `--baseline` each run's edits are compared with its own seed.
pub fn patterns(args: &PatternsArgs) -> anyhow::Result<()> {
    let shared = match &args.baseline {
        Some(dir) => Some(BaselineMetrics::from(&runs::load(dir)?.final_candidate().result)),
        None => None,
    };
    let mut merged = BTreeMap::new();
    for dir in runs::expand(&args.runs)? {
        let run = runs::load(&dir)?;
        let base = shared.unwrap_or_else(|| BaselineMetrics::from(&run.seed_candidate().result));
        merge(
            &mut merged,
            pattern_table(&edits_from_events(&run.events), Some(&base))?,
        );
    }
    let mut rows: Vec<PatternRow> = merged.into_values().collect();
    rows.sort_by(|a, b| b.edits.cmp(&a.edits).then_with(|| a.pattern.cmp(&b.pattern)));

    if args.format.format == Format::Json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    let mut t = Table::new(["pattern", "edits", "pass_improved", "cost_reduced", "time_reduced"]);
    for r in &rows {
        let frac = |k: usize| format!("{k}/{}", r.edits);
        t.row([
            r.example.clone(),
            r.edits.to_string(),
            frac(r.pass_improved),
            frac(r.cost_reduced),
            frac(r.time_reduced),
        ]);
    }
    t.print(args.format.format)
}
