//! Single-run views: `report`, `hv`, `replay` and `events`.

use std::fs;
use std::path::Path;

use anyhow::bail;
use serde::Serialize;
use skillmoo_core::analysis::{efficiency_report, AnalysisError};
use skillmoo_core::evaluation::{EvaluatorConfig, SimulatedEvaluator};
use skillmoo_core::moo::{default_cost_ceiling, hypervolume_2d, HvPoint, ReferencePoint};
use skillmoo_core::search::{canonicalize_events, replay_run, Event, FrontEntry, FrontFile, LoadedRun, Overhead};

use crate::output::{fmt_f, Format, Table};
use crate::{config_error, runs, HvArgs};

#[derive(Serialize)]
struct GenerationRow {
    generation: u32,
    proposals: usize,
    failed_proposals: usize,
    accepted: usize,
    rejected: usize,
    best_pass_rate: f64,
    hv: f64,
}

fn trajectory(run: &LoadedRun) -> anyhow::Result<Vec<GenerationRow>> {
    let hv = run.archive().hv_by_generation(None)?;
    let mut rows = Vec::with_capacity(hv.len());
    let mut best = f64::NEG_INFINITY;
    for (g, hv) in hv.into_iter().enumerate() {
        let g = g as u32;
        let count = |f: &dyn Fn(&Event) -> bool| run.events.iter().filter(|e| f(&e.event)).count();
        let born: Vec<_> = run.candidates.iter().filter(|c| c.generation == g).collect();
        for c in born.iter().filter(|c| c.is_accepted()) {
            best = best.max(c.result.pass_rate);
        }
        rows.push(GenerationRow {
            generation: g,
            proposals: count(&|e| matches!(e, Event::Proposal { generation, .. } if *generation == g)),
            failed_proposals: count(&|e| matches!(e, Event::ProposalFailed { generation, .. } if *generation == g)),
            accepted: born.iter().filter(|c| c.is_accepted()).count(),
            rejected: born.iter().filter(|c| !c.is_accepted()).count(),
            best_pass_rate: best,
            hv,
        });
    }
    Ok(rows)
}

fn front_table(front: &[FrontEntry], final_id: &str) -> Table {
    let mut t = Table::new(["id", "gen", "pass_rate", "tests", "cost_usd", "runtime_s", "final"]);
    for e in front {
        t.row([
            e.id.clone(),
            e.generation.to_string(),
            fmt_f(e.pass_rate, 4),
            format!("{}/{}", e.tests_passed, e.tests_total),
            fmt_f(e.cost_usd, 4),
            fmt_f(e.runtime_s, 2),
            if e.id == final_id { "*".into() } else { String::new() },
        ]);
    }
    t
}

#[derive(Serialize)]
struct ReportJson<'a> {
    label: &'a str,
    task_id: &'a str,
    seed: u64,
    final_id: &'a str,
    front: &'a [FrontEntry],
    overhead: Overhead,
    optimizer_skill_version: u32,
    trajectory: Vec<GenerationRow>,
}

pub fn report(dir: &Path, format: Format) -> anyhow::Result<()> {
    let run = runs::load(dir)?;
    match format {
        Format::Json => {
            let r = ReportJson {
                label: &run.manifest.label,
                task_id: &run.manifest.task.task_id,
                seed: run.manifest.config.seed,
                final_id: &run.front.final_id,
                front: &run.front.front,
                overhead: run.front.overhead,
                optimizer_skill_version: run.front.optimizer_skill_version,
                trajectory: trajectory(&run)?,
            };
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Format::Csv => {
            let front: Vec<&str> = run.front.front.iter().map(|e| e.id.as_str()).collect();
            let mut t = Table::new([
                "id",
                "generation",
                "slot",
                "parent",
                "status",
                "pass_rate",
                "tests_passed",
                "tests_total",
                "cost_usd",
                "runtime_s",
                "timed_out",
                "on_front",
                "final",
            ]);
            for c in &run.candidates {
                t.row([
                    c.id.clone(),
                    c.generation.to_string(),
                    c.slot.to_string(),
                    c.parent_id.clone().unwrap_or_default(),
                    if c.is_accepted() { "accepted" } else { "rejected_guard" }.into(),
                    c.result.pass_rate.to_string(),
                    c.result.tests_passed.to_string(),
                    c.result.tests_total.to_string(),
                    c.result.cost_usd.to_string(),
                    c.result.runtime_s.to_string(),
                    c.result.timed_out.to_string(),
                    front.contains(&c.id.as_str()).to_string(),
                    (c.id == run.front.final_id).to_string(),
                ]);
            }
            t.print(Format::Csv)?;
        }
        Format::Text => {
            let m = &run.manifest;
            println!(
                "run {}  label {}  task {}  seed {}  candidates {}",
                run.dir.display(),
                m.label,
                m.task.task_id,
                m.config.seed,
                run.candidates.len()
            );
            println!("\nfront");
            print!("{}", front_table(&run.front.front, &run.front.final_id).render_text());
            let f = run.final_candidate();
            let o = &run.front.overhead;
            println!(
                "\nfinal {}  pass_rate {}  cost_usd {}  runtime_s {}",
                f.id,
                fmt_f(f.result.pass_rate, 4),
                fmt_f(f.result.cost_usd, 4),
                fmt_f(f.result.runtime_s, 2)
            );
            println!(
                "optimization cost_usd {}  runtime_s {}  optimizer skill v{}",
                fmt_f(o.total_cost_usd(), 4),
                fmt_f(o.total_runtime_s(), 2),
                run.front.optimizer_skill_version
            );
            println!("\ntrajectory");
            let mut t = Table::new(["gen", "proposals", "failed", "accepted", "rejected", "best_pass", "hv"]);
            for r in trajectory(&run)? {
                t.row([
                    r.generation.to_string(),
                    r.proposals.to_string(),
                    r.failed_proposals.to_string(),
                    r.accepted.to_string(),
                    r.rejected.to_string(),
                    fmt_f(r.best_pass_rate, 4),
                    fmt_f(r.hv, 4),
                ]);
            }
            print!("{}", t.render_text());
        }
    }
    Ok(())
}

fn points(front: &FrontFile) -> Vec<HvPoint> {
    front
        .front
        .iter()
        .map(|e| HvPoint::from_tests(e.tests_passed, e.tests_total, e.cost_usd))
        .collect()
}

pub fn hv(args: &HvArgs) -> anyhow::Result<()> {
    let target = runs::load_front(&args.target)?;
    let baseline = args.baseline.as_deref().map(runs::load_front).transpose()?;
    let new_pts = points(&target);
    let base_pts = baseline.as_ref().map(points).unwrap_or_default();
    let ceiling = match args.cost_ceiling {
        Some(c) if c > 0.0 => c,
        Some(c) => return Err(config_error(format!("cost ceiling must be positive, got {c}"))),
        None => default_cost_ceiling(new_pts.iter().chain(&base_pts)).unwrap_or(1.0),
    };
    let hv_new = hypervolume_2d(&new_pts, ReferencePoint::default(), ceiling)?.value;
    let format = args.format.format;

    let Some(_) = baseline else {
        if format == Format::Json {
            println!(
                "{}",
                serde_json::json!({ "hv": hv_new, "cost_ceiling": ceiling, "points": new_pts.len() })
            );
            return Ok(());
        }
        let mut t = Table::new(["hv", "cost_ceiling", "points"]);
        t.row([fmt_f(hv_new, 4), fmt_f(ceiling, 4), new_pts.len().to_string()]);
        return t.print(format);
    };
    let hv_base = hypervolume_2d(&base_pts, ReferencePoint::default(), ceiling)?.value;
    let (opt_cost, opt_time) = (target.overhead.total_cost_usd(), target.overhead.total_runtime_s());
    let (delta, per_pct) = match efficiency_report(opt_cost, opt_time, hv_base, hv_new) {
        Ok(r) => (Some(r.delta_hv_pct), Some(r.cost_per_hv_pct)),
        Err(AnalysisError::NoHvGain(d)) => (Some(d), None),
        Err(AnalysisError::ZeroBaseline) => (None, None),
        Err(e) => return Err(e.into()),
    };
    if format == Format::Json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "opt_cost_usd": opt_cost,
                "opt_runtime_s": opt_time,
                "hv_base": hv_base,
                "hv_new": hv_new,
                "delta_hv_pct": delta,
                "cost_per_hv_pct": per_pct,
                "cost_ceiling": ceiling,
            }))?
        );
        return Ok(());
    }
    let undefined = |v: Option<f64>, d: usize| v.map_or_else(|| "undefined".to_string(), |x| fmt_f(x, d));
    let mut t = Table::new([
        "opt_cost_usd",
        "opt_runtime_s",
        "hv_base",
        "hv_new",
        "delta_hv_pct",
        "cost_per_hv_pct",
    ]);
    t.row([
        fmt_f(opt_cost, 4),
        fmt_f(opt_time, 2),
        fmt_f(hv_base, 4),
        fmt_f(hv_new, 4),
        undefined(delta, 2),
        undefined(per_pct, 4),
    ]);
    t.print(format)
}

pub fn replay(dir: &Path) -> anyhow::Result<()> {
    let run = runs::load(dir)?;
    if !matches!(run.manifest.task.evaluator, EvaluatorConfig::Simulated(_)) {
        return Err(config_error("only runs on a simulated task can be replayed"));
    }
    let report = replay_run(dir, &SimulatedEvaluator)?;
    if !report.is_identical() {
        for m in &report.mismatches {
            eprintln!("mismatch: {m}");
        }
        bail!(
            "replay diverged in {} of {} candidates",
            report.mismatches.len(),
            report.candidates_checked
        );
    }
    println!("replayed {} candidates: identical", report.candidates_checked);
    Ok(())
}

pub fn events(dir: &Path, canonical: bool) -> anyhow::Result<()> {
    let path = dir.join("events.jsonl");
    let text = fs::read_to_string(&path).map_err(|e| config_error(format!("reading {}: {e}", path.display())))?;
    if canonical {
        print!("{}", canonicalize_events(&text)?);
    } else {
        print!("{text}");
    }
    Ok(())
}
