use cpguard_core::bench::{
    check_error_bound, check_query_bound, check_reliability, convergence_summary, records_csv, run_sweep, score_stream, summarize,
    summary_csv, trace_threshold, SweepSpec,
};
use cpguard_core::e2e::{frames_csv, run_e2e, E2eConfig};
use cpguard_core::threshold::trace_csv;

use crate::config::{default_e2e, default_sweep, load, TheoremsConfig, TraceConfig};
use crate::output::{pretty_json, Artifacts};
use crate::{Common, Outcome};

fn core<T>(r: cpguard_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn theorems(args: &Common) -> Result<Outcome, String> {
    let cfg: TheoremsConfig = load(args.config.as_deref(), TheoremsConfig::default)?;
    let e = &cfg.error_bound;
    let q = &cfg.query_bound;
    let r = &cfg.reliability;
    let reports = [
        ("error_bound.json", core(check_error_bound(e.alpha, e.beta, e.n, e.m, e.trials, args.seed))?),
        ("query_bound.json", core(check_query_bound(q.n_range, q.m_range, q.trials, args.seed))?),
        (
            "reliability.json",
            core(check_reliability(&r.distributions, r.threshold, r.initial_epsilon, r.stream_len, args.seed))?,
        ),
    ];
    let failed = reports.iter().any(|(_, rep)| rep.status.is_failure());
    let mut out = Artifacts::new(&args.out);
    for (name, rep) in &reports {
        println!("{}: {:?}", rep.theorem, rep.status);
        out.add(*name, pretty_json(rep));
    }
    out.write("theorems", &cfg, args.seed)?;
    Ok(if failed { Outcome::CheckFailed } else { Outcome::Ok })
}

pub fn pasac_bench(args: &Common) -> Result<Outcome, String> {
    let mut spec: SweepSpec = load(args.config.as_deref(), default_sweep)?;
    core(spec.validate())?;
    let canonical = spec.clone();
    if args.no_trace {
        spec.record_trace = false;
    }
    let records = core(run_sweep(&spec, args.seed))?;
    let summary = summarize(&records);
    let mut out = Artifacts::new(&args.out);
    out.add("records.csv", records_csv(&records));
    out.add("summary.csv", summary_csv(&summary));
    out.write("pasac-bench", &canonical, args.seed)?;
    println!("{} records, {} summary rows", records.len(), summary.len());
    Ok(Outcome::Ok)
}

pub fn threshold_trace(args: &Common) -> Result<Outcome, String> {
    let cfg: TraceConfig = load(args.config.as_deref(), TraceConfig::default)?;
    if cfg.initial_epsilons.is_empty() || cfg.steps == 0 {
        return Err("threshold trace needs at least one initial threshold and one step".into());
    }
    let stream = core(score_stream(&cfg.distributions, cfg.contam_rate, cfg.steps, args.seed))?;
    let traces = cfg
        .initial_epsilons
        .iter()
        .map(|&e0| core(trace_threshold(&stream, cfg.threshold, e0, cfg.labels)).map(|rows| (e0, rows)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Artifacts::new(&args.out);
    for (e0, rows) in &traces {
        out.add(format!("trace_eps0_{e0}.csv"), trace_csv(rows));
    }
    let summary = convergence_summary(&traces, cfg.tail);
    println!("final thresholds span {:.4}", summary.band_width);
    out.add("convergence.json", pretty_json(&summary));
    out.write("threshold-trace", &cfg, args.seed)?;
    Ok(Outcome::Ok)
}

pub fn e2e(args: &Common) -> Result<Outcome, String> {
    let cfg: E2eConfig = load(args.config.as_deref(), default_e2e)?;
    let report = core(run_e2e(&cfg, args.seed))?;
    let mut out = Artifacts::new(&args.out);
    out.add("frames.csv", frames_csv(&report.frames));
    out.add("summary.json", pretty_json(&report.summary));
    out.write("e2e", &cfg, args.seed)?;
    println!(
        "precision {:.3}, recall {:.3}, final threshold {:.4}",
        report.summary.precision, report.summary.recall, report.summary.final_eps
    );
    Ok(Outcome::Ok)
}
