//! The five subcommands. Every artifact lands in the configured output
//! directory; existing files are only replaced under `--force`. All CSV
//! outputs are byte-deterministic for a fixed config and seed (trace wall
//! times are zeroed unless `--timing` is set).

use std::fs;
use std::path::Path;

use serde::Serialize;

use dyngcn::dataio::{event_stats, generate_event, load_event, save_event};
use dyngcn::error::{Error, Result};
use dyngcn::eval::{
    build_test_set, predict_inner, predict_mlp, score, train_mlp_head, EvalReport, HeadKind,
    TestSet,
};
use dyngcn::exec;
use dyngcn::graphcore::DynamicGraph;
use dyngcn::model::{vstream_forward, Embedding, ForwardContext, ModelConfig, ModelState};
use dyngcn::numkit::derive_seed;
use dyngcn::train::{train_all_steps, train_at_step, train_static_at_step, TrainConfig, TrainOutcome};

use crate::config::RunConfig;

fn load_source(cfg: &RunConfig) -> Result<DynamicGraph> {
    match (&cfg.data, &cfg.synth) {
        (Some(path), None) => load_event(path),
        (None, Some(synth)) => generate_event(synth),
        (Some(_), Some(_)) => Err(Error::Config(
            "both a dataset path and a synthetic config are set; choose one".into(),
        )),
        (None, None) => Err(Error::Config(
            "no data source: pass --data <manifest> or configure a [synth] section".into(),
        )),
    }
}

fn resolve_step(cfg: &RunConfig, graph: &DynamicGraph) -> Result<usize> {
    let k = cfg.step.unwrap_or_else(|| graph.len().saturating_sub(2));
    if k >= graph.len() {
        return Err(Error::Config(format!(
            "step {k} is out of range for an event with {} snapshots",
            graph.len()
        )));
    }
    Ok(k)
}

fn ensure_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "refusing to overwrite {}; pass --force to replace it",
            path.display()
        )));
    }
    Ok(())
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))
}

fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        window: cfg.window,
        max_epochs: cfg.max_epochs,
        tolerance: cfg.tolerance,
        patience: cfg.patience,
        learning_rate: cfg.learning_rate,
        seed: cfg.seed,
        checkpoint_every: 0,
        warm_start: cfg.warm_start,
        train_only_h: cfg.train_only_h,
    }
}

fn model_config(cfg: &RunConfig) -> ModelConfig {
    ModelConfig {
        window: cfg.window,
        layer_dims: cfg.dims.clone(),
        seed: cfg.seed,
        evolution: true,
    }
}

fn embedding_csv(emb: &Embedding) -> String {
    let d = emb.z.cols();
    let mut out = String::from("node");
    for j in 0..d {
        out.push_str(&format!(",z_{j}"));
    }
    out.push('\n');
    for v in 0..emb.z.rows() {
        out.push_str(&v.to_string());
        for j in 0..d {
            out.push_str(&format!(",{:.9}", emb.z.get(v, j)));
        }
        out.push('\n');
    }
    out
}

/// Scores an embedding on a test set with the configured head. `seed` keys
/// the MLP head's initialization when that head is selected.
fn score_embedding(
    cfg: &RunConfig,
    emb: &Embedding,
    graph: &DynamicGraph,
    k: usize,
    test: &TestSet,
    seed: u64,
) -> Result<(f64, f64)> {
    match cfg.head {
        HeadKind::Inner => score(test, |u, v| Ok(predict_inner(emb, u, v))),
        HeadKind::Mlp => {
            let hidden = if cfg.mlp_hidden == 0 {
                emb.z.cols()
            } else {
                cfg.mlp_hidden
            };
            let head = train_mlp_head(emb, graph.snapshot(k)?, hidden, derive_seed(seed, "mlp-head"))?;
            score(test, move |u, v| predict_mlp(&head, emb, u, v))
        }
    }
}

pub fn cmd_generate(cfg: &RunConfig, seed_explicit: bool) -> Result<()> {
    let mut synth = cfg.synth.clone().unwrap_or_default();
    if seed_explicit {
        synth.seed = cfg.seed;
    }
    let graph = generate_event(&synth)?;
    let manifest = save_event(&graph, &cfg.out, cfg.force)?;
    let last = graph.snapshot(graph.len() - 1)?;
    println!(
        "generated event '{}': {} snapshots, {} viewers ({} offices), {} edges at the final step",
        graph.name(),
        graph.len(),
        graph.node_universe(),
        synth.offices,
        last.edge_count()
    );
    println!("manifest: {}", manifest.display());
    Ok(())
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    let graph = load_source(cfg)?;
    let stats = event_stats(&graph);
    prepare_out_dir(cfg)?;
    let csv_path = cfg.out.join("stats.csv");
    let json_path = cfg.out.join("stats.json");
    ensure_writable(&csv_path, cfg.force)?;
    ensure_writable(&json_path, cfg.force)?;
    stats.write_csv(&csv_path)?;

    let mirror = serde_json::json!({
        "fingerprint": cfg.fingerprint(),
        "stats": stats,
    });
    write_text(
        &json_path,
        &serde_json::to_string_pretty(&mirror)
            .map_err(|e| Error::Data(format!("serializing stats: {e}")))?,
    )?;

    println!(
        "event '{}': {} snapshots, {} nodes ever active (universe {}), {} minute interval",
        stats.name,
        stats.snapshots,
        stats.nodes_ever_active,
        stats.node_universe,
        stats.interval_minutes
    );
    for s in &stats.steps {
        let evo = s
            .edge_evolution
            .map(|e| format!(", edge evolution {e:.1}%"))
            .unwrap_or_default();
        println!(
            "  step {}: {} active, {} edges, max degree {}{}",
            s.step, s.active_nodes, s.edges, s.max_degree, evo
        );
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn report_outcome(k: usize, out: &TrainOutcome) {
    println!(
        "step {k}: {} epochs ({}), loss {:.6} -> {:.6}",
        out.trace.final_epoch,
        out.trace.stop,
        out.trace.initial_loss(),
        out.trace.final_loss()
    );
}

fn write_outcome(cfg: &RunConfig, out: &TrainOutcome, suffix: &str) -> Result<()> {
    let ckpt = cfg.out.join(format!("checkpoint{suffix}.json"));
    let trace = cfg.out.join(format!("trace{suffix}.csv"));
    let emb = cfg.out.join(format!("embedding{suffix}.csv"));
    for p in [&ckpt, &trace, &emb] {
        ensure_writable(p, cfg.force)?;
    }
    out.state.save_checkpoint(&ckpt)?;
    out.trace.write_csv(&trace, cfg.timing)?;
    write_text(&emb, &embedding_csv(&out.embedding))?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let graph = load_source(cfg)?;
    let tc = train_config(cfg);
    let mc = model_config(cfg);
    prepare_out_dir(cfg)?;

    if cfg.all_steps {
        let outs = train_all_steps(&graph, &tc, &mc)?;
        for (k, out) in outs.iter().enumerate() {
            write_outcome(cfg, out, &format!("_{k:03}"))?;
            report_outcome(k, out);
        }
    } else {
        let k = resolve_step(cfg, &graph)?;
        let out = train_at_step(&graph, k, &tc, &mc)?;
        write_outcome(cfg, &out, "")?;
        report_outcome(k, &out);
    }
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ComparisonRow {
    model: String,
    step: usize,
    k: usize,
    count: usize,
    mae: f64,
    rmse: f64,
    head: HeadKind,
}

fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("model,step,k,|O_k|,MAE,RMSE,head\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.9},{:.9},{}\n",
            r.model, r.step, r.k, r.count, r.mae, r.rmse, r.head
        ));
    }
    out
}

/// Evaluates one step, optionally with the static baseline, and appends the
/// scores to the report and comparison rows.
fn eval_step(
    cfg: &RunConfig,
    graph: &DynamicGraph,
    k: usize,
    emb: &Embedding,
    test: &TestSet,
    report: &mut EvalReport,
    comparison: &mut Vec<ComparisonRow>,
) -> Result<()> {
    let (mae, rmse) = score_embedding(cfg, emb, graph, k, test, derive_seed(cfg.seed, &format!("eval-{k}")))?;
    report.push(k, test.len(), mae, rmse, cfg.head)?;
    println!("step {k}: |O_k| = {}, MAE = {mae:.6}, RMSE = {rmse:.6}", test.len());

    if cfg.baseline {
        let dyn_row_step = comparison.iter().filter(|r| r.model == "dynamic").count();
        comparison.push(ComparisonRow {
            model: "dynamic".into(),
            step: dyn_row_step,
            k,
            count: test.len(),
            mae,
            rmse,
            head: cfg.head,
        });
        let baseline = train_static_at_step(graph, k, &train_config(cfg), &model_config(cfg))?;
        let (bmae, brmse) = score_embedding(
            cfg,
            &baseline.embedding,
            graph,
            k,
            test,
            derive_seed(cfg.seed, &format!("eval-static-{k}")),
        )?;
        println!("step {k} static baseline: MAE = {bmae:.6}, RMSE = {brmse:.6}");
        comparison.push(ComparisonRow {
            model: "static".into(),
            step: dyn_row_step,
            k,
            count: test.len(),
            mae: bmae,
            rmse: brmse,
            head: cfg.head,
        });
    }
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let graph = load_source(cfg)?;
    prepare_out_dir(cfg)?;
    let mut report = EvalReport::new(cfg.fingerprint());
    let mut comparison: Vec<ComparisonRow> = Vec::new();

    if cfg.all_steps {
        let tc = train_config(cfg);
        let mc = model_config(cfg);
        for k in 0..graph.len() {
            let test = match build_test_set(&graph, k, cfg.future_weight) {
                Ok(t) => t,
                Err(Error::EmptyTestSet(_)) => {
                    println!("step {k}: no future edges, skipped");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let out = train_at_step(&graph, k, &tc, &mc)?;
            eval_step(cfg, &graph, k, &out.embedding, &test, &mut report, &mut comparison)?;
        }
    } else {
        let k = resolve_step(cfg, &graph)?;
        let ckpt_path = cfg
            .checkpoint
            .clone()
            .unwrap_or_else(|| cfg.out.join("checkpoint.json"));
        let state = ModelState::load_checkpoint(&ckpt_path)?;
        let ctx = ForwardContext::new(&graph, k, cfg.window, true)?;
        if state.node_universe() != graph.node_universe()
            || state.layer_dims() != cfg.dims.as_slice()
            || state.window_steps() != ctx.window_len()
        {
            return Err(Error::Contract(format!(
                "checkpoint {} does not match this run: it holds universe {}, dims {:?}, \
                 {} evolution steps, but the config needs universe {}, dims {:?}, {} steps",
                ckpt_path.display(),
                state.node_universe(),
                state.layer_dims(),
                state.window_steps(),
                graph.node_universe(),
                cfg.dims,
                ctx.window_len()
            )));
        }
        let emb = vstream_forward(&ctx, &state)?;
        let test = build_test_set(&graph, k, cfg.future_weight)?;
        eval_step(cfg, &graph, k, &emb, &test, &mut report, &mut comparison)?;
    }

    let csv_path = cfg.out.join("eval.csv");
    let json_path = cfg.out.join("eval.json");
    ensure_writable(&csv_path, cfg.force)?;
    ensure_writable(&json_path, cfg.force)?;
    report.write_csv(&csv_path)?;
    write_text(&json_path, &report.to_json()?)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());

    if cfg.baseline {
        let cmp_csv = cfg.out.join("comparison.csv");
        let cmp_json = cfg.out.join("comparison.json");
        ensure_writable(&cmp_csv, cfg.force)?;
        ensure_writable(&cmp_json, cfg.force)?;
        write_text(&cmp_csv, &comparison_csv(&comparison))?;
        let mirror = serde_json::json!({
            "fingerprint": cfg.fingerprint(),
            "rows": comparison,
        });
        write_text(
            &cmp_json,
            &serde_json::to_string_pretty(&mirror)
                .map_err(|e| Error::Data(format!("serializing comparison: {e}")))?,
        )?;
        println!("wrote {} and {}", cmp_csv.display(), cmp_json.display());
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    w: usize,
    d: usize,
    rep: usize,
    seed: u64,
    step: usize,
    mae: Option<f64>,
    rmse: Option<f64>,
    status: String,
}

#[derive(Debug, Clone, Serialize)]
struct SweepSummaryRow {
    w: usize,
    d: usize,
    reps_ok: usize,
    mae_mean: Option<f64>,
    mae_std: Option<f64>,
    rmse_mean: Option<f64>,
    rmse_std: Option<f64>,
    best: bool,
}

fn error_class(e: &Error) -> &'static str {
    match crate::exit_code(e) {
        2 => "config",
        4 => "numeric",
        _ => "data",
    }
}

fn opt9(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.9}")).unwrap_or_default()
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    if cfg.sweep_windows.is_empty() || cfg.sweep_dims.is_empty() {
        return Err(Error::Config("sweep grid must not be empty".into()));
    }
    if cfg.sweep_reps < 1 {
        return Err(Error::Config("sweep needs at least one repetition per cell".into()));
    }
    if cfg.sweep_windows.contains(&0) || cfg.sweep_dims.contains(&0) {
        return Err(Error::Config("sweep windows and dims must be positive".into()));
    }

    let graph = load_source(cfg)?;
    let k = resolve_step(cfg, &graph)?;
    let test = build_test_set(&graph, k, cfg.future_weight)?;
    prepare_out_dir(cfg)?;

    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for &w in &cfg.sweep_windows {
        for &d in &cfg.sweep_dims {
            for rep in 0..cfg.sweep_reps {
                cells.push((w, d, rep));
            }
        }
    }

    let results = exec::map_indexed(cells.len(), |i| -> std::result::Result<(f64, f64), Error> {
        let (w, d, rep) = cells[i];
        let seed = derive_seed(cfg.seed, &format!("sweep-w{w}-d{d}-rep{rep}"));
        let tc = TrainConfig {
            window: w,
            seed,
            ..train_config(cfg)
        };
        let mc = ModelConfig {
            window: w,
            layer_dims: vec![2 * d, d],
            seed,
            evolution: true,
        };
        let out = train_at_step(&graph, k, &tc, &mc)?;
        score_embedding(cfg, &out.embedding, &graph, k, &test, seed)
    });

    let mut rows: Vec<SweepRow> = Vec::with_capacity(cells.len());
    let mut first_failure: Option<Error> = None;
    for ((w, d, rep), result) in cells.iter().copied().zip(results) {
        let seed = derive_seed(cfg.seed, &format!("sweep-w{w}-d{d}-rep{rep}"));
        match result {
            Ok((mae, rmse)) => rows.push(SweepRow {
                w,
                d,
                rep,
                seed,
                step: k,
                mae: Some(mae),
                rmse: Some(rmse),
                status: "ok".into(),
            }),
            Err(e) => {
                eprintln!("cell w={w} d={d} rep={rep} failed: {e}");
                rows.push(SweepRow {
                    w,
                    d,
                    rep,
                    seed,
                    step: k,
                    mae: None,
                    rmse: None,
                    status: error_class(&e).into(),
                });
                if first_failure.is_none() {
                    first_failure = Some(e);
                }
            }
        }
    }

    let mut summary: Vec<SweepSummaryRow> = Vec::new();
    for &w in &cfg.sweep_windows {
        for &d in &cfg.sweep_dims {
            let ok: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.w == w && r.d == d && r.status == "ok")
                .collect();
            let stats = |take: fn(&SweepRow) -> f64| -> (Option<f64>, Option<f64>) {
                if ok.is_empty() {
                    return (None, None);
                }
                let n = ok.len() as f64;
                let mean = ok.iter().map(|r| take(r)).sum::<f64>() / n;
                let var = ok.iter().map(|r| (take(r) - mean).powi(2)).sum::<f64>() / n;
                (Some(mean), Some(var.sqrt()))
            };
            let (mae_mean, mae_std) = stats(|r| r.mae.unwrap());
            let (rmse_mean, rmse_std) = stats(|r| r.rmse.unwrap());
            summary.push(SweepSummaryRow {
                w,
                d,
                reps_ok: ok.len(),
                mae_mean,
                mae_std,
                rmse_mean,
                rmse_std,
                best: false,
            });
        }
    }
    let best_idx = summary
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.rmse_mean.map(|m| (i, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    if let Some(i) = best_idx {
        summary[i].best = true;
        println!(
            "best cell: w = {}, d = {}, mean RMSE = {:.6} over {} runs",
            summary[i].w,
            summary[i].d,
            summary[i].rmse_mean.unwrap(),
            summary[i].reps_ok
        );
    }

    let mut csv = String::from("w,d,rep,seed,step,MAE,RMSE,status\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.w,
            r.d,
            r.rep,
            r.seed,
            r.step,
            opt9(r.mae),
            opt9(r.rmse),
            r.status
        ));
    }
    let mut summary_csv =
        String::from("w,d,reps_ok,mae_mean,mae_std,rmse_mean,rmse_std,best\n");
    for s in &summary {
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.w,
            s.d,
            s.reps_ok,
            opt9(s.mae_mean),
            opt9(s.mae_std),
            opt9(s.rmse_mean),
            opt9(s.rmse_std),
            if s.best { 1 } else { 0 }
        ));
    }

    let csv_path = cfg.out.join("sweep.csv");
    let summary_path = cfg.out.join("sweep_summary.csv");
    let json_path = cfg.out.join("sweep.json");
    for p in [&csv_path, &summary_path, &json_path] {
        ensure_writable(p, cfg.force)?;
    }
    write_text(&csv_path, &csv)?;
    write_text(&summary_path, &summary_csv)?;
    let mirror = serde_json::json!({
        "fingerprint": cfg.fingerprint(),
        "rows": rows,
        "summary": summary,
    });
    write_text(
        &json_path,
        &serde_json::to_string_pretty(&mirror)
            .map_err(|e| Error::Data(format!("serializing sweep: {e}")))?,
    )?;
    println!(
        "wrote {}, {}, {}",
        csv_path.display(),
        summary_path.display(),
        json_path.display()
    );

    Ok(match first_failure {
        Some(e) => crate::exit_code(&e),
        None => 0,
    })
}
