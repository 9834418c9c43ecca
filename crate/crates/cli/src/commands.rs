//! Subcommand bodies. Each one checks its arguments before reading or
//! writing any file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use csikit_core::frechet::{csi_matrix, CsiOptions};
use csikit_core::sampling::{balanced_indices, save_coverage_csv, uniform_indices, DEFAULT_TOTAL};
use csikit_core::select::{budget_ratio, make_budget, plan_samples, rank_values};
use csikit_core::shard::{read_manifest, write_shard_with_manifest, ShardManifest};
use csikit_core::spectral::{save_study_csvs, DEFAULT_KS, DEFAULT_REPEATS};
use csikit_core::stats::{Denominator, NodePolicy, SummaryJson};
use csikit_core::synthetic::{generate, manifest_for, ClassSizes, SyntheticSpec};
use csikit_core::{
    build_class_index, coverage_report, paired_erank_study, read_shard, read_summary,
    summarize_shard, write_summary, AlignmentReport, DatasetSummary,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{write_err, CliError};
use crate::{
    BudgetArgs, DistanceArgs, ErankArgs, GenSyntheticArgs, NodesArg, RankArgs, SampleArgs,
    StrategyArg, SummarizeArgs,
};

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::missing(flag))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| write_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| write_err(path, e))?;
    w.write_all(b"\n").map_err(|e| write_err(path, e))?;
    w.flush().map_err(|e| write_err(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ridge_options(ridge: Option<f64>) -> Result<CsiOptions, CliError> {
    let ridge = ridge.unwrap_or(0.0);
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(CliError::Usage(format!(
            "--ridge must be a non-negative number, got {ridge}"
        )));
    }
    Ok(CsiOptions { ridge })
}

#[derive(Serialize)]
struct SummaryMirror<'a> {
    #[serde(flatten)]
    summary: SummaryJson,
    node_policy: &'a str,
    seed: u64,
    denominator: &'a str,
}

pub fn summarize(a: SummarizeArgs) -> Result<(), CliError> {
    let shard_path = required(a.shard, "SHARD")?;
    let output = required(a.output, "--output")?;
    let seed = a.seed.unwrap_or(0);
    let nodes = a.nodes.unwrap_or(NodesArg::All);
    let population = a.population.unwrap_or(false);

    let mut shard = read_shard(&shard_path)?;
    if let Some(name) = a.name {
        shard.name = name;
    }
    let (policy, policy_name) = match nodes {
        NodesArg::All => (NodePolicy::AllNodes, "all"),
        NodesArg::OnePerGraph => (NodePolicy::OneNodePerGraph { seed }, "one-per-graph"),
    };
    let (denominator, denom_name) = if population {
        (Denominator::Population, "population")
    } else {
        (Denominator::Unbiased, "unbiased")
    };
    let summary = summarize_shard(&shard, policy, denominator)?;
    write_summary(&summary, &output)?;
    let mirror = SummaryMirror {
        summary: SummaryJson::from(&summary),
        node_policy: policy_name,
        seed,
        denominator: denom_name,
    };
    write_json(&with_suffix(&output, ".json"), &mirror)?;
    println!(
        "{}: rows={} dim={} trace={}",
        summary.name,
        summary.count,
        summary.dim,
        summary.trace()
    );
    Ok(())
}

pub fn distance(a: DistanceArgs) -> Result<(), CliError> {
    let x_path = required(a.x, "X")?;
    let y_path = required(a.y, "Y")?;
    let options = ridge_options(a.ridge)?;

    let x = read_summary(&x_path)?;
    let y = read_summary(&y_path)?;
    let v = csikit_core::csi_with(&x, &y, &options)?;
    if let Some(out) = a.output {
        write_json(
            &out,
            &json!({ "x": x.name, "y": y.name, "ridge": options.ridge, "csi": v }),
        )?;
    }
    println!("{}", v.value);
    Ok(())
}

fn read_summaries(paths: &[PathBuf]) -> Result<Vec<DatasetSummary>, CliError> {
    paths
        .iter()
        .map(|p| read_summary(p).map_err(CliError::from))
        .collect()
}

pub fn rank(a: RankArgs) -> Result<(), CliError> {
    if a.upstream.is_empty() {
        return Err(CliError::missing("--upstream"));
    }
    if a.downstream.is_empty() {
        return Err(CliError::missing("--downstream"));
    }
    let budget = match (a.epochs, a.samples) {
        (Some(e), Some(n)) => Some(make_budget(e, n).map_err(|e| CliError::Usage(e.to_string()))?),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "--epochs and --samples must be given together".into(),
            ))
        }
    };
    let options = ridge_options(a.ridge)?;
    let matrix_path = match (&a.matrix, &a.output) {
        (Some(m), _) => Some(m.clone()),
        (None, Some(out)) if a.downstream.len() > 1 => Some(out.with_extension("csv")),
        (None, None) if a.downstream.len() > 1 => {
            return Err(CliError::Usage(
                "several downstreams need --matrix or --output for the distance matrix".into(),
            ))
        }
        _ => None,
    };

    let up = read_summaries(&a.upstream)?;
    let down = read_summaries(&a.downstream)?;
    let matrix = csi_matrix(&up, &down, &options)?;

    let reports: Vec<AlignmentReport> = (0..down.len())
        .map(|j| {
            let values = up
                .iter()
                .enumerate()
                .map(|(i, u)| (u.name.clone(), *matrix.get(i, j)));
            let report = rank_values(&down[j].name, values);
            match budget {
                Some(b) => report.with_budget(b),
                None => report,
            }
        })
        .collect();

    if let Some(out) = &a.output {
        if reports.len() == 1 {
            write_json(out, &reports[0])?;
        } else {
            write_json(out, &reports)?;
        }
    }
    if let Some(path) = &matrix_path {
        matrix.save_csv(path)?;
    }
    for (i, report) in reports.iter().enumerate() {
        if i > 0 {
            println!();
        }
        print!("{}", report.to_table());
    }
    Ok(())
}

pub fn erank(a: ErankArgs) -> Result<(), CliError> {
    let shard_path = required(a.shard, "SHARD")?;
    let output = required(a.output, "--output")?;
    let ks = if a.ks.is_empty() {
        DEFAULT_KS.to_vec()
    } else {
        a.ks
    };
    let repeats = a.repeats.unwrap_or(DEFAULT_REPEATS);
    let seed = a.seed.unwrap_or(0);
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be positive".into()));
    }
    if ks.iter().any(|&k| k < 2) {
        return Err(CliError::Usage("every k in --ks must be at least 2".into()));
    }
    let summary_path = a.summary.unwrap_or_else(|| {
        let stem = output.file_stem().unwrap_or_default().to_string_lossy();
        output.with_file_name(format!("{stem}.summary.csv"))
    });

    let shard = read_shard(&shard_path)?;
    let study = paired_erank_study(&shard, &ks, repeats, seed)?;
    save_study_csvs(&study, &output, &summary_path)?;
    println!("k\tnode\t\tgraph");
    for pair in &study {
        println!(
            "{}\t{:.4} ± {:.4}\t{:.4} ± {:.4}",
            pair.k, pair.node.mean, pair.node.std, pair.graph.mean, pair.graph.std
        );
    }
    Ok(())
}

pub fn sample(a: SampleArgs) -> Result<(), CliError> {
    let shard_path = required(a.shard, "SHARD")?;
    let output = required(a.output, "--output")?;
    let total = a.total.unwrap_or(DEFAULT_TOTAL);
    let seed = a.seed.unwrap_or(0);
    let strategy = a.strategy.unwrap_or(StrategyArg::Balanced);
    if total == 0 {
        return Err(CliError::Usage("--total must be positive".into()));
    }

    let shard = read_shard(&shard_path)?;
    let input_manifest = read_manifest(&shard_path)?;
    let index = build_class_index(&shard)?;
    let (picked, strategy_name) = match strategy {
        StrategyArg::Balanced => (balanced_indices(&index, total, seed)?, "balanced"),
        StrategyArg::Uniform => (
            uniform_indices(shard.graph_count(), total, seed)?,
            "uniform",
        ),
    };
    let sampled = shard.subset(&picked);

    let mut manifest = ShardManifest::for_shard(&sampled);
    let labels = input_manifest
        .as_ref()
        .map(|m| m.class_labels.clone())
        .unwrap_or_default();
    manifest.class_labels = labels.clone();
    manifest.extractor = input_manifest.and_then(|m| m.extractor);
    manifest.provenance = BTreeMap::from([
        ("source".to_string(), json!(shard.name)),
        ("strategy".to_string(), json!(strategy_name)),
        ("total".to_string(), json!(total)),
        ("seed".to_string(), json!(seed)),
    ]);
    write_shard_with_manifest(&sampled, &output, &manifest)?;

    let report = coverage_report(&index, &sampled);
    if let Some(path) = &a.coverage {
        save_coverage_csv(&report, &labels, seed, path)?;
    }
    println!(
        "sampled {} of {} graphs ({strategy_name}, seed {seed}); classes covered {}/{}",
        sampled.graph_count(),
        shard.graph_count(),
        csikit_core::sampling::covered_classes(&report),
        index.class_count()
    );
    Ok(())
}

pub fn budget(a: BudgetArgs) -> Result<(), CliError> {
    let usage = |e: csikit_core::error::CsiError| CliError::Usage(e.to_string());
    let epochs = required(a.epochs, "--epochs")?;
    let spec = match (a.samples, a.budget) {
        (Some(n), None) => make_budget(epochs, n).map_err(usage)?,
        (None, Some(c)) => {
            make_budget(epochs, plan_samples(c, epochs).map_err(usage)?).map_err(usage)?
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either --samples or --budget, not both".into(),
            ))
        }
        (None, None) => return Err(CliError::missing("--samples or --budget")),
    };
    let reference = match (a.reference_epochs, a.reference_samples) {
        (Some(e), Some(n)) => Some(make_budget(e, n).map_err(usage)?),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "--reference-epochs and --reference-samples must be given together".into(),
            ))
        }
    };
    let ratio = reference
        .as_ref()
        .map(|r| budget_ratio(&spec, r))
        .transpose()?;

    if let Some(out) = &a.output {
        write_json(
            out,
            &json!({ "budget": spec, "reference": reference, "ratio": ratio }),
        )?;
    }
    println!(
        "epochs={} samples={} C={}",
        spec.epochs, spec.samples, spec.budget
    );
    if let (Some(r), Some(ratio)) = (reference, ratio) {
        println!("reference C={} ratio={ratio}", r.budget);
    }
    Ok(())
}

pub fn gen_synthetic(a: GenSyntheticArgs) -> Result<(), CliError> {
    let dim = required(a.dim, "--dim")?;
    let graphs = required(a.graphs, "--graphs")?;
    let nodes = required(a.nodes, "--nodes")?;
    let output = required(a.output, "--output")?;
    let defaults = SyntheticSpec::default();
    let name = a.name.unwrap_or_else(|| {
        output
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(defaults.name.clone())
    });
    let spec = SyntheticSpec {
        name,
        dim,
        graphs,
        nodes_per_graph: nodes,
        classes: a.classes.unwrap_or(defaults.classes),
        class_sizes: a.zipf.map_or(ClassSizes::Even, ClassSizes::Zipf),
        cluster_scale: a.cluster_scale.unwrap_or(defaults.cluster_scale),
        graph_scale: a.graph_scale.unwrap_or(defaults.graph_scale),
        node_scale: a.node_scale.unwrap_or(defaults.node_scale),
        pooled_subspace: a.pooled_subspace,
        shift: a.shift.unwrap_or(defaults.shift),
        seed: a.seed.unwrap_or(0),
    };
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let shard = generate(&spec)?;
    write_shard_with_manifest(&shard, &output, &manifest_for(&spec, &shard))?;
    println!(
        "{}: graphs={} nodes={} dim={} seed={}",
        shard.name,
        shard.graph_count(),
        shard.total_nodes(),
        shard.dim,
        spec.seed
    );
    Ok(())
}
