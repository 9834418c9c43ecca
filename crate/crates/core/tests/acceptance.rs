//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use csikit_core::frechet::{csi, CsiOptions};
use csikit_core::nalgebra::{DMatrix, DVector};
use csikit_core::sampling::{build_class_index, coverage_report, covered_classes};
use csikit_core::select::{budget_ratio, make_budget, plan_samples, rank_upstreams};
use csikit_core::shard::{read_shard, write_shard, EmbeddingShard, GraphRecord};
use csikit_core::spectral::{effective_rank, effective_rank_of_spectrum, paired_erank_study};
use csikit_core::stats::MomentAccumulator;
use csikit_core::synthetic::{generate, ClassSizes, SyntheticSpec};
use csikit_core::{sample_balanced, sample_uniform};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn frechet_commuting() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1001);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = r.random_range(1..=16);
        let draw = |r: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> {
            (0..d).map(|_| r.random_range(lo..hi)).collect()
        };
        let (mx, my) = (draw(&mut r, -3.0, 3.0), draw(&mut r, -3.0, 3.0));
        let (vx, vy) = (draw(&mut r, 0.0, 5.0), draw(&mut r, 0.0, 5.0));
        let got = csi(
            &diagonal_summary("x", &mx, &vx),
            &diagonal_summary("y", &my, &vy),
        )
        .map_err(|e| e.to_string())?
        .value;
        let want = diagonal_frechet(&mx, &vx, &my, &vy);
        let rel = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(rel);
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    ensure(worst <= 1e-8, || {
        format!("max relative error {worst:e} > 1e-8")
    })?;
    Ok(format!(
        "200 pairs, max rel err {worst:.2e}, {:?}",
        start.elapsed()
    ))
}

fn frechet_general() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1002);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..=8);
        let x = random_summary(&mut r, "x", d);
        let y = random_summary(&mut r, "y", d);
        let got = csi(&x, &y).map_err(|e| e.to_string())?.value;
        let want = reference_frechet(
            x.mean.as_slice(),
            &to_dense(&x.cov),
            y.mean.as_slice(),
            &to_dense(&y.cov),
        );
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    ensure(worst <= 1e-6, || {
        format!("max relative error {worst:e} > 1e-6")
    })?;
    Ok(format!(
        "100 pairs, max rel err {worst:.2e}, {:?}",
        start.elapsed()
    ))
}

fn identity_and_symmetry() -> Outcome {
    let mut r = rng(1003);
    let summaries: Vec<_> = (0..100)
        .map(|i| {
            let d = 1 + i % 8;
            random_summary(&mut r, "s", d)
        })
        .collect();
    let mut worst_self = 0.0f64;
    let mut worst_asym = 0.0f64;
    for (i, x) in summaries.iter().enumerate() {
        worst_self = worst_self.max(csi(x, x).map_err(|e| e.to_string())?.value);
        // pair with the next summary of the same dimension
        let y = &summaries[if i + 8 < summaries.len() {
            i + 8
        } else {
            i - 88
        }];
        let xy = csi(x, y).map_err(|e| e.to_string())?.value;
        let yx = csi(y, x).map_err(|e| e.to_string())?.value;
        worst_asym = worst_asym.max((xy - yx).abs() / xy.max(1.0));
    }
    ensure(worst_self <= 1e-6, || {
        format!("csi(X,X) reached {worst_self:e}")
    })?;
    ensure(worst_asym <= 1e-6, || {
        format!("asymmetry reached {worst_asym:e}")
    })?;
    Ok(format!(
        "max csi(X,X) {worst_self:.2e}, max asymmetry {worst_asym:.2e}"
    ))
}

fn effective_rank_checks() -> Outcome {
    for d in 1..=64 {
        let e = effective_rank(&DMatrix::identity(d, d)).map_err(|e| e.to_string())?;
        ensure(e == d as f64, || format!("identity({d}) gave {e}"))?;
    }
    let e = effective_rank_of_spectrum(&[2.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    let want = 2f64.powf(1.5);
    ensure((e - want).abs() <= 1e-10, || {
        format!("(2,1,1) gave {e}, want {want}")
    })?;

    let mut r = rng(1004);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..=12);
        let m = random_spd(&mut r, d, 1);
        let base = effective_rank(&m).map_err(|e| e.to_string())?;
        let scaled =
            effective_rank(&(&m * r.random_range(1e-3..1e3))).map_err(|e| e.to_string())?;
        let q = random_orthogonal(&mut r, d);
        let rot = &q * &m * q.transpose();
        let rot = (&rot + rot.transpose()) * 0.5;
        let rotated = effective_rank(&rot).map_err(|e| e.to_string())?;
        worst = worst.max((scaled - base).abs()).max((rotated - base).abs());
    }
    ensure(worst <= 1e-8, || {
        format!("invariance error {worst:e} > 1e-8")
    })?;
    Ok(format!(
        "identity exact for d<=64, (2,1,1) ok, invariance err {worst:.2e}"
    ))
}

fn bootstrap_protocol() -> Outcome {
    let spec = SyntheticSpec {
        name: "pooled".into(),
        dim: 16,
        graphs: 200,
        nodes_per_graph: 8,
        classes: 5,
        pooled_subspace: Some(2),
        seed: 7,
        ..Default::default()
    };
    let shard = generate(&spec).map_err(|e| e.to_string())?;
    let ks = [50, 100, 150];
    let study = paired_erank_study(&shard, &ks, 10, 42).map_err(|e| e.to_string())?;
    let again = paired_erank_study(&shard, &ks, 10, 42).map_err(|e| e.to_string())?;
    ensure(study == again, || "study is not seed-deterministic".into())?;
    ensure(study.len() == 3, || format!("{} k values", study.len()))?;
    let mut gaps = Vec::new();
    for pair in &study {
        for rep in [&pair.node, &pair.graph] {
            ensure(rep.per_repeat.len() == 10, || {
                format!(
                    "k={} {:?}: {} values",
                    pair.k,
                    rep.level,
                    rep.per_repeat.len()
                )
            })?;
        }
        for (r, (n, g)) in pair
            .node
            .per_repeat
            .iter()
            .zip(&pair.graph.per_repeat)
            .enumerate()
        {
            ensure(n > g, || {
                format!("k={} repeat {r}: node {n} <= graph {g}", pair.k)
            })?;
        }
        gaps.push(format!(
            "k={}: node {:.2} vs graph {:.2}",
            pair.k, pair.node.mean, pair.graph.mean
        ));
    }
    Ok(gaps.join("; "))
}

fn class_balanced_sampling() -> Outcome {
    let shard = generate(&SyntheticSpec {
        name: "zipf".into(),
        dim: 4,
        graphs: 1000,
        nodes_per_graph: 2,
        classes: 50,
        class_sizes: ClassSizes::Zipf(1.5),
        seed: 0,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let idx = build_class_index(&shard).map_err(|e| e.to_string())?;
    ensure(idx.class_count() == 50, || {
        format!("{} classes", idx.class_count())
    })?;
    let mut balanced = Vec::new();
    let mut uniform = Vec::new();
    for seed in 0..20 {
        let b = sample_balanced(&shard, &idx, 100, seed).map_err(|e| e.to_string())?;
        let u = sample_uniform(&shard, 100, seed).map_err(|e| e.to_string())?;
        ensure(b.graph_count() == 100 && u.graph_count() == 100, || {
            format!(
                "seed {seed}: sizes {} / {}",
                b.graph_count(),
                u.graph_count()
            )
        })?;
        balanced.push(covered_classes(&coverage_report(&idx, &b)));
        uniform.push(covered_classes(&coverage_report(&idx, &u)));
    }
    ensure(balanced.iter().all(|&c| c == 50), || {
        format!("balanced coverage {balanced:?}")
    })?;
    uniform.sort_unstable();
    let median = (uniform[9] + uniform[10]) as f64 / 2.0;
    ensure(median < 50.0, || {
        format!("uniform median coverage {median}")
    })?;
    Ok(format!(
        "balanced 50/50 in all seeds, uniform median {median}/50"
    ))
}

fn budget_arithmetic() -> Outcome {
    let small = make_budget(5, 2_000_000).map_err(|e| e.to_string())?;
    ensure(small.budget == 10_000_000, || {
        format!("C = {}", small.budget)
    })?;
    let jmp = make_budget(2, 120_000_000).map_err(|e| e.to_string())?;
    let ratio = budget_ratio(&small, &jmp).map_err(|e| e.to_string())?;
    ensure(ratio == 1.0 / 24.0, || format!("ratio {ratio}"))?;
    let n = plan_samples(10_000_000, 10).map_err(|e| e.to_string())?;
    ensure(n == 1_000_000, || format!("plan_samples gave {n}"))?;
    Ok("C=10M, ratio=1/24, N=1M".into())
}

fn ordinal_ranking() -> Outcome {
    let offsets = [0.5, 1.0, 2.0, 3.0];
    let names = ["near", "close", "far", "farthest"];
    for seed in 0..100u64 {
        let mut r = rng(2000 + seed);
        let d = r.random_range(2..=10);
        let mean: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
        let var: Vec<f64> = (0..d).map(|_| r.random_range(0.2..3.0)).collect();
        let down = diagonal_summary("down", &mean, &var);
        let dir = DVector::from_fn(d, |_, _| r.random_range(-1.0..1.0)).normalize();
        let up_var: Vec<f64> = var.iter().map(|v| 1.5 * v).collect();
        let mut ups: Vec<_> = offsets
            .iter()
            .zip(names)
            .map(|(&o, name)| {
                let m: Vec<f64> = mean
                    .iter()
                    .zip(dir.iter())
                    .map(|(a, u)| a + o * u)
                    .collect();
                (diagonal_summary(name, &m, &up_var), m)
            })
            .collect();
        // present the family in a seed-dependent order
        for i in (1..ups.len()).rev() {
            ups.swap(i, r.random_range(0..=i));
        }
        let summaries: Vec<_> = ups.iter().map(|(s, _)| s.clone()).collect();
        let report =
            rank_upstreams(&summaries, &down, &CsiOptions::default()).map_err(|e| e.to_string())?;
        let got: Vec<&str> = report.ranked.iter().map(|x| x.name.as_str()).collect();
        ensure(got == names, || format!("seed {seed}: ranking {got:?}"))?;
        ensure(report.selected == "near", || {
            format!("seed {seed}: selected {}", report.selected)
        })?;
        for (s, m) in &ups {
            let want = diagonal_frechet(m, &up_var, &mean, &var);
            let entry = report.ranked.iter().find(|x| x.name == s.name).unwrap();
            ensure(rel_close(entry.value, want, 1e-8), || {
                format!(
                    "seed {seed}: {} csi {} vs closed form {want}",
                    s.name, entry.value
                )
            })?;
        }
    }
    Ok("100/100 seeds ranked as designed".into())
}

fn streaming_statistics() -> Outcome {
    let (n, d) = (10_000, 64);
    let mut r = rng(1005);
    let rows: Vec<f64> = (0..n * d)
        .map(|i| 50.0 * ((i % d) as f64).sin() + r.random_range(-1.0..1.0))
        .collect();
    let mut acc = MomentAccumulator::new(d);
    acc.accumulate(&rows).map_err(|e| e.to_string())?;
    let streamed = acc.finalize("s").map_err(|e| e.to_string())?;
    let (_, reference) = two_pass_covariance(&rows, d);
    let err = relative_frobenius(&to_dense(&streamed.cov), &reference);
    ensure(err <= 1e-10, || format!("streaming vs two-pass {err:e}"))?;

    let part = &rows[..1000 * d];
    let mut whole = MomentAccumulator::new(d);
    whole.accumulate(part).map_err(|e| e.to_string())?;
    let split = |a: usize, b: usize| {
        let mut m = MomentAccumulator::new(d);
        m.accumulate(&part[a * d..b * d]).map(|_| m)
    };
    let merged = split(0, 333)
        .and_then(|a| a.merge(&split(333, 700)?))
        .and_then(|ab| ab.merge(&split(700, 1000)?))
        .map_err(|e| e.to_string())?;
    let mw = merged.finalize("m").map_err(|e| e.to_string())?;
    let ww = whole.finalize("w").map_err(|e| e.to_string())?;
    let merr = relative_frobenius(&to_dense(&mw.cov), &to_dense(&ww.cov));
    let mean_err = (&mw.mean - &ww.mean).norm() / ww.mean.norm().max(1.0);
    ensure(merr <= 1e-10 && mean_err <= 1e-10, || {
        format!("3-way merge cov err {merr:e}, mean err {mean_err:e}")
    })?;
    Ok(format!("two-pass err {err:.2e}, merge err {merr:.2e}"))
}

fn shard_format() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng(1006);
    for i in 0..50 {
        let dim = r.random_range(1..=9);
        let graphs = (0..r.random_range(0..12))
            .map(|_| {
                let n = r.random_range(1..=6);
                let f = (0..n * dim).map(|_| r.random_range(-1e3f32..1e3)).collect();
                GraphRecord::new(r.random(), dim, f).unwrap()
            })
            .collect();
        let shard = EmbeddingShard::new(format!("s{i}"), dim, graphs).map_err(|e| e.to_string())?;
        let a = dir.path().join(format!("{i}.csi1"));
        let b = dir.path().join(format!("{i}.copy.csi1"));
        write_shard(&shard, &a).map_err(|e| e.to_string())?;
        let size = std::fs::metadata(&a).map_err(|e| e.to_string())?.len();
        let formula = 16
            + shard
                .graphs
                .iter()
                .map(|g| 12 + 4 * (g.node_count * dim) as u64)
                .sum::<u64>();
        ensure(size == formula, || {
            format!("shard {i}: size {size}, formula {formula}")
        })?;
        let back = read_shard(&a).map_err(|e| e.to_string())?;
        ensure(back == shard, || format!("shard {i}: round trip differs"))?;
        write_shard(&back, &b).map_err(|e| e.to_string())?;
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        ensure(ba == bb, || format!("shard {i}: rewritten bytes differ"))?;
    }
    Ok("50 random shards: size formula and byte-identical round trip".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("frechet oracle, commuting case", frechet_commuting),
        ("frechet oracle, general case", frechet_general),
        ("identity and symmetry", identity_and_symmetry),
        ("effective rank", effective_rank_checks),
        ("bootstrap protocol fidelity", bootstrap_protocol),
        ("class-balanced sampling", class_balanced_sampling),
        ("budget arithmetic", budget_arithmetic),
        ("ordinal ranking", ordinal_ranking),
        ("streaming statistics", streaming_statistics),
        ("shard format", shard_format),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
