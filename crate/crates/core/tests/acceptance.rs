//! Acceptance gate. Each criterion prints one PASS/FAIL line; the test fails if any does.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctxfuse::cli::main_with_args;
use ctxfuse::energy::{sensor_period_energy, sensor_step_energy, SensorActivation};
use ctxfuse::fusion::{weighted_boxes_fusion, ClusterConfMode, FusionParams};
use ctxfuse::gating::{select_candidates, GateEstimate, GateKind};
use ctxfuse::optimizer::{expected_energy_map, select_config, JointWeights};
use ctxfuse::profile::ProfileDataset;
use ctxfuse::runtime::{average_records, run_static, run_trace, RunParams, StepMode};
use ctxfuse::scenario::{bundled_scenario, context_tour, generate_trace, BUNDLED_SCENARIO_SEED};
use ctxfuse::types::{Context, Detection, Modality, SensorId, SensorSpec};

// Pinned tolerances and budgets.
const ENERGY_REL_TOL: f64 = 1e-12;
const WBF_TOL: f64 = 1e-9;
const OPTIMIZER_BUDGET: Duration = Duration::from_secs(5);
const MONOTONICITY_BUDGET: Duration = Duration::from_secs(5);
const WBF_BUDGET: Duration = Duration::from_secs(10);
const DOMINANCE_BUDGET: Duration = Duration::from_secs(60);
const TREND_BUDGET: Duration = Duration::from_secs(60);
const MIN_ENERGY_REDUCTION: f64 = 0.40;
const MAX_LOSS_INCREASE: f64 = 0.10;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    check(elapsed < budget, || format!("took {elapsed:?}, budget {budget:?}"))?;
    Ok(elapsed)
}

// ---- 1. optimizer vs brute force -------------------------------------------------------

/// Literal candidate filter and joint-loss argmin with the documented tie-break.
fn brute_force(
    losses: &[(String, f64)],
    energies: &BTreeMap<String, f64>,
    lambda: f64,
    gamma: f64,
) -> (Vec<String>, String) {
    let mut min = f64::INFINITY;
    for (_, l) in losses {
        if *l < min {
            min = *l;
        }
    }
    let mut admitted: Vec<String> = losses
        .iter()
        .filter(|(_, l)| *l <= min + gamma)
        .map(|(id, _)| id.clone())
        .collect();
    admitted.sort();
    let loss_of = |id: &str| losses.iter().find(|(i, _)| i == id).unwrap().1;
    let mut best: Option<(f64, f64, String)> = None;
    for id in &admitted {
        let l = loss_of(id);
        let e = energies[id];
        let j = l * (1.0 - lambda) + e * lambda;
        let take = match &best {
            None => true,
            Some((bj, be, bid)) => j < *bj || (j == *bj && (e < *be || (e == *be && id < bid))),
        };
        if take {
            best = Some((j, e, id.clone()));
        }
    }
    (admitted, best.unwrap().2)
}

fn random_value(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    // a coarse grid half the time so exact ties occur
    if rng.random_bool(0.5) {
        rng.random_range(0..8) as f64 * scale / 8.0
    } else {
        rng.random_range(0.0..scale)
    }
}

fn criterion_optimizer_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ties = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=127usize);
        let losses: Vec<(String, f64)> = (0..n)
            .map(|i| (format!("cfg{i:03}"), random_value(&mut rng, 4.0)))
            .collect();
        let energies: BTreeMap<String, f64> = losses
            .iter()
            .map(|(id, _)| (id.clone(), random_value(&mut rng, 12.0)))
            .collect();
        let lambda = match case % 4 {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..=1.0),
        };
        let gamma = match case % 5 {
            0 => 0.0,
            1 => f64::INFINITY,
            _ => rng.random_range(0.0..2.0),
        };
        let est = GateEstimate::new(losses.iter().cloned().collect()).map_err(|e| e.to_string())?;
        let candidates = select_candidates(&est, gamma).map_err(|e| e.to_string())?;
        let chosen = select_config(&candidates, &est, &energies, JointWeights::new(lambda).unwrap())
            .map_err(|e| e.to_string())?;
        let (want_candidates, want) = brute_force(&losses, &energies, lambda, gamma);
        check(candidates == want_candidates, || format!("case {case}: candidate sets differ"))?;
        check(chosen == want, || format!("case {case}: chose {chosen}, oracle {want}"))?;
        let j = |id: &str| {
            let l = est.get(id).unwrap();
            l * (1.0 - lambda) + energies[id] * lambda
        };
        if candidates.iter().filter(|c| j(c) == j(&want)).count() > 1 {
            ties += 1;
        }
    }
    let t = within_budget(start, OPTIMIZER_BUDGET)?;
    Ok(format!("1000 instances agree ({ties} with joint-loss ties), {t:.2?}"))
}

// ---- 2. lambda monotonicity -------------------------------------------------------------

fn criterion_lambda_monotonicity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for set in 0..50 {
        let n = rng.random_range(1..=127usize);
        let est: BTreeMap<String, f64> = (0..n)
            .map(|i| (format!("cfg{i:03}"), random_value(&mut rng, 4.0)))
            .collect();
        let energies: BTreeMap<String, f64> = est
            .keys()
            .map(|id| (id.clone(), random_value(&mut rng, 12.0)))
            .collect();
        let est = GateEstimate::new(est).unwrap();
        let candidates: Vec<String> = est.iter().map(|(id, _)| id.to_owned()).collect();
        let mut lambdas: Vec<f64> = (0..18).map(|_| rng.random_range(0.0..1.0)).collect();
        lambdas.extend([0.0, 1.0]);
        lambdas.sort_by(f64::total_cmp);
        let mut prev: Option<(f64, f64)> = None;
        for l in lambdas {
            let id = select_config(&candidates, &est, &energies, JointWeights::new(l).unwrap())
                .map_err(|e| e.to_string())?;
            let (loss, energy) = (est.get(&id).unwrap(), energies[&id]);
            if let Some((pl, pe)) = prev {
                check(energy <= pe, || format!("set {set}: energy rose {pe} -> {energy} at lambda {l}"))?;
                check(loss >= pl, || format!("set {set}: loss fell {pl} -> {loss} at lambda {l}"))?;
            }
            prev = Some((loss, energy));
        }
    }
    let t = within_budget(start, MONOTONICITY_BUDGET)?;
    Ok(format!("50 sets x 20 lambdas monotone, {t:.2?}"))
}

// ---- 3. energy exactness ----------------------------------------------------------------

fn sensor(id: &str, modality: Modality, p_meas: f64, p_motor: f64, freq_hz: f64) -> SensorSpec {
    SensorSpec {
        id: SensorId(id.into()),
        modality,
        p_meas,
        p_motor,
        freq_hz,
        spinning: p_motor > 0.0,
    }
}

fn criterion_energy_exactness() -> Outcome {
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    for f in [4.0, 10.0, 20.0] {
        for (s, total, motor) in [
            (sensor("radar", Modality::Radar, 21.6, 2.4, f), 24.0, 2.4),
            (sensor("lidar", Modality::Lidar, 9.6, 2.4, f), 12.0, 2.4),
            (sensor("camera", Modality::Camera, 1.9, 0.0, f), 1.9, 0.0),
        ] {
            let want = total / f;
            let active = sensor_step_energy(&s, SensorActivation::Active, 1.0 / f);
            check(rel(active, want) <= ENERGY_REL_TOL, || {
                format!("{} at {f} Hz: {active} vs {want}", s.id)
            })?;
            check(rel(sensor_period_energy(&s), want) <= ENERGY_REL_TOL, || {
                format!("{} period energy at {f} Hz", s.id)
            })?;
            let gated = sensor_step_energy(&s, SensorActivation::Gated, 1.0 / f);
            check(gated == motor * (1.0 / f), || format!("{} gated at {f} Hz: {gated}", s.id))?;
            if !s.spinning {
                check(gated == 0.0, || format!("gated camera charged {gated}"))?;
            }
        }
    }
    Ok("radar/lidar/camera at 4, 10, 20 Hz within 1e-12".into())
}

// ---- 4. weighted boxes fusion -----------------------------------------------------------

fn det(class_id: u32, c: [f64; 4], conf: f64) -> Detection {
    Detection::new(class_id, c, conf)
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= WBF_TOL)
}

fn wbf_hand_examples() -> Result<(), String> {
    let p = FusionParams::default();
    let a = det(0, [0.0, 0.0, 10.0, 10.0], 0.8);
    let b = det(0, [1.0, 1.0, 11.0, 11.0], 0.4);

    let out = weighted_boxes_fusion(&[vec![a], vec![b]], &p);
    check(out.len() == 1, || format!("expected one fused box, got {}", out.len()))?;
    check(
        close(&out[0].bbox.coords(), &[1.0 / 3.0, 1.0 / 3.0, 31.0 / 3.0, 31.0 / 3.0]),
        || format!("fused box {:?}", out[0].bbox),
    )?;
    check((out[0].confidence - 0.6).abs() <= WBF_TOL, || format!("conf {}", out[0].confidence))?;

    let strict = FusionParams {
        iou_threshold: 0.7,
        ..p
    };
    let out = weighted_boxes_fusion(&[vec![a], vec![b]], &strict);
    check(out.len() == 2, || "iou 0.68 < 0.7 must not merge".into())?;

    let out = weighted_boxes_fusion(&[vec![a]], &p);
    check(out == vec![a], || "singleton changed".into())?;

    // same boxes, different classes never merge
    let out = weighted_boxes_fusion(&[vec![a], vec![det(1, [1.0, 1.0, 11.0, 11.0], 0.4)]], &p);
    check(out.len() == 2, || "classes merged".into())?;

    // three lists, two members, weighted mode: 0.6 * 2/3
    let weighted = FusionParams {
        cluster_conf_mode: ClusterConfMode::Weighted,
        ..p
    };
    let out = weighted_boxes_fusion(&[vec![a], vec![b], vec![]], &weighted);
    check(out.len() == 1 && (out[0].confidence - 0.4).abs() <= WBF_TOL, || {
        format!("weighted conf {:?}", out.first().map(|d| d.confidence))
    })?;

    // three identical boxes with confidences 0.9, 0.6, 0.3 stay put, mean 0.6
    let c = [5.0, 5.0, 25.0, 45.0];
    let out = weighted_boxes_fusion(&[vec![det(2, c, 0.9)], vec![det(2, c, 0.6)], vec![det(2, c, 0.3)]], &p);
    check(out.len() == 1 && close(&out[0].bbox.coords(), &c), || "identical boxes".into())?;
    check((out[0].confidence - 0.6).abs() <= WBF_TOL, || "identical boxes conf".into())?;

    check(weighted_boxes_fusion::<Vec<Detection>>(&[], &p).is_empty(), || "empty input".into())?;
    Ok(())
}

fn random_lists(rng: &mut ChaCha8Rng) -> Vec<Vec<Detection>> {
    let lists = rng.random_range(1..=4);
    // a few anchors so boxes overlap often
    let anchors: Vec<[f64; 2]> = (0..3)
        .map(|_| [rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)])
        .collect();
    (0..lists)
        .map(|_| {
            let n = rng.random_range(0..=5);
            (0..n)
                .map(|_| {
                    let [ax, ay] = anchors[rng.random_range(0..anchors.len())];
                    let x1 = ax + rng.random_range(-4.0..4.0);
                    let y1 = ay + rng.random_range(-4.0..4.0);
                    let w = rng.random_range(5.0..40.0);
                    let h = rng.random_range(5.0..40.0);
                    det(rng.random_range(0..2), [x1, y1, x1 + w, y1 + h], rng.random_range(0.01..1.0))
                })
                .collect()
        })
        .collect()
}

fn wbf_fuzz(cases: usize) -> Result<(), String> {
    let p = FusionParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..cases {
        let lists = random_lists(&mut rng);
        let out = weighted_boxes_fusion(&lists, &p);

        // convex hull: every fused value lies inside the same-class input range
        for d in &out {
            let members: Vec<&Detection> = lists.iter().flatten().filter(|x| x.class_id == d.class_id).collect();
            check(!members.is_empty(), || format!("case {case}: fused box of absent class"))?;
            let coords = d.bbox.coords();
            for (k, v) in coords.iter().enumerate() {
                let lo = members.iter().map(|m| m.bbox.coords()[k]).fold(f64::INFINITY, f64::min);
                let hi = members.iter().map(|m| m.bbox.coords()[k]).fold(f64::NEG_INFINITY, f64::max);
                check(*v >= lo && *v <= hi, || format!("case {case}: coord outside hull"))?;
            }
            let lo = members.iter().map(|m| m.confidence).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|m| m.confidence).fold(f64::NEG_INFINITY, f64::max);
            check(d.confidence >= lo && d.confidence <= hi, || {
                format!("case {case}: confidence outside hull")
            })?;
        }
        let total: usize = lists.iter().map(Vec::len).sum();
        check(out.len() <= total, || format!("case {case}: more outputs than inputs"))?;

        // permutation invariance across and within lists
        let mut shuffled = lists.clone();
        shuffled.shuffle(&mut rng);
        for l in &mut shuffled {
            l.shuffle(&mut rng);
        }
        check(weighted_boxes_fusion(&shuffled, &p) == out, || {
            format!("case {case}: permutation changed the output")
        })?;

        // singleton identity
        if let Some(d) = lists.iter().flatten().next() {
            let mut single = vec![Vec::new(); lists.len()];
            single[case % lists.len()].push(*d);
            check(weighted_boxes_fusion(&single, &p) == vec![*d], || {
                format!("case {case}: singleton not preserved")
            })?;
        }
    }
    Ok(())
}

fn criterion_wbf() -> Outcome {
    let start = Instant::now();
    wbf_hand_examples()?;
    wbf_fuzz(10_000)?;
    let t = within_budget(start, WBF_BUDGET)?;
    Ok(format!("hand examples within 1e-9, 10000 fuzz cases, {t:.2?}"))
}

// ---- 5. oracle dominance ----------------------------------------------------------------

fn criterion_oracle_dominance() -> Outcome {
    let start = Instant::now();
    let profile = ProfileDataset::load(ProfileDataset::DEFAULT).map_err(|e| e.to_string())?;
    let seed = 5;
    let trace = generate_trace(&context_tour(100), &profile, seed).map_err(|e| e.to_string())?;
    check(trace.len() == 800 && trace.contexts().len() == 8, || "trace shape".into())?;
    let params = RunParams {
        gamma: 0.0,
        t_c: 1,
        ..RunParams::new(&profile, GateKind::Oracle, 0.0, seed).map_err(|e| e.to_string())?
    };
    let out = run_trace(&trace, &profile, &params).map_err(|e| e.to_string())?;
    let controller = out.summary.avg_loss;
    check(profile.configurations().len() == 127, || "expected 127 configurations".into())?;
    let mut best_static = (f64::INFINITY, String::new());
    for cfg in profile.configurations() {
        let records = run_static(&trace, &profile, cfg, seed).map_err(|e| e.to_string())?;
        let avg = average_records(&records).avg_loss;
        check(controller <= avg, || format!("controller {controller} > static {} {avg}", cfg.id()))?;
        if avg < best_static.0 {
            best_static = (avg, cfg.id().to_owned());
        }
    }
    let t = within_budget(start, DOMINANCE_BUDGET)?;
    Ok(format!(
        "controller loss {controller:.4} <= best static {} {:.4}, {t:.2?}",
        best_static.1, best_static.0
    ))
}

// ---- 6. intermittency schedule ----------------------------------------------------------

fn criterion_schedule() -> Outcome {
    let base = ProfileDataset::load(ProfileDataset::DEFAULT).map_err(|e| e.to_string())?;
    // a visible switch cost so charging is observable
    let profile = base
        .with_spec(|s| s.switch_overhead_j = 0.05)
        .map_err(|e| e.to_string())?;
    let long = generate_trace(&context_tour(125), &profile, 6).map_err(|e| e.to_string())?;
    let mut switches = 0;
    for n in [1usize, 29, 30, 31, 90, 1000] {
        let trace = ctxfuse::SimulationTrace::new(long.steps()[..n].to_vec()).map_err(|e| e.to_string())?;
        for t_c in [1usize, 30, 10_000] {
            let params = RunParams {
                t_c,
                ..RunParams::new(&profile, GateKind::Oracle, 0.0, 6).map_err(|e| e.to_string())?
            };
            let out = run_trace(&trace, &profile, &params).map_err(|e| e.to_string())?;
            let id_steps = out.records.iter().filter(|r| r.mode == StepMode::ContextId).count();
            let want = n.div_ceil(t_c);
            check(id_steps == want && out.summary.context_id_steps == want, || {
                format!("N={n} T_c={t_c}: {id_steps} context-ID steps, want {want}")
            })?;
            let mut changes = 0;
            for (i, r) in out.records.iter().enumerate() {
                let changed = i > 0 && r.config_id != out.records[i - 1].config_id;
                check(!changed || r.mode == StepMode::ContextId, || {
                    format!("N={n} T_c={t_c}: configuration changed on a fusion step at t={}", r.t)
                })?;
                let want_switch = if changed { 0.05 } else { 0.0 };
                check(r.switch_j == want_switch, || {
                    format!("N={n} T_c={t_c}: t={} switch_j {} want {want_switch}", r.t, r.switch_j)
                })?;
                changes += changed as usize;
            }
            check(out.summary.switch_count == changes, || "switch count mismatch".into())?;
            switches += changes;
        }
    }
    Ok(format!("18 (N, T_c) pairs exact, {switches} switches all on changes"))
}

// ---- 7. energy reduction trend ----------------------------------------------------------

fn criterion_trend() -> Outcome {
    let start = Instant::now();
    let profile = ProfileDataset::load(ProfileDataset::DEFAULT).map_err(|e| e.to_string())?;
    let trace = bundled_scenario(&profile).map_err(|e| e.to_string())?;
    let run = |lambda: f64| {
        let params = RunParams::new(&profile, GateKind::Estimator, lambda, BUNDLED_SCENARIO_SEED)?;
        run_trace(&trace, &profile, &params)
    };
    let base = run(0.0).map_err(|e| e.to_string())?.summary;
    let eco = run(0.01).map_err(|e| e.to_string())?.summary;
    let reduction = 1.0 - eco.avg_energy_j / base.avg_energy_j;
    let loss_change = eco.avg_loss / base.avg_loss - 1.0;
    let detail = format!(
        "energy {:.3} -> {:.3} J ({:.1}% lower), loss {:.4} -> {:.4} ({:+.1}%)",
        base.avg_energy_j,
        eco.avg_energy_j,
        reduction * 100.0,
        base.avg_loss,
        eco.avg_loss,
        loss_change * 100.0
    );
    check(reduction >= MIN_ENERGY_REDUCTION, || format!("{detail}: reduction below 40%"))?;
    check(loss_change <= MAX_LOSS_INCREASE, || format!("{detail}: loss rose more than 10%"))?;
    let t = within_budget(start, TREND_BUDGET)?;
    Ok(format!("{detail}, {t:.2?}"))
}

// ---- 8. lambda = 1 limit ----------------------------------------------------------------

fn criterion_energy_limit() -> Outcome {
    let profile = ProfileDataset::load(ProfileDataset::DEFAULT).map_err(|e| e.to_string())?;
    let energies = expected_energy_map(&profile).map_err(|e| e.to_string())?;
    let (min_id, _) = energies
        .iter()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
        .unwrap();
    check(min_id == "cam_l", || format!("minimum-energy configuration is {min_id}"))?;

    let trace = generate_trace(&context_tour(40), &profile, 8).map_err(|e| e.to_string())?;
    let params = RunParams {
        gamma: f64::INFINITY,
        ..RunParams::new(&profile, GateKind::Estimator, 1.0, 8).map_err(|e| e.to_string())?
    };
    let out = run_trace(&trace, &profile, &params).map_err(|e| e.to_string())?;
    check(out.records.iter().all(|r| r.config_id == "cam_l"), || "left cam_l".into())?;
    // cam_l measuring, cam_r off, lidar and radar motors only: (1.9 + 2.4 + 2.4) W for 0.1 s
    let gated_sensor_j = (1.9 + 2.4 + 2.4) * 0.1;
    for r in out.records.iter().filter(|r| r.mode == StepMode::Fusion) {
        check((r.sensor_j - gated_sensor_j).abs() <= 1e-12, || {
            format!("t={}: sensor energy {} want {gated_sensor_j}", r.t, r.sensor_j)
        })?;
    }
    check(out.summary.switch_count == 0, || "switched away".into())?;
    Ok(format!("{} steps on cam_l, fusion-step sensor energy {gated_sensor_j} J", out.records.len()))
}

// ---- 9. determinism ---------------------------------------------------------------------

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("run");
    let args = [
        "ctxfuse",
        "run",
        "--gate",
        "estimator",
        "--lambda-e",
        "0.01",
        "--generate",
        "fog:40,snow:40,night:40",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ];
    let read = |name: &str| std::fs::read(out.join(name)).map_err(|e| e.to_string());
    check(main_with_args(args) == 0, || "first run failed".into())?;
    let first = (read("steps.csv")?, read("summary.json")?);
    check(main_with_args(args) == 0, || "second run failed".into())?;
    let second = (read("steps.csv")?, read("summary.json")?);
    check(first.0 == second.0, || "steps.csv differs".into())?;
    check(first.1 == second.1, || "summary.json differs".into())?;
    Ok(format!("steps.csv ({} B) and summary.json identical", first.0.len()))
}

// ---- 10. profile fidelity ---------------------------------------------------------------

fn criterion_profile_fidelity() -> Outcome {
    let profile = ProfileDataset::load("radiate-table1").map_err(|e| e.to_string())?;
    // (configuration id, avg loss, energy J, latency ms)
    let table = [
        ("radar", 2.858, 6.73, 14.2),
        ("lidar", 4.682, 3.73, 14.2),
        ("cam_l", 1.680, 1.81, 14.2),
        ("radar_lidar", 2.784, 9.16, 17.1),
        ("cams", 1.203, 2.31, 17.1),
        ("cams_lidar", 3.476, 3.73, 19.7),
        ("cam_l+cam_r+lidar+radar", 0.967, 10.48, 42.6),
    ];
    check(profile.reference().len() == table.len(), || "row count".into())?;
    for (id, loss, energy, latency) in table {
        let row = profile
            .reference_row(id)
            .ok_or_else(|| format!("no reference row for {id}"))?;
        check(row.avg_loss == loss && row.energy_j == energy && row.latency_ms == latency, || {
            format!("{id}: {row:?}")
        })?;
        check(profile.configuration(id).is_some(), || format!("{id} is not a configuration"))?;
    }
    let by_id = |id: &str| profile.sensor(&SensorId(id.into())).cloned().unwrap();
    let radar = by_id("radar");
    let lidar = by_id("lidar");
    check(radar.p_meas == 21.6 && radar.p_motor == 2.4, || "radar powers".into())?;
    check(lidar.p_meas == 9.6 && lidar.p_motor == 2.4, || "lidar powers".into())?;
    check(by_id("cam_l").p_meas == 1.9 && by_id("cam_r").p_meas == 1.9, || "camera powers".into())?;
    Ok("7 reference rows exact, sensor powers exact".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("optimizer matches brute force", criterion_optimizer_oracle),
        ("lambda_e monotonicity", criterion_lambda_monotonicity),
        ("energy model exactness", criterion_energy_exactness),
        ("weighted boxes fusion", criterion_wbf),
        ("oracle gate dominance", criterion_oracle_dominance),
        ("intermittency schedule", criterion_schedule),
        ("energy reduction trend", criterion_trend),
        ("lambda_e = 1 limit", criterion_energy_limit),
        ("determinism", criterion_determinism),
        ("profile fidelity", criterion_profile_fidelity),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("[{:>2}] PASS {name}: {detail}", i + 1),
            Err(why) => {
                println!("[{:>2}] FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn bundled_scenario_covers_every_context() {
    let profile = ProfileDataset::load(ProfileDataset::DEFAULT).unwrap();
    let trace = bundled_scenario(&profile).unwrap();
    assert_eq!(trace.contexts().len(), Context::BUILTIN.len());
}
