//! Acceptance run: one PASS/FAIL line per criterion. Pass criterion ids
//! (`c1`, `c12`, ...) as arguments to run a subset.
//!
//! The process exits non-zero on any failure outside `KNOWN_FAILURES`, and
//! on every failure when `ACCEPTANCE_STRICT` is set.

mod common;

use std::time::Instant;

use bcpnn::commands::{self, ExplainOptions, Primitive};
use bcpnn::config_xai::{differentiation, efficiency, fidelity, rho_sweep};
use bcpnn::data::Dataset;
use bcpnn::explain::certify::{optimal_perturbation, p14_certified_radius};
use bcpnn::explain::posterior::p12_surprise;
use bcpnn::explain::{attribute, feature_usage, p9_counterfactual, run_monitor, Direction, DriftSettings};
use bcpnn::learning::{train, update_traces, Mode, TrainOptions};
use bcpnn::oracle::{
    brute_contributions, brute_winners, counting_estimator, empirical_mi, exact_shapley, sampled_flip_check,
    GenerativeTable,
};
use bcpnn::par::{seeded_rng, Execution};
use bcpnn::recurrent::{settle, Clamp};
use bcpnn::snapshot;
use bcpnn::spiking::{temporal_saliency, train_spiking, SpikeRecord, SpikeTraceState, SpikeTrainOptions};
use bcpnn::stats::{auroc, mean, spearman};
use bcpnn::{Mask, Model, NetworkConfig, RecurrenceConfig, SpikingConfig};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Criteria the engine does not meet; see the README.
const KNOWN_FAILURES: &[&str] = &["c12"];

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn fit(config: NetworkConfig, data: &Dataset, opts: &TrainOptions) -> Model {
    let mut model = Model::new(config).unwrap();
    train(&mut model, data, opts).unwrap();
    model
}

fn supervised(epochs: usize, seed: u64) -> TrainOptions {
    TrainOptions {
        mode: Mode::Supervised,
        epochs,
        seed,
        ..TrainOptions::default()
    }
}

fn c1_additivity() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(1, 0);
    let (mut engine_gap, mut oracle_gap) = (0.0f64, 0.0f64);
    let mut pairs = 0;
    while pairs < 10_000 {
        let inputs = rng.random_range(1..=8);
        let cfg = common::random_config(&mut rng, inputs);
        let model = common::random_model(&mut rng, cfg);
        for _ in 0..10 {
            let x = common::random_query(&mut rng, &model);
            let state = model.forward(&x).unwrap();
            let lh = model.hidden_layout();
            let j = rng.random_range(0..lh.hypercolumns());
            let k = rng.random_range(0..lh.size(j));
            let attr = attribute(&model, &state, (j, k)).unwrap();
            engine_gap = engine_gap.max(attr.residual().abs());
            let phi: f64 = brute_contributions(&model, &x, j, k).iter().sum();
            oracle_gap = oracle_gap.max((attr.support - attr.bias - phi).abs());
            pairs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        engine_gap < 1e-12 && oracle_gap < 1e-12 && secs < 10.0,
        format!("{pairs} pairs, max |s-b-sum phi| engine {engine_gap:.2e}, vs oracle phi {oracle_gap:.2e}, {secs:.2} s"),
    )
}

fn c2_shapley() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(2, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let h = rng.random_range(1..=10);
        let cfg = common::random_config(&mut rng, h);
        let model = common::random_model(&mut rng, cfg);
        let x = common::random_query(&mut rng, &model);
        let lh = model.hidden_layout();
        let j = rng.random_range(0..lh.hypercolumns());
        let k = rng.random_range(0..lh.size(j));
        worst = worst.max(exact_shapley(&model, &x, (j, k)).unwrap().max_abs_discrepancy);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && secs < 60.0,
        format!("100 models with H <= 10, max |shapley - phi| {worst:.2e}, {secs:.2} s"),
    )
}

fn c3_counting() -> Outcome {
    let table = GenerativeTable::fruit(0.3);
    let data = table.sample(100_000, 3);
    let cfg = table.config().with_trace_time_constant(1e6);
    let opts = TrainOptions {
        epochs: 1,
        shuffle: false,
        ..supervised(1, 3)
    };
    let model = fit(cfg.clone(), &data, &opts);
    let labels = data.labels.as_ref().unwrap();
    let est = counting_estimator(&data.inputs, labels, cfg.input_layout().counts(), cfg.hidden_layout().counts()).unwrap();
    let (li, lh) = (model.input_layout(), model.hidden_layout());
    let mut gap = 0.0f64;
    for a in 0..li.units() {
        for b in 0..lh.units() {
            gap = gap.max((model.weights().raw(a, b) - est.weight(a, b)).abs());
        }
    }
    outcome(gap < 1e-2, format!("1e5 fruit samples, max |w_ema - w_count| {gap:.2e} nats"))
}

fn graded_model(seed: u64) -> (GenerativeTable, Dataset, Model) {
    let table = GenerativeTable::graded_default();
    let data = table.sample(20_000, seed);
    let model = fit(table.config(), &data, &supervised(1, seed));
    (table, data, model)
}

fn c4_usage_mi() -> Outcome {
    let (table, data, model) = graded_model(4);
    let usage = feature_usage(&model).unwrap();
    let labels: Vec<usize> = data.labels.as_ref().unwrap().iter().map(|l| l[0]).collect();
    let mi: Vec<f64> = (0..table.attributes.len())
        .map(|i| {
            let xs: Vec<usize> = data.inputs.iter().map(|r| r[i]).collect();
            empirical_mi(&xs, &labels, 4, 4).unwrap()
        })
        .collect();
    let rho = spearman(&usage, &mi);
    outcome(rho >= 0.9, format!("6 graded features, spearman(U, MI) = {rho:.3}"))
}

fn c5_swap() -> Outcome {
    let table = GenerativeTable::graded(&[0.8, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let mut mask = Mask::full(6, 1);
    for i in [0, 4, 5] {
        mask.set(i, 0, false);
    }
    let mut found = Vec::new();
    for seed in 0..5u64 {
        let data = table.sample(500, 50 + seed);
        let mut model = Model::new(table.config().with_mask(&mask)).unwrap();
        let out = train(&mut model, &data, &supervised(10, seed)).unwrap();
        let epoch = out
            .events
            .iter()
            .zip(&out.event_epochs)
            .find(|(e, _)| e.activated == 0)
            .map(|(_, &ep)| ep);
        found.push(epoch);
    }
    let hits = found.iter().filter(|e| e.is_some_and(|ep| ep < 10)).count();
    outcome(hits >= 4, format!("informative feature activated in {hits}/5 seeds, epochs {found:?}"))
}

fn c6_completion() -> Outcome {
    let (hcs, m) = (10, 10);
    let mut rng = seeded_rng(6, 0);
    let patterns: Vec<Vec<usize>> = (0..10).map(|_| (0..hcs).map(|_| rng.random_range(0..m)).collect()).collect();
    let cfg = NetworkConfig::new(&[2], &vec![m; hcs])
        .with_recurrence(RecurrenceConfig {
            tolerance: 1e-4,
            ..RecurrenceConfig::default()
        })
        .with_trace_time_constant(1e9);
    let mut model = Model::new(cfg).unwrap();
    let hidden = model.hidden_layout().clone();
    let input = model.input_layout().uniform_activity();
    for p in &patterns {
        update_traces(&mut model, &input, &hidden.one_hot(p).unwrap()).unwrap();
    }
    model.refresh().unwrap();
    let mut restored = 0;
    let mut steps = Vec::new();
    for p in &patterns {
        let mut cue = p.clone();
        let mut hcs_idx: Vec<usize> = (0..hcs).collect();
        hcs_idx.shuffle(&mut rng);
        for &h in &hcs_idx[..2] {
            cue[h] = (cue[h] + rng.random_range(1..m)) % m;
        }
        let run = settle(&model, None, &hidden.one_hot(&cue).unwrap(), None).unwrap();
        restored += (hidden.winners(run.final_state()) == *p) as usize;
        steps.push(run.settling_step as f64);
    }
    let t = mean(&steps);
    outcome(
        restored >= 9 && t <= 20.0,
        format!("{restored}/10 patterns restored, mean T* = {t:.2} at eps 1e-4"),
    )
}

fn c7_counterfactual() -> Outcome {
    let table = GenerativeTable::fruit(0.1);
    let data = table.sample(2000, 7);
    let cfg = table.config().with_recurrence(RecurrenceConfig::default());
    let model = fit(cfg, &data, &supervised(3, 7));
    let queries = table.sample(200, 70);
    let mut rng = seeded_rng(7, 1);
    let li = model.input_layout();
    let mut valid = 0;
    for q in &queries.inputs {
        let x = li.one_hot(q).unwrap();
        let winner = model.predict(&x).unwrap()[0];
        let target = (winner + rng.random_range(1..4)) % 4;
        let cf = p9_counterfactual(&model, &x, Clamp { hypercolumn: 0, minicolumn: target }).unwrap();
        valid += cf.valid as usize;
    }
    let frac = valid as f64 / 200.0;
    outcome(frac >= 0.9, format!("{valid}/200 counterfactuals reclassified to the target ({frac:.3})"))
}

fn c8_surprise() -> Outcome {
    let table = GenerativeTable::prototype(8, 4, 4, 0.2, 8);
    let model = fit(table.config(), &table.sample(5000, 8), &supervised(1, 8));
    let (li, lh) = (model.input_layout(), model.hidden_layout());
    let score = |states: &[usize]| {
        let post = model.forward(&li.one_hot(states).unwrap()).unwrap().posterior;
        p12_surprise(lh, &post).unwrap().total
    };
    let inside: Vec<f64> = table.sample(1000, 80).inputs.iter().map(|s| score(s)).collect();
    let mut rng = seeded_rng(8, 1);
    let noise: Vec<f64> = (0..1000)
        .map(|_| {
            let s: Vec<usize> = (0..8).map(|_| rng.random_range(0..4)).collect();
            score(&s)
        })
        .collect();
    let a = auroc(&noise, &inside);
    outcome(a >= 0.9, format!("surprise AUROC noise vs in-distribution = {a:.4}"))
}

fn c9_certificate() -> Outcome {
    let mut rng = seeded_rng(9, 0);
    let (mut instances, mut sampled_flips, mut tight) = (0, 0usize, 0);
    let mut skipped = 0;
    while instances < 100 {
        let inputs = rng.random_range(2..=6);
        let cfg = common::random_config(&mut rng, inputs);
        let model = common::random_model(&mut rng, cfg);
        let x = common::random_query(&mut rng, &model);
        let cert = p14_certified_radius(&model, &x, 0).unwrap();
        if !cert.radius.is_finite() || cert.radius <= 0.0 {
            skipped += 1;
            continue;
        }
        let check = sampled_flip_check(&model, &x, 0, cert.radius, 10_000, instances as u64).unwrap();
        sampled_flips += check.flips;
        let y = optimal_perturbation(&model, &x, &cert, 1e-6).unwrap();
        tight += (brute_winners(&model, &y)[0] != cert.winner) as usize;
        instances += 1;
    }
    outcome(
        sampled_flips == 0 && tight == 100,
        format!(
            "100 instances ({skipped} without a finite positive radius skipped): {sampled_flips} flips in 1e6 sampled perturbations, optimal direction flips {tight}/100"
        ),
    )
}

fn c10_cusum() -> Outcome {
    let table = GenerativeTable::fruit(0.2);
    let model = fit(table.config(), &table.sample(3000, 10), &supervised(1, 10));
    let li = model.input_layout().clone();
    let posts = |n: usize, seed: u64| -> Vec<Vec<f64>> {
        table
            .sample(n, seed)
            .inputs
            .iter()
            .map(|s| model.forward(&li.one_hot(s).unwrap()).unwrap().posterior)
            .collect()
    };
    let settings = DriftSettings::default();
    let quiet = run_monitor(posts(settings.baseline_window + 100_000, 100), &settings).unwrap();
    let false_alarms = quiet.alarms.len();

    let bound = (settings.h_sigmas / settings.k_sigmas).ceil() as u64 + 50;
    let (onset, unit) = (500u64, 0usize);
    let mut delays = Vec::new();
    for trial in 0..20u64 {
        let mut stream = posts(settings.baseline_window + 2000, 200 + trial);
        let window = &stream[..settings.baseline_window];
        let sigma = run_monitor(window.to_vec(), &settings).unwrap().sigma[unit];
        let shift = 2.0 * settings.k_sigmas * sigma;
        for s in stream.iter_mut().skip(settings.baseline_window + onset as usize) {
            s[unit] += shift;
        }
        let run = run_monitor(stream, &settings).unwrap();
        let delay = run
            .alarms
            .iter()
            .find(|a| a.unit == unit && a.direction == Direction::Up && a.step > onset)
            .map(|a| a.step - onset);
        delays.push(delay);
    }
    let detected = delays.iter().filter(|d| d.is_some_and(|d| d <= bound)).count();
    let worst = delays.iter().flatten().max().copied();
    outcome(
        detected == 20 && false_alarms <= 1,
        format!(
            "2k shift detected within {bound} steps in {detected}/20 runs (worst delay {worst:?}); {false_alarms} false alarms in 1e5 baseline steps"
        ),
    )
}

fn c11_spiking() -> Outcome {
    let start = Instant::now();
    let table = GenerativeTable {
        class_name: "y".into(),
        class_labels: vec!["y0".into(), "y1".into()],
        class_prior: vec![0.5, 0.5],
        attributes: vec!["x".into()],
        state_labels: vec![vec!["x0".into(), "x1".into()]],
        tables: vec![vec![vec![0.8, 0.2], vec![0.2, 0.8]]],
    };
    let spk = SpikingConfig {
        tau_z_pre_ms: 10.0,
        tau_z_post_ms: 10.0,
        ..SpikingConfig::default()
    };
    let cfg = table.config().with_trace_time_constant(1e9).with_spiking(spk);
    let data = table.sample(1000, 11);
    let opts = SpikeTrainOptions {
        presentation_steps: 1000,
        seed: 11,
        ..SpikeTrainOptions::default()
    };
    let spiked = train_spiking(&cfg, &data, &opts).unwrap();
    let steps = spiked.state.update_count();
    let spike_model = Model::from_traces(cfg.clone(), spiked.traces, None).unwrap();
    let rate_model = fit(cfg.clone(), &data, &TrainOptions { shuffle: false, ..supervised(1, 11) });
    let mut wgap = 0.0f64;
    for a in 0..2 {
        for b in 0..2 {
            wgap = wgap.max((spike_model.weights().raw(a, b) - rate_model.weights().raw(a, b)).abs());
        }
    }

    // saliency: query x = x0 with each hidden unit driven in turn
    let li = rate_model.input_layout();
    let x = li.one_hot(&[0]).unwrap();
    let state = rate_model.forward(&x).unwrap();
    let mut rel = 0.0f64;
    for b in 0..2 {
        let mut post = vec![0.0; 2];
        post[b] = 1.0;
        let mut st = SpikeTraceState::new(&cfg).unwrap();
        let mut rec = SpikeRecord::new(&st);
        let mut rng = seeded_rng(11, 2 + b as u64);
        for _ in 0..100_000 {
            let (sp, sq) = st.spike_step(&x, &post, &mut rng).unwrap();
            rec.push(&st, &sp, &sq);
        }
        let sal = temporal_saliency(&rec, rate_model.weights(), 1000).unwrap();
        let integrated = sal.per_step.iter().map(|r| r[b]).sum::<f64>() / sal.per_step.len() as f64;
        let phi = state.contribution(0, b);
        rel = rel.max(((integrated - phi) / phi).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        wgap < 0.05 && rel < 0.1 && secs < 300.0,
        format!(
            "{steps} steps at dt 1 ms: max |w_spike - w_rate| {wgap:.4} nats, integrated saliency within {:.2}% of phi, {secs:.1} s",
            100.0 * rel
        ),
    )
}

fn c12_over_capacity() -> Outcome {
    let table = GenerativeTable::prototype(8, 4, 4, 0.1, 12);
    let data = table.sample(4000, 12);
    let run = |sizes: &[usize]| -> Model {
        let mut cfg = NetworkConfig::new(&[4; 8], sizes);
        cfg.input = table.config().input;
        let mut model = Model::new(cfg).unwrap();
        let opts = TrainOptions {
            mode: Mode::Unsupervised,
            epochs: 5,
            seed: 12,
            ..TrainOptions::default()
        };
        let unlabelled = Dataset {
            inputs: data.inputs.clone(),
            labels: None,
        };
        train(&mut model, &unlabelled, &opts).unwrap();
        model
    };
    let matched = run(&[4, 4, 4]);
    let doubled = run(&[4, 4, 8]);
    let d_matched = differentiation(&matched, 2);
    let d_doubled = differentiation(&doubled, 2);
    let eff = efficiency(&doubled, 0.05);
    let ratio = d_doubled / d_matched;
    outcome(
        ratio < 0.1,
        format!(
            "Diff_j matched {d_matched:.4}, doubled {d_doubled:.4} (ratio {ratio:.3}); flagged after doubling {:?}",
            eff.flagged
        ),
    )
}

fn c13_fidelity() -> Outcome {
    let (_, _, model) = graded_model(13);
    let names: Vec<String> = model.config().input.iter().map(|h| h.name.clone()).collect();
    let generative = fidelity(&names, &model).unwrap();
    let matched = fidelity(&generative.usage_ranking, &model).unwrap();
    outcome(
        matched.cf == 1.0 && generative.cf >= 0.9,
        format!("CF matched = {:.3}, CF generative order = {:.3}", matched.cf, generative.cf),
    )
}

fn c14_risk_demo() -> Outcome {
    let model = commands::risk_demo_model().unwrap();
    let query = commands::parse_query(model.config(), commands::RISK_DEMO_QUERY).unwrap();
    let opts = ExplainOptions {
        primitives: vec![Primitive::P11],
        ..ExplainOptions::default()
    };
    let text = commands::cmd_explain(&model, &query, &opts).unwrap().render();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let values: Vec<f64> = v["sections"]["p11"][0]["bars"]
        .as_array()
        .map(|bars| bars.iter().filter_map(|b| b["value"].as_f64()).collect())
        .unwrap_or_default();
    outcome(
        values == [-2.0, 1.8, -0.3, 0.9, 0.4],
        format!("rendered bars {values:?}"),
    )
}

fn c15_determinism() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, a: Vec<u8>, b: Vec<u8>| {
        if a != b {
            failures.push(name.to_string());
        }
    };
    let table = GenerativeTable::fruit(0.2);
    let data = table.sample(600, 15);
    let cfg = table
        .config()
        .with_recurrence(RecurrenceConfig::default())
        .with_spiking(SpikingConfig::default());
    let opts = supervised(2, 15);
    let train_once = || commands::cmd_train(cfg.clone(), &data, &opts, "fruit").unwrap();
    let (t1, t2) = (train_once(), train_once());
    check("train report", t1.report.render().into(), t2.report.render().into());
    check("train log", t1.log_csv().into(), t2.log_csv().into());
    let (s1, s2) = (snapshot::encode(&t1.model).unwrap(), snapshot::encode(&t2.model).unwrap());
    let round = snapshot::encode(&snapshot::decode(&s1).unwrap()).unwrap();
    check("snapshot round trip", s1.clone(), round);
    check("snapshot", s1, s2);

    let explain_opts = ExplainOptions {
        reference: Some(table.sample(50, 16)),
        spike_steps: 200,
        flip_samples: 200,
        ..ExplainOptions::default()
    };
    let explain = || {
        commands::cmd_explain(&t1.model, &data.inputs[0], &explain_opts)
            .unwrap()
            .render()
    };
    check("explain", explain().into(), explain().into());
    let audit = || commands::cmd_audit(&t1.model, None, 0.05).unwrap().render();
    check("audit", audit().into(), audit().into());
    let stream = table.sample(1500, 17);
    let monitor = || {
        let m = commands::cmd_monitor(&t1.model, &stream, &DriftSettings::default()).unwrap();
        format!("{}{}", m.report.render(), m.events_csv)
    };
    check("monitor", monitor().into(), monitor().into());
    let ontology = || commands::cmd_ontology(&cfg, "fruit", "1970-01-01T00:00:00Z").unwrap();
    check("ontology", ontology().into(), ontology().into());
    let spike_opts = SpikeTrainOptions {
        presentation_steps: 50,
        record_steps: 500,
        ..SpikeTrainOptions::default()
    };
    let spike = || {
        let s = commands::cmd_spike(cfg.clone(), &data, &spike_opts).unwrap();
        let mut bytes = s.report.render().into_bytes();
        bytes.extend(s.raster);
        bytes
    };
    check("spike", spike(), spike());
    let sweep = |exec| {
        let plain = table.config();
        rho_sweep(&plain, &data, &[1.5, 2.0, f64::INFINITY], &[0, 1], &supervised(2, 0), exec)
            .unwrap()
            .to_csv()
    };
    check("sweep sequential vs parallel", sweep(Execution::Sequential).into(), sweep(Execution::Parallel).into());
    check("sweep rerun", sweep(Execution::Parallel).into(), sweep(Execution::Parallel).into());
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "train, explain, audit, sweep, monitor, ontology, spike and snapshot outputs identical across runs".into()
        } else {
            format!("differing outputs: {}", failures.join(", "))
        },
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("c1", "additive support decomposition", c1_additivity),
        ("c2", "shapley equals contributions", c2_shapley),
        ("c3", "trace weights match counting", c3_counting),
        ("c4", "usage tracks mutual information", c4_usage_mi),
        ("c5", "structural swap recovers feature", c5_swap),
        ("c6", "attractor pattern completion", c6_completion),
        ("c7", "counterfactual validity", c7_counterfactual),
        ("c8", "surprise separates noise", c8_surprise),
        ("c9", "certified radius sound and tight", c9_certificate),
        ("c10", "cusum detection and false alarms", c10_cusum),
        ("c11", "spiking agrees with rate model", c11_spiking),
        ("c12", "over-capacity differentiation", c12_over_capacity),
        ("c13", "configuration fidelity", c13_fidelity),
        ("c14", "risk demo support bars", c14_risk_demo),
        ("c15", "byte-identical reruns", c15_determinism),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    let (mut failed, mut unexpected) = (Vec::new(), 0);
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let known = KNOWN_FAILURES.contains(&id);
        if !o.pass {
            failed.push(id);
            unexpected += (strict || !known) as usize;
        }
        println!(
            "[{tag}] {} {name}: {} ({:.1} s){}",
            id.to_uppercase(),
            o.detail,
            start.elapsed().as_secs_f64(),
            if !o.pass && known { " [known failure]" } else { "" }
        );
    }
    println!("{} criteria failed: {failed:?}", failed.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
