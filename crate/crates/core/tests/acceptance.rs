//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run everything with `cargo test --test acceptance`, or a subset with
//! `cargo test --test acceptance -- 2 5`.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use linkoracle::cli;
use linkoracle::corpus::{self, tokens, DatasetConfig, LabeledLink};
use linkoracle::icc::{AbstractFilter, AbstractIntent, TriLabel};
use linkoracle::interpret::explain_by_masking;
use linkoracle::linn::metrics::{f1_score, kruskal_gamma, roc_auc, score_distribution_stats};
use linkoracle::linn::{self, LinkInput, LinnModel, TrainConfig};
use linkoracle::matcher::{abstract_match, brute_force_match, qmatch};
use linkoracle::nn::gradcheck::check_gradients;
use linkoracle::pattern::{PatternString, Segment};
use linkoracle::tde::{Hyper, Instantiation, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 ------------------------------------------------------------------------

fn parameter_counts() -> Outcome {
    let cnn = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 0)
        .unwrap()
        .param_count();
    let rnn = LinnModel::new(Instantiation::StrRnn, Hyper::default(), 0)
        .unwrap()
        .param_count();
    ensure(cnn == 27_409 && rnn == 154_657, || {
        format!("str-cnn {cnn} (want 27409), str-rnn {rnn} (want 154657)")
    })?;
    Ok(format!("str-cnn {cnn}, str-rnn {rnn}"))
}

// 2 ------------------------------------------------------------------------

const AB: &[char] = &['a', 'b'];

fn random_pattern(rng: &mut ChaCha8Rng) -> PatternString {
    let wildcards = match rng.gen_range(0..10) {
        0..=4 => 0,
        5..=7 => 1,
        _ => 2,
    };
    let mut literals: Vec<String> = (0..=wildcards)
        .map(|_| {
            let len = rng.gen_range(0..=2);
            (0..len).map(|_| *AB.choose(rng).unwrap()).collect()
        })
        .collect();
    if wildcards == 0 && literals[0].is_empty() {
        literals[0].push('a');
    }
    let mut segments = Vec::new();
    for (k, lit) in literals.into_iter().enumerate() {
        if k > 0 {
            segments.push(Segment::Wildcard);
        }
        if !lit.is_empty() {
            segments.push(Segment::Literal(lit));
        }
    }
    PatternString::from_segments(segments).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, min: usize, max: usize) -> BTreeSet<PatternString> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| random_pattern(rng)).collect()
}

fn matcher_soundness() -> Outcome {
    const PAIRS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut checked, mut skipped) = (0, 0);
    let mut verdicts = [0usize; 3];
    while checked < PAIRS {
        let intent = AbstractIntent {
            action: rng.gen_bool(0.85).then(|| random_pattern(&mut rng)),
            categories: random_set(&mut rng, 0, 2),
        };
        let filter = AbstractFilter {
            actions: random_set(&mut rng, 1, 2),
            categories: random_set(&mut rng, 0, 2),
        };
        let abs = abstract_match(&intent, &filter).tri;
        let Ok(brute) = brute_force_match(&intent, &filter, AB, 3, 50_000) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        verdicts[abs as usize] += 1;
        if abs.is_must() && brute != abs {
            return Err(format!(
                "abstract {abs:?} but enumeration {brute:?} for {} / {}",
                intent.render(),
                filter.render()
            ));
        }
    }
    ensure(verdicts.iter().all(|&v| v > 100), || {
        format!("degenerate verdict mix {verdicts:?}")
    })?;
    Ok(format!(
        "{checked} pairs, no contradiction (verdicts 0/1/T {verdicts:?}; {skipped} over budget, redrawn)"
    ))
}

// 3 ------------------------------------------------------------------------

fn gradcheck_batch() -> Vec<(AbstractIntent, AbstractFilter, f64)> {
    vec![
        (
            AbstractIntent::parse(Some("a.(.*)view"), ["default"]).unwrap(),
            AbstractFilter::parse(["a.view", "send"], ["default", "tab"]).unwrap(),
            1.0,
        ),
        (
            AbstractIntent::parse(None, ["(.*)", "home"]).unwrap(),
            AbstractFilter::parse(["x(.*)"], []).unwrap(),
            0.0,
        ),
        (
            AbstractIntent::parse(Some("send"), []).unwrap(),
            AbstractFilter::parse(["se(.*)d", "pick"], ["d(.*)"]).unwrap(),
            1.0,
        ),
    ]
}

/// Widths used for the check. The recurrent and tree variants are scaled down
/// so that a central difference for every scalar fits in the time budget; the
/// code paths are the same at any width.
fn gradcheck_hyper(inst: Instantiation) -> Hyper {
    let mut h = Hyper::default();
    match inst {
        Instantiation::StrRnn => h.lstm_hidden = 32,
        Instantiation::TypedTree => h.kernel_counts = vec![4, 8, 8, 12],
        _ => {}
    }
    h
}

fn gradient_fidelity() -> Outcome {
    const STEP: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    let mut lines = Vec::new();
    for inst in Instantiation::ALL {
        // Relu and max-pool kinks make the loss non-differentiable on a measure
        // zero set; the seed places the batch at a point with no kink inside
        // the difference step.
        let model = LinnModel::new(inst, gradcheck_hyper(inst), 12).unwrap();
        let batch: Vec<(LinkInput, f64)> = gradcheck_batch()
            .iter()
            .map(|(i, f, y)| (model.input(i, f), *y))
            .collect();
        let (_, grads) = model.loss_and_gradients(&batch).unwrap();
        let report = check_gradients(model.store(), &grads, STEP, |s| {
            model.batch_loss_with(s, &batch).unwrap()
        });
        ensure(report.max_relative_error < TOL, || {
            format!("{inst}: {report:?}")
        })?;
        lines.push(format!(
            "{inst} {} params max rel {:.1e}",
            report.checked, report.max_relative_error
        ));
    }
    Ok(lines.join("; "))
}

// 4 ------------------------------------------------------------------------

const DESK_SEED: u64 = 1;

fn desk_learning() -> Outcome {
    let cfg = DatasetConfig::default();
    ensure(cfg.sample.train == 2000 && cfg.sample.test == 500, || {
        "default sample sizes changed".to_owned()
    })?;
    let data = corpus::dataset_from_config(&cfg, DESK_SEED).map_err(|e| e.to_string())?;
    let train_cfg = TrainConfig {
        seed: DESK_SEED,
        ..TrainConfig::default()
    };
    let mut results = Vec::new();
    for inst in [
        Instantiation::StrCnn,
        Instantiation::TypedSimple,
        Instantiation::TypedTree,
    ] {
        let mut model = LinnModel::new(inst, Hyper::default(), DESK_SEED).unwrap();
        linn::train(&mut model, &data.train, &train_cfg).map_err(|e| e.to_string())?;
        let m = linn::evaluate(&model, &data.test).map_err(|e| e.to_string())?;
        results.push((inst, m.f1, m.gamma));
    }
    let summary = results
        .iter()
        .map(|(i, f1, g)| format!("{i} F1 {f1:.3} gamma {g:.3}"))
        .collect::<Vec<_>>()
        .join("; ");
    let cnn_gamma = results[0].2;
    let mut failures = Vec::new();
    for (inst, f1, gamma) in &results[..2] {
        if *f1 < 0.85 {
            failures.push(format!("{inst} F1 < 0.85"));
        }
        if *gamma < 0.90 {
            failures.push(format!("{inst} gamma < 0.90"));
        }
    }
    if results[2].2 < cnn_gamma - 0.02 {
        failures.push("typed-tree gamma < str-cnn gamma - 0.02".to_owned());
    }
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary} [{}]", failures.join(", ")))
    }
}

// 5 ------------------------------------------------------------------------

fn metric_correctness() -> Outcome {
    let t = |v: &[u8]| v.iter().map(|&b| b == 1).collect::<Vec<bool>>();
    let checks: Vec<(&str, f64, f64)> = vec![
        (
            "f1 perfect",
            f1_score(&[0.9, 0.2], &t(&[1, 0]), 0.5).unwrap(),
            1.0,
        ),
        (
            "f1 2/3",
            f1_score(&[0.9, 0.8, 0.1], &t(&[1, 0, 0]), 0.5).unwrap(),
            2.0 / 3.0,
        ),
        (
            "auc separated",
            roc_auc(&[0.9, 0.4, 0.6, 0.1], &t(&[1, 0, 1, 0])).unwrap(),
            1.0,
        ),
        (
            "auc reversed",
            roc_auc(&[0.1, 0.9], &t(&[1, 0])).unwrap(),
            0.0,
        ),
        (
            "gamma 1",
            kruskal_gamma(&[0.9, 0.1, 0.8, 0.2], &t(&[1, 0, 1, 0])).unwrap(),
            1.0,
        ),
        (
            "gamma -1",
            kruskal_gamma(&[0.3, 0.7], &t(&[1, 0])).unwrap(),
            -1.0,
        ),
        (
            "gamma 1/2",
            kruskal_gamma(&[0.9, 0.8, 0.7, 0.1], &t(&[1, 0, 1, 0])).unwrap(),
            0.5,
        ),
    ];
    for (name, got, want) in &checks {
        ensure(got == want, || format!("{name}: {got} != {want}"))?;
    }
    let same = score_distribution_stats(&[0.3; 5], &t(&[1, 0, 1, 0, 0])).unwrap();
    ensure(same.entropy_bits == 0.0, || {
        format!("constant entropy {}", same.entropy_bits)
    })?;
    let centers: Vec<f64> = (0..32).map(|k| (k as f64 + 0.5) / 32.0).collect();
    let truths: Vec<bool> = (0..32).map(|k| k % 2 == 0).collect();
    let uniform = score_distribution_stats(&centers, &truths).unwrap();
    ensure(uniform.entropy_bits == 5.0, || {
        format!("uniform entropy {}", uniform.entropy_bits)
    })?;
    let high = score_distribution_stats(&[0.96, 0.99, 0.2], &t(&[1, 0, 0])).unwrap();
    ensure(
        high.p_high == 2.0 / 3.0 && high.p_true_given_high == 0.5,
        || format!("high-confidence stats {high:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..60);
        let mut scores: Vec<f64> = Vec::with_capacity(n);
        while scores.len() < n {
            let s: f64 = rng.gen();
            if !scores.contains(&s) {
                scores.push(s);
            }
        }
        let mut truths: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        truths[0] = true;
        truths[1] = false;
        let auc = roc_auc(&scores, &truths).unwrap();
        let gamma = kruskal_gamma(&scores, &truths).unwrap();
        worst = worst.max((gamma - (2.0 * auc - 1.0)).abs());
    }
    ensure(worst <= 1e-12, || {
        format!("|gamma - (2 auc - 1)| reached {worst:e}")
    })?;
    Ok(format!(
        "{} hand examples exact; gamma = 2 auc - 1 on 1000 sets (max dev {worst:.1e})",
        checks.len() + 3
    ))
}

// 6 ------------------------------------------------------------------------

fn pipeline_once(root: &std::path::Path) -> Result<(), String> {
    let data = root.join("data");
    let model = root.join("model");
    let report = root.join("eval");
    cli::cmd_dataset(&cli::DatasetArgs {
        seed: 42,
        train: Some(2000),
        test: Some(500),
        imp_full: None,
        imp_partial: None,
        config: None,
        settings: Vec::new(),
        out: data.clone(),
    })
    .map_err(|e| e.to_string())?;
    cli::cmd_train(&cli::TrainArgs {
        inst: Instantiation::StrCnn,
        data: data.clone(),
        epochs: 2,
        batch_size: 32,
        learning_rate: None,
        seed: 42,
        out: model.clone(),
    })
    .map_err(|e| e.to_string())?;
    cli::cmd_eval(&cli::EvalArgs {
        input: cli::ModelData {
            model,
            data,
            split: cli::Split::Test,
        },
        out: report,
    })
    .map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline_once(a.path())?;
    pipeline_once(b.path())?;
    let files = [
        "data/train.jsonl",
        "data/test.jsonl",
        "model/checkpoint.json",
        "eval/metrics.json",
    ];
    for f in files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{f} differs between runs"))?;
    }
    Ok(format!(
        "{} artifacts byte-identical across two runs",
        files.len()
    ))
}

// 7 ------------------------------------------------------------------------

fn random_link(rng: &mut ChaCha8Rng, omega: bool) -> (AbstractIntent, AbstractFilter) {
    const WORDS: &[&str] = &[
        "view",
        "send",
        "d(.*)t",
        "(.*)",
        "home",
        "tab",
        "a.b.c",
        "x(.*)y(.*)",
    ];
    let mut pick = |n: usize| -> Vec<&str> { WORDS.choose_multiple(rng, n).copied().collect() };
    let cats = pick(3);
    let acts = pick(3);
    let fcats = pick(2);
    let action = (!omega).then(|| WORDS[rng.gen_range(0..WORDS.len())]);
    (
        AbstractIntent::parse(action, cats).unwrap(),
        AbstractFilter::parse(acts, fcats).unwrap(),
    )
}

fn permute(v: &Value, rng: &mut ChaCha8Rng) -> Value {
    match v {
        Value::Set(items) => {
            let mut items: Vec<Value> = items.iter().map(|x| permute(x, rng)).collect();
            items.shuffle(rng);
            Value::Set(items)
        }
        Value::Pair(l, r) => Value::pair(permute(l, rng), permute(r, rng)),
        Value::Left(x) => Value::Left(Box::new(permute(x, rng))),
        Value::Right(x) => Value::Right(Box::new(permute(x, rng))),
        other => other.clone(),
    }
}

fn tde_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let expected_dim = |inst| match inst {
        Instantiation::StrRnn => 128,
        Instantiation::StrCnn | Instantiation::TypedTree => 120,
        Instantiation::TypedSimple => 64,
    };
    for inst in Instantiation::ALL {
        let model = LinnModel::new(inst, Hyper::default(), 3).unwrap();
        let (ie, fe) = (model.intent_encoder(), model.filter_encoder());
        let dim = expected_dim(inst);
        ensure(ie.out_dim() == dim && fe.out_dim() == dim, || {
            format!("{inst}: encoder widths {} / {}", ie.out_dim(), fe.out_dim())
        })?;
        ensure(model.classifier()[0].in_dim() == 2 * dim, || {
            format!(
                "{inst}: classifier input {}",
                model.classifier()[0].in_dim()
            )
        })?;
        for _ in 0..1000 {
            let omega = rng.gen_bool(0.2);
            let (i, f) = random_link(&mut rng, omega);
            let input = model.input(&i, &f);
            let (ei, _) = ie
                .forward(model.store(), &input.intent)
                .map_err(|e| e.to_string())?;
            let (ef, _) = fe
                .forward(model.store(), &input.filter)
                .map_err(|e| e.to_string())?;
            ensure(ei.len() == dim && ef.len() == dim, || {
                format!("{inst}: output width")
            })?;
            let (pi, pf) = if inst.is_flat() {
                // flat inputs are rendered from the sets in canonical order, so
                // permuting the construction order must not change them
                let mut cats: Vec<String> = i.categories.iter().map(|c| c.render()).collect();
                cats.shuffle(&mut rng);
                let action = i.action.as_ref().map(|a| a.render());
                let shuffled =
                    AbstractIntent::parse(action.as_deref(), cats.iter().map(String::as_str))
                        .unwrap();
                let mut acts: Vec<String> = f.actions.iter().map(|c| c.render()).collect();
                acts.shuffle(&mut rng);
                let fcats: Vec<String> = f.categories.iter().map(|c| c.render()).collect();
                let shuffled_f = AbstractFilter::parse(
                    acts.iter().map(String::as_str),
                    fcats.iter().map(String::as_str),
                )
                .unwrap();
                let again = model.input(&shuffled, &shuffled_f);
                (again.intent, again.filter)
            } else {
                (
                    permute(&input.intent, &mut rng),
                    permute(&input.filter, &mut rng),
                )
            };
            let (qi, _) = ie.forward(model.store(), &pi).map_err(|e| e.to_string())?;
            let (qf, _) = fe.forward(model.store(), &pf).map_err(|e| e.to_string())?;
            ensure(qi == ei && qf == ef, || {
                format!(
                    "{inst}: permutation changed the encoding of {} / {}",
                    i.render(),
                    f.render()
                )
            })?;
        }
        if let Some(unit) = ie.unit_vector() {
            let batch = |omega: bool, rng: &mut ChaCha8Rng| -> Vec<(LinkInput, f64)> {
                (0..8)
                    .map(|k| {
                        let (i, f) = random_link(rng, omega);
                        (model.input(&i, &f), (k % 2) as f64)
                    })
                    .collect()
            };
            let (_, g) = model.loss_and_gradients(&batch(false, &mut rng)).unwrap();
            ensure(g.get(unit).iter().all(|&x| x == 0.0), || {
                format!("{inst}: omega vector has gradient on non-omega inputs")
            })?;
            let (_, g) = model.loss_and_gradients(&batch(true, &mut rng)).unwrap();
            ensure(g.get(unit).iter().any(|&x| x != 0.0), || {
                format!("{inst}: omega vector gets no gradient on omega inputs")
            })?;
        } else {
            ensure(inst.is_flat(), || {
                format!("{inst}: typed intent encoder has no omega vector")
            })?;
        }
    }
    Ok("1000 permutation trials x 4 instantiations exact; omega gradient isolated; widths 128/120/64/120".to_owned())
}

// 8 ------------------------------------------------------------------------

fn qmatch_contract() -> Outcome {
    let mut cfg = DatasetConfig::default();
    cfg.sample.train = 500;
    cfg.sample.test = 500;
    let data = corpus::dataset_from_config(&cfg, 8).map_err(|e| e.to_string())?;
    let model = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 8).unwrap();
    let links: Vec<&LabeledLink> = data.train.iter().chain(&data.test).collect();
    let (mut must, mut may) = (0, 0);
    for l in &links {
        let q = qmatch(&l.intent, &l.filter, &model).map_err(|e| e.to_string())?;
        match abstract_match(&l.intent, &l.filter).tri {
            TriLabel::Zero => ensure(q == 0.0, || format!("must-0 link scored {q}"))?,
            TriLabel::One => ensure(q == 1.0, || format!("must-1 link scored {q}"))?,
            TriLabel::Top => {
                let p = model
                    .forward(&l.intent, &l.filter)
                    .map_err(|e| e.to_string())?;
                ensure(q.to_bits() == p.to_bits(), || {
                    format!("may link: qmatch {q} vs forward {p}")
                })?;
                may += 1;
                continue;
            }
        }
        must += 1;
    }
    ensure(links.len() == 1000 && must == 500 && may == 500, || {
        format!("expected 500 + 500 links, got {must} must and {may} may")
    })?;
    Ok(format!(
        "{must} must links exact 0/1, {may} may links equal forward"
    ))
}

// 9 ------------------------------------------------------------------------

const TOY_WORDS: &[&str] = &[
    "view", "send", "edit", "pick", "dial", "call", "main", "search", "insert", "delete", "sync",
    "answer",
];

fn toy_link(rng: &mut ChaCha8Rng, positive: bool) -> LabeledLink {
    let a = rng.gen_range(0..TOY_WORDS.len());
    let b = if positive {
        a
    } else {
        (a + rng.gen_range(1..TOY_WORDS.len())) % TOY_WORDS.len()
    };
    let action = |k: usize| format!("android.intent.action.{}", TOY_WORDS[k]);
    let intent = AbstractIntent::parse(Some(&action(a)), ["default"]).unwrap();
    let filter = AbstractFilter::parse([action(b).as_str()], ["default"]).unwrap();
    LabeledLink {
        intent,
        filter,
        observed: TriLabel::from(positive),
        truth: positive,
    }
}

fn interpretability() -> Outcome {
    const MASK: usize = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let train: Vec<LabeledLink> = (0..2000).map(|k| toy_link(&mut rng, k % 2 == 0)).collect();
    let test: Vec<LabeledLink> = (0..100).map(|_| toy_link(&mut rng, true)).collect();
    let mut model = LinnModel::new(Instantiation::StrCnn, Hyper::default(), 9).unwrap();
    let cfg = TrainConfig {
        seed: 9,
        ..TrainConfig::default()
    };
    linn::train(&mut model, &train, &cfg).map_err(|e| e.to_string())?;
    let mut inside = 0;
    for l in &test {
        let e =
            explain_by_masking(&model, &l.intent, &l.filter, MASK).map_err(|e| e.to_string())?;
        let action_len = tokens::pattern_tokens(l.intent.action.as_ref().unwrap()).len();
        let best = e.strongest().unwrap();
        let mid = best.position + MASK / 2;
        // the rendering starts with "a=", so the action occupies tokens 2..2+len
        if (2..2 + action_len).contains(&mid) {
            inside += 1;
        }
    }
    let rate = inside as f64 / test.len() as f64;
    ensure(rate >= 0.8, || {
        format!("max |delta| inside the action span for {inside}/100")
    })?;
    Ok(format!(
        "max |delta| inside the action span for {inside}/100 positive links"
    ))
}

// ---------------------------------------------------------------------------

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "parameter counts", parameter_counts),
        (2, "matcher soundness", matcher_soundness),
        (3, "gradient fidelity", gradient_fidelity),
        (4, "desk-scale learning", desk_learning),
        (5, "metric correctness", metric_correctness),
        (6, "determinism", determinism),
        (7, "TDE structure", tde_properties),
        (8, "qmatch contract", qmatch_contract),
        (9, "interpretability sanity", interpretability),
    ];
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
