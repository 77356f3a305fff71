use gazefuse::eval::*;
use gazefuse::model::{FusionModel, FusionModelConfig, ViewPair};
use gazefuse::pipeline::{EventAnnotation, Quality};
use gazefuse::rng::{self, Stream};
use gazefuse::{Error, Task, Tensor};
use proptest::prelude::*;
use rand::Rng;

/// Twice the Mann-Whitney U by comparing every positive/negative pair.
fn pairwise_u2(scores: &[f64], labels: &[bool]) -> (u64, u64) {
    let (mut u2, mut pairs) = (0, 0);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi && !yj {
                pairs += 1;
                u2 += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    (u2, pairs)
}

fn tied_instance(seed: u64, n: usize) -> (Vec<f64>, Vec<bool>) {
    let mut r = rng::stream(seed, Stream::Synthetic);
    let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    // Scores on a coarse grid so ties are common.
    let scores = (0..n).map(|_| r.random_range(0..8) as f64 / 8.0).collect();
    (scores, labels)
}

#[test]
fn auc_equals_pairwise_oracle_with_ties() {
    for seed in 0..20 {
        let (s, y) = tied_instance(seed, 50);
        let (u2, pairs) = pairwise_u2(&s, &y);
        assert_eq!(mann_whitney_u2(&s, &y).unwrap(), (u2, pairs), "seed {seed}");
        assert_eq!(roc_auc(&s, &y).unwrap(), u2 as f64 / (2 * pairs) as f64);
    }
}

proptest! {
    #[test]
    fn auc_matches_oracle_on_random_instances(
        raw in prop::collection::vec((0u8..10, any::<bool>()), 2..60),
    ) {
        let s: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 10.0).collect();
        let y: Vec<bool> = raw.iter().map(|r| r.1).collect();
        prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
        let (u2, pairs) = pairwise_u2(&s, &y);
        prop_assert_eq!(mann_whitney_u2(&s, &y).unwrap(), (u2, pairs));
    }

    #[test]
    fn auc_is_invariant_under_monotone_transforms(seed in any::<u64>()) {
        let (s, y) = tied_instance(seed, 40);
        let base = roc_auc(&s, &y).unwrap();
        for f in [|x: f64| 3.0 * x - 7.0, |x: f64| x.powi(3), f64::exp, |x: f64| 1.0 / (1.0 + (-20.0 * x).exp())] {
            let t: Vec<f64> = s.iter().map(|&x| f(x)).collect();
            prop_assert_eq!(roc_auc(&t, &y).unwrap(), base);
        }
    }

    #[test]
    fn complement_maps_auc_to_one_minus_auc(seed in any::<u64>()) {
        let (s, y) = tied_instance(seed, 40);
        let auc = roc_auc(&s, &y).unwrap();
        let sc: Vec<f64> = s.iter().map(|x| 1.0 - x).collect();
        let yc: Vec<bool> = y.iter().map(|b| !b).collect();
        prop_assert!((roc_auc(&sc, &y).unwrap() - (1.0 - auc)).abs() < 1e-12);
        prop_assert!((roc_auc(&s, &yc).unwrap() - (1.0 - auc)).abs() < 1e-12);
        // Flipping both is a relabeling of the same ranking.
        prop_assert!((roc_auc(&sc, &yc).unwrap() - auc).abs() < 1e-12);
    }

    #[test]
    fn stored_f1_is_the_harmonic_mean(seed in any::<u64>(), thr in 0.0f64..=1.0) {
        let (s, y) = tied_instance(seed, 30);
        let r = threshold_metrics(&s, &y, thr).unwrap();
        let h = if r.precision + r.recall == 0.0 { 0.0 } else { 2.0 * r.precision * r.recall / (r.precision + r.recall) };
        prop_assert!((r.f1 - h).abs() <= 1e-9);
        for v in [r.accuracy, r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(r.tp + r.fp + r.fn_ + r.tn, 30);
    }

    #[test]
    fn threshold_zero_recalls_everything(seed in any::<u64>()) {
        let (s, y) = tied_instance(seed, 25);
        prop_assert_eq!(threshold_metrics(&s, &y, 0.0).unwrap().recall, 1.0);
    }

    #[test]
    fn aggregation_ignores_run_order(seed in any::<u64>(), runs in 1usize..7) {
        let reports: Vec<MetricReport> = (0..runs as u64)
            .map(|k| {
                let (s, y) = tied_instance(seed.wrapping_add(k), 30);
                threshold_metrics(&s, &y, 0.5).unwrap().with_run(Task::MutualGaze, k)
            })
            .collect();
        let mut shuffled = reports.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng::stream(seed, Stream::Shuffle));
        let (a, b) = (aggregate_runs(&reports).unwrap(), aggregate_runs(&shuffled).unwrap());
        prop_assert_eq!(&a.metrics, &b.metrics);
        for m in &a.metrics {
            let vals: Vec<f64> = reports
                .iter()
                .map(|r| r.values().into_iter().find(|(n, _)| *n == m.metric).unwrap().1)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assert!((m.mean - mean).abs() < 1e-12);
            prop_assert_eq!(m.min, vals.iter().copied().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(m.max, vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            prop_assert!(m.min <= m.mean && m.mean <= m.max);
        }
    }
}

#[test]
fn single_report_has_zero_spread() {
    let (s, y) = tied_instance(3, 20);
    let agg = aggregate_runs(&[threshold_metrics(&s, &y, 0.5).unwrap()]).unwrap();
    for m in &agg.metrics {
        assert_eq!((m.minus(), m.plus()), (0.0, 0.0));
    }
    assert!(aggregate_runs(&[]).is_err());
}

fn record(t: f64, task: Task, p: f64, label: Option<bool>) -> PredictionRecord {
    PredictionRecord { session: "s03".into(), timestamp_s: t, task, probability: p, label }
}

#[test]
fn prediction_csv_round_trip() {
    let recs = vec![
        record(0.0, Task::MutualGaze, 0.1 + 0.2, Some(true)),
        record(1.0, Task::JointAttention, 1e-300, None),
        record(2.5, Task::MutualGaze, 1.0, Some(false)),
    ];
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    write_predictions(&p, &recs).unwrap();
    assert_eq!(read_predictions(&p).unwrap(), recs);
    let mut bad = recs[0].clone();
    bad.session = "a,b".into();
    assert!(write_predictions(&p, &[bad]).is_err());
}

#[test]
fn out_of_range_probability_cites_its_line() {
    let mut text = format!("{PREDICTION_HEADER}\n");
    for k in 0..5 {
        text.push_str(&format!("s,{k},MG,0.5,1\n"));
    }
    text.push_str("s,5,MG,1.3,0\n");
    match parse_predictions(&text, "llm.csv") {
        Err(Error::Row { line, path, .. }) => assert_eq!((line, path.as_str()), (7, "llm.csv")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn binary_external_predictions_score_by_hand() {
    // Six hand-labeled rows from a classifier that only answers yes/no.
    let text = "session,timestamp_s,task,probability,label\n\
                a,0,JA,1,1\n\
                a,1,JA,1,0\n\
                a,2,JA,0,1\n\
                a,3,JA,0,0\n\
                a,4,JA,1,1\n\
                a,5,JA,0,0\n";
    let recs = parse_predictions(text, "llm.csv").unwrap();
    let (s, y) = scored_pairs(&recs, Task::JointAttention);
    let r = threshold_metrics(&s, &y, 0.5).unwrap();
    assert_eq!((r.tp, r.fp, r.fn_, r.tn), (2, 1, 1, 2));
    assert!((r.accuracy - 4.0 / 6.0).abs() < 1e-12);
    assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
    assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
    // Binary scores: AUC = (TPR + TNR) / 2.
    assert!((r.roc_auc.unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(scored_pairs(&recs, Task::MutualGaze).0.is_empty());
}

fn ann(task: Task, s: f64, e: f64, q: Quality) -> EventAnnotation {
    EventAnnotation::new(task, s, e, q).unwrap()
}

#[test]
fn empty_timeline_is_valid() {
    let doc = export_timeline("s01", &[], &[], DEFAULT_WINDOW_S, 0.5).unwrap();
    assert!(doc.tracks.is_empty());
    let text = doc.to_text();
    assert_eq!(text, "gazefuse-timeline 1\nsession s01\nwindow_s 15\nthreshold 0.5\nduration_s 0\nend\n");
    assert_eq!(TimelineDocument::parse(&text).unwrap(), doc);
}

#[test]
fn timeline_counts_slots_and_passes_intervals_through() {
    let preds: Vec<PredictionRecord> = (0..=60).map(|k| record(k as f64, Task::JointAttention, (k % 10) as f64 / 10.0, None)).collect();
    let anns = vec![
        ann(Task::JointAttention, 3.25, 7.5, Quality::Confident),
        ann(Task::MutualGaze, 10.0, 12.0, Quality::Ambiguous),
        ann(Task::JointAttention, 40.0, 41.125, Quality::Confident),
    ];
    let doc = export_timeline("s03", &preds, &anns, 15.0, 0.5).unwrap();
    assert_eq!(doc.duration_s, 60.0);
    let ja = doc.tracks.iter().find(|t| t.task == Task::JointAttention).unwrap();
    assert_eq!(ja.slots.len(), 61);
    assert!(ja.slots.iter().all(Option::is_some));
    let mg = doc.tracks.iter().find(|t| t.task == Task::MutualGaze).unwrap();
    assert!(mg.slots.iter().all(Option::is_none));
    let mut got: Vec<EventAnnotation> = doc.tracks.iter().flat_map(|t| t.intervals.clone()).collect();
    let key = |a: &EventAnnotation| (a.event_type, a.start_s.to_bits());
    got.sort_by_key(key);
    let mut want = anns.clone();
    want.sort_by_key(key);
    assert_eq!(got, want);

    let parsed = TimelineDocument::parse(&doc.to_text()).unwrap();
    assert_eq!(parsed, doc);
}

#[test]
fn malformed_timelines_are_rejected() {
    let doc = export_timeline("s03", &[record(2.0, Task::MutualGaze, 0.7, None)], &[], 15.0, 0.5).unwrap();
    let text = doc.to_text();
    assert!(matches!(TimelineDocument::parse(&text.replace("timeline 1", "timeline 2")), Err(Error::Version { .. })));
    assert!(matches!(TimelineDocument::parse(&text.replace("2 0.7", "2 1.7")), Err(Error::Format { .. })));
    assert!(matches!(TimelineDocument::parse(&text.replace("end_task\n", "")), Err(Error::Format { .. })));
    assert!(matches!(TimelineDocument::parse(&text[..text.len() - 4]), Err(Error::Format { .. })));
    assert!(matches!(TimelineDocument::parse(&format!("{text}junk\n")), Err(Error::Format { .. })));
}

#[test]
fn svg_dims_bars_below_threshold() {
    let preds: Vec<PredictionRecord> = (0..20).map(|k| record(k as f64, Task::MutualGaze, k as f64 / 20.0, None)).collect();
    let doc = export_timeline("s03", &preds, &[ann(Task::MutualGaze, 1.0, 4.0, Quality::Confident)], 15.0, 0.5).unwrap();
    let svg = doc.render_svg();
    let bars: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="prob""#)).collect();
    assert_eq!(bars.len(), 20);
    let dim = bars.iter().filter(|l| l.contains(&format!(r#"fill-opacity="{BELOW_THRESHOLD_OPACITY}""#))).count();
    assert_eq!(dim, 10);
    assert!(bars.iter().all(|l| l.contains("#ff7f0e")));
    assert_eq!(svg.lines().filter(|l| l.contains(r#"class="truth""#)).count(), 1);
}

fn inputs(cfg: &FusionModelConfig, n: usize) -> Vec<ViewPair> {
    let mut r = rng::stream(0, Stream::Synthetic);
    let mut view = || {
        let data = (0..cfg.tokens_per_view * cfg.feature_dim_in).map(|_| r.random_range(-1.0f32..1.0)).collect();
        Tensor::new([cfg.tokens_per_view, cfg.feature_dim_in], data).unwrap()
    };
    (0..n).map(|_| ViewPair { infant: view(), parent: view() }).collect()
}

#[test]
fn bench_counts_what_it_processes() {
    let cfg = FusionModelConfig::tiny();
    let model = FusionModel::new(cfg.clone(), 0).unwrap();
    let r = bench_throughput(&model, &inputs(&cfg, 7), 4).unwrap();
    assert_eq!(r.samples, MIN_BENCH_SAMPLES);
    assert!((r.samples_per_second * r.elapsed_s - r.samples as f64).abs() < 1e-6 * r.samples as f64);
    assert!(r.latency_p50_ms <= r.latency_max_ms && r.latency_p95_ms <= r.latency_max_ms);
    assert_eq!(bench_throughput(&model, &inputs(&cfg, 250), 8).unwrap().samples, 250);
}

fn best_of(n: usize, mut f: impl FnMut() -> f64) -> f64 {
    (0..n).map(|_| f()).fold(0.0, f64::max)
}

#[test]
fn padded_config_is_slower_and_throughput_is_steady() {
    let tiny = FusionModelConfig::tiny();
    let padded = FusionModelConfig { embed_dim: 64, encoder_layers: 4, tokens_per_view: 16, head_layer_sizes: vec![64, 8, 1], ..tiny.clone() };
    let (mt, mp) = (FusionModel::new(tiny.clone(), 0).unwrap(), FusionModel::new(padded.clone(), 0).unwrap());
    let (xt, xp) = (inputs(&tiny, 100), inputs(&padded, 100));
    let fast = best_of(3, || bench_throughput(&mt, &xt, 8).unwrap().samples_per_second);
    let slow = best_of(3, || bench_throughput(&mp, &xp, 8).unwrap().samples_per_second);
    assert!(fast > slow, "tiny {fast:.1}/s vs padded {slow:.1}/s");

    // Interleave the two sizes so background load hits both alike.
    let xt2 = inputs(&tiny, 200);
    let (mut single, mut doubled) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        single = single.max(bench_throughput(&mt, &xt, 8).unwrap().samples_per_second);
        doubled = doubled.max(bench_throughput(&mt, &xt2, 8).unwrap().samples_per_second);
    }
    let ratio = doubled / single;
    assert!((0.8..=1.25).contains(&ratio), "steady-state ratio {ratio:.2}");
}
