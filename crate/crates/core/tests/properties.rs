use gencls::dataset_builder::{attention_mask, pack, PackMode, TrainingRecord};
use gencls::inference::{compute_ppl, parse_category, parse_tagged, ParseOptions};
use gencls::metrics::{evaluate, macro_f1, percent};
use gencls::prompt::{ParseMode, Strategy};
use gencls::rewards::{total_reward, RewardMode};
use gencls::types::{Dataset, Example, LabelSchema, MatchConfig, Prediction, Split};
use proptest::prelude::*;

const LABELS: [&str; 4] = ["joy", "fear", "anger", "love"];

fn schema() -> LabelSchema {
    LabelSchema::new(LABELS).with_uncertain_label("uncertain")
}

/// (gold index, prediction) where prediction is None for a format failure.
fn log() -> impl proptest::strategy::Strategy<Value = Vec<(usize, Option<usize>)>> {
    prop::collection::vec((0..4usize, prop::option::weighted(0.7, 0..4usize)), 1..150)
}

fn to_inputs(log: &[(usize, Option<usize>)]) -> (Dataset, Vec<Prediction>) {
    let ex = log
        .iter()
        .enumerate()
        .map(|(i, (g, _))| Example::new(format!("e{i}"), "t", LABELS[*g]))
        .collect();
    let preds = log
        .iter()
        .enumerate()
        .map(|(i, (_, p))| match p {
            Some(p) => Prediction::parsed(format!("e{i}"), "", LABELS[*p]),
            None => Prediction::format_failure(format!("e{i}"), ""),
        })
        .collect();
    (Dataset::new("p", Split::Test, ex), preds)
}

fn records(lengths: &[usize]) -> Vec<TrainingRecord> {
    lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| TrainingRecord {
            example_id: format!("r{i}"),
            strategy: Strategy::ZeroShot,
            prompt: String::new(),
            target: String::new(),
            token_length: Some(l),
        })
        .collect()
}

proptest! {
    #[test]
    fn overall_accuracy_factorises(log in log()) {
        let (test, preds) = to_inputs(&log);
        let r = evaluate(&preds, &test, &schema(), MatchConfig::default()).unwrap();
        prop_assert!((r.overall_acc - r.fmt_suc_ratio * r.fmt_suc_acc).abs() <= 1e-12);
        for v in [r.fmt_suc_ratio, r.fmt_suc_acc, r.fmt_suc_macro_f1, r.overall_acc, r.overall_macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(r.overall_acc <= r.fmt_suc_acc + 1e-12);
    }

    #[test]
    fn fixing_a_failure_never_lowers_accuracy(log in log(), pick in any::<prop::sample::Index>()) {
        let (test, preds) = to_inputs(&log);
        let before = evaluate(&preds, &test, &schema(), MatchConfig::default()).unwrap();
        let i = pick.index(log.len());
        let mut fixed = log.clone();
        fixed[i].1 = Some(fixed[i].0);
        let (test, preds) = to_inputs(&fixed);
        let after = evaluate(&preds, &test, &schema(), MatchConfig::default()).unwrap();
        prop_assert!(after.overall_acc >= before.overall_acc);
        prop_assert!(after.fmt_suc_ratio >= before.fmt_suc_ratio);
    }

    #[test]
    fn macro_f1_is_one_only_when_perfect(log in log()) {
        let gold: Vec<&str> = log.iter().map(|(g, _)| LABELS[*g]).collect();
        let pred: Vec<Option<&str>> = log.iter().map(|(_, p)| p.map(|p| LABELS[p])).collect();
        let present: Vec<String> = {
            let mut l: Vec<String> = gold.iter().map(|s| s.to_string()).collect();
            l.sort();
            l.dedup();
            l
        };
        let f = macro_f1(&gold, &pred, &present).unwrap();
        let perfect = gold.iter().zip(&pred).all(|(g, p)| *p == Some(*g));
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f == 1.0, perfect);
    }

    #[test]
    fn percent_has_two_decimals(x in 0.0f64..=1.0) {
        let s = percent(x);
        let (_, frac) = s.split_once('.').unwrap();
        prop_assert_eq!(frac.len(), 2);
        prop_assert!((s.parse::<f64>().unwrap() - x * 100.0).abs() <= 0.005 + 1e-9);
    }

    #[test]
    fn packing_conserves_records(lengths in prop::collection::vec(1..64usize, 0..60), extra in 0..64usize, neat in any::<bool>()) {
        let max_len = 64 + extra;
        let mode = if neat { PackMode::Neat } else { PackMode::Standard };
        let packs = pack(&records(&lengths), max_len, mode).unwrap();
        let ids: Vec<String> = packs.iter().flat_map(|p| p.segments.iter().map(|s| s.example_id.clone())).collect();
        let want: Vec<String> = (0..lengths.len()).map(|i| format!("r{i}")).collect();
        prop_assert_eq!(ids, want);
        prop_assert_eq!(packs.iter().map(|p| p.total_length).sum::<usize>(), lengths.iter().sum::<usize>());
        for w in packs.windows(2) {
            // Greedy: the next pack's first record would not have fit.
            prop_assert!(w[0].total_length + w[1].segments[0].length > max_len);
        }
    }

    #[test]
    fn neat_masks_never_cross_segments(lengths in prop::collection::vec(1..12usize, 1..8)) {
        let packs = pack(&records(&lengths), 40, PackMode::Neat).unwrap();
        for p in &packs {
            let mask = attention_mask(p);
            let seg_of = |pos: usize| p.segments.iter().position(|s| pos >= s.offset && pos < s.offset + s.length).unwrap();
            for (i, row) in mask.iter().enumerate() {
                for (j, &m) in row.iter().enumerate() {
                    prop_assert_eq!(m, j <= i && seg_of(i) == seg_of(j));
                }
            }
        }
    }

    #[test]
    fn rewards_are_bounded(response in ".{0,80}", gold in prop::sample::select(LABELS.to_vec()), reasoning in any::<bool>()) {
        let mode = if reasoning { RewardMode::Reasoning } else { RewardMode::Direct };
        let r = total_reward(&response, gold, mode, MatchConfig::default());
        prop_assert!(r.format_reward <= 1 && r.accuracy_reward <= 1);
        if reasoning {
            prop_assert_eq!(r.total, r.format_reward + r.accuracy_reward);
            prop_assert!(r.accuracy_reward <= r.format_reward);
        } else {
            prop_assert_eq!(r.format_reward, 1);
            prop_assert_eq!(r.total, r.accuracy_reward);
        }
    }

    #[test]
    fn parsers_never_panic(text in "(?s).{0,200}") {
        for mode in [ParseMode::CategoryText, ParseMode::CategoryNumeric, ParseMode::TaggedReasoning, ParseMode::Direct] {
            for allow_uncertain in [false, true] {
                let opts = ParseOptions { allow_uncertain, ..ParseOptions::default() };
                if let Some(p) = parse_category(&text, &schema(), mode, opts) {
                    prop_assert!(LABELS.contains(&p.label.as_str()) || (allow_uncertain && p.label == "uncertain"));
                }
            }
        }
        let _ = parse_tagged(&text);
    }

    #[test]
    fn ppl_is_at_least_one(lps in prop::collection::vec(-20.0f64..=0.0, 1..30)) {
        let p = compute_ppl(&lps).unwrap();
        prop_assert!(p >= 1.0);
        let mean = -lps.iter().sum::<f64>() / lps.len() as f64;
        prop_assert!((p.ln() - mean).abs() < 1e-9);
    }

    #[test]
    fn examples_round_trip_through_json(id in "[a-z0-9-]{1,12}", text in ".{0,60}", g in 0..4usize) {
        let e = Example::new(id, text, LABELS[g]);
        let back: Example = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn predictions_round_trip_through_json(raw in ".{0,60}", label in prop::option::of(0..4usize), conf in prop::option::of(-50.0f64..=0.0)) {
        let p = match label {
            Some(l) => Prediction::parsed("x", raw, LABELS[l]),
            None => Prediction::format_failure("x", raw),
        }
        .with_confidence(conf);
        let back: Prediction = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn strategy_names_round_trip(i in 0..Strategy::ALL.len()) {
        let s = Strategy::ALL[i];
        prop_assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        let json = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(serde_json::from_str::<Strategy>(&json).unwrap(), s);
    }
}
