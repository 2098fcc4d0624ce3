use proptest::prelude::*;
use tweetmtl::data::{compute_metrics, filter_dataset, kfold_split, synth_generate, Dataset, RejectReason, SynthConfig};
use tweetmtl::features::{feature_matrix, PosLexicon, SentimentLexicon};
use tweetmtl::record::{Label, TweetRecord};

fn labels_of(d: &Dataset) -> Vec<usize> {
    d.records.iter().map(|r| r.label.unwrap().index()).collect()
}

#[test]
fn generated_file_round_trips_byte_for_byte() {
    let d = synth_generate(
        &SynthConfig {
            blackmarket: 60,
            genuine: 70,
            ..SynthConfig::default()
        },
        11,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.jsonl");
    let second = dir.path().join("b.jsonl");
    d.save(&first).unwrap();
    let loaded = Dataset::load(&first).unwrap();
    assert_eq!(loaded.records, d.records);
    loaded.save(&second).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

// (text, lang, expected outcome): None means kept.
const FILTER_FIXTURE: &[(&str, Option<&str>, Option<RejectReason>)] = &[
    ("hello world", None, None),
    ("Check out my new video!", None, None),
    ("RT @friend: great game tonight", None, None),
    ("#win free stuff at bit.ly/x1", None, None),
    ("ok", None, None),
    ("k", None, Some(RejectReason::TooShort)),
    ("", None, Some(RejectReason::TooShort)),
    ("!", Some("en"), Some(RejectReason::TooShort)),
    ("😀", None, Some(RejectReason::TooShort)),
    ("😀😀😀", None, Some(RejectReason::NonAsciiText)),
    ("🔥🔥 💯", None, Some(RejectReason::NonAsciiText)),
    ("12345 678", None, Some(RejectReason::NonAsciiText)),
    ("!!! ??? ...", None, Some(RejectReason::NonAsciiText)),
    ("http://t.co/abc", None, None),
    ("bonjour tout le monde", Some("fr"), Some(RejectReason::Language)),
    ("hola amigos", Some("es"), Some(RejectReason::Language)),
    ("good morning", Some("en"), None),
    ("good morning", Some("EN"), None),
    ("good morning", Some("de"), Some(RejectReason::Language)),
    ("привет как дела", None, Some(RejectReason::NonAsciiText)),
    ("привет как дела", Some("en"), None),
    ("こんにちは世界", None, Some(RejectReason::NonAsciiText)),
    ("مرحبا بالعالم", None, Some(RejectReason::NonAsciiText)),
    ("नमस्ते दुनिया", None, Some(RejectReason::NonAsciiText)),
    ("नमस्ते दुनिया", Some("hi"), Some(RejectReason::Language)),
    ("Café au lait", None, None),
    ("naïve résumé", None, None),
    ("über straße grüße", None, None),
    ("ñññ ééé abc", None, Some(RejectReason::NonAsciiText)),
    ("Привет hello", None, Some(RejectReason::NonAsciiText)),
    ("hello hello Привет", None, None),
    ("I love this 😍😍😍", None, None),
    ("#blessed 🙏", None, None),
    ("@someone 👋", None, None),
    ("lol", None, None),
    ("Follow back pls", None, None),
    ("Buy now!!! limited offer", None, None),
    ("Breaking: markets fall", None, None),
    ("   ", None, Some(RejectReason::NonAsciiText)),
    ("a b", None, None),
    ("Ωμέγα", None, Some(RejectReason::NonAsciiText)),
    ("Ωμέγα alpha beta gamma", None, None),
    ("日本 japan", None, None),
    ("日本語 jp", None, Some(RejectReason::NonAsciiText)),
    ("vote today", Some("en"), None),
    ("vote today", Some("und"), Some(RejectReason::Language)),
    ("ℌ𝔢𝔩𝔩𝔬", None, Some(RejectReason::NonAsciiText)),
    ("2 for 1 deals", None, None),
    ("##", None, Some(RejectReason::NonAsciiText)),
    ("Dm me", None, None),
];

#[test]
fn hand_labeled_filter_fixture() {
    assert_eq!(FILTER_FIXTURE.len(), 50);
    let records: Vec<TweetRecord> = FILTER_FIXTURE
        .iter()
        .enumerate()
        .map(|(i, (text, lang, _))| {
            let mut r = TweetRecord::from_text(format!("r{i}"), *text);
            r.lang = lang.map(str::to_string);
            r
        })
        .collect();
    let (kept, log) = filter_dataset(&Dataset::new(records, "fixture"));
    for (i, (text, lang, expected)) in FILTER_FIXTURE.iter().enumerate() {
        let id = format!("r{i}");
        let got = log.iter().find(|r| r.id == id).map(|r| r.reason);
        assert_eq!(got, *expected, "{text:?} lang={lang:?}");
        assert_eq!(kept.records.iter().any(|r| r.id == id), expected.is_none());
    }
}

fn arb_record() -> impl Strategy<Value = TweetRecord> {
    let text = prop_oneof!["[a-z ]{0,20}", "[а-я ]{0,12}", "[a-zé😀 !#@]{0,16}", "\\PC{0,10}",];
    let lang = prop::option::of(prop_oneof![
        Just("en".to_string()),
        Just("fr".to_string()),
        Just("En".to_string())
    ]);
    (text, lang).prop_map(|(t, l)| {
        let mut r = TweetRecord::from_text("x", t);
        r.lang = l;
        r
    })
}

proptest! {
    #[test]
    fn filter_is_idempotent(records in prop::collection::vec(arb_record(), 0..30)) {
        let records: Vec<_> = records
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| { r.id = i.to_string(); r })
            .collect();
        let (once, log) = filter_dataset(&Dataset::new(records.clone(), "p"));
        prop_assert_eq!(once.len() + log.len(), records.len());
        let (twice, log2) = filter_dataset(&once);
        prop_assert!(log2.is_empty());
        prop_assert_eq!(twice.records, once.records);
    }

    #[test]
    fn metrics_stay_in_unit_interval(pairs in prop::collection::vec((0usize..2, 0usize..2), 1..200)) {
        let (preds, labels): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let m = compute_metrics(&preds, &labels).unwrap();
        let total: u64 = m.confusion.iter().flatten().sum();
        prop_assert_eq!(total as usize, preds.len());
        let mut values = vec![m.accuracy, m.macro_avg.precision, m.macro_avg.recall, m.macro_avg.f1];
        values.extend([m.weighted_avg.precision, m.weighted_avg.recall, m.weighted_avg.f1]);
        for c in &m.per_class {
            values.extend([c.precision, c.recall, c.f1]);
        }
        for v in values {
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
        }
        let correct = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
        prop_assert!((m.accuracy - correct as f64 / preds.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn kfold_keeps_class_ratio_on_default_sizes() {
    let labels: Vec<usize> = (0..3796).map(|i| usize::from(i < 1796)).collect();
    for seed in 0..3 {
        let split = kfold_split(&labels, 5, seed).unwrap();
        let mut seen = vec![false; labels.len()];
        for f in &split.folds {
            for &i in f {
                assert!(!seen[i]);
                seen[i] = true;
            }
            let bm = f.iter().filter(|&&i| labels[i] == 1).count() as f64;
            let expected = f.len() as f64 * 1796.0 / 3796.0;
            assert!(
                (bm - expected).abs() <= 1.0,
                "fold of {} holds {bm} blackmarket, expected {expected}",
                f.len()
            );
        }
        assert!(seen.iter().all(|&s| s));
    }
}

/// Best two-level threshold tree on columns `a` then `b`.
fn stump_accuracy(x: &[[f64; 2]], y: &[usize]) -> f64 {
    let cuts = |col: usize| {
        let mut v: Vec<f64> = x.iter().map(|r| r[col]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let majority = |idx: &[usize]| {
        let ones = idx.iter().filter(|&&i| y[i] == 1).count();
        ones.max(idx.len() - ones)
    };
    let leaf = |idx: &[usize]| {
        cuts(1)
            .into_iter()
            .map(|t| {
                let (lo, hi): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][1] <= t);
                majority(&lo) + majority(&hi)
            })
            .max()
            .unwrap_or(0)
            .max(majority(idx))
    };
    let all: Vec<usize> = (0..y.len()).collect();
    let best = cuts(0)
        .into_iter()
        .map(|t| {
            let (lo, hi): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[i][0] <= t);
            leaf(&lo) + leaf(&hi)
        })
        .max()
        .unwrap();
    best as f64 / y.len() as f64
}

#[test]
fn hashtag_and_url_counts_separate_easy_data() {
    let d = synth_generate(
        &SynthConfig {
            blackmarket: 300,
            genuine: 300,
            difficulty: 0.0,
            ..SynthConfig::default()
        },
        5,
    )
    .unwrap();
    let f = feature_matrix(&d.records, &SentimentLexicon::bundled(), &PosLexicon::bundled());
    let x: Vec<[f64; 2]> = (0..f.rows()).map(|i| [f.get(i, 1), f.get(i, 2)]).collect();
    let y = labels_of(&d);
    assert_eq!(y.iter().filter(|&&l| l == Label::Blackmarket.index()).count(), 300);
    let acc = stump_accuracy(&x, &y);
    assert!(acc >= 0.9, "stump accuracy {acc}");
}
