use proptest::prelude::*;

use evbench::est::{build_est, pool_features, KernelSpec, PoolGrid, PooledEvents};
use evbench::io::{decode_evs1, encode_evs1, read_csv, split_dataset, write_csv, DatasetManifest, Sample, Split, SplitRatios};
use evbench::metrics::{classification_report, pr_ap, roc_auc, ConfusionMatrix};
use evbench::noise::{apply_loss, apply_polarity, apply_shift, NoiseKind, NoiseSpec, OobPolicy, ShiftScope};
use evbench::trainer::softmax;
use evbench::{Event, EventStream, Polarity, SensorGeometry};

fn stream_strategy(max_events: usize) -> impl Strategy<Value = EventStream> {
    (
        1u16..64,
        1u16..48,
        prop::collection::vec((any::<u16>(), any::<u16>(), 0i64..100, any::<bool>()), 0..max_events),
    )
        .prop_map(|(w, h, raw)| {
            let g = SensorGeometry::new(w, h).unwrap();
            let mut t = 0;
            let events = raw
                .into_iter()
                .map(|(x, y, dt, p)| {
                    t += dt;
                    Event::new(x % w, y % h, t, if p { Polarity::Pos } else { Polarity::Neg })
                })
                .collect();
            EventStream::new(g, events, None).unwrap()
        })
}

fn shift_kind() -> impl Strategy<Value = NoiseKind> {
    prop_oneof![Just(NoiseKind::ShiftX), Just(NoiseKind::ShiftY), Just(NoiseKind::ShiftXy)]
}

proptest! {
    #[test]
    fn evs1_roundtrip(s in stream_strategy(200)) {
        let bytes = encode_evs1(&s);
        prop_assert_eq!(bytes.len(), 16 + 13 * s.len());
        prop_assert_eq!(decode_evs1(&bytes).unwrap(), s);
    }

    #[test]
    fn csv_roundtrip(s in stream_strategy(100)) {
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice(), s.geometry()).unwrap(), s);
    }

    #[test]
    fn loss_is_ordered_subsequence(s in stream_strategy(200), eta in 0.0f64..=1.0, seed in any::<u64>()) {
        let spec = NoiseSpec::new(NoiseKind::Loss, eta, seed);
        let out = apply_loss(&s, &spec);
        let mut it = s.events().iter();
        prop_assert!(out.events().iter().all(|e| it.any(|f| f == e)));
        prop_assert_eq!(apply_loss(&s, &spec), out);
    }

    #[test]
    fn polarity_keeps_everything_else(s in stream_strategy(200), rho in 0.0f64..=1.0, seed in any::<u64>()) {
        let out = apply_polarity(&s, &NoiseSpec::new(NoiseKind::Polarity, rho, seed));
        prop_assert_eq!(out.len(), s.len());
        for (a, b) in s.events().iter().zip(out.events()) {
            prop_assert_eq!((a.x, a.y, a.t), (b.x, b.y, b.t));
        }
        let full = NoiseSpec::new(NoiseKind::Polarity, 1.0, seed);
        prop_assert_eq!(apply_polarity(&apply_polarity(&s, &full), &full), s);
    }

    #[test]
    fn shift_drop_accounting(
        s in stream_strategy(200),
        kind in shift_kind(),
        level in 0.0f64..=0.5,
        seed in any::<u64>(),
        per_stream in any::<bool>(),
    ) {
        let mut spec = NoiseSpec::new(kind, level, seed);
        if per_stream {
            spec.shift_scope = ShiftScope::PerStream;
        }
        let r = apply_shift(&s, &spec);
        prop_assert_eq!(r.stream.len() + r.dropped_count, s.len());
        // Survivors keep timestamp/polarity order: they form a subsequence on (t, p).
        let mut it = s.events().iter();
        prop_assert!(r.stream.events().iter().all(|e| it.any(|f| (f.t, f.p) == (e.t, e.p))));
        prop_assert!(r.stream.validate().is_ok());
    }

    #[test]
    fn shift_clamp_bounds(s in stream_strategy(200), kind in shift_kind(), level in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut spec = NoiseSpec::new(kind, level, seed);
        spec.oob_policy = OobPolicy::Clamp;
        let r = apply_shift(&s, &spec);
        prop_assert_eq!(r.dropped_count, 0);
        prop_assert_eq!(r.stream.len(), s.len());
        let g = s.geometry();
        let (dx, dy) = spec.max_shift(g.width, g.height);
        for (a, b) in s.events().iter().zip(r.stream.events()) {
            prop_assert!((a.x as i64 - b.x as i64).abs() <= dx);
            prop_assert!((a.y as i64 - b.y as i64).abs() <= dy);
            prop_assert_eq!((a.t, a.p), (b.t, b.p));
        }
    }

    #[test]
    fn est_mass_and_direct_pooling(s in stream_strategy(200), bins in 1usize..12, rows in 1usize..4, cols in 1usize..4) {
        let t = build_est(&s, bins, &KernelSpec::Trilinear);
        prop_assert_eq!(t.total(), s.len() as f64);
        prop_assert!(t.values().iter().all(|&v| v >= 0.0));
        let g = s.geometry();
        if rows <= g.height as usize && cols <= g.width as usize {
            let grid = PoolGrid::new(rows, cols);
            prop_assert_eq!(
                PooledEvents::new(&s, bins, grid).features(&KernelSpec::Trilinear),
                pool_features(&t, grid)
            );
        }
    }

    #[test]
    fn weighted_recall_is_accuracy(counts in prop::collection::vec(0u64..50, 9)) {
        let cm: Vec<Vec<u64>> = counts.chunks(3).map(|r| r.to_vec()).collect();
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let r = classification_report(&ConfusionMatrix::from_counts(cm).unwrap()).unwrap();
        prop_assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn auc_and_ap_invariances(
        data in prop::collection::vec((0u32..40, any::<bool>()), 2..120),
        rot in any::<prop::sample::Index>(),
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
        let pos: Vec<bool> = data.iter().map(|d| d.1).collect();
        prop_assume!(pos.iter().any(|&p| p) && pos.iter().any(|&p| !p));
        let (roc, auc) = roc_auc(&scores, &pos).unwrap();
        prop_assert_eq!(roc.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(roc.points.last().copied(), Some((1.0, 1.0)));
        prop_assert!((0.0..=1.0).contains(&auc));
        let (pr, ap) = pr_ap(&scores, &pos).unwrap();
        prop_assert_eq!(pr.points.last().unwrap().0, 1.0);
        // Strictly monotone map, exact in f64 for these integers.
        let mapped: Vec<f64> = scores.iter().map(|s| 3.0 * s + 7.0).collect();
        prop_assert_eq!(pr_ap(&mapped, &pos).unwrap().1, ap);
        // Sample order does not matter.
        let k = rot.index(scores.len());
        let mut s2 = scores.clone();
        let mut p2 = pos.clone();
        s2.rotate_left(k);
        p2.rotate_left(k);
        prop_assert!((roc_auc(&s2, &p2).unwrap().1 - auc).abs() < 1e-12);
        prop_assert!((pr_ap(&s2, &p2).unwrap().1 - ap).abs() < 1e-12);
    }

    #[test]
    fn softmax_normalized(logits in prop::collection::vec(-50.0f64..50.0, 1..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn split_is_a_partition(sizes in prop::collection::vec(1usize..40, 1..4), seed in any::<u64>()) {
        let mut samples = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                samples.push(Sample {
                    id: format!("c{c}_{i}"),
                    path: format!("c{c}_{i}.evs1").into(),
                    label: c,
                    split: Split::Train,
                    fold: None,
                });
            }
        }
        let m = DatasetManifest {
            samples,
            classes: (0..sizes.len()).map(|c| format!("class{c}")).collect(),
            geometry: SensorGeometry::GEN1,
        };
        let out = split_dataset(&m, SplitRatios::default(), seed).unwrap();
        let (a, b, c) = out.split_counts();
        prop_assert_eq!(a + b + c, m.samples.len());
        prop_assert_eq!(out.samples.iter().map(|s| &s.id).collect::<Vec<_>>(), m.samples.iter().map(|s| &s.id).collect::<Vec<_>>());
        prop_assert_eq!(split_dataset(&m, SplitRatios::default(), seed).unwrap(), out);
    }
}
