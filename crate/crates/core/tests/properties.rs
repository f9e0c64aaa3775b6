use graspset::codec::{dequantize, parse_stream, quantize, tokenize_with_scale_bin, BinVector, DediscretizeMode, TokenVocabulary};
use graspset::contact::{ContactSummary, FingerPart};
use graspset::geometry::{sample_surface, DistanceQueryIndex, Point, TriangleMesh, Vector};
use graspset::metrics::chamfer_distance;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn surface_samples_follow_face_areas() {
    // Stretched box: face areas differ by a factor of up to 4.
    let mesh = TriangleMesh::cuboid(Point::origin(), Vector::new(0.1, 0.05, 0.025));
    let n = 50_000;
    let samples = sample_surface(&mesh, n, 99).unwrap();
    let total: f64 = (0..mesh.face_count()).map(|f| mesh.face_area(f)).sum();
    let mut counts = vec![0usize; mesh.face_count()];
    for &f in &samples.source_face {
        counts[f] += 1;
    }
    let stat: f64 = counts
        .iter()
        .enumerate()
        .map(|(f, &c)| {
            let expected = n as f64 * mesh.face_area(f) / total;
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    let dist = ChiSquared::new((mesh.face_count() - 1) as f64).unwrap();
    let p = 1.0 - dist.cdf(stat);
    assert!(p > 0.001, "chi-squared {stat}, p = {p}");
}

#[test]
fn surface_samples_lie_on_surface() {
    let mesh = TriangleMesh::icosphere(Point::origin(), 0.05, 2);
    let index = DistanceQueryIndex::build(mesh.clone());
    let samples = sample_surface(&mesh, 2_000, 5).unwrap();
    for (p, &f) in samples.points.iter().zip(&samples.source_face) {
        let (d, _) = index.nearest(p);
        assert!(d < 1e-12, "{d}");
        let tri = mesh.triangle(f);
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        assert!(n.dot(&(p - tri[0])).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn center_reconstruction_within_half_bin(lo in -5.0f64..5.0, span in 1e-3f64..10.0, u in 0.0f64..1.0, n in 2u32..600) {
        let hi = lo + span;
        let w = span / n as f64;
        let p = lo + u * span;
        let (b, clamped) = quantize(p, lo, hi, w, n);
        prop_assert!(!clamped);
        prop_assert!(b < n);
        prop_assert!((dequantize(b, lo, w, DediscretizeMode::Center) - p).abs() <= 0.5 * w);
        prop_assert!((dequantize(b, lo, w, DediscretizeMode::Edge) - p).abs() <= w);
    }

    #[test]
    fn out_of_range_values_clamp(lo in -5.0f64..5.0, span in 1e-3f64..10.0, over in 1e-6f64..100.0, n in 2u32..600) {
        let hi = lo + span;
        let w = span / n as f64;
        prop_assert_eq!(quantize(hi + over, lo, hi, w, n), (n - 1, true));
        prop_assert_eq!(quantize(lo - over, lo, hi, w, n), (0, true));
    }

    #[test]
    fn token_text_round_trips(bins in prop::collection::vec(0u32..256, 1..30), scale in 0u32..256, hand in 0usize..3) {
        let names = ["allegro", "panda", "shadow"];
        let vocab = TokenVocabulary::new(names, 256);
        let bv = BinVector { hand: names[hand].to_string(), n_bins: 256, bins: bins.clone() };
        let text = tokenize_with_scale_bin(&bv, scale, &vocab).unwrap().to_string();
        let parsed = parse_stream(&format!("{text} trailing words"), &vocab).unwrap();
        prop_assert_eq!(parsed.hand, names[hand]);
        prop_assert_eq!(parsed.scale_bin, scale);
        prop_assert_eq!(parsed.bins, bins);
        prop_assert_eq!(parsed.commentary, "trailing words");
    }

    #[test]
    fn chamfer_is_symmetric_and_zero_on_self(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..40),
    ) {
        let a: Vec<Point> = a.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect();
        let b: Vec<Point> = b.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect();
        prop_assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        let ab = chamfer_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - chamfer_distance(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn summary_ignores_input_order(pairs in prop::collection::btree_map(
        prop::sample::select(vec!["thumb", "index", "middle", "ring", "little", "palm"]),
        prop::sample::select(vec!["rim", "body", "handle"]),
        1..6,
    ), rotate in 0usize..6) {
        let mut list: Vec<FingerPart> = pairs.iter().map(|(f, p)| FingerPart { finger: f.to_string(), part: p.to_string() }).collect();
        let a = ContactSummary::from_finger_parts("cup", list.clone()).unwrap();
        let k = rotate % list.len();
        list.rotate_left(k);
        list.reverse();
        let b = ContactSummary::from_finger_parts("cup", list).unwrap();
        prop_assert_eq!(&a.text, &b.text);
        prop_assert!(a.text.ends_with('.'));
        prop_assert!(a.text.contains("cup"));
    }
}
