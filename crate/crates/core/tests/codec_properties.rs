use mxplus::blockcodec::Variant;
use mxplus::{ElementFormat, Format};
use proptest::prelude::*;

fn block_sse(f: &Format, xs: &[f32]) -> f64 {
    let dec = f.decode_block(&f.encode_block(xs).unwrap()).unwrap();
    xs.iter().zip(&dec).map(|(&x, &q)| (f64::from(x) - q).powi(2)).sum()
}

/// Lowest index of the largest magnitude.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if x.abs() > xs[best].abs() {
            best = i;
        }
    }
    best
}

/// Values `m × 2^e` spanning a few octaves around a per-block gain, with an
/// optional ×64 outlier.
fn block(len: usize) -> impl Strategy<Value = Vec<f32>> {
    (prop::collection::vec(-8.0f32..8.0, len), -30i32..30, prop::option::of((0..len, prop::bool::ANY))).prop_map(
        |(mut v, e, spike)| {
            let g = 2f32.powi(e);
            for x in &mut v {
                *x *= g;
            }
            if let Some((i, neg)) = spike {
                v[i] = if neg { -64.0 } else { 64.0 } * g;
            }
            v
        },
    )
}

const ELEMENTS: [ElementFormat; 7] = ElementFormat::ALL;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn plus_dominates_plain(v in block(32)) {
        for e in ELEMENTS {
            let plain = block_sse(&Format::mx(e, Variant::Plain), &v);
            let plus = block_sse(&Format::mx(e, Variant::Plus), &v);
            prop_assert!(plus <= plain, "{}: {plus} > {plain}", e.name);
            if e.name.starts_with('e') {
                let pp = block_sse(&Format::mx(e, Variant::PlusPlus), &v);
                prop_assert!(pp <= plus, "{}: {pp} > {plus}", e.name);
            }
        }
    }

    #[test]
    fn nvfp4_plus_dominates_plain(v in block(16)) {
        prop_assert!(block_sse(&Format::nvfp4(true), &v) <= block_sse(&Format::nvfp4(false), &v));
    }

    #[test]
    fn bm_index_points_at_the_decoded_max(v in block(32)) {
        let wide: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
        for e in ELEMENTS {
            for variant in [Variant::Plus, Variant::PlusPlus] {
                let f = Format::mx(e, variant);
                if f.mx_config().unwrap().validate().is_err() {
                    continue;
                }
                let enc = f.encode_block(&v).unwrap();
                let dec = f.decode_block(&enc).unwrap();
                let bm = enc.bm_index().unwrap();
                let top = argmax(&wide);
                prop_assert!(bm <= top);
                prop_assert!(dec.iter().all(|d| d.abs() <= dec[bm].abs()));
                if bm < top {
                    prop_assert_eq!(dec[bm].abs(), dec[top].abs());
                }
            }
        }
    }

    #[test]
    fn attainable_formats_are_idempotent(v in block(32)) {
        let names = [
            "mxfp4", "mxfp4+", "mxfp6", "mxfp6+", "mxfp6-e3m2+", "mxfp8+", "mxfp8-e5m2+",
            "mxint8", "mxint8+", "mxint4", "mxint4+", "msfp12", "msfp16", "smx4", "smx9",
        ];
        for name in names {
            let f: Format = name.parse().unwrap();
            let xs = &v[..f.block_size()];
            let enc = f.encode_block(xs).unwrap();
            let back: Vec<f32> = f.decode_block(&enc).unwrap().iter().map(|&d| d as f32).collect();
            prop_assert_eq!(f.encode_block(&back).unwrap(), enc, "{}", name);
        }
    }

    #[test]
    fn decoded_values_fit_f32(v in block(32)) {
        for f in Format::all() {
            let xs = &v[..f.block_size()];
            for d in f.decode_block(&f.encode_block(xs).unwrap()).unwrap() {
                prop_assert_eq!(f64::from(d as f32), d);
            }
        }
    }
}

#[test]
fn mxfp4_plus_costs_one_byte_per_block() {
    for e in ELEMENTS {
        let plain = Format::mx(e, Variant::Plain).block_bytes();
        assert_eq!(Format::mx(e, Variant::Plus).block_bytes(), plain + 1, "{}", e.name);
    }
    assert_eq!(Format::mx(ElementFormat::E2M1, Variant::Plain).bits_per_element(), 4.25);
    assert_eq!(Format::mx(ElementFormat::E2M1, Variant::Plus).bits_per_element(), 4.5);
}
