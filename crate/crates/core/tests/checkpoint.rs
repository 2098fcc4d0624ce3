use proptest::prelude::*;
use tweetmtl::checkpoint::{Checkpoint, ConfigBlock, FORMAT_VERSION};
use tweetmtl::{Error, Matrix};

type Parsed = (u32, String, Vec<(String, usize, usize, Vec<f64>)>);

/// Decodes the container by hand, independent of the library reader.
fn parse(bytes: &[u8]) -> Parsed {
    let mut at = 0;
    let mut take = |n: usize| {
        let s = &bytes[at..at + n];
        at += n;
        s
    };
    assert_eq!(take(4), b"MTLB");
    let u32_at = |s: &[u8]| u32::from_le_bytes([s[0], s[1], s[2], s[3]]);
    let version = u32_at(take(4));
    let config_len = u32_at(take(4)) as usize;
    let config = String::from_utf8(take(config_len).to_vec()).unwrap();
    let n = u32_at(take(4));
    let mut tensors = Vec::new();
    for _ in 0..n {
        let name_len = u32_at(take(4)) as usize;
        let name = String::from_utf8(take(name_len).to_vec()).unwrap();
        let rows = u32_at(take(4)) as usize;
        let cols = u32_at(take(4)) as usize;
        let data = take(rows * cols * 8)
            .chunks(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        tensors.push((name, rows, cols, data));
    }
    assert_eq!(at, bytes.len());
    (version, config, tensors)
}

fn sample() -> Checkpoint {
    let mut config = ConfigBlock::new("model");
    config.set("zeta", "last");
    config.set_json("alpha", &vec![1, 2, 3]);
    let mut c = Checkpoint::new(config);
    c.push("w", Matrix::from_rows(&[[1.5, -2.0, 0.0], [f64::MIN_POSITIVE, 1e300, -0.0]]));
    c.push("b", Matrix::column(&[0.25]));
    c
}

#[test]
fn layout_matches_documented_format() {
    let bytes = sample().to_bytes();
    let (version, config, tensors) = parse(&bytes);
    assert_eq!(version, FORMAT_VERSION);
    assert_eq!(config, r#"{"alpha":[1,2,3],"kind":"model","zeta":"last"}"#);
    assert_eq!(tensors.len(), 2);
    assert_eq!((tensors[0].0.as_str(), tensors[0].1, tensors[0].2), ("w", 2, 3));
    assert_eq!(tensors[0].3[4], 1e300);
    assert!(tensors[0].3[5].is_sign_negative());
    assert_eq!(tensors[1], ("b".to_string(), 1, 1, vec![0.25]));
}

#[test]
fn round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    sample().save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), sample());
}

#[test]
fn every_truncation_is_rejected() {
    let bytes = sample().to_bytes();
    for n in 0..bytes.len() {
        let err = Checkpoint::from_bytes(&bytes[..n]).unwrap_err();
        assert!(matches!(err, Error::Truncated(_) | Error::Format(_)), "prefix {n}: {err}");
    }
}

#[test]
fn wrong_version_and_trailing_bytes() {
    let mut bytes = sample().to_bytes();
    bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(
        Checkpoint::from_bytes(&bytes),
        Err(Error::Version { found: 2, supported: 1 })
    ));
    let mut bytes = sample().to_bytes();
    bytes.push(0);
    assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
    let mut bytes = sample().to_bytes();
    bytes[0] = b'X';
    assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
}

proptest! {
    #[test]
    fn arbitrary_tensors_survive(
        shapes in prop::collection::vec((1usize..5, 1usize..5), 0..4),
        seed in any::<u64>(),
    ) {
        let mut c = Checkpoint::new(ConfigBlock::new("encoder"));
        let mut state = seed;
        for (k, (r, cl)) in shapes.iter().enumerate() {
            let data = (0..r * cl)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    f64::from_bits(state >> 2)
                })
                .collect();
            c.push(format!("t{k}"), Matrix::new(*r, *cl, data).unwrap());
        }
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
