use std::collections::BTreeMap;
use std::fs;

use proptest::prelude::*;
use serde_json::Value;

use vsense::ingest::{
    load_dir, load_file_with_sidecar, screen_strain_channels, segment_file, split_files, write_file,
    Channel, FileRole, Labels, Location, SplitItem, TimeSeriesFile, Underground,
};
use vsense::Error;

fn ride(id: &str, n: usize, labeled: bool) -> TimeSeriesFile {
    let wave = |k: f64| (0..n).map(|i| (i as f64 * k).sin() * 3.25 + k).collect::<Vec<f64>>();
    let labels = labeled.then(|| Labels {
        rider_id: "r2".into(),
        underground: Underground::Cobble,
        speed_kmh: 15.0,
    });
    TimeSeriesFile::new(
        id,
        1200.0,
        vec![Channel::new("ax", wave(0.1)), Channel::new("ay", wave(0.37))],
        vec![
            Channel::new("S1", wave(0.05).iter().map(|v| v * 100.0).collect()),
            Channel::new("S2", vec![1.5; n]),
        ],
        labels,
    )
    .unwrap()
}

/// Column table parsed line by line with no CSV library.
fn parse_table(text: &str) -> BTreeMap<String, Vec<f64>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut cols: BTreeMap<String, Vec<f64>> =
        header.iter().map(|h| (h.to_string(), Vec::new())).collect();
    for line in lines {
        for (h, cell) in header.iter().zip(line.split(',')) {
            cols.get_mut(*h).unwrap().push(cell.trim().parse().unwrap());
        }
    }
    cols
}

#[test]
fn written_files_parse_back_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let f = ride("ride_a", 300, true)
        .with_role(FileRole::Maneuver, Some(Location::Train));
    let path = write_file(&f, dir.path()).unwrap();

    let cols = parse_table(&fs::read_to_string(&path).unwrap());
    for ch in f.channels() {
        assert_eq!(cols[&ch.name], ch.samples, "channel {}", ch.name);
    }
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ride_a.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["sample_rate_hz"], 1200.0);
    assert_eq!(meta["channels"]["ax"], "acc");
    assert_eq!(meta["channels"]["S2"], "strain");
    assert_eq!(meta["labels"]["underground"], "cobble");
    assert_eq!(meta["labels"]["speed_kmh"], 15.0);
    assert_eq!(meta["role"], "maneuver");
    assert_eq!(meta["location"], "train");

    assert_eq!(load_file_with_sidecar(&path).unwrap(), f);
}

#[test]
fn hand_written_files_load() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("x.csv"), "a1,s1\n0.5,10\n-1e-3,20\n2,30\n").unwrap();
    fs::write(
        dir.path().join("x.meta.json"),
        r#"{"sample_rate_hz": 100, "channels": {"a1": "acc", "s1": "strain"}}"#,
    )
    .unwrap();
    let files = load_dir(dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    let f = &files[0];
    assert_eq!(f.file_id, "x");
    assert_eq!(f.acc_channels[0].samples, vec![0.5, -1e-3, 2.0]);
    assert_eq!(f.strain_channels[0].samples, vec![10.0, 20.0, 30.0]);
    assert_eq!(f.labels, None);
    assert_eq!(f.role, FileRole::Usage);
}

#[test]
fn corrupt_files_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let meta = r#"{"sample_rate_hz": 100, "channels": {"a1": "acc", "s1": "strain"}}"#;
    fs::write(dir.path().join("good.csv"), "a1,s1\n1,2\n3,4\n").unwrap();
    fs::write(dir.path().join("good.meta.json"), meta).unwrap();
    fs::write(dir.path().join("broken.csv"), "a1,s1\n1,2\nNaN,4\n").unwrap();
    fs::write(dir.path().join("broken.meta.json"), meta).unwrap();
    let err = load_dir(dir.path()).unwrap_err();
    assert!(err.to_string().contains("broken"), "{err}");
}

#[test]
fn missing_sidecar_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("lonely.csv"), "a1\n1\n").unwrap();
    let err = load_dir(dir.path()).unwrap_err();
    assert!(!err.is_config_error());
    assert!(err.to_string().contains("lonely"), "{err}");
}

#[test]
fn ragged_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("r.csv"), "a1,s1\n1,2\n3\n").unwrap();
    fs::write(
        dir.path().join("r.meta.json"),
        r#"{"sample_rate_hz": 100, "channels": {"a1": "acc", "s1": "strain"}}"#,
    )
    .unwrap();
    assert!(load_dir(dir.path()).is_err());
}

#[test]
fn too_short_segment_length_is_rejected() {
    assert!(matches!(
        segment_file(&ride("a", 10, false), 1),
        Err(Error::InvalidConfig(_))
    ));
}

proptest! {
    #[test]
    fn segments_reproduce_the_prefix(n in 0usize..400, l_seq in 2usize..64) {
        let f = ride("p", n.max(1), false);
        let segs = segment_file(&f, l_seq).unwrap();
        prop_assert_eq!(segs.len(), f.len() / l_seq);
        for (c, ch) in f.acc_channels.iter().enumerate() {
            let joined: Vec<f64> = segs.iter().flat_map(|s| s.acc_data[c].clone()).collect();
            prop_assert_eq!(&joined[..], &ch.samples[..segs.len() * l_seq]);
        }
        for (i, s) in segs.iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert_eq!(s.len(), l_seq);
        }
    }

    #[test]
    fn split_sides_partition_the_files(
        sizes in prop::collection::vec((1usize..30, 0usize..3), 2..25),
        fraction in 0.05f64..0.95,
        stratify: bool,
        seed: u64,
    ) {
        let items: Vec<SplitItem> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(n, r))| SplitItem {
                file_id: format!("f{i:03}"),
                rider: Some(format!("r{r}")),
                n_segments: n,
            })
            .collect();
        let plan = split_files(&items, fraction, stratify, seed).unwrap();
        prop_assert!(plan.train_file_ids.is_disjoint(&plan.test_file_ids));
        prop_assert_eq!(plan.train_file_ids.len() + plan.test_file_ids.len(), items.len());
        for it in &items {
            prop_assert!(plan.is_train(&it.file_id) != plan.is_test(&it.file_id));
        }
        prop_assert!(!plan.train_file_ids.is_empty());
        prop_assert!(!plan.test_file_ids.is_empty());
        prop_assert_eq!(plan.clone(), split_files(&items, fraction, stratify, seed).unwrap());
    }

    #[test]
    fn screening_is_monotone(lo in 0.0f64..400.0, step in 0.0f64..400.0) {
        let f = ride("s", 500, false);
        let loose = screen_strain_channels(&f, lo);
        let strict = screen_strain_channels(&f, lo + step);
        prop_assert!(strict.iter().all(|c| loose.contains(c)));
    }
}
