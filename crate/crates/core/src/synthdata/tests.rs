use super::*;
use std::collections::HashMap;
use std::io::Write;

fn manual(dataset: Dataset, ambient: usize, b: DMatrix<f64>, m: usize) -> GenSpec {
    GenSpec {
        noise_ratio: 0.0,
        b_mode: BMode::Manual(b.clone()),
        ..GenSpec::new(dataset, ambient, b.nrows(), m, 3)
    }
}

fn first_axis(ambient: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(1, ambient);
    b[(0, 0)] = 1.0;
    b
}

#[test]
fn ds1_link_example() {
    assert!((ds1_link(&[0.25]) - 1.0).abs() <= 1e-15);
    let gen = generate(&manual(Dataset::Ds1, 3, first_axis(3), 50)).unwrap();
    let x = gen.data.x();
    for i in 0..50 {
        let expected = (2.0 * std::f64::consts::PI * x[(i, 0)]).sin();
        assert!((gen.data.y()[i] - expected).abs() <= 1e-15);
        assert_eq!(gen.data.y()[i], gen.data.z().unwrap()[i]);
    }
}

#[test]
fn ds2_link_example() {
    // With d* = 1 every wrapped index refers back to the single coordinate.
    let w = 2.0f64;
    let independent = (0.5 * w - 1.0).sin() + 0.5 * w * (0.4 * w - 1.0 + 1.0).cos();
    assert!((ds2_link(&[w]) - independent).abs() <= 1e-15);
    assert!((ds2_link(&[w]) - 0.8f64.cos()).abs() <= 1e-15);
    assert!((ds2_link(&[w]) - 0.69671).abs() <= 1e-5);
}

#[test]
fn ds2_link_wraps_indices() {
    let w = [0.3, -1.2, 2.5];
    let mut oracle = 0.0;
    for j in 1..=3usize {
        let at = |k: usize| w[(k - 1) % 3];
        let jf = j as f64;
        oracle += (0.5 * at(j) - jf).sin() + 0.5 * at(j + 1) * (0.4 * at(j + 2) - jf + 1.0).cos();
    }
    assert!((ds2_link(&w) - oracle).abs() <= 1e-14);
}

#[test]
fn inputs_stay_in_their_boxes() {
    let g1 = generate(&GenSpec::new(Dataset::Ds1, 4, 2, 500, 1)).unwrap();
    assert!(g1.data.x().iter().all(|v| (-1.0..=1.0).contains(v)));
    let g2 = generate(&GenSpec::new(Dataset::Ds2, 4, 2, 500, 1)).unwrap();
    assert!(g2.data.x().iter().all(|v| (-10.0..=10.0).contains(v)));
    assert!(g2.data.x().amax() > 5.0);
}

#[test]
fn generation_is_deterministic() {
    for dataset in [Dataset::Ds1, Dataset::Ds2] {
        let spec = GenSpec::new(dataset, 6, 2, 200, 42);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.b_true, b.b_true);
        let other = generate(&GenSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.data.x(), other.data.x());
    }
}

#[test]
fn true_map_is_feasible_and_deterministic() {
    let scalar = sample_true_b(1, 1, 5).unwrap();
    assert!((0.0..=1.0).contains(&scalar[(0, 0)]));
    for seed in 0..20 {
        let b = sample_true_b(3, 10, seed).unwrap();
        assert!(spectral_norm(&b).unwrap() <= 1.0 + 1e-12);
        assert!(b.iter().all(|&v| v >= 0.0));
        assert_eq!(b, sample_true_b(3, 10, seed).unwrap());
    }
}

#[test]
fn noise_ratio_matches_law_of_large_numbers() {
    for dataset in [Dataset::Ds1, Dataset::Ds2] {
        let gen = generate(&GenSpec::new(dataset, 5, 2, 100_000, 7)).unwrap();
        let z = gen.data.z().unwrap();
        let eps = gen.data.y() - z;
        let ratio = population_variance(&eps) / population_variance(z);
        assert!((0.008..=0.012).contains(&ratio), "{dataset:?}: {ratio}");
    }
}

#[test]
fn zero_variance_targets_are_degenerate() {
    let spec = GenSpec {
        noise_ratio: 0.01,
        b_mode: BMode::Manual(DMatrix::zeros(1, 3)),
        ..GenSpec::new(Dataset::Ds1, 3, 1, 20, 0)
    };
    assert!(matches!(generate(&spec), Err(Error::DegenerateData(_))));
}

#[test]
fn targets_depend_on_inputs_only_through_the_map() {
    let gen = generate(&GenSpec::new(Dataset::Ds1, 6, 2, 100, 11)).unwrap();
    let x = gen.data.x();
    let b = &gen.b_true;
    // The last right singular vector of the 2×6 map spans part of its null space.
    let svd = nalgebra::SVD::new(b.transpose() * b, true, false);
    let null_dir = svd.u.unwrap().column(5).into_owned();
    assert!((b * &null_dir).norm() <= 1e-12);
    let shifted = DMatrix::from_fn(100, 6, |i, j| x[(i, j)] + 0.3 * null_dir[j]);
    let z0 = noiseless_targets(x, b, ds1_link);
    let z1 = noiseless_targets(&shifted, b, ds1_link);
    assert!((z0 - z1).amax() <= 1e-12);
}

#[test]
fn split_sizes_and_partition() {
    let gen = generate(&GenSpec::new(Dataset::Ds1, 2, 1, 8, 0)).unwrap();
    let (train, val, test) = split(&gen.data, (0.5, 0.25, 0.25), 1).unwrap();
    assert_eq!((train.len(), val.len(), test.len()), (4, 2, 2));

    let gen = generate(&GenSpec::new(Dataset::Ds1, 2, 1, 101, 0)).unwrap();
    let (train, val, test) = split(&gen.data, (0.6, 0.2, 0.2), 1).unwrap();
    assert_eq!((train.len(), val.len(), test.len()), (61, 20, 20));
    let key = |s: &SampleSet, i: usize| s.y()[i].to_bits();
    let mut counts: HashMap<u64, i32> = HashMap::new();
    for i in 0..gen.data.len() {
        *counts.entry(key(&gen.data, i)).or_default() += 1;
    }
    for part in [&train, &val, &test] {
        for i in 0..part.len() {
            *counts.entry(key(part, i)).or_default() -= 1;
        }
    }
    assert!(counts.values().all(|&c| c == 0));
    let again = split(&gen.data, (0.6, 0.2, 0.2), 1).unwrap();
    assert_eq!(again.0, train);
}

#[test]
fn split_rejects_empty_parts() {
    let gen = generate(&GenSpec::new(Dataset::Ds1, 2, 1, 4, 0)).unwrap();
    assert!(split(&gen.data, (0.9, 0.05, 0.05), 0).is_err());
    assert!(split(&gen.data, (0.5, 0.5, 0.5), 0).is_err());
}

#[test]
fn csv_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let gen = generate(&GenSpec::new(Dataset::Ds2, 3, 2, 40, 5)).unwrap();
    write_csv(&gen.data, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back, gen.data);
    let no_z = SampleSet::new(gen.data.x().clone(), gen.data.y().clone(), None).unwrap();
    write_csv(&no_z, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), no_z);
}

#[test]
fn csv_hand_written_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hand.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "x_1,x_2,y\n0.1,0.2,1\n0.3,0.4,2\n-1,1e-3,3").unwrap();
    drop(f);
    let data = read_csv(&path).unwrap();
    assert_eq!((data.len(), data.dim()), (3, 2));
    assert_eq!(data.y()[2], 3.0);

    std::fs::write(&path, "x_1,x_2\n0.1,0.2\n").unwrap();
    assert!(matches!(read_csv(&path), Err(Error::Parse { .. })));

    std::fs::write(&path, "x_1,y\n0.1,0.2\n0.3,abc\n").unwrap();
    match read_csv(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}
