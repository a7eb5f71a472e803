use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use logo_core::io::{read_labels, read_matrix, write_labels, write_matrix};
use logo_core::{Label, LabelVector, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn checksum(labels: &LabelVector) -> u64 {
    let mut h = DefaultHasher::new();
    for l in labels.iter() {
        l.class().map_or(u64::MAX, |c| c as u64).hash(&mut h);
    }
    h.finish()
}

#[test]
fn million_labels_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let labels: Vec<Label> = (0..1_000_000)
        .map(|_| if rng.random_bool(0.05) { Label::Ignore } else { Label::from(rng.random_range(0..13)) })
        .collect();
    let labels = LabelVector::new(labels, 13).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.lgl");
    write_labels(&path, &labels).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 12 + 4 * 1_000_000);
    let back = read_labels(&path).unwrap();
    assert_eq!(checksum(&back), checksum(&labels));
    assert_eq!(back, labels);
}

#[test]
fn matrix_file_roundtrip_at_f32_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let data: Vec<f64> = (0..300).map(|_| rng.random_range(-5.0..5.0) as f32 as f64).collect();
    let m = Matrix::new(100, 3, data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.lgf");
    write_matrix(&path, &m).unwrap();
    assert_eq!(read_matrix(&path).unwrap(), m);
}
