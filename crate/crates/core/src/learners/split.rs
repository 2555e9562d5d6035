use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, LearnError};

/// Per-class shuffled split. Each class contributes `round(n_c * fraction)`
/// rows to train; a class with a single row goes to train whole. Returned
/// indices are ascending.
pub fn stratified_split_indices(
    labels: &[u32],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), LearnError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(LearnError::TrainFraction(train_fraction));
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 && train_fraction < 1.0 {
            log::warn!(
                "class {class} has {} row(s); placing it entirely in train",
                members.len()
            );
            train.extend(members);
            continue;
        }
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len());
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), LearnError> {
    let (train, test) = stratified_split_indices(dataset.labels(), train_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_rows() -> Dataset {
        let rows = (0..10).map(|i| vec![i as f64]).collect();
        let labels = (0..10).map(|i| (i % 2) as u32).collect();
        Dataset::new(rows, labels).unwrap()
    }

    #[test]
    fn proportional_split() {
        let (train, test) = stratified_split(&ten_rows(), 0.6, 3).unwrap();
        assert_eq!(train.labels().iter().filter(|&&l| l == 0).count(), 3);
        assert_eq!(train.labels().iter().filter(|&&l| l == 1).count(), 3);
        assert_eq!(test.len(), 4);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let labels: Vec<u32> = (0..50).map(|i| (i % 3) as u32).collect();
        let a = stratified_split_indices(&labels, 0.6, 11).unwrap();
        let b = stratified_split_indices(&labels, 0.6, 11).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(a.1.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_ne!(a, stratified_split_indices(&labels, 0.6, 12).unwrap());
    }

    #[test]
    fn full_fraction_and_singletons() {
        let (train, test) = stratified_split(&ten_rows(), 1.0, 0).unwrap();
        assert_eq!(train.len(), 10);
        assert!(test.is_empty());

        let (train, test) = stratified_split_indices(&[0, 0, 0, 0, 7], 0.5, 0).unwrap();
        assert!(train.contains(&4));
        assert!(!test.contains(&4));

        assert!(stratified_split_indices(&[0, 1], 0.0, 0).is_err());
        assert!(stratified_split_indices(&[0, 1], 1.5, 0).is_err());
    }
}
