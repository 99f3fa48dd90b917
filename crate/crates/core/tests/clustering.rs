//! DBSCAN against brute-force references.

mod common;

use brnn::detector::dbscan;

#[test]
fn matches_references_on_random_sets() {
    common::dbscan_oracle(100).unwrap();
}

#[test]
fn references_agree_on_hand_cases() {
    let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [10.0, 0.0], [10.0, 1.5]];
    assert_eq!(common::eps_components(&pts, 1.0), vec![vec![0, 1, 2], vec![3], vec![4]]);
    assert_eq!(common::reference_dbscan(&pts, 1.5, 2), vec![vec![0, 1, 2], vec![3, 4]]);
    // point 1 is a border point of both cores; the first cluster claims it
    let shared = [[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [3.0, 1.0], [-1.0, 0.0], [3.0, 0.0]];
    let want = common::reference_dbscan(&shared, 1.5, 3);
    assert_eq!(dbscan(&shared, 1.5, 3), want);
}

#[test]
fn noise_is_dropped() {
    let pts = [[0.0, 0.0], [50.0, 50.0], [0.5, 0.0]];
    assert_eq!(dbscan(&pts, 1.0, 2), vec![vec![0, 2]]);
}
