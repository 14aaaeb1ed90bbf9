//! Minimum-cost one-to-one assignment (Hungarian algorithm) and the gated
//! IoU matching built on it.

use super::camera::{iou, BBox};

/// Optimal column for each row of a square cost matrix, minimizing total
/// cost. Potentials + shortest augmenting path, O(n^3).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut col_row = vec![0_usize; n + 1]; // row assigned to each column, 1-based; 0 = free
    let mut way = vec![0_usize; n + 1];
    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0_usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_col = vec![0_usize; n];
    for j in 1..=n {
        row_col[col_row[j] - 1] = j - 1;
    }
    row_col
}

/// Gated assignment between projected cluster boxes and detections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// (cluster index, detection index, iou) pairs that passed the gate.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_clusters: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Match cluster boxes to detection boxes by minimizing total `1 - IoU` over
/// a square matrix padded with gate-cost dummies; pairs under the IoU gate
/// come back unmatched.
pub fn match_detections(
    cluster_boxes: &[BBox],
    detection_boxes: &[BBox],
    iou_gate: f64,
) -> MatchResult {
    debug_assert!(iou_gate > 0.0 && iou_gate < 1.0);
    let n = cluster_boxes.len();
    let m = detection_boxes.len();
    let size = n.max(m);
    if size == 0 {
        return MatchResult::default();
    }
    let pad = 1.0 - iou_gate;
    let mut cost = vec![vec![pad; size]; size];
    for (i, cb) in cluster_boxes.iter().enumerate() {
        for (j, db) in detection_boxes.iter().enumerate() {
            cost[i][j] = 1.0 - iou(cb, db);
        }
    }
    let assignment = hungarian(&cost);
    let mut result = MatchResult::default();
    let mut det_matched = vec![false; m];
    for (i, &j) in assignment.iter().enumerate().take(n) {
        if j < m {
            let overlap = iou(&cluster_boxes[i], &detection_boxes[j]);
            if overlap >= iou_gate {
                result.pairs.push((i, j, overlap));
                det_matched[j] = true;
                continue;
            }
        }
        result.unmatched_clusters.push(i);
    }
    for (j, matched) in det_matched.iter().enumerate() {
        if !matched {
            result.unmatched_detections.push(j);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn total_cost(cost: &[Vec<f64>], assignment: &[usize]) -> f64 {
        assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
    }

    fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let mut cols: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut cols, 0, &mut |perm| {
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            if c < best {
                best = c;
            }
        });
        best
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn matches_permutation_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..500 {
            let n = rng.gen_range(1..=6);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let assignment = hungarian(&cost);
            // valid permutation
            let mut seen = vec![false; n];
            for &j in &assignment {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let got = total_cost(&cost, &assignment);
            let want = brute_force_min(&cost);
            assert!((got - want).abs() < 1e-9, "trial {trial}: got {got} want {want}");
        }
    }

    fn unit_box(x: f64, y: f64) -> BBox {
        BBox::new(x, y, x + 10.0, y + 10.0)
    }

    #[test]
    fn single_pair_above_gate_matches() {
        let c = [unit_box(0.0, 0.0)];
        let d = [unit_box(1.0, 0.0)];
        let r = match_detections(&c, &d, 0.3);
        assert_eq!(r.pairs.len(), 1);
        assert_eq!((r.pairs[0].0, r.pairs[0].1), (0, 0));
        assert!(r.unmatched_clusters.is_empty());
        assert!(r.unmatched_detections.is_empty());
    }

    #[test]
    fn below_gate_everything_unmatched() {
        let c = [unit_box(0.0, 0.0), unit_box(30.0, 0.0)];
        let d = [unit_box(60.0, 0.0)];
        let r = match_detections(&c, &d, 0.3);
        assert!(r.pairs.is_empty());
        assert_eq!(r.unmatched_clusters, vec![0, 1]);
        assert_eq!(r.unmatched_detections, vec![0]);
    }

    #[test]
    fn rectangular_case_assigns_best_overlaps() {
        // three clusters, two detections; the two closest pairs should match
        let c = [unit_box(0.0, 0.0), unit_box(20.0, 0.0), unit_box(40.0, 0.0)];
        let d = [unit_box(21.0, 0.0), unit_box(1.0, 0.0)];
        let r = match_detections(&c, &d, 0.2);
        assert_eq!(r.pairs.len(), 2);
        let pairs: Vec<(usize, usize)> = r.pairs.iter().map(|p| (p.0, p.1)).collect();
        assert!(pairs.contains(&(0, 1)));
        assert!(pairs.contains(&(1, 0)));
        assert_eq!(r.unmatched_clusters, vec![2]);
    }
}
