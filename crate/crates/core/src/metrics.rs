//! Clustering-quality metrics against ground-truth labels. All of them are
//! invariant under relabeling of the cluster indices.

/// Fraction of points covered by each cluster's dominant true class.
pub fn purity(assignments: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(assignments.len(), truth.len());
    if assignments.is_empty() {
        return 0.0;
    }
    let k = assignments.iter().max().map_or(0, |&c| c + 1);
    let g = truth.iter().max().map_or(0, |&c| c + 1);
    let mut table = vec![vec![0usize; g]; k];
    for (&c, &t) in assignments.iter().zip(truth) {
        table[c][t] += 1;
    }
    let covered: usize = table.iter().map(|row| row.iter().max().copied().unwrap_or(0)).sum();
    covered as f64 / assignments.len() as f64
}

fn entropy(counts: &[usize], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization.
/// Two single-cluster partitions count as identical (NMI 1); otherwise a
/// degenerate partition scores 0.
pub fn nmi(assignments: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(assignments.len(), truth.len());
    let n = assignments.len() as f64;
    if assignments.is_empty() {
        return 0.0;
    }
    let k = assignments.iter().max().map_or(0, |&c| c + 1);
    let g = truth.iter().max().map_or(0, |&c| c + 1);
    let mut joint = vec![vec![0usize; g]; k];
    let mut row_counts = vec![0usize; k];
    let mut col_counts = vec![0usize; g];
    for (&c, &t) in assignments.iter().zip(truth) {
        joint[c][t] += 1;
        row_counts[c] += 1;
        col_counts[t] += 1;
    }
    let h_rows = entropy(&row_counts, n);
    let h_cols = entropy(&col_counts, n);
    if h_rows == 0.0 && h_cols == 0.0 {
        return 1.0;
    }
    if h_rows == 0.0 || h_cols == 0.0 {
        return 0.0;
    }
    let mut mutual = 0.0;
    for (c, row) in joint.iter().enumerate() {
        for (t, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let p = count as f64 / n;
            let pc = row_counts[c] as f64 / n;
            let pt = col_counts[t] as f64 / n;
            mutual += p * (p / (pc * pt)).log2();
        }
    }
    2.0 * mutual / (h_rows + h_cols)
}

/// Accuracy after matching clusters to classes one-to-one: exhaustive over
/// all assignments for up to 6 clusters, greedy above that.
pub fn matched_accuracy(assignments: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(assignments.len(), truth.len());
    if assignments.is_empty() {
        return 0.0;
    }
    let k = assignments.iter().max().map_or(0, |&c| c + 1);
    let g = truth.iter().max().map_or(0, |&c| c + 1);
    let mut table = vec![vec![0usize; g]; k];
    for (&c, &t) in assignments.iter().zip(truth) {
        table[c][t] += 1;
    }
    let best = if k <= 6 {
        let mut classes: Vec<Option<usize>> = vec![None; k];
        exhaustive_match(&table, 0, &mut classes, &mut vec![false; g])
    } else {
        greedy_match(&table)
    };
    best as f64 / assignments.len() as f64
}

fn exhaustive_match(
    table: &[Vec<usize>],
    cluster: usize,
    classes: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
) -> usize {
    if cluster == table.len() {
        return 0;
    }
    let g = used.len();
    // a cluster may also stay unmatched when there are fewer classes
    let mut best = exhaustive_match(table, cluster + 1, classes, used);
    for class in 0..g {
        if used[class] {
            continue;
        }
        used[class] = true;
        classes[cluster] = Some(class);
        let score = table[cluster][class] + exhaustive_match(table, cluster + 1, classes, used);
        best = best.max(score);
        classes[cluster] = None;
        used[class] = false;
    }
    best
}

fn greedy_match(table: &[Vec<usize>]) -> usize {
    let k = table.len();
    let g = table.first().map_or(0, |r| r.len());
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for (c, row) in table.iter().enumerate() {
        for (t, &count) in row.iter().enumerate() {
            cells.push((count, c, t));
        }
    }
    cells.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_cluster = vec![false; k];
    let mut used_class = vec![false; g];
    let mut total = 0;
    for (count, c, t) in cells {
        if !used_cluster[c] && !used_class[t] {
            used_cluster[c] = true;
            used_class[t] = true;
            total += count;
        }
    }
    total
}
