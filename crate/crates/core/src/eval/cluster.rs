use crate::error::{Error, Result};

/// One agglomeration step. Clusters `0..n` are the inputs; the cluster
/// created by merge `i` gets id `n + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

fn check_matrix(d: &[Vec<f64>]) -> Result<()> {
    let n = d.len();
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            return Err(Error::shape("distance matrix", format!("row {i} has {} entries, expected {n}", row.len())));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 || v != d[j][i] {
                return Err(Error::Invalid(format!("distance matrix entry ({i},{j}) must be finite, ≥ 0 and symmetric")));
            }
        }
    }
    Ok(())
}

/// Average-linkage agglomerative clustering.
///
/// Inter-cluster distance sums are updated incrementally; the mean is
/// `sum / (|A|·|B|)`. Ties go to the pair with the smallest (lower id,
/// higher id).
pub fn average_linkage(d: &[Vec<f64>]) -> Result<Vec<Merge>> {
    check_matrix(d)?;
    let n = d.len();
    // Active cluster slots: id, size; `sums` indexed by slot.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut sums: Vec<Vec<f64>> = d.to_vec();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while ids.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let avg = sums[i][j] / (sizes[i] * sizes[j]) as f64;
                let key = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                let better = match best {
                    None => true,
                    Some((bd, _, _, lo, hi)) => avg < bd || (avg == bd && key < (lo, hi)),
                };
                if better {
                    best = Some((avg, i, j, key.0, key.1));
                }
            }
        }
        let (dist, i, j, lo, hi) = best.expect("at least two clusters");
        let new_id = n + merges.len();
        merges.push(Merge {
            a: lo,
            b: hi,
            distance: dist,
            size: sizes[i] + sizes[j],
        });
        // Slot i becomes the union; slot j is removed.
        for k in 0..ids.len() {
            if k != i && k != j {
                let s = sums[i][k] + sums[j][k];
                sums[i][k] = s;
                sums[k][i] = s;
            }
        }
        sizes[i] += sizes[j];
        ids[i] = new_id;
        ids.remove(j);
        sizes.remove(j);
        sums.remove(j);
        for row in &mut sums {
            row.remove(j);
        }
    }
    Ok(merges)
}

/// Flat clusters after applying the first `m` merges, as sorted member
/// lists ordered by their smallest member.
pub fn clusters_after(n: usize, merges: &[Merge], m: usize) -> Vec<Vec<usize>> {
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    for mg in &merges[..m] {
        let mut a = members[mg.a].take().expect("merged once");
        let b = members[mg.b].take().expect("merged once");
        a.extend(b);
        a.sort_unstable();
        members.push(Some(a));
    }
    let mut out: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    out.sort_by_key(|c| c[0]);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Vec<usize>,
    pub test_normal: Vec<usize>,
    pub test_difficult: Vec<usize>,
}

/// Similarity-based split into training, normal-test and difficult-test
/// models.
///
/// The dendrogram is cut at the fewest clusters whose largest cluster has at
/// most twice the target test size (`round(fraction·n)`), and small enough
/// to leave the difficult set plus one training model; the test cluster
/// is the one closest in size to the target. The difficult set is the
/// `k_difficult` remaining models with the largest mean distance to the test
/// cluster. Ties go to the lowest model id.
pub fn split_dataset(d: &[Vec<f64>], fraction: f64, k_difficult: usize) -> Result<SplitResult> {
    let n = d.len();
    if n < 10 {
        return Err(Error::Invalid(format!("split needs at least 10 models, got {n}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} must be in (0, 1)")));
    }
    if k_difficult + 2 > n {
        return Err(Error::Config(format!("k_difficult {k_difficult} leaves no training models out of {n}")));
    }
    let target = ((fraction * n as f64).round() as usize).max(1);
    let cap = (2 * target).min(n - k_difficult - 1);
    let merges = average_linkage(d)?;
    let mut m = 0;
    while m < merges.len() && merges[m].size <= cap {
        m += 1;
    }
    // Cluster sizes only grow, so every cluster after `m` merges is ≤ cap.
    let clusters = clusters_after(n, &merges, m);
    let test = clusters
        .iter()
        .min_by_key(|c| (c.len().abs_diff(target), c[0]))
        .expect("non-empty")
        .clone();
    let rest: Vec<usize> = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
    debug_assert!(rest.len() > k_difficult);
    let mut scored: Vec<(f64, usize)> = rest
        .iter()
        .map(|&i| (test.iter().map(|&t| d[i][t]).sum::<f64>() / test.len() as f64, i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut difficult: Vec<usize> = scored[..k_difficult].iter().map(|&(_, i)| i).collect();
    difficult.sort_unstable();
    let train = rest.into_iter().filter(|i| difficult.binary_search(i).is_err()).collect();
    Ok(SplitResult {
        train,
        test_normal: test,
        test_difficult: difficult,
    })
}

impl SplitResult {
    /// `id role` lines with role `train`, `normal` or `difficult`, by id.
    pub fn to_text(&self, image_size: usize) -> String {
        let mut rows: Vec<(usize, &str)> = self
            .train
            .iter()
            .map(|&i| (i, "train"))
            .chain(self.test_normal.iter().map(|&i| (i, "normal")))
            .chain(self.test_difficult.iter().map(|&i| (i, "difficult")))
            .collect();
        rows.sort_unstable();
        let mut s = format!("size {image_size}\n");
        for (i, r) in rows {
            s.push_str(&format!("{i} {r}\n"));
        }
        s
    }

    /// Inverse of [`SplitResult::to_text`]; returns the split and image size.
    pub fn parse(text: &str) -> Result<(SplitResult, usize)> {
        let bad = |d: String| Error::format("split file", d);
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let size = match lines.next().map(|(_, l)| l.split_whitespace().collect::<Vec<_>>()) {
            Some(f) if f.len() == 2 && f[0] == "size" => f[1].parse::<usize>().map_err(|_| bad("bad size".into()))?,
            _ => return Err(bad("first line must be `size N`".into())),
        };
        let mut split = SplitResult {
            train: vec![],
            test_normal: vec![],
            test_difficult: vec![],
        };
        for (expected, (n, l)) in lines.enumerate() {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 2 {
                return Err(bad(format!("line {}: expected `id role`", n + 1)));
            }
            let id: usize = f[0].parse().map_err(|_| bad(format!("line {}: bad id", n + 1)))?;
            if id != expected {
                return Err(bad(format!("line {}: ids must be 0,1,2,… in order", n + 1)));
            }
            match f[1] {
                "train" => split.train.push(id),
                "normal" => split.test_normal.push(id),
                "difficult" => split.test_difficult.push(id),
                r => return Err(bad(format!("line {}: unknown role {r:?}", n + 1))),
            }
        }
        Ok((split, size))
    }
}
