//! Wilcoxon rank-sum (Mann-Whitney) test and summary statistics.

use statrs::distribution::{ContinuousCDF, Normal};

/// Largest group size for which the exact null distribution is used.
const EXACT_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Mann-Whitney U of the first sample: pairs with a > b, ties counted 1/2.
    pub u: f64,
    /// Sum of the first sample's mid-ranks in the pooled data.
    pub w: f64,
    pub p_two_sided: f64,
    /// Alternative: the first sample tends to be larger.
    pub p_greater: f64,
    /// Alternative: the first sample tends to be smaller.
    pub p_less: f64,
    pub exact: bool,
}

/// Mid-ranks (1-based) of the pooled sample, plus tie group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Null distribution of U as counts over all C(n1 + n2, n1) arrangements.
fn u_counts(n1: usize, n2: usize) -> Vec<f64> {
    // c[i][j][u]: arrangements of i + j items with U = u; rolled over j.
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<f64>> = (0..=n1).map(|_| vec![0.0; max_u + 1]).collect();
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    for j in 1..=n2 {
        let mut cur: Vec<Vec<f64>> = (0..=n1).map(|_| vec![0.0; max_u + 1]).collect();
        cur[0][0] = 1.0;
        for i in 1..=n1 {
            for u in 0..=i * j {
                // Largest item comes from sample 1 (beats all j of sample 2) or from sample 2.
                let from_first = if u >= j { cur[i - 1][u - j] } else { 0.0 };
                cur[i][u] = from_first + prev[i][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(n1)
}

pub fn rank_sum_test(a: &[f64], b: &[f64]) -> RankSum {
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..n1].iter().sum();
    let u = w - (n1 * (n1 + 1)) as f64 / 2.0;
    let untestable = RankSum {
        u,
        w,
        p_two_sided: 1.0,
        p_greater: 1.0,
        p_less: 1.0,
        exact: false,
    };
    if n1 == 0 || n2 == 0 {
        return untestable;
    }
    let has_ties = ties.iter().any(|&t| t > 1);
    if !has_ties && n1 <= EXACT_LIMIT && n2 <= EXACT_LIMIT {
        let counts = u_counts(n1, n2);
        let total: f64 = counts.iter().sum();
        let k = u.round() as usize;
        let p_greater = counts[k..].iter().sum::<f64>() / total;
        let p_less = counts[..=k].iter().sum::<f64>() / total;
        return RankSum {
            u,
            w,
            p_two_sided: (2.0 * p_greater.min(p_less)).min(1.0),
            p_greater,
            p_less,
            exact: true,
        };
    }
    let n = (n1 + n2) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return untestable;
    }
    let sd = var.sqrt();
    let mean = (n1 * n2) as f64 / 2.0;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_greater = normal.sf((u - mean - 0.5) / sd);
    let p_less = normal.cdf((u - mean + 0.5) / sd);
    let p_two_sided = (2.0 * normal.sf(((u - mean).abs() - 0.5).max(0.0) / sd)).min(1.0);
    RankSum {
        u,
        w,
        p_two_sided,
        p_greater,
        p_less,
        exact: false,
    }
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            n,
            median: f64::NAN,
            mean: f64::NAN,
            sd: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        n,
        median: median(values),
        mean,
        sd,
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}
