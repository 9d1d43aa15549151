//! Fixed-order reductions.
//!
//! Every sum that feeds a trajectory goes through a binary tree whose shape
//! depends only on the input length, so results are bit-identical no matter
//! how many workers evaluated the leaves.

const LEAF: usize = 64;

/// Pairwise (tree) sum with a length-determined split.
pub fn tree_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = split_point(xs.len());
    tree_sum(&xs[..mid]) + tree_sum(&xs[mid..])
}

/// Tree sum of `f(i)` for `i in 0..n`, same shape as [`tree_sum`].
pub fn tree_sum_by<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        let len = hi - lo;
        if len <= LEAF {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            return acc;
        }
        let mid = lo + split_point(len);
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

fn split_point(len: usize) -> usize {
    // Largest multiple of LEAF not exceeding half, so leaves stay aligned.
    let half = len / 2;
    (half / LEAF).max(1) * LEAF
}

/// Mean and standard error of a sample, accumulated in index order.
///
/// Uses the Welford recurrence, so a sample of identical values returns that
/// value exactly with zero error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn of(xs: &[f64]) -> Self {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, &x) in xs.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (x - mean);
        }
        let n = xs.len();
        let stderr = if n > 1 {
            (m2 / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            stderr,
            count: n,
        }
    }

    /// Sample standard deviation (zero for fewer than two values).
    pub fn std_dev(&self) -> f64 {
        self.stderr * (self.count as f64).sqrt()
    }
}
