//! Sum-rule fusion, stratified fold splits, accuracy and ranking.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::trainer::argmax;

/// Mean of the member distributions and its argmax (lowest index on ties).
pub fn sum_rule_fuse(members: &[Tensor]) -> Result<(Tensor, usize)> {
    let first = members
        .first()
        .ok_or_else(|| Error::contract("cannot fuse an empty member list"))?;
    if first.rank() != 1 {
        return Err(Error::dim(format!("members must be vectors, got {:?}", first.shape())));
    }
    let fused = fuse_batch(members)?;
    let decision = argmax(fused.data());
    Ok((fused, decision))
}

/// Element-wise mean of equally shaped member outputs (`[C]` or `[N, C]`).
pub fn fuse_batch(members: &[Tensor]) -> Result<Tensor> {
    let first = members
        .first()
        .ok_or_else(|| Error::contract("cannot fuse an empty member list"))?;
    let mut sum = vec![0.0; first.len()];
    for m in members {
        if m.shape() != first.shape() {
            return Err(Error::dim(format!(
                "member shapes differ: {:?} vs {:?}",
                m.shape(),
                first.shape()
            )));
        }
        for (s, v) in sum.iter_mut().zip(m.data()) {
            *s += v;
        }
    }
    let k = members.len() as f64;
    sum.iter_mut().for_each(|s| *s /= k);
    Tensor::new(first.shape().to_vec(), sum)
}

/// Row-wise argmax of `[N, C]` scores.
pub fn decisions(scores: &Tensor) -> Vec<usize> {
    let c = scores.row_len();
    scores.data().chunks(c).map(argmax).collect()
}

pub fn accuracy(decisions: &[usize], labels: &[usize]) -> Result<f64> {
    if decisions.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} decisions for {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::contract("accuracy of an empty set"));
    }
    let correct = decisions.iter().zip(labels).filter(|(d, l)| d == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Train/test partitions of a dataset: `k` cross-validation folds or one fixed split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    n: usize,
    /// Test indices of each fold, ascending.
    tests: Vec<Vec<usize>>,
    /// Explicit training indices for a fixed split; otherwise the complement.
    fixed_train: Option<Vec<usize>>,
}

impl FoldSplit {
    /// One fixed split; the two index sets must be disjoint.
    pub fn fixed(n: usize, train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&test) {
            if i >= n || seen[i] {
                return Err(Error::config(format!("index {i} repeated or out of range in fixed split")));
            }
            seen[i] = true;
        }
        Ok(Self {
            n,
            tests: vec![test],
            fixed_train: Some(train),
        })
    }

    pub fn k(&self) -> usize {
        self.tests.len()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        &self.tests[fold]
    }

    pub fn train(&self, fold: usize) -> Vec<usize> {
        if let Some(t) = &self.fixed_train {
            return t.clone();
        }
        let mut in_test = vec![false; self.n];
        for &i in &self.tests[fold] {
            in_test[i] = true;
        }
        (0..self.n).filter(|&i| !in_test[i]).collect()
    }

    /// Fold index of every sample (`None` for samples outside a fixed split).
    pub fn assignments(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n];
        for (f, t) in self.tests.iter().enumerate() {
            for &i in t {
                out[i] = Some(f);
            }
        }
        out
    }
}

/// Stratified `k`-fold split: each class is shuffled and dealt round-robin,
/// continuing from where the previous class stopped, so every fold holds
/// each class to within one sample and fold sizes differ by at most one.
pub fn kfold_split(labels: &[usize], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::config("k-fold needs k >= 2"));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = Rng::new(seed);
    let mut tests = vec![Vec::new(); k];
    let mut next = 0;
    for (c, idx) in by_class.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(Error::config(format!(
                "class {c} has {} samples, fewer than {k} folds",
                idx.len()
            )));
        }
        rng.shuffle(idx);
        for &i in idx.iter() {
            tests[next].push(i);
            next = (next + 1) % k;
        }
    }
    for t in &mut tests {
        t.sort_unstable();
    }
    Ok(FoldSplit {
        n: labels.len(),
        tests,
        fixed_train: None,
    })
}

/// Rank of each value, 1 for the largest; equal values share the better rank.
pub fn rank_by_average(averages: &[f64]) -> Vec<usize> {
    averages
        .iter()
        .map(|a| 1 + averages.iter().filter(|b| *b > a).count())
        .collect()
}
