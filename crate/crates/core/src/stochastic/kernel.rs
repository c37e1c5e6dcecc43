use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::multinomial;

const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum KernelKind {
    /// `v_0 -> v_1 -> ... -> v_M -> v_0`.
    Cyclic,
    /// The next velocity has law `p` whatever the current one.
    Complete,
    /// Arbitrary transition matrix.
    GeneralMarkov,
    /// Four planar directions; every switch moves to the other axis.
    Orthogonal,
}

/// Initial law and switching matrix of the velocity chain.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchKernel {
    kind: KernelKind,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    cum_initial: Vec<f64>,
    cum_rows: Vec<Vec<f64>>,
}

fn check_law(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn draw<R: Rng + ?Sized>(cum: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
    match cum.iter().position(|&c| u < c) {
        Some(i) => i,
        None => cum.iter().rposition(|&c| c > 0.0).unwrap_or(cum.len() - 1),
    }
}

impl SwitchKernel {
    fn build(kind: KernelKind, initial: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::InvalidModel("empty initial law".into()));
        }
        check_law(&initial, "initial law")?;
        if transition.len() != n {
            return Err(Error::InvalidModel(format!("transition matrix has {} rows, expected {n}", transition.len())));
        }
        for (j, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!("transition row {j} has {} entries, expected {n}", row.len())));
            }
            check_law(row, &format!("transition row {j}"))?;
        }
        let cum_initial = cumulative(&initial);
        let cum_rows = transition.iter().map(|r| cumulative(r)).collect();
        Ok(SwitchKernel { kind, initial, transition, cum_initial, cum_rows })
    }

    pub fn cyclic(initial: Vec<f64>) -> Result<Self> {
        let n = initial.len();
        let p = (0..n).map(|j| (0..n).map(|h| if h == (j + 1) % n { 1.0 } else { 0.0 }).collect()).collect();
        Self::build(KernelKind::Cyclic, initial, p)
    }

    /// Complete kernel: initial law and every row equal to `p`, all entries positive.
    pub fn complete(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidModel("complete kernel needs positive probabilities".into()));
        }
        let rows = vec![p.clone(); p.len()];
        Self::build(KernelKind::Complete, p, rows)
    }

    pub fn complete_uniform(n: usize) -> Self {
        Self::complete(vec![1.0 / n as f64; n]).expect("uniform law")
    }

    pub fn general(initial: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(KernelKind::GeneralMarkov, initial, transition)
    }

    /// Four directions indexed so that even and odd indices lie on different axes.
    pub fn orthogonal(initial: Vec<f64>) -> Result<Self> {
        if initial.len() != 4 {
            return Err(Error::InvalidModel("orthogonal kernel needs four velocities".into()));
        }
        let p = (0..4).map(|j| (0..4).map(|h| if (j + h) % 2 == 1 { 0.5 } else { 0.0 }).collect()).collect();
        Self::build(KernelKind::Orthogonal, initial, p)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn p(&self, j: usize, h: usize) -> f64 {
        self.transition[j][h]
    }

    pub fn initial_velocity<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.cum_initial, rng)
    }

    pub fn next_velocity<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> usize {
        match self.kind {
            KernelKind::Cyclic => (j + 1) % self.len(),
            _ => draw(&self.cum_rows[j], rng),
        }
    }

    /// `P{C_n = counts, V(t) = v_k}`: the first `n = sum counts` displacements use
    /// velocity `h` exactly `counts[h]` times and the last one is `k`.
    pub fn allocation_probability(&self, counts: &[u32], k: usize) -> Result<f64> {
        let n = self.len();
        if counts.len() != n || k >= n {
            return Err(Error::InvalidModel("count vector does not match the kernel".into()));
        }
        if counts[k] == 0 {
            return Err(Error::InconsistentCounts(k));
        }
        match self.kind {
            KernelKind::Complete => {
                let mut c: Vec<u64> = counts.iter().map(|&x| x as u64).collect();
                c[k] -= 1;
                let pw: f64 = counts.iter().zip(&self.initial).map(|(&c, &p)| p.powi(c as i32)).product();
                Ok(multinomial(&c) * pw)
            }
            KernelKind::Cyclic => {
                let total: u64 = counts.iter().map(|&x| x as u64).sum();
                let start = ((k as i64 - (total as i64 - 1)).rem_euclid(n as i64)) as usize;
                let mut expected = vec![0u64; n];
                for i in 0..total {
                    expected[(start + i as usize) % n] += 1;
                }
                if expected.iter().zip(counts).all(|(&e, &c)| e == c as u64) {
                    Ok(self.initial[start])
                } else {
                    Ok(0.0)
                }
            }
            _ => Ok(self.allocation_dp(counts, k)),
        }
    }

    /// Dynamic programme over (counts so far, current velocity).
    fn allocation_dp(&self, counts: &[u32], k: usize) -> f64 {
        let n = self.len();
        let mut stride = vec![1usize; n];
        for h in 1..n {
            stride[h] = stride[h - 1] * (counts[h - 1] as usize + 1);
        }
        let states = stride[n - 1] * (counts[n - 1] as usize + 1);
        let mut prob = vec![0.0; states * n];
        let mut c = vec![0u32; n];
        for idx in 0..states {
            let mut total = 0;
            let mut rem = idx;
            for h in (0..n).rev() {
                c[h] = (rem / stride[h]) as u32;
                rem %= stride[h];
                total += c[h];
            }
            for l in 0..n {
                if c[l] == 0 {
                    continue;
                }
                let v = if total == 1 {
                    self.initial[l]
                } else {
                    let prev = idx - stride[l];
                    (0..n).map(|j| prob[prev * n + j] * self.transition[j][l]).sum()
                };
                prob[idx * n + l] = v;
            }
        }
        prob[(states - 1) * n + k]
    }

    /// Allocation probabilities restricted to the velocities in `support`, one shell
    /// of total displacement count at a time.
    pub fn allocation_shells(&self, support: &[usize]) -> AllocationShells<'_> {
        AllocationShells { kernel: self, support: support.to_vec(), current: BTreeMap::new(), total: 0 }
    }
}

/// Iterator over shells `n = 1, 2, ...`; each item maps a count vector over the
/// support to the probabilities of ending on each support velocity.
pub struct AllocationShells<'a> {
    kernel: &'a SwitchKernel,
    support: Vec<usize>,
    current: BTreeMap<Vec<u32>, Vec<f64>>,
    total: u32,
}

impl AllocationShells<'_> {
    pub fn total(&self) -> u32 {
        self.total
    }
}

impl Iterator for AllocationShells<'_> {
    type Item = (u32, BTreeMap<Vec<u32>, Vec<f64>>);

    fn next(&mut self) -> Option<Self::Item> {
        let s = self.support.len();
        let mut next: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        if self.total == 0 {
            for (i, &h) in self.support.iter().enumerate() {
                let mut c = vec![0u32; s];
                c[i] = 1;
                let mut v = vec![0.0; s];
                v[i] = self.kernel.initial[h];
                next.insert(c, v);
            }
        } else {
            for (c, probs) in &self.current {
                for (l, &hl) in self.support.iter().enumerate() {
                    let add: f64 = self
                        .support
                        .iter()
                        .enumerate()
                        .map(|(j, &hj)| probs[j] * self.kernel.transition[hj][hl])
                        .sum();
                    if add == 0.0 {
                        continue;
                    }
                    let mut c2 = c.clone();
                    c2[l] += 1;
                    next.entry(c2).or_insert_with(|| vec![0.0; s])[l] += add;
                }
            }
        }
        self.total += 1;
        self.current = next.clone();
        Some((self.total, next))
    }
}
