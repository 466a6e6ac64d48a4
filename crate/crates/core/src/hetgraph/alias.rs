//! Walker/Vose alias tables packed into flat arrays so many small
//! distributions share two allocations.

use rand::Rng;

#[derive(Debug, Clone, Default)]
pub struct AliasTables {
    threshold: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTables {
    pub fn with_capacity(n: usize) -> Self {
        AliasTables {
            threshold: Vec::with_capacity(n),
            alias: Vec::with_capacity(n),
        }
    }

    /// Appends a table for `probs` (must sum to 1) and returns its offset.
    pub fn push(&mut self, probs: &[f64]) -> usize {
        let offset = self.threshold.len();
        let n = probs.len();
        let mut scaled: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
        let mut alias = vec![0u32; n];
        let mut threshold = vec![1.0f64; n];
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            threshold[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        for i in small.into_iter().chain(large) {
            threshold[i] = 1.0;
            alias[i] = i as u32;
        }
        self.threshold.extend(threshold);
        self.alias.extend(alias);
        offset
    }

    /// Draws a local index in `0..len` from the table at `offset`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, offset: usize, len: usize, rng: &mut R) -> usize {
        if len == 1 {
            return 0;
        }
        let i = rng.random_range(0..len);
        if rng.random::<f64>() < self.threshold[offset + i] {
            i
        } else {
            self.alias[offset + i] as usize
        }
    }

    pub fn len(&self) -> usize {
        self.threshold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threshold.is_empty()
    }
}

/// A single alias table owning its offset/length.
#[derive(Debug, Clone)]
pub struct AliasTable {
    tables: AliasTables,
    len: usize,
}

impl AliasTable {
    pub fn new(probs: &[f64]) -> Self {
        let mut tables = AliasTables::with_capacity(probs.len());
        tables.push(probs);
        AliasTable {
            tables,
            len: probs.len(),
        }
    }

    pub fn from_weights(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::new(&probs)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.tables.sample(0, self.len, rng)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    /// Exact probability mass each index receives from the table.
    fn implied(t: &AliasTables, offset: usize, n: usize) -> Vec<f64> {
        let mut mass = vec![0.0; n];
        for i in 0..n {
            let th = t.threshold[offset + i].min(1.0);
            mass[i] += th / n as f64;
            mass[t.alias[offset + i] as usize] += (1.0 - th) / n as f64;
        }
        mass
    }

    #[test]
    fn table_reproduces_distribution_exactly() {
        let mut t = AliasTables::default();
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.75, 0.25];
        let c = [1.0];
        let oa = t.push(&a);
        let ob = t.push(&b);
        let oc = t.push(&c);
        for (o, p) in [(oa, &a[..]), (ob, &b[..]), (oc, &c[..])] {
            for (x, y) in implied(&t, o, p.len()).iter().zip(p) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_matches() {
        let table = AliasTable::from_weights(&[3.0, 1.0]);
        let mut rng = seed::stream(11);
        let n = 100_000;
        let hits = (0..n).filter(|_| table.sample(&mut rng) == 0).count();
        assert!((hits as f64 / n as f64 - 0.75).abs() < 0.01);
    }
}
