//! Compensated (Neumaier) accumulation for long sums.

/// Scalar Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Fold another accumulator in, carrying both its parts.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Coordinatewise compensated accumulator for vectors of a fixed length.
#[derive(Debug, Clone)]
pub struct VectorAccumulator {
    parts: Vec<CompensatedSum>,
}

impl VectorAccumulator {
    pub fn new(dim: usize) -> Self {
        VectorAccumulator {
            parts: vec![CompensatedSum::new(); dim],
        }
    }

    #[inline]
    pub fn add(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.parts.len());
        for (acc, &x) in self.parts.iter_mut().zip(v) {
            acc.add(x);
        }
    }

    pub fn merge(&mut self, other: &VectorAccumulator) {
        for (acc, o) in self.parts.iter_mut().zip(&other.parts) {
            acc.merge(o);
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.parts.iter().map(CompensatedSum::value).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let mut acc = CompensatedSum::new();
        for x in [1.0, 1e100, 1.0, -1e100] {
            acc.add(x);
        }
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn many_small_terms() {
        let mut acc = CompensatedSum::new();
        let mut naive = 0.0;
        for _ in 0..1_000_000 {
            acc.add(0.1);
            naive += 0.1;
        }
        assert!((acc.value() - 100_000.0).abs() < 1e-9);
        assert!((naive - 100_000.0f64).abs() > (acc.value() - 100_000.0).abs());
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 37) % 101) as f64 * 1e-3 - 0.05)
            .collect();
        let mut whole = CompensatedSum::new();
        xs.iter().for_each(|&x| whole.add(x));
        let mut left = CompensatedSum::new();
        let mut right = CompensatedSum::new();
        xs[..500].iter().for_each(|&x| left.add(x));
        xs[500..].iter().for_each(|&x| right.add(x));
        left.merge(&right);
        assert!((left.value() - whole.value()).abs() <= 1e-15);

        let mut v = VectorAccumulator::new(2);
        v.add(&[1.0, 1e100]);
        v.add(&[1.0, -1e100]);
        assert_eq!(v.values(), vec![2.0, 0.0]);
    }
}
