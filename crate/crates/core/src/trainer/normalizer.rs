//! Running mean/variance observation normalization.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
    pub clip: f64,
}

impl RunningNorm {
    const EPS: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], var: vec![1.0; dim], count: 0.0, clip: 10.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merges the statistics of a batch of rows (parallel-variance update).
    pub fn update(&mut self, rows: &[Vec<f64>]) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let dim = self.dim();
        let n = rows.len() as f64;
        let mut batch_mean = vec![0.0; dim];
        for r in rows {
            ensure_len("normalizer row", dim, r.len())?;
            for (m, v) in batch_mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        batch_mean.iter_mut().for_each(|m| *m /= n);
        let mut batch_var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in batch_var.iter_mut().zip(r).zip(&batch_mean) {
                *s += (v - m) * (v - m);
            }
        }
        batch_var.iter_mut().for_each(|s| *s /= n);

        let total = self.count + n;
        for i in 0..dim {
            let delta = batch_mean[i] - self.mean[i];
            let m2 = self.var[i] * self.count + batch_var[i] * n + delta * delta * self.count * n / total;
            self.mean[i] += delta * n / total;
            self.var[i] = m2 / total;
        }
        self.count = total;
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((v, m), s)| ((v - m) / (s + Self::EPS).sqrt()).clamp(-self.clip, self.clip))
            .collect()
    }
}
