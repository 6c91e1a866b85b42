//! Summary statistics over independently trained models.

use serde::{Deserialize, Serialize};

/// Mean and standard error of a set of per-model values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Standard error is the sample standard deviation (n − 1) over `sqrt(n)`;
    /// it is zero for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, stderr: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
        }
    }

    /// `73.3 ± 3.3%` style cell for a fraction.
    pub fn percent_cell(&self) -> String {
        format!("{:.1} ± {:.1}%", 100.0 * self.mean, 100.0 * self.stderr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_convention_example() {
        let s = MeanStderr::of(&[0.7, 0.8, 0.7]);
        assert!((s.mean - 0.7333333333333334).abs() < 1e-12);
        // Hand computation: deviations (-1/30, 2/30, -1/30), variance 0.01/3, stderr 1/30.
        assert!((s.stderr - 1.0 / 30.0).abs() < 1e-12);
        assert_eq!(s.percent_cell(), "73.3 ± 3.3%");
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(MeanStderr::of(&[1.0, 1.0, 1.0]), MeanStderr { mean: 1.0, stderr: 0.0 });
        assert_eq!(MeanStderr::of(&[0.4]).stderr, 0.0);
        assert_eq!(MeanStderr::of(&[]).mean, 0.0);
    }
}
