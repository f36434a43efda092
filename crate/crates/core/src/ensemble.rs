use std::io::{self, Write};

use ndarray::Array2;
use serde::Serialize;

/// `n_paths x d` sample matrix with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub samples: Array2<f64>,
    /// Scheme or sampler that produced the samples, e.g. `"EM"`, `"target"`.
    pub tag: String,
    pub seed: u64,
    pub n_steps: usize,
    pub h_max: f64,
    /// Paths that hit the overflow clamp.
    pub flagged: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateMoments {
    pub j: usize,
    pub mean: f64,
    pub variance: f64,
}

impl TrajectoryEnsemble {
    pub fn new(samples: Array2<f64>, tag: impl Into<String>, seed: u64) -> Self {
        let n = samples.nrows();
        Self {
            samples,
            tag: tag.into(),
            seed,
            n_steps: 0,
            h_max: 0.0,
            flagged: vec![false; n],
        }
    }

    pub fn n_paths(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn overflow_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }

    /// Rows of unflagged paths.
    pub fn clean_rows(&self) -> Array2<f64> {
        let keep: Vec<usize> = (0..self.n_paths()).filter(|&i| !self.flagged[i]).collect();
        self.samples.select(ndarray::Axis(0), &keep)
    }

    /// Per-coordinate mean and unbiased variance over unflagged paths.
    pub fn moments(&self) -> Vec<CoordinateMoments> {
        let rows = self.clean_rows();
        let n = rows.nrows() as f64;
        rows.columns()
            .into_iter()
            .enumerate()
            .map(|(j, col)| {
                let mean = col.sum() / n;
                let variance = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                CoordinateMoments { j: j + 1, mean, variance }
            })
            .collect()
    }

    /// One row per path, columns `x_1..x_d`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("x_{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.samples.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_layout() {
        let e = TrajectoryEnsemble::new(array![[1.0, 2.5], [-3.0, 0.0]], "target", 1);
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x_1,x_2\n1,2.5\n-3,0\n");
    }

    #[test]
    fn moments_skip_flagged_rows() {
        let mut e = TrajectoryEnsemble::new(array![[1.0], [3.0], [1e150]], "EM", 1);
        e.flagged[2] = true;
        let m = e.moments();
        assert_eq!(m[0].mean, 2.0);
        assert_eq!(m[0].variance, 2.0);
        assert_eq!(e.overflow_count(), 1);
    }
}
