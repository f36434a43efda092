use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{AnnealingSchedule, MixtureSpec};
use crate::ensemble::TrajectoryEnsemble;
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::spectra::SpectralSequence;

/// Ancestral sampler for `sum_i w_i N(m_i, diag(var_i))`.
struct Ancestral {
    d: usize,
    cumulative: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl Ancestral {
    fn new(mixture: &MixtureSpec, d: usize, extra_var: &[f64]) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let k = mixture.len();
        let mut means = vec![0.0; k * d];
        let mut sds = vec![0.0; k * d];
        let mut cumulative = Vec::with_capacity(k);
        let mut acc = 0.0;
        for (i, c) in mixture.components().iter().enumerate() {
            acc += c.weight;
            cumulative.push(acc);
            for j in 1..=d {
                means[i * d + j - 1] = c.mean_at(j);
                sds[i * d + j - 1] = (mixture.sigma(i, j)? + extra_var[j - 1]).sqrt();
            }
        }
        Ok(Self { d, cumulative, means, sds })
    }

    fn pick(&self, u: f64) -> usize {
        let last = self.cumulative.len() - 1;
        let i = self.cumulative.iter().position(|&c| u < c).unwrap_or(last);
        // Rounding can leave u above the final partial sum; fall back to the
        // last component with positive weight.
        if i == last {
            let mut i = last;
            while i > 0 && self.cumulative[i] == self.cumulative[i - 1] {
                i -= 1;
            }
            return i;
        }
        i
    }

    fn draw(&self, rng: &mut impl Rng, out: &mut [f64]) {
        let i = self.pick(rng.random::<f64>());
        let row = i * self.d;
        for j in 0..self.d {
            let z: f64 = rng.sample(StandardNormal);
            out[j] = self.means[row + j] + self.sds[row + j] * z;
        }
    }

    fn ensemble(&self, n: usize, seed: u64, purpose: Purpose, tag: &str) -> Result<TrajectoryEnsemble> {
        if n == 0 {
            return Err(Error::Parameter("need at least one sample".into()));
        }
        let d = self.d;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|p| {
                let mut rng = substream(seed, purpose, p as u64);
                let mut row = vec![0.0; d];
                self.draw(&mut rng, &mut row);
                row
            })
            .collect();
        let samples = Array2::from_shape_vec((n, d), rows.concat()).expect("shape matches");
        Ok(TrajectoryEnsemble::new(samples, tag, seed))
    }
}

/// `n` exact draws from the target truncated to `d` coordinates.
pub fn sample_target(mixture: &MixtureSpec, d: usize, n: usize, seed: u64) -> Result<TrajectoryEnsemble> {
    Ancestral::new(mixture, d, &vec![0.0; d])?.ensemble(n, seed, Purpose::Target, "target")
}

/// `n` exact draws from the initial law `target * N(0, theta(0) diag(lambda))`.
pub fn sample_initial(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    schedule: &AnnealingSchedule,
    d: usize,
    n: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    let theta0 = schedule.theta(0.0);
    let extra: Vec<f64> = lambda.values(d).into_iter().map(|l| theta0 * l).collect();
    Ancestral::new(mixture, d, &extra)?.ensemble(n, seed, Purpose::Initial, "initial")
}
