use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixture::{AnnealingSchedule, DenseMixture, MixtureSpec};
use crate::spectra::SpectralSequence;

/// Linear stability of EM over the actual mesh. Drift is only evaluated at
/// `t_0..t_{N-1}`, so the final grid point never enters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub h: f64,
    /// `max_n |1 - h_n gamma_j / b_{t_n,j}|` for `j = 1..d`.
    pub worst_factor: Vec<f64>,
    /// Signed factor at the mesh index attaining the maximum.
    pub worst_signed: Vec<f64>,
    pub first_unstable_index: Option<usize>,
    /// `2 / sup_{n<N, j<=d} gamma_j / b_{t_n,j}`; infinite when all `gamma_j = 0`.
    pub h_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub h: f64,
    pub h_bound: f64,
    pub first_unstable_index: Option<usize>,
}

impl StabilityReport {
    pub fn summary(&self) -> StabilitySummary {
        StabilitySummary {
            h: self.h,
            h_bound: self.h_bound,
            first_unstable_index: self.first_unstable_index,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "j,worst_factor,stable")?;
        for (j, f) in self.worst_factor.iter().enumerate() {
            writeln!(out, "{},{},{}", j + 1, f, *f <= 1.0)?;
        }
        Ok(())
    }
}

pub fn stability_report(
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    schedule: &AnnealingSchedule,
    d: usize,
) -> Result<StabilityReport> {
    let dense = DenseMixture::new(mixture, lambda, d)?;
    let g = gamma.values(d);
    if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config("preconditioner must be finite and non-negative".into()));
    }
    let mut worst = vec![0.0f64; d];
    let mut signed = vec![1.0f64; d];
    let mut sup_rate = 0.0f64;
    let mesh = schedule.mesh();
    for n in 0..schedule.n_steps() {
        let h = schedule.step(n);
        let level = dense.level(schedule.theta(mesh[n]));
        for j in 0..d {
            let rate = g[j] * level.inv_b[j];
            sup_rate = sup_rate.max(rate);
            let f = 1.0 - h * rate;
            if f.abs() > worst[j] {
                worst[j] = f.abs();
                signed[j] = f;
            }
        }
    }
    Ok(StabilityReport {
        h: schedule.h_max(),
        first_unstable_index: worst.iter().position(|f| *f > 1.0).map(|j| j + 1),
        worst_factor: worst,
        worst_signed: signed,
        h_bound: if sup_rate > 0.0 { 2.0 / sup_rate } else { f64::INFINITY },
    })
}

/// Second moment after `iterations` steps of the noiseless recursion
/// `x_{k+1} = f x_k`, `x_0 = 1`.
pub fn linearized_em_second_moment(factor: f64, iterations: usize) -> f64 {
    let mut m = 1.0f64;
    for _ in 0..iterations {
        m *= factor * factor;
        if !m.is_finite() {
            return f64::INFINITY;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn pl(a: f64) -> SpectralSequence {
        SpectralSequence::power_law(a, 1.0).unwrap()
    }

    fn experiment() -> AnnealingSchedule {
        AnnealingSchedule::uniform(2.5, 10.0, 2500).unwrap()
    }

    #[test]
    fn experiment_onset() {
        let r = stability_report(&presets::shifted_pair(), &pl(6.0), &pl(4.0), &experiment(), 60).unwrap();
        assert_eq!(r.first_unstable_index, Some(45));
        assert!(r.worst_factor[43] <= 1.0);
        // sup over n < N sits at theta = 0.004.
        assert!((r.h_bound - 2.0 * 1.004 / 3600.0).abs() < 1e-15);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("j,worst_factor,stable\n1,"));
        assert!(text.lines().nth(45).unwrap().ends_with(",false"));
    }

    #[test]
    fn small_preconditioner_is_stable() {
        let m = presets::symmetric_bimodal(1.0, pl(1.0));
        let s = AnnealingSchedule::uniform(1.0, 1.0, 1).unwrap();
        // gamma_j <= sigma_j, h = 1.
        let r = stability_report(&m, &pl(1.0), &pl(2.0), &s, 30).unwrap();
        assert_eq!(r.first_unstable_index, None);
        assert!(r.h <= r.h_bound);
    }

    #[test]
    fn equality_case() {
        // gamma / sigma = 2000 with no smoothing at the evaluated points.
        let m = MixtureSpec::single([], SpectralSequence::constant(1.0).unwrap()).unwrap();
        let s = AnnealingSchedule::uniform(1e-3, 1.0, 1).unwrap();
        let r = stability_report(&m, &SpectralSequence::constant(0.0).unwrap(), &SpectralSequence::constant(2000.0).unwrap(), &s, 3).unwrap();
        assert_eq!(r.h_bound, 1e-3);
        assert_eq!(r.first_unstable_index, None);
    }

    proptest! {
        #[test]
        fn bound_iff_no_unstable_index(
            sigma_exp in 0.0..4.0f64,
            gamma_exp in 0.0..4.0f64,
            lambda_exp in 0.0..4.0f64,
            n_steps in 1usize..50,
            horizon in 0.01..3.0f64,
            amp in 0.5..5.0f64,
        ) {
            let m = MixtureSpec::single([], pl(sigma_exp)).unwrap();
            let s = AnnealingSchedule::uniform(horizon, amp, n_steps).unwrap();
            let r = stability_report(&m, &pl(lambda_exp), &pl(gamma_exp), &s, 20).unwrap();
            let h = s.step(0);
            // Stay away from the floating-point equality edge.
            prop_assume!((h / r.h_bound - 1.0).abs() > 1e-9);
            prop_assert_eq!(h <= r.h_bound, r.first_unstable_index.is_none());
            for (j, f) in r.worst_signed.iter().enumerate() {
                let m2 = linearized_em_second_moment(*f, 4000);
                let stable = r.worst_factor[j] <= 1.0;
                prop_assert_eq!(stable, m2 <= 1.0, "j={} f={}", j + 1, f);
            }
        }
    }
}
