use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::coeffs::elp_coeffs;
use super::Scheme;
use crate::ensemble::TrajectoryEnsemble;
use crate::error::{Error, Result};
use crate::mixture::{sample_initial, AnnealedLevel, AnnealingSchedule, DenseMixture, MixtureSpec};
use crate::rng::{substream, Purpose};
use crate::spectra::SpectralSequence;

/// Magnitude at which EM states are clamped and their path flagged.
pub const OVERFLOW_CLAMP: f64 = 1e150;

/// Coordinatewise update `y' = linear y + gain G(y) + sd z` for one mesh interval.
struct StepPlan {
    level: AnnealedLevel,
    linear: Vec<f64>,
    gain: Vec<f64>,
    sd: Vec<f64>,
}

fn check_gamma(gamma: &SpectralSequence, d: usize) -> Result<Vec<f64>> {
    let g = gamma.values(d);
    if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config("preconditioner must be finite and non-negative".into()));
    }
    Ok(g)
}

fn plan(dense: &DenseMixture, gamma: &[f64], schedule: &AnnealingSchedule, scheme: Scheme, n: usize) -> Result<StepPlan> {
    let mesh = schedule.mesh();
    let (t0, t1) = (mesh[n], mesh[n + 1]);
    let level = dense.level(schedule.theta(t0));
    let d = dense.dim();
    let (mut linear, mut gain, mut sd) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for j in 0..d {
        match scheme {
            Scheme::Em => {
                let h = t1 - t0;
                linear[j] = 1.0 - h * gamma[j] * level.inv_b[j];
                gain[j] = h * gamma[j];
                sd[j] = (2.0 * h * gamma[j]).sqrt();
            }
            Scheme::Elp => {
                let c = elp_coeffs(
                    t0,
                    t1,
                    dense.sigma_under()[j],
                    dense.lambda()[j],
                    gamma[j],
                    schedule.horizon(),
                    schedule.amplitude(),
                )?;
                linear[j] = c.phi;
                gain[j] = c.psi;
                sd[j] = c.noise_var.sqrt();
            }
        }
    }
    Ok(StepPlan { level, linear, gain, sd })
}

struct Workspace {
    resp: Vec<f64>,
    g: Vec<f64>,
}

impl Workspace {
    fn new(k: usize, d: usize) -> Self {
        Self {
            resp: vec![0.0; k],
            g: vec![0.0; d],
        }
    }
}

/// Advances `y` in place; returns whether the clamp was hit.
fn apply(dense: &DenseMixture, p: &StepPlan, y: &mut [f64], noise: &[f64], ws: &mut Workspace) -> bool {
    dense.responsibilities_into(&p.level, y, &mut ws.resp);
    dense.correction_into(&p.level, y, &ws.resp, &mut ws.g);
    let mut clamped = false;
    for j in 0..y.len() {
        let v = p.linear[j] * y[j] + p.gain[j] * ws.g[j] + p.sd[j] * noise[j];
        y[j] = if v.is_nan() {
            clamped = true;
            OVERFLOW_CLAMP
        } else if v.abs() > OVERFLOW_CLAMP {
            clamped = true;
            OVERFLOW_CLAMP.copysign(v)
        } else {
            v
        };
    }
    clamped
}

fn single_step(
    scheme: Scheme,
    state: &[f64],
    n: usize,
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    schedule: &AnnealingSchedule,
    noise: &[f64],
) -> Result<Vec<f64>> {
    let d = state.len();
    if noise.len() != d {
        return Err(Error::Parameter(format!("noise has length {}, state {d}", noise.len())));
    }
    let dense = DenseMixture::new(mixture, lambda, d)?;
    let g = check_gamma(gamma, d)?;
    let p = plan(&dense, &g, schedule, scheme, n)?;
    let mut y = state.to_vec();
    apply(&dense, &p, &mut y, noise, &mut Workspace::new(dense.n_components(), d));
    Ok(y)
}

/// One EM step from mesh point `t_n` with step `h`.
#[allow(clippy::too_many_arguments)]
pub fn em_step(
    state: &[f64],
    t_n: f64,
    h: f64,
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    schedule: &AnnealingSchedule,
    noise: &[f64],
) -> Result<Vec<f64>> {
    let horizon = schedule.horizon();
    if !(h > 0.0) || t_n < 0.0 || t_n + h > horizon * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("step [{t_n}, {}] outside [0, {horizon}]", t_n + h)));
    }
    let local = AnnealingSchedule::with_mesh(horizon, schedule.amplitude(), {
        let mut m = vec![0.0];
        if t_n > 0.0 {
            m.push(t_n);
        }
        let end = (t_n + h).min(horizon);
        m.push(end);
        if end < horizon {
            m.push(horizon);
        }
        m
    })?;
    let n = usize::from(t_n > 0.0);
    single_step(Scheme::Em, state, n, mixture, lambda, gamma, &local, noise)
}

/// One ELP step over mesh interval `n` of the schedule.
pub fn elp_step(
    state: &[f64],
    n: usize,
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    schedule: &AnnealingSchedule,
    noise: &[f64],
) -> Result<Vec<f64>> {
    if n >= schedule.n_steps() {
        return Err(Error::Domain(format!("step index {n} beyond {} intervals", schedule.n_steps())));
    }
    single_step(Scheme::Elp, state, n, mixture, lambda, gamma, schedule, noise)
}

/// Simulates `n_paths` independent chains from the exact initial law.
///
/// Initial states and driving noise depend only on `(seed, path)`, so EM and
/// ELP runs with the same seed use common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    scheme: Scheme,
    mixture: &MixtureSpec,
    lambda: &SpectralSequence,
    gamma: &SpectralSequence,
    schedule: &AnnealingSchedule,
    d: usize,
    n_paths: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    let dense = DenseMixture::new(mixture, lambda, d)?;
    let g = check_gamma(gamma, d)?;
    let plans: Vec<StepPlan> = (0..schedule.n_steps())
        .map(|n| plan(&dense, &g, schedule, scheme, n))
        .collect::<Result<_>>()?;
    let init = sample_initial(mixture, lambda, schedule, d, n_paths, seed)?;
    let paths: Vec<(Vec<f64>, bool)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut y = init.samples.row(i).to_vec();
            let mut rng = substream(seed, Purpose::Noise, i as u64);
            let mut ws = Workspace::new(dense.n_components(), d);
            let mut z = vec![0.0; d];
            let mut flagged = false;
            for p in &plans {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                flagged |= apply(&dense, p, &mut y, &z, &mut ws);
            }
            (y, flagged)
        })
        .collect();
    let flagged = paths.iter().map(|p| p.1).collect();
    let flat: Vec<f64> = paths.into_iter().flat_map(|p| p.0).collect();
    let mut ens = TrajectoryEnsemble::new(
        Array2::from_shape_vec((n_paths, d), flat).expect("shape matches"),
        scheme.as_str(),
        seed,
    );
    ens.n_steps = schedule.n_steps();
    ens.h_max = schedule.h_max();
    ens.flagged = flagged;
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::bimodal_tail_variance;
    use crate::ode::rk4_scalar;
    use crate::presets;
    use approx::assert_relative_eq;

    fn pl(a: f64) -> SpectralSequence {
        SpectralSequence::power_law(a, 1.0).unwrap()
    }

    fn gaussian(a: f64) -> MixtureSpec {
        MixtureSpec::single([], pl(a)).unwrap()
    }

    #[test]
    fn frozen_preconditioner_keeps_state() {
        let s = AnnealingSchedule::uniform(1.0, 1.0, 4).unwrap();
        let zero = SpectralSequence::constant(0.0).unwrap();
        let y = [0.3, -2.0, 5.0];
        let noise = [1.0, 1.0, 1.0];
        assert_eq!(em_step(&y, 0.25, 0.25, &presets::shifted_pair(), &pl(6.0), &zero, &s, &noise).unwrap(), y);
        assert_eq!(elp_step(&y, 1, &presets::shifted_pair(), &pl(6.0), &zero, &s, &noise).unwrap(), y);
    }

    #[test]
    fn em_factor_zero_gives_pure_noise() {
        // sigma = 1, lambda = 0 so b = 1; h gamma = 1.
        let s = AnnealingSchedule::uniform(1.0, 1.0, 2).unwrap();
        let zero = SpectralSequence::constant(0.0).unwrap();
        let y = em_step(&[7.0], 0.0, 0.5, &gaussian(0.0), &zero, &SpectralSequence::constant(2.0).unwrap(), &s, &[0.4]).unwrap();
        assert_relative_eq!(y[0], 2f64.sqrt() * 0.4 * 1.0, max_relative = 1e-15);
        assert!(em_step(&[7.0], 0.8, 0.5, &gaussian(0.0), &zero, &pl(0.0), &s, &[0.4]).is_err());
    }

    #[test]
    fn em_factor_at_experiment_edge() {
        let s = AnnealingSchedule::uniform(2.5, 10.0, 2500).unwrap();
        let mut y = vec![0.0; 50];
        y[49] = 1.0;
        let next = em_step(&y, 2.5 - 1e-3, 1e-3, &presets::shifted_pair(), &pl(6.0), &pl(4.0), &s, &[0.0; 50]).unwrap();
        assert_relative_eq!(next[49], 1.0 - 2.5 / 1.004, max_relative = 1e-10);
        assert!(next[49].abs() > 1.0);
    }

    #[test]
    fn elp_variance_recursion_is_exact_on_gaussians() {
        // v_{n+1} = phi^2 v_n + noise_var, against RK4 on v' = 2 gamma (1 - v / b).
        let (sig, lam, gam, tt, a) = (0.3, 0.7, 1.3, 1.5, 2.0);
        let b = |t: f64| sig + a * lam * (tt - t) / tt;
        let exact = rk4_scalar(|t, v| 2.0 * gam * (1.0 - v / b(t)), 0.0, sig + a * lam, tt, 150_000);
        for n_steps in [1usize, 3, 17, 200] {
            let s = AnnealingSchedule::uniform(tt, a, n_steps).unwrap();
            let mut v = sig + a * lam;
            for n in 0..n_steps {
                let c = elp_coeffs(s.mesh()[n], s.mesh()[n + 1], sig, lam, gam, tt, a).unwrap();
                v = c.phi * c.phi * v + c.noise_var;
            }
            assert_relative_eq!(v, exact, max_relative = 1e-10);
        }
        // Terminal variance has the closed form of the tail law.
        assert_relative_eq!(exact, bimodal_tail_variance(sig, lam, gam, tt, a), max_relative = 1e-10);
    }

    #[test]
    fn elp_deterministic_contraction() {
        let s = AnnealingSchedule::uniform(1.0, 1.0, 5).unwrap();
        let m = gaussian(1.0);
        let lam = pl(1.0);
        let mut prod = 1.0;
        let mut y = vec![1.0];
        for n in 0..5 {
            let c = elp_coeffs(s.mesh()[n], s.mesh()[n + 1], 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
            prod *= c.phi;
            let dense = DenseMixture::new(&m, &lam, 1).unwrap();
            let p = plan(&dense, &[1.0], &s, Scheme::Elp, n).unwrap();
            let mut ws = Workspace::new(1, 1);
            apply(&dense, &p, &mut y, &[0.0], &mut ws);
        }
        assert_relative_eq!(y[0], prod, max_relative = 1e-14);
    }

    #[test]
    fn chain_is_deterministic_and_shares_initial_draws() {
        let s = AnnealingSchedule::uniform(1.0, 2.0, 20).unwrap();
        let m = presets::shifted_pair();
        let a = run_chain(Scheme::Elp, &m, &pl(6.0), &pl(4.0), &s, 4, 1, 42).unwrap();
        let b = run_chain(Scheme::Elp, &m, &pl(6.0), &pl(4.0), &s, 4, 1, 42).unwrap();
        assert_eq!(a, b);
        let c = run_chain(Scheme::Elp, &m, &pl(6.0), &pl(4.0), &s, 4, 1, 43).unwrap();
        assert_ne!(a.samples, c.samples);
        let many = run_chain(Scheme::Elp, &m, &pl(6.0), &pl(4.0), &s, 4, 6, 42).unwrap();
        assert_eq!(many.samples.row(0), a.samples.row(0));
        assert_eq!((a.n_steps, a.tag.as_str()), (20, "ELP"));
    }

    #[test]
    fn em_overflow_is_flagged_and_clamped() {
        let s = AnnealingSchedule::uniform(1.0, 1.0, 200).unwrap();
        let m = gaussian(0.0);
        let lam = SpectralSequence::constant(0.0).unwrap();
        // h gamma / b = 500 per step, so |factor| ~ 499.
        let e = run_chain(Scheme::Em, &m, &lam, &SpectralSequence::constant(1e5).unwrap(), &s, 2, 3, 1).unwrap();
        assert_eq!(e.overflow_count(), 3);
        assert!(e.samples.iter().all(|v| v.is_finite() && v.abs() <= OVERFLOW_CLAMP));
    }

    #[test]
    fn em_and_elp_converge_together() {
        let m = MixtureSpec::new(vec![
            crate::mixture::Component::new(0.6, [(1, 1.0)], pl(1.0)),
            crate::mixture::Component::new(0.4, [(1, -1.5), (2, 0.5)], pl(0.5)),
        ])
        .unwrap();
        let (lam, gam) = (pl(1.0), pl(0.5));
        let n_paths = 20_000;
        let gap = |steps: usize| {
            let s = AnnealingSchedule::uniform(1.0, 1.0, steps).unwrap();
            let em = run_chain(Scheme::Em, &m, &lam, &gam, &s, 3, n_paths, 8).unwrap().moments();
            let elp = run_chain(Scheme::Elp, &m, &lam, &gam, &s, 3, n_paths, 8).unwrap().moments();
            em.iter()
                .zip(&elp)
                .map(|(a, b)| (a.mean - b.mean).abs() + (a.variance - b.variance).abs())
                .sum::<f64>()
        };
        let g: Vec<f64> = [100usize, 200, 400].iter().map(|&n| gap(n)).collect();
        assert!(g[1] < 0.7 * g[0] && g[2] < 0.7 * g[1], "{g:?}");
        assert!(g[2] / g[0] > 0.1, "{g:?}");
    }
}
