use crate::analytic::face_masses_complete;
use crate::error::{Error, Result};
use crate::geometry::{build_projection, VelocitySet};
use crate::model::{EventClock, MotionModel};
use crate::simulator::{map_replica_chunks, simulate_endpoint, EndpointSample, Scratch, DEFAULT_CHUNK};
use crate::stats::{binomial_z, kolmogorov_critical, ks_two_sample};
use crate::stochastic::{replica_rng, RateFunction, SwitchKernel};

const ALPHA_TOL: f64 = 1e-12;

/// Offset separating the random streams of the scaled motion from those of the original.
const SCALED_STREAM_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Common probability `alpha` of switching into `subset` from any of its velocities.
pub fn subset_alpha(kernel: &SwitchKernel, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() || subset.iter().any(|&h| h >= kernel.len()) {
        return Err(Error::InvalidModel("subset indices out of range".into()));
    }
    let row = |k: usize| subset.iter().map(|&i| kernel.p(k, i)).sum::<f64>();
    let alpha = row(subset[0]);
    for &k in subset {
        let v = row(k);
        if (v - alpha).abs() > ALPHA_TOL {
            return Err(Error::ConditionViolated { row: k, value: v, expected: alpha });
        }
    }
    if alpha <= 0.0 {
        return Err(Error::ConditionViolated { row: subset[0], value: alpha, expected: alpha });
    }
    Ok(alpha)
}

fn rate_function(model: &MotionModel) -> Result<RateFunction> {
    match model.clock() {
        EventClock::Poisson(r) => Ok(r.clone()),
        EventClock::Renewal(_) => model
            .common_rate()
            .map(RateFunction::Constant)
            .ok_or_else(|| Error::Unsupported("conditional law needs a Poisson clock".into())),
    }
}

/// `P{no velocity outside the subset is used on [0, t]} = e^{-Lambda(t)(1-alpha)} sum_{i in subset} p_i`.
pub fn conditioning_probability(model: &MotionModel, subset: &[usize], t: f64) -> Result<f64> {
    let alpha = subset_alpha(model.kernel(), subset)?;
    let big_lambda = rate_function(model)?.cumulative(t);
    let p: f64 = subset.iter().map(|&i| model.kernel().initial()[i]).sum();
    Ok((-big_lambda * (1.0 - alpha)).exp() * p)
}

/// Settings of a conditional-law check.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConditionalConfig {
    /// Replicas of the original motion used for the probability check.
    pub replicas: u64,
    /// Conditioned samples compared with the scaled motion.
    pub conditioned_samples: u64,
    /// Samples of the scaled motion.
    pub scaled_samples: u64,
    pub seed: u64,
    /// Significance level of the two-sample tests.
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CoordinateKs {
    /// Coordinate of `R^D` kept by the projection.
    pub coordinate: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConditionalReport {
    pub subset: Vec<usize>,
    pub alpha: f64,
    pub analytic_probability: f64,
    pub replicas: u64,
    pub accepted: u64,
    pub mc_probability: f64,
    pub z_score: f64,
    pub probability_pass: bool,
    /// Replicas needed on average to collect `conditioned_samples`.
    pub required_replicas: u64,
    /// Replicas actually simulated to collect them.
    pub simulated_replicas: u64,
    pub conditioned_samples: u64,
    pub scaled_samples: u64,
    pub projection_rows: Vec<usize>,
    pub ks: Vec<CoordinateKs>,
    pub ks_pass: bool,
}

fn accepted_in(
    model: &MotionModel,
    t: f64,
    seed: u64,
    from: u64,
    to: u64,
    off_set: &[usize],
    rows: &[usize],
) -> Result<(u64, Vec<Vec<f64>>)> {
    let parts = map_replica_chunks(to - from, DEFAULT_CHUNK, |a, b| {
        let mut scratch = Scratch::default();
        let mut e = EndpointSample::default();
        let mut n = 0;
        let mut kept = Vec::new();
        for i in (from + a)..(from + b) {
            simulate_endpoint(model, t, &mut replica_rng(seed, i), &mut scratch, &mut e)?;
            if off_set.iter().all(|&j| e.counts[j] == 0) {
                n += 1;
                kept.push(rows.iter().map(|&r| e.position[r]).collect());
            }
        }
        Ok((n, kept))
    })?;
    let mut n = 0;
    let mut kept = Vec::new();
    for (c, k) in parts {
        n += c;
        kept.extend(k);
    }
    Ok((n, kept))
}

/// Checks that, given no switch to a velocity outside `subset`, the position
/// (projected on the hull of the subset) has the law of the motion on the subset
/// with rate `lambda alpha`, initial law `p_i / sum p` and transitions `p_{ij} / alpha`.
pub fn conditional_equivalence(
    model: &MotionModel,
    subset: &[usize],
    t: f64,
    cfg: &ConditionalConfig,
) -> Result<ConditionalReport> {
    let alpha = subset_alpha(model.kernel(), subset)?;
    let rate = rate_function(model)?;
    let prob = conditioning_probability(model, subset, t)?;
    let n = model.count();
    let off_set: Vec<usize> = (0..n).filter(|h| !subset.contains(h)).collect();
    let sub_vs = model.velocities().subset(subset)?;
    let rows: Vec<usize> = if subset.len() == 1 {
        Vec::new()
    } else if sub_vs.state_space_dim() == sub_vs.dim() {
        (0..sub_vs.dim()).collect()
    } else {
        build_projection(&sub_vs)?.rows().to_vec()
    };

    let (accepted, mut kept) = accepted_in(model, t, cfg.seed, 0, cfg.replicas, &off_set, &rows)?;
    let mut simulated = cfg.replicas;
    while (kept.len() as u64) < cfg.conditioned_samples {
        let missing = cfg.conditioned_samples - kept.len() as u64;
        let extra = ((missing as f64 / prob.max(1e-12)) * 1.1).ceil() as u64 + 1000;
        let (_, more) = accepted_in(model, t, cfg.seed, simulated, simulated + extra, &off_set, &rows)?;
        kept.extend(more);
        simulated += extra;
    }
    kept.truncate(cfg.conditioned_samples as usize);

    let mut ks = Vec::new();
    if !rows.is_empty() && cfg.conditioned_samples > 0 && cfg.scaled_samples > 0 {
        let total_p: f64 = subset.iter().map(|&i| model.kernel().initial()[i]).sum();
        let initial: Vec<f64> = subset.iter().map(|&i| model.kernel().initial()[i] / total_p).collect();
        let transition: Vec<Vec<f64>> =
            subset.iter().map(|&i| subset.iter().map(|&j| model.kernel().p(i, j) / alpha).collect()).collect();
        let y_vs = VelocitySet::from_matrix(sub_vs.project_rows(&rows))?;
        let y = MotionModel::new(
            y_vs,
            SwitchKernel::general(initial, transition)?,
            EventClock::Poisson(rate.scaled(alpha)),
        )?;
        let all_rows: Vec<usize> = (0..rows.len()).collect();
        let y_seed = cfg.seed.wrapping_add(SCALED_STREAM_SEED);
        let (_, y_pos) = accepted_in(&y, t, y_seed, 0, cfg.scaled_samples, &[], &all_rows)?;
        let c = kolmogorov_critical(cfg.level);
        for (j, &row) in rows.iter().enumerate() {
            let a: Vec<f64> = kept.iter().map(|p| p[j]).collect();
            let b: Vec<f64> = y_pos.iter().map(|p| p[j]).collect();
            let r = ks_two_sample(&a, &b);
            let threshold = c / r.effective_n.sqrt();
            ks.push(CoordinateKs {
                coordinate: row,
                statistic: r.statistic,
                threshold,
                p_value: r.p_value,
                pass: r.statistic <= threshold,
            });
        }
    }
    let z = binomial_z(accepted, cfg.replicas, prob);
    Ok(ConditionalReport {
        subset: subset.to_vec(),
        alpha,
        analytic_probability: prob,
        replicas: cfg.replicas,
        accepted,
        mc_probability: accepted as f64 / cfg.replicas.max(1) as f64,
        z_score: z,
        probability_pass: z.abs() <= 3.0,
        required_replicas: (cfg.conditioned_samples as f64 / prob).ceil() as u64,
        simulated_replicas: simulated,
        conditioned_samples: cfg.conditioned_samples,
        scaled_samples: cfg.scaled_samples,
        projection_rows: rows,
        ks_pass: ks.iter().all(|k| k.pass),
        ks,
    })
}

/// Face masses of a complete motion driven by a Poisson clock with intensity `rate`.
pub fn nonhomogeneous_masses(model: &MotionModel, rate: &RateFunction, t: f64, face: &[usize]) -> Result<f64> {
    let m = model.with_clock(EventClock::Poisson(rate.clone()))?;
    face_masses_complete(&m, t, face)
}
