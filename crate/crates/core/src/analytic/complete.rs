use crate::analytic::master::{face_point, FacePoint};
use crate::analytic::{DensityValue, FormulaTag};
use crate::error::{Error, Result};
use crate::geometry::{RegionClassification, RegionKind};
use crate::model::MotionModel;
use crate::quadrature::adaptive_gk;
use crate::special::{ln_bessel_i1, ln_factorial, SeriesValue};
use crate::stochastic::KernelKind;

/// Evaluation route for the inner density of a complete motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompleteForm {
    Series,
    Integral,
}

fn complete_params(model: &MotionModel) -> Result<(f64, Vec<f64>)> {
    if model.kernel().kind() != KernelKind::Complete {
        return Err(Error::Unsupported("closed form needs a complete switching kernel".into()));
    }
    if !model.velocities().is_minimal() {
        return Err(Error::NotMinimal);
    }
    let lambda = model
        .common_rate()
        .ok_or_else(|| Error::Unsupported("closed form needs one homogeneous exponential rate".into()))?;
    Ok((lambda, model.kernel().initial().to_vec()))
}

/// Running sum of `exp(l_i)` kept as `scale * exp(shift)`.
#[derive(Clone, Copy)]
struct LogAcc {
    shift: f64,
    scaled: f64,
}

impl LogAcc {
    fn new() -> Self {
        LogAcc { shift: f64::NEG_INFINITY, scaled: 0.0 }
    }

    fn add(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.shift {
            self.scaled = self.scaled * (self.shift - l).exp() + 1.0;
            self.shift = l;
        } else {
            self.scaled += (l - self.shift).exp();
        }
    }

    fn ln(&self) -> f64 {
        self.shift + self.scaled.ln()
    }
}

/// `ln sum_m (|m| + c - d)! prod_h a_h^{m_h} / (m_h! (m_h + e_h)!)` over
/// `m in N^c`, with `e_h = 1` except `e_k = 0` and `d = 1` for the terminal
/// variant (`terminal = Some(k)`), and `e_h = 1`, `d = 0` otherwise.
///
/// Summed by total degree. Since `1/(m!(m+e)!) <= 4^m/(2m)!`, shell `s` is at
/// most `(s+c-d)! B^{2s}/(2s)!` with `B = 2 sum sqrt(a_h)`; the ratio of these
/// bounds decreases in `s`, which gives a geometric tail bound.
/// Returns the log of the sum, with `terms` the shells used and `remainder`
/// the relative tail bound.
pub fn complete_series_sum(a: &[f64], terminal: Option<usize>, tol: f64) -> SeriesValue {
    let c = a.len();
    let d = usize::from(terminal.is_some());
    let big_b = 2.0 * a.iter().map(|x| x.sqrt()).sum::<f64>();
    let ln_b2 = 2.0 * big_b.ln();
    let kfac = (c - d) as f64;
    let ln_coef = |h: usize, m: usize| -> f64 {
        let e = if terminal == Some(h) { 0 } else { 1 };
        (if m == 0 { 0.0 } else { m as f64 * a[h].ln() }) - ln_factorial(m as u64) - ln_factorial((m + e) as u64)
    };
    // partial[j][s]: shell s of the convolution of the first j+1 coefficient sequences, in log space.
    let mut coef: Vec<Vec<f64>> = vec![Vec::new(); c];
    let mut partial: Vec<Vec<f64>> = vec![Vec::new(); c];
    let mut acc = LogAcc::new();
    let mut s = 0usize;
    loop {
        for h in 0..c {
            coef[h].push(ln_coef(h, s));
        }
        partial[0].push(coef[0][s]);
        for j in 1..c {
            let mut l = LogAcc::new();
            for i in 0..=s {
                l.add(partial[j - 1][i] + coef[j][s - i]);
            }
            partial[j].push(l.ln());
        }
        let ln_term = ln_factorial((s + c - d) as u64) + partial[c - 1][s];
        acc.add(ln_term);
        let sn = (s + 1) as f64;
        let ln_bound = |q: f64| ln_factorial((q as usize + c - d) as u64) + q * ln_b2 - ln_factorial(2 * q as u64);
        let ratio = (sn + 1.0 + kfac) * big_b * big_b / ((2.0 * sn + 1.0) * (2.0 * sn + 2.0));
        if big_b == 0.0 {
            return SeriesValue { value: acc.ln(), terms: s + 1, remainder: 0.0 };
        }
        if ratio < 1.0 {
            let ln_tail = ln_bound(sn) - (1.0 - ratio).ln();
            let rel = (ln_tail - acc.ln()).exp();
            if rel <= tol {
                return SeriesValue { value: acc.ln(), terms: s + 1, remainder: rel };
            }
        }
        s += 1;
        if s > 20_000 {
            return SeriesValue { value: acc.ln(), terms: s, remainder: f64::INFINITY };
        }
    }
}

fn inner_point(model: &MotionModel, t: f64, x: &[f64]) -> Result<FacePoint> {
    let all: Vec<usize> = (0..model.count()).collect();
    face_point(model, t, x, &all)
}

fn inner_region(fp: &FacePoint, t: f64) -> RegionClassification {
    RegionClassification {
        kind: RegionKind::Inner,
        face: (0..fp.occupation.len()).collect(),
        weights: fp.occupation.iter().map(|o| o / t).collect(),
    }
}

/// `ln( e^{-lambda t} / lambda * prod(lambda p_h) / |det| )`.
fn ln_prefactor(lambda: f64, p: &[f64], t: f64, jac: f64) -> f64 {
    -lambda * t - lambda.ln() + p.iter().map(|ph| (lambda * ph).ln()).sum::<f64>() - jac.ln()
}

/// Log of the Bessel integral `int_0^inf e^{-w} w^{c/2} prod_h I_1(2 sqrt(w a_h)) dw`
/// times `prod_h sqrt(lambda p_h / T_h)`, and its error estimate relative to the value.
fn ln_bessel_integral(a: &[f64], ln_outer: f64, tol: f64) -> (f64, f64, usize) {
    let c = a.len() as f64;
    let big_b = 2.0 * a.iter().map(|x| x.sqrt()).sum::<f64>();
    let half_ln_a: f64 = 0.5 * a.iter().map(|x| x.ln()).sum::<f64>();
    let g = |w: f64| -> f64 {
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -w + 0.5 * c * w.ln() + a.iter().map(|&ah| ln_bessel_i1(2.0 * (w * ah).sqrt())).sum::<f64>()
    };
    // Envelope from I_1(z) <= (z/2) e^z: integrand <= exp(phi(w)), and
    // phi'(w) <= -1/2 beyond w0, so the tail past W is at most 2 exp(phi(W)).
    let phi = |w: f64| -w + c * w.ln() + half_ln_a + big_b * w.sqrt();
    let u0 = 0.5 * big_b + (0.25 * big_b * big_b + 2.0 * c).sqrt();
    let w0 = u0 * u0;
    let shift = (0..=400).map(|i| g(w0 * i as f64 / 400.0)).fold(f64::NEG_INFINITY, f64::max);
    let f = |w: f64| (g(w) - shift).exp();
    let rel = 0.05 * tol;
    let head = adaptive_gk(&f, 0.0, w0, 0.0, rel);
    let mut value = head.value;
    let mut error = head.error;
    let mut evals = head.evaluations;
    let mut lo = w0;
    loop {
        let tail = 2.0 * (phi(lo) - shift).exp();
        if tail <= 0.01 * tol * value {
            error += tail;
            break;
        }
        let hi = lo * 1.5 + 1.0;
        let piece = adaptive_gk(&f, lo, hi, 0.0, rel);
        value += piece.value;
        error += piece.error;
        evals += piece.evaluations;
        lo = hi;
    }
    (shift + value.ln() + ln_outer, error / value, evals)
}

/// Inner density of a complete motion with switching law `p` and rate `lambda`,
/// summing all counts: either the multiple power series or the Bessel integral.
pub fn complete_density(model: &MotionModel, t: f64, x: &[f64], form: CompleteForm, tol: f64) -> Result<DensityValue> {
    let (lambda, p) = complete_params(model)?;
    let fp = inner_point(model, t, x)?;
    let a: Vec<f64> = p.iter().zip(&fp.occupation).map(|(ph, th)| lambda * ph * th).collect();
    let pre = ln_prefactor(lambda, &p, t, fp.jacobian);
    let (value, terms, remainder, tag) = match form {
        CompleteForm::Series => {
            let s = complete_series_sum(&a, None, tol);
            let v = (pre + s.value).exp();
            (v, s.terms, s.remainder * v, FormulaTag::CompleteSeries)
        }
        CompleteForm::Integral => {
            // prod sqrt(lambda p_h / T_h) replaces prod(lambda p_h) in the prefactor.
            let outer: f64 = p.iter().zip(&fp.occupation).map(|(ph, th)| 0.5 * (lambda * ph / th).ln()).sum::<f64>()
                - p.iter().map(|ph| (lambda * ph).ln()).sum::<f64>();
            let (ln_i, rel_err, evals) = ln_bessel_integral(&a, outer, tol);
            let v = (pre + ln_i).exp();
            (v, evals, rel_err * v, FormulaTag::CompleteIntegral)
        }
    };
    Ok(DensityValue {
        value,
        region: inner_region(&fp, t),
        tag,
        measure_rows: fp.rows.clone(),
        terms,
        remainder,
    })
}

/// Inner density jointly with `V(t) = v_k`, summed over all counts.
pub fn complete_terminal_density(model: &MotionModel, t: f64, x: &[f64], k: usize, tol: f64) -> Result<DensityValue> {
    let (lambda, p) = complete_params(model)?;
    if k >= p.len() {
        return Err(Error::InvalidModel("terminal index out of range".into()));
    }
    let fp = inner_point(model, t, x)?;
    let a: Vec<f64> = p.iter().zip(&fp.occupation).map(|(ph, th)| lambda * ph * th).collect();
    let s = complete_series_sum(&a, Some(k), tol);
    let v = (ln_prefactor(lambda, &p, t, fp.jacobian) + s.value).exp();
    Ok(DensityValue {
        value: v,
        region: inner_region(&fp, t),
        tag: FormulaTag::CompleteSeries,
        measure_rows: fp.rows.clone(),
        terms: s.terms,
        remainder: s.remainder * v,
    })
}

/// All terminal densities `f_0, ..., f_D` at one point.
pub fn complete_terminal_densities(model: &MotionModel, t: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    (0..model.count()).map(|k| complete_terminal_density(model, t, x, k, tol).map(|d| d.value)).collect()
}

/// Closed form at fixed counts `n_h >= 1`, jointly with `V(t) = v_k` when
/// `terminal` is given, otherwise summed over the terminal velocity.
pub fn complete_joint_counts_density(
    model: &MotionModel,
    t: f64,
    x: &[f64],
    counts: &[u32],
    terminal: Option<usize>,
) -> Result<DensityValue> {
    let (lambda, p) = complete_params(model)?;
    if counts.len() != p.len() {
        return Err(Error::InvalidModel("count vector does not match the model".into()));
    }
    if let Some(h) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InconsistentCounts(h));
    }
    if terminal.is_some_and(|k| k >= p.len()) {
        return Err(Error::InvalidModel("terminal index out of range".into()));
    }
    let fp = inner_point(model, t, x)?;
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    let mut l = -lambda * t - lambda.ln() - fp.jacobian.ln();
    l += match terminal {
        Some(k) => ln_factorial(total - 1) + (counts[k] as f64).ln(),
        None => ln_factorial(total),
    };
    for h in 0..p.len() {
        let n = counts[h] as u64;
        l += n as f64 * (lambda * p[h]).ln() + (n - 1) as f64 * fp.occupation[h].ln()
            - ln_factorial(n - 1)
            - ln_factorial(n);
    }
    Ok(DensityValue {
        value: l.exp(),
        region: inner_region(&fp, t),
        tag: FormulaTag::CompleteCounts,
        measure_rows: fp.rows.clone(),
        terms: 1,
        remainder: 0.0,
    })
}
