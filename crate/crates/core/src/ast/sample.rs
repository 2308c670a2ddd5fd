use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Distribution as _;

use super::expr::{Distribution, EvalError, Expr, Valuation};

/// Random stream identified by `(master_seed, index)`.
///
/// Streams with the same seed and different indices are disjoint keystreams
/// of the same ChaCha key, so replication `i` draws the same numbers no
/// matter which thread runs it.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, index: u64) -> RngStream {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        RngStream { rng }
    }

    /// Standard exponential variate.
    pub fn exp1(&mut self) -> f64 {
        rand_distr::Exp1.sample(&mut self.rng)
    }

    pub fn uniform01(&mut self) -> f64 {
        rand_distr::StandardUniform.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn bad(msg: String) -> EvalError {
    EvalError::BadParameter(msg)
}

/// Parameters `(μ, σ)` of the underlying normal for a lognormal with the given mean and variance.
pub fn lognormal_underlying(mean: f64, variance: f64) -> (f64, f64) {
    let s2 = (1.0 + variance / (mean * mean)).ln();
    (mean.ln() - s2 / 2.0, s2.sqrt())
}

/// Draws one value from `d`, evaluating its parameters in `env`.
pub fn sample_distribution(
    d: &Distribution,
    env: &dyn Valuation,
    rng: &mut RngStream,
) -> Result<f64, EvalError> {
    let mut p = Vec::with_capacity(2);
    for e in d.params() {
        p.push(sample_expr(e, env, rng)?);
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(bad(format!("{} parameters {:?} are not finite", d.name(), p)));
    }
    let r = &mut rng.rng;
    Ok(match d {
        Distribution::Dirac(_) => p[0],
        Distribution::Uniform(..) => {
            let (a, b) = (p[0], p[1]);
            if a > b {
                return Err(bad(format!("Uniform({a}, {b}) has a > b")));
            }
            if a == b {
                return Ok(a);
            }
            rand_distr::Uniform::new_inclusive(a, b)
                .map_err(|e| bad(e.to_string()))?
                .sample(r)
        }
        Distribution::Normal(..) => {
            let (mu, var) = (p[0], p[1]);
            if var < 0.0 {
                return Err(bad(format!("Normal variance {var} is negative")));
            }
            rand_distr::Normal::new(mu, var.sqrt())
                .map_err(|e| bad(e.to_string()))?
                .sample(r)
        }
        Distribution::LogNormal(..) => {
            let (mean, var) = (p[0], p[1]);
            if mean <= 0.0 || var < 0.0 {
                return Err(bad(format!("LogNormal({mean}, {var}) needs mean > 0 and variance >= 0")));
            }
            if var == 0.0 {
                return Ok(mean);
            }
            let (mu, sigma) = lognormal_underlying(mean, var);
            rand_distr::LogNormal::new(mu, sigma)
                .map_err(|e| bad(e.to_string()))?
                .sample(r)
        }
        Distribution::Exponential(..) => {
            let rate = p[0];
            if rate <= 0.0 {
                return Err(bad(format!("Exponential rate {rate} is not positive")));
            }
            rand_distr::Exp::new(rate)
                .map_err(|e| bad(e.to_string()))?
                .sample(r)
        }
        Distribution::Gamma(..) => {
            let (shape, scale) = (p[0], p[1]);
            if shape <= 0.0 || scale <= 0.0 {
                return Err(bad(format!("Gamma({shape}, {scale}) needs positive parameters")));
            }
            rand_distr::Gamma::new(shape, scale)
                .map_err(|e| bad(e.to_string()))?
                .sample(r)
        }
    })
}

/// Evaluates `e`, drawing each random term once.
pub fn sample_expr(e: &Expr, env: &dyn Valuation, rng: &mut RngStream) -> Result<f64, EvalError> {
    e.eval_with(env, &mut |d, env| sample_distribution(d, env, rng))
}
