use serde::{Deserialize, Serialize};

use crate::entcf::{MAX_DOMAIN_BITS, MIN_DOMAIN_BITS};
use crate::entropy::uncertainty_epsilon;
use crate::error::{Error, Result};

/// Protocol parameters. Symbols: `l` is the output length, `gamma` the
/// storage fraction, `lambda`, `lambda_prime`, `kappa` and `k` the slack
/// reals of the security relations, `tau` the estimation slack, `r` the
/// self-test exponent and `threshold` the abort threshold `delta' - tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: usize,
    pub l: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub kappa: f64,
    pub k: f64,
    /// Smoothing budget for the entropy suites.
    pub eps: f64,
    pub eps_prime: f64,
    pub tau: f64,
    pub n_estimation: usize,
    /// Domain bits `m` of the function family (stands in for the security parameter).
    pub domain_bits: usize,
    pub r: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Probability that the receiver overrides the basis question on a CT=b round.
    pub override_probability: f64,
    /// Reject configurations that violate the sender-security relations.
    pub diagnostics: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n: 64,
            l: 4,
            gamma: 0.0,
            lambda: 0.01,
            lambda_prime: 0.01,
            kappa: 0.01,
            k: 0.01,
            eps: 0.05,
            eps_prime: 0.05,
            tau: 0.05,
            n_estimation: 2000,
            domain_bits: 4,
            r: 1.0,
            threshold: 0.05,
            seed: 0,
            override_probability: 0.5,
            diagnostics: false,
        }
    }
}

/// One inequality `lhs <= rhs` of the parameter relations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Relation {
    fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.to_string(), lhs, rhs, satisfied: lhs <= rhs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    /// Number of rounds the relations are evaluated at (`n` or `n'`).
    pub rounds: f64,
    pub relations: Vec<Relation>,
    /// Uncertainty-relation error `eps(n, lambda)`.
    pub eps: f64,
    /// `2^{-lambda' n}`.
    pub eps_prime: f64,
    /// `(1/2) 2^{-kappa n / 2} + 2 eps + 4 eps'`.
    pub sender_security_bound: f64,
    /// `(delta' - tau)^r` with `delta' - tau` the abort threshold.
    pub self_test_bound: f64,
    /// Probability that the estimate of `delta` lies within `tau`.
    pub estimation_confidence: f64,
    pub satisfied: bool,
}

/// `1 - 2 exp(-tau^2 N / 3)`.
pub fn chernoff_confidence(tau: f64, n: usize) -> f64 {
    1.0 - 2.0 * (-(tau * tau) * n as f64 / 3.0).exp()
}

impl ProtocolConfig {
    /// Structural checks every run needs.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.l == 0 || self.l > self.n {
            return bad(format!("output length l = {} must satisfy 1 <= l <= n = {}", self.l, self.n));
        }
        if !(MIN_DOMAIN_BITS..=MAX_DOMAIN_BITS).contains(&self.domain_bits) {
            return bad(format!("domain_bits = {} outside {MIN_DOMAIN_BITS}..={MAX_DOMAIN_BITS}", self.domain_bits));
        }
        if !(0.0..=1.0).contains(&self.override_probability) {
            return bad(format!("override_probability = {} must lie in [0, 1]", self.override_probability));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold = {} must lie in [0, 1]", self.threshold));
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma = {} must be nonnegative", self.gamma));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau = {} must be positive", self.tau));
        }
        for (name, v) in [("eps", self.eps), ("eps_prime", self.eps_prime)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if self.diagnostics {
            for (name, v) in [("lambda", self.lambda), ("lambda_prime", self.lambda_prime), ("kappa", self.kappa), ("k", self.k)] {
                if !(v > 0.0) {
                    return bad(format!("{name} = {v} must be positive"));
                }
            }
            let report = self.relations(self.n as f64);
            if let Some(r) = report.relations.iter().find(|r| !r.satisfied) {
                return bad(format!("{} (lhs {:.4}, rhs {:.4})", r.name, r.lhs, r.rhs));
            }
        }
        Ok(())
    }

    /// Storage capacity `floor(gamma * rounds)` in qubits.
    pub fn capacity(&self, rounds: usize) -> usize {
        (self.gamma * rounds as f64).floor() as usize
    }

    /// Evaluates the sender-security relations at `rounds` (use `n` for the
    /// Bell-pair protocol and the expected `n'` for the device-independent one).
    pub fn relations(&self, rounds: f64) -> RelationReport {
        let l = self.l as f64;
        let gn = self.gamma * rounds;
        let simple = Relation::new("gamma n <= n/4 - 2l - k n", gn, rounds / 4.0 - 2.0 * l - self.k * rounds);
        let full = Relation::new(
            "gamma n <= (1/4 - lambda - 2 lambda' - kappa) n - 2l - 1",
            gn,
            (0.25 - self.lambda - 2.0 * self.lambda_prime - self.kappa) * rounds - 2.0 * l - 1.0,
        );
        let n_int = rounds.max(0.0).round() as usize;
        let eps = uncertainty_epsilon(n_int, self.lambda);
        let eps_prime = 2f64.powf(-self.lambda_prime * rounds);
        let sender_security_bound = 0.5 * 2f64.powf(-self.kappa * rounds / 2.0) + 2.0 * eps + 4.0 * eps_prime;
        let relations = vec![simple, full];
        let satisfied = relations.iter().all(|r| r.satisfied);
        RelationReport {
            rounds,
            relations,
            eps,
            eps_prime,
            sender_security_bound,
            self_test_bound: self.threshold.max(0.0).powf(self.r),
            estimation_confidence: chernoff_confidence(self.tau, self.n_estimation),
            satisfied,
        }
    }

    /// Expected size of the generation set for honest parties.
    pub fn expected_generation_rounds(&self) -> f64 {
        self.n as f64 * generation_probability(self.override_probability)
    }
}

/// Probability that one round lands in the generation set: CT=b, both state
/// bases Hadamard, receiver override, tagged Generate.
pub fn generation_probability(override_probability: f64) -> f64 {
    0.5 * 0.25 * override_probability * 0.5
}
