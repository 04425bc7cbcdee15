//! Rényi entropies of small classical distributions, in bits.
//!
//! Smoothing follows the event picture: an event keeps a sub-normalized part
//! of the joint table, removing at most `eps` of the mass, while the
//! conditioning marginal `P_Y` in the denominator stays fixed.

mod pa;
mod suites;
mod uncertainty;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pa::{pa_bound, pa_exact_lhs, HashFamilySpec, PaEstimate};
pub use suites::{chain_rule_suite, privacy_amplification_suite, split_suite, uncertainty_suite, SuiteReport};
pub use uncertainty::{check_uncertainty_relation, uncertainty_epsilon, UncertaintyCheck, MAX_UNCERTAINTY_QUBITS};

const SUM_TOL: f64 = 1e-12;

/// `P(x, y)` over `nx * ny` cells, stored row-major by `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    nx: usize,
    ny: usize,
    p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(nx: usize, ny: usize, p: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || p.len() != nx * ny {
            return Err(Error::InvalidDistribution(format!("{} cells for a {nx}x{ny} table", p.len())));
        }
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDistribution("negative or non-finite cell".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("mass {total} differs from 1")));
        }
        Ok(Self { nx, ny, p })
    }

    /// Rescales nonnegative weights to a distribution.
    pub fn from_weights(nx: usize, ny: usize, w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptySupport);
        }
        Self::new(nx, ny, w.into_iter().map(|v| v / total).collect())
    }

    /// Trivial conditioning variable.
    pub fn unconditional(p: Vec<f64>) -> Result<Self> {
        Self::new(p.len(), 1, p)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.ny + y]
    }

    pub fn cells(&self) -> &[f64] {
        &self.p
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.ny).map(|y| (0..self.nx).map(|x| self.p(x, y)).sum()).collect()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.nx).map(|x| (0..self.ny).map(|y| self.p(x, y)).sum()).collect()
    }

    /// The pair `(X, Y)` as one unconditioned variable.
    pub fn joint(&self) -> JointDistribution {
        JointDistribution { nx: self.nx * self.ny, ny: 1, p: self.p.clone() }
    }

    /// `Y` as an unconditioned variable.
    pub fn y_only(&self) -> JointDistribution {
        JointDistribution { nx: self.ny, ny: 1, p: self.marginal_y() }
    }

    /// `(ratio P(x,y)/P_Y(y), weight P_Y(y), mass P(x,y))` for every cell with mass.
    fn ratio_cells(&self) -> Vec<(f64, f64, f64)> {
        let py = self.marginal_y();
        let mut cells = Vec::new();
        for x in 0..self.nx {
            for (y, &w) in py.iter().enumerate() {
                let v = self.p(x, y);
                if v > 0.0 {
                    cells.push((v / w, w, v));
                }
            }
        }
        cells
    }
}

/// Validated smoothing parameter in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SmoothingBudget(f64);

impl SmoothingBudget {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Smoothing(eps));
        }
        Ok(Self(eps))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `H_inf(X|Y) = min_{x,y} -log P_{X|Y=y}(x)`.
pub fn min_entropy(d: &JointDistribution) -> Result<f64> {
    let worst = d.ratio_cells().iter().map(|c| c.0).fold(0.0, f64::max);
    if worst == 0.0 {
        return Err(Error::EmptySupport);
    }
    Ok(-worst.log2())
}

/// `H_0(X|Y) = max_y log |supp P_{X|Y=y}|`.
pub fn max_entropy(d: &JointDistribution) -> Result<f64> {
    let widest = (0..d.ny).map(|y| (0..d.nx).filter(|&x| d.p(x, y) > 0.0).count()).max().unwrap_or(0);
    if widest == 0 {
        return Err(Error::EmptySupport);
    }
    Ok((widest as f64).log2())
}

/// Exact `H^eps_inf(X|Y)` by water-filling.
///
/// The optimum caps every ratio at the smallest level `t` whose trimmed mass
/// `sum max(0, P(x,y) - t P_Y(y))` fits in `eps`; the answer is `-log t`.
pub fn smooth_min_entropy(d: &JointDistribution, eps: f64) -> Result<f64> {
    let eps = SmoothingBudget::new(eps)?.value();
    let mut cells = d.ratio_cells();
    if cells.is_empty() {
        return Err(Error::EmptySupport);
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut mass, mut weight) = (0.0, 0.0);
    for (k, &(ratio, w, v)) in cells.iter().enumerate() {
        mass += v;
        weight += w;
        let next = cells.get(k + 1).map_or(0.0, |c| c.0);
        // trimmed mass if every ratio above `next` is lowered to `next`
        if mass - next * weight > eps {
            let t = ((mass - eps) / weight).min(ratio);
            return Ok(-t.log2());
        }
    }
    unreachable!("trimming everything removes mass 1 > eps")
}

/// Result of checking `H^{eps+eps'}(X|Y) > H^eps(XY) - H_0(Y) - log(1/eps')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn check_chain_rule(d: &JointDistribution, eps: f64, eps_prime: f64) -> Result<ChainRuleCheck> {
    if !(eps > 0.0 && eps_prime > 0.0) {
        return Err(Error::Smoothing(eps.min(eps_prime)));
    }
    let lhs = smooth_min_entropy(d, eps + eps_prime)?;
    let rhs = smooth_min_entropy(&d.joint(), eps)? - max_entropy(&d.y_only())? - (1.0 / eps_prime).log2();
    Ok(ChainRuleCheck { lhs, rhs, holds: lhs > rhs })
}

/// Joint law of `(X0, X1, Z)` with `X = X0 * n1 + X1` as the row index.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitInput {
    pub n0: usize,
    pub n1: usize,
    pub table: JointDistribution,
}

impl SplitInput {
    pub fn new(n0: usize, n1: usize, table: JointDistribution) -> Result<Self> {
        if n0 * n1 != table.nx() {
            return Err(Error::InvalidDistribution(format!("{n0}x{n1} pairs against {} rows", table.nx())));
        }
        Ok(Self { n0, n1, table })
    }

    /// Law of `(X_r, Z)`.
    pub fn marginal(&self, r: u8) -> JointDistribution {
        let nr = if r == 0 { self.n0 } else { self.n1 };
        let nz = self.table.ny();
        let mut p = vec![0.0; nr * nz];
        for x0 in 0..self.n0 {
            for x1 in 0..self.n1 {
                let xr = if r == 0 { x0 } else { x1 };
                for z in 0..nz {
                    p[xr * nz + z] += self.table.p(x0 * self.n1 + x1, z);
                }
            }
        }
        JointDistribution { nx: nr, ny: nz, p }
    }

    /// Law of `(X_{1-C(Z)}, Z)` for a choice map `c[z]`.
    pub fn selected(&self, c: &[u8]) -> JointDistribution {
        let nz = self.table.ny();
        let width = self.n0.max(self.n1);
        let m0 = self.marginal(0);
        let m1 = self.marginal(1);
        let mut p = vec![0.0; width * nz];
        for (z, &cz) in c.iter().enumerate() {
            let (src, n) = if cz == 1 { (&m0, self.n0) } else { (&m1, self.n1) };
            for x in 0..n {
                p[x * nz + z] = src.p(x, z);
            }
        }
        JointDistribution { nx: width, ny: nz, p }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    /// `C(z)` for every `z`.
    pub choice: Vec<u8>,
    /// `H^{eps+eps'}(X_{1-C}|ZC)` for the returned choice.
    pub achieved: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn split_bound(alpha: f64, eps_prime: f64) -> f64 {
    alpha / 2.0 - 1.0 - (1.0 / eps_prime).log2()
}

/// Threshold witness for min-entropy splitting: `C(z) = 1` iff
/// `H_inf(X0|Z=z) >= alpha/2`, so the kept string `X_{1-C}` is `X0` exactly
/// on the fibres where `X0` alone is already unpredictable.
pub fn split_choice_bit(input: &SplitInput, alpha: f64, eps: f64, eps_prime: f64) -> Result<SplitResult> {
    if !(eps_prime > 0.0) {
        return Err(Error::Smoothing(eps_prime));
    }
    let h = smooth_min_entropy(&input.table, eps)?;
    if h < alpha - 1e-12 {
        return Err(Error::Hypothesis(format!("H^eps(X0X1|Z) = {h} is below alpha = {alpha}")));
    }
    let m0 = input.marginal(0);
    let pz = m0.marginal_y();
    let choice: Vec<u8> = (0..m0.ny())
        .map(|z| {
            if pz[z] == 0.0 {
                return 1;
            }
            let worst = (0..input.n0).map(|x| m0.p(x, z) / pz[z]).fold(0.0, f64::max);
            u8::from(-worst.log2() >= alpha / 2.0)
        })
        .collect();
    let achieved = smooth_min_entropy(&input.selected(&choice), eps + eps_prime)?;
    let bound = split_bound(alpha, eps_prime);
    Ok(SplitResult { choice, achieved, bound, holds: achieved >= bound - 1e-12 })
}

/// Entropy loss from conditioning on an event of probability `p`.
pub fn conditioning_penalty(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidDistribution(format!("event probability {p}")));
    }
    Ok((1.0 / p).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn min_and_max_examples() {
        let u4 = JointDistribution::unconditional(vec![0.25; 4]).unwrap();
        assert!(close(min_entropy(&u4).unwrap(), 2.0));
        let point = JointDistribution::unconditional(vec![1.0, 0.0]).unwrap();
        assert!(close(min_entropy(&point).unwrap(), 0.0));
        assert!(close(max_entropy(&point).unwrap(), 0.0));
        let d = JointDistribution::unconditional(vec![0.5, 0.25, 0.25]).unwrap();
        assert!(close(min_entropy(&d).unwrap(), 1.0));
        assert!(close(max_entropy(&JointDistribution::unconditional(vec![0.125; 8]).unwrap()).unwrap(), 3.0));
        // three x-values under y=0, five under y=1
        let mut w = vec![0.0; 10];
        for x in 0..3 {
            w[x * 2] = 1.0;
        }
        for x in 0..5 {
            w[x * 2 + 1] = 1.0;
        }
        let d = JointDistribution::from_weights(5, 2, w).unwrap();
        assert!(close(max_entropy(&d).unwrap(), 5f64.log2()));
    }

    #[test]
    fn smoothing_examples() {
        let d = JointDistribution::unconditional(vec![0.5, 0.25, 0.25]).unwrap();
        assert!(close(smooth_min_entropy(&d, 0.0).unwrap(), 1.0));
        assert!(close(smooth_min_entropy(&d, 0.25).unwrap(), 2.0));
        assert!(smooth_min_entropy(&d, 1.0).is_err());
        assert!(JointDistribution::unconditional(vec![0.5, 0.6]).is_err());
    }

    /// Grid search over trim allocations on a three-cell table; the third
    /// cell absorbs whatever budget is left.
    fn grid_oracle(d: &JointDistribution, eps: f64) -> f64 {
        let py = d.marginal_y();
        let cells: Vec<(f64, f64)> = (0..d.nx())
            .flat_map(|x| (0..d.ny()).map(move |y| (x, y)))
            .map(|(x, y)| (d.p(x, y), py[y]))
            .filter(|c| c.0 > 0.0)
            .collect();
        assert_eq!(cells.len(), 3);
        let step = 1e-4;
        let steps = (eps / step).round() as usize;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let t0 = (i as f64 * step).min(cells[0].0);
                let t1 = (j as f64 * step).min(cells[1].0);
                let t2 = (eps - t0 - t1).max(0.0).min(cells[2].0);
                let worst = [(cells[0], t0), (cells[1], t1), (cells[2], t2)]
                    .iter()
                    .map(|((v, w), t)| (v - t) / w)
                    .fold(0.0, f64::max);
                best = best.min(worst);
            }
        }
        -best.log2()
    }

    #[test]
    fn water_filling_matches_grid_oracle() {
        let mut r = StreamRng::seed_from_u64(21);
        for k in 0..100 {
            let w: Vec<f64> = (0..3).map(|_| r.random::<f64>() + 0.05).collect();
            let d = if k % 2 == 0 {
                JointDistribution::from_weights(3, 1, w).unwrap()
            } else {
                JointDistribution::from_weights(2, 2, vec![w[0], w[1], 0.0, w[2]]).unwrap()
            };
            let eps = r.random::<f64>() * 0.1;
            let eps = (eps / 1e-4).round() * 1e-4;
            let exact = smooth_min_entropy(&d, eps).unwrap();
            let oracle = grid_oracle(&d, eps);
            assert!((exact - oracle).abs() < 1e-3, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn smoothing_is_monotone() {
        let mut r = StreamRng::seed_from_u64(22);
        for _ in 0..100 {
            let d = JointDistribution::from_weights(4, 3, (0..12).map(|_| r.random::<f64>()).collect()).unwrap();
            let e1 = r.random::<f64>() * 0.5;
            let e2 = e1 + r.random::<f64>() * 0.4;
            assert!(smooth_min_entropy(&d, e2).unwrap() >= smooth_min_entropy(&d, e1).unwrap() - 1e-12);
            assert_eq!(smooth_min_entropy(&d, 0.0).unwrap(), min_entropy(&d).unwrap());
        }
    }

    #[test]
    fn chain_rule_examples() {
        let d = JointDistribution::new(8, 2, vec![1.0 / 16.0; 16]).unwrap();
        let c = check_chain_rule(&d, 0.01, 0.5).unwrap();
        // smoothing a flat table lifts it by -log(1 - eps)
        assert!(close(c.lhs, 3.0 - (0.49f64).log2()));
        assert!(close(c.rhs, 4.0 - (0.99f64).log2() - 1.0 - 1.0));
        assert!(c.holds);
        let y_const = JointDistribution::unconditional(vec![0.5, 0.3, 0.2]).unwrap();
        let c = check_chain_rule(&y_const, 0.1, 0.2).unwrap();
        let expect = smooth_min_entropy(&y_const, 0.1).unwrap() - (1.0f64 / 0.2).log2();
        assert!(close(c.rhs, expect));
        assert!(c.holds);
        assert!(check_chain_rule(&d, 0.0, 0.5).is_err());
    }

    #[test]
    fn split_examples() {
        // X0 uniform on 3 bits, X1 constant, Z trivial
        let mut w = vec![0.0; 8 * 2];
        for x0 in 0..8 {
            w[x0 * 2] = 1.0;
        }
        let input = SplitInput::new(8, 2, JointDistribution::from_weights(16, 1, w).unwrap()).unwrap();
        let res = split_choice_bit(&input, 3.0, 0.0, 0.5).unwrap();
        assert_eq!(res.choice, vec![1]);
        assert!(close(res.achieved, 3.0 - (0.5f64).log2()));
        assert!(res.holds && res.achieved > res.bound);
        assert!(matches!(split_choice_bit(&input, 3.5, 0.0, 0.5), Err(Error::Hypothesis(_))));

        // X0, X1 independent uniform bits pairs: either choice works
        let sym = SplitInput::new(4, 4, JointDistribution::unconditional(vec![1.0 / 16.0; 16]).unwrap()).unwrap();
        let res = split_choice_bit(&sym, 4.0, 0.0, 0.5).unwrap();
        assert_eq!(res.choice, vec![1]);
        for c in [0u8, 1] {
            assert!(smooth_min_entropy(&sym.selected(&[c]), 0.5).unwrap() >= res.bound);
        }
    }
}
