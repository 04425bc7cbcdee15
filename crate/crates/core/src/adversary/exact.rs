//! Exact enumerations on tiny instances: the total-variation distance
//! between the sender's views under the two choice bits, and the
//! sender-security distance of a storage-free receiver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hashing::enumerate_family;
use crate::protocols::device::DeviceKind;
use crate::protocols::{run_protocol4, Protocol4Options, ProtocolConfig, ReceiverPolicy, SenderScript};
use crate::qsim::{make_bell, Basis, BellLabel};
use crate::rng::SeedTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub n: usize,
    pub script: SenderScript,
    pub device: DeviceKind,
    pub seed: u64,
    /// Challenge-type-b rounds, each carrying one override coin.
    pub coin_rounds: usize,
    /// Receiver randomness settings enumerated per choice bit.
    pub patterns: usize,
    pub distinct_views: usize,
    pub aborted_runs: usize,
    pub tv: f64,
}

/// Enumerates the choice bit and every override-coin pattern of an honest
/// receiver, with all other streams fixed by `seed`, and compares the
/// distributions of the sender-visible transcript.
pub fn receiver_security_tv(cfg: &ProtocolConfig, script: SenderScript, device: DeviceKind, seed: u64) -> Result<TvReport> {
    if cfg.n > 8 {
        return Err(Error::Config(format!("exact enumeration needs n <= 8, got {}", cfg.n)));
    }
    let tree = SeedTree::new(seed);
    let opts = |c: u8, coins: Vec<bool>| Protocol4Options { sender: script, device, forced_choice: Some(c), forced_overrides: Some(coins), ..Default::default() };
    let k = run_protocol4(cfg, &opts(0, vec![false; cfg.n]), tree)?.override_rounds;
    let patterns = 1usize << k;
    let mut counts: BTreeMap<String, [u64; 2]> = BTreeMap::new();
    let mut aborted_runs = 0;
    for c in 0..2u8 {
        for pattern in 0..patterns {
            let coins = (0..k).map(|j| pattern >> j & 1 == 1).collect();
            let run = run_protocol4(cfg, &opts(c, coins), tree)?;
            if run.override_rounds != k {
                return Err(Error::Malformed("coin rounds depend on the receiver".into()));
            }
            aborted_runs += usize::from(run.outcome.aborted);
            let view = serde_json::to_string(&run.transcript.sender_view()).expect("plain data");
            counts.entry(view).or_default()[usize::from(c)] += 1;
        }
    }
    let diff: u64 = counts.values().map(|[a, b]| a.abs_diff(*b)).sum();
    Ok(TvReport {
        n: cfg.n,
        script,
        device,
        seed,
        coin_rounds: k,
        patterns,
        distinct_views: counts.len(),
        aborted_runs,
        tv: diff as f64 / (2 * patterns) as f64,
    })
}

/// `P(a, b)` for a labelled Bell pair measured in `(x, y)`, index `2a + b`.
fn bell_outcomes(label: BellLabel, x: Basis, y: Basis) -> Result<Vec<f64>> {
    make_bell(label).outcome_distribution(&[x, y])
}

fn labels() -> Vec<BellLabel> {
    BellLabel::all().to_vec()
}

/// Total-variation distance between the sender's views of the Bell-pair
/// protocol (its labels, bases and outcomes) for an honest receiver with
/// `c = 0` against `c = 1`, by exact enumeration over `n` rounds.
pub fn protocol1_receiver_tv(n: usize) -> Result<f64> {
    if n == 0 || n > 6 {
        return Err(Error::Config(format!("exact enumeration needs 1 <= n <= 6, got {n}")));
    }
    // per round: cells (v_alpha, x, a)
    let mut per_round = [[0.0f64; 8]; 2];
    for c in 0..2u8 {
        let y = Basis::from_bit(c);
        for label in labels() {
            for x in [Basis::Computational, Basis::Hadamard] {
                let p = bell_outcomes(label, x, y)?;
                for a in 0..2usize {
                    let cell = usize::from(label.v_alpha) * 4 + usize::from(x.bit()) * 2 + a;
                    per_round[usize::from(c)][cell] += 0.25 * 0.5 * (p[2 * a] + p[2 * a + 1]);
                }
            }
        }
    }
    let cells = 8usize.pow(n as u32);
    let mut tv = 0.0;
    for v in 0..cells {
        let (mut p0, mut p1, mut rest) = (1.0, 1.0, v);
        for _ in 0..n {
            p0 *= per_round[0][rest % 8];
            p1 *= per_round[1][rest % 8];
            rest /= 8;
        }
        tv += (p0 - p1).abs();
    }
    Ok(tv / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenderSecurityExact {
    pub n: usize,
    pub l: usize,
    pub policy: ReceiverPolicy,
    /// `D(rho_{S_{1-C'} S_{C'} C' R}, 2^-l 1 (x) rho_{S_{C'} C' R})` with the
    /// best `C'` chosen per receiver view.
    pub distance: f64,
}

/// Exact sender-security distance of the Bell-pair protocol against a
/// receiver with no quantum storage measuring by `policy`. The receiver's
/// view is `(c, x, y, v^beta, b, f_0, f_1)`; the choice bit is uniform.
pub fn sender_security_exact(n: usize, l: usize, policy: ReceiverPolicy) -> Result<SenderSecurityExact> {
    if n == 0 || n > 4 || l == 0 || l > n || n * l > 6 {
        return Err(Error::Config(format!("exact sender security needs n <= 4 and n l <= 6, got n={n} l={l}")));
    }
    let family = enumerate_family(n, l)?;
    // out[f][u] = f applied to the low bits of u, bit j at input position j
    let out: Vec<Vec<usize>> = family
        .iter()
        .map(|f| {
            (0..1usize << n)
                .map(|u| {
                    let input = BitString::from_bits((0..n).map(|j| u >> j & 1 == 1).collect());
                    f.apply(&input).map(|s| s.to_uint() as usize)
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let fam_weight = 1.0 / (family.len() * family.len()) as f64;

    // round[c][combo][a~] with combo = (x, y, v_beta, b) packed as 4 bits
    let mut round = [[[0.0f64; 2]; 16]; 2];
    for c in 0..2u8 {
        for x in [Basis::Computational, Basis::Hadamard] {
            for y in [Basis::Computational, Basis::Hadamard] {
                let py = match policy {
                    ReceiverPolicy::RandomBases => 0.5,
                    ReceiverPolicy::Computational => f64::from(u8::from(y == Basis::Computational)),
                    ReceiverPolicy::ChoiceBasis => f64::from(u8::from(y == Basis::from_bit(c))),
                };
                if py == 0.0 {
                    continue;
                }
                for label in labels() {
                    let p = bell_outcomes(label, x, y)?;
                    let w_alpha = if x == Basis::Hadamard { label.v_alpha } else { 0 };
                    for a in 0..2u8 {
                        for b in 0..2u8 {
                            let combo = usize::from(x.bit()) << 3 | usize::from(y.bit()) << 2 | usize::from(label.v_beta) << 1 | usize::from(b);
                            round[usize::from(c)][combo][usize::from(a ^ w_alpha)] += 0.5 * py * 0.25 * p[usize::from(2 * a + b)];
                        }
                    }
                }
            }
        }
    }

    let strings = 1usize << n;
    let outs = 1usize << l;
    let mut distance = 0.0;
    let mut weights = vec![0.0f64; strings];
    let mut joint = vec![0.0f64; outs * outs];
    for c in 0..2usize {
        for view in 0..16usize.pow(n as u32) {
            let combos: Vec<usize> = (0..n).map(|i| view >> (4 * i) & 15).collect();
            for (u, w) in weights.iter_mut().enumerate() {
                *w = 0.5 * combos.iter().enumerate().map(|(i, &k)| round[c][k][u >> i & 1]).product::<f64>();
            }
            if weights.iter().all(|&w| w == 0.0) {
                continue;
            }
            // selection of a~ onto I_0 (x = C) and I_1 (x = H), packed from bit 0
            let xs: Vec<bool> = combos.iter().map(|k| k >> 3 & 1 == 1).collect();
            let packed: Vec<(usize, usize)> = (0..strings)
                .map(|u| {
                    let (mut s0, mut s1, mut j0, mut j1) = (0, 0, 0, 0);
                    for (i, &h) in xs.iter().enumerate() {
                        let bit = u >> i & 1;
                        if h {
                            s1 |= bit << j1;
                            j1 += 1;
                        } else {
                            s0 |= bit << j0;
                            j0 += 1;
                        }
                    }
                    (s0, s1)
                })
                .collect();
            for f0 in &out {
                for f1 in &out {
                    joint.iter_mut().for_each(|j| *j = 0.0);
                    for (u, &(s0, s1)) in packed.iter().enumerate() {
                        joint[f0[s0] * outs + f1[s1]] += weights[u];
                    }
                    let mut best = f64::INFINITY;
                    for keep in 0..2 {
                        // keep = C'; S_{1-C'} is compared against uniform
                        let mut d = 0.0;
                        for kept in 0..outs {
                            let cell = |other: usize| if keep == 0 { joint[kept * outs + other] } else { joint[other * outs + kept] };
                            let marginal: f64 = (0..outs).map(cell).sum();
                            d += (0..outs).map(|other| (cell(other) - marginal / outs as f64).abs()).sum::<f64>();
                        }
                        best = best.min(d / 2.0);
                    }
                    distance += fam_weight * best;
                }
            }
        }
    }
    Ok(SenderSecurityExact { n, l, policy, distance })
}
