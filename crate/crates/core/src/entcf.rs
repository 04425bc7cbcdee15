//! A toy trapdoor claw-free family that can be checked exhaustively.
//!
//! Domain: `m`-bit strings. Codomain: `(m+1)`-bit strings for both families,
//! scrambled by a secret permutation `sigma`, so the width of an image never
//! reveals the family.
//!
//! * claw-free: `f_0(x) = sigma(0 || pi(x))`, `f_1(x) = sigma(0 || pi(delta(x)))`
//!   with `delta` a fixed-point-free permutation, so every image point has a
//!   claw `(x_0, x_1)` with `x_0 != x_1`.
//! * injective: `f_b(x) = sigma(b || pi_b(x))`.
//!
//! Tables are rebuilt from three seeds, which are the whole trapdoor.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::qsim::{Basis, StateVector, C64};
use crate::rng::StreamRng;

pub const MIN_DOMAIN_BITS: usize = 2;
pub const MAX_DOMAIN_BITS: usize = 10;

const MAGIC: &[u8; 4] = b"ENTC";
const BLOB_VERSION: u8 = 1;
const BLOB_LEN: usize = 4 + 1 + 1 + 1 + 24;
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ClawFree,
    Injective,
}

impl Family {
    /// Computational selects the injective family, Hadamard the claw-free one.
    pub fn for_basis(theta: Basis) -> Family {
        match theta {
            Basis::Computational => Family::Injective,
            Basis::Hadamard => Family::ClawFree,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::ClawFree => "claw_free",
            Family::Injective => "injective",
        }
    }
}

/// Challenge type sent to a device component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChallengeType {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
}

impl ChallengeType {
    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            ChallengeType::A
        } else {
            ChallengeType::B
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct KeyId([u8; 16]);

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyId({self})")
    }
}

impl From<KeyId> for String {
    fn from(id: KeyId) -> String {
        id.to_string()
    }
}

impl TryFrom<String> for KeyId {
    type Error = Error;

    fn try_from(s: String) -> Result<KeyId> {
        let bytes = hex::decode(&s).map_err(|e| Error::Parse(format!("key id: {e}")))?;
        let arr: [u8; 16] = bytes.try_into().map_err(|_| Error::Parse(format!("key id {s} has wrong length")))?;
        Ok(KeyId(arr))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Seeds {
    sigma: u64,
    pi0: u64,
    pi1: u64,
}

#[derive(Debug)]
struct Tables {
    m: usize,
    /// `forward[b][x]`
    forward: [Vec<u32>; 2],
    /// `inverse[b][y]`, `NONE` off the image of `f_b`
    inverse: [Vec<u32>; 2],
}

fn shuffled(n: usize, seed: u64) -> Vec<u32> {
    let mut v: Vec<u32> = (0..n as u32).collect();
    v.shuffle(&mut StreamRng::seed_from_u64(seed));
    v
}

/// Sattolo's algorithm: a uniformly random single cycle, hence no fixed points.
fn cyclic(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = StreamRng::seed_from_u64(seed);
    let mut v: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..i);
        v.swap(i, j);
    }
    v
}

impl Tables {
    fn build(family: Family, m: usize, seeds: Seeds) -> Tables {
        let dom = 1usize << m;
        let sigma = shuffled(2 * dom, seeds.sigma);
        let pi0 = shuffled(dom, seeds.pi0);
        let (f0, f1): (Vec<u32>, Vec<u32>) = match family {
            Family::ClawFree => {
                let delta = cyclic(dom, seeds.pi1);
                let f0 = (0..dom).map(|x| sigma[pi0[x] as usize]).collect();
                let f1 = (0..dom).map(|x| sigma[pi0[delta[x] as usize] as usize]).collect();
                (f0, f1)
            }
            Family::Injective => {
                let pi1 = shuffled(dom, seeds.pi1);
                let f0 = (0..dom).map(|x| sigma[pi0[x] as usize]).collect();
                let f1 = (0..dom).map(|x| sigma[dom + pi1[x] as usize]).collect();
                (f0, f1)
            }
        };
        let mut inverse = [vec![NONE; 2 * dom], vec![NONE; 2 * dom]];
        for (b, table) in [&f0, &f1].into_iter().enumerate() {
            for (x, &y) in table.iter().enumerate() {
                inverse[b][y as usize] = x as u32;
            }
        }
        Tables { m, forward: [f0, f1], inverse }
    }

    fn preimage(&self, b: u8, y: u64) -> Option<u64> {
        let v = *self.inverse[usize::from(b & 1)].get(y as usize)?;
        (v != NONE).then_some(u64::from(v))
    }
}

fn key_id(family: Family, m: usize, seeds: Seeds) -> KeyId {
    let mut h = Sha256::new();
    h.update(b"entcf-key");
    h.update([family as u8, m as u8]);
    for s in [seeds.sigma, seeds.pi0, seeds.pi1] {
        h.update(s.to_le_bytes());
    }
    let digest = h.finalize();
    let mut id = [0u8; 16];
    id.copy_from_slice(&digest[..16]);
    KeyId(id)
}

/// Evaluation access only; carries no family tag.
#[derive(Clone)]
pub struct PublicKey {
    id: KeyId,
    tables: Arc<Tables>,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}, m={})", self.id, self.tables.m)
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl PublicKey {
    pub fn id(&self) -> KeyId {
        self.id
    }

    pub fn domain_bits(&self) -> usize {
        self.tables.m
    }

    pub fn image_bits(&self) -> usize {
        self.tables.m + 1
    }

    pub fn eval(&self, b: u8, x: &BitString) -> Result<BitString> {
        if x.len() != self.tables.m {
            return Err(Error::Length { expected: self.tables.m, found: x.len() });
        }
        Ok(BitString::from_uint(self.eval_index(b, x.to_uint()), self.image_bits()))
    }

    /// `f_b(x)` on integer encodings.
    pub fn eval_index(&self, b: u8, x: u64) -> u64 {
        u64::from(self.tables.forward[usize::from(b & 1)][x as usize])
    }
}

/// Secret inversion data for one key.
#[derive(Clone)]
pub struct Trapdoor {
    family: Family,
    seeds: Seeds,
    key: PublicKey,
}

impl fmt::Debug for Trapdoor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Trapdoor({}, {:?})", self.key.id, self.family)
    }
}

impl PartialEq for Trapdoor {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.seeds == other.seeds && self.key.tables.m == other.key.tables.m
    }
}

impl Trapdoor {
    fn new(family: Family, m: usize, seeds: Seeds) -> Trapdoor {
        let tables = Arc::new(Tables::build(family, m, seeds));
        Trapdoor { family, seeds, key: PublicKey { id: key_id(family, m, seeds), tables } }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.key
    }

    pub fn key_id(&self) -> KeyId {
        self.key.id
    }

    pub fn domain_bits(&self) -> usize {
        self.key.tables.m
    }

    fn check_y(&self, y: &BitString) -> Result<u64> {
        if y.len() != self.key.image_bits() {
            return Err(Error::Length { expected: self.key.image_bits(), found: y.len() });
        }
        Ok(y.to_uint())
    }

    fn expect(&self, family: Family) -> Result<()> {
        if self.family != family {
            return Err(Error::WrongFamily { expected: family.name(), found: self.family.name() });
        }
        Ok(())
    }

    /// The claw `(x_0, x_1)` above `y`.
    pub fn invert_claw(&self, y: &BitString) -> Result<(BitString, BitString)> {
        self.expect(Family::ClawFree)?;
        let v = self.check_y(y)?;
        let t = &self.key.tables;
        match (t.preimage(0, v), t.preimage(1, v)) {
            (Some(x0), Some(x1)) => Ok((BitString::from_uint(x0, t.m), BitString::from_uint(x1, t.m))),
            _ => Err(Error::NotInImage(v)),
        }
    }

    /// The unique `(b, x)` with `f_b(x) = y`.
    pub fn invert_injective(&self, y: &BitString) -> Result<(u8, BitString)> {
        self.expect(Family::Injective)?;
        let v = self.check_y(y)?;
        let t = &self.key.tables;
        match (t.preimage(0, v), t.preimage(1, v)) {
            (Some(x), None) => Ok((0, BitString::from_uint(x, t.m))),
            (None, Some(x)) => Ok((1, BitString::from_uint(x, t.m))),
            _ => Err(Error::NotInImage(v)),
        }
    }

    /// `d . (x_0 xor x_1)` for the claw above `y`.
    pub fn hardcore_bit(&self, y: &BitString, d: &BitString) -> Result<u8> {
        let (x0, x1) = self.invert_claw(y)?;
        if d.len() != x0.len() {
            return Err(Error::Length { expected: x0.len(), found: d.len() });
        }
        Ok(d.dot(&x0.xor(&x1)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BLOB_LEN);
        out.extend_from_slice(MAGIC);
        out.push(BLOB_VERSION);
        out.push(self.key.tables.m as u8);
        out.push(match self.family {
            Family::ClawFree => 0,
            Family::Injective => 1,
        });
        for s in [self.seeds.sigma, self.seeds.pi0, self.seeds.pi1] {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Trapdoor> {
        if bytes.len() != BLOB_LEN {
            return Err(Error::Malformed(format!("trapdoor blob of {} bytes", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Malformed("bad trapdoor magic".into()));
        }
        if bytes[4] != BLOB_VERSION {
            return Err(Error::Version { expected: u32::from(BLOB_VERSION), found: u32::from(bytes[4]) });
        }
        let m = usize::from(bytes[5]);
        check_domain_bits(m)?;
        let family = match bytes[6] {
            0 => Family::ClawFree,
            1 => Family::Injective,
            f => return Err(Error::Malformed(format!("family tag {f}"))),
        };
        let word = |i: usize| u64::from_le_bytes(bytes[7 + 8 * i..15 + 8 * i].try_into().expect("8 bytes"));
        Ok(Trapdoor::new(family, m, Seeds { sigma: word(0), pi0: word(1), pi1: word(2) }))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Trapdoor> {
        let bytes = hex::decode(text).map_err(|e| Error::Parse(format!("trapdoor hex: {e}")))?;
        Trapdoor::from_bytes(&bytes)
    }
}

/// A key with its trapdoor.
#[derive(Clone, Debug, PartialEq)]
pub struct EntcfKeyPair {
    pub key: PublicKey,
    pub trapdoor: Trapdoor,
}

impl EntcfKeyPair {
    pub fn family(&self) -> Family {
        self.trapdoor.family
    }

    pub fn domain_bits(&self) -> usize {
        self.key.domain_bits()
    }
}

fn check_domain_bits(m: usize) -> Result<()> {
    if !(MIN_DOMAIN_BITS..=MAX_DOMAIN_BITS).contains(&m) {
        return Err(Error::DomainBits(m));
    }
    Ok(())
}

/// Draws a key pair of the family selected by `theta`.
pub fn keygen<R: RngCore + ?Sized>(theta: Basis, domain_bits: usize, rng: &mut R) -> Result<EntcfKeyPair> {
    keygen_family(Family::for_basis(theta), domain_bits, rng)
}

pub fn keygen_family<R: RngCore + ?Sized>(family: Family, domain_bits: usize, rng: &mut R) -> Result<EntcfKeyPair> {
    check_domain_bits(domain_bits)?;
    let seeds = Seeds { sigma: rng.next_u64(), pi0: rng.next_u64(), pi1: rng.next_u64() };
    let trapdoor = Trapdoor::new(family, domain_bits, seeds);
    Ok(EntcfKeyPair { key: trapdoor.key.clone(), trapdoor })
}

/// Trapdoors indexed by key id.
#[derive(Clone, Debug, Default)]
pub struct KeyRegistry {
    entries: HashMap<KeyId, Trapdoor>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, trapdoor: Trapdoor) -> KeyId {
        let id = trapdoor.key_id();
        self.entries.insert(id, trapdoor);
        id
    }

    pub fn trapdoor(&self, id: KeyId) -> Result<&Trapdoor> {
        self.entries.get(&id).ok_or_else(|| Error::UnknownKey(id.to_string()))
    }

    pub fn eval(&self, id: KeyId, b: u8, x: &BitString) -> Result<BitString> {
        self.trapdoor(id)?.key.eval(b, x)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Collapses the honest superposition `sum_{b,x} |b>|x>|f_b(x)>` by
/// measuring the image register. Qubit 0 of the residual holds `b`, the rest
/// hold `x` most significant first. Uses only public evaluation.
pub fn honest_device_prepare(key: &PublicKey, sample: f64) -> Result<(BitString, StateVector)> {
    let m = key.domain_bits();
    check_domain_bits(m)?;
    let mut preimages: HashMap<u64, Vec<u64>> = HashMap::new();
    for b in 0..2u8 {
        for x in 0..1u64 << m {
            preimages.entry(key.eval_index(b, x)).or_default().push((u64::from(b) << m) | x);
        }
    }
    let mut images: Vec<u64> = preimages.keys().copied().collect();
    images.sort_unstable();
    let total = (2u64 << m) as f64;
    let mut acc = 0.0;
    let mut chosen = *images.last().expect("nonempty image");
    for y in &images {
        acc += preimages[y].len() as f64 / total;
        if sample < acc {
            chosen = *y;
            break;
        }
    }
    let support = &preimages[&chosen];
    let amp = C64::new(1.0 / (support.len() as f64).sqrt(), 0.0);
    let mut amps = vec![C64::new(0.0, 0.0); 2 << m];
    for &i in support {
        amps[i as usize] = amp;
    }
    Ok((BitString::from_uint(chosen, m + 1), StateVector::from_amplitudes(amps)?))
}

/// Device answer to a challenge.
#[derive(Clone, Debug, PartialEq)]
pub enum ChallengeResponse {
    /// Full computational readout `z = (z_1, z_r)`.
    Preimage { z: BitString },
    /// Hadamard readout `d` of the `x` register; qubit `b` is retained.
    Equation { d: BitString, retained: StateVector },
}

pub fn honest_device_challenge<R: Rng + ?Sized>(
    residual: &StateVector,
    ct: ChallengeType,
    rng: &mut R,
) -> Result<ChallengeResponse> {
    let n = residual.qubits();
    if n < 2 {
        return Err(Error::QubitCount { expected: 2, found: n });
    }
    let basis = match ct {
        ChallengeType::A => Basis::Computational,
        ChallengeType::B => Basis::Hadamard,
    };
    let first = usize::from(ct == ChallengeType::B);
    let mut state = residual.clone();
    let mut out = BitString::zeros(0);
    // always measure the current qubit at `first`: earlier ones are discarded
    for _ in first..n {
        let (o, post) = state.measure_discard(first, basis, rng.random::<f64>())?;
        out.push(o == 1);
        state = post;
    }
    Ok(match ct {
        ChallengeType::A => ChallengeResponse::Preimage { z: out },
        ChallengeType::B => ChallengeResponse::Equation { d: out, retained: state },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::FIDELITY_TOL;
    use std::collections::HashSet;

    fn rng(seed: u64) -> StreamRng {
        StreamRng::seed_from_u64(seed)
    }

    fn all_inputs(m: usize) -> impl Iterator<Item = BitString> {
        (0..1u64 << m).map(move |x| BitString::from_uint(x, m))
    }

    #[test]
    fn family_follows_basis() {
        let mut r = rng(1);
        for i in 0..1000 {
            let theta = Basis::from_bit((i % 2) as u8);
            let kp = keygen(theta, 4, &mut r).unwrap();
            assert_eq!(kp.family(), Family::for_basis(theta));
        }
    }

    #[test]
    fn claw_free_pairs_are_bijections_with_common_image() {
        for m in 2..=4 {
            let kp = keygen(Basis::Hadamard, m, &mut rng(m as u64)).unwrap();
            let img0: HashSet<_> = all_inputs(m).map(|x| kp.key.eval(0, &x).unwrap()).collect();
            let img1: HashSet<_> = all_inputs(m).map(|x| kp.key.eval(1, &x).unwrap()).collect();
            assert_eq!(img0.len(), 1 << m);
            assert_eq!(img0, img1);
            for y in &img0 {
                let (x0, x1) = kp.trapdoor.invert_claw(y).unwrap();
                assert_ne!(x0, x1);
                assert_eq!(&kp.key.eval(0, &x0).unwrap(), y);
                assert_eq!(&kp.key.eval(1, &x1).unwrap(), y);
            }
        }
    }

    #[test]
    fn injective_pairs_have_disjoint_images() {
        for m in 2..=4 {
            let kp = keygen(Basis::Computational, m, &mut rng(10 + m as u64)).unwrap();
            let img0: HashSet<_> = all_inputs(m).map(|x| kp.key.eval(0, &x).unwrap()).collect();
            let img1: HashSet<_> = all_inputs(m).map(|x| kp.key.eval(1, &x).unwrap()).collect();
            assert_eq!(img0.len(), 1 << m);
            assert_eq!(img1.len(), 1 << m);
            assert!(img0.is_disjoint(&img1));
            for (b, img) in [(0u8, &img0), (1, &img1)] {
                for y in img {
                    let (bb, x) = kp.trapdoor.invert_injective(y).unwrap();
                    assert_eq!(bb, b);
                    assert_eq!(&kp.key.eval(b, &x).unwrap(), y);
                }
            }
        }
    }

    #[test]
    fn inversion_errors() {
        let claw = keygen(Basis::Hadamard, 4, &mut rng(3)).unwrap();
        let inj = keygen(Basis::Computational, 4, &mut rng(4)).unwrap();
        let outside = (0..32).map(|v| BitString::from_uint(v, 5)).find(|y| claw.trapdoor.invert_claw(y).is_err()).unwrap();
        assert!(matches!(claw.trapdoor.invert_claw(&outside), Err(Error::NotInImage(_))));
        assert!(matches!(claw.trapdoor.invert_injective(&outside), Err(Error::WrongFamily { .. })));
        assert!(matches!(inj.trapdoor.invert_claw(&outside), Err(Error::WrongFamily { .. })));
        assert!(inj.trapdoor.invert_injective(&BitString::zeros(3)).is_err());
        assert!(keygen(Basis::Hadamard, 1, &mut rng(0)).is_err());
        assert!(keygen(Basis::Hadamard, 11, &mut rng(0)).is_err());
    }

    #[test]
    fn distinct_randomness_distinct_ids() {
        let mut r = rng(5);
        let ids: HashSet<_> = (0..500).map(|_| keygen(Basis::Hadamard, 3, &mut r).unwrap().key.id()).collect();
        assert_eq!(ids.len(), 500);
    }

    #[test]
    fn hardcore_bit_examples() {
        let mut r = rng(6);
        let kp = keygen(Basis::Hadamard, 6, &mut r).unwrap();
        for _ in 0..100 {
            let y = kp.key.eval(0, &BitString::from_uint(r.random_range(0..64), 6)).unwrap();
            let d = BitString::from_uint(r.random_range(0..64), 6);
            let (x0, x1) = kp.trapdoor.invert_claw(&y).unwrap();
            let expect = x0.iter().zip(x1.iter()).zip(d.iter()).filter(|((a, b), c)| (a != b) && *c).count() % 2;
            assert_eq!(kp.trapdoor.hardcore_bit(&y, &d).unwrap() as usize, expect);
            assert_eq!(kp.trapdoor.hardcore_bit(&y, &BitString::zeros(6)).unwrap(), 0);
            for i in 0..6 {
                let mut e = BitString::zeros(6);
                e.set(i, true);
                assert_eq!(kp.trapdoor.hardcore_bit(&y, &e).unwrap(), x0.bit(i) ^ x1.bit(i));
            }
        }
    }

    #[test]
    fn hardcore_bit_is_balanced_over_d() {
        // x0 != x1 makes d -> d.(x0^x1) a nonzero linear form: exactly balanced
        let kp = keygen(Basis::Hadamard, 6, &mut rng(7)).unwrap();
        let y = kp.key.eval(0, &BitString::from_uint(17, 6)).unwrap();
        let ones: usize = all_inputs(6).map(|d| kp.trapdoor.hardcore_bit(&y, &d).unwrap() as usize).sum();
        assert_eq!(ones, 32);
    }

    #[test]
    fn blob_round_trip() {
        let kp = keygen(Basis::Computational, 5, &mut rng(8)).unwrap();
        let t = Trapdoor::from_hex(&kp.trapdoor.to_hex()).unwrap();
        assert_eq!(t, kp.trapdoor);
        assert_eq!(t.key_id(), kp.key.id());
        let mut bad = kp.trapdoor.to_bytes();
        bad[0] = b'X';
        assert!(Trapdoor::from_bytes(&bad).is_err());
        let mut bad = kp.trapdoor.to_bytes();
        bad[4] = 9;
        assert!(matches!(Trapdoor::from_bytes(&bad), Err(Error::Version { .. })));
        assert!(Trapdoor::from_bytes(&bad[..10]).is_err());
    }

    #[test]
    fn registry_lookup() {
        let kp = keygen(Basis::Hadamard, 4, &mut rng(9)).unwrap();
        let mut reg = KeyRegistry::new();
        let other = keygen(Basis::Hadamard, 4, &mut rng(10)).unwrap();
        assert!(matches!(reg.eval(other.key.id(), 0, &BitString::zeros(4)), Err(Error::UnknownKey(_))));
        let id = reg.insert(kp.trapdoor.clone());
        let x = BitString::from_uint(3, 4);
        assert_eq!(reg.eval(id, 1, &x).unwrap(), kp.key.eval(1, &x).unwrap());
        assert_eq!(kp.key.eval(1, &x).unwrap(), kp.key.eval(1, &x).unwrap());
    }

    /// Full `(m+1) + (m+1)`-qubit register, image measured by projection.
    fn register_oracle(key: &PublicKey, c: &BitString) -> StateVector {
        let m = key.domain_bits();
        let n = 2 * m + 2;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        for b in 0..2u8 {
            for x in 0..1u64 << m {
                let idx = ((((u64::from(b) << m) | x) << (m + 1)) | key.eval_index(b, x)) as usize;
                amps[idx] = C64::new(1.0, 0.0);
            }
        }
        let full = StateVector::normalized(amps).unwrap();
        let image_qubits: Vec<usize> = (m + 1..n).collect();
        let post = full.project_out(&image_qubits, &(0..m + 1).map(|i| c.bit(i)).collect::<Vec<_>>()).unwrap();
        let norm = post.norm_sqr().sqrt();
        StateVector::from_amplitudes(post.amplitudes().iter().map(|a| a / norm).collect()).unwrap()
    }

    #[test]
    fn prepare_matches_register_simulation() {
        let mut r = rng(11);
        for m in 2..=4 {
            for theta in Basis::ALL {
                let kp = keygen(theta, m, &mut r).unwrap();
                for _ in 0..10 {
                    let (c, residual) = honest_device_prepare(&kp.key, r.random()).unwrap();
                    let oracle = register_oracle(&kp.key, &c);
                    assert!(residual.fidelity(&oracle).unwrap() >= 1.0 - FIDELITY_TOL);
                    match kp.family() {
                        Family::ClawFree => {
                            let (x0, x1) = kp.trapdoor.invert_claw(&c).unwrap();
                            let i0 = x0.to_uint() as usize;
                            let i1 = (1 << m) | x1.to_uint() as usize;
                            assert!((residual.amplitude(i0).norm_sqr() - 0.5).abs() < 1e-10);
                            assert!((residual.amplitude(i1).norm_sqr() - 0.5).abs() < 1e-10);
                        }
                        Family::Injective => {
                            let (b, x) = kp.trapdoor.invert_injective(&c).unwrap();
                            let i = ((b as usize) << m) | x.to_uint() as usize;
                            assert!((residual.amplitude(i).norm_sqr() - 1.0).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn challenge_responses() {
        let mut r = rng(12);
        for _ in 0..50 {
            for theta in Basis::ALL {
                let kp = keygen(theta, 4, &mut r).unwrap();
                let (c, residual) = honest_device_prepare(&kp.key, r.random()).unwrap();
                let ChallengeResponse::Preimage { z } = honest_device_challenge(&residual, ChallengeType::A, &mut r).unwrap() else {
                    panic!("expected preimage");
                };
                assert_eq!(kp.key.eval(z.bit(0), &z.select(&[1, 2, 3, 4])).unwrap(), c);
                let ChallengeResponse::Equation { d, retained } = honest_device_challenge(&residual, ChallengeType::B, &mut r).unwrap() else {
                    panic!("expected equation");
                };
                assert_eq!(d.len(), 4);
                let expected = match kp.family() {
                    Family::ClawFree => StateVector::eigenstate(Basis::Hadamard, kp.trapdoor.hardcore_bit(&c, &d).unwrap()),
                    Family::Injective => StateVector::eigenstate(Basis::Computational, kp.trapdoor.invert_injective(&c).unwrap().0),
                };
                assert!(retained.fidelity(&expected).unwrap() >= 1.0 - FIDELITY_TOL);
            }
        }
    }
}
