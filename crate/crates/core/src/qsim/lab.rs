//! Shared quantum world for protocol runs.
//!
//! Every live qubit has an owner. A party acts only through its own
//! [`LabPort`], which refuses to touch the other side's qubits. Subsystems are
//! kept as separate state vectors and merged only when a two-qubit gate spans
//! them.

use serde::{Deserialize, Serialize};

use super::state::{gate, Basis, Gate, StateVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sender,
    Receiver,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Sender => "sender",
            Side::Receiver => "receiver",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitId(usize);

#[derive(Clone, Debug)]
struct Slot {
    owner: Side,
    system: Option<usize>,
}

#[derive(Clone, Debug)]
struct Subsystem {
    state: StateVector,
    ids: Vec<QubitId>,
}

#[derive(Clone, Debug, Default)]
pub struct Lab {
    slots: Vec<Slot>,
    systems: Vec<Option<Subsystem>>,
}

impl Lab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an independent register; `owners[k]` owns qubit `k` of `state`.
    pub fn insert(&mut self, state: StateVector, owners: &[Side]) -> Result<Vec<QubitId>> {
        if owners.len() != state.qubits() {
            return Err(Error::QubitCount { expected: state.qubits(), found: owners.len() });
        }
        let sys = self.systems.len();
        let ids: Vec<QubitId> = owners
            .iter()
            .map(|&owner| {
                self.slots.push(Slot { owner, system: Some(sys) });
                QubitId(self.slots.len() - 1)
            })
            .collect();
        self.systems.push(Some(Subsystem { state, ids: ids.clone() }));
        Ok(ids)
    }

    pub fn port(&mut self, side: Side) -> LabPort<'_> {
        LabPort { lab: self, side }
    }

    pub fn owner(&self, q: QubitId) -> Option<Side> {
        self.slots.get(q.0).filter(|s| s.system.is_some()).map(|s| s.owner)
    }

    /// Hands an unmeasured qubit to the other party.
    pub fn transfer(&mut self, q: QubitId, to: Side) -> Result<()> {
        self.locate(q)?;
        self.slots[q.0].owner = to;
        Ok(())
    }

    /// Number of unmeasured qubits held by `side`.
    pub fn live(&self, side: Side) -> usize {
        self.slots.iter().filter(|s| s.owner == side && s.system.is_some()).count()
    }

    /// Storage checkpoint: at most `capacity` live qubits for `side`.
    pub fn checkpoint(&self, side: Side, capacity: usize) -> Result<()> {
        let live = self.live(side);
        if live > capacity {
            return Err(Error::StorageExceeded { live, capacity });
        }
        Ok(())
    }

    fn locate(&self, q: QubitId) -> Result<(usize, usize)> {
        let sys = self
            .slots
            .get(q.0)
            .and_then(|s| s.system)
            .ok_or(Error::QubitIndex { index: q.0, count: self.slots.len() })?;
        let pos = self.systems[sys].as_ref().expect("live system").ids.iter().position(|&i| i == q).expect("registered");
        Ok((sys, pos))
    }

    fn check_owner(&self, q: QubitId, side: Side) -> Result<()> {
        match self.slots.get(q.0) {
            Some(s) if s.system.is_some() && s.owner == side => Ok(()),
            Some(s) if s.system.is_some() => Err(Error::Ownership { qubit: q.0, side: side.name() }),
            _ => Err(Error::QubitIndex { index: q.0, count: self.slots.len() }),
        }
    }

    fn apply(&mut self, q: QubitId, g: &Gate) -> Result<()> {
        let (sys, pos) = self.locate(q)?;
        self.systems[sys].as_mut().expect("live system").state.apply(pos, g)
    }

    fn merge(&mut self, a: usize, b: usize) -> Result<usize> {
        if a == b {
            return Ok(a);
        }
        let sb = self.systems[b].take().expect("live system");
        let sa = self.systems[a].as_mut().expect("live system");
        sa.state = sa.state.tensor(&sb.state)?;
        for id in &sb.ids {
            self.slots[id.0].system = Some(a);
        }
        sa.ids.extend(sb.ids);
        Ok(a)
    }

    fn two_qubit(&mut self, c: QubitId, t: QubitId, cz: bool) -> Result<()> {
        let (sc, _) = self.locate(c)?;
        let (st, _) = self.locate(t)?;
        let sys = self.merge(sc, st)?;
        let (_, pc) = self.locate(c)?;
        let (_, pt) = self.locate(t)?;
        let state = &mut self.systems[sys].as_mut().expect("live system").state;
        if cz {
            state.cz(pc, pt)
        } else {
            state.cnot(pc, pt)
        }
    }

    fn measure(&mut self, q: QubitId, basis: Basis, sample: f64) -> Result<u8> {
        let (sys, pos) = self.locate(q)?;
        let sub = self.systems[sys].as_mut().expect("live system");
        let (outcome, post) = sub.state.measure_discard(pos, basis, sample)?;
        sub.ids.remove(pos);
        self.slots[q.0].system = None;
        if sub.ids.is_empty() {
            self.systems[sys] = None;
        } else {
            sub.state = post;
        }
        Ok(outcome)
    }

    /// Reduced state of a group of qubits that forms a whole subsystem.
    pub fn subsystem_state(&self, q: QubitId) -> Result<(Vec<QubitId>, StateVector)> {
        let (sys, _) = self.locate(q)?;
        let sub = self.systems[sys].as_ref().expect("live system");
        Ok((sub.ids.clone(), sub.state.clone()))
    }
}

/// One party's restricted view of the [`Lab`].
pub struct LabPort<'a> {
    lab: &'a mut Lab,
    side: Side,
}

impl LabPort<'_> {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn apply(&mut self, q: QubitId, g: &Gate) -> Result<()> {
        self.lab.check_owner(q, self.side)?;
        self.lab.apply(q, g)
    }

    pub fn h(&mut self, q: QubitId) -> Result<()> {
        self.apply(q, &gate::H)
    }

    pub fn cnot(&mut self, control: QubitId, target: QubitId) -> Result<()> {
        self.lab.check_owner(control, self.side)?;
        self.lab.check_owner(target, self.side)?;
        self.lab.two_qubit(control, target, false)
    }

    pub fn cz(&mut self, a: QubitId, b: QubitId) -> Result<()> {
        self.lab.check_owner(a, self.side)?;
        self.lab.check_owner(b, self.side)?;
        self.lab.two_qubit(a, b, true)
    }

    /// Measures and consumes a qubit.
    pub fn measure(&mut self, q: QubitId, basis: Basis, sample: f64) -> Result<u8> {
        self.lab.check_owner(q, self.side)?;
        self.lab.measure(q, basis, sample)
    }

    pub fn owns(&self, q: QubitId) -> bool {
        self.lab.owner(q) == Some(self.side)
    }

    pub fn live(&self) -> usize {
        self.lab.live(self.side)
    }
}
