use super::Domain;
use crate::compiler::VarId;

/// Current domains plus an undo trail.
#[derive(Debug, Clone)]
pub struct VarStore {
    doms: Vec<Domain>,
    trail: Vec<(usize, Domain)>,
}

/// A domain became empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inconsistent;

impl VarStore {
    pub fn new(doms: Vec<Domain>) -> Self {
        VarStore { doms, trail: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.doms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doms.is_empty()
    }

    pub fn dom(&self, v: VarId) -> &Domain {
        &self.doms[v.0]
    }

    pub fn domains(&self) -> &[Domain] {
        &self.doms
    }

    pub fn value(&self, v: VarId) -> Option<i64> {
        self.doms[v.0].value()
    }

    pub fn all_assigned(&self) -> bool {
        self.doms.iter().all(Domain::is_singleton)
    }

    /// Replaces the domain of `v`, recording the old one. Returns whether it changed.
    pub fn set(&mut self, v: VarId, d: Domain) -> Result<bool, Inconsistent> {
        if d.is_empty() {
            return Err(Inconsistent);
        }
        if self.doms[v.0] == d {
            return Ok(false);
        }
        let old = std::mem::replace(&mut self.doms[v.0], d);
        self.trail.push((v.0, old));
        Ok(true)
    }

    /// Intersects the domain of `v` with `d`.
    pub fn restrict(&mut self, v: VarId, d: &Domain) -> Result<bool, Inconsistent> {
        let next = self.doms[v.0].intersect(d);
        self.set(v, next)
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn restore(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, d) = self.trail.pop().expect("trail longer than mark");
            self.doms[v] = d;
        }
    }
}
