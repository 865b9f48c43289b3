//! Downward-closed multi-index sets.

use std::collections::BTreeSet;

pub type MultiIndex = Vec<u16>;

/// Multi-indices in admission order plus a lookup set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    order: Vec<MultiIndex>,
    lookup: BTreeSet<MultiIndex>,
}

impl MultiIndexSet {
    /// The set `{0}`.
    pub fn root(dim: usize) -> Self {
        let zero = vec![0u16; dim];
        Self {
            dim,
            order: vec![zero.clone()],
            lookup: BTreeSet::from([zero]),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, a: &[u16]) -> bool {
        self.lookup.contains(a)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.order.iter()
    }

    pub fn get(&self, k: usize) -> &MultiIndex {
        &self.order[k]
    }

    pub fn max_order(&self) -> usize {
        self.order
            .iter()
            .flat_map(|a| a.iter())
            .copied()
            .max()
            .unwrap_or(0) as usize
    }

    /// True if every backward neighbour of `a` is a member.
    pub fn admissible(&self, a: &[u16]) -> bool {
        let mut b = a.to_vec();
        for k in 0..a.len() {
            if a[k] > 0 {
                b[k] -= 1;
                let ok = self.contains(&b);
                b[k] += 1;
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    /// Admissible forward neighbours not yet in the set, sorted.
    pub fn candidates(&self) -> Vec<MultiIndex> {
        let mut out = BTreeSet::new();
        for a in &self.order {
            for k in 0..self.dim {
                let mut b = a.clone();
                b[k] += 1;
                if !self.contains(&b) && self.admissible(&b) {
                    out.insert(b);
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn insert(&mut self, a: MultiIndex) -> bool {
        assert_eq!(a.len(), self.dim);
        if self.contains(&a) || !self.admissible(&a) {
            return false;
        }
        self.lookup.insert(a.clone());
        self.order.push(a);
        true
    }

    pub fn is_downward_closed(&self) -> bool {
        self.order.iter().all(|a| self.admissible(a))
    }

    /// Rebuilds a set from an admission order; `None` if the order is not
    /// admissible step by step.
    pub fn from_order(dim: usize, order: Vec<MultiIndex>) -> Option<Self> {
        let mut s = Self {
            dim,
            order: Vec::new(),
            lookup: BTreeSet::new(),
        };
        for a in order {
            if a.len() != dim {
                return None;
            }
            if s.order.is_empty() {
                if a.iter().any(|&v| v != 0) {
                    return None;
                }
                s.lookup.insert(a.clone());
                s.order.push(a);
            } else if !s.insert(a) {
                return None;
            }
        }
        Some(s)
    }
}
