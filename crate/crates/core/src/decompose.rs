//! Split a factor graph into an acyclic spanning factor set and a
//! loop-closing remainder.
//!
//! Priors seed the acyclic set. Remaining factors are drained from a FIFO
//! queue in insertion order: a factor over more than two variables, or whose
//! variables are all already covered, closes a loop; a factor with exactly one
//! covered variable extends the acyclic set by its other variable; a factor
//! with no covered variable goes back to the tail of the queue.

use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::{FactorGraph, FactorId, GraphError, VariableId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("variables not reachable from any prior through unary or binary factors: {}", join(.0))]
    Unreachable(Vec<VariableId>),
}

fn join(ids: &[VariableId]) -> String {
    ids.iter().map(VariableId::as_str).collect::<Vec<_>>().join(", ")
}

/// Factor ids of the acyclic (`ac`) and loop-closing (`lc`) sets.
///
/// `ac` is in ancestral order: every factor in it introduces exactly one
/// variable not touched by the factors before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub ac: Vec<FactorId>,
    pub lc: Vec<FactorId>,
}

impl Decomposition {
    pub fn contains_ac(&self, id: FactorId) -> bool {
        self.ac.contains(&id)
    }
}

pub fn decompose(g: &FactorGraph) -> Result<Decomposition, DecomposeError> {
    g.ensure_anchored()?;
    let mut covered = vec![false; g.variables().len()];
    let mut ac = Vec::new();
    let mut lc = Vec::new();

    for f in g.factors().iter().filter(|f| f.kind.is_prior()) {
        let v = f.vars[0];
        if covered[v] {
            lc.push(f.id);
        } else {
            covered[v] = true;
            ac.push(f.id);
        }
    }

    let mut queue: VecDeque<usize> = g
        .factors()
        .iter()
        .filter(|f| !f.kind.is_prior())
        .map(|f| f.id.0)
        .collect();
    let mut stalled = 0;
    while let Some(i) = queue.pop_front() {
        let f = &g.factors()[i];
        if f.arity() > 2 {
            lc.push(f.id);
            stalled = 0;
            continue;
        }
        let (a, b) = (f.vars[0], f.vars[1]);
        match (covered[a], covered[b]) {
            (true, true) => {
                lc.push(f.id);
                stalled = 0;
            }
            (true, false) | (false, true) => {
                covered[a] = true;
                covered[b] = true;
                ac.push(f.id);
                stalled = 0;
            }
            (false, false) => {
                queue.push_back(i);
                stalled += 1;
                if stalled >= queue.len() {
                    break;
                }
            }
        }
    }

    let orphans: Vec<VariableId> = covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| !c)
        .map(|(i, _)| g.var_name(i).clone())
        .collect();
    if !orphans.is_empty() {
        return Err(DecomposeError::Unreachable(orphans));
    }
    Ok(Decomposition { ac, lc })
}
