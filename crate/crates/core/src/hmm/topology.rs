use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States on a ring: from state `i` the chain may stay in `i` or advance to
/// `(i + 1) mod N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircularTopology {
    num_states: usize,
}

impl CircularTopology {
    pub fn new(num_states: usize) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::arg("a circular topology needs at least one state"));
        }
        Ok(Self { num_states })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Legal successors per state: 2, or 1 for the single-state ring.
    pub fn branching(&self) -> usize {
        self.num_states.min(2)
    }

    pub fn legal_successors(&self, state: usize) -> Result<Vec<usize>> {
        self.check(state)?;
        Ok((0..self.branching())
            .map(|m| self.successor(state, m))
            .collect())
    }

    /// Successor reached by `mv` (0 = stay, 1 = advance).
    #[inline]
    pub fn successor(&self, state: usize, mv: usize) -> usize {
        (state + mv) % self.num_states
    }

    /// The move taking `from` to `to`, or `None` if the transition is illegal.
    #[inline]
    pub fn move_between(&self, from: usize, to: usize) -> Option<usize> {
        (0..self.branching()).find(|&m| self.successor(from, m) == to)
    }

    pub fn check(&self, state: usize) -> Result<()> {
        if state >= self.num_states {
            return Err(Error::StateOutOfRange {
                state,
                num_states: self.num_states,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successors() {
        let six = CircularTopology::new(6).unwrap();
        assert_eq!(six.legal_successors(5).unwrap(), vec![5, 0]);
        assert_eq!(six.legal_successors(2).unwrap(), vec![2, 3]);
        assert!(matches!(
            six.legal_successors(6),
            Err(Error::StateOutOfRange {
                state: 6,
                num_states: 6
            })
        ));
        let one = CircularTopology::new(1).unwrap();
        assert_eq!(one.legal_successors(0).unwrap(), vec![0]);
        assert!(CircularTopology::new(0).is_err());
    }

    #[test]
    fn legal_graph_is_single_cycle() {
        let topo = CircularTopology::new(5).unwrap();
        let mut s = 0;
        let mut visited = [false; 5];
        for _ in 0..5 {
            visited[s] = true;
            s = topo.successor(s, 1);
        }
        assert_eq!(s, 0);
        assert!(visited.iter().all(|&v| v));
        assert_eq!(topo.move_between(4, 0), Some(1));
        assert_eq!(topo.move_between(0, 2), None);
    }
}
