use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of conventional states into suprasegmental states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuprasegmentalLayout {
    /// `assignment[q]` is the suprasegmental state owning conventional state `q`.
    assignment: Vec<usize>,
    num_supra: usize,
}

impl SuprasegmentalLayout {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::config("layout must cover at least one state"));
        }
        let num_supra = assignment.iter().max().unwrap() + 1;
        for p in 0..num_supra {
            if !assignment.contains(&p) {
                return Err(Error::config(format!(
                    "suprasegmental state {p} owns no conventional state"
                )));
            }
        }
        Ok(Self {
            assignment,
            num_supra,
        })
    }

    /// Two suprasegmental states splitting the ring in half (first half gets
    /// the extra state when `N` is odd); one state when `N = 1`.
    pub fn halves(num_states: usize) -> Result<Self> {
        let first = num_states.div_ceil(2);
        Self::new((0..num_states).map(|q| usize::from(q >= first)).collect())
    }

    pub fn num_states(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_supra(&self) -> usize {
        self.num_supra
    }

    pub fn supra_of(&self, state: usize) -> usize {
        self.assignment[state]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }
}

/// Frame → segment map plus the suprasegmental state of each segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub frame_segments: Vec<usize>,
    pub segment_states: Vec<usize>,
    pub segment_lengths: Vec<usize>,
}

impl Segmentation {
    pub fn num_segments(&self) -> usize {
        self.segment_states.len()
    }
}

/// Maps each aligned frame to its suprasegmental state and run-length
/// encodes the result into maximal segments.
pub fn segment_by_alignment(
    alignment: &[usize],
    layout: &SuprasegmentalLayout,
) -> Result<Segmentation> {
    if alignment.is_empty() {
        return Err(Error::EmptyInput("alignment"));
    }
    let mut seg = Segmentation {
        frame_segments: Vec::with_capacity(alignment.len()),
        segment_states: Vec::new(),
        segment_lengths: Vec::new(),
    };
    for &q in alignment {
        if q >= layout.num_states() {
            return Err(Error::StateOutOfRange {
                state: q,
                num_states: layout.num_states(),
            });
        }
        let p = layout.supra_of(q);
        if seg.segment_states.last() != Some(&p) {
            seg.segment_states.push(p);
            seg.segment_lengths.push(0);
        }
        *seg.segment_lengths.last_mut().unwrap() += 1;
        seg.frame_segments.push(seg.segment_states.len() - 1);
    }
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_layout() {
        let l = SuprasegmentalLayout::halves(6).unwrap();
        assert_eq!(l.assignment(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(l.num_supra(), 2);
        assert_eq!(SuprasegmentalLayout::halves(1).unwrap().num_supra(), 1);
        assert!(SuprasegmentalLayout::new(vec![0, 2]).is_err());
    }

    #[test]
    fn segmentation_examples() {
        let l = SuprasegmentalLayout::halves(6).unwrap();
        let s = segment_by_alignment(&[0, 1, 2, 3], &l).unwrap();
        assert_eq!(s.segment_states, vec![0, 1]);
        assert_eq!(s.segment_lengths, vec![3, 1]);
        assert_eq!(s.frame_segments, vec![0, 0, 0, 1]);

        let s = segment_by_alignment(&[0; 9], &l).unwrap();
        assert_eq!(s.segment_states, vec![0]);
        assert_eq!(s.segment_lengths, vec![9]);

        let s = segment_by_alignment(&[3, 4, 5, 0], &l).unwrap();
        assert_eq!(s.segment_states, vec![1, 0]);
        assert_eq!(s.segment_lengths, vec![3, 1]);

        assert!(segment_by_alignment(&[], &l).is_err());
        assert!(segment_by_alignment(&[6], &l).is_err());
    }

    proptest! {
        #[test]
        fn segments_partition_frames(path in prop::collection::vec(0usize..6, 1..200)) {
            let l = SuprasegmentalLayout::halves(6).unwrap();
            let s = segment_by_alignment(&path, &l).unwrap();
            prop_assert_eq!(s.segment_lengths.iter().sum::<usize>(), path.len());
            prop_assert_eq!(s.frame_segments.len(), path.len());
            for w in s.segment_states.windows(2) {
                prop_assert_ne!(w[0], w[1]);
            }
        }
    }
}
