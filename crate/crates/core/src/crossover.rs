//! Ordered crossover on variable-size giant tours.

use rand::Rng;

use crate::model::{EpochInstance, GiantTour};
use crate::population::{Individual, Population};

/// OX with an explicit fragment `p1[start..=end]`, taken cyclically when
/// `end < start`.
///
/// The offspring is the fragment followed by every customer of `p2` not in
/// it, in `p2`'s cyclic order starting right after the position in `p2` of
/// the fragment's last element (or at `p2`'s start if that element is not
/// in `p2`). An empty `p1` yields `p2`.
pub fn ox_with_fragment(p1: &GiantTour, p2: &GiantTour, start: usize, end: usize) -> GiantTour {
    let a = p1.as_slice();
    let b = p2.as_slice();
    if a.is_empty() {
        return p2.clone();
    }
    let n = a.len();
    let length = (end + n - start) % n + 1;
    let fragment: Vec<usize> = (0..length).map(|k| a[(start + k) % n]).collect();

    let max_node = a.iter().chain(b).copied().max().unwrap_or(0);
    let mut taken = vec![false; max_node + 1];
    for &c in &fragment {
        taken[c] = true;
    }
    let last = *fragment.last().unwrap();
    let anchor = b.iter().position(|&c| c == last).map_or(0, |p| p + 1);

    let mut child = fragment;
    child.reserve(b.len());
    for k in 0..b.len() {
        let c = b[(anchor + k) % b.len()];
        if !taken[c] {
            taken[c] = true;
            child.push(c);
        }
    }
    GiantTour::new(child)
}

/// OX with fragment bounds drawn uniformly over the positions of `p1`.
pub fn ox<R: Rng + ?Sized>(p1: &GiantTour, p2: &GiantTour, rng: &mut R) -> GiantTour {
    if p1.is_empty() {
        return p2.clone();
    }
    let start = rng.gen_range(0..p1.len());
    let end = rng.gen_range(0..p1.len());
    ox_with_fragment(p1, p2, start, end)
}

/// Selects two parents, draws `candidates` OX offspring with independent
/// fragments, decodes each and returns the one with the lowest fitness.
/// The first candidate wins ties.
pub fn generate_offspring<R: Rng + ?Sized>(
    pop: &Population,
    epoch: &EpochInstance,
    candidates: usize,
    rng: &mut R,
) -> Individual {
    let (p1, p2) = pop.select_parents(rng);
    let (p1, p2) = (p1.tour.clone(), p2.tour.clone());
    let weights = *pop.weights();
    let mut best: Option<Individual> = None;
    for _ in 0..candidates.max(1) {
        let child = Individual::from_tour(ox(&p1, &p2, rng), epoch, &weights, pop.objective());
        if best.as_ref().is_none_or(|b| child.fitness < b.fitness) {
            best = Some(child);
        }
    }
    best.unwrap()
}
