//! Load balancing by trading border microcells between adjacent cells.
//!
//! Hexagons are visited once each, in ascending order of their initial load.
//! The visited hexagon (the receiver) considers the border triangles its
//! neighbors could hand over and takes the subset that brings it closest to
//! the average load without overshooting, while no donor falls below the
//! average.

use serde::{Deserialize, Serialize};

use crate::ctp::ScoreVector;
use crate::error::{Error, Result};
use crate::hexgrid::{HexLayout, ScopeRule, TriangleId};

/// Largest candidate list the exhaustive subset search accepts.
pub const MAX_CANDIDATES: usize = 32;

/// Serving hexagon of every microcell, in flat order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    serving: Vec<usize>,
}

impl Assignment {
    /// Every triangle served by the hexagon it lies in.
    pub fn identity(layout: &HexLayout) -> Self {
        Self {
            serving: layout.triangle_ids().map(|t| t.hex).collect(),
        }
    }

    pub fn server(&self, t: TriangleId) -> usize {
        self.serving[t.flat()]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.serving
    }

    fn reassign(&mut self, t: TriangleId, to: usize) {
        self.serving[t.flat()] = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub triangle: TriangleId,
    pub from: usize,
    pub to: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceResult {
    pub avg_score: f64,
    pub hex_traffic_before: Vec<f64>,
    pub hex_traffic_after: Vec<f64>,
    pub added: Vec<Transfer>,
    /// Hexagons processed by the pass.
    pub iterations: usize,
    pub assignment: Assignment,
    /// Per-hexagon totals before the pass and after each processed hexagon.
    pub trace: Vec<Vec<f64>>,
}

fn check_scores(scores: &ScoreVector, layout: &HexLayout) -> Result<()> {
    if scores.len() != layout.n_triangles() {
        return Err(Error::SizeMismatch {
            what: "score vector",
            expected: layout.n_triangles(),
            got: scores.len(),
        });
    }
    Ok(())
}

/// Sum of scores served by each hexagon.
pub fn hex_traffic(scores: &ScoreVector, layout: &HexLayout, assignment: &Assignment) -> Result<Vec<f64>> {
    check_scores(scores, layout)?;
    if assignment.serving.len() != scores.len() {
        return Err(Error::SizeMismatch {
            what: "assignment",
            expected: scores.len(),
            got: assignment.serving.len(),
        });
    }
    let mut totals = vec![0.0; layout.n_hex()];
    for (s, &b) in scores.as_slice().iter().zip(&assignment.serving) {
        *totals.get_mut(b).ok_or(Error::IndexOutOfRange {
            what: "hexagon",
            index: b,
            limit: layout.n_hex(),
        })? += s;
    }
    Ok(totals)
}

/// Total score divided by the number of hexagons.
pub fn average_score(scores: &[f64], n_hex: usize) -> Result<f64> {
    if n_hex == 0 {
        return Err(Error::InvalidInput("average over zero hexagons".into()));
    }
    Ok(scores.iter().sum::<f64>() / n_hex as f64)
}

/// Scope-1 triangles of `receiver` that have not changed hands yet.
pub fn get_addable(
    layout: &HexLayout,
    receiver: usize,
    added: &[Transfer],
    assignment: &Assignment,
    rule: ScopeRule,
) -> Result<Vec<TriangleId>> {
    let scope = layout.scopes(receiver, rule)?;
    let mut out: Vec<TriangleId> = scope
        .scope1
        .into_iter()
        .filter(|t| assignment.server(*t) == t.hex)
        .filter(|t| !added.iter().any(|a| a.triangle == *t))
        .collect();
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen triangles, in candidate order.
    pub chosen: Vec<TriangleId>,
    pub receiver_total: f64,
}

struct Search<'a> {
    scores: &'a [f64],
    cand: &'a [TriangleId],
    /// Donor slot of each candidate in `donor_totals`.
    slot: Vec<usize>,
    /// Sum of candidate scores from position k onward.
    suffix: Vec<f64>,
    avg: f64,
    best_total: f64,
    best: Vec<usize>,
}

impl Search<'_> {
    fn better(&self, total: f64, picked: &[usize]) -> bool {
        if total != self.best_total {
            return total > self.best_total;
        }
        if picked.len() != self.best.len() {
            return picked.len() < self.best.len();
        }
        picked < self.best.as_slice()
    }

    fn run(&mut self, k: usize, total: f64, donors: &mut [f64], picked: &mut Vec<usize>) {
        if k == self.cand.len() {
            if self.better(total, picked) {
                self.best_total = total;
                self.best.clone_from(picked);
            }
            return;
        }
        if total + self.suffix[k] < self.best_total {
            return;
        }
        let s = self.scores[self.cand[k].flat()];
        let d = self.slot[k];
        if total + s <= self.avg && donors[d] - s >= self.avg {
            donors[d] -= s;
            picked.push(k);
            self.run(k + 1, total + s, donors, picked);
            picked.pop();
            donors[d] += s;
        }
        self.run(k + 1, total, donors, picked);
    }
}

/// Picks the subset of `candidates` that maximizes the receiver's total such
/// that the receiver stays at or below `avg` and every donor (the candidate's
/// home hexagon) stays at or above it. Ties go to fewer triangles, then to the
/// lexicographically smallest candidate positions. `totals` is updated.
pub fn best_subset(
    candidates: &[TriangleId],
    receiver: usize,
    totals: &mut [f64],
    avg: f64,
    scores: &ScoreVector,
) -> Result<Selection> {
    if candidates.len() > MAX_CANDIDATES {
        return Err(Error::SearchGuard {
            candidates: candidates.len(),
            limit: MAX_CANDIDATES,
        });
    }
    let limit = totals.len();
    for &h in std::iter::once(&receiver).chain(candidates.iter().map(|t| &t.hex)) {
        if h >= limit {
            return Err(Error::IndexOutOfRange {
                what: "hexagon",
                index: h,
                limit,
            });
        }
    }
    if let Some(t) = candidates
        .iter()
        .find(|t| t.hex == receiver || t.flat() >= scores.len())
    {
        return Err(Error::InvalidInput(format!(
            "invalid transfer candidate {t} for receiver {receiver}"
        )));
    }

    let mut donor_ids: Vec<usize> = candidates.iter().map(|t| t.hex).collect();
    donor_ids.sort_unstable();
    donor_ids.dedup();
    let slot = candidates
        .iter()
        .map(|t| donor_ids.binary_search(&t.hex).expect("donor listed"))
        .collect();
    let mut donors: Vec<f64> = donor_ids.iter().map(|&d| totals[d]).collect();
    let mut suffix = vec![0.0; candidates.len() + 1];
    for k in (0..candidates.len()).rev() {
        suffix[k] = suffix[k + 1] + scores.as_slice()[candidates[k].flat()];
    }

    let start = totals[receiver];
    let mut search = Search {
        scores: scores.as_slice(),
        cand: candidates,
        slot,
        suffix,
        avg,
        best_total: start,
        best: Vec::new(),
    };
    search.run(0, start, &mut donors, &mut Vec::new());

    let chosen: Vec<TriangleId> = search.best.iter().map(|&k| candidates[k]).collect();
    for t in &chosen {
        let s = scores.as_slice()[t.flat()];
        totals[receiver] += s;
        totals[t.hex] -= s;
    }
    Ok(Selection {
        chosen,
        receiver_total: search.best_total,
    })
}

/// One sorted pass over all hexagons.
pub fn balance(scores: &ScoreVector, layout: &HexLayout, rule: ScopeRule) -> Result<BalanceResult> {
    check_scores(scores, layout)?;
    let mut assignment = Assignment::identity(layout);
    let before = hex_traffic(scores, layout, &assignment)?;
    let avg = average_score(scores.as_slice(), layout.n_hex())?;

    let mut order: Vec<usize> = (0..layout.n_hex()).collect();
    order.sort_by(|&a, &b| before[a].total_cmp(&before[b]).then(a.cmp(&b)));

    let mut totals = before.clone();
    let mut added: Vec<Transfer> = Vec::new();
    let mut trace = vec![before.clone()];
    let mut iterations = 0;
    for &receiver in &order {
        let candidates = get_addable(layout, receiver, &added, &assignment, rule)?;
        let selection = best_subset(&candidates, receiver, &mut totals, avg, scores)?;
        for t in selection.chosen {
            added.push(Transfer {
                triangle: t,
                from: assignment.server(t),
                to: receiver,
                score: scores.as_slice()[t.flat()],
            });
            assignment.reassign(t, receiver);
        }
        iterations += 1;
        trace.push(totals.clone());
    }

    Ok(BalanceResult {
        avg_score: avg,
        hex_traffic_before: before,
        hex_traffic_after: totals,
        added,
        iterations,
        assignment,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hexgrid::{preset_wnl1, preset_wnl2};

    fn ones(layout: &HexLayout) -> ScoreVector {
        ScoreVector::new(vec![1.0; layout.n_triangles()]).unwrap()
    }

    #[test]
    fn uniform_scores_total_24() {
        let l = preset_wnl2();
        let t = hex_traffic(&ones(&l), &l, &Assignment::identity(&l)).unwrap();
        assert_eq!(t, vec![24.0; 7]);
    }

    #[test]
    fn moving_a_triangle_shifts_totals() {
        let l = preset_wnl1();
        let mut raw = vec![2.0; 72];
        let t = TriangleId::new(1, 5).unwrap();
        raw[t.flat()] = 7.5;
        let scores = ScoreVector::new(raw).unwrap();
        let mut a = Assignment::identity(&l);
        let before = hex_traffic(&scores, &l, &a).unwrap();
        a.reassign(t, 0);
        let after = hex_traffic(&scores, &l, &a).unwrap();
        assert_eq!(after[0] - before[0], 7.5);
        assert_eq!(before[1] - after[1], 7.5);
        assert_eq!(after[2], before[2]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let l = preset_wnl1();
        let scores = ScoreVector::new(vec![1.0; 24]).unwrap();
        assert!(hex_traffic(&scores, &l, &Assignment::identity(&l)).is_err());
        assert!(balance(&scores, &l, ScopeRule::default()).is_err());
    }

    #[test]
    fn average_examples() {
        assert_eq!(average_score(&[1.0; 72], 3).unwrap(), 24.0);
        let avg = average_score(&[1529.24, 1356.02, 1661.87], 3).unwrap();
        assert!((avg - 1515.71).abs() < 1e-9);
        assert!(average_score(&[1.0], 0).is_err());
    }

    #[test]
    fn addable_shrinks_with_transfers() {
        let l = preset_wnl1();
        let a = Assignment::identity(&l);
        let c = get_addable(&l, 0, &[], &a, ScopeRule::default()).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|t| t.hex != 0));
        let log: Vec<Transfer> = c
            .iter()
            .map(|&t| Transfer {
                triangle: t,
                from: t.hex,
                to: 0,
                score: 0.0,
            })
            .collect();
        assert!(get_addable(&l, 0, &log, &a, ScopeRule::default()).unwrap().is_empty());
    }

    fn one_donor_case() -> (Vec<TriangleId>, ScoreVector, Vec<f64>) {
        // Receiver 0 at 60, donor 1 at 200, avg 100.
        let mut raw = vec![0.0; 72];
        let cands: Vec<TriangleId> = [(1, 1), (1, 2), (1, 5)]
            .iter()
            .map(|&(h, l)| TriangleId::new(h, l).unwrap())
            .collect();
        for (t, s) in cands.iter().zip([10.0, 20.0, 30.0]) {
            raw[t.flat()] = s;
        }
        (cands, ScoreVector::new(raw).unwrap(), vec![60.0, 200.0, 40.0])
    }

    #[test]
    fn best_subset_brute_force_example() {
        let (cands, scores, mut totals) = one_donor_case();
        let sel = best_subset(&cands, 0, &mut totals, 100.0, &scores).unwrap();
        assert_eq!(sel.chosen, vec![cands[0], cands[2]]);
        assert_eq!(sel.receiver_total, 100.0);
        assert_eq!(totals, vec![100.0, 160.0, 40.0]);
    }

    #[test]
    fn best_subset_empty_and_boundary() {
        let (cands, scores, mut totals) = one_donor_case();
        let sel = best_subset(&[], 0, &mut totals, 100.0, &scores).unwrap();
        assert!(sel.chosen.is_empty());
        assert_eq!(totals, vec![60.0, 200.0, 40.0]);

        let mut at_avg = vec![60.0, 100.0, 40.0];
        let sel = best_subset(&cands, 0, &mut at_avg, 100.0, &scores).unwrap();
        assert!(sel.chosen.is_empty());
    }

    #[test]
    fn ties_prefer_fewer_then_earlier() {
        let mut raw = vec![0.0; 72];
        let c: Vec<TriangleId> = [1, 2, 5, 6].iter().map(|&l| TriangleId::new(1, l).unwrap()).collect();
        for (t, s) in c.iter().zip([5.0, 5.0, 10.0, 10.0]) {
            raw[t.flat()] = s;
        }
        let scores = ScoreVector::new(raw).unwrap();
        let mut totals = vec![90.0, 500.0, 0.0];
        let sel = best_subset(&c, 0, &mut totals, 100.0, &scores).unwrap();
        assert_eq!(sel.chosen, vec![c[2]]);
    }

    #[test]
    fn guard_is_enforced() {
        let l = preset_wnl2();
        let scores = ones(&l);
        let many: Vec<TriangleId> = (0..33).map(|i| TriangleId::from_flat(24 + i)).collect();
        let mut totals = vec![0.0; 7];
        assert!(matches!(
            best_subset(&many, 0, &mut totals, 1.0, &scores),
            Err(Error::SearchGuard { .. })
        ));
    }

    #[test]
    fn balanced_input_is_untouched() {
        let l = preset_wnl2();
        let r = balance(&ones(&l), &l, ScopeRule::default()).unwrap();
        assert!(r.added.is_empty());
        assert_eq!(r.hex_traffic_after, r.hex_traffic_before);
        assert_eq!(r.iterations, 7);
        assert_eq!(r.trace.len(), 8);
    }

    #[test]
    fn skewed_layout_moves_load_to_the_light_cell() {
        let l = preset_wnl1();
        let mut raw = vec![60.0; 72];
        for v in &mut raw[..24] {
            *v = 40.0;
        }
        let scores = ScoreVector::new(raw).unwrap();
        let r = balance(&scores, &l, ScopeRule::default()).unwrap();
        assert!(!r.added.is_empty());
        assert!(r.added.iter().all(|t| t.to == 0));
        assert!(r.hex_traffic_after[0] > r.hex_traffic_before[0]);
        assert!(r.hex_traffic_after[0] <= r.avg_score);
        for t in &r.added {
            assert_eq!(r.assignment.server(t.triangle), t.to);
        }
    }
}
