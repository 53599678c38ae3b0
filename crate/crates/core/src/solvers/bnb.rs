use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::simplex::minimise_simplex_quadratic;
use super::{better, IqpProblem, IqpSolution, Proof};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BranchBoundOptions {
    /// Disable to enumerate the whole tree (useful for checking that pruning is sound).
    pub prune: bool,
    /// Stop after this many nodes and return the incumbent, flagged heuristic.
    pub node_limit: Option<u64>,
    /// Largest remaining candidate range on which the convex relaxation bound is tried.
    pub relaxation_max_dim: usize,
}

impl Default for BranchBoundOptions {
    fn default() -> Self {
        Self {
            prune: true,
            node_limit: None,
            relaxation_max_dim: 64,
        }
    }
}

/// Depth-first branch-and-bound over sorted index sequences.
///
/// Children of a node extend the sequence by one index no smaller than the
/// last one (strictly larger in binary mode), so leaves are visited in
/// lexicographic order. A node is discarded only when its lower bound exceeds
/// the incumbent by more than a rounding slack, which keeps exact ties alive
/// and makes the result identical to full enumeration.
pub fn solve_branch_bound(problem: &IqpProblem, opts: &BranchBoundOptions) -> IqpSolution {
    let mut search = Search::new(problem, opts);
    let (seq, obj) = search.initial_incumbent();
    search.incumbent = seq;
    search.incumbent_obj = obj;

    let mut prefix = Vec::with_capacity(problem.s());
    let mut b = problem.c().to_vec();
    search.descend(&mut prefix, &mut b, 0.0, 0);

    let proof = if search.aborted { Proof::Heuristic } else { Proof::Exact };
    problem.solution(search.incumbent, search.nodes, proof)
}

struct Search<'a> {
    p: &'a IqpProblem,
    opts: &'a BranchBoundOptions,
    n: usize,
    s: usize,
    binary: bool,
    row_min: Vec<f64>,
    slack: f64,
    suffix_lambda: Vec<Option<f64>>,
    incumbent: Vec<usize>,
    incumbent_obj: f64,
    nodes: u64,
    aborted: bool,
}

impl<'a> Search<'a> {
    fn new(p: &'a IqpProblem, opts: &'a BranchBoundOptions) -> Self {
        let (n, s) = (p.n(), p.s());
        let k = p.k();
        let row_min = (0..n)
            .map(|i| (0..n).map(|j| k[(i, j)]).fold(f64::INFINITY, f64::min))
            .collect();
        let kmax = k.amax();
        let cmax = p.c().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let sf = s as f64;
        Self {
            p,
            opts,
            n,
            s,
            binary: p.binary(),
            row_min,
            slack: 1e-10 * (sf * sf * kmax + sf * cmax + 1.0),
            suffix_lambda: vec![None; n + 1],
            incumbent: Vec::new(),
            incumbent_obj: f64::INFINITY,
            nodes: 0,
            aborted: false,
        }
    }

    /// Greedy construction followed by single-swap local search.
    fn initial_incumbent(&self) -> (Vec<usize>, f64) {
        let (n, s) = (self.n, self.s);
        let k = self.p.k();
        let mut b = self.p.c().to_vec();
        let mut used = vec![false; n];
        let mut seq = Vec::with_capacity(s);
        for _ in 0..s {
            let mut best = usize::MAX;
            let mut best_val = f64::INFINITY;
            for j in 0..n {
                if self.binary && used[j] {
                    continue;
                }
                let val = b[j] + 0.5 * k[(j, j)];
                if val < best_val {
                    best_val = val;
                    best = j;
                }
            }
            used[best] = true;
            seq.push(best);
            for (i, bi) in b.iter_mut().enumerate() {
                *bi += k[(i, best)];
            }
        }
        seq.sort_unstable();
        let mut obj = self.p.objective_of(&seq);

        let mut improved = true;
        while improved {
            improved = false;
            for pos in 0..s {
                for j in 0..n {
                    if j == seq[pos] || (self.binary && seq.contains(&j)) {
                        continue;
                    }
                    let mut cand = seq.clone();
                    cand[pos] = j;
                    cand.sort_unstable();
                    let cand_obj = self.p.objective_of(&cand);
                    if better(cand_obj, &cand, obj, &seq) {
                        seq = cand;
                        obj = cand_obj;
                        improved = true;
                        break;
                    }
                }
            }
        }
        (seq, obj)
    }

    fn prunable(&self, bound: f64) -> bool {
        self.opts.prune && bound > self.incumbent_obj + self.slack
    }

    /// `prefix` is sorted, `b = K v_prefix + c`, `f` is the prefix objective.
    fn descend(&mut self, prefix: &mut Vec<usize>, b: &mut Vec<f64>, f: f64, lo: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if let Some(limit) = self.opts.node_limit {
            if self.nodes >= limit {
                self.aborted = true;
            }
        }
        let r = self.s - prefix.len();
        if r == 0 {
            let obj = self.p.objective_of(prefix);
            if better(obj, prefix, self.incumbent_obj, &self.incumbent) {
                self.incumbent_obj = obj;
                self.incumbent.clone_from(prefix);
            }
            return;
        }
        let n = self.n;
        let hi = if self.binary { n - r } else { n - 1 };
        let k = self.p.k();
        // cost of one pick of j on its own; index t = j - lo
        let mu: Vec<f64> = (lo..n).map(|j| b[j] + 0.5 * k[(j, j)]).collect();
        let rest = r - 1;
        let shares = self.pick_shares(&mu, lo, rest);

        let mut child_b = vec![0.0; n];
        let mut scratch = Vec::with_capacity(n);
        for q in lo..=hi {
            let first = mu[q - lo];
            let next_lo = if self.binary { q + 1 } else { q };
            let later = if rest == 0 {
                0.0
            } else {
                self.completion_bound(&shares, lo, q, next_lo, rest, &mut scratch)
            };
            if self.prunable(f + first + later) {
                continue;
            }
            let col = &k.as_slice()[q * n..(q + 1) * n];
            child_b[next_lo..].copy_from_slice(&b[next_lo..]);
            for j in next_lo..n {
                child_b[j] += col[j];
            }
            let child_f = f + first;
            if self.opts.prune && rest >= 2 && n - next_lo <= self.opts.relaxation_max_dim {
                let bound = child_f + self.relaxation_bound(&child_b, next_lo, rest);
                if self.prunable(bound) {
                    continue;
                }
            }
            prefix.push(q);
            self.descend(prefix, &mut child_b, child_f, next_lo);
            prefix.pop();
            if self.aborted {
                return;
            }
        }
    }

    /// Lower bounds on each candidate's share of a `k`-pick completion.
    ///
    /// Writing the completion cost position-wise as
    /// `sum_p mu_p + 1/2 sum_{p != p'} K_{p p'}` and giving each position half
    /// its own cost plus half of every pair with a partner (whose own cost is
    /// spread over its `k - 1` pairs), a pick of `j` costs at least
    /// `1/2 mu_j + 1/2 (cheapest k - 1 values of K_jl + mu_l / (k - 1))`.
    /// With `k = 1` the share is just `mu_j`.
    fn pick_shares(&self, mu: &[f64], lo: usize, k: usize) -> Vec<f64> {
        if k <= 1 || !self.opts.prune {
            return mu.to_vec();
        }
        let kk = self.p.k();
        let n = self.n;
        let partners = k - 1;
        let inv = 1.0 / partners as f64;
        let mut row = Vec::with_capacity(n - lo);
        (lo..n)
            .map(|j| {
                let col = &kk.as_slice()[j * n..(j + 1) * n];
                let best = if self.binary {
                    row.clear();
                    row.extend((lo..n).filter(|&l| l != j).map(|l| col[l] + mu[l - lo] * inv));
                    smallest_sum(&mut row, partners)
                } else {
                    partners as f64
                        * (lo..n).map(|l| col[l] + mu[l - lo] * inv).fold(f64::INFINITY, f64::min)
                };
                0.5 * mu[j - lo] + 0.5 * best
            })
            .collect()
    }

    /// Lower bound on the last `k` picks once `q` has been added, using shares
    /// computed before `q` was added.
    fn completion_bound(&self, shares: &[f64], lo: usize, q: usize, next_lo: usize, k: usize, scratch: &mut Vec<f64>) -> f64 {
        let n = self.n;
        let col = &self.p.k().as_slice()[q * n..(q + 1) * n];
        // adding q raises each later mu_j by K_qj; in the shares that is the
        // full K_qj for k = 1 and half of it plus half a row minimum otherwise
        let (coef, extra) = if k == 1 || !self.opts.prune {
            (1.0, 0.0)
        } else {
            (0.5, 0.5 * k as f64 * self.row_min[q])
        };
        if next_lo >= n {
            return f64::INFINITY;
        }
        let values = (next_lo..n).map(|j| shares[j - lo] + coef * col[j]);
        if self.binary {
            scratch.clear();
            scratch.extend(values);
            if scratch.len() < k {
                return f64::INFINITY;
            }
            smallest_sum(scratch, k) + extra
        } else {
            k as f64 * values.fold(f64::INFINITY, f64::min) + extra
        }
    }

    /// Lower bound on `min b'u + 1/2 u'Ku` over `r` picks from `lo..n` via an
    /// eigenvalue-shifted convex relaxation on the simplex.
    fn relaxation_bound(&mut self, b: &[f64], lo: usize, r: usize) -> f64 {
        let n = self.n;
        let m = n - lo;
        let k = self.p.k();
        let sub = k.view((lo, lo), (m, m)).into_owned();
        let kmax = sub.amax().max(1.0);
        let lambda = *self.suffix_lambda[lo].get_or_insert_with(|| {
            SymmetricEigen::new(sub.clone()).eigenvalues.min() - 1e-9 * kmax
        });
        let rf = r as f64;
        // u = r w, objective 1/2 r^2 w'(K - sigma I)w + r b'w
        let q = DMatrix::from_fn(m, m, |i, j| {
            0.5 * rf * rf * (sub[(i, j)] - if i == j { lambda } else { 0.0 })
        });
        let h: Vec<f64> = b[lo..].iter().map(|v| -0.5 * rf * v).collect();
        let run = minimise_simplex_quadratic(&q, &h, 0.0, 200, 0.0);
        // sum u_j^2 is r for binary u, and lies in [r, r^2] for integer multisets
        let shift = if self.binary || lambda >= 0.0 {
            0.5 * lambda * rf
        } else {
            0.5 * lambda * rf * rf
        };
        run.lower_bound() + shift
    }
}

fn smallest_sum(values: &mut [f64], count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    if count < values.len() {
        values.select_nth_unstable_by(count - 1, f64::total_cmp);
    }
    values[..count].iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::solve_exhaustive;
    use crate::solvers::tests::random_instance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 0..200 {
            let n = rng.random_range(1..=10);
            let binary = t % 2 == 1;
            let s = rng.random_range(1..=3.min(if binary { n } else { 3 }));
            let p = random_instance(&mut rng, n, s, binary);
            let exact = solve_exhaustive(&p).unwrap();
            let bb = solve_branch_bound(&p, &BranchBoundOptions::default());
            assert_eq!(bb.v, exact.v, "instance {t}");
            assert_eq!(bb.objective, exact.objective);
            assert_eq!(bb.proof, Proof::Exact);
        }
    }

    #[test]
    fn pruning_is_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let off = BranchBoundOptions {
            prune: false,
            ..Default::default()
        };
        for t in 0..40 {
            let binary = t % 3 == 0;
            let p = random_instance(&mut rng, 12, 3, binary);
            let a = solve_branch_bound(&p, &BranchBoundOptions::default());
            let b = solve_branch_bound(&p, &off);
            assert_eq!(a.v, b.v);
            assert!(a.nodes_explored <= b.nodes_explored);
        }
    }

    #[test]
    fn exact_ties_resolve_like_enumeration() {
        // every candidate identical: the first s indices win (or index 0 repeated)
        let k = DMatrix::from_element(5, 5, 1.0);
        for binary in [false, true] {
            let p = IqpProblem::new(k.clone(), vec![0.0; 5], 3, binary).unwrap();
            let sol = solve_branch_bound(&p, &BranchBoundOptions::default());
            assert_eq!(sol.v, solve_exhaustive(&p).unwrap().v);
        }
        let p = IqpProblem::new(DMatrix::identity(4, 4), vec![0.0; 4], 2, false).unwrap();
        assert_eq!(solve_branch_bound(&p, &Default::default()).v, vec![1, 1, 0, 0]);
    }

    #[test]
    fn zero_kernel_takes_cheapest_linear_term() {
        let p = IqpProblem::new(DMatrix::zeros(5, 5), vec![0.3, -1.0, 0.2, -1.0, 0.0], 4, false).unwrap();
        assert_eq!(solve_branch_bound(&p, &Default::default()).v, vec![0, 4, 0, 0, 0]);
    }

    #[test]
    fn binary_full_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random_instance(&mut rng, 7, 7, true);
        assert_eq!(solve_branch_bound(&p, &Default::default()).v, vec![1; 7]);
    }

    #[test]
    fn indefinite_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for t in 0..60 {
            let n = rng.random_range(2..=9);
            let mut k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            k = (&k + k.transpose()) * 0.5;
            let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let binary = t % 2 == 0;
            let p = IqpProblem::new(k, c, 3.min(n), binary).unwrap();
            let bb = solve_branch_bound(&p, &Default::default());
            assert_eq!(bb.v, solve_exhaustive(&p).unwrap().v, "instance {t}");
        }
    }

    #[test]
    fn beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let p = random_instance(&mut rng, 40, 4, false);
            let sol = solve_branch_bound(&p, &Default::default());
            for _ in 0..100 {
                let mut seq: Vec<usize> = (0..4).map(|_| rng.random_range(0..40)).collect();
                seq.sort_unstable();
                assert!(sol.objective <= p.objective_of(&seq));
            }
        }
    }

    #[test]
    fn node_limit_marks_heuristic() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let p = random_instance(&mut rng, 30, 4, false);
        let opts = BranchBoundOptions {
            prune: false,
            node_limit: Some(10),
            ..Default::default()
        };
        let sol = solve_branch_bound(&p, &opts);
        assert_eq!(sol.proof, Proof::Heuristic);
        assert_eq!(sol.indices.len(), 4);
    }
}
