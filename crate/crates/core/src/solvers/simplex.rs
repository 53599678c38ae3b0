use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Optimal convex weights for a weighted empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeightSolution {
    pub w: Vec<f64>,
    /// Objective at `w`, clamped at zero.
    pub phi_squared: f64,
    pub fw_iterations: usize,
    /// Frank-Wolfe duality gap at `w`; `phi_squared - duality_gap` bounds the optimum from below.
    pub duality_gap: f64,
    /// Objective value after every iteration (non-increasing).
    pub history: Vec<f64>,
}

/// Minimises `w'Kw - 2 w'h + c2` over the probability simplex.
///
/// Frank-Wolfe with away steps and exact line search; stops once the duality
/// gap is at most `tol` or after `max_iter` iterations.
pub fn solve_simplex_qp(
    k: &DMatrix<f64>,
    h: &[f64],
    c2: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SimplexWeightSolution> {
    let n = h.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::DegenerateData("empty weight problem".into()));
    }
    if k.iter().chain(h).any(|v| !v.is_finite()) || !c2.is_finite() {
        return Err(Error::DegenerateData("non-finite entry in weight problem".into()));
    }
    let run = minimise_simplex_quadratic(k, h, c2, max_iter, tol);
    Ok(SimplexWeightSolution {
        phi_squared: run.objective.max(0.0),
        w: run.w,
        fw_iterations: run.iterations,
        duality_gap: run.gap,
        history: run.history,
    })
}

pub(crate) struct SimplexRun {
    pub w: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl SimplexRun {
    /// Lower bound on the minimum, valid when the objective is convex.
    pub fn lower_bound(&self) -> f64 {
        self.objective - self.gap
    }
}

/// Frank-Wolfe iterations between exact corrections on the current support.
const POLISH_EVERY: usize = 1000;

pub(crate) fn minimise_simplex_quadratic(
    k: &DMatrix<f64>,
    h: &[f64],
    c2: f64,
    max_iter: usize,
    tol: f64,
) -> SimplexRun {
    let n = h.len();
    // start at the best vertex
    let start = (0..n)
        .min_by(|&a, &b| (k[(a, a)] - 2.0 * h[a]).total_cmp(&(k[(b, b)] - 2.0 * h[b])))
        .unwrap_or(0);
    let mut w = vec![0.0; n];
    w[start] = 1.0;
    let kw = k.column(start).iter().copied().collect::<Vec<_>>();
    let mut fw = FrankWolfe {
        k,
        h,
        c2,
        w,
        kw,
        f: 0.0,
        history: Vec::new(),
        iterations: 0,
        stalled: false,
    };
    fw.f = fw.objective();
    fw.history.push(fw.f);

    // the running kw drifts, so a stop is only accepted once the gap at a
    // freshly evaluated point confirms it
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter / POLISH_EVERY + 100 {
        let budget = max_iter.min(fw.iterations + POLISH_EVERY);
        fw.run(budget, tol);
        fw.polish();
        let total: f64 = fw.w.iter().sum();
        for x in &mut fw.w {
            *x /= total;
        }
        refresh(k, &fw.w, &mut fw.kw);
        let previous = gap;
        gap = fw.gap().0;
        if gap <= tol || fw.iterations >= max_iter || (gap >= previous && fw.stalled) {
            break;
        }
    }
    SimplexRun {
        objective: fw.objective(),
        w: fw.w,
        gap: gap.max(0.0),
        iterations: fw.iterations,
        history: fw.history,
    }
}

struct FrankWolfe<'a> {
    k: &'a DMatrix<f64>,
    h: &'a [f64],
    c2: f64,
    w: Vec<f64>,
    /// `K w`, updated incrementally.
    kw: Vec<f64>,
    /// Objective tracked through the exact per-step decrease.
    f: f64,
    history: Vec<f64>,
    iterations: usize,
    /// Set when the last call to `run` could not move.
    stalled: bool,
}

impl FrankWolfe<'_> {
    fn objective(&self) -> f64 {
        let quad: f64 = self.w.iter().zip(&self.kw).map(|(a, b)| a * b).sum();
        let lin: f64 = self.w.iter().zip(self.h).map(|(a, b)| a * b).sum();
        quad - 2.0 * lin + self.c2
    }

    /// Moves to the minimiser over the face spanned by the current support,
    /// dropping coordinates that would turn negative on the way (an active-set
    /// step). Kept only if it lowers the objective.
    fn polish(&mut self) {
        let n = self.h.len();
        let mut w = self.w.clone();
        for _ in 0..n {
            let support: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0).collect();
            let m = support.len();
            if m < 2 {
                break;
            }
            // [2 K_SS  1; 1' 0] [z; mu] = [2 h_S; 1]
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut b = DVector::zeros(m + 1);
            for (r, &i) in support.iter().enumerate() {
                for (c, &j) in support.iter().enumerate() {
                    a[(r, c)] = 2.0 * self.k[(i, j)];
                }
                a[(r, m)] = 1.0;
                a[(m, r)] = 1.0;
                b[r] = 2.0 * self.h[i];
            }
            b[m] = 1.0;
            let Ok(sol) = a.svd(true, true).solve(&b, 1e-14 * self.k.amax().max(1.0)) else {
                return;
            };
            let z: Vec<f64> = (0..m).map(|r| sol[r]).collect();
            // step towards z until the first coordinate reaches zero
            let mut t: f64 = 1.0;
            let mut blocking = None;
            for (r, &i) in support.iter().enumerate() {
                if z[r] < 0.0 && w[i] / (w[i] - z[r]) < t {
                    t = w[i] / (w[i] - z[r]);
                    blocking = Some(i);
                }
            }
            for (r, &i) in support.iter().enumerate() {
                w[i] = (w[i] + t * (z[r] - w[i])).max(0.0);
            }
            match blocking {
                Some(i) => w[i] = 0.0,
                None => break,
            }
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return;
        }
        for x in &mut w {
            *x /= total;
        }
        let mut kw = vec![0.0; n];
        refresh(self.k, &w, &mut kw);
        let old = (std::mem::replace(&mut self.w, w), std::mem::replace(&mut self.kw, kw));
        let fresh = self.objective();
        if fresh < self.f {
            self.f = fresh;
            self.history.push(fresh);
        } else {
            (self.w, self.kw) = old;
        }
    }

    fn grad(&self, i: usize) -> f64 {
        2.0 * (self.kw[i] - self.h[i])
    }

    /// Duality gap, the Frank-Wolfe vertex and `grad . w`.
    fn gap(&self) -> (f64, usize, f64) {
        let n = self.h.len();
        let mut best = 0;
        let mut g_dot_w = 0.0;
        for i in 0..n {
            let g = self.grad(i);
            if g < self.grad(best) {
                best = i;
            }
            g_dot_w += g * self.w[i];
        }
        (g_dot_w - self.grad(best), best, g_dot_w)
    }

    fn run(&mut self, max_iter: usize, tol: f64) {
        let (k, n) = (self.k, self.h.len());
        self.stalled = false;
        let col = |j: usize| &k.as_slice()[j * n..(j + 1) * n];
        while self.iterations < max_iter {
            let (gap, fw, g_dot_w) = self.gap();
            if gap <= tol {
                break;
            }
            let away = (0..n)
                .filter(|&i| self.w[i] > 0.0)
                .max_by(|&a, &b| self.grad(a).total_cmp(&self.grad(b)).then(b.cmp(&a)))
                .expect("weights sum to one");
            let away_gap = self.grad(away) - g_dot_w;
            let wkw: f64 = self.w.iter().zip(&self.kw).map(|(a, b)| a * b).sum();
            let w_away = self.w[away];

            let (slope, curvature, max_step, toward_vertex) = if gap >= away_gap || w_away >= 1.0 {
                // d = e_fw - w
                let curv = k[(fw, fw)] - 2.0 * self.kw[fw] + wkw;
                (-gap, curv, 1.0, true)
            } else {
                // d = w - e_away
                let curv = wkw - 2.0 * self.kw[away] + k[(away, away)];
                (-away_gap, curv, w_away / (1.0 - w_away), false)
            };
            let step = if curvature > 0.0 {
                (-slope / (2.0 * curvature)).clamp(0.0, max_step)
            } else {
                max_step
            };
            if step <= 0.0 {
                self.stalled = true;
                break;
            }

            if toward_vertex {
                let kf = col(fw);
                for i in 0..n {
                    self.w[i] *= 1.0 - step;
                    self.kw[i] = (1.0 - step) * self.kw[i] + step * kf[i];
                }
                self.w[fw] += step;
            } else {
                let ka = col(away);
                for i in 0..n {
                    self.w[i] *= 1.0 + step;
                    self.kw[i] = (1.0 + step) * self.kw[i] - step * ka[i];
                }
                self.w[away] -= step;
                if step == max_step || self.w[away] < 0.0 {
                    self.w[away] = 0.0;
                }
            }
            self.iterations += 1;
            if self.iterations.is_multiple_of(64) {
                refresh(k, &self.w, &mut self.kw);
            }
            // exact decrease of a quadratic along the segment; direct re-evaluation
            // cannot resolve it once it drops below the objective's rounding error
            self.f -= (-slope * step - curvature * step * step).max(0.0);
            self.history.push(self.f);
        }
    }
}

fn refresh(k: &DMatrix<f64>, w: &[f64], kw: &mut [f64]) {
    kw.fill(0.0);
    for (j, &wj) in w.iter().enumerate() {
        if wj != 0.0 {
            for (out, kij) in kw.iter_mut().zip(k.column(j).iter()) {
                *out += kij * wj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DVector, LU};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        DMatrix::from_fn(n, n, |i, j| {
            let r2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
            (-r2 / 0.8).exp() + if i == j { 0.05 } else { 0.0 }
        })
    }

    /// Global minimum by solving the KKT system on every support pattern.
    fn kkt_oracle(k: &DMatrix<f64>, h: &[f64], c2: f64) -> f64 {
        let n = h.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            let s: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let m = s.len();
            // [2 K_SS  -1; 1' 0] [w; lambda] = [2 h_S; 1]
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut b = DVector::zeros(m + 1);
            for (r, &i) in s.iter().enumerate() {
                for (c, &j) in s.iter().enumerate() {
                    a[(r, c)] = 2.0 * k[(i, j)];
                }
                a[(r, m)] = -1.0;
                a[(m, r)] = 1.0;
                b[r] = 2.0 * h[i];
            }
            b[m] = 1.0;
            let Some(x) = LU::new(a).solve(&b) else { continue };
            if (0..m).any(|r| x[r] < -1e-12) {
                continue;
            }
            let mut w = vec![0.0; n];
            for (r, &i) in s.iter().enumerate() {
                w[i] = x[r].max(0.0);
            }
            let wv = DVector::from_vec(w);
            let val = (wv.transpose() * k * &wv)[(0, 0)] - 2.0 * wv.dot(&DVector::from_column_slice(h)) + c2;
            best = best.min(val);
        }
        best
    }

    #[test]
    fn single_point_is_forced() {
        let k = DMatrix::from_element(1, 1, 0.9);
        let sol = solve_simplex_qp(&k, &[0.4], 0.3, 100, 1e-12).unwrap();
        assert_eq!(sol.w, vec![1.0]);
        assert!((sol.phi_squared - (0.9 - 0.8 + 0.3)).abs() < 1e-15);
    }

    #[test]
    fn identity_gives_uniform_weights() {
        for n in [2, 5, 9] {
            let sol = solve_simplex_qp(&DMatrix::identity(n, n), &vec![0.0; n], 0.0, 100_000, 1e-14).unwrap();
            for w in &sol.w {
                assert!((w - 1.0 / n as f64).abs() < 1e-6);
            }
            assert!((sol.phi_squared - 1.0 / n as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_kkt_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let k = random_psd(&mut rng, 6);
            let h: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..0.8)).collect();
            let sol = solve_simplex_qp(&k, &h, 5.0, 100_000, 1e-12).unwrap();
            let oracle = kkt_oracle(&k, &h, 5.0);
            assert!((sol.phi_squared - oracle).abs() < 1e-6, "{} vs {oracle}", sol.phi_squared);
            assert!(sol.phi_squared - sol.duality_gap <= oracle + 1e-12);
        }
    }

    #[test]
    fn history_non_increasing_and_gap_reached() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [10, 50, 200, 1000] {
            let k = random_psd(&mut rng, n);
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
            let sol = solve_simplex_qp(&k, &h, 1.0, 100_000, 1e-8).unwrap();
            assert!(sol.history.windows(2).all(|p| p[1] <= p[0]));
            assert!(sol.duality_gap <= 1e-8, "n={n} gap={} iters={}", sol.duality_gap, sol.fw_iterations);
            let total: f64 = sol.w.iter().sum();
            assert!((total - 1.0).abs() < 1e-12 && sol.w.iter().all(|&x| x >= 0.0));
            // reported objective matches a from-scratch evaluation
            let wv = DVector::from_vec(sol.w.clone());
            let val = (wv.transpose() * &k * &wv)[(0, 0)] - 2.0 * wv.dot(&DVector::from_vec(h.clone())) + 1.0;
            assert!((val - sol.phi_squared).abs() <= 1e-10 * val.abs());
        }
    }

    #[test]
    fn ill_conditioned_reaches_tolerance() {
        // a wide kernel on clustered points is numerically singular
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<f64> = (0..60).map(|_| rng.random_range(-0.3..0.3)).collect();
        let k = DMatrix::from_fn(60, 60, |i, j| (-0.5 * (pts[i] - pts[j]).powi(2) / 4.0).exp());
        let h: Vec<f64> = pts.iter().map(|x| 0.9 * (-0.5 * (x - 0.1).powi(2) / 5.0).exp()).collect();
        let sol = solve_simplex_qp(&k, &h, 0.8, 100_000, 1e-10).unwrap();
        assert!(sol.duality_gap <= 1e-10, "gap {} after {}", sol.duality_gap, sol.fw_iterations);
        assert!(sol.history.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn rejects_non_finite() {
        let k = DMatrix::from_element(2, 2, f64::NAN);
        assert!(solve_simplex_qp(&k, &[0.0, 0.0], 0.0, 10, 1e-8).is_err());
        assert!(solve_simplex_qp(&DMatrix::identity(2, 2), &[0.0], 0.0, 10, 1e-8).is_err());
    }
}
