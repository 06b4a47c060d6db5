//! Projected gradient ascent over a product of probability simplices.
//!
//! Used by both the per-eNB PF scheduler (one simplex per RB) and the relaxed
//! association solver (one simplex per UE row). Steps are Barzilai-Borwein
//! scaled with a non-monotone Armijo backtracking search.

/// Euclidean projection of `v` onto `{p : p >= 0, sum p = 1}`.
pub fn project_simplex(v: &mut [f64]) {
    match v.len() {
        0 => return,
        1 => {
            v[0] = 1.0;
            return;
        }
        _ => {}
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // Absorb rounding so the block sums to one to machine precision.
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        let (imax, _) = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let rest: f64 = v
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != imax)
            .map(|(_, x)| x)
            .sum();
        v[imax] = (1.0 - rest).max(0.0);
    }
}

/// A concave objective to maximise. `value` returns `-inf` outside its domain.
pub(crate) trait ConcaveObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

/// Index sets of the variables forming each simplex. Variables outside every
/// block are held fixed.
pub(crate) struct SimplexBlocks {
    pub blocks: Vec<Vec<usize>>,
}

impl SimplexBlocks {
    pub fn project(&self, x: &mut [f64]) {
        let mut buf = Vec::new();
        for block in &self.blocks {
            buf.clear();
            buf.extend(block.iter().map(|&i| x[i]));
            project_simplex(&mut buf);
            for (&i, &v) in block.iter().zip(&buf) {
                x[i] = v;
            }
        }
    }

    /// `|| P(x + grad) - x ||_inf`, zero exactly at stationary points.
    pub fn stationarity(&self, x: &[f64], grad: &[f64]) -> f64 {
        let mut trial: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a + g).collect();
        self.project(&mut trial);
        self.blocks
            .iter()
            .flatten()
            .map(|&i| (trial[i] - x[i]).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SpgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e12;
const ARMIJO: f64 = 1e-4;
const MEMORY: usize = 10;

pub(crate) fn spg_maximize<F: ConcaveObjective>(
    f: &F,
    blocks: &SimplexBlocks,
    x0: Vec<f64>,
    tol: f64,
    max_iters: usize,
) -> SpgOutcome {
    let n = x0.len();
    let mut x = x0;
    blocks.project(&mut x);
    let mut fx = f.value(&x);
    debug_assert!(fx.is_finite(), "starting point outside the domain");
    let mut g = vec![0.0; n];
    f.gradient(&x, &mut g);
    let mut residual = blocks.stationarity(&x, &g);
    let mut step = if residual > 0.0 {
        (1.0 / residual).clamp(STEP_MIN, STEP_MAX)
    } else {
        1.0
    };
    let mut history = vec![fx];
    let mut trial = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    while residual > tol && iterations < max_iters {
        iterations += 1;
        for i in 0..n {
            trial[i] = x[i] + step * g[i];
        }
        blocks.project(&mut trial);
        let mut slope = 0.0;
        for i in 0..n {
            dir[i] = trial[i] - x[i];
            slope += g[i] * dir[i];
        }
        if slope <= 0.0 {
            break;
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = 1.0;
        let accepted = loop {
            for i in 0..n {
                trial[i] = x[i] + alpha * dir[i];
            }
            let ft = f.value(&trial);
            if ft.is_finite() && ft >= reference + ARMIJO * alpha * slope {
                break Some(ft);
            }
            // Accept plain ascent once the step is too short for the
            // non-monotone test to resolve in floating point.
            if ft.is_finite() && ft > fx && alpha * slope <= 1e-15 * fx.abs().max(1.0) {
                break Some(ft);
            }
            alpha *= 0.5;
            if alpha < 1e-20 {
                break None;
            }
        };
        let Some(f_trial) = accepted else { break };

        f.gradient(&trial, &mut g_new);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            ss += s * s;
            sy -= s * (g_new[i] - g[i]);
        }
        step = if sy > 0.0 {
            (ss / sy).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX
        };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_trial;
        history.push(fx);
        if history.len() > MEMORY {
            history.remove(0);
        }
        residual = blocks.stationarity(&x, &g);
    }

    SpgOutcome {
        x,
        value: fx,
        residual,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        let mut v = vec![0.5, 0.5];
        project_simplex(&mut v);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![2.0, 0.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0]);
        let mut v = vec![0.0, 0.0, 0.0];
        project_simplex(&mut v);
        for x in &v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut v = vec![-7.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0]);
    }

    /// Brute-force check of the projection's optimality conditions: the
    /// result is feasible and no feasible pairwise mass transfer brings it
    /// closer to `v`.
    fn is_projection(v: &[f64], p: &[f64]) -> bool {
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || p.iter().any(|x| *x < 0.0) {
            return false;
        }
        // KKT: p_i > 0 => v_i - p_i = theta; p_i = 0 => v_i <= theta.
        let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
        let theta = v[support[0]] - p[support[0]];
        support.iter().all(|&i| (v[i] - p[i] - theta).abs() < 1e-9)
            && (0..p.len())
                .filter(|&i| p[i] == 0.0)
                .all(|i| v[i] <= theta + 1e-9)
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_optimal(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            let mut p = v.clone();
            project_simplex(&mut p);
            prop_assert!(is_projection(&v, &p));
        }

        #[test]
        fn projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            let mut p = v.clone();
            project_simplex(&mut p);
            let mut q = p.clone();
            project_simplex(&mut q);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    struct Entropy;

    impl ConcaveObjective for Entropy {
        fn value(&self, x: &[f64]) -> f64 {
            // sum log(x_i) + linear tilt; maximiser is known in closed form.
            x.iter().zip([1.0, 2.0, 3.0]).map(|(v, w)| w * v.ln()).sum()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for (i, w) in [1.0, 2.0, 3.0].iter().enumerate() {
                g[i] = w / x[i];
            }
        }
    }

    #[test]
    fn spg_finds_weighted_log_optimum() {
        let blocks = SimplexBlocks {
            blocks: vec![vec![0, 1, 2]],
        };
        let out = spg_maximize(&Entropy, &blocks, vec![1.0 / 3.0; 3], 1e-12, 10_000);
        for (x, want) in out.x.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((x - want).abs() < 1e-9, "{x} vs {want}");
        }
        assert!(out.residual <= 1e-12);
    }
}
