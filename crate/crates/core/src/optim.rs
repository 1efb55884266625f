//! Small bound-constrained optimizers used for hyperparameter fitting and
//! acquisition polishing.

/// Projected L-BFGS minimizer with backtracking line search.
///
/// `f` returns the objective and its gradient. Coordinates are clipped into
/// `[lo, hi]` after every step; gradient components pushing against an active
/// bound are zeroed before the direction is computed.
pub fn lbfgs_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], max_iter: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const MEM: usize = 6;
    let n = x0.len();
    let clip = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0.to_vec();
    clip(&mut x);
    let Some((mut fx, mut g)) = f(&x) else {
        return (x, f64::INFINITY);
    };
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();

    for _ in 0..max_iter {
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let pg_norm = pg.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if pg_norm < 1e-6 {
            break;
        }

        // Two-loop recursion on the free subspace.
        let mut q = pg.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for j in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[j], &s_hist[j]);
            alphas[j] = rho * dot(&s_hist[j], &q);
            axpy(&mut q, -alphas[j], &y_hist[j]);
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1.0 / pg_norm.max(1.0)
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for j in 0..k {
            let rho = 1.0 / dot(&y_hist[j], &s_hist[j]);
            let beta = rho * dot(&y_hist[j], &q);
            axpy(&mut q, alphas[j] - beta, &s_hist[j]);
        }
        let mut dir: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&dir, &pg) >= 0.0 {
            dir = pg.iter().map(|v| -v).collect();
            s_hist.clear();
            y_hist.clear();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + step * dir[i]).collect();
            clip(&mut xn);
            let moved: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
            let decrease = dot(&pg, &moved);
            if decrease >= 0.0 && moved.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease.min(0.0) {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if dot(&s, &y) > 1e-10 {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > MEM {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        if improvement.abs() < 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, fx)
}

/// Compass search maximizer: probes ±step along each axis, moves on the first
/// improvement, halves the step when no probe improves.
pub fn pattern_search_max<F>(
    f: F,
    x0: &[f64],
    f0: f64,
    lo: &[f64],
    hi: &[f64],
    initial_step: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut step = initial_step.to_vec();
    let mut evals = 0;
    let min_step: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) * 1e-9).collect();
    while evals < max_evals {
        let mut improved = false;
        'axes: for i in 0..n {
            for sign in [1.0, -1.0] {
                if evals >= max_evals {
                    break 'axes;
                }
                let mut xn = x.clone();
                xn[i] = (x[i] + sign * step[i]).clamp(lo[i], hi[i]);
                if xn[i] == x[i] {
                    continue;
                }
                let v = f(&xn);
                evals += 1;
                if v > fx {
                    x = xn;
                    fx = v;
                    improved = true;
                    break 'axes;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            if (0..n).all(|i| step[i] < min_step[i]) {
                break;
            }
        }
    }
    (x, fx)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
