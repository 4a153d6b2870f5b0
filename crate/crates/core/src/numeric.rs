//! Small derivative-free routines shared by the fit and the optimizers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

pub(crate) struct Simplex {
    pub best: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

/// Nelder–Mead minimization with standard coefficients. Stops when both the
/// spread of function values and the simplex diameter fall below `tol`.
pub(crate) fn nelder_mead<F>(f: F, start: &[f64], step: &[f64], tol: f64, max_iter: usize) -> Simplex
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    pts.push(start.to_vec());
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut converged = false;

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[dim] - vals[0]).abs();
        let diameter =
            pts[1..].iter().flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if spread <= tol * (1.0 + vals[0].abs()) && diameter <= tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim).map(|j| pts[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[dim]).map(|(c, w)| c + t * (w - c)).collect() };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                pts[dim] = expanded;
                vals[dim] = fe;
            } else {
                pts[dim] = reflected;
                vals[dim] = fr;
            }
            continue;
        }
        if fr < vals[dim - 1] {
            pts[dim] = reflected;
            vals[dim] = fr;
            continue;
        }
        let contracted = if fr < vals[dim] { along(-0.5) } else { along(0.5) };
        let fc = f(&contracted);
        if fc < vals[dim].min(fr) {
            pts[dim] = contracted;
            vals[dim] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=dim {
            let p: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            vals[i] = f(&p);
            pts[i] = p;
        }
    }

    let best = (0..=dim).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex { best: pts[best].clone(), value: vals[best], converged }
}

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`.
/// Returns the final bracket; the endpoints themselves are never evaluated.
pub(crate) fn golden_section_max<F>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    (a, b)
}

/// Bisection for a sign change of `g` on `[lo, hi]`, assuming `g(lo) > 0 > g(hi)`
/// (a decreasing derivative). Returns the midpoint of the final bracket.
pub(crate) fn bisect_decreasing<G>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    G: Fn(f64) -> f64,
{
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `ln(e^x + e^y)` without overflow.
pub(crate) fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}
