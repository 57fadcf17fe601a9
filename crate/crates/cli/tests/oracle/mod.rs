//! Brute-force reference computations, independent of the library's
//! closed forms.

use gtv::{EmpiricalGraph, LocalDataset};
use nalgebra::{DMatrix, DVector};

/// Derivative-free minimization (Nelder–Mead with restarts). Tolerates
/// nonsmooth objectives and `+∞` outside a domain.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> Vec<f64> {
    let mut best = x0.to_vec();
    let mut best_val = f(&best);
    let mut scale = step;
    for _ in 0..60 {
        let (x, v) = nm_run(f, &best, scale);
        let improved = v < best_val;
        if v <= best_val {
            best = x;
            best_val = v;
        }
        if !improved {
            scale *= 0.1;
            if scale < 1e-13 {
                break;
            }
        }
    }
    best
}

fn nm_run(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };
    for _ in 0..20_000 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if size < 1e-15 * (1.0 + simplex[0].0.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = point(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = point(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                point(&centroid, &reflected, 0.5)
            } else {
                point(&centroid, &worst.0, 0.5)
            };
            let fc = f(&contracted);
            if fc < worst.1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = point(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// `argmin_z f(z) + ‖z − v‖²/(2t)` by direct search.
pub fn numeric_prox(f: &dyn Fn(&[f64]) -> f64, v: &[f64], t: f64) -> Vec<f64> {
    let obj = |z: &[f64]| f(z) + z.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * t);
    let scale = 0.5 * (1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max));
    nelder_mead(&obj, v, scale)
}

/// Normal equations `Σ (1/mᵢ)XᵢᵀXᵢ w = Σ (1/mᵢ)Xᵢᵀyᵢ` of the pooled
/// average squared error.
pub fn pooled_least_squares(datasets: &[&LocalDataset]) -> Vec<f64> {
    let d = datasets[0].dim();
    let mut a = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for ds in datasets {
        let m = ds.len() as f64;
        a += ds.features().transpose() * ds.features() / m;
        rhs += ds.features().transpose() * ds.labels() / m;
    }
    a.lu()
        .solve(&rhs)
        .expect("pooled system is nonsingular")
        .as_slice()
        .to_vec()
}

/// Quadratic `wᵀQw − 2bᵀw + c` of the average squared error on a dataset.
pub fn squared_error_form(ds: &LocalDataset) -> (DMatrix<f64>, DVector<f64>, f64) {
    let m = ds.len() as f64;
    let x = ds.features();
    let y = ds.labels();
    (x.transpose() * x / m, x.transpose() * y / m, y.dot(y) / m)
}

/// Bracket `[lo, hi]` on the optimal value of
/// `Σᵢ (1/mᵢ)‖yᵢ − Xᵢwᵢ‖² + λ Σₑ Aₑ ‖w_{e+} − w_{e−}‖₂`, from Newton's
/// method on `‖v‖₂ ≈ sqrt(‖v‖² + μ²)` with `μ → 1e-12`. Returns the bracket
/// and the minimizer.
pub fn network_lasso_optimum(g: &EmpiricalGraph, data: &[LocalDataset], lambda: f64) -> (f64, f64, DVector<f64>) {
    let n = g.node_count();
    let d = data[0].dim();
    let forms: Vec<_> = data.iter().map(squared_error_form).collect();
    let total_weight: f64 = g.edges().iter().map(|e| e.weight).sum();

    let objective = |w: &DVector<f64>, mu: f64| -> f64 {
        let mut v = 0.0;
        for (i, (q, b, c)) in forms.iter().enumerate() {
            let wi = w.rows(i * d, d);
            v += (wi.transpose() * q * wi)[(0, 0)] - 2.0 * b.dot(&wi) + c;
        }
        for e in g.edges() {
            let diff = w.rows(e.head * d, d) - w.rows(e.tail * d, d);
            v += lambda * e.weight * (diff.norm_squared() + mu * mu).sqrt();
        }
        v
    };

    let mut w = DVector::zeros(n * d);
    let mut mu = 1e-1;
    while mu >= 1e-12 {
        for _ in 0..200 {
            let mut grad = DVector::zeros(n * d);
            let mut hess = DMatrix::zeros(n * d, n * d);
            for (i, (q, b, _)) in forms.iter().enumerate() {
                let wi = w.rows(i * d, d).into_owned();
                grad.rows_mut(i * d, d).copy_from(&(2.0 * (q * &wi - b)));
                hess.view_mut((i * d, i * d), (d, d)).copy_from(&(2.0 * q));
            }
            for e in g.edges() {
                let diff = w.rows(e.head * d, d) - w.rows(e.tail * d, d);
                let s = (diff.norm_squared() + mu * mu).sqrt();
                let c = lambda * e.weight;
                let gv = &diff * (c / s);
                let hv = (DMatrix::identity(d, d) - &diff * diff.transpose() / (s * s)) * (c / s);
                for (node, sign) in [(e.head, 1.0), (e.tail, -1.0)] {
                    let mut rows = grad.rows_mut(node * d, d);
                    rows += &gv * sign;
                }
                for (a, b, sign) in [
                    (e.head, e.head, 1.0),
                    (e.tail, e.tail, 1.0),
                    (e.head, e.tail, -1.0),
                    (e.tail, e.head, -1.0),
                ] {
                    let mut block = hess.view_mut((a * d, b * d), (d, d));
                    block += &hv * sign;
                }
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => grad.clone(),
            };
            let decrement = grad.dot(&step);
            if decrement <= 1e-28 {
                break;
            }
            let f0 = objective(&w, mu);
            let mut t = 1.0;
            loop {
                let trial = &w - &step * t;
                if objective(&trial, mu) <= f0 - 0.25 * t * decrement || t < 1e-12 {
                    w = trial;
                    break;
                }
                t *= 0.5;
            }
        }
        mu *= 0.1;
    }
    let hi = objective(&w, 0.0);
    let lo = hi - lambda * total_weight * 1e-12;
    (lo, hi, w)
}
