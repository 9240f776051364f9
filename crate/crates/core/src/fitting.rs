//! Small fitting utilities: least-squares lines, golden-section search and
//! Nelder–Mead simplex minimization.

/// Least-squares line y = intercept + slope·x with coefficient of
/// determination.  Inputs must have equal length ≥ 2.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "line fit needs at least 2 points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LineFit { slope, intercept, r_squared }
}

/// Golden-section minimization of a unimodal f on [a, b].
pub fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Nelder–Mead simplex minimization.  `scale` sets the initial simplex edge
/// along each coordinate.  Returns (argmin, min).
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    scale: &[f64],
    max_iter: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    assert_eq!(scale.len(), n);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale[i];
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    for _ in 0..max_iter {
        // order ascending by value
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&i, &j| fv[i].partial_cmp(&fv[j]).unwrap_or(std::cmp::Ordering::Equal));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ofv: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
        simplex = ordered;
        fv = ofv;

        if (fv[n] - fv[0]).abs() <= ftol * (1.0 + fv[0].abs()) {
            break;
        }

        // centroid of all but worst
        let mut cen = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, x) in cen.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let refl: Vec<f64> =
            cen.iter().zip(&worst).map(|(c, w)| c + ALPHA * (c - w)).collect();
        let fr = f(&refl);
        if fr < fv[0] {
            let exp: Vec<f64> =
                cen.iter().zip(&worst).map(|(c, w)| c + GAMMA * (c - w)).collect();
            let fe = f(&exp);
            if fe < fr {
                simplex[n] = exp;
                fv[n] = fe;
            } else {
                simplex[n] = refl;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = refl;
            fv[n] = fr;
        } else {
            let contr: Vec<f64> =
                cen.iter().zip(&worst).map(|(c, w)| c + RHO * (w - c)).collect();
            let fc = f(&contr);
            if fc < fv[n] {
                simplex[n] = contr;
                fv[n] = fc;
            } else {
                let best = simplex[0].clone();
                for v in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(&best) {
                        *x = b + SIGMA * (*x - b);
                    }
                }
                for (i, v) in simplex.iter().enumerate().skip(1) {
                    fv[i] = f(v);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    (simplex[best].clone(), fv[best])
}
