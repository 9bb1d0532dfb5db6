//! Derivative-free Nelder–Mead simplex minimizer.
//!
//! Uses the standard coefficients (reflection 1, expansion 2, contraction
//! 1/2, shrink 1/2) with both outside and inside contractions.

/// Stopping rule and initial simplex shape.
#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex along each coordinate.
    pub step: Vec<f64>,
    pub max_iterations: usize,
    /// Stop once every vertex lies within this distance (max-norm) of the best one...
    pub x_tolerance: f64,
    /// ...and every vertex cost lies within this distance of the best cost.
    pub f_tolerance: f64,
}

impl SimplexOptions {
    pub fn uniform(dim: usize, step: f64) -> Self {
        Self {
            step: vec![step; dim],
            max_iterations: 5000,
            x_tolerance: 1e-8,
            f_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best cost after each iteration.
    pub history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn lerp(base: &[f64], toward: &[f64], t: f64) -> Vec<f64> {
    base.iter()
        .zip(toward)
        .map(|(b, w)| b + t * (w - b))
        .collect()
}

/// Minimizes `f` starting from `x0`.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n > 0, "simplex dimension must be positive");
    assert_eq!(opts.step.len(), n, "one step per coordinate");

    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut verts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    verts.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.step[i];
        let fx = eval(&x);
        verts.push((x, fx));
    }

    let mut history = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    loop {
        verts.sort_by(|a, b| a.1.total_cmp(&b.1));

        let (best, fbest) = (&verts[0].0, verts[0].1);
        let diameter = verts[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = verts[1..]
            .iter()
            .map(|(_, fx)| (fx - fbest).abs())
            .fold(0.0, f64::max);
        if diameter <= opts.x_tolerance && spread <= opts.f_tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &verts[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = verts[n].0.clone();
        let fworst = verts[n].1;
        let fsecond = verts[n - 1].1;

        let xr = lerp(&centroid, &worst, -REFLECT);
        let fr = eval(&xr);

        if fr < fbest {
            let xe = lerp(&centroid, &worst, -REFLECT * EXPAND);
            let fe = eval(&xe);
            verts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < fsecond {
            verts[n] = (xr, fr);
        } else {
            let accepted = if fr < fworst {
                let xc = lerp(&centroid, &worst, -REFLECT * CONTRACT);
                let fc = eval(&xc);
                (fc <= fr).then_some((xc, fc))
            } else {
                let xcc = lerp(&centroid, &worst, CONTRACT);
                let fcc = eval(&xcc);
                (fcc < fworst).then_some((xcc, fcc))
            };
            match accepted {
                Some(v) => verts[n] = v,
                None => {
                    let anchor = verts[0].0.clone();
                    for v in verts.iter_mut().skip(1) {
                        let x = lerp(&anchor, &v.0, SHRINK);
                        let fx = eval(&x);
                        *v = (x, fx);
                    }
                }
            }
        }

        let current = verts.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        history.push(current);
    }

    let (x, cost) = verts.swap_remove(0);
    SimplexResult {
        x,
        cost,
        iterations,
        evaluations,
        converged,
        history,
    }
}
