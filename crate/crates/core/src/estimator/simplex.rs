//! Nelder-Mead downhill simplex minimizer over fixed-size parameter vectors.

use crate::error::{Error, Result};

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Largest coordinate distance of any vertex from the best vertex.
    pub x_tolerance: f64,
    /// Spread between the worst and best vertex values.
    pub f_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            x_tolerance: 1e-9,
            f_tolerance: 1e-24,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome<const N: usize> {
    pub argmin: [f64; N],
    pub f_min: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best vertex value after every iteration, starting with the initial simplex.
    pub best_trace: Vec<f64>,
}

struct Vertex<const N: usize> {
    x: [f64; N],
    f: f64,
}

fn eval<const N: usize, F: FnMut(&[f64; N]) -> f64>(f: &mut F, x: [f64; N]) -> Vertex<N> {
    let v = f(&x);
    Vertex {
        x,
        f: if v.is_nan() { f64::INFINITY } else { v },
    }
}

// a + t·(b − a)
fn lerp<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
}

/// Minimizes `f` starting from the simplex `x0, x0 + step_i·e_i`.
///
/// Stops when both the simplex diameter and the value spread are below their
/// tolerances, or after `max_iterations` iterations.
pub fn nelder_mead<const N: usize, F>(
    mut f: F,
    x0: [f64; N],
    step: [f64; N],
    opts: &SimplexOptions,
) -> Result<SimplexOutcome<N>>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut simplex: Vec<Vertex<N>> = Vec::with_capacity(N + 1);
    for k in 0..=N {
        let mut x = x0;
        if k > 0 {
            x[k - 1] += step[k - 1];
        }
        let fx = f(&x);
        if !fx.is_finite() {
            return Err(Error::NonFiniteStart { vertex: k });
        }
        simplex.push(Vertex { x, f: fx });
    }
    simplex.sort_by(|a, b| a.f.total_cmp(&b.f));

    let mut trace = vec![simplex[0].f];
    let mut iterations = 0;
    let converged = loop {
        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.x.iter().zip(best.x.iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = simplex[N].f - best.f;
        if diameter <= opts.x_tolerance && spread <= opts.f_tolerance {
            break true;
        }
        if iterations >= opts.max_iterations {
            break false;
        }
        iterations += 1;

        let mut centroid = [0.0; N];
        for v in &simplex[..N] {
            for (c, x) in centroid.iter_mut().zip(v.x.iter()) {
                *c += x / N as f64;
            }
        }
        let worst = &simplex[N];
        let reflected = eval(&mut f, lerp(&centroid, &worst.x, -REFLECTION));

        let replacement = if reflected.f < simplex[0].f {
            let expanded = eval(&mut f, lerp(&centroid, &worst.x, -REFLECTION * EXPANSION));
            Some(if expanded.f < reflected.f {
                expanded
            } else {
                reflected
            })
        } else if reflected.f < simplex[N - 1].f {
            Some(reflected)
        } else if reflected.f < worst.f {
            let outside = eval(&mut f, lerp(&centroid, &reflected.x, CONTRACTION));
            (outside.f <= reflected.f).then_some(outside)
        } else {
            let inside = eval(&mut f, lerp(&centroid, &worst.x, CONTRACTION));
            (inside.f < worst.f).then_some(inside)
        };

        match replacement {
            Some(v) => simplex[N] = v,
            None => {
                let anchor = simplex[0].x;
                for v in simplex[1..].iter_mut() {
                    *v = eval(&mut f, lerp(&anchor, &v.x, SHRINK));
                }
            }
        }
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        trace.push(simplex[0].f);
    };

    Ok(SimplexOutcome {
        argmin: simplex[0].x,
        f_min: simplex[0].f,
        iterations,
        converged,
        best_trace: trace,
    })
}
