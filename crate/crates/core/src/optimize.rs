//! BFGS with a strong-Wolfe line search.
//!
//! Trial points where the objective is undefined are treated as +∞, so the
//! line search backs away from them.

use nalgebra::{DMatrix, DVector};

pub trait Objective {
    /// Value and gradient, or `None` where the objective is undefined.
    fn value_grad(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)>;

    /// Polled after every accepted step; `true` stops the run early.
    fn abort(&self, _x: &DVector<f64>) -> bool {
        false
    }
}

impl<F> Objective for F
where
    F: Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    fn value_grad(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        self(x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Euclidean gradient-norm tolerance.
    pub gtol: f64,
    pub max_iter: usize,
    /// Largest Euclidean step length tried by the line search.
    pub max_step: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            gtol: 1e-8,
            max_iter: 2000,
            max_step: f64::INFINITY,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
    Aborted,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad.norm()
    }
}

struct Point {
    alpha: f64,
    f: f64,
    df: f64,
    x: DVector<f64>,
    g: DVector<f64>,
}

struct LineSearch<'a, O: Objective> {
    obj: &'a O,
    x0: &'a DVector<f64>,
    p: &'a DVector<f64>,
    f0: f64,
    df0: f64,
    c1: f64,
    c2: f64,
    evals: usize,
}

impl<O: Objective> LineSearch<'_, O> {
    fn eval(&mut self, alpha: f64) -> Point {
        self.evals += 1;
        let x = self.x0 + self.p * alpha;
        match self.obj.value_grad(&x) {
            Some((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => {
                let df = g.dot(self.p);
                Point { alpha, f, df, x, g }
            }
            _ => Point {
                alpha,
                f: f64::INFINITY,
                df: f64::NAN,
                x,
                g: DVector::zeros(self.x0.len()),
            },
        }
    }

    /// Armijo, or its round-off tolerant form once f has flattened out.
    fn decrease_ok(&self, q: &Point) -> bool {
        if q.f <= self.f0 + self.c1 * q.alpha * self.df0 {
            return true;
        }
        let eps_f = 1e-13 * self.f0.abs().max(1e-300);
        q.f <= self.f0 + eps_f && q.df <= (2.0 * self.c1 - 1.0) * self.df0
    }

    fn curvature_ok(&self, q: &Point) -> bool {
        q.df.abs() <= -self.c2 * self.df0
    }

    fn search(&mut self, alpha_init: f64, alpha_max: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            df: self.df0,
            x: self.x0.clone(),
            g: DVector::zeros(0),
        };
        let mut alpha = alpha_init.min(alpha_max);
        for i in 0..40 {
            let cur = self.eval(alpha);
            if !self.decrease_ok(&cur) || (i > 0 && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature_ok(&cur) {
                return Some(cur);
            }
            if cur.df >= 0.0 {
                return self.zoom(cur, prev);
            }
            if alpha >= alpha_max {
                return Some(cur);
            }
            alpha = (2.0 * alpha).min(alpha_max);
            prev = cur;
        }
        None
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        for _ in 0..50 {
            let (a, b) = (lo.alpha, hi.alpha);
            let width = (b - a).abs();
            if width <= 1e-16 * a.abs().max(b.abs()) {
                break;
            }
            // minimiser of the quadratic through (lo.f, lo.df, hi.f)
            let mut t = 0.5 * (a + b);
            if hi.f.is_finite() {
                let d = b - a;
                let denom = 2.0 * (hi.f - lo.f - lo.df * d);
                if denom > 0.0 {
                    t = a - lo.df * d * d / denom;
                }
            }
            let (l, u) = (a.min(b), a.max(b));
            let t = t.clamp(l + 0.1 * width, u - 0.1 * width);
            let cur = self.eval(t);
            if !self.decrease_ok(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature_ok(&cur) {
                    return Some(cur);
                }
                if cur.df * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        (lo.alpha > 0.0 && lo.f < self.f0).then_some(lo)
    }
}

pub fn bfgs<O: Objective>(obj: &O, x0: DVector<f64>, opts: &Options) -> Option<Minimum> {
    let n = x0.len();
    let (mut f, mut g) = obj.value_grad(&x0)?;
    if !f.is_finite() {
        return None;
    }
    let mut x = x0;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut evaluations = 1;
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if g.norm() < opts.gtol {
            status = Status::Converged;
            break;
        }
        let mut p = -(&h * &g);
        let mut df0 = g.dot(&p);
        if !(df0 < 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            p = -g.clone();
            df0 = -g.norm_squared();
        }
        let pn = p.norm();
        let alpha_max = opts.max_step / pn;
        let alpha_init = if fresh { (1.0 / pn).min(1.0) } else { 1.0 };
        let mut ls = LineSearch {
            obj,
            x0: &x,
            p: &p,
            f0: f,
            df0,
            c1: opts.c1,
            c2: opts.c2,
            evals: 0,
        };
        let step = ls.search(alpha_init, alpha_max);
        evaluations += ls.evals;
        let Some(q) = step else {
            if fresh {
                status = Status::LineSearchFailed;
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        iterations += 1;
        let s = &q.x - &x;
        let y = &q.g - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if fresh {
                // Shanno–Phua initial scaling
                h = DMatrix::identity(n, n) * (sy / y.norm_squared());
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ, expanded
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        x = q.x;
        f = q.f;
        g = q.g;
        if obj.abort(&x) {
            status = Status::Aborted;
            break;
        }
    }
    if status == Status::MaxIterations && g.norm() < opts.gtol {
        status = Status::Converged;
    }
    Some(Minimum {
        x,
        f,
        grad: g,
        iterations,
        evaluations,
        status,
    })
}
