use std::sync::Arc;

use crate::error::{Error, Result};

use super::{Grid, ScalarField2D};

/// Artificial boundary condition at `y_min` and `y_max`, applied by eliminating the
/// boundary node through `u_0 = lambda u_1 + mu u_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// `u_yy = 0`: `u_0 = 2 u_1 - u_2`.
    Linear,
    /// `(ln u)_yy = 0` using the previous time level; exact for exponentials.
    /// Falls back to [`Boundary::Linear`] where `u` changes sign near the edge.
    #[default]
    LogLinear,
    /// `u_y = 0`: `u_0 = u_1`.
    ZeroGradient,
}

/// Theta-weighted time stepping. `theta = 0.5` is Crank-Nicolson, `theta = 1` implicit Euler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaScheme {
    pub theta: f64,
    /// Implicit Euler steps taken first from the terminal time, to damp non-smooth data.
    pub startup_implicit_steps: usize,
    pub boundary: Boundary,
}

impl Default for ThetaScheme {
    fn default() -> Self {
        Self {
            theta: 0.5,
            startup_implicit_steps: 1,
            boundary: Boundary::LogLinear,
        }
    }
}

impl ThetaScheme {
    pub fn implicit_euler(boundary: Boundary) -> Self {
        Self {
            theta: 1.0,
            startup_implicit_steps: 0,
            boundary,
        }
    }
}

/// Coefficients of `u_t + a u_yy + b(t,y) u_y + c(t,y) u + f(t,y) = 0`.
pub trait Coefficients {
    /// The constant diffusion coefficient `a > 0`.
    fn diffusion(&self) -> f64;

    /// Fills drift `b`, reaction `c` and source `f` on time row `j`.
    fn fill_row(&self, j: usize, y: &[f64], b: &mut [f64], c: &mut [f64], f: &mut [f64]);
}

/// Closure-backed [`Coefficients`] for pointwise coefficient functions.
pub struct FnCoefficients<B, C, F> {
    pub diffusion: f64,
    pub t: Vec<f64>,
    pub drift: B,
    pub reaction: C,
    pub source: F,
}

impl<B, C, F> Coefficients for FnCoefficients<B, C, F>
where
    B: Fn(f64, f64) -> f64,
    C: Fn(f64, f64) -> f64,
    F: Fn(f64, f64) -> f64,
{
    fn diffusion(&self) -> f64 {
        self.diffusion
    }

    fn fill_row(&self, j: usize, y: &[f64], b: &mut [f64], c: &mut [f64], f: &mut [f64]) {
        let t = self.t[j];
        for (i, &yi) in y.iter().enumerate() {
            b[i] = (self.drift)(t, yi);
            c[i] = (self.reaction)(t, yi);
            f[i] = (self.source)(t, yi);
        }
    }
}

/// Solves a tridiagonal system in place by the Thomas algorithm.
///
/// `sub[0]` and `sup[n-1]` are ignored. Fails if the matrix is not diagonally dominant
/// or a pivot vanishes; `step` is carried into the error.
pub fn thomas(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
    step: usize,
) -> Result<()> {
    let n = diag.len();
    for i in 0..n {
        let off = if i > 0 { sub[i].abs() } else { 0.0 } + if i + 1 < n { sup[i].abs() } else { 0.0 };
        if !(diag[i].abs() >= off * (1.0 - 1e-12)) {
            return Err(Error::Solver {
                step,
                reason: format!(
                    "row {i} is not diagonally dominant (|diag| = {:.3e}, off-diagonal sum = {off:.3e})",
                    diag[i].abs()
                ),
            });
        }
    }
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Solver {
            step,
            reason: "zero pivot in row 0".into(),
        });
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Solver {
                step,
                reason: format!("zero pivot in row {i}"),
            });
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
    Ok(())
}

fn boundary_weights(kind: Boundary, near: f64, next: f64) -> (f64, f64) {
    match kind {
        Boundary::Linear => (2.0, -1.0),
        Boundary::ZeroGradient => (1.0, 0.0),
        Boundary::LogLinear => {
            let q = near / next;
            if near != 0.0 && next != 0.0 && q > 0.0 && q.is_finite() {
                (q, 0.0)
            } else {
                (2.0, -1.0)
            }
        }
    }
}

struct Work {
    b: Vec<f64>,
    c: Vec<f64>,
    f: Vec<f64>,
    b_next: Vec<f64>,
    c_next: Vec<f64>,
    f_next: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self {
            b: z(),
            c: z(),
            f: z(),
            b_next: z(),
            c_next: z(),
            f_next: z(),
            sub: z(),
            diag: z(),
            sup: z(),
            rhs: z(),
            scratch: z(),
        }
    }
}

/// Marches backward from time index `end` (holding `terminal`) to index 0.
///
/// `visit(j, u_j)` is called for every level, starting with `j = end`.
pub fn sweep_backward<K, V>(
    grid: &Grid,
    coeffs: &K,
    terminal: &[f64],
    end: usize,
    scheme: &ThetaScheme,
    mut visit: V,
) -> Result<()>
where
    K: Coefficients + ?Sized,
    V: FnMut(usize, &[f64]) -> Result<()>,
{
    let n = grid.n_y();
    let a = coeffs.diffusion();
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("diffusion", "must be finite and > 0"));
    }
    if terminal.len() != n {
        return Err(Error::param("terminal", "length must equal n_y"));
    }
    if end >= grid.n_t() {
        return Err(Error::param("end", "time index out of range"));
    }
    if !(scheme.theta >= 0.0 && scheme.theta <= 1.0) {
        return Err(Error::param("theta", "must lie in [0, 1]"));
    }
    let y = grid.y_nodes();
    let (dt, dy) = (grid.dt(), grid.dy());
    let (ad, bd) = (a / (dy * dy), 0.5 / dy);
    let m = n - 2;

    let mut u = terminal.to_vec();
    let mut w = Work::new(n);
    visit(end, &u)?;
    if end == 0 {
        return Ok(());
    }
    coeffs.fill_row(end, y, &mut w.b_next, &mut w.c_next, &mut w.f_next);

    for (steps, j) in (0..end).rev().enumerate() {
        let th = if steps < scheme.startup_implicit_steps {
            1.0
        } else {
            scheme.theta
        };
        coeffs.fill_row(j, y, &mut w.b, &mut w.c, &mut w.f);

        // explicit half using the level j+1 values
        for k in 0..m {
            let i = k + 1;
            let lu = (ad - w.b_next[i] * bd) * u[i - 1]
                + (-2.0 * ad + w.c_next[i]) * u[i]
                + (ad + w.b_next[i] * bd) * u[i + 1];
            w.rhs[k] = u[i] + (1.0 - th) * dt * lu + dt * (th * w.f[i] + (1.0 - th) * w.f_next[i]);
            w.sub[k] = -th * dt * (ad - w.b[i] * bd);
            w.diag[k] = 1.0 - th * dt * (-2.0 * ad + w.c[i]);
            w.sup[k] = -th * dt * (ad + w.b[i] * bd);
        }
        let (l0, m0) = boundary_weights(scheme.boundary, u[1], u[2]);
        let (l1, m1) = boundary_weights(scheme.boundary, u[n - 2], u[n - 3]);
        let s0 = w.sub[0];
        w.diag[0] += s0 * l0;
        w.sup[0] += s0 * m0;
        let sl = w.sup[m - 1];
        w.diag[m - 1] += sl * l1;
        if m >= 2 {
            w.sub[m - 1] += sl * m1;
        }
        thomas(
            &w.sub[..m],
            &w.diag[..m],
            &w.sup[..m],
            &mut w.rhs[..m],
            &mut w.scratch[..m],
            j,
        )?;
        u[1..n - 1].copy_from_slice(&w.rhs[..m]);
        u[0] = l0 * u[1] + m0 * u[2];
        u[n - 1] = l1 * u[n - 2] + m1 * u[n - 3];
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Solver {
                step: j,
                reason: format!("non-finite solution at y = {}", y[i]),
            });
        }
        visit(j, &u)?;
        std::mem::swap(&mut w.b, &mut w.b_next);
        std::mem::swap(&mut w.c, &mut w.c_next);
        std::mem::swap(&mut w.f, &mut w.f_next);
    }
    Ok(())
}

/// Solves backward over the whole grid and returns every time level.
pub fn solve_backward<K>(
    grid: &Arc<Grid>,
    coeffs: &K,
    terminal: &[f64],
    scheme: &ThetaScheme,
) -> Result<ScalarField2D>
where
    K: Coefficients + ?Sized,
{
    let n = grid.n_y();
    let end = grid.n_t() - 1;
    let mut values = vec![0.0; grid.n_t() * n];
    sweep_backward(grid, coeffs, terminal, end, scheme, |j, row| {
        values[j * n..(j + 1) * n].copy_from_slice(row);
        Ok(())
    })?;
    ScalarField2D::new(grid.clone(), values)
}

/// Convenience wrapper taking the coefficient functions of `(t, y)` directly.
pub fn solve_backward_fn(
    grid: &Arc<Grid>,
    diffusion: f64,
    drift: impl Fn(f64, f64) -> f64,
    reaction: impl Fn(f64, f64) -> f64,
    source: impl Fn(f64, f64) -> f64,
    terminal: impl Fn(f64) -> f64,
    scheme: &ThetaScheme,
) -> Result<ScalarField2D> {
    let coeffs = FnCoefficients {
        diffusion,
        t: grid.t_nodes().to_vec(),
        drift,
        reaction,
        source,
    };
    let g: Vec<f64> = grid.y_nodes().iter().map(|&y| terminal(y)).collect();
    solve_backward(grid, &coeffs, &g, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zero(_: f64, _: f64) -> f64 {
        0.0
    }

    #[test]
    fn thomas_solves_small_system() {
        let sub = [0.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0];
        let sup = [-1.0, -1.0, 0.0];
        let mut rhs = [3.0, 2.0, 3.0];
        let mut s = [0.0; 3];
        thomas(&sub, &diag, &sup, &mut rhs, &mut s, 0).unwrap();
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn thomas_reports_step() {
        let mut rhs = [1.0, 1.0];
        let mut s = [0.0; 2];
        let err = thomas(&[0.0, 5.0], &[1.0, 1.0], &[5.0, 0.0], &mut rhs, &mut s, 17);
        assert!(matches!(err, Err(Error::Solver { step: 17, .. })));
    }

    #[test]
    fn constants_are_preserved() {
        let g = Arc::new(Grid::uniform(1.0, 21, -3.0, 3.0, 31).unwrap());
        for bc in [Boundary::Linear, Boundary::LogLinear, Boundary::ZeroGradient] {
            let scheme = ThetaScheme {
                boundary: bc,
                ..Default::default()
            };
            let u = solve_backward_fn(&g, 0.3, zero, zero, zero, |_| 1.0, &scheme).unwrap();
            assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        }
    }

    fn exp_error(n: usize, bc: Boundary) -> f64 {
        let theta: f64 = 0.2;
        let a = 0.5 * theta * theta;
        let g = Arc::new(Grid::uniform(1.0, n, -4.0, 4.0, n).unwrap());
        let scheme = ThetaScheme {
            boundary: bc,
            ..Default::default()
        };
        let u = solve_backward_fn(&g, a, zero, zero, zero, |y| y.exp(), &scheme).unwrap();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let (t, y) = (g.t(j), g.y(i));
                let exact = (y + a * (1.0 - t)).exp();
                worst = worst.max((u.get(j, i) / exact - 1.0).abs());
            }
        }
        worst
    }

    #[test]
    fn heat_kernel_on_exponentials() {
        let e = exp_error(401, Boundary::LogLinear);
        assert!(e < 1e-4, "max rel error {e}");
    }

    #[test]
    fn refinement_order_two() {
        // drift and reaction make the error visible; reference is a fine grid
        let run = |n: usize| {
            let g = Arc::new(Grid::uniform(1.0, n, -3.0, 3.0, n).unwrap());
            solve_backward_fn(
                &g,
                0.5,
                |t, _| 0.3 + 0.2 * t,
                |_, _| -0.1,
                zero,
                |y| (0.8 * y).exp(),
                &ThetaScheme::default(),
            )
            .unwrap()
        };
        let fine = run(321);
        let mut errs = Vec::new();
        for n in [41usize, 81] {
            let c = run(n);
            let stride = 320 / (n - 1);
            let mut e = 0.0_f64;
            for i in 0..n {
                e = e.max((c.get(0, i) / fine.get(0, i * stride) - 1.0).abs());
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] >= 3.0, "errors {errs:?}");
    }

    #[test]
    fn pure_savings_ode() {
        // constant-in-y: u_t - r u + c0 = 0, u(T) = c0
        let (r, c0) = (0.03, 1.7);
        let g = Arc::new(Grid::uniform(1.0, 201, -2.0, 2.0, 11).unwrap());
        let u = solve_backward_fn(
            &g,
            0.01,
            zero,
            |_, _| -r,
            |_, _| c0,
            |_| c0,
            &ThetaScheme::default(),
        )
        .unwrap();
        let tau: f64 = 1.0;
        let exact = c0 * (-r * tau).exp() + c0 * (1.0 - (-r * tau).exp()) / r;
        assert!((u.get(0, 5) / exact - 1.0).abs() < 1e-6);
    }

    #[test]
    fn visitor_sees_every_level_once() {
        let g = Grid::uniform(1.0, 11, -1.0, 1.0, 9).unwrap();
        let coeffs = FnCoefficients {
            diffusion: 0.1,
            t: g.t_nodes().to_vec(),
            drift: zero,
            reaction: zero,
            source: zero,
        };
        let mut seen = Vec::new();
        sweep_backward(&g, &coeffs, &[1.0; 9], 6, &ThetaScheme::default(), |j, _| {
            seen.push(j);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![6, 5, 4, 3, 2, 1, 0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn implicit_euler_maximum_principle(
            b0 in -1.0f64..1.0, b1 in -1.0f64..1.0,
            c0 in -1.0f64..0.0, a in 0.2f64..1.0,
            g0 in -2.0f64..2.0, g1 in 0.1f64..3.0, k in 0.5f64..4.0,
        ) {
            let g = Arc::new(Grid::uniform(1.0, 41, -3.0, 3.0, 61).unwrap());
            let term = move |y: f64| g0 + g1 * (k * y).sin();
            let (lo, hi) = g.y_nodes().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| {
                (l.min(term(y)), h.max(term(y)))
            });
            let u = solve_backward_fn(
                &g, a,
                move |t, y| b0 + b1 * (t + y).cos(),
                move |t, _| c0 * (1.0 + t) * 0.5,
                zero, term,
                &ThetaScheme::implicit_euler(Boundary::ZeroGradient),
            ).unwrap();
            // with c <= 0 the solution is pulled toward 0, so 0 joins the envelope
            let (lo, hi) = (lo.min(0.0), hi.max(0.0));
            for &v in u.values() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
