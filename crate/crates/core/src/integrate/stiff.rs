//! Adaptive linearly implicit Rosenbrock 2(3) integrator (the modified
//! Rosenbrock pair of Shampine & Reichelt) with continuous output.
//!
//! The second-order solution is L-stable, which the full particle model needs:
//! its relaxation rates (~10⁶ s⁻¹) sit six orders above the motion time scale.
//! Systems are assumed autonomous over each call; piecewise-constant controls
//! are handled by restarting at every switch.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

pub trait StiffSystem<const N: usize> {
    fn rhs(&self, y: &SVector<f64, N>) -> SVector<f64, N>;
    fn jacobian(&self, y: &SVector<f64, N>) -> SMatrix<f64, N, N>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-6, abs: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub jacobians: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.jacobians += o.jacobians;
    }
}

const D: f64 = 0.292_893_218_813_452_5; // 1 / (2 + √2)
const E32: f64 = 7.414_213_562_373_095; // 6 + √2
const MAX_STEPS: usize = 1_000_000;

/// LU factorization with partial pivoting of a small dense matrix.
struct Lu<const N: usize> {
    lu: SMatrix<f64, N, N>,
    perm: [usize; N],
}

impl<const N: usize> Lu<N> {
    fn new(mut a: SMatrix<f64, N, N>) -> Option<Self> {
        let mut perm = [0; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..N {
            let pivot = (k..N).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))?;
            if a[(pivot, k)] == 0.0 || !a[(pivot, k)].is_finite() {
                return None;
            }
            if pivot != k {
                a.swap_rows(pivot, k);
                perm.swap(pivot, k);
            }
            let d = a[(k, k)];
            for i in k + 1..N {
                let f = a[(i, k)] / d;
                a[(i, k)] = f;
                for j in k + 1..N {
                    a[(i, j)] -= f * a[(k, j)];
                }
            }
        }
        Some(Self { lu: a, perm })
    }

    fn solve(&self, b: SVector<f64, N>) -> SVector<f64, N> {
        let mut x = SVector::<f64, N>::from_fn(|i, _| b[self.perm[i]]);
        for i in 0..N {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..N).rev() {
            for j in i + 1..N {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rosenbrock23 {
    pub tol: Tolerances,
}

/// Result of integrating to `t_end`.
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub y_end: SVector<f64, N>,
    /// States at each requested output time, in order.
    pub outputs: Vec<SVector<f64, N>>,
    /// Last accepted step size, a good first guess for a continuation.
    pub last_step: f64,
    pub stats: StepStats,
}

impl Rosenbrock23 {
    pub fn new(tol: Tolerances) -> Result<Self> {
        if !(tol.rel > 0.0 && tol.abs > 0.0) {
            return Err(Error::Config(format!(
                "tolerances must be positive (rel {}, abs {})",
                tol.rel, tol.abs
            )));
        }
        Ok(Self { tol })
    }

    fn error_norm<const N: usize>(&self, err: &SVector<f64, N>, y: &SVector<f64, N>, y_new: &SVector<f64, N>) -> f64 {
        (0..N)
            .map(|i| err[i].abs() / (self.tol.abs + self.tol.rel * y[i].abs().max(y_new[i].abs())))
            .fold(0.0, f64::max)
    }

    /// Ratio of weighted RMS norms of state and derivative (Hairer et al.).
    fn initial_step<const N: usize>(&self, f0: &SVector<f64, N>, y0: &SVector<f64, N>, span: f64) -> f64 {
        let rms = |v: &SVector<f64, N>| {
            ((0..N)
                .map(|i| (v[i] / (self.tol.abs + self.tol.rel * y0[i].abs())).powi(2))
                .sum::<f64>()
                / N as f64)
                .sqrt()
        };
        let (d0, d1) = (rms(y0), rms(f0));
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        h.min(span)
    }

    /// Integrates from `(t0, y0)` to `t_end`, reporting the state at each of
    /// `output_times` (ascending, within `(t0, t_end]`).
    pub fn integrate<S: StiffSystem<N>, const N: usize>(
        &self,
        sys: &S,
        t0: f64,
        y0: SVector<f64, N>,
        t_end: f64,
        output_times: &[f64],
        step_hint: Option<f64>,
    ) -> Result<Solution<N>> {
        let mut stats = StepStats::default();
        let mut outputs = Vec::with_capacity(output_times.len());
        let mut next_out = 0;
        let span = t_end - t0;
        if span <= 0.0 {
            while next_out < output_times.len() && output_times[next_out] <= t0 {
                outputs.push(y0);
                next_out += 1;
            }
            return Ok(Solution {
                y_end: y0,
                outputs,
                last_step: step_hint.unwrap_or(0.0),
                stats,
            });
        }

        let mut t = t0;
        let mut y = y0;
        let mut f0 = sys.rhs(&y);
        let mut h = match step_hint {
            Some(h) if h > 0.0 => h.min(span),
            _ => self.initial_step(&f0, &y, span),
        };
        let mut last_accepted = h;
        let mut jac = sys.jacobian(&y);
        stats.jacobians += 1;
        let mut jac_fresh = true;

        while t < t_end {
            if stats.accepted + stats.rejected > MAX_STEPS {
                return Err(Error::Stiffness {
                    time: t,
                    reason: "step budget exhausted".into(),
                });
            }
            let h_min = 16.0 * f64::EPSILON * t.abs().max(span);
            h = h.max(h_min);
            let final_step = t + h * 1.000_001 >= t_end;
            if final_step {
                h = t_end - t;
            }
            if !jac_fresh {
                jac = sys.jacobian(&y);
                stats.jacobians += 1;
                jac_fresh = true;
            }

            let lu = Lu::new(SMatrix::<f64, N, N>::identity() - h * D * jac);
            let solve = |b: SVector<f64, N>| lu.as_ref().map(|lu| lu.solve(b));
            let Some(k1) = solve(f0) else {
                h *= 0.25;
                stats.rejected += 1;
                continue;
            };
            let f1 = sys.rhs(&(y + 0.5 * h * k1));
            let k2 = match solve(f1 - k1) {
                Some(v) => v + k1,
                None => {
                    h *= 0.25;
                    stats.rejected += 1;
                    continue;
                }
            };
            let y_new = y + h * k2;
            let f2 = sys.rhs(&y_new);
            let k3 = match solve(f2 - E32 * (k2 - f1) - 2.0 * (k1 - f0)) {
                Some(v) => v,
                None => {
                    h *= 0.25;
                    stats.rejected += 1;
                    continue;
                }
            };
            let err_vec = (h / 6.0) * (k1 - 2.0 * k2 + k3);
            let err = self.error_norm(&err_vec, &y, &y_new);
            let finite = y_new.iter().all(|v| v.is_finite()) && err.is_finite();

            if finite && err <= 1.0 {
                let t_new = if final_step { t_end } else { t + h };
                while next_out < output_times.len() && output_times[next_out] <= t_new {
                    let s = ((output_times[next_out] - t) / h).clamp(0.0, 1.0);
                    let c1 = s * (1.0 - s) / (1.0 - 2.0 * D);
                    let c2 = s * (s - 2.0 * D) / (1.0 - 2.0 * D);
                    outputs.push(y + h * (c1 * k1 + c2 * k2));
                    next_out += 1;
                }
                stats.accepted += 1;
                last_accepted = h;
                t = t_new;
                y = y_new;
                f0 = f2;
                jac_fresh = false;
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.8 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
                };
                h *= grow;
            } else {
                stats.rejected += 1;
                if h <= h_min {
                    return Err(Error::Stiffness {
                        time: t,
                        reason: format!("error test failed at minimum step {h_min:e}"),
                    });
                }
                let shrink = if finite {
                    (0.8 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.5)
                } else {
                    0.1
                };
                h *= shrink;
            }
        }
        // Output times that coincide with t_end within rounding.
        while next_out < output_times.len() && output_times[next_out] <= t_end * (1.0 + 1e-15) {
            outputs.push(y);
            next_out += 1;
        }
        Ok(Solution {
            y_end: y,
            outputs,
            last_step: last_accepted,
            stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    /// y' = A y with constant A.
    struct Linear(Matrix2<f64>);

    impl StiffSystem<2> for Linear {
        fn rhs(&self, y: &Vector2<f64>) -> Vector2<f64> {
            self.0 * y
        }
        fn jacobian(&self, _: &Vector2<f64>) -> Matrix2<f64> {
            self.0
        }
    }

    #[test]
    fn decay_matches_exponential() {
        let sys = Linear(Matrix2::new(-1.0, 0.0, 0.0, -2.0));
        let solver = Rosenbrock23::new(Tolerances { rel: 1e-8, abs: 1e-12 }).unwrap();
        let outs = [0.5, 1.0, 2.0];
        let sol = solver
            .integrate(&sys, 0.0, Vector2::new(1.0, 1.0), 2.0, &outs, None)
            .unwrap();
        assert_eq!(sol.outputs.len(), 3);
        for (t, y) in outs.iter().zip(&sol.outputs) {
            assert!((y[0] - (-t).exp()).abs() < 1e-6, "t={t}: {}", y[0]);
            assert!((y[1] - (-2.0 * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn stiff_problem_takes_few_steps() {
        // fast mode at 1e6 s⁻¹, slow at 1 s⁻¹
        let sys = Linear(Matrix2::new(-1e6, 0.0, 0.0, -1.0));
        let solver = Rosenbrock23::new(Tolerances::default()).unwrap();
        let sol = solver
            .integrate(&sys, 0.0, Vector2::new(1.0, 1.0), 10.0, &[], None)
            .unwrap();
        assert!(sol.y_end[0].abs() < 1e-9);
        assert!((sol.y_end[1] - (-10.0f64).exp()).abs() < 1e-5);
        assert!(sol.stats.accepted < 1000, "{:?}", sol.stats);
    }

    #[test]
    fn oscillator_energy() {
        // harmonic oscillator: checks the dense output on a non-decaying problem
        let sys = Linear(Matrix2::new(0.0, 1.0, -1.0, 0.0));
        let solver = Rosenbrock23::new(Tolerances { rel: 1e-9, abs: 1e-12 }).unwrap();
        let outs: Vec<f64> = (1..=20).map(|k| k as f64 * 0.3).collect();
        let sol = solver
            .integrate(&sys, 0.0, Vector2::new(1.0, 0.0), 6.0, &outs, None)
            .unwrap();
        for (t, y) in outs.iter().zip(&sol.outputs) {
            assert!((y[0] - t.cos()).abs() < 1e-5, "t={t}");
        }
    }

    #[test]
    fn lu_solves_with_pivoting() {
        let a = nalgebra::Matrix3::new(0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0);
        let x = nalgebra::Vector3::new(1.0, -2.0, 0.5);
        let got = Lu::new(a).unwrap().solve(a * x);
        assert!((got - x).norm() < 1e-14);
        assert!(Lu::new(nalgebra::Matrix2::new(1.0, 2.0, 2.0, 4.0)).is_none());
    }

    #[test]
    fn rejects_bad_tolerances() {
        assert!(Rosenbrock23::new(Tolerances { rel: 0.0, abs: 1e-9 }).is_err());
    }

    #[test]
    fn empty_span() {
        let sys = Linear(Matrix2::identity());
        let solver = Rosenbrock23::new(Tolerances::default()).unwrap();
        let sol = solver
            .integrate(&sys, 1.0, Vector2::new(2.0, 3.0), 1.0, &[1.0], None)
            .unwrap();
        assert_eq!(sol.y_end, Vector2::new(2.0, 3.0));
        assert_eq!(sol.outputs.len(), 1);
    }
}
