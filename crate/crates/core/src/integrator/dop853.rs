use super::tableau::*;
use super::{IntegrateError, IntegratorConfig};

/// Right-hand side of an autonomous system `y' = f(y)`.
pub trait AutonomousSystem<const D: usize> {
    fn rhs(&self, y: &[f64; D]) -> [f64; D];
}

const MAX_STEPS: usize = 2_000_000;
const SAFETY: f64 = 0.9;
// step ratio bounds: h_new / h in [1/3, 6]
const FAC_MIN: f64 = 1.0 / 0.333;
const FAC_MAX: f64 = 1.0 / 6.0;
const EXPONENT: f64 = 1.0 / 8.0;

#[derive(Debug, Clone)]
struct DenseStep<const D: usize> {
    t0: f64,
    h: f64,
    r: [[f64; D]; 8],
}

impl<const D: usize> DenseStep<D> {
    fn eval(&self, t: f64) -> [f64; D] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.r;
        std::array::from_fn(|i| {
            let par = r[4][i] + s * (r[5][i] + s1 * (r[6][i] + s * r[7][i]));
            r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * par)))
        })
    }
}

/// Accepted steps of one integration, with optional continuous extension.
#[derive(Debug, Clone)]
pub struct Solution<const D: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; D]>,
    dense: Vec<DenseStep<D>>,
}

impl<const D: usize> Solution<D> {
    pub fn final_state(&self) -> [f64; D] {
        *self
            .states
            .last()
            .expect("solution has at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("solution has at least one sample")
    }

    pub fn has_dense_output(&self) -> bool {
        !self.dense.is_empty() || self.times.len() == 1
    }

    /// Interpolated state at `t`; `None` outside `[t0, t1]` or without dense output.
    pub fn eval(&self, t: f64) -> Option<[f64; D]> {
        let (first, last) = (self.times[0], self.final_time());
        if !(t >= first && t <= last) {
            return None;
        }
        if t == last {
            return Some(self.final_state());
        }
        if self.dense.is_empty() {
            return (t == first).then(|| self.states[0]);
        }
        let idx = self.dense.partition_point(|s| s.t0 <= t).saturating_sub(1);
        Some(self.dense[idx].eval(t))
    }
}

/// First detected crossing of an event function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const D: usize> {
    pub t: f64,
    pub state: [f64; D],
}

#[inline]
fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    std::array::from_fn(|i| {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        y[i] + h * acc
    })
}

#[inline]
fn combine<const D: usize>(terms: &[(f64, &[f64; D])]) -> [f64; D] {
    std::array::from_fn(|i| terms.iter().map(|(c, k)| c * k[i]).sum())
}

fn all_finite<const D: usize>(y: &[f64; D]) -> bool {
    y.iter().all(|x| x.is_finite())
}

struct Trial<const D: usize> {
    y_new: [f64; D],
    err: f64,
    stages: [[f64; D]; 12],
}

struct Stepper<'a, S, const D: usize> {
    sys: &'a S,
    cfg: IntegratorConfig,
    t: f64,
    y: [f64; D],
    f: [f64; D],
    h: f64,
    last_rejected: bool,
    steps: usize,
}

impl<'a, S: AutonomousSystem<D>, const D: usize> Stepper<'a, S, D> {
    fn new(
        sys: &'a S,
        y0: [f64; D],
        t0: f64,
        t1: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Self, IntegrateError> {
        cfg.validate()?;
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(IntegrateError::EmptySpan(t0, t1));
        }
        if !all_finite(&y0) {
            return Err(IntegrateError::NonFinite { t: t0 });
        }
        let f = sys.rhs(&y0);
        if !all_finite(&f) {
            return Err(IntegrateError::NonFinite { t: t0 });
        }
        let mut st = Self {
            sys,
            cfg: *cfg,
            t: t0,
            y: y0,
            f,
            h: 0.0,
            last_rejected: false,
            steps: 0,
        };
        st.h = st.initial_step(t1 - t0);
        Ok(st)
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step(&self, span: f64) -> f64 {
        let hmax = self.cfg.max_step.min(span);
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..D {
            let sk = self.scale(self.y[i], 0.0);
            dnf += (self.f[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(hmax);
        let y1 = axpy(&self.y, h, &[(1.0, &self.f)]);
        let f1 = self.sys.rhs(&y1);
        let mut der2 = 0.0;
        for ((&yi, &fi), &f1i) in self.y.iter().zip(&self.f).zip(&f1) {
            der2 += ((f1i - fi) / self.scale(yi, 0.0)).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if !(der12 > 1e-15) {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(EXPONENT)
        };
        (100.0 * h).min(h1).min(hmax)
    }

    fn trial(&self, h: f64) -> Trial<D> {
        let sys = self.sys;
        let y = &self.y;
        let k1 = self.f;
        let k2 = sys.rhs(&axpy(y, h, &[(A21, &k1)]));
        let k3 = sys.rhs(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(&axpy(y, h, &[(A41, &k1), (A43, &k3)]));
        let k5 = sys.rhs(&axpy(y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]));
        let k6 = sys.rhs(&axpy(y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]));
        let k7 = sys.rhs(&axpy(
            y,
            h,
            &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)],
        ));
        let k8 = sys.rhs(&axpy(
            y,
            h,
            &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
        ));
        let k9 = sys.rhs(&axpy(
            y,
            h,
            &[
                (A91, &k1),
                (A94, &k4),
                (A95, &k5),
                (A96, &k6),
                (A97, &k7),
                (A98, &k8),
            ],
        ));
        let k10 = sys.rhs(&axpy(
            y,
            h,
            &[
                (A101, &k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        ));
        let k11 = sys.rhs(&axpy(
            y,
            h,
            &[
                (A111, &k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ));
        let k12 = sys.rhs(&axpy(
            y,
            h,
            &[
                (A121, &k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ));
        let bsum = combine(&[
            (B1, &k1),
            (B6, &k6),
            (B7, &k7),
            (B8, &k8),
            (B9, &k9),
            (B10, &k10),
            (B11, &k11),
            (B12, &k12),
        ]);
        let y_new = axpy(y, h, &[(1.0, &bsum)]);
        let err5 = combine(&[
            (ER1, &k1),
            (ER6, &k6),
            (ER7, &k7),
            (ER8, &k8),
            (ER9, &k9),
            (ER10, &k10),
            (ER11, &k11),
            (ER12, &k12),
        ]);
        let mut e5 = 0.0;
        let mut e3 = 0.0;
        for i in 0..D {
            let sk = self.scale(y[i], y_new[i]);
            let err3 = bsum[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            e5 += (err5[i] / sk).powi(2);
            e3 += (err3 / sk).powi(2);
        }
        let deno = e5 + 0.01 * e3;
        let deno = if deno > 0.0 { deno } else { 1.0 };
        let err = h.abs() * e5 * (1.0 / (D as f64 * deno)).sqrt();
        Trial {
            y_new,
            err,
            stages: [k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12],
        }
    }

    fn dense_coefficients(&self, h: f64, trial: &Trial<D>, f_new: &[f64; D]) -> [[f64; D]; 8] {
        let sys = self.sys;
        let y = &self.y;
        let [k1, _, _, _, _, k6, k7, k8, k9, k10, k11, k12] = &trial.stages;
        let y_new = &trial.y_new;
        let ydiff: [f64; D] = std::array::from_fn(|i| y_new[i] - y[i]);
        let bspl: [f64; D] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
        let r4: [f64; D] = std::array::from_fn(|i| ydiff[i] - h * f_new[i] - bspl[i]);
        let k14 = sys.rhs(&axpy(
            y,
            h,
            &[
                (A141, k1),
                (A147, k7),
                (A148, k8),
                (A149, k9),
                (A1410, k10),
                (A1411, k11),
                (A1412, k12),
                (A1413, f_new),
            ],
        ));
        let k15 = sys.rhs(&axpy(
            y,
            h,
            &[
                (A151, k1),
                (A156, k6),
                (A157, k7),
                (A158, k8),
                (A1511, k11),
                (A1512, k12),
                (A1513, f_new),
                (A1514, &k14),
            ],
        ));
        let k16 = sys.rhs(&axpy(
            y,
            h,
            &[
                (A161, k1),
                (A166, k6),
                (A167, k7),
                (A168, k8),
                (A169, k9),
                (A1613, f_new),
                (A1614, &k14),
                (A1615, &k15),
            ],
        ));
        let rows: [[f64; 12]; 4] = [
            [
                D41, D46, D47, D48, D49, D410, D411, D412, D413, D414, D415, D416,
            ],
            [
                D51, D56, D57, D58, D59, D510, D511, D512, D513, D514, D515, D516,
            ],
            [
                D61, D66, D67, D68, D69, D610, D611, D612, D613, D614, D615, D616,
            ],
            [
                D71, D76, D77, D78, D79, D710, D711, D712, D713, D714, D715, D716,
            ],
        ];
        let ks: [&[f64; D]; 12] = [k1, k6, k7, k8, k9, k10, k11, k12, f_new, &k14, &k15, &k16];
        let mut out = [*y, ydiff, bspl, r4, [0.0; D], [0.0; D], [0.0; D], [0.0; D]];
        for (row, coeffs) in rows.iter().enumerate() {
            out[4 + row] = std::array::from_fn(|i| {
                h * coeffs
                    .iter()
                    .zip(ks.iter())
                    .map(|(c, k)| c * k[i])
                    .sum::<f64>()
            });
        }
        out
    }

    /// Advance one accepted step without passing `t_end`.
    fn step(
        &mut self,
        t_end: f64,
        want_dense: bool,
    ) -> Result<Option<DenseStep<D>>, IntegrateError> {
        loop {
            if self.steps >= MAX_STEPS {
                return Err(IntegrateError::TooManySteps { t: self.t });
            }
            self.steps += 1;
            let mut h = self.h.min(self.cfg.max_step);
            let remaining = t_end - self.t;
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h <= 10.0 * f64::EPSILON * self.t.abs().max(1e-300) {
                return Err(IntegrateError::StepUnderflow { t: self.t });
            }
            let trial = self.trial(h);
            if !trial.err.is_finite() || !all_finite(&trial.y_new) {
                self.h = 0.25 * h;
                self.last_rejected = true;
                if self.h <= 10.0 * f64::EPSILON * self.t.abs().max(1e-300) {
                    return Err(IntegrateError::NonFinite { t: self.t });
                }
                continue;
            }
            let fac11 = trial.err.powf(EXPONENT);
            if trial.err <= 1.0 {
                let f_new = self.sys.rhs(&trial.y_new);
                if !all_finite(&f_new) {
                    return Err(IntegrateError::NonFinite { t: self.t + h });
                }
                let dense = want_dense.then(|| DenseStep {
                    t0: self.t,
                    h,
                    r: self.dense_coefficients(h, &trial, &f_new),
                });
                let fac = FAC_MAX.max(FAC_MIN.min(fac11 / SAFETY));
                let mut h_new = h / fac;
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.t = if last { t_end } else { self.t + h };
                self.y = trial.y_new;
                self.f = f_new;
                // keep the proposal from the full step when the last step was clipped
                self.h = if last { h_new.max(self.h) } else { h_new };
                self.last_rejected = false;
                return Ok(dense);
            }
            self.h = h / FAC_MIN.min(fac11 / SAFETY);
            self.last_rejected = true;
        }
    }
}

/// Integrate `y' = f(y)` over `[t0, t1]`, recording every accepted step.
pub fn solve<S: AutonomousSystem<D>, const D: usize>(
    sys: &S,
    y0: [f64; D],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Solution<D>, IntegrateError> {
    let mut st = Stepper::new(sys, y0, t0, t1, cfg)?;
    let mut sol = Solution {
        times: vec![t0],
        states: vec![y0],
        dense: Vec::new(),
    };
    while st.t < t1 {
        let dense = st.step(t1, cfg.dense_output)?;
        sol.times.push(st.t);
        sol.states.push(st.y);
        if let Some(d) = dense {
            sol.dense.push(d);
        }
    }
    Ok(sol)
}

/// Integrate until `event` first changes sign from positive to nonpositive, or
/// until `t_max`. The returned solution ends at the event when one is found.
pub fn solve_until_event<S, E, const D: usize>(
    sys: &S,
    y0: [f64; D],
    t0: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
    event: E,
) -> Result<(Solution<D>, Option<EventHit<D>>), IntegrateError>
where
    S: AutonomousSystem<D>,
    E: Fn(&[f64; D]) -> f64,
{
    let mut st = Stepper::new(sys, y0, t0, t_max, cfg)?;
    let mut sol = Solution {
        times: vec![t0],
        states: vec![y0],
        dense: Vec::new(),
    };
    let mut g_prev = event(&y0);
    while st.t < t_max {
        let dense = st.step(t_max, true)?.expect("dense step requested");
        let g_new = event(&st.y);
        if g_prev > 0.0 && g_new <= 0.0 {
            let (mut lo, mut hi) = (dense.t0, st.t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if event(&dense.eval(mid)) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t_hit = hi;
            let state = if t_hit == st.t {
                st.y
            } else {
                dense.eval(t_hit)
            };
            let clipped = DenseStep {
                t0: dense.t0,
                h: dense.h,
                r: dense.r,
            };
            sol.times.push(t_hit);
            sol.states.push(state);
            if cfg.dense_output {
                sol.dense.push(clipped);
            }
            return Ok((sol, Some(EventHit { t: t_hit, state })));
        }
        g_prev = g_new;
        sol.times.push(st.t);
        sol.states.push(st.y);
        if cfg.dense_output {
            sol.dense.push(dense);
        }
    }
    Ok((sol, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl AutonomousSystem<2> for Oscillator {
        fn rhs(&self, y: &[f64; 2]) -> [f64; 2] {
            [y[1], -y[0]]
        }
    }

    struct Decay;

    impl AutonomousSystem<1> for Decay {
        fn rhs(&self, y: &[f64; 1]) -> [f64; 1] {
            [-y[0]]
        }
    }

    #[test]
    fn end_point_accuracy_tracks_tolerance() {
        for &tol in &[1e-6, 1e-9, 1e-12] {
            let cfg = IntegratorConfig::with_tolerances(tol, tol);
            let sol = solve(&Oscillator, [1.0, 0.0], 0.0, 10.0, &cfg).unwrap();
            let y = sol.final_state();
            let err = (y[0] - 10f64.cos()).abs().max((y[1] + 10f64.sin()).abs());
            assert!(err < 50.0 * tol, "tol {tol}: err {err}");
            assert_eq!(sol.final_time(), 10.0);
        }
    }

    #[test]
    fn eighth_order_convergence_on_fixed_looking_steps() {
        // error ratio between tolerances 1e-6 and 1e-10 reflects a high-order method
        let run = |tol: f64| {
            let cfg = IntegratorConfig::with_tolerances(tol, tol);
            let sol = solve(&Decay, [1.0], 0.0, 5.0, &cfg).unwrap();
            (
                (sol.final_state()[0] - (-5f64).exp()).abs(),
                sol.times.len(),
            )
        };
        let (e_coarse, n_coarse) = run(1e-6);
        let (e_fine, n_fine) = run(1e-10);
        assert!(e_fine < e_coarse);
        // step count grows roughly like tol^(-1/8)
        assert!(
            (n_fine as f64) < 6.0 * n_coarse as f64,
            "{n_coarse} -> {n_fine}"
        );
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-12).dense();
        let sol = solve(&Oscillator, [1.0, 0.0], 0.0, 20.0, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=2000 {
            let t = 20.0 * i as f64 / 2000.0;
            let y = sol.eval(t).unwrap();
            worst = worst
                .max((y[0] - t.cos()).abs())
                .max((y[1] + t.sin()).abs());
        }
        assert!(worst < 1e-10, "dense error {worst}");
        assert!(sol.eval(-0.1).is_none());
        assert!(sol.eval(20.1).is_none());
    }

    #[test]
    fn event_location() {
        // v = -sin t crosses zero from above... first crossing of v from >0 to <=0 after
        // starting at (0, 1): v = cos t, zero at pi/2
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-12).max_step(0.3);
        let (sol, hit) =
            solve_until_event(&Oscillator, [0.0, 1.0], 0.0, 10.0, &cfg, |y| y[1]).unwrap();
        let hit = hit.unwrap();
        assert!((hit.t - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(sol.final_time(), hit.t);
        assert!(hit.state[1].abs() < 1e-12);
        let (_, none) =
            solve_until_event(&Oscillator, [0.0, 1.0], 0.0, 1.0, &cfg, |y| y[1]).unwrap();
        assert!(none.is_none());
    }
}
