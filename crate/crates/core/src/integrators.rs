//! Explicit time integrators: forward Euler, Runge-Kutta, projective and
//! telescopic projective schemes.
//!
//! A telescopic plan has levels `0..=L`. Level 0 is a forward Euler step of
//! size `h_0`. A step on level `l` in `1..L` takes `K_{l-1} + 1` steps on
//! level `l-1`, then extrapolates along the last chord over `M_{l-1} h_{l-1}`.
//! The outermost level applies a Runge-Kutta tableau whose stage slopes are
//! such chords. With `L = 0` the plan is plain Runge-Kutta stepping with
//! `h_0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{first_non_finite, Real};

/// Right-hand side of an autonomous ODE `u' = F(u)`.
pub trait Rhs<R> {
    fn eval(&self, state: &[R], out: &mut [R]) -> Result<()>;
}

impl<R, F> Rhs<R> for F
where
    F: Fn(&[R], &mut [R]) -> Result<()>,
{
    fn eval(&self, state: &[R], out: &mut [R]) -> Result<()> {
        self(state, out)
    }
}

/// Explicit Butcher tableau.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RkTableau<R> {
    pub name: String,
    /// Strictly lower-triangular; row `s` holds `a_{s,0..s}`.
    pub a: Vec<Vec<R>>,
    pub b: Vec<R>,
    pub c: Vec<R>,
}

impl<R: Real> RkTableau<R> {
    pub fn new(name: &str, a: Vec<Vec<R>>, b: Vec<R>, c: Vec<R>) -> Result<Self> {
        let s = b.len();
        let tol = R::lit(1e-12);
        if s == 0 || c.len() != s || a.len() != s {
            return Err(Error::Config(format!("tableau {name}: inconsistent stage counts")));
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != i {
                return Err(Error::Config(format!("tableau {name}: row {i} must have {i} entries")));
            }
            let sum = row.iter().fold(R::zero(), |x, &y| x + y);
            if (sum - c[i]).abs() > tol {
                return Err(Error::Config(format!("tableau {name}: row {i} sums to {sum}, c = {}", c[i])));
            }
        }
        let bsum = b.iter().fold(R::zero(), |x, &y| x + y);
        if (bsum - R::one()).abs() > tol {
            return Err(Error::Config(format!("tableau {name}: weights sum to {bsum}")));
        }
        let unit = |x: &R| *x >= R::zero() && *x <= R::one();
        if !b.iter().all(unit) || !c.iter().all(unit) {
            return Err(Error::Config(format!("tableau {name}: b and c must lie in [0, 1]")));
        }
        if c.iter().skip(1).any(|&x| x == R::zero()) {
            return Err(Error::Config(format!("tableau {name}: only the first stage may have c = 0")));
        }
        Ok(Self {
            name: name.to_string(),
            a,
            b,
            c,
        })
    }

    pub fn forward_euler() -> Self {
        Self::new("FE", vec![vec![]], vec![R::one()], vec![R::zero()]).expect("valid tableau")
    }

    /// Explicit midpoint rule.
    pub fn rk2() -> Self {
        let h = R::lit(0.5);
        Self::new("RK2", vec![vec![], vec![h]], vec![R::zero(), R::one()], vec![R::zero(), h])
            .expect("valid tableau")
    }

    pub fn rk4() -> Self {
        let (z, h, o) = (R::zero(), R::lit(0.5), R::one());
        let sixth = R::lit(1.0 / 6.0);
        let third = R::lit(1.0 / 3.0);
        Self::new(
            "RK4",
            vec![vec![], vec![h], vec![z, h], vec![z, z, o]],
            vec![sixth, third, third, sixth],
            vec![z, h, h, o],
        )
        .expect("valid tableau")
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }
}

/// Level hierarchy of a (telescopic) projective integrator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorPlan<R> {
    h: Vec<R>,
    k: Vec<usize>,
    m: Vec<R>,
    tableau: RkTableau<R>,
}

impl<R: Real> IntegratorPlan<R> {
    /// Builds the plan from `h_0`, deriving `h_{l+1} = (M_l + K_l + 1) h_l`.
    pub fn new(h0: R, k: Vec<usize>, m: Vec<R>, tableau: RkTableau<R>) -> Result<Self> {
        if !(h0 > R::zero()) || !h0.is_finite() {
            return Err(Error::Config(format!("innermost step {h0} must be positive")));
        }
        if k.len() != m.len() {
            return Err(Error::Config(format!("{} inner-step counts for {} extrapolation factors", k.len(), m.len())));
        }
        if let Some(bad) = m.iter().find(|&&x| !(x >= R::zero()) || !x.is_finite()) {
            return Err(Error::Config(format!("extrapolation factor {bad} must be non-negative")));
        }
        let mut h = vec![h0];
        for (kl, ml) in k.iter().zip(&m) {
            let last = *h.last().unwrap();
            h.push((*ml + R::from_usize_lossy(*kl + 1)) * last);
        }
        Ok(Self { h, k, m, tableau })
    }

    /// Builds the plan from explicit step sizes, checking the layout identity.
    pub fn with_steps(h: Vec<R>, k: Vec<usize>, m: Vec<R>, tableau: RkTableau<R>) -> Result<Self> {
        if h.len() != k.len() + 1 {
            return Err(Error::Config("need one more step size than levels".into()));
        }
        let plan = Self::new(h[0], k, m, tableau)?;
        for (l, (given, derived)) in h.iter().zip(&plan.h).enumerate() {
            if (*given - *derived).abs() > R::lit(1e-12) * derived.abs() {
                return Err(Error::Config(format!(
                    "level {l}: step {given} violates h_l = (M + K + 1) h_(l-1) = {derived}"
                )));
            }
        }
        Ok(Self { h, ..plan })
    }

    /// Plain stepping with `h` and the given tableau.
    pub fn plain(h: R, tableau: RkTableau<R>) -> Result<Self> {
        Self::new(h, vec![], vec![], tableau)
    }

    /// Projective plan with inner step `dt`, `k` inner steps and outer step `big_dt`.
    pub fn projective(dt: R, k: usize, big_dt: R, tableau: RkTableau<R>) -> Result<Self> {
        let m = big_dt / dt - R::from_usize_lossy(k + 1);
        if m < R::zero() {
            return Err(Error::Config(format!(
                "outer step {big_dt} is shorter than {} inner steps of {dt}",
                k + 1
            )));
        }
        let mut plan = Self::new(dt, vec![k], vec![m], tableau)?;
        plan.h[1] = big_dt;
        Ok(plan)
    }

    pub fn levels(&self) -> usize {
        self.k.len()
    }

    pub fn h(&self) -> &[R] {
        &self.h
    }

    pub fn k(&self) -> &[usize] {
        &self.k
    }

    pub fn m(&self) -> &[R] {
        &self.m
    }

    pub fn tableau(&self) -> &RkTableau<R> {
        &self.tableau
    }

    /// Simulated time covered by one outermost step.
    pub fn outer_step(&self) -> R {
        *self.h.last().unwrap()
    }

    /// `prod_l (M_l + K_l + 1) / (K_l + 1)`.
    pub fn speedup(&self) -> R {
        self.k.iter().zip(&self.m).fold(R::one(), |s, (&k, &m)| {
            let k1 = R::from_usize_lossy(k + 1);
            s * (m + k1) / k1
        })
    }

    /// Plan of the innermost `levels` levels, closed by a forward Euler tableau.
    fn truncated(&self, levels: usize) -> Self {
        Self {
            h: self.h[..=levels].to_vec(),
            k: self.k[..levels].to_vec(),
            m: self.m[..levels].to_vec(),
            tableau: RkTableau::forward_euler(),
        }
    }

    /// Same plan with the outermost extrapolation factor replaced.
    fn with_last_m(&self, m_last: R) -> Self {
        let mut p = self.clone();
        let l = p.levels();
        p.m[l - 1] = m_last;
        p.h[l] = (m_last + R::from_usize_lossy(p.k[l - 1] + 1)) * p.h[l - 1];
        p
    }
}

/// Work counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub rhs_evals: u64,
    /// Steps taken on each level, innermost first.
    pub steps_per_level: Vec<u64>,
}

/// Time stepper holding a plan, scratch storage and counters.
pub struct Integrator<R> {
    plan: IntegratorPlan<R>,
    stats: StepStats,
    time: f64,
    fe: Vec<R>,
    prev: Vec<Vec<R>>,
    chord: Vec<Vec<R>>,
    base: Vec<R>,
    stage: Vec<R>,
    slopes: Vec<Vec<R>>,
}

impl<R: Real> Integrator<R> {
    pub fn new(plan: IntegratorPlan<R>) -> Self {
        let levels = plan.levels();
        Self {
            stats: StepStats {
                rhs_evals: 0,
                steps_per_level: vec![0; levels + 1],
            },
            plan,
            time: 0.0,
            fe: Vec::new(),
            prev: vec![Vec::new(); levels + 1],
            chord: vec![Vec::new(); levels + 1],
            base: Vec::new(),
            stage: Vec::new(),
            slopes: Vec::new(),
        }
    }

    pub fn plan(&self) -> &IntegratorPlan<R> {
        &self.plan
    }

    pub fn stats(&self) -> &StepStats {
        &self.stats
    }

    fn eval(&mut self, rhs: &dyn Rhs<R>, state: &[R], out: &mut [R]) -> Result<()> {
        self.stats.rhs_evals += 1;
        rhs.eval(state, out)?;
        match first_non_finite(out) {
            Some(index) => Err(Error::StepRejected { index, time: self.time }),
            None => Ok(()),
        }
    }

    fn forward_euler(&mut self, rhs: &dyn Rhs<R>, state: &mut [R], h: R) -> Result<()> {
        let mut tmp = std::mem::take(&mut self.fe);
        tmp.resize(state.len(), R::zero());
        let res = self.eval(rhs, state, &mut tmp);
        if res.is_ok() {
            for (u, &d) in state.iter_mut().zip(&tmp) {
                *u += h * d;
            }
        }
        self.fe = tmp;
        res
    }

    /// One step on an inner level (`level < L`).
    fn level_step(&mut self, rhs: &dyn Rhs<R>, level: usize, state: &mut [R]) -> Result<()> {
        if level == 0 {
            self.forward_euler(rhs, state, self.plan.h[0])?;
        } else {
            let mut chord = std::mem::take(&mut self.chord[level]);
            let res = self.damp(rhs, level - 1, state, &mut chord);
            if res.is_ok() {
                let f = self.plan.m[level - 1] * self.plan.h[level - 1];
                for (u, &c) in state.iter_mut().zip(&chord) {
                    *u += f * c;
                }
            }
            self.chord[level] = chord;
            res?;
        }
        self.stats.steps_per_level[level] += 1;
        self.time += self.plan.h[level].as_f64();
        Ok(())
    }

    /// `K_level + 1` steps on `level`, leaving the final chord slope in `chord`.
    fn damp(&mut self, rhs: &dyn Rhs<R>, level: usize, state: &mut [R], chord: &mut Vec<R>) -> Result<()> {
        let count = self.plan.k[level] + 1;
        let mut prev = std::mem::take(&mut self.prev[level]);
        let mut res = Ok(());
        for i in 0..count {
            if i + 1 == count {
                prev.clear();
                prev.extend_from_slice(state);
            }
            res = self.level_step(rhs, level, state);
            if res.is_err() {
                break;
            }
        }
        if res.is_ok() {
            let inv = R::one() / self.plan.h[level];
            chord.clear();
            chord.extend(state.iter().zip(&prev).map(|(&a, &b)| (a - b) * inv));
        }
        self.prev[level] = prev;
        res
    }

    fn plain_step(&mut self, rhs: &dyn Rhs<R>, state: &mut [R]) -> Result<()> {
        let h = self.plan.h[0];
        let tab = self.plan.tableau.clone();
        let n = state.len();
        let s_count = tab.stages();
        if tab.stages() == 1 {
            self.forward_euler(rhs, state, h)?;
        } else {
            let mut slopes = std::mem::take(&mut self.slopes);
            slopes.resize(s_count, Vec::new());
            let mut stage = std::mem::take(&mut self.stage);
            let mut res = Ok(());
            for s in 0..s_count {
                stage.clear();
                stage.extend_from_slice(state);
                for (i, &a) in tab.a[s].iter().enumerate() {
                    if a != R::zero() {
                        let f = h * a;
                        for (x, &k) in stage.iter_mut().zip(&slopes[i]) {
                            *x += f * k;
                        }
                    }
                }
                slopes[s].resize(n, R::zero());
                let mut out = std::mem::take(&mut slopes[s]);
                res = self.eval(rhs, &stage, &mut out);
                slopes[s] = out;
                if res.is_err() {
                    break;
                }
            }
            if res.is_ok() {
                for (s, &b) in tab.b.iter().enumerate() {
                    if b != R::zero() {
                        let f = h * b;
                        for (x, &k) in state.iter_mut().zip(&slopes[s]) {
                            *x += f * k;
                        }
                    }
                }
            }
            self.slopes = slopes;
            self.stage = stage;
            res?;
        }
        self.stats.steps_per_level[0] += 1;
        self.time += h.as_f64();
        Ok(())
    }

    fn outer_step(&mut self, rhs: &dyn Rhs<R>, state: &mut [R]) -> Result<()> {
        let l = self.plan.levels();
        let inner = l - 1;
        let tab = self.plan.tableau.clone();
        let s_count = tab.stages();
        let h_in = self.plan.h[inner];
        let k1 = R::from_usize_lossy(self.plan.k[inner] + 1);
        let ratio = self.plan.m[inner] + k1; // h_L / h_(L-1)
        let t0 = self.time;

        let mut slopes = std::mem::take(&mut self.slopes);
        slopes.resize(s_count, Vec::new());
        let mut base = std::mem::take(&mut self.base);
        let mut stage = std::mem::take(&mut self.stage);
        let mut res = Ok(());
        for s in 0..s_count {
            let mut slope = std::mem::take(&mut slopes[s]);
            if s == 0 {
                res = self.damp(rhs, inner, state, &mut slope);
                base.clear();
                base.extend_from_slice(state);
            } else {
                stage.clear();
                stage.extend_from_slice(&base);
                let seed = (tab.c[s] * ratio - k1) * h_in;
                for (i, &a) in tab.a[s].iter().enumerate() {
                    if a != R::zero() {
                        let f = seed * (a / tab.c[s]);
                        for (x, &k) in stage.iter_mut().zip(&slopes[i]) {
                            *x += f * k;
                        }
                    }
                }
                self.time = t0 + (tab.c[s] * self.plan.outer_step()).as_f64();
                res = self.damp(rhs, inner, &mut stage, &mut slope);
            }
            slopes[s] = slope;
            if res.is_err() {
                break;
            }
        }
        if res.is_ok() {
            state.copy_from_slice(&base);
            let f = self.plan.m[inner] * h_in;
            for (s, &b) in tab.b.iter().enumerate() {
                if b != R::zero() {
                    let fb = f * b;
                    for (x, &k) in state.iter_mut().zip(&slopes[s]) {
                        *x += fb * k;
                    }
                }
            }
            if let Some(index) = first_non_finite(state) {
                res = Err(Error::StepRejected { index, time: t0 });
            }
        }
        self.slopes = slopes;
        self.base = base;
        self.stage = stage;
        res?;
        self.stats.steps_per_level[l] += 1;
        self.time = t0 + self.plan.outer_step().as_f64();
        Ok(())
    }

    /// One outermost step of size `h_L`.
    pub fn step(&mut self, rhs: &dyn Rhs<R>, state: &mut [R]) -> Result<()> {
        if self.plan.levels() == 0 {
            self.plain_step(rhs, state)
        } else {
            self.outer_step(rhs, state)
        }
    }

    /// Advances by `duration`, finishing with a shortened step when
    /// `duration` is not a multiple of `h_L`.
    pub fn advance(&mut self, rhs: &dyn Rhs<R>, state: &mut [R], duration: f64) -> Result<()> {
        let h = self.plan.outer_step().as_f64();
        let n = (duration / h + 1e-9).floor().max(0.0);
        for _ in 0..n as u64 {
            self.step(rhs, state)?;
        }
        let rest = duration - n * h;
        if rest > 1e-9 * h {
            self.partial(rhs, state, rest)?;
        }
        Ok(())
    }

    fn partial(&mut self, rhs: &dyn Rhs<R>, state: &mut [R], rest: f64) -> Result<()> {
        let l = self.plan.levels();
        let saved = self.plan.clone();
        let res = if l == 0 {
            self.plan = IntegratorPlan::plain(R::lit(rest), saved.tableau.clone())?;
            self.plain_step(rhs, state)
        } else {
            let h_in = saved.h[l - 1].as_f64();
            let m = rest / h_in - (saved.k[l - 1] + 1) as f64;
            if m >= 0.0 {
                self.plan = saved.with_last_m(R::lit(m));
                self.outer_step(rhs, state)
            } else {
                self.plan = saved.truncated(l - 1);
                self.advance(rhs, state, rest)
            }
        };
        self.plan = saved;
        res
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }
}

pub fn forward_euler_step<R: Real>(rhs: &dyn Rhs<R>, state: &mut [R], h: R) -> Result<()> {
    rk_step(rhs, state, h, &RkTableau::forward_euler())
}

pub fn rk4_step<R: Real>(rhs: &dyn Rhs<R>, state: &mut [R], h: R) -> Result<()> {
    rk_step(rhs, state, h, &RkTableau::rk4())
}

pub fn rk_step<R: Real>(rhs: &dyn Rhs<R>, state: &mut [R], h: R, tableau: &RkTableau<R>) -> Result<()> {
    if !(h > R::zero()) {
        return Err(Error::Config(format!("step size {h} must be positive")));
    }
    Integrator::new(IntegratorPlan::plain(h, tableau.clone())?).step(rhs, state)
}

/// Projective Runge-Kutta step: `K + 1` damping steps of size `dt` per stage,
/// outer step `big_dt`.
pub fn projective_step<R: Real>(
    rhs: &dyn Rhs<R>,
    state: &mut [R],
    dt: R,
    k: usize,
    big_dt: R,
    tableau: &RkTableau<R>,
) -> Result<()> {
    let plan = IntegratorPlan::projective(dt, k, big_dt, tableau.clone())?;
    Integrator::new(plan).step(rhs, state)
}

pub fn telescopic_step<R: Real>(rhs: &dyn Rhs<R>, state: &mut [R], plan: &IntegratorPlan<R>) -> Result<()> {
    Integrator::new(plan.clone()).step(rhs, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linear(lambda: f64) -> impl Fn(&[f64], &mut [f64]) -> Result<()> {
        move |u: &[f64], out: &mut [f64]| {
            for (o, &x) in out.iter_mut().zip(u) {
                *o = lambda * x;
            }
            Ok(())
        }
    }

    fn zero(_: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        Ok(())
    }

    #[test]
    fn euler_examples() {
        let mut u = [1.0];
        forward_euler_step(&linear(-1.0), &mut u, 0.1).unwrap();
        assert_relative_eq!(u[0], 0.9, epsilon = 1e-15);
        let mut u = [1.0, 2.0];
        forward_euler_step(&zero, &mut u, 0.3).unwrap();
        assert_eq!(u, [1.0, 2.0]);
        let mut u = [1.0];
        forward_euler_step(&linear(-4.0), &mut u, 0.25).unwrap();
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn rk4_examples() {
        let mut u = [1.0];
        rk4_step(&linear(-1.0), &mut u, 0.1).unwrap();
        let expect = 1.0 - 0.1 + 0.01 / 2.0 - 0.001 / 6.0 + 0.0001 / 24.0;
        assert_relative_eq!(u[0], expect, epsilon = 1e-15);
        assert!((u[0] - 0.9048375).abs() < 1e-7);
        let mut u = [3.0];
        rk4_step(&zero, &mut u, 0.5).unwrap();
        assert_eq!(u[0], 3.0);
    }

    #[test]
    fn rk2_is_second_order() {
        let err = |h: f64| {
            let mut u = [1.0];
            let n = (1.0 / h).round() as usize;
            for _ in 0..n {
                rk_step(&linear(-1.0), &mut u, h, &RkTableau::rk2()).unwrap();
            }
            (u[0] - (-1.0f64).exp()).abs()
        };
        let order = (err(0.02) / err(0.01)).log2();
        assert!(order > 1.9, "{order}");
    }

    #[test]
    fn tableau_validation() {
        assert!(RkTableau::<f64>::new("bad", vec![vec![], vec![0.5]], vec![0.5, 0.6], vec![0.0, 0.5]).is_err());
        assert!(RkTableau::<f64>::new("bad", vec![vec![], vec![0.4]], vec![0.5, 0.5], vec![0.0, 0.5]).is_err());
        assert!(RkTableau::<f64>::new("bad", vec![vec![], vec![0.0]], vec![0.5, 0.5], vec![0.0, 0.0]).is_err());
        assert!(RkTableau::<f64>::new("bad", vec![vec![], vec![1.5]], vec![1.5, -0.5], vec![0.0, 1.5]).is_err());
    }

    #[test]
    fn rejects_non_finite_rhs() {
        let rhs = |u: &[f64], out: &mut [f64]| {
            out.copy_from_slice(u);
            out[2] = f64::NAN;
            Ok(())
        };
        let mut u = [1.0, 2.0, 3.0];
        let err = forward_euler_step(&rhs, &mut u, 0.1).unwrap_err();
        assert!(matches!(err, Error::StepRejected { index: 2, .. }));
        assert_eq!(u, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn projective_examples() {
        let mut u = [1.0, -2.0];
        projective_step(&zero, &mut u, 0.01, 2, 1.0, &RkTableau::rk4()).unwrap();
        assert_eq!(u, [1.0, -2.0]);
        // lambda * dt = -1 annihilates after the first inner step.
        let mut u = [1.0];
        projective_step(&linear(-100.0), &mut u, 0.01, 2, 0.5, &RkTableau::forward_euler()).unwrap();
        assert_eq!(u[0], 0.0);
        assert!(projective_step(&zero, &mut [1.0], 0.1, 2, 0.2, &RkTableau::forward_euler()).is_err());
    }

    #[test]
    fn l1_plan_matches_projective_step_bitwise() {
        let rhs = |u: &[f64], out: &mut [f64]| {
            out[0] = -50.0 * (u[0] - u[1].sin());
            out[1] = u[0] * 0.3 - u[1];
            Ok(())
        };
        for tab in [RkTableau::forward_euler(), RkTableau::rk2(), RkTableau::rk4()] {
            let mut a = [0.7, 0.2];
            projective_step(&rhs, &mut a, 0.01, 3, 0.3, &tab).unwrap();
            let m = 0.3 / 0.01 - 4.0;
            let plan = IntegratorPlan::new(0.01, vec![3], vec![m], tab).unwrap();
            let mut b = [0.7, 0.2];
            telescopic_step(&rhs, &mut b, &plan).unwrap();
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn two_level_tpi_layout() {
        let plan: IntegratorPlan<f64> = IntegratorPlan::new(1e-5, vec![6, 6], vec![14.24, 11.83], RkTableau::rk4()).unwrap();
        assert_relative_eq!(plan.outer_step(), 21.24 * 18.83 * 1e-5, max_relative = 1e-12);
        assert!((plan.outer_step() - 4e-3).abs() / 4e-3 < 1e-3);
        let mut u = [1.0, 2.0];
        telescopic_step(&zero, &mut u, &plan).unwrap();
        assert_eq!(u, [1.0, 2.0]);
        assert!(IntegratorPlan::with_steps(vec![1e-5, 2.124e-4, 5e-3], vec![6, 6], vec![14.24, 11.83], RkTableau::rk4()).is_err());
        assert!(IntegratorPlan::new(1e-5, vec![6], vec![-1.0], RkTableau::rk4()).is_err());
    }

    #[test]
    fn trivial_plan_is_forward_euler() {
        let rhs = |u: &[f64], out: &mut [f64]| {
            out[0] = -3.0 * u[0] + u[1] * u[1];
            out[1] = (u[0]).cos();
            Ok(())
        };
        let plan = IntegratorPlan::new(0.02, vec![0, 0, 0], vec![0.0, 0.0, 0.0], RkTableau::forward_euler()).unwrap();
        let mut a = [0.5, 0.1];
        let mut b = a;
        let mut it = Integrator::new(plan);
        for _ in 0..5 {
            it.step(&rhs, &mut a).unwrap();
            forward_euler_step(&rhs, &mut b, 0.02).unwrap();
        }
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn prk4_is_fourth_order_on_nonstiff_problem() {
        let rhs = |u: &[f64], out: &mut [f64]| {
            out[0] = u[1];
            out[1] = -u[0];
            Ok(())
        };
        // A fixed tiny inner step keeps the inner-step error below the
        // outer truncation error at both resolutions.
        let err = |big: f64| {
            let plan = IntegratorPlan::projective(1e-8, 2, big, RkTableau::rk4()).unwrap();
            let mut it = Integrator::new(plan);
            let mut u = [1.0, 0.0];
            it.advance(&rhs, &mut u, 1.0).unwrap();
            ((u[0] - 1f64.cos()).powi(2) + (u[1] + 1f64.sin()).powi(2)).sqrt()
        };
        let order = (err(0.25) / err(0.125)).log2();
        assert!(order >= 3.8, "{order}");
    }

    #[test]
    fn advance_handles_remainders() {
        let rhs = |_: &[f64], out: &mut [f64]| {
            out[0] = 1.0;
            Ok(())
        };
        for plan in [
            IntegratorPlan::plain(0.03, RkTableau::rk4()).unwrap(),
            IntegratorPlan::new(0.001, vec![2], vec![7.0], RkTableau::rk4()).unwrap(),
            IntegratorPlan::new(0.001, vec![3, 3], vec![6.66, 4.8], RkTableau::rk4()).unwrap(),
        ] {
            let mut it = Integrator::new(plan);
            let mut u = [0.0];
            it.advance(&rhs, &mut u, 0.157).unwrap();
            assert_relative_eq!(u[0], 0.157, max_relative = 1e-10);
            assert_relative_eq!(it.time(), 0.157, max_relative = 1e-10);
        }
    }

    #[test]
    fn counts_steps_per_level() {
        let plan = IntegratorPlan::new(0.001, vec![3, 2], vec![1.0, 2.0], RkTableau::rk2()).unwrap();
        let mut it = Integrator::new(plan);
        it.step(&zero, &mut [1.0]).unwrap();
        // 2 stages x 3 level-1 steps x 4 level-0 steps
        assert_eq!(it.stats().steps_per_level, vec![24, 6, 1]);
        assert_eq!(it.stats().rhs_evals, 24);
    }

    fn pfe_oracle(lambda: f64, dt: f64, k: usize, m: f64) -> f64 {
        let z = 1.0 + dt * lambda;
        z.powi(k as i32) * (z + m * dt * lambda)
    }

    proptest! {
        #[test]
        fn pfe_amplification(lambda in -200.0f64..0.0, dt in 1e-3f64..1e-2, k in 0usize..6, m in 0.0f64..20.0) {
            let big = (m + (k + 1) as f64) * dt;
            let plan = IntegratorPlan::new(dt, vec![k], vec![m], RkTableau::forward_euler()).unwrap();
            let mut u = [1.0];
            telescopic_step(&linear(lambda), &mut u, &plan).unwrap();
            let o = pfe_oracle(lambda, dt, k, m);
            prop_assert!((u[0] - o).abs() <= 1e-14 * o.abs().max(1.0));
            prop_assert!((plan.outer_step() - big).abs() <= 1e-12 * big);
        }

        #[test]
        fn outer_step_time_matches_plan(
            h0 in 1e-6f64..1e-3,
            ks in proptest::collection::vec(0usize..5, 1..4),
            ms in proptest::collection::vec(0.0f64..15.0, 3),
        ) {
            let m: Vec<f64> = ms[..ks.len()].to_vec();
            let plan = IntegratorPlan::new(h0, ks, m, RkTableau::rk4()).unwrap();
            let hl = plan.outer_step();
            let mut it = Integrator::new(plan);
            it.step(&zero, &mut [0.0]).unwrap();
            prop_assert!((it.time() - hl).abs() <= 1e-12 * hl);
        }
    }
}
