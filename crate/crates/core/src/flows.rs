//! Gradient-flow semigroups by iterated resolvents, and the proximal point
//! algorithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::geometry::{Point, Space};
use crate::prox::{resolvent, slope_upper};

/// One iterate of a flow, PPA run or resolvent path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub n: usize,
    /// Step parameter used to reach this point (0 for the start).
    pub lambda: f64,
    pub point: Point,
    pub value: f64,
    /// Distance from the previous record.
    pub step_move: f64,
    /// Distance to a supplied reference minimizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Trajectory {
    pub records: Vec<Record>,
    /// Set when the run stopped early in an absorbing state.
    pub converged: bool,
}

impl Trajectory {
    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.records.iter().map(|r| &r.point)
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Step sizes `λₙ` for the proximal point algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    Constant { lambda: f64 },
    /// `λₙ = c/n`.
    Harmonic { c: f64 },
    Custom { steps: Vec<f64> },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Harmonic { c: 1.0 }
    }
}

impl StepSchedule {
    /// `λₙ` for `n ≥ 1`.
    pub fn lambda(&self, n: usize) -> Option<f64> {
        match self {
            StepSchedule::Constant { lambda } => Some(*lambda),
            StepSchedule::Harmonic { c } => Some(c / n as f64),
            StepSchedule::Custom { steps } => steps.get(n.checked_sub(1)?).copied(),
        }
    }

    /// Whether `Σλₙ = ∞` is guaranteed. Finite lists never qualify.
    pub fn divergent(&self) -> bool {
        !matches!(self, StepSchedule::Custom { .. })
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        let ok = match self {
            StepSchedule::Constant { lambda } => *lambda > 0.0 && lambda.is_finite(),
            StepSchedule::Harmonic { c } => *c > 0.0 && c.is_finite(),
            StepSchedule::Custom { steps: list } => {
                if list.len() < steps {
                    return Err(Error::invalid(format!(
                        "custom schedule has {} steps, run needs {steps}",
                        list.len()
                    )));
                }
                list.iter().all(|l| *l > 0.0 && l.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("step sizes must be positive and finite"))
        }
    }
}

/// A-priori error bound `t·s/(√2 n)` for `n` resolvent steps of total time `t`
/// from a point of slope `s`.
pub fn error_bound(t: f64, slope: f64, n: usize) -> f64 {
    if n == 0 {
        return if t == 0.0 { 0.0 } else { f64::INFINITY };
    }
    t * slope / (std::f64::consts::SQRT_2 * n as f64)
}

fn at_step(step: usize, err: Error) -> Error {
    match err {
        Error::SolverFailure { message, best, gap } => Error::SolverFailure {
            message: format!("step {step}: {message}"),
            best,
            gap,
        },
        other => other,
    }
}

/// `(J_{t/n})⁽ⁿ⁾ x`.
pub fn semigroup_fixed(space: &Space, f: &Functional, x: &Point, t: f64, n: usize, tol: f64) -> Result<Point> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time t = {t} must be finite and nonnegative")));
    }
    if n == 0 {
        return Err(Error::invalid("step count must be positive"));
    }
    space.validate(x)?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    let lambda = t / n as f64;
    let mut y = x.clone();
    for k in 1..=n {
        let r = resolvent(space, f, &y, lambda, tol).map_err(|e| at_step(k, e))?;
        if k == 1 && !f.value(space, &r.point).is_finite() {
            return Err(Error::invalid("start point is outside the closure of the domain"));
        }
        y = r.point;
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRun {
    pub point: Point,
    pub steps: usize,
    /// A-priori bound on the distance to the exact flow.
    pub bound: f64,
    /// Slope surrogate `d(x, J_λx)/λ` at small `λ`.
    pub slope: f64,
}

/// Runs the semigroup with the smallest `n` whose a-priori error bound is at
/// most `target`.
pub fn semigroup_adaptive(
    space: &Space,
    f: &Functional,
    x: &Point,
    t: f64,
    target: f64,
    tol: f64,
) -> Result<AdaptiveRun> {
    if !(target > 0.0) {
        return Err(Error::invalid("target error must be positive"));
    }
    if t == 0.0 {
        space.validate(x)?;
        return Ok(AdaptiveRun {
            point: x.clone(),
            steps: 0,
            bound: 0.0,
            slope: 0.0,
        });
    }
    let probe = 1e-4 * t.min(1.0);
    let slope = slope_upper(space, f, x, probe)?;
    if !slope.is_finite() {
        return Err(Error::unsupported("start point has no finite slope estimate"));
    }
    let n = ((t * slope / (std::f64::consts::SQRT_2 * target)).ceil() as usize).max(1);
    let point = semigroup_fixed(space, f, x, t, n, tol)?;
    Ok(AdaptiveRun {
        point,
        steps: n,
        bound: error_bound(t, slope, n),
        slope,
    })
}

/// Consecutive moves below `ABSORB_TOL·scale` for this many steps end a run.
const ABSORB_STEPS: usize = 5;
const ABSORB_TOL: f64 = 1e-14;

/// Proximal point algorithm `xₙ = J_{λₙ} xₙ₋₁` for up to `steps` iterations.
pub fn ppa_run(
    space: &Space,
    f: &Functional,
    x0: &Point,
    schedule: &StepSchedule,
    steps: usize,
    tol: f64,
    reference: Option<&Point>,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::invalid("PPA needs at least one step"));
    }
    schedule.validate(steps)?;
    space.validate(x0)?;
    if let Some(r) = reference {
        space.validate(r)?;
    }
    let refdist = |p: &Point| reference.map(|r| space.dist(p, r));
    let mut traj = Trajectory {
        records: vec![Record {
            n: 0,
            lambda: 0.0,
            point: x0.clone(),
            value: f.value(space, x0),
            step_move: 0.0,
            reference_distance: refdist(x0),
        }],
        converged: false,
    };
    let mut scale = 1.0_f64;
    let mut still = 0;
    let mut x = x0.clone();
    for n in 1..=steps {
        let lambda = schedule.lambda(n).expect("validated schedule");
        let r = match resolvent(space, f, &x, lambda, tol) {
            Ok(r) => r,
            Err(e) => {
                return Err(Error::PartialRun {
                    step: n,
                    trajectory: Box::new(traj),
                    source: Box::new(at_step(n, e)),
                })
            }
        };
        let step_move = space.dist(&x, &r.point);
        scale = scale.max(step_move);
        x = r.point;
        traj.records.push(Record {
            n,
            lambda,
            value: f.value(space, &x),
            step_move,
            reference_distance: refdist(&x),
            point: x.clone(),
        });
        still = if step_move < ABSORB_TOL * scale { still + 1 } else { 0 };
        if still >= ABSORB_STEPS {
            traj.converged = true;
            break;
        }
    }
    Ok(traj)
}

/// `J_λ x₀` for each `λ` in an ascending list.
pub fn resolvent_path(space: &Space, f: &Functional, x0: &Point, lambdas: &[f64], tol: f64) -> Result<Trajectory> {
    if lambdas.is_empty() {
        return Err(Error::invalid("empty λ list"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("λ list must be positive and ascending"));
    }
    space.validate(x0)?;
    let mut traj = Trajectory::default();
    let mut prev = x0.clone();
    for (i, &lambda) in lambdas.iter().enumerate() {
        let r = resolvent(space, f, x0, lambda, tol).map_err(|e| at_step(i + 1, e))?;
        traj.records.push(Record {
            n: i + 1,
            lambda,
            value: f.value(space, &r.point),
            step_move: space.dist(&prev, &r.point),
            reference_distance: None,
            point: r.point.clone(),
        });
        prev = r.point;
    }
    Ok(traj)
}

/// Entry `(n, c)` is `d(xₙ, c) − d(xₙ₊₁, c)`.
pub fn fejer_slacks(space: &Space, traj: &Trajectory, witnesses: &[Point]) -> Vec<Vec<f64>> {
    traj.records
        .windows(2)
        .map(|w| {
            witnesses
                .iter()
                .map(|c| space.dist(&w[0].point, c) - space.dist(&w[1].point, c))
                .collect()
        })
        .collect()
}

/// `f(xₙ₋₁) − f(xₙ) − d(xₙ, xₙ₋₁)²/(2λₙ)` for each PPA step; nonnegative
/// up to solver tolerance.
pub fn descent_slacks(traj: &Trajectory) -> Vec<f64> {
    traj.records
        .windows(2)
        .map(|w| w[0].value - w[1].value - w[1].step_move.powi(2) / (2.0 * w[1].lambda))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexSet, Matrix, MetricTree};

    fn line() -> Space {
        Space::Euclidean { dim: 1 }
    }

    fn xs(t: &Trajectory) -> Vec<f64> {
        t.points().map(|p| p.as_vector().unwrap()[0]).collect()
    }

    #[test]
    fn semigroup_scalar_recursion() {
        let f = Functional::squared_distance(Point::scalar(0.0), 1.0);
        let y = semigroup_fixed(&line(), &f, &Point::scalar(1.0), 1.0, 1000, 1e-12).unwrap();
        let oracle = (1.001f64).powi(-1000);
        assert!((y.as_vector().unwrap()[0] - oracle).abs() < 1e-12);
        assert!((oracle - 0.368063).abs() < 1e-6);
        let y0 = semigroup_fixed(&line(), &f, &Point::scalar(1.0), 0.0, 7, 1e-12).unwrap();
        assert_eq!(y0, Point::scalar(1.0));
        let ind = Functional::Indicator(ConvexSet::Interval { lo: 0.0, hi: 1.0 });
        let y = semigroup_fixed(&line(), &ind, &Point::scalar(0.25), 3.0, 10, 1e-12).unwrap();
        assert_eq!(y, Point::scalar(0.25));
    }

    #[test]
    fn adaptive_step_count() {
        let f = Functional::squared_distance(Point::scalar(0.0), 1.0);
        let run = semigroup_adaptive(&line(), &f, &Point::scalar(1.0), 1.0, 1e-3, 1e-12).unwrap();
        assert!(run.steps >= 708, "{}", run.steps);
        assert!(run.bound <= 1e-3);
        assert!((run.point.as_vector().unwrap()[0] - (-1f64).exp()).abs() <= 1e-3);
        let abs = Functional::distance(Point::scalar(0.0), 1.0);
        let run = semigroup_adaptive(&line(), &abs, &Point::scalar(5.0), 2.0, 1e-2, 1e-12).unwrap();
        assert!((run.point.as_vector().unwrap()[0] - 3.0).abs() < 1e-12);
        let run = semigroup_adaptive(&line(), &abs, &Point::scalar(5.0), 0.0, 1e-2, 1e-12).unwrap();
        assert_eq!((run.steps, run.bound), (0, 0.0));
    }

    #[test]
    fn ppa_soft_threshold_and_fejer() {
        let abs = Functional::distance(Point::scalar(0.0), 1.0);
        let traj = ppa_run(
            &line(),
            &abs,
            &Point::scalar(5.0),
            &StepSchedule::Constant { lambda: 1.0 },
            20,
            1e-12,
            Some(&Point::scalar(0.0)),
        )
        .unwrap();
        assert_eq!(&xs(&traj)[..7], &[5.0, 4.0, 3.0, 2.0, 1.0, 0.0, 0.0]);
        let slacks = fejer_slacks(&line(), &traj, &[Point::scalar(0.0)]);
        assert_eq!(slacks[0][0], 1.0);
        assert_eq!(slacks[5][0], 0.0);
        assert!(traj.converged);
        assert_eq!(traj.len(), 11);
        assert!(descent_slacks(&traj).iter().all(|s| *s >= -1e-12));
    }

    #[test]
    fn ppa_indicator_projects_then_stays() {
        let ind = Functional::Indicator(ConvexSet::Interval { lo: 0.0, hi: 1.0 });
        let traj = ppa_run(&line(), &ind, &Point::scalar(3.0), &StepSchedule::default(), 4, 1e-12, None).unwrap();
        assert_eq!(&xs(&traj)[1..], &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn tripod_median_ppa_reaches_branch_point() {
        let s = Space::tree(MetricTree::star(3, 1.0).unwrap());
        let f = Functional::uniform_fermat_weber((1..=3).map(Point::node).collect(), 1).unwrap();
        let center = Point::node(0);
        let traj = ppa_run(&s, &f, &Point::node(1), &StepSchedule::default(), 1000, 1e-12, Some(&center)).unwrap();
        assert!(traj.last().unwrap().reference_distance.unwrap() < 1e-2);
        for row in fejer_slacks(&s, &traj, &[center]) {
            assert!(row[0] >= -1e-9);
        }
    }

    #[test]
    fn resolvent_path_examples() {
        let f = Functional::distance(Point::scalar(3.0), 1.0);
        let traj = resolvent_path(&line(), &f, &Point::scalar(0.0), &[1.0, 2.0, 4.0, 8.0], 1e-12).unwrap();
        assert_eq!(xs(&traj), vec![1.0, 2.0, 3.0, 3.0]);
        assert!(resolvent_path(&line(), &f, &Point::scalar(0.0), &[2.0, 1.0], 1e-12).is_err());

        let s = Space::Spd { n: 2 };
        let a = Point::Matrix(Matrix::diag(&[4.0, 1.0]));
        let b = Point::Matrix(Matrix::diag(&[0.25, 1.0]));
        let f = Functional::uniform_fermat_weber(vec![a.clone(), b], 2).unwrap();
        let traj = resolvent_path(&s, &f, &a, &[1.0, 10.0, 100.0, 1000.0], 1e-12).unwrap();
        let d: Vec<f64> = traj.points().map(|p| s.dist(p, &s.origin())).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        // Minimizer start: the path is constant.
        let traj = resolvent_path(&s, &f, &s.origin(), &[1.0, 10.0], 1e-12).unwrap();
        assert!(traj.points().all(|p| s.dist(p, &s.origin()) < 1e-12));
    }

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::Harmonic { c: 2.0 }.lambda(4), Some(0.5));
        assert!(StepSchedule::Custom { steps: vec![1.0] }.validate(2).is_err());
        assert!(StepSchedule::Constant { lambda: -1.0 }.validate(2).is_err());
        assert!(!StepSchedule::Custom { steps: vec![1.0] }.divergent());
    }
}
