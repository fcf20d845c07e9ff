use crate::linalg;

/// A constrained convex program
///
/// ```text
/// minimize f0(x)  subject to  f_i(x) <= 0 (i = 0..N),  x in X
/// ```
///
/// where constraint `i` is owned by device `i`. Subgradients need not be
/// unique; any valid element of the subdifferential may be returned.
pub trait ProblemSpec: Send + Sync {
    /// Primal dimension `D`.
    fn dim(&self) -> usize;

    /// Number of device constraints `N`.
    fn num_constraints(&self) -> usize;

    fn objective(&self, x: &[f64]) -> f64;

    fn objective_subgradient(&self, x: &[f64]) -> Vec<f64>;

    fn constraint(&self, i: usize, x: &[f64]) -> f64;

    fn constraint_subgradient(&self, i: usize, x: &[f64]) -> Vec<f64>;

    /// Euclidean projection onto the global set `X`, in place.
    fn project(&self, x: &mut [f64]);

    /// `F(x) = [f_1(x), ..., f_N(x)]`.
    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_constraints())
            .map(|i| self.constraint(i, x))
            .collect()
    }

    /// `‖[F(x)]⁺‖`
    fn violation(&self, x: &[f64]) -> f64 {
        linalg::positive_part_norm(&self.constraints(x))
    }

    fn projected(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.project(&mut out);
        out
    }
}

impl<P: ProblemSpec + ?Sized> ProblemSpec for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_constraints(&self) -> usize {
        (**self).num_constraints()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        (**self).objective(x)
    }
    fn objective_subgradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).objective_subgradient(x)
    }
    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        (**self).constraint(i, x)
    }
    fn constraint_subgradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        (**self).constraint_subgradient(i, x)
    }
    fn project(&self, x: &mut [f64]) {
        (**self).project(x)
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ProjectFn = Box<dyn Fn(&mut [f64]) + Send + Sync>;

/// Closure-backed problem, handy for small hand-written instances.
pub struct FnProblem {
    dim: usize,
    objective: ScalarFn,
    objective_subgradient: VectorFn,
    constraints: Vec<(ScalarFn, VectorFn)>,
    projection: ProjectFn,
}

impl FnProblem {
    pub fn new(
        dim: usize,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        objective_subgradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            objective: Box::new(objective),
            objective_subgradient: Box::new(objective_subgradient),
            constraints: Vec::new(),
            projection: Box::new(|_| {}),
        }
    }

    pub fn with_constraint(
        mut self,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.constraints.push((Box::new(f), Box::new(g)));
        self
    }

    pub fn with_projection(mut self, p: impl Fn(&mut [f64]) + Send + Sync + 'static) -> Self {
        self.projection = Box::new(p);
        self
    }
}

impl ProblemSpec for FnProblem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }
    fn objective_subgradient(&self, x: &[f64]) -> Vec<f64> {
        (self.objective_subgradient)(x)
    }
    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        (self.constraints[i].0)(x)
    }
    fn constraint_subgradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        (self.constraints[i].1)(x)
    }
    fn project(&self, x: &mut [f64]) {
        (self.projection)(x)
    }
}

/// Restricts a problem to a subset of its constraints. Used to drop the
/// constraints of devices that can never invert their channel.
pub struct ConstraintSubset<P> {
    inner: P,
    keep: Vec<usize>,
}

impl<P: ProblemSpec> ConstraintSubset<P> {
    pub fn new(inner: P, keep: Vec<usize>) -> Self {
        debug_assert!(keep.iter().all(|&i| i < inner.num_constraints()));
        Self { inner, keep }
    }

    pub fn kept(&self) -> &[usize] {
        &self.keep
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: ProblemSpec> ProblemSpec for ConstraintSubset<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn num_constraints(&self) -> usize {
        self.keep.len()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        self.inner.objective(x)
    }
    fn objective_subgradient(&self, x: &[f64]) -> Vec<f64> {
        self.inner.objective_subgradient(x)
    }
    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        self.inner.constraint(self.keep[i], x)
    }
    fn constraint_subgradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.inner.constraint_subgradient(self.keep[i], x)
    }
    fn project(&self, x: &mut [f64]) {
        self.inner.project(x)
    }
}

/// Numerical spot checks for the convexity-related contracts of a problem.
pub mod checks {
    use crate::linalg;

    /// Largest amount by which `f(x) >= f(x') + <g(x'), x - x'>` fails over
    /// the supplied pairs. Non-positive means the inequality held everywhere.
    pub fn subgradient_gap(
        f: impl Fn(&[f64]) -> f64,
        g: impl Fn(&[f64]) -> Vec<f64>,
        pairs: &[(Vec<f64>, Vec<f64>)],
    ) -> f64 {
        pairs
            .iter()
            .map(|(x, xp)| {
                let gx = g(xp);
                let diff: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                f(xp) + linalg::dot(&gx, &diff) - f(x)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Central finite-difference gradient with per-coordinate step `h * max(1, |x_j|)`.
    pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|j| {
                let step = h * x[j].abs().max(1.0);
                probe[j] = x[j] + step;
                let up = f(&probe);
                probe[j] = x[j] - step;
                let down = f(&probe);
                probe[j] = x[j];
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    /// Largest amount by which midpoint convexity fails on the supplied pairs.
    pub fn convexity_gap(f: impl Fn(&[f64]) -> f64, pairs: &[(Vec<f64>, Vec<f64>)], theta: f64) -> f64 {
        pairs
            .iter()
            .map(|(a, b)| {
                let mix: Vec<f64> = a
                    .iter()
                    .zip(b)
                    .map(|(u, v)| theta * u + (1.0 - theta) * v)
                    .collect();
                f(&mix) - (theta * f(a) + (1.0 - theta) * f(b))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
