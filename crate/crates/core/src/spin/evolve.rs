use super::density::DensityMatrix;
use super::dissipators::DissipatorSet;
use super::levels::N_LEVELS;
use super::lindblad::Generator;
use super::matrix::LevelMatrix;
use super::SpinError;
use crate::scalar::Real;

/// Per-step trace drift above which a step is rejected.
pub const MAX_STEP_TRACE_DRIFT: f64 = 1e-6;

/// Fixed-step classical RK4 over a precomputed generator.
#[derive(Debug, Clone)]
pub struct Rk4Stepper<T: Real> {
    generator: Generator<T>,
    /// Re-Hermitize and renormalize the trace after each step. Disable only
    /// to audit raw integrator drift.
    pub renormalize: bool,
}

impl<T: Real> Rk4Stepper<T> {
    pub fn new(h: &LevelMatrix<T>, d: &DissipatorSet<T>) -> Self {
        Self::from_generator(Generator::new(h, d))
    }

    pub fn from_generator(generator: Generator<T>) -> Self {
        Self {
            generator,
            renormalize: true,
        }
    }

    pub fn audit(mut self) -> Self {
        self.renormalize = false;
        self
    }

    pub fn derivative(&self, rho: &LevelMatrix<T>) -> LevelMatrix<T> {
        self.generator.apply(rho)
    }

    pub fn generator(&self) -> &Generator<T> {
        &self.generator
    }

    /// One RK4 step of the population rate equations. Only meaningful when
    /// the generator is drive-free; coherences are then advanced separately.
    #[inline]
    pub fn step_populations(&self, p: &mut [T; N_LEVELS], dt: T) {
        let g = &self.generator;
        let half = T::lit(0.5);
        let add = |a: &[T; N_LEVELS], s: T, b: &[T; N_LEVELS]| -> [T; N_LEVELS] {
            std::array::from_fn(|i| a[i] + s * b[i])
        };
        let k1 = g.population_derivative(p);
        let k2 = g.population_derivative(&add(p, dt * half, &k1));
        let k3 = g.population_derivative(&add(p, dt * half, &k2));
        let k4 = g.population_derivative(&add(p, dt, &k3));
        let sixth = dt / T::lit(6.0);
        for i in 0..N_LEVELS {
            p[i] = p[i] + sixth * (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]);
        }
    }

    pub fn step(&self, rho: &mut DensityMatrix<T>, dt: T) -> Result<(), SpinError> {
        if self.generator.is_drive_free() {
            return self.step_free(rho, dt);
        }
        let half = T::lit(0.5);
        let y = rho.elements;
        let k1 = self.generator.apply(&y);
        let mut y2 = y;
        y2.axpy(dt * half, &k1);
        let k2 = self.generator.apply(&y2);
        let mut y3 = y;
        y3.axpy(dt * half, &k2);
        let k3 = self.generator.apply(&y3);
        let mut y4 = y;
        y4.axpy(dt, &k3);
        let k4 = self.generator.apply(&y4);

        let sixth = dt / T::lit(6.0);
        let mut next = y;
        next.axpy(sixth, &k1);
        next.axpy(sixth + sixth, &k2);
        next.axpy(sixth + sixth, &k3);
        next.axpy(sixth, &k4);

        let drift = (next.trace().re - y.trace().re).abs().as_f64();
        if !(drift <= MAX_STEP_TRACE_DRIFT) || !next.max_abs().is_finite() {
            return Err(SpinError::StepTooLarge {
                dt: dt.as_f64(),
                drift,
            });
        }
        rho.elements = next;
        rho.time = rho.time + dt;
        if self.renormalize {
            rho.normalize();
        }
        Ok(())
    }

    fn step_free(&self, rho: &mut DensityMatrix<T>, dt: T) -> Result<(), SpinError> {
        let mut p = rho.populations();
        let before = p.iter().fold(T::zero(), |a, &b| a + b);
        self.step_populations(&mut p, dt);
        let after = p.iter().fold(T::zero(), |a, &b| a + b);
        let drift = (after - before).abs().as_f64();
        if !(drift <= MAX_STEP_TRACE_DRIFT) || p.iter().any(|v| !v.is_finite()) {
            return Err(SpinError::StepTooLarge {
                dt: dt.as_f64(),
                drift,
            });
        }
        for (i, v) in p.into_iter().enumerate() {
            rho.elements[(i, i)] = num_complex::Complex::new(v, T::zero());
        }
        self.generator.decay_coherences(&mut rho.elements, dt);
        rho.time = rho.time + dt;
        if self.renormalize {
            rho.normalize();
        }
        Ok(())
    }

    /// Advances `rho` by `duration` in equal steps no longer than `dt_max`.
    pub fn advance(
        &self,
        rho: &mut DensityMatrix<T>,
        duration: T,
        dt_max: T,
    ) -> Result<(), SpinError> {
        if duration == T::zero() {
            return Ok(());
        }
        let n = (duration / dt_max).ceil().max(T::one());
        let steps = n
            .to_usize()
            .ok_or(SpinError::InvalidParams("step count overflow".into()))?;
        let dt = duration / n;
        for _ in 0..steps {
            self.step(rho, dt)?;
        }
        Ok(())
    }
}

/// Integrates the master equation for `duration` seconds with RK4 steps no
/// longer than `dt_max`, re-Hermitizing and renormalizing after each step.
pub fn evolve<T: Real>(
    rho: &DensityMatrix<T>,
    h: &LevelMatrix<T>,
    d: &DissipatorSet<T>,
    duration: T,
    dt_max: T,
) -> Result<DensityMatrix<T>, SpinError> {
    if !(duration >= T::zero()) {
        return Err(SpinError::InvalidParams("duration must be >= 0".into()));
    }
    if !(dt_max > T::zero()) {
        return Err(SpinError::InvalidParams("dt_max must be > 0".into()));
    }
    let mut out = *rho;
    Rk4Stepper::new(h, d).advance(&mut out, duration, dt_max)?;
    Ok(out)
}

/// Options for [`steady_state`].
#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Upper bound on the step; the step also stays below half the inverse fastest rate.
    pub dt_max: f64,
    /// Simulated time after which the search gives up.
    pub max_time: f64,
    /// Steps between convergence checks.
    pub check_every: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            dt_max: 1e-9,
            max_time: 2e-3,
            check_every: 64,
        }
    }
}

/// Evolves from the mixed ground state until `max |dρ/dt| < tol` (1/s).
pub fn steady_state<T: Real>(
    h: &LevelMatrix<T>,
    d: &DissipatorSet<T>,
    tol: T,
) -> Result<DensityMatrix<T>, SpinError> {
    steady_state_with(h, d, tol, SteadyStateOptions::default())
}

pub fn steady_state_with<T: Real>(
    h: &LevelMatrix<T>,
    d: &DissipatorSet<T>,
    tol: T,
    opts: SteadyStateOptions,
) -> Result<DensityMatrix<T>, SpinError> {
    if !d.cycles_closed() {
        return Err(SpinError::OpenCycle);
    }
    let stepper = Rk4Stepper::new(h, d);
    let mut rho = DensityMatrix::mixed_ground();
    let fastest = d.max_rate().as_f64();
    let mut dt = opts.dt_max;
    if fastest > 0.0 {
        dt = dt.min(0.5 / fastest);
    }
    let dt = T::lit(dt);
    let max_time = T::lit(opts.max_time);
    loop {
        if stepper.derivative(&rho.elements).max_abs() < tol {
            return Ok(rho);
        }
        if rho.time >= max_time {
            return Err(SpinError::NoConvergence {
                time: rho.time.as_f64(),
            });
        }
        for _ in 0..opts.check_every {
            stepper.step(&mut rho, dt)?;
        }
    }
}
