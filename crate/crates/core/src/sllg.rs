//! Stochastic Landau–Lifshitz–Gilbert dynamics for the two unit moments.
//!
//! The thermal field enters the same way as the effective field and is held
//! fixed over a Heun step (Stratonovich interpretation). Noise is drawn from a
//! counter-based stream: the normals of step `k` of realization `r` depend only
//! on `(seed, r, k)`, so runs are reproducible regardless of scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coherent::{BlochVector, CoherentConfiguration};
use crate::effective::{EffectiveFieldModel, FieldSample, Workspace};
use crate::error::{Error, Result};
use crate::system::Vec3;

/// 32-bit words consumed by one step: six normals from three Box–Muller
/// pairs, each uniform taking one u64.
const WORDS_PER_STEP: u128 = 12;

/// dn/dt = -γ/(1+α²) [n×B + α n×(n×B)]
#[inline]
pub fn llg_drift(n: &Vec3, b: &Vec3, gamma: f64, alpha: f64) -> Vec3 {
    let nxb = n.cross(b);
    (nxb + n.cross(&nxb) * alpha) * (-gamma / (1.0 + alpha * alpha))
}

/// Standard deviation of each Cartesian component of the thermal field,
/// √(2 α k_B T / (μ_s γ Δt)), in Tesla.
pub fn thermal_field_sigma(alpha: f64, k_b: f64, temperature: f64, moment: f64, gamma: f64, dt: f64) -> f64 {
    (2.0 * alpha * k_b * temperature / (moment * gamma * dt)).sqrt()
}

/// Counter-based normal generator for one realization.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, realization: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(realization);
        NoiseStream { rng }
    }

    /// Six independent standard normals for `step`, two per site.
    pub fn normals(&mut self, step: u64) -> [Vec3; 2] {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        let mut z = [0.0; 6];
        for pair in z.chunks_exact_mut(2) {
            // 1 - U lies in (0, 1], keeping the logarithm finite.
            let u1 = 1.0 - self.rng.random::<f64>();
            let u2: f64 = self.rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            pair[0] = r * c;
            pair[1] = r * s;
        }
        [Vec3::new(z[0], z[1], z[2]), Vec3::new(z[3], z[4], z[5])]
    }

    /// A uniformly distributed unit vector, independent of the step normals.
    pub fn uniform_direction(seed: u64, realization: u64, site: u32) -> Vec3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        rng.set_stream(realization.wrapping_mul(2).wrapping_add(site as u64));
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).max(0.0).sqrt();
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSettings {
    pub temperature: f64,
    pub seed: u64,
    pub realization: u64,
    /// Disables the thermal field while keeping everything else unchanged.
    pub enabled: bool,
}

impl NoiseSettings {
    pub fn off() -> Self {
        NoiseSettings {
            temperature: 0.0,
            seed: 0,
            realization: 0,
            enabled: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub n1: Vec3,
    pub n2: Vec3,
    /// Steps taken so far; indexes the noise stream.
    pub step: u64,
}

impl SimState {
    pub fn new(config: &CoherentConfiguration) -> Self {
        SimState {
            n1: *config.n1.as_vec(),
            n2: *config.n2.as_vec(),
            step: 0,
        }
    }

    pub fn config(&self) -> CoherentConfiguration {
        CoherentConfiguration::new(
            BlochVector::from_unit_unchecked(self.n1),
            BlochVector::from_unit_unchecked(self.n2),
        )
    }

    pub fn time(&self, dt: f64) -> f64 {
        self.step as f64 * dt
    }
}

/// Integrates one realization. `dt` is in seconds.
#[derive(Debug, Clone)]
pub struct Integrator<'m> {
    model: &'m EffectiveFieldModel,
    dt: f64,
    gamma: f64,
    alpha: f64,
    sigma: f64,
    noise: Option<NoiseStream>,
    ws: Workspace,
}

impl<'m> Integrator<'m> {
    pub fn new(model: &'m EffectiveFieldModel, dt: f64, noise: NoiseSettings) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let spec = model.spec();
        let gamma = spec.constants.gamma();
        let alpha = spec.alpha;
        let (sigma, stream) = if noise.enabled && noise.temperature > 0.0 && alpha > 0.0 {
            let sigma = thermal_field_sigma(alpha, spec.constants.k_b, noise.temperature, spec.moment(), gamma, dt);
            (sigma, Some(NoiseStream::new(noise.seed, noise.realization)))
        } else {
            (0.0, None)
        };
        Ok(Integrator {
            model,
            dt,
            gamma,
            alpha,
            sigma,
            noise: stream,
            ws: model.workspace(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn noise_sigma(&self) -> f64 {
        self.sigma
    }

    fn field(&mut self, n1: Vec3, n2: Vec3) -> Result<FieldSample> {
        let cfg = CoherentConfiguration::new(BlochVector::from_unit_unchecked(n1), BlochVector::from_unit_unchecked(n2));
        self.model.field_with(&cfg, &mut self.ws)
    }

    /// One Heun step with both moments renormalised afterwards.
    pub fn step(&mut self, state: &mut SimState) -> Result<()> {
        let thermal = match self.noise.as_mut() {
            Some(stream) => {
                let z = stream.normals(state.step);
                [z[0] * self.sigma, z[1] * self.sigma]
            }
            None => [Vec3::zeros(); 2],
        };
        let (g, a, dt) = (self.gamma, self.alpha, self.dt);
        let f0 = self.field(state.n1, state.n2)?;
        let d1 = llg_drift(&state.n1, &(f0.b1 + thermal[0]), g, a);
        let d2 = llg_drift(&state.n2, &(f0.b2 + thermal[1]), g, a);
        let p1 = (state.n1 + d1 * dt).normalize();
        let p2 = (state.n2 + d2 * dt).normalize();
        let f1 = self.field(p1, p2)?;
        let e1 = llg_drift(&p1, &(f1.b1 + thermal[0]), g, a);
        let e2 = llg_drift(&p2, &(f1.b2 + thermal[1]), g, a);
        state.n1 = (state.n1 + (d1 + e1) * (0.5 * dt)).normalize();
        state.n2 = (state.n2 + (d2 + e2) * (0.5 * dt)).normalize();
        state.step += 1;
        Ok(())
    }

    pub fn run(&mut self, state: &mut SimState, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }

    /// Lazily steps `steps` times, yielding the state after each step.
    pub fn simulate(&mut self, initial: SimState, steps: u64) -> Trajectory<'_, 'm> {
        Trajectory {
            integrator: self,
            state: initial,
            remaining: steps,
            failed: false,
        }
    }
}

pub struct Trajectory<'a, 'm> {
    integrator: &'a mut Integrator<'m>,
    state: SimState,
    remaining: u64,
    failed: bool,
}

impl Iterator for Trajectory<'_, '_> {
    type Item = Result<SimState>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 || self.failed {
            return None;
        }
        self.remaining -= 1;
        match self.integrator.step(&mut self.state) {
            Ok(()) => Some(Ok(self.state)),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}
