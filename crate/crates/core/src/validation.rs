//! Quick oracle-equivalence checks that can be run from an installed binary.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::coherent::{analytic_moment, bloch_to_stereo, brute_moment, coherent_state_vector, MomentKind, SiteOp};
use crate::coherent::{BlochVector, CoherentConfiguration};
use crate::effective::{EffectiveFieldModel, GradientMethod, ModelKind, QuantumContext};
use crate::error::Result;
use crate::harness::{classical_reference_quadrature, langevin};
use crate::quantum::{closed_form_sz_half, thermal_expectation_sz};
use crate::system::{Spin, SpinSystemSpec, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn random_config(rng: &mut ChaCha8Rng) -> Result<CoherentConfiguration> {
    let a: [f64; 3] = UnitSphere.sample(rng);
    let b: [f64; 3] = UnitSphere.sample(rng);
    Ok(CoherentConfiguration::new(
        BlochVector::new(Vec3::from(a))?,
        BlochVector::new(Vec3::from(b))?,
    ))
}

/// ED against the closed-form spin-1/2 result.
pub fn check_closed_form() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for ratio in [0.0, 1.0, -1.0, -2.0] {
        let spec = SpinSystemSpec::along_z(0.5, ratio, 1.0, 0.5)?;
        let ctx = QuantumContext::new(&spec)?;
        for i in 0..50 {
            let t = 0.1 + 9.9 * i as f64 / 49.0;
            let ed = thermal_expectation_sz(&ctx.eig, t, &spec)?;
            let cf = closed_form_sz_half(t, spec.exchange, 1.0, &spec.constants)?;
            worst = worst.max(((ed - cf) / cf).abs());
        }
    }
    Ok(Check {
        name: "closed form vs exact diagonalisation",
        worst,
        tolerance: 1e-10,
    })
}

/// Closed-form single-site moments against brute-force matrix elements.
pub fn check_moments(configs: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 2.0] {
        let spin = Spin::new(s)?;
        for _ in 0..configs {
            let config = random_config(&mut rng)?;
            let z = bloch_to_stereo(config.n1)?;
            for kind in MomentKind::catalogue() {
                let ops: Vec<SiteOp> = kind.operators().into_iter().map(|k| SiteOp::new(1, k)).collect();
                let b = brute_moment(&ops, spin, &config)?;
                let a = analytic_moment(kind, spin, z)?;
                worst = worst.max((a - b).norm() / b.norm().max(s.powi(ops.len() as i32)));
            }
        }
    }
    Ok(Check {
        name: "analytic moments vs brute force",
        worst,
        tolerance: 1e-12,
    })
}

/// Eigen-overlap H_eff against a dense matrix exponential.
pub fn check_eigen_overlap(configs: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 2.0] {
        let spec = SpinSystemSpec::along_z(s, 1.0, 1.0, 0.5)?;
        let ctx = QuantumContext::new(&spec)?;
        for t in [1.0, 10.0] {
            let model = EffectiveFieldModel::new(ModelKind::EigenOverlap, ctx.clone(), t)?;
            let beta = model.beta();
            let prop: DMatrix<Complex64> = (&ctx.hamiltonian.matrix * Complex64::from(-beta)).exp();
            for _ in 0..configs {
                let config = random_config(&mut rng)?;
                let psi = DVector::from_vec(coherent_state_vector(spec.spin, &config).amplitudes);
                let oracle = -(psi.adjoint() * &prop * &psi)[(0, 0)].re.ln() / beta;
                let got = model.effective_hamiltonian(&config)?;
                worst = worst.max(((got - oracle) / oracle).abs());
            }
        }
    }
    Ok(Check {
        name: "eigen-overlap energy vs matrix exponential",
        worst,
        tolerance: 1e-10,
    })
}

/// Generator gradients against finite differences, all quantum models.
pub fn check_gradients(configs: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let spec = SpinSystemSpec::along_z(1.0, 1.0, 1.0, 0.5)?;
    let ctx = QuantumContext::new(&spec)?;
    for kind in [
        ModelKind::EigenOverlap,
        ModelKind::SeriesExact(4),
        ModelKind::SeriesHighT(3),
        ModelKind::DifferenceExpansion(2),
    ] {
        let model = EffectiveFieldModel::new(kind, ctx.clone(), 5.0)?;
        let fd = model.clone().with_gradient(GradientMethod::FiniteDifference { step: 1e-4 });
        for _ in 0..configs {
            let config = random_config(&mut rng)?;
            let a = model.effective_field(&config)?;
            let b = fd.effective_field(&config)?;
            let scale = a.b1.norm().max(a.b2.norm()).max(1e-3);
            worst = worst.max((a.b1 - b.b1).norm().max((a.b2 - b.b2).norm()) / scale);
        }
    }
    Ok(Check {
        name: "generator gradients vs finite differences",
        worst,
        tolerance: 1e-5,
    })
}

/// Decoupled classical quadrature against the Langevin function.
pub fn check_quadrature() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (s, t) in [(0.5, 2.0), (1.0, 5.0), (2.0, 1.0)] {
        let spec = SpinSystemSpec::along_z(s, 0.0, 1.0, 0.5)?;
        let x = spec.constants.beta(t)? * spec.constants.g_mu_b() * s;
        worst = worst.max((classical_reference_quadrature(&spec, t)? - langevin(x)).abs());
    }
    Ok(Check {
        name: "classical quadrature vs Langevin function",
        worst,
        tolerance: 1e-9,
    })
}

pub fn run_all(configs: usize, seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        check_closed_form()?,
        check_moments(configs, seed)?,
        check_eigen_overlap(configs, seed.wrapping_add(1))?,
        check_gradients(configs.min(20), seed.wrapping_add(2))?,
        check_quadrature()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_on_a_small_sample() {
        for check in run_all(5, 1).unwrap() {
            assert!(check.passed(), "{check:?}");
        }
    }
}
