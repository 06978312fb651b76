//! End-to-end acceptance checks. One line per criterion:
//!
//!     [PASS|FAIL|KNOWN-FAIL|SKIP] <name>: <details>
//!
//! Tolerances are pinned below. A criterion listed in `KNOWN_FAILURES` is
//! allowed to fail (each has a written analysis in the project notes); any
//! other failure makes the process exit non-zero.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use pisd_core::coherent::{
    analytic_moment, bloch_to_stereo, brute_moment, coherent_state_vector, MomentKind, SiteOp,
};
use pisd_core::effective::QuantumContext;
use pisd_core::harness::{
    classical_reference_quadrature, criterion_threshold, ed_sweep, linspace, run_temperature_sweep, CriterionMode,
    SweepConfig, SweepResult,
};
use pisd_core::quantum::{closed_form_sz_half, thermal_expectation_sz};
use pisd_core::{BlochVector, CoherentConfiguration, EffectiveFieldModel, ModelKind, Spin, SpinSystemSpec, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

const CLOSED_FORM_REL: f64 = 1e-10;
const MOMENT_REL: f64 = 1e-12;
const HEFF_REL: f64 = 1e-10;
const BOLTZMANN_SIGMAS: f64 = 3.0;
const SWEEP_SIGMAS: f64 = 3.0;
const SWEEP_REL: f64 = 0.05;
const CLASSICAL_BAND: f64 = 0.05;
const SUPREMUM_REL: f64 = 1e-6;
const DIFFERENCE_TARGET_K: f64 = 200.0;
const DIFFERENCE_WINDOW: f64 = 0.20;

const SEED: u64 = 20_240_601;

const KNOWN_FAILURES: &[&str] = &["spin2-series-trend", "convergence-thresholds"];

struct Outcome {
    name: &'static str,
    pass: bool,
    details: String,
}

fn e0() -> f64 {
    pisd_core::PhysicalConstants::ELECTRON.g_mu_b()
}

fn random_unit(rng: &mut ChaCha8Rng) -> BlochVector {
    let v: [f64; 3] = UnitSphere.sample(rng);
    BlochVector::new(Vec3::from(v)).unwrap()
}

/// |a - b| <= max(3σ, rel·|b|)
fn within_band(a: f64, sigma: f64, b: f64) -> bool {
    (a - b).abs() <= (SWEEP_SIGMAS * sigma).max(SWEEP_REL * b.abs())
}

fn describe(res: &SweepResult, ed: &[(f64, f64)]) -> String {
    res.rows
        .iter()
        .zip(ed)
        .map(|(r, (_, e))| {
            if r.is_ok() {
                format!("T={}K {:.4}±{:.4} vs {:.4}", r.temperature, r.sz_over_hbar, r.std_error, e)
            } else {
                format!("T={}K failed", r.temperature)
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Four-level partition function for two spin-1/2: triplet −J/4 − m·gμ_B·B,
/// singlet 3J/4. Returns the per-site ⟨S_z⟩/ħ.
fn four_level_sz(t: f64, j: f64, bz: f64) -> f64 {
    let c = pisd_core::PhysicalConstants::ELECTRON;
    let beta = 1.0 / (c.k_b * t);
    let ez = c.g_mu_b() * bz;
    let levels = [(-j / 4.0 - ez, 1.0), (-j / 4.0, 0.0), (-j / 4.0 + ez, -1.0), (0.75 * j, 0.0)];
    let emin = levels.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
    let z: f64 = levels.iter().map(|(e, _)| (-beta * (e - emin)).exp()).sum();
    let m: f64 = levels.iter().map(|(e, m)| m * (-beta * (e - emin)).exp()).sum();
    0.5 * m / z
}

fn closed_form_oracle() -> Outcome {
    let temps = linspace(0.1, 10.0, 50).unwrap();
    let mut worst: f64 = 0.0;
    for ratio in [0.0, 1.0, -1.0, -2.0] {
        let spec = SpinSystemSpec::along_z(0.5, ratio, 1.0, 0.5).unwrap();
        let ctx = QuantumContext::new(&spec).unwrap();
        for &t in &temps {
            let ed = thermal_expectation_sz(&ctx.eig, t, &spec).unwrap();
            let oracle = four_level_sz(t, spec.exchange, 1.0);
            let lib = closed_form_sz_half(t, spec.exchange, 1.0, &spec.constants).unwrap();
            worst = worst.max(((ed - oracle) / oracle).abs()).max(((lib - oracle) / oracle).abs());
        }
    }
    Outcome {
        name: "closed-form-oracle",
        pass: worst <= CLOSED_FORM_REL,
        details: format!("worst relative error {worst:.2e} (tol {CLOSED_FORM_REL:e}), 4 couplings x 50 temperatures"),
    }
}

fn moment_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let kinds = MomentKind::catalogue();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for s in [0.5, 1.0, 2.0] {
        let spin = Spin::new(s).unwrap();
        for _ in 0..100 {
            let (n1, n2) = (random_unit(&mut rng), random_unit(&mut rng));
            let config = CoherentConfiguration::new(n1, n2);
            let z = bloch_to_stereo(n1).unwrap();
            for &kind in &kinds {
                let ops: Vec<SiteOp> = kind.operators().into_iter().map(|k| SiteOp::new(1, k)).collect();
                let brute = brute_moment(&ops, spin, &config).unwrap();
                let analytic = analytic_moment(kind, spin, z).unwrap();
                // natural scale of a k-fold product of spin-s operators
                let scale = brute.norm().max(s.powi(ops.len() as i32));
                worst = worst.max((analytic - brute).norm() / scale);
                checked += 1;
            }
        }
    }
    Outcome {
        name: "moment-suite",
        pass: worst <= MOMENT_REL,
        details: format!(
            "{} kinds, {checked} comparisons, worst relative error {worst:.2e} (tol {MOMENT_REL:e})",
            kinds.len()
        ),
    }
}

fn heff_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    for s in [0.5, 1.0, 2.0] {
        let spec = SpinSystemSpec::along_z(s, 1.0, 1.0, 0.5).unwrap();
        let ctx = QuantumContext::new(&spec).unwrap();
        for t in [1.0, 10.0] {
            let model = EffectiveFieldModel::new(ModelKind::EigenOverlap, ctx.clone(), t).unwrap();
            let beta = model.beta();
            let propagator: DMatrix<Complex64> = (&ctx.hamiltonian.matrix * Complex64::from(-beta)).exp();
            for _ in 0..100 {
                let config = CoherentConfiguration::new(random_unit(&mut rng), random_unit(&mut rng));
                let psi = nalgebra::DVector::from_vec(coherent_state_vector(spec.spin, &config).amplitudes);
                let w = (psi.adjoint() * &propagator * &psi)[(0, 0)].re;
                let oracle = -w.ln() / beta;
                let got = model.effective_hamiltonian(&config).unwrap();
                worst = worst.max(((got - oracle) / oracle).abs());
            }
        }
    }
    Outcome {
        name: "heff-identity",
        pass: worst <= HEFF_REL,
        details: format!("worst relative error {worst:.2e} (tol {HEFF_REL:e}), s in {{1/2,1,2}}, T in {{1,10}} K"),
    }
}

fn boltzmann_test() -> Outcome {
    let spec = SpinSystemSpec::along_z(0.5, 1.0, 1.0, 0.5).unwrap();
    let temps = vec![2.0, 5.0, 10.0];
    let cfg = SweepConfig {
        n_realizations: 32,
        ..SweepConfig::desk_scale(spec.clone(), ModelKind::Classical, temps, SEED)
    };
    let res = run_temperature_sweep(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &res.rows {
        let q = 0.5 * classical_reference_quadrature(&spec, r.temperature).unwrap();
        let z = (r.sz_over_hbar - q) / r.std_error;
        pass &= r.is_ok() && z.abs() <= BOLTZMANN_SIGMAS;
        parts.push(format!("T={}K {:.5}±{:.5} vs {:.5} ({z:+.2}σ)", r.temperature, r.sz_over_hbar, r.std_error, q));
    }
    Outcome {
        name: "integrator-boltzmann",
        pass,
        details: parts.join("; "),
    }
}

fn ferro_eigen_overlap() -> Outcome {
    let spec = SpinSystemSpec::along_z(0.5, 1.0, 1.0, 0.5).unwrap();
    let temps = vec![1.0, 2.0, 4.0, 8.0];
    let res = run_temperature_sweep(&SweepConfig::desk_scale(spec.clone(), ModelKind::EigenOverlap, temps.clone(), SEED))
        .unwrap();
    let ed = ed_sweep(&spec, &temps).unwrap();
    let pass = res
        .rows
        .iter()
        .zip(&ed)
        .all(|(r, (_, e))| r.is_ok() && within_band(r.sz_over_hbar, r.std_error, *e));
    Outcome {
        name: "ferro-eigen-overlap",
        pass,
        details: describe(&res, &ed),
    }
}

fn antiferro_nonmonotonic() -> Outcome {
    let spec = SpinSystemSpec::along_z(0.5, -2.0, 1.0, 0.5).unwrap();
    let temps = vec![0.5, 1.5, 4.0, 8.0];
    let cfg = SweepConfig {
        dt: 7e-16,
        ..SweepConfig::desk_scale(spec.clone(), ModelKind::EigenOverlap, temps.clone(), SEED)
    };
    let res = run_temperature_sweep(&cfg).unwrap();
    let ed = ed_sweep(&spec, &temps).unwrap();
    let matches = res
        .rows
        .iter()
        .zip(&ed)
        .all(|(r, (_, e))| r.is_ok() && within_band(r.sz_over_hbar, r.std_error, *e));
    let sz: Vec<f64> = res.rows.iter().map(|r| r.sz_over_hbar).collect();
    let (first, last) = (sz[0], sz[sz.len() - 1]);
    let interior_max = sz[1..sz.len() - 1].iter().any(|&v| v > first && v > last);

    // Classical comparison at the lowest temperature.
    let lowest = temps[0];
    let classical = run_temperature_sweep(&SweepConfig {
        n_realizations: 20,
        temperatures: vec![lowest],
        model: ModelKind::Classical,
        ..cfg.clone()
    })
    .unwrap();
    let c = &classical.rows[0];
    let e = ed[0].1;
    let tolerance = (SWEEP_SIGMAS * c.std_error).max(SWEEP_REL * e.abs());
    let classical_off = c.is_ok() && (c.sz_over_hbar - e).abs() > 5.0 * tolerance;
    Outcome {
        name: "antiferro-nonmonotonic",
        pass: matches && interior_max && classical_off,
        details: format!(
            "{}; interior maximum: {interior_max}; classical at {lowest}K {:.4}±{:.4}, |dev| {:.4} vs 5x tol {:.4}",
            describe(&res, &ed),
            c.sz_over_hbar,
            c.std_error,
            (c.sz_over_hbar - e).abs(),
            5.0 * tolerance
        ),
    }
}

fn spin2_series_trend() -> Outcome {
    let spec = SpinSystemSpec::along_z(2.0, 1.0, 1.0, 0.5).unwrap();
    let run = |model: ModelKind, t: f64| {
        let res = run_temperature_sweep(&SweepConfig::desk_scale(spec.clone(), model, vec![t], SEED)).unwrap();
        let ed = ed_sweep(&spec, &[t]).unwrap()[0].1;
        (res.rows[0].clone(), ed)
    };
    let (de2, ed4) = run(ModelKind::DifferenceExpansion(2), 4.0);
    let (de3, ed1) = run(ModelKind::DifferenceExpansion(3), 1.0);
    let (cl, _) = run(ModelKind::Classical, 1.0);
    let within = |r: &pisd_core::harness::SweepRow, e: f64| r.is_ok() && (r.sz_over_hbar - e).abs() <= SWEEP_SIGMAS * r.std_error;
    let show = |r: &pisd_core::harness::SweepRow, e: f64| match &r.status {
        pisd_core::harness::RowStatus::Ok => format!("{:.4}±{:.4} vs ED {e:.4}", r.sz_over_hbar, r.std_error),
        pisd_core::harness::RowStatus::Failed(why) => format!("failed ({})", why.split(" for n1").next().unwrap_or(why)),
    };
    let a = within(&de2, ed4);
    let b = within(&de3, ed1);
    let c = cl.is_ok() && ((cl.sz_over_hbar - ed1) / ed1).abs() > CLASSICAL_BAND;
    Outcome {
        name: "spin2-series-trend",
        pass: a && b && c,
        details: format!(
            "difference(2) at 4K {} [{}]; difference(3) at 1K {} [{}]; classical at 1K {} [{}]",
            show(&de2, ed4),
            if a { "ok" } else { "x" },
            show(&de3, ed1),
            if b { "ok" } else { "x" },
            show(&cl, ed1),
            if c { "ok" } else { "x" },
        ),
    }
}

fn convergence_thresholds() -> Outcome {
    let c = pisd_core::PhysicalConstants::ELECTRON;
    let ferro = SpinSystemSpec::along_z(0.5, 1.0, 1.0, 0.5).unwrap();
    let sup = criterion_threshold(&ferro, CriterionMode::Supremum).unwrap();
    let expected = 3.0 * e0() / (4.0 * c.k_b);
    let sup_ok = ((sup - expected) / expected).abs() <= SUPREMUM_REL && (sup * 100.0).round() / 100.0 == 1.01;
    let strong = SpinSystemSpec::along_z(2.0, 100.0, 1.0, 0.5).unwrap();
    let cross = criterion_threshold(&strong, CriterionMode::Difference).unwrap();
    let diff_ok = (cross / DIFFERENCE_TARGET_K - 1.0).abs() <= DIFFERENCE_WINDOW;
    Outcome {
        name: "convergence-thresholds",
        pass: sup_ok && diff_ok,
        details: format!(
            "supremum threshold {sup:.5} K (expected {expected:.5} K) [{}]; difference crossing {cross:.1} K \
             (expected {DIFFERENCE_TARGET_K} K ± {:.0}%) [{}]",
            if sup_ok { "ok" } else { "x" },
            DIFFERENCE_WINDOW * 100.0,
            if diff_ok { "ok" } else { "x" }
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 8] = [
        closed_form_oracle,
        moment_suite,
        heff_identity,
        boltzmann_test,
        ferro_eigen_overlap,
        antiferro_nonmonotonic,
        spin2_series_trend,
        convergence_thresholds,
    ];
    let mut unexpected = 0;
    for criterion in criteria {
        let start = Instant::now();
        let o = criterion();
        let known = KNOWN_FAILURES.contains(&o.name);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "KNOWN-FAIL",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("[{tag}] {}: {} ({:.1}s)", o.name, o.details, start.elapsed().as_secs_f64());
    }
    println!(
        "[SKIP] paper-scale: s=2 full range and s=1 antiferromagnet at 5 ns + 10 ns are not asserted here; \
         run them with `pisd pisd-sweep --paper-scale`"
    );
    if unexpected > 0 {
        println!("{unexpected} unexpected acceptance failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
