//! Effective classical Hamiltonians for the two-spin problem and the
//! corresponding per-site fields.
//!
//! Every quantum-corrected variant is a function of a coherent-state
//! expectation `G(n¹, n²) = ⟨z¹z²|A|z¹z²⟩` of some Hermitian operator `A`
//! built from the Hamiltonian (e^{-βH}, a truncated Taylor polynomial of it,
//! or of `H - H_cl`). Gradients are obtained either from rotation generators,
//!
//! ```text
//! ∇⊥_{n_i} G = g × n_i,   g_a = i⟨[S_a^{(i)}, A]⟩ = -2 Im⟨S_a^{(i)} ψ | A ψ⟩,
//! ```
//!
//! which is exact, or by fourth-order central differences on the ambient
//! coordinates with renormalised evaluation points. Both give the component
//! tangent to the sphere only; the radial part never enters the LLG drift.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::coherent::{product_state_into, CoherentConfiguration, Ladder, OpKind};
use crate::error::{Error, Result};
use crate::linalg::{inner, SparseMatrix};
use crate::quantum::{build_two_spin_hamiltonian, eigendecompose, EigenSystem, TwoSpinHamiltonian};
use crate::system::{SpinSystemSpec, Vec3};

/// Default finite-difference step on the ambient Bloch coordinates.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Classical,
    SeriesExact(u32),
    SeriesHighT(u32),
    DifferenceExpansion(u32),
    EigenOverlap,
}

impl ModelKind {
    pub fn order(&self) -> Option<u32> {
        match *self {
            ModelKind::SeriesExact(n) | ModelKind::SeriesHighT(n) | ModelKind::DifferenceExpansion(n) => Some(n),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::Classical => "classical",
            ModelKind::SeriesExact(_) => "series-exact",
            ModelKind::SeriesHighT(_) => "series-high-t",
            ModelKind::DifferenceExpansion(_) => "difference",
            ModelKind::EigenOverlap => "eigen-overlap",
        }
    }

    /// Parses a model tag together with an optional order.
    pub fn from_tag(tag: &str, order: Option<u32>) -> Result<Self> {
        let need = |o: Option<u32>| -> Result<u32> {
            match o {
                Some(n) if n >= 1 => Ok(n),
                Some(_) => Err(Error::invalid("series order must be at least 1")),
                None => Err(Error::invalid(format!("model '{tag}' requires an order"))),
            }
        };
        match tag {
            "classical" => Ok(ModelKind::Classical),
            "eigen-overlap" => Ok(ModelKind::EigenOverlap),
            "series-exact" => Ok(ModelKind::SeriesExact(need(order)?)),
            "series-high-t" => Ok(ModelKind::SeriesHighT(need(order)?)),
            "difference" => Ok(ModelKind::DifferenceExpansion(need(order)?)),
            _ => Err(Error::invalid(format!("unknown model '{tag}'"))),
        }
    }

    /// The normalisation C/ħ turning ⟨n_z⟩ into ⟨S_z⟩/ħ.
    pub fn sz_scale(&self, s: f64) -> f64 {
        match self {
            ModelKind::Classical => s,
            _ => s + 1.0,
        }
    }

    pub fn is_quantum(&self) -> bool {
        !matches!(self, ModelKind::Classical)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.order() {
            Some(n) => write!(f, "{}({n})", self.tag()),
            None => f.write_str(self.tag()),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// `classical`, `eigen-overlap`, or `<tag>(<order>)`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('(') {
            Some((tag, rest)) => {
                let n = rest
                    .strip_suffix(')')
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| Error::invalid(format!("bad model '{s}'")))?;
                ModelKind::from_tag(tag, Some(n))
            }
            None => ModelKind::from_tag(s, None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMethod {
    /// Exact tangential gradient from rotation generators.
    Generator,
    /// Fourth-order central differences with the given step.
    FiniteDifference { step: f64 },
}

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::Generator
    }
}

/// Per-site effective fields (Tesla) and the effective energy (Joules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b1: Vec3,
    pub b2: Vec3,
    pub energy: f64,
}

impl FieldSample {
    pub fn site(&self, site: usize) -> &Vec3 {
        if site == 0 {
            &self.b1
        } else {
            &self.b2
        }
    }
}

/// Everything about a spin system that does not depend on temperature:
/// the Hamiltonian (dense and sparse) and its eigensystem.
#[derive(Debug)]
pub struct QuantumContext {
    pub spec: SpinSystemSpec,
    pub hamiltonian: TwoSpinHamiltonian,
    pub sparse: SparseMatrix,
    pub eig: EigenSystem,
    pub ladder: Ladder,
}

impl QuantumContext {
    pub fn new(spec: &SpinSystemSpec) -> Result<Arc<Self>> {
        let hamiltonian = build_two_spin_hamiltonian(spec)?;
        let eig = eigendecompose(&hamiltonian)?;
        Ok(Arc::new(QuantumContext {
            spec: spec.clone(),
            sparse: hamiltonian.to_sparse(),
            ladder: Ladder::new(spec.spin),
            hamiltonian,
            eig,
        }))
    }
}

/// −J s² n¹·n² − g μ_B s B·(n¹+n²)
pub fn classical_energy(spec: &SpinSystemSpec, config: &CoherentConfiguration) -> f64 {
    classical_energy_vec(spec, config.n1.as_vec(), config.n2.as_vec())
}

#[inline]
fn classical_energy_vec(spec: &SpinSystemSpec, n1: &Vec3, n2: &Vec3) -> f64 {
    let s = spec.spin.value();
    -spec.exchange * s * s * n1.dot(n2) - spec.constants.g_mu_b() * s * spec.field.dot(&(n1 + n2))
}

/// ∂H_cl/∂n for each site (ambient, including the radial part).
#[inline]
fn classical_gradient(spec: &SpinSystemSpec, n1: &Vec3, n2: &Vec3) -> [Vec3; 2] {
    let s = spec.spin.value();
    let zee = spec.field * (spec.constants.g_mu_b() * s);
    let js2 = spec.exchange * s * s;
    [-(n2 * js2) - zee, -(n1 * js2) - zee]
}

/// Σ_k e^{-β(λ_k-λ_min)} |⟨v_k|ψ⟩|² for an arbitrary eigenbasis.
pub fn eigen_overlap_sum(eig: &EigenSystem, beta: f64, psi: &[Complex64]) -> f64 {
    let lmin = eig.min_eigenvalue();
    eig.eigenvectors
        .column_iter()
        .zip(eig.eigenvalues.iter())
        .map(|(v, &l)| {
            let c: Complex64 = v.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
            (-beta * (l - lmin)).exp() * c.norm_sqr()
        })
        .sum()
}

/// Scratch buffers for allocation-free evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    psi: Vec<Complex64>,
    site: Vec<Complex64>,
    phi: Vec<Complex64>,
    next: Vec<Complex64>,
    a_psi: Vec<Complex64>,
    op_psi: Vec<Complex64>,
    coeff: Vec<Complex64>,
}

impl Workspace {
    pub fn new(dim2: usize, dim: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Workspace {
            psi: vec![z; dim2],
            site: vec![z; 2 * dim],
            phi: vec![z; dim2],
            next: vec![z; dim2],
            a_psi: vec![z; dim2],
            op_psi: vec![z; dim2],
            coeff: vec![z; dim2],
        }
    }
}

/// G and the pieces needed for its derivative.
struct Expectation {
    /// ln of the Boltzmann-like weight, so that H_eff = -ln_weight/β (+ shifts below).
    energy: f64,
    /// dH_eff/dG, multiplied into the generator gradient of G.
    d_energy_d_g: f64,
    /// Coefficient of ∇H_cl in ∇H_eff (difference expansion only).
    classical_coeff: f64,
}

/// One effective-Hamiltonian variant at a fixed temperature.
#[derive(Debug, Clone)]
pub struct EffectiveFieldModel {
    kind: ModelKind,
    ctx: Arc<QuantumContext>,
    temperature: f64,
    beta: f64,
    gradient: GradientMethod,
    /// e^{-β(λ_k - λ_min)}
    eig_weights: Vec<f64>,
}

impl EffectiveFieldModel {
    pub fn new(kind: ModelKind, ctx: Arc<QuantumContext>, temperature: f64) -> Result<Self> {
        let beta = ctx.spec.constants.beta(temperature)?;
        if let Some(n) = kind.order() {
            if n < 1 {
                return Err(Error::invalid("series order must be at least 1"));
            }
        }
        if kind == ModelKind::EigenOverlap && !ctx.spec.field_along_z() {
            return Err(Error::invalid(
                "the eigen-overlap model requires the field along the quantisation (z) axis",
            ));
        }
        let lmin = ctx.eig.min_eigenvalue();
        let eig_weights = ctx.eig.eigenvalues.iter().map(|l| (-beta * (l - lmin)).exp()).collect();
        Ok(EffectiveFieldModel {
            kind,
            ctx,
            temperature,
            beta,
            gradient: GradientMethod::default(),
            eig_weights,
        })
    }

    /// Convenience constructor that builds and diagonalises the Hamiltonian.
    pub fn for_spec(kind: ModelKind, spec: &SpinSystemSpec, temperature: f64) -> Result<Self> {
        Self::new(kind, QuantumContext::new(spec)?, temperature)
    }

    pub fn with_gradient(mut self, gradient: GradientMethod) -> Self {
        self.gradient = gradient;
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn spec(&self) -> &SpinSystemSpec {
        &self.ctx.spec
    }

    pub fn context(&self) -> &Arc<QuantumContext> {
        &self.ctx
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn workspace(&self) -> Workspace {
        let d = self.ctx.spec.spin.dim();
        Workspace::new(d * d, d)
    }

    /// F[β,N] = Σ_{k=1..N} (-β)^k/k! ⟨H^k⟩.
    pub fn series_f(&self, config: &CoherentConfiguration) -> Result<f64> {
        let n = match self.kind {
            ModelKind::SeriesExact(n) | ModelKind::SeriesHighT(n) => n,
            other => return Err(Error::invalid(format!("series_f is undefined for model {other}"))),
        };
        let mut ws = self.workspace();
        self.load_state(config.n1.as_vec(), config.n2.as_vec(), &mut ws);
        Ok(self.taylor_moments(n, 0.0, &mut ws, false).0)
    }

    pub fn effective_hamiltonian(&self, config: &CoherentConfiguration) -> Result<f64> {
        let mut ws = self.workspace();
        self.energy_with(config.n1.as_vec(), config.n2.as_vec(), &mut ws)
    }

    pub fn effective_field(&self, config: &CoherentConfiguration) -> Result<FieldSample> {
        let mut ws = self.workspace();
        self.field_with(config, &mut ws)
    }

    /// H_eff in Joules, reusing `ws`.
    pub fn energy_with(&self, n1: &Vec3, n2: &Vec3, ws: &mut Workspace) -> Result<f64> {
        if self.kind == ModelKind::Classical {
            return Ok(classical_energy_vec(&self.ctx.spec, n1, n2));
        }
        self.load_state(n1, n2, ws);
        self.expectation(n1, n2, ws, false).map(|e| e.energy)
    }

    /// Effective fields −∇H_eff/μ_s for both sites, reusing `ws`.
    pub fn field_with(&self, config: &CoherentConfiguration, ws: &mut Workspace) -> Result<FieldSample> {
        let spec = &self.ctx.spec;
        let mu_s = spec.moment();
        let (n1, n2) = (config.n1.as_vec(), config.n2.as_vec());
        let (energy, grad) = match (self.kind, self.gradient) {
            (ModelKind::Classical, _) => (classical_energy_vec(spec, n1, n2), classical_gradient(spec, n1, n2)),
            (_, GradientMethod::Generator) => self.generator_gradient(n1, n2, ws)?,
            (_, GradientMethod::FiniteDifference { step }) => {
                let e = self.energy_with(n1, n2, ws)?;
                (e, self.fd_gradient(n1, n2, step, ws)?)
            }
        };
        Ok(FieldSample {
            b1: -grad[0] / mu_s,
            b2: -grad[1] / mu_s,
            energy,
        })
    }

    /// Tangential gradient by fourth-order central differences of `energy_with`.
    pub fn fd_gradient(&self, n1: &Vec3, n2: &Vec3, h: f64, ws: &mut Workspace) -> Result<[Vec3; 2]> {
        let mut grad = [Vec3::zeros(); 2];
        for site in 0..2 {
            for axis in 0..3 {
                let mut eval = |offset: f64| -> Result<f64> {
                    let mut pts = [*n1, *n2];
                    pts[site][axis] += offset;
                    pts[site] /= pts[site].norm();
                    self.energy_with(&pts[0], &pts[1], ws)
                };
                let (p1, m1, p2, m2) = (eval(h)?, eval(-h)?, eval(2.0 * h)?, eval(-2.0 * h)?);
                grad[site][axis] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            }
        }
        Ok(grad)
    }

    fn load_state(&self, n1: &Vec3, n2: &Vec3, ws: &mut Workspace) {
        product_state_into(self.ctx.spec.spin, n1, n2, &mut ws.site, &mut ws.psi);
    }

    fn domain_error(&self, n1: &Vec3, n2: &Vec3, what: &str, value: f64) -> Error {
        Error::domain(format!(
            "{} at T = {} K: {what} = {value:.6e} <= 0 for n1 = ({:.6}, {:.6}, {:.6}), n2 = ({:.6}, {:.6}, {:.6}); \
             raise the order or the temperature",
            self.kind, self.temperature, n1.x, n1.y, n1.z, n2.x, n2.y, n2.z
        ))
    }

    /// Accumulates φ_k = (-β/k)(H - shift) φ_{k-1}, φ_0 = ψ, k = 1..=n.
    /// Returns (Σ_{k≥1}⟨ψ|φ_k⟩, Σ_{k≥1}^{n-1}⟨ψ|φ_k⟩). With `want_apsi`,
    /// `ws.a_psi` receives Σ_{k=0..n} φ_k.
    fn taylor_moments(&self, n: u32, shift: f64, ws: &mut Workspace, want_apsi: bool) -> (f64, f64) {
        let Workspace {
            psi, phi, next, a_psi, ..
        } = ws;
        phi.copy_from_slice(psi);
        if want_apsi {
            a_psi.copy_from_slice(psi);
        }
        let mut total = 0.0;
        let mut below = 0.0;
        for k in 1..=n {
            self.ctx.sparse.apply_shifted(phi, shift, next);
            let f = -self.beta / k as f64;
            next.iter_mut().for_each(|v| *v *= f);
            std::mem::swap(phi, next);
            let m = inner(psi, phi).re;
            total += m;
            if k < n {
                below += m;
            }
            if want_apsi {
                a_psi.iter_mut().zip(phi.iter()).for_each(|(a, p)| *a += p);
            }
        }
        (total, below)
    }

    /// Evaluates H_eff and dH_eff/dG for the loaded state; fills `ws.a_psi` on request.
    fn expectation(&self, n1: &Vec3, n2: &Vec3, ws: &mut Workspace, want_apsi: bool) -> Result<Expectation> {
        let beta = self.beta;
        match self.kind {
            ModelKind::Classical => unreachable!("classical energies are evaluated directly"),
            ModelKind::EigenOverlap => {
                let eig = &self.ctx.eig;
                let dim = eig.dim();
                let mut g = 0.0;
                for k in 0..dim {
                    let col = eig.eigenvectors.column(k);
                    let c: Complex64 = col.iter().zip(ws.psi.iter()).map(|(a, b)| a.conj() * b).sum();
                    ws.coeff[k] = c * self.eig_weights[k];
                    g += self.eig_weights[k] * c.norm_sqr();
                }
                let lmin = eig.min_eigenvalue();
                let energy = if g > 1e-250 {
                    lmin - g.ln() / beta
                } else {
                    // Full log-sum-exp when every shifted weight underflows.
                    let logs: Vec<f64> = (0..dim)
                        .filter_map(|k| {
                            let col = eig.eigenvectors.column(k);
                            let c: Complex64 = col.iter().zip(ws.psi.iter()).map(|(a, b)| a.conj() * b).sum();
                            let p = c.norm_sqr();
                            (p > 0.0).then(|| p.ln() - beta * eig.eigenvalues[k])
                        })
                        .collect();
                    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if !m.is_finite() {
                        return Err(self.domain_error(n1, n2, "overlap sum", 0.0));
                    }
                    let lse = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
                    -lse / beta
                };
                if want_apsi {
                    if !(g > 0.0) {
                        return Err(self.domain_error(n1, n2, "shifted overlap sum", g));
                    }
                    for r in 0..dim {
                        let row = eig.eigenvectors.row(r);
                        ws.a_psi[r] = row.iter().zip(ws.coeff[..dim].iter()).map(|(v, c)| v * c).sum();
                    }
                }
                Ok(Expectation {
                    energy,
                    d_energy_d_g: -1.0 / (beta * g),
                    classical_coeff: 0.0,
                })
            }
            ModelKind::SeriesExact(n) => {
                let (f, _) = self.taylor_moments(n, 0.0, ws, want_apsi);
                if 1.0 + f <= 0.0 {
                    return Err(self.domain_error(n1, n2, "1 + F", 1.0 + f));
                }
                Ok(Expectation {
                    energy: -f.ln_1p() / beta,
                    d_energy_d_g: -1.0 / (beta * (1.0 + f)),
                    classical_coeff: 0.0,
                })
            }
            ModelKind::SeriesHighT(n) => {
                let (f, _) = self.taylor_moments(n, 0.0, ws, want_apsi);
                let mut log_series = 0.0;
                let mut derivative = 0.0;
                let mut pow = 1.0;
                for k in 1..=n {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    derivative += sign * pow;
                    pow *= f;
                    log_series += sign * pow / k as f64;
                }
                Ok(Expectation {
                    energy: -log_series / beta,
                    d_energy_d_g: -derivative / beta,
                    classical_coeff: 0.0,
                })
            }
            ModelKind::DifferenceExpansion(n) => {
                let hcl = classical_energy_vec(&self.ctx.spec, n1, n2);
                let (f, below) = self.taylor_moments(n, hcl, ws, want_apsi);
                let g = 1.0 + f;
                if g <= 0.0 {
                    return Err(self.domain_error(n1, n2, "difference series", g));
                }
                // ∂G/∂H_cl = β G_{N-1}
                let g_below = 1.0 + below;
                Ok(Expectation {
                    energy: hcl - f.ln_1p() / beta,
                    d_energy_d_g: -1.0 / (beta * g),
                    classical_coeff: 1.0 - g_below / g,
                })
            }
        }
    }

    fn generator_gradient(&self, n1: &Vec3, n2: &Vec3, ws: &mut Workspace) -> Result<(f64, [Vec3; 2])> {
        self.load_state(n1, n2, ws);
        let e = self.expectation(n1, n2, ws, true)?;
        let ladder = &self.ctx.ladder;
        let mut grad = [Vec3::zeros(); 2];
        let ns = [n1, n2];
        for (i, n) in ns.iter().enumerate() {
            let mut g = Vec3::zeros();
            for (a, kind) in [OpKind::X, OpKind::Y, OpKind::Z].into_iter().enumerate() {
                ladder.apply(i as u8 + 1, kind, &ws.psi, &mut ws.op_psi);
                g[a] = -2.0 * inner(&ws.op_psi, &ws.a_psi).im;
            }
            grad[i] = g.cross(n) * e.d_energy_d_g;
        }
        if e.classical_coeff != 0.0 {
            let cg = classical_gradient(&self.ctx.spec, n1, n2);
            for i in 0..2 {
                let n = ns[i];
                let tangential = cg[i] - *n * n.dot(&cg[i]);
                grad[i] += tangential * e.classical_coeff;
            }
        }
        Ok((e.energy, grad))
    }
}
