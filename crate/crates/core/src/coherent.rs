//! Spin coherent states of two sites: stereographic/Bloch geometry, product
//! state amplitudes and their moments.
//!
//! Amplitudes are always built in the normalised half-angle form
//! `sqrt(C(2s,p)) cos^{2s-p}(θ/2) sin^p(θ/2) e^{ipφ}`, which is finite on the whole
//! sphere. The (1+|z|²)^{-s} prefactor of the z-plane form is never evaluated.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::quantum::raising_element;
use crate::system::{Spin, Vec3};

/// Largest spin accepted by the brute-force moment routines.
pub const MAX_BRUTE_SPIN_TWICE: u32 = 10;
/// Longest operator product accepted by [`brute_moment`].
pub const MAX_PRODUCT_LEN: usize = 6;
/// Distance from the south pole below which no finite stereographic coordinate is returned.
pub const POLE_EPS: f64 = 1e-12;

/// Unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(Vec3);

impl BlochVector {
    /// Normalises `v`; fails for a zero or non-finite vector.
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("Bloch vector must be non-zero and finite"));
        }
        Ok(BlochVector(v / n))
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        BlochVector(Vec3::new(st * cp, st * sp, ct))
    }

    pub fn north() -> Self {
        BlochVector(Vec3::new(0.0, 0.0, 1.0))
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_vec(self) -> Vec3 {
        self.0
    }

    /// Used by the integrator after it has renormalised the vector itself.
    pub(crate) fn from_unit_unchecked(v: Vec3) -> Self {
        BlochVector(v)
    }
}

/// z = tan(θ/2) e^{iφ}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoCoordinate(pub Complex64);

impl StereoCoordinate {
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        StereoCoordinate(Complex64::from_polar((0.5 * theta).tan(), phi))
    }
}

pub fn stereo_to_bloch(z: StereoCoordinate) -> BlochVector {
    let z = z.0;
    let r2 = z.norm_sqr();
    let d = 1.0 + r2;
    BlochVector(Vec3::new(2.0 * z.re / d, 2.0 * z.im / d, (1.0 - r2) / d))
}

pub fn bloch_to_stereo(n: BlochVector) -> Result<StereoCoordinate> {
    let v = n.0;
    if v.z <= -1.0 + POLE_EPS {
        return Err(Error::PoleSingularity { n_z: v.z });
    }
    Ok(StereoCoordinate(Complex64::new(v.x, v.y) / (1.0 + v.z)))
}

/// The classical state of both sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentConfiguration {
    pub n1: BlochVector,
    pub n2: BlochVector,
}

impl CoherentConfiguration {
    pub fn new(n1: BlochVector, n2: BlochVector) -> Self {
        CoherentConfiguration { n1, n2 }
    }

    pub fn swapped(&self) -> Self {
        CoherentConfiguration {
            n1: self.n2,
            n2: self.n1,
        }
    }

    pub fn site(&self, site: usize) -> &BlochVector {
        match site {
            0 => &self.n1,
            _ => &self.n2,
        }
    }
}

/// Per-site amplitudes ⟨p|n⟩ written into `out` (length 2s+1).
pub fn site_amplitudes_into(spin: Spin, n: &Vec3, out: &mut [Complex64]) {
    let d = spin.dim();
    debug_assert_eq!(out.len(), d);
    let nz = n.z.clamp(-1.0, 1.0);
    let mut c = (0.5 * (1.0 + nz)).sqrt();
    let mut s = (0.5 * (1.0 - nz)).sqrt();
    let h = c.hypot(s);
    c /= h;
    s /= h;
    let rho = n.x.hypot(n.y);
    let phase = if rho > 0.0 {
        Complex64::new(n.x / rho, n.y / rho)
    } else {
        Complex64::new(1.0, 0.0)
    };
    let twice = spin.twice() as usize;
    // c^{2s-p} from the top down, (s e^{iφ})^p from the bottom up.
    let mut cpow = vec![1.0; d];
    for p in (0..twice).rev() {
        cpow[p] = cpow[p + 1] * c;
    }
    let step = phase * s;
    let mut acc = Complex64::new(1.0, 0.0);
    let mut binom = 1.0_f64;
    for p in 0..d {
        out[p] = acc * (cpow[p] * binom.sqrt());
        acc *= step;
        binom = binom * (twice - p) as f64 / (p + 1) as f64;
    }
}

pub fn site_amplitudes(spin: Spin, n: &BlochVector) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); spin.dim()];
    site_amplitudes_into(spin, n.as_vec(), &mut out);
    out
}

/// Product coherent state |z¹z²⟩ over the two-site basis (p1, p2), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentStateVector {
    pub spin: Spin,
    pub amplitudes: Vec<Complex64>,
}

impl CoherentStateVector {
    pub fn norm_sqr(&self) -> f64 {
        crate::linalg::norm_sqr(&self.amplitudes)
    }
}

/// Writes the outer product of the two site states into `out` (length d²),
/// using `scratch` (length 2d) for the site amplitudes.
pub fn product_state_into(spin: Spin, n1: &Vec3, n2: &Vec3, scratch: &mut [Complex64], out: &mut [Complex64]) {
    let d = spin.dim();
    let (a, b) = scratch.split_at_mut(d);
    site_amplitudes_into(spin, n1, a);
    site_amplitudes_into(spin, n2, &mut b[..d]);
    for p1 in 0..d {
        for p2 in 0..d {
            out[p1 * d + p2] = a[p1] * b[p2];
        }
    }
}

pub fn coherent_state_vector(spin: Spin, config: &CoherentConfiguration) -> CoherentStateVector {
    let d = spin.dim();
    let mut scratch = vec![Complex64::new(0.0, 0.0); 2 * d];
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); d * d];
    product_state_into(spin, config.n1.as_vec(), config.n2.as_vec(), &mut scratch, &mut amplitudes);
    CoherentStateVector { spin, amplitudes }
}

/// Single-site operator label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Plus,
    Minus,
    Z,
    X,
    Y,
}

/// Operator acting on site 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteOp {
    pub site: u8,
    pub kind: OpKind,
}

impl SiteOp {
    pub fn new(site: u8, kind: OpKind) -> Self {
        SiteOp { site, kind }
    }
}

/// Precomputed ladder matrix elements for applying single-site operators to
/// two-site vectors.
#[derive(Debug, Clone)]
pub struct Ladder {
    spin: Spin,
    /// raise[p] = ⟨p-1|S+|p⟩, raise[0] = 0
    raise: Vec<f64>,
}

impl Ladder {
    pub fn new(spin: Spin) -> Self {
        let raise = (0..spin.dim()).map(|p| raising_element(spin, p)).collect();
        Ladder { spin, raise }
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    /// out = op(site) · x over the two-site basis. `site` is 1 or 2.
    pub fn apply(&self, site: u8, kind: OpKind, x: &[Complex64], out: &mut [Complex64]) {
        let d = self.spin.dim();
        let s = self.spin.value();
        let zero = Complex64::new(0.0, 0.0);
        out.iter_mut().for_each(|v| *v = zero);
        let (plus_w, minus_w) = match kind {
            OpKind::Plus => (Complex64::new(1.0, 0.0), zero),
            OpKind::Minus => (zero, Complex64::new(1.0, 0.0)),
            OpKind::X => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
            OpKind::Y => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
            OpKind::Z => (zero, zero),
        };
        for p1 in 0..d {
            for p2 in 0..d {
                let idx = p1 * d + p2;
                let v = x[idx];
                let p = if site == 1 { p1 } else { p2 };
                let stride = if site == 1 { d } else { 1 };
                if kind == OpKind::Z {
                    out[idx] = v * (s - p as f64);
                    continue;
                }
                // S+ |p> = raise[p] |p-1>,  S- |p> = raise[p+1] |p+1>
                if p > 0 && plus_w != zero {
                    out[idx - stride] += plus_w * v * self.raise[p];
                }
                if p + 1 < d && minus_w != zero {
                    out[idx + stride] += minus_w * v * self.raise[p + 1];
                }
            }
        }
    }
}

/// ⟨z¹z²| A₁ A₂ … A_k |z¹z²⟩ by dense application (rightmost operator first), units of ħ^k.
pub fn brute_moment(ops: &[SiteOp], spin: Spin, config: &CoherentConfiguration) -> Result<Complex64> {
    if ops.is_empty() {
        return Err(Error::invalid("operator product must not be empty"));
    }
    if ops.len() > MAX_PRODUCT_LEN {
        return Err(Error::invalid(format!(
            "operator products are limited to {MAX_PRODUCT_LEN} factors"
        )));
    }
    if spin.twice() > MAX_BRUTE_SPIN_TWICE {
        return Err(Error::invalid(format!("spin {spin} exceeds the brute-force cap of 5")));
    }
    if let Some(op) = ops.iter().find(|o| o.site != 1 && o.site != 2) {
        return Err(Error::invalid(format!("site index {} is not 1 or 2", op.site)));
    }
    let ladder = Ladder::new(spin);
    let psi = coherent_state_vector(spin, config).amplitudes;
    let mut cur = psi.clone();
    let mut next = vec![Complex64::new(0.0, 0.0); psi.len()];
    for op in ops.iter().rev() {
        ladder.apply(op.site, op.kind, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(inner(&psi, &cur))
}

/// Single-site moments with closed forms in the coherent-state basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentKind {
    Sz,
    SzSz,
    PlusPlus,
    MinusMinus,
    PlusMinus,
    MinusSz,
    PlusSz,
    SzSzSz,
    PlusMinusSz,
    MinusMinusSz,
    PlusPlusSz,
    PlusSzSz,
    MinusSzSz,
    PlusPlusMinus,
    PlusMinusMinus,
    PlusPow(u32),
    MinusPow(u32),
}

impl MomentKind {
    /// Every fixed-length kind, plus S±^N for N = 1..=4.
    pub fn catalogue() -> Vec<MomentKind> {
        use MomentKind::*;
        let mut v = vec![
            Sz,
            SzSz,
            PlusPlus,
            MinusMinus,
            PlusMinus,
            MinusSz,
            PlusSz,
            SzSzSz,
            PlusMinusSz,
            MinusMinusSz,
            PlusPlusSz,
            PlusSzSz,
            MinusSzSz,
            PlusPlusMinus,
            PlusMinusMinus,
        ];
        for n in 1..=4 {
            v.push(PlusPow(n));
            v.push(MinusPow(n));
        }
        v
    }

    /// Operator string in product order (leftmost first).
    pub fn operators(&self) -> Vec<OpKind> {
        use MomentKind::*;
        use OpKind::{Minus as M, Plus as P, Z};
        match *self {
            Sz => vec![Z],
            SzSz => vec![Z, Z],
            PlusPlus => vec![P, P],
            MinusMinus => vec![M, M],
            PlusMinus => vec![P, M],
            MinusSz => vec![M, Z],
            PlusSz => vec![P, Z],
            SzSzSz => vec![Z, Z, Z],
            PlusMinusSz => vec![P, M, Z],
            MinusMinusSz => vec![M, M, Z],
            PlusPlusSz => vec![P, P, Z],
            PlusSzSz => vec![P, Z, Z],
            MinusSzSz => vec![M, Z, Z],
            PlusPlusMinus => vec![P, P, M],
            PlusMinusMinus => vec![P, M, M],
            PlusPow(n) => vec![P; n as usize],
            MinusPow(n) => vec![M; n as usize],
        }
    }
}

impl fmt::Display for MomentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentKind::PlusPow(n) => write!(f, "S+^{n}"),
            MomentKind::MinusPow(n) => write!(f, "S-^{n}"),
            other => {
                let s: String = other
                    .operators()
                    .iter()
                    .map(|o| match o {
                        OpKind::Plus => "S+",
                        OpKind::Minus => "S-",
                        _ => "Sz",
                    })
                    .collect();
                f.write_str(&s)
            }
        }
    }
}

impl FromStr for MomentKind {
    type Err = Error;

    /// Accepts the `Display` form, e.g. `S+S-Sz` or `S-^3`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("S+^").or_else(|| s.strip_prefix("S-^")) {
            let n: u32 = rest
                .parse()
                .map_err(|_| Error::invalid(format!("unknown moment kind '{s}'")))?;
            if n == 0 {
                return Err(Error::invalid("moment power must be at least 1"));
            }
            return Ok(if s.starts_with("S+") {
                MomentKind::PlusPow(n)
            } else {
                MomentKind::MinusPow(n)
            });
        }
        MomentKind::catalogue()
            .into_iter()
            .filter(|k| !matches!(k, MomentKind::PlusPow(_) | MomentKind::MinusPow(_)))
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown moment kind '{s}'")))
    }
}

fn falling_factorial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|v| v as f64).product()
}

/// Closed-form single-site moment ⟨z|…|z⟩ in units of ħ^k.
pub fn analytic_moment(kind: MomentKind, spin: Spin, z: StereoCoordinate) -> Result<Complex64> {
    use MomentKind::*;
    let s = spin.value();
    let z = z.0;
    let zb = z.conj();
    let r = z.norm_sqr();
    let d = 1.0 + r;
    let d2 = d * d;
    let d3 = d2 * d;
    let c = |x: f64| Complex64::new(x, 0.0);
    let v = match kind {
        Sz => c(s * (1.0 - r) / d),
        SzSz => c(s * s * (((1.0 - r) / d).powi(2) + 2.0 / s * r / d2)),
        PlusPlus => z * z * (s * s * (4.0 - 2.0 / s) / d2),
        MinusMinus => zb * zb * (s * s * (4.0 - 2.0 / s) / d2),
        PlusMinus => c(s * s * (2.0 * r + 1.0 / s) * 2.0 / d2),
        MinusSz => zb * (s * s * (1.0 - r + r / s) * 2.0 / d2),
        PlusSz => z * (s * s * (1.0 - r - 1.0 / s) * 2.0 / d2),
        SzSzSz => c(-s * (r - 1.0) * (s * s * (r * r + 1.0) - 2.0 * ((s - 3.0) * s + 1.0) * r) / d3),
        PlusMinusSz => c(2.0 * s * (-2.0 * (s - 1.0) * s * r * r + (s * (2.0 * s - 3.0) + 2.0) * r + s) / d3),
        MinusMinusSz => zb * zb * (-2.0 * s * (2.0 * s - 1.0) * ((s - 2.0) * r - s) / d3),
        PlusPlusSz => z * z * (-2.0 * s * (2.0 * s - 1.0) * (s * r - s + 2.0) / d3),
        PlusSzSz => z * (2.0 * s * (s * s * r * r + (-2.0 * (s - 2.0) * s - 1.0) * r + (s - 1.0).powi(2)) / d3),
        MinusSzSz => zb * (2.0 * s * ((s - 1.0).powi(2) * r * r + (-2.0 * (s - 2.0) * s - 1.0) * r + s * s) / d3),
        PlusPlusMinus => z * (4.0 * s * (2.0 * s - 1.0) * (s * r + 1.0) / d3),
        PlusMinusMinus => zb * (4.0 * s * (2.0 * s - 1.0) * (s * r + 1.0) / d3),
        PlusPow(n) | MinusPow(n) => {
            if n == 0 {
                return Err(Error::invalid("moment power must be at least 1"));
            }
            let base = if matches!(kind, PlusPow(_)) { z } else { zb };
            base.powu(n) * (falling_factorial(spin.twice(), n) / d.powi(n as i32))
        }
    };
    Ok(v)
}
