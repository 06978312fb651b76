//! Exact quantum reference: spin operators, the two-spin Hamiltonian, its
//! eigendecomposition and thermal expectation values.
//!
//! Operators are dimensionless (units of ħ). Single-site states are indexed by
//! `p = s - m`, `p = 0..=2s`, and two-site product states by `p1 * (2s+1) + p2`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, SparseMatrix};
use crate::system::{PhysicalConstants, Spin, SpinSystemSpec};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Single-site spin operators in units of ħ.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub spin: Spin,
    pub sx: DMatrix<Complex64>,
    pub sy: DMatrix<Complex64>,
    pub sz: DMatrix<Complex64>,
}

impl SpinMatrices {
    /// S+ = Sx + iSy.
    pub fn plus(&self) -> DMatrix<Complex64> {
        &self.sx + &self.sy * Complex64::i()
    }

    pub fn minus(&self) -> DMatrix<Complex64> {
        &self.sx - &self.sy * Complex64::i()
    }

    pub fn identity(&self) -> DMatrix<Complex64> {
        DMatrix::identity(self.spin.dim(), self.spin.dim())
    }
}

/// `<p-1| S+ |p>` = sqrt(p (2s - p + 1)).
#[inline]
pub fn raising_element(spin: Spin, p: usize) -> f64 {
    let p = p as f64;
    (p * (spin.twice() as f64 - p + 1.0)).sqrt()
}

pub fn build_spin_matrices(spin: Spin) -> SpinMatrices {
    let d = spin.dim();
    let s = spin.value();
    let mut plus = DMatrix::from_element(d, d, ZERO);
    let mut sz = DMatrix::from_element(d, d, ZERO);
    for p in 0..d {
        sz[(p, p)] = Complex64::new(s - p as f64, 0.0);
        if p > 0 {
            plus[(p - 1, p)] = Complex64::new(raising_element(spin, p), 0.0);
        }
    }
    let minus = plus.adjoint();
    let sx = (&plus + &minus) * Complex64::new(0.5, 0.0);
    let sy = (&plus - &minus) * Complex64::new(0.0, -0.5);
    SpinMatrices { spin, sx, sy, sz }
}

/// Dense two-spin Hamiltonian in Joules over the product basis.
#[derive(Debug, Clone)]
pub struct TwoSpinHamiltonian {
    pub spin: Spin,
    pub matrix: DMatrix<Complex64>,
}

impl TwoSpinHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|v| v.im == 0.0)
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.matrix, 0.0)
    }
}

/// H = -J (S¹·S²) - g μ_B B·(S¹ + S²), spin operators in units of ħ.
pub fn build_two_spin_hamiltonian(spec: &SpinSystemSpec) -> Result<TwoSpinHamiltonian> {
    spec.validate()?;
    let ops = build_spin_matrices(spec.spin);
    let id = ops.identity();
    let exchange = ops.sx.kronecker(&ops.sx) + ops.sy.kronecker(&ops.sy) + ops.sz.kronecker(&ops.sz);
    let b = spec.field;
    let b_dot_s = &ops.sx * Complex64::from(b.x) + &ops.sy * Complex64::from(b.y) + &ops.sz * Complex64::from(b.z);
    let zeeman = b_dot_s.kronecker(&id) + id.kronecker(&b_dot_s);
    let matrix = exchange * Complex64::from(-spec.exchange)
        + zeeman * Complex64::from(-spec.constants.g_mu_b());
    Ok(TwoSpinHamiltonian {
        spin: spec.spin,
        matrix,
    })
}

/// Eigenvalues ascending, eigenvectors as orthonormal columns in the product basis.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub spin: Spin,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// V Λ V†
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let lambda = DMatrix::from_diagonal(&self.eigenvalues.map(Complex64::from));
        &self.eigenvectors * lambda * self.eigenvectors.adjoint()
    }

    /// Normalised Boltzmann weights e^{-β(λ-λ_min)} / Σ.
    pub fn boltzmann_weights(&self, beta: f64) -> DVector<f64> {
        let lmin = self.min_eigenvalue();
        let mut w = self.eigenvalues.map(|l| (-beta * (l - lmin)).exp());
        let z = w.sum();
        w /= z;
        w
    }

    /// Writes `index,eigenvalue_J` to `values` and the eigenvectors (rows =
    /// product-basis index, columns = states) to `vectors`. Each eigenvector
    /// is phase-fixed so its largest component is real and positive; entries
    /// are written as `re` or `re+imi` when an imaginary part survives.
    pub fn write_csv(&self, values: &Path, vectors: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(values)?);
        writeln!(f, "index,eigenvalue_J")?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            writeln!(f, "{i},{}", fmt17(*l))?;
        }
        f.flush()?;

        let fixed = self.phase_fixed_vectors();
        let mut f = std::io::BufWriter::new(std::fs::File::create(vectors)?);
        let header: Vec<String> = (0..self.dim()).map(|k| format!("state_{k}")).collect();
        writeln!(f, "{}", header.join(","))?;
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|c| {
                    let v = fixed[(r, c)];
                    if v.im == 0.0 {
                        fmt17(v.re)
                    } else {
                        format!("{}{:+.16e}i", fmt17(v.re), v.im)
                    }
                })
                .collect();
            writeln!(f, "{}", row.join(","))?;
        }
        f.flush()?;
        Ok(())
    }

    fn phase_fixed_vectors(&self) -> DMatrix<Complex64> {
        let mut v = self.eigenvectors.clone();
        for mut col in v.column_iter_mut() {
            let pivot = col
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap_or(ZERO);
            if pivot.norm() > 0.0 {
                let phase = pivot.conj() / pivot.norm();
                col.iter_mut().for_each(|x| {
                    *x *= phase;
                    if x.im.abs() < 1e-15 {
                        x.im = 0.0;
                    }
                });
            }
        }
        v
    }
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn eigendecompose(h: &TwoSpinHamiltonian) -> Result<EigenSystem> {
    let defect = hermitian_defect(&h.matrix);
    if defect > 1e-10 {
        return Err(Error::invalid(format!(
            "Hamiltonian is not Hermitian (relative asymmetry {defect:.3e})"
        )));
    }
    let n = h.dim();
    let (values, vectors) = if h.is_real() {
        let real = h.matrix.map(|v| v.re);
        let real = (&real + real.transpose()) * 0.5;
        let eig = SymmetricEigen::new(real);
        (eig.eigenvalues, eig.eigenvectors.map(Complex64::from))
    } else {
        let herm = (&h.matrix + h.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(EigenSystem {
        spin: h.spin,
        eigenvalues,
        eigenvectors,
    })
}

/// ½(S_z¹ + S_z²) on product state `index`, in units of ħ.
#[inline]
pub fn mean_sz_of_basis_state(spin: Spin, index: usize) -> f64 {
    let d = spin.dim();
    let (p1, p2) = (index / d, index % d);
    spin.value() - 0.5 * (p1 + p2) as f64
}

/// ⟨½(S_z¹ + S_z²)⟩ at temperature `temperature` (K), in units of ħ.
pub fn thermal_expectation_sz(eig: &EigenSystem, temperature: f64, spec: &SpinSystemSpec) -> Result<f64> {
    let beta = spec.constants.beta(temperature)?;
    let w = eig.boltzmann_weights(beta);
    let mut acc = 0.0;
    for (k, col) in eig.eigenvectors.column_iter().enumerate() {
        if w[k] == 0.0 {
            continue;
        }
        let sz: f64 = col
            .iter()
            .enumerate()
            .map(|(i, c)| c.norm_sqr() * mean_sz_of_basis_state(eig.spin, i))
            .sum();
        acc += w[k] * sz;
    }
    Ok(acc)
}

/// Closed-form ⟨S_z⟩/ħ for two s=1/2 spins with the field along z.
pub fn closed_form_sz_half(temperature: f64, exchange: f64, bz: f64, constants: &PhysicalConstants) -> Result<f64> {
    let beta = constants.beta(temperature)?;
    let x = beta * constants.g_mu_b() * bz;
    let y = -beta * exchange;
    // Divide numerator and denominator by the largest exponential.
    let m = x.abs().max(y).max(0.0);
    let num = (x - m).exp() - (-x - m).exp();
    let den = (y - m).exp() + (-m).exp() + (-x - m).exp() + (x - m).exp();
    Ok(0.5 * num / den)
}

fn factorial(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn twice_of(x: f64, what: &str) -> Result<i64> {
    let t = 2.0 * x;
    if !t.is_finite() || (t - t.round()).abs() > 1e-9 {
        return Err(Error::invalid(format!("{what} = {x} is not a half-integer")));
    }
    Ok(t.round() as i64)
}

/// ⟨j1 m1; j2 m2 | j m⟩ in the Condon–Shortley convention (Racah's formula).
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> Result<f64> {
    let (tj1, tm1, tj2, tm2, tj, tm) = (
        twice_of(j1, "j1")?,
        twice_of(m1, "m1")?,
        twice_of(j2, "j2")?,
        twice_of(m2, "m2")?,
        twice_of(j, "S")?,
        twice_of(m, "M")?,
    );
    let bad = tj1 < 0
        || tj2 < 0
        || tm1.abs() > tj1
        || tm2.abs() > tj2
        || tm.abs() > tj
        || (tj1 + tm1) % 2 != 0
        || (tj2 + tm2) % 2 != 0
        || (tj + tm) % 2 != 0
        || tj < (tj1 - tj2).abs()
        || tj > tj1 + tj2
        || (tj1 + tj2 + tj) % 2 != 0;
    if bad {
        return Err(Error::invalid(format!(
            "quantum numbers out of range: <{j1} {m1}; {j2} {m2} | {j} {m}>"
        )));
    }
    if tm != tm1 + tm2 {
        return Ok(0.0);
    }
    // All following quantities are integers.
    let h = |t: i64| t / 2;
    let a = h(tj1 + tj2 - tj);
    let b = h(tj1 - tm1);
    let c = h(tj2 + tm2);
    let d = h(tj - tj2 + tm1);
    let e = h(tj - tj1 - tm2);
    let prefactor = ((tj + 1) as f64
        * factorial(h(tj + tj1 - tj2))
        * factorial(h(tj - tj1 + tj2))
        * factorial(a)
        / factorial(h(tj1 + tj2 + tj) + 1))
        .sqrt()
        * (factorial(h(tj + tm))
            * factorial(h(tj - tm))
            * factorial(b)
            * factorial(h(tj1 + tm1))
            * factorial(h(tj2 - tm2))
            * factorial(c))
        .sqrt();
    let kmin = 0.max(-d).max(-e);
    let kmax = a.min(b).min(c);
    let sum: f64 = (kmin..=kmax)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / (factorial(k)
                * factorial(a - k)
                * factorial(b - k)
                * factorial(c - k)
                * factorial(d + k)
                * factorial(e + k))
        })
        .sum();
    Ok(prefactor * sum)
}

/// Unitary whose rows are the coupled states |S,M⟩ expanded over the product
/// basis, ordered by S ascending then M ascending.
pub fn coupled_basis(spin: Spin) -> Result<(DMatrix<f64>, Vec<(f64, f64)>)> {
    let s = spin.value();
    let d = spin.dim();
    let mut labels = Vec::with_capacity(d * d);
    for ts in 0..=(2 * spin.twice() as i64) {
        if ts % 2 != 0 {
            continue;
        }
        let big_s = ts as f64 / 2.0;
        let mut tm = -ts;
        while tm <= ts {
            labels.push((big_s, tm as f64 / 2.0));
            tm += 2;
        }
    }
    let mut u = DMatrix::zeros(d * d, d * d);
    for (row, &(big_s, big_m)) in labels.iter().enumerate() {
        for p1 in 0..d {
            for p2 in 0..d {
                let m1 = s - p1 as f64;
                let m2 = s - p2 as f64;
                u[(row, p1 * d + p2)] = clebsch_gordan(s, m1, s, m2, big_s, big_m)?;
            }
        }
    }
    Ok((u, labels))
}
