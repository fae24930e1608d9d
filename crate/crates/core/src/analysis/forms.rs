//! Differential forms on a flat phase space given by evaluation maps.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::diff;
use crate::dynamics::{PhaseFunction, VectorField};
use crate::error::{Error, Result};

type FormFn = Arc<dyn Fn(&[f64], &[DVector<f64>]) -> Result<f64> + Send + Sync>;

/// A k-form α: (x, v₁, …, v_k) ↦ α_x(v₁, …, v_k), multilinear and alternating.
#[derive(Clone)]
pub struct SampledKForm {
    pub name: String,
    degree: usize,
    dim: usize,
    eval: FormFn,
}

impl core::fmt::Debug for SampledKForm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SampledKForm").field("name", &self.name).field("degree", &self.degree).finish()
    }
}

fn permutation_sign(perm: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// All k-subsets of 0..n in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

impl SampledKForm {
    pub fn new(
        name: impl Into<String>,
        degree: usize,
        dim: usize,
        eval: impl Fn(&[f64], &[DVector<f64>]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), degree, dim, eval: Arc::new(eval) }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64], vectors: &[DVector<f64>]) -> Result<f64> {
        if vectors.len() != self.degree {
            return Err(Error::Dimension { expected: self.degree, got: vectors.len() });
        }
        if self.degree > self.dim {
            return Ok(0.0);
        }
        (self.eval)(x, vectors)
    }

    /// A function viewed as a 0-form.
    pub fn scalar(name: impl Into<String>, dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(name, 0, dim, move |x, _| Ok(f(x)))
    }

    /// ω = Σ dqⁱ ∧ dpᵢ on a phase space of dimension 2n.
    pub fn symplectic(n: usize) -> Self {
        Self::new("omega", 2, 2 * n, move |_, v| {
            let (a, b) = (&v[0], &v[1]);
            Ok((0..n).map(|i| a[i] * b[n + i] - a[n + i] * b[i]).sum())
        })
    }

    /// f · dx¹ ∧ … ∧ dx^d.
    pub fn volume(dim: usize, density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new("volume", dim, dim, move |x, v| {
            let m = DMatrix::from_columns(v);
            Ok(density(x) * m.determinant())
        })
    }

    /// df for a function on phase space, by central differences.
    pub fn exact(name: impl Into<String>, dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(name, 1, dim, move |x, v| Ok(diff::gradient(&f, x, diff::DEFAULT_STEP).dot(&v[0])))
    }

    /// dH for a phase function, from its partial gradients.
    pub fn exact_phase(name: impl Into<String>, h: Arc<dyn PhaseFunction>) -> Self {
        let n = h.dof();
        Self::new(name, 1, 2 * n, move |x, v| {
            let (q, p) = x.split_at(n);
            Ok(h.grad_q(q, p).dot(&v[0].rows(0, n)) + h.grad_p(q, p).dot(&v[0].rows(n, n)))
        })
    }

    /// α ∧ β.
    pub fn wedge(&self, other: &SampledKForm) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (k, l) = (a.degree, b.degree);
        let shuffles: Vec<(Vec<usize>, Vec<usize>, f64)> = subsets(k + l, k)
            .into_iter()
            .map(|first| {
                let rest: Vec<usize> = (0..k + l).filter(|i| !first.contains(i)).collect();
                let perm: Vec<usize> = first.iter().chain(rest.iter()).copied().collect();
                let sign = permutation_sign(&perm);
                (first, rest, sign)
            })
            .collect();
        let name = format!("{}^{}", a.name, b.name);
        Self::new(name, k + l, a.dim, move |x, v| {
            let mut acc = 0.0;
            for (first, rest, sign) in &shuffles {
                let va: Vec<DVector<f64>> = first.iter().map(|&i| v[i].clone()).collect();
                let vb: Vec<DVector<f64>> = rest.iter().map(|&i| v[i].clone()).collect();
                acc += sign * a.eval(x, &va)? * b.eval(x, &vb)?;
            }
            Ok(acc)
        })
    }

    /// i_X α.
    pub fn interior(&self, field: Arc<dyn VectorField>) -> Self {
        let a = self.clone();
        let name = format!("i_X{}", a.name);
        Self::new(name, a.degree.saturating_sub(1), a.dim, move |x, v| {
            if a.degree == 0 {
                return Ok(0.0);
            }
            let mut args = Vec::with_capacity(a.degree);
            args.push(field.eval(x)?);
            args.extend(v.iter().cloned());
            a.eval(x, &args)
        })
    }

    /// dα, treating the arguments as constant vector fields in the chart.
    pub fn exterior_derivative(&self) -> Self {
        let a = self.clone();
        let name = format!("d{}", a.name);
        Self::new(name, a.degree + 1, a.dim, move |x, v| {
            let mut acc = 0.0;
            for i in 0..v.len() {
                let rest: Vec<DVector<f64>> = v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w.clone()).collect();
                let along = |s: f64| {
                    let probe: Vec<f64> = x.iter().zip(v[i].iter()).map(|(a, b)| a + s * b).collect();
                    a.eval(&probe, &rest).unwrap_or(f64::NAN)
                };
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * diff::derivative(along, diff::DEFAULT_STEP);
            }
            Ok(acc)
        })
    }

    /// Largest |α(…, vᵢ, …, vⱼ, …) + α(…, vⱼ, …, vᵢ, …)| over argument swaps.
    pub fn check_alternating(&self, x: &[f64], vectors: &[DVector<f64>]) -> Result<f64> {
        let base = self.eval(x, vectors)?;
        let mut worst: f64 = 0.0;
        for i in 0..vectors.len() {
            for j in i + 1..vectors.len() {
                let mut swapped = vectors.to_vec();
                swapped.swap(i, j);
                worst = worst.max((self.eval(x, &swapped)? + base).abs());
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ClosureField;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn symplectic_pairs_positions_with_momenta() {
        let w = SampledKForm::symplectic(1);
        assert_eq!(w.eval(&[0.0, 0.0], &[dv(&[1.0, 0.0]), dv(&[0.0, 1.0])]).unwrap(), 1.0);
        assert_eq!(w.check_alternating(&[0.0, 0.0], &[dv(&[1.0, 2.0]), dv(&[-3.0, 1.0])]).unwrap(), 0.0);
    }

    #[test]
    fn wedge_of_omega_is_twice_the_volume() {
        // ω∧ω = 2 dq¹∧dp₁∧dq²∧dp₂ = −2 dq¹∧dq²∧dp₁∧dp₂
        let w = SampledKForm::symplectic(2);
        let ww = w.wedge(&w);
        let e = |i: usize| DVector::from_fn(4, |k, _| if k == i { 1.0 } else { 0.0 });
        let val = ww.eval(&[0.0; 4], &[e(0), e(1), e(2), e(3)]).unwrap();
        assert_relative_eq!(val, -2.0, epsilon = 1e-14);
        let basis = [dv(&[1.0, 0.3, 0.0, 2.0]), dv(&[0.2, 1.0, -1.0, 0.0]), dv(&[0.0, 0.5, 1.0, 0.1]), dv(&[1.0, 1.0, 1.0, -1.0])];
        assert!(ww.check_alternating(&[0.0; 4], &basis).unwrap() < 1e-12);
    }

    #[test]
    fn interior_of_omega_is_dh() {
        let h = |x: &[f64]| 0.5 * (x[1] * x[1] + x[0] * x[0]);
        let field: Arc<dyn VectorField> = Arc::new(ClosureField::new(2, |x| dv(&[x[1], -x[0]])));
        let ixw = SampledKForm::symplectic(1).interior(field);
        let dh = SampledKForm::exact("dH", 2, h);
        let x = [0.4, -0.7];
        let v = dv(&[0.3, 1.2]);
        assert_relative_eq!(ixw.eval(&x, core::slice::from_ref(&v)).unwrap(), dh.eval(&x, &[v]).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn exterior_derivative_of_exact_and_closed_forms() {
        let df = SampledKForm::exact("df", 2, |x| x[0] * x[0] * x[1]);
        let ddf = df.exterior_derivative();
        assert!(ddf.eval(&[0.3, 0.2], &[dv(&[1.0, 0.0]), dv(&[0.0, 1.0])]).unwrap().abs() < 1e-6);
        // d(x dy) = dx∧dy
        let xdy = SampledKForm::new("xdy", 1, 2, |x, v| Ok(x[0] * v[0][1]));
        let d = xdy.exterior_derivative();
        assert_relative_eq!(d.eval(&[0.5, 0.5], &[dv(&[1.0, 0.0]), dv(&[0.0, 1.0])]).unwrap(), 1.0, epsilon = 1e-9);
        assert!(SampledKForm::symplectic(1).exterior_derivative().eval(&[0.0, 0.0], &[dv(&[1.0, 0.0]), dv(&[0.0, 1.0]), dv(&[1.0, 1.0])]).is_ok());
    }

    #[test]
    fn volume_and_scalar() {
        let vol = SampledKForm::volume(2, |x| 2.0 + x[0]);
        assert_relative_eq!(vol.eval(&[1.0, 0.0], &[dv(&[1.0, 0.0]), dv(&[0.0, 2.0])]).unwrap(), 6.0);
        let f = SampledKForm::scalar("f", 2, |x| x[1]);
        assert_eq!(f.eval(&[0.0, 3.0], &[]).unwrap(), 3.0);
        assert!(f.eval(&[0.0, 3.0], &[dv(&[1.0, 0.0])]).is_err());
    }
}
