//! Jacobi-preconditioned COCG for the Crank–Nicolson system `(I + iτH) x = b`.
//!
//! H is real and self-adjoint in a weighted inner product, so `w∘H` is
//! symmetric and the system scaled by the weights is complex symmetric.

use num_complex::Complex64;

use crate::operators::Csr;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Bilinear (unconjugated) product.
#[inline]
fn bdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Work buffers reused across time steps.
pub(crate) struct ShiftedSolver {
    inv_diag: Vec<Complex64>,
    weight: Option<Vec<f64>>,
    tau: f64,
    wb: Vec<Complex64>,
    r: Vec<Complex64>,
    z: Vec<Complex64>,
    p: Vec<Complex64>,
    q: Vec<Complex64>,
}

impl ShiftedSolver {
    pub fn new(h: &Csr, tau: f64, weight: Option<&[f64]>) -> Self {
        let n = h.dim();
        let weight = weight.map(<[f64]>::to_vec);
        let inv_diag = h
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let w = weight.as_ref().map_or(1.0, |w| w[i]);
                (w * Complex64::new(1.0, tau * d)).inv()
            })
            .collect();
        Self {
            inv_diag,
            weight,
            tau,
            wb: vec![ZERO; n],
            r: vec![ZERO; n],
            z: vec![ZERO; n],
            p: vec![ZERO; n],
            q: vec![ZERO; n],
        }
    }

    /// y = w∘(I + iτH) x
    fn apply(h: &Csr, tau: f64, weight: Option<&[f64]>, x: &[Complex64], y: &mut [Complex64]) {
        h.apply_complex(x, y);
        let it = Complex64::new(0.0, tau);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi + it * *yi;
        }
        if let Some(w) = weight {
            y.iter_mut().zip(w).for_each(|(yi, wi)| *yi *= wi);
        }
    }

    /// Solves in place; `x` holds the initial guess on entry. Convergence is
    /// `‖b − Ax‖ ≤ tol·reference`.
    pub fn solve(
        &mut self,
        h: &Csr,
        b: &[Complex64],
        x: &mut [Complex64],
        tol: f64,
        reference: f64,
        max_iters: usize,
    ) -> SolveStats {
        let tau = self.tau;
        let weight = self.weight.as_deref();
        let target = tol * reference;
        match weight {
            Some(w) => {
                for ((o, bi), wi) in self.wb.iter_mut().zip(b).zip(w) {
                    *o = bi * wi;
                }
            }
            None => self.wb.copy_from_slice(b),
        }
        Self::apply(h, tau, weight, x, &mut self.q);
        for ((r, bi), qi) in self.r.iter_mut().zip(&self.wb).zip(&self.q) {
            *r = bi - qi;
        }
        let mut res = norm2(&self.r);
        if res <= target {
            return SolveStats {
                iterations: 0,
                residual: res / reference.max(f64::MIN_POSITIVE),
                converged: true,
            };
        }
        for ((z, r), d) in self.z.iter_mut().zip(&self.r).zip(&self.inv_diag) {
            *z = r * d;
        }
        self.p.copy_from_slice(&self.z);
        let mut rho = bdot(&self.r, &self.z);
        for it in 1..=max_iters {
            Self::apply(h, tau, weight, &self.p, &mut self.q);
            let mu = bdot(&self.p, &self.q);
            if mu.norm() == 0.0 || rho.norm() == 0.0 {
                break;
            }
            let alpha = rho / mu;
            for ((xi, pi), (ri, qi)) in x.iter_mut().zip(&self.p).zip(self.r.iter_mut().zip(&self.q)) {
                *xi += alpha * pi;
                *ri -= alpha * qi;
            }
            res = norm2(&self.r);
            if res <= target {
                return SolveStats {
                    iterations: it,
                    residual: res / reference,
                    converged: true,
                };
            }
            for ((z, r), d) in self.z.iter_mut().zip(&self.r).zip(&self.inv_diag) {
                *z = r * d;
            }
            let rho_new = bdot(&self.r, &self.z);
            let beta = rho_new / rho;
            rho = rho_new;
            for (pi, zi) in self.p.iter_mut().zip(&self.z) {
                *pi = zi + beta * *pi;
            }
        }
        SolveStats {
            iterations: max_iters,
            residual: res / reference.max(f64::MIN_POSITIVE),
            converged: false,
        }
    }
}
