use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::stokes::Scheme;

/// Exact inverse of the Hessian of a nearby quadratic problem in which the
/// state weight at each node is replaced by its diagonal in the modal basis.
///
/// The modal recursion `a_{n+1} = c_n a_n + dt d_n E_w^T g_n` (implicit
/// Euler) or with `g` averaged over both nodes (Crank-Nicolson) is written
/// as `z_{n+1} = c_n z_n + diag(b_n) E_w^T u_n` in the shifted state
/// `z_n = a_n - diag(f_n) E_w^T u_n`; the stage costs then carry a
/// state-control cross term. The backward Riccati sweep is done once, each
/// application costs one backward and one forward sweep.
pub(crate) struct RiccatiPreconditioner {
    e_omega: DMatrix<f64>,
    /// State transition per stage with an input; empty for the last stage
    /// of Crank-Nicolson, which only carries the terminal cost.
    c: Vec<DVector<f64>>,
    b: Vec<DVector<f64>>,
    /// `C_n P_{n+1} B_n + N_n` per stage.
    gain: Vec<DMatrix<f64>>,
    /// Factor of the stage Hessian in the control.
    schur: Vec<Cholesky<f64, Dyn>>,
}

/// Modal problem data handed to [`RiccatiPreconditioner::new`].
pub(crate) struct ModalLq<'a> {
    pub scheme: Scheme,
    pub dt: f64,
    pub e_omega: &'a DMatrix<f64>,
    pub modes: &'a DMatrix<f64>,
    /// `(c_n, d_n)` per step.
    pub coefficients: &'a [(DVector<f64>, DVector<f64>)],
    /// Per-face state weights, one column per node.
    pub state: &'a DMatrix<f64>,
    /// Per-control-face weights, one column per node.
    pub control: &'a DMatrix<f64>,
    /// Weight of `|a_T|^2`.
    pub terminal: f64,
}

fn row_scaled(diag: &DVector<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= diag[k];
    }
    out
}

impl RiccatiPreconditioner {
    pub fn new(lq: &ModalLq) -> Result<Self> {
        let nt = lq.coefficients.len();
        let nm = lq.modes.ncols();
        let e_t = lq.e_omega.transpose();
        let sq = lq.modes.map(|x| x * x);
        let modal_weight = |n: usize| {
            let mut w = sq.tr_mul(&lq.state.column(n));
            if n == nt {
                w.add_scalar_mut(lq.terminal);
            }
            w
        };
        let coef = |n: usize| &lq.coefficients[n];
        let (stages, mut p) = match lq.scheme {
            Scheme::ImplicitEuler => (nt, DMatrix::from_diagonal(&(modal_weight(nt) * 2.0))),
            Scheme::CrankNicolson => (nt + 1, DMatrix::zeros(nm, nm)),
        };
        let mut c_all = Vec::with_capacity(stages);
        let mut b_all = Vec::with_capacity(stages);
        let mut gain = Vec::with_capacity(stages);
        let mut schur = Vec::with_capacity(stages);
        for n in (0..stages).rev() {
            let w = modal_weight(n);
            // input and shift coefficients of this stage
            let (b, f) = match lq.scheme {
                Scheme::ImplicitEuler => (Some(&coef(n).1 * lq.dt), None),
                Scheme::CrankNicolson => {
                    let b = (n < nt).then(|| {
                        if n == 0 {
                            &coef(0).1 * (0.5 * lq.dt)
                        } else {
                            (coef(n).0.component_mul(&coef(n - 1).1) + &coef(n).1) * (0.5 * lq.dt)
                        }
                    });
                    (b, (n > 0).then(|| &coef(n - 1).1 * (0.5 * lq.dt)))
                }
            };
            let mut s = DMatrix::from_diagonal(&(lq.control.column(n) * 2.0));
            let mut m = DMatrix::zeros(nm, e_t.ncols());
            if let Some(b) = &b {
                let bm = row_scaled(b, &e_t);
                let g = &p * &bm;
                s += bm.tr_mul(&g);
                m += row_scaled(&coef(n).0, &g);
            }
            if let Some(f) = &f {
                let cross = row_scaled(&(w.component_mul(f) * 2.0), &e_t);
                s += row_scaled(f, &e_t).tr_mul(&cross);
                m += cross;
            }
            let s = (&s + s.transpose()) * 0.5;
            let chol = Cholesky::new(s).ok_or_else(|| Error::NoConvergence {
                solver: "riccati preconditioner",
                iterations: stages - n,
                residual: f64::NAN,
            })?;
            if n > 0 {
                let mut next = if b.is_some() {
                    let c = &coef(n).0;
                    let mut cpc = p.clone();
                    for j in 0..nm {
                        for i in 0..nm {
                            cpc[(i, j)] *= c[i] * c[j];
                        }
                    }
                    cpc
                } else {
                    DMatrix::zeros(nm, nm)
                };
                next -= &m * chol.solve(&m.transpose());
                next = (&next + next.transpose()) * 0.5;
                for k in 0..nm {
                    next[(k, k)] += 2.0 * w[k];
                }
                p = next;
            }
            c_all.push(if b.is_some() { coef(n).0.clone() } else { DVector::zeros(0) });
            b_all.push(b.unwrap_or_else(|| DVector::zeros(0)));
            gain.push(m);
            schur.push(chol);
        }
        c_all.reverse();
        b_all.reverse();
        gain.reverse();
        schur.reverse();
        Ok(Self { e_omega: lq.e_omega.clone(), c: c_all, b: b_all, gain, schur })
    }

    /// Solves `H~ x = r`; columns of `r` beyond the last stage are ignored
    /// and returned as zero.
    pub fn apply(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let stages = self.schur.len();
        let nm = self.gain.first().map_or(0, |g| g.nrows());
        let mut feed = Vec::with_capacity(stages);
        let mut p = DVector::zeros(nm);
        for n in (0..stages).rev() {
            let has_input = !self.b[n].is_empty();
            let mut rhs = r.column(n).clone_owned();
            if has_input {
                rhs -= &self.e_omega * p.component_mul(&self.b[n]);
            }
            let k = self.schur[n].solve(&rhs);
            let next = &self.gain[n] * &k;
            p = if has_input { next + p.component_mul(&self.c[n]) } else { next };
            feed.push(k);
        }
        feed.reverse();
        let mut out = DMatrix::zeros(r.nrows(), r.ncols());
        let mut z = DVector::zeros(nm);
        for n in 0..stages {
            let u = &feed[n] - self.schur[n].solve(&self.gain[n].tr_mul(&z));
            if !self.b[n].is_empty() {
                z = z.component_mul(&self.c[n]) + self.e_omega.tr_mul(&u).component_mul(&self.b[n]);
            }
            out.set_column(n, &u);
        }
        out
    }
}
