//! Levenberg–Marquardt least squares.
//!
//! Each iteration solves (JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr. λ starts at zero (a
//! plain Gauss–Newton step), grows ×4 (from at least 1e-4) on a rejected
//! step and shrinks ×3 on an accepted one, snapping back to zero below 1e-9.
//! The Jacobian is taken by central differences with step 6.06e-6·max(|x|, 1),
//! so parameters should be scaled to order one by the caller.
//!
//! Stops when the relative step is below `xtol`, the relative cost decrease
//! of an accepted step is below `ftol`, or after `max_iter` iterations
//! (result flagged as not converged).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iter: usize,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        LsqOptions {
            max_iter: 200,
            xtol: 1e-10,
            ftol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub sigma: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// √(Σ r²) at the solution.
    pub residual_norm: f64,
    pub n_points: usize,
    pub n_iterations: usize,
    pub converged: bool,
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// (value, 1σ) of a named parameter.
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.index(name).map(|i| (self.params[i], self.sigma[i]))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
            .0
    }

    /// Maps parameter `i` through x ↦ factor·x + offset, carrying the
    /// covariance along.
    pub fn rescale(&mut self, i: usize, factor: f64, offset: f64) {
        self.params[i] = self.params[i] * factor + offset;
        let n = self.params.len();
        for k in 0..n {
            self.covariance[(i, k)] *= factor;
            self.covariance[(k, i)] *= factor;
        }
        self.sigma[i] = self.covariance[(i, i)].max(0.0).sqrt();
    }

    pub fn rename(&mut self, i: usize, name: &str) {
        self.names[i] = name.to_string();
    }

    /// Reduced chi-square style residual variance, RSS/(n − p).
    pub fn residual_variance(&self) -> f64 {
        let dof = self.n_points.saturating_sub(self.params.len());
        if dof == 0 {
            0.0
        } else {
            self.residual_norm.powi(2) / dof as f64
        }
    }
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn jacobian<F>(f: &mut F, x: &[f64], m: usize, jac: &mut DMatrix<f64>) -> Result<()>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for j in 0..x.len() {
        let h = 6.055e-6 * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        f(&xp, &mut rp);
        xp[j] = x[j] - h;
        f(&xp, &mut rm);
        xp[j] = x[j];
        for i in 0..m {
            let d = (rp[i] - rm[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(Error::Fit(format!("non-finite derivative for parameter {j}")));
            }
            jac[(i, j)] = d;
        }
    }
    Ok(())
}

fn describe_direction(names: &[String], v: &[f64]) -> String {
    let mut parts: Vec<(f64, &str)> = v
        .iter()
        .zip(names)
        .filter(|(c, _)| c.abs() > 0.05)
        .map(|(c, n)| (*c, n.as_str()))
        .collect();
    parts.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    parts
        .iter()
        .map(|(c, n)| format!("{c:+.3}·{n}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Covariance (JᵀJ)⁻¹ with rank checking on the column-normalized matrix.
fn inverse_normal(a: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let s: Vec<f64> = (0..n).map(|j| a[(j, j)].sqrt()).collect();
    if let Some(j) = s.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::RankDeficient(format!(
            "residuals do not depend on {}",
            names[j]
        )));
    }
    let c = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (s[i] * s[j]));
    let eig = SymmetricEigen::new(c.clone());
    let (kmin, &emin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    let emax = eig.eigenvalues.max();
    if !(emin > 1e-13 * emax) {
        let v: Vec<f64> = eig.eigenvectors.column(kmin).iter().cloned().collect();
        return Err(Error::RankDeficient(format!(
            "unidentifiable direction {}",
            describe_direction(names, &v)
        )));
    }
    let inv = c
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::RankDeficient("normal matrix not positive definite".into()))?;
    Ok(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (s[i] * s[j])))
}

/// Minimizes ½Σ r(x)² from `init`. `f` writes `m` residuals.
pub fn least_squares<F>(
    names: &[&str],
    init: &[f64],
    m: usize,
    mut f: F,
    opts: &LsqOptions,
) -> Result<FitResult>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let p = init.len();
    assert_eq!(names.len(), p, "one name per parameter");
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    if m < p {
        return Err(Error::RankDeficient(format!(
            "{m} residuals for {p} parameters"
        )));
    }
    let mut x = init.to_vec();
    let mut r = vec![0.0; m];
    f(&x, &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("residuals not finite at the initial point".into()));
    }
    let mut c = cost(&r);
    let mut jac = DMatrix::zeros(m, p);
    let mut lambda = 0.0f64;
    let mut converged = false;
    let mut iters = 0;
    let mut flags = Vec::new();
    let mut x_new = vec![0.0; p];
    let mut r_new = vec![0.0; m];

    'outer: while iters < opts.max_iter {
        iters += 1;
        jacobian(&mut f, &x, m, &mut jac)?;
        let a = jac.transpose() * &jac;
        let rv = DVector::from_column_slice(&r);
        let grad = jac.transpose() * rv;
        let dmax = (0..p).map(|j| a[(j, j)]).fold(0.0, f64::max);
        if !(dmax > 0.0) {
            break;
        }
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for _ in 0..60 {
            let mut lhs = a.clone();
            for j in 0..p {
                lhs[(j, j)] += lambda * a[(j, j)].max(1e-12 * dmax);
            }
            let step = lhs.cholesky().map(|ch| ch.solve(&(-&grad)));
            let Some(delta) = step else {
                lambda = (lambda * 4.0).max(1e-4);
                continue;
            };
            let dnorm = delta.norm();
            for j in 0..p {
                x_new[j] = x[j] + delta[j];
            }
            f(&x_new, &mut r_new);
            let c_new = if r_new.iter().all(|v| v.is_finite()) {
                cost(&r_new)
            } else {
                f64::INFINITY
            };
            let small_step = dnorm <= opts.xtol * (xnorm + opts.xtol);
            if c_new < c {
                let rel = (c - c_new) / c;
                x.copy_from_slice(&x_new);
                r.copy_from_slice(&r_new);
                c = c_new;
                lambda = if lambda < 1e-9 { 0.0 } else { lambda / 3.0 };
                if small_step || rel < opts.ftol || c == 0.0 {
                    converged = true;
                    break 'outer;
                }
                continue 'outer;
            }
            if small_step {
                converged = true;
                break 'outer;
            }
            lambda = (lambda * 4.0).max(1e-4);
        }
        flags.push("damping exhausted without a descent step".to_string());
        break;
    }
    if !converged && iters >= opts.max_iter {
        flags.push(format!("max_iter {} reached", opts.max_iter));
    }

    jacobian(&mut f, &x, m, &mut jac)?;
    let a = jac.transpose() * &jac;
    let inv = inverse_normal(&a, &names)?;
    let rss = 2.0 * c;
    let dof = m - p;
    let scale = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let mut cov = inv * scale;
    cov = (&cov + cov.transpose()) * 0.5;
    let sigma = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        names,
        params: x,
        sigma,
        covariance: cov,
        residual_norm: rss.sqrt(),
        n_points: m,
        n_iterations: iters,
        converged,
        flags,
    })
}
