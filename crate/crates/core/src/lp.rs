//! Primal-dual interior-point method for banded linear programs
//! `min cᵀx  s.t.  Gx ≤ h`.

use crate::error::{Error, Result};

/// Sparse constraint row.
#[derive(Clone, Debug)]
struct Row {
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// Inequality-form LP whose normal matrix `GᵀDG` is banded.
#[derive(Clone, Debug)]
pub struct BandedLp {
    nvar: usize,
    c: Vec<f64>,
    rows: Vec<Row>,
    h: Vec<f64>,
}

/// Active-set growth rounds in the polish.
const POLISH_ROUNDS: usize = 6;

#[derive(Clone, Copy, Debug)]
pub struct IpmOptions {
    pub feasibility_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions { feasibility_tol: 1e-9, gap_tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct IpmSolution {
    pub x: Vec<f64>,
    /// Multipliers of the rows, in insertion order.
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl BandedLp {
    pub fn new(nvar: usize) -> Self {
        BandedLp { nvar, c: vec![0.0; nvar], rows: Vec::new(), h: Vec::new() }
    }

    pub fn set_cost(&mut self, var: usize, value: f64) {
        self.c[var] = value;
    }

    /// Add `Σ coef·x[var] ≤ rhs`; the row is rescaled to unit max coefficient.
    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let scale = terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        self.rows.push(Row {
            idx: terms.iter().map(|t| t.0).collect(),
            val: terms.iter().map(|t| t.1 / scale).collect(),
        });
        self.h.push(rhs / scale);
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .map(|r| {
                let lo = r.idx.iter().min().copied().unwrap_or(0);
                let hi = r.idx.iter().max().copied().unwrap_or(0);
                hi - lo
            })
            .max()
            .unwrap_or(0)
    }

    fn g_times(&self, x: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = r.idx.iter().zip(&r.val).map(|(&i, v)| v * x[i]).sum();
        }
    }

    fn gt_times(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, yi) in self.rows.iter().zip(y) {
            for (&i, v) in r.idx.iter().zip(&r.val) {
                out[i] += v * yi;
            }
        }
    }

    /// Solve with Mehrotra's predictor-corrector scheme from an infeasible start.
    pub fn solve(&self, opts: &IpmOptions) -> Result<IpmSolution> {
        let n = self.nvar;
        let m = self.rows.len();
        let bw = self.bandwidth();
        let cscale = self.c.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        let c: Vec<f64> = self.c.iter().map(|v| v / cscale).collect();
        let h = &self.h;
        let hnorm = 1.0 + h.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let cnorm = 1.0 + c.iter().map(|v| v.abs()).fold(0.0, f64::max);

        let mut x = vec![0.0; n];
        let mut s: Vec<f64> = h.iter().map(|v| v.abs().max(1.0)).collect();
        let mut z = vec![1.0; m];

        let mut gx = vec![0.0; m];
        let mut gtz = vec![0.0; n];
        let mut rp = vec![0.0; m];
        let mut rd = vec![0.0; n];
        let mut chol = BandCholesky::new(n, bw);
        let mut iterations = 0;

        let mut history: Vec<f64> = Vec::new();
        let (pres, dres, gap) = loop {
            self.g_times(&x, &mut gx);
            self.gt_times(&z, &mut gtz);
            for i in 0..m {
                rp[i] = gx[i] + s[i] - h[i];
            }
            for j in 0..n {
                rd[j] = gtz[j] + c[j];
            }
            let pobj: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            let dobj: f64 = -h.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
            let pres = rp.iter().map(|v| v.abs()).fold(0.0, f64::max) / hnorm;
            let dres = rd.iter().map(|v| v.abs()).fold(0.0, f64::max) / cnorm;
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
            if pres <= opts.feasibility_tol && dres <= opts.feasibility_tol && gap <= opts.gap_tol {
                break (pres, dres, gap);
            }
            // Normal equations lose dual accuracy once z/s spans many decades; the
            // primal iterate is then settled and the active-set polish below finishes it.
            let comp = s.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / (1.0 + pobj.abs());
            history.push(pobj);
            let settled = history.len() >= 4 && {
                let tail = &history[history.len() - 4..];
                let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - tail.iter().cloned().fold(f64::INFINITY, f64::min);
                spread <= opts.gap_tol * (1.0 + pobj.abs())
            };
            if pres <= opts.feasibility_tol && comp <= opts.gap_tol && settled {
                break (pres, dres, gap);
            }
            if iterations >= opts.max_iter {
                return Err(Error::Solver { iterations, residual: pres.max(dres).max(gap) });
            }
            iterations += 1;

            let d: Vec<f64> = z.iter().zip(&s).map(|(zi, si)| zi / si).collect();
            chol.assemble(&self.rows, &d);
            chol.factor();

            let mu = s.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / m as f64;
            let rsz_aff: Vec<f64> = s.iter().zip(&z).map(|(a, b)| a * b).collect();
            let (_, dsa, dza) = self.direction(&chol, &rp, &rd, &rsz_aff, &s, &z);
            let ap = max_step(&s, &dsa);
            let ad = max_step(&z, &dza);
            let mu_aff = (0..m).map(|i| (s[i] + ap * dsa[i]) * (z[i] + ad * dza[i])).sum::<f64>() / m as f64;
            let sigma = (mu_aff / mu).powi(3).min(1.0);
            let rsz: Vec<f64> = (0..m).map(|i| s[i] * z[i] + dsa[i] * dza[i] - sigma * mu).collect();
            let (dx, ds, dz) = self.direction(&chol, &rp, &rd, &rsz, &s, &z);
            let tau = (1.0 - mu).clamp(0.9, 0.995);
            let ap = (tau * max_step(&s, &ds)).min(1.0);
            let ad = (tau * max_step(&z, &dz)).min(1.0);
            for j in 0..n {
                x[j] += ap * dx[j];
            }
            for i in 0..m {
                s[i] += ap * ds[i];
                z[i] += ad * dz[i];
            }
        };
        // Keep the best vertex over several activity thresholds.
        let obj = |v: &[f64]| -> f64 { self.c.iter().zip(v).map(|(a, b)| a * b).sum() };
        let mut best: Option<Vec<f64>> = None;
        for ratio in [1e4, 1e2, 1e6, 1.0] {
            let active: Vec<bool> = s.iter().zip(&z).map(|(si, zi)| *zi > ratio * si).collect();
            if let Some(px) = self.polish(&x, &active, bw) {
                if best.as_ref().map_or(true, |b| obj(&px) < obj(b)) {
                    best = Some(px);
                }
            }
        }
        if let Some(b) = best {
            x = b;
        }
        let objective = self.c.iter().zip(&x).map(|(a, b)| a * b).sum();
        let z = z.iter().map(|v| v * cscale).collect();
        Ok(IpmSolution { x, z, objective, iterations, primal_residual: pres, dual_residual: dres, gap })
    }

    /// Project `x0` onto the affine set of the active rows (proximal least squares)
    /// and keep the result if it stays feasible without losing objective. Rows the
    /// projection violates join the active set and the projection is repeated.
    fn polish(&self, x0: &[f64], active: &[bool], bw: usize) -> Option<Vec<f64>> {
        let mut active = active.to_vec();
        let mut gx = vec![0.0; self.rows.len()];
        for _ in 0..POLISH_ROUNDS {
            let x = self.project(x0, &active, bw);
            self.g_times(&x, &mut gx);
            let mut grew = false;
            for (i, (g, h)) in gx.iter().zip(&self.h).enumerate() {
                if g - h > 1e-10 && !active[i] {
                    active[i] = true;
                    grew = true;
                }
            }
            let viol = gx.iter().zip(&self.h).map(|(g, h)| g - h).fold(f64::NEG_INFINITY, f64::max);
            if viol <= 1e-10 {
                let obj = |v: &[f64]| -> f64 { self.c.iter().zip(v).map(|(a, b)| a * b).sum() };
                let scale = 1.0 + obj(x0).abs() + self.c.iter().map(|c| c.abs()).sum::<f64>();
                return (obj(&x) <= obj(x0) + 1e-10 * scale).then_some(x);
            }
            if !grew {
                return None;
            }
        }
        None
    }

    fn project(&self, x0: &[f64], active: &[bool], bw: usize) -> Vec<f64> {
        let n = self.nvar;
        let eps = 1e-8;
        let ones: Vec<f64> = active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        let mut chol = BandCholesky::new(n, bw);
        chol.assemble(&self.rows, &ones);
        for i in 0..n {
            *chol.at(i, i) += eps;
        }
        chol.factor();
        let mut x = x0.to_vec();
        let mut rhs = vec![0.0; n];
        let hact: Vec<f64> = self.h.iter().zip(active).map(|(h, &a)| if a { *h } else { 0.0 }).collect();
        self.gt_times(&hact, &mut rhs);
        for _ in 0..30 {
            let b: Vec<f64> = rhs.iter().zip(&x).map(|(r, xi)| r + eps * xi).collect();
            let next = chol.solve(b);
            let step = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = next;
            if step < 1e-15 {
                break;
            }
        }
        x
    }

    fn direction(
        &self,
        chol: &BandCholesky,
        rp: &[f64],
        rd: &[f64],
        rsz: &[f64],
        s: &[f64],
        z: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = s.len();
        let t: Vec<f64> = (0..m).map(|i| (rsz[i] - z[i] * rp[i]) / s[i]).collect();
        let mut rhs = vec![0.0; self.nvar];
        self.gt_times(&t, &mut rhs);
        for (r, d) in rhs.iter_mut().zip(rd) {
            *r -= d;
        }
        let mut dx = chol.solve(rhs.clone());
        let mut gdx = vec![0.0; m];
        let mut back = vec![0.0; self.nvar];
        for _ in 0..2 {
            self.g_times(&dx, &mut gdx);
            let dg: Vec<f64> = (0..m).map(|i| z[i] / s[i] * gdx[i]).collect();
            self.gt_times(&dg, &mut back);
            let res: Vec<f64> = rhs.iter().zip(&back).map(|(a, b)| a - b).collect();
            let corr = chol.solve(res);
            dx.iter_mut().zip(&corr).for_each(|(a, b)| *a += b);
        }
        self.g_times(&dx, &mut gdx);
        let ds: Vec<f64> = (0..m).map(|i| -rp[i] - gdx[i]).collect();
        let dz: Vec<f64> = (0..m).map(|i| -(rsz[i] + z[i] * ds[i]) / s[i]).collect();
        (dx, ds, dz)
    }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter().zip(dv).filter(|(_, d)| **d < 0.0).map(|(a, d)| -a / d).fold(1.0, f64::min)
}

/// Lower band of a symmetric matrix and its Cholesky factor.
struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    fn new(n: usize, bw: usize) -> Self {
        BandCholesky { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.band[i * (self.bw + 1) + (i - j)]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.band[i * (self.bw + 1) + (i - j)]
    }

    fn assemble(&mut self, rows: &[Row], d: &[f64]) {
        self.band.iter_mut().for_each(|v| *v = 0.0);
        for (r, &di) in rows.iter().zip(d) {
            for (a, &ia) in r.idx.iter().enumerate() {
                for (b, &ib) in r.idx.iter().enumerate() {
                    if ia >= ib {
                        *self.at(ia, ib) += di * r.val[a] * r.val[b];
                    }
                }
            }
        }
    }

    fn factor(&mut self) {
        let bw = self.bw;
        for i in 0..self.n {
            let diag = self.get(i, i);
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut sum = self.get(i, j);
                for k in k0..j {
                    sum -= self.get(i, k) * self.get(j, k);
                }
                if i == j {
                    // Pivots lost to cancellation belong to directions fixed by active constraints.
                    *self.at(i, i) = if sum > 1e-30 * diag && sum > 0.0 { sum.sqrt() } else { 1e64 };
                } else {
                    let djj = self.get(j, j);
                    *self.at(i, j) = sum / djj;
                }
            }
        }
    }

    fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let bw = self.bw;
        for i in 0..self.n {
            let mut sum = b[i];
            for k in i.saturating_sub(bw)..i {
                sum -= self.get(i, k) * b[k];
            }
            b[i] = sum / self.get(i, i);
        }
        for i in (0..self.n).rev() {
            let mut sum = b[i];
            for k in (i + 1)..(i + bw + 1).min(self.n) {
                sum -= self.get(k, i) * b[k];
            }
            b[i] = sum / self.get(i, i);
        }
        b
    }
}
