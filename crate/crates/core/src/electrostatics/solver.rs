//! Assembly and conjugate-gradient solve of the conductance network.

use super::grid::{for_each_edge_impl, Grid};
use super::PotentialField;
use crate::error::{Error, Result};

/// Relative residual target of the CG solve.
const CG_TOL: f64 = 1e-10;
/// Iteration cap; hitting it is an error, never a silent return.
const CG_MAX_ITER: usize = 100_000;

struct Csr {
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k] as usize];
            }
            *yr = acc;
        }
    }
}

fn assemble(grid: &Grid) -> (Vec<usize>, Vec<i64>, Csr, Vec<f64>, Vec<f64>) {
    let n = grid.nx() * grid.ny();
    let mut free = Vec::new();
    let mut pos = vec![-1i64; n];
    for (node, bc) in grid.bc.iter().enumerate() {
        if bc.is_none() {
            pos[node] = free.len() as i64;
            free.push(node);
        }
    }
    let nf = free.len();
    let mut diag = vec![0.0; nf];
    let mut rhs = vec![0.0; nf];
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();

    grid.for_each_edge(|a, b, g| {
        let (fa, fb) = (pos[a], pos[b]);
        if fa >= 0 {
            diag[fa as usize] += g;
        }
        if fb >= 0 {
            diag[fb as usize] += g;
        }
        match (fa >= 0, fb >= 0) {
            (true, true) => {
                triplets.push((fa as u32, fb as u32, -g));
                triplets.push((fb as u32, fa as u32, -g));
            }
            (true, false) => rhs[fa as usize] += g * grid.bc[b].unwrap(),
            (false, true) => rhs[fb as usize] += g * grid.bc[a].unwrap(),
            (false, false) => {}
        }
    });

    triplets.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
    let mut row_ptr = vec![0usize; nf + 1];
    let mut col = Vec::with_capacity(triplets.len() + nf);
    let mut val = Vec::with_capacity(triplets.len() + nf);
    let mut k = 0;
    for r in 0..nf as u32 {
        // merge duplicates (periodic wrap can route two edges to one pair)
        while k < triplets.len() && triplets[k].0 == r {
            let c = triplets[k].1;
            let mut v = triplets[k].2;
            k += 1;
            while k < triplets.len() && triplets[k].0 == r && triplets[k].1 == c {
                v += triplets[k].2;
                k += 1;
            }
            col.push(c);
            val.push(v);
        }
        // diagonal last in each row is fine for matvec
        col.push(r);
        val.push(diag[r as usize]);
        row_ptr[r as usize + 1] = col.len();
    }

    (free, pos, Csr { row_ptr, col, val }, diag, rhs)
}

/// Jacobi-preconditioned CG. Deterministic: fixed iteration order, no
/// parallel reductions.
fn pcg(a: &Csr, diag: &[f64], b: &[f64]) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let inv_d: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    for it in 1..=CG_MAX_ITER {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_r <= CG_TOL * norm_b {
            return Ok((x, it, norm_r / norm_b));
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(Error::SolverDiverged {
        iterations: CG_MAX_ITER,
        residual: norm_r / norm_b,
    })
}

pub(crate) fn solve_on_grid(grid: Grid) -> Result<PotentialField> {
    let (free, _pos, a, diag, rhs) = assemble(&grid);
    let (xf, iterations, residual) = pcg(&a, &diag, &rhs)?;

    let mut phi: Vec<f64> = grid
        .bc
        .iter()
        .map(|bc| bc.unwrap_or(0.0))
        .collect();
    for (k, &node) in free.iter().enumerate() {
        phi[node] = xf[k];
    }

    Ok(PotentialField {
        xs: grid.xs,
        ys: grid.ys,
        period: grid.period,
        plate_gap: grid.plate_gap,
        phi,
        eps_row: grid.eps_row,
        residual_norm: residual,
        iterations,
    })
}

/// Quadratic form of the conductance network over the solved potentials:
/// sum over edges of g (phi_a - phi_b)^2 = integral eps_r |grad phi|^2 dA
/// in the P1 sense.
pub(crate) fn edge_energy(field: &PotentialField) -> f64 {
    let nx = field.nx();
    let ny = field.ny();
    let mut hx = Vec::with_capacity(nx);
    for i in 0..nx - 1 {
        hx.push(field.xs[i + 1] - field.xs[i]);
    }
    hx.push(field.period - field.xs[nx - 1]);
    let dy: Vec<f64> = field.ys.windows(2).map(|w| w[1] - w[0]).collect();

    let mut energy = 0.0;
    for_each_edge_impl(nx, ny, &hx, &dy, &field.eps_row, &mut |a, b, g| {
        let d = field.phi[a] - field.phi[b];
        energy += g * d * d;
    });
    energy
}
