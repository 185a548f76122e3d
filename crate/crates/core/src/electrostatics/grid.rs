//! Banded tensor-product grid for the capacitor cross-section.
//!
//! Vertical bands: wire layer [-t, 0], vacuum [0, x_m], membrane
//! [x_m, x_m + h], vacuum [x_m + h, D]. Band edges are grid lines, so every
//! cell has a single material and no permittivity averaging across the
//! dielectric interface is ever approximate. The vacuum bands carry an
//! x_m-independent cell count: as the membrane slides, cells stretch
//! smoothly instead of being re-counted, which keeps the discretization
//! error a smooth function of x_m (the capacitance derivative would
//! otherwise inherit re-meshing jitter).

use super::CapacitorGeometry;

pub(crate) struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Cell widths; hx[nx-1] is the wrap cell from xs[nx-1] to period.
    pub hx: Vec<f64>,
    pub dy: Vec<f64>,
    /// Relative permittivity per cell row.
    pub eps_row: Vec<f64>,
    pub period: f64,
    pub plate_gap: f64,
    /// Dirichlet value per node (row-major), None = free.
    pub bc: Vec<Option<f64>>,
}

/// Cells per plate gap at mesh_level 1.
const BASE_CELLS_PER_GAP: u32 = 40;

fn cells_for(len: f64, target: f64, min: usize) -> usize {
    ((len / target - 1e-9).ceil().max(1.0) as usize).max(min)
}

/// Uniform subdivision, endpoints exact.
fn fill_band(out: &mut Vec<f64>, lo: f64, hi: f64, n: usize) {
    for k in 1..=n {
        let s = k as f64 / n as f64;
        out.push(lo + s * (hi - lo));
    }
    // pin the band edge against accumulated rounding
    *out.last_mut().unwrap() = hi;
}

impl Grid {
    pub fn build(geom: &CapacitorGeometry, mesh_level: u32, lateral_offset: f64) -> Grid {
        let d_gap = geom.plate_gap;
        let p = geom.period();
        let target = d_gap / (BASE_CELLS_PER_GAP as f64 * mesh_level as f64);
        let gap_cells = (BASE_CELLS_PER_GAP * mesh_level) as usize;

        // vertical lines
        let mut ys = vec![-geom.wire_thickness];
        fill_band(
            &mut ys,
            -geom.wire_thickness,
            0.0,
            cells_for(geom.wire_thickness, target, 2),
        );
        if geom.x_m > 0.0 {
            fill_band(&mut ys, 0.0, geom.x_m, gap_cells);
        }
        let mem_top = geom.x_m + geom.membrane_thickness;
        let mem_cells = cells_for(geom.membrane_thickness, target, 4);
        fill_band(&mut ys, geom.x_m, mem_top, mem_cells);
        fill_band(&mut ys, mem_top, d_gap, gap_cells);

        // membrane row range by construction: rows [mem_lo, mem_lo + mem_cells)
        let mem_lo = ys.iter().position(|&y| y == geom.x_m).expect("band edge");

        // lateral lines: segments between wire edges (wrapped)
        let tol = 1e-12 * p;
        let off = lateral_offset.rem_euclid(p);
        let e1 = off;
        let e2 = (off + geom.wire_width) % p;
        let mut bps = vec![0.0, e1, e2, p];
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup_by(|a, b| (*a - *b).abs() <= tol);
        if (bps.last().unwrap() - p).abs() > tol {
            bps.push(p);
        }
        let mut xs = Vec::new();
        for w in bps.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let n = cells_for(hi - lo, target, 2);
            xs.push(lo);
            for k in 1..n {
                xs.push(lo + (hi - lo) * k as f64 / n as f64);
            }
        }

        let nx = xs.len();
        let ny = ys.len();
        let mut hx = Vec::with_capacity(nx);
        for i in 0..nx - 1 {
            hx.push(xs[i + 1] - xs[i]);
        }
        hx.push(p - xs[nx - 1]);
        let dy: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();

        let mut eps_row = vec![1.0; ny - 1];
        for row in eps_row.iter_mut().skip(mem_lo).take(mem_cells) {
            *row = geom.eps_membrane;
        }

        // boundary conditions: plate at 1, wire nodes at 0
        let wire_x = |x: f64| -> bool {
            let xr = (x - off).rem_euclid(p);
            xr <= geom.wire_width + tol || xr >= p - tol
        };
        let ytol = 1e-12 * d_gap;
        let mut bc = vec![None; nx * ny];
        for i in 0..nx {
            bc[(ny - 1) * nx + i] = Some(1.0);
        }
        for (j, &y) in ys.iter().enumerate() {
            if y <= ytol {
                for (i, &x) in xs.iter().enumerate() {
                    if wire_x(x) {
                        bc[j * nx + i] = Some(0.0);
                    }
                }
            }
        }

        Grid {
            xs,
            ys,
            hx,
            dy,
            eps_row,
            period: p,
            plate_gap: d_gap,
            bc,
        }
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    /// Applies `f(a, b, g)` to every edge of the conductance network:
    /// box-integration weights equivalent to P1 elements on the tensor grid.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        let nx = self.nx();
        let ny = self.ny();
        for_each_edge_impl(
            nx,
            ny,
            &self.hx,
            &self.dy,
            &self.eps_row,
            &mut |a, b, g| f(a, b, g),
        );
    }
}

pub(crate) fn for_each_edge_impl(
    nx: usize,
    ny: usize,
    hx: &[f64],
    dy: &[f64],
    eps_row: &[f64],
    f: &mut dyn FnMut(usize, usize, f64),
) {
    // horizontal edges, half-cell flux tubes above and below
    for j in 0..ny {
        let below = if j > 0 { eps_row[j - 1] * dy[j - 1] } else { 0.0 };
        let above = if j < ny - 1 { eps_row[j] * dy[j] } else { 0.0 };
        let num = 0.5 * (below + above);
        for i in 0..nx {
            let i2 = (i + 1) % nx;
            f(j * nx + i, j * nx + i2, num / hx[i]);
        }
    }
    // vertical edges, half-cell flux tubes left and right
    for j in 0..ny - 1 {
        for i in 0..nx {
            let il = (i + nx - 1) % nx;
            let g = eps_row[j] * 0.5 * (hx[il] + hx[i]) / dy[j];
            f(j * nx + i, (j + 1) * nx + i, g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> CapacitorGeometry {
        let d = 2e-6;
        CapacitorGeometry {
            plate_gap: d,
            wire_width: d / 4.0,
            wire_gap: 3.0 * d / 4.0,
            wire_thickness: d / 4.0,
            membrane_thickness: d / 20.0,
            eps_membrane: 7.6,
            x_m: 0.2 * d,
        }
    }

    #[test]
    fn band_edges_are_grid_lines() {
        let g = geom();
        let grid = Grid::build(&g, 1, 0.0);
        for target in [-g.wire_thickness, 0.0, g.x_m, g.x_m + g.membrane_thickness, g.plate_gap] {
            assert!(
                grid.ys.iter().any(|&y| y == target),
                "missing grid line at {target:e}"
            );
        }
        for target in [0.0, g.wire_width] {
            assert!(grid.xs.iter().any(|&x| x == target));
        }
    }

    #[test]
    fn membrane_spans_at_least_four_cells() {
        // h = D/20 at level 1 would be 2 cells at the target spacing
        let grid = Grid::build(&geom(), 1, 0.0);
        let n_mem = grid.eps_row.iter().filter(|&&e| e > 1.0).count();
        assert!(n_mem >= 4, "membrane rows {n_mem}");
    }

    #[test]
    fn gap_band_counts_do_not_depend_on_x_m() {
        let a = Grid::build(&geom().with_x_m(0.11e-6), 2, 0.0);
        let b = Grid::build(&geom().with_x_m(0.97e-6), 2, 0.0);
        assert_eq!(a.ny(), b.ny());
        assert_eq!(a.nx(), b.nx());
    }

    #[test]
    fn wire_nodes_clamped_to_zero_plate_to_one() {
        let g = geom();
        let grid = Grid::build(&g, 1, 0.0);
        let nx = grid.nx();
        let ny = grid.ny();
        let mut zeros = 0;
        for j in 0..ny {
            for i in 0..nx {
                match grid.bc[j * nx + i] {
                    Some(v) if v == 0.0 => {
                        assert!(grid.ys[j] <= 1e-18);
                        assert!(grid.xs[i] <= g.wire_width + 1e-18);
                        zeros += 1;
                    }
                    Some(v) => {
                        assert_eq!(v, 1.0);
                        assert_eq!(j, ny - 1);
                    }
                    None => {}
                }
            }
        }
        assert!(zeros > 0);
    }

    #[test]
    fn conductances_positive_and_finite() {
        let grid = Grid::build(&geom(), 1, 0.0);
        let mut count = 0;
        grid.for_each_edge(|_, _, g| {
            assert!(g > 0.0 && g.is_finite());
            count += 1;
        });
        assert_eq!(count, grid.nx() * grid.ny() + grid.nx() * (grid.ny() - 1));
    }
}
