//! Structured meshes on intervals and rectangles, nodal grid functions and
//! quadrature.
//!
//! 1-D meshes use linear segments with two-point Gauss quadrature per cell;
//! 2-D meshes use bilinear quadrilaterals with 2x2 Gauss quadrature. Nodes
//! are numbered lexicographically with `x` fastest. Boundary nodes carry the
//! homogeneous Dirichlet condition and are excluded from unknown vectors.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GAUSS_OFFSET: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

pub type Point = [f64; 2];

/// One quadrature point with everything needed to evaluate nodal
/// interpolants and their gradients there.
#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub cell: usize,
    /// Quadrature weight times the cell Jacobian.
    pub weight: f64,
    pub coord: Point,
    /// Global node indices of the owning cell (first `n_local` used).
    pub nodes: [usize; 4],
    pub n_local: usize,
    pub shape: [f64; 4],
    pub shape_grad: [[f64; 2]; 4],
}

impl QuadPoint {
    #[inline]
    pub fn interpolate(&self, nodal: &[f64]) -> f64 {
        (0..self.n_local).map(|k| self.shape[k] * nodal[self.nodes[k]]).sum()
    }

    #[inline]
    pub fn gradient(&self, nodal: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..self.n_local {
            let v = nodal[self.nodes[k]];
            g[0] += self.shape_grad[k][0] * v;
            g[1] += self.shape_grad[k][1] * v;
        }
        g
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    extents: Vec<(f64, f64)>,
    resolution: Vec<usize>,
    coords: Vec<Point>,
    cells: Vec<[usize; 4]>,
    boundary: Vec<bool>,
    /// node index -> interior unknown index
    interior_index: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
    quad: Vec<QuadPoint>,
    lumped: Vec<f64>,
}

impl Mesh {
    /// Builds a uniform mesh; `extents` and `resolution` have one entry per axis.
    pub fn build(dim: usize, extents: &[(f64, f64)], resolution: &[usize]) -> Result<Mesh> {
        if dim != 1 && dim != 2 {
            return Err(Error::config("domain.dimension", format!("dimension must be 1 or 2, got {dim}")));
        }
        if extents.len() != dim || resolution.len() != dim {
            return Err(Error::config(
                "domain",
                format!("expected {dim} extents and resolutions, got {} and {}", extents.len(), resolution.len()),
            ));
        }
        for (axis, &(lo, hi)) in extents.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(
                    "domain.extents",
                    format!("axis {axis}: degenerate extent ({lo}, {hi})"),
                ));
            }
        }
        for (axis, &n) in resolution.iter().enumerate() {
            if n < 2 {
                return Err(Error::config(
                    "domain.resolution",
                    format!("axis {axis}: need at least 2 cells, got {n}"),
                ));
            }
        }
        let mut mesh = if dim == 1 {
            Self::build_1d(extents[0], resolution[0])
        } else {
            Self::build_2d(extents, resolution)
        };
        mesh.extents = extents.to_vec();
        mesh.resolution = resolution.to_vec();
        mesh.finish();
        Ok(mesh)
    }

    pub fn interval(lo: f64, hi: f64, cells: usize) -> Result<Mesh> {
        Self::build(1, &[(lo, hi)], &[cells])
    }

    pub fn unit_interval(cells: usize) -> Mesh {
        Self::interval(0.0, 1.0, cells).expect("valid unit interval")
    }

    fn empty(dim: usize) -> Mesh {
        Mesh {
            dim,
            extents: Vec::new(),
            resolution: Vec::new(),
            coords: Vec::new(),
            cells: Vec::new(),
            boundary: Vec::new(),
            interior_index: Vec::new(),
            interior_nodes: Vec::new(),
            quad: Vec::new(),
            lumped: Vec::new(),
        }
    }

    fn build_1d((lo, hi): (f64, f64), n: usize) -> Mesh {
        let mut mesh = Self::empty(1);
        let h = (hi - lo) / n as f64;
        mesh.coords = (0..=n)
            .map(|i| if i == n { [hi, 0.0] } else { [lo + i as f64 * h, 0.0] })
            .collect();
        mesh.boundary = (0..=n).map(|i| i == 0 || i == n).collect();
        for c in 0..n {
            mesh.cells.push([c, c + 1, 0, 0]);
            for &xi in &[-GAUSS_OFFSET, GAUSS_OFFSET] {
                let s = 0.5 * (1.0 + xi);
                mesh.quad.push(QuadPoint {
                    cell: c,
                    weight: 0.5 * h,
                    coord: [mesh.coords[c][0] + s * h, 0.0],
                    nodes: [c, c + 1, 0, 0],
                    n_local: 2,
                    shape: [1.0 - s, s, 0.0, 0.0],
                    shape_grad: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2], [0.0; 2]],
                });
            }
        }
        mesh
    }

    fn build_2d(extents: &[(f64, f64)], resolution: &[usize]) -> Mesh {
        let mut mesh = Self::empty(2);
        let (nx, ny) = (resolution[0], resolution[1]);
        let (x0, x1) = extents[0];
        let (y0, y1) = extents[1];
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { x1 } else { x0 + i as f64 * hx };
                let y = if j == ny { y1 } else { y0 + j as f64 * hy };
                mesh.coords.push([x, y]);
                mesh.boundary.push(i == 0 || i == nx || j == 0 || j == ny);
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let c = mesh.cells.len();
                // counter-clockwise from the lower-left corner
                let nodes = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
                mesh.cells.push(nodes);
                let [cx, cy] = mesh.coords[nodes[0]];
                for &eta in &[-GAUSS_OFFSET, GAUSS_OFFSET] {
                    for &xi in &[-GAUSS_OFFSET, GAUSS_OFFSET] {
                        let (s, r) = (0.5 * (1.0 + xi), 0.5 * (1.0 + eta));
                        mesh.quad.push(QuadPoint {
                            cell: c,
                            weight: 0.25 * hx * hy,
                            coord: [cx + s * hx, cy + r * hy],
                            nodes,
                            n_local: 4,
                            shape: [(1.0 - s) * (1.0 - r), s * (1.0 - r), s * r, (1.0 - s) * r],
                            shape_grad: [
                                [-(1.0 - r) / hx, -(1.0 - s) / hy],
                                [(1.0 - r) / hx, -s / hy],
                                [r / hx, s / hy],
                                [-r / hx, (1.0 - s) / hy],
                            ],
                        });
                    }
                }
            }
        }
        mesh
    }

    fn finish(&mut self) {
        let mut next = 0;
        self.interior_index = self
            .boundary
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        self.interior_nodes = (0..self.coords.len()).filter(|&i| !self.boundary[i]).collect();
        let mut lumped = vec![0.0; self.coords.len()];
        for q in &self.quad {
            for k in 0..q.n_local {
                lumped[q.nodes[k]] += q.weight * q.shape[k];
            }
        }
        self.lumped = lumped;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_index[node]
    }

    pub fn quadrature(&self) -> &[QuadPoint] {
        &self.quad
    }

    /// Lumped nodal mass weights `w_i = ∫ e_i dx`.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn measure(&self) -> f64 {
        self.extents.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Smallest cell width over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.extents
            .iter()
            .zip(&self.resolution)
            .map(|(&(lo, hi), &n)| (hi - lo) / n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Interpolates nodal values to every quadrature point.
    pub fn at_quadrature(&self, nodal: &[f64]) -> Vec<f64> {
        self.quad.iter().map(|q| q.interpolate(nodal)).collect()
    }

    /// Constant gradient per cell: exact for linear elements, the cell-centre
    /// gradient for bilinear ones.
    pub fn gradient(&self, u: &GridFunction) -> Vec<[f64; 2]> {
        let v = u.values();
        self.cells
            .iter()
            .map(|cell| {
                if self.dim == 1 {
                    let h = self.coords[cell[1]][0] - self.coords[cell[0]][0];
                    [(v[cell[1]] - v[cell[0]]) / h, 0.0]
                } else {
                    let hx = self.coords[cell[1]][0] - self.coords[cell[0]][0];
                    let hy = self.coords[cell[3]][1] - self.coords[cell[0]][1];
                    [
                        0.5 * ((v[cell[1]] - v[cell[0]]) + (v[cell[2]] - v[cell[3]])) / hx,
                        0.5 * ((v[cell[3]] - v[cell[0]]) + (v[cell[2]] - v[cell[1]])) / hy,
                    ]
                }
            })
            .collect()
    }

    /// Composite quadrature of a pointwise integrand.
    ///
    /// Per-cell contributions are combined by fixed-order pairwise summation,
    /// so the result is bit-reproducible.
    pub fn integrate<F>(&self, mut integrand: F) -> Result<f64>
    where
        F: FnMut(&QuadPoint) -> f64,
    {
        let per_point = self.quad.len() / self.cells.len();
        let mut cell_sums = Vec::with_capacity(self.cells.len());
        for chunk in self.quad.chunks(per_point) {
            let mut s = 0.0;
            for q in chunk {
                let f = integrand(q);
                if !f.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite integrand {f} at ({}, {}) in cell {}",
                        q.coord[0], q.coord[1], q.cell
                    )));
                }
                s += q.weight * f;
            }
            cell_sums.push(s);
        }
        Ok(pairwise_sum(&cell_sums))
    }
}

/// Fixed-order pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Real values at mesh nodes.
///
/// The Dirichlet constructors pin boundary nodes to zero; the plain
/// constructors keep arbitrary boundary values, which the modular-space
/// computations accept.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(mesh: &Mesh) -> Self {
        GridFunction {
            values: vec![0.0; mesh.n_nodes()],
        }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::config(
                "values",
                format!("expected {} nodal values, got {}", mesh.n_nodes(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite nodal value at node {i}")));
        }
        Ok(GridFunction { values })
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        GridFunction {
            values: mesh.coords().iter().map(|&p| f(p)).collect(),
        }
    }

    /// Like [`from_fn`](Self::from_fn) but with boundary nodes set to zero.
    pub fn dirichlet_from_fn(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        let mut g = Self::from_fn(mesh, f);
        g.pin_boundary(mesh);
        g
    }

    pub fn from_interior(mesh: &Mesh, interior: &[f64]) -> Self {
        assert_eq!(interior.len(), mesh.n_interior());
        let mut values = vec![0.0; mesh.n_nodes()];
        for (k, &node) in mesh.interior_nodes().iter().enumerate() {
            values[node] = interior[k];
        }
        GridFunction { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_nodes().iter().map(|&i| self.values[i]).collect()
    }

    pub fn pin_boundary(&mut self, mesh: &Mesh) {
        for (v, &b) in self.values.iter_mut().zip(mesh.boundary_mask()) {
            if b {
                *v = 0.0;
            }
        }
    }

    pub fn satisfies_dirichlet(&self, mesh: &Mesh) -> bool {
        self.values
            .iter()
            .zip(mesh.boundary_mask())
            .all(|(&v, &b)| !b || v == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        GridFunction {
            values: self.values.iter().map(|v| s * v).collect(),
        }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &GridFunction) -> Self {
        GridFunction {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// `(1 - theta) * self + theta * other`
    pub fn lerp(&self, other: &GridFunction, theta: f64) -> Self {
        GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `x,value` (1-D) or `x,y,value` (2-D).
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, mut out: W) -> std::io::Result<()> {
        if mesh.dim() == 1 {
            writeln!(out, "x,value")?;
            for (p, v) in mesh.coords().iter().zip(&self.values) {
                writeln!(out, "{:?},{:?}", p[0], v)?;
            }
        } else {
            writeln!(out, "x,y,value")?;
            for (p, v) in mesh.coords().iter().zip(&self.values) {
                writeln!(out, "{:?},{:?},{:?}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }

    /// Reads the value column of a CSV written by [`write_csv`](Self::write_csv).
    pub fn read_csv(mesh: &Mesh, text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let last = line.rsplit(',').next().unwrap_or("");
            let v = last.trim().parse::<f64>().map_err(|_| {
                Error::config(format!("csv line {}", lineno + 1), format!("cannot parse `{last}`"))
            })?;
            values.push(v);
        }
        Self::from_values(mesh, values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.values).expect("finite values serialize")
    }

    pub fn from_json(mesh: &Mesh, text: &str) -> Result<Self> {
        let values: Vec<f64> = serde_json::from_str(text)
            .map_err(|e| Error::config("initial_guess", format!("bad JSON array: {e}")))?;
        Self::from_values(mesh, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_interval() {
        let m = Mesh::interval(0.0, 1.0, 4).unwrap();
        let xs: Vec<f64> = m.coords().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let b: Vec<usize> = (0..5).filter(|&i| m.boundary_mask()[i]).collect();
        assert_eq!(b, vec![0, 4]);
        assert_eq!(m.n_interior(), 3);
    }

    #[test]
    fn rectangle_counts() {
        let m = Mesh::build(2, &[(0.0, 1.0), (0.0, 1.0)], &[2, 2]).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.boundary_mask().iter().filter(|&&b| b).count(), 8);
        assert_eq!(m.interior_nodes(), &[4]);
        let total: f64 = m.lumped_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(Mesh::interval(0.0, 0.0, 4).is_err());
        assert!(Mesh::interval(1.0, 0.0, 4).is_err());
        assert!(Mesh::interval(0.0, 1.0, 1).is_err());
        assert!(Mesh::build(3, &[(0.0, 1.0); 3], &[2; 3]).is_err());
        assert!(Mesh::build(2, &[(0.0, 1.0)], &[2]).is_err());
    }

    #[test]
    fn gradients_of_linear_functions() {
        let m = Mesh::unit_interval(7);
        let u = GridFunction::from_fn(&m, |p| p[0]);
        assert!(m.gradient(&u).iter().all(|g| (g[0] - 1.0).abs() < 1e-12));
        let z = GridFunction::zeros(&m);
        assert!(m.gradient(&z).iter().all(|g| g[0] == 0.0));

        let m2 = Mesh::build(2, &[(0.0, 1.0), (-1.0, 2.0)], &[3, 5]).unwrap();
        let u2 = GridFunction::from_fn(&m2, |p| p[0] + 2.0 * p[1]);
        for g in m2.gradient(&u2) {
            assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
        }
        // quadrature-point gradients agree for a linear function
        for q in m2.quadrature() {
            let g = q.gradient(u2.values());
            assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_exactness() {
        let m = Mesh::unit_interval(5);
        assert_eq!(m.integrate(|_| 1.0).unwrap(), 1.0);
        assert!((m.integrate(|q| q.coord[0]).unwrap() - 0.5).abs() < 1e-12);
        let m64 = Mesh::unit_interval(64);
        assert!((m64.integrate(|q| q.coord[0].powi(3)).unwrap() - 0.25).abs() < 1e-6);
        let m2 = Mesh::build(2, &[(0.0, 2.0), (0.0, 1.0)], &[3, 4]).unwrap();
        let v = m2.integrate(|q| q.coord[0] * q.coord[1].powi(2)).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_reports_non_finite() {
        let m = Mesh::unit_interval(4);
        let err = m.integrate(|q| if q.cell == 2 { f64::NAN } else { 1.0 }).unwrap_err();
        assert!(matches!(err, Error::Numeric(ref s) if s.contains("cell 2")));
    }

    #[test]
    fn refinement_reduces_error() {
        let f = |x: f64| (3.0 * x).sin() * x.exp();
        // ∫_0^1 e^x sin(3x) dx
        let exact = (std::f64::consts::E * (1.0f64 * 3.0).sin() - 3.0 * std::f64::consts::E * 3.0f64.cos() + 3.0) / 10.0;
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16, 32] {
            let err = (Mesh::unit_interval(n).integrate(|q| f(q.coord[0])).unwrap() - exact).abs();
            assert!(err <= prev / 2.0);
            prev = err;
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let m = Mesh::unit_interval(6);
        let u = GridFunction::dirichlet_from_fn(&m, |p| (3.0 * p[0]).sin());
        let mut buf = Vec::new();
        u.write_csv(&m, &mut buf).unwrap();
        let back = GridFunction::read_csv(&m, std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, u);
        assert_eq!(GridFunction::from_json(&m, &u.to_json()).unwrap(), u);
        assert!(GridFunction::from_json(&m, "[1.0]").is_err());
    }
}
