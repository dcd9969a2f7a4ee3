//! Banded symmetric positive definite systems: the interior stiffness
//! matrix of the Dirichlet Laplacian, its Cholesky factor, and the first
//! discrete eigenvector.

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, Mesh};

/// Lower band of a symmetric matrix: `band[i * (bw + 1) + (bw - (i - j))]`
/// holds `a[i][j]` for `i - bw <= j <= i`.
#[derive(Clone, Debug)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw - (i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.band[self.idx(i, j)]
        }
    }

    /// Adds `v` to `a[i][j]` (and implicitly `a[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.band[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.band[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.band[self.idx(i, i)] * x[i];
        }
        y
    }

    pub fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(x).iter().zip(y).map(|(a, b)| a * b).sum()
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let mut l = self.clone();
        for j in 0..self.n {
            let lo = j.saturating_sub(self.bw);
            let mut d = l.band[l.idx(j, j)];
            for k in lo..j {
                let v = l.band[l.idx(j, k)];
                d -= v * v;
            }
            if !(d > 0.0) {
                return Err(Error::Numeric(format!("matrix not positive definite at row {j}")));
            }
            let d = d.sqrt();
            let jj = l.idx(j, j);
            l.band[jj] = d;
            for i in j + 1..(j + self.bw + 1).min(self.n) {
                let lo_i = i.saturating_sub(self.bw);
                let mut s = l.band[l.idx(i, j)];
                for k in lo_i.max(lo)..j {
                    s -= l.band[l.idx(i, k)] * l.band[l.idx(j, k)];
                }
                let ij = l.idx(i, j);
                l.band[ij] = s / d;
            }
        }
        Ok(BandedCholesky { l })
    }
}

/// `A = L Lᵀ` with `L` stored in the lower band.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    l: BandedSym,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let n = l.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(l.bw);
            let mut s = y[i];
            for k in lo..i {
                s -= l.band[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.band[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + l.bw + 1).min(n);
            let mut s = y[i];
            for k in i + 1..hi {
                s -= l.band[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.band[l.idx(i, i)];
        }
        y
    }
}

/// `K[a][b] = ∫ ∇φ_a · ∇φ_b` over interior nodes.
pub fn interior_stiffness(mesh: &Mesh) -> BandedSym {
    let mut bw = 0;
    for cell in mesh.cells() {
        let ids: Vec<usize> = cell.iter().filter_map(|&n| mesh.interior_index(n)).collect();
        for &a in &ids {
            for &b in &ids {
                bw = bw.max(a.abs_diff(b));
            }
        }
    }
    let mut k = BandedSym::zeros(mesh.n_interior(), bw);
    for q in mesh.quadrature() {
        for a in 0..q.n_local {
            let Some(ia) = mesh.interior_index(q.nodes[a]) else { continue };
            for b in 0..=a {
                let Some(ib) = mesh.interior_index(q.nodes[b]) else { continue };
                let ga = q.shape_grad[a];
                let gb = q.shape_grad[b];
                let v = q.weight * (ga[0] * gb[0] + ga[1] * gb[1]);
                k.add(ia, ib, v);
            }
        }
    }
    k
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    /// Positive, normalised to unit maximum.
    pub vector: GridFunction,
}

/// Inverse power iteration for `K x = μ M x` with lumped mass `M`.
pub fn first_eigenpair(mesh: &Mesh, iterations: usize) -> Result<Eigenpair> {
    let n = mesh.n_interior();
    if n == 0 {
        return Err(Error::config("domain.resolution", "mesh has no interior nodes"));
    }
    let k = interior_stiffness(mesh);
    let chol = k.cholesky()?;
    let w: Vec<f64> = mesh.interior_nodes().iter().map(|&i| mesh.lumped_weights()[i]).collect();
    let mut x = vec![1.0; n];
    for _ in 0..iterations {
        let rhs: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
        x = chol.solve(&rhs);
        let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m == 0.0 || !m.is_finite() {
            return Err(Error::Numeric("inverse iteration collapsed".into()));
        }
        x.iter_mut().for_each(|v| *v /= m);
    }
    let kx = k.dot(&x, &x);
    let mx: f64 = x.iter().zip(&w).map(|(a, b)| a * a * b).sum();
    let sign = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    x.iter_mut().for_each(|v| *v *= sign);
    Ok(Eigenpair {
        value: kx / mx,
        vector: GridFunction::from_interior(mesh, &x),
    })
}
