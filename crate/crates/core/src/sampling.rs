//! Seeded random grid functions for sweeps, probes and multistarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{GridFunction, Mesh};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream seed for sub-task `stream` of a run seeded `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent uniform nodal values in `[-a, a]`, with `a = 10^U(-1, 1)`.
pub fn random_nodal(mesh: &Mesh, rng: &mut ChaCha8Rng, zero_boundary: bool) -> GridFunction {
    let amp = 10f64.powf(rng.gen_range(-1.0..1.0));
    let mut u = GridFunction::from_fn(mesh, |_| 0.0);
    for v in u.values_mut() {
        *v = amp * rng.gen_range(-1.0..1.0);
    }
    if zero_boundary {
        u.pin_boundary(mesh);
    }
    u
}

/// A few random Fourier modes, scaled by `10^U(-1, 1)`.
pub fn random_smooth(mesh: &Mesh, rng: &mut ChaCha8Rng, zero_boundary: bool) -> GridFunction {
    let amp = 10f64.powf(rng.gen_range(-1.0..1.0));
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..6) as f64,
                rng.gen_range(1..6) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let ext = mesh.extents().to_vec();
    let dim = mesh.dim();
    let f = |c: [f64; 2]| -> f64 {
        let sx = (c[0] - ext[0].0) / (ext[0].1 - ext[0].0);
        let sy = if dim == 2 { (c[1] - ext[1].0) / (ext[1].1 - ext[1].0) } else { 0.5 };
        let s: f64 = modes
            .iter()
            .map(|&(a, kx, ky, ph)| {
                if zero_boundary {
                    let y = if dim == 2 { (ky * std::f64::consts::PI * sy).sin() } else { 1.0 };
                    a * (kx * std::f64::consts::PI * sx).sin() * y
                } else {
                    a * (kx * sx + ky * sy + ph).cos()
                }
            })
            .sum();
        amp * s
    };
    let mut u = GridFunction::from_fn(mesh, f);
    if zero_boundary {
        u.pin_boundary(mesh);
    }
    u
}

/// Alternates between the nodal and smooth families; never returns zero.
pub fn random_function(mesh: &Mesh, rng: &mut ChaCha8Rng, zero_boundary: bool) -> GridFunction {
    loop {
        let u = if rng.gen_bool(0.5) {
            random_nodal(mesh, rng, zero_boundary)
        } else {
            random_smooth(mesh, rng, zero_boundary)
        };
        if !u.is_zero() {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_are_reproducible() {
        let m = Mesh::unit_interval(16);
        let a = random_function(&m, &mut rng(5), true);
        let b = random_function(&m, &mut rng(5), true);
        assert_eq!(a, b);
        assert!(a.satisfies_dirichlet(&m));
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn smooth_two_dimensional_fields_vanish_on_the_boundary() {
        let m = Mesh::build(2, &[(0.0, 2.0), (-1.0, 1.0)], &[6, 6]).unwrap();
        let mut r = rng(9);
        for _ in 0..10 {
            let u = random_smooth(&m, &mut r, true);
            assert!(u.satisfies_dirichlet(&m));
        }
    }
}
