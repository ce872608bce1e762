#![allow(dead_code)]

use llimex::grid::{GridSpec, VectorField3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod oracles;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: GridSpec, seed: u64) -> VectorField3 {
    let mut r = rng(seed);
    VectorField3::from_fn(grid, |_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)])
}

pub fn random_unit_field(grid: GridSpec, seed: u64) -> VectorField3 {
    let mut r = rng(seed);
    VectorField3::from_fn(grid, |_| loop {
        let v: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 {
            break v.map(|x| x / n);
        }
    })
}

/// Interior values as `values[i][j][k]`-style flat array, x fastest.
pub fn cells(f: &VectorField3) -> Vec<[f64; 3]> {
    f.interior_values()
}

/// Flat interior index with mirrored out-of-range neighbours.
pub fn mirrored(n: [usize; 3], pos: [i64; 3]) -> usize {
    let p: Vec<usize> = (0..3).map(|a| pos[a].clamp(0, n[a] as i64 - 1) as usize).collect();
    p[0] + n[0] * (p[1] + n[1] * p[2])
}

pub fn max_abs_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| (0..3).map(move |q| (x[q] - y[q]).abs())).fold(0.0, f64::max)
}

/// Neumann Laplacian assembled row by row from the mirror rule, interior
/// cells in x-fastest order.
pub fn dense_laplacian(n: [usize; 3], h: [f64; 3], axes: usize) -> Vec<Vec<f64>> {
    let total = n[0] * n[1] * n[2];
    let mut a = vec![vec![0.0; total]; total];
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let pos = [i as i64, j as i64, k as i64];
                let row = mirrored(n, pos);
                for ax in 0..axes {
                    for s in [-1, 1] {
                        let mut nb = pos;
                        nb[ax] += s;
                        let w = 1.0 / (h[ax] * h[ax]);
                        a[row][mirrored(n, nb)] += w;
                        a[row][row] -= w;
                    }
                }
            }
        }
    }
    a
}
