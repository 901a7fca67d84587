// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Matrix exponential by scaling and squaring with Padé approximants
//! (Higham 2005), and its Fréchet derivative through the block-triangular
//! identity `exp([[A, E], [0, A]]) = [[e^A, L(A, E)], [0, e^A]]`.

use num_complex::Complex64 as C64;

use super::CMatrix;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error bounds for each Padé degree in double precision.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn axpy_into(out: &mut CMatrix, a: f64, x: &CMatrix) {
    for (o, &v) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *o += v * a;
    }
}

fn add_identity(m: &mut CMatrix, a: f64) {
    for i in 0..m.dim() {
        m[(i, i)] += C64::new(a, 0.0);
    }
}

/// Low-degree Padé numerator/denominator pieces from precomputed even powers.
fn pade_low(a: &CMatrix, powers: &[CMatrix], b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.dim();
    let mut u_inner = CMatrix::zeros(n);
    let mut v = CMatrix::zeros(n);
    add_identity(&mut u_inner, b[1]);
    add_identity(&mut v, b[0]);
    for (k, p) in powers.iter().enumerate() {
        axpy_into(&mut u_inner, b[2 * k + 3], p);
        axpy_into(&mut v, b[2 * k + 2], p);
    }
    (a.matmul(&u_inner), v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.dim();
    let b = &PADE13;
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut t = CMatrix::zeros(n);
    axpy_into(&mut t, b[13], &a6);
    axpy_into(&mut t, b[11], &a4);
    axpy_into(&mut t, b[9], &a2);
    let mut u_inner = a6.matmul(&t);
    axpy_into(&mut u_inner, b[7], &a6);
    axpy_into(&mut u_inner, b[5], &a4);
    axpy_into(&mut u_inner, b[3], &a2);
    add_identity(&mut u_inner, b[1]);
    let u = a.matmul(&u_inner);

    let mut t = CMatrix::zeros(n);
    axpy_into(&mut t, b[12], &a6);
    axpy_into(&mut t, b[10], &a4);
    axpy_into(&mut t, b[8], &a2);
    let mut v = a6.matmul(&t);
    axpy_into(&mut v, b[6], &a6);
    axpy_into(&mut v, b[4], &a4);
    axpy_into(&mut v, b[2], &a2);
    add_identity(&mut v, b[0]);
    (u, v)
}

fn pade_solve(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let p = v + u;
    let q = v - u;
    // q is well conditioned for every admissible norm bound.
    q.solve(&p).expect("Padé denominator is nonsingular inside its norm bound")
}

/// `e^A` for a square complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.dim();
    if n == 1 {
        return CMatrix::from_diag(&[a[(0, 0)].exp()]);
    }
    let norm = a.norm1();
    if norm == 0.0 {
        return CMatrix::identity(n);
    }
    if norm <= THETA9 {
        let a2 = a.matmul(a);
        let (u, v) = if norm <= THETA3 {
            pade_low(a, &[a2], &PADE3)
        } else if norm <= THETA5 {
            let a4 = a2.matmul(&a2);
            pade_low(a, &[a2, a4], &PADE5)
        } else if norm <= THETA7 {
            let a4 = a2.matmul(&a2);
            let a6 = a4.matmul(&a2);
            pade_low(a, &[a2, a4, a6], &PADE7)
        } else {
            let a4 = a2.matmul(&a2);
            let a6 = a4.matmul(&a2);
            let a8 = a6.matmul(&a2);
            pade_low(a, &[a2, a4, a6, a8], &PADE9)
        };
        return pade_solve(&u, &v);
    }
    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let scaled = a.scale_real(0.5f64.powi(s));
    let (u, v) = pade13(&scaled);
    let mut r = pade_solve(&u, &v);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

/// Returns `(e^A, L(A, E))` where `L` is the Fréchet derivative of the
/// exponential at `A` in direction `E`.
pub fn expm_frechet(a: &CMatrix, e: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.dim();
    assert_eq!(n, e.dim(), "Fréchet direction has the wrong dimension");
    if n == 1 {
        let x = a[(0, 0)].exp();
        return (CMatrix::from_diag(&[x]), CMatrix::from_diag(&[x * e[(0, 0)]]));
    }
    let m = 2 * n;
    let mut big = CMatrix::zeros(m);
    for i in 0..n {
        for j in 0..n {
            big[(i, j)] = a[(i, j)];
            big[(n + i, n + j)] = a[(i, j)];
            big[(i, n + j)] = e[(i, j)];
        }
    }
    let x = expm(&big);
    let mut ea = CMatrix::zeros(n);
    let mut l = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            ea[(i, j)] = x[(i, j)];
            l[(i, j)] = x[(i, n + j)];
        }
    }
    (ea, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{tests::random_matrix, I, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Plain Taylor series with many terms, used as an independent oracle on
    /// small-norm inputs.
    fn taylor_expm(a: &CMatrix, terms: usize) -> CMatrix {
        let mut term = CMatrix::identity(a.dim());
        let mut sum = term.clone();
        for k in 1..terms {
            term = term.matmul(a).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }

    #[test]
    fn matches_taylor_across_pade_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &scale in &[1e-3, 0.05, 0.3, 0.9, 2.0, 4.0, 9.0] {
            let a = random_matrix(&mut rng, 5);
            let a = a.scale_real(scale / a.norm1());
            // Taylor with scaling-and-squaring for the oracle as well.
            let s = 6;
            let mut t = taylor_expm(&a.scale_real(0.5f64.powi(s)), 30);
            for _ in 0..s {
                t = t.matmul(&t);
            }
            let got = expm(&a);
            assert!((&got - &t).max_abs() < 1e-12 * t.max_abs().max(1.0), "scale {scale}");
        }
    }

    #[test]
    fn exponential_of_antihermitian_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_matrix(&mut rng, 8);
        let h = &r + &r.adjoint();
        let u = expm(&h.scale(-I * 3.0));
        assert!(u.unitarity_defect() < 1e-13);
    }

    #[test]
    fn diagonal_case_is_exact() {
        let d = [C64::new(0.3, -1.0), C64::new(-2.0, 0.5), ZERO];
        let got = expm(&CMatrix::from_diag(&d));
        for (i, z) in d.iter().enumerate() {
            assert!((got[(i, i)] - z.exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn frechet_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 4).scale_real(0.8);
        let e = random_matrix(&mut rng, 4);
        let (ea, l) = expm_frechet(&a, &e);
        assert!((&ea - &expm(&a)).max_abs() < 1e-13);
        let h = 1e-5;
        let plus = expm(&(&a + &e.scale_real(h)));
        let minus = expm(&(&a - &e.scale_real(h)));
        let fd = (&plus - &minus).scale_real(0.5 / h);
        assert!((&fd - &l).max_abs() < 1e-8);
    }
}
