//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants and norm-based order selection (orders 3, 5, 7, 9, 13).

use nalgebra::DMatrix;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
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
const B13: [f64; 14] = [
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

fn one_norm(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|x| x.abs()).sum();
        worst = worst.max(s);
    }
    worst
}

/// Solves `(V − U)·X = (V + U)` for the Padé quotient.
fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let numerator = &v + &u;
    let denominator = v - u;
    denominator
        .lu()
        .solve(&numerator)
        .expect("Padé denominator of the scaled matrix is nonsingular")
}

/// Padé approximant of order 3, 5, 7 or 9 via the odd/even split.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let a2 = a * a;
    // powers of A²: I, A², A⁴, ...
    let mut even_pows = vec![DMatrix::identity(n, n), a2.clone()];
    while even_pows.len() < b.len() / 2 {
        let next = even_pows.last().unwrap() * &a2;
        even_pows.push(next);
    }
    let mut u_inner = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for (k, p) in even_pows.iter().enumerate() {
        u_inner += p * b[2 * k + 1];
        v += p * b[2 * k];
    }
    pade_solve(a * u_inner, v)
}

/// Padé 13 in the factored form that needs only A², A⁴ and A⁶.
fn pade_13(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &B13;

    let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let w2 = &w1 * &a6 + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &eye * b[1];
    let u = a * w2;

    let z1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &z1 * &a6 + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &eye * b[0];
    pade_solve(u, v)
}

/// `exp(A)` for a real square matrix.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    if norm <= THETA_3 {
        return pade_low(a, &B3);
    }
    if norm <= THETA_5 {
        return pade_low(a, &B5);
    }
    if norm <= THETA_7 {
        return pade_low(a, &B7);
    }
    if norm <= THETA_9 {
        return pade_low(a, &B9);
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2.0_f64.powi(s as i32);
    let mut x = pade_13(&scaled);
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{max_abs_diff, row_sum_residual};

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert!(max_abs_diff(&expm(&z), &DMatrix::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn exp_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let e = expm(&a);
        assert!((e[(0, 0)] - 1.0_f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-2.0_f64).exp()).abs() < 1e-15);
        assert!((e[(2, 2)] - 0.5_f64.exp()).abs() < 1e-14);
        assert!(e[(0, 1)].abs() < 1e-16);
    }

    #[test]
    fn exp_of_nilpotent_truncates() {
        // C with zero trace is nilpotent of degree 2: e^C = I + C.
        let c = crate::dense::equal_rows_from(&[1.0, -1.0]);
        let e = expm(&c);
        let expect = DMatrix::identity(2, 2) + &c;
        assert!(max_abs_diff(&e, &expect) < 1e-15);
    }

    #[test]
    fn exp_needs_scaling_for_large_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 30.0, -30.0, 0.0]);
        let e = expm(&a);
        // rotation by 30 radians
        assert!((e[(0, 0)] - 30.0_f64.cos()).abs() < 1e-11);
        assert!((e[(0, 1)] - 30.0_f64.sin()).abs() < 1e-11);
        // orthogonality
        let prod = &e * e.transpose();
        assert!(max_abs_diff(&prod, &DMatrix::identity(2, 2)) < 1e-11);
    }

    #[test]
    fn zero_row_sum_input_gives_row_sum_one() {
        let mut rng = crate::rng::Lcg::new(31);
        for d in 2..=6 {
            let q = rng.rate_matrix(d, 1.5);
            let e = expm(&q);
            assert!(row_sum_residual(&e, 1.0) <= 1e-12);
        }
    }

    #[test]
    fn agrees_with_scalar_exp_on_2x2_jordan() {
        // exp([[a, 1], [0, a]]) = e^a [[1, 1], [0, 1]]
        let a = 0.7;
        let m = DMatrix::from_row_slice(2, 2, &[a, 1.0, 0.0, a]);
        let e = expm(&m);
        let ea = a.exp();
        assert!((e[(0, 0)] - ea).abs() < 1e-14);
        assert!((e[(0, 1)] - ea).abs() < 1e-14);
        assert!(e[(1, 0)].abs() < 1e-16);
        assert!((e[(1, 1)] - ea).abs() < 1e-14);
    }
}
