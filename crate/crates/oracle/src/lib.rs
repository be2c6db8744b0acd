//! Brute-force reference implementations used only in tests.
//!
//! These deliberately share no numerical code with the production paths they
//! check: time evolution goes through a scaling-and-squaring Padé matrix
//! exponential of the densified superoperator, and spectra through a cyclic
//! complex Jacobi eigensolver. Costs grow like dim³ per multiply, so both
//! entry points carry hard dimension guards and are never compiled into the
//! command-line tool.

use nalgebra::DMatrix;
use num_complex::Complex64;
use optomotor::dynamics::{DensityState, LiouvillianOp};
use optomotor::{CoreError, OperatorMatrix};

/// Guard for [`dense_expm_evolve`]: the superoperator side length dim².
pub const EXPM_DIM_LIMIT: usize = 4096;

/// Guard for [`dense_full_spectrum`].
pub const SPECTRUM_DIM_LIMIT: usize = 1024;

/// Propagate a state by exp(L·t) applied to the vectorized density matrix.
/// The result is returned raw (not Hermitized, not renormalized) so callers
/// can inspect the bare deviation.
pub fn dense_expm_evolve(
    rho0: &DensityState,
    l: &LiouvillianOp,
    t: f64,
) -> Result<DensityState, CoreError> {
    let dim = l.dim();
    let n = dim * dim;
    if n > EXPM_DIM_LIMIT {
        return Err(CoreError::DimensionGuard {
            what: "dense_expm_evolve",
            dim: n,
            guard: EXPM_DIM_LIMIT,
        });
    }
    let generator = l.superoperator().to_dense() * Complex64::new(t, 0.0);
    let propagator = expm(&generator);
    let y0 = nalgebra::DVector::from_vec(rho0.to_vec());
    let y1 = &propagator * y0;
    Ok(DensityState::from_vec(
        y1.as_slice(),
        dim,
        rho0.time_tag() + t,
    ))
}

/// All eigenvalues of a Hermitian operator, ascending, via cyclic Jacobi.
pub fn dense_full_spectrum(h: &OperatorMatrix) -> Result<Vec<f64>, CoreError> {
    if h.dim() > SPECTRUM_DIM_LIMIT {
        return Err(CoreError::DimensionGuard {
            what: "dense_full_spectrum",
            dim: h.dim(),
            guard: SPECTRUM_DIM_LIMIT,
        });
    }
    let defect = h.hermiticity_defect();
    if defect > 1e-12 {
        return Err(CoreError::NotHermitian { defect });
    }
    let mut eigs = jacobi_eigenvalues(h.to_dense());
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs)
}

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
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

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scalar(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of orders 3/5/7/9/13.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let eye = DMatrix::<Complex64>::identity(n, n);

    let (u, v) = if norm <= THETA_9 {
        let a2 = a * a;
        let a4 = &a2 * &a2;
        if norm <= THETA_3 {
            pade_uv(a, &eye, &[&a2], &B3)
        } else if norm <= THETA_5 {
            pade_uv(a, &eye, &[&a2, &a4], &B5)
        } else if norm <= THETA_7 {
            let a6 = &a2 * &a4;
            pade_uv(a, &eye, &[&a2, &a4, &a6], &B7)
        } else {
            let a6 = &a2 * &a4;
            let a8 = &a4 * &a4;
            pade_uv(a, &eye, &[&a2, &a4, &a6, &a8], &B9)
        }
    } else {
        let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
        let scaled = a * scalar(0.5f64.powi(s as i32));
        let a2 = &scaled * &scaled;
        let a4 = &a2 * &a2;
        let a6 = &a2 * &a4;
        // order-13 evaluation with factored high powers
        let u_high = &a6 * (&a6 * scalar(B13[13]) + &a4 * scalar(B13[11]) + &a2 * scalar(B13[9]));
        let u_low = &a6 * scalar(B13[7])
            + &a4 * scalar(B13[5])
            + &a2 * scalar(B13[3])
            + &eye * scalar(B13[1]);
        let u = &scaled * (u_high + u_low);
        let v_high = &a6 * (&a6 * scalar(B13[12]) + &a4 * scalar(B13[10]) + &a2 * scalar(B13[8]));
        let v = v_high
            + &a6 * scalar(B13[6])
            + &a4 * scalar(B13[4])
            + &a2 * scalar(B13[2])
            + &eye * scalar(B13[0]);
        let mut f = pade_solve(&u, &v);
        for _ in 0..s {
            f = &f * &f;
        }
        return f;
    };
    pade_solve(&u, &v)
}

/// U and V of a diagonal Padé approximant from precomputed even powers
/// (powers[k] = A^(2(k+1))).
fn pade_uv(
    a: &DMatrix<Complex64>,
    eye: &DMatrix<Complex64>,
    powers: &[&DMatrix<Complex64>],
    b: &[f64],
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut u_inner = eye * scalar(b[1]);
    let mut v = eye * scalar(b[0]);
    for (k, p) in powers.iter().enumerate() {
        let odd = 2 * (k + 1) + 1;
        let even = 2 * (k + 1);
        if odd < b.len() {
            u_inner += *p * scalar(b[odd]);
        }
        v += *p * scalar(b[even]);
    }
    (a * u_inner, v)
}

/// (V − U)⁻¹(V + U).
fn pade_solve(u: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let lhs = v - u;
    let rhs = v + u;
    lhs.lu().solve(&rhs).expect("Padé denominator singular")
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
/// Unsorted; diagonal entries after convergence.
pub fn jacobi_eigenvalues(mut a: DMatrix<Complex64>) -> Vec<f64> {
    let n = a.nrows();
    if n == 1 {
        return vec![a[(0, 0)].re];
    }
    let scale = one_norm(&a).max(1e-300);
    let tol = 1e-14 * scale;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let m = apq.norm();
                if m <= tol * 1e-2 {
                    continue;
                }
                let phase = apq / scalar(m);
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                let tau = (beta - alpha) / (2.0 * m);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // unitary J: J_pp = c, J_pq = s, J_qp = -s conj(phase),
                // J_qq = c conj(phase); apply A <- J^dag A J
                let jpp = scalar(c);
                let jpq = scalar(s);
                let jqp = -scalar(s) * phase.conj();
                let jqq = scalar(c) * phase.conj();
                // columns
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = arp * jpp + arq * jqp;
                    a[(r, q)] = arp * jpq + arq * jqq;
                }
                // rows (J^dag from the left)
                for col in 0..n {
                    let apc = a[(p, col)];
                    let aqc = a[(q, col)];
                    a[(p, col)] = jpp.conj() * apc + jqp.conj() * aqc;
                    a[(q, col)] = jpq.conj() * apc + jqq.conj() * aqc;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)].re).collect()
}
