//! Closed-form oracles shared by the integration suites. None of these call
//! into the library's solvers.

#![allow(dead_code)]

use std::f64::consts::PI;

use qcc_core::linalg::{ComplexMatrix, C64};

/// Roots of `det(λI − w)` for a 2×2 or 3×3 matrix, by Durand–Kerner iteration
/// on the characteristic polynomial.
pub fn eigenvalues_small(w: &ComplexMatrix) -> Vec<C64> {
    let n = w.rows();
    let a = |i: usize, j: usize| w[(i, j)];
    // monic coefficients, highest degree first after the leading 1
    let coeffs: Vec<C64> = match n {
        2 => vec![-(a(0, 0) + a(1, 1)), a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)],
        3 => {
            let tr = a(0, 0) + a(1, 1) + a(2, 2);
            let minors = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)
                + a(1, 1) * a(2, 2)
                - a(1, 2) * a(2, 1);
            let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
            vec![-tr, minors, -det]
        }
        _ => panic!("oracle handles dims 2 and 3 only"),
    };
    let poly = |z: C64| coeffs.iter().fold(C64::new(1.0, 0.0), |acc, c| acc * z + c);
    let mut roots: Vec<C64> = (0..n).map(|k| C64::from_polar(0.9, 0.4 + 2.0 * PI * k as f64 / n as f64)).collect();
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = poly(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Euclidean distance from the origin to the convex hull of points on the unit circle.
pub fn hull_distance(points: &[C64]) -> f64 {
    let mut angles: Vec<f64> = points.iter().map(|z| z.arg().rem_euclid(2.0 * PI)).collect();
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    // the origin lies outside the hull iff some angular gap exceeds π
    let gap = (0..n)
        .map(|k| {
            let next = if k + 1 < n { angles[k + 1] } else { angles[0] + 2.0 * PI };
            next - angles[k]
        })
        .fold(0.0, f64::max);
    if gap <= PI {
        return 0.0;
    }
    // nearest hull point is the midpoint of the chord spanning the occupied arc
    let span = 2.0 * PI - gap;
    (span / 2.0).cos()
}

/// `2√(1 − ν²)` with `ν` the hull distance of the spectrum of `U†V`.
pub fn unitary_pair_so_norm(u: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    let nu = hull_distance(&eigenvalues_small(&u.adjoint().matmul(v)));
    2.0 * (1.0 - nu * nu).max(0.0).sqrt()
}

/// Logical flip probability of the 3-bit majority code, by enumerating all flip patterns.
pub fn repetition_logical_flip(q: f64) -> f64 {
    (0u32..8)
        .filter(|pattern| pattern.count_ones() >= 2)
        .map(|pattern| {
            let k = pattern.count_ones() as i32;
            q.powi(k) * (1.0 - q).powi(3 - k)
        })
        .sum()
}

/// `Pr[Bin(n, p) > n/2]` by direct summation of the probability mass function.
pub fn binomial_majority(p: f64, n: u64) -> f64 {
    let mut total = 0.0;
    for k in n / 2 + 1..=n {
        let mut log_choose = 0.0;
        for j in 0..k {
            log_choose += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
        }
        total += (log_choose + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
    }
    total
}

/// Amplitude damping with decay probability `g`, written out on a 2×2 operand.
pub fn amplitude_damping_action(g: f64, x: &ComplexMatrix) -> ComplexMatrix {
    let s = (1.0 - g).sqrt();
    ComplexMatrix::from_rows(&[
        vec![x[(0, 0)] + x[(1, 1)] * g, x[(0, 1)] * s],
        vec![x[(1, 0)] * s, x[(1, 1)] * (1.0 - g)],
    ])
    .expect("2x2")
}

#[test]
fn oracle_self_checks() {
    // hull of {1, i}: chord midpoint at distance cos(π/4)
    let d = hull_distance(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
    assert!((d - (PI / 4.0).cos()).abs() < 1e-15);
    assert_eq!(hull_distance(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]), 0.0);
    assert!((hull_distance(&[C64::new(0.0, 1.0); 3]) - 1.0).abs() < 1e-15);
    assert!((repetition_logical_flip(0.1) - 0.028).abs() < 1e-15);
    assert!((binomial_majority(0.7, 1) - 0.7).abs() < 1e-15);
    assert!((binomial_majority(0.5, 101) - 0.5).abs() < 1e-12);
    let diag = ComplexMatrix::from_real_diag(&[2.0, -1.0, 0.5]);
    let mut eig: Vec<f64> = eigenvalues_small(&diag).iter().map(|z| z.re).collect();
    eig.sort_by(f64::total_cmp);
    assert!(eig.iter().zip([-1.0, 0.5, 2.0]).all(|(a, b)| (a - b).abs() < 1e-12));
}
