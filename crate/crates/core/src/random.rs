//! Seeded random draws of states, unitaries and channels.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{DensityMatrix, QuantumChannel};
use crate::linalg::{ComplexMatrix, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random unit vector.
pub fn random_state_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// `rows × cols` matrix with orthonormal columns (`rows ≥ cols`), Haar-distributed.
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    loop {
        let mut columns: Vec<Vec<C64>> = Vec::with_capacity(cols);
        let mut ok = true;
        for _ in 0..cols {
            let mut v: Vec<C64> = (0..rows).map(|_| gaussian(rng)).collect();
            // two Gram-Schmidt passes for numerical orthogonality
            for _ in 0..2 {
                for q in &columns {
                    let overlap: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= overlap * qi;
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            columns.push(v.into_iter().map(|z| z / norm).collect());
        }
        if ok {
            return ComplexMatrix::from_fn(rows, cols, |i, j| columns[j][i]);
        }
    }
}

pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    random_isometry(dim, dim, rng)
}

/// Channel with `kraus_count` Kraus operators cut from a random Stinespring isometry.
pub fn random_channel<R: Rng + ?Sized>(dim: usize, kraus_count: usize, rng: &mut R) -> QuantumChannel {
    let kraus_count = kraus_count.max(1);
    let v = random_isometry(dim * kraus_count, dim, rng);
    let kraus = (0..kraus_count).map(|k| ComplexMatrix::from_fn(dim, dim, |i, j| v[(k * dim + i, j)])).collect();
    QuantumChannel::from_kraus(kraus).expect("isometry blocks form a complete Kraus set")
}

/// Mixed state of rank at most `rank`, from a Ginibre draw.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, rank.max(1), |_, _| gaussian(rng));
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr).hermitian_part()).expect("Ginibre states are valid")
}
