//! Quantum channels, states and measurements.
//!
//! A [`QuantumChannel`] is held as a Kraus set with the Choi and Liouville
//! matrices computed eagerly at construction. Conventions:
//!
//! * Choi matrix `J = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`, input factor first, so
//!   `J[(i·d_out + a), (j·d_out + b)] = Φ(|i⟩⟨j|)[a, b]`.
//! * Liouville matrix `L` with `vec(Φ(X)) = L vec(X)` under column stacking,
//!   i.e. `L = Σ_k conj(K_k) ⊗ K_k`.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{hermitian_eig, kron, partial_trace, ComplexMatrix, LinalgError, Subsystem, C64, HERMITIAN_TOL};

/// Per-entry tolerance on `Σ K†K = I`.
pub const TP_TOL: f64 = 1e-9;
/// Minimum allowed Choi eigenvalue.
pub const CP_TOL: f64 = 1e-10;
/// Choi eigenvalues at or below this are dropped when extracting Kraus operators.
pub const KRAUS_DROP_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("Kraus operators are not trace preserving: max |Σ K†K - I| entry is {deviation:e}")]
    NotTracePreserving { deviation: f64 },
    #[error("map is not completely positive: Choi eigenvalue {min_eigenvalue:e}")]
    NotCompletelyPositive { min_eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter {name} = {value} is outside [0, 1]")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("operator is not unitary: max |U†U - I| entry is {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("a channel needs at least one Kraus operator")]
    EmptyKraus,
}

/// How to treat a Choi matrix that is slightly outside the CPTP set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Repair {
    /// Reject anything beyond the CP/TP tolerances.
    #[default]
    Reject,
    /// Clamp negative eigenvalues to zero and renormalize the trace condition.
    Project,
}

#[derive(Debug, Clone)]
pub struct QuantumChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<ComplexMatrix>,
    choi: ComplexMatrix,
    liouville: ComplexMatrix,
}

fn c(re: f64) -> C64 {
    Complex64::new(re, 0.0)
}

fn check_probability(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ChannelError::ParameterOutOfRange { name, value })
    }
}

/// Max entry of `U†U - I`; infinite for non-square input.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    u.adjoint().matmul(u).max_abs_diff(&ComplexMatrix::identity(u.rows()))
}

fn kraus_completeness_deviation(kraus: &[ComplexMatrix]) -> f64 {
    let d = kraus[0].cols();
    let mut sum = ComplexMatrix::zeros(d, d);
    for k in kraus {
        sum = &sum + &k.adjoint().matmul(k);
    }
    sum.max_abs_diff(&ComplexMatrix::identity(d))
}

impl QuantumChannel {
    /// Builds a channel from Kraus operators `K_k : ℂ^dim_in → ℂ^dim_out`.
    pub fn from_kraus(kraus: Vec<ComplexMatrix>) -> Result<Self, ChannelError> {
        let first = kraus.first().ok_or(ChannelError::EmptyKraus)?;
        let (dim_out, dim_in) = first.shape();
        if let Some(bad) = kraus.iter().find(|k| k.shape() != (dim_out, dim_in)) {
            return Err(ChannelError::DimensionMismatch(format!(
                "Kraus operators of shapes {dim_out}x{dim_in} and {}x{}",
                bad.rows(),
                bad.cols()
            )));
        }
        let deviation = kraus_completeness_deviation(&kraus);
        if deviation > TP_TOL {
            return Err(ChannelError::NotTracePreserving { deviation });
        }
        Ok(Self::from_kraus_unchecked(kraus))
    }

    fn from_kraus_unchecked(kraus: Vec<ComplexMatrix>) -> Self {
        let (dim_out, dim_in) = kraus[0].shape();
        let n = dim_in * dim_out;
        let mut choi = ComplexMatrix::zeros(n, n);
        let mut liouville = ComplexMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
        for k in &kraus {
            let w: Vec<C64> = (0..n).map(|idx| k[(idx % dim_out, idx / dim_out)]).collect();
            choi = &choi + &ComplexMatrix::outer(&w, &w);
            liouville = &liouville + &kron(&k.conj(), k);
        }
        Self { dim_in, dim_out, kraus, choi, liouville }
    }

    /// Recovers a Kraus set from a Choi matrix by scaled eigenvectors.
    pub fn from_choi(
        choi: &ComplexMatrix,
        dim_in: usize,
        dim_out: usize,
        repair: Repair,
    ) -> Result<Self, ChannelError> {
        let n = dim_in * dim_out;
        if choi.shape() != (n, n) {
            return Err(ChannelError::DimensionMismatch(format!(
                "Choi matrix is {}x{}, expected {n}x{n} for dims {dim_in} -> {dim_out}",
                choi.rows(),
                choi.cols()
            )));
        }
        let mut eig = hermitian_eig(choi)?;
        let min_eigenvalue = eig.eigenvalues[0];
        match repair {
            Repair::Reject => {
                if min_eigenvalue < -CP_TOL {
                    return Err(ChannelError::NotCompletelyPositive { min_eigenvalue });
                }
                let deviation = choi_tp_deviation(choi, dim_in, dim_out)?;
                if deviation > TP_TOL {
                    return Err(ChannelError::NotTracePreserving { deviation });
                }
            }
            Repair::Project => {
                let clamped = eig.apply_fn(|l| l.max(0.0));
                eig = hermitian_eig(&renormalize_trace(&clamped, dim_in, dim_out)?)?;
            }
        }
        let mut kraus = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate().rev() {
            if lambda <= KRAUS_DROP_TOL {
                continue;
            }
            let v = eig.eigenvector(k);
            let s = lambda.sqrt();
            kraus.push(ComplexMatrix::from_fn(dim_out, dim_in, |a, i| v[i * dim_out + a] * s));
        }
        if kraus.is_empty() {
            return Err(ChannelError::EmptyKraus);
        }
        let deviation = kraus_completeness_deviation(&kraus);
        if deviation > TP_TOL {
            return Err(ChannelError::NotTracePreserving { deviation });
        }
        Ok(Self::from_kraus_unchecked(kraus))
    }

    /// Channel from a Liouville matrix (`d_out² × d_in²`), via its Choi matrix.
    pub fn from_liouville(
        liouville: &ComplexMatrix,
        dim_in: usize,
        dim_out: usize,
        repair: Repair,
    ) -> Result<Self, ChannelError> {
        let choi = liouville_to_choi(liouville, dim_in, dim_out)?;
        Self::from_choi(&choi, dim_in, dim_out, repair)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn liouville(&self) -> &ComplexMatrix {
        &self.liouville
    }

    /// `Σ K X K†` on an arbitrary operator.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
        if x.shape() != (self.dim_in, self.dim_in) {
            return Err(ChannelError::DimensionMismatch(format!(
                "channel expects {0}x{0} input, got {1}x{2}",
                self.dim_in,
                x.rows(),
                x.cols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out = &out + &k.matmul(x).matmul(&k.adjoint());
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix, ChannelError> {
        DensityMatrix::new(self.apply_operator(rho.matrix())?)
    }

    /// Action through the Liouville matrix.
    pub fn apply_liouville(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let v = self.liouville.mul_vec(&x.vectorize());
        ComplexMatrix::unvectorize(&v, self.dim_out, self.dim_out)
    }

    /// Action through the Choi matrix: `Φ(X) = tr_in[(Xᵀ ⊗ I) J]`.
    pub fn apply_choi(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let lifted = kron(&x.transpose(), &ComplexMatrix::identity(self.dim_out)).matmul(&self.choi);
        partial_trace(&lifted, (self.dim_in, self.dim_out), Subsystem::A)
            .expect("Choi dims are consistent by construction")
    }

    /// Largest entrywise disagreement between the Kraus, Choi and Liouville
    /// actions over all matrix units.
    pub fn representation_mismatch(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim_in {
            for j in 0..self.dim_in {
                let e = ComplexMatrix::unit(self.dim_in, self.dim_in, i, j);
                let k = self.apply_operator(&e).expect("dims match");
                worst = worst.max(k.max_abs_diff(&self.apply_liouville(&e)));
                worst = worst.max(k.max_abs_diff(&self.apply_choi(&e)));
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Choi matrix.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        hermitian_eig(&self.choi).map(|e| e.eigenvalues[0]).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn tp_deviation(&self) -> f64 {
        kraus_completeness_deviation(&self.kraus)
    }

    /// `after ∘ before`.
    pub fn compose(after: &Self, before: &Self) -> Result<Self, ChannelError> {
        if before.dim_out != after.dim_in {
            return Err(ChannelError::DimensionMismatch(format!(
                "cannot compose: inner channel outputs dim {}, outer expects {}",
                before.dim_out, after.dim_in
            )));
        }
        let mut kraus = Vec::with_capacity(after.kraus.len() * before.kraus.len());
        for a in &after.kraus {
            for b in &before.kraus {
                kraus.push(a.matmul(b));
            }
        }
        Ok(Self::from_kraus_unchecked(kraus))
    }

    /// `self ∘ before`.
    pub fn after(&self, before: &Self) -> Result<Self, ChannelError> {
        Self::compose(self, before)
    }

    pub fn tensor(a: &Self, b: &Self) -> Self {
        let mut kraus = Vec::with_capacity(a.kraus.len() * b.kraus.len());
        for ka in &a.kraus {
            for kb in &b.kraus {
                kraus.push(kron(ka, kb));
            }
        }
        Self::from_kraus_unchecked(kraus)
    }

    /// Minimal Kraus set re-derived from the Choi matrix.
    pub fn canonicalize(&self) -> Result<Self, ChannelError> {
        Self::from_choi(&self.choi, self.dim_in, self.dim_out, Repair::Reject)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_kraus_unchecked(vec![ComplexMatrix::identity(dim)])
    }

    /// Conjugation `ρ ↦ U ρ U†`.
    pub fn unitary(u: &ComplexMatrix) -> Result<Self, ChannelError> {
        let deviation = unitarity_deviation(u);
        if deviation > HERMITIAN_TOL {
            return Err(ChannelError::NotUnitary { deviation });
        }
        Ok(Self::from_kraus_unchecked(vec![u.clone()]))
    }

    /// Isometric embedding `ρ ↦ V ρ V†` for `V†V = I`.
    pub fn isometry(v: &ComplexMatrix) -> Result<Self, ChannelError> {
        let deviation = v.adjoint().matmul(v).max_abs_diff(&ComplexMatrix::identity(v.cols()));
        if deviation > HERMITIAN_TOL {
            return Err(ChannelError::NotUnitary { deviation });
        }
        Ok(Self::from_kraus_unchecked(vec![v.clone()]))
    }

    pub fn bit_flip(q: f64) -> Result<Self, ChannelError> {
        check_probability("q", q)?;
        Ok(Self::from_kraus_unchecked(vec![
            ComplexMatrix::identity(2).scale_real((1.0 - q).sqrt()),
            paulis::x().scale_real(q.sqrt()),
        ]))
    }

    pub fn phase_flip(q: f64) -> Result<Self, ChannelError> {
        check_probability("q", q)?;
        Ok(Self::from_kraus_unchecked(vec![
            ComplexMatrix::identity(2).scale_real((1.0 - q).sqrt()),
            paulis::z().scale_real(q.sqrt()),
        ]))
    }

    /// `ρ ↦ (1 - p) ρ + p tr(ρ) I/d`.
    pub fn depolarizing(dim: usize, p: f64) -> Result<Self, ChannelError> {
        check_probability("p", p)?;
        let mut kraus = vec![ComplexMatrix::identity(dim).scale_real((1.0 - p).sqrt())];
        let w = (p / dim as f64).sqrt();
        for a in 0..dim {
            for b in 0..dim {
                kraus.push(ComplexMatrix::unit(dim, dim, a, b).scale_real(w));
            }
        }
        Ok(Self::from_kraus_unchecked(kraus))
    }

    /// `ρ ↦ tr(ρ) I/d`, with the `d²` rank-one Kraus operators `|a⟩⟨b|/√d`.
    pub fn completely_depolarizing(dim: usize) -> Self {
        let w = (1.0 / dim as f64).sqrt();
        let mut kraus = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                kraus.push(ComplexMatrix::unit(dim, dim, a, b).scale_real(w));
            }
        }
        Self::from_kraus_unchecked(kraus)
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self, ChannelError> {
        check_probability("gamma", gamma)?;
        let k0 = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]);
        let k1 = ComplexMatrix::from_real(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]);
        Ok(Self::from_kraus_unchecked(vec![k0, k1]))
    }

    /// `n` independent copies of `c`.
    pub fn iid_noise(c: &Self, n: usize) -> Self {
        assert!(n >= 1, "iid_noise needs at least one copy");
        (1..n).fold(c.clone(), |acc, _| Self::tensor(&acc, c))
    }
}

fn choi_tp_deviation(choi: &ComplexMatrix, dim_in: usize, dim_out: usize) -> Result<f64, ChannelError> {
    let t = partial_trace(choi, (dim_in, dim_out), Subsystem::B)?;
    Ok(t.max_abs_diff(&ComplexMatrix::identity(dim_in)))
}

fn renormalize_trace(choi: &ComplexMatrix, dim_in: usize, dim_out: usize) -> Result<ComplexMatrix, ChannelError> {
    let t = partial_trace(choi, (dim_in, dim_out), Subsystem::B)?;
    let eig = hermitian_eig(&t)?;
    if eig.eigenvalues[0] <= KRAUS_DROP_TOL {
        return Err(ChannelError::NotTracePreserving { deviation: 1.0 - eig.eigenvalues[0] });
    }
    let inv_sqrt = eig.apply_fn(|l| 1.0 / l.sqrt());
    let s = kron(&inv_sqrt.transpose(), &ComplexMatrix::identity(dim_out));
    Ok(s.matmul(choi).matmul(&s.adjoint()).hermitian_part())
}

/// Reshuffles a Liouville matrix into the Choi matrix of the same map.
pub fn liouville_to_choi(
    liouville: &ComplexMatrix,
    dim_in: usize,
    dim_out: usize,
) -> Result<ComplexMatrix, ChannelError> {
    if liouville.shape() != (dim_out * dim_out, dim_in * dim_in) {
        return Err(ChannelError::DimensionMismatch(format!(
            "Liouville matrix is {}x{}, expected {}x{}",
            liouville.rows(),
            liouville.cols(),
            dim_out * dim_out,
            dim_in * dim_in
        )));
    }
    let n = dim_in * dim_out;
    Ok(ComplexMatrix::from_fn(n, n, |r, s| {
        let (i, a) = (r / dim_out, r % dim_out);
        let (j, b) = (s / dim_out, s % dim_out);
        liouville[(a + b * dim_out, i + j * dim_in)]
    }))
}

/// Pauli matrices.
pub mod paulis {
    use super::*;

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn y() -> ComplexMatrix {
        let i = Complex64::new(0.0, 1.0);
        ComplexMatrix::new(2, 2, vec![c(0.0), -i, i, c(0.0)]).expect("2x2")
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }

    pub fn hadamard() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real(2, 2, &[s, s, s, -s])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (each within 1e-10).
    pub fn new(matrix: ComplexMatrix) -> Result<Self, ChannelError> {
        if !matrix.is_square() {
            return Err(ChannelError::InvalidDensity(format!("matrix is {}x{}", matrix.rows(), matrix.cols())));
        }
        let deviation = matrix.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(ChannelError::InvalidDensity(format!("not Hermitian (deviation {deviation:e})")));
        }
        let matrix = matrix.hermitian_part();
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(ChannelError::InvalidDensity(format!("trace is {tr}")));
        }
        let min = hermitian_eig(&matrix)?.eigenvalues[0];
        if min < -1e-10 {
            return Err(ChannelError::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[C64]) -> Result<Self, ChannelError> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(ChannelError::InvalidDensity("state vector has zero norm".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::outer(&v, &v))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        Self { matrix: ComplexMatrix::unit(dim, dim, k, k) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Weight outside the dominant eigenvector; zero for pure states.
    pub fn purity_rank_defect(&self) -> f64 {
        let eig = hermitian_eig(&self.matrix).expect("density matrices are Hermitian");
        eig.eigenvalues[..eig.eigenvalues.len() - 1].iter().map(|l| l.abs()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Povm {
    outcomes: Vec<String>,
    effects: Vec<ComplexMatrix>,
}

impl Povm {
    /// Validates that every effect is PSD (1e-10) and that they sum to identity (1e-9).
    pub fn new(outcomes: Vec<String>, effects: Vec<ComplexMatrix>) -> Result<Self, ChannelError> {
        if outcomes.len() != effects.len() || effects.is_empty() {
            return Err(ChannelError::InvalidPovm(format!("{} labels for {} effects", outcomes.len(), effects.len())));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = outcomes.iter().find(|o| !seen.insert(o.as_str())) {
            return Err(ChannelError::InvalidPovm(format!("duplicate outcome label {dup:?}")));
        }
        let d = effects[0].rows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for (label, e) in outcomes.iter().zip(&effects) {
            if e.shape() != (d, d) {
                return Err(ChannelError::InvalidPovm(format!("effect {label:?} has the wrong shape")));
            }
            let eig = hermitian_eig(e).map_err(|err| ChannelError::InvalidPovm(format!("effect {label:?}: {err}")))?;
            if eig.eigenvalues[0] < -1e-10 {
                return Err(ChannelError::InvalidPovm(format!(
                    "effect {label:?} has negative eigenvalue {:e}",
                    eig.eigenvalues[0]
                )));
            }
            sum = &sum + e;
        }
        let deviation = sum.max_abs_diff(&ComplexMatrix::identity(d));
        if deviation > 1e-9 {
            return Err(ChannelError::InvalidPovm(format!("effects sum to identity only within {deviation:e}")));
        }
        Ok(Self { outcomes, effects })
    }

    /// Projective measurement in the computational basis.
    pub fn computational(labels: Vec<String>) -> Result<Self, ChannelError> {
        let d = labels.len();
        let effects = (0..d).map(|k| ComplexMatrix::unit(d, d, k, k)).collect();
        Self::new(labels, effects)
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn effect(&self, label: &str) -> Option<&ComplexMatrix> {
        self.outcomes.iter().position(|o| o == label).map(|k| &self.effects[k])
    }
}

/// Principal square roots of the POVM effects, negative eigenvalues clamped to zero.
pub fn povm_sqrt(povm: &Povm) -> Result<Vec<ComplexMatrix>, ChannelError> {
    povm.effects
        .iter()
        .zip(&povm.outcomes)
        .map(|(e, label)| {
            let eig = hermitian_eig(e)?;
            if eig.eigenvalues[0] < -1e-10 {
                return Err(ChannelError::InvalidPovm(format!(
                    "effect {label:?} has negative eigenvalue {:e}",
                    eig.eigenvalues[0]
                )));
            }
            Ok(eig.apply_fn(|l| l.max(0.0).sqrt()))
        })
        .collect()
}

/// Encode/decode linking maps between logical and computational spaces.
#[derive(Debug, Clone)]
pub struct LinkingMapPair {
    encode: QuantumChannel,
    decode: QuantumChannel,
}

impl LinkingMapPair {
    pub fn new(encode: QuantumChannel, decode: QuantumChannel) -> Result<Self, ChannelError> {
        if encode.dim_out() != decode.dim_in() || encode.dim_in() != decode.dim_out() {
            return Err(ChannelError::DimensionMismatch(format!(
                "encode maps {} -> {}, decode maps {} -> {}",
                encode.dim_in(),
                encode.dim_out(),
                decode.dim_in(),
                decode.dim_out()
            )));
        }
        Ok(Self { encode, decode })
    }

    /// Identity links, `H_comp = H_logical`.
    pub fn trivial(dim: usize) -> Self {
        Self { encode: QuantumChannel::identity(dim), decode: QuantumChannel::identity(dim) }
    }

    /// Three-qubit bit-flip repetition code.
    ///
    /// Encoding is the isometry `|b⟩ ↦ |bbb⟩`. Decoding un-encodes with two
    /// CNOTs (control qubit 0), applies a Toffoli that flips qubit 0 when both
    /// syndrome qubits are set, and traces out the syndrome qubits.
    pub fn repetition_code() -> Self {
        let mut v = ComplexMatrix::zeros(8, 2);
        v[(0, 0)] = c(1.0);
        v[(7, 1)] = c(1.0);
        let encode = QuantumChannel::isometry(&v).expect("repetition encoder is an isometry");

        // bit order: qubit 0 is the most significant
        let mut kraus = vec![ComplexMatrix::zeros(2, 8); 4];
        for pattern in 0..8usize {
            let (a, b, cc) = ((pattern >> 2) & 1, (pattern >> 1) & 1, pattern & 1);
            let (s1, s2) = (a ^ b, a ^ cc);
            let logical = if s1 == 1 && s2 == 1 { a ^ 1 } else { a };
            kraus[s1 * 2 + s2][(logical, pattern)] = c(1.0);
        }
        let decode = QuantumChannel::from_kraus(kraus).expect("syndrome decoder is CPTP");
        Self { encode, decode }
    }

    pub fn encode(&self) -> &QuantumChannel {
        &self.encode
    }

    pub fn decode(&self) -> &QuantumChannel {
        &self.decode
    }

    pub fn dim_logical(&self) -> usize {
        self.encode.dim_in()
    }

    pub fn dim_comp(&self) -> usize {
        self.encode.dim_out()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
        let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let p = g.matmul(&g.adjoint());
        let t = p.trace().re;
        DensityMatrix::new(p.scale_real(1.0 / t)).unwrap()
    }

    fn assert_same_action(a: &QuantumChannel, b: &QuantumChannel, tol: f64) {
        assert_eq!((a.dim_in(), a.dim_out()), (b.dim_in(), b.dim_out()));
        assert!(a.liouville().max_abs_diff(b.liouville()) < tol, "Liouville mismatch");
    }

    fn check_invariants(ch: &QuantumChannel) {
        assert!(ch.tp_deviation() <= TP_TOL);
        assert!(ch.choi_min_eigenvalue() >= -CP_TOL);
        assert!(ch.representation_mismatch() < 1e-9);
    }

    #[test]
    fn from_kraus_examples() {
        let id = QuantumChannel::from_kraus(vec![ComplexMatrix::identity(2)]).unwrap();
        assert_same_action(&id, &QuantumChannel::identity(2), 1e-15);

        let q: f64 = 0.25;
        let bf = QuantumChannel::from_kraus(vec![
            ComplexMatrix::identity(2).scale_real((1.0 - q).sqrt()),
            paulis::x().scale_real(q.sqrt()),
        ])
        .unwrap();
        let eig = hermitian_eig(bf.choi()).unwrap().eigenvalues;
        let expected = [0.0, 0.0, 2.0 * q, 2.0 * (1.0 - q)];
        for (a, b) in eig.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{eig:?}");
        }

        let ad = QuantumChannel::amplitude_damping(1.0).unwrap();
        let rho = DensityMatrix::maximally_mixed(2);
        let out = ad.apply(&rho).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::unit(2, 2, 0, 0)) < 1e-15);
    }

    #[test]
    fn from_kraus_errors() {
        let err = QuantumChannel::from_kraus(vec![ComplexMatrix::identity(2).scale_real(0.5)]).unwrap_err();
        assert!(matches!(err, ChannelError::NotTracePreserving { deviation } if (deviation - 0.75).abs() < 1e-12));
        let err = QuantumChannel::from_kraus(vec![ComplexMatrix::identity(2), ComplexMatrix::identity(3)]).unwrap_err();
        assert!(matches!(err, ChannelError::DimensionMismatch(_)));
        assert!(matches!(QuantumChannel::from_kraus(vec![]), Err(ChannelError::EmptyKraus)));
    }

    #[test]
    fn choi_round_trips() {
        let id = QuantumChannel::from_choi(QuantumChannel::identity(2).choi(), 2, 2, Repair::Reject).unwrap();
        assert_eq!(id.kraus().len(), 1);
        let k = &id.kraus()[0];
        // global phase is arbitrary
        let phase = k[(0, 0)];
        assert!(k.max_abs_diff(&ComplexMatrix::identity(2).scale(phase)) < 1e-12);
        assert!((phase.norm() - 1.0).abs() < 1e-12);

        let dep =
            QuantumChannel::from_choi(QuantumChannel::completely_depolarizing(2).choi(), 2, 2, Repair::Reject).unwrap();
        assert_eq!(dep.kraus().len(), 4);
        for k in dep.kraus() {
            let sv = crate::linalg::singular_values(k);
            assert!(sv[1] < 1e-10, "Kraus operator should be rank one: {sv:?}");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let original = QuantumChannel::compose(
                &QuantumChannel::amplitude_damping(rng.random()).unwrap(),
                &QuantumChannel::depolarizing(2, rng.random()).unwrap(),
            )
            .unwrap();
            let back = original.canonicalize().unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let e = ComplexMatrix::unit(2, 2, i, j);
                    let diff = original.apply_operator(&e).unwrap().max_abs_diff(&back.apply_operator(&e).unwrap());
                    assert!(diff < 1e-9);
                }
            }
        }
    }

    #[test]
    fn from_choi_rejects_and_repairs() {
        let mut bad = QuantumChannel::identity(2).choi().clone();
        bad[(1, 1)] = c(-1e-6);
        bad[(2, 2)] = c(1e-6);
        let err = QuantumChannel::from_choi(&bad, 2, 2, Repair::Reject).unwrap_err();
        assert!(matches!(err, ChannelError::NotCompletelyPositive { .. }));
        let repaired = QuantumChannel::from_choi(&bad, 2, 2, Repair::Project).unwrap();
        check_invariants(&repaired);

        let not_tp = QuantumChannel::identity(2).choi().scale_real(0.9);
        let err = QuantumChannel::from_choi(&not_tp, 2, 2, Repair::Reject).unwrap_err();
        assert!(matches!(err, ChannelError::NotTracePreserving { .. }));
        let repaired = QuantumChannel::from_choi(&not_tp, 2, 2, Repair::Project).unwrap();
        assert_same_action(&repaired, &QuantumChannel::identity(2), 1e-12);
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(&mut rng, 2);
        assert!(QuantumChannel::identity(2).apply(&rho).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let out = QuantumChannel::completely_depolarizing(2).apply(&rho).unwrap();
        assert!(out.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
        let q = 0.3;
        let out = QuantumChannel::bit_flip(q).unwrap().apply(&DensityMatrix::basis(2, 0)).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::from_real_diag(&[1.0 - q, q])) < 1e-15);
        let err = QuantumChannel::identity(3).apply(&rho).unwrap_err();
        assert!(matches!(err, ChannelError::DimensionMismatch(_)));
    }

    #[test]
    fn compose_examples() {
        let bf = QuantumChannel::bit_flip(0.2).unwrap();
        assert_same_action(&QuantumChannel::compose(&QuantumChannel::identity(2), &bf).unwrap(), &bf, 1e-12);
        let (q1, q2) = (0.1, 0.35);
        let composed =
            QuantumChannel::compose(&QuantumChannel::bit_flip(q1).unwrap(), &QuantumChannel::bit_flip(q2).unwrap())
                .unwrap();
        let expected = QuantumChannel::bit_flip(q1 + q2 - 2.0 * q1 * q2).unwrap();
        assert_same_action(&composed, &expected, 1e-12);
        assert!(QuantumChannel::compose(&QuantumChannel::identity(3), &bf).is_err());
    }

    #[test]
    fn compose_matches_triple_application() {
        let links = LinkingMapPair::repetition_code();
        let noise = QuantumChannel::iid_noise(&QuantumChannel::depolarizing(2, 0.07).unwrap(), 3);
        let dressed = links.decode().after(&noise.after(links.encode()).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = ComplexMatrix::unit(2, 2, i, j);
                let direct = links
                    .decode()
                    .apply_operator(&noise.apply_operator(&links.encode().apply_operator(&e).unwrap()).unwrap())
                    .unwrap();
                assert!(dressed.apply_operator(&e).unwrap().max_abs_diff(&direct) < 1e-12);
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let id4 = QuantumChannel::tensor(&QuantumChannel::identity(2), &QuantumChannel::identity(2));
        assert_same_action(&id4, &QuantumChannel::identity(4), 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (rho, sigma) = (random_density(&mut rng, 2), random_density(&mut rng, 2));
        let bf = QuantumChannel::bit_flip(0.3).unwrap();
        let t = QuantumChannel::tensor(&bf, &QuantumChannel::identity(2));
        let out = t.apply_operator(&kron(rho.matrix(), sigma.matrix())).unwrap();
        let expected = kron(bf.apply(&rho).unwrap().matrix(), sigma.matrix());
        assert!(out.max_abs_diff(&expected) < 1e-14);

        let three = QuantumChannel::tensor(&QuantumChannel::tensor(&bf, &bf), &bf);
        assert_same_action(&three, &QuantumChannel::iid_noise(&bf, 3), 1e-12);
    }

    #[test]
    fn builder_examples_and_errors() {
        assert_same_action(
            &QuantumChannel::unitary(&ComplexMatrix::identity(2)).unwrap(),
            &QuantumChannel::identity(2),
            1e-15,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = random_density(&mut rng, 2);
        let out = QuantumChannel::depolarizing(2, 1.0).unwrap().apply(&rho).unwrap();
        assert!(out.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
        let g = 0.37;
        let out = QuantumChannel::amplitude_damping(g).unwrap().apply(&DensityMatrix::basis(2, 1)).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::from_real_diag(&[g, 1.0 - g])) < 1e-15);

        assert!(matches!(QuantumChannel::bit_flip(1.5), Err(ChannelError::ParameterOutOfRange { name: "q", .. })));
        assert!(QuantumChannel::phase_flip(-0.1).is_err());
        assert!(QuantumChannel::depolarizing(2, 2.0).is_err());
        assert!(QuantumChannel::amplitude_damping(-1.0).is_err());
        let err = QuantumChannel::unitary(&ComplexMatrix::from_real_diag(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, ChannelError::NotUnitary { .. }));
    }

    #[test]
    fn builders_preserve_density_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let p: f64 = rng.random();
            let channels = [
                QuantumChannel::bit_flip(p).unwrap(),
                QuantumChannel::phase_flip(p).unwrap(),
                QuantumChannel::depolarizing(2, p).unwrap(),
                QuantumChannel::amplitude_damping(p).unwrap(),
                QuantumChannel::completely_depolarizing(2),
            ];
            let rho = random_density(&mut rng, 2);
            for ch in &channels {
                ch.apply(&rho).expect("output must be a density matrix");
            }
        }
    }

    #[test]
    fn every_builder_satisfies_channel_invariants() {
        let links = LinkingMapPair::repetition_code();
        let channels = [
            QuantumChannel::identity(3),
            QuantumChannel::unitary(&paulis::hadamard()).unwrap(),
            QuantumChannel::bit_flip(0.2).unwrap(),
            QuantumChannel::phase_flip(0.6).unwrap(),
            QuantumChannel::depolarizing(3, 0.4).unwrap(),
            QuantumChannel::completely_depolarizing(3),
            QuantumChannel::amplitude_damping(0.8).unwrap(),
            QuantumChannel::iid_noise(&QuantumChannel::amplitude_damping(0.1).unwrap(), 2),
            links.encode().clone(),
            links.decode().clone(),
        ];
        for ch in &channels {
            check_invariants(ch);
        }
    }

    #[test]
    fn repetition_code_round_trip_and_logical_error() {
        let links = LinkingMapPair::repetition_code();
        let round_trip = links.decode().after(links.encode()).unwrap();
        assert_same_action(&round_trip, &QuantumChannel::identity(2), 1e-12);

        for q in [0.0, 0.1, 0.25, 0.5] {
            let noise = QuantumChannel::iid_noise(&QuantumChannel::bit_flip(q).unwrap(), 3);
            let dressed = links.decode().after(&noise.after(links.encode()).unwrap()).unwrap();
            let out = dressed.apply(&DensityMatrix::basis(2, 0)).unwrap();
            // majority vote fails iff at least two of the three bits flip
            let f = (0..8u32)
                .filter(|p| p.count_ones() >= 2)
                .map(|p| q.powi(p.count_ones() as i32) * (1.0 - q).powi(3 - p.count_ones() as i32))
                .sum::<f64>();
            assert!((f - (3.0 * q * q - 2.0 * q * q * q)).abs() < 1e-15);
            assert!(out.matrix().max_abs_diff(&ComplexMatrix::from_real_diag(&[1.0 - f, f])) < 1e-12);
        }
    }

    #[test]
    fn linking_pair_dimension_check() {
        let err = LinkingMapPair::new(QuantumChannel::identity(2), QuantumChannel::identity(3)).unwrap_err();
        assert!(matches!(err, ChannelError::DimensionMismatch(_)));
    }

    #[test]
    fn povm_sqrt_examples() {
        let proj = Povm::computational(vec!["0".into(), "1".into()]).unwrap();
        for (s, e) in povm_sqrt(&proj).unwrap().iter().zip(proj.effects()) {
            assert!(s.max_abs_diff(e) < 1e-15);
        }
        let povm = Povm::new(
            vec!["a".into(), "b".into()],
            vec![ComplexMatrix::from_real_diag(&[0.25, 1.0]), ComplexMatrix::from_real_diag(&[0.75, 0.0])],
        )
        .unwrap();
        let roots = povm_sqrt(&povm).unwrap();
        assert!(roots[0].max_abs_diff(&ComplexMatrix::from_real_diag(&[0.5, 1.0])) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 3).matrix().clone();
            let rest = &ComplexMatrix::identity(3) - &rho;
            let povm = Povm::new(vec!["r".into(), "rest".into()], vec![rho.clone(), rest]).unwrap();
            let root = &povm_sqrt(&povm).unwrap()[0];
            assert!(root.matmul(root).max_abs_diff(&rho) < 1e-9);
        }
    }

    #[test]
    fn povm_validation() {
        let err = Povm::new(vec!["a".into()], vec![ComplexMatrix::from_real_diag(&[1.0, 0.5])]).unwrap_err();
        assert!(matches!(err, ChannelError::InvalidPovm(_)));
        let err = Povm::new(
            vec!["a".into(), "b".into()],
            vec![ComplexMatrix::from_real_diag(&[1.5, 1.0]), ComplexMatrix::from_real_diag(&[-0.5, 0.0])],
        )
        .unwrap_err();
        assert!(matches!(err, ChannelError::InvalidPovm(m) if m.contains("negative")));
        assert!(Povm::new(vec!["a".into(), "a".into()], vec![ComplexMatrix::identity(1); 2]).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diag(&[0.5, 0.6])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_real_diag(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_real(2, 2, &[0.5, 0.5, 0.0, 0.5])).is_err());
        let psi = DensityMatrix::pure(&[c(1.0), c(1.0)]).unwrap();
        assert!(psi.purity_rank_defect() < 1e-12);
        assert!(DensityMatrix::pure(&[c(0.0), c(0.0)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn qubit_channel() -> impl Strategy<Value = QuantumChannel> {
            (0usize..5, 0.0f64..1.0).prop_map(|(kind, p)| match kind {
                0 => QuantumChannel::bit_flip(p).unwrap(),
                1 => QuantumChannel::phase_flip(p).unwrap(),
                2 => QuantumChannel::depolarizing(2, p).unwrap(),
                3 => QuantumChannel::amplitude_damping(p).unwrap(),
                _ => {
                    let u = crate::linalg::matrix_exp(&paulis::y().scale(C64::new(0.0, p * 3.0))).unwrap();
                    QuantumChannel::unitary(&u).unwrap()
                }
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn compose_associative(a in qubit_channel(), b in qubit_channel(), d in qubit_channel()) {
                let left = QuantumChannel::compose(&QuantumChannel::compose(&a, &b).unwrap(), &d).unwrap();
                let right = QuantumChannel::compose(&a, &QuantumChannel::compose(&b, &d).unwrap()).unwrap();
                prop_assert!(left.liouville().max_abs_diff(right.liouville()) < 1e-11);
            }

            #[test]
            fn interchange_law(a in qubit_channel(), b in qubit_channel(), cc in qubit_channel(), d in qubit_channel()) {
                let lhs = QuantumChannel::compose(&QuantumChannel::tensor(&a, &b), &QuantumChannel::tensor(&cc, &d)).unwrap();
                let rhs = QuantumChannel::tensor(&QuantumChannel::compose(&a, &cc).unwrap(), &QuantumChannel::compose(&b, &d).unwrap());
                prop_assert!(lhs.liouville().max_abs_diff(rhs.liouville()) < 1e-11);
            }

            #[test]
            fn representations_agree(a in qubit_channel(), b in qubit_channel()) {
                let t = QuantumChannel::tensor(&a, &b);
                prop_assert!(t.representation_mismatch() < 1e-9);
                prop_assert!(t.choi_min_eigenvalue() >= -CP_TOL);
                prop_assert!(t.tp_deviation() <= TP_TOL);
            }
        }
    }
}
