//! Complex-Gaussian calculus for coupled increments: block covariances,
//! Hellinger and total-variation bounds, Schur determinant ratios and the
//! spectral regularization of nearly singular increment covariances.

use std::f64::consts::SQRT_2;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Error, Result};
use crate::estimate::MomentAccumulator;
use crate::linalg::{hermitian_defect, hermitian_eigen, inverse_hpd, log_det_hpd, max_abs, CMatrix};
use crate::noise::NoiseStream;
use crate::params::BetaParams;
use crate::sde::sine_step;

/// File signature of the binary block-covariance layout.
pub const BINARY_MAGIC: &[u8; 8] = b"SBHBCOV1";

/// Block-diagonal Hermitian positive semi-definite covariance, one `m × m`
/// block per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianBlockCov {
    m: usize,
    blocks: Vec<CMatrix>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl HermitianBlockCov {
    pub fn new(blocks: Vec<CMatrix>) -> Result<Self> {
        let m = blocks.first().map_or(0, |b| b.nrows());
        if m == 0 {
            return Err(invalid("need at least one non-empty block"));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != m || b.ncols() != m {
                return Err(invalid(format!("block {i} is not {m}x{m}")));
            }
            let scale = max_abs(b).max(1.0);
            if hermitian_defect(b) > 1e-12 * scale {
                return Err(invalid(format!("block {i} is not Hermitian")));
            }
            let (vals, _) = hermitian_eigen(b)?;
            if vals.last().copied().unwrap_or(0.0) < -1e-10 * scale {
                return Err(invalid(format!("block {i} has a negative eigenvalue {}", vals[m - 1])));
            }
        }
        Ok(Self { m, blocks })
    }

    /// Per-step covariances `[[2δ, κ_j], [conj κ_j, 2δ]]` of two coupled
    /// complex Brownian increments.
    pub fn coupled_pair(delta: f64, kappas: &[Complex64]) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("delta must be positive"));
        }
        let d = c(2.0 * delta, 0.0);
        Self::new(kappas.iter().map(|k| CMatrix::from_row_slice(2, 2, &[d, *k, k.conj(), d])).collect())
    }

    /// `n` blocks `2δ I_m` of independent increments.
    pub fn independent(delta: f64, m: usize, n: usize) -> Result<Self> {
        Self::new(vec![CMatrix::identity(m, m) * c(2.0 * delta, 0.0); n])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// The full block-diagonal matrix.
    pub fn stacked(&self) -> CMatrix {
        let n = self.m * self.blocks.len();
        let mut out = CMatrix::zeros(n, n);
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((i * self.m, i * self.m), (self.m, self.m)).copy_from(b);
        }
        out
    }

    /// Header `magic, m (u64 LE), n_blocks (u64 LE)`, then each block
    /// column-major as interleaved little-endian `f64` re/im pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.m as u64).to_le_bytes())?;
        w.write_all(&(self.blocks.len() as u64).to_le_bytes())?;
        for b in &self.blocks {
            for z in b.iter() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        let mut word = [0u8; 8];
        let fmt = |e: std::io::Error| Error::Format(e.to_string());
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        r.read_exact(&mut word).map_err(fmt)?;
        let m = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(fmt)?;
        let n = u64::from_le_bytes(word) as usize;
        if m == 0 || m > 4096 || n > 1 << 24 {
            return Err(Error::Format(format!("implausible header m = {m}, n_blocks = {n}")));
        }
        let mut blocks = Vec::with_capacity(n);
        for _ in 0..n {
            let mut data = Vec::with_capacity(m * m);
            for _ in 0..m * m {
                r.read_exact(&mut word).map_err(fmt)?;
                let re = f64::from_le_bytes(word);
                r.read_exact(&mut word).map_err(fmt)?;
                data.push(c(re, f64::from_le_bytes(word)));
            }
            blocks.push(CMatrix::from_vec(m, m, data));
        }
        Self::new(blocks)
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_binary(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(io_err(path))?;
        Self::read_binary(std::io::BufReader::new(f))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&BlockCovJson::from(self)).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: BlockCovJson = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        let blocks = j
            .blocks
            .into_iter()
            .map(|rows| {
                if rows.len() != j.m || rows.iter().any(|r| r.len() != j.m) {
                    return Err(Error::Format("block shape does not match m".into()));
                }
                Ok(CMatrix::from_fn(j.m, j.m, |i, k| c(rows[i][k][0], rows[i][k][1])))
            })
            .collect::<Result<_>>()?;
        Self::new(blocks)
    }
}

/// JSON shape: `{"m": 2, "blocks": [[[[re, im], ...row...], ...rows...], ...]}`.
#[derive(Serialize, Deserialize)]
struct BlockCovJson {
    m: usize,
    blocks: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&HermitianBlockCov> for BlockCovJson {
    fn from(b: &HermitianBlockCov) -> Self {
        Self {
            m: b.m,
            blocks: b
                .blocks
                .iter()
                .map(|blk| (0..b.m).map(|i| (0..b.m).map(|k| [blk[(i, k)].re, blk[(i, k)].im]).collect()).collect())
                .collect(),
        }
    }
}

fn check_conformable(x: &HermitianBlockCov, y: &HermitianBlockCov) -> Result<()> {
    if x.m != y.m || x.blocks.len() != y.blocks.len() {
        return Err(invalid("block covariances are not conformable"));
    }
    Ok(())
}

/// `ln` of the Hellinger affinity `det X^{1/2} det Y^{1/2} / det((X+Y)/2)`
/// summed over blocks.
pub fn log_hellinger_affinity(x: &HermitianBlockCov, y: &HermitianBlockCov) -> Result<f64> {
    check_conformable(x, y)?;
    let mut acc = 0.0;
    for (bx, by) in x.blocks.iter().zip(&y.blocks) {
        let mid = (bx + by) * c(0.5, 0.0);
        acc += 0.5 * log_det_hpd(bx)? + 0.5 * log_det_hpd(by)? - log_det_hpd(&mid)?;
    }
    Ok(acc.min(0.0))
}

/// Hellinger distance between centred circular complex Gaussians with the
/// given block covariances.
pub fn hellinger_complex_gaussian(x: &HermitianBlockCov, y: &HermitianBlockCov) -> Result<f64> {
    Ok((-log_hellinger_affinity(x, y)?.exp_m1()).max(0.0).sqrt())
}

/// `√2 H`, an upper bound on the total-variation distance.
pub fn tv_upper_bound(x: &HermitianBlockCov, y: &HermitianBlockCov) -> Result<f64> {
    Ok(SQRT_2 * hellinger_complex_gaussian(x, y)?)
}

/// Closed form of the Hellinger distance between coupled pairs
/// `[[2δ, κ_j], [conj κ_j, 2δ]]` and independent pairs `2δ I`:
/// `H² = 1 - Π_j sqrt(1 - |κ_j|²/4δ²) / (1 - |κ_j|²/16δ²)`.
pub fn hellinger_coupled_pair(delta: f64, kappas: &[Complex64]) -> Result<f64> {
    let mut log_aff = 0.0;
    for k in kappas {
        let x = k.norm_sqr() / (4.0 * delta * delta);
        if x >= 1.0 {
            return Err(Error::DegenerateCovariance(format!("|kappa| = {} reaches 2 delta", k.norm())));
        }
        log_aff += 0.5 * (-x).ln_1p() - (-x / 4.0).ln_1p();
    }
    Ok((-log_aff.exp_m1()).max(0.0).sqrt())
}

/// Constant of the small-coupling estimate `H <= C sqrt(Σ|κ_j|²) / δ`, valid
/// whenever every `|κ_j| <= δ`.
///
/// With `x = |κ|²/4δ² <= 1/4` one has `1 - sqrt(1-x)/(1-x/4) <= x/2`, and
/// `1 - Π(1 - a_j) <= Σ a_j`, so `H² <= Σ|κ_j|²/(8δ²)`.
pub const SMALL_COUPLING_CONSTANT: f64 = 0.353_553_390_593_273_8; // 1/(2√2)

pub fn small_coupling_bound(delta: f64, kappas: &[Complex64]) -> f64 {
    SMALL_COUPLING_CONSTANT * kappas.iter().map(|k| k.norm_sqr()).sum::<f64>().sqrt() / delta
}

/// `C n^{3/2} e^{βT/4} / r`, the total-variation bound for `n` coupled steps
/// up to time `T` at separation `r`.
pub fn tv_lemma_bound(constant: f64, n: usize, t_end: f64, r: f64, beta: f64) -> f64 {
    constant * (n as f64).powf(1.5) * (beta * t_end / 4.0).exp() / r
}

/// Schur-complement determinant ratio of a coupled block matrix against its
/// block-diagonal part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminantRatio {
    /// `det K / det L = det(I - M2⁻¹ κᴴ M1⁻¹ κ)`.
    pub ratio: f64,
    /// `Tr(M2⁻¹ κᴴ M1⁻¹ κ)`.
    pub trace: f64,
    /// `trace < 1`; otherwise the sandwich `1 - trace <= ratio <= 1` carries
    /// no information and total variation is bounded by 2 instead.
    pub applicable: bool,
}

/// Compare `K = [[M1, κ], [κᴴ, M2]]` with `L = diag(M1, M2)`, where `M1` is
/// the leading `m1 × m1` block.
pub fn determinant_ratio_bounds(k: &CMatrix, l: &CMatrix, m1: usize) -> Result<DeterminantRatio> {
    let n = k.nrows();
    if k.shape() != l.shape() || n != k.ncols() || m1 == 0 || m1 >= n {
        return Err(invalid("K and L must be square of equal size with 0 < m1 < n"));
    }
    let m2 = n - m1;
    let scale = max_abs(l).max(1.0);
    if max_abs(&l.view((0, m1), (m1, m2)).into_owned()) > 1e-12 * scale {
        return Err(invalid("L must be block diagonal"));
    }
    let b1 = l.view((0, 0), (m1, m1)).into_owned();
    let b2 = l.view((m1, m1), (m2, m2)).into_owned();
    if max_abs(&(k.view((0, 0), (m1, m1)) - &b1)) > 1e-12 * scale
        || max_abs(&(k.view((m1, m1), (m2, m2)) - &b2)) > 1e-12 * scale
    {
        return Err(invalid("diagonal blocks of K and L differ"));
    }
    let kappa = k.view((0, m1), (m1, m2)).into_owned();
    let p = inverse_hpd(&b2)? * kappa.adjoint() * inverse_hpd(&b1)? * &kappa;
    let trace = p.trace().re;
    let ratio = (CMatrix::identity(m2, m2) - p).determinant().re;
    Ok(DeterminantRatio { ratio, trace, applicable: trace < 1.0 })
}

/// Spectrally regularized increments of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedIncrements {
    pub epsilon: f64,
    /// Eigenvalues of the spatial covariance, descending, negatives clipped.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, in the same order.
    pub unitary: CMatrix,
    /// Number of kept modes (eigenvalue above `epsilon`).
    pub cutoff: usize,
    /// Whether negative eigenvalues had to be clipped to zero.
    pub clipped: bool,
    /// Regularized increments, one vector per input sample.
    pub samples: Vec<Vec<Complex64>>,
}

impl RegularizedIncrements {
    /// Orthogonal projector onto the kept modes.
    pub fn projector(&self) -> CMatrix {
        let u = self.unitary.columns(0, self.cutoff);
        u * u.adjoint()
    }

    /// Covariance of the regularized increments: kept eigenvalues unchanged,
    /// discarded ones replaced by `epsilon`.
    pub fn covariance(&self) -> CMatrix {
        let d: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, l)| c(if i < self.cutoff { *l } else { self.epsilon }, 0.0))
            .collect();
        &self.unitary * CMatrix::from_diagonal(&DVector::from_vec(d)) * self.unitary.adjoint()
    }

    /// `E‖ΔW - ΔZ‖² = Σ_{discarded} (λ_l + ε)`.
    pub fn expected_sq_gap(&self) -> f64 {
        self.eigenvalues[self.cutoff..].iter().map(|l| l + self.epsilon).sum()
    }
}

/// Default threshold `1 / (2 k n²)` for `k` points and `n` time steps.
pub fn default_epsilon(k: usize, n: usize) -> f64 {
    1.0 / (2.0 * k as f64 * (n as f64).powi(2))
}

/// Where the spatial covariance of the raw increments comes from.
#[derive(Clone, Debug)]
pub enum CovarianceSource<'a> {
    Known(&'a CMatrix),
    /// `(1/N) Σ w wᴴ` over the raw samples (mean zero by construction).
    Empirical,
}

/// Keep eigen-coordinates above `epsilon` and replace the others by fresh
/// circular complex Gaussians of variance `epsilon` drawn from `seed`.
pub fn spectral_regularize(
    raw: &[Vec<Complex64>],
    source: CovarianceSource<'_>,
    epsilon: f64,
    seed: u64,
) -> Result<RegularizedIncrements> {
    let k = raw.first().map_or(0, Vec::len);
    if k == 0 || raw.iter().any(|w| w.len() != k) {
        return Err(invalid("raw increments must be non-empty vectors of equal length"));
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let cov = match source {
        CovarianceSource::Known(m) => {
            if m.nrows() != k || m.ncols() != k {
                return Err(invalid("covariance does not match the increment dimension"));
            }
            m.clone()
        }
        CovarianceSource::Empirical => {
            let mut m = CMatrix::zeros(k, k);
            for w in raw {
                let v = DVector::from_column_slice(w);
                m += &v * v.adjoint();
            }
            let mut m = m / c(raw.len() as f64, 0.0);
            m = (&m + m.adjoint()) * c(0.5, 0.0);
            m
        }
    };
    let (mut vals, u) = hermitian_eigen(&cov)?;
    let clipped = vals.iter().any(|v| *v < 0.0);
    vals.iter_mut().for_each(|v| *v = v.max(0.0));
    let cutoff = vals.iter().take_while(|v| **v > epsilon).count();
    let uh = u.adjoint();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (epsilon / 2.0).sqrt();
    let samples = raw
        .iter()
        .map(|w| {
            let mut y = &uh * DVector::from_column_slice(w);
            for l in cutoff..k {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                y[l] = c(sd * a, sd * b);
            }
            (&u * y).iter().copied().collect()
        })
        .collect();
    Ok(RegularizedIncrements { epsilon, eigenvalues: vals, unitary: u, cutoff, clipped, samples })
}

/// Cross-covariance of two regularized clusters whose raw increments have
/// cross-covariance `c12`: `P1 c12 P2` with the kept-mode projectors.
pub fn regularized_cross_covariance(
    first: &RegularizedIncrements,
    second: &RegularizedIncrements,
    c12: &CMatrix,
) -> CMatrix {
    first.projector() * c12 * second.projector()
}

/// Per-step coupling estimate `κ_j` with standard errors of its real and
/// imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub t0: f64,
    pub t1: f64,
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl KappaEstimate {
    /// Standard error of `|value|` by the delta method.
    pub fn se_abs(&self) -> f64 {
        let a = self.value.norm();
        if a == 0.0 {
            return self.se_re.hypot(self.se_im);
        }
        ((self.value.re * self.se_re).powi(2) + (self.value.im * self.se_im).powi(2)).sqrt() / a
    }
}

/// Monte Carlo estimate of `κ_j = 2 E ∫_{t_j}^{t_{j+1}} exp(i(α_b - α_a)) du`
/// with `a = x_1` and `b = x_2 + r` on shared noise; this is the covariance
/// `E[ΔW^(1) conj(ΔW^(2))]` of the noises driving the two difference
/// diffusions. Each grid interval is resolved with sub-steps no longer than
/// `max_substep` (default step for the span when `None`); the step integral
/// uses the trapezoid rule along each path.
pub fn increment_covariance(
    params: &BetaParams,
    r: f64,
    x_shifts: (f64, f64),
    grid: &[f64],
    n_mc: u64,
    seed0: u64,
    max_substep: Option<f64>,
) -> Result<Vec<KappaEstimate>> {
    if !(r >= 0.0) || grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 {
        return Err(invalid("need r >= 0 and an increasing grid starting at t >= 0"));
    }
    if n_mc < 2 {
        return Err(invalid("need at least two Monte Carlo paths"));
    }
    let (a, b) = (x_shifts.0, x_shifts.1 + r);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let sign = if a <= b { 1.0 } else { -1.0 };
    let h_max = max_substep.unwrap_or_else(|| BetaParams::default_step(lo.abs().max(hi.abs())));
    // Sub-step layout from 0 to the end of the grid.
    let mut edges = vec![0.0];
    let mut marks = Vec::with_capacity(grid.len());
    let mut prev = 0.0;
    for &t in grid {
        if t > prev {
            let n = ((t - prev) / h_max).ceil() as usize;
            let h = (t - prev) / n as f64;
            for i in 1..=n {
                edges.push(if i == n { t } else { prev + h * i as f64 });
            }
        }
        marks.push(edges.len() - 1);
        prev = t;
    }
    let steps = edges.len() - 1;
    let masses: Vec<f64> = edges.windows(2).map(|w| params.drift_mass_between(w[0], w[1])).collect();
    let roots: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let n_out = grid.len() - 1;
    let per_chunk = crate::parallel::map_chunks(0..n_mc, 0, |range| {
        let mut accs = vec![MomentAccumulator::new(2); n_out];
        for i in range {
            let mut unit = NoiseStream::new(seed0 ^ i, 1.0);
            let (mut al, mut ah) = (0.0f64, 0.0f64);
            let mut vals = vec![Complex64::new(0.0, 0.0); n_out];
            let mut phase_prev = Complex64::new(1.0, 0.0);
            let mut seg = 0;
            for s in 0..steps {
                let dw = unit.next_increment() * roots[s];
                al = sine_step(al, lo * masses[s], dw);
                ah = sine_step(ah, hi * masses[s], dw);
                let phase = Complex64::from_polar(1.0, sign * (ah - al));
                while seg < n_out && marks[seg + 1] <= s {
                    seg += 1;
                }
                if s >= marks[0] && seg < n_out {
                    vals[seg] += (phase_prev + phase) * (edges[s + 1] - edges[s]);
                }
                phase_prev = phase;
                if !(al.is_finite() && ah.is_finite()) {
                    return Err(Error::NumericalFailure { step: s, seed: seed0 ^ i, lambda: hi });
                }
            }
            for (acc, v) in accs.iter_mut().zip(&vals) {
                acc.push(&[v.re, v.im]);
            }
        }
        Ok(accs)
    })?;
    let mut accs = vec![MomentAccumulator::new(2); n_out];
    for chunk in per_chunk {
        for (a, b) in accs.iter_mut().zip(&chunk) {
            *a = a.merge(b);
        }
    }
    Ok(accs
        .iter()
        .enumerate()
        .map(|(j, acc)| KappaEstimate {
            t0: grid[j],
            t1: grid[j + 1],
            value: Complex64::new(acc.mean()[0], acc.mean()[1]),
            se_re: acc.std_err(0),
            se_im: acc.std_err(1),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_laws_have_zero_distance() {
        let x = HermitianBlockCov::coupled_pair(0.1, &[c(0.05, 0.01), c(-0.02, 0.0)]).unwrap();
        assert_eq!(hellinger_complex_gaussian(&x, &x).unwrap(), 0.0);
        assert_eq!(tv_upper_bound(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn determinant_form_matches_closed_form() {
        let kap = [c(0.05, 0.0), c(0.01, -0.03), c(0.0, 0.07)];
        let x = HermitianBlockCov::coupled_pair(0.1, &kap).unwrap();
        let y = HermitianBlockCov::independent(0.1, 2, 3).unwrap();
        let h = hellinger_complex_gaussian(&x, &y).unwrap();
        assert!((h - hellinger_coupled_pair(0.1, &kap).unwrap()).abs() < 1e-12);
        assert!(h <= small_coupling_bound(0.1, &kap));
    }

    #[test]
    fn rejects_non_hermitian_and_indefinite() {
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.4, 0.0), c(1.0, 0.0)]);
        assert!(HermitianBlockCov::new(vec![bad]).is_err());
        let ind = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(HermitianBlockCov::new(vec![ind]).is_err());
    }

    #[test]
    fn singular_mean_is_degenerate() {
        let z = CMatrix::zeros(2, 2);
        let x = HermitianBlockCov::new(vec![z.clone()]).unwrap();
        assert!(matches!(hellinger_complex_gaussian(&x, &x), Err(Error::DegenerateCovariance(_))));
    }

    #[test]
    fn binary_and_json_round_trip() {
        let x = HermitianBlockCov::coupled_pair(0.25, &[c(0.1, -0.2), c(0.0, 0.3)]).unwrap();
        let mut buf = Vec::new();
        x.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], BINARY_MAGIC);
        assert_eq!(buf.len(), 24 + 2 * 4 * 16);
        assert_eq!(HermitianBlockCov::read_binary(&buf[..]).unwrap(), x);
        assert_eq!(HermitianBlockCov::from_json(&x.to_json().unwrap()).unwrap(), x);
        buf[0] = b'X';
        assert!(HermitianBlockCov::read_binary(&buf[..]).is_err());
    }

    #[test]
    fn zero_coupling_ratio() {
        let m1 = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.3, 0.1), c(0.3, -0.1), c(1.0, 0.0)]);
        let mut l = CMatrix::zeros(3, 3);
        l.view_mut((0, 0), (2, 2)).copy_from(&m1);
        l[(2, 2)] = c(1.5, 0.0);
        let d = determinant_ratio_bounds(&l, &l, 2).unwrap();
        assert!((d.ratio - 1.0).abs() < 1e-14);
        assert_eq!(d.trace, 0.0);
        assert!(d.applicable);
    }

    #[test]
    fn regularization_without_small_modes_is_identity() {
        let raw = vec![vec![c(0.3, 0.1), c(-0.2, 0.4)], vec![c(0.1, -0.5), c(0.6, 0.2)]];
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.0), c(0.2, 0.0), c(1.0, 0.0)]);
        let reg = spectral_regularize(&raw, CovarianceSource::Known(&m), 0.01, 0).unwrap();
        assert_eq!(reg.cutoff, 2);
        for (z, w) in reg.samples.iter().zip(&raw) {
            for (a, b) in z.iter().zip(w) {
                assert!((a - b).norm() < 1e-14);
            }
        }
        assert_eq!(reg.expected_sq_gap(), 0.0);
    }

    #[test]
    fn zero_shift_gives_full_coupling() {
        let p = BetaParams::new(4.0).unwrap();
        let est = increment_covariance(&p, 0.0, (0.0, 0.0), &[0.5, 0.75, 1.0], 4, 0, Some(0.01)).unwrap();
        for e in est {
            assert!((e.value - c(2.0 * (e.t1 - e.t0), 0.0)).norm() < 1e-12);
        }
    }
}
