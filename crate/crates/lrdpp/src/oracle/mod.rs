//! Brute-force reference implementations over the dense M x M kernel.
//!
//! Everything in this module is deliberately independent of the production
//! code paths: determinants come from Gaussian elimination or cofactor
//! expansion rather than the shared Cholesky, inverses from Gauss-Jordan,
//! and eigenvalues from a Jacobi sweep. The `suite` submodule cross-checks
//! the fast low-rank routines against these.

pub mod suite;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::kernel::TraitMatrix;

/// Hard cap for subset enumeration; 2^M subsets above this is unreasonable.
pub const ENUMERATION_GUARD: usize = 20;

const SYMMETRY_RTOL: f64 = 1e-12;
const PSD_RTOL: f64 = 1e-8;

/// Determinant by Gaussian elimination with partial pivoting. Destroys `a`.
fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let mut p = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let cand = a[r * n + col].abs();
            if cand > best {
                best = cand;
                p = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if p != col {
            for c in 0..n {
                a.swap(p * n + c, col * n + c);
            }
            det = -det;
        }
        let piv = a[col * n + col];
        det *= piv;
        for r in col + 1..n {
            let factor = a[r * n + col] / piv;
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
            }
        }
    }
    det
}

/// Matrix inverse by Gauss-Jordan elimination with partial pivoting.
fn invert_gauss_jordan(src: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = src.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut p = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let cand = a[r * n + col].abs();
            if cand > best {
                best = cand;
                p = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if p != col {
            for c in 0..n {
                a.swap(p * n + c, col * n + c);
                inv.swap(p * n + c, col * n + c);
            }
        }
        let piv = a[col * n + col];
        let scale = 1.0 / piv;
        for c in 0..n {
            a[col * n + c] *= scale;
            inv[col * n + c] *= scale;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * n + col];
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                for c in 0..n {
                    inv[r * n + c] -= factor * inv[col * n + c];
                }
            }
        }
    }
    Some(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(a: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.to_owned();
    let scale = m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[[r, p]];
                    let arq = m[[r, q]];
                    m[[r, p]] = c * arp - s * arq;
                    m[[p, r]] = m[[r, p]];
                    m[[r, q]] = s * arp + c * arq;
                    m[[q, r]] = m[[r, q]];
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                m[[p, p]] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                m[[q, q]] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).collect()
}

/// Determinant by cofactor expansion along the first row. Exponential cost;
/// only sensible for the tiny matrices in tests.
pub fn det_cofactor(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return a[[0, 0]];
    }
    let mut acc = 0.0;
    let mut minor = Array2::<f64>::zeros((n - 1, n - 1));
    for j in 0..n {
        for r in 1..n {
            let mut cc = 0;
            for c in 0..n {
                if c == j {
                    continue;
                }
                minor[[r - 1, cc]] = a[[r, c]];
                cc += 1;
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * a[[0, j]] * det_cofactor(minor.view());
    }
    acc
}

/// A validated dense symmetric PSD kernel over the full catalog.
#[derive(Debug, Clone)]
pub struct DenseKernel {
    l: Array2<f64>,
}

impl DenseKernel {
    /// Checks shape, finiteness, symmetry, and (via Jacobi eigenvalues)
    /// positive semi-definiteness. The eigenvalue check is O(M^3) per sweep,
    /// so this constructor is for the small matrices oracles run on.
    pub fn new(l: Array2<f64>) -> Result<Self> {
        let n = l.nrows();
        if n == 0 || l.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: format!("kernel must be square and non-empty, got {}x{}", n, l.ncols()),
            });
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "dense kernel entry".into() });
        }
        let scale = l.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(1.0);
        let mut max_asym = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                max_asym = max_asym.max((l[[i, j]] - l[[j, i]]).abs());
            }
        }
        if max_asym > SYMMETRY_RTOL * scale {
            return Err(Error::NotSymmetric { max_asym });
        }
        let min_eig = symmetric_eigenvalues(l.view())
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_RTOL * scale {
            return Err(Error::NotPsd { min_eig });
        }
        Ok(DenseKernel { l })
    }

    /// L = V V^T, symmetrized to scrub accumulation noise. PSD by
    /// construction, so no eigenvalue check runs.
    pub fn from_traits(v: &TraitMatrix) -> Self {
        let raw = v.matrix().dot(&v.matrix().t());
        DenseKernel { l: symmetrize(raw) }
    }

    /// L = G G^T for an arbitrary factor G. PSD by construction; used by the
    /// benchmark to build full-rank kernels too large for `new`.
    pub fn from_psd_factor(g: &Array2<f64>) -> Self {
        let raw = g.dot(&g.t());
        DenseKernel { l: symmetrize(raw) }
    }

    pub fn n_items(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.l
    }

    fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| self.l[[rows[i], cols[j]]])
    }

    /// det L_Y by Gaussian elimination.
    pub fn det_submatrix(&self, items: &[usize]) -> Result<f64> {
        for &item in items {
            if item >= self.n_items() {
                return Err(Error::ItemOutOfRange { item, m: self.n_items() });
            }
        }
        let n = items.len();
        let mut buf = vec![0.0; n * n];
        for (i, &r) in items.iter().enumerate() {
            for (j, &c) in items.iter().enumerate() {
                buf[i * n + j] = self.l[[r, c]];
            }
        }
        Ok(det_in_place(&mut buf, n))
    }

    /// Sum of det L_Y over every subset Y of the catalog, the empty set
    /// included. Equals det(L + I); enumeration is capped at
    /// [`ENUMERATION_GUARD`] items.
    pub fn enumerate_normalizer(&self) -> Result<f64> {
        let m = self.n_items();
        if m > ENUMERATION_GUARD {
            return Err(Error::EnumerationGuard { m, limit: ENUMERATION_GUARD });
        }
        let mut sum = 0.0;
        let mut items = Vec::with_capacity(m);
        for mask in 0u32..(1u32 << m) {
            items.clear();
            for i in 0..m {
                if mask & (1 << i) != 0 {
                    items.push(i);
                }
            }
            sum += self.det_submatrix(&items)?;
        }
        Ok(sum)
    }

    /// Conditioned kernel via the complement-inverse identity:
    /// invert L + I restricted-to-complement, slice, invert again, drop I.
    pub fn condition_via_inverse(&self, observed: &[usize]) -> Result<DenseConditioned> {
        let (obs, complement) = self.partition(observed)?;
        let m = self.n_items();

        let mut t = self.l.clone();
        for &i in &complement {
            t[[i, i]] += 1.0;
        }
        let t_inv = invert_gauss_jordan(t.as_slice().expect("row-major"), m)
            .ok_or_else(|| Error::SingularMinor { items: obs.clone() })?;

        let c = complement.len();
        let mut block = vec![0.0; c * c];
        for (i, &r) in complement.iter().enumerate() {
            for (j, &cc) in complement.iter().enumerate() {
                block[i * c + j] = t_inv[r * m + cc];
            }
        }
        let mut inner = invert_gauss_jordan(&block, c)
            .ok_or_else(|| Error::SingularMinor { items: obs })?;
        for i in 0..c {
            inner[i * c + i] -= 1.0;
        }
        let kernel = Array2::from_shape_vec((c, c), inner).expect("square block");
        Ok(DenseConditioned { kernel, complement })
    }

    /// Conditioned kernel via the Schur complement:
    /// L_comp - L_{comp,A} (L_A)^{-1} L_{A,comp}.
    pub fn condition_via_schur(&self, observed: &[usize]) -> Result<DenseConditioned> {
        let (obs, complement) = self.partition(observed)?;
        let a = obs.len();

        let l_a = self.submatrix(&obs, &obs);
        let l_a_inv = invert_gauss_jordan(l_a.as_slice().expect("row-major"), a)
            .ok_or_else(|| Error::SingularMinor { items: obs.clone() })?;
        let l_a_inv = Array2::from_shape_vec((a, a), l_a_inv).expect("square");

        let cross = self.submatrix(&complement, &obs);
        let mut kernel = self.submatrix(&complement, &complement);
        if a > 0 {
            kernel = kernel - cross.dot(&l_a_inv).dot(&cross.t());
        }
        Ok(DenseConditioned { kernel: symmetrize(kernel), complement })
    }

    /// Runs both conditioning routes and insists they agree to 1e-8 before
    /// returning the Schur-complement result.
    pub fn condition_full_rank(&self, observed: &[usize]) -> Result<DenseConditioned> {
        let via_inverse = self.condition_via_inverse(observed)?;
        let via_schur = self.condition_via_schur(observed)?;
        let mut max_diff = 0.0_f64;
        for (x, y) in via_inverse.kernel.iter().zip(via_schur.kernel.iter()) {
            max_diff = max_diff.max((x - y).abs());
        }
        assert!(
            max_diff <= 1e-8,
            "conditioning routes disagree by {max_diff:e} on observed {observed:?}"
        );
        Ok(via_schur)
    }

    fn partition(&self, observed: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let m = self.n_items();
        let mut seen = vec![false; m];
        for &item in observed {
            if item >= m {
                return Err(Error::ItemOutOfRange { item, m });
            }
            seen[item] = true;
        }
        let mut obs: Vec<usize> = observed.to_vec();
        obs.sort_unstable();
        obs.dedup();
        let complement = (0..m).filter(|&i| !seen[i]).collect();
        Ok((obs, complement))
    }
}

fn symmetrize(a: Array2<f64>) -> Array2<f64> {
    let at = a.t().to_owned();
    (a + at) * 0.5
}

/// The conditioned kernel over the items outside the observed set.
/// `complement[i]` is the original catalog index behind row/column `i`.
#[derive(Debug, Clone)]
pub struct DenseConditioned {
    kernel: Array2<f64>,
    complement: Vec<usize>,
}

impl DenseConditioned {
    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn complement(&self) -> &[usize] {
        &self.complement
    }

    /// Single-item completion distribution: diagonal over trace.
    pub fn next_item_probabilities(&self) -> Result<Vec<(usize, f64)>> {
        let diag: Vec<f64> = (0..self.kernel.nrows())
            .map(|i| self.kernel[[i, i]].max(0.0))
            .collect();
        let total: f64 = diag.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoProbabilityMass);
        }
        Ok(self
            .complement
            .iter()
            .zip(diag)
            .map(|(&item, d)| (item, d / total))
            .collect())
    }
}

/// Distribution over the completions that grow the observed set to
/// `target_size` items: p(B) proportional to det L_{A union B}, straight from
/// subset determinants. No conditioning machinery involved. Completions come
/// back in ascending lexicographic order.
pub fn brute_force_conditional(
    l: &DenseKernel,
    observed: &[usize],
    target_size: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let m = l.n_items();
    if m > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard { m, limit: ENUMERATION_GUARD });
    }
    let mut in_a = vec![false; m];
    for &item in observed {
        if item >= m {
            return Err(Error::ItemOutOfRange { item, m });
        }
        in_a[item] = true;
    }
    let obs: Vec<usize> = (0..m).filter(|&i| in_a[i]).collect();
    if target_size < obs.len() {
        return Err(Error::InvalidConfig(format!(
            "target size {target_size} is smaller than the observed basket ({})",
            obs.len()
        )));
    }
    let need = target_size - obs.len();
    let candidates: Vec<usize> = (0..m).filter(|&i| !in_a[i]).collect();
    if need > candidates.len() {
        return Err(Error::NoCandidates);
    }

    let mut table: Vec<(Vec<usize>, f64)> = Vec::new();
    for mask in 0u32..(1u32 << candidates.len()) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let completion: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter(|(j, _)| mask & (1 << j) != 0)
            .map(|(_, &b)| b)
            .collect();
        let mut full = obs.clone();
        full.extend_from_slice(&completion);
        full.sort_unstable();
        // PSD principal minors are non-negative; elimination noise can dip
        // microscopically below zero.
        let det = l.det_submatrix(&full)?.max(0.0);
        table.push((completion, det));
    }
    table.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::NoProbabilityMass);
    }
    Ok(table.into_iter().map(|(set, w)| (set, w / total)).collect())
}

/// Single-item completion distribution: the `target_size = |A| + 1` slice of
/// [`brute_force_conditional`], flattened to (item, probability) pairs.
pub fn brute_force_next_item(l: &DenseKernel, observed: &[usize]) -> Result<Vec<(usize, f64)>> {
    let m = l.n_items();
    let mut in_a = vec![false; m];
    for &item in observed {
        if item >= m {
            return Err(Error::ItemOutOfRange { item, m });
        }
        in_a[item] = true;
    }
    let distinct = in_a.iter().filter(|&&x| x).count();
    let table = brute_force_conditional(l, observed, distinct + 1)?;
    Ok(table.into_iter().map(|(set, p)| (set[0], p)).collect())
}

/// Central-difference gradient of `f` at `v`, one probe pair per entry.
pub fn finite_difference_gradient(
    f: impl Fn(&TraitMatrix) -> Result<f64>,
    v: &TraitMatrix,
    step: f64,
) -> Result<Array2<f64>> {
    let (m, k) = (v.n_items(), v.rank());
    let mut grad = Array2::<f64>::zeros((m, k));
    for i in 0..m {
        for kk in 0..k {
            let mut plus = v.matrix().clone();
            plus[[i, kk]] += step;
            let mut minus = v.matrix().clone();
            minus[[i, kk]] -= step;
            let fp = f(&TraitMatrix::new(plus)?)?;
            let fm = f(&TraitMatrix::new(minus)?)?;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFiniteProbe { i, k: kk });
            }
            grad[[i, kk]] = (fp - fm) / (2.0 * step);
        }
    }
    Ok(grad)
}
