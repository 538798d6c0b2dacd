use crate::error::{Error, Result};
use crate::linalg::{c, require_hermitian, CMat, CVec, HermitianEigen};
use crate::metrics::TransmitCovariance;

/// Euclidean projection of `values` onto `{λ ≥ 0, Σλ ≤ budget}` (or
/// `Σλ = budget` when `equality`), via the KKT shift `λ_i ← max(λ_i - t, 0)`.
pub fn project_eigenvalues(values: &[f64], budget: f64, equality: bool) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !equality && total <= budget {
        return clipped;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - budget) / (i + 1) as f64;
        let next = sorted.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if next <= t {
            shift = t;
            break;
        }
    }
    values.iter().map(|&v| (v - shift).max(0.0)).collect()
}

/// Projects a list of Hermitian blocks jointly onto
/// `{X_b ⪰ 0, Σ_b tr X_b ≤ budget}` (or `= budget`).
pub fn project_blocks(blocks: &[CMat], budget: f64, equality: bool) -> Vec<CMat> {
    let eigs: Vec<HermitianEigen> = blocks.iter().map(HermitianEigen::new).collect();
    let all: Vec<f64> = eigs.iter().flat_map(|e| e.values.iter().copied()).collect();
    let projected = project_eigenvalues(&all, budget, equality);
    let mut offset = 0;
    eigs.iter()
        .map(|e| {
            let n = e.values.len();
            let lam = &projected[offset..offset + n];
            offset += n;
            // only the retained eigenpairs contribute
            let keep: Vec<usize> = (0..n).filter(|&j| lam[j] > 0.0).collect();
            let mut v = CMat::zeros(n, keep.len());
            let mut scaled = CMat::zeros(n, keep.len());
            for (col, &j) in keep.iter().enumerate() {
                for i in 0..n {
                    v[(i, col)] = e.vectors[(i, j)];
                    scaled[(i, col)] = e.vectors[(i, j)] * c(lam[j], 0.0);
                }
            }
            scaled * v.adjoint()
        })
        .collect()
}

/// Frobenius-nearest matrix to `m` in `{S ⪰ 0, tr S ≤ budget}`.
pub fn project_psd_trace(m: &CMat, budget: f64) -> Result<TransmitCovariance> {
    if !(budget >= 0.0) {
        return Err(Error::InvalidArgument("power budget must be nonnegative".into()));
    }
    let m = require_hermitian(m, 1e-8)?;
    let mut out = project_blocks(std::slice::from_ref(&m), budget, false);
    Ok(TransmitCovariance::new_unchecked(out.remove(0)))
}

/// Largest eigenvalue of a Hermitian matrix with a unit eigenvector.
pub fn dominant_eigenpair(m: &CMat) -> (f64, CVec) {
    let eig = HermitianEigen::new(m);
    let last = eig.values.len() - 1;
    (eig.values[last], eig.vector(last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, identity};
    use crate::scenario::{sample_channel, ChannelModel};

    fn diag(v: &[f64]) -> CMat {
        CMat::from_fn(v.len(), v.len(), |i, j| if i == j { c(v[i], 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn clips_negative_eigenvalue() {
        let p = project_psd_trace(&diag(&[1.0, -1.0]), 10.0).unwrap();
        assert!(frobenius(&(p.matrix() - diag(&[1.0, 0.0]))) < 1e-12);
    }

    #[test]
    fn kkt_shift_hand_solution() {
        let p = project_psd_trace(&diag(&[3.0, 1.0]), 2.0).unwrap();
        assert!(frobenius(&(p.matrix() - diag(&[2.0, 0.0]))) < 1e-12);
    }

    #[test]
    fn feasible_input_unchanged() {
        let x = sample_channel(3, ChannelModel::Rayleigh, 3, 3);
        let s = &x * x.adjoint();
        let budget = s.trace().re + 1.0;
        let p = project_psd_trace(&s, budget).unwrap();
        assert!(frobenius(&(p.matrix() - &s)) < 1e-10);
    }

    #[test]
    fn equality_projection_hits_budget() {
        let lam = project_eigenvalues(&[0.1, 0.2, -0.3], 2.0, true);
        assert!((lam.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(lam.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(project_psd_trace(&m, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn dominant_pair_of_diagonal() {
        let (l, v) = dominant_eigenpair(&diag(&[1.0, 5.0]));
        assert!((l - 5.0).abs() < 1e-14);
        assert!((v[1].norm() - 1.0).abs() < 1e-14);
        let (l1, v1) = dominant_eigenpair(&identity(3));
        assert!((l1 - 1.0).abs() < 1e-14);
        assert!((v1.norm() - 1.0).abs() < 1e-14);
    }
}
