//! Integral operator of the conjugate kernel `x ↦ σ(Wx)/√m`.
//!
//! On the feature coordinates the operator is the `m × m` matrix
//! `Γ_ij = (1/m) E[σ(<W_i, G>) σ(<W_j, G>)]`, `G ~ N(0, I_d)`.

use nalgebra::{DMatrix, DVector};

use crate::activation::Activation;
use crate::error::{KrrError, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{sym_eigen, GaussHermite, SortedEigen};
use crate::par::{map_blocks, map_range, Parallelism};
use crate::sampler::{sample_design_rng, stream, DesignSpec, Marginal, Role};
use crate::spectra::SpectrumModel;

const ORTHO_TOL: f64 = 1e-10;
const SAME_TOL: f64 = 1e-10;
const MC_BLOCK: usize = 4096;

/// How `Γ` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConjugateMethod {
    /// Exact 1-D Gaussian moments; needs pairwise orthogonal or identical rows.
    ClosedForm,
    /// 64 × 64 bivariate Gauss–Hermite rule per entry.
    Quadrature,
    /// Sample second moment of the features.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct ConjugateSpectrum {
    /// Positive eigenvalues as a finite spectrum.
    pub model: SpectrumModel,
    /// All `m` eigenvalues, nonincreasing (tiny negatives clamped to zero).
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

fn row_gram(w: &DMatrix<f64>, par: Parallelism) -> DMatrix<f64> {
    let m = w.nrows();
    let wt = w.transpose();
    let blocks = map_blocks(m, 128, par, |_, rows| w.rows(rows.start, rows.len()) * &wt);
    let mut g = DMatrix::zeros(m, m);
    let mut at = 0;
    for b in blocks {
        g.rows_mut(at, b.nrows()).copy_from(&b);
        at += b.nrows();
    }
    g
}

fn rows_identical(w: &DMatrix<f64>, i: usize, j: usize) -> bool {
    let diff = (w.row(i) - w.row(j)).norm();
    diff <= SAME_TOL * w.row(i).norm().max(w.row(j).norm())
}

/// `Γ` from exact one-dimensional moments.
pub fn closed_form_gamma(w: &DMatrix<f64>, act: Activation, par: Parallelism) -> Result<DMatrix<f64>> {
    let m = w.nrows();
    let g = row_gram(w, par);
    let norms: Vec<f64> = (0..m).map(|i| g[(i, i)].max(0.0).sqrt()).collect();
    let sq: Vec<f64> = norms.iter().map(|r| act.gaussian_sq_norm(*r)).collect();
    let mean: Vec<f64> = norms.iter().map(|r| act.gaussian_mean(*r)).collect();
    let rows = map_range(m, par, |i| -> Result<Vec<f64>> {
        let mut row = vec![0.0; m];
        row[i] = sq[i] / m as f64;
        for j in 0..m {
            if j == i {
                continue;
            }
            let scale = norms[i] * norms[j];
            let gij = g[(i, j)];
            if scale == 0.0 || gij.abs() <= ORTHO_TOL * scale {
                row[j] = mean[i] * mean[j] / m as f64;
            } else if rows_identical(w, i, j) {
                row[j] = sq[i] / m as f64;
            } else {
                return Err(KrrError::UnsupportedGeometry(format!(
                    "rows {i} and {j} are neither orthogonal nor identical (cosine {:.3e})",
                    gij / scale
                )));
            }
        }
        Ok(row)
    });
    let mut gamma = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        gamma.row_mut(i).copy_from_slice(&row?);
    }
    // exact symmetry
    for i in 0..m {
        for j in 0..i {
            gamma[(i, j)] = gamma[(j, i)];
        }
    }
    Ok(gamma)
}

/// `Γ` entry by entry with a 64 × 64 Gauss–Hermite rule.
pub fn quadrature_gamma(w: &DMatrix<f64>, act: Activation, par: Parallelism) -> DMatrix<f64> {
    let m = w.nrows();
    let g = row_gram(w, par);
    let rule = GaussHermite::n64();
    let rows = map_range(m, par, |i| {
        (i..m)
            .map(|j| {
                // (u, v) ~ N(0, [[a², c], [c, b²]]) via u = a g1, v = l g1 + r g2
                let a2 = g[(i, i)];
                let b2 = g[(j, j)];
                let c = g[(i, j)];
                let a = a2.max(0.0).sqrt();
                let (l, r) = if a > 0.0 {
                    let l = c / a;
                    (l, (b2 - l * l).max(0.0).sqrt())
                } else {
                    (0.0, b2.max(0.0).sqrt())
                };
                let mut acc = 0.0;
                for (x1, w1) in rule.nodes.iter().zip(&rule.weights) {
                    let su = act.apply(a * x1);
                    let inner: f64 = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(x2, w2)| w2 * act.apply(l * x1 + r * x2))
                        .sum();
                    acc += w1 * su * inner;
                }
                acc / m as f64
            })
            .collect::<Vec<f64>>()
    });
    let mut gamma = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            gamma[(i, i + off)] = v;
            gamma[(i + off, i)] = v;
        }
    }
    gamma
}

/// Sample estimate of `Γ` from `samples` Gaussian inputs.
pub fn monte_carlo_gamma(
    w: &DMatrix<f64>,
    act: Activation,
    samples: usize,
    seed: u64,
    par: Parallelism,
) -> Result<DMatrix<f64>> {
    if samples == 0 {
        return Err(KrrError::param("samples", "need at least one sample"));
    }
    let kernel = KernelSpec::Conjugate {
        weights: w.clone(),
        activation: act,
    };
    let design = DesignSpec::IidCoordinates {
        marginal: Marginal::Gaussian,
        d: w.ncols(),
    };
    let m = w.nrows();
    let partial = map_blocks(samples, MC_BLOCK, par, |b, range| -> Result<DMatrix<f64>> {
        let mut rng = stream(seed, 0, b as u32, Role::Oracle);
        let x = sample_design_rng(&design, range.len(), &mut rng)?;
        let phi = kernel.feature_matrix(&x, Parallelism::Sequential)?;
        Ok(phi.tr_mul(&phi))
    });
    let mut acc = DMatrix::zeros(m, m);
    for p in partial {
        acc += p?;
    }
    Ok(acc / samples as f64)
}

/// Connected components of the off-diagonal support of `a`.
fn components(a: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let m = a.nrows();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if a[(i, j)] != 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..m {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Eigendecomposition that splits `a` into independent blocks first.
fn block_eigen(a: &DMatrix<f64>) -> Result<SortedEigen> {
    let m = a.nrows();
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(m);
    for comp in components(a) {
        if comp.len() == 1 {
            let mut v = DVector::zeros(m);
            v[comp[0]] = 1.0;
            pairs.push((a[(comp[0], comp[0])], v));
            continue;
        }
        let sub = DMatrix::from_fn(comp.len(), comp.len(), |r, c| a[(comp[r], comp[c])]);
        let eig = sym_eigen(&sub)?;
        for (k, val) in eig.values.iter().enumerate() {
            let mut v = DVector::zeros(m);
            for (r, &idx) in comp.iter().enumerate() {
                v[idx] = eig.vectors[(r, k)];
            }
            pairs.push((*val, v));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut vectors = DMatrix::zeros(m, m);
    for (k, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(k, v);
    }
    Ok(SortedEigen {
        values: pairs.into_iter().map(|p| p.0).collect(),
        vectors,
    })
}

fn finish(eig: SortedEigen) -> Result<ConjugateSpectrum> {
    let top = eig.values.first().copied().unwrap_or(0.0);
    let cut = 1e-12 * top.abs();
    let eigenvalues: Vec<f64> = eig
        .values
        .iter()
        .map(|v| if *v > cut { *v } else { 0.0 })
        .collect();
    let positive: Vec<f64> = eigenvalues.iter().copied().filter(|v| *v > 0.0).collect();
    if positive.is_empty() {
        return Err(KrrError::EmptySpectrum);
    }
    Ok(ConjugateSpectrum {
        model: SpectrumModel::from_eigenvalues(&positive)?,
        eigenvalues,
        eigenvectors: eig.vectors,
    })
}

/// Spectrum and eigenbasis of the conjugate-kernel operator.
pub fn conjugate_spectrum(
    w: &DMatrix<f64>,
    act: Activation,
    method: ConjugateMethod,
    par: Parallelism,
) -> Result<ConjugateSpectrum> {
    if w.nrows() == 0 || w.ncols() == 0 {
        return Err(KrrError::param("W", "need m >= 1 rows and d >= 1 columns"));
    }
    let eig = match method {
        ConjugateMethod::ClosedForm => block_eigen(&closed_form_gamma(w, act, par)?)?,
        ConjugateMethod::Quadrature => sym_eigen(&quadrature_gamma(w, act, par))?,
        ConjugateMethod::MonteCarlo { samples, seed } => {
            sym_eigen(&monte_carlo_gamma(w, act, samples, seed, par)?)?
        }
    };
    finish(eig)
}

/// Orthonormal `m × d` rows whose first row is `w_t / ‖w_t‖`, completed from
/// the standard basis by Gram–Schmidt.
pub fn gram_schmidt_completion(w_t: &[f64], m: usize) -> Result<DMatrix<f64>> {
    let d = w_t.len();
    if m > d {
        return Err(KrrError::param("m", format!("cannot fit {m} orthonormal rows in dimension {d}")));
    }
    let first = DVector::from_column_slice(w_t);
    let norm = first.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(KrrError::param("w_t", "must be a nonzero finite vector"));
    }
    let u = first / norm;
    // e_j minus its projection on span{u, e_1, …, e_{j-1}} = span{e_1, …, e_{j-1}, u_{j:}}
    let mut tail_sq = vec![0.0; d + 1];
    for i in (0..d).rev() {
        tail_sq[i] = tail_sq[i + 1] + u[i] * u[i];
    }
    let mut w = DMatrix::zeros(m, d);
    w.set_row(0, &u.transpose());
    let mut row = 1;
    for j in 0..d {
        if row == m {
            break;
        }
        let s = tail_sq[j];
        let (scale, n2) = if s > 0.0 { (u[j] / s, tail_sq[j + 1] / s) } else { (0.0, 1.0) };
        if n2 <= 1e-16 {
            continue;
        }
        let inv = 1.0 / n2.sqrt();
        w[(row, j)] = n2 * inv;
        for i in j + 1..d {
            w[(row, i)] = -scale * u[i] * inv;
        }
        row += 1;
    }
    Ok(w)
}

/// Scale `δ` with `‖σ(δ ·)‖²_{L2(γ)} = 1/m`, by bisection on the 64-node rule.
pub fn off_direction_scale(act: Activation, m: usize) -> Result<f64> {
    let rule = GaussHermite::n64();
    let target = 1.0 / m as f64;
    let norm = |s: f64| rule.expect(|g| act.apply(s * g).powi(2));
    if norm(0.0) >= target {
        return Err(KrrError::param(
            "activation",
            "sigma(0) is too large for the off-direction norm to reach 1/m",
        ));
    }
    let mut hi = 1.0;
    while norm(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(KrrError::param("activation", "norm never reaches 1/m"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Weights `[w_1; δ w_2; …; δ w_m]` from the completion of `w_t`.
pub fn feature_learning_weights(w_t: &[f64], m: usize, act: Activation) -> Result<(DMatrix<f64>, f64)> {
    if m < 2 {
        return Err(KrrError::param("m", "width must be at least 2"));
    }
    let delta = off_direction_scale(act, m)?;
    let mut w = gram_schmidt_completion(w_t, m)?;
    for i in 1..m {
        w.row_mut(i).scale_mut(delta);
    }
    Ok((w, delta))
}
