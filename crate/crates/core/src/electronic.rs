//! The particle Hamiltonian H_V = -Δ + V applied spectrally, its lowest
//! eigenpairs by preconditioned block Rayleigh-quotient minimisation
//! (LOBPCG with deflation), and the form-domain diagnostics (Q_V norm,
//! relative form bound, confining-gap construction).

use crate::error::{CoreError, Result};
use crate::fft::pairwise_sum_fn;
use crate::grid::{
    bar_transform, forward_transform, h1dot_seminorm, inner_product, GridSpec, RealField,
};
use crate::linalg::{adjoint, hermitian_eigen, matmul};
use crate::model::PotentialSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const TWO_PI_CUBED: f64 = 248.05021344239853; // (2π)³

/// H_V = -Δ + V with a real potential sampled on the grid.
#[derive(Clone, Debug)]
pub struct ElectronicOperator {
    grid: GridSpec,
    potential: RealField,
}

impl ElectronicOperator {
    pub fn new(grid: GridSpec, potential: RealField) -> Result<Self> {
        if potential.grid() != grid {
            return Err(CoreError::GridMismatch(
                "potential sampled on a different grid".into(),
            ));
        }
        if potential.samples().iter().any(|v| v.im != 0.0) {
            return Err(CoreError::InvalidArgument(
                "potential must be real-valued".into(),
            ));
        }
        Ok(ElectronicOperator { grid, potential })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn potential(&self) -> &RealField {
        &self.potential
    }

    /// H with the potential shifted by `extra` (e.g. the Hartree term).
    pub fn with_added_potential(&self, extra: &RealField) -> Result<Self> {
        if extra.grid() != self.grid {
            return Err(CoreError::GridMismatch(
                "extra potential on a different grid".into(),
            ));
        }
        let mut p = self.potential.clone();
        p.axpy(Complex64::new(1.0, 0.0), extra);
        ElectronicOperator::new(self.grid, p)
    }

    /// (-Δ + V) u via the |k|² multiplier plus the pointwise potential.
    pub fn apply(&self, u: &RealField) -> Result<RealField> {
        if u.grid() != self.grid {
            return Err(CoreError::GridMismatch(
                "operator and field grids differ".into(),
            ));
        }
        let mut hat = forward_transform(u);
        for (i, v) in hat.samples_mut().iter_mut().enumerate() {
            *v *= self.grid.freq_norm2(i);
        }
        let mut out = bar_transform(&hat);
        let scale = 1.0 / TWO_PI_CUBED;
        for ((o, &uv), &pv) in out
            .samples_mut()
            .iter_mut()
            .zip(u.samples().iter())
            .zip(self.potential.samples().iter())
        {
            *o = *o * scale + pv.re * uv;
        }
        Ok(out)
    }
}

/// Spectral preconditioner (1 + |k|²)^{-1}.
fn precondition(grid: GridSpec, r: &RealField) -> RealField {
    let mut hat = forward_transform(r);
    for (i, v) in hat.samples_mut().iter_mut().enumerate() {
        *v /= 1.0 + grid.freq_norm2(i);
    }
    let mut out = bar_transform(&hat);
    out.scale(Complex64::new(1.0 / TWO_PI_CUBED, 0.0));
    out
}

/// Ascending eigenpairs of H_V with discrete-L²-normalised states.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub states: Vec<RealField>,
    pub residuals: Vec<f64>,
}

impl Eigenpairs {
    pub fn ground(&self) -> &RealField {
        &self.states[0]
    }

    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    /// δ_V: distance from E₀ to the first value strictly above
    /// E₀ + 1e-8·|E₀| (a spectral distance, not an index gap).
    pub fn spectral_gap(&self) -> Option<f64> {
        let e0 = self.values[0];
        let cut = e0 + 1e-8 * e0.abs();
        self.values.iter().find(|&&e| e > cut).map(|e| e - e0)
    }

    /// Number of computed values within `rtol`·max(1,|E|) of values[level].
    pub fn multiplicity(&self, level: usize, rtol: f64) -> usize {
        let e = self.values[level];
        let tol = rtol * e.abs().max(1.0);
        self.values.iter().filter(|&&v| (v - e).abs() <= tol).count()
    }
}

// --- block vector helpers (plain complex columns, h³ inner product) --------

type Col = Vec<Complex64>;

fn dot(a: &Col, b: &Col, w: f64) -> Complex64 {
    const CHUNK: usize = 512;
    let mut re = 0.0;
    let mut im = 0.0;
    for (ca, cb) in a.chunks(CHUNK).zip(b.chunks(CHUNK)) {
        let mut pre = 0.0;
        let mut pim = 0.0;
        for (x, y) in ca.iter().zip(cb.iter()) {
            pre += x.re * y.re + x.im * y.im;
            pim += x.re * y.im - x.im * y.re;
        }
        re += pre;
        im += pim;
    }
    Complex64::new(re * w, im * w)
}

fn norm(a: &Col, w: f64) -> f64 {
    const CHUNK: usize = 512;
    let mut acc = 0.0;
    for ca in a.chunks(CHUNK) {
        let mut p = 0.0;
        for x in ca {
            p += x.re * x.re + x.im * x.im;
        }
        acc += p;
    }
    (acc * w).sqrt()
}

/// Gram matrix G[i][j] = ⟨a[i], b[j]⟩ (row-major |a|×|b|).
fn gram(a: &[Col], b: &[Col], w: f64) -> Vec<Complex64> {
    let q = a.len();
    let p = b.len();
    let mut g = vec![Complex64::default(); q * p];
    g.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let (i, j) = (idx / p, idx % p);
        *v = dot(&a[i], &b[j], w);
    });
    g
}

/// Columns of `cols`·C where C is q_in×q_out row-major.
fn combine(cols: &[Col], c: &[Complex64], q_out: usize) -> Vec<Col> {
    let q_in = cols.len();
    assert_eq!(c.len(), q_in * q_out);
    let n = cols[0].len();
    (0..q_out)
        .into_par_iter()
        .map(|j| {
            let mut out = vec![Complex64::default(); n];
            for (i, col) in cols.iter().enumerate() {
                let w = c[i * q_out + j];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                for (o, &v) in out.iter_mut().zip(col.iter()) {
                    *o += w * v;
                }
            }
            out
        })
        .collect()
}

/// Orthonormalise `cols` in the weighted metric by S^{-1/2} whitening; returns
/// the coefficient matrix (q_in×q_out) so callers can transform A·cols.
fn whiten(cols: &[Col], w: f64, drop_tol: f64) -> (Vec<Complex64>, usize) {
    let g = gram(cols, cols, w);
    whiten_from_gram(g, cols.len(), drop_tol)
}

/// Whitening coefficients from a precomputed Gram matrix.
fn whiten_from_gram(g: Vec<Complex64>, q: usize, drop_tol: f64) -> (Vec<Complex64>, usize) {
    let (vals, vecs) = hermitian_eigen(g, q);
    let vmax = vals
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let mut keep: Vec<usize> =
        (0..q).filter(|&i| vals[i].is_finite() && vals[i] > drop_tol * vmax).collect();
    // largest subspace directions first for stability
    keep.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
    let q_out = keep.len();
    let mut c = vec![Complex64::default(); q * q_out];
    for (jo, &ji) in keep.iter().enumerate() {
        let s = 1.0 / vals[ji].sqrt();
        for i in 0..q {
            c[i * q_out + jo] = vecs[i * q + ji] * s;
        }
    }
    (c, q_out)
}

fn project_out(locked: &[Col], cols: &mut [Col], w: f64) {
    if locked.is_empty() {
        return;
    }
    cols.par_iter_mut().for_each(|col| {
        for l in locked {
            let c = dot(l, col, w);
            for (v, &lv) in col.iter_mut().zip(l.iter()) {
                *v -= c * lv;
            }
        }
    });
}

struct BlockResult {
    values: Vec<f64>,
    columns: Vec<Col>,
    residuals: Vec<f64>,
}
/// One deflated LOBPCG block: the `want` lowest eigenpairs of `op`
/// orthogonal to `locked`, with `guard` extra trial vectors.
///
/// Ritz vectors are hard-locked one by one as their residuals pass `tol`;
/// this keeps converged members of degenerate multiplets from being
/// re-rotated by later Rayleigh-Ritz steps, which would otherwise stall
/// the tail of the iteration.
fn lobpcg_block(
    op: &ElectronicOperator,
    want: usize,
    guard: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
    warm: &[Col],
    locked: &[Col],
) -> Result<BlockResult> {
    let grid = op.grid();
    let n = grid.len();
    let w = grid.cell_volume();
    let m = want + guard;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let apply_cols = |cols: &[Col]| -> Result<Vec<Col>> {
        cols.iter()
            .map(|c| {
                let f = RealField::from_samples(grid, c.clone())?;
                Ok(op.apply(&f)?.samples().to_vec())
            })
            .collect()
    };

    // seeded start, warm vectors first
    let mut x: Vec<Col> = warm.iter().take(m).cloned().collect();
    while x.len() < m {
        let col: Col = (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        x.push(col);
    }
    let mut all_locked: Vec<Col> = locked.to_vec();
    project_out(&all_locked, &mut x, w);
    let (c, q) = whiten(&x, w, 1e-10);
    x = combine(&x, &c, q);

    let mut found: Vec<(f64, Col, f64)> = Vec::new();
    let mut p: Vec<Col> = Vec::new();
    let mut best_worst = f64::INFINITY;

    for _iter in 0..max_iter {
        if x.is_empty() {
            break;
        }
        // fresh operator images every iteration: tracking them through the
        // subspace recombination accumulates rounding and destabilises the
        // Rayleigh-Ritz once residuals approach machine noise
        let ax = apply_cols(&x)?;
        let theta: Vec<f64> = (0..x.len()).map(|i| dot(&x[i], &ax[i], w).re).collect();
        let mut resid: Vec<Col> = (0..x.len())
            .map(|i| {
                ax[i]
                    .iter()
                    .zip(x[i].iter())
                    .map(|(&a, &b)| a - theta[i] * b)
                    .collect()
            })
            .collect();
        let rnorms: Vec<f64> = resid.iter().map(|r| norm(r, w)).collect();
        if rnorms.iter().any(|r| !r.is_finite()) {
            return Err(CoreError::EigNotConverged {
                iterations: _iter,
                best_residual: best_worst,
                tol,
            });
        }

        // hard-lock converged Ritz vectors
        let newly: Vec<usize> = (0..x.len()).filter(|&i| rnorms[i] <= tol).collect();
        if !newly.is_empty() {
            for &i in &newly {
                found.push((theta[i], x[i].clone(), rnorms[i]));
                all_locked.push(x[i].clone());
            }
            let keep: Vec<usize> = (0..x.len()).filter(|i| !newly.contains(i)).collect();
            let active_min = keep
                .iter()
                .map(|&i| theta[i])
                .fold(f64::INFINITY, f64::min);
            x = keep.iter().map(|&i| x[i].clone()).collect();
            p.clear();
            // done when the `want` lowest of (found ∪ active) are all found
            if found.len() >= want {
                let mut order: Vec<usize> = (0..found.len()).collect();
                order.sort_by(|&a, &b| found[a].0.total_cmp(&found[b].0));
                let bar = found[order[want - 1]].0;
                if x.is_empty() || active_min >= bar - 1e-10 * bar.abs().max(1.0) {
                    let values = order.iter().take(want).map(|&i| found[i].0).collect();
                    let columns = order
                        .iter()
                        .take(want)
                        .map(|&i| found[i].1.clone())
                        .collect();
                    let residuals = order.iter().take(want).map(|&i| found[i].2).collect();
                    return Ok(BlockResult {
                        values,
                        columns,
                        residuals,
                    });
                }
            }
            if x.is_empty() {
                break;
            }
            project_out(&all_locked, &mut x, w);
            let (c, q) = whiten(&x, w, 1e-10);
            x = combine(&x, &c, q);
            continue;
        }

        let worst = rnorms.iter().fold(0.0f64, |acc, &v| acc.max(v));
        best_worst = best_worst.min(worst);
        if std::env::var("KGS_EIG_TRACE").is_ok() && _iter % 25 == 0 {
            eprintln!(
                "n={} iter {_iter}: active={} found={} theta0={:.12} worst={:.3e}",
                grid.n_per_axis(),
                x.len(),
                found.len(),
                theta[0],
                worst
            );
        }

        // preconditioned residual directions, orthogonalised against the
        // locked and current blocks *before* the operator is applied, and
        // orthonormalised internally. Keeping each block orthonormal keeps
        // the joint whitening near the identity, which is what lets the
        // residuals reach tight tolerances instead of stalling.
        let mut wdir: Vec<Col> = resid
            .drain(..)
            .map(|r| {
                let f = RealField::from_samples(grid, r).expect("finite residual");
                precondition(grid, &f).samples().to_vec()
            })
            .collect();
        project_out(&all_locked, &mut wdir, w);
        project_out(&x, &mut wdir, w);
        project_out(&all_locked, &mut wdir, w);
        wdir.retain(|c| norm(c, w) > 1e-150);
        if !wdir.is_empty() {
            let (cw, qw) = whiten(&wdir, w, 1e-14);
            wdir = combine(&wdir, &cw, qw);
        }
        let aw = apply_cols(&wdir)?;

        // conjugate directions are plain vectors; orthogonalise them against
        // X and W, then apply the operator fresh (no image tracking)
        if !p.is_empty() {
            project_out(&x, &mut p, w);
            project_out(&wdir, &mut p, w);
            project_out(&all_locked, &mut p, w);
            p.retain(|c| norm(c, w) > 1e-6);
            if !p.is_empty() {
                let (cp, qp) = whiten(&p, w, 1e-10);
                p = combine(&p, &cp, qp);
            }
        }
        let ap = apply_cols(&p)?;

        // subspace [X | W | P] with consistent fresh A images
        let mut subspace = x.clone();
        subspace.extend(wdir);
        subspace.extend(p.iter().cloned());
        let mut asubspace = ax.clone();
        asubspace.extend(aw);
        asubspace.extend(ap);
        debug_assert_eq!(asubspace.len(), subspace.len());

        // Rayleigh-Ritz with the whitening folded into the small matrices
        // (the large whitened basis is never materialised)
        let q_raw = subspace.len();
        let g = gram(&subspace, &subspace, w);
        let mut h = gram(&subspace, &asubspace, w);
        for i in 0..q_raw {
            for j in (i + 1)..q_raw {
                let sym = (h[i * q_raw + j] + h[j * q_raw + i].conj()) * 0.5;
                h[i * q_raw + j] = sym;
                h[j * q_raw + i] = sym.conj();
            }
        }
        let (c, q) = whiten_from_gram(g, q_raw, 1e-8);
        let h_small = matmul(
            &adjoint(&c, q_raw, q),
            q,
            q_raw,
            &matmul(&h, q_raw, q_raw, &c, q),
            q,
        );
        let (_vals, vecs) = hermitian_eigen(h_small, q);
        let m_active = (m - found.len().min(m - 1)).min(q).max(1);
        let mut take = vec![Complex64::default(); q * m_active];
        for j in 0..m_active {
            for i in 0..q {
                take[i * m_active + j] = vecs[i * q + j];
            }
        }
        let cx = matmul(&c, q_raw, q, &take, m_active);
        let x_new = combine(&subspace, &cx, m_active);

        // next conjugate block: components of X_new outside span(X)
        let xg = gram(&x, &x_new, w);
        let mut p_new = x_new.clone();
        for j in 0..m_active {
            for i in 0..x.len() {
                let coef = xg[i * m_active + j];
                for (v, &xv) in p_new[j].iter_mut().zip(x[i].iter()) {
                    *v -= coef * xv;
                }
            }
        }
        p_new.retain(|c| norm(c, w) > 1e-8);
        for pj in p_new.iter_mut() {
            let s = 1.0 / norm(pj, w);
            for v in pj.iter_mut() {
                *v *= s;
            }
        }
        p = p_new;
        x = x_new;
    }

    Err(CoreError::EigNotConverged {
        iterations: max_iter,
        best_residual: best_worst,
        tol,
    })
}

/// Fix the global phase so the largest-magnitude sample is real positive.
fn phase_fix(field: &mut RealField) {
    let mut best = 0usize;
    let mut best_norm = -1.0;
    for (i, v) in field.samples().iter().enumerate() {
        let nv = v.norm_sqr();
        if nv > best_norm {
            best_norm = nv;
            best = i;
        }
    }
    let v = field.samples()[best];
    if v.norm() > 0.0 {
        let rot = v.conj() / v.norm();
        field.scale(rot);
    }
}

/// Lowest `count` eigenpairs of H_V by deflated block LOBPCG with
/// inverse-(1+|k|²) preconditioning. Deterministic for a fixed seed; the
/// block Rayleigh quotients decrease monotonically through the
/// Rayleigh-Ritz steps. Hard iteration cap 10 000 per block.
pub fn lowest_eigenpairs(
    op: &ElectronicOperator,
    count: usize,
    tol: f64,
    seed: u64,
) -> Result<Eigenpairs> {
    lowest_eigenpairs_warm(op, count, tol, seed, &[])
}

/// Prolong a coarse-grid field to a finer grid sharing the same box by
/// spectral zero-padding (exact for band-limited fields).
fn prolong(coarse: &RealField, fine_grid: GridSpec) -> RealField {
    let cg = coarse.grid();
    let hat = forward_transform(coarse);
    let mut fine_hat = crate::grid::SpectralField::zeros(fine_grid);
    let half = cg.n_per_axis() as i64 / 2;
    for (i, &v) in hat.samples().iter().enumerate() {
        let m = cg.index_to_triple(i);
        // skip the coarse Nyquist planes; they have no symmetric partner
        if m.iter().any(|&c| c == -half) {
            continue;
        }
        fine_hat.samples_mut()[fine_grid.triple_to_index(m)] = v;
    }
    let mut out = bar_transform(&fine_hat);
    out.normalize();
    out
}

/// As `lowest_eigenpairs`, seeding the first blocks with warm-start vectors.
pub fn lowest_eigenpairs_warm(
    op: &ElectronicOperator,
    count: usize,
    tol: f64,
    seed: u64,
    warm: &[&RealField],
) -> Result<Eigenpairs> {
    if count < 1 {
        return Err(CoreError::InvalidArgument("count must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(CoreError::InvalidArgument("tol must be positive".into()));
    }
    let grid = op.grid();
    let w = grid.cell_volume();
    const MAX_ITER: usize = 10_000;
    const BATCH: usize = 12;

    let mut warm_fields: Vec<RealField> = warm.iter().map(|&f| f.clone()).collect();
    // two-grid warm start: solve on the half-resolution lattice and prolong
    let n = grid.n_per_axis();
    if warm_fields.is_empty() && n >= 32 && n % 4 == 0 {
        let coarse_grid = GridSpec::new(n / 2, grid.box_length())?;
        let coarse_pot = RealField::from_samples(
            coarse_grid,
            (0..coarse_grid.len())
                .map(|i| {
                    let m = coarse_grid.index_to_triple(i);
                    op.potential.samples()[grid.triple_to_index([2 * m[0], 2 * m[1], 2 * m[2]])]
                })
                .collect(),
        )?;
        let coarse_op = ElectronicOperator::new(coarse_grid, coarse_pot)?;
        let coarse_tol = tol.max(1e-7).min(1e-5);
        if let Ok(coarse) = lowest_eigenpairs_warm(&coarse_op, count, coarse_tol, seed, &[]) {
            warm_fields = coarse.states.iter().map(|s| prolong(s, grid)).collect();
        }
    }

    let mut locked: Vec<Col> = Vec::new();
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let warm_cols: Vec<Col> = warm_fields
        .iter()
        .map(|f| {
            let mut c = f.samples().to_vec();
            let nrm = norm(&c, w);
            if nrm > 0.0 {
                for v in &mut c {
                    *v /= nrm;
                }
            }
            c
        })
        .collect();

    let mut batch_index = 0u64;
    while values.len() < count {
        let done = values.len();
        let want = BATCH.min(count - done);
        let guard = (want / 2 + 2).min(8);
        let batch_warm: Vec<Col> = warm_cols
            .iter()
            .skip(done)
            .take(want)
            .cloned()
            .collect();
        let blk = lobpcg_block(
            op,
            want,
            guard,
            tol,
            MAX_ITER,
            seed.wrapping_add(batch_index),
            &batch_warm,
            &locked,
        )?;
        values.extend_from_slice(&blk.values);
        residuals.extend_from_slice(&blk.residuals);
        locked.extend(blk.columns);
        batch_index += 1;
    }

    let mut states: Vec<RealField> = locked
        .into_iter()
        .take(count)
        .map(|c| RealField::from_samples(grid, c).expect("finite eigenvector"))
        .collect();
    for s in &mut states {
        phase_fix(s);
    }
    Ok(Eigenpairs {
        values,
        states,
        residuals,
    })
}

/// ‖u‖_{Q_V} = sqrt(‖u‖²_{H¹} + ‖V₊^{1/2} u‖²) — the electronic form norm.
pub fn qv_norm(u: &RealField, potential: &RealField) -> f64 {
    let l2 = inner_product(u, u).map(|v| v.re).unwrap_or(0.0);
    let h1 = h1dot_seminorm(u);
    let w = u.grid().cell_volume();
    let us = u.samples();
    let ps = potential.samples();
    let vp = pairwise_sum_fn(us.len(), &|i| {
        Complex64::new(ps[i].re.max(0.0) * us[i].norm_sqr(), 0.0)
    })
    .re
        * w;
    (l2 + h1 + vp).sqrt()
}

/// Check of the relative form bound ‖u‖²_{Ḣ¹} ≤ (⟨u,H_V u⟩ + b‖u‖²)/(1-a).
#[derive(Clone, Copy, Debug)]
pub struct CoercivityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn coercivity_check(
    op: &ElectronicOperator,
    u: &RealField,
    a: f64,
    b: f64,
) -> Result<CoercivityReport> {
    if !(0.0..1.0).contains(&a) {
        return Err(CoreError::InvalidArgument(format!(
            "relative bound parameter a must lie in [0,1), got {a}"
        )));
    }
    let lhs = h1dot_seminorm(u);
    let hu = op.apply(u)?;
    let quad = inner_product(u, &hu)?.re;
    let l2 = inner_product(u, u)?.re;
    let rhs = (quad + b * l2) / (1.0 - a);
    Ok(CoercivityReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-10),
    })
}

/// Result of the confining-gap construction V₁,C = V₊ + 2C·η_R².
#[derive(Clone, Copy, Debug)]
pub struct GapProbe {
    pub mu_v: f64,
    pub mu_v1c: f64,
    pub gap_ok: bool,
}

/// Smooth plateau profile: 1 on [0,1], cos²(π(t-1)/2) on (1,2), 0 beyond.
pub fn eta_profile(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let c = (std::f64::consts::PI * (t - 1.0) / 2.0).cos();
        c * c
    }
}

/// Build V₁,C = V₊ + 2C·η_R² and compare ground energies of H_V and H_{V₁,C}.
pub fn confining_gap_probe(
    potential: &PotentialSpec,
    c_boost: f64,
    r_loc: f64,
    grid: GridSpec,
    tol: f64,
    seed: u64,
) -> Result<GapProbe> {
    if !potential.is_confining() {
        return Err(CoreError::InvalidArgument(
            "confining_gap_probe requires a confining potential".into(),
        ));
    }
    if c_boost < 0.0 {
        return Err(CoreError::InvalidArgument("C must be >= 0".into()));
    }
    if !(r_loc > 0.0) || 2.0 * r_loc >= grid.box_length() / 2.0 {
        return Err(CoreError::InvalidArgument(format!(
            "localisation radius must satisfy 0 < 2R < box_length/2, got R = {r_loc}"
        )));
    }
    let v = crate::model::sample_potential(potential, grid)?;
    let op = ElectronicOperator::new(grid, v)?;
    let v1c = RealField::from_fn(grid, |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let eta = eta_profile(r / r_loc);
        Complex64::new(potential.eval(x).max(0.0) + 2.0 * c_boost * eta * eta, 0.0)
    });
    let op1 = ElectronicOperator::new(grid, v1c)?;
    let mu_v = lowest_eigenpairs(&op, 1, tol, seed)?.ground_energy();
    let mu_v1c = lowest_eigenpairs(&op1, 1, tol, seed)?.ground_energy();
    Ok(GapProbe {
        mu_v,
        mu_v1c,
        gap_ok: mu_v1c - mu_v >= c_boost,
    })
}
