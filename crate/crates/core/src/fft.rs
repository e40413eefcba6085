//! Internal 3-D FFT plumbing on centered lattices.
//!
//! Fields are indexed by centered integer triples m ∈ {-N/2, ..., N/2-1}³
//! (axis index i maps to m = i - N/2, z fastest). The centered DFT
//!
//!   F(p) = Σ_q e^{∓ 2πi p·q / N} f(q),   p, q centered,
//!
//! is reduced to the standard DFT by checkerboard sign flips on input and
//! output plus a global factor ((-1)^{N/2})³, which avoids index shuffles.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut plans = PLANS.lock().unwrap();
    plans
        .entry((n, inverse))
        .or_insert_with(|| {
            let dir = if inverse {
                FftDirection::Inverse
            } else {
                FftDirection::Forward
            };
            FftPlanner::new().plan_fft(n, dir)
        })
        .clone()
}

/// Sign (-1)^{mx+my+mz} for the linear index `idx` on an N³ lattice.
/// Centered and zero-based indices give the same parity since N is even.
#[inline]
fn checkerboard_sign(idx: usize, n: usize) -> f64 {
    let iz = idx % n;
    let iy = (idx / n) % n;
    let ix = idx / (n * n);
    if (ix + iy + iz) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn apply_checkerboard(data: &mut [Complex64], n: usize) {
    data.par_iter_mut().enumerate().for_each(|(idx, v)| {
        *v *= checkerboard_sign(idx, n);
    });
}

/// Unnormalised centered 3-D DFT, in place. `inverse` selects e^{+i...}.
pub(crate) fn centered_dft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n);
    let n2 = n * n;
    let fft = plan(n, inverse);
    let scratch_len = fft.get_inplace_scratch_len();
    // rayon tasking costs more than it saves on small boxes
    let parallel = n >= 32;

    if parallel {
        apply_checkerboard(data, n);
    } else {
        for (idx, v) in data.iter_mut().enumerate() {
            *v *= checkerboard_sign(idx, n);
        }
    }

    if parallel {
        // z axis: contiguous rows, batched per x-plane
        data.par_chunks_mut(n2).for_each_init(
            || vec![Complex64::default(); scratch_len],
            |scratch, plane| {
                for row in plane.chunks_mut(n) {
                    fft.process_with_scratch(row, scratch);
                }
            },
        );
        // y axis: strided lines within each x-plane
        data.par_chunks_mut(n2).for_each_init(
            || {
                (
                    vec![Complex64::default(); n],
                    vec![Complex64::default(); scratch_len],
                )
            },
            |(line, scratch), plane| {
                for iz in 0..n {
                    for iy in 0..n {
                        line[iy] = plane[iy * n + iz];
                    }
                    fft.process_with_scratch(line, scratch);
                    for iy in 0..n {
                        plane[iy * n + iz] = line[iy];
                    }
                }
            },
        );
        // x axis: gather x-lines into a yz-major buffer, transform, scatter
        let mut buf = vec![Complex64::default(); n * n2];
        {
            let data_ref: &[Complex64] = data;
            buf.par_chunks_mut(n).enumerate().for_each_init(
                || vec![Complex64::default(); scratch_len],
                |scratch, (yz, line)| {
                    for (ix, v) in line.iter_mut().enumerate() {
                        *v = data_ref[ix * n2 + yz];
                    }
                    fft.process_with_scratch(line, scratch);
                },
            );
        }
        data.par_chunks_mut(n2).enumerate().for_each(|(ix, plane)| {
            for (yz, v) in plane.iter_mut().enumerate() {
                *v = buf[yz * n + ix];
            }
        });
    } else {
        let mut scratch = vec![Complex64::default(); scratch_len];
        let mut line = vec![Complex64::default(); n];
        for row in data.chunks_mut(n) {
            fft.process_with_scratch(row, &mut scratch);
        }
        for plane in data.chunks_mut(n2) {
            for iz in 0..n {
                for iy in 0..n {
                    line[iy] = plane[iy * n + iz];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for iy in 0..n {
                    plane[iy * n + iz] = line[iy];
                }
            }
        }
        for yz in 0..n2 {
            for ix in 0..n {
                line[ix] = data[ix * n2 + yz];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for ix in 0..n {
                data[ix * n2 + yz] = line[ix];
            }
        }
    }

    if parallel {
        apply_checkerboard(data, n);
    } else {
        for (idx, v) in data.iter_mut().enumerate() {
            *v *= checkerboard_sign(idx, n);
        }
    }

    // global factor ((-1)^{N/2})³ from re-centering both domains
    if (n / 2) % 2 == 1 {
        for v in data.iter_mut() {
            *v = -*v;
        }
    }
}

/// Numerically robust sum of complex samples (pairwise cascade).
pub(crate) fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    if v.len() <= 32 {
        let mut acc = Complex64::default();
        for x in v {
            acc += x;
        }
        return acc;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Pairwise-cascade sum of the values of `f` over `0..len`: tight chunked
/// inner loops, chunk partials merged pairwise.
pub(crate) fn pairwise_sum_fn<F: Fn(usize) -> Complex64>(len: usize, f: &F) -> Complex64 {
    const CHUNK: usize = 256;
    if len <= CHUNK {
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..len {
            let v = f(i);
            re += v.re;
            im += v.im;
        }
        return Complex64::new(re, im);
    }
    let mut partials: Vec<Complex64> = Vec::with_capacity(len / CHUNK + 1);
    let mut i = 0;
    while i < len {
        let end = (i + CHUNK).min(len);
        let mut re = 0.0;
        let mut im = 0.0;
        for j in i..end {
            let v = f(j);
            re += v.re;
            im += v.im;
        }
        partials.push(Complex64::new(re, im));
        i = end;
    }
    pairwise_sum(&partials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// O(N⁶) reference for the centered DFT on a tiny grid.
    fn brute_centered_dft(data: &[Complex64], n: usize, inverse: bool) -> Vec<Complex64> {
        let half = n as i64 / 2;
        let sgn = if inverse { 1.0 } else { -1.0 };
        let mut out = vec![Complex64::default(); data.len()];
        let centered: Vec<i64> = (0..n as i64).map(|i| i - half).collect();
        for (po, outv) in out.iter_mut().enumerate() {
            let pz = centered[po % n];
            let py = centered[(po / n) % n];
            let px = centered[po / (n * n)];
            let mut acc = Complex64::default();
            for (qo, &val) in data.iter().enumerate() {
                let qz = centered[qo % n];
                let qy = centered[(qo / n) % n];
                let qx = centered[qo / (n * n)];
                let phase =
                    sgn * 2.0 * std::f64::consts::PI * ((px * qx + py * qy + pz * qz) as f64)
                        / n as f64;
                acc += val * Complex64::from_polar(1.0, phase);
            }
            *outv = acc;
        }
        out
    }

    #[test]
    fn centered_dft_matches_brute_force() {
        for &n in &[4usize, 6, 8] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3 + n as u64);
            let data: Vec<Complex64> = (0..n * n * n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            for &inverse in &[false, true] {
                let mut fast = data.clone();
                centered_dft3(&mut fast, n, inverse);
                let slow = brute_centered_dft(&data, n, inverse);
                let scale: f64 = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
                for (a, b) in fast.iter().zip(slow.iter()) {
                    assert!(
                        (a - b).norm() <= 1e-12 * scale.max(1.0),
                        "n={n} inverse={inverse}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<Complex64> = (0..1000)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64).cos()))
            .collect();
        let naive: Complex64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).norm() < 1e-9);
        let f = |i: usize| v[i];
        assert!((pairwise_sum_fn(v.len(), &f) - naive).norm() < 1e-9);
    }
}
