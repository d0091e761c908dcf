//! Radix-2 FFT used by the filterbank front-end.
//!
//! The independent O(n^2) DFT that the tests check this against lives in the
//! test suite, not here, so the two routes stay separate.

use std::f64::consts::TAU;

/// In-place iterative radix-2 Cooley-Tukey over interleaved (re, im) pairs.
/// `n` must be a power of two.
fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -TAU / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let (mut cr, mut ci) = (1.0f64, 0.0f64);
            for k in 0..len / 2 {
                let (ur, ui) = (re[i + k], im[i + k]);
                let (vr, vi) = (
                    re[i + k + len / 2] * cr - im[i + k + len / 2] * ci,
                    re[i + k + len / 2] * ci + im[i + k + len / 2] * cr,
                );
                re[i + k] = ur + vr;
                im[i + k] = ui + vi;
                re[i + k + len / 2] = ur - vr;
                im[i + k + len / 2] = ui - vi;
                let next_cr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = next_cr;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Magnitude spectrum of a real signal, zero-padded to `n_fft` (a power of
/// two). Returns the `n_fft/2 + 1` non-negative frequency bins.
pub fn magnitude_spectrum(signal: &[f64], n_fft: usize) -> Vec<f64> {
    assert!(n_fft.is_power_of_two(), "fft size must be a power of two");
    assert!(signal.len() <= n_fft, "signal longer than fft size");
    let mut re = vec![0.0; n_fft];
    let mut im = vec![0.0; n_fft];
    re[..signal.len()].copy_from_slice(signal);
    fft_in_place(&mut re, &mut im);
    (0..=n_fft / 2)
        .map(|k| (re[k] * re[k] + im[k] * im[k]).sqrt())
        .collect()
}

/// Smallest power of two >= n.
pub fn next_power_of_two(n: usize) -> usize {
    n.next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Independent reference: direct O(n^2) discrete Fourier transform.
    fn naive_magnitude(signal: &[f64], n_fft: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n_fft / 2 + 1);
        for k in 0..=n_fft / 2 {
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, &x) in signal.iter().enumerate() {
                let ang = -TAU * k as f64 * n as f64 / n_fft as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            out.push((re * re + im * im).sqrt());
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_random_signals() {
        let mut rng = Rng::new(77);
        for &(len, n_fft) in &[(16usize, 16usize), (100, 128), (400, 512)] {
            let signal: Vec<f64> = (0..len).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let fast = magnitude_spectrum(&signal, n_fft);
            let slow = naive_magnitude(&signal, n_fft);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pure_tone_peaks_at_its_bin() {
        // Exact bin frequency: 8 cycles in 128 samples.
        let n = 128;
        let signal: Vec<f64> = (0..n).map(|i| (TAU * 8.0 * i as f64 / n as f64).sin()).collect();
        let mags = magnitude_spectrum(&signal, n);
        let argmax = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 8);
        // Energy concentrated: peak is n/2 for a unit sine.
        assert!((mags[8] - n as f64 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_signal_gives_zero_spectrum() {
        let mags = magnitude_spectrum(&[0.0; 64], 64);
        assert!(mags.iter().all(|&m| m == 0.0));
    }
}
