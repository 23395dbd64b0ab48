//! Fast receivers against dense-matrix oracles on small frames.

mod common;

use std::f64::consts::PI;

use common::coqam_gram_row;
use mcwave::link::{gfdm_receive, random_qam4, ChannelSpec, Receiver};
use mcwave::modem::{build_symbol_grid, slice_qam4, wcp_coqam_modulate, SymbolGrid};
use mcwave::pulse::{build_prototype, build_prototype_centered, dzt_orthogonalize, PulseCenter};
use mcwave::{ComplexSignal, ModemConfig, PulseKind};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const K: usize = 8;
const M: usize = 3;

fn gfdm_config(n_occupied: usize, kind: PulseKind, rolloff: f64) -> ModemConfig {
    let p = build_prototype(kind, K, M, rolloff).unwrap();
    ModemConfig::gfdm(K, M, n_occupied, 4, 0, p).unwrap()
}

/// Columns `p[(n - mK) mod N] e^{-j2πkn/K}` in grid order k*M + m.
fn gfdm_matrix(taps: &[f64]) -> DMatrix<Complex64> {
    let n = K * M;
    DMatrix::from_fn(n, n, |row, col| {
        let (k, m) = (col / M, col % M);
        let tap = taps[(row + n - m * K) % n];
        Complex64::from_polar(tap, -2.0 * PI * (k * row % K) as f64 / K as f64)
    })
}

fn random_block(seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..K * M)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect()
}

/// Prepends a CP so the receiver sees exactly `block` after stripping it.
fn with_cp(block: &[Complex64], cp: usize) -> ComplexSignal {
    let mut v = block[block.len() - cp..].to_vec();
    v.extend_from_slice(block);
    ComplexSignal::baseband(v).unwrap()
}

fn run(cfg: &ModemConfig, block: &[Complex64], mode: Receiver, iters: usize) -> Vec<Complex64> {
    let h = ChannelSpec::identity().frequency_response(K * M).unwrap();
    let grid = gfdm_receive(&with_cp(block, cfg.cp_len()), cfg, &h, mode, iters).unwrap();
    grid.complex().unwrap().to_vec()
}

fn max_diff_on(cfg: &ModemConfig, fast: &[Complex64], dense: &DVector<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for &k in cfg.occupied() {
        for m in 0..M {
            worst = worst.max((fast[k * M + m] - dense[k * M + m]).norm());
        }
    }
    worst
}

#[test]
fn zero_forcing_matches_dense_inverse() {
    for (n_occ, kind, rolloff) in [
        (K, PulseKind::RaisedCosine, 0.1),
        (6, PulseKind::RaisedCosine, 0.5),
        (K, PulseKind::gaussian(), 0.0),
    ] {
        let cfg = gfdm_config(n_occ, kind, rolloff);
        let a = gfdm_matrix(cfg.pulse().taps());
        let y = random_block(11);
        let dense = a.lu().solve(&DVector::from_vec(y.clone())).expect("A is invertible");
        let fast = run(&cfg, &y, Receiver::Zf, 0);
        let err = max_diff_on(&cfg, &fast, &dense);
        assert!(err < 1e-10, "{kind:?}: {err:e}");
    }
}

#[test]
fn matched_filter_matches_dense_adjoint() {
    for n_occ in [K, 5] {
        let cfg = gfdm_config(n_occ, PulseKind::RootRaisedCosine, 0.3);
        let a = gfdm_matrix(cfg.pulse().taps());
        let y = random_block(12);
        let dense = a.adjoint() * DVector::from_vec(y.clone());
        let fast = run(&cfg, &y, Receiver::Mf, 0);
        assert!(max_diff_on(&cfg, &fast, &dense) < 1e-12);
    }
}

/// Serial cancellation written out with the dense Gram matrix, recomputing
/// every interference sum from scratch.
fn dense_dsic(cfg: &ModemConfig, a: &DMatrix<Complex64>, y: &[Complex64], iters: usize) -> DVector<Complex64> {
    let gram = a.adjoint() * a;
    let y_mf = a.adjoint() * DVector::from_vec(y.to_vec());
    let idx: Vec<usize> = cfg
        .occupied()
        .iter()
        .flat_map(|&k| (0..M).map(move |m| k * M + m))
        .collect();
    let mut dec = DVector::from_element(K * M, Complex64::new(0.0, 0.0));
    for &i in &idx {
        dec[i] = slice_qam4(y_mf[i]);
    }
    let soft = |dec: &DVector<Complex64>, i: usize| {
        let interference: Complex64 = idx.iter().filter(|&&j| j != i).map(|&j| gram[(i, j)] * dec[j]).sum();
        y_mf[i] - interference
    };
    for _ in 0..iters {
        for &i in &idx {
            dec[i] = slice_qam4(soft(&dec, i));
        }
    }
    let mut out = y_mf.clone();
    for &i in &idx {
        out[i] = soft(&dec, i);
    }
    out
}

#[test]
fn dsic_matches_dense_serial_cancellation() {
    let cfg = gfdm_config(6, PulseKind::RaisedCosine, 0.9);
    let a = gfdm_matrix(cfg.pulse().taps());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let tx = build_symbol_grid(&random_qam4(&mut rng, cfg.symbols_per_frame()), &cfg).unwrap();
    let clean = &a * DVector::from_vec(tx.complex().unwrap().to_vec());
    let noise = random_block(14);
    let y: Vec<Complex64> = clean.iter().zip(&noise).map(|(c, w)| c + 0.3 * w).collect();
    for iters in [1, 2, 4] {
        let dense = dense_dsic(&cfg, &a, &y, iters);
        let fast = run(&cfg, &y, Receiver::MfDsic, iters);
        let err = max_diff_on(&cfg, &fast, &dense);
        assert!(err < 1e-10, "{iters} iterations: {err:e}");
    }
}

#[test]
fn coqam_gram_oracle_matches_modulator_atoms() {
    let p = build_prototype_centered(PulseKind::RaisedCosine, K, M, 0.5, PulseCenter::HalfSample).unwrap();
    let p = dzt_orthogonalize(&p).unwrap();
    let cfg = ModemConfig::wcp_coqam(K, M, K, 0, 0, p).unwrap();
    let cols = 2 * M;
    let atom = |k: usize, m: usize| {
        let mut grid = SymbolGrid::zeros_for(&cfg);
        grid.real_mut().unwrap()[k * cols + m] = 1.0;
        wcp_coqam_modulate(&grid, &cfg).unwrap().into_samples()
    };
    let atoms: Vec<Vec<Complex64>> = (0..K)
        .flat_map(|k| (0..cols).map(move |m| (k, m)))
        .map(|(k, m)| atom(k, m))
        .collect();
    let taps = cfg.pulse().taps();
    let mut worst: f64 = 0.0;
    for m in 0..cols {
        for mp in 0..cols {
            let row = coqam_gram_row(taps, K, m, mp);
            for k in 0..K {
                for kp in 0..K {
                    let a = &atoms[k * cols + m];
                    let b = &atoms[kp * cols + mp];
                    let direct: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                    let dk = kp as i64 - k as i64 + K as i64 - 1;
                    worst = worst.max((direct.re - row[dk as usize]).abs());
                }
            }
        }
    }
    assert!(worst < 1e-12, "{worst:e}");
}
