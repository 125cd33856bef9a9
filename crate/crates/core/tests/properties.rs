use isac_core::analysis::{nesz, wilson_interval, PulseDefinition, ViewingGeometry, Z_95};
use isac_core::channel::{LinkBudget, SnowModel};
use isac_core::compression::{range_compress, CompressionMethod, RangeCompressedMatrix};
use isac_core::emulation::{adapt_prf, emulate_ofdm_from_chirp};
use isac_core::geometry::{make_linear_trajectory, Vec3};
use isac_core::scenario::random_ofdm_symbol;
use isac_core::signal::{band_limit, FastTimeMatrix, FftPair};
use isac_core::waveform::{demap_symbols, map_bits, ofdm_demodulate, ofdm_modulate, Constellation, OfdmConfig};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

fn constellation() -> impl Strategy<Value = Constellation> {
    prop_oneof![
        Just(Constellation::Qpsk),
        Just(Constellation::Qam16),
        Just(Constellation::Qam64),
        Just(Constellation::Qam256),
    ]
}

proptest! {
    #[test]
    fn bits_survive_mapping(c in constellation(), words in prop::collection::vec(any::<u8>(), 1..40)) {
        let k = c.bits_per_symbol();
        let mut bits: Vec<bool> = words.iter().flat_map(|w| (0..8).map(move |i| w >> i & 1 == 1)).collect();
        bits.truncate(bits.len() / k * k);
        prop_assume!(!bits.is_empty());
        let symbols = map_bits(&bits, c).unwrap();
        prop_assert_eq!(demap_symbols(&symbols, c), bits);
    }

    #[test]
    fn ofdm_round_trip(c in constellation(), n_sym in 1usize..4, cp in 0usize..20, seed in any::<u64>()) {
        let cfg = OfdmConfig { constellation: c, cp_samples: cp, ..OfdmConfig::default() };
        let alphabet = c.alphabet();
        let mut r = isac_core::rng::stream(seed, "prop.symbols", 0);
        use rand::Rng;
        let symbols: Vec<Complex64> = (0..n_sym * cfg.m_active).map(|_| alphabet[r.random_range(0..alphabet.len())]).collect();
        let tx = ofdm_modulate(&symbols, &cfg).unwrap();
        prop_assert_eq!(tx.len(), n_sym * (cfg.m_fft + cp));
        let rx = ofdm_demodulate(&tx.samples, &cfg).unwrap();
        for (a, b) in rx.iter().zip(&symbols) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_fft_preserves_energy(values in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..300)) {
        let x: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let e0: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let mut y = x.clone();
        let fft = FftPair::new(y.len());
        fft.forward(&mut y);
        let e1: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        prop_assert!((e0 - e1).abs() <= 1e-9 * e0.max(1.0));
        fft.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).norm() <= 1e-9 * e0.sqrt().max(1.0));
        }
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 1u64..10_000_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(k, n, Z_95);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn nesz_slope_in_eirp_is_minus_one(eirp in -20.0f64..23.0, alt in 20.0f64..500.0, depth in 0.0f64..3.0) {
        let mut budget = LinkBudget::default();
        let view = ViewingGeometry { altitude: alt, off_nadir_deg: 45.0 };
        let snow = SnowModel::new(2.5).unwrap();
        let pulse = PulseDefinition::default();
        budget.eirp_dbm = eirp - 1.0;
        let a = nesz(&budget, &view, &pulse, 1000, (24.0, 0.4), &snow, depth).unwrap();
        budget.eirp_dbm = eirp;
        let b = nesz(&budget, &view, &pulse, 1000, (24.0, 0.4), &snow, depth).unwrap();
        prop_assert!((b - a + 1.0).abs() < 1e-9);
    }

    #[test]
    fn frame_based_matches_symbol_based(n in 1usize..64, blocks in 1usize..200) {
        let budget = LinkBudget::default();
        let view = ViewingGeometry { altitude: 100.0, off_nadir_deg: 45.0 };
        let snow = SnowModel::disabled();
        let sym = PulseDefinition::default();
        let frame = sym.frame_based(n).unwrap();
        let n_tau = n * blocks;
        let a = nesz(&budget, &view, &sym, n_tau, (24.0, 0.4), &snow, 0.0).unwrap();
        let b = nesz(&budget, &view, &frame, blocks, (24.0, 0.4), &snow, 0.0).unwrap();
        prop_assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn decimation_bookkeeping(n in 2usize..200, step in 1usize..9) {
        let prf = 800.0;
        let traj = make_linear_trajectory(Vec3::new(0.0, 0.0, 50.0), Vec3::new(3.0, 0.5, 0.0), prf, n).unwrap();
        let data = Array2::from_shape_fn((n, 3), |(k, i)| Complex64::new(k as f64, i as f64));
        let rc = RangeCompressedMatrix(FastTimeMatrix::new(data, 1e6, 0.0, traj.slow_time().to_vec()).unwrap());
        let (out, t) = adapt_prf(&rc, &traj, prf / step as f64).unwrap();
        prop_assert_eq!(out.n_pulses(), n.div_ceil(step));
        prop_assert_eq!(t.len(), out.n_pulses());
        for j in 0..out.n_pulses() {
            prop_assert_eq!(out.data[(j, 0)].re as usize, j * step);
            prop_assert_eq!(out.slow_time[j], t.slow_time()[j]);
            prop_assert_eq!(t.positions()[j], traj.positions()[j * step]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn emulation_commutes_with_linear_combinations(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        use rand::Rng;
        let cfg = OfdmConfig::default();
        let pulse = random_ofdm_symbol(&cfg, seed, "prop.pulse").unwrap();
        let mut r = isac_core::rng::stream(seed, "prop.rows", 0);
        let n = 200;
        let data = Array2::from_shape_fn((2, n), |_| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        let alpha = Complex64::new(re, im);
        let mut comb = data.clone();
        let row = &data.row(0).to_owned() * alpha + data.row(1);
        comb.row_mut(0).assign(&row);
        let mk = |d: Array2<Complex64>| RangeCompressedMatrix(FastTimeMatrix::new(d, cfg.sample_rate(), 0.0, vec![0.0, 1.0]).unwrap());
        let a = emulate_ofdm_from_chirp(&mk(data), &pulse).unwrap();
        let b = emulate_ofdm_from_chirp(&mk(comb), &pulse).unwrap();
        for i in 0..n {
            let want = alpha * a.data[(0, i)] + a.data[(1, i)];
            prop_assert!((b.data[(0, i)] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_forcing_inverts_emulation(seed in any::<u64>(), occupied in 50usize..300) {
        use rand::Rng;
        let cfg = OfdmConfig { m_fft: 128, cp_samples: 16, ..OfdmConfig::default() };
        let pulse = random_ofdm_symbol(&cfg, seed, "prop.pulse").unwrap();
        let n = 512;
        let mut r = isac_core::rng::stream(seed, "prop.scene", 0);
        let row: Vec<Complex64> = (0..n)
            .map(|i| if i < occupied { Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) } else { Complex64::new(0.0, 0.0) })
            .collect();
        let rc = RangeCompressedMatrix(FastTimeMatrix::new(Array2::from_shape_vec((1, n), row.clone()).unwrap(), cfg.sample_rate(), 0.0, vec![0.0]).unwrap());
        let raw = emulate_ofdm_from_chirp(&rc, &pulse).unwrap();
        let back = range_compress(&raw, &pulse, &cfg.support(), CompressionMethod::ZeroForcing).unwrap();
        let want = band_limit(&row, &cfg.support(), cfg.sample_rate());
        let peak = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in want.iter().zip(back.data.row(0)) {
            prop_assert!((a - b).norm() < 1e-6 * peak);
        }
    }
}
