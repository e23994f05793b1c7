use super::*;
use crate::mask::{centered_clean_mask, icf_mask, subband_mask, SubBandLayout, SubcarrierSet};
use crate::waveform::{clip, generate_qam_symbols, Modulation, OfdmModulator};
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn toy() -> WaveformConfig {
    WaveformConfig::new(8, 2, 4, 1).unwrap()
}

fn toy_symbol(seed: u64) -> (OfdmModulator, OfdmSymbol) {
    let m = OfdmModulator::new(toy()).unwrap();
    let data = generate_qam_symbols(Modulation::Qam16, 4, seed).unwrap();
    let s = m.modulate(&data).unwrap();
    (m, s)
}

fn nr_symbol(m: &OfdmModulator, seed: u64) -> OfdmSymbol {
    let data = generate_qam_symbols(Modulation::Qpsk, 1272, seed).unwrap();
    m.modulate(&data).unwrap()
}

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// Threshold that clips exactly the largest sample of `x`.
fn clip_one(x: &[Complex64]) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.norm()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!(mags[0] > mags[1]);
    0.5 * (mags[0] + mags[1])
}

#[test]
fn below_threshold_is_identity() {
    let (m, s) = toy_symbol(1);
    let mask = icf_mask(m.config()).materialize(m.config()).unwrap();
    let peak = s.time().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let clipper = ClipperConfig::new(100.0, 1, peak * 1.01).unwrap();
    let out = icf_step(m.transform(), &s, &clipper, &mask).unwrap();
    assert_eq!(out.time(), s.time());
    assert_eq!(out.spectrum(), s.spectrum());
    assert_eq!(out.iteration(), 1);
}

#[test]
fn icf_step_matches_naive_oracle() {
    let (m, s) = toy_symbol(4);
    let cfg = *m.config();
    let a = clip_one(s.time());
    let clipper = ClipperConfig::new(0.0, 1, a).unwrap();
    let mask = icf_mask(&cfg).materialize(&cfg).unwrap();
    let out = icf_step(m.transform(), &s, &clipper, &mask).unwrap();

    let mut clipped = s.time().to_vec();
    let mut hits = 0;
    for v in clipped.iter_mut() {
        if v.norm() > a {
            *v = Complex64::from_polar(a, v.arg());
            hits += 1;
        }
    }
    assert_eq!(hits, 1);
    let mut expected = naive_dft(&clipped);
    for (bin, v) in expected.iter_mut().enumerate() {
        if !cfg.is_active(cfg.index_of_bin(bin)) {
            *v = c(0.0, 0.0);
        }
    }
    for (a, b) in out.spectrum().iter().zip(&expected) {
        assert!((a - b).norm() < 1e-13, "{a} vs {b}");
    }
}

#[test]
fn icef_without_clean_set_is_icf_bitwise() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let mask = icf_mask(&cfg).materialize(&cfg).unwrap();
    let s = nr_symbol(&m, 9);
    let clipper = ClipperConfig::for_symbol(6.0, 3, &s).unwrap();
    let mut a = s.clone();
    let mut b = s;
    for _ in 0..3 {
        a = icf_step(m.transform(), &a, &clipper, &mask).unwrap();
        b = icef_step(m.transform(), &b, &clipper, &mask).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn icef_with_empty_noisy_set_returns_reference() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let layout = SubBandLayout::new(12, 106, 0..12).unwrap();
    let mask = subband_mask(&cfg, &layout).unwrap().materialize(&cfg).unwrap();
    let s = nr_symbol(&m, 2);
    let clipper = ClipperConfig::for_symbol(4.0, 5, &s).unwrap();
    let out = icef_step(m.transform(), &s, &clipper, &mask).unwrap();
    assert_eq!(out.spectrum(), s.reference_spectrum());
    assert_eq!(out.time(), s.time());
}

#[test]
fn weighted_half_matches_hand_oracle() {
    let (m, s) = toy_symbol(7);
    let cfg = *m.config();
    let mask = icf_mask(&cfg).with_uniform_weight(0.5).unwrap();
    let dense = mask.materialize(&cfg).unwrap();
    let a = clip_one(s.time());
    let clipper = ClipperConfig::new(0.0, 1, a).unwrap();
    let out = icef_step(m.transform(), &s, &clipper, &dense).unwrap();

    let clipped_spec = naive_dft(&clip(s.time(), a));
    for bin in 0..cfg.fft_size() {
        let x0 = s.reference_spectrum()[bin];
        let expected = if cfg.is_active(cfg.index_of_bin(bin)) {
            x0 + 0.5 * (clipped_spec[bin] - x0)
        } else {
            c(0.0, 0.0)
        };
        assert!((out.spectrum()[bin] - expected).norm() < 1e-13);
    }
}

#[test]
fn clean_and_null_bins_hold_exactly() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let fm = centered_clean_mask(&cfg, 40).unwrap();
    let mask = fm.materialize(&cfg).unwrap();
    let mut s = nr_symbol(&m, 5);
    let clipper = ClipperConfig::for_symbol(6.0, 5, &s).unwrap();
    for _ in 0..5 {
        s = icef_step(m.transform(), &s, &clipper, &mask).unwrap();
        for k in fm.clean().iter() {
            let bin = cfg.bin_of(k);
            assert_eq!(s.spectrum()[bin], s.reference_spectrum()[bin]);
        }
        for k in fm.null().iter() {
            assert_eq!(s.spectrum()[cfg.bin_of(k)], c(0.0, 0.0));
        }
    }
}

#[test]
fn literal_and_casewise_paths_agree() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let binary = centered_clean_mask(&cfg, 20).unwrap();
    let weighted = binary.clone().with_uniform_weight(0.3).unwrap();
    for fm in [binary, weighted] {
        let mask = fm.materialize(&cfg).unwrap();
        let s = nr_symbol(&m, 13);
        let clipper = ClipperConfig::for_symbol(5.0, 1, &s).unwrap();
        let fast = icef_step(m.transform(), &s, &clipper, &mask).unwrap();
        let slow = icef_step_literal(m.transform(), &s, &clipper, &mask).unwrap();
        let num: f64 = fast.spectrum().iter().zip(slow.spectrum()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = slow.spectrum().iter().map(|v| v.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-12);
    }
}

#[test]
fn icf_rejects_clean_sets() {
    let cfg = WaveformConfig::nr_20mhz();
    let m = OfdmModulator::new(cfg).unwrap();
    let mask = centered_clean_mask(&cfg, 10).unwrap().materialize(&cfg).unwrap();
    let s = nr_symbol(&m, 1);
    let clipper = ClipperConfig::for_symbol(6.0, 1, &s).unwrap();
    let err = icf_step(m.transform(), &s, &clipper, &mask).unwrap_err();
    assert!(matches!(err, Error::Contract(ref msg) if msg.contains("icef_step")));
    let fm = centered_clean_mask(&cfg, 10).unwrap();
    assert!(PaprReducer::new(&cfg, &fm, Method::Icf, 6.0, 10).is_err());
}

#[test]
fn dimension_mismatch_is_reported() {
    let (m, s) = toy_symbol(1);
    let nr = WaveformConfig::nr_20mhz();
    let mask = icf_mask(&nr).materialize(&nr).unwrap();
    let clipper = ClipperConfig::new(6.0, 1, 0.1).unwrap();
    assert!(matches!(
        icef_step(m.transform(), &s, &clipper, &mask),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn run_returns_immediately_when_target_met() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let s = nr_symbol(&m, 3);
    let initial = papr_db(s.time()).unwrap();
    let reducer = PaprReducer::new(&cfg, &icf_mask(&cfg), Method::Icef, initial + 0.01, 20).unwrap();
    let r = reducer.run(&s).unwrap();
    assert_eq!(r.iterations_used, 0);
    assert!(r.converged);
    assert_eq!(r.symbol, s);
    assert_eq!(r.papr_trace_db, vec![initial]);
}

#[test]
fn run_respects_iteration_cap() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let s = nr_symbol(&m, 4);
    let reducer = PaprReducer::new(&cfg, &centered_clean_mask(&cfg, 34).unwrap(), Method::Icef, 4.0, 1).unwrap();
    let r = reducer.run(&s).unwrap();
    assert_eq!(r.iterations_used, 1);
    assert!(!r.converged);
    assert_eq!(r.papr_trace_db.len(), 2);
    assert_eq!(r.final_papr_db, r.papr_trace_db[1]);
}

#[test]
fn run_trace_and_clip_bound() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let s = nr_symbol(&m, 8);
    let reducer = PaprReducer::new(&cfg, &centered_clean_mask(&cfg, 20).unwrap(), Method::Icef, 6.0, 20).unwrap();
    let clipper = reducer.clipper_for(&s).unwrap();
    let r = reducer.run_with_clipper(&s, &clipper).unwrap();
    assert_eq!(r.papr_trace_db.len(), r.iterations_used + 1);
    assert!(r.iterations_used >= 1);
    if r.iterations_used < 20 {
        assert!(r.converged);
    }
    let clipped = clip(r.symbol.time(), clipper.amplitude_threshold);
    assert!(clipped.iter().all(|v| v.norm() <= clipper.amplitude_threshold));

    let untraced = reducer.clone().keep_trace(false).run(&s).unwrap();
    assert!(untraced.papr_trace_db.is_empty());
    assert_eq!(untraced.symbol, r.symbol);
    assert_eq!(untraced.final_papr_db, r.final_papr_db);
}

#[test]
fn checkpoints_match_separate_runs() {
    let m = OfdmModulator::new(WaveformConfig::nr_20mhz()).unwrap();
    let cfg = *m.config();
    let fm = centered_clean_mask(&cfg, 34).unwrap();
    let s = nr_symbol(&m, 21);
    let reducer = PaprReducer::new(&cfg, &fm, Method::Icef, 6.0, 20).unwrap();
    let caps = [10, 1, 20];
    let all = reducer.run_checkpoints(&s, &caps).unwrap();
    for (cap, got) in caps.iter().zip(&all) {
        let single = PaprReducer::new(&cfg, &fm, Method::Icef, 6.0, *cap).unwrap().run(&s).unwrap();
        assert_eq!(&single, got);
    }
}

#[test]
fn run_requires_fresh_symbol() {
    let (m, s) = toy_symbol(2);
    let cfg = *m.config();
    let mask = icf_mask(&cfg).materialize(&cfg).unwrap();
    let clipper = ClipperConfig::new(0.0, 2, clip_one(s.time())).unwrap();
    let stepped = icf_step(m.transform(), &s, &clipper, &mask).unwrap();
    assert!(matches!(
        run(m.transform(), &stepped, &clipper, &mask, Method::Icf),
        Err(Error::Contract(_))
    ));
}

#[test]
fn explicit_sets_keep_weighted_zero_bins_clean() {
    let (m, s) = toy_symbol(11);
    let cfg = *m.config();
    let fm = crate::mask::FrequencyMask::from_passband(
        &cfg,
        SubcarrierSet::from_indices([-2, -1, 0, 1]),
        SubcarrierSet::new(),
    )
    .with_weights(vec![0.0, 0.7, 0.0, 1.0])
    .unwrap();
    let mask = fm.materialize(&cfg).unwrap();
    let clipper = ClipperConfig::new(0.0, 1, clip_one(s.time())).unwrap();
    let out = icef_step_literal(m.transform(), &s, &clipper, &mask).unwrap();
    let rms = (s.reference_power()).sqrt();
    for k in [-2, 0] {
        let bin = cfg.bin_of(k);
        assert!((out.spectrum()[bin] - s.reference_spectrum()[bin]).norm() <= 1e-12 * rms);
    }
}
