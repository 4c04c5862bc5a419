//! FFT peak inspection of generated recordings.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sonn_core::signal::{RawRecording, Severity, IMS_SAMPLE_RATE};
use sonn_core::synthgen::{synthesize, BearingGeometry, FaultKind, SeverityProfile};

const DURATION: f64 = 1.0;
const SEED: u64 = 17;

/// Single-sided magnitude spectrum of channel x; 1 Hz bins for a 1 s record.
fn spectrum(rec: &RawRecording) -> Vec<f64> {
    let x = &rec.channels[0].samples;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf[..x.len() / 2].iter().map(|c| c.norm()).collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Largest magnitude within two bins of `freq`.
fn peak(spec: &[f64], freq: f64) -> f64 {
    let bin = (freq * DURATION).round() as usize;
    spec[bin - 2..=bin + 2].iter().copied().fold(0.0, f64::max)
}

fn peak_in_band(spec: &[f64], lo: f64, hi: f64) -> f64 {
    spec[(lo * DURATION) as usize..(hi * DURATION) as usize]
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn generate(class: Severity, profile: &SeverityProfile) -> Vec<f64> {
    let rec = synthesize(
        &BearingGeometry::default(),
        FaultKind::InnerRace,
        class,
        profile,
        DURATION,
        IMS_SAMPLE_RATE,
        SEED,
    )
    .unwrap();
    spectrum(&rec)
}

struct Zones {
    zone1: f64,
    zone2: f64,
    zone3: f64,
}

/// Zone peaks in units of the spectrum's median magnitude (the noise floor).
fn zones(spec: &[f64], profile: &SeverityProfile) -> Zones {
    let g = BearingGeometry::default();
    let floor = median(spec);
    let f_id = g.inner_race_defect_frequency();
    let f_res = profile.resonance_hz;
    Zones {
        zone1: peak(spec, g.shaft_hz) / floor,
        zone2: peak(spec, f_id).max(peak(spec, 2.0 * f_id)) / floor,
        zone3: peak_in_band(spec, f_res - 200.0, f_res + 200.0) / floor,
    }
}

const PRESENT: f64 = 10.0;

#[test]
fn healthy_has_no_defect_line() {
    let p = SeverityProfile::default();
    let spec = generate(Severity::Healthy, &p);
    let f_id = BearingGeometry::default().inner_race_defect_frequency();
    assert!(peak(&spec, f_id) <= 3.0 * median(&spec));
}

#[test]
fn severe_inner_race_shows_defect_harmonics() {
    let p = SeverityProfile::default();
    let spec = generate(Severity::SevereFault, &p);
    let f_id = BearingGeometry::default().inner_race_defect_frequency();
    let floor = median(&spec);
    assert!(peak(&spec, f_id) >= 10.0 * floor);
    assert!(peak(&spec, 2.0 * f_id) >= 10.0 * floor);
}

#[test]
fn zone_presence_pattern_per_class() {
    let p = SeverityProfile::default();
    let expected = [
        (Severity::Healthy, [true, false, false]),
        (Severity::EarlyFault, [true, false, true]),
        (Severity::ModerateFault, [true, true, true]),
        (Severity::SevereFault, [true, true, true]),
    ];
    for (class, pattern) in expected {
        let z = zones(&generate(class, &p), &p);
        let seen = [z.zone1 >= PRESENT, z.zone2 >= PRESENT, z.zone3 >= PRESENT];
        assert_eq!(seen, pattern, "{class}: zone peaks {:.1} {:.1} {:.1}", z.zone1, z.zone2, z.zone3);
    }
}

#[test]
fn severe_peaks_exceed_moderate() {
    let p = SeverityProfile::default();
    let g = BearingGeometry::default();
    let moderate = generate(Severity::ModerateFault, &p);
    let severe = generate(Severity::SevereFault, &p);
    let f_id = g.inner_race_defect_frequency();
    assert!(peak(&severe, f_id) > peak(&moderate, f_id));
    let band = |s: &[f64]| peak_in_band(s, p.resonance_hz - 200.0, p.resonance_hz + 200.0);
    assert!(band(&severe) > band(&moderate));
}

#[test]
fn defect_line_grows_with_zone2_amplitude() {
    let f_id = BearingGeometry::default().inner_race_defect_frequency();
    let mut last = 0.0;
    for a2 in [0.0, 0.1, 0.3, 0.7, 1.5, 3.0] {
        let mut p = SeverityProfile::default();
        p.classes[Severity::SevereFault.index()].zone2 = a2;
        let m = peak(&generate(Severity::SevereFault, &p), f_id);
        assert!(m > last, "zone2 {a2}: {m} <= {last}");
        last = m;
    }
}

#[test]
fn rolling_element_carrier_uses_ball_defect_frequency() {
    let g = BearingGeometry::default();
    let p = SeverityProfile::default();
    let rec = synthesize(&g, FaultKind::RollingElement, Severity::SevereFault, &p, DURATION, IMS_SAMPLE_RATE, SEED).unwrap();
    let spec = spectrum(&rec);
    assert!(peak(&spec, g.ball_defect_frequency()) >= PRESENT * median(&spec));
}

#[test]
fn silent_profile_gives_zero_signal() {
    let rec = synthesize(
        &BearingGeometry::default(),
        FaultKind::InnerRace,
        Severity::SevereFault,
        &SeverityProfile::silent(),
        0.1,
        IMS_SAMPLE_RATE,
        3,
    )
    .unwrap();
    assert!(rec.channels.iter().all(|c| c.samples.iter().all(|&v| v == 0.0)));
}
