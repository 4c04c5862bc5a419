//! Synthetic bearing vibration with defect-frequency physics and a
//! three-zone spectral severity model.
//!
//! Zone I holds shaft-speed harmonics, zone II the bearing defect frequency
//! and its harmonics, zone III exponentially decaying resonance rings
//! excited once per defect period. Each severity class switches zones on
//! and scales them according to a [`SeverityProfile`].

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::signal::{Channel, Dataset, RawRecording, Severity, SignalError, IMS_SAMPLE_RATE, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid bearing geometry: {0}")]
    Geometry(String),
    #[error("invalid severity profile: {0}")]
    Profile(String),
    #[error("{name} at {freq:.1} Hz is at or above the Nyquist limit {nyquist:.1} Hz")]
    Nyquist { name: String, freq: f64, nyquist: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Rolling-element bearing with a stationary outer race and the inner race
/// turning with the shaft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingGeometry {
    /// number of balls or rollers
    pub balls: u32,
    pub ball_diameter: f64,
    pub pitch_diameter: f64,
    /// contact angle in radians
    pub contact_angle: f64,
    /// shaft (rotor) speed in Hz
    pub shaft_hz: f64,
}

impl Default for BearingGeometry {
    /// Double-row roller bearing of the IMS rig at 2000 RPM.
    fn default() -> Self {
        Self {
            balls: 16,
            ball_diameter: 0.331,
            pitch_diameter: 2.815,
            contact_angle: 15.17_f64.to_radians(),
            shaft_hz: 2000.0 / 60.0,
        }
    }
}

impl BearingGeometry {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Geometry(m.to_string()));
        if self.balls < 1 {
            return bad("ball count must be at least 1");
        }
        if !(self.ball_diameter > 0.0 && self.ball_diameter < self.pitch_diameter) {
            return bad("need 0 < ball diameter < pitch diameter");
        }
        if !(self.shaft_hz > 0.0 && self.shaft_hz.is_finite()) {
            return bad("shaft speed must be positive");
        }
        if !(0.0..=FRAC_PI_2).contains(&self.contact_angle) {
            return bad("contact angle must lie in [0, pi/2]");
        }
        Ok(())
    }

    fn ratio_cos(&self) -> f64 {
        self.ball_diameter / self.pitch_diameter * self.contact_angle.cos()
    }

    /// Fundamental cage frequency `f_rm/2 * (1 - BD/PD cos theta)`.
    pub fn cage_frequency(&self) -> f64 {
        0.5 * self.shaft_hz * (1.0 - self.ratio_cos())
    }

    /// Inner-race defect frequency `n/2 * f_rm * (1 + BD/PD cos theta)`.
    pub fn inner_race_defect_frequency(&self) -> f64 {
        0.5 * self.balls as f64 * self.shaft_hz * (1.0 + self.ratio_cos())
    }

    /// Ball defect frequency `PD/(2 BD) * f_rm * (1 - (BD cos theta / PD)^2)`.
    pub fn ball_defect_frequency(&self) -> f64 {
        let rc = self.ratio_cos();
        self.pitch_diameter / (2.0 * self.ball_diameter) * self.shaft_hz * (1.0 - rc * rc)
    }

    pub fn defect_frequency(&self, kind: FaultKind) -> f64 {
        match kind {
            FaultKind::InnerRace => self.inner_race_defect_frequency(),
            FaultKind::RollingElement => self.ball_defect_frequency(),
        }
    }

    /// Keys `balls`, `ball_diameter`, `pitch_diameter`, `contact_angle_deg`
    /// and `shaft_rpm`, defaulting to [`BearingGeometry::default`].
    pub fn from_kv(kv: &KvConfig) -> Result<Self, SynthError> {
        let mut g = Self::default();
        kv.apply("balls", &mut g.balls)?;
        kv.apply("ball_diameter", &mut g.ball_diameter)?;
        kv.apply("pitch_diameter", &mut g.pitch_diameter)?;
        if let Some(deg) = kv.get_parsed::<f64>("contact_angle_deg")? {
            g.contact_angle = deg.to_radians();
        }
        if let Some(rpm) = kv.get_parsed::<f64>("shaft_rpm")? {
            g.shaft_hz = rpm / 60.0;
        }
        g.validate()?;
        Ok(g)
    }
}

pub fn cage_frequency(g: &BearingGeometry) -> f64 {
    g.cage_frequency()
}

pub fn inner_race_defect_frequency(g: &BearingGeometry) -> f64 {
    g.inner_race_defect_frequency()
}

pub fn ball_defect_frequency(g: &BearingGeometry) -> f64 {
    g.ball_defect_frequency()
}

/// Which defect drives zone II and the zone III excitation rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    InnerRace,
    RollingElement,
}

impl FromStr for FaultKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inner" | "inner-race" => Ok(FaultKind::InnerRace),
            "rolling" | "rolling-element" | "ball" => Ok(FaultKind::RollingElement),
            other => Err(SynthError::Argument(format!("unknown fault kind `{other}`"))),
        }
    }
}

impl FaultKind {
    pub fn name(self) -> &'static str {
        match self {
            FaultKind::InnerRace => "inner",
            FaultKind::RollingElement => "rolling",
        }
    }
}

/// Zone amplitudes for one severity class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZoneAmplitudes {
    /// shaft-harmonic amplitude (fundamental; harmonic h gets `zone1 / h`)
    pub zone1: f64,
    /// defect-harmonic amplitude (fundamental; harmonic h gets `zone2 / h`)
    pub zone2: f64,
    /// peak amplitude of each resonance ring
    pub zone3: f64,
    /// standard deviation of the additive white Gaussian noise
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeverityProfile {
    pub classes: [ZoneAmplitudes; NUM_CLASSES],
    pub shaft_harmonics: usize,
    pub defect_harmonics: usize,
    pub resonance_hz: f64,
    /// envelope decay rate of a ring, 1/s
    pub ring_decay: f64,
}

impl Default for SeverityProfile {
    fn default() -> Self {
        let z = |zone1, zone2, zone3, noise| ZoneAmplitudes {
            zone1,
            zone2,
            zone3,
            noise,
        };
        Self {
            classes: [
                z(1.0, 0.0, 0.0, 0.4),
                z(1.0, 0.0, 0.4, 0.4),
                z(1.0, 0.3, 0.7, 0.4),
                z(1.0, 0.6, 1.2, 0.4),
            ],
            shaft_harmonics: 3,
            defect_harmonics: 5,
            resonance_hz: 4000.0,
            ring_decay: 500.0,
        }
    }
}

impl SeverityProfile {
    /// Every amplitude zero; produces silence.
    pub fn silent() -> Self {
        Self {
            classes: [ZoneAmplitudes::default(); NUM_CLASSES],
            ..Self::default()
        }
    }

    pub fn amplitudes(&self, class: Severity) -> ZoneAmplitudes {
        self.classes[class.index()]
    }

    /// Checks amplitude signs and finiteness; [`SeverityProfile::check_zone_pattern`]
    /// additionally enforces the class zone pattern.
    pub fn validate(&self) -> Result<(), SynthError> {
        for (c, a) in Severity::ALL.iter().zip(&self.classes) {
            for v in [a.zone1, a.zone2, a.zone3, a.noise] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(SynthError::Profile(format!("{c}: amplitudes must be finite and non-negative")));
                }
            }
        }
        if !(self.resonance_hz > 0.0) || !(self.ring_decay > 0.0) {
            return Err(SynthError::Profile("resonance and decay must be positive".into()));
        }
        Ok(())
    }

    /// Healthy: zone I only. Early: no zone II. Moderate and severe: all
    /// zones, severe strictly stronger in zones II and III.
    pub fn check_zone_pattern(&self) -> Result<(), SynthError> {
        self.validate()?;
        let [h, e, m, s] = self.classes;
        let fail = |m: &str| Err(SynthError::Profile(m.to_string()));
        if h.zone2 != 0.0 || h.zone3 != 0.0 {
            return fail("healthy must have no zone II or III energy");
        }
        if e.zone2 != 0.0 {
            return fail("early fault must have no zone II energy");
        }
        if [m.zone1, m.zone2, m.zone3, s.zone1, s.zone2, s.zone3].iter().any(|&v| v <= 0.0) {
            return fail("moderate and severe faults need energy in every zone");
        }
        if !(s.zone2 > m.zone2 && s.zone3 > m.zone3) {
            return fail("severe fault must exceed moderate in zones II and III");
        }
        Ok(())
    }

    /// Keys `<class>.zone1|zone2|zone3|noise`, `shaft_harmonics`,
    /// `defect_harmonics`, `resonance_hz`, `ring_decay`.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, SynthError> {
        let mut p = Self::default();
        for c in Severity::ALL {
            let a = &mut p.classes[c.index()];
            kv.apply(&format!("{}.zone1", c.name()), &mut a.zone1)?;
            kv.apply(&format!("{}.zone2", c.name()), &mut a.zone2)?;
            kv.apply(&format!("{}.zone3", c.name()), &mut a.zone3)?;
            kv.apply(&format!("{}.noise", c.name()), &mut a.noise)?;
        }
        kv.apply("shaft_harmonics", &mut p.shaft_harmonics)?;
        kv.apply("defect_harmonics", &mut p.defect_harmonics)?;
        kv.apply("resonance_hz", &mut p.resonance_hz)?;
        kv.apply("ring_decay", &mut p.ring_decay)?;
        p.validate()?;
        Ok(p)
    }
}

/// Generates a deterministic two-channel recording for one class.
///
/// Channel x and y share zone II and zone III content; their zone I
/// sinusoids are 90 degrees apart and each channel has its own noise.
/// Component phases and the first impact time are drawn from the seed.
pub fn synthesize(
    g: &BearingGeometry,
    kind: FaultKind,
    class: Severity,
    profile: &SeverityProfile,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<RawRecording, SynthError> {
    g.validate()?;
    profile.validate()?;
    if !(sample_rate > 0.0) {
        return Err(SynthError::Argument("sample rate must be positive".into()));
    }
    let n = (duration * sample_rate).round();
    if !(n >= 1.0) {
        return Err(SynthError::Argument(format!(
            "duration {duration} s at {sample_rate} Hz yields no samples"
        )));
    }
    let n = n as usize;
    let nyquist = sample_rate / 2.0;
    let defect = g.defect_frequency(kind);
    let checks = [
        ("shaft harmonic", g.shaft_hz * profile.shaft_harmonics as f64),
        ("defect harmonic", defect * profile.defect_harmonics as f64),
        ("resonance", profile.resonance_hz),
    ];
    for (name, freq) in checks {
        if freq >= nyquist {
            return Err(SynthError::Nyquist {
                name: name.to_string(),
                freq,
                nyquist,
            });
        }
    }

    let amp = profile.amplitudes(class);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shaft_phases: Vec<f64> = (0..profile.shaft_harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let defect_phases: Vec<f64> = (0..profile.defect_harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let first_impact: f64 = rng.random_range(0.0..1.0 / defect);

    let dt = 1.0 / sample_rate;
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let w_shaft = 2.0 * PI * g.shaft_hz;
    let w_defect = 2.0 * PI * defect;
    for t in 0..n {
        let time = t as f64 * dt;
        let mut zx = 0.0;
        let mut zy = 0.0;
        if amp.zone1 > 0.0 {
            for (h, &ph) in shaft_phases.iter().enumerate() {
                let order = (h + 1) as f64;
                let a = amp.zone1 / order;
                let arg = order * w_shaft * time + ph;
                zx += a * arg.sin();
                zy += a * arg.cos();
            }
        }
        let mut shared = 0.0;
        if amp.zone2 > 0.0 {
            for (h, &ph) in defect_phases.iter().enumerate() {
                let order = (h + 1) as f64;
                shared += amp.zone2 / order * (order * w_defect * time + ph).sin();
            }
        }
        x[t] = zx + shared;
        y[t] = zy + shared;
    }

    if amp.zone3 > 0.0 {
        // Each ring starts at full amplitude on a cosine so its energy stays
        // concentrated around the resonance.
        let w_res = 2.0 * PI * profile.resonance_hz;
        let ring_len = ((8.0 / profile.ring_decay) * sample_rate).ceil() as usize;
        let period = 1.0 / defect;
        let mut impact = first_impact;
        let end = n as f64 * dt;
        while impact < end {
            let start = (impact * sample_rate).ceil() as usize;
            for t in start..(start + ring_len).min(n) {
                let tau = t as f64 * dt - impact;
                let v = amp.zone3 * (-profile.ring_decay * tau).exp() * (w_res * tau).cos();
                x[t] += v;
                y[t] += v;
            }
            impact += period;
        }
    }

    if amp.noise > 0.0 {
        let normal = Normal::new(0.0, amp.noise).map_err(|e| SynthError::Profile(e.to_string()))?;
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        for v in y.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    Ok(RawRecording::new(
        sample_rate,
        vec![
            Channel {
                name: "x".into(),
                samples: x,
            },
            Channel {
                name: "y".into(),
                samples: y,
            },
        ],
        format!("synth:{}:{}:{seed}", kind.name(), class.name()),
    )?)
}

/// Recipe for a labeled synthetic dataset: per class, `files_per_class`
/// recordings of `frames_per_file` frames each, mirroring 20 files of
/// 20 frames per class.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDatasetSpec {
    pub geometry: BearingGeometry,
    pub profile: SeverityProfile,
    pub kind: FaultKind,
    pub files_per_class: usize,
    pub frames_per_file: usize,
    pub frame_len: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for SynthDatasetSpec {
    fn default() -> Self {
        Self {
            geometry: BearingGeometry::default(),
            profile: SeverityProfile::default(),
            kind: FaultKind::InnerRace,
            files_per_class: 20,
            frames_per_file: 20,
            frame_len: crate::signal::DEFAULT_FRAME_LEN,
            sample_rate: IMS_SAMPLE_RATE,
            seed: 2021,
        }
    }
}

impl SynthDatasetSpec {
    /// Geometry and profile keys plus `kind`, `files_per_class`,
    /// `frames_per_file`, `frame_len`, `sample_rate` and `synth_seed`.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, SynthError> {
        let mut s = Self {
            geometry: BearingGeometry::from_kv(kv)?,
            profile: SeverityProfile::from_kv(kv)?,
            ..Self::default()
        };
        kv.apply("kind", &mut s.kind)?;
        kv.apply("files_per_class", &mut s.files_per_class)?;
        kv.apply("frames_per_file", &mut s.frames_per_file)?;
        kv.apply("frame_len", &mut s.frame_len)?;
        kv.apply("sample_rate", &mut s.sample_rate)?;
        kv.apply("synth_seed", &mut s.seed)?;
        Ok(s)
    }

    pub fn frames_per_class(&self) -> usize {
        self.files_per_class * self.frames_per_file
    }

    /// Seed of one generated file, unique per (class, file).
    pub fn file_seed(&self, class: Severity, file: usize) -> u64 {
        crate::train::derive_seed(self.seed, &[class.index() as u64, file as u64])
    }

    pub fn build(&self) -> Result<Dataset, SynthError> {
        if self.files_per_class == 0 || self.frames_per_file == 0 || self.frame_len == 0 {
            return Err(SynthError::Argument("dataset dimensions must be positive".into()));
        }
        let duration = (self.frames_per_file * self.frame_len) as f64 / self.sample_rate;
        let mut ds = Dataset::new();
        for class in Severity::ALL {
            for file in 0..self.files_per_class {
                let rec = synthesize(
                    &self.geometry,
                    self.kind,
                    class,
                    &self.profile,
                    duration,
                    self.sample_rate,
                    self.file_seed(class, file),
                )?;
                ds.add_recording(&rec, class, self.frame_len)?;
            }
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn test_config() -> BearingGeometry {
        BearingGeometry {
            balls: 16,
            ball_diameter: 0.1176,
            pitch_diameter: 1.0,
            contact_angle: 0.2648,
            shaft_hz: 2000.0 / 60.0,
        }
    }

    #[test]
    fn defect_frequency_reference_values() {
        let g = test_config();
        assert_abs_diff_eq!(g.cage_frequency(), 14.77, epsilon = 0.01);
        assert_abs_diff_eq!(g.inner_race_defect_frequency(), 296.9, epsilon = 0.1);
        assert_abs_diff_eq!(g.ball_defect_frequency(), 139.8, epsilon = 0.1);
    }

    #[test]
    fn right_angle_contact() {
        let g = BearingGeometry {
            contact_angle: FRAC_PI_2,
            ..test_config()
        };
        // cos(pi/2) is ~6e-17, not exactly zero
        assert_abs_diff_eq!(g.cage_frequency(), g.shaft_hz / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.inner_race_defect_frequency(), 8.0 * g.shaft_hz, epsilon = 1e-12);
        assert_abs_diff_eq!(
            g.ball_defect_frequency(),
            g.pitch_diameter / (2.0 * g.ball_diameter) * g.shaft_hz,
            epsilon = 1e-12
        );
    }

    #[test]
    fn vanishing_ball_limit() {
        let g = BearingGeometry {
            ball_diameter: 1e-12,
            ..test_config()
        };
        assert_abs_diff_eq!(g.cage_frequency(), g.shaft_hz / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.inner_race_defect_frequency(), 8.0 * g.shaft_hz, epsilon = 1e-9);
        let bracket = g.ball_defect_frequency() / (g.pitch_diameter / (2.0 * g.ball_diameter) * g.shaft_hz);
        assert_abs_diff_eq!(bracket, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn geometry_validation() {
        let mut g = test_config();
        g.ball_diameter = 2.0;
        assert!(g.validate().is_err());
        let mut g = test_config();
        g.contact_angle = 2.0;
        assert!(g.validate().is_err());
        let mut g = test_config();
        g.shaft_hz = 0.0;
        assert!(g.validate().is_err());
        assert!(BearingGeometry::default().validate().is_ok());
    }

    #[test]
    fn default_profile_follows_zone_pattern() {
        SeverityProfile::default().check_zone_pattern().unwrap();
        let mut p = SeverityProfile::default();
        p.classes[1].zone2 = 0.1;
        assert!(p.check_zone_pattern().is_err());
    }

    #[test]
    fn silent_profile_is_all_zero() {
        let rec = synthesize(
            &test_config(),
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

    #[test]
    fn nyquist_violation_names_frequency() {
        let err = synthesize(
            &test_config(),
            FaultKind::InnerRace,
            Severity::Healthy,
            &SeverityProfile::default(),
            0.1,
            4000.0,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, SynthError::Nyquist { .. }));
        assert!(err.to_string().contains("Hz"));
        assert!(synthesize(
            &test_config(),
            FaultKind::InnerRace,
            Severity::Healthy,
            &SeverityProfile::default(),
            0.0,
            IMS_SAMPLE_RATE,
            1
        )
        .is_err());
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let run = |seed| {
            synthesize(
                &test_config(),
                FaultKind::RollingElement,
                Severity::ModerateFault,
                &SeverityProfile::default(),
                0.05,
                IMS_SAMPLE_RATE,
                seed,
            )
            .unwrap()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn profile_and_geometry_from_config() {
        let kv = KvConfig::parse("balls = 12\nshaft_rpm = 1800\nsevere.zone2 = 2.5\nresonance_hz = 3500").unwrap();
        let g = BearingGeometry::from_kv(&kv).unwrap();
        assert_eq!(g.balls, 12);
        assert_abs_diff_eq!(g.shaft_hz, 30.0);
        let p = SeverityProfile::from_kv(&kv).unwrap();
        assert_eq!(p.classes[3].zone2, 2.5);
        assert_eq!(p.resonance_hz, 3500.0);
        assert!(BearingGeometry::from_kv(&KvConfig::parse("ball_diameter = 9").unwrap()).is_err());
        let spec = SynthDatasetSpec::from_kv(
            &KvConfig::parse("kind = rolling\nfiles_per_class = 3\nsynth_seed = 5\nframe_len = 500").unwrap(),
        )
        .unwrap();
        assert_eq!(spec.kind, FaultKind::RollingElement);
        assert_eq!((spec.files_per_class, spec.frames_per_file, spec.frame_len, spec.seed), (3, 20, 500, 5));
        assert!(SynthDatasetSpec::from_kv(&KvConfig::parse("kind = outer").unwrap()).is_err());
    }

    #[test]
    fn small_dataset_layout() {
        let spec = SynthDatasetSpec {
            files_per_class: 2,
            frames_per_file: 3,
            ..SynthDatasetSpec::default()
        };
        let ds = spec.build().unwrap();
        assert_eq!(ds.class_counts(), [6; 4]);
        assert!(ds.frames().iter().all(|f| f.normalized && f.samples.shape() == (2, 1000)));
    }

    proptest! {
        #[test]
        fn frequency_ordering(
            balls in 2u32..40,
            ratio in 0.01f64..0.95,
            angle in 0.0f64..FRAC_PI_2,
            shaft in 1.0f64..200.0,
        ) {
            let g = BearingGeometry {
                balls,
                ball_diameter: ratio,
                pitch_diameter: 1.0,
                contact_angle: angle,
                shaft_hz: shaft,
            };
            prop_assert!(g.cage_frequency() < g.shaft_hz);
            prop_assert!(g.shaft_hz < g.inner_race_defect_frequency());
            prop_assert!(g.cage_frequency() > 0.0 && g.cage_frequency() <= g.shaft_hz / 2.0);
            prop_assert!(g.ball_defect_frequency() > 0.0);
        }
    }
}
