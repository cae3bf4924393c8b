//! Builders for the thirteen abnormal datasets: trip-unavailability
//! emulation, false-data-injection splicing, DoS traffic inflation, and
//! assembly of the full use-case bundle.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{it, ot, SignalCatalog};
use crate::error::{CetError, Result};
use crate::frame::{ArtifactKind, TelemetryFrame};
use crate::model::{DosLevel, ScenarioState, TripCause};
use crate::sim::{
    self, derive_seed, ArtifactConfig, OpSchedule, Segment, SimConfig, TripTemplate,
    TEMPLATE_HALF_WINDOW,
};

/// Falsification spec for one FDI level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdiSpec {
    /// 1..=3; higher levels falsify strict supersets of lower levels.
    pub level: u8,
    pub half_window_s: usize,
    /// Target OT rows in catalog order.
    pub targets: Vec<usize>,
}

impl FdiSpec {
    /// Level-k spec over the console-displayed targets: level 1 falsifies
    /// channel-1 counts, level 2 adds the channel-1 change rate, level 3
    /// adds channel-2 counts.
    pub fn for_level(catalog: &SignalCatalog, level: u8) -> Result<FdiSpec> {
        if !(1..=3).contains(&level) {
            return Err(CetError::BadFdiLevel(level));
        }
        let console = catalog.console_targets();
        Ok(FdiSpec {
            level,
            half_window_s: TEMPLATE_HALF_WINDOW,
            targets: console[..level as usize].to_vec(),
        })
    }

    /// Out-of-training variant: falsify channel-3 and channel-4 counts.
    pub fn channels_3_4(level_label: u8) -> FdiSpec {
        FdiSpec {
            level: level_label,
            half_window_s: TEMPLATE_HALF_WINDOW,
            targets: vec![ot::CH3_CPS, ot::CH4_CPS],
        }
    }
}

/// Traffic-flood spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosSpec {
    pub intensity: DosLevel,
    pub mean_rate: f64,
    pub start_s: usize,
    pub end_s: usize,
}

impl DosSpec {
    pub fn low(start_s: usize, end_s: usize) -> DosSpec {
        DosSpec { intensity: DosLevel::Low, mean_rate: 870.0, start_s, end_s }
    }

    pub fn high(start_s: usize, end_s: usize) -> DosSpec {
        DosSpec { intensity: DosLevel::High, mean_rate: 24_000.0, start_s, end_s }
    }
}

/// Relabels the trip button as pulsing while all other signals continue
/// normal operation: the trip-unavailable abnormality signature.
pub fn emulate_trip_unavailable(
    frame: &TelemetryFrame,
    cause: TripCause,
    pulse_period_s: usize,
    duration_s: usize,
) -> Result<TelemetryFrame> {
    if frame.n_steps() < duration_s {
        return Err(CetError::FrameTooShort { have: frame.n_steps(), need: duration_s });
    }
    if cause == TripCause::None {
        return Err(CetError::Config("trip-unavailable cause must be cyber or malfunction".into()));
    }
    let mut out = frame.clone();
    let mut t = 0usize;
    while t < duration_s {
        out.ot.set(ot::TRIP_BUTTON, t, 1.0);
        t += pulse_period_s;
    }
    for state in out.states.iter_mut().take(duration_s) {
        state.trip_available = false;
        state.trip_cause = cause;
    }
    Ok(out)
}

/// Trip event times used for falsification splices: `n_trips` events evenly
/// spaced over the duration, each centered in its own splice window.
pub fn fdi_trip_times(duration_s: usize, n_trips: usize) -> Vec<usize> {
    let spacing = duration_s / n_trips;
    (0..n_trips).map(|k| spacing / 2 + k * spacing).collect()
}

/// Overwrites each target signal around each trip time with a normal-trip
/// template, so the falsified channels look like a successful trip.
pub fn inject_fdi(
    frame: &TelemetryFrame,
    spec: &FdiSpec,
    templates: &[TripTemplate],
    trip_times: &[usize],
) -> Result<TelemetryFrame> {
    if spec.level == 0 || spec.targets.is_empty() {
        return Err(CetError::BadFdiLevel(spec.level));
    }
    let h = spec.half_window_s;
    let n = frame.n_steps();
    // Splice windows [t-h, t+h) must not overlap and must fit the frame.
    let mut sorted = trip_times.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[1] - w[0] < 2 * h {
            return Err(CetError::OverlappingTrips(w[1]));
        }
    }
    let mut out = frame.clone();
    for (k, &t) in sorted.iter().enumerate() {
        if t < h || t + h > n {
            return Err(CetError::BadInterval { start: t.saturating_sub(h), end: t + h, len: n });
        }
        for &target in &spec.targets {
            let mut of_target: Vec<&TripTemplate> =
                templates.iter().filter(|tpl| tpl.signal == target).collect();
            of_target.sort_by_key(|tpl| tpl.trip_index);
            let tpl = of_target
                .get(k % of_target.len().max(1))
                .copied()
                .ok_or(CetError::MissingTemplate { trip: k, signal: target })?;
            for i in 0..2 * h {
                let u = t - h + i;
                let original = out.ot.raw(target, u);
                out.ot_mask.push(target, u, ArtifactKind::Falsified, original);
                out.ot.set(target, u, tpl.values[i]);
            }
        }
        for state in out.states.iter_mut().skip(t - h).take(2 * h) {
            state.fdi_level = spec.level;
        }
    }
    Ok(out)
}

/// Redraws IT traffic statistics around the flood rate inside the attack
/// interval. OT signals are untouched.
pub fn apply_dos(frame: &TelemetryFrame, spec: &DosSpec, seed: u64) -> Result<TelemetryFrame> {
    let n = frame.n_steps();
    if spec.start_s >= spec.end_s || spec.end_s > n {
        return Err(CetError::BadInterval { start: spec.start_s, end: spec.end_s, len: n });
    }
    let mut out = frame.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xD05));
    let latency_factor = match spec.intensity {
        DosLevel::Low => 8.0,
        DosLevel::High => 40.0,
        DosLevel::None => 1.0,
    };
    let cpu_boost = match spec.intensity {
        DosLevel::Low => 30.0,
        DosLevel::High => 65.0,
        DosLevel::None => 0.0,
    };
    for i in 0..out.it.n_steps {
        let time = out.it_time(i);
        if time < spec.start_s as f64 || time >= spec.end_s as f64 {
            continue;
        }
        let touch = |m: &mut crate::frame::SignalMatrix,
                     mask: &mut crate::frame::CellMask,
                     row: usize,
                     v: f64| {
            mask.push(row, i, ArtifactKind::Dos, m.raw(row, i));
            m.set(row, i, v);
        };
        let g1 = sim_gauss(&mut rng);
        let pkt = (spec.mean_rate * (1.0 + 0.03 * g1)).max(0.0);
        touch(&mut out.it, &mut out.it_mask, it::PACKET_RATE, pkt);
        let lat = (5.0 * latency_factor * (1.0 + 0.1 * sim_gauss(&mut rng))).max(0.1);
        touch(&mut out.it, &mut out.it_mask, it::LATENCY, lat);
        let cpu = (20.0 + cpu_boost + 3.0 * sim_gauss(&mut rng)).clamp(0.0, 100.0);
        touch(&mut out.it, &mut out.it_mask, it::CPU_UTIL, cpu);
        let bw = (pkt * 1.5 + 10.0 * sim_gauss(&mut rng)).max(0.0);
        touch(&mut out.it, &mut out.it_mask, it::BANDWIDTH, bw);
        let rtx = (pkt * 0.02 * (1.0 + 0.2 * sim_gauss(&mut rng))).max(0.0);
        touch(&mut out.it, &mut out.it_mask, it::RETRANSMITS, rtx);
        let conns = (12.0 + pkt * 0.01 + sim_gauss(&mut rng)).max(0.0);
        touch(&mut out.it, &mut out.it_mask, it::CONNECTIONS, conns);
    }
    for (t, state) in out.states.iter_mut().enumerate() {
        if t >= spec.start_s && t < spec.end_s {
            state.dos_level = spec.intensity;
        }
    }
    Ok(out)
}

fn sim_gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// One dataset of the use case.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub state: ScenarioState,
    pub seed: u64,
    pub frame: TelemetryFrame,
}

/// Provenance record for one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub state: ScenarioState,
    pub seed: u64,
    pub ot_points: usize,
    pub it_points: usize,
}

/// The assembled use case: fourteen state datasets, the relabeled training
/// variant for the FDI-vs-other level, and short DoS-over-normal lead-in
/// frames that exercise the DoS-with-trip-available class.
#[derive(Debug, Clone)]
pub struct UseCaseBundle {
    pub datasets: Vec<Dataset>,
    pub other_training: Dataset,
    pub dos_on_normal: Vec<Dataset>,
    pub manifest: Vec<DatasetRecord>,
}

impl UseCaseBundle {
    pub fn dataset(&self, id: &str) -> Result<&Dataset> {
        self.datasets
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| CetError::MissingDataset(id.to_string()))
    }

    pub fn all_frames(&self) -> impl Iterator<Item = &Dataset> {
        self.datasets
            .iter()
            .chain(std::iter::once(&self.other_training))
            .chain(self.dos_on_normal.iter())
    }
}

/// Parameters of the full use-case build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UseCaseConfig {
    pub normal_schedule: OpSchedule,
    pub artifacts: ArtifactConfig,
    pub sim: SimConfig,
    /// Abnormal dataset duration, seconds.
    pub abnormal_duration_s: usize,
    /// Trip button pulse cadence in abnormal datasets, seconds.
    pub pulse_period_s: usize,
    /// Trip events per abnormal dataset (falsification splice points).
    pub n_trips: usize,
    /// Steady power level of abnormal base frames, percent.
    pub abnormal_power_percent: f64,
    /// Duration of each DoS-over-normal lead-in frame, seconds.
    pub dos_on_normal_duration_s: usize,
    /// Steady power of the lead-in frames: a routine operating point, not
    /// the abnormal test point, since the plant side stays normal.
    pub dos_on_normal_power_percent: f64,
    pub dos_low_rate: f64,
    pub dos_high_rate: f64,
}

impl UseCaseConfig {
    /// Paper-scale abnormal geometry over a desk-scale normal corpus.
    pub fn desk_default(normal_hours: f64) -> UseCaseConfig {
        UseCaseConfig {
            normal_schedule: default_normal_schedule(normal_hours),
            artifacts: ArtifactConfig::defaults(crate::catalog::N_OT, crate::catalog::N_IT),
            sim: SimConfig::default(),
            abnormal_duration_s: 1560,
            pulse_period_s: 20,
            n_trips: 13,
            abnormal_power_percent: 85.0,
            dos_on_normal_duration_s: 140,
            dos_on_normal_power_percent: 70.0,
            dos_low_rate: 870.0,
            dos_high_rate: 24_000.0,
        }
    }
}

/// Rotation over shutdown, mid-power and full-power segments with periodic
/// trips, repeated to fill the requested hours.
pub fn default_normal_schedule(hours: f64) -> OpSchedule {
    let cycle: Vec<Segment> = vec![
        Segment { target_power_percent: 0.0, duration_s: 600, ends_in_trip: false },
        Segment { target_power_percent: 40.0, duration_s: 900, ends_in_trip: false },
        Segment { target_power_percent: 100.0, duration_s: 1500, ends_in_trip: true },
        Segment { target_power_percent: 0.0, duration_s: 300, ends_in_trip: false },
        Segment { target_power_percent: 70.0, duration_s: 600, ends_in_trip: false },
    ];
    let total = (hours * 3600.0).round() as usize;
    let mut segments: Vec<Segment> = Vec::new();
    let mut acc = 0usize;
    let mut i = 0usize;
    while acc < total {
        let mut seg = cycle[i % cycle.len()];
        if acc + seg.duration_s > total {
            seg.duration_s = total - acc;
        }
        acc += seg.duration_s;
        segments.push(seg);
        i += 1;
    }
    OpSchedule { segments }
}

fn reserve_schedule(n_trips: usize) -> OpSchedule {
    // Rest then a short power run that trips while still ramping: the
    // extracted templates carry a ramp-and-trip shape over their whole
    // span, so a falsified channel never mimics steady operation.
    let mut segments = Vec::with_capacity(2 * n_trips);
    for _ in 0..n_trips {
        segments.push(Segment { target_power_percent: 0.0, duration_s: 60, ends_in_trip: false });
        segments.push(Segment { target_power_percent: 85.0, duration_s: 130, ends_in_trip: true });
    }
    OpSchedule { segments }
}

fn abnormal_base(
    catalog: &SignalCatalog,
    config: &UseCaseConfig,
    seed: u64,
) -> Result<TelemetryFrame> {
    let schedule = OpSchedule {
        segments: vec![Segment {
            target_power_percent: config.abnormal_power_percent,
            duration_s: config.abnormal_duration_s,
            ends_in_trip: false,
        }],
    };
    let frame = sim::generate_normal(catalog, &schedule, &config.artifacts, &config.sim, seed)?;
    // Operating-only frames carry outliers but no nulls.
    let mut art = config.artifacts.clone();
    art.null_rate = 0.0;
    sim::inject_artifacts(&frame, catalog, &art, seed)
}

/// Builds the complete use case: dataset #1 normal plus the thirteen
/// abnormal datasets, the relabeled training variant, and the
/// DoS-over-normal lead-in frames.
pub fn build_use_case(
    catalog: &SignalCatalog,
    config: &UseCaseConfig,
    seed: u64,
) -> Result<UseCaseBundle> {
    let dur = config.abnormal_duration_s;
    let trips = fdi_trip_times(dur, config.n_trips);

    // Template reserve: a disjoint normal frame holding real trips.
    let reserve = sim::generate_normal(
        catalog,
        &reserve_schedule(config.n_trips),
        &config.artifacts,
        &config.sim,
        derive_seed(seed, 0x7E5),
    )?;
    let mut template_targets = catalog.console_targets();
    template_targets.extend_from_slice(&[ot::CH3_CPS, ot::CH4_CPS]);
    let (templates, _skipped) = sim::extract_trip_templates(&reserve, &template_targets);

    let mut datasets = Vec::new();
    let mut counter = 0u64;
    let next_seed = |counter: &mut u64| {
        *counter += 1;
        derive_seed(seed, *counter)
    };

    // Dataset #1: normal operation with artifacts.
    let normal_seed = next_seed(&mut counter);
    let normal_clean = sim::generate_normal(
        catalog,
        &config.normal_schedule,
        &config.artifacts,
        &config.sim,
        normal_seed,
    )?;
    let normal = sim::inject_artifacts(&normal_clean, catalog, &config.artifacts, normal_seed)?;
    datasets.push(Dataset {
        id: "normal".into(),
        state: ScenarioState::NORMAL,
        seed: normal_seed,
        frame: normal,
    });

    // Trip-unavailable baselines.
    for (id, cause) in [("malfunction", TripCause::Malfunction), ("cyber_baseline", TripCause::Cyber)] {
        let s = next_seed(&mut counter);
        let base = abnormal_base(catalog, config, s)?;
        let frame = emulate_trip_unavailable(&base, cause, config.pulse_period_s, dur)?;
        datasets.push(Dataset {
            id: id.into(),
            state: ScenarioState::new(cause, 0, DosLevel::None),
            seed: s,
            frame,
        });
    }

    // FDI 1..3.
    for level in 1..=3u8 {
        let s = next_seed(&mut counter);
        let base = abnormal_base(catalog, config, s)?;
        let base = emulate_trip_unavailable(&base, TripCause::Cyber, config.pulse_period_s, dur)?;
        let spec = FdiSpec::for_level(catalog, level)?;
        let frame = inject_fdi(&base, &spec, &templates, &trips)?;
        datasets.push(Dataset {
            id: format!("fdi{level}"),
            state: ScenarioState::new(TripCause::Cyber, level, DosLevel::None),
            seed: s,
            frame,
        });
    }

    // DoS low/high on the trip-unavailable baseline.
    for (name, dos) in [("dos_low", DosLevel::Low), ("dos_high", DosLevel::High)] {
        let s = next_seed(&mut counter);
        let base = abnormal_base(catalog, config, s)?;
        let base = emulate_trip_unavailable(&base, TripCause::Cyber, config.pulse_period_s, dur)?;
        let spec = dos_spec(config, dos, 0, dur);
        let frame = apply_dos(&base, &spec, s)?;
        datasets.push(Dataset {
            id: name.into(),
            state: ScenarioState::new(TripCause::Cyber, 0, dos),
            seed: s,
            frame,
        });
    }

    // The six FDI x DoS combinations.
    for level in 1..=3u8 {
        for (suffix, dos) in [("dos_low", DosLevel::Low), ("dos_high", DosLevel::High)] {
            let s = next_seed(&mut counter);
            let base = abnormal_base(catalog, config, s)?;
            let base =
                emulate_trip_unavailable(&base, TripCause::Cyber, config.pulse_period_s, dur)?;
            let spec = FdiSpec::for_level(catalog, level)?;
            let with_fdi = inject_fdi(&base, &spec, &templates, &trips)?;
            let frame = apply_dos(&with_fdi, &dos_spec(config, dos, 0, dur), s)?;
            datasets.push(Dataset {
                id: format!("fdi{level}_{suffix}"),
                state: ScenarioState::new(TripCause::Cyber, level, dos),
                seed: s,
                frame,
            });
        }
    }

    // Relabeled cyber-baseline variant used as the "other" training pool.
    let s = next_seed(&mut counter);
    let base = abnormal_base(catalog, config, s)?;
    let frame = emulate_trip_unavailable(&base, TripCause::Cyber, config.pulse_period_s, dur)?;
    let other_training = Dataset {
        id: "other_training".into(),
        state: ScenarioState::new(TripCause::Cyber, 0, DosLevel::None),
        seed: s,
        frame,
    };

    // Short DoS-over-normal frames: trip stays available.
    let mut dos_on_normal = Vec::new();
    for (name, dos) in [("dos_normal_low", DosLevel::Low), ("dos_normal_high", DosLevel::High)] {
        let s = next_seed(&mut counter);
        let schedule = OpSchedule {
            segments: vec![Segment {
                target_power_percent: config.dos_on_normal_power_percent,
                duration_s: config.dos_on_normal_duration_s,
                ends_in_trip: false,
            }],
        };
        let base = sim::generate_normal(catalog, &schedule, &config.artifacts, &config.sim, s)?;
        let spec = dos_spec(config, dos, 0, config.dos_on_normal_duration_s);
        let frame = apply_dos(&base, &spec, s)?;
        dos_on_normal.push(Dataset {
            id: name.into(),
            state: ScenarioState::dos_on_normal(dos),
            seed: s,
            frame,
        });
    }

    let manifest = datasets
        .iter()
        .chain(std::iter::once(&other_training))
        .chain(dos_on_normal.iter())
        .map(|d| DatasetRecord {
            id: d.id.clone(),
            state: d.state,
            seed: d.seed,
            ot_points: d.frame.ot.cells(),
            it_points: d.frame.it.cells(),
        })
        .collect();

    Ok(UseCaseBundle { datasets, other_training, dos_on_normal, manifest })
}

/// Attack variants absent from the training corpus: falsification of the
/// channel-3/4 counts (never falsified during training) and a flood at a
/// rate between the trained low and high intensities.
pub fn build_out_of_training(
    catalog: &SignalCatalog,
    config: &UseCaseConfig,
    seed: u64,
) -> Result<Vec<Dataset>> {
    let dur = config.abnormal_duration_s;
    let trips = fdi_trip_times(dur, config.n_trips);
    let reserve = sim::generate_normal(
        catalog,
        &reserve_schedule(config.n_trips),
        &config.artifacts,
        &config.sim,
        derive_seed(seed, 0x7E5),
    )?;
    let (templates, _) = sim::extract_trip_templates(&reserve, &[ot::CH3_CPS, ot::CH4_CPS]);

    let mut out = Vec::new();

    let s = derive_seed(seed, 0xA1);
    let base = abnormal_base(catalog, config, s)?;
    let base = emulate_trip_unavailable(&base, TripCause::Cyber, config.pulse_period_s, dur)?;
    let spec = FdiSpec::channels_3_4(2);
    let frame = inject_fdi(&base, &spec, &templates, &trips)?;
    out.push(Dataset {
        id: "fdi_ch34".into(),
        state: ScenarioState::new(TripCause::Cyber, 2, DosLevel::None),
        seed: s,
        frame,
    });

    let s = derive_seed(seed, 0xA2);
    let base = abnormal_base(catalog, config, s)?;
    let base = emulate_trip_unavailable(&base, TripCause::Cyber, config.pulse_period_s, dur)?;
    let spec = DosSpec { intensity: DosLevel::Low, mean_rate: 5_000.0, start_s: 0, end_s: dur };
    let frame = apply_dos(&base, &spec, s)?;
    out.push(Dataset {
        id: "dos_mid".into(),
        state: ScenarioState::new(TripCause::Cyber, 0, DosLevel::Low),
        seed: s,
        frame,
    });

    Ok(out)
}

fn dos_spec(config: &UseCaseConfig, dos: DosLevel, start: usize, end: usize) -> DosSpec {
    match dos {
        DosLevel::Low => DosSpec { intensity: dos, mean_rate: config.dos_low_rate, start_s: start, end_s: end },
        DosLevel::High => DosSpec { intensity: dos, mean_rate: config.dos_high_rate, start_s: start, end_s: end },
        DosLevel::None => DosSpec { intensity: dos, mean_rate: 0.0, start_s: start, end_s: end },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FusedClass;

    fn small_config() -> (SignalCatalog, UseCaseConfig) {
        let catalog = SignalCatalog::default_catalog();
        let config = UseCaseConfig::desk_default(0.5);
        (catalog, config)
    }

    fn base_frame(catalog: &SignalCatalog, config: &UseCaseConfig, seed: u64) -> TelemetryFrame {
        abnormal_base(catalog, config, seed).unwrap()
    }

    #[test]
    fn trip_unavailable_pulse_count_and_isolation() {
        let (catalog, config) = small_config();
        let base = base_frame(&catalog, &config, 1);
        let out = emulate_trip_unavailable(&base, TripCause::Cyber, 20, 1560).unwrap();
        let pulses = out
            .ot
            .row(ot::TRIP_BUTTON)
            .iter()
            .take(1560)
            .filter(|&&v| v >= 0.5)
            .count();
        assert_eq!(pulses, 78); // 1560 / 20
        assert_eq!(out.ot.cells(), 67 * 1560);
        assert_eq!(out.it.cells(), 11 * 900);
        // Only the trip-button row differs.
        for s in 0..base.ot.n_signals {
            for t in 0..base.ot.n_steps {
                if s == ot::TRIP_BUTTON {
                    continue;
                }
                assert_eq!(base.ot.raw(s, t), out.ot.raw(s, t));
            }
        }
        assert!(out.states.iter().all(|st| st.trip_cause == TripCause::Cyber));
    }

    #[test]
    fn trip_unavailable_rejects_short_frame() {
        let catalog = SignalCatalog::default_catalog();
        let mut config = UseCaseConfig::desk_default(0.5);
        config.abnormal_duration_s = 100;
        let base = base_frame(&catalog, &config, 1);
        let err = emulate_trip_unavailable(&base, TripCause::Cyber, 20, 1560).unwrap_err();
        assert!(matches!(err, CetError::FrameTooShort { .. }));
    }

    fn templates_for(catalog: &SignalCatalog, config: &UseCaseConfig) -> Vec<TripTemplate> {
        let reserve = sim::generate_normal(
            catalog,
            &reserve_schedule(config.n_trips),
            &config.artifacts,
            &config.sim,
            99,
        )
        .unwrap();
        sim::extract_trip_templates(&reserve, &catalog.console_targets()).0
    }

    #[test]
    fn fdi_falsified_duration_and_nesting() {
        let (catalog, config) = small_config();
        let templates = templates_for(&catalog, &config);
        let trips = fdi_trip_times(1560, 13);
        let base = base_frame(&catalog, &config, 2);
        let base = emulate_trip_unavailable(&base, TripCause::Cyber, 20, 1560).unwrap();
        let mut cell_sets = Vec::new();
        for level in 1..=3u8 {
            let spec = FdiSpec::for_level(&catalog, level).unwrap();
            let out = inject_fdi(&base, &spec, &templates, &trips).unwrap();
            let cells: std::collections::BTreeSet<(usize, usize)> = out
                .ot_mask
                .cells(ArtifactKind::Falsified)
                .into_iter()
                .collect();
            assert_eq!(cells.len(), 13 * 120 * level as usize);
            cell_sets.push(cells);
        }
        // Strict nesting level 1 < 2 < 3.
        assert!(cell_sets[0].is_subset(&cell_sets[1]));
        assert!(cell_sets[1].is_subset(&cell_sets[2]));
        assert!(cell_sets[0].len() < cell_sets[1].len());
        assert!(cell_sets[1].len() < cell_sets[2].len());
        // Level 3 falsifies three times the level-1 cell count.
        assert_eq!(cell_sets[2].len(), 3 * cell_sets[0].len());
    }

    #[test]
    fn fdi_level_zero_rejected() {
        let catalog = SignalCatalog::default_catalog();
        assert!(matches!(
            FdiSpec::for_level(&catalog, 0),
            Err(CetError::BadFdiLevel(0))
        ));
    }

    #[test]
    fn fdi_overlapping_trips_rejected() {
        let (catalog, config) = small_config();
        let templates = templates_for(&catalog, &config);
        let base = base_frame(&catalog, &config, 3);
        let base = emulate_trip_unavailable(&base, TripCause::Cyber, 20, 1560).unwrap();
        let spec = FdiSpec::for_level(&catalog, 1).unwrap();
        let err = inject_fdi(&base, &spec, &templates, &[100, 150]).unwrap_err();
        assert!(matches!(err, CetError::OverlappingTrips(_)));
    }

    #[test]
    fn dos_rates_and_ot_isolation() {
        let (catalog, config) = small_config();
        let base = base_frame(&catalog, &config, 4);
        let low = apply_dos(&base, &DosSpec::low(0, 1560), 4).unwrap();
        let high = apply_dos(&base, &DosSpec::high(0, 1560), 4).unwrap();
        let mean = |f: &TelemetryFrame| {
            let row = f.it.row(it::PACKET_RATE);
            row.iter().sum::<f64>() / row.len() as f64
        };
        let low_mean = mean(&low);
        let high_mean = mean(&high);
        assert!((800.0..=940.0).contains(&low_mean), "low mean {low_mean}");
        assert!(high_mean >= 20_000.0, "high mean {high_mean}");
        assert!(high_mean >= 25.0 * low_mean);
        // OT matrices bit-identical.
        assert_eq!(base.ot, low.ot);
        assert_eq!(base.ot, high.ot);
        assert!(low.states.iter().all(|s| s.dos_level == DosLevel::Low));
    }

    #[test]
    fn dos_zero_length_interval_rejected() {
        let (catalog, config) = small_config();
        let base = base_frame(&catalog, &config, 5);
        let err = apply_dos(&base, &DosSpec::low(100, 100), 5).unwrap_err();
        assert!(matches!(err, CetError::BadInterval { .. }));
    }

    #[test]
    fn bundle_has_fourteen_datasets_with_paper_scale_counts() {
        let (catalog, config) = small_config();
        let bundle = build_use_case(&catalog, &config, 77).unwrap();
        assert_eq!(bundle.datasets.len(), 14);
        for d in &bundle.datasets {
            if d.id == "normal" {
                continue;
            }
            assert_eq!(d.frame.ot.cells(), 104_520, "{}", d.id);
            assert_eq!(d.frame.it.cells(), 9_900, "{}", d.id);
        }
        // Ground-truth class coverage over the bundle.
        let mut hit = [false; 6];
        for d in bundle.all_frames() {
            hit[crate::model::true_class(&d.state).value() as usize] = true;
        }
        assert!(hit.iter().all(|&h| h));
        assert_eq!(
            crate::model::true_class(&bundle.dos_on_normal[0].state),
            FusedClass::Dos
        );
    }

    #[test]
    fn bundle_deterministic() {
        let catalog = SignalCatalog::default_catalog();
        let mut config = UseCaseConfig::desk_default(0.25);
        config.abnormal_duration_s = 1560;
        let a = build_use_case(&catalog, &config, 8).unwrap();
        let b = build_use_case(&catalog, &config, 8).unwrap();
        assert_eq!(a.datasets.len(), b.datasets.len());
        for (x, y) in a.datasets.iter().zip(&b.datasets) {
            assert_eq!(x.frame, y.frame);
        }
    }

    #[test]
    fn label_soundness_in_combined_dataset() {
        let (catalog, config) = small_config();
        let bundle = build_use_case(&catalog, &config, 6).unwrap();
        let d = bundle.dataset("fdi2_dos_high").unwrap();
        for st in &d.frame.states {
            assert_eq!(st.trip_cause, TripCause::Cyber);
            assert_eq!(st.fdi_level, 2);
            assert_eq!(st.dos_level, DosLevel::High);
        }
    }
}
