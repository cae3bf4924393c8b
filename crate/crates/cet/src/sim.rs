//! Seeded synthetic normal-operation telemetry with configurable artifact
//! statistics (outliers, clustered nulls, per-signal noise).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{it, ot, SignalCatalog, ValueKind};
use crate::error::{CetError, Result};
use crate::frame::{ArtifactKind, CellMask, Mode, SignalMatrix, TelemetryFrame};
use crate::model::ScenarioState;

/// One operating segment of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub target_power_percent: f64,
    pub duration_s: usize,
    pub ends_in_trip: bool,
}

/// Ordered operating plan driving the power trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpSchedule {
    pub segments: Vec<Segment>,
}

impl OpSchedule {
    pub fn total_duration(&self) -> usize {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(CetError::EmptySchedule);
        }
        for s in &self.segments {
            if s.duration_s == 0 {
                return Err(CetError::Config("segment duration must be positive".into()));
            }
            if !(0.0..=100.0).contains(&s.target_power_percent) {
                return Err(CetError::Config(format!(
                    "target power {} out of 0..100",
                    s.target_power_percent
                )));
            }
        }
        Ok(())
    }
}

/// Per-signal relative noise standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    pub ot: Vec<f64>,
    pub it: Vec<f64>,
}

impl NoiseScales {
    pub fn zero(n_ot: usize, n_it: usize) -> NoiseScales {
        NoiseScales { ot: vec![0.0; n_ot], it: vec![0.0; n_it] }
    }

    pub fn default_scales(n_ot: usize, n_it: usize) -> NoiseScales {
        let mut ot_s = vec![0.005; n_ot];
        for i in [ot::CH1_CPS, ot::CH2_CPS, ot::CH3_CPS, ot::CH4_CPS] {
            if i < n_ot {
                ot_s[i] = 0.01; // counting statistics
            }
        }
        if ot::TRIP_BUTTON < n_ot {
            ot_s[ot::TRIP_BUTTON] = 0.0;
        }
        NoiseScales { ot: ot_s, it: vec![0.02; n_it] }
    }
}

/// Outlier/null/noise statistics applied to generated frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactConfig {
    /// Fraction of OT datapoints turned into single-sample spikes.
    pub outlier_rate: f64,
    /// Share of outliers placed in operating-mode timesteps.
    pub outlier_operating_share: f64,
    /// Fraction of OT datapoints nulled (shutdown timesteps only).
    pub null_rate: f64,
    /// Mean geometric cluster length of null runs, in timesteps.
    pub null_cluster_mean_len: f64,
    pub noise_scales: NoiseScales,
}

impl ArtifactConfig {
    pub fn defaults(n_ot: usize, n_it: usize) -> ArtifactConfig {
        ArtifactConfig {
            outlier_rate: 4.82e-4,
            outlier_operating_share: 0.9802,
            null_rate: 7.8e-3,
            null_cluster_mean_len: 5.0,
            noise_scales: NoiseScales::default_scales(n_ot, n_it),
        }
    }

    pub fn none(n_ot: usize, n_it: usize) -> ArtifactConfig {
        ArtifactConfig {
            outlier_rate: 0.0,
            outlier_operating_share: 0.9802,
            null_rate: 0.0,
            null_cluster_mean_len: 5.0,
            noise_scales: NoiseScales::zero(n_ot, n_it),
        }
    }
}

/// Reactor-plausible dynamics constants. All invented plumbing; exposed so
/// experiments can vary them, with no acceptance behavior tied to exact values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// IT samples per OT second (defaults to 900 samples per 1,560 s).
    pub it_rate_hz: f64,
    /// First-order power lag constant, seconds.
    pub power_tau_s: f64,
    /// Post-trip count decay constant, seconds.
    pub trip_decay_tau_s: f64,
    /// Residual decay-heat power fraction after a trip.
    pub decay_heat_fraction: f64,
    /// Channel count rates at 100 % power, counts per second.
    pub channel_full_power_cps: [f64; 4],
    /// Channel background count rates, counts per second.
    pub channel_background_cps: [f64; 4],
    /// Baseline network traffic, packets per second.
    pub baseline_packet_rate: f64,
    /// Seconds before a trip-ending segment's end at which the trip fires.
    pub trip_lead_s: usize,
    /// Power fraction below which a timestep counts as shutdown.
    pub shutdown_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            it_rate_hz: 900.0 / 1560.0,
            power_tau_s: 30.0,
            trip_decay_tau_s: 0.3,
            decay_heat_fraction: 0.002,
            channel_full_power_cps: [1.2e6, 9.0e5, 6.5e5, 4.0e5],
            channel_background_cps: [2.0, 1.5, 1.8, 1.2],
            baseline_packet_rate: 30.0,
            trip_lead_s: 70,
            shutdown_threshold: 0.01,
        }
    }
}

/// A 121-sample copy of a target signal around a real trip
/// (60 s before through 60 s after the trip indication).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripTemplate {
    pub trip_index: usize,
    pub trip_t: usize,
    pub signal: usize,
    pub values: Vec<f64>,
}

pub const TEMPLATE_HALF_WINDOW: usize = 60;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniform draws per sample keeps the stream simple.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Mixes a salt into a master seed for independent substreams.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct PowerTrace {
    power: Vec<f64>,
    trip_pulse: Vec<bool>,
    tripped: Vec<bool>,
}

fn simulate_power(schedule: &OpSchedule, sim: &SimConfig) -> PowerTrace {
    let n = schedule.total_duration();
    let mut power = Vec::with_capacity(n);
    let mut trip_pulse = vec![false; n];
    let mut tripped_v = vec![false; n];
    let mut p = schedule.segments[0].target_power_percent / 100.0;
    let mut t = 0usize;
    for seg in &schedule.segments {
        let seg_end = t + seg.duration_s;
        let trip_t = if seg.ends_in_trip && seg.duration_s > sim.trip_lead_s + 10 {
            Some(seg_end - sim.trip_lead_s)
        } else {
            None
        };
        let mut tripped = false;
        while t < seg_end {
            if Some(t) == trip_t {
                tripped = true;
                trip_pulse[t] = true;
                if t + 1 < seg_end {
                    trip_pulse[t + 1] = true;
                }
            }
            if tripped {
                p = sim.decay_heat_fraction
                    + (p - sim.decay_heat_fraction) * (-1.0 / sim.trip_decay_tau_s).exp();
            } else {
                let target = seg.target_power_percent / 100.0;
                p += (target - p) / sim.power_tau_s;
            }
            power.push(p);
            tripped_v[t] = tripped;
            t += 1;
        }
    }
    PowerTrace { power, trip_pulse, tripped: tripped_v }
}

/// Generates a seeded normal-operation frame following the schedule.
pub fn generate_normal(
    catalog: &SignalCatalog,
    schedule: &OpSchedule,
    artifacts: &ArtifactConfig,
    sim: &SimConfig,
    seed: u64,
) -> Result<TelemetryFrame> {
    schedule.validate()?;
    let n_ot = catalog.n_ot();
    let n_it = catalog.n_it();
    if n_ot == 0 || n_it == 0 {
        return Err(CetError::EmptyCatalog);
    }
    let n = schedule.total_duration();
    let trace = simulate_power(schedule, sim);
    let mut ot_m = SignalMatrix::zeros(n_ot, n);

    let ns = &artifacts.noise_scales;
    let scale_at = |i: usize| -> f64 { ns.ot.get(i).copied().unwrap_or(0.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x07));

    let mut pool_temp = 20.0 + 8.0 * trace.power[0];
    let mut prev_counts = [0.0f64; 4];
    for t in 0..n {
        let p = trace.power[t];
        let operating = p >= sim.shutdown_threshold;
        // Power and pool temperature.
        let power_pct = (p * 100.0) * (1.0 + gauss(&mut rng) * scale_at(ot::POWER));
        ot_m.set(ot::POWER, t, power_pct.max(0.0));
        pool_temp += (20.0 + 8.0 * p - pool_temp) / 600.0;
        ot_m.set(
            ot::POOL_TEMP,
            t,
            pool_temp + gauss(&mut rng) * scale_at(ot::POOL_TEMP) * 25.0,
        );
        // Trip button indication.
        ot_m.set(ot::TRIP_BUTTON, t, if trace.trip_pulse[t] { 1.0 } else { 0.0 });
        // Detector channels.
        let ch_rows = [ot::CH1_CPS, ot::CH2_CPS, ot::CH3_CPS, ot::CH4_CPS];
        let mut ch_vals = [0.0f64; 4];
        for (k, &row) in ch_rows.iter().enumerate() {
            let mean = sim.channel_background_cps[k] + sim.channel_full_power_cps[k] * p;
            let v = mean * (1.0 + gauss(&mut rng) * scale_at(row));
            ch_vals[k] = v.max(0.0);
            ot_m.set(row, t, ch_vals[k]);
        }
        // Channel-1 relative change rate, percent per second.
        let rate = if t == 0 {
            0.0
        } else {
            (ch_vals[0] - prev_counts[0]) / prev_counts[0].abs().max(1.0) * 100.0
        };
        ot_m.set(
            ot::CH1_RATE,
            t,
            rate + gauss(&mut rng) * scale_at(ot::CH1_RATE) * 10.0,
        );
        prev_counts = ch_vals;
        // Rod positions.
        for i in 0..4 {
            let row = ot::ROD_FIRST + i;
            let pos = if trace.tripped[t] {
                0.0
            } else {
                20.0 + 60.0 * p + 2.0 * i as f64
            };
            ot_m.set(row, t, (pos + gauss(&mut rng) * scale_at(row) * 20.0).max(0.0));
        }
        // Reactor period proxy: long when steady, short during maneuvers.
        let dp = if t == 0 { 0.0 } else { (trace.power[t] - trace.power[t - 1]).abs() };
        ot_m.set(
            ot::PERIOD,
            t,
            100.0 / (1.0 + 1000.0 * dp) + gauss(&mut rng) * scale_at(ot::PERIOD) * 5.0,
        );
        // Pump and status flags follow the operating mode.
        ot_m.set(ot::PUMP_ON, t, if operating { 1.0 } else { 0.0 });
        for i in 0..6 {
            let row = ot::ALARM_FIRST + i;
            ot_m.set(row, t, if operating && i < 2 { 1.0 } else { 0.0 });
        }
        // Auxiliary process signals tied to power.
        for row in ot::AUX_FIRST..n_ot {
            let k = row - ot::AUX_FIRST;
            let base = 10.0 + (k % 7) as f64 * 3.0;
            let gain = 5.0 + (k % 11) as f64;
            let v = base + gain * p + gauss(&mut rng) * scale_at(row) * base;
            ot_m.set(row, t, v);
        }
    }

    // IT matrix on its own clock.
    let n_it_steps = ((n as f64 * sim.it_rate_hz).round() as usize).max(1);
    let mut it_m = SignalMatrix::zeros(n_it, n_it_steps);
    let mut it_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x17));
    let it_scale = |i: usize| -> f64 { ns.it.get(i).copied().unwrap_or(0.0) };
    for t in 0..n_it_steps {
        let pkt = (sim.baseline_packet_rate
            + gauss(&mut it_rng) * it_scale(it::PACKET_RATE) * 100.0)
            .max(0.0);
        it_m.set(it::PACKET_RATE, t, pkt);
        it_m.set(it::LATENCY, t, (5.0 + gauss(&mut it_rng) * it_scale(it::LATENCY) * 25.0).max(0.1));
        it_m.set(it::CPU_UTIL, t, (20.0 + gauss(&mut it_rng) * it_scale(it::CPU_UTIL) * 100.0).clamp(0.0, 100.0));
        it_m.set(it::MEM_UTIL, t, (40.0 + gauss(&mut it_rng) * it_scale(it::MEM_UTIL) * 50.0).clamp(0.0, 100.0));
        it_m.set(it::BANDWIDTH, t, (pkt * 1.5 + gauss(&mut it_rng) * it_scale(it::BANDWIDTH) * 10.0).max(0.0));
        it_m.set(it::CONNECTIONS, t, (12.0 + gauss(&mut it_rng) * it_scale(it::CONNECTIONS) * 10.0).max(0.0));
        it_m.set(it::RETRANSMITS, t, (0.5 + gauss(&mut it_rng) * it_scale(it::RETRANSMITS) * 2.0).max(0.0));
        it_m.set(it::SERVICES, t, (85.0 + gauss(&mut it_rng) * it_scale(it::SERVICES) * 5.0).max(0.0));
        it_m.set(it::PROCESSES, t, (120.0 + gauss(&mut it_rng) * it_scale(it::PROCESSES) * 10.0).max(0.0));
        it_m.set(it::DISK_IO, t, (3.0 + gauss(&mut it_rng) * it_scale(it::DISK_IO) * 5.0).max(0.0));
        it_m.set(it::PKT_ERRORS, t, (0.1 + gauss(&mut it_rng) * it_scale(it::PKT_ERRORS) * 1.0).max(0.0));
    }

    let modes: Vec<Mode> = trace
        .power
        .iter()
        .map(|&p| if p >= sim.shutdown_threshold { Mode::Operating } else { Mode::Shutdown })
        .collect();
    Ok(TelemetryFrame {
        ot: ot_m,
        it: it_m,
        it_period_s: 1.0 / sim.it_rate_hz,
        states: vec![ScenarioState::NORMAL; n],
        modes,
        ot_mask: CellMask::default(),
        it_mask: CellMask::default(),
    })
}

/// Injects outlier spikes and clustered nulls into the OT matrix,
/// recording every touched cell with its original value.
pub fn inject_artifacts(
    frame: &TelemetryFrame,
    catalog: &SignalCatalog,
    artifacts: &ArtifactConfig,
    seed: u64,
) -> Result<TelemetryFrame> {
    let mut out = frame.clone();
    let n_ot = out.ot.n_signals;
    let n = out.ot.n_steps;
    let cells = out.ot.cells();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xA2));

    let shutdown_steps: Vec<usize> = (0..n)
        .filter(|&t| out.modes[t] == Mode::Shutdown)
        .collect();
    let operating_steps: Vec<usize> = (0..n)
        .filter(|&t| out.modes[t] == Mode::Operating)
        .collect();

    // Outliers: single-sample spikes, excluded from binary-valued rows.
    let spikeable: Vec<usize> = catalog
        .defs
        .iter()
        .filter(|d| d.kind == crate::catalog::SignalKind::Ot)
        .enumerate()
        .filter(|(_, d)| d.value_kind != ValueKind::Binary)
        .map(|(row, _)| row)
        .collect();
    let mut touched: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    let n_outliers = (artifacts.outlier_rate * cells as f64).round() as usize;
    if n_outliers > 0 && !spikeable.is_empty() {
        let n_op = (n_outliers as f64 * artifacts.outlier_operating_share).round() as usize;
        for i in 0..n_outliers {
            let pool = if i < n_op && !operating_steps.is_empty() {
                &operating_steps
            } else if !shutdown_steps.is_empty() {
                &shutdown_steps
            } else {
                &operating_steps
            };
            if pool.is_empty() {
                break;
            }
            let (mut s, mut t);
            let mut retries = 0;
            loop {
                t = pool[rng.gen_range(0..pool.len())];
                s = spikeable[rng.gen_range(0..spikeable.len())];
                retries += 1;
                if touched.insert((s, t)) || retries > 1000 {
                    break;
                }
            }
            let v = out.ot.raw(s, t);
            let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mag: f64 = rng.gen_range(5.0..50.0);
            let local_scale = v.abs().max(1.0) * 0.1 + 1.0;
            out.ot.set(s, t, v + dir * mag * local_scale);
            out.ot_mask.push(s, t, ArtifactKind::Outlier, v);
        }
    }

    // Nulls: geometric-length clusters, shutdown timesteps only.
    let target_nulls = (artifacts.null_rate * cells as f64).round() as usize;
    if target_nulls > 0 {
        let capacity = shutdown_steps.len() * n_ot;
        if target_nulls > capacity {
            return Err(CetError::InsufficientShutdown {
                requested: artifacts.null_rate,
                available: capacity as f64 / cells as f64,
            });
        }
        let p_stop = 1.0 / artifacts.null_cluster_mean_len.max(1.0);
        let mut placed = 0usize;
        let mut attempts = 0usize;
        while placed < target_nulls {
            attempts += 1;
            if attempts > 100 * target_nulls + 1000 {
                // Dense fallback: scan remaining shutdown cells in order.
                'outer: for &t in &shutdown_steps {
                    for s in 0..n_ot {
                        if placed >= target_nulls {
                            break 'outer;
                        }
                        if !out.ot.is_null(s, t) {
                            out.ot_mask.push(s, t, ArtifactKind::Null, out.ot.raw(s, t));
                            out.ot.set_null(s, t);
                            placed += 1;
                        }
                    }
                }
                break;
            }
            let start_idx = rng.gen_range(0..shutdown_steps.len());
            let s = rng.gen_range(0..n_ot);
            // Geometric cluster length.
            let mut len = 1usize;
            while rng.gen_range(0.0..1.0) >= p_stop {
                len += 1;
            }
            let mut idx = start_idx;
            for _ in 0..len {
                if placed >= target_nulls || idx >= shutdown_steps.len() {
                    break;
                }
                let t = shutdown_steps[idx];
                // Keep clusters contiguous in time.
                if idx > start_idx && shutdown_steps[idx - 1] + 1 != t {
                    break;
                }
                if !out.ot.is_null(s, t) && !touched.contains(&(s, t)) {
                    touched.insert((s, t));
                    out.ot_mask.push(s, t, ArtifactKind::Null, out.ot.raw(s, t));
                    out.ot.set_null(s, t);
                    placed += 1;
                }
                idx += 1;
            }
        }
    }
    Ok(out)
}

/// Detects rising edges of the trip button row.
pub fn trip_times(frame: &TelemetryFrame) -> Vec<usize> {
    let row = frame.ot.row(ot::TRIP_BUTTON);
    let mut times = Vec::new();
    for t in 0..row.len() {
        let prev = if t == 0 { 0.0 } else { row[t - 1] };
        if row[t] >= 0.5 && prev < 0.5 {
            times.push(t);
        }
    }
    times
}

/// Copies 121-sample segments around each real trip for every target
/// signal. Trips too close to the frame edges are skipped; the second
/// return value counts them.
pub fn extract_trip_templates(
    frame: &TelemetryFrame,
    targets: &[usize],
) -> (Vec<TripTemplate>, usize) {
    let h = TEMPLATE_HALF_WINDOW;
    let n = frame.n_steps();
    let mut templates = Vec::new();
    let mut skipped = 0usize;
    for (trip_index, &t) in trip_times(frame).iter().enumerate() {
        if t < h || t + h >= n {
            skipped += 1;
            continue;
        }
        for &signal in targets {
            let values: Vec<f64> = ((t - h)..=(t + h))
                .map(|u| frame.ot.raw(signal, u))
                .collect();
            templates.push(TripTemplate { trip_index, trip_t: t, signal, values });
        }
    }
    (templates, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Mode;

    fn catalog() -> SignalCatalog {
        SignalCatalog::default_catalog()
    }

    fn flat_schedule(power: f64, dur: usize) -> OpSchedule {
        OpSchedule {
            segments: vec![Segment { target_power_percent: power, duration_s: dur, ends_in_trip: false }],
        }
    }

    #[test]
    fn deterministic_for_fixed_inputs() {
        let cat = catalog();
        let art = ArtifactConfig::defaults(cat.n_ot(), cat.n_it());
        let sched = OpSchedule {
            segments: vec![
                Segment { target_power_percent: 80.0, duration_s: 400, ends_in_trip: true },
                Segment { target_power_percent: 0.0, duration_s: 200, ends_in_trip: false },
            ],
        };
        let a = generate_normal(&cat, &sched, &art, &SimConfig::default(), 42).unwrap();
        let b = generate_normal(&cat, &sched, &art, &SimConfig::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = generate_normal(&cat, &sched, &art, &SimConfig::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_shutdown_counts_constant_at_background() {
        let cat = catalog();
        let art = ArtifactConfig::none(cat.n_ot(), cat.n_it());
        let f = generate_normal(&cat, &flat_schedule(0.0, 120), &art, &SimConfig::default(), 1).unwrap();
        let sim = SimConfig::default();
        for (k, row) in [ot::CH1_CPS, ot::CH2_CPS, ot::CH3_CPS, ot::CH4_CPS].iter().enumerate() {
            for t in 0..120 {
                let v = f.ot.raw(*row, t);
                assert!((v - sim.channel_background_cps[k]).abs() < 1e-9, "t={t} v={v}");
            }
        }
        assert!(f.modes.iter().all(|&m| m == Mode::Shutdown));
    }

    #[test]
    fn packet_rate_baseline_mean() {
        let cat = catalog();
        let art = ArtifactConfig::defaults(cat.n_ot(), cat.n_it());
        let f = generate_normal(&cat, &flat_schedule(50.0, 1200), &art, &SimConfig::default(), 7).unwrap();
        let row = f.it.row(it::PACKET_RATE);
        let mean: f64 = row.iter().sum::<f64>() / row.len() as f64;
        assert!((27.0..=33.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn post_trip_counts_decay() {
        let cat = catalog();
        let art = ArtifactConfig::defaults(cat.n_ot(), cat.n_it());
        let sched = OpSchedule {
            segments: vec![
                Segment { target_power_percent: 90.0, duration_s: 500, ends_in_trip: true },
                Segment { target_power_percent: 0.0, duration_s: 100, ends_in_trip: false },
            ],
        };
        let f = generate_normal(&cat, &sched, &art, &SimConfig::default(), 5).unwrap();
        let trips = trip_times(&f);
        assert_eq!(trips.len(), 1);
        let t = trips[0];
        let row = f.ot.row(ot::CH1_CPS);
        let pre: f64 = row[t - 60..t - 5].iter().sum::<f64>() / 55.0;
        let post: f64 = row[t + 5..t + 60].iter().sum::<f64>() / 55.0;
        assert!(post < 0.1 * pre, "pre {pre} post {post}");
    }

    #[test]
    fn templates_one_per_trip_and_target() {
        let cat = catalog();
        let art = ArtifactConfig::none(cat.n_ot(), cat.n_it());
        let mut segments = Vec::new();
        for _ in 0..3 {
            segments.push(Segment { target_power_percent: 85.0, duration_s: 300, ends_in_trip: true });
        }
        let f = generate_normal(&cat, &OpSchedule { segments }, &art, &SimConfig::default(), 9).unwrap();
        let targets = cat.console_targets();
        let (templates, skipped) = extract_trip_templates(&f, &targets);
        assert_eq!(skipped, 0);
        assert_eq!(templates.len(), 9); // 3 trips x 3 targets
        for tpl in &templates {
            assert_eq!(tpl.values.len(), 121);
            // Center sample equals the frame value at the trip timestamp.
            assert_eq!(tpl.values[TEMPLATE_HALF_WINDOW], f.ot.raw(tpl.signal, tpl.trip_t));
        }
    }

    #[test]
    fn no_trip_frame_yields_no_templates() {
        let cat = catalog();
        let art = ArtifactConfig::none(cat.n_ot(), cat.n_it());
        let f = generate_normal(&cat, &flat_schedule(50.0, 200), &art, &SimConfig::default(), 2).unwrap();
        let (templates, _) = extract_trip_templates(&f, &cat.console_targets());
        assert!(templates.is_empty());
    }

    #[test]
    fn artifacts_zero_leaves_frame_unchanged() {
        let cat = catalog();
        let art = ArtifactConfig::none(cat.n_ot(), cat.n_it());
        let f = generate_normal(&cat, &flat_schedule(50.0, 300), &art, &SimConfig::default(), 3).unwrap();
        let g = inject_artifacts(&f, &cat, &art, 3).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn nulls_only_in_shutdown_and_mask_conserves() {
        let cat = catalog();
        let art = ArtifactConfig::defaults(cat.n_ot(), cat.n_it());
        let sched = OpSchedule {
            segments: vec![
                Segment { target_power_percent: 0.0, duration_s: 400, ends_in_trip: false },
                Segment { target_power_percent: 70.0, duration_s: 1200, ends_in_trip: false },
            ],
        };
        let clean = generate_normal(&cat, &sched, &art, &SimConfig::default(), 11).unwrap();
        let dirty = inject_artifacts(&clean, &cat, &art, 11).unwrap();
        // Every null cell is in a shutdown timestep.
        for e in dirty.ot_mask.entries.iter().filter(|e| e.kind == ArtifactKind::Null) {
            assert_eq!(dirty.modes[e.t], Mode::Shutdown);
            assert!(dirty.ot.is_null(e.signal, e.t));
            assert_eq!(e.original, clean.ot.raw(e.signal, e.t));
        }
        // Mask equals the difference set between the clean and dirty frames.
        let mut diff = 0usize;
        for s in 0..clean.ot.n_signals {
            for t in 0..clean.ot.n_steps {
                let changed = dirty.ot.is_null(s, t) || dirty.ot.raw(s, t) != clean.ot.raw(s, t);
                if changed {
                    diff += 1;
                }
            }
        }
        assert_eq!(diff, dirty.ot_mask.entries.len());
        // Realized null fraction near the configured rate.
        let frac = dirty.ot.null_count() as f64 / dirty.ot.cells() as f64;
        assert!((frac - art.null_rate).abs() / art.null_rate < 0.2, "frac {frac}");
    }

    #[test]
    fn null_rate_exceeding_shutdown_errors() {
        let cat = catalog();
        let mut art = ArtifactConfig::defaults(cat.n_ot(), cat.n_it());
        art.null_rate = 0.5;
        let f = generate_normal(&cat, &flat_schedule(80.0, 300), &art, &SimConfig::default(), 4).unwrap();
        // Fully operating frame: no shutdown capacity at all.
        let err = inject_artifacts(&f, &cat, &art, 4).unwrap_err();
        assert!(matches!(err, CetError::InsufficientShutdown { .. }));
    }

    #[test]
    fn outlier_count_tracks_binomial_expectation() {
        let cat = catalog();
        let mut art = ArtifactConfig::defaults(cat.n_ot(), cat.n_it());
        art.null_rate = 0.0;
        let f = generate_normal(&cat, &flat_schedule(60.0, 1000), &art, &SimConfig::default(), 21).unwrap();
        let dirty = inject_artifacts(&f, &cat, &art, 21).unwrap();
        let cells = f.ot.cells() as f64;
        let expected = art.outlier_rate * cells;
        let got = dirty.ot_mask.count(ArtifactKind::Outlier) as f64;
        assert!((got - expected).abs() <= expected * 0.2 + 3.0, "expected {expected} got {got}");
    }

    #[test]
    fn empty_schedule_rejected() {
        let cat = catalog();
        let art = ArtifactConfig::none(cat.n_ot(), cat.n_it());
        let err = generate_normal(
            &cat,
            &OpSchedule { segments: vec![] },
            &art,
            &SimConfig::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, CetError::EmptySchedule));
    }
}
