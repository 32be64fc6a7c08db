//! Slot-level Monte-Carlo simulator of stations contending under CSMA/CA.
//!
//! The abstraction is Bianchi-style: time advances in backoff slots, a slot
//! in which exactly one station's counter is zero carries a successful frame,
//! a slot in which two or more counters are zero is a collision, and an
//! otherwise idle slot decrements every contending counter. Frame formats,
//! rate control and PHY effects are not modelled.
//!
//! Runs of idle slots are skipped in one step (the minimum counter among the
//! contenders), which is exactly equivalent to stepping slot by slot and
//! consumes no randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest contention window the hardware queue accepts.
pub const CW_LIMIT: u32 = 1023;

/// Default EDCA best-effort `(CW_min, CW_max)` tuple.
pub const BEB_DEFAULT: (u32, u32) = (15, 63);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_stations: usize,
    /// Slot duration in microseconds.
    pub slot_us: f64,
    /// Slots occupied by a data frame.
    pub frame_slots: u32,
    /// Slots lost to a collision when RTS/CTS is on (an RTS collision).
    pub collision_slots_rtscts: u32,
    /// Slots lost to a collision when RTS/CTS is off (a full data frame).
    pub collision_slots_basic: u32,
    /// SIFS/ACK/DIFS (and RTS/CTS exchange) time added to every success.
    pub success_overhead_slots: u32,
    pub rtscts_enabled: bool,
    pub payload_bits_per_frame: u64,
    pub max_retries: u32,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_stations: 8,
            slot_us: 9.0,
            frame_slots: 50,
            collision_slots_rtscts: 4,
            collision_slots_basic: 50,
            success_overhead_slots: 6,
            rtscts_enabled: true,
            payload_bits_per_frame: 150_000,
            max_retries: 7,
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Basic access with 2.7 ms aggregated frames (300 slots, 900 kbit),
    /// so a collision wastes a whole aggregate.
    pub fn aggregated_basic() -> Self {
        SimConfig {
            frame_slots: 300,
            collision_slots_basic: 300,
            payload_bits_per_frame: 900_000,
            rtscts_enabled: false,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stations == 0 {
            return Err(Error::domain("n_stations must be at least 1"));
        }
        if !(self.slot_us.is_finite() && self.slot_us > 0.0) {
            return Err(Error::domain("slot_us must be positive"));
        }
        if self.frame_slots == 0 {
            return Err(Error::domain("frame_slots must be at least 1"));
        }
        if self.collision_slots_rtscts > self.collision_slots_basic {
            return Err(Error::domain(
                "collision_slots_rtscts must not exceed collision_slots_basic",
            ));
        }
        if self.collision_slots_rtscts == 0 || self.collision_slots_basic == 0 {
            return Err(Error::domain("collision cost must be at least one slot"));
        }
        Ok(())
    }

    pub fn collision_slots(&self) -> u32 {
        if self.rtscts_enabled {
            self.collision_slots_rtscts
        } else {
            self.collision_slots_basic
        }
    }

    pub fn success_slots(&self) -> u32 {
        self.frame_slots + self.success_overhead_slots
    }

    /// Number of slots in `seconds` of simulated time.
    pub fn slots_for_seconds(&self, seconds: f64) -> u64 {
        (seconds * 1e6 / self.slot_us).round().max(1.0) as u64
    }
}

/// Draw a backoff uniformly from `[0, cw]`.
pub fn sample_backoff<R: Rng + ?Sized>(cw: u32, rng: &mut R) -> Result<u32> {
    check_cw(cw)?;
    Ok(rng.random_range(0..=cw))
}

pub(crate) fn check_cw(cw: u32) -> Result<()> {
    if (1..=CW_LIMIT).contains(&cw) {
        Ok(())
    } else {
        Err(Error::domain(format!("cw {cw} outside [1, {CW_LIMIT}]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxOutcome {
    Success,
    Failure,
}

/// Binary exponential backoff step on the `2^k - 1` ladder (15, 31, 63, ...).
pub fn beb_next_cw(current_cw: u32, outcome: TxOutcome, cw_min: u32, cw_max: u32) -> Result<u32> {
    check_cw(cw_min)?;
    check_cw(cw_max)?;
    if !(cw_min <= current_cw && current_cw <= cw_max) {
        return Err(Error::domain(format!(
            "current cw {current_cw} outside [{cw_min}, {cw_max}]"
        )));
    }
    Ok(match outcome {
        TxOutcome::Success => cw_min,
        TxOutcome::Failure => (2 * current_cw + 1).min(cw_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackoffKind {
    Beb { cw_min: u32, cw_max: u32 },
    Fixed { cw: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffPolicy {
    pub kind: BackoffKind,
    pub current_cw: u32,
}

impl BackoffPolicy {
    pub fn beb(cw_min: u32, cw_max: u32) -> Result<Self> {
        check_cw(cw_min)?;
        check_cw(cw_max)?;
        if cw_min > cw_max {
            return Err(Error::domain(format!("cw_min {cw_min} > cw_max {cw_max}")));
        }
        Ok(BackoffPolicy {
            kind: BackoffKind::Beb { cw_min, cw_max },
            current_cw: cw_min,
        })
    }

    pub fn fixed(cw: u32) -> Result<Self> {
        check_cw(cw)?;
        Ok(BackoffPolicy {
            kind: BackoffKind::Fixed { cw },
            current_cw: cw,
        })
    }

    pub fn default_beb() -> Self {
        Self::beb(BEB_DEFAULT.0, BEB_DEFAULT.1).expect("default tuple is valid")
    }

    /// `(cw_min, cw_max)` as an AP would report it.
    pub fn range(&self) -> (u32, u32) {
        match self.kind {
            BackoffKind::Beb { cw_min, cw_max } => (cw_min, cw_max),
            BackoffKind::Fixed { cw } => (cw, cw),
        }
    }

    fn on_outcome(&mut self, outcome: TxOutcome) {
        if let BackoffKind::Beb { cw_min, cw_max } = self.kind {
            self.current_cw =
                beb_next_cw(self.current_cw, outcome, cw_min, cw_max).expect("cw kept in range");
        }
    }

    fn reset(&mut self) {
        self.current_cw = self.range().0;
    }
}

/// Per-station counters for the current period.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StationStats {
    pub frames_ok: u64,
    pub frames_collided: u64,
    pub frames_dropped: u64,
    pub bits_delivered: u64,
    pub attempts: u64,
    /// Attempts whose frame carried the retry mark.
    pub retry_attempts: u64,
    /// Slots in which the station was counting down or transmitting.
    pub eligible_slots: u64,
    pub latency_us: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationState {
    pub id: usize,
    pub policy: BackoffPolicy,
    pub backoff_counter: u32,
    pub active: bool,
    pub retries: u32,
    pub head_of_line_age: u64,
    /// Remaining bits this station may send this period; `None` = saturated.
    pub budget_bits: Option<u64>,
    pub stats: StationStats,
}

impl StationState {
    pub fn new(id: usize, policy: BackoffPolicy) -> Self {
        StationState {
            id,
            policy,
            backoff_counter: 0,
            active: true,
            retries: 0,
            head_of_line_age: 0,
            budget_bits: None,
            stats: StationStats::default(),
        }
    }

    fn has_frame(&self) -> bool {
        self.active && self.budget_bits.is_none_or(|b| b > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationPeriodStats {
    pub tp_bps: f64,
    pub bits: u64,
    pub attempts: u64,
    pub retry_attempts: u64,
    pub eligible_slots: u64,
    pub successes: u64,
    pub collisions: u64,
    pub drops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub duration_slots: u64,
    pub per_station_tp_bps: Vec<f64>,
    pub aggregate_tp_bps: f64,
    pub median_latency_us: Option<f64>,
    pub retry_fraction: f64,
    pub attempts: u64,
    pub successes: u64,
    /// Collision events (one per slot with two or more transmitters).
    pub collisions: u64,
    pub drops: u64,
    pub busy_slots: u64,
    pub idle_slots: u64,
    pub per_station: Vec<StationPeriodStats>,
}

impl PeriodMetrics {
    pub fn station(&self, i: usize) -> Result<&StationPeriodStats> {
        self.per_station
            .get(i)
            .ok_or_else(|| Error::domain(format!("station {i} out of range")))
    }
}

/// Attempts per contention-eligible slot of one station over a run.
pub fn measured_attempt_probability(metrics: &PeriodMetrics, station: usize) -> Result<f64> {
    let s = metrics.station(station)?;
    if s.eligible_slots == 0 {
        return Err(Error::undefined(format!(
            "station {station} had no contention-eligible slots"
        )));
    }
    Ok(s.attempts as f64 / s.eligible_slots as f64)
}

/// A set of stations sharing one collision domain, with its own RNG stream.
///
/// Cloning a simulator forks both state and RNG, which is how exhaustive
/// calibration evaluates several windows from identical starting points.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    stations: Vec<StationState>,
    rng: ChaCha8Rng,
    /// Busy slots of a transmission that straddled the previous period end.
    carry_busy: u64,
}

impl Simulator {
    pub fn new(config: SimConfig, policies: Vec<BackoffPolicy>) -> Result<Self> {
        config.validate()?;
        if policies.len() != config.n_stations {
            return Err(Error::domain(format!(
                "{} policies for {} stations",
                policies.len(),
                config.n_stations
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let stations = policies
            .into_iter()
            .enumerate()
            .map(|(id, policy)| {
                let mut st = StationState::new(id, policy);
                st.backoff_counter = rng.random_range(0..=policy.current_cw);
                st
            })
            .collect();
        Ok(Simulator {
            config,
            stations,
            rng,
            carry_busy: 0,
        })
    }

    /// All stations active and saturated under the same policy.
    pub fn uniform(config: SimConfig, policy: BackoffPolicy) -> Result<Self> {
        let n = config.n_stations;
        Self::new(config, vec![policy; n])
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn stations(&self) -> &[StationState] {
        &self.stations
    }

    fn station_mut(&mut self, i: usize) -> Result<&mut StationState> {
        self.stations
            .get_mut(i)
            .ok_or_else(|| Error::domain(format!("station {i} out of range")))
    }

    /// Switch a station's policy; the new window applies to its next draw.
    pub fn set_policy(&mut self, i: usize, policy: BackoffPolicy) -> Result<()> {
        let st = self.station_mut(i)?;
        if st.policy.kind != policy.kind {
            st.policy = policy;
        }
        Ok(())
    }

    /// Activating an idle station starts a fresh backoff for its first frame.
    pub fn set_active(&mut self, i: usize, active: bool) -> Result<()> {
        let was = self.station_mut(i)?.active;
        if active && !was {
            let cw = self.stations[i].policy.current_cw;
            let draw = self.rng.random_range(0..=cw);
            let st = &mut self.stations[i];
            st.backoff_counter = draw;
            st.retries = 0;
            st.head_of_line_age = 0;
        }
        self.stations[i].active = active;
        Ok(())
    }

    pub fn set_budget(&mut self, i: usize, budget_bits: Option<u64>) -> Result<()> {
        self.station_mut(i)?.budget_bits = budget_bits;
        Ok(())
    }

    /// Simulate `duration_slots` slots and return the period's metrics.
    pub fn run_period(&mut self, duration_slots: u64) -> Result<PeriodMetrics> {
        if duration_slots == 0 {
            return Err(Error::domain("duration_slots must be at least 1"));
        }
        for st in &mut self.stations {
            st.stats = StationStats::default();
        }
        let collision_slots = u64::from(self.config.collision_slots());
        let success_slots = u64::from(self.config.success_slots());
        let payload = self.config.payload_bits_per_frame;
        let slot_us = self.config.slot_us;
        let max_retries = self.config.max_retries;

        let mut remaining = duration_slots;
        let mut busy_slots = 0u64;
        let mut idle_slots = 0u64;
        let mut collisions = 0u64;

        let carried = self.carry_busy.min(remaining);
        self.carry_busy -= carried;
        busy_slots += carried;
        remaining -= carried;

        let mut transmitters: Vec<usize> = Vec::with_capacity(self.stations.len());
        while remaining > 0 {
            transmitters.clear();
            let mut min_counter = u32::MAX;
            for (i, st) in self.stations.iter().enumerate() {
                if !st.has_frame() {
                    continue;
                }
                if st.backoff_counter == 0 {
                    transmitters.push(i);
                }
                min_counter = min_counter.min(st.backoff_counter);
            }
            if min_counter == u32::MAX {
                idle_slots += remaining;
                break;
            }
            if transmitters.is_empty() {
                let k = u64::from(min_counter).min(remaining);
                for st in self.stations.iter_mut().filter(|s| s.has_frame()) {
                    st.backoff_counter -= k as u32;
                    st.stats.eligible_slots += k;
                    st.head_of_line_age += k;
                }
                idle_slots += k;
                remaining -= k;
                continue;
            }

            let success = transmitters.len() == 1;
            let event_slots = if success { success_slots } else { collision_slots };
            for st in self.stations.iter_mut().filter(|s| s.has_frame()) {
                st.head_of_line_age += event_slots;
            }
            for &i in &transmitters {
                let st = &mut self.stations[i];
                st.stats.attempts += 1;
                st.stats.eligible_slots += 1;
                if st.retries > 0 {
                    st.stats.retry_attempts += 1;
                }
                if success {
                    let bits = match st.budget_bits.as_mut() {
                        Some(b) => {
                            let sent = payload.min(*b);
                            *b -= sent;
                            sent
                        }
                        None => payload,
                    };
                    st.stats.bits_delivered += bits;
                    st.stats.frames_ok += 1;
                    st.stats.latency_us.push(st.head_of_line_age as f64 * slot_us);
                    st.head_of_line_age = 0;
                    st.retries = 0;
                    st.policy.on_outcome(TxOutcome::Success);
                } else {
                    st.stats.frames_collided += 1;
                    st.retries += 1;
                    if st.retries > max_retries {
                        st.stats.frames_dropped += 1;
                        st.retries = 0;
                        st.head_of_line_age = 0;
                        st.policy.reset();
                    } else {
                        st.policy.on_outcome(TxOutcome::Failure);
                    }
                }
                let cw = st.policy.current_cw;
                st.backoff_counter = self.rng.random_range(0..=cw);
            }
            if !success {
                collisions += 1;
            }
            let inside = event_slots.min(remaining);
            self.carry_busy = event_slots - inside;
            busy_slots += inside;
            remaining -= inside;
        }

        Ok(self.collect(duration_slots, busy_slots, idle_slots, collisions))
    }

    fn collect(
        &mut self,
        duration_slots: u64,
        busy_slots: u64,
        idle_slots: u64,
        collisions: u64,
    ) -> PeriodMetrics {
        let seconds = duration_slots as f64 * self.config.slot_us * 1e-6;
        let mut latencies = Vec::new();
        let mut per_station = Vec::with_capacity(self.stations.len());
        for st in &mut self.stations {
            let s = &mut st.stats;
            latencies.append(&mut s.latency_us);
            per_station.push(StationPeriodStats {
                tp_bps: s.bits_delivered as f64 / seconds,
                bits: s.bits_delivered,
                attempts: s.attempts,
                retry_attempts: s.retry_attempts,
                eligible_slots: s.eligible_slots,
                successes: s.frames_ok,
                collisions: s.frames_collided,
                drops: s.frames_dropped,
            });
        }
        let attempts: u64 = per_station.iter().map(|s| s.attempts).sum();
        let retries: u64 = per_station.iter().map(|s| s.retry_attempts).sum();
        let per_station_tp_bps: Vec<f64> = per_station.iter().map(|s| s.tp_bps).collect();
        PeriodMetrics {
            duration_slots,
            aggregate_tp_bps: per_station_tp_bps.iter().sum(),
            per_station_tp_bps,
            median_latency_us: median(&mut latencies),
            retry_fraction: if attempts == 0 {
                0.0
            } else {
                retries as f64 / attempts as f64
            },
            attempts,
            successes: per_station.iter().map(|s| s.successes).sum(),
            collisions,
            drops: per_station.iter().map(|s| s.drops).sum(),
            busy_slots,
            idle_slots,
            per_station,
        }
    }
}

/// One-shot period simulation over caller-owned station states, seeded from
/// `config.seed`.
pub fn simulate_period(
    config: &SimConfig,
    stations: &mut Vec<StationState>,
    duration_slots: u64,
) -> Result<PeriodMetrics> {
    if stations.is_empty() {
        return Err(Error::domain("no stations to simulate"));
    }
    let mut cfg = config.clone();
    cfg.n_stations = stations.len();
    cfg.validate()?;
    let mut sim = Simulator {
        config: cfg,
        stations: std::mem::take(stations),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        carry_busy: 0,
    };
    for st in &mut sim.stations {
        check_cw(st.policy.current_cw)?;
        st.backoff_counter = st.backoff_counter.min(st.policy.current_cw);
    }
    let metrics = sim.run_period(duration_slots);
    *stations = sim.stations;
    metrics
}

/// Median of a sample; sorts in place.
pub fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saturated(n: usize, policy: BackoffPolicy, seed: u64) -> Simulator {
        let cfg = SimConfig {
            n_stations: n,
            seed,
            ..SimConfig::default()
        };
        Simulator::uniform(cfg, policy).unwrap()
    }

    #[test]
    fn backoff_rejects_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_backoff(0, &mut rng).is_err());
        assert!(sample_backoff(1024, &mut rng).is_err());
        assert!(sample_backoff(1023, &mut rng).is_ok());
    }

    #[test]
    fn backoff_two_point_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let ones = (0..n)
            .map(|_| sample_backoff(1, &mut rng).unwrap())
            .filter(|&v| v == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
        let mean = (0..n)
            .map(|_| f64::from(sample_backoff(15, &mut rng).unwrap()))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 7.5).abs() / 7.5 < 0.01, "mean {mean}");
    }

    #[test]
    fn beb_ladder() {
        use TxOutcome::*;
        assert_eq!(beb_next_cw(15, Failure, 15, 63).unwrap(), 31);
        assert_eq!(beb_next_cw(63, Failure, 15, 63).unwrap(), 63);
        assert_eq!(beb_next_cw(63, Success, 15, 63).unwrap(), 15);
        assert_eq!(beb_next_cw(1, Failure, 1, 1023).unwrap(), 3);
        assert!(beb_next_cw(7, Failure, 15, 63).is_err());
    }

    #[test]
    fn config_invariants() {
        let mut cfg = SimConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.collision_slots_rtscts = cfg.collision_slots_basic + 1;
        assert!(cfg.validate().is_err());
        let cfg = SimConfig {
            slot_us: 0.0,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn lone_station_never_retries() {
        let mut sim = saturated(1, BackoffPolicy::fixed(1).unwrap(), 3);
        let m = sim.run_period(100_000).unwrap();
        assert_eq!(m.retry_fraction, 0.0);
        assert_eq!(m.collisions, 0);
        assert!(m.successes > 0);
    }

    #[test]
    fn slot_conservation_and_sums() {
        let mut sim = saturated(8, BackoffPolicy::default_beb(), 11);
        for _ in 0..3 {
            let m = sim.run_period(50_001).unwrap();
            assert_eq!(m.busy_slots + m.idle_slots, 50_001);
            assert!(m.successes + m.collisions <= m.attempts);
            let sum: f64 = m.per_station_tp_bps.iter().sum();
            assert!((sum - m.aggregate_tp_bps).abs() < 1e-6);
            assert!((0.0..=1.0).contains(&m.retry_fraction));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let run = || {
            let mut sim = saturated(5, BackoffPolicy::default_beb(), 99);
            (sim.run_period(200_000).unwrap(), sim.run_period(10_000).unwrap())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn counters_stay_within_window() {
        let mut sim = saturated(4, BackoffPolicy::beb(3, 255).unwrap(), 5);
        for _ in 0..20 {
            sim.run_period(997).unwrap();
            for st in sim.stations() {
                assert!(st.backoff_counter <= st.policy.current_cw);
                assert!((1..=CW_LIMIT).contains(&st.policy.current_cw));
            }
        }
    }

    #[test]
    fn inactive_stations_send_nothing() {
        let mut sim = saturated(3, BackoffPolicy::fixed(15).unwrap(), 1);
        sim.set_active(1, false).unwrap();
        let m = sim.run_period(100_000).unwrap();
        assert_eq!(m.per_station[1].attempts, 0);
        assert_eq!(m.per_station[1].bits, 0);
        sim.set_active(0, false).unwrap();
        sim.set_active(2, false).unwrap();
        let m = sim.run_period(1_000).unwrap();
        assert_eq!(m.idle_slots + m.busy_slots, 1_000);
        assert_eq!(m.attempts, 0);
    }

    #[test]
    fn budget_limits_delivery() {
        let mut sim = saturated(2, BackoffPolicy::fixed(15).unwrap(), 1);
        sim.set_budget(0, Some(400_000)).unwrap();
        let m = sim.run_period(200_000).unwrap();
        assert_eq!(m.per_station[0].bits, 400_000);
        assert!(m.per_station[1].bits > 400_000);
    }

    #[test]
    fn empty_station_list_is_an_error() {
        let mut stations = Vec::new();
        assert!(simulate_period(&SimConfig::default(), &mut stations, 10).is_err());
    }

    #[test]
    fn zero_eligible_is_undefined() {
        let mut sim = saturated(2, BackoffPolicy::fixed(15).unwrap(), 1);
        sim.set_active(1, false).unwrap();
        let m = sim.run_period(1000).unwrap();
        assert!(matches!(
            measured_attempt_probability(&m, 1),
            Err(Error::Undefined(_))
        ));
    }
}
