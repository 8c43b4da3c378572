//! Event-driven trip-based MFD for a single reservoir.
//!
//! A vehicle moves at the speed set by the other vehicles in the reservoir,
//! `V(n - 1)` while `n` vehicles are inside, so a lone trip runs at free
//! flow. All vehicles share that speed, so the distance a traveler covers
//! between two instants is the same for everyone. The
//! simulation tracks the cumulative distance `D(t)` covered by a virtual
//! vehicle since the first event; a traveler departing at `t` arrives when
//! `D` reaches `D(t) + L`. Pending arrivals therefore sit in a min-heap keyed
//! by that target distance and never need re-sorting when `n` changes.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::scalar::{Ordered, Scalar};

/// Remaining distance below which a trip counts as complete (meters).
pub const RESIDUAL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MfdError {
    #[error("accumulation {n} outside [0, {n_jam}]")]
    AccumulationOutOfRange { n: usize, n_jam: usize },
    #[error("gridlock at t = {time} min: accumulation reached n_jam = {n_jam}")]
    Gridlock { time: f64, n_jam: usize },
    #[error("{departures} departures but {lengths} trip lengths")]
    LengthMismatch { departures: usize, lengths: usize },
    #[error("traveler {traveler}: {message}")]
    InvalidTrip { traveler: usize, message: String },
    #[error("invalid speed function: {0}")]
    InvalidSpeed(String),
}

/// `V(n) = v_f (1 - n / n_jam)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedFunction<T> {
    /// Meters per minute.
    pub free_flow: T,
    pub jam_accumulation: usize,
}

impl<T: Scalar> SpeedFunction<T> {
    pub fn new(free_flow: T, jam_accumulation: usize) -> Result<Self, MfdError> {
        if !(free_flow.is_finite() && free_flow > T::zero()) {
            return Err(MfdError::InvalidSpeed(format!("free-flow speed {free_flow}")));
        }
        if jam_accumulation == 0 {
            return Err(MfdError::InvalidSpeed("jam accumulation must be positive".into()));
        }
        Ok(SpeedFunction { free_flow, jam_accumulation })
    }

    /// Builds the function from a free-flow speed in meters per second.
    pub fn from_mps(free_flow_mps: T, jam_accumulation: usize) -> Result<Self, MfdError> {
        Self::new(free_flow_mps * T::lit(60.0), jam_accumulation)
    }

    pub fn eval(&self, n: usize) -> Result<T, MfdError> {
        if n > self.jam_accumulation {
            return Err(MfdError::AccumulationOutOfRange { n, n_jam: self.jam_accumulation });
        }
        Ok(self.at(n))
    }

    /// Speed shared by the vehicles while `n` are in the reservoir.
    pub fn in_network(&self, n: usize) -> T {
        self.at(n.saturating_sub(1))
    }

    fn at(&self, n: usize) -> T {
        let r = T::one() - T::from_usize_lossy(n) / T::from_usize_lossy(self.jam_accumulation);
        self.free_flow * r * r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Departure,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event<T> {
    pub time: T,
    pub kind: EventKind,
    pub traveler: usize,
    /// Accumulation right after the event.
    pub accumulation: usize,
}

/// Outcome of one simulated day.
///
/// `D(t)` is stored as breakpoints `(times[k], distances[k])` with slope
/// `slopes[k]` until the next breakpoint. Before the first breakpoint and
/// after the last the network is empty and the slope is `v_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTrajectory<T> {
    pub events: Vec<Event<T>>,
    times: Vec<T>,
    distances: Vec<T>,
    slopes: Vec<T>,
    free_flow: T,
    pub departures: Vec<T>,
    pub arrivals: Vec<T>,
    pub travel_times: Vec<T>,
    pub peak_accumulation: usize,
}

impl<T: Scalar> DayTrajectory<T> {
    /// A day with nobody on the road.
    pub fn empty(speed: &SpeedFunction<T>) -> Self {
        DayTrajectory {
            events: Vec::new(),
            times: vec![T::zero()],
            distances: vec![T::zero()],
            slopes: vec![speed.free_flow],
            free_flow: speed.free_flow,
            departures: Vec::new(),
            arrivals: Vec::new(),
            travel_times: Vec::new(),
            peak_accumulation: 0,
        }
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.times
            .iter()
            .zip(&self.distances)
            .zip(&self.slopes)
            .map(|((&t, &d), &s)| (t, d, s))
    }

    /// `D(t)`.
    pub fn cum_distance(&self, t: T) -> T {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            self.distances[0] - self.free_flow * (self.times[0] - t)
        } else {
            self.distances[k - 1] + self.slopes[k - 1] * (t - self.times[k - 1])
        }
    }

    /// Smallest `t` with `D(t) = d`.
    pub fn time_at_distance(&self, d: T) -> T {
        let k = self.distances.partition_point(|&x| x <= d);
        if k == 0 {
            self.times[0] - (self.distances[0] - d) / self.free_flow
        } else {
            let k = k - 1;
            self.times[k] + (d - self.distances[k]) / self.slopes[k]
        }
    }

    /// Accumulation right after each event, as `(time, n)`.
    pub fn accumulation(&self) -> impl Iterator<Item = (T, usize)> + '_ {
        self.events.iter().map(|e| (e.time, e.accumulation))
    }

    pub fn write_accumulation_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,accumulation")?;
        for (t, n) in self.accumulation() {
            writeln!(out, "{t},{n}")?;
        }
        Ok(())
    }

    pub fn write_trips_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "id,depart,arrive,travel_time")?;
        for (i, ((d, a), tt)) in self
            .departures
            .iter()
            .zip(&self.arrivals)
            .zip(&self.travel_times)
            .enumerate()
        {
            writeln!(out, "{i},{d},{a},{tt}")?;
        }
        Ok(())
    }
}

/// Travel time of a fictional traveler who leaves at `depart` and drives
/// `length` meters without affecting the accumulation.
pub fn fictional_travel_time<T: Scalar>(traj: &DayTrajectory<T>, depart: T, length: T) -> T {
    let target = traj.cum_distance(depart) + length;
    traj.time_at_distance(target) - depart
}

/// Simulates one day. Simultaneous events are processed arrivals first, then
/// by traveler id.
pub fn simulate_day<T: Scalar>(
    departures: &[T],
    lengths: &[T],
    speed: &SpeedFunction<T>,
) -> Result<DayTrajectory<T>, MfdError> {
    if departures.len() != lengths.len() {
        return Err(MfdError::LengthMismatch {
            departures: departures.len(),
            lengths: lengths.len(),
        });
    }
    for (i, (&t, &l)) in departures.iter().zip(lengths).enumerate() {
        if !t.is_finite() {
            return Err(MfdError::InvalidTrip { traveler: i, message: format!("departure {t}") });
        }
        if !(l.is_finite() && l > T::zero()) {
            return Err(MfdError::InvalidTrip { traveler: i, message: format!("trip length {l}") });
        }
    }
    let n_total = departures.len();
    if n_total == 0 {
        return Ok(DayTrajectory::empty(speed));
    }

    let mut order: Vec<usize> = (0..n_total).collect();
    order.sort_by_key(|&i| (Ordered(departures[i]), i));

    let eps = T::lit(RESIDUAL_EPS);
    let mut traj = DayTrajectory {
        events: Vec::with_capacity(2 * n_total),
        times: Vec::with_capacity(2 * n_total + 1),
        distances: Vec::with_capacity(2 * n_total + 1),
        slopes: Vec::with_capacity(2 * n_total + 1),
        free_flow: speed.free_flow,
        departures: departures.to_vec(),
        arrivals: vec![T::nan(); n_total],
        travel_times: vec![T::nan(); n_total],
        peak_accumulation: 0,
    };

    let mut t = departures[order[0]];
    let mut d = T::zero();
    let mut n = 0usize;
    let mut v = speed.in_network(0);
    traj.times.push(t);
    traj.distances.push(d);
    traj.slopes.push(v);

    let mut heap: BinaryHeap<Reverse<(Ordered<T>, usize)>> = BinaryHeap::with_capacity(n_total);
    let mut next = 0usize;

    loop {
        let arrival = heap.peek().map(|&Reverse((Ordered(target), id))| {
            let remaining = target - d;
            let dt = if remaining <= eps { T::zero() } else { remaining / v };
            (t + dt, target, id)
        });
        let departure = order.get(next).map(|&i| (departures[i], i));

        let (event_time, kind, id) = match (arrival, departure) {
            (None, None) => break,
            (Some((ta, _, id)), Some((td, _))) if ta <= td => (ta, EventKind::Arrival, id),
            (Some((ta, _, id)), None) => (ta, EventKind::Arrival, id),
            (_, Some((td, i))) => (td, EventKind::Departure, i),
        };

        d = d + v * (event_time - t);
        t = event_time;
        match kind {
            EventKind::Arrival => {
                let Reverse((Ordered(target), _)) = heap.pop().expect("peeked");
                // Snap to the target so D-inversion reproduces this arrival.
                d = d.max(target);
                n -= 1;
                traj.arrivals[id] = t;
                traj.travel_times[id] = t - departures[id];
            }
            EventKind::Departure => {
                next += 1;
                n += 1;
                if n >= speed.jam_accumulation {
                    return Err(MfdError::Gridlock {
                        time: t.to_f64().unwrap_or(f64::NAN),
                        n_jam: speed.jam_accumulation,
                    });
                }
                heap.push(Reverse((Ordered(d + lengths[id]), id)));
                traj.peak_accumulation = traj.peak_accumulation.max(n);
            }
        }
        v = speed.in_network(n);
        traj.events.push(Event { time: t, kind, traveler: id, accumulation: n });
        traj.times.push(t);
        traj.distances.push(d);
        traj.slopes.push(v);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> SpeedFunction<f64> {
        SpeedFunction::from_mps(9.78, 4500).unwrap()
    }

    #[test]
    fn speed_values() {
        let s = table2();
        assert!((s.free_flow - 586.8).abs() < 1e-12);
        assert_eq!(s.eval(0).unwrap(), s.free_flow);
        assert_eq!(s.eval(4500).unwrap(), 0.0);
        assert!((s.eval(1500).unwrap() - 586.8 * 4.0 / 9.0).abs() < 1e-9);
        assert!((s.eval(1500).unwrap() - 260.8).abs() < 1e-9);
        assert!(matches!(s.eval(4501), Err(MfdError::AccumulationOutOfRange { .. })));
    }

    #[test]
    fn single_traveler_free_flow() {
        let traj = simulate_day(&[10.0], &[4600.0], &table2()).unwrap();
        assert!((traj.travel_times[0] - 4600.0 / 586.8).abs() < 1e-12);
        assert!((traj.travel_times[0] - 7.839).abs() < 5e-4);
        assert_eq!(traj.peak_accumulation, 1);
    }

    #[test]
    fn two_traveler_hand_trace() {
        let s = table2();
        let traj = simulate_day(&[0.0, 0.5], &[1000.0, 1000.0], &s).unwrap();
        // Each vehicle is slowed by the others only.
        let v1 = 586.8;
        let v2 = 586.8 * (1.0 - 1.0 / 4500.0f64).powi(2);
        // Traveler 0 alone for half a minute, then both share the slower speed.
        let rem0 = 1000.0 - 0.5 * v1;
        let t_a0 = 0.5 + rem0 / v2;
        // Traveler 1 covered rem0 by then and finishes alone.
        let rem1 = 1000.0 - rem0;
        let t_a1 = t_a0 + rem1 / v1;
        assert!((traj.arrivals[0] - t_a0).abs() < 1e-12);
        assert!((traj.arrivals[1] - t_a1).abs() < 1e-12);
        let kinds: Vec<_> = traj.events.iter().map(|e| (e.kind, e.traveler, e.accumulation)).collect();
        assert_eq!(
            kinds,
            vec![
                (EventKind::Departure, 0, 1),
                (EventKind::Departure, 1, 2),
                (EventKind::Arrival, 0, 1),
                (EventKind::Arrival, 1, 0),
            ]
        );

        // Fictional trip leaving at 1.0 min, 500 m: v2 until t_a0, then v1.
        let covered = (t_a0 - 1.0) * v2;
        let expected = if covered >= 500.0 {
            500.0 / v2
        } else {
            let after = 500.0 - covered;
            let rest = if after <= (t_a1 - t_a0) * v1 {
                after / v1
            } else {
                (t_a1 - t_a0) + (after - (t_a1 - t_a0) * v1) / 586.8
            };
            (t_a0 - 1.0) + rest
        };
        assert!((fictional_travel_time(&traj, 1.0, 500.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn tiny_trips_have_tiny_travel_times() {
        let deps = [0.0, 0.0, 0.0, 1.0, 1.0];
        let traj = simulate_day(&deps, &[1e-6; 5], &table2()).unwrap();
        assert!(traj.travel_times.iter().all(|&t| t < 1e-8));
        // Arrivals at the same instant as departures are processed first,
        // so the peak reflects only the simultaneous departures.
        assert!(traj.peak_accumulation <= 3);
    }

    #[test]
    fn empty_trajectory_is_free_flow() {
        let traj = DayTrajectory::empty(&table2());
        assert!((fictional_travel_time(&traj, 42.0, 4600.0) - 4600.0 / 586.8).abs() < 1e-12);
        let traj = simulate_day::<f64>(&[], &[], &table2()).unwrap();
        assert!((fictional_travel_time(&traj, -3.0, 4600.0) - 4600.0 / 586.8).abs() < 1e-12);
    }

    #[test]
    fn gridlock_is_reported() {
        let s = SpeedFunction::new(586.8, 3).unwrap();
        let err = simulate_day(&[0.0, 1.0, 2.0], &[1e5; 3], &s).unwrap_err();
        assert_eq!(err, MfdError::Gridlock { time: 2.0, n_jam: 3 });
    }

    #[test]
    fn bad_input_is_rejected() {
        let s = table2();
        assert!(matches!(simulate_day(&[0.0], &[1.0, 2.0], &s), Err(MfdError::LengthMismatch { .. })));
        assert!(matches!(simulate_day(&[f64::NAN], &[1.0], &s), Err(MfdError::InvalidTrip { .. })));
        assert!(matches!(simulate_day(&[0.0], &[0.0], &s), Err(MfdError::InvalidTrip { .. })));
    }
}
