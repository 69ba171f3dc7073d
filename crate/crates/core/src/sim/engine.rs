use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::BinaryHeap;
use std::hash::Hasher;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::rng::{stream, StreamRole};
use super::SimState;
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::policy::{Policy, PolicyDecision, RejectCause};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub t_max: f64,
    /// Sampling times, nondecreasing, within `[0, t_max]`.
    pub grid: Vec<f64>,
}

impl RunConfig {
    /// `points` equally spaced sampling times on `[0, t_max]`.
    pub fn linspace(seed: u64, t_max: f64, points: usize) -> Self {
        let grid = match points {
            0 => vec![],
            1 => vec![0.0],
            n => (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect(),
        };
        RunConfig { seed, t_max, grid }
    }

    /// The default horizon `10 / mu_min` with 200 points.
    pub fn default_for(sc: &Scenario, seed: u64) -> Self {
        Self::linspace(seed, 10.0 / sc.mu_min(), 200)
    }
}

/// One replication sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub times: Vec<f64>,
    pub reward: Vec<f64>,
    /// `occupied[t][k]`.
    pub occupied: Vec<Vec<f64>>,
    /// `x[t][i]`, summed over allocations.
    pub x: Vec<Vec<u64>>,
    pub y: Vec<Vec<u64>>,
    pub xi: Vec<Vec<u64>>,
    pub eta: Vec<Vec<u64>>,
    pub thinned: Vec<Vec<u64>>,
    /// Arrivals per class up to `t_max`.
    pub arrivals: Vec<u64>,
    /// Admissions per class up to `t_max`.
    pub accepted: Vec<u64>,
    /// Hash of the arrival epochs and classes.
    pub arrival_hash: u64,
    pub events: u64,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Arrival { class: usize },
    Depart { class: usize, alloc: usize },
    DepartFictitious { class: usize },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // reversed so the max-heap pops the earliest (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Calendar {
    heap: BinaryHeap<Event>,
    seq: u64,
    #[cfg(debug_assertions)]
    last: (f64, u64),
}

impl Calendar {
    fn new() -> Self {
        Calendar {
            heap: BinaryHeap::new(),
            seq: 0,
            #[cfg(debug_assertions)]
            last: (f64::NEG_INFINITY, 0),
        }
    }

    fn push(&mut self, time: f64, kind: Kind) {
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        #[cfg(debug_assertions)]
        {
            debug_assert!(
                (e.time, e.seq) > self.last || (e.time > self.last.0),
                "calendar out of order"
            );
            self.last = (e.time, e.seq);
        }
        Some(e)
    }
}

fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Runs replication `replication` of `policy` on `sc`.
///
/// Every arrival draws its service time and a thinning uniform from
/// dedicated per-class streams, so policies run with the same seed and
/// replication see identical arrivals and durations.
pub fn simulate_run(
    sc: &Scenario,
    policy: &Policy,
    cfg: &RunConfig,
    replication: u64,
) -> Result<RunTrace> {
    if !(cfg.t_max > 0.0) {
        return Err(Error::InvalidParameter("t_max must be positive".into()));
    }
    let m = sc.num_classes();
    let mut arrivals_rng: Vec<_> = (0..m)
        .map(|i| stream(cfg.seed, replication, StreamRole::Arrivals, i))
        .collect();
    let mut service_rng: Vec<_> = (0..m)
        .map(|i| stream(cfg.seed, replication, StreamRole::Service, i))
        .collect();
    let mut thin_rng: Vec<_> = (0..m)
        .map(|i| stream(cfg.seed, replication, StreamRole::Thinning, i))
        .collect();

    let mut state = SimState::new(sc);
    let mut cal = Calendar::new();

    let y0 = policy.initial_load(m);
    for (i, &n) in y0.iter().enumerate() {
        let mut rng = stream(cfg.seed, replication, StreamRole::InitialLoad, i);
        for _ in 0..n {
            let d = sc.classes[i].service.sample(&mut rng);
            cal.push(d, Kind::DepartFictitious { class: i });
        }
        state.y[i] = n;
    }
    for i in 0..m {
        let t = exp_draw(&mut arrivals_rng[i], sc.classes[i].arrival_rate);
        cal.push(t, Kind::Arrival { class: i });
    }

    let g = cfg.grid.len();
    let mut tr = RunTrace {
        times: cfg.grid.clone(),
        reward: Vec::with_capacity(g),
        occupied: Vec::with_capacity(g),
        x: Vec::with_capacity(g),
        y: Vec::with_capacity(g),
        xi: Vec::with_capacity(g),
        eta: Vec::with_capacity(g),
        thinned: Vec::with_capacity(g),
        arrivals: vec![0; m],
        accepted: vec![0; m],
        arrival_hash: 0,
        events: 0,
    };
    let mut hasher = DefaultHasher::new();
    let mut next_sample = 0;

    let sample = |tr: &mut RunTrace, st: &SimState| {
        tr.reward.push(st.reward(sc));
        tr.occupied.push(st.occupied.clone());
        tr.x.push((0..m).map(|i| st.class_count(i)).collect());
        tr.y.push(st.y.clone());
        tr.xi.push(st.xi.clone());
        tr.eta.push(st.eta.clone());
        tr.thinned.push(st.thinned.clone());
    };

    loop {
        let t_next = cal.peek_time().unwrap_or(f64::INFINITY);
        while next_sample < g && cfg.grid[next_sample] < t_next {
            sample(&mut tr, &state);
            next_sample += 1;
        }
        if t_next > cfg.t_max {
            break;
        }
        let ev = cal.pop().expect("calendar has an event");
        state.clock = ev.time;
        tr.events += 1;
        match ev.kind {
            Kind::Arrival { class } => {
                tr.arrivals[class] += 1;
                hasher.write_usize(class);
                hasher.write_u64(ev.time.to_bits());
                let c = &sc.classes[class];
                let duration = c.service.sample(&mut service_rng[class]);
                let draw: f64 = thin_rng[class].gen();
                match policy.decide(sc, &state, class, draw)? {
                    PolicyDecision::Accept(j) => {
                        if !state.fits(sc, class, j) {
                            return Err(Error::FeasibilityFault {
                                time: ev.time,
                                class,
                                allocation: j,
                            });
                        }
                        state.x[class][j] += 1;
                        state.recompute(sc);
                        tr.accepted[class] += 1;
                        cal.push(ev.time + duration, Kind::Depart { class, alloc: j });
                    }
                    PolicyDecision::Reject(cause) => {
                        match cause {
                            RejectCause::PenaltyRule => state.xi[class] += 1,
                            RejectCause::Capacity => state.eta[class] += 1,
                            RejectCause::Thinned => state.thinned[class] += 1,
                        }
                        state.y[class] += 1;
                        cal.push(ev.time + duration, Kind::DepartFictitious { class });
                    }
                }
                let t = ev.time + exp_draw(&mut arrivals_rng[class], c.arrival_rate);
                cal.push(t, Kind::Arrival { class });
            }
            Kind::Depart { class, alloc } => {
                state.x[class][alloc] -= 1;
                state.recompute(sc);
            }
            Kind::DepartFictitious { class } => {
                state.y[class] -= 1;
            }
        }
    }
    while next_sample < g {
        sample(&mut tr, &state);
        next_sample += 1;
    }
    tr.arrival_hash = hasher.finish();
    Ok(tr)
}
