//! Event-driven simulation of finitely many sticky particles.
//!
//! Clusters fly freely between collisions. When adjacent clusters meet they
//! merge into one cluster carrying the summed mass and the mass-weighted mean
//! velocity, so mass and momentum are conserved exactly. Collisions are
//! scheduled in a priority queue of adjacent pairs; stale entries are skipped
//! by comparing version stamps.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::measures::MassVelocityState;

/// Collisions whose times agree to this relative tolerance are processed as
/// one simultaneous event.
pub const EVENT_RTOL: f64 = 1e-12;

/// Relative tolerance on positions for [`merge`].
pub const POSITION_TOL: f64 = 1e-12;

/// A set of original particles moving together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub mass: f64,
    pub position: f64,
    pub velocity: f64,
    /// First original particle index (inclusive).
    pub first: usize,
    /// Last original particle index (inclusive).
    pub last: usize,
}

impl Cluster {
    /// Stable identifier: the index of the leftmost member.
    pub fn id(&self) -> usize {
        self.first
    }
}

/// One merge of a chain of adjacent clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub first_index: usize,
    pub last_index: usize,
    pub pre_masses: Vec<f64>,
    pub pre_velocities: Vec<f64>,
    pub post_velocity: f64,
}

/// Sticky particle configuration at time [`ParticleSystem::time`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    time: f64,
    particle_count: usize,
    clusters: Vec<Cluster>,
    events: Vec<CollisionEvent>,
}

impl ParticleSystem {
    /// Particles at time 0. Particles sharing a position start as one cluster.
    pub fn new(state: &MassVelocityState) -> Self {
        let clusters = state
            .atoms()
            .enumerate()
            .map(|(i, (m, x, v))| Cluster { mass: m, position: x, velocity: v, first: i, last: i })
            .collect();
        Self { time: 0.0, particle_count: state.len(), clusters, events: Vec::new() }
    }

    /// Raw particles in any order; sorted by position, coincident particles
    /// grouped into clusters. Indices in the event log refer to sorted order.
    pub fn from_particles(masses: &[f64], positions: &[f64], velocities: &[f64]) -> Result<Self> {
        let n = masses.len();
        if positions.len() != n || velocities.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: positions.len().min(velocities.len()) });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > crate::measures::MASS_TOL {
            return Err(Error::InvalidMeasure(format!("masses sum to {total}, expected 1")));
        }
        let mut clusters: Vec<Cluster> = Vec::with_capacity(n);
        let mut momentum: Vec<f64> = Vec::with_capacity(n);
        for (rank, &i) in order.iter().enumerate() {
            let (m, x, v) = (masses[i], positions[i], velocities[i]);
            if !(m > 0.0) || !x.is_finite() || !v.is_finite() {
                return Err(Error::InvalidMeasure(format!("particle {i} is invalid: m={m}, x={x}, v={v}")));
            }
            match clusters.last_mut() {
                Some(c) if c.position == x => {
                    c.mass += m;
                    c.last = rank;
                    *momentum.last_mut().expect("paired with clusters") += m * v;
                }
                _ => {
                    clusters.push(Cluster { mass: m, position: x, velocity: v, first: rank, last: rank });
                    momentum.push(m * v);
                }
            }
        }
        for (c, p) in clusters.iter_mut().zip(&momentum) {
            c.velocity = p / c.mass;
        }
        Ok(Self { time: 0.0, particle_count: n, clusters, events: Vec::new() })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn events(&self) -> &[CollisionEvent] {
        &self.events
    }

    pub fn particle_count(&self) -> usize {
        self.particle_count
    }

    pub fn total_mass(&self) -> f64 {
        self.clusters.iter().map(|c| c.mass).sum()
    }

    pub fn momentum(&self) -> f64 {
        self.clusters.iter().map(|c| c.mass * c.velocity).sum()
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.clusters.iter().map(|c| c.mass * c.velocity * c.velocity).sum::<f64>()
    }

    /// Current state as a measure with velocity.
    pub fn state(&self) -> MassVelocityState {
        state_of(self)
    }

    /// Advances to `t_target`, processing every collision at or before it.
    pub fn evolve(&mut self, t_target: f64) -> Result<()> {
        if !(t_target >= self.time) {
            return Err(Error::InvalidArgument(format!("cannot evolve from t={} back to t={t_target}", self.time)));
        }
        if t_target.is_infinite() {
            return Err(Error::InvalidArgument("use evolve_to_end for an unbounded horizon".into()));
        }
        let mut engine = Engine::new(self);
        engine.run(t_target, &mut self.events);
        engine.write_back(self, t_target);
        Ok(())
    }

    /// Processes every future collision; afterwards no adjacent pair
    /// approaches. The clock stops at the last collision.
    pub fn evolve_to_end(&mut self) {
        let mut engine = Engine::new(self);
        let before = self.events.len();
        engine.run(f64::INFINITY, &mut self.events);
        let t = self.events[before..].last().map_or(self.time, |e| e.time.max(self.time));
        engine.write_back(self, t);
    }
}

/// Earliest future collision between adjacent clusters, with every adjacent
/// pair (left index) that collides at that time.
pub fn next_collision(sys: &ParticleSystem) -> Option<(f64, Vec<usize>)> {
    let mut times: Vec<(f64, usize)> = Vec::new();
    for (i, w) in sys.clusters.windows(2).enumerate() {
        let closing = w[0].velocity - w[1].velocity;
        if closing > 0.0 {
            let gap = (w[1].position - w[0].position).max(0.0);
            times.push((sys.time + gap / closing, i));
        }
    }
    let t_min = times.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
    if t_min.is_infinite() {
        return None;
    }
    let tol = EVENT_RTOL * t_min.abs().max(f64::MIN_POSITIVE);
    let pairs = times.iter().filter(|t| t.0 <= t_min + tol).map(|t| t.1).collect();
    Some((t_min, pairs))
}

/// Merges each maximal chain of the given adjacent pairs (by left index) into
/// one cluster. The pairs must touch at the current time.
pub fn merge(sys: &ParticleSystem, pairs: &[usize]) -> Result<ParticleSystem> {
    let n = sys.clusters.len();
    let mut joins = vec![false; n];
    for &i in pairs {
        if i + 1 >= n {
            return Err(Error::InvalidArgument(format!("pair ({i}, {}) is not an adjacent pair of {n} clusters", i + 1)));
        }
        let (a, b) = (sys.clusters[i].position, sys.clusters[i + 1].position);
        if (a - b).abs() > POSITION_TOL * a.abs().max(b.abs()).max(1.0) {
            return Err(Error::InvalidArgument(format!("clusters {i} and {} do not touch: {a} vs {b}", i + 1)));
        }
        joins[i] = true;
    }
    let mut out = sys.clone();
    out.clusters.clear();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n - 1 && joins[j] {
            j += 1;
        }
        let chain = &sys.clusters[i..=j];
        if j == i {
            out.clusters.push(chain[0]);
        } else {
            let (merged, event) = merge_chain(chain, sys.time);
            out.clusters.push(merged);
            out.events.push(event);
        }
        i = j + 1;
    }
    Ok(out)
}

fn merge_chain(chain: &[Cluster], time: f64) -> (Cluster, CollisionEvent) {
    let mass: f64 = chain.iter().map(|c| c.mass).sum();
    let momentum: f64 = chain.iter().map(|c| c.mass * c.velocity).sum();
    let centre: f64 = chain.iter().map(|c| c.mass * c.position).sum::<f64>() / mass;
    let velocity = momentum / mass;
    let first = chain[0].first;
    let last = chain[chain.len() - 1].last;
    let event = CollisionEvent {
        time,
        first_index: first,
        last_index: last,
        pre_masses: chain.iter().map(|c| c.mass).collect(),
        pre_velocities: chain.iter().map(|c| c.velocity).collect(),
        post_velocity: velocity,
    };
    (Cluster { mass, position: centre, velocity, first, last }, event)
}

/// Extracts the current measure with velocity.
pub fn state_of(sys: &ParticleSystem) -> MassVelocityState {
    let atoms: Vec<(f64, f64, f64)> = sys.clusters.iter().map(|c| (c.mass, c.position, c.velocity)).collect();
    MassVelocityState::normalized(&atoms).expect("clusters form a valid state")
}

/// One cluster at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub cluster_id: usize,
    pub m: f64,
    pub x: f64,
    pub v: f64,
}

/// Cluster rows over a time grid, plus the final system (with its event log).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub last: ParticleSystem,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.rows.iter().map(|r| r.t).collect();
        ts.dedup();
        ts
    }

    /// Rows at the `k`-th distinct sample time.
    pub fn snapshot(&self, t: f64) -> impl Iterator<Item = &TrajectoryRow> {
        self.rows.iter().filter(move |r| r.t == t)
    }

    /// CSV `t,cluster_id,m,x,v`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "cluster_id", "m", "x", "v"])?;
        for r in &self.rows {
            w.write_record([format!("{:?}", r.t), r.cluster_id.to_string(), format!("{:?}", r.m), format!("{:?}", r.x), format!("{:?}", r.v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CSV `t,first_index,last_index,post_velocity`.
pub fn write_events_csv<W: Write>(events: &[CollisionEvent], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "first_index", "last_index", "post_velocity"])?;
    for e in events {
        w.write_record([format!("{:?}", e.time), e.first_index.to_string(), e.last_index.to_string(), format!("{:?}", e.post_velocity)])?;
    }
    w.flush()?;
    Ok(())
}

/// Evolves a copy of `sys0` through `times` (nondecreasing), recording every
/// cluster at every sample. Samples at a collision time see the
/// post-collision state.
pub fn trajectory(sys0: &ParticleSystem, times: &[f64]) -> Result<Trajectory> {
    let mut sys = sys0.clone();
    let mut rows = Vec::new();
    for &t in times {
        sys.evolve(t)?;
        rows.extend(sys.clusters.iter().map(|c| TrajectoryRow { t, cluster_id: c.id(), m: c.mass, x: c.position, v: c.velocity }));
    }
    Ok(Trajectory { rows, last: sys })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scheduled {
    time: f64,
    left: usize,
    left_version: u32,
    right_version: u32,
}

impl Eq for Scheduled {}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.left.cmp(&other.left))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NONE: usize = usize::MAX;

/// Linked list of live clusters plus the collision queue.
struct Engine {
    mass: Vec<f64>,
    /// position at `t_ref`
    x_ref: Vec<f64>,
    t_ref: Vec<f64>,
    velocity: Vec<f64>,
    first: Vec<usize>,
    last: Vec<usize>,
    prev: Vec<usize>,
    next: Vec<usize>,
    version: Vec<u32>,
    head: usize,
    queue: BinaryHeap<Reverse<Scheduled>>,
}

impl Engine {
    fn new(sys: &ParticleSystem) -> Self {
        let n = sys.clusters.len();
        let mut e = Engine {
            mass: sys.clusters.iter().map(|c| c.mass).collect(),
            x_ref: sys.clusters.iter().map(|c| c.position).collect(),
            t_ref: vec![sys.time; n],
            velocity: sys.clusters.iter().map(|c| c.velocity).collect(),
            first: sys.clusters.iter().map(|c| c.first).collect(),
            last: sys.clusters.iter().map(|c| c.last).collect(),
            prev: (0..n).map(|i| if i == 0 { NONE } else { i - 1 }).collect(),
            next: (0..n).map(|i| if i + 1 == n { NONE } else { i + 1 }).collect(),
            version: vec![0; n],
            head: if n == 0 { NONE } else { 0 },
            queue: BinaryHeap::with_capacity(n),
        };
        for i in 0..n.saturating_sub(1) {
            e.schedule(i, sys.time);
        }
        e
    }

    fn position(&self, i: usize, t: f64) -> f64 {
        self.x_ref[i] + (t - self.t_ref[i]) * self.velocity[i]
    }

    /// Queues the collision of `left` with its right neighbour, if any.
    fn schedule(&mut self, left: usize, now: f64) {
        let right = self.next[left];
        if right == NONE {
            return;
        }
        let closing = self.velocity[left] - self.velocity[right];
        if !(closing > 0.0) {
            return;
        }
        let gap = (self.position(right, now) - self.position(left, now)).max(0.0);
        let time = now + gap / closing;
        self.queue.push(Reverse(Scheduled { time, left, left_version: self.version[left], right_version: self.version[right] }));
    }

    fn is_current(&self, s: &Scheduled) -> bool {
        let right = self.next[s.left];
        right != NONE && self.version[s.left] == s.left_version && self.version[right] == s.right_version
    }

    fn run(&mut self, t_limit: f64, log: &mut Vec<CollisionEvent>) {
        let mut batch: Vec<usize> = Vec::new();
        let mut joins: Vec<usize> = Vec::new();
        let mut chains: Vec<Vec<usize>> = Vec::new();
        loop {
            let Some(&Reverse(top)) = self.queue.peek() else { break };
            if !self.is_current(&top) {
                self.queue.pop();
                continue;
            }
            // events within rounding of the target count as reached, so a
            // restart at a logged collision time sees the merge
            let reach = t_limit + EVENT_RTOL * t_limit.abs().max(f64::MIN_POSITIVE);
            if top.time > reach {
                break;
            }
            let t_event = top.time.min(t_limit);
            let horizon = t_event + EVENT_RTOL * t_event.abs().max(f64::MIN_POSITIVE);
            batch.clear();
            while let Some(&Reverse(s)) = self.queue.peek() {
                if s.time > horizon {
                    break;
                }
                self.queue.pop();
                if self.is_current(&s) {
                    batch.push(s.left);
                }
            }
            // a left index may appear twice if it was rescheduled; dedup
            batch.sort_unstable();
            batch.dedup();
            joins.clear();
            joins.extend(batch.iter().copied());
            let is_join = |i: usize, joins: &[usize]| joins.binary_search(&i).is_ok();
            // collect chains from their leftmost member before touching links
            chains.clear();
            for &start in &batch {
                let p = self.prev[start];
                if p != NONE && is_join(p, &joins) {
                    continue;
                }
                let mut members = vec![start];
                let mut cur = start;
                while is_join(cur, &joins) {
                    cur = self.next[cur];
                    members.push(cur);
                }
                chains.push(members);
            }
            for members in &chains {
                self.merge_members(members, t_event, log);
            }
        }
    }

    fn merge_members(&mut self, members: &[usize], t: f64, log: &mut Vec<CollisionEvent>) {
        let mut mass = 0.0;
        let mut momentum = 0.0;
        let mut moment = 0.0;
        let mut pre_masses = Vec::with_capacity(members.len());
        let mut pre_velocities = Vec::with_capacity(members.len());
        for &k in members {
            mass += self.mass[k];
            momentum += self.mass[k] * self.velocity[k];
            moment += self.mass[k] * self.position(k, t);
            pre_masses.push(self.mass[k]);
            pre_velocities.push(self.velocity[k]);
        }
        let keep = members[0];
        let tail = members[members.len() - 1];
        let velocity = momentum / mass;
        self.mass[keep] = mass;
        self.x_ref[keep] = moment / mass;
        self.t_ref[keep] = t;
        self.velocity[keep] = velocity;
        self.last[keep] = self.last[tail];
        self.version[keep] += 1;
        let after = self.next[tail];
        for &k in &members[1..] {
            self.version[k] += 1;
            self.next[k] = NONE;
            self.prev[k] = NONE;
        }
        self.next[keep] = after;
        if after != NONE {
            self.prev[after] = keep;
        }
        log.push(CollisionEvent {
            time: t,
            first_index: self.first[keep],
            last_index: self.last[keep],
            pre_masses,
            pre_velocities,
            post_velocity: velocity,
        });
        let before = self.prev[keep];
        if before != NONE {
            self.schedule(before, t);
        }
        self.schedule(keep, t);
    }

    fn write_back(self, sys: &mut ParticleSystem, t: f64) {
        let mut clusters = Vec::with_capacity(sys.clusters.len());
        let mut i = self.head;
        while i != NONE {
            clusters.push(Cluster {
                mass: self.mass[i],
                position: self.position(i, t),
                velocity: self.velocity[i],
                first: self.first[i],
                last: self.last[i],
            });
            i = self.next[i];
        }
        sys.clusters = clusters;
        sys.time = t;
    }
}
