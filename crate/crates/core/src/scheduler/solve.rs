use std::sync::atomic::Ordering;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::search::{Incumbent, Model, Shared, Strategy, Worker};
use super::{InstanceError, Objective, Schedule, SchedulingInstance, VehicleStay};
use crate::preprocessor::VehicleId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveConfig {
    pub budget: Duration,
    pub workers: usize,
    pub seed: u64,
    /// Per-worker cap on search nodes; makes truncated searches repeatable.
    pub node_limit: Option<u64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            budget: Duration::from_secs(5),
            workers: 1,
            seed: 0,
            node_limit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Optimality {
    /// The search space was exhausted.
    Proven,
    /// Best schedule found before the budget ran out.
    AnytimeBest,
}

impl Optimality {
    pub fn label(self) -> &'static str {
        match self {
            Optimality::Proven => "proven",
            Optimality::AnytimeBest => "anytime-best",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub elapsed: Duration,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub schedule: Schedule,
    pub objective: Objective,
    pub optimality: Optimality,
    pub stats: SolveStats,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Invalid(#[from] InstanceError),
    #[error("infeasible: no valid timing for vehicle(s) {}", list(.vehicles))]
    Infeasible { vehicles: Vec<VehicleId> },
    #[error("budget expired before any schedule was found")]
    Timeout,
}

fn list(ids: &[VehicleId]) -> String {
    ids.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn strategy_for(worker: usize, seed: u64) -> Strategy {
    match worker {
        0 => Strategy::DepthFirst,
        1 => Strategy::CostLevels,
        k => Strategy::Shuffled(seed.wrapping_add(k as u64)),
    }
}

/// Runs the portfolio. Returns (exhausted, nodes).
fn search(model: &Model<'_>, shared: &Shared, workers: usize, seed: u64) -> (bool, u64) {
    if workers <= 1 {
        let mut w = Worker::new(model, shared, Strategy::DepthFirst);
        let done = w.run();
        return (done, w.nodes);
    }
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|k| {
                scope.spawn(move || {
                    let mut w = Worker::new(model, shared, strategy_for(k, seed));
                    let done = w.run();
                    if done {
                        shared.stop.store(true, Ordering::Relaxed);
                    }
                    (done, w.nodes)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("search worker panicked"))
            .fold((false, 0), |(d, n), (wd, wn)| (d || wd, n + wn))
    })
}

/// Is there any valid assignment for the model? `None` when undecided.
fn feasible(model: &Model<'_>, deadline: Instant) -> Option<bool> {
    let shared = Shared::new(deadline, None);
    let mut w = Worker::new(model, &shared, Strategy::FirstFeasible);
    let done = w.run();
    if w.found() {
        Some(true)
    } else if done {
        Some(false)
    } else {
        None
    }
}

/// Names vehicles with an empty feasible set: first those infeasible on
/// their own, otherwise the first vehicle (in id order) whose addition
/// makes the batch infeasible.
fn diagnose(model: &Model<'_>, deadline: Instant) -> Vec<VehicleId> {
    let n = model.vehicles.len();
    let alone: Vec<VehicleId> = (0..n)
        .filter(|&i| feasible(&model.restricted(&[i]), deadline) == Some(false))
        .map(|i| model.vehicles[i].id)
        .collect();
    if !alone.is_empty() {
        return alone;
    }
    let mut keep = Vec::new();
    for i in 0..n {
        keep.push(i);
        match feasible(&model.restricted(&keep), deadline) {
            Some(true) => continue,
            _ => return vec![model.vehicles[i].id],
        }
    }
    model.vehicles.last().map(|v| vec![v.id]).unwrap_or_default()
}

fn to_schedule(instance: &SchedulingInstance, model: &Model<'_>, best: &Incumbent) -> Schedule {
    let mut schedule = Schedule::default();
    for v in &instance.simulated {
        schedule.routes.insert(v.id, v.routes[0].id);
        for s in v.fixed_schedule.iter().flatten() {
            schedule.stays.push(VehicleStay {
                vehicle: v.id,
                street: s.street,
                enter: s.enter,
                exit: s.exit,
            });
        }
    }
    for (vi, &ri) in best.routes.iter().enumerate() {
        let v = &model.vehicles[vi];
        schedule.routes.insert(v.id, v.routes[ri].id);
    }
    for &(vi, street, enter, exit) in &best.stays {
        schedule.stays.push(VehicleStay {
            vehicle: model.vehicles[vi].id,
            street,
            enter,
            exit,
        });
    }
    schedule.normalize();
    schedule
}

/// Finds a lexicographically optimal schedule within the budget.
///
/// With one worker the search is fully deterministic. With two or more, a
/// depth-first worker and a cost-level worker (plus seeded shuffled
/// depth-first workers beyond two) share the incumbent; the first to exhaust
/// its space proves the incumbent optimal.
pub fn solve(instance: &SchedulingInstance, config: &SolveConfig) -> Result<Solution, SolveError> {
    let started = Instant::now();
    instance.validate()?;
    let deadline = started + config.budget;
    let model = Model::new(instance);
    if !model.base_ok() {
        return Err(SolveError::Infeasible {
            vehicles: model.vehicles.iter().map(|v| v.id).collect(),
        });
    }
    let workers = config.workers.max(1);
    let shared = Shared::new(deadline, config.node_limit);
    if !model.vehicles.is_empty() {
        let quick = Shared::new(started + config.budget / 4, config.node_limit.map(|n| n / 4));
        Worker::new(&model, &quick, Strategy::Greedy).run();
        if let Some(best) = quick.best.into_inner().expect("incumbent lock") {
            shared.offer(best);
        }
    }
    let (exhausted, nodes) = search(&model, &shared, workers, config.seed);
    let best = shared.best.into_inner().expect("incumbent lock");
    let stats = |elapsed| SolveStats { nodes, elapsed, workers };
    match best {
        Some(best) => Ok(Solution {
            schedule: to_schedule(instance, &model, &best),
            objective: best.objective,
            optimality: if exhausted { Optimality::Proven } else { Optimality::AnytimeBest },
            stats: stats(started.elapsed()),
        }),
        None if exhausted => Err(SolveError::Infeasible { vehicles: diagnose(&model, deadline) }),
        None => Err(SolveError::Timeout),
    }
}
