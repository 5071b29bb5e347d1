//! Independent runs over clones of one world. With the `parallel` feature
//! the runs are spread over a rayon pool; without it they run in order.
//! Both paths produce identical results because every run owns its world
//! and derives its randomness from the seed and session id only.

use crate::harness::{run_sessions, RunOutput};
use crate::scenario::{Mode, UseCase};
use crate::world::World;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// The six (use case, mode) combinations, current mode first.
pub fn matrix() -> Vec<(UseCase, Mode)> {
    Mode::ALL
        .iter()
        .flat_map(|m| UseCase::ALL.iter().map(move |u| (*u, *m)))
        .collect()
}

/// Runs the scenario's sessions for `use_case` on a private copy of `world`.
pub fn run_job(world: &World, use_case: UseCase, mode: Mode) -> RunOutput {
    let mut w = world.clone();
    let sessions = w.scenario.sessions_for(use_case);
    run_sessions(&mut w, &sessions, mode)
}

pub fn map_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Order-preserving map, parallel when the feature is enabled.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn run_sequential(world: &World, jobs: &[(UseCase, Mode)]) -> Vec<RunOutput> {
    map_sequential(jobs, |(u, m)| run_job(world, *u, *m))
}

#[cfg(feature = "parallel")]
pub fn run_parallel(world: &World, jobs: &[(UseCase, Mode)]) -> Vec<RunOutput> {
    map_parallel(jobs, |(u, m)| run_job(world, *u, *m))
}

pub fn run_all(world: &World, jobs: &[(UseCase, Mode)]) -> Vec<RunOutput> {
    map(jobs, |(u, m)| run_job(world, *u, *m))
}
