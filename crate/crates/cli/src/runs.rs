use rmlab_core::algorithms::{run_observed, RunStats, Scheme, SchemeSpec};
use rmlab_core::analysis::TargetSet;
use rmlab_core::{DivergenceReport, Error, NoiseModel, NoiseStream, Point, Problem, StepSchedule, Trajectory};

/// A recorded run; `outcome` holds the divergence report when the run was
/// aborted, and the samples recorded up to that point are kept.
#[derive(Debug, Clone)]
pub struct Recorded {
    pub trajectory: Trajectory,
    pub outcome: Result<RunStats, DivergenceReport>,
    /// Smallest distance to `RunRequest::watch` over every iterate.
    pub closest: Option<f64>,
}

pub struct RunRequest<'a> {
    pub problem: &'a dyn Problem,
    pub scheme: SchemeSpec,
    pub schedule: &'a StepSchedule,
    pub noise: NoiseModel,
    pub z0: Point,
    pub horizon: u64,
    pub record_every: u64,
    pub seed: u64,
    pub watch: Option<&'a TargetSet>,
}

pub fn record(req: RunRequest<'_>) -> anyhow::Result<Recorded> {
    let mut scheme = Scheme::new(req.scheme)?;
    let mut stream = NoiseStream::new(req.noise, req.seed);
    let mut trajectory = Trajectory::new();
    let every = req.record_every.max(1);
    let mut closest = req.watch.map(|t| t.distance(&req.z0));
    let res = run_observed(
        &mut scheme,
        req.problem,
        &req.z0,
        req.schedule,
        &mut stream,
        req.horizon,
        |n, tau, gamma, z| {
            if n % every == 0 || n == req.horizon {
                trajectory.push(n, tau, gamma, z.clone());
            }
            if let (Some(t), Some(c)) = (req.watch, closest.as_mut()) {
                *c = c.min(t.distance(z));
            }
        },
    );
    let outcome = match res {
        Ok(stats) => Ok(stats),
        Err(Error::Diverged(rep)) => Err(rep),
        Err(e) => return Err(e.into()),
    };
    Ok(Recorded {
        trajectory,
        outcome,
        closest,
    })
}

/// Running average `Σ γ_k z_k / Σ γ_k` over the recorded samples.
pub fn time_average(traj: &Trajectory) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(traj.len());
    let (mut sx, mut sy, mut w) = (0.0, 0.0, 0.0);
    let times = traj.effective_times();
    for (i, z) in traj.iterates().iter().enumerate() {
        let dt = if i == 0 { 0.0 } else { times[i] - times[i - 1] };
        sx += dt * z[0];
        sy += dt * z[1];
        w += dt;
        if w > 0.0 {
            out.push([sx / w, sy / w]);
        }
    }
    out
}
