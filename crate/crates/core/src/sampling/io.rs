//! Trajectory CSV: header `traj_id,step,x1,…,xn`, one row per (trajectory,
//! step) with `step ∈ 0..=l`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{norm, Observation, ObservationSet, Provenance, UNIT_TOL};
use crate::error::{Error, Result};

/// Norm below which an initial state is rejected instead of rescaled.
const MIN_X0_NORM: f64 = 1e-12;

/// Writes `obs` with 17 significant digits, enough to round-trip every `f64`.
pub fn write_observations<W: Write>(obs: &ObservationSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["traj_id".to_string(), "step".to_string()];
    header.extend((1..=obs.dim()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (id, o) in obs.observations().iter().enumerate() {
        if o.intermediate.len() + 1 != obs.trace_len() {
            // Refuse rather than invent the missing states.
            return Err(Error::invalid(format!(
                "trajectory {id} lacks intermediate states for length {}",
                obs.trace_len()
            )));
        }
        let states = std::iter::once(&o.x0)
            .chain(&o.intermediate)
            .chain(std::iter::once(&o.xl));
        for (step, x) in states.enumerate() {
            let mut rec = vec![id.to_string(), step.to_string()];
            rec.extend(x.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_observations(obs: &ObservationSet, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_observations(obs, std::io::BufWriter::new(file))
}

/// Parses a trajectory CSV. Initial states are rescaled to unit norm (the
/// whole trajectory is divided by `‖x0‖`); trajectories keep the order of
/// their first appearance.
/// step -> (line, state)
type StepMap = BTreeMap<usize, (usize, Vec<f64>)>;

pub fn read_observations<R: Read>(input: R, provenance: Provenance) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "traj_id" || &header[1] != "step" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `traj_id,step,x1,…,xn`".into(),
        });
    }
    let n = header.len() - 2;

    // traj_id -> (first line, states keyed by step)
    let mut order: Vec<String> = Vec::new();
    let mut trajs: BTreeMap<String, (usize, StepMap)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != n + 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", n + 2, rec.len()),
            });
        }
        let id = rec[0].to_string();
        let step: usize = rec[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid step `{}`", &rec[1]),
        })?;
        let mut x = Vec::with_capacity(n);
        for field in rec.iter().skip(2) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid number `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite state entry `{field}`"),
                });
            }
            x.push(v);
        }
        let entry = trajs.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (line, BTreeMap::new())
        });
        if entry.1.insert(step, (line, x)).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate step {step} for trajectory `{id}`"),
            });
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyObservations);
    }

    let mut l_common: Option<usize> = None;
    let mut observations = Vec::with_capacity(order.len());
    for id in &order {
        let (first_line, steps) = trajs.remove(id).expect("recorded id");
        let l = steps.len() - 1;
        if steps.keys().copied().ne(0..=l) {
            return Err(Error::RejectedTrajectory {
                traj_id: id.clone(),
                line: first_line,
                reason: "steps are not contiguous from 0".into(),
            });
        }
        if l == 0 {
            return Err(Error::RejectedTrajectory {
                traj_id: id.clone(),
                line: first_line,
                reason: "trajectory has no step after the initial state".into(),
            });
        }
        match l_common {
            None => l_common = Some(l),
            Some(prev) if prev != l => {
                return Err(Error::RejectedTrajectory {
                    traj_id: id.clone(),
                    line: first_line,
                    reason: format!("length {l} differs from the common length {prev}"),
                })
            }
            _ => {}
        }
        let mut states: Vec<Vec<f64>> = steps.into_values().map(|(_, x)| x).collect();
        let r = norm(&states[0]);
        if r < MIN_X0_NORM {
            return Err(Error::RejectedTrajectory {
                traj_id: id.clone(),
                line: first_line,
                reason: format!("initial state has norm {r:e}"),
            });
        }
        if (r - 1.0).abs() > UNIT_TOL {
            for s in &mut states {
                s.iter_mut().for_each(|v| *v /= r);
            }
        }
        let xl = states.pop().expect("l ≥ 1");
        let mut rest = states.into_iter();
        let x0 = rest.next().expect("step 0");
        observations.push(Observation {
            x0,
            intermediate: rest.collect(),
            xl,
            hidden_modes: None,
        });
    }
    ObservationSet::new(n, l_common.expect("non-empty"), observations, provenance)
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<ObservationSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_observations(
        std::io::BufReader::new(file),
        Provenance::File {
            path: path.display().to_string(),
        },
    )
}
