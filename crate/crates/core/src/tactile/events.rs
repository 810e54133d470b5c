use super::dynamic::DynamicStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Initiation,
    Cessation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContactEvent {
    pub step: usize,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventParams {
    pub rise: f64,
    pub fall: f64,
    /// Steps that must be spent in a state before it can be left.
    pub min_steps: usize,
}

impl Default for EventParams {
    fn default() -> Self {
        Self { rise: 0.02, fall: 0.005, min_steps: 2 }
    }
}

/// Hysteresis detector over a per-step variance series. The series starts in an
/// established quiet state, so contact can be reported from the first step.
/// Events strictly alternate, starting with an initiation.
pub fn contact_events(series: &[DynamicStats], params: &EventParams) -> Vec<ContactEvent> {
    let mut events = Vec::new();
    let mut active = false;
    let mut dwell = params.min_steps;
    for (step, st) in series.iter().enumerate() {
        if !active && st.var > params.rise && dwell >= params.min_steps {
            events.push(ContactEvent { step, kind: EventKind::Initiation });
            active = true;
            dwell = 0;
        } else if active && st.var < params.fall && dwell >= params.min_steps {
            events.push(ContactEvent { step, kind: EventKind::Cessation });
            active = false;
            dwell = 0;
        }
        dwell += 1;
    }
    events
}

/// Per-step stats of both sensors merged by taking the larger variance.
pub fn merged_series<F: AsRef<[f32]>>(left: &[F], right: &[F], tau: f64) -> crate::error::Result<Vec<DynamicStats>> {
    let l = super::dynamic::sigma_series(left, tau)?;
    let r = super::dynamic::sigma_series(right, tau)?;
    Ok(l.into_iter().zip(r).map(|(a, b)| if b.var > a.var { b } else { a }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> Vec<DynamicStats> {
        v.iter().map(|&var| DynamicStats { mean: 0.0, var }).collect()
    }

    #[test]
    fn quiet_series_has_no_events() {
        assert!(contact_events(&series(&[0.0; 10]), &EventParams::default()).is_empty());
        assert!(contact_events(&[], &EventParams::default()).is_empty());
    }

    #[test]
    fn pulse() {
        let ev = contact_events(&series(&[0.0, 0.0, 0.1, 0.1, 0.0, 0.0]), &EventParams::default());
        assert_eq!(
            ev,
            vec![
                ContactEvent { step: 2, kind: EventKind::Initiation },
                ContactEvent { step: 4, kind: EventKind::Cessation }
            ]
        );
    }

    #[test]
    fn short_blips_respect_dwell() {
        let ev = contact_events(&series(&[0.1, 0.0, 0.1, 0.1, 0.1, 0.0, 0.0]), &EventParams::default());
        let kinds: Vec<_> = ev.iter().map(|e| (e.step, e.kind)).collect();
        assert_eq!(kinds, vec![(0, EventKind::Initiation), (5, EventKind::Cessation)]);
    }

    #[test]
    fn initiation_tracks_first_contact_on_expert_wipes() {
        use crate::simenv::{run_expert_episode, EnvConfig, Task};
        let cfg = EnvConfig::default();
        for seed in 0..40 {
            let t = run_expert_episode(Task::Wipe, &cfg, seed, None).unwrap();
            let l: Vec<&[f32]> = t.observations.iter().map(|o| &o.tactile_l[..]).collect();
            let r: Vec<&[f32]> = t.observations.iter().map(|o| &o.tactile_r[..]).collect();
            let ev = contact_events(&merged_series(&l, &r, cfg.tau).unwrap(), &EventParams::default());
            let first = t.first_contact_step().unwrap() as i64;
            let init = ev.iter().find(|e| e.kind == EventKind::Initiation).unwrap().step as i64;
            assert!((init - first).abs() <= 2, "seed {seed}: {init} vs {first}");
        }
    }
}
