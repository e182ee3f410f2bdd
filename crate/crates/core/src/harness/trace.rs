//! CSV traces of trajectories.

use std::path::Path;

use crate::error::{Error, Result};
use crate::flows::Trajectory;

/// One row per step (`n ≥ 1`); points are written as JSON.
pub fn emit_trace(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["n", "lambda", "point", "f_value", "step_move"]).map_err(wrap)?;
    for r in traj.records.iter().filter(|r| r.n > 0) {
        let point = serde_json::to_string(&r.point).expect("points serialize");
        w.write_record([
            r.n.to_string(),
            r.lambda.to_string(),
            point,
            r.value.to_string(),
            r.step_move.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{ppa_run, StepSchedule};
    use crate::functionals::Functional;
    use crate::geometry::{Point, Space};

    #[test]
    fn header_only_for_empty_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        emit_trace(&Trajectory::default(), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "n,lambda,point,f_value,step_move\n");
    }

    #[test]
    fn three_steps_three_rows_byte_stable() {
        let s = Space::Euclidean { dim: 1 };
        let f = Functional::distance(Point::scalar(0.0), 1.0);
        let traj = ppa_run(&s, &f, &Point::scalar(5.0), &StepSchedule::Constant { lambda: 1.0 }, 3, 1e-12, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        emit_trace(&traj, &a).unwrap();
        emit_trace(&traj, &b).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        assert!(emit_trace(&traj, dir.path().join("missing/t.csv")).is_err());
    }
}
