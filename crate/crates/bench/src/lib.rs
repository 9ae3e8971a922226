//! Benchmark fixtures shared by the criterion targets.

use rinewton_core::fields::{problem_by_name, ProblemParams};
use rinewton_core::harness::Setup;
use rinewton_core::{Majorant, Point};

/// A bundled problem paired with its hinted majorant and `ϑ`.
pub fn setup(name: &str, vartheta: f64) -> Setup {
    let pr = problem_by_name(name, &ProblemParams::default()).expect("bundled problem");
    let f = Majorant::from_hint(pr.hint().expect("bundled problems carry hints")).expect("valid hint");
    Setup::new(pr, f, vartheta).expect("setup")
}

/// Deterministic start at `fraction · r` from the singularity.
pub fn start(s: &Setup, fraction: f64) -> Point {
    s.problem.geometry().sample_at_distance(s.singularity(), fraction * s.r(), 1).expect("start point")
}
