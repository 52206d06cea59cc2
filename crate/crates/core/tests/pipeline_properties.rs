use std::collections::HashSet;

use affectmorph::fixtures;
use affectmorph::landmarks::{CanonicalFrame, LandmarkScheme};
use affectmorph::pipeline::{
    plan_subject, run_subject, GivenFace, PlanOptions, Provenance, RunContext,
};
use affectmorph::{build_template, Expression, ExpressionAngleTable, Point, SubjectInput, TemplateGrid};
use proptest::prelude::*;

fn frame() -> CanonicalFrame {
    CanonicalFrame {
        width: 96,
        height: 96,
        left_eye: Point::new(33.0, 43.0),
        right_eye: Point::new(63.0, 43.0),
        fill: [128, 128, 128],
    }
}

fn subject(seed: u64) -> SubjectInput {
    let f = frame();
    let faces = Expression::ALL
        .iter()
        .map(|&e| {
            let face = fixtures::synthetic_face(seed, e, &f);
            GivenFace {
                expression: e,
                image: face.image,
                landmarks: face.landmarks,
                intensity: e.is_apex().then(|| fixtures::perceived_intensity(seed, e)),
            }
        })
        .collect();
    SubjectInput::new(format!("s{seed}"), faces, &ExpressionAngleTable::default()).unwrap()
}

#[test]
fn full_default_run_invariants() {
    let input = subject(3);
    let grid = TemplateGrid::default();
    let table = ExpressionAngleTable::default();
    let plan = plan_subject(&input.profile(), &grid, &table, PlanOptions { mirrored: true, ..Default::default() }).unwrap();
    let run = run_subject(&input, &plan, &RunContext::new(&frame(), LandmarkScheme::default())).unwrap();
    assert_eq!(run.faces.len(), 282);

    let mut keys = HashSet::new();
    let mut lattice = Vec::new();
    for face in &run.faces {
        let Provenance::Job(job) = &face.provenance else { panic!("untagged face") };
        assert!(keys.insert((job.target.angle_deg.to_bits(), job.target.ratio.to_bits(), job.mirrored)));
        let a = face.affect;
        assert!((a.valence() - a.intensity() * a.angle_deg().to_radians().cos()).abs() < 1e-12);
        assert!((a.arousal() - a.intensity() * a.angle_deg().to_radians().sin()).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&a.intensity()));
        if !job.mirrored && job.target.ratio > 0.0 {
            assert!((a.angle_deg() - job.target.angle_deg).abs() < 1e-9);
            lattice.push((job.target.angle_deg, job.target.ratio, a.intensity()));
        }
    }
    assert_eq!(lattice.len(), grid.nodes.len());

    // radial monotonicity per angle, angular monotonicity per ratio
    for angle in grid.angles() {
        let col: Vec<f64> = lattice.iter().filter(|l| l.0 == angle).map(|l| l.2).collect();
        assert!(col.windows(2).all(|w| w[0] < w[1]), "angle {angle}: {col:?}");
    }
    for ratio in grid.ratios() {
        let row: Vec<f64> = run
            .faces
            .iter()
            .filter(|f| matches!(&f.provenance, Provenance::Job(j) if j.target.ratio == ratio && !j.mirrored))
            .map(|f| f.affect.angle_deg())
            .collect();
        assert!(row.windows(2).all(|w| w[0] < w[1]), "ratio {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_count_matches_grid(step_idx in 0usize..4, radial_idx in 0usize..4, mirrored: bool) {
        let step = [5.0, 7.5, 15.0, 65.0][step_idx];
        let radial = [0.05, 0.1, 0.25, 1.0][radial_idx];
        let grid = build_template(10.0, 205.0, step, radial).unwrap();
        let profile = affectmorph::pipeline::SubjectProfile {
            subject_id: "s".into(),
            apexes: Expression::APEXES.iter().map(|&e| (e, 0.9, false)).collect(),
        };
        let plan = plan_subject(&profile, &grid, &ExpressionAngleTable::default(), PlanOptions { mirrored, ..Default::default() }).unwrap();
        prop_assert_eq!(plan.jobs.len(), grid.total_points() * if mirrored { 2 } else { 1 });
        prop_assert!(plan.skipped.is_empty());
    }
}
