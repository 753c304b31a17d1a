use super::*;
use crate::grammar::{expand, parse_grammar};
use crate::llm::StubProvider;
use crate::model::Validate;
use proptest::prelude::*;

const THREE: &str = include_str!("../../fixtures/grammars/symmetric_three_finger.json");

fn finger(angle: f64, t: f64) -> FingerParams {
    FingerParams {
        mount_angle_deg: angle,
        mount_translation_mm: t,
        metacarpal_length_mm: 20.0,
        scale: 1.0,
    }
}

fn mid_range() -> OphParams {
    OphParams::new(
        vec![finger(-20.0, -20.0), finger(0.0, 0.0), finger(20.0, 20.0)],
        60.0,
        0.35,
    )
    .unwrap()
}

fn schema() -> SemanticSchema {
    serde_json::from_value(serde_json::json!({
        "task_goal": "pick up a grape", "object_name": "grape",
        "object_size_mm": [20, 20, 22], "object_mass_g": 6, "material": "fruit",
        "fragility": "high", "surface_friction": "low", "force_level": "low",
        "precision_level": "high", "grasp_type": "fine_manipulation"
    }))
    .unwrap()
}

fn three_finger_graph() -> HandGraph {
    expand(&parse_grammar(THREE).unwrap()).unwrap()
}

fn params_reply(n: usize) -> String {
    let fingers: Vec<_> = (0..n)
        .map(|i| {
            serde_json::json!({"mount_angle_deg": 10.0 * i as f64, "mount_translation_mm": 20.0 * i as f64,
                "metacarpal_length_mm": 25, "scale": 1.1})
        })
        .collect();
    serde_json::json!({"fingers": fingers, "palm_width_mm": 55, "palm_curvature": 0.5}).to_string()
}

#[test]
fn identity_prior_leaves_params_unchanged() {
    let p = mid_range();
    assert_eq!(apply_priors(&p, &GraspPrior::identity()), p);
}

#[test]
fn fine_manipulation_prior_example() {
    let mut p = mid_range();
    p.palm_curvature = 0.2;
    let table = GraspPriorTable::default();
    let out = apply_priors(&p, table.get(GraspType::FineManipulation));
    assert!((out.fingers[0].scale - 0.85).abs() < 1e-12);
    assert_eq!(out.palm_curvature, 0.4);
    assert_eq!(out.fingers[0].metacarpal_length_mm, 15.0);
}

#[test]
fn force_based_prior_example() {
    let out = apply_priors(&mid_range(), GraspPriorTable::default().get(GraspType::ForceBased));
    assert!((out.fingers[1].scale - 1.2).abs() < 1e-12);
    assert_eq!(out.fingers[1].metacarpal_length_mm, 25.0);
    assert_eq!(out.palm_curvature, 0.35);
}

#[test]
fn metacarpal_offset_is_floored() {
    let mut p = mid_range();
    p.fingers[0].metacarpal_length_mm = 3.0;
    let out = apply_priors(&p, GraspPriorTable::default().get(GraspType::FineManipulation));
    assert_eq!(out.fingers[0].metacarpal_length_mm, METACARPAL_FLOOR_MM);
}

#[test]
fn default_tables_are_valid() {
    ConstraintConfig::default().check().unwrap();
    RatioConfig::default().check().unwrap();
    GraspPriorTable::default().check().unwrap();
    ParamNorms::default().check().unwrap();
}

#[test]
fn total_length_example() {
    let ratios = RatioConfig {
        base_phalanx_lengths_mm: [30.0, 20.0, 15.0],
        phalanx_ratios: [1.0, 1.0, 1.0],
        ..RatioConfig::default()
    };
    let mut f = finger(0.0, 0.0);
    f.metacarpal_length_mm = 40.0;
    let g = derive_geometry(&f, &ratios);
    assert_eq!(g.segment_lengths_mm, [30.0, 20.0, 15.0]);
    assert_eq!(g.total_length_mm, 105.0);
    g.validate().unwrap();
}

#[test]
fn scale_two_doubles_segments_and_diameters() {
    let r = RatioConfig::default();
    let mut f = finger(0.0, 0.0);
    let one = derive_geometry(&f, &r);
    f.scale = 2.0;
    let two = derive_geometry(&f, &r);
    for k in 0..3 {
        assert_eq!(two.segment_lengths_mm[k], 2.0 * one.segment_lengths_mm[k]);
        assert_eq!(two.joint_diameters_mm[k], 2.0 * one.joint_diameters_mm[k]);
    }
}

#[test]
fn default_ratios_follow_stated_proportions() {
    let g = derive_geometry(&finger(0.0, 0.0), &RatioConfig::default());
    let p = g.segment_lengths_mm;
    assert!((p[1] / p[0] - 0.65).abs() < 1e-12 && (p[2] / p[0] - 0.5).abs() < 1e-12);
    let j = g.joint_diameters_mm;
    assert!((j[1] / j[0] - 0.9).abs() < 1e-12 && (j[2] / j[0] - 0.8).abs() < 1e-12);
}

#[test]
fn mid_range_hand_passes() {
    let p = mid_range();
    let geo = derive_all(&p, &RatioConfig::default());
    let r = check_constraints(&p, &geo, &ConstraintConfig::default());
    assert!(r.passed, "{:?}", constraint_violations(&p, &geo, &ConstraintConfig::default()));
    assert!(r.violations.is_empty());
}

#[test]
fn six_fingers_fail_count() {
    let fingers = (0..6).map(|i| finger(0.0, -75.0 + 30.0 * i as f64)).collect();
    let p = OphParams::new(fingers, 60.0, 0.3).unwrap();
    let geo = derive_all(&p, &RatioConfig::default());
    let r = check_constraints(&p, &geo, &ConstraintConfig::default());
    assert!(!r.passed);
    assert!(r.violations.contains(&CHECK_FINGER_COUNT.to_string()));
}

#[test]
fn slender_link_fails() {
    let p = mid_range();
    let mut geo = derive_all(&p, &RatioConfig::default());
    geo[1].segment_lengths_mm[0] = 100.0;
    geo[1].link_widths_mm[0] = 10.0;
    let v = constraint_violations(&p, &geo, &ConstraintConfig::default());
    let slender: Vec<_> = v.iter().filter(|v| v.check_id == CHECK_SLENDERNESS).collect();
    assert_eq!(slender.len(), 1);
    assert!(slender[0].detail.contains("10.00"), "{}", slender[0].detail);
}

#[test]
fn every_category_reported_together() {
    let mut p = mid_range();
    p.fingers[0].mount_angle_deg = 80.0;
    p.fingers[1].mount_translation_mm = -15.0;
    p.fingers[2].scale = 2.5;
    p.palm_width_mm = 200.0;
    let geo = derive_all(&p, &RatioConfig::default());
    let r = check_constraints(&p, &geo, &ConstraintConfig::default());
    assert_eq!(
        r.violations,
        vec!["finger_length", "footprint", "joint_diameter", "link_width", "mount_angle", "mount_separation"]
    );
}

#[test]
fn footprint_box() {
    let p = mid_range();
    let geo = derive_all(&p, &RatioConfig::default());
    let [x, y, z] = footprint(&p, &geo);
    assert!((x - (60.0 + 2.0 * 77.4)).abs() < 1e-9);
    assert_eq!(x, y);
    assert!((z - (77.4 + 13.0)).abs() < 1e-9);
}

#[test]
fn shipped_prior_rows_admit_feasible_hands() {
    // One representative model proposal per grasp type must survive the
    // default filter once its prior is applied.
    let table = GraspPriorTable::default();
    for (grasp, scale, palm) in [
        (GraspType::FineManipulation, 1.2, 50.0),
        (GraspType::ForceBased, 0.9, 45.0),
        (GraspType::ToolBased, 1.0, 50.0),
    ] {
        let mut p = mid_range();
        p.palm_width_mm = palm;
        for f in &mut p.fingers {
            f.scale = scale;
        }
        let out = prepare_and_filter(&p, Some(grasp), &table, &RatioConfig::default(), &ConstraintConfig::default());
        assert!(out.result.passed, "{grasp}: {:?}", out.result.violations);
    }
}

#[test]
fn prior_multipliers_reach_geometry() {
    let table = GraspPriorTable::default();
    let out = prepare_and_filter(
        &mid_range(),
        Some(GraspType::ForceBased),
        &table,
        &RatioConfig::default(),
        &ConstraintConfig::default(),
    );
    // scale 1.2, joints x1.2 on a 13 mm base.
    assert!((out.geometry[0].joint_diameters_mm[0] - 1.2 * 13.0 * 1.2).abs() < 1e-9);
    assert!((out.geometry[0].link_widths_mm[0] - 1.2 * 12.0 * 1.25).abs() < 1e-9);
}

#[test]
fn chain_summary_lists_each_finger() {
    assert_eq!(
        chain_summary(&three_finger_graph()),
        "3 joints / 2 links; 3 joints / 2 links; 3 joints / 2 links"
    );
}

fn ctx(settings: &LlmSettings) -> ParamsContext<'_> {
    ParamsContext {
        task: "pick up a grape",
        design_cue: "compact",
        scope: None,
        settings,
    }
}

#[test]
fn generate_matches_structure() {
    let stub = StubProvider::from_memory([("params_1", params_reply(3))]);
    let s = LlmSettings::default();
    let out = generate_params(&three_finger_graph(), &schema(), &ctx(&s), &stub).unwrap();
    assert_eq!(out.params.finger_count(), 3);
    assert_eq!(out.calls, 1);
}

#[test]
fn count_mismatch_is_repaired_once() {
    let stub = StubProvider::from_memory([("params_1", params_reply(4)), ("params_2", params_reply(3))]);
    let s = LlmSettings::default();
    let out = generate_params(&three_finger_graph(), &schema(), &ctx(&s), &stub).unwrap();
    assert_eq!(out.params.finger_count(), 3);
    assert_eq!(out.calls, 2);
}

#[test]
fn unfixed_count_mismatch_errors_after_two_calls() {
    let stub = StubProvider::from_memory([
        ("params_1", params_reply(4)),
        ("params_2", params_reply(4)),
        ("params_3", params_reply(3)),
    ]);
    let s = LlmSettings::default();
    let err = generate_params(&three_finger_graph(), &schema(), &ctx(&s), &stub).unwrap_err();
    assert!(matches!(err, ParamsError::CountMismatch { expected: 3, got: 4 }));
    assert_eq!(stub.call_count(), 2);
}

#[test]
fn repair_after_bad_json_leaves_no_second_repair() {
    let stub = StubProvider::from_memory([
        ("params_1", "no numbers today".to_string()),
        ("params_2", params_reply(2)),
    ]);
    let s = LlmSettings::default();
    let err = generate_params(&three_finger_graph(), &schema(), &ctx(&s), &stub).unwrap_err();
    assert!(matches!(err, ParamsError::CountMismatch { expected: 3, got: 2 }));
    assert_eq!(stub.call_count(), 2);
}

#[test]
fn prompt_carries_structure_summary() {
    struct Capture(std::sync::Mutex<Vec<String>>);
    impl LlmProvider for Capture {
        fn complete(&self, r: &crate::llm::ChatRequest) -> Result<String, LlmError> {
            self.0.lock().unwrap().push(r.messages[1].content.clone());
            Ok(params_reply(3))
        }
    }
    let cap = Capture(Default::default());
    let s = LlmSettings::default();
    generate_params(&three_finger_graph(), &schema(), &ctx(&s), &cap).unwrap();
    let prompt = cap.0.lock().unwrap()[0].clone();
    assert!(prompt.contains("3 fingers"));
    assert!(prompt.contains("3 joints / 2 links"));
    assert!(prompt.contains("compact"));
}

#[test]
fn random_params_are_seeded_and_in_range() {
    use rand::SeedableRng;
    let norms = ParamNorms::default();
    let a = sample_random_params(&norms, &mut rand_chacha::ChaCha8Rng::seed_from_u64(7));
    let b = sample_random_params(&norms, &mut rand_chacha::ChaCha8Rng::seed_from_u64(7));
    assert_eq!(a, b);
    a.validate().unwrap();
    assert!((2..=5).contains(&a.finger_count()));
}

fn arb_finger() -> impl Strategy<Value = FingerParams> {
    (-90.0f64..90.0, -60.0f64..60.0, 5.0f64..60.0, 0.5f64..1.5).prop_map(|(a, t, m, s)| FingerParams {
        mount_angle_deg: a,
        mount_translation_mm: t,
        metacarpal_length_mm: m,
        scale: s,
    })
}

fn arb_params() -> impl Strategy<Value = OphParams> {
    (prop::collection::vec(arb_finger(), 1..=7), 30.0f64..120.0, 0.0f64..=1.0).prop_map(|(f, w, c)| OphParams {
        fingers: f,
        palm_width_mm: w,
        palm_curvature: c,
    })
}

proptest! {
    #[test]
    fn geometry_is_homogeneous_in_scale(f in arb_finger(), k in 0.1f64..5.0) {
        let r = RatioConfig::default();
        let g1 = derive_geometry(&f, &r);
        let g2 = derive_geometry(&FingerParams { scale: f.scale * k, ..f.clone() }, &r);
        for i in 0..3 {
            prop_assert!((g2.segment_lengths_mm[i] - k * g1.segment_lengths_mm[i]).abs() < 1e-9);
            prop_assert!((g2.joint_diameters_mm[i] - k * g1.joint_diameters_mm[i]).abs() < 1e-9);
            prop_assert!((g2.link_widths_mm[i] - k * g1.link_widths_mm[i]).abs() < 1e-9);
        }
        prop_assert!((g2.phalanx_sum_mm() - k * g1.phalanx_sum_mm()).abs() < 1e-9);
        prop_assert!(g2.validate().is_ok());
    }

    #[test]
    fn prior_scales_compose(p in arb_params(), m1 in 0.2f64..3.0, m2 in 0.2f64..3.0) {
        let prior = |m| GraspPrior { finger_scale_multiplier: m, ..GraspPrior::identity() };
        let twice = apply_priors(&apply_priors(&p, &prior(m1)), &prior(m2));
        for (a, b) in twice.fingers.iter().zip(&p.fingers) {
            prop_assert!((a.scale - b.scale * m1 * m2).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_ignores_finger_order(p in arb_params(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let r = RatioConfig::default();
        let c = ConstraintConfig::default();
        let mut shuffled = p.clone();
        shuffled.fingers.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = check_constraints(&p, &derive_all(&p, &r), &c);
        let b = check_constraints(&shuffled, &derive_all(&shuffled, &r), &c);
        prop_assert_eq!(&a, &b);
        let mut sorted = a.violations.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(a.violations, sorted);
    }

    #[test]
    fn passing_hands_are_positive_and_fit(p in arb_params()) {
        let r = RatioConfig::default();
        let c = ConstraintConfig::default();
        let geo = derive_all(&p, &r);
        if check_constraints(&p, &geo, &c).passed {
            for g in &geo {
                prop_assert!(g.segment_lengths_mm.iter().chain(&g.joint_diameters_mm).chain(&g.link_widths_mm).all(|v| *v > 0.0));
                prop_assert!(g.total_length_mm > 0.0);
            }
            let bbox = footprint(&p, &geo);
            for k in 0..3 {
                prop_assert!(bbox[k] <= c.build_volume_mm[k]);
            }
        }
    }
}
