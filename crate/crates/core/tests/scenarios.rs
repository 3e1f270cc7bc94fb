use fell_core::generator::{generate_scenario, GenParams, GroupKind};
use fell_core::pipeline::{run_file, run_text, Command, RunOptions, EXIT_OK, EXIT_PARSE};
use fell_core::scenario::{p2_swap_scenario, ScenarioFile};
use proptest::prelude::*;

fn small_group() -> impl Strategy<Value = GroupKind> {
    prop_oneof![Just(GroupKind::Cyclic(1)), Just(GroupKind::Cyclic(2)), Just(GroupKind::Cyclic(3)), Just(GroupKind::P2)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn dump_parse_dump_is_identity(seed in 1u64..100_000) {
        let file = generate_scenario(&GenParams { seed, ..Default::default() }).unwrap();
        let text = file.dump();
        prop_assert_eq!(ScenarioFile::parse(&text).unwrap().dump(), text);
    }

    #[test]
    fn generated_scenarios_validate(seed in 1u64..100_000) {
        let file = generate_scenario(&GenParams { seed, ..Default::default() }).unwrap();
        let report = run_file(file, Command::Validate, &RunOptions::default());
        prop_assert_eq!(report.exit_code, EXIT_OK, "{}", report.to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn small_scenarios_satisfy_the_theorem(seed in 1u64..100_000, group in small_group(), half in 1usize..=2) {
        let params = GenParams { seed, units: Some(2 * half), group: Some(group), max_dim: Some(2) };
        let file = generate_scenario(&params).unwrap();
        let report = run_file(file, Command::VerifyTheorem, &RunOptions::default());
        prop_assert_eq!(report.exit_code, EXIT_OK, "{}", report.to_json());
        prop_assert_eq!(report.certificates.len(), 4);
    }
}

#[test]
fn parse_errors_name_the_field() {
    let text = p2_swap_scenario().dump().replacen("\"scenario_v\": 1", "\"scenario_v\": 9", 1);
    let r = run_text(&text, Command::Validate, &RunOptions::default());
    assert_eq!(r.exit_code, EXIT_PARSE);

    let text = p2_swap_scenario().dump().replacen("\"mu\"", "\"mew\"", 1);
    let r = run_text(&text, Command::Validate, &RunOptions::default());
    assert_eq!(r.exit_code, EXIT_PARSE);
    assert!(r.error.unwrap().message.contains("line"));
}
