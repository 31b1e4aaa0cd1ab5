//! The checked-in scenario files under `scenarios/` must stay identical to
//! the programmatic builders. Regenerate them with
//! `UPDATE_SCENARIOS=1 cargo test -p tassim --test scenario_files`.

use std::path::PathBuf;

use tassim::config::ConfigDoc;
use tassim_core::scenarios;

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn bundled_files_match_builders() {
    let dir = scenarios_dir();
    let update = std::env::var("UPDATE_SCENARIOS").is_ok();
    if update {
        std::fs::create_dir_all(&dir).unwrap();
    }
    for scenario in scenarios::all() {
        let path = dir.join(format!("{}.json", scenario.name));
        let doc = ConfigDoc::from_sim_config(&scenario.config, Some(scenario.notes));
        let rendered = doc.to_json_pretty();
        if update {
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        let on_disk = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e}; run with UPDATE_SCENARIOS=1", path.display()));
        assert_eq!(
            on_disk, rendered,
            "{} is stale; regenerate with UPDATE_SCENARIOS=1",
            scenario.name
        );
        // The file parses back into exactly the builder's configuration.
        let parsed = ConfigDoc::from_str(&on_disk)
            .unwrap()
            .to_sim_config()
            .unwrap();
        assert_eq!(parsed, scenario.config, "{} round trip", scenario.name);
    }
}

#[test]
fn scenario_files_validate() {
    for scenario in scenarios::all() {
        let path = scenarios_dir().join(format!("{}.json", scenario.name));
        let doc = ConfigDoc::load(&path).expect("bundled scenario parses");
        let config = doc.to_sim_config().unwrap();
        let diags = tassim_core::validator::validate_config(&config);
        assert!(diags.is_empty(), "{}: {diags:?}", scenario.name);
    }
}
