use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn validator() -> jsonschema::Validator {
    let text = fs::read_to_string(root().join("schema/run_config.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn example_configs() -> Vec<(String, Value)> {
    let mut out: Vec<_> = fs::read_dir(root().join("configs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| (p.display().to_string(), serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn example_configs_satisfy_the_schema() {
    let v = validator();
    let configs = example_configs();
    assert!(configs.len() >= 3);
    for (name, cfg) in configs {
        let errors: Vec<String> = v.iter_errors(&cfg).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
    }
}

#[test]
fn schema_rejects_what_the_loader_rejects() {
    let v = validator();
    let base = json!({"model": {"kind": "conjugate_normal", "data": {"fixture": "normal_seven"}}});
    assert!(v.is_valid(&base));
    let mut typo = base.clone();
    typo["sede"] = json!(1);
    assert!(!v.is_valid(&typo));
    let mut bad_kind = base.clone();
    bad_kind["model"]["kind"] = json!("logistic");
    assert!(!v.is_valid(&bad_kind));
    let mut bad_prior = base.clone();
    bad_prior["base_prior"] = json!([{"name": "mu", "family": "gamma", "shape": 1}]);
    assert!(!v.is_valid(&bad_prior));
    let mut three_axes = base;
    let axis = json!({"blocks": ["mu"], "param": "normal_mean", "values": [0]});
    three_axes["sweep"] = json!([axis, axis, axis]);
    assert!(!v.is_valid(&three_axes));
}

#[test]
fn example_configs_load_and_fit() {
    for (name, cfg) in example_configs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = cfg;
        if let Some(Value::Object(data)) = cfg["model"].get_mut("data") {
            if let Some(Value::String(f)) = data.get_mut("file") {
                *f = root().join("configs").join(&*f).display().to_string();
            }
        }
        cfg["sampler"] = json!({"draws": 200, "burn_in": 200});
        let path = dir.path().join("run.json");
        fs::write(&path, cfg.to_string()).unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_prisens"))
            .args(["fit", "--config", path.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
