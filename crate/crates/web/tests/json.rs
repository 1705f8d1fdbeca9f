use prt_web::{coverage_json, field_json, trace_json};

const CFG: &str = "[memory]\nn = 8\n[iteration]\nq_coeffs = 1,1\nseed = 1,0\nmisr_poly = 19\n";

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn field_view() {
    let v = json(&field_json("19", 1, 9, "2,2", "").unwrap());
    assert_eq!(v["field"], "1+x+x^4");
    assert_eq!(v["table"][1][0], 9);
    assert_eq!(v["table"].as_array().unwrap().len(), 16);
    assert_eq!(v["period"], 255);
    assert_eq!(v["max_period"], 255);
    let v = json(&field_json("19", 1, 9, "2,2", "0,0").unwrap());
    assert!(v["period_error"].is_string());
    assert!(field_json("18", 1, 9, "", "").is_err());
}

#[test]
fn trace_view() {
    let v = json(&trace_json(CFG, "SF0 <1/0/-> @2").unwrap());
    assert_eq!(v["faults"][0], "SF0@v2.0");
    let it = &v["iterations"][0];
    let frames = it["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 1 + 8);
    assert_eq!(frames[0]["cells"][0], 1);
    assert_eq!(frames[1]["reads"], serde_json::json!([0, 1]));
    assert_eq!(frames[1]["write"], 2);
    assert!(it["detected"].as_bool().unwrap());

    let clean = json(&trace_json(CFG, "").unwrap());
    assert_eq!(clean["iterations"][0]["detected"], false);
    assert!(trace_json("[memory]\nn = 1000\n[iteration]\nq_coeffs = 1\nseed = 1\n", "").is_err());
}

#[test]
fn coverage_view() {
    let v = json(&coverage_json(CFG, "").unwrap());
    assert_eq!(v["instances"], 12 * 8 + 32 * 56);
    let families = v["families"].as_array().unwrap();
    assert_eq!(families.len(), 13);
    let v = json(&coverage_json(CFG, "SF0 <1/0/->").unwrap());
    assert_eq!(v["instances"], 8);
    assert!(v["r_two"].is_null());
}
