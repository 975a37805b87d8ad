//! Shared setup for the adaptation benchmarks.

use std::sync::Arc;

use acas_core::mtourism::{load_cas, load_restaurants, Demo};

pub const STRATEGIES: &[u8] = include_bytes!("../../core/fixtures/restaurants-cas.xml");
pub const DATASET: &[u8] = include_bytes!("../../core/fixtures/restaurants.json");

/// A demo over the shipped dataset and strategies with every shipped
/// adaptation triggered.
pub fn full_context_demo() -> Demo {
    let dataset = Arc::new(load_restaurants(DATASET).expect("fixture dataset"));
    let demo = Demo::new(dataset, load_cas(STRATEGIES).expect("fixture strategies")).expect("demo");
    let p = demo.providers();
    for (path, value) in [
        ("user.language", serde_json::json!("fr")),
        (
            "user.preferences",
            serde_json::json!({ "cuisines": ["moroccan", "italian"], "maxPriceTier": 3 }),
        ),
        ("user.gps", serde_json::json!([31.6295, -7.9811])),
        ("environment.time", serde_json::json!("13:00")),
        ("device.hardware.battery.level", serde_json::json!(15)),
    ] {
        p.set(path, &value).expect("context value");
    }
    demo
}
