//! Data shipped with the crate: the travel-booking registry, the mock upstream
//! profile, workflow templates, the system prompt and two worked fixtures.

use crate::cache::{
    build_cache, expand_chains, CacheBuilder, CacheError, CacheStore, ExpandError, MockUpstream,
};
use crate::model::DatasetSample;
use crate::schema::Registry;
use crate::template::{parse_template, WorkflowTemplate};

pub const REGISTRY_JSON: &str = include_str!("../data/registry.json");
pub const MOCK_PROFILE_JSON: &str = include_str!("../data/mock_profile.json");
pub const SYSTEM_PROMPT: &str = include_str!("../data/system_prompt.txt");
pub const CAR_RENTAL_FIXTURE: &str = include_str!("../data/fixtures/car_rental.json");
pub const MONTREAL_FIXTURE: &str = include_str!("../data/fixtures/montreal.json");

macro_rules! templates {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../data/templates/", $name, ".json")))),*]
    };
}

pub const TEMPLATE_DOCS: &[(&str, &str)] = templates![
    "attraction_availability",
    "attraction_details",
    "car_rental_packages",
    "car_rental_policies",
    "car_rental_vehicle_overview",
    "exchange_rates",
    "flight_details",
    "flight_min_price",
    "flight_seat_map",
    "hotel_policies_and_reviews",
    "hotel_rooms",
    "hotel_types",
    "hotels_and_attractions",
    "hotels_near_pickup",
    "taxi_journey",
];

pub fn registry() -> Registry {
    Registry::from_json(REGISTRY_JSON).expect("shipped registry is valid")
}

pub fn mock_upstream() -> MockUpstream {
    MockUpstream::from_json(MOCK_PROFILE_JSON).expect("shipped mock profile is valid")
}

pub fn templates() -> Vec<WorkflowTemplate> {
    TEMPLATE_DOCS
        .iter()
        .map(|(name, doc)| {
            let mut t = parse_template(doc).expect("shipped template is valid");
            if t.id.is_empty() {
                t.id = (*name).to_string();
            }
            t
        })
        .collect()
}

pub fn template(id: &str) -> Option<WorkflowTemplate> {
    templates().into_iter().find(|t| t.id == id)
}

pub fn car_rental_sample() -> DatasetSample {
    serde_json::from_str(CAR_RENTAL_FIXTURE).expect("car rental fixture is valid")
}

pub fn montreal_sample() -> DatasetSample {
    serde_json::from_str(MONTREAL_FIXTURE).expect("montreal fixture is valid")
}

/// A store holding exactly the ground-truth calls of `samples` mapped to their
/// expected observations.
pub fn fixture_cache(samples: &[DatasetSample]) -> Result<CacheStore, CacheError> {
    let pairs = samples.iter().flat_map(|s| {
        let obs = s
            .ground_truth
            .expected_observations
            .clone()
            .unwrap_or_default();
        s.ground_truth
            .tool_calls()
            .cloned()
            .zip(obs)
            .collect::<Vec<_>>()
    });
    build_cache(pairs)
}

/// Expands every shipped template `breadth` times against the mock upstream.
pub fn mock_cache(breadth: usize, seed: u64) -> Result<CacheStore, ExpandError> {
    let mock = mock_upstream();
    let mut builder = CacheBuilder::new();
    for t in templates() {
        expand_chains(&t, &mock, &mock, &mut builder, 0..breadth, seed)?;
    }
    Ok(builder.build())
}

/// Grows a mock cache in rounds over all templates until it holds at least
/// `target` entries.
pub fn mock_cache_sized(target: usize, seed: u64) -> Result<CacheStore, ExpandError> {
    const ROUND: usize = 64;
    let mock = mock_upstream();
    let templates = templates();
    let mut builder = CacheBuilder::new();
    let mut start = 0;
    while builder.len() < target {
        for t in &templates {
            expand_chains(t, &mock, &mock, &mut builder, start..start + ROUND, seed)?;
        }
        start += ROUND;
    }
    Ok(builder.build())
}
