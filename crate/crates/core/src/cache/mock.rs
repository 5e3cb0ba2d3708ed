//! Deterministic synthetic upstream.
//!
//! Each function in a mock profile has a parameter sampler and a response
//! shape, both written in a small generator language embedded in JSON:
//!
//! * a string starting with `$` is a generator (`$date`, `$int:1:5`,
//!   `$echo:query`, ...); any other JSON value is a constant;
//! * a one-element array is a list of 1 to 3 independent draws of that element;
//! * longer arrays and objects are generated element-wise.
//!
//! Responses are seeded from the canonical key of the call and the collection
//! seed, so the same call always produces the same payload.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::upstream::{ParamSampler, Upstream, UpstreamError};
use crate::canon::canonical_key;
use crate::model::{Observation, ToolCall};

#[derive(Debug, Error)]
pub enum MockError {
    #[error("mock profile: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("function {function}: bad generator {spec:?}: {reason}")]
    Generator {
        function: String,
        spec: String,
        reason: String,
    },
}

const CITIES: &[&str] = &[
    "Montreal", "Paris", "Tokyo", "Osaka", "London", "New York", "San Diego", "Barcelona",
    "Rome", "Berlin", "Amsterdam", "Lisbon", "Vienna", "Prague", "Sydney", "Toronto",
    "Vancouver", "Chicago", "Seattle", "Boston", "Miami", "Singapore", "Seoul", "Bangkok",
    "Dubai", "Istanbul", "Athens", "Dublin", "Edinburgh", "Copenhagen", "Stockholm", "Oslo",
];

const HUBS: &[&str] = &[
    "New York", "London", "Paris", "Tokyo", "Dubai", "Singapore", "Frankfurt", "Los Angeles",
];

const LANDMARKS: &[&str] = &[
    "San Diego Marriott La Jolla", "Paris CDG Airport", "Los Angeles International Airport",
    "Times Square", "Shinjuku Station", "Heathrow Airport", "Gare du Nord",
    "Old Port of Montreal", "Sagrada Familia", "Brandenburg Gate", "Sydney Opera House",
    "Union Station Toronto", "Navy Pier", "Space Needle", "Marina Bay Sands",
    "Dubai Mall", "Colosseum", "Schiphol Airport",
];

const TAXI_SPOTS: &[&str] = &[
    "Paris CDG Airport", "Gare du Nord", "Heathrow Airport", "King's Cross Station",
    "JFK Airport", "Grand Central Terminal", "Narita Airport", "Shinjuku Station",
];

const INTERESTS: &[&str] = &[
    "Anime", "Museums", "Food tours", "Boat tours", "Theme parks", "Hiking", "Wine tasting",
    "Street art", "Castles", "Cooking classes",
];

const COUNTRIES: &[&str] = &[
    "us", "fr", "jp", "gb", "ca", "es", "it", "de", "nl", "pt", "au", "sg", "kr", "th", "ae",
];

const NAME_A: &[&str] = &[
    "Grand", "Royal", "Blue", "Golden", "Old Town", "Harbor", "Central", "Park", "Riverside",
    "Sunset", "Urban", "Maple",
];

const NAME_B: &[&str] = &[
    "Plaza", "Suites", "Inn", "Residence", "Lodge", "Palace", "Gardens", "House", "Tower",
    "Collection", "Experience", "Tour",
];

const BASE62: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
const BASE64: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

#[derive(Debug, Clone)]
enum Gen {
    Pool(&'static [&'static str]),
    Activity,
    Name,
    Date,
    DateAfter { param: String, min: u64, max: u64 },
    Time,
    Choice(Vec<String>),
    Int(i64, i64),
    Float(f64, f64, i32),
    Echo(String),
    Digits(usize),
    NegDigits(usize),
    AirportId,
    Slug,
    PlaceId,
    Token(usize),
    Bool,
}

#[derive(Debug, Clone)]
enum Shape {
    Const(Value),
    Gen(Gen),
    List(Box<Shape>),
    Tuple(Vec<Shape>),
    Map(Vec<(String, Shape)>),
}

#[derive(Debug, Clone)]
struct FunctionProfile {
    params: Vec<(String, Gen)>,
    response: Shape,
}

/// Seeded synthetic responses for the hotel, flight, car-rental, attraction
/// and taxi functions described by a mock profile.
#[derive(Debug, Clone)]
pub struct MockUpstream {
    functions: BTreeMap<String, FunctionProfile>,
}

fn parse_gen(spec: &str) -> Result<Gen, String> {
    let body = &spec[1..];
    let mut parts = body.split(':');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let num = |i: usize| -> Result<f64, String> {
        rest.get(i)
            .ok_or_else(|| format!("missing argument {i}"))?
            .parse::<f64>()
            .map_err(|e| e.to_string())
    };
    let arg = |i: usize| -> Result<String, String> {
        rest.get(i)
            .map(|s| s.to_string())
            .ok_or_else(|| format!("missing argument {i}"))
    };
    Ok(match head {
        "pool" => Gen::Pool(match arg(0)?.as_str() {
            "cities" => CITIES,
            "hubs" => HUBS,
            "landmarks" => LANDMARKS,
            "taxi_spots" => TAXI_SPOTS,
            "countries" => COUNTRIES,
            other => return Err(format!("unknown pool {other:?}")),
        }),
        "activity" => Gen::Activity,
        "name" => Gen::Name,
        "date" => Gen::Date,
        "date_after" => Gen::DateAfter {
            param: arg(0)?,
            min: num(1)? as u64,
            max: num(2)? as u64,
        },
        "time" => Gen::Time,
        "choice" => Gen::Choice(arg(0)?.split('|').map(str::to_string).collect()),
        "int" => Gen::Int(num(0)? as i64, num(1)? as i64),
        "float" => Gen::Float(num(0)?, num(1)?, num(2)? as i32),
        "echo" => Gen::Echo(arg(0)?),
        "digits" => Gen::Digits(num(0)? as usize),
        "neg_digits" => Gen::NegDigits(num(0)? as usize),
        "airport_id" => Gen::AirportId,
        "slug" => Gen::Slug,
        "place_id" => Gen::PlaceId,
        "token" => Gen::Token(num(0)? as usize),
        "bool" => Gen::Bool,
        other => return Err(format!("unknown generator {other:?}")),
    })
}

fn compile_shape(v: &Value) -> Result<Shape, String> {
    Ok(match v {
        Value::String(s) if s.starts_with('$') => Shape::Gen(parse_gen(s)?),
        Value::Array(items) if items.len() == 1 => Shape::List(Box::new(compile_shape(&items[0])?)),
        Value::Array(items) => Shape::Tuple(items.iter().map(compile_shape).collect::<Result<_, _>>()?),
        Value::Object(map) => Shape::Map(
            map.iter()
                .map(|(k, v)| Ok((k.clone(), compile_shape(v)?)))
                .collect::<Result<_, String>>()?,
        ),
        other => Shape::Const(other.clone()),
    })
}

fn pick<'a, T>(rng: &mut dyn RngCore, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 10, 1).expect("valid base date")
}

fn fmt_date(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn chars(rng: &mut dyn RngCore, alphabet: &[u8], n: usize) -> String {
    (0..n).map(|_| *pick(rng, alphabet) as char).collect()
}

impl Gen {
    fn draw(&self, rng: &mut dyn RngCore, args: &BTreeMap<String, Value>) -> Value {
        match self {
            Gen::Pool(items) => json!(pick(rng, items)),
            Gen::Activity => json!(format!("{}, {}", pick(rng, INTERESTS), pick(rng, CITIES))),
            Gen::Name => json!(format!("{} {}", pick(rng, NAME_A), pick(rng, NAME_B))),
            Gen::Date => json!(fmt_date(base_date() + Days::new(rng.random_range(0..270)))),
            Gen::DateAfter { param, min, max } => {
                let start = args
                    .get(param)
                    .and_then(Value::as_str)
                    .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
                    .unwrap_or_else(base_date);
                json!(fmt_date(start + Days::new(rng.random_range(*min..=*max))))
            }
            Gen::Time => {
                let h = rng.random_range(6..22);
                let m = if rng.random_bool(0.5) { 0 } else { 30 };
                json!(format!("{h:02}:{m:02}"))
            }
            Gen::Choice(items) => json!(pick(rng, items)),
            Gen::Int(lo, hi) => json!(rng.random_range(*lo..=*hi)),
            Gen::Float(lo, hi, dec) => {
                let scale = 10f64.powi(*dec);
                let x = rng.random_range(*lo..*hi);
                json!((x * scale).round() / scale)
            }
            Gen::Echo(param) => args.get(param).cloned().unwrap_or(Value::Null),
            Gen::Digits(n) => {
                let first = rng.random_range(1..10).to_string();
                json!(first + &chars(rng, b"0123456789", n.saturating_sub(1)))
            }
            Gen::NegDigits(n) => {
                let first = rng.random_range(1..10).to_string();
                json!(format!("-{first}{}", chars(rng, b"0123456789", n.saturating_sub(1))))
            }
            Gen::AirportId => json!(format!("{}.AIRPORT", chars(rng, &BASE62[..26], 3))),
            Gen::Slug => json!(format!(
                "PR{}-{}",
                chars(rng, b"0123456789", 6),
                chars(rng, &BASE62[26..52], 8)
            )),
            Gen::PlaceId => json!(format!("ChIJ{}", chars(rng, BASE62, 23))),
            Gen::Token(n) => json!(format!("eyJ{}", chars(rng, BASE64, *n))),
            Gen::Bool => json!(rng.random_bool(0.5)),
        }
    }
}

impl Shape {
    fn draw(&self, rng: &mut dyn RngCore, args: &BTreeMap<String, Value>) -> Value {
        match self {
            Shape::Const(v) => v.clone(),
            Shape::Gen(g) => g.draw(rng, args),
            Shape::List(elem) => {
                let n = rng.random_range(1..=3);
                Value::Array((0..n).map(|_| elem.draw(rng, args)).collect())
            }
            Shape::Tuple(items) => Value::Array(items.iter().map(|s| s.draw(rng, args)).collect()),
            Shape::Map(fields) => Value::Object(
                fields
                    .iter()
                    .map(|(k, s)| (k.clone(), s.draw(rng, args)))
                    .collect::<Map<_, _>>(),
            ),
        }
    }
}

impl MockUpstream {
    /// Parses a profile document:
    /// `{"Fn": {"params": {"p": "$gen"}, "response": <shape>}, ...}`.
    pub fn from_json(text: &str) -> Result<Self, MockError> {
        let raw: BTreeMap<String, Value> = serde_json::from_str(text)?;
        let mut functions = BTreeMap::new();
        for (name, body) in raw {
            let bad = |spec: &str, reason: String| MockError::Generator {
                function: name.clone(),
                spec: spec.to_string(),
                reason,
            };
            let mut params = Vec::new();
            if let Some(Value::Object(p)) = body.get("params") {
                for (param, spec) in p {
                    let spec = spec
                        .as_str()
                        .filter(|s| s.starts_with('$'))
                        .ok_or_else(|| bad(&spec.to_string(), "parameter generator must be a $ string".into()))?;
                    params.push((param.clone(), parse_gen(spec).map_err(|r| bad(spec, r))?));
                }
            }
            let response = body
                .get("response")
                .ok_or_else(|| bad("", "missing response shape".into()))?;
            let response = compile_shape(response).map_err(|r| bad(&response.to_string(), r))?;
            functions.insert(name, FunctionProfile { params, response });
        }
        Ok(Self { functions })
    }

    pub fn functions(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }

    fn response_rng(call: &ToolCall, seed: u64) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(canonical_key(call).as_bytes());
        h.update(seed.to_le_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

impl Upstream for MockUpstream {
    fn respond(&self, call: &ToolCall, seed: u64) -> Result<Observation, UpstreamError> {
        let profile = self
            .functions
            .get(&call.function)
            .ok_or_else(|| UpstreamError::UnknownFunction(call.function.clone()))?;
        let mut rng = Self::response_rng(call, seed);
        let payload = profile.response.draw(&mut rng, &call.args);
        Observation::ok(payload).map_err(|e| UpstreamError::Failed(e.to_string()))
    }
}

impl ParamSampler for MockUpstream {
    fn sample_params(
        &self,
        function: &str,
        rng: &mut dyn RngCore,
    ) -> Result<BTreeMap<String, Value>, UpstreamError> {
        let profile = self
            .functions
            .get(function)
            .ok_or_else(|| UpstreamError::UnknownFunction(function.to_string()))?;
        let mut args = BTreeMap::new();
        // relative dates read already-drawn parameters, so they go last
        for relative in [false, true] {
            for (name, gen) in &profile.params {
                if matches!(gen, Gen::DateAfter { .. }) == relative {
                    let v = gen.draw(rng, &args);
                    args.insert(name.clone(), v);
                }
            }
        }
        Ok(args)
    }
}
