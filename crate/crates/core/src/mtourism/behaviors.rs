//! The adaptation aspects of the restaurants search. All are after-advice
//! response transforms. Each reads its context input from a bound argument
//! when the binding supplies one, else straight from the snapshot.

use serde_json::{Map, Value as Json};

use crate::adaptation::{AdaptationError, AdaptationRegistry, Behavior, BoundArg, BoundArgs};
use crate::context::{great_circle_distance_km, ContextSnapshot, GeoValue, TypedValue};
use crate::Document;

pub const LOCALIZE: &str = "localize";
pub const FILTER_PREFERENCES: &str = "filterPreferences";
pub const FILTER_OPEN: &str = "filterOpen";
pub const FILTER_BY_DISTANCE: &str = "filterByDistance";
pub const OPTIMIZE_PAYLOAD: &str = "optimizePayload";

pub const DEFAULT_LANGUAGE: &str = "en";
pub const DEFAULT_RADIUS_KM: f64 = 5.0;
pub const OPTIMIZED_PAGE_SIZE: f64 = 5.0;

fn failed(msg: impl Into<String>) -> AdaptationError {
    AdaptationError::Failed(msg.into())
}

fn items_mut(doc: &mut Document) -> Result<&mut Vec<Json>, AdaptationError> {
    doc.get_mut("items")
        .and_then(Json::as_array_mut)
        .ok_or_else(|| failed("response has no items list"))
}

fn context_input(
    args: &BoundArgs,
    arg: &str,
    snapshot: &ContextSnapshot,
    path: &str,
) -> Result<TypedValue, AdaptationError> {
    match args.get(arg) {
        Some(BoundArg::Context(v)) => Ok(v.clone()),
        Some(BoundArg::Literal(s)) => Ok(TypedValue::String(s.clone())),
        None => snapshot
            .resolve_or_derive(path)
            .map_err(|e| failed(e.to_string())),
    }
}

fn pick_language(translations: &Map<String, Json>, language: &str) -> Option<(String, Json)> {
    [language, DEFAULT_LANGUAGE]
        .iter()
        .find_map(|l| translations.get(*l).map(|t| ((*l).to_owned(), t.clone())))
        .or_else(|| {
            translations
                .iter()
                .next()
                .map(|(l, t)| (l.clone(), t.clone()))
        })
}

/// Collapses each item's names and descriptions to one language: the
/// requested one, else English, else the first available.
pub fn localize(
    mut doc: Document,
    args: &BoundArgs,
    snapshot: &ContextSnapshot,
) -> Result<Document, AdaptationError> {
    let language = context_input(args, "language", snapshot, "user.language")?;
    let language = language
        .as_str()
        .ok_or_else(|| failed(format!("language must be a string, got {language}")))?
        .to_owned();
    for item in items_mut(&mut doc)? {
        for field in ["names", "descriptions"] {
            if let Some(Json::Object(translations)) = item.get_mut(field) {
                let mut single = Map::new();
                if let Some((l, t)) = pick_language(translations, &language) {
                    single.insert(l, t);
                }
                *translations = single;
            }
        }
    }
    Ok(doc)
}

/// Keeps items whose cuisine is in `cuisines` (when non-empty) and whose
/// price tier is at most `maxPriceTier` (when given).
pub fn filter_preferences(
    mut doc: Document,
    args: &BoundArgs,
    snapshot: &ContextSnapshot,
) -> Result<Document, AdaptationError> {
    let prefs = context_input(args, "preferences", snapshot, "user.preferences")?;
    let prefs = prefs
        .as_record()
        .ok_or_else(|| failed("preferences must be a record"))?;
    let cuisines: Vec<String> = match prefs.get("cuisines") {
        None | Some(Json::Null) => Vec::new(),
        Some(Json::Array(list)) => list
            .iter()
            .map(|c| {
                c.as_str()
                    .map(str::to_lowercase)
                    .ok_or_else(|| failed("cuisines must be strings"))
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(failed("cuisines must be a list")),
    };
    let max_tier = match prefs.get("maxPriceTier") {
        None | Some(Json::Null) => None,
        Some(v) => Some(
            v.as_f64()
                .ok_or_else(|| failed("maxPriceTier must be a number"))?,
        ),
    };
    let mut kept = Vec::new();
    for item in std::mem::take(items_mut(&mut doc)?) {
        let cuisine = item["cuisine"]
            .as_str()
            .ok_or_else(|| failed("item without cuisine"))?;
        let tier = item["priceTier"]
            .as_f64()
            .ok_or_else(|| failed("item without priceTier"))?;
        let cuisine_ok = cuisines.is_empty() || cuisines.contains(&cuisine.to_lowercase());
        if cuisine_ok && max_tier.is_none_or(|m| tier <= m) {
            kept.push(item);
        }
    }
    *items_mut(&mut doc)? = kept;
    Ok(doc)
}

/// Minute of day from `"HH:MM"` or a plain number of minutes.
pub fn minute_of_day(value: &TypedValue) -> Option<f64> {
    match value {
        TypedValue::Number(n) if (0.0..1440.0).contains(n) => Some(*n),
        TypedValue::String(s) => {
            let (h, m) = s.split_once(':')?;
            let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
            (h < 24 && m < 60 && s.len() == 5).then(|| f64::from(h * 60 + m))
        }
        _ => None,
    }
}

/// Keeps items open at the current time.
pub fn filter_open(
    mut doc: Document,
    args: &BoundArgs,
    snapshot: &ContextSnapshot,
) -> Result<Document, AdaptationError> {
    let time = context_input(args, "time", snapshot, "environment.time")?;
    let now = minute_of_day(&time).ok_or_else(|| failed(format!("unreadable time {time}")))?;
    let mut kept = Vec::new();
    for item in std::mem::take(items_mut(&mut doc)?) {
        let hours = item["openHours"]
            .as_array()
            .ok_or_else(|| failed("item without openHours"))?;
        let mut open = false;
        for interval in hours {
            let (Some(start), Some(end)) = (interval[0].as_f64(), interval[1].as_f64()) else {
                return Err(failed("malformed openHours interval"));
            };
            open |= start <= now && now < end;
        }
        if open {
            kept.push(item);
        }
    }
    *items_mut(&mut doc)? = kept;
    Ok(doc)
}

fn item_location(item: &Json) -> Result<GeoValue, AdaptationError> {
    let loc = &item["location"];
    let (Some(lat), Some(lon)) = (loc["latitude"].as_f64(), loc["longitude"].as_f64()) else {
        return Err(failed("item without location"));
    };
    GeoValue::new(lat, lon).map_err(|e| failed(e.to_string()))
}

/// Keeps items within `radiusKm` of the user, nearest first, each annotated
/// with `distanceKm` rounded to two decimals.
pub fn filter_by_distance(
    mut doc: Document,
    args: &BoundArgs,
    snapshot: &ContextSnapshot,
) -> Result<Document, AdaptationError> {
    let origin = context_input(args, "origin", snapshot, "user.gps")?;
    let origin = origin
        .as_geo()
        .ok_or_else(|| failed(format!("origin must be a position, got {origin}")))?;
    let radius = args.number_or("radiusKm", DEFAULT_RADIUS_KM)?;
    let mut kept = Vec::new();
    for mut item in std::mem::take(items_mut(&mut doc)?) {
        let d = great_circle_distance_km(origin, item_location(&item)?);
        if d <= radius {
            item["distanceKm"] = Json::from((d * 100.0).round() / 100.0);
            kept.push((d, item));
        }
    }
    kept.sort_by(|a, b| a.0.total_cmp(&b.0));
    *items_mut(&mut doc)? = kept.into_iter().map(|(_, item)| item).collect();
    Ok(doc)
}

/// Drops photos, truncates to `pageSize` items and flags the response.
pub fn optimize_payload(
    mut doc: Document,
    args: &BoundArgs,
    _: &ContextSnapshot,
) -> Result<Document, AdaptationError> {
    let size = args.number_or("pageSize", OPTIMIZED_PAGE_SIZE)?;
    if size < 1.0 || size.fract() != 0.0 {
        return Err(AdaptationError::BadArgument {
            name: "pageSize".into(),
            reason: format!("{size} is not a positive integer"),
        });
    }
    let items = items_mut(&mut doc)?;
    items.truncate(size as usize);
    for item in items.iter_mut() {
        if let Some(obj) = item.as_object_mut() {
            obj.remove("photoRef");
        }
    }
    doc["pageSize"] = Json::from(size as u64);
    doc["optimized"] = Json::Bool(true);
    Ok(doc)
}

/// Registry holding the five scenario behaviors.
pub fn adaptation_registry() -> AdaptationRegistry {
    let mut registry = AdaptationRegistry::new();
    let all = [
        (LOCALIZE, Behavior::after(localize)),
        (FILTER_PREFERENCES, Behavior::after(filter_preferences)),
        (FILTER_OPEN, Behavior::after(filter_open)),
        (FILTER_BY_DISTANCE, Behavior::after(filter_by_distance)),
        (OPTIMIZE_PAYLOAD, Behavior::after(optimize_payload)),
    ];
    for (name, behavior) in all {
        registry
            .register(name, behavior)
            .expect("names are distinct");
    }
    registry
}
