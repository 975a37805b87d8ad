use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::context::GeoValue;
use crate::Document;

pub const DEFAULT_PAGE_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub latitude: f64,
    pub longitude: f64,
}

impl Location {
    pub fn geo(&self) -> Result<GeoValue, crate::context::GeoError> {
        GeoValue::new(self.latitude, self.longitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Restaurant {
    pub id: String,
    pub names: BTreeMap<String, String>,
    #[serde(default)]
    pub descriptions: BTreeMap<String, String>,
    pub cuisine: String,
    pub price_tier: u8,
    pub location: Location,
    /// Minute-of-day intervals, end exclusive. A span over midnight is two
    /// intervals.
    pub open_hours: Vec<(u16, u16)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("malformed restaurant data: {0}")]
    Parse(String),
    #[error("restaurant `{id}`: {reason}")]
    Invalid { id: String, reason: String },
}

impl Restaurant {
    pub fn validate(&self) -> Result<(), DataError> {
        let invalid = |reason: String| DataError::Invalid {
            id: self.id.clone(),
            reason,
        };
        if self.names.is_empty() {
            return Err(invalid("names needs at least one language".into()));
        }
        if !(1..=4).contains(&self.price_tier) {
            return Err(invalid(format!(
                "priceTier {} outside 1..=4",
                self.price_tier
            )));
        }
        self.location.geo().map_err(|e| invalid(e.to_string()))?;
        for &(start, end) in &self.open_hours {
            if start >= end || end > 1440 {
                return Err(invalid(format!("bad opening interval [{start}, {end}]")));
            }
        }
        Ok(())
    }

    fn matches_keyword(&self, keyword: &str) -> bool {
        let keyword = keyword.to_lowercase();
        self.cuisine.to_lowercase().contains(&keyword)
            || self
                .names
                .values()
                .any(|n| n.to_lowercase().contains(&keyword))
    }
}

pub fn load_restaurants(bytes: &[u8]) -> Result<Vec<Restaurant>, DataError> {
    let list: Vec<Restaurant> =
        serde_json::from_slice(bytes).map_err(|e| DataError::Parse(e.to_string()))?;
    for r in &list {
        r.validate()?;
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuisine_keyword: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_price: Option<u8>,
    #[serde(default = "first_page")]
    pub page: usize,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
}

fn first_page() -> usize {
    1
}

fn default_page_size() -> usize {
    DEFAULT_PAGE_SIZE
}

impl Default for SearchRequest {
    fn default() -> Self {
        Self {
            cuisine_keyword: None,
            max_price: None,
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl SearchRequest {
    pub fn from_document(doc: &Document) -> Result<Self, String> {
        let req: SearchRequest =
            serde_json::from_value(doc.clone()).map_err(|e| format!("bad search request: {e}"))?;
        if req.page == 0 || req.page_size == 0 {
            return Err("page and pageSize must be at least 1".into());
        }
        Ok(req)
    }
}

/// The unadapted search: keyword and price filters in dataset order, then
/// one page. Items carry every translation and the photo reference.
pub fn search_restaurants(dataset: &[Restaurant], request: &SearchRequest) -> Document {
    let matching: Vec<&Restaurant> = dataset
        .iter()
        .filter(|r| {
            request
                .cuisine_keyword
                .as_deref()
                .is_none_or(|k| r.matches_keyword(k))
        })
        .filter(|r| request.max_price.is_none_or(|p| r.price_tier <= p))
        .collect();
    let items: Vec<Document> = matching
        .iter()
        .skip((request.page - 1).saturating_mul(request.page_size))
        .take(request.page_size)
        .map(|r| serde_json::to_value(r).expect("restaurant serializes"))
        .collect();
    json!({
        "items": items,
        "totalCount": matching.len(),
        "page": request.page,
        "pageSize": request.page_size,
    })
}
