//! The NGSI-lite wire format shared by broker notifications and direct
//! submissions:
//!
//! ```json
//! {"subscriptionId": "...", "data": [{"id": "...", "type": "...",
//!   "attributes": [{"name": "PM10", "type": "Number", "value": 23.4,
//!                   "timestamp": "2016-09-01T00:00:00.000Z",
//!                   "location": {"lat": 51.5072, "lon": -0.1276}}]}]}
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::geo::GeoPoint;
use crate::jobs::{Observation, QueryContext};
use crate::time::{self, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Notification {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subscription_id: Option<String>,
    pub data: Vec<ContextEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntity {
    pub id: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub attributes: Vec<ContextAttribute>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAttribute {
    pub name: String,
    #[serde(rename = "type")]
    pub attr_type: AttributeType,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<GeoPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeType {
    Number,
    Text,
}

/// Outbound subscription request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriptionRequest {
    pub entities: Vec<EntitySelector>,
    pub attributes: Vec<String>,
    pub callback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntitySelector {
    pub id_pattern: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubscriptionReply {
    pub subscription_id: String,
}

impl SubscriptionRequest {
    pub fn for_query(query: &QueryContext, callback: &str) -> Self {
        SubscriptionRequest {
            entities: vec![EntitySelector {
                id_pattern: query.id_pattern.clone(),
                entity_type: query.entity_type.clone(),
            }],
            attributes: vec![query.attribute.clone()],
            callback: callback.to_owned(),
        }
    }
}

fn decode(body: &[u8]) -> Result<Notification, IngestError> {
    let text = std::str::from_utf8(body).map_err(|e| IngestError::MalformedJson(e.to_string()))?;
    serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => IngestError::SchemaViolation(e.to_string()),
        _ => IngestError::MalformedJson(e.to_string()),
    })
}

/// Decodes a notification or direct-submission body into observations,
/// one per attribute per entity, in document order. Non-numeric
/// attributes come back with `value: None`. Attributes without a
/// timestamp are stamped with `received_at`.
pub fn parse_notification(body: &[u8], received_at: Timestamp) -> Result<Vec<Observation>, IngestError> {
    let n = decode(body)?;
    let violation = |m: String| IngestError::SchemaViolation(m);
    let mut out = Vec::new();
    for (ei, e) in n.data.iter().enumerate() {
        if e.id.is_empty() || e.entity_type.is_empty() {
            return Err(violation(format!("data[{ei}]: id and type must be non-empty")));
        }
        let mut names = HashSet::new();
        for a in &e.attributes {
            if a.name.is_empty() {
                return Err(violation(format!("data[{ei}]: attribute name must be non-empty")));
            }
            if !names.insert(a.name.as_str()) {
                return Err(violation(format!("data[{ei}]: duplicate attribute {:?}", a.name)));
            }
            let timestamp = match &a.timestamp {
                Some(s) => time::parse(s).map_err(|err| violation(format!("data[{ei}].{}: {err}", a.name)))?,
                None => received_at,
            };
            if let Some(p) = &a.location {
                if !p.is_valid() {
                    return Err(violation(format!("data[{ei}].{}: location out of range", a.name)));
                }
            }
            let value = match &a.value {
                Value::Number(num) => num.as_f64().filter(|v| v.is_finite()),
                _ => None,
            };
            out.push(Observation {
                entity_id: e.id.clone(),
                entity_type: Some(e.entity_type.clone()),
                attribute: a.name.clone(),
                value,
                timestamp,
                location: a.location,
            });
        }
    }
    Ok(out)
}

/// Canonical encoding of observations: consecutive observations of the
/// same entity share one entity record, timestamps are always explicit.
pub fn to_notification(observations: &[Observation], subscription_id: Option<String>) -> Notification {
    let mut data: Vec<ContextEntity> = Vec::new();
    for o in observations {
        let attr = ContextAttribute {
            name: o.attribute.clone(),
            attr_type: if o.value.is_some() {
                AttributeType::Number
            } else {
                AttributeType::Text
            },
            value: o
                .value
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number),
            timestamp: Some(time::format(&o.timestamp)),
            location: o.location,
        };
        let etype = o.entity_type.clone().unwrap_or_else(|| "Thing".to_owned());
        match data.last_mut() {
            Some(last)
                if last.id == o.entity_id
                    && last.entity_type == etype
                    && last.attributes.iter().all(|x| x.name != attr.name) =>
            {
                last.attributes.push(attr)
            }
            _ => data.push(ContextEntity {
                id: o.entity_id.clone(),
                entity_type: etype,
                attributes: vec![attr],
            }),
        }
    }
    Notification { subscription_id, data }
}
