use serde::{Deserialize, Deserializer};

/// Parses `"31deg"`, `"0.5 deg"`, `"0.54rad"` or a bare number (radians).
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (number, to_rad) = if let Some(n) = t.strip_suffix("deg") {
        (n, std::f64::consts::PI / 180.0)
    } else if let Some(n) = t.strip_suffix("rad") {
        (n, 1.0)
    } else {
        (t, 1.0)
    };
    number
        .trim()
        .parse::<f64>()
        .map(|v| v * to_rad)
        .map_err(|_| format!("invalid angle {text:?}"))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleRepr {
    Radians(f64),
    Text(String),
}

/// Serde hook for angle fields: numbers are radians, strings carry a unit suffix.
pub fn deserialize_angle<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match AngleRepr::deserialize(d)? {
        AngleRepr::Radians(v) => Ok(v),
        AngleRepr::Text(s) => parse_angle(&s).map_err(serde::de::Error::custom),
    }
}
