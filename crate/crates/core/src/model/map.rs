use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{polygon_is_simple, DrivableArea, Polygon, Polyline, Vec2};

const JOIN_TOLERANCE: f64 = 1e-6;

/// On-disk map schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub lanelets: Vec<LaneletDoc>,
    #[serde(default)]
    pub reference_paths: Vec<ReferencePathDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneletDoc {
    pub id: String,
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
    pub center: Vec<[f64; 2]>,
    #[serde(default)]
    pub successors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePathDoc {
    pub name: String,
    pub lanelets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lanelet {
    pub id: String,
    pub left: Vec<Vec2>,
    pub right: Vec<Vec2>,
    pub center: Vec<Vec2>,
    pub successors: Vec<String>,
    polygon: Polygon,
}

impl Lanelet {
    /// Left boundary followed by the reversed right boundary.
    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }
}

/// A named chain of lanelet centerlines.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    pub name: String,
    pub lanelets: Vec<String>,
    pub polyline: Polyline,
}

/// Validated lane map. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct MapModel {
    lanelets: Vec<Lanelet>,
    drivable_area: DrivableArea,
    reference_paths: Vec<ReferencePath>,
}

fn to_points(raw: &[[f64; 2]]) -> Vec<Vec2> {
    raw.iter().copied().map(Vec2::from).collect()
}

fn to_raw(points: &[Vec2]) -> Vec<[f64; 2]> {
    points.iter().map(|&p| p.into()).collect()
}

impl MapModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MapDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    /// The figure-eight test map that ships with the crate.
    pub fn bundled_loop_intersection() -> Self {
        Self::from_json(include_str!("../../maps/loop_intersection.json"))
            .expect("bundled map is valid")
    }

    pub fn from_document(doc: MapDocument) -> Result<Self> {
        let invalid = |msg: String| Err(Error::MapValidation(msg));
        let mut seen = HashSet::new();
        let mut lanelets = Vec::with_capacity(doc.lanelets.len());
        for l in &doc.lanelets {
            if !seen.insert(l.id.as_str()) {
                return invalid(format!("duplicate lanelet id {:?}", l.id));
            }
            for (name, line) in [
                ("left", &l.left),
                ("right", &l.right),
                ("center", &l.center),
            ] {
                if line.len() < 2 {
                    return invalid(format!(
                        "lanelet {:?}: {name} boundary needs >= 2 points",
                        l.id
                    ));
                }
            }
            let left = to_points(&l.left);
            let right = to_points(&l.right);
            let center = to_points(&l.center);
            let ring: Vec<Vec2> = left.iter().chain(right.iter().rev()).copied().collect();
            if !polygon_is_simple(&ring) {
                return invalid(format!("lanelet {:?}: lane polygon self-intersects", l.id));
            }
            let polygon = Polygon::new(ring);
            if let Some(p) = centerline_escape(&center, &polygon) {
                return invalid(format!(
                    "lanelet {:?}: centerline leaves the lane polygon near ({:.3}, {:.3})",
                    l.id, p.x, p.y
                ));
            }
            lanelets.push(Lanelet {
                id: l.id.clone(),
                left,
                right,
                center,
                successors: l.successors.clone(),
                polygon,
            });
        }
        for l in &lanelets {
            if let Some(s) = l.successors.iter().find(|s| !seen.contains(s.as_str())) {
                return invalid(format!("lanelet {:?}: unknown successor {s:?}", l.id));
            }
        }

        let by_id: HashMap<&str, &Lanelet> = lanelets.iter().map(|l| (l.id.as_str(), l)).collect();
        let mut reference_paths = Vec::with_capacity(doc.reference_paths.len());
        for rp in &doc.reference_paths {
            reference_paths.push(build_reference_path(rp, &by_id)?);
        }
        let mut names = HashSet::new();
        for rp in &reference_paths {
            if !names.insert(rp.name.as_str()) {
                return invalid(format!("duplicate reference path {:?}", rp.name));
            }
        }

        let drivable_area = DrivableArea::new(lanelets.iter().map(|l| l.polygon.clone()).collect());
        Ok(MapModel {
            lanelets,
            drivable_area,
            reference_paths,
        })
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            lanelets: self
                .lanelets
                .iter()
                .map(|l| LaneletDoc {
                    id: l.id.clone(),
                    left: to_raw(&l.left),
                    right: to_raw(&l.right),
                    center: to_raw(&l.center),
                    successors: l.successors.clone(),
                })
                .collect(),
            reference_paths: self
                .reference_paths
                .iter()
                .map(|rp| ReferencePathDoc {
                    name: rp.name.clone(),
                    lanelets: rp.lanelets.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("map document serializes")
    }

    /// Hex SHA-256 of the compact JSON serialization.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn lanelets(&self) -> &[Lanelet] {
        &self.lanelets
    }

    pub fn drivable_area(&self) -> &DrivableArea {
        &self.drivable_area
    }

    pub fn reference_paths(&self) -> &[ReferencePath] {
        &self.reference_paths
    }

    pub fn reference_path(&self, name: &str) -> Option<&ReferencePath> {
        self.reference_paths.iter().find(|rp| rp.name == name)
    }
}

/// Returns a centerline sample outside the polygon, if any.
fn centerline_escape(center: &[Vec2], polygon: &Polygon) -> Option<Vec2> {
    const SUBDIVISIONS: usize = 8;
    for w in center.windows(2) {
        for k in 0..=SUBDIVISIONS {
            let p = w[0].lerp(w[1], k as f64 / SUBDIVISIONS as f64);
            if !polygon.contains(p) && polygon.boundary_distance(p) > 1e-9 {
                return Some(p);
            }
        }
    }
    None
}

fn build_reference_path(
    doc: &ReferencePathDoc,
    by_id: &HashMap<&str, &Lanelet>,
) -> Result<ReferencePath> {
    let invalid = |msg: String| {
        Err(Error::MapValidation(format!(
            "reference path {:?}: {msg}",
            doc.name
        )))
    };
    if doc.lanelets.is_empty() {
        return invalid("no lanelets".into());
    }
    let mut chain = Vec::with_capacity(doc.lanelets.len());
    for id in &doc.lanelets {
        match by_id.get(id.as_str()) {
            Some(l) => chain.push(*l),
            None => return invalid(format!("unknown lanelet {id:?}")),
        }
    }
    let mut points: Vec<Vec2> = Vec::new();
    for (k, lanelet) in chain.iter().enumerate() {
        if k > 0 {
            let prev = chain[k - 1];
            if !prev.successors.contains(&lanelet.id) {
                return invalid(format!(
                    "{:?} is not a successor of {:?}",
                    lanelet.id, prev.id
                ));
            }
            let gap = prev.center.last().unwrap().distance(lanelet.center[0]);
            if gap > JOIN_TOLERANCE {
                return invalid(format!(
                    "{:?} -> {:?} centerlines are {gap:.3e} m apart",
                    prev.id, lanelet.id
                ));
            }
        }
        for &p in &lanelet.center {
            if points
                .last()
                .is_none_or(|last| last.distance(p) > JOIN_TOLERANCE)
            {
                points.push(p);
            }
        }
    }
    let first = chain[0];
    let last = chain[chain.len() - 1];
    let closed = last.successors.contains(&first.id)
        && last.center.last().unwrap().distance(first.center[0]) <= JOIN_TOLERANCE;
    let polyline = if closed {
        if points.len() > 2 && points.last().unwrap().distance(points[0]) <= JOIN_TOLERANCE {
            points.pop();
        }
        Polyline::closed(points)
    } else {
        Polyline::new(points)
    }
    .map_err(|e| Error::MapValidation(format!("reference path {:?}: {e}", doc.name)))?;
    Ok(ReferencePath {
        name: doc.name.clone(),
        lanelets: doc.lanelets.clone(),
        polyline,
    })
}
