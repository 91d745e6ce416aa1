//! JSON topology documents and the coordinates sidecar CSV.

use serde::{Deserialize, Serialize};

use super::{BranchRecord, BranchStatus, BusRecord, BusType, GridCase};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct NativeBus {
    id: u32,
    #[serde(rename = "type")]
    bus_type: BusType,
    p_load: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NativeBranch {
    from: u32,
    to: u32,
    reactance: f64,
    status: BranchStatus,
}

#[derive(Debug, Serialize, Deserialize)]
struct NativeCase {
    #[serde(default = "unit_base")]
    base_mva: f64,
    buses: Vec<NativeBus>,
    branches: Vec<NativeBranch>,
}

fn unit_base() -> f64 {
    1.0
}

/// Reads `{base_mva?, buses: [{id, type, p_load, x?, y?}], branches: [{from, to, reactance, status}]}`.
/// Loads are already per-unit; `base_mva` is informational and defaults to 1.
pub fn read_native_case(json: &str) -> Result<GridCase> {
    let doc: NativeCase = serde_json::from_str(json)?;
    let buses = doc
        .buses
        .into_iter()
        .map(|b| {
            let coords = match (b.x, b.y) {
                (Some(x), Some(y)) => Some((x, y)),
                (None, None) => None,
                _ => {
                    return Err(Error::Validation(format!(
                        "bus {} has only one of x/y",
                        b.id
                    )))
                }
            };
            Ok(BusRecord {
                id: b.id,
                bus_type: b.bus_type,
                p_load: b.p_load,
                coords,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let branches = doc
        .branches
        .into_iter()
        .map(|b| BranchRecord {
            from_bus: b.from,
            to_bus: b.to,
            reactance: b.reactance,
            status: b.status,
        })
        .collect();
    GridCase::new(doc.base_mva, buses, branches)
}

pub fn write_native_case(case: &GridCase) -> Result<String> {
    let doc = NativeCase {
        base_mva: case.base_mva,
        buses: case
            .buses
            .iter()
            .map(|b| NativeBus {
                id: b.id,
                bus_type: b.bus_type,
                p_load: b.p_load,
                x: b.coords.map(|c| c.0),
                y: b.coords.map(|c| c.1),
            })
            .collect(),
        branches: case
            .branches
            .iter()
            .map(|b| NativeBranch {
                from: b.from_bus,
                to: b.to_bus,
                reactance: b.reactance,
                status: b.status,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[derive(Debug, Deserialize)]
struct CoordRow {
    bus_id: u32,
    x: f64,
    y: f64,
}

/// Parses a `bus_id,x,y` CSV with a header row.
pub fn parse_coordinates_csv(text: &str) -> Result<Vec<(u32, f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["bus_id", "x", "y"] {
        return Err(Error::parse(1, format!("expected header `bus_id,x,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: CoordRow = row?;
        out.push((row.bus_id, row.x, row.y));
    }
    Ok(out)
}

/// Attaches sidecar coordinates to the matching buses.
pub fn apply_coordinates(case: &mut GridCase, coords: &[(u32, f64, f64)]) -> Result<()> {
    let index = case.bus_index();
    for &(id, x, y) in coords {
        let &i = index
            .get(&id)
            .ok_or_else(|| Error::Validation(format!("coordinates given for unknown bus {id}")))?;
        case.buses[i].coords = Some((x, y));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "buses": [
            {"id": 1, "type": "slack", "p_load": 0.0, "x": 0.0, "y": 0.0},
            {"id": 2, "type": "pq", "p_load": 0.5, "x": 3.0, "y": 4.0}
        ],
        "branches": [
            {"from": 1, "to": 2, "reactance": 0.1, "status": "in_service"},
            {"from": 2, "to": 1, "reactance": 0.3, "status": "out"}
        ]
    }"#;

    #[test]
    fn reads_native_document() {
        let case = read_native_case(DOC).unwrap();
        assert_eq!(case.buses[1].coords, Some((3.0, 4.0)));
        assert_eq!(case.branches[1].status, BranchStatus::Out);
        let again = read_native_case(&write_native_case(&case).unwrap()).unwrap();
        assert_eq!(again, case);
    }

    #[test]
    fn coordinates_sidecar() {
        let mut case = read_native_case(DOC).unwrap();
        let coords = parse_coordinates_csv("bus_id,x,y\n1, 10, 20\n2,30,40\n").unwrap();
        apply_coordinates(&mut case, &coords).unwrap();
        assert_eq!(case.buses[0].coords, Some((10.0, 20.0)));
        assert!(parse_coordinates_csv("id,x,y\n1,0,0\n").is_err());
        assert!(apply_coordinates(&mut case, &[(7, 0.0, 0.0)]).is_err());
    }
}
