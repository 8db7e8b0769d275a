//! Loading and saving cities.
//!
//! Two input formats are supported: the plain-text benchmark format (one
//! whitespace-separated square matrix per file, `Inf` for a missing street
//! edge) and a JSON schema carrying coordinates, an explicit edge list, and
//! the demand matrix.

use super::{enforce_symmetry, CityGraph, ProblemParams};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Unit of the drive times in a text matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    Minutes,
}

impl TimeUnit {
    pub fn to_seconds(self, value: f64) -> f64 {
        match self {
            TimeUnit::Seconds => value,
            TimeUnit::Minutes => value * 60.0,
        }
    }
}

/// Parses a whitespace-separated square matrix. `Inf` (any case) marks a
/// missing entry; anything non-numeric is a format error.
pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split_whitespace()
                .map(|tok| {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| Error::Format(format!("bad matrix entry {tok:?}")))?;
                    if v.is_nan() {
                        return Err(Error::Format(format!("bad matrix entry {tok:?}")));
                    }
                    Ok(v)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Format("empty matrix file".into()));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Format(format!(
            "non-square matrix: {n} rows but row lengths {:?}",
            rows.iter().map(|r| r.len()).collect::<Vec<_>>()
        )));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

/// Loads a city from benchmark-style matrix files.
///
/// Drive times are symmetrized with [`enforce_symmetry`] (the larger
/// direction wins); every finite positive off-diagonal entry becomes a
/// street edge. The demand matrix must already be symmetric with a zero
/// diagonal. No coordinate data is read; coordinates are set to the origin
/// since nothing in the cost model depends on them.
pub fn load_city<P: AsRef<Path>, Q: AsRef<Path>>(
    times_path: P,
    demand_path: Q,
    params: ProblemParams,
    unit: TimeUnit,
) -> Result<CityGraph> {
    let times_text = fs::read_to_string(&times_path)?;
    let demand_text = fs::read_to_string(&demand_path)?;
    let times = parse_matrix(&times_text)?;
    let demand = parse_matrix(&demand_text)?;
    let n = times.nrows();
    if demand.nrows() != n {
        return Err(Error::Validation(format!(
            "drive-time matrix is {n}x{n} but demand matrix is {}x{}",
            demand.nrows(),
            demand.ncols()
        )));
    }
    let times = enforce_symmetry(&times);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let t = times[[i, j]];
            if t.is_finite() {
                if t <= 0.0 {
                    return Err(Error::Validation(format!("street edge ({i}, {j}) has drive time {t}")));
                }
                edges.push((i, j, unit.to_seconds(t)));
            }
        }
    }
    CityGraph::new(vec![[0.0, 0.0]; n], &edges, demand, params)
}

#[derive(Serialize, Deserialize)]
struct CityJson {
    n: usize,
    coords: Vec<[f64; 2]>,
    /// Undirected street edges `(i, j, drive_time_seconds)`, each listed once.
    edges: Vec<(usize, usize, f64)>,
    demand: Vec<Vec<f64>>,
}

/// Serializes a city to the JSON schema (drive times in seconds).
pub fn city_to_json(city: &CityGraph) -> serde_json::Value {
    let n = city.n();
    let doc = CityJson {
        n,
        coords: city.coords().to_vec(),
        edges: city.edges().collect(),
        demand: (0..n).map(|i| (0..n).map(|j| city.demand_at(i, j)).collect()).collect(),
    };
    serde_json::to_value(doc).expect("city serialization cannot fail")
}

pub fn save_city<P: AsRef<Path>>(city: &CityGraph, path: P) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&city_to_json(city))?)?;
    Ok(())
}

/// Loads a city from the JSON schema. Parameters are not part of the file;
/// they come from presets or flags.
pub fn load_city_json<P: AsRef<Path>>(path: P, params: ProblemParams) -> Result<CityGraph> {
    let doc: CityJson = serde_json::from_str(&fs::read_to_string(path)?)?;
    if doc.coords.len() != doc.n {
        return Err(Error::Validation(format!(
            "city file declares n={} but has {} coordinates",
            doc.n,
            doc.coords.len()
        )));
    }
    if doc.demand.len() != doc.n || doc.demand.iter().any(|r| r.len() != doc.n) {
        return Err(Error::Validation("demand matrix shape does not match n".into()));
    }
    let demand = Array2::from_shape_fn((doc.n, doc.n), |(i, j)| doc.demand[i][j]);
    CityGraph::new(doc.coords, &doc.edges, demand, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_small_matrix_with_inf() {
        let m = parse_matrix("0 5 Inf\n5 0 2\nInf 2 0\n").unwrap();
        assert_eq!(m[[0, 1]], 5.0);
        assert!(m[[0, 2]].is_infinite());
    }

    #[test]
    fn rejects_non_square_matrices() {
        let err = parse_matrix("0 5\n5 0 1\n").unwrap_err();
        assert!(err.to_string().contains("non-square"), "{err}");
        let err = parse_matrix("0 5 1\n5 0 1\n").unwrap_err();
        assert!(err.to_string().contains("non-square"), "{err}");
    }

    #[test]
    fn rejects_garbage_tokens() {
        let err = parse_matrix("0 x\nx 0\n").unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn loads_a_two_node_city_from_text() {
        let dir = std::env::temp_dir().join(format!("tndp_io_test_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let tp = dir.join("times.txt");
        let dp = dir.join("demand.txt");
        fs::write(&tp, "0 7\n7 0\n").unwrap();
        fs::write(&dp, "0 12\n12 0\n").unwrap();
        let city = load_city(&tp, &dp, ProblemParams::new(1, 2, 2), TimeUnit::Minutes).unwrap();
        assert_eq!(city.n(), 2);
        assert_eq!(city.edge_time(0, 1), Some(7.0 * 60.0));
        assert_eq!(city.demand_at(1, 0), 12.0);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn city_json_round_trips() {
        use crate::citygraph::synth::{generate_city, GrowthProcess, SyntheticCityConfig};
        let cfg = SyntheticCityConfig {
            n: 9,
            process: GrowthProcess::FourGrid,
            rho: 0.0,
            ..SyntheticCityConfig::default()
        };
        let params = ProblemParams::new(2, 2, 5);
        let mut rng = crate::rng::seed_rng(5);
        let city = generate_city(&cfg, params, &mut rng).unwrap();
        let dir = std::env::temp_dir().join(format!("tndp_io_rt_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("city.json");
        save_city(&city, &path).unwrap();
        let back = load_city_json(&path, params).unwrap();
        assert_eq!(back.n(), city.n());
        assert_eq!(back.num_edges(), city.num_edges());
        assert_eq!(back.demand(), city.demand());
        for (a, b) in back.edges().zip(city.edges()) {
            assert_eq!(a, b);
        }
        fs::remove_dir_all(&dir).ok();
    }
}
