//! Connectivity steering for route construction: while some demand is still
//! unconnected, prefer actions that connect more of it.

use std::collections::HashMap;

use crate::citygraph::CityGraph;
use crate::network::TransitConnectivity;

/// Snapshot of which transit components exist right now, able to answer
/// whether a candidate path would newly connect any demand.
#[derive(Debug, Clone)]
pub struct ConnectivityFilter {
    /// Compact component id per node, `None` when no route covers it.
    node_group: Vec<Option<u32>>,
    /// Covered nodes per component.
    members: Vec<Vec<usize>>,
    unconnected_exists: bool,
}

impl ConnectivityFilter {
    pub fn build<'a>(city: &CityGraph, routes: impl Iterator<Item = &'a [usize]>) -> Self {
        let n = city.n();
        let mut conn = TransitConnectivity::build(n, routes);
        let mut node_group = vec![None; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut group_of_root: HashMap<usize, u32> = HashMap::new();
        for v in 0..n {
            if conn.covered[v] {
                let root = conn.uf.find(v);
                let id = *group_of_root.entry(root).or_insert_with(|| {
                    members.push(Vec::new());
                    (members.len() - 1) as u32
                });
                node_group[v] = Some(id);
                members[id as usize].push(v);
            }
        }
        let mut unconnected_exists = false;
        'scan: for i in 0..n {
            for j in (i + 1)..n {
                if city.demand_at(i, j) > 0.0 {
                    let same = match (node_group[i], node_group[j]) {
                        (Some(a), Some(b)) => a == b,
                        _ => false,
                    };
                    if !same {
                        unconnected_exists = true;
                        break 'scan;
                    }
                }
            }
        }
        ConnectivityFilter { node_group, members, unconnected_exists }
    }

    pub fn unconnected_demand_exists(&self) -> bool {
        self.unconnected_exists
    }

    /// Whether laying `path` (and, when extending an existing route, fusing
    /// with `anchor`'s component) would connect demand that currently has no
    /// transit path. Everything the path touches merges into one component,
    /// so the answer is: does any demand run between two of the merged
    /// pieces?
    pub fn reduces(
        &self,
        city: &CityGraph,
        path: impl Iterator<Item = usize>,
        anchor: Option<usize>,
    ) -> bool {
        let mut groups: Vec<u32> = Vec::new();
        let mut singles: Vec<usize> = Vec::new();
        for v in anchor.into_iter().chain(path) {
            match self.node_group[v] {
                Some(g) => {
                    if !groups.contains(&g) {
                        groups.push(g);
                    }
                }
                None => singles.push(v),
            }
        }
        let units: Vec<&[usize]> = groups
            .iter()
            .map(|&g| self.members[g as usize].as_slice())
            .chain(singles.iter().map(std::slice::from_ref))
            .collect();
        for (k, a) in units.iter().enumerate() {
            for b in &units[k + 1..] {
                for &x in *a {
                    for &y in *b {
                        if city.demand_at(x, y) > 0.0 {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}
