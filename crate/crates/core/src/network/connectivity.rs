//! Reachability over a route set, ignoring times: two nodes are connected
//! when both lie on routes and their routes touch (directly or through
//! shared nodes of intermediate routes).

use crate::citygraph::CityGraph;

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect() }
    }

    pub fn find(&mut self, mut u: usize) -> usize {
        while self.parent[u] as usize != u {
            let grand = self.parent[self.parent[u] as usize];
            self.parent[u] = grand;
            u = grand as usize;
        }
        u
    }

    pub fn union(&mut self, u: usize, v: usize) {
        let (ru, rv) = (self.find(u), self.find(v));
        if ru != rv {
            self.parent[ru.max(rv)] = ru.min(rv) as u32;
        }
    }
}

/// Which nodes a route set covers and how they clump together.
#[derive(Debug, Clone)]
pub struct TransitConnectivity {
    pub uf: UnionFind,
    pub covered: Vec<bool>,
}

impl TransitConnectivity {
    pub fn build<'a>(n: usize, routes: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut uf = UnionFind::new(n);
        let mut covered = vec![false; n];
        for stops in routes {
            for w in stops.windows(2) {
                uf.union(w[0], w[1]);
            }
            for &s in stops {
                covered[s] = true;
            }
        }
        TransitConnectivity { uf, covered }
    }

    /// Adds one more route (or an in-progress stop sequence).
    pub fn add_route(&mut self, stops: &[usize]) {
        for w in stops.windows(2) {
            self.uf.union(w[0], w[1]);
        }
        for &s in stops {
            self.covered[s] = true;
        }
    }

    pub fn connected(&mut self, i: usize, j: usize) -> bool {
        self.covered[i] && self.covered[j] && self.uf.find(i) == self.uf.find(j)
    }

    /// Ordered demand-positive pairs the route set fails to connect.
    pub fn count_unconnected(&mut self, city: &CityGraph) -> usize {
        let n = city.n();
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                if city.demand_at(i, j) > 0.0 && !self.connected(i, j) {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn any_unconnected(&mut self, city: &CityGraph) -> bool {
        let n = city.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if city.demand_at(i, j) > 0.0 && !self.connected(i, j) {
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citygraph::ProblemParams;
    use ndarray::Array2;

    fn line_city(n: usize) -> CityGraph {
        let coords = (0..n).map(|i| [i as f64, 0.0]).collect();
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 60.0)).collect();
        let mut demand = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    demand[[i, j]] = 10.0;
                }
            }
        }
        CityGraph::new(coords, &edges, demand, ProblemParams::new(2, 2, 6)).unwrap()
    }

    #[test]
    fn separate_routes_do_not_connect_until_they_touch() {
        let city = line_city(6);
        let r1 = vec![0usize, 1];
        let r2 = vec![3usize, 4];
        let mut c = TransitConnectivity::build(6, [r1.as_slice(), r2.as_slice()].into_iter());
        assert!(c.connected(0, 1));
        assert!(!c.connected(1, 3));
        assert!(!c.connected(0, 5));
        // 30 ordered demand pairs, of which 0-1 and 3-4 are connected.
        assert_eq!(c.count_unconnected(&city), 30 - 4);

        let bridge = vec![1usize, 2, 3];
        c.add_route(&bridge);
        assert!(c.connected(0, 4));
        assert!(!c.connected(0, 5)); // node 5 still uncovered
        assert!(c.any_unconnected(&city));
    }
}
