use std::collections::HashMap;

use crate::geo::{haversine_km, EARTH_RADIUS_KM};
use crate::ingest::AntennaRegistry;
use crate::types::AntennaId;

/// A cluster is named after its smallest member antenna.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId(pub AntennaId);

/// Single-linkage grouping of antennas at a distance threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct AntennaClustering {
    pub threshold_km: f64,
    clusters: HashMap<AntennaId, ClusterId>,
}

impl AntennaClustering {
    pub fn cluster_of(&self, antenna: AntennaId) -> Option<ClusterId> {
        self.clusters.get(&antenna).copied()
    }

    /// Unknown antennas only match themselves.
    pub fn same_cluster(&self, a: AntennaId, b: AntennaId) -> bool {
        a == b || matches!((self.cluster_of(a), self.cluster_of(b)), (Some(x), Some(y)) if x == y)
    }

    pub fn cluster_count(&self) -> usize {
        let mut ids: Vec<ClusterId> = self.clusters.values().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    // Roots are kept at the smaller index so a root is its set's minimum.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Joins every pair of antennas at most `threshold_km` apart and takes the
/// transitive closure. A threshold of 0 leaves every antenna on its own.
pub fn cluster_antennas(registry: &AntennaRegistry, threshold_km: f64) -> AntennaClustering {
    let antennas: Vec<_> = registry.iter().copied().collect();
    let mut sets = DisjointSet::new(antennas.len());
    if threshold_km > 0.0 {
        // Sweep in latitude order; a latitude gap alone already bounds the distance from below.
        let max_dlat = (threshold_km / EARTH_RADIUS_KM).to_degrees() * (1.0 + 1e-9);
        let mut order: Vec<usize> = (0..antennas.len()).collect();
        order.sort_by(|&a, &b| antennas[a].location.lat.total_cmp(&antennas[b].location.lat));
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                if antennas[j].location.lat - antennas[i].location.lat > max_dlat {
                    break;
                }
                if haversine_km(antennas[i].location, antennas[j].location) <= threshold_km {
                    sets.union(i, j);
                }
            }
        }
    }
    // Registry iteration is id-ascending, so the root index holds the smallest id.
    let clusters = (0..antennas.len())
        .map(|i| (antennas[i].id, ClusterId(antennas[sets.find(i)].id)))
        .collect();
    AntennaClustering {
        threshold_km,
        clusters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::offset_north;
    use crate::types::{Antenna, GeoPoint};

    fn registry(points: &[(u32, GeoPoint)]) -> AntennaRegistry {
        AntennaRegistry::new(points.iter().map(|&(id, location)| Antenna { id: AntennaId(id), location })).unwrap()
    }

    #[test]
    fn zero_threshold_is_identity() {
        let o = GeoPoint { lat: -34.6, lon: -58.4 };
        let reg = registry(&[(1, o), (2, o), (3, offset_north(o, 0.1))]);
        let c = cluster_antennas(&reg, 0.0);
        assert_eq!(c.cluster_count(), 3);
        for a in reg.iter() {
            assert_eq!(c.cluster_of(a.id), Some(ClusterId(a.id)));
        }
    }

    #[test]
    fn near_pair_joins_and_chain_is_transitive() {
        let o = GeoPoint { lat: -34.6, lon: -58.4 };
        let reg = registry(&[(4, o), (2, offset_north(o, 0.5)), (9, offset_north(o, 1.3)), (1, offset_north(o, 5.0))]);
        let c = cluster_antennas(&reg, 1.0);
        assert_eq!(c.cluster_of(AntennaId(4)), Some(ClusterId(AntennaId(2))));
        assert_eq!(c.cluster_of(AntennaId(9)), Some(ClusterId(AntennaId(2))));
        assert_eq!(c.cluster_of(AntennaId(1)), Some(ClusterId(AntennaId(1))));
        assert!(c.same_cluster(AntennaId(4), AntennaId(9)));
        assert!(!c.same_cluster(AntennaId(4), AntennaId(1)));
        assert_eq!(c.cluster_count(), 2);
        assert_eq!(c.len(), 4);
    }
}
