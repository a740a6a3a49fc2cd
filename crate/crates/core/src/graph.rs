//! Graph topology, combinatorial Laplacian and graph Fourier transform.
//!
//! Graphs are undirected and unweighted. The Laplacian `L = D - A` is formed
//! densely (the target scale is a few hundred nodes) and diagonalised once;
//! the resulting [`LaplacianSpectrum`] provides the forward and inverse GFT.

use std::collections::{BTreeSet, VecDeque};
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres.
const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Maximum tolerated asymmetry of a matrix handed to [`eigendecompose`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues below this are counted as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

/// Distance used when selecting nearest neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Great-circle distance on a spherical Earth.
    #[default]
    Haversine,
    /// Plain Euclidean distance on (lat, lon) degrees.
    EuclideanDegrees,
}

impl DistanceMetric {
    pub fn distance(self, a: (f64, f64), b: (f64, f64)) -> f64 {
        match self {
            DistanceMetric::Haversine => haversine_km(a, b),
            DistanceMetric::EuclideanDegrees => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
        }
    }
}

/// Great-circle distance in kilometres between two (lat, lon) pairs in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Undirected, unweighted graph. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    n_nodes: usize,
    edges: BTreeSet<(usize, usize)>,
    coords: Option<Vec<(f64, f64)>>,
}

impl GraphTopology {
    /// Builds a topology from an edge list. Pairs are normalised to `i < j`
    /// and duplicates collapse; self-loops and out-of-range indices are errors.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::TooFewNodes { needed: 1, got: 0 });
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
            }
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self {
            n_nodes,
            edges: set,
            coords: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.len() != self.n_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes,
                found: coords.len(),
            });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Number of connected components (breadth-first search).
    pub fn connected_components(&self) -> usize {
        let adj = self.adjacency_lists();
        let mut seen = vec![false; self.n_nodes];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }
}

/// Connects every node to its `k` nearest neighbours and symmetrises the
/// result: an edge exists if either endpoint selected the other. Distance
/// ties are broken by lower node index.
pub fn build_knn_graph(coords: &[(f64, f64)], k: usize, metric: DistanceMetric) -> Result<GraphTopology> {
    let n = coords.len();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n < k + 1 {
        return Err(Error::TooFewNodes { needed: k + 1, got: n });
    }
    if let Some(i) = coords.iter().position(|c| !c.0.is_finite() || !c.1.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite coordinate at node {i}")));
    }

    let mut edges = Vec::with_capacity(n * k);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for (i, &ci) in coords.iter().enumerate() {
        candidates.clear();
        candidates.extend(
            coords
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &cj)| (metric.distance(ci, cj), j)),
        );
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(candidates.iter().take(k).map(|&(_, j)| (i, j)));
    }

    let graph = GraphTopology::new(n, edges)?.with_coords(coords.to_vec())?;
    let components = graph.connected_components();
    if components > 1 {
        log::warn!("{k}-NN graph over {n} nodes has {components} connected components");
    }
    Ok(graph)
}

/// Combinatorial Laplacian `L = D - A`.
pub fn laplacian(topology: &GraphTopology) -> DMatrix<f64> {
    let n = topology.n_nodes();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j) in topology.edges() {
        l[(i, j)] = -1.0;
        l[(j, i)] = -1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    }
    l
}

/// Vertex-domain signal, one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal(pub DVector<f64>);

impl GraphSignal {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(DVector::from_vec(values))
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for GraphSignal {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for GraphSignal {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

impl From<DVector<f64>> for GraphSignal {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

/// Which frequencies a [`SpectralSignal`] is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralDomain {
    /// All `n` Laplacian frequencies.
    Full,
    /// The `|F|` frequencies of a band, in band order.
    Band,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignal {
    pub coefficients: DVector<f64>,
    pub domain: SpectralDomain,
}

/// Orthonormal eigenbasis of a Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct LaplacianSpectrum {
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl LaplacianSpectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U`, columns are eigenvectors.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn zero_eigenvalue_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v.abs() < ZERO_EIGENVALUE_TOL).count()
    }

    /// `U_F`: the columns of `U` listed in `indices`.
    pub fn columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.eigenvectors.select_columns(indices)
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues. Each eigenvector
/// is scaled so its largest-magnitude entry is positive.
pub fn eigendecompose(l: &DMatrix<f64>) -> Result<LaplacianSpectrum> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch {
            expected: l.nrows(),
            found: l.ncols(),
        });
    }
    let max_asymmetry = (l - l.transpose()).amax();
    if max_asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { max_asymmetry });
    }

    let eig = SymmetricEigen::new(l.clone());
    let n = l.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = eig.eigenvectors.select_columns(&order);
    for mut col in eigenvectors.column_iter_mut() {
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(LaplacianSpectrum {
        eigenvectors,
        eigenvalues,
    })
}

/// Forward GFT, `U^T x`.
pub fn gft(spectrum: &LaplacianSpectrum, x: &GraphSignal) -> Result<SpectralSignal> {
    check_len(spectrum.n(), x.len())?;
    Ok(SpectralSignal {
        coefficients: spectrum.eigenvectors.tr_mul(&x.0),
        domain: SpectralDomain::Full,
    })
}

/// Inverse GFT, `U s`. Requires full-length coefficients.
pub fn igft(spectrum: &LaplacianSpectrum, s: &SpectralSignal) -> Result<GraphSignal> {
    if s.domain != SpectralDomain::Full {
        return Err(Error::InvalidParameter(
            "inverse GFT over the full basis needs full-length coefficients".into(),
        ));
    }
    check_len(spectrum.n(), s.coefficients.len())?;
    Ok(GraphSignal(&spectrum.eigenvectors * &s.coefficients))
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> GraphTopology {
        GraphTopology::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> GraphTopology {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        GraphTopology::new(n, edges).unwrap()
    }

    fn connected_random_graph(n: usize, seed: u64) -> GraphTopology {
        // ring plus random chords
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                edges.push((i, j));
            }
        }
        GraphTopology::new(n, edges).unwrap()
    }

    struct UnionFind(Vec<usize>);

    impl UnionFind {
        fn find(&mut self, x: usize) -> usize {
            if self.0[x] != x {
                let root = self.find(self.0[x]);
                self.0[x] = root;
            }
            self.0[x]
        }
        fn union(&mut self, a: usize, b: usize) {
            let (ra, rb) = (self.find(a), self.find(b));
            self.0[ra] = rb;
        }
    }

    fn union_find_components(g: &GraphTopology) -> usize {
        let mut uf = UnionFind((0..g.n_nodes()).collect());
        for &(i, j) in g.edges() {
            uf.union(i, j);
        }
        (0..g.n_nodes()).filter(|&i| uf.find(i) == i).count()
    }

    fn brute_force_knn_edges(coords: &[(f64, f64)], k: usize) -> BTreeSet<(usize, usize)> {
        let mut edges = BTreeSet::new();
        for i in 0..coords.len() {
            let mut all: Vec<(f64, usize)> = (0..coords.len())
                .filter(|&j| j != i)
                .map(|j| (haversine_km(coords[i], coords[j]), j))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &(_, j) in all.iter().take(k) {
                edges.insert((i.min(j), i.max(j)));
            }
        }
        edges
    }

    #[test]
    fn topology_rejects_self_loops_and_out_of_range() {
        assert!(GraphTopology::new(3, [(1, 1)]).is_err());
        assert!(GraphTopology::new(3, [(0, 3)]).is_err());
        let g = GraphTopology::new(3, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn knn_collinear_points() {
        let coords = [(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)];
        let g = build_knn_graph(&coords, 1, DistanceMetric::Haversine).unwrap();
        let expected: BTreeSet<_> = [(0, 1), (1, 2)].into_iter().collect();
        assert_eq!(g.edges(), &expected);
    }

    #[test]
    fn knn_needs_k_plus_one_nodes() {
        let coords = [(0.0, 0.0), (0.0, 1.0)];
        assert!(matches!(
            build_knn_graph(&coords, 2, DistanceMetric::Haversine),
            Err(Error::TooFewNodes { needed: 3, got: 2 })
        ));
        assert!(build_knn_graph(&[(f64::NAN, 0.0), (0.0, 1.0)], 1, DistanceMetric::Haversine).is_err());
    }

    #[test]
    fn knn_duplicate_coordinates_break_ties_by_index() {
        let coords = [(10.0, 10.0), (10.0, 10.0), (10.0, 10.0), (10.0, 10.0)];
        let g = build_knn_graph(&coords, 1, DistanceMetric::Haversine).unwrap();
        // 0 -> 1, 1 -> 0, 2 -> 0, 3 -> 0
        let expected: BTreeSet<_> = [(0, 1), (0, 2), (0, 3)].into_iter().collect();
        assert_eq!(g.edges(), &expected);
    }

    #[test]
    fn knn_unit_circle_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coords: Vec<(f64, f64)> = (0..5)
            .map(|_| {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                (theta.sin(), theta.cos())
            })
            .collect();
        let g = build_knn_graph(&coords, 2, DistanceMetric::Haversine).unwrap();
        assert_eq!(g.edges(), &brute_force_knn_edges(&coords, 2));
    }

    #[test]
    fn knn_197_stations_min_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(197);
        let coords: Vec<(f64, f64)> = (0..197)
            .map(|_| (rng.random_range(30.0..45.0), rng.random_range(-115.0..-80.0)))
            .collect();
        let g = build_knn_graph(&coords, 8, DistanceMetric::Haversine).unwrap();
        assert_eq!(g.n_nodes(), 197);
        assert!(g.degrees().iter().all(|&d| d >= 8));
        let l = laplacian(&g);
        for i in 0..197 {
            assert_abs_diff_eq!(l.row(i).sum(), 0.0);
        }
        assert_abs_diff_eq!(l.trace(), 2.0 * g.edge_count() as f64);
    }

    #[test]
    fn euclidean_metric_differs_from_haversine_at_high_latitude() {
        let a = (60.0, 0.0);
        let b = (60.0, 1.0);
        let c = (60.7, 0.0);
        // one degree of longitude at 60N is ~55.6 km, 0.7 degree of latitude ~77.8 km
        assert!(haversine_km(a, b) < haversine_km(a, c));
        assert!(
            DistanceMetric::EuclideanDegrees.distance(a, b) > DistanceMetric::EuclideanDegrees.distance(a, c)
        );
    }

    #[test]
    fn laplacian_small_cases() {
        let path = GraphTopology::new(2, [(0, 1)]).unwrap();
        assert_eq!(laplacian(&path), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let l = laplacian(&triangle());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn eigendecompose_two_node_path() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let s = eigendecompose(&l).unwrap();
        assert_abs_diff_eq!(s.eigenvalues()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues()[1], 2.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = s.eigenvectors();
        assert_abs_diff_eq!(u[(0, 0)].abs(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(u[(1, 0)], u[(0, 0)], epsilon = 1e-12);
        assert_abs_diff_eq!(u[(1, 1)], -u[(0, 1)], epsilon = 1e-12);
    }

    #[test]
    fn eigendecompose_triangle() {
        let s = eigendecompose(&laplacian(&triangle())).unwrap();
        let ev = s.eigenvalues();
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigendecompose_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -0.5, 1.0]);
        assert!(matches!(eigendecompose(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn spectrum_invariants_on_random_connected_graph() {
        let g = connected_random_graph(10, 3);
        let l = laplacian(&g);
        let s = eigendecompose(&l).unwrap();
        let u = s.eigenvectors();
        let lambda = DMatrix::from_diagonal(s.eigenvalues());
        let recon = u * lambda * u.transpose();
        assert!((recon - &l).amax() < 1e-8);
        assert!((u.transpose() * u - DMatrix::identity(10, 10)).amax() < 1e-10);
        assert!(s.eigenvalues().as_slice().windows(2).all(|w| w[0] <= w[1]));
        assert_abs_diff_eq!(s.eigenvalues()[0], 0.0, epsilon = 1e-8);
        for col in u.column_iter() {
            assert!(col[col.iamax()] > 0.0);
        }
    }

    #[test]
    fn gft_of_constant_signal() {
        let g = connected_random_graph(12, 5);
        let s = eigendecompose(&laplacian(&g)).unwrap();
        let x = GraphSignal(DVector::from_element(12, 2.5));
        let c = gft(&s, &x).unwrap();
        assert_abs_diff_eq!(c.coefficients[0].abs(), 2.5 * 12f64.sqrt(), epsilon = 1e-10);
        for k in 1..12 {
            assert!(c.coefficients[k].abs() < 1e-10);
        }
    }

    #[test]
    fn gft_of_eigenvector_is_unit_vector() {
        let g = connected_random_graph(8, 9);
        let s = eigendecompose(&laplacian(&g)).unwrap();
        let j = 5;
        let c = gft(&s, &GraphSignal(s.eigenvectors().column(j).into_owned())).unwrap();
        for k in 0..8 {
            assert_abs_diff_eq!(c.coefficients[k], if k == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
        }
        let back = igft(
            &s,
            &SpectralSignal {
                coefficients: DVector::from_fn(8, |k, _| if k == j { 1.0 } else { 0.0 }),
                domain: SpectralDomain::Full,
            },
        )
        .unwrap();
        assert!((back.0 - s.eigenvectors().column(j)).amax() < 1e-10);
    }

    #[test]
    fn gft_dimension_mismatch() {
        let s = eigendecompose(&laplacian(&triangle())).unwrap();
        assert!(matches!(
            gft(&s, &GraphSignal::zeros(4)),
            Err(Error::DimensionMismatch { expected: 3, found: 4 })
        ));
        let band = SpectralSignal {
            coefficients: DVector::zeros(3),
            domain: SpectralDomain::Band,
        };
        assert!(igft(&s, &band).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gft_round_trip(seed in any::<u64>(), n in 3usize..20) {
            let g = random_graph(n, 0.4, seed);
            let s = eigendecompose(&laplacian(&g)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let x = GraphSignal(DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0)));
            let back = igft(&s, &gft(&s, &x).unwrap()).unwrap();
            prop_assert!((back.0 - &x.0).amax() < 1e-10);
        }

        #[test]
        fn laplacian_is_psd_and_counts_components(seed in any::<u64>(), n in 2usize..16, p in 0.0f64..0.5) {
            let g = random_graph(n, p, seed);
            let l = laplacian(&g);
            for i in 0..n {
                prop_assert!(l.row(i).sum().abs() < 1e-12);
            }
            let s = eigendecompose(&l).unwrap();
            prop_assert!(s.eigenvalues().iter().all(|&v| v >= -1e-10));
            prop_assert_eq!(s.zero_eigenvalue_count(), union_find_components(&g));
            prop_assert_eq!(g.connected_components(), union_find_components(&g));
        }

        #[test]
        fn knn_is_permutation_equivariant(seed in any::<u64>(), n in 5usize..25, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coords: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(-60.0..60.0), rng.random_range(-170.0..170.0)))
                .collect();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            // node i of the permuted problem is node perm[i] of the original
            let permuted: Vec<_> = perm.iter().map(|&p| coords[p]).collect();
            let g = build_knn_graph(&coords, k, DistanceMetric::Haversine).unwrap();
            let gp = build_knn_graph(&permuted, k, DistanceMetric::Haversine).unwrap();
            let mapped: BTreeSet<_> = gp
                .edges()
                .iter()
                .map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b])))
                .collect();
            prop_assert_eq!(&mapped, g.edges());
        }
    }
}
