//! Sample graph from locally linear reconstruction weights.
//!
//! Every sample is reconstructed as an affine combination of its `k` nearest
//! neighbours. The weights form a row-stochastic matrix `V`, and the code
//! regulariser is `L_A = (I - V)ᵀ(I - V) = I - V - Vᵀ + VᵀV`, so that
//! `tr(A L_A Aᵀ) = Σ_i ||a_i - Σ_j V[i,j] a_j||²`.

use std::cmp::Ordering;

use ndarray::prelude::*;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::model::LaplacianOperator;

/// Relative Tikhonov weight added to the local Gram matrix.
pub const LLE_REGULARIZATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    /// Euclidean distance.
    pub distance: f64,
}

/// `k` nearest neighbours of every sample, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    k: usize,
    lists: Vec<Vec<Neighbor>>,
}

impl NeighborIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.lists[i]
    }

    pub fn indices(&self, i: usize) -> Vec<usize> {
        self.lists[i].iter().map(|n| n.index).collect()
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Rows of `points` (one point per row) ordered by distance to `query`.
/// Returns the `k` closest, skipping `exclude`. Ties go to the lower index.
fn nearest_rows(points: ArrayView2<f64>, query: ArrayView1<f64>, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
    let mut scored: Vec<(f64, usize)> = points
        .rows()
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != exclude)
        .map(|(j, row)| {
            let d2: f64 = row.iter().zip(query.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, j)
        })
        .collect();
    let k = k.min(scored.len());
    if k == 0 {
        return Vec::new();
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_distance_then_index);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_distance_then_index);
    scored
        .into_iter()
        .map(|(d2, index)| Neighbor {
            index,
            distance: d2.sqrt(),
        })
        .collect()
}

/// Exact `k`-nearest-neighbour search among the columns of `x`.
///
/// A sample is never its own neighbour; equal distances are ordered by the
/// lower column index.
pub fn find_knn(x: ArrayView2<f64>, k: usize) -> Result<NeighborIndex> {
    let n_samples = x.ncols();
    if k == 0 || k >= n_samples {
        return Err(Error::invalid(format!(
            "find_knn: need 1 <= k < N, got k = {k} with N = {n_samples}"
        )));
    }
    let points = x.t().as_standard_layout().into_owned();
    let lists = (0..n_samples)
        .into_par_iter()
        .map(|i| nearest_rows(points.view(), points.row(i), k, Some(i)))
        .collect();
    Ok(NeighborIndex { k, lists })
}

/// The `k` columns of `reference` nearest to `query`.
pub fn find_knn_of(reference: ArrayView2<f64>, query: ArrayView1<f64>, k: usize) -> Result<Vec<Neighbor>> {
    if k == 0 || k > reference.ncols() {
        return Err(Error::invalid(format!(
            "find_knn_of: need 1 <= k <= {}, got {k}",
            reference.ncols()
        )));
    }
    if query.len() != reference.nrows() {
        return Err(Error::invalid("find_knn_of: query dimension mismatch"));
    }
    Ok(nearest_rows(reference.t(), query, k, None))
}

/// Affine reconstruction weights of `x_i` from the columns of `neighbors`.
///
/// Solves `(G + ε I) w = 1` with `G[a,b] = <x_i - x_a, x_i - x_b>` and
/// `ε = 1e-3 · tr(G)` (or `1e-3` when `tr(G) = 0`), then rescales `w` to sum
/// to one.
pub fn lle_weights(x_i: ArrayView1<f64>, neighbors: ArrayView2<f64>) -> Result<Array1<f64>> {
    let k = neighbors.ncols();
    if k == 0 {
        return Err(Error::invalid("lle_weights: need at least one neighbour"));
    }
    if neighbors.nrows() != x_i.len() {
        return Err(Error::invalid("lle_weights: neighbour dimension mismatch"));
    }
    if k == 1 {
        return Ok(array![1.0]);
    }
    let diffs = &neighbors - &x_i.insert_axis(Axis(1));
    let mut gram = diffs.t().dot(&diffs);
    let trace = gram.diag().sum();
    let eps = if trace > 0.0 {
        LLE_REGULARIZATION * trace
    } else {
        LLE_REGULARIZATION
    };
    gram.diag_mut().mapv_inplace(|g| g + eps);
    let w = solve_spd(&gram, &Array2::ones((k, 1)))?.index_axis_move(Axis(1), 0);
    let total = w.sum();
    if !(total.is_finite() && total != 0.0) {
        return Err(Error::invalid("lle_weights: degenerate neighbourhood"));
    }
    Ok(w / total)
}

/// Sparse row-stochastic weights `V` and the dense regulariser `L_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGraph {
    /// `rows[i]` holds `(j, V[i,j])` for the nonzeros of row `i`.
    rows: Vec<Vec<(usize, f64)>>,
    /// Transposed adjacency: `columns[j]` holds `(i, V[i,j])`, `i` ascending.
    columns: Vec<Vec<(usize, f64)>>,
    l_a: Array2<f64>,
    neighbors: Option<NeighborIndex>,
}

impl SampleGraph {
    /// Builds the graph from explicit weight rows. Rows may be empty.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= n || j == i || !v.is_finite() {
                    return Err(Error::invalid(format!("sample graph: invalid entry ({i}, {j}) = {v}")));
                }
            }
        }
        let mut columns = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                columns[j].push((i, v));
            }
        }
        // L_A = Σ_i r_i r_iᵀ with r_i = e_i - V[i,:]ᵀ.
        let mut l_a = Array2::zeros((n, n));
        let mut r = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            r.clear();
            r.push((i, 1.0));
            r.extend(row.iter().map(|&(j, v)| (j, -v)));
            for &(a, ra) in &r {
                for &(b, rb) in &r {
                    l_a[[a, b]] += ra * rb;
                }
            }
        }
        Ok(Self {
            rows,
            columns,
            l_a,
            neighbors: None,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn l_a(&self) -> ArrayView2<'_, f64> {
        self.l_a.view()
    }

    pub fn into_l_a(self) -> Array2<f64> {
        self.l_a
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn neighbors(&self) -> Option<&NeighborIndex> {
        self.neighbors.as_ref()
    }

    /// Dense copy of `V`.
    pub fn v_matrix(&self) -> Array2<f64> {
        let n = self.n_samples();
        let mut v = Array2::zeros((n, n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                v[[i, j]] = w;
            }
        }
        v
    }

    /// Per-sample reconstruction residuals `a_i - Σ_j V[i,j] a_j`, one row per
    /// sample (`N × p`), for codes given sample-major (`N × p`).
    fn residual_rows(&self, codes_t: ArrayView2<f64>) -> Array2<f64> {
        let mut out = codes_t.to_owned();
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut r)| {
                for &(j, v) in &self.rows[i] {
                    r.scaled_add(-v, &codes_t.row(j));
                }
            });
        out
    }

    /// Residuals `a_i - Σ_j V[i,j] a_j` as columns of a `p × N` matrix.
    pub fn residuals(&self, a: ArrayView2<f64>) -> Array2<f64> {
        let codes_t = a.t().as_standard_layout().into_owned();
        self.residual_rows(codes_t.view()).reversed_axes()
    }
}

impl LaplacianOperator for SampleGraph {
    fn order(&self) -> usize {
        self.n_samples()
    }

    fn right_apply(&self, a: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(a.ncols(), self.n_samples(), "sample graph order mismatch");
        let codes_t = a.t().as_standard_layout().into_owned();
        let r = self.residual_rows(codes_t.view());
        // (A L_A)ᵀ = (I - V)ᵀ R: row j is r_j - Σ_i V[i,j] r_i.
        let mut out = r.clone();
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(j, mut o)| {
                for &(i, v) in &self.columns[j] {
                    o.scaled_add(-v, &r.row(i));
                }
            });
        out.reversed_axes()
    }

    fn quadratic_form(&self, a: ArrayView2<f64>) -> f64 {
        let codes_t = a.t().as_standard_layout().into_owned();
        self.residual_rows(codes_t.view()).iter().map(|v| v * v).sum()
    }
}

/// k-NN search followed by per-sample reconstruction weights.
pub fn build_sample_graph(x: ArrayView2<f64>, k: usize) -> Result<SampleGraph> {
    let knn = find_knn(x, k)?;
    let rows = (0..x.ncols())
        .into_par_iter()
        .map(|i| {
            let idx = knn.indices(i);
            let neighbors = x.select(Axis(1), &idx);
            let w = lle_weights(x.column(i), neighbors.view())?;
            Ok(idx.into_iter().zip(w).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut graph = SampleGraph::from_rows(rows)?;
    graph.neighbors = Some(knn);
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn knn_on_a_line() {
        let x = array![[0.0, 1.0, 3.0]];
        let knn = find_knn(x.view(), 1).unwrap();
        assert_eq!(knn.indices(0), vec![1]);
        assert_eq!(knn.indices(1), vec![0]);
        assert_eq!(knn.indices(2), vec![1]);
        assert_eq!(knn.neighbors(2)[0].distance, 2.0);
    }

    #[test]
    fn knn_ties_go_to_lower_index() {
        let x = Array2::from_elem((2, 5), 0.25);
        let knn = find_knn(x.view(), 2).unwrap();
        assert_eq!(knn.indices(0), vec![1, 2]);
        assert_eq!(knn.indices(1), vec![0, 2]);
        assert_eq!(knn.indices(4), vec![0, 1]);
    }

    #[test]
    fn knn_rejects_k_at_least_n() {
        let x = Array2::zeros((2, 3));
        assert!(matches!(find_knn(x.view(), 3), Err(Error::InvalidArgument(_))));
        assert!(find_knn(x.view(), 0).is_err());
    }

    #[test]
    fn single_neighbour_weight_is_one() {
        let w = lle_weights(array![0.3, 0.1].view(), array![[1.0], [2.0]].view()).unwrap();
        assert_eq!(w, array![1.0]);
    }

    #[test]
    fn symmetric_neighbours_share_weight() {
        let w = lle_weights(array![0.0, 0.0].view(), array![[1.0, -1.0], [0.0, 0.0]].view()).unwrap();
        assert_abs_diff_eq!(w, array![0.5, 0.5], epsilon = 1e-12);
    }

    #[test]
    fn coincident_neighbours_use_absolute_regularization() {
        let x = array![0.5, 0.5];
        let w = lle_weights(x.view(), array![[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]].view()).unwrap();
        assert_abs_diff_eq!(w, Array1::from_elem(3, 1.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn two_samples_give_the_expanded_laplacian() {
        let x = array![[0.0, 1.0]];
        let g = build_sample_graph(x.view(), 1).unwrap();
        assert_eq!(g.v_matrix(), array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(g.l_a(), array![[2.0, -2.0], [-2.0, 2.0]]);
    }

    #[test]
    fn empty_rows_give_identity() {
        let g = SampleGraph::from_rows(vec![vec![]; 3]).unwrap();
        assert_eq!(g.l_a(), Array2::<f64>::eye(3));
    }

    #[test]
    fn factored_apply_matches_dense() {
        let x = array![
            [0.1, 0.9, 0.4, 0.3, 0.8, 0.2],
            [0.5, 0.2, 0.7, 0.1, 0.6, 0.9],
            [0.3, 0.3, 0.2, 0.8, 0.1, 0.4]
        ];
        let g = build_sample_graph(x.view(), 2).unwrap();
        let a = array![[1.0, -0.5, 0.2, 0.0, 0.3, 0.7], [0.4, 0.1, -0.9, 0.6, 0.0, 0.2]];
        let dense = a.dot(&g.l_a());
        assert_abs_diff_eq!(g.right_apply(a.view()), dense, epsilon = 1e-12);
        assert_abs_diff_eq!(
            g.quadratic_form(a.view()),
            g.l_a.quadratic_form(a.view()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn self_loops_are_rejected() {
        assert!(SampleGraph::from_rows(vec![vec![(0, 1.0)]]).is_err());
    }
}
