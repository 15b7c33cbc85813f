//! Independent reference implementations used to check the library.

use nalgebra::{DMatrix, DVector, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triwalk_core::footstep::{move_allowed, Cell, GridCost, GridMap};
use triwalk_core::qp::QpProblem;

/// Matrix exponential of `m * t` by a truncated power series.
pub fn expm_series<const N: usize>(
    m: &SMatrix<f64, N, N>,
    t: f64,
    terms: usize,
) -> SMatrix<f64, N, N> {
    let mut sum = SMatrix::<f64, N, N>::identity();
    let mut term = SMatrix::<f64, N, N>::identity();
    for k in 1..terms {
        term = term * m * (t / k as f64);
        sum += term;
    }
    sum
}

/// Zero-order-hold input matrix `int_0^t e^{A s} ds B` by the series
/// `sum_k A^k t^{k+1} / (k+1)! B`.
pub fn zoh_input_series<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    t: f64,
    terms: usize,
) -> SMatrix<f64, N, M> {
    let mut sum = SMatrix::<f64, N, N>::identity() * t;
    let mut term = SMatrix::<f64, N, N>::identity() * t;
    for k in 1..terms {
        term = term * a * (t / (k + 1) as f64);
        sum += term;
    }
    sum * b
}

/// Brute-force QP minimum: tries every subset of at most `n` rows as the
/// active set, solves the equality-constrained KKT system and keeps the best
/// primal- and dual-feasible point. Returns `None` when no subset qualifies.
pub fn qp_by_enumeration(p: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = p.num_vars();
    let m = p.num_rows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1u32 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if rows.len() > n {
            continue;
        }
        let k = rows.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&p.f));
        for (c, &i) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + c, j)] = p.a[(i, j)];
                kkt[(j, n + c)] = p.a[(i, j)];
            }
            rhs[n + c] = p.b[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let z = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, k);
        if lambda.iter().any(|&l| l < -1e-9) {
            continue;
        }
        let feasible = (0..m).all(|i| (p.a.row(i) * &z)[0] <= p.b[i] + 1e-9);
        if !feasible {
            continue;
        }
        let obj = 0.5 * z.dot(&(&p.h * &z)) + p.f.dot(&z);
        if best.as_ref().map_or(true, |(_, o)| obj < *o) {
            best = Some((z, obj));
        }
    }
    best
}

/// Random strictly convex QP with a known feasible point.
pub fn random_feasible_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let mut g = DMatrix::zeros(n, n);
    g.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    let h = g.transpose() * &g + DMatrix::identity(n, n) * 0.1;
    let f = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let z0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let slack = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
    let b = &a * z0 + slack;
    QpProblem::new(h, f, a, b)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact shortest 8-connected path cost by Dijkstra with a linear scan for
/// the minimum, using the same corner rule as the planner.
pub fn dijkstra_cost(map: &GridMap, start: Cell, goal: Cell) -> Option<GridCost> {
    let n = map.width * map.height;
    let mut dist: Vec<Option<GridCost>> = vec![None; n];
    let mut done = vec![false; n];
    dist[map.index(start)] = Some(GridCost::default());
    loop {
        let mut best: Option<(usize, GridCost)> = None;
        for i in 0..n {
            if let (false, Some(d)) = (done[i], dist[i]) {
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((i, d));
                }
            }
        }
        let (i, d) = best?;
        let cell = map.cell_of_index(i);
        if cell == goal {
            return Some(d);
        }
        done[i] = true;
        for (next, diagonal) in map.neighbors(cell) {
            if !move_allowed(map, cell, next, diagonal) {
                continue;
            }
            let j = map.index(next);
            let cand = d.add(GridCost::step(diagonal));
            if dist[j].is_none_or(|old| cand < old) {
                dist[j] = Some(cand);
            }
        }
    }
}

/// Random map with scattered rectangular blocks.
pub fn random_map(rng: &mut ChaCha8Rng, width: usize, height: usize, blocks: usize) -> GridMap {
    let mut map = GridMap::empty(width, height, 0.1).unwrap();
    for _ in 0..blocks {
        let r = rng.random_range(0..height);
        let c = rng.random_range(0..width);
        let h = rng.random_range(1..=4);
        let w = rng.random_range(1..=4);
        map.fill_block(r..(r + h).min(height), c..(c + w).min(width));
    }
    map
}
