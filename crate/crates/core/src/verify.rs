//! Numeric verifiers for the Laplacian family: entry non-negativity and row
//! sums of `P`, eigenvalue monotonicity in gamma, and order preservation
//! between spectral and diffusion distances.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::param::{limit_check, param_adjacency, LaplacianParams};
use crate::spectral::{eig_sym, verify_monotonicity, MonotonicityReport, SolverMode};

pub const ENTRY_TOL: f64 = 1e-14;
pub const ROW_SUM_TOL: f64 = 1e-12;
pub const SPECTRAL_GAP_MIN: f64 = 1e-6;
pub const T_WINDOW: usize = 10;

/// `{0.1, 0.2, ..., 1.0}`.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// `{0, 0.25, 0.5, 0.75, 1}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=4).map(|k| k as f64 / 4.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryReport {
    pub min_entry: f64,
    /// Largest `|row sum - 1|` over the `alpha = 1` members.
    pub max_row_sum_deviation: f64,
    pub pass: bool,
}

/// Non-negativity of every `P(alpha, gamma)` on the grid and stochastic rows at `alpha = 1`.
pub fn verify_entries(g: &Graph, alphas: &[f64], gammas: &[f64]) -> Result<EntryReport> {
    let mut min_entry = f64::INFINITY;
    let mut max_dev = 0.0f64;
    for &a in alphas {
        for &gm in gammas {
            let p = param_adjacency::<f64>(g, LaplacianParams::new(a, gm)?)?.to_dense()?;
            min_entry = min_entry.min(p.min_entry());
            if a == 1.0 {
                for s in p.row_sums() {
                    max_dev = max_dev.max((s - 1.0).abs());
                }
            }
        }
    }
    Ok(EntryReport {
        min_entry,
        max_row_sum_deviation: max_dev,
        pass: min_entry >= -ENTRY_TOL && max_dev < ROW_SUM_TOL,
    })
}

/// One checked triple: `d_s(m, j) < d_s(i, j)` and the diffusion ordering
/// over the window starting at `t_start`.
#[derive(Debug, Clone, Serialize)]
pub struct TripleCheck {
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub constant: f64,
    pub t_start: u64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    pub params: LaplacianParams,
    /// `lambda_1` repeated; no triples were drawn.
    pub skipped_degenerate: bool,
    pub triples: Vec<TripleCheck>,
    pub pass: bool,
}

impl OrderReport {
    pub fn satisfied(&self) -> usize {
        self.triples.iter().filter(|t| t.holds).count()
    }
}

/// First integer diffusion time covered by the ordering guarantee:
/// `floor(C) + 1`, clamped to 1 since diffusion time is positive.
pub fn window_start(constant: f64) -> u64 {
    if constant.is_finite() {
        (constant.floor() + 1.0).max(1.0) as u64
    } else {
        1
    }
}

/// Draws up to `count` triples with a spectral-distance gap above
/// [`SPECTRAL_GAP_MIN`] and checks `d_t(m, j) < d_t(i, j)` for every integer `t`
/// in `[t0, t0 + T_WINDOW - 1]`, `t0 = window_start(C)`.
pub fn verify_order_preservation<R: Rng + ?Sized>(
    g: &Graph,
    p: LaplacianParams,
    count: usize,
    rng: &mut R,
) -> Result<OrderReport> {
    let n = g.node_count();
    if n < 3 {
        return Err(Error::usage("order preservation needs at least 3 nodes"));
    }
    let dec = eig_sym::<f64>(g, p.gamma(), 0, SolverMode::Dense)?;
    let view = dec.eigvec_view(p.alpha())?;
    if view.is_degenerate() {
        return Ok(OrderReport {
            params: p,
            skipped_degenerate: true,
            triples: Vec::new(),
            pass: true,
        });
    }
    let phi = view.fiedler()?;
    let mut triples = Vec::with_capacity(count);
    let mut attempts = 0;
    while triples.len() < count && attempts < 100 * count {
        attempts += 1;
        let j = rng.random_range(0..n);
        let mut i = rng.random_range(0..n);
        let mut m = rng.random_range(0..n);
        if i == j || m == j || i == m {
            continue;
        }
        let (di, dm) = ((phi[i] - phi[j]).abs(), (phi[m] - phi[j]).abs());
        if (di - dm).abs() <= SPECTRAL_GAP_MIN {
            continue;
        }
        if dm > di {
            std::mem::swap(&mut i, &mut m);
        }
        let constant = view.order_constant(i, j, m)?;
        let t_start = window_start(constant);
        let mut holds = true;
        for t in t_start..t_start + T_WINDOW as u64 {
            // log form: at large t both distances underflow to zero
            let far = view.log_diffusion_distance(i, j, t as f64)?;
            let near = view.log_diffusion_distance(m, j, t as f64)?;
            holds &= near < far;
        }
        triples.push(TripleCheck {
            i,
            j,
            m,
            constant,
            t_start,
            holds,
        });
    }
    let pass = triples.iter().all(|t| t.holds);
    Ok(OrderReport {
        params: p,
        skipped_degenerate: false,
        triples,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub alpha: f64,
    pub gammas: Vec<f64>,
    pub deviations: Vec<f64>,
    pub non_increasing: bool,
}

pub fn verify_limit(g: &Graph, alpha: f64, gammas: &[f64]) -> Result<LimitReport> {
    let deviations = limit_check(g, alpha, gammas)?;
    let non_increasing = deviations.windows(2).all(|w| w[1] <= w[0]);
    Ok(LimitReport {
        alpha,
        gammas: gammas.to_vec(),
        deviations,
        non_increasing,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub nodes: usize,
    pub edges: usize,
    pub entries: EntryReport,
    pub monotonicity: MonotonicityReport,
    pub order: Vec<OrderReport>,
    /// Informational; not part of `pass`.
    pub limit: LimitReport,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Triples drawn per gamma, at `alpha = 1`.
    pub triples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            alphas: default_alpha_grid(),
            gammas: default_gamma_grid(),
            triples: 20,
        }
    }
}

/// All checks on one graph. The graph must be connected.
pub fn verify_all<R: Rng + ?Sized>(g: &Graph, opts: &VerifyOptions, rng: &mut R) -> Result<VerifyReport> {
    g.require_connected()?;
    let entries = verify_entries(g, &opts.alphas, &opts.gammas)?;
    let monotonicity = verify_monotonicity(g, &opts.gammas)?;
    let mut order = Vec::with_capacity(opts.gammas.len());
    if g.node_count() >= 3 {
        for &gm in &opts.gammas {
            order.push(verify_order_preservation(
                g,
                LaplacianParams::new(1.0, gm)?,
                opts.triples,
                rng,
            )?);
        }
    }
    let limit = verify_limit(g, 1.0, &[1e-2, 1e-3, 1e-4])?;
    let pass = entries.pass && monotonicity.pass && order.iter().all(|o| o.pass);
    Ok(VerifyReport {
        nodes: g.node_count(),
        edges: g.edge_count(),
        entries,
        monotonicity,
        order,
        limit,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::named::*;
    use crate::random::random_connected;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p3_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = verify_all(&path(3), &VerifyOptions::default(), &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn disconnected_is_data_error() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let err = verify_all(&g, &VerifyOptions::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn random_graphs_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let g = random_connected(20, 0.2, &mut rng);
            let r = verify_all(&g, &VerifyOptions::default(), &mut rng).unwrap();
            assert!(r.pass);
        }
    }

    #[test]
    fn window_start_clamps() {
        assert_eq!(window_start(-3.7), 1);
        assert_eq!(window_start(f64::NEG_INFINITY), 1);
        assert_eq!(window_start(2.3), 3);
        assert_eq!(window_start(2.0), 3);
    }

    #[test]
    fn k3_order_check_skipped() {
        let r = verify_order_preservation(
            &complete(3),
            LaplacianParams::RANDOM_WALK,
            5,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert!(r.skipped_degenerate);
    }
}
