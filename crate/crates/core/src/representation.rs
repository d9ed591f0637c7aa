//! Mechanism constructions with certified properties.
//!
//! The base object is a *functional representation coupling*: a variable `U`
//! that is independent of `X` while making `Y` a deterministic function of
//! `(U, X)`. Such a coupling always exists with at most
//! `nx * (ny - 1) + 1` output symbols, and [`frl`] builds one by interval
//! refinement. Everything else layers on top:
//!
//! * [`sfrl_search`] minimizes the conditional leakage `I(X;U|Y)` over all
//!   couplings of this kind, returning a certified estimate of the *excess
//!   functional information* of the pair.
//! * [`mix_with_x`] (and its wrappers [`efrl`], [`esfrl`]) inject an exact
//!   leakage budget: the output discloses `X` itself with probability
//!   `alpha = eps / H(X)`, which raises `I(X;U)` to exactly `eps`.
//! * [`improve`] removes residual randomness `H(Y|X,U)` from an arbitrary
//!   mechanism without changing its leakage, never losing utility.
//! * [`saturate_leakage`] pushes a zero-residual Markov mechanism up to a
//!   target leakage `eps`, landing utility exactly on the `H(Y|X) + eps`
//!   ceiling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::distribution::{
    entropy, report, JointDistribution, Mechanism, Scenario, TripleDistribution,
};
use crate::{simplex, Error, Result};

/// Breakpoints closer than this are merged during interval refinement.
const MERGE_TOL: f64 = 1e-12;
/// Atom weights at or below this are dropped from emitted mechanisms.
const SUPPORT_TOL: f64 = 1e-13;
/// Vertex enumeration runs only when `C(atoms, rank)` stays within this.
const VERTEX_BUDGET: f64 = 5000.0;
/// At most this many enumerated vertices are used as descent starts.
const MAX_VERTEX_STARTS: usize = 64;
/// Hard cap on the function-atom count (`ny ^ active nx`).
const MAX_ATOMS: usize = 200_000;

/// Tuning knobs for the iterative searches. The same configuration and seed
/// always produce bit-identical results.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Number of random restarts (at least 1).
    pub restarts: u32,
    /// Iteration cap per descent run.
    pub max_iters: u32,
    /// Initial gradient step size.
    pub step: f64,
    /// Seed for the deterministic random streams; stream `i` drives
    /// restart `i`.
    pub seed: u64,
    /// Convergence tolerance in bits (improvement below this for 50
    /// iterations stops a run).
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 300,
            step: 0.25,
            seed: 0,
            tol: 1e-9,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Domain("restarts must be at least 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        if !(self.step > 0.0) || !(self.tol > 0.0) {
            return Err(Error::Domain(
                "step and tol must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// The space of deterministic maps `g : X -> Y` (one value per `x` with
/// `P(x) > 0`), together with the linear constraints a weight vector over
/// the maps must satisfy to reproduce `P_{Y|X}`:
/// `sum over g with g(x) = y of w(g) = P(y|x)`.
///
/// Drawing `U = g` with probability `w(g)` independently of `X` and setting
/// `Y = g(X)` then yields exactly the joint `P_{XY}`, zero leakage
/// `I(X;U) = 0`, and zero residual `H(Y|X,U) = 0`. Any coupling with those
/// two properties collapses onto some weight vector in this space without
/// increasing `I(X;U|Y)`, so searches over it lose no generality.
#[derive(Debug, Clone)]
pub struct FunctionAtomSpace {
    nx: usize,
    ny: usize,
    /// Indices of `x` symbols with positive probability, in order.
    active_x: Vec<usize>,
    /// `atoms[g][i]` is the value the map `g` assigns to `active_x[i]`.
    atoms: Vec<Vec<usize>>,
    /// Equality constraints `A w = b` (per-`x` channel rows, then the
    /// normalization row).
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl FunctionAtomSpace {
    pub fn new(j: &JointDistribution) -> Result<Self> {
        let (nx, ny) = (j.nx(), j.ny());
        let px = j.marginal_x();
        let active_x: Vec<usize> = (0..nx).filter(|&x| px[x] > 0.0).collect();
        let natoms = ny
            .checked_pow(active_x.len() as u32)
            .filter(|&n| n <= MAX_ATOMS)
            .ok_or_else(|| {
                Error::Precondition(format!(
                    "function-atom space needs {ny}^{} maps, beyond the {MAX_ATOMS} cap",
                    active_x.len()
                ))
            })?;

        // Mixed-radix enumeration keeps atom order deterministic.
        let mut atoms = Vec::with_capacity(natoms);
        let mut cur = vec![0usize; active_x.len()];
        loop {
            atoms.push(cur.clone());
            let mut i = cur.len();
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                cur[i] += 1;
                if cur[i] < ny {
                    break;
                }
                cur[i] = 0;
            }
            if cur.iter().all(|&v| v == 0) {
                break;
            }
        }
        debug_assert_eq!(atoms.len(), natoms);

        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, &x) in active_x.iter().enumerate() {
            let cond = j.conditional_row(x);
            for y in 0..ny.saturating_sub(1) {
                let row: Vec<f64> = atoms
                    .iter()
                    .map(|g| if g[i] == y { 1.0 } else { 0.0 })
                    .collect();
                a.push(row);
                b.push(cond[y]);
            }
        }
        a.push(vec![1.0; natoms]);
        b.push(1.0);

        Ok(Self {
            nx,
            ny,
            active_x,
            atoms,
            a,
            b,
        })
    }

    pub fn natoms(&self) -> usize {
        self.atoms.len()
    }

    /// The constraint system `A w = b` over atom weights.
    pub fn constraints(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.a, &self.b)
    }

    /// The independent-coupling weights `w(g) = prod_x P(g(x)|x)`, always a
    /// feasible interior point of the constraint polytope.
    pub fn product_weights(&self, j: &JointDistribution) -> Vec<f64> {
        let conds: Vec<Vec<f64>> = self.active_x.iter().map(|&x| j.conditional_row(x)).collect();
        self.atoms
            .iter()
            .map(|g| {
                g.iter()
                    .zip(&conds)
                    .map(|(&y, cond)| cond[y])
                    .product::<f64>()
            })
            .collect()
    }

    /// Per-atom coefficients `c(g) = H(X | g(X))`: the conditional leakage
    /// of a weight vector is the linear function
    /// `I(X;U|Y) = H(X|Y) - sum_g w(g) c(g)`, so minimizing it is a linear
    /// program over the constraint polytope.
    pub fn objective_coefficients(&self, j: &JointDistribution) -> Vec<f64> {
        let px = j.marginal_x();
        let hx = entropy(&px);
        self.atoms
            .iter()
            .map(|g| {
                let mut push = vec![0.0; self.ny];
                for (i, &x) in self.active_x.iter().enumerate() {
                    push[g[i]] += px[x];
                }
                hx - entropy(&push)
            })
            .collect()
    }

    /// Builds the mechanism that draws a map with the given weights. Atoms
    /// with negligible weight are dropped; rows for probability-zero
    /// `(x, y)` pairs are constant.
    pub fn mechanism(&self, j: &JointDistribution, w: &[f64]) -> Result<Mechanism> {
        if w.len() != self.atoms.len() {
            return Err(Error::Domain(format!(
                "expected {} atom weights, got {}",
                self.atoms.len(),
                w.len()
            )));
        }
        let support: Vec<usize> = (0..w.len()).filter(|&g| w[g] > SUPPORT_TOL).collect();
        if support.is_empty() {
            return Err(Error::Domain("atom weight vector is all zero".into()));
        }
        let pos_of_x: HashMap<usize, usize> = self
            .active_x
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, i))
            .collect();
        let nu = support.len();
        let mut k = vec![0.0; self.nx * self.ny * nu];
        for x in 0..self.nx {
            for y in 0..self.ny {
                let row = &mut k[(x * self.ny + y) * nu..(x * self.ny + y + 1) * nu];
                let mut sum = 0.0;
                if j.p(x, y) > 0.0 {
                    if let Some(&i) = pos_of_x.get(&x) {
                        for (ui, &g) in support.iter().enumerate() {
                            if self.atoms[g][i] == y {
                                row[ui] = w[g];
                                sum += w[g];
                            }
                        }
                    }
                }
                if sum > SUPPORT_TOL {
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                } else {
                    row.fill(0.0);
                    row[0] = 1.0;
                }
            }
        }
        Mechanism::observed(self.nx, self.ny, nu, k)
    }
}

/// Builds a functional representation coupling by interval refinement:
/// for each `x`, `[0, 1)` is split into `ny` consecutive intervals of
/// lengths `P_{Y|X}(y|x)`; the common refinement's cells are labeled by the
/// `y`-vector they induce, cells with identical labels are merged, and each
/// merged cell becomes one output symbol.
///
/// Guarantees: `I(X;U) <= 1e-9`, `H(Y|X,U) <= 1e-9`, at most
/// `nx * (ny - 1) + 1` symbols, and `H(U) <= sum_x H(Y|X = x)`.
pub fn frl(j: &JointDistribution) -> Result<Mechanism> {
    let (nx, ny) = (j.nx(), j.ny());
    let px = j.marginal_x();
    let active: Vec<usize> = (0..nx).filter(|&x| px[x] > 0.0).collect();

    // Cumulative boundaries per active x, endpoints pinned to 0 and 1.
    let mut cums: Vec<Vec<f64>> = Vec::with_capacity(active.len());
    for &x in &active {
        let cond = j.conditional_row(x);
        let mut cum = Vec::with_capacity(ny + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for &v in cond.iter() {
            acc += v;
            cum.push(acc);
        }
        cum[ny] = 1.0;
        cums.push(cum);
    }

    // Common refinement: all interior boundaries, merged within MERGE_TOL.
    let mut pts = vec![0.0, 1.0];
    for cum in &cums {
        for y in 1..ny {
            pts.push(cum[y]);
        }
    }
    pts.sort_by(f64::total_cmp);
    let mut merged = Vec::with_capacity(pts.len());
    for p in pts {
        match merged.last() {
            Some(&last) if p - last <= MERGE_TOL => {}
            _ => merged.push(p),
        }
    }
    *merged.last_mut().unwrap() = 1.0;

    // Label every cell by its y-vector and merge identical labels in
    // first-occurrence order.
    let mut label_index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut labels: Vec<Vec<usize>> = Vec::new();
    for cell in merged.windows(2) {
        let width = cell[1] - cell[0];
        if width <= 0.0 {
            continue;
        }
        let mid = 0.5 * (cell[0] + cell[1]);
        let label: Vec<usize> = cums
            .iter()
            .map(|cum| {
                let mut y = 0;
                while y + 1 < ny && cum[y + 1] <= mid {
                    y += 1;
                }
                y
            })
            .collect();
        match label_index.get(&label) {
            Some(&u) => weights[u] += width,
            None => {
                label_index.insert(label.clone(), labels.len());
                labels.push(label);
                weights.push(width);
            }
        }
    }

    let nu = labels.len();
    debug_assert!(nu <= active.len() * (ny - 1) + 1);
    let pos_of_x: HashMap<usize, usize> = active.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut k = vec![0.0; nx * ny * nu];
    for x in 0..nx {
        for y in 0..ny {
            let row = &mut k[(x * ny + y) * nu..(x * ny + y + 1) * nu];
            let mut sum = 0.0;
            if j.p(x, y) > 0.0 {
                if let Some(&i) = pos_of_x.get(&x) {
                    for u in 0..nu {
                        if labels[u][i] == y {
                            row[u] = weights[u];
                            sum += weights[u];
                        }
                    }
                }
            }
            if sum > SUPPORT_TOL {
                for v in row.iter_mut() {
                    *v /= sum;
                }
            } else {
                row.fill(0.0);
                row[0] = 1.0;
            }
        }
    }
    Mechanism::observed(nx, ny, nu, k)
}

/// Discloses `X` alongside `base` with probability `alpha`: the output is
/// `(U, W)` where `W = X` with probability `alpha` and a constant symbol
/// otherwise, the coin being fresh randomness. Output symbol `(u, w)` is
/// indexed `u * (nx + 1) + w`, with `w = nx` the constant.
///
/// When the base has (near) zero leakage, the mixture's leakage is
/// `alpha * H(X)` within `1e-9`, and the residual `H(Y|X,U)` is unchanged.
pub fn mix_with_x(j: &JointDistribution, base: &Mechanism, alpha: f64) -> Result<Mechanism> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "mixing probability alpha = {alpha} is outside [0, 1]"
        )));
    }
    if base.nx() != j.nx() || base.ny() != j.ny() {
        return Err(Error::AlphabetMismatch {
            mech_nx: base.nx(),
            mech_ny: base.ny(),
            dist_nx: j.nx(),
            dist_ny: j.ny(),
        });
    }
    let base_leak = report(j, base)?.leakage;
    if base_leak > 1e-9 {
        return Err(Error::Precondition(format!(
            "mix_with_x needs a zero-leakage base, got I(X;U) = {base_leak:.3e}"
        )));
    }
    let (nx, ny, nu) = (j.nx(), j.ny(), base.nu());
    let wdim = nx + 1;
    let nu2 = nu * wdim;
    let mut k = vec![0.0; nx * ny * nu2];
    for x in 0..nx {
        for y in 0..ny {
            let src = base.row(x, y);
            let dst = &mut k[(x * ny + y) * nu2..(x * ny + y + 1) * nu2];
            for u in 0..nu {
                dst[u * wdim + x] = alpha * src[u];
                dst[u * wdim + nx] = (1.0 - alpha) * src[u];
            }
        }
    }
    Mechanism::observed(nx, ny, nu2, k)
}

/// Functional representation coupling with an exact leakage budget:
/// [`frl`] mixed with `X`-disclosure at rate `alpha = eps / H(X)`, so that
/// `I(X;U) = eps` exactly while `H(Y|X,U) = 0` is preserved. Output
/// cardinality is at most `(nx (ny - 1) + 1)(nx + 1)`.
pub fn efrl(j: &JointDistribution, eps: f64) -> Result<Mechanism> {
    let alpha = leakage_rate(j, eps)?;
    let base = frl(j)?;
    mix_with_x(j, &base, alpha)
}

/// Checks `0 <= eps < I(X;Y)` and converts the budget to a disclosure rate.
fn leakage_rate(j: &JointDistribution, eps: f64) -> Result<f64> {
    let mi = j.mutual_information();
    if !eps.is_finite() || eps < 0.0 || eps >= mi {
        return Err(Error::EpsOutOfRange {
            eps,
            mutual_information: mi,
        });
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    Ok(eps / j.entropy_x())
}

/// Result of [`sfrl_search`].
#[derive(Debug, Clone)]
pub struct SfrlOutcome {
    /// The best zero-leakage, zero-residual mechanism found.
    pub mechanism: Mechanism,
    /// Its conditional leakage `I(X;U|Y)`, the certified estimate of the
    /// excess functional information.
    pub psi_estimate: f64,
    /// True when some descent run stopped only because of `max_iters`.
    pub iteration_limit_hit: bool,
}

/// Minimizes the conditional leakage `I(X;U|Y)` over functional
/// representation couplings.
///
/// Because the objective is linear in the atom weights (see
/// [`FunctionAtomSpace::objective_coefficients`]), the exact optimum is a
/// vertex of the constraint polytope; the search combines one simplex solve,
/// full vertex enumeration when the basis count is small, projected gradient
/// descent from each vertex, and `restarts` random interior starts, then
/// certifies every candidate by measuring the built mechanism. The estimate
/// always satisfies `psi <= log2(I(X;Y) + 1) + 4`.
pub fn sfrl_search(j: &JointDistribution, cfg: &SearchConfig) -> Result<SfrlOutcome> {
    cfg.validate()?;
    let space = FunctionAtomSpace::new(j)?;
    let (a, b) = space.constraints();
    let c = space.objective_coefficients(j);
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();

    // Candidate weight vectors in a fixed order; ties in measured value
    // resolve to the earliest, so the exact simplex vertex wins them.
    let mut starts: Vec<Vec<f64>> = Vec::new();
    let lp = simplex::solve_min(&neg_c, a, b)
        .map_err(|e| Error::LinearProgram(format!("atom-weight program: {e}")))?;
    starts.push(lp.x.clone());

    let vertices = simplex::enumerate_basic_feasible(a, b, VERTEX_BUDGET);
    if let Some(vs) = &vertices {
        for v in vs {
            starts.push(v.clone());
        }
    }

    let projector = AffineProjector::new(a, b);
    let mut descent_starts: Vec<Vec<f64>> = Vec::new();
    match &vertices {
        Some(vs) => descent_starts.extend(vs.iter().take(MAX_VERTEX_STARTS).cloned()),
        None => {
            descent_starts.push(lp.x.clone());
            descent_starts.push(space.product_weights(j));
        }
    }
    for i in 0..cfg.restarts {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let mut w: Vec<f64> = (0..space.natoms())
            .map(|_| -(rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        descent_starts.push(projector.project(&w));
    }

    let mut limit_hit = false;
    for start in descent_starts {
        let (w, hit) = maximize_linear(&c, &start, &projector, cfg);
        limit_hit |= hit;
        starts.push(w);
    }

    // Certify: build each candidate and measure it; skip any whose
    // parametrization guarantees were lost to projection error.
    let mut best: Option<(f64, Mechanism)> = None;
    for w in &starts {
        let Ok(m) = space.mechanism(j, w) else { continue };
        let Ok(r) = report(j, &m) else { continue };
        if r.leakage > 1e-9 || r.residual > 1e-9 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bv, _)) => r.cond_leakage < bv - 1e-12,
        };
        if better {
            best = Some((r.cond_leakage, m));
        }
    }
    let (psi_estimate, mechanism) =
        best.ok_or_else(|| Error::LinearProgram("no feasible atom weights certified".into()))?;

    let cap = (j.mutual_information() + 1.0).log2() + 4.0;
    debug_assert!(psi_estimate <= cap + 1e-9);
    Ok(SfrlOutcome {
        mechanism,
        psi_estimate,
        iteration_limit_hit: limit_hit,
    })
}

/// Budgeted coupling that additionally minimizes conditional leakage: the
/// [`sfrl_search`] optimum mixed with `X`-disclosure at `alpha = eps/H(X)`.
/// Satisfies `I(X;U) = eps`, `H(Y|X,U) = 0`, and the mixture identity
/// `I(X;U|Y) = alpha H(X|Y) + (1 - alpha) psi_estimate`, which keeps it at
/// most `alpha H(X|Y) + (1 - alpha)(log2(I(X;Y) + 1) + 4)`.
pub fn esfrl(j: &JointDistribution, eps: f64, cfg: &SearchConfig) -> Result<Mechanism> {
    let alpha = leakage_rate(j, eps)?;
    let base = sfrl_search(j, cfg)?;
    mix_with_x(j, &base.mechanism, alpha)
}

/// Eliminates residual randomness: builds a refinement coupling `U'` for
/// the compound secret `(X, U)` against `Y`, and discloses `(U, U')`.
/// Leakage is unchanged (`U'` is independent of `(X, U)` jointly), the new
/// residual is zero, and utility never decreases; it strictly increases
/// whenever the old residual was positive. Mechanisms with residual at most
/// `1e-6` are returned unchanged.
pub fn improve(j: &JointDistribution, m: &Mechanism) -> Result<Mechanism> {
    let r = report(j, m)?;
    if r.residual <= 1e-6 {
        return Ok(m.clone());
    }
    let t = TripleDistribution::extend(j, m)?;
    let (nx, ny, nu) = (j.nx(), j.ny(), m.nu());

    // Joint law of ((X, U), Y), compound index x * nu + u.
    let mut pc = vec![0.0; nx * nu * ny];
    for x in 0..nx {
        for y in 0..ny {
            for u in 0..nu {
                pc[(x * nu + u) * ny + y] = t.q(x, y, u);
            }
        }
    }
    let compound = JointDistribution::new(nx * nu, ny, pc)?;
    let refiner = frl(&compound)?;
    let nu2 = refiner.nu();

    let nu_new = nu * nu2;
    let mut k = vec![0.0; nx * ny * nu_new];
    for x in 0..nx {
        for y in 0..ny {
            let old = m.row(x, y);
            let dst = &mut k[(x * ny + y) * nu_new..(x * ny + y + 1) * nu_new];
            for u in 0..nu {
                let fine = refiner.row(x * nu + u, y);
                for u2 in 0..nu2 {
                    dst[u * nu2 + u2] = old[u] * fine[u2];
                }
            }
        }
    }
    let out = Mechanism::observed(nx, ny, nu_new, k)?;
    Ok(out.compact(j))
}

/// Raises the leakage of a zero-residual Markov mechanism to exactly `eps`
/// by disclosing `Y` itself with probability
/// `alpha = (eps - leakage) / I(X;Y|U)` alongside it. The result has
/// leakage `eps` and utility exactly `eps + H(Y|X)`, the ceiling value.
/// Output symbol `(u, w)` is indexed `u * (ny + 1) + w`, with `w = ny` the
/// constant. A mechanism already at the budget is returned unchanged.
pub fn saturate_leakage(j: &JointDistribution, m: &Mechanism, eps: f64) -> Result<Mechanism> {
    if m.scenario() != Scenario::Hidden {
        return Err(Error::Precondition(
            "saturation needs a hidden-scenario mechanism (Markov chain X - Y - U)".into(),
        ));
    }
    let mi = j.mutual_information();
    if !eps.is_finite() || eps < 0.0 || eps >= mi {
        return Err(Error::EpsOutOfRange {
            eps,
            mutual_information: mi,
        });
    }
    let r = report(j, m)?;
    if r.residual > 1e-9 {
        return Err(Error::Precondition(format!(
            "saturation needs zero residual, got H(Y|X,U) = {:.3e}",
            r.residual
        )));
    }
    if r.leakage > eps + 1e-9 {
        return Err(Error::Precondition(format!(
            "mechanism already leaks {:.6} bits, above the budget {eps:.6}",
            r.leakage
        )));
    }
    if eps - r.leakage <= 1e-9 {
        return Ok(m.clone());
    }
    let t = TripleDistribution::extend(j, m)?;
    let room = t.cond_mi_xy_given_u();
    if room <= 1e-9 {
        return Err(Error::Precondition(format!(
            "I(X;Y|U) = {room:.3e} leaves no room to trade leakage for utility"
        )));
    }
    let alpha = (eps - r.leakage) / room;
    debug_assert!(alpha < 1.0 + 1e-9, "disclosure rate {alpha} escaped [0, 1)");
    let alpha = alpha.min(1.0);

    let (nx, ny, nu) = (j.nx(), j.ny(), m.nu());
    let wdim = ny + 1;
    let nu2 = nu * wdim;
    let mut rows = vec![0.0; ny * nu2];
    for y in 0..ny {
        let src = m.row(0, y);
        for u in 0..nu {
            rows[y * nu2 + u * wdim + y] = alpha * src[u];
            rows[y * nu2 + u * wdim + ny] = (1.0 - alpha) * src[u];
        }
    }
    Mechanism::hidden(nx, ny, nu2, rows)
}

/// Euclidean-style projection onto `{w >= 0 : A w = b}` by alternating
/// between the affine subspace (exact least-squares step through the
/// pseudo-inverse of the independent rows) and the nonnegative orthant.
struct AffineProjector {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Inverse of `A A^T` for the reduced system; `None` degenerates to
    /// clipping only (empty constraint set).
    aat_inv: Option<Vec<Vec<f64>>>,
}

impl AffineProjector {
    fn new(a: &[Vec<f64>], b: &[f64]) -> Self {
        let (ra, rb) = simplex::independent_rows(a, b);
        let r = ra.len();
        let mut aat = vec![vec![0.0; r]; r];
        for i in 0..r {
            for k in 0..r {
                aat[i][k] = dot(&ra[i], &ra[k]);
            }
        }
        let aat_inv = simplex::invert_small(&aat);
        Self {
            a: ra,
            b: rb,
            aat_inv,
        }
    }

    fn project_affine(&self, w: &mut [f64]) {
        let Some(inv) = &self.aat_inv else { return };
        let r = self.a.len();
        let resid: Vec<f64> = (0..r).map(|i| dot(&self.a[i], w) - self.b[i]).collect();
        let y: Vec<f64> = (0..r).map(|i| dot(&inv[i], &resid)).collect();
        for (i, row) in self.a.iter().enumerate() {
            let yi = y[i];
            if yi != 0.0 {
                for (wj, &aj) in w.iter_mut().zip(row) {
                    *wj -= yi * aj;
                }
            }
        }
    }

    fn project(&self, w: &[f64]) -> Vec<f64> {
        let mut w = w.to_vec();
        for _ in 0..200 {
            self.project_affine(&mut w);
            let mut clipped = false;
            for v in w.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    clipped = true;
                }
            }
            let resid = self
                .a
                .iter()
                .zip(&self.b)
                .map(|(row, &bv)| (dot(row, &w) - bv).abs())
                .fold(0.0, f64::max);
            if resid <= 1e-12 && !clipped {
                break;
            }
        }
        for v in w.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        w
    }
}

/// Projected gradient ascent of the linear objective `c . w` over the
/// constraint polytope, with step halving on non-improvement. Returns the
/// final point and whether the iteration cap stopped the run.
fn maximize_linear(
    c: &[f64],
    start: &[f64],
    projector: &AffineProjector,
    cfg: &SearchConfig,
) -> (Vec<f64>, bool) {
    let mut w = projector.project(start);
    let mut val = dot(c, &w);
    let mut step = cfg.step;
    let mut stall = 0u32;
    let mut iters = 0;
    for _ in 0..cfg.max_iters {
        iters += 1;
        let trial: Vec<f64> = w.iter().zip(c).map(|(wi, ci)| wi + step * ci).collect();
        let trial = projector.project(&trial);
        let tval = dot(c, &trial);
        if tval > val + 1e-15 {
            stall = if tval > val + cfg.tol { 0 } else { stall + 1 };
            w = trial;
            val = tval;
            step *= 1.25;
        } else {
            step *= 0.5;
            stall += 1;
            if step < 1e-12 {
                return (w, false);
            }
        }
        if stall >= 50 {
            return (w, false);
        }
    }
    (w, iters == cfg.max_iters)
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{family_bsc, family_erasure, family_function};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const H_02: f64 = 0.721928094887362348;
    const H_01: f64 = 0.468995593589281221;
    const PSI_BSC_02: f64 = 0.321928094887362348; // h(0.2) - 0.4

    fn random_joint(rng: &mut ChaCha20Rng, nx: usize, ny: usize) -> JointDistribution {
        let mut p: Vec<f64> = (0..nx * ny).map(|_| -(rng.gen::<f64>()).ln()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        JointDistribution::new(nx, ny, p).unwrap()
    }

    #[test]
    fn frl_on_bsc_has_three_symbols_with_known_weights() {
        let j = family_bsc(0.2).unwrap();
        let m = frl(&j).unwrap();
        assert_eq!(m.nu(), 3);
        let r = report(&j, &m).unwrap();
        assert!(r.leakage <= 1e-9);
        assert!(r.residual <= 1e-9);
        // Interval refinement at breakpoints {0.2, 0.8}: weights 0.2/0.6/0.2.
        let t = TripleDistribution::extend(&j, &m).unwrap();
        let pu = t.marginal_u();
        assert_abs_diff_eq!(pu[0], 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(pu[1], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(pu[2], 0.2, epsilon = 1e-9);
        assert!(r.entropy_u <= j.sum_conditional_entropies() + 1e-9);
    }

    #[test]
    fn frl_on_independent_pair_collapses_to_y() {
        let j = JointDistribution::new(2, 2, vec![0.25; 4]).unwrap();
        let m = frl(&j).unwrap();
        assert_eq!(m.nu(), 2);
        let r = report(&j, &m).unwrap();
        assert_abs_diff_eq!(r.utility, 1.0, epsilon = 1e-9);
        assert!(r.leakage <= 1e-9);
    }

    #[test]
    fn frl_contracts_hold_on_random_joints() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for _ in 0..60 {
            let nx = rng.gen_range(2..=4);
            let ny = rng.gen_range(2..=4);
            let j = random_joint(&mut rng, nx, ny);
            let m = frl(&j).unwrap();
            let r = report(&j, &m).unwrap();
            assert!(r.leakage <= 1e-9, "leakage {}", r.leakage);
            assert!(r.residual <= 1e-9, "residual {}", r.residual);
            assert!(m.nu() <= nx * (ny - 1) + 1);
            assert!(r.entropy_u <= j.sum_conditional_entropies() + 1e-9);
        }
    }

    #[test]
    fn efrl_hits_the_budget_exactly() {
        let j = family_bsc(0.2).unwrap();
        let m = efrl(&j, 0.1).unwrap();
        let r = report(&j, &m).unwrap();
        assert_abs_diff_eq!(r.leakage, 0.1, epsilon = 1e-9);
        assert!(r.residual <= 1e-9);
        assert_eq!(m.nu(), 9); // 3 base symbols times (nx + 1)
        // Entropy cap: sum_x H(Y|X=x) + eps + h(alpha).
        assert!(r.entropy_u <= 2.0 * H_02 + 0.1 + H_01 + 1e-9);
        // Utility stays above eps + H(Y|X) - H(X|Y) = 0.1 for the BSC.
        assert!(r.utility >= 0.1 - 1e-9);
    }

    #[test]
    fn efrl_with_zero_budget_matches_the_base_coupling() {
        let j = family_bsc(0.2).unwrap();
        let base = report(&j, &frl(&j).unwrap()).unwrap();
        let m = efrl(&j, 0.0).unwrap();
        let r = report(&j, &m).unwrap();
        assert_abs_diff_eq!(r.utility, base.utility, epsilon = 1e-9);
        assert_abs_diff_eq!(r.leakage, base.leakage, epsilon = 1e-9);
        assert_abs_diff_eq!(r.cond_leakage, base.cond_leakage, epsilon = 1e-9);
    }

    #[test]
    fn efrl_rejects_out_of_range_budgets() {
        let j = family_bsc(0.2).unwrap();
        assert!(matches!(
            efrl(&j, 0.5),
            Err(Error::EpsOutOfRange { .. })
        ));
        assert!(matches!(efrl(&j, -0.1), Err(Error::EpsOutOfRange { .. })));
    }

    #[test]
    fn mix_with_x_requires_a_zero_leakage_base() {
        let j = family_bsc(0.2).unwrap();
        let leaky = Mechanism::identity_y(2, 2); // leaks I(X;Y) > 0
        assert!(matches!(
            mix_with_x(&j, &leaky, 0.3),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            mix_with_x(&j, &frl(&j).unwrap(), 1.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sfrl_search_certifies_the_bsc_optimum() {
        let j = family_bsc(0.2).unwrap();
        let cfg = SearchConfig {
            restarts: 2,
            ..Default::default()
        };
        let out = sfrl_search(&j, &cfg).unwrap();
        assert_abs_diff_eq!(out.psi_estimate, PSI_BSC_02, epsilon = 1e-9);
        let r = report(&j, &out.mechanism).unwrap();
        assert!(r.leakage <= 1e-9);
        assert!(r.residual <= 1e-9);
        assert!(out.mechanism.nu() <= 2 * (2 - 1) + 2);
    }

    #[test]
    fn sfrl_search_is_deterministic() {
        let j = family_erasure(0.3).unwrap();
        let cfg = SearchConfig {
            restarts: 3,
            ..Default::default()
        };
        let a = sfrl_search(&j, &cfg).unwrap();
        let b = sfrl_search(&j, &cfg).unwrap();
        assert_eq!(a.psi_estimate.to_bits(), b.psi_estimate.to_bits());
        assert_eq!(a.mechanism.kernel(), b.mechanism.kernel());
    }

    #[test]
    fn sfrl_vanishes_when_x_determines_nothing_extra() {
        // X a function of Y: any zero-leakage coupling already has
        // I(X;U|Y) <= H(X|Y) = 0.
        let j = family_function(&[0, 1, 0, 1]).unwrap();
        let out = sfrl_search(&j, &SearchConfig::default()).unwrap();
        assert!(out.psi_estimate <= 1e-9);
    }

    #[test]
    fn esfrl_satisfies_the_mixture_identity() {
        let j = family_bsc(0.2).unwrap();
        let cfg = SearchConfig::default();
        let m = esfrl(&j, 0.1, &cfg).unwrap();
        let r = report(&j, &m).unwrap();
        assert_abs_diff_eq!(r.leakage, 0.1, epsilon = 1e-9);
        assert!(r.residual <= 1e-9);
        // I(X;U|Y) = alpha H(X|Y) + (1 - alpha) psi with alpha = 0.1.
        assert_abs_diff_eq!(
            r.cond_leakage,
            0.1 * H_02 + 0.9 * PSI_BSC_02,
            epsilon = 1e-9
        );
        let mi = j.mutual_information();
        assert!(r.cond_leakage <= 0.1 * H_02 + 0.9 * ((mi + 1.0).log2() + 4.0) + 1e-9);
    }

    #[test]
    fn mixture_identity_holds_on_random_joints() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let cfg = SearchConfig {
            restarts: 1,
            ..Default::default()
        };
        for _ in 0..10 {
            let j = random_joint(&mut rng, 3, 2);
            let base = sfrl_search(&j, &cfg).unwrap();
            let base_r = report(&j, &base.mechanism).unwrap();
            let alpha = 0.37;
            let m = mix_with_x(&j, &base.mechanism, alpha).unwrap();
            let r = report(&j, &m).unwrap();
            let want = alpha * j.entropy_x_given_y() + (1.0 - alpha) * base_r.cond_leakage;
            assert_abs_diff_eq!(r.cond_leakage, want, epsilon = 1e-9);
            assert_abs_diff_eq!(r.leakage, alpha * j.entropy_x(), epsilon = 1e-9);
        }
    }

    #[test]
    fn improve_leaves_clean_mechanisms_alone() {
        let j = family_bsc(0.2).unwrap();
        let m = frl(&j).unwrap();
        let m2 = improve(&j, &m).unwrap();
        assert_eq!(m.kernel(), m2.kernel());
    }

    #[test]
    fn improve_on_constant_recovers_the_refinement_coupling() {
        let j = family_bsc(0.2).unwrap();
        let constant = Mechanism::constant(2, 2, Scenario::Hidden);
        let m = improve(&j, &constant).unwrap();
        let r = report(&j, &m).unwrap();
        let want = report(&j, &frl(&j).unwrap()).unwrap();
        assert!(r.leakage <= 1e-9);
        assert!(r.residual <= 1e-9);
        assert_abs_diff_eq!(r.utility, want.utility, epsilon = 1e-9);
    }

    #[test]
    fn improve_strictly_gains_utility_and_keeps_leakage() {
        // Merge y in {0, e} of the erasure pair: positive residual, and a
        // leaky disclosure since P(y = 1 | x) depends on x.
        let j = family_erasure(0.3).unwrap();
        let rows = vec![
            1.0, 0.0, // y = 0 -> u = 0
            1.0, 0.0, // y = e -> u = 0
            0.0, 1.0, // y = 1 -> u = 1
        ];
        let m = Mechanism::hidden(2, 3, 2, rows).unwrap();
        let before = report(&j, &m).unwrap();
        assert!(before.residual > 1e-3);
        let m2 = improve(&j, &m).unwrap();
        let after = report(&j, &m2).unwrap();
        assert_abs_diff_eq!(after.leakage, before.leakage, epsilon = 1e-9);
        assert!(after.residual <= 1e-9);
        assert!(after.utility > before.utility + 1e-6);
    }

    #[test]
    fn saturate_reaches_the_ceiling_on_functional_pairs() {
        let j = family_function(&[0, 1, 0, 1]).unwrap();
        let pp = crate::perfect_privacy::g0(&j).unwrap();
        let eps = 0.4;
        let m = saturate_leakage(&j, &pp.mechanism, eps).unwrap();
        let r = report(&j, &m).unwrap();
        assert_abs_diff_eq!(r.leakage, eps, epsilon = 1e-9);
        assert_abs_diff_eq!(r.utility, eps + j.entropy_y_given_x(), epsilon = 1e-9);
        assert_eq!(m.scenario(), Scenario::Hidden);
    }

    #[test]
    fn saturate_returns_unchanged_at_the_budget() {
        let j = family_function(&[0, 1, 0, 1]).unwrap();
        let pp = crate::perfect_privacy::g0(&j).unwrap();
        let m = saturate_leakage(&j, &pp.mechanism, 0.0).unwrap();
        assert_eq!(m.kernel(), pp.mechanism.kernel());
    }

    #[test]
    fn saturate_rejects_bad_inputs() {
        let j = family_bsc(0.2).unwrap();
        // Residual is positive for the constant mechanism.
        let constant = Mechanism::constant(2, 2, Scenario::Hidden);
        assert!(matches!(
            saturate_leakage(&j, &constant, 0.1),
            Err(Error::Precondition(_))
        ));
        // Observed-scenario mechanisms are rejected outright.
        let observed = frl(&j).unwrap();
        assert!(matches!(
            saturate_leakage(&j, &observed, 0.1),
            Err(Error::Precondition(_))
        ));
        // Budget outside [0, I(X;Y)).
        let pp = crate::perfect_privacy::g0(&j).unwrap();
        assert!(matches!(
            saturate_leakage(&j, &pp.mechanism, 0.9),
            Err(Error::EpsOutOfRange { .. })
        ));
    }

    #[test]
    fn saturate_errors_when_no_room_is_left() {
        // X = Y: disclosing Y already leaks I(X;Y), so with a budget just
        // inside the valid range every precondition holds except the room
        // I(X;Y|U) > 0.
        let j = JointDistribution::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let m = Mechanism::identity_y(2, 2);
        let eps = 1.0 - 1e-10;
        match saturate_leakage(&j, &m, eps) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("room"), "got {msg}"),
            other => panic!("expected the no-room precondition, got {other:?}"),
        }
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let j = family_bsc(0.2).unwrap();
        let bad = SearchConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(sfrl_search(&j, &bad).is_err());
        let bad = SearchConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(sfrl_search(&j, &bad).is_err());
    }
}
