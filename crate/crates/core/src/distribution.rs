//! Joint distributions, disclosure mechanisms, and Shannon measures.
//!
//! Everything downstream works with three value types:
//!
//! * [`JointDistribution`]: a finite joint law `P_{XY}` stored row-major,
//!   `x` indexing rows and `y` columns.
//! * [`Mechanism`]: a conditional kernel `P_{U|XY}` with one probability row
//!   per `(x, y)` pair, tagged with the [`Scenario`] that produced it. In the
//!   hidden scenario the rows for a fixed `y` are identical across `x`, which
//!   is exactly the Markov chain `X - Y - U`.
//! * [`TripleDistribution`]: the joint law of `(X, Y, U)` obtained by
//!   composing the two, from which every information measure is evaluated.
//!
//! All logarithms are base 2 and all measures are in bits. The conventions
//! `0 * log 0 = 0` and "probability-zero conditioning events contribute 0"
//! are applied throughout, and mutual informations that come out a hair
//! negative from rounding are clamped to 0 after a `-1e-12` sanity check.

use crate::{Error, Result};

/// Loader tolerance: tables are accepted when entries are nonnegative and the
/// total (or each kernel row) sums to 1 within this, then renormalized.
pub const LOAD_SUM_TOL: f64 = 1e-6;

/// Tolerance for internally constructed probability rows.
const ROW_SUM_TOL: f64 = 1e-9;

/// Entropy of a probability vector in bits, with `0 * log 0 = 0`.
///
/// Entries at or below zero contribute nothing; the caller is expected to
/// pass a (possibly unnormalized-by-rounding) probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.log2();
        }
    }
    // A lone entry like 1.0 + 1e-16 can push the sum infinitesimally negative.
    h.max(0.0)
}

/// Binary entropy `h(a) = -a log a - (1-a) log(1-a)` in bits.
pub fn binary_entropy(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!(
            "binary entropy argument {a} is outside [0, 1]"
        )));
    }
    Ok(entropy(&[a, 1.0 - a]))
}

/// Mutual information of a two-dimensional joint table (in nats of layout:
/// `p[i * n2 + j]`), clamped to 0 after a `-1e-12` sanity check.
fn mutual_information_table(p: &[f64], n1: usize, n2: usize) -> f64 {
    let mut m1 = vec![0.0; n1];
    let mut m2 = vec![0.0; n2];
    for i in 0..n1 {
        for j in 0..n2 {
            let v = p[i * n2 + j];
            m1[i] += v;
            m2[j] += v;
        }
    }
    let mi = entropy(&m1) + entropy(&m2) - entropy(p);
    debug_assert!(mi > -1e-12, "mutual information {mi} below rounding floor");
    mi.max(0.0)
}

/// A joint distribution of `(X, Y)` over `{0..nx} x {0..ny}`.
///
/// Entries are nonnegative and sum to 1 (renormalized at construction when
/// the raw total is within [`LOAD_SUM_TOL`] of 1).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    nx: usize,
    ny: usize,
    p: Vec<f64>,
}

impl JointDistribution {
    /// Builds a joint distribution from a row-major table.
    pub fn new(nx: usize, ny: usize, p: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidDistribution(
                "alphabet sizes must be at least 1".into(),
            ));
        }
        if p.len() != nx * ny {
            return Err(Error::InvalidDistribution(format!(
                "expected {} entries for a {}x{} table, got {}",
                nx * ny,
                nx,
                ny,
                p.len()
            )));
        }
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is not finite"
                )));
            }
            if v < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "negative entry {v} at index {i}"
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > LOAD_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, outside 1 +/- {LOAD_SUM_TOL}"
            )));
        }
        let p = p.into_iter().map(|v| v / sum).collect();
        Ok(Self { nx, ny, p })
    }

    /// Parses the `pxy` text format:
    ///
    /// ```text
    /// # optional comment lines
    /// pxy <nx> <ny>
    /// <ny entries>     (nx rows, whitespace separated)
    /// ```
    ///
    /// Errors carry 1-based line numbers.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = significant_lines(text);
        let (header_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing 'pxy <nx> <ny>' header".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "pxy" {
            return Err(Error::Parse {
                line: header_no,
                message: format!("expected 'pxy <nx> <ny>' header, got '{header}'"),
            });
        }
        let nx = parse_usize(toks[1], header_no)?;
        let ny = parse_usize(toks[2], header_no)?;
        if nx == 0 || ny == 0 {
            return Err(Error::Parse {
                line: header_no,
                message: "alphabet sizes must be at least 1".into(),
            });
        }
        let mut p = Vec::with_capacity(nx * ny);
        for row in 0..nx {
            let (line_no, line) = lines.next().ok_or(Error::Parse {
                line: header_no,
                message: format!("expected {nx} probability rows, found {row}"),
            })?;
            let entries = parse_row(line, line_no, ny)?;
            p.extend(entries);
        }
        if let Some((line_no, line)) = lines.next() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unexpected trailing content '{line}'"),
            });
        }
        Self::new(nx, ny, p).map_err(|e| Error::Parse {
            line: header_no,
            message: e.to_string(),
        })
    }

    /// Renders the table in the `pxy` text format with full float precision.
    pub fn to_text(&self) -> String {
        let mut out = format!("pxy {} {}\n", self.nx, self.ny);
        for x in 0..self.nx {
            let row: Vec<String> = (0..self.ny).map(|y| format!("{}", self.p(x, y))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// `P(X = x, Y = y)`.
    pub fn p(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.ny + y]
    }

    /// The full table, row-major.
    pub fn table(&self) -> &[f64] {
        &self.p
    }

    /// Marginal law of `X`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nx];
        for x in 0..self.nx {
            for y in 0..self.ny {
                m[x] += self.p(x, y);
            }
        }
        m
    }

    /// Marginal law of `Y`.
    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                m[y] += self.p(x, y);
            }
        }
        m
    }

    pub fn entropy_x(&self) -> f64 {
        entropy(&self.marginal_x())
    }

    pub fn entropy_y(&self) -> f64 {
        entropy(&self.marginal_y())
    }

    /// `H(Y|X)` as the joint-minus-marginal difference, clamped at 0.
    pub fn entropy_y_given_x(&self) -> f64 {
        (entropy(&self.p) - self.entropy_x()).max(0.0)
    }

    /// `H(X|Y)`, clamped at 0.
    pub fn entropy_x_given_y(&self) -> f64 {
        (entropy(&self.p) - self.entropy_y()).max(0.0)
    }

    /// `H(Y|X = x)`; 0 when `P(x) = 0`.
    pub fn entropy_y_given_x_at(&self, x: usize) -> f64 {
        let px: f64 = (0..self.ny).map(|y| self.p(x, y)).sum();
        if px <= 0.0 {
            return 0.0;
        }
        let row: Vec<f64> = (0..self.ny).map(|y| self.p(x, y) / px).collect();
        entropy(&row)
    }

    /// `sum_x H(Y|X = x)`, the alphabet-entropy budget of refinement
    /// couplings (note: not `H(Y|X)`, the sum is unweighted).
    pub fn sum_conditional_entropies(&self) -> f64 {
        (0..self.nx).map(|x| self.entropy_y_given_x_at(x)).sum()
    }

    /// `max_x H(Y|X = x)` over `x` with `P(x) > 0`.
    pub fn max_conditional_entropy(&self) -> f64 {
        let px = self.marginal_x();
        (0..self.nx)
            .filter(|&x| px[x] > 0.0)
            .map(|x| self.entropy_y_given_x_at(x))
            .fold(0.0, f64::max)
    }

    /// `I(X;Y)` in bits, clamped to 0 after a `-1e-12` sanity check.
    pub fn mutual_information(&self) -> f64 {
        mutual_information_table(&self.p, self.nx, self.ny)
    }

    /// `P_{Y|X}(. | x)` as a probability row; uniform-free zero row when
    /// `P(x) = 0` (all zeros, callers treat such rows as inactive).
    pub fn conditional_row(&self, x: usize) -> Vec<f64> {
        let px: f64 = (0..self.ny).map(|y| self.p(x, y)).sum();
        if px <= 0.0 {
            return vec![0.0; self.ny];
        }
        (0..self.ny).map(|y| self.p(x, y) / px).collect()
    }
}

/// Which data the mechanism reads when generating `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// `U` is generated from `Y` alone; the chain `X - Y - U` holds and the
    /// kernel rows for a fixed `y` are identical across `x`.
    Hidden,
    /// `U` is generated from the pair `(X, Y)`.
    Observed,
}

/// A disclosure kernel `P_{U|XY}` with `nu` output symbols.
///
/// Rows are indexed by `x * ny + y` and each row is a probability vector
/// over `u`. Rows attached to probability-zero `(x, y)` pairs are irrelevant
/// to every measure but are still kept normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    nu: usize,
    nx: usize,
    ny: usize,
    scenario: Scenario,
    k: Vec<f64>,
}

impl Mechanism {
    /// Builds an observed-scenario kernel from rows indexed `x * ny + y`.
    pub fn observed(nx: usize, ny: usize, nu: usize, k: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(nx, ny, nu, Scenario::Observed, k, ROW_SUM_TOL)
    }

    /// Builds a hidden-scenario kernel from `ny` rows over `u`, replicated
    /// across `x` so the Markov chain `X - Y - U` holds by construction.
    pub fn hidden(nx: usize, ny: usize, nu: usize, rows_by_y: Vec<f64>) -> Result<Self> {
        if rows_by_y.len() != ny * nu {
            return Err(Error::InvalidMechanism(format!(
                "expected {} entries for {} hidden rows of width {}, got {}",
                ny * nu,
                ny,
                nu,
                rows_by_y.len()
            )));
        }
        let mut k = Vec::with_capacity(nx * ny * nu);
        for _x in 0..nx {
            k.extend_from_slice(&rows_by_y);
        }
        Self::with_tolerance(nx, ny, nu, Scenario::Hidden, k, ROW_SUM_TOL)
    }

    fn with_tolerance(
        nx: usize,
        ny: usize,
        nu: usize,
        scenario: Scenario,
        mut k: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || nu == 0 {
            return Err(Error::InvalidMechanism(
                "alphabet sizes must be at least 1".into(),
            ));
        }
        if k.len() != nx * ny * nu {
            return Err(Error::InvalidMechanism(format!(
                "expected {} kernel entries, got {}",
                nx * ny * nu,
                k.len()
            )));
        }
        for row in 0..nx * ny {
            let slice = &mut k[row * nu..(row + 1) * nu];
            let mut sum = 0.0;
            for v in slice.iter_mut() {
                if !v.is_finite() {
                    return Err(Error::InvalidMechanism(format!(
                        "non-finite entry in row {row}"
                    )));
                }
                if *v < 0.0 {
                    if *v < -1e-12 {
                        return Err(Error::InvalidMechanism(format!(
                            "negative entry {v} in row {row}"
                        )));
                    }
                    *v = 0.0;
                }
                sum += *v;
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::InvalidMechanism(format!(
                    "row {row} sums to {sum}, outside 1 +/- {tol}"
                )));
            }
            for v in slice.iter_mut() {
                *v /= sum;
            }
        }
        let m = Self {
            nu,
            nx,
            ny,
            scenario,
            k,
        };
        if scenario == Scenario::Hidden {
            if let Some(msg) = m.hidden_violation(1e-9) {
                return Err(Error::InvalidMechanism(msg));
            }
        }
        Ok(m)
    }

    /// The constant mechanism: a single output symbol, zero leakage and zero
    /// utility in either scenario.
    pub fn constant(nx: usize, ny: usize, scenario: Scenario) -> Self {
        Self {
            nu: 1,
            nx,
            ny,
            scenario,
            k: vec![1.0; nx * ny],
        }
    }

    /// The full-disclosure hidden mechanism `U = Y`.
    pub fn identity_y(nx: usize, ny: usize) -> Self {
        let mut rows = vec![0.0; ny * ny];
        for y in 0..ny {
            rows[y * ny + y] = 1.0;
        }
        Self::hidden(nx, ny, ny, rows).expect("identity rows are valid")
    }

    /// Parses the `puxy` text format:
    ///
    /// ```text
    /// # optional comment lines
    /// puxy <nu> <nx> <ny>
    /// <nu entries>     (nx * ny rows, row index x * ny + y)
    /// ```
    ///
    /// Each row must sum to 1 within [`LOAD_SUM_TOL`]; the scenario tag is
    /// inferred: if for every `y` the rows agree across `x` within `1e-9`
    /// the kernel is marked hidden, otherwise observed.
    pub fn from_text(text: &str) -> Result<Self> {
        let (nx, ny, nu, k, header_no) = parse_puxy(text, false)?;
        let mut m = Self::with_tolerance(nx, ny, nu, Scenario::Observed, k, LOAD_SUM_TOL)
            .map_err(|e| Error::Parse {
                line: header_no,
                message: e.to_string(),
            })?;
        if m.hidden_violation(1e-9).is_none() {
            m.scenario = Scenario::Hidden;
        }
        Ok(m)
    }

    /// Parses the `puxy` format without probability validation. Used by the
    /// diagnostic path of the CLI so that a corrupted kernel can be loaded
    /// and then reported against the invariant checks.
    pub fn from_text_lenient(text: &str) -> Result<Self> {
        let (nx, ny, nu, k, _) = parse_puxy(text, true)?;
        let mut m = Self {
            nu,
            nx,
            ny,
            scenario: Scenario::Observed,
            k,
        };
        if m.hidden_violation(1e-9).is_none() {
            m.scenario = Scenario::Hidden;
        }
        Ok(m)
    }

    /// Renders the kernel in the `puxy` text format with full float
    /// precision (so that a written file reloads within tolerance for any
    /// output alphabet size).
    pub fn to_text(&self) -> String {
        let mut out = format!("puxy {} {} {}\n", self.nu, self.nx, self.ny);
        for row in 0..self.nx * self.ny {
            let cells: Vec<String> = self.k[row * self.nu..(row + 1) * self.nu]
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// The probability row `P_{U|XY}(. | x, y)`.
    pub fn row(&self, x: usize, y: usize) -> &[f64] {
        let r = x * self.ny + y;
        &self.k[r * self.nu..(r + 1) * self.nu]
    }

    /// Raw kernel, rows indexed `x * ny + y`.
    pub fn kernel(&self) -> &[f64] {
        &self.k
    }

    /// Returns a copy with `extra` all-zero output columns appended; the
    /// added symbols have probability zero everywhere so no measure changes.
    pub fn pad_to(&self, card: usize) -> Self {
        if card <= self.nu {
            return self.clone();
        }
        let mut k = vec![0.0; self.nx * self.ny * card];
        for row in 0..self.nx * self.ny {
            k[row * card..row * card + self.nu]
                .copy_from_slice(&self.k[row * self.nu..(row + 1) * self.nu]);
        }
        Self {
            nu: card,
            nx: self.nx,
            ny: self.ny,
            scenario: self.scenario,
            k,
        }
    }

    /// Drops output symbols with zero probability under `j` and renumbers
    /// the rest in increasing order. The report of the compacted mechanism
    /// is identical to the original's.
    pub fn compact(&self, j: &JointDistribution) -> Self {
        let t = match TripleDistribution::extend(j, self) {
            Ok(t) => t,
            Err(_) => return self.clone(),
        };
        let pu = t.marginal_u();
        let keep: Vec<usize> = (0..self.nu).filter(|&u| pu[u] > 1e-15).collect();
        if keep.is_empty() || keep.len() == self.nu {
            return self.clone();
        }
        let mut k = Vec::with_capacity(self.nx * self.ny * keep.len());
        for row in 0..self.nx * self.ny {
            let old = &self.k[row * self.nu..(row + 1) * self.nu];
            let mut new_row: Vec<f64> = keep.iter().map(|&u| old[u]).collect();
            let sum: f64 = new_row.iter().sum();
            if sum > 0.0 {
                for v in new_row.iter_mut() {
                    *v /= sum;
                }
            } else {
                new_row[0] = 1.0;
            }
            k.extend(new_row);
        }
        Self {
            nu: keep.len(),
            nx: self.nx,
            ny: self.ny,
            scenario: self.scenario,
            k,
        }
    }

    /// `None` if rows for each `y` agree across `x` within `tol`, otherwise
    /// a description of the first violation.
    fn hidden_violation(&self, tol: f64) -> Option<String> {
        for y in 0..self.ny {
            let first = self.row(0, y);
            for x in 1..self.nx {
                let r = self.row(x, y);
                for u in 0..self.nu {
                    if (r[u] - first[u]).abs() > tol {
                        return Some(format!(
                            "hidden scenario requires identical rows per y; rows (0,{y}) and ({x},{y}) differ at u={u}"
                        ));
                    }
                }
            }
        }
        None
    }

    /// Invariant violations as human-readable strings: nonnegative finite
    /// entries, row sums within [`LOAD_SUM_TOL`], and per-`y` row agreement
    /// for hidden kernels. Empty means the kernel is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for row in 0..self.nx * self.ny {
            let slice = &self.k[row * self.nu..(row + 1) * self.nu];
            let mut sum = 0.0;
            for (u, &v) in slice.iter().enumerate() {
                if !v.is_finite() {
                    out.push(format!("entry ({row},{u}) is not finite"));
                    return out;
                }
                if v < -1e-12 {
                    out.push(format!("negative entry {v} at row {row}, u {u}"));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > LOAD_SUM_TOL {
                out.push(format!("row {row} sums to {sum}, outside 1 +/- {LOAD_SUM_TOL}"));
            }
        }
        if self.scenario == Scenario::Hidden {
            if let Some(msg) = self.hidden_violation(1e-9) {
                out.push(msg);
            }
        }
        out
    }
}

fn parse_puxy(text: &str, lenient: bool) -> Result<(usize, usize, usize, Vec<f64>, usize)> {
    let mut lines = significant_lines(text);
    let (header_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing 'puxy <nu> <nx> <ny>' header".into(),
    })?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "puxy" {
        return Err(Error::Parse {
            line: header_no,
            message: format!("expected 'puxy <nu> <nx> <ny>' header, got '{header}'"),
        });
    }
    let nu = parse_usize(toks[1], header_no)?;
    let nx = parse_usize(toks[2], header_no)?;
    let ny = parse_usize(toks[3], header_no)?;
    if nu == 0 || nx == 0 || ny == 0 {
        return Err(Error::Parse {
            line: header_no,
            message: "alphabet sizes must be at least 1".into(),
        });
    }
    let mut k = Vec::with_capacity(nx * ny * nu);
    for row in 0..nx * ny {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: header_no,
            message: format!("expected {} kernel rows, found {row}", nx * ny),
        })?;
        let entries = if lenient {
            parse_row_lenient(line, line_no, nu)?
        } else {
            parse_row(line, line_no, nu)?
        };
        k.extend(entries);
    }
    if let Some((line_no, line)) = lines.next() {
        return Err(Error::Parse {
            line: line_no,
            message: format!("unexpected trailing content '{line}'"),
        });
    }
    Ok((nx, ny, nu, k, header_no))
}

/// Lines with content, skipping blanks and `#` comments, with 1-based
/// numbering preserved.
fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected a nonnegative integer, got '{tok}'"),
    })
}

fn parse_row(line: &str, line_no: usize, width: usize) -> Result<Vec<f64>> {
    let entries = parse_row_lenient(line, line_no, width)?;
    for &v in &entries {
        if v < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("negative entry {v}"),
            });
        }
    }
    Ok(entries)
}

fn parse_row_lenient(line: &str, line_no: usize, width: usize) -> Result<Vec<f64>> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != width {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {width} entries, got {}", toks.len()),
        });
    }
    toks.iter()
        .map(|t| {
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("expected a number, got '{t}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite entry '{t}'"),
                });
            }
            Ok(v)
        })
        .collect()
}

/// The joint law of `(X, Y, U)` induced by a distribution and a mechanism.
#[derive(Debug, Clone)]
pub struct TripleDistribution {
    nx: usize,
    ny: usize,
    nu: usize,
    /// `q[(x * ny + y) * nu + u] = P(x, y) * P(u | x, y)`.
    q: Vec<f64>,
}

impl TripleDistribution {
    /// Composes `q(x, y, u) = p(x, y) k(u | x, y)`.
    pub fn extend(j: &JointDistribution, m: &Mechanism) -> Result<Self> {
        if j.nx() != m.nx() || j.ny() != m.ny() {
            return Err(Error::AlphabetMismatch {
                mech_nx: m.nx(),
                mech_ny: m.ny(),
                dist_nx: j.nx(),
                dist_ny: j.ny(),
            });
        }
        let (nx, ny, nu) = (j.nx(), j.ny(), m.nu());
        let mut q = vec![0.0; nx * ny * nu];
        for x in 0..nx {
            for y in 0..ny {
                let pxy = j.p(x, y);
                if pxy == 0.0 {
                    continue;
                }
                let row = m.row(x, y);
                for u in 0..nu {
                    q[(x * ny + y) * nu + u] = pxy * row[u];
                }
            }
        }
        Ok(Self { nx, ny, nu, q })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn q(&self, x: usize, y: usize, u: usize) -> f64 {
        self.q[(x * self.ny + y) * self.nu + u]
    }

    pub fn marginal_u(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nu];
        for (i, &v) in self.q.iter().enumerate() {
            m[i % self.nu] += v;
        }
        m
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nx];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for u in 0..self.nu {
                    m[x] += self.q(x, y, u);
                }
            }
        }
        m
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for u in 0..self.nu {
                    m[y] += self.q(x, y, u);
                }
            }
        }
        m
    }

    /// Joint `(X, U)` table, layout `x * nu + u`.
    pub fn marginal_xu(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nx * self.nu];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for u in 0..self.nu {
                    m[x * self.nu + u] += self.q(x, y, u);
                }
            }
        }
        m
    }

    /// Joint `(Y, U)` table, layout `y * nu + u`.
    pub fn marginal_yu(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ny * self.nu];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for u in 0..self.nu {
                    m[y * self.nu + u] += self.q(x, y, u);
                }
            }
        }
        m
    }

    /// Joint `(X, Y)` table, layout `x * ny + y`.
    pub fn marginal_xy(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nx * self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for u in 0..self.nu {
                    m[x * self.ny + y] += self.q(x, y, u);
                }
            }
        }
        m
    }

    /// `I(X;U)` in bits.
    pub fn leakage(&self) -> f64 {
        mutual_information_table(&self.marginal_xu(), self.nx, self.nu)
    }

    /// `I(Y;U)` in bits.
    pub fn utility(&self) -> f64 {
        mutual_information_table(&self.marginal_yu(), self.ny, self.nu)
    }

    /// `I(X;U|Y)` as the weighted sum over `y` of per-slice mutual
    /// informations, probability-zero slices contributing 0.
    pub fn cond_mi_xu_given_y(&self) -> f64 {
        let py = self.marginal_y();
        let mut total = 0.0;
        for y in 0..self.ny {
            if py[y] <= 0.0 {
                continue;
            }
            let mut slice = vec![0.0; self.nx * self.nu];
            for x in 0..self.nx {
                for u in 0..self.nu {
                    slice[x * self.nu + u] = self.q(x, y, u) / py[y];
                }
            }
            total += py[y] * mutual_information_table(&slice, self.nx, self.nu);
        }
        total
    }

    /// `I(X;Y|U) = H(X,U) + H(Y,U) - H(U) - H(X,Y,U)`, clamped at 0.
    pub fn cond_mi_xy_given_u(&self) -> f64 {
        let v = entropy(&self.marginal_xu()) + entropy(&self.marginal_yu())
            - entropy(&self.marginal_u())
            - entropy(&self.q);
        debug_assert!(v > -1e-9, "I(X;Y|U) = {v} below rounding floor");
        v.max(0.0)
    }

    /// `H(Y|X,U) = H(X,Y,U) - H(X,U)`, clamped at 0.
    pub fn residual(&self) -> f64 {
        (entropy(&self.q) - entropy(&self.marginal_xu())).max(0.0)
    }
}

/// `I(X;U|Y)` of a triple; the per-`y` decomposition.
pub fn conditional_mutual_information(t: &TripleDistribution) -> f64 {
    t.cond_mi_xu_given_y()
}

/// All scalar measures of a mechanism against a distribution.
///
/// The fields satisfy the decomposition
/// `utility = leakage + H(Y|X) - residual - cond_leakage` within `1e-9`,
/// which is the identity
/// `I(Y;U) = I(X;U) + H(Y|X) - H(Y|U,X) - I(X;U|Y)`.
#[derive(Debug, Clone)]
pub struct MechanismReport {
    /// `I(Y;U)` in bits.
    pub utility: f64,
    /// `I(X;U)` in bits.
    pub leakage: f64,
    /// `I(X;U|Y)` in bits.
    pub cond_leakage: f64,
    /// `H(Y|X,U)` in bits; zero means `Y` is determined by `(X, U)`.
    pub residual: f64,
    /// `H(U)` in bits.
    pub entropy_u: f64,
    /// Output alphabet size `|U|`.
    pub cardinality: usize,
}

/// Evaluates every measure of `m` against `j`.
pub fn report(j: &JointDistribution, m: &Mechanism) -> Result<MechanismReport> {
    let t = TripleDistribution::extend(j, m)?;
    let rep = MechanismReport {
        utility: t.utility(),
        leakage: t.leakage(),
        cond_leakage: t.cond_mi_xu_given_y(),
        residual: t.residual(),
        entropy_u: entropy(&t.marginal_u()),
        cardinality: m.nu(),
    };
    debug_assert!(
        (rep.utility - (rep.leakage + j.entropy_y_given_x() - rep.residual - rep.cond_leakage))
            .abs()
            < 1e-9,
        "information decomposition identity violated"
    );
    Ok(rep)
}

/// Binary symmetric pair: uniform `X`, `Y` equal to `X` flipped with
/// probability `theta`. Joint table `(1-theta)/2` on the diagonal and
/// `theta/2` off it.
pub fn family_bsc(theta: f64) -> Result<JointDistribution> {
    check_theta(theta)?;
    let d = (1.0 - theta) / 2.0;
    let o = theta / 2.0;
    JointDistribution::new(2, 2, vec![d, o, o, d])
}

/// Binary erasure pair: uniform `X` in `{0, 1}`, `Y` in `{0, e, 1}` (column
/// order `0, e, 1`) equal to `X` with probability `1 - theta` and erased to
/// `e` with probability `theta`.
pub fn family_erasure(theta: f64) -> Result<JointDistribution> {
    check_theta(theta)?;
    let d = (1.0 - theta) / 2.0;
    let e = theta / 2.0;
    JointDistribution::new(2, 3, vec![d, e, 0.0, 0.0, e, d])
}

/// Functional pair: uniform `Y` on `{0..f.len()}` and `X = f(Y)` with
/// `nx = max(f) + 1`. Here `H(X|Y) = 0`, so every lower bound collapses onto
/// the `H(Y|X) + eps` ceiling.
pub fn family_function(f: &[usize]) -> Result<JointDistribution> {
    if f.is_empty() {
        return Err(Error::Domain("function table must be nonempty".into()));
    }
    let ny = f.len();
    let nx = f.iter().max().unwrap() + 1;
    let mut p = vec![0.0; nx * ny];
    for (y, &x) in f.iter().enumerate() {
        p[x * ny + y] = 1.0 / ny as f64;
    }
    JointDistribution::new(nx, ny, p)
}

fn check_theta(theta: f64) -> Result<()> {
    if !theta.is_finite() || !(0.0..0.5).contains(&theta) {
        return Err(Error::Domain(format!(
            "crossover parameter theta = {theta} is outside [0, 0.5)"
        )));
    }
    Ok(())
}
