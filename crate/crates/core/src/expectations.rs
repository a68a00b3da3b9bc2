//! Expected degree counts from the mean-field recurrences, their limits,
//! and the tail bound used for concentration.
//!
//! With `N_k(t)` the expected number of degree-`k` vertices after `t`
//! insertions, the recurrences are
//!
//! ```text
//! N_3(t+1) = N_3(t) + 1 - 3 N_3(t) / (2t+1)
//! N_k(t+1) = N_k(t) (1 - k/(2t+1)) + N_{k-1}(t) (k-1)/(2t+1),   k >= 4
//! ```
//!
//! from the basis `N_3(1) = 4`, `N_k(1) = 0` for `k >= 4`. Note that the
//! basis and the recurrence treat the three hull vertices like interior
//! ones, so at small `t` the table differs from the true process means
//! (see [`crate::oracle::recurrence_discrepancy`]).

use std::io::{self, Write};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Uniform bound on `|N_k(t) - b_k t|`.
pub const ERROR_BOUND: f64 = 3.6;

pub const DEFAULT_K_MAX: usize = 1000;

/// Default number of leading columns kept in exact rational form.
pub const DEFAULT_EXACT_CAP: usize = 64;

/// Largest `t` for which exact columns may be requested.
pub const EXACT_T_CAP: usize = 1024;

/// Largest dense table, in cells.
pub const MAX_TABLE_CELLS: usize = 1 << 27;

/// `b_k = 24 / (k (k+1) (k+2))`, the limiting fraction of degree-`k` vertices.
pub fn limit_coefficient(k: u64) -> Result<BigRational> {
    if k < 3 {
        return Err(Error::Domain(format!(
            "limit coefficient needs k >= 3, got {k}"
        )));
    }
    let den = BigUint::from(k) * (k + 1) * (k + 2);
    Ok(BigRational::new(24.into(), den.into()))
}

pub fn limit_coefficient_f64(k: u64) -> f64 {
    if k < 3 {
        return 0.0;
    }
    let k = k as f64;
    24.0 / (k * (k + 1.0) * (k + 2.0))
}

/// `1 - sum_{k=3}^{k_max} b_k`, which telescopes to `12 / ((K+1)(K+2))`.
pub fn limit_tail_mass(k_max: u64) -> BigRational {
    BigRational::new(12.into(), (BigUint::from(k_max + 1) * (k_max + 2)).into())
}

/// `6 - sum_{k=3}^{k_max} k b_k`, which telescopes to `24 / (K+2)`.
pub fn limit_mean_degree_remainder(k_max: u64) -> BigRational {
    BigRational::new(24.into(), BigUint::from(k_max + 2).into())
}

/// Azuma-Hoeffding tail bound `2 exp(-lambda^2 / (72 t))` for martingale
/// differences bounded by 6 over `t` steps.
pub fn azuma_bound(lambda: f64, t: u64) -> f64 {
    2.0 * (-(lambda * lambda) / (72.0 * t as f64)).exp()
}

/// One column `N_.(t)` of the floating-point recurrence, advanced in place.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceColumn {
    t: usize,
    /// Indexed by degree; entries below 3 are unused.
    values: Vec<f64>,
}

impl RecurrenceColumn {
    pub fn basis(k_max: usize) -> Self {
        let mut values = vec![0.0; k_max.max(3) + 1];
        values[3] = 4.0;
        RecurrenceColumn { t: 1, values }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// Highest degree that can be non-zero at the current `t`.
    fn live_k_max(&self) -> usize {
        (self.t + 2).min(self.k_max())
    }

    pub fn advance(&mut self) {
        let t = self.t as f64;
        let faces = 2.0 * t + 1.0;
        // Degrees above t+3 stay zero for one more step; update downwards so
        // N_{k-1}(t) is still the old value when N_k is rewritten.
        let top = (self.t + 3).min(self.k_max());
        for k in (4..=top).rev() {
            let kf = k as f64;
            let stay = self.values[k] * (faces - kf);
            let arrive = self.values[k - 1] * (kf - 1.0);
            self.values[k] = (stay + arrive) / faces;
        }
        self.values[3] = self.values[3] * (faces - 3.0) / faces + 1.0;
        self.t += 1;
    }

    /// Largest `|N_k(t) - b_k t|` over `3 <= k <= k_max`, with its `k`.
    pub fn max_error(&self) -> (f64, usize) {
        let t = self.t as f64;
        let mut best = (f64::NEG_INFINITY, 3);
        for k in 3..=self.k_max() {
            let b = limit_coefficient_f64(k as u64);
            let e = if k <= self.live_k_max() {
                (self.values[k] - b * t).abs()
            } else {
                b * t
            };
            if e > best.0 {
                best = (e, k);
            }
        }
        best
    }
}

/// Exact form of the recurrence. All entries of column `t` share the
/// denominator `prod_{s=1}^{t-1} (2s+1)`, so only integer numerators are
/// stored and each step multiplies by small integers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRecurrence {
    t: usize,
    denominator: BigUint,
    numerators: Vec<BigUint>,
}

impl ExactRecurrence {
    pub fn basis(k_max: usize) -> Self {
        let mut numerators = vec![BigUint::zero(); k_max.max(3) + 1];
        numerators[3] = BigUint::from(4u32);
        ExactRecurrence {
            t: 1,
            denominator: BigUint::one(),
            numerators,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k_max(&self) -> usize {
        self.numerators.len() - 1
    }

    pub fn advance(&mut self) {
        let faces = 2 * self.t as u64 + 1;
        let top = (self.t + 3).min(self.k_max());
        for k in (4..=top).rev() {
            // k can exceed 2t+1 only at t = 1, where N_k is zero.
            let stay = &self.numerators[k] * faces.saturating_sub(k as u64);
            let arrive = &self.numerators[k - 1] * (k as u64 - 1);
            self.numerators[k] = stay + arrive;
        }
        let old_den = std::mem::replace(&mut self.denominator, BigUint::zero());
        self.numerators[3] = &self.numerators[3] * (faces - 3) + &old_den * faces;
        self.denominator = old_den * faces;
        self.t += 1;
    }

    pub fn get(&self, k: usize) -> BigRational {
        match self.numerators.get(k) {
            Some(n) if k >= 3 => {
                BigRational::new(n.clone().into(), self.denominator.clone().into())
            }
            _ => BigRational::zero(),
        }
    }

    pub fn get_f64(&self, k: usize) -> f64 {
        self.get(k).to_f64().unwrap_or(f64::NAN)
    }
}

/// Dense table of `N_k(t)` for `3 <= k <= k_max`, `1 <= t <= t_max`.
#[derive(Debug, Clone)]
pub struct ExpectationTable {
    t_max: usize,
    k_max: usize,
    /// Row-major by `t`: cell `(k, t)` is at `(t-1) * width + (k-3)`.
    values: Vec<f64>,
    exact: Vec<Vec<BigRational>>,
}

pub fn recurrence_table(t_max: usize, k_max: usize) -> Result<ExpectationTable> {
    recurrence_table_with(t_max, k_max, DEFAULT_EXACT_CAP)
}

/// Builds the table, keeping exact columns for `t <= exact_cap`.
pub fn recurrence_table_with(
    t_max: usize,
    k_max: usize,
    exact_cap: usize,
) -> Result<ExpectationTable> {
    if t_max < 1 || k_max < 3 {
        return Err(Error::Domain(format!(
            "table needs t_max >= 1 and k_max >= 3, got t_max = {t_max}, k_max = {k_max}"
        )));
    }
    if exact_cap > EXACT_T_CAP {
        return Err(Error::Capacity(format!(
            "exact columns are limited to t <= {EXACT_T_CAP}"
        )));
    }
    let width = k_max - 2;
    let cells = t_max.checked_mul(width).filter(|&c| c <= MAX_TABLE_CELLS).ok_or_else(|| {
        Error::Capacity(format!(
            "a {t_max} x {width} table exceeds {MAX_TABLE_CELLS} cells; use verify_error_bound to stream"
        ))
    })?;

    let mut values = Vec::with_capacity(cells);
    let mut column = RecurrenceColumn::basis(k_max);
    for t in 1..=t_max {
        if t > 1 {
            column.advance();
        }
        values.extend_from_slice(&column.values[3..]);
    }

    let exact_t = exact_cap.min(t_max);
    let mut exact = Vec::with_capacity(exact_t);
    if exact_t > 0 {
        let mut rational = ExactRecurrence::basis(k_max);
        for t in 1..=exact_t {
            if t > 1 {
                rational.advance();
            }
            exact.push((3..=k_max).map(|k| rational.get(k)).collect());
        }
    }

    Ok(ExpectationTable {
        t_max,
        k_max,
        values,
        exact,
    })
}

impl ExpectationTable {
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of leading columns held exactly.
    pub fn exact_t_max(&self) -> usize {
        self.exact.len()
    }

    fn width(&self) -> usize {
        self.k_max - 2
    }

    /// `N_k(t)`; zero for `k` outside `[3, k_max]`. Panics if `t` is outside `[1, t_max]`.
    pub fn get(&self, k: usize, t: usize) -> f64 {
        assert!(
            (1..=self.t_max).contains(&t),
            "t = {t} outside [1, {}]",
            self.t_max
        );
        if !(3..=self.k_max).contains(&k) {
            return 0.0;
        }
        self.values[(t - 1) * self.width() + (k - 3)]
    }

    pub fn exact(&self, k: usize, t: usize) -> Option<&BigRational> {
        if !(3..=self.k_max).contains(&k) || t == 0 {
            return None;
        }
        self.exact.get(t - 1).map(|col| &col[k - 3])
    }

    /// `e_k(t) = N_k(t) - b_k t`.
    pub fn error(&self, k: usize, t: usize) -> f64 {
        self.get(k, t) - limit_coefficient_f64(k as u64) * t as f64
    }

    pub fn max_error(&self) -> ErrorBoundReport {
        let mut report = ErrorBoundReport::empty();
        for t in 1..=self.t_max {
            for k in 3..=self.k_max {
                report.observe(self.error(k, t).abs(), k, t);
            }
        }
        report
    }

    /// CSV rows for a single `t` under the header `k,t,N,b_k_times_t,e`.
    /// With `exact`, values are rendered as reduced fractions `p/q`.
    pub fn write_csv_at<W: Write>(&self, mut out: W, t: usize, exact: bool) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for k in 3..=self.k_max {
            if exact {
                let n = self.exact(k, t).ok_or_else(|| {
                    io::Error::new(
                        io::ErrorKind::InvalidInput,
                        format!("no exact column for t = {t}"),
                    )
                })?;
                write_exact_row(&mut out, k, t, n)?;
            } else {
                write_float_row(&mut out, k, t, self.get(k, t))?;
            }
        }
        Ok(())
    }
}

pub const CSV_HEADER: &str = "k,t,N,b_k_times_t,e";

fn write_float_row<W: Write>(out: &mut W, k: usize, t: usize, n: f64) -> io::Result<()> {
    let bt = limit_coefficient_f64(k as u64) * t as f64;
    writeln!(out, "{k},{t},{n},{bt},{}", n - bt)
}

fn write_exact_row<W: Write>(out: &mut W, k: usize, t: usize, n: &BigRational) -> io::Result<()> {
    let bt =
        limit_coefficient(k as u64).expect("k >= 3") * BigRational::from_integer((t as u64).into());
    let e = n - &bt;
    writeln!(out, "{k},{t},{n},{bt},{e}")
}

impl RecurrenceColumn {
    /// This column as CSV (see [`CSV_HEADER`]).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for k in 3..=self.k_max() {
            write_float_row(&mut out, k, self.t, self.values[k])?;
        }
        Ok(())
    }
}

impl ExactRecurrence {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for k in 3..=self.k_max() {
            write_exact_row(&mut out, k, self.t, &self.get(k))?;
        }
        Ok(())
    }
}

/// Supremum of `|N_k(t) - b_k t|` and where it was attained (first
/// occurrence in `t`-major, then `k`, order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundReport {
    pub sup: f64,
    pub k: usize,
    pub t: usize,
}

impl ErrorBoundReport {
    fn empty() -> Self {
        ErrorBoundReport {
            sup: f64::NEG_INFINITY,
            k: 0,
            t: 0,
        }
    }

    fn observe(&mut self, e: f64, k: usize, t: usize) {
        if e > self.sup {
            *self = ErrorBoundReport { sup: e, k, t };
        }
    }

    pub fn within(&self, bound: f64) -> bool {
        self.sup <= bound
    }
}

/// Streams the recurrence up to `t_max` and returns `sup |e_k(t)|` over
/// `3 <= k <= k_max`. Memory is one column.
pub fn verify_error_bound(t_max: usize, k_max: usize) -> Result<ErrorBoundReport> {
    if t_max < 1 || k_max < 3 {
        return Err(Error::Domain(format!(
            "sweep needs t_max >= 1 and k_max >= 3, got t_max = {t_max}, k_max = {k_max}"
        )));
    }
    let mut column = RecurrenceColumn::basis(k_max);
    let mut report = ErrorBoundReport::empty();
    loop {
        let (e, k) = column.max_error();
        report.observe(e, k, column.t());
        if column.t() == t_max {
            return Ok(report);
        }
        column.advance();
    }
}
