//! Closed-queueing response-time analysis and call-rate headroom.
//!
//! [`mva_curve`] is the exact oracle: the standard mean-value analysis
//! recursion for a closed network of queueing stations with per-user think
//! time. Its curve is bounded below by two asymptotes — the no-contention
//! floor `R_min = sum(D_k)` and the high-load line `n * D_max - Z` — whose
//! intersection is the optimal-load knee. An optional paging stand-in adds a
//! linear penalty above a user-count threshold, reproducing the "measured
//! curve escalates above the theoretical asymptote" signature that marks
//! maximal load.
//!
//! For measured curves, [`fit_bounds`] recovers the asymptote slope from the
//! high-load tail (excluding points an exceedance scan already flagged),
//! [`find_exceedance`] locates the first point rising meaningfully above the
//! line, and [`escalation_detect`] flags order-of-magnitude jumps in
//! per-operation interactive response times.
//!
//! [`nfs_headroom`] is the cheap sanity check on network rumor: total
//! measured call rate over medium capacity.

use thiserror::Error;

/// Default multiplicative margin for [`find_exceedance`]: a point must rise
/// 25% above the asymptote line before it counts as an exceedance.
pub const DEFAULT_EXCEEDANCE_FACTOR: f64 = 1.25;

/// Margin used inside [`fit_bounds`] when excluding overloaded tail points
/// from the slope fit. Tighter than the reporting default: in a tail window
/// chosen well past the knee the queueing curve hugs its asymptote to well
/// under 5%, so anything above that is a secondary effect, and aggressive
/// exclusion only moves the fitted slope toward the clean queueing value.
pub const EXCLUSION_FACTOR: f64 = 1.05;

/// Default ratio for [`escalation_detect`]: an order of magnitude.
pub const DEFAULT_ESCALATION_FACTOR: f64 = 10.0;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("model needs at least one station demand")]
    NoDemands,
    #[error("station {index} demand must be positive and finite, got {value}")]
    BadDemand { index: usize, value: f64 },
    #[error("think time must be nonnegative and finite, got {0}")]
    BadThinkTime(f64),
    #[error("paging penalty must be positive and finite, got {0}")]
    BadPenalty(f64),
    #[error("user count must be at least 1")]
    NoUsers,
    #[error("curve user counts must be strictly increasing (point {index})")]
    UnorderedCurve { index: usize },
    #[error("curve responses must be positive and finite (point {index})")]
    BadResponse { index: usize },
    #[error("need at least {needed} curve points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("tail fraction must be in (0, 1], got {0}")]
    BadTailFraction(f64),
    #[error("tail is flat or falling: no rising asymptote to fit")]
    FlatTail,
    #[error("threshold factor must be at least 1, got {0}")]
    BadThresholdFactor(f64),
    #[error("escalation factor must exceed 1, got {0}")]
    BadEscalationFactor(f64),
    #[error("call rate for {op:?} must be nonnegative and finite, got {rate}")]
    BadRate { op: String, rate: f64 },
    #[error("capacity must be positive and finite, got {0}")]
    BadCapacity(f64),
    #[error("{0}")]
    Parse(String),
}

/// Linear paging stand-in: beyond `threshold` users, each additional user
/// adds `penalty_per_user` seconds on top of the queueing response. A
/// deliberately simple secondary effect — enough to push a curve above its
/// own asymptote the way real memory pressure does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paging {
    pub threshold: u32,
    pub penalty_per_user: f64,
}

/// A closed queueing network: per-station service demands (seconds per
/// visit-weighted job), per-user think time, and an optional paging penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct MvaModel {
    pub demands: Vec<f64>,
    pub think_time: f64,
    pub paging: Option<Paging>,
}

impl MvaModel {
    pub fn validate(&self) -> Result<(), LoadError> {
        if self.demands.is_empty() {
            return Err(LoadError::NoDemands);
        }
        for (index, &d) in self.demands.iter().enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(LoadError::BadDemand { index, value: d });
            }
        }
        if !(self.think_time >= 0.0 && self.think_time.is_finite()) {
            return Err(LoadError::BadThinkTime(self.think_time));
        }
        if let Some(p) = &self.paging {
            if !(p.penalty_per_user > 0.0 && p.penalty_per_user.is_finite()) {
                return Err(LoadError::BadPenalty(p.penalty_per_user));
            }
        }
        Ok(())
    }

    /// Total demand `sum(D_k)`: the no-contention response floor.
    pub fn total_demand(&self) -> f64 {
        self.demands.iter().sum()
    }

    /// Bottleneck demand `max(D_k)`: the high-load asymptote slope.
    pub fn max_demand(&self) -> f64 {
        self.demands.iter().cloned().fold(f64::MIN, f64::max)
    }
}

/// A measured or generated response curve: strictly increasing user counts
/// with positive mean responses.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCurve {
    pub points: Vec<(u32, f64)>,
}

impl LoadCurve {
    pub fn new(points: Vec<(u32, f64)>) -> Result<Self, LoadError> {
        for (index, window) in points.windows(2).enumerate() {
            if window[1].0 <= window[0].0 {
                return Err(LoadError::UnorderedCurve { index: index + 1 });
            }
        }
        for (index, &(_, r)) in points.iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(LoadError::BadResponse { index });
            }
        }
        Ok(LoadCurve { points })
    }

    /// Response at a given user count, if that point exists.
    pub fn response_at(&self, n: u32) -> Option<f64> {
        self.points
            .iter()
            .find(|&&(users, _)| users == n)
            .map(|&(_, r)| r)
    }
}

/// The two lower bounds of a response curve plus the knee where they cross.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotes {
    /// Horizontal floor: total demand.
    pub r_min: f64,
    /// Slope of the high-load line `n * d_max - z`.
    pub d_max: f64,
    pub z: f64,
}

impl Asymptotes {
    /// High-load line value at `n` users.
    pub fn line(&self, n: u32) -> f64 {
        n as f64 * self.d_max - self.z
    }

    /// Optimal-load knee: where the line crosses the floor.
    pub fn knee(&self) -> f64 {
        knee(self.r_min, self.z, self.d_max)
    }
}

/// Asymptote parameters fitted from a measured curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsFit {
    /// Response at the smallest measured user count.
    pub r_min: f64,
    /// Fitted asymptote slope.
    pub d_max: f64,
    /// Think time supplied by the caller (the intercept is forced to -z).
    pub z: f64,
    /// Optimal load `(r_min + z) / d_max`.
    pub n_opt: f64,
    /// First tail point left above the fitted line (at the exclusion
    /// margin) once the fit has converged — the onset of overload, if any.
    pub n_max: Option<u32>,
}

/// One solved load level: users, mean response (paging penalty included),
/// and system throughput. The throughput is the queueing recursion's
/// `X(n) = n / (R(n) + Z)` with the pure queueing `R`; a paging penalty
/// inflates the reported response but by construction never feeds back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvaPoint {
    pub users: u32,
    pub response: f64,
    pub throughput: f64,
}

/// Exact MVA recursion, one point per user count from 1 to `n_max_users`.
///
/// Per station `k`: `Q_k(0) = 0`; then for `n = 1..N`
/// `R_k(n) = D_k * (1 + Q_k(n-1))`, `R(n) = sum R_k(n)`,
/// `X(n) = n / (R(n) + Z)`, `Q_k(n) = X(n) * R_k(n)`.
///
/// A configured paging penalty is added to the reported response after the
/// recursion (`penalty * (n - threshold)` for `n` past the threshold); it
/// does not feed back into the queue lengths, keeping the queueing core
/// exact while the overload region inflates the way a secondary effect
/// would.
pub fn mva_table(model: &MvaModel, n_max_users: u32) -> Result<Vec<MvaPoint>, LoadError> {
    model.validate()?;
    if n_max_users < 1 {
        return Err(LoadError::NoUsers);
    }
    let stations = model.demands.len();
    let mut queue = vec![0.0f64; stations];
    let mut residence = vec![0.0f64; stations];
    let mut points = Vec::with_capacity(n_max_users as usize);
    for n in 1..=n_max_users {
        for k in 0..stations {
            residence[k] = model.demands[k] * (1.0 + queue[k]);
        }
        let response: f64 = residence.iter().sum();
        let throughput = n as f64 / (response + model.think_time);
        for k in 0..stations {
            queue[k] = throughput * residence[k];
        }
        let mut reported = response;
        if let Some(p) = &model.paging {
            if n > p.threshold {
                reported += p.penalty_per_user * (n - p.threshold) as f64;
            }
        }
        points.push(MvaPoint {
            users: n,
            response: reported,
            throughput,
        });
    }
    Ok(points)
}

/// The response curve alone; see [`mva_table`] for throughputs too.
pub fn mva_curve(model: &MvaModel, n_max_users: u32) -> Result<LoadCurve, LoadError> {
    let table = mva_table(model, n_max_users)?;
    LoadCurve::new(table.into_iter().map(|p| (p.users, p.response)).collect())
}

/// Reads the asymptote parameters straight off a model: floor `sum(D)`,
/// line slope `max(D)`, intercept `-Z`.
pub fn asymptotes(model: &MvaModel) -> Result<Asymptotes, LoadError> {
    model.validate()?;
    Ok(Asymptotes {
        r_min: model.total_demand(),
        d_max: model.max_demand(),
        z: model.think_time,
    })
}

/// Optimal-load knee `(r_min + z) / d_max`, as a real number. Round down to
/// get the last integer user count still on the floor side of the crossing.
pub fn knee(r_min: f64, z: f64, d_max: f64) -> f64 {
    (r_min + z) / d_max
}

/// Fits asymptote parameters to a measured curve.
///
/// `r_min` is the response at the smallest measured user count. The slope
/// `d_max` is a least-squares fit of `R` against `n` over the
/// `tail_fraction` largest user counts, with the intercept forced to `-z`
/// (a free intercept is ill-conditioned on short tails). Points rising
/// above the fitted line by more than the exclusion margin — the overload
/// signature — are dropped and the slope refitted, iterating until the
/// kept set stabilizes, so an overloaded tail cannot steepen the reported
/// asymptote. The converged first flagged point, if any, is reported as
/// `n_max`.
///
/// The tail window should cover the high-load region (well past the knee):
/// closer to the knee a queueing curve legitimately sits above its own
/// asymptote, which this margin would misread as overload.
///
/// A tail whose free-slope trend is flat or falling has no rising asymptote
/// and is rejected as degenerate.
pub fn fit_bounds(
    curve: &LoadCurve,
    z: f64,
    tail_fraction: f64,
) -> Result<BoundsFit, LoadError> {
    if curve.points.len() < 4 {
        return Err(LoadError::TooFewPoints {
            needed: 4,
            got: curve.points.len(),
        });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(LoadError::BadTailFraction(tail_fraction));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(LoadError::BadThinkTime(z));
    }

    let r_min = curve.points[0].1;
    let tail_len = ((curve.points.len() as f64 * tail_fraction).ceil() as usize)
        .clamp(2, curve.points.len());
    let tail = &curve.points[curve.points.len() - tail_len..];

    // Degeneracy check on the unconstrained trend: a flat or falling tail
    // means there is no rising asymptote to recover.
    let mean_n = tail.iter().map(|&(n, _)| n as f64).sum::<f64>() / tail.len() as f64;
    let mean_r = tail.iter().map(|&(_, r)| r).sum::<f64>() / tail.len() as f64;
    let ss_nn: f64 = tail.iter().map(|&(n, _)| (n as f64 - mean_n).powi(2)).sum();
    let ss_nr: f64 = tail
        .iter()
        .map(|&(n, r)| (n as f64 - mean_n) * (r - mean_r))
        .sum();
    if ss_nn == 0.0 || ss_nr / ss_nn <= 0.0 {
        return Err(LoadError::FlatTail);
    }

    // Constrained fit: minimize sum (R_i - (d * n_i - z))^2 over d.
    let slope_through = |points: &[(u32, f64)]| -> f64 {
        let num: f64 = points.iter().map(|&(n, r)| n as f64 * (r + z)).sum();
        let den: f64 = points.iter().map(|&(n, _)| (n as f64).powi(2)).sum();
        num / den
    };
    let mut d_max = slope_through(tail);

    // Iterated exclusion: scan the tail against the current fit, drop
    // points at or past the first flagged count, refit, repeat until the
    // kept set stops changing. One pass is not enough when overload
    // contaminates the initial slope badly: the inflated line hides most
    // of the overloaded points, and each refit lowers it enough to expose
    // more of them. The kept set only ever shrinks, so this terminates.
    let tail_curve = LoadCurve::new(tail.to_vec())?;
    let mut n_max = None;
    let mut kept_len = tail.len();
    loop {
        let fit = Asymptotes { r_min, d_max, z };
        n_max = find_exceedance(&tail_curve, &fit, EXCLUSION_FACTOR)?;
        let Some(flagged) = n_max else { break };
        let kept: Vec<(u32, f64)> =
            tail.iter().copied().filter(|&(n, _)| n < flagged).collect();
        if kept.len() < 2 || kept.len() == kept_len {
            break;
        }
        kept_len = kept.len();
        d_max = slope_through(&kept);
    }

    Ok(BoundsFit {
        r_min,
        d_max,
        z,
        n_opt: knee(r_min, z, d_max),
        n_max,
    })
}

/// Finds the smallest measured user count whose response rises above
/// `threshold_factor` times the asymptote line, ignoring points where the
/// line is still nonpositive. Returns `None` when the curve never exceeds —
/// the expected verdict for a pure queueing curve against its own asymptote
/// with any margin.
pub fn find_exceedance(
    curve: &LoadCurve,
    asymptotes: &Asymptotes,
    threshold_factor: f64,
) -> Result<Option<u32>, LoadError> {
    if !(threshold_factor >= 1.0 && threshold_factor.is_finite()) {
        return Err(LoadError::BadThresholdFactor(threshold_factor));
    }
    for &(n, response) in &curve.points {
        let line = asymptotes.line(n);
        if line > 0.0 && response > threshold_factor * line {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// One interactive operation's response measurements across user counts.
#[derive(Debug, Clone, PartialEq)]
pub struct OpSeries {
    pub op: String,
    pub points: Vec<(u32, f64)>,
}

/// Flags `(op, n_k)` wherever an operation's response jumps by `factor` or
/// more between consecutive measured user counts — the order-of-magnitude
/// escalation signature. Series with fewer than two points are skipped with
/// a diagnostic.
pub fn escalation_detect(
    series: &[OpSeries],
    factor: f64,
) -> Result<(Vec<(String, u32)>, Vec<String>), LoadError> {
    if !(factor > 1.0 && factor.is_finite()) {
        return Err(LoadError::BadEscalationFactor(factor));
    }
    let mut flags = Vec::new();
    let mut diagnostics = Vec::new();
    for s in series {
        if s.points.len() < 2 {
            diagnostics.push(format!(
                "op {:?}: need at least 2 points, got {}",
                s.op,
                s.points.len()
            ));
            continue;
        }
        for window in s.points.windows(2) {
            let (_, prev) = window[0];
            let (n, next) = window[1];
            let escalated = if prev > 0.0 {
                next / prev >= factor
            } else {
                // A zero-time operation that suddenly takes time at all is
                // an escalation by any multiplicative standard.
                next > 0.0
            };
            if escalated {
                flags.push((s.op.clone(), n));
            }
        }
    }
    Ok((flags, diagnostics))
}

/// Call-rate headroom verdict: the total measured rate and the fraction of
/// a medium's capacity it consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Headroom {
    pub total_rate: f64,
    /// `total_rate / capacity`, as a fraction.
    pub utilization: f64,
}

/// Sums per-operation call rates and divides by the medium capacity.
pub fn nfs_headroom(rates: &[(String, f64)], capacity: f64) -> Result<Headroom, LoadError> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(LoadError::BadCapacity(capacity));
    }
    let mut total = 0.0;
    for (op, rate) in rates {
        if !(*rate >= 0.0 && rate.is_finite()) {
            return Err(LoadError::BadRate {
                op: op.clone(),
                rate: *rate,
            });
        }
        total += rate;
    }
    Ok(Headroom {
        total_rate: total,
        utilization: total / capacity,
    })
}

/// Parses a two-column curve file: `<n_users> <mean response seconds>` per
/// line, whitespace separated, `#` comments and blank lines ignored.
pub fn parse_curve(text: &str) -> Result<LoadCurve, LoadError> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(n), Some(r), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(LoadError::Parse(format!(
                "line {}: expected `<users> <response>`, got {line:?}",
                idx + 1
            )));
        };
        let n: u32 = n
            .parse()
            .map_err(|e| LoadError::Parse(format!("line {}: bad user count: {e}", idx + 1)))?;
        let r: f64 = r
            .parse()
            .map_err(|e| LoadError::Parse(format!("line {}: bad response: {e}", idx + 1)))?;
        points.push((n, r));
    }
    LoadCurve::new(points)
}

/// Parses a rates file: `<op name> <calls per second>` per line.
pub fn parse_rates(text: &str) -> Result<Vec<(String, f64)>, LoadError> {
    let mut rates = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(op), Some(rate), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(LoadError::Parse(format!(
                "line {}: expected `<op> <rate>`, got {line:?}",
                idx + 1
            )));
        };
        let rate: f64 = rate
            .parse()
            .map_err(|e| LoadError::Parse(format!("line {}: bad rate: {e}", idx + 1)))?;
        rates.push((op.to_string(), rate));
    }
    Ok(rates)
}
