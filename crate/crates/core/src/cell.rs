//! The randomized partition of `[0,1]^K` indexed by nodes of the top-`m`
//! tree, and the range/gap statistics that drive it.

use std::fmt::Write as _;

use crate::armset::{Arm, ArmSet};
use crate::dop::Dop;
use crate::error::{invalid, Error, Result};

/// Per-depth thresholds `C(0..K-1)`; node `P` uses `values[depth(P)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    values: Vec<f64>,
}

impl Thresholds {
    pub fn new(values: Vec<f64>) -> Result<Thresholds> {
        let k = values.len();
        if k == 0 {
            return Err(invalid("thresholds need K >= 1 entries"));
        }
        let hi = 1.0 / k as f64;
        if let Some(bad) = values.iter().find(|v| !(0.0..=hi).contains(*v)) {
            return Err(invalid(format!("threshold {bad} outside [0, 1/{k}]")));
        }
        Ok(Thresholds { values })
    }

    /// The same value at every depth.
    pub fn constant(arm_count: usize, value: f64) -> Result<Thresholds> {
        Thresholds::new(vec![value; arm_count])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn arm_count(&self) -> usize {
        self.values.len()
    }

    pub fn at_depth(&self, depth: usize) -> f64 {
        self.values[depth]
    }
}

/// A validated input point for [`assign_cell`].
#[derive(Clone, Debug, PartialEq)]
pub struct CellQuery {
    x: Vec<f64>,
    eps: f64,
    m: usize,
}

impl CellQuery {
    pub fn new(x: Vec<f64>, eps: f64, m: usize) -> Result<CellQuery> {
        if x.is_empty() {
            return Err(invalid("x must have K >= 1 coordinates"));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("coordinate {bad} outside [0, 1]")));
        }
        if !eps.is_finite() || eps <= 0.0 {
            return Err(invalid(format!("eps = {eps} must be a positive finite number")));
        }
        if m == 0 || m > x.len() {
            return Err(invalid(format!("m = {m} must satisfy 1 <= m <= K = {}", x.len())));
        }
        Ok(CellQuery { x, eps, m })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

fn check_len(d: &Dop, x: &[f64]) -> Result<()> {
    if x.len() != d.arm_count() {
        return Err(invalid(format!("x has {} coordinates, DOP has K = {}", x.len(), d.arm_count())));
    }
    Ok(())
}

fn extremes(set: ArmSet, x: &[f64]) -> (f64, f64) {
    set.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
        let v = x[a - 1];
        (lo.min(v), hi.max(v))
    })
}

/// Spread of `x` over the undecided block `B(d)`.
pub fn range_of(d: &Dop, x: &[f64], m: usize) -> Result<f64> {
    check_len(d, x)?;
    let ds = d.decided_sets(m)?;
    if ds.is_leaf {
        return Err(Error::UndefinedRange);
    }
    let (lo, hi) = extremes(ds.b_set, x);
    Ok(hi - lo)
}

/// Margin of the most recent inequality: min over the part above it minus
/// max over the part below it. Negative when `x` violates the inequality.
pub fn gap_of(d: &Dop, x: &[f64]) -> Result<f64> {
    check_len(d, x)?;
    let i = d.last_sign_index().ok_or(Error::UndefinedGap)?;
    let (upper_min, _) = extremes(d.parts()[i], x);
    let (_, lower_max) = extremes(d.parts()[i + 1], x);
    Ok(upper_min - lower_max)
}

/// Sorts arms by `x` descending, ties broken by ascending arm index.
fn sort_desc(arms: &mut [Arm], x: &[f64]) {
    arms.sort_by(|&a, &b| x[b - 1].total_cmp(&x[a - 1]).then(a.cmp(&b)));
}

/// Arms of `B(d)` sorted by `x` descending, ties by ascending arm index.
pub fn sorted_block(d: &Dop, x: &[f64], m: usize) -> Result<Vec<Arm>> {
    check_len(d, x)?;
    let ds = d.decided_sets(m)?;
    if ds.is_leaf {
        return Err(Error::UndefinedRange);
    }
    let mut arms = ds.b_set.to_vec();
    sort_desc(&mut arms, x);
    Ok(arms)
}

/// The prefix split of the sorted block with the largest gap (first one on
/// ties), together with that gap.
pub fn best_cut_child(d: &Dop, x: &[f64], m: usize) -> Result<(Dop, f64)> {
    let block = sorted_block(d, x, m)?;
    let (j, gap) = block
        .windows(2)
        .map(|w| x[w[0] - 1] - x[w[1] - 1])
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, g)| if g > best.1 { (j, g) } else { best });
    let i_p = d.decided_sets(m)?.i_p;
    let upper: ArmSet = block[..=j].iter().collect();
    Ok((d.split_block(i_p, upper), gap))
}

/// One visited node on the descent: its sorted block and `c(Q) * range_Q(x)`.
struct Frame {
    block: Vec<Arm>,
    target: f64,
}

/// The partition mapping: walks down from the root, stopping at the current
/// node whenever some ancestor's prefix split has a gap within
/// `(distance + 1) * 6 * eps` of that ancestor's threshold, and otherwise
/// descending into the first prefix split whose gap clears the threshold.
pub fn assign_cell(q: &CellQuery, c: &Thresholds) -> Result<Dop> {
    if c.arm_count() != q.x.len() {
        return Err(invalid(format!(
            "thresholds cover K = {}, query has K = {}",
            c.arm_count(),
            q.x.len()
        )));
    }
    Ok(assign_unchecked(&q.x, q.eps, q.m, c))
}

pub(crate) fn assign_unchecked(x: &[f64], eps: f64, m: usize, c: &Thresholds) -> Dop {
    let mut node = Dop::root(x.len()).expect("K validated by caller");
    let mut path: Vec<Frame> = Vec::with_capacity(x.len());
    loop {
        let ds = node.decided_unchecked(m);
        if ds.is_leaf {
            return node;
        }
        let mut block = ds.b_set.to_vec();
        sort_desc(&mut block, x);
        let range = x[block[0] - 1] - x[block[block.len() - 1] - 1];
        path.push(Frame {
            block,
            target: c.at_depth(path.len()) * range,
        });

        let here = path.len() - 1;
        for (depth_q, frame) in path.iter().enumerate() {
            let tol = (here - depth_q + 1) as f64 * 6.0 * eps;
            let near = frame
                .block
                .windows(2)
                .any(|w| ((x[w[0] - 1] - x[w[1] - 1]) - frame.target).abs() <= tol);
            if near {
                return node;
            }
        }

        let frame = &path[here];
        let gaps = frame.block.windows(2).map(|w| x[w[0] - 1] - x[w[1] - 1]);
        // A gap >= range / (|B| - 1) always exists and c <= 1/K, so the
        // fallback to the widest cut is only reachable through rounding.
        let j = gaps
            .clone()
            .position(|g| g >= frame.target)
            .unwrap_or_else(|| {
                gaps.enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (j, g)| if g > b.1 { (j, g) } else { b })
                    .0
            });
        let upper: ArmSet = frame.block[..=j].iter().collect();
        node = node.split_block(ds.i_p, upper);
    }
}

/// One labelled point of a three-arm slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicePoint {
    pub x: [f64; 3],
    pub label: Dop,
}

/// Labels a `grid_n x grid_n` barycentric grid on the plane
/// `x1 + x2 + x3 = level`.
///
/// The sampled triangle is the largest one centred at `(level/3, level/3,
/// level/3)` with the simplex orientation that fits in the unit cube; for
/// `level <= 1` it is the whole slice. Row `i` fixes the first barycentric
/// weight at `i / (grid_n - 1)` and column `j` splits the remainder between
/// the other two, so the last row collapses onto a vertex.
pub fn sample_slice(m: usize, c: &Thresholds, eps: f64, level: f64, grid_n: usize) -> Result<Vec<SlicePoint>> {
    if c.arm_count() != 3 {
        return Err(invalid("slices are defined for K = 3 only"));
    }
    if m == 0 || m > 3 {
        return Err(invalid(format!("m = {m} must be in 1..=3")));
    }
    if !(level > 0.0 && level < 3.0) {
        return Err(invalid(format!("level = {level} must be in (0, 3)")));
    }
    if grid_n < 2 {
        return Err(invalid(format!("grid_n = {grid_n} must be >= 2")));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid(format!("eps = {eps} must be positive")));
    }
    let centre = level / 3.0;
    let scale = level.min((3.0 - level) / 2.0);
    let steps = (grid_n - 1) as f64;
    let mut out = Vec::with_capacity(grid_n * grid_n);
    for i in 0..grid_n {
        let l1 = i as f64 / steps;
        for j in 0..grid_n {
            let l2 = (1.0 - l1) * (j as f64 / steps);
            let l3 = (1.0 - l1 - l2).max(0.0);
            let x = [l1, l2, l3].map(|l| (centre + scale * (l - 1.0 / 3.0)).clamp(0.0, 1.0));
            let label = assign_unchecked(&x, eps, m, c);
            out.push(SlicePoint { x, label });
        }
    }
    Ok(out)
}

/// Renders slice points as `x1,x2,x3,label` with a header row.
pub fn slice_csv(points: &[SlicePoint]) -> String {
    let mut s = String::from("x1,x2,x3,label\n");
    for p in points {
        let _ = writeln!(s, "{:.6},{:.6},{:.6},{}", p.x[0], p.x[1], p.x[2], p.label);
    }
    s
}
