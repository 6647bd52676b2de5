//! Delay-Doppler grid geometry and random-access preamble allocation.
//!
//! The delay axis of one frame is split into `M` bins of width `T/M` seconds
//! and the Doppler axis into `N` bins of width `1/(N T)` Hz, so one frame
//! holds `M·N` delay-Doppler resource elements (DDREs). Preambles occupy
//! disjoint groups of `N1` consecutive Doppler rows, each carrying a single
//! nonzero anchor DDRE.

use thiserror::Error;

/// Errors from grid or allocation construction.
#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimensions must satisfy M >= 1, N >= 1 (got M={m}, N={n})")]
    InvalidDimensions { m: usize, n: usize },
    #[error("symbol duration must be positive and finite (got {t})")]
    InvalidDuration { t: f64 },
    #[error("group width N1={n1} must lie in 1..={n}")]
    InvalidGroupWidth { n1: usize, n: usize },
    #[error("anchor delay index {l_anchor} out of range (M={m})")]
    InvalidAnchor { l_anchor: usize, m: usize },
}

/// The `(M, N, T)` delay-Doppler discretization of one frame.
///
/// `delta_f` is tied to `T` by construction (`Δf = 1/T`), so the subcarrier
/// spacing, bandwidth `M·Δf` and frame duration `N·T` are all derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtfsGrid {
    m: usize,
    n: usize,
    t: f64,
}

impl OtfsGrid {
    pub fn new(m: usize, n: usize, t: f64) -> Result<Self, GridError> {
        if m < 1 || n < 1 {
            return Err(GridError::InvalidDimensions { m, n });
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(GridError::InvalidDuration { t });
        }
        Ok(Self { m, n, t })
    }

    /// Number of delay bins per symbol.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of Doppler bins (symbols per frame).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Symbol duration in seconds.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Subcarrier spacing `Δf = 1/T` in Hz.
    pub fn delta_f(&self) -> f64 {
        1.0 / self.t
    }

    /// Occupied bandwidth `M·Δf` in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.m as f64 / self.t
    }

    /// Frame duration `N·T` in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.t
    }

    /// Whether `idx` addresses a DDRE of this grid.
    pub fn contains(&self, idx: DdIndex) -> bool {
        idx.k < self.n && idx.l < self.m
    }
}

/// A single DDRE address: Doppler row `k` in `[0, N)`, delay column `l` in `[0, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DdIndex {
    pub k: usize,
    pub l: usize,
}

/// Disjoint preamble groups along the Doppler axis plus their anchor DDREs.
///
/// Group `q` covers rows `q·N1 ..= (q+1)·N1 - 1` over all delay columns; its
/// anchor sits at row `⌊N1/2⌋ + q·N1` and a delay column shared by all
/// preambles. Rows at index `≥ R·N1` (possible when `N1 ∤ N`) belong to no
/// group.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleAllocation {
    n1: usize,
    r: usize,
    anchors: Vec<DdIndex>,
}

impl PreambleAllocation {
    /// Group width along Doppler.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Number of preambles `R = ⌊N/N1⌋`.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Anchor DDRE of preamble `q`.
    pub fn anchor(&self, q: usize) -> DdIndex {
        self.anchors[q]
    }

    /// All anchors, ordered by preamble id.
    pub fn anchors(&self) -> &[DdIndex] {
        &self.anchors
    }

    /// Doppler rows `q·N1 .. (q+1)·N1` covered by preamble `q`.
    pub fn group_rows(&self, q: usize) -> std::ops::Range<usize> {
        q * self.n1..(q + 1) * self.n1
    }

    /// The preamble whose group contains `idx`, or `None` on leftover rows.
    pub fn group_of(&self, idx: DdIndex) -> Option<usize> {
        let q = idx.k / self.n1;
        (q < self.r).then_some(q)
    }
}

/// Builds the `R = ⌊N/N1⌋` preamble groups with anchors at
/// `k_q = ⌊N1/2⌋ + q·N1`, all sharing delay column `l_anchor`.
pub fn build_allocation(
    grid: &OtfsGrid,
    n1: usize,
    l_anchor: usize,
) -> Result<PreambleAllocation, GridError> {
    if n1 < 1 || n1 > grid.n() {
        return Err(GridError::InvalidGroupWidth { n1, n: grid.n() });
    }
    if l_anchor >= grid.m() {
        return Err(GridError::InvalidAnchor { l_anchor, m: grid.m() });
    }
    let r = grid.n() / n1;
    let anchors = (0..r)
        .map(|q| DdIndex { k: n1 / 2 + q * n1, l: l_anchor })
        .collect();
    Ok(PreambleAllocation { n1, r, anchors })
}
