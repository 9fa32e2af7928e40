//! Fixed-bin histograms with exact integer counts, so partial results from
//! any partition of an ensemble merge to the same totals.

use crate::error::{Error, Result};

/// Uniform binning of `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("histogram needs at least one bin"));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!(
                "invalid histogram range [{lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edge(i) + self.edge(i + 1))
    }

    /// `Ok(bin)` inside the range, `Err(false)` below, `Err(true)` above.
    #[inline]
    pub fn locate(&self, x: f64) -> std::result::Result<usize, bool> {
        if x < self.lo {
            return Err(false);
        }
        let i = ((x - self.lo) / (self.hi - self.lo) * self.bins as f64) as usize;
        if i >= self.bins {
            Err(true)
        } else {
            Ok(i)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    binning: Binning,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(binning: Binning) -> Self {
        Self {
            binning,
            counts: vec![0; binning.bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn binning(&self) -> Binning {
        self.binning
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        match self.binning.locate(x) {
            Ok(i) => self.counts[i] += 1,
            Err(false) => self.underflow += 1,
            Err(true) => self.overflow += 1,
        }
    }

    /// Counts inside the range plus under- and overflow.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.binning, other.binning);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }
}

/// Joint histogram over two coordinates, row-major in the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub x: Binning,
    pub y: Binning,
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl Histogram2D {
    pub fn new(x: Binning, y: Binning) -> Self {
        Self {
            x,
            y,
            counts: vec![0; x.bins * y.bins],
            outside: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64, y: f64) {
        match (self.x.locate(x), self.y.locate(y)) {
            (Ok(i), Ok(j)) => self.counts[i * self.y.bins + j] += 1,
            _ => self.outside += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    pub fn merge(&mut self, other: &Histogram2D) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
    }
}

/// One row of a density table: `[lo, hi)` and the density on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBin {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

/// Sub-probability density: `count / (n_total * width)` per bin.
pub fn density_table(hist: &Histogram, n_total: u64) -> Result<Vec<DensityBin>> {
    let b = hist.binning();
    if b.bins == 0 {
        return Err(Error::config("histogram has no bins"));
    }
    if n_total == 0 {
        return Err(Error::config("empty ensemble"));
    }
    let w = b.width();
    Ok(hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| DensityBin {
            lo: b.edge(i),
            hi: b.edge(i + 1),
            density: c as f64 / (n_total as f64 * w),
        })
        .collect())
}
