//! Observed series and the lagged regression pair.
//!
//! A series of `n+1` states `X^(0)..X^(n)` yields the pair `Y = (X^(1) ..
//! X^(n))` and `X = (X^(0) .. X^(n-1))`, both `p x n`, so that the model
//! reads `Y = A X + noise` column by column. The cross products `X X'`,
//! `X Y'`, and the per-row squared norms of `Y` recur in every per-graph
//! fit, so they are computed once at construction.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{EasError, Result};

/// Split a `p x (n+1)` series into its lagged pair `(y, x)`, both `p x n`:
/// `y` column `t` is state `t+1`, `x` column `t` is state `t`.
pub fn lagged_pair(series: &ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let cols = series.ncols();
    if series.nrows() == 0 || cols < 2 {
        return Err(EasError::dim(format!(
            "series must be p x (n+1) with p >= 1 and n >= 1, got {}x{}",
            series.nrows(),
            cols
        )));
    }
    let y = series.slice(s![.., 1..]).to_owned();
    let x = series.slice(s![.., ..cols - 1]).to_owned();
    Ok((y, x))
}

/// The observed series with its lagged pair and cached cross products.
#[derive(Debug, Clone)]
pub struct TimeSeriesData {
    series: Array2<f64>,
    y: Array2<f64>,
    x: Array2<f64>,
    xxt: Array2<f64>,
    xyt: Array2<f64>,
    yy: Vec<f64>,
}

impl TimeSeriesData {
    /// Wrap a `p x (n+1)` series of states. All entries must be finite.
    pub fn from_series(series: Array2<f64>) -> Result<Self> {
        if let Some(v) = series.iter().find(|v| !v.is_finite()) {
            return Err(EasError::invalid(format!(
                "series contains a non-finite entry: {v}"
            )));
        }
        let (y, x) = lagged_pair(&series.view())?;
        let xxt = x.dot(&x.t());
        let xyt = x.dot(&y.t());
        let yy = y
            .rows()
            .into_iter()
            .map(|r| r.dot(&r))
            .collect();
        Ok(TimeSeriesData {
            series,
            y,
            x,
            xxt,
            xyt,
            yy,
        })
    }

    pub fn p(&self) -> usize {
        self.series.nrows()
    }

    /// Number of lagged observations (columns of `y` and `x`).
    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn series(&self) -> ArrayView2<'_, f64> {
        self.series.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Cached `X X'` (`p x p`).
    pub fn xxt(&self) -> &Array2<f64> {
        &self.xxt
    }

    /// Cached `X Y'` (`p x p`): entry `(k, j)` is `sum_t x_k(t) y_j(t)`.
    pub fn xyt(&self) -> &Array2<f64> {
        &self.xyt
    }

    /// Cached `||Y_j||^2` per equation.
    pub fn yy(&self) -> &[f64] {
        &self.yy
    }

    /// The sub-series of `len + 1` states starting at state `start`; its
    /// lagged pair covers observation columns `start..start+len` of this
    /// data. Used to split a long simulation into train and test halves.
    pub fn window(&self, start: usize, len: usize) -> Result<TimeSeriesData> {
        if len == 0 || start + len + 1 > self.series.ncols() {
            return Err(EasError::dim(format!(
                "window [{start}, {start}+{len}] exceeds the {} available states",
                self.series.ncols()
            )));
        }
        TimeSeriesData::from_series(self.series.slice(s![.., start..start + len + 1]).to_owned())
    }
}
