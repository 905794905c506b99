//! Points, grids and fields on the flat torus `T^n = R^n / Z^n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn wrap1(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Shortest signed representative of `d` modulo 1, in `[-1/2, 1/2]`.
#[inline]
pub fn wrapped_diff(d: f64) -> f64 {
    d - d.round()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: &[f64]) -> Result<Self> {
        wrap(coords)
    }

    pub fn origin(n: usize) -> Self {
        TorusPoint {
            coords: vec![0.0; n],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

pub fn wrap(x: &[f64]) -> Result<TorusPoint> {
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("torus coordinate {v}")));
    }
    Ok(TorusPoint {
        coords: x.iter().map(|&v| wrap1(v)).collect(),
    })
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub fn torus_distance(a: &TorusPoint, b: &TorusPoint) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(raw_distance(a.coords(), b.coords()))
}

/// Torus distance between two unwrapped coordinate slices.
pub(crate) fn raw_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| wrapped_diff(x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// The flow `x -> x + omega t` projected to the torus.
pub fn linear_flow(x0: &TorusPoint, t: f64, omega: &[f64]) -> Result<TorusPoint> {
    check_dim(x0.dim(), omega.len())?;
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("flow time {t}")));
    }
    let moved: Vec<f64> = x0
        .coords
        .iter()
        .zip(omega)
        .map(|(x, w)| x + w * t)
        .collect();
    wrap(&moved)
}

/// Uniform periodic grid with `size` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub n: usize,
    #[serde(rename = "N")]
    pub size: usize,
}

impl UniformGrid {
    pub fn new(n: usize, size: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "dimension {n} outside 1..=3"
            )));
        }
        if size < 2 {
            return Err(Error::InvalidParameter(format!(
                "resolution {size} must be at least 2"
            )));
        }
        Ok(UniformGrid { n, size })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    pub fn len(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a flat index, axis 0 fastest.
    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for slot in out.iter_mut().take(self.n) {
            *slot = flat % self.size;
            flat /= self.size;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in (0..self.n).rev() {
            flat = flat * self.size + idx[a] % self.size;
        }
        flat
    }

    /// Coordinates `i h` of the node with the given flat index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        let mi = self.multi_index(flat);
        (0..self.n).map(|a| mi[a] as f64 * h).collect()
    }

    /// Flat index of the node nearest to `x`.
    pub fn nearest_node(&self, x: &TorusPoint) -> Result<usize> {
        check_dim(self.n, x.dim())?;
        let mut idx = [0usize; 3];
        for (a, slot) in idx.iter_mut().enumerate().take(self.n) {
            let r = (x.coords[a] * self.size as f64).round() as usize;
            *slot = r % self.size;
        }
        Ok(self.flat_index(&idx))
    }
}

/// Grid function. Node `i` sits at `origin + i h`; the origin moves when the
/// solver advances in a frame travelling with the frequency vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    pub time: f64,
    pub origin: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    n: usize,
    #[serde(rename = "N")]
    size: usize,
    time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Vec<f64>>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: UniformGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {i}")));
        }
        Ok(ScalarField {
            grid,
            values,
            time,
            origin: vec![0.0; grid.n],
        })
    }

    pub fn constant(grid: UniformGrid, value: f64, time: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.len()],
            time,
            origin: vec![0.0; grid.n],
        }
    }

    pub fn from_fn(grid: UniformGrid, time: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        ScalarField {
            grid,
            values,
            time,
            origin: vec![0.0; grid.n],
        }
    }

    pub fn with_origin(mut self, origin: &[f64]) -> Result<Self> {
        check_dim(self.grid.n, origin.len())?;
        self.origin = wrap(origin)?.coords;
        Ok(self)
    }

    /// Position of node `flat` on the torus.
    pub fn node_point(&self, flat: usize) -> Vec<f64> {
        let mut x = self.grid.node(flat);
        for (xa, oa) in x.iter_mut().zip(&self.origin) {
            *xa = wrap1(*xa + oa);
        }
        x
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Resample onto the same grid with origin zero.
    pub fn resample(&self) -> ScalarField {
        if self.origin.iter().all(|&o| o == 0.0) {
            return self.clone();
        }
        let values = (0..self.grid.len())
            .map(|i| interpolate_raw(self, &self.grid.node(i)))
            .collect();
        ScalarField {
            grid: self.grid,
            values,
            time: self.time,
            origin: vec![0.0; self.grid.n],
        }
    }

    pub fn to_json(&self) -> String {
        let origin = if self.origin.iter().all(|&o| o == 0.0) {
            None
        } else {
            Some(self.origin.clone())
        };
        let j = FieldJson {
            n: self.grid.n,
            size: self.grid.size,
            time: self.time,
            origin,
            values: self.values.clone(),
        };
        serde_json::to_string(&j).expect("field serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: FieldJson = serde_json::from_str(s)?;
        let grid = UniformGrid::new(j.n, j.size)?;
        let f = ScalarField::new(grid, j.values, j.time)?;
        match j.origin {
            Some(o) => f.with_origin(&o),
            None => Ok(f),
        }
    }

    /// One row per node: `x_1..x_n,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.grid.n).map(|a| format!("x{a}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",value\n");
        for i in 0..self.grid.len() {
            for x in self.node_point(i) {
                out.push_str(&format!("{x:.17e},"));
            }
            out.push_str(&format!("{:.17e}\n", self.values[i]));
        }
        out
    }
}

pub fn interpolate(f: &ScalarField, x: &TorusPoint) -> Result<f64> {
    check_dim(f.grid.n, x.dim())?;
    Ok(interpolate_raw(f, x.coords()))
}

/// Multilinear interpolation over the `2^n` surrounding nodes.
pub(crate) fn interpolate_raw(f: &ScalarField, x: &[f64]) -> f64 {
    let g = f.grid;
    let nn = g.size as f64;
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..g.n {
        let r = wrap1(x[a] - f.origin[a]) * nn;
        let mut b = r.floor();
        let mut fr = r - b;
        if b >= nn {
            b = 0.0;
            fr = 0.0;
        }
        base[a] = b as usize;
        frac[a] = fr;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << g.n) {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..g.n {
            if corner >> a & 1 == 1 {
                w *= frac[a];
                idx[a] = (base[a] + 1) % g.size;
            } else {
                w *= 1.0 - frac[a];
                idx[a] = base[a];
            }
        }
        if w != 0.0 {
            acc += w * f.values[g.flat_index(&idx)];
        }
    }
    acc
}

fn check_same_grid(f: &ScalarField, g: &ScalarField) -> Result<()> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch(format!(
            "grids {:?} and {:?}",
            f.grid, g.grid
        )));
    }
    if raw_distance(&f.origin, &g.origin) > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "grid origins {:?} and {:?}",
            f.origin, g.origin
        )));
    }
    Ok(())
}

pub fn sup_norm_diff(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    check_same_grid(f, g)?;
    Ok(f.values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

pub fn pointwise_min(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    check_same_grid(f, g)?;
    if (f.time - g.time).abs() > 1e-9 * (1.0 + f.time.abs()) {
        return Err(Error::GridMismatch(format!(
            "time tags {} and {}",
            f.time, g.time
        )));
    }
    Ok(ScalarField {
        values: f
            .values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| a.min(*b))
            .collect(),
        ..f.clone()
    })
}
