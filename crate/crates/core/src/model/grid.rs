//! Dense 2D/3D grids with per-axis spacing, and their plain-text file format.
//!
//! File layout:
//!
//! ```text
//! <rank> <d0> <d1> [<d2>]
//! <spacing0> <spacing1> [<spacing2>]
//! <values, whitespace separated, row-major>
//! ```

use std::fmt::{Display, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// A dense grid stored in row-major order. Axis 0 is the slowest-varying
/// axis (the slice axis for 3D volumes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid<T>", bound(deserialize = "T: Deserialize<'de>"))]
pub struct Grid<T> {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    data: Vec<T>,
}

#[derive(Deserialize)]
struct RawGrid<T> {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    data: Vec<T>,
}

impl<T> TryFrom<RawGrid<T>> for Grid<T> {
    type Error = ModelError;

    fn try_from(raw: RawGrid<T>) -> Result<Self, Self::Error> {
        Grid::new(raw.shape, raw.spacing, raw.data)
    }
}

/// Image intensities.
pub type ImageGrid = Grid<f64>;
/// Integer label masks (tissue masks, segmentation masks).
pub type MaskGrid = Grid<i32>;

impl<T> Grid<T> {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, data: Vec<T>) -> Result<Self, ModelError> {
        if !(2..=3).contains(&shape.len()) {
            return Err(ModelError::Grid(format!(
                "rank must be 2 or 3, got {}",
                shape.len()
            )));
        }
        if shape.contains(&0) {
            return Err(ModelError::Grid("grid dimensions must be positive".into()));
        }
        if spacing.len() != shape.len() {
            return Err(ModelError::Grid(format!(
                "expected {} spacing values, got {}",
                shape.len(),
                spacing.len()
            )));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(ModelError::Grid("spacing entries must be positive".into()));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(ModelError::Grid(format!(
                "expected {} values, got {}",
                len,
                data.len()
            )));
        }
        Ok(Grid {
            shape,
            spacing,
            data,
        })
    }

    pub fn filled(shape: Vec<usize>, spacing: Vec<f64>, value: T) -> Result<Self, ModelError>
    where
        T: Clone,
    {
        let len = shape.iter().product();
        Grid::new(shape, spacing, vec![value; len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Multi-index of a flat offset.
    pub fn unravel(&self, mut offset: usize) -> Vec<usize> {
        let mut index = vec![0; self.shape.len()];
        for axis in (0..self.shape.len()).rev() {
            index[axis] = offset % self.shape[axis];
            offset /= self.shape[axis];
        }
        index
    }

    pub fn get(&self, index: &[usize]) -> &T {
        &self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let offset = self.offset(index);
        self.data[offset] = value;
    }

    pub fn same_geometry<U>(&self, other: &Grid<U>) -> bool {
        self.shape == other.shape
    }

    /// Physical coordinate of a grid index (index times spacing per axis).
    pub fn physical(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .zip(&self.spacing)
            .map(|(&i, &s)| i as f64 * s)
            .collect()
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            shape: self.shape.clone(),
            spacing: self.spacing.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Display> Grid<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 4 + 32);
        write!(out, "{}", self.shape.len()).unwrap();
        for d in &self.shape {
            write!(out, " {d}").unwrap();
        }
        out.push('\n');
        let spacing: Vec<String> = self.spacing.iter().map(|s| s.to_string()).collect();
        out.push_str(&spacing.join(" "));
        out.push('\n');
        let row = *self.shape.last().unwrap();
        for (i, v) in self.data.iter().enumerate() {
            write!(out, "{v}").unwrap();
            out.push(if (i + 1) % row == 0 { '\n' } else { ' ' });
        }
        out
    }
}

impl<T: FromStr> Grid<T> {
    pub fn parse_text(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ModelError::Grid("missing header line".into()))?;
        let header: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| ModelError::Grid(format!("bad header: {e}")))?;
        let (&rank, shape) = header
            .split_first()
            .ok_or_else(|| ModelError::Grid("empty header".into()))?;
        if shape.len() != rank {
            return Err(ModelError::Grid(format!(
                "header declares rank {rank} but lists {} dimensions",
                shape.len()
            )));
        }
        let spacing: Vec<f64> = lines
            .next()
            .ok_or_else(|| ModelError::Grid("missing spacing line".into()))?
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ModelError::Grid(format!("bad spacing: {e}")))?;
        let mut data = Vec::with_capacity(shape.iter().product());
        for line in lines {
            for token in line.split_whitespace() {
                let value = token
                    .parse::<T>()
                    .map_err(|_| ModelError::Grid(format!("bad value {token:?}")))?;
                data.push(value);
            }
        }
        Grid::new(shape.to_vec(), spacing, data)
    }
}
