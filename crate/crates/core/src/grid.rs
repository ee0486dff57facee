//! Row-major per-pixel maps and the compact indexing of masked pixels.

use crate::error::{Error, Result};

/// A row-major `width × height` map of per-pixel values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {width}x{height} grid",
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.dims() == other.dims()
    }
}

/// Pixel mask.
pub type Mask = Grid<bool>;

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }
}

/// Dense numbering `0..n` of the masked pixels in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskIndex {
    width: usize,
    height: usize,
    pixels: Vec<(usize, usize)>,
    lookup: Vec<u32>,
}

const UNMASKED: u32 = u32::MAX;

impl MaskIndex {
    pub fn new(mask: &Mask) -> Self {
        let mut pixels = Vec::new();
        let mut lookup = vec![UNMASKED; mask.len()];
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if *mask.get(x, y) {
                    lookup[y * mask.width() + x] = pixels.len() as u32;
                    pixels.push((x, y));
                }
            }
        }
        MaskIndex {
            width: mask.width(),
            height: mask.height(),
            pixels,
            lookup,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn pixel(&self, i: usize) -> (usize, usize) {
        self.pixels[i]
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> Option<usize> {
        match self.lookup[y * self.width + x] {
            UNMASKED => None,
            i => Some(i as usize),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Gathers masked values of `grid` into a vector ordered by mask index.
    pub fn gather<T: Copy>(&self, grid: &Grid<T>) -> Vec<T> {
        self.pixels.iter().map(|&(x, y)| *grid.get(x, y)).collect()
    }

    /// Scatters `values` back into a full grid, filling unmasked pixels with `fill`.
    pub fn scatter<T: Copy>(&self, values: &[T], fill: T) -> Grid<T> {
        let mut grid = Grid::filled(self.width, self.height, fill);
        for (&(x, y), &v) in self.pixels.iter().zip(values) {
            grid.set(x, y, v);
        }
        grid
    }
}
