//! Latent codebook. Code images are stored as grids of ids into a shared
//! tile dictionary, which keeps checkpoints small and lets the distance from
//! a query image to every code be assembled from per-tile distances.

use std::borrow::Borrow;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::Observation;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Codebook {
    width: usize,
    height: usize,
    tile: usize,
    /// Match tolerance in MARE units; 0 means exact matching.
    radius: f64,
    tiles: Vec<Vec<f32>>,
    codes: Vec<Vec<u32>>,
    #[serde(skip)]
    tile_index: HashMap<Vec<u32>, u32>,
    #[serde(skip)]
    code_index: HashMap<Vec<u32>, usize>,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.tile == other.tile
            && self.radius.to_bits() == other.radius.to_bits()
            && self.codes == other.codes
            && self.tiles.len() == other.tiles.len()
            && self
                .tiles
                .iter()
                .zip(&other.tiles)
                .all(|(a, b)| bits(a) == bits(b))
    }
}

fn bits(block: &[f32]) -> Vec<u32> {
    block.iter().map(|v| v.to_bits()).collect()
}

/// Greatest tile edge (up to 8) dividing both image sides.
fn pick_tile(width: usize, height: usize) -> usize {
    (1..=8)
        .rev()
        .find(|t| width.is_multiple_of(*t) && height.is_multiple_of(*t))
        .unwrap_or(1)
}

impl Codebook {
    pub fn empty(width: usize, height: usize, radius: f64) -> Self {
        Codebook {
            width,
            height,
            tile: pick_tile(width, height),
            radius,
            tiles: Vec::new(),
            codes: Vec::new(),
            tile_index: HashMap::new(),
            code_index: HashMap::new(),
        }
    }

    /// Rebuilds lookup tables after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.tile_index = self
            .tiles
            .iter()
            .enumerate()
            .map(|(i, t)| (bits(t), i as u32))
            .collect();
        self.code_index = self
            .codes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_tiles(&self) -> usize {
        self.tiles.len()
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn tiles_x(&self) -> usize {
        self.width / self.tile
    }

    fn tiles_y(&self) -> usize {
        self.height / self.tile
    }

    fn entries(&self) -> usize {
        self.width * self.height * 3
    }

    pub fn check_shape(&self, x: &Observation) -> Result<()> {
        if x.width != self.width || x.height != self.height || x.pixels.len() != self.entries() {
            return Err(Error::Contract(format!(
                "observation is {}x{} but the codebook expects {}x{}",
                x.width, x.height, self.width, self.height
            )));
        }
        Ok(())
    }

    fn blocks(&self, x: &Observation) -> Vec<Vec<f32>> {
        let mut out = Vec::with_capacity(self.tiles_x() * self.tiles_y());
        for ty in 0..self.tiles_y() {
            for tx in 0..self.tiles_x() {
                out.push(x.tile_block(self.tile, tx, ty));
            }
        }
        out
    }

    /// Tile-id signature of `x`, or `None` if some tile is not in the
    /// dictionary.
    fn signature(&self, x: &Observation) -> Option<Vec<u32>> {
        self.blocks(x)
            .iter()
            .map(|b| self.tile_index.get(&bits(b)).copied())
            .collect()
    }

    fn intern(&mut self, x: &Observation) -> Vec<u32> {
        self.blocks(x)
            .into_iter()
            .map(|b| {
                let key = bits(&b);
                if let Some(id) = self.tile_index.get(&key) {
                    *id
                } else {
                    let id = self.tiles.len() as u32;
                    self.tiles.push(b);
                    self.tile_index.insert(key, id);
                    id
                }
            })
            .collect()
    }

    /// Index of the code whose image equals `x` bit for bit.
    pub fn lookup(&self, x: &Observation) -> Option<usize> {
        if self.check_shape(x).is_err() {
            return None;
        }
        self.signature(x)
            .and_then(|sig| self.code_index.get(&sig).copied())
    }

    /// Adds `x` as a new code and returns its index, or returns the existing
    /// index if an identical image is already stored.
    pub fn insert(&mut self, x: &Observation) -> Result<usize> {
        self.check_shape(x)?;
        let sig = self.intern(x);
        if let Some(&k) = self.code_index.get(&sig) {
            return Ok(k);
        }
        let k = self.codes.len();
        self.code_index.insert(sig.clone(), k);
        self.codes.push(sig);
        Ok(k)
    }

    /// Builds a codebook and the code assigned to each frame. With radius 0
    /// frames share a code iff identical; otherwise a frame joins the first
    /// code within `radius` (leader clustering) and code images are the
    /// member means.
    pub fn build<I, B>(frames: I, radius: f64) -> Result<(Codebook, Vec<usize>)>
    where
        I: IntoIterator<Item = B>,
        B: Borrow<Observation>,
    {
        let mut iter = frames.into_iter().peekable();
        let (width, height) = match iter.peek() {
            Some(first) => (first.borrow().width, first.borrow().height),
            None => return Err(Error::Calibration("no frames to build a codebook".into())),
        };
        let mut book = Codebook::empty(width, height, radius);
        if radius <= 0.0 {
            let mut assignment = Vec::new();
            for x in iter {
                assignment.push(book.insert(x.borrow())?);
            }
            return Ok((book, assignment));
        }

        let mut leaders = Codebook::empty(width, height, radius);
        let mut sums: Vec<Vec<f64>> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut assignment = Vec::new();
        for x in iter {
            let x = x.borrow();
            leaders.check_shape(x)?;
            let k = match leaders.lookup(x) {
                Some(k) => k,
                None => {
                    let d = leaders.distances(x)?;
                    match d
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v <= radius)
                        .min_by(|a, b| a.1.total_cmp(b.1))
                    {
                        Some((k, _)) => k,
                        None => {
                            let k = leaders.insert(x)?;
                            sums.push(vec![0.0; x.pixels.len()]);
                            counts.push(0);
                            k
                        }
                    }
                }
            };
            for (s, p) in sums[k].iter_mut().zip(&x.pixels) {
                *s += *p as f64;
            }
            counts[k] += 1;
            assignment.push(k);
        }
        for (s, n) in sums.iter().zip(&counts) {
            let mean = Observation {
                width: leaders.width,
                height: leaders.height,
                pixels: s.iter().map(|v| (v / *n as f64) as f32).collect(),
            };
            // means of distinct clusters may coincide; keep indices aligned
            let sig = book.intern(&mean);
            book.code_index
                .entry(sig.clone())
                .or_insert(book.codes.len());
            book.codes.push(sig);
        }
        Ok((book, assignment))
    }

    pub fn mean_image(&self, k: usize) -> Observation {
        let mut pixels = vec![0.0f32; self.entries()];
        let row_len = self.tile * 3;
        for (pos, &tid) in self.codes[k].iter().enumerate() {
            let (tx, ty) = (pos % self.tiles_x(), pos / self.tiles_x());
            let block = &self.tiles[tid as usize];
            for r in 0..self.tile {
                let y = ty * self.tile + r;
                let start = (y * self.width + tx * self.tile) * 3;
                pixels[start..start + row_len]
                    .copy_from_slice(&block[r * row_len..(r + 1) * row_len]);
            }
        }
        Observation {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Mean absolute difference between `x` and every code image.
    pub fn distances(&self, x: &Observation) -> Result<Vec<f64>> {
        self.check_shape(x)?;
        let blocks = self.blocks(x);
        // per-position L1 distance to each dictionary tile, filled lazily
        let unknown = f64::NAN;
        let mut table = vec![unknown; blocks.len() * self.tiles.len()];
        let n = self.entries() as f64;
        let mut out = Vec::with_capacity(self.codes.len());
        for sig in &self.codes {
            let mut total = 0.0;
            for (pos, &tid) in sig.iter().enumerate() {
                let slot = pos * self.tiles.len() + tid as usize;
                let mut v = table[slot];
                if v.is_nan() {
                    v = blocks[pos]
                        .iter()
                        .zip(&self.tiles[tid as usize])
                        .map(|(a, b)| (*a as f64 - *b as f64).abs())
                        .sum();
                    table[slot] = v;
                }
                total += v;
            }
            out.push(total / n);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::mare;

    fn image(seed: u32, w: usize, h: usize) -> Observation {
        let mut x = Observation::filled(w, h, 0.0);
        for (i, p) in x.pixels.iter_mut().enumerate() {
            *p = (((i as u32).wrapping_mul(2654435761).wrapping_add(seed * 97)) % 7) as f32 / 6.0;
        }
        x
    }

    #[test]
    fn exact_matching_deduplicates() {
        let a = image(1, 16, 8);
        let b = image(2, 16, 8);
        let frames = vec![a.clone(), b.clone(), a.clone(), b.clone()];
        let (book, assign) = Codebook::build(&frames, 0.0).unwrap();
        assert_eq!(book.len(), 2);
        assert_eq!(assign, vec![0, 1, 0, 1]);
        assert_eq!(book.mean_image(0), a);
        assert_eq!(book.lookup(&b), Some(1));
        assert_eq!(book.lookup(&image(3, 16, 8)), None);
    }

    #[test]
    fn tiled_distance_matches_pixel_mare() {
        let frames: Vec<_> = (0..5).map(|s| image(s, 24, 16)).collect();
        let (book, _) = Codebook::build(&frames, 0.0).unwrap();
        let q = image(11, 24, 16);
        let d = book.distances(&q).unwrap();
        for (k, dk) in d.iter().enumerate() {
            let direct = mare(&q, &book.mean_image(k)).unwrap();
            assert!((dk - direct).abs() < 1e-12, "{dk} vs {direct}");
        }
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let (book, _) = Codebook::build([image(0, 8, 8)], 0.0).unwrap();
        assert!(matches!(
            book.distances(&image(0, 16, 8)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn radius_clustering_averages_members() {
        let a = Observation::filled(8, 8, 0.0);
        let mut b = a.clone();
        b.pixels[0] = 1.0;
        let far = Observation::filled(8, 8, 1.0);
        let (book, assign) = Codebook::build([a, b, far.clone()], 0.01).unwrap();
        assert_eq!(assign, vec![0, 0, 1]);
        assert_eq!(book.len(), 2);
        assert!((book.mean_image(0).pixels[0] - 0.5).abs() < 1e-6);
        assert_eq!(book.mean_image(1), far);
    }
}
