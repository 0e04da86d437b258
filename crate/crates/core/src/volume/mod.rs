//! Scalar volumes, segmentation and isosurface extraction.

mod io;
mod isosurface;
mod tables;

use std::collections::VecDeque;

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point3, Vec3};

pub use io::{read_volume, write_volume, ScalarType, VolumeHeader};
pub use isosurface::{extract_isosurface, extract_isosurface_reference};

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("volume dims must be positive, got {0:?}")]
    BadDims([usize; 3]),
    #[error("volume spacing must be positive, got {0:?}")]
    BadSpacing(Vec3),
    #[error("expected {expected} samples for the declared dims, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("sample {0} is not finite")]
    NonFiniteSample(usize),
    #[error("threshold range is empty: lo {lo} > hi {hi}")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("seed {0:?} is outside the volume")]
    SeedOutOfBounds([usize; 3]),
    #[error("seed {0:?} is not set in the mask")]
    SeedNotSet([usize; 3]),
    #[error("mask dims {mask:?} do not match volume dims {volume:?}")]
    MaskDims { mask: [usize; 3], volume: [usize; 3] },
    #[error("isosurface extraction needs at least 2 samples along every axis, got {0:?}")]
    Degenerate([usize; 3]),
    #[error("volume header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Regular grid of scalar samples, x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: [usize; 3],
    spacing: Vec3,
    origin: Point3,
    samples: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], spacing: Vec3, origin: Point3, samples: Vec<f64>) -> Result<ScalarVolume, VolumeError> {
        if dims.contains(&0) {
            return Err(VolumeError::BadDims(dims));
        }
        if !(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0) || !spacing.is_finite() {
            return Err(VolumeError::BadSpacing(spacing));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if samples.len() != expected {
            return Err(VolumeError::SampleCount { expected, got: samples.len() });
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(VolumeError::NonFiniteSample(i));
        }
        Ok(ScalarVolume { dims, spacing, origin, samples })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(dims: [usize; 3], spacing: Vec3, origin: Point3, f: impl Fn(Point3) -> f64 + Sync) -> Result<ScalarVolume, VolumeError> {
        use rayon::prelude::*;
        let plane = dims[0] * dims[1];
        let mut samples = vec![0.0; dims[0] * dims[1] * dims[2]];
        samples.par_chunks_mut(plane.max(1)).enumerate().for_each(|(k, slab)| {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = origin + Vec3::new(i as f64 * spacing.x, j as f64 * spacing.y, k as f64 * spacing.z);
                    slab[i + dims[0] * j] = f(p);
                }
            }
        });
        ScalarVolume::new(dims, spacing, origin, samples)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.samples[self.index(i, j, k)]
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> Point3 {
        self.origin + Vec3::new(i as f64 * self.spacing.x, j as f64 * self.spacing.y, k as f64 * self.spacing.z)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.x * self.spacing.y * self.spacing.z
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarVolume {
        ScalarVolume { samples: self.samples.iter().map(|&s| f(s)).collect(), ..self.clone() }
    }
}

/// One bit per voxel of a volume with the same dims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelMask {
    dims: [usize; 3],
    bits: BitVec,
}

impl VoxelMask {
    pub fn new(dims: [usize; 3]) -> VoxelMask {
        VoxelMask { dims, bits: BitVec::repeat(false, dims[0] * dims[1] * dims[2]) }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn linear(&self, v: [usize; 3]) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    pub fn get(&self, v: [usize; 3]) -> bool {
        self.bits[self.linear(v)]
    }

    pub fn get_linear(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, v: [usize; 3], on: bool) {
        let i = self.linear(v);
        self.bits.set(i, on);
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn contains(&self, v: [usize; 3]) -> bool {
        v[0] < self.dims[0] && v[1] < self.dims[1] && v[2] < self.dims[2]
    }

    /// True when every set voxel here is also set in `other`.
    pub fn is_subset_of(&self, other: &VoxelMask) -> bool {
        self.dims == other.dims && self.bits.iter_ones().all(|i| other.bits[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbors only.
    #[default]
    #[serde(rename = "6")]
    Six,
    /// Face, edge and corner neighbors.
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Voxels with `lo <= sample <= hi`.
pub fn threshold_segment(vol: &ScalarVolume, lo: f64, hi: f64) -> Result<VoxelMask, VolumeError> {
    if lo > hi {
        return Err(VolumeError::EmptyRange { lo, hi });
    }
    let mut mask = VoxelMask::new(vol.dims);
    for (i, &s) in vol.samples.iter().enumerate() {
        if lo <= s && s <= hi {
            mask.bits.set(i, true);
        }
    }
    Ok(mask)
}

/// The connected component of `mask` containing `seed`.
pub fn region_grow(mask: &VoxelMask, seed: [usize; 3], connectivity: Connectivity) -> Result<VoxelMask, VolumeError> {
    if !mask.contains(seed) {
        return Err(VolumeError::SeedOutOfBounds(seed));
    }
    if !mask.get(seed) {
        return Err(VolumeError::SeedNotSet(seed));
    }
    let dims = mask.dims;
    let offsets = connectivity.offsets();
    let mut out = VoxelMask::new(dims);
    let mut queue = VecDeque::new();
    out.set(seed, true);
    queue.push_back(seed);
    while let Some(v) = queue.pop_front() {
        for o in &offsets {
            let n = [v[0] as i64 + o[0], v[1] as i64 + o[1], v[2] as i64 + o[2]];
            if n.iter().zip(dims.iter()).any(|(&c, &d)| c < 0 || c >= d as i64) {
                continue;
            }
            let n = [n[0] as usize, n[1] as usize, n[2] as usize];
            let li = out.linear(n);
            if mask.bits[li] && !out.bits[li] {
                out.bits.set(li, true);
                queue.push_back(n);
            }
        }
    }
    Ok(out)
}

/// First set voxel in x-fastest order; the default region-growing seed.
pub fn first_set_voxel(mask: &VoxelMask) -> Option<[usize; 3]> {
    mask.bits.first_one().map(|i| {
        let [nx, ny, _] = mask.dims;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    })
}
