//! Binary morphology with the 6-connected (face-adjacent) structuring element.

use crate::geometry::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphologyOp {
    Closing,
    Dilation,
}

const FACE_OFFSETS: [[i64; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

/// Dense boolean grid used as scratch space.
struct Grid {
    dims: [usize; 3],
    data: Vec<bool>,
}

impl Grid {
    fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    fn at(&self, x: i64, y: i64, z: i64, outside: bool) -> bool {
        if x < 0
            || y < 0
            || z < 0
            || x as usize >= self.dims[0]
            || y as usize >= self.dims[1]
            || z as usize >= self.dims[2]
        {
            return outside;
        }
        self.data[self.idx(x as usize, y as usize, z as usize)]
    }

    /// One pass of dilation (`erode == false`) or erosion (`erode == true`).
    fn step(&self, erode: bool) -> Grid {
        let [nx, ny, nz] = self.dims;
        let mut out = vec![false; self.data.len()];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let i = self.idx(x, y, z);
                    let c = self.data[i];
                    let (xi, yi, zi) = (x as i64, y as i64, z as i64);
                    out[i] = if erode {
                        c && FACE_OFFSETS
                            .iter()
                            .all(|o| self.at(xi + o[0], yi + o[1], zi + o[2], false))
                    } else {
                        c || FACE_OFFSETS
                            .iter()
                            .any(|o| self.at(xi + o[0], yi + o[1], zi + o[2], false))
                    };
                }
            }
        }
        Grid {
            dims: self.dims,
            data: out,
        }
    }
}

pub fn dilate(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    morphology(mask, MorphologyOp::Dilation, iterations)
}

pub fn close(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    morphology(mask, MorphologyOp::Closing, iterations)
}

/// Applies `op` with the face-adjacent cross, `iterations` times.
///
/// Closing is computed on a grid padded by `iterations` voxels so it behaves
/// as on an unbounded lattice and stays extensive at the volume border.
pub fn morphology(mask: &BinaryMask, op: MorphologyOp, iterations: usize) -> BinaryMask {
    if iterations == 0 {
        return mask.clone();
    }
    let dims = mask.geometry().dims();
    let pad = match op {
        MorphologyOp::Dilation => 0,
        MorphologyOp::Closing => iterations,
    };
    let pdims = [dims[0] + 2 * pad, dims[1] + 2 * pad, dims[2] + 2 * pad];
    let mut grid = Grid {
        dims: pdims,
        data: vec![false; pdims[0] * pdims[1] * pdims[2]],
    };
    for (i, &v) in mask.data().iter().enumerate() {
        if v {
            let [x, y, z] = mask.geometry().ijk(i);
            let j = grid.idx(x + pad, y + pad, z + pad);
            grid.data[j] = true;
        }
    }

    for _ in 0..iterations {
        grid = grid.step(false);
    }
    if op == MorphologyOp::Closing {
        for _ in 0..iterations {
            grid = grid.step(true);
        }
    }

    let mut out = BinaryMask::empty(mask.geometry().clone());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if grid.data[grid.idx(x + pad, y + pad, z + pad)] {
                    out.set([x, y, z], true);
                }
            }
        }
    }
    out
}
