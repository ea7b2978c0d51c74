use nalgebra::DMatrix;
use rayon::prelude::*;
use splitting::{Representation, Splitting, Which};
use torus_geometry::{Grid, Vector, MAX_DIM};

type Block = [f64; MAX_DIM * MAX_DIM];

/// The three projections of a splitting at every node of a grid, stored
/// densely for repeated application.
#[derive(Clone, Debug)]
pub struct NodeProjectors {
    dim: usize,
    constant: bool,
    blocks: Vec<[Block; 3]>,
}

fn to_block(m: &DMatrix<f64>, d: usize) -> Block {
    let mut b = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..d {
        for j in 0..d {
            b[i * MAX_DIM + j] = m[(i, j)];
        }
    }
    b
}

fn slot(which: Which) -> usize {
    match which {
        Which::S => 0,
        Which::C => 1,
        Which::U => 2,
    }
}

impl NodeProjectors {
    pub fn new(s: &Splitting, grid: &Grid) -> NodeProjectors {
        let d = s.dim();
        let pack = |p: [DMatrix<f64>; 3]| [to_block(&p[0], d), to_block(&p[1], d), to_block(&p[2], d)];
        match s.representation() {
            Representation::Constant(f) => NodeProjectors {
                dim: d,
                constant: true,
                blocks: vec![pack([f.proj_s.clone(), f.proj_c.clone(), f.proj_u.clone()])],
            },
            Representation::PerGridPoint { grid: own, frames } if own == grid => NodeProjectors {
                dim: d,
                constant: false,
                blocks: frames
                    .par_iter()
                    .map(|f| pack([f.proj_s.clone(), f.proj_c.clone(), f.proj_u.clone()]))
                    .collect(),
            },
            Representation::PerGridPoint { .. } => NodeProjectors {
                dim: d,
                constant: false,
                blocks: (0..grid.len()).into_par_iter().map(|i| pack(s.projectors_at(&grid.node(i)))).collect(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// Row-major projection matrix (stride `MAX_DIM`) at node `i`.
    pub fn block(&self, i: usize, which: Which) -> &Block {
        let i = if self.constant { 0 } else { i };
        &self.blocks[i][slot(which)]
    }

    pub fn apply(&self, i: usize, which: Which, v: &Vector) -> Vector {
        apply_block(self.block(i, which), self.dim, v)
    }
}

/// `B v` for a row-major block with stride `MAX_DIM`.
pub fn apply_block(b: &Block, d: usize, v: &Vector) -> Vector {
    let mut out = Vector::zeros(d);
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += b[i * MAX_DIM + j] * v[j];
        }
        out[i] = acc;
    }
    out
}
