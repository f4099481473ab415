//! Tile rasterizer. Every cell kind and color maps to a fixed bitmap so the
//! emission from state to pixels is a pure function.

use serde::{Deserialize, Serialize};

use super::grid::{CellKind, Color, Direction, GridState};

pub const DEFAULT_TILE_SIZE: usize = 8;

const LAVA: [u8; 3] = [255, 128, 0];
const AGENT: [u8; 3] = [255, 0, 0];

/// Pixel image with channel-interleaved, row-major layout and intensities in
/// `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl Observation {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Observation {
            width,
            height,
            pixels: vec![value; width * height * 3],
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.width, self.height, 3)
    }

    pub fn same_shape(&self, other: &Observation) -> bool {
        self.shape() == other.shape()
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Extracts the `tile * tile` block at tile coordinates `(tx, ty)`.
    pub fn tile_block(&self, tile: usize, tx: usize, ty: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(tile * tile * 3);
        for y in ty * tile..(ty + 1) * tile {
            let start = (y * self.width + tx * tile) * 3;
            out.extend_from_slice(&self.pixels[start..start + tile * 3]);
        }
        out
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|p| (0.0..=1.0).contains(p))
    }
}

#[derive(Clone, Copy)]
struct Canvas {
    tile: usize,
}

impl Canvas {
    fn uv(&self, px: usize, py: usize) -> (f32, f32) {
        let t = self.tile as f32;
        ((px as f32 + 0.5) / t, (py as f32 + 0.5) / t)
    }
}

fn inside_triangle(p: (f32, f32), a: (f32, f32), b: (f32, f32), c: (f32, f32)) -> bool {
    let sign = |p1: (f32, f32), p2: (f32, f32), p3: (f32, f32)| {
        (p1.0 - p3.0) * (p2.1 - p3.1) - (p2.0 - p3.0) * (p1.1 - p3.1)
    };
    let d1 = sign(p, a, b);
    let d2 = sign(p, b, c);
    let d3 = sign(p, c, a);
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

fn cell_rgb(cell: CellKind, u: f32, v: f32) -> [u8; 3] {
    let black = [0, 0, 0];
    match cell {
        CellKind::Empty => black,
        CellKind::Wall => Color::Grey.rgb(),
        CellKind::Goal => Color::Green.rgb(),
        CellKind::Lava => {
            let ripple = 0.08 * ((u * 4.0).fract() - 0.5).abs();
            if (v - 0.3 - ripple).abs() < 0.07 || (v - 0.7 - ripple).abs() < 0.07 {
                black
            } else {
                LAVA
            }
        }
        CellKind::Door {
            color,
            open,
            locked,
        } => {
            let c = color.rgb();
            if open {
                // thin frame along the top edge
                if v < 0.2 {
                    c
                } else {
                    black
                }
            } else if locked {
                let keyhole = (0.55..0.8).contains(&u) && (0.4..0.6).contains(&v);
                if keyhole {
                    black
                } else {
                    c
                }
            } else {
                let border = !(0.15..=0.85).contains(&u) || !(0.15..=0.85).contains(&v);
                let handle = (0.65..0.8).contains(&u) && (0.45..0.6).contains(&v);
                if border || handle {
                    c
                } else {
                    black
                }
            }
        }
        CellKind::Key { color } => {
            let c = color.rgb();
            let (du, dv) = (u - 0.5, v - 0.3);
            let ring = {
                let r2 = du * du + dv * dv;
                (0.02..0.06).contains(&r2)
            };
            let shaft = (0.4..0.6).contains(&u) && (0.35..0.95).contains(&v);
            let teeth =
                (0.6..0.8).contains(&u) && ((0.6..0.7).contains(&v) || (0.8..0.9).contains(&v));
            if ring || shaft || teeth {
                c
            } else {
                black
            }
        }
        CellKind::Ball { color } => {
            let (du, dv) = (u - 0.5, v - 0.5);
            if du * du + dv * dv < 0.14 {
                color.rgb()
            } else {
                black
            }
        }
    }
}

fn agent_mask(dir: Direction, u: f32, v: f32) -> bool {
    // triangle pointing east, rotated about the tile centre
    let (mut x, mut y) = (u - 0.5, v - 0.5);
    for _ in 0..dir as usize {
        // undo one quarter turn per clockwise step from east
        let (nx, ny) = (y, -x);
        x = nx;
        y = ny;
    }
    inside_triangle((x, y), (-0.42, -0.42), (0.45, 0.0), (-0.42, 0.42))
}

/// Renders the full grid at `tile` pixels per cell.
pub fn render_with_tile(state: &GridState, tile: usize) -> Observation {
    let width = state.width * tile;
    let height = state.height * tile;
    let mut pixels = vec![0.0f32; width * height * 3];
    let canvas = Canvas { tile };
    for row in 0..state.height {
        for col in 0..state.width {
            let cell = state.get(col, row);
            let has_agent = state.agent_pos == (col, row);
            for py in 0..tile {
                for px in 0..tile {
                    let (u, v) = canvas.uv(px, py);
                    let rgb = if has_agent && agent_mask(state.agent_dir, u, v) {
                        AGENT
                    } else {
                        cell_rgb(cell, u, v)
                    };
                    let x = col * tile + px;
                    let y = row * tile + py;
                    let i = (y * width + x) * 3;
                    for c in 0..3 {
                        pixels[i + c] = rgb[c] as f32 / 255.0;
                    }
                }
            }
        }
    }
    Observation {
        width,
        height,
        pixels,
    }
}

pub fn render(state: &GridState) -> Observation {
    render_with_tile(state, DEFAULT_TILE_SIZE)
}
