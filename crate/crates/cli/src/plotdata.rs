//! Plot-ready output for a fitted model: archetype signatures and one
//! abundance image per archetype.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use ncaa_core::linalg::io::to_csv;
use ncaa_core::solver::NcaaModel;
use ncaa_core::DenseMatrix;

use crate::commands::{prepare_out_dir, require_file};
use crate::{CliError, CliResult};

/// How pixel `j` maps to an image position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PixelOrder {
    /// `j = row + col·height`, as in images flattened column by column.
    ColumnMajor,
    /// `j = row·width + col`.
    RowMajor,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Model JSON written by `solve`, `unmix` or `baseline`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long, value_enum, default_value_t = PixelOrder::ColumnMajor)]
    pub pixel_order: PixelOrder,
    #[arg(long)]
    pub out: PathBuf,
}

/// Anything carrying `w` and `h`.
#[derive(Deserialize)]
struct Factors {
    w: DenseMatrix,
    h: DenseMatrix,
}

fn load_factors(path: &Path) -> CliResult<(DenseMatrix, DenseMatrix)> {
    let text = fs::read_to_string(path)?;
    if let Ok(model) = NcaaModel::from_json(&text) {
        return Ok((model.archetypes(), model.h));
    }
    let f: Factors = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{} is not a model file: {e}", path.display())))?;
    Ok((f.w, f.h))
}

/// `m × (r + 1)`: 1-based band index, then one column per archetype.
pub fn signatures(w: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(w.rows(), w.cols() + 1, |i, j| if j == 0 { (i + 1) as f64 } else { w.get(i, j - 1) })
}

/// Row `k` of `h` laid out as a `height × width` image.
pub fn abundance_grid(h: &DenseMatrix, k: usize, height: usize, width: usize, order: PixelOrder) -> DenseMatrix {
    DenseMatrix::from_fn(height, width, |row, col| {
        let j = match order {
            PixelOrder::ColumnMajor => row + col * height,
            PixelOrder::RowMajor => row * width + col,
        };
        h.get(k, j)
    })
}

/// Binary PGM with the grid rescaled to `[0, 255]`; a constant grid is mid
/// gray.
pub fn pgm(grid: &DenseMatrix) -> Vec<u8> {
    let (lo, hi) = (grid.min_value(), grid.max_value());
    let mut out = format!("P5\n{} {}\n255\n", grid.cols(), grid.rows()).into_bytes();
    for row in 0..grid.rows() {
        for col in 0..grid.cols() {
            let v = grid.get(row, col);
            let level = if hi > lo { ((v - lo) / (hi - lo) * 255.0).round() } else { 128.0 };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

pub fn run(args: &PlotArgs) -> CliResult<()> {
    if args.height == 0 || args.width == 0 {
        return Err(CliError::config("height and width must be positive"));
    }
    require_file(&args.model)?;
    prepare_out_dir(&args.out)?;
    let (w, h) = load_factors(&args.model)?;
    if args.height * args.width != h.cols() {
        return Err(CliError::data(format!(
            "shape mismatch: {} × {} image but the model has {} pixels",
            args.height,
            args.width,
            h.cols()
        )));
    }

    fs::write(args.out.join("signatures.csv"), to_csv(&signatures(&w)))?;
    for k in 0..h.rows() {
        let grid = abundance_grid(&h, k, args.height, args.width, args.pixel_order);
        fs::write(args.out.join(format!("abundance_{}.csv", k + 1)), to_csv(&grid))?;
        fs::write(args.out.join(format!("abundance_{}.pgm", k + 1)), pgm(&grid))?;
    }
    println!("wrote {} archetypes to {}", h.rows(), args.out.display());
    Ok(())
}
