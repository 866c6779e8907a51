use num_complex::Complex64;
use rayon::prelude::*;

use super::{find_complex_zero, grid_seeds, locate_degenerate, scan_real_zeros_with, DegeneratePoint, GridSeedOptions, RealScanOptions};
use crate::error::{Error, Result};
use crate::gfunction::{Parity, SeriesOptions};
use crate::model::{FockSpace, ModelParams};
use crate::oracle::{assign_branches, sector_eigenvalues, sort_spectrum, truncate_spectrum, ParityLabel, Provenance, SpectrumLevel, SpectrumRecord};

/// Where complex-zero seeds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SeedSource {
    /// Complex eigenvalues of the truncated matrix.
    Oracle,
    /// Sign-structure cells of `(Re G, Im G)` on a coarse grid.
    Grid,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub e_window: (f64, f64),
    pub levels: usize,
    pub seed_source: SeedSource,
    pub space: FockSpace,
    pub series: SeriesOptions,
    /// Upper edge of the grid-seed rectangle in `Im E`.
    pub im_max: f64,
    /// Couplings closer than this to a degenerate point get the crossing injected.
    pub injection_tolerance: f64,
}

impl SpectrumOptions {
    pub fn new(e_window: (f64, f64), levels: usize) -> Self {
        Self {
            e_window,
            levels,
            seed_source: SeedSource::Oracle,
            space: FockSpace::default(),
            series: SeriesOptions::default(),
            im_max: 2.0,
            injection_tolerance: 1e-9,
        }
    }
}

const DEDUP: f64 = 1e-8;

/// Spectrum from G-function zeros on a coupling grid.
///
/// Grid points are solved in parallel and returned in grid order; branch ids
/// are assigned afterwards in one sequential pass. A point whose solve fails
/// is returned empty with the failure recorded.
pub fn assemble_spectrum(delta: f64, grid: &[f64], options: &SpectrumOptions) -> Result<Vec<SpectrumRecord>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("coupling grid must be strictly increasing".into()));
    }
    if grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::Argument("coupling grid must be finite and non-negative".into()));
    }
    let (e_lo, e_hi) = options.e_window;
    if !(e_lo.is_finite() && e_hi.is_finite() && e_lo <= e_hi) {
        return Err(Error::Argument(format!("invalid energy window [{e_lo}, {e_hi}]")));
    }

    let degeneracies = degeneracies_on_grid(delta, grid, options);
    let mut records: Vec<SpectrumRecord> = grid
        .par_iter()
        .map(|&g| {
            let solved = if g == 0.0 {
                Ok(closed_form(delta, options))
            } else {
                solve_point(delta, g, options, &degeneracies)
            };
            match solved {
                Ok(levels) => SpectrumRecord { g, levels, failures: Vec::new() },
                Err(e) => SpectrumRecord { g, levels: Vec::new(), failures: vec![e.to_string()] },
            }
        })
        .collect();
    assign_branches(&mut records);
    Ok(records)
}

fn degeneracies_on_grid(delta: f64, grid: &[f64], options: &SpectrumOptions) -> Vec<DegeneratePoint> {
    let (Some(&g_first), Some(&g_last)) = (grid.first(), grid.last()) else { return Vec::new() };
    let lo = g_first.max(1e-6);
    if g_last <= lo {
        return Vec::new();
    }
    let top = options.e_window.1.max(0.0).ceil() as usize;
    (1..=top)
        .filter_map(|n| locate_degenerate(delta, n, (lo, g_last + options.injection_tolerance)).ok())
        .collect()
}

/// `g = 0`: levels `n - Δ/2` with parity `(-1)ⁿ` and `n + Δ/2` with the opposite.
fn closed_form(delta: f64, options: &SpectrumOptions) -> Vec<SpectrumLevel> {
    let (e_lo, e_hi) = options.e_window;
    let half = 0.5 * delta;
    let mut levels = Vec::new();
    for n in 0..=options.space.cutoff() {
        let even_n = if n % 2 == 0 { Parity::Even } else { Parity::Odd };
        let odd_n = if n % 2 == 0 { Parity::Odd } else { Parity::Even };
        for (value, parity) in [(n as f64 - half, even_n), (n as f64 + half, odd_n)] {
            if value >= e_lo && value <= e_hi {
                levels.push(SpectrumLevel::new(Complex64::new(value, 0.0), parity.into(), Provenance::ClosedForm));
            }
        }
    }
    finish(levels, options.levels)
}

fn finish(mut levels: Vec<SpectrumLevel>, keep: usize) -> Vec<SpectrumLevel> {
    sort_spectrum(&mut levels, |l| l.value);
    truncate_spectrum(&mut levels, keep, |l| l.value);
    levels
}

fn solve_point(delta: f64, g: f64, options: &SpectrumOptions, degeneracies: &[DegeneratePoint]) -> Result<Vec<SpectrumLevel>> {
    let params = ModelParams::new(delta, g)?;
    let (e_lo, e_hi) = options.e_window;
    let scan = RealScanOptions { series: options.series, ..RealScanOptions::default() };
    let mut levels: Vec<SpectrumLevel> = scan_real_zeros_with(&params, e_lo, e_hi, &scan)?
        .into_iter()
        .map(|z| SpectrumLevel::new(Complex64::new(z.energy, 0.0), z.parity.into(), Provenance::GZero))
        .collect();

    let seeds: Vec<(Complex64, Parity)> = match options.seed_source {
        SeedSource::Oracle => sector_eigenvalues(&params, &options.space)?
            .into_iter()
            .filter(|(e, _)| e.im > 1e-6 && e.re >= e_lo && e.re <= e_hi)
            .collect(),
        SeedSource::Grid => {
            let grid = GridSeedOptions { re_range: (e_lo, e_hi), im_max: options.im_max, density: 8.0 };
            let mut seeds = Vec::new();
            for parity in Parity::BOTH {
                seeds.extend(grid_seeds(&params, parity, &grid)?.into_iter().map(|s| (s, parity)));
            }
            seeds
        }
    };

    let mut found: Vec<(Complex64, Parity)> = Vec::new();
    for (seed, parity) in seeds {
        let zero = match find_complex_zero(&params, seed, parity) {
            Ok(z) => z,
            Err(e) if options.seed_source == SeedSource::Grid => {
                // grid cells are only a necessary condition; a failed seed is not a failure
                let _ = e;
                continue;
            }
            Err(e) => return Err(e),
        };
        if zero.collapsed_to_real || zero.energy.re < e_lo || zero.energy.re > e_hi {
            continue;
        }
        if found.iter().any(|(e, p)| *p == parity && (*e - zero.energy).norm() < DEDUP) {
            continue;
        }
        found.push((zero.energy, parity));
    }
    for (energy, parity) in found {
        levels.push(SpectrumLevel::new(energy, parity.into(), Provenance::GZero));
        levels.push(SpectrumLevel::new(energy.conj(), parity.into(), Provenance::GZero));
    }

    for d in degeneracies {
        if (d.g_n - g).abs() <= options.injection_tolerance && d.e_n >= e_lo && d.e_n <= e_hi {
            for parity in Parity::BOTH {
                levels.push(SpectrumLevel::new(Complex64::new(d.e_n, 0.0), parity.into(), Provenance::InjectedDegeneracy));
            }
        }
    }
    Ok(finish(levels, options.levels))
}

impl From<Parity> for ParityLabel {
    fn from(p: Parity) -> Self {
        match p {
            Parity::Even => ParityLabel::Even,
            Parity::Odd => ParityLabel::Odd,
        }
    }
}
