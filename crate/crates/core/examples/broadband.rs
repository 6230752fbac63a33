//! Full-sphere design for the built-in 12-microphone head with free-field
//! steering; prints per-band WNG and DI summaries.

use std::time::Instant;

use rlsfi::analysis::{beampattern, directivity_index, wng_curve_fir};
use rlsfi::analysis::{normalize_db, Normalization};
use rlsfi::array::{make_uniform_grid, ArrayGeometry, Direction};
use rlsfi::desired::{build_desired_1d, build_desired_2d};
use rlsfi::fir::synthesize_fir;
use rlsfi::solver::{design_broadband, DesignConfig};
use rlsfi::steering::{free_field_steering, DEFAULT_SOUND_SPEED};

fn main() -> rlsfi::Result<()> {
    let look = Direction::new(90.0, 90.0)?;
    let cfg = DesignConfig::new(-20.0, look, 20.0, 1024, 16000.0, (300.0, 5000.0))?;
    let geom = ArrayGeometry::head12();
    let grid = make_uniform_grid(5.0, 5.0, true)?;
    let steer = free_field_steering(&geom, &grid, &cfg.freqs(), DEFAULT_SOUND_SPEED)?;
    let desired = build_desired_2d(&grid, look, cfg.beamwidth_3db)?;

    let t = Instant::now();
    let fd = design_broadband(&steer, &desired, &cfg)?;
    println!("design: {:.1} s", t.elapsed().as_secs_f64());
    let bf = synthesize_fir(&fd)?;

    let band = cfg.freqs().bins_in_band(cfg.band.0, cfg.band.1);
    let wng = wng_curve_fir(&bf, &steer, &look)?.restrict(cfg.band.0, cfg.band.1);
    let min_wng = wng.values.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("min FIR WNG in band: {min_wng:.2} dB");
    let t = Instant::now();
    let bp = beampattern(&bf, &steer, &band)?;
    let di = directivity_index(&bp, &look)?;
    println!("beampattern: {:.1} s", t.elapsed().as_secs_f64());
    for (f, v) in di.freqs.iter().zip(&di.values).step_by(40) {
        println!("{f:7.1} Hz  DI {v:6.2} dB");
    }

    let ring = build_desired_1d(5.0, 90.0, look, cfg.beamwidth_3db)?;
    let fd1 = design_broadband(&steer, &ring, &cfg)?;
    let bf1 = synthesize_fir(&fd1)?;
    let bp1 = beampattern(&bf1, &steer, &band)?;
    let di1 = directivity_index(&bp1, &look)?;
    let wins = di
        .values
        .iter()
        .zip(&di1.values)
        .filter(|(a, b)| a > b)
        .count();
    println!("2-D DI above 1-D DI at {wins} of {} bins", band.len());
    let db1 = normalize_db(&bp1, Normalization::Global)?;
    let off_plane = db1
        .values
        .iter()
        .filter(|row| {
            let (i, _) = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |a, (i, v)| if *v > a.1 { (i, *v) } else { a },
                );
            (bp1.grid.directions()[i].elevation_deg - 90.0).abs() > 1e-9
        })
        .count();
    println!(
        "1-D design peaks off the horizontal plane at {off_plane} of {} bins",
        band.len()
    );
    for (f, v) in di1.freqs.iter().zip(&di1.values).step_by(40) {
        println!("{f:7.1} Hz  1-D DI {v:6.2} dB");
    }
    Ok(())
}
