//! Two-talker evaluation of 1-D and 2-D designs on the built-in head with
//! free-field acoustics; prints the per-target summary.

use std::path::Path;
use std::time::Instant;

use rlsfi::array::{make_uniform_grid, ArrayGeometry};
use rlsfi::desired::{build_desired_1d, build_desired_2d};
use rlsfi::dsp::Acoustics;
use rlsfi::fir::synthesize_fir;
use rlsfi::metrics::{eval_scenario, FwSegSnrParams, NamedDesign, ScenarioMatrix};
use rlsfi::solver::{design_broadband, DesignConfig};
use rlsfi::steering::{free_field_steering, FrequencyGrid, DEFAULT_SOUND_SPEED};

fn main() -> rlsfi::Result<()> {
    let t = Instant::now();
    let geom = ArrayGeometry::head12();
    let grid = make_uniform_grid(5.0, 5.0, true)?;
    let freqs = FrequencyGrid::new(16000.0, 1024)?;
    let steer = free_field_steering(&geom, &grid, &freqs, DEFAULT_SOUND_SPEED)?;
    let matrix = ScenarioMatrix::default();
    let mut designs = Vec::new();
    for look in matrix.targets()? {
        let cfg = DesignConfig::new(-20.0, look, 20.0, 1024, 16000.0, (300.0, 5000.0))?;
        for (id, desired) in [
            ("1d", build_desired_1d(5.0, 90.0, look, 20.0)?),
            ("2d", build_desired_2d(&grid, look, 20.0)?),
        ] {
            let filters = synthesize_fir(&design_broadband(&steer, &desired, &cfg)?)?;
            designs.push(NamedDesign {
                id: id.into(),
                look,
                filters,
            });
        }
    }
    println!("designs: {:.1} s", t.elapsed().as_secs_f64());
    let scenes = matrix.scenes()?;
    let signals = scenes[0].scene.signals(Path::new("."))?;
    let acoustics = Acoustics::FreeField {
        geometry: &geom,
        sound_speed: DEFAULT_SOUND_SPEED,
    };
    let report = eval_scenario(
        &scenes,
        &signals,
        &designs,
        &acoustics,
        &FwSegSnrParams::default(),
    )?;
    println!("total: {:.1} s", t.elapsed().as_secs_f64());
    report.write_summary_csv(std::io::stdout()).expect("stdout");
    Ok(())
}
