use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rlsfi::analysis::{
    beampattern, directivity_index, normalize_db, wng_curve_fir, wng_curve_from_weights, DbMap,
    Normalization,
};
use rlsfi::array::{make_uniform_grid, Direction};
use rlsfi::designio::{read_design, read_filters, write_design, write_filters};
use rlsfi::desired::{build_desired_1d, build_desired_2d, DesiredResponse};
use rlsfi::dsp::wav::{read_wav, write_wav};
use rlsfi::dsp::{filter_and_sum, render_scene, SceneSpec};
use rlsfi::fir::{synthesize_fir, BeamformerFilters};
use rlsfi::metrics::{eval_scenario, NamedDesign};
use rlsfi::solver::{design_broadband, DesignConfig, FrequencyDesign};
use rlsfi::steering::{FrequencyGrid, SteeringSet};
use rlsfi::{Error, Result};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{config_error, CommonArgs, Mode, RunConfig};
use crate::output::{config_hash, Output};

fn out_dir(common: &CommonArgs) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn design_one(
    cfg: &RunConfig,
    steer: &SteeringSet,
    dcfg: &DesignConfig,
    mode: Mode,
) -> Result<(DesiredResponse, FrequencyDesign, BeamformerFilters)> {
    let desired = match mode {
        Mode::TwoD => build_desired_2d(steer.grid(), dcfg.look, dcfg.beamwidth_3db)?,
        Mode::OneD => build_desired_1d(
            cfg.grid_step_deg[0],
            dcfg.look.elevation_deg,
            dcfg.look,
            dcfg.beamwidth_3db,
        )?,
    };
    let fd = design_broadband(steer, &desired, dcfg)?;
    for q in fd.clamped_bins() {
        let d = &fd.diagnostics[q];
        eprintln!(
            "warning: {} design at {}: bin {q} ({} Hz): WNG floor {:.2} dB is not attainable, clamped to {:.2} dB",
            mode.id(),
            dcfg.look,
            fd.freqs.freq_hz(q),
            dcfg.gamma_db(),
            10.0 * d.gamma_used.log10()
        );
    }
    let bf = synthesize_fir(&fd)?;
    if bf.report.flagged {
        eprintln!(
            "warning: FIR synthesis dropped imaginary parts at bins 0 and L/2 holding {:.3e} of the weight energy",
            bf.report.discarded_imag_ratio
        );
    }
    Ok((desired, fd, bf))
}

fn design_config(cfg: &RunConfig, look: Direction) -> Result<DesignConfig> {
    DesignConfig::new(
        cfg.gamma_db,
        look,
        cfg.beamwidth_deg,
        cfg.num_taps,
        cfg.sample_rate_hz,
        cfg.band(),
    )
}

fn write_diagnostics(w: &mut dyn Write, fd: &FrequencyDesign) -> std::io::Result<()> {
    writeln!(
        w,
        "bin,freq_hz,residual,wng_db,gamma_used_db,feasibility_margin,lambda,clamped,bisection_steps,stationarity,constraint_error,feasible"
    )?;
    for (q, d) in fd.diagnostics.iter().enumerate() {
        writeln!(
            w,
            "{q},{},{},{},{},{},{},{},{},{},{},{}",
            fd.freqs.freq_hz(q),
            d.residual,
            10.0 * d.wng.log10(),
            10.0 * d.gamma_used.log10(),
            d.feasibility_margin,
            d.lambda,
            d.clamped,
            d.bisection_steps,
            d.stationarity,
            d.constraint_error,
            d.feasible()
        )?;
    }
    Ok(())
}

pub fn design(common: &CommonArgs) -> Result<()> {
    let cfg = RunConfig::from_args(common)?;
    let dcfg = design_config(&cfg, cfg.look()?)?;
    let source = cfg.source()?;
    let steer = source.steering(&dcfg.freqs())?;
    let (desired, fd, bf) = design_one(&cfg, &steer, &dcfg, cfg.mode)?;

    let out = Output::create(
        &out_dir(common),
        config_hash(&json!({"command": "design", "config": cfg})),
    )?;
    write_design(out.path("design.json"), &fd, Some("filters.json"))?;
    write_filters(out.path("filters.json"), &bf)?;
    out.csv("diagnostics.csv", |w| write_diagnostics(w, &fd))?;
    out.csv("desired.csv", |w| desired.write_csv(w))?;

    let band = fd.freqs.bins_in_band(dcfg.band.0, dcfg.band.1);
    let min_wng = band
        .iter()
        .map(|&q| 10.0 * fd.diagnostics[q].wng.log10())
        .fold(f64::INFINITY, f64::min);
    let infeasible = fd.diagnostics.iter().filter(|d| !d.feasible()).count();
    println!(
        "{} design: {} mics, L = {}, {} bins, {} clamped, {} infeasible; min WNG in band {:.2} dB",
        cfg.mode.id(),
        fd.num_mics(),
        dcfg.num_taps,
        fd.weights.len(),
        fd.clamped_bins().len(),
        infeasible,
        min_wng
    );
    println!("wrote {}", out.path("design.json").display());
    Ok(())
}

pub fn analyze(common: &CommonArgs, design: &Path, filters: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::from_args(common)?;
    let norm: Normalization = cfg.normalization.parse()?;
    let loaded = read_design(design)?;
    let fd = loaded.design;
    let filters_path = filters.map(Path::to_path_buf).or(loaded.filters_path);
    let bf = match &filters_path {
        Some(p) => read_filters(p)?,
        None => synthesize_fir(&fd)?,
    };
    if bf.num_mics() != fd.num_mics()
        || bf.len() != fd.freqs.num_taps()
        || bf.sample_rate() != fd.freqs.sample_rate()
    {
        return Err(config_error(format!(
            "filters ({} mics, L = {}, {} Hz) do not belong to the design ({} mics, L = {}, {} Hz)",
            bf.num_mics(),
            bf.len(),
            bf.sample_rate(),
            fd.num_mics(),
            fd.freqs.num_taps(),
            fd.freqs.sample_rate()
        )));
    }
    let source = cfg.source()?;
    let steer = source.steering(&fd.freqs)?;
    if steer.num_mics() != fd.num_mics() {
        return Err(config_error(format!(
            "design has {} channels but the steering model {}",
            fd.num_mics(),
            steer.num_mics()
        )));
    }
    let (lo, hi) = cfg.band();
    let bins = fd.freqs.bins_in_band(lo, hi);
    if bins.is_empty() {
        return Err(config_error(format!(
            "no design bin lies in [{lo}, {hi}] Hz"
        )));
    }
    let look = fd.look;
    let bp = beampattern(&bf, &steer, &bins)?;
    let di = directivity_index(&bp, &look)?;
    let wng_fir = wng_curve_fir(&bf, &steer, &look)?.restrict(lo, hi);
    let wng_design = wng_curve_from_weights(&fd, &steer, &look)?.restrict(lo, hi);
    let db = normalize_db(&bp, norm)?;
    let picked = DbMap {
        freqs: db
            .freqs
            .iter()
            .step_by(cfg.pattern_bin_stride)
            .cloned()
            .collect(),
        grid: db.grid.clone(),
        values: db
            .values
            .iter()
            .step_by(cfg.pattern_bin_stride)
            .cloned()
            .collect(),
    };

    let mut hashed = json!({"command": "analyze", "config": cfg, "design": file_digest(design)?});
    if let Some(p) = &filters_path {
        hashed["filters"] = json!(file_digest(p)?);
    }
    let out = Output::create(&out_dir(common), config_hash(&hashed))?;
    out.csv("beampattern.csv", |w| picked.write_csv(w))?;
    out.csv("di.csv", |w| di.write_csv(w))?;
    out.csv("wng.csv", |w| {
        writeln!(w, "freq_hz,wng_design_db,wng_fir_db")?;
        for ((f, a), b) in wng_design
            .freqs
            .iter()
            .zip(&wng_design.values)
            .zip(&wng_fir.values)
        {
            writeln!(w, "{f},{a},{b}")?;
        }
        Ok(())
    })?;

    let min_fir = wng_fir.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean_di = di.values.iter().sum::<f64>() / di.values.len() as f64;
    println!(
        "{} bins in [{lo}, {hi}] Hz: min FIR WNG {min_fir:.2} dB, mean DI {mean_di:.2} dB",
        bins.len()
    );
    Ok(())
}

pub fn apply(
    common: &CommonArgs,
    filters: &Path,
    input: &Path,
    output: Option<&Path>,
) -> Result<()> {
    let cfg = RunConfig::from_args(common)?;
    let bf = read_filters(filters)?;
    let x = read_wav(input)?;
    let y = filter_and_sum(&bf, &x)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let dir = out_dir(common);
            Output::create(&dir, String::new())?;
            dir.join("output.wav")
        }
    };
    write_wav(&path, &y, cfg.wav_format)?;
    println!("wrote {} ({} samples)", path.display(), y.len());
    Ok(())
}

pub fn synth(common: &CommonArgs, scene: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::from_args(common)?;
    let scene_path = scene
        .map(Path::to_path_buf)
        .or_else(|| cfg.scene.clone())
        .ok_or_else(|| {
            config_error("no scene: pass --scene <file> or set \"scene\" in the config")
        })?;
    let mut spec = SceneSpec::load(&scene_path)?;
    if let Some(s) = cfg.seed {
        spec.seed = s;
    }
    let source = cfg.source()?;
    let signals = spec.signals(scene_path.parent().unwrap_or(Path::new(".")))?;
    let rendered = render_scene(&spec, &signals, &source.acoustics())?;

    let out = Output::create(&out_dir(common), String::new())?;
    write_wav(out.path("mix.wav"), &rendered.mix, cfg.wav_format)?;
    for (i, stem) in rendered.stems.iter().enumerate() {
        write_wav(out.path(&format!("stem_{i}.wav")), stem, cfg.wav_format)?;
    }
    if let Some(noise) = &rendered.noise {
        write_wav(out.path("noise.wav"), noise, cfg.wav_format)?;
    }
    println!(
        "rendered {} sources to {} channels × {} samples in {}",
        rendered.stems.len(),
        rendered.mix.num_channels(),
        rendered.mix.len(),
        out.path("").display()
    );
    Ok(())
}

pub fn eval(common: &CommonArgs) -> Result<()> {
    let cfg = RunConfig::from_args(common)?;
    let mut matrix = cfg.matrix.clone();
    if let Some(s) = cfg.seed {
        matrix.seed = s;
    }
    if matrix.sample_rate_hz != cfg.sample_rate_hz {
        return Err(config_error(format!(
            "scenario rate {} Hz differs from the design rate {} Hz",
            matrix.sample_rate_hz, cfg.sample_rate_hz
        )));
    }
    if cfg.eval_modes.is_empty() {
        return Err(config_error("eval_modes is empty"));
    }
    let scenes = matrix.scenes()?;
    let source = cfg.source()?;
    let steer = source.steering(&FrequencyGrid::new(cfg.sample_rate_hz, cfg.num_taps)?)?;
    let mut designs = Vec::new();
    for look in matrix.targets()? {
        let dcfg = design_config(&cfg, look)?;
        for &mode in &cfg.eval_modes {
            let (_, _, filters) = design_one(&cfg, &steer, &dcfg, mode)?;
            designs.push(NamedDesign {
                id: mode.id().into(),
                look,
                filters,
            });
        }
    }
    let base = common
        .config
        .as_deref()
        .and_then(Path::parent)
        .unwrap_or(Path::new("."));
    let signals = scenes[0].scene.signals(base)?;
    let report = eval_scenario(
        &scenes,
        &signals,
        &designs,
        &source.acoustics(),
        &cfg.fwsegsnr,
    )?;

    let hashed = json!({"command": "eval", "config": cfg, "matrix": matrix});
    let out = Output::create(&out_dir(common), config_hash(&hashed))?;
    out.csv("report.csv", |w| report.write_csv(w))?;
    out.csv("summary.csv", |w| report.write_summary_csv(w))?;
    println!("{} cells, {} design rows", scenes.len(), report.cells.len());
    println!("phi_ld theta_int design  input_dB  output_dB");
    for s in &report.summary {
        println!(
            "{:6} {:9} {:6} {:9.2} {:10.2}",
            s.phi_ld, s.theta_int, s.design_id, s.mean_input_db, s.mean_output_db
        );
    }
    Ok(())
}

pub fn grid_info(
    common: &CommonArgs,
    az_step: Option<f64>,
    el_step: Option<f64>,
    poles: bool,
) -> Result<()> {
    let cfg = RunConfig::from_args(common)?;
    let az = az_step.unwrap_or(cfg.grid_step_deg[0]);
    let el = el_step.unwrap_or(cfg.grid_step_deg[1]);
    let grid = make_uniform_grid(az, el, poles)?;
    let info = json!({
        "azimuth_step_deg": az,
        "elevation_step_deg": el,
        "poles": poles,
        "directions": grid.len(),
        "weight_sum_sr": grid.weights().iter().sum::<f64>(),
        "fingerprint": grid.fingerprint(),
    });
    println!("{}", serde_json::to_string_pretty(&info).expect("json"));
    if common.out.is_some() {
        let out = Output::create(
            &out_dir(common),
            config_hash(&json!({"command": "grid-info", "grid": info})),
        )?;
        out.csv("grid.csv", |w| {
            writeln!(w, "azimuth_deg,elevation_deg,weight_sr")?;
            for (d, wt) in grid.directions().iter().zip(grid.weights()) {
                writeln!(w, "{},{},{}", d.azimuth_deg, d.elevation_deg, wt)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
