use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fwsegsnr, FwSegSnrParams};
use crate::array::{great_circle_distance, Direction};
use crate::dsp::{reference_signals, render_scene, Acoustics, SceneSpec, SignalSource, SourceSpec};
use crate::error::{Error, Result};
use crate::fir::BeamformerFilters;

/// Target on the horizontal plane at each look azimuth, one interferer at
/// every (elevation, azimuth) pair. The default has seven targets
/// (0°…180°), seven interferer azimuths spread evenly over 15°…165° and
/// interferer elevations 90° and 73°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioMatrix {
    pub look_azimuths_deg: Vec<f64>,
    pub target_elevation_deg: f64,
    pub interferer_azimuths_deg: Vec<f64>,
    pub interferer_elevations_deg: Vec<f64>,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub interferer_gain_db: f64,
    pub sensor_noise_snr_db: Option<f64>,
    pub target_signal: SignalSource,
    pub interferer_signal: SignalSource,
    pub seed: u64,
}

impl Default for ScenarioMatrix {
    fn default() -> Self {
        ScenarioMatrix {
            look_azimuths_deg: (0..7).map(|i| 30.0 * i as f64).collect(),
            target_elevation_deg: 90.0,
            interferer_azimuths_deg: (0..7).map(|i| 15.0 + 25.0 * i as f64).collect(),
            interferer_elevations_deg: vec![90.0, 73.0],
            sample_rate_hz: 16000.0,
            duration_s: 4.0,
            interferer_gain_db: 0.0,
            sensor_noise_snr_db: None,
            target_signal: SignalSource::SpeechNoise { seed: 1 },
            interferer_signal: SignalSource::SpeechNoise { seed: 2 },
            seed: 0,
        }
    }
}

/// One cell of the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScene {
    pub phi_ld: f64,
    pub theta_int: f64,
    pub phi_int: f64,
    pub scene: SceneSpec,
}

impl ScenarioMatrix {
    pub fn targets(&self) -> Result<Vec<Direction>> {
        self.look_azimuths_deg
            .iter()
            .map(|&az| Direction::new(az, self.target_elevation_deg))
            .collect()
    }

    /// Cells ordered by look azimuth, then interferer elevation, then
    /// interferer azimuth.
    pub fn scenes(&self) -> Result<Vec<ScenarioScene>> {
        if self.look_azimuths_deg.is_empty()
            || self.interferer_azimuths_deg.is_empty()
            || self.interferer_elevations_deg.is_empty()
        {
            return Err(Error::invalid("scenario matrix has an empty axis"));
        }
        let mut out = Vec::new();
        for &phi_ld in &self.look_azimuths_deg {
            for &theta_int in &self.interferer_elevations_deg {
                for &phi_int in &self.interferer_azimuths_deg {
                    let scene = SceneSpec {
                        sample_rate_hz: self.sample_rate_hz,
                        duration_s: self.duration_s,
                        sources: vec![
                            SourceSpec {
                                signal: self.target_signal.clone(),
                                direction: Direction::new(phi_ld, self.target_elevation_deg)?,
                                gain_db: 0.0,
                            },
                            SourceSpec {
                                signal: self.interferer_signal.clone(),
                                direction: Direction::new(phi_int, theta_int)?,
                                gain_db: self.interferer_gain_db,
                            },
                        ],
                        target_index: 0,
                        sensor_noise_snr_db: self.sensor_noise_snr_db,
                        seed: self.seed,
                    };
                    scene.validate()?;
                    out.push(ScenarioScene {
                        phi_ld,
                        theta_int,
                        phi_int,
                        scene,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// A beamformer labelled for the report, steered at `look`.
#[derive(Debug, Clone)]
pub struct NamedDesign {
    pub id: String,
    pub look: Direction,
    pub filters: BeamformerFilters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCell {
    pub phi_ld: f64,
    pub theta_int: f64,
    pub phi_int: f64,
    pub design_id: String,
    pub input_db: f64,
    pub output_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub phi_ld: f64,
    pub theta_int: f64,
    pub design_id: String,
    pub mean_input_db: f64,
    pub mean_output_db: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub cells: Vec<ScenarioCell>,
    /// Means over interferer azimuths per (target, interferer elevation,
    /// design), in order of first appearance.
    pub summary: Vec<TargetSummary>,
}

impl ScenarioReport {
    pub fn from_cells(cells: Vec<ScenarioCell>) -> Self {
        let mut groups: Vec<(f64, f64, String, Vec<&ScenarioCell>)> = Vec::new();
        for c in &cells {
            match groups
                .iter_mut()
                .find(|g| g.0 == c.phi_ld && g.1 == c.theta_int && g.2 == c.design_id)
            {
                Some(g) => g.3.push(c),
                None => groups.push((c.phi_ld, c.theta_int, c.design_id.clone(), vec![c])),
            }
        }
        let summary = groups
            .into_iter()
            .map(|(phi_ld, theta_int, design_id, members)| {
                let n = members.len() as f64;
                TargetSummary {
                    phi_ld,
                    theta_int,
                    design_id,
                    mean_input_db: members.iter().map(|c| c.input_db).sum::<f64>() / n,
                    mean_output_db: members.iter().map(|c| c.output_db).sum::<f64>() / n,
                    cells: members.len(),
                }
            })
            .collect();
        ScenarioReport { cells, summary }
    }

    pub fn summary_for(
        &self,
        phi_ld: f64,
        theta_int: f64,
        design_id: &str,
    ) -> Option<&TargetSummary> {
        self.summary
            .iter()
            .find(|s| s.phi_ld == phi_ld && s.theta_int == theta_int && s.design_id == design_id)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "phi_ld,theta_int,phi_int,design_id,input_dB,output_dB")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.phi_ld, c.theta_int, c.phi_int, c.design_id, c.input_db, c.output_db
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "phi_ld,theta_int,design_id,mean_input_dB,mean_output_dB,cells"
        )?;
        for s in &self.summary {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.phi_ld, s.theta_int, s.design_id, s.mean_input_db, s.mean_output_db, s.cells
            )?;
        }
        Ok(())
    }
}

/// Renders every cell, scores the frontmost microphone (input) and each
/// design steered at the cell's target (output). Cells are processed in
/// parallel; the report keeps the order of `scenes` and, within a cell, of
/// `designs`.
pub fn eval_scenario(
    scenes: &[ScenarioScene],
    signals: &[Vec<f64>],
    designs: &[NamedDesign],
    acoustics: &Acoustics,
    p: &FwSegSnrParams,
) -> Result<ScenarioReport> {
    p.validate()?;
    if let Some(d) = designs
        .iter()
        .find(|d| d.filters.num_mics() != acoustics.geometry().num_mics())
    {
        return Err(Error::invalid(format!(
            "design {} has {} channels, the array {}",
            d.id,
            d.filters.num_mics(),
            acoustics.geometry().num_mics()
        )));
    }
    let per_cell = scenes
        .par_iter()
        .map(|cell| {
            let target = cell.scene.sources[cell.scene.target_index].direction;
            let matching: Vec<&NamedDesign> = designs
                .iter()
                .filter(|d| great_circle_distance(&d.look, &target) < 1e-6)
                .collect();
            if matching.is_empty() {
                return Err(Error::invalid(format!(
                    "no design is steered at the target direction {target}"
                )));
            }
            let fs = cell.scene.sample_rate_hz;
            let rendered = render_scene(&cell.scene, signals, acoustics)?;
            let mut rows = Vec::with_capacity(matching.len());
            let mut input_db = None;
            for d in matching {
                let refs = reference_signals(&rendered, &d.filters)?;
                let input = match input_db {
                    Some(v) => v,
                    None => {
                        let v = fwsegsnr(&refs.input_ref, &refs.input_test, fs, p)?.score_db;
                        input_db = Some(v);
                        v
                    }
                };
                rows.push(ScenarioCell {
                    phi_ld: cell.phi_ld,
                    theta_int: cell.theta_int,
                    phi_int: cell.phi_int,
                    design_id: d.id.clone(),
                    input_db: input,
                    output_db: fwsegsnr(&refs.output_ref, &refs.output_test, fs, p)?.score_db,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport::from_cells(
        per_cell.into_iter().flatten().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ArrayGeometry;

    fn cell(phi_ld: f64, phi_int: f64, id: &str, i: f64, o: f64) -> ScenarioCell {
        ScenarioCell {
            phi_ld,
            theta_int: 73.0,
            phi_int,
            design_id: id.into(),
            input_db: i,
            output_db: o,
        }
    }

    #[test]
    fn matrix_shape() {
        let m = ScenarioMatrix::default();
        let scenes = m.scenes().unwrap();
        assert_eq!(scenes.len(), 7 * 7 * 2);
        assert_eq!(
            (scenes[0].phi_ld, scenes[0].theta_int, scenes[0].phi_int),
            (0.0, 90.0, 15.0)
        );
        assert_eq!(scenes[6].phi_int, 165.0);
        assert_eq!(scenes[7].theta_int, 73.0);
        assert_eq!(scenes.last().unwrap().phi_ld, 180.0);
        assert_eq!(
            scenes[9].scene.sources[1].direction,
            Direction::new(65.0, 73.0).unwrap()
        );
        let empty = ScenarioMatrix {
            look_azimuths_deg: vec![],
            ..m
        };
        assert!(empty.scenes().is_err());
    }

    #[test]
    fn summary_means_and_permutation() {
        let cells = vec![
            cell(0.0, 15.0, "2d", 1.0, 4.0),
            cell(0.0, 45.0, "2d", 2.0, 5.5),
            cell(0.0, 75.0, "2d", -0.5, 7.25),
            cell(0.0, 15.0, "1d", 1.0, 0.1),
            cell(30.0, 15.0, "2d", 3.0, 3.0),
        ];
        let r = ScenarioReport::from_cells(cells.clone());
        let s = r.summary_for(0.0, 73.0, "2d").unwrap();
        assert_eq!(s.cells, 3);
        assert!((s.mean_input_db - 2.5 / 3.0).abs() < 1e-12);
        assert!((s.mean_output_db - 16.75 / 3.0).abs() < 1e-12);
        assert_eq!(r.summary.len(), 3);
        let mut rev = cells;
        rev.reverse();
        let r2 = ScenarioReport::from_cells(rev);
        for s in &r.summary {
            let t = r2.summary_for(s.phi_ld, s.theta_int, &s.design_id).unwrap();
            assert!((s.mean_output_db - t.mean_output_db).abs() < 1e-12);
            assert!((s.mean_input_db - t.mean_input_db).abs() < 1e-12);
        }
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(
            "phi_ld,theta_int,phi_int,design_id,input_dB,output_dB\n0,73,15,2d,1,4\n"
        ));
    }

    #[test]
    fn interferer_free_scenes_pass_target_untouched() {
        let geom = ArrayGeometry::head12();
        let ac = Acoustics::FreeField {
            geometry: &geom,
            sound_speed: 343.0,
        };
        let m = ScenarioMatrix {
            look_azimuths_deg: vec![90.0],
            interferer_azimuths_deg: vec![45.0],
            interferer_elevations_deg: vec![73.0],
            duration_s: 1.0,
            interferer_gain_db: f64::NEG_INFINITY,
            ..ScenarioMatrix::default()
        };
        let scenes = m.scenes().unwrap();
        let signals = scenes[0].scene.signals(std::path::Path::new(".")).unwrap();
        let mut taps = vec![0.0; 32];
        taps[16] = 1.0 / 12.0;
        let design = NamedDesign {
            id: "das".into(),
            look: Direction::new(90.0, 90.0).unwrap(),
            filters: BeamformerFilters::new(vec![taps; 12], 16, 16000.0).unwrap(),
        };
        let r = eval_scenario(
            &scenes,
            &signals,
            std::slice::from_ref(&design),
            &ac,
            &FwSegSnrParams::default(),
        )
        .unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!(r.cells[0].output_db >= 30.0);
        assert_eq!(r.cells[0].input_db, 35.0);

        let mut wrong = design;
        wrong.look = Direction::new(0.0, 90.0).unwrap();
        assert!(
            eval_scenario(&scenes, &signals, &[wrong], &ac, &FwSegSnrParams::default()).is_err()
        );
    }
}
