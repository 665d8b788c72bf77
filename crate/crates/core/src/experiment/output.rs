use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Provenance, Scenario, ScenarioConfig};
use super::plot;
use super::run::{compile, Readout, RunOptions, RunReport};
use super::setup::{spectral_model, Instrument};
use super::ExperimentError;
use crate::analysis::FIT_CSV_HEADER;

pub const SWEEP_CSV_HEADER: &str =
    "seq_id,x,electrical_contrast_percent,electrical_std_error,optical_contrast_percent,optical_std_error,error";

/// The config as run: seed and provenance filled in, table paths absolute.
pub fn manifest_config(cfg: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut out = cfg.clone();
    out.seed = seed;
    let p = &mut out.physics;
    for t in [
        &mut p.excitation_table,
        &mut p.ionization_table,
        &mut p.background_table,
    ]
    .into_iter()
    .flatten()
    {
        if let Ok(abs) = std::path::absolute(&*t) {
            *t = abs;
        }
    }
    let source = cfg
        .provenance
        .as_ref()
        .and_then(|p| p.source_config.clone());
    out.provenance = Some(Provenance {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        source_config: source,
        seed,
    });
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:e}"))
}

fn sweep_csv(report: &RunReport) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for p in &report.points {
        let _ = writeln!(
            s,
            "{},{:e},{},{},{},{},{}",
            p.seq_id,
            p.x,
            opt(p.electrical.map(|c| c.contrast_percent)),
            opt(p.electrical.map(|c| c.std_error)),
            opt(p.optical.map(|c| c.contrast_percent)),
            opt(p.optical.map(|c| c.std_error)),
            p.error.as_deref().unwrap_or("").replace(',', ";"),
        );
    }
    s
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), ExperimentError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, contents)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

/// Writes every artefact of `report` under `dir` and returns the paths.
pub(super) fn write_bundle(
    dir: &Path,
    cfg: &ScenarioConfig,
    report: &RunReport,
    opts: &RunOptions,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    let mut w = Writer {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };

    if !report.points.is_empty() {
        w.put("sweep.csv", sweep_csv(report))?;
    }
    for f in &report.fits {
        let mut s = format!("{FIT_CSV_HEADER}\n");
        if let Ok(fit) = &f.outcome {
            s.push_str(&fit.csv_rows());
        }
        w.put(&format!("fits_{}.csv", f.readout.name()), s)?;
    }
    for (r, spec) in &report.spectra {
        let mut s = String::from("freq_Hz,amplitude\n");
        for (f, a) in spec.freqs.iter().zip(&spec.amplitudes) {
            let _ = writeln!(s, "{f:e},{a:e}");
        }
        w.put(&format!("spectrum_{}.csv", r.name()), s)?;
    }
    if !report.wavelengths.is_empty() {
        for r in [Readout::Electrical, Readout::Optical] {
            let mut table = String::new();
            let mut csv = String::from("wavelength_nm,contrast_percent,error_percent,error\n");
            let mut any = false;
            for wl in &report.wavelengths {
                let c = match r {
                    Readout::Electrical => &wl.electrical,
                    Readout::Optical => &wl.optical,
                };
                match c {
                    Some(Ok(c)) => {
                        any = true;
                        let _ = writeln!(table, "{} {:e}", wl.wavelength_nm, c.contrast_percent);
                        let _ = writeln!(
                            csv,
                            "{},{:e},{:e},",
                            wl.wavelength_nm, c.contrast_percent, c.error_percent
                        );
                    }
                    Some(Err(e)) => {
                        any = true;
                        let _ = writeln!(csv, "{},,,{}", wl.wavelength_nm, e.replace(',', ";"));
                    }
                    None => {}
                }
            }
            if any {
                w.put(&format!("contrast_{}.txt", r.name()), table)?;
                w.put(&format!("contrast_{}.csv", r.name()), csv)?;
            }
        }
        let model = spectral_model(cfg)?;
        w.put("tables/excitation.txt", model.excitation.to_text())?;
        w.put("tables/ionization.txt", model.ionization.to_text())?;
        w.put("tables/background.txt", model.background.to_text())?;
    }
    for img in &report.confocal {
        w.put(
            &format!("confocal_{}um.csv", img.spot_diameter_um),
            img.to_csv(),
        )?;
    }

    if opts.raw_traces {
        if matches!(
            cfg.scenario,
            Scenario::PdmrSweep | Scenario::RabiSweep | Scenario::HahnEcho
        ) {
            let inst = Instrument::from_config(cfg)?;
            for (seq, _) in compile(cfg, &inst)? {
                w.put(&format!("timeline/seq_{:04}.txt", seq.id), seq.dump(1))?;
            }
        }
        for raw in &report.raw {
            let id = raw.current.seq_id;
            if !raw.current.is_empty() {
                w.put(
                    &format!("traces/seq_{id:04}_current.csv"),
                    raw.current.to_csv(),
                )?;
            }
            if !raw.counts.is_empty() {
                w.put(
                    &format!("traces/seq_{id:04}_counts.csv"),
                    raw.counts.to_csv(),
                )?;
            }
        }
    }
    if opts.plots {
        for (name, svg) in plot::render_all(cfg, report)? {
            w.put(&format!("plots/{name}.svg"), svg)?;
        }
    }

    let manifest = manifest_config(cfg, report.seed);
    let mut text = manifest.to_toml_string();
    let _ = write!(text, "\n# elapsed_s = {:.3}\n", report.elapsed_s);
    w.put("manifest.toml", text)?;
    Ok(w.files)
}
