use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentResult, HarnessError, PropertyCheck, Result, RunOutput, WallClock};

/// Contents of `result.json`. Everything except `wall_clock` is a pure
/// function of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema_version: u32,
    pub seed: u64,
    pub result: ExperimentResult,
    pub checks: Vec<PropertyCheck>,
    pub wall_clock: WallClock,
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(path, |w| writeln!(w, "{text}"))
}

/// Writes `config.json`, `result.json` and the per-figure CSV files into
/// `dir`, overwriting earlier runs. Returns the paths written.
pub fn emit_outputs(output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("config.json");
    write_json(&path, &output.config)?;
    written.push(path);

    let file = ResultFile {
        schema_version: super::SCHEMA_VERSION,
        seed: output.config.seed,
        result: output.result.clone(),
        checks: output.checks.clone(),
        wall_clock: output.wall_clock.clone(),
    };
    let path = dir.join("result.json");
    write_json(&path, &file)?;
    written.push(path);

    match &output.result {
        ExperimentResult::Simulate(sim) => {
            for (t, series) in sim.lengths.iter().zip(&sim.paths) {
                let path = dir.join(format!("path_T{t}.csv"));
                write_file(&path, |w| series.write_csv(w).map_err(std::io::Error::other))?;
                written.push(path);
            }
        }
        ExperimentResult::Tail(tail) => {
            for cell in &tail.cells {
                let path = dir.join(format!("tail_T{}.csv", cell.t));
                write_file(&path, |w| {
                    writeln!(w, "x,empirical,stderr,bound")?;
                    for p in &cell.points {
                        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p.x, p.empirical, p.stderr, p.bound)?;
                    }
                    Ok(())
                })?;
                written.push(path);
            }
        }
        ExperimentResult::Scaling(report) => {
            let path = dir.join("scaling.csv");
            write_file(&path, |w| report.write_csv(w))?;
            written.push(path);
        }
        ExperimentResult::MixingProfile(report) => {
            for profile in &report.profiles {
                let name = serde_json::to_value(profile.kind)?;
                let path = dir.join(format!("mixing_{}.csv", name.as_str().unwrap_or("profile")));
                write_file(&path, |w| profile.write_csv(w).map_err(std::io::Error::other))?;
                written.push(path);
            }
        }
        ExperimentResult::BiasCurve(report) => {
            let path = dir.join("bias.csv");
            write_file(&path, |w| {
                writeln!(w, "T,theta_star,bias,scaled_bias")?;
                for p in &report.points {
                    writeln!(w, "{},{:.16e},{:.16e},{:.16e}", p.t, p.theta_star, p.bias, p.scaled)?;
                }
                Ok(())
            })?;
            written.push(path);
        }
        ExperimentResult::DecomposeCheck(summary) => {
            let path = dir.join("decompose.csv");
            write_file(&path, |w| {
                writeln!(w, "T,max_residual,max_b_ratio,max_p1")?;
                for c in &summary.cells {
                    writeln!(w, "{},{:.16e},{:.16e},{:.16e}", c.t, c.max_residual, c.max_b_ratio, c.max_p1)?;
                }
                Ok(())
            })?;
            written.push(path);
        }
        ExperimentResult::MgfCheck(report) => {
            let path = dir.join("mgf.csv");
            write_file(&path, |w| {
                writeln!(w, "summands,sigma,kappa,eta_max,max_excess")?;
                for c in &report.cells {
                    writeln!(
                        w,
                        "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                        c.summands, c.combined.sigma, c.combined.kappa, c.eta_max, c.max_excess
                    )?;
                }
                Ok(())
            })?;
            written.push(path);
        }
    }
    Ok(written)
}
