// SPDX-License-Identifier: Apache-2.0

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::manifest::RunManifest;
use super::{GradcheckArgs, OptimizeArgs, SweepArgs, EXIT_OK, EXIT_RUNTIME};
use crate::autograd::{grad_check, FdSteps};
use crate::error::{Error, Result};
use crate::experiments::{
    build_experiment, run_table_sweep, table_rows, ExperimentConfig, SweepOptions, TableId, MAX_EXPERIMENT_QUBITS,
};
use crate::optimize::{continue_optimization, BestParams, RunOutcome, RunState, StopReason};
use crate::waveforms::write_phase_table_csv;

/// Largest register the finite-difference check accepts.
pub const MAX_GRADCHECK_QUBITS: usize = 4;

fn load_config(path: &Path, seed: Option<u64>, epochs: Option<usize>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.optimizer.epochs = Some(e);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_with<F>(path: &Path, manifest: &mut RunManifest, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    manifest.add(path);
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Checkpoint {
    /// Hash of the config with the epoch budget removed, so that a resumed
    /// run may extend it.
    resume_key: String,
    state: RunState,
}

fn resume_key(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.resolved();
    c.optimizer.epochs = None;
    let json = serde_json::to_vec(&c)?;
    Ok(hex::encode(Sha256::digest(json)))
}

fn stop_label(stop: &StopReason) -> &'static str {
    match stop {
        StopReason::Converged { .. } => "converged",
        StopReason::EpochsExhausted => "epochs_exhausted",
        StopReason::Aborted { .. } => "aborted",
    }
}

pub fn cmd_optimize(a: &OptimizeArgs) -> Result<u8> {
    let cfg = load_config(&a.config, a.seed, a.epochs)?;
    if a.checkpoint_every == 0 {
        return Err(Error::invalid("checkpoint_every", "must be at least 1"));
    }
    fs::create_dir_all(&a.out)?;
    let mut manifest = RunManifest::start("optimize", Some(cfg.hash()?), vec![cfg.seed]);
    let key = resume_key(&cfg)?;

    let config_path = a.out.join("config.toml");
    let resolved = cfg.resolved().to_toml_string()?;
    write_with(&config_path, &mut manifest, |w| Ok(w.write_all(resolved.as_bytes())?))?;

    let mut exp = build_experiment(&cfg)?;
    let checkpoint_path = a.out.join("checkpoint.json");
    let state = if a.resume {
        let file = File::open(&checkpoint_path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", checkpoint_path.display())))?;
        let cp: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if cp.resume_key != key {
            return Err(Error::Config(format!(
                "{} was written for a different config",
                checkpoint_path.display()
            )));
        }
        cp.state
    } else {
        RunState::new(exp.model.params().clone(), &exp.run)?
    };

    let save = |state: &RunState| -> Result<()> {
        let cp = Checkpoint {
            resume_key: key.clone(),
            state: state.clone(),
        };
        let mut w = BufWriter::new(File::create(&checkpoint_path)?);
        serde_json::to_writer(&mut w, &cp)?;
        w.flush()?;
        Ok(())
    };

    let every = a.checkpoint_every;
    let outcome = match state.log.records.last() {
        Some(last) if last.loss < exp.run.loss_break => RunOutcome {
            stop: StopReason::Converged { epoch: last.epoch },
            state,
        },
        _ => continue_optimization(&mut exp.model, &exp.run, state, &mut |s| {
            if s.next_epoch % every == 0 {
                save(s)?;
            }
            Ok(())
        })?,
    };
    save(&outcome.state)?;
    manifest.add(&checkpoint_path);

    let log_path = a.out.join("run_log.jsonl");
    write_with(&log_path, &mut manifest, |w| outcome.log().write_jsonl(w))?;

    let status = stop_label(&outcome.stop);
    if let StopReason::Aborted { epoch, reason } = &outcome.stop {
        eprintln!("optimization aborted at epoch {epoch}: {reason}");
    }
    if outcome.log().is_empty() {
        manifest.finish(status);
        manifest.save(&a.out.join("manifest.json"))?;
        return Ok(EXIT_RUNTIME);
    }

    let stop = outcome.stop.clone();
    let result = exp.finish(outcome)?;
    let best_epoch = result.outcome.log().best().map(|r| r.epoch).unwrap_or_default();
    let best = BestParams {
        epoch: best_epoch,
        loss: result.best_loss,
        fidelity: result.best_fidelity,
        params: result.best_params.values(),
    };
    let best_path = a.out.join("best_params.json");
    write_with(&best_path, &mut manifest, |w| {
        serde_json::to_writer_pretty(&mut *w, &best)?;
        writeln!(w)?;
        Ok(())
    })?;
    let drive_path = a.out.join("drive.csv");
    write_with(&drive_path, &mut manifest, |w| result.best_drive.write_csv(w))?;
    let phases_path = a.out.join("phases.csv");
    write_with(&phases_path, &mut manifest, |w| write_phase_table_csv(&result.best_phases, w))?;

    manifest.finish(status);
    manifest.save(&a.out.join("manifest.json"))?;

    let fid = result
        .best_fidelity
        .map(|f| format!(", fidelity {:.4}%", 100.0 * f))
        .unwrap_or_default();
    println!(
        "{status} after {} epochs: best loss {:.6e} at epoch {best_epoch}{fid}",
        result.outcome.log().len(),
        result.best_loss
    );
    Ok(match stop {
        StopReason::Aborted { .. } => EXIT_RUNTIME,
        _ => EXIT_OK,
    })
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<u8> {
    let table: TableId = a.table.parse()?;
    if a.seed.is_empty() {
        return Err(Error::invalid("seed", "at least one seed is required"));
    }
    let max_qubits = a.max_qubits.unwrap_or(MAX_EXPERIMENT_QUBITS);
    if max_qubits > MAX_EXPERIMENT_QUBITS {
        return Err(Error::TooManyQubits {
            n: max_qubits,
            max: MAX_EXPERIMENT_QUBITS,
        });
    }
    let opts = SweepOptions {
        seeds: a.seed.clone(),
        epochs: a.epochs,
        max_qubits,
        qubits: a.qubits.clone(),
        labels: None,
    };
    let definition = serde_json::json!({
        "table": table,
        "options": opts,
        "rows": table_rows(table).iter().map(|r| r.config.resolved()).collect::<Vec<_>>(),
    });
    let hash = hex::encode(Sha256::digest(serde_json::to_vec(&definition)?));
    fs::create_dir_all(&a.out)?;
    let mut manifest = RunManifest::start("sweep", Some(hash), opts.seeds.clone());

    let result = run_table_sweep(table, &opts)?;

    let csv_path = a.out.join(format!("{table}.csv"));
    write_with(&csv_path, &mut manifest, |w| result.write_csv(w))?;
    let json_path = a.out.join(format!("{table}.json"));
    write_with(&json_path, &mut manifest, |w| {
        result.write_json(&mut *w)?;
        writeln!(w)?;
        Ok(())
    })?;
    let drives = a.out.join("drives");
    for row in &result.rows {
        if let Some(drive) = &row.best_drive {
            fs::create_dir_all(&drives)?;
            let p: PathBuf = drives.join(format!("{table}_{}.csv", slug(&row.label)));
            write_with(&p, &mut manifest, |w| drive.write_csv(w))?;
        }
    }

    let failed = result.rows.iter().filter(|r| r.failed()).count();
    manifest.finish(if failed == 0 { "ok" } else { "failed" });
    manifest.save(&a.out.join("manifest.json"))?;

    for r in &result.rows {
        let best = r
            .best_fidelity_pct
            .map(|f| format!("{f:.2}"))
            .unwrap_or_else(|| "failed".into());
        println!("{table} {:<16} {best:>8}  (reference {})", r.label, r.reference);
        for run in r.runs.iter().filter(|run| run.error.is_some()) {
            eprintln!("  seed {}: {}", run.seed, run.error.as_deref().unwrap_or_default());
        }
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_RUNTIME })
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<u8> {
    let cfg = load_config(&a.config, a.seed, None)?;
    if cfg.n_qubits > MAX_GRADCHECK_QUBITS {
        return Err(Error::TooManyQubits {
            n: cfg.n_qubits,
            max: MAX_GRADCHECK_QUBITS,
        });
    }
    fs::create_dir_all(&a.out)?;
    let mut manifest = RunManifest::start("gradcheck", Some(cfg.hash()?), vec![cfg.seed]);
    let exp = build_experiment(&cfg)?;
    let params = exp.model.params().clone();
    let loss = exp.model.frozen_loss(&params)?;
    let report = grad_check(&loss, &params, &FdSteps::default())?;

    let report_path = a.out.join("gradcheck.csv");
    write_with(&report_path, &mut manifest, |w| report.write_csv(w))?;
    manifest.finish(if report.passed() { "passed" } else { "failed" });
    manifest.save(&a.out.join("manifest.json"))?;

    for e in report.failures() {
        eprintln!(
            "{}[{}]: analytic {:.6e} numeric {:.6e}",
            e.param, e.component, e.analytic, e.numeric
        );
    }
    println!(
        "{} components, {} failed, max relative error {:.3e}",
        report.entries.len(),
        report.failures().count(),
        report.max_rel_err()
    );
    Ok(if report.passed() { EXIT_OK } else { EXIT_RUNTIME })
}
