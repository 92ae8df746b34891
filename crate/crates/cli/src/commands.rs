use std::path::{Path, PathBuf};

use dynoid::datagen::{generate_drone_dataset, generate_tank_dataset, load_dataset, save_dataset, SystemKind};
use dynoid::diagnostics::check_error_bound;
use dynoid::reduction::{compression_sweep, write_sweep_csv, SweepRow};
use dynoid::regressor::{
    evaluate_rollout, train_regressor, write_eval_csv, write_summary_csv, EvalSummaryRow, RegressorModel,
    StateMapSpec,
};
use dynoid::systems::Tank;
use dynoid::{seed, Error, Result};

use crate::config::ExperimentConfig;

const STREAM_TRAIN: u64 = 41;

pub const CONFIG_FILE: &str = "config.json";
pub const MODEL_FILE: &str = "model.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const EVAL_SUMMARY_FILE: &str = "eval_summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const AUTOENCODER_FILE: &str = "autoencoder.json";
pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";

pub fn window_dir(out: &Path, ell: usize) -> PathBuf {
    out.join(format!("ell{ell}"))
}

fn rate_dir(out: &Path, ell: usize, rate: f64) -> PathBuf {
    window_dir(out, ell).join(format!("rate{}", (rate * 100.0).round() as u64))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Validate the effective config and echo it into the output directory. Steps that
/// consume earlier artifacts (`create == false`) require the directory to exist.
pub fn prepare(cfg: &ExperimentConfig, out: &Path, create: bool) -> Result<()> {
    cfg.validate()?;
    if create {
        create_dir(out)?;
    } else if !out.is_dir() {
        return Err(Error::Io {
            path: out.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        });
    }
    cfg.save(&out.join(CONFIG_FILE))
}

pub fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ds = match cfg.system {
        SystemKind::Tank => generate_tank_dataset(&cfg.tank, cfg.seed)?,
        SystemKind::Drone2d => generate_drone_dataset(&cfg.drone, cfg.seed)?,
    };
    save_dataset(&ds, out)?;
    let steps: usize = ds.trajectories().map(|t| t.len()).sum();
    println!(
        "{}: {} train / {} valid / {} test trajectories, {} steps total, dt {} s",
        ds.system,
        ds.train.len(),
        ds.valid.len(),
        ds.test.len(),
        steps,
        ds.dt
    );
    Ok(())
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ds = load_dataset(out)?;
    for &ell in &cfg.windows {
        let spec = StateMapSpec::new(ell, ds.n_u, ds.n_y)?;
        let (model, report) = train_regressor(&ds, spec, &cfg.train, seed::derive(cfg.seed, STREAM_TRAIN, ell as u64))?;
        let dir = window_dir(out, ell);
        create_dir(&dir)?;
        model.save(&dir.join(MODEL_FILE))?;
        report.write_csv(&dir.join(LOSS_FILE))?;
        println!(
            "ell={ell}: best epoch {} valid loss {:.4e}",
            report.best_epoch, report.best_valid_loss
        );
    }
    Ok(())
}

fn load_model(out: &Path, ell: usize) -> Result<RegressorModel> {
    RegressorModel::load(&window_dir(out, ell).join(MODEL_FILE))
}

pub fn eval(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ds = load_dataset(out)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &ell in &cfg.windows {
        let model = load_model(out, ell)?;
        let e = evaluate_rollout(&model, &ds.test, cfg.horizon)?;
        match Option::<EvalSummaryRow>::from(&e) {
            Some(s) => {
                println!("ell={ell}: {}-step rollout mse {:.4e} over {} trajectories", s.horizon, s.mse, s.n_trajectories);
                summary.push(s);
            }
            None => log::warn!("ell={ell}: no test trajectory is long enough to evaluate"),
        }
        rows.extend(e.rows);
    }
    write_eval_csv(&out.join(EVAL_FILE), &rows)?;
    write_summary_csv(&out.join(EVAL_SUMMARY_FILE), &summary)
}

pub fn reduce(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ds = load_dataset(out)?;
    let mut rows: Vec<SweepRow> = Vec::new();
    for &ell in &cfg.windows {
        let model = load_model(out, ell)?;
        for cell in compression_sweep(&model, &ds, &cfg.rates, &cfg.autoencoder, cfg.horizon, cfg.seed)? {
            if let Some(ae) = &cell.autoencoder {
                let dir = rate_dir(out, ell, cell.row.rate);
                create_dir(&dir)?;
                ae.save(&dir.join(AUTOENCODER_FILE))?;
            }
            println!(
                "ell={ell} rate={:.2} latent={}: recon {:.4e} rollout {:.4e}",
                cell.row.rate, cell.row.latent_dim, cell.row.recon_mse, cell.row.rollout_mse
            );
            rows.push(cell.row);
        }
    }
    write_sweep_csv(&out.join(SWEEP_FILE), &rows)
}

pub fn diagnose(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    if cfg.system != SystemKind::Tank {
        return Err(Error::Usage(format!(
            "diagnose supports the tank plant only; {} has a 6-dimensional state, too large for grid inversion",
            cfg.system
        )));
    }
    let sys = Tank {
        params: cfg.tank.params,
    };
    let report = check_error_bound(&sys, &cfg.diagnostics, cfg.seed)?;
    report.write_json(&out.join(DIAGNOSTICS_JSON))?;
    report.write_csv(&out.join(DIAGNOSTICS_CSV))?;
    println!(
        "ell={} sigma={}: gamma_hat {:.6} (lower bound), alpha_hat {:.6} (upper bound)",
        report.ell, report.noise_sigma, report.gamma_f_hat, report.alpha_ell_hat
    );
    match report.satisfied_fraction {
        Some(f) => println!("bound satisfied in {:.1}% of {} trials", 100.0 * f, report.samples.len()),
        None => println!("sampled observability constant is 0: system looks unobservable at this window"),
    }
    Ok(())
}
