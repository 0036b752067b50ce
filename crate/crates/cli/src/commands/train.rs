use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use dynamix_core::io::{read_dataset, write_checkpoint, Checkpoint};
use dynamix_core::model::{init_model, DynaMixModel};
use dynamix_core::seed;
use dynamix_core::training::{train, EpochRecord, TrainConfig};
use dynamix_core::Error;
use log::info;

use super::{ensure_dir, resolve_out};
use crate::config::{read_text, TrainFile};
use crate::error::{CliError, CliResult, Context, EXIT_DIVERGENCE};
use crate::manifest::{ManifestBuilder, TOOL_VERSION};
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// DMX1 dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Training config; model hyperparameters go in a `[model]` table.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `train` under the artifact root.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub const MODEL_FILE: &str = "model.dmxm";
pub const LOSS_FILE: &str = "loss.csv";
pub const LAST_GOOD_FILE: &str = "last_good.dmxm";

fn checkpoint(model: &DynaMixModel, config: &TrainConfig, epochs_done: usize) -> Checkpoint {
    let meta = BTreeMap::from([
        ("tool_version".to_string(), TOOL_VERSION.to_string()),
        ("seed".to_string(), config.seed.to_string()),
        ("epochs_completed".to_string(), epochs_done.to_string()),
    ]);
    Checkpoint::new(model.clone(), meta, Some(config.hash()))
}

fn loss_row(r: &EpochRecord) -> String {
    format!("{},{},{},{}\n", r.epoch, r.mse, r.reg, r.lr)
}

pub fn run(global: &GlobalArgs, args: &TrainArgs) -> CliResult<()> {
    let file = TrainFile::parse(&read_text(&args.config)?)?;
    let corpus = read_dataset(&args.dataset)?;
    let mut config = file.train;
    if let Some(s) = global.seed {
        config.seed = s;
    }
    if !file.has_context_length {
        config.context_length = corpus.context_length;
    }
    if !file.has_overlap {
        config.overlap = corpus.overlap.min(config.context_length);
    }
    config.validate()?;
    let mut model_config = file.model;
    if !file.has_model_n {
        model_config.n = corpus.dim();
    }
    model_config.validate()?;

    let out_dir = resolve_out(&args.out_dir, &global.root(), "train");
    ensure_dir(&out_dir)?;
    let ckpt_dir = out_dir.join("checkpoints");
    let loss_path = out_dir.join(LOSS_FILE);
    let mut manifest = ManifestBuilder::new("train", config.seed);
    manifest.config("", &config);
    manifest.config("model", &model_config);
    manifest.input(&args.dataset);
    manifest.input(&args.config);

    let mut model = init_model(model_config, seed::derive(config.seed, "model-init", &[]))?;
    let mut loss = std::io::BufWriter::new(
        std::fs::File::create(&loss_path).input_ctx(format!("creating {}", loss_path.display()))?,
    );
    loss.write_all(b"epoch,mse,reg,lr\n")?;
    let mut periodic: Vec<PathBuf> = Vec::new();
    let result = {
        let every = config.checkpoint_every;
        let cfg = config.clone();
        let mut observer = |r: &EpochRecord, m: &DynaMixModel| -> dynamix_core::Result<()> {
            loss.write_all(loss_row(r).as_bytes())?;
            loss.flush()?;
            info!("epoch {} mse {:.6} reg {:.6} lr {:.3e}", r.epoch, r.mse, r.reg, r.lr);
            if every > 0 && (r.epoch + 1) % every == 0 {
                std::fs::create_dir_all(&ckpt_dir)?;
                let path = ckpt_dir.join(format!("epoch_{:05}.dmxm", r.epoch + 1));
                write_checkpoint(&path, &checkpoint(m, &cfg, r.epoch + 1))?;
                periodic.push(path);
            }
            Ok(())
        };
        train(&mut model, &corpus, &config, &mut observer)
    };
    drop(loss);
    let history = match result {
        Ok(h) => h,
        Err(Error::TrainingDivergence { epoch, batch }) => {
            // `train` restored the latest parameters with a finite loss.
            let path = out_dir.join(LAST_GOOD_FILE);
            let saved = match write_checkpoint(&path, &checkpoint(&model, &config, epoch)) {
                Ok(()) => format!("last good checkpoint: {}", path.display()),
                Err(e) => format!("could not save the last good parameters: {e}"),
            };
            return Err(CliError {
                code: EXIT_DIVERGENCE,
                message: format!("training diverged at epoch {epoch}, batch {batch}; {saved}"),
            });
        }
        Err(e) => return Err(e.into()),
    };

    let model_path = out_dir.join(MODEL_FILE);
    write_checkpoint(&model_path, &checkpoint(&model, &config, history.len()))?;
    info!("wrote {}", model_path.display());
    manifest.output(&model_path);
    manifest.output(&loss_path);
    for p in &periodic {
        manifest.output(p);
    }
    manifest.detail("train_config_hash", &config.hash());
    if let Some(last) = history.last() {
        manifest.detail("final_epoch", last);
    }
    manifest.write(&manifest_path(&out_dir))?;
    Ok(())
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
