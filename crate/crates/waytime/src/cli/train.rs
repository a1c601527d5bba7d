use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use waytime_core::dataprep::{split_by_curve, LabeledSample};
use waytime_core::seqmodel::{
    EpochRecord, LossKind, Mlp, MlpBank, MlpConfig, ModelConfig, Precision, Real, SeqSample, TrainConfig, Trainer,
    Transformer,
};

use super::{base_config, usage, write_manifest, CliError, CliResult, Common, GlobalArgs};
use crate::checkpoint::{
    load_transformer_state, read_manifest, save_mlp_bank, save_transformer_state, TrainingMeta,
};
use crate::formats::csvout::write_loss_history;
use crate::formats::read_dataset;
use crate::hash::{file_sha256, json_sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Transformer,
    Mlp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    PerStep,
    Cumulative,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled dataset JSONL from gen-data.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// Checkpoint file stem inside the output directory.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub enc_layers: Option<usize>,
    #[arg(long)]
    pub dec_layers: Option<usize>,
    #[arg(long)]
    pub ffn_dim: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    /// Hidden widths of each MLP, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub mlp_hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Also train on samples whose descent hit the iteration cap.
    #[arg(long)]
    pub include_unconverged: bool,
    /// Continue the checkpoint in the output directory; its config hash
    /// must match.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many epochs of the run (the checkpoint stays
    /// resumable).
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    #[serde(flatten)]
    pub common: Common,
    pub dataset: Option<PathBuf>,
    pub model_kind: ModelChoice,
    pub name: String,
    pub model: ModelConfig,
    pub mlp_hidden: Vec<usize>,
    pub train: TrainConfig,
    pub include_unconverged: bool,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            common: Common::default(),
            dataset: None,
            model_kind: ModelChoice::Transformer,
            name: "model".into(),
            model: ModelConfig::default(),
            mlp_hidden: vec![64, 64],
            train: TrainConfig::default(),
            include_unconverged: false,
        }
    }
}

impl TrainRunConfig {
    pub fn resolve(g: &GlobalArgs, a: &TrainArgs) -> CliResult<Self> {
        let mut c: Self = base_config(g, "train")?;
        c.common.apply(g);
        macro_rules! set {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(a.dataset.as_ref().map(|p| Some(p.clone())), c.dataset);
        set!(a.model, c.model_kind);
        set!(a.name, c.name);
        set!(a.embed_dim, c.model.embed_dim);
        set!(a.heads, c.model.num_heads);
        set!(a.enc_layers, c.model.enc_layers);
        set!(a.dec_layers, c.model.dec_layers);
        set!(a.ffn_dim, c.model.ffn_dim);
        set!(a.max_seq_len, c.model.max_seq_len);
        set!(a.mlp_hidden, c.mlp_hidden);
        set!(a.epochs, c.train.epochs);
        set!(a.batch_size, c.train.batch_size);
        set!(a.lr, c.train.lr);
        if let Some(l) = a.loss {
            c.train.loss = match l {
                LossArg::PerStep => LossKind::PerStep,
                LossArg::Cumulative => LossKind::Cumulative,
            };
        }
        if let Some(p) = g.precision {
            c.model.precision = p.into();
        }
        if a.include_unconverged {
            c.include_unconverged = true;
        }
        c.train.seed = c.common.seed;
        if c.dataset.is_none() {
            return usage("--dataset is required");
        }
        if c.name.is_empty() || c.name.contains(['/', '\\']) {
            return usage("--name must be a plain file stem");
        }
        c.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        c.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }

    /// Everything that determines the trained parameters; `--resume`
    /// refuses a checkpoint whose hash differs.
    pub fn config_hash(&self, dataset_sha256: &str) -> crate::Result<String> {
        #[derive(Serialize)]
        struct Key<'a> {
            kind: ModelChoice,
            model: &'a ModelConfig,
            mlp_hidden: &'a [usize],
            train: &'a TrainConfig,
            include_unconverged: bool,
            dataset: &'a str,
        }
        json_sha256(&Key {
            kind: self.model_kind,
            model: &self.model,
            mlp_hidden: &self.mlp_hidden,
            train: &self.train,
            include_unconverged: self.include_unconverged,
            dataset: dataset_sha256,
        })
    }
}

struct Split {
    train: Vec<SeqSample>,
    val: Vec<SeqSample>,
    train_n: Vec<usize>,
    val_n: Vec<usize>,
}

fn split(samples: &[LabeledSample], seed: u64, include_unconverged: bool) -> Split {
    let kept: Vec<LabeledSample> = samples.iter().filter(|s| include_unconverged || s.converged).cloned().collect();
    let (tr, va) = split_by_curve(&kept, seed);
    Split {
        train: tr.iter().map(|&i| (&kept[i]).into()).collect(),
        val: va.iter().map(|&i| (&kept[i]).into()).collect(),
        train_n: tr.iter().map(|&i| kept[i].n).collect(),
        val_n: va.iter().map(|&i| kept[i].n).collect(),
    }
}

pub fn run(g: &GlobalArgs, a: &TrainArgs) -> CliResult<()> {
    let c = TrainRunConfig::resolve(g, a)?;
    let dataset = c.dataset.clone().expect("checked in resolve");
    let samples = read_dataset(&dataset)?;
    let dataset_sha = file_sha256(&dataset)?;
    let hash = c.config_hash(&dataset_sha)?;
    let data = split(&samples, c.common.seed, c.include_unconverged);
    if data.train.is_empty() || data.val.is_empty() {
        return usage(format!(
            "{}: need samples from at least two curves after filtering ({} train, {} validation)",
            dataset.display(),
            data.train.len(),
            data.val.len()
        ));
    }
    c.common.prepare_out_dir()?;
    let ckpt = c.common.out(&format!("{}.json", c.name));
    let n_range = (
        data.train_n.iter().copied().min().unwrap_or(0),
        data.train_n.iter().copied().max().unwrap_or(0),
    );
    let meta = TrainingMeta {
        config: c.train.clone(),
        config_hash: hash,
        dataset_sha256: dataset_sha,
        include_unconverged: c.include_unconverged,
        n_range,
        history: Vec::new(),
        best_epoch: 0,
        complete: false,
    };
    let loss_path = c.common.out(&format!("{}_loss.csv", c.name));
    let mut outputs = vec![ckpt.clone(), ckpt.with_extension("bin")];
    match c.model_kind {
        ModelChoice::Transformer => {
            if a.resume {
                check_resume(&ckpt, &meta.config_hash)?;
            }
            let history = match c.model.precision {
                Precision::F32 => train_transformer::<f32>(&c, &data, &ckpt, meta, a)?,
                Precision::F64 => train_transformer::<f64>(&c, &data, &ckpt, meta, a)?,
            };
            write_loss_history(&loss_path, &history)?;
            outputs.push(ckpt.with_extension("state.bin"));
        }
        ModelChoice::Mlp => {
            if a.resume || a.stop_after.is_some() {
                return usage("--resume and --stop-after apply to the transformer only");
            }
            let history = match c.model.precision {
                Precision::F32 => train_bank::<f32>(&c, &data, &ckpt, meta)?,
                Precision::F64 => train_bank::<f64>(&c, &data, &ckpt, meta)?,
            };
            write_loss_history(&loss_path, &history)?;
        }
    }
    outputs.push(loss_path);
    let outs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_manifest(&c.common, "train", &c, &[&dataset], &outs)
}

fn check_resume(ckpt: &Path, hash: &str) -> CliResult<()> {
    let m = read_manifest(ckpt)?;
    let Some(t) = &m.training else {
        return usage(format!("{}: checkpoint carries no training metadata", ckpt.display()));
    };
    if t.config_hash != hash {
        return usage(format!(
            "refusing to resume {}: config hash {} differs from the current {hash}; \
             model, training settings and dataset must be identical",
            ckpt.display(),
            t.config_hash
        ));
    }
    Ok(())
}

fn train_transformer<R: Real>(
    c: &TrainRunConfig,
    data: &Split,
    ckpt: &Path,
    mut meta: TrainingMeta,
    a: &TrainArgs,
) -> CliResult<Vec<EpochRecord>> {
    let mut trainer = if a.resume {
        let (model, state, _) = load_transformer_state::<R>(ckpt)?;
        eprintln!("resuming {} at epoch {}", ckpt.display(), state.epoch);
        Trainer::resume(model, c.train.clone(), state)?
    } else {
        let model = Transformer::<R>::new(c.model.clone(), c.common.seed)?;
        Trainer::new(model, c.train.clone(), &data.train, &data.val)?
    };
    let save = |t: &Trainer<R, Transformer<R>>, meta: &mut TrainingMeta| -> CliResult<()> {
        meta.history = t.history().to_vec();
        meta.best_epoch = t.state().best_epoch;
        meta.complete = t.is_done();
        save_transformer_state(ckpt, t.model(), t.state(), c.common.seed, meta.clone())?;
        Ok(())
    };
    save(&trainer, &mut meta)?;
    let mut ran = 0;
    while !trainer.is_done() && a.stop_after.is_none_or(|k| ran < k) {
        let r = trainer.run_epoch(&data.train, &data.val)?;
        ran += 1;
        eprintln!("epoch {:>3}  train {:.6}  val {:.6}  lr {:.3e}", r.epoch, r.train_loss, r.val_loss, r.lr);
        save(&trainer, &mut meta)?;
    }
    Ok(trainer.history().to_vec())
}

/// One MLP per waypoint count in the training split. The loss history
/// rows are concatenated in increasing count order.
fn train_bank<R: Real>(
    c: &TrainRunConfig,
    data: &Split,
    ckpt: &Path,
    mut meta: TrainingMeta,
) -> CliResult<Vec<EpochRecord>> {
    let mut sizes: Vec<usize> = data.train_n.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut bank = MlpBank::<R>::new();
    let mut history = Vec::new();
    for n in sizes {
        let pick = |set: &[SeqSample], ns: &[usize]| -> Vec<SeqSample> {
            set.iter().zip(ns).filter(|(_, &k)| k == n).map(|(s, _)| s.clone()).collect()
        };
        let train = pick(&data.train, &data.train_n);
        let mut val = pick(&data.val, &data.val_n);
        if val.is_empty() {
            log::warn!("no validation samples with n = {n}; validating on the training samples");
            val = train.clone();
        }
        let cfg = MlpConfig { waypoints: n, hidden: c.mlp_hidden.clone() };
        let mlp = Mlp::<R>::new(cfg, c.common.seed.wrapping_add(n as u64))?;
        let mut t = Trainer::new(mlp, c.train.clone(), &train, &val)?;
        t.fit(&train, &val)?;
        let (best, h) = t.into_best();
        let last = h.last().copied();
        if let Some(r) = last {
            eprintln!("mlp n={n:>2}: {} samples, final val {:.6}", train.len(), r.val_loss);
        }
        history.extend(h);
        bank.insert(best);
    }
    meta.history = history.clone();
    meta.complete = true;
    save_mlp_bank(ckpt, &bank, c.common.seed, Some(meta))?;
    Ok(history)
}
