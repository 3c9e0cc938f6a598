use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{frame_centers, RunConfig};
use crate::corpus::{add_gray_noise, split_dataset, AugmentParams, VideoSample};
use crate::error::{Error, Result};
use crate::model::{mix_seed, Mode, VsNet};
use crate::nn::Adam;
use crate::objectives::{iou_metric, total_loss, IouMode, LossWeights};
use crate::tensor::Tensor;

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean total loss over the epoch's training windows.
    pub loss: f64,
    /// Mean IoU of inference-mode predictions on the training windows.
    pub train_iou: f64,
    pub heldout_iou: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    /// CSV with columns `epoch,loss,train_iou,heldout_iou,seconds`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "loss", "train_iou", "heldout_iou", "seconds"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.loss.to_string(),
                e.train_iou.to_string(),
                e.heldout_iou.map(|v| v.to_string()).unwrap_or_default(),
                format!("{:.3}", e.seconds),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub model: VsNet,
    /// Parameters of the epoch with the best validation IoU (held-out if
    /// available, training windows otherwise).
    pub best: VsNet,
    pub best_epoch: usize,
    pub log: TrainLog,
    pub train_ids: Vec<String>,
    pub heldout_ids: Vec<String>,
}

/// Loads or synthesizes the configured dataset, splits it by video and
/// trains on the training part.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let videos = config.data.load()?;
    let (train, heldout) = if config.test_fraction > 0.0 {
        split_dataset(&videos, config.test_fraction, config.seed)?
    } else {
        (videos, Vec::new())
    };
    train_on(config, &train, &heldout)
}

/// Input tensors of the window centered on `center`, and the center mask.
pub(crate) fn window(video: &VideoSample, center: usize, len: usize) -> (Vec<Tensor>, Tensor) {
    let frames = video
        .window_indices(center, len)
        .into_iter()
        .map(|i| video.frames[i].to_tensor())
        .collect();
    (frames, video.masks[center].to_tensor())
}

/// A window with one shared rigid transform and per-frame gray noise.
fn augmented_window(
    video: &VideoSample,
    center: usize,
    len: usize,
    params: &AugmentParams,
    seed: u64,
) -> Result<(Vec<Tensor>, Tensor)> {
    if params.is_identity() {
        return Ok(window(video, center, len));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transform = params.sample_transform(&mut rng)?;
    let frames = video
        .window_indices(center, len)
        .into_iter()
        .map(|i| {
            let mut frame = transform.apply_frame(&video.frames[i]);
            add_gray_noise(&mut frame, params.noise_sigma, &mut rng)?;
            Ok(frame.to_tensor())
        })
        .collect::<Result<_>>()?;
    Ok((frames, transform.apply_mask(&video.masks[center]).to_tensor()))
}

/// Mean inference-mode IoU over the given windows. Frames where both the
/// prediction and the ground truth are empty are skipped.
pub(crate) fn mean_window_iou(
    model: &VsNet,
    videos: &[VideoSample],
    per_video: Option<usize>,
    mode: IouMode,
) -> Result<Option<f64>> {
    let (mut sum, mut count) = (0.0, 0usize);
    let width = model.config().input_size;
    for video in videos {
        for center in frame_centers(video.len(), per_video) {
            let (frames, gt) = window(video, center, model.config().arp_window);
            let saliency = model.predict(&frames)?;
            match iou_metric(saliency.data(), gt.data(), width, mode) {
                Ok(iou) => {
                    sum += iou;
                    count += 1;
                }
                Err(Error::EmptyUnion) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

fn check_videos(model: &VsNet, videos: &[VideoSample]) -> Result<()> {
    let size = model.config().input_size;
    for v in videos {
        if let Some((w, h)) = v.frame_size() {
            if (w, h) != (size, size) {
                return Err(Error::InvalidConfig(format!(
                    "video {} has {w}×{h} frames but the model expects {size}×{size}",
                    v.id
                )));
            }
        }
    }
    Ok(())
}

/// Minibatch ADAM training on windows from `train_set`, validating on
/// `heldout` after every epoch. Writes `run.json`, `trainlog.csv`,
/// `last.vsnt` and `best.vsnt` when `config.out_dir` is set.
pub fn train_on(config: &RunConfig, train_set: &[VideoSample], heldout: &[VideoSample]) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.iter().all(VideoSample::is_empty) {
        return Err(Error::EmptyDataset);
    }
    let mut model = VsNet::build(config.model.clone())?;
    check_videos(&model, train_set)?;
    check_videos(&model, heldout)?;
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("run.json");
        fs::write(&path, config.to_json()).map_err(|e| Error::io(&path, e))?;
    }

    let window_len = config.model.arp_window;
    let weights = LossWeights {
        iou: config.alpha,
        kl: config.model.kl_weight,
    };
    let samples: Vec<(usize, usize)> = train_set
        .iter()
        .enumerate()
        .flat_map(|(v, video)| frame_centers(video.len(), config.frames_per_video).into_iter().map(move |c| (v, c)))
        .collect();

    let mut adam = Adam::new(config.adam)?;
    let mut log = TrainLog::default();
    let mut best = (model.clone(), 0usize, f64::NEG_INFINITY);
    let started = Instant::now();

    for epoch in 1..=config.epochs {
        let mut order = samples.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5_0000 + epoch as u64)));
        let epoch_seed = mix_seed(config.seed, 0x7_0000 + epoch as u64);
        let mut loss_sum = 0.0;

        for (step, batch) in order.chunks(config.batch).enumerate() {
            let mut grads: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.numel()]).collect();
            for (k, &(v, center)) in batch.iter().enumerate() {
                let seed = mix_seed(epoch_seed, (step * config.batch + k) as u64);
                let (frames, gt) = augmented_window(&train_set[v], center, window_len, &config.augment, seed)?;
                let p = model.bind(true);
                let pred = model.forward_window(&p, &frames, Mode::Training { seed })?;
                if let Some(&bad) = pred.saliency.data().iter().find(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteLoss { loss: bad, epoch, step });
                }
                let latent = pred.logvar.as_ref().map(|lv| (&pred.mu, lv));
                let loss = total_loss(&pred.saliency, &gt, weights, latent)?;
                let value = loss.item()?;
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { loss: value, epoch, step });
                }
                loss_sum += value;
                loss.backward()?;
                for (acc, t) in grads.iter_mut().zip(&p) {
                    if let Some(g) = t.grad_ref().as_ref() {
                        acc.iter_mut().zip(g).for_each(|(a, g)| *a += g);
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let grads: Vec<Option<Vec<f64>>> = grads
                .into_iter()
                .map(|g| Some(g.into_iter().map(|v| v * scale).collect()))
                .collect();
            adam.step(model.params_mut(), &grads)?;
            model.params_mut().round_to_f32();
        }

        let train_iou = mean_window_iou(&model, train_set, config.frames_per_video, config.iou_mode)?.unwrap_or(0.0);
        let heldout_iou = if heldout.is_empty() {
            None
        } else {
            mean_window_iou(&model, heldout, config.frames_per_video, config.iou_mode)?
        };
        let entry = EpochLog {
            epoch,
            loss: loss_sum / samples.len() as f64,
            train_iou,
            heldout_iou,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.5} train IoU {:.4} held-out IoU {}",
            entry.loss,
            entry.train_iou,
            heldout_iou.map_or("-".into(), |v| format!("{v:.4}"))
        );

        let score = heldout_iou.unwrap_or(train_iou);
        let improved = score > best.2;
        if improved {
            best = (model.clone(), epoch, score);
        }
        if let Some(dir) = &config.out_dir {
            model.save(&dir.join("last.vsnt"))?;
            if improved {
                model.save(&dir.join("best.vsnt"))?;
            }
        }
        let reached = config
            .stop_at_iou
            .is_some_and(|target| train_iou >= target && heldout_iou.is_none_or(|h| h >= target));
        log.epochs.push(entry);
        if let Some(dir) = &config.out_dir {
            log.save_csv(&dir.join("trainlog.csv"))?;
        }
        if reached {
            log::info!("stopping after epoch {epoch}: IoU target reached");
            break;
        }
    }

    Ok(TrainOutcome {
        model,
        best: best.0,
        best_epoch: best.1,
        log,
        train_ids: train_set.iter().map(|v| v.id.clone()).collect(),
        heldout_ids: heldout.iter().map(|v| v.id.clone()).collect(),
    })
}
