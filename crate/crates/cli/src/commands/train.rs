//! `train` and `eval-surrogate`: fit the two networks and measure
//! test-set accuracy, the thresholded-MAE box plots and the per-step
//! surrogate error model.

use super::make_dataset::load_split;
use crate::Workspace;
use ghm_core::analysis::svg::boxplot_svg;
use ghm_core::analysis::{box_stats, mae_threshold, surrogate_error_stats, BoxStats, PairedSamples};
use ghm_core::config::RunConfig;
use ghm_core::nets::surrogate::{InputNorm, MonitorSurrogate, SeismicSurrogate};
use ghm_core::nets::tape::forward_value;
use ghm_core::nets::train::mean_baseline_loss;
use ghm_core::nets::{
    build_monitor_unet, build_seismic_unet, init_params, loss_value, train, Dataset, Tensor,
};
use ghm_core::seisproc::DEFAULT_PLUME_TAU;
use ghm_core::{GhmError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTarget {
    Seismic,
    Monitor,
}

impl TrainTarget {
    pub fn from_flag(s: &str) -> Result<Self> {
        match s {
            "seis" => Ok(TrainTarget::Seismic),
            "mon" => Ok(TrainTarget::Monitor),
            other => Err(GhmError::Config(format!("unknown train target '{other}'"))),
        }
    }
}

pub struct TrainSummary {
    pub best_val: f64,
    pub best_epoch: usize,
    pub final_train_loss: f64,
}

fn normalized(data: &Dataset<f32>, norm: &InputNorm) -> Dataset<f32> {
    Dataset {
        inputs: data.inputs.iter().map(|t| norm.apply(t)).collect(),
        targets: data.targets.clone(),
    }
}

pub fn cmd_train(cfg: &RunConfig, ws: &Workspace, which: TrainTarget) -> Result<TrainSummary> {
    ws.ensure("surrogates")?;
    let (name, train_cfg) = match which {
        TrainTarget::Seismic => ("seismic", &cfg.train_seis),
        TrainTarget::Monitor => ("monitor", &cfg.train_mon),
    };
    let (raw, steps) = load_split(&ws.dataset_path(name, "train"))?;
    let norm = InputNorm::fit(&raw.inputs)?;
    let data = normalized(&raw, &norm);

    let (network, params) = match which {
        TrainTarget::Seismic => {
            let net = build_seismic_unet(
                (cfg.grid.nx, cfg.grid.ny, cfg.grid.nz),
                steps.len(),
                cfg.unet_scale,
            )?;
            let p = init_params::<f32>(&net, train_cfg.seed);
            (net, p)
        }
        TrainTarget::Monitor => {
            let w = cfg.local_window();
            let net = build_monitor_unet((w.nx(), w.ny(), cfg.grid.nz), steps.len(), cfg.unet_scale)?;
            let p = init_params::<f32>(&net, train_cfg.seed);
            (net, p)
        }
    };

    let (best, report) = train(&network, params, &data, train_cfg)?;

    let mut csv = String::from("epoch,train_loss,val_loss,lr\n");
    for e in &report.history {
        let _ = writeln!(csv, "{},{:.8e},{:.8e},{:.3e}", e.epoch, e.train_loss, e.val_loss, e.lr);
    }
    std::fs::write(ws.loss_csv(name), csv)?;

    match which {
        TrainTarget::Seismic => SeismicSurrogate {
            network,
            params: best,
            norm,
            channel_steps: steps,
        }
        .save(&ws.surrogate_path(name))?,
        TrainTarget::Monitor => MonitorSurrogate {
            network,
            params: best,
            norm,
            channel_steps: steps,
            window: cfg.local_window(),
        }
        .save(&ws.surrogate_path(name))?,
    }

    Ok(TrainSummary {
        best_val: report.best_val,
        best_epoch: report.best_epoch,
        final_train_loss: report.history.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
    })
}

/// Per-step surrogate error statistics plus held-out loss comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateErrors {
    /// (report step, mean error, std) per data kind.
    pub mon: Vec<(usize, f64, f64)>,
    pub seis: Vec<(usize, f64, f64)>,
    pub plume: Vec<(usize, f64, f64)>,
    pub seis_test_loss: f64,
    pub seis_baseline_loss: f64,
    pub mon_test_loss: f64,
    pub mon_baseline_loss: f64,
    /// Median test delta_s at each configured threshold per surrogate.
    pub seis_delta_s_median: Vec<(f64, f64)>,
    pub mon_delta_s_median: Vec<(f64, f64)>,
}

impl SurrogateErrors {
    pub fn load(ws: &Workspace) -> Result<Self> {
        let text = std::fs::read_to_string(ws.surrogate_errors())
            .map_err(|_| GhmError::Config("missing surrogate errors; run eval-surrogate".into()))?;
        serde_json::from_str(&text).map_err(|e| GhmError::Format(format!("errors decode: {e}")))
    }
}

pub fn cmd_eval_surrogate(cfg: &RunConfig, ws: &Workspace) -> Result<SurrogateErrors> {
    let seis = SeismicSurrogate::load(&ws.surrogate_path("seismic"))?;
    let mon = MonitorSurrogate::load(&ws.surrogate_path("monitor"))?;
    let (seis_train, _) = load_split(&ws.dataset_path("seismic", "train"))?;
    let (seis_test, seis_steps) = load_split(&ws.dataset_path("seismic", "test"))?;
    let (mon_train, _) = load_split(&ws.dataset_path("monitor", "train"))?;
    let (mon_test, mon_steps) = load_split(&ws.dataset_path("monitor", "test"))?;

    let predict = |net: &ghm_core::nets::Network,
                   params: &ghm_core::nets::Params<f32>,
                   norm: &InputNorm,
                   input: &Tensor<f32>|
     -> Result<Tensor<f32>> { forward_value(net, params, norm.apply(input)) };

    // Test predictions once for every later statistic.
    let seis_preds: Vec<Tensor<f32>> = seis_test
        .inputs
        .iter()
        .map(|x| predict(&seis.network, &seis.params, &seis.norm, x))
        .collect::<Result<_>>()?;
    let mon_preds: Vec<Tensor<f32>> = mon_test
        .inputs
        .iter()
        .map(|x| predict(&mon.network, &mon.params, &mon.norm, x))
        .collect::<Result<_>>()?;

    let seis_test_loss = {
        let mut acc = 0.0;
        for (p, t) in seis_preds.iter().zip(&seis_test.targets) {
            acc += loss_value(cfg.train_seis.loss, p, t)?;
        }
        acc / seis_preds.len() as f64
    };
    let mon_test_loss = {
        let mut acc = 0.0;
        for (p, t) in mon_preds.iter().zip(&mon_test.targets) {
            acc += loss_value(cfg.train_mon.loss, p, t)?;
        }
        acc / mon_preds.len() as f64
    };

    // Baseline: predict the training-set mean target.
    let merged_seis = Dataset {
        inputs: [seis_train.inputs.clone(), seis_test.inputs.clone()].concat(),
        targets: [seis_train.targets.clone(), seis_test.targets.clone()].concat(),
    };
    let fit_idx: Vec<usize> = (0..seis_train.len()).collect();
    let eval_idx: Vec<usize> = (seis_train.len()..merged_seis.len()).collect();
    let seis_baseline_loss =
        mean_baseline_loss(&merged_seis, &fit_idx, &eval_idx, cfg.train_seis.loss)?;
    let merged_mon = Dataset {
        inputs: [mon_train.inputs.clone(), mon_test.inputs.clone()].concat(),
        targets: [mon_train.targets.clone(), mon_test.targets.clone()].concat(),
    };
    let mon_baseline_loss =
        mean_baseline_loss(&merged_mon, &fit_idx, &eval_idx, cfg.train_mon.loss)?;

    // delta_s per realization per threshold, in the box-plot convention.
    let to64 = |t: &Tensor<f32>| -> Vec<f64> { t.data.iter().map(|&v| v as f64).collect() };
    let mut csv = String::from("surrogate,eps,sample,delta_s\n");
    let mut boxes: Vec<(String, BoxStats)> = Vec::new();
    let mut seis_delta_s_median = Vec::new();
    let mut mon_delta_s_median = Vec::new();
    for &eps in &cfg.analysis.mae_thresholds {
        let collect = |name: &str,
                           preds: &[Tensor<f32>],
                           targets: &[Tensor<f32>],
                           csv: &mut String|
         -> Result<Vec<f64>> {
            let mut values = Vec::new();
            for (i, (p, t)) in preds.iter().zip(targets).enumerate() {
                if let Some(d) = mae_threshold(&to64(t), &to64(p), eps)? {
                    values.push(d);
                    let _ = writeln!(csv, "{name},{eps},{i},{d:.6e}");
                }
            }
            Ok(values)
        };
        let sv = collect("seismic", &seis_preds, &seis_test.targets, &mut csv)?;
        let mv = collect("monitor", &mon_preds, &mon_test.targets, &mut csv)?;
        if !sv.is_empty() {
            let stats = box_stats(&sv)?;
            seis_delta_s_median.push((eps, stats.p50));
            boxes.push((format!("seis e={eps}"), stats));
        }
        if !mv.is_empty() {
            let stats = box_stats(&mv)?;
            mon_delta_s_median.push((eps, stats.p50));
            boxes.push((format!("mon e={eps}"), stats));
        }
    }
    std::fs::write(ws.eval_csv("test"), csv)?;
    let mut box_csv = String::from("group,p10,p25,p50,p75,p90,n\n");
    for (label, b) in &boxes {
        let _ = writeln!(
            box_csv,
            "{label},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            b.p10, b.p25, b.p50, b.p75, b.p90, b.n
        );
    }
    std::fs::write(ws.eval_box_csv(), box_csv)?;
    std::fs::write(
        ws.eval_box_svg(),
        boxplot_svg(&boxes, "test-set saturation MAE", "delta_s"),
    )?;

    // Per-step error statistics feeding the history-matching error model.
    let per_step = |preds: &[Tensor<f32>],
                    targets: &[Tensor<f32>],
                    steps: &[usize],
                    binary: bool|
     -> Vec<PairedSamples> {
        steps
            .iter()
            .enumerate()
            .map(|(c, &step)| {
                let per: usize = preds[0].shape[1..].iter().product();
                let mut pred = Vec::with_capacity(per * preds.len());
                let mut reference = Vec::with_capacity(per * preds.len());
                for (p, t) in preds.iter().zip(targets) {
                    for e in 0..per {
                        let (mut pv, mut tv) =
                            (p.data[c * per + e] as f64, t.data[c * per + e] as f64);
                        if binary {
                            pv = if pv > DEFAULT_PLUME_TAU { 1.0 } else { 0.0 };
                            tv = if tv > DEFAULT_PLUME_TAU { 1.0 } else { 0.0 };
                        }
                        pred.push(pv);
                        reference.push(tv);
                    }
                }
                PairedSamples { step, pred, reference }
            })
            .collect()
    };
    let mon_stats = surrogate_error_stats(&per_step(&mon_preds, &mon_test.targets, &mon_steps, false))?;
    let seis_stats =
        surrogate_error_stats(&per_step(&seis_preds, &seis_test.targets, &seis_steps, false))?;
    let plume_stats =
        surrogate_error_stats(&per_step(&seis_preds, &seis_test.targets, &seis_steps, true))?;

    let errors = SurrogateErrors {
        mon: mon_stats,
        seis: seis_stats,
        plume: plume_stats,
        seis_test_loss,
        seis_baseline_loss,
        mon_test_loss,
        mon_baseline_loss,
        seis_delta_s_median,
        mon_delta_s_median,
    };
    let text = serde_json::to_string_pretty(&errors)
        .map_err(|e| GhmError::Format(format!("errors encode: {e}")))?;
    std::fs::write(ws.surrogate_errors(), text)?;
    Ok(errors)
}
