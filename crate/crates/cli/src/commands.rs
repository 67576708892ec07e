use std::path::{Path, PathBuf};

use log::{info, warn};
use lowband_core::autoencoder::{
    ablation_plan, decode_embedding, encode_embedding, load_model, run_ablation, save_model, train_with_progress,
    Model, ModelConfig, SkipMode, TrainConfig,
};
use lowband_core::codecs::{
    dct_decode, dct_encode, huffman_image_decode, huffman_image_encode, predictive_decode, predictive_encode,
    rate_distortion_sweep, CodecId, EncodedBlob,
};
use lowband_core::delivery::{compare_policies, simulate, time_to_first_intelligence, LinkModel, Policy};
use lowband_core::metrics::{self, write_ablation_csv, QualityReport};
use lowband_core::payloads::{
    build_manifest, decode_image_payload, extract_cutouts, generate_caption, package_image, parse_manifest,
    raw_reference_bytes, ImageMethod, Payload, PayloadKind,
};
use lowband_core::raster::{generate_corpus, generate_scene, write_pnm, SceneSpec};
use lowband_core::{Annotation, Image};
use serde_json::{json, Value};

use crate::io::{read_annotation_file, read_bytes, read_image, read_image_dir, write_bytes};
use crate::{
    AblateArgs, CaptionArgs, CodecArg, CodecCommand, Command, CutoutArgs, DatasetArgs, Format, GlobalOpts, LinkArgs,
    MetricsArgs, ModelArgs, PipelineArgs, PolicyArg, ReportArgs, SceneArgs, SimulateArgs, SkipArg, TrainArgs,
};
use crate::CliError;

pub fn dispatch(global: &GlobalOpts, command: Command) -> Result<String, CliError> {
    match command {
        Command::Metrics(a) => cmd_metrics(global, &a),
        Command::Codec(c) => cmd_codec(global, c),
        Command::Ablate(a) => cmd_ablate(global, &a),
        Command::Train(a) => cmd_train(global, &a),
        Command::Cutout(a) => cmd_cutout(global, &a),
        Command::Caption(a) => cmd_caption(global, &a),
        Command::Simulate(a) => cmd_simulate(global, &a),
        Command::Pipeline(a) => cmd_pipeline(global, &a),
        Command::Report(a) => cmd_report(global, &a),
    }
}

/// JSON number, or the string "inf" for an infinite PSNR, or null for NaN.
fn num(v: f64) -> Value {
    if v.is_nan() {
        Value::Null
    } else if v.is_infinite() {
        Value::String(if v > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        json!(v)
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value");
    s.push('\n');
    s
}

fn out_dir(global: &GlobalOpts) -> Option<&Path> {
    global.out_dir.as_deref()
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    write_bytes(path, pretty(v).as_bytes())
}

fn csv_line(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

fn cmd_metrics(global: &GlobalOpts, a: &MetricsArgs) -> Result<String, CliError> {
    let reference_bytes = read_bytes(&a.reference)?;
    let candidate_bytes = read_bytes(&a.candidate)?;
    let reference = read_image(&a.reference)?;
    let candidate = read_image(&a.candidate)?;
    let report = QualityReport::measure(
        &reference,
        &candidate,
        reference_bytes.len() as u64,
        candidate_bytes.len() as u64,
        a.psnr_max,
    )?;
    Ok(match global.format {
        Format::Json => pretty(&json!({
            "command": "metrics",
            "config": {"reference": a.reference, "candidate": a.candidate, "psnr_max": a.psnr_max},
            "report": serde_json::from_str::<Value>(&report.to_json())?,
        })),
        Format::Csv => {
            let header = ["mse", "psnr_db", "ssim", "bytes_original", "bytes_encoded", "compression_ratio_pct", "bitrate_bpp"];
            let row = [
                report.mse.to_string(),
                metrics::format_db(report.psnr_db),
                report.ssim.to_string(),
                report.bytes_original.to_string(),
                report.bytes_encoded.to_string(),
                report.compression_ratio_pct.to_string(),
                report.bitrate_bpp.to_string(),
            ];
            csv_line(&header.map(String::from)) + &csv_line(&row)
        }
    })
}

fn load_checkpoint(path: &Path) -> Result<Model, CliError> {
    Ok(load_model(&read_bytes(path)?)?)
}

fn decode_blob(blob: &EncodedBlob, model: Option<&Model>) -> Result<Image, CliError> {
    Ok(match blob.codec {
        CodecId::Huffman => huffman_image_decode(blob)?,
        CodecId::Predictive => predictive_decode(blob)?,
        CodecId::Dct => dct_decode(blob)?,
        CodecId::AeEmbedding => {
            let model = model.ok_or_else(|| CliError::Validation("ae_embedding blob needs --model".into()))?;
            decode_embedding(model, blob)?
        }
    })
}

fn size_summary(global: &GlobalOpts, config: Value, raw_bytes: u64, blob_bytes: u64, pixels: u64) -> Result<String, CliError> {
    let ratio = metrics::compression_ratio_bytes(raw_bytes, blob_bytes)?;
    let bpp = metrics::bitrate_bpp(blob_bytes, pixels)?;
    Ok(match global.format {
        Format::Json => pretty(&json!({
            "command": "codec",
            "config": config,
            "raw_bytes": raw_bytes,
            "blob_bytes": blob_bytes,
            "ratio_pct": ratio,
            "bitrate_bpp": bpp,
        })),
        Format::Csv => {
            csv_line(&["raw_bytes", "blob_bytes", "ratio_pct", "bitrate_bpp"].map(String::from))
                + &csv_line(&[raw_bytes.to_string(), blob_bytes.to_string(), ratio.to_string(), bpp.to_string()])
        }
    })
}

fn cmd_codec(global: &GlobalOpts, c: CodecCommand) -> Result<String, CliError> {
    match c {
        CodecCommand::Encode { codec, quality, model, input, output } => {
            let raw = read_bytes(&input)?;
            let image = read_image(&input)?;
            let blob = match codec {
                CodecArg::Huffman => huffman_image_encode(&image)?,
                CodecArg::Predictive => predictive_encode(&image)?,
                CodecArg::Dct => dct_encode(&image, quality)?,
                CodecArg::Ae => {
                    let path = model.as_ref().ok_or_else(|| CliError::Validation("--codec ae needs --model".into()))?;
                    encode_embedding(&load_checkpoint(path)?, &image)?
                }
            };
            let bytes = blob.to_bytes();
            write_bytes(&output, &bytes)?;
            let config = json!({
                "action": "encode", "codec": blob.codec.name(), "quality": blob.quality,
                "model": model, "input": input, "output": output,
            });
            size_summary(global, config, raw.len() as u64, bytes.len() as u64, image.pixel_count() as u64)
        }
        CodecCommand::Decode { model, input, output } => {
            let bytes = read_bytes(&input)?;
            let blob = EncodedBlob::from_bytes(&bytes)?;
            let model = model.as_deref().map(load_checkpoint).transpose()?;
            let image = decode_blob(&blob, model.as_ref())?;
            let pnm = write_pnm(&image);
            write_bytes(&output, &pnm)?;
            let config = json!({"action": "decode", "codec": blob.codec.name(), "input": input, "output": output});
            size_summary(global, config, pnm.len() as u64, bytes.len() as u64, image.pixel_count() as u64)
        }
        CodecCommand::Sweep { qualities, input } => {
            let image = read_image(&input)?;
            let points = rate_distortion_sweep(&image, &qualities)?;
            if let Some(dir) = out_dir(global) {
                write_json(&dir.join("sweep_config.json"), &json!({"input": input, "qualities": qualities}))?;
            }
            Ok(match global.format {
                Format::Json => pretty(&json!({
                    "command": "codec sweep",
                    "config": {"input": input, "qualities": qualities},
                    "points": points.iter().map(|p| json!({
                        "quality": p.quality, "bytes": p.bytes, "bitrate_bpp": p.bitrate_bpp, "psnr_db": num(p.psnr_db),
                    })).collect::<Vec<_>>(),
                })),
                Format::Csv => {
                    let mut s = csv_line(&["quality", "bytes", "bitrate_bpp", "psnr_db"].map(String::from));
                    for p in &points {
                        s += &csv_line(&[
                            p.quality.to_string(),
                            p.bytes.to_string(),
                            p.bitrate_bpp.to_string(),
                            metrics::format_db(p.psnr_db),
                        ]);
                    }
                    s
                }
            })
        }
    }
}

fn skip_mode(s: SkipArg) -> SkipMode {
    match s {
        SkipArg::Paper => SkipMode::Paper,
        SkipArg::CodecHonest => SkipMode::CodecHonest,
    }
}

fn configs(global: &GlobalOpts, m: &ModelArgs, blocks: u32, channels: u8) -> (ModelConfig, TrainConfig) {
    let mc = ModelConfig {
        blocks,
        input_side: m.input_side,
        image_channels: channels,
        base_width: m.base_width,
        seed: global.seed,
        skip_mode: skip_mode(m.skip_mode),
    };
    let tc = TrainConfig {
        epochs: m.epochs,
        batch_size: m.batch_size,
        val_split: m.val_split,
        learning_rate: m.learning_rate,
        seed: global.seed,
        psnr_max: m.psnr_max,
    };
    (mc, tc)
}

fn load_dataset(global: &GlobalOpts, d: &DatasetArgs, side: u32) -> Result<Vec<Image>, CliError> {
    match (d.synthetic, &d.dataset_dir) {
        (Some(n), None) => Ok(generate_corpus(n, side, d.channels, global.seed)?),
        (None, Some(dir)) => {
            let images = read_image_dir(dir)?;
            if images.is_empty() {
                return Err(CliError::Validation(format!("{}: no PNM images found", dir.display())));
            }
            Ok(images)
        }
        _ => Err(CliError::Validation("pass exactly one of --synthetic N or --dataset-dir DIR".into())),
    }
}

fn dataset_json(d: &DatasetArgs) -> Value {
    json!({"synthetic": d.synthetic, "dataset_dir": d.dataset_dir, "channels": d.channels})
}

fn dataset_channels(images: &[Image], fallback: u8) -> u8 {
    images.first().map_or(fallback, Image::channels)
}

fn cmd_ablate(global: &GlobalOpts, a: &AblateArgs) -> Result<String, CliError> {
    let mut config = json!({
        "seed": global.seed,
        "blocks": a.blocks,
        "plan_only": a.plan_only,
        "input_side": a.model.input_side,
    });
    let rows = if a.plan_only {
        ablation_plan(&a.blocks, a.model.input_side)?
    } else {
        let data = load_dataset(global, &a.dataset, a.model.input_side)?;
        let (mc, tc) = configs(global, &a.model, 0, dataset_channels(&data, a.dataset.channels));
        config = json!({
            "seed": global.seed,
            "blocks": a.blocks,
            "plan_only": false,
            "dataset": dataset_json(&a.dataset),
            "dataset_size": data.len(),
            "model": mc,
            "train": tc,
        });
        let ablation = run_ablation(&a.blocks, &mc, &tc, &data, |b, s| {
            info!("blocks {b} epoch {} train_mse {:.6} val_mse {:.6}", s.epoch, s.train_mse, s.val_mse);
        })?;
        if let Some(dir) = out_dir(global) {
            for r in &ablation.reports {
                let b = r.model_config.blocks;
                write_bytes(&dir.join(format!("curve_b{b}.csv")), r.curve_csv().as_bytes())?;
                write_json(&dir.join(format!("report_b{b}.json")), &serde_json::to_value(r)?)?;
            }
        }
        for r in &ablation.reports {
            if !r.converged {
                warn!("blocks {} did not converge", r.model_config.blocks);
            }
        }
        ablation.rows
    };
    let csv = write_ablation_csv(&rows, false);
    if let Some(dir) = out_dir(global) {
        write_bytes(&dir.join("ablation.csv"), csv.as_bytes())?;
        write_json(&dir.join("ablate_config.json"), &config)?;
    }
    Ok(match global.format {
        Format::Csv => csv,
        Format::Json => pretty(&json!({
            "command": "ablate",
            "config": config,
            "rows": rows.iter().map(|r| json!({
                "blocks": r.blocks,
                "psnr_train": num(r.psnr_train),
                "ssim_train": num(r.ssim_train),
                "psnr_test": num(r.psnr_test),
                "ssim_test": num(r.ssim_test),
                "output_size": r.output_size,
                "compression": metrics::format_pct(r.compression_pct),
            })).collect::<Vec<_>>(),
        })),
    })
}

fn cmd_train(global: &GlobalOpts, a: &TrainArgs) -> Result<String, CliError> {
    let data = load_dataset(global, &a.dataset, a.model.input_side)?;
    let (mc, tc) = configs(global, &a.model, a.blocks, dataset_channels(&data, a.dataset.channels));
    let (model, report) = train_with_progress(&mc, &tc, &data, |s| {
        info!("epoch {} train_mse {:.6} val_mse {:.6}", s.epoch, s.train_mse, s.val_mse);
    })?;
    let dir = out_dir(global).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("out"));
    let checkpoint = dir.join("model.aemd");
    write_bytes(&checkpoint, &save_model(&model))?;
    write_bytes(&dir.join("curve.csv"), report.curve_csv().as_bytes())?;
    let config = json!({"seed": global.seed, "dataset": dataset_json(&a.dataset), "model": mc, "train": tc});
    write_json(&dir.join("train_config.json"), &config)?;
    let report_json = serde_json::to_value(&report)?;
    write_json(&dir.join("report.json"), &report_json)?;
    Ok(match global.format {
        Format::Csv => report.curve_csv(),
        Format::Json => pretty(&json!({
            "command": "train",
            "config": config,
            "checkpoint": checkpoint,
            "report": report_json,
        })),
    })
}

fn for_image(anns: &[Annotation], image_id: Option<&str>) -> Vec<Annotation> {
    anns.iter().filter(|a| image_id.is_none_or(|id| a.image_id == id)).cloned().collect()
}

fn cmd_cutout(global: &GlobalOpts, a: &CutoutArgs) -> Result<String, CliError> {
    let image = read_image(&a.image)?;
    let anns = for_image(&read_annotation_file(&a.annotations)?, a.image_id.as_deref());
    let cutouts = extract_cutouts(&image, &anns, a.min_confidence)?;
    if cutouts.skipped > 0 {
        warn!("{} annotation(s) outside the image were skipped", cutouts.skipped);
    }
    let mut files = Vec::new();
    if let Some(dir) = out_dir(global) {
        for (i, p) in cutouts.payloads.iter().enumerate() {
            let path = dir.join(format!("cutout_{i:03}.imcp"));
            write_bytes(&path, &p.bytes)?;
            files.push(Some(path));
        }
    } else {
        files.resize(cutouts.payloads.len(), None);
    }
    let config = json!({
        "image": a.image, "annotations": a.annotations, "min_confidence": a.min_confidence, "image_id": a.image_id,
    });
    Ok(match global.format {
        Format::Json => pretty(&json!({
            "command": "cutout",
            "config": config,
            "skipped": cutouts.skipped,
            "cutouts": cutouts.payloads.iter().zip(&files).map(|(p, f)| json!({
                "class": p.meta["class"],
                "confidence": p.meta["confidence"],
                "bbox": p.meta["bbox"],
                "byte_size": p.byte_size(),
                "file": f,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut s = csv_line(&["class", "confidence", "x_min", "y_min", "x_max", "y_max", "byte_size"].map(String::from));
            for p in &cutouts.payloads {
                s += &format!("{},{},{},{}\n", p.meta["class"], p.meta["confidence"], p.meta["bbox"], p.byte_size());
            }
            s
        }
    })
}

fn cmd_caption(global: &GlobalOpts, a: &CaptionArgs) -> Result<String, CliError> {
    let anns = for_image(&read_annotation_file(&a.annotations)?, a.image_id.as_deref());
    let image_id = a.image_id.clone().or_else(|| anns.first().map(|x| x.image_id.clone())).unwrap_or_default();
    let caption = generate_caption(&anns, &image_id);
    let text = String::from_utf8(caption.bytes.clone()).expect("template captions are utf-8");
    if let Some(dir) = out_dir(global) {
        write_bytes(&dir.join("caption.txt"), &caption.bytes)?;
    }
    Ok(match global.format {
        Format::Json => pretty(&json!({
            "command": "caption",
            "config": {"annotations": a.annotations, "image_id": image_id},
            "caption": text,
            "byte_size": caption.byte_size(),
        })),
        Format::Csv => format!("caption,byte_size\n\"{}\",{}\n", text, caption.byte_size()),
    })
}

fn link_model(l: &LinkArgs) -> Result<LinkModel, CliError> {
    Ok(LinkModel::new(l.bandwidth_bps, l.latency_s)?)
}

fn policy(p: PolicyArg) -> Policy {
    match p {
        PolicyArg::Hierarchical => Policy::Hierarchical,
        PolicyArg::RawFirst => Policy::RawFirst,
        PolicyArg::AsGiven => Policy::AsGiven,
    }
}

fn parse_payload_spec(spec: &str) -> Result<(PayloadKind, u64), CliError> {
    let (kind, bytes) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Validation(format!("payload {spec:?} is not kind:bytes")))?;
    let kind: PayloadKind = kind.parse().map_err(CliError::Validation)?;
    let bytes = bytes.parse().map_err(|_| CliError::Validation(format!("bad byte count in {spec:?}")))?;
    Ok((kind, bytes))
}

fn cmd_simulate(global: &GlobalOpts, a: &SimulateArgs) -> Result<String, CliError> {
    let items: Vec<(PayloadKind, u64)> = match &a.manifest {
        Some(path) => parse_manifest(&read_bytes(path)?)?.payloads.iter().map(|e| (e.kind, e.byte_size)).collect(),
        None => a.payloads.iter().map(|s| parse_payload_spec(s)).collect::<Result<_, _>>()?,
    };
    let link = link_model(&a.link)?;
    let plan = policy(a.policy).plan(&items)?;
    let timeline = simulate(&plan, &link)?;
    let policies = compare_policies(&items, &link)?;
    let config = json!({
        "payloads": items.iter().map(|(k, b)| format!("{k}:{b}")).collect::<Vec<_>>(),
        "manifest": a.manifest,
        "policy": policy(a.policy).name(),
        "link": link,
    });
    if let Some(dir) = out_dir(global) {
        write_bytes(&dir.join("timeline.csv"), timeline.to_csv().as_bytes())?;
        write_bytes(&dir.join("policies.csv"), policies.to_csv().as_bytes())?;
        write_json(&dir.join("simulate_config.json"), &config)?;
    }
    Ok(match global.format {
        Format::Csv => timeline.to_csv(),
        Format::Json => pretty(&json!({
            "command": "simulate",
            "config": config,
            "timeline": timeline,
            "time_to_first_intelligence_s": time_to_first_intelligence(&timeline).ok(),
            "policies": policies.rows,
        })),
    })
}

struct Scene {
    image: Image,
    image_id: String,
    annotations: Vec<Annotation>,
    config: Value,
}

fn load_scene(global: &GlobalOpts, s: &SceneArgs) -> Result<Scene, CliError> {
    match (&s.image, &s.annotations) {
        (Some(image_path), Some(ann_path)) => {
            let image = read_image(image_path)?;
            let annotations = read_annotation_file(ann_path)?;
            let image_id = annotations.first().map_or_else(
                || image_path.file_stem().map_or("image".into(), |x| x.to_string_lossy().into_owned()),
                |a| a.image_id.clone(),
            );
            let annotations = for_image(&annotations, Some(&image_id));
            Ok(Scene { image, image_id, annotations, config: json!({"image": image_path, "annotations": ann_path}) })
        }
        (None, None) => {
            let spec = SceneSpec { object_count: s.objects, ..SceneSpec::new(global.seed, s.side, s.side) };
            let (image, annotations) = generate_scene(&spec)?;
            Ok(Scene { image, image_id: spec.image_id(), annotations, config: json!({"synthetic_scene": spec}) })
        }
        _ => Err(CliError::Validation("--image and --annotations go together".into())),
    }
}

fn cmd_pipeline(global: &GlobalOpts, a: &PipelineArgs) -> Result<String, CliError> {
    let scene = load_scene(global, &a.scene)?;
    let id = scene.image_id.as_str();
    let mut payloads: Vec<Payload> = vec![generate_caption(&scene.annotations, id)];
    let cutouts = extract_cutouts(&scene.image, &scene.annotations, a.min_confidence)?;
    if cutouts.skipped > 0 {
        warn!("{} annotation(s) outside the image were skipped", cutouts.skipped);
    }
    payloads.extend(cutouts.payloads);
    match &a.model {
        Some(path) => {
            let model = load_checkpoint(path)?;
            payloads.push(package_image(&scene.image, id, ImageMethod::Ae(&model))?);
        }
        None => warn!("no --model given; skipping the autoencoder payload"),
    }
    payloads.push(package_image(&scene.image, id, ImageMethod::Dct(a.quality))?);
    payloads.push(package_image(&scene.image, id, ImageMethod::Lossless)?);
    payloads.push(package_image(&scene.image, id, ImageMethod::Raw)?);

    let link = link_model(&a.link)?;
    let plan = Policy::Hierarchical.plan(&payloads)?;
    let timeline = simulate(&plan, &link)?;
    let policies = compare_policies(&payloads, &link)?;
    let reference = raw_reference_bytes(&scene.image);
    let manifest = build_manifest(id, &payloads, reference)?;
    let config = json!({
        "seed": global.seed,
        "scene": scene.config,
        "model": a.model,
        "quality": a.quality,
        "min_confidence": a.min_confidence,
        "link": link,
    });
    if let Some(dir) = out_dir(global) {
        for (pos, &i) in plan.order().iter().enumerate() {
            let p = &payloads[i];
            let ext = match p.kind {
                PayloadKind::Caption => "txt",
                PayloadKind::RawImage => "pnm",
                _ => "imcp",
            };
            write_bytes(&dir.join("payloads").join(format!("{pos:02}_{}.{ext}", p.kind)), &p.bytes)?;
        }
        write_bytes(&dir.join("manifest.json"), &manifest)?;
        write_bytes(&dir.join("timeline.csv"), timeline.to_csv().as_bytes())?;
        write_bytes(&dir.join("policies.csv"), policies.to_csv().as_bytes())?;
        write_json(&dir.join("pipeline_config.json"), &config)?;
    }
    Ok(match global.format {
        Format::Csv => timeline.to_csv(),
        Format::Json => pretty(&json!({
            "command": "pipeline",
            "config": config,
            "image_id": id,
            "caption": String::from_utf8_lossy(&payloads[0].bytes),
            "order": plan.order().iter().map(|&i| payloads[i].kind.name()).collect::<Vec<_>>(),
            "manifest": serde_json::from_slice::<Value>(&manifest)?,
            "timeline": timeline,
            "time_to_first_intelligence_s": time_to_first_intelligence(&timeline).ok(),
            "policies": policies.rows,
        })),
    })
}

struct MethodRow {
    method: String,
    kind: PayloadKind,
    bytes: u64,
    ratio_pct: f64,
    psnr_db: f64,
    ssim: f64,
}

fn fallback_model(global: &GlobalOpts, a: &ReportArgs, image: &Image) -> Result<Model, CliError> {
    if image.width() != image.height() {
        return Err(CliError::Validation("report needs a square image or an explicit --model".into()));
    }
    let side = image.width();
    let data = generate_corpus(a.train_synthetic, side, image.channels(), global.seed)?;
    let mc = ModelConfig { blocks: a.blocks, input_side: side, image_channels: image.channels(), seed: global.seed, ..Default::default() };
    let batch_size = (a.train_synthetic / 4).clamp(1, 25);
    let tc = TrainConfig { epochs: a.train_epochs, batch_size, seed: global.seed, psnr_max: a.psnr_max, ..Default::default() };
    info!("training a {}-block model on {} synthetic scenes", a.blocks, a.train_synthetic);
    let (model, _) = train_with_progress(&mc, &tc, &data, |s| info!("epoch {} val_mse {:.6}", s.epoch, s.val_mse))?;
    Ok(model)
}

fn cmd_report(global: &GlobalOpts, a: &ReportArgs) -> Result<String, CliError> {
    let scene = load_scene(global, &a.scene)?;
    let (image, id) = (&scene.image, scene.image_id.as_str());
    let model = match &a.model {
        Some(path) => load_checkpoint(path)?,
        None => fallback_model(global, a, image)?,
    };
    let reference = raw_reference_bytes(image);
    let measure = |method: String, p: &Payload, recon: Option<&Image>| -> Result<MethodRow, CliError> {
        let (psnr_db, ssim) = match recon {
            Some(r) => (metrics::psnr(image, r, a.psnr_max)?, metrics::ssim(image, r)?),
            None => (f64::NAN, f64::NAN),
        };
        Ok(MethodRow {
            method,
            kind: p.kind,
            bytes: p.byte_size() as u64,
            ratio_pct: metrics::compression_ratio_bytes(reference, p.byte_size() as u64)?,
            psnr_db,
            ssim,
        })
    };

    let mut rows = Vec::new();
    let raw = package_image(image, id, ImageMethod::Raw)?;
    rows.push(measure("raw".into(), &raw, Some(image))?);
    let lossless = package_image(image, id, ImageMethod::Lossless)?;
    rows.push(measure("lossless predictive".into(), &lossless, Some(&decode_image_payload(&lossless)?))?);
    for &q in &a.qualities {
        let p = package_image(image, id, ImageMethod::Dct(q))?;
        rows.push(measure(format!("dct q{q}"), &p, Some(&decode_image_payload(&p)?))?);
    }
    let ae = package_image(image, id, ImageMethod::Ae(&model))?;
    let ae_recon = decode_embedding(&model, &EncodedBlob::from_bytes(&ae.bytes)?)?;
    rows.push(measure(format!("autoencoder b{}", model.config.blocks), &ae, Some(&ae_recon))?);
    let cutouts = extract_cutouts(image, &scene.annotations, 0.5)?;
    let cutout_bytes: usize = cutouts.payloads.iter().map(Payload::byte_size).sum();
    if !cutouts.payloads.is_empty() {
        let all = Payload::new(PayloadKind::Cutout, vec![0; cutout_bytes], id);
        rows.push(measure(format!("cutouts x{}", cutouts.payloads.len()), &all, None)?);
    }
    let caption = generate_caption(&scene.annotations, id);
    rows.push(measure("caption".into(), &caption, None)?);

    // DCT quality whose blob size is closest to the embedding blob.
    let ae_bytes = ae.byte_size() as u64;
    let mut best: Option<(u8, u64)> = None;
    for q in 1..=100u8 {
        let bytes = dct_encode(image, q)?.encoded_len() as u64;
        if best.is_none_or(|(_, b)| bytes.abs_diff(ae_bytes) < b.abs_diff(ae_bytes)) {
            best = Some((q, bytes));
        }
    }
    let (dct_q, _) = best.expect("non-empty quality range");
    let dct = package_image(image, id, ImageMethod::Dct(dct_q))?;
    let dct_row = measure(format!("dct q{dct_q}"), &dct, Some(&decode_image_payload(&dct)?))?;
    let ae_row = rows.iter().find(|r| r.kind == PayloadKind::AeEmbedding).expect("ae row");
    let gain = (ae_row.psnr_db - dct_row.psnr_db) / dct_row.psnr_db * 100.0;
    let comparison = json!({
        "ae_blocks": model.config.blocks,
        "ae_bytes": ae_row.bytes,
        "ae_ratio_pct": ae_row.ratio_pct,
        "ae_psnr_db": num(ae_row.psnr_db),
        "dct_quality": dct_q,
        "dct_bytes": dct_row.bytes,
        "dct_ratio_pct": dct_row.ratio_pct,
        "dct_psnr_db": num(dct_row.psnr_db),
        "psnr_gain_pct": num(gain),
    });
    let config = json!({
        "seed": global.seed,
        "scene": scene.config,
        "model": a.model,
        "model_config": model.config,
        "qualities": a.qualities,
        "psnr_max": a.psnr_max,
    });

    let mut csv = csv_line(&["Method", "Kind", "Bytes", "Compression", "PSNR", "SSIM"].map(String::from));
    for r in &rows {
        csv += &csv_line(&[
            r.method.clone(),
            r.kind.name().to_string(),
            r.bytes.to_string(),
            metrics::format_pct(r.ratio_pct),
            if r.psnr_db.is_nan() { String::new() } else { metrics::format_db(r.psnr_db) },
            if r.ssim.is_nan() { String::new() } else { format!("{:.4}", r.ssim) },
        ]);
    }
    if let Some(dir) = out_dir(global) {
        write_bytes(&dir.join("methods.csv"), csv.as_bytes())?;
        write_json(&dir.join("comparison.json"), &comparison)?;
        write_json(&dir.join("report_config.json"), &config)?;
    }
    Ok(match global.format {
        Format::Csv => csv,
        Format::Json => pretty(&json!({
            "command": "report",
            "config": config,
            "methods": rows.iter().map(|r| json!({
                "method": r.method,
                "kind": r.kind.name(),
                "bytes": r.bytes,
                "ratio_pct": r.ratio_pct,
                "psnr_db": num(r.psnr_db),
                "ssim": num(r.ssim),
            })).collect::<Vec<_>>(),
            "comparison": comparison,
        })),
    })
}
