//! End-to-end behavior of the `texforge` binary: exit codes, the config
//! echo, per-command contracts, and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::{json, Value};
use tempfile::TempDir;

use texforge::diffusion::{
    image_to_model, load_checkpoint, model_to_image, sample, NoiseSchedule, SampleParams,
};
use texforge::image::{read_pfm, read_png, write_display_png, write_mask_png, Transfer};
use texforge::postprocess::{estimate_tiling_scale, extract_alpha, GarmentMask};
use texforge::render::CropRect;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_texforge"));
    c.env_remove("TEXFORGE_THREADS");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

/// First stdout line: the config echo `{"command", "config", "inputs"}`.
fn echo_line(out: &Output) -> Value {
    let text = stdout_str(out);
    let first = text.lines().next().expect("stdout has an echo line");
    serde_json::from_str(first).expect("echo line is JSON")
}

/// Last stdout line: the machine-readable result.
fn result_line(out: &Output) -> Value {
    let text = stdout_str(out);
    let last = text.lines().last().expect("stdout has a result line");
    serde_json::from_str(last).expect("result line is JSON")
}

fn assert_ok(out: &Output, what: &str) {
    assert_eq!(code(out), 0, "{what} failed: {}", stderr_str(out));
}

/// A config small enough that every command finishes in well under a second.
fn base_config(seed: u64) -> Value {
    json!({
        "seed": seed,
        "patch_size": 32,
        "render_size": 48,
        "spp": 2,
        "texture_materials": 2,
        "print_materials": 1,
        "pairs_per_material": 2,
        "env_presets": ["gradient"],
        "env_height": 8,
        "mesh_count": 1,
        "mesh_cells": 8,
        "mesh_amplitude": 0.06,
        "crop_range": [10, 14],
        "tiling_range": [1.0, 2.0],
        "widths": [8, 12, 16],
        "groups": 4,
        "temb_dim": 8,
        "temb_hidden": 16,
        "timesteps": 12,
        "train_steps": 6,
        "batch_size": 2,
        "lr": 1e-3,
        "p_uncond": 0.2,
        "log_every": 2,
        "sample_steps": 4,
        "guidance": 1.5
    })
}

fn write_config(path: &Path, cfg: &Value) {
    std::fs::write(path, serde_json::to_string(cfg).unwrap()).unwrap();
}

/// Shared forged dataset + trained checkpoint; read-only for all tests.
/// Tests that run further commands direct `--out` at their own directories.
struct Fixture {
    _dir: TempDir,
    cfg: PathBuf,
    train_manifest: PathBuf,
    test_manifest: PathBuf,
    checkpoint: PathBuf,
    dataset_test: PathBuf,
}

fn fixture() -> &'static Fixture {
    static FIX: OnceLock<Fixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        write_config(&cfg, &base_config(11));
        let out = dir.path().join("out");
        let forge = run(bin().args(["forge", "--config"]).arg(&cfg).arg("--out").arg(&out));
        assert_ok(&forge, "fixture forge");
        let train = run(bin()
            .args(["train", "--deterministic", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out));
        assert_ok(&train, "fixture train");
        Fixture {
            cfg,
            train_manifest: out.join("dataset/train/manifest.json"),
            test_manifest: out.join("dataset/test/manifest.json"),
            checkpoint: out.join("train/model.ckpt"),
            dataset_test: out.join("dataset/test"),
            _dir: dir,
        }
    })
}

/// First test-split texture condition PNG, via the manifest rather than a
/// hard-coded name.
fn fixture_condition() -> PathBuf {
    let fx = fixture();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(&fx.test_manifest).unwrap()).unwrap();
    let entry = manifest["examples"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["kind"] == "texture")
        .expect("test split has a texture pair");
    fx.dataset_test.join(entry["condition_path"].as_str().unwrap())
}

fn fixture_target_pfm() -> PathBuf {
    let fx = fixture();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(&fx.test_manifest).unwrap()).unwrap();
    let entry = manifest["examples"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["kind"] == "texture")
        .unwrap();
    fx.dataset_test.join(entry["target_path"].as_str().unwrap())
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    write_config(&cfg, &base_config(1));

    let help = run(bin().arg("--help"));
    assert_eq!(code(&help), 0);

    let none = run(&mut bin());
    assert_eq!(code(&none), 2, "missing subcommand is a usage error");

    let both = run(bin()
        .args(["tile", "--texture", "t.pfm", "--repeats", "2,2", "--mask", "m.png"])
        .args(["--capture", "0,0,4,4"]));
    assert_eq!(code(&both), 2, "mask and repeats together is a usage error");

    let neither = run(bin().args(["tile", "--texture", "t.pfm"]));
    assert_eq!(code(&neither), 2, "neither mask nor repeats is a usage error");

    let bare_eval = run(bin().args(["eval"]));
    assert_eq!(code(&bare_eval), 2, "eval needs --checkpoint or --self-test");

    let bad_repeats =
        run(bin().args(["tile", "--texture", "t.pfm", "--repeats", "two,2"]).arg("--config").arg(&cfg));
    assert_eq!(code(&bad_repeats), 2);
    assert!(stderr_str(&bad_repeats).contains("--repeats"), "error names the flag");

    let mut threads = bin();
    threads.env("TEXFORGE_THREADS", "zero");
    let bad_threads = run(threads.args(["forge", "--config"]).arg(&cfg));
    assert_eq!(code(&bad_threads), 2);
    assert!(stderr_str(&bad_threads).contains("TEXFORGE_THREADS"));

    let camera = run(bin().args(["render", "--camera", "nope", "--config"]).arg(&cfg));
    assert_eq!(code(&camera), 2);
    let msg = stderr_str(&camera);
    for preset in ["front", "oblique", "side", "close"] {
        assert!(msg.contains(preset), "camera error lists '{preset}': {msg}");
    }
}

#[test]
fn config_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();

    let missing = run(bin().args(["forge", "--config", "/nonexistent/cfg.json"]));
    assert_eq!(code(&missing), 3);
    assert!(stderr_str(&missing).contains("/nonexistent/cfg.json"));

    let unknown = tmp.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"seed": 3, "bogus_knob": 1}"#).unwrap();
    let out = run(bin().args(["forge", "--config"]).arg(&unknown));
    assert_eq!(code(&out), 3);
    assert!(stderr_str(&out).contains("bogus_knob"));

    let mut bad = base_config(3);
    bad["texture_presets"] = json!(["plaid"]);
    let bad_path = tmp.path().join("bad.json");
    write_config(&bad_path, &bad);
    let out = run(bin().args(["forge", "--config"]).arg(&bad_path));
    assert_eq!(code(&out), 3);
    assert!(stderr_str(&out).contains("plaid"));
}

#[test]
fn forge_echoes_and_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    write_config(&cfg, &base_config(21));

    let out1 = tmp.path().join("o1");
    let first = run(bin().args(["forge", "--config"]).arg(&cfg).arg("--out").arg(&out1));
    assert_ok(&first, "forge");

    let echo = echo_line(&first);
    assert_eq!(echo["command"], "forge");
    assert_eq!(echo["config"]["seed"], 21, "seed explicit in the echo");
    assert!(echo["inputs"]["split"].is_string());

    let result = result_line(&first);
    assert_eq!(result["disjoint_materials"], true);
    for split in ["train", "test"] {
        let s = &result["splits"][split];
        assert!(s["skip_rate"].as_f64().unwrap() <= 0.10);
        assert_eq!(
            s["examples"].as_u64().unwrap(),
            s["texture"].as_u64().unwrap() + s["print"].as_u64().unwrap()
        );
    }

    // Re-running the echoed config reproduces the dataset byte-for-byte.
    let cfg2 = tmp.path().join("echoed.json");
    write_config(&cfg2, &echo["config"]);
    let out2 = tmp.path().join("o2");
    let second = run(bin().args(["forge", "--config"]).arg(&cfg2).arg("--out").arg(&out2));
    assert_ok(&second, "forge from echoed config");

    for split in ["train", "test"] {
        let dir1 = out1.join("dataset").join(split);
        let dir2 = out2.join("dataset").join(split);
        for entry in std::fs::read_dir(&dir1).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(dir1.join(&name)).unwrap();
            let b = std::fs::read(dir2.join(&name)).unwrap();
            assert_eq!(a, b, "{split}/{} differs between runs", name.to_string_lossy());
        }
    }
}

#[test]
fn forge_failures_name_the_cause() {
    let tmp = tempfile::tempdir().unwrap();

    let mut missing_mesh = base_config(5);
    missing_mesh["mesh_paths"] = json!(["/nonexistent/garment.obj"]);
    let cfg = tmp.path().join("mesh.json");
    write_config(&cfg, &missing_mesh);
    let out = run(bin().args(["forge", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("m")));
    assert_eq!(code(&out), 3);
    assert!(stderr_str(&out).contains("/nonexistent/garment.obj"), "error names the path");

    // Crops nearly as large as the render cannot reach full garment
    // coverage, so every example skips and the budget error must name the
    // first failing material.
    let mut hopeless = base_config(5);
    hopeless["crop_range"] = json!([46, 47]);
    let cfg2 = tmp.path().join("crop.json");
    write_config(&cfg2, &hopeless);
    let out2 =
        run(bin().args(["forge", "--split", "train", "--config"]).arg(&cfg2).arg("--out").arg(tmp.path().join("c")));
    assert_eq!(code(&out2), 3);
    assert!(stderr_str(&out2).contains("solid-tr000"), "error names the material: {}", stderr_str(&out2));
}

#[test]
fn train_is_deterministic_and_resumable() {
    let fx = fixture();
    let tmp = tempfile::tempdir().unwrap();

    let mut outs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let r = run(bin()
            .args(["train", "--deterministic", "--config"])
            .arg(&fx.cfg)
            .arg("--out")
            .arg(&out)
            .arg("--manifest")
            .arg(&fx.train_manifest));
        assert_ok(&r, "train");
        outs.push(out);
    }
    let log_a = std::fs::read(outs[0].join("train/loss.jsonl")).unwrap();
    let log_b = std::fs::read(outs[1].join("train/loss.jsonl")).unwrap();
    assert_eq!(log_a, log_b, "deterministic runs log identically");
    let ckpt_a = std::fs::read(outs[0].join("train/model.ckpt")).unwrap();
    let ckpt_b = std::fs::read(outs[1].join("train/model.ckpt")).unwrap();
    assert_eq!(ckpt_a, ckpt_b, "deterministic runs checkpoint identically");

    // Resume continues the optimizer step counter instead of restarting.
    let resumed = run(bin()
        .args(["train", "--deterministic", "--steps", "9", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(&outs[0])
        .arg("--manifest")
        .arg(&fx.train_manifest)
        .arg("--resume")
        .arg(outs[0].join("train/model.ckpt")));
    assert_ok(&resumed, "resume");
    assert_eq!(result_line(&resumed)["steps"], 9);
    let log: Vec<Value> = std::fs::read_to_string(outs[0].join("train/loss.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(log.len(), 9, "appended log covers the full history");
    assert_eq!(log[5]["step"], 5);
    assert_eq!(log[6]["step"], 6, "resumed steps continue the counter");

    // A divergent run aborts with the numerical exit code, names the step,
    // and still echoed its config first.
    let mut blow = base_config(11);
    blow["lr"] = json!(1e8);
    let cfg = tmp.path().join("blow.json");
    write_config(&cfg, &blow);
    let nan = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("nan"))
        .arg("--manifest")
        .arg(&fx.train_manifest));
    assert_eq!(code(&nan), 4, "non-finite loss is a numerical failure");
    assert!(stderr_str(&nan).contains("step"), "abort names the step");
    assert_eq!(echo_line(&nan)["command"], "train", "config echoed before acting");
}

#[test]
fn infer_is_deterministic_and_guidance_one_is_conditional() {
    let fx = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let cond_path = fixture_condition();

    let out_a = tmp.path().join("a.png");
    let out_b = tmp.path().join("b.png");
    for out in [&out_a, &out_b] {
        let r = run(bin()
            .args(["infer", "--config"])
            .arg(&fx.cfg)
            .arg("--out")
            .arg(tmp.path())
            .arg("--input")
            .arg(&cond_path)
            .arg("--checkpoint")
            .arg(&fx.checkpoint)
            .arg("--output")
            .arg(out));
        assert_ok(&r, "infer");
    }
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap(),
        "same seed gives identical output files"
    );

    // --guidance 1 must match the conditional branch run directly through
    // the library on the same checkpoint, seed, and schedule.
    let out_g1 = tmp.path().join("g1.png");
    let r = run(bin()
        .args(["infer", "--guidance", "1", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--input")
        .arg(&cond_path)
        .arg("--checkpoint")
        .arg(&fx.checkpoint)
        .arg("--output")
        .arg(&out_g1));
    assert_ok(&r, "infer at guidance 1");

    let (net, _) = load_checkpoint(&fx.checkpoint, None).unwrap();
    let cond = image_to_model::<f32>(&read_png(&cond_path, Transfer::Srgb).unwrap());
    let sched = NoiseSchedule::cosine(12).unwrap();
    let params = SampleParams { steps: 4, guidance: 1.0, seed: 11 };
    let x = sample(&net, &sched, Some(&cond), 32, 32, &params).unwrap();
    let reference = tmp.path().join("reference.png");
    write_display_png(&model_to_image(&x), &reference).unwrap();
    assert_eq!(
        std::fs::read(&out_g1).unwrap(),
        std::fs::read(&reference).unwrap(),
        "guidance 1 equals the conditional branch"
    );

    // Print mode appends an RGBA print derived via extract_alpha.
    let out_p = tmp.path().join("p.png");
    let r = run(bin()
        .args(["infer", "--print-mode", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--input")
        .arg(&cond_path)
        .arg("--checkpoint")
        .arg(&fx.checkpoint)
        .arg("--output")
        .arg(&out_p));
    assert_ok(&r, "infer --print-mode");
    let print_path = tmp.path().join("p_print.png");
    assert_eq!(result_line(&r)["print"], json!(print_path));
    let expected = tmp.path().join("expected_print.png");
    let x = sample(&net, &sched, Some(&cond), 32, 32, &SampleParams { steps: 4, guidance: 1.5, seed: 11 })
        .unwrap();
    write_display_png(&extract_alpha(&model_to_image(&x)).unwrap().to_image(), &expected).unwrap();
    assert_eq!(
        std::fs::read(&print_path).unwrap(),
        std::fs::read(&expected).unwrap(),
        "print output is extract_alpha of the normalized image"
    );

    // A capture whose size disagrees with the checkpoint is a data error.
    let small = tmp.path().join("small.png");
    write_display_png(&texforge::image::Image::new(16, 16, 3), &small).unwrap();
    let r = run(bin()
        .args(["infer", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--input")
        .arg(&small)
        .arg("--checkpoint")
        .arg(&fx.checkpoint));
    assert_eq!(code(&r), 3);
    let msg = stderr_str(&r);
    assert!(msg.contains("16x16") && msg.contains("32x32"), "error states both sizes: {msg}");
}

#[test]
fn tile_repeats_exactly_and_estimates_from_masks() {
    let fx = fixture();
    let tmp = tempfile::tempdir().unwrap();
    let tex = fixture_target_pfm();

    let tiled_path = tmp.path().join("tiled.pfm");
    let r = run(bin()
        .args(["tile", "--repeats", "2,2", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--texture")
        .arg(&tex)
        .arg("--output")
        .arg(&tiled_path));
    assert_ok(&r, "tile --repeats");
    assert_eq!(result_line(&r)["repeats"], json!([2.0, 2.0]));
    let src = read_pfm(&tex).unwrap();
    let tiled = read_pfm(&tiled_path).unwrap();
    assert_eq!((tiled.width(), tiled.height()), (64, 64));
    for (x, y, c) in [(3, 5, 0), (17, 9, 1), (30, 31, 2)] {
        assert_eq!(tiled.get(x, y, c), src.get(x, y, c));
        assert_eq!(tiled.get(x + 32, y, c), src.get(x, y, c), "exact periodicity");
        assert_eq!(tiled.get(x, y + 32, c), src.get(x, y, c), "exact periodicity");
    }

    // Mask route: repeats come from estimate_tiling_scale, echoed in JSON.
    let mask_path = tmp.path().join("mask.png");
    let mask: Vec<bool> =
        (0..64 * 64).map(|i| (12..52).contains(&(i % 64)) && (12..52).contains(&(i / 64))).collect();
    write_mask_png(&mask, 64, 64, &mask_path).unwrap();
    let capture = CropRect { x: 12, y: 12, w: 20, h: 20 };
    let expected =
        estimate_tiling_scale(&GarmentMask::new(64, 64, mask, capture).unwrap(), (1.0, 1.0)).unwrap();

    let masked_path = tmp.path().join("masked.pfm");
    let r = run(bin()
        .args(["tile", "--capture", "12,12,20,20", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--texture")
        .arg(&tex)
        .arg("--mask")
        .arg(&mask_path)
        .arg("--output")
        .arg(&masked_path));
    assert_ok(&r, "tile --mask");
    let got = &result_line(&r)["repeats"];
    assert_eq!(got[0].as_f64().unwrap() as f32, expected.0, "echoed x repeats");
    assert_eq!(got[1].as_f64().unwrap() as f32, expected.1, "echoed y repeats");
    assert_eq!(expected, (2.0, 2.0), "40px bbox over a 20px capture tiles 2x2");
}

#[test]
fn eval_self_test_is_perfect_and_reports_validate() {
    let fx = fixture();
    let tmp = tempfile::tempdir().unwrap();

    let r = run(bin()
        .args(["eval", "--self-test", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--manifest")
        .arg(&fx.test_manifest));
    assert_ok(&r, "eval --self-test");
    let result = result_line(&r);
    assert_eq!(result["failed"], 0);
    assert_eq!(result["mean"]["mse"].as_f64().unwrap(), 0.0, "self-test mse is exactly 0");
    assert_eq!(result["mean"]["ssim"].as_f64().unwrap(), 1.0, "self-test ssim is exactly 1");

    // The written report follows the MetricReport schema.
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval/report.json")).unwrap())
            .unwrap();
    let pairs = report["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 6);
    for p in pairs {
        assert!(p["id"].is_string());
        for metric in ["mse", "ssim", "ms_ssim", "seam_score"] {
            assert!(p[metric].is_number(), "pair metric {metric} present");
        }
    }
    let summary = report["summary"].as_array().unwrap();
    let names: Vec<&str> = summary.iter().map(|s| s["metric"].as_str().unwrap()).collect();
    assert_eq!(names, ["mse", "psnr", "ssim", "ms_ssim", "seam_score"]);
    for s in summary {
        // Self-test PSNR is infinite on every pair, so its finite-value mean
        // serializes as null.
        assert!(s["mean"].is_number() || s["mean"].is_null());
        assert!(s["infinite"].is_number());
    }
    let table = std::fs::read_to_string(tmp.path().join("eval/report.txt")).unwrap();
    assert!(table.contains("pair") && table.contains("seam_score"));

    // With the real checkpoint all pairs evaluate, and the barely trained
    // model is far from perfect.
    let r = run(bin()
        .args(["eval", "--config"])
        .arg(&fx.cfg)
        .arg("--out")
        .arg(tmp.path())
        .arg("--manifest")
        .arg(&fx.test_manifest)
        .arg("--checkpoint")
        .arg(&fx.checkpoint));
    assert_ok(&r, "eval --checkpoint");
    let result = result_line(&r);
    assert_eq!(result["failed"], 0);
    assert!(result["mean"]["mse"].as_f64().unwrap() > 0.0);
    assert!(result["tiled_seam_mean"].is_number());
}

#[test]
fn render_flat_center_matches_albedo_and_repeats_bytewise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    write_config(&cfg, &base_config(2));

    let out1 = tmp.path().join("r1");
    let r = run(bin()
        .args(["render", "--albedo", "0.25,0.5,0.75", "--lobes", "diffuse", "--seed", "77", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out1));
    assert_ok(&r, "render");
    assert_eq!(echo_line(&r)["config"]["seed"], 77, "global --seed lands in the echo");
    for file in ["garment.png", "garment.pfm", "coverage.png", "flat.png", "flat.pfm", "albedo.pfm"] {
        assert!(out1.join("render").join(file).exists(), "render writes {file}");
    }

    // Calibrated flat light: a Lambertian constant-albedo material renders
    // to its own albedo at the patch center.
    let flat = read_pfm(&out1.join("render/flat.pfm")).unwrap();
    let (cx, cy) = (flat.width() / 2, flat.height() / 2);
    for (c, want) in [0.25f32, 0.5, 0.75].into_iter().enumerate() {
        let got = flat.get(cx, cy, c);
        assert!((got - want).abs() < 2e-3, "flat center channel {c}: {got} vs {want}");
    }

    let out2 = tmp.path().join("r2");
    let r = run(bin()
        .args(["render", "--albedo", "0.25,0.5,0.75", "--lobes", "diffuse", "--seed", "77", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out2));
    assert_ok(&r, "render rerun");
    for file in ["garment.png", "garment.pfm", "flat.pfm"] {
        assert_eq!(
            std::fs::read(out1.join("render").join(file)).unwrap(),
            std::fs::read(out2.join("render").join(file)).unwrap(),
            "{file} is deterministic under a fixed seed"
        );
    }
}

#[test]
fn lockfile_blocks_concurrent_use_and_is_released() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    write_config(&cfg, &base_config(4));
    let out = tmp.path().join("out");
    std::fs::create_dir_all(&out).unwrap();

    let lock = out.join(".texforge.lock");
    std::fs::write(&lock, "held").unwrap();
    let blocked = run(bin().args(["forge", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_eq!(code(&blocked), 3, "locked output root refuses to run");
    assert!(stderr_str(&blocked).contains(".texforge.lock"));

    std::fs::remove_file(&lock).unwrap();
    let ok = run(bin().args(["forge", "--split", "train", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert_ok(&ok, "forge after lock removal");
    assert!(!lock.exists(), "lock released after a successful run");
}
