use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;
use scarmap_core::substrate::{
    load_mask, load_tensor_field, save_tensor_field, DiffusionTensorField,
};
use serde_json::{json, Value};
use tempfile::TempDir;

// 3.2 cm tissue at 0.5 mm, 100 ms: a few seconds per simulation
const SMALL: &str = r#"
[substrate]
n = 64
dx = 0.05
[sim]
dx = 0.05
duration_ms = 100.0
[electrodes]
rows = 8
cols = 8
spacing_cm = 0.4
[dataset]
folds = 2
target_n = 64
[dataset.spec]
n = 4
n_t = 5
n_tau = 10
l = 100
[eval]
surrogates = 5
"#;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("small.toml"), SMALL).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let root = self.dir.path();
        Command::new(env!("CARGO_BIN_EXE_scarmap"))
            .arg("--workdir")
            .arg(root)
            .arg("--config")
            .arg(root.join("small.toml"))
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "scarmap {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn fails(&self, args: &[&str], code: i32) -> String {
        let out = self.run(args);
        assert_eq!(out.status.code(), Some(code), "scarmap {args:?}");
        String::from_utf8(out.stderr).unwrap()
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(rel)).unwrap()).unwrap()
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn gen_is_deterministic_per_seed() {
    let (a, b) = (Work::new(), Work::new());
    a.ok(&["--seed", "7", "gen", "--count", "6"]);
    b.ok(&["--seed", "7", "gen", "--count", "6"]);
    assert_eq!(
        dir_bytes(&a.path("substrates")),
        dir_bytes(&b.path("substrates"))
    );

    b.ok(&["--seed", "8", "--force", "gen", "--count", "6"]);
    assert_ne!(
        dir_bytes(&a.path("substrates")),
        dir_bytes(&b.path("substrates"))
    );
}

#[test]
fn gen_mixes_kinds_in_reference_proportions() {
    let w = Work::new();
    fs::write(
        w.path("small.toml"),
        "[substrate]\nn = 16\ndx = 0.2\n[sim]\ndx = 0.2\n[electrodes]\nrows = 2\ncols = 2\nspacing_cm = 1.0\n",
    )
    .unwrap();
    let out = w.ok(&["gen", "--count", "330"]);
    assert!(out.contains("HeI 107, HoA 187, HeA 36"), "{out}");
    let m = w.json("substrates/manifest.json");
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 330);
    assert_eq!(entries[107]["kind"], "HoA");
    assert_eq!(entries[329]["kind"], "HeA");
}

#[test]
fn empty_gen_and_collisions() {
    let w = Work::new();
    w.ok(&["gen", "--count", "0"]);
    assert_eq!(w.json("substrates/manifest.json")["entries"], json!([]));

    let err = w.fails(&["gen", "--count", "2"], 2);
    assert!(err.contains("--force"), "{err}");
    w.ok(&["--force", "gen", "--count", "2"]);
    assert_eq!(
        w.json("substrates/manifest.json")["entries"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn missing_upstream_names_the_command() {
    let w = Work::new();
    let err = w.fails(&["dataset"], 2);
    assert!(err.contains("run `scarmap egm` first"), "{err}");
    let err = w.fails(&["simulate"], 2);
    assert!(err.contains("run `scarmap gen` first"), "{err}");
    w.fails(&["--jobs", "0", "gen", "--count", "1"], 2);
}

#[test]
fn pipeline_end_to_end() {
    let w = Work::new();
    w.ok(&["gen", "--count", "4"]);
    w.ok(&["simulate"]);
    w.ok(&["egm"]);
    let out = w.ok(&["dataset"]);
    assert!(out.contains("36 samples from 4 simulations"), "{out}");

    let sims = w.json("sims/manifest.json");
    assert_eq!(sims["upstream"]["substrates"].as_str().unwrap().len(), 64);
    for e in sims["entries"].as_array().unwrap() {
        assert_eq!(e["info"]["frames"], 100);
    }

    // rerunning the dataset stage reproduces it exactly
    let first = fs::read(w.path("dataset/manifest.json")).unwrap();
    w.ok(&["--force", "dataset"]);
    assert_eq!(first, fs::read(w.path("dataset/manifest.json")).unwrap());

    // truth as prediction: perfect scores
    fs::create_dir(w.path("pred")).unwrap();
    for f in fs::read_dir(w.path("substrates")).unwrap() {
        let f = f.unwrap();
        if f.file_name() != "manifest.json" {
            fs::copy(f.path(), w.path("pred").join(f.file_name())).unwrap();
        }
    }
    let pred = w.path("pred");
    w.ok(&["eval", "--pred", pred.to_str().unwrap()]);
    let records = w.json("eval/records.json");
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 4);
    for r in records {
        assert_eq!(r["rmse"], 0.0);
        assert_eq!(r["jaccard"], 1.0);
        assert!(r["percentile"].is_number());
    }
    let csv = fs::read_to_string(w.path("eval/aggregate.csv")).unwrap();
    assert!(csv.starts_with("metric,value\ncount,4\n"), "{csv}");

    w.ok(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--fold",
        "0",
        "--surrogates",
        "0",
        "--force",
    ]);
    let n0 = w.json("eval/records.json").as_array().unwrap().len();
    assert!(n0 > 0 && n0 < 4);

    w.ok(&[
        "surrogate",
        "--pred",
        pred.to_str().unwrap(),
        "--count",
        "3",
        "--save",
        "2",
    ]);
    assert_eq!(
        w.json("surrogate/results.json").as_array().unwrap().len(),
        4
    );
    let (s, _) = load_tensor_field(&w.path("surrogate/sim_00000.s001.json")).unwrap();
    assert_eq!(s.dim(), (64, 64));

    // electrogram CSV: header plus one row per sample
    let csv = w.path("trace.csv");
    w.ok(&[
        "plot",
        w.path("egm/sim_00001.json").to_str().unwrap(),
        "-o",
        csv.to_str().unwrap(),
        "--electrode",
        "3,4",
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t_ms,phi"));
    assert_eq!(text.lines().count(), 101);
    let png = w.path("trace.png");
    w.ok(&["plot", csv.to_str().unwrap(), "-o", png.to_str().unwrap()]);
    assert_eq!(image::open(&png).unwrap().width(), 640);

    let frame = w.path("frame.png");
    let vm = w
        .path("sims")
        .join(sims["entries"][0]["file"].as_str().unwrap());
    w.ok(&[
        "plot",
        vm.to_str().unwrap(),
        "-o",
        frame.to_str().unwrap(),
        "--frame",
        "20",
    ]);
    assert_eq!(image::open(&frame).unwrap().width(), 64);

    // a new substrate stage invalidates everything downstream
    w.ok(&["--force", "--seed", "1", "gen", "--count", "4"]);
    let err = w.fails(&["--force", "dataset"], 2);
    assert!(
        err.contains("stale") && err.contains("scarmap simulate"),
        "{err}"
    );
}

#[test]
fn nan_substrate_is_an_instability() {
    let w = Work::new();
    w.ok(&["gen", "--count", "1", "--mode", "HoA"]);
    let data = w.path("substrates/sim_00000.f32");
    let mut bytes = fs::read(&data).unwrap();
    let mid = bytes.len() / 8 * 4;
    bytes[mid..mid + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&data, bytes).unwrap();
    let err = w.fails(&["simulate"], 3);
    assert!(err.contains("instability"), "{err}");
}

#[test]
fn plot_thresholded_field_matches_mask() {
    let w = Work::new();
    w.ok(&["gen", "--count", "1", "--mode", "HeI"]);
    let field = w.path("substrates/sim_00000.json");
    let png = w.path("dxx.png");
    w.ok(&[
        "plot",
        field.to_str().unwrap(),
        "-o",
        png.to_str().unwrap(),
        "--scale",
        "2",
    ]);
    let img = image::open(&png).unwrap().to_luma8();
    assert_eq!(img.dimensions(), (128, 128));
    let dark = img.pixels().filter(|p| p.0[0] < 128).count() / 4;

    let (_, m) = load_tensor_field(&field).unwrap();
    let mask = load_mask(&w.path("substrates").join(m.mask.unwrap()), 64, 64).unwrap();
    let scar = mask.iter().filter(|&&v| v != 0).count();
    assert!(scar > 0);
    assert!(
        (dark as f64 - scar as f64).abs() <= 0.01 * scar as f64,
        "{dark} dark pixels vs {scar} scar cells"
    );

    let mpng = w.path("mask.png");
    w.ok(&[
        "plot",
        field.to_str().unwrap(),
        "-o",
        mpng.to_str().unwrap(),
        "--component",
        "mask",
    ]);
    let lit = image::open(&mpng)
        .unwrap()
        .to_luma8()
        .pixels()
        .filter(|p| p.0[0] > 128)
        .count();
    assert_eq!(lit, scar);

    let csv = w.path("dxx.csv");
    w.ok(&["plot", field.to_str().unwrap(), "-o", csv.to_str().unwrap()]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 64);
    assert!(text.lines().all(|l| l.split(',').count() == 64));
}

#[test]
fn plot_of_flat_field_is_uniform() {
    let w = Work::new();
    let f = DiffusionTensorField::isotropic(Array2::zeros((12, 20)), 0.05).unwrap();
    let json = save_tensor_field(&w.path("zero"), &f, None, json!({}), None).unwrap();
    let png = w.path("zero.png");
    w.ok(&[
        "plot",
        json.to_str().unwrap(),
        "-o",
        png.to_str().unwrap(),
        "--colormap",
        "viridis",
    ]);
    let img = image::open(&png).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (20, 12));
    let first = *img.get_pixel(0, 0);
    assert!(img.pixels().all(|p| *p == first));
}

#[test]
fn plot_rejects_unknown_inputs() {
    let w = Work::new();
    w.ok(&["gen", "--count", "0"]);
    let m = w.path("substrates/manifest.json");
    let err = w.fails(
        &[
            "plot",
            m.to_str().unwrap(),
            "-o",
            w.path("x.png").to_str().unwrap(),
        ],
        2,
    );
    assert!(err.contains("unknown artifact kind"), "{err}");
    let err = w.fails(
        &[
            "plot",
            m.to_str().unwrap(),
            "-o",
            w.path("x.gif").to_str().unwrap(),
        ],
        2,
    );
    assert!(err.contains(".png or .csv"), "{err}");
    fs::write(w.path("odd.csv"), "a,b\n1,2\n").unwrap();
    w.fails(
        &[
            "plot",
            w.path("odd.csv").to_str().unwrap(),
            "-o",
            w.path("x.png").to_str().unwrap(),
        ],
        2,
    );
}

#[test]
fn plots_training_curves() {
    let w = Work::new();
    let pts: Vec<_> = (1..=20)
        .map(|e| scarmap_core::inverse::CurvePoint {
            epoch: e,
            train_rmse: 1.0 / e as f64,
            val_rmse: 1.2 / e as f64,
        })
        .collect();
    let csv = w.path("curve.csv");
    scarmap_core::inverse::write_training_curve(&csv, &pts).unwrap();
    let png = w.path("curve.png");
    w.ok(&[
        "plot",
        csv.to_str().unwrap(),
        "-o",
        png.to_str().unwrap(),
        "--width",
        "300",
        "--height",
        "200",
    ]);
    let img = image::open(&png).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (300, 200));
    assert!(img.pixels().any(|p| p.0 == [255, 127, 14]));
}
