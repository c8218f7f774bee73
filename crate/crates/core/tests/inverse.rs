use ndarray::{Array3, Axis};
use scarmap_core::dataset::Mode;
use scarmap_core::inverse::{
    average_outputs, load_prediction, read_training_curve, save_prediction, write_training_curve,
    CurvePoint, ModelSpec, TrainConfig,
};

mod common;

fn output(seed: u64, side: usize) -> Array3<f32> {
    let f = common::smooth_random_field(seed, 5 * side, side);
    f.into_shape_with_order((5, side, side))
        .unwrap()
        .mapv(|v| v as f32)
}

#[test]
fn published_architecture_and_training_defaults() {
    let s = ModelSpec::default();
    assert_eq!(s.encoder, vec![60, 120, 240]);
    assert_eq!(s.decoder, vec![120, 60, 30, 15]);
    assert_eq!(s.output_shape(), [5, 96, 96]);
    for n in [10, 20, 600] {
        assert_eq!(s.input_shape(n).unwrap(), [n + 2, 29, 29]);
    }
    let t = TrainConfig::default();
    assert_eq!(t.epochs, 100);
    assert_eq!(t.learning_rate, 1e-3);
    assert_eq!(t.weight_decay, 1e-2);
    assert_eq!(t.folds, 10);
    assert_eq!(t.noise_sigma, 0.05);
    assert_eq!(t.mode, Mode::C);
    t.validate().unwrap();
    assert!(TrainConfig { folds: 1, ..t }.validate().is_err());
}

#[test]
fn configs_parse_from_toml() {
    let t: TrainConfig = toml::from_str("epochs = 5\nmode = \"HeI\"").unwrap();
    assert_eq!((t.epochs, t.mode, t.folds), (5, Mode::HeI, 10));
    let s: ModelSpec = toml::from_str("coordconv = false").unwrap();
    assert!(!s.coordconv);
    assert_eq!(s.encoder, ModelSpec::default().encoder);
}

#[test]
fn curve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("curve.csv");
    let pts: Vec<CurvePoint> = (0..7)
        .map(|e| CurvePoint {
            epoch: e,
            train_rmse: 1.0 / (e + 1) as f64,
            val_rmse: 1.1 / (e + 1) as f64,
        })
        .collect();
    write_training_curve(&p, &pts).unwrap();
    assert_eq!(read_training_curve(&p).unwrap(), pts);
    std::fs::write(&p, "epoch,loss\n0,1\n").unwrap();
    assert!(read_training_curve(&p).is_err());
}

#[test]
fn single_and_duplicate_samples() {
    let o = output(1, 12);
    let (id, f) = average_outputs(&[(3, o.clone())], 0.1).unwrap();
    assert_eq!(id, 3);
    for (k, comp) in [&f.d_xx, &f.d_yy, &f.d_xy].into_iter().enumerate() {
        assert_eq!(comp, &o.index_axis(Axis(0), k).mapv(f64::from));
    }
    let (_, twice) = average_outputs(&[(3, o.clone()), (3, o.clone())], 0.1).unwrap();
    assert_eq!(twice, f);
}

#[test]
fn average_matches_scalar_loop() {
    let side = 16;
    let outs: Vec<(u32, Array3<f32>)> = (0..39).map(|s| (8, output(s, side))).collect();
    let (_, f) = average_outputs(&outs, 0.125).unwrap();
    for c in 0..3 {
        for i in 0..side {
            for j in 0..side {
                let mut acc = 0.0f64;
                for (_, o) in &outs {
                    acc += o[[c, i, j]] as f64;
                }
                let got = [&f.d_xx, &f.d_yy, &f.d_xy][c][[i, j]];
                assert!((got - acc / 39.0).abs() < 1e-6);
            }
        }
    }
    // duplicating every sample the same number of times changes nothing
    let tripled: Vec<_> = outs
        .iter()
        .flat_map(|o| [o.clone(), o.clone(), o.clone()])
        .collect();
    let (_, g) = average_outputs(&tripled, 0.125).unwrap();
    for (a, b) in f.d_xx.iter().zip(&g.d_xx) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn mixed_or_empty_inputs_rejected() {
    assert!(average_outputs(&[], 0.1).is_err());
    assert!(average_outputs(&[(1, output(0, 8)), (2, output(1, 8))], 0.1).is_err());
    assert!(average_outputs(&[(1, output(0, 8)), (1, output(1, 9))], 0.1).is_err());
}

#[test]
fn predictions_use_the_field_format() {
    let dir = tempfile::tempdir().unwrap();
    let (_, f) = average_outputs(&[(4, output(2, 10))], 0.3).unwrap();
    let path = save_prediction(dir.path(), 4, &f).unwrap();
    assert!(path.ends_with("sim_00004.json"));
    let back = load_prediction(dir.path(), 4).unwrap().unwrap();
    assert_eq!(back.dim(), (10, 10));
    assert_eq!(back.d_xx, f.d_xx.mapv(|v| v as f32 as f64));
    assert!(load_prediction(dir.path(), 5).unwrap().is_none());
    let (field, m) = scarmap_core::substrate::load_tensor_field(&path).unwrap();
    assert_eq!(m.shape, [3, 10, 10]);
    assert_eq!(field.dx, 0.3);
}
