mod common;

use approx::assert_relative_eq;
use ndarray::Array2;
use scarmap_core::ep::*;
use scarmap_core::substrate::{gen_scar_map, DiffusionTensorField, ScarConfig};
use scarmap_core::Error;

fn quiet(cfg: SimConfig) -> SimConfig {
    SimConfig {
        stimulus: None,
        ..cfg
    }
}

#[test]
fn diffusion_matches_assembled_operator() {
    let n = 24;
    for seed in 0..3 {
        let d = common::random_spd_field(seed, n, 0.01);
        let u = common::smooth_random_field(100 + seed, n, n);
        let (m, a) = common::assemble_dense(&d);
        let want = common::dense_apply(m, &a, &u);
        let got = diffusion_term(u.view(), &d, 0.01).unwrap();
        let scale = want.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-10 * scale, "{g} vs {w}");
        }
    }
}

#[test]
fn rest_state_is_stable_without_diffusion() {
    let d = DiffusionTensorField::uniform(16, 16, 0.0, 0.0, 0.0, 0.01).unwrap();
    let cfg = quiet(SimConfig::default());
    let mut sim = Simulator::new(&cfg, &d).unwrap();
    for _ in 0..1000 {
        sim.step().unwrap();
    }
    let s = sim.state();
    // Only the slow inward tail acts at rest: u(t) = a·τ0·(1 - e^{-t/τ0}).
    let p = &cfg.params;
    let a = (1.0 + (p.k * -p.u_c_si).tanh()) / (2.0 * p.tau_si);
    let expect = a * p.tau_0 * (1.0 - (-10.0 / p.tau_0).exp());
    assert!(expect < 1e-8);
    for &u in s.u.iter() {
        assert!(u.abs() < 1e-8);
        assert_relative_eq!(u, expect, max_relative = 1e-3);
    }
    assert!(s.v.iter().chain(s.w.iter()).all(|&x| x == 1.0));
    assert_relative_eq!(s.t, 10.0, max_relative = 1e-12);
}

#[test]
fn diffusion_only_conserves_mass() {
    for seed in 0..3 {
        let n = 40;
        let d = common::random_spd_field(seed, n, 0.01);
        let cfg = SimConfig {
            ionic: false,
            stimulus: None,
            dt: 0.02,
            ..Default::default()
        };
        let mut state = SimState::rest(n, n);
        state.u = common::smooth_random_field(seed + 7, n, n).mapv(|x| x + 3.0);
        let before = state.u.sum();
        let mut sim = Simulator::with_state(&cfg, &d, state).unwrap();
        for _ in 0..1000 {
            sim.step().unwrap();
        }
        let after = sim.state().u.sum();
        assert!(((after - before) / before).abs() < 1e-6);
    }
}

#[test]
fn corner_stimulus_excites() {
    let d = DiffusionTensorField::uniform(60, 60, 1e-3, 1e-3, 0.0, 0.01).unwrap();
    let cfg = SimConfig {
        duration_ms: 10.0,
        stimulus: Some(StimulusProtocol::corner(0.1)),
        ..Default::default()
    };
    let s = run(&cfg, &d, NullSink).unwrap();
    assert!(s.u_max > cfg.params.u_c);
    assert!(s.activation_coverage > 0.0);
    assert_eq!(s.frames, 10);
}

#[test]
fn zero_duration_run() {
    let d = DiffusionTensorField::uniform(8, 8, 1e-3, 1e-3, 0.0, 0.01).unwrap();
    let cfg = SimConfig {
        duration_ms: 0.0,
        stimulus: Some(StimulusProtocol::corner(0.05)),
        ..Default::default()
    };
    let mut sink = MemorySink::default();
    let s = run(&cfg, &d, &mut sink).unwrap();
    assert_eq!(s.frames, 0);
    assert_eq!(s.steps, 0);
    assert!(sink.frames.is_empty());
    assert_eq!((s.u_min, s.u_max), (0.0, 0.0));
    assert_eq!(s.activation_coverage, 0.0);
}

#[test]
fn frames_are_dimensional_potentials() {
    let d = DiffusionTensorField::uniform(12, 12, 1e-3, 1e-3, 0.0, 0.01).unwrap();
    let cfg = quiet(SimConfig {
        duration_ms: 3.0,
        ..Default::default()
    });
    let mut sink = MemorySink::default();
    run(&cfg, &d, &mut sink).unwrap();
    assert_eq!(sink.times.len(), 3);
    assert_relative_eq!(sink.times[2], 3.0, max_relative = 1e-12);
    // Rest maps to V_0.
    assert!(sink
        .frames
        .iter()
        .all(|f| f.iter().all(|&v| (v + 85.0).abs() < 1e-5)));
}

#[test]
fn serial_and_parallel_agree_bitwise() {
    let n = 64;
    let d = common::random_spd_field(5, n, 0.01);
    let mk = |parallel| SimConfig {
        duration_ms: 15.0,
        dt: 0.02,
        parallel,
        stimulus: Some(StimulusProtocol::corner(0.15)),
        ..Default::default()
    };
    let mut a = MemorySink::default();
    let mut b = MemorySink::default();
    let mut c = MemorySink::default();
    run(&mk(false), &d, &mut a).unwrap();
    run(&mk(false), &d, &mut b).unwrap();
    run(&mk(true), &d, &mut c).unwrap();
    assert_eq!(a.frames, b.frames);
    assert_eq!(a.frames, c.frames);
}

#[test]
fn gates_stay_in_unit_interval() {
    let d = DiffusionTensorField::uniform(50, 50, 1e-3, 1e-3, 0.0, 0.01).unwrap();
    let cfg = SimConfig {
        stimulus: Some(StimulusProtocol::corner(0.1)),
        ..Default::default()
    };
    let mut sim = Simulator::new(&cfg, &d).unwrap();
    for k in 0..30_000 {
        sim.step().unwrap();
        if k % 500 == 0 {
            let s = sim.state();
            assert!(s
                .v
                .iter()
                .chain(s.w.iter())
                .all(|&x| (0.0..=1.0).contains(&x)));
            assert!(s.u.iter().all(|&x| (-0.1..=1.2).contains(&x)));
        }
    }
}

#[test]
fn scar_delays_far_corner() {
    let n = 100;
    let dx = 0.01;
    let healthy = DiffusionTensorField::uniform(n, n, 1e-3, 1e-3, 0.0, dx).unwrap();
    let mut d = Array2::from_elem((n, n), 1e-3);
    for i in 30..70 {
        for j in 30..70 {
            d[[i, j]] = 1e-4;
        }
    }
    let scarred = DiffusionTensorField::isotropic(d, dx).unwrap();
    let cfg = SimConfig {
        duration_ms: 60.0,
        record_every_ms: 10.0,
        stimulus: Some(StimulusProtocol::corner(0.1)),
        ..Default::default()
    };
    let a = run(&cfg, &healthy, NullSink).unwrap().activation_times;
    let b = run(&cfg, &scarred, NullSink).unwrap().activation_times;
    let (ta, tb) = (a[[n - 1, n - 1]], b[[n - 1, n - 1]]);
    assert!(ta.is_finite() && tb.is_finite());
    assert!(tb > ta + 1.0, "healthy {ta} ms, scarred {tb} ms");
}

// A low-diffusivity region draws less electrotonic current from the front
// passing beside it, so cells next to it can fire a little earlier. The gain
// is bounded and fades with distance; beyond that, lowering d only delays.
#[test]
fn lowering_diffusivity_delays_activation_outside() {
    let n = 80;
    let dx = 0.01;
    let cfg = SimConfig {
        duration_ms: 60.0,
        record_every_ms: 10.0,
        stimulus: Some(StimulusProtocol::corner(0.1)),
        ..Default::default()
    };
    for seed in 0..3 {
        let scar = gen_scar_map(
            seed,
            &ScarConfig {
                fraction: [0.05, 0.2],
                ..ScarConfig::default().with_n(n)
            },
        )
        .unwrap();
        let base = DiffusionTensorField::uniform(n, n, 1e-3, 1e-3, 0.0, dx).unwrap();
        let lowered = DiffusionTensorField::isotropic(scar.diffusivity(), dx).unwrap();
        let a = run(&cfg, &base, NullSink).unwrap().activation_times;
        let b = run(&cfg, &lowered, NullSink).unwrap().activation_times;
        let scar_cells: Vec<(usize, usize)> = scar
            .mask
            .indexed_iter()
            .filter(|(_, &m)| m == 1)
            .map(|(p, _)| p)
            .collect();
        let mut delay_sum = 0.0;
        let mut checked = 0;
        for ((idx, &ta), &tb) in a.indexed_iter().zip(b.iter()) {
            if scar.mask[idx] != 0 || !ta.is_finite() {
                continue;
            }
            let dist = scar_cells
                .iter()
                .map(|&(i, j)| i.abs_diff(idx.0).max(j.abs_diff(idx.1)))
                .min()
                .unwrap();
            let gain = ta - tb;
            assert!(gain <= 0.2, "seed {seed} cell {idx:?}: {gain} ms earlier");
            if dist >= 10 {
                assert!(
                    gain <= 0.02,
                    "seed {seed} cell {idx:?} ({dist} cells out): {gain} ms earlier"
                );
            }
            if tb.is_finite() {
                delay_sum += tb - ta;
            }
            checked += 1;
        }
        assert!(checked > 1000);
        assert!(delay_sum > 0.0);
    }
}

#[test]
fn planar_wave_converges_with_grid() {
    let coarse = common::planar_cv(0.01, 0.01, 1e-3);
    let fine = common::planar_cv(0.005, 0.005, 1e-3);
    assert!(((coarse - fine) / fine).abs() < 0.05, "{coarse} vs {fine}");
}

#[test]
fn cv_scales_with_sqrt_diffusivity() {
    let fast = common::planar_cv(0.01, 0.01, 1e-3);
    let slow = common::planar_cv(0.01, 0.01, 2.5e-4);
    assert!(((fast / slow) - 2.0).abs() < 0.2);
}

#[test]
fn nan_state_reports_first_step() {
    let d = DiffusionTensorField::uniform(8, 8, 1e-3, 1e-3, 0.0, 0.01).unwrap();
    let mut s = SimState::rest(8, 8);
    s.u[[3, 3]] = f64::NAN;
    let cfg = quiet(SimConfig::default());
    match step(&s, &cfg, &d) {
        Err(Error::Instability { step, field, .. }) => {
            assert_eq!(step, 1);
            assert_eq!(field, "u");
        }
        other => panic!("expected instability, got {other:?}"),
    }
}

#[test]
fn unstable_dt_rejected() {
    let d = DiffusionTensorField::uniform(8, 8, 1e-3, 1e-3, 0.0, 0.01).unwrap();
    let cfg = SimConfig {
        dt: 0.05,
        ..Default::default()
    };
    assert!(matches!(
        Simulator::new(&cfg, &d),
        Err(Error::InvalidParameter(_))
    ));
    let cfg = SimConfig {
        record_every_ms: 0.015,
        ..Default::default()
    };
    assert!(matches!(Simulator::new(&cfg, &d), Err(Error::Config(_))));
}

#[test]
fn vm_stack_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = DiffusionTensorField::uniform(20, 30, 1e-3, 1e-3, 0.0, 0.01).unwrap();
    let cfg = SimConfig {
        duration_ms: 5.0,
        stimulus: Some(StimulusProtocol::corner(0.1)),
        ..Default::default()
    };
    let mut mem = MemorySink::default();
    let mut writer = VmStackWriter::new(dir.path().join("vm"));
    run(&cfg, &d, Tee(&mut mem, &mut writer)).unwrap();
    let (stack, m) = load_vm_stack(writer.manifest_path()).unwrap();
    assert_eq!(m.shape, [5, 20, 30]);
    assert_eq!(m.v0_mv, -85.0);
    assert_eq!(m.dt_record_ms, 1.0);
    for (k, f) in mem.frames.iter().enumerate() {
        for ((i, j), &v) in f.indexed_iter() {
            assert_eq!(stack[[k, i, j]], v as f32);
        }
    }
    let f3 = read_vm_frame(writer.manifest_path(), &m, 3).unwrap();
    assert_eq!(f3[[0, 0]], mem.frames[3][[0, 0]] as f32 as f64);
}

#[test]
fn config_round_trips_through_toml_and_json() {
    let cfg = SimConfig::default();
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(SimConfig::from_json(&json).unwrap(), cfg);
    let partial = SimConfig::from_toml("duration_ms = 5.0\n").unwrap();
    assert_eq!(partial.duration_ms, 5.0);
    assert_eq!(partial.dx, 0.01);
}
