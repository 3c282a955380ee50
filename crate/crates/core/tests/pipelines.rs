use msflow_core::calibrate::{measure_confidence, SpeedSweep};
use msflow_core::lkflow::{lk_flow, mean_object_speed};
use msflow_core::parallel::{parallel_flow, parallel_object_speed, ParallelParams};
use msflow_core::serial::{serial_flow, serial_object_speed};
use msflow_core::synth::generate_sequence;
use msflow_core::{
    ConfidenceModel, FlowField, LkParams, PixelMask, Pyramid, Sequential, SerialParams, SynthSpec,
};

fn serial(levels: usize) -> SerialParams {
    SerialParams {
        levels,
        ..SerialParams::default()
    }
}

#[test]
fn single_level_serial_is_plain_lk() {
    let spec = SynthSpec::default().with_velocity(0.8, -0.4).with_seed(2);
    let seq = generate_sequence(&spec).unwrap();
    let (a, b) = seq.pair().unwrap();
    assert_eq!(
        serial_flow(a, b, &serial(1)).unwrap(),
        lk_flow(a, b, &LkParams::default()).unwrap()
    );
}

#[test]
fn serial_recovers_fast_diagonal_motion() {
    let spec = SynthSpec::default().with_velocity(10.0, 10.0);
    let seq = generate_sequence(&spec).unwrap();
    let (u, v) = serial_object_speed(&seq, &spec.object_mask(0), &serial(3))
        .unwrap()
        .unwrap();
    let truth = 10.0 * 2f64.sqrt();
    let speed = u.hypot(v);
    assert!((speed - truth).abs() < 0.15 * truth, "speed {speed}");
}

#[test]
fn serial_two_levels_horizontal() {
    let spec = SynthSpec::default().with_velocity(2.0, 0.0).with_seed(5);
    let seq = generate_sequence(&spec).unwrap();
    let (u, v) = serial_object_speed(&seq, &spec.object_mask(0), &serial(2))
        .unwrap()
        .unwrap();
    assert!((u - 2.0).abs() < 0.3 && v.abs() < 0.3, "({u}, {v})");
}

#[test]
fn static_scene_gives_zero_flow() {
    let spec = SynthSpec::default().with_noise(0.0);
    let seq = generate_sequence(&spec).unwrap();
    let (a, b) = seq.pair().unwrap();
    let f = serial_flow(a, b, &serial(3)).unwrap();
    for y in 0..f.height() {
        for x in 0..f.width() {
            if let Some((u, v)) = f.get(x, y) {
                assert_eq!((u, v), (0.0, 0.0));
            }
        }
    }
    let m = ConfidenceModel {
        mu0: 0.0,
        sigma0: 1.0,
        scale: 2.0,
        levels: 3,
    };
    let p = parallel_flow(a, b, &ParallelParams::new(m)).unwrap();
    // zero speed carries no weight, so nothing is fused
    assert_eq!(p.valid_count(), 0);
    let mask = spec.object_mask(0);
    assert_eq!(
        parallel_object_speed(&seq, &mask, &ParallelParams::new(m)).unwrap(),
        None
    );
}

#[test]
fn flat_region_has_no_estimate() {
    let spec = SynthSpec::default().with_noise(0.0).with_velocity(1.0, 0.0);
    let seq = generate_sequence(&spec).unwrap();
    // a patch of the uniform background
    let mask = PixelMask::from_fn(128, 128, |x, y| x < 10 && y < 10);
    assert_eq!(serial_object_speed(&seq, &mask, &serial(3)).unwrap(), None);
    assert_eq!(
        mean_object_speed(&FlowField::invalid(128, 128), &mask).unwrap(),
        None
    );
}

#[test]
fn pyramid_level_sizes() {
    let f = msflow_core::Frame::filled(64, 64, 0.3);
    let p = Pyramid::build(&f, 3, 2.0, 7).unwrap();
    let dims: Vec<_> = p.levels().iter().map(|l| l.dims()).collect();
    assert_eq!(dims, [(64, 64), (32, 32), (16, 16)]);
    let err = Pyramid::build(&f, 5, 2.0, 7).unwrap_err().to_string();
    assert!(err.contains("level 4"), "{err}");
}

#[test]
fn coarse_level_is_less_confident_at_slow_speed() {
    let sweep = SpeedSweep {
        speeds: vec![1.0],
        ..SpeedSweep::default()
    };
    let lk = LkParams::default();
    let k0 = measure_confidence(&sweep, 0, 2.0, &lk, &Sequential).unwrap()[0].k_mean;
    let k2 = measure_confidence(&sweep, 2, 2.0, &lk, &Sequential).unwrap()[0].k_mean;
    assert!(k2 < k0, "k2 {k2} k0 {k0}");
}
