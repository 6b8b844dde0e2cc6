use proptest::prelude::*;

use oft_core::io;
use oft_core::refine::OutputState;
use oft_core::{DepthMap, FlowField, Image, Intrinsics, RigidMotion};

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

prop_compose! {
    fn image()(w in 1usize..12, h in 1usize..12, channels in prop::sample::select(vec![1usize, 3]), maxval in 1u16..=65535)
        (samples in prop::collection::vec(0..=maxval, w * h * channels), w in Just(w), h in Just(h), channels in Just(channels), maxval in Just(maxval))
        -> (Image, u16)
    {
        let data = samples.iter().map(|&s| s as f64 / maxval as f64).collect();
        (Image::new(w, h, channels, data).unwrap(), maxval)
    }
}

prop_compose! {
    fn flow()(w in 1usize..10, h in 1usize..10)
        (data in prop::collection::vec(-1e6f32..1e6, 2 * w * h), w in Just(w), h in Just(h)) -> FlowField
    {
        FlowField::new(w, h, data.into_iter().map(f64::from).collect()).unwrap()
    }
}

prop_compose! {
    fn depth()(w in 1usize..10, h in 1usize..10)
        (data in prop::collection::vec(1e-4f32..1e5, w * h), w in Just(w), h in Just(h)) -> DepthMap
    {
        DepthMap::new(w, h, data.into_iter().map(f64::from).collect()).unwrap()
    }
}

proptest! {
    #[test]
    fn pnm_round_trip_is_bit_exact((img, maxval) in image()) {
        let back = io::decode_pnm(&io::encode_pnm(&img, maxval).unwrap()).unwrap();
        prop_assert_eq!((back.width(), back.height(), back.channels()), (img.width(), img.height(), img.channels()));
        prop_assert_eq!(bits(back.data()), bits(img.data()));
    }

    #[test]
    fn flo_round_trip_is_bit_exact(f in flow()) {
        let back = io::decode_flo(&io::encode_flo(&f)).unwrap();
        prop_assert_eq!(bits(back.data()), bits(f.data()));
    }

    #[test]
    fn pfm_round_trip_is_bit_exact(d in depth()) {
        let back = io::decode_pfm(&io::encode_pfm(&d), true).unwrap();
        prop_assert_eq!((back.width(), back.height()), (d.width(), d.height()));
        prop_assert_eq!(bits(back.data()), bits(d.data()));
    }

    #[test]
    fn pose_text_round_trip(e in prop::array::uniform3(-3.0f64..3.0), t in prop::array::uniform3(-1e3f64..1e3)) {
        let m = RigidMotion::new(e, t);
        prop_assert_eq!(io::parse_pose(&io::format_pose(&m)).unwrap(), m);
    }

    #[test]
    fn truncated_files_are_rejected(f in flow(), cut in 1usize..8) {
        let bytes = io::encode_flo(&f);
        prop_assert!(io::decode_flo(&bytes[..bytes.len() - cut]).is_err());
        let d = DepthMap::constant(f.width(), f.height(), 1.5);
        let bytes = io::encode_pfm(&d);
        prop_assert!(io::decode_pfm(&bytes[..bytes.len() - cut], false).is_err());
    }
}

fn state(w: usize, h: usize) -> OutputState {
    OutputState {
        depth: DepthMap::from_fn(w, h, |x, y| 1.0 + 0.125 * x as f64 + 0.5 * y as f64),
        motion: RigidMotion::new([0.01, -0.2, 1.0 / 3.0], [0.1, 0.2, -0.7]),
        intrinsics: Intrinsics::new(100.0 / 3.0, 31.25, w, h).unwrap(),
        flow_fwd: FlowField::from_fn(w, h, |x, y| [0.5 * x as f64, -0.25 * y as f64]),
        flow_bwd: FlowField::from_fn(w, h, |x, y| [-0.5 * x as f64, 0.25 * y as f64]),
    }
}

#[test]
fn state_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = state(7, 5);
    let out = dir.path().join("state");
    io::write_state(&out, &s).unwrap();
    assert_eq!(io::read_state(&out).unwrap(), s);
    // overwriting an existing directory replaces every file
    let mut t = s.clone();
    t.motion.translation[0] = 0.5;
    io::write_state(&out, &t).unwrap();
    assert_eq!(io::read_state(&out).unwrap(), t);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers, vec![std::ffi::OsString::from("state")]);
}

#[test]
fn mismatched_state_sizes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    io::write_state(dir.path(), &state(7, 5)).unwrap();
    std::fs::write(dir.path().join(io::FLOW_FWD_FILE), io::encode_flo(&FlowField::zeros(6, 5))).unwrap();
    assert!(io::read_state(dir.path()).is_err());
}

#[test]
fn file_helpers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = Image::from_fn(5, 3, |x, y| ((x + 2 * y) % 4) as f64 / 4.0);
    let p = dir.path().join("a.pgm");
    io::write_image(&p, &img, 4).unwrap();
    assert_eq!(io::read_image(&p).unwrap(), img);
    let p = dir.path().join("a.pfm");
    let d = DepthMap::from_fn(4, 3, |x, y| 0.5 + x as f64 * 0.25 + y as f64);
    io::write_depth(&p, &d).unwrap();
    assert_eq!(io::read_depth(&p, true).unwrap(), d);
    assert!(io::read_depth(&dir.path().join("missing.pfm"), true).is_err());
}
