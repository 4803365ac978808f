mod common;

use kanface_core::boxtrack::{iou, propagate, BBox, FrameFlag, TrackInput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn drifting_target_is_followed_through_decoys() {
    let (mut correct, mut total) = (0usize, 0usize);
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = common::drifting_scenario(&mut rng, 40, 3);
        let track = propagate(&scenario.input).unwrap();
        for (f, &truth) in scenario.truth.iter().enumerate() {
            total += 1;
            let hit = match track.selected[f] {
                Some(i) => i == truth,
                // anchor frames keep the verified box, which is the target
                None => track.flags[f] == FrameFlag::Anchored,
            };
            correct += usize::from(hit);
        }
    }
    let rate = correct as f64 / total as f64;
    assert!(rate >= 0.99, "selection rate {rate}");
}

fn mirrored(input: &TrackInput) -> TrackInput {
    let last = input.frames - 1;
    TrackInput {
        frames: input.frames,
        detections: input.detections.iter().rev().cloned().collect(),
        anchors: input.anchors.iter().map(|(&f, &b)| (last - f, b)).collect(),
    }
}

#[test]
fn reversing_time_mirrors_the_track() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let scenario = common::drifting_scenario(&mut rng, 25, 3);
        let forward = propagate(&scenario.input).unwrap();
        let backward = propagate(&mirrored(&scenario.input)).unwrap();
        let mut track = backward.track.clone();
        track.reverse();
        let mut flags = backward.flags.clone();
        flags.reverse();
        assert_eq!(forward.track, track, "seed {seed}");
        assert_eq!(forward.flags, flags, "seed {seed}");
    }
}

#[test]
fn anchor_frames_keep_their_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut scenario = common::drifting_scenario(&mut rng, 30, 3);
    let extra = BBox::new(1.0, 1.0, 5.0, 5.0).unwrap();
    scenario.input.anchors.insert(29, extra);
    let track = propagate(&scenario.input).unwrap();
    for (&f, &b) in &scenario.input.anchors {
        assert_eq!(track.track[f], b);
        assert_eq!(track.flags[f], FrameFlag::Anchored);
    }
    assert_eq!(propagate(&scenario.input).unwrap(), track);
}

#[test]
fn iou_fixtures() {
    let a = BBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
    let b = BBox::new(1.0, 0.0, 3.0, 2.0).unwrap();
    let far = BBox::new(10.0, 10.0, 12.0, 12.0).unwrap();
    assert_eq!(iou(&a, &a), 1.0);
    assert_eq!(iou(&a, &far), 0.0);
    assert_eq!(iou(&a, &b), 1.0 / 3.0);
    assert_eq!(iou(&b, &a), 1.0 / 3.0);
}

#[test]
fn json_input_round_trips() {
    let text = r#"{"frames":2,"detections":[[[0,0,2,2]],[]],"anchors":{"0":[0,0,2,2]}}"#;
    let input: TrackInput = serde_json::from_str(text).unwrap();
    let track = propagate(&input).unwrap();
    assert_eq!(track.flags, vec![FrameFlag::Anchored, FrameFlag::Carried]);
    let back: TrackInput = serde_json::from_str(&serde_json::to_string(&input).unwrap()).unwrap();
    assert_eq!(back, input);
}
