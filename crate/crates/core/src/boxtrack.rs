//! Face box selection across video frames by max-IOU propagation from
//! verified anchor frames.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, serialized as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let all_finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if !all_finite || x1 >= x2 || y1 >= y2 {
            return Err(Error::Invalid(format!(
                "invalid box [{x1}, {y1}, {x2}, {y2}]"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackInput {
    pub frames: usize,
    pub detections: Vec<Vec<BBox>>,
    /// Verified box per anchor frame. JSON keys are frame indices as strings.
    #[serde(with = "anchor_keys")]
    pub anchors: BTreeMap<usize, BBox>,
}

mod anchor_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::BBox;

    pub fn serialize<S: Serializer>(map: &BTreeMap<usize, BBox>, s: S) -> Result<S::Ok, S::Error> {
        map.iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect::<BTreeMap<String, BBox>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, BBox>, D::Error> {
        BTreeMap::<String, BBox>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("anchor key '{k}' is not a frame index")))
            })
            .collect()
    }
}

impl TrackInput {
    pub fn validate(&self) -> Result<()> {
        if self.detections.len() != self.frames {
            return Err(Error::Invalid(format!(
                "{} detection lists for {} frames",
                self.detections.len(),
                self.frames
            )));
        }
        if self.anchors.is_empty() {
            return Err(Error::Invalid("at least one anchor frame is required".into()));
        }
        if let Some(&f) = self.anchors.keys().find(|&&f| f >= self.frames) {
            return Err(Error::Invalid(format!(
                "anchor frame {f} outside 0..{}",
                self.frames
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameFlag {
    Anchored,
    Matched,
    /// No detections in the frame; the previous box was kept.
    Carried,
    /// Every detection was disjoint from the previous box; the previous box was kept.
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track: Vec<BBox>,
    pub flags: Vec<FrameFlag>,
    /// Index of the chosen detection per frame, if one was chosen.
    pub selected: Vec<Option<usize>>,
}

/// Index of the anchor nearest to `frame`; ties go to the earlier anchor.
fn nearest_anchor(anchors: &[usize], frame: usize) -> usize {
    let mut best = 0;
    for (i, &a) in anchors.iter().enumerate() {
        if a.abs_diff(frame) < anchors[best].abs_diff(frame) {
            best = i;
        }
    }
    best
}

/// Lowest-index detection with the highest IOU against `prev`, or `None`
/// when every IOU is zero.
fn best_match(prev: &BBox, detections: &[BBox]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in detections.iter().enumerate() {
        let score = iou(prev, d);
        if score > 0.0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

/// Propagates every anchor box forward and backward through the frames it is
/// nearest to, picking the max-IOU detection against the previously selected
/// box at each step.
pub fn propagate(input: &TrackInput) -> Result<Track> {
    input.validate()?;
    let anchors: Vec<usize> = input.anchors.keys().copied().collect();
    let owner: Vec<usize> = (0..input.frames)
        .map(|f| nearest_anchor(&anchors, f))
        .collect();

    let first = input.anchors[&anchors[0]];
    let mut track = vec![first; input.frames];
    let mut flags = vec![FrameFlag::Carried; input.frames];
    let mut selected = vec![None; input.frames];

    let mut step = |frame: usize, prev: BBox| -> BBox {
        let dets = &input.detections[frame];
        let (chosen, flag) = if dets.is_empty() {
            (prev, FrameFlag::Carried)
        } else {
            match best_match(&prev, dets) {
                Some(i) => {
                    selected[frame] = Some(i);
                    (dets[i], FrameFlag::Matched)
                }
                None => (prev, FrameFlag::Ambiguous),
            }
        };
        track[frame] = chosen;
        flags[frame] = flag;
        chosen
    };

    for (idx, &a) in anchors.iter().enumerate() {
        let anchor_box = input.anchors[&a];
        (a + 1..input.frames)
            .take_while(|&f| owner[f] == idx)
            .fold(anchor_box, |prev, f| step(f, prev));
        (0..a)
            .rev()
            .take_while(|&f| owner[f] == idx)
            .fold(anchor_box, |prev, f| step(f, prev));
    }
    for &a in &anchors {
        track[a] = input.anchors[&a];
        flags[a] = FrameFlag::Anchored;
        selected[a] = None;
    }
    Ok(Track {
        track,
        flags,
        selected,
    })
}
