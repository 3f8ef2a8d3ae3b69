use crate::event::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameMode {
    /// Each event adds 1.
    #[default]
    Count,
    /// Each event adds its polarity.
    Signed,
}

/// Fixed-window accumulation of a stream into `H × W` grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameVideo {
    pub window: i64,
    pub height: usize,
    pub width: usize,
    /// Row-major `height × width` grids.
    pub frames: Vec<Vec<i64>>,
}

impl FrameVideo {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total(&self) -> i64 {
        self.frames.iter().flatten().sum()
    }
}

/// Frame `k` collects events with `t ∈ [t_first + k·w, t_first + (k+1)·w)`.
///
/// The frame count is `⌊duration / w⌋ + 1` so the last event always has a
/// frame; this equals `⌈duration / w⌉` unless the duration is an exact
/// multiple of the window.
pub fn reconstruct_frames(stream: &EventStream, window: i64, mode: FrameMode) -> FrameVideo {
    assert!(window >= 1, "window must be at least 1 µs");
    let g = stream.geometry();
    let (height, width) = (g.height as usize, g.width as usize);
    let mut video = FrameVideo {
        window,
        height,
        width,
        frames: Vec::new(),
    };
    let Some(first) = stream.events().first() else {
        return video;
    };
    let n_frames = (stream.duration() / window) as usize + 1;
    video.frames = vec![vec![0; height * width]; n_frames];
    for e in stream.events() {
        let k = ((e.t - first.t) / window) as usize;
        let v = match mode {
            FrameMode::Count => 1,
            FrameMode::Signed => e.p.value() as i64,
        };
        video.frames[k][e.y as usize * width + e.x as usize] += v;
    }
    video
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, Polarity, SensorGeometry};

    fn stream(ts: &[i64]) -> EventStream {
        let events = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| Event::new((i % 4) as u16, (i % 3) as u16, t, if i % 2 == 0 { Polarity::Pos } else { Polarity::Neg }))
            .collect();
        EventStream::new(SensorGeometry::new(4, 3).unwrap(), events, None).unwrap()
    }

    #[test]
    fn frame_counts() {
        assert_eq!(reconstruct_frames(&stream(&[0, 500, 999]), 1000, FrameMode::Count).len(), 1);
        assert_eq!(reconstruct_frames(&stream(&[10, 1200, 2510]), 1000, FrameMode::Count).len(), 3);
        assert_eq!(reconstruct_frames(&stream(&[]), 1000, FrameMode::Count).len(), 0);
        assert_eq!(reconstruct_frames(&stream(&[5]), 1000, FrameMode::Count).len(), 1);
        // Exact multiple: the last event opens a third frame.
        assert_eq!(reconstruct_frames(&stream(&[0, 2000]), 1000, FrameMode::Count).len(), 3);
    }

    #[test]
    fn count_conservation_and_signed() {
        let s = stream(&[0, 100, 1500, 1600, 1700, 4000]);
        let v = reconstruct_frames(&s, 1000, FrameMode::Count);
        assert_eq!(v.total(), 6);
        assert_eq!(v.frames[1].iter().sum::<i64>(), 3);
        let signed = reconstruct_frames(&s, 1000, FrameMode::Signed);
        assert_eq!(signed.total(), 0);
    }
}
