use super::{SensorFrame, NUM_CHANNELS};

/// Streaming per-channel median filter of odd width M.
///
/// Until M samples have been seen, the window is padded by replicating the
/// first sample, so the output is defined from the very first frame. The
/// group delay is (M−1)/2 samples.
#[derive(Debug, Clone)]
pub struct MedianFilter {
    width: usize,
    /// Per-channel circular windows, `width` values each.
    windows: Vec<[f64; NUM_CHANNELS]>,
    head: usize,
    primed: bool,
    scratch: Vec<f64>,
}

impl MedianFilter {
    pub fn new(width: usize) -> Self {
        assert!(width % 2 == 1, "median width must be odd");
        Self {
            width,
            windows: vec![[0.0; NUM_CHANNELS]; width],
            head: 0,
            primed: false,
            scratch: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn reset(&mut self) {
        self.primed = false;
        self.head = 0;
    }

    /// Push one frame and return the filtered frame with the same timestamp.
    pub fn push(&mut self, frame: &SensorFrame) -> SensorFrame {
        if !self.primed {
            self.windows.fill(frame.channels);
            self.primed = true;
        } else {
            self.windows[self.head] = frame.channels;
        }
        self.head = (self.head + 1) % self.width;

        let mid = self.width / 2;
        let mut out = [0.0; NUM_CHANNELS];
        for (ch, o) in out.iter_mut().enumerate() {
            for (s, w) in self.scratch.iter_mut().zip(&self.windows) {
                *s = w[ch];
            }
            let (_, m, _) = self.scratch.select_nth_unstable_by(mid, f64::total_cmp);
            *o = *m;
        }
        SensorFrame {
            t: frame.t,
            channels: out,
        }
    }
}
