use crate::config::AcConfig;

/// One chain state: backoff stage `j`, backoff counter (or, when negative,
/// the negated number of exchanges already made in the current TXOP) `k`,
/// and MAC queue length `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub stage: u32,
    pub counter: i32,
    pub queue: u32,
}

impl State {
    pub const fn new(stage: u32, counter: i32, queue: u32) -> Self {
        Self { stage, counter, queue }
    }
}

/// Bijection between the admissible states of one access category and dense
/// row indices, ordered by queue length, then stage, then counter.
///
/// A state is admissible when `l = 0` implies `j = 0` (postbackoff) and
/// `k < 0` implies `j = 0` (TXOP continuation).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    windows: Vec<u32>,
    txop_exchanges: u32,
    queue_size: u32,
    /// `offsets[l][j]`: index of the lowest admissible counter of `(j, ., l)`.
    offsets: Vec<Vec<usize>>,
    states: Vec<State>,
}

impl StateSpace {
    pub fn new(ac: &AcConfig, txop_exchanges: u32) -> Self {
        let windows = (0..ac.retry_limit).map(|j| ac.window(j)).collect();
        Self::from_windows(windows, txop_exchanges, ac.queue_size)
    }

    pub fn from_windows(windows: Vec<u32>, txop_exchanges: u32, queue_size: u32) -> Self {
        assert!(!windows.is_empty() && txop_exchanges >= 1 && queue_size >= 1);
        let n = txop_exchanges as i32;
        let mut offsets = Vec::with_capacity(queue_size as usize + 1);
        let mut states = Vec::new();
        for l in 0..=queue_size {
            let mut row = Vec::with_capacity(windows.len());
            for (j, &w) in windows.iter().enumerate() {
                row.push(states.len());
                if l == 0 && j > 0 {
                    continue;
                }
                let low = if j == 0 { -n } else { 0 };
                states.extend((low..=w as i32).map(|k| State::new(j as u32, k, l)));
            }
            offsets.push(row);
        }
        Self {
            windows,
            txop_exchanges,
            queue_size,
            offsets,
            states,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn stages(&self) -> u32 {
        self.windows.len() as u32
    }

    pub fn window(&self, stage: u32) -> u32 {
        self.windows[stage as usize]
    }

    pub fn txop_exchanges(&self) -> u32 {
        self.txop_exchanges
    }

    pub fn queue_size(&self) -> u32 {
        self.queue_size
    }

    pub fn state(&self, index: usize) -> State {
        self.states[index]
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn index(&self, stage: u32, counter: i32, queue: u32) -> Option<usize> {
        if queue > self.queue_size || stage >= self.stages() {
            return None;
        }
        if stage > 0 && (queue == 0 || counter < 0) {
            return None;
        }
        let n = self.txop_exchanges as i32;
        let w = self.windows[stage as usize] as i32;
        if counter > w || counter < -n {
            return None;
        }
        let low = if stage == 0 { -n } else { 0 };
        Some(self.offsets[queue as usize][stage as usize] + (counter - low) as usize)
    }

    /// Index of a state known to be admissible.
    pub(crate) fn at(&self, stage: u32, counter: i32, queue: u32) -> usize {
        self.index(stage, counter, queue)
            .unwrap_or_else(|| panic!("inadmissible state ({stage}, {counter}, {queue})"))
    }
}
