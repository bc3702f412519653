use serde::{Deserialize, Serialize};

/// Finger-surface contact regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactState {
    Stuck,
    PartialSlip,
    FullSlip,
}

impl ContactState {
    /// Trace code: 0 stuck, 1 partial slip, 2 full slip.
    pub fn code(self) -> u8 {
        match self {
            ContactState::Stuck => 0,
            ContactState::PartialSlip => 1,
            ContactState::FullSlip => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ContactState::Stuck),
            1 => Some(ContactState::PartialSlip),
            2 => Some(ContactState::FullSlip),
            _ => None,
        }
    }
}

/// Swipe direction: `Right` is positive velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn from_sign(x: f64) -> Self {
        if x < 0.0 {
            Direction::Left
        } else {
            Direction::Right
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Left => -1.0,
            Direction::Right => 1.0,
        }
    }
}
