use serde::{Deserialize, Serialize};

use crate::population::UserProfile;

/// Where the vehicle is during one hourly slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotState {
    /// Plugged in at home; may charge.
    AtHome,
    /// Driving; draws commute energy, no grid exchange.
    Commuting,
    /// Plugged in at work; may sell.
    AtWork,
    /// Parked without a grid connection.
    Idle,
}

/// One working day's hour labels, anchored on the shift start.
///
/// `slots` holds the labels modulo 24 so a night shift shows up wrapped
/// around midnight; [`DaySchedule::duty`] gives the same block as offsets
/// from the departure day's midnight, which may fall before 0 or past 23.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DaySchedule {
    pub slots: [SlotState; 24],
    pub work_start: u32,
    pub work_hours: u32,
    pub commute_slots: u32,
}

impl DaySchedule {
    /// Offsets (hours from midnight of the shift's day) and labels of the
    /// outbound commute, the shift and the inbound commute, in time order.
    pub fn duty(&self) -> impl Iterator<Item = (i64, SlotState)> + '_ {
        let start = self.work_start as i64;
        let c = self.commute_slots as i64;
        let w = self.work_hours as i64;
        (start - c..start)
            .map(|h| (h, SlotState::Commuting))
            .chain((start..start + w).map(|h| (h, SlotState::AtWork)))
            .chain((start + w..start + w + c).map(|h| (h, SlotState::Commuting)))
    }

    /// Hour of day the vehicle is back home and starts charging.
    pub fn home_arrival_hour(&self) -> u32 {
        (self.work_start + self.work_hours + self.commute_slots) % 24
    }

    pub fn count(&self, state: SlotState) -> usize {
        self.slots.iter().filter(|&&s| s == state).count()
    }
}

pub fn build_schedule(profile: &UserProfile) -> DaySchedule {
    let mut schedule = DaySchedule {
        slots: [SlotState::AtHome; 24],
        work_start: profile.work_start_hour % 24,
        work_hours: profile.daily_work_hours().min(24),
        commute_slots: profile.commute_slots(),
    };
    let labels: Vec<(i64, SlotState)> = schedule.duty().take(24).collect();
    for (offset, state) in labels {
        schedule.slots[offset.rem_euclid(24) as usize] = state;
    }
    schedule
}
