//! A one-dimensional lander over integer terrain.
//!
//! Each step the policy picks thrust or coast. Coasting changes velocity by
//! `-gravity`. Thrust burns one unit of fuel and succeeds with a probability
//! looked up by current speed: success adds `thrust_full`, a sputtering
//! engine adds only `thrust_partial`, before gravity applies. The position
//! then moves by the new velocity. The episode ends when the lander reaches
//! the terrain (a win iff `|vy| <= safe_v` at contact) or after `max_steps`
//! (a loss). Without fuel the lander can only coast.

use serde::{Deserialize, Serialize};

use super::{GameState, ModelError};
use crate::rng::{unit_f64, DrawSource, SplitMix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyEnv {
    pub terrain_max: i64,
    pub gravity: i64,
    pub thrust_full: i64,
    pub thrust_partial: i64,
    /// Success probability of a thrust, indexed by `min(|vy|, len - 1)`.
    pub thrust_success: Vec<f64>,
    pub safe_v: i64,
    pub max_steps: u32,
}

impl Default for ToyEnv {
    fn default() -> Self {
        Self {
            terrain_max: 10,
            gravity: 1,
            thrust_full: 2,
            thrust_partial: 1,
            thrust_success: vec![0.7],
            safe_v: 2,
            max_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Thrust,
    Coast,
}

/// Result of advancing one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Flying,
    Landed { win: bool },
}

impl ToyEnv {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Invalid(m.to_string()));
        if self.terrain_max < 0 || self.safe_v < 0 || self.gravity < 0 {
            return bad("terrain_max, safe_v and gravity must be nonnegative");
        }
        if self.thrust_success.is_empty() || self.thrust_success.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("thrust_success needs at least one probability in [0, 1]");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    pub fn thrust_success_prob(&self, vy: i64) -> f64 {
        let i = (vy.unsigned_abs() as usize).min(self.thrust_success.len() - 1);
        self.thrust_success[i]
    }

    pub fn landed(&self, s: &GameState) -> Option<bool> {
        (s.lander_x <= s.terrain).then_some(s.lander_vy.abs() <= self.safe_v)
    }

    /// Advances `s` by one step using the uniform draw `u` in `[0, 1)`.
    pub fn step(&self, policy: &Policy, s: &mut GameState, u: f64) -> Step {
        let action = if s.fuel > 0 { policy.act(s) } else { Action::Coast };
        let dv = match action {
            Action::Coast => -self.gravity,
            Action::Thrust => {
                s.fuel -= 1;
                let push =
                    if u < self.thrust_success_prob(s.lander_vy) { self.thrust_full } else { self.thrust_partial };
                push - self.gravity
            }
        };
        s.lander_vy += dv;
        s.lander_x += s.lander_vy;
        match self.landed(s) {
            Some(win) => Step::Landed { win },
            None => Step::Flying,
        }
    }

    /// Plays one episode drawing one uniform per step from `draw`.
    pub fn play_with(&self, policy: &Policy, start: &GameState, mut draw: impl FnMut() -> f64) -> i64 {
        let mut s = *start;
        if let Some(win) = self.landed(&s) {
            return i64::from(win);
        }
        for _ in 0..self.max_steps {
            if let Step::Landed { win } = self.step(policy, &mut s, draw()) {
                return i64::from(win);
            }
        }
        0
    }

    /// 1 for a safe landing, 0 otherwise. Deterministic in `(start, seed)`;
    /// the episode generator is private to this call.
    pub fn play(&self, policy: &Policy, start: &GameState, seed: u64) -> i64 {
        let mut rng = SplitMix64::new(seed);
        self.play_with(policy, start, || unit_f64(rng.next_u64()))
    }
}

/// Lookup table from discretised state to action. Velocity is clamped to
/// `[vy_min, vy_max]` and height above terrain to `[0, height_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub vy_min: i64,
    pub vy_max: i64,
    pub height_max: i64,
    /// One character per cell, `T` (thrust) or `C` (coast), indexed by
    /// `(vy - vy_min) * (height_max + 1) + height`.
    pub actions: String,
}

impl Policy {
    pub fn from_fn(vy_min: i64, vy_max: i64, height_max: i64, f: impl Fn(i64, i64) -> Action) -> Self {
        let mut actions = String::new();
        for vy in vy_min..=vy_max {
            for h in 0..=height_max {
                actions.push(match f(vy, h) {
                    Action::Thrust => 'T',
                    Action::Coast => 'C',
                });
            }
        }
        Self { vy_min, vy_max, height_max, actions }
    }

    /// Brakes whenever descending at `safe_v` or faster, regardless of height.
    pub fn cautious(safe_v: i64) -> Self {
        Self::from_fn(-12, 4, 24, |vy, _| if vy <= -safe_v { Action::Thrust } else { Action::Coast })
    }

    /// Brakes like [`Policy::cautious`] but only at even heights above the
    /// terrain, so shifting the terrain changes its behaviour.
    pub fn parity_sensitive(safe_v: i64) -> Self {
        Self::from_fn(-12, 4, 24, |vy, h| if vy <= -safe_v && h % 2 == 0 { Action::Thrust } else { Action::Coast })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vy_min > self.vy_max || self.height_max < 0 {
            return Err(ModelError::Invalid("empty policy table".into()));
        }
        let cells = (self.vy_max - self.vy_min + 1) * (self.height_max + 1);
        if self.actions.len() as i64 != cells || self.actions.chars().any(|c| c != 'T' && c != 'C') {
            return Err(ModelError::Invalid(format!("policy table needs {cells} `T`/`C` entries")));
        }
        Ok(())
    }

    pub fn act(&self, s: &GameState) -> Action {
        let vy = s.lander_vy.clamp(self.vy_min, self.vy_max) - self.vy_min;
        let h = (s.lander_x - s.terrain).clamp(0, self.height_max);
        let idx = (vy * (self.height_max + 1) + h) as usize;
        if self.actions.as_bytes()[idx] == b'T' {
            Action::Thrust
        } else {
            Action::Coast
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(terrain: i64, x: i64, vy: i64, fuel: i64) -> GameState {
        GameState { terrain, lander_x: x, lander_vy: vy, fuel }
    }

    #[test]
    fn already_down_and_still() {
        let env = ToyEnv::default();
        assert_eq!(env.play(&Policy::cautious(2), &st(3, 3, 0, 5), 7), 1);
    }

    #[test]
    fn no_fuel_fast_fall_crashes() {
        let env = ToyEnv::default();
        for seed in 0..20 {
            assert_eq!(env.play(&Policy::cautious(2), &st(0, 30, -8, 0), seed), 0);
        }
    }

    #[test]
    fn same_seed_same_outcome() {
        let env = ToyEnv::default();
        let p = Policy::parity_sensitive(2);
        let s = st(4, 14, -4, 6);
        let first = env.play(&p, &s, 99);
        assert!((0..1000).all(|_| env.play(&p, &s, 99) == first));
    }

    #[test]
    fn policy_table_json_round_trip() {
        let p = Policy::parity_sensitive(2);
        p.validate().unwrap();
        let back: Policy = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(p.act(&st(0, 4, -3, 1)), Action::Thrust);
        assert_eq!(p.act(&st(0, 5, -3, 1)), Action::Coast);
    }

    #[test]
    fn hovering_stays_in_band() {
        let env = ToyEnv::default();
        let p = Policy::cautious(2);
        let mut s = st(0, 40, -2, 100);
        for u in [0.9, 0.9, 0.1, 0.9, 0.1, 0.1, 0.9] {
            env.step(&p, &mut s, u);
            assert!(s.lander_vy >= -2, "{s:?}");
        }
    }
}
