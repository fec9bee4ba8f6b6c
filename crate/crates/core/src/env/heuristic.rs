use super::Action;

/// Scripted proportional controller for the lander observation.
///
/// Steers the tilt towards `0.5 x + vx` (clamped to 0.4 rad) to drift back over
/// the pad and holds a descent profile of height `0.55 |x|`. Once a leg touches
/// down only the vertical speed is controlled.
pub fn heuristic_action(obs: &[f64]) -> Action {
    let angle_targ = (obs[0] * 0.5 + obs[2]).clamp(-0.4, 0.4);
    let hover_targ = 0.55 * obs[0].abs();
    let mut angle_todo = (angle_targ - obs[4]) * 0.5 - obs[5];
    let mut hover_todo = (hover_targ - obs[1]) * 0.5 - obs[3] * 0.5;
    if obs[6] > 0.0 || obs[7] > 0.0 {
        angle_todo = 0.0;
        hover_todo = -obs[3] * 0.5;
    }
    if hover_todo > angle_todo.abs() && hover_todo > 0.05 {
        Action::Main
    } else if angle_todo < -0.05 {
        Action::Right
    } else if angle_todo > 0.05 {
        Action::Left
    } else {
        Action::Noop
    }
}
