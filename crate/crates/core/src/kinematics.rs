//! Planar differential-drive kinematics, generic over the float type.

use num_traits::{Float, FloatConst};

/// Planar pose: position in meters, heading in radians wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Float + FloatConst> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Pose2 { x, y, theta: wrap_angle(theta) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Below this yaw rate the motion is integrated as a straight line.
pub fn straight_line_threshold<T: Float>() -> T {
    T::from(1e-9).unwrap()
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle<T: Float + FloatConst>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = a - two_pi * ((a + T::PI()) / two_pi).floor();
    if w <= -T::PI() {
        w = w + two_pi;
    }
    if w > T::PI() {
        w = w - two_pi;
    }
    w
}

/// Advances `pose` along the exact constant-twist arc of forward speed `v`
/// and yaw rate `omega` for `dt` seconds.
pub fn integrate_arc<T: Float + FloatConst>(pose: Pose2<T>, v: T, omega: T, dt: T) -> Pose2<T> {
    let Pose2 { x, y, theta } = pose;
    if omega.abs() < straight_line_threshold() {
        return Pose2 {
            x: x + v * theta.cos() * dt,
            y: y + v * theta.sin() * dt,
            theta: wrap_angle(theta),
        };
    }
    let sweep = omega * dt;
    let two = T::one() + T::one();
    let half = sweep / two;
    // sin(t+s)-sin(t) and cos(t)-cos(t+s) in product form, which stays
    // accurate when the sweep is tiny.
    let chord = two * half.sin() * v / omega;
    let mid = theta + half;
    Pose2 {
        x: x + chord * mid.cos(),
        y: y + chord * mid.sin(),
        theta: wrap_angle(theta + sweep),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn straight_line() {
        let p = integrate_arc(Pose2::new(0.0, 0.0, 0.0), 1.0, 0.0, 1.0);
        assert_eq!(p, Pose2 { x: 1.0, y: 0.0, theta: 0.0 });
    }

    #[test]
    fn quarter_turn_arc() {
        let p = integrate_arc(Pose2::new(0.0, 0.0, 0.0), 1.0, FRAC_PI_2, 1.0);
        let r = 2.0 / PI;
        assert!((p.x - r).abs() < 1e-12);
        assert!((p.y - r).abs() < 1e-12);
        assert!((p.theta - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn pure_rotation_wraps_to_pi() {
        let p = integrate_arc(Pose2::new(0.0, 0.0, 0.0), 0.0, 1.0, PI);
        assert_eq!((p.x, p.y), (0.0, 0.0));
        assert!((p.theta - PI).abs() < 1e-12);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-FRAC_PI_2) + FRAC_PI_2).abs() < 1e-15);
        for i in -100..100 {
            let w = wrap_angle(i as f64 * 0.37);
            assert!(w > -PI && w <= PI);
        }
    }

    #[test]
    fn single_precision_instantiation() {
        let p = integrate_arc(Pose2::<f32>::new(0.0, 0.0, 0.0), 1.0, std::f32::consts::FRAC_PI_2, 1.0);
        assert!((p.x - 2.0 / std::f32::consts::PI).abs() < 1e-6);
    }
}
