use rand::rngs::StdRng;
use rand::SeedableRng;
use rosdeck_core::msg::{
    deserialize_message, schema, serialize_message, supported_types, Log, OccupancyGrid, Odometry, Quaternion,
    RosMessage, Twist,
};
use rosdeck_core::testkit::random_message;

#[test]
fn thousand_random_instances_per_type() {
    let mut rng = StdRng::seed_from_u64(7);
    for name in supported_types() {
        let s = schema(name).unwrap();
        for _ in 0..1000 {
            let v = random_message(s.spec, &mut rng);
            let bytes = serialize_message(&v, s).unwrap();
            let back = deserialize_message(&bytes, s).unwrap();
            assert_eq!(back, v, "{name}");
            assert_eq!(serialize_message(&back, s).unwrap(), bytes, "{name}");
        }
    }
}

#[test]
fn typed_messages_survive_the_value_layer() {
    let mut rng = StdRng::seed_from_u64(11);
    fn check<M: RosMessage + PartialEq + std::fmt::Debug>(rng: &mut StdRng) {
        for _ in 0..50 {
            let v = random_message(M::schema().spec, rng);
            let m = M::from_value(&v).unwrap();
            assert_eq!(m.to_value(), v);
            assert_eq!(M::decode(&m.encode().unwrap()).unwrap(), m);
        }
    }
    check::<Twist>(&mut rng);
    check::<Odometry>(&mut rng);
    check::<OccupancyGrid>(&mut rng);
    check::<Log>(&mut rng);
}

#[test]
fn yaw_quaternion_round_trip() {
    for k in -8..=8 {
        let yaw = k as f64 * 0.39;
        let q = Quaternion::from_yaw(yaw);
        assert!((q.z - (yaw / 2.0).sin()).abs() < 1e-15);
        assert!((q.w - (yaw / 2.0).cos()).abs() < 1e-15);
        assert!((rosdeck_core::wrap_angle(q.yaw() - yaw)).abs() < 1e-12);
    }
}
