#![no_main]

use dynamix_core::io::parse_trajectory_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((names, traj)) = parse_trajectory_csv(data, 0.01) {
        assert_eq!(names.len(), traj.dim());
        assert!(traj.data.iter().all(|v| v.is_finite()));
    }
});
