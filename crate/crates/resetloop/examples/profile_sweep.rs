//! Scratch profiling harness for the boundary-sweep hot path.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use resetloop::linsys::expm;
use resetloop::multireset::{composite_kernel_tf, delta_profile, sweep, theta_s};
use resetloop::presets;

fn time<F: FnMut()>(label: &str, reps: usize, mut f: F) {
    let start = Instant::now();
    for _ in 0..reps {
        f();
    }
    let total = start.elapsed().as_secs_f64();
    println!("{label}: {:.2} us per call", 1e6 * total / reps as f64);
}

fn main() {
    let topology = presets::case(1);
    let omega = 2.0 * PI * 20.0;
    let _ = sweep(&topology, 1.0, 50.0, 1.0).unwrap();

    time("sweep 50 pts", 20, || {
        let _ = sweep(&topology, 1.0, 50.0, 1.0).unwrap();
    });
    time("delta_profile 400 pts (full)", 200, || {
        let _ = delta_profile(&topology, omega, 400).unwrap();
    });
    time("composite_kernel_tf", 200, || {
        let _ = composite_kernel_tf(&topology).unwrap();
    });
    time("theta_s", 2000, || {
        let _ = theta_s(&topology, omega).unwrap();
    });

    // Matrix exponential at the representative kernel size and stiffness.
    for n in [5usize, 7, 9] {
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j {
                1.0
            } else if i == n - 1 {
                -(1e4_f64).powf((j + 1) as f64 / n as f64)
            } else {
                0.0
            }
        });
        let dt = 4.0e-5;
        time(&format!("expm {n}x{n} * dt"), 2000, || {
            let _ = expm(&(&a * dt)).unwrap();
        });
    }
}
