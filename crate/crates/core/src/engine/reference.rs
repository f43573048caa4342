use crate::model::{Drive, OscillatorParams, QuadratureState, RunMeta, Sample, TrajectoryRecord};

/// Step of the reference integrator, in units of 1/Ω.
pub const REFERENCE_DT: f64 = 1e-5;

/// Samples are kept every this many reference steps.
pub const REFERENCE_STRIDE: usize = 100;

/// Noise-free classical RK4 on the continuous-time equations at
/// [`REFERENCE_DT`]. Ground truth for the other integrators and the
/// closed forms.
pub fn reference_integrate(
    ic: QuadratureState,
    drive: &Drive,
    params: &OscillatorParams,
    t_end: f64,
) -> TrajectoryRecord {
    reference_integrate_with(ic, drive, params, t_end, REFERENCE_DT, REFERENCE_STRIDE)
}

pub fn reference_integrate_with(
    ic: QuadratureState,
    drive: &Drive,
    params: &OscillatorParams,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> TrajectoryRecord {
    assert!(dt > 0.0 && stride >= 1);
    let w = params.omega;
    let g = params.gamma;
    let two_gm = 2.0 * drive.gamma_mod;
    let phi = drive.phi;
    let rhs = |t: f64, q: f64, p: f64| {
        let k = two_gm * (2.0 * w * t + phi).cos();
        (w * p, -g * p - w * q + k * q)
    };

    let steps = (t_end / dt).round() as u64;
    let mut samples = Vec::with_capacity((steps / stride as u64 + 1) as usize);
    let (mut q, mut p) = (ic.q, ic.p);
    samples.push(Sample::new(0.0, ic, phi));
    let h = dt;
    for n in 0..steps {
        let t = n as f64 * dt;
        let k1 = rhs(t, q, p);
        let k2 = rhs(t + 0.5 * h, q + 0.5 * h * k1.0, p + 0.5 * h * k1.1);
        let k3 = rhs(t + 0.5 * h, q + 0.5 * h * k2.0, p + 0.5 * h * k2.1);
        let k4 = rhs(t + h, q + h * k3.0, p + h * k3.1);
        q += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if (n + 1) % stride as u64 == 0 {
            samples.push(Sample::new((n + 1) as f64 * dt, QuadratureState::new(q, p), phi));
        }
    }
    TrajectoryRecord {
        samples,
        dt,
        seed: 0,
        meta: RunMeta {
            params: *params,
            drive: *drive,
            scheme: "rk4_reference",
            noise: false,
            t_end: steps as f64 * dt,
            sample_stride: stride,
        },
    }
}
