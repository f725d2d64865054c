//! Independent closed forms and parameter generators shared by the
//! integration tests. Nothing here calls into the protocol code.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wteleport::{BellFamily, BellOutcome, ChannelParams, InputState, StateVector};

pub const TOL: f64 = 1e-12;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Random valid channel from three sorted uniform draws, normalized.
pub fn random_channel(rng: &mut impl Rng) -> ChannelParams {
    loop {
        let mut v: [f64; 3] = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        v.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return ChannelParams::new(v[0] / n, v[1] / n, v[2] / n).unwrap();
        }
    }
}

/// Random normalized complex input (α, β).
pub fn random_input(rng: &mut impl Rng) -> InputState {
    loop {
        let z: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return InputState::new(Complex64::new(z[0] / n, z[1] / n), Complex64::new(z[2] / n, z[3] / n)).unwrap();
        }
    }
}

/// Grid of valid (a, b, c) with b from 0 to 1/√2 and c from 0 up to its
/// largest admissible value. Contains c = 0, b = c and a = b rows.
pub fn channel_grid() -> Vec<ChannelParams> {
    let mut out = Vec::new();
    let bmax = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..=20 {
        let b = bmax * i as f64 / 20.0;
        let cmax = b.min((1.0 - 2.0 * b * b).max(0.0).sqrt());
        let steps = if i == 0 { 0 } else { 10 };
        for j in 0..=steps {
            let c = if steps == 0 {
                0.0
            } else {
                cmax * j as f64 / steps as f64
            };
            let a = (1.0 - b * b - c * c).max(0.0).sqrt().max(b);
            out.push(ChannelParams::new(a, b, c).unwrap());
        }
    }
    let t = 1.0 / 3f64.sqrt();
    out.push(ChannelParams::new(t, t, t).unwrap());
    out
}

/// Residual on (1,2,5) after projecting (3,4) onto a Bell state, unnormalized.
pub fn bell_residual(p: &ChannelParams, s: &InputState, bell: BellOutcome) -> StateVector {
    let (a, b, c) = (re(p.a()), re(p.b()), re(p.c()));
    let (al, be) = (s.alpha(), s.beta());
    let sg = re(bell.sign.factor());
    let h = re(std::f64::consts::FRAC_1_SQRT_2);
    let terms = match bell.family {
        BellFamily::Phi => [("001", sg * a * be * h), ("010", b * al * h), ("100", c * al * h)],
        BellFamily::Psi => [("000", sg * a * al * h), ("011", b * be * h), ("101", c * be * h)],
    };
    StateVector::from_terms(&["1", "2", "5"], &terms).unwrap()
}

/// Residual on (2,5) after Bob finds particle 1 in `bit`.
pub fn vn_residual(p: &ChannelParams, s: &InputState, bell: BellOutcome, bit: u8) -> StateVector {
    let (a, b, c) = (re(p.a()), re(p.b()), re(p.c()));
    let (al, be) = (s.alpha(), s.beta());
    let sg = re(bell.sign.factor());
    let h = re(std::f64::consts::FRAC_1_SQRT_2);
    let terms: Vec<(&str, Complex64)> = match (bell.family, bit) {
        (BellFamily::Phi, 0) => vec![("01", sg * a * be * h), ("10", b * al * h)],
        (BellFamily::Psi, 0) => vec![("00", sg * a * al * h), ("11", b * be * h)],
        (BellFamily::Phi, _) => vec![("00", c * al * h)],
        (BellFamily::Psi, _) => vec![("01", c * be * h)],
    };
    StateVector::from_terms(&["2", "5"], &terms).unwrap()
}

/// State on (2,5,A) after the ancilla and C-NOT.
pub fn after_cnot(p: &ChannelParams, s: &InputState, bell: BellOutcome) -> StateVector {
    let (a, b) = (re(p.a()), re(p.b()));
    let (al, be) = (s.alpha(), s.beta());
    let sg = re(bell.sign.factor());
    let h = re(std::f64::consts::FRAC_1_SQRT_2);
    let terms = match bell.family {
        BellFamily::Phi => [("011", sg * a * be * h), ("100", b * al * h)],
        BellFamily::Psi => [("000", sg * a * al * h), ("111", b * be * h)],
    };
    StateVector::from_terms(&["2", "5", "A"], &terms).unwrap()
}

/// Largest entrywise deviation after removing the global phase of `got`
/// relative to `want`.
pub fn phase_free_diff(got: &StateVector, want: &StateVector) -> f64 {
    let overlap = want.inner(got).unwrap();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        re(1.0)
    };
    got.max_abs_diff(&want.scaled(phase)).unwrap()
}

/// Runs the built binary with `args` and returns (code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, Vec<u8>, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_wteleport"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        out.stdout,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}
