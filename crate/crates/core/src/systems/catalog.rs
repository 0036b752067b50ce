//! Benchmark ODE systems with literature parameter values.

use super::{Regime, SystemDef};

fn lorenz63(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (sigma, rho, beta) = (p[0], p[1], p[2]);
    out[0] = sigma * (x[1] - x[0]);
    out[1] = x[0] * (rho - x[2]) - x[1];
    out[2] = x[0] * x[1] - beta * x[2];
}

fn rossler(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (a, b, c) = (p[0], p[1], p[2]);
    out[0] = -x[1] - x[2];
    out[1] = x[0] + a * x[1];
    out[2] = b + x[2] * (x[0] - c);
}

fn selkov(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (a, b) = (p[0], p[1]);
    let x2y = x[0] * x[0] * x[1];
    out[0] = -x[0] + a * x[1] + x2y;
    out[1] = b - a * x[1] - x2y;
}

fn van_der_pol(x: &[f64], p: &[f64], out: &mut [f64]) {
    let mu = p[0];
    out[0] = x[1];
    out[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
}

fn finance(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (a, b, c) = (p[0], p[1], p[2]);
    out[0] = x[2] + (x[1] - a) * x[0];
    out[1] = 1.0 - b * x[1] - x[0] * x[0];
    out[2] = -x[0] - c * x[2];
}

fn genesio_tesi(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (a, b, c) = (p[0], p[1], p[2]);
    out[0] = x[1];
    out[1] = x[2];
    out[2] = -c * x[0] - b * x[1] - a * x[2] + x[0] * x[0];
}

fn chen(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (a, b, c) = (p[0], p[1], p[2]);
    out[0] = a * (x[1] - x[0]);
    out[1] = (c - a) * x[0] - x[0] * x[2] + c * x[1];
    out[2] = x[0] * x[1] - b * x[2];
}

fn thomas(x: &[f64], p: &[f64], out: &mut [f64]) {
    let b = p[0];
    out[0] = x[1].sin() - b * x[0];
    out[1] = x[2].sin() - b * x[1];
    out[2] = x[0].sin() - b * x[2];
}

fn halvorsen(x: &[f64], p: &[f64], out: &mut [f64]) {
    let a = p[0];
    out[0] = -a * x[0] - 4.0 * x[1] - 4.0 * x[2] - x[1] * x[1];
    out[1] = -a * x[1] - 4.0 * x[2] - 4.0 * x[0] - x[2] * x[2];
    out[2] = -a * x[2] - 4.0 * x[0] - 4.0 * x[1] - x[0] * x[0];
}

fn sprott_b(x: &[f64], _: &[f64], out: &mut [f64]) {
    out[0] = x[1] * x[2];
    out[1] = x[0] - x[1];
    out[2] = 1.0 - x[0] * x[1];
}

fn sprott_c(x: &[f64], _: &[f64], out: &mut [f64]) {
    out[0] = x[1] * x[2];
    out[1] = x[0] - x[1];
    out[2] = 1.0 - x[0] * x[0];
}

fn sprott_k(x: &[f64], _: &[f64], out: &mut [f64]) {
    out[0] = x[0] * x[1] - x[2];
    out[1] = x[0] - x[1];
    out[2] = x[0] + 0.3 * x[2];
}

fn sprott_e(x: &[f64], _: &[f64], out: &mut [f64]) {
    out[0] = x[1] * x[2];
    out[1] = x[0] * x[0] - x[1];
    out[2] = 1.0 - 4.0 * x[0];
}

fn sprott_f(x: &[f64], _: &[f64], out: &mut [f64]) {
    out[0] = x[1] + x[2];
    out[1] = -x[0] + 0.5 * x[1];
    out[2] = x[0] * x[0] - x[2];
}

fn sprott_g(x: &[f64], _: &[f64], out: &mut [f64]) {
    out[0] = 0.4 * x[0] + x[2];
    out[1] = x[0] * x[2] - x[1];
    out[2] = -x[0] + x[1];
}

fn sprott_m(x: &[f64], _: &[f64], out: &mut [f64]) {
    out[0] = -x[2];
    out[1] = -x[0] * x[0] - x[1];
    out[2] = 1.7 + 1.7 * x[0] + x[1];
}

struct Entry {
    name: &'static str,
    rhs: super::VectorField,
    params: &'static [(&'static str, f64)],
    dt: f64,
    ic_box: &'static [(f64, f64)],
    regime: Regime,
}

const ENTRIES: &[Entry] = &[
    Entry {
        name: "lorenz63",
        rhs: lorenz63,
        params: &[("sigma", 10.0), ("rho", 28.0), ("beta", 8.0 / 3.0)],
        dt: 0.02,
        ic_box: &[(-10.0, 10.0), (-10.0, 10.0), (10.0, 30.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "lorenz63_periodic",
        rhs: lorenz63,
        params: &[("sigma", 10.0), ("rho", 350.0), ("beta", 8.0 / 3.0)],
        dt: 0.004,
        ic_box: &[(-20.0, 20.0), (-20.0, 20.0), (300.0, 400.0)],
        regime: Regime::Cyclic,
    },
    Entry {
        name: "rossler",
        rhs: rossler,
        params: &[("a", 0.2), ("b", 0.2), ("c", 5.7)],
        dt: 0.1,
        ic_box: &[(-5.0, 5.0), (-5.0, 5.0), (0.0, 1.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "selkov",
        rhs: selkov,
        params: &[("a", 0.1), ("b", 0.5)],
        dt: 0.2,
        ic_box: &[(0.2, 1.0), (0.8, 1.8)],
        regime: Regime::Cyclic,
    },
    Entry {
        name: "van_der_pol",
        rhs: van_der_pol,
        params: &[("mu", 1.0)],
        dt: 0.1,
        ic_box: &[(-2.0, 2.0), (-2.0, 2.0)],
        regime: Regime::Cyclic,
    },
    Entry {
        name: "finance",
        rhs: finance,
        params: &[("a", 3.0), ("b", 0.1), ("c", 1.0)],
        dt: 0.1,
        ic_box: &[(-1.0, 1.0), (2.0, 4.0), (-1.0, 1.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "genesio_tesi",
        rhs: genesio_tesi,
        params: &[("a", 0.44), ("b", 1.1), ("c", 1.0)],
        dt: 0.1,
        ic_box: &[(-0.3, 0.3), (-0.3, 0.3), (-0.3, 0.3)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "chen",
        rhs: chen,
        params: &[("a", 35.0), ("b", 3.0), ("c", 28.0)],
        dt: 0.005,
        ic_box: &[(-10.0, 10.0), (-10.0, 10.0), (10.0, 30.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "thomas",
        rhs: thomas,
        params: &[("b", 0.208186)],
        dt: 0.3,
        ic_box: &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "halvorsen",
        rhs: halvorsen,
        params: &[("a", 1.4)],
        dt: 0.02,
        ic_box: &[(-2.0, 0.0), (-2.0, 0.0), (-2.0, 0.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "sprott_b",
        rhs: sprott_b,
        params: &[],
        dt: 0.05,
        ic_box: &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "sprott_c",
        rhs: sprott_c,
        params: &[],
        dt: 0.05,
        ic_box: &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "sprott_k",
        rhs: sprott_k,
        params: &[],
        dt: 0.05,
        ic_box: &[(-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "sprott_e",
        rhs: sprott_e,
        params: &[],
        dt: 0.05,
        ic_box: &[(-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "sprott_f",
        rhs: sprott_f,
        params: &[],
        dt: 0.05,
        ic_box: &[(-0.56, -0.36), (-0.23, -0.03), (0.23, 0.43)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "sprott_g",
        rhs: sprott_g,
        params: &[],
        dt: 0.05,
        ic_box: &[(-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)],
        regime: Regime::Chaotic,
    },
    Entry {
        name: "sprott_m",
        rhs: sprott_m,
        params: &[],
        dt: 0.05,
        ic_box: &[(-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)],
        regime: Regime::Chaotic,
    },
];

/// Every built-in system, in registration order.
pub fn builtin() -> Vec<SystemDef> {
    ENTRIES.iter().map(to_def).collect()
}

pub fn names() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.name).collect()
}

pub fn lookup(name: &str) -> Option<SystemDef> {
    ENTRIES.iter().find(|e| e.name == name).map(to_def)
}

fn to_def(e: &Entry) -> SystemDef {
    SystemDef {
        name: e.name.to_string(),
        dim: e.ic_box.len(),
        rhs: e.rhs,
        params: e.params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        default_dt: e.dt,
        transient_steps: super::DEFAULT_TRANSIENT_STEPS,
        ic_box: e.ic_box.to_vec(),
        regime: e.regime,
    }
}
