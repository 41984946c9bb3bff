//! Built-in experiment definitions, stored as config text.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "riccati",
        summary: "w_t + w_x = 2w² + w, Gaussian bump, N=100, r=30, T=0.5",
        text: r#"
model = "riccati"
lambda = 1.0
gamma = 2.0
delta = 1.0
n = 100
t_end = 0.5
dt = 1e-3
rank = 30
snapshot_stride = 10
samples = 400

[initial_condition]
kind = "gauss_bump"
"#,
    },
    Preset {
        name: "linear-relax",
        summary: "relaxation of u_t + u_x = 0, u0 = sin(πx), N=40, r=2",
        text: r#"
flux = "linear"
speed = 1.0
lambda = 1.0
epsilon = 1e-3
n = 40
t_end = 1.0
rank = 2
fv_cells = 320

[initial_condition]
kind = "sine"
"#,
    },
    Preset {
        name: "burgers-smooth",
        summary: "Burgers, u0 = 1/2 + sin(πx), shock forms, N=160, T=1",
        text: r#"
flux = "burgers"
lambda = 2.0
epsilon = 1e-3
n = 160
t_end = 1.0
rank = 80
fv_cells = 320

[initial_condition]
kind = "shifted_sine"
"#,
    },
    Preset {
        name: "burgers-strong",
        summary: "Burgers, step data a(χ[0,1/2) - 1) with a=1, N=160, T=0.6",
        text: r#"
flux = "burgers"
lambda = 2.0
epsilon = 1e-3
dt = 1e-4
n = 160
t_end = 0.6
rank = 80
fv_cells = 160

[initial_condition]
kind = "step"
a = 1.0
"#,
    },
    Preset {
        name: "burgers-mixed",
        summary: "Burgers, sin(πx) + 0.2(χ[0,1/2) - 1), reduced with the smooth and strong runs, r=80",
        text: r#"
flux = "burgers"
lambda = 2.0
epsilon = 1e-3
dt = 1e-4
n = 160
t_end = 0.3
rank = 80
fv_cells = 320
training = ["burgers-smooth", "burgers-strong"]

[initial_condition]
kind = "combined"
a = 0.2
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}
