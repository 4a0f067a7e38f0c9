pub const PRESET_NAMES: [&str; 3] = ["landau-cartesian", "landau-colella", "bernstein"];

const LANDAU_CARTESIAN: &str = r#"# Weak Landau damping on [0, 4π] × [0, 1]², electrostatic model.
[mapping]
kind = "cuboid"
lengths = [12.566370614359172, 1.0, 1.0]

[grid]
n_cells = [32, 1, 1]
degrees = [3, 1, 1]

[physics]
alpha = 1.0
eps = -1.0
v_th = 1.0

[model]
kind = "lva"

[experiment]
kind = "landau"
delta = 1e-3
k_mode = 0.5

[time]
dt = 0.05
t_end = 30.0
splitting = "strang"

[particles]
per_cell = 1000
seed = 1

[solvers]
cg_tol = 1e-12
cg_max_iter = 10000

[output]
dir = "output/landau-cartesian"
save_every_steps = 1
"#;

const LANDAU_COLELLA: &str = r#"# Weak Landau damping on the Colella-distorted domain [0, 12] × [0, 1]².
# The perturbation wavenumber is the fundamental mode 2π/12 of the domain.
[mapping]
kind = "colella"
lengths = [12.0, 1.0, 1.0]
alpha_c = 0.1

[grid]
n_cells = [24, 24, 1]
degrees = [3, 3, 1]

[physics]
alpha = 1.0
eps = -1.0
v_th = 1.0

[model]
kind = "lva"

[experiment]
kind = "landau"
delta = 1e-3
k_mode = 0.5235987755982988

[time]
dt = 0.05
t_end = 30.0
splitting = "strang"

[particles]
per_cell = 1000
seed = 1

[solvers]
cg_tol = 1e-12
cg_max_iter = 10000

[output]
dir = "output/landau-colella"
save_every_steps = 1
"#;

const BERNSTEIN: &str = r#"# Electron Bernstein waves perpendicular to B0 = e_z, ω_p = ω_c = 1.
[mapping]
kind = "cuboid"
lengths = [144.0, 0.8, 0.8]

[grid]
n_cells = [1024, 1, 1]
degrees = [3, 1, 1]

[physics]
alpha = 1.0
eps = -1.0
v_th = 0.2
b0 = [0.0, 0.0, 1.0]

[model]
kind = "lvm"

[experiment]
kind = "bernstein"
noise_amplitude = 1e-4
mode_count = 80
phase_rule = "uniform-noise"
init_field = "deposit"

[time]
dt = 0.25
t_end = 2000.0
splitting = "strang"

[particles]
per_cell = 100
seed = 1

[solvers]
cg_tol = 1e-12
cg_max_iter = 10000

[output]
dir = "output/bernstein"
save_every_steps = 1
"#;

pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "landau-cartesian" => Some(LANDAU_CARTESIAN),
        "landau-colella" => Some(LANDAU_COLELLA),
        "bernstein" => Some(BERNSTEIN),
        _ => None,
    }
}
