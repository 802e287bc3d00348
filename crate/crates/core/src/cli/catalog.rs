//! Built-in problems, shipped as problem-file text.

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const CATALOG: &[Entry] = &[
    Entry {
        name: "linear-contraction",
        summary: "x = 0.5 x + 1 from 0, exact contraction; r_n = 2^-n",
        text: r#"
name = "linear-contraction"
kind = "fixed_point"
dim = 1
scheme = "contraction"
x0 = [0.0]

[operator]
components = ["0.5*x1 + 1"]
derivative = [["0.5"]]

[constants]
M = 0.5
K = 0.0

[stop]
max_steps = 60
residual_tol = 1e-15

[[certify]]
regime = "bounded"

[[certify]]
regime = "geometric"
"#,
    },
    Entry {
        name: "cos-fixed-point",
        summary: "x = cos x from 1, exact Newton",
        text: r#"
name = "cos-fixed-point"
kind = "fixed_point"
dim = 1
scheme = "newton"
x0 = [1.0]

[operator]
components = ["cos(x1)"]
derivative = [["-sin(x1)"]]

[constants]
M = 0.8414709848078965
K = 1.0

[stop]
max_steps = 20
residual_tol = 1e-12

[[certify]]
regime = "quadratic"
witness = { chi = 0.0, mu = 0.0 }
offset = 1

[[certify]]
regime = "bounded"
offset = 1
"#,
    },
    Entry {
        name: "sqrt2-root",
        summary: "x^2 - 2 = 0 wrapped with the Newton Gamma; Heron's iteration",
        text: r#"
name = "sqrt2-root"
kind = "root"
dim = 1
scheme = "contraction"
x0 = [1.5]

[operator]
components = ["x1^2 - 2"]
derivative = [["2*x1"]]

[gamma]
kind = "newton"

[constants]
M = 0.06
K = 0.72

[stop]
max_steps = 20
residual_tol = 1e-14

[[certify]]
regime = "bounded"

[[certify]]
regime = "geometric"
"#,
    },
    Entry {
        name: "sqrt2-damped",
        summary: "x^2 - 2 = 0 wrapped with the damped Gamma, alpha = 0.35",
        text: r#"
name = "sqrt2-damped"
kind = "root"
dim = 1
scheme = "contraction"
x0 = [1.5]

[operator]
components = ["x1^2 - 2"]
derivative = [["2*x1"]]

[gamma]
kind = "damped"
alpha = 0.35

[constants]
M = 0.06
K = 0.7

[stop]
max_steps = 60
residual_tol = 1e-14

[[certify]]
regime = "bounded"

[[certify]]
regime = "geometric"
"#,
    },
    Entry {
        name: "system-2d",
        summary: "nonlinear 2-D system x1 = 0.5 cos x2 + 0.1, x2 = 0.5 sin x1 + 0.2, Newton",
        text: r#"
name = "system-2d"
kind = "fixed_point"
dim = 2
scheme = "newton"
x0 = [0.0, 0.0]

[operator]
components = ["0.5*cos(x2) + 0.1", "0.5*sin(x1) + 0.2"]
derivative = [["0", "-0.5*sin(x2)"], ["0.5*cos(x1)", "0"]]

[constants]
M = 0.5
K = 0.5

[stop]
max_steps = 20
residual_tol = 1e-13

[[certify]]
regime = "quadratic"
witness = { chi = 0.0, mu = 0.0 }

[[certify]]
regime = "bounded"
"#,
    },
    Entry {
        name: "volterra-exp",
        summary: "x(t) = int_0^t (x(s) + 1) ds on [0, 2], exact solution e^t - 1",
        text: r#"
name = "volterra-exp"
kind = "integral"
dim = 1
scheme = "contraction"

[operator]
components = ["x1 + 1"]
derivative = [["1"]]

[integral]
kernel = "volterra_unit"
t_end = 2.0
m = 400
initial = "0"
exact = "exp(t) - 1"

[constants]
M = 1.0
K = 0.0

[stop]
max_steps = 60
r_tol = 1e-13
"#,
    },
    Entry {
        name: "linear-contraction-perturbed",
        summary: "x = 0.5 x + 1 with a constant injected error eps = 1e-2",
        text: r#"
name = "linear-contraction-perturbed"
kind = "fixed_point"
dim = 1
scheme = "contraction"
x0 = [0.0]

[operator]
components = ["0.5*x1 + 1"]
derivative = [["0.5"]]

[perturbation]
mode = "deterministic"
eps = { kind = "constant", c = 0.01 }

[constants]
M = 0.5
K = 0.0

[stop]
max_steps = 60

[[certify]]
regime = "bounded"

[[certify]]
regime = "sandwich"
offset = 8
"#,
    },
    Entry {
        name: "cos-perturbed-newton",
        summary: "x = cos x, Newton with geometrically shrinking value and derivative errors",
        text: r#"
name = "cos-perturbed-newton"
kind = "fixed_point"
dim = 1
scheme = "newton"
x0 = [1.0]

[operator]
components = ["cos(x1)"]
derivative = [["-sin(x1)"]]

[perturbation]
mode = "deterministic"
eps = { kind = "geometric", c = 1e-3, q = 0.5 }
sigma = { kind = "geometric", c = 0.05, q = 0.5 }

[constants]
M = 0.8414709848078965
K = 1.0

[stop]
max_steps = 50
residual_tol = 1e-12

[[certify]]
regime = "bounded"
offset = 1
"#,
    },
    Entry {
        name: "divergent-doubling",
        summary: "x = 2x from 1: expansion, stopped by the divergence guard",
        text: r#"
name = "divergent-doubling"
kind = "fixed_point"
dim = 1
scheme = "contraction"
x0 = [1.0]

[operator]
components = ["2*x1"]
derivative = [["2"]]

[constants]
M = 2.0
K = 0.0

[stop]
max_steps = 200
"#,
    },
    Entry {
        name: "quadratic-mild",
        summary: "x = 0.25 x^2 + 0.25 from 0.5, modified Newton",
        text: r#"
name = "quadratic-mild"
kind = "fixed_point"
dim = 1
scheme = "modified_newton"
x0 = [0.5]

[operator]
components = ["0.25*x1^2 + 0.25"]
derivative = [["0.5*x1"]]

[constants]
M = 0.25
K = 0.5

[stop]
max_steps = 50
residual_tol = 1e-14

[[certify]]
regime = "bounded"

[[certify]]
regime = "geometric"
"#,
    },
    Entry {
        name: "linear-system-2d",
        summary: "affine 2-D map with sup-norm Lipschitz constant 0.6, relaxed custom scheme",
        text: r#"
name = "linear-system-2d"
kind = "fixed_point"
dim = 2
scheme = "custom"
relaxation = -0.1
x0 = [0.0, 0.0]

[operator]
components = ["0.3*x1 + 0.1*x2 + 1", "0.2*x1 + 0.4*x2 + 1"]
derivative = [["0.3", "0.1"], ["0.2", "0.4"]]

[constants]
M = 0.6
K = 0.0

[stop]
max_steps = 80
residual_tol = 1e-13

[[certify]]
regime = "bounded"

[[certify]]
regime = "geometric"
"#,
    },
];

pub fn lookup(name: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.name == name)
}
