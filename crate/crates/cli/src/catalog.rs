//! The system kinds a configuration can name.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Parameter {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: &'static str,
    pub description: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct Descriptor {
    pub kind: &'static str,
    pub description: &'static str,
    pub parameters: Vec<Parameter>,
}

fn p(name: &'static str, ty: &'static str, description: &'static str) -> Parameter {
    Parameter { name, ty, description }
}

pub fn descriptors() -> Vec<Descriptor> {
    let matrix = p("matrix", "integer matrix", "rows of a unimodular matrix");
    vec![
        Descriptor {
            kind: "linear",
            description: "toral automorphism x -> M x, optionally times an identity block",
            parameters: vec![
                matrix.clone(),
                p("identity_block", "integer", "trailing identity dimensions (default 0)"),
            ],
        },
        Descriptor {
            kind: "skew_product",
            description: "(x, z) -> (A x, z + shift(x)) on T^3",
            parameters: vec![
                p("matrix", "integer matrix", "hyperbolic 2x2 base"),
                p(
                    "shift",
                    "fiber shift",
                    "formula constant{value}, cos_wave{amplitude, axis} or sin_wave{amplitude, axis}",
                ),
            ],
        },
        Descriptor {
            kind: "perturbed",
            description: "f composed with id + amplitude * field",
            parameters: vec![
                p("base", "system", "any catalog descriptor"),
                p("field", "name", "zero, cat_shear (T^2), skew_mix or skew_tilt (T^3)"),
                p("amplitude", "float", "size of the perturbation"),
            ],
        },
        Descriptor {
            kind: "suspension_time1",
            description: "time-one map of the suspension flow over a 2x2 hyperbolic base",
            parameters: vec![
                p("matrix", "integer matrix", "hyperbolic 2x2 base"),
                p("roof", "roof", "formula constant{value} or cos_wave{mean, amplitude, axis} (default constant 1)"),
            ],
        },
    ]
}

pub fn render_text(descriptors: &[Descriptor]) -> String {
    let mut out = String::new();
    for d in descriptors {
        out.push_str(&format!("{}: {}\n", d.kind, d.description));
        for p in &d.parameters {
            out.push_str(&format!("    {} ({}): {}\n", p.name, p.ty, p.description));
        }
    }
    out
}
