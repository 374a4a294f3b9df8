//! Named fixture problems together with their closed-form facts.

use serde::{Deserialize, Serialize};
use translab::transversality::Smoothness;

/// Where the problem's zero set `Z` lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Point { point: Vec<f64> },
    /// `Z = h^{-1}(0)` for a submersion `h`, with the target coordinates
    /// written `x1..xq`.
    LevelSet { map: String, ambient_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CloudSpec {
    Cantor { depth: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// A family `F(x, a)` against a target `Z`.
    Family {
        map: String,
        arity_x: usize,
        arity_a: usize,
        target: TargetSpec,
        x_box: Vec<[f64; 2]>,
        a_box: Vec<[f64; 2]>,
        #[serde(default = "infinite")]
        smoothness: Smoothness,
    },
    /// A single map `g` (the perturbed map is `g + pi`).
    Map {
        map: String,
        arity_x: usize,
        domain: Vec<[f64; 2]>,
    },
    MultiObjective {
        map: String,
        arity_x: usize,
        domain: Vec<[f64; 2]>,
    },
    Cloud {
        generator: CloudSpec,
    },
}

fn infinite() -> Smoothness {
    Smoothness::Infinite
}

/// Facts known in closed form, used by fixture tests and shown in listings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_family: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_star: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_f: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemEntry {
    pub name: String,
    pub summary: String,
    /// The formula or closed-form statement this fixture reproduces.
    pub anchor: Option<String>,
    pub spec: ProblemSpec,
    pub meta: AnalyticMeta,
}

fn cube(dim: usize, lo: f64, hi: f64) -> Vec<[f64; 2]> {
    vec![[lo, hi]; dim]
}

fn s(v: &str) -> String {
    v.to_string()
}

fn entry(name: &str, summary: &str, anchor: Option<&str>, spec: ProblemSpec, meta: AnalyticMeta) -> ProblemEntry {
    ProblemEntry {
        name: s(name),
        summary: s(summary),
        anchor: anchor.map(s),
        spec,
        meta,
    }
}

/// Every registered problem, in listing order.
pub fn registry() -> Vec<ProblemEntry> {
    vec![
        entry(
            "ex-2-2",
            "F: R x R^2 -> R^2 with Z the origin; the family defect jumps on the lines a1 = +-a2",
            Some("F(x,a)=(0, a_1^2−a_2^2)"),
            ProblemSpec::Family {
                map: s("[0, a1^2 - a2^2]"),
                arity_x: 1,
                arity_a: 2,
                target: TargetSpec::Point { point: vec![0.0, 0.0] },
                x_box: cube(1, -1.0, 1.0),
                a_box: cube(2, -1.0, 1.0),
                smoothness: Smoothness::Infinite,
            },
            AnalyticMeta {
                sigma: Some(s("{a : a1^2 = a2^2}")),
                delta_family: Some(2),
                delta_star: Some(1),
                threshold: Some(s("s > 1")),
                notes: Some(s("W(F,Z) = R x {(0,0)}")),
                ..Default::default()
            },
        ),
        entry(
            "ex-2-3",
            "F: R x R^2 -> R^2, F(x,a) = (x + a1, x + a2) with Z the origin",
            Some("F(x,a)=(x+a_1,…,x+a_ℓ)"),
            ProblemSpec::Family {
                map: s("[x1 + a1, x1 + a2]"),
                arity_x: 1,
                arity_a: 2,
                target: TargetSpec::Point { point: vec![0.0, 0.0] },
                x_box: cube(1, -2.0, 2.0),
                a_box: cube(2, -1.0, 1.0),
                smoothness: Smoothness::Infinite,
            },
            AnalyticMeta {
                sigma: Some(s("{a : a1 = a2}")),
                delta_family: Some(0),
                delta_star: Some(-1),
                threshold: Some(s("s > 1")),
                dimension: Some(1.0),
                ..Default::default()
            },
        ),
        entry(
            "ex-2-4",
            "constant zero map R x R -> R^3 missing Z = {(1,0,0)}; dim A + delta* is negative",
            Some("F(x,a)=(0,…,0), Z={(1,0,…,0)}"),
            ProblemSpec::Family {
                map: s("[0, 0, 0]"),
                arity_x: 1,
                arity_a: 1,
                target: TargetSpec::Point { point: vec![1.0, 0.0, 0.0] },
                x_box: cube(1, -1.0, 1.0),
                a_box: cube(1, -1.0, 1.0),
                smoothness: Smoothness::Infinite,
            },
            AnalyticMeta {
                sigma: Some(s("empty")),
                delta_family: Some(0),
                delta_star: Some(-2),
                notes: Some(s("dim A + delta* = -1 < 0; F(U) misses Z")),
                ..Default::default()
            },
        ),
        entry(
            "transverse-shift",
            "F(x,a) = x - a on R^2 x R^2 with Z the origin; transverse for every a",
            None,
            ProblemSpec::Family {
                map: s("[x1 - a1, x2 - a2]"),
                arity_x: 2,
                arity_a: 2,
                target: TargetSpec::Point { point: vec![0.0, 0.0] },
                x_box: cube(2, -1.0, 1.0),
                a_box: cube(2, -0.5, 0.5),
                smoothness: Smoothness::Infinite,
            },
            AnalyticMeta {
                sigma: Some(s("empty")),
                delta_family: Some(0),
                delta_star: Some(0),
                threshold: Some(s("s > 1")),
                ..Default::default()
            },
        ),
        entry(
            "morse-cubic",
            "g(x) = x^3 perturbed by pi(x) = a x; degenerate only at a = 0",
            Some("s ≥ m−1+1/(r−1)"),
            ProblemSpec::Map {
                map: s("[x1^3]"),
                arity_x: 1,
                domain: cube(1, -2.0, 2.0),
            },
            AnalyticMeta {
                sigma: Some(s("{0}")),
                threshold: Some(s("s >= 1 at r = 2; s > 0 at r = infinity")),
                ..Default::default()
            },
        ),
        entry(
            "cantor-depth-12",
            "left endpoints of the depth-12 middle-thirds construction",
            Some("log 2/log 3 = 0.63⋯"),
            ProblemSpec::Cloud {
                generator: CloudSpec::Cantor { depth: 12 },
            },
            AnalyticMeta {
                dimension: Some(2f64.ln() / 3f64.ln()),
                ..Default::default()
            },
        ),
        entry(
            "immersion-sigma-b",
            "g(x) = (x^2, x^2, x^2) perturbed by pi in L(R, R^3); bad set is the diagonal B",
            Some("Σ=B"),
            ProblemSpec::Map {
                map: s("[x1^2, x1^2, x1^2]"),
                arity_x: 1,
                domain: cube(1, -2.0, 2.0),
            },
            AnalyticMeta {
                sigma: Some(s("B = {pi1 = pi2 = pi3}, witness x = -a/2")),
                threshold: Some(s("s > 1")),
                ..Default::default()
            },
        ),
        entry(
            "whitney-normal-form",
            "cross-cap normal form R^2 -> R^3",
            Some("(x_1^2, x_1x_2, x_2)"),
            ProblemSpec::Map {
                map: s("[x1^2, x1*x2, x2]"),
                arity_x: 2,
                domain: cube(2, -1.0, 1.0),
            },
            AnalyticMeta {
                notes: Some(s("cross-cap at the origin")),
                ..Default::default()
            },
        ),
        entry(
            "whitney-degenerate",
            "degenerate corank-1 germ R^2 -> R^3, not a cross-cap at the origin",
            None,
            ProblemSpec::Map {
                map: s("[x1^3, x1^2*x2, x2]"),
                arity_x: 2,
                domain: cube(2, -1.0, 1.0),
            },
            AnalyticMeta {
                notes: Some(s("1-jet meets S^1 non-transversally at the origin")),
                ..Default::default()
            },
        ),
        entry(
            "circle-r3",
            "unit circle in R^3 through the chart theta -> (cos theta, sin theta, 0)",
            Some("d_f=3"),
            ProblemSpec::Map {
                map: s("[cos(x1), sin(x1), 0]"),
                arity_x: 1,
                domain: cube(1, -3.0, 3.0),
            },
            AnalyticMeta {
                d_f: Some(3),
                ..Default::default()
            },
        ),
        entry(
            "twisted-cubic",
            "twisted cubic (x, x^2, x^3) on [0, 1]",
            None,
            ProblemSpec::Map {
                map: s("[x1, x1^2, x1^3]"),
                arity_x: 1,
                domain: cube(1, 0.0, 1.0),
            },
            AnalyticMeta {
                d_f: Some(4),
                ..Default::default()
            },
        ),
        entry(
            "figure-eight",
            "curve (sin 2x, sin x) with one transverse self-crossing at the origin",
            None,
            ProblemSpec::Map {
                map: s("[sin(2*x1), sin(x1)]"),
                arity_x: 1,
                domain: cube(1, -1.0, 5.0),
            },
            AnalyticMeta {
                notes: Some(s("double point (0, pi)")),
                ..Default::default()
            },
        ),
        entry(
            "parabola",
            "f(x) = x^2 on [-1, 1]; every pair (-t, t) is a double point",
            None,
            ProblemSpec::Map {
                map: s("[x1^2]"),
                arity_x: 1,
                domain: cube(1, -1.0, 1.0),
            },
            AnalyticMeta {
                notes: Some(s("double points (-t, t)")),
                ..Default::default()
            },
        ),
        entry(
            "nodal-cubic",
            "plane curve (t^2 - 1, t^3 - t) with a planted double point at t = -1, 1",
            None,
            ProblemSpec::Map {
                map: s("[x1^2 - 1, x1^3 - x1]"),
                arity_x: 1,
                domain: cube(1, -1.5, 1.5),
            },
            AnalyticMeta {
                notes: Some(s("double point (-1, 1) with transverse branches")),
                ..Default::default()
            },
        ),
        entry(
            "pareto-9-1",
            "f1 = f2 = x1^2 + x2^2 on R^2 under linear perturbation",
            Some("X*(f+π) = {(−a1/2, −a2/2)}"),
            ProblemSpec::MultiObjective {
                map: s("[x1^2 + x2^2, x1^2 + x2^2]"),
                arity_x: 2,
                domain: cube(2, -3.0, 3.0),
            },
            AnalyticMeta {
                sigma: Some(s("B = {pi1 = pi2}")),
                threshold: Some(s("s > 2")),
                notes: Some(s("alpha = 2")),
                ..Default::default()
            },
        ),
        entry(
            "pareto-centroid",
            "f1 = |x - p|^2, f2 = |x - q|^2 with p = (1, -2), q = (-0.5, 3)",
            None,
            ProblemSpec::MultiObjective {
                map: s("[(x1 - 1)^2 + (x2 + 2)^2, (x1 + 0.5)^2 + (x2 - 3)^2]"),
                arity_x: 2,
                domain: cube(2, -5.0, 5.0),
            },
            AnalyticMeta {
                notes: Some(s("x*(w) = w1 p + w2 q")),
                ..Default::default()
            },
        ),
    ]
}

pub fn lookup(name: &str) -> Option<ProblemEntry> {
    registry().into_iter().find(|e| e.name == name)
}

/// One line per entry: name, anchor (if any), summary.
pub fn listing() -> String {
    let mut out = String::new();
    for e in registry() {
        let anchor = e.anchor.as_deref().map(|a| format!("  [{a}]")).unwrap_or_default();
        out.push_str(&format!("{:<20}{anchor}\n    {}\n", e.name, e.summary));
    }
    out
}
