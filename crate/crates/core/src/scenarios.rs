//! Built-in simulation scenarios.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::scm::{LinkFn, NodeRole, NodeSpec, Noise, ScmSpec, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyLink {
    Linear,
    Nonlinear,
}

/// Scenario identifiers, written as colon-separated strings such as
/// `proxy-strength:10:linear:independent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    SyntheticMain,
    /// Treatment links drawn from {linear, tanh, sin, cos, sigmoid} with the
    /// given seed instead of the canonical assignment.
    SyntheticMainRandom { seed: u64 },
    ProxyStrength { beta: f64, link: ProxyLink, causal: bool },
    ConfoundingStrength { beta: f64, link: ProxyLink, causal: bool },
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let link = |l: &ProxyLink| match l {
            ProxyLink::Linear => "linear",
            ProxyLink::Nonlinear => "nonlinear",
        };
        let case = |c: bool| if c { "causal" } else { "independent" };
        match self {
            Scenario::SyntheticMain => write!(f, "synthetic-main"),
            Scenario::SyntheticMainRandom { seed } => write!(f, "synthetic-main-random:{seed}"),
            Scenario::ProxyStrength { beta, link: l, causal } => {
                write!(f, "proxy-strength:{beta}:{}:{}", link(l), case(*causal))
            }
            Scenario::ConfoundingStrength { beta, link: l, causal } => {
                write!(f, "confounding-strength:{beta}:{}:{}", link(l), case(*causal))
            }
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownScenario(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let strength = |parts: &[&str]| -> Result<(f64, ProxyLink, bool)> {
            let [beta, link, case] = parts else {
                return Err(unknown());
            };
            let beta: f64 = beta.parse().map_err(|_| unknown())?;
            if !beta.is_finite() {
                return Err(unknown());
            }
            let link = match *link {
                "linear" => ProxyLink::Linear,
                "nonlinear" => ProxyLink::Nonlinear,
                _ => return Err(unknown()),
            };
            let causal = match *case {
                "causal" => true,
                "independent" => false,
                _ => return Err(unknown()),
            };
            Ok((beta, link, causal))
        };
        match parts.as_slice() {
            ["synthetic-main"] => Ok(Scenario::SyntheticMain),
            ["synthetic-main-random", seed] => Ok(Scenario::SyntheticMainRandom {
                seed: seed.parse().map_err(|_| unknown())?,
            }),
            ["proxy-strength", rest @ ..] => {
                let (beta, link, causal) = strength(rest)?;
                Ok(Scenario::ProxyStrength { beta, link, causal })
            }
            ["confounding-strength", rest @ ..] => {
                let (beta, link, causal) = strength(rest)?;
                Ok(Scenario::ConfoundingStrength { beta, link, causal })
            }
            _ => Err(unknown()),
        }
    }
}

impl Scenario {
    pub fn spec(&self) -> ScmSpec {
        let spec = match *self {
            Scenario::SyntheticMain => synthetic_main(),
            Scenario::SyntheticMainRandom { seed } => synthetic_main_random(seed),
            Scenario::ProxyStrength { beta, link, causal } => proxy_strength(beta, link, causal),
            Scenario::ConfoundingStrength { beta, link, causal } => {
                confounding_strength(beta, link, causal)
            }
        };
        spec.with_name(self.to_string())
    }
}

pub fn builtin_scenario(name: &str) -> Result<ScmSpec> {
    Ok(name.parse::<Scenario>()?.spec())
}

fn outcome_terms() -> [NodeSpec; 4] {
    let n = Noise::standard_normal;
    [
        // Y1 = 2 sin(1.4 A1 + 2 A3^2) + 0.5 (A2 + A4^2 + A5) + A3^3 + U
        NodeSpec::new("Y1", NodeRole::Outcome, n())
            .term(Term::composite(
                2.0,
                LinkFn::Sin,
                vec![
                    Term::of(1.4, LinkFn::Linear, "A1"),
                    Term::of(2.0, LinkFn::Square, "A3"),
                ],
            ))
            .term(Term::of(0.5, LinkFn::Linear, "A2"))
            .term(Term::of(0.5, LinkFn::Square, "A4"))
            .term(Term::of(0.5, LinkFn::Linear, "A5"))
            .term(Term::of(1.0, LinkFn::Cube, "A3"))
            .term(Term::of(1.0, LinkFn::Linear, "U")),
        // Y2 = -2 cos(1.8 A2) + 1.5 A4^2 + U
        NodeSpec::new("Y2", NodeRole::Outcome, n())
            .term(Term::scaled(-2.0, LinkFn::Cos, "A2", 1.8))
            .term(Term::of(1.5, LinkFn::Square, "A4"))
            .term(Term::of(1.0, LinkFn::Linear, "U")),
        // Y3 = 0.7 A3^2 + 1.2 A4 + U
        NodeSpec::new("Y3", NodeRole::Outcome, n())
            .term(Term::of(0.7, LinkFn::Square, "A3"))
            .term(Term::of(1.2, LinkFn::Linear, "A4"))
            .term(Term::of(1.0, LinkFn::Linear, "U")),
        // Y4 = 1.6 exp(-A1 + 1) + 2.3 A5^2 + U
        NodeSpec::new("Y4", NodeRole::Outcome, n())
            .term(Term {
                coefficient: 1.6,
                function: LinkFn::ExpNeg,
                argument: crate::scm::Argument::Node {
                    node: "A1".into(),
                    scale: 1.0,
                    shift: -1.0,
                },
            })
            .term(Term::of(2.3, LinkFn::Square, "A5"))
            .term(Term::of(1.0, LinkFn::Linear, "U")),
    ]
}

/// Five treatments driven by `U ~ Uniform[-1, 1]`, four nonlinear outcomes.
///
/// Treatments: `A1 = 0.5 (U + 5)`, `A2 = 0.5 (tanh U + 3)`,
/// `A3 = 0.5 (sin(πU/8) + 3)`, `A4 = 0.5 (sigmoid(-U) + 3)`,
/// `A5 = 0.5 (cos(πU/8) + 3)`, each plus `N(0, 1)` noise.
pub fn synthetic_main() -> ScmSpec {
    let n = Noise::standard_normal;
    let mut nodes = vec![
        NodeSpec::new("U", NodeRole::Confounder, Noise::Uniform { lo: -1.0, hi: 1.0 }),
        NodeSpec::new("A1", NodeRole::Treatment, n())
            .intercept(2.5)
            .term(Term::of(0.5, LinkFn::Linear, "U")),
        NodeSpec::new("A2", NodeRole::Treatment, n())
            .intercept(1.5)
            .term(Term::of(0.5, LinkFn::Tanh, "U")),
        NodeSpec::new("A3", NodeRole::Treatment, n())
            .intercept(1.5)
            .term(Term::scaled(0.5, LinkFn::Sin, "U", PI / 8.0)),
        NodeSpec::new("A4", NodeRole::Treatment, n())
            .intercept(1.5)
            .term(Term::scaled(0.5, LinkFn::Sigmoid, "U", -1.0)),
        NodeSpec::new("A5", NodeRole::Treatment, n())
            .intercept(1.5)
            .term(Term::scaled(0.5, LinkFn::Cos, "U", PI / 8.0)),
    ];
    nodes.extend(outcome_terms());
    ScmSpec::new(nodes).expect("built-in scenario is valid")
}

/// Same outcomes as [`synthetic_main`], but each `A_i = 0.5 (g_i(U) + 3) + ε`
/// with `g_i` drawn uniformly from the link pool using `seed`.
pub fn synthetic_main_random(seed: u64) -> ScmSpec {
    let stream = Stream::new(seed, 0x6C69_6E6B);
    let mut nodes = vec![NodeSpec::new(
        "U",
        NodeRole::Confounder,
        Noise::Uniform { lo: -1.0, hi: 1.0 },
    )];
    for i in 0..5 {
        let pick = (stream.u64_at(i) % LinkFn::RANDOM_POOL.len() as u64) as usize;
        nodes.push(
            NodeSpec::new(&format!("A{}", i + 1), NodeRole::Treatment, Noise::standard_normal())
                .intercept(1.5)
                .term(Term::of(0.5, LinkFn::RANDOM_POOL[pick], "U")),
        );
    }
    nodes.extend(outcome_terms());
    ScmSpec::new(nodes).expect("built-in scenario is valid")
}

fn u_link(link: ProxyLink) -> LinkFn {
    match link {
        ProxyLink::Linear => LinkFn::Linear,
        ProxyLink::Nonlinear => LinkFn::Tanh,
    }
}

/// `U ~ N(0,1)`, `A = U + ε1`, `W = β·g(U) + ε2`, `Y = [A +] U + ε3` where
/// `g` is the identity (linear) or `tanh` (nonlinear). `W` is exported as a
/// second treatment and serves as the proxy.
pub fn proxy_strength(beta: f64, link: ProxyLink, causal: bool) -> ScmSpec {
    let n = Noise::standard_normal;
    let mut y = NodeSpec::new("Y", NodeRole::Outcome, n());
    if causal {
        y = y.term(Term::of(1.0, LinkFn::Linear, "A"));
    }
    y = y.term(Term::of(1.0, LinkFn::Linear, "U"));
    ScmSpec::new(vec![
        NodeSpec::new("U", NodeRole::Confounder, n()),
        NodeSpec::new("A", NodeRole::Treatment, n()).term(Term::of(1.0, LinkFn::Linear, "U")),
        NodeSpec::new("W", NodeRole::Treatment, n()).term(Term::of(beta, u_link(link), "U")),
        y,
    ])
    .expect("built-in scenario is valid")
}

/// `U ~ N(0,1)`, `A = βU + ε1`, `W = βU + ε2`,
/// `Y = [A +] W + β·g(U) + ε3` with `g` identity or `tanh`.
pub fn confounding_strength(beta: f64, link: ProxyLink, causal: bool) -> ScmSpec {
    let n = Noise::standard_normal;
    let mut y = NodeSpec::new("Y", NodeRole::Outcome, n());
    if causal {
        y = y.term(Term::of(1.0, LinkFn::Linear, "A"));
    }
    y = y
        .term(Term::of(1.0, LinkFn::Linear, "W"))
        .term(Term::of(beta, u_link(link), "U"));
    ScmSpec::new(vec![
        NodeSpec::new("U", NodeRole::Confounder, n()),
        NodeSpec::new("A", NodeRole::Treatment, n()).term(Term::of(beta, LinkFn::Linear, "U")),
        NodeSpec::new("W", NodeRole::Treatment, n()).term(Term::of(beta, LinkFn::Linear, "U")),
        y,
    ])
    .expect("built-in scenario is valid")
}
