//! Brute-force and constructive verification of finitely checkable
//! identities, each returning a structured pass/fail report.
//!
//! Exact checks use no floating point anywhere; statistical checks report
//! `inconclusive` rather than pass below their trial budget, and carry a
//! reproducing seed. Every check has at least one input designed to fail,
//! listed in [`negative_controls`].

mod counting;
mod fixed_sets;
mod orders;
mod sections;

pub use counting::{
    check_component_mass, check_component_mass_grid, check_intersection_probability,
    check_random_intersection_families, ComponentMassParams, IntersectionParams,
};
pub use fixed_sets::{
    check_fix_stab, check_green_ray_fixation, check_infinite_translates, FixStabParams,
    GreenRayFixationParams, InfiniteTranslatesParams,
};
pub use orders::{check_long_cycles, check_order3_in_rst, LongCyclesParams, Order3Params};
pub use sections::{
    check_conjugate_sections, check_def_cover, check_grigorchuk_commutator,
    check_sections_surjective, ConjugateSectionsParams, DefCoverParams, GrigorchukParams,
    SectionsSurjectiveParams,
};

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "inconclusive")]
    InconclusiveStatistical,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::InconclusiveStatistical => write!(f, "inconclusive"),
        }
    }
}

/// Structured outcome of one check run. A fail always carries a concrete
/// counterexample reproducible from the parameters and seed.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
    pub details: Value,
    pub ms: u128,
}

impl CheckReport {
    pub(crate) fn run(
        check: &str,
        params: Value,
        seed: Option<u64>,
        body: impl FnOnce() -> Result<(Verdict, Option<Value>, Value)>,
    ) -> Result<CheckReport> {
        let start = Instant::now();
        let (verdict, counterexample, details) = body()?;
        Ok(CheckReport {
            check: check.to_string(),
            params,
            seed,
            verdict,
            counterexample,
            details,
            ms: start.elapsed().as_millis(),
        })
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// Names of all runnable checks, in canonical order.
pub const CHECK_NAMES: [&str; 11] = [
    "component_mass",
    "conjugate_sections",
    "def_cover",
    "fix_stab",
    "green_ray_fixation",
    "grigorchuk_commutator",
    "infinite_translates",
    "intersection_probability",
    "long_cycles",
    "order3_in_rst",
    "sections_surjective",
];

/// Runs a check by name with JSON parameters; missing fields take the
/// committed defaults.
pub fn run_check(name: &str, params: &Value, seed: u64) -> Result<CheckReport> {
    fn parse<T: serde::de::DeserializeOwned>(params: &Value) -> Result<T> {
        serde_json::from_value(params.clone())
            .map_err(|e| Error::Parse(format!("check parameters: {e}")))
    }
    match name {
        "conjugate_sections" => check_conjugate_sections(&parse(params)?, seed),
        "sections_surjective" => check_sections_surjective(&parse(params)?),
        "def_cover" => check_def_cover(&parse(params)?),
        "grigorchuk_commutator" => check_grigorchuk_commutator(&parse(params)?, seed),
        "fix_stab" => check_fix_stab(&parse(params)?),
        "infinite_translates" => check_infinite_translates(&parse(params)?),
        "intersection_probability" => {
            let p: IntersectionParams = parse(params)?;
            match p.sets {
                Some(_) => check_intersection_probability(&p),
                None => check_random_intersection_families(&p, seed),
            }
        }
        "component_mass" => {
            let p: ComponentMassParams = parse(params)?;
            if p.weights.is_some() {
                check_component_mass(&p)
            } else {
                check_component_mass_grid(&p)
            }
        }
        "order3_in_rst" => check_order3_in_rst(&parse(params)?),
        "long_cycles" => check_long_cycles(&parse(params)?),
        "green_ray_fixation" => check_green_ray_fixation(&parse(params)?, seed),
        _ => Err(Error::Parse(format!("unknown check {name:?}"))),
    }
}

/// The committed default suite: every check with its standing parameters.
pub fn default_suite() -> Vec<(&'static str, Value)> {
    CHECK_NAMES
        .iter()
        .map(|&name| (name, serde_json::json!({})))
        .collect()
}

/// Inputs designed to fail, one per check family, guarding against vacuous
/// passes. Each entry is `(check name, params, expect_error)`: when
/// `expect_error` is true the run aborts with a precondition error instead
/// of returning a fail verdict.
pub fn negative_controls() -> Vec<(&'static str, Value, bool)> {
    vec![
        (
            "conjugate_sections",
            serde_json::json!({"sabotage_section_order": true}),
            false,
        ),
        (
            "sections_surjective",
            serde_json::json!({"claim_full_surjectivity": true}),
            false,
        ),
        ("def_cover", serde_json::json!({"same_discard": true}), false),
        (
            "grigorchuk_commutator",
            serde_json::json!({"force_identity_phi": true}),
            false,
        ),
        (
            "fix_stab",
            serde_json::json!({"set": {"d": 2, "depth": 3,
                "levels": [[""], ["1"], ["11"], ["111"]]},
                "group_depth": 3}),
            false,
        ),
        (
            "infinite_translates",
            serde_json::json!({"degenerate_witnesses": true}),
            false,
        ),
        (
            "intersection_probability",
            serde_json::json!({"space_size": 4, "sets": [[0, 1], [2, 3]],
                "p": "1/2", "require_r": false}),
            false,
        ),
        (
            "component_mass",
            serde_json::json!({"weights": ["1/2", "1/2"], "probs": ["1", "1/5"],
                "strong_claim": true}),
            false,
        ),
        (
            "order3_in_rst",
            serde_json::json!({"group_depth": 2, "vertex": "0"}),
            false,
        ),
        (
            "long_cycles",
            serde_json::json!({"involution_control": true}),
            false,
        ),
        (
            "green_ray_fixation",
            serde_json::json!({"clopen_control": true}),
            true,
        ),
    ]
}
