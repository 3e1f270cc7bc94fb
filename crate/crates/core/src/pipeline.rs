//! Scenario commands, certificates and the versioned JSON report.

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::actions::check_invariant_haar;
use crate::error::{Error, Violation};
use crate::fell_bundle::{semidirect_bundle, semidirect_module_violations};
use crate::isomorphism::{build_sides, phi_map, verify_theorem, TheoremSides, NORM_TOLERANCE};
use crate::measures::verify_measures;
use crate::scenario::{build_scenario, explicit_spec, Scenario, ScenarioFile};
use crate::semidirect::{semidirect_formula_violations, semidirect_groupoid, semidirect_haar};

pub const REPORT_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_THEOREM: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Build,
    VerifyMeasures,
    VerifyTheorem,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Build => "build",
            Command::VerifyMeasures => "verify-measures",
            Command::VerifyTheorem => "verify-theorem",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "validate" => Ok(Command::Validate),
            "build" => Ok(Command::Build),
            "verify-measures" => Ok(Command::VerifyMeasures),
            "verify-theorem" => Ok(Command::VerifyTheorem),
            _ => Err(format!("unknown command {s:?}")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    pub details: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportError {
    pub class: &'static str,
    pub message: String,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub report_v: u32,
    pub command: String,
    pub scenario: Option<String>,
    pub passed: bool,
    pub exit_code: i32,
    pub certificates: Vec<Certificate>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ReportError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dumps: Option<Value>,
}

impl Report {
    fn new(command: Command) -> Self {
        Report {
            report_v: REPORT_VERSION,
            command: command.name().into(),
            scenario: None,
            passed: false,
            exit_code: EXIT_OK,
            certificates: Vec::new(),
            warnings: Vec::new(),
            error: None,
            dumps: None,
        }
    }

    fn fail(mut self, code: i32, class: &'static str, err: &Error) -> Self {
        self.exit_code = code;
        self.passed = false;
        self.error = Some(ReportError { class, message: err.to_string(), violations: err.violations().to_vec() });
        self
    }

    fn push(&mut self, cert: Certificate) {
        self.certificates.push(cert);
    }

    fn finish(mut self, failure_code: i32) -> Self {
        self.passed = self.certificates.iter().all(|c| c.passed);
        self.exit_code = if self.passed { EXIT_OK } else { failure_code };
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Tolerance for norm comparisons only; exact checks have none.
    pub tolerance: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tolerance: NORM_TOLERANCE }
    }
}

pub fn run_path(path: &Path, command: Command, opts: &RunOptions) -> Report {
    match std::fs::read_to_string(path) {
        Ok(text) => run_text(&text, command, opts),
        Err(e) => Report::new(command).fail(EXIT_PARSE, "parse", &Error::Io(e)),
    }
}

pub fn run_text(text: &str, command: Command, opts: &RunOptions) -> Report {
    let report = Report::new(command);
    let file = match ScenarioFile::parse(text) {
        Ok(f) => f,
        Err(e) => return report.fail(EXIT_PARSE, "parse", &e),
    };
    run_file(file, command, opts)
}

pub fn run_file(file: ScenarioFile, command: Command, opts: &RunOptions) -> Report {
    let mut report = Report::new(command);
    report.scenario = Some(file.name.clone());
    let sc = match build_scenario(file) {
        Ok(s) => s,
        Err(e) if e.is_parse() => return report.fail(EXIT_PARSE, "parse", &e),
        Err(e) => return report.fail(EXIT_VALIDATION, "validation", &e),
    };
    report.warnings.extend(sc.bundle.warnings().iter().cloned());
    let validation = validation_certificate(&sc);
    let valid = validation.passed;
    report.push(validation);
    if !valid {
        return report.finish(EXIT_VALIDATION);
    }
    if command == Command::Validate {
        return report.finish(EXIT_VALIDATION);
    }
    if matches!(command, Command::Build | Command::VerifyTheorem) {
        match semidirect_certificate(&sc) {
            Ok(c) => report.push(c),
            Err(e) => return report.fail(EXIT_THEOREM, "semidirect", &e),
        }
    }
    if matches!(command, Command::VerifyMeasures | Command::VerifyTheorem) {
        match verify_measures(&sc.action, &sc.haar_h, &sc.haar_g, &sc.mu) {
            Ok((_, cert)) => report.push(Certificate {
                name: "measures".into(),
                passed: cert.passed(),
                details: serde_json::to_value(&cert).expect("serializes"),
            }),
            Err(e) => return report.fail(EXIT_THEOREM, "measures", &e),
        }
    }
    if matches!(command, Command::Build | Command::VerifyTheorem) {
        let sides = match build_sides(sc.bundle_action.clone(), sc.haar_h.clone(), sc.haar_g.clone()) {
            Ok(s) => s,
            Err(e) => return report.fail(EXIT_THEOREM, "crossed product", &e),
        };
        if command == Command::Build {
            report.dumps = Some(dumps(&sc, &sides));
        } else {
            match phi_map(&sides) {
                Ok(phi) => {
                    let cert = verify_theorem(&phi, &sides, opts.tolerance);
                    report.push(Certificate {
                        name: "theorem".into(),
                        passed: cert.passed(),
                        details: serde_json::to_value(&cert).expect("serializes"),
                    });
                }
                Err(e) => return report.fail(EXIT_THEOREM, "theorem", &e),
            }
        }
    }
    report.finish(EXIT_THEOREM)
}

fn validation_certificate(sc: &Scenario) -> Certificate {
    let inv = check_invariant_haar(&sc.action, &sc.haar_h);
    let details = json!({
        "g": { "arrows": sc.g.len(), "units": sc.g.units().len() },
        "h": { "arrows": sc.h.len(), "units": sc.h.units().len() },
        "bundle": { "total_dim": sc.bundle.total_dim(), "warnings": sc.bundle.warnings().len() },
        "bundle_action": { "maps": sc.bundle_action.to_raw().len() },
        "haar_invariance": inv,
    });
    Certificate { name: "validation".into(), passed: inv.invariant && inv.integral_invariant, details }
}

fn semidirect_certificate(sc: &Scenario) -> crate::Result<Certificate> {
    let sd = semidirect_groupoid(&sc.action);
    let formulas = semidirect_formula_violations(&sc.action, &sd);
    let haar = semidirect_haar(&sc.action, &sd, &sc.haar_h, &sc.haar_g)?;
    let (haar_checked, haar_violations) = haar.left_invariance_violations(&sd.groupoid);
    let bundle = semidirect_bundle(&sc.bundle_action, &sd)?;
    let module = semidirect_module_violations(&sc.bundle_action, &sd, &bundle);
    let (axioms, warnings) = bundle.report();
    let passed = formulas.is_empty() && haar_violations.is_empty() && module.is_empty() && axioms.is_empty();
    let details = json!({
        "arrows": sd.groupoid.len(),
        "units": sd.groupoid.units().len(),
        "formula_violations": formulas,
        "haar_left_invariance": { "checked": haar_checked, "failed": haar_violations.len(), "violations": haar_violations },
        "bundle_axiom_violations": axioms,
        "bundle_module_violations": module,
        "bundle_warnings": warnings,
    });
    Ok(Certificate { name: "semidirect".into(), passed, details })
}

fn dumps(sc: &Scenario, sides: &TheoremSides) -> Value {
    json!({
        "semidirect_groupoid": sides.sd.groupoid.to_raw(),
        "bundle": explicit_spec(&sc.bundle),
        "semidirect_algebra": sides.semidirect.dump(),
        "crossed_product_algebra": sides.crossed.dump(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::p2_swap_scenario;

    #[test]
    fn p2_swap_verifies() {
        let r = run_file(p2_swap_scenario(), Command::VerifyTheorem, &RunOptions::default());
        assert_eq!(r.exit_code, EXIT_OK, "{}", r.to_json());
        let names: Vec<&str> = r.certificates.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["validation", "semidirect", "measures", "theorem"]);
        assert!(r.certificates.iter().all(|c| c.passed));
    }

    #[test]
    fn exit_codes_by_failure_class() {
        let r = run_text("{", Command::Validate, &RunOptions::default());
        assert_eq!(r.exit_code, EXIT_PARSE);

        let mut file = p2_swap_scenario();
        file.groupoid.h.inverse.swap(1, 2);
        file.groupoid.h.inverse[1] = 1;
        let r = run_file(file, Command::Validate, &RunOptions::default());
        assert_eq!(r.exit_code, EXIT_VALIDATION);
        assert!(!r.error.unwrap().violations.is_empty());

        // a skewed Haar system on H is valid but not invariant under the swap
        let mut file = p2_swap_scenario();
        file.haar.weights = ["1", "2", "1", "2"].iter().map(|s| crate::scalar::parse_rational(s).unwrap()).collect();
        let r = run_file(file, Command::Validate, &RunOptions::default());
        assert_eq!(r.exit_code, EXIT_VALIDATION);
    }

    #[test]
    fn build_emits_dumps() {
        let r = run_file(p2_swap_scenario(), Command::Build, &RunOptions::default());
        assert_eq!(r.exit_code, EXIT_OK);
        let d = r.dumps.unwrap();
        assert_eq!(d["semidirect_algebra"]["dim"], 8);
        assert_eq!(d["crossed_product_algebra"]["dim"], 8);
    }
}
