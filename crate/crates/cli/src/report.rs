//! Text views of the JSON reports.

use std::fmt::Write as _;

use convexpop::convexcert::{CertMethod, ConvexityCertificate, ProbeRecord, SdrRepresentation};
use convexpop::hierarchy::{ArchimedeanEvidence, HierarchyReport, PolyOptProblem, RelaxationKind};
use convexpop::polyalg::Polynomial;
use convexpop::sos::{JensenReport, SosWitness};

use crate::input::ProblemFile;

/// Human-readable polynomial, highest degree first.
pub fn poly(p: &Polynomial, names: &[String]) -> String {
    let mut terms: Vec<_> = p.terms().collect();
    terms.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then(b.0.exponents().cmp(a.0.exponents())));
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (k, (m, c)) in terms.iter().enumerate() {
        let mono: Vec<String> = m
            .exponents()
            .iter()
            .zip(names)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, v)| if e == 1 { v.clone() } else { format!("{v}^{e}") })
            .collect();
        let mag = c.abs();
        let body = match (mono.is_empty(), mag == 1.0) {
            (true, _) => format!("{mag}"),
            (false, true) => mono.join("*"),
            (false, false) => format!("{mag}*{}", mono.join("*")),
        };
        match (k, *c < 0.0) {
            (0, true) => write!(out, "-{body}"),
            (0, false) => write!(out, "{body}"),
            (_, true) => write!(out, " - {body}"),
            (_, false) => write!(out, " + {body}"),
        }
        .unwrap();
    }
    out
}

fn point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn constraints(file: &ProblemFile, set: &convexpop::polyalg::SemialgebraicSet) -> String {
    let names = file.variable_names();
    let mut out = String::new();
    for (j, g) in set.constraints().iter().enumerate() {
        writeln!(out, "  g{} = {} >= 0", j + 1, poly(g, &names)).unwrap();
    }
    if let Some(m) = set.ball_bound() {
        writeln!(out, "  ball bound M = {m}").unwrap();
    }
    out
}

pub fn solve(file: &ProblemFile, problem: &PolyOptProblem, rep: &HierarchyReport) -> String {
    let names = file.variable_names();
    let mut out = String::new();
    writeln!(out, "minimize {}", poly(problem.objective(), &names)).unwrap();
    write!(out, "subject to\n{}", constraints(file, problem.feasible_set())).unwrap();
    let arch = match &rep.archimedean {
        ArchimedeanEvidence::BallBound(m) => format!("ball bound M = {m}"),
        ArchimedeanEvidence::EllipsoidConstraint(j) => format!("g{} is an ellipsoid", j + 1),
        ArchimedeanEvidence::Waived => "waived".into(),
    };
    writeln!(out, "archimedean: {arch}").unwrap();
    writeln!(out, "objective sos-convex: {}", if rep.sos_convex { "yes" } else { "no" }).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "{:<5} {:>5}  {:<17} {:>16} {:>16}  exactness", "kind", "order", "status", "bound", "monotone")
        .unwrap();
    for r in &rep.results {
        let kind = match r.kind {
            RelaxationKind::Qhat => "qhat",
            RelaxationKind::Qr => "qr",
        };
        let ex = serde_json::to_value(r.exactness).unwrap();
        writeln!(
            out,
            "{:<5} {:>5}  {:<17} {:>16.9e} {:>16.9e}  {}",
            kind,
            r.order,
            r.status.to_string(),
            r.lower_bound,
            r.monotone_bound,
            ex.as_str().unwrap_or("?")
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    match rep.exact() {
        Some(r) => {
            writeln!(out, "optimal value: {:.9}", r.lower_bound).unwrap();
            if let Some(x) = &r.minimizer {
                writeln!(out, "minimizer: {}", point(x)).unwrap();
            }
            match &r.dual_certificate {
                Some(c) => {
                    let form = serde_json::to_value(c.form).unwrap();
                    writeln!(
                        out,
                        "certificate: {} form, lambda* = {:.9}, residual {:.2e}",
                        form.as_str().unwrap_or("?"),
                        c.lambda_star,
                        c.residual
                    )
                    .unwrap();
                    if let Some(l) = &c.multipliers {
                        writeln!(out, "multipliers: {}", point(l)).unwrap();
                    }
                }
                None => {
                    let why = r.certificate_error.as_deref().unwrap_or("not recovered");
                    writeln!(out, "certificate: {why}").unwrap();
                }
            }
        }
        None => match rep.best_bound() {
            Some(b) => writeln!(out, "no exactness test fired; best lower bound {b:.9}").unwrap(),
            None => writeln!(out, "no relaxation produced a bound").unwrap(),
        },
    }
    out
}

pub fn probe(records: &[ProbeRecord]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<4} {:>8} {:>14}  verdict", "g", "samples", "min |grad g|").unwrap();
    for p in records {
        let norm = p.min_gradient_norm.map_or("-".to_string(), |v| format!("{v:.3e}"));
        writeln!(out, "g{:<3} {:>8} {:>14}  {}", p.j + 1, p.samples, norm, p.verdict()).unwrap();
    }
    for p in records.iter().filter(|p| p.degenerate) {
        writeln!(out, "*** DEGENERATE: the gradient of g{} vanishes on its boundary piece ***", p.j + 1).unwrap();
    }
    out
}

pub fn certify(file: &ProblemFile, cert: &ConvexityCertificate) -> String {
    let mut out = String::new();
    if cert.degenerate {
        writeln!(out, "*** DEGENERATE constraint detected: the certificate below does not imply convexity ***")
            .unwrap();
    }
    write!(out, "set\n{}", constraints(file, &cert.set)).unwrap();
    writeln!(out, "status: {}", cert.status).unwrap();
    writeln!(out, "order: {}", cert.order()).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "{:<4} {:<27} {:>3} {:>14}  {:<6} weights residual", "g", "method", "d", "rho", "closed").unwrap();
    for r in &cert.records {
        let method = match r.method {
            CertMethod::RhoSdp => "rho_sdp",
            CertMethod::QuadraticConcaveShortcut => "quadratic_concave_shortcut",
        };
        let w = match (&r.weights, &r.weights_error) {
            (Some(w), _) => format!("{:.2e}", w.residual),
            (None, Some(e)) => e.clone(),
            (None, None) => "-".into(),
        };
        writeln!(
            out,
            "g{:<3} {:<27} {:>3} {:>14.6e}  {:<6} {}",
            r.j + 1,
            method,
            r.d,
            r.rho,
            if r.closed { "yes" } else { "no" },
            w
        )
        .unwrap();
    }
    let attempts: Vec<_> = cert.records.iter().flat_map(|r| r.attempts.iter().map(move |a| (r.j, a))).collect();
    if !attempts.is_empty() {
        writeln!(out, "\ntest solves").unwrap();
        writeln!(out, "{:<4} {:>3} {:<17} {:>14} {:>10} {:>6}", "g", "d", "status", "rho", "kkt", "iters").unwrap();
        for (j, a) in attempts {
            writeln!(
                out,
                "g{:<3} {:>3} {:<17} {:>14.6e} {:>10.2e} {:>6}",
                j + 1,
                a.d,
                a.status.to_string(),
                a.rho,
                a.kkt_error,
                a.iterations
            )
            .unwrap();
        }
    }
    writeln!(out, "\nnondegeneracy probe").unwrap();
    out.push_str(&probe(&cert.probe));
    let s = &cert.slater;
    writeln!(
        out,
        "slater point ({}): {} {} margin {:.3e}",
        s.provenance,
        if s.found { "found" } else { "not found" },
        point(&s.point),
        s.margin
    )
    .unwrap();
    if let Some(c) = &cert.counterexample {
        writeln!(
            out,
            "counterexample for g{}: x = {}, y = {}, value {:.3e}",
            c.j + 1,
            point(&c.x),
            point(&c.y),
            c.value
        )
        .unwrap();
    }
    for n in &cert.notes {
        writeln!(out, "note: {n}").unwrap();
    }
    out
}

pub fn sdr(sdr: &SdrRepresentation) -> String {
    let dims: Vec<String> = sdr.blocks.iter().map(|b| b.dim.to_string()).collect();
    let form = serde_json::to_value(sdr.form).unwrap();
    format!(
        "lift of order {} ({} form): {} moment coordinates, LMI blocks [{}]\n",
        sdr.d,
        form.as_str().unwrap_or("?"),
        sdr.lift_dim(),
        dims.join(", ")
    )
}

pub fn jensen(rep: &JensenReport) -> String {
    if rep.holds {
        format!("{} ≥ {} : HOLDS\n", rep.lhs, rep.rhs)
    } else {
        format!("{} < {} : VIOLATED\n", rep.lhs, rep.rhs)
    }
}

pub fn sos_check(
    sos: &str,
    witness: Option<&SosWitness>,
    detail: Option<&str>,
    sos_convex: bool,
    sos_convex_detail: Option<&str>,
) -> String {
    let mut out = String::new();
    match witness {
        Some(w) => writeln!(
            out,
            "sos: yes (Gram basis of {} monomials, min eigenvalue {:.3e}, residual {:.3e})",
            w.basis.len(),
            w.min_eigenvalue().unwrap_or(f64::NAN),
            w.residual
        )
        .unwrap(),
        None => writeln!(out, "sos: {sos} ({})", detail.unwrap_or("")).unwrap(),
    }
    match sos_convex_detail {
        None if sos_convex => writeln!(out, "sos-convex: yes").unwrap(),
        d => writeln!(out, "sos-convex: no ({})", d.unwrap_or("")).unwrap(),
    }
    out
}
