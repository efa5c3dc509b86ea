//! Acceptance criteria and `verify` suites assembled from [`crate::checks`].

use hwy_core::deficit::ElementaryKind;

use crate::checks::*;
use crate::config::Lab;
use crate::report::{Check, Report};

/// Ensemble sizes used by the criteria.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sizes {
    pub gap: usize,
    pub inequality: usize,
    pub adjointness: usize,
    pub orthogonality: usize,
    pub witness: usize,
    pub primal_sweep: usize,
    pub dual_sweep: usize,
    pub elementary: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            gap: 100,
            inequality: 200,
            adjointness: 20,
            orthogonality: 20,
            witness: 100,
            primal_sweep: 8,
            dual_sweep: 7,
            elementary: 4000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Criterion {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

pub const TITLES: [&str; 11] = [
    "spectral eigenvalues",
    "spectral gap",
    "inequality and equality cases",
    "conformal machinery",
    "discrete adjointness",
    "quadratic family",
    "bubble family exponents",
    "elementary inequalities",
    "orthogonality constructions",
    "half-space bridge",
    "empirical stability witness",
];

pub fn criterion(lab: &Lab, id: u8, sizes: &Sizes) -> Criterion {
    let mut notes = Vec::new();
    let checks = match id {
        1 => spectral_eigenvalues(lab),
        2 => [spectral_gap_primal(lab, sizes.gap), spectral_gap_dual(lab, sizes.gap)].concat(),
        3 => [
            inequality_primal(lab, sizes.inequality),
            inequality_dual(lab, sizes.inequality),
        ]
        .concat(),
        4 => conformal_machinery(lab),
        5 => adjointness(lab, sizes.adjointness),
        6 => quadratic_family(lab),
        7 => {
            let (rp, cp) = bubble_primal(lab, sizes.primal_sweep);
            let (rd, cd) = bubble_dual(lab, sizes.dual_sweep);
            for (tag, rows) in [("primal", &rp), ("dual", &rd)] {
                if let (Some(a), Some(b)) = (rows.first(), rows.last()) {
                    notes.push(format!(
                        "{tag} window δ ∈ [{:.3e}, {:.3e}], {} points",
                        a.parameter,
                        b.parameter,
                        rows.len()
                    ));
                }
            }
            [cp, cd].concat()
        }
        8 => elementary(lab.dim, 0.1, sizes.elementary),
        9 => {
            let (c, ratio) = orthogonality_primal(lab, sizes.orthogonality);
            let flag = if ratio <= 5.0 { "within" } else { "FLAGGED, above" };
            notes.push(format!(
                "largest ‖r‖_p at the L² minimizer over the L^p minimum: {ratio:.4} ({flag} the ceiling 5)"
            ));
            [c, orthogonality_dual(lab, sizes.orthogonality)].concat()
        }
        10 => halfspace_bridge(lab),
        11 => {
            let (c, q) = stability_witness(lab, sizes.witness);
            notes.push(format!(
                "smallest deficit/two-term distance over {} samples: {q:.6e}",
                sizes.witness
            ));
            c
        }
        _ => vec![Check::failed(format!("unknown criterion {id}"), 0.0)],
    };
    Criterion {
        id,
        title: TITLES.get(id as usize - 1).copied().unwrap_or("unknown"),
        checks,
        notes,
    }
}

pub const SUITES: [&str; 5] = ["geometry", "spectral", "elementary", "dual", "all"];

/// `hwy verify <suite>`.
pub fn verify(lab: &Lab, suite: &str, sizes: &Sizes) -> Option<Report> {
    let mut report = Report::new(suite, &lab.config);
    match suite {
        "geometry" => {
            report.tests.extend(conformal_machinery(lab));
            report.tests.extend(halfspace_bridge(lab));
        }
        "spectral" => {
            report.tests.extend(spectral_eigenvalues(lab));
            report.tests.extend(spectral_gap_primal(lab, sizes.gap));
            report.tests.extend(adjointness(lab, sizes.adjointness));
        }
        "elementary" => {
            report.tests.extend(elementary(lab.dim, 0.1, sizes.elementary));
            report.notes.push(format!(
                "{} (the (1+C|a|)^(p'-2) form) admits no constant and is not checked",
                ElementaryKind::UpperPPrimeLiteral.tag()
            ));
        }
        "dual" => {
            report.tests.extend(spectral_gap_dual(lab, sizes.gap));
            report.tests.extend(inequality_dual(lab, sizes.inequality));
            report.tests.extend(orthogonality_dual(lab, sizes.orthogonality));
        }
        "all" => {
            for id in 1..=11 {
                let c = criterion(lab, id, sizes);
                report.tests.extend(c.checks.into_iter().map(|mut ch| {
                    ch.name = format!("c{id}.{}", ch.name);
                    ch
                }));
                report.notes.extend(c.notes);
            }
        }
        _ => return None,
    }
    Some(report)
}
