//! Sequential pixel reconstruction by bisection on a Loewner-order predicate.
//!
//! At step `m` the pixels before it in the ordering carry their reconstructed
//! values, pixel `m` carries the trial value `t`, and every other pixel is
//! perfectly conducting ([`TestVariant::Upper`]) or perfectly insulating
//! ([`TestVariant::Lower`]). For the upper test
//! `measured ≥ Λ_test(t)` holds exactly when `t ≥ γ_m`; for the lower test
//! `Λ_test(t) ≥ measured` holds exactly when `t ≤ γ_m`. Both predicates are
//! monotone in `t`, so `γ_m` is found by bracketing and log-scale bisection.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::basis::BoundaryBasis;
use crate::error::{Error, Result};
use crate::forward::{assemble_system, ConductivityField, PixelConductivity};
use crate::geometry::{validate_ordering, Mesh, Partition};
use crate::monotonicity::{loewner_geq, tolerance_for, LoewnerVerdict};
use crate::nd_map::{assemble_nd, NdMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestVariant {
    /// Pixels outside `Q_m` perfectly conducting.
    Upper,
    /// Pixels outside `Q_m` perfectly insulating (removed).
    Lower,
}

impl FromStr for TestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "upper" | "uppertest" => Ok(TestVariant::Upper),
            "lower" | "lowertest" => Ok(TestVariant::Lower),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

impl fmt::Display for TestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestVariant::Upper => "upper",
            TestVariant::Lower => "lower",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconSettings {
    pub variant: TestVariant,
    /// `None` selects the policy in [`tolerance_for`].
    pub tol_loewner: Option<f64>,
    /// Relative bracket width at which bisection stops.
    pub tol_bisect: f64,
    pub bracket_cap: (f64, f64),
    pub expansion: f64,
    pub initial: f64,
    pub warm_start: bool,
    /// Re-check the predicate one expansion step outside the final bracket.
    pub verify_monotone: bool,
}

impl Default for ReconSettings {
    fn default() -> Self {
        ReconSettings {
            variant: TestVariant::Upper,
            tol_loewner: None,
            tol_bisect: 1e-4,
            bracket_cap: (1e-6, 1e6),
            expansion: 4.0,
            initial: 1.0,
            warm_start: true,
            verify_monotone: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelStatus {
    Converged,
    BracketCapHit,
    /// The predicate was not monotone around the final bracket.
    Inconsistent,
}

impl fmt::Display for PixelStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PixelStatus::Converged => "Converged",
            PixelStatus::BracketCapHit => "BracketCapHit",
            PixelStatus::Inconsistent => "Inconsistent",
        })
    }
}

impl FromStr for PixelStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Converged" => Ok(PixelStatus::Converged),
            "BracketCapHit" => Ok(PixelStatus::BracketCapHit),
            "Inconsistent" => Ok(PixelStatus::Inconsistent),
            other => Err(Error::Data(format!("unknown status '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelOutcome {
    pub pixel: usize,
    pub value: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// λ_min of the tested difference at `value`.
    pub lambda_min: f64,
    pub margin: f64,
    /// Bracket expansions before the sign change was found.
    pub flips: usize,
    pub evaluations: usize,
    pub status: PixelStatus,
}

/// One evaluation of the monotone predicate.
#[derive(Debug, Clone, Copy)]
pub struct Probe {
    pub t: f64,
    /// `t` lies at or beyond the flip point (`t ≥ γ_m` for upper, `t > γ_m` for lower).
    pub above: bool,
    pub verdict: LoewnerVerdict,
}

pub struct ReconProblem<'a> {
    pub mesh: &'a Mesh,
    pub partition: &'a Partition,
    pub order: Vec<usize>,
    pub measured: NdMatrix,
    pub basis: BoundaryBasis,
    pub settings: ReconSettings,
    tolerance: f64,
}

impl<'a> ReconProblem<'a> {
    /// `order = None` uses the partition's ordering.
    pub fn new(
        mesh: &'a Mesh,
        partition: &'a Partition,
        order: Option<Vec<usize>>,
        measured: NdMatrix,
        settings: ReconSettings,
    ) -> Result<ReconProblem<'a>> {
        let order = order.unwrap_or_else(|| partition.order.clone());
        let report = validate_ordering(partition, mesh, &order);
        if !report.valid {
            return Err(Error::Geometry(format!("invalid ordering:\n{report}")));
        }
        let (lo, hi) = settings.bracket_cap;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!("bad bracket cap [{lo}, {hi}]")));
        }
        if !(settings.tol_bisect > 0.0) || !(settings.expansion > 1.0) {
            return Err(Error::Config("tol_bisect must be > 0 and expansion > 1".into()));
        }
        let tolerance = match settings.tol_loewner {
            Some(t) if t > 0.0 => t,
            Some(t) => return Err(Error::Config(format!("Loewner tolerance {t} must be positive"))),
            None => tolerance_for(&measured),
        };
        let basis = BoundaryBasis::new(mesh, measured.order())?;
        Ok(ReconProblem {
            mesh,
            partition,
            order,
            measured,
            basis,
            settings,
            tolerance,
        })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn steps(&self) -> usize {
        self.order.len()
    }

    fn check_step(&self, m: usize, known: &[f64]) -> Result<()> {
        if m == 0 || m > self.order.len() {
            return Err(Error::Config(format!("step {m} outside 1..={}", self.order.len())));
        }
        if known.len() != m - 1 {
            return Err(Error::Config(format!(
                "step {m} needs {} known values, got {}",
                m - 1,
                known.len()
            )));
        }
        Ok(())
    }

    /// Hybrid coefficient for step `m` (1-based): `known` on the first `m-1`
    /// ordered pixels, `t` on pixel `m`, the extreme value elsewhere.
    pub fn test_field(&self, m: usize, t: f64, known: &[f64]) -> Result<ConductivityField> {
        self.check_step(m, known)?;
        let extreme = match self.settings.variant {
            TestVariant::Upper => PixelConductivity::Conducting,
            TestVariant::Lower => PixelConductivity::Insulating,
        };
        let mut values = vec![extreme; self.partition.pixel_count];
        for (&p, &v) in self.order.iter().zip(known) {
            values[p] = PixelConductivity::Finite(v);
        }
        values[self.order[m - 1]] = PixelConductivity::Finite(t);
        ConductivityField::new(values)
    }

    /// ND matrix of the test coefficient, same order as the measurements.
    pub fn test_matrix(&self, m: usize, t: f64, known: &[f64]) -> Result<NdMatrix> {
        let field = self.test_field(m, t, known)?;
        let system = assemble_system(self.mesh, self.partition, &field)?;
        assemble_nd(&system, &self.basis, self.measured.order())
    }

    /// Evaluates the predicate at `t`.
    pub fn probe(&self, m: usize, t: f64, known: &[f64]) -> Result<Probe> {
        let test = self.test_matrix(m, t, known)?;
        Ok(match self.settings.variant {
            TestVariant::Upper => {
                let verdict = loewner_geq(&self.measured, &test, self.tolerance)?;
                Probe { t, above: verdict.holds, verdict }
            }
            TestVariant::Lower => {
                let verdict = loewner_geq(&test, &self.measured, self.tolerance)?;
                Probe { t, above: !verdict.holds, verdict }
            }
        })
    }

    /// Locates `γ_m` for step `m` (1-based) given the values on `Q_{m-1}`.
    pub fn pixel_bisect(&self, m: usize, known: &[f64], start: Option<f64>) -> Result<PixelOutcome> {
        self.check_step(m, known)?;
        let s = &self.settings;
        let (cap_lo, cap_hi) = s.bracket_cap;
        let pixel = self.order[m - 1];
        let mut evaluations = 0;
        let mut eval = |t: f64| {
            evaluations += 1;
            self.probe(m, t, known)
        };

        let t0 = start.unwrap_or(s.initial).clamp(cap_lo, cap_hi);
        let first = eval(t0)?;
        let mut flips = 0;
        let (mut lo, mut hi) = (t0, t0);
        let mut capped = None;
        if first.above {
            loop {
                let next = (hi / s.expansion).max(cap_lo);
                let p = eval(next)?;
                if !p.above {
                    lo = next;
                    break;
                }
                hi = next;
                if next <= cap_lo {
                    capped = Some(p);
                    break;
                }
                flips += 1;
            }
        } else {
            loop {
                let next = (lo * s.expansion).min(cap_hi);
                let p = eval(next)?;
                if p.above {
                    hi = next;
                    break;
                }
                lo = next;
                if next >= cap_hi {
                    capped = Some(p);
                    break;
                }
                flips += 1;
            }
        }
        if let Some(p) = capped {
            return Ok(PixelOutcome {
                pixel,
                value: p.t,
                t_lo: lo.min(hi),
                t_hi: lo.max(hi),
                lambda_min: p.verdict.lambda_min,
                margin: p.verdict.margin,
                flips,
                evaluations,
                status: PixelStatus::BracketCapHit,
            });
        }

        while (hi - lo) / lo > s.tol_bisect {
            let mid = (lo * hi).sqrt();
            if eval(mid)?.above {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let value = (lo * hi).sqrt();
        let at_value = eval(value)?;
        let mut status = PixelStatus::Converged;
        if s.verify_monotone {
            let below = lo / s.expansion;
            let beyond = hi * s.expansion;
            if below >= cap_lo && eval(below)?.above {
                status = PixelStatus::Inconsistent;
            }
            if beyond <= cap_hi && !eval(beyond)?.above {
                status = PixelStatus::Inconsistent;
            }
        }
        Ok(PixelOutcome {
            pixel,
            value,
            t_lo: lo,
            t_hi: hi,
            lambda_min: at_value.verdict.lambda_min,
            margin: at_value.verdict.margin,
            flips,
            evaluations,
            status,
        })
    }

    /// Bracket end at which the tested inequality holds. Later steps reuse it
    /// so that their predicate holds in the extreme limit of the trial value.
    pub fn feasible_value(&self, outcome: &PixelOutcome) -> f64 {
        if outcome.status == PixelStatus::BracketCapHit {
            return outcome.value;
        }
        match self.settings.variant {
            TestVariant::Upper => outcome.t_hi,
            TestVariant::Lower => outcome.t_lo,
        }
    }

    /// Runs the sweep over the ordering. A bracket-cap hit stops the sweep,
    /// since later pixels depend on earlier values.
    pub fn reconstruct(&self) -> Result<ReconResult> {
        let mut known: Vec<f64> = Vec::with_capacity(self.order.len());
        let mut outcomes = Vec::with_capacity(self.order.len());
        let mut status = PixelStatus::Converged;
        for m in 1..=self.order.len() {
            let start = match known.last() {
                Some(&prev) if self.settings.warm_start => Some(prev),
                _ => None,
            };
            let outcome = self.pixel_bisect(m, &known, start)?;
            known.push(self.feasible_value(&outcome));
            let pixel_status = outcome.status;
            outcomes.push(outcome);
            match pixel_status {
                PixelStatus::Converged => {}
                PixelStatus::Inconsistent => status = PixelStatus::Inconsistent,
                PixelStatus::BracketCapHit => {
                    status = PixelStatus::BracketCapHit;
                    break;
                }
            }
        }
        Ok(ReconResult {
            pixel_count: self.partition.pixel_count,
            order: self.order.clone(),
            outcomes,
            status,
            header: vec![
                ("variant".into(), self.settings.variant.to_string()),
                ("M".into(), self.measured.order().to_string()),
                ("tol_loewner".into(), format!("{:e}", self.tolerance)),
                ("tol_bisect".into(), format!("{:e}", self.settings.tol_bisect)),
                ("noise_level".into(), format!("{}", self.measured.provenance.noise_level)),
                (
                    "order".into(),
                    self.order.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
                ),
            ],
        })
    }

    /// λ_min of the compressed difference for each truncation order in
    /// `orders`, at fixed trial value `t`.
    pub fn m_sweep(&self, m: usize, t: f64, known: &[f64], orders: &[usize]) -> Result<Vec<SweepRow>> {
        let test = self.test_matrix(m, t, known)?;
        orders
            .iter()
            .map(|&k| {
                let meas = self.measured.truncate(k)?;
                let tst = test.truncate(k)?;
                let verdict = match self.settings.variant {
                    TestVariant::Upper => loewner_geq(&meas, &tst, self.tolerance)?,
                    TestVariant::Lower => loewner_geq(&tst, &meas, self.tolerance)?,
                };
                Ok(SweepRow {
                    t,
                    order: k,
                    lambda_min: verdict.lambda_min,
                    holds: verdict.holds,
                    threshold: -verdict.tolerance_used * verdict.scale,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub order: usize,
    pub lambda_min: f64,
    pub holds: bool,
    /// `-tol·scale`: the inequality holds iff `lambda_min ≥ threshold`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub pixel_count: usize,
    pub order: Vec<usize>,
    pub outcomes: Vec<PixelOutcome>,
    pub status: PixelStatus,
    /// Config echo written as `# key value` lines.
    pub header: Vec<(String, String)>,
}

impl ReconResult {
    /// Reconstructed value per pixel index; `None` outside the sweep.
    pub fn values(&self) -> Vec<Option<f64>> {
        let mut v = vec![None; self.pixel_count];
        for o in &self.outcomes {
            v[o.pixel] = Some(o.value);
        }
        v
    }

    pub fn outcome(&self, pixel: usize) -> Option<&PixelOutcome> {
        self.outcomes.iter().find(|o| o.pixel == pixel)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# pixels {}\n", self.pixel_count));
        out.push_str(&format!("# status {}\n", self.status));
        for (k, v) in &self.header {
            out.push_str(&format!("# {k} {v}\n"));
        }
        for o in &self.outcomes {
            out.push_str(&format!(
                "p {} {:e} {:e} {:e} {:e} {}\n",
                o.pixel, o.value, o.t_lo, o.t_hi, o.lambda_min, o.status
            ));
        }
        out
    }

    /// Parses the result format. Diagnostics not stored in the file (flips,
    /// evaluations, margin) read back as zero.
    pub fn from_text(text: &str) -> Result<ReconResult> {
        let mut pixel_count = None;
        let mut status = PixelStatus::Converged;
        let mut header = Vec::new();
        let mut outcomes = Vec::new();
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Data(format!("bad number '{s}' in result file")))
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.trim().split_once(' ').unwrap_or((rest.trim(), ""));
                match k {
                    "pixels" => {
                        pixel_count = Some(v.parse::<usize>().map_err(|_| {
                            Error::Data(format!("bad pixel count '{v}'"))
                        })?)
                    }
                    "status" => status = v.parse()?,
                    _ => header.push((k.to_string(), v.to_string())),
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 || f[0] != "p" {
                return Err(Error::Data(format!("bad result line '{line}'")));
            }
            outcomes.push(PixelOutcome {
                pixel: f[1]
                    .parse()
                    .map_err(|_| Error::Data(format!("bad pixel index '{}'", f[1])))?,
                value: num(f[2])?,
                t_lo: num(f[3])?,
                t_hi: num(f[4])?,
                lambda_min: num(f[5])?,
                margin: 0.0,
                flips: 0,
                evaluations: 0,
                status: f[6].parse()?,
            });
        }
        let pixel_count =
            pixel_count.ok_or_else(|| Error::Data("result file lacks '# pixels'".into()))?;
        let order = outcomes.iter().map(|o| o.pixel).collect();
        Ok(ReconResult {
            pixel_count,
            order,
            outcomes,
            status,
            header,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_file(path: &Path) -> Result<ReconResult> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ReconResult::from_text(&text)
    }
}
