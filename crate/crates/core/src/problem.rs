//! Problem data, assumption checks and the hat transform `φ̂ = φ + φ̄`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, PD_TOL, PSD_TOL};
use crate::linalg::spectral_norm;

/// Coefficients of the controlled mean-field SDE
///
/// ```text
/// dx = (A x + Ā E[x] + B u + B̄ E[u]) dt + (C x + C̄ E[x] + D u + D̄ E[u]) dW
/// ```
///
/// together with the quadratic cost weights, initial state and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub n: usize,
    pub m: usize,
    pub horizon: f64,
    pub x0: DVector<f64>,
    pub a: DMatrix<f64>,
    pub a_bar: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub c_bar: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub d_bar: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub q_bar: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub r_bar: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub g_bar: DMatrix<f64>,
}

/// JSON key, expected shape, accessor.
type Slot = (&'static str, fn(&ProblemData) -> (usize, usize), fn(&mut ProblemData) -> &mut DMatrix<f64>);

const SLOTS: [Slot; 14] = [
    ("A", |p| (p.n, p.n), |p| &mut p.a),
    ("Abar", |p| (p.n, p.n), |p| &mut p.a_bar),
    ("B", |p| (p.n, p.m), |p| &mut p.b),
    ("Bbar", |p| (p.n, p.m), |p| &mut p.b_bar),
    ("C", |p| (p.n, p.n), |p| &mut p.c),
    ("Cbar", |p| (p.n, p.n), |p| &mut p.c_bar),
    ("D", |p| (p.n, p.m), |p| &mut p.d),
    ("Dbar", |p| (p.n, p.m), |p| &mut p.d_bar),
    ("Q", |p| (p.n, p.n), |p| &mut p.q),
    ("Qbar", |p| (p.n, p.n), |p| &mut p.q_bar),
    ("R", |p| (p.m, p.m), |p| &mut p.r),
    ("Rbar", |p| (p.m, p.m), |p| &mut p.r_bar),
    ("G", |p| (p.n, p.n), |p| &mut p.g),
    ("Gbar", |p| (p.n, p.n), |p| &mut p.g_bar),
];

const SYMMETRIC_KEYS: [&str; 6] = ["Q", "Qbar", "R", "Rbar", "G", "Gbar"];

impl ProblemData {
    /// All coefficients zero, `x0 = 0`.
    pub fn zeros(n: usize, m: usize, horizon: f64) -> Self {
        let nn = || DMatrix::zeros(n, n);
        let nm = || DMatrix::zeros(n, m);
        let mm = || DMatrix::zeros(m, m);
        Self {
            n,
            m,
            horizon,
            x0: DVector::zeros(n),
            a: nn(),
            a_bar: nn(),
            b: nm(),
            b_bar: nm(),
            c: nn(),
            c_bar: nn(),
            d: nm(),
            d_bar: nm(),
            q: nn(),
            q_bar: nn(),
            r: mm(),
            r_bar: mm(),
            g: nn(),
            g_bar: nn(),
        }
    }

    /// Coefficient matrix by its problem-file key (`"A"`, `"Abar"`, ...).
    pub fn matrix(&self, key: &str) -> Option<&DMatrix<f64>> {
        Some(match key {
            "A" => &self.a,
            "Abar" => &self.a_bar,
            "B" => &self.b,
            "Bbar" => &self.b_bar,
            "C" => &self.c,
            "Cbar" => &self.c_bar,
            "D" => &self.d,
            "Dbar" => &self.d_bar,
            "Q" => &self.q,
            "Qbar" => &self.q_bar,
            "R" => &self.r,
            "Rbar" => &self.r_bar,
            "G" => &self.g,
            "Gbar" => &self.g_bar,
            _ => return None,
        })
    }

    fn check_shapes(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::ShapeMismatch {
                name: "dimensions".into(),
                expected: "n >= 1 and m >= 1".into(),
                found: format!("n={}, m={}", self.n, self.m),
            });
        }
        if self.x0.len() != self.n {
            return Err(Error::ShapeMismatch {
                name: "x0".into(),
                expected: format!("length {}", self.n),
                found: format!("length {}", self.x0.len()),
            });
        }
        for (key, shape, _) in SLOTS.iter() {
            let (r, c) = shape(self);
            let mat = self.matrix(key).expect("known key");
            if mat.shape() != (r, c) {
                return Err(Error::ShapeMismatch {
                    name: (*key).to_string(),
                    expected: format!("{r}x{c}"),
                    found: format!("{}x{}", mat.nrows(), mat.ncols()),
                });
            }
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::NonFinite { name: "T".into() });
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { name: "x0".into() });
        }
        for (key, _, _) in SLOTS.iter() {
            if self.matrix(key).expect("known key").iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    name: (*key).to_string(),
                });
            }
        }
        Ok(())
    }

    /// Parses the problem-file JSON. Missing matrix keys default to zeros.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::InvalidProblemFile {
            key: None,
            message: format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::InvalidProblemFile {
            key: None,
            message: "top level must be a JSON object".into(),
        })?;
        let n = read_dim(obj, "n")?;
        let m = read_dim(obj, "m")?;
        let horizon = match obj.get("T") {
            Some(v) => v.as_f64().ok_or_else(|| bad_key("T", "must be a number"))?,
            None => return Err(bad_key("T", "missing")),
        };
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(bad_key("T", "must be positive"));
        }
        let mut p = ProblemData::zeros(n, m, horizon);
        if let Some(v) = obj.get("x0") {
            let entries = read_numbers(v, "x0")?;
            if entries.len() != n {
                return Err(bad_key("x0", &format!("expected {n} entries, found {}", entries.len())));
            }
            p.x0 = DVector::from_vec(entries);
        }
        for (key, shape, slot) in SLOTS.iter() {
            if let Some(v) = obj.get(*key) {
                let (r, c) = shape(&p);
                let entries = read_numbers(v, key)?;
                if entries.len() != r * c {
                    return Err(bad_key(
                        key,
                        &format!("expected {} entries ({r}x{c}), found {}", r * c, entries.len()),
                    ));
                }
                *slot(&mut p) = DMatrix::from_row_slice(r, c, &entries);
            }
        }
        Ok(p)
    }

    /// Serializes to the problem-file JSON (row-major arrays).
    pub fn to_json_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("n".into(), Value::from(self.n));
        obj.insert("m".into(), Value::from(self.m));
        obj.insert("T".into(), Value::from(self.horizon));
        obj.insert("x0".into(), Value::from(self.x0.iter().copied().collect::<Vec<_>>()));
        for (key, _, _) in SLOTS.iter() {
            let mat = self.matrix(key).expect("known key");
            let row_major: Vec<f64> = (0..mat.nrows())
                .flat_map(|i| (0..mat.ncols()).map(move |j| mat[(i, j)]))
                .collect();
            obj.insert((*key).into(), Value::from(row_major));
        }
        Value::Object(obj)
    }
}

fn bad_key(key: &str, message: &str) -> Error {
    Error::InvalidProblemFile {
        key: Some(key.to_string()),
        message: message.to_string(),
    }
}

fn read_dim(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    match obj.get(key) {
        Some(v) => match v.as_u64() {
            Some(d) if d >= 1 => Ok(d as usize),
            _ => Err(bad_key(key, "must be a positive integer")),
        },
        None => Err(bad_key(key, "missing")),
    }
}

/// Accepts a flat row-major array or an array of rows.
fn read_numbers(v: &Value, key: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| bad_key(key, "must be an array"))?;
    let mut out = Vec::with_capacity(arr.len());
    for item in arr {
        match item {
            Value::Number(num) => out.push(num.as_f64().ok_or_else(|| bad_key(key, "non-finite number"))?),
            Value::Array(row) => {
                for x in row {
                    out.push(x.as_f64().ok_or_else(|| bad_key(key, "entries must be numbers"))?);
                }
            }
            _ => return Err(bad_key(key, "entries must be numbers")),
        }
    }
    Ok(out)
}

/// Sums `φ̂ = φ + φ̄` of the plain and mean-field coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HatCoefficients {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub q: SymMatrix,
    pub r: SymMatrix,
    pub g: SymMatrix,
}

pub fn hat_transform(p: &ProblemData) -> HatCoefficients {
    HatCoefficients {
        a: &p.a + &p.a_bar,
        b: &p.b + &p.b_bar,
        c: &p.c + &p.c_bar,
        d: &p.d + &p.d_bar,
        q: SymMatrix::symmetrize(&p.q + &p.q_bar),
        r: SymMatrix::symmetrize(&p.r + &p.r_bar),
        g: SymMatrix::symmetrize(&p.g + &p.g_bar),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

/// Outcome of checking each positivity condition on the cost weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| !c.passed)
    }
}

/// Shape, finiteness and symmetry checks, then the six eigenvalue tests.
/// Never fails on the positivity conditions themselves.
pub fn assess_assumptions(p: &ProblemData) -> Result<ValidationReport> {
    p.check_shapes()?;
    p.check_finite()?;
    for key in SYMMETRIC_KEYS {
        SymMatrix::try_from_matrix(p.matrix(key).expect("known key").clone(), key)?;
    }
    let sym = |m: DMatrix<f64>| SymMatrix::symmetrize(m);
    let psd = |name: &'static str, m: SymMatrix| {
        let min = m.min_eigenvalue();
        ConditionCheck {
            name,
            min_eigenvalue: min,
            passed: min >= -PSD_TOL * (1.0 + spectral_norm(&m)),
        }
    };
    let pd = |name: &'static str, m: SymMatrix| {
        let min = m.min_eigenvalue();
        ConditionCheck {
            name,
            min_eigenvalue: min,
            passed: min >= PD_TOL,
        }
    };
    Ok(ValidationReport {
        conditions: vec![
            psd("Q >= 0", sym(p.q.clone())),
            psd("Q+Qbar >= 0", sym(&p.q + &p.q_bar)),
            psd("G >= 0", sym(p.g.clone())),
            psd("G+Gbar >= 0", sym(&p.g + &p.g_bar)),
            pd("R > 0", sym(p.r.clone())),
            pd("R+Rbar > 0", sym(&p.r + &p.r_bar)),
        ],
    })
}

/// Like [`assess_assumptions`] but fails with `AssumptionViolated` naming the
/// first condition that does not hold.
pub fn validate_problem(p: &ProblemData) -> Result<ValidationReport> {
    let report = assess_assumptions(p)?;
    if let Some(fail) = report.first_failure() {
        return Err(Error::AssumptionViolated {
            condition: fail.name.to_string(),
            eigenvalue: fail.min_eigenvalue,
        });
    }
    Ok(report)
}

/// A validated problem: symmetric weights symmetrized, hats precomputed.
#[derive(Debug, Clone)]
pub struct Problem {
    data: ProblemData,
    hat: HatCoefficients,
    report: ValidationReport,
}

impl Problem {
    pub fn new(mut data: ProblemData) -> Result<Self> {
        let report = validate_problem(&data)?;
        for m in [
            &mut data.q,
            &mut data.q_bar,
            &mut data.r,
            &mut data.r_bar,
            &mut data.g,
            &mut data.g_bar,
        ] {
            let s = SymMatrix::symmetrize(std::mem::replace(m, DMatrix::zeros(0, 0)));
            *m = s.into_inner();
        }
        let hat = hat_transform(&data);
        Ok(Self { data, hat, report })
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn hat(&self) -> &HatCoefficients {
        &self.hat
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// True when no Brownian term can ever be active (C, C̄, D, D̄ all zero).
    pub fn is_noise_free(&self) -> bool {
        let p = &self.data;
        [&p.c, &p.c_bar, &p.d, &p.d_bar].iter().all(|m| m.iter().all(|&v| v == 0.0))
    }
}

impl Deref for Problem {
    type Target = ProblemData;

    fn deref(&self) -> &ProblemData {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::example_problem;

    fn identity_r_problem() -> ProblemData {
        let mut p = ProblemData::zeros(2, 2, 1.0);
        p.r = DMatrix::identity(2, 2);
        p
    }

    #[test]
    fn example_passes_validation() {
        let report = validate_problem(&example_problem()).unwrap();
        assert!(report.passed());
        let qq = report.conditions.iter().find(|c| c.name == "Q+Qbar >= 0").unwrap();
        assert_eq!(qq.min_eigenvalue, 0.0);
        let rr = report.conditions.iter().find(|c| c.name == "R+Rbar > 0").unwrap();
        assert_eq!(rr.min_eigenvalue, 0.5);
    }

    #[test]
    fn identity_r_passes() {
        assert!(validate_problem(&identity_r_problem()).unwrap().passed());
    }

    #[test]
    fn singular_r_hat_fails() {
        let mut p = example_problem();
        p.r_bar[(0, 0)] = -1.0;
        match validate_problem(&p).unwrap_err() {
            Error::AssumptionViolated { condition, eigenvalue } => {
                assert_eq!(condition, "R+Rbar > 0");
                assert_eq!(eigenvalue, 0.0);
            }
            e => panic!("unexpected {e:?}"),
        }
        // the non-failing report is still available
        let report = assess_assumptions(&p).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn shape_and_finite_errors() {
        let mut p = identity_r_problem();
        p.b = DMatrix::zeros(3, 2);
        assert!(matches!(validate_problem(&p), Err(Error::ShapeMismatch { name, .. }) if name == "B"));
        let mut p = identity_r_problem();
        p.a[(0, 1)] = f64::NAN;
        assert!(matches!(validate_problem(&p), Err(Error::NonFinite { name }) if name == "A"));
    }

    #[test]
    fn hat_of_example() {
        let h = hat_transform(&example_problem());
        assert_eq!(h.a[(0, 0)], 1.0);
        assert_eq!(h.b[(0, 0)], 1.0);
        assert_eq!(h.c[(0, 0)], 0.0);
        assert_eq!(h.d[(0, 0)], 1.0);
        assert_eq!(h.q[(0, 0)], 0.0);
        assert_eq!(h.r[(0, 0)], 0.5);
        assert_eq!(h.g[(0, 0)], 1.0);
    }

    #[test]
    fn hat_with_zero_bars_is_plain() {
        let mut p = identity_r_problem();
        p.a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        p.q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let h = hat_transform(&p);
        assert_eq!(h.a, p.a);
        assert_eq!(h.q.as_matrix(), &p.q);
        assert_eq!(h.r.as_matrix(), &p.r);
    }

    #[test]
    fn hat_cancellation() {
        let mut p = identity_r_problem();
        p.a = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 4.0]);
        p.a_bar = -p.a.clone();
        assert_eq!(hat_transform(&p).a, DMatrix::zeros(2, 2));
    }

    #[test]
    fn json_roundtrip_and_defaults() {
        let p = ProblemData::from_json_str(r#"{"n":1,"m":1,"T":1,"x0":[2],"R":[1]}"#).unwrap();
        assert_eq!(p.x0[0], 2.0);
        assert_eq!(p.r[(0, 0)], 1.0);
        assert_eq!(p.a, DMatrix::zeros(1, 1));
        let ex = example_problem();
        let back = ProblemData::from_json_str(&ex.to_json_value().to_string()).unwrap();
        assert_eq!(back, ex);
    }

    #[test]
    fn json_row_major_layout() {
        let p = ProblemData::from_json_str(r#"{"n":2,"m":1,"T":1,"A":[1,2,3,4],"B":[[5],[6]],"R":[1]}"#).unwrap();
        assert_eq!(p.a[(0, 1)], 2.0);
        assert_eq!(p.a[(1, 0)], 3.0);
        assert_eq!(p.b[(1, 0)], 6.0);
    }

    #[test]
    fn json_errors_name_the_key() {
        let err = ProblemData::from_json_str(r#"{"n":2,"m":1,"T":1,"A":[1,2,3]}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidProblemFile { key: Some(k), .. } if k == "A"));
        let err = ProblemData::from_json_str(r#"{"n":2,"m":1,"T":1,"Q":"x"}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidProblemFile { key: Some(k), .. } if k == "Q"));
        let err = ProblemData::from_json_str(r#"{"m":1,"T":1}"#).unwrap_err();
        assert!(matches!(err, Error::InvalidProblemFile { key: Some(k), .. } if k == "n"));
        let err = ProblemData::from_json_str("{not json").unwrap_err();
        assert!(matches!(err, Error::InvalidProblemFile { key: None, .. }));
    }

    #[test]
    fn problem_symmetrizes_weights() {
        let mut p = identity_r_problem();
        p.q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-14, 1.0]);
        let prob = Problem::new(p).unwrap();
        assert_eq!(prob.q[(0, 1)], prob.q[(1, 0)]);
    }
}
