//! The JSON problem document: field family, parameters, domain radius,
//! sampling budgets and seed.
//!
//! ```json
//! {
//!   "family": "affine",
//!   "dimension": 2,
//!   "rho": 1.0,
//!   "parameters": { "A": [[1, 0], [0, 1]], "b": [2, 0] },
//!   "budgets": { "theta_samples": 1000, "gamma_samples": 1000,
//!                "minty_starts": 32, "verify_samples": 10000 },
//!   "seed": 7
//! }
//! ```
//!
//! Unknown keys are rejected at every level. `budgets` and `seed` are optional.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::certify::CertifyOptions;
use crate::fields::{
    make_affine_field, make_constant_field, make_gradient_quadratic_field,
    make_smooth_perturbed_field, FieldError, VectorFieldSpec,
};
use crate::linalg::{Matrix, Vector};
use crate::solve::{theorem_2_4_shift, SolveError};

const TOP_KEYS: [&str; 6] = [
    "family",
    "dimension",
    "rho",
    "parameters",
    "budgets",
    "seed",
];
const PARAM_KEYS: [&str; 4] = ["A", "b", "eps", "d"];
const BUDGET_KEYS: [&str; 4] = [
    "theta_samples",
    "gamma_samples",
    "minty_starts",
    "verify_samples",
];

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("malformed problem document: {0}")]
    Malformed(String),
    #[error("problem document must be a JSON object")]
    NotAnObject,
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unknown field family `{0}`")]
    UnknownFamily(String),
    #[error("rho must be a positive finite number, got {0}")]
    NonPositiveRho(f64),
    #[error("dimension mismatch: {what} has size {got}, dimension is {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("parameter `{key}` does not apply to family `{family}`")]
    UnexpectedParameter { family: FieldFamily, key: String },
    #[error("budget `{0}` must be at least 1")]
    InvalidBudget(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Shift(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFamily {
    Constant,
    Affine,
    AffinePlusSmooth,
    GradientQuadratic,
    /// Gradient-quadratic `Ψ` minus the shift `w = Ψ(0) + 2M₁ρ·d`.
    Shifted,
}

impl FieldFamily {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "constant" => Self::Constant,
            "affine" => Self::Affine,
            "affine_plus_smooth" => Self::AffinePlusSmooth,
            "gradient_quadratic" => Self::GradientQuadratic,
            "shifted" => Self::Shifted,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Affine => "affine",
            Self::AffinePlusSmooth => "affine_plus_smooth",
            Self::GradientQuadratic => "gradient_quadratic",
            Self::Shifted => "shifted",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Self::Constant => &["b"],
            Self::Affine => &["A", "b"],
            Self::AffinePlusSmooth => &["A", "b", "eps"],
            Self::GradientQuadratic => &[],
            Self::Shifted => &["d"],
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            Self::Constant => &["b"],
            Self::Affine => &["A", "b"],
            Self::AffinePlusSmooth => &["A", "b", "eps"],
            Self::GradientQuadratic => &["b"],
            Self::Shifted => &["b", "d"],
        }
    }
}

impl std::fmt::Display for FieldFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Parameters {
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub theta_samples: usize,
    pub gamma_samples: usize,
    pub minty_starts: usize,
    pub verify_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            theta_samples: 1000,
            gamma_samples: 1000,
            minty_starts: 32,
            verify_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub family: FieldFamily,
    pub dimension: usize,
    pub rho: f64,
    pub parameters: Parameters,
    pub budgets: Budgets,
    pub seed: u64,
}

/// Parses a problem document and builds its field.
pub fn parse_problem(text: &str) -> Result<(VectorFieldSpec, ProblemConfig), ProblemError> {
    let config = ProblemConfig::from_json_str(text)?;
    let field = config.build_field()?;
    Ok((field, config))
}

fn invalid(key: &str, reason: impl Into<String>) -> ProblemError {
    ProblemError::InvalidValue {
        key: key.to_owned(),
        reason: reason.into(),
    }
}

fn check_keys(
    obj: &Map<String, Value>,
    allowed: &[&str],
    prefix: &str,
) -> Result<(), ProblemError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ProblemError::UnknownKey(format!("{prefix}{k}"))),
        None => Ok(()),
    }
}

fn as_f64(v: &Value, key: &str) -> Result<f64, ProblemError> {
    v.as_f64().ok_or_else(|| invalid(key, "expected a number"))
}

fn as_vec(v: &Value, key: &str) -> Result<Vec<f64>, ProblemError> {
    v.as_array()
        .ok_or_else(|| invalid(key, "expected an array of numbers"))?
        .iter()
        .map(|x| as_f64(x, key))
        .collect()
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<(), ProblemError> {
    if got == expected {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch {
            what: what.to_owned(),
            expected,
            got,
        })
    }
}

impl ProblemConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ProblemError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| ProblemError::Malformed(e.to_string()))?;
        let obj = value.as_object().ok_or(ProblemError::NotAnObject)?;
        check_keys(obj, &TOP_KEYS, "")?;
        let get = |key: &str| {
            obj.get(key)
                .ok_or_else(|| ProblemError::MissingKey(key.to_owned()))
        };

        let family_name = get("family")?
            .as_str()
            .ok_or_else(|| invalid("family", "expected a string"))?;
        let family = FieldFamily::parse(family_name)
            .ok_or_else(|| ProblemError::UnknownFamily(family_name.to_owned()))?;

        let dimension = get("dimension")?
            .as_u64()
            .filter(|&d| d >= 1)
            .ok_or_else(|| invalid("dimension", "expected an integer >= 1"))?
            as usize;

        let rho = as_f64(get("rho")?, "rho")?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(ProblemError::NonPositiveRho(rho));
        }

        let params_obj = get("parameters")?
            .as_object()
            .ok_or_else(|| invalid("parameters", "expected an object"))?;
        check_keys(params_obj, &PARAM_KEYS, "parameters.")?;
        for key in params_obj.keys() {
            if !family.allowed().contains(&key.as_str()) {
                return Err(ProblemError::UnexpectedParameter {
                    family,
                    key: key.clone(),
                });
            }
        }
        if let Some(key) = family
            .required()
            .iter()
            .find(|k| !params_obj.contains_key(**k))
        {
            return Err(ProblemError::MissingKey(format!("parameters.{key}")));
        }

        let mut parameters = Parameters::default();
        if let Some(a) = params_obj.get("A") {
            let rows = a
                .as_array()
                .ok_or_else(|| invalid("parameters.A", "expected an array of rows"))?;
            check_len("A rows", rows.len(), dimension)?;
            let mut parsed = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let row = as_vec(row, "parameters.A")?;
                check_len(&format!("A row {i}"), row.len(), dimension)?;
                parsed.push(row);
            }
            parameters.a = Some(parsed);
        }
        if let Some(b) = params_obj.get("b") {
            let b = as_vec(b, "parameters.b")?;
            check_len("b", b.len(), dimension)?;
            parameters.b = Some(b);
        }
        if let Some(eps) = params_obj.get("eps") {
            parameters.eps = Some(as_f64(eps, "parameters.eps")?);
        }
        if let Some(d) = params_obj.get("d") {
            let d = as_vec(d, "parameters.d")?;
            check_len("d", d.len(), dimension)?;
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(invalid(
                    "parameters.d",
                    format!("expected a unit vector, norm is {norm}"),
                ));
            }
            parameters.d = Some(d);
        }

        let mut budgets = Budgets::default();
        if let Some(b) = obj.get("budgets") {
            let b = b
                .as_object()
                .ok_or_else(|| invalid("budgets", "expected an object"))?;
            check_keys(b, &BUDGET_KEYS, "budgets.")?;
            for (key, value) in b {
                let n = value.as_u64().ok_or_else(|| {
                    invalid(&format!("budgets.{key}"), "expected a non-negative integer")
                })? as usize;
                if n == 0 {
                    return Err(ProblemError::InvalidBudget(key.clone()));
                }
                match key.as_str() {
                    "theta_samples" => budgets.theta_samples = n,
                    "gamma_samples" => budgets.gamma_samples = n,
                    "minty_starts" => budgets.minty_starts = n,
                    _ => budgets.verify_samples = n,
                }
            }
        }

        let seed = match obj.get("seed") {
            Some(s) => s
                .as_u64()
                .ok_or_else(|| invalid("seed", "expected a non-negative integer"))?,
            None => 0,
        };

        Ok(Self {
            family,
            dimension,
            rho,
            parameters,
            budgets,
            seed,
        })
    }

    /// Canonical document text; parses back to an identical config.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            theta_samples: self.budgets.theta_samples,
            gamma_samples: self.budgets.gamma_samples,
            seed: self.seed,
            ..CertifyOptions::default()
        }
    }

    fn b_or_zero(&self) -> Vector {
        self.parameters
            .b
            .as_ref()
            .map(|b| Vector::from_column_slice(b))
            .unwrap_or_else(|| Vector::zeros(self.dimension))
    }

    fn matrix(&self) -> Matrix {
        let rows = self.parameters.a.as_ref().expect("validated at parse time");
        let n = self.dimension;
        Matrix::from_fn(n, n, |i, j| rows[i][j])
    }

    pub fn build_field(&self) -> Result<VectorFieldSpec, ProblemError> {
        let b = self.b_or_zero();
        let field = match self.family {
            FieldFamily::Constant => make_constant_field(b, self.rho)?,
            FieldFamily::Affine => make_affine_field(self.matrix(), b, self.rho)?,
            FieldFamily::AffinePlusSmooth => make_smooth_perturbed_field(
                self.matrix(),
                b,
                self.parameters.eps.expect("validated at parse time"),
                self.rho,
            )?,
            FieldFamily::GradientQuadratic => make_gradient_quadratic_field(b, self.rho)?,
            FieldFamily::Shifted => {
                let psi = make_gradient_quadratic_field(b, self.rho)?;
                let d = Vector::from_column_slice(self.parameters.d.as_ref().expect("validated"));
                theorem_2_4_shift(&psi, &d, &self.certify_options())?.field
            }
        };
        Ok(field)
    }
}
