//! JSON formats for MDPs, factored models, norm specifications and batch
//! experiment configs. Floats use shortest round-trip serialization, so an
//! export/import cycle reproduces every matrix bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factored::{FactoredLinearModel, RightFactor};
use crate::mdp::Mdp;
use crate::norms::{NormSpec, PExp};

/// `transitions[a][x][y]`, `rewards[a][x]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpJson {
    pub gamma: f64,
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|x| m.row(x).iter().copied().collect()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], context: &'static str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidModel(format!("{context}: ragged or empty matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |x, y| rows[x][y]))
}

pub fn mdp_to_json(mdp: &Mdp) -> MdpJson {
    MdpJson {
        gamma: mdp.gamma(),
        rewards: mdp.rewards().iter().map(|r| r.iter().copied().collect()).collect(),
        transitions: mdp.transitions().iter().map(matrix_to_rows).collect(),
    }
}

pub fn mdp_from_json(json: &MdpJson) -> Result<Mdp> {
    let transitions = json
        .transitions
        .iter()
        .map(|rows| rows_to_matrix(rows, "transitions"))
        .collect::<Result<Vec<_>>>()?;
    let rewards = json.rewards.iter().map(|r| DVector::from_vec(r.clone())).collect();
    Mdp::new(json.gamma, transitions, rewards)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RightFactorJson {
    General { matrix: Vec<Vec<f64>> },
    Joinhom { scale: Vec<f64>, index: Vec<usize> },
}

pub fn right_factor_to_json(r: &RightFactor, m: usize) -> RightFactorJson {
    match r {
        RightFactor::General(mat) => RightFactorJson::General { matrix: matrix_to_rows(mat) },
        RightFactor::JoinHom { scale, index } => {
            let _ = m;
            RightFactorJson::Joinhom {
                scale: scale.iter().copied().collect(),
                index: index.clone(),
            }
        }
    }
}

pub fn right_factor_from_json(json: &RightFactorJson) -> Result<RightFactor> {
    match json {
        RightFactorJson::General { matrix } => {
            Ok(RightFactor::General(rows_to_matrix(matrix, "R")?))
        }
        RightFactorJson::Joinhom { scale, index } => {
            if scale.len() != index.len() {
                return Err(Error::InvalidModel("joinhom scale/index length mismatch".into()));
            }
            if scale.iter().any(|&a| a < 0.0 || !a.is_finite()) {
                return Err(Error::InvalidModel("joinhom scales must be nonnegative".into()));
            }
            Ok(RightFactor::JoinHom {
                scale: DVector::from_vec(scale.clone()),
                index: index.clone(),
            })
        }
    }
}

/// The factored part of a model; discount and rewards come from the MDP it
/// is paired with. `q[a][x][i]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub r: RightFactorJson,
    #[serde(rename = "piA", default, skip_serializing_if = "Option::is_none")]
    pub pi_a: Option<Vec<RightFactorJson>>,
}

pub fn model_to_json(model: &FactoredLinearModel) -> ModelJson {
    let m = model.num_states();
    let same_as_r = (0..model.num_actions()).all(|a| model.pi_a(a) == model.right_factor());
    ModelJson {
        n: model.compressed_dim(),
        q: model.q_all().iter().map(matrix_to_rows).collect(),
        r: right_factor_to_json(model.right_factor(), m),
        pi_a: if same_as_r {
            None
        } else {
            Some(
                (0..model.num_actions())
                    .map(|a| right_factor_to_json(model.pi_a(a), m))
                    .collect(),
            )
        },
    }
}

pub fn model_from_json(json: &ModelJson, mdp: &Mdp) -> Result<FactoredLinearModel> {
    let q = json
        .q
        .iter()
        .map(|rows| rows_to_matrix(rows, "Q"))
        .collect::<Result<Vec<_>>>()?;
    if q.iter().any(|qa| qa.ncols() != json.n) {
        return Err(Error::InvalidModel("Q columns disagree with declared n".into()));
    }
    let r = right_factor_from_json(&json.r)?;
    match &json.pi_a {
        None => FactoredLinearModel::new(mdp.gamma(), mdp.rewards().to_vec(), q, r),
        Some(pi_a) => {
            let pi_a = pi_a.iter().map(right_factor_from_json).collect::<Result<Vec<_>>>()?;
            FactoredLinearModel::with_pi_a(mdp.gamma(), mdp.rewards().to_vec(), q, r, pi_a)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PExpJson {
    Num(u8),
    Word(String),
}

pub fn p_from_json(json: &PExpJson) -> Result<PExp> {
    match json {
        PExpJson::Num(1) => Ok(PExp::One),
        PExpJson::Num(2) => Ok(PExp::Two),
        PExpJson::Word(w) if w.eq_ignore_ascii_case("inf") => Ok(PExp::Inf),
        other => Err(Error::InvalidNorm(format!("unsupported exponent {other:?}; use 1, 2 or \"inf\""))),
    }
}

pub fn p_to_json(p: PExp) -> PExpJson {
    match p {
        PExp::One => PExpJson::Num(1),
        PExp::Two => PExpJson::Num(2),
        PExp::Inf => PExpJson::Word("inf".into()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NormSpecJson {
    Sup,
    Wsup { w: Vec<f64> },
    Lp { p: PExpJson, mu: Vec<f64> },
}

pub fn norm_spec_from_json(json: &NormSpecJson) -> Result<NormSpec> {
    let spec = match json {
        NormSpecJson::Sup => NormSpec::Sup,
        NormSpecJson::Wsup { w } => NormSpec::WeightedSup(DVector::from_vec(w.clone())),
        NormSpecJson::Lp { p, mu } => NormSpec::Lp {
            p: p_from_json(p)?,
            mu: DVector::from_vec(mu.clone()),
        },
    };
    Ok(spec)
}

pub fn norm_spec_to_json(spec: &NormSpec) -> NormSpecJson {
    match spec {
        NormSpec::Sup => NormSpecJson::Sup,
        NormSpec::WeightedSup(w) => NormSpecJson::Wsup { w: w.iter().copied().collect() },
        NormSpec::Lp { p, mu } => NormSpecJson::Lp {
            p: p_to_json(*p),
            mu: mu.iter().copied().collect(),
        },
    }
}

/// Batch sweep configuration. Ranges are inclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub n_max: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_p")]
    pub p: PExpJson,
}

fn default_noise() -> f64 {
    0.05
}

fn default_p() -> PExpJson {
    PExpJson::Num(1)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.m_min < 1 || self.m_min > self.m_max || self.k_min < 1 || self.k_min > self.k_max
        {
            return Err(Error::InvalidParameter("empty size range".into()));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma_min)
            || !(0.0..1.0).contains(&self.gamma_max)
            || self.gamma_min > self.gamma_max
        {
            return Err(Error::InvalidParameter("gamma range must sit inside [0, 1)".into()));
        }
        if self.noise < 0.0 {
            return Err(Error::InvalidParameter("noise must be nonnegative".into()));
        }
        p_from_json(&self.p)?;
        Ok(())
    }
}
